//! Summary report: per-transcript verdicts, which toggles each run flipped
//! relative to the scenario defaults, and the attack-overview table for the
//! two fully implemented attacks (IE = infected authenticator,
//! AD = authenticator deception).

use std::path::Path;

use anyhow::{anyhow, Result};
use serde_json::{json, Value};

use fidosim_core::scenario::{
    default_config, derive_verdict, Verdict, AUTHENTICATOR_DECEPTION_LABELS,
    INFECTED_AUTHENTICATOR_LABELS,
};
use fidosim_core::transcript::Transcript;

pub struct SummaryRow {
    pub file: String,
    pub scenario: String,
    pub seed: u64,
    pub verdict: Verdict,
    pub ablations: Vec<String>,
}

pub struct SummaryReport {
    rows: Vec<SummaryRow>,
}

pub const TABLE1_CRITERIA: [&str; 5] = [
    "Stealthiness",
    "Feasibility",
    "Victim Interaction",
    "Time Consumption",
    "Privileges",
];

pub fn table1_ie() -> [&'static str; 5] {
    let l = INFECTED_AUTHENTICATOR_LABELS;
    [
        l.stealthiness,
        l.feasibility,
        l.victim_interaction,
        l.time_consumption,
        l.privileges,
    ]
}

pub fn table1_ad() -> [&'static str; 5] {
    let l = AUTHENTICATOR_DECEPTION_LABELS;
    [
        l.stealthiness,
        l.feasibility,
        l.victim_interaction,
        l.time_consumption,
        l.privileges,
    ]
}

/// Build one report row from a recorded transcript: verdict re-derived from
/// the events, ablations read off the scenario.start config echo.
pub fn row_from_transcript(path: &Path, transcript: &Transcript) -> Result<SummaryRow> {
    let start = transcript
        .find_all("scenario.start")
        .next()
        .ok_or_else(|| anyhow!("{}: no scenario.start event", path.display()))?;
    let scenario = start
        .payload
        .get("scenario")
        .and_then(Value::as_str)
        .ok_or_else(|| anyhow!("{}: malformed scenario.start", path.display()))?
        .to_string();
    let seed = start
        .payload
        .get("seed")
        .and_then(Value::as_u64)
        .unwrap_or(0);
    let verdict = derive_verdict(transcript).map_err(|e| anyhow!("{e}"))?;

    // Which toggles and policy bits differ from the scenario's defaults.
    let mut ablations = Vec::new();
    if let Ok(defaults) = default_config(&scenario) {
        let default_toggles = serde_json::to_value(defaults.toggles).unwrap_or(Value::Null);
        let default_policy = serde_json::to_value(defaults.victim_policy).unwrap_or(Value::Null);
        for (recorded, baseline, prefix) in [
            (start.payload.get("toggles"), &default_toggles, ""),
            (
                start.payload.get("victim_policy"),
                &default_policy,
                "policy.",
            ),
        ] {
            if let (Some(Value::Object(recorded)), Value::Object(baseline)) = (recorded, baseline) {
                for (key, value) in recorded {
                    if baseline.get(key) != Some(value) {
                        ablations.push(format!("{prefix}{key}={value}"));
                    }
                }
            }
        }
    }

    Ok(SummaryRow {
        file: path.display().to_string(),
        scenario,
        seed,
        verdict,
        ablations,
    })
}

impl SummaryReport {
    pub fn new(rows: Vec<SummaryRow>) -> Self {
        SummaryReport { rows }
    }

    pub fn render_text(&self) -> String {
        let mut out = String::new();
        out.push_str("Scenario runs\n");
        let widths = (
            self.rows
                .iter()
                .map(|r| r.scenario.len())
                .max()
                .unwrap_or(8)
                .max("scenario".len()),
            self.rows
                .iter()
                .map(|r| r.verdict.to_string().len())
                .max()
                .unwrap_or(7)
                .max("verdict".len()),
        );
        out.push_str(&format!(
            "  {:<sw$}  {:>4}  {:<vw$}  ablations\n",
            "scenario",
            "seed",
            "verdict",
            sw = widths.0,
            vw = widths.1
        ));
        for row in &self.rows {
            let ablations = if row.ablations.is_empty() {
                "-".to_string()
            } else {
                row.ablations.join(", ")
            };
            out.push_str(&format!(
                "  {:<sw$}  {:>4}  {:<vw$}  {}\n",
                row.scenario,
                row.seed,
                row.verdict.to_string(),
                ablations,
                sw = widths.0,
                vw = widths.1
            ));
        }

        let has_ie = self
            .rows
            .iter()
            .any(|r| r.scenario == "infected_authenticator");
        let has_ad = self
            .rows
            .iter()
            .any(|r| r.scenario == "authenticator_deception");
        if has_ie || has_ad {
            out.push('\n');
            out.push_str("Overview of the attacks\n");
            out.push_str(&format!("  {:<20}{:<10}{}\n", "Criterion", "IE", "AD"));
            let ie = table1_ie();
            let ad = table1_ad();
            for (i, criterion) in TABLE1_CRITERIA.iter().enumerate() {
                out.push_str(&format!("  {:<20}{:<10}{}\n", criterion, ie[i], ad[i]));
            }
        }
        out
    }

    pub fn machine_record(&self) -> Value {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| {
                json!({
                    "file": r.file,
                    "scenario": r.scenario,
                    "seed": r.seed,
                    "verdict": r.verdict.to_string(),
                    "ablations": r.ablations,
                })
            })
            .collect();
        let ie = table1_ie();
        let ad = table1_ad();
        json!({
            "runs": rows,
            "table1": {
                "criteria": TABLE1_CRITERIA,
                "IE": ie,
                "AD": ad,
            },
        })
    }
}
