//! Command-line front door for the testbed: run scenarios against configs,
//! re-derive verdicts from recorded transcripts, and summarize runs into the
//! attack-overview report.
//!
//! Exit codes: 0 when the verdict matches the expectation, 2 on a verdict
//! mismatch, 1 on any internal error (unknown scenario, bad config, IO).

mod report;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};

use fidosim_core::scenario::{
    default_config, derive_verdict, expected_verdict, run_scenario, scenario_names, ConfigPatch,
    ScenarioConfig, ScenarioOutcome, Verdict,
};
use fidosim_core::transcript::Transcript;

#[derive(Parser)]
#[command(name = "fidosim")]
#[command(about = "Deterministic FIDO2/WebAuthn attack-scenario testbed")]
#[command(version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario (or all of them) and check the verdict.
    Run {
        /// Scenario name; see `fidosim list`.
        #[arg(long, conflicts_with = "all")]
        scenario: Option<String>,

        /// JSON config overlay applied on top of the scenario defaults.
        #[arg(long)]
        config: Option<PathBuf>,

        /// Simulation seed; overrides the config file.
        #[arg(long)]
        seed: Option<u64>,

        /// Write the transcript here, one canonical record per line.
        #[arg(long)]
        transcript: Option<PathBuf>,

        /// Verdict to expect, e.g. "attacker_session_as_victim" or
        /// "blocked(tls_untrusted)". Defaults to the scenario's own.
        #[arg(long)]
        expect: Option<String>,

        /// Run every registered scenario in parallel with default configs.
        #[arg(long)]
        all: bool,

        /// Transcript directory for --all (one file per scenario).
        #[arg(long, requires = "all")]
        out_dir: Option<PathBuf>,
    },

    /// Re-derive the verdict of a recorded transcript.
    Replay {
        #[arg(long)]
        transcript: PathBuf,
    },

    /// Summarize transcripts into verdicts, ablation diffs and the attack
    /// overview table.
    Summarize {
        /// Transcript files to summarize.
        transcripts: Vec<PathBuf>,

        /// Also write the machine-readable report here.
        #[arg(long)]
        machine: Option<PathBuf>,
    },

    /// List registered scenarios and their expected verdicts.
    List,
}

fn main() -> ExitCode {
    match dispatch() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn dispatch() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            scenario,
            config,
            seed,
            transcript,
            expect,
            all,
            out_dir,
        } => {
            if all {
                run_all(seed, out_dir.as_deref())
            } else {
                let scenario =
                    scenario.ok_or_else(|| anyhow!("--scenario or --all is required"))?;
                run_one(
                    &scenario,
                    config.as_deref(),
                    seed,
                    transcript.as_deref(),
                    expect.as_deref(),
                )
            }
        }
        Command::Replay { transcript } => replay(&transcript),
        Command::Summarize {
            transcripts,
            machine,
        } => summarize(&transcripts, machine.as_deref()),
        Command::List => {
            for name in scenario_names() {
                println!("{name}  (expected: {})", expected_verdict(name).unwrap());
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}

/// Scenario defaults, overlaid with the config file, overlaid with flags.
fn resolve_config(
    scenario: &str,
    config_path: Option<&Path>,
    seed: Option<u64>,
) -> Result<(ScenarioConfig, Option<String>)> {
    let base = default_config(scenario).map_err(|e| anyhow!("{e}"))?;
    let (mut config, expect) = match config_path {
        None => (base, None),
        Some(path) => {
            let text = fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            let patch = ConfigPatch::parse(&text).map_err(|e| anyhow!("{e}"))?;
            if let Some(named) = &patch.scenario {
                if named != scenario {
                    bail!(
                        "config names scenario {} but {} was requested",
                        named,
                        scenario
                    );
                }
            }
            let expect = patch.expect.clone();
            (patch.apply(base), expect)
        }
    };
    if let Some(seed) = seed {
        config.seed = seed;
    }
    Ok((config, expect))
}

fn run_one(
    scenario: &str,
    config_path: Option<&Path>,
    seed: Option<u64>,
    transcript_path: Option<&Path>,
    expect_flag: Option<&str>,
) -> Result<ExitCode> {
    let (config, expect_from_file) = resolve_config(scenario, config_path, seed)?;
    let outcome = run_scenario(scenario, &config).map_err(|e| anyhow!("{e}"))?;

    let expected = match expect_flag.or(expect_from_file.as_deref()) {
        Some(text) => {
            Verdict::parse(text).ok_or_else(|| anyhow!("unparseable expected verdict: {text}"))?
        }
        None => expected_verdict(scenario).map_err(|e| anyhow!("{e}"))?,
    };

    if let Some(path) = transcript_path {
        write_transcript(path, &outcome)?;
    }

    let matched = outcome.verdict == expected;
    println!(
        "scenario={} seed={} verdict={} expected={} match={}",
        scenario, config.seed, outcome.verdict, expected, matched
    );
    Ok(if matched {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn run_all(seed: Option<u64>, out_dir: Option<&Path>) -> Result<ExitCode> {
    if let Some(dir) = out_dir {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    // Scenarios own private worlds, so they can run truly in parallel.
    let results: Vec<(String, Result<ScenarioOutcome>)> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenario_names()
            .iter()
            .map(|name| {
                let handle = scope.spawn(move || {
                    let mut config = default_config(name).map_err(|e| anyhow!("{e}"))?;
                    if let Some(seed) = seed {
                        config.seed = seed;
                    }
                    run_scenario(name, &config).map_err(|e| anyhow!("{e}"))
                });
                (name.to_string(), handle)
            })
            .collect();
        handles
            .into_iter()
            .map(|(name, handle)| {
                let result = handle
                    .join()
                    .unwrap_or_else(|_| Err(anyhow!("scenario thread panicked")));
                (name, result)
            })
            .collect()
    });

    let mut all_matched = true;
    for (name, result) in results {
        let outcome = result?;
        let expected = expected_verdict(&name).map_err(|e| anyhow!("{e}"))?;
        let matched = outcome.verdict == expected;
        all_matched &= matched;
        if let Some(dir) = out_dir {
            write_transcript(&dir.join(format!("{name}.ndjson")), &outcome)?;
        }
        println!(
            "scenario={} verdict={} expected={} match={}",
            name, outcome.verdict, expected, matched
        );
    }
    Ok(if all_matched {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn write_transcript(path: &Path, outcome: &ScenarioOutcome) -> Result<()> {
    fs::write(path, outcome.transcript.to_ndjson())
        .with_context(|| format!("writing transcript {}", path.display()))
}

fn replay(path: &Path) -> Result<ExitCode> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let transcript =
        Transcript::parse_ndjson(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
    let verdict = derive_verdict(&transcript).map_err(|e| anyhow!("{e}"))?;
    println!("{verdict}");
    Ok(ExitCode::SUCCESS)
}

fn summarize(paths: &[PathBuf], machine_path: Option<&Path>) -> Result<ExitCode> {
    if paths.is_empty() {
        bail!("no transcripts given");
    }
    let mut rows = Vec::new();
    for path in paths {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let transcript =
            Transcript::parse_ndjson(&text).map_err(|e| anyhow!("{}: {e}", path.display()))?;
        rows.push(report::row_from_transcript(path, &transcript)?);
    }
    let summary = report::SummaryReport::new(rows);
    print!("{}", summary.render_text());
    if let Some(path) = machine_path {
        fs::write(path, summary.machine_record().to_string() + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(ExitCode::SUCCESS)
}
