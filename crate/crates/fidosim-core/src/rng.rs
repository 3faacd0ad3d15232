//! Deterministic randomness for the simulation.
//!
//! Every random draw in a run comes from one `SimRng` seeded by the scenario
//! seed. SHA-256 in counter mode is used instead of a platform RNG so that the
//! byte stream is identical on every host and across releases.

use sha2::{Digest, Sha256};

#[derive(Clone)]
pub struct SimRng {
    key: [u8; 32],
    counter: u64,
}

impl SimRng {
    pub fn from_seed(seed: u64) -> Self {
        let mut h = Sha256::new();
        h.update(b"fidosim.rng.v1");
        h.update(seed.to_be_bytes());
        Self {
            key: h.finalize().into(),
            counter: 0,
        }
    }

    pub fn from_key(key: [u8; 32]) -> Self {
        Self { key, counter: 0 }
    }

    fn block(&mut self) -> [u8; 32] {
        let mut h = Sha256::new();
        h.update(self.key);
        h.update(self.counter.to_be_bytes());
        self.counter += 1;
        h.finalize().into()
    }

    pub fn bytes32(&mut self) -> [u8; 32] {
        self.block()
    }

    pub fn bytes16(&mut self) -> [u8; 16] {
        let block = self.block();
        let mut out = [0u8; 16];
        out.copy_from_slice(&block[..16]);
        out
    }

    pub fn next_u64(&mut self) -> u64 {
        let block = self.block();
        u64::from_be_bytes(block[..8].try_into().unwrap())
    }

    /// Split off an independent generator. The label keeps sibling forks
    /// (e.g. the RP's challenges vs. the infected seed) from sharing a stream.
    pub fn fork(&mut self, label: &str) -> SimRng {
        let mut h = Sha256::new();
        h.update(self.block());
        h.update(label.as_bytes());
        SimRng {
            key: h.finalize().into(),
            counter: 0,
        }
    }
}
