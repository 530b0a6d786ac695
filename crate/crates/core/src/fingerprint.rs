//! Content fingerprints used to tie cached tables, models and reports to the
//! exact inputs and configuration that produced them.

use sha2::{Digest, Sha256};

/// Incremental SHA-256 hasher producing a short hex fingerprint.
pub struct Fingerprinter {
    hasher: Sha256,
}

impl Fingerprinter {
    pub fn new(tag: &str) -> Self {
        let mut hasher = Sha256::new();
        hasher.update(tag.as_bytes());
        hasher.update([0u8]);
        Fingerprinter { hasher }
    }

    pub fn push_bytes(&mut self, bytes: &[u8]) {
        self.hasher.update(bytes);
        self.hasher.update([0u8]);
    }

    pub fn push_str(&mut self, s: &str) {
        self.push_bytes(s.as_bytes());
    }

    pub fn push_usize(&mut self, v: usize) {
        self.push_bytes(&(v as u64).to_le_bytes());
    }

    pub fn push_f64(&mut self, v: f64) {
        self.hasher.update(v.to_le_bytes());
    }

    pub fn push_f64s(&mut self, vs: &[f64]) {
        for v in vs {
            self.hasher.update(v.to_le_bytes());
        }
        self.hasher.update([0u8]);
    }

    /// Hex digest, truncated to 16 bytes (32 hex chars); plenty for cache keys.
    pub fn finish(self) -> String {
        let digest = self.hasher.finalize();
        digest[..16].iter().map(|b| format!("{b:02x}")).collect()
    }
}
