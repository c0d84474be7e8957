//! Byte-level Shannon entropy and a plaintext/encoded/encrypted heuristic
//! over payload byte streams.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Below this many bytes the entropy estimate is flagged as low-sample.
pub const SAMPLE_FLOOR_BYTES: u64 = 100 * 1024;

/// Byte-value histogram; entropy is a pure fold over it, so chunked inputs
/// can be folded in parallel and merged by addition.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ByteHistogram {
    counts: [u64; 256],
    total: u64,
}

impl Default for ByteHistogram {
    fn default() -> Self {
        ByteHistogram {
            counts: [0; 256],
            total: 0,
        }
    }
}

impl ByteHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn observe(&mut self, data: &[u8]) {
        for &b in data {
            self.counts[b as usize] += 1;
        }
        self.total += data.len() as u64;
    }

    pub fn merge(&mut self, other: &ByteHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `H = -sum p(b) log2 p(b)` over the 256-symbol empirical
    /// distribution, in bits per byte (0..=8).
    pub fn entropy(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let t = self.total as f64;
        self.counts
            .iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let p = c as f64 / t;
                -p * p.log2()
            })
            .sum()
    }

    /// Fraction of printable ASCII (0x20..=0x7e plus tab/newline/CR).
    pub fn printable_fraction(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        let printable: u64 = (0x20..=0x7eu8)
            .map(|b| self.counts[b as usize])
            .sum::<u64>()
            + self.counts[b'\t' as usize]
            + self.counts[b'\n' as usize]
            + self.counts[b'\r' as usize];
        printable as f64 / self.total as f64
    }
}

/// Bits-per-byte Shannon entropy of a byte stream. Empty input is fatal.
pub fn shannon_entropy(data: &[u8]) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::invalid("entropy of empty input is undefined"));
    }
    let mut h = ByteHistogram::new();
    h.observe(data);
    Ok(h.entropy())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    PlaintextLike,
    EncodedLike,
    EncryptedLike,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::PlaintextLike => "plaintext-like",
            Verdict::EncodedLike => "encoded-like",
            Verdict::EncryptedLike => "encrypted-like",
        })
    }
}

/// Cutoffs separating the three verdicts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Printable-ASCII fraction at or above which a stream is plaintext-like.
    pub printable_fraction: f64,
    /// Entropy (bits/byte) at or above which a non-plaintext stream is
    /// encrypted-like; below, encoded-like.
    pub encrypted_entropy: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            printable_fraction: 0.85,
            encrypted_entropy: 7.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub total_bytes: u64,
    pub entropy: f64,
    pub printable_fraction: f64,
    pub verdict: Verdict,
    pub thresholds: Thresholds,
    /// Set when the sample is under 100 KB and the estimate is rough.
    pub low_sample: bool,
    /// High-entropy verdicts carry a caveat: compressed media also shows
    /// near-random bytes without being encrypted.
    pub note: Option<String>,
}

/// Classifies a byte stream: plaintext-like on high printable fraction,
/// otherwise encrypted-like above the entropy cutoff, else encoded-like.
pub fn classify_stream(data: &[u8], thresholds: Thresholds) -> Result<EntropyReport> {
    if data.is_empty() {
        return Err(Error::invalid("cannot classify an empty stream"));
    }
    let mut hist = ByteHistogram::new();
    hist.observe(data);
    let entropy = hist.entropy();
    let printable_fraction = hist.printable_fraction();
    let verdict = if printable_fraction >= thresholds.printable_fraction {
        Verdict::PlaintextLike
    } else if entropy >= thresholds.encrypted_entropy {
        Verdict::EncryptedLike
    } else {
        Verdict::EncodedLike
    };
    let note = (verdict == Verdict::EncryptedLike).then(|| {
        "high entropy also arises from compressed media; encryption not certain".to_string()
    });
    Ok(EntropyReport {
        total_bytes: hist.total(),
        entropy,
        printable_fraction,
        verdict,
        thresholds,
        low_sample: hist.total() < SAMPLE_FLOOR_BYTES,
        note,
    })
}

/// Per-chunk verdict counts for mixed streams: (plaintext, encoded,
/// encrypted) over fixed-size chunks.
pub fn chunk_verdicts(
    data: &[u8],
    chunk_size: usize,
    thresholds: Thresholds,
) -> Result<(usize, usize, usize)> {
    if chunk_size == 0 {
        return Err(Error::invalid("chunk size must be positive"));
    }
    let mut tallies = (0, 0, 0);
    for chunk in data.chunks(chunk_size) {
        match classify_stream(chunk, thresholds)?.verdict {
            Verdict::PlaintextLike => tallies.0 += 1,
            Verdict::EncodedLike => tallies.1 += 1,
            Verdict::EncryptedLike => tallies.2 += 1,
        }
    }
    Ok(tallies)
}
