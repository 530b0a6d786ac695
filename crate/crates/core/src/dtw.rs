//! Scalar-sequence dynamic time warping and assembly of per-pair,
//! per-channel distance vectors.
//!
//! Each channel of a multichannel sequence is warped independently; a pair
//! of samples therefore yields an n-vector of DTW distances. The full m x m
//! table of those vectors is the training input for metric learning and is
//! computed once per corpus, then cached.

use std::fs;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprinter;
use crate::seqdata::{Corpus, Sequence};

/// Cost of matching two scalar entries along a warping path.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LocalCost {
    /// |a - b|: keeps distances in signal units.
    #[default]
    Absolute,
    /// (a - b)^2
    Squared,
}

impl LocalCost {
    #[inline]
    fn eval(self, a: f64, b: f64) -> f64 {
        match self {
            LocalCost::Absolute => (a - b).abs(),
            LocalCost::Squared => (a - b) * (a - b),
        }
    }
}

/// DTW configuration: local cost, optional Sakoe-Chiba band, optional
/// per-channel z-scoring.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct DtwConfig {
    pub local_cost: LocalCost,
    /// Sakoe-Chiba window in timesteps; `None` = unconstrained.
    pub band_radius: Option<usize>,
    /// Z-score each channel before warping. Statistics come from the whole
    /// corpus at table-build time, so a table stays valid for any split.
    pub z_normalize: bool,
}

impl Default for DtwConfig {
    fn default() -> Self {
        DtwConfig {
            local_cost: LocalCost::Absolute,
            band_radius: None,
            z_normalize: false,
        }
    }
}

impl DtwConfig {
    fn digest_into(&self, fp: &mut Fingerprinter) {
        fp.push_str(match self.local_cost {
            LocalCost::Absolute => "absolute",
            LocalCost::Squared => "squared",
        });
        match self.band_radius {
            Some(r) => fp.push_usize(r + 1),
            None => fp.push_usize(0),
        }
        fp.push_usize(self.z_normalize as usize);
    }
}

/// Minimum summed local cost over monotone warping paths from (1,1) to
/// (T1,T2) with steps {(1,0),(0,1),(1,1)}.
pub fn dtw_scalar(a: &[f64], b: &[f64], cfg: &DtwConfig) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptySequence);
    }
    if let Some(radius) = cfg.band_radius {
        if a.len().abs_diff(b.len()) > radius {
            return Err(Error::BandTooNarrow {
                radius,
                len_a: a.len(),
                len_b: b.len(),
            });
        }
    }
    let cols = b.len();
    let mut prev = vec![f64::INFINITY; cols + 1];
    let mut curr = vec![f64::INFINITY; cols + 1];
    prev[0] = 0.0;
    for i in 1..=a.len() {
        let (lo, hi) = match cfg.band_radius {
            Some(r) => (i.saturating_sub(r).max(1), cols.min(i + r)),
            None => (1, cols),
        };
        curr.fill(f64::INFINITY);
        for j in lo..=hi {
            let cost = cfg.local_cost.eval(a[i - 1], b[j - 1]);
            let best = prev[j].min(curr[j - 1]).min(prev[j - 1]);
            curr[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    let result = prev[cols];
    if !result.is_finite() {
        return Err(Error::BandTooNarrow {
            radius: cfg.band_radius.unwrap_or(0),
            len_a: a.len(),
            len_b: b.len(),
        });
    }
    Ok(result)
}

/// Per-channel DTW distances between two samples: entry k warps channel k of
/// each sequence independently of the others.
pub fn dtw_component_vector(x: &Sequence, y: &Sequence, cfg: &DtwConfig) -> Result<Vec<f64>> {
    if x.num_channels() != y.num_channels() {
        return Err(Error::Dimension {
            expected: x.num_channels(),
            found: y.num_channels(),
        });
    }
    (0..x.num_channels())
        .map(|k| dtw_scalar(x.channel(k), y.channel(k), cfg))
        .collect()
}

const TABLE_MAGIC: &[u8] = b"WMTBL1\n";

#[derive(Serialize, Deserialize)]
struct TableHeader {
    m: usize,
    n: usize,
    fingerprint: String,
}

/// For every ordered sample pair (i, j), the n-vector of per-channel
/// distances. Symmetric with a zero diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceVectorTable {
    m: usize,
    n: usize,
    fingerprint: String,
    values: Vec<f64>,
}

impl DistanceVectorTable {
    /// Wrap raw values (length m*m*n, laid out (i*m + j)*n + k), validating
    /// the table invariants: zero diagonal, symmetry, nonnegative and finite.
    pub fn from_vectors(m: usize, n: usize, values: Vec<f64>, fingerprint: String) -> Result<Self> {
        if values.len() != m * m * n {
            return Err(Error::Validation(format!(
                "table payload has {} values, expected {}",
                values.len(),
                m * m * n
            )));
        }
        let table = DistanceVectorTable {
            m,
            n,
            fingerprint,
            values,
        };
        table.check_invariants()?;
        Ok(table)
    }

    fn check_invariants(&self) -> Result<()> {
        for i in 0..self.m {
            for j in 0..self.m {
                for (k, &v) in self.vector(i, j).iter().enumerate() {
                    if !v.is_finite() || v < 0.0 {
                        return Err(Error::Validation(format!(
                            "invalid distance {v} at pair ({i},{j}) channel {k}"
                        )));
                    }
                    if i == j && v != 0.0 {
                        return Err(Error::Validation(format!(
                            "nonzero self-distance {v} at sample {i} channel {k}"
                        )));
                    }
                }
                if self.vector(i, j) != self.vector(j, i) {
                    return Err(Error::Validation(format!(
                        "asymmetric vectors for pair ({i},{j})"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Build a table from sequences with a per-pair vector function,
    /// computing i <= j in parallel and mirroring.
    pub fn from_sequences<F>(
        sequences: &[Sequence],
        n: usize,
        fingerprint: String,
        pair_fn: F,
    ) -> Result<Self>
    where
        F: Fn(&Sequence, &Sequence) -> Result<Vec<f64>> + Sync,
    {
        let m = sequences.len();
        if m == 0 {
            return Err(Error::Validation("no sequences".into()));
        }
        let pairs: Vec<(usize, usize)> = (0..m)
            .flat_map(|i| (i..m).map(move |j| (i, j)))
            .collect();
        let computed: Vec<Vec<f64>> = pairs
            .par_iter()
            .map(|&(i, j)| {
                if i == j {
                    Ok(vec![0.0; n])
                } else {
                    let v = pair_fn(&sequences[i], &sequences[j])?;
                    if v.len() != n {
                        return Err(Error::Dimension {
                            expected: n,
                            found: v.len(),
                        });
                    }
                    Ok(v)
                }
            })
            .collect::<Result<_>>()?;
        let mut values = vec![0.0; m * m * n];
        for (&(i, j), vec) in pairs.iter().zip(&computed) {
            values[(i * m + j) * n..(i * m + j + 1) * n].copy_from_slice(vec);
            values[(j * m + i) * n..(j * m + i + 1) * n].copy_from_slice(vec);
        }
        DistanceVectorTable::from_vectors(m, n, values, fingerprint)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn fingerprint(&self) -> &str {
        &self.fingerprint
    }

    /// The distance vector D for the ordered pair (i, j).
    pub fn vector(&self, i: usize, j: usize) -> &[f64] {
        let base = (i * self.m + j) * self.n;
        &self.values[base..base + self.n]
    }

    /// Euclidean norm of the pair's distance vector (the unweighted metric).
    pub fn norm(&self, i: usize, j: usize) -> f64 {
        self.vector(i, j).iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Restriction to a subset of samples, preserving their given order.
    pub fn subtable(&self, indices: &[usize]) -> DistanceVectorTable {
        let m = indices.len();
        let mut values = Vec::with_capacity(m * m * self.n);
        for &i in indices {
            for &j in indices {
                values.extend_from_slice(self.vector(i, j));
            }
        }
        DistanceVectorTable {
            m,
            n: self.n,
            fingerprint: self.fingerprint.clone(),
            values,
        }
    }

    /// Restriction to a subset of channels, in the order given.
    pub fn restrict_channels(&self, channels: &[usize]) -> DistanceVectorTable {
        let n = channels.len();
        let mut values = Vec::with_capacity(self.m * self.m * n);
        for i in 0..self.m {
            for j in 0..self.m {
                let src = self.vector(i, j);
                values.extend(channels.iter().map(|&k| src[k]));
            }
        }
        let mut fp = Fingerprinter::new("table-channels");
        fp.push_str(&self.fingerprint);
        for &k in channels {
            fp.push_usize(k);
        }
        DistanceVectorTable {
            m: self.m,
            n,
            fingerprint: fp.finish(),
            values,
        }
    }

    /// Write the binary cache: magic, JSON header (m, n, fingerprint), then
    /// little-endian f64 payload.
    pub fn save(&self, path: &Path) -> Result<()> {
        let header = TableHeader {
            m: self.m,
            n: self.n,
            fingerprint: self.fingerprint.clone(),
        };
        let mut buf = Vec::with_capacity(TABLE_MAGIC.len() + 64 + self.values.len() * 8);
        buf.extend_from_slice(TABLE_MAGIC);
        buf.extend_from_slice(serde_json::to_string(&header).expect("header").as_bytes());
        buf.push(b'\n');
        for v in &self.values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        let mut file = fs::File::create(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        file.write_all(&buf).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let malformed = |message: &str| Error::TableCache {
            path: path.to_path_buf(),
            message: message.to_string(),
        };
        if bytes.len() < TABLE_MAGIC.len() || &bytes[..TABLE_MAGIC.len()] != TABLE_MAGIC {
            return Err(malformed("bad magic"));
        }
        let rest = &bytes[TABLE_MAGIC.len()..];
        let header_end = rest
            .iter()
            .position(|&b| b == b'\n')
            .ok_or_else(|| malformed("missing header"))?;
        let header: TableHeader = serde_json::from_slice(&rest[..header_end])
            .map_err(|e| malformed(&format!("bad header: {e}")))?;
        let payload = &rest[header_end + 1..];
        let expected = header.m * header.m * header.n;
        if payload.len() != expected * 8 {
            return Err(malformed(&format!(
                "payload has {} bytes, expected {}",
                payload.len(),
                expected * 8
            )));
        }
        let values: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        DistanceVectorTable::from_vectors(header.m, header.n, values, header.fingerprint)
    }

    /// Check the stored fingerprint against the one the caller expects.
    pub fn validate_fingerprint(&self, expected: &str) -> Result<()> {
        if self.fingerprint == expected {
            Ok(())
        } else {
            Err(Error::Fingerprint {
                expected: expected.to_string(),
                found: self.fingerprint.clone(),
            })
        }
    }
}

/// Fingerprint tying a table to the corpus content and the DTW config.
pub fn table_fingerprint(corpus: &Corpus, cfg: &DtwConfig, kind: &str) -> String {
    let mut fp = Fingerprinter::new("table");
    fp.push_str(kind);
    fp.push_str(&corpus.digest());
    cfg.digest_into(&mut fp);
    fp.finish()
}

/// Z-score every channel using mean/std pooled over all samples and
/// timesteps. Constant channels are left untouched (std 0).
pub(crate) fn z_normalized_sequences(corpus: &Corpus) -> Vec<Sequence> {
    let n = corpus.n();
    let mut count = 0usize;
    let mut mean = vec![0.0f64; n];
    for seq in corpus.sequences() {
        count += seq.len();
        for (k, m) in mean.iter_mut().enumerate() {
            *m += seq.channel(k).iter().sum::<f64>();
        }
    }
    for m in &mut mean {
        *m /= count as f64;
    }
    let mut var = vec![0.0f64; n];
    for seq in corpus.sequences() {
        for (k, v) in var.iter_mut().enumerate() {
            *v += seq
                .channel(k)
                .iter()
                .map(|x| (x - mean[k]) * (x - mean[k]))
                .sum::<f64>();
        }
    }
    let std: Vec<f64> = var
        .iter()
        .map(|v| {
            let s = (v / count as f64).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        })
        .collect();
    corpus
        .sequences()
        .iter()
        .map(|seq| {
            let channels = (0..n)
                .map(|k| {
                    seq.channel(k)
                        .iter()
                        .map(|x| (x - mean[k]) / std[k])
                        .collect()
                })
                .collect();
            Sequence::from_channels(seq.id(), channels).expect("normalized sequence stays valid")
        })
        .collect()
}

/// Compute the full m x m table of per-channel DTW vectors for a corpus.
pub fn build_distance_table(corpus: &Corpus, cfg: &DtwConfig) -> Result<DistanceVectorTable> {
    let fingerprint = table_fingerprint(corpus, cfg, "dtw");
    let n = corpus.n();
    if cfg.z_normalize {
        let normalized = z_normalized_sequences(corpus);
        DistanceVectorTable::from_sequences(&normalized, n, fingerprint, |x, y| {
            dtw_component_vector(x, y, cfg)
        })
    } else {
        DistanceVectorTable::from_sequences(corpus.sequences(), n, fingerprint, |x, y| {
            dtw_component_vector(x, y, cfg)
        })
    }
}
