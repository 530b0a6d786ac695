//! Data model and ingestion for labeled variable-length multichannel
//! time-series corpora.
//!
//! A corpus is described by a JSON manifest naming one CSV file per sample
//! (rows = timesteps, columns = channels, no header) together with channel
//! names and a string label per sample. Lengths may differ between samples;
//! the channel count may not.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fingerprint::Fingerprinter;

/// One sample: an n-channel real-valued series of length T. Stored
/// channel-major so per-channel warping can borrow slices directly.
#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    id: String,
    channels: Vec<Vec<f64>>,
}

impl Sequence {
    /// Build from channel-major data: `channels[k][t]`.
    pub fn from_channels(id: impl Into<String>, channels: Vec<Vec<f64>>) -> Result<Self> {
        let id = id.into();
        if channels.is_empty() {
            return Err(Error::Validation(format!("sequence {id:?} has no channels")));
        }
        let len = channels[0].len();
        if len == 0 {
            return Err(Error::EmptySequence);
        }
        for (k, ch) in channels.iter().enumerate() {
            if ch.len() != len {
                return Err(Error::Validation(format!(
                    "sequence {id:?}: channel {k} has length {}, expected {len}",
                    ch.len()
                )));
            }
            if let Some(t) = ch.iter().position(|v| !v.is_finite()) {
                return Err(Error::Validation(format!(
                    "sequence {id:?}: non-finite value at timestep {t}, channel {k}"
                )));
            }
        }
        Ok(Sequence { id, channels })
    }

    /// Build from timestep-major rows: `rows[t][k]`.
    pub fn from_rows(id: impl Into<String>, rows: &[Vec<f64>]) -> Result<Self> {
        let id = id.into();
        if rows.is_empty() {
            return Err(Error::EmptySequence);
        }
        let n = rows[0].len();
        if n == 0 {
            return Err(Error::Validation(format!("sequence {id:?} has no channels")));
        }
        let mut channels = vec![Vec::with_capacity(rows.len()); n];
        for (t, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::Validation(format!(
                    "sequence {id:?}: row {t} has {} columns, expected {n}",
                    row.len()
                )));
            }
            for (k, v) in row.iter().enumerate() {
                channels[k].push(*v);
            }
        }
        Sequence::from_channels(id, channels)
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    /// Number of timesteps T.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false // T >= 1 by construction
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn channel(&self, k: usize) -> &[f64] {
        &self.channels[k]
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    /// Timestep t as an n-vector (copies).
    pub fn row(&self, t: usize) -> Vec<f64> {
        self.channels.iter().map(|ch| ch[t]).collect()
    }
}

/// Labeled set of sequences sharing a channel count.
#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    sequences: Vec<Sequence>,
    labels: Vec<usize>,
    channel_names: Vec<String>,
    class_names: Vec<String>,
}

impl Corpus {
    pub fn new(
        sequences: Vec<Sequence>,
        labels: Vec<usize>,
        channel_names: Vec<String>,
        class_names: Vec<String>,
    ) -> Result<Self> {
        if sequences.len() < 2 {
            return Err(Error::Validation(format!(
                "corpus needs at least 2 samples, found {}",
                sequences.len()
            )));
        }
        if sequences.len() != labels.len() {
            return Err(Error::Validation(format!(
                "{} sequences but {} labels",
                sequences.len(),
                labels.len()
            )));
        }
        let n = sequences[0].num_channels();
        for seq in &sequences {
            if seq.num_channels() != n {
                return Err(Error::Dimension {
                    expected: n,
                    found: seq.num_channels(),
                });
            }
        }
        if channel_names.len() != n {
            return Err(Error::Validation(format!(
                "{} channel names for {n} channels",
                channel_names.len()
            )));
        }
        if class_names.is_empty() {
            return Err(Error::Validation("no classes declared".into()));
        }
        let mut counts = vec![0usize; class_names.len()];
        for &y in &labels {
            if y >= class_names.len() {
                return Err(Error::Validation(format!(
                    "label index {y} out of range for {} classes",
                    class_names.len()
                )));
            }
            counts[y] += 1;
        }
        if let Some(empty) = counts.iter().position(|&c| c == 0) {
            return Err(Error::Validation(format!(
                "class {:?} has no members",
                class_names[empty]
            )));
        }
        Ok(Corpus {
            sequences,
            labels,
            channel_names,
            class_names,
        })
    }

    /// Sample count m.
    pub fn m(&self) -> usize {
        self.sequences.len()
    }

    /// Channel count n.
    pub fn n(&self) -> usize {
        self.sequences[0].num_channels()
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn sequences(&self) -> &[Sequence] {
        &self.sequences
    }

    pub fn sequence(&self, i: usize) -> &Sequence {
        &self.sequences[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn channel_names(&self) -> &[String] {
        &self.channel_names
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.class_names.len()];
        for &y in &self.labels {
            counts[y] += 1;
        }
        counts
    }

    /// Content digest covering values, labels and names.
    pub fn digest(&self) -> String {
        let mut fp = Fingerprinter::new("corpus");
        fp.push_usize(self.m());
        fp.push_usize(self.n());
        for name in &self.channel_names {
            fp.push_str(name);
        }
        for name in &self.class_names {
            fp.push_str(name);
        }
        for (seq, &label) in self.sequences.iter().zip(&self.labels) {
            fp.push_str(seq.id());
            fp.push_usize(label);
            for ch in seq.channels() {
                fp.push_f64s(ch);
            }
        }
        fp.finish()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    channels: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    classes: Option<Vec<String>>,
    samples: Vec<ManifestSample>,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestSample {
    file: String,
    label: String,
}

/// Load a corpus from a JSON manifest. Channel order follows the manifest;
/// class indices follow the declared `classes` array when present, otherwise
/// label order of first appearance.
pub fn load_corpus(manifest_path: &Path) -> Result<Corpus> {
    let text = fs::read_to_string(manifest_path).map_err(|source| Error::Io {
        path: manifest_path.to_path_buf(),
        source,
    })?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::Manifest {
        path: manifest_path.to_path_buf(),
        message: e.to_string(),
    })?;
    if manifest.channels.is_empty() {
        return Err(Error::Manifest {
            path: manifest_path.to_path_buf(),
            message: "empty channel list".into(),
        });
    }
    if manifest.samples.is_empty() {
        return Err(Error::Manifest {
            path: manifest_path.to_path_buf(),
            message: "no samples listed".into(),
        });
    }
    let dir = manifest_path.parent().unwrap_or_else(|| Path::new("."));
    let n = manifest.channels.len();

    let mut class_names: Vec<String> = manifest.classes.clone().unwrap_or_default();
    let declared = manifest.classes.is_some();
    let mut class_index: HashMap<String, usize> = class_names
        .iter()
        .enumerate()
        .map(|(i, s)| (s.clone(), i))
        .collect();

    let mut sequences = Vec::with_capacity(manifest.samples.len());
    let mut labels = Vec::with_capacity(manifest.samples.len());
    for sample in &manifest.samples {
        let label = match class_index.get(&sample.label) {
            Some(&i) => i,
            None if declared => {
                return Err(Error::UnknownLabel {
                    label: sample.label.clone(),
                    declared: class_names.clone(),
                })
            }
            None => {
                let i = class_names.len();
                class_names.push(sample.label.clone());
                class_index.insert(sample.label.clone(), i);
                i
            }
        };
        labels.push(label);
        let file = dir.join(&sample.file);
        sequences.push(read_sequence_csv(&file, n)?);
    }

    Corpus::new(sequences, labels, manifest.channels, class_names)
}

fn read_sequence_csv(file: &Path, expected_channels: usize) -> Result<Sequence> {
    let text = fs::read_to_string(file).map_err(|source| Error::Io {
        path: file.to_path_buf(),
        source,
    })?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        let row_no = idx + 1;
        if line.trim().is_empty() {
            return Err(Error::Csv {
                file: file.to_path_buf(),
                row: row_no,
                col: 1,
                message: "blank row".into(),
            });
        }
        let mut row = Vec::with_capacity(expected_channels);
        for (c, cell) in line.split(',').enumerate() {
            let col_no = c + 1;
            let value: f64 = cell.trim().parse().map_err(|_| Error::Csv {
                file: file.to_path_buf(),
                row: row_no,
                col: col_no,
                message: format!("invalid number {:?}", cell.trim()),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFinite {
                    file: file.to_path_buf(),
                    row: row_no,
                    col: col_no,
                    value,
                });
            }
            row.push(value);
        }
        if row.len() != expected_channels {
            return Err(Error::ChannelMismatch {
                file: file.to_path_buf(),
                expected: expected_channels,
                found: row.len(),
            });
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::Csv {
            file: file.to_path_buf(),
            row: 1,
            col: 1,
            message: "empty sequence file".into(),
        });
    }
    let id = file
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "sequence".into());
    Sequence::from_rows(id, &rows)
}

/// Persist a corpus as manifest + per-sequence CSV files such that
/// [`load_corpus`] reproduces it bit-exactly.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut samples = Vec::with_capacity(corpus.m());
    for (seq, &label) in corpus.sequences().iter().zip(corpus.labels()) {
        if seq.id().contains(['/', '\\']) || seq.id().is_empty() {
            return Err(Error::Validation(format!(
                "sequence id {:?} is not a valid file stem",
                seq.id()
            )));
        }
        let file_name = format!("{}.csv", seq.id());
        let path = dir.join(&file_name);
        let mut body = String::new();
        for t in 0..seq.len() {
            let row: Vec<String> = (0..seq.num_channels())
                .map(|k| format!("{}", seq.channel(k)[t]))
                .collect();
            body.push_str(&row.join(","));
            body.push('\n');
        }
        fs::write(&path, body).map_err(|source| Error::Io { path, source })?;
        samples.push(ManifestSample {
            file: file_name,
            label: corpus.class_names()[label].clone(),
        });
    }
    let manifest = Manifest {
        channels: corpus.channel_names().to_vec(),
        classes: Some(corpus.class_names().to_vec()),
        samples,
    };
    let path = dir.join("manifest.json");
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    fs::write(&path, text).map_err(|source| Error::Io { path, source })
}

/// Recipe for a deterministic synthetic corpus. Informative channels carry a
/// class-dependent level; the rest are zero-mean noise. Channels listed in
/// `duplicates` are exact copies of their source channel, which puts a known
/// direction into the null space of the distance correlation matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub samples: usize,
    pub channels: usize,
    pub classes: usize,
    pub len_range: (usize, usize),
    pub informative: Vec<usize>,
    pub separation: f64,
    pub noise: f64,
    /// Per-channel noise override; `noise` applies where absent.
    #[serde(default)]
    pub channel_noise: Option<Vec<f64>>,
    /// (destination, source) channel pairs copied after generation.
    #[serde(default)]
    pub duplicates: Vec<(usize, usize)>,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(
        samples: usize,
        channels: usize,
        classes: usize,
        len_range: (usize, usize),
        informative: Vec<usize>,
        separation: f64,
        noise: f64,
        seed: u64,
    ) -> Self {
        SyntheticSpec {
            samples,
            channels,
            classes,
            len_range,
            informative,
            separation,
            noise,
            channel_noise: None,
            duplicates: Vec::new(),
            seed,
        }
    }

    pub fn with_duplicates(mut self, duplicates: Vec<(usize, usize)>) -> Self {
        self.duplicates = duplicates;
        self
    }

    pub fn with_channel_noise(mut self, channel_noise: Vec<f64>) -> Self {
        self.channel_noise = Some(channel_noise);
        self
    }

    /// Class level of `channel` for class `y`: informative channels spread
    /// classes evenly over [-separation, +separation], others sit at 0.
    pub fn class_offset(&self, channel: usize, y: usize) -> f64 {
        if self.informative.contains(&channel) {
            if self.classes == 1 {
                0.0
            } else {
                -self.separation + 2.0 * self.separation * y as f64 / (self.classes - 1) as f64
            }
        } else {
            0.0
        }
    }

    fn channel_sigma(&self, channel: usize) -> f64 {
        match &self.channel_noise {
            Some(per) => per[channel],
            None => self.noise,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.classes < 2 {
            return Err(Error::Validation(format!(
                "need at least 2 classes, got {}",
                self.classes
            )));
        }
        if self.samples < self.classes.max(2) {
            return Err(Error::Validation(format!(
                "need at least {} samples, got {}",
                self.classes.max(2),
                self.samples
            )));
        }
        if self.channels == 0 {
            return Err(Error::Validation("need at least one channel".into()));
        }
        if self.informative.is_empty() {
            return Err(Error::Validation("informative channel set is empty".into()));
        }
        if let Some(&bad) = self.informative.iter().find(|&&c| c >= self.channels) {
            return Err(Error::Validation(format!(
                "informative channel {bad} out of range (n={})",
                self.channels
            )));
        }
        let (lo, hi) = self.len_range;
        if lo == 0 || lo > hi {
            return Err(Error::Validation(format!(
                "invalid length range [{lo}, {hi}]"
            )));
        }
        if self.noise < 0.0 {
            return Err(Error::Validation("negative noise scale".into()));
        }
        if let Some(per) = &self.channel_noise {
            if per.len() != self.channels {
                return Err(Error::Validation(format!(
                    "channel_noise has {} entries for {} channels",
                    per.len(),
                    self.channels
                )));
            }
            if per.iter().any(|&s| s < 0.0 || !s.is_finite()) {
                return Err(Error::Validation("invalid per-channel noise scale".into()));
            }
        }
        for &(dst, src) in &self.duplicates {
            if dst >= self.channels || src >= self.channels || dst == src {
                return Err(Error::Validation(format!(
                    "invalid duplicate pair ({dst}, {src})"
                )));
            }
        }
        Ok(())
    }
}

/// Generate a corpus from a [`SyntheticSpec`]; byte-identical for a fixed spec.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Corpus> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let (lo, hi) = spec.len_range;
    let mut sequences = Vec::with_capacity(spec.samples);
    let mut labels = Vec::with_capacity(spec.samples);
    for i in 0..spec.samples {
        let y = i % spec.classes;
        let len = rng.random_range(lo..=hi);
        let mut channels: Vec<Vec<f64>> = Vec::with_capacity(spec.channels);
        for ch in 0..spec.channels {
            let base = spec.class_offset(ch, y);
            let sigma = spec.channel_sigma(ch);
            channels.push(
                (0..len)
                    .map(|_| base + sigma * rng.sample::<f64, _>(StandardNormal))
                    .collect(),
            );
        }
        for &(dst, src) in &spec.duplicates {
            channels[dst] = channels[src].clone();
        }
        sequences.push(Sequence::from_channels(format!("seq_{i:03}"), channels)?);
        labels.push(y);
    }
    let channel_names = (0..spec.channels).map(|k| format!("ch_{k}")).collect();
    let class_names = (0..spec.classes).map(|y| format!("class_{y}")).collect();
    Corpus::new(sequences, labels, channel_names, class_names)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;
    use tempfile::tempdir;

    fn write(path: &Path, text: &str) {
        fs::write(path, text).unwrap();
    }

    #[test]
    fn load_small_manifest() {
        let dir = tempdir().unwrap();
        write(&dir.path().join("a.csv"), "0,1,2\n3,4,5\n");
        write(&dir.path().join("b.csv"), "1,1,1\n");
        write(
            &dir.path().join("manifest.json"),
            r#"{"channels":["x","y","z"],
                "samples":[{"file":"a.csv","label":"A"},{"file":"b.csv","label":"B"}]}"#,
        );
        let corpus = load_corpus(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(corpus.m(), 2);
        assert_eq!(corpus.n(), 3);
        assert_eq!(corpus.num_classes(), 2);
        assert_eq!(corpus.sequence(0).channel(1), &[1.0, 4.0]);
        assert_eq!(corpus.labels(), &[0, 1]);
    }

    #[test]
    fn nan_cell_reports_location() {
        let dir = tempdir().unwrap();
        write(&dir.path().join("a.csv"), "0,1\n2,NaN\n");
        write(&dir.path().join("b.csv"), "1,1\n");
        write(
            &dir.path().join("manifest.json"),
            r#"{"channels":["x","y"],
                "samples":[{"file":"a.csv","label":"A"},{"file":"b.csv","label":"B"}]}"#,
        );
        let err = load_corpus(&dir.path().join("manifest.json")).unwrap_err();
        match err {
            Error::NonFinite { file, row, col, .. } => {
                assert!(file.ends_with("a.csv"));
                assert_eq!((row, col), (2, 2));
            }
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn unequal_lengths_accepted() {
        let dir = tempdir().unwrap();
        write(&dir.path().join("a.csv"), "0,1\n1,2\n2,3\n3,4\n4,5\n");
        write(
            &dir.path().join("b.csv"),
            "0,1\n1,2\n2,3\n3,4\n4,5\n5,6\n6,7\n7,8\n8,9\n",
        );
        write(
            &dir.path().join("manifest.json"),
            r#"{"channels":["x","y"],
                "samples":[{"file":"a.csv","label":"A"},{"file":"b.csv","label":"B"}]}"#,
        );
        let corpus = load_corpus(&dir.path().join("manifest.json")).unwrap();
        assert_eq!(corpus.sequence(0).len(), 5);
        assert_eq!(corpus.sequence(1).len(), 9);
    }

    #[test]
    fn ragged_row_rejected() {
        let dir = tempdir().unwrap();
        write(&dir.path().join("a.csv"), "0,1\n2\n");
        write(&dir.path().join("b.csv"), "1,1\n");
        write(
            &dir.path().join("manifest.json"),
            r#"{"channels":["x","y"],
                "samples":[{"file":"a.csv","label":"A"},{"file":"b.csv","label":"B"}]}"#,
        );
        let err = load_corpus(&dir.path().join("manifest.json")).unwrap_err();
        assert!(matches!(err, Error::ChannelMismatch { found: 1, .. }));
    }

    #[test]
    fn unknown_label_with_declared_classes() {
        let dir = tempdir().unwrap();
        write(&dir.path().join("a.csv"), "0\n");
        write(&dir.path().join("b.csv"), "1\n");
        write(
            &dir.path().join("manifest.json"),
            r#"{"channels":["x"],"classes":["A","B"],
                "samples":[{"file":"a.csv","label":"A"},{"file":"b.csv","label":"C"}]}"#,
        );
        let err = load_corpus(&dir.path().join("manifest.json")).unwrap_err();
        assert!(matches!(err, Error::UnknownLabel { .. }));
    }

    #[test]
    fn missing_file_reported() {
        let dir = tempdir().unwrap();
        write(
            &dir.path().join("manifest.json"),
            r#"{"channels":["x"],"samples":[{"file":"gone.csv","label":"A"},{"file":"gone2.csv","label":"B"}]}"#,
        );
        let err = load_corpus(&dir.path().join("manifest.json")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn synthetic_deterministic() {
        let spec = SyntheticSpec::new(20, 3, 2, (5, 9), vec![0], 5.0, 0.1, 7);
        let a = generate_synthetic(&spec).unwrap();
        let b = generate_synthetic(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.m(), 20);
        assert_eq!(a.n(), 3);
    }

    #[test]
    fn synthetic_duplicate_channels_copy_source() {
        let spec =
            SyntheticSpec::new(10, 3, 2, (4, 6), vec![0], 5.0, 0.5, 3).with_duplicates(vec![(2, 0)]);
        let corpus = generate_synthetic(&spec).unwrap();
        for seq in corpus.sequences() {
            assert_eq!(seq.channel(2), seq.channel(0));
        }
    }

    #[test]
    fn synthetic_class_gap_on_informative_channel() {
        // Empirical class means on channel 0 must be separated far beyond the
        // noise floor (offsets are +/-5 with sigma = 0.1).
        let spec = SyntheticSpec::new(20, 3, 2, (8, 12), vec![0], 5.0, 0.1, 7);
        let corpus = generate_synthetic(&spec).unwrap();
        let mut sums = [0.0f64; 2];
        let mut counts = [0usize; 2];
        for (seq, &y) in corpus.sequences().iter().zip(corpus.labels()) {
            for v in seq.channel(0) {
                sums[y] += v;
                counts[y] += 1;
            }
        }
        let gap = (sums[0] / counts[0] as f64 - sums[1] / counts[1] as f64).abs();
        assert!(gap > 10.0 * 0.1, "gap {gap} not above noise floor");
    }

    #[test]
    fn synthetic_invalid_specs_rejected() {
        let empty_informative = SyntheticSpec::new(10, 3, 2, (4, 6), vec![], 5.0, 0.1, 1);
        assert!(generate_synthetic(&empty_informative).is_err());
        let one_class = SyntheticSpec::new(10, 3, 1, (4, 6), vec![0], 5.0, 0.1, 1);
        assert!(generate_synthetic(&one_class).is_err());
    }

    #[test]
    fn corpus_roundtrip_bit_exact() {
        let spec = SyntheticSpec::new(12, 4, 3, (3, 8), vec![0, 1], 2.5, 0.7, 11)
            .with_duplicates(vec![(3, 1)]);
        let corpus = generate_synthetic(&spec).unwrap();
        let dir = tempdir().unwrap();
        let out = dir.path().join("corpus");
        write_corpus(&corpus, &out).unwrap();
        let loaded = load_corpus(&out.join("manifest.json")).unwrap();
        assert_eq!(corpus, loaded);
        assert_eq!(corpus.digest(), loaded.digest());
    }

    mod prop {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(64))]

            // Any finite-valued corpus survives a write/load round trip.
            #[test]
            fn roundtrip(seed in 0u64..1000, m in 2usize..6, n in 1usize..4) {
                let spec = SyntheticSpec::new(m.max(2), n, 2, (2, 5), vec![0], 3.0, 1.0, seed);
                let corpus = generate_synthetic(&spec).unwrap();
                let dir = tempdir().unwrap();
                write_corpus(&corpus, dir.path()).unwrap();
                let loaded = load_corpus(&dir.path().join("manifest.json")).unwrap();
                prop_assert_eq!(corpus, loaded);
            }

            // Malformed cells are always rejected, never silently accepted.
            #[test]
            fn malformed_cells_rejected(cell in "[a-z!@#]{1,8}") {
                let dir = tempdir().unwrap();
                fs::write(dir.path().join("a.csv"), format!("0,1\n{cell},2\n")).unwrap();
                fs::write(dir.path().join("b.csv"), "1,1\n").unwrap();
                fs::write(
                    dir.path().join("manifest.json"),
                    r#"{"channels":["x","y"],
                        "samples":[{"file":"a.csv","label":"A"},{"file":"b.csv","label":"B"}]}"#,
                ).unwrap();
                prop_assert!(load_corpus(&dir.path().join("manifest.json")).is_err());
            }
        }
    }
}
