//! Feature sequences, datasets, seeded randomness, the on-disk dataset
//! format, and the planted-subspace synthetic generator.
//!
//! A sequence is stored as a `d×n` matrix whose columns are time-ordered
//! frame features. Every column is unit-norm and nonnegative; normalization
//! happens here, at load/generation time, and solvers downstream reject
//! inputs that violate it.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the unit-norm column invariant.
pub const UNIT_NORM_TOL: f64 = 1e-9;

/// Seed for every pseudo-random stream in the crate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngSeed(pub u64);

impl RngSeed {
    pub fn rng(self) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.0)
    }

    /// Independent child seed for work item `index`, so parallel items draw
    /// from disjoint streams regardless of scheduling.
    pub fn child(self, index: u64) -> RngSeed {
        // splitmix64 finalizer over (seed, index)
        let mut z = self
            .0
            .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        RngSeed(z ^ (z >> 31))
    }
}

/// An ordered `d×n` sequence of unit-norm nonnegative frame features.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureSequence {
    features: DMatrix<f64>,
    label: usize,
    id: String,
}

impl FeatureSequence {
    /// Validates the column invariants without modifying the data.
    pub fn new(features: DMatrix<f64>, label: usize, id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        validate_columns(&features, &id)?;
        Ok(FeatureSequence { features, label, id })
    }

    /// Normalizes every column to unit norm, then validates.
    pub fn normalized(mut features: DMatrix<f64>, label: usize, id: impl Into<String>) -> Result<Self> {
        let id = id.into();
        for (t, mut col) in features.column_iter_mut().enumerate() {
            let norm = col.norm();
            if !norm.is_finite() || norm == 0.0 {
                return Err(Error::InvalidInput(format!(
                    "sequence {id}: frame {t} has norm {norm} and cannot be normalized"
                )));
            }
            col /= norm;
        }
        Self::new(features, label, id)
    }

    pub fn features(&self) -> &DMatrix<f64> {
        &self.features
    }

    pub fn dim(&self) -> usize {
        self.features.nrows()
    }

    pub fn len(&self) -> usize {
        self.features.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.features.ncols() == 0
    }

    pub fn label(&self) -> usize {
        self.label
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn frame(&self, t: usize) -> DVector<f64> {
        self.features.column(t).into_owned()
    }
}

fn validate_columns(features: &DMatrix<f64>, id: &str) -> Result<()> {
    if features.nrows() == 0 || features.ncols() == 0 {
        return Err(Error::InvalidInput(format!("sequence {id}: empty feature matrix")));
    }
    if let Some(v) = features.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("sequence {id}: non-finite value {v}")));
    }
    for (t, col) in features.column_iter().enumerate() {
        if let Some(v) = col.iter().find(|&&v| v < 0.0) {
            return Err(Error::InvalidInput(format!(
                "sequence {id}: frame {t} has negative entry {v}"
            )));
        }
        let norm = col.norm();
        if (norm - 1.0).abs() > UNIT_NORM_TOL {
            return Err(Error::InvalidInput(format!(
                "sequence {id}: frame {t} has norm {norm}, expected 1"
            )));
        }
    }
    Ok(())
}

/// A labelled collection of sequences sharing one feature dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    sequences: Vec<FeatureSequence>,
    num_classes: usize,
    dim: usize,
}

impl Dataset {
    pub fn new(sequences: Vec<FeatureSequence>, num_classes: usize) -> Result<Self> {
        let first = sequences
            .first()
            .ok_or_else(|| Error::InvalidInput("dataset has no sequences".into()))?;
        let dim = first.dim();
        for s in &sequences {
            if s.dim() != dim {
                return Err(Error::DimensionMismatch(format!(
                    "sequence {} has dim {} but dataset dim is {}",
                    s.id(),
                    s.dim(),
                    dim
                )));
            }
            if s.label() >= num_classes {
                return Err(Error::InvalidInput(format!(
                    "sequence {} has label {} >= num_classes {}",
                    s.id(),
                    s.label(),
                    num_classes
                )));
            }
        }
        Ok(Dataset {
            sequences,
            num_classes,
            dim,
        })
    }

    pub fn sequences(&self) -> &[FeatureSequence] {
        &self.sequences
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn total_frames(&self) -> usize {
        self.sequences.iter().map(FeatureSequence::len).sum()
    }

    /// Stratified split: within each class, a seeded shuffle puts
    /// `round(test_fraction · count)` sequences (at least one when the class
    /// has two or more) into the test set. Relative order is preserved.
    pub fn split(&self, test_fraction: f64, seed: RngSeed) -> Result<(Dataset, Dataset)> {
        if !(0.0..1.0).contains(&test_fraction) {
            return Err(Error::InvalidConfig(format!(
                "test fraction {test_fraction} must lie in [0, 1)"
            )));
        }
        let mut rng = seed.rng();
        let mut is_test = vec![false; self.sequences.len()];
        for c in 0..self.num_classes {
            let mut members: Vec<usize> = (0..self.sequences.len())
                .filter(|&i| self.sequences[i].label() == c)
                .collect();
            if members.len() < 2 {
                continue;
            }
            for i in (1..members.len()).rev() {
                let j = rng.random_range(0..=i);
                members.swap(i, j);
            }
            let n_test = ((test_fraction * members.len() as f64).round() as usize)
                .max(usize::from(test_fraction > 0.0))
                .min(members.len() - 1);
            for &i in &members[..n_test] {
                is_test[i] = true;
            }
        }
        let pick = |want: bool| -> Vec<FeatureSequence> {
            self.sequences
                .iter()
                .zip(&is_test)
                .filter(|(_, &t)| t == want)
                .map(|(s, _)| s.clone())
                .collect()
        };
        Ok((
            Dataset::new(pick(false), self.num_classes)?,
            Dataset::new(pick(true), self.num_classes)?,
        ))
    }
}

/// Column average `X̄ = (1/n) Σ_t x_t` of a sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct SequenceMean(pub DVector<f64>);

impl SequenceMean {
    pub fn into_inner(self) -> DVector<f64> {
        self.0
    }
}

pub fn sequence_mean(x: &FeatureSequence) -> SequenceMean {
    SequenceMean(column_mean(x.features()))
}

pub fn column_mean(m: &DMatrix<f64>) -> DVector<f64> {
    let mut acc = DVector::zeros(m.nrows());
    for col in m.column_iter() {
        acc += col;
    }
    acc / m.ncols() as f64
}

// ---------------------------------------------------------------------------
// On-disk format

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub dim: usize,
    pub num_classes: usize,
    #[serde(default)]
    pub normalize: bool,
    pub sequences: Vec<ManifestEntry>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub label: usize,
    pub file: String,
}

pub const MANIFEST_FILE: &str = "manifest.json";

/// Loads a dataset directory: `manifest.json` plus one headerless CSV per
/// sequence (row `t` = frame `t`).
pub fn load_dataset(path: impl AsRef<Path>) -> Result<Dataset> {
    let dir = path.as_ref();
    let manifest_path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&manifest_path).map_err(|e| Error::io(&manifest_path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::parse(&manifest_path, e))?;

    let mut sequences = Vec::with_capacity(manifest.sequences.len());
    for entry in &manifest.sequences {
        let file = dir.join(&entry.file);
        let frames = read_matrix_csv(&file)?;
        // CSV rows are frames; the in-memory layout is d×n.
        let features = frames.transpose();
        if features.nrows() != manifest.dim {
            return Err(Error::DimensionMismatch(format!(
                "sequence {} has dim {} but manifest declares {}",
                entry.id,
                features.nrows(),
                manifest.dim
            )));
        }
        if entry.label >= manifest.num_classes {
            return Err(Error::InvalidInput(format!(
                "sequence {} has label {} >= num_classes {}",
                entry.id, entry.label, manifest.num_classes
            )));
        }
        let seq = if manifest.normalize {
            FeatureSequence::normalized(features, entry.label, entry.id.clone())?
        } else {
            FeatureSequence::new(features, entry.label, entry.id.clone())?
        };
        sequences.push(seq);
    }
    Dataset::new(sequences, manifest.num_classes)
}

pub fn save_dataset(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let dir = path.as_ref();
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut entries = Vec::with_capacity(dataset.len());
    for (i, seq) in dataset.sequences().iter().enumerate() {
        let file = format!("seq_{i:05}.csv");
        write_matrix_csv(dir.join(&file), &seq.features().transpose())?;
        entries.push(ManifestEntry {
            id: seq.id().to_string(),
            label: seq.label(),
            file,
        });
    }
    let manifest = Manifest {
        dim: dataset.dim(),
        num_classes: dataset.num_classes(),
        normalize: false,
        sequences: entries,
    };
    write_json(dir.join(MANIFEST_FILE), &manifest)
}

pub fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let path = path.as_ref();
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::parse(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::parse(path, e))
}

/// Row-major headerless CSV. Values use Rust's shortest round-trip float
/// formatting, so reading back is exact.
pub fn write_matrix_csv(path: impl AsRef<Path>, m: &DMatrix<f64>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::WriterBuilder::new()
        .has_headers(false)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    for row in m.row_iter() {
        writer
            .write_record(row.iter().map(|v| v.to_string()))
            .map_err(|e| csv_error(path, e))?;
    }
    writer.flush().map_err(|e| Error::io(path, e))
}

pub fn read_matrix_csv(path: impl AsRef<Path>) -> Result<DMatrix<f64>> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| csv_error(path, e))?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let row = record
            .iter()
            .map(|field| {
                field
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, format!("row {r}: {field:?}: {e}")))
            })
            .collect::<Result<Vec<f64>>>()?;
        if let Some(v) = row.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "{}: row {r} contains non-finite value {v}",
                path.display()
            )));
        }
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::DimensionMismatch(format!(
                    "{}: row {r} has {} columns, expected {}",
                    path.display(),
                    row.len(),
                    first.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::parse(path, "empty matrix file"));
    }
    let ncols = rows[0].len();
    Ok(DMatrix::from_row_iterator(
        rows.len(),
        ncols,
        rows.into_iter().flatten(),
    ))
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(PathBuf::from(path), io),
            other => Error::parse(path, format!("{other:?}")),
        }
    } else {
        Error::parse(path, e)
    }
}

// ---------------------------------------------------------------------------
// Synthetic planted-subspace data

/// Synthetic sequences with a planted class subspace and a rising trend.
///
/// Each class `c` owns a nonnegative orthonormal basis `B_c` of `signal_dim`
/// columns. Frame `t` of a sequence is
/// `normalize(ReLU(ρ·a_t·B_c w + (1−ρ)·noise_scale·noise_t))` where the
/// amplitude `a_t` rises linearly over the sequence and `w` is a
/// per-sequence nonnegative unit coefficient vector. The noise is
/// class-independent: a per-sequence mix of shared distractor directions
/// (amplitudes jittered per frame) plus a per-frame sparse nonnegative
/// vector on a few random coordinates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub dim: usize,
    pub signal_dim: usize,
    pub num_classes: usize,
    pub sequences_per_class: usize,
    pub frames: usize,
    /// Signal-to-noise mixing weight ρ ∈ [0, 1].
    pub snr: f64,
    /// Overall scale of the noise term before mixing. Zero gives noise-free data.
    pub noise_scale: f64,
    /// Number of class-shared distractor directions.
    pub distractors: usize,
    /// Weight of the per-sequence distractor mix.
    pub distractor_scale: f64,
    /// Relative per-frame jitter of the distractor amplitudes.
    pub jitter: f64,
    /// Coordinates carrying per-frame sparse noise; 0 disables it.
    pub frame_noise_support: usize,
    /// Log-normal spread of the sparse noise amplitudes.
    pub frame_noise_spread: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            dim: 16,
            signal_dim: 2,
            num_classes: 5,
            sequences_per_class: 20,
            frames: 12,
            snr: 0.7,
            noise_scale: 2.0,
            distractors: 16,
            distractor_scale: 1.0,
            jitter: 0.3,
            frame_noise_support: 0,
            frame_noise_spread: 0.5,
        }
    }
}

impl SyntheticConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 || self.num_classes == 0 || self.sequences_per_class == 0 || self.frames == 0 {
            return Err(Error::InvalidConfig(
                "dim, num_classes, sequences_per_class and frames must be positive".into(),
            ));
        }
        if self.signal_dim == 0 || self.signal_dim > self.dim {
            return Err(Error::InvalidConfig(format!(
                "signal dimension {} must lie in [1, dim={}]",
                self.signal_dim, self.dim
            )));
        }
        if !(0.0..=1.0).contains(&self.snr) {
            return Err(Error::InvalidConfig(format!("snr {} must lie in [0, 1]", self.snr)));
        }
        let nonneg = [self.noise_scale, self.distractor_scale, self.jitter, self.frame_noise_spread];
        if nonneg.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidConfig("noise parameters must be finite and nonnegative".into()));
        }
        if self.frame_noise_support > self.dim {
            return Err(Error::InvalidConfig(format!(
                "frame noise support {} exceeds dim {}",
                self.frame_noise_support, self.dim
            )));
        }
        Ok(())
    }
}

/// Planted bases used to generate a synthetic dataset, kept for recovery
/// checks in tests and examples.
#[derive(Debug, Clone)]
pub struct PlantedStructure {
    /// One `d×signal_dim` nonnegative orthonormal basis per class.
    pub class_bases: Vec<DMatrix<f64>>,
    /// `d×distractors` shared distractor directions (unit columns).
    pub distractors: DMatrix<f64>,
}

pub fn make_synthetic(cfg: &SyntheticConfig, seed: RngSeed) -> Result<Dataset> {
    make_synthetic_with_structure(cfg, seed).map(|(d, _)| d)
}

pub fn make_synthetic_with_structure(
    cfg: &SyntheticConfig,
    seed: RngSeed,
) -> Result<(Dataset, PlantedStructure)> {
    cfg.validate()?;
    let mut rng = seed.rng();
    let d = cfg.dim;

    let class_bases: Vec<DMatrix<f64>> = (0..cfg.num_classes)
        .map(|_| nonnegative_orthonormal_basis(d, cfg.signal_dim, &mut rng))
        .collect();
    let distractors = DMatrix::from_fn(d, cfg.distractors, |_, _| rng.random::<f64>());
    let distractors = normalize_columns(distractors);

    let rho = cfg.snr;
    let n = cfg.frames;
    let mut sequences = Vec::with_capacity(cfg.num_classes * cfg.sequences_per_class);
    for c in 0..cfg.num_classes {
        for s in 0..cfg.sequences_per_class {
            let w = {
                let v = DVector::from_fn(cfg.signal_dim, |_, _| 0.5 + rng.random::<f64>());
                &v / v.norm()
            };
            let planted = &class_bases[c] * &w;
            let seq_distractor_amp = DVector::from_fn(cfg.distractors, |_, _| {
                rng.sample::<f64, _>(StandardNormal).abs()
            });
            let mut features = DMatrix::zeros(d, n);
            for t in 0..n {
                let amplitude = (t + 1) as f64 / n as f64;
                let mut attempts = 0;
                let frame = loop {
                    let mut noise = DVector::zeros(d);
                    if cfg.distractors > 0 && cfg.distractor_scale > 0.0 {
                        let amp = seq_distractor_amp.map(|a| {
                            (a * (1.0 + cfg.jitter * rng.sample::<f64, _>(StandardNormal))).max(0.0)
                        });
                        noise += &distractors * amp * cfg.distractor_scale;
                    }
                    if cfg.frame_noise_support > 0 {
                        noise += sparse_noise(d, cfg.frame_noise_support, cfg.frame_noise_spread, &mut rng);
                    }
                    let raw = &planted * (rho * amplitude) + noise * ((1.0 - rho) * cfg.noise_scale);
                    let relu = raw.map(|v| v.max(0.0));
                    let norm = relu.norm();
                    if norm > 1e-12 {
                        break relu / norm;
                    }
                    attempts += 1;
                    if attempts > 1000 {
                        return Err(Error::Numerical(
                            "synthetic frame collapsed to zero after ReLU".into(),
                        ));
                    }
                };
                features.set_column(t, &frame);
            }
            sequences.push(FeatureSequence::new(features, c, format!("c{c}_s{s}"))?);
        }
    }
    Ok((
        Dataset::new(sequences, cfg.num_classes)?,
        PlantedStructure {
            class_bases,
            distractors,
        },
    ))
}

/// Unit vector with log-normal amplitudes on `support` random coordinates.
fn sparse_noise<R: Rng + ?Sized>(d: usize, support: usize, spread: f64, rng: &mut R) -> DVector<f64> {
    let mut v = DVector::zeros(d);
    for i in rand::seq::index::sample(rng, d, support) {
        v[i] = (spread * rng.sample::<f64, _>(StandardNormal)).exp();
    }
    let n = v.norm();
    v / n
}

/// Orthonormal columns with nonnegative entries: random positive weights on
/// disjoint coordinate supports.
fn nonnegative_orthonormal_basis<R: Rng + ?Sized>(d: usize, k: usize, rng: &mut R) -> DMatrix<f64> {
    let mut coords: Vec<usize> = (0..d).collect();
    for i in (1..d).rev() {
        let j = rng.random_range(0..=i);
        coords.swap(i, j);
    }
    let support = (d / (2 * k)).max(1).min(d / k);
    let mut basis = DMatrix::zeros(d, k);
    for j in 0..k {
        for &r in &coords[j * support..(j + 1) * support] {
            basis[(r, j)] = 0.2 + rng.random::<f64>();
        }
    }
    normalize_columns(basis)
}

fn normalize_columns(mut m: DMatrix<f64>) -> DMatrix<f64> {
    for mut col in m.column_iter_mut() {
        let n = col.norm();
        if n > 0.0 {
            col /= n;
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn write_manifest(dir: &Path, manifest: &str, files: &[(&str, &str)]) {
        fs::write(dir.join(MANIFEST_FILE), manifest).unwrap();
        for (name, body) in files {
            fs::write(dir.join(name), body).unwrap();
        }
    }

    #[test]
    fn load_single_sequence() {
        let tmp = tempfile::tempdir().unwrap();
        write_manifest(
            tmp.path(),
            r#"{"dim":3,"num_classes":1,"normalize":false,"sequences":[{"id":"a","label":0,"file":"a.csv"}]}"#,
            &[("a.csv", "1,0,0\n0,1,0\n")],
        );
        let ds = load_dataset(tmp.path()).unwrap();
        assert_eq!(ds.len(), 1);
        assert_eq!(ds.dim(), 3);
        assert_eq!(ds.sequences()[0].len(), 2);
    }

    #[test]
    fn load_rejects_dimension_mismatch() {
        let tmp = tempfile::tempdir().unwrap();
        write_manifest(
            tmp.path(),
            r#"{"dim":3,"num_classes":1,"normalize":false,"sequences":[
                {"id":"a","label":0,"file":"a.csv"},{"id":"b","label":0,"file":"b.csv"}]}"#,
            &[("a.csv", "1,0,0\n"), ("b.csv", "1,0,0,0\n")],
        );
        let err = load_dataset(tmp.path()).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch(_)), "{err}");
        assert!(err.to_string().contains("dimension mismatch"));
    }

    #[test]
    fn load_normalizes_when_requested() {
        let tmp = tempfile::tempdir().unwrap();
        write_manifest(
            tmp.path(),
            r#"{"dim":3,"num_classes":1,"normalize":true,"sequences":[{"id":"a","label":0,"file":"a.csv"}]}"#,
            &[("a.csv", "3,4,0\n")],
        );
        let ds = load_dataset(tmp.path()).unwrap();
        let col = ds.sequences()[0].frame(0);
        assert_abs_diff_eq!(col[0], 0.6, epsilon = 1e-15);
        assert_abs_diff_eq!(col[1], 0.8, epsilon = 1e-15);
        assert_eq!(col[2], 0.0);
    }

    #[test]
    fn load_rejects_bad_label_missing_file_and_nan() {
        let tmp = tempfile::tempdir().unwrap();
        write_manifest(
            tmp.path(),
            r#"{"dim":1,"num_classes":1,"normalize":false,"sequences":[{"id":"a","label":1,"file":"a.csv"}]}"#,
            &[("a.csv", "1\n")],
        );
        assert!(matches!(load_dataset(tmp.path()), Err(Error::InvalidInput(_))));

        let missing = tmp.path().join("nope");
        assert!(matches!(load_dataset(&missing), Err(Error::Io { .. })));

        write_manifest(
            tmp.path(),
            r#"{"dim":1,"num_classes":1,"normalize":true,"sequences":[{"id":"a","label":0,"file":"a.csv"}]}"#,
            &[("a.csv", "NaN\n")],
        );
        assert!(load_dataset(tmp.path()).is_err());
    }

    #[test]
    fn unnormalized_input_is_rejected_without_flag() {
        let m = DMatrix::from_column_slice(2, 1, &[3.0, 4.0]);
        assert!(FeatureSequence::new(m, 0, "x").is_err());
        let neg = DMatrix::from_column_slice(2, 1, &[-0.6, 0.8]);
        assert!(FeatureSequence::new(neg, 0, "x").is_err());
    }

    #[test]
    fn sequence_mean_cases() {
        let a = FeatureSequence::new(DMatrix::from_column_slice(2, 2, &[1.0, 0.0, 0.0, 1.0]), 0, "a").unwrap();
        assert_eq!(sequence_mean(&a).0.as_slice(), &[0.5, 0.5]);

        let b = FeatureSequence::new(DMatrix::from_column_slice(2, 1, &[0.6, 0.8]), 0, "b").unwrap();
        assert_eq!(sequence_mean(&b).0, b.frame(0));

        let c = FeatureSequence::new(DMatrix::identity(3, 3), 0, "c").unwrap();
        for v in sequence_mean(&c).0.iter() {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn save_load_round_trip() {
        let ds = make_synthetic(&SyntheticConfig::default(), RngSeed(11)).unwrap();
        let tmp = tempfile::tempdir().unwrap();
        save_dataset(&ds, tmp.path()).unwrap();
        let back = load_dataset(tmp.path()).unwrap();
        assert_eq!(back.len(), ds.len());
        for (a, b) in ds.sequences().iter().zip(back.sequences()) {
            assert_eq!(a.label(), b.label());
            assert_eq!(a.id(), b.id());
            let diff = (a.features() - b.features()).abs().max();
            assert!(diff <= 1e-12);
        }
    }

    #[test]
    fn noise_free_frames_lie_in_planted_span_with_rising_amplitude() {
        let cfg = SyntheticConfig {
            signal_dim: 1,
            snr: 1.0,
            noise_scale: 0.0,
            num_classes: 2,
            sequences_per_class: 2,
            ..SyntheticConfig::default()
        };
        let (ds, planted) = make_synthetic_with_structure(&cfg, RngSeed(5)).unwrap();
        for seq in ds.sequences() {
            let b = &planted.class_bases[seq.label()];
            let residual = seq.features() - b * (b.transpose() * seq.features());
            assert!(residual.abs().max() < 1e-12);
        }
    }

    #[test]
    fn projection_energy_rises_over_time_with_noise() {
        let cfg = SyntheticConfig::default();
        let (ds, planted) = make_synthetic_with_structure(&cfg, RngSeed(7)).unwrap();
        let mut first = 0.0;
        let mut last = 0.0;
        for seq in ds.sequences() {
            let b = &planted.class_bases[seq.label()];
            let proj = b.transpose() * seq.features();
            first += proj.column(0).norm_squared();
            last += proj.column(seq.len() - 1).norm_squared();
        }
        assert!(last > first);
    }

    #[test]
    fn synthetic_rejects_bad_config_and_is_deterministic() {
        let bad_k = SyntheticConfig { signal_dim: 17, ..SyntheticConfig::default() };
        assert!(make_synthetic(&bad_k, RngSeed(1)).is_err());
        let bad_rho = SyntheticConfig { snr: 1.5, ..SyntheticConfig::default() };
        assert!(make_synthetic(&bad_rho, RngSeed(1)).is_err());

        let cfg = SyntheticConfig::default();
        assert_eq!(make_synthetic(&cfg, RngSeed(3)).unwrap(), make_synthetic(&cfg, RngSeed(3)).unwrap());
        assert_ne!(make_synthetic(&cfg, RngSeed(3)).unwrap(), make_synthetic(&cfg, RngSeed(4)).unwrap());
    }

    #[test]
    fn split_is_stratified_and_disjoint() {
        let ds = make_synthetic(&SyntheticConfig::default(), RngSeed(2)).unwrap();
        let (train, test) = ds.split(0.25, RngSeed(9)).unwrap();
        assert_eq!(train.len() + test.len(), ds.len());
        for c in 0..ds.num_classes() {
            assert_eq!(test.sequences().iter().filter(|s| s.label() == c).count(), 5);
        }
        for s in test.sequences() {
            assert!(train.sequences().iter().all(|t| t.id() != s.id()));
        }
    }
}
