//! Ground-truth datasets.
//!
//! Two generators (a low-rank bilinear affinity matrix and Gaussian blobs)
//! plus a loader for tab-separated affinity tables. Datasets are immutable
//! after construction and double as the simulated labeling oracle: the engine
//! only ever "reveals" values that are already stored here.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::seed::{rng_for, STREAM_DATASET};

/// Ground-truth value revealed by the oracle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LabelValue {
    /// Regression target (affinity score).
    Real(f64),
    /// Class index for classification tasks.
    Class(usize),
}

/// Which kind of task a dataset supports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum TaskKind {
    Affinity,
    Classification,
}

/// A drug–protein affinity table. Sample ids are dense `0..len`; for
/// generated (complete) data, `id = drug * n_proteins + protein`.
#[derive(Debug, Clone, PartialEq)]
pub struct AffinityDataset {
    n_drugs: usize,
    n_proteins: usize,
    drug_names: Vec<String>,
    protein_names: Vec<String>,
    /// Sample id -> (drug index, protein index).
    pairs: Vec<(usize, usize)>,
    /// Sample id -> measured score.
    scores: Vec<f64>,
}

impl AffinityDataset {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn n_drugs(&self) -> usize {
        self.n_drugs
    }

    pub fn n_proteins(&self) -> usize {
        self.n_proteins
    }

    /// True when every (drug, protein) combination is present.
    pub fn is_complete(&self) -> bool {
        self.pairs.len() == self.n_drugs * self.n_proteins
    }

    pub fn pair(&self, id: usize) -> Result<(usize, usize)> {
        self.pairs
            .get(id)
            .copied()
            .ok_or(Error::UnknownSample(crate::pool::SampleId(id)))
    }

    pub fn score(&self, id: usize) -> Result<f64> {
        self.scores
            .get(id)
            .copied()
            .ok_or(Error::UnknownSample(crate::pool::SampleId(id)))
    }

    pub fn scores(&self) -> &[f64] {
        &self.scores
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    /// Mean score per drug over the entries present in the table.
    pub fn drug_means(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.n_drugs];
        let mut count = vec![0usize; self.n_drugs];
        for (&(d, _), &s) in self.pairs.iter().zip(&self.scores) {
            sum[d] += s;
            count[d] += 1;
        }
        sum.iter()
            .zip(&count)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }

    /// Mean score per protein over the entries present in the table.
    pub fn protein_means(&self) -> Vec<f64> {
        let mut sum = vec![0.0; self.n_proteins];
        let mut count = vec![0usize; self.n_proteins];
        for (&(_, p), &s) in self.pairs.iter().zip(&self.scores) {
            sum[p] += s;
            count[p] += 1;
        }
        sum.iter()
            .zip(&count)
            .map(|(&s, &c)| if c == 0 { 0.0 } else { s / c as f64 })
            .collect()
    }

    /// Serialize as the same TSV format `load_affinity_table` reads.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("drug_id\tprotein_id\tscore\n");
        for (&(d, p), &s) in self.pairs.iter().zip(&self.scores) {
            let _ = writeln!(out, "{}\t{}\t{}", self.drug_names[d], self.protein_names[p], s);
        }
        out
    }
}

/// Feature-vector classification data with labels in `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationDataset {
    n_samples: usize,
    dim: usize,
    n_classes: usize,
    /// Row-major `n_samples x dim`.
    features: Vec<f64>,
    labels: Vec<usize>,
}

impl ClassificationDataset {
    pub fn new(features: Vec<f64>, dim: usize, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if dim == 0 || labels.is_empty() {
            return Err(Error::InvalidConfig("empty classification dataset".into()));
        }
        if features.len() != labels.len() * dim {
            return Err(Error::LengthMismatch {
                left: features.len(),
                right: labels.len() * dim,
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::InvalidConfig(format!(
                "label {bad} out of range for {n_classes} classes"
            )));
        }
        if features.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig("non-finite feature value".into()));
        }
        Ok(Self {
            n_samples: labels.len(),
            dim,
            n_classes,
            features,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.n_samples
    }

    pub fn is_empty(&self) -> bool {
        self.n_samples == 0
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn features(&self, id: usize) -> Result<&[f64]> {
        if id >= self.n_samples {
            return Err(Error::UnknownSample(crate::pool::SampleId(id)));
        }
        Ok(&self.features[id * self.dim..(id + 1) * self.dim])
    }

    pub fn label(&self, id: usize) -> Result<usize> {
        self.labels
            .get(id)
            .copied()
            .ok_or(Error::UnknownSample(crate::pool::SampleId(id)))
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }
}

/// Either task's ground-truth store.
#[derive(Debug, Clone, PartialEq)]
pub enum Dataset {
    Affinity(AffinityDataset),
    Classification(ClassificationDataset),
}

impl Dataset {
    pub fn len(&self) -> usize {
        match self {
            Dataset::Affinity(d) => d.len(),
            Dataset::Classification(d) => d.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn task(&self) -> TaskKind {
        match self {
            Dataset::Affinity(_) => TaskKind::Affinity,
            Dataset::Classification(_) => TaskKind::Classification,
        }
    }

    /// Ground-truth label for one sample.
    pub fn label(&self, id: usize) -> Result<LabelValue> {
        match self {
            Dataset::Affinity(d) => Ok(LabelValue::Real(d.score(id)?)),
            Dataset::Classification(d) => Ok(LabelValue::Class(d.label(id)?)),
        }
    }

    pub fn as_affinity(&self) -> Result<&AffinityDataset> {
        match self {
            Dataset::Affinity(d) => Ok(d),
            Dataset::Classification(_) => Err(Error::Unsupported(
                "operation requires an affinity dataset".into(),
            )),
        }
    }

    pub fn as_classification(&self) -> Result<&ClassificationDataset> {
        match self {
            Dataset::Classification(d) => Ok(d),
            Dataset::Affinity(_) => Err(Error::Unsupported(
                "operation requires a classification dataset".into(),
            )),
        }
    }
}

/// Standard-normal sampler (Box–Muller) over a seeded generator.
/// `rand_distr` is not pinned here; two uniforms per draw keep it simple
/// and bit-stable.
pub(crate) struct Gaussian {
    spare: Option<f64>,
}

impl Gaussian {
    pub(crate) fn new() -> Self {
        Self { spare: None }
    }

    pub(crate) fn sample(&mut self, rng: &mut ChaCha8Rng) -> f64 {
        if let Some(z) = self.spare.take() {
            return z;
        }
        // u1 in (0, 1] so ln is finite.
        let u1: f64 = 1.0 - rng.gen::<f64>();
        let u2: f64 = rng.gen();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = 2.0 * std::f64::consts::PI * u2;
        self.spare = Some(r * theta.sin());
        r * theta.cos()
    }
}

/// Generate `scores = U·Vᵀ + ε` with latent factors drawn i.i.d. standard
/// normal and noise `ε ~ N(0, noise_std²)`. Complete table, deterministic
/// per seed.
pub fn generate_bilinear_affinity(
    n_drugs: usize,
    n_proteins: usize,
    latent_rank: usize,
    noise_std: f64,
    rng_seed: u64,
) -> Result<AffinityDataset> {
    if n_drugs == 0 || n_proteins == 0 {
        return Err(Error::InvalidConfig("dataset dimensions must be positive".into()));
    }
    if latent_rank == 0 {
        return Err(Error::InvalidConfig("latent_rank must be >= 1".into()));
    }
    if noise_std < 0.0 {
        return Err(Error::InvalidConfig("noise_std must be >= 0".into()));
    }
    let mut rng = rng_for(rng_seed, STREAM_DATASET, 0);
    let mut gauss = Gaussian::new();
    let draw = |n: usize, rng: &mut ChaCha8Rng, g: &mut Gaussian| -> Vec<f64> {
        (0..n).map(|_| g.sample(rng)).collect()
    };
    let u = draw(n_drugs * latent_rank, &mut rng, &mut gauss);
    let v = draw(n_proteins * latent_rank, &mut rng, &mut gauss);

    let mut pairs = Vec::with_capacity(n_drugs * n_proteins);
    let mut scores = Vec::with_capacity(n_drugs * n_proteins);
    for d in 0..n_drugs {
        for p in 0..n_proteins {
            let mut s = 0.0;
            for r in 0..latent_rank {
                s += u[d * latent_rank + r] * v[p * latent_rank + r];
            }
            if noise_std > 0.0 {
                s += noise_std * gauss.sample(&mut rng);
            }
            pairs.push((d, p));
            scores.push(s);
        }
    }
    Ok(AffinityDataset {
        n_drugs,
        n_proteins,
        drug_names: (0..n_drugs).map(|d| format!("d{d}")).collect(),
        protein_names: (0..n_proteins).map(|p| format!("p{p}")).collect(),
        pairs,
        scores,
    })
}

/// Generate `k` Gaussian clusters with random centers; labels are the
/// cluster index, `per_class` points each.
pub fn generate_blobs(
    k: usize,
    per_class: usize,
    dim: usize,
    center_spread: f64,
    cluster_std: f64,
    rng_seed: u64,
) -> Result<ClassificationDataset> {
    if k < 2 {
        return Err(Error::InvalidConfig("need at least 2 classes".into()));
    }
    if per_class == 0 || dim == 0 {
        return Err(Error::InvalidConfig("per_class and dim must be >= 1".into()));
    }
    if center_spread < 0.0 || cluster_std < 0.0 {
        return Err(Error::InvalidConfig("spreads must be >= 0".into()));
    }
    let mut rng = rng_for(rng_seed, STREAM_DATASET, 1);
    let mut gauss = Gaussian::new();
    let centers: Vec<f64> = (0..k * dim)
        .map(|_| center_spread * gauss.sample(&mut rng))
        .collect();

    let n = k * per_class;
    let mut features = Vec::with_capacity(n * dim);
    let mut labels = Vec::with_capacity(n);
    for class in 0..k {
        for _ in 0..per_class {
            for j in 0..dim {
                features.push(centers[class * dim + j] + cluster_std * gauss.sample(&mut rng));
            }
            labels.push(class);
        }
    }
    ClassificationDataset::new(features, dim, labels, k)
}

/// Load a TSV affinity table with header `drug_id\tprotein_id\tscore`.
/// Ids are densified in first-appearance order. Duplicate pairs and
/// malformed rows are rejected with the offending line number.
pub fn load_affinity_table(path: &Path) -> Result<AffinityDataset> {
    let file = std::fs::File::open(path)?;
    read_affinity_table(BufReader::new(file))
}

/// Same as [`load_affinity_table`] but over any reader.
pub fn read_affinity_table<R: Read>(reader: BufReader<R>) -> Result<AffinityDataset> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => {
            return Err(Error::Parse {
                line: 1,
                message: "empty file, expected header drug_id\\tprotein_id\\tscore".into(),
            })
        }
    };
    if header.trim_end() != "drug_id\tprotein_id\tscore" {
        return Err(Error::Parse {
            line: 1,
            message: format!("bad header {header:?}, expected drug_id\\tprotein_id\\tscore"),
        });
    }

    let mut drug_index: HashMap<String, usize> = HashMap::new();
    let mut protein_index: HashMap<String, usize> = HashMap::new();
    let mut drug_names = Vec::new();
    let mut protein_names = Vec::new();
    let mut seen: HashMap<(usize, usize), usize> = HashMap::new();
    let mut pairs = Vec::new();
    let mut scores = Vec::new();

    for (offset, line) in lines.enumerate() {
        let line_no = offset + 2;
        let line = line?;
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split('\t');
        let (drug, protein, score) = match (fields.next(), fields.next(), fields.next(), fields.next()) {
            (Some(d), Some(p), Some(s), None) => (d, p, s),
            _ => {
                return Err(Error::Parse {
                    line: line_no,
                    message: "expected exactly 3 tab-separated fields".into(),
                })
            }
        };
        let score: f64 = score.trim().parse().map_err(|_| Error::Parse {
            line: line_no,
            message: format!("non-numeric score {score:?}"),
        })?;
        let d = *drug_index.entry(drug.to_string()).or_insert_with(|| {
            drug_names.push(drug.to_string());
            drug_names.len() - 1
        });
        let p = *protein_index.entry(protein.to_string()).or_insert_with(|| {
            protein_names.push(protein.to_string());
            protein_names.len() - 1
        });
        if let Some(first) = seen.insert((d, p), line_no) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate pair ({drug}, {protein}), first seen at line {first}"),
            });
        }
        pairs.push((d, p));
        scores.push(score);
    }

    if pairs.is_empty() {
        return Err(Error::Parse {
            line: 1,
            message: "table has no data rows".into(),
        });
    }
    Ok(AffinityDataset {
        n_drugs: drug_names.len(),
        n_proteins: protein_names.len(),
        drug_names,
        protein_names,
        pairs,
        scores,
    })
}

/// One-hot encode `index` into a vector of length `width`.
pub fn one_hot(index: usize, width: usize) -> Result<Vec<f64>> {
    if index >= width {
        return Err(Error::InvalidInput(format!(
            "one_hot index {index} out of range for width {width}"
        )));
    }
    let mut v = vec![0.0; width];
    v[index] = 1.0;
    Ok(v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::BufReader;

    #[test]
    fn bilinear_is_deterministic() {
        let a = generate_bilinear_affinity(50, 30, 4, 0.1, 1).unwrap();
        let b = generate_bilinear_affinity(50, 30, 4, 0.1, 1).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1500);
        assert!(a.is_complete());
    }

    #[test]
    fn bilinear_rank_one_has_zero_det() {
        let d = generate_bilinear_affinity(2, 2, 1, 0.0, 9).unwrap();
        let s = d.scores();
        let det = s[0] * s[3] - s[1] * s[2];
        assert!(det.abs() < 1e-9, "det = {det}");
    }

    #[test]
    fn bilinear_rejects_bad_config() {
        assert!(generate_bilinear_affinity(0, 3, 1, 0.0, 0).is_err());
        assert!(generate_bilinear_affinity(3, 3, 0, 0.0, 0).is_err());
        assert!(generate_bilinear_affinity(3, 3, 1, -0.5, 0).is_err());
    }

    #[test]
    fn dense_id_layout() {
        let d = generate_bilinear_affinity(3, 4, 2, 0.0, 5).unwrap();
        for id in 0..d.len() {
            let (drug, protein) = d.pair(id).unwrap();
            assert_eq!(id, drug * 4 + protein);
        }
    }

    #[test]
    fn blobs_balanced_and_deterministic() {
        let a = generate_blobs(10, 100, 3, 5.0, 1.0, 2).unwrap();
        let b = generate_blobs(10, 100, 3, 5.0, 1.0, 2).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 1000);
        for class in 0..10 {
            assert_eq!(a.labels().iter().filter(|&&l| l == class).count(), 100);
        }
    }

    #[test]
    fn tsv_round_trip() {
        let d = generate_bilinear_affinity(4, 3, 2, 0.05, 11).unwrap();
        let text = d.to_tsv();
        let back = read_affinity_table(BufReader::new(text.as_bytes())).unwrap();
        assert_eq!(d, back);
    }

    #[test]
    fn tsv_sparse_count() {
        let text = "drug_id\tprotein_id\tscore\nA\tX\t1.0\nA\tY\t2.0\nB\tX\t3.0\n";
        let d = read_affinity_table(BufReader::new(text.as_bytes())).unwrap();
        assert_eq!(d.len(), 3);
        assert_eq!(d.n_drugs(), 2);
        assert_eq!(d.n_proteins(), 2);
        assert!(!d.is_complete());
    }

    #[test]
    fn tsv_duplicate_pair_names_line() {
        let text = "drug_id\tprotein_id\tscore\nA\tX\t1.0\nA\tY\t2.0\nB\tX\t3.0\nA\tX\t9.0\n";
        let err = read_affinity_table(BufReader::new(text.as_bytes())).unwrap_err();
        match err {
            Error::Parse { line, message } => {
                assert_eq!(line, 5);
                assert!(message.contains("duplicate"));
            }
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn tsv_bad_score_names_line() {
        let text = "drug_id\tprotein_id\tscore\nA\tX\tnope\n";
        let err = read_affinity_table(BufReader::new(text.as_bytes())).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn one_hot_basics() {
        assert_eq!(one_hot(0, 3).unwrap(), vec![1.0, 0.0, 0.0]);
        assert_eq!(one_hot(2, 3).unwrap(), vec![0.0, 0.0, 1.0]);
        assert!(one_hot(3, 3).is_err());
    }

    #[test]
    fn oracle_label_lookup() {
        let d = generate_bilinear_affinity(2, 2, 1, 0.0, 3).unwrap();
        let expected = d.score(1).unwrap();
        let ds = Dataset::Affinity(d);
        assert_eq!(ds.label(1).unwrap(), LabelValue::Real(expected));
        assert!(ds.label(99).is_err());
    }
}
