//! Datasets, train/test splits and pool bookkeeping.
//!
//! A [`Dataset`] is a fixed feature matrix with integer class labels. The
//! active-learning state over its training split is a [`PoolState`]: two
//! disjoint, ascending index sets (labeled / unlabeled) plus a round
//! counter. All operations are pure: they consume state and return new
//! state, so runs can share datasets read-only.

use ndarray::{Array2, Array3};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use thiserror::Error;

#[derive(Error, Debug)]
pub enum DatasetError {
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("stratified init infeasible: n0 = {n0} < {k} classes")]
    InfeasibleStratification { n0: usize, k: usize },
    #[error("class {class} has no samples in the given indices")]
    MissingClass { class: usize },
    #[error("selection contains index {index} that is not in the unlabeled pool")]
    StaleSelection { index: usize },
    #[error("selection contains duplicate index {index}")]
    DuplicateSelection { index: usize },
    #[error("invalid blob spec: {0}")]
    InvalidSpec(String),
    #[error("csv parse error at row {row}: {message}")]
    Parse { row: usize, message: String },
    #[error("stratified folds infeasible: class {class} has {count} samples < {k_folds} folds")]
    InfeasibleFolds {
        class: usize,
        count: usize,
        k_folds: usize,
    },
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// A fixed dataset: `n × d` features with labels in `0..k`.
///
/// Optional per-sample binary masks support the segmentation metric
/// utilities; nothing in the classification loop reads them.
#[derive(Debug, Clone)]
pub struct Dataset {
    features: Array2<f64>,
    labels: Vec<usize>,
    k: usize,
    masks: Option<Array3<u8>>,
}

impl Dataset {
    pub fn new(features: Array2<f64>, labels: Vec<usize>, k: usize) -> Result<Self, DatasetError> {
        Self::with_masks(features, labels, k, None)
    }

    pub fn with_masks(
        features: Array2<f64>,
        labels: Vec<usize>,
        k: usize,
        masks: Option<Array3<u8>>,
    ) -> Result<Self, DatasetError> {
        let (n, d) = features.dim();
        if n == 0 {
            return Err(DatasetError::Invalid(
                "dataset must have at least 1 sample".into(),
            ));
        }
        if d == 0 {
            return Err(DatasetError::Invalid(
                "features must have at least 1 column".into(),
            ));
        }
        if k < 2 {
            return Err(DatasetError::Invalid(format!(
                "need at least 2 classes, got {k}"
            )));
        }
        if labels.len() != n {
            return Err(DatasetError::Invalid(format!(
                "{} labels for {} samples",
                labels.len(),
                n
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= k) {
            return Err(DatasetError::Invalid(format!(
                "label {bad} out of range 0..{k}"
            )));
        }
        if !features.iter().all(|x| x.is_finite()) {
            return Err(DatasetError::Invalid(
                "features contain non-finite entries".into(),
            ));
        }
        if let Some(m) = &masks {
            if m.dim().0 != n {
                return Err(DatasetError::Invalid(
                    "mask count must equal sample count".into(),
                ));
            }
            if m.iter().any(|&v| v > 1) {
                return Err(DatasetError::Invalid("masks must be binary".into()));
            }
        }
        Ok(Self {
            features,
            labels,
            k,
            masks,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.features.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.features.ncols()
    }

    pub fn n_classes(&self) -> usize {
        self.k
    }

    pub fn features(&self) -> &Array2<f64> {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn masks(&self) -> Option<&Array3<u8>> {
        self.masks.as_ref()
    }

    /// Feature rows for a subset of samples, in the given order.
    pub fn rows(&self, indices: &[usize]) -> Array2<f64> {
        let mut out = Array2::zeros((indices.len(), self.n_features()));
        for (r, &i) in indices.iter().enumerate() {
            out.row_mut(r).assign(&self.features.row(i));
        }
        out
    }

    /// Labels for a subset of samples, in the given order.
    pub fn labels_for(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }
}

/// Labeled/unlabeled bookkeeping over a training split.
///
/// Both index sets are kept sorted ascending so run artifacts are
/// byte-comparable across platforms.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolState {
    labeled: Vec<usize>,
    unlabeled: Vec<usize>,
    round: usize,
}

impl PoolState {
    pub fn new(mut labeled: Vec<usize>, mut unlabeled: Vec<usize>) -> Result<Self, DatasetError> {
        labeled.sort_unstable();
        unlabeled.sort_unstable();
        if labeled.windows(2).any(|w| w[0] == w[1]) || unlabeled.windows(2).any(|w| w[0] == w[1]) {
            return Err(DatasetError::Invalid(
                "pool index sets contain duplicates".into(),
            ));
        }
        if labeled.iter().any(|i| unlabeled.binary_search(i).is_ok()) {
            return Err(DatasetError::Invalid(
                "labeled and unlabeled sets overlap".into(),
            ));
        }
        Ok(Self {
            labeled,
            unlabeled,
            round: 0,
        })
    }

    pub fn labeled(&self) -> &[usize] {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &[usize] {
        &self.unlabeled
    }

    pub fn round(&self) -> usize {
        self.round
    }
}

/// Moves `batch_indices` from the unlabeled pool to the labeled set and
/// advances the round counter.
pub fn update_pools(pool: &PoolState, batch_indices: &[usize]) -> Result<PoolState, DatasetError> {
    let mut seen = batch_indices.to_vec();
    seen.sort_unstable();
    if let Some(w) = seen.windows(2).find(|w| w[0] == w[1]) {
        return Err(DatasetError::DuplicateSelection { index: w[0] });
    }
    for &i in &seen {
        if pool.unlabeled.binary_search(&i).is_err() {
            return Err(DatasetError::StaleSelection { index: i });
        }
    }
    let mut labeled = pool.labeled.clone();
    labeled.extend_from_slice(&seen);
    labeled.sort_unstable();
    let unlabeled = pool
        .unlabeled
        .iter()
        .copied()
        .filter(|i| seen.binary_search(i).is_err())
        .collect();
    Ok(PoolState {
        labeled,
        unlabeled,
        round: pool.round + 1,
    })
}

/// Largest-remainder quotas with every class guaranteed at least one slot.
///
/// Ties in fractional remainders go to the lower class index. When the
/// remainder pass leaves a class at zero, a slot is taken from the class
/// with the largest quota (lowest index on ties). Quotas never exceed the
/// class counts.
fn stratified_quotas(class_counts: &[usize], n0: usize) -> Vec<usize> {
    let total: usize = class_counts.iter().sum();
    let k = class_counts.len();
    let mut quotas: Vec<usize> = Vec::with_capacity(k);
    let mut remainders: Vec<(usize, f64)> = Vec::with_capacity(k);
    for (c, &count) in class_counts.iter().enumerate() {
        let exact = n0 as f64 * count as f64 / total as f64;
        let floor = exact.floor() as usize;
        quotas.push(floor.min(count));
        remainders.push((c, exact - floor as f64));
    }
    remainders.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut leftover = n0 - quotas.iter().sum::<usize>();
    let mut ri = 0;
    while leftover > 0 {
        let (c, _) = remainders[ri % k];
        if quotas[c] < class_counts[c] {
            quotas[c] += 1;
            leftover -= 1;
        }
        ri += 1;
    }
    // n0 >= k guarantees this loop can always find a donor.
    while let Some(zero) = quotas.iter().position(|&q| q == 0) {
        let donor = quotas
            .iter()
            .enumerate()
            .filter(|&(_, &q)| q > 1)
            .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
            .map(|(c, _)| c)
            .expect("n0 >= k implies a donor class exists");
        quotas[donor] -= 1;
        quotas[zero] += 1;
    }
    quotas
}

/// Seeds the labeled set with `n0` samples whose class counts follow the
/// class frequencies of `train_indices` under largest-remainder rounding,
/// each class getting at least one sample.
pub fn stratified_init(
    dataset: &Dataset,
    train_indices: &[usize],
    n0: usize,
    seed: u64,
) -> Result<PoolState, DatasetError> {
    let k = dataset.n_classes();
    if n0 < k {
        return Err(DatasetError::InfeasibleStratification { n0, k });
    }
    if n0 > train_indices.len() {
        return Err(DatasetError::Invalid(format!(
            "n0 = {n0} exceeds {} training samples",
            train_indices.len()
        )));
    }
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for &i in train_indices {
        by_class[dataset.labels[i]].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.is_empty() {
            return Err(DatasetError::MissingClass { class: c });
        }
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let quotas = stratified_quotas(&counts, n0);

    let mut rng = ChaCha8Rng::seed_from_u64(crate::seeds::derive(seed, crate::seeds::SALT_INIT));
    let mut labeled = Vec::with_capacity(n0);
    for (members, &q) in by_class.iter_mut().zip(&quotas) {
        members.shuffle(&mut rng);
        labeled.extend_from_slice(&members[..q]);
    }
    labeled.sort_unstable();
    let unlabeled = train_indices
        .iter()
        .copied()
        .filter(|i| labeled.binary_search(i).is_err())
        .collect();
    PoolState::new(labeled, unlabeled)
}

/// One synthetic Gaussian blob class.
#[derive(Debug, Clone)]
pub struct BlobClass {
    pub center: Vec<f64>,
    pub stdev: f64,
    pub count: usize,
}

/// Specification for an isotropic Gaussian mixture dataset.
#[derive(Debug, Clone)]
pub struct BlobSpec {
    pub classes: Vec<BlobClass>,
}

impl BlobSpec {
    fn validate(&self) -> Result<usize, DatasetError> {
        if self.classes.len() < 2 {
            return Err(DatasetError::InvalidSpec("need at least 2 classes".into()));
        }
        let d = self.classes[0].center.len();
        if d == 0 {
            return Err(DatasetError::InvalidSpec(
                "centers must have at least 1 dimension".into(),
            ));
        }
        for (c, class) in self.classes.iter().enumerate() {
            if class.center.len() != d {
                return Err(DatasetError::InvalidSpec(format!(
                    "class {c} center has dimension {} != {d}",
                    class.center.len()
                )));
            }
            if !(class.stdev.is_finite() && class.stdev >= 0.0) {
                return Err(DatasetError::InvalidSpec(format!(
                    "class {c} stdev must be >= 0"
                )));
            }
            if class.count == 0 {
                return Err(DatasetError::InvalidSpec(format!(
                    "class {c} count must be >= 1"
                )));
            }
            if !class.center.iter().all(|x| x.is_finite()) {
                return Err(DatasetError::InvalidSpec(format!(
                    "class {c} center not finite"
                )));
            }
        }
        Ok(d)
    }
}

/// Samples a dataset from the blob spec; class `c` samples are drawn from
/// an isotropic Gaussian at the class center. Rows are grouped by class in
/// spec order. Deterministic for a fixed seed.
pub fn generate_blobs(spec: &BlobSpec, seed: u64) -> Result<Dataset, DatasetError> {
    let d = spec.validate()?;
    let n: usize = spec.classes.iter().map(|c| c.count).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut features = Array2::zeros((n, d));
    let mut labels = Vec::with_capacity(n);
    let mut row = 0;
    for (c, class) in spec.classes.iter().enumerate() {
        for _ in 0..class.count {
            for (j, &center) in class.center.iter().enumerate() {
                features[[row, j]] = if class.stdev == 0.0 {
                    center
                } else {
                    let normal = Normal::new(center, class.stdev)
                        .map_err(|e| DatasetError::InvalidSpec(e.to_string()))?;
                    normal.sample(&mut rng)
                };
            }
            labels.push(c);
            row += 1;
        }
    }
    Dataset::new(features, labels, spec.classes.len())
}

/// A dataset loaded from CSV together with its label remapping:
/// `original_labels[new_label]` is the label value found in the file.
#[derive(Debug, Clone)]
pub struct CsvDataset {
    pub dataset: Dataset,
    pub original_labels: Vec<i64>,
}

/// Loads the `f0,...,f{d-1},label` CSV schema. Row order is preserved and
/// labels are remapped to contiguous `0..k` in ascending original order.
pub fn load_csv(path: &Path) -> Result<CsvDataset, DatasetError> {
    let text = std::fs::read_to_string(path)?;
    parse_csv(&text)
}

pub fn parse_csv(text: &str) -> Result<CsvDataset, DatasetError> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines.next().ok_or(DatasetError::Parse {
        row: 1,
        message: "empty file".into(),
    })?;
    let cols: Vec<&str> = header.split(',').map(str::trim).collect();
    if cols.len() < 2 || cols[cols.len() - 1] != "label" {
        return Err(DatasetError::Parse {
            row: 1,
            message: "header must be f0,...,f{d-1},label".into(),
        });
    }
    let d = cols.len() - 1;
    for (j, col) in cols[..d].iter().enumerate() {
        if *col != format!("f{j}") {
            return Err(DatasetError::Parse {
                row: 1,
                message: format!("expected column f{j}, found {col}"),
            });
        }
    }

    let mut rows: Vec<f64> = Vec::new();
    let mut raw_labels: Vec<i64> = Vec::new();
    for (lineno, line) in lines {
        let row = lineno + 1; // 1-based file line
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != d + 1 {
            return Err(DatasetError::Parse {
                row,
                message: format!("expected {} fields, found {}", d + 1, fields.len()),
            });
        }
        for (j, field) in fields[..d].iter().enumerate() {
            let value: f64 = field.parse().map_err(|_| DatasetError::Parse {
                row,
                message: format!("non-numeric feature f{j}: {field:?}"),
            })?;
            if !value.is_finite() {
                return Err(DatasetError::Parse {
                    row,
                    message: format!("non-finite feature f{j}"),
                });
            }
            rows.push(value);
        }
        let label: i64 = fields[d].parse().map_err(|_| DatasetError::Parse {
            row,
            message: format!("non-integer label: {:?}", fields[d]),
        })?;
        raw_labels.push(label);
    }

    let n = raw_labels.len();
    if n == 0 {
        return Err(DatasetError::Parse {
            row: 1,
            message: "no data rows".into(),
        });
    }
    let mut mapping: BTreeMap<i64, usize> = BTreeMap::new();
    for &l in &raw_labels {
        mapping.entry(l).or_default();
    }
    let original_labels: Vec<i64> = mapping.keys().copied().collect();
    for (new, &orig) in original_labels.iter().enumerate() {
        mapping.insert(orig, new);
    }
    let labels: Vec<usize> = raw_labels.iter().map(|l| mapping[l]).collect();
    let features =
        Array2::from_shape_vec((n, d), rows).map_err(|e| DatasetError::Invalid(e.to_string()))?;
    let dataset = Dataset::new(features, labels, original_labels.len())?;
    Ok(CsvDataset {
        dataset,
        original_labels,
    })
}

/// Writes a dataset in the `f0,...,f{d-1},label` schema. Floats use Rust's
/// shortest round-trip formatting, so `load_csv` recovers them exactly.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<(), DatasetError> {
    let d = dataset.n_features();
    let mut out = String::new();
    for j in 0..d {
        let _ = write!(out, "f{j},");
    }
    out.push_str("label\n");
    for i in 0..dataset.n_samples() {
        for j in 0..d {
            let _ = write!(out, "{},", dataset.features[[i, j]]);
        }
        let _ = writeln!(out, "{}", dataset.labels[i]);
    }
    std::fs::write(path, out)?;
    Ok(())
}

/// A `(train, test)` pair of ascending sample indices.
pub type TrainTestSplit = (Vec<usize>, Vec<usize>);

/// Stratified k-fold partition: per-fold class proportions stay within one
/// sample of the global proportions. Returns `(train, test)` index pairs.
pub fn stratified_folds(
    dataset: &Dataset,
    k_folds: usize,
    seed: u64,
) -> Result<Vec<TrainTestSplit>, DatasetError> {
    if k_folds < 2 {
        return Err(DatasetError::Invalid("k_folds must be >= 2".into()));
    }
    let k = dataset.n_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &y) in dataset.labels.iter().enumerate() {
        by_class[y].push(i);
    }
    for (c, members) in by_class.iter().enumerate() {
        if members.len() < k_folds {
            return Err(DatasetError::InfeasibleFolds {
                class: c,
                count: members.len(),
                k_folds,
            });
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seeds::derive(seed, crate::seeds::SALT_FOLDS));
    let mut fold_members: Vec<Vec<usize>> = vec![Vec::new(); k_folds];
    for (c, members) in by_class.iter_mut().enumerate() {
        members.shuffle(&mut rng);
        // Rotate the starting fold by class so no fold systematically
        // collects every class's remainder sample.
        for (pos, &i) in members.iter().enumerate() {
            fold_members[(pos + c) % k_folds].push(i);
        }
    }
    let mut folds = Vec::with_capacity(k_folds);
    for members in &fold_members {
        let mut test = members.clone();
        test.sort_unstable();
        let mut train: Vec<usize> = (0..dataset.n_samples())
            .filter(|i| test.binary_search(i).is_err())
            .collect();
        train.sort_unstable();
        folds.push((train, test));
    }
    Ok(folds)
}

/// Single stratified train/test split with the given train fraction.
pub fn stratified_split(
    dataset: &Dataset,
    train_fraction: f64,
    seed: u64,
) -> Result<TrainTestSplit, DatasetError> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(DatasetError::Invalid(
            "train_fraction must be in (0,1)".into(),
        ));
    }
    let k = dataset.n_classes();
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); k];
    for (i, &y) in dataset.labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(crate::seeds::derive(seed, crate::seeds::SALT_FOLDS));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for members in by_class.iter_mut() {
        if members.is_empty() {
            continue;
        }
        members.shuffle(&mut rng);
        // At least one sample per class on each side when the class allows it.
        let mut n_train = (members.len() as f64 * train_fraction).round() as usize;
        n_train = n_train.clamp(1.min(members.len()), members.len());
        if n_train == members.len() && members.len() > 1 {
            n_train -= 1;
        }
        train.extend_from_slice(&members[..n_train]);
        test.extend_from_slice(&members[n_train..]);
    }
    train.sort_unstable();
    test.sort_unstable();
    if train.is_empty() || test.is_empty() {
        return Err(DatasetError::Invalid("degenerate train/test split".into()));
    }
    Ok((train, test))
}
