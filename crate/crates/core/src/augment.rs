//! Training-set augmentation: SMOTE oversampling, stochastic feature
//! augmentation (per-row affine noise), and Gaussian expansion.
//!
//! Every synthetic row is logged in a provenance record so tests (and
//! downstream audits) can re-verify exactly how it was generated. All
//! generation draws from per-row derived streams, making output independent
//! of scheduling and bitwise reproducible per seed.

use std::collections::HashSet;
use std::io::Write;

use ndarray::Array2;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::data::{ExpressionMatrix, LabeledDataset, StageLabel};
use crate::error::{Error, Result};
use crate::rng::{self, standard_normal, stream};

/// How many synthetic minority rows SMOTE should make.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SmoteTarget {
    /// Bring the minority class up to the majority count.
    BalanceToMajority,
    /// Bring the minority count up to ceil(ratio × majority count).
    Ratio(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoteParams {
    pub k_neighbors: usize,
    pub target: SmoteTarget,
    pub seed: u64,
}

impl SmoteParams {
    pub fn new(seed: u64) -> Self {
        SmoteParams { k_neighbors: 5, target: SmoteTarget::BalanceToMajority, seed }
    }
}

/// Additive Gaussian noise spec: N = mu + sigma·Z per feature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseParams {
    pub mu: f64,
    /// Standard deviation of the noise; in relative mode it multiplies each
    /// feature's training std instead of being absolute.
    pub sigma: f64,
    pub relative: bool,
    /// Output size multiplier: originals plus (factor - 1) noisy copies.
    pub factor: usize,
}

impl Default for NoiseParams {
    fn default() -> Self {
        NoiseParams { mu: 0.0, sigma: 0.01, relative: true, factor: 10 }
    }
}

/// Per-row affine noise: ẑ = α ⊙ z + β with α ~ N(mu, sigma1²I) and
/// β ~ N(0, sigma2²I), fresh draws per row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SFAParams {
    pub mu: f64,
    pub sigma1: f64,
    pub sigma2: f64,
}

impl Default for SFAParams {
    fn default() -> Self {
        SFAParams { mu: 1.0, sigma1: 0.1, sigma2: 0.1 }
    }
}

/// What generated one synthetic row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AugmentKind {
    Smote,
    Sfa,
    Gaussian,
}

impl std::fmt::Display for AugmentKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            AugmentKind::Smote => f.write_str("smote"),
            AugmentKind::Sfa => f.write_str("sfa"),
            AugmentKind::Gaussian => f.write_str("gaussian"),
        }
    }
}

/// Provenance of one synthetic row; indices refer to the input dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProvenanceRecord {
    pub kind: AugmentKind,
    pub base_row: usize,
    pub neighbor_row: Option<usize>,
    /// SMOTE's interpolation δ, or the sigma the noise was drawn with.
    pub delta_or_sigma: f64,
}

/// An augmented dataset plus how it was made.
#[derive(Debug, Clone)]
pub struct Augmented {
    pub dataset: LabeledDataset,
    pub provenance: Vec<ProvenanceRecord>,
    /// Human-readable notes about parameter adjustments (e.g. k clamping).
    pub warnings: Vec<String>,
}

/// SMOTE: synthesize minority rows on segments toward nearby minority rows.
///
/// Each synthetic row is x + δ(x_i − x) for a random minority base x, one of
/// its k nearest minority neighbors x_i (Euclidean), and δ drawn from the
/// open interval (0, 1). Originals are preserved verbatim and the majority
/// class is never touched. If both classes are already at or beyond the
/// target, the output is just the input.
pub fn smote(train: &LabeledDataset, params: &SmoteParams) -> Result<Augmented> {
    if params.k_neighbors < 1 {
        return Err(Error::InvalidParameter {
            name: "k_neighbors".into(),
            reason: "must be at least 1".into(),
        });
    }
    let counts = train.class_counts();
    // ties pick Early so the choice is deterministic
    let minority = if counts[0] <= counts[1] { StageLabel::Early } else { StageLabel::Late };
    let minority_rows = train.class_indices(minority);
    let majority_count = counts[minority.index() ^ 1];
    let minority_count = minority_rows.len();
    if minority_count < 2 {
        return Err(Error::GroupTooSmall {
            context: "SMOTE minority class",
            required: 2,
            found: minority_count,
        });
    }

    let desired = match params.target {
        SmoteTarget::BalanceToMajority => majority_count,
        SmoteTarget::Ratio(r) => {
            if !(r > 0.0) || !r.is_finite() {
                return Err(Error::InvalidParameter {
                    name: "target ratio".into(),
                    reason: format!("{r} must be positive and finite"),
                });
            }
            (r * majority_count as f64).ceil() as usize
        }
    };
    let n_new = desired.saturating_sub(minority_count);

    let mut warnings = Vec::new();
    let mut k = params.k_neighbors;
    if k >= minority_count {
        k = minority_count - 1;
        warnings.push(format!(
            "k_neighbors {} >= minority size {minority_count}; clamped to {k}",
            params.k_neighbors
        ));
    }

    let x = train.x();
    // k nearest minority neighbors per minority row; ties resolved toward
    // the lower row index
    let knn: Vec<Vec<usize>> = minority_rows
        .iter()
        .map(|&a| {
            let mut dists: Vec<(f64, usize)> = minority_rows
                .iter()
                .filter(|&&b| b != a)
                .map(|&b| {
                    let d = x
                        .row(a)
                        .iter()
                        .zip(x.row(b).iter())
                        .map(|(p, q)| (p - q) * (p - q))
                        .sum::<f64>();
                    (d, b)
                })
                .collect();
            dists.sort_by(|l, r| l.0.partial_cmp(&r.0).unwrap().then(l.1.cmp(&r.1)));
            dists.truncate(k);
            dists.into_iter().map(|(_, b)| b).collect()
        })
        .collect();
    let local_of: std::collections::HashMap<usize, usize> =
        minority_rows.iter().enumerate().map(|(l, &g)| (g, l)).collect();

    let p = x.ncols();
    let mut values = Array2::zeros((train.n_samples() + n_new, p));
    values.slice_mut(ndarray::s![..train.n_samples(), ..]).assign(x);
    let mut provenance = Vec::with_capacity(n_new);
    for i in 0..n_new {
        let mut row_rng = rng::rng_from(rng::derive_indexed(params.seed, stream::SMOTE, i as u64));
        let base = minority_rows[row_rng.gen_range(0..minority_count)];
        let neighbor = knn[local_of[&base]][row_rng.gen_range(0..k)];
        let delta = loop {
            let d: f64 = row_rng.gen();
            if d > 0.0 && d < 1.0 {
                break d;
            }
        };
        let out_row = train.n_samples() + i;
        for j in 0..p {
            let a = x[[base, j]];
            values[[out_row, j]] = a + delta * (x[[neighbor, j]] - a);
        }
        provenance.push(ProvenanceRecord {
            kind: AugmentKind::Smote,
            base_row: base,
            neighbor_row: Some(neighbor),
            delta_or_sigma: delta,
        });
    }

    let mut ids: Vec<String> = train.matrix().sample_ids().to_vec();
    let mut taken: HashSet<String> = ids.iter().cloned().collect();
    for i in 0..n_new {
        ids.push(fresh_id(format!("smote_{i}"), &mut taken));
    }
    let mut labels = train.labels().to_vec();
    labels.extend(std::iter::repeat(minority).take(n_new));

    let matrix = ExpressionMatrix::new(ids, train.matrix().gene_ids().to_vec(), values)?;
    Ok(Augmented {
        dataset: LabeledDataset::new(matrix, labels)?,
        provenance,
        warnings,
    })
}

/// Stochastic feature augmentation of every row: ẑ = α ⊙ z + β.
///
/// Per row, α gets p draws then β gets p draws from that row's derived
/// stream. With sigma1 = sigma2 = 0 and mu = 1 the output equals the input
/// exactly. The input is not modified; the returned matrix holds only the
/// augmented rows (callers append them if they want originals kept).
pub fn sfa(features: &Array2<f64>, params: &SFAParams, seed: u64) -> Result<Array2<f64>> {
    for (name, s) in [("sigma1", params.sigma1), ("sigma2", params.sigma2)] {
        if !(s >= 0.0) {
            return Err(Error::InvalidParameter {
                name: name.into(),
                reason: format!("{s} must be >= 0"),
            });
        }
    }
    let mut out = features.clone();
    for (i, mut row) in out.rows_mut().into_iter().enumerate() {
        let mut row_rng = rng::rng_from(rng::derive_indexed(seed, stream::SFA, i as u64));
        let alphas: Vec<f64> = row
            .iter()
            .map(|_| params.mu + params.sigma1 * standard_normal(&mut row_rng))
            .collect();
        for (j, v) in row.iter_mut().enumerate() {
            let beta = params.sigma2 * standard_normal(&mut row_rng);
            *v = alphas[j] * *v + beta;
        }
    }
    Ok(out)
}

/// Expands a training set to exactly factor × its size: the originals in
/// order, then (factor − 1) rounds of noisy copies, each round covering all
/// rows in order. Noise is x + mu + sigma·z per feature; in relative mode
/// sigma is multiplied by that feature's population std over the input.
pub fn gaussian_expand(
    train: &LabeledDataset,
    params: &NoiseParams,
    seed: u64,
) -> Result<Augmented> {
    if params.factor < 1 {
        return Err(Error::InvalidParameter {
            name: "factor".into(),
            reason: "must be at least 1".into(),
        });
    }
    if !(params.sigma >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "sigma".into(),
            reason: format!("{} must be >= 0", params.sigma),
        });
    }

    let x = train.x();
    let n = x.nrows();
    let p = x.ncols();
    let sigmas: Vec<f64> = if params.relative {
        let means = crate::linalg::column_means(x);
        (0..p)
            .map(|j| {
                let var = x
                    .column(j)
                    .iter()
                    .map(|v| (v - means[j]) * (v - means[j]))
                    .sum::<f64>()
                    / n as f64;
                params.sigma * var.sqrt()
            })
            .collect()
    } else {
        vec![params.sigma; p]
    };

    let copies = params.factor - 1;
    let mut values = Array2::zeros((n * params.factor, p));
    values.slice_mut(ndarray::s![..n, ..]).assign(x);
    let mut provenance = Vec::with_capacity(n * copies);
    let mut ids: Vec<String> = train.matrix().sample_ids().to_vec();
    let mut taken: HashSet<String> = ids.iter().cloned().collect();
    let mut labels = train.labels().to_vec();

    for c in 0..copies {
        for i in 0..n {
            let mut row_rng = rng::rng_from(rng::derive_indexed(
                seed,
                stream::GAUSSIAN,
                (c * n + i) as u64,
            ));
            let out_row = n + c * n + i;
            for j in 0..p {
                values[[out_row, j]] =
                    x[[i, j]] + params.mu + sigmas[j] * standard_normal(&mut row_rng);
            }
            provenance.push(ProvenanceRecord {
                kind: AugmentKind::Gaussian,
                base_row: i,
                neighbor_row: None,
                delta_or_sigma: params.sigma,
            });
            ids.push(fresh_id(
                format!("{}_g{}", train.matrix().sample_ids()[i], c + 1),
                &mut taken,
            ));
            labels.push(train.labels()[i]);
        }
    }

    let matrix = ExpressionMatrix::new(ids, train.matrix().gene_ids().to_vec(), values)?;
    Ok(Augmented {
        dataset: LabeledDataset::new(matrix, labels)?,
        provenance,
        warnings: Vec::new(),
    })
}

fn fresh_id(candidate: String, taken: &mut HashSet<String>) -> String {
    let mut id = candidate;
    while taken.contains(&id) {
        id.push('x');
    }
    taken.insert(id.clone());
    id
}

/// Writes the provenance log: `kind,base_row,neighbor_row,delta_or_sigma`.
/// Rows without a neighbor leave that field empty.
pub fn write_provenance_csv<W: Write>(records: &[ProvenanceRecord], mut w: W) -> Result<()> {
    let to_io = |e: std::io::Error| Error::io("<provenance>", e);
    writeln!(w, "kind,base_row,neighbor_row,delta_or_sigma").map_err(to_io)?;
    for r in records {
        let neighbor = r.neighbor_row.map(|n| n.to_string()).unwrap_or_default();
        writeln!(w, "{},{},{},{}", r.kind, r.base_row, neighbor, r.delta_or_sigma)
            .map_err(to_io)?;
    }
    Ok(())
}
