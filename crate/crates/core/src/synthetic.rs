//! Seeded synthetic expression datasets for benchmarks and leakage
//! checks: Gaussian noise genes plus a chosen number of informative genes
//! whose class-conditional means differ.

use ndarray::Array2;

use crate::data::{ExpressionMatrix, LabeledDataset, StageLabel};
use crate::error::{Error, Result};
use crate::rng::{derive, rng_from, standard_normal, stream};

#[derive(Debug, Clone, Copy)]
pub struct SyntheticSpec {
    pub n_samples: usize,
    pub n_genes: usize,
    /// The first `n_informative` genes get `shift` added for Late samples.
    pub n_informative: usize,
    pub shift: f64,
    /// Fraction of samples labeled Late.
    pub late_fraction: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n_samples: 300,
            n_genes: 1000,
            n_informative: 40,
            shift: 1.0,
            late_fraction: 0.4,
            seed: 0,
        }
    }
}

/// Build the dataset: labels are a fixed prefix/suffix block (Early then
/// Late), values are standard normal with the informative shift applied.
pub fn synthetic_dataset(spec: &SyntheticSpec) -> Result<LabeledDataset> {
    if spec.n_samples == 0 || spec.n_genes == 0 {
        return Err(Error::EmptyInput("synthetic dataset dimensions"));
    }
    if spec.n_informative > spec.n_genes {
        return Err(Error::InvalidParameter {
            name: "n_informative".into(),
            reason: format!("{} exceeds n_genes {}", spec.n_informative, spec.n_genes),
        });
    }
    if !(spec.late_fraction > 0.0 && spec.late_fraction < 1.0) {
        return Err(Error::InvalidFraction(spec.late_fraction));
    }
    let n_late = ((spec.n_samples as f64) * spec.late_fraction).round() as usize;
    if n_late == 0 || n_late == spec.n_samples {
        return Err(Error::InvalidFraction(spec.late_fraction));
    }
    let n_early = spec.n_samples - n_late;
    let labels: Vec<StageLabel> = (0..spec.n_samples)
        .map(|i| {
            if i < n_early {
                StageLabel::Early
            } else {
                StageLabel::Late
            }
        })
        .collect();

    let mut rng = rng_from(derive(spec.seed, stream::SYNTH));
    let mut values = Array2::zeros((spec.n_samples, spec.n_genes));
    for i in 0..spec.n_samples {
        let late = labels[i] == StageLabel::Late;
        for j in 0..spec.n_genes {
            let mut v = standard_normal(&mut rng);
            if late && j < spec.n_informative {
                v += spec.shift;
            }
            values[[i, j]] = v;
        }
    }

    let sample_ids = (0..spec.n_samples).map(|i| format!("s{:04}", i + 1)).collect();
    let gene_ids = (0..spec.n_genes).map(|j| format!("g{:04}", j + 1)).collect();
    LabeledDataset::new(ExpressionMatrix::new(sample_ids, gene_ids, values)?, labels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_counts_and_determinism() {
        let spec = SyntheticSpec {
            n_samples: 50,
            n_genes: 30,
            n_informative: 5,
            shift: 2.0,
            late_fraction: 0.4,
            seed: 7,
        };
        let ds = synthetic_dataset(&spec).unwrap();
        assert_eq!(ds.n_samples(), 50);
        assert_eq!(ds.matrix().n_genes(), 30);
        assert_eq!(ds.class_counts(), [30, 20]);
        let again = synthetic_dataset(&spec).unwrap();
        assert_eq!(ds.x(), again.x());
        let other = synthetic_dataset(&SyntheticSpec { seed: 8, ..spec }).unwrap();
        assert_ne!(ds.x(), other.x());
    }

    #[test]
    fn informative_genes_carry_the_shift() {
        let spec = SyntheticSpec {
            n_samples: 400,
            n_genes: 10,
            n_informative: 3,
            shift: 1.5,
            late_fraction: 0.5,
            seed: 1,
        };
        let ds = synthetic_dataset(&spec).unwrap();
        let late_rows = ds.class_indices(StageLabel::Late);
        let early_rows = ds.class_indices(StageLabel::Early);
        let mean_of = |rows: &[usize], j: usize| {
            rows.iter().map(|&i| ds.x()[[i, j]]).sum::<f64>() / rows.len() as f64
        };
        for j in 0..3 {
            let gap = mean_of(&late_rows, j) - mean_of(&early_rows, j);
            assert!((gap - 1.5).abs() < 0.4, "gene {j} gap {gap}");
        }
        for j in 3..10 {
            let gap = mean_of(&late_rows, j) - mean_of(&early_rows, j);
            assert!(gap.abs() < 0.4, "noise gene {j} gap {gap}");
        }
    }

    #[test]
    fn rejects_bad_spec() {
        let bad = SyntheticSpec {
            n_informative: 50,
            n_genes: 30,
            ..SyntheticSpec::default()
        };
        assert!(synthetic_dataset(&bad).is_err());
        let empty = SyntheticSpec {
            n_samples: 0,
            ..SyntheticSpec::default()
        };
        assert!(synthetic_dataset(&empty).is_err());
    }
}
