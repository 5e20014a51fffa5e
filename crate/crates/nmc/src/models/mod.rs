//! Benchmark generative models and synthetic data generators.

mod annotation;
mod blr;
mod funnel;
mod robust;

pub use annotation::{
    build_annotation, generate_annotation, theta_node_name, z_node_name, AnnotationData,
    AnnotationItem, AnnotationTruth,
};
pub use blr::{build_blr, generate_blr, label_probability, BlrData, BlrTruth};
pub use funnel::build_funnel;
pub use robust::{build_robust, generate_robust, RobustData, RobustTruth};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model specification: {0}")]
    InvalidSpec(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelName {
    Funnel,
    Blr,
    Robust,
    Annotation,
}

impl std::fmt::Display for ModelName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModelName::Funnel => write!(f, "funnel"),
            ModelName::Blr => write!(f, "blr"),
            ModelName::Robust => write!(f, "robust"),
            ModelName::Annotation => write!(f, "annotation"),
        }
    }
}

fn default_n() -> usize {
    1000
}
fn default_k() -> usize {
    10
}
fn default_c() -> usize {
    3
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sizes {
    /// Number of data rows (regressions) or items (annotation).
    #[serde(default = "default_n")]
    pub n: usize,
    /// Covariate dimension (regressions) or labeler count (annotation).
    #[serde(default = "default_k")]
    pub k: usize,
    /// Number of classes (annotation only).
    #[serde(default = "default_c")]
    pub c: usize,
}

impl Default for Sizes {
    fn default() -> Self {
        Sizes {
            n: default_n(),
            k: default_k(),
            c: default_c(),
        }
    }
}

fn default_sigma_mean() -> f64 {
    1.0
}
fn default_alpha_scale() -> f64 {
    10.0
}
fn default_beta_loc() -> f64 {
    0.0
}
fn default_beta_scale() -> f64 {
    2.5
}
fn default_j_loc() -> f64 {
    2.5
}
fn default_gamma() -> f64 {
    10.0
}
fn default_rho() -> f64 {
    0.5
}

/// Model hyperparameters. Regression priors default to the intercept scale
/// 10 and coefficient scale 2.5 shared by the logistic and robust models;
/// the annotation defaults are the standard configuration of that model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    #[serde(default = "default_sigma_mean")]
    pub sigma_mean: f64,
    #[serde(default = "default_alpha_scale")]
    pub alpha_scale: f64,
    #[serde(default = "default_beta_loc")]
    pub beta_loc: f64,
    #[serde(default = "default_beta_scale")]
    pub beta_scale: f64,
    #[serde(default = "default_j_loc")]
    pub j_loc: f64,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default = "default_rho")]
    pub rho: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            sigma_mean: default_sigma_mean(),
            alpha_scale: default_alpha_scale(),
            beta_loc: default_beta_loc(),
            beta_scale: default_beta_scale(),
            j_loc: default_j_loc(),
            gamma: default_gamma(),
            rho: default_rho(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub name: ModelName,
    #[serde(default)]
    pub sizes: Sizes,
    #[serde(default)]
    pub hyperparams: Hyperparams,
}

impl ModelSpec {
    pub fn new(name: ModelName) -> Self {
        ModelSpec {
            name,
            sizes: Sizes::default(),
            hyperparams: Hyperparams::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let s = &self.sizes;
        let h = &self.hyperparams;
        match self.name {
            ModelName::Funnel => {}
            ModelName::Blr | ModelName::Robust => {
                if s.n < 1 || s.k < 1 {
                    return Err(ModelError::InvalidSpec(
                        "regression models need n >= 1 and k >= 1".into(),
                    ));
                }
            }
            ModelName::Annotation => {
                if s.n < 1 || s.k < 2 || s.c < 2 {
                    return Err(ModelError::InvalidSpec(
                        "annotation needs n >= 1, k >= 2 labelers and c >= 2 classes".into(),
                    ));
                }
                if !(0.0 < h.rho && h.rho < 1.0) || h.gamma <= 0.0 || h.j_loc <= 0.0 {
                    return Err(ModelError::InvalidSpec(
                        "annotation needs 0 < rho < 1, gamma > 0 and j_loc > 0".into(),
                    ));
                }
            }
        }
        for (name, v) in [
            ("sigma_mean", h.sigma_mean),
            ("alpha_scale", h.alpha_scale),
            ("beta_scale", h.beta_scale),
        ] {
            if v <= 0.0 {
                return Err(ModelError::InvalidSpec(format!("{name} must be positive")));
            }
        }
        Ok(())
    }
}

/// Train/held-out split of a freshly generated dataset, plus the generating
/// ground truth (kept for evaluation only; it never enters the model).
#[derive(Debug, Clone)]
pub enum Dataset {
    Funnel,
    Blr {
        train: BlrData,
        heldout: BlrData,
        truth: BlrTruth,
    },
    Robust {
        train: RobustData,
        heldout: RobustData,
        truth: RobustTruth,
    },
    Annotation {
        train: AnnotationData,
        heldout: AnnotationData,
        truth: AnnotationTruth,
    },
}

impl Dataset {
    pub fn model_name(&self) -> ModelName {
        match self {
            Dataset::Funnel => ModelName::Funnel,
            Dataset::Blr { .. } => ModelName::Blr,
            Dataset::Robust { .. } => ModelName::Robust,
            Dataset::Annotation { .. } => ModelName::Annotation,
        }
    }
}

/// Forward-simulate the model and randomly partition the observed rows
/// into a training part and a held-out part.
pub fn generate_and_split<R: Rng + ?Sized>(
    spec: &ModelSpec,
    rng: &mut R,
    holdout_fraction: f64,
) -> Result<Dataset, ModelError> {
    spec.validate()?;
    if !(0.0 < holdout_fraction && holdout_fraction < 1.0) {
        return Err(ModelError::InvalidSpec(
            "holdout_fraction must lie strictly between 0 and 1".into(),
        ));
    }
    let n = spec.sizes.n;
    Ok(match spec.name {
        ModelName::Funnel => Dataset::Funnel,
        ModelName::Blr => {
            let (data, truth) = generate_blr(spec, rng);
            let (train_idx, held_idx) = split_indices(n, holdout_fraction, rng);
            Dataset::Blr {
                train: data.subset(&train_idx),
                heldout: data.subset(&held_idx),
                truth,
            }
        }
        ModelName::Robust => {
            let (data, truth) = generate_robust(spec, rng);
            let (train_idx, held_idx) = split_indices(n, holdout_fraction, rng);
            Dataset::Robust {
                train: data.subset(&train_idx),
                heldout: data.subset(&held_idx),
                truth,
            }
        }
        ModelName::Annotation => {
            let (data, truth) = generate_annotation(spec, rng);
            let (train_idx, held_idx) = split_indices(n, holdout_fraction, rng);
            Dataset::Annotation {
                train: data.subset(&train_idx),
                heldout: data.subset(&held_idx),
                truth,
            }
        }
    })
}

/// Shuffled disjoint index split; the held-out part gets
/// `round(n * fraction)` rows.
fn split_indices<R: Rng + ?Sized>(
    n: usize,
    holdout_fraction: f64,
    rng: &mut R,
) -> (Vec<usize>, Vec<usize>) {
    let perm = crate::distributions::sample_without_replacement(n, n, rng);
    let n_held = ((n as f64) * holdout_fraction).round() as usize;
    let n_held = n_held.clamp(1, n - 1);
    let held = perm[..n_held].to_vec();
    let train = perm[n_held..].to_vec();
    (train, held)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn split_is_a_disjoint_cover() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let (train, held) = split_indices(100, 0.5, &mut rng);
        assert_eq!(train.len(), 50);
        assert_eq!(held.len(), 50);
        let mut all: Vec<usize> = train.iter().chain(held.iter()).copied().collect();
        all.sort_unstable();
        assert_eq!(all, (0..100).collect::<Vec<_>>());
    }

    #[test]
    fn split_is_deterministic_under_a_seed() {
        let a = split_indices(40, 0.25, &mut ChaCha8Rng::seed_from_u64(9));
        let b = split_indices(40, 0.25, &mut ChaCha8Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn spec_validation_catches_bad_sizes() {
        let mut spec = ModelSpec::new(ModelName::Annotation);
        spec.sizes.c = 1;
        assert!(spec.validate().is_err());
        spec.sizes.c = 3;
        spec.hyperparams.rho = 1.0;
        assert!(spec.validate().is_err());
    }
}
