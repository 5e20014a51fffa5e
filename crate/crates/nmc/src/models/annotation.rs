//! Crowd-sourced annotation model. N items each carry a true class `z_i`,
//! K labelers each own one confusion row per true class, and every item is
//! labeled by a small random subset of labelers:
//!
//! `pi ~ Dirichlet(1/C, ..., 1/C)`,
//! `theta_{lm} ~ Dirichlet(alpha_m)` for labeler l and true class m,
//! `z_i ~ Categorical(pi)`,
//! `|J_i| ~ Poisson(j_loc)` clamped to `[1, K]`, labelers drawn without
//! replacement, `y_il ~ Categorical(theta_{l, z_i})`.
//!
//! `alpha_m` has `gamma * rho` on the diagonal entry and
//! `gamma * (1 - rho) / (C - 1)` elsewhere. The labeler sets are observed
//! structure: they are generated, recorded in the dataset and never
//! resampled.

use rand::Rng;
use rand_distr::Distribution as RandDistribution;

use crate::autodiff::Scalar;
use crate::distributions::{
    draw_dirichlet, sample_without_replacement, Distribution, Support, Value, ValueRef,
};
use crate::graph::{build_model, GenericBuilder, Model, NodeDecl};
use crate::linalg::Vector;

use super::ModelSpec;

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationItem {
    pub labelers: Vec<usize>,
    pub labels: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnnotationData {
    pub items: Vec<AnnotationItem>,
    /// True classes of the generated items, kept for evaluation only.
    pub true_z: Vec<i64>,
}

impl AnnotationData {
    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn subset(&self, rows: &[usize]) -> AnnotationData {
        AnnotationData {
            items: rows.iter().map(|&i| self.items[i].clone()).collect(),
            true_z: rows.iter().map(|&i| self.true_z[i]).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct AnnotationTruth {
    pub pi: Vector,
    /// `theta[l][m]` is labeler l's confusion row for true class m.
    pub theta: Vec<Vec<Vector>>,
}

/// Dirichlet concentration for confusion row m.
pub fn confusion_prior(m: usize, c: usize, gamma: f64, rho: f64) -> Vec<f64> {
    (0..c)
        .map(|n| {
            if n == m {
                gamma * rho
            } else {
                gamma * (1.0 - rho) / (c as f64 - 1.0)
            }
        })
        .collect()
}

pub fn generate_annotation<R: Rng + ?Sized>(
    spec: &ModelSpec,
    rng: &mut R,
) -> (AnnotationData, AnnotationTruth) {
    let (n, k, c) = (spec.sizes.n, spec.sizes.k, spec.sizes.c);
    let h = &spec.hyperparams;
    let pi = draw_dirichlet(&vec![1.0 / c as f64; c], rng);
    let theta: Vec<Vec<Vector>> = (0..k)
        .map(|_| {
            (0..c)
                .map(|m| draw_dirichlet(&confusion_prior(m, c, h.gamma, h.rho), rng))
                .collect()
        })
        .collect();
    let poisson = rand_distr::Poisson::new(h.j_loc).expect("validated j_loc");
    let mut items = Vec::with_capacity(n);
    let mut true_z = Vec::with_capacity(n);
    for _ in 0..n {
        let z = categorical_draw(pi.as_slice(), rng);
        let size = (poisson.sample(rng) as usize).clamp(1, k);
        let labelers = sample_without_replacement(size, k, rng);
        let labels = labelers
            .iter()
            .map(|&l| categorical_draw(theta[l][z as usize].as_slice(), rng))
            .collect();
        items.push(AnnotationItem { labelers, labels });
        true_z.push(z);
    }
    (
        AnnotationData { items, true_z },
        AnnotationTruth { pi, theta },
    )
}

fn categorical_draw<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> i64 {
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for (i, p) in probs.iter().enumerate() {
        cum += p;
        if u < cum {
            return i as i64;
        }
    }
    probs.len() as i64 - 1
}

/// `z_i ~ Categorical(pi)` given the class-prevalence parent.
struct ClassPrior;

impl GenericBuilder for ClassPrior {
    fn build<S: Scalar>(&self, p: &[ValueRef<'_, S>]) -> Distribution<S> {
        Distribution::Categorical {
            probs: p[0].real_vec(),
        }
    }
}

/// One item's observed labels given [z_i, theta_{l,m} for l in J_i, m in
/// 0..C]: each label y_il is scored against theta_{l, z_i}.
struct ItemLabels {
    classes: usize,
}

impl GenericBuilder for ItemLabels {
    fn build<S: Scalar>(&self, p: &[ValueRef<'_, S>]) -> Distribution<S> {
        let z = p[0].int() as usize;
        let n_labelers = (p.len() - 1) / self.classes;
        let rows = (0..n_labelers)
            .map(|j| p[1 + j * self.classes + z].real_vec())
            .collect();
        Distribution::CategoricalRows { rows }
    }
}

pub fn theta_node_name(labeler: usize, class: usize) -> String {
    format!("theta_{labeler}_{class}")
}

pub fn z_node_name(item: usize) -> String {
    format!("z_{item}")
}

pub fn build_annotation(spec: &ModelSpec, train: &AnnotationData) -> Model {
    let (k, c) = (spec.sizes.k, spec.sizes.c);
    let h = &spec.hyperparams;
    let mut decls = Vec::with_capacity(1 + k * c + 2 * train.len());
    decls.push(NodeDecl::prior(
        "pi",
        Distribution::Dirichlet {
            conc: vec![1.0 / c as f64; c],
        },
    ));
    for l in 0..k {
        for m in 0..c {
            decls.push(NodeDecl::prior(
                theta_node_name(l, m),
                Distribution::Dirichlet {
                    conc: confusion_prior(m, c, h.gamma, h.rho),
                },
            ));
        }
    }
    for (i, item) in train.items.iter().enumerate() {
        let z_name = z_node_name(i);
        decls.push(NodeDecl::latent(
            z_name.clone(),
            &["pi"],
            Support::Categorical(c),
            ClassPrior,
        ));
        let mut parent_names: Vec<String> = vec![z_name];
        for &l in &item.labelers {
            for m in 0..c {
                parent_names.push(theta_node_name(l, m));
            }
        }
        let parent_refs: Vec<&str> = parent_names.iter().map(String::as_str).collect();
        decls.push(NodeDecl::observed(
            format!("y_{i}"),
            &parent_refs,
            Support::Categorical(c),
            ItemLabels { classes: c },
            Value::IntVec(item.labels.clone()),
        ));
    }
    build_model(decls).expect("the annotation definition is well-formed")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::ModelName;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_spec() -> ModelSpec {
        let mut spec = ModelSpec::new(ModelName::Annotation);
        spec.sizes.n = 10;
        spec.sizes.k = 5;
        spec.sizes.c = 3;
        spec
    }

    #[test]
    fn confusion_prior_matches_direct_substitution() {
        // rho = 0.5, C = 3, gamma = 10: (5, 2.5, 2.5) permuted by m.
        for m in 0..3 {
            let conc = confusion_prior(m, 3, 10.0, 0.5);
            for (n, v) in conc.iter().enumerate() {
                let want = if n == m { 5.0 } else { 2.5 };
                assert_relative_eq!(*v, want, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn generated_items_respect_the_labeler_pool() {
        let spec = small_spec();
        let (data, _) = generate_annotation(&spec, &mut ChaCha8Rng::seed_from_u64(3));
        assert_eq!(data.len(), 10);
        for item in &data.items {
            assert!(!item.labelers.is_empty() && item.labelers.len() <= 5);
            assert_eq!(item.labelers.len(), item.labels.len());
            let mut sorted = item.labelers.clone();
            sorted.sort_unstable();
            sorted.dedup();
            assert_eq!(sorted.len(), item.labelers.len(), "duplicate labeler");
            assert!(item.labels.iter().all(|&y| (0..3).contains(&y)));
        }
    }

    #[test]
    fn flipping_one_item_rescores_only_that_item() {
        let spec = small_spec();
        let (data, _) = generate_annotation(&spec, &mut ChaCha8Rng::seed_from_u64(8));
        let model = build_annotation(&spec, &data);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let world = model.init_world(&mut rng).unwrap();
        let z3 = model.node_id(&z_node_name(3)).unwrap();
        let y3 = model.node_id("y_3").unwrap();
        assert_eq!(model.children(z3), &[y3]);

        let old = world.value(z3).as_int();
        let candidate = (old + 1) % 3;
        let before = model.total_score_recomputed(&world);
        let (w2, delta) = model
            .apply_move(&world, z3, Value::Int(candidate))
            .unwrap();
        let after = model.total_score_recomputed(&w2);
        assert_relative_eq!(delta, after - before, epsilon = 1e-10);
        // untouched items keep their cached scores bit for bit
        for i in 0..10 {
            if i != 3 {
                let y = model.node_id(&format!("y_{i}")).unwrap();
                assert_eq!(world.score(y), w2.score(y));
            }
        }
    }

    #[test]
    fn near_perfect_labelers_make_truth_recoverable() {
        // rho close to one is the perfectly-accurate limit: labels almost
        // surely equal the true class, so majority vote over one or more
        // labels recovers z.
        let mut spec = small_spec();
        spec.sizes.n = 200;
        spec.sizes.c = 2;
        spec.hyperparams.gamma = 2000.0;
        spec.hyperparams.rho = 0.999;
        let (data, _) = generate_annotation(&spec, &mut ChaCha8Rng::seed_from_u64(21));
        let correct = data
            .items
            .iter()
            .zip(&data.true_z)
            .filter(|(item, z)| item.labels.iter().all(|y| y == *z))
            .count();
        assert!(correct as f64 / data.len() as f64 >= 0.99);
    }
}
