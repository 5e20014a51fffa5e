//! Directed acyclic model representation with single-site scoring.
//!
//! Each node owns a distribution builder: a function from parent values to
//! a [`Distribution`]. A [`World`] assigns a value to every node and caches
//! each node's own log-density given its current parents, so the total
//! log-density is always the sum of the cached scores. Changing one node
//! touches only that node and its children (the Markov blanket), and the
//! blanket log-density is exposed as a scalar function of the node's value
//! for the derivative engine.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;
use thiserror::Error;

use crate::autodiff::{self, AutodiffError, Dual, GradHess, Scalar, ScalarFn};
use crate::distributions::{DistError, Distribution, Support, Value, ValueRef};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("node `{0}` references unknown parent `{1}`")]
    UnknownParent(String, String),
    #[error("cycle detected through node `{0}`")]
    CycleDetected(String),
    #[error("duplicate node name `{0}`")]
    DuplicateName(String),
    #[error("value for node `{0}` lies outside its declared support")]
    OutOfSupport(String),
    #[error("distribution error at node `{0}`: {1}")]
    Distribution(String, DistError),
}

pub type NodeId = usize;

/// Builds the node's distribution from parent values, written once against
/// the [`Scalar`] trait. Unit structs (possibly carrying data) implement
/// this; the object-safe [`DistributionBuilder`] below is derived from it.
pub trait GenericBuilder: Send + Sync + 'static {
    fn build<S: Scalar>(&self, parents: &[ValueRef<'_, S>]) -> Distribution<S>;
}

/// Object-safe pair of monomorphic entry points stored inside nodes.
pub trait DistributionBuilder: Send + Sync {
    fn build_value(&self, parents: &[ValueRef<'_, f64>]) -> Distribution<f64>;
    fn build_dual(&self, parents: &[ValueRef<'_, Dual>]) -> Distribution<Dual>;
}

impl<T: GenericBuilder> DistributionBuilder for T {
    fn build_value(&self, parents: &[ValueRef<'_, f64>]) -> Distribution<f64> {
        self.build(parents)
    }
    fn build_dual(&self, parents: &[ValueRef<'_, Dual>]) -> Distribution<Dual> {
        self.build(parents)
    }
}

/// Builder for nodes whose distribution does not depend on any parent.
pub struct FixedDist(pub Distribution<f64>);

impl GenericBuilder for FixedDist {
    fn build<S: Scalar>(&self, _parents: &[ValueRef<'_, S>]) -> Distribution<S> {
        self.0.lift()
    }
}

/// Declaration of one node; the model is built from an ordered list of
/// these.
pub struct NodeDecl {
    pub name: String,
    pub parents: Vec<String>,
    pub support: Support,
    pub builder: Box<dyn DistributionBuilder>,
    pub observed: Option<Value>,
}

impl NodeDecl {
    pub fn latent(
        name: impl Into<String>,
        parents: &[&str],
        support: Support,
        builder: impl DistributionBuilder + 'static,
    ) -> Self {
        NodeDecl {
            name: name.into(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            support,
            builder: Box::new(builder),
            observed: None,
        }
    }

    pub fn observed(
        name: impl Into<String>,
        parents: &[&str],
        support: Support,
        builder: impl DistributionBuilder + 'static,
        value: Value,
    ) -> Self {
        NodeDecl {
            name: name.into(),
            parents: parents.iter().map(|s| s.to_string()).collect(),
            support,
            builder: Box::new(builder),
            observed: Some(value),
        }
    }

    /// Root latent node with constant prior parameters.
    pub fn prior(name: impl Into<String>, dist: Distribution<f64>) -> Self {
        let support = dist.support();
        Self::latent(name, &[], support, FixedDist(dist))
    }
}

struct ModelNode {
    name: String,
    parents: Vec<NodeId>,
    support: Support,
    builder: Box<dyn DistributionBuilder>,
    observed: Option<Value>,
}

/// Immutable model: nodes in topological order plus a child index. Shared
/// freely across chains.
pub struct Model {
    nodes: Vec<ModelNode>,
    order: Vec<NodeId>,
    children: Vec<Vec<NodeId>>,
    index: HashMap<String, NodeId>,
    latents: Vec<NodeId>,
}

impl std::fmt::Debug for Model {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Model")
            .field("nodes", &self.nodes.iter().map(|n| &n.name).collect::<Vec<_>>())
            .field("latents", &self.latents)
            .finish()
    }
}

/// Assignment of values to all nodes plus cached per-node log-densities.
///
/// Values sit behind `Arc` so a tentative world is a cheap copy; rejecting
/// a move just drops the copy.
#[derive(Clone, Debug)]
pub struct World {
    values: Vec<Arc<Value>>,
    scores: Vec<f64>,
}

impl World {
    pub fn value(&self, id: NodeId) -> &Value {
        &self.values[id]
    }

    pub fn score(&self, id: NodeId) -> f64 {
        self.scores[id]
    }

    /// Total model log-density: the sum of the cached per-node scores.
    pub fn total_log_density(&self) -> f64 {
        self.scores.iter().sum()
    }
}

pub fn build_model(decls: Vec<NodeDecl>) -> Result<Model, GraphError> {
    let mut index = HashMap::new();
    for (i, d) in decls.iter().enumerate() {
        if index.insert(d.name.clone(), i).is_some() {
            return Err(GraphError::DuplicateName(d.name.clone()));
        }
    }
    let mut nodes = Vec::with_capacity(decls.len());
    for d in decls {
        let mut parents = Vec::with_capacity(d.parents.len());
        for p in &d.parents {
            let pid = *index
                .get(p)
                .ok_or_else(|| GraphError::UnknownParent(d.name.clone(), p.clone()))?;
            parents.push(pid);
        }
        if let Some(v) = &d.observed {
            if !d.support.contains(v) {
                return Err(GraphError::OutOfSupport(d.name.clone()));
            }
        }
        nodes.push(ModelNode {
            name: d.name,
            parents,
            support: d.support,
            builder: d.builder,
            observed: d.observed,
        });
    }

    // Kahn's algorithm; anything left over sits on a cycle.
    let n = nodes.len();
    let mut children = vec![Vec::new(); n];
    let mut indegree = vec![0usize; n];
    for (id, node) in nodes.iter().enumerate() {
        indegree[id] = node.parents.len();
        for &p in &node.parents {
            children[p].push(id);
        }
    }
    let mut queue: Vec<NodeId> = (0..n).filter(|&i| indegree[i] == 0).collect();
    let mut order = Vec::with_capacity(n);
    let mut head = 0;
    while head < queue.len() {
        let id = queue[head];
        head += 1;
        order.push(id);
        for &c in &children[id] {
            indegree[c] -= 1;
            if indegree[c] == 0 {
                queue.push(c);
            }
        }
    }
    if order.len() != n {
        let stuck = (0..n)
            .find(|&i| indegree[i] > 0)
            .expect("some node must remain on the cycle");
        return Err(GraphError::CycleDetected(nodes[stuck].name.clone()));
    }

    let latents = order
        .iter()
        .copied()
        .filter(|&id| nodes[id].observed.is_none())
        .collect();
    Ok(Model {
        nodes,
        order,
        children,
        index,
        latents,
    })
}

impl Model {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: NodeId) -> &str {
        &self.nodes[id].name
    }

    pub fn support(&self, id: NodeId) -> Support {
        self.nodes[id].support
    }

    pub fn is_observed(&self, id: NodeId) -> bool {
        self.nodes[id].observed.is_some()
    }

    /// Latent node ids in topological order.
    pub fn latent_nodes(&self) -> &[NodeId] {
        &self.latents
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        &self.children[id]
    }

    /// Sample latent nodes from their priors in topological order, fix the
    /// observed ones, and populate every cached score.
    pub fn init_world<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<World, GraphError> {
        let mut values: Vec<Option<Arc<Value>>> = vec![None; self.nodes.len()];
        for &id in &self.order {
            let node = &self.nodes[id];
            let v = match &node.observed {
                Some(v) => v.clone(),
                None => {
                    let parents = self.parent_views_partial(&values, id);
                    let dist = node.builder.build_value(&parents);
                    dist.validate()
                        .and_then(|()| dist.sample(rng))
                        .map_err(|e| GraphError::Distribution(node.name.clone(), e))?
                }
            };
            if !node.support.contains(&v) {
                return Err(GraphError::OutOfSupport(node.name.clone()));
            }
            values[id] = Some(Arc::new(v));
        }
        let values: Vec<Arc<Value>> = values.into_iter().map(Option::unwrap).collect();
        let scores = (0..self.nodes.len())
            .map(|id| self.score_with(&values, id, None))
            .collect();
        Ok(World { values, scores })
    }

    fn parent_views_partial<'a>(
        &self,
        values: &'a [Option<Arc<Value>>],
        id: NodeId,
    ) -> Vec<ValueRef<'a, f64>> {
        self.nodes[id]
            .parents
            .iter()
            .map(|&p| ValueRef::Fixed(values[p].as_ref().expect("parents precede children").as_ref()))
            .collect()
    }

    /// Log-density of node `id`'s value given its parents, optionally with
    /// one node's value overridden.
    fn score_with(
        &self,
        values: &[Arc<Value>],
        id: NodeId,
        overridden: Option<(NodeId, &Value)>,
    ) -> f64 {
        let pick = |n: NodeId| -> &Value {
            match overridden {
                Some((o, v)) if o == n => v,
                _ => values[n].as_ref(),
            }
        };
        let parents: Vec<ValueRef<'_, f64>> = self.nodes[id]
            .parents
            .iter()
            .map(|&p| ValueRef::Fixed(pick(p)))
            .collect();
        let dist = self.nodes[id].builder.build_value(&parents);
        dist.log_density(ValueRef::Fixed(pick(id)))
    }

    /// Own log-density of one node in the given world.
    pub fn node_score(&self, world: &World, id: NodeId) -> f64 {
        self.score_with(&world.values, id, None)
    }

    /// The node's distribution given its current parent values.
    pub fn node_distribution(&self, world: &World, id: NodeId) -> Distribution<f64> {
        let parents: Vec<ValueRef<'_, f64>> = self.nodes[id]
            .parents
            .iter()
            .map(|&p| ValueRef::Fixed(world.values[p].as_ref()))
            .collect();
        self.nodes[id].builder.build_value(&parents)
    }

    /// Recompute the total log-density from scratch (no caches).
    pub fn total_score_recomputed(&self, world: &World) -> f64 {
        (0..self.nodes.len())
            .map(|id| self.score_with(&world.values, id, None))
            .sum()
    }

    /// Markov-blanket log-density of `node` evaluated at a fixed candidate
    /// value (used for enumerated conditionals of discrete nodes).
    pub fn blanket_at(&self, world: &World, node: NodeId, v: &Value) -> f64 {
        let mut acc = self.score_with(&world.values, node, Some((node, v)));
        for &c in &self.children[node] {
            acc += self.score_with(&world.values, c, Some((node, v)));
        }
        acc
    }

    /// Markov-blanket log-density as a scalar function of the node's
    /// coordinate block, evaluated on plain values.
    pub fn eval_blanket(&self, world: &World, node: NodeId, active: &[f64]) -> f64 {
        self.eval_blanket_core(world, node, active, &|b, p| b.build_value(p))
    }

    /// Markov-blanket log-density evaluated on second-order duals.
    pub fn eval_blanket_dual(&self, world: &World, node: NodeId, active: &[Dual]) -> Dual {
        self.eval_blanket_core(world, node, active, &|b, p| b.build_dual(p))
    }

    /// Generic core shared by the two entry points. Simplex-supported nodes
    /// are evaluated on the constraint-extended density: the block is
    /// normalized by its sum before scoring, and derivatives are taken in
    /// all K coordinates.
    fn eval_blanket_core<S: Scalar>(
        &self,
        world: &World,
        node: NodeId,
        active: &[S],
        build: &dyn for<'x> Fn(&dyn DistributionBuilder, &[ValueRef<'x, S>]) -> Distribution<S>,
    ) -> S {
        let normalized;
        let coords: &[S] = match self.nodes[node].support {
            Support::Simplex(_) => {
                let mut total = active[0].clone();
                for v in &active[1..] {
                    total = total + v.clone();
                }
                normalized = active
                    .iter()
                    .map(|v| v.clone() / total.clone())
                    .collect::<Vec<_>>();
                &normalized
            }
            _ => active,
        };

        let own_parents: Vec<ValueRef<'_, S>> = self.nodes[node]
            .parents
            .iter()
            .map(|&p| ValueRef::Fixed(world.values[p].as_ref()))
            .collect();
        let own = build(self.nodes[node].builder.as_ref(), &own_parents);
        let mut acc = own.log_density(ValueRef::Active(coords));

        for &c in &self.children[node] {
            let parents: Vec<ValueRef<'_, S>> = self.nodes[c]
                .parents
                .iter()
                .map(|&p| {
                    if p == node {
                        ValueRef::Active(coords)
                    } else {
                        ValueRef::Fixed(world.values[p].as_ref())
                    }
                })
                .collect();
            let dist = build(self.nodes[c].builder.as_ref(), &parents);
            acc = acc + dist.log_density(ValueRef::Fixed(world.values[c].as_ref()));
        }
        acc
    }

    /// The blanket as a reusable scalar function object.
    pub fn blanket_score_fn<'a>(&'a self, world: &'a World, node: NodeId) -> Blanket<'a> {
        Blanket {
            model: self,
            world,
            node,
        }
    }

    /// Replace one node's value, rescoring only that node and its children.
    /// Returns the new world and the change in total log-density.
    pub fn apply_move(
        &self,
        world: &World,
        node: NodeId,
        new_value: Value,
    ) -> Result<(World, f64), GraphError> {
        if !self.nodes[node].support.contains(&new_value) {
            return Err(GraphError::OutOfSupport(self.nodes[node].name.clone()));
        }
        let mut values = world.values.clone();
        let mut scores = world.scores.clone();
        let mut delta = 0.0;
        values[node] = Arc::new(new_value);
        let own = self.score_with(&values, node, None);
        delta += own - scores[node];
        scores[node] = own;
        for &c in &self.children[node] {
            let s = self.score_with(&values, c, None);
            delta += s - scores[c];
            scores[c] = s;
        }
        Ok((World { values, scores }, delta))
    }
}

/// Markov-blanket log-density of one node as a function of its value.
pub struct Blanket<'a> {
    model: &'a Model,
    world: &'a World,
    node: NodeId,
}

impl Blanket<'_> {
    /// Coordinates of the node's current value.
    pub fn current(&self) -> Vec<f64> {
        self.world.value(self.node).coords()
    }

    pub fn dim(&self) -> usize {
        self.model.support(self.node).block_dim()
    }

    /// Blanket log-density at a fixed candidate value.
    pub fn value_at(&self, v: &Value) -> f64 {
        self.model.blanket_at(self.world, self.node, v)
    }

    /// Exact gradient and Hessian of the blanket at `x`.
    pub fn grad_hess(&self, x: &[f64]) -> Result<(f64, GradHess), AutodiffError> {
        match self.model.support(self.node) {
            Support::Categorical(_) | Support::NonNegativeInteger => Err(
                AutodiffError::UnsupportedPrimitive("discrete-valued node has no gradient"),
            ),
            _ => autodiff::evaluate_with_derivatives(self, x),
        }
    }
}

impl ScalarFn for Blanket<'_> {
    fn eval_f64(&self, x: &[f64]) -> f64 {
        self.model.eval_blanket(self.world, self.node, x)
    }
    fn eval_dual(&self, x: &[Dual]) -> Dual {
        self.model.eval_blanket_dual(self.world, self.node, x)
    }
}
