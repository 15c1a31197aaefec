//! Priority functions: pluggable scorers that rank candidate destination
//! stacks. The relocation scheme computes a [`ScoreContext`] per candidate
//! and moves the container to the stack with the lowest score, breaking
//! ties toward the lowest stack index.

use crate::features::StackFeatures;
use crate::ga::GrhParams;
use crate::gp::ExprTree;
use crate::yard::{Bay, Container};

/// Everything a scorer may look at for one candidate destination.
pub struct ScoreContext<'a> {
    pub bay: &'a Bay,
    pub features: StackFeatures,
    /// The container being reshuffled.
    pub container: Container,
    pub origin: usize,
    pub dest: usize,
    /// Heaviest container in the episode (`W_max`).
    pub max_weight: f64,
}

/// A destination scorer; lower scores win. Implementations must be
/// read-only during scoring so scheme runs on distinct bays can proceed in
/// parallel.
pub trait PriorityFunction: Send + Sync {
    fn score(&self, ctx: &ScoreContext<'_>) -> f64;
}

/// TLP: prefer the stack with the fewest containers.
pub struct LowestStack;

impl PriorityFunction for LowestStack {
    fn score(&self, ctx: &ScoreContext<'_>) -> f64 {
        ctx.features.height
    }
}

/// RI: prefer the stack with the fewest containers that must leave before
/// the moved one (i.e. with id lower than the moved container's).
pub struct ReshuffleIndex;

impl PriorityFunction for ReshuffleIndex {
    fn score(&self, ctx: &ScoreContext<'_>) -> f64 {
        ctx.bay
            .stack(ctx.dest)
            .iter()
            .filter(|c| c.id < ctx.container.id)
            .count() as f64
    }
}

/// Weight-sensitivity exponent `1 + (W_c / W_max) * 10 * p`.
pub fn weight_exponent(container_weight: f64, max_weight: f64, p: f64) -> f64 {
    1.0 + (container_weight / max_weight) * 10.0 * p
}

/// The GRH penalty: a fixed-form weighted sum over the stack features with
/// weight-dependent exponents. Exponentiation follows the `0^0 = 1`
/// convention (the IEEE `powf` behaviour).
pub fn score_grh(
    f: &StackFeatures,
    container: Container,
    max_weight: f64,
    total_containers: u32,
    stack_count: usize,
    max_height: usize,
    p: &GrhParams,
) -> f64 {
    // Guard the degenerate all-zero-weight case so W_c / W_max stays finite.
    let w_max = if max_weight > 0.0 { max_weight } else { 1.0 };
    let w_ratio = container.weight / w_max;
    let mx_height = max_height as f64;
    let s = stack_count as f64;
    let c_total = total_containers as f64;

    let a1 = 1.0 + w_ratio * 10.0 * p.p1();
    let a3 = 1.0 + w_ratio * 10.0 * p.p3();
    let a4 = 1.0 + w_ratio * 10.0 * p.p4();

    let mut penalty = p.alpha() * (f.hoisted / mx_height).powf(a1)
        + p.beta() * (f.lowered / mx_height).powf(a1)
        + p.gamma() * (f.crossed / s).powf(a1)
        + p.theta() * (f.away_from_truck / s).powf(a4)
        + p.mu() * (f.height / mx_height);

    if f.rehandle > 0.0 {
        // rehandle == 1 guarantees c > t_s, so the delay base is positive.
        penalty += p.delta() * w_ratio.powf(10.0 * p.p1())
            + p.epsilon() * ((container.id as f64 - f.lowest_id) / c_total).powf(a3);
    } else {
        penalty += p.eta() * f.tightness;
    }
    penalty
}

/// GRH as a pluggable priority function.
pub struct GrhPriority {
    params: GrhParams,
}

impl GrhPriority {
    pub fn new(params: GrhParams) -> Self {
        GrhPriority { params }
    }

    pub fn params(&self) -> &GrhParams {
        &self.params
    }
}

impl PriorityFunction for GrhPriority {
    fn score(&self, ctx: &ScoreContext<'_>) -> f64 {
        score_grh(
            &ctx.features,
            ctx.container,
            ctx.max_weight,
            ctx.bay.id_bound(),
            ctx.bay.stack_count(),
            ctx.bay.max_height(),
            &self.params,
        )
    }
}

/// An evolved expression tree as a priority function.
pub struct TreePriority {
    tree: ExprTree,
}

impl TreePriority {
    pub fn new(tree: ExprTree) -> Self {
        TreePriority { tree }
    }

    pub fn tree(&self) -> &ExprTree {
        &self.tree
    }
}

impl PriorityFunction for TreePriority {
    fn score(&self, ctx: &ScoreContext<'_>) -> f64 {
        self.tree.eval(&ctx.features)
    }
}
