//! Nonlinear least-squares backend for the factor graph.
//!
//! Levenberg-Marquardt over AV poses, landmark positions, and line points.
//! Pose and point factors carry analytic Jacobians; the implicit-function
//! factor is differentiated numerically, re-solving the cubic fit per
//! perturbation (the coefficients are an analytic least-squares minimizer,
//! not graph state). The normal equations are assembled per factor and
//! solved by eliminating the landmark/line-point blocks first, which keeps
//! the fill-in confined to the small pose block; graphs below a variable
//! threshold fall back to a dense solve.

mod linearize;

use crate::world::{Edge, FactorGraph, NodeKind};
use linearize::{Linearizer, State};
use nalgebra::DVector;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SlamError {
    #[error("graph has no AV pose to optimize")]
    NoPoses,
    #[error("graph has no prior or first-pose anchor")]
    NoAnchor,
    #[error("cost is not finite at the initial estimate")]
    NonFiniteCost,
}

/// Parameters shared by the optimizer and the implicit-function factor.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFitParams {
    /// Planar offset distance of the auxiliary level-set lines, m.
    pub d_3l: f64,
    /// Desired gradient magnitude of the fitted surface.
    pub grad_norm_des: f64,
}

impl Default for LineFitParams {
    fn default() -> Self {
        Self {
            d_3l: 1.0,
            grad_norm_des: 5.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub max_iterations: usize,
    pub relative_cost_tolerance: f64,
    pub initial_lambda: f64,
    pub lambda_up: f64,
    pub lambda_down: f64,
    /// Step for the numeric Jacobian of the implicit-function factor, m.
    pub jacobian_step: f64,
    /// Standard deviation backing the line-consistency information (the
    /// factor's information is 1/sigma^2 times the edge weight squared).
    pub line_consistency_sigma: f64,
    pub line_fit: LineFitParams,
    /// Dense solve below this variable count, block elimination above.
    pub dense_threshold: usize,
    /// Force the dense path regardless of size (used by tests).
    pub force_dense: bool,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            max_iterations: 50,
            relative_cost_tolerance: 1e-9,
            initial_lambda: 1e-4,
            lambda_up: 10.0,
            lambda_down: 0.3,
            jacobian_step: 1e-6,
            line_consistency_sigma: 0.05,
            line_fit: LineFitParams::default(),
            dense_threshold: 200,
            force_dense: false,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizationReport {
    pub initial_cost: f64,
    pub final_cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Final cost split by factor kind.
    pub cost_by_factor: BTreeMap<String, f64>,
    /// Cost after each accepted step, starting at the initial cost.
    pub cost_trace: Vec<f64>,
    pub variables: usize,
    pub factors: usize,
    pub wall_time_s: f64,
}

/// Residual of a single edge at the graph's current estimates, in the order
/// the optimizer consumes it.
pub fn factor_error(graph: &FactorGraph, edge: &Edge, config: &OptimizerConfig) -> DVector<f64> {
    let state = State::from_graph(graph);
    linearize::residual(&state, edge, config)
}

/// Total weighted cost of the graph at its current estimates.
pub fn graph_cost(graph: &FactorGraph, config: &OptimizerConfig) -> f64 {
    let state = State::from_graph(graph);
    linearize::total_cost(&state, graph.edges(), config)
}

/// Minimize the graph's total weighted squared error in place.
pub fn optimize(
    graph: &mut FactorGraph,
    config: &OptimizerConfig,
) -> Result<OptimizationReport, SlamError> {
    let started = Instant::now();
    if !graph.nodes().any(|n| n.kind == NodeKind::Av) {
        return Err(SlamError::NoPoses);
    }
    if !graph
        .edges()
        .iter()
        .any(|e| matches!(e, Edge::Prior { .. }))
    {
        return Err(SlamError::NoAnchor);
    }

    let mut state = State::from_graph(graph);
    let linearizer = Linearizer::new(graph, config);
    let mut cost = linearize::total_cost(&state, graph.edges(), config);
    if !cost.is_finite() {
        return Err(SlamError::NonFiniteCost);
    }
    let initial_cost = cost;
    let mut trace = vec![cost];

    let mut lambda = config.initial_lambda;
    let mut iterations = 0;
    let mut converged = false;
    for _ in 0..config.max_iterations {
        iterations += 1;
        let system = linearizer.linearize(&state, graph.edges());
        let mut accepted = false;
        // retry the same linearization with increasing damping
        for _ in 0..12 {
            let Some(step) = system.solve(lambda, config) else {
                lambda *= config.lambda_up;
                continue;
            };
            let candidate = state.stepped(&linearizer, &step);
            let new_cost = linearize::total_cost(&candidate, graph.edges(), config);
            if new_cost.is_finite() && new_cost < cost {
                let relative_drop = (cost - new_cost) / cost.max(1e-300);
                state = candidate;
                cost = new_cost;
                trace.push(cost);
                lambda = (lambda * config.lambda_down).max(1e-12);
                accepted = true;
                if relative_drop < config.relative_cost_tolerance {
                    converged = true;
                }
                break;
            }
            lambda *= config.lambda_up;
        }
        if !accepted {
            // damping exhausted at this linearization point
            converged = trace.len() > 1 || cost <= initial_cost;
            break;
        }
        if converged {
            break;
        }
    }

    state.write_back(graph);
    let cost_by_factor = linearize::cost_breakdown(&state, graph.edges(), config);
    Ok(OptimizationReport {
        initial_cost,
        final_cost: cost,
        iterations,
        converged,
        cost_by_factor,
        cost_trace: trace,
        variables: linearizer.variable_count(),
        factors: graph.edges().len(),
        wall_time_s: started.elapsed().as_secs_f64(),
    })
}

pub use linearize::ordered_line_points;
