//! Log-barrier L-BFGS minimisation of `Γ[V]` over the admissible set
//!
//! ```text
//! λ + μ > 0,   W(0)² > δ,   ‖V‖²_{H¹} < b²,   exactly one bound state,
//! ```
//!
//! with the support constraint enforced by construction (only nodes in
//! `[-a, a]` are free). Design variables are the free nodal values scaled by
//! the square root of their quadrature weight, so that Euclidean steps in the
//! design space are `L²` steps for `V`.

use std::collections::VecDeque;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PdpError, Result};
use crate::fgr::{gamma_gradient_from, gamma_with_bound_state, lambda_gradient, wronskian_gradient, FgrDiagnostics, FgrResult};
use crate::grid::{h1_norm_sq, h1_norm_sq_gradient, DesignParams, PotentialField};
use crate::spectral::{count_bound_states, solve_ground_state, wronskian_at_zero_with_tol, WRONSKIAN_VARIANCE_TOL};

/// Relative increase of `Γ` tolerated when accepting a step.
const GAMMA_SLACK: f64 = 1e-12;

/// Tuning knobs of [`optimize`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptOptions {
    /// Barrier weights, used in order.
    pub tau_schedule: Vec<f64>,
    /// Sufficient-decrease constant.
    pub armijo: f64,
    /// Step reduction factor in backtracking.
    pub backtrack: f64,
    /// Number of L-BFGS curvature pairs.
    pub memory: usize,
    /// Stage ends when the design-space gradient norm drops below this.
    pub grad_tol: f64,
    /// Budget of accepted iterations over all stages.
    pub max_iter: usize,
    /// Budget of accepted iterations per barrier stage (0: no per-stage cap).
    pub stage_iter: usize,
    /// Stage ends when the barrier value improves by less than this (relative).
    pub stage_ftol: f64,
    /// Optimise half the nodes and mirror.
    pub symmetric: bool,
    /// Largest change of any nodal value in one step.
    pub max_step: f64,
    pub max_backtracks: usize,
    pub wronskian_tol: f64,
    /// Also reject steps that raise the rate itself, so `Γ` is non-increasing
    /// within each stage. Off by default: the barrier value decreases
    /// monotonically either way, and this stalls near the margins.
    pub monotone_gamma: bool,
}

impl Default for OptOptions {
    fn default() -> Self {
        OptOptions {
            tau_schedule: (2..=8).map(|p| 10f64.powi(-p)).collect(),
            armijo: 1e-4,
            backtrack: 0.5,
            memory: 10,
            grad_tol: 1e-10,
            max_iter: 150,
            stage_iter: 10,
            stage_ftol: 0.0,
            symmetric: true,
            max_step: 0.25,
            max_backtracks: 40,
            wronskian_tol: WRONSKIAN_VARIANCE_TOL,
            monotone_gamma: false,
        }
    }
}

impl OptOptions {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(PdpError::InvalidParameter(m.to_string()));
        if self.tau_schedule.is_empty() || self.tau_schedule.iter().any(|t| !(*t > 0.0)) {
            return bad("tau_schedule must be non-empty and positive");
        }
        if !(self.armijo > 0.0 && self.armijo < 1.0) {
            return bad("armijo must lie in (0, 1)");
        }
        if !(self.backtrack > 0.0 && self.backtrack < 1.0) {
            return bad("backtrack must lie in (0, 1)");
        }
        if self.memory == 0 {
            return bad("memory must be positive");
        }
        if !(self.max_step > 0.0) || !(self.wronskian_tol > 0.0) || self.grad_tol < 0.0 {
            return bad("max_step and wronskian_tol must be positive, grad_tol non-negative");
        }
        Ok(())
    }
}

/// Constraint margins: `λ + μ`, `W(0)² - δ`, `b² - ‖V‖²_{H¹}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Margins {
    pub resonance: f64,
    pub wronskian: f64,
    pub h1: f64,
}

impl Margins {
    /// Margins of `v` given its ground-state energy and zero-energy Wronskian;
    /// negative entries mark violated constraints.
    pub fn compute(v: &PotentialField, params: &DesignParams, lambda: f64, w0: f64) -> Margins {
        Margins {
            resonance: lambda + params.mu,
            wronskian: w0 * w0 - params.delta,
            h1: params.b * params.b - h1_norm_sq(v),
        }
    }

    pub fn all_positive(&self) -> bool {
        self.resonance > 0.0 && self.wronskian > 0.0 && self.h1 > 0.0
    }

    /// Margins relative to their scales `μ`, `δ` and `b²`.
    pub fn relative(&self, params: &DesignParams) -> Margins {
        Margins {
            resonance: self.resonance / params.mu,
            wronskian: self.wronskian / params.delta,
            h1: self.h1 / (params.b * params.b),
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.resonance, self.wronskian, self.h1]
    }
}

/// The barrier subproblem at a fixed weight `τ`.
#[derive(Debug, Clone)]
pub struct BarrierProblem {
    pub params: DesignParams,
    pub tau: f64,
    pub wronskian_tol: f64,
}

/// Value (and optionally gradient) of the barrier objective at one potential.
#[derive(Debug, Clone)]
pub struct BarrierEval {
    pub value: f64,
    pub gamma: f64,
    pub margins: Margins,
    pub wronskian: f64,
    pub wronskian_variance: f64,
    pub fgr: FgrResult,
    /// Riesz field of the barrier objective, zero outside the support.
    pub gradient: Option<Vec<f64>>,
}

impl BarrierProblem {
    pub fn new(params: DesignParams, tau: f64) -> Self {
        BarrierProblem { params, tau, wronskian_tol: WRONSKIAN_VARIANCE_TOL }
    }

    /// Checks feasibility and evaluates the barrier objective.
    pub fn evaluate(&self, v: &PotentialField, with_gradient: bool) -> Result<BarrierEval> {
        let p = &self.params;
        let infeasible = |m: String| PdpError::InfeasiblePoint(m);
        let bs = solve_ground_state(v).map_err(|e| match e {
            PdpError::NoBoundState => infeasible("no bound state".into()),
            other => other,
        })?;
        let count = count_bound_states(v);
        if count != 1 {
            return Err(infeasible(format!("{count} bound states")));
        }
        let resonance = bs.lambda + p.mu;
        if !(resonance > 0.0) {
            return Err(infeasible(format!("lambda + mu = {resonance:e}")));
        }
        let w = wronskian_at_zero_with_tol(v, self.wronskian_tol);
        if !w.w0.is_finite() {
            return Err(infeasible("Wronskian overflow".into()));
        }
        if !w.valid {
            return Err(infeasible(format!("Wronskian variance {:e}", w.variance)));
        }
        let margins = Margins::compute(v, p, bs.lambda, w.w0);
        if !margins.all_positive() {
            return Err(infeasible(format!("margins {:?}", margins.as_array())));
        }
        let fgr = gamma_with_bound_state(v, p, bs)?;
        let scales = [p.mu, p.delta, p.b * p.b];
        let value = fgr.gamma + self.tau * barrier_sum(&margins.as_array(), &scales);
        if !value.is_finite() {
            return Err(PdpError::NumericalBlowup("barrier objective".into()));
        }
        let gradient = if with_gradient {
            let g_gamma = gamma_gradient_from(v, p, &fgr)?;
            let g_lambda = lambda_gradient(v, &fgr.bound_state);
            let g_w = wronskian_gradient(v, &w);
            let g_h1 = h1_norm_sq_gradient(v);
            let [c_res, c_w, c_h1] = barrier_weights(&margins.as_array(), &scales);
            let grad: Vec<f64> = (0..v.grid().len())
                .map(|j| {
                    if !v.in_support(j) {
                        return 0.0;
                    }
                    g_gamma.values[j]
                        - self.tau
                            * (c_res * g_lambda.values[j] + c_w * 2.0 * w.w0 * g_w.values[j] - c_h1 * g_h1[j])
                })
                .collect();
            if grad.iter().any(|g| !g.is_finite()) {
                return Err(infeasible("non-finite barrier gradient".into()));
            }
            Some(grad)
        } else {
            None
        };
        Ok(BarrierEval {
            value,
            gamma: fgr.gamma,
            margins,
            wronskian: w.w0,
            wronskian_variance: w.variance,
            fgr,
            gradient,
        })
    }
}

/// `Σ ln(1 + s_i/m_i)`: infinite on the constraint boundary, vanishing deep
/// inside, so large margins are not rewarded without bound.
pub fn barrier_sum(margins: &[f64; 3], scales: &[f64; 3]) -> f64 {
    margins.iter().zip(scales).map(|(m, s)| (s / m).ln_1p()).sum()
}

/// `-∂/∂m_i` of [`barrier_sum`].
fn barrier_weights(margins: &[f64; 3], scales: &[f64; 3]) -> [f64; 3] {
    std::array::from_fn(|i| {
        let (m, s) = (margins[i], scales[i]);
        s / (m * (m + s))
    })
}

/// Barrier objective value and Riesz gradient.
pub fn barrier_objective(v: &PotentialField, problem: &BarrierProblem) -> Result<(f64, Vec<f64>)> {
    let e = problem.evaluate(v, true)?;
    Ok((e.value, e.gradient.unwrap_or_default()))
}

/// Limited-memory curvature pairs `(s, y)`.
#[derive(Debug, Clone)]
pub struct LbfgsMemory {
    capacity: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

impl LbfgsMemory {
    pub fn new(capacity: usize) -> Self {
        LbfgsMemory { capacity, pairs: VecDeque::with_capacity(capacity) }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn clear(&mut self) {
        self.pairs.clear();
    }

    /// Stores the pair if it has positive curvature; returns whether it was kept.
    pub fn push(&mut self, s: Vec<f64>, y: Vec<f64>) -> bool {
        let sy = dot(&s, &y);
        if !(sy > 1e-12 * norm(&s) * norm(&y)) {
            return false;
        }
        if self.pairs.len() == self.capacity {
            self.pairs.pop_front();
        }
        self.pairs.push_back((s, y, 1.0 / sy));
        true
    }
}

/// Two-loop recursion. Falls back to steepest descent if the result is not a
/// descent direction.
pub fn lbfgs_step(memory: &LbfgsMemory, gradient: &[f64]) -> Vec<f64> {
    let mut q = gradient.to_vec();
    let mut alphas = Vec::with_capacity(memory.len());
    for (s, y, rho) in memory.pairs.iter().rev() {
        let a = rho * dot(s, &q);
        q.iter_mut().zip(y).for_each(|(qi, yi)| *qi -= a * yi);
        alphas.push(a);
    }
    if let Some((s, y, _)) = memory.pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        q.iter_mut().for_each(|qi| *qi *= gamma);
    }
    for ((s, y, rho), a) in memory.pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        q.iter_mut().zip(s).for_each(|(qi, si)| *qi += (a - b) * si);
    }
    let d: Vec<f64> = q.iter().map(|x| -x).collect();
    if dot(&d, gradient) < 0.0 && d.iter().all(|x| x.is_finite()) {
        d
    } else {
        gradient.iter().map(|x| -x).collect()
    }
}

/// Map between free nodal values of `V` and design variables.
#[derive(Debug, Clone)]
pub struct DesignMap {
    template: PotentialField,
    groups: Vec<Vec<usize>>,
    sqrt_mass: Vec<f64>,
}

impl DesignMap {
    pub fn new(template: &PotentialField, symmetric: bool) -> Result<Self> {
        let grid = template.grid();
        let support = template.support_indices();
        let groups: Vec<Vec<usize>> = if symmetric {
            if !grid.is_symmetric() {
                return Err(PdpError::InvalidGrid("symmetric optimisation needs a symmetric grid".into()));
            }
            support
                .iter()
                .filter(|&&j| j <= grid.mirror(j))
                .map(|&j| if j == grid.mirror(j) { vec![j] } else { vec![j, grid.mirror(j)] })
                .collect()
        } else {
            support.iter().map(|&j| vec![j]).collect()
        };
        let sqrt_mass = groups.iter().map(|g| g.iter().map(|&j| grid.weight(j)).sum::<f64>().sqrt()).collect();
        Ok(DesignMap { template: template.clone(), groups, sqrt_mass })
    }

    pub fn dim(&self) -> usize {
        self.groups.len()
    }

    pub fn to_vars(&self, v: &PotentialField) -> Vec<f64> {
        self.groups.iter().zip(&self.sqrt_mass).map(|(g, m)| v.values()[g[0]] * m).collect()
    }

    pub fn to_field(&self, y: &[f64]) -> Result<PotentialField> {
        let mut values = vec![0.0; self.template.grid().len()];
        for ((g, m), yi) in self.groups.iter().zip(&self.sqrt_mass).zip(y) {
            for &j in g {
                values[j] = yi / m;
            }
        }
        self.template.with_values(values)
    }

    /// Pulls a Riesz field back to a design-space gradient.
    pub fn pull_gradient(&self, field: &[f64]) -> Vec<f64> {
        let grid = self.template.grid();
        self.groups
            .iter()
            .zip(&self.sqrt_mass)
            .map(|(g, m)| g.iter().map(|&j| grid.weight(j) * field[j]).sum::<f64>() / m)
            .collect()
    }

    /// Largest change of a nodal value produced by the design step `d`.
    pub fn nodal_inf_norm(&self, d: &[f64]) -> f64 {
        d.iter().zip(&self.sqrt_mass).fold(0.0, |acc, (di, m)| acc.max((di / m).abs()))
    }
}

/// One accepted iterate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iter: usize,
    pub tau: f64,
    pub gamma: f64,
    pub barrier_value: f64,
    pub grad_norm: f64,
    pub step_length: f64,
    pub margin_resonance: f64,
    pub margin_wronskian: f64,
    pub margin_h1: f64,
    pub wronskian_variance: f64,
    pub lambda: f64,
    pub transmission_sq: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OptTrace {
    pub iterates: Vec<TraceRow>,
}

impl OptTrace {
    /// Largest increase of `Γ` between consecutive iterates of the same stage.
    pub fn max_gamma_increase(&self) -> f64 {
        self.iterates
            .windows(2)
            .filter(|w| w[0].tau == w[1].tau)
            .map(|w| w[1].gamma - w[0].gamma)
            .fold(0.0, f64::max)
    }

    /// Largest increase of the barrier value between consecutive iterates of the same stage.
    pub fn max_barrier_increase(&self) -> f64 {
        self.iterates
            .windows(2)
            .filter(|w| w[0].tau == w[1].tau)
            .map(|w| w[1].barrier_value - w[0].barrier_value)
            .fold(0.0, f64::max)
    }
}

/// Why the optimiser stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Every barrier stage finished (gradient tolerance, stalled line search or stage budget).
    ScheduleComplete,
    /// The line search failed in the last stage.
    LineSearchFailure,
    /// Iteration budget exhausted.
    MaxIterations,
}

/// How a small rate was achieved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Mechanism {
    /// Low density of states at `k`: `|t(k)|² < 10⁻²`.
    A,
    /// Near-full transmission with cancelling matrix elements: `|t(k)|² > 0.25`.
    B,
    Unclassified,
}

impl Mechanism {
    pub fn classify(transmission_sq: f64) -> Self {
        if transmission_sq < 1e-2 {
            Mechanism::A
        } else if transmission_sq > 0.25 {
            Mechanism::B
        } else {
            Mechanism::Unclassified
        }
    }
}

/// Result of [`optimize`].
#[derive(Debug, Clone)]
pub struct OptimizeOutcome {
    pub v_opt: PotentialField,
    pub trace: OptTrace,
    pub initial: FgrDiagnostics,
    pub fin: FgrDiagnostics,
    pub margins: Margins,
    pub wronskian: f64,
    pub iterations: usize,
    pub termination: Termination,
}

impl OptimizeOutcome {
    pub fn mechanism(&self) -> Mechanism {
        Mechanism::classify(self.fin.transmission_sq)
    }
}

fn line_search_errors_are_recoverable(e: &PdpError) -> bool {
    !matches!(e, PdpError::LengthMismatch { .. } | PdpError::InvalidGrid(_) | PdpError::InvalidParameter(_))
}

/// Minimises `Γ` from a strictly feasible start.
pub fn optimize(v_init: &PotentialField, params: &DesignParams, opts: &OptOptions) -> Result<OptimizeOutcome> {
    opts.validate()?;
    let map = DesignMap::new(v_init, opts.symmetric)?;
    let mut y = map.to_vars(v_init);
    let mut v = map.to_field(&y)?;
    let mut problem = BarrierProblem { params: params.clone(), tau: opts.tau_schedule[0], wronskian_tol: opts.wronskian_tol };
    let mut current = problem.evaluate(&v, true).map_err(|e| match e {
        PdpError::InfeasiblePoint(m) => PdpError::InfeasibleStart(m),
        other => other,
    })?;
    let initial = current.fgr.diagnostics();

    let mut trace = OptTrace::default();
    let mut iterations = 0;
    let mut termination = Termination::ScheduleComplete;
    let mut memory = LbfgsMemory::new(opts.memory);
    let stages = opts.tau_schedule.len();

    'stages: for (stage, &tau) in opts.tau_schedule.iter().enumerate() {
        problem.tau = tau;
        memory.clear();
        current = problem.evaluate(&v, true)?;
        let mut g = map.pull_gradient(current.gradient.as_deref().unwrap_or_default());
        let mut stage_count = 0;
        loop {
            if iterations >= opts.max_iter {
                termination = Termination::MaxIterations;
                break 'stages;
            }
            if opts.stage_iter > 0 && stage_count >= opts.stage_iter {
                break;
            }
            if norm(&g) <= opts.grad_tol {
                break;
            }
            let d = lbfgs_step(&memory, &g);
            let slope = dot(&d, &g);
            let mut alpha = 1.0_f64;
            let step_inf = map.nodal_inf_norm(&d);
            if step_inf * alpha > opts.max_step {
                alpha = opts.max_step / step_inf;
            }

            let mut accepted = None;
            for _ in 0..opts.max_backtracks {
                let y_try: Vec<f64> = y.iter().zip(&d).map(|(a, b)| a + alpha * b).collect();
                let trial = map.to_field(&y_try).and_then(|vt| problem.evaluate(&vt, false).map(|e| (vt, e)));
                match trial {
                    Ok((vt, e))
                        if e.value <= current.value + opts.armijo * alpha * slope
                            && (!opts.monotone_gamma || e.gamma <= current.gamma * (1.0 + GAMMA_SLACK)) =>
                    {
                        accepted = Some((y_try, vt));
                        break;
                    }
                    Ok(_) => {}
                    Err(e) if line_search_errors_are_recoverable(&e) => {}
                    Err(e) => return Err(e),
                }
                alpha *= opts.backtrack;
            }
            let Some((y_new, v_new)) = accepted else {
                if !memory.is_empty() {
                    memory.clear();
                    continue;
                }
                if stage + 1 == stages {
                    termination = Termination::LineSearchFailure;
                }
                break;
            };
            let next = problem.evaluate(&v_new, true)?;
            let g_new = map.pull_gradient(next.gradient.as_deref().unwrap_or_default());
            let s: Vec<f64> = y_new.iter().zip(&y).map(|(a, b)| a - b).collect();
            let dg: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
            memory.push(s, dg);
            let improvement = current.value - next.value;
            iterations += 1;
            stage_count += 1;
            trace.iterates.push(TraceRow {
                iter: iterations,
                tau,
                gamma: next.gamma,
                barrier_value: next.value,
                grad_norm: norm(&g_new),
                step_length: alpha * norm(&d),
                margin_resonance: next.margins.resonance,
                margin_wronskian: next.margins.wronskian,
                margin_h1: next.margins.h1,
                wronskian_variance: next.wronskian_variance,
                lambda: next.fgr.lambda(),
                transmission_sq: next.fgr.transmission_sq(),
            });
            y = y_new;
            v = v_new;
            g = g_new;
            let scale = current.value.abs().max(next.value.abs()).max(f64::MIN_POSITIVE);
            current = next;
            if improvement <= opts.stage_ftol * scale {
                break;
            }
        }
    }

    Ok(OptimizeOutcome {
        fin: current.fgr.diagnostics(),
        margins: current.margins,
        wronskian: current.wronskian,
        v_opt: v,
        trace,
        initial,
        iterations,
        termination,
    })
}

/// One entry of a sweep: a start, its parameters and a label.
#[derive(Debug, Clone)]
pub struct SweepEntry {
    pub label: String,
    pub v_init: PotentialField,
    pub params: DesignParams,
    pub opts: OptOptions,
}

/// A finished (or failed) design run.
#[derive(Debug, Clone)]
pub struct DesignRun {
    pub label: String,
    pub a: f64,
    pub b: f64,
    pub mu: f64,
    pub delta: f64,
    pub outcome: std::result::Result<OptimizeOutcome, PdpError>,
}

impl DesignRun {
    pub fn gamma_opt(&self) -> Option<f64> {
        self.outcome.as_ref().ok().map(|o| o.fin.gamma)
    }
}

/// Independent optimisations, run in parallel. Failures are recorded per run.
pub fn sweep(entries: &[SweepEntry]) -> Vec<DesignRun> {
    entries
        .par_iter()
        .map(|e| DesignRun {
            label: e.label.clone(),
            a: e.params.a,
            b: e.params.b,
            mu: e.params.mu,
            delta: e.params.delta,
            outcome: optimize(&e.v_init, &e.params, &e.opts),
        })
        .collect()
}
