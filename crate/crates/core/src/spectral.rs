//! Linear spectral machinery for the three-point discretisation of
//! `H_V = -d²/dx² + V`.
//!
//! Scattering problems use an exact discrete radiation condition: outside the
//! support the discrete equation is solved by the lattice plane waves
//! `exp(±iκx)` with `(2 - 2 cos κh)/h² = k²`, and the ghost value beyond each
//! end of the grid is eliminated with the outgoing wave. The resulting matrix is
//! complex symmetric, so `R_V(k)ᵀ = R_V(k)`, and transmission/reflection read
//! off the exterior nodes are exact for the discrete problem.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{PdpError, Result};
use crate::grid::PotentialField;
use crate::linalg::{lowest_eigenvalue, solve_tridiagonal, sturm_count};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Exterior nodes per side used to read off `t` and `r`.
pub const EXTERIOR_SAMPLES: usize = 5;

/// Default unitarity tolerance for [`distorted_plane_waves`].
pub const UNITARITY_TOL: f64 = 1e-6;

/// Default relative tolerance on the variance of the marched Wronskian.
pub const WRONSKIAN_VARIANCE_TOL: f64 = 1e-8;

/// Ground state `(λ, ψ)` of the Dirichlet problem.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundState {
    pub lambda: f64,
    /// Normalised to one under the trapezoid rule; zero at the two end nodes.
    pub psi: Vec<f64>,
    /// Number of negative eigenvalues of the discrete operator.
    pub negative_count: usize,
}

/// Distorted plane waves `e±(·, k)` and the scattering data they carry.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringState {
    pub k: f64,
    /// Lattice wavenumber: `(2 - 2 cos κh)/h² = k²`.
    pub kappa: f64,
    pub e_plus: Vec<Complex64>,
    pub e_minus: Vec<Complex64>,
    pub t: Complex64,
    pub r: Complex64,
    /// Scattered parts, `e± = exp(±iκx) - φ±`.
    pub phi_plus: Vec<Complex64>,
    pub phi_minus: Vec<Complex64>,
}

impl ScatteringState {
    pub fn unitarity_defect(&self) -> f64 {
        (self.r.norm_sqr() + self.t.norm_sqr() - 1.0).abs()
    }
}

/// Zero-energy half-bound states and their Wronskian.
#[derive(Debug, Clone, PartialEq)]
pub struct WronskianResult {
    /// Node average of `(η+' η- - η+ η-')(1 - h² V / 4)`.
    pub w0: f64,
    /// Node variance of the same quantity.
    pub variance: f64,
    pub eta_plus: Vec<f64>,
    pub eta_minus: Vec<f64>,
    pub eta_plus_prime: Vec<f64>,
    pub eta_minus_prime: Vec<f64>,
    pub tolerance: f64,
    pub valid: bool,
}

impl WronskianResult {
    /// Turns an invalid (too variable) Wronskian into an error.
    pub fn ensure_valid(self) -> Result<Self> {
        if self.valid {
            Ok(self)
        } else {
            Err(PdpError::WronskianInvalid { variance: self.variance, tolerance: self.tolerance })
        }
    }
}

/// `|t(k)|` at one wavenumber.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TransmissionSample {
    pub k: f64,
    pub t: Complex64,
}

impl TransmissionSample {
    pub fn transmission_sq(&self) -> f64 {
        self.t.norm_sqr()
    }
}

/// Apply the three-point operator. End rows use the Dirichlet convention
/// (the values beyond the grid are taken as zero).
pub fn hamiltonian_apply(v: &PotentialField, u: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = v.grid().len();
    if u.len() != n {
        return Err(PdpError::LengthMismatch { expected: n, got: u.len() });
    }
    let inv_h2 = 1.0 / (v.grid().h() * v.grid().h());
    let vals = v.values();
    let zero = Complex64::new(0.0, 0.0);
    Ok((0..n)
        .map(|j| {
            let left = if j > 0 { u[j - 1] } else { zero };
            let right = if j + 1 < n { u[j + 1] } else { zero };
            (u[j] * 2.0 - left - right) * inv_h2 + u[j] * vals[j]
        })
        .collect())
}

/// Interior (Dirichlet) matrix: diagonal and constant off-diagonal.
fn dirichlet_matrix(v: &PotentialField) -> (Vec<f64>, Vec<f64>) {
    let h = v.grid().h();
    let inv_h2 = 1.0 / (h * h);
    let n = v.grid().len();
    let diag: Vec<f64> = v.values()[1..n - 1].iter().map(|vj| 2.0 * inv_h2 + vj).collect();
    let off = vec![-inv_h2; diag.len() - 1];
    (diag, off)
}

/// Number of negative eigenvalues of the Dirichlet operator, by Sturm count.
pub fn count_negative_eigenvalues(v: &PotentialField) -> usize {
    let (diag, off) = dirichlet_matrix(v);
    sturm_count(&diag, &off, 0.0)
}

/// Number of negative eigenvalues of the operator on the whole line, with `V`
/// extended by zero beyond the grid. Counts the nodes of the zero-energy
/// solution that is constant on the left, including the zero of its linear
/// continuation on the right. The Dirichlet count can miss shallow states
/// whose tails reach the walls; this one does not.
pub fn count_bound_states(v: &PotentialField) -> usize {
    let h2 = v.grid().h() * v.grid().h();
    let vals = v.values();
    let (mut prev, mut cur) = (1.0_f64, 1.0_f64);
    let mut nodes = 0;
    for vj in vals {
        let next = (2.0 + h2 * vj) * cur - prev;
        if next == 0.0 || cur * next < 0.0 {
            nodes += 1;
        }
        prev = cur;
        cur = next;
        let m = cur.abs().max(prev.abs());
        if m > 1e100 {
            prev /= m;
            cur /= m;
        }
    }
    if cur != 0.0 && (cur - prev) * cur < 0.0 {
        nodes += 1;
    }
    nodes
}

/// Lowest eigenpair of `H_V` with Dirichlet rows at both ends of the grid.
pub fn solve_ground_state(v: &PotentialField) -> Result<BoundState> {
    let grid = v.grid();
    let h = grid.h();
    let (diag, off) = dirichlet_matrix(v);
    let negative_count = sturm_count(&diag, &off, 0.0);
    if negative_count == 0 {
        return Err(PdpError::NoBoundState);
    }
    let lambda = lowest_eigenvalue(&diag, &off);

    // inverse iteration with a shift just below the (machine-exact) eigenvalue
    let m = diag.len();
    let shift = lambda - 1e-11 * (lambda.abs() + 1.0 / (h * h)).min(1.0);
    let mut x = vec![1.0; m];
    for _ in 0..3 {
        let shifted: Vec<f64> = diag.iter().map(|d| d - shift).collect();
        x = solve_tridiagonal(off.clone(), shifted, off.clone(), x)?;
        let norm = x.iter().map(|v| v * v).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(PdpError::SingularSystem("inverse iteration"));
        }
        x.iter_mut().for_each(|v| *v /= norm);
    }
    let imax = (0..m).max_by(|&a, &b| x[a].abs().total_cmp(&x[b].abs())).unwrap_or(0);
    let sign = if x[imax] < 0.0 { -1.0 } else { 1.0 };
    let scale = sign / (h * x.iter().map(|v| v * v).sum::<f64>()).sqrt();
    let mut psi = vec![0.0; grid.len()];
    for (i, xi) in x.iter().enumerate() {
        psi[i + 1] = xi * scale;
    }
    Ok(BoundState { lambda, psi, negative_count })
}

/// Lattice wavenumber `κ` with `(2 - 2 cos κh)/h² = k²`. Requires `kh < 2`.
pub fn discrete_wavenumber(k: f64, h: f64) -> Result<f64> {
    let s = 0.5 * k * h;
    if !(k > 0.0) || s >= 1.0 {
        return Err(PdpError::InvalidParameter(format!(
            "wavenumber {k} is not resolvable on a grid with spacing {h}"
        )));
    }
    Ok(2.0 * s.asin() / h)
}

/// Pieces of the outgoing operator `A(k) = H_V - k²` with radiating end rows.
struct OutgoingMatrix {
    diag: Vec<Complex64>,
    off: Complex64,
    /// `exp(iκh)`, the ratio `u_ghost / u_end` of an outgoing wave.
    ghost: Complex64,
}

fn outgoing_matrix(v: &PotentialField, k: f64) -> Result<OutgoingMatrix> {
    let grid = v.grid();
    let h = grid.h();
    let inv_h2 = 1.0 / (h * h);
    let kappa = discrete_wavenumber(k, h)?;
    let ghost = (I * kappa * h).exp();
    let n = grid.len();
    let mut diag: Vec<Complex64> =
        v.values().iter().map(|vj| Complex64::new(2.0 * inv_h2 + vj - k * k, 0.0)).collect();
    diag[0] -= ghost * inv_h2;
    diag[n - 1] -= ghost * inv_h2;
    Ok(OutgoingMatrix { diag, off: Complex64::new(-inv_h2, 0.0), ghost })
}

impl OutgoingMatrix {
    fn solve(&self, f: Vec<Complex64>) -> Result<Vec<Complex64>> {
        let m = self.diag.len() - 1;
        solve_tridiagonal(vec![self.off; m], self.diag.clone(), vec![self.off; m], f)
    }
}

/// Solve `(H_V - k²) u = f` with outgoing radiation conditions at both ends.
///
/// `f` and `V` must vanish on the two end nodes for the radiation condition
/// to be exact.
pub fn outgoing_resolvent_solve(v: &PotentialField, k: f64, f: &[Complex64]) -> Result<Vec<Complex64>> {
    let n = v.grid().len();
    if f.len() != n {
        return Err(PdpError::LengthMismatch { expected: n, got: f.len() });
    }
    outgoing_matrix(v, k)?.solve(f.to_vec())
}

/// Solve `(H_V - λ) u = P_c f` with `⟨ψ, u⟩ = 0`, where `P_c f = f - ⟨ψ, f⟩ ψ`.
///
/// The bordered system is solved through one tridiagonal factorisation: the
/// singular `H_V - λ` is regularised on the node where `|ψ|` peaks, which
/// selects a particular solution, and the `ψ` component is then removed.
/// The same Dirichlet rows as the eigenproblem are used.
pub fn reduced_resolvent_at_eigenvalue(v: &PotentialField, bs: &BoundState, f: &[f64]) -> Result<Vec<f64>> {
    let grid = v.grid();
    let n = grid.len();
    if f.len() != n {
        return Err(PdpError::LengthMismatch { expected: n, got: f.len() });
    }
    if bs.psi.len() != n {
        return Err(PdpError::LengthMismatch { expected: n, got: bs.psi.len() });
    }
    let h = grid.h();
    let inner = |a: &[f64], b: &[f64]| -> f64 { (0..n).map(|j| grid.weight(j) * a[j] * b[j]).sum() };
    let project = |u: &[f64]| -> Vec<f64> {
        let c = inner(&bs.psi, u);
        u.iter().zip(&bs.psi).map(|(a, p)| a - c * p).collect()
    };
    let g = project(f);

    let (mut diag, off) = dirichlet_matrix(v);
    diag.iter_mut().for_each(|d| *d -= bs.lambda);
    let interior_psi = &bs.psi[1..n - 1];
    let p = (0..interior_psi.len())
        .max_by(|&a, &b| interior_psi[a].abs().total_cmp(&interior_psi[b].abs()))
        .unwrap_or(0);
    diag[p] += 1.0 / (h * h);
    let a = solve_tridiagonal(off.clone(), diag, off, g[1..n - 1].to_vec())?;
    let mut u = vec![0.0; n];
    u[1..n - 1].copy_from_slice(&a);
    Ok(project(&u))
}

/// `exp(sign · iκ x_j)` on the grid.
pub(crate) fn lattice_wave(v: &PotentialField, kappa: f64, sign: f64) -> Vec<Complex64> {
    let grid = v.grid();
    (0..grid.len()).map(|j| (I * (sign * kappa * grid.x(j))).exp()).collect()
}

fn exterior_nodes(v: &PotentialField) -> Result<(Vec<usize>, Vec<usize>)> {
    let n = v.grid().len();
    let left: Vec<usize> = (0..EXTERIOR_SAMPLES).collect();
    let right: Vec<usize> = (n - EXTERIOR_SAMPLES..n).collect();
    if left.iter().chain(&right).any(|&j| v.in_support(j)) || n <= 2 * EXTERIOR_SAMPLES {
        return Err(PdpError::InvalidGrid(format!(
            "need at least {EXTERIOR_SAMPLES} nodes outside the support on each side"
        )));
    }
    Ok((left, right))
}

/// Distorted plane waves at wavenumber `k`, built as `e± = exp(±iκx) - φ±`
/// with `(H_V - k²) φ± = V exp(±iκx)` under outgoing conditions.
pub fn distorted_plane_waves(v: &PotentialField, k: f64) -> Result<ScatteringState> {
    distorted_plane_waves_with_tol(v, k, UNITARITY_TOL)
}

pub fn distorted_plane_waves_with_tol(v: &PotentialField, k: f64, unitarity_tol: f64) -> Result<ScatteringState> {
    let (left, right) = exterior_nodes(v)?;
    let grid = v.grid();
    let kappa = discrete_wavenumber(k, grid.h())?;
    let op = outgoing_matrix(v, k)?;
    let vals = v.values();

    let p_plus = lattice_wave(v, kappa, 1.0);
    let p_minus = lattice_wave(v, kappa, -1.0);
    let phi_plus = op.solve(p_plus.iter().zip(vals).map(|(p, vj)| p * vj).collect())?;
    let phi_minus = op.solve(p_minus.iter().zip(vals).map(|(p, vj)| p * vj).collect())?;
    let e_plus: Vec<Complex64> = p_plus.iter().zip(&phi_plus).map(|(p, f)| p - f).collect();
    let e_minus: Vec<Complex64> = p_minus.iter().zip(&phi_minus).map(|(p, f)| p - f).collect();

    // e+ = t exp(iκx) to the right, exp(iκx) + r exp(-iκx) to the left
    let samples = EXTERIOR_SAMPLES as f64;
    let t = right.iter().map(|&j| e_plus[j] * p_minus[j]).sum::<Complex64>() / samples;
    let r = left.iter().map(|&j| (e_plus[j] - p_plus[j]) * p_plus[j]).sum::<Complex64>() / samples;

    let state = ScatteringState { k, kappa, e_plus, e_minus, t, r, phi_plus, phi_minus };
    let defect = state.unitarity_defect();
    if !(defect <= unitarity_tol) {
        return Err(PdpError::UnitarityViolation(defect));
    }
    let _ = op.ghost;
    Ok(state)
}

/// `t_V(k)` for each wavenumber (evaluated in parallel).
pub fn transmission_sweep(v: &PotentialField, ks: &[f64]) -> Result<Vec<TransmissionSample>> {
    ks.par_iter()
        .map(|&k| distorted_plane_waves(v, k).map(|s| TransmissionSample { k, t: s.t }))
        .collect()
}

/// Jost solutions obtained by marching the three-term recurrence inward from
/// the two ends, plus the transmission coefficient from their discrete
/// Wronskian. Independent of the tridiagonal solves used elsewhere.
#[derive(Debug, Clone)]
pub struct JostPair {
    pub k: f64,
    pub kappa: f64,
    /// `≈ exp(iκx)` to the right of the support.
    pub f_plus: Vec<Complex64>,
    /// `≈ exp(-iκx)` to the left of the support.
    pub f_minus: Vec<Complex64>,
    pub t: Complex64,
}

pub fn jost_solutions(v: &PotentialField, k: f64) -> Result<JostPair> {
    let grid = v.grid();
    let h = grid.h();
    let n = grid.len();
    let kappa = discrete_wavenumber(k, h)?;
    let vals = v.values();
    let coef = |j: usize| Complex64::new(2.0 + h * h * (vals[j] - k * k), 0.0);

    let mut f_plus = vec![Complex64::new(0.0, 0.0); n];
    f_plus[n - 1] = (I * kappa * grid.x(n - 1)).exp();
    let mut next = (I * kappa * (grid.x(n - 1) + h)).exp();
    for j in (1..n).rev() {
        let prev = coef(j) * f_plus[j] - next;
        next = f_plus[j];
        f_plus[j - 1] = prev;
    }

    let mut f_minus = vec![Complex64::new(0.0, 0.0); n];
    f_minus[0] = (-I * kappa * grid.x(0)).exp();
    let mut before = (-I * kappa * (grid.x(0) - h)).exp();
    for j in 0..n - 1 {
        let after = coef(j) * f_minus[j] - before;
        before = f_minus[j];
        f_minus[j + 1] = after;
    }

    // discrete Wronskian (f-_j f+_{j+1} - f-_{j+1} f+_j)/h, constant in j
    let mid = n / 2;
    let wron = (f_minus[mid] * f_plus[mid + 1] - f_minus[mid + 1] * f_plus[mid]) / h;
    if wron.norm() == 0.0 || !wron.is_finite() {
        return Err(PdpError::SingularSystem("Jost Wronskian"));
    }
    let t = I * 2.0 * (kappa * h).sin() / (h * wron);
    Ok(JostPair { k, kappa, f_plus, f_minus, t })
}

/// Half-bound states `η±` and their Wronskian at zero energy.
///
/// `η+` starts from `(η, η') = (1, 0)` at the right end and `η-` from the
/// left end; both are marched with the trapezoidal (Crank–Nicolson) rule on
/// the first-order system `(η, η')' = (η', V η)`.
pub fn wronskian_at_zero(v: &PotentialField) -> WronskianResult {
    wronskian_at_zero_with_tol(v, WRONSKIAN_VARIANCE_TOL)
}

pub fn wronskian_at_zero_with_tol(v: &PotentialField, tolerance: f64) -> WronskianResult {
    let grid = v.grid();
    let n = grid.len();
    let hh = 0.5 * grid.h();
    let vals = v.values();

    // one trapezoidal step between nodes `from` and `to`; `s` is the signed half step
    let step = |y: (f64, f64), from: usize, to: usize, s: f64| -> (f64, f64) {
        // (I - s M_to) y_to = (I + s M_from) y_from,  M = [[0, 1], [V, 0]]
        let r0 = y.0 + s * y.1;
        let r1 = s * vals[from] * y.0 + y.1;
        let (a, b, c, d) = (1.0, -s, -s * vals[to], 1.0);
        let det = a * d - b * c;
        ((d * r0 - b * r1) / det, (a * r1 - c * r0) / det)
    };

    let mut eta_plus = vec![0.0; n];
    let mut eta_plus_prime = vec![0.0; n];
    let mut y = (1.0, 0.0);
    eta_plus[n - 1] = y.0;
    eta_plus_prime[n - 1] = y.1;
    for j in (0..n - 1).rev() {
        y = step(y, j + 1, j, -hh);
        eta_plus[j] = y.0;
        eta_plus_prime[j] = y.1;
    }

    let mut eta_minus = vec![0.0; n];
    let mut eta_minus_prime = vec![0.0; n];
    let mut y = (1.0, 0.0);
    eta_minus[0] = y.0;
    eta_minus_prime[0] = y.1;
    for j in 0..n - 1 {
        y = step(y, j, j + 1, hh);
        eta_minus[j + 1] = y.0;
        eta_minus_prime[j + 1] = y.1;
    }

    // Wron(f, g) = f'g - fg'. The trapezoidal march conserves
    // W_j (1 - h² V_j / 4) exactly; that product is the reported Wronskian.
    let w: Vec<f64> = (0..n)
        .map(|j| {
            (eta_plus_prime[j] * eta_minus[j] - eta_plus[j] * eta_minus_prime[j]) * (1.0 - hh * hh * vals[j])
        })
        .collect();
    let w0 = w.iter().sum::<f64>() / n as f64;
    let variance = w.iter().map(|x| (x - w0).powi(2)).sum::<f64>() / n as f64;
    let valid = variance.is_finite() && variance <= tolerance * (1.0 + w0 * w0);
    WronskianResult { w0, variance, eta_plus, eta_minus, eta_plus_prime, eta_minus_prime, tolerance, valid }
}
