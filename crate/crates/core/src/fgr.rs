//! The Fermi golden rule rate
//!
//! ```text
//! Γ[V] = (1/16k) Σ± |⟨βψ, e±(·, k)⟩|²,   k = √(λ + μ),
//! ```
//!
//! and the functional gradients of `Γ`, `λ`, `k` and the zero-energy
//! Wronskian. Gradients are the exact derivatives of the discrete quantities,
//! returned as Riesz fields: `dF = Σ_j w_j g_j δV_j` with trapezoid weights.

use std::sync::Mutex;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{PdpError, Result};
use crate::grid::{BetaMode, DesignParams, Grid, PotentialField};
use crate::spectral::{
    discrete_wavenumber, distorted_plane_waves, jost_solutions, reduced_resolvent_at_eigenvalue,
    outgoing_resolvent_solve, solve_ground_state, wronskian_at_zero, BoundState, ScatteringState, WronskianResult,
};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// One evaluation of `Γ[V]` with everything needed for its gradient.
#[derive(Debug, Clone)]
pub struct FgrResult {
    pub gamma: f64,
    pub k_res: f64,
    /// `⟨βψ, e+⟩`
    pub m_plus: Complex64,
    /// `⟨βψ, e-⟩`
    pub m_minus: Complex64,
    pub bound_state: BoundState,
    pub scattering: ScatteringState,
}

/// Summary numbers of an evaluation, for manifests.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FgrDiagnostics {
    pub gamma: f64,
    pub k_res: f64,
    pub lambda: f64,
    pub transmission_sq: f64,
    pub m_plus_sq: f64,
    pub m_minus_sq: f64,
}

impl FgrResult {
    pub fn lambda(&self) -> f64 {
        self.bound_state.lambda
    }

    pub fn transmission_sq(&self) -> f64 {
        self.scattering.t.norm_sqr()
    }

    pub fn diagnostics(&self) -> FgrDiagnostics {
        FgrDiagnostics {
            gamma: self.gamma,
            k_res: self.k_res,
            lambda: self.lambda(),
            transmission_sq: self.transmission_sq(),
            m_plus_sq: self.m_plus.norm_sqr(),
            m_minus_sq: self.m_minus.norm_sqr(),
        }
    }
}

/// A functional gradient on the grid, zero outside the support.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientField {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GradientField {
    fn masked(v: &PotentialField, mut values: Vec<f64>) -> Self {
        for (j, g) in values.iter_mut().enumerate() {
            if !v.in_support(j) {
                *g = 0.0;
            }
        }
        GradientField { grid: *v.grid(), values }
    }

    /// Directional derivative `Σ w_j g_j d_j`.
    pub fn apply(&self, direction: &[f64]) -> f64 {
        (0..self.values.len()).map(|j| self.grid.weight(j) * self.values[j] * direction[j]).sum()
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.values.iter_mut().for_each(|g| *g *= s);
        self
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, g| m.max(g.abs()))
    }

    pub fn asymmetry(&self) -> f64 {
        let n = self.values.len();
        (0..n).map(|j| (self.values[j] - self.values[n - 1 - j]).abs()).fold(0.0, f64::max)
    }
}

fn weighted_sum(grid: &Grid, f: impl Fn(usize) -> Complex64) -> Complex64 {
    (0..grid.len()).map(|j| f(j) * grid.weight(j)).sum()
}

/// `Γ[V]` for the given design parameters.
pub fn gamma(v: &PotentialField, params: &DesignParams) -> Result<FgrResult> {
    let bound_state = solve_ground_state(v)?;
    gamma_with_bound_state(v, params, bound_state)
}

pub fn gamma_with_bound_state(v: &PotentialField, params: &DesignParams, bound_state: BoundState) -> Result<FgrResult> {
    let shifted = bound_state.lambda + params.mu;
    if !(shifted > 0.0) {
        return Err(PdpError::ResonanceBelowCutoff(shifted));
    }
    let k_res = shifted.sqrt();
    let scattering = distorted_plane_waves(v, k_res)?;
    let beta = params.beta_values(v)?;
    let grid = v.grid();
    let psi = &bound_state.psi;
    let m_plus = weighted_sum(grid, |j| scattering.e_plus[j] * (beta[j] * psi[j]));
    let m_minus = weighted_sum(grid, |j| scattering.e_minus[j] * (beta[j] * psi[j]));
    let gamma = (m_plus.norm_sqr() + m_minus.norm_sqr()) / (16.0 * k_res);
    Ok(FgrResult { gamma, k_res, m_plus, m_minus, bound_state, scattering })
}

/// `Γ` assembled from the Jost solutions, `(|t|²/16k) Σ± |⟨βψ, f±⟩|²`.
///
/// The Jost solutions come from marching the recurrence, independently of the
/// tridiagonal solves behind [`gamma`].
pub fn gamma_jost_form(v: &PotentialField, params: &DesignParams) -> Result<f64> {
    let bs = solve_ground_state(v)?;
    let shifted = bs.lambda + params.mu;
    if !(shifted > 0.0) {
        return Err(PdpError::ResonanceBelowCutoff(shifted));
    }
    let k = shifted.sqrt();
    let jost = jost_solutions(v, k)?;
    let beta = params.beta_values(v)?;
    let grid = v.grid();
    let a_plus = weighted_sum(grid, |j| jost.f_plus[j] * (beta[j] * bs.psi[j]));
    let a_minus = weighted_sum(grid, |j| jost.f_minus[j] * (beta[j] * bs.psi[j]));
    Ok(jost.t.norm_sqr() / (16.0 * k) * (a_plus.norm_sqr() + a_minus.norm_sqr()))
}

/// `δλ/δV = ψ²`.
pub fn lambda_gradient(v: &PotentialField, bs: &BoundState) -> GradientField {
    GradientField::masked(v, bs.psi.iter().map(|p| p * p).collect())
}

/// `δk/δV = ψ²/(2k)` with `k = √(λ + μ)`.
pub fn k_gradient(v: &PotentialField, bs: &BoundState, k_res: f64) -> GradientField {
    GradientField::masked(v, bs.psi.iter().map(|p| p * p / (2.0 * k_res)).collect())
}

/// `δΓ/δV`, evaluating `Γ` first.
pub fn gamma_gradient(v: &PotentialField, params: &DesignParams) -> Result<GradientField> {
    let result = gamma(v, params)?;
    gamma_gradient_from(v, params, &result)
}

/// `δΓ/δV` reusing an evaluation of `Γ` at the same potential.
///
/// Four contributions: the variation of `ψ` (through the reduced resolvent at
/// `λ`), the variation of `e±` at fixed `k` (through one outgoing solve with
/// `βψ` as source, the operator being complex symmetric), the drift of `k`
/// inside `e±` and in the `1/16k` prefactor, and for `β = V` the explicit
/// dependence of the source.
pub fn gamma_gradient_from(v: &PotentialField, params: &DesignParams, res: &FgrResult) -> Result<GradientField> {
    let grid = v.grid();
    let n = grid.len();
    let h = grid.h();
    let k = res.k_res;
    let beta = params.beta_values(v)?;
    let psi = &res.bound_state.psi;
    let s = &res.scattering;
    let channels = [(res.m_plus, &s.e_plus), (res.m_minus, &s.e_minus)];
    let pref = 1.0 / (8.0 * k);

    // variation of ψ
    let g_field: Vec<f64> = (0..n)
        .map(|j| channels.iter().map(|(m, e)| (m.conj() * e[j]).re).sum::<f64>() * beta[j])
        .collect();
    let r_g = reduced_resolvent_at_eigenvalue(v, &res.bound_state, &g_field)?;

    // variation of e± at fixed k: δm = -h Σ z_j e_j δV_j with z = A⁻¹[βψ]
    let source: Vec<Complex64> = (0..n).map(|j| Complex64::new(beta[j] * psi[j], 0.0)).collect();
    let z = outgoing_resolvent_solve(v, k, &source)?;

    // k-sensitivity of e±: δm = Q δk with Q = h Σ z (∂_k s - ∂_k A e)
    let kappa = s.kappa;
    let dkappa = h * k / (kappa * h).sin();
    let inv_h2 = 1.0 / (h * h);
    let ghost = (I * kappa * h).exp();
    let x0 = grid.x(0);
    let xn = grid.x(n - 1);
    let ds_plus = I * dkappa * inv_h2
        * ((x0 - h) * (I * kappa * (x0 - h)).exp() - (x0 + h) * (I * kappa * (x0 + h)).exp());
    let ds_minus = I * dkappa * inv_h2
        * (-(xn + h) * (-I * kappa * (xn + h)).exp() - (h - xn) * (I * kappa * (h - xn)).exp());
    let corner = -I * dkappa * ghost / h;
    let dk_a_e = |e: &Vec<Complex64>| -> Complex64 {
        // Σ z_j (∂_k A e)_j
        let bulk: Complex64 = (0..n).map(|j| z[j] * e[j]).sum::<Complex64>() * (-2.0 * k);
        bulk + corner * (z[0] * e[0] + z[n - 1] * e[n - 1])
    };
    let q_plus = (z[0] * ds_plus - dk_a_e(&s.e_plus)) * h;
    let q_minus = (z[n - 1] * ds_minus - dk_a_e(&s.e_minus)) * h;
    let dm_dk = (res.m_plus.conj() * q_plus + res.m_minus.conj() * q_minus).re;

    let equals_v = matches!(params.beta, BetaMode::EqualsV);
    let values: Vec<f64> = (0..n)
        .map(|j| {
            let psi_term = -psi[j] * r_g[j];
            let e_term: f64 = channels.iter().map(|(m, e)| (m.conj() * (-z[j] * e[j])).re).sum();
            let dk = psi[j] * psi[j] / (2.0 * k);
            let k_term = dm_dk * dk;
            let beta_term = if equals_v {
                psi[j] * channels.iter().map(|(m, e)| (m.conj() * e[j]).re).sum::<f64>()
            } else {
                0.0
            };
            pref * (psi_term + e_term + k_term + beta_term) - res.gamma / k * dk
        })
        .collect();
    Ok(GradientField::masked(v, values))
}

/// `δW(0)/δV` for the Wronskian reported by
/// [`wronskian_at_zero`](crate::spectral::wronskian_at_zero).
///
/// The trapezoidal march conserves `W_j (1 - h² V_j / 4)` exactly, so the
/// reported Wronskian equals its value at the right end, `-η-'(x_max)`. Its
/// derivative is obtained by one backward (adjoint) sweep through the
/// marching steps. To leading order it equals `-η+ η-`.
pub fn wronskian_gradient(v: &PotentialField, w: &WronskianResult) -> GradientField {
    let grid = v.grid();
    let n = grid.len();
    let s = 0.5 * grid.h();
    let vals = v.values();
    // (I - s M_j)^{-T} applied to a covector, M = [[0, 1], [V, 0]]
    let inv_t = |j: usize, c: (f64, f64)| -> (f64, f64) {
        // I - sM = [[1, -s], [-s V, 1]], transpose [[1, -s V], [-s, 1]]
        let det = 1.0 - s * s * vals[j];
        ((c.0 + s * vals[j] * c.1) / det, (s * c.0 + c.1) / det)
    };
    // covectors: lam[j] = ∂C/∂y_j, with C = -e2 · y_{n-1}; then
    // y_{j+1} = (I - sM_{j+1})^{-1} (I + sM_j) y_j
    let mut lam = vec![(0.0, 0.0); n];
    lam[n - 1] = (0.0, -1.0);
    let mut mu = vec![(0.0, 0.0); n]; // mu[j] = (I - sM_j)^{-T} lam[j]
    mu[n - 1] = inv_t(n - 1, lam[n - 1]);
    for j in (0..n - 1).rev() {
        let m = mu[j + 1];
        // (I + sM_j)^T m, (I + sM)^T = [[1, sV], [s, 1]]
        lam[j] = (m.0 + s * vals[j] * m.1, s * m.0 + m.1);
        mu[j] = inv_t(j, lam[j]);
    }
    let values: Vec<f64> = (0..n)
        .map(|i| {
            let y0 = w.eta_minus[i];
            // ∂/∂V_i contributes s E y_i through both neighbouring steps, E y = (0, y.0)
            let mut d = 0.0;
            if i >= 1 {
                d += mu[i].1 * s * y0;
            }
            if i + 1 < n {
                d += mu[i + 1].1 * s * y0;
            }
            d / grid.weight(i)
        })
        .collect();
    GradientField::masked(v, values)
}

/// Continuum form `-η+ η-` of the Wronskian gradient.
pub fn wronskian_gradient_continuum(v: &PotentialField, w: &WronskianResult) -> GradientField {
    GradientField::masked(v, w.eta_plus.iter().zip(&w.eta_minus).map(|(a, b)| -a * b).collect())
}

/// Remembers the most recent evaluation so that objective and gradient at the
/// same potential share the spectral solves.
#[derive(Debug, Default)]
pub struct FgrCache {
    last: Mutex<Option<(u64, FgrResult)>>,
}

impl FgrCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn gamma(&self, v: &PotentialField, params: &DesignParams) -> Result<FgrResult> {
        let key = v.content_hash();
        if let Some((k, r)) = self.last.lock().expect("cache lock").as_ref() {
            if *k == key {
                return Ok(r.clone());
            }
        }
        let r = gamma(v, params)?;
        *self.last.lock().expect("cache lock") = Some((key, r.clone()));
        Ok(r)
    }

    pub fn gamma_gradient(&self, v: &PotentialField, params: &DesignParams) -> Result<(FgrResult, GradientField)> {
        let r = self.gamma(v, params)?;
        let g = gamma_gradient_from(v, params, &r)?;
        Ok((r, g))
    }
}

/// Check that `k` is resolvable by the grid before any solve.
pub fn check_resonance(v: &PotentialField, k: f64) -> Result<f64> {
    discrete_wavenumber(k, v.grid().h())
}

/// A smooth random direction: a few Gaussian bumps of random sign, centre and
/// width inside the support, mirrored about the origin when `symmetric`.
/// Scaled to unit maximum.
pub fn random_direction<R: Rng + ?Sized>(v: &PotentialField, rng: &mut R, symmetric: bool) -> Vec<f64> {
    let grid = v.grid();
    let a = v.support();
    let bumps: Vec<(f64, f64, f64)> = (0..4)
        .map(|_| {
            let width = rng.random_range(0.3..1.5_f64).min(0.5 * a);
            let centre = rng.random_range(-(a - width)..(a - width));
            let amp = rng.random_range(-1.0..1.0);
            (centre, width, amp)
        })
        .collect();
    let mut d: Vec<f64> = (0..grid.len())
        .map(|j| {
            if !v.in_support(j) {
                return 0.0;
            }
            let x = grid.x(j);
            let f = |x: f64| bumps.iter().map(|(c, w, s)| s * (-((x - c) / w).powi(2)).exp()).sum::<f64>();
            if symmetric {
                0.5 * (f(x) + f(-x))
            } else {
                f(x)
            }
        })
        .collect();
    if symmetric {
        for j in 0..grid.len() / 2 {
            d[grid.mirror(j)] = d[j];
        }
    }
    let m = d.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    if m > 0.0 {
        d.iter_mut().for_each(|x| *x /= m);
    }
    d
}

/// `count` directions from [`random_direction`] drawn from a ChaCha8 stream.
pub fn seeded_directions(v: &PotentialField, count: usize, seed: u64, symmetric: bool) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| random_direction(v, &mut rng, symmetric)).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Functional {
    Gamma,
    Lambda,
    K,
    Wronskian,
}

impl Functional {
    pub const ALL: [Functional; 4] = [Functional::Gamma, Functional::Lambda, Functional::K, Functional::Wronskian];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckEntry {
    pub functional: Functional,
    pub direction: usize,
    pub analytic: f64,
    pub finite_difference: f64,
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub eps: f64,
    pub entries: Vec<GradCheckEntry>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self, f: Functional) -> f64 {
        self.entries.iter().filter(|e| e.functional == f).map(|e| e.rel_error).fold(0.0, f64::max)
    }

    pub fn worst(&self) -> f64 {
        self.entries.iter().map(|e| e.rel_error).fold(0.0, f64::max)
    }
}

/// Directional derivatives of `Γ`, `λ`, `k` and `W(0)` against central
/// differences with step `eps` along each direction.
pub fn gradient_check(
    v: &PotentialField,
    params: &DesignParams,
    directions: &[Vec<f64>],
    eps: f64,
) -> Result<GradCheckReport> {
    if !(eps > 0.0) {
        return Err(PdpError::InvalidParameter("finite-difference step must be positive".into()));
    }
    let values = |u: &PotentialField| -> Result<[f64; 4]> {
        let res = gamma(u, params)?;
        let w = wronskian_at_zero(u);
        Ok([res.gamma, res.lambda(), res.k_res, w.w0])
    };
    let res = gamma(v, params)?;
    let g_gamma = gamma_gradient_from(v, params, &res)?;
    let g_lambda = lambda_gradient(v, &res.bound_state);
    let g_k = k_gradient(v, &res.bound_state, res.k_res);
    let g_w = wronskian_gradient(v, &wronskian_at_zero(v));
    let fields = [&g_gamma, &g_lambda, &g_k, &g_w];

    let mut entries = Vec::with_capacity(4 * directions.len());
    for (i, d) in directions.iter().enumerate() {
        let plus = values(&v.perturbed(d, eps)?)?;
        let minus = values(&v.perturbed(d, -eps)?)?;
        for (f, functional) in Functional::ALL.into_iter().enumerate() {
            let analytic = fields[f].apply(d);
            let finite_difference = (plus[f] - minus[f]) / (2.0 * eps);
            let scale = analytic.abs().max(finite_difference.abs());
            let rel_error = if scale > 0.0 { (analytic - finite_difference).abs() / scale } else { 0.0 };
            entries.push(GradCheckEntry { functional, direction: i, analytic, finite_difference, rel_error });
        }
    }
    Ok(GradCheckReport { eps, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{indicator, sech_well};

    fn setup(n: usize, half: f64) -> (PotentialField, DesignParams) {
        let g = Grid::symmetric(half, n).unwrap();
        let v = PotentialField::from_fn(g, 8.0, |x| -1.2 / (0.9 * x).cosh() + 0.2 * (-(x - 1.0).powi(2)).exp()).unwrap();
        let p = DesignParams::with_indicator_beta(8.0, 1e3, 2.0, 1e-4, g, 2.0).unwrap();
        (v, p)
    }

    fn bump(grid: &Grid, c: f64, w: f64) -> Vec<f64> {
        grid.nodes().iter().map(|x| (-((x - c) / w).powi(2)).exp()).collect()
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs())
    }

    #[test]
    fn gradient_check_on_random_directions() {
        let (v, p) = setup(2001, 20.0);
        let dirs = seeded_directions(&v, 3, 3, true);
        assert_eq!(dirs, seeded_directions(&v, 3, 3, true));
        for d in &dirs {
            assert_eq!(d.iter().fold(0.0_f64, |m, x| m.max(x.abs())), 1.0);
            assert!((0..d.len()).all(|j| d[j] == d[v.grid().mirror(j)]));
            assert!((0..d.len()).all(|j| v.in_support(j) || d[j] == 0.0));
        }
        let report = gradient_check(&v, &p, &dirs, 1e-5).unwrap();
        assert_eq!(report.entries.len(), 12);
        assert!(report.worst() < 1e-5, "{report:?}");
    }

    #[test]
    fn zero_beta_gives_zero_rate_and_gradient() {
        let (v, _) = setup(801, 12.0);
        let beta = PotentialField::zero(*v.grid(), 2.0).unwrap();
        let p = DesignParams::new(8.0, 1e3, 2.0, 1e-4, BetaMode::Fixed(beta)).unwrap();
        let r = gamma(&v, &p).unwrap();
        assert_eq!(r.gamma, 0.0);
        assert!(gamma_gradient(&v, &p).unwrap().values.iter().all(|g| *g == 0.0));
    }

    #[test]
    fn rate_is_assembled_from_matrix_elements() {
        let (v, p) = setup(1201, 14.0);
        let r = gamma(&v, &p).unwrap();
        let expected = (r.m_plus.norm_sqr() + r.m_minus.norm_sqr()) / (16.0 * r.k_res);
        assert_eq!(r.gamma, expected);
        assert!(r.gamma > 0.0);
        assert!((r.k_res - (r.lambda() + 2.0).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn resonance_below_cutoff() {
        let g = Grid::symmetric(14.0, 1201).unwrap();
        let v = sech_well(6.0, 1.0, 8.0, g).unwrap();
        let p = DesignParams::with_indicator_beta(8.0, 1e3, 0.5, 1e-4, g, 2.0).unwrap();
        assert!(matches!(gamma(&v, &p), Err(PdpError::ResonanceBelowCutoff(_))));
    }

    #[test]
    fn jost_form_agrees() {
        let (v, p) = setup(1201, 14.0);
        let a = gamma(&v, &p).unwrap().gamma;
        let b = gamma_jost_form(&v, &p).unwrap();
        assert!(rel(a, b) < 1e-8, "{a} vs {b}");
    }

    #[test]
    fn lambda_and_k_gradients_match_finite_differences() {
        let (v, p) = setup(1001, 12.0);
        let bs = solve_ground_state(&v).unwrap();
        let dir = bump(v.grid(), 0.7, 1.5);
        let eps = 1e-5;
        let lam = |s: f64| solve_ground_state(&v.perturbed(&dir, s).unwrap()).unwrap().lambda;
        let fd = (lam(eps) - lam(-eps)) / (2.0 * eps);
        let an = lambda_gradient(&v, &bs).apply(&dir);
        assert!(rel(fd, an) < 1e-6, "{fd} vs {an}");

        let k = (bs.lambda + p.mu).sqrt();
        let kk = |s: f64| (lam(s) + p.mu).sqrt();
        let fd = (kk(eps) - kk(-eps)) / (2.0 * eps);
        assert!(rel(fd, k_gradient(&v, &bs, k).apply(&dir)) < 1e-6);
        let integral: f64 = v.grid().integrate(&lambda_gradient(&v, &bs).values);
        assert!((integral - 1.0).abs() < 1e-4);
    }

    #[test]
    fn gamma_gradient_matches_finite_differences() {
        let (v, p) = setup(1001, 12.0);
        let grad = gamma_gradient(&v, &p).unwrap();
        for (c, w) in [(0.0, 1.0), (1.5, 0.8), (-3.0, 2.0)] {
            let dir = bump(v.grid(), c, w);
            let eps = 1e-4;
            let f = |s: f64| gamma(&v.perturbed(&dir, s).unwrap(), &p).unwrap().gamma;
            let fd = (f(eps) - f(-eps)) / (2.0 * eps);
            let an = grad.apply(&dir);
            assert!(rel(fd, an) < 1e-6, "dir ({c},{w}): {fd} vs {an}");
        }
    }

    #[test]
    fn gamma_gradient_beta_equals_v_matches_finite_differences() {
        let (v, p) = setup(1001, 12.0);
        let p = DesignParams { beta: BetaMode::EqualsV, ..p };
        let grad = gamma_gradient(&v, &p).unwrap();
        let dir = bump(v.grid(), 0.5, 1.2);
        let eps = 1e-4;
        let f = |s: f64| gamma(&v.perturbed(&dir, s).unwrap(), &p).unwrap().gamma;
        let fd = (f(eps) - f(-eps)) / (2.0 * eps);
        let an = grad.apply(&dir);
        assert!(rel(fd, an) < 1e-6, "{fd} vs {an}");
    }

    #[test]
    fn symmetric_problem_gives_symmetric_gradients() {
        let g = Grid::symmetric(12.0, 1001).unwrap();
        let v = sech_well(1.1, 0.8, 8.0, g).unwrap();
        let p = DesignParams::new(8.0, 1e3, 2.0, 1e-4, BetaMode::Fixed(indicator(g, 2.0).unwrap())).unwrap();
        let grad = gamma_gradient(&v, &p).unwrap();
        assert!(grad.asymmetry() < 1e-9 * grad.max_abs());
        let w = wronskian_at_zero(&v);
        let wg = wronskian_gradient(&v, &w);
        assert!(wg.asymmetry() < 1e-9 * wg.max_abs());
    }

    #[test]
    fn wronskian_gradient_is_exact_and_close_to_continuum_form() {
        let (v, _) = setup(1001, 12.0);
        let w = wronskian_at_zero(&v);
        let grad = wronskian_gradient(&v, &w);
        let cont = wronskian_gradient_continuum(&v, &w);
        let dir = bump(v.grid(), -0.5, 1.3);
        let eps = 1e-5;
        let f = |s: f64| wronskian_at_zero(&v.perturbed(&dir, s).unwrap()).w0;
        let fd = (f(eps) - f(-eps)) / (2.0 * eps);
        assert!(rel(fd, grad.apply(&dir)) < 1e-6, "{fd} vs {}", grad.apply(&dir));
        assert!(rel(fd, cont.apply(&dir)) < 1e-2);
    }

    #[test]
    fn free_wronskian_gradient_is_minus_one() {
        let g = Grid::symmetric(10.0, 501).unwrap();
        let v = PotentialField::zero(g, 3.0).unwrap();
        let grad = wronskian_gradient(&v, &wronskian_at_zero(&v));
        for j in 0..g.len() {
            let expected = if v.in_support(j) { -1.0 } else { 0.0 };
            assert!((grad.values[j] - expected).abs() < 1e-12, "{j}: {}", grad.values[j]);
        }
    }

    #[test]
    fn cache_returns_same_result() {
        let (v, p) = setup(801, 12.0);
        let cache = FgrCache::new();
        let a = cache.gamma(&v, &p).unwrap();
        let (b, g) = cache.gamma_gradient(&v, &p).unwrap();
        assert_eq!(a.gamma, b.gamma);
        assert_eq!(g, gamma_gradient(&v, &p).unwrap());
    }
}
