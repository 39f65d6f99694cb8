//! Uniform grids, sampled potentials and the design-problem parameters.

use serde::{Deserialize, Serialize};

use crate::error::{PdpError, Result};

/// Uniform grid `x_j = x_min + j h`, `j = 0..n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    x_min: f64,
    x_max: f64,
    n: usize,
    h: f64,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(PdpError::InvalidGrid(format!("need at least 3 nodes, got {n}")));
        }
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(PdpError::InvalidGrid(format!("bounds must increase: [{x_min}, {x_max}]")));
        }
        let h = (x_max - x_min) / (n - 1) as f64;
        Ok(Grid { x_min, x_max, n, h })
    }

    /// Grid on `[-half_width, half_width]`.
    pub fn symmetric(half_width: f64, n: usize) -> Result<Self> {
        Self::new(-half_width, half_width, n)
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    /// Node `j`, measured from the nearer end so that symmetric grids are
    /// mirror symmetric bit for bit.
    #[inline]
    pub fn x(&self, j: usize) -> f64 {
        if 2 * j < self.n - 1 {
            self.x_min + j as f64 * self.h
        } else {
            self.x_max - (self.n - 1 - j) as f64 * self.h
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.x(j)).collect()
    }

    /// Trapezoid weight of node `j`.
    #[inline]
    pub fn weight(&self, j: usize) -> f64 {
        if j == 0 || j + 1 == self.n {
            0.5 * self.h
        } else {
            self.h
        }
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.n).map(|j| self.weight(j)).collect()
    }

    /// Symmetric about the origin with a node at `x = 0`.
    pub fn is_symmetric(&self) -> bool {
        self.n % 2 == 1 && (self.x_min + self.x_max).abs() <= 1e-12 * self.x_max.abs().max(1.0)
    }

    /// Index of the node mirrored through the origin (valid on symmetric grids).
    #[inline]
    pub fn mirror(&self, j: usize) -> usize {
        self.n - 1 - j
    }

    /// Index of the node closest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let j = ((x - self.x_min) / self.h).round();
        j.clamp(0.0, (self.n - 1) as f64) as usize
    }

    /// Nodes are compatible when they coincide to a small fraction of `h`.
    pub fn same_nodes(&self, other: &Grid) -> bool {
        self.n == other.n
            && (self.x_min - other.x_min).abs() <= 1e-9 * self.h
            && (self.x_max - other.x_max).abs() <= 1e-9 * self.h
    }

    /// Trapezoid rule of sampled values.
    pub fn integrate(&self, f: &[f64]) -> f64 {
        f.iter().enumerate().map(|(j, v)| self.weight(j) * v).sum()
    }
}

/// Builds a grid, rejecting fewer than three nodes or non-increasing bounds.
pub fn make_grid(x_min: f64, x_max: f64, n: usize) -> Result<Grid> {
    Grid::new(x_min, x_max, n)
}

/// Tolerance used when deciding whether a node lies in `[-a, a]`.
fn support_slack(grid: &Grid) -> f64 {
    1e-6 * grid.h()
}

/// A potential sampled on a grid, vanishing outside `[-a, a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PotentialField {
    grid: Grid,
    values: Vec<f64>,
    support: f64,
}

impl PotentialField {
    /// Wraps sampled values; every node with `|x| > a` must hold exactly zero.
    pub fn new(grid: Grid, values: Vec<f64>, support: f64) -> Result<Self> {
        Self::check_support(&grid, support)?;
        if values.len() != grid.len() {
            return Err(PdpError::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(PdpError::InvalidParameter(format!("non-finite potential value {v}")));
        }
        let field = PotentialField { grid, values, support };
        if let Some(j) = (0..grid.len()).find(|&j| !field.in_support(j) && field.values[j] != 0.0) {
            return Err(PdpError::InvalidParameter(format!(
                "potential is nonzero at x = {} outside the support [-{support}, {support}]",
                grid.x(j)
            )));
        }
        Ok(field)
    }

    /// Samples `f` on the support and sets every other node to zero.
    pub fn from_fn(grid: Grid, support: f64, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::check_support(&grid, support)?;
        let slack = support_slack(&grid);
        let values = grid
            .nodes()
            .into_iter()
            .map(|x| if x.abs() <= support + slack { f(x) } else { 0.0 })
            .collect();
        Self::new(grid, values, support)
    }

    pub fn zero(grid: Grid, support: f64) -> Result<Self> {
        Self::from_fn(grid, support, |_| 0.0)
    }

    fn check_support(grid: &Grid, support: f64) -> Result<()> {
        if !(support > 0.0) || !support.is_finite() {
            return Err(PdpError::InvalidParameter(format!("support half-width must be positive, got {support}")));
        }
        if support >= grid.x_max() || -support <= grid.x_min() {
            return Err(PdpError::InvalidParameter(format!(
                "support [-{support}, {support}] must lie strictly inside [{}, {}]",
                grid.x_min(),
                grid.x_max()
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn support(&self) -> f64 {
        self.support
    }

    #[inline]
    pub fn in_support(&self, j: usize) -> bool {
        self.grid.x(j).abs() <= self.support + support_slack(&self.grid)
    }

    /// Indices of the nodes inside `[-a, a]`, ascending.
    pub fn support_indices(&self) -> Vec<usize> {
        (0..self.grid.len()).filter(|&j| self.in_support(j)).collect()
    }

    /// Same grid and support, new values (re-validated).
    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid, values, self.support)
    }

    /// `self + eps * direction`, with the direction masked to the support.
    pub fn perturbed(&self, direction: &[f64], eps: f64) -> Result<Self> {
        if direction.len() != self.values.len() {
            return Err(PdpError::LengthMismatch { expected: self.values.len(), got: direction.len() });
        }
        let values = (0..self.values.len())
            .map(|j| if self.in_support(j) { self.values[j] + eps * direction[j] } else { 0.0 })
            .collect();
        self.with_values(values)
    }

    /// `∫ |V| dx` by the trapezoid rule.
    pub fn l1_norm(&self) -> f64 {
        let abs: Vec<f64> = self.values.iter().map(|v| v.abs()).collect();
        self.grid.integrate(&abs)
    }

    /// Largest deviation from mirror symmetry.
    pub fn asymmetry(&self) -> f64 {
        let n = self.values.len();
        (0..n).map(|j| (self.values[j] - self.values[n - 1 - j]).abs()).fold(0.0, f64::max)
    }

    /// Bit-level content hash of the grid, support and values.
    pub fn content_hash(&self) -> u64 {
        use std::hash::{Hash, Hasher};
        let mut hasher = std::collections::hash_map::DefaultHasher::new();
        self.grid.x_min.to_bits().hash(&mut hasher);
        self.grid.x_max.to_bits().hash(&mut hasher);
        self.grid.n.hash(&mut hasher);
        self.support.to_bits().hash(&mut hasher);
        for v in &self.values {
            v.to_bits().hash(&mut hasher);
        }
        hasher.finish()
    }

    /// Linear interpolation onto another grid; nodes outside the support are zero.
    pub fn resample(&self, target: Grid) -> Result<Self> {
        if self.grid.same_nodes(&target) {
            return Self::new(target, self.values.clone(), self.support);
        }
        let src = &self.grid;
        let slack = support_slack(&target);
        let values = target
            .nodes()
            .into_iter()
            .map(|x| {
                if x.abs() > self.support + slack || x <= src.x_min() || x >= src.x_max() {
                    return 0.0;
                }
                let s = (x - src.x_min()) / src.h();
                let j = (s.floor() as usize).min(src.len() - 2);
                let frac = s - j as f64;
                if frac.abs() < 1e-9 {
                    self.values[j]
                } else if (1.0 - frac).abs() < 1e-9 {
                    self.values[j + 1]
                } else {
                    (1.0 - frac) * self.values[j] + frac * self.values[j + 1]
                }
            })
            .collect();
        Self::new(target, values, self.support)
    }
}

/// `-A sech(B x)` on `|x| <= a`, zero elsewhere.
pub fn sech_well(depth: f64, inverse_length: f64, support: f64, grid: Grid) -> Result<PotentialField> {
    if !(depth > 0.0) || !(inverse_length > 0.0) {
        return Err(PdpError::InvalidParameter(format!(
            "sech well needs A > 0 and B > 0, got A = {depth}, B = {inverse_length}"
        )));
    }
    PotentialField::from_fn(grid, support, |x| -depth / (inverse_length * x).cosh())
}

/// Indicator function of `[-c, c]`.
pub fn indicator(grid: Grid, half_width: f64) -> Result<PotentialField> {
    PotentialField::from_fn(grid, half_width, |_| 1.0)
}

/// Finite-difference derivative: centered in the interior, second-order
/// one-sided at the two ends.
pub fn derivative(values: &[f64], h: f64) -> Vec<f64> {
    let n = values.len();
    let mut d = vec![0.0; n];
    if n < 3 {
        return d;
    }
    d[0] = (-3.0 * values[0] + 4.0 * values[1] - values[2]) / (2.0 * h);
    d[n - 1] = (3.0 * values[n - 1] - 4.0 * values[n - 2] + values[n - 3]) / (2.0 * h);
    for j in 1..n - 1 {
        d[j] = (values[j + 1] - values[j - 1]) / (2.0 * h);
    }
    d
}

/// Squared `H¹` norm `∫ V² + V'² dx` (trapezoid rule, derivative from [`derivative`]).
pub fn h1_norm_sq(potential: &PotentialField) -> f64 {
    let grid = potential.grid();
    let v = potential.values();
    let dv = derivative(v, grid.h());
    let integrand: Vec<f64> = v.iter().zip(&dv).map(|(a, b)| a * a + b * b).collect();
    grid.integrate(&integrand)
}

/// Exact derivative of [`h1_norm_sq`] with respect to each nodal value,
/// returned as a Riesz field (divided by the trapezoid weights).
///
/// This is the discrete counterpart of `2 (V - V'')`.
pub fn h1_norm_sq_gradient(potential: &PotentialField) -> Vec<f64> {
    let grid = potential.grid();
    let h = grid.h();
    let v = potential.values();
    let n = v.len();
    let dv = derivative(v, h);
    // d/dV_i of sum_j w_j (V_j^2 + D_j^2) = 2 w_i V_i + 2 sum_j w_j D_j dD_j/dV_i
    let mut g: Vec<f64> = (0..n).map(|i| 2.0 * grid.weight(i) * v[i]).collect();
    let c = 1.0 / (2.0 * h);
    let mut add = |i: usize, coef: f64, j: usize| g[i] += 2.0 * grid.weight(j) * dv[j] * coef;
    add(0, -3.0 * c, 0);
    add(1, 4.0 * c, 0);
    add(2, -c, 0);
    add(n - 1, 3.0 * c, n - 1);
    add(n - 2, -4.0 * c, n - 1);
    add(n - 3, c, n - 1);
    for j in 1..n - 1 {
        add(j + 1, c, j);
        add(j - 1, -c, j);
    }
    g.iter().enumerate().map(|(i, gi)| gi / grid.weight(i)).collect()
}

/// How the forcing profile `β` is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum BetaMode {
    /// A fixed profile, independent of the design.
    Fixed(PotentialField),
    /// `β = V`.
    EqualsV,
}

/// Parameters of the relaxed admissible set and the forcing.
#[derive(Debug, Clone, PartialEq)]
pub struct DesignParams {
    /// Support half-width.
    pub a: f64,
    /// Bound on the `H¹` norm.
    pub b: f64,
    /// Forcing frequency.
    pub mu: f64,
    /// Lower bound on the squared zero-energy Wronskian.
    pub delta: f64,
    pub beta: BetaMode,
}

impl DesignParams {
    pub fn new(a: f64, b: f64, mu: f64, delta: f64, beta: BetaMode) -> Result<Self> {
        for (name, v) in [("a", a), ("b", b), ("mu", mu), ("delta", delta)] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(PdpError::InvalidParameter(format!("{name} must be positive and finite, got {v}")));
            }
        }
        Ok(DesignParams { a, b, mu, delta, beta })
    }

    /// `β = 1_[-c, c]` on the given grid.
    pub fn with_indicator_beta(a: f64, b: f64, mu: f64, delta: f64, grid: Grid, half_width: f64) -> Result<Self> {
        Self::new(a, b, mu, delta, BetaMode::Fixed(indicator(grid, half_width)?))
    }

    /// Values of `β` for the potential `v`.
    pub fn beta_values<'a>(&'a self, v: &'a PotentialField) -> Result<&'a [f64]> {
        match &self.beta {
            BetaMode::EqualsV => Ok(v.values()),
            BetaMode::Fixed(beta) => {
                if !beta.grid().same_nodes(v.grid()) {
                    return Err(PdpError::InvalidGrid("beta and V live on different grids".into()));
                }
                Ok(beta.values())
            }
        }
    }

    /// The same parameters with `β` moved onto another grid.
    pub fn on_grid(&self, grid: Grid) -> Result<Self> {
        let beta = match &self.beta {
            BetaMode::EqualsV => BetaMode::EqualsV,
            BetaMode::Fixed(b) => BetaMode::Fixed(PotentialField::from_fn(grid, b.support(), |x| {
                // indicator-style profiles are re-sampled pointwise
                let j = b.grid().nearest(x);
                b.values()[j]
            })?),
        };
        Ok(DesignParams { beta, ..self.clone() })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn grid_spacing_and_nodes() {
        let g = make_grid(-60.0, 60.0, 3001).unwrap();
        assert!((g.h() - 0.04).abs() < 1e-15);
        let g = make_grid(0.0, 1.0, 11).unwrap();
        let expected = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0];
        for (x, e) in g.nodes().iter().zip(expected) {
            assert!((x - e).abs() < 1e-15);
        }
        assert_eq!(g.x(10), 1.0);
    }

    #[test]
    fn degenerate_grids_rejected() {
        assert!(matches!(make_grid(-12.0, 12.0, 2), Err(PdpError::InvalidGrid(_))));
        assert!(matches!(make_grid(1.0, 1.0, 10), Err(PdpError::InvalidGrid(_))));
        assert!(matches!(make_grid(1.0, -1.0, 10), Err(PdpError::InvalidGrid(_))));
    }

    #[test]
    fn grid_nodes_are_reproducible() {
        let a = make_grid(-20.0, 20.0, 2001).unwrap().nodes();
        let b = make_grid(-20.0, 20.0, 2001).unwrap().nodes();
        assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn sech_well_values_and_truncation() {
        let g = Grid::symmetric(20.0, 2001).unwrap();
        let v = sech_well(1.0, 1.0, 10.0, g).unwrap();
        assert_eq!(v.values()[1000], -1.0);
        for j in 0..g.len() {
            if g.x(j).abs() > 10.0 + 1e-9 {
                assert_eq!(v.values()[j], 0.0);
            }
        }
        assert_eq!(v.asymmetry(), 0.0);
        assert!(sech_well(1.0, 1.0, 20.0, g).is_err());
    }

    #[test]
    fn sech_well_l1_norm_matches_closed_form() {
        // ∫_{-a}^{a} 2 sech(x) dx = 4 atan(sinh a) ... = 2 * 2 * gd(a)
        let g = Grid::symmetric(20.0, 4001).unwrap();
        let v = sech_well(2.0, 1.0, 10.0, g).unwrap();
        let exact = 2.0 * 2.0 * (10.0_f64.sinh()).atan();
        // truncation jump at |x| = a contributes an O(h) trapezoid error of size ~ h * 2 sech(10)
        assert!((v.l1_norm() - exact).abs() < 1e-5, "{} vs {exact}", v.l1_norm());
    }

    #[test]
    fn h1_norm_of_zero_and_sine() {
        let g = Grid::symmetric(3.0, 601).unwrap();
        let z = PotentialField::zero(g, 2.0).unwrap();
        assert_eq!(h1_norm_sq(&z), 0.0);
        let s = PotentialField::from_fn(g, 1.0, |x| (PI * x).sin()).unwrap();
        let exact = 1.0 + PI * PI;
        let approx = h1_norm_sq(&s);
        assert!((approx - exact).abs() / exact < 2e-2, "{approx} vs {exact}");
    }

    #[test]
    fn h1_norm_of_plateau_dominates_square() {
        // smooth plateau of height c on [-1, 1]
        let g = Grid::symmetric(4.0, 801).unwrap();
        let c = 0.7;
        let v = PotentialField::from_fn(g, 3.0, |x| c * (-(x / 1.5).powi(8)).exp()).unwrap();
        let plateau: f64 = g.integrate(&v.values().iter().map(|x| x * x).collect::<Vec<_>>());
        assert!(h1_norm_sq(&v) >= plateau);
        assert!(h1_norm_sq(&v) >= c * c * 2.0);
    }

    #[test]
    fn h1_norm_converges_at_second_order() {
        let f = |x: f64| (-x * x).exp() * (2.0 * x).cos();
        // exact value by dense quadrature of the analytic integrand
        let df = |x: f64| (-x * x).exp() * (-2.0 * x * (2.0 * x).cos() - 2.0 * (2.0 * x).sin());
        let m = 200_000;
        let (lo, hi) = (-6.0, 6.0);
        let hq = (hi - lo) / m as f64;
        let exact: f64 = (0..=m)
            .map(|i| {
                let x = lo + i as f64 * hq;
                let w = if i == 0 || i == m { 0.5 } else { 1.0 };
                w * hq * (f(x).powi(2) + df(x).powi(2))
            })
            .sum();
        let err = |n: usize| {
            let g = Grid::symmetric(8.0, n).unwrap();
            let v = PotentialField::from_fn(g, 6.0, f).unwrap();
            (h1_norm_sq(&v) - exact).abs()
        };
        let (e1, e2) = (err(401), err(801));
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "observed order {order}");
    }

    #[test]
    fn h1_gradient_matches_finite_differences() {
        let g = Grid::symmetric(3.0, 61).unwrap();
        let v = PotentialField::from_fn(g, 2.0, |x| (x * 1.3).sin() - 0.4 * x * x).unwrap();
        let grad = h1_norm_sq_gradient(&v);
        for &j in &[5usize, 10, 30, 49, 55] {
            if !v.in_support(j) {
                continue;
            }
            let mut e = vec![0.0; g.len()];
            e[j] = 1.0;
            let eps = 1e-6;
            let fp = h1_norm_sq(&v.perturbed(&e, eps).unwrap());
            let fm = h1_norm_sq(&v.perturbed(&e, -eps).unwrap());
            let fd = (fp - fm) / (2.0 * eps);
            let an = grad[j] * g.weight(j);
            assert!((fd - an).abs() < 1e-6 * (1.0 + fd.abs()), "node {j}: {fd} vs {an}");
        }
    }

    #[test]
    fn potential_rejects_values_outside_support() {
        let g = Grid::symmetric(5.0, 101).unwrap();
        let mut vals = vec![0.0; 101];
        vals[0] = 1.0;
        assert!(PotentialField::new(g, vals, 2.0).is_err());
    }

    #[test]
    fn design_params_validation() {
        let g = Grid::symmetric(5.0, 101).unwrap();
        assert!(DesignParams::with_indicator_beta(2.0, 10.0, 2.0, 1e-4, g, 1.0).is_ok());
        assert!(DesignParams::new(2.0, 10.0, 0.0, 1e-4, BetaMode::EqualsV).is_err());
        assert!(DesignParams::new(2.0, 10.0, 1.0, -1e-4, BetaMode::EqualsV).is_err());
    }
}
