//! Log-radial grid, field container and discrete Mellin-Sobolev norms.
//!
//! The collar `x ∈ [x_min, 1]` is parametrised by `t = −ln x ∈ [0, t_max]`,
//! so `dx/x = dt` and `x∂_x = −∂_t`. Node `0` is the outer boundary `x = 1`,
//! node `N` sits next to the tip.

use serde::Serialize;

use crate::cross_section::CrossSection;
use crate::error::{Error, Result};

#[derive(Clone, Debug)]
pub struct ConeGrid {
    pub t_max: f64,
    pub dt: f64,
    cs: CrossSection,
    t: Vec<f64>,
    omega: Vec<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct GridMeta {
    pub n: usize,
    pub t_max: f64,
    pub dt: f64,
    pub num_nodes: usize,
    pub num_modes: usize,
}

impl ConeGrid {
    /// Uniform nodes on `[0, t_max]`; `dt` is adjusted so that it divides
    /// `t_max`.
    pub fn new(t_max: f64, dt: f64, cs: CrossSection) -> Result<Self> {
        if !(t_max > 0.0 && t_max.is_finite()) {
            return Err(Error::InvalidInput(format!("t_max must be positive, got {t_max}")));
        }
        if !(dt > 0.0 && dt < t_max) {
            return Err(Error::InvalidInput(format!("grid spacing must lie in (0, t_max), got {dt}")));
        }
        let intervals = (t_max / dt).round().max(2.0) as usize;
        let dt = t_max / intervals as f64;
        let t: Vec<f64> = (0..=intervals).map(|i| i as f64 * dt).collect();
        let omega = t.iter().map(|ti| cutoff((-ti).exp())).collect();
        Ok(ConeGrid { t_max, dt, cs, t, omega })
    }

    pub fn cross_section(&self) -> &CrossSection {
        &self.cs
    }

    pub fn n(&self) -> usize {
        self.cs.n()
    }

    pub fn num_nodes(&self) -> usize {
        self.t.len()
    }

    pub fn num_modes(&self) -> usize {
        self.cs.num_modes()
    }

    pub fn t_nodes(&self) -> &[f64] {
        &self.t
    }

    pub fn x(&self, i: usize) -> f64 {
        (-self.t[i]).exp()
    }

    pub fn omega(&self) -> &[f64] {
        &self.omega
    }

    pub fn meta(&self) -> GridMeta {
        GridMeta {
            n: self.n(),
            t_max: self.t_max,
            dt: self.dt,
            num_nodes: self.num_nodes(),
            num_modes: self.num_modes(),
        }
    }

    pub fn same_shape(&self, other: &ConeGrid) -> bool {
        self.num_nodes() == other.num_nodes()
            && self.num_modes() == other.num_modes()
            && (self.dt - other.dt).abs() <= 1e-14 * self.dt
    }
}

/// Smooth cutoff: `1` on `x ≤ 1/2`, `0` on `x ≥ 3/4`.
pub fn cutoff(x: f64) -> f64 {
    if x <= 0.5 {
        return 1.0;
    }
    if x >= 0.75 {
        return 0.0;
    }
    let r = (x - 0.5) / 0.25;
    let phi = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let a = phi(1.0 - r);
    a / (a + phi(r))
}

/// Mode coefficients `u[m][i]` on the grid.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FieldState {
    pub coeffs: Vec<Vec<f64>>,
    pub time: f64,
    pub gamma: f64,
    pub p: f64,
    pub n: usize,
}

impl FieldState {
    pub fn zeros(grid: &ConeGrid, gamma: f64, p: f64) -> Self {
        FieldState {
            coeffs: vec![vec![0.0; grid.num_nodes()]; grid.num_modes()],
            time: 0.0,
            gamma,
            p,
            n: grid.n(),
        }
    }

    /// Field whose mode `m` at node `i` equals `f(m, t_i)`.
    pub fn from_fn(grid: &ConeGrid, gamma: f64, p: f64, f: impl Fn(usize, f64) -> f64) -> Self {
        let mut u = Self::zeros(grid, gamma, p);
        for (m, row) in u.coeffs.iter_mut().enumerate() {
            for (v, t) in row.iter_mut().zip(grid.t_nodes()) {
                *v = f(m, *t);
            }
        }
        u
    }

    /// The spatially constant function `c` (mode 0 carries `c·√|∂B|`).
    pub fn constant(grid: &ConeGrid, gamma: f64, p: f64, c: f64) -> Result<Self> {
        let scale = grid.cross_section().measure()?.sqrt();
        Ok(Self::from_fn(grid, gamma, p, |m, _| if m == 0 { c * scale } else { 0.0 }))
    }

    pub fn num_modes(&self) -> usize {
        self.coeffs.len()
    }

    pub fn num_nodes(&self) -> usize {
        self.coeffs.first().map_or(0, |r| r.len())
    }

    pub fn check_grid(&self, grid: &ConeGrid) -> Result<()> {
        if self.num_modes() != grid.num_modes() || self.num_nodes() != grid.num_nodes() {
            return Err(Error::GridMismatch(format!(
                "field is {}x{}, grid is {}x{}",
                self.num_modes(),
                self.num_nodes(),
                grid.num_modes(),
                grid.num_nodes()
            )));
        }
        Ok(())
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().flatten().all(|v| v.is_finite())
    }

    pub fn scaled(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.coeffs.iter_mut().flatten().for_each(|v| *v *= c);
        out
    }

    /// `self + c·other`.
    pub fn axpy(&self, c: f64, other: &FieldState) -> Self {
        let mut out = self.clone();
        for (a, b) in out.coeffs.iter_mut().flatten().zip(other.coeffs.iter().flatten()) {
            *a += c * b;
        }
        out
    }

    /// Euclidean norm of all coefficients.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().flatten().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn max_abs_diff(&self, other: &FieldState) -> f64 {
        self.coeffs
            .iter()
            .flatten()
            .zip(other.coeffs.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// First derivative in `t`: central differences inside, second-order
/// one-sided stencils at both ends.
pub fn diff_t(v: &[f64], dt: f64) -> Vec<f64> {
    let n = v.len();
    let mut out = vec![0.0; n];
    if n < 3 {
        if n == 2 {
            let d = (v[1] - v[0]) / dt;
            out[0] = d;
            out[1] = d;
        }
        return out;
    }
    out[0] = (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * dt);
    for i in 1..n - 1 {
        out[i] = (v[i + 1] - v[i - 1]) / (2.0 * dt);
    }
    out[n - 1] = (3.0 * v[n - 1] - 4.0 * v[n - 2] + v[n - 3]) / (2.0 * dt);
    out
}

/// Composite Simpson weights on `len` uniform nodes, closing with the 3/8
/// rule when the interval count is odd.
pub fn simpson_weights(len: usize, h: f64) -> Vec<f64> {
    let mut w = vec![0.0; len];
    if len < 2 {
        return w;
    }
    let intervals = len - 1;
    if intervals == 1 {
        w[0] = h / 2.0;
        w[1] = h / 2.0;
        return w;
    }
    let simpson_end = if intervals % 2 == 0 { intervals } else { intervals - 3 };
    for k in (0..simpson_end).step_by(2) {
        w[k] += h / 3.0;
        w[k + 1] += 4.0 * h / 3.0;
        w[k + 2] += h / 3.0;
    }
    if simpson_end < intervals {
        let k = simpson_end;
        w[k] += 3.0 * h / 8.0;
        w[k + 1] += 9.0 * h / 8.0;
        w[k + 2] += 9.0 * h / 8.0;
        w[k + 3] += 3.0 * h / 8.0;
    }
    w
}

/// `L^p` norm of a field given by per-mode radial profiles `prof[m][i]`
/// against the radial weights `w` (times the cross-section measure).
fn lp_norm(prof: &[Vec<f64>], w: &[f64], p: f64, grid: &ConeGrid) -> Result<f64> {
    if (p - 2.0).abs() < 1e-15 {
        // Parseval on the cross-section
        let mut acc = 0.0;
        for row in prof {
            for (v, wi) in row.iter().zip(w) {
                acc += wi * v * v;
            }
        }
        return Ok(acc.sqrt());
    }
    let cs = grid.cross_section();
    let q = cs.quadrature()?;
    let modes: Vec<Vec<f64>> = (0..prof.len())
        .map(|m| q.nodes.iter().map(|y| cs.eval_mode(m, *y)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let mut acc = 0.0;
    for (i, wi) in w.iter().enumerate() {
        if *wi == 0.0 {
            continue;
        }
        for (qi, qw) in q.weights.iter().enumerate() {
            let v: f64 = prof.iter().zip(&modes).map(|(row, e)| row[i] * e[qi]).sum();
            acc += wi * qw * v.abs().powf(p);
        }
    }
    Ok(acc.powf(1.0 / p))
}

/// Discrete `H^{k,γ}_p` norm: weighted `x∂_x`/tangential derivatives of
/// `ωu` over the collar plus the `H^k_p` norm of `(1−ω)u` on `x ∈ [1/2, 1]`.
/// Tangential derivatives of order `s` act as `(−λ)^{s/2}` on each mode.
pub fn mellin_norm(u: &FieldState, k: usize, gamma: f64, p: f64, grid: &ConeGrid) -> Result<f64> {
    if k > 4 {
        return Err(Error::NormOrder(k));
    }
    if !(p >= 1.0) {
        return Err(Error::InvalidInput(format!("p must be at least 1, got {p}")));
    }
    u.check_grid(grid)?;
    let n = grid.n() as f64;
    let lambda = grid.cross_section().mode_eigenvalues();
    let omega = grid.omega();
    let t = grid.t_nodes();
    let nodes = grid.num_nodes();

    // inner: weight e^{−((n+1)/2−γ)t} in L^p(dt dy)
    let w_simpson = simpson_weights(nodes, grid.dt);
    let decay = (n + 1.0) / 2.0 - gamma;
    let w_inner: Vec<f64> = t
        .iter()
        .zip(&w_simpson)
        .map(|(ti, wi)| wi * (-p * decay * ti).exp())
        .collect();
    let cut: Vec<Vec<f64>> = u
        .coeffs
        .iter()
        .map(|row| row.iter().zip(omega).map(|(v, o)| v * o).collect())
        .collect();
    let mut total = 0.0;
    let mut radial = cut.clone();
    for jr in 0..=k {
        for s in 0..=(k - jr) {
            let prof: Vec<Vec<f64>> = radial
                .iter()
                .zip(&lambda)
                .map(|(row, l)| {
                    let f = (-l).max(0.0).powf(s as f64 / 2.0);
                    row.iter().map(|v| v * f).collect()
                })
                .collect();
            total += lp_norm(&prof, &w_inner, p, grid)?;
        }
        // x∂_x = −∂_t
        radial = radial.iter().map(|row| diff_t(row, grid.dt).iter().map(|d| -d).collect()).collect();
    }

    // outer: x ∈ [1/2, 1], measure x^n dx = e^{−(n+1)t} dt
    let outer_nodes = t.iter().take_while(|ti| **ti <= std::f64::consts::LN_2 + 1e-12).count();
    if outer_nodes >= 3 {
        let w_out_base = simpson_weights(outer_nodes, grid.dt);
        let w_outer: Vec<f64> = t[..outer_nodes]
            .iter()
            .zip(&w_out_base)
            .map(|(ti, wi)| wi * (-(n + 1.0) * ti).exp())
            .collect();
        let mut radial: Vec<Vec<f64>> = u
            .coeffs
            .iter()
            .map(|row| row[..outer_nodes].iter().zip(omega).map(|(v, o)| v * (1.0 - o)).collect())
            .collect();
        for r in 0..=k {
            for s in 0..=(k - r) {
                let prof: Vec<Vec<f64>> = radial
                    .iter()
                    .zip(&lambda)
                    .map(|(row, l)| {
                        let f = (-l).max(0.0).powf(s as f64 / 2.0);
                        row.iter().map(|v| v * f).collect()
                    })
                    .collect();
                total += lp_norm(&prof, &w_outer, p, grid)?;
            }
            // ∂_x = −e^{t}∂_t
            radial = radial
                .iter()
                .map(|row| {
                    diff_t(row, grid.dt)
                        .iter()
                        .zip(t)
                        .map(|(d, ti)| -ti.exp() * d)
                        .collect()
                })
                .collect();
        }
    }
    Ok(total)
}

/// `x^a log^l x ⊗ e` near the tip lies in `H^{s,γ}_p` iff `a > γ − (n+1)/2`.
pub fn membership_test(a: f64, _log_power: u32, gamma: f64, _p: f64, n: usize) -> bool {
    a > gamma - (n as f64 + 1.0) / 2.0
}

/// `max |u(x,y)| x^{(n+1)/2−γ} / ‖u‖_{H^{⌈s⌉,γ}_p}` over the grid and the
/// cross-section quadrature.
pub fn pointwise_bound_check(u: &FieldState, s: f64, gamma: f64, grid: &ConeGrid) -> Result<f64> {
    let n = grid.n() as f64;
    if !(s > (n + 1.0) / u.p) {
        return Err(Error::InvalidInput(format!(
            "smoothness s = {s} must exceed (n+1)/p = {}",
            (n + 1.0) / u.p
        )));
    }
    let k = s.ceil() as usize;
    let norm = mellin_norm(u, k, gamma, u.p, grid)?;
    if norm == 0.0 {
        return Err(Error::ZeroNorm);
    }
    let cs = grid.cross_section();
    let q = cs.quadrature()?;
    let modes: Vec<Vec<f64>> = (0..u.num_modes())
        .map(|m| q.nodes.iter().map(|y| cs.eval_mode(m, *y)).collect::<Result<_>>())
        .collect::<Result<_>>()?;
    let decay = (n + 1.0) / 2.0 - gamma;
    let mut best = 0.0f64;
    for (i, ti) in grid.t_nodes().iter().enumerate() {
        let w = (-decay * ti).exp();
        for qi in 0..q.len() {
            let v: f64 = u.coeffs.iter().zip(&modes).map(|(row, e)| row[i] * e[qi]).sum();
            best = best.max(v.abs() * w);
        }
    }
    Ok(best / norm)
}
