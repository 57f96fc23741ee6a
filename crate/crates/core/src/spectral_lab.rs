//! Dense-matrix experiments on sectoriality, imaginary powers and the
//! perturbation estimates behind maximal regularity of `Δ̲² + c² + μ`.
//!
//! Discrete operators are made symmetric by the volume weights before any
//! spectral calculus is applied to them.

use std::f64::consts::PI;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{assemble_laplacian, radial_weights};
use crate::error::{Error, Result};
use crate::extensions::ExtensionSpec;
use crate::mellin::ConeGrid;

pub type CMatrix = DMatrix<Complex64>;

pub fn complexify(a: &DMatrix<f64>) -> CMatrix {
    a.map(|v| Complex64::new(v, 0.0))
}

/// Operator 2-norm.
pub fn spectral_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

fn shifted(a: &CMatrix, z: Complex64) -> CMatrix {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += z;
    }
    m
}

/// `‖(A + z)^{-1}‖` as the reciprocal of the smallest singular value.
pub fn resolvent_norm(a: &CMatrix, z: Complex64) -> f64 {
    let smin = shifted(a, z).svd(false, false).singular_values.min();
    if smin > 0.0 {
        1.0 / smin
    } else {
        f64::INFINITY
    }
}

pub fn resolvent(a: &CMatrix, z: Complex64) -> Result<CMatrix> {
    shifted(a, z).try_inverse().ok_or(Error::SingularSystem(0))
}

fn log_space(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    if count == 1 {
        return vec![lo];
    }
    let (a, b) = (lo.ln(), hi.ln());
    (0..count)
        .map(|k| (a + (b - a) * k as f64 / (count - 1) as f64).exp())
        .collect()
}

/// Log-radial × angular grid on the closed sector `S_θ`, plus the origin.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorSamples {
    pub radial: usize,
    pub angular: usize,
    pub r_min: f64,
    pub r_max: f64,
}

impl Default for SectorSamples {
    fn default() -> Self {
        SectorSamples {
            radial: 60,
            angular: 21,
            r_min: 1e-3,
            r_max: 1e6,
        }
    }
}

impl SectorSamples {
    pub fn points(&self, theta: f64) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0)];
        let angles: Vec<f64> = if self.angular <= 1 || theta == 0.0 {
            vec![0.0]
        } else {
            (0..self.angular)
                .map(|k| -theta + 2.0 * theta * k as f64 / (self.angular - 1) as f64)
                .collect()
        };
        for r in log_space(self.r_min, self.r_max, self.radial.max(1)) {
            for phi in &angles {
                out.push(Complex64::from_polar(r, *phi));
            }
        }
        out
    }

    pub fn len(&self, theta: f64) -> usize {
        self.points(theta).len()
    }
}

/// Fails if `−σ(A)` meets `S_θ`.
pub fn check_sector_spectrum(a: &DMatrix<f64>, theta: f64) -> Result<()> {
    let scale = a.amax().max(1.0);
    for mu in a.clone().complex_eigenvalues().iter() {
        let neg = -mu;
        if neg.norm() <= 1e-14 * scale || neg.arg().abs() <= theta + 1e-12 {
            return Err(Error::SpectrumInSector { re: mu.re, im: mu.im });
        }
    }
    Ok(())
}

/// `sup_{z ∈ S_θ} (1+|z|)‖(A+z)^{-1}‖` over the sample grid.
pub fn sector_resolvent_bound(a: &DMatrix<f64>, theta: f64, samples: &SectorSamples) -> Result<f64> {
    check_sector_spectrum(a, theta)?;
    let ca = complexify(a);
    Ok(samples
        .points(theta)
        .par_iter()
        .map(|z| (1.0 + z.norm()) * resolvent_norm(&ca, *z))
        .reduce(|| 0.0, f64::max))
}

/// Eigendecomposition of a symmetric positive definite matrix.
pub fn spd_eigen(a: &DMatrix<f64>) -> Result<SymmetricEigen<f64, nalgebra::Dyn>> {
    if !a.is_square() || a.is_empty() {
        return Err(Error::NotSpd);
    }
    let scale = a.amax();
    if (a - a.transpose()).amax() > 1e-12 * scale {
        return Err(Error::NotSpd);
    }
    let eig = a.clone().symmetric_eigen();
    let lo = eig.eigenvalues.min();
    if !(lo > 1e-14 * eig.eigenvalues.amax()) {
        return Err(Error::NotSpd);
    }
    Ok(eig)
}

/// `A^z = V diag(λ^z) Vᵀ`.
pub fn spd_power(a: &DMatrix<f64>, z: Complex64) -> Result<CMatrix> {
    let eig = spd_eigen(a)?;
    let v = complexify(&eig.eigenvectors);
    let d = CMatrix::from_diagonal(&eig.eigenvalues.map(|l| (z * l.ln()).exp()));
    Ok(&v * d * v.transpose())
}

/// `A^{it}`.
pub fn imaginary_power(a: &DMatrix<f64>, t: f64) -> Result<CMatrix> {
    spd_power(a, Complex64::new(0.0, t))
}

/// Truncation of `∫_0^∞ u^{−z}(M+u)^{-1} du` after `u = e^s`: trapezoid
/// with step `step`, tails cut where they fall below `tail_tol`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Balakrishnan {
    pub step: f64,
    pub tail_tol: f64,
}

impl Default for Balakrishnan {
    fn default() -> Self {
        Balakrishnan {
            step: 0.2,
            tail_tol: 1e-14,
        }
    }
}

fn inf_norm(m: &DMatrix<f64>) -> f64 {
    m.row_iter().map(|r| r.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

impl Balakrishnan {
    /// `M^{−z} = (sin πz / π) ∫_0^∞ u^{−z}(M+u)^{-1} du` for `0 < Re z < 1`
    /// and `M` with spectrum in `(0, ∞)`.
    pub fn negative_power(&self, m: &DMatrix<f64>, z: Complex64) -> Result<CMatrix> {
        if !(z.re > 0.0 && z.re < 1.0) {
            return Err(Error::InvalidInput(format!("need 0 < Re z < 1, got {z}")));
        }
        if !(self.step > 0.0 && self.tail_tol > 0.0 && self.tail_tol < 1.0) {
            return Err(Error::InvalidInput("quadrature parameters out of range".into()));
        }
        let inv = m.clone().try_inverse().ok_or(Error::SingularSystem(0))?;
        let (hi, lo) = (inf_norm(m), 1.0 / inf_norm(&inv));
        let cut = -self.tail_tol.ln();
        let s_min = lo.ln() - cut / (1.0 - z.re);
        let s_max = hi.ln() + cut / z.re;
        let count = ((s_max - s_min) / self.step).ceil() as usize;
        let h = (s_max - s_min) / count as f64;
        let dim = m.nrows();
        let sum = (0..=count)
            .into_par_iter()
            .map(|k| {
                let s = s_min + h * k as f64;
                let mut shifted = m.clone();
                for i in 0..dim {
                    shifted[(i, i)] += s.exp();
                }
                let r = shifted.try_inverse().unwrap_or_else(|| DMatrix::from_element(dim, dim, f64::NAN));
                let end = if k == 0 || k == count { 0.5 } else { 1.0 };
                let w = ((Complex64::new(1.0, 0.0) - z) * s).exp() * h * end;
                complexify(&r) * w
            })
            .reduce(|| CMatrix::zeros(dim, dim), |a, b| a + b);
        let out = sum * ((z * PI).sin() / PI);
        if out.iter().any(|v| !v.re.is_finite() || !v.im.is_finite()) {
            return Err(Error::SingularSystem(0));
        }
        Ok(out)
    }
}

/// `(A²)^{−z}` by the integral route.
pub fn imaginary_power_integral(a: &DMatrix<f64>, z: Complex64, quad: &Balakrishnan) -> Result<CMatrix> {
    quad.negative_power(&(a * a), z)
}

/// `max_t ‖(A²)^{it} − A^{2it}‖`, the left side from an independent
/// eigendecomposition of `A²`.
pub fn verify_square_identity(a: &DMatrix<f64>, ts: &[f64]) -> Result<f64> {
    let a2 = a * a;
    let a2 = (&a2 + a2.transpose()) * 0.5;
    let mut worst = 0.0f64;
    for &t in ts {
        let lhs = spd_power(&a2, Complex64::new(0.0, t))?;
        let rhs = spd_power(a, Complex64::new(0.0, 2.0 * t))?;
        worst = worst.max(spectral_norm(&(lhs - rhs)));
    }
    Ok(worst)
}

/// `max_t ‖A^{it}‖ e^{−φ|t|}`.
pub fn bip_estimate(a: &DMatrix<f64>, phi: f64, ts: &[f64]) -> Result<f64> {
    let mut m = 0.0f64;
    for &t in ts {
        m = m.max(spectral_norm(&imaginary_power(a, t)?) * (-phi * t.abs()).exp());
    }
    Ok(m)
}

/// Sample density along `Γ` and the sector.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContourSamples {
    /// Points per ray.
    pub points: usize,
    pub arc_points: usize,
    /// Outer radius as a multiple of the scale of `A² + μ`.
    pub reach: f64,
    /// Slope fit starts at this multiple of the scale.
    pub fit_from: f64,
}

impl Default for ContourSamples {
    fn default() -> Self {
        ContourSamples {
            points: 200,
            arc_points: 32,
            reach: 1e6,
            fit_from: 10.0,
        }
    }
}

/// Boundary of `{|arg z| ≤ ψ_k} ∪ {|z| ≤ 1/2k}`, `ψ_k = min{(π+ψ)/2, arcsin(1/2k)}`,
/// on radii up to `r_max`. Ray points come first, flagged `true`.
pub fn contour_points(k: f64, psi: f64, r_max: f64, samples: &ContourSamples) -> Vec<(Complex64, bool)> {
    let rho = 1.0 / (2.0 * k);
    let psi_k = ((PI + psi) / 2.0).min(rho.min(1.0).asin());
    let mut out = Vec::new();
    for r in log_space(rho, r_max.max(rho), samples.points.max(2)) {
        out.push((Complex64::from_polar(r, psi_k), true));
        out.push((Complex64::from_polar(r, -psi_k), true));
    }
    let arcs = samples.arc_points.max(2);
    for i in 0..arcs {
        let phi = psi_k + (2.0 * PI - 2.0 * psi_k) * i as f64 / (arcs - 1) as f64;
        out.push((Complex64::from_polar(rho, phi), false));
    }
    out
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PerturbationReport {
    pub mu: f64,
    pub beta: f64,
    pub k1: f64,
    pub theta: f64,
    /// `max ‖B(A²+μ+λ)^{-1}‖` over `Γ ∪ S_θ`.
    pub condition_i: f64,
    pub condition_i_passed: bool,
    /// Slope of `log‖R B R‖` against `log|λ|` along the rays of `Γ`.
    pub condition_ii_slope: f64,
    pub condition_ii_residual: f64,
    pub fit_range: (f64, f64),
    pub samples: usize,
}

/// Least-squares line through `(x, y)`: slope and RMS residual.
pub fn fit_line(x: &[f64], y: &[f64]) -> (f64, f64, f64) {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let sxx: f64 = x.iter().map(|v| (v - mx) * (v - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let slope = sxy / sxx;
    let icept = my - slope * mx;
    let rss: f64 = x.iter().zip(y).map(|(a, b)| (b - icept - slope * a).powi(2)).sum();
    (slope, icept, (rss / n).sqrt())
}

/// Checks `‖B(A²+μ+λ)^{-1}‖ ≤ β` on `Γ((1−β)^{-1}K_1, θ) ∪ S_θ` and the
/// decay of `(A²+μ+λ)^{-1}B(A²+μ+λ)^{-1}` along `Γ`.
pub fn perturbation_conditions(
    a: &DMatrix<f64>,
    b: &DMatrix<f64>,
    mu: f64,
    theta: f64,
    beta: f64,
    k1: f64,
    samples: &ContourSamples,
) -> Result<PerturbationReport> {
    if !(0.0 < beta && beta < 1.0) {
        return Err(Error::InvalidInput(format!("beta must lie in (0, 1), got {beta}")));
    }
    if !(k1 >= 1.0) {
        return Err(Error::InvalidInput(format!("K_1 must be at least 1, got {k1}")));
    }
    let base = complexify(&shift_real(&(a * a), mu));
    let cb = complexify(b);
    let scale = inf_norm(&shift_real(&(a * a), mu)).max(1.0);
    let r_max = samples.reach * scale;
    let mut pts = contour_points(k1 / (1.0 - beta), theta, r_max, samples);
    let sector = SectorSamples {
        radial: samples.points,
        angular: 5,
        r_min: 1.0 / (2.0 * k1 / (1.0 - beta)),
        r_max,
    };
    pts.extend(sector.points(theta).into_iter().map(|z| (z, false)));
    let evals: Vec<(Complex64, bool, f64, f64)> = pts
        .par_iter()
        .map(|&(z, ray)| {
            let r = resolvent(&base, z);
            match r {
                Ok(r) => {
                    let br = &cb * &r;
                    let c1 = spectral_norm(&br);
                    let c2 = spectral_norm(&(&r * br));
                    (z, ray, c1, c2)
                }
                Err(_) => (z, ray, f64::INFINITY, f64::INFINITY),
            }
        })
        .collect();
    let condition_i = evals.iter().map(|e| e.2).fold(0.0, f64::max);
    let lo = samples.fit_from * scale;
    let (mut xs, mut ys) = (Vec::new(), Vec::new());
    for &(z, ray, _, c2) in &evals {
        if ray && z.norm() >= lo && c2 > 0.0 {
            xs.push(z.norm().ln());
            ys.push(c2.ln());
        }
    }
    let (slope, residual) = if xs.len() >= 2 && ys.iter().all(|v| v.is_finite()) {
        let (s, _, r) = fit_line(&xs, &ys);
        (s, r)
    } else if xs.is_empty() && b.amax() == 0.0 {
        (f64::NEG_INFINITY, 0.0)
    } else {
        (f64::NAN, f64::NAN)
    };
    Ok(PerturbationReport {
        mu,
        beta,
        k1,
        theta,
        condition_i,
        condition_i_passed: condition_i <= beta,
        condition_ii_slope: slope,
        condition_ii_residual: residual,
        fit_range: (lo, r_max),
        samples: evals.len(),
    })
}

fn shift_real(a: &DMatrix<f64>, c: f64) -> DMatrix<f64> {
    let mut m = a.clone();
    for i in 0..m.nrows() {
        m[(i, i)] += c;
    }
    m
}

/// Block-diagonal `S Δ̲ S^{-1}` over the modes of level `≤ max_level`,
/// `S = diag(√w)`; the discrete Laplacian is self-adjoint for the volume
/// weights `w`, so the result is symmetric up to rounding.
pub fn symmetrized_laplacian(grid: &ConeGrid, spec: &ExtensionSpec, max_level: usize) -> Result<DMatrix<f64>> {
    let cs = grid.cross_section();
    let modes: Vec<usize> = (0..grid.num_modes()).filter(|&m| cs.level_of_mode(m) <= max_level).collect();
    let nodes = grid.num_nodes();
    let s: Vec<f64> = radial_weights(grid).iter().map(|w| w.sqrt()).collect();
    let mut out = DMatrix::zeros(nodes * modes.len(), nodes * modes.len());
    for (b, &m) in modes.iter().enumerate() {
        let l = assemble_laplacian(m, grid, spec).matrix;
        let off = b * nodes;
        for i in 0..nodes {
            for j in i.saturating_sub(1)..(i + 2).min(nodes) {
                out[(off + i, off + j)] = s[i] * l.get(i, j) / s[j];
            }
        }
    }
    let asym = (&out - out.transpose()).amax();
    if asym > 1e-9 * out.amax() {
        return Err(Error::InvalidInput(format!(
            "weighted Laplacian is not symmetric (defect {asym:e})"
        )));
    }
    Ok((&out + out.transpose()) * 0.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LabConfig {
    pub c: f64,
    /// Sector angle for `A²`.
    pub theta: f64,
    /// Imaginary-power angle.
    pub phi: f64,
    pub beta: f64,
    pub mus: Vec<f64>,
    pub t_max: f64,
    pub dt: f64,
    pub max_level: usize,
    /// `t` range and count for imaginary powers.
    pub t_range: f64,
    pub t_count: usize,
    pub sector: SectorSamples,
    pub contour: ContourSamples,
    pub quadrature: Balakrishnan,
}

impl Default for LabConfig {
    fn default() -> Self {
        LabConfig {
            c: 1.0,
            theta: PI / 2.0,
            phi: 0.0,
            beta: 0.5,
            mus: vec![10.0, 100.0, 1000.0],
            t_max: 2.0,
            dt: 0.2,
            max_level: 1,
            t_range: 3.0,
            t_count: 25,
            sector: SectorSamples::default(),
            contour: ContourSamples::default(),
            quadrature: Balakrishnan::default(),
        }
    }
}

impl LabConfig {
    pub fn t_grid(&self) -> Vec<f64> {
        let n = self.t_count.max(2);
        (0..n)
            .map(|k| -self.t_range + 2.0 * self.t_range * k as f64 / (n - 1) as f64)
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LabReport {
    pub dimension: usize,
    /// Shift used in `A = c − Δ̲`, raised above the configured value if
    /// needed for positivity.
    pub c: f64,
    pub theta: f64,
    /// Sector constant of `A` on `S_{(θ+π)/2}`.
    pub k_estimate: f64,
    /// Sector constant of `A²` on `S_θ`.
    pub k1: f64,
    pub phi: f64,
    pub m_estimate: f64,
    pub square_identity_deviation: f64,
    pub integral_deviation: f64,
    /// `sector_resolvent_bound(A, π/2)` and `sector_resolvent_bound(A², 0)`.
    pub transfer: (f64, f64),
    pub perturbation: Vec<PerturbationReport>,
    /// Smallest sampled `μ` meeting condition (i).
    pub passing_mu: Option<f64>,
    pub sector_samples: usize,
    pub contour_samples: usize,
}

/// Runs all experiments on `A = c − Δ̲` and `B = 2cΔ̲` built on a coarse
/// copy of the grid.
pub fn run_lab(grid: &ConeGrid, spec: &ExtensionSpec, cfg: &LabConfig) -> Result<LabReport> {
    let coarse = ConeGrid::new(cfg.t_max, cfg.dt, grid.cross_section().clone())?;
    let lap = symmetrized_laplacian(&coarse, spec, cfg.max_level)?;
    let top = lap.clone().symmetric_eigen().eigenvalues.max();
    let c = cfg.c.max(top + 1.0);
    let dim = lap.nrows();
    let a = DMatrix::identity(dim, dim) * c - &lap;
    let b = &lap * (2.0 * c);
    let a2 = &a * &a;
    let a2 = (&a2 + a2.transpose()) * 0.5;
    let ts = cfg.t_grid();

    let k_estimate = sector_resolvent_bound(&a, (cfg.theta + PI) / 2.0, &cfg.sector)?;
    let k1 = sector_resolvent_bound(&a2, cfg.theta, &cfg.sector)?;
    let m_estimate = bip_estimate(&a2, cfg.phi, &ts)?;
    let square_identity_deviation = verify_square_identity(&a, &ts)?;
    let mut integral_deviation = 0.0f64;
    for im in [-1.0, 0.0, 1.0] {
        let z = Complex64::new(0.25, im);
        let direct = spd_power(&a2, -z)?;
        let quad = imaginary_power_integral(&a, z, &cfg.quadrature)?;
        integral_deviation = integral_deviation.max(spectral_norm(&(quad - &direct)) / spectral_norm(&direct));
    }
    let transfer = (
        sector_resolvent_bound(&a, PI / 2.0, &cfg.sector)?,
        sector_resolvent_bound(&a2, 0.0, &cfg.sector)?,
    );
    let mut mus = cfg.mus.clone();
    mus.sort_by(f64::total_cmp);
    let perturbation = mus
        .iter()
        .map(|&mu| perturbation_conditions(&a, &b, mu, cfg.theta, cfg.beta, k1, &cfg.contour))
        .collect::<Result<Vec<_>>>()?;
    let passing_mu = perturbation.iter().find(|r| r.condition_i_passed).map(|r| r.mu);
    let contour_samples = perturbation.first().map_or(0, |r| r.samples);
    Ok(LabReport {
        dimension: dim,
        c,
        theta: cfg.theta,
        k_estimate,
        k1,
        phi: cfg.phi,
        m_estimate,
        square_identity_deviation,
        integral_deviation,
        transfer,
        perturbation,
        passing_mu,
        sector_samples: cfg.sector.len(cfg.theta),
        contour_samples,
    })
}

/// Random symmetric positive definite matrix `QᵀDQ + δI` of size `dim`.
pub fn random_spd(dim: usize, rng: &mut impl rand::Rng) -> DMatrix<f64> {
    let g = DMatrix::from_fn(dim, dim, |_, _| rng.gen_range(-1.0..1.0));
    let m = g.transpose() * &g + DMatrix::identity(dim, dim) * 0.5;
    (&m + m.transpose()) * 0.5
}
