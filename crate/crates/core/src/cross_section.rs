//! Spectral data of the boundary Laplacian on the cone's cross-section.
//!
//! Everything downstream (pole catalogs, weight windows, mode-diagonal
//! operators) is driven by the eigenvalues `0 = λ_0 > λ_1 > …` and, for the
//! evolution engine, by an orthonormal eigenbasis sampled on a quadrature
//! that integrates products of retained modes exactly.

use std::f64::consts::{PI, TAU};
use std::ops::Range;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::exact::Real;

#[derive(Clone, Debug, PartialEq)]
pub enum Geometry {
    /// Circle of the given length (dim B = 2).
    Circle { circumference: f64 },
    /// Round unit sphere S^n, degrees `0..=max_degree`.
    Sphere { max_degree: usize },
    /// User-supplied spectrum without eigenfunctions.
    Raw,
}

#[derive(Clone, Debug)]
pub struct Level {
    pub eigenvalue: Real,
    pub multiplicity: usize,
}

/// Nodes and weights on the cross-section. Circle nodes use `[θ, 0]`,
/// sphere nodes `[polar angle, azimuth]`.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl Quadrature {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct CrossSection {
    n: usize,
    levels: Vec<Level>,
    geometry: Geometry,
    quadrature: Option<Quadrature>,
    offsets: Vec<usize>,
}

impl CrossSection {
    /// Circle of length `circumference` with Fourier modes `0..=max_mode`.
    pub fn circle(circumference: f64, max_mode: usize) -> Result<Self> {
        Self::circle_with_nodes(circumference, max_mode, 4 * max_mode + 4)
    }

    pub fn circle_with_nodes(circumference: f64, max_mode: usize, nodes: usize) -> Result<Self> {
        if !(circumference.is_finite() && circumference > 0.0) {
            return Err(Error::InvalidInput(format!(
                "circumference must be positive, got {circumference}"
            )));
        }
        if nodes < 2 * max_mode + 1 {
            return Err(Error::InvalidInput(format!(
                "{nodes} quadrature nodes cannot resolve mode {max_mode}"
            )));
        }
        // 2π/L, exact when L is a rational multiple of 2π
        let freq = Real::snap(TAU / circumference);
        let levels = (0..=max_mode)
            .map(|k| {
                let kf = Real::int(k as i64) * freq;
                Level {
                    eigenvalue: -(kf * kf),
                    multiplicity: if k == 0 { 1 } else { 2 },
                }
            })
            .collect();
        let h = circumference / nodes as f64;
        let quadrature = Quadrature {
            nodes: (0..nodes).map(|m| [m as f64 * h, 0.0]).collect(),
            weights: vec![h; nodes],
        };
        Ok(Self::assemble(
            1,
            levels,
            Geometry::Circle { circumference },
            Some(quadrature),
        ))
    }

    /// Round unit sphere `S^n`. Eigenfunctions (real spherical harmonics) are
    /// available for `n = 2`; higher spheres carry the spectrum only.
    pub fn sphere(n: usize, max_degree: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidInput(format!(
                "sphere dimension must be at least 2, got {n}"
            )));
        }
        let levels = (0..=max_degree)
            .map(|k| Level {
                eigenvalue: Real::int(-((k * (k + n - 1)) as i64)),
                multiplicity: harmonic_dimension(n, k),
            })
            .collect();
        let quadrature = (n == 2).then(|| sphere_quadrature(2 * max_degree + 2, 4 * max_degree + 4));
        Ok(Self::assemble(
            n,
            levels,
            Geometry::Sphere { max_degree },
            quadrature,
        ))
    }

    /// Spectrum-only cross-section for symbol-level work.
    pub fn raw(n: usize, eigenvalues: &[f64], multiplicities: &[usize]) -> Result<Self> {
        if n < 1 {
            return Err(Error::InvalidInput("n must be at least 1".into()));
        }
        if eigenvalues.is_empty() || eigenvalues.len() != multiplicities.len() {
            return Err(Error::InvalidInput(
                "eigenvalues and multiplicities must be non-empty and of equal length".into(),
            ));
        }
        if eigenvalues[0] != 0.0 {
            return Err(Error::InvalidInput("λ_0 must be 0".into()));
        }
        for w in eigenvalues.windows(2) {
            if !(w[1] < w[0]) {
                return Err(Error::InvalidInput(
                    "eigenvalues must be strictly decreasing".into(),
                ));
            }
        }
        if multiplicities.iter().any(|&m| m == 0) {
            return Err(Error::InvalidInput("multiplicities must be positive".into()));
        }
        let levels = eigenvalues
            .iter()
            .zip(multiplicities)
            .map(|(&l, &m)| Level {
                eigenvalue: Real::snap(l),
                multiplicity: m,
            })
            .collect();
        Ok(Self::assemble(n, levels, Geometry::Raw, None))
    }

    fn assemble(n: usize, levels: Vec<Level>, geometry: Geometry, quadrature: Option<Quadrature>) -> Self {
        let mut offsets = Vec::with_capacity(levels.len() + 1);
        let mut acc = 0;
        for l in &levels {
            offsets.push(acc);
            acc += l.multiplicity;
        }
        offsets.push(acc);
        CrossSection {
            n,
            levels,
            geometry,
            quadrature,
            offsets,
        }
    }

    /// Same geometry and quadrature with levels `0..=max_level`. Used for the
    /// product space in pseudo-spectral evaluations.
    pub fn with_levels(&self, max_level: usize) -> Result<Self> {
        let levels: Vec<Level> = match &self.geometry {
            Geometry::Circle { circumference } => {
                let freq = Real::snap(TAU / circumference);
                (0..=max_level)
                    .map(|k| {
                        let kf = Real::int(k as i64) * freq;
                        Level {
                            eigenvalue: -(kf * kf),
                            multiplicity: if k == 0 { 1 } else { 2 },
                        }
                    })
                    .collect()
            }
            Geometry::Sphere { .. } => (0..=max_level)
                .map(|k| Level {
                    eigenvalue: Real::int(-((k * (k + self.n - 1)) as i64)),
                    multiplicity: harmonic_dimension(self.n, k),
                })
                .collect(),
            Geometry::Raw => {
                if max_level >= self.levels.len() {
                    return Err(Error::IndexOutOfRange {
                        index: max_level,
                        len: self.levels.len(),
                    });
                }
                self.levels[..=max_level].to_vec()
            }
        };
        let geometry = match &self.geometry {
            Geometry::Sphere { .. } => Geometry::Sphere {
                max_degree: max_level,
            },
            g => g.clone(),
        };
        Ok(Self::assemble(self.n, levels, geometry, self.quadrature.clone()))
    }

    /// Dimension of the cross-section; the cone has dimension `n + 1`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn levels(&self) -> &[Level] {
        &self.levels
    }

    pub fn num_levels(&self) -> usize {
        self.levels.len()
    }

    pub fn num_modes(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.levels[j].eigenvalue.value()
    }

    pub fn multiplicity(&self, j: usize) -> usize {
        self.levels[j].multiplicity
    }

    /// Flattened mode indices belonging to level `j`.
    pub fn modes_of_level(&self, j: usize) -> Range<usize> {
        self.offsets[j]..self.offsets[j + 1]
    }

    pub fn level_of_mode(&self, mode: usize) -> usize {
        match self.offsets.binary_search(&mode) {
            Ok(mut j) => {
                // skip empty trailing sentinel matches
                while j + 1 < self.offsets.len() && self.offsets[j + 1] == mode {
                    j += 1;
                }
                j
            }
            Err(j) => j - 1,
        }
    }

    /// Eigenvalue for each flattened mode.
    pub fn mode_eigenvalues(&self) -> Vec<f64> {
        (0..self.num_modes())
            .map(|m| self.eigenvalue(self.level_of_mode(m)))
            .collect()
    }

    pub fn has_eigenfunctions(&self) -> bool {
        self.quadrature.is_some()
    }

    pub fn quadrature(&self) -> Result<&Quadrature> {
        self.quadrature.as_ref().ok_or(Error::NoEigenfunctions)
    }

    /// Volume of the cross-section.
    pub fn measure(&self) -> Result<f64> {
        Ok(self.quadrature()?.weights.iter().sum())
    }

    /// `e_{jk}(y)` with `k` in `0..m_j`.
    pub fn eigenfunction(&self, j: usize, k: usize, y: [f64; 2]) -> Result<f64> {
        if j >= self.levels.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.levels.len(),
            });
        }
        if k >= self.levels[j].multiplicity {
            return Err(Error::IndexOutOfRange {
                index: k,
                len: self.levels[j].multiplicity,
            });
        }
        match &self.geometry {
            Geometry::Circle { circumference } => Ok(circle_mode(*circumference, j, k, y[0])),
            Geometry::Sphere { .. } if self.n == 2 => Ok(real_spherical_harmonic(j, k, y[0], y[1])),
            _ => Err(Error::NoEigenfunctions),
        }
    }

    pub fn eval_mode(&self, mode: usize, y: [f64; 2]) -> Result<f64> {
        let j = self.level_of_mode(mode);
        self.eigenfunction(j, mode - self.offsets[j], y)
    }

    /// Coefficients `⟨v, e_{jk}⟩` for `v` sampled at the quadrature nodes.
    pub fn project(&self, v: &[f64], j: usize) -> Result<Vec<f64>> {
        let q = self.quadrature()?;
        if v.len() != q.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} samples, got {}",
                q.len(),
                v.len()
            )));
        }
        if j >= self.levels.len() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: self.levels.len(),
            });
        }
        (0..self.levels[j].multiplicity)
            .map(|k| {
                let mut acc = 0.0;
                for ((y, w), vi) in q.nodes.iter().zip(&q.weights).zip(v) {
                    acc += w * vi * self.eigenfunction(j, k, *y)?;
                }
                Ok(acc)
            })
            .collect()
    }

    /// Function with the given flattened-mode coefficients, sampled at the
    /// quadrature nodes.
    pub fn embed(&self, coeffs: &[f64]) -> Result<Vec<f64>> {
        let q = self.quadrature()?;
        let mut out = vec![0.0; q.len()];
        for (m, c) in coeffs.iter().enumerate().take(self.num_modes()) {
            if *c == 0.0 {
                continue;
            }
            for (o, y) in out.iter_mut().zip(&q.nodes) {
                *o += c * self.eval_mode(m, *y)?;
            }
        }
        Ok(out)
    }

    pub fn to_document(&self) -> CrossSectionDoc {
        let (tag, circumference, degree) = match &self.geometry {
            Geometry::Circle { circumference } => ("circle", Some(*circumference), None),
            Geometry::Sphere { max_degree } => ("sphere", None, Some(*max_degree)),
            Geometry::Raw => ("raw", None, None),
        };
        CrossSectionDoc {
            n: self.n,
            eigenvalues: self.levels.iter().map(|l| l.eigenvalue.value()).collect(),
            multiplicities: self.levels.iter().map(|l| l.multiplicity).collect(),
            geometry: tag.to_string(),
            circumference,
            degree,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossSectionDoc {
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub multiplicities: Vec<usize>,
    pub geometry: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub circumference: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub degree: Option<usize>,
}

/// Sampled synthesis/analysis matrices for the retained modes and for the
/// doubled product space.
#[derive(Clone, Debug)]
pub struct ModalTransform {
    pub num_nodes: usize,
    pub num_modes: usize,
    pub num_ext_modes: usize,
    pub weights: Vec<f64>,
    /// `basis[m * num_nodes + q] = e_m(y_q)`
    basis: Vec<f64>,
    ext_basis: Vec<f64>,
    pub lambda: Vec<f64>,
    pub lambda_ext: Vec<f64>,
}

impl ModalTransform {
    pub fn new(cs: &CrossSection) -> Result<Self> {
        let q = cs.quadrature()?;
        let ext = cs.with_levels(2 * (cs.num_levels() - 1))?;
        let sample = |c: &CrossSection| -> Result<Vec<f64>> {
            let mut out = Vec::with_capacity(c.num_modes() * q.len());
            for m in 0..c.num_modes() {
                for y in &q.nodes {
                    out.push(c.eval_mode(m, *y)?);
                }
            }
            Ok(out)
        };
        Ok(ModalTransform {
            num_nodes: q.len(),
            num_modes: cs.num_modes(),
            num_ext_modes: ext.num_modes(),
            weights: q.weights.clone(),
            basis: sample(cs)?,
            ext_basis: sample(&ext)?,
            lambda: cs.mode_eigenvalues(),
            lambda_ext: ext.mode_eigenvalues(),
        })
    }

    pub fn synthesize(&self, coeffs: &[f64], out: &mut [f64]) {
        synth(&self.basis, self.num_nodes, coeffs, out);
    }

    pub fn analyze(&self, values: &[f64], out: &mut [f64]) {
        analyze(&self.basis, &self.weights, values, out);
    }

    pub fn synthesize_ext(&self, coeffs: &[f64], out: &mut [f64]) {
        synth(&self.ext_basis, self.num_nodes, coeffs, out);
    }

    pub fn analyze_ext(&self, values: &[f64], out: &mut [f64]) {
        analyze(&self.ext_basis, &self.weights, values, out);
    }

    /// `∇_∂u · ∇_∂v` at the nodes from
    /// `2∇u·∇v = Δ_∂(uv) − uΔ_∂v − vΔ_∂u`, exact on the retained span.
    pub fn tangential_pairing(
        &self,
        u_phys: &[f64],
        lap_u_phys: &[f64],
        v_phys: &[f64],
        lap_v_phys: &[f64],
        out: &mut [f64],
    ) {
        let prod: Vec<f64> = u_phys.iter().zip(v_phys).map(|(a, b)| a * b).collect();
        let mut c = vec![0.0; self.num_ext_modes];
        self.analyze_ext(&prod, &mut c);
        for (ci, l) in c.iter_mut().zip(&self.lambda_ext) {
            *ci *= l;
        }
        self.synthesize_ext(&c, out);
        for q in 0..self.num_nodes {
            out[q] = 0.5 * (out[q] - u_phys[q] * lap_v_phys[q] - v_phys[q] * lap_u_phys[q]);
        }
    }
}

fn synth(basis: &[f64], nodes: usize, coeffs: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|o| *o = 0.0);
    for (m, c) in coeffs.iter().enumerate() {
        if *c == 0.0 {
            continue;
        }
        let row = &basis[m * nodes..(m + 1) * nodes];
        for (o, b) in out.iter_mut().zip(row) {
            *o += c * b;
        }
    }
}

fn analyze(basis: &[f64], weights: &[f64], values: &[f64], out: &mut [f64]) {
    let nodes = weights.len();
    for (m, o) in out.iter_mut().enumerate() {
        let row = &basis[m * nodes..(m + 1) * nodes];
        let mut acc = 0.0;
        for q in 0..nodes {
            acc += weights[q] * values[q] * row[q];
        }
        *o = acc;
    }
}

fn circle_mode(circumference: f64, j: usize, k: usize, theta: f64) -> f64 {
    if j == 0 {
        return 1.0 / circumference.sqrt();
    }
    let arg = TAU * j as f64 * theta / circumference;
    let amp = (2.0 / circumference).sqrt();
    if k == 0 {
        amp * arg.cos()
    } else {
        amp * arg.sin()
    }
}

/// Dimension of degree-`k` spherical harmonics on `S^n`:
/// `C(n+k, n) − C(n+k−2, n)`.
pub fn harmonic_dimension(n: usize, k: usize) -> usize {
    let binom = |a: usize, b: usize| -> usize {
        if b > a {
            return 0;
        }
        let mut r: u128 = 1;
        for i in 0..b {
            r = r * (a - i) as u128 / (i + 1) as u128;
        }
        r as usize
    };
    let hi = binom(n + k, n);
    let lo = if k >= 2 { binom(n + k - 2, n) } else { 0 };
    hi - lo
}

/// Fully normalised associated Legendre function, `∫_{-1}^{1} P̄² dx = 1`.
fn normalized_legendre(l: usize, m: usize, x: f64) -> f64 {
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut pmm = (0.5f64).sqrt();
    for i in 1..=m {
        let fi = i as f64;
        pmm *= -((2.0 * fi + 1.0) / (2.0 * fi)).sqrt() * s;
    }
    if l == m {
        return pmm;
    }
    let mut pm1 = x * (2.0 * m as f64 + 3.0).sqrt() * pmm;
    if l == m + 1 {
        return pm1;
    }
    let mut pm2 = pmm;
    let fm = m as f64;
    for ll in (m + 2)..=l {
        let fl = ll as f64;
        let a = ((4.0 * fl * fl - 1.0) / (fl * fl - fm * fm)).sqrt();
        let b = (((fl - 1.0).powi(2) - fm * fm) / (4.0 * (fl - 1.0).powi(2) - 1.0)).sqrt();
        let p = a * (x * pm1 - b * pm2);
        pm2 = pm1;
        pm1 = p;
    }
    pm1
}

/// Real orthonormal spherical harmonics on S², ordered `m = 0`, then
/// `(cos mφ, sin mφ)` pairs for `m = 1..=l`.
fn real_spherical_harmonic(l: usize, k: usize, polar: f64, azimuth: f64) -> f64 {
    if k == 0 {
        return normalized_legendre(l, 0, polar.cos()) / TAU.sqrt();
    }
    let m = (k + 1) / 2;
    let p = normalized_legendre(l, m, polar.cos()) / PI.sqrt();
    if k % 2 == 1 {
        p * (m as f64 * azimuth).cos()
    } else {
        p * (m as f64 * azimuth).sin()
    }
}

/// Gauss-Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(count: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; count];
    let mut w = vec![0.0; count];
    let nf = count as f64;
    for i in 0..count.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=count {
                let kf = k as f64;
                let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
                p0 = p1;
                p1 = p2;
            }
            if count == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = nf * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-15 {
                break;
            }
        }
        x[i] = -z;
        x[count - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[count - 1 - i] = wi;
    }
    (x, w)
}

fn sphere_quadrature(n_polar: usize, n_azimuth: usize) -> Quadrature {
    let (x, w) = gauss_legendre(n_polar);
    let dphi = TAU / n_azimuth as f64;
    let mut nodes = Vec::with_capacity(n_polar * n_azimuth);
    let mut weights = Vec::with_capacity(n_polar * n_azimuth);
    for (xi, wi) in x.iter().zip(&w) {
        let polar = xi.clamp(-1.0, 1.0).acos();
        for a in 0..n_azimuth {
            nodes.push([polar, a as f64 * dphi]);
            weights.push(wi * dphi);
        }
    }
    Quadrature { nodes, weights }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn gram_error(cs: &CrossSection) -> f64 {
        let q = cs.quadrature().unwrap();
        let nm = cs.num_modes();
        let mut worst: f64 = 0.0;
        for a in 0..nm {
            for b in 0..nm {
                let mut s = 0.0;
                for (y, w) in q.nodes.iter().zip(&q.weights) {
                    s += w * cs.eval_mode(a, *y).unwrap() * cs.eval_mode(b, *y).unwrap();
                }
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((s - target).abs());
            }
        }
        worst
    }

    #[test]
    fn unit_circle_spectrum() {
        let cs = CrossSection::circle(TAU, 2).unwrap();
        let ev: Vec<f64> = cs.levels().iter().map(|l| l.eigenvalue.value()).collect();
        assert_eq!(ev, vec![0.0, -1.0, -4.0]);
        assert!(cs.levels().iter().all(|l| l.eigenvalue.is_exact()));
        assert_eq!(cs.multiplicity(0), 1);
        assert_eq!(cs.multiplicity(1), 2);
        assert_eq!(cs.num_modes(), 5);
    }

    #[test]
    fn half_circle_spectrum() {
        let cs = CrossSection::circle(PI, 1).unwrap();
        assert_eq!(cs.eigenvalue(1), -4.0);
    }

    #[test]
    fn nonpositive_circumference_rejected() {
        assert!(CrossSection::circle(0.0, 2).is_err());
        assert!(CrossSection::circle(-1.0, 2).is_err());
    }

    #[test]
    fn cos_sin_orthogonal() {
        let cs = CrossSection::circle(TAU, 3).unwrap();
        let q = cs.quadrature().unwrap();
        let s: f64 = q
            .nodes
            .iter()
            .zip(&q.weights)
            .map(|(y, w)| w * y[0].cos() * y[0].sin())
            .sum();
        assert!(s.abs() < 1e-12);
        assert!(gram_error(&cs) < 1e-10);
    }

    #[test]
    fn sphere_spectrum_and_multiplicity() {
        let cs = CrossSection::sphere(2, 2).unwrap();
        let ev: Vec<f64> = (0..3).map(|j| cs.eigenvalue(j)).collect();
        // roots of z(z+n-1) + λ over integer degrees
        let oracle: Vec<f64> = (0..3).map(|k: i64| -(k * (k + 1)) as f64).collect();
        assert_eq!(ev, oracle);
        // degree-1 harmonic monomials in 3 variables: x, y, z
        assert_eq!(cs.multiplicity(1), 3);
        for n in 2..6 {
            let s = CrossSection::sphere(n, 1).unwrap();
            assert_eq!(s.eigenvalue(0), 0.0);
            assert_eq!(s.multiplicity(0), 1);
            assert_eq!(s.multiplicity(1), n + 1);
        }
        assert!(CrossSection::sphere(1, 2).is_err());
    }

    #[test]
    fn sphere_harmonics_orthonormal() {
        let cs = CrossSection::sphere(2, 4).unwrap();
        assert!(gram_error(&cs) < 1e-10);
    }

    #[test]
    fn harmonic_dimension_matches_monomial_count() {
        // S^3: (k+1)^2
        for k in 0..6 {
            assert_eq!(harmonic_dimension(3, k), (k + 1) * (k + 1));
        }
        // S^2: 2k+1
        for k in 0..6 {
            assert_eq!(harmonic_dimension(2, k), 2 * k + 1);
        }
    }

    #[test]
    fn projection_of_basis_function() {
        let cs = CrossSection::circle(TAU, 3).unwrap();
        let q = cs.quadrature().unwrap();
        let e11: Vec<f64> = q.nodes.iter().map(|y| cs.eigenfunction(1, 0, *y).unwrap()).collect();
        let p1 = cs.project(&e11, 1).unwrap();
        assert!((p1[0] - 1.0).abs() < 1e-10 && p1[1].abs() < 1e-10);
        let p0 = cs.project(&e11, 0).unwrap();
        assert!(p0[0].abs() < 1e-10);

        let e01: Vec<f64> = q.nodes.iter().map(|y| 3.0 * cs.eigenfunction(0, 0, *y).unwrap()).collect();
        assert!((cs.project(&e01, 0).unwrap()[0] - 3.0).abs() < 1e-12);
        assert!(cs.project(&e01, 9).is_err());
    }

    #[test]
    fn projections_resum_trigonometric_polynomial() {
        let cs = CrossSection::circle(TAU, 4).unwrap();
        let q = cs.quadrature().unwrap();
        let v: Vec<f64> = q
            .nodes
            .iter()
            .map(|y| 0.3 + 1.7 * y[0].cos() - 0.2 * (3.0 * y[0]).sin() + 0.9 * (4.0 * y[0]).cos())
            .collect();
        let mut coeffs = Vec::new();
        for j in 0..cs.num_levels() {
            coeffs.extend(cs.project(&v, j).unwrap());
        }
        let back = cs.embed(&coeffs).unwrap();
        for (a, b) in back.iter().zip(&v) {
            assert!((a - b).abs() < 1e-10);
        }
        // idempotence in coefficient space
        let mut again = Vec::new();
        for j in 0..cs.num_levels() {
            again.extend(cs.project(&back, j).unwrap());
        }
        for (a, b) in again.iter().zip(&coeffs) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn second_differences_reproduce_eigenvalues() {
        // Δ_∂ e = λ e on uniform grids, error O(h^2)
        let mut errs = Vec::new();
        for nodes in [32usize, 64, 128] {
            let cs = CrossSection::circle_with_nodes(TAU, 3, nodes).unwrap();
            let q = cs.quadrature().unwrap();
            let h = TAU / nodes as f64;
            let e: Vec<f64> = q.nodes.iter().map(|y| cs.eigenfunction(3, 0, *y).unwrap()).collect();
            let mut err: f64 = 0.0;
            for i in 0..nodes {
                let lap = (e[(i + 1) % nodes] - 2.0 * e[i] + e[(i + nodes - 1) % nodes]) / (h * h);
                err = err.max((lap - cs.eigenvalue(3) * e[i]).abs());
            }
            errs.push(err);
        }
        assert!(errs[0] / errs[1] > 3.8 && errs[1] / errs[2] > 3.8, "{errs:?}");
    }

    #[test]
    fn raw_spectrum_validation() {
        assert!(CrossSection::raw(1, &[0.0, -1.0], &[1, 2]).is_ok());
        assert!(CrossSection::raw(1, &[-1.0], &[1]).is_err());
        assert!(CrossSection::raw(1, &[0.0, -1.0, -1.0], &[1, 2, 2]).is_err());
        let raw = CrossSection::raw(2, &[0.0, -0.75], &[1, 1]).unwrap();
        assert!(raw.levels()[1].eigenvalue.is_exact());
        assert!(!raw.has_eigenfunctions());
    }

    #[test]
    fn level_lookup() {
        let cs = CrossSection::sphere(2, 3).unwrap();
        assert_eq!(cs.level_of_mode(0), 0);
        assert_eq!(cs.level_of_mode(1), 1);
        assert_eq!(cs.level_of_mode(3), 1);
        assert_eq!(cs.level_of_mode(4), 2);
        assert_eq!(cs.level_of_mode(15), 3);
    }

    #[test]
    fn document_round_trip_fields() {
        let cs = CrossSection::circle(TAU, 1).unwrap();
        let doc = serde_json::to_value(cs.to_document()).unwrap();
        assert_eq!(doc["geometry"], "circle");
        assert_eq!(doc["eigenvalues"], serde_json::json!([0.0, -1.0]));
        assert_eq!(doc["multiplicities"], serde_json::json!([1, 2]));
    }

    #[test]
    fn tangential_pairing_on_circle() {
        // u = cos θ, v = sin θ : ∂u ∂v = -sin θ cos θ
        let cs = CrossSection::circle(TAU, 3).unwrap();
        let tr = ModalTransform::new(&cs).unwrap();
        let q = cs.quadrature().unwrap();
        let u: Vec<f64> = q.nodes.iter().map(|y| y[0].cos()).collect();
        let v: Vec<f64> = q.nodes.iter().map(|y| y[0].sin()).collect();
        let lu: Vec<f64> = u.iter().map(|x| -x).collect();
        let lv: Vec<f64> = v.iter().map(|x| -x).collect();
        let mut out = vec![0.0; q.len()];
        tr.tangential_pairing(&u, &lu, &v, &lv, &mut out);
        for (o, y) in out.iter().zip(&q.nodes) {
            assert!((o + y[0].sin() * y[0].cos()).abs() < 1e-12);
        }
    }
}
