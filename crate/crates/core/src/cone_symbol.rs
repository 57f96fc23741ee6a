//! Conormal symbol calculus for the cone Laplacian and bilaplacian.
//!
//! `σ_M(Δ)(z) = z² − (n−1)z + Δ_∂` acts diagonally on eigenspaces; its
//! non-bijectivity points are `q_j^± = (n−1)/2 ± √(((n−1)/2)² − λ_j)`.
//! Asymptotic monomials are stored by exponent `a` of `x^a`, so the space
//! attached to a pole `q` sits at `a = −q`.

use num_complex::Complex64;
use serde::Serialize;

use crate::cross_section::CrossSection;
use crate::error::{Error, Result};
use crate::exact::{Real, COINCIDENCE_TOL};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceOperator {
    Laplacian,
    Bilaplacian,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum PoleOrigin {
    Direct,
    ShiftedBy2,
    Merged,
}

#[derive(Clone, Debug, Serialize)]
pub struct Pole {
    pub rho: Real,
    pub order: u8,
    pub mode: usize,
    pub origin: PoleOrigin,
}

#[derive(Clone, Debug, Serialize)]
pub struct PoleCatalog {
    pub n: usize,
    pub source: SourceOperator,
    pub entries: Vec<Pole>,
}

impl PoleCatalog {
    pub fn locations(&self) -> impl Iterator<Item = &Real> {
        self.entries.iter().map(|p| &p.rho)
    }

    /// Entries attached to level `j`.
    pub fn for_mode(&self, j: usize) -> impl Iterator<Item = &Pole> {
        self.entries.iter().filter(move |p| p.mode == j)
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(&self.entries).expect("pole catalog serializes")
    }
}

/// `(q_j^+, q_j^-)` for level `j`.
pub fn pole_pair(cs: &CrossSection, j: usize) -> (Real, Real) {
    let half = Real::frac(cs.n() as i64 - 1, 2);
    let disc = half * half - cs.levels()[j].eigenvalue;
    let root = disc.sqrt();
    (half + root, half - root)
}

fn sort_entries(entries: &mut [Pole]) {
    entries.sort_by(|a, b| b.rho.cmp_tol(&a.rho).then(a.mode.cmp(&b.mode)));
}

/// Non-bijectivity points of `σ_M(Δ)`, one entry per `(j, ±)`; a coincident
/// pair becomes a single entry of order 2.
pub fn compute_poles(cs: &CrossSection) -> PoleCatalog {
    let mut entries = Vec::with_capacity(2 * cs.num_levels());
    for j in 0..cs.num_levels() {
        let (qp, qm) = pole_pair(cs, j);
        if qp.coincides(&qm) {
            entries.push(Pole {
                rho: qp,
                order: 2,
                mode: j,
                origin: PoleOrigin::Direct,
            });
        } else {
            for q in [qp, qm] {
                entries.push(Pole {
                    rho: q,
                    order: 1,
                    mode: j,
                    origin: PoleOrigin::Direct,
                });
            }
        }
    }
    sort_entries(&mut entries);
    PoleCatalog {
        n: cs.n(),
        source: SourceOperator::Laplacian,
        entries,
    }
}

/// Poles of `σ_M(Δ²)(z)^{-1} = Σ_j π_j / (P_j(z) P_j(z+2))`: the points
/// `q_j^±` and `q_j^± − 2`, with orders counted per level.
pub fn compute_bilaplacian_poles(catalog: &PoleCatalog) -> Result<PoleCatalog> {
    if catalog.source != SourceOperator::Laplacian {
        return Err(Error::InvalidInput(
            "bilaplacian poles are derived from a Laplacian catalog".into(),
        ));
    }
    let two = Real::int(2);
    let mut modes: Vec<usize> = catalog.entries.iter().map(|p| p.mode).collect();
    modes.sort_unstable();
    modes.dedup();

    let mut entries = Vec::new();
    for j in modes {
        // roots of P_j(z) P_j(z+2) with multiplicity, tagged by origin
        let mut roots: Vec<(Real, bool)> = Vec::with_capacity(4);
        for p in catalog.for_mode(j) {
            for _ in 0..p.order {
                roots.push((p.rho, false));
                roots.push((p.rho - two, true));
            }
        }
        let mut groups: Vec<(Real, u8, bool, bool)> = Vec::new();
        for (r, shifted) in roots {
            match groups.iter_mut().find(|g| g.0.coincides(&r)) {
                Some(g) => {
                    g.1 += 1;
                    if shifted {
                        g.3 = true;
                    } else {
                        g.2 = true;
                    }
                }
                None => groups.push((r, 1, !shifted, shifted)),
            }
        }
        for (rho, order, direct, shifted) in groups {
            let origin = match (direct, shifted) {
                (true, true) => PoleOrigin::Merged,
                (true, false) => PoleOrigin::Direct,
                _ => PoleOrigin::ShiftedBy2,
            };
            entries.push(Pole {
                rho,
                order,
                mode: j,
                origin,
            });
        }
    }
    sort_entries(&mut entries);
    Ok(PoleCatalog {
        n: catalog.n,
        source: SourceOperator::Bilaplacian,
        entries,
    })
}

fn symbol_factor(cs: &CrossSection, j: usize, z: Complex64) -> Complex64 {
    let nm1 = cs.n() as f64 - 1.0;
    z * z - nm1 * z + cs.eigenvalue(j)
}

/// `σ_M(Δ)(z)` applied to per-mode coefficients (flattened mode order).
pub fn apply_symbol(z: Complex64, coeffs: &[Complex64], cs: &CrossSection) -> Result<Vec<Complex64>> {
    check_len(coeffs, cs)?;
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| c * symbol_factor(cs, cs.level_of_mode(m), z))
        .collect())
}

/// `σ_M(Δ)(z)^{-1} = Σ_j π_j / ((z − q_j^+)(z − q_j^−))`.
pub fn invert_symbol(z: Complex64, coeffs: &[Complex64], cs: &CrossSection) -> Result<Vec<Complex64>> {
    check_len(coeffs, cs)?;
    let pairs: Vec<(f64, f64)> = (0..cs.num_levels())
        .map(|j| {
            let (p, m) = pole_pair(cs, j);
            (p.value(), m.value())
        })
        .collect();
    for (qp, qm) in &pairs {
        for q in [*qp, *qm] {
            if (z - q).norm() <= COINCIDENCE_TOL {
                return Err(Error::PoleProximity {
                    re: z.re,
                    im: z.im,
                    pole: q,
                });
            }
        }
    }
    Ok(coeffs
        .iter()
        .enumerate()
        .map(|(m, c)| {
            let (qp, qm) = pairs[cs.level_of_mode(m)];
            c / ((z - qp) * (z - qm))
        })
        .collect())
}

fn check_len(coeffs: &[Complex64], cs: &CrossSection) -> Result<()> {
    if coeffs.len() != cs.num_modes() {
        return Err(Error::InvalidInput(format!(
            "expected {} mode coefficients, got {}",
            cs.num_modes(),
            coeffs.len()
        )));
    }
    Ok(())
}

/// `coefficient · x^exponent · log^log_power x ⊗ e` with `e ∈ E_mode`.
#[derive(Clone, Debug, Serialize)]
pub struct AsymptoticTerm {
    pub exponent: Real,
    pub log_power: u32,
    pub mode: usize,
    pub coefficient: Real,
}

impl AsymptoticTerm {
    pub fn monomial(exponent: Real, log_power: u32, mode: usize) -> Self {
        AsymptoticTerm {
            exponent,
            log_power,
            mode,
            coefficient: Real::int(1),
        }
    }

    /// Value at `x` (times the unit eigenfunction).
    pub fn eval(&self, x: f64) -> f64 {
        self.coefficient.value() * x.powf(self.exponent.value()) * x.ln().powi(self.log_power as i32)
    }
}

/// Radial polynomial of the Laplacian on `x^a ⊗ e_j`:
/// `Δ(x^a e_j) = x^{a−2} Q_j(a) e_j` with `Q_j(a) = a² + (n−1)a + λ_j`,
/// i.e. `Q_j(a) = P_j(−a)` for the symbol polynomial `P_j`.
pub fn radial_polynomial(cs: &CrossSection, j: usize, a: Real) -> Real {
    let nm1 = Real::int(cs.n() as i64 - 1);
    a * a + nm1 * a + cs.levels()[j].eigenvalue
}

pub fn radial_polynomial_derivative(cs: &CrossSection, a: Real) -> Real {
    Real::int(2) * a + Real::int(cs.n() as i64 - 1)
}

/// Exact expansion of `Δ(x^a log^l x ⊗ e_j)` for `l ≤ 1`:
/// `x^{a−2}[Q_j(a) log^l x + l Q_j'(a) log^{l−1} x] e_j`. Zero terms are
/// dropped.
pub fn symbolic_laplacian(term: &AsymptoticTerm, cs: &CrossSection) -> Result<Vec<AsymptoticTerm>> {
    if term.log_power > 1 {
        return Err(Error::UnsupportedLogPower(term.log_power));
    }
    if term.mode >= cs.num_levels() {
        return Err(Error::IndexOutOfRange {
            index: term.mode,
            len: cs.num_levels(),
        });
    }
    let a = term.exponent;
    let shifted = a - Real::int(2);
    let q = radial_polynomial(cs, term.mode, a);
    let mut out = Vec::with_capacity(2);
    let lead = q * term.coefficient;
    if !is_negligible(&lead) {
        out.push(AsymptoticTerm {
            exponent: shifted,
            log_power: term.log_power,
            mode: term.mode,
            coefficient: lead,
        });
    }
    if term.log_power == 1 {
        let sub = radial_polynomial_derivative(cs, a) * term.coefficient;
        if !is_negligible(&sub) {
            out.push(AsymptoticTerm {
                exponent: shifted,
                log_power: 0,
                mode: term.mode,
                coefficient: sub,
            });
        }
    }
    Ok(out)
}

fn is_negligible(r: &Real) -> bool {
    if r.is_exact() {
        r.is_zero()
    } else {
        r.value().abs() <= COINCIDENCE_TOL
    }
}

/// Exact polynomial in `z` with rational-or-float coefficients, lowest
/// degree first. Used as an independent check on pole orders.
#[derive(Clone, Debug)]
pub struct SymbolPolynomial(pub Vec<Real>);

impl SymbolPolynomial {
    /// `P_j(z) = z² − (n−1)z + λ_j`.
    pub fn laplacian(cs: &CrossSection, j: usize) -> Self {
        SymbolPolynomial(vec![
            cs.levels()[j].eigenvalue,
            Real::int(1 - cs.n() as i64),
            Real::int(1),
        ])
    }

    /// `P_j(z) P_j(z + 2)`.
    pub fn bilaplacian(cs: &CrossSection, j: usize) -> Self {
        let p = Self::laplacian(cs, j);
        p.mul(&p.shift(Real::int(2)))
    }

    pub fn eval(&self, z: Real) -> Real {
        self.0.iter().rev().fold(Real::int(0), |acc, c| acc * z + *c)
    }

    pub fn derivative(&self) -> Self {
        SymbolPolynomial(
            self.0
                .iter()
                .enumerate()
                .skip(1)
                .map(|(k, c)| Real::int(k as i64) * *c)
                .collect(),
        )
    }

    /// `p(z + s)`.
    pub fn shift(&self, s: Real) -> Self {
        let mut out = SymbolPolynomial(vec![Real::int(0)]);
        let lin = SymbolPolynomial(vec![s, Real::int(1)]);
        for c in self.0.iter().rev() {
            out = out.mul(&lin);
            out.0[0] = out.0[0] + *c;
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let mut out = vec![Real::int(0); self.0.len() + other.0.len() - 1];
        for (i, a) in self.0.iter().enumerate() {
            for (k, b) in other.0.iter().enumerate() {
                out[i + k] = out[i + k] + *a * *b;
            }
        }
        SymbolPolynomial(out)
    }

    /// Number of consecutive derivatives vanishing at `z`.
    pub fn vanishing_order(&self, z: Real) -> usize {
        let mut p = self.clone();
        let mut order = 0;
        while p.0.len() > 1 && is_negligible(&p.eval(z)) {
            order += 1;
            p = p.derivative();
        }
        order
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::TAU;

    fn locs(cat: &PoleCatalog, j: usize) -> Vec<(f64, u8)> {
        cat.for_mode(j).map(|p| (p.rho.value(), p.order)).collect()
    }

    #[test]
    fn double_pole_at_zero_in_dimension_two() {
        let cs = CrossSection::circle(TAU, 3).unwrap();
        let cat = compute_poles(&cs);
        assert_eq!(locs(&cat, 0), vec![(0.0, 2)]);
        for j in 1..=3 {
            let (qp, qm) = pole_pair(&cs, j);
            // integer roots of z^2 + λ_j
            assert_eq!(qp.exact().unwrap(), (j as i64).into());
            assert_eq!(qm.exact().unwrap(), (-(j as i64)).into());
            assert_eq!(locs(&cat, j), vec![(j as f64, 1), (-(j as f64), 1)]);
        }
    }

    #[test]
    fn simple_poles_in_dimension_four() {
        let cs = CrossSection::sphere(3, 2).unwrap();
        let cat = compute_poles(&cs);
        assert_eq!(locs(&cat, 0), vec![(2.0, 1), (0.0, 1)]);
    }

    #[test]
    fn catalog_sorted_and_symmetric() {
        for cs in [
            CrossSection::circle(TAU, 5).unwrap(),
            CrossSection::sphere(2, 5).unwrap(),
            CrossSection::sphere(4, 3).unwrap(),
            CrossSection::raw(2, &[0.0, -0.75, -2.0], &[1, 2, 1]).unwrap(),
        ] {
            let cat = compute_poles(&cs);
            for w in cat.entries.windows(2) {
                assert!(w[0].rho.value() >= w[1].rho.value());
            }
            for j in 0..cs.num_levels() {
                let (qp, qm) = pole_pair(&cs, j);
                let sum = qp + qm;
                assert!(sum.coincides(&Real::int(cs.n() as i64 - 1)));
                if sum.is_exact() {
                    assert_eq!(sum.exact().unwrap(), (cs.n() as i64 - 1).into());
                }
            }
        }
    }

    #[test]
    fn bilaplacian_double_poles_dimension_two() {
        let cs = CrossSection::circle(TAU, 4).unwrap();
        let bi = compute_bilaplacian_poles(&compute_poles(&cs)).unwrap();
        assert_eq!(locs(&bi, 0), vec![(0.0, 2), (-2.0, 2)]);
        let m1 = locs(&bi, 1);
        assert_eq!(m1, vec![(1.0, 1), (-1.0, 2), (-3.0, 1)]);
        let merged = bi.for_mode(1).find(|p| p.order == 2).unwrap();
        assert_eq!(merged.origin, PoleOrigin::Merged);
    }

    #[test]
    fn bilaplacian_double_pole_dimension_four() {
        let cs = CrossSection::sphere(3, 3).unwrap();
        let bi = compute_bilaplacian_poles(&compute_poles(&cs)).unwrap();
        assert_eq!(locs(&bi, 0), vec![(2.0, 1), (0.0, 2), (-2.0, 1)]);
        // dim B >= 5: all simple
        let cs5 = CrossSection::sphere(4, 4).unwrap();
        let bi5 = compute_bilaplacian_poles(&compute_poles(&cs5)).unwrap();
        assert!(bi5.entries.iter().all(|p| p.order == 1));
    }

    #[test]
    fn dimension_three_double_pole_needs_three_quarters() {
        let cs = CrossSection::raw(2, &[0.0, -0.75], &[1, 1]).unwrap();
        let bi = compute_bilaplacian_poles(&compute_poles(&cs)).unwrap();
        let d: Vec<_> = bi.entries.iter().filter(|p| p.order == 2).collect();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].rho.value(), -0.5);
        assert_eq!(d[0].mode, 1);
    }

    #[test]
    fn orders_match_polynomial_vanishing() {
        for cs in [
            CrossSection::circle(TAU, 6).unwrap(),
            CrossSection::sphere(2, 4).unwrap(),
            CrossSection::sphere(3, 4).unwrap(),
            CrossSection::raw(2, &[0.0, -0.75], &[1, 1]).unwrap(),
        ] {
            let bi = compute_bilaplacian_poles(&compute_poles(&cs)).unwrap();
            for p in &bi.entries {
                let poly = SymbolPolynomial::bilaplacian(&cs, p.mode);
                assert_eq!(poly.vanishing_order(p.rho), p.order as usize, "{p:?}");
            }
        }
    }

    #[test]
    fn apply_symbol_examples() {
        let cs = CrossSection::circle(TAU, 3).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); cs.num_modes()];
        let at0 = apply_symbol(Complex64::new(0.0, 0.0), &ones, &cs).unwrap();
        for (m, v) in at0.iter().enumerate() {
            assert_eq!(v.re, cs.eigenvalue(cs.level_of_mode(m)));
        }
        let mut unit = vec![Complex64::new(0.0, 0.0); cs.num_modes()];
        unit[1] = Complex64::new(1.0, 0.0);
        let (qp, _) = pole_pair(&cs, 1);
        let r = apply_symbol(Complex64::new(qp.value(), 0.0), &unit, &cs).unwrap();
        assert!(r.iter().all(|c| c.norm() == 0.0));
    }

    #[test]
    fn invert_symbol_examples() {
        let cs = CrossSection::circle(TAU, 2).unwrap();
        let mut unit = vec![Complex64::new(0.0, 0.0); cs.num_modes()];
        unit[0] = Complex64::new(1.0, 0.0);
        // n = 1: z = i, factors (i)(i) = -1
        let r = invert_symbol(Complex64::new(0.0, 1.0), &unit, &cs).unwrap();
        assert!((r[0] - Complex64::new(-1.0, 0.0)).norm() < 1e-15);
        assert!(matches!(
            invert_symbol(Complex64::new(0.0, 0.0), &unit, &cs),
            Err(Error::PoleProximity { .. })
        ));
    }

    #[test]
    fn symbolic_laplacian_examples() {
        let cs = CrossSection::circle(TAU, 2).unwrap();
        let log = AsymptoticTerm::monomial(Real::int(0), 1, 0);
        assert!(symbolic_laplacian(&log, &cs).unwrap().is_empty());

        let sq = AsymptoticTerm::monomial(Real::int(2), 0, 0);
        let r = symbolic_laplacian(&sq, &cs).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].exponent.value(), 0.0);
        assert_eq!(r[0].coefficient.exact().unwrap(), 4.into());

        // (x log x)'' + (x log x)'/x - x log x / x^2 = 2/x
        let xl = AsymptoticTerm::monomial(Real::int(1), 1, 1);
        let r = symbolic_laplacian(&xl, &cs).unwrap();
        assert_eq!(r.len(), 1);
        assert_eq!(r[0].log_power, 0);
        assert_eq!(r[0].exponent.value(), -1.0);
        assert_eq!(r[0].coefficient.exact().unwrap(), 2.into());

        let bad = AsymptoticTerm::monomial(Real::int(1), 2, 1);
        assert!(matches!(symbolic_laplacian(&bad, &cs), Err(Error::UnsupportedLogPower(2))));
    }

    #[test]
    fn symbolic_laplacian_matches_radial_derivatives_in_higher_dimension() {
        // Δ = ∂_x² + (n/x)∂_x + x^{-2}Δ_∂ on x^a log x, checked by finite differences
        let cs = CrossSection::sphere(3, 2).unwrap();
        let term = AsymptoticTerm::monomial(Real::frac(3, 2), 1, 1);
        let img = symbolic_laplacian(&term, &cs).unwrap();
        let n = cs.n() as f64;
        let x = 0.37;
        let h = 1e-4;
        let f = |x: f64| term.eval(x);
        let d1 = (f(x + h) - f(x - h)) / (2.0 * h);
        let d2 = (f(x + h) - 2.0 * f(x) + f(x - h)) / (h * h);
        let direct = d2 + n / x * d1 + cs.eigenvalue(1) * f(x) / (x * x);
        let sym: f64 = img.iter().map(|t| t.eval(x)).sum();
        assert!((direct - sym).abs() < 1e-5 * sym.abs().max(1.0), "{direct} vs {sym}");
    }

    #[test]
    fn harmonic_exponents_in_dimension_four() {
        // r^{-2} is harmonic in R^4: a = -q_0^+ = -2
        let cs = CrossSection::sphere(3, 1).unwrap();
        let (qp, qm) = pole_pair(&cs, 0);
        for q in [qp, qm] {
            let t = AsymptoticTerm::monomial(-q, 0, 0);
            assert!(symbolic_laplacian(&t, &cs).unwrap().is_empty());
        }
    }
}
