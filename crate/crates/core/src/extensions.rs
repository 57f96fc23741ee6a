//! Closed extensions of the cone Laplacian and the induced bilaplacian domain.
//!
//! The extension `Δ̲` is fixed by a weight `γ` inside a dimension-dependent
//! window and by subspace choices at the poles in `I_γ`. The bilaplacian
//! domain `{u ∈ D(Δ̲) : Δu ∈ D(Δ̲)}` is built operationally from asymptotic
//! monomials and then reconciled with its direct-sum description. Finally
//! the domain is turned into per-mode Robin exponents for the solver.

use std::cmp::Ordering;

use serde::Serialize;

use crate::cone_symbol::{
    compute_bilaplacian_poles, compute_poles, pole_pair, radial_polynomial, symbolic_laplacian, AsymptoticTerm,
    Pole, PoleCatalog, SourceOperator,
};
use crate::cross_section::CrossSection;
use crate::error::{Error, Result};
use crate::exact::{Real, COINCIDENCE_TOL};

/// `ε̄ = −q_1^−`.
pub fn epsilon_bar(cs: &CrossSection) -> Result<f64> {
    if cs.num_levels() < 2 {
        return Err(Error::InvalidInput(
            "epsilon_bar needs at least two eigenvalue levels".into(),
        ));
    }
    Ok(-pole_pair(cs, 1).1.value())
}

/// Open weight window for the extension choices in each dimension.
pub fn weight_window(n: usize, epsilon_bar: f64) -> Result<(f64, f64)> {
    if n < 1 {
        return Err(Error::InvalidInput("n must be at least 1".into()));
    }
    if !(epsilon_bar > 0.0) {
        return Err(Error::InvalidInput(format!(
            "epsilon_bar must be positive, got {epsilon_bar}"
        )));
    }
    let nf = n as f64;
    Ok(match n {
        1 => (-1.0, (-1.0 + epsilon_bar).min(1.0)),
        2 => (-0.5, (-0.5 + epsilon_bar).min(1.5)),
        _ => {
            let lo = (nf - 3.0) / 2.0;
            (lo, (lo + epsilon_bar).min((nf + 1.0) / 2.0))
        }
    })
}

/// Window midpoint.
pub fn default_gamma(cs: &CrossSection) -> Result<f64> {
    let (lo, hi) = weight_window(cs.n(), epsilon_bar(cs)?)?;
    Ok(0.5 * (lo + hi))
}

fn half_dim(n: usize) -> Real {
    Real::frac(n as i64 + 1, 2)
}

/// `(n+1)/2 − γ − 2`, `(n+1)/2 − γ`.
fn i_gamma_bounds(gamma: Real, n: usize) -> (Real, Real) {
    let upper = half_dim(n) - gamma;
    (upper - Real::int(2), upper)
}

fn strictly_inside(x: &Real, lo: &Real, hi: &Real) -> bool {
    lo.lt_strict(x) && x.lt_strict(hi)
}

/// `I_γ = {q_j^±} ∩ ((n+1)/2 − γ − 2, (n+1)/2 − γ)`. Fails when a pole sits
/// on the lower endpoint, since then the minimal domain is not
/// `H^{2,2+γ}`.
pub fn interval_i(gamma: f64, n: usize, catalog: &PoleCatalog) -> Result<Vec<Pole>> {
    if catalog.source != SourceOperator::Laplacian {
        return Err(Error::InvalidInput("I_gamma is defined on the Laplacian catalog".into()));
    }
    let (lo, hi) = i_gamma_bounds(Real::snap(gamma), n);
    if let Some(p) = catalog.entries.iter().find(|p| p.rho.coincides(&lo)) {
        return Err(Error::EndpointCollision {
            pole: p.rho.value(),
            mode: p.mode,
            endpoint: lo.value(),
        });
    }
    Ok(catalog
        .entries
        .iter()
        .filter(|p| strictly_inside(&p.rho, &lo, &hi))
        .cloned()
        .collect())
}

fn same_pole(a: &Pole, b: &Pole) -> bool {
    a.mode == b.mode && a.rho.coincides(&b.rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    /// The whole asymptotics space of the pole.
    Full,
    Zero,
    /// `E_00 = ω ⊗ E_0`: constants only, at the double pole `0` when `dim B = 2`.
    Constants,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SelectionRule {
    /// Pole in `I_γ ∩ I_{−γ}`: paired with its reflection `(n−1) − q`.
    Duality,
    /// `γ ≥ 0`, pole in `I_γ ∖ I_{−γ}`.
    KeepAll,
    /// `γ ≤ 0`, pole in `I_γ ∖ I_{−γ}`.
    DropAll,
}

#[derive(Clone, Debug, Serialize)]
pub struct SelectedPole {
    pub pole: Pole,
    pub selection: Selection,
    pub rule: SelectionRule,
}

impl SelectedPole {
    /// Largest admissible log power for this selection, if any.
    fn log_powers(&self) -> Option<u32> {
        match self.selection {
            Selection::Zero => None,
            Selection::Constants => Some(0),
            Selection::Full => Some(self.pole.order as u32 - 1),
        }
    }

    /// Dimension per eigenfunction of `E_j` (multiplied by `m_j` for the
    /// actual subspace).
    pub fn dimension_factor(&self) -> usize {
        match self.selection {
            Selection::Zero => 0,
            Selection::Constants => 1,
            Selection::Full => self.pole.order as usize,
        }
    }
}

/// Asymptotic functions added to `D(Δ̲²)` at a pole `rho` of level `mode`.
#[derive(Clone, Debug, Serialize)]
pub struct Addon {
    pub rho: Real,
    pub mode: usize,
    pub order: u8,
    /// Carried over from `D(Δ̲)` rather than produced by a pole in `J`.
    pub carried: bool,
    pub basis: Vec<Vec<AsymptoticTerm>>,
    /// Candidate directions excluded because their Laplacian leaves `D(Δ̲)`.
    pub rejected: usize,
}

impl Addon {
    /// Exponent of the leading (non-log) term.
    pub fn leading_exponent(&self) -> Real {
        -self.rho
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RobinExponents {
    pub mode: usize,
    /// `x∂_x u = a u` at the truncated tip.
    pub u: Real,
    /// `x∂_x (Δu) = b (Δu)`.
    pub lap: Real,
    /// Exponent for the second-order problem on `D(Δ̲)` alone.
    pub second_order: Real,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExtensionSpec {
    pub gamma: f64,
    pub p: f64,
    pub n: usize,
    pub epsilon_bar: f64,
    pub window: (f64, f64),
    pub i_gamma: Vec<Pole>,
    pub i_gamma_dual: Vec<Pole>,
    pub selected: Vec<SelectedPole>,
    pub j_interval: (f64, f64),
    pub bilaplacian_addons: Vec<Addon>,
    pub inner_bc: Vec<RobinExponents>,
    pub completed: bool,
    #[serde(skip)]
    gamma_exact: Real,
}

impl ExtensionSpec {
    pub fn gamma_real(&self) -> Real {
        self.gamma_exact
    }

    /// Whether `x^a log^l x ⊗ e_j` (cut off near the tip) lies in `D(Δ̲)`.
    pub fn in_laplacian_domain(&self, a: Real, log_power: u32, mode: usize) -> bool {
        let threshold = self.gamma_exact + Real::int(2) - half_dim(self.n);
        if threshold.lt_strict(&a) {
            return true;
        }
        self.selected.iter().any(|s| {
            s.pole.mode == mode
                && a.coincides(&(-s.pole.rho))
                && s.log_powers().is_some_and(|max| log_power <= max)
        })
    }

    pub fn terms_in_laplacian_domain(&self, terms: &[AsymptoticTerm]) -> bool {
        terms
            .iter()
            .all(|t| self.in_laplacian_domain(t.exponent, t.log_power, t.mode))
    }

    /// Whether `x^a ⊗ e_j` is admissible near the tip for `D(Δ̲²)`.
    pub fn in_bilaplacian_domain(&self, a: Real, mode: usize) -> bool {
        let threshold = self.gamma_exact + Real::int(4) - half_dim(self.n);
        if threshold.lt_strict(&a) {
            return true;
        }
        self.bilaplacian_addons
            .iter()
            .filter(|ad| ad.mode == mode)
            .flat_map(|ad| ad.basis.iter())
            .flat_map(|f| f.iter())
            .any(|t| t.log_power == 0 && t.exponent.coincides(&a))
    }

    pub fn robin(&self, level: usize) -> &RobinExponents {
        let idx = level.min(self.inner_bc.len() - 1);
        &self.inner_bc[idx]
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("extension spec serializes")
    }
}

/// Subspace choices at the poles of `I_γ` following the duality,
/// keep-all (`γ ≥ 0`) and drop-all (`γ ≤ 0`) rules. Within a dual pair
/// `(q, (n−1)−q)` the full space goes to the smaller pole.
pub fn apply_selection_rules(gamma: f64, n: usize, catalog: &PoleCatalog) -> Result<(Vec<Pole>, Vec<Pole>, Vec<SelectedPole>)> {
    let i_g = interval_i(gamma, n, catalog)?;
    let (lo, hi) = i_gamma_bounds(-Real::snap(gamma), n);
    let dual: Vec<Pole> = i_g
        .iter()
        .filter(|p| strictly_inside(&p.rho, &lo, &hi))
        .cloned()
        .collect();
    let center = Real::frac(n as i64 - 1, 2);
    let mut selected = Vec::with_capacity(i_g.len());
    for p in &i_g {
        let in_dual = dual.iter().any(|d| same_pole(d, p));
        let (selection, rule) = if in_dual {
            let sel = if n == 1 && p.mode == 0 {
                Selection::Constants
            } else if p.rho.cmp_tol(&center) != Ordering::Greater {
                Selection::Full
            } else {
                Selection::Zero
            };
            (sel, SelectionRule::Duality)
        } else if gamma >= 0.0 {
            (Selection::Full, SelectionRule::KeepAll)
        } else {
            (Selection::Zero, SelectionRule::DropAll)
        };
        selected.push(SelectedPole {
            pole: p.clone(),
            selection,
            rule,
        });
    }
    Ok((i_g, dual, selected))
}

/// The extension `Δ̲` for weight `γ`: minimal domain plus `E_00`
/// (`dim B = 2`) or the constants `E_0` of `q_0^− = 0` otherwise.
pub fn select_extension(gamma: f64, p: f64, cs: &CrossSection) -> Result<ExtensionSpec> {
    if !(p > 1.0) {
        return Err(Error::InvalidInput(format!("p must exceed 1, got {p}")));
    }
    let n = cs.n();
    let eps = epsilon_bar(cs)?;
    let window = weight_window(n, eps)?;
    let catalog = compute_poles(cs);
    let (i_gamma, i_gamma_dual, selected) = apply_selection_rules(gamma, n, &catalog)?;
    if !(gamma > window.0 && gamma < window.1) {
        return Err(Error::WeightOutsideWindow {
            gamma,
            lo: window.0,
            hi: window.1,
        });
    }
    let g = Real::snap(gamma);
    let jl = half_dim(n) - g - Real::int(4);
    let jh = half_dim(n) - g - Real::int(2);
    Ok(ExtensionSpec {
        gamma,
        p,
        n,
        epsilon_bar: eps,
        window,
        i_gamma,
        i_gamma_dual,
        selected,
        j_interval: (jl.value(), jh.value()),
        bilaplacian_addons: Vec::new(),
        inner_bc: Vec::new(),
        completed: false,
        gamma_exact: g,
    })
}

/// Null space of a small dense matrix (rows × cols) by Gauss-Jordan.
fn null_space(rows: &[Vec<f64>], cols: usize) -> Vec<Vec<f64>> {
    let mut m: Vec<Vec<f64>> = rows.to_vec();
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        let Some(piv) = (r..m.len()).max_by(|&a, &b| m[a][c].abs().total_cmp(&m[b][c].abs())) else {
            break;
        };
        if m[piv][c].abs() <= COINCIDENCE_TOL {
            continue;
        }
        m.swap(r, piv);
        let d = m[r][c];
        m[r].iter_mut().for_each(|v| *v /= d);
        for i in 0..m.len() {
            if i != r {
                let f = m[i][c];
                if f != 0.0 {
                    for k in 0..cols {
                        m[i][k] -= f * m[r][k];
                    }
                }
            }
        }
        pivots.push(c);
        r += 1;
        if r == m.len() {
            break;
        }
    }
    let free: Vec<usize> = (0..cols).filter(|c| !pivots.contains(c)).collect();
    free.iter()
        .map(|&f| {
            let mut v = vec![0.0; cols];
            v[f] = 1.0;
            for (row, &pc) in pivots.iter().enumerate() {
                v[pc] = -m[row][f];
            }
            v
        })
        .collect()
}

/// Build `D(Δ̲²)` from `{u ∈ D(Δ̲) : Δu ∈ D(Δ̲)}` on the asymptotic
/// monomials of each bilaplacian pole in `J`, then reconcile with the
/// direct-sum form `D(Δ²_min) ⊕ ⨁_{ρ∈J} Ẽ_ρ ⊕ E_0`.
pub fn bilaplacian_domain(spec: &ExtensionSpec, cs: &CrossSection) -> Result<ExtensionSpec> {
    let lap = compute_poles(cs);
    let bi = compute_bilaplacian_poles(&lap)?;
    let g = spec.gamma_exact;
    let jl = half_dim(spec.n) - g - Real::int(4);
    let jh = half_dim(spec.n) - g - Real::int(2);

    let mut addons = Vec::new();
    for pole in bi.entries.iter().filter(|p| strictly_inside(&p.rho, &jl, &jh)) {
        let a = -pole.rho;
        let candidates: Vec<AsymptoticTerm> = (0..pole.order as u32)
            .map(|l| AsymptoticTerm::monomial(a, l, pole.mode))
            .collect();
        for c in &candidates {
            if !spec.in_laplacian_domain(c.exponent, c.log_power, c.mode) {
                return Err(Error::InconsistentDomain(format!(
                    "candidate x^{} log^{} x (mode {}) is not in D(Δ̲)",
                    c.exponent, c.log_power, c.mode
                )));
            }
        }
        // constraints: coefficients of Δ-image monomials outside D(Δ̲) vanish
        let images: Vec<Vec<AsymptoticTerm>> = candidates
            .iter()
            .map(|c| symbolic_laplacian(c, cs))
            .collect::<Result<_>>()?;
        let mut monomials: Vec<(Real, u32)> = Vec::new();
        for img in &images {
            for t in img {
                if !spec.in_laplacian_domain(t.exponent, t.log_power, t.mode)
                    && !monomials.iter().any(|(e, l)| *l == t.log_power && e.coincides(&t.exponent))
                {
                    monomials.push((t.exponent, t.log_power));
                }
            }
        }
        let rows: Vec<Vec<f64>> = monomials
            .iter()
            .map(|(e, l)| {
                images
                    .iter()
                    .map(|img| {
                        img.iter()
                            .filter(|t| t.log_power == *l && t.exponent.coincides(e))
                            .map(|t| t.coefficient.value())
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let kernel = null_space(&rows, candidates.len());
        let basis: Vec<Vec<AsymptoticTerm>> = kernel
            .iter()
            .map(|v| {
                candidates
                    .iter()
                    .zip(v)
                    .filter(|(_, c)| c.abs() > COINCIDENCE_TOL)
                    .map(|(t, c)| AsymptoticTerm {
                        coefficient: Real::snap(*c),
                        ..t.clone()
                    })
                    .collect()
            })
            .collect();
        addons.push(Addon {
            rho: pole.rho,
            mode: pole.mode,
            order: pole.order,
            carried: false,
            rejected: candidates.len() - basis.len(),
            basis,
        });
    }

    // asymptotics of D(Δ̲) itself: harmonic, hence kept
    for s in &spec.selected {
        let Some(max_l) = s.log_powers() else { continue };
        let mut basis = Vec::new();
        for l in 0..=max_l {
            let f = AsymptoticTerm::monomial(-s.pole.rho, l, s.pole.mode);
            let img = symbolic_laplacian(&f, cs)?;
            if spec.terms_in_laplacian_domain(&img) {
                basis.push(vec![f]);
            }
        }
        addons.push(Addon {
            rho: s.pole.rho,
            mode: s.pole.mode,
            order: s.pole.order,
            carried: true,
            rejected: (max_l as usize + 1) - basis.len(),
            basis,
        });
    }

    reconcile(&addons, spec, cs)?;

    let mut out = spec.clone();
    out.j_interval = (jl.value(), jh.value());
    out.bilaplacian_addons = addons;
    out.inner_bc = inner_boundary_conditions(&out, cs);
    out.completed = true;
    Ok(out)
}

/// A pole in `J` must keep its leading monomial whenever that monomial is
/// harmonic or its Laplacian `x^{−ρ−2}` lies in `D(Δ̲)`; no pole keeps more
/// than its order, and every kept function is annihilated by `Δ²` at the
/// level of asymptotics. Carried-over spaces must survive unchanged.
fn reconcile(addons: &[Addon], spec: &ExtensionSpec, cs: &CrossSection) -> Result<()> {
    for ad in addons {
        if ad.carried {
            let expected = spec
                .selected
                .iter()
                .find(|s| s.pole.mode == ad.mode && s.pole.rho.coincides(&ad.rho))
                .map(|s| s.dimension_factor())
                .unwrap_or(0);
            if ad.basis.len() != expected {
                return Err(Error::InconsistentDomain(format!(
                    "carried space at {} (mode {}) has dimension {} instead of {}",
                    ad.rho,
                    ad.mode,
                    ad.basis.len(),
                    expected
                )));
            }
            continue;
        }
        if ad.basis.len() > ad.order as usize {
            return Err(Error::InconsistentDomain(format!(
                "pole {} (mode {}, order {}) contributes {} functions",
                ad.rho,
                ad.mode,
                ad.order,
                ad.basis.len()
            )));
        }
        let a = ad.leading_exponent();
        let required = radial_polynomial(cs, ad.mode, a).is_zero()
            || spec.in_laplacian_domain(a - Real::int(2), 0, ad.mode);
        let leading = ad
            .basis
            .iter()
            .flatten()
            .any(|t| t.log_power == 0 && t.exponent.coincides(&ad.leading_exponent()));
        if required && !leading {
            return Err(Error::InconsistentDomain(format!(
                "pole {} (mode {}) lost its leading monomial",
                ad.rho, ad.mode
            )));
        }
        for f in &ad.basis {
            let mut once = Vec::new();
            for t in f {
                once.extend(symbolic_laplacian(t, cs)?);
            }
            let mut twice = Vec::new();
            for t in &once {
                twice.extend(symbolic_laplacian(t, cs)?);
            }
            let residual: f64 = twice.iter().map(|t| t.coefficient.value().abs()).sum();
            if residual > COINCIDENCE_TOL {
                return Err(Error::InconsistentDomain(format!(
                    "Δ² does not annihilate the addon at {} (mode {})",
                    ad.rho, ad.mode
                )));
            }
        }
    }
    Ok(())
}

/// Robin exponents at the truncated tip, one triple per level.
///
/// `u` is the smallest exponent of the biharmonic model kernel admissible in
/// `D(Δ̲²)`; `lap` is the leading exponent of `Δu` (for a harmonic leading
/// term, the smallest harmonic exponent admissible in `D(Δ̲)`);
/// `second_order` is the smallest harmonic exponent admissible in `D(Δ̲)`.
pub fn inner_boundary_conditions(spec: &ExtensionSpec, cs: &CrossSection) -> Vec<RobinExponents> {
    let g = spec.gamma_exact;
    let t4 = g + Real::int(4) - half_dim(spec.n);
    let t2 = g + Real::int(2) - half_dim(spec.n);
    let by_value = |a: &Real, b: &Real| a.cmp_tol(b);
    (0..cs.num_levels())
        .map(|j| {
            let (qp, qm) = pole_pair(cs, j);
            let mut harmonic = vec![-qp, -qm];
            harmonic.sort_by(by_value);
            let mut kernel = vec![-qp, -qm, Real::int(2) - qp, Real::int(2) - qm];
            for ad in spec.bilaplacian_addons.iter().filter(|a| a.mode == j) {
                kernel.push(ad.leading_exponent());
            }
            kernel.sort_by(by_value);

            let fallback4 = if (-qm).cmp_tol(&t4) == Ordering::Greater { -qm } else { t4 };
            let u = kernel
                .iter()
                .copied()
                .find(|a| spec.in_bilaplacian_domain(*a, j))
                .unwrap_or(fallback4);
            let fallback2 = if (-qm).cmp_tol(&t2) == Ordering::Greater { -qm } else { t2 };
            let second_order = harmonic
                .iter()
                .copied()
                .find(|a| spec.in_laplacian_domain(*a, 0, j))
                .unwrap_or(fallback2);
            let lap = if radial_polynomial(cs, j, u).coincides(&Real::int(0)) {
                second_order
            } else {
                u - Real::int(2)
            };
            RobinExponents {
                mode: j,
                u,
                lap,
                second_order,
            }
        })
        .collect()
}

/// Full pipeline: select, build `D(Δ̲²)`, derive Robin exponents.
pub fn complete_extension(gamma: f64, p: f64, cs: &CrossSection) -> Result<ExtensionSpec> {
    let spec = select_extension(gamma, p, cs)?;
    bilaplacian_domain(&spec, cs)
}

/// Checks the duality rule on `I_γ ∩ I_{−γ}`: selected dimensions of a
/// pole and its reflection add up to `dim E_j`, and `E_00` is self-dual.
pub fn verify_duality(spec: &ExtensionSpec, cs: &CrossSection) -> Result<()> {
    let center2 = Real::int(spec.n as i64 - 1);
    for s in spec.selected.iter().filter(|s| s.rule == SelectionRule::Duality) {
        if s.selection == Selection::Constants {
            if !(spec.n == 1 && s.pole.mode == 0) {
                return Err(Error::InconsistentDomain("E_00 outside dim B = 2".into()));
            }
            continue;
        }
        let reflected = center2 - s.pole.rho;
        let partner = spec
            .selected
            .iter()
            .find(|o| o.pole.mode == s.pole.mode && o.pole.rho.coincides(&reflected))
            .ok_or_else(|| Error::InconsistentDomain(format!("no dual partner for {}", s.pole.rho)))?;
        let m = cs.multiplicity(s.pole.mode);
        let dim = |x: &SelectedPole| x.dimension_factor() * m;
        if dim(s) + dim(partner) != m {
            return Err(Error::InconsistentDomain(format!(
                "dual dimensions {} + {} != {}",
                dim(s),
                dim(partner),
                m
            )));
        }
    }
    Ok(())
}

pub fn laplacian_catalog(cs: &CrossSection) -> PoleCatalog {
    compute_poles(cs)
}
