//! Mode-diagonal discretisations of `Δ` and `Δ²` on the log-radial grid,
//! the gradient pairing and the Cahn-Hilliard splitting `A(u)u − F(u)`.
//!
//! In `t = −ln x`, mode `j` of the Laplacian is
//! `e^{2t}(∂_t² − (n−1)∂_t + λ_j) = s(t) ∂_t(c(t) ∂_t) + λ_j e^{2t}` with
//! `c = e^{−(n−1)t}`, `s = e^{(n+1)t}`. The flux form is discretised with
//! half-node coefficients, which makes the operator self-adjoint for the
//! volume weights `w_i ≈ Δt/s_i` and keeps mode-0 mass exactly balanced.
//! Node `0` (`x = 1`) carries a Neumann ghost, node `N` an exponential ghost
//! `u_{N+1} = e^{−aΔt}u_N` that is exact for `x^a`.

use rayon::prelude::*;

use crate::banded::BandMatrix;
use crate::cross_section::ModalTransform;
use crate::error::{Error, Result};
use crate::extensions::ExtensionSpec;
use crate::mellin::{diff_t, ConeGrid, FieldState};

/// Three-point flux stencil of one mode Laplacian. Applying it through the
/// differences `u_{i±1} − u_i` keeps constants in the kernel bit-for-bit.
#[derive(Clone, Debug)]
pub struct FluxStencil {
    /// `s_i c_{i+½}/Δt²`, `s_i c_{i−½}/Δt²`.
    up: Vec<f64>,
    down: Vec<f64>,
    /// `λ e^{2t_i}`.
    potential: Vec<f64>,
    /// `e^{−aΔt} − 1`: the tip ghost relative to `u_N`.
    ghost: f64,
}

impl FluxStencil {
    pub fn new(lambda: f64, a: f64, grid: &ConeGrid) -> Self {
        let n = grid.n() as f64;
        let dt = grid.dt;
        let c = |tt: f64| (-(n - 1.0) * tt).exp();
        let t = grid.t_nodes();
        let mut up = Vec::with_capacity(t.len());
        let mut down = Vec::with_capacity(t.len());
        for (i, ti) in t.iter().enumerate() {
            let s = ((n + 1.0) * ti).exp() / (dt * dt);
            let cp = c(ti + 0.5 * dt);
            // Neumann ghost u_{−1} = u_1 mirrors the first flux
            let cm = if i == 0 { cp } else { c(ti - 0.5 * dt) };
            up.push(s * cp);
            down.push(s * cm);
        }
        FluxStencil {
            up,
            down,
            potential: t.iter().map(|ti| lambda * (2.0 * ti).exp()).collect(),
            ghost: (-a * dt).exp_m1(),
        }
    }

    pub fn apply_into(&self, u: &[f64], out: &mut [f64]) {
        let last = u.len() - 1;
        for i in 0..=last {
            let fwd = if i == last { self.ghost * u[i] } else { u[i + 1] - u[i] };
            let bwd = if i == 0 { u[i] - u[1] } else { u[i] - u[i - 1] };
            out[i] = self.up[i] * fwd - self.down[i] * bwd + self.potential[i] * u[i];
        }
    }

    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; u.len()];
        self.apply_into(u, &mut out);
        out
    }

    pub fn matrix(&self) -> BandMatrix {
        let size = self.up.len();
        let mut m = BandMatrix::zeros(size, 1, 1);
        for i in 0..size {
            let mut diag = -self.down[i] + self.potential[i];
            if i == 0 {
                m.set(0, 1, self.up[0] + self.down[0]);
                diag -= self.up[0];
            } else if i == size - 1 {
                m.set(i, i - 1, self.down[i]);
                diag += self.up[i] * self.ghost;
            } else {
                m.set(i, i - 1, self.down[i]);
                m.set(i, i + 1, self.up[i]);
                diag -= self.up[i];
            }
            m.set(i, i, diag);
        }
        m
    }
}

#[derive(Clone, Debug)]
pub struct ModeOperator {
    pub mode: usize,
    pub level: usize,
    /// 2 for `Δ`, 4 for `Δ²`.
    pub order: u8,
    pub matrix: BandMatrix,
    /// Robin exponent(s) at the tip: `[a]` or `[a, b]`.
    pub exponents: Vec<f64>,
    /// Factors applied right to left.
    stencils: Vec<FluxStencil>,
}

impl ModeOperator {
    /// Applies the operator through its flux stencils.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let mut cur = v.to_vec();
        let mut next = vec![0.0; v.len()];
        for st in &self.stencils {
            st.apply_into(&cur, &mut next);
            std::mem::swap(&mut cur, &mut next);
        }
        cur
    }
}

/// Volume weights `∫ f x^n dx ≈ Σ w_i f_i`, halved at the Neumann node.
pub fn radial_weights(grid: &ConeGrid) -> Vec<f64> {
    let n = grid.n() as f64;
    grid.t_nodes()
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let w = grid.dt * (-(n + 1.0) * t).exp();
            if i == 0 {
                0.5 * w
            } else {
                w
            }
        })
        .collect()
}

/// Tridiagonal mode-`λ` Laplacian with tip exponent `a`.
pub fn laplacian_matrix(lambda: f64, a: f64, grid: &ConeGrid) -> BandMatrix {
    FluxStencil::new(lambda, a, grid).matrix()
}

fn level_and_lambda(m: usize, grid: &ConeGrid) -> (usize, f64) {
    let cs = grid.cross_section();
    let j = cs.level_of_mode(m);
    (j, cs.eigenvalue(j))
}

fn second_order_operator(m: usize, j: usize, lambda: f64, a: f64, grid: &ConeGrid) -> ModeOperator {
    let st = FluxStencil::new(lambda, a, grid);
    ModeOperator {
        mode: m,
        level: j,
        order: 2,
        matrix: st.matrix(),
        exponents: vec![a],
        stencils: vec![st],
    }
}

/// Mode-`m` Laplacian with the inner exponent `a_j` of the spec.
pub fn assemble_laplacian(m: usize, grid: &ConeGrid, spec: &ExtensionSpec) -> ModeOperator {
    let (j, lambda) = level_and_lambda(m, grid);
    second_order_operator(m, j, lambda, spec.robin(j).u.value(), grid)
}

/// Mode-`m` Laplacian for the second-order problem on `D(Δ̲)`.
pub fn assemble_second_order(m: usize, grid: &ConeGrid, spec: &ExtensionSpec) -> ModeOperator {
    let (j, lambda) = level_and_lambda(m, grid);
    second_order_operator(m, j, lambda, spec.robin(j).second_order.value(), grid)
}

/// `Δ_j ∘ Δ_j` with the inner field under exponent `a_j` and the
/// intermediate `Δu` under `b_j`; pentadiagonal.
pub fn assemble_bilaplacian(m: usize, grid: &ConeGrid, spec: &ExtensionSpec) -> ModeOperator {
    let (j, lambda) = level_and_lambda(m, grid);
    let r = spec.robin(j);
    let (a, b) = (r.u.value(), r.lap.value());
    let inner = FluxStencil::new(lambda, a, grid);
    let outer = FluxStencil::new(lambda, b, grid);
    ModeOperator {
        mode: m,
        level: j,
        order: 4,
        matrix: outer.matrix().mul(&inner.matrix()),
        exponents: vec![a, b],
        stencils: vec![inner, outer],
    }
}

/// All mode operators for one grid and extension.
#[derive(Clone, Debug)]
pub struct Operators {
    pub lap: Vec<ModeOperator>,
    pub bilap: Vec<ModeOperator>,
    pub second_order: Vec<ModeOperator>,
    pub weights: Vec<f64>,
}

impl Operators {
    pub fn new(grid: &ConeGrid, spec: &ExtensionSpec) -> Result<Self> {
        if !spec.completed {
            return Err(Error::InvalidInput("extension spec lacks the bilaplacian domain".into()));
        }
        let modes = grid.num_modes();
        let lap = (0..modes).into_par_iter().map(|m| assemble_laplacian(m, grid, spec)).collect();
        let bilap = (0..modes).into_par_iter().map(|m| assemble_bilaplacian(m, grid, spec)).collect();
        let second_order = (0..modes)
            .into_par_iter()
            .map(|m| assemble_second_order(m, grid, spec))
            .collect();
        Ok(Operators {
            lap,
            bilap,
            second_order,
            weights: radial_weights(grid),
        })
    }

    fn apply_all(ops: &[ModeOperator], u: &FieldState) -> FieldState {
        let mut out = u.clone();
        out.coeffs = ops.par_iter().zip(&u.coeffs).map(|(op, row)| op.apply(row)).collect();
        out
    }

    pub fn laplacian(&self, u: &FieldState) -> FieldState {
        Self::apply_all(&self.lap, u)
    }

    pub fn bilaplacian(&self, u: &FieldState) -> FieldState {
        Self::apply_all(&self.bilap, u)
    }

    pub fn laplacian_second_order(&self, u: &FieldState) -> FieldState {
        Self::apply_all(&self.second_order, u)
    }

    /// Shifts mode 0 by a constant so that `Σ_i w_i f_{0,i} = 0`.
    pub fn remove_mass(&self, mut f: FieldState) -> FieldState {
        let total: f64 = self.weights.iter().sum();
        let m: f64 = f.coeffs[0].iter().zip(&self.weights).map(|(a, w)| a * w).sum();
        let shift = m / total;
        if shift != 0.0 {
            f.coeffs[0].iter_mut().for_each(|v| *v -= shift);
        }
        f
    }

    /// `Σ_m Σ_i w_i u_{m,i} v_{m,i}`: the volume `L²` pairing.
    pub fn inner(&self, u: &FieldState, v: &FieldState) -> f64 {
        let mut acc = 0.0;
        for (ru, rv) in u.coeffs.iter().zip(&v.coeffs) {
            for ((a, b), w) in ru.iter().zip(rv).zip(&self.weights) {
                acc += w * a * b;
            }
        }
        acc
    }
}

/// Physical samples at every radial node: `out[i][q]`.
pub fn to_physical(tr: &ModalTransform, u: &FieldState) -> Vec<Vec<f64>> {
    let nodes = u.num_nodes();
    (0..nodes)
        .into_par_iter()
        .map(|i| {
            let c: Vec<f64> = u.coeffs.iter().map(|row| row[i]).collect();
            let mut out = vec![0.0; tr.num_nodes];
            tr.synthesize(&c, &mut out);
            out
        })
        .collect()
}

/// Projection of physical samples back onto the retained modes.
pub fn to_modal(tr: &ModalTransform, phys: &[Vec<f64>], template: &FieldState) -> FieldState {
    let rows: Vec<Vec<f64>> = phys
        .par_iter()
        .map(|v| {
            let mut c = vec![0.0; tr.num_modes];
            tr.analyze(v, &mut c);
            c
        })
        .collect();
    let mut out = template.clone();
    for (m, row) in out.coeffs.iter_mut().enumerate() {
        for (i, v) in row.iter_mut().enumerate() {
            *v = rows[i][m];
        }
    }
    out
}

/// Pseudo-spectral workspace shared by the pairing and the nonlinearity.
#[derive(Clone, Debug)]
pub struct PseudoSpectral {
    pub transform: ModalTransform,
    grid: ConeGrid,
}

impl PseudoSpectral {
    pub fn new(grid: &ConeGrid) -> Result<Self> {
        Ok(PseudoSpectral {
            transform: ModalTransform::new(grid.cross_section())?,
            grid: grid.clone(),
        })
    }

    pub fn grid(&self) -> &ConeGrid {
        &self.grid
    }

    fn check(&self, u: &FieldState) -> Result<()> {
        u.check_grid(&self.grid)
    }

    /// `(∇u, ∇v)_g = e^{2t}[(∂_t u)(∂_t v) + ∇_∂u·∇_∂v]` projected onto the
    /// retained modes.
    pub fn pairing_physical(&self, u: &FieldState, v: &FieldState) -> Result<Vec<Vec<f64>>> {
        self.check(u)?;
        self.check(v)?;
        let tr = &self.transform;
        let dt = self.grid.dt;
        let derive = |f: &FieldState| {
            let mut d = f.clone();
            d.coeffs = f.coeffs.iter().map(|row| diff_t(row, dt)).collect();
            d
        };
        let tang = |f: &FieldState| {
            let mut d = f.clone();
            for (row, l) in d.coeffs.iter_mut().zip(&tr.lambda) {
                row.iter_mut().for_each(|v| *v *= l);
            }
            d
        };
        let (du, dv) = (derive(u), derive(v));
        let (lu, lv) = (tang(u), tang(v));
        let pu = to_physical(tr, u);
        let pv = to_physical(tr, v);
        let pdu = to_physical(tr, &du);
        let pdv = to_physical(tr, &dv);
        let plu = to_physical(tr, &lu);
        let plv = to_physical(tr, &lv);
        let t = self.grid.t_nodes();
        Ok((0..t.len())
            .into_par_iter()
            .map(|i| {
                let mut g = vec![0.0; tr.num_nodes];
                tr.tangential_pairing(&pu[i], &plu[i], &pv[i], &plv[i], &mut g);
                let e2 = (2.0 * t[i]).exp();
                g.iter()
                    .zip(&pdu[i])
                    .zip(&pdv[i])
                    .map(|((gq, a), b)| e2 * (a * b + gq))
                    .collect()
            })
            .collect())
    }

    pub fn pairing(&self, u: &FieldState, v: &FieldState) -> Result<FieldState> {
        let phys = self.pairing_physical(u, v)?;
        Ok(to_modal(&self.transform, &phys, u))
    }

    /// Pointwise product of physical fields given in modal form, projected.
    pub fn product(&self, factors: &[&FieldState]) -> Result<FieldState> {
        let first = factors
            .first()
            .ok_or_else(|| Error::InvalidInput("empty product".into()))?;
        for f in factors {
            self.check(f)?;
        }
        let mut acc = to_physical(&self.transform, first);
        for f in &factors[1..] {
            let p = to_physical(&self.transform, f);
            for (a, b) in acc.iter_mut().zip(&p) {
                a.iter_mut().zip(b).for_each(|(x, y)| *x *= y);
            }
        }
        Ok(to_modal(&self.transform, &acc, first))
    }
}

/// Single-call form of [`PseudoSpectral::pairing`].
pub fn gradient_pairing(u: &FieldState, v: &FieldState, grid: &ConeGrid) -> Result<FieldState> {
    PseudoSpectral::new(grid)?.pairing(u, v)
}

/// `A(v)` with `v` frozen: `w ↦ Δ²w + Δw − 3v²Δw`.
#[derive(Clone, Debug)]
pub struct FrozenOperator<'a> {
    ops: &'a Operators,
    ps: &'a PseudoSpectral,
    /// `3v²` at every radial node and quadrature point.
    three_v2: Vec<Vec<f64>>,
}

impl<'a> FrozenOperator<'a> {
    pub fn new(v: &FieldState, ops: &'a Operators, ps: &'a PseudoSpectral) -> Self {
        let three_v2 = to_physical(&ps.transform, v)
            .into_iter()
            .map(|row| row.into_iter().map(|x| 3.0 * x * x).collect())
            .collect();
        FrozenOperator { ops, ps, three_v2 }
    }

    /// `3v²Δw`, projected.
    pub fn coupling(&self, lap_w: &FieldState) -> FieldState {
        let mut p = to_physical(&self.ps.transform, lap_w);
        for (row, c) in p.iter_mut().zip(&self.three_v2) {
            row.iter_mut().zip(c).for_each(|(x, y)| *x *= y);
        }
        // 3v²Δw is not a discrete divergence; its mass is a truncation error
        self.ops.remove_mass(to_modal(&self.ps.transform, &p, lap_w))
    }

    pub fn apply(&self, w: &FieldState) -> FieldState {
        let lap = self.ops.laplacian(w);
        let bi = self.ops.bilaplacian(w);
        let cpl = self.coupling(&lap);
        bi.axpy(1.0, &lap).axpy(-1.0, &cpl)
    }
}

/// `F(u) = 6u(∇u, ∇u)_g`, so that `Δu³ = 3u²Δu + 6u(∇u, ∇u)_g` for the
/// Laplacian with `Δx² = 2(n + 1)`.
pub fn nonlinear_source(u: &FieldState, ps: &PseudoSpectral) -> Result<FieldState> {
    let g = ps.pairing_physical(u, u)?;
    let pu = to_physical(&ps.transform, u);
    let prod: Vec<Vec<f64>> = g
        .iter()
        .zip(&pu)
        .map(|(a, b)| a.iter().zip(b).map(|(x, y)| 6.0 * x * y).collect())
        .collect();
    Ok(to_modal(&ps.transform, &prod, u))
}

/// Frozen operator and source of the splitting `Δ²u + Δ(u − u³) = A(u)u − F(u)`.
pub fn nonlinearity<'a>(
    u: &FieldState,
    ops: &'a Operators,
    ps: &'a PseudoSpectral,
) -> Result<(FrozenOperator<'a>, FieldState)> {
    if !u.is_finite() {
        return Err(Error::InvalidInput("field has non-finite entries".into()));
    }
    Ok((FrozenOperator::new(u, ops, ps), ops.remove_mass(nonlinear_source(u, ps)?)))
}

/// `Δ²u + Δ(u − u³)` evaluated directly, the cube taken pseudo-spectrally.
pub fn ch_operator_direct(u: &FieldState, ops: &Operators, ps: &PseudoSpectral) -> Result<FieldState> {
    let cube = ps.product(&[u, u, u])?;
    let diff = u.axpy(-1.0, &cube);
    Ok(ops.bilaplacian(u).axpy(1.0, &ops.laplacian(&diff)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::CrossSection;
    use crate::extensions::complete_extension;
    use std::f64::consts::TAU;

    fn setup(dt: f64, t_max: f64) -> (ConeGrid, ExtensionSpec) {
        let cs = CrossSection::circle(TAU, 4).unwrap();
        let spec = complete_extension(-0.5, 2.0, &cs).unwrap();
        (ConeGrid::new(t_max, dt, cs).unwrap(), spec)
    }

    fn bump(t: f64, lo: f64, hi: f64) -> f64 {
        if t <= lo || t >= hi {
            return 0.0;
        }
        let r = (t - lo) / (hi - lo);
        (-1.0 / (r * (1.0 - r))).exp() * 50.0
    }

    #[test]
    fn harmonic_exponents_are_nearly_annihilated() {
        for dt in [0.02, 0.01] {
            let (g, spec) = setup(dt, 6.0);
            for m in 0..g.num_modes() {
                let op = assemble_laplacian(m, &g, &spec);
                let a = op.exponents[0];
                let u: Vec<f64> = g.t_nodes().iter().map(|t| (-a * t).exp()).collect();
                let r = op.apply(&u);
                // interior rows: O(Δt²) relative to e^{2t}|λ| u
                let lam = g.cross_section().eigenvalue(op.level).abs().max(1.0);
                for i in 1..g.num_nodes() - 1 {
                    let scale = lam * (2.0 * g.t_nodes()[i]).exp() * u[i];
                    assert!(r[i].abs() <= 2.0 * lam * dt * dt * scale + 1e-12, "m={m} i={i}");
                }
            }
        }
    }

    #[test]
    fn constants_are_harmonic_in_mode_zero() {
        let (g, spec) = setup(0.05, 5.0);
        let op = assemble_laplacian(0, &g, &spec);
        let r = op.apply(&vec![2.5; g.num_nodes()]);
        assert!(r.iter().all(|v| *v == 0.0));
        let bi = assemble_bilaplacian(0, &g, &spec);
        assert!(bi.matrix.lower() <= 2 && bi.matrix.upper() <= 2);
        assert!(bi.apply(&vec![2.5; g.num_nodes()]).iter().all(|v| *v == 0.0));
    }

    #[test]
    fn x_squared_converges_to_four() {
        let mut errs = Vec::new();
        for dt in [0.04, 0.02, 0.01] {
            let (g, spec) = setup(dt, 4.0);
            let op = assemble_laplacian(0, &g, &spec);
            let u: Vec<f64> = g.t_nodes().iter().map(|t| (-2.0 * t).exp()).collect();
            let r = op.apply(&u);
            let e = (1..g.num_nodes() - 1).map(|i| (r[i] - 4.0).abs()).fold(0.0, f64::max);
            errs.push(e);
        }
        for w in errs.windows(2) {
            assert!((w[0] / w[1]).log2() >= 1.9, "{errs:?}");
        }
    }

    #[test]
    fn addon_x_e1_in_bilaplacian_kernel() {
        let (g, spec) = setup(0.01, 5.0);
        let op = assemble_bilaplacian(1, &g, &spec);
        let u: Vec<f64> = g.t_nodes().iter().map(|t| (-t).exp()).collect();
        let r = op.apply(&u);
        for i in 2..g.num_nodes() - 2 {
            let scale = (4.0 * g.t_nodes()[i]).exp() * u[i];
            assert!(r[i].abs() <= 0.01 * scale, "{i}: {}", r[i]);
        }
    }

    #[test]
    fn bilaplacian_is_explicit_composition() {
        let (g, spec) = setup(0.02, 4.0);
        for m in [0, 3] {
            let bi = assemble_bilaplacian(m, &g, &spec);
            let lap = assemble_laplacian(m, &g, &spec);
            let u: Vec<f64> = g.t_nodes().iter().map(|t| bump(*t, 0.5, 3.0)).collect();
            let once = lap.apply(&u);
            let twice = lap.apply(&once);
            let via_matrix = bi.matrix.apply(&u);
            // cancellation in the assembled rows: compare against |B||u|
            let abs_u: Vec<f64> = u.iter().map(|v| v.abs()).collect();
            let mut abs_b = bi.matrix.clone();
            for i in 0..abs_b.dim() {
                for j in i.saturating_sub(2)..(i + 3).min(abs_b.dim()) {
                    abs_b.set(i, j, bi.matrix.get(i, j).abs());
                }
            }
            let scale = abs_b.apply(&abs_u).iter().fold(0.0, |m: f64, v| m.max(*v));
            for (a, b) in twice.iter().zip(&via_matrix) {
                assert!((a - b).abs() <= 1e-12 * scale);
            }
            assert_eq!(twice, bi.apply(&u));
        }
    }

    #[test]
    fn weighted_symmetry_and_mass() {
        let (g, spec) = setup(0.02, 5.0);
        let ops = Operators::new(&g, &spec).unwrap();
        let w = &ops.weights;
        for m in 0..g.num_modes() {
            let d = &ops.lap[m].matrix;
            for i in 0..g.num_nodes() {
                for j in i.saturating_sub(1)..(i + 2).min(g.num_nodes()) {
                    let (a, b) = (w[i] * d.get(i, j), w[j] * d.get(j, i));
                    assert!((a - b).abs() <= 1e-10 * a.abs().max(1.0));
                }
            }
        }
        let u: Vec<f64> = g.t_nodes().iter().map(|t| (0.7 * t).sin() + 0.3).collect();
        let du = ops.lap[0].apply(&u);
        let mass: f64 = du.iter().zip(w).map(|(a, b)| a * b).sum();
        assert!(mass.abs() < 1e-10);
        let d2u = ops.bilap[0].apply(&u);
        let mass2: f64 = d2u.iter().zip(w).map(|(a, b)| a * b).sum();
        assert!(mass2.abs() < 1e-8 * d2u.iter().map(|v| v.abs()).fold(0.0, f64::max).max(1.0) * 1e-3);
    }

    #[test]
    fn pairing_of_x_cos_theta_is_one() {
        for dt in [0.02, 0.01] {
            let (g, _) = setup(dt, 4.0);
            let amp = std::f64::consts::PI.sqrt();
            let u = FieldState::from_fn(&g, -0.5, 2.0, |m, t| if m == 1 { amp * (-t).exp() } else { 0.0 });
            let p = gradient_pairing(&u, &u, &g).unwrap();
            let c0 = TAU.sqrt();
            for i in 1..g.num_nodes() - 1 {
                assert!((p.coeffs[0][i] / c0 - 1.0).abs() < dt * dt, "{}", p.coeffs[0][i] / c0);
                // cos 2θ survives only through the O(Δt²) error of ∂_t
                for m in 1..g.num_modes() {
                    assert!(p.coeffs[m][i].abs() < dt * dt, "{m}");
                }
            }
        }
    }

    #[test]
    fn pairing_basics() {
        let (g, _) = setup(0.05, 4.0);
        let c = FieldState::constant(&g, -0.5, 2.0, 3.0).unwrap();
        let p = gradient_pairing(&c, &c, &g).unwrap();
        // roundoff only, amplified by e^{2t}
        assert!(p.coeff_norm() < 1e-12 * (2.0 * g.t_max).exp());
        let u = FieldState::from_fn(&g, -0.5, 2.0, |m, t| bump(t, 0.3, 2.0) / (1.0 + m as f64));
        let v = FieldState::from_fn(&g, -0.5, 2.0, |m, t| bump(t, 0.5, 2.5) * (m as f64 - 2.0));
        let ps = PseudoSpectral::new(&g).unwrap();
        let a = ps.pairing(&u.scaled(2.0), &v.scaled(3.0)).unwrap();
        let b = ps.pairing(&u, &v).unwrap().scaled(6.0);
        assert!(a.max_abs_diff(&b) <= 1e-12 * b.coeff_norm());
        let short = ConeGrid::new(3.0, 0.05, g.cross_section().clone()).unwrap();
        let w = FieldState::zeros(&short, -0.5, 2.0);
        assert!(matches!(ps.pairing(&u, &w), Err(Error::GridMismatch(_))));
    }

    #[test]
    fn frozen_operator_trivial_states() {
        let (g, spec) = setup(0.05, 4.0);
        let ops = Operators::new(&g, &spec).unwrap();
        let ps = PseudoSpectral::new(&g).unwrap();
        let w = FieldState::from_fn(&g, -0.5, 2.0, |m, t| bump(t, 0.3, 2.0) * (1.0 + m as f64));
        let zero = FieldState::zeros(&g, -0.5, 2.0);
        let (a0, f0) = nonlinearity(&zero, &ops, &ps).unwrap();
        assert_eq!(f0.coeff_norm(), 0.0);
        let want0 = ops.bilaplacian(&w).axpy(1.0, &ops.laplacian(&w));
        assert!(a0.apply(&w).max_abs_diff(&want0) <= 1e-12 * want0.coeff_norm());
        let one = FieldState::constant(&g, -0.5, 2.0, 1.0).unwrap();
        let (a1, f1) = nonlinearity(&one, &ops, &ps).unwrap();
        assert!(f1.coeff_norm() < 1e-9);
        let want1 = ops.bilaplacian(&w).axpy(-2.0, &ops.laplacian(&w));
        assert!(a1.apply(&w).max_abs_diff(&want1) <= 1e-10 * want1.coeff_norm());
        assert_eq!(a1.apply(&one).coeff_norm(), 0.0);
    }

    #[test]
    fn splitting_matches_direct_operator() {
        let mut errs = Vec::new();
        for dt in [0.04, 0.02, 0.01] {
            let (g, spec) = setup(dt, 4.0);
            let ops = Operators::new(&g, &spec).unwrap();
            let ps = PseudoSpectral::new(&g).unwrap();
            let u = FieldState::from_fn(&g, -0.5, 2.0, |m, t| {
                bump(t, 0.3, 2.0) * [0.2, 0.1, -0.05, 0.03, 0.02, -0.01, 0.01, 0.005, 0.0][m.min(8)]
            });
            let u = u.scaled(5.0);
            let (a, f) = nonlinearity(&u, &ops, &ps).unwrap();
            let split = a.apply(&u).axpy(-1.0, &f);
            let direct = ch_operator_direct(&u, &ops, &ps).unwrap();
            errs.push(ops.inner(&split.axpy(-1.0, &direct), &split.axpy(-1.0, &direct)).sqrt()
                / ops.inner(&direct, &direct).sqrt());
        }
        assert!(errs[1] <= 1e-2, "{errs:?}");
        assert!((errs[1] / errs[2]).log2() >= 1.9, "{errs:?}");
    }
}
