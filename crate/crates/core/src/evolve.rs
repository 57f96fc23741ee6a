//! Backward-Euler time stepping for Cahn-Hilliard and Allen-Cahn on the
//! truncated cone, with the nonlinearity frozen at the previous step.
//!
//! Both steps are solved for the increment `δ = u_{n+1} − u_n`, so that
//! states annihilated by the discrete operator are reproduced exactly.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::assembly::{nonlinear_source, to_modal, to_physical, FrozenOperator, Operators, PseudoSpectral};
use crate::banded::{BandLu, BandMatrix};
use crate::error::{Error, Result};
use crate::extensions::ExtensionSpec;
use crate::mellin::{diff_t, mellin_norm, ConeGrid, FieldState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Equation {
    CahnHilliard,
    AllenCahn,
}

/// Reaction term of Allen-Cahn.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Reaction {
    /// `u − u³`
    DoubleWell,
    Zero,
    Linear { slope: f64 },
}

impl Reaction {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Reaction::DoubleWell => u - u * u * u,
            Reaction::Zero => 0.0,
            Reaction::Linear { slope } => slope * u,
        }
    }

    /// Lipschitz constant on `[−r, r]`.
    pub fn lipschitz(&self, r: f64) -> f64 {
        match self {
            Reaction::DoubleWell => (3.0 * r * r - 1.0).max(1.0),
            Reaction::Zero => 0.0,
            Reaction::Linear { slope } => slope.abs(),
        }
    }
}

/// Initial condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    Constant {
        value: f64,
    },
    /// Random mean plus random smooth bumps in `t ∈ support` on the levels
    /// `0..=max_level`.
    Random {
        amplitude: f64,
        #[serde(default = "default_max_level")]
        max_level: usize,
        #[serde(default = "default_support")]
        support: (f64, f64),
    },
}

fn default_max_level() -> usize {
    2
}

fn default_support() -> (f64, f64) {
    (0.3, 2.5)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub equation: Equation,
    pub dt: f64,
    pub t_final: f64,
    pub picard_iters: usize,
    pub picard_tol: f64,
    pub initial: InitialData,
    pub reaction: Reaction,
    pub seed: u64,
    /// Keep every `snapshot_every`-th state (0 keeps only the final one).
    pub snapshot_every: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            equation: Equation::CahnHilliard,
            dt: 1e-3,
            t_final: 0.05,
            picard_iters: 8,
            picard_tol: 1e-10,
            initial: InitialData::Zero,
            reaction: Reaction::DoubleWell,
            seed: 0,
            snapshot_every: 0,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {}", self.dt)));
        }
        if !(self.t_final > 0.0 && self.dt < self.t_final) {
            return Err(Error::InvalidInput(format!(
                "need 0 < dt < T, got dt = {}, T = {}",
                self.dt, self.t_final
            )));
        }
        if self.picard_iters == 0 {
            return Err(Error::InvalidInput("picard_iters must be at least 1".into()));
        }
        if !(self.picard_tol > 0.0) {
            return Err(Error::InvalidInput("picard_tol must be positive".into()));
        }
        Ok(())
    }

    pub fn num_steps(&self) -> usize {
        (self.t_final / self.dt - 1e-9).ceil() as usize
    }
}

/// Smooth bump supported in `(lo, hi)`, peak value 1.
pub fn bump(t: f64, lo: f64, hi: f64) -> f64 {
    if t <= lo || t >= hi {
        return 0.0;
    }
    let r = (t - lo) / (hi - lo);
    (4.0 - 1.0 / (r * (1.0 - r))).exp()
}

pub fn initial_field(data: &InitialData, grid: &ConeGrid, gamma: f64, p: f64, seed: u64) -> Result<FieldState> {
    match data {
        InitialData::Zero => Ok(FieldState::zeros(grid, gamma, p)),
        InitialData::Constant { value } => FieldState::constant(grid, gamma, p, *value),
        InitialData::Random {
            amplitude,
            max_level,
            support,
        } => {
            let (lo, hi) = *support;
            if !(0.0 <= lo && lo < hi && hi <= grid.t_max) {
                return Err(Error::InvalidInput(format!(
                    "bump support ({lo}, {hi}) must lie in [0, t_max]"
                )));
            }
            let cs = grid.cross_section();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mean = amplitude * rng.gen_range(-0.5..0.5) * cs.measure()?.sqrt();
            let coeffs: Vec<f64> = (0..grid.num_modes())
                .map(|m| {
                    if cs.level_of_mode(m) <= *max_level {
                        amplitude * rng.gen_range(-1.0..1.0)
                    } else {
                        0.0
                    }
                })
                .collect();
            Ok(FieldState::from_fn(grid, gamma, p, |m, t| {
                let base = if m == 0 { mean } else { 0.0 };
                base + coeffs[m] * bump(t, lo, hi)
            }))
        }
    }
}

/// Proxy for the trace space of the data: finite `k = 2` norm and the
/// inner Robin rows satisfied to `tol` (relative).
pub fn check_admissible(u: &FieldState, grid: &ConeGrid, spec: &ExtensionSpec, tol: f64) -> Result<()> {
    u.check_grid(grid)?;
    if !u.is_finite() {
        return Err(Error::InadmissibleData("non-finite coefficients".into()));
    }
    let norm = mellin_norm(u, 2, spec.gamma, spec.p, grid)?;
    if !norm.is_finite() {
        return Err(Error::InadmissibleData("H^{2,γ} norm is not finite".into()));
    }
    let cs = grid.cross_section();
    let scale = u.coeffs.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
    for (m, row) in u.coeffs.iter().enumerate() {
        let a = spec.robin(cs.level_of_mode(m)).u.value();
        let d = diff_t(row, grid.dt);
        let last = row.len() - 1;
        // x∂_x u − a u = −∂_t u − a u at the tip
        let res = (-d[last] - a * row[last]).abs();
        if res > tol * scale {
            return Err(Error::InadmissibleData(format!(
                "mode {m} violates the inner Robin condition (residual {res:e})"
            )));
        }
    }
    Ok(())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Diagnostics {
    pub step: usize,
    pub time: f64,
    pub mass: f64,
    pub energy: f64,
    pub supnorm: f64,
    pub norm0: f64,
    pub norm2: f64,
}

#[derive(Clone, Debug)]
pub struct Trajectory {
    pub snapshots: Vec<(usize, FieldState)>,
    pub diagnostics: Vec<Diagnostics>,
    pub final_state: FieldState,
}

/// Operators, transforms and cached factorisations for one `dt`.
pub struct Stepper {
    pub grid: ConeGrid,
    pub spec: ExtensionSpec,
    pub ops: Operators,
    pub ps: PseudoSpectral,
    pub dt: f64,
    pub picard_iters: usize,
    pub picard_tol: f64,
    ch_lu: Vec<BandLu>,
    ac_lu: Vec<BandLu>,
    boundary_measure: f64,
}

impl Stepper {
    pub fn new(grid: &ConeGrid, spec: &ExtensionSpec, dt: f64, picard_iters: usize, picard_tol: f64) -> Result<Self> {
        if !(dt > 0.0) {
            return Err(Error::InvalidInput(format!("dt must be positive, got {dt}")));
        }
        let ops = Operators::new(grid, spec)?;
        let ps = PseudoSpectral::new(grid)?;
        let size = grid.num_nodes();
        let ch_lu = (0..grid.num_modes())
            .into_par_iter()
            .map(|m| {
                let sys = BandMatrix::identity(size)
                    .combine(1.0, &ops.bilap[m].matrix, dt)
                    .combine(1.0, &ops.lap[m].matrix, dt);
                // rows grow like e^{4t}; eliminate from the tip outward
                sys.lu_reversed()
            })
            .collect::<Result<Vec<_>>>()?;
        let ac_lu = (0..grid.num_modes())
            .into_par_iter()
            .map(|m| BandMatrix::identity(size).combine(1.0, &ops.second_order[m].matrix, -dt).lu_reversed())
            .collect::<Result<Vec<_>>>()?;
        Ok(Stepper {
            grid: grid.clone(),
            spec: spec.clone(),
            ops,
            ps,
            dt,
            picard_iters,
            picard_tol,
            ch_lu,
            ac_lu,
            boundary_measure: grid.cross_section().measure()?,
        })
    }

    fn solve(lus: &[BandLu], rhs: &mut FieldState) {
        rhs.coeffs
            .par_iter_mut()
            .zip(lus)
            .for_each(|(row, lu)| lu.solve_in_place(row));
    }

    /// `(I + dt A(u_n)) u_{n+1} = u_n + dt (F(u_n) + g)`, the `−3u_n²Δu`
    /// coupling iterated to `picard_tol`. Returns the state and the
    /// iteration count.
    pub fn ch_step(&self, u: &FieldState, forcing: Option<&FieldState>) -> Result<(FieldState, usize)> {
        u.check_grid(&self.grid)?;
        let frozen = FrozenOperator::new(u, &self.ops, &self.ps);
        let lap_u = self.ops.laplacian(u);
        let mut base = self
            .ops
            .remove_mass(nonlinear_source(u, &self.ps)?)
            .axpy(-1.0, &self.ops.bilaplacian(u))
            .axpy(-1.0, &lap_u);
        if let Some(g) = forcing {
            g.check_grid(&self.grid)?;
            base = base.axpy(1.0, g);
        }
        let scale = u.coeffs.iter().flatten().fold(1.0f64, |m, v| m.max(v.abs()));
        let mut delta = FieldState::zeros(&self.grid, u.gamma, u.p);
        let mut residual = f64::INFINITY;
        for iter in 1..=self.picard_iters {
            let lap_next = lap_u.axpy(1.0, &self.ops.laplacian(&delta));
            let mut rhs = base.axpy(1.0, &frozen.coupling(&lap_next)).scaled(self.dt);
            let target = self.weighted_mean0(&rhs);
            Self::solve(&self.ch_lu, &mut rhs);
            // the operator annihilates mass exactly, the LU only up to its
            // residual, which the tip rows scale by e^{4t}
            let fix = target - self.weighted_mean0(&rhs);
            if fix != 0.0 {
                rhs.coeffs[0].iter_mut().for_each(|v| *v += fix);
            }
            residual = rhs.max_abs_diff(&delta);
            delta = rhs;
            if !residual.is_finite() {
                break;
            }
            if residual <= self.picard_tol * scale {
                let mut next = u.axpy(1.0, &delta);
                next.time = u.time + self.dt;
                return Ok((next, iter));
            }
        }
        Err(Error::PicardDivergence {
            residual,
            iterations: self.picard_iters,
        })
    }

    /// `(I − dt Δ̲) u_{n+1} = u_n + dt (f(u_n) + g)`.
    pub fn ac_step(&self, u: &FieldState, f: &Reaction, forcing: Option<&FieldState>) -> Result<FieldState> {
        u.check_grid(&self.grid)?;
        let mut phys = to_physical(&self.ps.transform, u);
        phys.iter_mut().flatten().for_each(|v| *v = f.eval(*v));
        let mut rhs = to_modal(&self.ps.transform, &phys, u).axpy(1.0, &self.ops.laplacian_second_order(u));
        if let Some(g) = forcing {
            g.check_grid(&self.grid)?;
            rhs = rhs.axpy(1.0, g);
        }
        let mut delta = rhs.scaled(self.dt);
        Self::solve(&self.ac_lu, &mut delta);
        let mut next = u.axpy(1.0, &delta);
        next.time = u.time + self.dt;
        Ok(next)
    }

    fn weighted_mean0(&self, u: &FieldState) -> f64 {
        let w = &self.ops.weights;
        let s: f64 = u.coeffs[0].iter().zip(w).map(|(a, b)| a * b).sum();
        s / w.iter().sum::<f64>()
    }

    /// `∫ u` over the truncated cone.
    pub fn mass(&self, u: &FieldState) -> f64 {
        // ∫ e_0 = √|∂B|
        let s: f64 = u.coeffs[0].iter().zip(&self.ops.weights).map(|(a, w)| a * w).sum();
        s * self.boundary_measure.sqrt()
    }

    /// `∫ ¼(u²−1)² + ½(∇u,∇u)_g`, the gradient part as the Dirichlet form of
    /// the discrete operator.
    pub fn energy(&self, u: &FieldState) -> f64 {
        let phys = to_physical(&self.ps.transform, u);
        let qw = &self.ps.transform.weights;
        let mut potential = 0.0;
        for (row, w) in phys.iter().zip(&self.ops.weights) {
            let mut acc = 0.0;
            for (v, q) in row.iter().zip(qw) {
                let s = v * v - 1.0;
                acc += q * 0.25 * s * s;
            }
            potential += w * acc;
        }
        let dirichlet = -self.ops.inner(u, &self.ops.laplacian(u));
        potential + 0.5 * dirichlet
    }

    pub fn supnorm(&self, u: &FieldState) -> f64 {
        to_physical(&self.ps.transform, u)
            .iter()
            .flatten()
            .fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn diagnostics(&self, step: usize, u: &FieldState) -> Result<Diagnostics> {
        Ok(Diagnostics {
            step,
            time: u.time,
            mass: self.mass(u),
            energy: self.energy(u),
            supnorm: self.supnorm(u),
            norm0: mellin_norm(u, 0, self.spec.gamma, self.spec.p, &self.grid)?,
            norm2: mellin_norm(u, 2, self.spec.gamma, self.spec.p, &self.grid)?,
        })
    }

    /// Generic driver; `forcing(τ)` is evaluated at the new time level.
    pub fn run_from(
        &self,
        u0: FieldState,
        config: &RunConfig,
        forcing: &dyn Fn(f64) -> Result<Option<FieldState>>,
    ) -> Result<Trajectory> {
        config.validate()?;
        let steps = config.num_steps();
        let mut u = u0;
        let mut diagnostics = vec![self.diagnostics(0, &u)?];
        let mut snapshots = Vec::new();
        if config.snapshot_every > 0 {
            snapshots.push((0, u.clone()));
        }
        for step in 1..=steps {
            let wrap = |e: Error| Error::Step {
                step,
                source: Box::new(e),
            };
            let g = forcing(u.time + self.dt).map_err(wrap)?;
            u = match config.equation {
                Equation::CahnHilliard => self.ch_step(&u, g.as_ref()).map_err(wrap)?.0,
                Equation::AllenCahn => self.ac_step(&u, &config.reaction, g.as_ref()).map_err(wrap)?,
            };
            u.time = step as f64 * self.dt;
            if !u.is_finite() {
                return Err(wrap(Error::PicardDivergence {
                    residual: f64::INFINITY,
                    iterations: 0,
                }));
            }
            diagnostics.push(self.diagnostics(step, &u)?);
            if config.snapshot_every > 0 && step % config.snapshot_every == 0 {
                snapshots.push((step, u.clone()));
            }
        }
        if config.snapshot_every == 0 || steps % config.snapshot_every != 0 {
            snapshots.push((steps, u.clone()));
        }
        Ok(Trajectory {
            snapshots,
            diagnostics,
            final_state: u,
        })
    }
}

/// One Cahn-Hilliard step with default Picard settings.
pub fn ch_step(u: &FieldState, dt: f64, spec: &ExtensionSpec, grid: &ConeGrid) -> Result<FieldState> {
    let st = Stepper::new(grid, spec, dt, 8, 1e-10)?;
    Ok(st.ch_step(u, None)?.0)
}

/// One Allen-Cahn step.
pub fn ac_step(u: &FieldState, dt: f64, spec: &ExtensionSpec, grid: &ConeGrid, f: &Reaction) -> Result<FieldState> {
    Stepper::new(grid, spec, dt, 1, 1.0)?.ac_step(u, f, None)
}

/// Builds the initial state from the config, checks it, and integrates.
pub fn run(config: &RunConfig, grid: &ConeGrid, spec: &ExtensionSpec) -> Result<Trajectory> {
    config.validate()?;
    let u0 = initial_field(&config.initial, grid, spec.gamma, spec.p, config.seed)?;
    check_admissible(&u0, grid, spec, 1e-6)?;
    let st = Stepper::new(grid, spec, config.dt, config.picard_iters, config.picard_tol)?;
    st.run_from(u0, config, &|_| Ok(None))
}

/// `u*(τ) = e^{−τ} φ` with the forcing that makes it an exact solution of
/// the discrete equations in space; the remaining error is temporal.
pub struct Manufactured {
    pub profile: FieldState,
}

impl Manufactured {
    pub fn exact(&self, tau: f64) -> FieldState {
        let mut u = self.profile.scaled((-tau).exp());
        u.time = tau;
        u
    }

    pub fn forcing(&self, tau: f64, st: &Stepper, equation: Equation, f: &Reaction) -> Result<FieldState> {
        let u = self.exact(tau);
        let dudt = u.scaled(-1.0);
        match equation {
            Equation::CahnHilliard => {
                let frozen = FrozenOperator::new(&u, &st.ops, &st.ps);
                let src = st.ops.remove_mass(nonlinear_source(&u, &st.ps)?);
                Ok(dudt.axpy(1.0, &frozen.apply(&u)).axpy(-1.0, &src))
            }
            Equation::AllenCahn => {
                let mut phys = to_physical(&st.ps.transform, &u);
                phys.iter_mut().flatten().for_each(|v| *v = f.eval(*v));
                let fu = to_modal(&st.ps.transform, &phys, &u);
                Ok(dudt.axpy(-1.0, &st.ops.laplacian_second_order(&u)).axpy(-1.0, &fu))
            }
        }
    }

    /// Max coefficient error at `T` for a forced run with step `dt`.
    pub fn error_at(&self, st: &Stepper, config: &RunConfig) -> Result<f64> {
        let traj = st.run_from(self.exact(0.0), config, &|tau| {
            self.forcing(tau, st, config.equation, &config.reaction).map(Some)
        })?;
        let t_end = config.num_steps() as f64 * st.dt;
        Ok(traj.final_state.max_abs_diff(&self.exact(t_end)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ContinuityReport {
    pub delta: f64,
    /// `sup_t ‖u_δ(t) − u(t)‖ / δ`.
    pub modulus: f64,
    pub max_difference: f64,
}

/// Runs from `u_0` and `u_0 + δv` and compares the trajectories.
pub fn wellposedness_smoke(
    config: &RunConfig,
    grid: &ConeGrid,
    spec: &ExtensionSpec,
    delta: f64,
    v: &FieldState,
) -> Result<ContinuityReport> {
    config.validate()?;
    let u0 = initial_field(&config.initial, grid, spec.gamma, spec.p, config.seed)?;
    let st = Stepper::new(grid, spec, config.dt, config.picard_iters, config.picard_tol)?;
    let mut cfg = config.clone();
    cfg.snapshot_every = 1;
    let a = st.run_from(u0.clone(), &cfg, &|_| Ok(None))?;
    let b = st.run_from(u0.axpy(delta, v), &cfg, &|_| Ok(None))?;
    let max_difference = a
        .snapshots
        .iter()
        .zip(&b.snapshots)
        .map(|((_, x), (_, y))| x.axpy(-1.0, y).coeff_norm())
        .fold(0.0, f64::max);
    Ok(ContinuityReport {
        delta,
        modulus: if delta == 0.0 { 0.0 } else { max_difference / delta },
        max_difference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cross_section::CrossSection;
    use crate::extensions::complete_extension;
    use std::f64::consts::TAU;

    fn setup() -> (ConeGrid, ExtensionSpec) {
        let cs = CrossSection::circle(TAU, 3).unwrap();
        let spec = complete_extension(-0.5, 2.0, &cs).unwrap();
        (ConeGrid::new(5.0, 0.05, cs).unwrap(), spec)
    }

    #[test]
    fn fixed_points_are_exact() {
        let (g, spec) = setup();
        let st = Stepper::new(&g, &spec, 1e-3, 8, 1e-10).unwrap();
        for c in [0.0, 1.0, -1.0] {
            let u = FieldState::constant(&g, spec.gamma, 2.0, c).unwrap();
            // quadrature transforms leave rounding-level residue only
            let (next, _) = st.ch_step(&u, None).unwrap();
            assert!(next.max_abs_diff(&u) <= 1e-14);
            let next = st.ac_step(&u, &Reaction::DoubleWell, None).unwrap();
            assert!(next.max_abs_diff(&u) <= 1e-14);
        }
        let u = FieldState::constant(&g, spec.gamma, 2.0, 0.3).unwrap();
        let next = st.ac_step(&u, &Reaction::Zero, None).unwrap();
        assert!(next.max_abs_diff(&u) <= 1e-14);
        let zero = FieldState::zeros(&g, spec.gamma, 2.0);
        assert_eq!(st.ch_step(&zero, None).unwrap().0.coeffs, zero.coeffs);
    }

    #[test]
    fn allen_cahn_constant_follows_scalar_ode() {
        let (g, spec) = setup();
        let dt = 1e-2;
        let st = Stepper::new(&g, &spec, dt, 1, 1.0).unwrap();
        let mut u = FieldState::constant(&g, spec.gamma, 2.0, 0.5).unwrap();
        let mut scalar = 0.5f64;
        let mut prev = 0.5;
        for _ in 0..200 {
            u = st.ac_step(&u, &Reaction::DoubleWell, None).unwrap();
            scalar += dt * (scalar - scalar.powi(3));
            let sup = st.supnorm(&u);
            assert!(sup <= 1.0 + 1e-12);
            let v = u.coeffs[0][10] / TAU.sqrt();
            assert!(v >= prev - 1e-14);
            assert!((v - scalar).abs() < 1e-10);
            prev = v;
        }
        // against the exact ODE solution u = 1/√(1 + 3e^{−2τ})
        let exact = 1.0 / (1.0 + 3.0 * (-4.0f64).exp()).sqrt();
        assert!((prev - exact).abs() < 0.02);
    }

    #[test]
    fn zero_data_trajectory() {
        let (g, spec) = setup();
        let cfg = RunConfig {
            t_final: 0.1,
            dt: 0.01,
            ..RunConfig::default()
        };
        let tr = run(&cfg, &g, &spec).unwrap();
        assert_eq!(tr.diagnostics.len(), 11);
        for d in &tr.diagnostics {
            assert_eq!(d.mass, 0.0);
            assert_eq!(d.supnorm, 0.0);
            assert_eq!(d.norm0, 0.0);
        }
        assert_eq!(tr.final_state.coeff_norm(), 0.0);
    }

    #[test]
    fn inadmissible_data_rejected() {
        let (g, spec) = setup();
        // x^{-1} e_1 violates the tip condition x∂_x u = u
        let u = FieldState::from_fn(&g, spec.gamma, 2.0, |m, t| if m == 1 { t.exp() } else { 0.0 });
        assert!(matches!(check_admissible(&u, &g, &spec, 1e-6), Err(Error::InadmissibleData(_))));
    }

    #[test]
    fn small_data_conserves_mass_and_dissipates() {
        let (g, spec) = setup();
        let cfg = RunConfig {
            initial: InitialData::Random {
                amplitude: 1e-2,
                max_level: 2,
                support: (0.3, 2.5),
            },
            seed: 7,
            t_final: 0.02,
            ..RunConfig::default()
        };
        let tr = run(&cfg, &g, &spec).unwrap();
        for w in tr.diagnostics.windows(2) {
            assert!((w[1].mass - w[0].mass).abs() <= 1e-8 * w[0].norm0.max(1e-300));
            assert!(w[1].energy <= w[0].energy + 1e-9);
        }
    }

    #[test]
    fn continuity_smoke() {
        let (g, spec) = setup();
        let cfg = RunConfig {
            initial: InitialData::Random {
                amplitude: 1e-2,
                max_level: 1,
                support: (0.3, 2.5),
            },
            t_final: 0.01,
            ..RunConfig::default()
        };
        let v = FieldState::from_fn(&g, spec.gamma, 2.0, |m, t| bump(t, 0.5, 2.0) * (m as f64 + 1.0));
        let zero = wellposedness_smoke(&cfg, &g, &spec, 0.0, &v).unwrap();
        assert_eq!(zero.max_difference, 0.0);
        let none = wellposedness_smoke(&cfg, &g, &spec, 1e-3, &FieldState::zeros(&g, spec.gamma, 2.0)).unwrap();
        assert_eq!(none.max_difference, 0.0);
        let a = wellposedness_smoke(&cfg, &g, &spec, 1e-3, &v).unwrap();
        let b = wellposedness_smoke(&cfg, &g, &spec, 1e-4, &v).unwrap();
        let r = a.modulus / b.modulus;
        assert!((1.0 / 3.0..=3.0).contains(&r), "{r}");
    }
}
