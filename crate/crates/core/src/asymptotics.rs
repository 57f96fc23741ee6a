//! Near-tip exponent extraction and comparison with the admissible
//! asymptotics of the chosen extension.

use nalgebra::Matrix3;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::extensions::ExtensionSpec;
use crate::mellin::{simpson_weights, ConeGrid, FieldState};

/// Fit of `u_j(x) ≈ x^a (c₁ + c₂ log x)` on a window.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentFit {
    pub mode: usize,
    pub a_hat: f64,
    /// `c₂ / c₁`.
    pub log_coeff: f64,
    /// `‖u − fit‖ / ‖u‖` on the window.
    pub residual: f64,
    pub window: (f64, f64),
    /// `|log_coeff| · width > 5 · residual`, width in `log x`.
    pub log_detected: bool,
}

/// Exponent search range and resolution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FitOptions {
    pub a_min: f64,
    pub a_max: f64,
    pub scan_step: f64,
    pub tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            a_min: -4.0,
            a_max: 8.0,
            scan_step: 0.02,
            tol: 1e-12,
        }
    }
}

/// Default window `[t_max − 4, t_max − 1]`, clipped to the grid.
pub fn default_window(grid: &ConeGrid) -> (f64, f64) {
    ((grid.t_max - 4.0).max(0.0), (grid.t_max - 1.0).max(0.0))
}

/// Best `(c₁, c₂)` and squared residual for a fixed exponent, in `t = −log x`.
fn project(t: &[f64], v: &[f64], a: f64) -> (f64, f64, f64) {
    // basis e^{−at}, −t e^{−at}, normalised at the window centre and
    // orthogonalised explicitly: the normal equations lose the flat minima
    let mid = 0.5 * (t[0] + t[t.len() - 1]);
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let b1: Vec<f64> = t.iter().map(|ti| (-a * (ti - mid)).exp()).collect();
    let b2: Vec<f64> = t.iter().zip(&b1).map(|(ti, e)| -(ti - mid) * e).collect();
    let r11 = dot(&b1, &b1).sqrt();
    let q1: Vec<f64> = b1.iter().map(|x| x / r11).collect();
    let mut w = b2.clone();
    let mut r12 = 0.0;
    for _ in 0..2 {
        let c = dot(&q1, &w);
        r12 += c;
        w.iter_mut().zip(&q1).for_each(|(x, q)| *x -= c * q);
    }
    let r22 = dot(&w, &w).sqrt();
    let q2: Vec<f64> = w.iter().map(|x| x / r22).collect();
    let mut r = v.to_vec();
    let (mut d1, mut d2) = (0.0, 0.0);
    for _ in 0..2 {
        let (e1, e2) = (dot(&q1, &r), dot(&q2, &r));
        r.iter_mut().zip(q1.iter().zip(&q2)).for_each(|(x, (p, q))| *x -= e1 * p + e2 * q);
        d1 += e1;
        d2 += e2;
    }
    let rss = dot(&r, &r);
    let c2 = d2 / r22;
    let c1 = (d1 - r12 * c2) / r11;
    // back to x^a (C₁ + C₂ log x): log x = −t = −(t − mid) − mid
    let scale = (-a * mid).exp().recip();
    let big_c2 = c2 * scale;
    let big_c1 = c1 * scale + mid * big_c2;
    (big_c1, big_c2, rss)
}

/// Squared residual of the best multiple of `e^{−at}`.
fn project_pure(t: &[f64], v: &[f64], a: f64) -> f64 {
    let mid = 0.5 * (t[0] + t[t.len() - 1]);
    let b: Vec<f64> = t.iter().map(|ti| (-a * (ti - mid)).exp()).collect();
    let c = b.iter().zip(v).map(|(x, y)| x * y).sum::<f64>() / b.iter().map(|x| x * x).sum::<f64>();
    b.iter().zip(v).map(|(x, y)| (y - c * x).powi(2)).sum()
}

/// Exponent from the recurrence `y_{k+2} − 2r y_{k+1} + r² y_k = 0`
/// obeyed by `e^{−at}(c₁ − c₂t)` on nodes spaced `h`, with `r = e^{−ah}`:
/// the least-squares residual is a quartic in `r`. Returns its
/// stationary points; for a weak log term two of them are near-zero minima.
fn recurrence_guesses(v: &[f64], h: f64, opts: &FitOptions) -> Vec<f64> {
    let mut q = [0.0f64; 5];
    for w in v.windows(3) {
        let (a, b, c) = (w[2], -2.0 * w[1], w[0]);
        q[0] += a * a;
        q[1] += 2.0 * a * b;
        q[2] += b * b + 2.0 * a * c;
        q[3] += 2.0 * b * c;
        q[4] += c * c;
    }
    if !(q[4] > 0.0) {
        return Vec::new();
    }
    // stationary points: roots of S'(r) = q1 + 2q2 r + 3q3 r² + 4q4 r³
    let d = [q[1], 2.0 * q[2], 3.0 * q[3]].map(|c| c / (4.0 * q[4]));
    let companion = Matrix3::new(0.0, 0.0, -d[0], 1.0, 0.0, -d[1], 0.0, 1.0, -d[2]);
    let (r_lo, r_hi) = ((-opts.a_max * h).exp(), (-opts.a_min * h).exp());
    // near a pure power the root is almost triple and may split into a
    // complex pair: keep real parts
    companion
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .filter(|r| *r >= r_lo && *r <= r_hi)
        .map(|r| -r.ln() / h)
        .collect()
}

/// Global minimum of `objective` on `[a_min, a_max]`: coarse scan, then
/// nested scans from every local minimum of the scan and from `seeds`.
fn minimize(objective: &(dyn Fn(f64) -> f64 + Sync), seeds: &[f64], opts: &FitOptions) -> Option<(f64, f64)> {
    let steps = ((opts.a_max - opts.a_min) / opts.scan_step).ceil() as usize;
    let scan: Vec<(f64, f64)> = (0..=steps)
        .into_par_iter()
        .map(|k| {
            let a = opts.a_min + opts.scan_step * k as f64;
            (a, objective(a))
        })
        .collect();
    // x^a log x sits next to x^{a'} for a' near a, so the residual can have
    // a broad false valley beside the true one
    let finite = |k: usize| scan[k].1.is_finite();
    let starts: Vec<(f64, f64)> = (0..scan.len())
        .filter(|&k| {
            finite(k)
                && (k == 0 || !finite(k - 1) || scan[k].1 <= scan[k - 1].1)
                && (k + 1 == scan.len() || !finite(k + 1) || scan[k].1 <= scan[k + 1].1)
        })
        .map(|k| scan[k])
        .collect();
    let mut starts: Vec<((f64, f64), f64)> = starts.into_iter().map(|s| (s, opts.scan_step)).collect();
    // seeds are good to ~ε^{1/3}; a narrow valley needs a narrow first bracket
    for &a in seeds.iter().filter(|a| a.is_finite()) {
        for half in [opts.scan_step, 1e-4] {
            starts.push(((a, objective(a)), half));
        }
    }
    // each nested scan covers the two cells around the previous best
    let refine = |start: (f64, f64), mut half: f64| {
        let (mut centre, mut best) = start;
        while half > opts.tol {
            let h = half / 10.0;
            for i in -10i32..=10 {
                let x = centre + h * i as f64;
                let f = objective(x);
                if f < best {
                    best = f;
                    centre = x;
                }
            }
            half = h;
        }
        (centre, best)
    };
    starts.par_iter().map(|&(s, half)| refine(s, half)).min_by(|x, y| x.1.total_cmp(&y.1))
}

/// Fits `x^a (c₁ + c₂ log x)` to mode `mode` of `u` on `window` (a
/// `t`-interval), falling back to `c₁x^a` when the log term does not
/// halve the relative residual.
pub fn fit_exponents(
    u: &FieldState,
    mode: usize,
    window: (f64, f64),
    grid: &ConeGrid,
    opts: &FitOptions,
) -> Result<ExponentFit> {
    u.check_grid(grid)?;
    if mode >= u.num_modes() {
        return Err(Error::IndexOutOfRange {
            index: mode,
            len: u.num_modes(),
        });
    }
    let (lo, hi) = window;
    if !(0.0 <= lo && lo < hi && hi <= grid.t_max + 1e-12) {
        return Err(Error::InvalidInput(format!(
            "window ({lo}, {hi}) must lie inside [0, {}]",
            grid.t_max
        )));
    }
    let nodes = grid.t_nodes();
    let (mut t, mut v) = (Vec::new(), Vec::new());
    for (i, ti) in nodes.iter().enumerate() {
        if *ti >= lo - 1e-12 && *ti <= hi + 1e-12 {
            t.push(*ti);
            v.push(u.coeffs[mode][i]);
        }
    }
    if t.len() < 4 {
        return Err(Error::InvalidInput("fit window holds fewer than 4 nodes".into()));
    }
    // scale-free from here on
    let peak = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    if !(peak > 0.0) || !peak.is_finite() {
        return Err(Error::ZeroMode(mode));
    }
    v.iter_mut().for_each(|x| *x /= peak);
    let norm2: f64 = v.iter().map(|x| x * x).sum();
    let full = |a: f64| project(&t, &v, a).2 / norm2;
    let pure = |a: f64| project_pure(&t, &v, a) / norm2;
    let seeds = recurrence_guesses(&v, grid.dt, opts);
    let (a_full, f_full) = minimize(&full, &seeds, opts).ok_or(Error::ZeroMode(mode))?;
    let (a_pure, f_pure) = minimize(&pure, &[], opts).ok_or(Error::ZeroMode(mode))?;
    let (res_full, res_pure) = (f_full.sqrt(), f_pure.sqrt());
    let width = t[t.len() - 1] - t[0];
    // without a log term the exponent of the full model is fixed only to
    // second order; keep the log only when it pays for itself
    if !(res_pure > 2.0 * res_full + 1e-12) {
        return Ok(ExponentFit {
            mode,
            a_hat: a_pure,
            log_coeff: 0.0,
            residual: res_pure,
            window,
            log_detected: false,
        });
    }
    let (c1, c2, _) = project(&t, &v, a_full);
    let log_coeff = if c1 != 0.0 { c2 / c1 } else { f64::INFINITY };
    Ok(ExponentFit {
        mode,
        a_hat: a_full,
        log_coeff,
        residual: res_full,
        window,
        log_detected: log_coeff.abs() * width > 5.0 * res_full,
    })
}

/// Admissible exponents of one level: isolated values from the selected
/// asymptotics and the addons, and the threshold above which everything
/// lies in the minimal domain.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExponentCatalog {
    pub level: Option<usize>,
    pub isolated: Vec<f64>,
    pub threshold: f64,
}

pub fn exponent_catalog(spec: &ExtensionSpec, level: Option<usize>) -> ExponentCatalog {
    let mut isolated: Vec<f64> = Vec::new();
    let keep = |m: usize| level.is_none_or(|l| l == m);
    for ad in spec.bilaplacian_addons.iter().filter(|ad| keep(ad.mode)) {
        for term in ad.basis.iter().flatten() {
            isolated.push(term.exponent.value());
        }
    }
    isolated.sort_by(f64::total_cmp);
    isolated.dedup_by(|x, y| (*x - *y).abs() < 1e-12);
    ExponentCatalog {
        level,
        isolated,
        threshold: spec.gamma + 4.0 - 0.5 * (spec.n as f64 + 1.0),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CatalogMatch {
    pub a_hat: f64,
    pub matched: f64,
    pub distance: f64,
    pub pass: bool,
}

/// Nearest admissible exponent to `a_hat`; exponents above the minimal
/// domain threshold match themselves.
pub fn match_catalog(a_hat: f64, spec: &ExtensionSpec, level: Option<usize>, tol: f64) -> CatalogMatch {
    let cat = exponent_catalog(spec, level);
    let mut matched = cat.threshold.max(a_hat);
    let mut distance = (matched - a_hat).abs();
    for &e in &cat.isolated {
        let d = (e - a_hat).abs();
        if d < distance {
            matched = e;
            distance = d;
        }
    }
    CatalogMatch {
        a_hat,
        matched,
        distance,
        pass: distance <= tol,
    }
}

/// Finite-difference weights for derivatives `0..=max_order` at `x0` on the
/// nodes `xs` (Fornberg's recursion); `w[k][j]` multiplies `f(xs[j])`.
pub fn fd_weights(x0: f64, xs: &[f64], max_order: usize) -> Vec<Vec<f64>> {
    let n = xs.len();
    let mut w = vec![vec![0.0; n]; max_order + 1];
    w[0][0] = 1.0;
    let mut c1 = 1.0;
    let mut c4 = xs[0] - x0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = xs[i] - x0;
        for j in 0..i {
            let c3 = xs[i] - xs[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    w[k][i] = c1 * (k as f64 * w[k - 1][i - 1] - c5 * w[k][i - 1]) / c2;
                }
                w[0][i] = -c1 * c5 * w[0][i - 1] / c2;
            }
            for k in (1..=mn).rev() {
                w[k][j] = (c4 * w[k][j] - k as f64 * w[k - 1][j]) / c3;
            }
            w[0][j] *= c4 / c3;
        }
        c1 = c2;
    }
    w
}

/// `x^k ∂_x^k = Σ_j S[k][j] ∂_t^j` for `x = e^{−t}`.
const STIRLING: [[f64; 5]; 5] = [
    [1.0, 0.0, 0.0, 0.0, 0.0],
    [0.0, -1.0, 0.0, 0.0, 0.0],
    [0.0, 1.0, 1.0, 0.0, 0.0],
    [0.0, -2.0, -3.0, -1.0, 0.0],
    [0.0, 6.0, 11.0, 6.0, 1.0],
];

const STENCIL: usize = 7;

/// `Σ_j Σ_{k≤4} (1+|λ_j|)^{4−k} ∫ |∂_x^k u_j|² x^n dx` over `x ∈ [x_a, 1]`,
/// square-rooted; `t`-derivatives from 7-point stencils, shifted near the
/// ends of the grid.
pub fn interior_h4_norm(u: &FieldState, grid: &ConeGrid, x_a: f64) -> Result<f64> {
    u.check_grid(grid)?;
    if !(x_a > 0.0 && x_a < 1.0) {
        return Err(Error::InvalidInput(format!("x_a must lie in (0, 1), got {x_a}")));
    }
    let t_end = -x_a.ln();
    if t_end > grid.t_max + 1e-12 {
        return Err(Error::InvalidInput(format!("region x ≥ {x_a} leaves the grid")));
    }
    let nodes = grid.t_nodes();
    let count = nodes.iter().take_while(|t| **t <= t_end + 1e-9).count();
    if count < 5 || nodes.len() < STENCIL {
        return Err(Error::InvalidInput("region holds too few nodes".into()));
    }
    let n = grid.n() as f64;
    let cs = grid.cross_section();
    let w = simpson_weights(count, grid.dt);
    // stencil start and weights per node, in units of dt
    let offsets: Vec<f64> = (0..STENCIL).map(|j| j as f64).collect();
    let stencils: Vec<(usize, Vec<Vec<f64>>)> = (0..count)
        .map(|i| {
            let start = i.saturating_sub(STENCIL / 2).min(nodes.len() - STENCIL);
            let mut fw = fd_weights((i - start) as f64, &offsets, 4);
            for (k, row) in fw.iter_mut().enumerate() {
                row.iter_mut().for_each(|v| *v /= grid.dt.powi(k as i32));
            }
            (start, fw)
        })
        .collect();
    let total: f64 = (0..u.num_modes())
        .into_par_iter()
        .map(|m| {
            let lam = cs.eigenvalue(cs.level_of_mode(m)).abs();
            let row = &u.coeffs[m];
            let mut acc = 0.0;
            for i in 0..count {
                let (start, fw) = &stencils[i];
                let dt_k: Vec<f64> = fw
                    .iter()
                    .map(|wk| wk.iter().zip(&row[*start..start + STENCIL]).map(|(a, b)| a * b).sum())
                    .collect();
                let ti = nodes[i];
                let mut local = 0.0;
                for (k, s) in STIRLING.iter().enumerate() {
                    let xk: f64 = s.iter().zip(&dt_k).map(|(a, b)| a * b).sum::<f64>() * (k as f64 * ti).exp();
                    local += (1.0 + lam).powi(4 - k as i32) * xk * xk;
                }
                acc += w[i] * (-(n + 1.0) * ti).exp() * local;
            }
            acc
        })
        .sum();
    Ok(total.sqrt())
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResolutionRow {
    pub dt: f64,
    pub norm: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SmoothnessReport {
    pub x_a: f64,
    pub rows: Vec<ResolutionRow>,
    /// `norm_{k+1} / norm_k`, finer over coarser.
    pub ratios: Vec<f64>,
    /// Every ratio within `[1/1.2, 1.2]`.
    pub bounded: bool,
}

/// Interior norms of the same field sampled at several resolutions.
pub fn interior_smoothness_report(fields: &[(&FieldState, &ConeGrid)], x_a: f64) -> Result<SmoothnessReport> {
    if x_a < 0.1 {
        return Err(Error::InvalidInput(format!("interior region needs x_a ≥ 0.1, got {x_a}")));
    }
    let rows = fields
        .iter()
        .map(|(u, g)| {
            Ok(ResolutionRow {
                dt: g.dt,
                norm: interior_h4_norm(u, g, x_a)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ratios: Vec<f64> = rows
        .windows(2)
        .map(|w| {
            if w[0].norm == 0.0 && w[1].norm == 0.0 {
                1.0
            } else {
                w[1].norm / w[0].norm
            }
        })
        .collect();
    let bounded = ratios.iter().all(|r| (1.0 / 1.2..=1.2).contains(r));
    Ok(SmoothnessReport {
        x_a,
        rows,
        ratios,
        bounded,
    })
}
