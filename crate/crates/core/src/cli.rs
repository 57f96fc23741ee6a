//! Command-line front end: JSON configuration, subcommand dispatch and
//! deterministic output files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::asymptotics::{default_window, fit_exponents, match_catalog, FitOptions};
use crate::cone_symbol::{compute_bilaplacian_poles, compute_poles, pole_pair, PoleCatalog};
use crate::cross_section::CrossSection;
use crate::error::{Error, Result};
use crate::evolve::{initial_field, run, Diagnostics, RunConfig};
use crate::extensions::{complete_extension, default_gamma, ExtensionSpec};
use crate::mellin::{mellin_norm, ConeGrid, FieldState};
use crate::spectral_lab::{run_lab, LabConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GeometryKind {
    Circle,
    Sphere,
    Raw,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AsymptConfig {
    /// `t`-window; defaults to `[t_max − 4, t_max − 1]`.
    pub window: Option<(f64, f64)>,
    pub tol: f64,
}

impl Default for AsymptConfig {
    fn default() -> Self {
        AsymptConfig { window: None, tol: 0.05 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NormsConfig {
    pub orders: Vec<usize>,
}

impl Default for NormsConfig {
    fn default() -> Self {
        NormsConfig { orders: vec![0, 1, 2] }
    }
}

fn default_p() -> f64 {
    2.0
}

fn default_j_max() -> usize {
    32
}

fn default_t_max() -> f64 {
    12.0
}

fn default_grid_dt() -> f64 {
    2e-2
}

/// The configuration file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub geometry: GeometryKind,
    /// Circle length.
    #[serde(rename = "L", default, skip_serializing_if = "Option::is_none")]
    pub circumference: Option<f64>,
    /// Cross-section dimension for `sphere` and `raw`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eigenvalues: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub multiplicities: Option<Vec<usize>>,
    /// Highest level kept (Fourier mode, spherical degree).
    #[serde(default = "default_j_max")]
    pub j_max: usize,
    /// Defaults to the midpoint of the weight window.
    #[serde(default)]
    pub gamma: Option<f64>,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_t_max")]
    pub t_max: f64,
    #[serde(default = "default_grid_dt")]
    pub grid_dt: f64,
    #[serde(default)]
    pub run: RunConfig,
    #[serde(default)]
    pub lab: LabConfig,
    #[serde(default)]
    pub asympt: AsymptConfig,
    #[serde(default)]
    pub norms: NormsConfig,
}

fn pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { variant } => out.push_str(variant),
            Segment::Unknown => out.push('?'),
        }
    }
    if out.is_empty() {
        out.push('/');
    }
    out
}

/// Parses and validates a configuration document. Errors carry the JSON
/// pointer of the offending value.
pub fn parse_config_str(text: &str) -> Result<Config> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
        pointer: pointer(e.path()),
        message: e.inner().to_string(),
    })?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn parse_config(path: &Path) -> Result<Config> {
    let text = fs::read_to_string(path)?;
    parse_config_str(&text)
}

fn config_error(pointer: &str, message: impl Into<String>) -> Error {
    Error::Config {
        pointer: pointer.into(),
        message: message.into(),
    }
}

impl Config {
    fn validate(&self) -> Result<()> {
        match self.geometry {
            GeometryKind::Circle => {
                if self.circumference.is_none() {
                    return Err(config_error("/L", "circle geometry needs the length L"));
                }
            }
            GeometryKind::Sphere => {
                if self.n.is_none() {
                    return Err(config_error("/n", "sphere geometry needs n"));
                }
            }
            GeometryKind::Raw => {
                if self.n.is_none() || self.eigenvalues.is_none() || self.multiplicities.is_none() {
                    return Err(config_error(
                        "/",
                        "raw geometry needs n, eigenvalues and multiplicities",
                    ));
                }
            }
        }
        if !(self.p >= 1.0) {
            return Err(config_error("/p", format!("p must be at least 1, got {}", self.p)));
        }
        if !(self.t_max > 0.0) {
            return Err(config_error("/t_max", "t_max must be positive"));
        }
        if !(self.grid_dt > 0.0 && self.grid_dt < self.t_max) {
            return Err(config_error("/grid_dt", "grid_dt must lie in (0, t_max)"));
        }
        self.run.validate().map_err(|e| config_error("/run", e.to_string()))
    }

    pub fn cross_section(&self) -> Result<CrossSection> {
        match self.geometry {
            GeometryKind::Circle => CrossSection::circle(self.circumference.unwrap_or(0.0), self.j_max),
            GeometryKind::Sphere => CrossSection::sphere(self.n.unwrap_or(0), self.j_max),
            GeometryKind::Raw => CrossSection::raw(
                self.n.unwrap_or(0),
                self.eigenvalues.as_deref().unwrap_or(&[]),
                self.multiplicities.as_deref().unwrap_or(&[]),
            ),
        }
    }

    /// Weight after defaulting.
    pub fn resolved_gamma(&self, cs: &CrossSection) -> Result<f64> {
        match self.gamma {
            Some(g) => Ok(g),
            None => default_gamma(cs),
        }
    }

    /// Copy with every default made explicit.
    pub fn resolved(&self) -> Result<Config> {
        let cs = self.cross_section()?;
        let mut out = self.clone();
        out.gamma = Some(self.resolved_gamma(&cs)?);
        if out.asympt.window.is_none() {
            out.asympt.window = Some(default_window(&ConeGrid::new(self.t_max, self.grid_dt, cs)?));
        }
        Ok(out)
    }

    pub fn extension(&self, cs: &CrossSection) -> Result<ExtensionSpec> {
        complete_extension(self.resolved_gamma(cs)?, self.p, cs)
    }

    pub fn grid(&self, cs: CrossSection) -> Result<ConeGrid> {
        ConeGrid::new(self.t_max, self.grid_dt, cs)
    }
}

#[derive(Debug, Parser)]
#[command(name = "conelab", version, about = "Phase-field dynamics on conic manifolds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, clap::Args)]
pub struct Common {
    /// JSON configuration file.
    #[arg(short, long)]
    pub config: PathBuf,
    /// Output directory (created if missing).
    #[arg(short, long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Print the configuration with all defaults filled in.
    Config(Common),
    /// Pole catalogs of the Laplacian and bilaplacian symbols: poles.json.
    Poles(Common),
    /// Chosen closed extensions and bilaplacian domain: domain.json.
    Domain(Common),
    /// Weighted Mellin-Sobolev norms of the initial data: norms.csv.
    Norms(Common),
    /// Time integration: diagnostics.csv and snapshots/.
    Simulate(Common),
    /// Matrix-scale operator experiments: lab.json.
    Lab(Common),
    /// Near-tip exponent fits of the final state: asympt.csv.
    Asympt(Common),
}

impl Command {
    fn common(&self) -> &Common {
        match self {
            Command::Config(c)
            | Command::Poles(c)
            | Command::Domain(c)
            | Command::Norms(c)
            | Command::Simulate(c)
            | Command::Lab(c)
            | Command::Asympt(c) => c,
        }
    }
}

fn num(v: f64) -> String {
    // no negative zero in the output
    let v = if v == 0.0 { 0.0 } else { v };
    format!("{v:.16e}")
}

fn write_file(dir: &Path, name: &str, content: &str) -> Result<PathBuf> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(&path, content)?;
    Ok(path)
}

fn pretty(v: &impl Serialize) -> Result<String> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    Ok(s)
}

fn pole_rows(cat: &PoleCatalog) -> serde_json::Value {
    cat.entries
        .iter()
        .map(|p| {
            json!({
                "rho": p.rho.value(),
                "exact": p.rho.to_string(),
                "order": p.order,
                "mode": p.mode,
                "origin": p.origin,
            })
        })
        .collect()
}

pub fn poles_document(cs: &CrossSection) -> Result<serde_json::Value> {
    let lap = compute_poles(cs);
    let bilap = compute_bilaplacian_poles(&lap)?;
    let levels: Vec<serde_json::Value> = (0..cs.num_levels())
        .map(|j| {
            let (qp, qm) = pole_pair(cs, j);
            json!({
                "level": j,
                "eigenvalue": cs.eigenvalue(j),
                "multiplicity": cs.multiplicity(j),
                "q_plus": qp.value(),
                "q_minus": qm.value(),
                "q_plus_exact": qp.to_string(),
                "q_minus_exact": qm.to_string(),
            })
        })
        .collect();
    Ok(json!({
        "cross_section": cs.to_document(),
        "levels": levels,
        "laplacian": pole_rows(&lap),
        "bilaplacian": pole_rows(&bilap),
    }))
}

pub fn diagnostics_csv(rows: &[Diagnostics]) -> String {
    let mut s = String::from("step,time,mass,energy,supnorm,norm0,norm2\n");
    for d in rows {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            d.step,
            num(d.time),
            num(d.mass),
            num(d.energy),
            num(d.supnorm),
            num(d.norm0),
            num(d.norm2)
        );
    }
    s
}

pub fn snapshot_csv(u: &FieldState, grid: &ConeGrid, step: usize) -> Result<String> {
    let header = json!({
        "step": step,
        "time": u.time,
        "gamma": u.gamma,
        "p": u.p,
        "grid": grid.meta(),
    });
    let mut s = format!("# {}\nt_index,mode,coefficient\n", serde_json::to_string(&header)?);
    for i in 0..u.num_nodes() {
        for (m, row) in u.coeffs.iter().enumerate() {
            let _ = writeln!(s, "{i},{m},{}", num(row[i]));
        }
    }
    Ok(s)
}

fn norms_csv(u: &FieldState, orders: &[usize], grid: &ConeGrid) -> Result<String> {
    let mut s = String::from("time,k,gamma,p,value\n");
    for &k in orders {
        let v = mellin_norm(u, k, u.gamma, u.p, grid)?;
        let _ = writeln!(s, "{},{k},{},{},{}", num(u.time), num(u.gamma), num(u.p), num(v));
    }
    Ok(s)
}

fn asympt_csv(u: &FieldState, grid: &ConeGrid, spec: &ExtensionSpec, cfg: &AsymptConfig) -> Result<String> {
    let window = cfg.window.unwrap_or_else(|| default_window(grid));
    let cs = grid.cross_section();
    let mut s = String::from("mode,a_hat,log_coeff,residual,matched_exponent,verdict\n");
    for m in 0..u.num_modes() {
        match fit_exponents(u, m, window, grid, &FitOptions::default()) {
            Ok(fit) => {
                let hit = match_catalog(fit.a_hat, spec, Some(cs.level_of_mode(m)), cfg.tol);
                let _ = writeln!(
                    s,
                    "{m},{},{},{},{},{}",
                    num(fit.a_hat),
                    num(fit.log_coeff),
                    num(fit.residual),
                    num(hit.matched),
                    if hit.pass { "pass" } else { "fail" }
                );
            }
            Err(Error::ZeroMode(_)) => {
                let _ = writeln!(s, "{m},NaN,NaN,NaN,NaN,zero");
            }
            Err(e) => return Err(e),
        }
    }
    Ok(s)
}

/// Runs one subcommand and returns the files written.
pub fn dispatch(cmd: &Command) -> Result<Vec<PathBuf>> {
    let common = cmd.common();
    let cfg = parse_config(&common.config)?;
    let out = &common.out;
    let cs = cfg.cross_section()?;
    let mut written = Vec::new();
    match cmd {
        Command::Config(_) => {
            print!("{}", pretty(&cfg.resolved()?)?);
        }
        Command::Poles(_) => {
            written.push(write_file(out, "poles.json", &pretty(&poles_document(&cs)?)?)?);
        }
        Command::Domain(_) => {
            let spec = cfg.extension(&cs)?;
            written.push(write_file(out, "domain.json", &pretty(&spec.to_json())?)?);
        }
        Command::Norms(_) => {
            let spec = cfg.extension(&cs)?;
            let grid = cfg.grid(cs)?;
            let u = initial_field(&cfg.run.initial, &grid, spec.gamma, spec.p, cfg.run.seed)?;
            written.push(write_file(out, "norms.csv", &norms_csv(&u, &cfg.norms.orders, &grid)?)?);
        }
        Command::Simulate(_) => {
            let spec = cfg.extension(&cs)?;
            let grid = cfg.grid(cs)?;
            let tr = run(&cfg.run, &grid, &spec)?;
            written.push(write_file(out, "diagnostics.csv", &diagnostics_csv(&tr.diagnostics))?);
            let last = tr.diagnostics.last().map_or(0, |d| d.step);
            let mut snaps = tr.snapshots;
            if snaps.last().is_none_or(|(s, _)| *s != last) {
                snaps.push((last, tr.final_state));
            }
            for (step, u) in &snaps {
                let name = format!("snapshots/snap_{step:06}.csv");
                written.push(write_file(out, &name, &snapshot_csv(u, &grid, *step)?)?);
            }
        }
        Command::Lab(_) => {
            let spec = cfg.extension(&cs)?;
            let grid = cfg.grid(cs)?;
            let report = run_lab(&grid, &spec, &cfg.lab)?;
            written.push(write_file(out, "lab.json", &pretty(&report)?)?);
        }
        Command::Asympt(_) => {
            let spec = cfg.extension(&cs)?;
            let grid = cfg.grid(cs)?;
            let tr = run(&cfg.run, &grid, &spec)?;
            let text = asympt_csv(&tr.final_state, &grid, &spec, &cfg.asympt)?;
            written.push(write_file(out, "asympt.csv", &text)?);
        }
    }
    Ok(written)
}

/// Exit code: 0 success, 1 invalid input, 2 numerical failure.
pub fn exit_code(result: &Result<Vec<PathBuf>>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(e) if e.is_numerical() => 2,
        Err(_) => 1,
    }
}

/// Entry point shared by the binary and the tests.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let result = dispatch(&cli.command);
    if let Err(e) = &result {
        eprintln!("error: {e}");
    }
    exit_code(&result)
}
