//! Command-line front end.
//!
//! A JSON config selects the spec and the command-specific inputs; tables go
//! out as CSV (fixed `%.12e` floats) or JSON with a `meta` block carrying the
//! crate version and a SHA-256 of the canonical config.

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::SolveError;
use crate::oracle::{default_half_width, oracle_eigenvalues, root_options};
use crate::potential::{Axis, PotentialSpec, C64};
use crate::rootfind::{find_ep, EPResult, Rect, Root, RootOptions, ScanOptions};
use crate::shooting::ShootingOptions;
use crate::sweep::{
    classify_transition, pair_conjugates, preset, run_preset, run_sweep, sweep_rows, PairLabel,
    SweepPlan, SweepRow, TransitionKind, TransitionReport, PAIR_TOL,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_NO_EP: i32 = 4;

#[derive(Parser, Debug)]
#[command(
    name = "ptspectra",
    version,
    about = "Spectra and exceptional points of PT-symmetric double wells"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    /// Eigenvalues of one spec inside a rectangle.
    Solve(#[command(flatten)] Common),
    /// Track branches across a parameter grid.
    Sweep(#[command(flatten)] Common),
    /// Locate the exceptional point of a doublet.
    Ep(#[command(flatten)] Common),
    /// Finite-difference eigenvalues for cross-checking.
    Oracle(#[command(flatten)] Common),
    /// Run a figure preset.
    Figure(#[command(flatten)] Common),
}

#[derive(clap::Args, Debug, Clone, Copy, PartialEq, Eq)]
pub struct Common {
    /// JSON config file.
    #[arg(long)]
    pub config: Option<PathBufArg>,
    /// Output path; stdout when absent. For `figure --format csv` a directory.
    #[arg(long)]
    pub out: Option<PathBufArg>,
    #[arg(long, value_enum)]
    pub format: Option<Format>,
    #[arg(long, value_enum)]
    pub preset: Option<PresetName>,
}

/// Interned path argument so `Common` stays `Copy`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathBufArg(&'static str);

impl std::str::FromStr for PathBufArg {
    type Err = std::convert::Infallible;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(Self(Box::leak(s.to_owned().into_boxed_str())))
    }
}

impl PathBufArg {
    fn path(self) -> PathBuf {
        PathBuf::from(self.0)
    }
}

#[derive(ValueEnum, Serialize, Deserialize, Debug, Clone, Copy, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    Csv,
    Json,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum PresetName {
    Fig2a,
    Fig2b,
    Fig2c,
    Fig3,
    Fig4,
    Fig5,
}

impl PresetName {
    fn as_str(self) -> &'static str {
        match self {
            PresetName::Fig2a => "fig2a",
            PresetName::Fig2b => "fig2b",
            PresetName::Fig2c => "fig2c",
            PresetName::Fig3 => "fig3",
            PresetName::Fig4 => "fig4",
            PresetName::Fig5 => "fig5",
        }
    }
}

/// A sweep grid: explicit values or `n` evenly spaced values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Grid {
    List(Vec<f64>),
    Range { from: f64, to: f64, n: usize },
}

impl Grid {
    pub fn values(&self) -> Vec<f64> {
        match self {
            Grid::List(v) => v.clone(),
            Grid::Range { from, to, n } if *n >= 2 => (0..*n)
                .map(|k| from + (to - from) * k as f64 / (*n - 1) as f64)
                .collect(),
            Grid::Range { from, .. } => vec![*from],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(rename = "L")]
    pub l: Option<f64>,
    #[serde(default = "default_oracle_n")]
    pub n: usize,
}

fn default_oracle_n() -> usize {
    8000
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EpSeed {
    pub energy: C64,
    pub lambda: f64,
}

/// Everything a command may read from the config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub spec: Option<PotentialSpec>,
    pub rect: Option<Rect>,
    pub axis: Option<Axis>,
    pub grid: Option<Grid>,
    pub n_levels: Option<usize>,
    /// Branch ids of the doublet to classify (default `[0, 1]`).
    pub pair: Option<[usize; 2]>,
    /// Skip the bracketing sweep of `ep` and start from this point.
    pub seed: Option<EpSeed>,
    pub oracle: Option<OracleConfig>,
    pub preset: Option<String>,
    /// Sweep the delta position instead of the wall position in `fig4`.
    #[serde(default)]
    pub alt_axis: bool,
    pub root: Option<RootOptions>,
    pub scan: Option<ScanOptions>,
    pub shooting: Option<ShootingOptions>,
    pub format: Option<Format>,
    pub out: Option<PathBuf>,
}

/// A failure with its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
    /// Structured detail printed as JSON on stderr (the sweep classification
    /// for a missing exceptional point).
    pub detail: Option<serde_json::Value>,
}

impl CliError {
    fn config(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            message: message.into(),
            detail: None,
        }
    }
}

impl From<SolveError> for CliError {
    fn from(e: SolveError) -> Self {
        let code = match e {
            SolveError::InvalidSpec(_)
            | SolveError::BadGeometry(_)
            | SolveError::Unsupported(_)
            | SolveError::Unconfined => EXIT_CONFIG,
            SolveError::BadBracket(_) => EXIT_NO_EP,
            _ => EXIT_NUMERICAL,
        };
        Self {
            code,
            message: e.to_string(),
            detail: None,
        }
    }
}

type CliResult<T> = Result<T, CliError>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub version: String,
    pub config_hash: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RootRow {
    pub index: usize,
    #[serde(rename = "re_E")]
    pub re_e: f64,
    #[serde(rename = "im_E")]
    pub im_e: f64,
    pub residual: f64,
    pub classification: String,
    pub pair_id: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SolveOutput {
    pub rows: Vec<RootRow>,
    pub failed_seeds: usize,
    pub meta: Meta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepOutput {
    pub rows: Vec<SweepRow>,
    pub transition: Option<TransitionReport>,
    pub meta: Meta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpOutput {
    pub param_star: f64,
    pub energy_star: C64,
    #[serde(rename = "residual_F")]
    pub residual_f: f64,
    #[serde(rename = "residual_dF")]
    pub residual_df: f64,
    pub splitting_exponent: f64,
    pub lambda_bisect: Option<f64>,
    pub meta: Meta,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PairTransition {
    pub pair: [usize; 2],
    pub report: Option<TransitionReport>,
    pub error: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureSweep {
    pub label: String,
    pub rows: Vec<SweepRow>,
    pub transitions: Vec<PairTransition>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FigureOutput {
    pub preset: String,
    pub sweeps: Vec<FigureSweep>,
    pub meta: Meta,
}

/// C-style `%.12e`: twelve mantissa digits and a signed exponent of at least
/// two digits.
pub fn fmt_e12(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    let s = format!("{x:.12e}");
    let (mantissa, exp) = s.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    let sign = if exp < 0 { '-' } else { '+' };
    format!("{mantissa}e{sign}{:02}", exp.abs())
}

pub const SWEEP_HEADER: &str = "lambda,branch_id,re_E,im_E,residual,classification,pair_id";
pub const ROOT_HEADER: &str = "index,re_E,im_E,residual,classification,pair_id";

fn opt_id(id: Option<usize>) -> String {
    id.map(|v| v.to_string()).unwrap_or_default()
}

pub fn sweep_csv(rows: &[SweepRow]) -> String {
    let mut out = String::new();
    out.push_str(SWEEP_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_e12(r.lambda),
            r.branch_id,
            fmt_e12(r.re_e),
            fmt_e12(r.im_e),
            fmt_e12(r.residual),
            r.classification,
            opt_id(r.pair_id)
        );
    }
    out
}

fn roots_csv(rows: &[RootRow]) -> String {
    let mut out = String::new();
    out.push_str(ROOT_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{}",
            r.index,
            fmt_e12(r.re_e),
            fmt_e12(r.im_e),
            fmt_e12(r.residual),
            r.classification,
            opt_id(r.pair_id)
        );
    }
    out
}

fn root_rows(roots: &[Root], real_tol: f64) -> Vec<RootRow> {
    let energies: Vec<C64> = roots.iter().map(|r| r.energy).collect();
    pair_conjugates(&energies, real_tol, PAIR_TOL)
        .into_iter()
        .zip(roots)
        .enumerate()
        .map(|(index, (label, r))| RootRow {
            index,
            re_e: r.energy.re,
            im_e: r.energy.im,
            residual: r.residual,
            classification: r.classification.as_str().into(),
            pair_id: match label {
                PairLabel::Pair(j) => Some(j),
                _ => None,
            },
        })
        .collect()
}

fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

/// The hash covers the inputs that determine the numbers, not where or how
/// they are written.
fn meta_for(config: &RunConfig) -> Meta {
    let inputs = RunConfig {
        format: None,
        out: None,
        ..config.clone()
    };
    let canonical = serde_json::to_vec(&inputs).expect("serializable config");
    Meta {
        version: env!("CARGO_PKG_VERSION").into(),
        config_hash: hex::encode(Sha256::digest(&canonical)),
    }
}

fn load_config(common: &Common) -> CliResult<RunConfig> {
    let mut config = match common.config {
        Some(path) => {
            let path = path.path();
            let text = fs::read_to_string(&path)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", path.display())))?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| CliError::config(format!("invalid config {}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(p) = common.preset {
        config.preset = Some(p.as_str().into());
    }
    if let Some(f) = common.format {
        config.format = Some(f);
    }
    if let Some(o) = common.out {
        config.out = Some(o.path());
    }
    Ok(config)
}

fn need<T: Clone>(value: &Option<T>, name: &str) -> CliResult<T> {
    value
        .clone()
        .ok_or_else(|| CliError::config(format!("config field '{name}' is required")))
}

fn write_output(out: Option<&Path>, text: &str) -> CliResult<()> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| CliError {
            code: EXIT_CONFIG,
            message: format!("cannot write {}: {e}", path.display()),
            detail: None,
        }),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout
                .write_all(text.as_bytes())
                .and_then(|_| stdout.flush())
                .map_err(|e| CliError {
                    code: EXIT_NUMERICAL,
                    message: format!("cannot write output: {e}"),
                    detail: None,
                })
        }
    }
}

fn sweep_plan(config: &RunConfig) -> CliResult<SweepPlan> {
    let plan = SweepPlan {
        spec_template: need(&config.spec, "spec")?,
        axis: need(&config.axis, "axis")?,
        grid: need(&config.grid, "grid")?.values(),
        region: need(&config.rect, "rect")?,
        n_levels: config.n_levels.unwrap_or(2),
        root: config.root.unwrap_or_default(),
        scan: config.scan.unwrap_or_default(),
        shooting: config.shooting.unwrap_or_default(),
    };
    plan.validate()?;
    Ok(plan)
}

fn transition_for(
    plan: &SweepPlan,
    branches: &[crate::sweep::Branch],
    pair: [usize; 2],
) -> CliResult<TransitionReport> {
    let (Some(a), Some(b)) = (branches.get(pair[0]), branches.get(pair[1])) else {
        return Err(CliError {
            code: EXIT_NUMERICAL,
            message: format!(
                "sweep produced {} branches; pair {pair:?} not available",
                branches.len()
            ),
            detail: None,
        });
    };
    Ok(classify_transition(
        &plan.family(),
        [a, b],
        None,
        &plan.root,
    )?)
}

fn cmd_solve(config: &RunConfig) -> CliResult<String> {
    let spec = need(&config.spec, "spec")?;
    spec.validate()?;
    let rect = need(&config.rect, "rect")?;
    let opts = config.root.unwrap_or_default();
    let found = crate::eigenvalues(
        &spec,
        &rect,
        &config.shooting.unwrap_or_default(),
        &opts,
        &config.scan.unwrap_or_default(),
    )?;
    let out = SolveOutput {
        rows: root_rows(&found.roots, opts.real_axis_tol),
        failed_seeds: found.failed_seeds,
        meta: meta_for(config),
    };
    Ok(match config.format.unwrap_or(Format::Csv) {
        Format::Csv => roots_csv(&out.rows),
        Format::Json => to_json(&out),
    })
}

fn cmd_oracle(config: &RunConfig) -> CliResult<String> {
    let spec = need(&config.spec, "spec")?;
    spec.validate()?;
    let rect = need(&config.rect, "rect")?;
    let oc = config.oracle.clone().unwrap_or(OracleConfig {
        l: None,
        n: default_oracle_n(),
    });
    let l = oc.l.unwrap_or_else(|| default_half_width(&spec));
    let opts = config.root.unwrap_or_else(root_options);
    let found = oracle_eigenvalues(
        &spec,
        l,
        oc.n,
        &rect,
        &opts,
        &config.scan.unwrap_or_default(),
    )?;
    let out = SolveOutput {
        rows: root_rows(&found.roots, opts.real_axis_tol),
        failed_seeds: found.failed_seeds,
        meta: meta_for(config),
    };
    Ok(match config.format.unwrap_or(Format::Csv) {
        Format::Csv => roots_csv(&out.rows),
        Format::Json => to_json(&out),
    })
}

fn cmd_sweep(config: &RunConfig) -> CliResult<String> {
    let plan = sweep_plan(config)?;
    let branches = run_sweep(&plan)?;
    for b in &branches {
        if let Some(at) = b.lost_at {
            eprintln!("branch {} lost at {} = {at}", b.id, plan.axis.name());
        }
    }
    let rows = sweep_rows(&branches, &plan.grid, plan.root.real_axis_tol);
    let transition = transition_for(&plan, &branches, config.pair.unwrap_or([0, 1])).ok();
    let out = SweepOutput {
        rows,
        transition,
        meta: meta_for(config),
    };
    Ok(match config.format.unwrap_or(Format::Csv) {
        Format::Csv => {
            let mut s = sweep_csv(&out.rows);
            if let Some(t) = &out.transition {
                let _ = writeln!(
                    s,
                    "# transition {}",
                    serde_json::to_string(t).expect("serializable")
                );
            }
            s
        }
        Format::Json => to_json(&out),
    })
}

fn ep_output(ep: EPResult, lambda_bisect: Option<f64>, config: &RunConfig) -> EpOutput {
    EpOutput {
        param_star: ep.param_star,
        energy_star: ep.energy_star,
        residual_f: ep.residual_f,
        residual_df: ep.residual_df,
        splitting_exponent: ep.splitting_exponent,
        lambda_bisect,
        meta: meta_for(config),
    }
}

fn cmd_ep(config: &RunConfig) -> CliResult<String> {
    let out = if let Some(seed) = &config.seed {
        let spec = need(&config.spec, "spec")?;
        let fam = crate::sweep::SpecFamily {
            template: spec,
            axis: need(&config.axis, "axis")?,
            shooting: config.shooting.unwrap_or_default(),
        };
        let ep = find_ep(
            &fam,
            seed.energy,
            seed.lambda,
            &config.root.unwrap_or_default(),
        )?;
        ep_output(ep, None, config)
    } else {
        let plan = sweep_plan(config)?;
        let branches = run_sweep(&plan)?;
        let report = match transition_for(&plan, &branches, config.pair.unwrap_or([0, 1])) {
            Ok(r) => r,
            Err(e) if e.code == EXIT_NO_EP => return Err(e),
            Err(e) => return Err(e),
        };
        match (report.kind, report.ep) {
            (TransitionKind::Coalescing, Some(ep)) => ep_output(ep, report.lambda_bisect, config),
            (kind, _) => {
                return Err(CliError {
                    code: EXIT_NO_EP,
                    message: format!("no exceptional point in the sweep (classified as {kind:?})"),
                    detail: serde_json::to_value(&report).ok(),
                })
            }
        }
    };
    Ok(to_json(&out))
}

fn cmd_figure(config: &RunConfig) -> CliResult<()> {
    let name = need(&config.preset, "preset")?;
    let p = preset(&name, config.alt_axis)?;
    let outcomes = run_preset(&p)?;
    let sweeps: Vec<FigureSweep> = p
        .sweeps
        .iter()
        .zip(&outcomes)
        .map(|(s, o)| {
            for b in &o.branches {
                if let Some(at) = b.lost_at {
                    eprintln!(
                        "{}: branch {} lost at {} = {at}",
                        o.label,
                        b.id,
                        s.plan.axis.name()
                    );
                }
            }
            FigureSweep {
                label: o.label.clone(),
                rows: sweep_rows(&o.branches, &s.plan.grid, s.plan.root.real_axis_tol),
                transitions: o
                    .transitions
                    .iter()
                    .map(|(i, j, r)| PairTransition {
                        pair: [*i, *j],
                        report: r.as_ref().ok().cloned(),
                        error: r.as_ref().err().map(|e| e.to_string()),
                    })
                    .collect(),
            }
        })
        .collect();
    let out = FigureOutput {
        preset: name,
        sweeps,
        meta: meta_for(config),
    };
    match config.format.unwrap_or(Format::Csv) {
        Format::Json => write_output(config.out.as_deref(), &to_json(&out)),
        Format::Csv => {
            let block = |s: &FigureSweep| {
                let mut text = sweep_csv(&s.rows);
                for t in &s.transitions {
                    let _ = writeln!(
                        text,
                        "# transition {}",
                        serde_json::to_string(t).expect("serializable")
                    );
                }
                text
            };
            match &config.out {
                Some(dir) => {
                    fs::create_dir_all(dir).map_err(|e| {
                        CliError::config(format!("cannot create {}: {e}", dir.display()))
                    })?;
                    for s in &out.sweeps {
                        write_output(
                            Some(&dir.join(format!("{}_{}.csv", out.preset, s.label))),
                            &block(s),
                        )?;
                    }
                    write_output(
                        Some(&dir.join(format!("{}_meta.json", out.preset))),
                        &to_json(&out.meta),
                    )
                }
                None => {
                    let mut text = String::new();
                    for s in &out.sweeps {
                        let _ = writeln!(text, "# sweep {}", s.label);
                        text.push_str(&block(s));
                    }
                    write_output(None, &text)
                }
            }
        }
    }
}

fn dispatch(cli: &Cli) -> CliResult<()> {
    let (common, run): (&Common, fn(&RunConfig) -> CliResult<String>) = match &cli.command {
        Command::Solve(c) => (c, cmd_solve),
        Command::Sweep(c) => (c, cmd_sweep),
        Command::Ep(c) => (c, cmd_ep),
        Command::Oracle(c) => (c, cmd_oracle),
        Command::Figure(c) => {
            let config = load_config(c)?;
            return cmd_figure(&config);
        }
    };
    if common.config.is_none() {
        return Err(CliError::config("--config is required"));
    }
    let config = load_config(common)?;
    let text = run(&config)?;
    write_output(config.out.as_deref(), &text)
}

/// Run with explicit arguments and return the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    match dispatch(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {}", e.message);
            if let Some(detail) = e.detail {
                eprintln!("{detail}");
            }
            e.code
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn c_style_exponent() {
        assert_eq!(fmt_e12(1.0), "1.000000000000e+00");
        assert_eq!(fmt_e12(-0.00123), "-1.230000000000e-03");
        assert_eq!(fmt_e12(6.02e23), "6.020000000000e+23");
        assert_eq!(fmt_e12(1e-100), "1.000000000000e-100");
        assert_eq!(fmt_e12(0.0), "0.000000000000e+00");
    }

    #[test]
    fn grid_forms() {
        let g: Grid = serde_json::from_str(r#"{"from": 1, "to": 2, "n": 3}"#).unwrap();
        assert_eq!(g.values(), vec![1.0, 1.5, 2.0]);
        let g: Grid = serde_json::from_str("[0.5, 0.7]").unwrap();
        assert_eq!(g.values(), vec![0.5, 0.7]);
    }

    #[test]
    fn unknown_fields_rejected() {
        let bad =
            r#"{"spec": {"family": "double_delta", "u": 2, "g": 0, "a": 4}, "rectangle": null}"#;
        assert!(serde_json::from_str::<RunConfig>(bad).is_err());
        let bad_spec = r#"{"spec": {"family": "double_delta", "u": 2, "g": 0, "a": 4, "b": 1}}"#;
        assert!(serde_json::from_str::<RunConfig>(bad_spec).is_err());
    }

    #[test]
    fn error_codes() {
        assert_eq!(
            CliError::from(SolveError::InvalidSpec("x".into())).code,
            EXIT_CONFIG
        );
        assert_eq!(
            CliError::from(SolveError::BadBracket("x".into())).code,
            EXIT_NO_EP
        );
        assert_eq!(CliError::from(SolveError::Overflow).code, EXIT_NUMERICAL);
    }
}
