//! Argument definitions and the four subcommands.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use prisel::deconv::{fit_grouped, fit_prior, DeconvConfig, GroupedFit, SigmaGrouping, DEFAULT_GRID_SIZE};
use prisel::model::pvalues;
use prisel::rvalue::{default_alpha_grid, default_mu0_grid, rvalue_vary_alpha, rvalue_vary_mu0, RValueTable};
use prisel::selection::{score_units, select_bh, select_clfdr_stepup, select_dd, ScoreTransform};
use prisel::sim::{run_replications, SimDesign};
use prisel::{Observation, SelectionResult};
use serde::Serialize;
use serde_json::json;

use crate::error::{CliError, CliResult};
use crate::ingest::{read_observations, trim_by_se_percentile};

pub const ARTIFACT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Parser, Serialize)]
#[command(name = "prisel", version, about = "Prioritized selection under FDR control")]
pub struct Cli {
    /// Worker threads; defaults to all cores.
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Subcommand, Serialize)]
#[serde(tag = "name", rename_all = "kebab-case")]
pub enum Command {
    /// Fit the grid prior and write it as JSON.
    DeconvFit(FitArgs),
    /// Score and select units; writes selection.csv and selection.json.
    Select(SelectArgs),
    /// r-values and standardized ranks; writes rvalues.csv and rvalues.json.
    Rvalue(RvalueArgs),
    /// Run a simulation design; writes report.json and tidy.csv.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct InputArgs {
    /// CSV with id,x,sigma or id,Y,Yprime,n,nprime.
    #[arg(long)]
    pub input: PathBuf,

    /// Output directory, created if missing.
    #[arg(long)]
    pub output: PathBuf,

    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,

    /// Recorded in the artifacts; these commands draw no random numbers.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Drop units whose sigma is below this percentile (0 to 1).
    #[arg(long)]
    pub trim_lower: Option<f64>,

    /// Drop units whose sigma is above this percentile (0 to 1).
    #[arg(long)]
    pub trim_upper: Option<f64>,

    /// Fit separate priors for sigma <= value and sigma > value.
    #[arg(long, conflicts_with = "group_by_sigma")]
    pub sigma_split: Option<f64>,

    /// Fit a separate prior for every distinct sigma.
    #[arg(long)]
    pub group_by_sigma: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    #[command(flatten)]
    pub io: InputArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    /// Prioritized data-driven rule.
    Dd,
    /// Clfdr step-up.
    Clfdr,
    Bh,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SelectArgs {
    #[command(flatten)]
    pub io: InputArgs,

    #[arg(long)]
    pub alpha: f64,

    #[arg(long, allow_hyphen_values = true)]
    pub mu0: f64,

    /// Rule whose decisions fill the `selected` column.
    #[arg(long, value_enum, default_value_t = MethodArg::Dd)]
    pub method: MethodArg,

    /// Use `(2/pi) atan(t / scale)` instead of tanh for the score.
    #[arg(long)]
    pub atan_scale: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DefinitionArg {
    /// Smallest level selecting the unit, at fixed `--mu0`.
    Alpha,
    /// Largest cutoff selecting the unit, at fixed `--alpha`.
    Mu0,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct RvalueArgs {
    #[command(flatten)]
    pub io: InputArgs,

    #[arg(long, value_enum)]
    pub definition: DefinitionArg,

    /// Level; required for `--definition mu0`.
    #[arg(long)]
    pub alpha: Option<f64>,

    /// Cutoff; required for `--definition alpha`.
    #[arg(long, allow_hyphen_values = true)]
    pub mu0: Option<f64>,

    #[arg(long, default_value_t = 200)]
    pub grid_points: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DesignArg {
    TwoComponent,
    Uniform,
    Correlated,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    #[arg(long, value_enum)]
    pub design: DesignArg,

    /// Upper end of the sigma range (uniform design).
    #[arg(long, default_value_t = 3.0)]
    pub sigma_max: f64,

    /// Second-half sigma (two-component) or the base sigma (correlated).
    #[arg(long, default_value_t = 2.0)]
    pub sigma: f64,

    /// Units per replication; defaults to 5000 (uniform) or 10000.
    #[arg(long)]
    pub m: Option<usize>,

    #[arg(long, default_value_t = 20)]
    pub reps: usize,

    #[arg(long, default_value_t = 0)]
    pub seed: u64,

    /// Monte Carlo draws for the oracle cutoffs.
    #[arg(long, default_value_t = 1_000_000)]
    pub n_mc: usize,

    /// Overrides the design's level.
    #[arg(long)]
    pub alpha: Option<f64>,

    #[arg(long, default_value_t = DEFAULT_GRID_SIZE)]
    pub grid_size: usize,

    #[arg(long)]
    pub output: PathBuf,
}

/// Envelope shared by every JSON artifact.
#[derive(Debug, Serialize)]
struct Artifact<'a, R: Serialize> {
    schema_version: u32,
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    config: &'a Cli,
    seed: u64,
    /// Largest gap between adjacent grid points behind the result.
    grid_resolution: Option<f64>,
    result: R,
}

fn write_json<R: Serialize>(
    path: &Path,
    cli: &Cli,
    command: &'static str,
    seed: u64,
    grid_resolution: Option<f64>,
    result: R,
) -> CliResult<()> {
    let doc = Artifact {
        schema_version: ARTIFACT_SCHEMA_VERSION,
        tool: "prisel",
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: cli,
        seed,
        grid_resolution,
        result,
    };
    let text = serde_json::to_string_pretty(&doc)?;
    fs::write(path, text + "\n").map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> CliResult<()> {
    let io = |e: csv::Error| CliError::Io { path: path.to_path_buf(), source: e.into() };
    let mut w = csv::Writer::from_path(path).map_err(io)?;
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(&row).map_err(io)?;
    }
    w.flush().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

fn output_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|source| CliError::Io { path: dir.to_path_buf(), source })
}

fn load(io: &InputArgs) -> CliResult<Vec<Observation>> {
    let obs = read_observations(&io.input)?;
    if io.trim_lower.is_none() && io.trim_upper.is_none() {
        return Ok(obs);
    }
    Ok(trim_by_se_percentile(obs, io.trim_lower.unwrap_or(0.0), io.trim_upper.unwrap_or(1.0))?)
}

fn grouping(io: &InputArgs) -> SigmaGrouping<f64> {
    match (io.sigma_split, io.group_by_sigma) {
        (Some(at), _) => SigmaGrouping::Split { at },
        (None, true) => SigmaGrouping::DistinctValues,
        (None, false) => SigmaGrouping::Pooled,
    }
}

fn fit(io: &InputArgs, obs: &[Observation]) -> CliResult<GroupedFit<f64>> {
    let config = DeconvConfig { grid_size: io.grid_size, ..Default::default() };
    Ok(fit_grouped(obs, &grouping(io), &config)?)
}

fn prior_resolution(fit: &GroupedFit<f64>) -> Option<f64> {
    fit.fits.iter().map(|f| f.grid.eta()).reduce(f64::max)
}

/// Execute a parsed command line.
pub fn run(cli: &Cli) -> CliResult<()> {
    if let Some(n) = cli.threads {
        if n == 0 {
            return Err(CliError::Usage("--threads must be at least 1".into()));
        }
        // a second call in the same process keeps the first pool
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match &cli.command {
        Command::DeconvFit(a) => deconv_fit(cli, a),
        Command::Select(a) => select(cli, a),
        Command::Rvalue(a) => rvalue(cli, a),
        Command::Simulate(a) => simulate(cli, a),
    }
}

fn deconv_fit(cli: &Cli, a: &FitArgs) -> CliResult<()> {
    let obs = load(&a.io)?;
    output_dir(&a.io.output)?;
    let config = DeconvConfig { grid_size: a.io.grid_size, ..Default::default() };
    let result = match grouping(&a.io) {
        SigmaGrouping::Pooled => {
            let f = fit_prior(&obs, &config)?;
            let res = f.grid.eta();
            let doc = f.to_document();
            return write_json(&a.io.output.join("prior.json"), cli, "deconv-fit", a.io.seed, Some(res), json!({ "priors": [doc] }));
        }
        g => fit_grouped(&obs, &g, &config)?,
    };
    let docs: Vec<_> = result.fits.iter().map(|f| f.to_document()).collect();
    let sizes: Vec<usize> =
        (0..result.fits.len()).map(|g| result.labels.iter().filter(|&&l| l == g).count()).collect();
    write_json(
        &a.io.output.join("prior.json"),
        cli,
        "deconv-fit",
        a.io.seed,
        prior_resolution(&result),
        json!({ "priors": docs, "group_sizes": sizes }),
    )
}

#[derive(Serialize)]
struct MethodCount {
    method: &'static str,
    n_selected: usize,
    /// Realized `sum (x - mu0)` over the selection.
    etp_star: f64,
}

fn select(cli: &Cli, a: &SelectArgs) -> CliResult<()> {
    let transform = match a.atan_scale {
        Some(scale) => ScoreTransform::Atan { scale },
        None => ScoreTransform::Tanh,
    };
    let obs = load(&a.io)?;
    output_dir(&a.io.output)?;
    let fitted = fit(&a.io, &obs)?;
    let clfdr = fitted.clfdr(&obs, a.mu0);
    let units = score_units(&obs, &clfdr, a.mu0, a.alpha, &transform)?;

    let dd = select_dd(&units, a.alpha, a.mu0);
    let stepup = select_clfdr_stepup(&clfdr, a.alpha).with_effects(&obs, a.mu0)?;
    let bh = select_bh(&pvalues(&obs, a.mu0)?, a.alpha).with_effects(&obs, a.mu0)?;
    let summary: Vec<MethodCount> = [("DD", &dd), ("Clfdr", &stepup), ("BH", &bh)]
        .into_iter()
        .map(|(method, r)| MethodCount { method, n_selected: r.n_selected(), etp_star: r.etp_star.unwrap_or(0.0) })
        .collect();
    let chosen: &SelectionResult = match a.method {
        MethodArg::Dd => &dd,
        MethodArg::Clfdr => &stepup,
        MethodArg::Bh => &bh,
    };

    let rows = units.iter().zip(chosen.decisions.as_slice()).map(|(u, &on)| {
        vec![
            u.id.clone(),
            u.x.to_string(),
            u.sigma.to_string(),
            u.clfdr.to_string(),
            u.s.to_string(),
            u.group.label().to_string(),
            u8::from(on).to_string(),
        ]
    });
    write_csv(&a.io.output.join("selection.csv"), &["id", "x", "sigma", "clfdr", "s", "group", "selected"], rows)?;

    let ids = obs.iter().map(|o| o.id.as_str());
    let result = json!({
        "method": a.method,
        "selected_ids": chosen.selected_ids(ids),
        "etp_star": chosen.etp_star,
        "capacity": chosen.capacity,
        "trace": chosen.trace,
        "summary": summary,
        "n_units": obs.len(),
    });
    write_json(&a.io.output.join("selection.json"), cli, "select", a.io.seed, prior_resolution(&fitted), result)
}

fn rvalue(cli: &Cli, a: &RvalueArgs) -> CliResult<()> {
    let obs = load(&a.io)?;
    let fitted = fit(&a.io, &obs)?;
    let xi = ScoreTransform::Tanh;
    let table: RValueTable<f64> = match a.definition {
        DefinitionArg::Alpha => {
            let mu0 = a.mu0.ok_or_else(|| CliError::Usage("--definition alpha needs --mu0".into()))?;
            let clfdr = fitted.clfdr(&obs, mu0);
            let grid = default_alpha_grid(a.grid_points)?;
            let rule = |alpha: f64| {
                let units = score_units(&obs, &clfdr, mu0, alpha, &xi).expect("validated inputs");
                select_dd(&units, alpha, mu0).decisions
            };
            rvalue_vary_alpha(&obs, rule, &grid)?
        }
        DefinitionArg::Mu0 => {
            let alpha = a.alpha.ok_or_else(|| CliError::Usage("--definition mu0 needs --alpha".into()))?;
            if !(alpha > 0.0 && alpha < 1.0) {
                return Err(CliError::Usage(format!("--alpha {alpha} must lie in (0, 1)")));
            }
            let xs: Vec<f64> = obs.iter().map(|o| o.x).collect();
            let grid = default_mu0_grid(&xs, a.grid_points)?;
            let rule = |mu0: f64| {
                let units = score_units(&obs, &fitted.clfdr(&obs, mu0), mu0, alpha, &xi).expect("validated inputs");
                select_dd(&units, alpha, mu0).decisions
            };
            rvalue_vary_mu0(&obs, rule, &grid)?
        }
    };
    output_dir(&a.io.output)?;
    let fmt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
    let rows = table.entries.iter().map(|e| {
        vec![
            e.id.clone(),
            e.x.to_string(),
            e.sigma.to_string(),
            fmt(e.r),
            fmt(e.r_prime),
            table.definition.as_str().to_string(),
            table.grid_resolution.to_string(),
        ]
    });
    write_csv(
        &a.io.output.join("rvalues.csv"),
        &["id", "x", "sigma", "r", "r_prime", "definition", "grid_resolution"],
        rows,
    )?;
    let res = table.grid_resolution;
    write_json(&a.io.output.join("rvalues.json"), cli, "rvalue", a.io.seed, Some(res), &table)
}

fn simulate(cli: &Cli, a: &SimulateArgs) -> CliResult<()> {
    let mut design = match a.design {
        DesignArg::TwoComponent => SimDesign::two_component(a.sigma, a.m.unwrap_or(10_000)),
        DesignArg::Uniform => SimDesign::uniform(a.sigma_max, a.m.unwrap_or(5_000)),
        DesignArg::Correlated => SimDesign::correlated(a.sigma, a.m.unwrap_or(10_000)),
    }
    .seed(a.seed)
    .reps(a.reps)
    .n_mc(a.n_mc);
    design.grid_size = a.grid_size;
    if let Some(alpha) = a.alpha {
        design.alpha = alpha;
    }
    let report = run_replications(&design)?;
    output_dir(&a.output)?;
    let rows = report.tidy_rows().into_iter().map(|r| {
        vec![r.design, r.method, r.metric, r.rep.to_string(), r.value.to_string()]
    });
    write_csv(&a.output.join("tidy.csv"), &["design", "method", "metric", "rep", "value"], rows)?;
    write_json(&a.output.join("report.json"), cli, "simulate", a.seed, None, &report)
}
