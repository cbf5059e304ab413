//! Command-line entry point. Exit codes: 0 on success, 1 for argument or
//! configuration errors, 2 for failures while running.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::error::{Error, Result};
use crate::experiments::{
    self, BetaOfdmConfig, Coverage, CrlbSweepConfig, HeatmapConfig, MseConfig, ResultTable, RunConfig,
};

pub const SEED_ENV: &str = "ISAC_LAB_SEED";
pub const DEFAULT_SEED: u64 = 1;
/// Largest relative Frobenius error `fim-check` accepts.
pub const FIM_CHECK_TOLERANCE: f64 = 1e-3;

#[derive(Debug, Parser)]
#[command(
    name = "isac-lab",
    version,
    about = "CRLB and estimator experiments for frequency-hopped multistatic sensing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// CRLB traces over synthesized span and pulse count.
    CrlbSweep(RunArgs),
    /// Monte Carlo MSE of MLE and TSIF against SNR.
    MseVsSnr(RunArgs),
    /// Position CRLB over a grid of target positions, with coverage.
    Heatmap(RunArgs),
    /// Analytic per-path FIM against finite differences.
    FimCheck(RunArgs),
    /// Data-averaged CRLB over random OFDM symbols.
    BetaOfdm(RunArgs),
    /// Print the version.
    Version,
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML config, or JSON when the extension is `.json`.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Master seed; overrides `experiment.seed` and `ISAC_LAB_SEED`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; the rayon default when absent.
    #[arg(long)]
    workers: Option<usize>,
    /// Trials per point; overrides `experiment.trials`.
    #[arg(long)]
    trials: Option<usize>,
}

fn config_error(path: &Path, key: impl Into<String>, message: impl ToString) -> Error {
    Error::Config {
        path: path.to_path_buf(),
        key: key.into(),
        message: message.to_string(),
    }
}

/// Reads a run config; unknown keys are rejected and errors name the key.
pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, path)
}

pub fn parse_config(text: &str, path: &Path) -> Result<RunConfig> {
    let is_json = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"));
    if is_json {
        let mut de = serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(&mut de).map_err(|e| config_error(path, e.path().to_string(), e.inner()))
    } else {
        let de = toml::Deserializer::parse(text).map_err(|e| config_error(path, "", e))?;
        serde_path_to_error::deserialize(de).map_err(|e| config_error(path, e.path().to_string(), e.inner()))
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|e| config_error(Path::new(SEED_ENV), SEED_ENV, format!("not a u64: {e}"))),
        Err(_) => Ok(None),
    }
}

/// Config with command-line overrides applied and the seed resolved
/// (flag, then config, then environment, then the default).
fn effective_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = load_config(&args.config)?;
    let seed = match (args.seed, cfg.experiment.seed) {
        (Some(s), _) | (None, Some(s)) => s,
        (None, None) => env_seed()?.unwrap_or(DEFAULT_SEED),
    };
    cfg.experiment.seed = Some(seed);
    if let Some(t) = args.trials {
        cfg.experiment.trials = t;
    }
    if let Some(out) = &args.out {
        cfg.output.dir = out.to_string_lossy().into_owned();
    }
    if cfg.experiment.trials == 0 {
        return Err(config_error(&args.config, "experiment.trials", "must be at least 1"));
    }
    if args.workers == Some(0) {
        return Err(config_error(&args.config, "--workers", "must be at least 1"));
    }
    cfg.scenario
        .build()
        .map_err(|e| config_error(&args.config, "scenario", e))?;
    Ok(cfg)
}

fn output_path(cfg: &RunConfig, name: &str) -> PathBuf {
    Path::new(&cfg.output.dir).join(format!("{}{}", cfg.output.prefix, name))
}

fn write_manifest(cfg: &RunConfig, command: &str) -> Result<()> {
    let path = output_path(cfg, "run_manifest.toml");
    let body =
        toml::to_string_pretty(cfg).map_err(|e| Error::InvalidParameter(format!("cannot serialize config: {e}")))?;
    let text = format!(
        "# isac-lab {} {}\n# re-run with --config on this file\n\n{body}",
        env!("CARGO_PKG_VERSION"),
        command
    );
    std::fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

fn write_table(cfg: &RunConfig, table: &ResultTable, name: &str) -> Result<PathBuf> {
    let path = output_path(cfg, name);
    table.write_csv_file(&path)?;
    Ok(path)
}

fn execute(command: &str, cfg: &mut RunConfig) -> Result<()> {
    let dir = PathBuf::from(&cfg.output.dir);
    std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    let seed = cfg.experiment.seed.unwrap_or(DEFAULT_SEED);
    let form = cfg.experiment.weight_form;
    let ex = &mut cfg.experiment;
    let mut written = Vec::new();
    match command {
        "crlb-sweep" => {
            let sweep = ex.crlb_sweep.get_or_insert_with(CrlbSweepConfig::default).clone();
            let table = experiments::crlb_sweep(&cfg.scenario, &sweep, form, seed)?;
            written.push(write_table(cfg, &table, "crlb_sweep.csv")?);
        }
        "mse-vs-snr" => {
            let mse = ex.mse_vs_snr.get_or_insert_with(MseConfig::default).clone();
            let table = experiments::mse_vs_snr(&cfg.scenario, &mse, ex.trials, seed, form)?;
            written.push(write_table(cfg, &table, "mse_vs_snr.csv")?);
        }
        "heatmap" => {
            let hm = ex.heatmap.get_or_insert_with(HeatmapConfig::default).clone();
            let (table, coverage) = experiments::heatmap(&cfg.scenario, &hm, form, seed)?;
            written.push(write_table(cfg, &table, "heatmap.csv")?);
            let path = output_path(cfg, "heatmap_coverage.csv");
            Coverage::write_csv_file(&coverage, &path)?;
            for c in &coverage {
                println!("coverage {}: {:.4} ({} points)", c.layout, c.fraction, c.evaluated);
            }
            written.push(path);
        }
        "beta-ofdm" => {
            let bo = ex.beta_ofdm.get_or_insert_with(BetaOfdmConfig::default).clone();
            let table = experiments::beta_ofdm(&cfg.scenario, &bo, form, seed)?;
            written.push(write_table(cfg, &table, "beta_ofdm.csv")?);
        }
        other => unreachable!("not a table command: {other}"),
    }
    write_manifest(cfg, command)?;
    for p in written {
        println!("wrote {}", p.display());
    }
    Ok(())
}

fn fim_check(cfg: &RunConfig) -> Result<bool> {
    let report = experiments::fim_check(&cfg.scenario)?;
    for p in &report.paths {
        println!(
            "path {}: centered {:.3e} raw {:.3e} (scaled {:.3e} / {:.3e}), centering map {:.3e}",
            p.path, p.centered, p.raw, p.centered_scaled, p.raw_scaled, p.centering_map
        );
    }
    let max = report.max_error();
    println!("max relative Frobenius error: {max:.3e}");
    Ok(max <= FIM_CHECK_TOLERANCE)
}

fn dispatch(name: &str, args: &RunArgs) -> i32 {
    let mut cfg = match effective_config(args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return 1;
        }
    };
    let pool = match args.workers {
        Some(n) => rayon::ThreadPoolBuilder::new().num_threads(n).build(),
        None => rayon::ThreadPoolBuilder::new().build(),
    };
    let pool = match pool {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: cannot start worker pool: {e}");
            return 2;
        }
    };
    let result = pool.install(|| {
        if name == "fim-check" {
            fim_check(&cfg).map(|ok| if ok { 0 } else { 2 })
        } else {
            execute(name, &mut cfg).map(|_| 0)
        }
    });
    match result {
        Ok(code) => {
            if code != 0 {
                eprintln!("error: finite-difference check above {FIM_CHECK_TOLERANCE:e}");
            }
            code
        }
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, Error::Config { .. }) {
                1
            } else {
                2
            }
        }
    }
}

/// Parses `argv` (program name first), runs the command and returns the
/// exit code.
pub fn run<I, S>(argv: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match &cli.command {
        Command::Version => {
            println!("isac-lab {}", env!("CARGO_PKG_VERSION"));
            0
        }
        Command::CrlbSweep(a) => dispatch("crlb-sweep", a),
        Command::MseVsSnr(a) => dispatch("mse-vs-snr", a),
        Command::Heatmap(a) => dispatch("heatmap", a),
        Command::FimCheck(a) => dispatch("fim-check", a),
        Command::BetaOfdm(a) => dispatch("beta-ofdm", a),
    }
}
