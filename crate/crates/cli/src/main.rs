mod commands;
mod config;

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::json;
use stdiff_core::differentiation::{CenterMode, RadiusRule, StdRunConfig};
use stdiff_core::differentiation::{Gaps, DEFAULT_SAMPLES};
use stdiff_core::process::RuleDocument;
use stdiff_core::report::ArtifactWriter;
use stdiff_core::Error;

use crate::config::*;

#[derive(Parser, Debug)]
#[command(name = "stdiff", version, about = "Shrinking-target differentiation experiments on the torus")]
struct Cli {
    /// Master seed for every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Validate, print precision and work estimate, and exit.
    #[arg(long, global = true)]
    dry_run: bool,
    /// Load the experiment from a saved config.json instead of flags.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug)]
struct RuleArg {
    /// Generator rule document (JSON).
    #[arg(long)]
    rule: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Check the difference property, or refute it on a finite group.
    DpCheck {
        #[command(flatten)]
        rule: RuleArg,
        /// Finite group such as `Z2` or `Z2xZ4`.
        #[arg(long)]
        finite: Option<String>,
        #[arg(long, default_value_t = 20)]
        horizon: usize,
        #[arg(long, value_enum, default_value = "check")]
        mode: DpModeArg,
    },
    /// Weyl sums over Haar-random points.
    Weyl {
        #[command(flatten)]
        rule: RuleArg,
        #[arg(long, default_value_t = 4096)]
        kmax: usize,
        #[arg(long, default_value_t = 16)]
        points: usize,
        /// Sup-norm bound of the frequency box.
        #[arg(long = "box", default_value_t = stdiff_core::weyl::DEFAULT_BOX)]
        box_bound: i64,
        /// Single character, e.g. `1,-2`, instead of the box.
        #[arg(long = "char")]
        character: Option<String>,
        #[arg(long)]
        threshold: Option<f64>,
        /// Fixed-point precision; rejected if too small for `kmax`.
        #[arg(long)]
        bits: Option<u32>,
        /// Fraction of points that must pass.
        #[arg(long, default_value_t = 0.95)]
        min_pass: f64,
        /// Haar samples for the variance identity check.
        #[arg(long)]
        variance_samples: Option<usize>,
        #[arg(long, value_delimiter = ',')]
        variance_ks: Vec<usize>,
    },
    /// Shrinking-target averages against ergodic time averages.
    Std {
        #[command(flatten)]
        rule: RuleArg,
        /// Observable: `char:1,0`, `tent:1/8`, `const:1` or `table:0,1,0.5`.
        #[arg(long = "f", default_value = "char:1")]
        observable: String,
        #[arg(long, default_value_t = 64)]
        kmax: usize,
        /// Explicit k values instead of the dyadic grid.
        #[arg(long, value_delimiter = ',')]
        ks: Vec<usize>,
        #[arg(long, default_value_t = DEFAULT_SAMPLES)]
        samples: usize,
        /// `haar`, `per-k` or `fixed:x1,x2,...`.
        #[arg(long, default_value = "haar")]
        centers: String,
        /// `eta` or `scaled:c`.
        #[arg(long, default_value = "eta")]
        radius: String,
    },
    /// Kernel lattices of the process and their covering radii.
    Kernels {
        #[command(flatten)]
        rule: RuleArg,
        #[arg(long, default_value_t = 12)]
        horizon: usize,
        /// Extra matrix for the toral estimate, rows separated by `;`.
        #[arg(long)]
        matrix: Option<String>,
        #[arg(long, default_value_t = stdiff_core::kernel::DEFAULT_PROBES)]
        probes: usize,
    },
    /// Certified witnesses of non-generic behavior.
    Meager {
        #[command(flatten)]
        rule: RuleArg,
        /// Smallest admissible horizon.
        #[arg(long = "K", alias = "k-min", default_value_t = 8)]
        k_min: usize,
        #[arg(long, value_enum, default_value = "mance")]
        mode: MeagerModeArg,
        #[arg(long, default_value_t = 1)]
        targets: usize,
        #[arg(long = "radius", default_value = "1/20")]
        target_radius: String,
        #[arg(long, default_value = "1/32")]
        tol: String,
        #[arg(long, default_value_t = 4096)]
        baseline_k: usize,
        #[arg(long, default_value_t = 0)]
        baseline_seeds: usize,
        /// Re-certify every emitted witness.
        #[arg(long)]
        verify: bool,
    },
    /// Equidistribution of a shifted process.
    Shift {
        #[command(flatten)]
        rule: RuleArg,
        #[arg(long, default_value_t = 10_000)]
        kmax: usize,
        /// Constant gap, or a comma-separated gap list.
        #[arg(long, default_value = "1")]
        gap: String,
        #[arg(long = "box", default_value_t = stdiff_core::weyl::DEFAULT_BOX)]
        box_bound: i64,
        #[arg(long)]
        threshold: Option<f64>,
    },
    /// Re-certify a witness certificate exactly.
    VerifyWitness {
        cert: PathBuf,
    },
}

#[derive(clap::ValueEnum, Clone, Debug)]
enum DpModeArg {
    Check,
    Refute,
}

#[derive(clap::ValueEnum, Clone, Debug)]
enum MeagerModeArg {
    Mance,
    Oscillation,
}

fn bad(msg: impl Into<String>) -> anyhow::Error {
    Error::InvalidConfig(msg.into()).into()
}

fn load_rule(path: &Path) -> Result<RuleDocument> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let doc: RuleDocument = serde_json::from_str(&text).map_err(Error::from)?;
    stdiff_core::GeneratorRule::from_document(&doc)?;
    Ok(doc)
}

fn required_rule(r: &RuleArg) -> Result<RuleDocument> {
    match &r.rule {
        Some(p) => load_rule(p),
        None => Err(bad("--rule is required")),
    }
}

fn parse_matrix(s: &str) -> Result<Vec<Vec<i64>>> {
    s.split(';')
        .map(|row| {
            row.split(',')
                .map(|v| v.trim().parse::<i64>().map_err(|_| bad(format!("bad matrix entry {v:?}"))))
                .collect()
        })
        .collect()
}

fn parse_gaps(s: &str) -> Result<Gaps> {
    let vals: Vec<usize> = s
        .split(',')
        .map(|v| v.trim().parse::<usize>().map_err(|_| bad(format!("bad gap {v:?}"))))
        .collect::<Result<_>>()?;
    Ok(match vals.as_slice() {
        [g] => Gaps::Constant(*g),
        _ => Gaps::List(vals),
    })
}

fn parse_centers(s: &str) -> Result<CenterMode> {
    Ok(match s {
        "haar" => CenterMode::Haar,
        "per-k" => CenterMode::PerK,
        _ => match s.strip_prefix("fixed:") {
            Some(rest) => CenterMode::Fixed(rest.split(',').map(|v| v.trim().to_string()).collect()),
            None => return Err(bad(format!("unknown center mode {s:?}"))),
        },
    })
}

fn parse_radius(s: &str) -> Result<RadiusRule> {
    Ok(match s {
        "eta" => RadiusRule::Eta,
        _ => match s.strip_prefix("scaled:") {
            Some(c) => RadiusRule::Scaled(c.trim().to_string()),
            None => return Err(bad(format!("unknown radius rule {s:?}"))),
        },
    })
}

fn build_config(cmd: &Cmd, seed: u64) -> Result<ExperimentConfig> {
    Ok(match cmd {
        Cmd::DpCheck { rule, finite, horizon, mode } => ExperimentConfig::DpCheck(DpCheckConfig {
            rule: rule.rule.as_deref().map(load_rule).transpose()?,
            finite: finite.clone(),
            horizon: *horizon,
            mode: match mode {
                DpModeArg::Check => DpMode::Check,
                DpModeArg::Refute => DpMode::Refute,
            },
        }),
        Cmd::Weyl {
            rule,
            kmax,
            points,
            box_bound,
            character,
            threshold,
            bits,
            min_pass,
            variance_samples,
            variance_ks,
        } => {
            let variance_ks = match (variance_samples, variance_ks.is_empty()) {
                (Some(_), true) => vec![*kmax],
                _ => variance_ks.clone(),
            };
            ExperimentConfig::Weyl(WeylConfig {
                rule: required_rule(rule)?,
                k_max: *kmax,
                points: *points,
                box_bound: *box_bound,
                character: character.clone(),
                threshold: *threshold,
                bits: *bits,
                min_pass_fraction: *min_pass,
                variance_samples: *variance_samples,
                variance_ks,
                seed,
            })
        }
        Cmd::Std { rule, observable, kmax, ks, samples, centers, radius } => {
            let doc = required_rule(rule)?;
            ExperimentConfig::Std(StdRunConfig {
                rule: doc,
                observable: observable.clone(),
                k_max: *kmax,
                k_grid: if ks.is_empty() { None } else { Some(ks.clone()) },
                radius_rule: parse_radius(radius)?,
                samples: *samples,
                seed,
                center_mode: parse_centers(centers)?,
            })
        }
        Cmd::Kernels { rule, horizon, matrix, probes } => ExperimentConfig::Kernels(KernelsConfig {
            rule: required_rule(rule)?,
            horizon: *horizon,
            matrix: matrix.as_deref().map(parse_matrix).transpose()?,
            probes: *probes,
            seed,
        }),
        Cmd::Meager { rule, k_min, mode, targets, target_radius, tol, baseline_k, baseline_seeds, verify } => {
            ExperimentConfig::Meager(MeagerConfig {
                rule: required_rule(rule)?,
                mode: match mode {
                    MeagerModeArg::Mance => MeagerMode::Mance,
                    MeagerModeArg::Oscillation => MeagerMode::Oscillation,
                },
                k_min: *k_min,
                targets: *targets,
                target_radius: target_radius.clone(),
                tol: tol.clone(),
                baseline_k: *baseline_k,
                baseline_seeds: *baseline_seeds,
                verify: *verify,
                seed,
            })
        }
        Cmd::Shift { rule, kmax, gap, box_bound, threshold } => ExperimentConfig::Shift(ShiftConfig {
            rule: required_rule(rule)?,
            k: *kmax,
            gaps: parse_gaps(gap)?,
            box_bound: *box_bound,
            threshold: *threshold,
            seed,
        }),
        Cmd::VerifyWitness { .. } => unreachable!("handled before config construction"),
    })
}

fn cmd_name(cmd: &Cmd) -> &'static str {
    match cmd {
        Cmd::DpCheck { .. } => "dp-check",
        Cmd::Weyl { .. } => "weyl",
        Cmd::Std { .. } => "std",
        Cmd::Kernels { .. } => "kernels",
        Cmd::Meager { .. } => "meager",
        Cmd::Shift { .. } => "shift",
        Cmd::VerifyWitness { .. } => "verify-witness",
    }
}

#[cfg(feature = "parallel")]
fn init_pool(jobs: Option<usize>) -> Result<()> {
    if let Some(n) = jobs {
        if n == 0 {
            return Err(bad("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| anyhow::anyhow!(e))?;
    }
    Ok(())
}

#[cfg(not(feature = "parallel"))]
fn init_pool(jobs: Option<usize>) -> Result<()> {
    if jobs.is_some_and(|n| n == 0) {
        return Err(bad("--jobs must be positive"));
    }
    Ok(())
}

/// Prints pretty JSON, tolerating a closed stdout.
fn emit(v: &serde_json::Value) -> Result<()> {
    let mut out = std::io::stdout().lock();
    match writeln!(out, "{}", serde_json::to_string_pretty(v)?) {
        Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        r => Ok(r?),
    }
}

fn real_main(cli: Cli) -> Result<bool> {
    init_pool(cli.jobs)?;
    if let Cmd::VerifyWitness { cert } = &cli.cmd {
        let report = commands::verify_file(cert)?;
        emit(&serde_json::to_value(&report)?)?;
        return Ok(report.ok);
    }
    let cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
            let cfg: ExperimentConfig = serde_json::from_str(&text).map_err(Error::from)?;
            if cfg.name() != cmd_name(&cli.cmd) {
                return Err(bad(format!("config is for `{}`, not `{}`", cfg.name(), cmd_name(&cli.cmd))));
            }
            cfg
        }
        None => build_config(&cli.cmd, cli.seed)?,
    };
    if cli.dry_run {
        let plan = commands::plan(&cfg)?;
        let cap = std::env::var(commands::PRECISION_CAP_VAR).ok();
        emit(&json!({
            "subcommand": cfg.name(),
            "precision_bits": plan.precision_bits,
            "work": plan.work,
            "work_unit": plan.unit,
            "precision_cap": cap,
        }))?;
        if let Some(b) = plan.precision_bits {
            commands::check_cap(b)?;
        }
        return Ok(true);
    }
    let writer = ArtifactWriter::new(&cli.out)?;
    let (outcome, manifest) = commands::run(&cfg, writer)?;
    emit(&json!({
        "run_id": manifest.run_id,
        "subcommand": manifest.subcommand,
        "ok": outcome.ok,
        "out": cli.out,
        "summary": outcome.summary,
    }))?;
    Ok(outcome.ok)
}

/// 1 for property failures and unfound witnesses, 3 for precision, 2 otherwise.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(Error::PrecisionExhausted { .. }) => 3,
        Some(Error::WitnessNotFound(_)) | Some(Error::SearchBudget(_)) => 1,
        _ => 2,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match real_main(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            let msg = match e.downcast_ref::<Error>() {
                Some(Error::PrecisionExhausted { required, available }) => {
                    format!("precision exhausted: run needs B = {required} bits, cap is {available}")
                }
                _ => format!("{e:#}"),
            };
            eprintln!("stdiff: {msg}");
            ExitCode::from(exit_code(&e))
        }
    }
}
