//! Subcommand execution: config in, artifacts and an outcome out.

use std::time::Instant;

use anyhow::{bail, Context, Result};
use num_traits::ToPrimitive;
use serde::Serialize;
use serde_json::{json, Value};
use stdiff_core::differentiation::{
    dyadic_grid, run_shift_ud, run_std, std_run_precision, std_work_estimate, StdRunConfig,
};
use stdiff_core::genericity::{
    haar_tent_average, mance_witness, oscillation_witness, small_ball_delta, verify_witness, TargetBall,
    TentFunction, VerifyReport, WitnessCertificate,
};
use stdiff_core::kernel::{kernel_density_criterion, toral_estimate_check};
use stdiff_core::process::{
    difference_property_check, finite_dp_refute, surjectivity_fastpaths, RuleDocument,
};
use stdiff_core::report::{run_id, ArtifactWriter, RunManifest, TOOL_NAME, TOOL_VERSION};
use stdiff_core::torus::{parse_rational, rational_to_string};
use stdiff_core::weyl::{
    default_threshold, variance_identity_mc, weyl_sums_at, Character, UdReport,
};
use stdiff_core::ball::haar_sample;
use stdiff_core::{par, Error, FiniteAbelianGroup, GeneratorRule, IntegerEndomorphism, Precision, ProcessCache, SeedStream};

use crate::config::*;

/// Environment variable limiting the fixed-point precision.
pub const PRECISION_CAP_VAR: &str = "STDIFF_PRECISION_CAP";

pub struct Outcome {
    pub ok: bool,
    pub summary: Value,
}

pub struct Plan {
    pub precision_bits: Option<u32>,
    pub work: u64,
    pub unit: &'static str,
}

fn cache_for(doc: &RuleDocument) -> Result<ProcessCache> {
    Ok(ProcessCache::new(GeneratorRule::from_document(doc)?))
}

/// Fails with `PrecisionExhausted` when `bits` exceeds the configured cap.
pub fn check_cap(bits: u32) -> Result<()> {
    if let Ok(v) = std::env::var(PRECISION_CAP_VAR) {
        let cap: u64 = v.trim().parse().map_err(|_| Error::InvalidConfig(format!("{PRECISION_CAP_VAR}={v:?}")))?;
        if bits as u64 > cap {
            return Err(Error::PrecisionExhausted { required: bits as u64, available: cap }.into());
        }
    }
    Ok(())
}

fn weyl_bits(cfg: &WeylConfig, cache: &mut ProcessCache) -> Result<u32> {
    let mut need = cache.precision_for(cfg.k_max)?.bits();
    if let Some(&kv) = cfg.variance_ks.iter().max() {
        need = need.max(cache.precision_for(kv)?.bits());
    }
    match cfg.bits {
        Some(b) => {
            cache.check_precision(cfg.k_max, b)?;
            Ok(b)
        }
        None => Ok(need),
    }
}

fn weyl_chars(cfg: &WeylConfig, dim: usize) -> Result<Vec<Character>> {
    Ok(match &cfg.character {
        Some(s) => vec![Character::parse(s)?],
        None => Character::frequency_box(dim, cfg.box_bound)?,
    })
}

/// Derived precision and work, without computing anything.
pub fn plan(cfg: &ExperimentConfig) -> Result<Plan> {
    Ok(match cfg {
        ExperimentConfig::DpCheck(c) => {
            let n = c.horizon as u64;
            Plan { precision_bits: None, work: n * n.saturating_sub(1) / 2, unit: "determinants" }
        }
        ExperimentConfig::Weyl(c) => {
            let mut cache = cache_for(&c.rule)?;
            let bits = weyl_bits(c, &mut cache)?;
            let chars = weyl_chars(c, cache.dim())?.len() as u64;
            let var = c.variance_samples.unwrap_or(0) as u64 * c.variance_ks.iter().max().copied().unwrap_or(0) as u64;
            Plan { precision_bits: Some(bits), work: c.points as u64 * c.k_max as u64 * (chars + 1) + var, unit: "phase evaluations" }
        }
        ExperimentConfig::Std(c) => {
            let mut cache = cache_for(&c.rule)?;
            let bits = std_run_precision(&mut cache, c)?.bits();
            Plan { precision_bits: Some(bits), work: std_work_estimate(c)?, unit: "endomorphism applications" }
        }
        ExperimentConfig::Kernels(c) => {
            Plan { precision_bits: None, work: c.horizon as u64, unit: "kernel lattices" }
        }
        ExperimentConfig::Meager(c) => {
            let mut cache = cache_for(&c.rule)?;
            let bits = cache.precision_for(c.baseline_k)?.bits();
            Plan {
                precision_bits: Some(bits),
                work: (c.targets as u64 + c.baseline_seeds as u64) * c.baseline_k as u64,
                unit: "orbit steps",
            }
        }
        ExperimentConfig::Shift(c) => {
            let mut cache = cache_for(&c.rule)?;
            Plan { precision_bits: Some(cache.precision_for(c.k)?.bits()), work: c.k as u64, unit: "endomorphism applications" }
        }
    })
}

/// Runs a config, writing artifacts and `manifest.json` into `writer`'s directory.
pub fn run(cfg: &ExperimentConfig, mut writer: ArtifactWriter) -> Result<(Outcome, RunManifest)> {
    let start = Instant::now();
    let plan = plan(cfg)?;
    if let Some(b) = plan.precision_bits {
        check_cap(b)?;
    }
    let config_json = serde_json::to_string(cfg)?;
    let id = run_id(&config_json, cfg.seed());
    writer.json("config.json", cfg)?;
    let outcome = match cfg {
        ExperimentConfig::DpCheck(c) => dp_check(c, &mut writer)?,
        ExperimentConfig::Weyl(c) => weyl(c, &id, &mut writer)?,
        ExperimentConfig::Std(c) => std_run(c, &id, &mut writer)?,
        ExperimentConfig::Kernels(c) => kernels(c, &mut writer)?,
        ExperimentConfig::Meager(c) => meager(c, &mut writer)?,
        ExperimentConfig::Shift(c) => shift(c, &mut writer)?,
    };
    let manifest = writer.finish(RunManifest {
        run_id: id,
        tool: TOOL_NAME.to_string(),
        version: TOOL_VERSION.to_string(),
        subcommand: cfg.name().to_string(),
        seed: cfg.seed(),
        wall_clock_secs: start.elapsed().as_secs_f64(),
        threads: par::current_threads(),
        precision_bits: plan.precision_bits,
        artifacts: Vec::new(),
    })?;
    Ok((outcome, manifest))
}

fn dp_check(c: &DpCheckConfig, w: &mut ArtifactWriter) -> Result<Outcome> {
    match (&c.rule, &c.finite, &c.mode) {
        (_, Some(spec), DpMode::Refute) => {
            let g = FiniteAbelianGroup::parse(spec)?;
            let r = finite_dp_refute(&g, c.horizon)?;
            w.json("dp_report.json", &r)?;
            Ok(Outcome {
                ok: r.refuted,
                summary: json!({"refuted": r.refuted, "refuted_at": r.refuted_at, "max_survival": r.max_survival, "end_count": r.end_count}),
            })
        }
        (_, Some(_), DpMode::Check) => bail!(Error::InvalidConfig("finite groups support --mode refute only".into())),
        (Some(doc), None, DpMode::Check) => {
            let mut cache = cache_for(doc)?;
            let r = difference_property_check(&mut cache, c.horizon)?;
            let fast = surjectivity_fastpaths(&mut cache, c.horizon)?;
            w.json("dp_report.json", &json!({"difference_property": r, "surjectivity": fast}))?;
            Ok(Outcome { ok: r.ok, summary: json!({"ok": r.ok, "horizon": r.horizon, "failing_pair": r.failing_pair}) })
        }
        (Some(_), None, DpMode::Refute) => {
            bail!(Error::InvalidConfig("--mode refute needs --finite".into()))
        }
        (None, None, _) => bail!(Error::InvalidConfig("dp-check needs --rule or --finite".into())),
    }
}

#[derive(Serialize)]
struct WeylCsvRow {
    run_id: String,
    point: usize,
    k: usize,
    m_vector: String,
    re: f64,
    im: f64,
    abs: f64,
}

#[derive(Serialize)]
struct WeylPointReport {
    point: usize,
    #[serde(flatten)]
    ud: UdReport,
}

fn weyl(c: &WeylConfig, id: &str, w: &mut ArtifactWriter) -> Result<Outcome> {
    let mut cache = cache_for(&c.rule)?;
    let bits = weyl_bits(c, &mut cache)?;
    let prec = Precision::new(bits)?;
    let chars = weyl_chars(c, cache.dim())?;
    let k = c.k_max;
    let threshold = c.threshold.unwrap_or_else(|| default_threshold(k));
    let ks = dyadic_grid(k);
    cache.extend_generators(k)?;
    let dim = cache.dim();
    let stream = SeedStream::new(c.seed).named("weyl-points");
    let shared = &cache;
    let per_point = par::try_map_range(c.points, |p| {
        let x = haar_sample(&mut stream.child(p as u64).rng(), dim, &prec);
        weyl_sums_at(shared, &x, &chars, &ks)
    })?;
    let mut rows = Vec::new();
    let mut reports = Vec::new();
    for (p, sums) in per_point.iter().enumerate() {
        for (j, &kk) in ks.iter().enumerate() {
            for (ch, row) in chars.iter().zip(sums) {
                let s = row[j];
                rows.push(WeylCsvRow {
                    run_id: id.to_string(),
                    point: p,
                    k: kk,
                    m_vector: ch.label(),
                    re: s.re,
                    im: s.im,
                    abs: s.norm(),
                });
            }
        }
        let abs = sums.iter().map(|row| row[ks.len() - 1].norm()).collect();
        reports.push(WeylPointReport { point: p, ud: UdReport::from_abs(k, threshold, &chars, abs) });
    }
    w.csv("weyl.csv", &rows)?;
    let passed = reports.iter().filter(|r| r.ud.pass).count();
    let fraction = passed as f64 / c.points.max(1) as f64;
    let mut summary = json!({
        "k": k,
        "precision_bits": bits,
        "threshold": threshold,
        "characters": chars.len(),
        "points": c.points,
        "passed": passed,
        "pass_fraction": fraction,
    });
    let mut ok = fraction >= c.min_pass_fraction;
    if let Some(n) = c.variance_samples {
        let ch = &chars[0];
        let est = variance_identity_mc(&mut cache, ch, &c.variance_ks, n, c.seed)?;
        ok &= est.iter().all(|e| e.within_ci());
        summary["variance_within_ci"] = json!(est.iter().all(|e| e.within_ci()));
        w.json("variance.json", &est)?;
    }
    w.json("ud_report.json", &json!({"summary": summary, "points": reports}))?;
    Ok(Outcome { ok, summary })
}

fn std_run(c: &StdRunConfig, id: &str, w: &mut ArtifactWriter) -> Result<Outcome> {
    let run = run_std(c)?;
    let rows: Vec<_> = run.rows.iter().map(|r| r.csv(id)).collect();
    w.csv("std.csv", &rows)?;
    let violations: Vec<usize> =
        run.rows.iter().filter(|r| !(r.modulus_bound_holds() && r.offsets_within_1_over_k)).map(|r| r.k).collect();
    let last = run.rows.last().expect("nonempty grid");
    let summary = json!({
        "precision_bits": run.precision_bits,
        "rows": run.rows.len(),
        "center": run.center.as_ref().map(|p| p.to_strings()),
        "k_max": last.k,
        "alpha_hat_abs": last.alpha_hat.norm(),
        "target": [last.target.re, last.target.im],
        "bound_violations": violations,
    });
    w.json("std_summary.json", &summary)?;
    Ok(Outcome { ok: violations.is_empty(), summary })
}

fn kernels(c: &KernelsConfig, w: &mut ArtifactWriter) -> Result<Outcome> {
    let mut cache = cache_for(&c.rule)?;
    let report = kernel_density_criterion(&mut cache, c.horizon, c.seed)?;
    let mut ok = report.rows.iter().all(|r| r.pass);
    let mut out = json!({"density": report});
    if let Some(rows) = &c.matrix {
        let refs: Vec<&[i64]> = rows.iter().map(|r| r.as_slice()).collect();
        let a = IntegerEndomorphism::from_i64(&refs)?;
        let t = toral_estimate_check(&a, c.probes, c.seed)?;
        ok &= t.pass;
        out["toral"] = serde_json::to_value(&t)?;
    }
    w.json("kernels.json", &out)?;
    let d = &out["density"];
    Ok(Outcome {
        ok,
        summary: json!({
            "horizon": c.horizon,
            "liminf_proxy": d["liminf_proxy"],
            "epsilon": d["epsilon"],
            "dense_at_epsilon": d["dense_at_epsilon"],
            "verdict": d["verdict"],
        }),
    })
}

fn meager(c: &MeagerConfig, w: &mut ArtifactWriter) -> Result<Outcome> {
    let rule = GeneratorRule::from_document(&c.rule)?;
    let mut cache = ProcessCache::new(rule.clone());
    let dim = cache.dim();
    let radius = parse_rational(&c.target_radius)?;
    let tol = parse_rational(&c.tol)?;
    let mut entries = Vec::new();
    let mut all_ok = true;
    for i in 0..c.targets {
        let target = TargetBall::random(dim, radius.clone(), c.seed, i as u64)?;
        let cert: WitnessCertificate = match c.mode {
            MeagerMode::Mance => mance_witness(&mut cache, c.k_min, &target)?.certificate(&rule),
            MeagerMode::Oscillation => {
                let seed = SeedStream::new(c.seed).named("oscillation").child(i as u64).derive_seed();
                oscillation_witness(&mut cache, c.k_min, &target, &tol, seed)?.certificate(&rule)
            }
        };
        let name = format!("witness_{i}.json");
        w.json(&name, &cert)?;
        let verified: Option<VerifyReport> = if c.verify { Some(verify_witness(&cert)?) } else { None };
        let v_ok = verified.as_ref().is_none_or(|v| v.ok);
        all_ok &= v_ok;
        entries.push(json!({
            "index": i,
            "certificate": name,
            "m": cert.m,
            "horizon_l": cert.horizon_l,
            "avg_l": cert.avg_l,
            "horizon_n": cert.horizon_n,
            "avg_n": cert.avg_n,
            "verified": verified.map(|v| v.ok),
        }));
    }
    let mut summary = json!({"mode": c.mode, "witnesses": entries.len(), "all_verified": all_ok});
    if c.mode == MeagerMode::Mance && c.baseline_seeds > 0 {
        let delta = small_ball_delta(dim, &num_rational::BigRational::new(1.into(), 2.into()))?;
        let tent = TentFunction::new(delta.clone())?;
        let base = SeedStream::new(c.seed).named("haar-baseline");
        let mut avgs = Vec::new();
        for s in 0..c.baseline_seeds {
            avgs.push(haar_tent_average(&mut cache, &tent, c.baseline_k, &base.child(s as u64))?);
        }
        let below = avgs.iter().filter(|&&a| a < 0.5).count();
        summary["baseline"] = json!({
            "k": c.baseline_k,
            "delta": rational_to_string(&delta),
            "integral": tent.integral(dim).to_f64(),
            "averages": avgs,
            "below_half": below,
        });
    }
    w.json("meager_report.json", &json!({"summary": summary, "witnesses": entries}))?;
    Ok(Outcome { ok: all_ok, summary })
}

fn shift(c: &ShiftConfig, w: &mut ArtifactWriter) -> Result<Outcome> {
    let mut cache = cache_for(&c.rule)?;
    let r = run_shift_ud(&mut cache, &c.gaps, c.k, c.seed, c.box_bound, c.threshold)?;
    w.json("shift.json", &r)?;
    Ok(Outcome {
        ok: r.ud.pass,
        summary: json!({"k": r.k, "star_discrepancy": r.star_discrepancy, "ud_max_abs": r.ud.max_abs, "pass": r.ud.pass}),
    })
}

/// Replays a certificate file.
pub fn verify_file(path: &std::path::Path) -> Result<VerifyReport> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let cert: WitnessCertificate = serde_json::from_str(&text).map_err(Error::from)?;
    Ok(verify_witness(&cert)?)
}
