//! Ball averages of ergodic averages along a process, with shrinking radii.

use num_bigint::{BigInt, BigUint};
use num_complex::Complex64;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::ball::{ball_offset_sample, haar_sample};
use crate::error::{Error, Result};
use crate::observable::Observable;
use crate::par;
use crate::process::{eta_schedule, GeneratorRule, ProcessCache, RuleDocument, GUARD_BITS};
use crate::rng::SeedStream;
use crate::torus::{parse_rational, rational_to_string, Precision, RationalPoint, TorusPoint};
use crate::weyl::{default_threshold, star_discrepancy_1d, ud_test_sequence, Character, UdReport};

/// Fewest ball samples per row.
pub const MIN_SAMPLES: usize = 16;
pub const DEFAULT_SAMPLES: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule", content = "factor")]
pub enum RadiusRule {
    /// `r_k = eta_k`.
    Eta,
    /// `r_k = c eta_k` with `0 < c <= 1`, `c` as `"p/q"`.
    Scaled(String),
}

impl RadiusRule {
    pub fn radius(&self, cache: &mut ProcessCache, k: usize) -> Result<BigRational> {
        let eta = eta_schedule(cache, k)?;
        match self {
            Self::Eta => Ok(eta),
            Self::Scaled(c) => {
                let c = parse_rational(c)?;
                if !c.is_positive() || c > BigRational::one() {
                    return Err(Error::InvalidConfig(format!("radius factor {c} outside (0, 1]")));
                }
                Ok(eta * c)
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "point")]
pub enum CenterMode {
    /// A given point, coordinates as `"p/q"` strings.
    Fixed(Vec<String>),
    /// One Haar-random center for the whole run.
    Haar,
    /// An independent Haar-random center for every `k`.
    PerK,
}

/// Serializable description of a run.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StdRunConfig {
    pub rule: RuleDocument,
    pub observable: String,
    pub k_max: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k_grid: Option<Vec<usize>>,
    pub radius_rule: RadiusRule,
    pub samples: usize,
    pub seed: u64,
    pub center_mode: CenterMode,
}

impl StdRunConfig {
    pub fn new(rule: &GeneratorRule, observable: &str, k_max: usize, seed: u64) -> Self {
        Self {
            rule: rule.to_document(),
            observable: observable.to_string(),
            k_max,
            k_grid: None,
            radius_rule: RadiusRule::Eta,
            samples: DEFAULT_SAMPLES,
            seed,
            center_mode: CenterMode::Haar,
        }
    }

    /// The explicit grid, or the dyadic one.
    pub fn grid(&self) -> Result<Vec<usize>> {
        let g = match &self.k_grid {
            Some(g) => g.clone(),
            None => dyadic_grid(self.k_max),
        };
        if g.is_empty() || g.contains(&0) || g.iter().any(|&k| k > self.k_max) {
            return Err(Error::InvalidConfig("k grid must be nonempty and within 1..=k_max".into()));
        }
        Ok(g)
    }
}

/// `1, 2, 4, ...` up to `k_max`, plus `k_max` itself.
pub fn dyadic_grid(k_max: usize) -> Vec<usize> {
    let mut g = Vec::new();
    let mut k = 1;
    while k <= k_max {
        g.push(k);
        k *= 2;
    }
    if g.last() != Some(&k_max) && k_max > 0 {
        g.push(k_max);
    }
    g
}

#[derive(Clone, Debug)]
pub struct StdResultRow {
    pub k: usize,
    pub r_k: BigRational,
    pub alpha_hat: Complex64,
    pub time_avg: Complex64,
    pub target: Complex64,
    /// Standard error of `alpha_hat` over the ball samples.
    pub mc_ci: f64,
    /// `omega(1/k)`.
    pub modulus_bound: f64,
    /// Every sampled offset stayed within `1/k` of zero for `i < k`, checked exactly.
    pub offsets_within_1_over_k: bool,
}

impl StdResultRow {
    /// `|alpha_hat - time_avg| <= omega(1/k) + mc_ci`.
    pub fn modulus_bound_holds(&self) -> bool {
        (self.alpha_hat - self.time_avg).norm() <= self.modulus_bound + self.mc_ci
    }

    pub fn csv(&self, run_id: &str) -> StdCsvRow {
        StdCsvRow {
            run_id: run_id.to_string(),
            k: self.k,
            r_k: rational_to_string(&self.r_k),
            alpha_re: self.alpha_hat.re,
            alpha_im: self.alpha_hat.im,
            time_avg_re: self.time_avg.re,
            time_avg_im: self.time_avg.im,
            target_re: self.target.re,
            target_im: self.target.im,
            mc_ci: self.mc_ci,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct StdCsvRow {
    pub run_id: String,
    pub k: usize,
    pub r_k: String,
    pub alpha_re: f64,
    pub alpha_im: f64,
    pub time_avg_re: f64,
    pub time_avg_im: f64,
    pub target_re: f64,
    pub target_im: f64,
    pub mc_ci: f64,
}

/// `(1/k) sum_{i<k} f(Phi_i x)`.
pub fn ergodic_time_average(cache: &mut ProcessCache, x: &TorusPoint, f: &Observable, k: usize) -> Result<Complex64> {
    if k == 0 {
        return Err(Error::OutOfRange("k must be >= 1".into()));
    }
    cache.check_precision(k, x.bits())?;
    cache.extend_generators(k)?;
    let orbit: Vec<TorusPoint> = cache.orbit(x, k)?.collect();
    time_average(&orbit, f, k)
}

fn time_average(orbit: &[TorusPoint], f: &Observable, k: usize) -> Result<Complex64> {
    let mut s = Complex64::zero();
    for y in &orbit[..k] {
        s += f.value(y)?;
    }
    Ok(s / k as f64)
}

/// Bits needed for horizon `k_max` with radii down to `r_min`.
pub fn std_precision(cache: &mut ProcessCache, k_max: usize, r_min: &BigRational) -> Result<Precision> {
    let radius_bits = (r_min.denom() / r_min.numer()).bits() + 1;
    Precision::at_least(cache.horizon_bits(k_max)? + radius_bits + GUARD_BITS)
}

/// `r_k ||Phi_i||_col <= 1/k` for all `i < k`, bounding `||Phi_i||_col` by
/// `prod_{n <= i} ||T_n||_col`; exact.
pub fn offset_chain_check(cache: &mut ProcessCache, k: usize, r_k: &BigRational) -> Result<bool> {
    cache.extend_generators(k)?;
    let limit = BigRational::new(BigInt::one(), BigInt::from(k));
    let mut acc = r_k.clone();
    if acc > limit {
        return Ok(false);
    }
    for l in &cache.lipschitz()[..k.saturating_sub(1)] {
        acc *= BigRational::from_integer(l.clone());
        if acc > limit {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Ball average of the time average at horizon `k`: the mean over `samples`
/// offsets `u` drawn from `B(0, r_k)` of `(1/k) sum f(Phi_i c + Phi_i u)`.
/// `center_orbit` holds `Phi_i c` for `i < k`; generators must be
/// materialized through `k`.
#[allow(clippy::too_many_arguments)]
pub fn std_average(
    cache: &ProcessCache,
    center_orbit: &[TorusPoint],
    f: &Observable,
    k: usize,
    r_k: &BigRational,
    samples: usize,
    stream: &SeedStream,
) -> Result<StdResultRow> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidConfig(format!("need at least {MIN_SAMPLES} ball samples")));
    }
    if k == 0 || center_orbit.len() < k {
        return Err(Error::OutOfRange(format!("center orbit of length {} for k = {k}", center_orbit.len())));
    }
    let prec = center_orbit[0].precision().clone();
    let dim = cache.dim();
    let gens = cache.generators();
    if gens.len() + 1 < k {
        return Err(Error::OutOfRange("generators not materialized".into()));
    }
    let per_sample = par::try_map_range(samples, |s| {
        let mut rng = stream.child(s as u64).rng();
        let mut u = ball_offset_sample(&mut rng, dim, r_k, &prec)?;
        let mut acc = Complex64::zero();
        let mut spread = BigUint::zero();
        for i in 0..k {
            acc += f.value(&center_orbit[i].add(&u)?)?;
            spread = spread.max(u.norm_numerator());
            if i + 1 < k {
                u = gens[i].apply(&u)?;
            }
        }
        Ok::<_, Error>((acc / k as f64, spread))
    })?;
    let m = samples as f64;
    let alpha_hat = per_sample.iter().map(|(v, _)| v).sum::<Complex64>() / m;
    let var = per_sample.iter().map(|(v, _)| (v - alpha_hat).norm_sqr()).sum::<f64>() / (m - 1.0);
    let spread = per_sample.iter().map(|(_, s)| s).max().cloned().unwrap_or_default();
    Ok(StdResultRow {
        k,
        r_k: r_k.clone(),
        alpha_hat,
        time_avg: time_average(center_orbit, f, k)?,
        target: f.integral(dim),
        mc_ci: (var / m).sqrt(),
        modulus_bound: f.modulus(1.0 / k as f64),
        offsets_within_1_over_k: spread * BigUint::from(k) <= prec.modulus(),
    })
}

#[derive(Clone, Debug)]
pub struct StdRun {
    pub precision_bits: u32,
    /// The shared center, when there is one.
    pub center: Option<RationalPoint>,
    pub rows: Vec<StdResultRow>,
}

/// Endomorphism applications a run will perform.
pub fn std_work_estimate(cfg: &StdRunConfig) -> Result<u64> {
    let grid = cfg.grid()?;
    let center: u64 = match cfg.center_mode {
        CenterMode::PerK => grid.iter().map(|&k| k as u64).sum(),
        _ => cfg.k_max as u64,
    };
    Ok(center + grid.iter().map(|&k| k as u64 * cfg.samples as u64).sum::<u64>())
}

/// Precision a configured run will use.
pub fn std_run_precision(cache: &mut ProcessCache, cfg: &StdRunConfig) -> Result<Precision> {
    let grid = cfg.grid()?;
    let mut r_min: Option<BigRational> = None;
    for &k in &grid {
        let r = cfg.radius_rule.radius(cache, k)?;
        r_min = Some(match r_min {
            Some(m) if m < r => m,
            _ => r,
        });
    }
    std_precision(cache, cfg.k_max, &r_min.expect("nonempty grid"))
}

/// Runs a configuration; concentric for `Fixed`/`Haar`, non-concentric for `PerK`.
pub fn run_std(cfg: &StdRunConfig) -> Result<StdRun> {
    let rule = GeneratorRule::from_document(&cfg.rule)?;
    let mut cache = ProcessCache::new(rule);
    let dim = cache.dim();
    let f = Observable::parse(&cfg.observable, dim)?;
    let grid = cfg.grid()?;
    let prec = std_run_precision(&mut cache, cfg)?;
    cache.extend_generators(cfg.k_max)?;
    let root = SeedStream::new(cfg.seed);
    let balls = root.named("ball");
    let centers = root.named("center");
    let shared = match &cfg.center_mode {
        CenterMode::Fixed(coords) => {
            let p = RationalPoint::parse(coords)?;
            if p.dim() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: p.dim() });
            }
            Some(TorusPoint::from_rationals(&prec, &p.coords()))
        }
        CenterMode::Haar => Some(haar_sample(&mut centers.rng(), dim, &prec)),
        CenterMode::PerK => None,
    };
    let shared_orbit: Option<Vec<TorusPoint>> = match &shared {
        Some(c) => Some(cache.orbit(c, cfg.k_max)?.collect()),
        None => None,
    };
    let mut rows = Vec::with_capacity(grid.len());
    for &k in &grid {
        let r_k = cfg.radius_rule.radius(&mut cache, k)?;
        let stream = balls.child(k as u64);
        let row = match &shared_orbit {
            Some(orbit) => std_average(&cache, orbit, &f, k, &r_k, cfg.samples, &stream)?,
            None => {
                let c = haar_sample(&mut centers.child(k as u64).rng(), dim, &prec);
                let orbit: Vec<TorusPoint> = cache.orbit(&c, k)?.collect();
                std_average(&cache, &orbit, &f, k, &r_k, cfg.samples, &stream)?
            }
        };
        rows.push(row);
    }
    Ok(StdRun { precision_bits: prec.bits(), center: shared.map(|c| c.to_rational_point()), rows })
}

/// Concentric run: one center, balls `B(x, r_k)`.
pub fn run_concentric(cfg: &StdRunConfig) -> Result<StdRun> {
    if cfg.center_mode == CenterMode::PerK {
        return Err(Error::InvalidConfig("concentric runs need a fixed or Haar center".into()));
    }
    run_std(cfg)
}

/// Non-concentric run: an independent Haar center `x_k` for each `k`.
pub fn run_noncentric(cfg: &StdRunConfig) -> Result<StdRun> {
    let rule = GeneratorRule::from_document(&cfg.rule)?;
    let mut cache = ProcessCache::new(rule);
    cache.extend_generators(cfg.k_max)?;
    if let Some(n) = cache.generator_dets().iter().position(Zero::is_zero) {
        return Err(Error::InvalidConfig(format!("T_{} is not surjective", n + 1)));
    }
    let mut cfg = cfg.clone();
    cfg.center_mode = CenterMode::PerK;
    run_std(&cfg)
}

/// Gap sequence `l_1, l_2, ...` between consumed coordinates.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Gaps {
    Constant(usize),
    List(Vec<usize>),
}

impl Gaps {
    /// `Lambda_0 = 0, Lambda_n = l_1 + ... + l_n` for `n < count`.
    pub fn lambdas(&self, count: usize) -> Result<Vec<u64>> {
        let mut out = Vec::with_capacity(count);
        let mut acc = 0u64;
        for n in 0..count {
            if n > 0 {
                let l = match self {
                    Self::Constant(l) => *l,
                    Self::List(v) => *v.get(n - 1).ok_or_else(|| {
                        Error::InvalidConfig(format!("gap list has {} entries, need {}", v.len(), count - 1))
                    })?,
                };
                if l == 0 {
                    return Err(Error::InvalidConfig("gaps must be >= 1".into()));
                }
                acc += l as u64;
            }
            out.push(acc);
        }
        Ok(out)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ShiftReport {
    pub k: usize,
    pub precision_bits: u32,
    pub lambda_last: u64,
    pub star_discrepancy: Option<f64>,
    pub ud: UdReport,
}

/// `y_n = Phi_n g_{Lambda_n}` for `n < k` with `g_0, g_1, ...` i.i.d. Haar;
/// only the coordinates `Lambda_n` are ever drawn.
pub fn shift_sequence(cache: &mut ProcessCache, gaps: &Gaps, k: usize, seed: u64) -> Result<Vec<TorusPoint>> {
    if k == 0 {
        return Err(Error::OutOfRange("k must be >= 1".into()));
    }
    cache.extend_phis(k - 1)?;
    if let Some(n) = cache.generator_dets()[..k - 1].iter().position(Zero::is_zero) {
        return Err(Error::InvalidConfig(format!("T_{} is not surjective", n + 1)));
    }
    let prec = cache.precision_for(k)?;
    let lambdas = gaps.lambdas(k)?;
    let dim = cache.dim();
    let stream = SeedStream::new(seed).named("shift-coordinates");
    let phis = cache.phis();
    par::try_map_range(k, |n| {
        let g = haar_sample(&mut stream.child(lambdas[n]).rng(), dim, &prec);
        phis[n].apply(&g)
    })
}

/// Equidistribution report for the shift sequence: star discrepancy in
/// dimension one and the Weyl test over the frequency box.
pub fn run_shift_ud(
    cache: &mut ProcessCache,
    gaps: &Gaps,
    k: usize,
    seed: u64,
    box_bound: i64,
    threshold: Option<f64>,
) -> Result<ShiftReport> {
    let ys = shift_sequence(cache, gaps, k, seed)?;
    let chars = Character::frequency_box(cache.dim(), box_bound)?;
    let threshold = threshold.unwrap_or_else(|| default_threshold(k));
    let star = if cache.dim() == 1 { Some(star_discrepancy_1d(&ys, k)?) } else { None };
    Ok(ShiftReport {
        k,
        precision_bits: ys[0].bits(),
        lambda_last: *gaps.lambdas(k)?.last().expect("k >= 1"),
        star_discrepancy: star,
        ud: ud_test_sequence(&ys, &chars, k, threshold)?,
    })
}
