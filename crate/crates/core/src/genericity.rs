//! Witnesses for the non-convergence side: tent observables, concentrated
//! windows near kernel points, and exact certificates for both.

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::ball::{ball_offset_sample, ball_volume, factorial, haar_sample};
use crate::error::{Error, Result};
use crate::kernel::{kernel_points, kernel_size, KERNEL_CAP};
use crate::matrix::IntegerEndomorphism;
use crate::process::{GeneratorRule, ProcessCache, RuleDocument};
use crate::rng::SeedStream;
use crate::torus::{parse_rational, rational_to_string, Precision, RationalPoint, TorusPoint};

/// Dyadic resolution of [`small_ball_delta`].
pub const DELTA_BITS: u32 = 20;
/// Largest `m` scanned for a kernel point inside the target.
pub const MAX_KERNEL_INDEX: usize = 64;
/// Largest horizon tried by [`oscillation_witness`].
pub const MAX_OSCILLATION_HORIZON: usize = 1 << 14;

fn q(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

/// `1` on `B(0, delta/2)`, `2 - 2 rho(x, 0) / delta` out to `B(0, delta)`, then `0`.
#[derive(Clone, Debug, PartialEq)]
pub struct TentFunction {
    delta: BigRational,
    delta_f: f64,
}

impl TentFunction {
    pub fn new(delta: BigRational) -> Result<Self> {
        if !delta.is_positive() || delta >= q(1, 2) {
            return Err(Error::OutOfRange(format!("tent radius {delta} outside (0, 1/2)")));
        }
        let delta_f = delta.to_f64().expect("finite");
        Ok(Self { delta, delta_f })
    }

    pub fn delta(&self) -> &BigRational {
        &self.delta
    }

    /// Value at a point with `rho(x, 0) = num / den`, exact.
    pub fn value_at_norm(&self, num: &BigUint, den: &BigUint) -> BigRational {
        let rho = BigRational::new(num.clone().into(), den.clone().into());
        let half = &self.delta / BigInt::from(2);
        if rho <= half {
            BigRational::one()
        } else if rho <= self.delta {
            BigRational::from_integer(2.into()) - rho * BigInt::from(2) / &self.delta
        } else {
            BigRational::zero()
        }
    }

    pub fn value_rational(&self, x: &RationalPoint) -> BigRational {
        self.value_at_norm(&x.norm_numerator(), x.denom())
    }

    /// Branch decided exactly, linear part in double precision.
    pub fn value(&self, x: &TorusPoint) -> f64 {
        let num = x.norm_numerator();
        // rho <= delta/2  <=>  2 num dq <= dp 2^B
        let scaled = BigInt::from(num.clone()) * self.delta.denom();
        let unit = BigInt::from(x.precision().modulus()) * self.delta.numer();
        if &scaled * 2 <= unit {
            1.0
        } else if scaled <= unit {
            2.0 - 2.0 * x.norm_f64() / self.delta_f
        } else {
            0.0
        }
    }

    /// Lipschitz constant `2 / delta` in `rho`.
    pub fn lipschitz(&self) -> f64 {
        2.0 / self.delta_f
    }

    /// `int f` over `(R/Z)^dim`.
    pub fn integral(&self, dim: usize) -> BigRational {
        tent_integral(&self.delta, dim)
    }
}

/// `int f = vol(delta/2) + int_{delta/2}^{delta} (2 - 2t/delta) dvol(t)`
/// with `vol(t) = (2t)^d / d!`, which integrates to
/// `2^{d+1} delta^d (1 - 2^{-(d+1)}) / (d+1)!`.
pub fn tent_integral(delta: &BigRational, dim: usize) -> BigRational {
    let two = BigInt::from(2);
    let lead = BigRational::from_integer(num_traits::pow(two.clone(), dim + 1)) * num_traits::pow(delta.clone(), dim);
    let shrink = BigRational::one() - BigRational::new(BigInt::one(), num_traits::pow(two, dim + 1));
    lead * shrink / BigRational::from_integer(factorial(dim + 1))
}

/// Largest `j / 2^20 < 1/2` with `vol(B(0, j / 2^20)) < eps`.
pub fn small_ball_delta(dim: usize, eps: &BigRational) -> Result<BigRational> {
    if !eps.is_positive() || eps > &BigRational::one() {
        return Err(Error::OutOfRange(format!("epsilon {eps} outside (0, 1]")));
    }
    let den = BigInt::one() << DELTA_BITS;
    let at = |j: u64| BigRational::new(BigInt::from(j), den.clone());
    let ok = |j: u64| -> Result<bool> { Ok(&ball_volume(dim, &at(j))? < eps) };
    let (mut lo, mut hi) = (0u64, (1u64 << (DELTA_BITS - 1)) - 1);
    if !ok(1)? {
        return Err(Error::OutOfRange(format!("epsilon {eps} below the dyadic resolution")));
    }
    // invariant: ok(lo) or lo == 0; answer in [lo, hi]
    lo = lo.max(1);
    while lo < hi {
        let mid = lo + (hi - lo).div_ceil(2);
        if ok(mid)? {
            lo = mid;
        } else {
            hi = mid - 1;
        }
    }
    Ok(at(lo))
}

/// Open `rho`-ball `B(center, radius)`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TargetBall {
    pub center: RationalPoint,
    pub radius: BigRational,
}

impl TargetBall {
    pub fn new(center: RationalPoint, radius: BigRational) -> Result<Self> {
        if !radius.is_positive() {
            return Err(Error::OutOfRange("target radius must be positive".into()));
        }
        Ok(Self { center, radius })
    }

    /// The whole torus.
    pub fn everything(dim: usize) -> Self {
        Self { center: RationalPoint::zero(dim), radius: BigRational::from_integer(BigInt::from(dim)) }
    }

    pub fn contains(&self, x: &RationalPoint) -> Result<bool> {
        Ok(x.sub(&self.center)?.norm() < self.radius)
    }

    /// Ball of the given radius around a seeded 64-bit dyadic center.
    pub fn random(dim: usize, radius: BigRational, seed: u64, index: u64) -> Result<Self> {
        let prec = Precision::new(64)?;
        let mut rng = SeedStream::new(seed).named("target-ball").child(index).rng();
        let c = haar_sample(&mut rng, dim, &prec);
        Self::new(c.to_rational_point(), radius)
    }
}

/// Kernel point of `Phi` closest to `target.center`, if inside the ball.
fn kernel_point_in(phi: &IntegerEndomorphism, target: &TargetBall) -> Result<Option<RationalPoint>> {
    let size = kernel_size(phi)?;
    if phi.dim() == 1 {
        // {j / |a|}: round the center to the grid
        let qn = BigInt::from(size);
        let c = &target.center.coords()[0];
        let j = (c * &qn).round().to_integer().mod_floor(&qn);
        let a = RationalPoint::from_rationals(&[BigRational::new(j, qn)]);
        return Ok(target.contains(&a)?.then_some(a));
    }
    if size > BigUint::from(KERNEL_CAP) {
        return Ok(None);
    }
    let lat = kernel_points(phi)?;
    let mut best: Option<(BigRational, RationalPoint)> = None;
    for p in lat.points() {
        let d = p.sub(&target.center)?.norm();
        if d < target.radius && best.as_ref().is_none_or(|(bd, _)| &d < bd) {
            best = Some((d, p));
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Largest dyadic `<= r`, keeping eight significant bits.
pub fn dyadic_floor(r: &BigRational) -> BigRational {
    let ratio = r.denom() / r.numer();
    let p = ratio.bits() + 8;
    let scale = BigInt::one() << p;
    BigRational::new((r * BigRational::from_integer(scale.clone())).floor().to_integer(), scale)
}

/// A kernel point `a in ker Phi_m` inside the target, and a radius `w` such
/// that every `x` with `rho(x, a) < w` has `Phi_j x in B(0, delta/2)` for
/// `m <= j < m + L`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MeagerWitness {
    pub m: usize,
    pub a: RationalPoint,
    pub window_len: usize,
    pub w: BigRational,
    pub delta: BigRational,
    pub epsilon: BigRational,
}

impl MeagerWitness {
    /// `m + L`.
    pub fn horizon(&self) -> usize {
        self.m + self.window_len
    }

    /// `L / (m + L)`, the certified share of the window in `B(0, delta/2)`.
    pub fn achieved_fraction(&self) -> BigRational {
        BigRational::new(BigInt::from(self.window_len), BigInt::from(self.horizon()))
    }
}

pub fn concentrated_window(
    cache: &mut ProcessCache,
    delta: &BigRational,
    epsilon: &BigRational,
    n1: usize,
    target: &TargetBall,
) -> Result<MeagerWitness> {
    if !epsilon.is_positive() || epsilon >= &BigRational::one() {
        return Err(Error::OutOfRange(format!("epsilon {epsilon} outside (0, 1)")));
    }
    TentFunction::new(delta.clone())?;
    if target.center.dim() != cache.dim() {
        return Err(Error::DimensionMismatch { expected: cache.dim(), got: target.center.dim() });
    }
    let mut found = None;
    for m in 0..=MAX_KERNEL_INDEX {
        let phi = cache.phi(m)?.clone();
        if let Some(a) = kernel_point_in(&phi, target)? {
            found = Some((m, a));
            break;
        }
    }
    let (m, a) = found.ok_or_else(|| {
        Error::WitnessNotFound(format!("no kernel point in the target for m <= {MAX_KERNEL_INDEX}"))
    })?;
    // smallest N2 with m / (m + N2) < eps
    let slack = BigRational::from_integer(BigInt::from(m)) * (BigRational::one() - epsilon) / epsilon;
    let n2 = slack.floor().to_integer().to_usize().expect("small") + 1;
    let window_len = n1.max(n2).max(1);
    cache.extend_phis(m + window_len)?;
    let half = delta / BigInt::from(2);
    let w_raw = cache.phis()[m..m + window_len]
        .iter()
        .map(|phi| &half / phi.col_norm())
        .min()
        .expect("nonempty window");
    Ok(MeagerWitness { m, a, window_len, w: dyadic_floor(&w_raw), delta: delta.clone(), epsilon: epsilon.clone() })
}

/// Running exact tent averages along the orbit of `x`; `out[j]` is the
/// average at horizon `ks[j]`. Also returns the count of `i < max(ks)` with
/// `Phi_i x in B(0, delta/2)`, per horizon.
pub fn tent_averages_exact(
    cache: &mut ProcessCache,
    x: &RationalPoint,
    tent: &TentFunction,
    ks: &[usize],
) -> Result<Vec<(BigRational, usize)>> {
    let kmax = ks.iter().copied().max().unwrap_or(0);
    if ks.contains(&0) {
        return Err(Error::OutOfRange("horizons must be >= 1".into()));
    }
    cache.extend_generators(kmax)?;
    let den = BigInt::from(x.denom().clone());
    let (dn, dd) = (tent.delta().numer().clone(), tent.delta().denom().clone());
    // f = 1 when 2 r dd <= dn D; f = 2 - 2 r dd / (dn D) when r dd <= dn D
    let unit = &dn * &den;
    let mut ones = 0usize;
    let mut mids = 0usize;
    let mut mid_sum = BigInt::zero();
    let mut out = vec![(BigRational::zero(), 0); ks.len()];
    let mut cur = x.clone();
    for i in 0..kmax {
        let r = BigInt::from(cur.norm_numerator());
        let s = &r * &dd;
        if &s * 2 <= unit {
            ones += 1;
        } else if s <= unit {
            mids += 1;
            mid_sum += r;
        }
        for (j, &k) in ks.iter().enumerate() {
            if k == i + 1 {
                let total = BigRational::from_integer(BigInt::from(ones + 2 * mids))
                    - BigRational::new(BigInt::from(2) * &mid_sum * &dd, unit.clone());
                out[j] = (total / BigInt::from(k), ones);
            }
        }
        if i + 1 < kmax {
            cur = cache.generators()[i].apply_rational(&cur)?;
        }
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct ManceWitness {
    pub witness: MeagerWitness,
    pub target: TargetBall,
    pub k_min: usize,
    pub x: RationalPoint,
    pub window_average: BigRational,
}

/// `x` and `L >= K` with tent average at least `2/3`, `delta` chosen so that
/// `int f < 1/2`.
pub fn mance_witness(cache: &mut ProcessCache, k_min: usize, target: &TargetBall) -> Result<ManceWitness> {
    let d = cache.dim();
    let delta = small_ball_delta(d, &q(1, 2))?;
    let tent = TentFunction::new(delta.clone())?;
    let w = concentrated_window(cache, &delta, &q(1, 3), k_min, target)?;
    let x = w.a.clone();
    let avg = tent_averages_exact(cache, &x, &tent, &[w.horizon()])?.remove(0).0;
    if avg < q(2, 3) {
        return Err(Error::WitnessNotFound(format!("window average {avg} below 2/3")));
    }
    Ok(ManceWitness { witness: w, target: target.clone(), k_min, x, window_average: avg })
}

#[derive(Clone, Debug)]
pub struct OscillationWitness {
    pub witness: MeagerWitness,
    pub target: TargetBall,
    pub k_min: usize,
    pub tol: BigRational,
    pub x: RationalPoint,
    pub horizon_l: usize,
    pub horizon_n: usize,
    pub avg_l: BigRational,
    pub avg_n: BigRational,
}

impl OscillationWitness {
    pub fn gap(&self) -> BigRational {
        &self.avg_l - &self.avg_n
    }
}

/// Default slack on the `7/8` and `3/8` thresholds.
pub fn default_tol() -> BigRational {
    q(1, 32)
}

/// `x` near a deep kernel point, with tent average `>= 7/8 - tol` at `L` and
/// `<= 3/8 + tol` at a dyadic `N > L`. `x = a + u` with `u` drawn uniformly
/// from the certified neighborhood so that the tail of the orbit is typical.
pub fn oscillation_witness(
    cache: &mut ProcessCache,
    k_min: usize,
    target: &TargetBall,
    tol: &BigRational,
    seed: u64,
) -> Result<OscillationWitness> {
    let d = cache.dim();
    let delta = small_ball_delta(d, &q(1, 8))?;
    let tent = TentFunction::new(delta.clone())?;
    let w = concentrated_window(cache, &delta, &q(1, 8), k_min, target)?;
    let horizon_l = w.horizon();
    let mut ks = Vec::new();
    let mut n = horizon_l.next_power_of_two() * 2;
    while n <= MAX_OSCILLATION_HORIZON {
        ks.push(n);
        n *= 2;
    }
    let n_max = *ks.last().ok_or_else(|| Error::WitnessNotFound("window exceeds the horizon budget".into()))?;
    let w_bits = (w.w.denom() / w.w.numer()).bits() + 1;
    let prec = Precision::at_least(w_bits + cache.horizon_bits(n_max)? + 64)?;
    let mut rng = SeedStream::new(seed).named("oscillation-offset").rng();
    let u = ball_offset_sample(&mut rng, d, &w.w, &prec)?;
    let x = w.a.add(&u.to_rational_point())?;
    let hi = q(7, 8) - tol;
    let lo = q(3, 8) + tol;
    let avg_l = tent_averages_exact(cache, &x, &tent, &[horizon_l])?.remove(0).0;
    if avg_l < hi {
        return Err(Error::WitnessNotFound(format!("average {avg_l} at L = {horizon_l} below 7/8 - tol")));
    }
    let mut hit = None;
    for &n in &ks {
        let avg = tent_averages_exact(cache, &x, &tent, &[n])?.remove(0).0;
        if avg <= lo {
            hit = Some((n, avg));
            break;
        }
    }
    let (horizon_n, avg_n) =
        hit.ok_or_else(|| Error::WitnessNotFound(format!("average stayed above 3/8 + tol through N = {n_max}")))?;
    Ok(OscillationWitness {
        witness: w,
        target: target.clone(),
        k_min,
        tol: tol.clone(),
        x,
        horizon_l,
        horizon_n,
        avg_l,
        avg_n,
    })
}

/// Tent average at horizon `k` from a Haar point, in double precision.
pub fn haar_tent_average(cache: &mut ProcessCache, tent: &TentFunction, k: usize, stream: &SeedStream) -> Result<f64> {
    let prec = cache.precision_for(k)?;
    cache.extend_generators(k)?;
    let x = haar_sample(&mut stream.rng(), cache.dim(), &prec);
    let mut s = 0.0;
    for y in cache.orbit(&x, k)? {
        s += tent.value(&y);
    }
    Ok(s / k as f64)
}

/// For `[0, 1]`-valued sequences: `|avg_k(a) - avg_k(b)|` and the bound
/// `#{i < k : a_i != b_i} / k`.
pub fn perturbation_gap(a: &[BigRational], b: &[BigRational], k: usize) -> Result<(BigRational, BigRational)> {
    if k == 0 || k > a.len() || k > b.len() {
        return Err(Error::OutOfRange(format!("k = {k} with sequences of length {}, {}", a.len(), b.len())));
    }
    let unit = |v: &BigRational| !v.is_negative() && v <= &BigRational::one();
    if !a[..k].iter().chain(&b[..k]).all(unit) {
        return Err(Error::OutOfRange("values must lie in [0, 1]".into()));
    }
    let kk = BigInt::from(k);
    let sa: BigRational = a[..k].iter().sum();
    let sb: BigRational = b[..k].iter().sum();
    let differ = a[..k].iter().zip(&b[..k]).filter(|(x, y)| x != y).count();
    Ok(((sa - sb).abs() / &kk, BigRational::new(BigInt::from(differ), kk)))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessKind {
    Mance,
    Oscillation,
}

/// Self-contained, replayable witness. Rationals are `"p/q"` strings.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WitnessCertificate {
    pub kind: WitnessKind,
    pub rule: RuleDocument,
    pub k_min: usize,
    pub delta: String,
    pub epsilon: String,
    pub target_center: Vec<String>,
    pub target_radius: String,
    pub m: usize,
    pub a: Vec<String>,
    pub w: String,
    pub window_len: usize,
    pub x: Vec<String>,
    pub horizon_l: usize,
    pub avg_l: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon_n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub avg_n: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<String>,
}

fn common(kind: WitnessKind, rule: &GeneratorRule, k_min: usize, w: &MeagerWitness, t: &TargetBall) -> WitnessCertificate {
    WitnessCertificate {
        kind,
        rule: rule.to_document(),
        k_min,
        delta: rational_to_string(&w.delta),
        epsilon: rational_to_string(&w.epsilon),
        target_center: t.center.to_strings(),
        target_radius: rational_to_string(&t.radius),
        m: w.m,
        a: w.a.to_strings(),
        w: rational_to_string(&w.w),
        window_len: w.window_len,
        x: Vec::new(),
        horizon_l: w.horizon(),
        avg_l: String::new(),
        horizon_n: None,
        avg_n: None,
        tol: None,
    }
}

impl ManceWitness {
    pub fn certificate(&self, rule: &GeneratorRule) -> WitnessCertificate {
        let mut c = common(WitnessKind::Mance, rule, self.k_min, &self.witness, &self.target);
        c.x = self.x.to_strings();
        c.avg_l = rational_to_string(&self.window_average);
        c
    }
}

impl OscillationWitness {
    pub fn certificate(&self, rule: &GeneratorRule) -> WitnessCertificate {
        let mut c = common(WitnessKind::Oscillation, rule, self.k_min, &self.witness, &self.target);
        c.x = self.x.to_strings();
        c.horizon_l = self.horizon_l;
        c.avg_l = rational_to_string(&self.avg_l);
        c.horizon_n = Some(self.horizon_n);
        c.avg_n = Some(rational_to_string(&self.avg_n));
        c.tol = Some(rational_to_string(&self.tol));
        c
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyCheck {
    pub name: String,
    pub ok: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub kind: WitnessKind,
    pub ok: bool,
    pub checks: Vec<VerifyCheck>,
}

/// Replays a certificate with exact rational orbits.
pub fn verify_witness(cert: &WitnessCertificate) -> Result<VerifyReport> {
    let rule = GeneratorRule::from_document(&cert.rule)?;
    let mut cache = ProcessCache::new(rule);
    let delta = parse_rational(&cert.delta)?;
    let eps = parse_rational(&cert.epsilon)?;
    let tent = TentFunction::new(delta.clone())?;
    let target = TargetBall::new(RationalPoint::parse(&cert.target_center)?, parse_rational(&cert.target_radius)?)?;
    let a = RationalPoint::parse(&cert.a)?;
    let x = RationalPoint::parse(&cert.x)?;
    let w = parse_rational(&cert.w)?;
    let d = cache.dim();
    let mut checks = Vec::new();
    let mut check = |name: &str, ok: bool| checks.push(VerifyCheck { name: name.to_string(), ok });

    let expected_eps = match cert.kind {
        WitnessKind::Mance => q(1, 3),
        WitnessKind::Oscillation => q(1, 8),
    };
    let expected_ball = match cert.kind {
        WitnessKind::Mance => q(1, 2),
        WitnessKind::Oscillation => q(1, 8),
    };
    check("epsilon matches kind", eps == expected_eps);
    check("delta ball is small", ball_volume(d, &delta)? < expected_ball);
    check("a lies in the target", target.contains(&a)?);
    cache.extend_phis(cert.m + cert.window_len)?;
    check("a in ker Phi_m", cache.phis()[cert.m].apply_rational(&a)?.is_zero());
    let half = &delta / BigInt::from(2);
    let lipschitz_ok = w.is_positive()
        && cache.phis()[cert.m..cert.m + cert.window_len]
            .iter()
            .all(|phi| &w * BigRational::from_integer(phi.col_norm()) <= half);
    check("w ||Phi_j||_col <= delta/2 across the window", lipschitz_ok);
    check("horizon L = m + window", cert.horizon_l == cert.m + cert.window_len);
    check("L >= K", cert.horizon_l >= cert.k_min && cert.window_len >= cert.k_min);
    let frac = BigRational::new(BigInt::from(cert.window_len), BigInt::from(cert.horizon_l));
    check("window fraction >= 1 - epsilon", frac >= BigRational::one() - &eps);
    check("x within w of a", x.sub(&a)?.norm() < w);

    let mut ks = vec![cert.horizon_l];
    if let Some(n) = cert.horizon_n {
        ks.push(n);
    }
    let avgs = tent_averages_exact(&mut cache, &x, &tent, &ks)?;
    let frac_x = BigRational::new(BigInt::from(avgs[0].1), BigInt::from(cert.horizon_l));
    check("orbit of x spends >= 1 - epsilon of the window in B(0, delta/2)", frac_x >= BigRational::one() - &eps);
    check("avg_L replays exactly", rational_to_string(&avgs[0].0) == cert.avg_l);
    match cert.kind {
        WitnessKind::Mance => {
            check("avg_L >= 2/3", avgs[0].0 >= q(2, 3));
        }
        WitnessKind::Oscillation => {
            let tol = parse_rational(cert.tol.as_deref().unwrap_or(""))?;
            let n = cert.horizon_n.unwrap_or(0);
            let avg_n = avgs.get(1).map(|v| v.0.clone()).unwrap_or_else(BigRational::one);
            check("N > L", n > cert.horizon_l);
            check("avg_N replays exactly", cert.avg_n.as_deref() == Some(rational_to_string(&avg_n).as_str()));
            check("avg_L >= 7/8 - tol", avgs[0].0 >= q(7, 8) - &tol);
            check("avg_N <= 3/8 + tol", avg_n <= q(3, 8) + &tol);
            check("gap > 1/2 - 2 tol", &avgs[0].0 - &avg_n > q(1, 2) - &tol * BigInt::from(2));
        }
    }
    let ok = checks.iter().all(|c| c.ok);
    Ok(VerifyReport { kind: cert.kind.clone(), ok, checks })
}
