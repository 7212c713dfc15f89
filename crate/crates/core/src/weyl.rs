//! Characters of the torus, Weyl sums along process orbits, and
//! equidistribution diagnostics.

use std::f64::consts::TAU;

use num_bigint::BigInt;
use num_complex::Complex64;
use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::ball::haar_sample;
use crate::error::{Error, Result};
use crate::matrix::IntegerEndomorphism;
use crate::par;
use crate::process::ProcessCache;
use crate::rng::SeedStream;
use crate::torus::TorusPoint;

/// Default half-width of the frequency box.
pub const DEFAULT_BOX: i64 = 8;
/// Default threshold constant `c` in `c / sqrt(k)`.
pub const DEFAULT_THRESHOLD_C: f64 = 3.0;

/// `x -> exp(2 pi i m.x)` for a nonzero integer vector `m`.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Character {
    freq: Vec<BigInt>,
}

impl Character {
    pub fn new(freq: Vec<BigInt>) -> Result<Self> {
        if freq.is_empty() {
            return Err(Error::InvalidConfig("empty frequency vector".into()));
        }
        if freq.iter().all(Zero::is_zero) {
            return Err(Error::InvalidConfig("trivial character".into()));
        }
        Ok(Self { freq })
    }

    pub fn from_i64(freq: &[i64]) -> Result<Self> {
        Self::new(freq.iter().map(|&m| BigInt::from(m)).collect())
    }

    /// Parses `"1"`, `"1,-2"` or `"1;-2"`.
    pub fn parse(s: &str) -> Result<Self> {
        let freq = s
            .split([',', ';'])
            .map(|t| {
                t.trim()
                    .parse::<BigInt>()
                    .map_err(|_| Error::InvalidConfig(format!("bad frequency component {t:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(freq)
    }

    pub fn freq(&self) -> &[BigInt] {
        &self.freq
    }

    pub fn dim(&self) -> usize {
        self.freq.len()
    }

    /// `||m||_1`.
    pub fn l1(&self) -> BigInt {
        self.freq.iter().map(|m| m.abs()).sum()
    }

    /// `||m||_inf`.
    pub fn sup_norm(&self) -> BigInt {
        self.freq.iter().map(|m| m.abs()).max().unwrap_or_default()
    }

    /// Components joined by `;`, as written to CSV.
    pub fn label(&self) -> String {
        self.freq.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(";")
    }

    /// `m.x mod 1` as a double, from the exact fixed-point phase.
    pub fn phase(&self, x: &TorusPoint) -> Result<f64> {
        let num = x.phase(&self.freq)?;
        Ok(x.fraction_to_f64(&num))
    }

    pub fn eval(&self, x: &TorusPoint) -> Result<Complex64> {
        Ok(cis_turns(self.phase(x)?))
    }

    /// The character `x -> gamma(A x)`, whose frequency is `A^T m`.
    pub fn pullback(&self, a: &IntegerEndomorphism) -> Result<Self> {
        Self::new(a.pullback_frequency(&self.freq)?)
    }

    /// The conjugate character, frequency `-m`.
    pub fn conj(&self) -> Self {
        Self { freq: self.freq.iter().map(|m| -m).collect() }
    }

    /// `{m : 0 < ||m||_inf <= bound}` modulo `m ~ -m`: the representative
    /// whose first nonzero entry is positive. `|S_{-m}| = |S_m|`, so the
    /// representatives carry the whole sup.
    pub fn frequency_box(dim: usize, bound: i64) -> Result<Vec<Self>> {
        if dim == 0 || bound < 1 {
            return Err(Error::InvalidConfig("frequency box needs dim >= 1 and bound >= 1".into()));
        }
        let side = (2 * bound + 1) as u64;
        let total = side
            .checked_pow(dim as u32)
            .filter(|&t| t <= 10_000_000)
            .ok_or_else(|| Error::InvalidConfig("frequency box too large".into()))?;
        let mut out = Vec::new();
        for code in 0..total {
            let mut c = code;
            let mut m = Vec::with_capacity(dim);
            for _ in 0..dim {
                m.push((c % side) as i64 - bound);
                c /= side;
            }
            match m.iter().find(|&&v| v != 0) {
                Some(&first) if first > 0 => out.push(Self::from_i64(&m)?),
                _ => {}
            }
        }
        Ok(out)
    }
}

/// `exp(2 pi i t)` with `t` first reduced to `[-1/2, 1/2)`.
pub fn cis_turns(t: f64) -> Complex64 {
    let r = t - t.round();
    let (s, c) = (TAU * r).sin_cos();
    Complex64::new(c, s)
}

/// Neumaier-compensated complex accumulator.
#[derive(Clone, Copy, Debug, Default)]
struct Accumulator {
    sum: Complex64,
    comp: Complex64,
}

impl Accumulator {
    fn add(&mut self, v: Complex64) {
        self.sum.re = neumaier(self.sum.re, v.re, &mut self.comp.re);
        self.sum.im = neumaier(self.sum.im, v.im, &mut self.comp.im);
    }

    fn total(&self) -> Complex64 {
        self.sum + self.comp
    }
}

fn neumaier(sum: f64, v: f64, comp: &mut f64) -> f64 {
    let t = sum + v;
    if sum.abs() >= v.abs() {
        *comp += (sum - t) + v;
    } else {
        *comp += (v - t) + sum;
    }
    t
}

/// Running Weyl means `S(1), ..., S(k)` of one character along one orbit.
#[derive(Clone, Debug)]
pub struct WeylSeries {
    character: Character,
    start: TorusPoint,
    next_point: TorusPoint,
    acc: Accumulator,
    partial: Vec<Complex64>,
}

impl WeylSeries {
    pub fn new(character: Character, x: &TorusPoint) -> Result<Self> {
        if character.dim() != x.dim() {
            return Err(Error::DimensionMismatch { expected: x.dim(), got: character.dim() });
        }
        Ok(Self {
            character,
            start: x.clone(),
            next_point: x.clone(),
            acc: Accumulator::default(),
            partial: Vec::new(),
        })
    }

    /// Series already extended to `k`.
    pub fn compute(cache: &mut ProcessCache, character: Character, x: &TorusPoint, k: usize) -> Result<Self> {
        let mut s = Self::new(character, x)?;
        s.extend(cache, k)?;
        Ok(s)
    }

    /// Extends the partial sums through `k` terms.
    pub fn extend(&mut self, cache: &mut ProcessCache, k: usize) -> Result<()> {
        if k == 0 {
            return Err(Error::OutOfRange("k must be >= 1".into()));
        }
        if k <= self.partial.len() {
            return Ok(());
        }
        if cache.dim() != self.start.dim() {
            return Err(Error::DimensionMismatch { expected: cache.dim(), got: self.start.dim() });
        }
        cache.check_precision(k, self.start.bits())?;
        cache.extend_generators(k)?;
        let gens = cache.generators();
        while self.partial.len() < k {
            let i = self.partial.len();
            self.acc.add(self.character.eval(&self.next_point)?);
            self.partial.push(self.acc.total() / (i + 1) as f64);
            self.next_point = gens[i].apply(&self.next_point)?;
        }
        Ok(())
    }

    pub fn character(&self) -> &Character {
        &self.character
    }

    pub fn point(&self) -> &TorusPoint {
        &self.start
    }

    pub fn len(&self) -> usize {
        self.partial.len()
    }

    pub fn is_empty(&self) -> bool {
        self.partial.is_empty()
    }

    /// `S(k)`, `1 <= k <= len()`.
    pub fn get(&self, k: usize) -> Option<Complex64> {
        k.checked_sub(1).and_then(|i| self.partial.get(i).copied())
    }

    pub fn partial_sums(&self) -> &[Complex64] {
        &self.partial
    }
}

/// `S_gamma(k, x) = (1/k) sum_{i<k} gamma(Phi_i x)`.
pub fn weyl_sum(cache: &mut ProcessCache, x: &TorusPoint, character: &Character, k: usize) -> Result<Complex64> {
    let s = WeylSeries::compute(cache, character.clone(), x, k)?;
    Ok(s.get(k).expect("series extended to k"))
}

/// Weyl means of several characters over one orbit pass; `out[c][j]` is
/// `S_{chars[c]}(ks[j], x)`. Generators must be materialized through `max(ks)`.
pub fn weyl_sums_at(
    cache: &ProcessCache,
    x: &TorusPoint,
    chars: &[Character],
    ks: &[usize],
) -> Result<Vec<Vec<Complex64>>> {
    let kmax = ks.iter().copied().max().unwrap_or(0);
    if ks.contains(&0) {
        return Err(Error::OutOfRange("k must be >= 1".into()));
    }
    for c in chars {
        if c.dim() != x.dim() {
            return Err(Error::DimensionMismatch { expected: x.dim(), got: c.dim() });
        }
    }
    let mut accs = vec![Accumulator::default(); chars.len()];
    let mut out = vec![vec![Complex64::zero(); ks.len()]; chars.len()];
    for (i, y) in cache.orbit(x, kmax)?.enumerate() {
        for (acc, c) in accs.iter_mut().zip(chars) {
            acc.add(c.eval(&y)?);
        }
        for (j, &k) in ks.iter().enumerate() {
            if k == i + 1 {
                for (row, acc) in out.iter_mut().zip(&accs) {
                    row[j] = acc.total() / k as f64;
                }
            }
        }
    }
    Ok(out)
}

/// Weyl means of a character along an explicit sequence; `out[k-1] = S(k)`.
pub fn weyl_sums_sequence(points: &[TorusPoint], character: &Character) -> Result<Vec<Complex64>> {
    let mut acc = Accumulator::default();
    let mut out = Vec::with_capacity(points.len());
    for (i, p) in points.iter().enumerate() {
        acc.add(character.eval(p)?);
        out.push(acc.total() / (i + 1) as f64);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct VarianceEstimate {
    pub k: usize,
    pub mean_sq: f64,
    /// Standard error of the mean.
    pub sigma_hat: f64,
    /// `3 sigma_hat`.
    pub ci: f64,
    /// The exact value `1/k` for Difference Property processes.
    pub target: f64,
    pub samples: usize,
}

impl VarianceEstimate {
    pub fn within_ci(&self) -> bool {
        (self.mean_sq - self.target).abs() <= self.ci
    }
}

/// Monte Carlo estimate of `int |S_gamma(k, x)|^2 dx` for each `k` in `ks`,
/// all `k` sharing one orbit per Haar sample.
pub fn variance_identity_mc(
    cache: &mut ProcessCache,
    character: &Character,
    ks: &[usize],
    n_samples: usize,
    seed: u64,
) -> Result<Vec<VarianceEstimate>> {
    if n_samples < 2 {
        return Err(Error::InvalidConfig("need at least two samples".into()));
    }
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidConfig("ks must be nonempty and positive".into()));
    }
    let kmax = *ks.iter().max().unwrap();
    let prec = cache.precision_for(kmax)?;
    cache.extend_generators(kmax)?;
    let cache = &*cache;
    let dim = cache.dim();
    let stream = SeedStream::new(seed).named("variance");
    let chars = [character.clone()];
    let sq: Vec<Vec<f64>> = par::try_map_range(n_samples, |s| {
        let x = haar_sample(&mut stream.child(s as u64).rng(), dim, &prec);
        let sums = weyl_sums_at(cache, &x, &chars, ks)?;
        Ok::<_, Error>(sums[0].iter().map(|z| z.norm_sqr()).collect())
    })?;
    let n = n_samples as f64;
    Ok(ks
        .iter()
        .enumerate()
        .map(|(j, &k)| {
            let mean = sq.iter().map(|v| v[j]).sum::<f64>() / n;
            let var = sq.iter().map(|v| (v[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
            let sigma_hat = (var / n).sqrt();
            VarianceEstimate {
                k,
                mean_sq: mean,
                sigma_hat,
                ci: 3.0 * sigma_hat,
                target: 1.0 / k as f64,
                samples: n_samples,
            }
        })
        .collect())
}

/// `|S(k)| <= |S(floor(sqrt k)^2)| + 2/sqrt(k)`.
pub fn subsequence_bound_check(series: &WeylSeries, k: usize) -> Result<bool> {
    let sk = series
        .get(k)
        .ok_or_else(|| Error::OutOfRange(format!("series has {} terms, asked for {k}", series.len())))?;
    let r = k.isqrt();
    let sq = series.get(r * r).expect("r^2 <= k");
    Ok(sk.norm() <= sq.norm() + 2.0 / (k as f64).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct CharAbs {
    pub m: String,
    pub abs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct UdReport {
    pub k: usize,
    pub threshold: f64,
    pub max_abs: f64,
    pub argmax: String,
    pub pass: bool,
    pub per_char: Vec<CharAbs>,
}

impl UdReport {
    pub fn from_abs(k: usize, threshold: f64, chars: &[Character], abs: Vec<f64>) -> Self {
        let mut max_abs = 0.0;
        let mut argmax = String::new();
        for (c, &a) in chars.iter().zip(&abs) {
            if a > max_abs || argmax.is_empty() {
                max_abs = a;
                argmax = c.label();
            }
        }
        Self {
            k,
            threshold,
            max_abs,
            argmax,
            pass: max_abs <= threshold,
            per_char: chars.iter().zip(abs).map(|(c, abs)| CharAbs { m: c.label(), abs }).collect(),
        }
    }
}

/// `c / sqrt(k)` with the default `c`.
pub fn default_threshold(k: usize) -> f64 {
    DEFAULT_THRESHOLD_C / (k as f64).sqrt()
}

/// Passes iff `max_{gamma in chars} |S_gamma(k, x)| <= threshold`.
pub fn ud_test(
    cache: &mut ProcessCache,
    x: &TorusPoint,
    chars: &[Character],
    k: usize,
    threshold: f64,
) -> Result<UdReport> {
    if chars.is_empty() {
        return Err(Error::InvalidConfig("empty character set".into()));
    }
    if k == 0 {
        return Err(Error::OutOfRange("k must be >= 1".into()));
    }
    cache.check_precision(k, x.bits())?;
    cache.extend_generators(k)?;
    let sums = weyl_sums_at(cache, x, chars, &[k])?;
    let abs = sums.iter().map(|row| row[0].norm()).collect();
    Ok(UdReport::from_abs(k, threshold, chars, abs))
}

/// [`ud_test`] for the first `k` terms of an explicit sequence.
pub fn ud_test_sequence(points: &[TorusPoint], chars: &[Character], k: usize, threshold: f64) -> Result<UdReport> {
    if chars.is_empty() {
        return Err(Error::InvalidConfig("empty character set".into()));
    }
    if k == 0 || k > points.len() {
        return Err(Error::OutOfRange(format!("k = {k} with {} points", points.len())));
    }
    let abs = chars
        .iter()
        .map(|c| Ok(weyl_sums_sequence(&points[..k], c)?[k - 1].norm()))
        .collect::<Result<Vec<_>>>()?;
    Ok(UdReport::from_abs(k, threshold, chars, abs))
}

/// Star discrepancy of the first `k` points of a sequence in `[0, 1)`.
pub fn star_discrepancy_1d(points: &[TorusPoint], k: usize) -> Result<f64> {
    if k == 0 || k > points.len() {
        return Err(Error::OutOfRange(format!("k = {k} with {} points", points.len())));
    }
    if let Some(p) = points[..k].iter().find(|p| p.dim() != 1) {
        return Err(Error::UnsupportedDim(p.dim()));
    }
    let mut u: Vec<f64> = points[..k].iter().map(|p| p.coord_f64(0)).collect();
    Ok(star_discrepancy_sorted(&mut u))
}

/// Star discrepancy of values in `[0, 1)`; sorts in place.
pub fn star_discrepancy_values(u: &mut [f64]) -> f64 {
    star_discrepancy_sorted(u)
}

fn star_discrepancy_sorted(u: &mut [f64]) -> f64 {
    u.sort_by(f64::total_cmp);
    let k = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &v)| {
            let hi = (i + 1) as f64 / k;
            let lo = i as f64 / k;
            (hi - v).abs().max((lo - v).abs())
        })
        .fold(0.0, f64::max)
}

/// One CSV row of a Weyl-sum run.
#[derive(Clone, Debug, Serialize)]
pub struct WeylRow {
    pub run_id: String,
    pub k: usize,
    pub m_vector: String,
    pub re: f64,
    pub im: f64,
    pub abs: f64,
}

impl WeylRow {
    pub fn new(run_id: &str, k: usize, character: &Character, s: Complex64) -> Self {
        Self { run_id: run_id.to_string(), k, m_vector: character.label(), re: s.re, im: s.im, abs: s.norm() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::GeneratorRule;
    use crate::torus::Precision;
    use num_rational::BigRational;
    use rand::Rng;

    fn q(n: i64, d: i64) -> BigRational {
        BigRational::new(n.into(), d.into())
    }

    fn point(prec: &Precision, xs: &[(i64, i64)]) -> TorusPoint {
        let r: Vec<_> = xs.iter().map(|&(n, d)| q(n, d)).collect();
        TorusPoint::from_rationals(prec, &r)
    }

    #[test]
    fn zero_point_gives_one() {
        let mut cache = ProcessCache::new(GeneratorRule::doubling());
        let prec = cache.precision_for(50).unwrap();
        let s = WeylSeries::compute(&mut cache, Character::from_i64(&[3]).unwrap(), &TorusPoint::zero(1, &prec), 50)
            .unwrap();
        for z in s.partial_sums() {
            assert!((z - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn one_third_under_doubling() {
        // the orbit of 1/3 alternates 1/3, 2/3; truncation at 2^-B makes it
        // drift only after B steps.
        let mut cache = ProcessCache::new(GeneratorRule::doubling());
        let prec = cache.precision_for(40).unwrap();
        let x = point(&prec, &[(1, 3)]);
        let gamma = Character::from_i64(&[1]).unwrap();
        for k in [2usize, 10, 40] {
            let s = weyl_sum(&mut cache, &x, &gamma, k).unwrap();
            assert!((s - Complex64::new(-0.5, 0.0)).norm() < 1e-12, "k={k} s={s}");
        }
    }

    #[test]
    fn one_seventh_three_terms() {
        let mut cache = ProcessCache::new(GeneratorRule::doubling());
        let prec = cache.precision_for(3).unwrap();
        let x = point(&prec, &[(1, 7)]);
        let s = weyl_sum(&mut cache, &x, &Character::from_i64(&[1]).unwrap(), 3).unwrap();
        let oracle: Complex64 =
            [1.0, 2.0, 4.0].iter().map(|&j| Complex64::from_polar(1.0, TAU * j / 7.0)).sum::<Complex64>() / 3.0;
        assert!((s - oracle).norm() < 1e-14);
    }

    #[test]
    fn precision_exhaustion() {
        let mut cache = ProcessCache::new(GeneratorRule::doubling());
        let prec = Precision::new(128).unwrap();
        let x = point(&prec, &[(1, 5)]);
        let err = weyl_sum(&mut cache, &x, &Character::from_i64(&[1]).unwrap(), 100).unwrap_err();
        assert!(matches!(err, Error::PrecisionExhausted { required: 164, available: 128 }));
    }

    #[test]
    fn incremental_extension_matches_fresh() {
        let mut cache = ProcessCache::new(GeneratorRule::cantor_progression(2, 1).unwrap());
        let prec = cache.precision_for(64).unwrap();
        let x = haar_sample(&mut SeedStream::new(3).rng(), 1, &prec);
        let g = Character::from_i64(&[2]).unwrap();
        let mut s = WeylSeries::compute(&mut cache, g.clone(), &x, 10).unwrap();
        s.extend(&mut cache, 64).unwrap();
        let fresh = WeylSeries::compute(&mut cache, g, &x, 64).unwrap();
        assert_eq!(s.partial_sums(), fresh.partial_sums());
    }

    #[test]
    fn running_mean_increments_are_unimodular() {
        let mut cache = ProcessCache::new(GeneratorRule::doubling());
        let prec = cache.precision_for(256).unwrap();
        let x = haar_sample(&mut SeedStream::new(8).rng(), 1, &prec);
        let s = WeylSeries::compute(&mut cache, Character::from_i64(&[1]).unwrap(), &x, 256).unwrap();
        for k in 2..=256 {
            let inc = s.get(k).unwrap() * k as f64 - s.get(k - 1).unwrap() * (k - 1) as f64;
            assert!((inc.norm() - 1.0).abs() < 1e-12);
            assert!(s.get(k).unwrap().norm() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn identity_process_has_no_cancellation() {
        let mut cache = ProcessCache::new(GeneratorRule::identity(1));
        let est = variance_identity_mc(&mut cache, &Character::from_i64(&[1]).unwrap(), &[1, 4], 200, 1).unwrap();
        for e in &est {
            assert!((e.mean_sq - 1.0).abs() < 1e-12);
        }
        assert!(!est[1].within_ci());
    }

    #[test]
    fn k_one_variance_is_exactly_one() {
        let mut cache = ProcessCache::new(GeneratorRule::doubling());
        let est = variance_identity_mc(&mut cache, &Character::from_i64(&[1]).unwrap(), &[1], 100, 5).unwrap();
        assert!((est[0].mean_sq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn subsequence_bound_doubling() {
        let mut cache = ProcessCache::new(GeneratorRule::doubling());
        let prec = cache.precision_for(100).unwrap();
        let x = haar_sample(&mut SeedStream::new(11).rng(), 1, &prec);
        let s = WeylSeries::compute(&mut cache, Character::from_i64(&[1]).unwrap(), &x, 100).unwrap();
        for k in 1..=100 {
            assert!(subsequence_bound_check(&s, k).unwrap());
        }
        let z = WeylSeries::compute(&mut cache, Character::from_i64(&[1]).unwrap(), &TorusPoint::zero(1, &prec), 100)
            .unwrap();
        assert!(subsequence_bound_check(&z, 99).unwrap());
    }

    #[test]
    fn frequency_box_representatives() {
        let b1 = Character::frequency_box(1, 8).unwrap();
        assert_eq!(b1.len(), 8);
        let b2 = Character::frequency_box(2, 2).unwrap();
        assert_eq!(b2.len(), (25 - 1) / 2);
        for c in &b2 {
            assert!(!b2.contains(&c.conj()));
        }
    }

    #[test]
    fn ud_test_rejects_zero() {
        let mut cache = ProcessCache::new(GeneratorRule::doubling());
        let prec = cache.precision_for(64).unwrap();
        let chars = Character::frequency_box(1, 8).unwrap();
        let r = ud_test(&mut cache, &TorusPoint::zero(1, &prec), &chars, 64, 0.99).unwrap();
        assert!(!r.pass);
        assert!((r.max_abs - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ud_test_threshold_monotone() {
        let mut cache = ProcessCache::new(GeneratorRule::doubling());
        let prec = cache.precision_for(256).unwrap();
        let x = haar_sample(&mut SeedStream::new(4).rng(), 1, &prec);
        let chars = Character::frequency_box(1, 4).unwrap();
        let r = ud_test(&mut cache, &x, &chars, 256, 0.2).unwrap();
        let looser = ud_test(&mut cache, &x, &chars, 256, 0.4).unwrap();
        assert!(!r.pass || looser.pass);
    }

    #[test]
    fn pushforward_under_doubling() {
        // gamma_m(2x) == gamma_{2m}(x), bit for bit
        let prec = Precision::new(256).unwrap();
        let two = IntegerEndomorphism::from_i64(&[&[2]]).unwrap();
        let mut rng = SeedStream::new(21).rng();
        let xs: Vec<TorusPoint> = (0..300).map(|_| haar_sample(&mut rng, 1, &prec)).collect();
        let ys: Vec<TorusPoint> = xs.iter().map(|x| two.apply(x).unwrap()).collect();
        for m in 1..=4 {
            let g = Character::from_i64(&[m]).unwrap();
            let g2 = g.pullback(&two).unwrap();
            assert_eq!(g2.freq(), &[BigInt::from(2 * m)]);
            for (x, y) in xs.iter().zip(&ys) {
                assert_eq!(g.phase(y).unwrap(), g2.phase(x).unwrap());
            }
            let a = ud_test_sequence(&xs, &[g2], 300, 0.3).unwrap();
            let b = ud_test_sequence(&ys, &[g], 300, 0.3).unwrap();
            assert_eq!(a.max_abs, b.max_abs);
            assert_eq!(a.pass, b.pass);
        }
    }

    #[test]
    fn cat_map_phase_identity() {
        let prec = Precision::new(192).unwrap();
        let cat = IntegerEndomorphism::from_i64(&[&[2, 1], &[1, 1]]).unwrap();
        let mut rng = SeedStream::new(2).rng();
        for _ in 0..100 {
            let x = haar_sample(&mut rng, 2, &prec);
            let m = [rng.gen_range(-9i64..=9), rng.gen_range(1i64..=9)];
            let g = Character::from_i64(&m).unwrap();
            let back = g.pullback(&cat).unwrap();
            assert_eq!(x.phase(back.freq()).unwrap(), cat.apply(&x).unwrap().phase(g.freq()).unwrap());
        }
    }

    #[test]
    fn characters_are_homomorphisms() {
        let prec = Precision::new(128).unwrap();
        let mut rng = SeedStream::new(6).rng();
        let g = Character::from_i64(&[5, -3]).unwrap();
        for _ in 0..200 {
            let x = haar_sample(&mut rng, 2, &prec);
            let y = haar_sample(&mut rng, 2, &prec);
            let lhs = g.eval(&x.add(&y).unwrap()).unwrap();
            let rhs = g.eval(&x).unwrap() * g.eval(&y).unwrap();
            assert!((lhs - rhs).norm() < 1e-12);
            assert!((g.eval(&x).unwrap().norm() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn discrepancy_examples() {
        let prec = Precision::new(64).unwrap();
        let k = 50;
        let grid: Vec<TorusPoint> = (0..k).map(|j| point(&prec, &[(j, k)])).collect();
        let d = star_discrepancy_1d(&grid, k as usize).unwrap();
        assert!((d - 1.0 / k as f64).abs() < 1e-15);
        let zeros = vec![TorusPoint::zero(1, &prec); 10];
        assert_eq!(star_discrepancy_1d(&zeros, 10).unwrap(), 1.0);
        let two_d = vec![TorusPoint::zero(2, &prec); 3];
        assert!(matches!(star_discrepancy_1d(&two_d, 3), Err(Error::UnsupportedDim(2))));
    }

    #[test]
    fn discrepancy_matches_brute_force() {
        // sup over anchored intervals [0, t), checked at every point and just past it
        let mut rng = SeedStream::new(13).rng();
        let u: Vec<f64> = (0..40).map(|_| rng.gen::<f64>()).collect();
        let k = u.len() as f64;
        let mut brute: f64 = 0.0;
        for &t in &u {
            let below = u.iter().filter(|&&v| v < t).count() as f64;
            let upto = u.iter().filter(|&&v| v <= t).count() as f64;
            brute = brute.max((below / k - t).abs()).max((upto / k - t).abs());
        }
        let mut v = u.clone();
        assert!((star_discrepancy_values(&mut v) - brute).abs() < 1e-15);
    }
}
