//! Points of the d-torus R^d/Z^d in exact binary fixed point, the invariant
//! l1-type metric, and exact rational points for certificate replay.

use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};

/// Smallest supported number of fractional bits.
pub const MIN_BITS: u32 = 64;

/// Fractional bit count `B` shared by every coordinate of a point.
#[derive(Clone)]
pub struct Precision {
    bits: u32,
    mask: Arc<BigUint>,
}

impl Precision {
    pub fn new(bits: u32) -> Result<Self> {
        if bits < MIN_BITS {
            return Err(Error::OutOfRange(format!(
                "precision {bits} below minimum {MIN_BITS} bits"
            )));
        }
        let mask = (BigUint::one() << bits) - 1u32;
        Ok(Self { bits, mask: Arc::new(mask) })
    }

    /// Rounds `bits` up to a whole number of 64-bit limbs (and at least [`MIN_BITS`]).
    pub fn at_least(bits: u64) -> Result<Self> {
        let rounded = bits.max(MIN_BITS as u64).div_ceil(64) * 64;
        let bits = u32::try_from(rounded)
            .map_err(|_| Error::OutOfRange(format!("precision {rounded} too large")))?;
        Self::new(bits)
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    /// 2^B.
    pub fn modulus(&self) -> BigUint {
        &*self.mask + 1u32
    }

    /// `v mod 2^B`.
    pub fn wrap(&self, v: BigUint) -> BigUint {
        if v.bits() <= self.bits as u64 {
            v
        } else {
            v & &*self.mask
        }
    }

    /// `(pos - neg) mod 2^B`.
    pub fn wrap_signed(&self, pos: BigUint, neg: BigUint) -> BigUint {
        if pos >= neg {
            self.wrap(pos - neg)
        } else {
            let t = self.wrap(neg - pos);
            if t.is_zero() {
                t
            } else {
                self.modulus() - t
            }
        }
    }

    /// `v mod 2^B` for a signed integer.
    pub fn wrap_int(&self, v: &BigInt) -> BigUint {
        match v.sign() {
            Sign::Minus => self.wrap_signed(BigUint::zero(), v.magnitude().clone()),
            _ => self.wrap(v.magnitude().clone()),
        }
    }
}

impl PartialEq for Precision {
    fn eq(&self, other: &Self) -> bool {
        self.bits == other.bits
    }
}

impl Eq for Precision {}

impl fmt::Debug for Precision {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Precision({})", self.bits)
    }
}

/// A point of R^d/Z^d; coordinate `j` is `coords[j] / 2^B` with `0 <= coords[j] < 2^B`.
#[derive(Clone, PartialEq, Eq)]
pub struct TorusPoint {
    prec: Precision,
    coords: Vec<BigUint>,
}

impl TorusPoint {
    pub fn zero(dim: usize, prec: &Precision) -> Self {
        Self { prec: prec.clone(), coords: vec![BigUint::zero(); dim] }
    }

    /// Builds a point from raw numerators, reducing each mod 2^B.
    pub fn from_numerators(prec: &Precision, nums: Vec<BigUint>) -> Self {
        let coords = nums.into_iter().map(|c| prec.wrap(c)).collect();
        Self { prec: prec.clone(), coords }
    }

    /// Nearest grid point at or below each rational coordinate (mod 1).
    pub fn from_rationals(prec: &Precision, xs: &[BigRational]) -> Self {
        let scale = BigInt::from(prec.modulus());
        let coords = xs
            .iter()
            .map(|r| {
                let scaled = (r * BigRational::from_integer(scale.clone())).floor().to_integer();
                prec.wrap_int(&scaled)
            })
            .collect();
        Self { prec: prec.clone(), coords }
    }

    /// Convenience for tests and configs: coordinates given as `f64` (truncated to 2^-B grid).
    pub fn from_f64(prec: &Precision, xs: &[f64]) -> Result<Self> {
        let rs: Option<Vec<BigRational>> = xs.iter().map(|&v| BigRational::from_float(v)).collect();
        let rs = rs.ok_or_else(|| Error::OutOfRange("non-finite coordinate".into()))?;
        Ok(Self::from_rationals(prec, &rs))
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn precision(&self) -> &Precision {
        &self.prec
    }

    pub fn bits(&self) -> u32 {
        self.prec.bits
    }

    pub fn coords(&self) -> &[BigUint] {
        &self.coords
    }

    pub fn is_zero(&self) -> bool {
        self.coords.iter().all(|c| c.is_zero())
    }

    pub(crate) fn check_compatible(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        if self.prec != other.prec {
            return Err(Error::PrecisionMismatch { left: self.bits(), right: other.bits() });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| self.prec.wrap(a + b))
            .collect();
        Ok(Self { prec: self.prec.clone(), coords })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_compatible(other)?;
        let coords = self
            .coords
            .iter()
            .zip(&other.coords)
            .map(|(a, b)| self.prec.wrap_signed(a.clone(), b.clone()))
            .collect();
        Ok(Self { prec: self.prec.clone(), coords })
    }

    pub fn neg(&self) -> Self {
        let coords = self
            .coords
            .iter()
            .map(|c| self.prec.wrap_signed(BigUint::zero(), c.clone()))
            .collect();
        Self { prec: self.prec.clone(), coords }
    }

    /// Re-expresses the point with more fractional bits (exact).
    pub fn extend_precision(&self, prec: &Precision) -> Result<Self> {
        if prec.bits < self.prec.bits {
            return Err(Error::PrecisionMismatch { left: self.bits(), right: prec.bits });
        }
        let shift = prec.bits - self.prec.bits;
        let coords = self.coords.iter().map(|c| c << shift).collect();
        Ok(Self { prec: prec.clone(), coords })
    }

    /// Exact numerator of `m . x mod 1` on the 2^-B grid.
    pub fn phase(&self, freq: &[BigInt]) -> Result<BigUint> {
        if freq.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: freq.len() });
        }
        let mut pos = BigUint::zero();
        let mut neg = BigUint::zero();
        for (m, c) in freq.iter().zip(&self.coords) {
            if m.is_zero() || c.is_zero() {
                continue;
            }
            let mag = self.prec.wrap(m.magnitude().clone());
            match m.sign() {
                Sign::Minus => neg += c * mag,
                _ => pos += c * mag,
            }
        }
        Ok(self.prec.wrap_signed(pos, neg))
    }

    /// Numerator-on-grid to `f64` in `[0, 1]`, using the top 64 bits only.
    pub fn fraction_to_f64(&self, num: &BigUint) -> f64 {
        top_bits_to_f64(num, self.prec.bits)
    }

    pub fn coord_f64(&self, j: usize) -> f64 {
        top_bits_to_f64(&self.coords[j], self.prec.bits)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        (0..self.dim()).map(|j| self.coord_f64(j)).collect()
    }

    /// `rho(x, 0)` scaled by 2^B, i.e. `sum_j min(c_j, 2^B - c_j)`.
    pub fn norm_numerator(&self) -> BigUint {
        let modulus = self.prec.modulus();
        let half = &modulus >> 1u32;
        let mut acc = BigUint::zero();
        for c in &self.coords {
            if c <= &half {
                acc += c;
            } else {
                acc += &modulus - c;
            }
        }
        acc
    }

    /// `rho(x, 0)` exactly.
    pub fn norm(&self) -> BigRational {
        BigRational::new(self.norm_numerator().into(), self.prec.modulus().into())
    }

    /// `rho(x, 0)` in floating point.
    pub fn norm_f64(&self) -> f64 {
        let modulus = self.prec.modulus();
        let half = &modulus >> 1u32;
        self.coords
            .iter()
            .map(|c| {
                if c <= &half {
                    top_bits_to_f64(c, self.prec.bits)
                } else {
                    top_bits_to_f64(&(&modulus - c), self.prec.bits)
                }
            })
            .sum()
    }

    pub fn to_rational_point(&self) -> RationalPoint {
        RationalPoint { denom: self.prec.modulus(), nums: self.coords.clone() }
    }
}

impl fmt::Debug for TorusPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "TorusPoint[B={}]{:?}", self.prec.bits, self.to_f64())
    }
}

fn top_bits_to_f64(num: &BigUint, bits: u32) -> f64 {
    if bits <= 64 {
        return num.to_u64().unwrap_or(u64::MAX) as f64 / 2f64.powi(bits as i32);
    }
    let top = (num >> (bits - 64)).to_u64().unwrap_or(u64::MAX);
    top as f64 / 18446744073709551616.0
}

/// The invariant metric `rho(x, y) = sum_j min_h |t_j - s_j + h|`.
#[derive(Clone, Copy, Debug, Default)]
pub struct TorusMetric;

impl TorusMetric {
    pub fn distance(&self, x: &TorusPoint, y: &TorusPoint) -> Result<BigRational> {
        rho(x, y)
    }
}

/// Exact `rho(x, y)`.
pub fn rho(x: &TorusPoint, y: &TorusPoint) -> Result<BigRational> {
    Ok(x.sub(y)?.norm())
}

/// A point with rational coordinates `nums[j] / denom`, `0 <= nums[j] < denom`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RationalPoint {
    denom: BigUint,
    nums: Vec<BigUint>,
}

impl RationalPoint {
    pub fn new(nums: Vec<BigUint>, denom: BigUint) -> Result<Self> {
        if denom.is_zero() {
            return Err(Error::OutOfRange("zero denominator".into()));
        }
        let nums = nums.into_iter().map(|n| n % &denom).collect();
        Ok(Self { denom, nums })
    }

    pub fn zero(dim: usize) -> Self {
        Self { denom: BigUint::one(), nums: vec![BigUint::zero(); dim] }
    }

    pub fn from_rationals(xs: &[BigRational]) -> Self {
        let mut denom = BigInt::one();
        for x in xs {
            denom = denom.lcm(x.denom());
        }
        let d = BigRational::from_integer(denom.clone());
        let nums = xs
            .iter()
            .map(|x| {
                let n = (x * &d).to_integer().mod_floor(&denom);
                n.magnitude().clone()
            })
            .collect();
        Self { denom: denom.magnitude().clone(), nums }
    }

    pub fn dim(&self) -> usize {
        self.nums.len()
    }

    pub fn denom(&self) -> &BigUint {
        &self.denom
    }

    pub fn nums(&self) -> &[BigUint] {
        &self.nums
    }

    pub fn coords(&self) -> Vec<BigRational> {
        self.nums
            .iter()
            .map(|n| BigRational::new(n.clone().into(), self.denom.clone().into()))
            .collect()
    }

    pub fn is_zero(&self) -> bool {
        self.nums.iter().all(|n| n.is_zero())
    }

    /// Re-expresses the point over a multiple of its denominator.
    fn rescale(&self, denom: &BigUint) -> Vec<BigUint> {
        let f = denom / &self.denom;
        self.nums.iter().map(|n| n * &f).collect()
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: other.dim() });
        }
        let denom = self.denom.lcm(&other.denom);
        let a = self.rescale(&denom);
        let b = other.rescale(&denom);
        let nums = a.into_iter().zip(b).map(|(x, y)| (x + y) % &denom).collect();
        Ok(Self { denom, nums })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.neg())
    }

    pub fn neg(&self) -> Self {
        let nums = self
            .nums
            .iter()
            .map(|n| if n.is_zero() { n.clone() } else { &self.denom - n })
            .collect();
        Self { denom: self.denom.clone(), nums }
    }

    /// `rho(x, 0)` scaled by the denominator.
    pub fn norm_numerator(&self) -> BigUint {
        let mut acc = BigUint::zero();
        for n in &self.nums {
            let other = &self.denom - n;
            acc += if n <= &other { n.clone() } else { other };
        }
        acc
    }

    pub fn norm(&self) -> BigRational {
        BigRational::new(self.norm_numerator().into(), self.denom.clone().into())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.coords().iter().map(|c| c.to_f64().unwrap_or(f64::NAN)).collect()
    }

    /// Coordinates as reduced `"p/q"` strings.
    pub fn to_strings(&self) -> Vec<String> {
        self.coords().iter().map(rational_to_string).collect()
    }

    pub fn parse(coords: &[String]) -> Result<Self> {
        let rs: Result<Vec<BigRational>> = coords.iter().map(|s| parse_rational(s)).collect();
        let rs = rs?;
        for r in &rs {
            if r.is_negative() || r >= &BigRational::one() {
                return Err(Error::OutOfRange(format!("coordinate {r} outside [0, 1)")));
            }
        }
        Ok(Self::from_rationals(&rs))
    }
}

/// `"p/q"` (or `"p"` when integral).
pub fn rational_to_string(r: &BigRational) -> String {
    if r.denom().is_one() {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

/// Parses `"p/q"`, `"p"`, or a plain decimal such as `"0.05"` (exactly).
pub fn parse_rational(s: &str) -> Result<BigRational> {
    let s = s.trim();
    let bad = || Error::InvalidConfig(format!("cannot parse rational {s:?}"));
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().map_err(|_| bad())?;
        let q: BigInt = q.trim().parse().map_err(|_| bad())?;
        if q.is_zero() {
            return Err(bad());
        }
        return Ok(BigRational::new(p, q));
    }
    if let Some((int, frac)) = s.split_once('.') {
        let neg = int.starts_with('-');
        let int_part: BigInt = if int.is_empty() || int == "-" {
            BigInt::zero()
        } else {
            int.parse().map_err(|_| bad())?
        };
        if !frac.chars().all(|c| c.is_ascii_digit()) {
            return Err(bad());
        }
        let frac_num: BigInt = if frac.is_empty() { BigInt::zero() } else { frac.parse().map_err(|_| bad())? };
        let scale = num_traits::pow(BigInt::from(10), frac.len());
        let mut r = BigRational::from_integer(int_part.abs()) + BigRational::new(frac_num, scale);
        if neg {
            r = -r;
        }
        return Ok(r);
    }
    let p: BigInt = s.parse().map_err(|_| bad())?;
    Ok(BigRational::from_integer(p))
}
