//! Haar sampling on the torus and uniform sampling of small rho-balls.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Signed};
use rand::RngCore;

use crate::error::{Error, Result};
use crate::rng::{random_below, random_bits};
use crate::torus::{Precision, TorusPoint};

/// Largest supported dimension for ball sampling (acceptance rate is 1/d!).
pub const MAX_BALL_DIM: usize = 8;

/// Minimum number of grid steps per unit radius for a ball to be sampled.
pub const MIN_OFFSET_BITS: u64 = 16;

/// Haar-uniform point on the 2^-B grid of the d-torus.
pub fn haar_sample<R: RngCore + ?Sized>(rng: &mut R, dim: usize, prec: &Precision) -> TorusPoint {
    let coords = (0..dim).map(|_| random_bits(rng, prec.bits() as u64)).collect();
    TorusPoint::from_numerators(prec, coords)
}

/// Uniform offset `u` with `rho(0, u) < r`, by rejection from the bounding box
/// (from the whole torus once `r > 1/2`).
pub fn ball_offset_sample<R: RngCore + ?Sized>(
    rng: &mut R,
    dim: usize,
    radius: &BigRational,
    prec: &Precision,
) -> Result<TorusPoint> {
    ball_offset_sample_counted(rng, dim, radius, prec).map(|(u, _)| u)
}

/// As [`ball_offset_sample`], also returning the number of box draws used.
pub fn ball_offset_sample_counted<R: RngCore + ?Sized>(
    rng: &mut R,
    dim: usize,
    radius: &BigRational,
    prec: &Precision,
) -> Result<(TorusPoint, u64)> {
    if dim == 0 || dim > MAX_BALL_DIM {
        return Err(Error::UnsupportedDim(dim));
    }
    if !radius.is_positive() {
        return Err(Error::OutOfRange(format!("ball radius {radius} must be positive")));
    }
    let scale = BigInt::from(prec.modulus());
    if radius > &BigRational::new(BigInt::one(), BigInt::from(2)) {
        // the ball wraps around: reject from Haar with the exact torus norm
        let limit = radius.numer() * &scale;
        let mut attempts = 0u64;
        loop {
            attempts += 1;
            let u = haar_sample(rng, dim, prec);
            if BigInt::from(u.norm_numerator()) * radius.denom() < limit {
                return Ok((u, attempts));
            }
        }
    }
    // rho(0, u) < r  <=>  sum |s_j| * den < num * 2^B
    let limit = radius.numer() * &scale;
    let den = radius.denom().clone();
    let reach: BigInt = (BigRational::from_integer(scale) * radius).ceil().to_integer() - BigInt::one();
    if reach.bits() < MIN_OFFSET_BITS {
        return Err(Error::DegenerateRadius { radius: radius.to_string(), bits: prec.bits() });
    }
    let reach = reach.magnitude().clone();
    let width: BigUint = &reach * 2u32 + 1u32;
    let mut attempts = 0u64;
    loop {
        attempts += 1;
        let s: Vec<BigInt> = (0..dim)
            .map(|_| BigInt::from(random_below(rng, &width)) - BigInt::from(reach.clone()))
            .collect();
        let l1: BigInt = s.iter().map(|v| v.abs()).sum();
        if l1 * &den < limit {
            let coords = s.iter().map(|v| prec.wrap_int(v)).collect();
            return Ok((TorusPoint::from_numerators(prec, coords), attempts));
        }
    }
}

/// Haar measure of `B(0, r)`: `(2r)^d / d!` for `0 < r <= 1/2`.
pub fn ball_volume(dim: usize, radius: &BigRational) -> Result<BigRational> {
    if dim == 0 {
        return Err(Error::UnsupportedDim(0));
    }
    if !radius.is_positive() || radius > &BigRational::new(BigInt::one(), BigInt::from(2)) {
        return Err(Error::OutOfRange(format!("ball radius {radius} outside (0, 1/2]")));
    }
    let two_r = radius * BigRational::from_integer(BigInt::from(2));
    Ok(num_traits::pow(two_r, dim) / BigRational::from_integer(factorial(dim)))
}

pub(crate) fn factorial(n: usize) -> BigInt {
    (1..=n).fold(BigInt::one(), |acc, k| acc * BigInt::from(k))
}

/// Signed offset coordinates of a small torus point (representatives in `(-1/2, 1/2]`).
pub fn signed_coords(u: &TorusPoint) -> Vec<BigInt> {
    let modulus = u.precision().modulus();
    let half = &modulus >> 1u32;
    u.coords()
        .iter()
        .map(|c| {
            if c <= &half {
                BigInt::from(c.clone())
            } else {
                -BigInt::from(&modulus - c)
            }
        })
        .collect()
}
