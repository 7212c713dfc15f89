//! Integer matrices acting on the torus as `x -> A x mod Z^d`.

use std::fmt;

use num_bigint::{BigInt, BigUint, Sign};
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use crate::error::{Error, Result};
use crate::torus::{RationalPoint, TorusPoint};

/// A d x d integer matrix, stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct IntegerEndomorphism {
    dim: usize,
    entries: Vec<BigInt>,
}

impl IntegerEndomorphism {
    pub fn from_rows(rows: Vec<Vec<BigInt>>) -> Result<Self> {
        let dim = rows.len();
        if dim == 0 {
            return Err(Error::UnsupportedDim(0));
        }
        let mut entries = Vec::with_capacity(dim * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            entries.extend(row);
        }
        Ok(Self { dim, entries })
    }

    /// Small-integer constructor, mostly for tests and built-in rules.
    pub fn from_i64(rows: &[&[i64]]) -> Result<Self> {
        Self::from_rows(rows.iter().map(|r| r.iter().map(|&v| BigInt::from(v)).collect()).collect())
    }

    pub fn identity(dim: usize) -> Self {
        let mut entries = vec![BigInt::zero(); dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = BigInt::one();
        }
        Self { dim, entries }
    }

    pub fn scalar(dim: usize, c: BigInt) -> Self {
        let mut m = Self::identity(dim);
        for i in 0..dim {
            m.entries[i * dim + i] = c.clone();
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.entries[i * self.dim + j]
    }

    pub fn rows(&self) -> Vec<Vec<BigInt>> {
        self.entries.chunks(self.dim).map(|r| r.to_vec()).collect()
    }

    fn check_dim(&self, other: usize) -> Result<()> {
        if self.dim != other {
            return Err(Error::DimensionMismatch { expected: self.dim, got: other });
        }
        Ok(())
    }

    /// Matrix product `self * other` (apply `other` first).
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim)?;
        let d = self.dim;
        let mut entries = vec![BigInt::zero(); d * d];
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..d {
                    let b = other.get(k, j);
                    if !b.is_zero() {
                        entries[i * d + j] += a * b;
                    }
                }
            }
        }
        Ok(Self { dim: d, entries })
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other.dim)?;
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a - b).collect();
        Ok(Self { dim: self.dim, entries })
    }

    pub fn transpose(&self) -> Self {
        let d = self.dim;
        let mut entries = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                entries.push(self.get(j, i).clone());
            }
        }
        Self { dim: d, entries }
    }

    pub fn commutes_with(&self, other: &Self) -> Result<bool> {
        Ok(self.mul(other)? == other.mul(self)?)
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.dim)
    }

    /// Induced l1 operator norm `max_j sum_i |a_ij|`; the Lipschitz constant for `rho`.
    pub fn col_norm(&self) -> BigInt {
        (0..self.dim)
            .map(|j| (0..self.dim).map(|i| self.get(i, j).abs()).sum::<BigInt>())
            .max()
            .unwrap_or_default()
    }

    /// Bits an orbit consumes per application: `ceil(log2 ||A||_col)`.
    pub fn expansion_bits(&self) -> u64 {
        let n = self.col_norm();
        if n <= BigInt::one() {
            0
        } else {
            (n - 1u32).bits()
        }
    }

    /// Exact determinant by fraction-free (Bareiss) elimination.
    pub fn det(&self) -> BigInt {
        let d = self.dim;
        let mut m: Vec<BigInt> = self.entries.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..d {
            if m[k * d + k].is_zero() {
                let Some(p) = (k + 1..d).find(|&r| !m[r * d + k].is_zero()) else {
                    return BigInt::zero();
                };
                for j in 0..d {
                    m.swap(k * d + j, p * d + j);
                }
                sign = -sign;
            }
            for i in k + 1..d {
                for j in k + 1..d {
                    let v = &m[i * d + j] * &m[k * d + k] - &m[i * d + k] * &m[k * d + j];
                    m[i * d + j] = v / &prev;
                }
                m[i * d + k] = BigInt::zero();
            }
            prev = m[k * d + k].clone();
        }
        sign * &m[d * d - 1]
    }

    /// Exact inverse over the rationals (Gauss-Jordan).
    pub fn inverse(&self) -> Result<Vec<Vec<BigRational>>> {
        let d = self.dim;
        let mut a: Vec<Vec<BigRational>> = (0..d)
            .map(|i| {
                let mut row: Vec<BigRational> =
                    (0..d).map(|j| BigRational::from_integer(self.get(i, j).clone())).collect();
                row.extend((0..d).map(|j| if i == j { BigRational::one() } else { BigRational::zero() }));
                row
            })
            .collect();
        for c in 0..d {
            let p = (c..d).find(|&r| !a[r][c].is_zero()).ok_or(Error::Singular)?;
            a.swap(c, p);
            let piv = a[c][c].clone();
            for v in a[c].iter_mut() {
                *v = &*v / &piv;
            }
            for r in 0..d {
                if r != c && !a[r][c].is_zero() {
                    let f = a[r][c].clone();
                    for j in 0..2 * d {
                        let t = &f * &a[c][j];
                        a[r][j] -= t;
                    }
                }
            }
        }
        Ok(a.into_iter().map(|row| row[d..].to_vec()).collect())
    }

    /// Exact inverse converted to `f64`.
    pub fn inverse_f64(&self) -> Result<Vec<Vec<f64>>> {
        Ok(self
            .inverse()?
            .into_iter()
            .map(|row| row.iter().map(|v| v.to_f64().unwrap_or(f64::NAN)).collect())
            .collect())
    }

    /// `x -> A x mod Z^d`, exact on the 2^-B grid.
    pub fn apply(&self, x: &TorusPoint) -> Result<TorusPoint> {
        self.check_dim(x.dim())?;
        let prec = x.precision();
        let coords = x.coords();
        if self.dim == 1 {
            if let Some(q) = self.entries[0].to_u64() {
                return Ok(TorusPoint::from_numerators(prec, vec![&coords[0] * q]));
            }
        }
        let mut out = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut pos = BigUint::zero();
            let mut neg = BigUint::zero();
            for (j, c) in coords.iter().enumerate() {
                let a = self.get(i, j);
                if a.is_zero() || c.is_zero() {
                    continue;
                }
                let mag = prec.wrap(a.magnitude().clone());
                match a.sign() {
                    Sign::Minus => neg += c * mag,
                    _ => pos += c * mag,
                }
            }
            out.push(prec.wrap_signed(pos, neg));
        }
        Ok(TorusPoint::from_numerators(prec, out))
    }

    /// `x -> A x mod Z^d` on a rational point, exact.
    pub fn apply_rational(&self, x: &RationalPoint) -> Result<RationalPoint> {
        self.check_dim(x.dim())?;
        let denom = x.denom();
        let mut out = Vec::with_capacity(self.dim);
        for i in 0..self.dim {
            let mut pos = BigUint::zero();
            let mut neg = BigUint::zero();
            for (j, n) in x.nums().iter().enumerate() {
                let a = self.get(i, j);
                if a.is_zero() || n.is_zero() {
                    continue;
                }
                let mag = a.magnitude() % denom;
                match a.sign() {
                    Sign::Minus => neg += n * mag,
                    _ => pos += n * mag,
                }
            }
            let pos = pos % denom;
            let neg = neg % denom;
            let v = if pos >= neg { pos - neg } else { denom - (neg - pos) };
            out.push(v);
        }
        RationalPoint::new(out, denom.clone())
    }

    /// `A^T m`, the frequency of `gamma_m o A`.
    pub fn pullback_frequency(&self, freq: &[BigInt]) -> Result<Vec<BigInt>> {
        self.check_dim(freq.len())?;
        Ok((0..self.dim)
            .map(|j| (0..self.dim).map(|i| self.get(i, j) * &freq[i]).sum())
            .collect())
    }
}

impl fmt::Debug for IntegerEndomorphism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let rows: Vec<Vec<String>> =
            self.rows().iter().map(|r| r.iter().map(|v| v.to_string()).collect()).collect();
        write!(f, "{rows:?}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::torus::{parse_rational, Precision};

    fn m(rows: &[&[i64]]) -> IntegerEndomorphism {
        IntegerEndomorphism::from_i64(rows).unwrap()
    }

    fn pt(prec: &Precision, xs: &[&str]) -> TorusPoint {
        let rs: Vec<_> = xs.iter().map(|s| parse_rational(s).unwrap()).collect();
        TorusPoint::from_rationals(prec, &rs)
    }

    #[test]
    fn doubling_map() {
        let prec = Precision::new(64).unwrap();
        let y = m(&[&[2]]).apply(&pt(&prec, &["3/4"])).unwrap();
        assert_eq!(y, pt(&prec, &["1/2"]));
    }

    #[test]
    fn cat_map_on_half_point() {
        let prec = Precision::new(64).unwrap();
        let y = m(&[&[2, 1], &[1, 1]]).apply(&pt(&prec, &["1/2", "1/2"])).unwrap();
        assert_eq!(y, pt(&prec, &["1/2", "0"]));
    }

    #[test]
    fn identity_fixes_points() {
        let prec = Precision::new(128).unwrap();
        let x = pt(&prec, &["1/3", "5/7", "2/9"]);
        assert_eq!(IntegerEndomorphism::identity(3).apply(&x).unwrap(), x);
    }

    #[test]
    fn negative_entries_wrap() {
        let prec = Precision::new(64).unwrap();
        let y = m(&[&[-1]]).apply(&pt(&prec, &["1/4"])).unwrap();
        assert_eq!(y, pt(&prec, &["3/4"]));
    }

    #[test]
    fn determinants() {
        assert_eq!(m(&[&[2, 1], &[1, 1]]).det(), BigInt::from(1));
        assert_eq!(m(&[&[0, 1], &[1, 0]]).det(), BigInt::from(-1));
        assert_eq!(m(&[&[1, 2, 3], &[4, 5, 6], &[7, 8, 10]]).det(), BigInt::from(-3));
        assert_eq!(m(&[&[1, 2], &[2, 4]]).det(), BigInt::zero());
        assert_eq!(m(&[&[0, 0, 1], &[0, 1, 0], &[1, 0, 0]]).det(), BigInt::from(-1));
    }

    #[test]
    fn inverse_roundtrip() {
        let a = m(&[&[2, 1], &[1, 3]]);
        let inv = a.inverse().unwrap();
        assert_eq!(inv[0][0], parse_rational("3/5").unwrap());
        assert_eq!(inv[0][1], parse_rational("-1/5").unwrap());
        assert!(m(&[&[1, 2], &[2, 4]]).inverse().is_err());
    }

    #[test]
    fn col_norm_and_bits() {
        let a = m(&[&[2, -1], &[3, 1]]);
        assert_eq!(a.col_norm(), BigInt::from(5));
        assert_eq!(a.expansion_bits(), 3);
        assert_eq!(m(&[&[2]]).expansion_bits(), 1);
        assert_eq!(IntegerEndomorphism::identity(2).expansion_bits(), 0);
    }

    #[test]
    fn rational_apply_matches_fixed_point_on_dyadics() {
        let prec = Precision::new(64).unwrap();
        let a = m(&[&[3, -2], &[5, 7]]);
        let x = pt(&prec, &["3/16", "9/32"]);
        let fx = a.apply(&x).unwrap().to_rational_point();
        let rx = a.apply_rational(&x.to_rational_point()).unwrap();
        assert_eq!(fx.coords(), rx.coords());
    }
}
