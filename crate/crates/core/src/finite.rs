//! Finite abelian groups Z/q_1 + ... + Z/q_m and their endomorphisms.

use std::collections::HashSet;
use std::fmt;

use num_integer::Integer;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FiniteAbelianGroup {
    orders: Vec<u64>,
}

/// Endomorphism given by the images of the standard generators.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct FiniteEndo {
    /// `images[j]` is the image of the j-th generator.
    images: Vec<Vec<u64>>,
}

impl FiniteAbelianGroup {
    pub fn new(orders: Vec<u64>) -> Result<Self> {
        if orders.is_empty() || orders.iter().any(|&q| q < 2) {
            return Err(Error::InvalidConfig(format!(
                "cyclic orders must be >= 2, got {orders:?}"
            )));
        }
        Ok(Self { orders })
    }

    /// Parses `Z2`, `Z2xZ3`, `Z/2+Z/2` and similar.
    pub fn parse(s: &str) -> Result<Self> {
        let orders: Option<Vec<u64>> = s
            .split(['x', '+', '*', ','])
            .map(|part| {
                let t = part.trim().trim_start_matches(['Z', 'z']).trim_start_matches('/');
                t.parse::<u64>().ok()
            })
            .collect();
        Self::new(orders.ok_or_else(|| Error::InvalidConfig(format!("bad group {s:?}")))?)
    }

    pub fn orders(&self) -> &[u64] {
        &self.orders
    }

    pub fn rank(&self) -> usize {
        self.orders.len()
    }

    pub fn order(&self) -> u64 {
        self.orders.iter().product()
    }

    pub fn zero(&self) -> Vec<u64> {
        vec![0; self.rank()]
    }

    pub fn elements(&self) -> Vec<Vec<u64>> {
        let mut out = vec![self.zero()];
        for (i, &q) in self.orders.iter().enumerate() {
            let mut next = Vec::with_capacity(out.len() * q as usize);
            for e in &out {
                for v in 0..q {
                    let mut e = e.clone();
                    e[i] = v;
                    next.push(e);
                }
            }
            out = next;
        }
        out
    }

    pub fn add(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).zip(&self.orders).map(|((x, y), q)| (x + y) % q).collect()
    }

    pub fn sub(&self, a: &[u64], b: &[u64]) -> Vec<u64> {
        a.iter().zip(b).zip(&self.orders).map(|((x, y), q)| (x + q - y) % q).collect()
    }

    pub fn scale(&self, c: u64, a: &[u64]) -> Vec<u64> {
        a.iter().zip(&self.orders).map(|(x, q)| ((c as u128 * *x as u128) % *q as u128) as u64).collect()
    }

    /// `|End(A)| = prod_{i,j} gcd(q_i, q_j)`.
    pub fn endomorphism_count(&self) -> u128 {
        let mut n: u128 = 1;
        for &a in &self.orders {
            for &b in &self.orders {
                n = n.saturating_mul(a.gcd(&b) as u128);
            }
        }
        n
    }

    /// All endomorphisms, enumerated over admissible generator images.
    pub fn endomorphisms(&self, cap: u128) -> Result<Vec<FiniteEndo>> {
        let count = self.endomorphism_count();
        if count > cap {
            return Err(Error::SearchBudget(format!("|End(A)| = {count} exceeds cap {cap}")));
        }
        let elements = self.elements();
        // Image of generator j must be killed by q_j.
        let candidates: Vec<Vec<Vec<u64>>> = self
            .orders
            .iter()
            .map(|&qj| {
                elements.iter().filter(|e| self.scale(qj, e) == self.zero()).cloned().collect()
            })
            .collect();
        let mut out: Vec<Vec<Vec<u64>>> = vec![Vec::new()];
        for cands in &candidates {
            let mut next = Vec::with_capacity(out.len() * cands.len());
            for partial in &out {
                for c in cands {
                    let mut p = partial.clone();
                    p.push(c.clone());
                    next.push(p);
                }
            }
            out = next;
        }
        Ok(out.into_iter().map(|images| FiniteEndo { images }).collect())
    }

    pub fn identity(&self) -> FiniteEndo {
        let images = (0..self.rank())
            .map(|j| {
                let mut e = self.zero();
                e[j] = 1;
                e
            })
            .collect();
        FiniteEndo { images }
    }

    pub fn apply(&self, t: &FiniteEndo, x: &[u64]) -> Vec<u64> {
        let mut acc = self.zero();
        for (c, img) in x.iter().zip(&t.images) {
            if *c != 0 {
                acc = self.add(&acc, &self.scale(*c, img));
            }
        }
        acc
    }

    /// `s o t`.
    pub fn compose(&self, s: &FiniteEndo, t: &FiniteEndo) -> FiniteEndo {
        FiniteEndo { images: t.images.iter().map(|img| self.apply(s, img)).collect() }
    }

    pub fn difference(&self, s: &FiniteEndo, t: &FiniteEndo) -> FiniteEndo {
        FiniteEndo {
            images: s.images.iter().zip(&t.images).map(|(a, b)| self.sub(a, b)).collect(),
        }
    }

    /// Surjectivity by enumerating the image.
    pub fn is_surjective(&self, t: &FiniteEndo) -> bool {
        let image: HashSet<Vec<u64>> = self.elements().iter().map(|x| self.apply(t, x)).collect();
        image.len() as u64 == self.order()
    }
}

impl FiniteEndo {
    pub fn images(&self) -> &[Vec<u64>] {
        &self.images
    }
}

impl fmt::Debug for FiniteEndo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}", self.images)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_count() {
        let g = FiniteAbelianGroup::parse("Z2xZ2").unwrap();
        assert_eq!(g.order(), 4);
        assert_eq!(g.endomorphism_count(), 16);
        assert_eq!(g.endomorphisms(1 << 20).unwrap().len(), 16);
        let g = FiniteAbelianGroup::parse("Z2xZ3").unwrap();
        assert_eq!(g.endomorphism_count(), 6);
        assert_eq!(g.endomorphisms(1 << 20).unwrap().len(), 6);
        assert_eq!(FiniteAbelianGroup::parse("Z3").unwrap().endomorphism_count(), 3);
        assert!(FiniteAbelianGroup::parse("Z1").is_err());
        assert!(FiniteAbelianGroup::parse("Q").is_err());
    }

    #[test]
    fn endomorphisms_are_homomorphisms() {
        let g = FiniteAbelianGroup::parse("Z2xZ4").unwrap();
        let els = g.elements();
        for t in g.endomorphisms(1 << 20).unwrap() {
            for a in &els {
                for b in &els {
                    assert_eq!(g.apply(&t, &g.add(a, b)), g.add(&g.apply(&t, a), &g.apply(&t, b)));
                }
            }
        }
    }

    #[test]
    fn surjectivity() {
        let g = FiniteAbelianGroup::parse("Z6").unwrap();
        let ends = g.endomorphisms(100).unwrap();
        let surj: Vec<u64> =
            ends.iter().filter(|t| g.is_surjective(t)).map(|t| t.images()[0][0]).collect();
        assert_eq!(surj, vec![1, 5]);
        assert!(g.is_surjective(&g.identity()));
    }

    #[test]
    fn cap_is_enforced() {
        let g = FiniteAbelianGroup::parse("Z4xZ4xZ4").unwrap();
        assert!(matches!(g.endomorphisms(1000), Err(Error::SearchBudget(_))));
    }
}
