//! Generator sequences and the cached cumulative products `Phi_n = T_n ... T_1`.

mod dp;
mod finite_dp;
mod rule;

pub use dp::{
    difference_property_check, surjectivity_fastpaths, DpPair, DpReport, FastpathReport,
};
pub use finite_dp::{finite_dp_refute, FiniteRefutation, END_CAP};
pub use rule::{GeneratorRule, IntLit, MultiplierDoc, Multipliers, RuleDocument, RuleKind};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;

use crate::error::{Error, Result};
use crate::matrix::IntegerEndomorphism;
use crate::torus::{Precision, TorusPoint};

/// Bits kept beyond the orbit's expansion budget.
pub const GUARD_BITS: u64 = 64;

/// Lazily extended generator and product data for one rule.
///
/// Extension needs `&mut self`; once a prefix is materialized the slices
/// returned by [`ProcessCache::generators`] and [`ProcessCache::phis`] can be
/// shared freely across threads.
#[derive(Clone, Debug)]
pub struct ProcessCache {
    rule: GeneratorRule,
    gens: Vec<IntegerEndomorphism>,
    lips: Vec<BigInt>,
    gen_dets: Vec<BigInt>,
    expansion: Vec<u64>,
    phis: Vec<IntegerEndomorphism>,
    dets: Vec<BigInt>,
}

impl ProcessCache {
    pub fn new(rule: GeneratorRule) -> Self {
        let dim = rule.dim();
        Self {
            rule,
            gens: Vec::new(),
            lips: Vec::new(),
            gen_dets: Vec::new(),
            expansion: Vec::new(),
            phis: vec![IntegerEndomorphism::identity(dim)],
            dets: vec![BigInt::one()],
        }
    }

    pub fn rule(&self) -> &GeneratorRule {
        &self.rule
    }

    pub fn dim(&self) -> usize {
        self.rule.dim()
    }

    /// Materializes `T_1..T_n`.
    pub fn extend_generators(&mut self, n: usize) -> Result<()> {
        while self.gens.len() < n {
            let t = self.rule.generator(self.gens.len() + 1)?;
            self.lips.push(t.col_norm());
            self.gen_dets.push(t.det());
            self.expansion.push(t.expansion_bits());
            self.gens.push(t);
        }
        Ok(())
    }

    /// Materializes `Phi_0..Phi_n`, checking `det Phi_n = det T_n det Phi_{n-1}`.
    pub fn extend_phis(&mut self, n: usize) -> Result<()> {
        self.extend_generators(n)?;
        while self.phis.len() <= n {
            let k = self.phis.len();
            let t = &self.gens[k - 1];
            let phi = t.mul(&self.phis[k - 1])?;
            let det = &self.gen_dets[k - 1] * &self.dets[k - 1];
            if phi.dim() > 1 && phi.det() != det {
                return Err(Error::InvalidConfig(format!(
                    "determinant multiplicativity failed at n = {k}"
                )));
            }
            self.phis.push(phi);
            self.dets.push(det);
        }
        Ok(())
    }

    /// `T_n`, `n >= 1`.
    pub fn generator(&mut self, n: usize) -> Result<&IntegerEndomorphism> {
        if n == 0 {
            return Err(Error::OutOfRange("generators are indexed from 1".into()));
        }
        self.extend_generators(n)?;
        Ok(&self.gens[n - 1])
    }

    /// `Phi_n`, memoized; `Phi_0` is the identity.
    pub fn phi(&mut self, n: usize) -> Result<&IntegerEndomorphism> {
        self.extend_phis(n)?;
        Ok(&self.phis[n])
    }

    /// `det Phi_n`.
    pub fn det_phi(&mut self, n: usize) -> Result<&BigInt> {
        self.extend_phis(n)?;
        Ok(&self.dets[n])
    }

    /// Materialized generators; `generators()[i]` is `T_{i+1}`.
    pub fn generators(&self) -> &[IntegerEndomorphism] {
        &self.gens
    }

    /// Materialized products; `phis()[n]` is `Phi_n`.
    pub fn phis(&self) -> &[IntegerEndomorphism] {
        &self.phis
    }

    pub fn generator_dets(&self) -> &[BigInt] {
        &self.gen_dets
    }

    /// `||T_n||_col` for the materialized prefix.
    pub fn lipschitz(&self) -> &[BigInt] {
        &self.lips
    }

    /// `tau(s, t) = T_s ... T_{t+1}` for `s >= t`; `tau(t, t) = I`.
    pub fn tau(&mut self, s: usize, t: usize) -> Result<IntegerEndomorphism> {
        if s < t {
            return Err(Error::OutOfRange(format!("tau({s}, {t}) needs s >= t")));
        }
        self.extend_generators(s)?;
        let mut acc = IntegerEndomorphism::identity(self.dim());
        for n in t + 1..=s {
            acc = self.gens[n - 1].mul(&acc)?;
        }
        Ok(acc)
    }

    /// `L~_k = max{1, L_1, ..., L_{k-1}}`.
    pub fn ltilde(&mut self, k: usize) -> Result<BigInt> {
        if k == 0 {
            return Err(Error::OutOfRange("k must be >= 1".into()));
        }
        self.extend_generators(k - 1)?;
        Ok(self.lips[..k - 1].iter().cloned().fold(BigInt::one(), |a, b| a.max(b)))
    }

    /// Bits an orbit of length `k` consumes: `sum_{n <= k} ceil(log2 ||T_n||_col)`.
    pub fn horizon_bits(&mut self, k: usize) -> Result<u64> {
        self.extend_generators(k)?;
        Ok(self.expansion[..k].iter().sum())
    }

    /// Fractional bits required to follow orbits through horizon `k`.
    pub fn required_bits(&mut self, k: usize) -> Result<u64> {
        Ok(self.horizon_bits(k)? + GUARD_BITS)
    }

    /// Default precision for horizon `k` (rounded up to whole limbs).
    pub fn precision_for(&mut self, k: usize) -> Result<Precision> {
        Precision::at_least(self.required_bits(k)?)
    }

    /// Fails with `PrecisionExhausted` when `bits` cannot carry an orbit of length `k`.
    pub fn check_precision(&mut self, k: usize, bits: u32) -> Result<()> {
        let required = self.required_bits(k)?;
        if required > bits as u64 {
            return Err(Error::PrecisionExhausted { required, available: bits as u64 });
        }
        Ok(())
    }

    /// Orbit `Phi_0 x, Phi_1 x, ...` of length `k`; generators must be materialized to `k - 1`.
    pub fn orbit<'a>(&'a self, x: &TorusPoint, k: usize) -> Result<Orbit<'a>> {
        if x.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: x.dim() });
        }
        if k > 0 && self.gens.len() < k - 1 {
            return Err(Error::OutOfRange(format!(
                "orbit of length {k} needs {} generators, {} materialized",
                k - 1,
                self.gens.len()
            )));
        }
        Ok(Orbit { gens: &self.gens, current: Some(x.clone()), index: 0, len: k })
    }
}

/// Radius schedule `eta_k = L~_k^{-(k-1)} / k`, exact.
pub fn eta_schedule(cache: &mut ProcessCache, k: usize) -> Result<BigRational> {
    let lt = cache.ltilde(k)?;
    let den = num_traits::pow(lt, k - 1) * BigInt::from(k);
    Ok(BigRational::new(BigInt::one(), den))
}

/// Iterator over `Phi_i x` built by applying one generator per step.
pub struct Orbit<'a> {
    gens: &'a [IntegerEndomorphism],
    current: Option<TorusPoint>,
    index: usize,
    len: usize,
}

impl Iterator for Orbit<'_> {
    type Item = TorusPoint;

    fn next(&mut self) -> Option<TorusPoint> {
        if self.index >= self.len {
            return None;
        }
        let cur = self.current.take()?;
        if self.index + 1 < self.len {
            let next = self.gens[self.index].apply(&cur).expect("dimension checked at construction");
            self.current = Some(next);
        }
        self.index += 1;
        Some(cur)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let rest = self.len - self.index;
        (rest, Some(rest))
    }
}
