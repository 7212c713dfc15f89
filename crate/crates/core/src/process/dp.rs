//! Difference Property checks for toral rules.

use num_bigint::BigInt;
use num_traits::{One, Zero};
use serde::Serialize;

use super::ProcessCache;
use crate::error::{Error, Result};
use crate::matrix::IntegerEndomorphism;
use crate::par;

#[derive(Clone, Debug, Serialize)]
pub struct DpPair {
    pub n: usize,
    pub m: usize,
    /// `det(Phi_n - Phi_m)` as a decimal string.
    pub det: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct DpReport {
    /// DP certified up to `horizon` only.
    pub horizon: usize,
    pub ok: bool,
    pub failing_pair: Option<(usize, usize)>,
    pub dets: Vec<DpPair>,
    /// For one-dimensional multiplier rules: every determinant equals
    /// `Q_m (Q_n / Q_m - 1)` computed from the multipliers directly.
    pub closed_form_verified: Option<bool>,
}

/// Checks `det(Phi_n - Phi_m) != 0` for all `0 < m < n <= horizon`.
pub fn difference_property_check(cache: &mut ProcessCache, horizon: usize) -> Result<DpReport> {
    if horizon < 2 {
        return Err(Error::OutOfRange("DP check needs horizon >= 2".into()));
    }
    cache.extend_phis(horizon)?;
    let pairs: Vec<(usize, usize)> =
        (2..=horizon).flat_map(|n| (1..n).map(move |m| (n, m))).collect();
    let phis = cache.phis();
    let dets: Vec<BigInt> = par::try_map_range(pairs.len(), |i| {
        let (n, m) = pairs[i];
        Ok::<_, Error>(phis[n].sub(&phis[m])?.det())
    })?;
    let failing_pair = pairs.iter().zip(&dets).find(|(_, d)| d.is_zero()).map(|(p, _)| *p);

    let closed_form_verified = if cache.rule().is_multiplier_rule() {
        // Q_n / Q_m = q_{m+1} ... q_n, taken from the rule rather than from Phi.
        let rule = cache.rule();
        let q: Vec<BigInt> = (1..=horizon).map(|n| rule.multiplier(n).unwrap()).collect();
        let prefix: Vec<BigInt> = std::iter::once(BigInt::one())
            .chain(q.iter().scan(BigInt::one(), |acc, v| {
                *acc *= v;
                Some(acc.clone())
            }))
            .collect();
        Some(pairs.iter().zip(&dets).all(|(&(n, m), d)| {
            let ratio: BigInt = q[m..n].iter().product();
            *d == &prefix[m] * (ratio - 1u32)
        }))
    } else {
        None
    };

    Ok(DpReport {
        horizon,
        ok: failing_pair.is_none(),
        failing_pair,
        dets: pairs
            .iter()
            .zip(&dets)
            .map(|(&(n, m), d)| DpPair { n, m, det: d.to_string() })
            .collect(),
        closed_form_verified,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct FastpathReport {
    pub horizon: usize,
    /// `det T_n` for `n = 1..=horizon`.
    pub generator_dets: Vec<String>,
    pub all_generators_invertible: bool,
    pub first_singular: Option<usize>,
    /// `det(Phi_{n+1} - Phi_n) = det(T_{n+1} - I) prod_{i <= n} det T_i` for `0 <= n < horizon`.
    pub lie_factorization_holds: bool,
    /// Pairwise commutation of `T_1..T_horizon`.
    pub commuting: bool,
    /// The commuting-family fast path: `Some` only when the generators commute.
    pub commuting_factorization_holds: Option<bool>,
}

/// Surjectivity fast paths: invertible generators and the determinant factorization.
pub fn surjectivity_fastpaths(cache: &mut ProcessCache, horizon: usize) -> Result<FastpathReport> {
    if horizon < 1 {
        return Err(Error::OutOfRange("horizon must be >= 1".into()));
    }
    cache.extend_phis(horizon)?;
    let gens = &cache.generators()[..horizon];
    let gdets = &cache.generator_dets()[..horizon];
    let phis = cache.phis();
    let first_singular = gdets.iter().position(|d| d.is_zero()).map(|i| i + 1);
    let id = IntegerEndomorphism::identity(cache.dim());

    let mut prefix = BigInt::one();
    let mut factorization = true;
    for n in 0..horizon {
        let lhs = phis[n + 1].sub(&phis[n])?.det();
        let rhs = gens[n].sub(&id)?.det() * &prefix;
        factorization &= lhs == rhs;
        prefix *= &gdets[n];
    }

    let mut commuting = true;
    'outer: for i in 0..horizon {
        for j in i + 1..horizon {
            if gens[i] != gens[j] && !gens[i].commutes_with(&gens[j])? {
                commuting = false;
                break 'outer;
            }
        }
    }

    Ok(FastpathReport {
        horizon,
        generator_dets: gdets.iter().map(|d| d.to_string()).collect(),
        all_generators_invertible: first_singular.is_none(),
        first_singular,
        lie_factorization_holds: factorization,
        commuting,
        commuting_factorization_holds: commuting.then_some(factorization),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::GeneratorRule;

    fn m(rows: &[&[i64]]) -> IntegerEndomorphism {
        IntegerEndomorphism::from_i64(rows).unwrap()
    }

    #[test]
    fn cantor_rule_has_dp() {
        let mut c = ProcessCache::new(GeneratorRule::cantor_progression(2, 1).unwrap());
        let r = difference_property_check(&mut c, 20).unwrap();
        assert!(r.ok);
        assert_eq!(r.dets.len(), 190);
        assert_eq!(r.closed_form_verified, Some(true));
    }

    #[test]
    fn identity_fails_at_first_pair() {
        let mut c = ProcessCache::new(GeneratorRule::identity(1));
        let r = difference_property_check(&mut c, 2).unwrap();
        assert!(!r.ok);
        assert_eq!(r.failing_pair, Some((2, 1)));
        assert_eq!(r.dets[0].det, "0");
    }

    #[test]
    fn doubling_closed_form() {
        let mut c = ProcessCache::new(GeneratorRule::doubling());
        let r = difference_property_check(&mut c, 10).unwrap();
        assert!(r.ok);
        for p in &r.dets {
            let expect: BigInt = (BigInt::one() << p.m) * ((BigInt::one() << (p.n - p.m)) - BigInt::one());
            assert_eq!(p.det, expect.to_string());
        }
    }

    #[test]
    fn fastpaths() {
        let mut c = ProcessCache::new(GeneratorRule::cantor(&[2, 3, 2]).unwrap());
        let r = surjectivity_fastpaths(&mut c, 3).unwrap();
        assert!(r.all_generators_invertible);
        assert!(r.commuting);

        let mut c = ProcessCache::new(GeneratorRule::ExplicitList(vec![
            m(&[&[2, 0], &[0, 3]]),
            m(&[&[3, 0], &[0, 2]]),
        ]));
        let r = surjectivity_fastpaths(&mut c, 2).unwrap();
        assert!(r.commuting);
        assert_eq!(r.commuting_factorization_holds, Some(true));

        let mut c = ProcessCache::new(GeneratorRule::ExplicitList(vec![
            m(&[&[1, 1], &[0, 1]]),
            m(&[&[1, 0], &[1, 1]]),
        ]));
        let r = surjectivity_fastpaths(&mut c, 2).unwrap();
        assert!(!r.commuting);
        assert_eq!(r.commuting_factorization_holds, None);
        assert!(r.lie_factorization_holds);
    }
}
