//! Kernel lattices of toral endomorphisms and their covering radii.

mod snf;

pub use snf::{smith_normal_form, SmithForm};

use num_bigint::{BigInt, BigUint};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::matrix::IntegerEndomorphism;
use crate::par;
use crate::process::ProcessCache;
use crate::rng::SeedStream;
use crate::torus::{rational_to_string, RationalPoint};

/// Largest kernel enumerated point by point.
pub const KERNEL_CAP: u64 = 1_000_000;
/// Random probes added to the covering-radius grid.
pub const DEFAULT_PROBES: usize = 1000;
/// Slack allowed against the singular-value estimate.
pub const OPNORM_SLACK: f64 = 1e-8;

/// `{x : A x = 0 mod Z^d}`, stored as numerators over a common denominator.
#[derive(Clone, Debug)]
pub struct KernelLattice {
    matrix: IntegerEndomorphism,
    invariants: Vec<BigInt>,
    denom: BigUint,
    points: Vec<Vec<BigUint>>,
}

pub fn kernel_size(a: &IntegerEndomorphism) -> Result<BigUint> {
    let det = a.det();
    if det.is_zero() {
        return Err(Error::Singular);
    }
    Ok(det.magnitude().clone())
}

pub fn kernel_points(a: &IntegerEndomorphism) -> Result<KernelLattice> {
    kernel_points_capped(a, KERNEL_CAP)
}

pub fn kernel_points_capped(a: &IntegerEndomorphism, cap: u64) -> Result<KernelLattice> {
    let size = kernel_size(a)?;
    if size > BigUint::from(cap) {
        return Err(Error::CapExceeded { size: size.to_string(), cap });
    }
    let s = SmithForm::nonsingular(a)?;
    let d = a.dim();
    let orders: Vec<u64> = s.diag.iter().map(|v| v.to_u64().expect("bounded by cap")).collect();
    let big_d = *orders.last().expect("dim >= 1");
    let denom = BigInt::from(big_d);
    let q: Vec<Vec<BigInt>> = s.q.iter().map(|r| r.iter().map(|v| v.mod_floor(&denom)).collect()).collect();
    let count: u64 = orders.iter().product();
    let mut points = Vec::with_capacity(count as usize);
    let mut ks = vec![0u64; d];
    for _ in 0..count {
        let y: Vec<BigInt> = ks.iter().zip(&orders).map(|(&k, &o)| BigInt::from(k * (big_d / o))).collect();
        let x: Vec<BigUint> = (0..d)
            .map(|i| {
                let v: BigInt = (0..d).map(|j| &q[i][j] * &y[j]).sum();
                v.mod_floor(&denom).to_biguint().expect("reduced")
            })
            .collect();
        points.push(x);
        for (k, &o) in ks.iter_mut().zip(&orders) {
            *k += 1;
            if *k < o {
                break;
            }
            *k = 0;
        }
    }
    points.sort();
    Ok(KernelLattice { matrix: a.clone(), invariants: s.diag, denom: BigUint::from(big_d), points })
}

impl KernelLattice {
    pub fn matrix(&self) -> &IntegerEndomorphism {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Invariant factors `d_1 | d_2 | ... | d_n`; the kernel is `sum Z/d_i`.
    pub fn invariants(&self) -> &[BigInt] {
        &self.invariants
    }

    pub fn denom(&self) -> &BigUint {
        &self.denom
    }

    /// Sorted numerators over [`denom`](Self::denom).
    pub fn numerators(&self) -> &[Vec<BigUint>] {
        &self.points
    }

    pub fn points(&self) -> Vec<RationalPoint> {
        self.points
            .iter()
            .map(|p| RationalPoint::new(p.clone(), self.denom.clone()).expect("valid numerators"))
            .collect()
    }

    pub fn points_f64(&self) -> Vec<Vec<f64>> {
        let d = self.denom.to_f64().expect("finite");
        self.points.iter().map(|p| p.iter().map(|v| v.to_f64().expect("finite") / d).collect()).collect()
    }

    /// `A p = 0 mod Z^d` for every point, checked exactly.
    pub fn verify(&self) -> bool {
        let den = BigInt::from(self.denom.clone());
        let n = self.dim();
        self.points.iter().all(|p| {
            (0..n).all(|i| {
                let v: BigInt = (0..n).map(|j| self.matrix.get(i, j) * BigInt::from(p[j].clone())).sum();
                v.mod_floor(&den).is_zero()
            })
        })
    }

    pub fn contains(&self, x: &RationalPoint) -> bool {
        let den = BigInt::from(self.denom.clone());
        let xd = BigInt::from(x.denom().clone());
        let mut nums = Vec::with_capacity(x.dim());
        for v in x.nums() {
            let scaled = BigInt::from(v.clone()) * &den;
            if !scaled.is_multiple_of(&xd) {
                return false;
            }
            nums.push((scaled / &xd).to_biguint().expect("nonnegative"));
        }
        self.points.binary_search(&nums).is_ok()
    }
}

/// Circle distance in the `rho` metric between two `f64` points.
pub fn rho_f64(x: &[f64], y: &[f64]) -> f64 {
    x.iter()
        .zip(y)
        .map(|(a, b)| {
            let t = (a - b).rem_euclid(1.0);
            t.min(1.0 - t)
        })
        .sum()
}

fn nearest(x: &[f64], pts: &[Vec<f64>]) -> f64 {
    pts.iter().map(|p| rho_f64(x, p)).fold(f64::INFINITY, f64::min)
}

#[derive(Clone, Debug, Serialize)]
pub struct CoveringRadius {
    pub lower: f64,
    pub upper: f64,
    /// Exact value when it is known (always in dimension one).
    pub exact: Option<String>,
    /// Point attaining `lower`.
    pub witness: Vec<f64>,
    pub grid_per_dim: usize,
    pub probes: usize,
}

impl CoveringRadius {
    pub fn interval(&self) -> [f64; 2] {
        [self.lower, self.upper]
    }

    fn exact(r: BigRational, witness: Vec<f64>) -> Self {
        let v = r.to_f64().expect("finite");
        Self { lower: v, upper: v, exact: Some(rational_to_string(&r)), witness, grid_per_dim: 0, probes: 0 }
    }
}

/// Covering radius `1/(2q)` of the equispaced kernel `{j/q}` on the circle.
pub fn equispaced_covering_radius(q: &BigInt) -> BigRational {
    BigRational::new(BigInt::one(), BigInt::from(2) * q.abs())
}

/// `max_x min_p rho(x, p)`: exact in dimension one, otherwise an interval
/// from a grid of half-spacing `resolution` plus `probes` random points.
pub fn covering_radius(lattice: &KernelLattice, resolution: f64, probes: usize, seed: u64) -> Result<CoveringRadius> {
    if lattice.dim() == 1 {
        return Ok(covering_radius_1d(lattice));
    }
    if !(resolution > 0.0 && resolution <= 0.5) {
        return Err(Error::InvalidConfig(format!("resolution {resolution} outside (0, 1/2]")));
    }
    let d = lattice.dim();
    let pts = lattice.points_f64();
    let g = (1.0 / (2.0 * resolution)).ceil() as usize;
    let total = g
        .checked_pow(d as u32)
        .filter(|&t| t <= 50_000_000)
        .ok_or_else(|| Error::InvalidConfig("covering grid too large".into()))?;
    let grid_point = |mut c: usize| -> Vec<f64> {
        (0..d)
            .map(|_| {
                let v = (c % g) as f64 / g as f64;
                c /= g;
                v
            })
            .collect()
    };
    let grid = par::map_range(total, |c| nearest(&grid_point(c), &pts));
    let (gi, gmax) = grid
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &v)| if v > bv { (i, v) } else { (bi, bv) });
    let stream = SeedStream::new(seed).named("covering-probes");
    let probe_pts: Vec<Vec<f64>> = (0..probes)
        .map(|s| {
            let mut rng = stream.child(s as u64).rng();
            (0..d).map(|_| rng.gen::<f64>()).collect()
        })
        .collect();
    let probe_d = par::map_range(probes, |i| nearest(&probe_pts[i], &pts));
    let mut lower = gmax;
    let mut witness = grid_point(gi);
    for (p, &v) in probe_pts.iter().zip(&probe_d) {
        if v > lower {
            lower = v;
            witness = p.clone();
        }
    }
    // every point lies within d / (2g) of the grid in rho
    let upper = gmax + d as f64 / (2.0 * g as f64);
    Ok(CoveringRadius { lower, upper, exact: None, witness, grid_per_dim: g, probes })
}

fn covering_radius_1d(lattice: &KernelLattice) -> CoveringRadius {
    let mut nums: Vec<BigUint> = lattice.numerators().iter().map(|p| p[0].clone()).collect();
    nums.sort();
    let den = lattice.denom().clone();
    let mut best_gap = BigUint::zero();
    let mut best_start = BigUint::zero();
    for i in 0..nums.len() {
        let next = if i + 1 < nums.len() { nums[i + 1].clone() } else { &nums[0] + &den };
        let gap = &next - &nums[i];
        if gap > best_gap {
            best_gap = gap;
            best_start = nums[i].clone();
        }
    }
    let two_den: BigInt = BigInt::from(den) * BigInt::from(2);
    let r = BigRational::new(BigInt::from(best_gap.clone()), two_den.clone());
    let mid = BigRational::new(BigInt::from(&best_start * 2u32 + &best_gap), two_den);
    let w = (mid.to_f64().expect("finite")).rem_euclid(1.0);
    CoveringRadius::exact(r, vec![w])
}

fn mat_vec(m: &[Vec<f64>], v: &[f64]) -> Vec<f64> {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration from several rational start vectors.
pub fn power_iteration_sym(m: &[Vec<f64>], max_iter: usize, tol: f64) -> f64 {
    let n = m.len();
    let mut starts: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
    starts.push(vec![1.0; n]);
    starts.push((1..=n).map(|j| j as f64).collect());
    let mut best: f64 = 0.0;
    for mut v in starts {
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.iter_mut().for_each(|x| *x /= norm);
        let mut lambda = 0.0;
        for _ in 0..max_iter {
            let w = mat_vec(m, &v);
            let next: f64 = w.iter().zip(&v).map(|(a, b)| a * b).sum();
            let wn = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if wn == 0.0 {
                break;
            }
            v = w.into_iter().map(|x| x / wn).collect();
            let done = (next - lambda).abs() <= tol * next.abs();
            lambda = next;
            if done {
                break;
            }
        }
        best = best.max(lambda);
    }
    best
}

/// Euclidean operator norm of `A^{-1}`.
pub fn op_norm_inv(a: &IntegerEndomorphism) -> Result<f64> {
    if a.dim() == 1 {
        let v = a.get(0, 0);
        if v.is_zero() {
            return Err(Error::Singular);
        }
        return Ok(1.0 / v.abs().to_f64().expect("finite"));
    }
    let inv = a.inverse_f64()?;
    let n = inv.len();
    let gram: Vec<Vec<f64>> =
        (0..n).map(|i| (0..n).map(|j| (0..n).map(|k| inv[k][i] * inv[k][j]).sum()).collect()).collect();
    Ok(power_iteration_sym(&gram, 20_000, 1e-14).sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct ToralReport {
    pub dim: usize,
    pub det: String,
    pub op_norm_inv: f64,
    pub bound: f64,
    pub probes: usize,
    /// Worst `rho(x, y)` for `y = A^{-1} floor(A x)`, computed exactly.
    pub worst_constructed: f64,
    pub worst_constructed_exact: String,
    /// Worst distance to the nearest enumerated kernel point.
    pub worst_nearest: Option<f64>,
    pub covering_radius: Option<CoveringRadius>,
    pub pass: bool,
}

/// Checks `rho(x, ker A) <= d^2 ||A^{-1}||_op` on random dyadic probes and
/// against the covering-radius interval.
pub fn toral_estimate_check(a: &IntegerEndomorphism, n_probes: usize, seed: u64) -> Result<ToralReport> {
    let d = a.dim();
    let det = a.det();
    if det.is_zero() {
        return Err(Error::Singular);
    }
    let inv = a.inverse()?;
    let opn = op_norm_inv(a)?;
    let bound = (d * d) as f64 * opn;
    let stream = SeedStream::new(seed).named("toral-probes");
    let scale = BigInt::one() << 64u32;
    let probes: Vec<Vec<BigRational>> = (0..n_probes)
        .map(|s| {
            let mut rng = stream.child(s as u64).rng();
            (0..d).map(|_| BigRational::new(BigInt::from(rng.gen::<u64>()), scale.clone())).collect()
        })
        .collect();
    let constructed = par::map_range(n_probes, |s| {
        let x = &probes[s];
        let z: Vec<BigInt> = (0..d)
            .map(|i| {
                let ax: BigRational =
                    (0..d).map(|j| BigRational::from_integer(a.get(i, j).clone()) * &x[j]).sum();
                ax.floor().to_integer()
            })
            .collect();
        let y: Vec<BigRational> =
            (0..d).map(|i| (0..d).map(|j| &inv[i][j] * BigRational::from_integer(z[j].clone())).sum()).collect();
        let xp = RationalPoint::from_rationals(x);
        let yp = RationalPoint::from_rationals(&y);
        xp.sub(&yp).expect("same dimension").norm()
    });
    let worst = constructed.iter().max().cloned().unwrap_or_else(BigRational::zero);
    let worst_f = worst.to_f64().expect("finite");
    let (worst_nearest, cover) = match kernel_points(a) {
        Ok(lat) => {
            let pts = lat.points_f64();
            let xs: Vec<Vec<f64>> =
                probes.iter().map(|x| x.iter().map(|v| v.to_f64().expect("finite")).collect()).collect();
            let near = par::map_range(n_probes, |s| nearest(&xs[s], &pts)).into_iter().fold(0.0, f64::max);
            let cr = covering_radius(&lat, default_resolution(d), DEFAULT_PROBES, seed)?;
            (Some(near), Some(cr))
        }
        Err(Error::CapExceeded { .. }) => (None, None),
        Err(e) => return Err(e),
    };
    let pass = worst_f <= bound + OPNORM_SLACK
        && worst_nearest.is_none_or(|v| v <= worst_f + 1e-12)
        && cover.as_ref().is_none_or(|c| c.upper <= bound + OPNORM_SLACK);
    Ok(ToralReport {
        dim: d,
        det: det.to_string(),
        op_norm_inv: opn,
        bound,
        probes: n_probes,
        worst_constructed: worst_f,
        worst_constructed_exact: rational_to_string(&worst),
        worst_nearest,
        covering_radius: cover,
        pass,
    })
}

/// Grid half-spacing used when none is given.
pub fn default_resolution(dim: usize) -> f64 {
    match dim {
        1 => 1.0 / 1024.0,
        2 => 1.0 / 256.0,
        3 => 1.0 / 48.0,
        _ => 1.0 / 8.0,
    }
}

/// One row of the density report.
#[derive(Clone, Debug, Serialize)]
pub struct KernelRow {
    pub m: usize,
    pub det: String,
    pub op_norm_inv: f64,
    pub covering_radius_interval: Option<[f64; 2]>,
    pub covering_radius_exact: Option<String>,
    pub bound: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, Serialize)]
pub struct DensityReport {
    pub horizon: usize,
    pub rows: Vec<KernelRow>,
    pub running_min: Vec<f64>,
    /// `min_{n <= N} ||Phi_n^{-1}||_op`.
    pub liminf_proxy: f64,
    /// `d^2` times the proxy.
    pub epsilon: f64,
    /// Covering radius of `ker Phi_N`, which contains every earlier kernel.
    pub union_covering_radius: Option<[f64; 2]>,
    pub union_covering_exact: Option<String>,
    pub dense_at_epsilon: bool,
    /// Running minimum still falling over the second half of the horizon.
    pub criterion_met: bool,
    pub verdict: String,
}

fn covering_for(a: &IntegerEndomorphism, seed: u64) -> Result<Option<CoveringRadius>> {
    match kernel_points(a) {
        Ok(lat) => Ok(Some(covering_radius(&lat, default_resolution(a.dim()), DEFAULT_PROBES, seed)?)),
        Err(Error::CapExceeded { .. }) if a.dim() == 1 => {
            Ok(Some(CoveringRadius::exact(equispaced_covering_radius(a.get(0, 0)), vec![])))
        }
        Err(Error::CapExceeded { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Tracks `||Phi_n^{-1}||_op` for `n <= N` and checks that the union of
/// kernels is `d^2 min ||Phi_n^{-1}||`-dense.
pub fn kernel_density_criterion(cache: &mut ProcessCache, horizon: usize, seed: u64) -> Result<DensityReport> {
    if horizon == 0 {
        return Err(Error::OutOfRange("horizon must be >= 1".into()));
    }
    cache.extend_phis(horizon)?;
    let d = cache.dim();
    let d2 = (d * d) as f64;
    let phis = &cache.phis()[1..=horizon];
    let rows = par::try_map_range(horizon, |i| {
        let phi = &phis[i];
        let opn = op_norm_inv(phi)?;
        let bound = d2 * opn;
        let cr = covering_for(phi, seed)?;
        let pass = cr.as_ref().is_none_or(|c| c.upper <= bound + OPNORM_SLACK);
        Ok::<_, Error>(KernelRow {
            m: i + 1,
            det: phi.det().to_string(),
            op_norm_inv: opn,
            covering_radius_interval: cr.as_ref().map(CoveringRadius::interval),
            covering_radius_exact: cr.and_then(|c| c.exact),
            bound,
            pass,
        })
    })?;
    let mut running_min = Vec::with_capacity(horizon);
    let mut cur = f64::INFINITY;
    for r in &rows {
        cur = cur.min(r.op_norm_inv);
        running_min.push(cur);
    }
    let liminf_proxy = cur;
    let epsilon = d2 * liminf_proxy;
    let last = rows.last().expect("horizon >= 1");
    let half = horizon / 2;
    let criterion_met = horizon >= 2 && running_min[horizon - 1] < running_min[half.max(1) - 1];
    let dense_at_epsilon = match last.covering_radius_interval {
        Some([_, hi]) => hi <= epsilon + OPNORM_SLACK,
        None => true,
    };
    let verdict = match (criterion_met, last.covering_radius_interval.is_some()) {
        (true, true) => "criterion met; union of kernels is epsilon-dense".to_string(),
        (true, false) => "criterion met; density certified by the toral bound only".to_string(),
        (false, _) => "criterion not met".to_string(),
    };
    Ok(DensityReport {
        horizon,
        union_covering_radius: last.covering_radius_interval,
        union_covering_exact: last.covering_radius_exact.clone(),
        rows,
        running_min,
        liminf_proxy,
        epsilon,
        dense_at_epsilon,
        criterion_met,
        verdict,
    })
}
