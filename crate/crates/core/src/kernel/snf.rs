//! Smith normal form over the integers.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::error::{Error, Result};
use crate::matrix::IntegerEndomorphism;

type Mat = Vec<Vec<BigInt>>;

/// `P A Q = diag(d_1, ..., d_n)` with `P`, `Q` unimodular, `d_i >= 0` and
/// `d_i | d_{i+1}`.
#[derive(Clone, Debug)]
pub struct SmithForm {
    pub p: Mat,
    pub q: Mat,
    pub diag: Vec<BigInt>,
}

fn identity(n: usize) -> Mat {
    (0..n)
        .map(|i| (0..n).map(|j| if i == j { BigInt::one() } else { BigInt::zero() }).collect())
        .collect()
}

fn row_axpy(m: &mut Mat, dst: usize, src: usize, c: &BigInt) {
    if c.is_zero() {
        return;
    }
    for j in 0..m[dst].len() {
        let v = &m[src][j] * c;
        m[dst][j] -= v;
    }
}

fn col_axpy(m: &mut Mat, dst: usize, src: usize, c: &BigInt) {
    if c.is_zero() {
        return;
    }
    for row in m.iter_mut() {
        let v = &row[src] * c;
        row[dst] -= v;
    }
}

fn swap_cols(m: &mut Mat, a: usize, b: usize) {
    for row in m.iter_mut() {
        row.swap(a, b);
    }
}

pub fn smith_normal_form(a: &IntegerEndomorphism) -> SmithForm {
    let n = a.dim();
    let mut m = a.rows();
    let mut p = identity(n);
    let mut q = identity(n);
    for t in 0..n {
        loop {
            // pivot: least nonzero magnitude in the trailing block
            let mut best: Option<(usize, usize)> = None;
            for i in t..n {
                for j in t..n {
                    if !m[i][j].is_zero() && best.is_none_or(|(bi, bj)| m[i][j].abs() < m[bi][bj].abs()) {
                        best = Some((i, j));
                    }
                }
            }
            let Some((bi, bj)) = best else { break };
            m.swap(t, bi);
            p.swap(t, bi);
            swap_cols(&mut m, t, bj);
            swap_cols(&mut q, t, bj);

            let mut clean = true;
            for i in t + 1..n {
                let c = m[i][t].div_floor(&m[t][t]);
                row_axpy(&mut m, i, t, &c);
                row_axpy(&mut p, i, t, &c);
                clean &= m[i][t].is_zero();
            }
            for j in t + 1..n {
                let c = m[t][j].div_floor(&m[t][t]);
                col_axpy(&mut m, j, t, &c);
                col_axpy(&mut q, j, t, &c);
                clean &= m[t][j].is_zero();
            }
            if !clean {
                continue;
            }
            // divisibility: fold an offending row into row t and go again
            let bad = (t + 1..n).find(|&i| (t + 1..n).any(|j| !m[i][j].is_multiple_of(&m[t][t])));
            match bad {
                Some(i) => {
                    let minus_one = -BigInt::one();
                    row_axpy(&mut m, t, i, &minus_one);
                    row_axpy(&mut p, t, i, &minus_one);
                }
                None => break,
            }
        }
        if m[t][t].is_negative() {
            for v in m[t].iter_mut() {
                *v = -&*v;
            }
            for v in p[t].iter_mut() {
                *v = -&*v;
            }
        }
    }
    let diag = (0..n).map(|i| m[i][i].clone()).collect();
    SmithForm { p, q, diag }
}

impl SmithForm {
    /// Rejects singular input.
    pub fn nonsingular(a: &IntegerEndomorphism) -> Result<Self> {
        let s = smith_normal_form(a);
        if s.diag.iter().any(Zero::is_zero) {
            return Err(Error::Singular);
        }
        Ok(s)
    }
}
