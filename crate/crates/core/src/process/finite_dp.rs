//! Exhaustive refutation of the Difference Property on finite abelian groups.
//!
//! `n -> Phi_n` maps into the finite set End(A), so two products must agree
//! within |End(A)| + 1 steps and their difference is the zero map. The search
//! below walks every reachable sequence `Phi_1, Phi_2, ...` (sequences of
//! generators that produce the same products are merged) and records how long
//! the longest one keeps the property.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::finite::{FiniteAbelianGroup, FiniteEndo};

/// Upper bound on |End(A)| accepted by the refuter.
pub const END_CAP: u128 = 1 << 20;

const NODE_BUDGET: u64 = 20_000_000;

#[derive(Clone, Debug, Serialize)]
pub struct FiniteRefutation {
    pub orders: Vec<u64>,
    pub end_count: u64,
    /// Search depth: `min(horizon, |End(A)| + 1)`.
    pub depth_limit: usize,
    /// True when no sequence kept the property through `depth_limit` steps.
    pub refuted: bool,
    /// Every sequence fails by this index.
    pub refuted_at: Option<usize>,
    /// Longest prefix `T_1..T_n` whose products pairwise satisfy the property.
    pub max_survival: usize,
    /// Generator images of one longest surviving prefix.
    pub worst_case: Vec<Vec<Vec<u64>>>,
    pub nodes_explored: u64,
    pub reason: String,
}

struct Search<'a> {
    group: &'a FiniteAbelianGroup,
    ends: Vec<FiniteEndo>,
    index: HashMap<FiniteEndo, usize>,
    diff_surj: HashMap<(usize, usize), bool>,
    compose: HashMap<(usize, usize), usize>,
}

impl Search<'_> {
    fn surjective_difference(&mut self, a: usize, b: usize) -> bool {
        let key = (a.min(b), a.max(b));
        if let Some(&v) = self.diff_surj.get(&key) {
            return v;
        }
        let d = self.group.difference(&self.ends[a], &self.ends[b]);
        let v = self.group.is_surjective(&d);
        self.diff_surj.insert(key, v);
        v
    }

    fn compose(&mut self, t: usize, p: usize) -> usize {
        if let Some(&v) = self.compose.get(&(t, p)) {
            return v;
        }
        let c = self.group.compose(&self.ends[t], &self.ends[p]);
        let v = self.index[&c];
        self.compose.insert((t, p), v);
        v
    }
}

pub fn finite_dp_refute(group: &FiniteAbelianGroup, horizon: usize) -> Result<FiniteRefutation> {
    if group.order() < 2 {
        return Err(Error::InvalidConfig("group must have more than one element".into()));
    }
    let ends = group.endomorphisms(END_CAP)?;
    let end_count = ends.len();
    let index: HashMap<FiniteEndo, usize> =
        ends.iter().cloned().enumerate().map(|(i, e)| (e, i)).collect();
    let mut s = Search { group, ends, index, diff_surj: HashMap::new(), compose: HashMap::new() };
    let depth_limit = horizon.min(end_count + 1).max(1);

    // Node: products Phi_1..Phi_n and one generator sequence realising them.
    let mut stack: Vec<(Vec<usize>, Vec<usize>)> = (0..end_count).map(|t| (vec![t], vec![t])).collect();
    let mut nodes = 0u64;
    let mut best: (usize, Vec<usize>) = (0, Vec::new());
    while let Some((phis, ts)) = stack.pop() {
        nodes += 1;
        if nodes > NODE_BUDGET {
            return Err(Error::SearchBudget(format!("more than {NODE_BUDGET} search nodes")));
        }
        if phis.len() > best.0 {
            best = (phis.len(), ts.clone());
        }
        if phis.len() >= depth_limit {
            continue;
        }
        let last = *phis.last().unwrap();
        let mut seen = HashMap::new();
        for t in 0..end_count {
            let next = s.compose(t, last);
            if seen.insert(next, t).is_some() {
                continue;
            }
            if phis.iter().all(|&p| s.surjective_difference(next, p)) {
                let mut np = phis.clone();
                np.push(next);
                let mut nt = ts.clone();
                nt.push(t);
                stack.push((np, nt));
            }
        }
    }

    let max_survival = best.0;
    let refuted = max_survival < depth_limit;
    let reason = if refuted {
        format!(
            "every generator sequence fails by n = {}; pigeonhole bound |End(A)| + 1 = {}",
            max_survival + 1,
            end_count + 1
        )
    } else {
        format!("a sequence survives the whole horizon {depth_limit}; raise the horizon past |End(A)|")
    };
    Ok(FiniteRefutation {
        orders: group.orders().to_vec(),
        end_count: end_count as u64,
        depth_limit,
        refuted,
        refuted_at: refuted.then_some(max_survival + 1),
        max_survival,
        worst_case: best.1.iter().map(|&t| s.ends[t].images().to_vec()).collect(),
        nodes_explored: nodes,
        reason,
    })
}
