//! Exact brute-force ground truth for small graphs.
//!
//! Everything here enumerates: subsets in increasing size, the reachable set
//! of the zero-temperature search chain by breadth-first search, and the
//! dense transition matrix of the ε-chain over that set. Matrix code is
//! generic over [`Weight`] so the reversibility check can run in exact
//! rational arithmetic.

use std::collections::{HashMap, VecDeque};

use itertools::Itertools;
use nalgebra::{DMatrix, DVector};
use num::bigint::BigInt;
pub use num::rational::BigRational;
use num::{One, Signed, ToPrimitive, Zero};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cascade::{is_minimal, is_valid, ControlSet};
use crate::game::{enumerate_nash_minority, neighbor_masks, Configuration};
use crate::graph::Graph;

/// Node limit for subset enumeration.
pub const MAX_EXHAUSTIVE_NODES: usize = 20;
/// Node limit for enumerating the reachable set.
pub const MAX_Z_NODES: usize = 16;
/// State limit for dense transition matrices.
pub const MAX_DENSE_STATES: usize = 2048;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("graph has {n} nodes, limit for this computation is {max}")]
    TooLarge { n: usize, max: usize },
    #[error("no valid control set of size <= {max_k}")]
    BoundExceeded { max_k: usize },
    #[error("reachable set has {states} states, dense limit is {max}")]
    TooManyStates { states: usize, max: usize },
    #[error("epsilon must lie in (0, 1]")]
    InvalidEpsilon,
    #[error("a rise from {from} leads to {to}, outside the reachable set")]
    LeavesReachableSet { from: String, to: String },
    #[error("linear solve failed: {0}")]
    Solver(String),
}

/// Smallest valid control set found by enumeration.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Optimum {
    pub size: usize,
    pub witness: ControlSet,
}

pub fn exhaustive_optimum(g: &Graph, max_k: Option<usize>) -> Result<Optimum, OracleError> {
    exhaustive_optimum_with_guard(g, max_k, MAX_EXHAUSTIVE_NODES)
}

/// Tries sizes `0, 1, …` and, within a size, subsets in lexicographic order;
/// returns the first valid one. Each size level is checked in parallel, and
/// the lexicographically first hit is kept.
pub fn exhaustive_optimum_with_guard(
    g: &Graph,
    max_k: Option<usize>,
    guard: usize,
) -> Result<Optimum, OracleError> {
    let n = g.node_count();
    if n > guard {
        return Err(OracleError::TooLarge { n, max: guard });
    }
    let cap = max_k.unwrap_or(n).min(n);
    for k in 0..=cap {
        let level: Vec<Vec<usize>> = (0..n).combinations(k).collect();
        let hit = level
            .par_iter()
            .position_first(|members| is_valid(g, &ControlSet::new(members.iter().copied())));
        if let Some(pos) = hit {
            return Ok(Optimum {
                size: k,
                witness: ControlSet::new(level[pos].iter().copied()),
            });
        }
    }
    Err(OracleError::BoundExceeded { max_k: cap })
}

/// Every valid control set, as support bitmasks in increasing order.
pub fn valid_subsets(g: &Graph) -> Result<Vec<u64>, OracleError> {
    let n = g.node_count();
    if n > MAX_EXHAUSTIVE_NODES {
        return Err(OracleError::TooLarge {
            n,
            max: MAX_EXHAUSTIVE_NODES,
        });
    }
    Ok((0u64..1 << n)
        .into_par_iter()
        .filter(|&mask| is_valid(g, &ControlSet::of_configuration(&Configuration::from_mask(n, mask))))
        .collect())
}

/// Configurations reachable from all-ones by feasible drops, and which of
/// them admit no further drop.
#[derive(Clone, Debug)]
pub struct ZEnumeration {
    n: usize,
    masks: Vec<u64>,
    absorbing: Vec<bool>,
    index: HashMap<u64, usize>,
}

impl ZEnumeration {
    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn node_count(&self) -> usize {
        self.n
    }

    pub fn masks(&self) -> &[u64] {
        &self.masks
    }

    pub fn state(&self, k: usize) -> Configuration {
        Configuration::from_mask(self.n, self.masks[k])
    }

    pub fn states(&self) -> impl Iterator<Item = Configuration> + '_ {
        (0..self.len()).map(|k| self.state(k))
    }

    pub fn is_absorbing(&self, k: usize) -> bool {
        self.absorbing[k]
    }

    pub fn absorbing_count(&self) -> usize {
        self.absorbing.iter().filter(|&&a| a).count()
    }

    pub fn index_of(&self, x: &Configuration) -> Option<usize> {
        self.index.get(&x.to_mask()).copied()
    }

    pub fn contains(&self, x: &Configuration) -> bool {
        x.len() == self.n && self.index.contains_key(&x.to_mask())
    }

    /// `‖x‖₁` of state `k`.
    pub fn weight(&self, k: usize) -> usize {
        self.masks[k].count_ones() as usize
    }
}

/// Breadth-first search from all-ones; states are numbered in discovery
/// order, so all-ones is state 0.
pub fn enumerate_z(g: &Graph) -> Result<ZEnumeration, OracleError> {
    let n = g.node_count();
    if n > MAX_Z_NODES {
        return Err(OracleError::TooLarge { n, max: MAX_Z_NODES });
    }
    let nbr = neighbor_masks(g);
    let feasible = |mask: u64, i: usize| 2 * (mask & nbr[i]).count_ones() as usize >= g.degree(i);
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    let mut masks = vec![full];
    let mut index = HashMap::from([(full, 0)]);
    let mut absorbing = Vec::new();
    let mut queue = VecDeque::from([full]);
    while let Some(mask) = queue.pop_front() {
        let mut any = false;
        for i in 0..n {
            if mask >> i & 1 == 1 && feasible(mask, i) {
                any = true;
                let child = mask & !(1 << i);
                if let std::collections::hash_map::Entry::Vacant(e) = index.entry(child) {
                    e.insert(masks.len());
                    masks.push(child);
                    queue.push_back(child);
                }
            }
        }
        absorbing.push(!any);
    }
    Ok(ZEnumeration {
        n,
        masks,
        absorbing,
        index,
    })
}

/// Scalar type for transition matrices: `f64` or exact rationals.
pub trait Weight: Clone + PartialOrd + Signed {
    fn from_count(k: usize) -> Self;
}

impl Weight for f64 {
    fn from_count(k: usize) -> Self {
        k as f64
    }
}

impl Weight for BigRational {
    fn from_count(k: usize) -> Self {
        BigRational::from_integer(BigInt::from(k))
    }
}

/// Dense row-stochastic matrix of the ε-chain restricted to the reachable
/// set, in [`ZEnumeration`] state order.
#[derive(Clone, Debug)]
pub struct TransitionMatrix<T = f64> {
    size: usize,
    entries: Vec<T>,
    epsilon: T,
    weights: Vec<usize>,
}

impl<T: Weight> TransitionMatrix<T> {
    pub fn size(&self) -> usize {
        self.size
    }

    pub fn get(&self, from: usize, to: usize) -> &T {
        &self.entries[from * self.size + to]
    }

    pub fn epsilon(&self) -> &T {
        &self.epsilon
    }

    pub fn weights(&self) -> &[usize] {
        &self.weights
    }

    pub fn row(&self, from: usize) -> &[T] {
        &self.entries[from * self.size..(from + 1) * self.size]
    }

    pub fn row_sum(&self, from: usize) -> T {
        self.row(from).iter().fold(T::zero(), |acc, p| acc + p.clone())
    }

    /// Overwrites one entry; for exercising the checkers.
    pub fn set(&mut self, from: usize, to: usize, value: T) {
        self.entries[from * self.size + to] = value;
    }
}

pub fn build_transition_matrix<T: Weight>(
    g: &Graph,
    z: &ZEnumeration,
    epsilon: T,
) -> Result<TransitionMatrix<T>, OracleError> {
    if !(epsilon > T::zero() && epsilon <= T::one()) {
        return Err(OracleError::InvalidEpsilon);
    }
    let size = z.len();
    if size > MAX_DENSE_STATES {
        return Err(OracleError::TooManyStates {
            states: size,
            max: MAX_DENSE_STATES,
        });
    }
    let n = g.node_count();
    let nbr = neighbor_masks(g);
    let down = T::one() / T::from_count(n);
    let up = epsilon.clone() / T::from_count(n);
    let mut entries = vec![T::zero(); size * size];
    for (r, &mask) in z.masks().iter().enumerate() {
        let mut leaving = T::zero();
        for i in 0..n {
            if 2 * ((mask & nbr[i]).count_ones() as usize) < g.degree(i) {
                continue;
            }
            let (target, p) = if mask >> i & 1 == 1 {
                (mask & !(1 << i), down.clone())
            } else {
                (mask | 1 << i, up.clone())
            };
            let c = *z.index.get(&target).ok_or_else(|| OracleError::LeavesReachableSet {
                from: Configuration::from_mask(n, mask).to_string(),
                to: Configuration::from_mask(n, target).to_string(),
            })?;
            leaving = leaving + p.clone();
            entries[r * size + c] = p;
        }
        entries[r * size + r] = T::one() - leaving;
    }
    Ok(TransitionMatrix {
        size,
        entries,
        epsilon,
        weights: (0..size).map(|k| z.weight(k)).collect(),
    })
}

/// Largest relative flow imbalance `|f(x,y) − f(y,x)| / max(f(x,y), f(y,x))`
/// with `f(x,y) = ε^‖x‖ P(x,y)`, over all state pairs with nonzero flow.
/// The ratio is scale free, so tiny weights of dense states do not mask
/// errors in their rows.
pub fn check_detailed_balance<T: Weight>(tm: &TransitionMatrix<T>) -> T {
    let max_w = tm.weights.iter().copied().max().unwrap_or(0);
    let mut powers = vec![T::one()];
    for _ in 0..max_w {
        let next = powers.last().unwrap().clone() * tm.epsilon.clone();
        powers.push(next);
    }
    let mut worst = T::zero();
    for x in 0..tm.size {
        for y in x + 1..tm.size {
            let lhs = powers[tm.weights[x]].clone() * tm.get(x, y).clone();
            let rhs = powers[tm.weights[y]].clone() * tm.get(y, x).clone();
            let top = if lhs > rhs { lhs.clone() } else { rhs.clone() };
            if top.is_zero() {
                continue;
            }
            let gap = (lhs - rhs).abs() / top;
            if gap > worst {
                worst = gap;
            }
        }
    }
    worst
}

/// Unique left fixed vector, from a dense LU solve of `π(P − I) = 0` with
/// one balance equation replaced by `Σπ = 1`.
pub fn stationary_distribution(tm: &TransitionMatrix<f64>) -> Result<Vec<f64>, OracleError> {
    let s = tm.size;
    let mut a = DMatrix::<f64>::zeros(s, s);
    for r in 0..s {
        for c in 0..s {
            // row c of the system is the balance equation of state c
            a[(c, r)] = tm.get(r, c) - if r == c { 1.0 } else { 0.0 };
        }
    }
    for c in 0..s {
        a[(s - 1, c)] = 1.0;
    }
    let mut b = DVector::<f64>::zeros(s);
    b[s - 1] = 1.0;
    let pi = a
        .lu()
        .solve(&b)
        .ok_or_else(|| OracleError::Solver("singular system (chain not ergodic?)".into()))?;
    let pi: Vec<f64> = pi.iter().copied().collect();
    if pi.iter().any(|&p| !(p > 0.0)) {
        return Err(OracleError::Solver("non-positive stationary mass".into()));
    }
    let total: f64 = pi.iter().sum();
    if (total - 1.0).abs() > 1e-12 {
        return Err(OracleError::Solver(format!("mass sums to {total}")));
    }
    Ok(pi)
}

/// Stationary vector by power iteration on the lazy chain `(P + I)/2`, which
/// shares the fixed vector and is aperiodic.
pub fn stationary_by_power_iteration(
    tm: &TransitionMatrix<f64>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>, OracleError> {
    let s = tm.size;
    let mut pi = vec![1.0 / s as f64; s];
    for _ in 0..max_iter {
        let mut next = vec![0.0; s];
        for r in 0..s {
            let mass = pi[r];
            for (c, p) in tm.row(r).iter().enumerate() {
                next[c] += 0.5 * mass * p;
            }
            next[r] += 0.5 * mass;
        }
        let delta = pi.iter().zip(&next).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        pi = next;
        if delta < tol * 1e-3 {
            return Ok(pi);
        }
    }
    Err(OracleError::Solver(format!("no convergence in {max_iter} iterations")))
}

/// `K ε^‖x‖₁` over the states of `z`.
pub fn product_form_distribution(z: &ZEnumeration, epsilon: f64) -> Vec<f64> {
    let raw: Vec<f64> = (0..z.len()).map(|k| epsilon.powi(z.weight(k) as i32)).collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

pub fn max_relative_error(got: &[f64], want: &[f64]) -> f64 {
    got.iter()
        .zip(want)
        .map(|(g, w)| ((g - w) / w).abs())
        .fold(0.0, f64::max)
}

/// All minimal sufficient control sets, sorted.
pub fn enumerate_minimal_sets(g: &Graph) -> Result<Vec<ControlSet>, OracleError> {
    let z = enumerate_z(g)?;
    let mut sets: Vec<ControlSet> = z
        .states()
        .map(|x| ControlSet::of_configuration(&x))
        .filter(|c| is_minimal(g, c))
        .collect();
    sets.sort();
    Ok(sets)
}

/// Checks that every Nash equilibrium of the minority game has a valid
/// support, and that some valid set has at most `⌊n/2⌋` nodes.
pub fn check_minority_nash_validity(g: &Graph) -> Result<bool, OracleError> {
    let n = g.node_count();
    let equilibria = enumerate_nash_minority(g).map_err(|_| OracleError::TooLarge {
        n,
        max: crate::game::MAX_NASH_ENUMERATION,
    })?;
    let all_valid = equilibria
        .iter()
        .all(|x| is_valid(g, &ControlSet::of_configuration(x)));
    let small_enough = equilibria.iter().any(|x| x.count_ones() <= n / 2);
    Ok(all_valid && small_enough)
}

/// Parses `"0.2"`, `"1/5"` or `"1"` into an exact rational.
pub fn parse_ratio(s: &str) -> Option<BigRational> {
    let s = s.trim();
    if let Some((p, q)) = s.split_once('/') {
        let p: BigInt = p.trim().parse().ok()?;
        let q: BigInt = q.trim().parse().ok()?;
        return (!q.is_zero()).then(|| BigRational::new(p, q));
    }
    let (int, frac) = s.split_once('.').unwrap_or((s, ""));
    if frac.chars().any(|c| !c.is_ascii_digit()) {
        return None;
    }
    let digits: BigInt = format!("{int}{frac}").parse().ok()?;
    let scale = num::pow(BigInt::from(10), frac.len());
    Some(BigRational::new(digits, scale))
}

/// Parses an epsilon given as a decimal or `p/q`, returning the exact value
/// and its nearest `f64`.
pub fn parse_epsilon(s: &str) -> Option<(BigRational, f64)> {
    let r = parse_ratio(s)?;
    let f = r.to_f64()?;
    Some((r, f))
}

/// Summary emitted by the `oracle` subcommand.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub n: usize,
    pub m: usize,
    pub optimum: usize,
    pub witness: ControlSet,
    pub z_size: Option<usize>,
    pub z_inf_size: Option<usize>,
    pub minimal_count: Option<usize>,
    pub epsilon: f64,
    pub detailed_balance_violation: Option<f64>,
    pub stationary_max_rel_err: Option<f64>,
}

/// Runs every oracle that fits the graph. Reachable-set quantities are
/// omitted above [`MAX_Z_NODES`], matrix quantities above
/// [`MAX_DENSE_STATES`] states.
pub fn oracle_report(g: &Graph, epsilon: &BigRational) -> Result<OracleReport, OracleError> {
    let eps_f = epsilon.to_f64().ok_or(OracleError::InvalidEpsilon)?;
    if !(epsilon > &BigRational::zero() && epsilon <= &BigRational::one()) {
        return Err(OracleError::InvalidEpsilon);
    }
    let opt = exhaustive_optimum(g, None)?;
    let mut report = OracleReport {
        n: g.node_count(),
        m: g.edge_count(),
        optimum: opt.size,
        witness: opt.witness,
        z_size: None,
        z_inf_size: None,
        minimal_count: None,
        epsilon: eps_f,
        detailed_balance_violation: None,
        stationary_max_rel_err: None,
    };
    if g.node_count() > MAX_Z_NODES {
        return Ok(report);
    }
    let z = enumerate_z(g)?;
    report.z_size = Some(z.len());
    report.z_inf_size = Some(z.absorbing_count());
    report.minimal_count = Some(
        z.states()
            .filter(|x| is_minimal(g, &ControlSet::of_configuration(x)))
            .count(),
    );
    if z.len() <= MAX_DENSE_STATES {
        let exact = build_transition_matrix(g, &z, epsilon.clone())?;
        report.detailed_balance_violation = check_detailed_balance(&exact).to_f64();
        let tm = build_transition_matrix(g, &z, eps_f)?;
        let pi = stationary_distribution(&tm)?;
        report.stationary_max_rel_err =
            Some(max_relative_error(&pi, &product_form_distribution(&z, eps_f)));
    }
    Ok(report)
}
