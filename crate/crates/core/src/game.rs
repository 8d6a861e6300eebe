//! Majority (coordination) and minority games on a graph.
//!
//! Utilities and potentials are exact integer edge counts.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::graph::{Graph, NodeId};

/// Largest graph accepted by [`enumerate_nash_minority`].
pub const MAX_NASH_ENUMERATION: usize = 24;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GameError {
    #[error("node {i} out of range for {n} nodes")]
    IndexOutOfRange { i: NodeId, n: usize },
    #[error("configuration has length {got}, graph has {expected} nodes")]
    LengthMismatch { got: usize, expected: usize },
    #[error("exhaustive enumeration limited to {max} nodes, graph has {n}")]
    TooLarge { n: usize, max: usize },
    #[error("not a 0/1 string: `{0}`")]
    BadBits(String),
}

/// A binary action profile. Serialized as a `"0110"` string.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Configuration {
    bits: Vec<bool>,
}

impl Configuration {
    pub fn zeros(n: usize) -> Self {
        Configuration { bits: vec![false; n] }
    }

    pub fn ones(n: usize) -> Self {
        Configuration { bits: vec![true; n] }
    }

    pub fn from_bits(bits: Vec<bool>) -> Self {
        Configuration { bits }
    }

    /// Indicator vector of `support`. Panics if an id is `>= n`.
    pub fn from_support(n: usize, support: &[NodeId]) -> Self {
        let mut bits = vec![false; n];
        for &i in support {
            bits[i] = true;
        }
        Configuration { bits }
    }

    /// Bit `i` of `mask` becomes `x_i`.
    pub fn from_mask(n: usize, mask: u64) -> Self {
        Configuration {
            bits: (0..n).map(|i| mask >> i & 1 == 1).collect(),
        }
    }

    pub fn to_mask(&self) -> u64 {
        assert!(self.len() <= 64);
        self.bits
            .iter()
            .enumerate()
            .fold(0, |m, (i, &b)| m | (u64::from(b) << i))
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    #[inline]
    pub fn get(&self, i: NodeId) -> bool {
        self.bits[i]
    }

    #[inline]
    pub fn set(&mut self, i: NodeId, value: bool) {
        self.bits[i] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn support(&self) -> Vec<NodeId> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    /// `‖x‖₁`.
    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_all_ones(&self) -> bool {
        self.bits.iter().all(|&b| b)
    }

    /// `𝟙 − x`.
    pub fn complement(&self) -> Self {
        Configuration {
            bits: self.bits.iter().map(|b| !b).collect(),
        }
    }

    /// Component-wise `self ≤ other`.
    pub fn le(&self, other: &Configuration) -> bool {
        self.len() == other.len() && self.bits.iter().zip(&other.bits).all(|(&a, &b)| !a || b)
    }

    /// Copy with `x_i` replaced by `value`.
    pub fn with(&self, i: NodeId, value: bool) -> Self {
        let mut c = self.clone();
        c.bits[i] = value;
        c
    }
}

impl fmt::Display for Configuration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl FromStr for Configuration {
    type Err = GameError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                _ => Err(GameError::BadBits(s.to_string())),
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Configuration::from_bits)
    }
}

impl Serialize for Configuration {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Configuration {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Neighbors of a node split by action.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct NeighborCount {
    pub zeros: usize,
    pub ones: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BestResponse {
    OnlyZero,
    OnlyOne,
    Both,
}

impl BestResponse {
    pub fn contains(self, action: bool) -> bool {
        match self {
            BestResponse::OnlyZero => !action,
            BestResponse::OnlyOne => action,
            BestResponse::Both => true,
        }
    }

    /// Majority-game best response for the given counts.
    pub fn majority(c: NeighborCount) -> Self {
        use std::cmp::Ordering::*;
        match c.zeros.cmp(&c.ones) {
            Greater => BestResponse::OnlyZero,
            Equal => BestResponse::Both,
            Less => BestResponse::OnlyOne,
        }
    }

    /// Minority-game best response: take the action fewer neighbors play.
    pub fn minority(c: NeighborCount) -> Self {
        use std::cmp::Ordering::*;
        match c.zeros.cmp(&c.ones) {
            Greater => BestResponse::OnlyOne,
            Equal => BestResponse::Both,
            Less => BestResponse::OnlyZero,
        }
    }
}

fn check_len(g: &Graph, x: &Configuration) -> Result<(), GameError> {
    if x.len() != g.node_count() {
        return Err(GameError::LengthMismatch {
            got: x.len(),
            expected: g.node_count(),
        });
    }
    Ok(())
}

fn check_node(g: &Graph, x: &Configuration, i: NodeId) -> Result<(), GameError> {
    check_len(g, x)?;
    if i >= g.node_count() {
        return Err(GameError::IndexOutOfRange {
            i,
            n: g.node_count(),
        });
    }
    Ok(())
}

pub fn neighbor_counts(g: &Graph, x: &Configuration, i: NodeId) -> Result<NeighborCount, GameError> {
    check_node(g, x, i)?;
    Ok(counts_unchecked(g, x, i))
}

#[inline]
pub(crate) fn counts_unchecked(g: &Graph, x: &Configuration, i: NodeId) -> NeighborCount {
    let ones = g.neighbors(i).iter().filter(|&&j| x.get(j)).count();
    NeighborCount {
        zeros: g.degree(i) - ones,
        ones,
    }
}

/// Number of neighbors agreeing with `x_i`.
pub fn utility_majority(g: &Graph, x: &Configuration, i: NodeId) -> Result<usize, GameError> {
    let c = neighbor_counts(g, x, i)?;
    Ok(if x.get(i) { c.ones } else { c.zeros })
}

/// Number of neighbors disagreeing with `x_i`.
pub fn utility_minority(g: &Graph, x: &Configuration, i: NodeId) -> Result<usize, GameError> {
    Ok(g.degree(i) - utility_majority(g, x, i)?)
}

/// Number of edges whose endpoints agree.
pub fn potential_majority(g: &Graph, x: &Configuration) -> Result<i64, GameError> {
    check_len(g, x)?;
    Ok(g.edges().filter(|&(u, v)| x.get(u) == x.get(v)).count() as i64)
}

pub fn potential_minority(g: &Graph, x: &Configuration) -> Result<i64, GameError> {
    Ok(-potential_majority(g, x)?)
}

pub fn best_response(g: &Graph, x: &Configuration, i: NodeId) -> Result<BestResponse, GameError> {
    Ok(BestResponse::majority(neighbor_counts(g, x, i)?))
}

pub fn best_response_minority(
    g: &Graph,
    x: &Configuration,
    i: NodeId,
) -> Result<BestResponse, GameError> {
    Ok(BestResponse::minority(neighbor_counts(g, x, i)?))
}

pub fn is_nash_majority(g: &Graph, x: &Configuration) -> Result<bool, GameError> {
    check_len(g, x)?;
    Ok((0..g.node_count())
        .all(|i| BestResponse::majority(counts_unchecked(g, x, i)).contains(x.get(i))))
}

pub fn is_nash_minority(g: &Graph, x: &Configuration) -> Result<bool, GameError> {
    check_len(g, x)?;
    Ok((0..g.node_count())
        .all(|i| BestResponse::minority(counts_unchecked(g, x, i)).contains(x.get(i))))
}

/// All Nash equilibria of the minority game, in lexicographic order of their
/// 0/1 strings (node 0 is the most significant character).
pub fn enumerate_nash_minority(g: &Graph) -> Result<Vec<Configuration>, GameError> {
    let n = g.node_count();
    if n > MAX_NASH_ENUMERATION {
        return Err(GameError::TooLarge {
            n,
            max: MAX_NASH_ENUMERATION,
        });
    }
    let nbr = neighbor_masks(g);
    let degree: Vec<u32> = (0..n).map(|i| g.degree(i) as u32).collect();
    let mut out = Vec::new();
    for code in 0u64..1 << n {
        // string position i is bit (n - 1 - i) of the counter
        let mask = (0..n).fold(0u64, |m, i| m | ((code >> (n - 1 - i) & 1) << i));
        let stable = (0..n).all(|i| {
            let ones = (mask & nbr[i]).count_ones();
            let zeros = degree[i] - ones;
            if mask >> i & 1 == 1 {
                zeros >= ones
            } else {
                ones >= zeros
            }
        });
        if stable {
            out.push(Configuration::from_mask(n, mask));
        }
    }
    Ok(out)
}

/// Per-node neighbor sets as bitmasks (graphs with at most 64 nodes).
pub(crate) fn neighbor_masks(g: &Graph) -> Vec<u64> {
    assert!(g.node_count() <= 64);
    (0..g.node_count())
        .map(|i| g.neighbors(i).iter().fold(0u64, |m, &j| m | 1 << j))
        .collect()
}

/// Whether the exact potential identity
/// `Φ(α, x₋ᵢ) − Φ(x) = λᵢ(α, x₋ᵢ) − λᵢ(x)` holds for this instance.
pub fn potential_delta_check(
    g: &Graph,
    x: &Configuration,
    i: NodeId,
    action: bool,
) -> Result<bool, GameError> {
    let y = {
        check_node(g, x, i)?;
        x.with(i, action)
    };
    let lhs = potential_majority(g, &y)? - potential_majority(g, x)?;
    let rhs = utility_majority(g, &y, i)? as i64 - utility_majority(g, x, i)? as i64;
    Ok(lhs == rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{gen_clique, gen_erdos_renyi, gen_path, gen_star};
    use proptest::prelude::*;

    fn cfg(s: &str) -> Configuration {
        s.parse().unwrap()
    }

    #[test]
    fn star_center_counts() {
        let g = gen_star(3).unwrap();
        let x = cfg("0110");
        assert_eq!(
            neighbor_counts(&g, &x, 0).unwrap(),
            NeighborCount { zeros: 1, ones: 2 }
        );
        assert_eq!(utility_majority(&g, &x, 0).unwrap(), 1);
        assert_eq!(utility_minority(&g, &x, 0).unwrap(), 2);
        assert_eq!(best_response(&g, &x, 0).unwrap(), BestResponse::OnlyOne);
        assert!(!is_nash_majority(&g, &x).unwrap());
    }

    #[test]
    fn isolated_node_ties() {
        let g = Graph::edgeless(3).unwrap();
        let x = cfg("010");
        assert_eq!(
            neighbor_counts(&g, &x, 1).unwrap(),
            NeighborCount { zeros: 0, ones: 0 }
        );
        assert_eq!(best_response(&g, &x, 1).unwrap(), BestResponse::Both);
    }

    #[test]
    fn clique_all_ones() {
        let g = gen_clique(5).unwrap();
        let x = Configuration::ones(5);
        for i in 0..5 {
            assert_eq!(
                neighbor_counts(&g, &x, i).unwrap(),
                NeighborCount { zeros: 0, ones: 4 }
            );
            assert_eq!(utility_majority(&g, &x, i).unwrap(), 4);
            assert_eq!(utility_minority(&g, &x, i).unwrap(), 0);
        }
        assert_eq!(potential_majority(&g, &x).unwrap(), 10);
        assert_eq!(potential_minority(&g, &x).unwrap(), -10);
    }

    #[test]
    fn clique_two_ones_potential() {
        // brute force: C(2,2) + C(3,2)
        let g = gen_clique(5).unwrap();
        assert_eq!(potential_majority(&g, &cfg("11000")).unwrap(), 4);
        assert_eq!(potential_majority(&g, &cfg("00101")).unwrap(), 4);
    }

    #[test]
    fn two_path_disagreement() {
        let g = gen_path(2).unwrap();
        let x = cfg("10");
        assert_eq!(utility_majority(&g, &x, 0).unwrap(), 0);
        assert_eq!(utility_minority(&g, &x, 0).unwrap(), 1);
        assert_eq!(potential_majority(&g, &x).unwrap(), 0);
        assert!(is_nash_minority(&g, &x).unwrap());
        assert!(!is_nash_majority(&g, &x).unwrap());
    }

    #[test]
    fn path_middle_tie() {
        let g = gen_path(5).unwrap();
        assert_eq!(
            best_response(&g, &cfg("00011"), 2).unwrap(),
            BestResponse::Both
        );
    }

    #[test]
    fn consensus_is_always_nash() {
        for seed in 0..10 {
            let g = gen_erdos_renyi(9, 0.4, seed).unwrap();
            assert!(is_nash_majority(&g, &Configuration::zeros(9)).unwrap());
            assert!(is_nash_majority(&g, &Configuration::ones(9)).unwrap());
        }
    }

    #[test]
    fn errors() {
        let g = gen_path(3).unwrap();
        assert_eq!(
            neighbor_counts(&g, &cfg("01"), 0),
            Err(GameError::LengthMismatch { got: 2, expected: 3 })
        );
        assert_eq!(
            neighbor_counts(&g, &cfg("010"), 3),
            Err(GameError::IndexOutOfRange { i: 3, n: 3 })
        );
        assert!(potential_majority(&g, &cfg("0")).is_err());
        assert!("01a".parse::<Configuration>().is_err());
        let big = Graph::edgeless(25).unwrap();
        assert_eq!(
            enumerate_nash_minority(&big),
            Err(GameError::TooLarge { n: 25, max: 24 })
        );
    }

    #[test]
    fn minority_nash_on_small_graphs() {
        let p2 = gen_path(2).unwrap();
        assert_eq!(
            enumerate_nash_minority(&p2).unwrap(),
            vec![cfg("01"), cfg("10")]
        );
        let single = Graph::edgeless(1).unwrap();
        assert_eq!(
            enumerate_nash_minority(&single).unwrap(),
            vec![cfg("0"), cfg("1")]
        );
    }

    /// Independent scan of all 2^n profiles through the checked predicate.
    fn nash_minority_by_scan(g: &Graph) -> Vec<Configuration> {
        let n = g.node_count();
        let mut all: Vec<Configuration> = (0..1u64 << n)
            .map(|m| Configuration::from_mask(n, m))
            .filter(|x| is_nash_minority(g, x).unwrap())
            .collect();
        all.sort_by_key(|x| x.to_string());
        all
    }

    #[test]
    fn minority_enumeration_matches_scan_and_is_flip_closed() {
        for seed in 0..20 {
            let g = gen_erdos_renyi(8, 0.5, seed).unwrap();
            let listed = enumerate_nash_minority(&g).unwrap();
            assert_eq!(listed, nash_minority_by_scan(&g));
            let set: std::collections::HashSet<_> = listed.iter().cloned().collect();
            assert!(listed.iter().all(|x| set.contains(&x.complement())));
            assert!(!listed.is_empty());
        }
    }

    #[test]
    fn serde_as_bit_string() {
        let x = cfg("01101");
        let json = serde_json::to_string(&x).unwrap();
        assert_eq!(json, "\"01101\"");
        let back: Configuration = serde_json::from_str(&json).unwrap();
        assert_eq!(back, x);
    }

    #[test]
    fn mask_round_trip() {
        let x = cfg("1011001");
        assert_eq!(Configuration::from_mask(7, x.to_mask()), x);
        assert_eq!(x.support(), vec![0, 2, 3, 6]);
        assert_eq!(Configuration::from_support(7, &x.support()), x);
    }

    fn instance() -> impl Strategy<Value = (Graph, Configuration, usize, bool)> {
        (1usize..12, 0.0f64..1.0, any::<u64>()).prop_flat_map(|(n, p, seed)| {
            let g = gen_erdos_renyi(n, p, seed).unwrap();
            (
                Just(g),
                proptest::collection::vec(any::<bool>(), n).prop_map(Configuration::from_bits),
                0..n,
                any::<bool>(),
            )
        })
    }

    proptest! {
        #[test]
        fn potential_identity((g, x, i, a) in instance()) {
            prop_assert!(potential_delta_check(&g, &x, i, a).unwrap());
        }

        #[test]
        fn potential_symmetries((g, x, _i, _a) in instance()) {
            let phi = potential_majority(&g, &x).unwrap();
            prop_assert_eq!(potential_minority(&g, &x).unwrap(), -phi);
            prop_assert_eq!(potential_majority(&g, &x.complement()).unwrap(), phi);
            prop_assert!(phi >= 0 && phi as usize <= g.edge_count());
        }

        #[test]
        fn best_response_depends_only_on_counts((g, x, i, a) in instance()) {
            // changing x_i leaves i's counts, hence its best response, unchanged
            let y = x.with(i, a);
            prop_assert_eq!(neighbor_counts(&g, &x, i).unwrap(), neighbor_counts(&g, &y, i).unwrap());
            prop_assert_eq!(best_response(&g, &x, i).unwrap(), best_response(&g, &y, i).unwrap());
            let c = neighbor_counts(&g, &x, i).unwrap();
            prop_assert_eq!(c.zeros + c.ones, g.degree(i));
        }
    }
}
