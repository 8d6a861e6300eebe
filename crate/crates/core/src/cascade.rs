//! Contagion closure and control-set validity.
//!
//! A 0-node is *activatable* when at least half of its neighbors play 1.
//! Flipping such a node never lowers the coordination potential, and
//! activatability only grows as more nodes switch to 1, so the greedy
//! fixpoint (the closure) reaches every node iff some potential-monotone
//! activation order from the seed set exists. That makes validity a linear
//! time check instead of a search over orders.

use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::game::{counts_unchecked, Configuration};
use crate::graph::{Graph, NodeId};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum CascadeError {
    #[error("node {id} out of range for {n} nodes")]
    OutOfRange { id: NodeId, n: usize },
    #[error("control set {0} is not valid")]
    NotValid(ControlSet),
}

/// A set of nodes pinned to action 1, kept sorted and duplicate-free.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ControlSet {
    members: Vec<NodeId>,
}

impl ControlSet {
    pub fn new(members: impl IntoIterator<Item = NodeId>) -> Self {
        let mut members: Vec<NodeId> = members.into_iter().collect();
        members.sort_unstable();
        members.dedup();
        ControlSet { members }
    }

    /// Like [`ControlSet::new`] but rejects ids outside `g`.
    pub fn for_graph(g: &Graph, members: impl IntoIterator<Item = NodeId>) -> Result<Self, CascadeError> {
        let c = Self::new(members);
        if let Some(&id) = c.members.iter().find(|&&id| id >= g.node_count()) {
            return Err(CascadeError::OutOfRange {
                id,
                n: g.node_count(),
            });
        }
        Ok(c)
    }

    pub fn all(n: usize) -> Self {
        ControlSet {
            members: (0..n).collect(),
        }
    }

    pub fn empty() -> Self {
        ControlSet::default()
    }

    pub fn members(&self) -> &[NodeId] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, i: NodeId) -> bool {
        self.members.binary_search(&i).is_ok()
    }

    pub fn without(&self, i: NodeId) -> Self {
        ControlSet {
            members: self.members.iter().copied().filter(|&j| j != i).collect(),
        }
    }

    pub fn is_subset(&self, other: &ControlSet) -> bool {
        self.members.iter().all(|&i| other.contains(i))
    }

    pub fn indicator(&self, n: usize) -> Configuration {
        Configuration::from_support(n, &self.members)
    }

    pub fn of_configuration(x: &Configuration) -> Self {
        ControlSet {
            members: x.support(),
        }
    }
}

impl fmt::Display for ControlSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{")?;
        for (k, i) in self.members.iter().enumerate() {
            if k > 0 {
                write!(f, ",")?;
            }
            write!(f, "{i}")?;
        }
        write!(f, "}}")
    }
}

/// Activation order `(i_1, …, i_m)` of the nodes outside a control set.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CrusadeWitness {
    pub order: Vec<NodeId>,
}

/// Why a witness fails to certify a control set.
#[derive(Clone, Debug, Error, PartialEq, Eq)]
pub enum CrusadeViolation {
    #[error("witness has {got} nodes, expected {expected}")]
    WrongLength { got: usize, expected: usize },
    #[error("node {0} appears more than once")]
    Repeated(NodeId),
    #[error("node {0} belongs to the control set")]
    InControlSet(NodeId),
    #[error("node {0} out of range")]
    OutOfRange(NodeId),
    #[error("step {step}: flipping node {node} lowers the potential from {before} to {after}")]
    PotentialDecrease {
        step: usize,
        node: NodeId,
        before: i64,
        after: i64,
    },
}

impl CrusadeViolation {
    pub fn is_malformed(&self) -> bool {
        !matches!(self, CrusadeViolation::PotentialDecrease { .. })
    }
}

/// `n1 ≥ n0` at `i` under `x`.
pub fn activatable(g: &Graph, x: &Configuration, i: NodeId) -> bool {
    let c = counts_unchecked(g, x, i);
    c.ones >= c.zeros
}

/// Result of a contagion run: final membership plus the order nodes joined.
struct Spread {
    active: Vec<bool>,
    order: Vec<NodeId>,
}

fn spread<F>(g: &Graph, c: &ControlSet, mut next: F) -> Spread
where
    F: FnMut(&mut Vec<NodeId>) -> Option<NodeId>,
{
    let n = g.node_count();
    let mut active = vec![false; n];
    for &i in c.members() {
        assert!(i < n, "control set member {i} out of range for {n} nodes");
        active[i] = true;
    }
    let mut active_around = vec![0usize; n];
    for &i in c.members() {
        for &j in g.neighbors(i) {
            active_around[j] += 1;
        }
    }
    let ready = |j: NodeId, around: &[usize]| 2 * around[j] >= g.degree(j);
    let mut queued = active.clone();
    let mut work: Vec<NodeId> = Vec::new();
    for j in 0..n {
        if !queued[j] && ready(j, &active_around) {
            queued[j] = true;
            work.push(j);
        }
    }
    let mut order = Vec::with_capacity(n - c.len());
    while let Some(i) = next(&mut work) {
        active[i] = true;
        order.push(i);
        for &j in g.neighbors(i) {
            active_around[j] += 1;
            if !queued[j] && ready(j, &active_around) {
                queued[j] = true;
                work.push(j);
            }
        }
    }
    Spread { active, order }
}

fn spread_fifo(g: &Graph, c: &ControlSet) -> Spread {
    // the Vec is used as the backing store of a FIFO queue
    let mut head = 0;
    spread(g, c, |work| {
        let item = work.get(head).copied();
        head += 1;
        item
    })
}

/// Least superset of `c` that no outside node can join, as a sorted node
/// list. FIFO service order.
///
/// Panics if a member of `c` is not a node of `g`.
pub fn closure(g: &Graph, c: &ControlSet) -> Vec<NodeId> {
    members_of(&spread_fifo(g, c).active)
}

/// Same fixpoint as [`closure`], serving the worklist in random order.
pub fn closure_randomized<R: Rng>(g: &Graph, c: &ControlSet, rng: &mut R) -> Vec<NodeId> {
    let s = spread(g, c, |work| {
        if work.is_empty() {
            None
        } else {
            let k = rng.gen_range(0..work.len());
            Some(work.swap_remove(k))
        }
    });
    members_of(&s.active)
}

/// Same fixpoint as [`closure`], serving the worklist last-in first-out.
pub fn closure_lifo(g: &Graph, c: &ControlSet) -> Vec<NodeId> {
    members_of(&spread(g, c, |work| work.pop()).active)
}

fn members_of(active: &[bool]) -> Vec<NodeId> {
    active
        .iter()
        .enumerate()
        .filter_map(|(i, &a)| a.then_some(i))
        .collect()
}

/// Pinning `c` to 1 drives best-response dynamics to all-ones almost surely.
pub fn is_valid(g: &Graph, c: &ControlSet) -> bool {
    let s = spread_fifo(g, c);
    s.order.len() + c.len() == g.node_count()
}

/// The closure's activation order, or `None` if `c` is not valid.
pub fn crusade_witness(g: &Graph, c: &ControlSet) -> Option<CrusadeWitness> {
    let s = spread_fifo(g, c);
    (s.order.len() + c.len() == g.node_count()).then_some(CrusadeWitness { order: s.order })
}

/// Replays `w` from `𝟙_c` and returns the potential after each step
/// (first entry is the starting potential). The replay only uses the
/// witness and direct neighbor scans.
pub fn verify_crusade(
    g: &Graph,
    c: &ControlSet,
    w: &CrusadeWitness,
) -> Result<Vec<i64>, CrusadeViolation> {
    let n = g.node_count();
    let expected = n.saturating_sub(c.len());
    if w.order.len() != expected {
        return Err(CrusadeViolation::WrongLength {
            got: w.order.len(),
            expected,
        });
    }
    let mut seen = vec![false; n];
    for &i in &w.order {
        if i >= n {
            return Err(CrusadeViolation::OutOfRange(i));
        }
        if c.contains(i) {
            return Err(CrusadeViolation::InControlSet(i));
        }
        if seen[i] {
            return Err(CrusadeViolation::Repeated(i));
        }
        seen[i] = true;
    }
    let mut x = c.indicator(n);
    let mut phi = g.edges().filter(|&(u, v)| x.get(u) == x.get(v)).count() as i64;
    let mut trace = vec![phi];
    for (step, &i) in w.order.iter().enumerate() {
        // agreeing edges at i before and after the flip
        let ones = g.neighbors(i).iter().filter(|&&j| x.get(j)).count() as i64;
        let zeros = g.degree(i) as i64 - ones;
        let after = phi - zeros + ones;
        if after < phi {
            return Err(CrusadeViolation::PotentialDecrease {
                step,
                node: i,
                before: phi,
                after,
            });
        }
        x.set(i, true);
        phi = after;
        trace.push(phi);
    }
    Ok(trace)
}

/// Valid, and no single member can be dropped. Validity is monotone under
/// inclusion, so single deletions cover every strict subset.
pub fn is_minimal(g: &Graph, c: &ControlSet) -> bool {
    is_valid(g, c) && c.members().iter().all(|&i| !is_valid(g, &c.without(i)))
}

/// Greedily drops members in ascending id order while the set stays valid.
pub fn trim_to_minimal(g: &Graph, c: &ControlSet) -> Result<ControlSet, CascadeError> {
    if !is_valid(g, c) {
        return Err(CascadeError::NotValid(c.clone()));
    }
    // A deletion that fails once fails for every later (smaller) set, so a
    // single ascending pass is the fixpoint of the restart-on-success loop.
    let mut current = c.clone();
    for &i in c.members() {
        let candidate = current.without(i);
        if is_valid(g, &candidate) {
            current = candidate;
        }
    }
    Ok(current)
}

/// `x ∈ 𝒵`: the support of `x` is a valid control set.
pub fn is_in_z(g: &Graph, x: &Configuration) -> bool {
    is_valid(g, &ControlSet::of_configuration(x))
}

/// `x ∈ 𝒵` and no 1-node of `x` is activatable, i.e. the zero-temperature
/// search chain cannot leave `x`.
pub fn is_absorbing_z0(g: &Graph, x: &Configuration) -> bool {
    is_in_z(g, x) && (0..g.node_count()).all(|i| !x.get(i) || !activatable(g, x, i))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{double_star, gen_clique, gen_cycle, gen_double_star, gen_erdos_renyi, gen_path, gen_random_tree, gen_star};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn set(ids: &[NodeId]) -> ControlSet {
        ControlSet::new(ids.iter().copied())
    }

    #[test]
    fn activatable_cases() {
        assert!(activatable(&Graph::edgeless(2).unwrap(), &Configuration::zeros(2), 0));
        let k5 = gen_clique(5).unwrap();
        assert!(activatable(&k5, &"11000".parse().unwrap(), 4));
        let star = gen_star(3).unwrap();
        assert!(!activatable(&star, &"0100".parse().unwrap(), 0));
    }

    #[test]
    fn tree_leaves_close_to_everything() {
        for seed in 0..20 {
            let t = gen_random_tree(12, seed).unwrap();
            let leaves = set(&(0..12).filter(|&i| t.degree(i) == 1).collect::<Vec<_>>());
            assert_eq!(closure(&t, &leaves).len(), 12);
            assert!(is_valid(&t, &leaves));
        }
    }

    #[test]
    fn closure_basics() {
        let k5 = gen_clique(5).unwrap();
        assert_eq!(closure(&k5, &ControlSet::all(5)), vec![0, 1, 2, 3, 4]);
        assert_eq!(closure(&k5, &set(&[3])), vec![3]);
        assert!(!is_valid(&k5, &set(&[3])));
        assert!(is_valid(&k5, &set(&[0, 4])));
    }

    #[test]
    fn path_endpoint_is_valid() {
        let p5 = gen_path(5).unwrap();
        assert!(is_valid(&p5, &set(&[4])));
        assert!(is_valid(&p5, &ControlSet::all(5)));
    }

    #[test]
    fn empty_set() {
        assert!(is_valid(&Graph::edgeless(4).unwrap(), &ControlSet::empty()));
        let p2 = gen_path(2).unwrap();
        assert!(closure(&p2, &ControlSet::empty()).is_empty());
        assert!(!is_minimal(&p2, &ControlSet::empty()));
    }

    #[test]
    fn witness_on_path() {
        let p3 = gen_path(3).unwrap();
        let w = crusade_witness(&p3, &set(&[0])).unwrap();
        assert_eq!(w.order, vec![1, 2]);
        assert_eq!(verify_crusade(&p3, &set(&[0]), &w).unwrap(), vec![1, 1, 2]);
        let bad = CrusadeWitness { order: vec![2, 1] };
        assert!(matches!(
            verify_crusade(&p3, &set(&[0]), &bad),
            Err(CrusadeViolation::PotentialDecrease { step: 0, node: 2, .. })
        ));
    }

    #[test]
    fn witness_edge_cases() {
        let k5 = gen_clique(5).unwrap();
        let full = ControlSet::all(5);
        let w = crusade_witness(&k5, &full).unwrap();
        assert!(w.order.is_empty());
        assert!(verify_crusade(&k5, &full, &w).is_ok());
        assert!(crusade_witness(&k5, &set(&[1])).is_none());
    }

    #[test]
    fn malformed_witnesses_are_distinguished() {
        let p3 = gen_path(3).unwrap();
        let c = set(&[0]);
        let cases = [
            (vec![1], CrusadeViolation::WrongLength { got: 1, expected: 2 }),
            (vec![1, 1], CrusadeViolation::Repeated(1)),
            (vec![0, 1], CrusadeViolation::InControlSet(0)),
            (vec![1, 7], CrusadeViolation::OutOfRange(7)),
        ];
        for (order, want) in cases {
            let got = verify_crusade(&p3, &c, &CrusadeWitness { order }).unwrap_err();
            assert!(got.is_malformed());
            assert_eq!(got, want);
        }
    }

    #[test]
    fn star_two_leaves_minimal() {
        let star = gen_star(3).unwrap();
        assert!(is_minimal(&star, &set(&[1, 2])));
        assert!(is_minimal(&star, &set(&[0])));
        assert!(!is_minimal(&star, &set(&[0, 1])));
    }

    #[test]
    fn double_star_hubs() {
        use double_star::*;
        let g = gen_double_star();
        let both = set(&[LEFT_HUB, RIGHT_HUB]);
        let one = set(&[LEFT_HUB]);
        assert!(!is_minimal(&g, &both));
        assert!(is_minimal(&g, &one));
        // ascending removal drops the left hub first
        assert_eq!(trim_to_minimal(&g, &both).unwrap(), set(&[RIGHT_HUB]));
        assert!(is_absorbing_z0(&g, &both.indicator(8)));
        assert!(is_absorbing_z0(&g, &one.indicator(8)));
    }

    #[test]
    fn trimming() {
        let p5 = gen_path(5).unwrap();
        let t = trim_to_minimal(&p5, &ControlSet::all(5)).unwrap();
        assert_eq!(t.len(), 1);
        let star = gen_star(3).unwrap();
        assert_eq!(trim_to_minimal(&star, &set(&[1, 2])).unwrap(), set(&[1, 2]));
        let k5 = gen_clique(5).unwrap();
        assert!(matches!(
            trim_to_minimal(&k5, &set(&[0])),
            Err(CascadeError::NotValid(_))
        ));
    }

    #[test]
    fn full_clique_is_not_absorbing() {
        assert!(!is_absorbing_z0(&gen_clique(5).unwrap(), &Configuration::ones(5)));
    }

    #[test]
    fn for_graph_rejects_out_of_range() {
        let g = gen_cycle(4).unwrap();
        assert_eq!(
            ControlSet::for_graph(&g, [1, 4]),
            Err(CascadeError::OutOfRange { id: 4, n: 4 })
        );
        assert_eq!(ControlSet::for_graph(&g, [3, 1, 3]).unwrap().members(), &[1, 3]);
    }

    fn instance() -> impl Strategy<Value = (Graph, ControlSet, ControlSet, u64)> {
        (1usize..14, 0.05f64..0.95, any::<u64>()).prop_flat_map(|(n, p, seed)| {
            let g = gen_erdos_renyi(n, p, seed).unwrap();
            let small = proptest::collection::vec(any::<bool>(), n);
            let extra = proptest::collection::vec(any::<bool>(), n);
            (Just(g), small, extra, any::<u64>()).prop_map(|(g, a, b, s)| {
                let c = ControlSet::new((0..a.len()).filter(|&i| a[i]));
                let d = ControlSet::new((0..a.len()).filter(|&i| a[i] || b[i]));
                (g, c, d, s)
            })
        })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1024))]

        #[test]
        fn closure_is_extensive_idempotent_monotone((g, c, d, _s) in instance()) {
            let cl = closure(&g, &c);
            let cl_set = ControlSet::new(cl.iter().copied());
            prop_assert!(c.is_subset(&cl_set));
            prop_assert_eq!(closure(&g, &cl_set), cl.clone());
            let dl = ControlSet::new(closure(&g, &d));
            prop_assert!(cl_set.is_subset(&dl));
            if is_valid(&g, &c) {
                prop_assert!(is_valid(&g, &d));
            }
        }

        #[test]
        fn closure_is_order_independent((g, c, _d, s) in instance()) {
            let reference = closure(&g, &c);
            prop_assert_eq!(closure_lifo(&g, &c), reference.clone());
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            for _ in 0..8 {
                prop_assert_eq!(closure_randomized(&g, &c, &mut rng), reference.clone());
            }
        }

        #[test]
        fn witnesses_verify((g, c, _d, _s) in instance()) {
            match crusade_witness(&g, &c) {
                Some(w) => {
                    let trace = verify_crusade(&g, &c, &w).unwrap();
                    prop_assert!(trace.windows(2).all(|p| p[0] <= p[1]));
                    prop_assert_eq!(*trace.last().unwrap() as usize, g.edge_count());
                }
                None => prop_assert!(!is_valid(&g, &c)),
            }
        }

        #[test]
        fn minimal_sets_are_absorbing((g, c, _d, _s) in instance()) {
            if is_valid(&g, &c) {
                let t = trim_to_minimal(&g, &c).unwrap();
                prop_assert!(t.is_subset(&c));
                prop_assert!(is_minimal(&g, &t));
                prop_assert!(is_absorbing_z0(&g, &t.indicator(g.node_count())));
            }
        }
    }
}
