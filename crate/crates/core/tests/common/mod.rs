#![allow(dead_code)]

use std::io::Write;
use std::path::PathBuf;

use netcoord::graph::{gen_clique, gen_cycle, gen_erdos_renyi, gen_path, Graph};

pub fn fixture_path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub fn load(name: &str) -> Graph {
    Graph::read_edge_list(fixture_path(name)).unwrap_or_else(|e| panic!("{name}: {e}"))
}

/// Rooted tree: 0 root, 1..=9 are A..I.
pub fn tree10() -> Graph {
    load("tree10.txt")
}

pub const TREE_LEAVES: [usize; 5] = [4, 5, 7, 8, 9];

pub fn double_star() -> Graph {
    load("double_star.txt")
}

pub fn two_path6() -> Graph {
    load("two_path6.txt")
}

pub fn star3() -> Graph {
    load("star3.txt")
}

/// Every named small graph used across the suites.
pub fn fixtures() -> Vec<(&'static str, Graph)> {
    vec![
        ("tree10", tree10()),
        ("double_star", double_star()),
        ("two_path6", two_path6()),
        ("star3", star3()),
        ("triangle", gen_clique(3).unwrap()),
        ("k5", gen_clique(5).unwrap()),
        ("c5", gen_cycle(5).unwrap()),
        ("p4", gen_path(4).unwrap()),
        ("p5", gen_path(5).unwrap()),
    ]
}

/// `count` ER graphs with sizes cycling through `sizes`.
pub fn er_family(count: usize, sizes: &[usize], p: f64, seed: u64) -> Vec<Graph> {
    (0..count)
        .map(|k| gen_erdos_renyi(sizes[k % sizes.len()], p, seed.wrapping_add(k as u64)).unwrap())
        .collect()
}

/// One line per criterion, written past the test harness capture so it shows
/// up in plain `cargo test` output.
pub fn report(id: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut err = std::io::stderr().lock();
    let _ = writeln!(err, "[{tag}] {id} {detail}");
}
