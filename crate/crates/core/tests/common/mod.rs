#![allow(dead_code)]

use pbradmm::{Graph, PartitionProblem, Solution};

/// Radius used for test graphs. At 0.1 a 10-node unit-square graph is
/// almost never connected.
pub const RADIUS: f64 = 0.4;

/// Instance `k` of a fixed family: 4 to 10 nodes, n = 2, r = 3, conditioning 10.
pub fn instance(k: u64) -> (PartitionProblem, Solution) {
    let nodes = 4 + (k % 7) as usize;
    let g = Graph::random_geometric_connected(nodes, RADIUS, 10_000 + k, 10_000).unwrap();
    let p = PartitionProblem::generate(&g, 2, 3, 20_000 + k, 10.0).unwrap();
    let sol = p.solve_centralized().unwrap();
    (p, sol)
}

/// A 10-node instance of the same family.
pub fn ten_node_instance(k: u64) -> (PartitionProblem, Solution) {
    let g = Graph::random_geometric_connected(10, RADIUS, 30_000 + k, 10_000).unwrap();
    let p = PartitionProblem::generate(&g, 2, 3, 40_000 + k, 10.0).unwrap();
    let sol = p.solve_centralized().unwrap();
    (p, sol)
}
