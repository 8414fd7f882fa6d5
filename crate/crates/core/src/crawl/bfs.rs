use std::collections::HashSet;
use std::hash::Hash;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("expanding {node:?} failed: {error}")]
pub struct BfsError<N: std::fmt::Debug, E: std::fmt::Display> {
    pub node: N,
    pub error: E,
}

/// Level-order traversal up to `depth` hops from any start node.
///
/// Returns each reachable node once with its hop distance, excluding the
/// start nodes, in nondecreasing depth; within a level, nodes appear in
/// discovery order (parent order, then neighbor order). `neighbors` receives
/// the node and its depth and is called only for nodes shallower than `depth`.
pub fn bfs_frontier<N, E, F>(start: &[N], depth: usize, mut neighbors: F) -> Result<Vec<(N, usize)>, BfsError<N, E>>
where
    N: Clone + Eq + Hash + std::fmt::Debug,
    E: std::fmt::Display,
    F: FnMut(&N, usize) -> Result<Vec<N>, E>,
{
    let mut visited: HashSet<N> = start.iter().cloned().collect();
    let mut level: Vec<N> = Vec::new();
    for s in start {
        if !level.contains(s) {
            level.push(s.clone());
        }
    }
    let mut out = Vec::new();
    for d in 1..=depth {
        let mut next = Vec::new();
        for node in &level {
            let found = neighbors(node, d - 1).map_err(|error| BfsError {
                node: node.clone(),
                error,
            })?;
            for n in found {
                if visited.insert(n.clone()) {
                    next.push(n);
                }
            }
        }
        out.extend(next.iter().cloned().map(|n| (n, d)));
        if next.is_empty() {
            break;
        }
        level = next;
    }
    Ok(out)
}
