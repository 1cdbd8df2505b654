use std::collections::VecDeque;

use super::SparseMatrix;

/// Reverse Cuthill–McKee ordering of the matrix graph.
///
/// Returns `perm` with `perm[new] = old`. Each connected component starts
/// from a pseudo-peripheral vertex found by repeated breadth-first sweeps;
/// ties are broken by index so the ordering is deterministic.
pub fn reverse_cuthill_mckee(a: &SparseMatrix) -> Vec<usize> {
    let n = a.n();
    let adjacency: Vec<Vec<usize>> = (0..n)
        .map(|i| a.row(i).map(|(j, _)| j).filter(|&j| j != i).collect())
        .collect();
    let degree: Vec<usize> = adjacency.iter().map(Vec::len).collect();

    let mut visited = vec![false; n];
    let mut order = Vec::with_capacity(n);
    let mut by_degree: Vec<usize> = (0..n).collect();
    by_degree.sort_by_key(|&v| (degree[v], v));

    for &seed in &by_degree {
        if visited[seed] {
            continue;
        }
        let start = pseudo_peripheral(seed, &adjacency, &degree);
        visited[start] = true;
        let mut queue = VecDeque::from([start]);
        let mut neighbours = Vec::new();
        while let Some(v) = queue.pop_front() {
            order.push(v);
            neighbours.clear();
            neighbours.extend(adjacency[v].iter().copied().filter(|&w| !visited[w]));
            neighbours.sort_by_key(|&w| (degree[w], w));
            for &w in &neighbours {
                visited[w] = true;
                queue.push_back(w);
            }
        }
    }
    order.reverse();
    order
}

fn pseudo_peripheral(seed: usize, adjacency: &[Vec<usize>], degree: &[usize]) -> usize {
    let mut start = seed;
    let mut eccentricity = 0;
    for _ in 0..8 {
        let (far, depth) = farthest(start, adjacency, degree);
        if depth <= eccentricity {
            break;
        }
        eccentricity = depth;
        start = far;
    }
    start
}

/// Last vertex of minimal degree in the deepest BFS level, and that depth.
fn farthest(start: usize, adjacency: &[Vec<usize>], degree: &[usize]) -> (usize, usize) {
    let mut level = vec![usize::MAX; adjacency.len()];
    level[start] = 0;
    let mut queue = VecDeque::from([start]);
    let mut best = (start, 0);
    while let Some(v) = queue.pop_front() {
        let l = level[v];
        if l > best.1 || (l == best.1 && (degree[v], v) < (degree[best.0], best.0)) {
            best = (v, l);
        }
        for &w in &adjacency[v] {
            if level[w] == usize::MAX {
                level[w] = l + 1;
                queue.push_back(w);
            }
        }
    }
    best
}
