//! Dense transportation problems.
//!
//! [`solve`] runs the primal transportation simplex on a spanning-tree basis
//! of the complete bipartite graph `K_{m,n}`. [`bruteforce`] enumerates all
//! spanning trees and is only meant as an oracle for small instances.

use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Consecutive degenerate pivots tolerated before switching to Bland's rule.
const DEGENERATE_STREAK: usize = 50;
/// Largest `m + n` accepted by [`bruteforce`].
pub const BRUTEFORCE_MAX_NODES: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub struct TransportSolution {
    pub value: f64,
    /// Dense `m × n` flow matrix.
    pub flow: Vec<Vec<f64>>,
    /// Basic cells `(row, col)`; always `m + n − 1` of them, forming a
    /// spanning tree. Degenerate cells carry zero flow.
    pub basis: Vec<(usize, usize)>,
    /// Row potentials with `u[0] = 0`.
    pub u: Vec<f64>,
    /// Column potentials; `u[i] + v[j] = c[i][j]` on basic cells.
    pub v: Vec<f64>,
    pub pivots: usize,
}

fn validate(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> Result<()> {
    let (m, n) = (supply.len(), demand.len());
    if m == 0 || n == 0 {
        return Err(Error::InvalidParameter("transport problem needs at least one row and one column".into()));
    }
    if cost.len() != m {
        return Err(Error::DimensionMismatch { expected: m, found: cost.len() });
    }
    for row in cost {
        if row.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: row.len() });
        }
        if row.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter("costs must be finite".into()));
        }
    }
    if supply.iter().chain(demand).any(|w| !(w.is_finite() && *w >= 0.0)) {
        return Err(Error::InvalidParameter("masses must be finite and nonnegative".into()));
    }
    Ok(())
}

struct Tree {
    m: usize,
    n: usize,
    adj: Vec<Vec<usize>>, // node -> basis indices
}

impl Tree {
    fn build(m: usize, n: usize, basis: &[(usize, usize)]) -> Tree {
        let mut adj = vec![Vec::new(); m + n];
        for (k, &(i, j)) in basis.iter().enumerate() {
            adj[i].push(k);
            adj[m + j].push(k);
        }
        Tree { m, n, adj }
    }

    fn other(&self, basis: &[(usize, usize)], k: usize, node: usize) -> usize {
        let (i, j) = basis[k];
        if node == i { self.m + j } else { i }
    }

    /// BFS from row node `root`; returns the parent edge of every node.
    fn parents(&self, basis: &[(usize, usize)], root: usize) -> Vec<Option<usize>> {
        let mut parent = vec![None; self.m + self.n];
        let mut seen = vec![false; self.m + self.n];
        seen[root] = true;
        let mut queue = VecDeque::from([root]);
        while let Some(a) = queue.pop_front() {
            for &k in &self.adj[a] {
                let b = self.other(basis, k, a);
                if !seen[b] {
                    seen[b] = true;
                    parent[b] = Some(k);
                    queue.push_back(b);
                }
            }
        }
        parent
    }
}

fn potentials(m: usize, n: usize, cost: &[Vec<f64>], basis: &[(usize, usize)], tree: &Tree) -> (Vec<f64>, Vec<f64>) {
    let mut u = vec![f64::NAN; m];
    let mut v = vec![f64::NAN; n];
    u[0] = 0.0;
    let mut queue = VecDeque::from([0usize]);
    let mut seen = vec![false; m + n];
    seen[0] = true;
    while let Some(a) = queue.pop_front() {
        for &k in &tree.adj[a] {
            let b = tree.other(basis, k, a);
            if seen[b] {
                continue;
            }
            seen[b] = true;
            let (i, j) = basis[k];
            if b >= m {
                v[j] = cost[i][j] - u[i];
            } else {
                u[i] = cost[i][j] - v[j];
            }
            queue.push_back(b);
        }
    }
    (u, v)
}

/// Northwest-corner start. Every step advances exactly one index, so the
/// basis has `m + n − 1` cells even when partial sums coincide.
fn northwest_corner(supply: &[f64], demand: &[f64]) -> (Vec<(usize, usize)>, Vec<f64>) {
    let (m, n) = (supply.len(), demand.len());
    let mut rs = supply.to_vec();
    let mut rd = demand.to_vec();
    let (mut i, mut j) = (0, 0);
    let mut basis = Vec::with_capacity(m + n - 1);
    let mut flow = Vec::with_capacity(m + n - 1);
    loop {
        let f = rs[i].min(rd[j]).max(0.0);
        basis.push((i, j));
        flow.push(f);
        rs[i] -= f;
        rd[j] -= f;
        if i == m - 1 && j == n - 1 {
            break;
        }
        if j == n - 1 || (i < m - 1 && rs[i] <= rd[j]) {
            i += 1;
        } else {
            j += 1;
        }
    }
    (basis, flow)
}

/// Solves `min Σ c_ij π_ij` subject to row sums `supply` and column sums
/// `demand`. Totals must agree; the caller is responsible for checking this
/// to its own tolerance.
///
/// The entering cell is the most negative reduced cost, ties broken by
/// row-major order. After a run of degenerate pivots the rule switches to
/// Bland's (first negative cell in row-major order) until a pivot moves
/// mass. The leaving cell is the minimal-flow backward cell of the cycle,
/// ties broken by `(row, col)`.
pub fn solve(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> Result<TransportSolution> {
    validate(cost, supply, demand)?;
    let (m, n) = (supply.len(), demand.len());
    let cmax = cost.iter().flatten().fold(0.0f64, |a, c| a.max(c.abs()));
    let eps = 1e-12 * (1.0 + cmax);
    let (mut basis, mut bflow) = northwest_corner(supply, demand);
    let max_pivots = 1000 + 50 * (m + n) * (m + n);
    let mut pivots = 0;
    let mut degenerate_run = 0;
    let mut bland = false;
    loop {
        let tree = Tree::build(m, n, &basis);
        let (u, v) = potentials(m, n, cost, &basis, &tree);
        let mut in_basis = vec![false; m * n];
        for &(i, j) in &basis {
            in_basis[i * n + j] = true;
        }
        let mut entering: Option<(usize, usize)> = None;
        let mut best = -eps;
        'scan: for i in 0..m {
            for j in 0..n {
                if in_basis[i * n + j] {
                    continue;
                }
                let r = cost[i][j] - u[i] - v[j];
                if r < best {
                    entering = Some((i, j));
                    if bland {
                        break 'scan;
                    }
                    best = r;
                }
            }
        }
        let Some((ei, ej)) = entering else {
            let mut flow = vec![vec![0.0; n]; m];
            let mut value = 0.0;
            for (&(i, j), &f) in basis.iter().zip(&bflow) {
                flow[i][j] = f;
                value += f * cost[i][j];
            }
            return Ok(TransportSolution { value, flow, basis, u, v, pivots });
        };
        if pivots >= max_pivots {
            return Err(Error::Solver(format!("no convergence after {pivots} pivots")));
        }
        pivots += 1;

        // Tree path from column node ej back to row node ei.
        let parent = tree.parents(&basis, ei);
        let mut path = Vec::new();
        let mut node = m + ej;
        while node != ei {
            let k = parent[node].expect("basis is a spanning tree");
            path.push(k);
            node = tree.other(&basis, k, node);
        }
        // Path edges alternate starting with a backward (decreasing) edge.
        let mut leave: Option<usize> = None;
        for &k in path.iter().step_by(2) {
            leave = match leave {
                None => Some(k),
                Some(l) => {
                    let better = bflow[k] < bflow[l] || (bflow[k] == bflow[l] && basis[k] < basis[l]);
                    Some(if better { k } else { l })
                }
            };
        }
        let leave = leave.expect("cycle has a backward edge");
        let theta = bflow[leave];
        for (pos, &k) in path.iter().enumerate() {
            if pos % 2 == 0 {
                bflow[k] -= theta;
            } else {
                bflow[k] += theta;
            }
        }
        bflow[leave] = 0.0;
        basis[leave] = (ei, ej);
        bflow[leave] = theta;
        if theta > 0.0 {
            degenerate_run = 0;
            bland = false;
        } else {
            degenerate_run += 1;
            if degenerate_run >= DEGENERATE_STREAK {
                bland = true;
            }
        }
    }
}

/// Minimum over spanning trees of `K_{m,n}` of the cost of the unique
/// tree-supported flow, over trees whose flow is nonnegative. Every vertex
/// of the transportation polytope is supported on a forest that extends to
/// such a tree, so this equals the LP optimum.
pub fn bruteforce(cost: &[Vec<f64>], supply: &[f64], demand: &[f64]) -> Result<f64> {
    validate(cost, supply, demand)?;
    let (m, n) = (supply.len(), demand.len());
    if m + n > BRUTEFORCE_MAX_NODES {
        return Err(Error::SizeLimit(format!(
            "brute force enumerates spanning trees only for m + n <= {BRUTEFORCE_MAX_NODES}, got {}",
            m + n
        )));
    }
    let edges: Vec<(usize, usize)> = (0..m).flat_map(|i| (0..n).map(move |j| (i, j))).collect();
    let need = m + n - 1;
    let mut best = f64::INFINITY;
    for mask in 0u32..(1u32 << edges.len()) {
        if mask.count_ones() as usize != need {
            continue;
        }
        let tree: Vec<(usize, usize)> = (0..edges.len()).filter(|k| mask >> k & 1 == 1).map(|k| edges[k]).collect();
        if !is_spanning_tree(m, n, &tree) {
            continue;
        }
        if let Some(c) = tree_flow_cost(m, cost, supply, demand, &tree) {
            best = best.min(c);
        }
    }
    Ok(best)
}

fn is_spanning_tree(m: usize, n: usize, tree: &[(usize, usize)]) -> bool {
    let mut parent: Vec<usize> = (0..m + n).collect();
    fn find(p: &mut [usize], mut a: usize) -> usize {
        while p[a] != a {
            p[a] = p[p[a]];
            a = p[a];
        }
        a
    }
    for &(i, j) in tree {
        let (a, b) = (find(&mut parent, i), find(&mut parent, m + j));
        if a == b {
            return false;
        }
        parent[a] = b;
    }
    true
}

/// Leaf peeling: a leaf's single edge carries the leaf's remaining mass.
fn tree_flow_cost(m: usize, cost: &[Vec<f64>], supply: &[f64], demand: &[f64], tree: &[(usize, usize)]) -> Option<f64> {
    let nodes = m + demand.len();
    let mut rem: Vec<f64> = supply.iter().chain(demand).copied().collect();
    let mut deg = vec![0usize; nodes];
    for &(i, j) in tree {
        deg[i] += 1;
        deg[m + j] += 1;
    }
    let mut used = vec![false; tree.len()];
    let mut total = 0.0;
    for _ in 0..tree.len() {
        let (k, leaf) = tree.iter().enumerate().filter(|(k, _)| !used[*k]).find_map(|(k, &(i, j))| {
            if deg[i] == 1 {
                Some((k, i))
            } else if deg[m + j] == 1 {
                Some((k, m + j))
            } else {
                None
            }
        })?;
        let (i, j) = tree[k];
        let other = if leaf == i { m + j } else { i };
        let f = rem[leaf];
        if f < -1e-12 {
            return None;
        }
        rem[other] -= f;
        rem[leaf] = 0.0;
        deg[i] -= 1;
        deg[m + j] -= 1;
        used[k] = true;
        total += f * cost[i][j];
    }
    Some(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn marginals_ok(sol: &TransportSolution, s: &[f64], d: &[f64]) -> bool {
        let rows = sol.flow.iter().zip(s).all(|(r, w)| (r.iter().sum::<f64>() - w).abs() <= 1e-10);
        let cols = (0..d.len()).all(|j| (sol.flow.iter().map(|r| r[j]).sum::<f64>() - d[j]).abs() <= 1e-10);
        rows && cols && sol.flow.iter().flatten().all(|f| *f >= -1e-12)
    }

    #[test]
    fn one_by_one() {
        let sol = solve(&[vec![3.0]], &[0.5], &[0.5]).unwrap();
        assert_eq!(sol.value, 1.5);
        assert_eq!(bruteforce(&[vec![3.0]], &[0.5], &[0.5]).unwrap(), 1.5);
    }

    #[test]
    fn two_by_one() {
        let c = [vec![1.0], vec![2.0]];
        assert_eq!(solve(&c, &[0.5, 0.5], &[1.0]).unwrap().value, 1.5);
        assert_eq!(bruteforce(&c, &[0.5, 0.5], &[1.0]).unwrap(), 1.5);
    }

    #[test]
    fn diagonal_matching() {
        let c = [vec![0.0, 1.0], vec![1.0, 0.0]];
        let sol = solve(&c, &[0.5, 0.5], &[0.5, 0.5]).unwrap();
        assert_eq!(sol.value, 0.0);
        assert_eq!(sol.basis.len(), 3);
        assert_eq!(bruteforce(&c, &[0.5, 0.5], &[0.5, 0.5]).unwrap(), 0.0);
    }

    #[test]
    fn needs_pivots() {
        let c = [vec![4.0, 1.0, 3.0], vec![2.0, 5.0, 1.0], vec![1.0, 2.0, 6.0]];
        let s = [1.0, 1.0, 1.0];
        let sol = solve(&c, &s, &s).unwrap();
        assert_eq!(sol.value, 3.0);
        assert!(sol.pivots > 0);
        assert!(marginals_ok(&sol, &s, &s));
    }

    #[test]
    fn size_limit() {
        let c = vec![vec![1.0; 5]; 4];
        assert!(matches!(bruteforce(&c, &[1.0; 4], &[0.8; 5]), Err(Error::SizeLimit(_))));
    }

    #[test]
    fn rejects_malformed() {
        assert!(solve(&[vec![1.0, 2.0]], &[1.0], &[1.0]).is_err());
        assert!(solve(&[vec![f64::NAN]], &[1.0], &[1.0]).is_err());
        assert!(solve(&[vec![1.0]], &[-1.0], &[-1.0]).is_err());
    }

    #[test]
    fn highly_degenerate_assignment() {
        // Identity-like costs with equal masses force many zero pivots.
        let n = 30;
        let c: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| ((i * 7 + j * 13) % n) as f64).collect())
            .collect();
        let w = vec![1.0; n];
        let sol = solve(&c, &w, &w).unwrap();
        assert!(marginals_ok(&sol, &w, &w));
        assert_eq!(sol.value, 0.0);
    }

    proptest! {
        #[test]
        fn matches_bruteforce(
            m in 1usize..5,
            n in 1usize..5,
            seed in any::<u64>(),
        ) {
            prop_assume!(m + n <= 8);
            use rand::Rng;
            let mut rng = crate::rng::stream(seed, 0);
            let c: Vec<Vec<f64>> = (0..m).map(|_| (0..n).map(|_| rng.random_range(0.0..5.0)).collect()).collect();
            let s: Vec<f64> = (0..m).map(|_| rng.random_range(0.1..1.0)).collect();
            let total: f64 = s.iter().sum();
            let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..1.0)).collect();
            let dt: f64 = d.iter().sum();
            d.iter_mut().for_each(|x| *x *= total / dt);
            let sol = solve(&c, &s, &d).unwrap();
            prop_assert!(marginals_ok(&sol, &s, &d));
            prop_assert_eq!(sol.basis.len(), m + n - 1);
            for &(i, j) in &sol.basis {
                prop_assert!((sol.u[i] + sol.v[j] - c[i][j]).abs() <= 1e-12);
            }
            for i in 0..m { for j in 0..n {
                prop_assert!(c[i][j] - sol.u[i] - sol.v[j] >= -1e-10);
            }}
            let bf = bruteforce(&c, &s, &d).unwrap();
            prop_assert!((sol.value - bf).abs() <= 1e-10, "{} vs {}", sol.value, bf);
        }
    }
}
