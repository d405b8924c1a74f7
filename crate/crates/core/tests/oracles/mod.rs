//! Independent brute-force oracles used by the integration suites. Nothing
//! here shares code with the library's production algorithms.
#![allow(dead_code)] // each suite uses its own subset

use fairpipe::distances::ScorePmf;
use fairpipe::rational::{q, qabs, qi, Q};
use num::{One, Signed, Zero};

/// Maximum couplable mass between two pmfs using only pairs within `cap`,
/// computed by Ford-Fulkerson augmentation over the bipartite graph with
/// exact rational capacities. Independent of the library's greedy sweep.
pub fn maxflow_coupling(g1: &ScorePmf, g2: &ScorePmf, cap: &Q) -> Q {
    let xs: Vec<(Q, Q)> = g1.mass.iter().map(|(v, p)| (v.clone(), p.clone())).collect();
    let ys: Vec<(Q, Q)> = g2.mass.iter().map(|(v, p)| (v.clone(), p.clone())).collect();
    let n = xs.len();
    let m = ys.len();
    // Node ids: 0 = source, 1..=n = xs, n+1..=n+m = ys, n+m+1 = sink.
    let nodes = n + m + 2;
    let sink = n + m + 1;
    let mut capacity = vec![vec![Q::zero(); nodes]; nodes];
    for (i, (_, p)) in xs.iter().enumerate() {
        capacity[0][i + 1] = p.clone();
    }
    for (j, (_, p)) in ys.iter().enumerate() {
        capacity[n + 1 + j][sink] = p.clone();
    }
    for (i, (x, _)) in xs.iter().enumerate() {
        for (j, (y, _)) in ys.iter().enumerate() {
            if qabs(&(x.clone() - y.clone())) <= *cap {
                capacity[i + 1][n + 1 + j] = qi(2); // effectively unbounded
            }
        }
    }
    let mut flow = Q::zero();
    loop {
        // BFS for an augmenting path.
        let mut parent = vec![usize::MAX; nodes];
        parent[0] = 0;
        let mut queue = std::collections::VecDeque::from([0usize]);
        while let Some(u) = queue.pop_front() {
            for v in 0..nodes {
                if parent[v] == usize::MAX && capacity[u][v].is_positive() {
                    parent[v] = u;
                    queue.push_back(v);
                }
            }
        }
        if parent[sink] == usize::MAX {
            return flow;
        }
        let mut bottleneck: Option<Q> = None;
        let mut v = sink;
        while v != 0 {
            let u = parent[v];
            if bottleneck.as_ref().map_or(true, |b| capacity[u][v] < *b) {
                bottleneck = Some(capacity[u][v].clone());
            }
            v = u;
        }
        let bottleneck = bottleneck.unwrap();
        let mut v = sink;
        while v != 0 {
            let u = parent[v];
            capacity[u][v] -= bottleneck.clone();
            capacity[v][u] += bottleneck.clone();
            v = u;
        }
        flow += bottleneck;
    }
}

/// Grid oracle for the mass-moving distance: binary search over the dyadic
/// grid `j / 2^20` for the smallest feasible `v`, where feasibility at `v`
/// means a coupling of mass at least `1 - v/2` exists within distance `v`
/// (checked by max-flow). Accurate to `2^-20 < 1e-6`.
pub fn mmd_grid_oracle(g1: &ScorePmf, g2: &ScorePmf) -> Q {
    let denom: i64 = 1 << 20;
    let feasible = |j: i64| -> bool {
        let v = q(j, denom);
        let coupled = maxflow_coupling(g1, g2, &v);
        coupled >= Q::one() - v / qi(2)
    };
    let mut lo = 0i64; // feasibility is monotone in v
    let mut hi = denom;
    if feasible(0) {
        return Q::zero();
    }
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if feasible(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    q(hi, denom)
}

/// Deterministic rational pmf with support size at most `max_support`.
pub fn random_pmf(rng: &mut impl rand::Rng, max_support: usize) -> ScorePmf {
    let support = rng.gen_range(1..=max_support);
    let mut pmf = ScorePmf::new();
    let mut masses: Vec<i64> = (0..support).map(|_| rng.gen_range(1..=16)).collect();
    let total: i64 = masses.iter().sum();
    // Distinct support points on the 1/32 grid.
    let mut values = std::collections::BTreeSet::new();
    while values.len() < support {
        values.insert(rng.gen_range(0..=32i64));
    }
    for value in values {
        let mass = masses.pop().unwrap();
        pmf.add(q(value, 32), q(mass, total));
    }
    pmf
}
