//! Temporal graphs coupling two aligned series, their difference operators,
//! and joint trend filtering over the graph.
//!
//! Vertices `0..m` are the points of `x` in time order and `m..m+n` the points
//! of `y`. Edges join consecutive points of each series, each aligned pair
//! `(x_t, y_s)` of a warping path, and the neighbours `x_t - y_{s±d}`,
//! `x_{t±d} - y_s` for `d = 1..=neighborhood` that hedge against small
//! alignment errors.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::dtw::WarpPath;
use crate::error::{Error, Result};
use crate::linalg::SparseMatrix;
use crate::series::TimeSeries;
use crate::trend::{generalized_lasso_admm_from, AdmmSolution, Fidelity, Penalty, SolverConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Weighted undirected graph with edges stored once, sorted by `(a, b)`,
/// `a < b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalGraph {
    num_vertices: usize,
    edges: Vec<Edge>,
}

impl TemporalGraph {
    pub fn new(num_vertices: usize, edges: impl IntoIterator<Item = Edge>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for e in edges {
            if e.a == e.b {
                return Err(Error::invalid(format!("self-loop at vertex {}", e.a)));
            }
            if e.a.max(e.b) >= num_vertices {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) out of range for {num_vertices} vertices",
                    e.a, e.b
                )));
            }
            if !(e.weight > 0.0 && e.weight.is_finite()) {
                return Err(Error::invalid(format!(
                    "edge ({}, {}) has weight {}",
                    e.a, e.b, e.weight
                )));
            }
            insert_max(&mut map, e.a, e.b, e.weight);
        }
        Ok(Self::from_map(num_vertices, map))
    }

    fn from_map(num_vertices: usize, map: BTreeMap<(usize, usize), f64>) -> Self {
        Self {
            num_vertices,
            edges: map.into_iter().map(|((a, b), weight)| Edge { a, b, weight }).collect(),
        }
    }

    /// The unit-weight path graph on `n` vertices.
    pub fn chain(n: usize) -> Self {
        Self {
            num_vertices: n,
            edges: (1..n)
                .map(|i| Edge {
                    a: i - 1,
                    b: i,
                    weight: 1.0,
                })
                .collect(),
        }
    }

    pub fn num_vertices(&self) -> usize {
        self.num_vertices
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn with_scaled_weights(&self, factor: f64) -> Result<Self> {
        if !(factor > 0.0 && factor.is_finite()) {
            return Err(Error::invalid(format!("scale factor must be positive, got {factor}")));
        }
        Ok(Self {
            num_vertices: self.num_vertices,
            edges: self
                .edges
                .iter()
                .map(|e| Edge {
                    weight: e.weight * factor,
                    ..*e
                })
                .collect(),
        })
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.num_vertices];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }

    /// Full weighted Laplacian `(Δ¹)ᵀΔ¹` as a sparse matrix, one row per
    /// vertex.
    pub fn laplacian(&self) -> SparseMatrix {
        laplacian_rows(self, |_| true)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("graph serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: TemporalGraph =
            serde_json::from_str(text).map_err(|e| Error::invalid(format!("invalid graph JSON: {e}")))?;
        let n = raw.num_vertices;
        Self::new(n, raw.edges)
    }
}

fn insert_max(map: &mut BTreeMap<(usize, usize), f64>, a: usize, b: usize, w: f64) {
    let key = (a.min(b), a.max(b));
    let slot = map.entry(key).or_insert(w);
    if w > *slot {
        *slot = w;
    }
}

/// Edge weights and penalties of the joint detrending problem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GraphDetrendConfig {
    pub lambda1_gd: f64,
    pub lambda2_gd: f64,
    /// Weight of aligned `x_t - y_s` edges; zero removes them.
    pub cross_weight: f64,
    /// Weight of the off-by-`d` hedging edges; zero removes them.
    pub robust_edge_weight: f64,
    pub neighborhood: usize,
    pub solver: SolverConfig,
}

impl Default for GraphDetrendConfig {
    fn default() -> Self {
        Self {
            lambda1_gd: 1.0,
            lambda2_gd: 5.0,
            cross_weight: 1.0,
            robust_edge_weight: 0.5,
            neighborhood: 1,
            // graph problems converge several times faster at this penalty
            solver: SolverConfig {
                rho: 10.0,
                ..SolverConfig::default()
            },
        }
    }
}

impl GraphDetrendConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda1_gd", self.lambda1_gd),
            ("lambda2_gd", self.lambda2_gd),
            ("cross_weight", self.cross_weight),
            ("robust_edge_weight", self.robust_edge_weight),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        self.solver.validate()
    }
}

/// Builds the temporal graph for series of lengths `m` and `n` aligned by
/// `path`.
pub fn build_graph(m: usize, n: usize, path: &WarpPath, config: &GraphDetrendConfig) -> Result<TemporalGraph> {
    path.validate(m, n)?;
    let mut map = BTreeMap::new();
    for t in 1..m {
        insert_max(&mut map, t - 1, t, 1.0);
    }
    for s in 1..n {
        insert_max(&mut map, m + s - 1, m + s, 1.0);
    }
    let k = config.neighborhood as isize;
    for &(t, s) in path.pairs() {
        if config.cross_weight > 0.0 {
            insert_max(&mut map, t, m + s, config.cross_weight);
        }
        if config.robust_edge_weight > 0.0 {
            let (ti, si) = (t as isize, s as isize);
            for d in 1..=k {
                for (tt, ss) in [(ti, si - d), (ti, si + d), (ti - d, si), (ti + d, si)] {
                    if tt >= 0 && ss >= 0 && (tt as usize) < m && (ss as usize) < n {
                        insert_max(&mut map, tt as usize, m + ss as usize, config.robust_edge_weight);
                    }
                }
            }
        }
    }
    Ok(TemporalGraph::from_map(m + n, map))
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDifferenceOperator {
    order: usize,
    matrix: SparseMatrix,
}

impl GraphDifferenceOperator {
    pub fn order(&self) -> usize {
        self.order
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.matrix.mul_vec(x)
    }
}

fn incidence(graph: &TemporalGraph) -> SparseMatrix {
    SparseMatrix::from_rows(
        graph.num_vertices,
        graph.edges.iter().map(|e| [(e.a, -e.weight), (e.b, e.weight)]),
    )
    .expect("edges are in range")
}

fn laplacian_rows(graph: &TemporalGraph, keep: impl Fn(usize) -> bool) -> SparseMatrix {
    let nv = graph.num_vertices;
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); nv];
    for e in &graph.edges {
        let w2 = e.weight * e.weight;
        adj[e.a].push((e.b, w2));
        adj[e.b].push((e.a, w2));
    }
    let rows = (0..nv).filter(|&v| keep(v)).map(|v| {
        let mut row: Vec<(usize, f64)> = adj[v].iter().map(|&(u, w)| (u, -w)).collect();
        let diag: f64 = adj[v].iter().map(|&(_, w)| w).sum();
        row.push((v, diag));
        row.sort_by_key(|&(c, _)| c);
        row
    });
    SparseMatrix::from_rows(nv, rows).expect("laplacian rows are in range")
}

/// First- or second-order difference operator of `graph`.
///
/// Order 1 is the weighted signed incidence matrix: one row per edge with
/// `-w` at the lower endpoint and `+w` at the higher. Order 2 takes the rows
/// of `(Δ¹)ᵀΔ¹` at vertices with at least two incident edges. Leaf rows are
/// left out because they are first differences in disguise; without them a
/// chain graph reproduces the univariate second difference exactly (up to
/// sign), so linear signals carry no second-order penalty.
pub fn graph_diff_op(graph: &TemporalGraph, order: usize) -> Result<GraphDifferenceOperator> {
    let matrix = match order {
        1 => incidence(graph),
        2 => {
            let deg = graph.degrees();
            laplacian_rows(graph, |v| deg[v] >= 2)
        }
        _ => {
            return Err(Error::invalid(format!(
                "graph difference order must be 1 or 2, got {order}"
            )))
        }
    };
    Ok(GraphDifferenceOperator { order, matrix })
}

/// Squared-fidelity trend filtering of `target` over `graph`.
pub fn graph_trend_filter(
    graph: &TemporalGraph,
    target: &[f64],
    lambda1: f64,
    lambda2: f64,
    solver: &SolverConfig,
) -> Result<AdmmSolution> {
    graph_trend_filter_from(graph, target, lambda1, lambda2, solver, None)
}

/// As [`graph_trend_filter`] with the solver started at `initial`.
pub fn graph_trend_filter_from(
    graph: &TemporalGraph,
    target: &[f64],
    lambda1: f64,
    lambda2: f64,
    solver: &SolverConfig,
    initial: Option<&[f64]>,
) -> Result<AdmmSolution> {
    if target.len() != graph.num_vertices {
        return Err(Error::invalid(format!(
            "target has {} values, graph has {} vertices",
            target.len(),
            graph.num_vertices
        )));
    }
    solver.validate()?;
    let d1 = graph_diff_op(graph, 1)?;
    let d2 = graph_diff_op(graph, 2)?;
    generalized_lasso_admm_from(
        target,
        Fidelity::Squared,
        &[Penalty::new(d1.matrix(), lambda1), Penalty::new(d2.matrix(), lambda2)],
        solver,
        initial,
    )
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphDetrendResult {
    pub x_trend: TimeSeries,
    pub y_trend: TimeSeries,
    pub converged: bool,
    pub iterations: usize,
}

/// Jointly re-estimates the trends of `u` and `v` over the temporal graph
/// induced by `path`.
pub fn graph_detrend(
    u: &TimeSeries,
    v: &TimeSeries,
    path: &WarpPath,
    config: &GraphDetrendConfig,
) -> Result<GraphDetrendResult> {
    graph_detrend_from(u, v, path, config, None)
}

/// As [`graph_detrend`] with the solver started at the trends `initial`.
pub fn graph_detrend_from(
    u: &TimeSeries,
    v: &TimeSeries,
    path: &WarpPath,
    config: &GraphDetrendConfig,
    initial: Option<(&[f64], &[f64])>,
) -> Result<GraphDetrendResult> {
    config.validate()?;
    let (m, n) = (u.len(), v.len());
    let graph = build_graph(m, n, path, config)?;
    let mut target = Vec::with_capacity(m + n);
    target.extend_from_slice(u.values());
    target.extend_from_slice(v.values());
    let start: Option<Vec<f64>> = initial.map(|(a, b)| a.iter().chain(b).copied().collect());
    let sol = graph_trend_filter_from(
        &graph,
        &target,
        config.lambda1_gd,
        config.lambda2_gd,
        &config.solver,
        start.as_deref(),
    )?;
    if sol.solution.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical("graph detrending produced non-finite values".into()));
    }
    let mut w = sol.solution;
    let y_vals = w.split_off(m);
    Ok(GraphDetrendResult {
        x_trend: TimeSeries::from_trusted(w),
        y_trend: TimeSeries::from_trusted(y_vals),
        converged: sol.converged,
        iterations: sol.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{EnvelopeCholesky, SymmetricMatrix};
    use crate::trend::difference_operator;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn l1(v: &[f64]) -> f64 {
        v.iter().map(|x| x.abs()).sum()
    }

    #[test]
    fn three_by_three_diagonal_graph() {
        let g = build_graph(3, 3, &WarpPath::diagonal(3), &GraphDetrendConfig::default()).unwrap();
        assert_eq!(g.num_vertices(), 6);
        let pairs: Vec<(usize, usize, f64)> = g.edges().iter().map(|e| (e.a, e.b, e.weight)).collect();
        // x = 0..3, y = 3..6
        let want = vec![
            (0, 1, 1.0),
            (0, 3, 1.0),
            (0, 4, 0.5),
            (1, 2, 1.0),
            (1, 3, 0.5),
            (1, 4, 1.0),
            (1, 5, 0.5),
            (2, 4, 0.5),
            (2, 5, 1.0),
            (3, 4, 1.0),
            (4, 5, 1.0),
        ];
        assert_eq!(pairs, want);
    }

    #[test]
    fn single_pair_graph() {
        let g = build_graph(1, 1, &WarpPath::diagonal(1), &GraphDetrendConfig::default()).unwrap();
        assert_eq!(
            g.edges(),
            &[Edge {
                a: 0,
                b: 1,
                weight: 1.0
            }]
        );
    }

    #[test]
    fn duplicates_keep_max_weight() {
        // the stall (0,0),(0,1) makes x0-y1 both a cross and a hedging edge
        let p = WarpPath::new(vec![(0, 0), (0, 1), (1, 2)], 2, 3).unwrap();
        let g = build_graph(2, 3, &p, &GraphDetrendConfig::default()).unwrap();
        let e = g.edges().iter().find(|e| (e.a, e.b) == (0, 3)).unwrap();
        assert_eq!(e.weight, 1.0);
    }

    #[test]
    fn invalid_path_is_rejected() {
        let p = WarpPath::diagonal(3);
        assert!(build_graph(3, 4, &p, &GraphDetrendConfig::default()).is_err());
    }

    #[test]
    fn edges_stay_near_the_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..30 {
            let m = rng.random_range(2..20);
            let n = rng.random_range(2..20);
            let x: Vec<f64> = (0..m).map(|_| rng.random()).collect();
            let y: Vec<f64> = (0..n).map(|_| rng.random()).collect();
            let path = crate::dtw::dtw_exact(&x, &y).unwrap().path;
            let g = build_graph(m, n, &path, &GraphDetrendConfig::default()).unwrap();
            for e in g.edges() {
                assert!(e.a < e.b && e.weight > 0.0);
                if e.b < m || e.a >= m {
                    assert_eq!(e.b - e.a, 1, "chain edge {e:?}");
                    continue;
                }
                let (t, s) = (e.a, e.b - m);
                let near = path
                    .pairs()
                    .iter()
                    .any(|&(pt, ps)| (pt == t && ps.abs_diff(s) <= 1) || (ps == s && pt.abs_diff(t) <= 1));
                assert!(near, "cross edge {e:?} far from path");
            }
        }
    }

    #[test]
    fn chain_graph_first_order_matches_univariate() {
        let g = TemporalGraph::chain(5);
        let d = graph_diff_op(&g, 1).unwrap();
        let uni = difference_operator(1, 5).unwrap();
        let neg: Vec<Vec<f64>> = uni
            .matrix()
            .to_dense()
            .into_iter()
            .map(|r| r.into_iter().map(|v| -v).collect())
            .collect();
        assert_eq!(d.matrix().to_dense(), neg);
    }

    #[test]
    fn chain_graph_second_order_matches_univariate() {
        for n in 3..10 {
            let g = TemporalGraph::chain(n);
            let d = graph_diff_op(&g, 2).unwrap();
            let uni = difference_operator(2, n).unwrap();
            let neg: Vec<Vec<f64>> = uni
                .matrix()
                .to_dense()
                .into_iter()
                .map(|r| r.into_iter().map(|v| -v).collect())
                .collect();
            assert_eq!(d.matrix().to_dense(), neg);
        }
    }

    #[test]
    fn path_graph_penalties() {
        let g = TemporalGraph::chain(3);
        let d1 = graph_diff_op(&g, 1).unwrap().apply(&[1.0, 2.0, 4.0]);
        assert_eq!(d1, vec![1.0, 2.0]);
        assert_eq!(l1(&d1), 3.0);
        // linear signals carry no second-order penalty
        assert_eq!(graph_diff_op(&g, 2).unwrap().apply(&[0.0, 1.0, 2.0]), vec![0.0]);
        assert_eq!(g.laplacian().mul_vec(&[0.0, 1.0, 2.0]), vec![-1.0, 0.0, 1.0]);
    }

    #[test]
    fn laplacian_is_symmetric_psd() {
        let g = build_graph(
            6,
            5,
            &crate::dtw::dtw_exact(&[0., 1., 2., 1., 0., 3.], &[0., 2., 1., 0., 3.])
                .unwrap()
                .path,
            &GraphDetrendConfig::default(),
        )
        .unwrap();
        let l = g.laplacian();
        let trip: Vec<(usize, usize, f64)> = (0..l.nrows())
            .flat_map(|r| l.row(r).map(move |(c, v)| (r, c, v)))
            .collect();
        let sym = SymmetricMatrix::from_triplets(l.nrows(), trip);
        assert!(sym.is_symmetric(0.0));
        EnvelopeCholesky::factor(&sym.shifted(1e-9, 1.0)).unwrap();
        // Δ²-by-hand: L = (Δ¹)ᵀΔ¹
        let gram = incidence(&g).gram();
        for r in 0..l.nrows() {
            let a: Vec<(usize, f64)> = l.row(r).collect();
            assert_eq!(a.as_slice(), gram.row(r));
        }
    }

    fn random_graph(rng: &mut ChaCha8Rng) -> TemporalGraph {
        let nv = rng.random_range(2..=20);
        let ne = rng.random_range(0..nv * 2);
        let edges: Vec<Edge> = (0..ne)
            .filter_map(|_| {
                let a = rng.random_range(0..nv);
                let b = rng.random_range(0..nv);
                (a != b).then(|| Edge {
                    a,
                    b,
                    weight: rng.random_range(0.1..2.0),
                })
            })
            .collect();
        TemporalGraph::new(nv, edges).unwrap()
    }

    fn components(g: &TemporalGraph) -> Vec<usize> {
        let mut label: Vec<usize> = (0..g.num_vertices()).collect();
        fn find(l: &mut [usize], x: usize) -> usize {
            let mut r = x;
            while l[r] != r {
                r = l[r];
            }
            l[x] = r;
            r
        }
        for e in g.edges() {
            let (ra, rb) = (find(&mut label, e.a), find(&mut label, e.b));
            label[ra.max(rb)] = ra.min(rb);
        }
        (0..g.num_vertices()).map(|v| find(&mut label, v)).collect()
    }

    #[test]
    fn first_order_null_space_is_componentwise_constants() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for _ in 0..100 {
            let g = random_graph(&mut rng);
            let comp = components(&g);
            let d = graph_diff_op(&g, 1).unwrap();
            let level: Vec<f64> = (0..g.num_vertices()).map(|_| rng.random_range(-5.0..5.0)).collect();
            let piecewise: Vec<f64> = comp.iter().map(|&c| level[c]).collect();
            assert!(d.apply(&piecewise).iter().all(|&v| v == 0.0));
            // breaking constancy inside a component with an edge is detected
            if let Some(e) = g.edges().first() {
                let mut bumped = piecewise.clone();
                bumped[e.b] += 1.0;
                assert!(d.apply(&bumped).iter().any(|&v| v != 0.0));
            }
        }
    }

    #[test]
    fn weight_scaling_scales_penalty() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..50 {
            let g = random_graph(&mut rng);
            let w: Vec<f64> = (0..g.num_vertices()).map(|_| rng.random_range(-3.0..3.0)).collect();
            let base = l1(&graph_diff_op(&g, 1).unwrap().apply(&w));
            for a in [0.25, 2.0, 8.0] {
                let s = l1(&graph_diff_op(&g.with_scaled_weights(a).unwrap(), 1).unwrap().apply(&w));
                assert_eq!(s, a * base);
            }
            let a = rng.random_range(0.1..10.0);
            let s = l1(&graph_diff_op(&g.with_scaled_weights(a).unwrap(), 1).unwrap().apply(&w));
            assert!((s - a * base).abs() <= 1e-12 * (1.0 + s));
        }
    }

    #[test]
    fn json_edge_list_round_trip() {
        let g = build_graph(3, 3, &WarpPath::diagonal(3), &GraphDetrendConfig::default()).unwrap();
        let text = g.to_json();
        assert!(text.contains(r#"{"a":0,"b":4,"weight":0.5}"#), "{text}");
        assert_eq!(TemporalGraph::from_json(&text).unwrap(), g);
        assert!(TemporalGraph::from_json(r#"{"num_vertices":2,"edges":[{"a":0,"b":0,"weight":1}]}"#).is_err());
    }

    #[test]
    fn zero_penalties_return_input() {
        let u = TimeSeries::new(vec![1.0, -2.0, 3.5, 0.25]).unwrap();
        let v = TimeSeries::new(vec![0.0, 4.0, -1.0]).unwrap();
        let path = crate::dtw::dtw_exact(u.values(), v.values()).unwrap().path;
        let cfg = GraphDetrendConfig {
            lambda1_gd: 0.0,
            lambda2_gd: 0.0,
            ..Default::default()
        };
        let r = graph_detrend(&u, &v, &path, &cfg).unwrap();
        assert_eq!(r.x_trend.values(), u.values());
        assert_eq!(r.y_trend.values(), v.values());
    }

    #[test]
    fn identical_constants_are_fixed_points() {
        let u = TimeSeries::new(vec![2.5; 7]).unwrap();
        for l in [0.5, 5.0, 50.0] {
            let cfg = GraphDetrendConfig {
                lambda1_gd: l,
                lambda2_gd: l,
                ..Default::default()
            };
            let r = graph_detrend(&u, &u, &WarpPath::diagonal(7), &cfg).unwrap();
            assert_eq!(r.x_trend.values(), u.values());
            assert_eq!(r.y_trend.values(), u.values());
        }
    }

    #[test]
    fn spike_is_absorbed_by_the_clean_partner() {
        let clean: Vec<f64> = (0..32)
            .map(|i| (2.0 * std::f64::consts::PI * i as f64 / 32.0).sin())
            .collect();
        let mut spiked = clean.clone();
        spiked[13] += 10.0;
        let u = TimeSeries::new(clean.clone()).unwrap();
        let v = TimeSeries::new(spiked.clone()).unwrap();
        let cfg = GraphDetrendConfig {
            lambda1_gd: 0.3,
            lambda2_gd: 1.0,
            solver: SolverConfig::default().tight(),
            ..Default::default()
        };
        let r = graph_detrend(&u, &v, &WarpPath::diagonal(32), &cfg).unwrap();
        assert!(r.converged);
        let left = r.y_trend.values()[13] - clean[13];
        assert!(left.abs() < 5.0, "spike residue {left}");

        // Every penalty row annihilates constants, so the optimum preserves
        // the total mass: what leaves the spike is spread over the other
        // samples. Removing more than half of a 10-spike therefore shifts
        // the 63 clean samples by at least 5/63 on average, whatever the
        // penalties.
        let before: f64 = clean.iter().chain(&spiked).sum();
        let after: f64 = r.x_trend.values().iter().chain(r.y_trend.values()).sum();
        assert!((after - before).abs() < 1e-9, "mass {before} -> {after}");
        let moved: f64 = (0..32)
            .map(|i| (r.x_trend.values()[i] - clean[i]).abs())
            .chain(
                (0..32)
                    .filter(|&i| i != 13)
                    .map(|i| (r.y_trend.values()[i] - clean[i]).abs()),
            )
            .sum();
        assert!(moved >= 10.0 - left.abs() - 1e-9);
    }
}
