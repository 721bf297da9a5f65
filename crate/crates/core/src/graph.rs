//! Graphs with an observable vertex block, hop distances, leaves,
//! eccentricity and the admissibility conditions (A1)/(A2).

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Execution;
use crate::recovery::numerical_rank;

/// Finite connected simple graph on vertices `0..n`.
///
/// Vertices `0..observable` form the observable set B; the rest are hidden.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    observable: usize,
    edges: BTreeSet<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    /// Validates and builds a graph. Edges are unordered; `(i, j)` and
    /// `(j, i)` in the same list count as a duplicate.
    pub fn new<I>(n: usize, observable: usize, edges: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        if observable == 0 || observable > n {
            return Err(Error::InvalidObservableCount { observable, n });
        }
        let mut set = BTreeSet::new();
        let mut adjacency = vec![Vec::new(); n];
        for (i, j) in edges {
            for v in [i, j] {
                if v >= n {
                    return Err(Error::VertexOutOfRange { vertex: v, n });
                }
            }
            if i == j {
                return Err(Error::SelfLoop(i));
            }
            let key = (i.min(j), i.max(j));
            if !set.insert(key) {
                return Err(Error::DuplicateEdge(key.0, key.1));
            }
            adjacency[i].push(j);
            adjacency[j].push(i);
        }
        for list in &mut adjacency {
            list.sort_unstable();
        }
        let g = Graph {
            n,
            observable,
            edges: set,
            adjacency,
        };
        let dist = bfs(&g, 0);
        if let Some(v) = dist.iter().position(|d| d.is_none()) {
            return Err(Error::DisconnectedGraph { unreachable: v });
        }
        Ok(g)
    }

    /// Path `0 - 1 - ... - (n-1)`.
    pub fn path(n: usize, observable: usize) -> Result<Self> {
        Self::new(n, observable, (1..n).map(|i| (i - 1, i)))
    }

    /// Star with center 0.
    pub fn star(n: usize, observable: usize) -> Result<Self> {
        Self::new(n, observable, (1..n).map(|i| (0, i)))
    }

    pub fn cycle(n: usize, observable: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::InvalidParameter(format!("cycle needs at least 3 vertices, got {n}")));
        }
        Self::new(n, observable, (0..n).map(|i| (i, (i + 1) % n)))
    }

    pub fn complete(n: usize, observable: usize) -> Result<Self> {
        let edges: Vec<_> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
        Self::new(n, observable, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn observable_count(&self) -> usize {
        self.observable
    }

    pub fn hidden_count(&self) -> usize {
        self.n - self.observable
    }

    /// Edges as `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_set(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i.min(j), i.max(j)))
    }

    pub fn neighbors(&self, x: usize) -> &[usize] {
        &self.adjacency[x]
    }

    pub fn degree(&self, x: usize) -> usize {
        self.adjacency[x].len()
    }

    /// Same edge structure with a different observable count.
    pub fn with_observable(&self, observable: usize) -> Result<Self> {
        Self::new(self.n, observable, self.edges())
    }

    /// Relabels vertex `v` as `perm[v]`.
    pub fn relabel(&self, perm: &[usize], observable: usize) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch(format!(
                "permutation of length {} for {} vertices",
                perm.len(),
                self.n
            )));
        }
        Self::new(self.n, observable, self.edges().map(|(i, j)| (perm[i], perm[j])))
    }
}

fn bfs(g: &Graph, source: usize) -> Vec<Option<u32>> {
    let mut dist = vec![None; g.n];
    let mut queue = VecDeque::with_capacity(g.n);
    dist[source] = Some(0);
    queue.push_back(source);
    while let Some(u) = queue.pop_front() {
        let du = dist[u].expect("queued vertices have a distance");
        for &v in &g.adjacency[u] {
            if dist[v].is_none() {
                dist[v] = Some(du + 1);
                queue.push_back(v);
            }
        }
    }
    dist
}

/// Symmetric matrix of hop counts.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    n: usize,
    data: Vec<u32>,
}

impl DistanceMatrix {
    pub fn from_rows(rows: &[Vec<u32>]) -> Result<Self> {
        let n = rows.len();
        if rows.iter().any(|r| r.len() != n) {
            return Err(Error::DimensionMismatch("distance matrix must be square".into()));
        }
        Ok(Self {
            n,
            data: rows.iter().flatten().copied().collect(),
        })
    }

    pub(crate) fn from_flat(n: usize, data: Vec<u32>) -> Self {
        debug_assert_eq!(data.len(), n * n);
        Self { n, data }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.data[x * self.n + y]
    }

    pub fn row(&self, x: usize) -> &[u32] {
        &self.data[x * self.n..(x + 1) * self.n]
    }

    pub fn to_rows(&self) -> Vec<Vec<u32>> {
        (0..self.n).map(|x| self.row(x).to_vec()).collect()
    }

    /// Checks zero diagonal, symmetry, positivity off the diagonal and the
    /// triangle inequality, all in exact integer arithmetic.
    pub fn validate_metric(&self) -> Result<()> {
        let n = self.n;
        for x in 0..n {
            if self.get(x, x) != 0 {
                return Err(Error::MetricViolation(format!("d({x},{x}) != 0")));
            }
            for y in 0..n {
                if x != y && self.get(x, y) == 0 {
                    return Err(Error::MetricViolation(format!("d({x},{y}) = 0")));
                }
                if self.get(x, y) != self.get(y, x) {
                    return Err(Error::MetricViolation(format!("d({x},{y}) != d({y},{x})")));
                }
            }
        }
        for x in 0..n {
            for y in 0..n {
                let dxy = self.get(x, y);
                for z in 0..n {
                    if self.get(x, z) > dxy + self.get(y, z) {
                        return Err(Error::MetricViolation(format!(
                            "triangle inequality fails for ({x},{y},{z})"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Kernel `d(x,y)^(-alpha)` restricted to observable rows and hidden
    /// columns.
    pub fn hidden_kernel_block(&self, observable: usize, alpha: f64) -> DMatrix<f64> {
        let hidden = self.n - observable;
        DMatrix::from_fn(observable, hidden, |x, j| {
            (self.get(x, observable + j) as f64).powf(-alpha)
        })
    }
}

/// BFS hop distances between all pairs.
pub fn all_pairs_distances(g: &Graph) -> Result<DistanceMatrix> {
    all_pairs_distances_with(g, Execution::default())
}

pub fn all_pairs_distances_with(g: &Graph, exec: Execution) -> Result<DistanceMatrix> {
    let rows = exec.map(g.n, |s| bfs(g, s));
    let mut data = Vec::with_capacity(g.n * g.n);
    for row in rows {
        for (v, d) in row.into_iter().enumerate() {
            data.push(d.ok_or(Error::DisconnectedGraph { unreachable: v })?);
        }
    }
    Ok(DistanceMatrix::from_flat(g.n, data))
}

/// Vertices with exactly one neighbour, ascending.
pub fn leaf_set(g: &Graph) -> Vec<usize> {
    (0..g.n).filter(|&x| g.degree(x) == 1).collect()
}

pub fn eccentricity(g: &Graph, x: usize) -> Result<u32> {
    if x >= g.n {
        return Err(Error::VertexOutOfRange { vertex: x, n: g.n });
    }
    bfs(g, x)
        .into_iter()
        .enumerate()
        .try_fold(0, |acc, (v, d)| {
            d.map(|d| acc.max(d)).ok_or(Error::DisconnectedGraph { unreachable: v })
        })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub a1_ok: bool,
    pub a1_rank: usize,
    pub a2_ok: bool,
    pub leaf_set: Vec<usize>,
    /// Largest eccentricity among leaves; 0 when there are no leaves.
    pub max_leaf_eccentricity: u32,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.a1_ok && self.a2_ok
    }
}

/// (A1) is evaluated on the conductivity-free kernel `d^(-alpha)` between
/// observable rows and hidden columns; (A2) asks for at least two leaves and
/// a leaf of eccentricity above 3.
pub fn check_admissibility(g: &Graph, alpha: f64, rank_tol: f64) -> Result<AdmissibilityReport> {
    let dist = all_pairs_distances(g)?;
    let block = dist.hidden_kernel_block(g.observable, alpha);
    let a1_rank = numerical_rank(&block, rank_tol);
    let leaves = leaf_set(g);
    let max_leaf_eccentricity = leaves
        .iter()
        .map(|&l| dist.row(l).iter().copied().max().unwrap_or(0))
        .max()
        .unwrap_or(0);
    Ok(AdmissibilityReport {
        a1_ok: a1_rank == g.hidden_count(),
        a1_rank,
        a2_ok: leaves.len() >= 2 && max_leaf_eccentricity > 3,
        leaf_set: leaves,
        max_leaf_eccentricity,
    })
}

/// Attaches graph `J_i` to vertex `i` of `core` through the edge
/// `{i, anchor_i}`; the attached vertices become observable and the core
/// vertices hidden.
///
/// Each hidden vertex then has exactly one observable vertex at distance 1
/// that is at distance at least 2 from every other hidden vertex, so the
/// square block of the distance kernel is strictly diagonally dominant
/// whenever `M < 1 + 2^alpha`, which gives (A1). (A2) depends on the
/// attachments and is left to [`check_admissibility`].
///
/// The seed shuffles labels inside the observable block and inside the
/// hidden block.
pub fn generate_admissible_graph(
    core: &Graph,
    attachments: &[(Graph, usize)],
    alpha: f64,
    seed: u64,
) -> Result<Graph> {
    let hidden = core.n();
    if attachments.len() != hidden {
        return Err(Error::DimensionMismatch(format!(
            "{} attachments for a core with {} vertices",
            attachments.len(),
            hidden
        )));
    }
    if alpha.is_nan() || alpha <= 0.0 {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    let bound = 1.0 + 2f64.powf(alpha);
    if hidden as f64 >= bound {
        return Err(Error::TooManyHiddenVertices { hidden, bound });
    }
    let mut offsets = Vec::with_capacity(attachments.len());
    let mut observable = 0;
    for (i, (j, anchor)) in attachments.iter().enumerate() {
        if *anchor >= j.n() {
            return Err(Error::InvalidAnchor(format!(
                "anchor {anchor} of attachment {i} has only {} vertices",
                j.n()
            )));
        }
        offsets.push(observable);
        observable += j.n();
    }
    let n = observable + hidden;
    let mut edges = Vec::new();
    edges.extend(core.edges().map(|(a, b)| (observable + a, observable + b)));
    for (i, (j, anchor)) in attachments.iter().enumerate() {
        let off = offsets[i];
        edges.extend(j.edges().map(|(a, b)| (off + a, off + b)));
        edges.push((observable + i, off + anchor));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut obs_perm: Vec<usize> = (0..observable).collect();
    let mut hid_perm: Vec<usize> = (observable..n).collect();
    obs_perm.shuffle(&mut rng);
    hid_perm.shuffle(&mut rng);
    let perm: Vec<usize> = obs_perm.into_iter().chain(hid_perm).collect();
    Graph::new(n, observable, edges.into_iter().map(|(a, b)| (perm[a], perm[b])))
}

/// Random connected graph: a random recursive tree plus each remaining pair
/// independently with probability `extra_edge_prob`, labels shuffled.
pub fn random_connected_graph<R: Rng>(
    n: usize,
    observable: usize,
    extra_edge_prob: f64,
    rng: &mut R,
) -> Result<Graph> {
    let mut labels: Vec<usize> = (0..n).collect();
    labels.shuffle(rng);
    let mut edges = BTreeSet::new();
    for v in 1..n {
        let u = rng.random_range(0..v);
        edges.insert((labels[u].min(labels[v]), labels[u].max(labels[v])));
    }
    for i in 0..n {
        for j in i + 1..n {
            if !edges.contains(&(i, j)) && rng.random_bool(extra_edge_prob) {
                edges.insert((i, j));
            }
        }
    }
    Graph::new(n, observable, edges)
}

fn random_tree<R: Rng>(k: usize, rng: &mut R) -> Graph {
    let edges: Vec<_> = (1..k).map(|v| (rng.random_range(0..v), v)).collect();
    Graph::new(k, k, edges).expect("recursive trees are connected")
}

/// Random instance of the attachment construction with `hidden` core
/// vertices. Two attachments are paths of 3 or 4 vertices anchored at an
/// end, so the result also satisfies (A2); the others are random trees of
/// 1 to 3 vertices. With `hidden <= 5` the graph has at most 22 vertices.
pub fn random_admissible_graph(hidden: usize, alpha: f64, seed: u64) -> Result<Graph> {
    if hidden == 0 {
        return Err(Error::InvalidParameter("need at least one hidden vertex".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let core = if hidden == 1 {
        Graph::new(1, 1, [])?
    } else {
        random_connected_graph(hidden, hidden, 0.4, &mut rng)?
    };
    let mut attachments = Vec::with_capacity(hidden);
    for i in 0..hidden {
        if i < 2 {
            // a single core vertex needs one longer arm to reach eccentricity > 3
            let len = if hidden == 1 { 4 } else { rng.random_range(3..=4) };
            attachments.push((Graph::path(len, len)?, 0));
        } else {
            let k = rng.random_range(1..=3);
            let anchor = rng.random_range(0..k);
            attachments.push((random_tree(k, &mut rng), anchor));
        }
    }
    generate_admissible_graph(&core, &attachments, alpha, rng.random())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p5() -> Graph {
        Graph::path(5, 3).unwrap()
    }

    #[test]
    fn rejects_bad_input() {
        assert_eq!(Graph::new(3, 1, [(0, 0)]), Err(Error::SelfLoop(0)));
        assert_eq!(
            Graph::new(3, 1, [(0, 1), (1, 0), (1, 2)]),
            Err(Error::DuplicateEdge(0, 1))
        );
        assert!(matches!(
            Graph::new(3, 1, [(0, 1)]),
            Err(Error::DisconnectedGraph { unreachable: 2 })
        ));
        assert!(matches!(
            Graph::new(3, 0, [(0, 1), (1, 2)]),
            Err(Error::InvalidObservableCount { .. })
        ));
        assert!(matches!(
            Graph::new(3, 4, [(0, 1), (1, 2)]),
            Err(Error::InvalidObservableCount { .. })
        ));
        assert!(matches!(
            Graph::new(3, 1, [(0, 5)]),
            Err(Error::VertexOutOfRange { vertex: 5, n: 3 })
        ));
    }

    #[test]
    fn path_distances() {
        let d = all_pairs_distances(&p5()).unwrap();
        assert_eq!(d.get(0, 4), 4);
        assert_eq!(d.get(1, 3), 2);
        d.validate_metric().unwrap();
    }

    #[test]
    fn star_leaves_are_two_apart() {
        let g = Graph::star(5, 5).unwrap();
        let d = all_pairs_distances(&g).unwrap();
        for i in 1..5 {
            for j in 1..5 {
                if i != j {
                    assert_eq!(d.get(i, j), 2);
                }
            }
        }
    }

    #[test]
    fn leaves() {
        assert_eq!(leaf_set(&p5()), vec![0, 4]);
        assert_eq!(leaf_set(&Graph::star(5, 5).unwrap()), vec![1, 2, 3, 4]);
        assert!(leaf_set(&Graph::complete(4, 4).unwrap()).is_empty());
    }

    #[test]
    fn eccentricities() {
        let g = p5();
        assert_eq!(eccentricity(&g, 0).unwrap(), 4);
        assert_eq!(eccentricity(&g, 2).unwrap(), 2);
        assert_eq!(eccentricity(&Graph::star(5, 5).unwrap(), 0).unwrap(), 1);
        assert!(matches!(
            eccentricity(&g, 7),
            Err(Error::VertexOutOfRange { vertex: 7, n: 5 })
        ));
    }

    #[test]
    fn admissibility_of_fixtures() {
        let r = check_admissibility(&p5(), 2.0, 1e-9).unwrap();
        assert!(r.a1_ok && r.a2_ok);
        assert_eq!(r.a1_rank, 2);
        assert_eq!(r.leaf_set, vec![0, 4]);
        assert_eq!(r.max_leaf_eccentricity, 4);

        let k4 = check_admissibility(&Graph::complete(4, 1).unwrap(), 2.0, 1e-9).unwrap();
        assert!(!k4.a1_ok);
        assert!(k4.a1_rank <= 1);

        for obs in 1..=5 {
            let s = check_admissibility(&Graph::star(5, obs).unwrap(), 2.0, 1e-9).unwrap();
            assert!(!s.a2_ok);
        }
    }

    #[test]
    fn generator_examples() {
        let arms: Vec<_> = (0..4).map(|_| (Graph::path(3, 3).unwrap(), 0)).collect();
        let g = generate_admissible_graph(&Graph::cycle(4, 4).unwrap(), &arms, 2.0, 1).unwrap();
        assert_eq!((g.n(), g.observable_count()), (16, 12));
        assert!(check_admissibility(&g, 2.0, 1e-9).unwrap().a1_ok);

        let arms: Vec<_> = (0..2).map(|_| (Graph::path(4, 4).unwrap(), 0)).collect();
        let g = generate_admissible_graph(&Graph::path(2, 2).unwrap(), &arms, 2.0, 2).unwrap();
        let r = check_admissibility(&g, 2.0, 1e-9).unwrap();
        assert!(r.a1_ok && r.a2_ok);

        let arms: Vec<_> = (0..6).map(|_| (Graph::path(2, 2).unwrap(), 0)).collect();
        assert!(matches!(
            generate_admissible_graph(&Graph::cycle(6, 6).unwrap(), &arms, 2.0, 0),
            Err(Error::TooManyHiddenVertices { hidden: 6, .. })
        ));

        let arms = vec![(Graph::path(2, 2).unwrap(), 5)];
        assert!(matches!(
            generate_admissible_graph(&Graph::new(1, 1, []).unwrap(), &arms, 2.0, 0),
            Err(Error::InvalidAnchor(_))
        ));
    }

    #[test]
    fn random_admissible_graphs_satisfy_both_conditions() {
        for seed in 0..30 {
            let hidden = 1 + (seed as usize % 5);
            let g = random_admissible_graph(hidden, 2.5, seed).unwrap();
            assert!(g.n() <= 25);
            let r = check_admissibility(&g, 2.5, 1e-9).unwrap();
            assert!(r.a1_ok && r.a2_ok, "seed {seed}: {r:?}");
        }
    }

    #[test]
    fn sequential_and_parallel_distances_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let g = random_connected_graph(40, 10, 0.05, &mut rng).unwrap();
        assert_eq!(
            all_pairs_distances_with(&g, Execution::Sequential).unwrap(),
            all_pairs_distances_with(&g, Execution::Parallel).unwrap()
        );
    }
}
