//! Edge set, distances and conductivity from a kernel
//! `f(x,y) = σ₁(x)·σ₂(y) / d(x,y)`.
//!
//! For distinct `a, b, c` the ratio
//! `F_abc(x) = f(a,x)·f(b,c) / (f(b,x)·f(a,c))` equals `q·d(b,x)/d(a,x)`
//! with `q` independent of `x`, so `R_ab = max F_abc / min F_abc` is a
//! function of distances alone. Its arithmetic type separates leaves from
//! their neighbours:
//!
//! | pair                   | `R_ab`             |
//! |------------------------|--------------------|
//! | leaf, leaf             | `(d − 1)²`         |
//! | neighbour, neighbour   | `(d + 1)²`         |
//! | leaf, other neighbour  | `d² − 1`           |
//! | leaf, own neighbour    | in `(1, 2)`        |

use std::collections::BTreeSet;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::graph::{all_pairs_distances, DistanceMatrix, Graph};
use crate::matrix::Matrix;
use crate::par::Execution;

/// Relative tolerance for ties in argmin/argmax sets.
pub const TIE_TOL: f64 = 1e-9;
/// Relative rank-1 residual accepted by [`rank_one_factor`].
pub const RANK_ONE_TOL: f64 = 1e-8;

const SCALE_CONVENTION: &str = "sigma1(0) = 1";

/// Kernel with positive off-diagonal entries; the diagonal is ignored.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelMatrix {
    f: Matrix,
}

impl KernelMatrix {
    pub fn new(f: Matrix) -> Result<Self> {
        if !f.is_square() {
            return Err(Error::DimensionMismatch(format!("kernel {:?} is not square", f.shape())));
        }
        let n = f.nrows();
        for x in 0..n {
            for y in 0..n {
                if x != y && !(f[(x, y)] > 0.0 && f[(x, y)].is_finite()) {
                    return Err(Error::NonpositiveEntry(x, y));
                }
            }
        }
        Ok(Self { f })
    }

    pub fn n(&self) -> usize {
        self.f.nrows()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.f[(x, y)]
    }

    pub fn matrix(&self) -> &Matrix {
        &self.f
    }

    fn check_vertex(&self, v: usize) -> Result<()> {
        if v < self.n() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: v, n: self.n() })
        }
    }
}

/// `f(x,y) = (g1(x)·C(x,y)·g2(y))^(1/α)` off the diagonal.
pub fn kernel_from_interaction(c: &Matrix, alpha: f64, g1: &[f64], g2: &[f64]) -> Result<KernelMatrix> {
    let n = c.nrows();
    if !c.is_square() || g1.len() != n || g2.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "interaction {:?} with gauges of length {} and {}",
            c.shape(),
            g1.len(),
            g2.len()
        )));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    for (i, &g) in g1.iter().chain(g2).enumerate() {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::InvalidParameter(format!("gauge entry {} must be positive", i % n.max(1))));
        }
    }
    let f = Matrix::from_fn(n, n, |x, y| {
        if x == y {
            0.0
        } else {
            (g1[x] * c[(x, y)] * g2[y]).powf(1.0 / alpha)
        }
    });
    KernelMatrix::new(f)
}

/// `(x, F_abc(x))` for every `x ∉ {a, b}`, in increasing `x`.
pub fn f_ratio(fm: &KernelMatrix, a: usize, b: usize, c: usize) -> Result<Vec<(usize, f64)>> {
    for v in [a, b, c] {
        fm.check_vertex(v)?;
    }
    if a == b || a == c || b == c {
        return Err(Error::DegenerateTriple(a, b, c));
    }
    let q = fm.get(b, c) / fm.get(a, c);
    Ok((0..fm.n())
        .filter(|&x| x != a && x != b)
        .map(|x| (x, fm.get(a, x) / fm.get(b, x) * q))
        .collect())
}

fn default_third(n: usize, a: usize, b: usize) -> Option<usize> {
    (0..n).find(|&c| c != a && c != b)
}

/// `R_ab` with `c` the smallest vertex outside `{a, b}`.
pub fn pair_ratio(fm: &KernelMatrix, a: usize, b: usize) -> Result<f64> {
    fm.check_vertex(a)?;
    fm.check_vertex(b)?;
    if a == b {
        return Err(Error::DegenerateTriple(a, b, b));
    }
    let c = default_third(fm.n(), a, b).ok_or(Error::DegeneratePair(a, b))?;
    pair_ratio_via(fm, a, b, c)
}

pub fn pair_ratio_via(fm: &KernelMatrix, a: usize, b: usize, c: usize) -> Result<f64> {
    let values = f_ratio(fm, a, b, c)?;
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, 0.0_f64), |(lo, hi), &(_, v)| (lo.min(v), hi.max(v)));
    Ok(hi / lo)
}

/// Symmetric matrix of all `R_ab`, with ones on the diagonal.
pub fn pair_ratio_matrix(fm: &KernelMatrix, exec: Execution) -> Result<Matrix> {
    let n = fm.n();
    if n < 3 {
        return Err(Error::DegeneratePair(0, n.saturating_sub(1)));
    }
    let rows = exec.map(n, |a| {
        (0..n)
            .map(|b| if a < b { pair_ratio(fm, a, b) } else { Ok(1.0) })
            .collect::<Result<Vec<f64>>>()
    });
    let mut r = Matrix::from_element(n, n, 1.0);
    for (a, row) in rows.into_iter().enumerate() {
        for (b, v) in row?.into_iter().enumerate().skip(a + 1) {
            r[(a, b)] = v;
            r[(b, a)] = v;
        }
    }
    Ok(r)
}

/// Nearest integer when `v` lies within relative tolerance `tol` of it.
pub fn as_integer(v: f64, tol: f64) -> Option<u64> {
    if !(v.is_finite() && v >= 0.0) {
        return None;
    }
    let r = v.round();
    ((v - r).abs() <= tol * r.max(1.0)).then_some(r as u64)
}

fn is_square(k: u64) -> bool {
    let s = (k as f64).sqrt().round() as u64;
    s * s == k
}

fn argmin_set(values: &[(usize, f64)]) -> Vec<usize> {
    let lo = values.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
    values.iter().filter(|v| v.1 <= lo * (1.0 + TIE_TOL)).map(|v| v.0).collect()
}

fn argmax_set(values: &[(usize, f64)]) -> Vec<usize> {
    let hi = values.iter().map(|v| v.1).fold(0.0, f64::max);
    values.iter().filter(|v| v.1 >= hi * (1.0 - TIE_TOL)).map(|v| v.0).collect()
}

/// Witness sets of the leaf/neighbour disambiguation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Disambiguation {
    pub pair: (usize, usize),
    pub ratio: f64,
    pub lower: Vec<usize>,
    pub upper: Vec<usize>,
    pub z: Vec<usize>,
    pub a_is_neighbour: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairStatistics {
    pub r: Matrix,
    /// Pairs `a < b` whose ratio is not an integer.
    pub y: Vec<(usize, usize)>,
    pub leaves: Vec<usize>,
    pub neighbours: Vec<usize>,
    /// `(leaf, neighbour)` for every leaf.
    pub attachment: Vec<(usize, usize)>,
    pub witness: Disambiguation,
}

impl PairStatistics {
    pub fn neighbour_of(&self, leaf: usize) -> Option<usize> {
        self.attachment.iter().find(|p| p.0 == leaf).map(|p| p.1)
    }
}

pub fn classify_pairs(fm: &KernelMatrix, tol_int: f64) -> Result<PairStatistics> {
    classify_pairs_with(fm, tol_int, Execution::default())
}

pub fn classify_pairs_with(fm: &KernelMatrix, tol_int: f64, exec: Execution) -> Result<PairStatistics> {
    let n = fm.n();
    let r = pair_ratio_matrix(fm, exec)?;
    let mut y = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            if as_integer(r[(a, b)], tol_int).is_none() {
                y.push((a, b));
            }
        }
    }
    let threshold = 4.0 / 3.0 * (1.0 + tol_int);
    let &(a, b) = y
        .iter()
        .filter(|&&(a, b)| r[(a, b)] > threshold)
        .max_by(|p, q| r[(p.0, p.1)].total_cmp(&r[(q.0, q.1)]))
        .ok_or_else(|| {
            Error::NotClassifiable(format!(
                "no pair with non-integer ratio above 4/3 ({} non-integer pairs)",
                y.len()
            ))
        })?;

    let c = default_third(n, a, b).ok_or(Error::DegeneratePair(a, b))?;
    let fab = f_ratio(fm, a, b, c)?;
    let lower = argmin_set(&fab);
    let upper = argmax_set(&fab);
    let xl = lower[0];
    let mut z = BTreeSet::new();
    // R > 4/3 keeps the argmin and argmax sets disjoint.
    for &u in &upper {
        z.extend(argmax_set(&f_ratio(fm, u, xl, a)?));
    }
    let a_is_neighbour = z.contains(&a) || z.contains(&b);
    let (leaf0, nb0) = if a_is_neighbour { (b, a) } else { (a, b) };
    let witness = Disambiguation {
        pair: (a, b),
        ratio: r[(a, b)],
        lower,
        upper,
        z: z.into_iter().collect(),
        a_is_neighbour,
    };

    // Only vertices on a non-integer pair are leaves or neighbours.
    let touched: BTreeSet<usize> = y.iter().flat_map(|&(a, b)| [a, b]).collect();
    let mut leaves = BTreeSet::from([leaf0]);
    let mut neighbours = BTreeSet::from([nb0]);
    for &u in &touched {
        if u == leaf0 || u == nb0 {
            continue;
        }
        match as_integer(r[(leaf0, u)], tol_int) {
            Some(k) if is_square(k) => leaves.insert(u),
            Some(_) => neighbours.insert(u),
            None => {
                return Err(Error::NotClassifiable(format!(
                    "ratio R({leaf0},{u}) = {} is not an integer",
                    r[(leaf0, u)]
                )))
            }
        };
    }
    let mut attachment = Vec::new();
    for &(a, b) in &y {
        let pair = match (leaves.contains(&a), leaves.contains(&b)) {
            (true, false) if neighbours.contains(&b) => (a, b),
            (false, true) if neighbours.contains(&a) => (b, a),
            _ => {
                return Err(Error::NotClassifiable(format!(
                    "pair ({a},{b}) is not a leaf with its neighbour"
                )))
            }
        };
        attachment.push(pair);
    }
    for &l in &leaves {
        let count = attachment.iter().filter(|p| p.0 == l).count();
        if count != 1 {
            return Err(Error::NotClassifiable(format!("leaf {l} has {count} candidate neighbours")));
        }
    }
    if leaves.len() < 2 {
        return Err(Error::NotClassifiable("fewer than two leaves".into()));
    }
    attachment.sort_unstable();
    Ok(PairStatistics {
        r,
        y,
        leaves: leaves.into_iter().collect(),
        neighbours: neighbours.into_iter().collect(),
        attachment,
        witness,
    })
}

fn round_distance(x: usize, y: usize, value: f64, tol_int: f64) -> Result<u32> {
    match as_integer(value, tol_int) {
        Some(k) if k >= 1 && k <= u32::MAX as u64 => Ok(k as u32),
        _ => Err(Error::NonIntegerDistance { x, y, value }),
    }
}

/// All pairwise distances, first along the leaves and then for every other
/// pair through two fixed leaves.
pub fn recover_distances(fm: &KernelMatrix, stats: &PairStatistics, tol_int: f64) -> Result<DistanceMatrix> {
    let n = fm.n();
    let leaves = &stats.leaves;
    if leaves.len() < 2 {
        return Err(Error::NotClassifiable("fewer than two leaves".into()));
    }
    let mut d = vec![vec![0u32; n]; n];
    let set = |d: &mut Vec<Vec<u32>>, x: usize, y: usize, v: u32| {
        d[x][y] = v;
        d[y][x] = v;
    };
    for (i, &a) in leaves.iter().enumerate() {
        for &b in &leaves[i + 1..] {
            let r = pair_ratio(fm, a, b)?;
            let v = round_distance(a, b, 1.0 + r.sqrt(), tol_int)?;
            set(&mut d, a, b, v);
        }
    }
    for &a in leaves {
        let b = stats
            .neighbour_of(a)
            .ok_or_else(|| Error::NotClassifiable(format!("leaf {a} has no neighbour")))?;
        let c = *leaves.iter().find(|&&c| c != a).expect("two leaves");
        let dac = d[a][c] as f64;
        let dbc = dac - 1.0;
        set(&mut d, a, b, 1);
        for (x, fx) in f_ratio(fm, a, b, c)? {
            if leaves.contains(&x) {
                continue;
            }
            let t = fx * dbc / dac;
            let v = round_distance(a, x, 1.0 / (1.0 - t), tol_int)?;
            set(&mut d, a, x, v);
        }
    }
    let (a, c) = (leaves[0], leaves[1]);
    let rest: Vec<usize> = (0..n).filter(|v| !leaves.contains(v)).collect();
    for (i, &y) in rest.iter().enumerate() {
        let fy = f_ratio(fm, a, y, c)?;
        for &x in &rest[i + 1..] {
            let fx = fy.iter().find(|p| p.0 == x).expect("x outside {a, y}").1;
            let v = fx * d[y][c] as f64 * d[a][x] as f64 / d[a][c] as f64;
            let v = round_distance(y, x, v, tol_int)?;
            set(&mut d, y, x, v);
        }
    }
    let dist = DistanceMatrix::from_rows(&d)?;
    dist.validate_metric()?;
    let edges = edges_from_distances(&dist);
    let graph = Graph::new(n, n, edges)
        .map_err(|e| Error::MetricViolation(format!("unit-distance graph invalid: {e}")))?;
    if all_pairs_distances(&graph)? != dist {
        return Err(Error::MetricViolation(
            "distances are not the hop metric of their unit-distance graph".into(),
        ));
    }
    Ok(dist)
}

/// Pairs `x < y` at distance one.
pub fn edges_from_distances(d: &DistanceMatrix) -> Vec<(usize, usize)> {
    let n = d.n();
    let mut edges = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            if d.get(x, y) == 1 {
                edges.push((x, y));
            }
        }
    }
    edges
}

/// `Σ(x,x) = σ₁(x)σ₂(x)` from three off-diagonal entries through `y` and `z`.
pub fn diagonal_estimate(fm: &KernelMatrix, d: &DistanceMatrix, x: usize, y: usize, z: usize) -> Result<f64> {
    if x == y || x == z || y == z {
        return Err(Error::DegenerateTriple(x, y, z));
    }
    let s = |u: usize, v: usize| fm.get(u, v) * d.get(u, v) as f64;
    Ok(s(y, x) * s(x, z) / s(y, z))
}

/// `Σ = σ₁·σ₂ᵀ` with `σ₁(0) = 1`.
pub fn rank_one_factor(sigma: &Matrix) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = sigma.nrows();
    if n == 0 || !sigma.is_square() || sigma[(0, 0)].is_nan() || sigma[(0, 0)] <= 0.0 {
        return Err(Error::DimensionMismatch(format!("rank-one split of {:?}", sigma.shape())));
    }
    let s1: Vec<f64> = (0..n).map(|x| sigma[(x, 0)] / sigma[(0, 0)]).collect();
    let s2: Vec<f64> = (0..n).map(|y| sigma[(0, y)]).collect();
    let scale = crate::matrix::max_abs(sigma);
    let mut worst = 0.0_f64;
    for x in 0..n {
        for y in 0..n {
            worst = worst.max((sigma[(x, y)] - s1[x] * s2[y]).abs());
        }
    }
    let residual = worst / scale;
    if residual.is_nan() || residual > RANK_ONE_TOL {
        return Err(Error::RankDefect(residual));
    }
    Ok((s1, s2))
}

pub fn sigma_matrix(fm: &KernelMatrix, d: &DistanceMatrix) -> Result<Matrix> {
    let n = fm.n();
    if n < 3 || d.n() != n {
        return Err(Error::DimensionMismatch(format!("kernel of size {n}, distances of size {}", d.n())));
    }
    let mut sigma = Matrix::zeros(n, n);
    for x in 0..n {
        let mut others = (0..n).filter(|&v| v != x);
        let (y, z) = (others.next().unwrap(), others.next().unwrap());
        for w in 0..n {
            sigma[(x, w)] = if w == x {
                diagonal_estimate(fm, d, x, y, z)?
            } else {
                fm.get(x, w) * d.get(x, w) as f64
            };
        }
    }
    Ok(sigma)
}

pub fn recover_sigma(fm: &KernelMatrix, d: &DistanceMatrix) -> Result<(Vec<f64>, Vec<f64>)> {
    rank_one_factor(&sigma_matrix(fm, d)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReconstructionResult {
    pub distances: DistanceMatrix,
    pub edges: Vec<(usize, usize)>,
    pub leaves: Vec<usize>,
    pub neighbours: Vec<usize>,
    pub sigma1: Vec<f64>,
    pub sigma2: Vec<f64>,
    pub scale_convention: String,
}

impl ReconstructionResult {
    /// `(σ₁(x)σ₂(x))^α`, proportional to the conductivity when the kernel
    /// came from an interaction matrix with constant gauges.
    pub fn conductivity(&self, alpha: f64) -> Vec<f64> {
        self.sigma1
            .iter()
            .zip(&self.sigma2)
            .map(|(a, b)| (a * b).powf(alpha))
            .collect()
    }

    pub fn graph(&self) -> Result<Graph> {
        let n = self.distances.n();
        Graph::new(n, n, self.edges.iter().copied())
    }
}

pub fn reconstruct_full(fm: &KernelMatrix, tol_int: f64) -> Result<ReconstructionResult> {
    reconstruct_full_with(fm, tol_int, Execution::default())
}

pub fn reconstruct_full_with(fm: &KernelMatrix, tol_int: f64, exec: Execution) -> Result<ReconstructionResult> {
    let stats = classify_pairs_with(fm, tol_int, exec)?;
    let distances = recover_distances(fm, &stats, tol_int)?;
    let edges = edges_from_distances(&distances);
    let (sigma1, sigma2) = recover_sigma(fm, &distances)?;
    Ok(ReconstructionResult {
        distances,
        edges,
        leaves: stats.leaves,
        neighbours: stats.neighbours,
        sigma1,
        sigma2,
        scale_convention: SCALE_CONVENTION.into(),
    })
}

/// `(max − min) / min` over the entries of `v`.
pub fn ratio_spread(v: &[f64]) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo) / lo
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walk::{build_interaction, Conductivity};

    fn kernel(g: &Graph, gamma: &[f64], alpha: f64) -> KernelMatrix {
        let c = build_interaction(g, &Conductivity::new(gamma.to_vec()).unwrap(), alpha, 1.0).unwrap();
        let ones = vec![1.0; g.n()];
        kernel_from_interaction(&c.c, alpha, &ones, &ones).unwrap()
    }

    fn p5_kernel() -> KernelMatrix {
        kernel(&Graph::path(5, 3).unwrap(), &[1.0; 5], 2.0)
    }

    #[test]
    fn p5_kernel_is_inverse_distance() {
        let fm = p5_kernel();
        assert!((fm.get(0, 4) - 0.25).abs() < 1e-15);
        assert!((fm.get(1, 2) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn f_ratio_examples() {
        let fm = p5_kernel();
        let f = f_ratio(&fm, 0, 4, 2).unwrap();
        let at = |x: usize| f.iter().find(|p| p.0 == x).unwrap().1;
        assert!((at(1) - 3.0).abs() < 1e-12);
        assert!((at(3) - 1.0 / 3.0).abs() < 1e-12);
        let g = f_ratio(&fm, 4, 0, 2).unwrap();
        for (p, q) in f.iter().zip(&g) {
            assert!((p.1 * q.1 - 1.0).abs() < 1e-12);
        }
        assert!(matches!(f_ratio(&fm, 0, 0, 2), Err(Error::DegenerateTriple(..))));
    }

    #[test]
    fn pair_ratio_examples() {
        let fm = p5_kernel();
        assert!((pair_ratio(&fm, 0, 4).unwrap() - 9.0).abs() < 1e-12);
        assert!((pair_ratio(&fm, 0, 1).unwrap() - 1.5).abs() < 1e-12);
        assert!((pair_ratio(&fm, 1, 3).unwrap() - 9.0).abs() < 1e-12);
        assert!((pair_ratio(&fm, 0, 3).unwrap() - 8.0).abs() < 1e-12);
        for c in [1, 2, 3] {
            assert!((pair_ratio_via(&fm, 0, 4, c).unwrap() - 9.0).abs() < 1e-12);
        }
        let two = KernelMatrix::new(Matrix::from_element(2, 2, 1.0)).unwrap();
        assert!(matches!(pair_ratio(&two, 0, 1), Err(Error::DegeneratePair(..))));
    }

    #[test]
    fn classify_p5() {
        let s = classify_pairs(&p5_kernel(), 1e-6).unwrap();
        assert_eq!(s.y, vec![(0, 1), (3, 4)]);
        assert_eq!(s.leaves, vec![0, 4]);
        assert_eq!(s.neighbours, vec![1, 3]);
        assert_eq!(s.attachment, vec![(0, 1), (4, 3)]);
    }

    #[test]
    fn stars_and_short_paths_are_not_classifiable() {
        let star = kernel(&Graph::star(6, 6).unwrap(), &[1.0; 6], 2.5);
        assert!(matches!(reconstruct_full(&star, 1e-6), Err(Error::NotClassifiable(_))));
        let p4 = kernel(&Graph::path(4, 4).unwrap(), &[1.0; 4], 2.5);
        assert!(matches!(reconstruct_full(&p4, 1e-6), Err(Error::NotClassifiable(_))));
    }

    #[test]
    fn distances_of_p5() {
        let fm = p5_kernel();
        let s = classify_pairs(&fm, 1e-6).unwrap();
        let d = recover_distances(&fm, &s, 1e-6).unwrap();
        assert_eq!(d, all_pairs_distances(&Graph::path(5, 5).unwrap()).unwrap());
        assert_eq!(d.get(0, 4), 4);
    }

    #[test]
    fn noisy_kernel_gives_non_integer_distances() {
        let fm = p5_kernel();
        let s = classify_pairs(&fm, 1e-6).unwrap();
        let noisy = Matrix::from_fn(5, 5, |x, y| {
            fm.get(x, y) * (1.0 + 0.1 * (((3 * x + 7 * y) % 5) as f64 / 4.0 - 0.5))
        });
        let noisy = KernelMatrix::new(noisy).unwrap();
        assert!(matches!(
            recover_distances(&noisy, &s, 1e-6),
            Err(Error::NonIntegerDistance { .. })
        ));
    }

    #[test]
    fn edges_of_known_metrics() {
        let p = Graph::path(5, 5).unwrap();
        assert_eq!(edges_from_distances(&all_pairs_distances(&p).unwrap()), vec![(0, 1), (1, 2), (2, 3), (3, 4)]);
        let s = Graph::star(4, 4).unwrap();
        assert_eq!(edges_from_distances(&all_pairs_distances(&s).unwrap()), vec![(0, 1), (0, 2), (0, 3)]);
    }

    #[test]
    fn rank_one_toy() {
        let (s1, s2) = rank_one_factor(&Matrix::from_row_slice(2, 2, &[3.0, 4.0, 6.0, 8.0])).unwrap();
        assert_eq!(s1, vec![1.0, 2.0]);
        assert_eq!(s2, vec![3.0, 4.0]);
        assert!(matches!(
            rank_one_factor(&Matrix::from_row_slice(2, 2, &[3.0, 4.0, 6.0, 9.0])),
            Err(Error::RankDefect(_))
        ));
    }

    #[test]
    fn diagonal_estimate_is_independent_of_witnesses() {
        let g = Graph::path(6, 6).unwrap();
        let fm = kernel(&g, &[1.0, 2.0, 0.5, 1.5, 1.0, 3.0], 2.5);
        let d = all_pairs_distances(&g).unwrap();
        for x in 0..6 {
            let base = diagonal_estimate(&fm, &d, x, (x + 1) % 6, (x + 2) % 6).unwrap();
            for y in 0..6 {
                for z in 0..6 {
                    if x != y && x != z && y != z {
                        let v = diagonal_estimate(&fm, &d, x, y, z).unwrap();
                        assert!((v - base).abs() <= 1e-10 * base);
                    }
                }
            }
        }
    }

    #[test]
    fn full_reconstruction_of_p5() {
        let g = Graph::path(5, 3).unwrap();
        let gamma = [1.0, 2.0, 3.0, 2.0, 1.0];
        let fm = kernel(&g, &gamma, 2.5);
        let res = reconstruct_full(&fm, 1e-6).unwrap();
        assert_eq!(res.edges, g.edges().collect::<Vec<_>>());
        assert_eq!(res.sigma1[0], 1.0);
        let ratio: Vec<f64> = res.conductivity(2.5).iter().zip(gamma).map(|(a, b)| a / b).collect();
        assert!(ratio_spread(&ratio) <= 1e-8);

        let c = build_interaction(&g, &Conductivity::new(gamma.to_vec()).unwrap(), 2.5, 1.0).unwrap();
        let g1 = [0.7, 1.3, 2.0, 0.9, 1.1];
        let g2 = [1.6, 0.4, 1.0, 1.2, 0.8];
        let gauged = kernel_from_interaction(&c.c, 2.5, &g1, &g2).unwrap();
        let other = reconstruct_full(&gauged, 1e-6).unwrap();
        assert_eq!(other.edges, res.edges);
    }

    #[test]
    fn sequential_and_parallel_ratio_matrices_agree() {
        let g = Graph::cycle(9, 9).unwrap();
        let fm = kernel(&g, &[1.0; 9], 2.5);
        assert_eq!(
            pair_ratio_matrix(&fm, Execution::Sequential).unwrap(),
            pair_ratio_matrix(&fm, Execution::Parallel).unwrap()
        );
    }
}
