//! Recovery of the transition matrix, up to the hidden-block gauge, from
//! the one-, two- and three-step observable data.
//!
//! With `G2 = (P²)₁₁ − P₁₁²` and
//! `G3 = (P³)₁₁ − P₁₁(P²)₁₁ − (P²)₁₁P₁₁ + P₁₁³` the data determine the hidden
//! products `P₁₂P₂₁` and `P₁₂P₂₂P₂₁`. A full-rank factorization
//! `G2 = R1·R2` then yields the representative
//!
//! ```text
//! Q = [ P₁₁   R1            ]
//!     [ R2    R1⁺·G3·R2⁺    ]
//! ```
//!
//! which equals `(Id ⊕ A)·P·(Id ⊕ A⁺)` for `A = R1⁺P₁₂`. When `P₁₂` has full
//! column rank the rank of `G2` is the hidden count and `A` is invertible.

use crate::error::{Error, Result};
use crate::matrix::{direct_sum_identity, max_abs, max_abs_diff, svd, upper_left, Matrix};
use crate::par::Execution;
use crate::simulate::EmpiricalData;
use crate::walk::ObservationData;

/// Ratio `σ_r / σ_{r+1}` below which the rank decision is reported as fragile.
pub const MIN_SPECTRAL_GAP: f64 = 10.0;

fn rank_from_values(s: &[f64], tol: f64) -> usize {
    match s.first() {
        Some(&smax) if smax > 0.0 => s.iter().filter(|&&v| v > tol * smax).count(),
        _ => 0,
    }
}

/// Number of singular values above `tol · σ_max`.
pub fn numerical_rank(a: &Matrix, tol: f64) -> usize {
    if a.nrows() == 0 || a.ncols() == 0 {
        return 0;
    }
    rank_from_values(&svd(a).s, tol)
}

/// Moore–Penrose inverse with relative cutoff `DEFAULT_RANK_TOL`.
pub fn pseudoinverse(a: &Matrix) -> Matrix {
    pseudoinverse_with_tol(a, crate::DEFAULT_RANK_TOL)
}

/// Moore–Penrose inverse from the singular value decomposition, discarding
/// singular values at or below `tol · σ_max`.
pub fn pseudoinverse_with_tol(a: &Matrix, tol: f64) -> Matrix {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return Matrix::zeros(n, m);
    }
    let svd = svd(a);
    let r = rank_from_values(&svd.s, tol);
    let mut out = Matrix::zeros(n, m);
    for k in 0..r {
        let inv = 1.0 / svd.s[k];
        for i in 0..n {
            let vik = svd.v_t[(k, i)] * inv;
            for j in 0..m {
                out[(i, j)] += vik * svd.u[(j, k)];
            }
        }
    }
    out
}

/// `A = R1·R2` with `R1` of full column rank and `R2` of full row rank.
#[derive(Debug, Clone, PartialEq)]
pub struct FullRankFactorization {
    pub left: Matrix,
    pub right: Matrix,
    pub rank: usize,
    /// Singular values of the factorized matrix, descending.
    pub singular_values: Vec<f64>,
}

/// Balanced split of the truncated SVD: `R1 = U_r Σ_r^½`, `R2 = Σ_r^½ V_rᵀ`.
/// A zero (or empty) matrix gives rank 0 and empty factors.
pub fn full_rank_factorization(a: &Matrix, tol: f64) -> FullRankFactorization {
    let (m, n) = a.shape();
    if m == 0 || n == 0 {
        return FullRankFactorization {
            left: Matrix::zeros(m, 0),
            right: Matrix::zeros(0, n),
            rank: 0,
            singular_values: Vec::new(),
        };
    }
    let svd = svd(a);
    let r = rank_from_values(&svd.s, tol);
    let root: Vec<f64> = svd.s[..r].iter().map(|s| s.sqrt()).collect();
    FullRankFactorization {
        left: Matrix::from_fn(m, r, |i, k| svd.u[(i, k)] * root[k]),
        right: Matrix::from_fn(r, n, |k, j| root[k] * svd.v_t[(k, j)]),
        rank: r,
        singular_values: svd.s,
    }
}

/// `(P₁₂P₂₁, P₁₂P₂₂P₂₁)` expressed through the observable data.
pub fn hidden_products(data: &ObservationData) -> Result<(Matrix, Matrix)> {
    if data.horizon() < 3 {
        return Err(Error::InsufficientData(format!(
            "three-step data are required, got horizon {}",
            data.horizon()
        )));
    }
    check_finite(data)?;
    let (p1, p2, p3) = (&data.mats[0], &data.mats[1], &data.mats[2]);
    let g2 = p2 - p1 * p1;
    let g3 = p3 - p1 * p2 - p2 * p1 + p1 * p1 * p1;
    Ok((g2, g3))
}

fn check_finite(data: &ObservationData) -> Result<()> {
    for (k, m) in data.mats.iter().enumerate() {
        if m.shape() != (data.observable, data.observable) {
            return Err(Error::DimensionMismatch(format!(
                "matrix {} has shape {:?}, expected {}×{}",
                k + 1,
                m.shape(),
                data.observable,
                data.observable
            )));
        }
        if let Some(row) = (0..m.nrows()).find(|&i| m.row(i).iter().any(|v| !v.is_finite())) {
            return Err(Error::InsufficientData(format!(
                "row {row} of matrix {} is undefined",
                k + 1
            )));
        }
    }
    Ok(())
}

/// Representative of the gauge class recovered from three-step data.
#[derive(Debug, Clone, PartialEq)]
pub struct CanonicalRepresentative {
    pub observable: usize,
    pub rank: usize,
    /// `(N + r) × (N + r)`.
    pub q: Matrix,
    pub r1: Matrix,
    pub r2: Matrix,
}

impl CanonicalRepresentative {
    pub fn size(&self) -> usize {
        self.observable + self.rank
    }
}

/// How the rank of `P₁₂P₂₁` was decided.
#[derive(Debug, Clone, PartialEq)]
pub struct RankDiagnostics {
    pub singular_values: Vec<f64>,
    pub rank: usize,
    /// Absolute cutoff `tol · σ_max`.
    pub cutoff: f64,
    /// `σ_r / σ_{r+1}`; infinite when no singular value was discarded (or
    /// when `σ_{r+1}` vanishes).
    pub gap_ratio: f64,
    /// Sampling noise scale of the data, when it comes from a finite stream.
    pub noise_floor: Option<f64>,
    /// Number of singular values above `noise_floor`.
    pub noise_rank: Option<usize>,
}

impl RankDiagnostics {
    pub fn small_gap(&self) -> bool {
        self.gap_ratio < MIN_SPECTRAL_GAP
    }

    fn new(singular_values: Vec<f64>, rank: usize, tol: f64) -> Self {
        let smax = singular_values.first().copied().unwrap_or(0.0);
        let gap_ratio = match (rank, singular_values.get(rank)) {
            (r, Some(&next)) if r > 0 && next > 0.0 => singular_values[r - 1] / next,
            _ => f64::INFINITY,
        };
        Self {
            singular_values,
            rank,
            cutoff: tol * smax,
            gap_ratio,
            noise_floor: None,
            noise_rank: None,
        }
    }
}

/// Builds the canonical representative; the rank of `G2` is decided with
/// relative cutoff `tol`.
pub fn recover_canonical(data: &ObservationData, tol: f64) -> Result<CanonicalRepresentative> {
    recover_canonical_with_diagnostics(data, tol).map(|(rep, _)| rep)
}

pub fn recover_canonical_with_diagnostics(
    data: &ObservationData,
    tol: f64,
) -> Result<(CanonicalRepresentative, RankDiagnostics)> {
    let (g2, g3) = hidden_products(data)?;
    let frf = full_rank_factorization(&g2, tol);
    let diagnostics = RankDiagnostics::new(frf.singular_values.clone(), frf.rank, tol);
    if diagnostics.small_gap() {
        log::warn!(
            "rank {} decided across a spectral gap of only {:.2} (singular values {:?})",
            frf.rank,
            diagnostics.gap_ratio,
            diagnostics.singular_values
        );
    }
    let rep = assemble(&data.mats[0], &g3, frf.left, frf.right);
    Ok((rep, diagnostics))
}

/// Same construction from an arbitrary full-rank factorization
/// `G2 = r1·r2`; any two such factorizations differ by an invertible
/// `r×r` factor and yield gauge-equivalent representatives.
pub fn canonical_from_factors(
    data: &ObservationData,
    r1: Matrix,
    r2: Matrix,
) -> Result<CanonicalRepresentative> {
    let (g2, g3) = hidden_products(data)?;
    let n = data.observable;
    if r1.nrows() != n || r2.ncols() != n || r1.ncols() != r2.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "factors {:?} and {:?} for {n} observable vertices",
            r1.shape(),
            r2.shape()
        )));
    }
    let residual = max_abs_diff(&(&r1 * &r2), &g2);
    if residual > 1e-8 * max_abs(&g2).max(f64::MIN_POSITIVE) {
        return Err(Error::DimensionMismatch(format!(
            "factors do not reproduce P12·P21 (residual {residual:.3e})"
        )));
    }
    Ok(assemble(&data.mats[0], &g3, r1, r2))
}

fn assemble(p11: &Matrix, g3: &Matrix, r1: Matrix, r2: Matrix) -> CanonicalRepresentative {
    let n = p11.nrows();
    let r = r1.ncols();
    // exact inverses of full-rank factors: no truncation wanted here
    let q22 = pseudoinverse_with_tol(&r1, 0.0) * g3 * pseudoinverse_with_tol(&r2, 0.0);
    let mut q = Matrix::zeros(n + r, n + r);
    q.view_mut((0, 0), (n, n)).copy_from(p11);
    q.view_mut((0, n), (n, r)).copy_from(&r1);
    q.view_mut((n, 0), (r, n)).copy_from(&r2);
    q.view_mut((n, n), (r, r)).copy_from(&q22);
    CanonicalRepresentative {
        observable: n,
        rank: r,
        q,
        r1,
        r2,
    }
}

/// Canonical representative from simulated data. The rank is decided by
/// `tol` exactly as for exact data; the diagnostics additionally report the
/// sampling noise floor `1/sqrt(min visits)` and how many singular values
/// clear it.
pub fn recover_canonical_empirical(
    data: &EmpiricalData,
    tol: f64,
) -> Result<(CanonicalRepresentative, RankDiagnostics)> {
    let (rep, mut diag) = recover_canonical_with_diagnostics(&data.estimate, tol)?;
    let floor = data.noise_floor();
    diag.noise_floor = Some(floor);
    diag.noise_rank = Some(diag.singular_values.iter().filter(|&&s| s > floor).count());
    Ok((rep, diag))
}

/// Recovered vertex count `N + r`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct VertexCount {
    pub count: usize,
    /// Set when `r = N`: the rank of `P₁₂P₂₁` is saturated, so the data
    /// cannot exclude more hidden vertices than `r`.
    pub lower_bound: bool,
}

pub fn recovered_vertex_count(rep: &CanonicalRepresentative) -> VertexCount {
    VertexCount {
        count: rep.observable + rep.rank,
        lower_bound: rep.rank > 0 && rep.rank == rep.observable,
    }
}

/// `max_{k ≤ kmax} ‖(P^k)₁₁ − (Q^k)₁₁‖` (largest absolute entry).
pub fn verify_redundancy(p: &Matrix, q: &Matrix, observable: usize, kmax: usize) -> Result<f64> {
    if !p.is_square() || !q.is_square() || observable > p.nrows() || observable > q.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "matrices {:?} and {:?} with observable count {observable}",
            p.shape(),
            q.shape()
        )));
    }
    let mut pk = Matrix::identity(p.nrows(), p.nrows());
    let mut qk = Matrix::identity(q.nrows(), q.nrows());
    let mut worst = 0.0_f64;
    for _ in 0..kmax {
        pk = &pk * p;
        qk = &qk * q;
        worst = worst.max(max_abs_diff(&upper_left(&pk, observable), &upper_left(&qk, observable)));
    }
    Ok(worst)
}

/// Adds `eps` along the hidden cyclic shift and subtracts it from the hidden
/// diagonal, so hidden row sums (and `P₁₁`, `P₁₂`, `P₂₁`) are unchanged.
pub fn perturb_hidden_block(p: &Matrix, observable: usize, eps: f64) -> Result<Matrix> {
    let n = p.nrows();
    let hidden = n.saturating_sub(observable);
    if hidden < 2 {
        return Err(Error::InvalidParameter(format!(
            "need at least two hidden vertices, got {hidden}"
        )));
    }
    let mut out = p.clone();
    for i in 0..hidden {
        let row = observable + i;
        out[(row, row)] -= eps;
        out[(row, observable + (i + 1) % hidden)] += eps;
    }
    Ok(out)
}

/// Recovers many instances at once; results are in input order.
pub fn recover_batch(
    data: &[ObservationData],
    tol: f64,
    exec: Execution,
) -> Vec<Result<CanonicalRepresentative>> {
    exec.map_slice(data, |d| recover_canonical(d, tol))
}

/// `(Id ⊕ A)·P·(Id ⊕ A⁺)` with `A = R1⁺P₁₂`: what the representative built
/// from the factor `r1` should equal, given the true `p`.
pub fn predicted_representative(p: &Matrix, observable: usize, r1: &Matrix) -> Matrix {
    let hidden = p.nrows() - observable;
    let p12 = p.view((0, observable), (observable, hidden)).into_owned();
    let a = pseudoinverse_with_tol(r1, 0.0) * p12;
    let a_pinv = pseudoinverse(&a);
    direct_sum_identity(observable, &a) * p * direct_sum_identity(observable, &a_pinv)
}
