//! The hidden-block gauge `P ↦ (Id ⊕ A)·P·(Id ⊕ A⁻¹)`, the conditions that
//! single out transition matrices of symmetric kernels, and recovery of
//! the kernel from such a matrix.
//!
//! A matrix is the row normalization of a positive symmetric kernel exactly
//! when it is positive (P1), row-stochastic (P2), and the ratio matrix
//! `P̂(x,y) = P(x,y) / P(y,x)` is transitive (P3). In that case
//! `P̂(x,y) = m(y) / m(x)`, which gives `m` and hence `C = diag(m)·P` up to a
//! global scale.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{direct_sum_identity, max_abs, max_abs_diff, Matrix};
use crate::par::Execution;
use crate::recovery::{numerical_rank, pseudoinverse};

/// Invertible `M×M` matrix acting on the hidden block.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeElement {
    a: Matrix,
    inv: Matrix,
}

impl GaugeElement {
    /// Accepts `a` when its numerical rank at relative tolerance `tol` is full.
    pub fn new(a: Matrix, tol: f64) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::DimensionMismatch(format!("gauge matrix {:?} is not square", a.shape())));
        }
        let size = a.nrows();
        let rank = numerical_rank(&a, tol);
        if rank < size {
            return Err(Error::SingularGauge { rank, size });
        }
        let inv = a.clone().try_inverse().ok_or(Error::SingularGauge { rank, size })?;
        Ok(Self { a, inv })
    }

    pub fn identity(m: usize) -> Self {
        Self {
            a: Matrix::identity(m, m),
            inv: Matrix::identity(m, m),
        }
    }

    /// Positive diagonal gauge.
    pub fn diagonal(entries: &[f64]) -> Result<Self> {
        if let Some(i) = entries.iter().position(|v| !(*v > 0.0 && v.is_finite())) {
            return Err(Error::InvalidParameter(format!(
                "diagonal gauge entry {i} must be positive, got {}",
                entries[i]
            )));
        }
        let m = entries.len();
        Ok(Self {
            a: Matrix::from_fn(m, m, |i, j| if i == j { entries[i] } else { 0.0 }),
            inv: Matrix::from_fn(m, m, |i, j| if i == j { 1.0 / entries[i] } else { 0.0 }),
        })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.a
    }

    pub fn inverse(&self) -> &Matrix {
        &self.inv
    }

    pub fn size(&self) -> usize {
        self.a.nrows()
    }

    pub fn compose(&self, other: &GaugeElement) -> GaugeElement {
        GaugeElement {
            a: &self.a * &other.a,
            inv: &other.inv * &self.inv,
        }
    }

    pub fn inverted(&self) -> GaugeElement {
        GaugeElement {
            a: self.inv.clone(),
            inv: self.a.clone(),
        }
    }
}

/// `(Id_N ⊕ A)·P·(Id_N ⊕ A⁻¹)`.
pub fn gauge_action(a: &GaugeElement, p: &Matrix, observable: usize) -> Result<Matrix> {
    if !p.is_square() || observable + a.size() != p.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "gauge of size {} on a {:?} matrix with {observable} observable vertices",
            a.size(),
            p.shape()
        )));
    }
    Ok(direct_sum_identity(observable, &a.a) * p * direct_sum_identity(observable, &a.inv))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Positivity {
    Positive,
    Nonnegative,
    Fails,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    pub p1: Positivity,
    /// `max_x |Σ_y P(x,y) − 1|`.
    pub p2_residual: f64,
    /// Largest relative transitivity defect of `P̂`; `None` when an
    /// off-diagonal zero makes `P̂` undefined.
    pub p3_residual: Option<f64>,
    pub overall: bool,
}

impl ConditionReport {
    fn p3_ok(&self, tol: f64) -> bool {
        self.p3_residual.is_some_and(|r| r <= tol)
    }
}

/// Checks (P1)–(P3). With `strict_positive` every entry must be positive;
/// otherwise nonnegative entries suffice for (P1).
pub fn check_conditions(p: &Matrix, strict_positive: bool, tol: f64) -> ConditionReport {
    check_conditions_with(p, strict_positive, tol, Execution::default())
}

pub fn check_conditions_with(
    p: &Matrix,
    strict_positive: bool,
    tol: f64,
    exec: Execution,
) -> ConditionReport {
    let p1 = if p.iter().all(|&v| v > 0.0) {
        Positivity::Positive
    } else if p.iter().all(|&v| v >= 0.0) {
        Positivity::Nonnegative
    } else {
        Positivity::Fails
    };
    let p2_residual = (0..p.nrows())
        .map(|x| (p.row(x).sum() - 1.0).abs())
        .fold(0.0, f64::max);
    let p3_residual = ratio_matrix(p).map(|r| transitivity_defect(&r, exec));
    let p1_ok = match p1 {
        Positivity::Positive => true,
        Positivity::Nonnegative => !strict_positive,
        Positivity::Fails => false,
    };
    let overall = p1_ok && p2_residual <= tol && p3_residual.is_some_and(|r| r <= tol);
    ConditionReport {
        p1,
        p2_residual,
        p3_residual,
        overall,
    }
}

/// `P ⊘ Pᵀ`, with the diagonal set to 1. `None` if some off-diagonal entry
/// is not positive.
pub fn ratio_matrix(p: &Matrix) -> Option<Matrix> {
    let n = p.nrows();
    for x in 0..n {
        for y in 0..n {
            if x != y && (p[(x, y)].is_nan() || p[(x, y)] <= 0.0) {
                return None;
            }
        }
    }
    Some(Matrix::from_fn(n, n, |x, y| if x == y { 1.0 } else { p[(x, y)] / p[(y, x)] }))
}

/// `max_{i,j,k} |R(i,k)·R(k,j) − R(i,j)| / |R(i,j)|`.
pub fn transitivity_defect(r: &Matrix, exec: Execution) -> f64 {
    let n = r.nrows();
    exec.map(n, |i| {
        let mut worst = 0.0_f64;
        for k in 0..n {
            let rik = r[(i, k)];
            for j in 0..n {
                let rij = r[(i, j)];
                worst = worst.max((rik * r[(k, j)] - rij).abs() / rij.abs());
            }
        }
        worst
    })
    .into_iter()
    .fold(0.0, f64::max)
}

/// Interaction matrix recovered from a transition matrix, scaled so that
/// `m(anchor) = 1`; the true kernel is `λ·c` for some unknown `λ > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredInteraction {
    pub c: Matrix,
    pub m: Vec<f64>,
    pub anchor: usize,
}

/// Requires (P1) with positive off-diagonal entries and (P3). (P2) is not
/// needed: after a positive diagonal gauge the result is `g·C·g` for a
/// positive vector `g`, still symmetric.
pub fn recover_interaction(p: &Matrix, tol: f64) -> Result<RecoveredInteraction> {
    if !p.is_square() || p.nrows() == 0 {
        return Err(Error::DimensionMismatch(format!("matrix {:?}", p.shape())));
    }
    let report = check_conditions(p, false, tol);
    if report.p1 == Positivity::Fails {
        return Err(Error::ConditionsViolated("negative entries (P1)".into()));
    }
    if !report.p3_ok(tol) {
        return Err(Error::ConditionsViolated(match report.p3_residual {
            None => "off-diagonal zero entries".into(),
            Some(r) => format!("ratio matrix not transitive (P3 residual {r:.3e})"),
        }));
    }
    let n = p.nrows();
    let anchor = 0;
    let m: Vec<f64> = (0..n)
        .map(|x| if x == anchor { 1.0 } else { p[(anchor, x)] / p[(x, anchor)] })
        .collect();
    let c = Matrix::from_fn(n, n, |x, y| m[x] * p[(x, y)]);
    let asym = max_abs_diff(&c, &c.transpose());
    if asym > tol * max_abs(&c) {
        return Err(Error::ConditionsViolated(format!(
            "recovered kernel not symmetric (defect {asym:.3e})"
        )));
    }
    Ok(RecoveredInteraction { c, m, anchor })
}

/// Whether `g(A, P̃)` is row-stochastic: `P̃·v = v` for
/// `v = (1_N, A⁻¹·1_M)`.
pub fn check_a_prime(a: &GaugeElement, ptilde: &Matrix, observable: usize, tol: f64) -> Result<bool> {
    if observable + a.size() != ptilde.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "gauge of size {} for a {:?} matrix with {observable} observable vertices",
            a.size(),
            ptilde.shape()
        )));
    }
    let m = a.size();
    let ones = nalgebra::DVector::from_element(m, 1.0);
    let hidden = a.inverse() * ones;
    let v = nalgebra::DVector::from_fn(observable + m, |i, _| {
        if i < observable {
            1.0
        } else {
            hidden[i - observable]
        }
    });
    let residual = (ptilde * &v - &v).amax();
    Ok(residual <= tol)
}

/// Perron–Frobenius form of [`check_a_prime`] for positive row-stochastic
/// `P̃`: the eigenvalue 1 is simple, so the condition becomes `A·1 = 1`.
pub fn preserves_ones(a: &GaugeElement, tol: f64) -> bool {
    let ones = nalgebra::DVector::from_element(a.size(), 1.0);
    (a.matrix() * &ones - ones).amax() <= tol
}

/// Conditions on `g(A, P̃)` for a positive diagonal `A`. (P1) and (P3)
/// survive such a gauge; (P2) in general does not.
pub fn check_diagonal_preservation(
    diag: &[f64],
    ptilde: &Matrix,
    observable: usize,
    tol: f64,
) -> Result<ConditionReport> {
    let a = GaugeElement::diagonal(diag)?;
    let moved = gauge_action(&a, ptilde, observable)?;
    Ok(check_conditions(&moved, false, tol))
}

/// The unique `A` with `g(A, P̃) = P`, namely `A = P₂₁·P̃₂₁⁺`, provided `P̃₂₁`
/// has full row rank.
pub fn solve_gauge(p: &Matrix, ptilde: &Matrix, observable: usize, tol: f64) -> Result<GaugeElement> {
    if p.shape() != ptilde.shape() || !p.is_square() || observable > p.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} and {:?} with {observable} observable vertices",
            p.shape(),
            ptilde.shape()
        )));
    }
    let hidden = p.nrows() - observable;
    let p21 = p.view((observable, 0), (hidden, observable)).into_owned();
    let pt21 = ptilde.view((observable, 0), (hidden, observable)).into_owned();
    let rank = numerical_rank(&pt21, crate::DEFAULT_RANK_TOL);
    if rank < hidden {
        return Err(Error::RankDeficient { rank, expected: hidden });
    }
    let a = p21 * pseudoinverse(&pt21);
    let g = match GaugeElement::new(a, crate::DEFAULT_RANK_TOL) {
        Ok(g) => g,
        Err(_) => return Err(Error::NoSolution { residual: f64::INFINITY }),
    };
    let residual = max_abs_diff(&gauge_action(&g, ptilde, observable)?, p);
    if residual > tol {
        return Err(Error::NoSolution { residual });
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Graph;
    use crate::walk::{build_interaction, normalize, Conductivity, TransitionMatrix};

    fn p5(theta: f64) -> TransitionMatrix {
        let g = Graph::path(5, 3).unwrap();
        normalize(&build_interaction(&g, &Conductivity::uniform(5), 2.0, theta).unwrap()).unwrap()
    }

    #[test]
    fn identity_and_diagonal_action() {
        let t = p5(1.0);
        assert_eq!(gauge_action(&GaugeElement::identity(2), &t.p, 3).unwrap(), t.p);
        let d = GaugeElement::diagonal(&[2.0, 3.0]).unwrap();
        let moved = gauge_action(&d, &t.p, 3).unwrap();
        assert!((moved[(0, 3)] - t.p[(0, 3)] / 2.0).abs() < 1e-16);
        assert!((moved[(4, 0)] - 3.0 * t.p[(4, 0)]).abs() < 1e-16);
        assert!((moved[(3, 4)] - t.p[(3, 4)] * 2.0 / 3.0).abs() < 1e-16);
        assert!(gauge_action(&d, &t.p, 2).is_err());
    }

    #[test]
    fn group_law() {
        let t = p5(1.0);
        let a = GaugeElement::new(Matrix::from_row_slice(2, 2, &[1.0, 0.5, -0.3, 2.0]), 1e-9).unwrap();
        let b = GaugeElement::new(Matrix::from_row_slice(2, 2, &[0.7, 0.0, 1.2, 1.1]), 1e-9).unwrap();
        let lhs = gauge_action(&a.compose(&b), &t.p, 3).unwrap();
        let rhs = gauge_action(&a, &gauge_action(&b, &t.p, 3).unwrap(), 3).unwrap();
        assert!(max_abs_diff(&lhs, &rhs) <= 1e-10);
    }

    #[test]
    fn singular_gauge_rejected() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        assert!(matches!(
            GaugeElement::new(a, 1e-9),
            Err(Error::SingularGauge { rank: 1, size: 2 })
        ));
    }

    #[test]
    fn conditions_of_normalized_kernels() {
        for theta in [0.0, 1.0] {
            let r = check_conditions(&p5(theta).p, false, 1e-10);
            assert!(r.overall, "{r:?}");
        }
        let strict = check_conditions(&p5(0.0).p, true, 1e-10);
        assert_eq!(strict.p1, Positivity::Nonnegative);
        assert!(!strict.overall);
    }

    #[test]
    fn ratio_matrices_are_transitive() {
        let v = [0.3, 1.7, 2.2, 0.9];
        let r = Matrix::from_fn(4, 4, |i, j| v[j] / v[i]);
        assert!(transitivity_defect(&r, Execution::Sequential) <= 1e-12);
    }

    #[test]
    fn doubly_stochastic_counterexample_fails_p3() {
        let p = Matrix::from_row_slice(3, 3, &[0.5, 0.3, 0.2, 0.2, 0.5, 0.3, 0.3, 0.2, 0.5]);
        let r = check_conditions(&p, true, 1e-10);
        assert_eq!(r.p1, Positivity::Positive);
        assert!(r.p2_residual < 1e-15);
        // R(0,1) R(1,2) = 1.5 · 1.5 against R(0,2) = 2/3
        let defect = r.p3_residual.unwrap();
        assert!(defect >= (2.25 - 2.0 / 3.0) / (2.0 / 3.0) - 1e-12);
        assert!(!r.overall);
        assert!(matches!(recover_interaction(&p, 1e-10), Err(Error::ConditionsViolated(_))));
    }

    #[test]
    fn interaction_recovered_up_to_scale() {
        let g = Graph::path(5, 3).unwrap();
        let c0 = build_interaction(&g, &Conductivity::uniform(5), 2.0, 1.0).unwrap();
        let t = normalize(&c0).unwrap();
        let rec = recover_interaction(&t.p, 1e-10).unwrap();
        let lambda = t.row_norms[0];
        assert!(max_abs_diff(&(rec.c.clone() * lambda), &c0.c) <= 1e-12);
        assert!(max_abs_diff(&rec.c, &rec.c.transpose()) <= 1e-10);
        assert!((rec.c[(0, 1)] / rec.c[(0, 2)] - 4.0).abs() < 1e-12);
    }

    #[test]
    fn a_prime_membership() {
        let t = p5(1.0);
        assert!(check_a_prime(&GaugeElement::identity(2), &t.p, 3, 1e-12).unwrap());
        let stoch = GaugeElement::new(Matrix::from_row_slice(2, 2, &[1.4, -0.4, 0.3, 0.7]), 1e-9).unwrap();
        assert!(preserves_ones(&stoch, 1e-12));
        assert!(check_a_prime(&stoch, &t.p, 3, 1e-12).unwrap());
        let twice = GaugeElement::new(Matrix::identity(2, 2) * 2.0, 1e-9).unwrap();
        assert!(!preserves_ones(&twice, 1e-12));
        assert!(!check_a_prime(&twice, &t.p, 3, 1e-12).unwrap());
    }

    #[test]
    fn diagonal_gauges_keep_p1_and_p3() {
        let t = p5(1.0);
        let r = check_diagonal_preservation(&[1.0, 1.0], &t.p, 3, 1e-10).unwrap();
        assert!(r.overall);
        let r = check_diagonal_preservation(&[0.4, 2.5], &t.p, 3, 1e-10).unwrap();
        assert_eq!(r.p1, Positivity::Positive);
        assert!(r.p3_residual.unwrap() <= 1e-10);
        assert!(r.p2_residual > 1e-3);
    }

    #[test]
    fn solve_gauge_examples() {
        let t = p5(1.0);
        let id = solve_gauge(&t.p, &t.p, 3, 1e-10).unwrap();
        assert!(max_abs_diff(id.matrix(), &Matrix::identity(2, 2)) <= 1e-10);

        let a0 = GaugeElement::new(Matrix::from_row_slice(2, 2, &[0.9, 0.4, -0.2, 1.3]), 1e-9).unwrap();
        let moved = gauge_action(&a0, &t.p, 3).unwrap();
        let a = solve_gauge(&moved, &t.p, 3, 1e-10).unwrap();
        assert!(max_abs_diff(a.matrix(), a0.matrix()) <= 1e-8);

        let other = Matrix::from_fn(5, 5, |i, j| ((i * 5 + j) as f64 * 1.3).sin().abs() + 0.1);
        let rows: Vec<f64> = (0..5).map(|i| other.row(i).sum()).collect();
        let other = Matrix::from_fn(5, 5, |i, j| other[(i, j)] / rows[i]);
        assert!(matches!(solve_gauge(&other, &t.p, 3, 1e-8), Err(Error::NoSolution { .. })));
    }
}
