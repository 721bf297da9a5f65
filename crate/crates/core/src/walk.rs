//! Forward model: interaction matrix, transition matrix, block split,
//! observation data and the graph fractional operators.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{all_pairs_distances, DistanceMatrix, Graph};
use crate::matrix::{upper_left, Matrix};

/// Default exponent of the jump kernel.
pub const DEFAULT_ALPHA: f64 = 2.5;
/// Default diagonal weight: `C(x,x) = theta * gamma(x)`.
pub const DEFAULT_THETA: f64 = 1.0;

/// Positive vertex weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Conductivity(Vec<f64>);

impl Conductivity {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((vertex, &value)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(Error::NonpositiveConductivity { vertex, value });
        }
        Ok(Self(values))
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0; n])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl TryFrom<Vec<f64>> for Conductivity {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        Self::new(v)
    }
}

impl From<Conductivity> for Vec<f64> {
    fn from(c: Conductivity) -> Self {
        c.0
    }
}

/// Symmetric kernel `C(x,y) = sqrt(gamma(x) gamma(y)) / d(x,y)^alpha` with
/// diagonal `theta * gamma(x)`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionMatrix {
    pub c: Matrix,
    pub alpha: f64,
    pub theta: f64,
    pub observable: usize,
}

pub fn build_interaction(
    g: &Graph,
    gamma: &Conductivity,
    alpha: f64,
    theta: f64,
) -> Result<InteractionMatrix> {
    let dist = all_pairs_distances(g)?;
    interaction_from_distances(&dist, g.observable_count(), gamma, alpha, theta)
}

pub fn interaction_from_distances(
    dist: &DistanceMatrix,
    observable: usize,
    gamma: &Conductivity,
    alpha: f64,
    theta: f64,
) -> Result<InteractionMatrix> {
    let n = dist.n();
    if gamma.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "conductivity has {} entries for {} vertices",
            gamma.len(),
            n
        )));
    }
    check_exponent(alpha)?;
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::InvalidParameter(format!("theta must be nonnegative, got {theta}")));
    }
    let root: Vec<f64> = gamma.values().iter().map(|g| g.sqrt()).collect();
    let mut c = Matrix::zeros(n, n);
    for x in 0..n {
        c[(x, x)] = theta * gamma.values()[x];
        for y in x + 1..n {
            let v = root[x] * root[y] / (dist.get(x, y) as f64).powf(alpha);
            c[(x, y)] = v;
            c[(y, x)] = v;
        }
    }
    Ok(InteractionMatrix {
        c,
        alpha,
        theta,
        observable,
    })
}

fn check_exponent(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")))
    }
}

/// Row-stochastic matrix together with the row sums `m` of the kernel it
/// was normalized from.
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionMatrix {
    pub p: Matrix,
    pub observable: usize,
    pub row_norms: DVector<f64>,
}

impl TransitionMatrix {
    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn hidden_count(&self) -> usize {
        self.n() - self.observable
    }

    pub fn blocks(&self) -> Blocks {
        blocks(&self.p, self.observable)
    }
}

/// `P(x,y) = C(x,y) / m(x)` with `m(x) = sum_y C(x,y)`.
pub fn normalize(c: &InteractionMatrix) -> Result<TransitionMatrix> {
    let n = c.c.nrows();
    let m = DVector::from_fn(n, |x, _| c.c.row(x).sum());
    if let Some(x) = m.iter().position(|v| v.is_nan() || *v <= 0.0) {
        return Err(Error::ZeroRowSum(x));
    }
    let p = Matrix::from_fn(n, n, |x, y| c.c[(x, y)] / m[x]);
    Ok(TransitionMatrix {
        p,
        observable: c.observable,
        row_norms: m,
    })
}

/// The 2×2 block split over (B, X∖B).
#[derive(Debug, Clone, PartialEq)]
pub struct Blocks {
    pub p11: Matrix,
    pub p12: Matrix,
    pub p21: Matrix,
    pub p22: Matrix,
}

pub fn blocks(p: &Matrix, observable: usize) -> Blocks {
    let n = p.nrows();
    let h = n - observable;
    Blocks {
        p11: p.view((0, 0), (observable, observable)).into_owned(),
        p12: p.view((0, observable), (observable, h)).into_owned(),
        p21: p.view((observable, 0), (h, observable)).into_owned(),
        p22: p.view((observable, observable), (h, h)).into_owned(),
    }
}

impl Blocks {
    pub fn reassemble(&self) -> Matrix {
        let nb = self.p11.nrows();
        let h = self.p22.nrows();
        let mut p = Matrix::zeros(nb + h, nb + h);
        p.view_mut((0, 0), (nb, nb)).copy_from(&self.p11);
        p.view_mut((0, nb), (nb, h)).copy_from(&self.p12);
        p.view_mut((nb, 0), (h, nb)).copy_from(&self.p21);
        p.view_mut((nb, nb), (h, h)).copy_from(&self.p22);
        p
    }
}

/// Observable blocks of the first `K` powers: `mats[k-1] = (P^k)_11`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationData {
    pub observable: usize,
    pub mats: Vec<Matrix>,
}

impl ObservationData {
    pub fn horizon(&self) -> usize {
        self.mats.len()
    }

    /// Keeps only the first `k` matrices.
    pub fn truncated(&self, k: usize) -> Self {
        Self {
            observable: self.observable,
            mats: self.mats.iter().take(k).cloned().collect(),
        }
    }
}

/// Exact `Λ_K` from dense powers of `p`.
pub fn exact_observation_data(p: &Matrix, observable: usize, horizon: usize) -> Result<ObservationData> {
    if horizon == 0 {
        return Err(Error::InvalidParameter("horizon must be at least 1".into()));
    }
    if !p.is_square() || observable == 0 || observable > p.nrows() {
        return Err(Error::DimensionMismatch(format!(
            "matrix {:?} with observable count {observable}",
            p.shape()
        )));
    }
    let mut mats = Vec::with_capacity(horizon);
    let mut pk = p.clone();
    for k in 1..=horizon {
        if k > 1 {
            pk = &pk * p;
        }
        mats.push(upper_left(&pk, observable));
    }
    Ok(ObservationData { observable, mats })
}

/// `cns * sum_{y != x} sqrt(gamma(x) gamma(y)) (u(y) - u(x)) / d(x,y)^alpha`.
pub fn apply_fractional_conductivity(
    g: &Graph,
    gamma: &Conductivity,
    alpha: f64,
    u: &[f64],
    cns: f64,
) -> Result<Vec<f64>> {
    let n = g.n();
    if gamma.len() != n || u.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "graph has {n} vertices, conductivity {} and input {}",
            gamma.len(),
            u.len()
        )));
    }
    check_exponent(alpha)?;
    let dist = all_pairs_distances(g)?;
    let root: Vec<f64> = gamma.values().iter().map(|v| v.sqrt()).collect();
    Ok((0..n)
        .map(|x| {
            let s: f64 = (0..n)
                .filter(|&y| y != x)
                .map(|y| root[x] * root[y] * (u[y] - u[x]) / (dist.get(x, y) as f64).powf(alpha))
                .sum();
            cns * s
        })
        .collect())
}

/// Graph fractional Laplacian: the conductivity operator with `gamma = 1`.
pub fn apply_fractional_laplacian(g: &Graph, alpha: f64, u: &[f64], cns: f64) -> Result<Vec<f64>> {
    apply_fractional_conductivity(g, &Conductivity::uniform(g.n()), alpha, u, cns)
}

/// `m ⊙ (P u - u)`, which equals the conductivity operator with `cns = 1`.
pub fn generator_form(t: &TransitionMatrix, u: &[f64]) -> Vec<f64> {
    let uv = DVector::from_column_slice(u);
    let pu = &t.p * &uv;
    (0..u.len()).map(|x| t.row_norms[x] * (pu[x] - u[x])).collect()
}
