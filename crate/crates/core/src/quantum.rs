//! Finite-dimensional state and observable algebra.
//!
//! Matrices are dense `nalgebra` matrices over `Complex64`. Observables are
//! stored by their spectral data (distinct eigenvalues in non-increasing order
//! and the matching eigenspace projectors), which is the form every
//! measurement formula in this crate consumes.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Entrywise tolerance for structural checks (hermiticity, trace, unitarity,
/// projector algebra).
pub const STRUCTURAL_TOL: f64 = 1e-10;
/// Eigenvalues closer than this are merged into one eigenspace.
pub const EIGEN_MERGE_GAP: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    pub structural: f64,
    pub eigen_gap: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            structural: STRUCTURAL_TOL,
            eigen_gap: EIGEN_MERGE_GAP,
        }
    }
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

/// Largest entrywise `|m_ij - conj(m_ji)|`.
pub fn max_asymmetry(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for i in 0..n {
        for j in i..n {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Largest entrywise modulus of `a - b`.
pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `Re tr(a b)`, summed entrywise without forming the product.
pub fn trace_product(a: &CMatrix, b: &CMatrix) -> f64 {
    let n = a.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (a[(i, j)] * b[(j, i)]).re;
        }
    }
    acc
}

fn check_square(m: &CMatrix) -> Result<usize> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::Empty);
    }
    if m.nrows() != m.ncols() {
        return Err(Error::NotSquare {
            rows: m.nrows(),
            cols: m.ncols(),
        });
    }
    Ok(m.nrows())
}

fn check_hermitian(m: &CMatrix, tol: f64) -> Result<usize> {
    let n = check_square(m)?;
    let max_asymmetry = max_asymmetry(m);
    if !(max_asymmetry <= tol) {
        return Err(Error::NotHermitian { max_asymmetry });
    }
    Ok(n)
}

fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

pub(crate) fn check_dims(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}

/// Spectral data of a Hermitian operator.
#[derive(Debug, Clone, PartialEq)]
pub struct Observable {
    dim: usize,
    eigenvalues: Vec<f64>,
    projectors: Vec<CMatrix>,
}

impl Observable {
    /// Builds an observable from explicit spectral data, validating
    /// orthogonality and completeness of the projectors. Entries are
    /// reordered so that eigenvalues are non-increasing.
    pub fn from_spectrum(eigenvalues: Vec<f64>, projectors: Vec<CMatrix>) -> Result<Self> {
        Self::from_spectrum_with(eigenvalues, projectors, &Tolerances::default())
    }

    pub fn from_spectrum_with(eigenvalues: Vec<f64>, projectors: Vec<CMatrix>, tol: &Tolerances) -> Result<Self> {
        if eigenvalues.is_empty() || eigenvalues.len() != projectors.len() {
            return Err(Error::InvalidObservable(format!(
                "{} eigenvalues for {} projectors",
                eigenvalues.len(),
                projectors.len()
            )));
        }
        if let Some(a) = eigenvalues.iter().find(|a| !a.is_finite()) {
            return Err(Error::InvalidObservable(format!("eigenvalue {a} is not finite")));
        }
        let dim = check_square(&projectors[0])?;
        let mut pairs: Vec<(f64, CMatrix)> = eigenvalues.into_iter().zip(projectors).collect();
        pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
        for w in pairs.windows(2) {
            if w[0].0 - w[1].0 < tol.eigen_gap {
                return Err(Error::InvalidObservable(format!(
                    "eigenvalues {} and {} are not distinct",
                    w[0].0, w[1].0
                )));
            }
        }
        let mut sum = CMatrix::zeros(dim, dim);
        for (i, (_, p)) in pairs.iter().enumerate() {
            check_dims(dim, check_hermitian(p, tol.structural)?)?;
            for (j, (_, q)) in pairs.iter().enumerate() {
                let expected = if i == j { p.clone() } else { CMatrix::zeros(dim, dim) };
                let dev = max_abs_diff(&(p * q), &expected);
                if dev > tol.structural {
                    return Err(Error::InvalidObservable(format!(
                        "projectors {i} and {j} violate P_i P_j = delta_ij P_i by {dev:e}"
                    )));
                }
            }
            sum += p;
        }
        let dev = max_abs_diff(&sum, &CMatrix::identity(dim, dim));
        if dev > tol.structural {
            return Err(Error::InvalidObservable(format!(
                "projectors do not sum to the identity (deviation {dev:e})"
            )));
        }
        let (eigenvalues, projectors) = pairs.into_iter().unzip();
        Ok(Self {
            dim,
            eigenvalues,
            projectors,
        })
    }

    /// Observable diagonal in the computational basis. Repeated values share
    /// one eigenspace.
    pub fn diagonal(values: &[f64]) -> Result<Self> {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            values.len(),
            values.iter().map(|&v| Complex64::new(v, 0.0)),
        ));
        spectral_decompose(&m)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Distinct eigenvalues, non-increasing.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn projectors(&self) -> &[CMatrix] {
        &self.projectors
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }

    /// `sum_i a_i P_i`.
    pub fn matrix(&self) -> CMatrix {
        let mut m = CMatrix::zeros(self.dim, self.dim);
        for (a, p) in self.eigenvalues.iter().zip(&self.projectors) {
            m += p.scale(*a);
        }
        m
    }

    /// `max a - min a`.
    pub fn spectral_diameter(&self) -> f64 {
        self.eigenvalues[0] - self.eigenvalues[self.eigenvalues.len() - 1]
    }

    /// True when every eigenvalue is +1 or -1.
    pub fn is_dichotomic(&self) -> bool {
        self.eigenvalues.iter().all(|a| (a.abs() - 1.0).abs() <= STRUCTURAL_TOL)
    }
}

/// Spectral decomposition of a Hermitian matrix, merging eigenvalues closer
/// than [`EIGEN_MERGE_GAP`].
pub fn spectral_decompose(h: &CMatrix) -> Result<Observable> {
    spectral_decompose_with(h, &Tolerances::default())
}

pub fn spectral_decompose_with(h: &CMatrix, tol: &Tolerances) -> Result<Observable> {
    let dim = check_hermitian(h, tol.structural)?;
    let eig = hermitian_part(h).symmetric_eigen();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));

    let mut eigenvalues = Vec::new();
    let mut projectors: Vec<CMatrix> = Vec::new();
    let mut group_sum = 0.0;
    let mut group_len = 0usize;
    let mut last = f64::NAN;
    for &idx in &order {
        let value = eig.eigenvalues[idx];
        let v = eig.eigenvectors.column(idx);
        let outer = v * v.adjoint();
        if group_len > 0 && last - value < tol.eigen_gap {
            *projectors.last_mut().expect("open group") += outer;
            group_sum += value;
            group_len += 1;
            *eigenvalues.last_mut().expect("open group") = group_sum / group_len as f64;
        } else {
            eigenvalues.push(value);
            projectors.push(outer);
            group_sum = value;
            group_len = 1;
        }
        last = value;
    }
    Ok(Observable {
        dim,
        eigenvalues,
        projectors,
    })
}

/// A density matrix: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    matrix: CMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        Self::new_with(matrix, &Tolerances::default())
    }

    pub fn new_with(matrix: CMatrix, tol: &Tolerances) -> Result<Self> {
        check_hermitian(&matrix, tol.structural)?;
        let trace = matrix.trace();
        if (trace.re - 1.0).abs() > tol.structural || trace.im.abs() > tol.structural {
            return Err(Error::TraceNotOne { trace: trace.re });
        }
        let min_eigenvalue = hermitian_part(&matrix)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min);
        if min_eigenvalue < -tol.structural {
            return Err(Error::NotPositive { min_eigenvalue });
        }
        Ok(Self { matrix })
    }

    /// `|psi><psi|` for a (not necessarily normalized) nonzero vector.
    pub fn pure(amplitudes: &[Complex64]) -> Result<Self> {
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if amplitudes.is_empty() {
            return Err(Error::Empty);
        }
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(invalid("amplitudes", "state vector has zero or non-finite norm"));
        }
        let v = nalgebra::DVector::from_iterator(amplitudes.len(), amplitudes.iter().map(|a| a / norm));
        Ok(Self {
            matrix: &v * v.adjoint(),
        })
    }

    /// Diagonal state with the given populations.
    pub fn from_populations(populations: &[f64]) -> Result<Self> {
        let m = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            populations.len(),
            populations.iter().map(|&p| Complex64::new(p, 0.0)),
        ));
        Self::new(m)
    }

    pub fn maximally_mixed(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Empty);
        }
        Self::from_populations(&vec![1.0 / dim as f64; dim])
    }

    /// Wraps a matrix produced by a trace-preserving, positivity-preserving map.
    pub(crate) fn from_trusted(matrix: CMatrix) -> Self {
        Self { matrix }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> CMatrix {
        self.matrix
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        purity(self)
    }

    /// Smallest eigenvalue; used by verification batteries.
    pub fn min_eigenvalue(&self) -> f64 {
        hermitian_part(&self.matrix)
            .symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }
}

/// Born-rule weights over the distinct eigenvalues of an observable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectrumWeights(Vec<f64>);

impl SpectrumWeights {
    pub fn new(probabilities: Vec<f64>) -> Result<Self> {
        if probabilities.is_empty() {
            return Err(Error::InvalidWeights("no weights".into()));
        }
        if let Some(p) = probabilities.iter().find(|p| !(**p >= 0.0) || !p.is_finite()) {
            return Err(Error::InvalidWeights(format!("weight {p} is negative or not finite")));
        }
        let total: f64 = probabilities.iter().sum();
        if (total - 1.0).abs() > STRUCTURAL_TOL {
            return Err(Error::InvalidWeights(format!("weights sum to {total}")));
        }
        Ok(Self(probabilities))
    }

    pub fn probabilities(&self) -> &[f64] {
        &self.0
    }

    /// `sum_i p_i a_i`.
    pub fn mean(&self, eigenvalues: &[f64]) -> f64 {
        self.0.iter().zip(eigenvalues).map(|(p, a)| p * a).sum()
    }

    /// `sum_i p_i a_i^2 - mean^2`, clamped at zero.
    pub fn variance(&self, eigenvalues: &[f64]) -> f64 {
        let mean = self.mean(eigenvalues);
        let second: f64 = self.0.iter().zip(eigenvalues).map(|(p, a)| p * a * a).sum();
        (second - mean * mean).max(0.0)
    }

    /// `sum_i p_i^2`.
    pub fn collision_probability(&self) -> f64 {
        self.0.iter().map(|p| p * p).sum()
    }

    /// `sum_ij p_i p_j (a_i - a_j)^2`, evaluated as the double sum.
    pub fn pairwise_spread(&self, eigenvalues: &[f64]) -> f64 {
        let mut acc = 0.0;
        for (pi, ai) in self.0.iter().zip(eigenvalues) {
            for (pj, aj) in self.0.iter().zip(eigenvalues) {
                acc += pi * pj * (ai - aj) * (ai - aj);
            }
        }
        acc
    }
}

/// `p_i = tr(rho P_i)`.
pub fn born_weights(rho: &DensityMatrix, obs: &Observable) -> Result<SpectrumWeights> {
    check_dims(obs.dim(), rho.dim())?;
    Ok(SpectrumWeights(raw_weights(rho.matrix(), obs)))
}

pub(crate) fn raw_weights(rho: &CMatrix, obs: &Observable) -> Vec<f64> {
    obs.projectors()
        .iter()
        .map(|p| trace_product(rho, p).max(0.0))
        .collect()
}

/// `<A> = sum_i p_i a_i`.
pub fn expectation(rho: &DensityMatrix, obs: &Observable) -> Result<f64> {
    Ok(born_weights(rho, obs)?.mean(obs.eigenvalues()))
}

/// `Re tr(rho A)` from the reconstructed operator; an independent route to
/// [`expectation`].
pub fn expectation_direct(rho: &DensityMatrix, obs: &Observable) -> Result<f64> {
    check_dims(obs.dim(), rho.dim())?;
    Ok(trace_product(rho.matrix(), &obs.matrix()))
}

/// `(Delta A)^2 = <A^2> - <A>^2`.
pub fn variance(rho: &DensityMatrix, obs: &Observable) -> Result<f64> {
    Ok(born_weights(rho, obs)?.variance(obs.eigenvalues()))
}

/// `tr rho^2`.
pub fn purity(rho: &DensityMatrix) -> f64 {
    trace_product(rho.matrix(), rho.matrix())
}

/// Trace overlap `tr(rho1 rho2)`. This is not the Uhlmann fidelity.
pub fn overlap_fidelity(rho1: &DensityMatrix, rho2: &DensityMatrix) -> Result<f64> {
    check_dims(rho1.dim(), rho2.dim())?;
    Ok(trace_product(rho1.matrix(), rho2.matrix()))
}

/// A validated unitary matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Unitary {
    matrix: CMatrix,
}

impl Unitary {
    pub fn new(matrix: CMatrix) -> Result<Self> {
        let dim = check_square(&matrix)?;
        let deviation = max_abs_diff(&(matrix.adjoint() * &matrix), &CMatrix::identity(dim, dim));
        if !(deviation <= STRUCTURAL_TOL) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self { matrix })
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            matrix: CMatrix::identity(dim, dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }
}

/// `exp(-i H t)` for Hermitian `H`.
pub fn propagator(h: &CMatrix, t: f64) -> Result<Unitary> {
    Ok(propagator_from_spectrum(&spectral_decompose(h)?, t))
}

/// `exp(-i H t)` from an already decomposed Hamiltonian.
pub fn propagator_from_spectrum(h: &Observable, t: f64) -> Unitary {
    let mut m = CMatrix::zeros(h.dim(), h.dim());
    for (e, p) in h.eigenvalues().iter().zip(h.projectors()) {
        m += p * Complex64::from_polar(1.0, -e * t);
    }
    Unitary { matrix: m }
}

/// `U rho U^dagger`.
pub fn evolve(rho: &DensityMatrix, u: &Unitary) -> Result<DensityMatrix> {
    check_dims(u.dim(), rho.dim())?;
    Ok(DensityMatrix::from_trusted(evolve_matrix(rho.matrix(), u)))
}

pub(crate) fn evolve_matrix(rho: &CMatrix, u: &Unitary) -> CMatrix {
    &u.matrix * rho * u.matrix.adjoint()
}

/// Pauli matrices, used by the qubit benchmark and tests.
pub mod pauli {
    use super::CMatrix;
    use num_complex::Complex64;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    pub fn x() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(1., 0.), c(1., 0.), c(0., 0.)])
    }

    pub fn y() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(0., 0.), c(0., -1.), c(0., 1.), c(0., 0.)])
    }

    pub fn z() -> CMatrix {
        CMatrix::from_row_slice(2, 2, &[c(1., 0.), c(0., 0.), c(0., 0.), c(-1., 0.)])
    }
}
