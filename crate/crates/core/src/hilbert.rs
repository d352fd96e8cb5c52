//! Finite-dimensional complex Hilbert space primitives.
//!
//! Inner products are conjugate-linear in the first argument, so
//! `inner_product(a, b) = Σ conj(a_k) b_k = ⟨a|b⟩`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::serde_util::{from_pair, pair};

/// Allowed deviation of `⟨Ψ|Ψ⟩` from one when a state is constructed.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Allowed entrywise deviation of a Gram matrix (or `U†U`) from the identity.
pub const ORTHO_TOLERANCE: f64 = 1e-10;

const HAAR_STREAM: u64 = 0x4841_4152;
const STATE_STREAM: u64 = 0x5354_4154;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    pub norm: f64,
    pub ortho: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            norm: NORM_TOLERANCE,
            ortho: ORTHO_TOLERANCE,
        }
    }
}

pub(crate) fn dot(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn all_finite(v: &[Complex64]) -> bool {
    v.iter().all(|z| z.re.is_finite() && z.im.is_finite())
}

/// A unit vector in `ℂ^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<[f64; 2]>", into = "Vec<[f64; 2]>")]
pub struct StateVector {
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(amps: Vec<Complex64>) -> Result<Self> {
        Self::with_tolerance(amps, NORM_TOLERANCE)
    }

    pub fn with_tolerance(amps: Vec<Complex64>, tol: f64) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Dimension("a state needs at least one amplitude".into()));
        }
        if !all_finite(&amps) {
            return Err(Error::Parameter("non-finite amplitude".into()));
        }
        let dev = (dot(&amps, &amps).re - 1.0).abs();
        if dev > tol {
            return Err(Error::Parameter(format!(
                "state norm deviates from 1 by {dev:e} (tolerance {tol:e})"
            )));
        }
        Ok(StateVector { amps })
    }

    /// Rescales a nonzero vector to unit norm.
    pub fn normalized(amps: Vec<Complex64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(Error::Dimension("a state needs at least one amplitude".into()));
        }
        let norm = dot(&amps, &amps).re.sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Parameter("cannot normalize a zero or non-finite vector".into()));
        }
        Ok(StateVector {
            amps: amps.into_iter().map(|z| z / norm).collect(),
        })
    }

    /// `e_{index+1}` in dimension `n` (0-based `index`).
    pub fn basis_vector(n: usize, index: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("dimension must be positive".into()));
        }
        if index >= n {
            return Err(Error::Parameter(format!("basis index {index} out of range for N={n}")));
        }
        let mut amps = vec![Complex64::new(0.0, 0.0); n];
        amps[index] = Complex64::new(1.0, 0.0);
        Ok(StateVector { amps })
    }

    /// Caller guarantees the vector is unit norm up to accumulated rounding.
    pub(crate) fn from_raw(amps: Vec<Complex64>) -> Self {
        debug_assert!(!amps.is_empty());
        StateVector { amps }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm_sqr(&self) -> f64 {
        dot(&self.amps, &self.amps).re
    }

    /// Multiplies every amplitude by `e^{iθ}`.
    pub fn with_global_phase(&self, theta: f64) -> Self {
        let phase = Complex64::from_polar(1.0, theta);
        StateVector {
            amps: self.amps.iter().map(|z| z * phase).collect(),
        }
    }
}

impl AsRef<[Complex64]> for StateVector {
    fn as_ref(&self) -> &[Complex64] {
        &self.amps
    }
}

impl TryFrom<Vec<[f64; 2]>> for StateVector {
    type Error = Error;

    fn try_from(pairs: Vec<[f64; 2]>) -> Result<Self> {
        StateVector::new(pairs.into_iter().map(from_pair).collect())
    }
}

impl From<StateVector> for Vec<[f64; 2]> {
    fn from(v: StateVector) -> Self {
        v.amps.into_iter().map(pair).collect()
    }
}

pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<Complex64> {
    if a.dim() != b.dim() {
        return Err(Error::dim_mismatch(a.dim(), b.dim()));
    }
    Ok(dot(&a.amps, &b.amps))
}

/// `max_ij |⟨v_i|v_j⟩ − δ_ij|`. Accepts arbitrary input; vectors of unequal
/// length give `+∞`.
pub fn orthonormality_defect<V: AsRef<[Complex64]>>(vectors: &[V]) -> f64 {
    let Some(first) = vectors.first() else {
        return 0.0;
    };
    let n = first.as_ref().len();
    if vectors.iter().any(|v| v.as_ref().len() != n) {
        return f64::INFINITY;
    }
    let mut worst = 0.0_f64;
    for (i, a) in vectors.iter().enumerate() {
        for (j, b) in vectors.iter().enumerate().skip(i) {
            let g = dot(a.as_ref(), b.as_ref());
            let target = if i == j { 1.0 } else { 0.0 };
            let dev = (g - target).norm();
            if dev.is_nan() {
                return f64::INFINITY;
            }
            worst = worst.max(dev);
        }
    }
    worst
}

/// N orthonormal vectors spanning `ℂ^N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<StateVector>", into = "Vec<StateVector>")]
pub struct OrthonormalBasis {
    vectors: Vec<StateVector>,
}

impl OrthonormalBasis {
    pub fn new(vectors: Vec<StateVector>) -> Result<Self> {
        Self::with_tolerance(vectors, ORTHO_TOLERANCE)
    }

    pub fn with_tolerance(vectors: Vec<StateVector>, tol: f64) -> Result<Self> {
        let n = vectors.len();
        if n == 0 {
            return Err(Error::Dimension("a basis needs at least one vector".into()));
        }
        if let Some(v) = vectors.iter().find(|v| v.dim() != n) {
            return Err(Error::dim_mismatch(n, v.dim()));
        }
        let defect = orthonormality_defect(&vectors);
        if defect > tol {
            return Err(Error::Parameter(format!(
                "orthonormality defect {defect:e} exceeds {tol:e}"
            )));
        }
        Ok(OrthonormalBasis { vectors })
    }

    pub(crate) fn from_raw(vectors: Vec<StateVector>) -> Self {
        OrthonormalBasis { vectors }
    }

    pub fn standard(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("dimension must be positive".into()));
        }
        Ok(OrthonormalBasis {
            vectors: (0..n)
                .map(|i| StateVector::basis_vector(n, i))
                .collect::<Result<_>>()?,
        })
    }

    /// The columns of `u`.
    pub fn from_unitary(u: &UnitaryMatrix) -> Self {
        let n = u.dim();
        OrthonormalBasis {
            vectors: (0..n)
                .map(|j| StateVector::from_raw(u.matrix().column(j)))
                .collect(),
        }
    }

    /// `{U v_i}`.
    pub fn transformed(&self, u: &UnitaryMatrix) -> Result<Self> {
        Ok(OrthonormalBasis {
            vectors: self
                .vectors
                .iter()
                .map(|v| apply_unitary(u, v))
                .collect::<Result<_>>()?,
        })
    }

    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    pub fn vectors(&self) -> &[StateVector] {
        &self.vectors
    }

    pub fn defect(&self) -> f64 {
        orthonormality_defect(&self.vectors)
    }

    /// `⟨v_i|Ψ⟩` for every basis vector.
    pub fn overlaps(&self, state: &StateVector) -> Result<Vec<Complex64>> {
        self.vectors.iter().map(|v| inner_product(v, state)).collect()
    }
}

impl TryFrom<Vec<StateVector>> for OrthonormalBasis {
    type Error = Error;

    fn try_from(v: Vec<StateVector>) -> Result<Self> {
        OrthonormalBasis::new(v)
    }
}

impl From<OrthonormalBasis> for Vec<StateVector> {
    fn from(b: OrthonormalBasis) -> Self {
        b.vectors
    }
}

/// Dense square complex matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    n: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(n: usize) -> Self {
        ComplexMatrix {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_rows(rows: Vec<Vec<Complex64>>) -> Result<Self> {
        let n = rows.len();
        if let Some(r) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension(format!(
                "matrix must be square: {n} rows but a row of length {}",
                r.len()
            )));
        }
        Ok(ComplexMatrix {
            n,
            data: rows.into_iter().flatten().collect(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.n + j]
    }

    pub fn set(&mut self, i: usize, j: usize, z: Complex64) {
        self.data[i * self.n + j] = z;
    }

    pub fn column(&self, j: usize) -> Vec<Complex64> {
        (0..self.n).map(|i| self.get(i, j)).collect()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks(self.n.max(1))
    }

    pub fn adjoint(&self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                out.data[j * n + i] = self.data[i * n + j].conj();
            }
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let row = &other.data[k * n..(k + 1) * n];
                for (o, b) in out.data[i * n..(i + 1) * n].iter_mut().zip(row) {
                    *o += a * b;
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[Complex64]) -> Vec<Complex64> {
        self.rows()
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn scale(&mut self, s: f64) {
        self.data.iter_mut().for_each(|z| *z *= s);
    }

    fn add_assign(&mut self, other: &Self) {
        self.data.iter_mut().zip(&other.data).for_each(|(a, b)| *a += b);
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.n)
            .map(|j| (0..self.n).map(|i| self.get(i, j).norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// `max_ij |A_ij − δ_ij|`.
    pub fn identity_deviation(&self) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..self.n {
            for j in 0..self.n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((self.get(i, j) - target).norm());
            }
        }
        worst
    }

    /// Matrix exponential by scaling and squaring with a Taylor kernel.
    /// The Taylor series is cut once the next term is below `1e-16` in the
    /// 1-norm, which keeps the truncation error well under `1e-12` after
    /// the squaring phase.
    pub fn exp(&self) -> Self {
        let n = self.n;
        let norm = self.norm_one();
        let squarings = if norm > 0.5 {
            (norm / 0.5).log2().ceil() as u32
        } else {
            0
        };
        let mut a = self.clone();
        a.scale(0.5_f64.powi(squarings as i32));

        let mut result = Self::identity(n);
        let mut term = Self::identity(n);
        for k in 1..=30 {
            term = term.mul(&a);
            term.scale(1.0 / k as f64);
            result.add_assign(&term);
            if term.norm_one() < 1e-16 {
                break;
            }
        }
        for _ in 0..squarings {
            result = result.mul(&result);
        }
        result
    }

    /// Replaces the columns by their Gram–Schmidt orthonormalization (two
    /// passes of modified Gram–Schmidt), returning the diagonal of `R`.
    fn orthonormalize_columns(&mut self) -> Result<Vec<f64>> {
        let n = self.n;
        let mut cols: Vec<Vec<Complex64>> = (0..n).map(|j| self.column(j)).collect();
        let mut diag = Vec::with_capacity(n);
        for j in 0..n {
            let (done, rest) = cols.split_at_mut(j);
            let col = &mut rest[0];
            for _ in 0..2 {
                for q in done.iter() {
                    let c = dot(q, col);
                    col.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
                }
            }
            let norm = dot(col, col).re.sqrt();
            if !(norm > 1e-300) {
                return Err(Error::Parameter("matrix is numerically rank deficient".into()));
            }
            col.iter_mut().for_each(|x| *x /= norm);
            diag.push(norm);
        }
        for (j, col) in cols.iter().enumerate() {
            for (i, z) in col.iter().enumerate() {
                self.data[i * n + j] = *z;
            }
        }
        Ok(diag)
    }
}

/// A matrix with `U†U = I` up to [`ORTHO_TOLERANCE`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<[f64; 2]>>", into = "Vec<Vec<[f64; 2]>>")]
pub struct UnitaryMatrix {
    m: ComplexMatrix,
}

impl UnitaryMatrix {
    pub fn new(m: ComplexMatrix) -> Result<Self> {
        Self::with_tolerance(m, ORTHO_TOLERANCE)
    }

    pub fn with_tolerance(m: ComplexMatrix, tol: f64) -> Result<Self> {
        if m.dim() == 0 {
            return Err(Error::Dimension("dimension must be positive".into()));
        }
        if !all_finite(&m.data) {
            return Err(Error::Parameter("non-finite matrix entry".into()));
        }
        let defect = m.adjoint().mul(&m).identity_deviation();
        if defect > tol {
            return Err(Error::Parameter(format!("U†U deviates from I by {defect:e}")));
        }
        Ok(UnitaryMatrix { m })
    }

    pub fn identity(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("dimension must be positive".into()));
        }
        Ok(UnitaryMatrix {
            m: ComplexMatrix::identity(n),
        })
    }

    /// `diag(d_1, …, d_n)`; every entry must have unit modulus.
    pub fn diagonal(entries: &[Complex64]) -> Result<Self> {
        let mut m = ComplexMatrix::zeros(entries.len());
        for (i, d) in entries.iter().enumerate() {
            m.set(i, i, *d);
        }
        Self::new(m)
    }

    /// Haar-distributed unitary for `(n, seed)`.
    ///
    /// An `n × n` matrix of independent standard complex Gaussians is
    /// QR-factorized by Gram–Schmidt on its columns. Gram–Schmidt yields the
    /// factorization whose `R` has a positive real diagonal, which is the
    /// phase normalization that makes `Q` exactly Haar distributed.
    pub fn haar(n: usize, seed: u64) -> Result<Self> {
        if n == 0 {
            return Err(Error::Dimension("dimension must be positive".into()));
        }
        let mut stream = rng::stream(seed, rng::tag(&[HAAR_STREAM, n as u64]));
        let mut m = ComplexMatrix::zeros(n);
        for z in m.data.iter_mut() {
            *z = rng::complex_gaussian(&mut stream);
        }
        m.orthonormalize_columns()?;
        Ok(UnitaryMatrix { m })
    }

    /// Projects an approximately unitary matrix back onto the group by
    /// re-orthonormalizing its columns.
    pub fn reunitarize(m: ComplexMatrix) -> Result<Self> {
        let mut m = m;
        m.orthonormalize_columns()?;
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.m.dim()
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.m
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m.get(i, j)
    }

    pub fn adjoint(&self) -> Self {
        UnitaryMatrix { m: self.m.adjoint() }
    }

    pub fn compose(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::dim_mismatch(self.dim(), other.dim()));
        }
        Ok(UnitaryMatrix {
            m: self.m.mul(&other.m),
        })
    }

    pub fn unitarity_defect(&self) -> f64 {
        self.m.adjoint().mul(&self.m).identity_deviation()
    }
}

impl TryFrom<Vec<Vec<[f64; 2]>>> for UnitaryMatrix {
    type Error = Error;

    fn try_from(rows: Vec<Vec<[f64; 2]>>) -> Result<Self> {
        let rows = rows
            .into_iter()
            .map(|r| r.into_iter().map(from_pair).collect())
            .collect();
        UnitaryMatrix::new(ComplexMatrix::from_rows(rows)?)
    }
}

impl From<UnitaryMatrix> for Vec<Vec<[f64; 2]>> {
    fn from(u: UnitaryMatrix) -> Self {
        u.m.rows().map(|r| r.iter().copied().map(pair).collect()).collect()
    }
}

pub fn haar_unitary(n: usize, seed: u64) -> Result<UnitaryMatrix> {
    UnitaryMatrix::haar(n, seed)
}

pub fn apply_unitary(u: &UnitaryMatrix, v: &StateVector) -> Result<StateVector> {
    if u.dim() != v.dim() {
        return Err(Error::dim_mismatch(u.dim(), v.dim()));
    }
    Ok(StateVector::from_raw(u.m.mul_vec(&v.amps)))
}

/// Uniform on the unit sphere of `ℂ^n`: a normalized complex Gaussian vector.
pub fn random_state(n: usize, seed: u64) -> Result<StateVector> {
    if n == 0 {
        return Err(Error::Dimension("dimension must be positive".into()));
    }
    let mut stream = rng::stream(seed, rng::tag(&[STATE_STREAM, n as u64]));
    let amps = (0..n).map(|_| rng::complex_gaussian(&mut stream)).collect();
    StateVector::normalized(amps)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn inner_product_examples() {
        let e1 = StateVector::basis_vector(2, 0).unwrap();
        let e2 = StateVector::basis_vector(2, 1).unwrap();
        assert_eq!(inner_product(&e1, &e1).unwrap(), c(1.0, 0.0));
        assert_eq!(inner_product(&e1, &e2).unwrap(), c(0.0, 0.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::new(vec![c(s, 0.0), c(s, 0.0)]).unwrap();
        assert!((inner_product(&plus, &e1).unwrap() - c(s, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn inner_product_conjugates_first_argument() {
        let a = StateVector::new(vec![c(0.0, 1.0)]).unwrap();
        let b = StateVector::new(vec![c(1.0, 0.0)]).unwrap();
        assert_eq!(inner_product(&a, &b).unwrap(), c(0.0, -1.0));
    }

    #[test]
    fn inner_product_dimension_mismatch() {
        let a = StateVector::basis_vector(2, 0).unwrap();
        let b = StateVector::basis_vector(3, 0).unwrap();
        assert!(matches!(inner_product(&a, &b), Err(Error::Dimension(_))));
    }

    #[test]
    fn state_rejects_bad_norm() {
        assert!(StateVector::new(vec![c(0.5, 0.0)]).is_err());
        assert!(StateVector::new(vec![]).is_err());
        assert!(StateVector::new(vec![c(f64::NAN, 0.0)]).is_err());
    }

    #[test]
    fn haar_one_dimensional_is_a_phase() {
        for seed in 0..10 {
            let u = haar_unitary(1, seed).unwrap();
            assert!((u.get(0, 0).norm() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn haar_is_unitary_and_deterministic() {
        let u = haar_unitary(8, 7).unwrap();
        assert!(u.unitarity_defect() <= 1e-10);
        let v = haar_unitary(8, 7).unwrap();
        let bits = |m: &UnitaryMatrix| -> Vec<u64> {
            m.matrix().data.iter().flat_map(|z| [z.re.to_bits(), z.im.to_bits()]).collect()
        };
        assert_eq!(bits(&u), bits(&v));
        assert_ne!(bits(&u), bits(&haar_unitary(8, 8).unwrap()));
    }

    #[test]
    fn haar_zero_dimension() {
        assert!(matches!(haar_unitary(0, 1), Err(Error::Dimension(_))));
        assert!(matches!(random_state(0, 1), Err(Error::Dimension(_))));
    }

    #[test]
    fn haar_large_passes_defect() {
        let u = haar_unitary(256, 11).unwrap();
        assert!(OrthonormalBasis::from_unitary(&u).defect() <= 1e-10);
    }

    #[test]
    fn apply_examples() {
        let v = random_state(3, 1).unwrap();
        let id = UnitaryMatrix::identity(3).unwrap();
        assert_eq!(apply_unitary(&id, &v).unwrap(), v);

        let u = UnitaryMatrix::diagonal(&[c(0.0, 1.0), c(1.0, 0.0)]).unwrap();
        let e1 = StateVector::basis_vector(2, 0).unwrap();
        let out = apply_unitary(&u, &e1).unwrap();
        assert_eq!(out.amplitudes(), &[c(0.0, 1.0), c(0.0, 0.0)]);

        assert!(apply_unitary(&u, &v).is_err());
    }

    #[test]
    fn diagonal_rejects_non_phase() {
        assert!(UnitaryMatrix::diagonal(&[c(2.0, 0.0)]).is_err());
    }

    #[test]
    fn defect_examples() {
        let std4 = OrthonormalBasis::standard(4).unwrap();
        assert!(std4.defect() <= 1e-15);
        let e1 = StateVector::basis_vector(2, 0).unwrap();
        assert_eq!(orthonormality_defect(&[e1.clone(), e1]), 1.0);
        let empty: [StateVector; 0] = [];
        assert_eq!(orthonormality_defect(&empty), 0.0);
    }

    #[test]
    fn basis_requires_square() {
        let e1 = StateVector::basis_vector(2, 0).unwrap();
        assert!(OrthonormalBasis::new(vec![e1.clone()]).is_err());
        assert!(OrthonormalBasis::new(vec![e1.clone(), e1]).is_err());
    }

    #[test]
    fn random_state_examples() {
        let p = random_state(1, 4).unwrap();
        assert!((p.amplitudes()[0].norm() - 1.0).abs() < 1e-12);
        let s = random_state(16, 9).unwrap();
        assert!((s.norm_sqr() - 1.0).abs() < 1e-12);
        let t = random_state(16, 10).unwrap();
        assert!(inner_product(&s, &t).unwrap().norm() < 1.0);
    }

    #[test]
    fn exp_of_skew_hermitian_is_unitary() {
        let mut a = ComplexMatrix::zeros(3);
        a.set(0, 1, c(0.3, 0.7));
        a.set(1, 0, c(-0.3, 0.7));
        a.set(2, 2, c(0.0, 2.5));
        a.set(0, 2, c(1.1, -0.2));
        a.set(2, 0, c(-1.1, -0.2));
        let e = a.exp();
        assert!(e.adjoint().mul(&e).identity_deviation() < 1e-12);
        // exp(i t) on a diagonal entry
        let mut d = ComplexMatrix::zeros(1);
        d.set(0, 0, c(0.0, 3.0));
        assert!((d.exp().get(0, 0) - Complex64::from_polar(1.0, 3.0)).norm() < 1e-13);
    }

    #[test]
    fn unitary_json_shape() {
        let u = UnitaryMatrix::diagonal(&[c(0.0, 1.0), c(1.0, 0.0)]).unwrap();
        let json = serde_json::to_string(&u).unwrap();
        assert_eq!(json, "[[[0.0,1.0],[0.0,0.0]],[[0.0,0.0],[1.0,0.0]]]");
        let back: UnitaryMatrix = serde_json::from_str(&json).unwrap();
        assert_eq!(back, u);
        assert!(serde_json::from_str::<UnitaryMatrix>("[[[2.0,0.0]]]").is_err());
        assert!(serde_json::from_str::<StateVector>("[[0.5,0.0]]").is_err());
    }
}
