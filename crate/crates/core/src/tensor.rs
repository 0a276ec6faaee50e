//! Dense complex linear algebra over multipartite systems.
//!
//! Subsystems are addressed with 1-based indices (`A₁ … Aₙ`), and the first
//! subsystem is the most significant digit of a basis index.

use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{PurifyError, Result};

pub type C64 = Complex64;

/// Relative tolerance for the Hermiticity check done before eigendecomposition.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Ordered local dimensions of a composite system.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SubsystemShape {
    dims: Vec<usize>,
}

impl SubsystemShape {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if dims.is_empty() {
            return Err(PurifyError::InvalidShape("no subsystems".into()));
        }
        if let Some(&bad) = dims.iter().find(|&&d| d < 2) {
            return Err(PurifyError::InvalidShape(format!(
                "local dimension {bad} < 2"
            )));
        }
        Ok(Self { dims })
    }

    /// `n` copies of a `d`-level system.
    pub fn uniform(d: usize, n: usize) -> Result<Self> {
        Self::new(vec![d; n])
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn len(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn total_dim(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn concat(&self, other: &SubsystemShape) -> SubsystemShape {
        let mut dims = self.dims.clone();
        dims.extend_from_slice(&other.dims);
        SubsystemShape { dims }
    }

    /// Stride of each subsystem in a flat basis index.
    pub fn strides(&self) -> Vec<usize> {
        let mut strides = vec![1; self.dims.len()];
        for k in (0..self.dims.len().saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * self.dims[k + 1];
        }
        strides
    }

    /// Converts 1-based subsystem labels to a membership mask, validating range.
    fn mask(&self, subsystems: &[usize]) -> Result<Vec<bool>> {
        let mut mask = vec![false; self.dims.len()];
        for &s in subsystems {
            if s == 0 || s > self.dims.len() {
                return Err(PurifyError::SubsystemOutOfRange {
                    index: s,
                    count: self.dims.len(),
                });
            }
            mask[s - 1] = true;
        }
        Ok(mask)
    }

    /// Splits every flat index into the offset contributed by masked subsystems and the rest.
    fn split_offsets(&self, mask: &[bool]) -> (Vec<usize>, Vec<usize>) {
        let total = self.total_dim();
        let strides = self.strides();
        let mut inside = vec![0; total];
        let mut outside = vec![0; total];
        for idx in 0..total {
            let mut rem = idx;
            for (k, &stride) in strides.iter().enumerate() {
                let digit = rem / stride;
                rem %= stride;
                if mask[k] {
                    inside[idx] += digit * stride;
                } else {
                    outside[idx] += digit * stride;
                }
            }
        }
        (inside, outside)
    }
}

/// Dense square complex matrix tagged with the subsystem structure it acts on.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    shape: SubsystemShape,
    data: DMatrix<C64>,
}

impl ComplexMatrix {
    pub fn new(shape: SubsystemShape, data: DMatrix<C64>) -> Result<Self> {
        let n = shape.total_dim();
        if data.nrows() != n {
            return Err(PurifyError::DimensionMismatch {
                expected: n,
                found: data.nrows(),
            });
        }
        if data.ncols() != n {
            return Err(PurifyError::DimensionMismatch {
                expected: n,
                found: data.ncols(),
            });
        }
        Ok(Self { shape, data })
    }

    pub fn zeros(shape: SubsystemShape) -> Self {
        let n = shape.total_dim();
        Self {
            shape,
            data: DMatrix::zeros(n, n),
        }
    }

    pub fn identity(shape: SubsystemShape) -> Self {
        let n = shape.total_dim();
        Self {
            shape,
            data: DMatrix::identity(n, n),
        }
    }

    pub fn from_fn(shape: SubsystemShape, f: impl FnMut(usize, usize) -> C64) -> Self {
        let n = shape.total_dim();
        Self {
            shape,
            data: DMatrix::from_fn(n, n, f),
        }
    }

    pub fn from_real_diagonal(shape: SubsystemShape, diag: &[f64]) -> Result<Self> {
        let n = shape.total_dim();
        if diag.len() != n {
            return Err(PurifyError::DimensionMismatch {
                expected: n,
                found: diag.len(),
            });
        }
        Ok(Self::from_fn(shape, |i, j| {
            if i == j {
                C64::new(diag[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        }))
    }

    /// Row-major real entries; convenient for small literal matrices.
    pub fn from_real_rows(shape: SubsystemShape, rows: &[f64]) -> Result<Self> {
        let n = shape.total_dim();
        if rows.len() != n * n {
            return Err(PurifyError::DimensionMismatch {
                expected: n * n,
                found: rows.len(),
            });
        }
        Ok(Self::from_fn(shape, |i, j| C64::new(rows[i * n + j], 0.0)))
    }

    /// Projector `|v⟩⟨v|` (not normalized).
    pub fn outer(shape: SubsystemShape, v: &[C64]) -> Result<Self> {
        let n = shape.total_dim();
        if v.len() != n {
            return Err(PurifyError::DimensionMismatch {
                expected: n,
                found: v.len(),
            });
        }
        Ok(Self::from_fn(shape, |i, j| v[i] * v[j].conj()))
    }

    pub fn shape(&self) -> &SubsystemShape {
        &self.shape
    }

    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    pub fn data(&self) -> &DMatrix<C64> {
        &self.data
    }

    pub fn into_data(self) -> DMatrix<C64> {
        self.data
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.data[(i, j)]
    }

    /// Same entries, different subsystem labelling.
    pub fn reshaped(&self, shape: SubsystemShape) -> Result<Self> {
        Self::new(shape, self.data.clone())
    }

    pub fn trace(&self) -> C64 {
        self.data.trace()
    }

    pub fn adjoint(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.adjoint(),
        }
    }

    pub fn transpose(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.transpose(),
        }
    }

    pub fn scale(&self, s: f64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.map(|z| z * s),
        }
    }

    pub fn scale_complex(&self, s: C64) -> Self {
        Self {
            shape: self.shape.clone(),
            data: self.data.map(|z| z * s),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `tr[A B]` without forming the product.
    pub fn trace_product(&self, other: &ComplexMatrix) -> C64 {
        assert_eq!(self.dim(), other.dim(), "trace_product dimension mismatch");
        let n = self.dim();
        let mut acc = C64::new(0.0, 0.0);
        for i in 0..n {
            for k in 0..n {
                acc += self.data[(i, k)] * other.data[(k, i)];
            }
        }
        acc
    }

    /// Frobenius distance ‖A − B‖_F.
    pub fn distance(&self, other: &ComplexMatrix) -> f64 {
        assert_eq!(self.dim(), other.dim(), "distance dimension mismatch");
        self.data
            .iter()
            .zip(other.data.iter())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let n = self.dim();
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += (self.data[(i, j)] - self.data[(j, i)].conj()).norm_sqr();
            }
        }
        acc.sqrt()
    }

    pub fn is_hermitian(&self) -> bool {
        self.hermiticity_defect() <= HERMITIAN_TOL * self.frobenius_norm().max(1.0)
    }

    /// `(M + M†)/2`.
    pub fn hermitian_part(&self) -> Self {
        Self {
            shape: self.shape.clone(),
            data: (&self.data + self.data.adjoint()) * C64::new(0.5, 0.0),
        }
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        let gram = self.data.adjoint() * &self.data;
        let evals = gram.symmetric_eigenvalues();
        evals
            .iter()
            .cloned()
            .fold(0.0_f64, f64::max)
            .max(0.0)
            .sqrt()
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim(), rhs.dim(), "matrix product dimension mismatch");
        ComplexMatrix {
            shape: self.shape.clone(),
            data: &self.data * &rhs.data,
        }
    }
}

impl Add for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn add(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(self.dim(), rhs.dim(), "matrix sum dimension mismatch");
        ComplexMatrix {
            shape: self.shape.clone(),
            data: &self.data + &rhs.data,
        }
    }
}

impl Sub for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn sub(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        assert_eq!(
            self.dim(),
            rhs.dim(),
            "matrix difference dimension mismatch"
        );
        ComplexMatrix {
            shape: self.shape.clone(),
            data: &self.data - &rhs.data,
        }
    }
}

impl Neg for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn neg(self) -> ComplexMatrix {
        ComplexMatrix {
            shape: self.shape.clone(),
            data: -&self.data,
        }
    }
}

/// Eigendecomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Clone, Debug)]
pub struct HermitianSpectrum {
    pub eigenvalues: Vec<f64>,
    /// Columns are the eigenvectors, in the order of `eigenvalues`.
    pub eigenvectors: DMatrix<C64>,
}

impl HermitianSpectrum {
    pub fn reconstruct(&self) -> DMatrix<C64> {
        let n = self.eigenvalues.len();
        let mut scaled = self.eigenvectors.clone();
        for j in 0..n {
            for i in 0..n {
                scaled[(i, j)] *= self.eigenvalues[j];
            }
        }
        scaled * self.eigenvectors.adjoint()
    }
}

/// Kronecker product; the left operand is the outermost (most significant) factor.
pub fn kron(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    ComplexMatrix {
        shape: a.shape.concat(&b.shape),
        data: a.data.kronecker(&b.data),
    }
}

/// Kronecker product of a non-empty list of operators.
pub fn kron_all(factors: &[ComplexMatrix]) -> ComplexMatrix {
    let (first, rest) = factors
        .split_first()
        .expect("kron_all needs at least one factor");
    rest.iter().fold(first.clone(), |acc, f| kron(&acc, f))
}

/// Traces out every subsystem not listed in `keep` (1-based labels).
pub fn partial_trace(m: &ComplexMatrix, keep: &[usize]) -> Result<ComplexMatrix> {
    if keep.is_empty() {
        return Err(PurifyError::InvalidParameter(
            "partial trace must keep at least one subsystem".into(),
        ));
    }
    let shape = m.shape();
    let mask = shape.mask(keep)?;
    let kept_dims: Vec<usize> = shape
        .dims()
        .iter()
        .zip(&mask)
        .filter(|(_, &k)| k)
        .map(|(&d, _)| d)
        .collect();
    let kept_shape = SubsystemShape::new(kept_dims)?;
    if kept_shape.len() == shape.len() {
        return Ok(m.clone());
    }

    // Flat offsets of the kept and traced digits, enumerated in their own orders.
    let (inside, outside) = shape.split_offsets(&mask);
    let mut kept_offsets = Vec::with_capacity(kept_shape.total_dim());
    let mut traced_offsets = Vec::new();
    for idx in 0..shape.total_dim() {
        if outside[idx] == 0 {
            kept_offsets.push(inside[idx]);
        }
        if inside[idx] == 0 {
            traced_offsets.push(outside[idx]);
        }
    }

    let kd = kept_offsets.len();
    let mut out = DMatrix::<C64>::zeros(kd, kd);
    for (r, &ro) in kept_offsets.iter().enumerate() {
        for (c, &co) in kept_offsets.iter().enumerate() {
            let mut acc = C64::new(0.0, 0.0);
            for &t in &traced_offsets {
                acc += m.data[(ro + t, co + t)];
            }
            out[(r, c)] = acc;
        }
    }
    ComplexMatrix::new(kept_shape, out)
}

/// Transposes the listed subsystems (1-based labels), leaving the others untouched.
pub fn partial_transpose(m: &ComplexMatrix, subsystems: &[usize]) -> Result<ComplexMatrix> {
    let shape = m.shape();
    let mask = shape.mask(subsystems)?;
    let (sel, unsel) = shape.split_offsets(&mask);
    let n = m.dim();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            out[(unsel[i] + sel[j], unsel[j] + sel[i])] = m.data[(i, j)];
        }
    }
    ComplexMatrix::new(shape.clone(), out)
}

fn check_hermitian(m: &ComplexMatrix) -> Result<()> {
    let deviation = m.hermiticity_defect();
    if deviation > HERMITIAN_TOL * m.frobenius_norm().max(1.0) {
        return Err(PurifyError::NotHermitian { deviation });
    }
    Ok(())
}

pub fn eig_hermitian(m: &ComplexMatrix) -> Result<HermitianSpectrum> {
    check_hermitian(m)?;
    let sym = m.hermitian_part();
    let eig = nalgebra::SymmetricEigen::new(sym.data);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let eigenvalues = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let eigenvectors = DMatrix::from_fn(m.dim(), m.dim(), |i, j| eig.eigenvectors[(i, order[j])]);
    Ok(HermitianSpectrum {
        eigenvalues,
        eigenvectors,
    })
}

pub fn eigenvalues_hermitian(m: &ComplexMatrix) -> Result<Vec<f64>> {
    check_hermitian(m)?;
    let mut evals: Vec<f64> = m
        .hermitian_part()
        .data
        .symmetric_eigenvalues()
        .iter()
        .cloned()
        .collect();
    evals.sort_by(f64::total_cmp);
    Ok(evals)
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(eigenvalues_hermitian(m)?[0])
}

pub fn max_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    Ok(*eigenvalues_hermitian(m)?
        .last()
        .expect("non-empty spectrum"))
}

/// Ginibre-distributed `G` with standard complex normal entries.
fn ginibre<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DMatrix<C64> {
    DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = rng.sample(StandardNormal);
        let im: f64 = rng.sample(StandardNormal);
        C64::new(re, im)
    })
}

/// Full-rank random density matrix `GG†/tr(GG†)`.
pub fn random_density_matrix<R: Rng + ?Sized>(
    shape: &SubsystemShape,
    rng: &mut R,
) -> ComplexMatrix {
    let g = ginibre(shape.total_dim(), rng);
    let rho = &g * g.adjoint();
    let tr = rho.trace().re;
    ComplexMatrix {
        shape: shape.clone(),
        data: rho.map(|z| z / tr),
    }
}

/// Random Hermitian matrix `(G + G†)/2`.
pub fn random_hermitian<R: Rng + ?Sized>(shape: &SubsystemShape, rng: &mut R) -> ComplexMatrix {
    let g = ginibre(shape.total_dim(), rng);
    ComplexMatrix {
        shape: shape.clone(),
        data: (&g + g.adjoint()).map(|z| z * 0.5),
    }
}

/// Haar-random pure state vector.
pub fn random_pure_state<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Vec<C64> {
    let v: Vec<C64> = (0..dim)
        .map(|_| C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
        .collect();
    let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / norm).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn shape(dims: &[usize]) -> SubsystemShape {
        SubsystemShape::new(dims.to_vec()).unwrap()
    }

    fn pauli_x() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(shape(&[2]), &[0.0, 1.0, 1.0, 0.0]).unwrap()
    }

    fn swap2() -> ComplexMatrix {
        #[rustfmt::skip]
        let rows = [
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ];
        ComplexMatrix::from_real_rows(shape(&[2, 2]), &rows).unwrap()
    }

    #[test]
    fn shape_rejects_small_dims() {
        assert!(SubsystemShape::new(vec![2, 1]).is_err());
        assert!(SubsystemShape::new(vec![]).is_err());
        assert_eq!(shape(&[2, 3, 4]).total_dim(), 24);
        assert_eq!(shape(&[2, 3, 4]).strides(), vec![12, 4, 1]);
    }

    #[test]
    fn kron_identities() {
        let i2 = ComplexMatrix::identity(shape(&[2]));
        let i4 = kron(&i2, &i2);
        assert_eq!(i4.shape().dims(), &[2, 2]);
        assert!(i4.distance(&ComplexMatrix::identity(shape(&[2, 2]))) < 1e-15);

        let p0 = ComplexMatrix::from_real_diagonal(shape(&[2]), &[1.0, 0.0]).unwrap();
        let p1 = ComplexMatrix::from_real_diagonal(shape(&[2]), &[0.0, 1.0]).unwrap();
        let expected =
            ComplexMatrix::from_real_diagonal(shape(&[2, 2]), &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(kron(&p0, &p1).distance(&expected) < 1e-15);
    }

    #[test]
    fn kron_bit_flip_maps_00_to_11() {
        let xx = kron(&pauli_x(), &pauli_x());
        // Column 0 is the image of |00⟩.
        for row in 0..4 {
            let expected = if row == 3 { 1.0 } else { 0.0 };
            assert_eq!(xx.get(row, 0), C64::new(expected, 0.0));
        }
    }

    #[test]
    fn partial_trace_of_symmetric_projector() {
        let pi2 = (&ComplexMatrix::identity(shape(&[2, 2])) + &swap2()).scale(0.5);
        let reduced = partial_trace(&pi2, &[1]).unwrap();
        let expected = ComplexMatrix::identity(shape(&[2])).scale(1.5);
        assert!(reduced.distance(&expected) < 1e-14);
    }

    #[test]
    fn partial_trace_keep_all_and_errors() {
        let m = swap2();
        assert_eq!(partial_trace(&m, &[1, 2]).unwrap(), m);
        assert!(matches!(
            partial_trace(&m, &[3]),
            Err(PurifyError::SubsystemOutOfRange { .. })
        ));
        assert!(partial_trace(&m, &[]).is_err());
    }

    #[test]
    fn partial_transpose_of_swap_is_unnormalized_bell_projector() {
        let pt = partial_transpose(&swap2(), &[2]).unwrap();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let phi = [
            C64::new(s, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.0),
            C64::new(s, 0.0),
        ];
        let expected = ComplexMatrix::outer(shape(&[2, 2]), &phi)
            .unwrap()
            .scale(2.0);
        assert!(pt.distance(&expected) < 1e-15);
    }

    #[test]
    fn partial_transpose_full_set_is_transpose() {
        let m = ComplexMatrix::from_fn(shape(&[2, 3]), |i, j| {
            C64::new(i as f64, 2.0 * j as f64 - 1.0)
        });
        assert!(
            partial_transpose(&m, &[1, 2])
                .unwrap()
                .distance(&m.transpose())
                < 1e-15
        );
        let id = ComplexMatrix::identity(shape(&[3, 2]));
        assert_eq!(partial_transpose(&id, &[2]).unwrap(), id);
        assert!(partial_transpose(&id, &[0]).is_err());
    }

    #[test]
    fn eig_of_diagonal_and_symmetric_projector() {
        let d = ComplexMatrix::from_real_diagonal(shape(&[3]), &[3.0, 1.0, 2.0]).unwrap();
        let spec = eig_hermitian(&d).unwrap();
        assert_eq!(spec.eigenvalues.len(), 3);
        for (got, want) in spec.eigenvalues.iter().zip([1.0, 2.0, 3.0]) {
            assert!((got - want).abs() < 1e-14);
        }

        let pi2 = (&ComplexMatrix::identity(shape(&[2, 2])) + &swap2()).scale(0.5);
        let evals = eigenvalues_hermitian(&pi2).unwrap();
        for (got, want) in evals.iter().zip([0.0, 1.0, 1.0, 1.0]) {
            assert!((got - want).abs() < 1e-14);
        }

        let zero = ComplexMatrix::zeros(shape(&[2, 2]));
        assert!(eigenvalues_hermitian(&zero)
            .unwrap()
            .iter()
            .all(|v| v.abs() < 1e-15));
    }

    #[test]
    fn min_eigenvalue_cases() {
        assert!(
            (min_eigenvalue(&ComplexMatrix::identity(shape(&[2]))).unwrap() - 1.0).abs() < 1e-15
        );
        let m = ComplexMatrix::from_real_diagonal(shape(&[2]), &[-2.0, 5.0]).unwrap();
        assert!((min_eigenvalue(&m).unwrap() + 2.0).abs() < 1e-15);
    }

    #[test]
    fn non_hermitian_rejected() {
        let m = ComplexMatrix::from_real_rows(shape(&[2]), &[0.0, 1.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            eig_hermitian(&m),
            Err(PurifyError::NotHermitian { .. })
        ));
        assert!(min_eigenvalue(&m).is_err());
    }
}
