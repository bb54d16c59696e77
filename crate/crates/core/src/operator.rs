//! Operators on spinor-valued mode spaces `ℓ²(window) ⊗ ℂˢ`.
//!
//! Basis order is (mode, spinor) with the spinor index fastest. Fourier multipliers are kept
//! block-diagonal, so a 64² window with 2-spinors never materialises a dense 8192² matrix.

use faer::{Mat, Side};
use num_complex::Complex64;
use rayon::prelude::*;
use thiserror::Error;

use crate::fourier::{Lattice, ModeLabel, ModeWindow};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OperatorError {
    #[error("matrix is {found}x{found_cols}, expected {expected}x{expected}")]
    ShapeMismatch {
        expected: usize,
        found: usize,
        found_cols: usize,
    },
    #[error("operands act on different lattices or spinor dimensions")]
    SpaceMismatch,
    #[error("operator is not self-adjoint: max |A - A†| = {0:e}")]
    NotSelfAdjoint(f64),
    #[error("spinor block is {found}x{found}, expected {expected}x{expected}")]
    SpinorMismatch { expected: usize, found: usize },
    #[error("eigen solver failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, OperatorError>;

#[derive(Clone, Debug)]
pub enum Storage {
    Dense(Mat<Complex64>),
    /// One `s×s` block per mode.
    BlockDiagonal(Vec<Mat<Complex64>>),
}

#[derive(Clone, Debug)]
pub struct DiscreteOperator {
    lattice: Lattice,
    spinor_dim: usize,
    storage: Storage,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

pub(crate) fn max_abs(m: &Mat<Complex64>) -> f64 {
    let mut out: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out = out.max(m[(i, j)].norm());
        }
    }
    out
}

pub(crate) fn adjoint_of(m: &Mat<Complex64>) -> Mat<Complex64> {
    m.adjoint().to_owned()
}

pub(crate) fn scaled(m: &Mat<Complex64>, s: Complex64) -> Mat<Complex64> {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub(crate) fn kron(a: &Mat<Complex64>, b: &Mat<Complex64>) -> Mat<Complex64> {
    let (br, bc) = (b.nrows(), b.ncols());
    Mat::from_fn(a.nrows() * br, a.ncols() * bc, |i, j| {
        a[(i / br, j / bc)] * b[(i % br, j % bc)]
    })
}

/// Hermitian deviation `max |A - A†|` of a square matrix.
pub(crate) fn hermitian_deviation(m: &Mat<Complex64>) -> f64 {
    let mut out: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..=j.min(m.nrows() - 1) {
            out = out.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix: ascending eigenvalues and eigenvectors.
pub(crate) fn eigh(m: &Mat<Complex64>) -> Result<(Vec<f64>, Mat<Complex64>)> {
    let e = m
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| OperatorError::Solver(format!("{e:?}")))?;
    let s = e.S().column_vector();
    let vals = (0..m.nrows()).map(|i| s[i].re).collect();
    Ok((vals, e.U().to_owned()))
}

pub(crate) fn eigvalsh(m: &Mat<Complex64>) -> Result<Vec<f64>> {
    m.self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| OperatorError::Solver(format!("{e:?}")))
}

/// `f(A)` for Hermitian `A` by the spectral theorem.
pub(crate) fn hermitian_apply(
    m: &Mat<Complex64>,
    f: impl Fn(f64) -> f64,
) -> Result<Mat<Complex64>> {
    let (vals, u) = eigh(m)?;
    let fv: Vec<f64> = vals.iter().map(|&v| f(v)).collect();
    let n = m.nrows();
    let ud = Mat::from_fn(n, n, |i, j| u[(i, j)] * fv[j]);
    Ok(&ud * u.adjoint())
}

impl DiscreteOperator {
    pub fn dense(lattice: Lattice, spinor_dim: usize, matrix: Mat<Complex64>) -> Result<Self> {
        let n = lattice.len() * spinor_dim;
        if matrix.nrows() != n || matrix.ncols() != n {
            return Err(OperatorError::ShapeMismatch {
                expected: n,
                found: matrix.nrows(),
                found_cols: matrix.ncols(),
            });
        }
        Ok(Self {
            lattice,
            spinor_dim,
            storage: Storage::Dense(matrix),
        })
    }

    pub fn block_diagonal(
        lattice: Lattice,
        spinor_dim: usize,
        blocks: Vec<Mat<Complex64>>,
    ) -> Result<Self> {
        if blocks.len() != lattice.len() {
            return Err(OperatorError::ShapeMismatch {
                expected: lattice.len(),
                found: blocks.len(),
                found_cols: 1,
            });
        }
        if let Some(b) = blocks
            .iter()
            .find(|b| b.nrows() != spinor_dim || b.ncols() != spinor_dim)
        {
            return Err(OperatorError::SpinorMismatch {
                expected: spinor_dim,
                found: b.nrows(),
            });
        }
        Ok(Self {
            lattice,
            spinor_dim,
            storage: Storage::BlockDiagonal(blocks),
        })
    }

    /// Fourier multiplier: block `f(frequency)` on every mode.
    pub fn multiplier(
        lattice: Lattice,
        spinor_dim: usize,
        f: impl Fn(&[f64]) -> Mat<Complex64> + Sync,
    ) -> Result<Self> {
        let blocks: Vec<_> = (0..lattice.len())
            .into_par_iter()
            .map(|i| f(&lattice.frequency(i)))
            .collect();
        Self::block_diagonal(lattice, spinor_dim, blocks)
    }

    pub fn identity(lattice: Lattice, spinor_dim: usize) -> Self {
        let blocks = vec![Mat::identity(spinor_dim, spinor_dim); lattice.len()];
        Self {
            lattice,
            spinor_dim,
            storage: Storage::BlockDiagonal(blocks),
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn window(&self) -> &ModeWindow {
        self.lattice.window()
    }

    pub fn spinor_dim(&self) -> usize {
        self.spinor_dim
    }

    pub fn dim(&self) -> usize {
        self.lattice.len() * self.spinor_dim
    }

    pub fn storage(&self) -> &Storage {
        &self.storage
    }

    pub fn is_block_diagonal(&self) -> bool {
        matches!(self.storage, Storage::BlockDiagonal(_))
    }

    /// `(mode label, spinor index)` of every basis vector, in basis order.
    pub fn labels(&self) -> Vec<(ModeLabel, usize)> {
        let w = self.lattice.window();
        (0..self.dim())
            .map(|i| (w.label(i / self.spinor_dim), i % self.spinor_dim))
            .collect()
    }

    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        match &self.storage {
            Storage::Dense(m) => m[(i, j)],
            Storage::BlockDiagonal(b) => {
                let s = self.spinor_dim;
                if i / s == j / s {
                    b[i / s][(i % s, j % s)]
                } else {
                    zero()
                }
            }
        }
    }

    pub fn to_dense(&self) -> Mat<Complex64> {
        match &self.storage {
            Storage::Dense(m) => m.clone(),
            Storage::BlockDiagonal(blocks) => {
                let s = self.spinor_dim;
                let mut out = Mat::zeros(self.dim(), self.dim());
                for (k, b) in blocks.iter().enumerate() {
                    for i in 0..s {
                        for j in 0..s {
                            out[(k * s + i, k * s + j)] = b[(i, j)];
                        }
                    }
                }
                out
            }
        }
    }

    pub fn into_dense(self) -> Self {
        let m = self.to_dense();
        Self {
            storage: Storage::Dense(m),
            ..self
        }
    }

    /// `s×s` block on the diagonal at mode index `k`.
    pub fn diag_block(&self, k: usize) -> Mat<Complex64> {
        let s = self.spinor_dim;
        match &self.storage {
            Storage::BlockDiagonal(b) => b[k].clone(),
            Storage::Dense(m) => Mat::from_fn(s, s, |i, j| m[(k * s + i, k * s + j)]),
        }
    }

    fn with_storage(&self, storage: Storage) -> Self {
        Self {
            lattice: self.lattice.clone(),
            spinor_dim: self.spinor_dim,
            storage,
        }
    }

    fn map_blocks(&self, f: impl Fn(&Mat<Complex64>) -> Mat<Complex64>) -> Storage {
        match &self.storage {
            Storage::Dense(m) => Storage::Dense(f(m)),
            Storage::BlockDiagonal(b) => Storage::BlockDiagonal(b.iter().map(f).collect()),
        }
    }

    fn check_space(&self, other: &Self) -> Result<()> {
        if self.spinor_dim == other.spinor_dim && self.lattice == other.lattice {
            Ok(())
        } else {
            Err(OperatorError::SpaceMismatch)
        }
    }

    /// Hilbert adjoint; the basis is orthonormal, so this is the conjugate transpose.
    pub fn adjoint(&self) -> Self {
        self.with_storage(self.map_blocks(adjoint_of))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.with_storage(self.map_blocks(|m| scaled(m, s)))
    }

    fn zip(
        &self,
        other: &Self,
        f: impl Fn(&Mat<Complex64>, &Mat<Complex64>) -> Mat<Complex64>,
    ) -> Result<Self> {
        self.check_space(other)?;
        let storage = match (&self.storage, &other.storage) {
            (Storage::BlockDiagonal(a), Storage::BlockDiagonal(b)) => {
                Storage::BlockDiagonal(a.iter().zip(b).map(|(x, y)| f(x, y)).collect())
            }
            _ => Storage::Dense(f(&self.to_dense(), &other.to_dense())),
        };
        Ok(self.with_storage(storage))
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_space(other)?;
        let s = self.spinor_dim;
        let storage = match (&self.storage, &other.storage) {
            (Storage::BlockDiagonal(a), Storage::BlockDiagonal(b)) => {
                Storage::BlockDiagonal(a.iter().zip(b).map(|(x, y)| x * y).collect())
            }
            (Storage::BlockDiagonal(a), Storage::Dense(m)) => {
                let mut out = m.clone();
                for (k, blk) in a.iter().enumerate() {
                    let rows = m.subrows(k * s, s);
                    let prod = blk * rows;
                    out.subrows_mut(k * s, s).copy_from(&prod);
                }
                Storage::Dense(out)
            }
            (Storage::Dense(m), Storage::BlockDiagonal(b)) => {
                let mut out = m.clone();
                for (k, blk) in b.iter().enumerate() {
                    let cols = m.subcols(k * s, s);
                    let prod = cols * blk;
                    out.subcols_mut(k * s, s).copy_from(&prod);
                }
                Storage::Dense(out)
            }
            (Storage::Dense(a), Storage::Dense(b)) => Storage::Dense(a * b),
        };
        Ok(self.with_storage(storage))
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(&self, other: &Self) -> Result<Self> {
        self.mul(other)?.sub(&other.mul(self)?)
    }

    /// `(I ⊗ S) A`.
    pub fn left_spin(&self, spin: &Mat<Complex64>) -> Result<Self> {
        let sop = self.spin_operator(spin)?;
        sop.mul(self)
    }

    /// `A (I ⊗ S)`.
    pub fn right_spin(&self, spin: &Mat<Complex64>) -> Result<Self> {
        let sop = self.spin_operator(spin)?;
        self.mul(&sop)
    }

    /// `I ⊗ S` on the same space.
    pub fn spin_operator(&self, spin: &Mat<Complex64>) -> Result<Self> {
        if spin.nrows() != self.spinor_dim || spin.ncols() != self.spinor_dim {
            return Err(OperatorError::SpinorMismatch {
                expected: self.spinor_dim,
                found: spin.nrows(),
            });
        }
        Ok(self.with_storage(Storage::BlockDiagonal(vec![
            spin.clone();
            self.lattice.len()
        ])))
    }

    /// `A ⊗ S` for a scalar operator `A` (spinor dimension 1).
    pub fn tensor_spin(&self, spin: &Mat<Complex64>) -> Result<Self> {
        if self.spinor_dim != 1 {
            return Err(OperatorError::SpinorMismatch {
                expected: 1,
                found: self.spinor_dim,
            });
        }
        let s = spin.nrows();
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(kron(m, spin)),
            Storage::BlockDiagonal(b) => {
                Storage::BlockDiagonal(b.iter().map(|x| scaled(spin, x[(0, 0)])).collect())
            }
        };
        Ok(Self {
            lattice: self.lattice.clone(),
            spinor_dim: s,
            storage,
        })
    }

    pub fn max_abs(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => max_abs(m),
            Storage::BlockDiagonal(b) => b.iter().map(max_abs).fold(0.0, f64::max),
        }
    }

    pub fn frobenius_norm(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => m.norm_l2(),
            Storage::BlockDiagonal(b) => b.iter().map(|x| x.norm_l2().powi(2)).sum::<f64>().sqrt(),
        }
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<f64> {
        Ok(self.sub(other)?.max_abs())
    }

    pub fn hermitian_deviation(&self) -> f64 {
        match &self.storage {
            Storage::Dense(m) => hermitian_deviation(m),
            Storage::BlockDiagonal(b) => b.iter().map(hermitian_deviation).fold(0.0, f64::max),
        }
    }

    fn require_self_adjoint(&self) -> Result<()> {
        let dev = self.hermitian_deviation();
        let scale = self.max_abs().max(1.0);
        if dev > 1e-10 * scale {
            Err(OperatorError::NotSelfAdjoint(dev))
        } else {
            Ok(())
        }
    }

    /// Eigenvalues of a self-adjoint operator, ascending.
    pub fn eigenvalues(&self) -> Result<Vec<f64>> {
        self.require_self_adjoint()?;
        let mut vals = match &self.storage {
            Storage::Dense(m) => eigvalsh(m)?,
            Storage::BlockDiagonal(b) => {
                let per: Vec<Vec<f64>> = b.par_iter().map(eigvalsh).collect::<Result<_>>()?;
                per.into_iter().flatten().collect()
            }
        };
        vals.sort_by(f64::total_cmp);
        Ok(vals)
    }

    /// Singular values, descending.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        let mut vals = match &self.storage {
            Storage::Dense(m) => m
                .singular_values()
                .map_err(|e| OperatorError::Solver(format!("{e:?}")))?,
            Storage::BlockDiagonal(b) => {
                let per: Vec<Vec<f64>> = b
                    .par_iter()
                    .map(|x| {
                        x.singular_values()
                            .map_err(|e| OperatorError::Solver(format!("{e:?}")))
                    })
                    .collect::<Result<_>>()?;
                per.into_iter().flatten().collect()
            }
        };
        vals.sort_by(|a, b| b.total_cmp(a));
        Ok(vals)
    }

    /// `f(A)` for self-adjoint `A` by the spectral theorem.
    pub fn apply_function(&self, f: impl Fn(f64) -> f64 + Sync) -> Result<Self> {
        self.require_self_adjoint()?;
        let storage = match &self.storage {
            Storage::Dense(m) => Storage::Dense(hermitian_apply(m, &f)?),
            Storage::BlockDiagonal(b) => Storage::BlockDiagonal(
                b.par_iter()
                    .map(|x| hermitian_apply(x, &f))
                    .collect::<Result<_>>()?,
            ),
        };
        Ok(self.with_storage(storage))
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.entry(i, i)).sum()
    }

    /// Trace over the basis vectors whose mode lies in `inner`.
    pub fn trace_on(&self, inner: &ModeWindow) -> Complex64 {
        let w = self.lattice.window();
        let s = self.spinor_dim;
        (0..self.lattice.len())
            .filter(|&k| inner.contains(&w.label(k)))
            .map(|k| {
                (0..s)
                    .map(|a| self.entry(k * s + a, k * s + a))
                    .sum::<Complex64>()
            })
            .sum()
    }

    /// Compression `P A P` onto a smaller window of the same geometry.
    pub fn compress(&self, inner: &Lattice) -> Result<Self> {
        if !inner.window().is_within(self.lattice.window())
            || inner.geometry() != self.lattice.geometry()
        {
            return Err(OperatorError::SpaceMismatch);
        }
        let w = self.lattice.window();
        let map: Vec<usize> = inner
            .window()
            .labels()
            .map(|l| w.index(&l).expect("inner window is contained"))
            .collect();
        let s = self.spinor_dim;
        let storage = match &self.storage {
            Storage::BlockDiagonal(b) => {
                Storage::BlockDiagonal(map.iter().map(|&k| b[k].clone()).collect())
            }
            Storage::Dense(m) => {
                let n = map.len() * s;
                Storage::Dense(Mat::from_fn(n, n, |i, j| {
                    m[(map[i / s] * s + i % s, map[j / s] * s + j % s)]
                }))
            }
        };
        Ok(Self {
            lattice: inner.clone(),
            spinor_dim: s,
            storage,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{Geometry, Signature};

    fn lattice() -> Lattice {
        let g = Geometry::torus(1, 8, Signature::Euclidean).unwrap();
        Lattice::new(g, vec![2]).unwrap()
    }

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn block_and_dense_products_agree() {
        let lat = lattice();
        let d = DiscreteOperator::multiplier(lat.clone(), 2, |k| {
            Mat::from_fn(2, 2, |i, j| c(k[0] + i as f64, j as f64 - k[0]))
        })
        .unwrap();
        let a = DiscreteOperator::dense(
            lat,
            2,
            Mat::from_fn(10, 10, |i, j| {
                c((i * 3 + j) as f64 * 0.1, (i as f64 - j as f64) * 0.2)
            }),
        )
        .unwrap();
        let dd = d.clone().into_dense();
        for (x, y) in [(&d, &a), (&a, &d), (&d, &d)] {
            let fast = x.mul(y).unwrap().to_dense();
            let slow = &x.to_dense() * &y.to_dense();
            assert!(max_abs(&(&fast - &slow)) < 1e-13);
        }
        assert!(d.sub(&dd).unwrap().max_abs() < 1e-15);
    }

    #[test]
    fn functional_calculus_matches_eigenvalues() {
        let lat = lattice();
        let h = Mat::from_fn(5, 5, |i, j| {
            if i == j {
                c(i as f64 - 2.0, 0.0)
            } else {
                c(0.1 * (i + j) as f64, 0.05 * (i as f64 - j as f64))
            }
        });
        let a = DiscreteOperator::dense(lat, 1, h).unwrap();
        let sq = a.mul(&a).unwrap();
        let via = a.apply_function(|x| x * x).unwrap();
        assert!(sq.max_abs_diff(&via).unwrap() < 1e-12);
        let ev = a.eigenvalues().unwrap();
        let tr: f64 = ev.iter().sum();
        assert!((a.trace().re - tr).abs() < 1e-12);
    }

    #[test]
    fn non_hermitian_rejected() {
        let lat = lattice();
        let m = Mat::from_fn(5, 5, |i, j| c((i * 5 + j) as f64, 0.0));
        let a = DiscreteOperator::dense(lat, 1, m).unwrap();
        assert!(matches!(
            a.eigenvalues(),
            Err(OperatorError::NotSelfAdjoint(_))
        ));
    }

    #[test]
    fn compression_and_inner_trace() {
        let lat = lattice();
        let d = DiscreteOperator::multiplier(lat.clone(), 1, |k| {
            Mat::from_fn(1, 1, |_, _| c(k[0], 0.0) + 10.0)
        })
        .unwrap();
        let inner = lat.restricted(vec![1]).unwrap();
        assert_eq!(d.trace_on(inner.window()), c(30.0, 0.0));
        assert_eq!(d.compress(&inner).unwrap().trace(), c(30.0, 0.0));
        let labels = d.labels();
        assert_eq!(labels[0].0.as_slice(), &[-2]);
    }

    #[test]
    fn rank_one_singular_values() {
        let lat = lattice();
        let m = Mat::from_fn(5, 5, |i, j| {
            if i == 1 && j == 3 {
                c(0.0, 2.0)
            } else {
                c(0.0, 0.0)
            }
        });
        let sv = DiscreteOperator::dense(lat, 1, m)
            .unwrap()
            .singular_values()
            .unwrap();
        assert!((sv[0] - 2.0).abs() < 1e-14);
        assert!(sv[1..].iter().all(|&s| s < 1e-14));
    }
}
