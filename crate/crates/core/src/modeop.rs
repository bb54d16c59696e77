//! Lazy operators on `ℓ²(window) ⊗ ℂˢ`, applied column by column.
//!
//! Products of Fourier multipliers, spin matrices and (twisted) shifts keep columns sparse, so
//! diagonal blocks of long operator words can be read off on windows with millions of modes
//! without ever forming a matrix. Every factor acts as its compression to the window: entries
//! pushed outside by a shift are dropped before the next factor is applied.

use std::sync::Arc;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use smallvec::{smallvec, SmallVec};

use crate::fourier::{FourierFunction, Lattice, ModeLabel, ModeWindow};
use crate::operator::{DiscreteOperator, OperatorError};
use crate::star::{bicharacter, DeformationParams, Side};

/// Row-major `s×s` complex block.
#[derive(Clone, Debug, PartialEq)]
pub struct SpinBlock {
    s: usize,
    data: SmallVec<[Complex64; 4]>,
}

impl SpinBlock {
    pub fn zero(s: usize) -> Self {
        Self {
            s,
            data: smallvec![Complex64::new(0.0, 0.0); s * s],
        }
    }

    pub fn identity(s: usize) -> Self {
        Self::scalar(s, Complex64::new(1.0, 0.0))
    }

    pub fn scalar(s: usize, v: Complex64) -> Self {
        let mut out = Self::zero(s);
        for i in 0..s {
            out.data[i * s + i] = v;
        }
        out
    }

    pub fn from_mat(m: &Mat<Complex64>) -> Self {
        let s = m.nrows();
        Self {
            s,
            data: (0..s * s).map(|k| m[(k / s, k % s)]).collect(),
        }
    }

    pub fn to_mat(&self) -> Mat<Complex64> {
        Mat::from_fn(self.s, self.s, |i, j| self.get(i, j))
    }

    pub fn dim(&self) -> usize {
        self.s
    }

    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[i * self.s + j]
    }

    pub fn mul(&self, other: &Self) -> Self {
        let s = self.s;
        if s == 1 {
            return Self {
                s,
                data: smallvec![self.data[0] * other.data[0]],
            };
        }
        let mut out = Self::zero(s);
        for i in 0..s {
            for k in 0..s {
                let a = self.data[i * s + k];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for j in 0..s {
                    out.data[i * s + j] += a * other.data[k * s + j];
                }
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Self) {
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            s: self.s,
            data: self.data.iter().map(|z| z * c).collect(),
        }
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.s).map(|i| self.data[i * self.s + i]).sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    fn is_zero(&self) -> bool {
        self.data.iter().all(|z| z.re == 0.0 && z.im == 0.0)
    }
}

pub type MultiplierFn = Arc<dyn Fn(&[f64]) -> SpinBlock + Send + Sync>;

/// Sparse block column: `(mode label, s×s block)` pairs.
pub type Column = SmallVec<[(ModeLabel, SpinBlock); 4]>;

#[derive(Clone)]
pub enum ModeOp {
    Identity,
    /// Fourier multiplier with block `f(frequency)`.
    Multiplier(MultiplierFn),
    /// `Σ_p c_p·twist(p, j)·(shift by p)`, i.e. convolution by a sparse Fourier function.
    Shift {
        terms: Vec<(ModeLabel, Complex64)>,
        twist: Option<(DeformationParams, Side)>,
    },
    /// `1 ⊗ S`.
    Spin(SpinBlock),
    Scaled(Complex64, Box<ModeOp>),
    Sum(Vec<ModeOp>),
    /// `Product([A, B, C]) = A·B·C`, applied right to left.
    Product(Vec<ModeOp>),
}

impl std::fmt::Debug for ModeOp {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ModeOp::Identity => write!(f, "Identity"),
            ModeOp::Multiplier(_) => write!(f, "Multiplier"),
            ModeOp::Shift { terms, twist } => {
                write!(
                    f,
                    "Shift({} terms, twisted: {})",
                    terms.len(),
                    twist.is_some()
                )
            }
            ModeOp::Spin(_) => write!(f, "Spin"),
            ModeOp::Scaled(c, op) => write!(f, "Scaled({c}, {op:?})"),
            ModeOp::Sum(v) => f.debug_tuple("Sum").field(v).finish(),
            ModeOp::Product(v) => f.debug_tuple("Product").field(v).finish(),
        }
    }
}

impl ModeOp {
    pub fn multiplier(f: impl Fn(&[f64]) -> SpinBlock + Send + Sync + 'static) -> Self {
        ModeOp::Multiplier(Arc::new(f))
    }

    /// Multiplication by `a`, deformed by a left or right regular representation when
    /// `twist` is given. Coefficients with `|c| ≤ drop_below` are skipped.
    pub fn multiplication(
        a: &FourierFunction,
        twist: Option<(DeformationParams, Side)>,
        drop_below: f64,
    ) -> Self {
        let w = a.mu_weight();
        let terms = a
            .window()
            .labels()
            .zip(a.coeffs())
            .filter(|(_, c)| c.norm() > drop_below)
            .map(|(l, &c)| (l, c * w))
            .collect();
        let twist = twist.filter(|(p, _)| !p.is_flat());
        ModeOp::Shift { terms, twist }
    }

    /// Pure shift `e_j ↦ c·e_{j+p}`.
    pub fn monomial(shift: &[i64], c: Complex64) -> Self {
        ModeOp::Shift {
            terms: vec![(shift.iter().copied().collect(), c)],
            twist: None,
        }
    }

    pub fn spin(m: &Mat<Complex64>) -> Self {
        ModeOp::Spin(SpinBlock::from_mat(m))
    }

    pub fn scaled(self, c: Complex64) -> Self {
        ModeOp::Scaled(c, Box::new(self))
    }

    pub fn product(ops: Vec<ModeOp>) -> Self {
        ModeOp::Product(ops)
    }

    /// `[A, B] = AB - BA`.
    pub fn commutator(a: &ModeOp, b: &ModeOp) -> Self {
        ModeOp::Sum(vec![
            ModeOp::Product(vec![a.clone(), b.clone()]),
            ModeOp::Product(vec![b.clone(), a.clone()]).scaled(Complex64::new(-1.0, 0.0)),
        ])
    }

    pub fn apply(&self, lattice: &Lattice, s: usize, col: Column) -> Column {
        match self {
            ModeOp::Identity => col,
            ModeOp::Multiplier(f) => col
                .into_iter()
                .map(|(k, b)| {
                    let m = f(&lattice.label_frequency(&k));
                    (k, m.mul(&b))
                })
                .collect(),
            ModeOp::Spin(m) => col.into_iter().map(|(k, b)| (k, m.mul(&b))).collect(),
            ModeOp::Scaled(c, op) => op
                .apply(lattice, s, col)
                .into_iter()
                .map(|(k, b)| (k, b.scale(*c)))
                .collect(),
            ModeOp::Shift { terms, twist } => {
                let window = lattice.window();
                let mut out = Column::new();
                for (j, b) in &col {
                    let jf = lattice.label_frequency(j);
                    for (p, c) in terms {
                        let k: ModeLabel = j.iter().zip(p).map(|(a, d)| a + d).collect();
                        if !window.contains(&k) {
                            continue;
                        }
                        let coef = match twist {
                            None => *c,
                            Some((params, Side::Left)) => {
                                let pf = lattice.label_frequency(p);
                                let kf = lattice.label_frequency(&k);
                                c * bicharacter(params, &pf, &kf)
                            }
                            Some((params, Side::Right)) => {
                                let kf = lattice.label_frequency(&k);
                                c * bicharacter(params, &jf, &kf)
                            }
                        };
                        out.push((k, b.scale(coef)));
                    }
                }
                compact(out)
            }
            ModeOp::Sum(ops) => {
                let mut out = Column::new();
                for op in ops {
                    out.extend(op.apply(lattice, s, col.clone()));
                }
                compact(out)
            }
            ModeOp::Product(ops) => ops
                .iter()
                .rev()
                .fold(col, |acc, op| op.apply(lattice, s, acc)),
        }
    }

    /// Column of the operator at mode `k`, as blocks against the `s` basis vectors of `k`.
    pub fn column(&self, lattice: &Lattice, s: usize, k: &[i64]) -> Column {
        let start: Column = smallvec![(k.iter().copied().collect(), SpinBlock::identity(s))];
        self.apply(lattice, s, start)
    }

    /// Diagonal block at mode `k`.
    pub fn diag_block(&self, lattice: &Lattice, s: usize, k: &[i64]) -> SpinBlock {
        self.column(lattice, s, k)
            .into_iter()
            .find(|(l, _)| l.as_slice() == k)
            .map_or_else(|| SpinBlock::zero(s), |(_, b)| b)
    }

    /// `f(label, diagonal block)` for every mode of `inner`, in window order.
    pub fn map_diagonal<T: Send>(
        &self,
        lattice: &Lattice,
        s: usize,
        inner: &ModeWindow,
        f: impl Fn(&[i64], &SpinBlock) -> T + Sync,
    ) -> Vec<T> {
        (0..inner.len())
            .into_par_iter()
            .map(|i| {
                let k = inner.label(i);
                let b = self.diag_block(lattice, s, &k);
                f(&k, &b)
            })
            .collect()
    }

    /// Trace over the modes of `inner`.
    pub fn trace_on(&self, lattice: &Lattice, s: usize, inner: &ModeWindow) -> Complex64 {
        self.map_diagonal(lattice, s, inner, |_, b| b.trace())
            .into_iter()
            .sum()
    }

    /// Dense materialisation on the full window of `lattice`.
    pub fn to_operator(
        &self,
        lattice: &Lattice,
        s: usize,
    ) -> Result<DiscreteOperator, OperatorError> {
        let window = lattice.window();
        let n = window.len();
        let cols: Vec<Column> = (0..n)
            .into_par_iter()
            .map(|j| self.column(lattice, s, &window.label(j)))
            .collect();
        let mut m = Mat::<Complex64>::zeros(n * s, n * s);
        for (j, col) in cols.iter().enumerate() {
            for (k, b) in col {
                let i = window.index(k).expect("columns stay inside the window");
                for a in 0..s {
                    for c in 0..s {
                        m[(i * s + a, j * s + c)] = b.get(a, c);
                    }
                }
            }
        }
        DiscreteOperator::dense(lattice.clone(), s, m)
    }
}

/// Sorts by label, merges duplicates and drops exact zeros.
fn compact(mut col: Column) -> Column {
    if col.len() <= 1 {
        return col;
    }
    col.sort_by(|a, b| a.0.cmp(&b.0));
    let mut out = Column::new();
    for (k, b) in col {
        match out.last_mut() {
            Some((lk, lb)) if *lk == k => lb.add_assign(&b),
            _ => out.push((k, b)),
        }
    }
    out.retain(|(_, b)| !b.is_zero());
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{Geometry, Signature};
    use crate::star::regular_representation;
    use rand::{Rng, SeedableRng};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn lattice() -> Lattice {
        let g = Geometry::torus(2, 16, Signature::Euclidean).unwrap();
        Lattice::new(g, vec![3, 2]).unwrap()
    }

    fn small_function(seed: u64) -> FourierFunction {
        let g = Geometry::torus(2, 16, Signature::Euclidean).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        FourierFunction::from_label_fn(g, |l| {
            if l[0].abs() <= 1 && l[1].abs() <= 1 {
                c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                c(0.0, 0.0)
            }
        })
        .unwrap()
    }

    #[test]
    fn lazy_matches_dense_products() {
        let lat = lattice();
        let params = DeformationParams::torus2(0.4, 0.8);
        let a = small_function(1);
        let b = small_function(2);
        let cut = lat.window().half_widths().to_vec();
        let la = regular_representation(&a, &params, Side::Left, &cut).unwrap();
        let rb = regular_representation(&b, &params, Side::Right, &cut).unwrap();
        let sigma = crate::clifford::pauli();
        let d = DiscreteOperator::multiplier(lat.clone(), 2, |k| {
            Mat::from_fn(2, 2, |i, j| {
                sigma[0][(i, j)] * k[0] + sigma[2][(i, j)] * k[1]
            })
        })
        .unwrap();
        let dense = la
            .tensor_spin(&Mat::identity(2, 2))
            .unwrap()
            .mul(&d)
            .unwrap()
            .mul(&rb.tensor_spin(&Mat::identity(2, 2)).unwrap())
            .unwrap()
            .right_spin(&sigma[1])
            .unwrap();
        let s0 = sigma[0].clone();
        let s2 = sigma[2].clone();
        let lazy = ModeOp::product(vec![
            ModeOp::multiplication(&a, Some((params.clone(), Side::Left)), 0.0),
            ModeOp::multiplier(move |k| {
                SpinBlock::from_mat(&Mat::from_fn(2, 2, |i, j| {
                    s0[(i, j)] * k[0] + s2[(i, j)] * k[1]
                }))
            }),
            ModeOp::multiplication(&b, Some((params, Side::Right)), 0.0),
            ModeOp::spin(&sigma[1]),
        ]);
        let mat = lazy.to_operator(&lat, 2).unwrap();
        assert!(mat.max_abs_diff(&dense).unwrap() < 1e-13);
        let tr = lazy.trace_on(&lat, 2, lat.window());
        assert!((tr - dense.trace()).norm() < 1e-12);
    }

    #[test]
    fn commutator_of_multiplier_with_itself_vanishes() {
        let lat = lattice();
        let m = ModeOp::multiplier(|k| SpinBlock::scalar(1, c(k[0] * k[1], 0.0)));
        let comm = ModeOp::commutator(&m, &m);
        for i in 0..lat.len() {
            assert!(comm.column(&lat, 1, &lat.window().label(i)).is_empty());
        }
    }

    #[test]
    fn shifts_leaving_the_window_are_dropped() {
        let lat = lattice();
        let up = ModeOp::monomial(&[1, 0], c(1.0, 0.0));
        let down = ModeOp::monomial(&[-1, 0], c(1.0, 0.0));
        let prod = ModeOp::product(vec![down, up]);
        assert_eq!(prod.diag_block(&lat, 1, &[3, 0]), SpinBlock::zero(1));
        assert_eq!(prod.diag_block(&lat, 1, &[2, 0]), SpinBlock::identity(1));
    }
}
