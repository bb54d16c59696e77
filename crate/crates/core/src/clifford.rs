//! Gamma matrices of signature `(p, q)`, gradings, spacelike reflections and Krein structures.
//!
//! The first `p` directions are timelike: `η = diag(-1,…,-1, +1,…,+1)`. Positive-signature gammas
//! are Hermitian and square to `+1`; negative-signature gammas are anti-Hermitian and square to
//! `-1`.

use faer::{Mat, Side};
use num_complex::Complex64;
use thiserror::Error;

use crate::operator::{
    eigvalsh, hermitian_apply, hermitian_deviation, max_abs, DiscreteOperator, OperatorError,
};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CliffordError {
    #[error("unsupported Clifford dimension p + q = {0} (need 1..=8)")]
    UnsupportedDimension(usize),
    #[error("grading needs an even dimension, got {0}")]
    OddDimension(usize),
    #[error("reflection fails `{invariant}` (residual {residual:e})")]
    InvalidReflection {
        invariant: &'static str,
        residual: f64,
    },
    #[error("Krein structure fails `{invariant}` (residual {residual:e})")]
    InvalidKrein {
        invariant: &'static str,
        residual: f64,
    },
    #[error("operator is not Krein-self-adjoint: max |D - D^[*]| = {0:e}")]
    NotKreinSelfAdjoint(f64),
    #[error("vectors have lengths {0} and {1}, incompatible with spinor dimension {2}")]
    LengthMismatch(usize, usize, usize),
    #[error("no unit phase satisfies the required identities")]
    NoPhase,
    #[error(transparent)]
    Operator(#[from] OperatorError),
}

pub type Result<T> = std::result::Result<T, CliffordError>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn mat2(a: [[Complex64; 2]; 2]) -> Mat<Complex64> {
    Mat::from_fn(2, 2, |i, j| a[i][j])
}

pub(crate) fn pauli() -> [Mat<Complex64>; 3] {
    let (o, z, i) = (c(1.0, 0.0), c(0.0, 0.0), c(0.0, 1.0));
    [
        mat2([[z, o], [o, z]]),
        mat2([[z, -i], [i, z]]),
        mat2([[o, z], [z, -o]]),
    ]
}

fn kron(a: &Mat<Complex64>, b: &Mat<Complex64>) -> Mat<Complex64> {
    crate::operator::kron(a, b)
}

const PHASES: [(f64, f64); 4] = [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)];

fn identity(n: usize) -> Mat<Complex64> {
    Mat::identity(n, n)
}

fn diff_norm(a: &Mat<Complex64>, b: &Mat<Complex64>) -> f64 {
    max_abs(&(a - b))
}

/// Euclidean generators for dimension `m`, all Hermitian with square `+1`.
fn euclidean_gammas(m: usize) -> Vec<Mat<Complex64>> {
    if m == 0 {
        return Vec::new();
    }
    if m % 2 == 1 {
        let mut even = euclidean_gammas(m - 1);
        let dim = if m == 1 { 1 } else { even[0].nrows() };
        let chir = if m == 1 {
            identity(1)
        } else {
            hermitian_involution_phase(&product(&even, dim), None).expect("chirality exists")
        };
        even.push(chir);
        return even;
    }
    let base = euclidean_gammas(m - 2);
    let dim = base.first().map_or(1, |g| g.nrows());
    let [s1, s2, s3] = pauli();
    let mut out: Vec<_> = base.iter().map(|g| kron(g, &s1)).collect();
    out.push(kron(&identity(dim), &s2));
    out.push(kron(&identity(dim), &s3));
    out
}

fn product(gs: &[Mat<Complex64>], dim: usize) -> Mat<Complex64> {
    gs.iter().fold(identity(dim), |acc, g| &acc * g)
}

/// First phase in `1, i, -1, -i` making `phase·p` an involution, Hermitian when `metric` is
/// `None`, and with `metric·(phase·p)` positive definite otherwise.
fn hermitian_involution_phase(
    p: &Mat<Complex64>,
    metric: Option<&Mat<Complex64>>,
) -> Option<Mat<Complex64>> {
    let n = p.nrows();
    for (re, im) in PHASES {
        let cand = crate::operator::scaled(p, c(re, im));
        if diff_norm(&(&cand * &cand), &identity(n)) > 1e-12 {
            continue;
        }
        match metric {
            None => {
                if hermitian_deviation(&cand) < 1e-12 {
                    return Some(cand);
                }
            }
            Some(g) => {
                let gj = g * &cand;
                if hermitian_deviation(&gj) < 1e-12
                    && eigvalsh(&gj).is_ok_and(|v| v.iter().all(|&x| x > 1e-12))
                {
                    return Some(cand);
                }
            }
        }
    }
    None
}

/// Gamma matrices for signature `(p, q)` with `p` timelike directions first.
#[derive(Clone, Debug)]
pub struct CliffordRep {
    p: usize,
    q: usize,
    gammas: Vec<Mat<Complex64>>,
}

pub fn build_gammas(p: usize, q: usize) -> Result<CliffordRep> {
    let m = p + q;
    if m == 0 || m > 8 {
        return Err(CliffordError::UnsupportedDimension(m));
    }
    let gammas = euclidean_gammas(m)
        .into_iter()
        .enumerate()
        .map(|(a, g)| {
            if a < p {
                crate::operator::scaled(&g, c(0.0, 1.0))
            } else {
                g
            }
        })
        .collect();
    Ok(CliffordRep { p, q, gammas })
}

impl CliffordRep {
    pub fn p(&self) -> usize {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn dim(&self) -> usize {
        self.p + self.q
    }

    pub fn spinor_dim(&self) -> usize {
        self.gammas[0].nrows()
    }

    pub fn gammas(&self) -> &[Mat<Complex64>] {
        &self.gammas
    }

    pub fn gamma(&self, a: usize) -> &Mat<Complex64> {
        &self.gammas[a]
    }

    pub fn eta(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|a| if a < self.p { -1.0 } else { 1.0 })
            .collect()
    }

    pub fn is_lorentzian(&self) -> bool {
        self.p > 0
    }

    /// `γ(v) = Σ_a v_a γ^a`.
    pub fn gamma_of(&self, v: &[f64]) -> Mat<Complex64> {
        let s = self.spinor_dim();
        Mat::from_fn(s, s, |i, j| {
            self.gammas
                .iter()
                .zip(v)
                .map(|(g, &va)| g[(i, j)] * va)
                .sum()
        })
    }

    /// Largest deviation from `γᵃγᵇ + γᵇγᵃ = 2ηᵃᵇ`.
    pub fn anticommutator_residual(&self) -> f64 {
        let eta = self.eta();
        let s = self.spinor_dim();
        let mut worst: f64 = 0.0;
        for a in 0..self.dim() {
            for b in 0..self.dim() {
                let ac = &self.gammas[a] * &self.gammas[b] + &self.gammas[b] * &self.gammas[a];
                let target = if a == b {
                    crate::operator::scaled(&identity(s), c(2.0 * eta[a], 0.0))
                } else {
                    Mat::zeros(s, s)
                };
                worst = worst.max(diff_norm(&ac, &target));
            }
        }
        worst
    }
}

/// `χ = phase·γ¹⋯γᵐ` with `χ² = 1` and `χ† = χ`.
pub fn grading_chi(rep: &CliffordRep) -> Result<Mat<Complex64>> {
    let m = rep.dim();
    if m % 2 == 1 {
        return Err(CliffordError::OddDimension(m));
    }
    hermitian_involution_phase(&product(rep.gammas(), rep.spinor_dim()), None)
        .ok_or(CliffordError::NoPhase)
}

/// Row-major real `m×m` matrix.
fn real_mat(m: usize, data: &[f64]) -> Mat<f64> {
    Mat::from_fn(m, m, |i, j| data[i * m + j])
}

fn real_max_abs(a: &Mat<f64>) -> f64 {
    let mut out: f64 = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            out = out.max(a[(i, j)].abs());
        }
    }
    out
}

/// An η-isometric involution `r` with `η(·, r·)` positive definite.
#[derive(Clone, Debug, PartialEq)]
pub struct SpacelikeReflection {
    r: Vec<f64>,
    eta: Vec<f64>,
}

impl SpacelikeReflection {
    pub fn new(r: Vec<f64>, eta: Vec<f64>) -> Result<Self> {
        let m = eta.len();
        if r.len() != m * m {
            return Err(CliffordError::InvalidReflection {
                invariant: "shape",
                residual: f64::INFINITY,
            });
        }
        let rm = real_mat(m, &r);
        let em = Mat::<f64>::from_fn(m, m, |i, j| if i == j { eta[i] } else { 0.0 });
        let iso = rm.transpose() * &em * &rm - &em;
        let iso_res = real_max_abs(&iso);
        if iso_res > 1e-10 {
            return Err(CliffordError::InvalidReflection {
                invariant: "rᵀηr = η",
                residual: iso_res,
            });
        }
        let inv_res = real_max_abs(&(&rm * &rm - Mat::<f64>::identity(m, m)));
        if inv_res > 1e-10 {
            return Err(CliffordError::InvalidReflection {
                invariant: "r² = 1",
                residual: inv_res,
            });
        }
        let er = &em * &rm;
        let sym = Mat::<f64>::from_fn(m, m, |i, j| 0.5 * (er[(i, j)] + er[(j, i)]));
        let ev = sym.self_adjoint_eigenvalues(Side::Lower).map_err(|_| {
            CliffordError::InvalidReflection {
                invariant: "η·r positive definite",
                residual: f64::NAN,
            }
        })?;
        let min = ev.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 1e-12 {
            return Err(CliffordError::InvalidReflection {
                invariant: "η·r positive definite",
                residual: min,
            });
        }
        Ok(Self { r, eta })
    }

    /// `r = -1` on the timelike directions and `+1` on the spacelike ones.
    pub fn standard(p: usize, q: usize) -> Self {
        let m = p + q;
        let mut r = vec![0.0; m * m];
        for a in 0..m {
            r[a * m + a] = if a < p { -1.0 } else { 1.0 };
        }
        let eta = (0..m).map(|a| if a < p { -1.0 } else { 1.0 }).collect();
        Self { r, eta }
    }

    /// Standard reflection conjugated by a boost of rapidity `beta` in the `(0, 1)` plane.
    pub fn boosted(p: usize, q: usize, beta: f64) -> Result<Self> {
        let m = p + q;
        if p == 0 || q == 0 {
            return Err(CliffordError::InvalidReflection {
                invariant: "boost needs a timelike and a spacelike direction",
                residual: f64::NAN,
            });
        }
        let (ch, sh) = (beta.cosh(), beta.sinh());
        let lam = Mat::<f64>::from_fn(m, m, |i, j| match (i, j) {
            (0, 0) | (1, 1) => ch,
            (0, 1) | (1, 0) => sh,
            _ if i == j => 1.0,
            _ => 0.0,
        });
        let lam_inv = Mat::<f64>::from_fn(m, m, |i, j| match (i, j) {
            (0, 0) | (1, 1) => ch,
            (0, 1) | (1, 0) => -sh,
            _ if i == j => 1.0,
            _ => 0.0,
        });
        let std = Self::standard(p, q);
        let r = &lam * real_mat(m, &std.r) * &lam_inv;
        let flat = (0..m * m).map(|k| r[(k / m, k % m)]).collect();
        Self::new(flat, std.eta)
    }

    pub fn dim(&self) -> usize {
        self.eta.len()
    }

    pub fn matrix(&self) -> &[f64] {
        &self.r
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..m)
            .map(|i| (0..m).map(|j| self.r[i * m + j] * v[j]).sum())
            .collect()
    }

    /// `gʳ(ξ, ξ) = η(ξ, rξ)`.
    pub fn riemannian_norm_sqr(&self, xi: &[f64]) -> f64 {
        let rx = self.apply(xi);
        xi.iter()
            .zip(&rx)
            .zip(&self.eta)
            .map(|((a, b), e)| a * b * e)
            .sum()
    }

    /// Residuals of `rᵀηr = η`, `r² = 1` and the smallest eigenvalue of `η·r`.
    pub fn invariant_residuals(&self) -> (f64, f64, f64) {
        residuals_of(&self.r, &self.eta)
    }

    /// Oriented frame of the `-1` eigenspace, orthonormal for `-η`.
    fn timelike_frame(&self) -> Vec<Vec<f64>> {
        let m = self.dim();
        let rp = Mat::<f64>::from_fn(m, m, |i, j| {
            self.r[i * m + j] + if i == j { 1.0 } else { 0.0 }
        });
        // kernel of r + 1 from the right singular vectors
        let svd = rp.svd().expect("svd of a small real matrix");
        let s = svd.S().column_vector();
        let v = svd.V();
        let mut basis: Vec<Vec<f64>> = (0..m)
            .filter(|&k| s[k].abs() < 1e-9)
            .map(|k| (0..m).map(|i| v[(i, k)]).collect())
            .collect();
        let form = |a: &[f64], b: &[f64]| -> f64 {
            -a.iter()
                .zip(b)
                .zip(&self.eta)
                .map(|((x, y), e)| x * y * e)
                .sum::<f64>()
        };
        let mut frame: Vec<Vec<f64>> = Vec::new();
        for mut u in basis.drain(..) {
            for e in &frame {
                let proj = form(&u, e);
                u.iter_mut().zip(e).for_each(|(x, y)| *x -= proj * y);
            }
            let nrm = form(&u, &u).sqrt();
            u.iter_mut().for_each(|x| *x /= nrm);
            frame.push(u);
        }
        // orientation: the frame's timelike components must have positive determinant
        let k = frame.len();
        if k > 0 {
            let t = Mat::<f64>::from_fn(k, k, |i, j| frame[j][i]);
            if t.determinant() < 0.0 {
                frame[0].iter_mut().for_each(|x| *x = -*x);
            }
        }
        frame
    }
}

fn residuals_of(r: &[f64], eta: &[f64]) -> (f64, f64, f64) {
    let m = eta.len();
    let rm = real_mat(m, r);
    let em = Mat::<f64>::from_fn(m, m, |i, j| if i == j { eta[i] } else { 0.0 });
    let iso = real_max_abs(&(rm.transpose() * &em * &rm - &em));
    let inv = real_max_abs(&(&rm * &rm - Mat::<f64>::identity(m, m)));
    let er = &em * &rm;
    let sym = Mat::<f64>::from_fn(m, m, |i, j| 0.5 * (er[(i, j)] + er[(j, i)]));
    let min = sym
        .self_adjoint_eigenvalues(Side::Lower)
        .map(|v| v.iter().cloned().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN);
    (iso, inv, min)
}

/// Def. 22 residuals of an arbitrary candidate matrix.
pub fn reflection_residuals(r: &[f64], eta: &[f64]) -> (f64, f64, f64) {
    residuals_of(r, eta)
}

/// Fundamental symmetry `J` on the spinor factor together with the Krein metric `G`:
/// `(ψ, φ) = ψ†Gφ` and `⟨ψ, φ⟩_J = ψ†GJφ`.
#[derive(Clone, Debug)]
pub struct KreinStructure {
    j: Mat<Complex64>,
    metric: Mat<Complex64>,
}

impl KreinStructure {
    pub fn new(j: Mat<Complex64>, metric: Mat<Complex64>) -> Result<Self> {
        let n = j.nrows();
        let sq = diff_norm(&(&j * &j), &identity(n));
        if sq > 1e-10 {
            return Err(CliffordError::InvalidKrein {
                invariant: "J² = 1",
                residual: sq,
            });
        }
        let gsq = diff_norm(&(&metric * &metric), &identity(n));
        let gh = hermitian_deviation(&metric);
        if gsq > 1e-10 || gh > 1e-10 {
            return Err(CliffordError::InvalidKrein {
                invariant: "G Hermitian involution",
                residual: gsq.max(gh),
            });
        }
        let gj = &metric * &j;
        let herm = hermitian_deviation(&gj);
        if herm > 1e-10 {
            return Err(CliffordError::InvalidKrein {
                invariant: "GJ Hermitian",
                residual: herm,
            });
        }
        let min = eigvalsh(&gj)?.into_iter().fold(f64::INFINITY, f64::min);
        if min <= 1e-12 {
            return Err(CliffordError::InvalidKrein {
                invariant: "GJ positive definite",
                residual: min,
            });
        }
        Ok(Self { j, metric })
    }

    /// Trivial structure `J = G = 1`.
    pub fn euclidean(spinor_dim: usize) -> Self {
        Self {
            j: identity(spinor_dim),
            metric: identity(spinor_dim),
        }
    }

    /// Minkowski vectors: `G = η`, `J = r`.
    pub fn vector(r: &SpacelikeReflection) -> Result<Self> {
        let m = r.dim();
        let j = Mat::from_fn(m, m, |a, b| c(r.matrix()[a * m + b], 0.0));
        let g = Mat::from_fn(m, m, |a, b| {
            if a == b {
                c(r.eta()[a], 0.0)
            } else {
                c(0.0, 0.0)
            }
        });
        Self::new(j, g)
    }

    pub fn j(&self) -> &Mat<Complex64> {
        &self.j
    }

    pub fn metric(&self) -> &Mat<Complex64> {
        &self.metric
    }

    pub fn dim(&self) -> usize {
        self.j.nrows()
    }

    /// `GJ`, the Gram matrix of `⟨·,·⟩_J`.
    pub fn gram(&self) -> Mat<Complex64> {
        &self.metric * &self.j
    }

    fn extended(&self, v: &[Complex64], m: &Mat<Complex64>) -> Vec<Complex64> {
        let s = self.dim();
        v.chunks(s)
            .flat_map(|blk| (0..s).map(move |i| (0..s).map(|k| m[(i, k)] * blk[k]).sum()))
            .collect()
    }

    fn check_len(&self, a: &[Complex64], b: &[Complex64]) -> Result<()> {
        let s = self.dim();
        if a.len() != b.len() || !a.len().is_multiple_of(s) {
            return Err(CliffordError::LengthMismatch(a.len(), b.len(), s));
        }
        Ok(())
    }

    /// `J² = 1` residual, `GJ` Hermitian residual and smallest eigenvalue of `GJ`.
    pub fn invariant_residuals(&self) -> (f64, f64, f64) {
        let n = self.dim();
        let gj = self.gram();
        let min = eigvalsh(&gj)
            .map(|v| v.into_iter().fold(f64::INFINITY, f64::min))
            .unwrap_or(f64::NAN);
        (
            diff_norm(&(&self.j * &self.j), &identity(n)),
            hermitian_deviation(&gj),
            min,
        )
    }
}

/// `J_r = phase·γ(e₀)⋯γ(e_{k-1})` for an oriented `-η`-orthonormal frame of the timelike block.
pub fn reflection_to_j(rep: &CliffordRep, r: &SpacelikeReflection) -> Result<KreinStructure> {
    if r.dim() != rep.dim() || r.eta() != rep.eta().as_slice() {
        return Err(CliffordError::InvalidReflection {
            invariant: "signature matches the representation",
            residual: f64::NAN,
        });
    }
    let s = rep.spinor_dim();
    let frame = r.timelike_frame();
    if frame.len() != rep.p() {
        return Err(CliffordError::InvalidReflection {
            invariant: "dim F₁ = p",
            residual: frame.len() as f64,
        });
    }
    let std_frame: Vec<Mat<Complex64>> = (0..rep.p()).map(|a| rep.gamma(a).clone()).collect();
    let j0 =
        hermitian_involution_phase(&product(&std_frame, s), None).ok_or(CliffordError::NoPhase)?;
    let gammas: Vec<_> = frame.iter().map(|e| rep.gamma_of(e)).collect();
    let j = hermitian_involution_phase(&product(&gammas, s), Some(&j0))
        .ok_or(CliffordError::NoPhase)?;
    KreinStructure::new(j, j0)
}

/// `(ψ, φ) = ψ†(1 ⊗ G)φ`.
pub fn krein_inner(psi: &[Complex64], phi: &[Complex64], ks: &KreinStructure) -> Result<Complex64> {
    ks.check_len(psi, phi)?;
    let gphi = ks.extended(phi, &ks.metric);
    Ok(psi.iter().zip(&gphi).map(|(a, b)| a.conj() * b).sum())
}

/// `⟨ψ, φ⟩_J = (ψ, Jφ)`.
pub fn j_inner(psi: &[Complex64], phi: &[Complex64], ks: &KreinStructure) -> Result<Complex64> {
    ks.check_len(psi, phi)?;
    let jphi = ks.extended(phi, &ks.j);
    krein_inner(psi, &jphi, ks)
}

/// Adjoint for the indefinite product: `A^[*] = G⁻¹A†G`, which is `JA†J` when `G = J`.
pub fn krein_adjoint(a: &DiscreteOperator, ks: &KreinStructure) -> Result<DiscreteOperator> {
    Ok(a.adjoint().left_spin(&ks.metric)?.right_spin(&ks.metric)?)
}

/// Adjoint for the Hilbert product `⟨·,·⟩_J`: `H⁻¹A†H` with `H = GJ`.
pub fn j_adjoint(a: &DiscreteOperator, ks: &KreinStructure) -> Result<DiscreteOperator> {
    let h = ks.gram();
    let h_inv = crate::operator::hermitian_apply(&h, |x| 1.0 / x)?;
    Ok(a.adjoint().left_spin(&h_inv)?.right_spin(&h)?)
}

pub fn krein_self_adjoint_residual(d: &DiscreteOperator, ks: &KreinStructure) -> Result<f64> {
    Ok(d.max_abs_diff(&krein_adjoint(d, ks)?)?)
}

/// `(D)_J = ½(DD* + D*D)` with `*` the `⟨·,·⟩_J`-adjoint, and `Δ_J = ((D)_J + 1)^{1/2}`.
pub fn j_square_delta(
    d: &DiscreteOperator,
    ks: &KreinStructure,
) -> Result<(DiscreteOperator, DiscreteOperator)> {
    let res = krein_self_adjoint_residual(d, ks)?;
    if res > 1e-10 * d.max_abs().max(1.0) {
        return Err(CliffordError::NotKreinSelfAdjoint(res));
    }
    let ds = j_adjoint(d, ks)?;
    let dj = d
        .mul(&ds)?
        .add(&ds.mul(d)?)?
        .scale(Complex64::new(0.5, 0.0));
    // pass to a ⟨·,·⟩_J-orthonormal spinor frame, where (D)_J is Hermitian
    let h = ks.gram();
    let root = hermitian_apply(&h, f64::sqrt)?;
    let root_inv = hermitian_apply(&h, |x| 1.0 / x.sqrt())?;
    let herm = dj.left_spin(&root)?.right_spin(&root_inv)?;
    let delta = herm
        .apply_function(|x| (x.max(0.0) + 1.0).sqrt())?
        .left_spin(&root_inv)?
        .right_spin(&root)?;
    Ok((dj, delta))
}

/// `J` extended as `1 ⊗ J` over the mode space of `like`.
pub fn extend_j(like: &DiscreteOperator, ks: &KreinStructure) -> Result<DiscreteOperator> {
    Ok(like.spin_operator(&ks.j)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{Geometry, Lattice, Signature};
    use crate::operator::adjoint_of;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn random_mat(n: usize, rng: &mut impl Rng) -> Mat<Complex64> {
        Mat::from_fn(n, n, |_, _| {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    #[test]
    fn anticommutation_for_all_small_signatures() {
        for m in 1..=6 {
            for p in 0..=m {
                let rep = build_gammas(p, m - p).unwrap();
                assert_eq!(rep.spinor_dim(), 1 << (m / 2));
                assert!(
                    rep.anticommutator_residual() < 1e-14,
                    "(p,q)=({p},{})",
                    m - p
                );
                for a in 0..m {
                    let g = rep.gamma(a);
                    let adj = adjoint_of(g);
                    if a < p {
                        assert!(max_abs(&(&adj + g)) < 1e-15);
                    } else {
                        assert!(max_abs(&(&adj - g)) < 1e-15);
                    }
                }
            }
        }
        assert!(build_gammas(0, 0).is_err());
        assert!(build_gammas(4, 5).is_err());
    }

    #[test]
    fn small_cases() {
        let r = build_gammas(0, 1).unwrap();
        assert_eq!(r.gamma(0)[(0, 0)], c(1.0, 0.0));
        let r = build_gammas(1, 1).unwrap();
        let g0sq = r.gamma(0) * r.gamma(0);
        assert!(diff_norm(&g0sq, &crate::operator::scaled(&identity(2), c(-1.0, 0.0))) < 1e-15);
    }

    #[test]
    fn grading_properties() {
        for (p, q) in [(0, 2), (1, 1), (0, 4), (1, 3), (2, 2)] {
            let rep = build_gammas(p, q).unwrap();
            let chi = grading_chi(&rep).unwrap();
            let s = rep.spinor_dim();
            assert!(diff_norm(&(&chi * &chi), &identity(s)) < 1e-14);
            assert!(hermitian_deviation(&chi) < 1e-14);
            let tr: Complex64 = (0..s).map(|i| chi[(i, i)]).sum();
            assert!(tr.norm() < 1e-14);
            for g in rep.gammas() {
                assert!(max_abs(&(&chi * g + g * &chi)) < 1e-14);
            }
        }
        assert_eq!(
            grading_chi(&build_gammas(0, 3).unwrap()).unwrap_err(),
            CliffordError::OddDimension(3)
        );
    }

    #[test]
    fn standard_lorentzian_j_is_i_gamma0() {
        let rep = build_gammas(1, 1).unwrap();
        let ks = reflection_to_j(&rep, &SpacelikeReflection::standard(1, 1)).unwrap();
        let target = crate::operator::scaled(rep.gamma(0), c(0.0, 1.0));
        assert!(diff_norm(ks.j(), &target) < 1e-15);
        let (sq, herm, min) = ks.invariant_residuals();
        assert!(sq < 1e-15 && herm < 1e-15 && min > 0.0);
        let e = reflection_to_j(
            &build_gammas(0, 2).unwrap(),
            &SpacelikeReflection::standard(0, 2),
        )
        .unwrap();
        assert!(diff_norm(e.j(), &identity(2)) < 1e-15);
    }

    #[test]
    fn boosted_reflections_give_fundamental_symmetries() {
        for (p, q) in [(1, 1), (1, 3), (2, 2)] {
            let rep = build_gammas(p, q).unwrap();
            for beta in [0.0, 0.3, 0.7] {
                let r = SpacelikeReflection::boosted(p, q, beta).unwrap();
                let ks = reflection_to_j(&rep, &r).unwrap();
                let (sq, herm, min) = ks.invariant_residuals();
                assert!(sq < 1e-12 && herm < 1e-12 && min > 0.0, "β={beta}");
                if p == 1 && q == 1 {
                    // GJ has eigenvalues e^{∓β}
                    let ev = eigvalsh(&ks.gram()).unwrap();
                    assert!((ev[0] - (-beta).exp()).abs() < 1e-12);
                    assert!((ev[1] - beta.exp()).abs() < 1e-12);
                }
            }
        }
        let bad = SpacelikeReflection::new(vec![1.0, 0.0, 0.0, 1.0], vec![-1.0, 1.0]);
        assert!(matches!(bad, Err(CliffordError::InvalidReflection { .. })));
    }

    #[test]
    fn minkowski_vector_products() {
        let r = SpacelikeReflection::standard(1, 1);
        let ks = KreinStructure::vector(&r).unwrap();
        let e0 = [c(1.0, 0.0), c(0.0, 0.0)];
        assert_eq!(krein_inner(&e0, &e0, &ks).unwrap(), c(-1.0, 0.0));
        let x = [c(0.3, 0.0), c(-1.2, 0.0)];
        let y = [c(2.0, 0.0), c(0.5, 0.0)];
        assert!((j_inner(&x, &y, &ks).unwrap() - c(0.6 - 0.6, 0.0)).norm() < 1e-15);
        assert!(krein_inner(&x, &y[..1], &ks).is_err());
        let eu = KreinStructure::euclidean(2);
        assert_eq!(krein_inner(&x, &y, &eu).unwrap(), c(0.0, 0.0));
    }

    fn lattice() -> Lattice {
        let g = Geometry::torus(2, 8, Signature::Lorentzian).unwrap();
        Lattice::new(g, vec![1, 1]).unwrap()
    }

    #[test]
    fn krein_adjoint_is_involutive_anti_homomorphism() {
        let rep = build_gammas(1, 1).unwrap();
        let ks = reflection_to_j(&rep, &SpacelikeReflection::standard(1, 1)).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let lat = lattice();
        let n = lat.len() * 2;
        let a = DiscreteOperator::dense(lat.clone(), 2, random_mat(n, &mut rng)).unwrap();
        let b = DiscreteOperator::dense(lat, 2, random_mat(n, &mut rng)).unwrap();
        let aa = krein_adjoint(&krein_adjoint(&a, &ks).unwrap(), &ks).unwrap();
        assert!(aa.max_abs_diff(&a).unwrap() < 1e-14);
        let lhs = krein_adjoint(&a.mul(&b).unwrap(), &ks).unwrap();
        let rhs = krein_adjoint(&b, &ks)
            .unwrap()
            .mul(&krein_adjoint(&a, &ks).unwrap())
            .unwrap();
        assert!(lhs.max_abs_diff(&rhs).unwrap() < 1e-12);
        let eu = KreinStructure::euclidean(2);
        assert!(
            krein_adjoint(&a, &eu)
                .unwrap()
                .max_abs_diff(&a.adjoint())
                .unwrap()
                < 1e-15
        );
    }

    #[test]
    fn krein_self_adjoint_iff_jd_hermitian() {
        let rep = build_gammas(1, 1).unwrap();
        let ks = reflection_to_j(&rep, &SpacelikeReflection::standard(1, 1)).unwrap();
        let lat = lattice();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let n = lat.len() * 2;
        let h = random_mat(n, &mut rng);
        let h = &h + adjoint_of(&h);
        // D = J H with H Hermitian is Krein-self-adjoint
        let d = DiscreteOperator::dense(lat.clone(), 2, h)
            .unwrap()
            .left_spin(ks.j())
            .unwrap();
        assert!(krein_self_adjoint_residual(&d, &ks).unwrap() < 1e-13);
        assert!(d.left_spin(ks.j()).unwrap().hermitian_deviation() < 1e-13);
        // a non-Hermitian H breaks both
        let k = random_mat(n, &mut rng);
        let e = DiscreteOperator::dense(lat, 2, k).unwrap();
        assert!(krein_self_adjoint_residual(&e, &ks).unwrap() > 1e-3);
        assert!(e.left_spin(ks.j()).unwrap().hermitian_deviation() > 1e-3);
        assert!(matches!(
            j_square_delta(&e, &ks),
            Err(CliffordError::NotKreinSelfAdjoint(_))
        ));
    }

    #[test]
    fn delta_j_trivial_cases() {
        let lat = lattice();
        let eu = KreinStructure::euclidean(2);
        let zero = DiscreteOperator::identity(lat.clone(), 2).scale(c(0.0, 0.0));
        let (dj, delta) = j_square_delta(&zero, &eu).unwrap();
        assert!(dj.max_abs() == 0.0);
        assert!(
            delta
                .max_abs_diff(&DiscreteOperator::identity(lat.clone(), 2))
                .unwrap()
                < 1e-14
        );
        let d = DiscreteOperator::multiplier(lat, 2, |k| {
            Mat::from_fn(2, 2, |i, j| {
                if i == j {
                    c(k[0] + 2.0 * i as f64, 0.0)
                } else {
                    c(0.0, 0.0)
                }
            })
        })
        .unwrap();
        let (dj, delta) = j_square_delta(&d, &eu).unwrap();
        assert!(dj.max_abs_diff(&d.mul(&d).unwrap()).unwrap() < 1e-13);
        let expect = d
            .mul(&d)
            .unwrap()
            .apply_function(|x| (x + 1.0).sqrt())
            .unwrap();
        assert!(delta.max_abs_diff(&expect).unwrap() < 1e-13);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn j_commutes_with_function_space_operators(seed in any::<u64>(), beta in -1.0f64..1.0) {
            let rep = build_gammas(1, 1).unwrap();
            let ks = reflection_to_j(&rep, &SpacelikeReflection::boosted(1, 1, beta).unwrap()).unwrap();
            let lat = lattice();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let a = DiscreteOperator::dense(lat.clone(), 1, random_mat(lat.len(), &mut rng)).unwrap()
                .tensor_spin(&identity(2)).unwrap();
            let j = extend_j(&a, &ks).unwrap();
            prop_assert!(a.commutator(&j).unwrap().max_abs() < 1e-13);
        }
    }
}
