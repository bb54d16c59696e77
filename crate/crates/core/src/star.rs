//! Twisted convolution products on `𝒮(ℝⁿ × ℤᵈ)`.
//!
//! `(φ⋆ψ)(k) = ∫dμ(l) φ(l) ψ(k-l) σ_ℏ(l,k)` with `σ_ℏ(l,k) = exp(2πiℏ θ(l,k))`. The sum runs over
//! the lattice pairs with both `l` and `k-l` inside the stored window, so nothing wraps around.
//! Bilinearity of `θ` lets the phase factor per axis: for a fixed output mode `k`,
//! `σ(l,k) = Π_a exp(2πiℏ l_a c_a(k))` with `c_a(k) = Σ_b θ_ab k_b`.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::fit::{line_fit, FitError};
use crate::fourier::{
    fft_axis, FourierError, FourierFunction, Geometry, Lattice, ModeLabel, NormKind, Normed,
};
use crate::operator::{DiscreteOperator, OperatorError};

pub use crate::fit::FittedConstant;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StarError {
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Fit(#[from] FitError),
    #[error("theta is not skew-symmetric at ({i}, {j})")]
    NotSkew { i: usize, j: usize },
    #[error("theta has {found} entries, expected {expected}")]
    ThetaShape { expected: usize, found: usize },
    #[error("deformation split ({n}, {d}) does not match the geometry ({gn}, {gd})")]
    SplitMismatch {
        n: usize,
        d: usize,
        gn: usize,
        gd: usize,
    },
    #[error("hbar must be nonzero")]
    ZeroHbar,
    #[error("{kind} product needs {requirement}")]
    WrongGeometry {
        kind: &'static str,
        requirement: &'static str,
    },
    #[error("basis cutoff {requested} exceeds the geometry cutoff {available} on axis {axis}")]
    CutoffTooLarge {
        axis: usize,
        requested: usize,
        available: usize,
    },
}

pub type Result<T> = std::result::Result<T, StarError>;

/// Deformation scale `ℏ` and skew form `θ` on `ℝⁿ × ℤᵈ`.
#[derive(Clone, Debug, PartialEq)]
pub struct DeformationParams {
    hbar: f64,
    theta: Vec<f64>,
    n: usize,
    d: usize,
}

impl DeformationParams {
    /// `theta` is row-major `(n+d)×(n+d)` and must be exactly skew.
    pub fn new(hbar: f64, theta: Vec<f64>, n: usize, d: usize) -> Result<Self> {
        let m = n + d;
        if theta.len() != m * m {
            return Err(StarError::ThetaShape {
                expected: m * m,
                found: theta.len(),
            });
        }
        for i in 0..m {
            for j in 0..=i {
                if theta[i * m + j] != -theta[j * m + i] {
                    return Err(StarError::NotSkew { i, j });
                }
            }
        }
        Ok(Self { hbar, theta, n, d })
    }

    /// `θ = 0`: the commutative product.
    pub fn commutative(n: usize, d: usize) -> Self {
        Self {
            hbar: 0.0,
            theta: vec![0.0; (n + d) * (n + d)],
            n,
            d,
        }
    }

    /// The form `θ((x,n),(y,m)) = (y·n - m·x)/2π` on `ℝᵈ × ℤᵈ`.
    pub fn cylinder(hbar: f64, d: usize) -> Self {
        let m = 2 * d;
        let mut theta = vec![0.0; m * m];
        let c = 1.0 / (2.0 * PI);
        for a in 0..d {
            theta[(d + a) * m + a] = c;
            theta[a * m + d + a] = -c;
        }
        Self {
            hbar,
            theta,
            n: d,
            d,
        }
    }

    /// Form on `ℝ²ˢ = (p, q)` whose bicharacter is the Moyal phase `exp(-iℏ(q'·p - p'·q))`.
    pub fn moyal(hbar: f64, pairs: usize) -> Self {
        let m = 2 * pairs;
        let mut theta = vec![0.0; m * m];
        let c = 1.0 / (2.0 * PI);
        for a in 0..pairs {
            theta[a * m + pairs + a] = c;
            theta[(pairs + a) * m + a] = -c;
        }
        Self {
            hbar,
            theta,
            n: m,
            d: 0,
        }
    }

    /// Single-entry form on `ℤ²` (or any `d`): `θ_01 = t = -θ_10`.
    pub fn torus2(hbar: f64, t: f64) -> Self {
        Self {
            hbar,
            theta: vec![0.0, t, -t, 0.0],
            n: 0,
            d: 2,
        }
    }

    pub fn with_hbar(&self, hbar: f64) -> Self {
        Self {
            hbar,
            ..self.clone()
        }
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn dim(&self) -> usize {
        self.n + self.d
    }

    pub fn split(&self) -> (usize, usize) {
        (self.n, self.d)
    }

    pub fn theta_entry(&self, i: usize, j: usize) -> f64 {
        self.theta[i * self.dim() + j]
    }

    pub fn is_flat(&self) -> bool {
        self.hbar == 0.0 || self.theta.iter().all(|&t| t == 0.0)
    }

    /// `θ(l, k) = Σ θ_ij l_i k_j` on physical frequencies.
    pub fn theta_form(&self, l: &[f64], k: &[f64]) -> f64 {
        let m = self.dim();
        let mut acc = 0.0;
        for i in 0..m {
            for j in 0..m {
                acc += self.theta[i * m + j] * l[i] * k[j];
            }
        }
        acc
    }

    /// `c_a(k) = Σ_b θ_ab k_b`, so that `θ(l,k) = Σ_a l_a c_a(k)`.
    fn contract_right(&self, k: &[f64]) -> Vec<f64> {
        let m = self.dim();
        (0..m)
            .map(|a| (0..m).map(|b| self.theta[a * m + b] * k[b]).sum())
            .collect()
    }

    fn check_geometry(&self, g: &Geometry) -> Result<()> {
        if (g.noncompact_dims(), g.compact_dims()) != (self.n, self.d) {
            return Err(StarError::SplitMismatch {
                n: self.n,
                d: self.d,
                gn: g.noncompact_dims(),
                gd: g.compact_dims(),
            });
        }
        Ok(())
    }
}

/// `σ_ℏ(l, k) = exp(2πiℏθ(l,k))` on physical frequencies.
pub fn bicharacter(params: &DeformationParams, l: &[f64], k: &[f64]) -> Complex64 {
    Complex64::from_polar(1.0, 2.0 * PI * params.hbar * params.theta_form(l, k))
}

/// Per-axis kernel tables for one output mode, indexed by `l_a + K_a`.
enum Kernel {
    Phase(Vec<Vec<Complex64>>),
    Linear(Vec<Vec<f64>>),
}

fn axis_frequencies(g: &Geometry, axis: usize) -> Vec<f64> {
    let k = g.cutoff(axis) as i64;
    (-k..=k).map(|j| g.frequency(axis, j)).collect()
}

/// `Σ_l φ(l) ψ(k-l) kernel(l, k)` over pairs inside the window, times the μ weight.
fn lattice_sum(
    phi: &FourierFunction,
    psi: &FourierFunction,
    kernel_for: impl Fn(&[f64]) -> Kernel + Sync,
) -> Vec<Complex64> {
    let g = phi.geometry();
    let window = g.modes();
    let lattice = Lattice::full(g.clone());
    let m = g.dim();
    let half: Vec<i64> = window.half_widths().iter().map(|&h| h as i64).collect();
    let w = g.mu_weight();
    (0..window.len())
        .into_par_iter()
        .map(|kidx| {
            let k = window.label(kidx);
            let kernel = kernel_for(&lattice.frequency(kidx));
            // l ranges over the box where both l and k-l fit
            let lo: Vec<i64> = (0..m).map(|a| (-half[a]).max(k[a] - half[a])).collect();
            let hi: Vec<i64> = (0..m).map(|a| half[a].min(k[a] + half[a])).collect();
            if (0..m).any(|a| lo[a] > hi[a]) {
                return Complex64::new(0.0, 0.0);
            }
            let mut l: ModeLabel = lo.iter().copied().collect();
            let mut kl: ModeLabel = (0..m).map(|a| k[a] - l[a]).collect();
            let mut acc = Complex64::new(0.0, 0.0);
            loop {
                let a = phi.coeffs()[window.index(&l).unwrap()];
                if a.norm_sqr() != 0.0 {
                    let b = psi.coeffs()[window.index(&kl).unwrap()];
                    let kv = match &kernel {
                        Kernel::Phase(t) => (0..m)
                            .map(|ax| t[ax][(l[ax] + half[ax]) as usize])
                            .product::<Complex64>(),
                        Kernel::Linear(t) => Complex64::new(
                            (0..m).map(|ax| t[ax][(l[ax] + half[ax]) as usize]).sum(),
                            0.0,
                        ),
                    };
                    acc += a * b * kv;
                }
                // odometer, last axis fastest
                let mut ax = m;
                loop {
                    if ax == 0 {
                        return acc * w;
                    }
                    ax -= 1;
                    if l[ax] < hi[ax] {
                        l[ax] += 1;
                        kl[ax] -= 1;
                        break;
                    }
                    l[ax] = lo[ax];
                    kl[ax] = k[ax] - lo[ax];
                }
            }
        })
        .collect()
}

fn phase_kernel(params: &DeformationParams, g: &Geometry) -> impl Fn(&[f64]) -> Kernel + Sync {
    let freqs: Vec<Vec<f64>> = (0..g.dim()).map(|a| axis_frequencies(g, a)).collect();
    let params = params.clone();
    move |k: &[f64]| {
        let c = params.contract_right(k);
        Kernel::Phase(
            freqs
                .iter()
                .zip(&c)
                .map(|(fs, &ca)| {
                    fs.iter()
                        .map(|&la| Complex64::from_polar(1.0, 2.0 * PI * params.hbar * la * ca))
                        .collect()
                })
                .collect(),
        )
    }
}

/// Plain μ-convolution by zero-padded FFT; exact linear convolution on the window.
pub fn mu_convolution(phi: &FourierFunction, psi: &FourierFunction) -> Result<FourierFunction> {
    let g = phi.geometry();
    g.check_same(psi.geometry())?;
    let window = g.modes();
    let half = window.half_widths().to_vec();
    let shape: Vec<usize> = half.iter().map(|&h| 2 * (2 * h + 1)).collect();
    let total: usize = shape.iter().product();
    let place = |f: &FourierFunction| {
        let mut buf = vec![Complex64::new(0.0, 0.0); total];
        for (i, label) in window.labels().enumerate() {
            let mut idx = 0;
            for a in 0..label.len() {
                idx = idx * shape[a] + (label[a] + half[a] as i64) as usize;
            }
            buf[idx] = f.coeffs()[i];
        }
        buf
    };
    let mut a = place(phi);
    let mut b = place(psi);
    let mut planner = FftPlanner::new();
    for (axis, &n) in shape.iter().enumerate() {
        let fwd = planner.plan_fft_forward(n);
        fft_axis(&mut a, &shape, axis, fwd.as_ref());
        fft_axis(&mut b, &shape, axis, fwd.as_ref());
    }
    for (x, y) in a.iter_mut().zip(&b) {
        *x *= y;
    }
    for (axis, &n) in shape.iter().enumerate() {
        let inv = planner.plan_fft_inverse(n);
        fft_axis(&mut a, &shape, axis, inv.as_ref());
    }
    let scale = g.mu_weight() / total as f64;
    let coeffs = window
        .labels()
        .map(|label| {
            let mut idx = 0;
            for ax in 0..label.len() {
                // offsets of both inputs add, so the sum sits at k + 2·half
                idx = idx * shape[ax] + (label[ax] + 2 * half[ax] as i64) as usize;
            }
            a[idx] * scale
        })
        .collect();
    Ok(FourierFunction::new(g.clone(), coeffs)?)
}

/// The cylinder star product `φ ⋆_ℏ ψ`.
pub fn star_cylinder(
    phi: &FourierFunction,
    psi: &FourierFunction,
    params: &DeformationParams,
) -> Result<FourierFunction> {
    let g = phi.geometry();
    g.check_same(psi.geometry())?;
    params.check_geometry(g)?;
    if params.is_flat() {
        return mu_convolution(phi, psi);
    }
    let coeffs = lattice_sum(phi, psi, phase_kernel(params, g));
    Ok(FourierFunction::new(g.clone(), coeffs)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceKind {
    Moyal,
    Torus,
}

/// The Moyal product on `ℝ²ˢ` or the noncommutative-torus product on `ℤᵈ`, each with its own
/// phase formula.
pub fn star_reference(
    kind: ReferenceKind,
    phi: &FourierFunction,
    psi: &FourierFunction,
    params: &DeformationParams,
) -> Result<FourierFunction> {
    let g = phi.geometry();
    g.check_same(psi.geometry())?;
    let hbar = params.hbar;
    let coeffs = match kind {
        ReferenceKind::Moyal => {
            let n = g.noncompact_dims();
            if g.compact_dims() != 0 || !n.is_multiple_of(2) || n == 0 {
                return Err(StarError::WrongGeometry {
                    kind: "moyal",
                    requirement: "d = 0 and an even number of real directions",
                });
            }
            let s = n / 2;
            let freqs: Vec<Vec<f64>> = (0..n).map(|a| axis_frequencies(g, a)).collect();
            // exp(-iℏ(q'·p - p'·q)) = Π_a exp(-iℏ q'_a p_a) exp(iℏ p'_a q_a)
            lattice_sum(phi, psi, move |k: &[f64]| {
                Kernel::Phase(
                    (0..n)
                        .map(|a| {
                            freqs[a]
                                .iter()
                                .map(|&la| {
                                    let arg = if a < s {
                                        hbar * la * k[s + a]
                                    } else {
                                        -hbar * la * k[a - s]
                                    };
                                    Complex64::from_polar(1.0, arg)
                                })
                                .collect()
                        })
                        .collect(),
                )
            })
        }
        ReferenceKind::Torus => {
            if g.noncompact_dims() != 0 {
                return Err(StarError::WrongGeometry {
                    kind: "torus",
                    requirement: "n = 0",
                });
            }
            params.check_geometry(g)?;
            let d = g.compact_dims();
            let cut: Vec<i64> = g.cutoffs().iter().map(|&c| c as i64).collect();
            let p = params.clone();
            lattice_sum(phi, psi, move |k: &[f64]| {
                // phase exp(2πiℏθ(m, n)) with m the summation label
                let c = p.contract_right(k);
                Kernel::Phase(
                    (0..d)
                        .map(|a| {
                            (-cut[a]..=cut[a])
                                .map(|ma| {
                                    Complex64::from_polar(1.0, 2.0 * PI * hbar * ma as f64 * c[a])
                                })
                                .collect()
                        })
                        .collect(),
                )
            })
        }
    };
    Ok(FourierFunction::new(g.clone(), coeffs)?)
}

/// `φ*(k) = conj(φ(-k))`.
pub fn involution(phi: &FourierFunction) -> FourierFunction {
    let window = phi.window();
    let coeffs: Vec<Complex64> = window
        .labels()
        .map(|l| {
            let neg: ModeLabel = l.iter().map(|&j| -j).collect();
            phi.coeff(&neg).conj()
        })
        .collect();
    FourierFunction::new(phi.geometry().clone(), coeffs).expect("same window")
}

/// `{φ,ψ}(k) = 4π ∫dμ(l) φ(l) ψ(k-l) θ(l,k)`.
pub fn poisson_bracket(
    phi: &FourierFunction,
    psi: &FourierFunction,
    params: &DeformationParams,
) -> Result<FourierFunction> {
    let g = phi.geometry();
    g.check_same(psi.geometry())?;
    params.check_geometry(g)?;
    let freqs: Vec<Vec<f64>> = (0..g.dim()).map(|a| axis_frequencies(g, a)).collect();
    let p = params.clone();
    let coeffs = lattice_sum(phi, psi, move |k: &[f64]| {
        let c = p.contract_right(k);
        Kernel::Linear(
            freqs
                .iter()
                .zip(&c)
                .map(|(fs, &ca)| fs.iter().map(|&la| 4.0 * PI * la * ca).collect())
                .collect(),
        )
    });
    Ok(FourierFunction::new(g.clone(), coeffs)?)
}

/// Residual of Dirac's condition and the quantities entering its bound.
#[derive(Clone, Debug)]
pub struct DiracResidual {
    /// `Δ_ℏ = (φ⋆ψ - ψ⋆φ)/(iℏ) - {φ,ψ}`.
    pub residual: FourierFunction,
    pub l1: f64,
    /// `L1(Δ_ℏ) / (ℏ·L1(φ̃ ⊛ ψ̃))` with `φ̃(k) = |k|²|φ(k)|`.
    pub bound_ratio: f64,
}

pub fn dirac_residual(
    phi: &FourierFunction,
    psi: &FourierFunction,
    params: &DeformationParams,
) -> Result<DiracResidual> {
    let hbar = params.hbar;
    if hbar == 0.0 {
        return Err(StarError::ZeroHbar);
    }
    let ab = star_cylinder(phi, psi, params)?;
    let ba = star_cylinder(psi, phi, params)?;
    let pb = poisson_bracket(phi, psi, params)?;
    let inv = Complex64::new(0.0, -1.0 / hbar);
    let residual = ab.sub(&ba)?.scale(inv).sub(&pb)?;
    let l1 = residual.norm(NormKind::L1);
    let lattice = Lattice::full(phi.geometry().clone());
    let tilde = |f: &FourierFunction| {
        let c = f
            .coeffs()
            .iter()
            .enumerate()
            .map(|(i, z)| {
                let k2: f64 = lattice.frequency(i).iter().map(|x| x * x).sum();
                Complex64::new(k2 * z.norm(), 0.0)
            })
            .collect();
        FourierFunction::new(f.geometry().clone(), c).expect("same window")
    };
    let conv = mu_convolution(&tilde(phi), &tilde(psi))?;
    let denom = hbar.abs() * conv.norm(NormKind::L1);
    let bound_ratio = if denom > 0.0 { l1 / denom } else { 0.0 };
    Ok(DiracResidual {
        residual,
        l1,
        bound_ratio,
    })
}

/// Log-log slope of `L1(Δ_ℏ)` against `ℏ` with its standard error.
pub fn dirac_slope(
    phi: &FourierFunction,
    psi: &FourierFunction,
    params: &DeformationParams,
    hbars: &[f64],
) -> Result<(FittedConstant, Vec<DiracResidual>)> {
    let runs: Vec<DiracResidual> = hbars
        .iter()
        .map(|&h| dirac_residual(phi, psi, &params.with_hbar(h)))
        .collect::<Result<_>>()?;
    let lx: Vec<f64> = hbars.iter().map(|h| h.abs().ln()).collect();
    let ly: Vec<f64> = runs.iter().map(|r| r.l1.ln()).collect();
    let fit = line_fit(&lx, &ly)?;
    Ok((
        FittedConstant::real(fit.slope, fit.slope_err, "log-log slope of L1(Δ_ℏ) in ℏ"),
        runs,
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Matrix of `Ψ ↦ φ⋆Ψ` (left) or `Ψ ↦ Ψ⋆φ` (right) on the basis window `basis_cutoff`.
pub fn regular_representation(
    phi: &FourierFunction,
    params: &DeformationParams,
    side: Side,
    basis_cutoff: &[usize],
) -> Result<DiscreteOperator> {
    let g = phi.geometry();
    params.check_geometry(g)?;
    for (axis, (&r, a)) in basis_cutoff.iter().zip(g.cutoffs()).enumerate() {
        if r > a {
            return Err(StarError::CutoffTooLarge {
                axis,
                requested: r,
                available: a,
            });
        }
    }
    let lattice = Lattice::new(g.clone(), basis_cutoff.to_vec())?;
    let window = lattice.window().clone();
    let w = g.mu_weight();
    let n = lattice.len();
    let labels: Vec<ModeLabel> = window.labels().collect();
    let freqs: Vec<_> = (0..n).map(|i| lattice.frequency(i)).collect();
    let flat = params.is_flat();
    let m = Mat::from_fn(n, n, |r, c| {
        let diff: ModeLabel = labels[r]
            .iter()
            .zip(&labels[c])
            .map(|(a, b)| a - b)
            .collect();
        let v = phi.coeff(&diff);
        if v.norm_sqr() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let phase = if flat {
            Complex64::new(1.0, 0.0)
        } else {
            match side {
                Side::Left => {
                    let d = lattice.label_frequency(&diff);
                    bicharacter(params, &d, &freqs[r])
                }
                Side::Right => bicharacter(params, &freqs[c], &freqs[r]),
            }
        };
        v * phase * w
    });
    Ok(DiscreteOperator::dense(lattice, 1, m)?)
}
