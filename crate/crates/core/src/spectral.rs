//! Flat Dirac operators, the sign operator, Schatten sums and Dixmier-trace estimates.
//!
//! `Tr_ω` is estimated by fitting `s(N) = (Σ_{k≤N} μ_k)/ln N ≈ c + a/ln N` on a geometric ladder
//! of `N` and reporting the intercept `c`.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::gamma;
use thiserror::Error;

use crate::clifford::{
    build_gammas, krein_self_adjoint_residual, reflection_to_j, CliffordError, CliffordRep,
    KreinStructure, SpacelikeReflection,
};
use crate::fit::{line_fit, FitError, FittedConstant};
use crate::fourier::{forward_transform, FourierError, GridFunction, Lattice, Signature};
use crate::operator::{eigh, hermitian_apply, DiscreteOperator, OperatorError, Storage};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error(
        "Clifford signature ({p},{q}) does not fit a {signature:?} geometry of dimension {dim}"
    )]
    SignatureMismatch {
        p: usize,
        q: usize,
        signature: Signature,
        dim: usize,
    },
    #[error("spectrum is significantly negative (min eigenvalue {0:e})")]
    NegativeSpectrum(f64),
    #[error("function is negative (min {0:e})")]
    NegativeFunction(f64),
    #[error("function has mass {0:e} outside the safe window")]
    MassOutsideWindow(f64),
    #[error("Schatten exponent must be positive, got {0}")]
    InvalidExponent(f64),
    #[error("ladder is invalid: {0}")]
    InvalidLadder(String),
    #[error("operator is not a block-diagonal involution")]
    NotInvolution,
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Clifford(#[from] CliffordError),
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

pub type Result<T> = std::result::Result<T, SpectralError>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn check_signature(rep: &CliffordRep, lattice: &Lattice) -> Result<()> {
    let g = lattice.geometry();
    let ok = rep.dim() == g.dim()
        && match g.signature() {
            Signature::Euclidean => rep.p() == 0,
            Signature::Lorentzian => rep.p() == 1,
        };
    if ok {
        Ok(())
    } else {
        Err(SpectralError::SignatureMismatch {
            p: rep.p(),
            q: rep.q(),
            signature: g.signature(),
            dim: g.dim(),
        })
    }
}

/// Flat Dirac operator as a Fourier multiplier.
///
/// Euclidean: block `2π γᵃkₐ`, self-adjoint. Lorentzian: block `2πi γᵃkₐ`, Krein-self-adjoint
/// for the standard fundamental symmetry.
pub fn build_dirac(rep: &CliffordRep, lattice: &Lattice) -> Result<DiscreteOperator> {
    check_signature(rep, lattice)?;
    let phase = if rep.is_lorentzian() {
        c(0.0, 2.0 * PI)
    } else {
        c(2.0 * PI, 0.0)
    };
    let s = rep.spinor_dim();
    let d = DiscreteOperator::multiplier(lattice.clone(), s, |k| {
        let g = rep.gamma_of(k);
        Mat::from_fn(s, s, |i, j| g[(i, j)] * phase)
    })?;
    if rep.is_lorentzian() {
        let ks = standard_krein(rep)?;
        let res = krein_self_adjoint_residual(&d, &ks)?;
        if res > 1e-10 * d.max_abs().max(1.0) {
            return Err(CliffordError::NotKreinSelfAdjoint(res).into());
        }
    }
    Ok(d)
}

/// Krein structure of the standard spacelike reflection.
pub fn standard_krein(rep: &CliffordRep) -> Result<KreinStructure> {
    Ok(reflection_to_j(
        rep,
        &SpacelikeReflection::standard(rep.p(), rep.q()),
    )?)
}

/// Scalar Laplacian `-Σ∂²`, block `4π²|k|²`.
pub fn build_laplacian(lattice: &Lattice) -> Result<DiscreteOperator> {
    Ok(DiscreteOperator::multiplier(lattice.clone(), 1, |k| {
        let k2: f64 = k.iter().map(|x| x * x).sum();
        Mat::from_fn(1, 1, |_, _| c(4.0 * PI * PI * k2, 0.0))
    })?)
}

/// `sign(D)` with `sign(0) = +1`.
pub fn sign_operator(d: &DiscreteOperator) -> Result<DiscreteOperator> {
    let tol = 1e-12 * d.max_abs().max(1.0);
    Ok(d.apply_function(|x| if x >= -tol { 1.0 } else { -1.0 })?)
}

/// Values of `N` at which partial sums are reported.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Ladder {
    /// `start, ⌈start·ratio⌉, …` up to the cap.
    Geometric {
        start: usize,
        ratio: f64,
    },
    Explicit(Vec<usize>),
}

impl Default for Ladder {
    fn default() -> Self {
        Ladder::Geometric {
            start: 16,
            ratio: 2.0,
        }
    }
}

impl Ladder {
    pub fn points(&self, cap: usize) -> Result<Vec<usize>> {
        match self {
            Ladder::Geometric { start, ratio } => {
                if *start == 0 || !(*ratio > 1.0) {
                    return Err(SpectralError::InvalidLadder(format!(
                        "start {start}, ratio {ratio}"
                    )));
                }
                let mut out = Vec::new();
                let mut n = *start;
                while n <= cap {
                    out.push(n);
                    n = ((n as f64 * ratio).ceil() as usize).max(n + 1);
                }
                Ok(out)
            }
            Ladder::Explicit(v) => {
                if v.is_empty() || v[0] == 0 || v.windows(2).any(|w| w[0] >= w[1]) {
                    return Err(SpectralError::InvalidLadder(format!(
                        "{v:?} is not strictly increasing and positive"
                    )));
                }
                Ok(v.iter().copied().filter(|&n| n <= cap).collect())
            }
        }
    }
}

/// Sorted spectrum with partial sums on a ladder.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    /// Descending.
    pub values: Vec<f64>,
    pub ladder: Vec<usize>,
    pub partial_sums: Vec<f64>,
    pub extrapolated: Option<FittedConstant>,
}

/// `Σ_{k≤N} s_k(A)^q` on the ladder; the full sum is always the last point.
pub fn schatten_partial(a: &DiscreteOperator, q: f64, ladder: &Ladder) -> Result<SpectralSummary> {
    schatten_from_values(a.singular_values()?, q, ladder)
}

pub fn schatten_from_values(
    mut values: Vec<f64>,
    q: f64,
    ladder: &Ladder,
) -> Result<SpectralSummary> {
    if !(q > 0.0) {
        return Err(SpectralError::InvalidExponent(q));
    }
    values.sort_by(|a, b| b.total_cmp(a));
    let mut pts = ladder.points(values.len())?;
    if pts.last() != Some(&values.len()) && !values.is_empty() {
        pts.push(values.len());
    }
    let mut acc = 0.0;
    let mut sums = Vec::with_capacity(values.len());
    for v in &values {
        acc += v.abs().powf(q);
        sums.push(acc);
    }
    Ok(SpectralSummary {
        partial_sums: pts.iter().map(|&n| sums[n - 1]).collect(),
        ladder: pts,
        values,
        extrapolated: None,
    })
}

/// Singular values of `[F, A]` for a block-diagonal involution `F`.
///
/// With `P± = (1 ± F)/2`, `[F, A] = 2(P₊AP₋ − P₋AP₊)`, so the spectrum is read off from two
/// half-size blocks instead of the full commutator.
pub fn sign_commutator_singular_values(
    f: &DiscreteOperator,
    a: &DiscreteOperator,
) -> Result<Vec<f64>> {
    let Storage::BlockDiagonal(blocks) = f.storage() else {
        return Err(SpectralError::NotInvolution);
    };
    if f.lattice().window() != a.lattice().window() || f.spinor_dim() != a.spinor_dim() {
        return Err(OperatorError::SpaceMismatch.into());
    }
    let s = f.spinor_dim();
    let n = f.dim();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    let mut vecs = Vec::with_capacity(n);
    for (k, b) in blocks.iter().enumerate() {
        let (vals, u) = eigh(b)?;
        for (i, &v) in vals.iter().enumerate() {
            if (v.abs() - 1.0).abs() > 1e-10 {
                return Err(SpectralError::NotInvolution);
            }
            if v > 0.0 {
                plus.push(vecs.len());
            } else {
                minus.push(vecs.len());
            }
            vecs.push((k, u.col(i).to_owned()));
        }
    }
    let am = a.to_dense();
    // A in the eigenbasis of F: Ã = V†AV with V block diagonal
    let rot = |rows: &[usize], cols: &[usize]| {
        Mat::from_fn(rows.len(), cols.len(), |i, j| {
            let (ki, ref vi) = vecs[rows[i]];
            let (kj, ref vj) = vecs[cols[j]];
            let mut acc = c(0.0, 0.0);
            for p in 0..s {
                let mut inner = c(0.0, 0.0);
                for q in 0..s {
                    inner += am[(ki * s + p, kj * s + q)] * vj[q];
                }
                acc += vi[p].conj() * inner;
            }
            acc
        })
    };
    let mut out = Vec::with_capacity(n);
    for (r, cl) in [(&minus, &plus), (&plus, &minus)] {
        if r.is_empty() || cl.is_empty() {
            continue;
        }
        let blk = rot(r, cl);
        let sv = blk
            .singular_values()
            .map_err(|e| OperatorError::Solver(format!("{e:?}")))?;
        out.extend(sv.into_iter().map(|x| 2.0 * x));
    }
    out.resize(n, 0.0);
    out.sort_by(|a, b| b.total_cmp(a));
    Ok(out)
}

/// Options for [`dixmier_estimate`].
#[derive(Clone, Debug, PartialEq, Default)]
pub struct DixmierOptions {
    pub ladder: Ladder,
    /// Largest `N` trusted; defaults to the spectrum length.
    pub cap: Option<usize>,
    /// Number of leading eigenvalues removed before summing.
    pub drop: usize,
}

/// Intercept of `s ≈ c + a/ln N`.
///
/// The error combines the regression standard error with the shift of the intercept when only
/// the upper half of the ladder is fitted (when that half has at least three points).
pub fn fit_log_ladder(ladder: &[usize], s: &[f64], context: &str) -> Result<FittedConstant> {
    if ladder.len() < 3 {
        return Err(FitError::TooFewPoints {
            needed: 3,
            found: ladder.len(),
        }
        .into());
    }
    let x: Vec<f64> = ladder.iter().map(|&n| 1.0 / (n as f64).ln()).collect();
    let fit = line_fit(&x, s)?;
    let half = ladder.len() / 2;
    let drift = if ladder.len() - half >= 3 {
        (line_fit(&x[half..], &s[half..])?.intercept - fit.intercept).abs()
    } else {
        0.0
    };
    Ok(FittedConstant::real(
        fit.intercept,
        fit.intercept_err.hypot(drift),
        context,
    ))
}

/// Complex version of [`fit_log_ladder`], fitting real and imaginary parts separately.
pub fn fit_log_ladder_complex(
    ladder: &[usize],
    s: &[Complex64],
    context: &str,
) -> Result<FittedConstant> {
    let re: Vec<f64> = s.iter().map(|z| z.re).collect();
    let im: Vec<f64> = s.iter().map(|z| z.im).collect();
    let fr = fit_log_ladder(ladder, &re, context)?;
    let fi = fit_log_ladder(ladder, &im, context)?;
    Ok(FittedConstant::complex(
        c(fr.re(), fi.re()),
        fr.std_error.hypot(fi.std_error),
        context,
    ))
}

/// `Tr_ω(A)` for positive semidefinite `A`.
pub fn dixmier_estimate(a: &DiscreteOperator, opts: &DixmierOptions) -> Result<SpectralSummary> {
    dixmier_from_values(a.eigenvalues()?, opts)
}

pub fn dixmier_from_values(mut values: Vec<f64>, opts: &DixmierOptions) -> Result<SpectralSummary> {
    values.sort_by(|a, b| b.total_cmp(a));
    let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    if let Some(&min) = values.last() {
        if min < -1e-10 * scale {
            return Err(SpectralError::NegativeSpectrum(min));
        }
    }
    let kept = &values[opts.drop.min(values.len())..];
    let cap = opts.cap.unwrap_or(kept.len()).min(kept.len());
    let ladder: Vec<usize> = opts
        .ladder
        .points(cap)?
        .into_iter()
        .filter(|&n| n >= 2)
        .collect();
    let mut acc = 0.0;
    let mut sums = Vec::with_capacity(cap);
    for v in &kept[..cap] {
        acc += v.max(0.0);
        sums.push(acc);
    }
    let partial: Vec<f64> = ladder
        .iter()
        .map(|&n| sums[n - 1] / (n as f64).ln())
        .collect();
    let fit = fit_log_ladder(&ladder, &partial, "Dixmier ln-ladder intercept")?;
    Ok(SpectralSummary {
        values,
        ladder,
        partial_sums: partial,
        extrapolated: Some(fit),
    })
}

/// Which `T` sits between the multiplication operators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum KernelKind {
    /// `Δ^{-n/2}` with zero modes dropped.
    ScalarLaplacian,
    /// `|𝒟|^{-n}` with zero modes dropped.
    EuclideanDirac,
    /// `Δ_J^{-n}` for the given fundamental symmetry.
    LorentzianDeltaJ,
}

impl KernelKind {
    pub fn is_spinor(self) -> bool {
        !matches!(self, KernelKind::ScalarLaplacian)
    }
}

/// Surface measure `Ωₙ = 2π^{n/2}/Γ(n/2)` of `S^{n-1}`.
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf(n as f64 / 2.0) / gamma(n as f64 / 2.0)
}

/// `n(2π)ⁿ/Ωₙ`, divided by `2^⌊n/2⌋` for spinor kernels.
pub fn nc_coefficient(n: usize, kind: KernelKind) -> f64 {
    let base = n as f64 * (2.0 * PI).powi(n as i32) / sphere_area(n);
    if kind.is_spinor() {
        base / 2f64.powi((n / 2) as i32)
    } else {
        base
    }
}

#[derive(Clone, Debug)]
pub struct NcIntegralOptions {
    pub kind: KernelKind,
    /// Operator window half-widths.
    pub window: Vec<usize>,
    pub ladder: Ladder,
    /// Reflection defining `J`; the standard one when absent.
    pub reflection: Option<SpacelikeReflection>,
}

#[derive(Clone, Debug)]
pub struct NcIntegral {
    /// Estimate of `∫f`.
    pub value: FittedConstant,
    pub coefficient: f64,
    pub summary: SpectralSummary,
    pub operator_dim: usize,
}

/// `T` in a frame where it is Hermitian.
fn kernel_operator(
    lattice: &Lattice,
    kind: KernelKind,
    reflection: Option<&SpacelikeReflection>,
) -> Result<DiscreteOperator> {
    let g = lattice.geometry();
    let n = g.dim() as f64;
    let drop_zero = |p: f64| {
        move |x: f64| {
            if x.abs() > 1e-9 {
                x.abs().powf(-p)
            } else {
                0.0
            }
        }
    };
    match kind {
        KernelKind::ScalarLaplacian => {
            Ok(build_laplacian(lattice)?.apply_function(drop_zero(n / 2.0))?)
        }
        KernelKind::EuclideanDirac => {
            let rep = build_gammas(0, g.dim())?;
            let d = build_dirac(&rep, &lattice_with(lattice, Signature::Euclidean)?)?;
            Ok(d.apply_function(drop_zero(n))?)
        }
        KernelKind::LorentzianDeltaJ => {
            let rep = build_gammas(1, g.dim() - 1)?;
            let d = build_dirac(&rep, &lattice_with(lattice, Signature::Lorentzian)?)?;
            let ks = match reflection {
                Some(r) => reflection_to_j(&rep, r)?,
                None => standard_krein(&rep)?,
            };
            let h = ks.gram();
            let root = hermitian_apply(&h, f64::sqrt)?;
            let root_inv = hermitian_apply(&h, |x| 1.0 / x.sqrt())?;
            let (_, delta) = crate::clifford::j_square_delta(&d, &ks)?;
            let herm = delta.left_spin(&root)?.right_spin(&root_inv)?;
            Ok(herm.apply_function(|x| x.powf(-n))?)
        }
    }
}

fn lattice_with(lattice: &Lattice, sig: Signature) -> Result<Lattice> {
    let g = lattice.geometry().with_signature(sig);
    Ok(Lattice::new(g, lattice.window().half_widths().to_vec())?)
}

/// Number of leading kernel eigenvalues that are complete on the window: those exceeding every
/// value attained on the window boundary.
fn complete_count(t: &DiscreteOperator) -> Result<usize> {
    let window = t.window();
    let half = window.half_widths();
    let Storage::BlockDiagonal(blocks) = t.storage() else {
        return Ok(t.dim());
    };
    let mut boundary_max: f64 = 0.0;
    let mut all = Vec::with_capacity(t.dim());
    for (i, b) in blocks.iter().enumerate() {
        let vals = crate::operator::eigvalsh(b)?;
        let label = window.label(i);
        if label
            .iter()
            .zip(half)
            .any(|(l, &h)| l.unsigned_abs() as usize == h)
        {
            boundary_max = vals.iter().fold(boundary_max, |m, &v| m.max(v));
        }
        all.extend(vals);
    }
    Ok(all.iter().filter(|&&v| v > boundary_max).count())
}

/// Estimate of `∫f` from `Tr_ω(M_f^{1/2} T M_f^{1/2})`.
pub fn nc_integral(f: &GridFunction, opts: &NcIntegralOptions) -> Result<NcIntegral> {
    let g = f.geometry().clone();
    let scale = f.samples().iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let min = f.samples().iter().fold(f64::INFINITY, |m, z| m.min(z.re));
    let imag = f.samples().iter().fold(0.0f64, |m, z| m.max(z.im.abs()));
    if min < -1e-12 * scale.max(1.0) || imag > 1e-12 * scale.max(1.0) {
        return Err(SpectralError::NegativeFunction(min.min(-imag)));
    }
    let mut outside = 0.0;
    for (i, z) in f.samples().iter().enumerate() {
        let x = g.grid_point(i);
        let far = (0..g.noncompact_dims()).any(|a| x[a].abs() > g.box_length() / 4.0);
        if far {
            outside += z.norm() * g.cell_volume();
        }
    }
    if outside > 1e-8 {
        return Err(SpectralError::MassOutsideWindow(outside));
    }

    let lattice = Lattice::new(g.clone(), opts.window.clone())?;
    let t = kernel_operator(&lattice, opts.kind, opts.reflection.as_ref())?;
    let s = t.spinor_dim();
    let root = f.map(|z| c(z.re.max(0.0).sqrt(), 0.0));
    let gh = forward_transform(&root);
    let w = g.mu_weight();
    let gmax = gh.coeffs().iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let zero: Vec<i64> = vec![0; g.dim()];
    let g0 = gh.coeff(&zero);
    let is_constant = gh
        .window()
        .labels()
        .zip(gh.coeffs())
        .all(|(l, z)| l.iter().all(|&x| x == 0) || z.norm() <= 1e-14 * gmax);
    let mut cap = complete_count(&t)?;
    let values = if is_constant {
        let t = t.scale(c((w * g0).norm_sqr(), 0.0));
        t.eigenvalues()?
    } else {
        let window = lattice.window();
        let n = lattice.len();
        let labels: Vec<_> = window.labels().collect();
        let mg = Mat::from_fn(n, n, |r, cl| {
            let diff: Vec<i64> = labels[r]
                .iter()
                .zip(&labels[cl])
                .map(|(a, b)| a - b)
                .collect();
            if gh.window().contains(&diff) {
                gh.coeff(&diff) * w
            } else {
                c(0.0, 0.0)
            }
        });
        let mg =
            DiscreteOperator::dense(lattice.clone(), 1, mg)?.tensor_spin(&Mat::identity(s, s))?;
        let x = mg.mul(&t)?.mul(&mg)?;
        // restore exact Hermiticity lost to rounding
        let xs = x.add(&x.adjoint())?.scale(c(0.5, 0.0));
        cap = cap.min(xs.dim() / 2);
        xs.eigenvalues()?
    };
    let summary = dixmier_from_values(
        values,
        &DixmierOptions {
            ladder: opts.ladder.clone(),
            cap: Some(cap),
            drop: 0,
        },
    )?;
    let coefficient = nc_coefficient(g.dim(), opts.kind);
    let fit = summary.extrapolated.clone().expect("dixmier fit present");
    Ok(NcIntegral {
        value: FittedConstant::real(
            coefficient * fit.re(),
            coefficient * fit.std_error,
            format!("{:?} noncommutative integral", opts.kind),
        ),
        coefficient,
        summary,
        operator_dim: lattice.len() * s,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::j_square_delta;
    use crate::fourier::Geometry;
    use proptest::prelude::*;

    fn torus_lattice(grid: usize, half: usize, sig: Signature) -> Lattice {
        let g = Geometry::torus(2, grid, sig).unwrap();
        Lattice::new(g, vec![half, half]).unwrap()
    }

    #[test]
    fn euclidean_torus_dirac_spectrum() {
        let lat = torus_lattice(32, 12, Signature::Euclidean);
        let rep = build_gammas(0, 2).unwrap();
        let d = build_dirac(&rep, &lat).unwrap();
        assert!(d.hermitian_deviation() < 1e-14);
        let zero = lat.window().index(&[0, 0]).unwrap();
        assert!(crate::operator::max_abs(&d.diag_block(zero)) == 0.0);
        let mut expected: Vec<f64> = lat
            .window()
            .labels()
            .flat_map(|l| {
                let r = 2.0 * PI * ((l[0] * l[0] + l[1] * l[1]) as f64).sqrt();
                [r, -r]
            })
            .collect();
        expected.sort_by(f64::total_cmp);
        let got = d.eigenvalues().unwrap();
        let err = got
            .iter()
            .zip(&expected)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-10, "{err}");
    }

    #[test]
    fn lorentzian_dirac_is_krein_self_adjoint_and_delta_j_matches() {
        let lat = torus_lattice(128, 32, Signature::Lorentzian);
        assert_eq!(lat.len(), 65 * 65);
        let rep = build_gammas(1, 1).unwrap();
        let d = build_dirac(&rep, &lat).unwrap();
        let ks = standard_krein(&rep).unwrap();
        assert!(krein_self_adjoint_residual(&d, &ks).unwrap() < 1e-10);
        let (dj, delta) = j_square_delta(&d, &ks).unwrap();
        for i in 0..lat.len() {
            let k = lat.frequency(i);
            let k2 = k[0] * k[0] + k[1] * k[1];
            let target = (1.0 + 4.0 * PI * PI * k2).sqrt();
            let vals = crate::operator::eigvalsh(&delta.diag_block(i)).unwrap();
            assert!(vals.iter().all(|v| (v - target).abs() < 1e-10));
            let b = dj.diag_block(i);
            assert!((b[(0, 0)].re - 4.0 * PI * PI * k2).abs() < 1e-9);
        }
    }

    #[test]
    fn boosted_delta_j_has_riemannian_symbol() {
        let lat = torus_lattice(64, 20, Signature::Lorentzian);
        let rep = build_gammas(1, 1).unwrap();
        let d = build_dirac(&rep, &lat).unwrap();
        let r = SpacelikeReflection::boosted(1, 1, 0.5).unwrap();
        let ks = reflection_to_j(&rep, &r).unwrap();
        let (dj, _) = j_square_delta(&d, &ks).unwrap();
        let h = ks.gram();
        let root = hermitian_apply(&h, f64::sqrt).unwrap();
        let root_inv = hermitian_apply(&h, |x| 1.0 / x.sqrt()).unwrap();
        for label in [[20i64, 3], [-7, 19], [15, -15]] {
            let i = lat.window().index(&label).unwrap();
            let k = lat.frequency(i);
            let b = &root * dj.diag_block(i) * &root_inv;
            let vals = crate::operator::eigvalsh(&b).unwrap();
            let symbol = 4.0 * PI * PI * r.riemannian_norm_sqr(&k);
            for v in vals {
                assert!((v - symbol).abs() < 1e-8 * symbol, "{v} vs {symbol}");
            }
        }
    }

    #[test]
    fn signature_mismatch_is_rejected() {
        let lat = torus_lattice(16, 4, Signature::Euclidean);
        let rep = build_gammas(1, 1).unwrap();
        assert!(matches!(
            build_dirac(&rep, &lat),
            Err(SpectralError::SignatureMismatch { .. })
        ));
    }

    #[test]
    fn sign_of_diagonal() {
        let g = Geometry::torus(1, 4, Signature::Euclidean).unwrap();
        let lat = Lattice::new(g, vec![1]).unwrap();
        let d = DiscreteOperator::dense(
            lat,
            1,
            Mat::from_fn(3, 3, |i, j| {
                if i == j {
                    c([3.0, 0.0, -2.0][i], 0.0)
                } else {
                    c(0.0, 0.0)
                }
            }),
        )
        .unwrap();
        let f = sign_operator(&d).unwrap();
        let m = f.to_dense();
        for (i, e) in [1.0, 1.0, -1.0].iter().enumerate() {
            assert!((m[(i, i)].re - e).abs() < 1e-14);
        }
    }

    #[test]
    fn sign_of_torus_dirac_is_involution_commuting_with_d() {
        let lat = torus_lattice(16, 6, Signature::Euclidean);
        let d = build_dirac(&build_gammas(0, 2).unwrap(), &lat).unwrap();
        let f = sign_operator(&d).unwrap();
        let id = DiscreteOperator::identity(lat.clone(), 2);
        assert!(f.mul(&f).unwrap().max_abs_diff(&id).unwrap() < 1e-14);
        assert!(f.hermitian_deviation() < 1e-14);
        assert!(f.commutator(&d).unwrap().max_abs() < 1e-12);
        // closed form γ·k/|k| away from zero
        let i = lat.window().index(&[2, -3]).unwrap();
        let k = lat.frequency(i);
        let gk = build_gammas(0, 2).unwrap().gamma_of(&k);
        let nk = (k[0] * k[0] + k[1] * k[1]).sqrt();
        let diff = &f.diag_block(i) - crate::operator::scaled(&gk, c(1.0 / nk, 0.0));
        assert!(crate::operator::max_abs(&diff) < 1e-14);
    }

    #[test]
    fn schatten_rank_one() {
        let s = schatten_from_values(
            vec![0.0, 2.0, 0.0, 0.0],
            3.0,
            &Ladder::Explicit(vec![1, 2, 3]),
        )
        .unwrap();
        assert_eq!(s.ladder, vec![1, 2, 3, 4]);
        assert!(s.partial_sums.iter().all(|&v| (v - 8.0).abs() < 1e-14));
        assert!(schatten_from_values(vec![1.0], 0.0, &Ladder::default()).is_err());
    }

    #[test]
    fn commutator_singular_values_match_direct() {
        use crate::star::{regular_representation, DeformationParams, Side};
        let g = Geometry::with_grid(1, 1, 4.0, vec![32, 16], Signature::Euclidean).unwrap();
        let lat = Lattice::new(g.clone(), vec![5, 3]).unwrap();
        let a = crate::fourier::FourierFunction::from_fn(g, |x| {
            c(
                (-PI * x[0] * x[0]).exp() * (1.0 + 0.5 * (2.0 * PI * x[1]).cos()),
                0.0,
            )
        })
        .unwrap();
        let pa = regular_representation(
            &a,
            &DeformationParams::cylinder(0.3, 1),
            Side::Left,
            &[5, 3],
        )
        .unwrap()
        .tensor_spin(&Mat::identity(2, 2))
        .unwrap();
        let f = sign_operator(&build_dirac(&build_gammas(0, 2).unwrap(), &lat).unwrap()).unwrap();
        let direct = f.commutator(&pa).unwrap().singular_values().unwrap();
        let fast = sign_commutator_singular_values(&f, &pa).unwrap();
        let err = direct
            .iter()
            .zip(&fast)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-12, "{err}");
    }

    #[test]
    fn dixmier_harmonic_and_trace_class() {
        let harmonic: Vec<f64> = (1..=200_000).map(|k| 1.0 / k as f64).collect();
        let s = dixmier_from_values(harmonic, &DixmierOptions::default()).unwrap();
        let fit = s.extrapolated.unwrap();
        assert!((fit.re() - 1.0).abs() < fit.std_error.max(1e-3), "{fit:?}");
        let geom: Vec<f64> = (1..=200).map(|k| 0.5f64.powi(k)).collect();
        let s = dixmier_from_values(geom, &DixmierOptions::default()).unwrap();
        assert!(s.extrapolated.unwrap().re().abs() < 1e-4);
        assert!(matches!(
            dixmier_from_values(vec![1.0, -0.5], &DixmierOptions::default()),
            Err(SpectralError::NegativeSpectrum(_))
        ));
    }

    #[test]
    fn laplacian_dixmier_with_dropped_modes() {
        let lat = torus_lattice(256, 127, Signature::Euclidean);
        let t = build_laplacian(&lat)
            .unwrap()
            .apply_function(|x| if x > 1e-9 { 1.0 / x } else { 0.0 })
            .unwrap();
        let cap = complete_count(&t).unwrap();
        let vals = t.eigenvalues().unwrap();
        let run = |drop| {
            dixmier_from_values(
                vals.clone(),
                &DixmierOptions {
                    cap: Some(cap),
                    drop,
                    ..Default::default()
                },
            )
            .unwrap()
            .extrapolated
            .unwrap()
        };
        let base = run(0);
        let target = 1.0 / (4.0 * PI);
        assert!((base.re() - target).abs() < 0.05 * target, "{}", base.re());
        for drop in [1, 10] {
            let other = run(drop);
            assert!(
                (other.re() - base.re()).abs() < base.std_error.max(other.std_error),
                "drop {drop}: {} vs {} ± {}",
                other.re(),
                base.re(),
                base.std_error
            );
        }
    }

    #[test]
    fn nc_coefficients() {
        assert!((sphere_area(2) - 2.0 * PI).abs() < 1e-12);
        assert!((sphere_area(3) - 4.0 * PI).abs() < 1e-12);
        assert!((nc_coefficient(2, KernelKind::ScalarLaplacian) - 4.0 * PI).abs() < 1e-12);
        assert!((nc_coefficient(2, KernelKind::LorentzianDeltaJ) - 2.0 * PI).abs() < 1e-12);
    }

    #[test]
    fn nc_integral_rejects_bad_input() {
        let g = Geometry::torus(2, 16, Signature::Euclidean).unwrap();
        let f = GridFunction::from_fn(g, |x| c(x[0] - 0.5, 0.0)).unwrap();
        let opts = NcIntegralOptions {
            kind: KernelKind::ScalarLaplacian,
            window: vec![4, 4],
            ladder: Ladder::default(),
            reflection: None,
        };
        assert!(matches!(
            nc_integral(&f, &opts),
            Err(SpectralError::NegativeFunction(_))
        ));
        let cyl = Geometry::with_grid(1, 1, 4.0, vec![64, 8], Signature::Euclidean).unwrap();
        let wide = GridFunction::from_fn(cyl, |x| c((-x[0] * x[0]).exp(), 0.0)).unwrap();
        let opts = NcIntegralOptions {
            window: vec![8, 2],
            ..opts
        };
        assert!(matches!(
            nc_integral(&wide, &opts),
            Err(SpectralError::MassOutsideWindow(_))
        ));
    }

    #[test]
    fn nc_integral_constant_on_lorentzian_torus() {
        let g = Geometry::torus(2, 256, Signature::Lorentzian).unwrap();
        let f = GridFunction::constant(g, c(1.0, 0.0));
        let r = nc_integral(
            &f,
            &NcIntegralOptions {
                kind: KernelKind::LorentzianDeltaJ,
                window: vec![100, 100],
                ladder: Ladder::default(),
                reflection: None,
            },
        )
        .unwrap();
        assert!((r.value.re() - 1.0).abs() < 0.1, "{:?}", r.value);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn dixmier_is_scale_covariant(alpha in 0.01f64..100.0) {
            let vals: Vec<f64> = (1..=5000).map(|k| 1.0 / k as f64 + 1.0 / (k * k) as f64).collect();
            let base = dixmier_from_values(vals.clone(), &DixmierOptions::default()).unwrap();
            let scaled = dixmier_from_values(
                vals.iter().map(|v| v * alpha).collect(),
                &DixmierOptions::default(),
            ).unwrap();
            let (b, s) = (base.extrapolated.unwrap().re(), scaled.extrapolated.unwrap().re());
            prop_assert!((s - alpha * b).abs() < 1e-10 * alpha.max(1.0));
        }
    }
}
