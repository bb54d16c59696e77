//! Conditional traces, the Chern character `τ_F`, Hochschild cocycles `ψ_D`, `ψ_{Δ_J}`, de Rham
//! pairings, cocycle identities and admissibility of fundamental symmetries.
//!
//! Operators are built on an outer window and traced on an inner one (half the size); test
//! functions are band-limited to a quarter of the outer window.

use std::f64::consts::PI;

use faer::Mat;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clifford::{grading_chi, reflection_residuals, CliffordError, CliffordRep};
use crate::fit::{complex_lstsq, FitError, FittedConstant};
use crate::fourier::{
    inverse_transform, FourierError, FourierFunction, Geometry, GridFunction, Lattice, ModeLabel,
    ModeWindow, Signature,
};
use crate::modeop::{ModeOp, SpinBlock};
use crate::operator::{eigh, DiscreteOperator, OperatorError};
use crate::spectral::{fit_log_ladder_complex, Ladder, SpectralError};
use crate::star::{bicharacter, DeformationParams, Side};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CocycleError {
    #[error("expected {expected} arguments, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("truncation: {0}")]
    Truncation(String),
    #[error("geometry: {0}")]
    Geometry(String),
    #[error("candidate is not an involution: max |J² - 1| = {0:e}")]
    NotInvolution(f64),
    #[error(transparent)]
    Operator(#[from] OperatorError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error(transparent)]
    Clifford(#[from] CliffordError),
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error(transparent)]
    Fit(#[from] FitError),
}

pub type Result<T> = std::result::Result<T, CocycleError>;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Finite Fourier series, with coefficients in the convention of [`FourierFunction`].
#[derive(Clone, Debug, PartialEq)]
pub struct TrigPoly {
    dim: usize,
    terms: Vec<(ModeLabel, Complex64)>,
}

impl TrigPoly {
    pub fn new(dim: usize, mut terms: Vec<(ModeLabel, Complex64)>) -> Self {
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out: Vec<(ModeLabel, Complex64)> = Vec::with_capacity(terms.len());
        for (l, v) in terms {
            assert_eq!(l.len(), dim, "label dimension");
            match out.last_mut() {
                Some((ll, lv)) if *ll == l => *lv += v,
                _ => out.push((l, v)),
            }
        }
        out.retain(|(_, v)| v.norm() != 0.0);
        Self { dim, terms: out }
    }

    pub fn monomial(label: &[i64], value: Complex64) -> Self {
        Self::new(label.len(), vec![(label.iter().copied().collect(), value)])
    }

    /// The constant function `value`.
    pub fn constant(geometry: &Geometry, value: Complex64) -> Self {
        let zero = vec![0i64; geometry.dim()];
        Self::monomial(&zero, value / geometry.mu_weight())
    }

    /// Nonzero coefficients of `phi` above `tol`.
    pub fn from_fourier(phi: &FourierFunction, tol: f64) -> Self {
        let terms = phi
            .window()
            .labels()
            .zip(phi.coeffs())
            .filter(|(_, v)| v.norm() > tol)
            .map(|(l, &v)| (l, v))
            .collect();
        Self::new(phi.geometry().dim(), terms)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn terms(&self) -> &[(ModeLabel, Complex64)] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(l, _)| l.iter().all(|&x| x == 0))
    }

    /// Largest `|label_a|` per axis.
    pub fn support_extent(&self) -> Vec<usize> {
        let mut ext = vec![0usize; self.dim];
        for (l, _) in &self.terms {
            for (e, &x) in ext.iter_mut().zip(l) {
                *e = (*e).max(x.unsigned_abs() as usize);
            }
        }
        ext
    }

    fn convolve(&self, other: &Self, w: f64, phase: impl Fn(&[i64], &[i64]) -> Complex64) -> Self {
        let mut terms = Vec::with_capacity(self.terms.len() * other.terms.len());
        for (l, a) in &self.terms {
            for (m, b) in &other.terms {
                let k: ModeLabel = l.iter().zip(m).map(|(x, y)| x + y).collect();
                let p = phase(l, &k);
                terms.push((k, a * b * w * p));
            }
        }
        Self::new(self.dim, terms)
    }

    /// Pointwise product.
    pub fn mul(&self, other: &Self, geometry: &Geometry) -> Self {
        self.convolve(other, geometry.mu_weight(), |_, _| c(1.0, 0.0))
    }

    /// Twisted product `φ ⋆ ψ`.
    pub fn star(&self, other: &Self, geometry: &Geometry, params: &DeformationParams) -> Self {
        let freq = |l: &[i64]| -> Vec<f64> {
            l.iter()
                .enumerate()
                .map(|(a, &j)| geometry.frequency(a, j))
                .collect()
        };
        self.convolve(other, geometry.mu_weight(), |l, k| {
            bicharacter(params, &freq(l), &freq(k))
        })
    }

    /// Complex conjugate function.
    pub fn conj(&self) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(l, v)| (l.iter().map(|x| -x).collect(), v.conj()))
            .collect();
        Self::new(self.dim, terms)
    }

    pub fn to_fourier(&self, geometry: &Geometry) -> Result<FourierFunction> {
        let window = geometry.modes();
        let mut phi = FourierFunction::zeros(geometry.clone());
        for (l, v) in &self.terms {
            let idx = window.index(l).ok_or_else(|| {
                CocycleError::Truncation(format!("mode {l:?} outside the geometry window"))
            })?;
            phi.coeffs_mut()[idx] = *v;
        }
        Ok(phi)
    }

    pub fn to_grid(&self, geometry: &Geometry) -> Result<GridFunction> {
        Ok(inverse_transform(&self.to_fourier(geometry)?))
    }

    /// Multiplication (or left regular representation) on mode space.
    pub fn mode_op(&self, geometry: &Geometry, params: Option<&DeformationParams>) -> ModeOp {
        let w = geometry.mu_weight();
        ModeOp::Shift {
            terms: self.terms.iter().map(|(l, v)| (l.clone(), v * w)).collect(),
            twist: params
                .filter(|p| !p.is_flat())
                .map(|p| (p.clone(), Side::Left)),
        }
    }
}

/// Outer window for operators and inner window for traces.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truncation {
    pub outer: Vec<usize>,
    pub inner: Vec<usize>,
}

impl Truncation {
    /// Inner window half the outer one.
    pub fn double(outer: Vec<usize>) -> Self {
        let inner = outer.iter().map(|&n| n / 2).collect();
        Self { outer, inner }
    }
}

#[derive(Clone, Debug)]
pub struct CocycleInput {
    geometry: Geometry,
    entries: Vec<TrigPoly>,
    params: Option<DeformationParams>,
    truncation: Truncation,
    lattice: Lattice,
}

impl CocycleInput {
    pub fn new(
        geometry: Geometry,
        entries: Vec<TrigPoly>,
        params: Option<DeformationParams>,
        truncation: Truncation,
    ) -> Result<Self> {
        let m = geometry.dim();
        if entries.is_empty() {
            return Err(CocycleError::Arity {
                expected: 1,
                found: 0,
            });
        }
        if truncation.outer.len() != m || truncation.inner.len() != m {
            return Err(CocycleError::Truncation(format!(
                "windows must have {m} axes"
            )));
        }
        if truncation
            .inner
            .iter()
            .zip(&truncation.outer)
            .any(|(i, o)| i > o)
        {
            return Err(CocycleError::Truncation(
                "inner window exceeds the outer window".into(),
            ));
        }
        for (i, e) in entries.iter().enumerate() {
            if e.dim() != m {
                return Err(CocycleError::Geometry(format!(
                    "entry {i} has dimension {}, geometry {m}",
                    e.dim()
                )));
            }
            for (a, (&ext, &o)) in e.support_extent().iter().zip(&truncation.outer).enumerate() {
                if 4 * ext > o {
                    return Err(CocycleError::Truncation(format!(
                        "entry {i} has modes up to {ext} on axis {a}, above a quarter of the outer window {o}"
                    )));
                }
            }
        }
        let lattice = Lattice::new(geometry.clone(), truncation.outer.clone())?;
        Ok(Self {
            geometry,
            entries,
            params,
            truncation,
            lattice,
        })
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn entries(&self) -> &[TrigPoly] {
        &self.entries
    }

    pub fn truncation(&self) -> &Truncation {
        &self.truncation
    }

    pub fn params(&self) -> Option<&DeformationParams> {
        self.params.as_ref()
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn inner_window(&self) -> ModeWindow {
        ModeWindow::new(self.truncation.inner.clone())
    }

    /// Same geometry, truncation and deformation with new entries.
    pub fn with_entries(&self, entries: Vec<TrigPoly>) -> Result<Self> {
        Self::new(
            self.geometry.clone(),
            entries,
            self.params.clone(),
            self.truncation.clone(),
        )
    }

    fn pi(&self, i: usize) -> ModeOp {
        self.entries[i].mode_op(&self.geometry, self.params.as_ref())
    }

    fn arity(&self) -> usize {
        self.entries.len() - 1
    }
}

fn gamma_blocks(rep: &CliffordRep) -> Vec<SpinBlock> {
    rep.gammas().iter().map(SpinBlock::from_mat).collect()
}

/// `scale · Σ_a v_a γ^a`.
fn gamma_dot(blocks: &[SpinBlock], v: &[f64], scale: Complex64) -> SpinBlock {
    let mut out = SpinBlock::zero(blocks[0].dim());
    for (g, &va) in blocks.iter().zip(v) {
        if va != 0.0 {
            out.add_assign(&g.scale(scale * va));
        }
    }
    out
}

fn check_rep(rep: &CliffordRep, g: &Geometry) -> Result<()> {
    let ok = rep.dim() == g.dim()
        && match g.signature() {
            Signature::Euclidean => rep.p() == 0,
            Signature::Lorentzian => rep.p() == 1,
        };
    if ok {
        Ok(())
    } else {
        Err(CocycleError::Geometry(format!(
            "Clifford signature ({},{}) does not fit a {:?} geometry of dimension {}",
            rep.p(),
            rep.q(),
            g.signature(),
            g.dim()
        )))
    }
}

/// `F = sign(𝒟)` of the Euclidean Dirac operator, as the multiplier `γ·k/|k|` (`1` at `k = 0`).
pub fn sign_symbol(rep: &CliffordRep) -> ModeOp {
    let g = gamma_blocks(rep);
    let s = rep.spinor_dim();
    ModeOp::multiplier(move |k| {
        let n = k.iter().map(|x| x * x).sum::<f64>().sqrt();
        if n == 0.0 {
            SpinBlock::identity(s)
        } else {
            gamma_dot(&g, k, c(1.0 / n, 0.0))
        }
    })
}

/// `½ Tr(A + FAF)` on `inner`.
pub fn conditional_trace(
    a: &DiscreteOperator,
    f: &DiscreteOperator,
    inner: &ModeWindow,
) -> Result<Complex64> {
    let faf = f.mul(a)?.mul(f)?;
    Ok((a.trace_on(inner) + faf.trace_on(inner)) * 0.5)
}

/// [`conditional_trace`] for a lazy `X` and a block-diagonal `F`.
pub fn conditional_trace_lazy(
    x: &ModeOp,
    f: &ModeOp,
    lattice: &Lattice,
    s: usize,
    inner: &ModeWindow,
) -> Complex64 {
    x.map_diagonal(lattice, s, inner, |k, b| {
        let fk = f.diag_block(lattice, s, k);
        (b.trace() + fk.mul(b).mul(&fk).trace()) * 0.5
    })
    .into_iter()
    .sum()
}

/// `τ_F(a₀,…,a_m) = Tr_C(χ a₀ i^m [F,a₁]⋯[F,a_m])`, `χ` present when `m` is even.
pub fn chern_character(input: &CocycleInput, rep: &CliffordRep) -> Result<Complex64> {
    let g = input.geometry();
    check_rep(rep, g)?;
    if g.signature() != Signature::Euclidean {
        return Err(CocycleError::Geometry(
            "the Chern character uses the Euclidean sign operator".into(),
        ));
    }
    let m = input.arity();
    if m != g.dim() {
        return Err(CocycleError::Arity {
            expected: g.dim() + 1,
            found: m + 1,
        });
    }
    let f = sign_symbol(rep);
    let mut factors = Vec::with_capacity(m + 2);
    if m.is_multiple_of(2) {
        factors.push(ModeOp::spin(&grading_chi(rep)?));
    }
    factors.push(input.pi(0).scaled(c(0.0, 1.0).powu(m as u32)));
    for i in 1..=m {
        factors.push(ModeOp::commutator(&f, &input.pi(i)));
    }
    let x = ModeOp::product(factors);
    Ok(conditional_trace_lazy(
        &x,
        &f,
        input.lattice(),
        rep.spinor_dim(),
        &input.inner_window(),
    ))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum CocycleKind {
    /// Commutators with the Dirac operator, `χ` inserted in even dimension.
    Dirac,
    /// Commutators with `Δ_J`, no grading.
    DeltaJ,
}

/// A `Tr_ω` value together with the ladder that produced it.
#[derive(Clone, Debug, PartialEq)]
pub struct CocycleEstimate {
    pub value: FittedConstant,
    pub ladder: Vec<usize>,
    pub partial: Vec<Complex64>,
}

/// `Tr(P_N X)/ln N` on a ladder, with `P_N` the span of the `N` modes (times spin) on which the
/// kernel `key` is largest; ladder points are moved up to complete shells of equal `key` and
/// limited to shells lying entirely inside `inner`.
pub fn ln_ladder_trace(
    x: &ModeOp,
    lattice: &Lattice,
    s: usize,
    inner: &ModeWindow,
    key: impl Fn(&[f64]) -> f64 + Sync,
    ladder: &Ladder,
    context: &str,
) -> Result<CocycleEstimate> {
    let half = inner.half_widths();
    let diag = x.map_diagonal(lattice, s, inner, |k, b| {
        let f = lattice.label_frequency(k);
        let on_boundary = k
            .iter()
            .zip(half)
            .any(|(l, &h)| l.unsigned_abs() as usize == h);
        (key(&f), b.trace(), on_boundary)
    });
    let bmax = diag
        .iter()
        .filter(|d| d.2)
        .fold(f64::NEG_INFINITY, |m, d| m.max(d.0));
    let mut kept: Vec<(f64, Complex64)> = diag
        .into_iter()
        .filter(|d| d.0 > bmax)
        .map(|d| (d.0, d.1))
        .collect();
    kept.sort_by(|a, b| b.0.total_cmp(&a.0));
    // cumulative sums at shell ends
    let mut ends: Vec<(usize, Complex64)> = Vec::new();
    let mut acc = c(0.0, 0.0);
    for (i, (kv, tr)) in kept.iter().enumerate() {
        acc += tr;
        let last = i + 1 == kept.len() || (kept[i + 1].0 - kv).abs() > 1e-12 * kv.abs();
        if last {
            ends.push(((i + 1) * s, acc));
        }
    }
    let total = ends.last().map_or(0, |e| e.0);
    let mut pts: Vec<(usize, Complex64)> = Vec::new();
    for n in ladder.points(total)? {
        if let Some(&e) = ends.iter().find(|e| e.0 >= n) {
            if e.0 >= 2 && pts.last().is_none_or(|p| p.0 < e.0) {
                pts.push(e);
            }
        }
    }
    let ns: Vec<usize> = pts.iter().map(|p| p.0).collect();
    let partial: Vec<Complex64> = pts.iter().map(|p| p.1 / (p.0 as f64).ln()).collect();
    let value = fit_log_ladder_complex(&ns, &partial, context)?;
    Ok(CocycleEstimate {
        value,
        ladder: ns,
        partial,
    })
}

/// `Tr_ω([χ] a₀[K,a₁]⋯[K,a_m] T)`.
///
/// Euclidean, `Dirac`: `K = γᵃ∂ₐ` (block `2πi γ·k`), `T = |𝒟|^{-m}`. Lorentzian, `Dirac`: `K = D`,
/// `T = Δ_J^{-m}` for the standard `J`. `DeltaJ`: `K = Δ_J = (1 + 4π²|k|²)^{1/2}`, `T = Δ_J^{-m}`.
pub fn hochschild_cocycle(
    kind: CocycleKind,
    input: &CocycleInput,
    rep: &CliffordRep,
    ladder: &Ladder,
) -> Result<CocycleEstimate> {
    let g = input.geometry();
    check_rep(rep, g)?;
    let m = input.arity();
    if m != g.dim() {
        return Err(CocycleError::Arity {
            expected: g.dim() + 1,
            found: m + 1,
        });
    }
    let s = rep.spinor_dim();
    let mf = m as f64;
    let lorentzian = g.signature() == Signature::Lorentzian;
    let euclidean_dirac = kind == CocycleKind::Dirac && !lorentzian;
    let kernel = move |k: &[f64]| -> f64 {
        let k2: f64 = k.iter().map(|x| x * x).sum();
        if euclidean_dirac {
            if k2 == 0.0 {
                0.0
            } else {
                (4.0 * PI * PI * k2).powf(-mf / 2.0)
            }
        } else {
            (1.0 + 4.0 * PI * PI * k2).powf(-mf / 2.0)
        }
    };
    let commutand = match kind {
        CocycleKind::Dirac => {
            let gb = gamma_blocks(rep);
            ModeOp::multiplier(move |k| gamma_dot(&gb, k, c(0.0, 2.0 * PI)))
        }
        CocycleKind::DeltaJ => ModeOp::multiplier(move |k| {
            let k2: f64 = k.iter().map(|x| x * x).sum();
            SpinBlock::scalar(s, c((1.0 + 4.0 * PI * PI * k2).sqrt(), 0.0))
        }),
    };
    let mut factors = Vec::with_capacity(m + 3);
    if kind == CocycleKind::Dirac && m.is_multiple_of(2) {
        factors.push(ModeOp::spin(&grading_chi(rep)?));
    }
    factors.push(input.pi(0));
    for i in 1..=m {
        factors.push(ModeOp::commutator(&commutand, &input.pi(i)));
    }
    factors.push(ModeOp::multiplier(move |k| {
        SpinBlock::scalar(s, c(kernel(k), 0.0))
    }));
    let x = ModeOp::product(factors);
    ln_ladder_trace(
        &x,
        input.lattice(),
        s,
        &input.inner_window(),
        kernel,
        ladder,
        &format!("{kind:?} cocycle"),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PairingKind {
    /// `∫ a₀ da₁ ∧ ⋯ ∧ da_m`.
    Wedge,
    /// `∫ f ⟨dg, dh⟩` for a Riemannian metric on covectors.
    Metric,
}

fn permutations_with_sign(m: usize) -> Vec<(Vec<usize>, f64)> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut perms = Vec::new();
    rec(&mut Vec::new(), &mut vec![false; m], &mut perms);
    perms
        .into_iter()
        .map(|p| {
            let inversions = (0..m)
                .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
                .filter(|&(i, j)| p[i] > p[j])
                .count();
            let sign = if inversions % 2 == 0 { 1.0 } else { -1.0 };
            (p, sign)
        })
        .collect()
}

/// Grid quadrature with spectral derivatives on `quad`.
///
/// `metric` (for [`PairingKind::Metric`]) is the inverse metric on covectors, row-major; the
/// identity when absent.
pub fn de_rham_pairing(
    entries: &[TrigPoly],
    quad: &Geometry,
    kind: PairingKind,
    metric: Option<&[f64]>,
) -> Result<Complex64> {
    let n = quad.dim();
    let m = entries.len().saturating_sub(1);
    let grids: Vec<GridFunction> = entries
        .iter()
        .map(|e| e.to_grid(quad))
        .collect::<Result<_>>()?;
    let derivs: Vec<Vec<GridFunction>> = grids[1..]
        .iter()
        .map(|f| (0..n).map(|a| f.derivative(a, 1)).collect())
        .collect();
    let len = quad.grid_len();
    let mut integrand = vec![c(0.0, 0.0); len];
    match kind {
        PairingKind::Wedge => {
            if m != n {
                return Err(CocycleError::Arity {
                    expected: n + 1,
                    found: m + 1,
                });
            }
            for (perm, sign) in permutations_with_sign(m) {
                for (p, v) in integrand.iter_mut().enumerate() {
                    let mut term = c(sign, 0.0);
                    for (i, &axis) in perm.iter().enumerate() {
                        term *= derivs[i][axis].samples()[p];
                    }
                    *v += term;
                }
            }
        }
        PairingKind::Metric => {
            if m != 2 {
                return Err(CocycleError::Arity {
                    expected: 3,
                    found: m + 1,
                });
            }
            let ident: Vec<f64> = (0..n * n)
                .map(|i| if i / n == i % n { 1.0 } else { 0.0 })
                .collect();
            let gmat = metric.unwrap_or(&ident);
            for a in 0..n {
                for b in 0..n {
                    let w = gmat[a * n + b];
                    if w == 0.0 {
                        continue;
                    }
                    for (p, v) in integrand.iter_mut().enumerate() {
                        *v += derivs[0][a].samples()[p] * derivs[1][b].samples()[p] * w;
                    }
                }
            }
        }
    }
    let a0 = grids[0].samples();
    for (v, x) in integrand.iter_mut().zip(a0) {
        *v *= x;
    }
    Ok(GridFunction::new(quad.clone(), integrand)?.integral())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum IdentityKind {
    Hochschild,
    Cyclic,
}

#[derive(Clone, Debug)]
pub enum AlgebraProduct {
    Pointwise,
    Star(DeformationParams),
}

impl AlgebraProduct {
    fn apply(&self, a: &TrigPoly, b: &TrigPoly, g: &Geometry) -> TrigPoly {
        match self {
            AlgebraProduct::Pointwise => a.mul(b, g),
            AlgebraProduct::Star(p) => a.star(b, g, p),
        }
    }
}

/// Normalised residual of `bφ = 0` (arguments `a₀,…,a_{m+1}`) or of cyclicity (arguments
/// `a₀,…,a_m`), divided by the largest term.
pub fn cocycle_identity_check(
    kind: IdentityKind,
    functional: impl Fn(&[TrigPoly]) -> Result<Complex64>,
    args: &[TrigPoly],
    product: &AlgebraProduct,
    geometry: &Geometry,
) -> Result<f64> {
    let mut terms = Vec::new();
    match kind {
        IdentityKind::Hochschild => {
            if args.len() < 2 {
                return Err(CocycleError::Arity {
                    expected: 2,
                    found: args.len(),
                });
            }
            let m = args.len() - 2;
            for j in 0..=m {
                let mut v: Vec<TrigPoly> = args[..j].to_vec();
                v.push(product.apply(&args[j], &args[j + 1], geometry));
                v.extend_from_slice(&args[j + 2..]);
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                terms.push(functional(&v)? * sign);
            }
            let mut v = vec![product.apply(&args[m + 1], &args[0], geometry)];
            v.extend_from_slice(&args[1..=m]);
            let sign = if (m + 1).is_multiple_of(2) { 1.0 } else { -1.0 };
            terms.push(functional(&v)? * sign);
        }
        IdentityKind::Cyclic => {
            if args.is_empty() {
                return Err(CocycleError::Arity {
                    expected: 1,
                    found: 0,
                });
            }
            let m = args.len() - 1;
            let mut rotated = vec![args[m].clone()];
            rotated.extend_from_slice(&args[..m]);
            let sign = if m.is_multiple_of(2) { 1.0 } else { -1.0 };
            terms.push(functional(args)?);
            terms.push(-functional(&rotated)? * sign);
        }
    }
    let total: Complex64 = terms.iter().sum();
    let scale = terms.iter().fold(0.0f64, |m, t| m.max(t.norm()));
    Ok(if scale == 0.0 {
        0.0
    } else {
        total.norm() / scale
    })
}

/// Tolerances of [`admissibility_check`].
pub const COMMUTANT_TOL: f64 = 1e-8;
pub const OMEGA_TOL: f64 = 1e-6;
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecoveredReflection {
    /// Row-major.
    pub r: Vec<f64>,
    /// Relative least-squares residual of `Jγ(v)J = (−1)^p γ(rv)`.
    pub factor_residual: f64,
    /// `rᵀηr = η`, `r² = 1`, smallest eigenvalue of `ηr`.
    pub invariants: (f64, f64, f64),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    pub commutant_residual: f64,
    pub omega_residual: f64,
    pub hermiticity_residual: f64,
    pub positivity_min: f64,
    pub commutant_ok: bool,
    pub omega_ok: bool,
    pub positivity_ok: bool,
    pub reflection: Option<RecoveredReflection>,
}

impl AdmissibilityReport {
    pub fn admissible(&self) -> bool {
        self.commutant_ok
            && self.omega_ok
            && self.positivity_ok
            && self.reflection.as_ref().is_some_and(|r| {
                r.factor_residual < 1e-8
                    && r.invariants.0 < 1e-8
                    && r.invariants.1 < 1e-8
                    && r.invariants.2 > 0.0
            })
    }
}

fn flatten(m: &Mat<Complex64>) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(m.nrows() * m.ncols());
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            out.push(m[(i, j)]);
        }
    }
    out
}

fn frob(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Checks a candidate `J` on the full space against samples `π_ℏ(a) ⊗ 1`.
///
/// `metric` is the spinor Krein metric `G`; positivity is tested on `(1 ⊗ G) J`.
pub fn admissibility_check(
    j: &DiscreteOperator,
    algebra: &[DiscreteOperator],
    rep: &CliffordRep,
    metric: &Mat<Complex64>,
) -> Result<AdmissibilityReport> {
    let id = DiscreteOperator::identity(j.lattice().clone(), j.spinor_dim());
    let sq = j.mul(j)?.max_abs_diff(&id)?;
    if sq > 1e-10 {
        return Err(CocycleError::NotInvolution(sq));
    }
    let jd = j.to_dense();
    let mut commutant: f64 = 0.0;
    let mut omega: f64 = 0.0;
    for a in algebra {
        let scale = a.max_abs().max(1e-300);
        commutant = commutant.max(j.commutator(a)?.max_abs() / scale);
        let basis: Vec<Vec<Complex64>> = rep
            .gammas()
            .iter()
            .map(|g| Ok(flatten(&a.right_spin(g)?.to_dense())))
            .collect::<Result<_>>()?;
        for gmat in rep.gammas() {
            let w = a.right_spin(gmat)?.to_dense();
            let conj = flatten(&(&jd * &w * &jd));
            let norm = frob(&conj);
            if norm == 0.0 {
                continue;
            }
            let (_, resid) = complex_lstsq(&basis, &conj)?;
            omega = omega.max(resid / norm);
        }
    }
    let h = j.left_spin(metric)?;
    let herm = h.hermitian_deviation();
    let hd = h.to_dense();
    let sym = Mat::from_fn(hd.nrows(), hd.ncols(), |r, cl| {
        (hd[(r, cl)] + hd[(cl, r)].conj()) * 0.5
    });
    let positivity_min = crate::operator::eigvalsh(&sym)?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    let commutant_ok = commutant <= COMMUTANT_TOL;
    let omega_ok = omega <= OMEGA_TOL;
    let positivity_ok = herm <= 1e-8 && positivity_min >= -POSITIVITY_TOL;
    let reflection = if commutant_ok && omega_ok && positivity_ok {
        Some(recover_reflection(&jd, j, rep)?)
    } else {
        None
    };
    Ok(AdmissibilityReport {
        commutant_residual: commutant,
        omega_residual: omega,
        hermiticity_residual: herm,
        positivity_min,
        commutant_ok,
        omega_ok,
        positivity_ok,
        reflection,
    })
}

/// Least-squares `r` with `J(1⊗γ^b)J = (−1)^p Σ_a r_ab (1⊗γ^a)`, which for `J = J_r` holds with
/// `p` the number of timelike directions.
fn recover_reflection(
    jd: &Mat<Complex64>,
    like: &DiscreteOperator,
    rep: &CliffordRep,
) -> Result<RecoveredReflection> {
    let m = rep.dim();
    let basis: Vec<Vec<Complex64>> = rep
        .gammas()
        .iter()
        .map(|g| Ok(flatten(&like.spin_operator(g)?.to_dense())))
        .collect::<Result<_>>()?;
    let mut r = vec![0.0; m * m];
    let mut worst: f64 = 0.0;
    for (b, g) in rep.gammas().iter().enumerate() {
        let gb = like.spin_operator(g)?.to_dense();
        let sign = if rep.p().is_multiple_of(2) { 1.0 } else { -1.0 };
        let target: Vec<Complex64> = flatten(&(jd * &gb * jd))
            .into_iter()
            .map(|z| z * sign)
            .collect();
        let (coef, resid) = complex_lstsq(&basis, &target)?;
        let imag = coef.iter().fold(0.0f64, |acc, z| acc.max(z.im.abs()));
        worst = worst.max(resid / frob(&target).max(1e-300)).max(imag);
        for a in 0..m {
            r[a * m + b] = coef[a].re;
        }
    }
    let invariants = reflection_residuals(&r, &rep.eta());
    Ok(RecoveredReflection {
        r,
        factor_residual: worst,
        invariants,
    })
}

/// `U J U†` with `U = exp(iε H ⊗ S)`, `H` a seeded random Hermitian matrix on mode space.
pub fn mode_mixing_conjugate(
    j: &DiscreteOperator,
    eps: f64,
    spin: &Mat<Complex64>,
    seed: u64,
) -> Result<DiscreteOperator> {
    let n = j.lattice().len();
    let s = j.spinor_dim();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut h = Mat::<Complex64>::zeros(n, n);
    for r in 0..n {
        h[(r, r)] = c(rng.random_range(-1.0..1.0), 0.0);
        for cl in r + 1..n {
            let z = c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            h[(r, cl)] = z;
            h[(cl, r)] = z.conj();
        }
    }
    let k = crate::operator::kron(&h, spin);
    let (vals, v) = eigh(&k)?;
    let dim = n * s;
    let phases = Mat::from_fn(dim, dim, |r, cl| {
        if r == cl {
            Complex64::from_polar(1.0, eps * vals[r])
        } else {
            c(0.0, 0.0)
        }
    });
    let u = &v * &phases * v.adjoint();
    let out = &u * j.to_dense() * u.adjoint();
    Ok(DiscreteOperator::dense(j.lattice().clone(), s, out)?)
}
