//! Truncated function spaces on ℝⁿ × 𝕋ᵈ and their Fourier duals ℝⁿ × ℤᵈ.
//!
//! Conventions, fixed for the whole crate:
//!
//! * unit period on the torus, `f̂(k) = ∫ e^{-2πi k·x} f(x) dx`;
//! * every ℝ direction is the box `[-L/2, L/2)` sampled at `x_s = -L/2 + s L/G`,
//!   its dual modes are `j/L` for `|j| ≤ K`, and the dual measure carries weight `1/L`;
//! * every 𝕋 direction is sampled at `t_s = s/G` with integer modes `|n| ≤ N`;
//! * default cutoffs are `K = N = G/2 - 1`, so the Nyquist mode is never stored.
//!
//! Arrays are row-major with axis 0 slowest; the ℝ directions come first.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use smallvec::SmallVec;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FourierError {
    #[error("invalid geometry field `{field}`: {reason}")]
    InvalidGeometry { field: &'static str, reason: String },
    #[error("array has {found} entries, geometry expects {expected}")]
    ShapeMismatch { expected: usize, found: usize },
    #[error("non-finite value at flat index {0}")]
    NonFinite(usize),
    #[error("operands live on different geometries")]
    GeometryMismatch,
    #[error("partial transform needs at least one compact direction")]
    NoCompactDirection,
    #[error("mode window exceeds the cutoff on axis {axis}: {requested} > {available}")]
    WindowTooLarge {
        axis: usize,
        requested: usize,
        available: usize,
    },
}

pub type Result<T> = std::result::Result<T, FourierError>;

/// Signature of the flat metric carried by a geometry.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Signature {
    Euclidean,
    /// Axis 0 is timelike.
    Lorentzian,
}

/// Shape of the discretised cylinder ℝⁿ × 𝕋ᵈ.
#[derive(Clone, Debug, PartialEq)]
pub struct Geometry {
    n: usize,
    d: usize,
    box_length: f64,
    grid_pts: Vec<usize>,
    signature: Signature,
}

impl Geometry {
    /// Same number of samples along every direction.
    pub fn new(
        n: usize,
        d: usize,
        box_length: f64,
        grid_pts: usize,
        signature: Signature,
    ) -> Result<Self> {
        Self::with_grid(n, d, box_length, vec![grid_pts; n + d], signature)
    }

    pub fn with_grid(
        n: usize,
        d: usize,
        box_length: f64,
        grid_pts: Vec<usize>,
        signature: Signature,
    ) -> Result<Self> {
        if n + d == 0 {
            return Err(FourierError::InvalidGeometry {
                field: "n+d",
                reason: "total dimension must be at least 1".into(),
            });
        }
        if !(box_length.is_finite() && box_length > 0.0) {
            return Err(FourierError::InvalidGeometry {
                field: "box_length",
                reason: format!("must be positive and finite, got {box_length}"),
            });
        }
        if grid_pts.len() != n + d {
            return Err(FourierError::InvalidGeometry {
                field: "grid_pts",
                reason: format!("expected {} entries, got {}", n + d, grid_pts.len()),
            });
        }
        if let Some(g) = grid_pts.iter().find(|&&g| g < 4 || g % 2 != 0) {
            return Err(FourierError::InvalidGeometry {
                field: "grid_pts",
                reason: format!("samples per direction must be even and >= 4, got {g}"),
            });
        }
        Ok(Self {
            n,
            d,
            box_length,
            grid_pts,
            signature,
        })
    }

    /// Flat torus 𝕋ᵈ. The box length is irrelevant and set to 1.
    pub fn torus(d: usize, grid_pts: usize, signature: Signature) -> Result<Self> {
        Self::new(0, d, 1.0, grid_pts, signature)
    }

    pub fn noncompact_dims(&self) -> usize {
        self.n
    }

    pub fn compact_dims(&self) -> usize {
        self.d
    }

    pub fn dim(&self) -> usize {
        self.n + self.d
    }

    pub fn box_length(&self) -> f64 {
        self.box_length
    }

    pub fn grid_pts(&self) -> &[usize] {
        &self.grid_pts
    }

    pub fn signature(&self) -> Signature {
        self.signature
    }

    pub fn with_signature(&self, signature: Signature) -> Self {
        Self {
            signature,
            ..self.clone()
        }
    }

    pub fn is_noncompact(&self, axis: usize) -> bool {
        axis < self.n
    }

    /// Circumference of the direction: `L` for ℝ axes, 1 for 𝕋 axes.
    pub fn period(&self, axis: usize) -> f64 {
        if self.is_noncompact(axis) {
            self.box_length
        } else {
            1.0
        }
    }

    pub fn grid_spacing(&self, axis: usize) -> f64 {
        self.period(axis) / self.grid_pts[axis] as f64
    }

    pub fn grid_coordinate(&self, axis: usize, s: usize) -> f64 {
        let origin = if self.is_noncompact(axis) {
            -0.5 * self.box_length
        } else {
            0.0
        };
        origin + s as f64 * self.grid_spacing(axis)
    }

    pub fn grid_len(&self) -> usize {
        self.grid_pts.iter().product()
    }

    /// Largest stored mode index on `axis`.
    pub fn cutoff(&self, axis: usize) -> usize {
        self.grid_pts[axis] / 2 - 1
    }

    pub fn cutoffs(&self) -> Vec<usize> {
        (0..self.dim()).map(|a| self.cutoff(a)).collect()
    }

    /// Distance between neighbouring dual modes.
    pub fn mode_spacing(&self, axis: usize) -> f64 {
        1.0 / self.period(axis)
    }

    pub fn frequency(&self, axis: usize, j: i64) -> f64 {
        j as f64 * self.mode_spacing(axis)
    }

    /// Weight of one lattice point under the dual measure μ: `(1/L)ⁿ`.
    pub fn mu_weight(&self) -> f64 {
        self.box_length.powi(-(self.n as i32))
    }

    /// Quadrature weight of one grid cell.
    pub fn cell_volume(&self) -> f64 {
        (0..self.dim()).map(|a| self.grid_spacing(a)).product()
    }

    /// Volume of the compactified space, `Lⁿ`.
    pub fn volume(&self) -> f64 {
        self.box_length.powi(self.n as i32)
    }

    /// Mode window at the default cutoffs.
    pub fn modes(&self) -> ModeWindow {
        ModeWindow::new(self.cutoffs())
    }

    /// Grid point of a flat sample index.
    pub fn grid_point(&self, flat: usize) -> SmallVec<[f64; 4]> {
        let mut out = SmallVec::from_elem(0.0, self.dim());
        let mut rem = flat;
        for axis in (0..self.dim()).rev() {
            let g = self.grid_pts[axis];
            out[axis] = self.grid_coordinate(axis, rem % g);
            rem /= g;
        }
        out
    }

    pub fn check_same(&self, other: &Geometry) -> Result<()> {
        if self == other {
            Ok(())
        } else {
            Err(FourierError::GeometryMismatch)
        }
    }
}

/// Box of integer mode labels `{j : |j_a| ≤ half_a}` with row-major flat indexing.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ModeWindow {
    half: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
}

pub type ModeLabel = SmallVec<[i64; 4]>;

impl ModeWindow {
    pub fn new(half: Vec<usize>) -> Self {
        let mut strides = vec![1; half.len()];
        let mut len = 1;
        for a in (0..half.len()).rev() {
            strides[a] = len;
            len *= 2 * half[a] + 1;
        }
        Self { half, strides, len }
    }

    pub fn half_widths(&self) -> &[usize] {
        &self.half
    }

    pub fn dim(&self) -> usize {
        self.half.len()
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn contains(&self, label: &[i64]) -> bool {
        label
            .iter()
            .zip(&self.half)
            .all(|(&j, &h)| j.unsigned_abs() as usize <= h)
    }

    pub fn index(&self, label: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for a in 0..self.dim() {
            let h = self.half[a] as i64;
            let j = label[a];
            if j < -h || j > h {
                return None;
            }
            idx += (j + h) as usize * self.strides[a];
        }
        Some(idx)
    }

    pub fn label(&self, idx: usize) -> ModeLabel {
        let mut out = SmallVec::from_elem(0, self.dim());
        self.label_into(idx, &mut out);
        out
    }

    pub fn label_into(&self, idx: usize, out: &mut [i64]) {
        let mut rem = idx;
        for a in 0..self.dim() {
            let w = 2 * self.half[a] + 1;
            let q = rem / self.strides[a];
            rem -= q * self.strides[a];
            debug_assert!(q < w);
            out[a] = q as i64 - self.half[a] as i64;
        }
    }

    /// Flat index of `label(idx) + shift`, if it stays inside the window.
    pub fn shifted(&self, idx: usize, shift: &[i64]) -> Option<usize> {
        let mut rem = idx;
        let mut out = 0usize;
        for a in 0..self.dim() {
            let h = self.half[a] as i64;
            let q = (rem / self.strides[a]) as i64;
            rem -= q as usize * self.strides[a];
            let j = q - h + shift[a];
            if j < -h || j > h {
                return None;
            }
            out += (j + h) as usize * self.strides[a];
        }
        Some(out)
    }

    pub fn labels(&self) -> impl Iterator<Item = ModeLabel> + '_ {
        (0..self.len).map(move |i| self.label(i))
    }

    /// True when every label of `self` also lies in `other`.
    pub fn is_within(&self, other: &ModeWindow) -> bool {
        self.dim() == other.dim() && self.half.iter().zip(&other.half).all(|(a, b)| a <= b)
    }
}

/// A geometry together with a mode window; the index space of truncated operators.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    geometry: Geometry,
    window: ModeWindow,
}

impl Lattice {
    /// The window may exceed the grid cutoffs; only the mode spacing of the geometry is used.
    pub fn new(geometry: Geometry, half: Vec<usize>) -> Result<Self> {
        if half.len() != geometry.dim() {
            return Err(FourierError::InvalidGeometry {
                field: "window",
                reason: format!(
                    "expected {} half-widths, got {}",
                    geometry.dim(),
                    half.len()
                ),
            });
        }
        Ok(Self {
            window: ModeWindow::new(half),
            geometry,
        })
    }

    /// Lattice at the grid cutoffs of `geometry`.
    pub fn full(geometry: Geometry) -> Self {
        let window = geometry.modes();
        Self { geometry, window }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn window(&self) -> &ModeWindow {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn frequency_into(&self, idx: usize, out: &mut [f64]) {
        let mut label: ModeLabel = SmallVec::from_elem(0, self.window.dim());
        self.window.label_into(idx, &mut label);
        for (a, o) in out.iter_mut().enumerate() {
            *o = self.geometry.frequency(a, label[a]);
        }
    }

    pub fn frequency(&self, idx: usize) -> SmallVec<[f64; 4]> {
        let mut out = SmallVec::from_elem(0.0, self.window.dim());
        self.frequency_into(idx, &mut out);
        out
    }

    pub fn label_frequency(&self, label: &[i64]) -> SmallVec<[f64; 4]> {
        label
            .iter()
            .enumerate()
            .map(|(a, &j)| self.geometry.frequency(a, j))
            .collect()
    }

    /// Sub-lattice with a smaller window on the same geometry.
    pub fn restricted(&self, half: Vec<usize>) -> Result<Self> {
        let sub = Lattice::new(self.geometry.clone(), half)?;
        for (axis, (&r, &a)) in sub.window.half.iter().zip(&self.window.half).enumerate() {
            if r > a {
                return Err(FourierError::WindowTooLarge {
                    axis,
                    requested: r,
                    available: a,
                });
            }
        }
        Ok(sub)
    }
}

/// Samples on the position grid `[-L/2, L/2)ⁿ × [0, 1)ᵈ`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    geometry: Geometry,
    samples: Vec<Complex64>,
}

impl GridFunction {
    pub fn new(geometry: Geometry, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != geometry.grid_len() {
            return Err(FourierError::ShapeMismatch {
                expected: geometry.grid_len(),
                found: samples.len(),
            });
        }
        if let Some(i) = samples
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(FourierError::NonFinite(i));
        }
        Ok(Self { geometry, samples })
    }

    pub fn from_fn(geometry: Geometry, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let samples = (0..geometry.grid_len())
            .map(|i| f(&geometry.grid_point(i)))
            .collect();
        Self::new(geometry, samples)
    }

    pub fn constant(geometry: Geometry, value: Complex64) -> Self {
        let samples = vec![value; geometry.grid_len()];
        Self { geometry, samples }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            geometry: self.geometry.clone(),
            samples: self.samples.iter().map(|&z| f(z)).collect(),
        }
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry.clone(),
            samples: self
                .samples
                .iter()
                .zip(&other.samples)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b)
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    pub fn conj(&self) -> Self {
        self.map(|z| z.conj())
    }

    /// Grid quadrature of the function.
    pub fn integral(&self) -> Complex64 {
        self.samples.iter().sum::<Complex64>() * self.geometry.cell_volume()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Spectral derivative `∂^order` along `axis`; exact for band-limited input.
    pub fn derivative(&self, axis: usize, order: u32) -> Self {
        let f = forward_transform(self);
        inverse_transform(&f.derivative(axis, order))
    }
}

/// Coefficients on the mode window of a geometry, with the dual measure μ.
#[derive(Clone, Debug, PartialEq)]
pub struct FourierFunction {
    geometry: Geometry,
    coeffs: Vec<Complex64>,
}

impl FourierFunction {
    pub fn new(geometry: Geometry, coeffs: Vec<Complex64>) -> Result<Self> {
        let expected = geometry.modes().len();
        if coeffs.len() != expected {
            return Err(FourierError::ShapeMismatch {
                expected,
                found: coeffs.len(),
            });
        }
        if let Some(i) = coeffs
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(FourierError::NonFinite(i));
        }
        Ok(Self { geometry, coeffs })
    }

    pub fn zeros(geometry: Geometry) -> Self {
        let coeffs = vec![Complex64::new(0.0, 0.0); geometry.modes().len()];
        Self { geometry, coeffs }
    }

    /// Single nonzero coefficient; labels outside the window give the zero function.
    pub fn delta(geometry: Geometry, label: &[i64], value: Complex64) -> Self {
        let mut out = Self::zeros(geometry);
        if let Some(i) = out.window().index(label) {
            out.coeffs[i] = value;
        }
        out
    }

    /// Samples `f` at the physical frequency of every mode.
    pub fn from_fn(geometry: Geometry, f: impl Fn(&[f64]) -> Complex64) -> Result<Self> {
        let lattice = Lattice::full(geometry.clone());
        let coeffs = (0..lattice.len())
            .map(|i| f(&lattice.frequency(i)))
            .collect();
        Self::new(geometry, coeffs)
    }

    /// Coefficients given by integer labels.
    pub fn from_label_fn(
        geometry: Geometry,
        mut f: impl FnMut(&[i64]) -> Complex64,
    ) -> Result<Self> {
        let window = geometry.modes();
        let coeffs = window.labels().map(|l| f(&l)).collect();
        Self::new(geometry, coeffs)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn window(&self) -> ModeWindow {
        self.geometry.modes()
    }

    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    pub fn mu_weight(&self) -> f64 {
        self.geometry.mu_weight()
    }

    /// Coefficient at a label; zero outside the window.
    pub fn coeff(&self, label: &[i64]) -> Complex64 {
        self.window()
            .index(label)
            .map_or(Complex64::new(0.0, 0.0), |i| self.coeffs[i])
    }

    pub fn map(&self, f: impl Fn(Complex64) -> Complex64) -> Self {
        Self {
            geometry: self.geometry.clone(),
            coeffs: self.coeffs.iter().map(|&z| f(z)).collect(),
        }
    }

    fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(Complex64, Complex64) -> Complex64,
    ) -> Result<Self> {
        self.geometry.check_same(&other.geometry)?;
        Ok(Self {
            geometry: self.geometry.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|z| z * s)
    }

    /// Multiplies every coefficient by `(2πi k_axis)^order`.
    pub fn derivative(&self, axis: usize, order: u32) -> Self {
        let window = self.window();
        let mut out = self.clone();
        for (i, c) in out.coeffs.iter_mut().enumerate() {
            let k = self.geometry.frequency(axis, window.label(i)[axis]);
            *c *= Complex64::new(0.0, 2.0 * PI * k).powu(order);
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// Largest |label_a| over the nonzero coefficients, per axis.
    pub fn support_extent(&self) -> Vec<usize> {
        let window = self.window();
        let mut ext = vec![0usize; window.dim()];
        for (i, c) in self.coeffs.iter().enumerate() {
            if c.norm() > 0.0 {
                for (e, j) in ext.iter_mut().zip(window.label(i)) {
                    *e = (*e).max(j.unsigned_abs() as usize);
                }
            }
        }
        ext
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NormKind {
    L1,
    L2,
    Sup,
}

/// μ-weighted norms on the Fourier side, λ-weighted norms on the grid side.
pub trait Normed {
    fn norm(&self, kind: NormKind) -> f64;
}

fn weighted_norm(values: &[Complex64], weight: f64, kind: NormKind) -> f64 {
    match kind {
        NormKind::L1 => values.iter().map(|z| z.norm()).sum::<f64>() * weight,
        NormKind::L2 => (values.iter().map(|z| z.norm_sqr()).sum::<f64>() * weight).sqrt(),
        NormKind::Sup => values.iter().map(|z| z.norm()).fold(0.0, f64::max),
    }
}

impl Normed for FourierFunction {
    fn norm(&self, kind: NormKind) -> f64 {
        weighted_norm(&self.coeffs, self.mu_weight(), kind)
    }
}

impl Normed for GridFunction {
    fn norm(&self, kind: NormKind) -> f64 {
        weighted_norm(&self.samples, self.geometry.cell_volume(), kind)
    }
}

pub fn norm<T: Normed>(value: &T, kind: NormKind) -> f64 {
    value.norm(kind)
}

/// Runs an in-place FFT along one axis of a row-major array.
pub(crate) fn fft_axis(data: &mut [Complex64], shape: &[usize], axis: usize, fft: &dyn Fft<f64>) {
    let g = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut line = vec![Complex64::new(0.0, 0.0); g];
    let mut scratch = vec![Complex64::new(0.0, 0.0); fft.get_inplace_scratch_len()];
    for o in 0..outer {
        let base = o * g * inner;
        for i in 0..inner {
            for (s, v) in line.iter_mut().enumerate() {
                *v = data[base + s * inner + i];
            }
            fft.process_with_scratch(&mut line, &mut scratch);
            for (s, v) in line.iter().enumerate() {
                data[base + s * inner + i] = *v;
            }
        }
    }
}

fn sign_factor(j: i64) -> f64 {
    if j.rem_euclid(2) == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Per-axis factor turning a raw DFT bin into the continuum coefficient.
fn forward_factor(geometry: &Geometry, axis: usize, j: i64) -> f64 {
    let g = geometry.grid_pts()[axis] as f64;
    if geometry.is_noncompact(axis) {
        geometry.box_length() / g * sign_factor(j)
    } else {
        1.0 / g
    }
}

fn inverse_factor(geometry: &Geometry, axis: usize, j: i64) -> f64 {
    if geometry.is_noncompact(axis) {
        sign_factor(j) / geometry.box_length()
    } else {
        1.0
    }
}

fn grid_flat_index(shape: &[usize], label: &[i64]) -> usize {
    let mut idx = 0;
    for (a, &g) in shape.iter().enumerate() {
        idx = idx * g + label[a].rem_euclid(g as i64) as usize;
    }
    idx
}

/// Grid quadrature of `∫ e^{-2πik·x} f(x) dx` at every stored mode.
pub fn forward_transform(f: &GridFunction) -> FourierFunction {
    let geometry = f.geometry.clone();
    let shape = geometry.grid_pts().to_vec();
    let mut buf = f.samples.clone();
    let mut planner = FftPlanner::new();
    for (axis, &g) in shape.iter().enumerate() {
        let fft = planner.plan_fft_forward(g);
        fft_axis(&mut buf, &shape, axis, fft.as_ref());
    }
    let window = geometry.modes();
    let coeffs = window
        .labels()
        .map(|label| {
            let scale: f64 = (0..label.len())
                .map(|a| forward_factor(&geometry, a, label[a]))
                .product();
            buf[grid_flat_index(&shape, &label)] * scale
        })
        .collect();
    FourierFunction { geometry, coeffs }
}

/// Synthesis `Σ_k w(k) φ(k) e^{2πik·x}` on the grid, with `w = 1/L` per ℝ direction.
pub fn inverse_transform(phi: &FourierFunction) -> GridFunction {
    let geometry = phi.geometry.clone();
    let shape = geometry.grid_pts().to_vec();
    let mut buf = vec![Complex64::new(0.0, 0.0); geometry.grid_len()];
    for (label, &c) in phi.window().labels().zip(&phi.coeffs) {
        let scale: f64 = (0..label.len())
            .map(|a| inverse_factor(&geometry, a, label[a]))
            .product();
        buf[grid_flat_index(&shape, &label)] += c * scale;
    }
    let mut planner = FftPlanner::new();
    for (axis, &g) in shape.iter().enumerate() {
        let fft = planner.plan_fft_inverse(g);
        fft_axis(&mut buf, &shape, axis, fft.as_ref());
    }
    GridFunction {
        geometry,
        samples: buf,
    }
}

/// Function of (ℝ-mode, torus point): ℝ axes stay on the dual lattice, 𝕋 axes are sampled.
#[derive(Clone, Debug, PartialEq)]
pub struct PartialFunction {
    geometry: Geometry,
    samples: Vec<Complex64>,
}

/// Array shape of a partial function: `2K+1` per ℝ axis, `G` per 𝕋 axis.
pub fn partial_shape(geometry: &Geometry) -> Vec<usize> {
    (0..geometry.dim())
        .map(|a| {
            if geometry.is_noncompact(a) {
                2 * geometry.cutoff(a) + 1
            } else {
                geometry.grid_pts()[a]
            }
        })
        .collect()
}

impl PartialFunction {
    pub fn new(geometry: Geometry, samples: Vec<Complex64>) -> Result<Self> {
        if geometry.compact_dims() == 0 {
            return Err(FourierError::NoCompactDirection);
        }
        let expected: usize = partial_shape(&geometry).iter().product();
        if samples.len() != expected {
            return Err(FourierError::ShapeMismatch {
                expected,
                found: samples.len(),
            });
        }
        if let Some(i) = samples
            .iter()
            .position(|z| !(z.re.is_finite() && z.im.is_finite()))
        {
            return Err(FourierError::NonFinite(i));
        }
        Ok(Self { geometry, samples })
    }

    /// `f(x, t)` with `x` the ℝ-mode frequencies and `t` the torus grid point.
    pub fn from_fn(geometry: Geometry, f: impl Fn(&[f64], &[f64]) -> Complex64) -> Result<Self> {
        if geometry.compact_dims() == 0 {
            return Err(FourierError::NoCompactDirection);
        }
        let shape = partial_shape(&geometry);
        let len: usize = shape.iter().product();
        let n = geometry.noncompact_dims();
        let samples = (0..len)
            .map(|i| {
                let (x, t) = partial_point(&geometry, &shape, i);
                f(&x[..n], &t)
            })
            .collect();
        Self::new(geometry, samples)
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn shape(&self) -> Vec<usize> {
        partial_shape(&self.geometry)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// (ℝ-mode frequencies, torus coordinates) of a flat partial-function index.
pub(crate) fn partial_point(
    geometry: &Geometry,
    shape: &[usize],
    flat: usize,
) -> (SmallVec<[f64; 4]>, SmallVec<[f64; 4]>) {
    let n = geometry.noncompact_dims();
    let mut x = SmallVec::from_elem(0.0, n);
    let mut t = SmallVec::from_elem(0.0, geometry.compact_dims());
    let mut rem = flat;
    for axis in (0..geometry.dim()).rev() {
        let s = rem % shape[axis];
        rem /= shape[axis];
        if axis < n {
            let j = s as i64 - geometry.cutoff(axis) as i64;
            x[axis] = geometry.frequency(axis, j);
        } else {
            t[axis - n] = geometry.grid_coordinate(axis, s);
        }
    }
    (x, t)
}

/// Inverse transform over the torus directions only: `Σ_n φ(x, n) e^{2πin·t}`.
pub fn partial_fourier(phi: &FourierFunction) -> Result<PartialFunction> {
    let geometry = phi.geometry.clone();
    if geometry.compact_dims() == 0 {
        return Err(FourierError::NoCompactDirection);
    }
    let shape = partial_shape(&geometry);
    let n = geometry.noncompact_dims();
    let mut buf = vec![Complex64::new(0.0, 0.0); shape.iter().product()];
    for (label, &c) in phi.window().labels().zip(&phi.coeffs) {
        let mut idx = 0;
        for (a, &g) in shape.iter().enumerate() {
            let pos = if a < n {
                (label[a] + geometry.cutoff(a) as i64) as usize
            } else {
                label[a].rem_euclid(g as i64) as usize
            };
            idx = idx * g + pos;
        }
        buf[idx] += c;
    }
    let mut planner = FftPlanner::new();
    for axis in n..geometry.dim() {
        let fft = planner.plan_fft_inverse(shape[axis]);
        fft_axis(&mut buf, &shape, axis, fft.as_ref());
    }
    Ok(PartialFunction {
        geometry,
        samples: buf,
    })
}

/// Inverse of [`partial_fourier`] for functions band-limited on the torus grid.
pub fn partial_to_fourier(f: &PartialFunction) -> FourierFunction {
    let geometry = f.geometry.clone();
    let shape = partial_shape(&geometry);
    let n = geometry.noncompact_dims();
    let mut buf = f.samples.clone();
    let mut planner = FftPlanner::new();
    for axis in n..geometry.dim() {
        let fft = planner.plan_fft_forward(shape[axis]);
        fft_axis(&mut buf, &shape, axis, fft.as_ref());
    }
    let norm: f64 = (n..geometry.dim()).map(|a| shape[a] as f64).product();
    let window = geometry.modes();
    let coeffs = window
        .labels()
        .map(|label| {
            let mut idx = 0;
            for (a, &g) in shape.iter().enumerate() {
                let pos = if a < n {
                    (label[a] + geometry.cutoff(a) as i64) as usize
                } else {
                    label[a].rem_euclid(g as i64) as usize
                };
                idx = idx * g + pos;
            }
            buf[idx] / norm
        })
        .collect();
    FourierFunction { geometry, coeffs }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn cyl(grid: Vec<usize>) -> Geometry {
        Geometry::with_grid(1, 1, 8.0, grid, Signature::Euclidean).unwrap()
    }

    /// Band-limited random coefficients inside half the cutoffs.
    fn random_band_limited(geometry: &Geometry, seed: u64) -> FourierFunction {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let half: Vec<i64> = geometry.cutoffs().iter().map(|&k| (k / 2) as i64).collect();
        FourierFunction::from_label_fn(geometry.clone(), |l| {
            if l.iter().zip(&half).all(|(j, h)| j.abs() <= *h) {
                Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
            } else {
                c(0.0)
            }
        })
        .unwrap()
    }

    #[test]
    fn geometry_rejects_odd_or_tiny_grids() {
        assert!(matches!(
            Geometry::new(1, 0, 4.0, 7, Signature::Euclidean),
            Err(FourierError::InvalidGeometry {
                field: "grid_pts",
                ..
            })
        ));
        assert!(Geometry::new(0, 1, 1.0, 2, Signature::Euclidean).is_err());
        assert!(Geometry::new(0, 0, 1.0, 8, Signature::Euclidean).is_err());
        assert!(Geometry::new(1, 0, -1.0, 8, Signature::Euclidean).is_err());
    }

    #[test]
    fn constant_on_circle_is_delta_at_zero() {
        let g = Geometry::torus(1, 16, Signature::Euclidean).unwrap();
        let f = GridFunction::constant(g.clone(), c(1.0));
        let fhat = forward_transform(&f);
        for (label, z) in fhat.window().labels().zip(fhat.coeffs()) {
            let expect = if label[0] == 0 { 1.0 } else { 0.0 };
            assert!((z - c(expect)).norm() < 1e-14);
        }
    }

    #[test]
    fn single_mode_on_circle() {
        let g = Geometry::torus(1, 16, Signature::Euclidean).unwrap();
        let f = GridFunction::from_fn(g, |t| Complex64::from_polar(1.0, 2.0 * PI * 3.0 * t[0]))
            .unwrap();
        let fhat = forward_transform(&f);
        assert!((fhat.coeff(&[3]) - c(1.0)).norm() < 1e-14);
        assert!(fhat.coeff(&[-3]).norm() < 1e-14);
    }

    #[test]
    fn gaussian_transform_matches_closed_form() {
        let g = Geometry::new(1, 0, 16.0, 256, Signature::Euclidean).unwrap();
        let f = GridFunction::from_fn(g.clone(), |x| c((-PI * x[0] * x[0]).exp())).unwrap();
        let fhat = forward_transform(&f);
        let lattice = Lattice::full(g);
        for (i, z) in fhat.coeffs().iter().enumerate() {
            let k = lattice.frequency(i)[0];
            assert!((z - c((-PI * k * k).exp())).norm() < 1e-8, "k = {k}");
        }
    }

    #[test]
    fn delta_zero_synthesises_constant() {
        let g = Geometry::torus(2, 8, Signature::Euclidean).unwrap();
        let f = inverse_transform(&FourierFunction::delta(g, &[0, 0], c(1.0)));
        assert!(f.samples().iter().all(|z| (z - c(1.0)).norm() < 1e-14));
    }

    #[test]
    fn gaussian_l1_norm_is_one() {
        let g = Geometry::new(1, 0, 16.0, 256, Signature::Euclidean).unwrap();
        let phi = FourierFunction::from_fn(g, |k| c((-PI * k[0] * k[0]).exp())).unwrap();
        assert!((phi.norm(NormKind::L1) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn delta_norms() {
        let g = cyl(vec![16, 16]);
        let phi = FourierFunction::delta(g.clone(), &[2, -1], c(3.0));
        assert!((phi.norm(NormKind::L1) - 3.0 / 8.0).abs() < 1e-15);
        assert_eq!(phi.norm(NormKind::Sup), 3.0);
        let t = Geometry::torus(1, 16, Signature::Euclidean).unwrap();
        assert_eq!(
            FourierFunction::delta(t, &[4], c(3.0)).norm(NormKind::L1),
            3.0
        );
        assert_eq!(FourierFunction::zeros(g).norm(NormKind::L2), 0.0);
    }

    #[test]
    fn partial_transform_of_single_torus_mode() {
        let g = cyl(vec![16, 16]);
        let phi = FourierFunction::from_label_fn(g.clone(), |l| {
            if l[1] == 2 {
                c((-(l[0] as f64).powi(2) / 4.0).exp())
            } else {
                c(0.0)
            }
        })
        .unwrap();
        let p = partial_fourier(&phi).unwrap();
        let expect = PartialFunction::from_fn(g.clone(), |x, t| {
            let j = x[0] * 8.0;
            c((-(j * j) / 4.0).exp()) * Complex64::from_polar(1.0, 2.0 * PI * 2.0 * t[0])
        })
        .unwrap();
        assert!(p.max_abs_diff(&expect) < 1e-13);
        assert!(partial_to_fourier(&p).max_abs_diff(&phi) < 1e-13);
    }

    #[test]
    fn partial_transform_requires_torus() {
        let g = Geometry::new(1, 0, 4.0, 8, Signature::Euclidean).unwrap();
        assert_eq!(
            partial_fourier(&FourierFunction::zeros(g)).unwrap_err(),
            FourierError::NoCompactDirection
        );
    }

    #[test]
    fn full_transform_is_partial_then_real_axis() {
        let g = cyl(vec![32, 16]);
        let phi = random_band_limited(&g, 7);
        let full = inverse_transform(&phi);
        let part = partial_fourier(&phi).unwrap();
        let shape = part.shape();
        let lattice = Lattice::full(g.clone());
        // oracle: explicit sum over the ℝ modes of the partial transform
        let mut worst: f64 = 0.0;
        for (flat, z) in full.samples().iter().enumerate() {
            let x = g.grid_point(flat)[0];
            let s_t = flat % 16;
            let mut acc = c(0.0);
            for j in 0..shape[0] {
                let k = lattice
                    .geometry()
                    .frequency(0, j as i64 - g.cutoff(0) as i64);
                acc += part.samples()[j * shape[1] + s_t]
                    * Complex64::from_polar(1.0, 2.0 * PI * k * x)
                    / g.box_length();
            }
            worst = worst.max((acc - z).norm());
        }
        assert!(worst < 1e-10, "{worst}");
    }

    #[test]
    fn conjugate_symmetric_coefficients_give_real_partial_transform() {
        let g = cyl(vec![16, 16]);
        let phi = FourierFunction::from_label_fn(g, |l| {
            let n = l[1] as f64;
            Complex64::new((-(l[0] as f64).powi(2) / 9.0).exp(), 0.3 * n) / (1.0 + n * n)
        })
        .unwrap();
        // φ(x, -n) = conj φ(x, n) holds by construction
        let p = partial_fourier(&phi).unwrap();
        assert!(p.samples().iter().all(|z| z.im.abs() < 1e-13));
        let skew = phi.map(|z| z * Complex64::new(0.0, 1.0) + 1.0);
        let q = partial_fourier(&skew).unwrap();
        assert!(q.samples().iter().any(|z| z.im.abs() > 1e-3));
    }

    #[test]
    fn real_even_function_has_real_coefficients() {
        let g = cyl(vec![64, 16]);
        let f = GridFunction::from_fn(g, |x| {
            c((-x[0] * x[0]).exp() * (1.0 + 0.5 * (2.0 * PI * x[1]).cos()))
        })
        .unwrap();
        let fhat = forward_transform(&f);
        assert!(fhat.coeffs().iter().all(|z| z.im.abs() < 1e-12));
    }

    #[test]
    fn spectral_derivative_of_trig_mode() {
        let g = Geometry::torus(2, 16, Signature::Euclidean).unwrap();
        let f = GridFunction::from_fn(g.clone(), |x| {
            Complex64::from_polar(1.0, 2.0 * PI * (2.0 * x[0] - x[1]))
        })
        .unwrap();
        let df = f.derivative(1, 1);
        let expect = f.scale(Complex64::new(0.0, -2.0 * PI));
        assert!(df.max_abs_diff(&expect) < 1e-12);
    }

    #[test]
    fn window_indexing_round_trips() {
        let w = ModeWindow::new(vec![3, 0, 2]);
        assert_eq!(w.len(), 7 * 5);
        for i in 0..w.len() {
            let l = w.label(i);
            assert_eq!(w.index(&l), Some(i));
        }
        assert_eq!(w.shifted(w.index(&[3, 0, 0]).unwrap(), &[1, 0, 0]), None);
        assert_eq!(
            w.shifted(w.index(&[1, 0, -2]).unwrap(), &[-2, 0, 4]),
            w.index(&[-1, 0, 2])
        );
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]

        #[test]
        fn round_trip_and_parseval(seed in any::<u64>(), gx in 2usize..5, gt in 2usize..5) {
            let g = cyl(vec![4 * gx, 4 * gt]);
            let phi = random_band_limited(&g, seed);
            let f = inverse_transform(&phi);
            let back = forward_transform(&f);
            prop_assert!(back.max_abs_diff(&phi) < 1e-10);
            prop_assert!(inverse_transform(&back).max_abs_diff(&f) < 1e-10);
            let lhs = f.norm(NormKind::L2);
            let rhs = phi.norm(NormKind::L2);
            prop_assert!((lhs - rhs).abs() <= 1e-10 * rhs.max(1e-300));
        }

        #[test]
        fn transforms_are_linear(seed in any::<u64>(), a in -2.0f64..2.0, b in -2.0f64..2.0) {
            let g = cyl(vec![16, 8]);
            let f = inverse_transform(&random_band_limited(&g, seed));
            let h = inverse_transform(&random_band_limited(&g, seed ^ 0x5555));
            let combo = f.scale(c(a)).add(&h.scale(Complex64::new(0.0, b))).unwrap();
            let lhs = forward_transform(&combo);
            let rhs = forward_transform(&f)
                .scale(c(a))
                .add(&forward_transform(&h).scale(Complex64::new(0.0, b)))
                .unwrap();
            prop_assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            let p = partial_fourier(&lhs).unwrap();
            let q1 = partial_fourier(&forward_transform(&f)).unwrap();
            let q2 = partial_fourier(&forward_transform(&h)).unwrap();
            let worst = p.samples().iter().zip(q1.samples().iter().zip(q2.samples()))
                .map(|(z, (u, v))| (z - (u * a + v * Complex64::new(0.0, b))).norm())
                .fold(0.0, f64::max);
            prop_assert!(worst < 1e-11);
        }
    }
}
