//! The bimodule `𝒮(ℝ)` between the cylinder algebra `𝒮(ℝ × 𝕋)` and `𝒮(ℤ)`.
//!
//! All functions live on one commensurate grid: the line `[−L/2, L/2)` and the circle `[0, 1)` are
//! both sampled with spacing `1/T`. Every shift that occurs (`x ± n`, `t − π(y)`, `t − n`) is then
//! an exact index shift, so actions, products and pairings are evaluated by plain quadrature.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MoritaError {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("{what}: mass {mass:e} outside the safe window")]
    Certificate { what: &'static str, mass: f64 },
    #[error("sequence tail {0:e} at the cutoff")]
    SequenceTail(f64),
    #[error("expected {expected} samples, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("operands live on different grids")]
    GridMismatch,
    #[error("λ must be positive, got {0}")]
    InvalidLambda(f64),
    #[error("shift moves mass {0:e} out of the box")]
    ShiftOutOfBox(f64),
    #[error("derivative order {0} is not supported (max 4)")]
    InvalidOrder(u32),
    #[error("decomposition failed: {0}")]
    Solver(String),
}

pub type Result<T> = std::result::Result<T, MoritaError>;

const DECAY_TOL: f64 = 1e-10;

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// `L = 2·half_length`, `T = per_unit` points on `[0, 1)` and `L·T` points on the line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoritaGrid {
    half_length: usize,
    per_unit: usize,
}

impl MoritaGrid {
    pub fn new(half_length: usize, per_unit: usize) -> Result<Self> {
        if half_length < 2 {
            return Err(MoritaError::InvalidGrid(format!(
                "half_length {half_length} must be at least 2"
            )));
        }
        if per_unit < 4 || per_unit % 2 == 1 {
            return Err(MoritaError::InvalidGrid(format!(
                "per_unit {per_unit} must be even and at least 4"
            )));
        }
        Ok(Self {
            half_length,
            per_unit,
        })
    }

    pub fn length(&self) -> f64 {
        2.0 * self.half_length as f64
    }

    /// Points on the line.
    pub fn points(&self) -> usize {
        2 * self.half_length * self.per_unit
    }

    /// Points on the circle.
    pub fn t_points(&self) -> usize {
        self.per_unit
    }

    pub fn spacing(&self) -> f64 {
        1.0 / self.per_unit as f64
    }

    pub fn x(&self, s: usize) -> f64 {
        (s as f64 - (self.half_length * self.per_unit) as f64) * self.spacing()
    }

    pub fn t(&self, j: usize) -> f64 {
        j as f64 * self.spacing()
    }

    fn center(&self) -> i64 {
        (self.half_length * self.per_unit) as i64
    }

    fn line_index(&self, s: i64) -> Option<usize> {
        (0..self.points() as i64).contains(&s).then_some(s as usize)
    }

    /// Index of `π(x_s)` on the circle.
    fn t_index(&self, s: i64) -> usize {
        s.rem_euclid(self.per_unit as i64) as usize
    }

    fn outside(&self, s: usize) -> bool {
        self.x(s).abs() > self.length() / 4.0
    }
}

/// `f ∈ 𝒮(ℝ)` sampled on the line.
#[derive(Clone, Debug, PartialEq)]
pub struct LineFunction {
    grid: MoritaGrid,
    samples: Vec<Complex64>,
}

impl LineFunction {
    pub fn new(grid: MoritaGrid, samples: Vec<Complex64>) -> Result<Self> {
        let f = Self::raw(grid, samples)?;
        let mass = f.outside_mass();
        if mass >= DECAY_TOL {
            return Err(MoritaError::Certificate {
                what: "line function",
                mass,
            });
        }
        Ok(f)
    }

    fn raw(grid: MoritaGrid, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.points() {
            return Err(MoritaError::LengthMismatch {
                expected: grid.points(),
                found: samples.len(),
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn from_fn(grid: MoritaGrid, f: impl Fn(f64) -> Complex64) -> Result<Self> {
        Self::new(grid, (0..grid.points()).map(|s| f(grid.x(s))).collect())
    }

    pub fn grid(&self) -> MoritaGrid {
        self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// `∫_{|x| > L/4} |f|`.
    pub fn outside_mass(&self) -> f64 {
        let h = self.grid.spacing();
        (0..self.samples.len())
            .filter(|&s| self.grid.outside(s))
            .map(|s| self.samples[s].norm() * h)
            .sum()
    }

    pub fn l1_norm(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).sum::<f64>() * self.grid.spacing()
    }

    /// `‖f − g‖₁`.
    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        check_grid(self.grid, other.grid)?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .sum::<f64>()
            * self.grid.spacing())
    }
}

/// `a ∈ 𝒮(ℤ)` on `{−N, …, N}`.
#[derive(Clone, Debug, PartialEq)]
pub struct SequenceFunction {
    cutoff: usize,
    values: Vec<Complex64>,
}

impl SequenceFunction {
    pub fn new(cutoff: usize, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != 2 * cutoff + 1 {
            return Err(MoritaError::LengthMismatch {
                expected: 2 * cutoff + 1,
                found: values.len(),
            });
        }
        let tail = values[0].norm().max(values[2 * cutoff].norm());
        if cutoff > 0 && tail >= DECAY_TOL {
            return Err(MoritaError::SequenceTail(tail));
        }
        Ok(Self { cutoff, values })
    }

    pub fn from_fn(cutoff: usize, f: impl Fn(i64) -> Complex64) -> Result<Self> {
        let c = cutoff as i64;
        Self::new(cutoff, (-c..=c).map(f).collect())
    }

    /// `δ_n`.
    pub fn delta(cutoff: usize, n: i64) -> Self {
        let c = cutoff as i64;
        let values = (-c..=c)
            .map(|m| {
                if m == n {
                    Complex64::new(1.0, 0.0)
                } else {
                    zero()
                }
            })
            .collect();
        Self { cutoff, values }
    }

    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    pub fn get(&self, n: i64) -> Complex64 {
        let c = self.cutoff as i64;
        if n.abs() > c {
            zero()
        } else {
            self.values[(n + c) as usize]
        }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    fn support(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        let c = self.cutoff as i64;
        (-c..=c)
            .map(|n| (n, self.get(n)))
            .filter(|(_, v)| v.norm() != 0.0)
    }

    /// Convolution product.
    pub fn convolve(&self, other: &Self) -> Self {
        let cutoff = self.cutoff + other.cutoff;
        let c = cutoff as i64;
        let values = (-c..=c)
            .map(|n| {
                self.support()
                    .map(|(m, a)| a * other.get(n - m))
                    .sum::<Complex64>()
            })
            .collect();
        Self { cutoff, values }
    }

    /// `sup_n |a(n) − b(n)|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let c = self.cutoff.max(other.cutoff) as i64;
        (-c..=c)
            .map(|n| (self.get(n) - other.get(n)).norm())
            .fold(0.0, f64::max)
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

/// `F ∈ 𝒮(ℝ × 𝕋)`, row-major with `t` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct CylFunction {
    grid: MoritaGrid,
    samples: Vec<Complex64>,
}

impl CylFunction {
    pub fn new(grid: MoritaGrid, samples: Vec<Complex64>) -> Result<Self> {
        let f = Self::raw(grid, samples)?;
        let mass = f.outside_mass();
        if mass >= DECAY_TOL {
            return Err(MoritaError::Certificate {
                what: "cylinder function",
                mass,
            });
        }
        Ok(f)
    }

    fn raw(grid: MoritaGrid, samples: Vec<Complex64>) -> Result<Self> {
        let n = grid.points() * grid.t_points();
        if samples.len() != n {
            return Err(MoritaError::LengthMismatch {
                expected: n,
                found: samples.len(),
            });
        }
        Ok(Self { grid, samples })
    }

    pub fn from_fn(grid: MoritaGrid, f: impl Fn(f64, f64) -> Complex64 + Sync) -> Result<Self> {
        let t = grid.t_points();
        let samples = (0..grid.points() * t)
            .into_par_iter()
            .map(|i| f(grid.x(i / t), grid.t(i % t)))
            .collect();
        Self::new(grid, samples)
    }

    pub fn grid(&self) -> MoritaGrid {
        self.grid
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    /// `F(x_s, t_j)`.
    pub fn at(&self, s: usize, j: usize) -> Complex64 {
        self.samples[s * self.grid.t_points() + j]
    }

    fn at_shift(&self, s: i64, j: usize) -> Complex64 {
        match self.grid.line_index(s) {
            Some(s) => self.at(s, j),
            None => zero(),
        }
    }

    /// `∫dt ∫_{|x| > L/4} dx |F|`.
    pub fn outside_mass(&self) -> f64 {
        let t = self.grid.t_points();
        let w = self.grid.spacing() / t as f64;
        (0..self.grid.points())
            .filter(|&s| self.grid.outside(s))
            .map(|s| (0..t).map(|j| self.at(s, j).norm()).sum::<f64>() * w)
            .sum()
    }

    /// `∫dt ∫dx |F|`.
    pub fn l1_norm(&self) -> f64 {
        self.samples.iter().map(|z| z.norm()).sum::<f64>() * self.grid.spacing()
            / self.grid.t_points() as f64
    }

    pub fn l1_distance(&self, other: &Self) -> Result<f64> {
        check_grid(self.grid, other.grid)?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .sum::<f64>()
            * self.grid.spacing()
            / self.grid.t_points() as f64)
    }
}

fn check_grid(a: MoritaGrid, b: MoritaGrid) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(MoritaError::GridMismatch)
    }
}

/// `(F∗G)(x,t) = ∫dy F(y,t) G(x−y, t−π(y))`.
pub fn appendix_product(f: &CylFunction, g: &CylFunction) -> Result<CylFunction> {
    check_grid(f.grid, g.grid)?;
    let grid = f.grid;
    let (n, t) = (grid.points(), grid.t_points());
    let h = grid.spacing();
    let c = grid.center();
    let rows: Vec<Vec<Complex64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = vec![zero(); t];
            for s in 0..n {
                let Some(xy) = grid.line_index(i as i64 - s as i64 + c) else {
                    continue;
                };
                let shift = grid.t_index(s as i64);
                for (j, out) in row.iter_mut().enumerate() {
                    let jj = (j + t - shift) % t;
                    *out += f.at(s, j) * g.at(xy, jj);
                }
            }
            row.iter_mut().for_each(|v| *v *= h);
            row
        })
        .collect();
    CylFunction::raw(grid, rows.concat())
}

/// Which action of [`module_action`].
#[derive(Clone, Copy, Debug)]
pub enum Action<'a> {
    /// `(F·f)(x) = ∫dy F(x−y, π(x)) f(y)`.
    COnLeft(&'a CylFunction),
    /// `(f·a)(x) = Σₙ a(n) f(x+n)`.
    ZOnRight(&'a SequenceFunction),
    /// `(f·F)(x) = ∫dy F(y−x, π(y)) f(y)`.
    COnRight(&'a CylFunction),
    /// `(a·f)(x) = Σₙ a(n) f(x−n)`.
    ZOnLeft(&'a SequenceFunction),
}

pub fn module_action(action: Action<'_>, f: &LineFunction) -> Result<LineFunction> {
    let grid = f.grid;
    let n = grid.points();
    let h = grid.spacing();
    let c = grid.center();
    let per = grid.per_unit as i64;
    let samples: Vec<Complex64> = match action {
        Action::COnLeft(big) => {
            check_grid(big.grid, grid)?;
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let j = grid.t_index(i as i64);
                    (0..n)
                        .map(|s| big.at_shift(i as i64 - s as i64 + c, j) * f.samples[s])
                        .sum::<Complex64>()
                        * h
                })
                .collect()
        }
        Action::COnRight(big) => {
            check_grid(big.grid, grid)?;
            (0..n)
                .into_par_iter()
                .map(|i| {
                    (0..n)
                        .map(|s| {
                            big.at_shift(s as i64 - i as i64 + c, grid.t_index(s as i64))
                                * f.samples[s]
                        })
                        .sum::<Complex64>()
                        * h
                })
                .collect()
        }
        Action::ZOnRight(a) | Action::ZOnLeft(a) => {
            let sign = if matches!(action, Action::ZOnRight(_)) {
                1
            } else {
                -1
            };
            let terms: Vec<(i64, Complex64)> = a.support().collect();
            // samples f(y) that no output point reaches
            let mut lost = 0.0;
            let mut total = 0.0;
            for &(m, v) in &terms {
                let shift = sign * m * per;
                total += v.norm() * f.l1_norm();
                lost += v.norm()
                    * (0..n)
                        .filter(|&s| grid.line_index(s as i64 - shift).is_none())
                        .map(|s| f.samples[s].norm() * h)
                        .sum::<f64>();
            }
            if lost > 1e-8 * total.max(f64::MIN_POSITIVE) {
                return Err(MoritaError::ShiftOutOfBox(lost));
            }
            (0..n)
                .map(|i| {
                    terms
                        .iter()
                        .filter_map(|&(m, v)| {
                            grid.line_index(i as i64 + sign * m * per)
                                .map(|s| v * f.samples[s])
                        })
                        .sum()
                })
                .collect()
        }
    };
    LineFunction::raw(grid, samples)
}

fn phi_raw(grid: MoritaGrid, f: &[Complex64], g: &[Complex64]) -> Vec<Complex64> {
    let (n, t) = (grid.points() as i64, grid.t_points() as i64);
    let c = grid.center();
    let reach = n / t + 2;
    (0..n * t)
        .into_par_iter()
        .map(|idx| {
            let (i, j) = (idx / t, idx % t);
            let mut acc = zero();
            for m in -reach..=reach {
                // t − n and t − x − n on the line
                let s1 = j - m * t + c;
                let s2 = j - (i - c) - m * t + c;
                if let (Some(a), Some(b)) = (grid.line_index(s1), grid.line_index(s2)) {
                    acc += f[a] * g[b];
                }
            }
            acc
        })
        .collect()
}

/// `φ̃(f,g)(x,t) = Σₙ f(t−n) g(t−x−n)`.
pub fn phi_pairing(f: &LineFunction, g: &LineFunction) -> Result<CylFunction> {
    check_grid(f.grid, g.grid)?;
    CylFunction::raw(f.grid, phi_raw(f.grid, &f.samples, &g.samples))
}

/// `ψ̃(f,g)(n) = ∫dx f(x) g(x−n)`, on `|n| ≤ L`.
pub fn psi_pairing(f: &LineFunction, g: &LineFunction) -> Result<SequenceFunction> {
    check_grid(f.grid, g.grid)?;
    let grid = f.grid;
    let cutoff = 2 * grid.half_length;
    let per = grid.per_unit as i64;
    let h = grid.spacing();
    let c = cutoff as i64;
    let values = (-c..=c)
        .map(|m| {
            (0..grid.points())
                .filter_map(|s| {
                    grid.line_index(s as i64 - m * per)
                        .map(|b| f.samples[s] * g.samples[b])
                })
                .sum::<Complex64>()
                * h
        })
        .collect();
    Ok(SequenceFunction { cutoff, values })
}

/// `e_λ(x,t) = √(λ/π) e^{−λx²}`.
pub fn approximate_identity(grid: MoritaGrid, lambda: f64) -> Result<CylFunction> {
    if !(lambda > 0.0) {
        return Err(MoritaError::InvalidLambda(lambda));
    }
    let norm = (lambda / PI).sqrt();
    CylFunction::from_fn(grid, |x, _| {
        Complex64::new(norm * (-lambda * x * x).exp(), 0.0)
    })
}

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

/// `f = ψ / Σₙ ψ(·−n)` for the bump `ψ(x) = exp(−1/(1−x²))`, so that `Σₙ f(t−n) = 1`.
pub fn partition_function(grid: MoritaGrid) -> Result<LineFunction> {
    LineFunction::from_fn(grid, |x| {
        let total: f64 = (-3..=3).map(|n| bump(x - n as f64)).sum();
        Complex64::new(bump(x) / total, 0.0)
    })
}

/// `max_t |Σₙ f(t−n) − 1|` over the grid points of `[0, 1)`.
pub fn partition_deviation(f: &LineFunction) -> f64 {
    let grid = f.grid;
    let (t, c) = (grid.t_points() as i64, grid.center());
    let reach = grid.points() as i64 / t + 1;
    (0..t)
        .map(|j| {
            let sum: Complex64 = (-reach..=reach)
                .filter_map(|m| grid.line_index(j - m * t + c).map(|s| f.samples[s]))
                .sum();
            (sum - 1.0).norm()
        })
        .fold(0.0, f64::max)
}

/// A bump supported in `(0, 1)` with `∫|f|² = 1` by the grid quadrature.
pub fn witness_f0(grid: MoritaGrid) -> Result<LineFunction> {
    let raw = LineFunction::from_fn(grid, |x| Complex64::new(bump(2.0 * x - 1.0), 0.0))?;
    let norm = (raw.samples.iter().map(|z| z.norm_sqr()).sum::<f64>() * grid.spacing()).sqrt();
    LineFunction::new(grid, raw.samples.iter().map(|z| z / norm).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub struct SurjectivityWitness {
    /// Numerical rank of the sampled `H`.
    pub rank: usize,
    pub singular_values: Vec<f64>,
    /// `φ(H) = Σ_k σ_k φ̃(u_k, v_k)`.
    pub reconstruction: CylFunction,
    /// `‖φ(H) − F‖₁`.
    pub l1_error: f64,
}

/// `H(x,y) = f(x) F(x−y, π(x))` with `f` the partition function, decomposed by SVD.
pub fn surjectivity_witness(big: &CylFunction) -> Result<SurjectivityWitness> {
    let grid = big.grid;
    if big.outside_mass() >= DECAY_TOL {
        return Err(MoritaError::Certificate {
            what: "cylinder function",
            mass: big.outside_mass(),
        });
    }
    let f = partition_function(grid)?;
    let n = grid.points();
    let c = grid.center();
    let rows: Vec<usize> = (0..n).filter(|&s| f.samples[s].norm() > 0.0).collect();
    let h = faer::Mat::<Complex64>::from_fn(rows.len(), n, |r, s| {
        let x = rows[r];
        f.samples[x] * big.at_shift(x as i64 - s as i64 + c, grid.t_index(x as i64))
    });
    let svd = h
        .thin_svd()
        .map_err(|e| MoritaError::Solver(format!("{e:?}")))?;
    let sv: Vec<f64> = (0..rows.len().min(n))
        .map(|k| svd.S().column_vector()[k].re)
        .collect();
    let smax = sv.iter().fold(0.0f64, |m, &v| m.max(v));
    let rank = sv.iter().filter(|&&v| v > 1e-13 * smax).count();
    let mut recon = vec![zero(); n * grid.t_points()];
    let (u, v) = (svd.U(), svd.V());
    for k in 0..rank {
        let mut uk = vec![zero(); n];
        for (r, &x) in rows.iter().enumerate() {
            uk[x] = u[(r, k)] * sv[k];
        }
        let vk: Vec<Complex64> = (0..n).map(|s| v[(s, k)].conj()).collect();
        for (acc, p) in recon.iter_mut().zip(phi_raw(grid, &uk, &vk)) {
            *acc += p;
        }
    }
    let reconstruction = CylFunction::raw(grid, recon)?;
    let l1_error = reconstruction.l1_distance(big)?;
    Ok(SurjectivityWitness {
        rank,
        singular_values: sv,
        reconstruction,
        l1_error,
    })
}

/// Spectral derivative of a periodic sample vector.
fn spectral_derivative(data: &[Complex64], period: f64, order: u32) -> Vec<Complex64> {
    if order == 0 {
        return data.to_vec();
    }
    let n = data.len();
    let mut planner = FftPlanner::new();
    let mut buf = data.to_vec();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, v) in buf.iter_mut().enumerate() {
        let freq = if k <= n / 2 {
            k as i64
        } else {
            k as i64 - n as i64
        };
        if 2 * k == n && order % 2 == 1 {
            *v = zero();
            continue;
        }
        let w = Complex64::new(0.0, 2.0 * PI * freq as f64 / period);
        *v *= w.powu(order) / n as f64;
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    buf
}

fn check_order(o: u32) -> Result<()> {
    if o > 4 {
        Err(MoritaError::InvalidOrder(o))
    } else {
        Ok(())
    }
}

/// `p^{α,β,γ}(F) = ∫dt∫dx (1+|x|)^α |∂_x^β ∂_t^γ F|`.
pub fn seminorm_p(big: &CylFunction, alpha: f64, beta: u32, gamma: u32) -> Result<f64> {
    check_order(beta)?;
    check_order(gamma)?;
    let grid = big.grid;
    let (n, t) = (grid.points(), grid.t_points());
    let mut data = big.samples.clone();
    if gamma > 0 {
        data = data
            .chunks(t)
            .flat_map(|row| spectral_derivative(row, 1.0, gamma))
            .collect();
    }
    if beta > 0 {
        let mut out = data.clone();
        for j in 0..t {
            let col: Vec<Complex64> = (0..n).map(|s| data[s * t + j]).collect();
            for (s, v) in spectral_derivative(&col, grid.length(), beta)
                .into_iter()
                .enumerate()
            {
                out[s * t + j] = v;
            }
        }
        data = out;
    }
    let w = grid.spacing() / t as f64;
    Ok((0..n)
        .map(|s| {
            let weight = (1.0 + grid.x(s).abs()).powf(alpha);
            (0..t).map(|j| data[s * t + j].norm()).sum::<f64>() * weight * w
        })
        .sum())
}

/// `q^α(a) = Σₙ (1+|n|)^α |a(n)|`.
pub fn seminorm_q(a: &SequenceFunction, alpha: f64) -> f64 {
    a.support()
        .map(|(n, v)| (1.0 + n.abs() as f64).powf(alpha) * v.norm())
        .sum()
}

/// `ν^{α,β}(f) = ∫dx (1+|x|)^α |∂^β f|`.
pub fn seminorm_nu(f: &LineFunction, alpha: f64, beta: u32) -> Result<f64> {
    check_order(beta)?;
    let grid = f.grid;
    let d = spectral_derivative(&f.samples, grid.length(), beta);
    Ok(d.iter()
        .enumerate()
        .map(|(s, v)| (1.0 + grid.x(s).abs()).powf(alpha) * v.norm())
        .sum::<f64>()
        * grid.spacing())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn grid() -> MoritaGrid {
        MoritaGrid::new(8, 16).unwrap()
    }

    fn gauss(g: MoritaGrid, x0: f64, w: f64) -> LineFunction {
        LineFunction::from_fn(g, |x| c((-PI * (x - x0).powi(2) / (w * w)).exp())).unwrap()
    }

    fn cyl(g: MoritaGrid, x0: f64, w: f64, amp: f64, t0: f64) -> CylFunction {
        CylFunction::from_fn(g, move |x, t| {
            let env = (-PI * (x - x0).powi(2) / (w * w)).exp();
            Complex64::new(
                env * (1.0 + amp * (2.0 * PI * (t - t0)).cos()),
                env * amp * (4.0 * PI * t).sin() * 0.5,
            )
        })
        .unwrap()
    }

    fn seq(values: &[(i64, f64)]) -> SequenceFunction {
        SequenceFunction::from_fn(3, |n| {
            values
                .iter()
                .find(|(m, _)| *m == n)
                .map_or(Complex64::new(0.0, 0.0), |v| c(v.1))
        })
        .unwrap()
    }

    #[test]
    fn grid_and_certificates() {
        assert!(MoritaGrid::new(8, 15).is_err());
        let g = grid();
        assert_eq!(g.points(), 256);
        assert!((g.x(0) + 8.0).abs() < 1e-15);
        assert!(matches!(
            LineFunction::from_fn(g, |x| c((-x * x / 4.0).exp())),
            Err(MoritaError::Certificate { .. })
        ));
        assert!(matches!(
            approximate_identity(g, -1.0),
            Err(MoritaError::InvalidLambda(_))
        ));
    }

    #[test]
    fn sequence_actions_are_shifts() {
        let g = grid();
        let f = gauss(g, 0.3, 1.0);
        let unit = SequenceFunction::delta(3, 0);
        assert_eq!(module_action(Action::ZOnRight(&unit), &f).unwrap(), f);
        assert_eq!(module_action(Action::ZOnLeft(&unit), &f).unwrap(), f);
        let one = SequenceFunction::delta(3, 1);
        let shifted = module_action(Action::ZOnRight(&one), &f).unwrap();
        let target =
            LineFunction::from_fn(g, |x| c((-PI * (x + 1.0 - 0.3).powi(2)).exp())).unwrap();
        assert!(shifted.l1_distance(&target).unwrap() < 1e-12);
        let far = SequenceFunction::delta(20, 10);
        assert!(matches!(
            module_action(Action::ZOnRight(&far), &f),
            Err(MoritaError::ShiftOutOfBox(_))
        ));
    }

    #[test]
    fn t_independent_action_is_convolution() {
        let g = grid();
        let big = CylFunction::from_fn(g, |x, _| c((-PI * x * x).exp())).unwrap();
        let f = gauss(g, 0.5, 0.7);
        let out = module_action(Action::COnLeft(&big), &f).unwrap();
        // e^{-πx²} ⊛ e^{-π(x-a)²/w²} in closed form
        let w2: f64 = 0.49;
        let s2 = 1.0 + w2;
        let oracle = LineFunction::from_fn(g, |x| {
            c((w2 / s2).sqrt() * (-PI * (x - 0.5).powi(2) / s2).exp())
        })
        .unwrap();
        assert!(out.l1_distance(&oracle).unwrap() < 1e-8);
    }

    #[test]
    fn t_independent_product_is_convolution() {
        let g = grid();
        let a = CylFunction::from_fn(g, |x, _| c((-PI * x * x).exp())).unwrap();
        let b = CylFunction::from_fn(g, |x, _| c((-PI * (x - 0.25).powi(2)).exp())).unwrap();
        let p = appendix_product(&a, &b).unwrap();
        let oracle = CylFunction::from_fn(g, |x, _| {
            c((0.5f64).sqrt() * (-PI * (x - 0.25).powi(2) / 2.0).exp())
        })
        .unwrap();
        assert!(p.l1_distance(&oracle).unwrap() < 1e-10);
    }

    #[test]
    fn product_is_associative_and_module_axioms_hold() {
        let g = grid();
        let a = cyl(g, 0.1, 0.9, 0.4, 0.2);
        let b = cyl(g, -0.3, 1.1, -0.3, 0.7);
        let d = cyl(g, 0.4, 0.8, 0.5, 0.0);
        let f = gauss(g, 0.2, 1.2);
        let left = appendix_product(&appendix_product(&a, &b).unwrap(), &d).unwrap();
        let right = appendix_product(&a, &appendix_product(&b, &d).unwrap()).unwrap();
        assert!(left.l1_distance(&right).unwrap() < 1e-10 * left.l1_norm());

        let ab = appendix_product(&a, &b).unwrap();
        let lhs = module_action(Action::COnLeft(&ab), &f).unwrap();
        let rhs = module_action(
            Action::COnLeft(&a),
            &module_action(Action::COnLeft(&b), &f).unwrap(),
        )
        .unwrap();
        assert!(lhs.l1_distance(&rhs).unwrap() < 1e-10 * lhs.l1_norm());

        let s1 = seq(&[(0, 1.0), (1, 0.5), (-2, 0.25)]);
        let s2 = seq(&[(1, -0.3), (-1, 0.7)]);
        let lhs = module_action(Action::ZOnRight(&s1.convolve(&s2)), &f).unwrap();
        let rhs = module_action(
            Action::ZOnRight(&s2),
            &module_action(Action::ZOnRight(&s1), &f).unwrap(),
        )
        .unwrap();
        assert!(lhs.l1_distance(&rhs).unwrap() < 1e-12);

        let lhs = module_action(
            Action::ZOnRight(&s1),
            &module_action(Action::COnLeft(&a), &f).unwrap(),
        )
        .unwrap();
        let rhs = module_action(
            Action::COnLeft(&a),
            &module_action(Action::ZOnRight(&s1), &f).unwrap(),
        )
        .unwrap();
        assert!(lhs.l1_distance(&rhs).unwrap() < 1e-10 * lhs.l1_norm());
    }

    #[test]
    fn pairings_are_balanced_and_interchange() {
        let g = grid();
        let f = gauss(g, 0.2, 1.0);
        let k = gauss(g, -0.4, 0.8);
        let h = gauss(g, 0.1, 1.3);
        let a = seq(&[(0, 0.3), (1, 1.0), (-1, -0.6)]);
        let big = cyl(g, 0.0, 1.0, 0.4, 0.3);

        let lhs = phi_pairing(&module_action(Action::ZOnRight(&a), &f).unwrap(), &k).unwrap();
        let rhs = phi_pairing(&f, &module_action(Action::ZOnLeft(&a), &k).unwrap()).unwrap();
        assert!(lhs.l1_distance(&rhs).unwrap() < 1e-10 * lhs.l1_norm());

        let lhs = psi_pairing(&module_action(Action::COnRight(&big), &f).unwrap(), &k).unwrap();
        let rhs = psi_pairing(&f, &module_action(Action::COnLeft(&big), &k).unwrap()).unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-10 * lhs.sup_norm());

        let phi = phi_pairing(&f, &k).unwrap();
        let lhs = module_action(Action::COnLeft(&phi), &h).unwrap();
        let rhs = module_action(Action::ZOnRight(&psi_pairing(&k, &h).unwrap()), &f).unwrap();
        assert!(lhs.l1_distance(&rhs).unwrap() < 1e-10 * lhs.l1_norm());

        let psi = psi_pairing(&f, &k).unwrap();
        let lhs = module_action(Action::ZOnLeft(&psi), &h).unwrap();
        let rhs = module_action(Action::COnRight(&phi_pairing(&k, &h).unwrap()), &f).unwrap();
        assert!(lhs.l1_distance(&rhs).unwrap() < 1e-10 * lhs.l1_norm());
    }

    #[test]
    fn gaussian_psi_closed_form_and_symmetry() {
        let g = grid();
        let f = gauss(g, 0.0, 1.0);
        let psi = psi_pairing(&f, &f).unwrap();
        for n in -4i64..=4 {
            let oracle = (0.5f64).sqrt() * (-PI * (n * n) as f64 / 2.0).exp();
            assert!((psi.get(n) - oracle).norm() < 1e-12, "n={n}");
        }
        let k = gauss(g, 0.3, 0.8);
        let a = psi_pairing(&f, &k).unwrap();
        let b = psi_pairing(&k, &f).unwrap();
        for n in -4i64..=4 {
            assert!((a.get(n) - b.get(-n)).norm() < 1e-14);
        }
        assert!(psi_pairing(&k, &k).unwrap().get(0).re > 0.0);
    }

    #[test]
    fn witnesses() {
        let g = grid();
        let f0 = witness_f0(g).unwrap();
        let psi = psi_pairing(&f0, &f0).unwrap();
        assert!(psi.max_abs_diff(&SequenceFunction::delta(0, 0)) < 1e-12);
        let part = partition_function(g).unwrap();
        assert!(partition_deviation(&part) < 1e-12);
        let e = approximate_identity(g, 10.0).unwrap();
        let w = surjectivity_witness(&e).unwrap();
        assert!(w.l1_error < 1e-8, "{}", w.l1_error);
        assert!(w.rank > 1);
        let big = cyl(g, 0.0, 1.0, 0.4, 0.3);
        let w = surjectivity_witness(&big).unwrap();
        assert!(w.l1_error < 1e-8 * big.l1_norm(), "{}", w.l1_error);
    }

    #[test]
    fn approximate_identity_converges() {
        let g = MoritaGrid::new(12, 32).unwrap();
        let f = gauss(g, 0.1, 1.0);
        let mut last = f64::INFINITY;
        for lambda in [1.0, 10.0, 100.0] {
            let e = approximate_identity(g, lambda).unwrap();
            let mass: f64 = (0..g.points()).map(|s| e.at(s, 0).re).sum::<f64>() * g.spacing();
            assert!((mass - 1.0).abs() < 1e-10);
            let err = module_action(Action::COnLeft(&e), &f)
                .unwrap()
                .l1_distance(&f)
                .unwrap();
            assert!(err < last, "λ={lambda}: {err} ≥ {last}");
            last = err;
        }
    }

    #[test]
    fn seminorms() {
        let g = grid();
        assert_eq!(seminorm_q(&SequenceFunction::delta(2, 0), 0.0), 1.0);
        let f = gauss(g, 0.0, 1.0);
        assert!((seminorm_nu(&f, 0.0, 0).unwrap() - f.l1_norm()).abs() < 1e-15);
        // ∫|f'| = 2 f(0) for a unimodal bump
        assert!((seminorm_nu(&f, 0.0, 1).unwrap() - 2.0).abs() < 1e-2);
        let big =
            CylFunction::from_fn(g, |x, t| c((-PI * x * x).exp() * (2.0 * PI * t).cos())).unwrap();
        // ∫|cos 2πt| dt = 2/π, ∫|∂_t| = 4
        assert!((seminorm_p(&big, 0.0, 0, 0).unwrap() - 2.0 / PI).abs() < 2e-2);
        assert!((seminorm_p(&big, 0.0, 0, 1).unwrap() - 4.0).abs() < 1e-1);
        assert!(matches!(
            seminorm_nu(&f, 0.0, 7),
            Err(MoritaError::InvalidOrder(7))
        ));
    }

    #[test]
    fn submultiplicativity_spot_check_runs() {
        let g = grid();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let mut draw = || {
            cyl(
                g,
                rng.random_range(-0.5..0.5),
                rng.random_range(0.6..1.1),
                rng.random_range(-0.8..0.8),
                rng.random_range(0.0..1.0),
            )
        };
        for _ in 0..3 {
            let (a, b) = (draw(), draw());
            let lhs = seminorm_p(&appendix_product(&a, &b).unwrap(), 0.0, 0, 0).unwrap();
            let rhs = seminorm_p(&a, 0.0, 0, 0).unwrap() * seminorm_p(&b, 0.0, 0, 0).unwrap();
            assert!(lhs.is_finite() && rhs > 0.0);
        }
    }
}
