//! Partial-Fourier picture of the cylinder product and the crossed-product map `Q`.
//!
//! Functions live on `ℝᵈ × 𝕋ᵈ` with the real variable kept on the dual mode lattice (see
//! [`PartialFunction`]). The torus action is `β_x(t) = t + s·x mod 1` with a literal shift
//! parameter `s`; the cylinder product at deformation `ℏ` corresponds to `s = -ℏ/2π`
//! ([`action_from_deformation`]).
//!
//! Shifts in `t` are applied exactly on band-limited data by multiplying torus Fourier
//! coefficients with `exp(2πi n·s)`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use thiserror::Error;

use crate::fourier::{fft_axis, partial_shape, FourierError, Geometry};

pub use crate::fourier::PartialFunction;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CrossedError {
    #[error(transparent)]
    Fourier(#[from] FourierError),
    #[error("crossed products need n = d, got n = {n}, d = {d}")]
    UnequalSplit { n: usize, d: usize },
}

pub type Result<T> = std::result::Result<T, CrossedError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

/// Shift parameter of `β` reproducing the cylinder product at deformation `ℏ`.
pub fn action_from_deformation(hbar: f64) -> f64 {
    -hbar / (2.0 * PI)
}

/// `β_x(t) = t + s·x`, reduced to `[0, 1)` componentwise.
pub fn beta_action(x: &[f64], t: &[f64], s: f64) -> Vec<f64> {
    t.iter()
        .zip(x)
        .map(|(ti, xi)| (ti + s * xi).rem_euclid(1.0))
        .collect()
}

/// Torus Fourier coefficients of every ℝ-mode row, ready for exact shifting.
struct RowSpectra {
    rows: Vec<Vec<Complex64>>,
    shape: Vec<usize>,
    /// Integer frequency of each torus-block entry, per torus axis.
    freqs: Vec<Vec<f64>>,
}

impl RowSpectra {
    fn new(f: &PartialFunction) -> Self {
        let g = f.geometry();
        let n = g.noncompact_dims();
        let shape: Vec<usize> = g.grid_pts()[n..].to_vec();
        let block: usize = shape.iter().product();
        let mut planner = FftPlanner::new();
        let plans: Vec<_> = shape.iter().map(|&s| planner.plan_fft_forward(s)).collect();
        let rows = f
            .samples()
            .par_chunks(block)
            .map(|row| {
                let mut buf = row.to_vec();
                for (axis, p) in plans.iter().enumerate() {
                    fft_axis(&mut buf, &shape, axis, p.as_ref());
                }
                let inv = 1.0 / block as f64;
                buf.iter_mut().for_each(|z| *z *= inv);
                buf
            })
            .collect();
        let freqs = (0..block)
            .map(|mut idx| {
                let mut out = vec![0.0; shape.len()];
                for a in (0..shape.len()).rev() {
                    let s = idx % shape[a];
                    idx /= shape[a];
                    let j = if s <= shape[a] / 2 {
                        s as i64
                    } else {
                        s as i64 - shape[a] as i64
                    };
                    out[a] = j as f64;
                }
                out
            })
            .collect();
        Self { rows, shape, freqs }
    }

    /// Samples of row `r` evaluated at `t + shift` on the torus grid.
    fn shifted(&self, r: usize, shift: &[f64], planner: &mut FftPlanner<f64>) -> Vec<Complex64> {
        let mut buf: Vec<Complex64> = self.rows[r]
            .iter()
            .zip(&self.freqs)
            .map(|(c, n)| {
                let arg: f64 = n.iter().zip(shift).map(|(a, b)| a * b).sum();
                if arg == 0.0 {
                    *c
                } else {
                    c * Complex64::from_polar(1.0, 2.0 * PI * arg)
                }
            })
            .collect();
        for (axis, &s) in self.shape.iter().enumerate() {
            let p = planner.plan_fft_inverse(s);
            fft_axis(&mut buf, &self.shape, axis, p.as_ref());
        }
        buf
    }
}

/// ℝ-mode rows: flat row index ↔ integer labels and physical frequencies.
struct RowIndex {
    half: Vec<i64>,
    strides: Vec<usize>,
    spacing: Vec<f64>,
    len: usize,
}

impl RowIndex {
    fn new(g: &Geometry) -> Self {
        let n = g.noncompact_dims();
        let shape = &partial_shape(g)[..n];
        let mut strides = vec![1; n];
        let mut len = 1;
        for a in (0..n).rev() {
            strides[a] = len;
            len *= shape[a];
        }
        Self {
            half: (0..n).map(|a| g.cutoff(a) as i64).collect(),
            strides,
            spacing: (0..n).map(|a| g.mode_spacing(a)).collect(),
            len,
        }
    }

    fn label(&self, mut r: usize) -> Vec<i64> {
        self.strides
            .iter()
            .zip(&self.half)
            .map(|(&s, &h)| {
                let q = r / s;
                r -= q * s;
                q as i64 - h
            })
            .collect()
    }

    fn index(&self, label: &[i64]) -> Option<usize> {
        let mut idx = 0;
        for (a, &j) in label.iter().enumerate() {
            if j.abs() > self.half[a] {
                return None;
            }
            idx += (j + self.half[a]) as usize * self.strides[a];
        }
        Some(idx)
    }

    fn freq(&self, label: &[i64]) -> Vec<f64> {
        label
            .iter()
            .zip(&self.spacing)
            .map(|(&j, &h)| j as f64 * h)
            .collect()
    }

    fn weight(&self) -> f64 {
        self.spacing.iter().product()
    }
}

fn check_split(g: &Geometry) -> Result<()> {
    if g.noncompact_dims() != g.compact_dims() {
        return Err(CrossedError::UnequalSplit {
            n: g.noncompact_dims(),
            d: g.compact_dims(),
        });
    }
    Ok(())
}

/// Generic twisted convolution
/// `Σ_y w A(y, t + sa(x,y)) B(x-y, t + sb(x,y))` over pairs inside the mode window.
fn twisted_convolution(
    a: &PartialFunction,
    b: &PartialFunction,
    shift_a: impl Fn(&[f64], &[f64]) -> Vec<f64> + Sync,
    shift_b: impl Fn(&[f64], &[f64]) -> Vec<f64> + Sync,
) -> Result<PartialFunction> {
    let g = a.geometry();
    g.check_same(b.geometry())?;
    check_split(g)?;
    let rows = RowIndex::new(g);
    let sa = RowSpectra::new(a);
    let sb = RowSpectra::new(b);
    let block: usize = sa.shape.iter().product();
    let w = rows.weight();
    let out: Vec<Vec<Complex64>> = (0..rows.len)
        .into_par_iter()
        .map(|xr| {
            let mut planner = FftPlanner::new();
            let xl = rows.label(xr);
            let x = rows.freq(&xl);
            let mut acc = vec![Complex64::new(0.0, 0.0); block];
            for yr in 0..rows.len {
                let yl = rows.label(yr);
                let diff: Vec<i64> = xl.iter().zip(&yl).map(|(p, q)| p - q).collect();
                let Some(dr) = rows.index(&diff) else {
                    continue;
                };
                if sa.rows[yr].iter().all(|z| z.norm_sqr() == 0.0)
                    || sb.rows[dr].iter().all(|z| z.norm_sqr() == 0.0)
                {
                    continue;
                }
                let y = rows.freq(&yl);
                let fa = sa.shifted(yr, &shift_a(&x, &y), &mut planner);
                let fb = sb.shifted(dr, &shift_b(&x, &y), &mut planner);
                for ((o, p), q) in acc.iter_mut().zip(&fa).zip(&fb) {
                    *o += p * q;
                }
            }
            acc.iter_mut().for_each(|z| *z *= w);
            acc
        })
        .collect();
    Ok(PartialFunction::new(g.clone(), out.concat())?)
}

/// `(φ́⋆ψ́)(x,t) = ∫dy φ́(y, β_{y-x}(t)) ψ́(x-y, β_y(t))`.
pub fn star_partial(
    phi: &PartialFunction,
    psi: &PartialFunction,
    s: f64,
) -> Result<PartialFunction> {
    twisted_convolution(
        phi,
        psi,
        |x, y| y.iter().zip(x).map(|(yi, xi)| s * (yi - xi)).collect(),
        |_, y| y.iter().map(|yi| s * yi).collect(),
    )
}

/// `(A∗B)(x,t) = ∫dy A(y,t) B(x-y, β_{2y}(t))`.
pub fn crossed_convolution(
    a: &PartialFunction,
    b: &PartialFunction,
    s: f64,
) -> Result<PartialFunction> {
    twisted_convolution(
        a,
        b,
        |_, y| vec![0.0; y.len()],
        |_, y| y.iter().map(|yi| 2.0 * s * yi).collect(),
    )
}

/// `Q(φ́)(x,t) = φ́(x, β_x(t))`; the inverse composes with `β_{-x}`.
pub fn q_map(phi: &PartialFunction, s: f64, direction: Direction) -> Result<PartialFunction> {
    let g = phi.geometry();
    check_split(g)?;
    let rows = RowIndex::new(g);
    let spectra = RowSpectra::new(phi);
    let sign = match direction {
        Direction::Forward => 1.0,
        Direction::Inverse => -1.0,
    };
    let out: Vec<Vec<Complex64>> = (0..rows.len)
        .into_par_iter()
        .map(|r| {
            let mut planner = FftPlanner::new();
            let x = rows.freq(&rows.label(r));
            let shift: Vec<f64> = x.iter().map(|xi| sign * s * xi).collect();
            spectra.shifted(r, &shift, &mut planner)
        })
        .collect();
    Ok(PartialFunction::new(g.clone(), out.concat())?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::{partial_fourier, FourierFunction, Signature};
    use crate::star::{star_cylinder, DeformationParams};
    use rand::{Rng, SeedableRng};

    fn geom() -> Geometry {
        Geometry::with_grid(1, 1, 8.0, vec![48, 16], Signature::Euclidean).unwrap()
    }

    /// Gaussian in the ℝ-mode variable times a trigonometric polynomial of degree ≤ 3 in t.
    fn sample(g: &Geometry, seed: u64) -> PartialFunction {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let c: Vec<Complex64> = (0..7)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let x0: f64 = rng.random_range(-0.3..0.3);
        PartialFunction::from_fn(g.clone(), |x, t| {
            let env = (-4.0 * (x[0] - x0).powi(2)).exp();
            let trig: Complex64 = (-3i64..=3)
                .map(|n| {
                    c[(n + 3) as usize] * Complex64::from_polar(1.0, 2.0 * PI * n as f64 * t[0])
                })
                .sum();
            trig * env
        })
        .unwrap()
    }

    #[test]
    fn beta_examples() {
        assert_eq!(beta_action(&[1.0], &[0.75], 0.5), vec![0.25]);
        assert_eq!(beta_action(&[3.7], &[0.2], 0.0), vec![0.2]);
        let (x, y, t, s) = (0.3, -1.1, 0.6, 0.37);
        let a = beta_action(&[x], &beta_action(&[y], &[t], s), s)[0];
        let b = beta_action(&[x + y], &[t], s)[0];
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn q_map_round_trip_and_fixed_slice() {
        let g = geom();
        let f = sample(&g, 3);
        for s in [0.0, 0.13, -0.71] {
            let q = q_map(&f, s, Direction::Forward).unwrap();
            let back = q_map(&q, s, Direction::Inverse).unwrap();
            assert!(back.max_abs_diff(&f) < 1e-12);
            let row0 = g.cutoff(0);
            let nt = 16;
            for i in 0..nt {
                assert!((q.samples()[row0 * nt + i] - f.samples()[row0 * nt + i]).norm() < 1e-13);
            }
        }
        assert!(q_map(&f, 0.0, Direction::Forward).unwrap().max_abs_diff(&f) < 1e-14);
    }

    #[test]
    fn q_map_matches_pointwise_shift() {
        let g = geom();
        let s = 0.23;
        let f = sample(&g, 5);
        let q = q_map(&f, s, Direction::Forward).unwrap();
        // rebuild the band-limited function analytically from its samples' coefficients
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let c: Vec<Complex64> = (0..7)
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect();
        let x0: f64 = rng.random_range(-0.3..0.3);
        let oracle = PartialFunction::from_fn(g, |x, t| {
            let tt = t[0] + s * x[0];
            let env = (-4.0 * (x[0] - x0).powi(2)).exp();
            let trig: Complex64 = (-3i64..=3)
                .map(|n| c[(n + 3) as usize] * Complex64::from_polar(1.0, 2.0 * PI * n as f64 * tt))
                .sum();
            trig * env
        })
        .unwrap();
        assert!(q.max_abs_diff(&oracle) < 1e-12);
    }

    #[test]
    fn flat_products_are_fixed_t_convolutions() {
        let g = geom();
        let (a, b) = (sample(&g, 1), sample(&g, 2));
        let p = star_partial(&a, &b, 0.0).unwrap();
        let c = crossed_convolution(&a, &b, 0.0).unwrap();
        assert!(p.max_abs_diff(&c) < 1e-13);
        // oracle: direct sum over y at each grid t
        let k = g.cutoff(0) as i64;
        let nt = 16;
        let mut worst: f64 = 0.0;
        for xi in -k..=k {
            for ti in 0..nt {
                let mut acc = Complex64::new(0.0, 0.0);
                for yi in -k..=k {
                    if (xi - yi).abs() > k {
                        continue;
                    }
                    let ay = a.samples()[(yi + k) as usize * nt + ti];
                    let bxy = b.samples()[(xi - yi + k) as usize * nt + ti];
                    acc += ay * bxy / 8.0;
                }
                worst = worst.max((acc - p.samples()[(xi + k) as usize * nt + ti]).norm());
            }
        }
        assert!(worst < 1e-12);
    }

    #[test]
    fn t_independent_inputs_ignore_the_action() {
        let g = geom();
        let f = PartialFunction::from_fn(g.clone(), |x, _| {
            Complex64::new((-3.0 * x[0] * x[0]).exp(), 0.0)
        })
        .unwrap();
        let h =
            PartialFunction::from_fn(g, |x, _| Complex64::new(0.0, (-(x[0] - 0.2).powi(2)).exp()))
                .unwrap();
        let flat = star_partial(&f, &h, 0.0).unwrap();
        assert!(star_partial(&f, &h, 0.4).unwrap().max_abs_diff(&flat) < 1e-13);
        assert!(
            crossed_convolution(&f, &h, 0.4)
                .unwrap()
                .max_abs_diff(&flat)
                < 1e-13
        );
    }

    #[test]
    fn partial_product_matches_cylinder_product() {
        let g = geom();
        let hbar = 0.7;
        let s = action_from_deformation(hbar);
        let make = |seed: u64| {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            FourierFunction::from_label_fn(g.clone(), |l| {
                if l[1].abs() <= 3 {
                    let x = l[0] as f64 / 8.0;
                    Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                        * (-6.0 * x * x).exp()
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .unwrap()
        };
        let (phi, psi) = (make(21), make(22));
        let lhs = partial_fourier(
            &star_cylinder(&phi, &psi, &DeformationParams::cylinder(hbar, 1)).unwrap(),
        )
        .unwrap();
        let rhs = star_partial(
            &partial_fourier(&phi).unwrap(),
            &partial_fourier(&psi).unwrap(),
            s,
        )
        .unwrap();
        assert!(lhs.max_abs_diff(&rhs) < 1e-10 * lhs.sup_norm());
    }

    #[test]
    fn q_is_a_homomorphism() {
        let g = geom();
        for (seed, s) in [(1u64, 0.11), (2, -0.37), (3, 0.9)] {
            let (a, b) = (sample(&g, seed), sample(&g, seed + 100));
            let lhs = q_map(&star_partial(&a, &b, s).unwrap(), s, Direction::Forward).unwrap();
            let rhs = crossed_convolution(
                &q_map(&a, s, Direction::Forward).unwrap(),
                &q_map(&b, s, Direction::Forward).unwrap(),
                s,
            )
            .unwrap();
            assert!(lhs.max_abs_diff(&rhs) < 1e-10 * a.sup_norm() * b.sup_norm());
        }
    }

    #[test]
    fn unequal_split_rejected() {
        let g = Geometry::with_grid(2, 1, 4.0, vec![8, 8, 8], Signature::Euclidean).unwrap();
        let f = PartialFunction::from_fn(g, |_, _| Complex64::new(1.0, 0.0)).unwrap();
        assert_eq!(
            q_map(&f, 0.1, Direction::Forward).unwrap_err(),
            CrossedError::UnequalSplit { n: 2, d: 1 }
        );
    }
}
