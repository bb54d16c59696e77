//! The experiments behind `starcyl run`, one function per experiment.

use std::f64::consts::PI;
use std::time::Instant;

use faer::Mat;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::Config;
use super::report::{Cell, Report, Table};
use super::CliError;
use crate::clifford::{
    build_gammas, krein_self_adjoint_residual, pauli, reflection_to_j, SpacelikeReflection,
};
use crate::cocycle::{
    admissibility_check, chern_character, cocycle_identity_check, de_rham_pairing,
    hochschild_cocycle, mode_mixing_conjugate, AlgebraProduct, CocycleInput, CocycleKind,
    IdentityKind, PairingKind, TrigPoly, Truncation, COMMUTANT_TOL,
};
use crate::crossed::{
    action_from_deformation, crossed_convolution, q_map, star_partial, Direction,
};
use crate::fit::complex_lstsq;
use crate::fourier::{
    forward_transform, partial_fourier, FourierFunction, Geometry, GridFunction, Lattice, NormKind,
    Normed, PartialFunction, Signature,
};
use crate::morita::{
    appendix_product, approximate_identity, module_action, partition_deviation, partition_function,
    phi_pairing, psi_pairing, seminorm_p, surjectivity_witness, witness_f0, Action, CylFunction,
    LineFunction, MoritaGrid, SequenceFunction,
};
use crate::operator::{eigvalsh, DiscreteOperator};
use crate::spectral::{
    build_dirac, nc_integral, sign_commutator_singular_values, sign_operator, standard_krein,
    KernelKind, Ladder, NcIntegralOptions,
};
use crate::star::{
    dirac_slope, involution, regular_representation, star_cylinder, DeformationParams, Side,
};
use crate::Complex64;

type Tables = Result<Vec<Table>, CliError>;

pub const EXPERIMENTS: &[(&str, &str)] = &[
    (
        "star-convergence",
        "slope of the Dirac-condition residual in hbar",
    ),
    (
        "star-identities",
        "associativity, involution and delta-mode commutators",
    ),
    (
        "crossed-isomorphism",
        "Q as a homomorphism; Fourier and partial pictures agree",
    ),
    ("spectra", "Clifford relations, Dirac and Delta_J spectra"),
    (
        "trace-theorem",
        "noncommutative integral against quadrature",
    ),
    (
        "character",
        "Chern character against the Dirac cocycle on the torus",
    ),
    (
        "polyakov-split",
        "wedge and metric parts of the Lorentzian cocycles",
    ),
    (
        "cocycle-identities",
        "cyclicity and Hochschild coboundaries",
    ),
    (
        "admissibility",
        "fundamental symmetries from reflections, and perturbed ones",
    ),
    ("morita", "bimodule actions, pairings and witnesses"),
    ("schatten", "Schatten sums of sign commutators"),
];

pub fn run_experiment(name: &str, cfg: &Config) -> Result<Report, CliError> {
    let tables = match name {
        "star-convergence" => star_convergence(cfg)?,
        "star-identities" => star_identities(cfg)?,
        "crossed-isomorphism" => crossed_isomorphism(cfg)?,
        "spectra" => spectra(cfg)?,
        "trace-theorem" => trace_theorem(cfg)?,
        "character" => character(cfg)?,
        "polyakov-split" => polyakov_split(cfg)?,
        "cocycle-identities" => cocycle_identities(cfg)?,
        "admissibility" => admissibility(cfg)?,
        "morita" => morita(cfg)?,
        "schatten" => schatten(cfg)?,
        _ => return Err(CliError::UnknownExperiment(name.to_string())),
    };
    Ok(Report {
        experiment: name.to_string(),
        config_hash: cfg.hash(),
        seed: cfg.u64("seed")?,
        tables,
    })
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rng(cfg: &Config, stream: u64) -> Result<ChaCha8Rng, CliError> {
    let mut r = ChaCha8Rng::seed_from_u64(cfg.u64("seed")?);
    r.set_stream(stream);
    Ok(r)
}

fn budget_table(budget: f64, elapsed: f64) -> Table {
    let mut t = Table::new("budget", &["check", "budget_s"]);
    t.push(vec!["runtime".into(), budget.into()], elapsed < budget);
    t
}

fn star_convergence(cfg: &Config) -> Tables {
    let start = Instant::now();
    let g = Geometry::with_grid(
        1,
        1,
        cfg.f64("star_convergence.box_length")?,
        vec![
            cfg.usize("star_convergence.grid_x")?,
            cfg.usize("star_convergence.grid_t")?,
        ],
        Signature::Euclidean,
    )?;
    let hbars = cfg.f64_list("star_convergence.hbar_ladder")?;
    let phi = FourierFunction::from_fn(g.clone(), |k| {
        c((-PI * (k[0] * k[0] + k[1] * k[1]) / 2.0).exp(), 0.0)
    })?;
    let psi = FourierFunction::from_fn(g.clone(), |k| {
        c(
            (-PI * ((k[0] - 0.5).powi(2) + (k[1] - 1.0).powi(2)) / 1.5).exp(),
            0.0,
        )
    })?;
    let (slope, runs) = dirac_slope(
        &phi,
        &psi,
        &DeformationParams::cylinder(hbars[0], 1),
        &hbars,
    )?;
    let mut res = Table::new("residuals", &["hbar", "l1_residual", "bound_ratio"]);
    for (h, r) in hbars.iter().zip(&runs) {
        let ok = r.l1.is_finite() && r.l1 > 0.0 && r.bound_ratio.is_finite();
        res.push(vec![(*h).into(), r.l1.into(), r.bound_ratio.into()], ok);
    }
    let target = cfg.f64("star_convergence.slope_target")?;
    let tol = cfg.f64("star_convergence.tol_slope")?;
    let min = cfg.f64("star_convergence.slope_min")?;
    let mut fit = Table::new(
        "fit",
        &["check", "slope", "std_error", "reference", "tolerance"],
    );
    fit.push(
        vec![
            "slope_target".into(),
            slope.value.re.into(),
            slope.std_error.into(),
            target.into(),
            tol.into(),
        ],
        (slope.value.re - target).abs() <= tol,
    );
    fit.push(
        vec![
            "slope_minimum".into(),
            slope.value.re.into(),
            slope.std_error.into(),
            min.into(),
            Cell::Text(String::new()),
        ],
        slope.value.re >= min,
    );
    let elapsed = start.elapsed().as_secs_f64();
    Ok(vec![
        res,
        fit,
        budget_table(cfg.f64("star_convergence.runtime_budget_s")?, elapsed),
    ])
}

/// Random coefficients inside `frac` of every cutoff.
fn random_fourier(
    g: &Geometry,
    rng: &mut ChaCha8Rng,
    frac: f64,
) -> Result<FourierFunction, CliError> {
    let lim: Vec<i64> = g
        .cutoffs()
        .iter()
        .map(|&k| (k as f64 * frac) as i64)
        .collect();
    Ok(FourierFunction::from_label_fn(g.clone(), |l| {
        if l.iter().zip(&lim).all(|(j, h)| j.abs() <= *h) {
            c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        } else {
            c(0.0, 0.0)
        }
    })?)
}

fn star_identities(cfg: &Config) -> Tables {
    let g = Geometry::with_grid(
        1,
        1,
        cfg.f64("star_identities.box_length")?,
        vec![
            cfg.usize("star_identities.grid_x")?,
            cfg.usize("star_identities.grid_t")?,
        ],
        Signature::Euclidean,
    )?;
    let hbar = cfg.f64("star_identities.hbar")?;
    let p = DeformationParams::cylinder(hbar, 1);
    let cases = cfg.usize("star_identities.cases")?;
    let mut r = rng(cfg, 2)?;

    let tol = cfg.f64("star_identities.tol_assoc")?;
    let mut assoc = Table::new("associativity", &["case", "relative_residual", "tolerance"]);
    for i in 0..cases {
        let a = random_fourier(&g, &mut r, 0.25)?;
        let b = random_fourier(&g, &mut r, 0.25)?;
        let d = random_fourier(&g, &mut r, 0.25)?;
        let lhs = star_cylinder(&star_cylinder(&a, &b, &p)?, &d, &p)?;
        let rhs = star_cylinder(&a, &star_cylinder(&b, &d, &p)?, &p)?;
        let scale = a.norm(NormKind::L1) * b.norm(NormKind::L1) * d.norm(NormKind::L1);
        let res = lhs.sub(&rhs)?.norm(NormKind::L1) / scale;
        assoc.push(vec![i.into(), res.into(), tol.into()], res < tol);
    }

    let tol = cfg.f64("star_identities.tol_involution")?;
    let mut inv = Table::new("involution", &["case", "relative_residual", "tolerance"]);
    for i in 0..cases {
        let a = random_fourier(&g, &mut r, 0.5)?;
        let b = random_fourier(&g, &mut r, 0.5)?;
        let lhs = involution(&star_cylinder(&a, &b, &p)?);
        let rhs = star_cylinder(&involution(&b), &involution(&a), &p)?;
        let res = lhs.max_abs_diff(&rhs) / lhs.norm(NormKind::Sup);
        inv.push(vec![i.into(), res.into(), tol.into()], res < tol);
    }

    let tol = cfg.f64("star_identities.tol_delta")?;
    let tg = Geometry::torus(
        2,
        cfg.usize("star_identities.torus_grid")?,
        Signature::Euclidean,
    )?;
    let tp = DeformationParams::torus2(hbar, cfg.f64("star_identities.torus_theta")?);
    let half = (tg.cutoff(0) / 2) as i64;
    let mut delta = Table::new(
        "delta_commutator",
        &["m", "m_prime", "residual", "tolerance"],
    );
    for _ in 0..cases {
        let m = [r.random_range(-half..=half), r.random_range(-half..=half)];
        let mp = [r.random_range(-half..=half), r.random_range(-half..=half)];
        let a = FourierFunction::delta(tg.clone(), &m, c(1.0, 0.0));
        let b = FourierFunction::delta(tg.clone(), &mp, c(1.0, 0.0));
        let comm = star_cylinder(&a, &b, &tp)?.sub(&star_cylinder(&b, &a, &tp)?)?;
        let th = tp.theta_form(&[m[0] as f64, m[1] as f64], &[mp[0] as f64, mp[1] as f64]);
        let expect = FourierFunction::delta(
            tg.clone(),
            &[m[0] + mp[0], m[1] + mp[1]],
            c(0.0, 2.0 * (2.0 * PI * hbar * th).sin()),
        );
        let res = comm.max_abs_diff(&expect);
        delta.push(
            vec![
                format!("{m:?}").into(),
                format!("{mp:?}").into(),
                res.into(),
                tol.into(),
            ],
            res < tol,
        );
    }
    Ok(vec![assoc, inv, delta])
}

fn crossed_isomorphism(cfg: &Config) -> Tables {
    let g = Geometry::with_grid(
        1,
        1,
        cfg.f64("crossed_isomorphism.box_length")?,
        vec![
            cfg.usize("crossed_isomorphism.grid_x")?,
            cfg.usize("crossed_isomorphism.grid_t")?,
        ],
        Signature::Euclidean,
    )?;
    let hbar = cfg.f64("crossed_isomorphism.hbar")?;
    let s = action_from_deformation(hbar);
    let pairs = cfg.usize("crossed_isomorphism.pairs")?;
    let mut r = rng(cfg, 3)?;
    let sample = |r: &mut ChaCha8Rng| -> Result<PartialFunction, CliError> {
        let coef: Vec<Complex64> = (0..7)
            .map(|_| c(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
            .collect();
        let x0: f64 = r.random_range(-0.3..0.3);
        Ok(PartialFunction::from_fn(g.clone(), |x, t| {
            let env = (-4.0 * (x[0] - x0).powi(2)).exp();
            let trig: Complex64 = (-3i64..=3)
                .map(|n| {
                    coef[(n + 3) as usize] * Complex64::from_polar(1.0, 2.0 * PI * n as f64 * t[0])
                })
                .sum();
            trig * env
        })?)
    };

    let tol = cfg.f64("crossed_isomorphism.tol_homomorphism")?;
    let mut hom = Table::new("homomorphism", &["pair", "relative_residual", "tolerance"]);
    for i in 0..pairs {
        let a = sample(&mut r)?;
        let b = sample(&mut r)?;
        let lhs = q_map(&star_partial(&a, &b, s)?, s, Direction::Forward)?;
        let rhs = crossed_convolution(
            &q_map(&a, s, Direction::Forward)?,
            &q_map(&b, s, Direction::Forward)?,
            s,
        )?;
        let res = lhs.max_abs_diff(&rhs) / (a.sup_norm() * b.sup_norm());
        hom.push(vec![i.into(), res.into(), tol.into()], res < tol);
    }

    let tol = cfg.f64("crossed_isomorphism.tol_consistency")?;
    let params = DeformationParams::cylinder(hbar, 1);
    let scale = g.box_length();
    let make = |r: &mut ChaCha8Rng| -> Result<FourierFunction, CliError> {
        Ok(FourierFunction::from_label_fn(g.clone(), |l| {
            if l[1].abs() <= 3 {
                let x = l[0] as f64 / scale;
                c(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)) * (-6.0 * x * x).exp()
            } else {
                c(0.0, 0.0)
            }
        })?)
    };
    let mut cons = Table::new(
        "fourier_vs_partial",
        &["pair", "relative_residual", "tolerance"],
    );
    for i in 0..pairs {
        let phi = make(&mut r)?;
        let psi = make(&mut r)?;
        let lhs = partial_fourier(&star_cylinder(&phi, &psi, &params)?)?;
        let rhs = star_partial(&partial_fourier(&phi)?, &partial_fourier(&psi)?, s)?;
        let res = lhs.max_abs_diff(&rhs) / lhs.sup_norm();
        cons.push(vec![i.into(), res.into(), tol.into()], res < tol);
    }
    Ok(vec![hom, cons])
}

fn spectra(cfg: &Config) -> Tables {
    let tol = cfg.f64("spectra.tol_anticommutator")?;
    let max = cfg.usize("spectra.max_clifford_dim")?;
    let mut cl = Table::new(
        "clifford",
        &["p", "q", "spinor_dim", "residual", "tolerance"],
    );
    for dim in 1..=max {
        for p in 0..=dim {
            let rep = build_gammas(p, dim - p)?;
            let res = rep.anticommutator_residual();
            cl.push(
                vec![
                    p.into(),
                    (dim - p).into(),
                    rep.spinor_dim().into(),
                    res.into(),
                    tol.into(),
                ],
                res <= tol,
            );
        }
    }

    let tol = cfg.f64("spectra.tol_spectrum")?;
    let grid = cfg.usize("spectra.torus_grid")?;
    let mut sp = Table::new("spectra", &["case", "modes", "max_error", "tolerance"]);

    let half = cfg.usize("spectra.euclidean_window")?;
    let lat = Lattice::new(
        Geometry::torus(2, grid, Signature::Euclidean)?,
        vec![half, half],
    )?;
    let rep = build_gammas(0, 2)?;
    let d = build_dirac(&rep, &lat)?;
    let mut expected: Vec<f64> = lat
        .window()
        .labels()
        .flat_map(|l| {
            let r = 2.0 * PI * ((l[0] * l[0] + l[1] * l[1]) as f64).sqrt();
            [r, -r]
        })
        .collect();
    expected.sort_by(f64::total_cmp);
    let got = d.eigenvalues()?;
    let err = got
        .iter()
        .zip(&expected)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    sp.push(
        vec![
            "euclidean_dirac".into(),
            lat.len().into(),
            err.into(),
            tol.into(),
        ],
        err < tol,
    );
    let f = sign_operator(&d)?;
    let sq = f
        .mul(&f)?
        .max_abs_diff(&DiscreteOperator::identity(lat.clone(), 2))?;
    sp.push(
        vec![
            "sign_squared".into(),
            lat.len().into(),
            sq.into(),
            tol.into(),
        ],
        sq < tol,
    );

    let half = cfg.usize("spectra.lorentzian_window")?;
    let lat = Lattice::new(
        Geometry::torus(2, grid, Signature::Lorentzian)?,
        vec![half, half],
    )?;
    let rep = build_gammas(1, 1)?;
    let d = build_dirac(&rep, &lat)?;
    let ks = standard_krein(&rep)?;
    let ksa = krein_self_adjoint_residual(&d, &ks)?;
    sp.push(
        vec![
            "krein_self_adjoint".into(),
            lat.len().into(),
            ksa.into(),
            tol.into(),
        ],
        ksa < tol,
    );
    let (_, delta) = crate::clifford::j_square_delta(&d, &ks)?;
    let mut err: f64 = 0.0;
    let mut multiplicity_ok = true;
    for i in 0..lat.len() {
        let k = lat.frequency(i);
        let target = (1.0 + 4.0 * PI * PI * (k[0] * k[0] + k[1] * k[1])).sqrt();
        let vals = eigvalsh(&delta.diag_block(i))?;
        multiplicity_ok &= vals.len() == 2;
        err = vals.iter().fold(err, |m, v| m.max((v - target).abs()));
    }
    sp.push(
        vec![
            "delta_j_doublets".into(),
            lat.len().into(),
            err.into(),
            tol.into(),
        ],
        err < tol && multiplicity_ok,
    );
    Ok(vec![cl, sp])
}

fn bump(x: f64) -> f64 {
    if x.abs() < 1.0 {
        (-1.0 / (1.0 - x * x)).exp()
    } else {
        0.0
    }
}

fn trace_theorem(cfg: &Config) -> Tables {
    let mut t = Table::new(
        "integrals",
        &[
            "case",
            "operator_dim",
            "estimate",
            "std_error",
            "oracle",
            "relative_error",
            "tolerance",
        ],
    );
    let mut add = |name: &str, r: &crate::spectral::NcIntegral, oracle: f64, tol: f64| {
        let rel = (r.value.value.re - oracle).abs() / oracle.abs();
        t.push(
            vec![
                name.into(),
                r.operator_dim.into(),
                r.value.value.re.into(),
                r.value.std_error.into(),
                oracle.into(),
                rel.into(),
                tol.into(),
            ],
            rel < tol,
        );
    };

    let start = Instant::now();
    let w = cfg.usize("trace_theorem.scalar_window")?;
    let g = Geometry::torus(2, 2 * w + 4, Signature::Euclidean)?;
    let r = nc_integral(
        &GridFunction::constant(g, c(1.0, 0.0)),
        &NcIntegralOptions {
            kind: KernelKind::ScalarLaplacian,
            window: vec![w, w],
            ladder: Ladder::default(),
            reflection: None,
        },
    )?;
    let elapsed = start.elapsed().as_secs_f64();
    add(
        "torus_scalar_constant",
        &r,
        1.0,
        cfg.f64("trace_theorem.tol_scalar")?,
    );

    let w = cfg.usize("trace_theorem.lorentzian_window")?;
    let g = Geometry::torus(2, 2 * w + 4, Signature::Lorentzian)?;
    let r = nc_integral(
        &GridFunction::constant(g, c(1.0, 0.0)),
        &NcIntegralOptions {
            kind: KernelKind::LorentzianDeltaJ,
            window: vec![w, w],
            ladder: Ladder::default(),
            reflection: None,
        },
    )?;
    add(
        "torus_lorentzian_constant",
        &r,
        1.0,
        cfg.f64("trace_theorem.tol_lorentzian")?,
    );

    // a bump of half-width L/4 times a positive profile in t
    let l = cfg.f64("trace_theorem.bump_box_length")?;
    let win = cfg.usize_list("trace_theorem.bump_window")?;
    if win.len() != 2 {
        return Err(super::config::ConfigError::InvalidField {
            field: "trace_theorem.bump_window".into(),
            reason: "needs two half-widths".into(),
        }
        .into());
    }
    let grid_x = (4 * win[0] + 4).next_power_of_two();
    let grid_t = (4 * win[1] + 4).next_power_of_two();
    let g = Geometry::with_grid(1, 1, l, vec![grid_x, grid_t], Signature::Euclidean)?;
    let f = GridFunction::from_fn(g, |x| {
        let v = bump(4.0 * x[0] / l) * (1.0 + 0.3 * (2.0 * PI * x[1]).cos()).powi(2);
        c(v, 0.0)
    })?;
    let oracle = f.integral().re;
    let r = nc_integral(
        &f,
        &NcIntegralOptions {
            kind: KernelKind::ScalarLaplacian,
            window: win,
            ladder: Ladder::default(),
            reflection: None,
        },
    )?;
    add(
        "cylinder_bump",
        &r,
        oracle,
        cfg.f64("trace_theorem.tol_bump")?,
    );
    Ok(vec![
        t,
        budget_table(cfg.f64("trace_theorem.runtime_budget_s")?, elapsed),
    ])
}

fn monomial(l: [i64; 2]) -> TrigPoly {
    TrigPoly::monomial(&l, c(1.0, 0.0))
}

/// `(e_{-p1-p2}, e_{p1}, e_{p2})`.
fn triple(p1: [i64; 2], p2: [i64; 2]) -> Vec<TrigPoly> {
    vec![
        monomial([-p1[0] - p2[0], -p1[1] - p2[1]]),
        monomial(p1),
        monomial(p2),
    ]
}

const CHARACTER_TRIPLES: [([i64; 2], [i64; 2]); 6] = [
    ([1, 0], [0, 1]),
    ([1, 1], [0, 1]),
    ([2, 0], [1, 1]),
    ([1, -1], [2, 1]),
    ([2, 1], [-1, 1]),
    ([1, 2], [1, 0]),
];

fn character(cfg: &Config) -> Tables {
    let outer = cfg.usize("character.outer")?;
    let g = Geometry::torus(2, 2 * outer + 4, Signature::Euclidean)?;
    let quad = Geometry::torus(2, 32, Signature::Euclidean)?;
    let rep = build_gammas(0, 2)?;
    let tol = cfg.f64("character.tol_match")?;
    let mut t = Table::new(
        "triples",
        &[
            "p1",
            "p2",
            "tau_re",
            "tau_im",
            "psi_re",
            "psi_im",
            "psi_std_error",
            "wedge",
            "c2_re",
            "c2_im",
            "relative_gap",
            "tolerance",
        ],
    );
    let mut taus = Vec::new();
    let mut wedges = Vec::new();
    let mut c2s = Vec::new();
    for (p1, p2) in CHARACTER_TRIPLES {
        let entries = triple(p1, p2);
        let input = CocycleInput::new(
            g.clone(),
            entries.clone(),
            None,
            Truncation::double(vec![outer, outer]),
        )?;
        let tau = chern_character(&input, &rep)?;
        let psi = hochschild_cocycle(CocycleKind::Dirac, &input, &rep, &Ladder::default())?;
        let wedge = de_rham_pairing(&entries, &quad, PairingKind::Wedge, None)?;
        let c2 = tau / wedge;
        let gap = (psi.value.value - tau).norm() / tau.norm();
        t.push(
            vec![
                format!("{p1:?}").into(),
                format!("{p2:?}").into(),
                tau.re.into(),
                tau.im.into(),
                psi.value.value.re.into(),
                psi.value.value.im.into(),
                psi.value.std_error.into(),
                wedge.re.into(),
                c2.re.into(),
                c2.im.into(),
                gap.into(),
                tol.into(),
            ],
            gap < tol,
        );
        taus.push(tau);
        wedges.push(wedge);
        c2s.push(c2);
    }
    let (coef, _) = complex_lstsq(&[wedges], &taus)?;
    let spread = c2s
        .iter()
        .flat_map(|a| c2s.iter().map(move |b| (a - b).norm()))
        .fold(0.0, f64::max)
        / coef[0].norm();
    let tol = cfg.f64("character.tol_spread")?;
    let mut fit = Table::new("fit", &["check", "value_re", "value_im", "reference"]);
    fit.push(
        vec![
            "triples".into(),
            (c2s.len() as f64).into(),
            0.0.into(),
            5.0.into(),
        ],
        c2s.len() >= 5,
    );
    fit.push(
        vec![
            "c2".into(),
            coef[0].re.into(),
            coef[0].im.into(),
            Cell::Text(String::new()),
        ],
        coef[0].norm().is_finite() && coef[0].norm() > 0.0,
    );
    fit.push(
        vec![
            "c2_relative_spread".into(),
            spread.into(),
            0.0.into(),
            tol.into(),
        ],
        spread < tol,
    );
    Ok(vec![t, fit])
}

const SPLIT_TRIPLES: [([i64; 2], [i64; 2]); 7] = [
    ([1, 0], [0, 1]),
    ([1, 1], [1, -1]),
    ([1, 0], [1, 0]),
    ([1, 1], [0, 1]),
    ([2, 0], [1, 1]),
    ([1, -1], [2, 1]),
    ([0, 1], [0, 2]),
];

fn polyakov_split(cfg: &Config) -> Tables {
    let outer = cfg.usize("polyakov_split.outer")?;
    let g = Geometry::torus(2, 2 * outer + 4, Signature::Lorentzian)?;
    let quad = Geometry::torus(2, 32, Signature::Lorentzian)?;
    let rep = build_gammas(1, 1)?;
    let mut t = Table::new(
        "triples",
        &[
            "p1",
            "p2",
            "wedge",
            "metric",
            "psi_d_re",
            "psi_d_im",
            "psi_delta_j_re",
            "psi_delta_j_im",
            "psi_delta_j_std_error",
        ],
    );
    let (mut w, mut m, mut yd, mut yj) = (Vec::new(), Vec::new(), Vec::new(), Vec::new());
    for (p1, p2) in SPLIT_TRIPLES {
        let entries = triple(p1, p2);
        let input = CocycleInput::new(
            g.clone(),
            entries.clone(),
            None,
            Truncation::double(vec![outer, outer]),
        )?;
        let d = hochschild_cocycle(CocycleKind::Dirac, &input, &rep, &Ladder::default())?;
        let dj = hochschild_cocycle(CocycleKind::DeltaJ, &input, &rep, &Ladder::default())?;
        let wedge = de_rham_pairing(&entries, &quad, PairingKind::Wedge, None)?;
        let metric = de_rham_pairing(&entries, &quad, PairingKind::Metric, None)?;
        let ok = [
            d.value.value.norm(),
            dj.value.value.norm(),
            dj.value.std_error,
        ]
        .iter()
        .all(|x| x.is_finite());
        t.push(
            vec![
                format!("{p1:?}").into(),
                format!("{p2:?}").into(),
                wedge.re.into(),
                metric.re.into(),
                d.value.value.re.into(),
                d.value.value.im.into(),
                dj.value.value.re.into(),
                dj.value.value.im.into(),
                dj.value.std_error.into(),
            ],
            ok,
        );
        w.push(wedge);
        m.push(metric);
        yd.push(d.value.value);
        yj.push(dj.value.value);
    }
    let cols = [w, m];
    let (cd, rd) = complex_lstsq(&cols, &yd)?;
    let (cj, rj) = complex_lstsq(&cols, &yj)?;
    let tol = cfg.f64("polyakov_split.tol_cross")?;
    let mut fit = Table::new(
        "regression",
        &[
            "cocycle",
            "wedge_coef_re",
            "wedge_coef_im",
            "metric_coef_re",
            "metric_coef_im",
            "residual_norm",
            "cross_ratio",
            "tolerance",
        ],
    );
    let rd_ratio = cd[1].norm() / cd[0].norm();
    let rj_ratio = cj[0].norm() / cj[1].norm();
    for (name, co, resid, ratio) in [
        ("psi_d", &cd, rd, rd_ratio),
        ("psi_delta_j", &cj, rj, rj_ratio),
    ] {
        fit.push(
            vec![
                name.into(),
                co[0].re.into(),
                co[0].im.into(),
                co[1].re.into(),
                co[1].im.into(),
                resid.into(),
                ratio.into(),
                tol.into(),
            ],
            ratio < tol,
        );
    }
    Ok(vec![t, fit])
}

fn quadruple(ps: [[i64; 2]; 3]) -> Vec<TrigPoly> {
    let s = [
        -(ps[0][0] + ps[1][0] + ps[2][0]),
        -(ps[0][1] + ps[1][1] + ps[2][1]),
    ];
    vec![
        monomial(s),
        monomial(ps[0]),
        monomial(ps[1]),
        monomial(ps[2]),
    ]
}

fn cocycle_identities(cfg: &Config) -> Tables {
    let rep_e = build_gammas(0, 2)?;
    let rep_l = build_gammas(1, 1)?;
    let mut t = Table::new(
        "identities",
        &[
            "identity",
            "functional",
            "arguments",
            "residual",
            "tolerance",
        ],
    );

    let outer = cfg.usize("cocycle_identities.cyclic_outer")?;
    let tol = cfg.f64("cocycle_identities.tol_cyclic")?;
    let g = Geometry::torus(2, 2 * outer + 4, Signature::Euclidean)?;
    for (p1, p2) in [([1, 0], [0, 1]), ([2, 1], [-1, 1])] {
        let base = CocycleInput::new(
            g.clone(),
            triple(p1, p2),
            None,
            Truncation::double(vec![outer, outer]),
        )?;
        let tau = |v: &[TrigPoly]| chern_character(&base.with_entries(v.to_vec())?, &rep_e);
        let res = cocycle_identity_check(
            IdentityKind::Cyclic,
            tau,
            base.entries(),
            &AlgebraProduct::Pointwise,
            &g,
        )?;
        t.push(
            vec![
                "cyclic".into(),
                "tau_f".into(),
                format!("{p1:?} {p2:?}").into(),
                res.into(),
                tol.into(),
            ],
            res < tol,
        );
    }

    let outer = cfg.usize("cocycle_identities.hochschild_outer")?;
    let tol = cfg.f64("cocycle_identities.tol_hochschild")?;
    let quads = [
        [[1, 0], [0, 1], [1, 1]],
        [[1, 1], [1, -1], [0, 1]],
        [[2, 0], [0, 1], [-1, 1]],
    ];
    for (name, sig, rep, kind) in [
        ("psi_d", Signature::Euclidean, &rep_e, CocycleKind::Dirac),
        (
            "psi_delta_j",
            Signature::Lorentzian,
            &rep_l,
            CocycleKind::DeltaJ,
        ),
    ] {
        let g = Geometry::torus(2, 2 * outer + 4, sig)?;
        for ps in quads {
            let args = quadruple(ps);
            let base = CocycleInput::new(
                g.clone(),
                args[..3].to_vec(),
                None,
                Truncation::double(vec![outer, outer]),
            )?;
            let f = |v: &[TrigPoly]| {
                Ok(hochschild_cocycle(
                    kind,
                    &base.with_entries(v.to_vec())?,
                    rep,
                    &Ladder::default(),
                )?
                .value
                .value)
            };
            let res = cocycle_identity_check(
                IdentityKind::Hochschild,
                f,
                &args,
                &AlgebraProduct::Pointwise,
                &g,
            )?;
            t.push(
                vec![
                    "hochschild".into(),
                    name.into(),
                    format!("{ps:?}").into(),
                    res.into(),
                    tol.into(),
                ],
                res < tol,
            );
        }
    }

    // a constant entry after the first slot kills both functionals
    let g = Geometry::torus(2, 132, Signature::Euclidean)?;
    let one = TrigPoly::constant(&g, c(1.0, 0.0));
    let input = CocycleInput::new(
        g.clone(),
        vec![monomial([-1, 0]), one, monomial([1, 0])],
        None,
        Truncation::double(vec![64, 64]),
    )?;
    let tau = chern_character(&input, &rep_e)?.norm();
    let psi = hochschild_cocycle(CocycleKind::Dirac, &input, &rep_e, &Ladder::default())?
        .value
        .value
        .norm();
    for (name, v) in [("tau_f", tau), ("psi_d", psi)] {
        t.push(
            vec![
                "constant_entry".into(),
                name.into(),
                "[-1, 0] 1 [1, 0]".into(),
                v.into(),
                1e-12.into(),
            ],
            v < 1e-12,
        );
    }
    Ok(vec![t])
}

fn admissibility(cfg: &Config) -> Tables {
    let grid = cfg.usize_list("admissibility.grid")?;
    let window = cfg.usize_list("admissibility.window")?;
    if grid.len() != 2 || window.len() != 2 {
        return Err(super::config::ConfigError::InvalidField {
            field: "admissibility.window".into(),
            reason: "grid and window need two entries".into(),
        }
        .into());
    }
    let g = Geometry::with_grid(
        1,
        1,
        cfg.f64("admissibility.box_length")?,
        grid,
        Signature::Lorentzian,
    )?;
    let lat = Lattice::new(g.clone(), window.clone())?;
    let rep = build_gammas(1, 1)?;
    let params = DeformationParams::cylinder(cfg.f64("admissibility.hbar")?, 1);
    let mut alg = Vec::new();
    for (x0, w, amp) in [(0.0, 1.0, 0.3), (0.4, 0.8, -0.5)] {
        let a = FourierFunction::from_fn(g.clone(), |x| {
            c(
                (-PI * (x[0] - x0).powi(2) / (w * w)).exp() * (1.0 + amp * (2.0 * PI * x[1]).cos()),
                amp * (2.0 * PI * x[1]).sin(),
            )
        })?;
        alg.push(
            regular_representation(&a, &params, Side::Left, &window)?
                .tensor_spin(&Mat::identity(2, 2))?,
        );
    }
    let ks0 = standard_krein(&rep)?;
    let factor = cfg.f64("admissibility.fail_factor")?;
    let mut t = Table::new(
        "candidates",
        &[
            "candidate",
            "commutant_residual",
            "omega_residual",
            "positivity_min",
            "reflection_error",
            "admissible",
            "expected",
        ],
    );
    let mut reflections = vec![("standard".to_string(), SpacelikeReflection::standard(1, 1))];
    for b in cfg.f64_list("admissibility.boosts")? {
        reflections.push((format!("boost {b}"), SpacelikeReflection::boosted(1, 1, b)?));
    }
    let mut j_std = None;
    for (name, refl) in &reflections {
        let ks = reflection_to_j(&rep, refl)?;
        let j = DiscreteOperator::identity(lat.clone(), 2).left_spin(ks.j())?;
        let out = admissibility_check(&j, &alg, &rep, ks0.metric())?;
        let err = out.reflection.as_ref().map_or(f64::INFINITY, |r| {
            r.r.iter()
                .zip(refl.matrix())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        });
        t.push(
            vec![
                name.as_str().into(),
                out.commutant_residual.into(),
                out.omega_residual.into(),
                out.positivity_min.into(),
                err.into(),
                if out.admissible() { "yes" } else { "no" }.into(),
                "yes".into(),
            ],
            out.admissible() && err < 1e-8,
        );
        j_std.get_or_insert(j);
    }
    let j = j_std.expect("the standard reflection is always present");
    let spin = pauli()[2].clone();
    for (i, eps) in cfg
        .f64_list("admissibility.mixing")?
        .into_iter()
        .enumerate()
    {
        let bad = mode_mixing_conjugate(&j, eps, &spin, cfg.u64("seed")? + i as u64)?;
        let out = admissibility_check(&bad, &alg, &rep, ks0.metric())?;
        t.push(
            vec![
                format!("mixing {eps}").into(),
                out.commutant_residual.into(),
                out.omega_residual.into(),
                out.positivity_min.into(),
                Cell::Text(String::new()),
                if out.admissible() { "yes" } else { "no" }.into(),
                "no".into(),
            ],
            !out.admissible() && out.commutant_residual > factor * COMMUTANT_TOL,
        );
    }
    Ok(vec![t])
}

fn random_cyl(grid: MoritaGrid, r: &mut ChaCha8Rng) -> Result<CylFunction, CliError> {
    let x0: f64 = r.random_range(-0.5..0.5);
    let w: f64 = r.random_range(0.6..1.2);
    let amp: f64 = r.random_range(-0.8..0.8);
    let t0: f64 = r.random_range(0.0..1.0);
    let b: f64 = r.random_range(-0.4..0.4);
    Ok(CylFunction::from_fn(grid, move |x, t| {
        let env = (-PI * (x - x0).powi(2) / (w * w)).exp();
        c(
            env * (1.0 + amp * (2.0 * PI * (t - t0)).cos()),
            env * b * (4.0 * PI * t).sin(),
        )
    })?)
}

fn gaussian_line(grid: MoritaGrid, x0: f64, w: f64) -> Result<LineFunction, CliError> {
    Ok(LineFunction::from_fn(grid, |x| {
        c((-PI * (x - x0).powi(2) / (w * w)).exp(), 0.0)
    })?)
}

fn morita(cfg: &Config) -> Tables {
    let grid = MoritaGrid::new(
        cfg.usize("morita.half_length")?,
        cfg.usize("morita.per_unit")?,
    )?;
    let mut r = rng(cfg, 10)?;
    let tol = cfg.f64("morita.tol_identity")?;
    let mut id = Table::new(
        "identities",
        &["identity", "relative_residual", "tolerance"],
    );
    let big_f = random_cyl(grid, &mut r)?;
    let big_g = random_cyl(grid, &mut r)?;
    let big_h = random_cyl(grid, &mut r)?;
    let f = gaussian_line(grid, 0.2, 1.0)?;
    let g = gaussian_line(grid, -0.4, 0.8)?;
    let h = gaussian_line(grid, 0.1, 1.2)?;
    let seq = |v: &[(i64, f64)]| {
        SequenceFunction::from_fn(3, |n| {
            v.iter()
                .find(|x| x.0 == n)
                .map_or(c(0.0, 0.0), |x| c(x.1, 0.0))
        })
    };
    let a = seq(&[(0, 0.3), (1, 1.0), (-1, -0.6)])?;
    let b = seq(&[(1, -0.3), (-2, 0.7), (0, 0.2)])?;
    let line_rel = |x: &LineFunction, y: &LineFunction| -> Result<f64, CliError> {
        Ok(x.l1_distance(y)? / x.l1_norm())
    };
    let cyl_rel = |x: &CylFunction, y: &CylFunction| -> Result<f64, CliError> {
        Ok(x.l1_distance(y)? / x.l1_norm())
    };
    let seq_rel = |x: &SequenceFunction, y: &SequenceFunction| x.max_abs_diff(y) / x.sup_norm();
    let act = |op: Action<'_>, v: &LineFunction| module_action(op, v);

    let fg = appendix_product(&big_f, &big_g)?;
    let mut rows: Vec<(&str, f64)> = Vec::new();
    rows.push((
        "associativity (F*G)*H = F*(G*H)",
        cyl_rel(
            &appendix_product(&fg, &big_h)?,
            &appendix_product(&big_f, &appendix_product(&big_g, &big_h)?)?,
        )?,
    ));
    rows.push((
        "(F*G).f = F.(G.f)",
        line_rel(
            &act(Action::COnLeft(&fg), &f)?,
            &act(Action::COnLeft(&big_f), &act(Action::COnLeft(&big_g), &f)?)?,
        )?,
    ));
    rows.push((
        "f.(a*b) = (f.a).b",
        line_rel(
            &act(Action::ZOnRight(&a.convolve(&b)), &f)?,
            &act(Action::ZOnRight(&b), &act(Action::ZOnRight(&a), &f)?)?,
        )?,
    ));
    rows.push((
        "(F.f).a = F.(f.a)",
        line_rel(
            &act(Action::ZOnRight(&a), &act(Action::COnLeft(&big_f), &f)?)?,
            &act(Action::COnLeft(&big_f), &act(Action::ZOnRight(&a), &f)?)?,
        )?,
    ));
    rows.push((
        "phi(f.a, g) = phi(f, a.g)",
        cyl_rel(
            &phi_pairing(&act(Action::ZOnRight(&a), &f)?, &g)?,
            &phi_pairing(&f, &act(Action::ZOnLeft(&a), &g)?)?,
        )?,
    ));
    rows.push((
        "psi(f.F, g) = psi(f, F.g)",
        seq_rel(
            &psi_pairing(&act(Action::COnRight(&big_f), &f)?, &g)?,
            &psi_pairing(&f, &act(Action::COnLeft(&big_f), &g)?)?,
        ),
    ));
    rows.push((
        "phi(f,g).h = f.psi(g,h)",
        line_rel(
            &act(Action::COnLeft(&phi_pairing(&f, &g)?), &h)?,
            &act(Action::ZOnRight(&psi_pairing(&g, &h)?), &f)?,
        )?,
    ));
    rows.push((
        "psi(f,g).h = f.phi(g,h)",
        line_rel(
            &act(Action::ZOnLeft(&psi_pairing(&f, &g)?), &h)?,
            &act(Action::COnRight(&phi_pairing(&g, &h)?), &f)?,
        )?,
    ));
    for (name, res) in rows {
        id.push(vec![name.into(), res.into(), tol.into()], res < tol);
    }

    let wtol = cfg.f64("morita.tol_witness")?;
    let mut wit = Table::new("witnesses", &["check", "value", "tolerance"]);
    let f0 = witness_f0(grid)?;
    let unit = psi_pairing(&f0, &f0)?.max_abs_diff(&SequenceFunction::delta(0, 0));
    wit.push(
        vec!["psi(f0, f0) = delta_0".into(), unit.into(), wtol.into()],
        unit < wtol,
    );
    let gauss = gaussian_line(grid, 0.0, 1.0)?;
    let psi = psi_pairing(&gauss, &gauss)?;
    let cutoff = psi.cutoff() as i64;
    let closed = (-cutoff..=cutoff)
        .map(|n| (psi.get(n) - (0.5f64).sqrt() * (-PI * (n * n) as f64 / 2.0).exp()).norm())
        .fold(0.0, f64::max);
    wit.push(
        vec![
            "gaussian psi closed form".into(),
            closed.into(),
            wtol.into(),
        ],
        closed < wtol,
    );
    // t-independent Gaussian kernel against the closed-form convolution
    let kernel = CylFunction::from_fn(grid, |x, _| c((-PI * x * x).exp(), 0.0))?;
    let v = gaussian_line(grid, 0.5, 0.7)?;
    let s2: f64 = 1.0 + 0.49;
    let oracle = LineFunction::from_fn(grid, |x| {
        c(
            (0.49 / s2).sqrt() * (-PI * (x - 0.5).powi(2) / s2).exp(),
            0.0,
        )
    })?;
    let conv = act(Action::COnLeft(&kernel), &v)?.l1_distance(&oracle)?;
    wit.push(
        vec![
            "t-independent action is convolution".into(),
            conv.into(),
            wtol.into(),
        ],
        conv < wtol,
    );
    let ptol = cfg.f64("morita.tol_partition")?;
    let dev = partition_deviation(&partition_function(grid)?);
    wit.push(
        vec!["partition of unity".into(), dev.into(), ptol.into()],
        dev < ptol,
    );
    let stol = cfg.f64("morita.tol_surjectivity")?;
    let e10 = approximate_identity(grid, 10.0)?;
    for (name, target) in [("phi(H) = e_10", &e10), ("phi(H) = F", &big_f)] {
        let w = surjectivity_witness(target)?;
        wit.push(
            vec![
                format!("{name} (rank {})", w.rank).into(),
                w.l1_error.into(),
                stol.into(),
            ],
            w.l1_error < stol,
        );
    }

    let mut ai = Table::new(
        "approximate_identity",
        &["lambda", "mass", "l1_error", "decreasing"],
    );
    let target = gaussian_line(grid, 0.1, 1.0)?;
    let mut last = f64::INFINITY;
    for lambda in cfg.f64_list("morita.lambdas")? {
        let e = approximate_identity(grid, lambda)?;
        let mass: f64 = (0..grid.points()).map(|s| e.at(s, 0).re).sum::<f64>() * grid.spacing();
        let err = act(Action::COnLeft(&e), &target)?.l1_distance(&target)?;
        let down = err < last;
        ai.push(
            vec![
                lambda.into(),
                mass.into(),
                err.into(),
                if down { "yes" } else { "no" }.into(),
            ],
            down && (mass - 1.0).abs() < 1e-10,
        );
        last = err;
    }

    let mut sub = Table::new(
        "submultiplicativity",
        &["pair", "p_product", "p_left_times_p_right", "ratio"],
    );
    for i in 0..cfg.usize("morita.pairs")? {
        let x = random_cyl(grid, &mut r)?;
        let y = random_cyl(grid, &mut r)?;
        let lhs = seminorm_p(&appendix_product(&x, &y)?, 0.0, 0, 0)?;
        let rhs = seminorm_p(&x, 0.0, 0, 0)? * seminorm_p(&y, 0.0, 0, 0)?;
        sub.push(
            vec![i.into(), lhs.into(), rhs.into(), (lhs / rhs).into()],
            lhs <= rhs,
        );
    }
    // narrow in t: p(F*F) grows like the integral of b^2 while p(F)^2 stays fixed
    let narrow = CylFunction::from_fn(grid, |x, t| {
        let b: f64 = (-2i32..=2)
            .map(|n| (-(t - n as f64).powi(2) / 0.005).exp())
            .sum();
        c((-4.0 * x * x).exp() * b, 0.0)
    })?;
    let lhs = seminorm_p(&appendix_product(&narrow, &narrow)?, 0.0, 0, 0)?;
    let rhs = seminorm_p(&narrow, 0.0, 0, 0)?.powi(2);
    sub.push(
        vec![
            "narrow in t".into(),
            lhs.into(),
            rhs.into(),
            (lhs / rhs).into(),
        ],
        lhs <= rhs,
    );
    Ok(vec![id, wit, ai, sub])
}

fn schatten(cfg: &Config) -> Tables {
    let grid = cfg.usize_list("schatten.grid")?;
    let g = Geometry::with_grid(
        1,
        1,
        cfg.f64("schatten.box_length")?,
        grid,
        Signature::Euclidean,
    )?;
    let params = DeformationParams::cylinder(cfg.f64("schatten.hbar")?, 1);
    let a = forward_transform(&GridFunction::from_fn(g.clone(), |x| {
        c(
            (-PI * x[0] * x[0]).exp() * (1.0 + 0.5 * (2.0 * PI * x[1]).cos()),
            0.0,
        )
    })?);
    let rep = build_gammas(0, 2)?;
    let mut t = Table::new(
        "partial_sums",
        &["window", "operator_dim", "sum_q1", "sum_q3"],
    );
    let mut sums = Vec::new();
    for w in cfg.windows("schatten.windows")? {
        let lat = Lattice::new(g.clone(), w.clone())?;
        let f = sign_operator(&build_dirac(&rep, &lat)?)?;
        let pa = regular_representation(&a, &params, Side::Left, &w)?
            .tensor_spin(&Mat::identity(2, 2))?;
        let sv = sign_commutator_singular_values(&f, &pa)?;
        let s1: f64 = sv.iter().sum();
        let s3: f64 = sv.iter().map(|s| s.powi(3)).sum();
        t.push(
            vec![
                format!("{}x{}", w[0], w[1]).into(),
                (lat.len() * 2).into(),
                s1.into(),
                s3.into(),
            ],
            s1.is_finite() && s3.is_finite(),
        );
        sums.push((s1, s3));
    }
    let mut v = Table::new("verdicts", &["check", "relative_change", "threshold"]);
    if let [.., (a1, a3), (b1, b3)] = sums[..] {
        let change3 = (b3 - a3).abs() / b3;
        let growth1 = (b1 - a1) / a1;
        let sat = cfg.f64("schatten.tol_saturation")?;
        let grow = cfg.f64("schatten.min_growth")?;
        v.push(
            vec!["q3_saturates".into(), change3.into(), sat.into()],
            change3 < sat,
        );
        v.push(
            vec!["q1_grows".into(), growth1.into(), grow.into()],
            growth1 > grow,
        );
    }
    Ok(vec![t, v])
}
