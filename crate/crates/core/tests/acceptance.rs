//! One test per acceptance criterion. Each prints a `criterion N: PASS|FAIL` line.
//! Thresholds are literal here so that editing the shipped config cannot loosen them.
//! Run with `cargo test --test acceptance -- --nocapture` to see the lines.

use std::process::Command;
use std::sync::Mutex;
use std::time::{Duration, Instant};

use starcyl::cli::report::{Cell, Report, Table, Verdict};
use starcyl::cli::{run_experiment, Config};

// experiments run one at a time so runtime criteria are not skewed
static SERIAL: Mutex<()> = Mutex::new(());

fn run(name: &str) -> (Report, f64) {
    let start = Instant::now();
    let r = run_experiment(name, &Config::default()).unwrap_or_else(|e| panic!("{name}: {e}"));
    (r, start.elapsed().as_secs_f64())
}

fn table<'a>(r: &'a Report, name: &str) -> &'a Table {
    r.tables
        .iter()
        .find(|t| t.name == name)
        .unwrap_or_else(|| panic!("{}: no table {name}", r.experiment))
}

fn num(c: &Cell) -> f64 {
    match c {
        Cell::Int(i) => *i as f64,
        Cell::Float(x) => *x,
        Cell::Text(s) => s.parse().unwrap_or(f64::NAN),
    }
}

fn text(c: &Cell) -> String {
    match c {
        Cell::Text(s) => s.clone(),
        other => format!("{}", num(other)),
    }
}

fn column(t: &Table, name: &str) -> Vec<f64> {
    let j = t
        .columns
        .iter()
        .position(|c| c == name)
        .unwrap_or_else(|| panic!("{}: no column {name}", t.name));
    t.rows.iter().map(|r| num(&r.cells[j])).collect()
}

/// Row of `t` whose first cell reads `key`.
fn row<'a>(t: &'a Table, key: &str) -> &'a [Cell] {
    &t.rows
        .iter()
        .find(|r| text(&r.cells[0]) == key)
        .unwrap_or_else(|| panic!("{}: no row {key}", t.name))
        .cells
}

fn cell(t: &Table, key: &str, col: &str) -> f64 {
    let j = t.columns.iter().position(|c| c == col).unwrap();
    num(&row(t, key)[j])
}

fn max(v: &[f64]) -> f64 {
    v.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn verdict(n: u32, ok: bool, detail: String) {
    println!(
        "criterion {n}: {} {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {n} failed: {detail}");
}

#[test]
fn criterion_01_dirac_condition_slope() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (r, secs) = run("star-convergence");
    let fit = table(&r, "fit");
    let slope = cell(fit, "slope_target", "slope");
    let ladder = column(table(&r, "residuals"), "hbar");
    let ok = ladder == [0.4, 0.2, 0.1, 0.05, 0.025] && (slope - 1.0).abs() <= 0.15 && secs < 30.0;
    verdict(
        1,
        ok,
        format!("slope {slope:.4} (target 1.0 +- 0.15), {secs:.1} s (< 30 s)"),
    );
}

#[test]
fn criterion_02_star_identities() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (r, _) = run("star-identities");
    let assoc = max(&column(table(&r, "associativity"), "relative_residual"));
    let inv = max(&column(table(&r, "involution"), "relative_residual"));
    let delta = max(&column(table(&r, "delta_commutator"), "residual"));
    let ok = assoc < 1e-8 && inv < 1e-8 && delta < 1e-13;
    verdict(
        2,
        ok,
        format!("associativity {assoc:.1e}, involution {inv:.1e}, delta {delta:.1e}"),
    );
}

#[test]
fn criterion_03_crossed_isomorphism() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (r, _) = run("crossed-isomorphism");
    let h = column(table(&r, "homomorphism"), "relative_residual");
    let c = max(&column(
        table(&r, "fourier_vs_partial"),
        "relative_residual",
    ));
    let ok = h.len() == 5 && max(&h) < 1e-6 && c < 1e-6;
    verdict(
        3,
        ok,
        format!(
            "{} pairs, Q residual {:.1e}, consistency {c:.1e}",
            h.len(),
            max(&h)
        ),
    );
}

#[test]
fn criterion_04_clifford_and_delta_j() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (r, _) = run("spectra");
    let cl = table(&r, "clifford");
    let dims: Vec<f64> = column(cl, "p")
        .iter()
        .zip(column(cl, "q"))
        .map(|(p, q)| p + q)
        .collect();
    let anti = max(&column(cl, "residual"));
    let sp = table(&r, "spectra");
    let dj = cell(sp, "delta_j_doublets", "max_error");
    let modes = cell(sp, "delta_j_doublets", "modes");
    // the verdict also covers multiplicity 2 per mode
    let doublets = sp
        .rows
        .iter()
        .find(|x| text(&x.cells[0]) == "delta_j_doublets")
        .unwrap()
        .verdict
        == Verdict::Pass;
    let all_sigs = (1..=6).all(|d| dims.iter().filter(|&&x| x == d as f64).count() == d + 1);
    let ok = all_sigs && anti < 1e-14 && dj < 1e-10 && modes >= 64.0 * 64.0 && doublets;
    verdict(
        4,
        ok,
        format!("anticommutators {anti:.1e} over {} signatures, Delta_J error {dj:.1e} at {modes} modes", dims.len()),
    );
}

#[test]
fn criterion_05_trace_theorem() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (r, _) = run("trace-theorem");
    let t = table(&r, "integrals");
    let s = cell(t, "torus_scalar_constant", "relative_error");
    let dim = cell(t, "torus_scalar_constant", "operator_dim");
    let l = cell(t, "torus_lorentzian_constant", "relative_error");
    let b = cell(t, "cylinder_bump", "relative_error");
    let secs = table(&r, "budget").rows[0].verdict == Verdict::Pass;
    let ok = s < 0.05 && dim >= 1e5 && l < 0.10 && b < 0.10 && secs;
    verdict(
        5,
        ok,
        format!("scalar {s:.2e} ({dim} values), lorentzian {l:.2e}, bump {b:.2e}"),
    );
}

#[test]
fn criterion_06_character_formula() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (r, _) = run("character");
    let t = table(&r, "triples");
    let c2: Vec<(f64, f64)> = column(t, "c2_re")
        .into_iter()
        .zip(column(t, "c2_im"))
        .collect();
    let mean = c2.iter().fold((0.0, 0.0), |a, b| (a.0 + b.0, a.1 + b.1));
    let mean = (mean.0 / c2.len() as f64, mean.1 / c2.len() as f64);
    let spread = c2
        .iter()
        .flat_map(|a| c2.iter().map(move |b| (a.0 - b.0).hypot(a.1 - b.1)))
        .fold(0.0, f64::max)
        / mean.0.hypot(mean.1);
    let gap = max(&column(t, "relative_gap"));
    let ok = c2.len() >= 5 && spread < 0.10 && gap < 0.10;
    verdict(
        6,
        ok,
        format!(
            "{} triples, c2 spread {spread:.1e}, max |psi - tau|/|tau| {gap:.3}",
            c2.len()
        ),
    );
}

#[test]
fn criterion_07_polyakov_split() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (r, _) = run("polyakov-split");
    let t = table(&r, "regression");
    let d = cell(t, "psi_d", "cross_ratio");
    let j = cell(t, "psi_delta_j", "cross_ratio");
    verdict(
        7,
        d < 0.05 && j < 0.05,
        format!("metric/wedge in psi_D {d:.1e}, wedge/metric in psi_DeltaJ {j:.1e}"),
    );
}

#[test]
fn criterion_08_cocycle_identities() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (r, _) = run("cocycle-identities");
    let t = table(&r, "identities");
    let pick = |kind: &str, f: &str| -> Vec<f64> {
        t.rows
            .iter()
            .filter(|x| text(&x.cells[0]) == kind && text(&x.cells[1]) == f)
            .map(|x| num(&x.cells[3]))
            .collect()
    };
    let cyc = pick("cyclic", "tau_f");
    let hd = pick("hochschild", "psi_d");
    let hj = pick("hochschild", "psi_delta_j");
    let ok = !cyc.is_empty()
        && !hd.is_empty()
        && !hj.is_empty()
        && max(&cyc) < 1e-6
        && max(&hd) < 1e-2
        && max(&hj) < 1e-2;
    verdict(
        8,
        ok,
        format!(
            "cyclic {:.1e}, hochschild psi_D {:.1e}, psi_DeltaJ {:.1e}",
            max(&cyc),
            max(&hd),
            max(&hj)
        ),
    );
}

#[test]
fn criterion_09_admissibility() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (r, _) = run("admissibility");
    let t = table(&r, "candidates");
    let adm = t.columns.iter().position(|c| c == "admissible").unwrap();
    let res = t
        .columns
        .iter()
        .position(|c| c == "commutant_residual")
        .unwrap();
    let good: Vec<_> = t
        .rows
        .iter()
        .filter(|x| text(&x.cells[0]) == "standard" || text(&x.cells[0]).starts_with("boost"))
        .collect();
    let bad: Vec<_> = t
        .rows
        .iter()
        .filter(|x| text(&x.cells[0]).starts_with("mixing"))
        .collect();
    let good_ok = good.len() >= 3 && good.iter().all(|x| text(&x.cells[adm]) == "yes");
    let min_bad = bad
        .iter()
        .map(|x| num(&x.cells[res]))
        .fold(f64::INFINITY, f64::min);
    let bad_ok =
        bad.len() >= 3 && bad.iter().all(|x| text(&x.cells[adm]) == "no") && min_bad > 1e3 * 1e-8;
    verdict(
        9,
        good_ok && bad_ok,
        format!("{} reflections admissible, {} perturbed rejected, smallest rejected residual {min_bad:.2e}", good.len(), bad.len()),
    );
}

#[test]
fn criterion_10_morita_suite() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (r, _) = run("morita");
    let id = table(&r, "identities");
    let eq = id
        .rows
        .iter()
        .filter(|x| text(&x.cells[0]).contains("phi") || text(&x.cells[0]).contains("psi"))
        .map(|x| num(&x.cells[1]))
        .collect::<Vec<_>>();
    let w = table(&r, "witnesses");
    let f0 = cell(w, "psi(f0, f0) = delta_0", "value");
    let closed = cell(w, "gaussian psi closed form", "value");
    let surj: Vec<f64> = w
        .rows
        .iter()
        .filter(|x| text(&x.cells[0]).starts_with("phi(H)"))
        .map(|x| num(&x.cells[1]))
        .collect();
    let ai = table(&r, "approximate_identity");
    let lambdas = column(ai, "lambda");
    let errs = column(ai, "l1_error");
    let monotone = lambdas == [1.0, 10.0, 100.0] && errs.windows(2).all(|p| p[1] < p[0]);
    let ok = eq.len() == 4
        && max(&eq) < 1e-6
        && f0 < 1e-8
        && !surj.is_empty()
        && max(&surj) < 1e-6
        && closed < 1e-8
        && monotone;
    verdict(
        10,
        ok,
        format!(
            "balanced/interchange {:.1e}, f0 {f0:.1e}, phi(H) {:.1e}, closed form {closed:.1e}, e_lambda errors {errs:.3?}",
            max(&eq),
            max(&surj)
        ),
    );
}

#[test]
fn criterion_11_schatten_diagnostic() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let (r, _) = run("schatten");
    let t = table(&r, "verdicts");
    let q3 = cell(t, "q3_saturates", "relative_change");
    let q1 = cell(t, "q1_grows", "relative_change");
    verdict(
        11,
        q3 < 0.01 && q1 > 0.10,
        format!("q=3 change {q3:.2e}, q=1 growth {q1:.3}"),
    );
}

#[test]
fn criterion_12_full_suite() {
    let _g = SERIAL.lock().unwrap_or_else(|e| e.into_inner());
    let dir = std::env::temp_dir().join(format!("starcyl-acceptance-{}", std::process::id()));
    let start = Instant::now();
    let out = Command::new(env!("CARGO_BIN_EXE_starcyl"))
        .args(["run", "all", "--out", dir.to_str().unwrap()])
        .output()
        .expect("binary runs");
    let elapsed = start.elapsed();
    let _ = std::fs::remove_dir_all(&dir);
    print!("{}", String::from_utf8_lossy(&out.stdout));
    let code = out.status.code();
    let ok = code == Some(0) && elapsed < Duration::from_secs(15 * 60);
    verdict(
        12,
        ok,
        format!(
            "exit code {code:?}, {:.0} s (< 900 s)",
            elapsed.as_secs_f64()
        ),
    );
}
