//! Flat `key = value` configuration with dotted keys.
//!
//! Every key is declared in [`SCHEMA`] with its default and kind; files may override any subset.
//! Unknown keys, duplicates and malformed values are errors naming the offending field.

use std::collections::BTreeMap;
use std::path::Path;

use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: expected `key = value`")]
    Syntax { line: usize },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { key: String, line: usize },
    #[error("line {line}: `{key}` given twice")]
    Duplicate { key: String, line: usize },
    #[error("invalid value for `{field}`: {reason}")]
    InvalidField { field: String, reason: String },
    #[error("cannot read {path}: {reason}")]
    Read { path: String, reason: String },
}

pub type Result<T> = std::result::Result<T, ConfigError>;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Kind {
    Float,
    Positive,
    /// Integer ≥ 1.
    Count,
    /// Even integer ≥ 2; grid sizes.
    Even,
    Seed,
    /// Strictly monotone, nonempty list of positive reals.
    Ladder,
    /// Nonempty list of reals.
    FloatList,
    /// Nonempty list of even integers.
    EvenList,
    /// Nonempty list of counts.
    CountList,
    /// Strictly increasing list of `AxB` windows.
    Windows,
    Format,
    Text,
}

#[derive(Clone, Copy, Debug)]
pub struct Param {
    pub key: &'static str,
    pub default: &'static str,
    pub kind: Kind,
    pub doc: &'static str,
}

const fn p(key: &'static str, default: &'static str, kind: Kind, doc: &'static str) -> Param {
    Param {
        key,
        default,
        kind,
        doc,
    }
}

use Kind::*;

pub const SCHEMA: &[Param] = &[
    p("seed", "20261015", Seed, "seed of every random draw"),
    p("output.dir", "starcyl-out", Text, "report directory"),
    p("output.format", "csv", Format, "csv or json"),
    // star-convergence
    p(
        "star_convergence.box_length",
        "16",
        Positive,
        "L of the real direction",
    ),
    p(
        "star_convergence.grid_x",
        "256",
        Even,
        "grid points on the real direction",
    ),
    p(
        "star_convergence.grid_t",
        "32",
        Even,
        "grid points on the circle",
    ),
    p(
        "star_convergence.hbar_ladder",
        "0.4, 0.2, 0.1, 0.05, 0.025",
        Ladder,
        "deformation parameters",
    ),
    p(
        "star_convergence.slope_target",
        "1.0",
        Float,
        "expected log-log slope",
    ),
    p(
        "star_convergence.tol_slope",
        "0.15",
        Positive,
        "allowed deviation from the target",
    ),
    p(
        "star_convergence.slope_min",
        "0.85",
        Float,
        "minimal slope for convergence",
    ),
    p(
        "star_convergence.runtime_budget_s",
        "30",
        Positive,
        "wall-clock budget",
    ),
    // star-identities
    p(
        "star_identities.box_length",
        "5",
        Positive,
        "L of the real direction",
    ),
    p(
        "star_identities.grid_x",
        "24",
        Even,
        "grid points on the real direction",
    ),
    p(
        "star_identities.grid_t",
        "24",
        Even,
        "grid points on the circle",
    ),
    p(
        "star_identities.torus_grid",
        "16",
        Even,
        "grid points per torus axis",
    ),
    p(
        "star_identities.hbar",
        "0.37",
        Float,
        "deformation parameter",
    ),
    p(
        "star_identities.torus_theta",
        "0.7",
        Float,
        "off-diagonal entry of the torus form",
    ),
    p(
        "star_identities.cases",
        "8",
        Count,
        "random inputs per identity",
    ),
    p(
        "star_identities.tol_assoc",
        "1e-8",
        Positive,
        "relative associativity residual",
    ),
    p(
        "star_identities.tol_involution",
        "1e-8",
        Positive,
        "relative anti-homomorphism residual",
    ),
    p(
        "star_identities.tol_delta",
        "1e-13",
        Positive,
        "delta-mode commutator residual",
    ),
    // crossed-isomorphism
    p(
        "crossed_isomorphism.box_length",
        "8",
        Positive,
        "L of the real direction",
    ),
    p(
        "crossed_isomorphism.grid_x",
        "48",
        Even,
        "grid points on the real direction",
    ),
    p(
        "crossed_isomorphism.grid_t",
        "16",
        Even,
        "grid points on the circle",
    ),
    p(
        "crossed_isomorphism.hbar",
        "0.7",
        Float,
        "deformation parameter",
    ),
    p(
        "crossed_isomorphism.pairs",
        "5",
        Count,
        "size of the battery",
    ),
    p(
        "crossed_isomorphism.tol_homomorphism",
        "1e-6",
        Positive,
        "relative residual of Q",
    ),
    p(
        "crossed_isomorphism.tol_consistency",
        "1e-6",
        Positive,
        "relative residual between pictures",
    ),
    // spectra
    p("spectra.max_clifford_dim", "6", Count, "largest p+q"),
    p(
        "spectra.torus_grid",
        "128",
        Even,
        "grid points per torus axis",
    ),
    p(
        "spectra.lorentzian_window",
        "32",
        Count,
        "half-width of the Lorentzian window",
    ),
    p(
        "spectra.euclidean_window",
        "12",
        Count,
        "half-width of the Euclidean window",
    ),
    p(
        "spectra.tol_anticommutator",
        "1e-14",
        Positive,
        "Clifford relation residual",
    ),
    p(
        "spectra.tol_spectrum",
        "1e-10",
        Positive,
        "eigenvalue residual",
    ),
    // trace-theorem
    p(
        "trace_theorem.scalar_window",
        "158",
        Count,
        "half-width for f = 1, scalar kernel",
    ),
    p(
        "trace_theorem.lorentzian_window",
        "100",
        Count,
        "half-width for f = 1, Lorentzian kernel",
    ),
    p(
        "trace_theorem.bump_box_length",
        "3",
        Positive,
        "L of the bump cylinder",
    ),
    p(
        "trace_theorem.bump_window",
        "36, 12",
        CountList,
        "half-widths of the bump window",
    ),
    p(
        "trace_theorem.tol_scalar",
        "0.05",
        Positive,
        "relative error, scalar torus",
    ),
    p(
        "trace_theorem.tol_lorentzian",
        "0.10",
        Positive,
        "relative error, Lorentzian torus",
    ),
    p(
        "trace_theorem.tol_bump",
        "0.10",
        Positive,
        "relative error, bump cylinder",
    ),
    p(
        "trace_theorem.runtime_budget_s",
        "60",
        Positive,
        "wall-clock budget of the scalar case",
    ),
    // character
    p(
        "character.outer",
        "512",
        Count,
        "outer truncation half-width",
    ),
    p(
        "character.tol_spread",
        "0.10",
        Positive,
        "relative spread of c2",
    ),
    p(
        "character.tol_match",
        "0.10",
        Positive,
        "relative gap between psi_D and tau_F",
    ),
    // polyakov-split
    p(
        "polyakov_split.outer",
        "512",
        Count,
        "outer truncation half-width",
    ),
    p(
        "polyakov_split.tol_cross",
        "0.05",
        Positive,
        "cross coefficient over dominant one",
    ),
    // cocycle-identities
    p(
        "cocycle_identities.cyclic_outer",
        "1024",
        Count,
        "outer truncation for cyclicity",
    ),
    p(
        "cocycle_identities.hochschild_outer",
        "1024",
        Count,
        "outer truncation for b psi = 0",
    ),
    p(
        "cocycle_identities.tol_cyclic",
        "1e-6",
        Positive,
        "cyclicity residual",
    ),
    p(
        "cocycle_identities.tol_hochschild",
        "1e-2",
        Positive,
        "coboundary residual",
    ),
    // admissibility
    p(
        "admissibility.box_length",
        "6",
        Positive,
        "L of the real direction",
    ),
    p(
        "admissibility.grid",
        "32, 16",
        EvenList,
        "grid points per axis",
    ),
    p(
        "admissibility.window",
        "6, 4",
        CountList,
        "operator half-widths",
    ),
    p("admissibility.hbar", "0.5", Float, "deformation parameter"),
    p(
        "admissibility.boosts",
        "0.4, -0.7",
        FloatList,
        "rapidities of boosted reflections",
    ),
    p(
        "admissibility.mixing",
        "0.05, 0.1, 0.2",
        Ladder,
        "strengths of mode-mixing perturbations",
    ),
    p(
        "admissibility.fail_factor",
        "1e3",
        Positive,
        "required excess of failing residuals",
    ),
    // morita
    p("morita.half_length", "12", Count, "L/2 of the line"),
    p(
        "morita.per_unit",
        "32",
        Even,
        "grid points per unit length and on the circle",
    ),
    p(
        "morita.lambdas",
        "1, 10, 100",
        Ladder,
        "approximate-identity parameters",
    ),
    p(
        "morita.pairs",
        "20",
        Count,
        "random pairs for submultiplicativity",
    ),
    p(
        "morita.tol_identity",
        "1e-6",
        Positive,
        "relative residual of module identities",
    ),
    p(
        "morita.tol_witness",
        "1e-8",
        Positive,
        "unit witness and Gaussian residual",
    ),
    p(
        "morita.tol_surjectivity",
        "1e-6",
        Positive,
        "L1 residual of phi(H) - F",
    ),
    p(
        "morita.tol_partition",
        "1e-10",
        Positive,
        "partition-of-unity deviation",
    ),
    // schatten
    p(
        "schatten.box_length",
        "4",
        Positive,
        "L of the real direction",
    ),
    p("schatten.grid", "256, 64", EvenList, "grid points per axis"),
    p("schatten.hbar", "0.5", Float, "deformation parameter"),
    p(
        "schatten.windows",
        "24x8, 32x10",
        Windows,
        "operator windows, increasing",
    ),
    p(
        "schatten.tol_saturation",
        "0.01",
        Positive,
        "relative change of the q = 3 sum",
    ),
    p(
        "schatten.min_growth",
        "0.10",
        Positive,
        "required growth of the q = 1 sum",
    ),
];

fn param(key: &str) -> Option<&'static Param> {
    SCHEMA.iter().find(|p| p.key == key)
}

/// Resolved configuration: every schema key with its effective value.
#[derive(Clone, Debug, PartialEq)]
pub struct Config {
    values: BTreeMap<String, String>,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            values: SCHEMA
                .iter()
                .map(|p| (p.key.to_string(), p.default.to_string()))
                .collect(),
        }
    }
}

impl Config {
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let mut seen = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(ConfigError::Syntax { line: i + 1 });
            };
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(ConfigError::Syntax { line: i + 1 });
            }
            if param(k).is_none() {
                return Err(ConfigError::UnknownKey {
                    key: k.to_string(),
                    line: i + 1,
                });
            }
            if seen.insert(k.to_string(), i + 1).is_some() {
                return Err(ConfigError::Duplicate {
                    key: k.to_string(),
                    line: i + 1,
                });
            }
            cfg.set(k, v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Read {
            path: path.display().to_string(),
            reason: e.to_string(),
        })?;
        Self::parse(&text)
    }

    /// Overrides one key after validating it.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let Some(p) = param(key) else {
            return Err(ConfigError::UnknownKey {
                key: key.to_string(),
                line: 0,
            });
        };
        validate(p, value)?;
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    fn raw(&self, key: &str) -> &str {
        self.values
            .get(key)
            .unwrap_or_else(|| panic!("`{key}` is not in the schema"))
    }

    pub fn f64(&self, key: &str) -> Result<f64> {
        parse_f64(key, self.raw(key))
    }

    pub fn usize(&self, key: &str) -> Result<usize> {
        parse_usize(key, self.raw(key))
    }

    pub fn u64(&self, key: &str) -> Result<u64> {
        let v = self.raw(key);
        v.parse()
            .map_err(|_| invalid(key, format!("`{v}` is not an unsigned integer")))
    }

    pub fn text(&self, key: &str) -> &str {
        self.raw(key)
    }

    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>> {
        split(self.raw(key)).map(|v| parse_f64(key, v)).collect()
    }

    pub fn usize_list(&self, key: &str) -> Result<Vec<usize>> {
        split(self.raw(key)).map(|v| parse_usize(key, v)).collect()
    }

    pub fn windows(&self, key: &str) -> Result<Vec<Vec<usize>>> {
        split(self.raw(key)).map(|v| parse_window(key, v)).collect()
    }

    /// `key = value` lines in key order.
    pub fn lines(&self) -> Vec<String> {
        self.values
            .iter()
            .map(|(k, v)| format!("{k} = {v}"))
            .collect()
    }

    /// SHA-256 of the resolved lines, output settings excluded.
    pub fn hash(&self) -> String {
        let mut h = Sha256::new();
        for (k, v) in &self.values {
            if k.starts_with("output.") {
                continue;
            }
            h.update(format!("{k}={v}\n").as_bytes());
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// The default configuration as file text.
pub fn default_text() -> String {
    let mut out = String::from("# starcyl defaults; every key may be overridden\n");
    let mut section = "";
    for p in SCHEMA {
        let s = p.key.split_once('.').map_or("", |x| x.0);
        if s != section {
            out.push('\n');
            section = s;
        }
        out.push_str(&format!("# {}\n{} = {}\n", p.doc, p.key, p.default));
    }
    out
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::InvalidField {
        field: field.to_string(),
        reason: reason.into(),
    }
}

fn split(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim)
}

fn parse_f64(key: &str, v: &str) -> Result<f64> {
    match v.parse::<f64>() {
        Ok(x) if x.is_finite() => Ok(x),
        _ => Err(invalid(key, format!("`{v}` is not a finite number"))),
    }
}

fn parse_usize(key: &str, v: &str) -> Result<usize> {
    v.parse()
        .map_err(|_| invalid(key, format!("`{v}` is not a nonnegative integer")))
}

fn parse_window(key: &str, v: &str) -> Result<Vec<usize>> {
    let w: Vec<usize> = v
        .split('x')
        .map(|s| parse_usize(key, s.trim()))
        .collect::<Result<_>>()?;
    if w.is_empty() || w.contains(&0) {
        return Err(invalid(key, format!("`{v}` is not a window like 24x8")));
    }
    Ok(w)
}

fn validate(p: &Param, v: &str) -> Result<()> {
    let key = p.key;
    let count = |x: usize| {
        if x == 0 {
            Err(invalid(key, "must be at least 1"))
        } else {
            Ok(())
        }
    };
    let even = |x: usize| {
        if x < 2 || x % 2 == 1 {
            Err(invalid(
                key,
                format!("{x} must be an even number of grid points"),
            ))
        } else {
            Ok(())
        }
    };
    let list = |v: &str| -> Result<Vec<f64>> {
        let xs: Vec<f64> = split(v).map(|s| parse_f64(key, s)).collect::<Result<_>>()?;
        if xs.is_empty() {
            return Err(invalid(key, "list is empty"));
        }
        Ok(xs)
    };
    match p.kind {
        Float => parse_f64(key, v).map(drop),
        Positive => {
            if parse_f64(key, v)? <= 0.0 {
                Err(invalid(key, "must be positive"))
            } else {
                Ok(())
            }
        }
        Count => count(parse_usize(key, v)?),
        Even => even(parse_usize(key, v)?),
        Seed => v
            .parse::<u64>()
            .map(drop)
            .map_err(|_| invalid(key, format!("`{v}` is not an unsigned integer"))),
        Ladder => {
            let xs = list(v)?;
            if xs.iter().any(|&x| x <= 0.0) {
                return Err(invalid(key, "entries must be positive"));
            }
            let inc = xs.windows(2).all(|w| w[0] < w[1]);
            let dec = xs.windows(2).all(|w| w[0] > w[1]);
            if !(inc || dec) {
                return Err(invalid(key, "ladder must be strictly sorted"));
            }
            Ok(())
        }
        FloatList => list(v).map(drop),
        EvenList => split(v).try_for_each(|s| even(parse_usize(key, s)?)),
        CountList => split(v).try_for_each(|s| count(parse_usize(key, s)?)),
        Windows => {
            let ws: Vec<Vec<usize>> = split(v)
                .map(|s| parse_window(key, s))
                .collect::<Result<_>>()?;
            let increasing = ws.windows(2).all(|w| {
                w[0].len() == w[1].len()
                    && w[0].iter().zip(&w[1]).all(|(a, b)| a <= b)
                    && w[0] != w[1]
            });
            if !increasing {
                return Err(invalid(key, "windows must grow"));
            }
            Ok(())
        }
        Format => match v {
            "csv" | "json" => Ok(()),
            _ => Err(invalid(key, format!("`{v}` is neither csv nor json"))),
        },
        Text => {
            if v.is_empty() {
                Err(invalid(key, "must not be empty"))
            } else {
                Ok(())
            }
        }
    }
}
