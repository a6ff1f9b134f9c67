//! Checks the engine against high-precision reference values.
//!
//! The input is a CSV with columns `function,params,argument,value`. Values
//! carry about 30 significant digits and may exceed the `f64` range, so they
//! are kept as `(sign, ln|v|)` alongside the rounded double.

use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::channel::{EigenGroup, SpectralModel};
use crate::error::{FrisError, Result};
use crate::metrics::meijer_g_ec;
use crate::mixture::{coefficients, kdist_cdf};
use crate::specfun::{bessel_j0, bessel_k, gamma, ln_gamma};

/// Relative tolerance for the special functions and mixture values.
pub const DEFAULT_TOL: f64 = 1e-10;
/// Relative tolerance for the contour-evaluated Meijer-G values.
pub const MEIJER_TOL: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRow {
    pub function: String,
    pub params: String,
    pub argument: String,
    pub value: String,
}

/// A decimal literal parsed without overflow.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub value: f64,
    pub ln_abs: f64,
    pub negative: bool,
}

impl Reference {
    pub fn parse(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || FrisError::Config(format!("'{s}' is not a decimal number"));
        let (mant, exp) = match s.find(['e', 'E']) {
            Some(p) => (&s[..p], s[p + 1..].parse::<i32>().map_err(|_| bad())?),
            None => (s, 0),
        };
        let m: f64 = mant.parse().map_err(|_| bad())?;
        let value: f64 = s.parse().map_err(|_| bad())?;
        Ok(Self { value, ln_abs: m.abs().ln() + exp as f64 * std::f64::consts::LN_10, negative: m < 0.0 })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenOutcome {
    pub line: usize,
    pub row: GoldenRow,
    pub computed: f64,
    /// Relative error in the metric appropriate for the function.
    pub error: f64,
    pub tolerance: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GoldenReport {
    pub outcomes: Vec<GoldenOutcome>,
}

impl GoldenReport {
    pub fn failures(&self) -> impl Iterator<Item = &GoldenOutcome> {
        self.outcomes.iter().filter(|o| !o.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.failures().next().is_none()
    }

    pub fn max_error(&self, function: &str) -> Option<f64> {
        self.outcomes.iter().filter(|o| o.row.function == function).map(|o| o.error).reduce(f64::max)
    }
}

pub fn read_rows<R: Read>(input: R) -> Result<Vec<GoldenRow>> {
    let mut rdr = csv::Reader::from_reader(input);
    rdr.deserialize()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| FrisError::Config(format!("golden row {}: {e}", i + 2))))
        .collect()
}

fn param<'a>(params: &'a str, key: &str) -> Result<&'a str> {
    params
        .split(';')
        .filter_map(|kv| kv.split_once('='))
        .find(|(k, _)| k.trim() == key)
        .map(|(_, v)| v.trim())
        .ok_or_else(|| FrisError::Config(format!("missing parameter '{key}' in '{params}'")))
}

fn num<T: std::str::FromStr>(s: &str, what: &str) -> Result<T> {
    s.parse().map_err(|_| FrisError::Config(format!("{what} = '{s}' is not a valid number")))
}

/// `"3x2|1x1"` is eigenvalue 3 with multiplicity 2 and eigenvalue 1 with multiplicity 1.
pub fn parse_spectrum(s: &str) -> Result<SpectralModel> {
    let groups = s
        .split('|')
        .map(|g| {
            let (l, m) = g
                .split_once('x')
                .ok_or_else(|| FrisError::Config(format!("spectrum group '{g}' is not <lambda>x<mult>")))?;
            Ok(EigenGroup { lambda: num(l, "lambda")?, multiplicity: num(m, "multiplicity")? })
        })
        .collect::<Result<Vec<_>>>()?;
    SpectralModel::from_groups(groups)
}

fn rel(computed: f64, reference: f64, floor: f64) -> f64 {
    (computed - reference).abs() / reference.abs().max(floor)
}

pub fn check_row(line: usize, row: &GoldenRow) -> Result<GoldenOutcome> {
    let reference = Reference::parse(&row.value)?;
    let arg = || num::<f64>(&row.argument, "argument");
    let (computed, error, tolerance) = match row.function.as_str() {
        "bessel_j0" => {
            let v = bessel_j0(arg()?)?;
            // Near a zero the value is dominated by the rounding of the argument,
            // so the error is measured relative to max(|J0|, 1e-6).
            (v, rel(v, reference.value, 1e-6), DEFAULT_TOL)
        }
        "bessel_k" => {
            let k = bessel_k(num(param(&row.params, "nu")?, "nu")?, arg()?)?;
            let d = k.ln() - reference.ln_abs;
            (k.to_f64(), d.exp_m1().abs(), DEFAULT_TOL)
        }
        "ln_gamma" => {
            // ln Γ vanishes at 1 and 2; absolute error below unit magnitude.
            let v = ln_gamma(arg()?)?;
            (v, rel(v, reference.value, 1.0), DEFAULT_TOL)
        }
        "gamma" => {
            let v = gamma(arg()?)?;
            (v, rel(v, reference.value, 0.0), DEFAULT_TOL)
        }
        "meijer_g_ec" => {
            let v = meijer_g_ec(num(param(&row.params, "k")?, "k")?, arg()?)?;
            (v, rel(v, reference.value, 0.0), MEIJER_TOL)
        }
        "kdist_cdf" => {
            let k = num(param(&row.params, "k")?, "k")?;
            let lambda = num(param(&row.params, "lambda")?, "lambda")?;
            let v = kdist_cdf(k, lambda, arg()?)?;
            (v, rel(v, reference.value, 0.0), DEFAULT_TOL)
        }
        "pf_coeff" => {
            let model = coefficients(&parse_spectrum(param(&row.params, "spectrum")?)?)?;
            let lambda: f64 = num(param(&row.params, "lambda")?, "lambda")?;
            let k: usize = num(param(&row.params, "k")?, "k")?;
            let v = model
                .terms
                .iter()
                .find(|t| t.k == k && (t.lambda - lambda).abs() <= 1e-12 * lambda)
                .map_or(0.0, |t| t.c);
            (v, rel(v, reference.value, 0.0), DEFAULT_TOL)
        }
        "mixture_cdf" => {
            let model = coefficients(&parse_spectrum(param(&row.params, "spectrum")?)?)?;
            let v = model.cdf(arg()?)?;
            (v, rel(v, reference.value, 0.0), DEFAULT_TOL)
        }
        other => return Err(FrisError::Config(format!("golden row {line}: unknown function '{other}'"))),
    };
    Ok(GoldenOutcome { line, row: row.clone(), computed, error, tolerance, passed: error <= tolerance })
}

/// Evaluates every row; malformed rows are errors, numerical misses are reported.
pub fn check<R: Read>(input: R) -> Result<GoldenReport> {
    let rows = read_rows(input)?;
    if rows.is_empty() {
        return Err(FrisError::Config("golden file has no rows".into()));
    }
    let outcomes = rows.iter().enumerate().map(|(i, r)| check_row(i + 2, r)).collect::<Result<Vec<_>>>()?;
    Ok(GoldenReport { outcomes })
}
