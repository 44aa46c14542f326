//! Independent program evaluator used to cross-check the executor.
//!
//! Walks the step list directly, carrying exact rationals through the
//! algebraic operators and dropping to floating point only where roots or
//! trigonometry force it. Shares nothing with the executor beyond the
//! vocabulary's token tables: argument resolution, guards and operator
//! formulas are all re-derived here (`hypot` instead of `sqrt(a²+b²)`,
//! the factored `(a−b)(a+b)` instead of `a²−b²`, `to_radians` instead of
//! an explicit π/180 product).

use geosolver::program::{Arg, NumberMap, Program, ProgramVocabulary};
use num::rational::BigRational;
use num::{FromPrimitive, Signed, ToPrimitive};

#[derive(Debug, Clone)]
pub enum OracleValue {
    Exact(BigRational),
    Approx(f64),
}

impl OracleValue {
    pub fn to_f64(&self) -> f64 {
        match self {
            OracleValue::Exact(q) => q.to_f64().unwrap_or(f64::NAN),
            OracleValue::Approx(x) => *x,
        }
    }
}

/// Why the oracle refused. Mirrors the executor's failure conditions, not
/// its error type.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Rejection {
    Empty,
    MissingNumber,
    UnboundVariable,
    Domain,
    NonFinite,
}

fn exact(x: f64) -> OracleValue {
    BigRational::from_f64(x).map(OracleValue::Exact).unwrap_or(OracleValue::Approx(x))
}

fn pair(a: &OracleValue, b: &OracleValue) -> Option<(BigRational, BigRational)> {
    match (a, b) {
        (OracleValue::Exact(x), OracleValue::Exact(y)) => Some((x.clone(), y.clone())),
        _ => None,
    }
}

fn one(a: &OracleValue) -> Option<BigRational> {
    match a {
        OracleValue::Exact(x) => Some(x.clone()),
        OracleValue::Approx(_) => None,
    }
}

fn apply(name: &str, args: &[OracleValue]) -> Result<OracleValue, Rejection> {
    use OracleValue::{Approx, Exact};
    let f: Vec<f64> = args.iter().map(OracleValue::to_f64).collect();
    let two = BigRational::from_integer(2.into());
    let v = match (name, args.len()) {
        ("Minus", 2) => match pair(&args[0], &args[1]) {
            Some((a, b)) => Exact(a - b),
            None => Approx(f[0] - f[1]),
        },
        ("Add", 2) => match pair(&args[0], &args[1]) {
            Some((a, b)) => Exact(a + b),
            None => Approx(f[0] + f[1]),
        },
        ("Mul", 2) => match pair(&args[0], &args[1]) {
            Some((a, b)) => Exact(a * b),
            None => Approx(f[0] * f[1]),
        },
        ("Div", 2) => {
            if f[1].abs() <= 1e-12 {
                return Err(Rejection::Domain);
            }
            match pair(&args[0], &args[1]) {
                Some((a, b)) => Exact(a / b),
                None => Approx(f[0] / f[1]),
            }
        }
        ("Half", 1) => match one(&args[0]) {
            Some(a) => Exact(a / two),
            None => Approx(f[0] / 2.0),
        },
        ("Double", 1) => match one(&args[0]) {
            Some(a) => Exact(a * two),
            None => Approx(2.0 * f[0]),
        },
        ("Square", 1) => match one(&args[0]) {
            Some(a) => Exact(a.clone() * a),
            None => Approx(f[0] * f[0]),
        },
        ("Sqrt", 1) => {
            let non_negative = match &args[0] {
                Exact(q) => !q.is_negative(),
                Approx(x) => *x >= 0.0,
            };
            if !non_negative {
                return Err(Rejection::Domain);
            }
            Approx(f[0].sqrt())
        }
        ("SinDeg", 1) => Approx(f[0].to_radians().sin()),
        ("CosDeg", 1) => Approx(f[0].to_radians().cos()),
        ("TanDeg", 1) => {
            if f[0].to_radians().cos().abs() <= 1e-9 {
                return Err(Rejection::Domain);
            }
            Approx(f[0].to_radians().tan())
        }
        ("PythHyp", 2) => Approx(f[0].hypot(f[1])),
        ("PythLeg", 2) => match pair(&args[0], &args[1]) {
            Some((a, b)) => {
                let diff = a.clone() * a - b.clone() * b;
                if diff.is_negative() {
                    return Err(Rejection::Domain);
                }
                Approx(diff.to_f64().unwrap_or(f64::NAN).sqrt())
            }
            None => {
                let diff = (f[0] - f[1]) * (f[0] + f[1]);
                if diff < 0.0 {
                    return Err(Rejection::Domain);
                }
                Approx(diff.sqrt())
            }
        },
        _ => panic!("oracle has no rule for {name}/{}", args.len()),
    };
    if !v.to_f64().is_finite() {
        return Err(Rejection::NonFinite);
    }
    Ok(v)
}

/// Evaluate a segmented program against the oracle's own environment
/// discipline: step `k` may reference only variables bound by steps `< k`.
pub fn evaluate(
    vocab: &ProgramVocabulary,
    program: &Program,
    numbers: &NumberMap,
) -> Result<OracleValue, Rejection> {
    if program.steps.is_empty() {
        return Err(Rejection::Empty);
    }
    let mut env: Vec<OracleValue> = Vec::new();
    for (k, step) in program.steps.iter().enumerate() {
        let mut args = Vec::with_capacity(step.args.len());
        for arg in &step.args {
            args.push(match *arg {
                Arg::Const(c) => exact(vocab.constants()[c].1),
                Arg::Number(n) => exact(numbers.get(n).ok_or(Rejection::MissingNumber)?),
                Arg::Var(j) => {
                    if j >= k {
                        return Err(Rejection::UnboundVariable);
                    }
                    env[j].clone()
                }
            });
        }
        env.push(apply(&vocab.operators()[step.op].name, &args)?);
    }
    Ok(env.pop().expect("non-empty program"))
}
