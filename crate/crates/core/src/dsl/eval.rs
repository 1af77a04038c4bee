use thiserror::Error;

use super::ast::{BinOp, Expr, Func, Var};
use super::bands;

/// A partial function was applied outside its domain, or a node produced a
/// non-finite value.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("evaluation domain error in `{node}` at x = {x}, xi = {xi}: {reason}")]
pub struct EvalError {
    pub node: String,
    pub x: f64,
    pub xi: f64,
    pub reason: String,
}

#[derive(Debug, Clone, Copy)]
struct Env {
    x: f64,
    xi: f64,
    k: Option<f64>,
}

impl Expr {
    /// Evaluates at spatial point `x` and state value `xi`.
    pub fn eval(&self, x: f64, xi: f64) -> Result<f64, EvalError> {
        self.eval_env(&Env { x, xi, k: None })
    }

    /// Evaluates a sequence generator at index `k`.
    pub fn eval_seq(&self, k: f64) -> Result<f64, EvalError> {
        self.eval_env(&Env {
            x: 0.0,
            xi: 0.0,
            k: Some(k),
        })
    }

    fn fail(&self, env: &Env, reason: impl Into<String>) -> EvalError {
        EvalError {
            node: self.to_string(),
            x: env.x,
            xi: env.xi,
            reason: reason.into(),
        }
    }

    fn eval_env(&self, env: &Env) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Const(c) => *c,
            Expr::Var(Var::X) => env.x,
            Expr::Var(Var::Xi) => env.xi,
            Expr::Var(Var::K) => env
                .k
                .ok_or_else(|| self.fail(env, "sequence index used outside a generator"))?,
            Expr::Neg(e) => -e.eval_env(env)?,
            Expr::Binary(op, l, r) => {
                let a = l.eval_env(env)?;
                let b = r.eval_env(env)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == 0.0 {
                            return Err(self.fail(env, "division by zero"));
                        }
                        a / b
                    }
                    BinOp::Pow => {
                        if a < 0.0 && b.fract() != 0.0 {
                            return Err(self.fail(env, "negative base with non-integer exponent"));
                        }
                        if a == 0.0 && b < 0.0 {
                            return Err(self.fail(env, "zero raised to a negative power"));
                        }
                        pow(a, b)
                    }
                }
            }
            Expr::Call(func, args) => {
                let a = args[0].eval_env(env)?;
                match func {
                    Func::Abs => a.abs(),
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= 0.0 {
                            return Err(self.fail(env, "log of a non-positive value"));
                        }
                        a.ln()
                    }
                    Func::Sin => a.sin(),
                    Func::Cos => a.cos(),
                    Func::Min => a.min(args[1].eval_env(env)?),
                    Func::Max => a.max(args[1].eval_env(env)?),
                    Func::Spow => spow(a, args[1].eval_env(env)?),
                    Func::DistOsc => bands::distosc(env.xi, a),
                    Func::Fact => {
                        let n = a.round();
                        if (a - n).abs() > 1e-9 || !(0.0..=170.0).contains(&n) {
                            return Err(self.fail(env, "factorial needs an integer in [0, 170]"));
                        }
                        (1..=n as u32).map(f64::from).product()
                    }
                }
            }
        };
        if !v.is_finite() {
            return Err(self.fail(env, "non-finite result"));
        }
        Ok(v)
    }
}

/// `a^b`, with integer exponents taken through `powi` so odd powers of
/// negative numbers stay well defined.
fn pow(a: f64, b: f64) -> f64 {
    if b.fract() == 0.0 && b.abs() <= i32::MAX as f64 {
        a.powi(b as i32)
    } else {
        a.powf(b)
    }
}

/// `|e|^(p-2)·e`, and 0 at `e = 0` for every `p`.
pub fn spow(e: f64, p: f64) -> f64 {
    if e == 0.0 {
        0.0
    } else {
        e.abs().powf(p - 2.0) * e
    }
}
