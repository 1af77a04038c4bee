use std::sync::Arc;

use super::ast::{BinOp, Expr, Func, Var};
use super::bands;
use super::eval::EvalError;
use super::poly::Poly;

/// Absolute tolerance of the adaptive Simpson fallback.
pub const QUADRATURE_TOL: f64 = 1e-10;
/// Maximum bisection depth of the adaptive Simpson fallback.
pub const QUADRATURE_MAX_DEPTH: u32 = 40;

#[derive(Debug, Clone, PartialEq)]
enum Term {
    /// Closed-form antiderivative tree.
    Closed(Expr),
    /// `coeff(x) · ∫_0^ξ distosc(t, p) dt`, with band sums cached for constant `p`.
    DistOsc {
        coeff: Expr,
        p: Expr,
        cached: Option<(f64, Arc<[f64]>)>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PrimitiveMode {
    Symbolic,
    Quadrature,
}

/// `F(x, ξ) = ∫_0^ξ f(x, t) dt` for a source expression `f`.
///
/// Symbolic whenever `f` decomposes into polynomial terms, constant-power
/// monomials `c(x)·ξ^r`, `spow(ξ, p)` and `distosc(p)` terms; otherwise the
/// integral is computed by adaptive Simpson quadrature.
#[derive(Debug, Clone, PartialEq)]
pub struct Primitive {
    source: Expr,
    terms: Option<Vec<Term>>,
}

impl Primitive {
    pub fn new(source: &Expr) -> Primitive {
        let terms = symbolic_terms(source).map(|ts| ts.into_iter().map(cache_term).collect());
        Primitive {
            source: source.clone(),
            terms,
        }
    }

    /// Forces the quadrature route, independent of the symbolic rules.
    pub fn quadrature(source: &Expr) -> Primitive {
        Primitive {
            source: source.clone(),
            terms: None,
        }
    }

    pub fn source(&self) -> &Expr {
        &self.source
    }

    pub fn mode(&self) -> PrimitiveMode {
        if self.terms.is_some() {
            PrimitiveMode::Symbolic
        } else {
            PrimitiveMode::Quadrature
        }
    }

    pub fn eval(&self, x: f64, xi: f64) -> Result<f64, EvalError> {
        if xi == 0.0 {
            return Ok(0.0);
        }
        match &self.terms {
            Some(terms) => {
                let mut acc = 0.0;
                for t in terms {
                    acc += match t {
                        Term::Closed(e) => e.eval(x, xi)?,
                        Term::DistOsc { coeff, p, cached } => {
                            let c = coeff.eval(x, xi)?;
                            if c == 0.0 {
                                continue;
                            }
                            let pv = p.eval(x, xi)?;
                            let cum = cached
                                .as_ref()
                                .filter(|(cp, _)| *cp == pv)
                                .map(|(_, c)| &c[..]);
                            c * bands::distosc_primitive(xi, pv, cum)
                        }
                    };
                }
                Ok(acc)
            }
            None => self.integrate(x, xi),
        }
    }

    fn integrate(&self, x: f64, xi: f64) -> Result<f64, EvalError> {
        let (a, b, sign) = if xi > 0.0 { (0.0, xi, 1.0) } else { (xi, 0.0, -1.0) };
        let mut cuts = vec![a];
        self.source.kinks(a, b, &mut cuts);
        cuts.push(b);
        cuts.sort_by(f64::total_cmp);
        cuts.dedup();
        let pieces = (cuts.len() - 1) as f64;
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += adaptive_simpson(
                &|t| self.source.eval(x, t),
                w[0],
                w[1],
                QUADRATURE_TOL / pieces,
            )?;
        }
        Ok(sign * total)
    }
}

fn cache_term(t: Term) -> Term {
    match t {
        Term::DistOsc { coeff, p, .. } => {
            let cached = match p {
                Expr::Const(pv) => Some((pv, Arc::from(bands::cumulative_integrals(pv)))),
                _ => None,
            };
            Term::DistOsc { coeff, p, cached }
        }
        other => other,
    }
}

fn scale_terms(terms: Vec<Term>, s: &Expr) -> Vec<Term> {
    terms
        .into_iter()
        .map(|t| match t {
            Term::Closed(e) => Term::Closed(Expr::mul(s.clone(), e)),
            Term::DistOsc { coeff, p, cached } => Term::DistOsc {
                coeff: Expr::mul(s.clone(), coeff),
                p,
                cached,
            },
        })
        .collect()
}

fn symbolic_terms(e: &Expr) -> Option<Vec<Term>> {
    if let Some(poly) = Poly::from_expr(e) {
        return Some(vec![Term::Closed(poly.antiderivative())]);
    }
    match e {
        Expr::Neg(inner) => Some(scale_terms(symbolic_terms(inner)?, &Expr::Const(-1.0))),
        Expr::Binary(BinOp::Add, l, r) => {
            let mut ts = symbolic_terms(l)?;
            ts.extend(symbolic_terms(r)?);
            Some(ts)
        }
        Expr::Binary(BinOp::Sub, l, r) => {
            let mut ts = symbolic_terms(l)?;
            ts.extend(scale_terms(symbolic_terms(r)?, &Expr::Const(-1.0)));
            Some(ts)
        }
        Expr::Binary(BinOp::Mul, l, r) if !l.depends_on(Var::Xi) => {
            Some(scale_terms(symbolic_terms(r)?, l))
        }
        Expr::Binary(BinOp::Mul, l, r) if !r.depends_on(Var::Xi) => {
            Some(scale_terms(symbolic_terms(l)?, r))
        }
        Expr::Binary(BinOp::Div, l, r) if !r.depends_on(Var::Xi) => {
            let inv = Expr::div(Expr::Const(1.0), (**r).clone());
            Some(scale_terms(symbolic_terms(l)?, &inv))
        }
        // c·ξ^r with a constant exponent r != -1
        Expr::Binary(BinOp::Pow, base, exp) if **base == Expr::xi() => match **exp {
            Expr::Const(r) if r != -1.0 => Some(vec![Term::Closed(Expr::div(
                Expr::binary(BinOp::Pow, Expr::xi(), Expr::Const(r + 1.0)),
                Expr::Const(r + 1.0),
            ))]),
            _ => None,
        },
        // ∫_0^ξ |t|^(p-2) t dt = |ξ|^p / p
        Expr::Call(Func::Spow, args) if args[0] == Expr::xi() && !args[1].depends_on(Var::Xi) => {
            let p = args[1].clone();
            Some(vec![Term::Closed(Expr::div(
                Expr::binary(BinOp::Pow, Expr::call(Func::Abs, vec![Expr::xi()]), p.clone()),
                p,
            ))])
        }
        Expr::Call(Func::DistOsc, args) if !args[0].depends_on(Var::Xi) => Some(vec![Term::DistOsc {
            coeff: Expr::Const(1.0),
            p: args[0].clone(),
            cached: None,
        }]),
        _ => None,
    }
}

impl Expr {
    /// Appends `xi`-values in `(lo, hi)` where the expression is not smooth in
    /// `xi`: band ends and midpoints of `distosc`, and the origin for
    /// `abs(xi)`, `spow(xi, p)`, `min(xi, ·)` and `max(xi, ·)` against constants.
    pub fn kinks(&self, lo: f64, hi: f64, out: &mut Vec<f64>) {
        match self {
            Expr::Const(_) | Expr::Var(_) => {}
            Expr::Neg(e) => e.kinks(lo, hi, out),
            Expr::Binary(_, l, r) => {
                l.kinks(lo, hi, out);
                r.kinks(lo, hi, out);
            }
            Expr::Call(func, args) => {
                match func {
                    Func::DistOsc => bands::kinks_between(lo, hi, out),
                    Func::Abs | Func::Spow if args[0] == Expr::xi() && lo < 0.0 && hi > 0.0 => {
                        out.push(0.0)
                    }
                    Func::Min | Func::Max if args[0] == Expr::xi() => {
                        if let Expr::Const(c) = args[1] {
                            if c > lo && c < hi {
                                out.push(c);
                            }
                        }
                    }
                    _ => {}
                }
                for a in args {
                    a.kinks(lo, hi, out);
                }
            }
        }
    }
}

/// Adaptive Simpson rule on `[a, b]` to absolute tolerance `tol`, or to
/// relative accuracy 1e-14 where that is looser.
pub fn adaptive_simpson<F>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64, EvalError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    if a == b {
        return Ok(0.0);
    }
    let fa = f(a)?;
    let fb = f(b)?;
    let m = 0.5 * (a + b);
    let fm = f(m)?;
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(f, a, b, fa, fm, fb, whole, tol, QUADRATURE_MAX_DEPTH)
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64, EvalError>
where
    F: Fn(f64) -> Result<f64, EvalError>,
{
    let m = 0.5 * (a + b);
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm)?;
    let frm = f(rm)?;
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // relative floor keeps huge integrands from recursing to full depth
    let tol_here = tol.max(1e-14 * (left + right).abs());
    if depth == 0 || delta.abs() <= 15.0 * tol_here {
        return Ok(left + right + delta / 15.0);
    }
    Ok(simpson_step(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
        + simpson_step(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    fn prim(src: &str) -> Primitive {
        Primitive::new(&parse(src).unwrap())
    }

    #[test]
    fn closed_forms() {
        assert_eq!(prim("xi").eval(0.0, 2.0).unwrap(), 2.0);
        assert_eq!(prim("xi^3").eval(0.0, 2.0).unwrap(), 4.0);
        assert_eq!(prim("xi^3").mode(), PrimitiveMode::Symbolic);
        assert!((prim("xi^0.5").eval(0.0, 4.0).unwrap() - 16.0 / 3.0).abs() < 1e-12);
        assert!((prim("spow(xi, 3)").eval(0.0, -2.0).unwrap() - 8.0 / 3.0).abs() < 1e-12);
        assert_eq!(prim("exp(xi)").mode(), PrimitiveMode::Quadrature);
        assert!((prim("exp(xi)").eval(0.0, 1.0).unwrap() - (1f64.exp() - 1.0)).abs() < 1e-10);
    }

    #[test]
    fn vanishes_at_origin() {
        for src in ["xi^3", "exp(x*xi)", "distosc(2) - spow(xi, 2)", "sin(xi) + x"] {
            let p = prim(src);
            for x in [0.0, 0.3, 1.0] {
                assert_eq!(p.eval(x, 0.0).unwrap(), 0.0);
            }
        }
    }

    #[test]
    fn distosc_flat_across_gap_matches_quadrature() {
        let e = parse("distosc(2)").unwrap();
        let sym = Primitive::new(&e);
        let quad = Primitive::quadrature(&e);
        let d = sym.eval(0.0, 3.0).unwrap() - sym.eval(0.0, 2.5).unwrap();
        assert_eq!(d, 0.0);
        let dq = quad.eval(0.0, 3.0).unwrap() - quad.eval(0.0, 2.5).unwrap();
        assert!(dq.abs() < 1e-10);
        for xi in [1.3, 2.0, 5.5, 19.0, 100.0] {
            let a = sym.eval(0.0, xi).unwrap();
            let b = quad.eval(0.0, xi).unwrap();
            assert!((a - b).abs() < 1e-8 * (1.0 + a.abs()), "xi = {xi}: {a} vs {b}");
        }
    }

    #[test]
    fn x_dependent_coefficients() {
        let p = prim("x * xi + 2 * distosc(2)");
        assert_eq!(p.mode(), PrimitiveMode::Symbolic);
        let v = p.eval(3.0, 2.0).unwrap();
        assert!((v - (3.0 * 2.0 + 2.0 / 12.0)).abs() < 1e-14);
    }
}
