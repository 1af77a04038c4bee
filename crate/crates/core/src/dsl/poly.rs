use super::ast::{BinOp, Expr, Var};

const MAX_DEGREE: usize = 32;

/// Polynomial in `xi` whose coefficients are `xi`-free expressions
/// (they may still depend on `x`).
#[derive(Debug, Clone, PartialEq)]
pub struct Poly {
    pub coeffs: Vec<Expr>,
}

impl Poly {
    fn constant(e: Expr) -> Poly {
        Poly { coeffs: vec![e] }
    }

    pub fn degree(&self) -> usize {
        self.coeffs
            .iter()
            .rposition(|c| *c != Expr::Const(0.0))
            .unwrap_or(0)
    }

    /// True when every coefficient is a plain number.
    pub fn is_numeric(&self) -> bool {
        self.coeffs.iter().all(|c| matches!(c, Expr::Const(_)))
    }

    fn add(mut self, other: Poly) -> Poly {
        if other.coeffs.len() > self.coeffs.len() {
            self.coeffs.resize(other.coeffs.len(), Expr::Const(0.0));
        }
        for (i, c) in other.coeffs.into_iter().enumerate() {
            let cur = std::mem::replace(&mut self.coeffs[i], Expr::Const(0.0));
            self.coeffs[i] = Expr::add(cur, c);
        }
        self
    }

    fn scale(self, s: &Expr) -> Poly {
        Poly {
            coeffs: self
                .coeffs
                .into_iter()
                .map(|c| Expr::mul(s.clone(), c))
                .collect(),
        }
    }

    fn mul(&self, other: &Poly) -> Option<Poly> {
        let n = self.coeffs.len() + other.coeffs.len() - 1;
        if n > MAX_DEGREE + 1 {
            return None;
        }
        let mut out = vec![Expr::Const(0.0); n];
        for (i, a) in self.coeffs.iter().enumerate() {
            for (j, b) in other.coeffs.iter().enumerate() {
                let cur = std::mem::replace(&mut out[i + j], Expr::Const(0.0));
                out[i + j] = Expr::add(cur, Expr::mul(a.clone(), b.clone()));
            }
        }
        Some(Poly { coeffs: out })
    }

    /// Extracts the polynomial structure of `e`, or `None` when `e` is not a
    /// polynomial in `xi` of degree at most 32.
    pub fn from_expr(e: &Expr) -> Option<Poly> {
        if !e.depends_on(Var::Xi) {
            if e.depends_on(Var::K) {
                return None;
            }
            return Some(Poly::constant(e.clone()));
        }
        match e {
            Expr::Var(Var::Xi) => Some(Poly {
                coeffs: vec![Expr::Const(0.0), Expr::Const(1.0)],
            }),
            Expr::Neg(inner) => Some(Poly::from_expr(inner)?.scale(&Expr::Const(-1.0))),
            Expr::Binary(op, l, r) => match op {
                BinOp::Add => Some(Poly::from_expr(l)?.add(Poly::from_expr(r)?)),
                BinOp::Sub => Some(
                    Poly::from_expr(l)?.add(Poly::from_expr(r)?.scale(&Expr::Const(-1.0))),
                ),
                BinOp::Mul => Poly::from_expr(l)?.mul(&Poly::from_expr(r)?),
                BinOp::Div => {
                    if r.depends_on(Var::Xi) {
                        return None;
                    }
                    let num = Poly::from_expr(l)?;
                    Some(Poly {
                        coeffs: num
                            .coeffs
                            .into_iter()
                            .map(|c| Expr::div(c, (**r).clone()))
                            .collect(),
                    })
                }
                BinOp::Pow => {
                    let n = match **r {
                        Expr::Const(n) if n >= 0.0 && n.fract() == 0.0 && n <= MAX_DEGREE as f64 => {
                            n as usize
                        }
                        _ => return None,
                    };
                    let base = Poly::from_expr(l)?;
                    let mut acc = Poly::constant(Expr::Const(1.0));
                    for _ in 0..n {
                        acc = acc.mul(&base)?;
                    }
                    Some(acc)
                }
            },
            _ => None,
        }
    }

    /// `Σ c_j ξ^(j+1)/(j+1)` as an expression tree.
    pub fn antiderivative(&self) -> Expr {
        let mut out = Expr::Const(0.0);
        for (j, c) in self.coeffs.iter().enumerate() {
            if *c == Expr::Const(0.0) {
                continue;
            }
            let power = (j + 1) as f64;
            let mono = if j == 0 {
                Expr::xi()
            } else {
                Expr::binary(BinOp::Pow, Expr::xi(), Expr::Const(power))
            };
            let term = Expr::mul(Expr::div(c.clone(), Expr::Const(power)), mono);
            out = Expr::add(out, term);
        }
        out
    }
}
