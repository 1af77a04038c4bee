//! Expression language for nonlinearities `f(x, ξ)`, coefficient functions
//! `α(x)` and sequence generators `a(k)`.
//!
//! Grammar (EBNF):
//!
//! ```text
//! expr    = term { ("+" | "-") term } ;
//! term    = unary { ("*" | "/") unary } ;
//! unary   = ("-" | "+") unary | power ;
//! power   = atom [ "^" unary ] ;             (* right-associative *)
//! atom    = number | ident | call | "(" expr ")" ;
//! call    = fname "(" expr { "," expr } ")" ;
//! ident   = "x" | "xi" | "pi" | "k" ;        (* "k" only in generators *)
//! fname   = "abs" | "exp" | "log" | "sin" | "cos" | "min" | "max"
//!         | "spow" | "distosc" | "fact" ;
//! number  = digits [ "." digits ] [ ("e" | "E") [ "+" | "-" ] digits ] ;
//! ```
//!
//! `spow(e, p)` is `|e|^(p-2)·e` (0 at `e = 0`); `distosc(p)` is
//! `Σ_{k≥1} dist(ξ, ℝ \ [k!·k, (k+1)!])^p`.

mod ast;
pub mod bands;
mod eval;
mod parse;
mod poly;
mod primitive;

pub use ast::{BinOp, Expr, Func, Var};
pub use eval::{spow, EvalError};
pub use parse::{parse, parse_scoped, parse_sequence, ParseError, Scope};
pub use poly::Poly;
pub use primitive::{adaptive_simpson, Primitive, PrimitiveMode, QUADRATURE_MAX_DEPTH, QUADRATURE_TOL};
