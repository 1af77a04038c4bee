//! Symbolic and sampled checks of the growth, sign and oscillation conditions
//! placed on user nonlinearities.
//!
//! Asymptotic conditions are decided on finite grids. A sampled `holds` is
//! reported as `holds (numerically)`; every `fails` carries witnesses that
//! [`Verdict::replay`] recomputes by an independent route (quadrature
//! primitives instead of symbolic ones).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dsl::{adaptive_simpson, Expr, Poly, Primitive, Var, QUADRATURE_TOL};
use crate::error::{precondition, Result};

mod sequences;

pub use sequences::{suggest_sequences, Generator, SeqMode, SequencePair, Suggestion};

/// Ratios beyond this magnitude count as diverging.
pub const BIG: f64 = 1e6;
/// `sup |f/ξ|` must fall below this by the smallest sampled `ξ`.
pub const ZERO_SLOPE_THRESHOLD: f64 = 1e-4;
const REL_SLACK: f64 = 1e-12;

pub const GROWTH: &str = "growth";
pub const AR: &str = "ar";
pub const ZERO_SLOPE: &str = "zero_slope";
pub const F_SMALL: &str = "f_small_power";
pub const G_SMALL: &str = "g_small_power";
pub const G_BLOWUP: &str = "g_primitive_blowup";
pub const G_BOUNDED: &str = "g_primitive_bounded";
pub const POSITIVITY: &str = "positivity";
pub const ZONE_ORDER: &str = "dead_zone_order";
pub const ZONE_RATIO: &str = "dead_zone_ratio";
pub const ZONE_SIGN: &str = "dead_zone_sign";
pub const PRIMITIVE_GROWTH: &str = "primitive_growth";
pub const G_SIGN: &str = "g_primitive_sign";
pub const G_LOWER: &str = "g_primitive_lower";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grid {
    /// Log-spaced `ξ` samples per decade.
    pub per_decade: usize,
    /// Uniform `x` samples on each spatial interval.
    pub x_points: usize,
}

impl Default for Grid {
    fn default() -> Self {
        Grid {
            per_decade: 512,
            x_points: 64,
        }
    }
}

/// Ascending log-spaced points from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, per_decade: usize) -> Vec<f64> {
    let n = ((hi / lo).log10() * per_decade as f64).ceil().max(1.0) as usize;
    let step = (hi / lo).ln() / n as f64;
    let mut v: Vec<f64> = (0..n).map(|i| lo * (step * i as f64).exp()).collect();
    v.push(hi);
    v
}

fn x_mesh(lo: f64, hi: f64, n: usize, used: bool) -> Vec<f64> {
    if !used || n < 2 {
        return vec![0.5 * (lo + hi)];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Holds,
    Fails,
    Inconclusive,
}

impl Status {
    fn rank(self) -> u8 {
        match self {
            Status::Holds => 0,
            Status::Inconclusive => 1,
            Status::Fails => 2,
        }
    }

    /// The less favourable of two statuses.
    pub fn worst(self, other: Status) -> Status {
        if other.rank() > self.rank() {
            other
        } else {
            self
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Symbolic,
    Sampled,
}

/// Which of the two nonlinearities a probe evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Of {
    F,
    G,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Weight {
    /// `|ξ|^e`
    Power { e: f64 },
    /// `ξ·|ln ξ|²`
    LogSquared,
}

impl Weight {
    fn eval(self, xi: f64) -> f64 {
        match self {
            Weight::Power { e } => xi.abs().powf(e),
            Weight::LogSquared => xi * xi.abs().ln().powi(2),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    Lt,
    Le,
    Gt,
    Ge,
}

impl Relation {
    fn holds(self, value: f64, bound: f64, scale: f64) -> bool {
        let slack = REL_SLACK * scale;
        match self {
            Relation::Lt => value < bound,
            Relation::Le => value <= bound + slack,
            Relation::Gt => value > bound,
            Relation::Ge => value >= bound - slack,
        }
    }
}

/// A quantity evaluated at one sample point, together with the bound the
/// condition places on it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "probe", rename_all = "snake_case")]
pub enum Probe {
    /// `|h(x, ξ)|` against `a(1 + |ξ|^q)`.
    Growth { of: Of, x: f64, xi: f64, a: f64, q: f64 },
    /// `c·H(x, ξ)` against 0.
    ArPositive { of: Of, x: f64, xi: f64, c: f64 },
    /// `c·H(x, ξ)` against `ξ·h(x, ξ)`.
    ArBound { of: Of, x: f64, xi: f64, c: f64 },
    /// `h/w` or `H/w`, optionally in absolute value, against a fixed bound.
    Quotient {
        of: Of,
        primitive: bool,
        abs: bool,
        x: f64,
        xi: f64,
        weight: Weight,
        bound: f64,
    },
    /// `∫_from^to h(x, t) dt` against 0.
    Increment { of: Of, x: f64, from: f64, to: f64 },
    /// A number computed from the inputs alone (exponents, sequence terms).
    Number { value: f64, bound: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Route {
    Primary,
    Independent,
}

struct Measure {
    value: f64,
    bound: f64,
    scale: f64,
}

/// The nonlinearities under test with their primitives.
#[derive(Debug, Clone)]
pub struct Subject {
    f: Option<(Expr, Primitive)>,
    g: Option<(Expr, Primitive)>,
}

impl Subject {
    pub fn new(f: Option<&Expr>, g: Option<&Expr>) -> Subject {
        let with = |e: &Expr| (e.clone(), Primitive::new(e));
        Subject {
            f: f.map(with),
            g: g.map(with),
        }
    }

    pub fn f(f: &Expr) -> Subject {
        Subject::new(Some(f), None)
    }

    pub fn g(g: &Expr) -> Subject {
        Subject::new(None, Some(g))
    }

    fn get(&self, of: Of) -> Result<&(Expr, Primitive)> {
        match of {
            Of::F => self.f.as_ref(),
            Of::G => self.g.as_ref(),
        }
        .ok_or_else(|| precondition(format!("no expression for {of:?}")))
    }

    fn value(&self, of: Of, x: f64, xi: f64) -> Result<f64> {
        Ok(self.get(of)?.0.eval(x, xi)?)
    }

    fn primitive(&self, of: Of, x: f64, xi: f64, route: Route) -> Result<f64> {
        let (e, p) = self.get(of)?;
        Ok(match route {
            Route::Primary => p.eval(x, xi)?,
            Route::Independent => Primitive::quadrature(e).eval(x, xi)?,
        })
    }

    fn increment(&self, of: Of, x: f64, from: f64, to: f64, route: Route) -> Result<(f64, f64)> {
        match route {
            Route::Primary => {
                let a = self.primitive(of, x, from, route)?;
                let b = self.primitive(of, x, to, route)?;
                Ok((b - a, a.abs() + b.abs()))
            }
            Route::Independent => {
                let e = &self.get(of)?.0;
                let (lo, hi, sign) = if from <= to { (from, to, 1.0) } else { (to, from, -1.0) };
                let mut cuts = vec![lo];
                e.kinks(lo, hi, &mut cuts);
                cuts.push(hi);
                cuts.sort_by(f64::total_cmp);
                cuts.dedup();
                let pieces = (cuts.len() - 1) as f64;
                let mut total = 0.0;
                for w in cuts.windows(2) {
                    total += adaptive_simpson(&|t| e.eval(x, t), w[0], w[1], QUADRATURE_TOL / pieces)?;
                }
                Ok((sign * total, total.abs()))
            }
        }
    }
}

impl Probe {
    fn measure(&self, s: &Subject, route: Route) -> Result<Measure> {
        let m = |value: f64, bound: f64| Measure {
            value,
            bound,
            scale: value.abs() + bound.abs(),
        };
        Ok(match *self {
            Probe::Growth { of, x, xi, a, q } => m(s.value(of, x, xi)?.abs(), a * (1.0 + xi.abs().powf(q))),
            Probe::ArPositive { of, x, xi, c } => m(c * s.primitive(of, x, xi, route)?, 0.0),
            Probe::ArBound { of, x, xi, c } => m(c * s.primitive(of, x, xi, route)?, xi * s.value(of, x, xi)?),
            Probe::Quotient {
                of,
                primitive,
                abs,
                x,
                xi,
                weight,
                bound,
            } => {
                let h = if primitive {
                    s.primitive(of, x, xi, route)?
                } else {
                    s.value(of, x, xi)?
                };
                let q = h / weight.eval(xi);
                m(if abs { q.abs() } else { q }, bound)
            }
            Probe::Increment { of, x, from, to } => {
                let (value, scale) = s.increment(of, x, from, to, route)?;
                Measure {
                    value,
                    bound: 0.0,
                    scale,
                }
            }
            Probe::Number { value, bound } => m(value, bound),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Witness {
    pub label: String,
    pub probe: Probe,
    /// How `value` must relate to `bound` for the condition.
    pub relation: Relation,
    pub value: f64,
    pub bound: f64,
    /// True when the sample violates the condition.
    pub violation: bool,
}

impl Witness {
    fn new(label: &str, probe: Probe, relation: Relation, s: &Subject) -> Result<Witness> {
        let m = probe.measure(s, Route::Primary)?;
        Ok(Witness {
            label: label.to_string(),
            probe,
            relation,
            value: m.value,
            bound: m.bound,
            violation: !relation.holds(m.value, m.bound, m.scale),
        })
    }

    /// Recomputes the probe with quadrature primitives and reports whether
    /// the sample still violates the condition.
    pub fn replay(&self, s: &Subject) -> Result<bool> {
        let m = self.probe.measure(s, Route::Independent)?;
        Ok(!self.relation.holds(m.value, m.bound, m.scale))
    }
}

/// The `ξ` and `x` ranges a sampled check covered.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SampleRange {
    pub xi_min: f64,
    pub xi_max: f64,
    pub both_signs: bool,
    pub per_decade: usize,
    pub x_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub condition: String,
    pub status: Status,
    pub method: Method,
    pub witnesses: Vec<Witness>,
    pub ranges: Vec<SampleRange>,
    /// Whether the growth exponent is below the critical one; `None` when the
    /// dimension imposes no bound.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub subcritical: Option<bool>,
    pub note: String,
}

impl Verdict {
    fn new(condition: &str, status: Status, method: Method) -> Verdict {
        Verdict {
            condition: condition.to_string(),
            status,
            method,
            witnesses: Vec::new(),
            ranges: Vec::new(),
            subcritical: None,
            note: String::new(),
        }
    }

    fn with_note(mut self, note: impl Into<String>) -> Verdict {
        self.note = note.into();
        self
    }

    /// Report label; sampled successes read `holds (numerically)`.
    pub fn label(&self) -> &'static str {
        match (self.status, self.method) {
            (Status::Holds, Method::Sampled) => "holds (numerically)",
            (Status::Holds, Method::Symbolic) => "holds",
            (Status::Fails, _) => "fails",
            (Status::Inconclusive, _) => "inconclusive",
        }
    }

    pub fn violations(&self) -> impl Iterator<Item = &Witness> {
        self.witnesses.iter().filter(|w| w.violation)
    }

    /// True when the verdict is not `fails`, or when every violation
    /// re-evaluates as a violation and at least one exists.
    pub fn replay(&self, s: &Subject) -> Result<bool> {
        if self.status != Status::Fails {
            return Ok(true);
        }
        let mut any = false;
        for w in self.violations() {
            if !w.replay(s)? {
                return Ok(false);
            }
            any = true;
        }
        Ok(any)
    }
}

#[derive(Debug, Clone, Copy)]
struct Sample {
    xi: f64,
    x: f64,
    value: f64,
}

/// For each `ξ`, the extreme of `val(x, ξ)` over the mesh, or `None` when some
/// evaluation failed.
fn extremes<F>(xis: &[f64], mesh: &[f64], max: bool, val: F) -> Vec<Option<Sample>>
where
    F: Fn(f64, f64) -> Result<f64, crate::error::Error> + Sync,
{
    xis.par_iter()
        .map(|&xi| {
            let mut best: Option<Sample> = None;
            for &x in mesh {
                let value = val(x, xi).ok().filter(|v| !v.is_nan())?;
                let better = match best {
                    None => true,
                    Some(b) => (max && value > b.value) || (!max && value < b.value),
                };
                if better {
                    best = Some(Sample { xi, x, value });
                }
            }
            best
        })
        .collect()
}

fn critical_exponent(n: usize) -> Option<f64> {
    (n >= 3).then(|| (n as f64 + 2.0) / (n as f64 - 2.0))
}

fn numeric_coeffs(f: &Expr) -> Option<Vec<f64>> {
    let p = Poly::from_expr(f)?;
    if !p.is_numeric() {
        return None;
    }
    Some(
        p.coeffs
            .iter()
            .map(|c| match c {
                Expr::Const(v) => *v,
                _ => unreachable!(),
            })
            .collect(),
    )
}

/// Uniform bound `|f(x, ξ)| ≤ a(1 + |ξ|^q)` on `Ω × ℝ`, with the
/// subcriticality of `q` in dimension `n`.
pub fn check_growth(f: &Expr, a: f64, q: f64, n: usize, grid: &Grid) -> Result<Verdict> {
    growth_preconditions(a, q, n)?;
    let s = Subject::f(f);
    let mut v = match growth_symbolic(f, &s, a, q)? {
        Some(v) => v,
        None => growth_sampled(f, &s, a, q, grid)?,
    };
    finish_growth(&mut v, q, n);
    Ok(v)
}

/// [`check_growth`] forced onto the sampling route.
pub fn check_growth_sampled(f: &Expr, a: f64, q: f64, n: usize, grid: &Grid) -> Result<Verdict> {
    growth_preconditions(a, q, n)?;
    let mut v = growth_sampled(f, &Subject::f(f), a, q, grid)?;
    finish_growth(&mut v, q, n);
    Ok(v)
}

fn growth_preconditions(a: f64, q: f64, n: usize) -> Result<()> {
    if !(a > 0.0 && q > 0.0 && a.is_finite() && q.is_finite()) {
        return Err(precondition("growth constants a and q must be positive"));
    }
    if n == 0 {
        return Err(precondition("dimension must be at least 1"));
    }
    Ok(())
}

fn finish_growth(v: &mut Verdict, q: f64, n: usize) {
    let Some(crit) = critical_exponent(n) else {
        return;
    };
    v.subcritical = Some(q < crit);
    if q >= crit {
        v.status = Status::Fails;
        v.witnesses.push(Witness {
            label: "critical exponent".into(),
            probe: Probe::Number { value: q, bound: crit },
            relation: Relation::Lt,
            value: q,
            bound: crit,
            violation: true,
        });
    }
}

fn growth_symbolic(f: &Expr, s: &Subject, a: f64, q: f64) -> Result<Option<Verdict>> {
    let Some(c) = numeric_coeffs(f) else {
        return Ok(None);
    };
    let deg = c.iter().rposition(|v| *v != 0.0).unwrap_or(0);
    if deg as f64 > q {
        // the leading term wins eventually; walk out until it does
        for j in 0..1100 {
            let xi = 2f64.powi(j);
            for xi in [xi, -xi] {
                let w = Witness::new(GROWTH, Probe::Growth { of: Of::F, x: 0.5, xi, a, q }, Relation::Le, s)?;
                if w.violation {
                    let mut v = Verdict::new(GROWTH, Status::Fails, Method::Symbolic)
                        .with_note(format!("degree {deg} exceeds q = {q}"));
                    v.witnesses.push(w);
                    return Ok(Some(v));
                }
            }
        }
        return Ok(None);
    }
    let l1: f64 = c.iter().map(|v| v.abs()).sum();
    if l1 <= a {
        // Σ|c_i||ξ|^i ≤ Σ|c_i|·max(1, |ξ|^deg) ≤ a(1 + |ξ|^q)
        return Ok(Some(
            Verdict::new(GROWTH, Status::Holds, Method::Symbolic)
                .with_note(format!("degree {deg} ≤ q and coefficient sum {l1} ≤ a")),
        ));
    }
    Ok(None)
}

fn growth_sampled(f: &Expr, s: &Subject, a: f64, q: f64, grid: &Grid) -> Result<Verdict> {
    let (lo, hi) = (1e-6, 1e6);
    let mut xis = vec![0.0];
    for xi in log_grid(lo, hi, grid.per_decade) {
        xis.push(xi);
        xis.push(-xi);
    }
    let mesh = x_mesh(0.0, 1.0, grid.x_points, f.depends_on(Var::X));
    let samples = extremes(&xis, &mesh, true, |x, xi| Ok(f.eval(x, xi)?.abs() / (a * (1.0 + xi.abs().powf(q)))));
    let skipped = samples.iter().filter(|s| s.is_none()).count();
    let worst = samples
        .iter()
        .flatten()
        .fold(None::<Sample>, |b, s| if b.is_none_or(|b| s.value > b.value) { Some(*s) } else { b });
    let range = SampleRange {
        xi_min: lo,
        xi_max: hi,
        both_signs: true,
        per_decade: grid.per_decade,
        x_points: mesh.len(),
    };
    let mut v = Verdict::new(GROWTH, Status::Holds, Method::Sampled);
    v.ranges.push(range);
    if let Some(w) = worst {
        let wit = Witness::new(GROWTH, Probe::Growth { of: Of::F, x: w.x, xi: w.xi, a, q }, Relation::Le, s)?;
        if wit.violation {
            v.status = Status::Fails;
        }
        v.witnesses.push(wit);
    }
    if v.status == Status::Holds && skipped > 0 {
        v.status = Status::Inconclusive;
        v.note = format!("{skipped} samples could not be evaluated");
    }
    Ok(v)
}

/// `0 < c·F(x, ξ) ≤ ξ·f(x, ξ)` for `|ξ| ≥ r`, with `c > 2`.
pub fn check_ar(f: &Expr, c: f64, r: f64, grid: &Grid) -> Result<Verdict> {
    if !(c > 2.0) || !c.is_finite() {
        return Err(precondition(format!("c must exceed 2, got {c}")));
    }
    if !(r >= 0.0) || !r.is_finite() {
        return Err(precondition(format!("r must be non-negative, got {r}")));
    }
    let s = Subject::f(f);
    let lo = r.max(1e-3);
    let hi = 1e6_f64.max(lo);
    let mut xis = Vec::new();
    for xi in log_grid(lo, hi, grid.per_decade) {
        xis.push(xi);
        xis.push(-xi);
    }
    let mesh = x_mesh(0.0, 1.0, grid.x_points, f.depends_on(Var::X));
    let prim = &s.get(Of::F)?.1;
    // positivity: smallest c·F; upper bound: largest normalized c·F − ξf
    let low = extremes(&xis, &mesh, false, |x, xi| Ok(c * prim.eval(x, xi)?));
    let gap = extremes(&xis, &mesh, true, |x, xi| {
        let cf = c * prim.eval(x, xi)?;
        let xf = xi * f.eval(x, xi)?;
        let scale = cf.abs() + xf.abs();
        Ok(if scale == 0.0 { 0.0 } else { (cf - xf) / scale })
    });
    let skipped = low.iter().chain(&gap).filter(|s| s.is_none()).count();
    let mut v = Verdict::new(AR, Status::Holds, Method::Sampled);
    v.ranges.push(SampleRange {
        xi_min: lo,
        xi_max: hi,
        both_signs: true,
        per_decade: grid.per_decade,
        x_points: mesh.len(),
    });
    let pick = |set: &[Option<Sample>], max: bool| {
        set.iter().flatten().fold(None::<Sample>, |b, s| {
            if b.is_none_or(|b| if max { s.value > b.value } else { s.value < b.value }) {
                Some(*s)
            } else {
                b
            }
        })
    };
    if let Some(w) = pick(&low, false) {
        let wit = Witness::new("positivity", Probe::ArPositive { of: Of::F, x: w.x, xi: w.xi, c }, Relation::Gt, &s)?;
        v.witnesses.push(wit);
    }
    if let Some(w) = pick(&gap, true) {
        let wit = Witness::new("upper bound", Probe::ArBound { of: Of::F, x: w.x, xi: w.xi, c }, Relation::Le, &s)?;
        v.witnesses.push(wit);
    }
    if v.witnesses.iter().any(|w| w.violation) {
        v.status = Status::Fails;
    } else if skipped > 0 {
        v.status = Status::Inconclusive;
        v.note = format!("{skipped} samples could not be evaluated");
    }
    Ok(v)
}

/// `f(x, ξ)/ξ → 0` as `ξ → 0`, uniformly in `x`.
pub fn check_limit_zero(f: &Expr, grid: &Grid) -> Result<Verdict> {
    let s = Subject::f(f);
    let (lo, hi) = (1e-8, 1e-1);
    let decades = 7;
    let mesh = x_mesh(0.0, 1.0, grid.x_points, f.depends_on(Var::X));
    let pts: Vec<f64> = log_grid(lo, hi, grid.per_decade).into_iter().rev().collect();
    let mut xis = Vec::with_capacity(2 * pts.len());
    for xi in &pts {
        xis.push(*xi);
        xis.push(-*xi);
    }
    let samples = extremes(&xis, &mesh, true, |x, xi| Ok((f.eval(x, xi)? / xi).abs()));
    let mut v = Verdict::new(ZERO_SLOPE, Status::Inconclusive, Method::Sampled);
    v.ranges.push(SampleRange {
        xi_min: lo,
        xi_max: hi,
        both_signs: true,
        per_decade: grid.per_decade,
        x_points: mesh.len(),
    });
    if samples.iter().any(|s| s.is_none()) {
        return Ok(v.with_note("some samples could not be evaluated"));
    }
    // decade d holds |ξ| in [10^-(d+2), 10^-(d+1)]
    let mut sups: Vec<Sample> = Vec::with_capacity(decades);
    for d in 0..decades {
        let top = hi * 10f64.powi(-(d as i32));
        let bottom = top / 10.0;
        let best = samples
            .iter()
            .flatten()
            .filter(|s| s.xi.abs() <= top * (1.0 + 1e-12) && s.xi.abs() >= bottom * (1.0 - 1e-12))
            .fold(None::<Sample>, |b, s| if b.is_none_or(|b| s.value > b.value) { Some(*s) } else { b });
        sups.extend(best);
    }
    let first = sups[0].value;
    let last = *sups.last().unwrap();
    let decreasing = sups.windows(2).all(|w| w[1].value <= w[0].value * (1.0 + 1e-9));
    let probe = Probe::Quotient {
        of: Of::F,
        primitive: false,
        abs: true,
        x: last.x,
        xi: last.xi,
        weight: Weight::Power { e: 1.0 },
        bound: ZERO_SLOPE_THRESHOLD,
    };
    v.witnesses.push(Witness::new("smallest decade", probe, Relation::Lt, &s)?);
    if last.value < ZERO_SLOPE_THRESHOLD && decreasing {
        v.status = Status::Holds;
    } else if last.value >= ZERO_SLOPE_THRESHOLD && last.value >= first * (1.0 - 1e-9) {
        v.status = Status::Fails;
        v.note = "sup |f/ξ| does not decrease toward 0".into();
    } else {
        v.note = "sup |f/ξ| is not monotone or has not yet fallen below the threshold".into();
    }
    Ok(v)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Trend {
    /// `limsup < +∞`
    BoundedAbove,
    /// `limsup = +∞`
    UnboundedAbove,
    /// `liminf > −∞`
    BoundedBelow,
}

/// Decides a limit condition from samples ordered toward the limit point.
/// The last quarter of the samples is compared with the rest; crossing
/// `±BIG` counts as divergence.
fn decide(
    condition: &str,
    trend: Trend,
    samples: &[Sample],
    probe: impl Fn(&Sample, f64) -> Probe,
    s: &Subject,
) -> Result<Verdict> {
    let mut v = Verdict::new(condition, Status::Inconclusive, Method::Sampled);
    if samples.len() < 8 {
        return Ok(v.with_note("too few evaluable samples"));
    }
    let split = samples.len() - samples.len() / 4;
    let (head, tail) = samples.split_at(split);
    let arg = |set: &[Sample], max: bool| {
        *set.iter()
            .reduce(|b, s| if (max && s.value > b.value) || (!max && s.value < b.value) { s } else { b })
            .unwrap()
    };
    let tol = |a: f64, b: f64| 1e-9 * (a.abs() + b.abs());
    match trend {
        Trend::BoundedAbove => {
            let (h, t) = (arg(head, true), arg(tail, true));
            if t.value <= h.value + tol(h.value, t.value) {
                v.status = Status::Holds;
                v.witnesses.push(Witness::new("tail maximum", probe(&t, h.value), Relation::Le, s)?);
            } else if t.value > BIG {
                v.status = Status::Fails;
                v.witnesses.push(Witness::new("divergence", probe(&t, BIG), Relation::Le, s)?);
            } else {
                v.note = "ratio still growing below the divergence threshold".into();
            }
        }
        Trend::UnboundedAbove => {
            if let Some(b) = samples.iter().find(|s| s.value > BIG) {
                v.status = Status::Holds;
                v.witnesses.push(Witness::new("divergence", probe(b, BIG), Relation::Gt, s)?);
            } else {
                let (h, t) = (arg(head, true), arg(tail, true));
                if t.value <= h.value + tol(h.value, t.value) {
                    v.status = Status::Fails;
                    v.witnesses.push(Witness::new("tail maximum", probe(&t, BIG), Relation::Gt, s)?);
                    v.note = "ratio does not grow toward the limit".into();
                } else {
                    v.note = "ratio growing but below the divergence threshold".into();
                }
            }
        }
        Trend::BoundedBelow => {
            let (h, t) = (arg(head, false), arg(tail, false));
            if t.value >= h.value - tol(h.value, t.value) {
                v.status = Status::Holds;
                v.witnesses.push(Witness::new("tail minimum", probe(&t, h.value), Relation::Ge, s)?);
            } else if t.value < -BIG {
                v.status = Status::Fails;
                v.witnesses.push(Witness::new("divergence", probe(&t, -BIG), Relation::Ge, s)?);
            } else {
                v.note = "ratio still falling above the divergence threshold".into();
            }
        }
    }
    Ok(v)
}

/// A closed subinterval of `Ω = [0, 1]`.
pub type Interval = (f64, f64);

fn check_interval(name: &str, (lo, hi): Interval) -> Result<()> {
    if !(0.0 <= lo && lo < hi && hi <= 1.0) {
        return Err(precondition(format!("{name} must be a subinterval [lo, hi] of [0, 1], got [{lo}, {hi}]")));
    }
    Ok(())
}

/// Small-`ξ` conditions on a superlinear `f` and a sublinear `g` near
/// `0⁺`:
///
/// * `limsup sup_Ω |f|/ξ^s < ∞` with `s > 1`,
/// * `limsup sup_Ω |g|/ξ^q < ∞` with `0 < q < 1`,
/// * `limsup inf_B G/ξ² = +∞` and `liminf inf_D G/ξ² > −∞` with `B ⊆ D`,
/// * `liminf inf_Ω g/(ξ|ln ξ|²) > −∞` (positivity of solutions).
///
/// Sampled over `ξ ∈ [1e-13, 1e-1]`, ordered toward `0⁺`.
pub fn check_small_data(f: &Expr, g: &Expr, s_exp: f64, q: f64, d: Interval, b: Interval, grid: &Grid) -> Result<Vec<Verdict>> {
    if !(s_exp > 1.0) {
        return Err(precondition(format!("s must exceed 1, got {s_exp}")));
    }
    if !(q > 0.0 && q < 1.0) {
        return Err(precondition(format!("q must lie in (0, 1), got {q}")));
    }
    check_interval("D", d)?;
    check_interval("B", b)?;
    if b.0 < d.0 || b.1 > d.1 {
        return Err(precondition("B must be contained in D"));
    }
    let subject = Subject::new(Some(f), Some(g));
    let (lo, hi) = (1e-13, 1e-1);
    let xis: Vec<f64> = log_grid(lo, hi, grid.per_decade).into_iter().rev().collect();
    let omega_f = x_mesh(0.0, 1.0, grid.x_points, f.depends_on(Var::X));
    let g_x = g.depends_on(Var::X);
    let omega_g = x_mesh(0.0, 1.0, grid.x_points, g_x);
    let mesh_b = x_mesh(b.0, b.1, grid.x_points, g_x);
    let mesh_d = x_mesh(d.0, d.1, grid.x_points, g_x);
    let pg = &subject.get(Of::G)?.1;
    let range = |n: usize| SampleRange {
        xi_min: lo,
        xi_max: hi,
        both_signs: false,
        per_decade: grid.per_decade,
        x_points: n,
    };

    type Spec<'a> = (&'static str, Trend, Of, bool, bool, Weight, &'a [f64], bool);
    let specs: [Spec; 5] = [
        (F_SMALL, Trend::BoundedAbove, Of::F, false, true, Weight::Power { e: s_exp }, &omega_f, true),
        (G_SMALL, Trend::BoundedAbove, Of::G, false, true, Weight::Power { e: q }, &omega_g, true),
        (G_BLOWUP, Trend::UnboundedAbove, Of::G, true, false, Weight::Power { e: 2.0 }, &mesh_b, false),
        (G_BOUNDED, Trend::BoundedBelow, Of::G, true, false, Weight::Power { e: 2.0 }, &mesh_d, false),
        (POSITIVITY, Trend::BoundedBelow, Of::G, false, false, Weight::LogSquared, &omega_g, false),
    ];
    let mut out = Vec::new();
    for (id, trend, of, primitive, abs, weight, mesh, max) in specs {
        let expr = &subject.get(of)?.0;
        let samples = extremes(&xis, mesh, max, |x, xi| {
            let h = if primitive { pg.eval(x, xi)? } else { expr.eval(x, xi)? };
            let r = h / weight.eval(xi);
            Ok(if abs { r.abs() } else { r })
        });
        let valid: Vec<Sample> = samples.iter().flatten().copied().collect();
        let skipped = samples.len() - valid.len();
        let probe = |sm: &Sample, bound: f64| Probe::Quotient {
            of,
            primitive,
            abs,
            x: sm.x,
            xi: sm.xi,
            weight,
            bound,
        };
        let mut v = decide(id, trend, &valid, probe, &subject)?;
        v.ranges.push(range(mesh.len()));
        if skipped > 0 && v.status == Status::Holds {
            v.status = Status::Inconclusive;
            v.note = format!("{skipped} samples could not be evaluated");
        }
        out.push(v);
    }
    Ok(out)
}

/// Oscillation conditions for a sequence of dead zones `[a_k, b_k]`:
///
/// * `a_k < b_k` with `b_k` moving toward the limit point,
/// * `a_k/b_k → 0`,
/// * `∫_{a_k}^ξ f ≤ 0` on `[a_k, b_k]` and `∫_{−a_k}^ξ f ≤ 0` on `[−b_k, −a_k]`,
/// * `limsup F(ξ)/|ξ|^p = +∞` toward the limit point.
pub fn check_osc(f: &Expr, seqs: &SequencePair, p: f64, horizon: usize, grid: &Grid) -> Result<Vec<Verdict>> {
    if !(p > 1.0) {
        return Err(precondition(format!("p must exceed 1, got {p}")));
    }
    if horizon == 0 {
        return Err(precondition("horizon must be positive"));
    }
    let subject = Subject::f(f);
    let (a, b) = seqs.terms(horizon)?;
    let mode = seqs.mode;
    let number = |label: String, value: f64, bound: f64, relation: Relation| {
        Witness::new(&label, Probe::Number { value, bound }, relation, &subject)
    };

    let mut order = Verdict::new(ZONE_ORDER, Status::Holds, Method::Symbolic);
    for k in 0..a.len() {
        let w = number(format!("a_{} < b_{}", k + 1, k + 1), a[k], b[k], Relation::Lt)?;
        if w.violation || !(a[k] > 0.0) {
            order.status = Status::Fails;
            order.witnesses.push(w);
        }
    }
    for k in 1..b.len() {
        let (relation, text) = match mode {
            SeqMode::ToInfinity => (Relation::Gt, "increase"),
            SeqMode::ToZero => (Relation::Lt, "decrease"),
        };
        let w = number(format!("b_{} must {text}", k + 1), b[k], b[k - 1], relation)?;
        if w.violation {
            order.status = Status::Fails;
            order.witnesses.push(w);
        }
    }

    let mut ratio = Verdict::new(ZONE_RATIO, Status::Inconclusive, Method::Sampled);
    let ratios: Vec<f64> = a.iter().zip(&b).map(|(x, y)| x / y).collect();
    if ratios.len() >= 2 {
        let first = ratios[0];
        let last = *ratios.last().unwrap();
        let nonincreasing = ratios.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
        let w = number(format!("a_{0}/b_{0}", ratios.len()), last, first, Relation::Lt)?;
        if nonincreasing && last <= 0.5 * first {
            ratio.status = Status::Holds;
        } else if last >= first {
            ratio.status = Status::Fails;
            ratio.note = "a_k/b_k does not decrease".into();
        }
        ratio.witnesses.push(w);
    } else {
        ratio.note = "need at least two terms".into();
    }

    let mut sign = Verdict::new(ZONE_SIGN, Status::Holds, Method::Sampled);
    let prim = &subject.get(Of::F)?.1;
    let mesh = x_mesh(0.0, 1.0, grid.x_points, f.depends_on(Var::X));
    let mut skipped = 0usize;
    for k in 0..a.len().min(b.len()) {
        let (lo, hi) = (a[k], b[k]);
        if !(0.0 < lo && lo < hi) {
            continue;
        }
        let mut pts = log_grid(lo, hi, grid.per_decade);
        pts.extend((0..=1024).map(|i| lo + (hi - lo) * i as f64 / 1024.0));
        f.kinks(lo, hi, &mut pts);
        pts.sort_by(f64::total_cmp);
        pts.dedup();
        for (side, s) in [("positive", 1.0), ("negative", -1.0)] {
            // largest normalized ∫ over the zone, per x
            let samples = extremes(&pts, &mesh, true, |x, xi| {
                let f0 = prim.eval(x, s * lo)?;
                let f1 = prim.eval(x, s * xi)?;
                let scale = f0.abs() + f1.abs();
                Ok(if scale == 0.0 { 0.0 } else { (f1 - f0) / scale })
            });
            skipped += samples.iter().filter(|v| v.is_none()).count();
            let Some(worst) = samples
                .iter()
                .flatten()
                .fold(None::<Sample>, |acc, sm| if acc.is_none_or(|acc| sm.value > acc.value) { Some(*sm) } else { acc })
            else {
                continue;
            };
            let probe = Probe::Increment {
                of: Of::F,
                x: worst.x,
                from: s * lo,
                to: s * worst.xi,
            };
            let w = Witness::new(&format!("zone {} {side}", k + 1), probe, Relation::Le, &subject)?;
            if w.violation {
                sign.status = Status::Fails;
                sign.witnesses.push(w);
            }
        }
    }
    if skipped > 0 && sign.status == Status::Holds {
        sign.status = Status::Inconclusive;
        sign.note = format!("{skipped} samples could not be evaluated");
    }
    sign.ranges.push(SampleRange {
        xi_min: a.iter().copied().fold(f64::INFINITY, f64::min),
        xi_max: b.iter().copied().fold(f64::NEG_INFINITY, f64::max),
        both_signs: true,
        per_decade: grid.per_decade,
        x_points: mesh.len(),
    });

    let growth = primitive_ratio_scan(PRIMITIVE_GROWTH, Trend::UnboundedAbove, Of::F, &subject, p, mode, grid, true)?;
    Ok(vec![order, ratio, sign, growth])
}

/// Scans `F(±ξ)/|ξ|^p` toward the limit point of `mode`, taking the extreme
/// of the two signs at each `|ξ|`.
#[allow(clippy::too_many_arguments)]
fn primitive_ratio_scan(
    id: &str,
    trend: Trend,
    of: Of,
    s: &Subject,
    p: f64,
    mode: SeqMode,
    grid: &Grid,
    max: bool,
) -> Result<Verdict> {
    let (e, prim) = s.get(of)?;
    let (lo, hi) = mode.scan_range();
    let mut xis = log_grid(lo, hi, grid.per_decade);
    if mode == SeqMode::ToZero {
        xis.reverse();
    }
    let mesh = x_mesh(0.0, 1.0, grid.x_points, e.depends_on(Var::X));
    let samples: Vec<Option<Sample>> = extremes(&xis, &mesh, max, |x, xi| {
        let w = xi.powf(p);
        let (u, v) = (prim.eval(x, xi)? / w, prim.eval(x, -xi)? / w);
        Ok(if max { u.max(v) } else { u.min(v) })
    });
    // restore the sign that attained the extreme so the witness replays
    let mut valid = Vec::new();
    for sm in samples.iter().flatten() {
        let u = prim.eval(sm.x, sm.xi)? / sm.xi.powf(p);
        let xi = if u == sm.value { sm.xi } else { -sm.xi };
        valid.push(Sample { xi, ..*sm });
    }
    let skipped = samples.len() - valid.len();
    let probe = |sm: &Sample, bound: f64| Probe::Quotient {
        of,
        primitive: true,
        abs: false,
        x: sm.x,
        xi: sm.xi,
        weight: Weight::Power { e: p },
        bound,
    };
    let mut v = decide(id, trend, &valid, probe, s)?;
    v.ranges.push(SampleRange {
        xi_min: lo,
        xi_max: hi,
        both_signs: true,
        per_decade: grid.per_decade,
        x_points: mesh.len(),
    });
    if skipped > 0 && v.status == Status::Holds {
        v.status = Status::Inconclusive;
        v.note = format!("{skipped} samples could not be evaluated");
    }
    Ok(v)
}

/// Conditions on the second nonlinearity of the oscillating problem:
/// `sup_ℝ G ≤ 0` and `liminf G(ξ)/|ξ|^p > −∞` toward the limit point of `mode`.
pub fn check_g_side(g: &Expr, p: f64, mode: SeqMode, grid: &Grid) -> Result<Vec<Verdict>> {
    if !(p > 1.0) {
        return Err(precondition(format!("p must exceed 1, got {p}")));
    }
    let s = Subject::g(g);
    let prim = &s.get(Of::G)?.1;
    let (lo, hi) = (1e-8, 1e12);
    let mut xis = Vec::new();
    for xi in log_grid(lo, hi, grid.per_decade) {
        xis.push(xi);
        xis.push(-xi);
    }
    let mesh = x_mesh(0.0, 1.0, grid.x_points, g.depends_on(Var::X));
    let samples = extremes(&xis, &mesh, true, |x, xi| {
        let v = prim.eval(x, xi)?;
        Ok(v)
    });
    let skipped = samples.iter().filter(|v| v.is_none()).count();
    let mut sign = Verdict::new(G_SIGN, Status::Holds, Method::Sampled);
    sign.ranges.push(SampleRange {
        xi_min: lo,
        xi_max: hi,
        both_signs: true,
        per_decade: grid.per_decade,
        x_points: mesh.len(),
    });
    if let Some(worst) = samples
        .iter()
        .flatten()
        .fold(None::<Sample>, |acc, sm| if acc.is_none_or(|acc| sm.value > acc.value) { Some(*sm) } else { acc })
    {
        let probe = Probe::Increment {
            of: Of::G,
            x: worst.x,
            from: 0.0,
            to: worst.xi,
        };
        let w = Witness::new("largest primitive", probe, Relation::Le, &s)?;
        if w.violation {
            sign.status = Status::Fails;
        }
        sign.witnesses.push(w);
    }
    if skipped > 0 && sign.status == Status::Holds {
        sign.status = Status::Inconclusive;
        sign.note = format!("{skipped} samples could not be evaluated");
    }
    let lower = primitive_ratio_scan(G_LOWER, Trend::BoundedBelow, Of::G, &s, p, mode, grid, false)?;
    Ok(vec![sign, lower])
}
