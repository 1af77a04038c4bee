use serde::{Deserialize, Serialize};

use crate::dsl::{parse_sequence, Expr, Primitive};
use crate::error::{precondition, Error, Result};

use super::{log_grid, Grid, REL_SLACK};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeqMode {
    /// `b_k → +∞`, conditions at infinity.
    ToInfinity,
    /// `b_k → 0⁺`, conditions at the origin.
    ToZero,
}

impl SeqMode {
    /// `|ξ|` range scanned for limit conditions in this mode.
    pub fn scan_range(self) -> (f64, f64) {
        match self {
            SeqMode::ToInfinity => (1.0, 1e12),
            SeqMode::ToZero => (1e-13, 1e-1),
        }
    }
}

/// Closed-form expression in `k` (evaluated at `k = 1, 2, …`) or an explicit
/// finite list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Generator {
    Expr(String),
    List(Vec<f64>),
}

impl Generator {
    fn terms(&self, horizon: usize) -> Result<Vec<f64>> {
        match self {
            Generator::List(v) => Ok(v.iter().take(horizon).copied().collect()),
            Generator::Expr(src) => {
                let e: Expr = parse_sequence(src)?;
                (1..=horizon).map(|k| Ok(e.eval_seq(k as f64)?)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequencePair {
    pub a: Generator,
    pub b: Generator,
    pub mode: SeqMode,
}

impl SequencePair {
    pub fn explicit(a: Vec<f64>, b: Vec<f64>, mode: SeqMode) -> SequencePair {
        SequencePair {
            a: Generator::List(a),
            b: Generator::List(b),
            mode,
        }
    }

    pub fn formulas(a: &str, b: &str, mode: SeqMode) -> SequencePair {
        SequencePair {
            a: Generator::Expr(a.into()),
            b: Generator::Expr(b.into()),
            mode,
        }
    }

    /// The first `horizon` terms of both sequences, truncated to the shorter.
    pub fn terms(&self, horizon: usize) -> Result<(Vec<f64>, Vec<f64>)> {
        let mut a = self.a.terms(horizon)?;
        let mut b = self.b.terms(horizon)?;
        let n = a.len().min(b.len());
        a.truncate(n);
        b.truncate(n);
        Ok((a, b))
    }

    /// First `k` (1-based) up to `horizon` with `a_k ≥ b_k`.
    pub fn first_disorder(&self, horizon: usize) -> Result<Option<usize>> {
        let (a, b) = self.terms(horizon)?;
        Ok(a.iter().zip(&b).position(|(x, y)| !(x < y)).map(|i| i + 1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Suggestion {
    pub pair: SequencePair,
    /// `(a, b)` of every emitted zone, ordered toward the limit point.
    pub zones: Vec<(f64, f64)>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<String>,
}

/// Finds the maximal intervals `[a, b] ⊂ (0, ∞)` with `∫_a^ξ f ≤ 0` for
/// `ξ ∈ [a, b]` and `∫_{−a}^{−ξ} f ≤ 0` likewise, scanning `horizon` decades
/// above 1 (to infinity) or below 1 (to zero). Zones wider than a decade are
/// cut into pieces of one decade each.
pub fn suggest_sequences(f: &Expr, mode: SeqMode, horizon: usize, grid: &Grid) -> Result<Suggestion> {
    if horizon == 0 {
        return Err(precondition("horizon must be positive"));
    }
    if f.depends_on(crate::dsl::Var::X) {
        return Err(Error::Input("dead-zone search needs f independent of x".into()));
    }
    let h = horizon as i32;
    let (lo, hi) = match mode {
        SeqMode::ToInfinity => (1.0, 10f64.powi(h)),
        SeqMode::ToZero => (10f64.powi(-h), 1.0),
    };
    let mut pts = log_grid(lo, hi, grid.per_decade);
    f.kinks(lo, hi, &mut pts);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let prim = Primitive::new(f);
    let mut fp = Vec::with_capacity(pts.len());
    let mut fm = Vec::with_capacity(pts.len());
    for &xi in &pts {
        fp.push(prim.eval(0.5, xi)?);
        fm.push(prim.eval(0.5, -xi)?);
    }
    let n = pts.len();
    let exceeds = |base: f64, v: f64| v - base > REL_SLACK * (base.abs() + v.abs());
    let mut zones: Vec<(f64, f64)> = Vec::new();
    let mut reach = 0usize;
    for i in 0..n {
        let mut j = i;
        while j + 1 < n && !exceeds(fp[i], fp[j + 1]) && !exceeds(fm[i], fm[j + 1]) {
            j += 1;
        }
        if j > i && (zones.is_empty() || j > reach) {
            // a zone starting later but ending no further is contained in the last one
            zones.push((pts[i], pts[j]));
            reach = j;
        }
    }
    // drop zones contained in an earlier one
    let mut maximal: Vec<(f64, f64)> = Vec::new();
    for z in zones {
        if maximal.last().is_some_and(|m| z.1 <= m.1) {
            continue;
        }
        maximal.push(z);
    }
    // keep zones that start after the previous one ends, so the pair is ordered
    let mut disjoint: Vec<(f64, f64)> = Vec::new();
    for z in maximal {
        if disjoint.last().is_some_and(|m| z.0 < m.1) {
            continue;
        }
        disjoint.push(z);
    }
    let mut pieces = Vec::new();
    for (a, b) in disjoint {
        let mut start = a;
        while b > 10.0 * start * (1.0 + 1e-12) {
            pieces.push((start, 10.0 * start));
            start *= 10.0;
        }
        pieces.push((start, b));
    }
    if mode == SeqMode::ToZero {
        pieces.reverse();
    }
    let diagnostic = pieces
        .is_empty()
        .then(|| format!("no interval with non-positive increments in [{lo:e}, {hi:e}]"));
    Ok(Suggestion {
        pair: SequencePair::explicit(
            pieces.iter().map(|z| z.0).collect(),
            pieces.iter().map(|z| z.1).collect(),
            mode,
        ),
        zones: pieces,
        diagnostic,
    })
}
