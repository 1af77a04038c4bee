//! Descent on smooth objectives, optionally confined to a sublevel set
//! `{Ψ ≤ bound}` that is star-shaped around a known interior point.
//!
//! Directions come from L-BFGS applied to the projected gradient: when the
//! iterate sits on the boundary with the gradient pointing outward, the
//! outward normal component is removed. Any trial point outside the region
//! is pulled back along the segment toward the centre.

use std::collections::VecDeque;

use crate::error::{precondition, Result};

/// Objective evaluator returning `(value, gradient)`.
pub type ValueGrad<'a> = dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)> + Sync + 'a;

/// The feasible region `{Ψ ≤ bound}`.
#[derive(Clone, Copy)]
pub struct Region<'a> {
    pub psi: &'a ValueGrad<'a>,
    pub bound: f64,
    pub center: &'a [f64],
}

const RESTORE_STEPS: usize = 64;

impl Region<'_> {
    pub fn contains(&self, x: &[f64]) -> Result<bool> {
        Ok((self.psi)(x)?.0 <= self.bound)
    }

    /// Returns `y` if feasible, otherwise the feasible point of the segment
    /// from the centre to `y` closest to `y`, located by safeguarded false
    /// position on `t ↦ Ψ(c + t(y - c)) - bound`.
    pub fn restore(&self, y: &[f64]) -> Result<(Vec<f64>, bool)> {
        let f1 = (self.psi)(y)?.0 - self.bound;
        if f1 <= 0.0 {
            return Ok((y.to_vec(), false));
        }
        let f0 = (self.psi)(self.center)?.0 - self.bound;
        if f0 > 0.0 {
            return Err(precondition(format!("the region centre lies outside {{Ψ ≤ {}}}", self.bound)));
        }
        let at = |t: f64| -> Vec<f64> { self.center.iter().zip(y).map(|(c, v)| c + t * (v - c)).collect() };
        let (mut lo, mut hi, mut flo, mut fhi) = (0.0_f64, 1.0_f64, f0, f1);
        let mut side = 0;
        for _ in 0..RESTORE_STEPS {
            if hi - lo <= 4.0 * f64::EPSILON * hi {
                break;
            }
            let mut t = if fhi > flo { lo - flo * (hi - lo) / (fhi - flo) } else { 0.5 * (lo + hi) };
            if !(t > lo && t < hi) {
                t = 0.5 * (lo + hi);
            }
            let ft = (self.psi)(&at(t))?.0 - self.bound;
            if ft <= 0.0 {
                lo = t;
                flo = ft;
                // Illinois modification keeps the far end from stalling
                if side == -1 {
                    fhi *= 0.5;
                }
                side = -1;
            } else {
                hi = t;
                fhi = ft;
                if side == 1 {
                    flo *= 0.5;
                }
                side = 1;
            }
            if flo == 0.0 {
                break;
            }
        }
        Ok((at(lo), true))
    }

    fn near_boundary(&self, psi: f64) -> bool {
        psi >= self.bound - 1e-9 * (1.0 + self.bound.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    /// No acceptable step could be found above the tolerance.
    Stalled,
    MaxIter,
}

#[derive(Debug, Clone, Copy)]
pub struct DescentOptions {
    /// Stationarity target (sup-norm of the projected gradient).
    pub tol: f64,
    pub max_iter: usize,
    pub memory: usize,
    /// Cap on the sup-norm of a trial displacement, relative to
    /// `1 + ‖x‖∞`. Finite caps keep the descent inside the basin it starts in.
    pub max_rel_step: f64,
}

impl Default for DescentOptions {
    fn default() -> Self {
        DescentOptions {
            tol: 1e-11,
            max_iter: 5000,
            memory: 8,
            max_rel_step: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DescentResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub grad: Vec<f64>,
    /// Sup-norm of the gradient with any outward normal component removed
    /// (equal to the plain gradient norm in the interior).
    pub stationarity: f64,
    pub iterations: usize,
    pub restorations: usize,
    pub on_boundary: bool,
    pub status: Status,
}

pub fn sup_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

struct State {
    x: Vec<f64>,
    f: f64,
    g: Vec<f64>,
    /// Gradient with the outward component removed when on the boundary.
    pg: Vec<f64>,
    /// Outward normal `∇Ψ` when the boundary is active.
    normal: Option<Vec<f64>>,
}

fn state(obj: &ValueGrad, region: Option<&Region>, x: Vec<f64>) -> Result<State> {
    let (f, g) = obj(&x)?;
    if !f.is_finite() {
        return Err(crate::error::Error::Input("objective is not finite".into()));
    }
    let mut pg = g.clone();
    let mut normal = None;
    if let Some(r) = region {
        let (psi, n) = (r.psi)(&x)?;
        if r.near_boundary(psi) {
            let nn = dot(&n, &n);
            let gn = dot(&g, &n);
            // active when -g has a positive outward component
            if nn > 0.0 && gn < 0.0 {
                let nu = -gn / nn;
                for (p, ni) in pg.iter_mut().zip(&n) {
                    *p += nu * ni;
                }
                normal = Some(n);
            }
        }
    }
    Ok(State { x, f, g, pg, normal })
}

type Pairs = VecDeque<(Vec<f64>, Vec<f64>, f64)>;

fn two_loop(g: &[f64], pairs: &Pairs) -> Vec<f64> {
    let mut q = g.to_vec();
    let mut alphas = Vec::with_capacity(pairs.len());
    for (s, y, rho) in pairs.iter().rev() {
        let a = rho * dot(s, &q);
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= a * yi;
        }
        alphas.push(a);
    }
    if let Some((s, y, _)) = pairs.back() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for ((s, y, rho), a) in pairs.iter().zip(alphas.iter().rev()) {
        let b = rho * dot(y, &q);
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (a - b) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

/// Drops the normal component of `d` while the boundary is active; moving
/// inward cannot help to first order there.
fn tangential(mut d: Vec<f64>, normal: Option<&Vec<f64>>) -> Vec<f64> {
    if let Some(n) = normal {
        let dn = dot(&d, n);
        if dn != 0.0 {
            let c = dn / dot(n, n);
            for (di, ni) in d.iter_mut().zip(n) {
                *di -= c * ni;
            }
        }
    }
    d
}

/// Minimizes `obj` from `start`, staying inside `region` when given.
///
/// Quasi-Newton pairs are built from differences of the projected gradient,
/// so the same memory serves interior and boundary phases; it is cleared
/// whenever the active set changes.
pub fn descend(obj: &ValueGrad, region: Option<&Region>, start: &[f64], opts: &DescentOptions) -> Result<DescentResult> {
    let mut restorations = 0;
    let start = match region {
        Some(r) => {
            let (x, moved) = r.restore(start)?;
            restorations += moved as usize;
            x
        }
        None => start.to_vec(),
    };
    let mut cur = state(obj, region, start)?;
    let mut pairs = Pairs::new();
    let mut iterations = 0;
    let mut status = Status::MaxIter;

    while iterations < opts.max_iter {
        if sup_norm(&cur.pg) <= opts.tol {
            status = Status::Converged;
            break;
        }
        iterations += 1;
        let mut accepted = None;
        for attempt in 0..2 {
            if attempt == 1 {
                if pairs.is_empty() {
                    break;
                }
                pairs.clear();
            }
            let mut dir = tangential(two_loop(&cur.pg, &pairs), cur.normal.as_ref());
            if dot(&dir, &cur.pg) >= 0.0 {
                pairs.clear();
                dir = cur.pg.iter().map(|v| -v).collect();
            }
            let dn = sup_norm(&dir);
            let mut t = if pairs.is_empty() { 1.0 / dn.max(1.0) } else { 1.0 };
            let t_cap = opts.max_rel_step * (1.0 + sup_norm(&cur.x)) / dn;
            t = t.min(t_cap);
            let try_step = |t: f64| -> Result<Option<(State, Vec<f64>, bool, f64)>> {
                let trial: Vec<f64> = cur.x.iter().zip(&dir).map(|(x, d)| x + t * d).collect();
                let (y, restored) = match region {
                    Some(r) => r.restore(&trial)?,
                    None => (trial, false),
                };
                let disp: Vec<f64> = y.iter().zip(&cur.x).map(|(a, b)| a - b).collect();
                let slope = dot(&cur.g, &disp);
                // outside the evaluator's domain counts as a failed trial
                Ok(state(obj, region, y).ok().map(|next| (next, disp, restored, slope)))
            };
            let noise = 1e-12 * (1.0 + cur.f.abs());
            let armijo = |next: &State, slope: f64| slope < 0.0 && next.f <= cur.f + 1e-4 * slope;
            for halvings in 0..60 {
                let Some((next, disp, restored, slope)) = try_step(t)? else {
                    t *= 0.5;
                    continue;
                };
                if sup_norm(&disp) == 0.0 {
                    break;
                }
                let flat = (next.f - cur.f).abs() <= noise && sup_norm(&next.pg) < sup_norm(&cur.pg);
                if armijo(&next, slope) {
                    let mut best = (next, disp, restored);
                    if halvings == 0 && pairs.is_empty() {
                        // a full steepest step was accepted: the scale may be far too small
                        for _ in 0..40 {
                            if t * 2.0 > t_cap {
                                break;
                            }
                            t *= 2.0;
                            match try_step(t)? {
                                Some((n, d, r, sl)) if armijo(&n, sl) && n.f < best.0.f => best = (n, d, r),
                                _ => break,
                            }
                        }
                    }
                    accepted = Some(best);
                    break;
                }
                if flat {
                    accepted = Some((next, disp, restored));
                    break;
                }
                t *= 0.5;
            }
            if accepted.is_some() {
                break;
            }
        }
        let Some((next, s, restored)) = accepted else {
            status = Status::Stalled;
            break;
        };
        restorations += restored as usize;
        if next.normal.is_some() != cur.normal.is_some() {
            pairs.clear();
        } else {
            let yv: Vec<f64> = next.pg.iter().zip(&cur.pg).map(|(a, b)| a - b).collect();
            let sy = dot(&s, &yv);
            if sy > 1e-12 * (dot(&s, &s) * dot(&yv, &yv)).sqrt() {
                if pairs.len() == opts.memory {
                    pairs.pop_front();
                }
                pairs.push_back((s, yv, 1.0 / sy));
            }
        }
        cur = next;
    }
    if status == Status::MaxIter && sup_norm(&cur.pg) <= opts.tol {
        status = Status::Converged;
    }
    Ok(DescentResult {
        stationarity: sup_norm(&cur.pg),
        value: cur.f,
        on_boundary: cur.normal.is_some(),
        x: cur.x,
        grad: cur.g,
        iterations,
        restorations,
        status,
    })
}
