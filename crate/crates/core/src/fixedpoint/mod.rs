//! Fixed points of potential operators `A = P'` on `ℝ^m`.
//!
//! With `Φ = -P` and `Ψ = ‖x‖²` the ball quotient
//! `φ(ρ) = inf_{‖x‖²<ρ} (sup_{‖y‖²≤ρ} P(y) - P(x)) / (ρ - ‖x‖²)` is the
//! sublevel quotient of the pair `(Φ, Ψ)`, so it is estimated by the same
//! multistart machinery. When `φ(ρ) < ½`, minimizing `½‖x‖² - P(x)` over the
//! open ball yields a fixed point of `A`.

use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng;

use crate::error::{precondition, Error, Result};
use crate::minhunt::{minimize_sublevel, MinOptions, Tolerances};
use crate::numfmt::sig17;
use crate::varprinciple::{
    best_index, inf_phi_on_sublevel, phi_of_rho, restart_rng, run_restarts, AnalyticPair, EnergyPair, Evaluator,
    Multistart, RunFlag,
};


/// Closed-form test potentials.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PotentialTag {
    /// `P(x) = c·x`.
    Linear { c: Vec<f64> },
    /// `P(x) = a‖x‖² + shift`.
    Quadratic { dim: usize, a: f64, shift: f64 },
    /// `P ≡ c`.
    Constant { dim: usize, c: f64 },
    /// Radial `P(x) = a(‖x‖)` whose profile alternates between `r²`-growth
    /// and flat stretches at the powers of two.
    Plateau {
        dim: usize,
        #[serde(default = "default_width")]
        width: f64,
    },
}

fn default_width() -> f64 {
    PLATEAU_WIDTH
}

/// Corner smoothing width of the plateau profile.
pub const PLATEAU_WIDTH: f64 = 0.01;

#[derive(Clone)]
pub struct PotentialSpec {
    dim: usize,
    eval: Evaluator,
    tag: Option<PotentialTag>,
}

impl std::fmt::Debug for PotentialSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialSpec").field("dim", &self.dim).field("tag", &self.tag).finish()
    }
}

impl PotentialSpec {
    /// `eval` returns `(P(x), A(x))`.
    pub fn new(dim: usize, eval: Evaluator) -> PotentialSpec {
        PotentialSpec { dim, eval, tag: None }
    }

    pub fn from_tag(tag: PotentialTag) -> Result<PotentialSpec> {
        let eval: Evaluator = match &tag {
            PotentialTag::Linear { c } => {
                if c.is_empty() {
                    return Err(Error::Input("linear potential needs a nonempty coefficient vector".into()));
                }
                let c = c.clone();
                Arc::new(move |x| (c.iter().zip(x).map(|(a, b)| a * b).sum(), c.clone()))
            }
            &PotentialTag::Quadratic { a, shift, .. } => {
                Arc::new(move |x| (a * x.iter().map(|v| v * v).sum::<f64>() + shift, x.iter().map(|v| 2.0 * a * v).collect()))
            }
            &PotentialTag::Constant { c, .. } => Arc::new(move |x| (c, vec![0.0; x.len()])),
            &PotentialTag::Plateau { width, .. } => {
                let profile = Arc::new(PlateauProfile::new(width)?);
                Arc::new(move |x| {
                    let r = x.iter().map(|v| v * v).sum::<f64>().sqrt();
                    let (a, slope_over_r) = profile.eval(r);
                    (a, x.iter().map(|v| slope_over_r * v).collect())
                })
            }
        };
        let dim = match &tag {
            PotentialTag::Linear { c } => c.len(),
            PotentialTag::Quadratic { dim, .. } | PotentialTag::Constant { dim, .. } | PotentialTag::Plateau { dim, .. } => *dim,
        };
        if dim == 0 {
            return Err(Error::Input("potential dimension must be positive".into()));
        }
        Ok(PotentialSpec {
            dim,
            eval,
            tag: Some(tag),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tag(&self) -> Option<&PotentialTag> {
        self.tag.as_ref()
    }

    /// `(P(x), A(x))`.
    pub fn eval(&self, x: &[f64]) -> (f64, Vec<f64>) {
        (self.eval)(x)
    }

    /// The pair `Φ = -P`, `Ψ = ‖x‖²`.
    pub fn pair(&self) -> AnalyticPair {
        let p = self.eval.clone();
        AnalyticPair::new(
            "potential",
            self.dim,
            Arc::new(move |x| {
                let (v, g) = p(x);
                (-v, g.into_iter().map(|a| -a).collect())
            }),
            Arc::new(|x| (x.iter().map(|v| v * v).sum(), x.iter().map(|v| 2.0 * v).collect())),
            f64::sqrt,
        )
    }

    /// Largest relative discrepancy between `A` and central differences of
    /// `P` over `samples` points drawn from the box `[-scale, scale]^m`.
    pub fn gradient_error(&self, samples: usize, scale: f64, seed: u64) -> f64 {
        let mut worst = 0.0_f64;
        for i in 0..samples {
            let mut rng = restart_rng(seed, 5, i);
            let x: Vec<f64> = (0..self.dim).map(|_| rng.random_range(-scale..=scale)).collect();
            let (_, a) = self.eval(&x);
            let mut y = x.clone();
            for j in 0..self.dim {
                let h = 1e-6 * (1.0 + x[j].abs());
                y[j] = x[j] + h;
                let up = self.eval(&y).0;
                y[j] = x[j] - h;
                let down = self.eval(&y).0;
                y[j] = x[j];
                let fd = (up - down) / (2.0 * h);
                worst = worst.max((fd - a[j]).abs() / (1.0 + a[j].abs()));
            }
        }
        worst
    }
}

/// `a(r)` with `a' = 2r·χ`, where `χ = 1` on `[0, 2]` and on the intervals
/// `[4^k, 2·4^k]`, `χ = 0` on `[2·4^k, 4^{k+1}]`, and `χ` ramps linearly over
/// `width` around each corner.
#[derive(Debug, Clone)]
struct PlateauProfile {
    /// Segment starts; on segment `i` `χ(s) = alpha[i] + beta[i]·s`.
    starts: Vec<f64>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// `a` at each segment start.
    base: Vec<f64>,
}

impl PlateauProfile {
    fn new(width: f64) -> Result<PlateauProfile> {
        if !(width > 0.0 && width < 1.0) {
            return Err(Error::Input(format!("plateau smoothing width {width} must lie in (0, 1)")));
        }
        let half = 0.5 * width;
        let mut starts = vec![0.0];
        let mut alpha = vec![1.0];
        let mut beta = vec![0.0];
        for j in 1..=60 {
            let c = 2f64.powi(j);
            // χ before the corner at 2^j: 1 when j is odd (growth ends)
            let (from, to) = if j % 2 == 1 { (1.0, 0.0) } else { (0.0, 1.0) };
            let (lo, hi) = (c - half, c + half);
            let b = (to - from) / (hi - lo);
            starts.push(lo);
            alpha.push(from - b * lo);
            beta.push(b);
            starts.push(hi);
            alpha.push(to);
            beta.push(0.0);
        }
        let mut base = vec![0.0];
        for i in 1..starts.len() {
            base.push(base[i - 1] + segment_integral(alpha[i - 1], beta[i - 1], starts[i - 1], starts[i]));
        }
        Ok(PlateauProfile {
            starts,
            alpha,
            beta,
            base,
        })
    }

    /// `(a(r), a'(r)/r)`.
    fn eval(&self, r: f64) -> (f64, f64) {
        let i = self.starts.partition_point(|s| *s <= r).saturating_sub(1);
        let chi = self.alpha[i] + self.beta[i] * r;
        (
            self.base[i] + segment_integral(self.alpha[i], self.beta[i], self.starts[i], r),
            2.0 * chi,
        )
    }
}

/// `∫_lo^hi 2s(α + βs) ds`.
fn segment_integral(alpha: f64, beta: f64, lo: f64, hi: f64) -> f64 {
    alpha * (hi * hi - lo * lo) + 2.0 * beta / 3.0 * (hi.powi(3) - lo.powi(3))
}

/// Below-½ verdicts need `φ̂ < ½ - THRESHOLD_MARGIN`; quotients that equal ½
/// identically come out of the search within rounding of ½.
pub const THRESHOLD_MARGIN: f64 = 1e-8;
/// Bound on `‖A(x) - x‖` for a reported fixed point.
pub const FIXED_POINT_TOL: f64 = 1e-6;

/// `φ̂(ρ)` of the ball quotient.
pub fn fp_phi(spec: &PotentialSpec, rho: f64, opts: &Multistart) -> Result<(f64, RunFlag)> {
    if !(rho > 0.0) {
        return Err(precondition(format!("ρ = {rho} must be positive")));
    }
    let p = phi_of_rho(&spec.pair(), rho, opts)?;
    Ok((p.phi_hat, p.flag))
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct FixedPoint {
    pub point: Vec<f64>,
    /// `‖A(x) - x‖₂`.
    pub defect: f64,
    pub norm: f64,
    /// `‖x‖² < ρ`.
    pub inside: bool,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct FpReport {
    pub rho: f64,
    pub phi_hat: f64,
    pub below_half: bool,
    pub fixed_point: Option<FixedPoint>,
    pub flag: RunFlag,
}

/// Recomputes the fixed-point certificate of `x`.
pub fn certify_fixed_point(spec: &PotentialSpec, rho: f64, x: &[f64]) -> FixedPoint {
    let (_, a) = spec.eval(x);
    let defect = a.iter().zip(x).map(|(a, x)| (a - x) * (a - x)).sum::<f64>().sqrt();
    let n2: f64 = x.iter().map(|v| v * v).sum();
    FixedPoint {
        point: x.to_vec(),
        defect,
        norm: n2.sqrt(),
        inside: n2 < rho,
    }
}

/// Estimates `φ̂(ρ)` and, when it is below ½, locates a fixed point in the
/// open ball of radius `√ρ` by multistart minimization of `½‖x‖² - P(x)`.
pub fn find_fixed_point(spec: &PotentialSpec, rho: f64, opts: &Multistart) -> Result<FpReport> {
    let (phi_hat, flag) = fp_phi(spec, rho, opts)?;
    let below_half = phi_hat < 0.5 - THRESHOLD_MARGIN;
    let mut report = FpReport {
        rho,
        phi_hat,
        below_half,
        fixed_point: None,
        flag,
    };
    if !below_half {
        return Ok(report);
    }
    let pair = spec.pair();
    let min_opts = MinOptions {
        tol: Tolerances::TOY,
        max_iter: opts.descent.max_iter,
        seed: opts.seed,
    };
    let runs = run_restarts(opts.budget, |i| {
        let mut rng = restart_rng(opts.seed, 2, i);
        let start = if i == 0 { pair.origin() } else { pair.sample(rho, i, &mut rng)? };
        minimize_sublevel(&pair, 0.5, rho, &start, &min_opts)
    })?;
    let keys = runs.iter().map(|m| if m.interior { m.energy } else { f64::NAN });
    if let Some(best) = best_index(keys) {
        let fp = certify_fixed_point(spec, rho, &runs[best].point);
        report.flag = report.flag.and(RunFlag::from_status(runs[best].status));
        if fp.defect <= FIXED_POINT_TOL && fp.inside {
            report.fixed_point = Some(fp);
        } else {
            report.flag = RunFlag::NonConvergence;
        }
    } else {
        report.flag = RunFlag::NonConvergence;
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, serde::Serialize)]
pub struct ScanRow {
    pub r: f64,
    pub sup_estimate: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct ScanReport {
    pub rows: Vec<ScanRow>,
    /// Index of the first row in the tail (the last half of the radii).
    pub tail_start: usize,
    pub tail_min: f64,
    pub tail_max: f64,
    pub margin: f64,
    pub straddles: bool,
}

pub const STRADDLE_MARGIN: f64 = 0.02;

/// Tabulates `sup_{‖x‖≤r} P / r²` and reports whether the tail of the table
/// lies on both sides of ½ by more than [`STRADDLE_MARGIN`].
pub fn sup_ratio_scan(spec: &PotentialSpec, radii: &[f64], opts: &Multistart) -> Result<ScanReport> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(Error::Input("scan radii must be positive and finite".into()));
    }
    if radii.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(precondition("scan radii must be increasing"));
    }
    let pair = spec.pair();
    let rows = radii
        .iter()
        .map(|&r| {
            let sup = -inf_phi_on_sublevel(&pair, r * r, opts)?.value;
            Ok(ScanRow {
                r,
                sup_estimate: sup,
                ratio: sup / (r * r),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let tail_start = rows.len() / 2;
    let tail = &rows[tail_start..];
    let tail_min = tail.iter().map(|r| r.ratio).fold(f64::INFINITY, f64::min);
    let tail_max = tail.iter().map(|r| r.ratio).fold(f64::NEG_INFINITY, f64::max);
    Ok(ScanReport {
        straddles: tail_min < 0.5 - STRADDLE_MARGIN && tail_max > 0.5 + STRADDLE_MARGIN,
        rows,
        tail_start,
        tail_min,
        tail_max,
        margin: STRADDLE_MARGIN,
    })
}

pub const FP_SCAN_HEADER: &str = "r,sup_estimate,ratio";

pub fn fp_scan_csv(report: &ScanReport) -> String {
    let mut out = String::from(FP_SCAN_HEADER);
    out.push('\n');
    for row in &report.rows {
        let _ = writeln!(out, "{},{},{}", sig17(row.r), sig17(row.sup_estimate), sig17(row.ratio));
    }
    out
}
