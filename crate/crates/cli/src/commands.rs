use std::collections::BTreeMap;

use serde_json::{json, Value};
use varlab_core::bifurcation::{bifurcation_evidence, branch_csv, continue_branch, PointFlag, SolveOptions};
use varlab_core::fixedpoint::{find_fixed_point, fp_scan_csv, sup_ratio_scan, PotentialSpec, THRESHOLD_MARGIN};
use varlab_core::hypotheses::{
    check_ar, check_g_side, check_growth, check_limit_zero, check_osc, check_small_data, Status, Verdict, ZONE_RATIO,
};
use varlab_core::minhunt::{hunt_csv, hunt_decreasing, hunt_increasing, mountain_pass, HuntOptions, HuntReport, Mode, PassOptions, PassStatus};
use varlab_core::numfmt::sig17;
use varlab_core::varprinciple::{phi_curve_csv, thresholds, RunFlag};

use crate::config::*;
use crate::error::CliError;
use crate::run::RunDir;

/// What a command hands back for `report.json`.
pub struct Done {
    pub summary: Value,
    pub result: Value,
    /// False when a solver did not converge; artifacts are still written.
    pub converged: bool,
}

fn to_value<T: serde::Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("reports serialize")
}

pub fn phi_curve(cfg: &PhiCurveConfig, run: &mut RunDir) -> Result<Done, CliError> {
    let pair = cfg.problem.build()?;
    let grid = cfg.rho_grid.values("rho_grid")?;
    let opts = cfg.policy.multistart()?;
    let report = thresholds(&*pair, &grid, cfg.window, &opts)?;
    run.add("phi_curve.csv", phi_curve_csv(&report.points));
    let failed = report.points.iter().filter(|p| p.flag != RunFlag::Ok).count();
    let summary = json!({
        "points": report.points.len(),
        "non_converged": failed,
        "gamma_hat": report.gamma_hat,
        "delta_hat": report.delta_hat,
        "lambda_star_hat": report.convex.then_some(report.lambda_star_hat),
        "monotone_nonincreasing": report.monotone_nonincreasing,
    });
    Ok(Done {
        summary,
        result: json!({ "thresholds": to_value(&report) }),
        converged: failed == 0,
    })
}

fn run_hunt(cfg: &HuntConfig) -> Result<HuntReport, CliError> {
    let pair = cfg.problem.build()?;
    let ladder = cfg.ladder.build()?;
    let mut opts = HuntOptions::new(cfg.policy.multistart()?, tolerances(&*pair));
    if let Some(s) = cfg.stagnation {
        opts.stagnation = s;
    }
    Ok(match cfg.mode {
        Mode::Increasing => hunt_increasing(&*pair, cfg.mu, &ladder, &opts)?,
        Mode::Decreasing => hunt_decreasing(&*pair, cfg.mu, &ladder, &opts)?,
    })
}

fn hunt_summary(r: &HuntReport) -> Value {
    json!({
        "accepted": r.accepted.len(),
        "levels_run": r.levels_run,
        "stop": r.stop,
        "invariants_hold": r.invariants_hold(),
        "accepted_psi": r.accepted.iter().map(|m| m.psi).collect::<Vec<_>>(),
    })
}

pub fn hunt(cfg: &HuntConfig, run: &mut RunDir) -> Result<Done, CliError> {
    let report = run_hunt(cfg)?;
    run.add("hunt.csv", hunt_csv(&report));
    Ok(Done {
        summary: hunt_summary(&report),
        converged: !report.accepted.is_empty(),
        result: json!({ "hunt": to_value(&report) }),
    })
}

pub fn bifurcate(cfg: &BifurcateConfig, run: &mut RunDir) -> Result<Done, CliError> {
    let model = cfg.model.build()?;
    let grid = cfg.lambda_grid.values("lambda_grid")?;
    let branch = continue_branch(&model, &grid, &SolveOptions::default())?;
    run.add("branch.csv", branch_csv(&branch));
    let evidence = bifurcation_evidence(&branch.points);
    let failed = branch.points.iter().filter(|p| p.flag == PointFlag::NotConverged).count();
    let conditions: BTreeMap<&str, &str> = branch.conditions.iter().map(|v| (v.condition.as_str(), v.label())).collect();
    let summary = json!({
        "points": branch.points.len(),
        "not_converged": failed,
        "lost": branch.lost,
        "verdicts": branch.verdicts,
        "evidence": evidence.evidence,
        "lambda_star_lower_empirical": branch.lambda_star_lower,
        "conditions": conditions,
    });
    Ok(Done {
        summary,
        result: json!({ "branch": to_value(&branch), "evidence": to_value(&evidence) }),
        converged: failed == 0,
    })
}

pub fn fixed_point(cfg: &FixedPointConfig, run: &mut RunDir) -> Result<Done, CliError> {
    let spec = PotentialSpec::from_tag(cfg.potential.clone())?;
    let opts = cfg.policy.multistart()?;
    let radii = cfg.scan.as_ref().map(|s| s.values("scan")).transpose()?;
    let report = find_fixed_point(&spec, cfg.rho, &opts)?;
    let mut csv = String::from("rho,phi_hat,below_half,defect,norm\n");
    let (defect, norm) = report.fixed_point.as_ref().map_or((f64::NAN, f64::NAN), |f| (f.defect, f.norm));
    csv.push_str(&format!(
        "{},{},{},{},{}\n",
        sig17(report.rho),
        sig17(report.phi_hat),
        report.below_half as u8,
        sig17(defect),
        sig17(norm)
    ));
    run.add("fixed_point.csv", csv);
    let scan = match radii {
        Some(r) => {
            let s = sup_ratio_scan(&spec, &r, &opts)?;
            run.add("fp_scan.csv", fp_scan_csv(&s));
            Some(s)
        }
        None => None,
    };
    let summary = json!({
        "phi_hat": report.phi_hat,
        "below_half": report.below_half,
        "fixed_point": report.fixed_point.as_ref().map(|f| &f.point),
        "straddles": scan.as_ref().map(|s| s.straddles),
    });
    Ok(Done {
        summary,
        converged: report.flag == RunFlag::Ok,
        result: json!({ "report": to_value(&report), "scan": to_value(&scan) }),
    })
}

fn need<'a>(v: &'a Option<varlab_core::Expr>, what: &str, check: &str) -> Result<&'a varlab_core::Expr, CliError> {
    v.as_ref()
        .ok_or_else(|| CliError::Config(format!("at `{check}`: needs `{what}`")))
}

/// Runs every check the config requests.
pub fn run_checks(cfg: &CheckConfig) -> Result<Vec<Verdict>, CliError> {
    let f = cfg.f.as_deref().map(|s| expr("f", s)).transpose()?;
    let g = cfg.g.as_deref().map(|s| expr("g", s)).transpose()?;
    let grid = &cfg.grid;
    if grid.per_decade == 0 || grid.x_points == 0 {
        return Err(CliError::Config("at `grid`: sample counts must be positive".into()));
    }
    let mut out = Vec::new();
    let requested = cfg.growth.is_some()
        || cfg.ar.is_some()
        || cfg.limit_zero
        || cfg.small_data.is_some()
        || cfg.osc.is_some()
        || cfg.g_side.is_some();
    if !requested {
        return Err(CliError::Config(
            "at `.`: no check requested (growth, ar, limit_zero, small_data, osc, g_side)".into(),
        ));
    }
    // surface missing inputs before any sampling
    if cfg.growth.is_some() {
        need(&f, "f", "growth")?;
    }
    if cfg.ar.is_some() {
        need(&f, "f", "ar")?;
    }
    if cfg.limit_zero {
        need(&f, "f", "limit_zero")?;
    }
    if cfg.small_data.is_some() {
        need(&f, "f", "small_data")?;
        need(&g, "g", "small_data")?;
    }
    if cfg.osc.is_some() {
        need(&f, "f", "osc")?;
    }
    if cfg.g_side.is_some() {
        need(&g, "g", "g_side")?;
    }
    if let Some(s) = &cfg.growth {
        out.push(check_growth(need(&f, "f", "growth")?, s.a, s.q, s.n, grid)?);
    }
    if let Some(s) = &cfg.ar {
        out.push(check_ar(need(&f, "f", "ar")?, s.c, s.r, grid)?);
    }
    if cfg.limit_zero {
        out.push(check_limit_zero(need(&f, "f", "limit_zero")?, grid)?);
    }
    if let Some(s) = &cfg.small_data {
        out.extend(check_small_data(need(&f, "f", "")?, need(&g, "g", "")?, s.s, s.q, s.d, s.b, grid)?);
    }
    if let Some(s) = &cfg.osc {
        out.extend(check_osc(need(&f, "f", "")?, &s.sequences, s.p, s.horizon, grid)?);
    }
    if let Some(s) = &cfg.g_side {
        out.extend(check_g_side(need(&g, "g", "")?, s.p, s.mode, grid)?);
    }
    Ok(out)
}

fn verdict_map(verdicts: &[Verdict]) -> BTreeMap<String, Value> {
    verdicts.iter().map(|v| (v.condition.clone(), to_value(v))).collect()
}

fn label_map(verdicts: &[Verdict]) -> BTreeMap<String, String> {
    verdicts.iter().map(|v| (v.condition.clone(), v.label().to_string())).collect()
}

pub fn check(cfg: &CheckConfig, run: &mut RunDir) -> Result<Done, CliError> {
    let verdicts = run_checks(cfg)?;
    let labels = label_map(&verdicts);
    run.add_json("verdicts.json", &to_value(&labels));
    Ok(Done {
        summary: to_value(&labels),
        result: json!({ "verdicts": verdict_map(&verdicts) }),
        converged: true,
    })
}

pub fn pass_options(cfg: &MountainPassConfig) -> PassOptions {
    let d = PassOptions::default();
    PassOptions {
        images: cfg.images.unwrap_or(d.images),
        sweeps: cfg.sweeps.unwrap_or(d.sweeps),
        tol: cfg.tol.unwrap_or(d.tol),
        newton_iters: d.newton_iters,
    }
}

pub fn mountain_pass_cmd(cfg: &MountainPassConfig, run: &mut RunDir) -> Result<Done, CliError> {
    let pair = cfg.problem.build()?;
    let a = cfg.end_a.resolve("end_a", &cfg.problem)?;
    let b = cfg.end_b.resolve("end_b", &cfg.problem)?;
    for (name, v) in [("end_a", &a), ("end_b", &b)] {
        if v.len() != pair.dim() {
            return Err(CliError::Config(format!(
                "at `{name}`: {} coordinates for a pair of dimension {}",
                v.len(),
                pair.dim()
            )));
        }
    }
    let r = mountain_pass(&*pair, cfg.mu, &a, &b, &pass_options(cfg))?;
    let mut csv = String::from("index,energy\n");
    for (i, e) in r.elevation.iter().enumerate() {
        csv.push_str(&format!("{i},{}\n", sig17(*e)));
    }
    run.add("path.csv", csv);
    let summary = json!({
        "status": r.status,
        "saddle_energy": r.saddle_energy,
        "grad_norm": r.grad_norm,
        "residual": r.residual,
    });
    Ok(Done {
        summary,
        converged: r.status != PassStatus::NonConvergence,
        result: json!({ "pass": to_value(&r) }),
    })
}

pub const EVIDENCE_BELOW_HALF: &str = "evidence-below-half";
pub const NO_EVIDENCE: &str = "no-evidence";
pub const NOT_APPLICABLE: &str = "not-applicable";

pub fn problem1(cfg: &Problem1Config, run: &mut RunDir) -> Result<Done, CliError> {
    let grid = cfg.rho_grid.values("rho_grid")?;
    let f = expr("f", &cfg.f)?;
    let pair = cfg.pair_spec().build()?;
    let opts = cfg.policy.multistart()?;
    let conditions = vec![check_ar(&f, cfg.ar.c, cfg.ar.r, &cfg.grid)?, check_limit_zero(&f, &cfg.grid)?];
    let applicable = conditions.iter().all(|v| v.status == Status::Holds);
    if !applicable {
        let summary = json!({ "answer": NOT_APPLICABLE, "conditions": label_map(&conditions) });
        return Ok(Done {
            summary,
            result: json!({ "answer": NOT_APPLICABLE, "conditions": verdict_map(&conditions) }),
            converged: true,
        });
    }
    let report = thresholds(&*pair, &grid, 1, &opts)?;
    run.add("phi_curve.csv", phi_curve_csv(&report.points));
    let best = report
        .points
        .iter()
        .min_by(|a, b| a.phi_hat.total_cmp(&b.phi_hat))
        .expect("grid is nonempty");
    let answer = if best.phi_hat < 0.5 - THRESHOLD_MARGIN { EVIDENCE_BELOW_HALF } else { NO_EVIDENCE };
    let failed = report.points.iter().filter(|p| p.flag != RunFlag::Ok).count();
    let note = "upper-bound evidence only: each value is a sampled quotient at a stored point, not a proof about the infimum";
    let summary = json!({
        "answer": answer,
        "min_phi_hat": best.phi_hat,
        "at_rho": best.rho,
        "note": note,
        "conditions": label_map(&conditions),
    });
    Ok(Done {
        summary,
        result: json!({
            "answer": answer,
            "note": note,
            "certificate": to_value(best),
            "thresholds": to_value(&report),
            "conditions": verdict_map(&conditions),
        }),
        converged: failed == 0,
    })
}

pub const DROPPED: &str = "dropped";

pub fn problem3(cfg: &Problem3Config, run: &mut RunDir) -> Result<Done, CliError> {
    let (f, p) = cfg.problem.nonlinearity()?;
    let hunt_cfg = cfg.hunt();
    cfg.problem.build()?;
    hunt_cfg.ladder.build()?;
    let verdicts: Vec<Verdict> = check_osc(&f, &cfg.sequences, p, cfg.horizon, &cfg.grid)?
        .into_iter()
        .filter(|v| v.condition != ZONE_RATIO)
        .collect();
    let mut labels = label_map(&verdicts);
    labels.insert(ZONE_RATIO.to_string(), DROPPED.to_string());
    let report = run_hunt(&hunt_cfg)?;
    run.add("hunt.csv", hunt_csv(&report));
    let summary = json!({
        "conditions": labels,
        "hunt": hunt_summary(&report),
        "note": "exploratory: the ratio condition is not checked; the hunt runs regardless of the other verdicts",
    });
    Ok(Done {
        summary,
        converged: !report.accepted.is_empty(),
        result: json!({
            "conditions": labels,
            "verdicts": verdict_map(&verdicts),
            "hunt": to_value(&report),
        }),
    })
}
