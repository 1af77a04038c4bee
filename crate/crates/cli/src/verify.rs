//! Recomputes the certified numbers of a finished run from the points stored
//! in its report.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde_json::Value;
use varlab_core::bifurcation::{recertify, BranchPoint};
use varlab_core::fixedpoint::{certify_fixed_point, FixedPoint, PotentialSpec, FIXED_POINT_TOL};
use varlab_core::hypotheses::{Probe, Relation, Subject, Witness};
use varlab_core::minhunt::{certify, LocalMin, PassOptions};
use varlab_core::optim::sup_norm;
use varlab_core::varprinciple::{recheck_point, EnergyPair, PhiCurvePoint};

use crate::commands::pass_options;
use crate::config::*;
use crate::error::CliError;

/// One recomputed certificate.
pub struct Check {
    pub what: String,
    pub ok: bool,
    pub detail: String,
}

fn field<T: DeserializeOwned>(v: &Value, pointer: &str) -> Result<T, CliError> {
    let x = v
        .pointer(pointer)
        .ok_or_else(|| CliError::Config(format!("report has no `{pointer}`")))?;
    serde_json::from_value(x.clone()).map_err(|e| CliError::Config(format!("report field `{pointer}`: {e}")))
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

pub fn verify(dir: &Path) -> Result<Vec<Check>, CliError> {
    let config = fs::read_to_string(dir.join("config.json"))?;
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json"))?)
        .map_err(|e| CliError::Config(format!("report.json: {e}")))?;
    let command: String = field(&report, "/command")?;
    let result = &report["result"];
    match command.as_str() {
        "phi-curve" => {
            let cfg: PhiCurveConfig = from_json(&config)?;
            phi_points(&*cfg.problem.build()?, result)
        }
        "problem1" => {
            let cfg: Problem1Config = from_json(&config)?;
            if result.get("thresholds").is_none() {
                return Ok(vec![Check {
                    what: "problem1".into(),
                    ok: true,
                    detail: "not applicable, nothing certified".into(),
                }]);
            }
            phi_points(&*cfg.pair_spec().build()?, result)
        }
        "hunt" => {
            let cfg: HuntConfig = from_json(&config)?;
            minima(&*cfg.problem.build()?, cfg.mu, cfg.policy.seed, result)
        }
        "problem3" => {
            let cfg: Problem3Config = from_json(&config)?;
            let (f, _) = cfg.problem.nonlinearity()?;
            let mut checks = witnesses(&Subject::f(&f), result)?;
            checks.extend(minima(&*cfg.problem.build()?, cfg.mu, cfg.policy.seed, result)?);
            Ok(checks)
        }
        "bifurcate" => {
            let cfg: BifurcateConfig = from_json(&config)?;
            let model = cfg.model.build()?;
            let points: Vec<BranchPoint> = field(result, "/branch/points")?;
            points
                .iter()
                .map(|p| {
                    let r = recertify(&model, p)?;
                    let ok = r.matches(p) && (!p.flag.converged() || p.certified());
                    Ok(Check {
                        what: format!("branch point λ = {}", p.lambda),
                        ok,
                        detail: format!("residual {:.3e}, min value {:.3e}", r.residual, r.min_value),
                    })
                })
                .collect()
        }
        "fixed-point" => {
            let cfg: FixedPointConfig = from_json(&config)?;
            let spec = PotentialSpec::from_tag(cfg.potential.clone())?;
            let fp: Option<FixedPoint> = field(result, "/report/fixed_point")?;
            Ok(match fp {
                None => vec![Check {
                    what: "fixed point".into(),
                    ok: true,
                    detail: "none reported".into(),
                }],
                Some(fp) => {
                    let again = certify_fixed_point(&spec, cfg.rho, &fp.point);
                    vec![Check {
                        what: "fixed point".into(),
                        ok: again.inside && again.defect <= FIXED_POINT_TOL && close(again.defect, fp.defect, 1e-10),
                        detail: format!("defect {:.3e}", again.defect),
                    }]
                }
            })
        }
        "mountain-pass" => {
            let cfg: MountainPassConfig = from_json(&config)?;
            let pair = cfg.problem.build()?;
            let saddle: Vec<f64> = field(result, "/pass/saddle")?;
            let status: String = field(result, "/pass/status")?;
            let stored: Option<f64> = field(result, "/pass/residual")?;
            let opts: PassOptions = pass_options(&cfg);
            let (_, grad) = pair.energy(&saddle, cfg.mu)?;
            let g = sup_norm(&grad);
            let residual = pair.weak_residual(&saddle, cfg.mu)?;
            let residual_ok = match (residual, stored) {
                (Some(a), Some(b)) => close(a, b, 1e-8),
                (None, None) => true,
                _ => false,
            };
            Ok(vec![Check {
                what: "saddle".into(),
                ok: residual_ok && (status != "success" || g <= opts.tol),
                detail: format!("status {status}, gradient {g:.3e}"),
            }])
        }
        "check" => {
            let cfg: CheckConfig = from_json(&config)?;
            let f = cfg.f.as_deref().map(|s| expr("f", s)).transpose()?;
            let g = cfg.g.as_deref().map(|s| expr("g", s)).transpose()?;
            witnesses(&Subject::new(f.as_ref(), g.as_ref()), result)
        }
        other => Err(CliError::Config(format!("unknown command {other:?} in report"))),
    }
}

fn phi_points(pair: &dyn EnergyPair, result: &Value) -> Result<Vec<Check>, CliError> {
    let points: Vec<PhiCurvePoint> = field(result, "/thresholds/points")?;
    points
        .iter()
        .map(|p| {
            let d = recheck_point(pair, p)?;
            Ok(Check {
                what: format!("φ̂(ρ = {})", p.rho),
                ok: d <= 1e-8 * (1.0 + p.phi_hat.abs() + p.m_hat.abs()),
                detail: format!("discrepancy {d:.3e}"),
            })
        })
        .collect()
}

fn minima(pair: &dyn EnergyPair, mu: f64, seed: u64, result: &Value) -> Result<Vec<Check>, CliError> {
    let accepted: Vec<LocalMin> = field(result, "/hunt/accepted")?;
    let tol = tolerances(pair);
    accepted
        .iter()
        .map(|m| {
            let again = certify(pair, mu, m.rho, &m.point, seed)?;
            Ok(Check {
                what: format!("local minimum at Ψ = {}", m.psi),
                ok: again.certified(&tol) && again.interior && close(again.energy, m.energy, 1e-10),
                detail: format!(
                    "gradient {:.3e}, residual {}",
                    again.grad_norm,
                    again.residual.map_or("n/a".into(), |r| format!("{r:.3e}"))
                ),
            })
        })
        .collect()
}

/// Every recorded violation of a failing verdict must still be a violation
/// when recomputed by the independent route.
fn witnesses(subject: &Subject, result: &Value) -> Result<Vec<Check>, CliError> {
    let verdicts: serde_json::Map<String, Value> = field(result, "/verdicts")?;
    let mut out = Vec::new();
    for (name, v) in &verdicts {
        if v["status"] != "fails" {
            continue;
        }
        let ws = v["witnesses"].as_array().cloned().unwrap_or_default();
        let mut replayed = 0;
        let mut ok = true;
        for w in ws.iter().filter(|w| w["violation"] == true) {
            let probe: Probe = field(w, "/probe")?;
            let relation: Relation = field(w, "/relation")?;
            let witness = Witness {
                label: field(w, "/label")?,
                probe,
                relation,
                value: f64::NAN,
                bound: f64::NAN,
                violation: true,
            };
            ok &= witness.replay(subject)?;
            replayed += 1;
        }
        out.push(Check {
            what: format!("verdict {name}"),
            ok: ok && replayed > 0,
            detail: format!("{replayed} violation witness(es) replayed"),
        });
    }
    Ok(out)
}
