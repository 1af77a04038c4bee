//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit status
//! if any criterion fails.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::Arc;
use std::time::Instant;

use nalgebra::DVector;
use rand::Rng;
use serde_json::Value;
use varlab_core::bifurcation::{continue_branch, recertify, BranchModel, SolveOptions};
use varlab_core::fem::{defect_jacobian, energy_parts, grad_energy, residual, weak_defect};
use varlab_core::fixedpoint::{find_fixed_point, sup_ratio_scan, PotentialSpec, PotentialTag};
use varlab_core::hypotheses::{check_ar, check_limit_zero, Grid, Status, Subject, Verdict};
use varlab_core::minhunt::{certify, minimize_global, mountain_pass, relative_distance, PassOptions, PassStatus};
use varlab_core::optim::sup_norm;
use varlab_core::varprinciple::{geometric_grid, lambda_star, phi_of_rho, restart_rng, AnalyticPair, FemPair, Multistart};
use varlab_core::{parse, BoundaryCondition, DiscreteFn, EnergyModel, EnergyPair, FeSpace, LocalMin, Mesh1D};

type Outcome = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn fail<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn space(n: usize, bc: BoundaryCondition) -> Arc<FeSpace> {
    Arc::new(FeSpace::new(Mesh1D::unit(n).unwrap(), bc))
}

/// `inf (Φ - m)/(ρ - Ψ)` for `Φ = -x`, `Ψ = x²` by exhaustive search on a
/// uniform grid of the given step.
fn neg_linear_grid_quotient(rho: f64, step: f64) -> f64 {
    let r = rho.sqrt();
    let n = (2.0 * r / step).floor() as i64;
    let xs = (0..=n).map(|i| -r + i as f64 * step);
    let m = xs.clone().filter(|x| x * x <= rho).map(|x| -x).fold(f64::INFINITY, f64::min);
    xs.filter(|x| x * x < rho)
        .map(|x| (-x - m) / (rho - x * x))
        .fold(f64::INFINITY, f64::min)
}

fn a1() -> Outcome {
    let pair = AnalyticPair::neg_linear();
    let mut worst = 0.0_f64;
    for rho in [0.25, 1.0, 4.0, 100.0] {
        let p = phi_of_rho(&pair, rho, &Multistart::default()).map_err(fail)?;
        let exact = 1.0 / (2.0 * rho.sqrt());
        let grid = neg_linear_grid_quotient(rho, 1e-4);
        ensure((p.phi_hat - exact).abs() <= 1e-4, || format!("ρ = {rho}: φ̂ = {} vs {exact}", p.phi_hat))?;
        // the grid misses the open boundary by at most one step
        ensure((grid - exact).abs() <= 2e-4, || format!("ρ = {rho}: grid search {grid} vs {exact}"))?;
        worst = worst.max((p.phi_hat - exact).abs());
    }
    Ok(format!("max |φ̂ - 1/(2√ρ)| = {worst:.2e}"))
}

fn a2() -> Outcome {
    let spec = PotentialSpec::from_tag(PotentialTag::Linear { c: vec![1.0] }).map_err(fail)?;
    let r = find_fixed_point(&spec, 4.0, &Multistart::default()).map_err(fail)?;
    ensure((r.phi_hat - 0.25).abs() <= 1e-4 && r.phi_hat < 0.5, || format!("φ̂ = {}", r.phi_hat))?;
    let fp = r.fixed_point.ok_or("no fixed point reported")?;
    ensure((fp.point[0] - 1.0).abs() <= 1e-6 && fp.norm < 2.0, || format!("fixed point {:?}", fp.point))?;
    Ok(format!("φ̂ = {:.6}, x = {:.9}", r.phi_hat, fp.point[0]))
}

fn a3() -> Outcome {
    let f = parse("xi^3").map_err(fail)?;
    let mut worst = BTreeMap::new();
    for (p, tol) in [(2.0, 1e-6), (3.0, 1e-4)] {
        let model = EnergyModel::dirichlet(p, f.clone()).map_err(fail)?;
        for n in [8, 32] {
            let sp = space(n, BoundaryCondition::Dirichlet);
            for k in 0..20 {
                let mut rng = restart_rng(17, n as u64, k);
                let u: Vec<f64> = (0..sp.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                let energy = |v: &[f64]| -> Result<f64, String> {
                    let e = energy_parts(&model, &sp, v, false).map_err(fail)?;
                    Ok(e.phi + e.psi)
                };
                let g = grad_energy(&model, &DiscreteFn::new(sp.clone(), u.clone()).map_err(fail)?, 1.0).map_err(fail)?;
                let h = 1e-6;
                let mut fd = Vec::with_capacity(u.len());
                for i in 0..u.len() {
                    let (mut up, mut dn) = (u.clone(), u.clone());
                    up[i] += h;
                    dn[i] -= h;
                    fd.push((energy(&up)? - energy(&dn)?) / (2.0 * h));
                }
                let scale = sup_norm(&fd).max(1e-12);
                let err = g.iter().zip(&fd).fold(0.0_f64, |m, (a, b)| m.max((a - b).abs())) / scale;
                ensure(err <= tol, || format!("p = {p}, N = {n}, sample {k}: relative error {err:.2e}"))?;
                let w = worst.entry(format!("p={p}")).or_insert(0.0_f64);
                *w = w.max(err);
            }
        }
    }
    Ok(worst.iter().map(|(k, v)| format!("{k}: {v:.1e}")).collect::<Vec<_>>().join(", "))
}

fn a4() -> Outcome {
    let sp = space(64, BoundaryCondition::Dirichlet);
    let model = EnergyModel::dirichlet(2.0, parse("1").map_err(fail)?).map_err(fail)?;
    let zero = vec![0.0; sp.dim()];
    let jac = defect_jacobian(&model, &sp, &zero, 1.0).map_err(fail)?;
    let rhs = weak_defect(&model, &sp, &zero, 1.0).map_err(fail)?;
    let sol = jac.lu().solve(&DVector::from_vec(rhs)).ok_or("singular stiffness matrix")?;
    let u = DiscreteFn::new(sp.clone(), sol.iter().map(|v| -v).collect()).map_err(fail)?;
    let err = sp
        .mesh()
        .nodes()
        .iter()
        .zip(u.nodal_values())
        .fold(0.0_f64, |m, (x, v)| m.max((v - x * (1.0 - x) / 2.0).abs()));
    let res = residual(&model, &u, 1.0).map_err(fail)?;
    ensure(err <= 1e-8 && res <= 1e-12, || format!("nodal error {err:.2e}, residual {res:.2e}"))?;
    Ok(format!("nodal error {err:.1e}, residual {res:.1e}"))
}

fn a5() -> Outcome {
    let pair = AnalyticPair::square_abs();
    let opts = Multistart::default();
    let l = lambda_star(&pair, &geometric_grid(0.1, 1e4, 6).map_err(fail)?, &opts).map_err(fail)?;
    ensure(l.abs() <= 1e-4, || format!("λ̂* = {l}"))?;
    let mut detail = vec![format!("λ̂* = {l:.1e}")];
    for lambda in [0.1, 1.0] {
        let g = minimize_global(&pair, lambda, 4.0, &opts).map_err(fail)?;
        // x² + λ|x| has its minimum 0 at the kink, where 0 ∈ ∂E needs
        // non-negative one-sided slopes
        ensure(g.point[0].abs() <= 1e-6 && g.energy <= 1e-10, || format!("λ = {lambda}: minimizer {:?}", g.point))?;
        ensure(g.min_slope >= -1e-6, || format!("λ = {lambda}: one-sided slope {}", g.min_slope))?;
        detail.push(format!("λ = {lambda}: x = {:.1e}, slope {:.3}", g.point[0], g.min_slope));
    }
    Ok(detail.join("; "))
}

fn a6() -> Outcome {
    let grid = Grid::default();
    let cube = parse("xi^3").map_err(fail)?;
    let lin = parse("xi").map_err(fail)?;
    let holds = |v: &Verdict, what: &str| ensure(v.status == Status::Holds, || format!("{what}: {}", v.label()));
    let fails = |v: &Verdict, f: &varlab_core::Expr, what: &str| -> Result<(), String> {
        ensure(v.status == Status::Fails, || format!("{what}: {}", v.label()))?;
        ensure(v.violations().count() > 0, || format!("{what}: no witness"))?;
        ensure(v.replay(&Subject::f(f)).map_err(fail)?, || format!("{what}: witness does not replay"))
    };
    holds(&check_ar(&cube, 4.0, 1.0, &grid).map_err(fail)?, "AR ξ³, c = 4")?;
    fails(&check_ar(&lin, 3.0, 1.0, &grid).map_err(fail)?, &lin, "AR ξ, c = 3")?;
    fails(&check_ar(&cube, 5.0, 1.0, &grid).map_err(fail)?, &cube, "AR ξ³, c = 5")?;
    holds(&check_limit_zero(&cube, &grid).map_err(fail)?, "f/ξ → 0 for ξ³")?;
    fails(&check_limit_zero(&lin, &grid).map_err(fail)?, &lin, "f/ξ → 0 for ξ")?;
    Ok("2 accepted, 3 rejected with replayed witnesses".into())
}

fn a7() -> Outcome {
    let well = AnalyticPair::double_well();
    let r = mountain_pass(&well, 0.0, &[-1.0, 0.0], &[1.0, 0.0], &PassOptions::default()).map_err(fail)?;
    ensure(r.status == PassStatus::Success, || format!("double well: {:?}", r.status))?;
    let (_, g) = well.energy(&r.saddle, 0.0).map_err(fail)?;
    ensure(sup_norm(&r.saddle) <= 1e-3 && sup_norm(&g) <= 1e-6, || {
        format!("double well saddle {:?}, gradient {:.2e}", r.saddle, sup_norm(&g))
    })?;

    let sp = space(32, BoundaryCondition::Dirichlet);
    let pair = FemPair::new(EnergyModel::dirichlet(2.0, parse("xi^3").map_err(fail)?).map_err(fail)?, sp.clone()).map_err(fail)?;
    let nodes = sp.mesh().nodes();
    let far: Vec<f64> = nodes[1..nodes.len() - 1].iter().map(|x| 8.0 * (PI * x).sin()).collect();
    let zero = vec![0.0; pair.dim()];
    let opts = PassOptions {
        tol: 1e-4,
        ..PassOptions::default()
    };
    let c = mountain_pass(&pair, 1.0, &zero, &far, &opts).map_err(fail)?;
    // the residual is recomputed here from the returned point
    let res = pair.weak_residual(&c.saddle, 1.0).map_err(fail)?.ok_or("no residual")?;
    ensure(c.status == PassStatus::Success && sup_norm(&c.saddle) > 1e-3 && res <= 1e-4, || {
        format!("cubic: {:?}, ‖u‖∞ = {:.3e}, residual {res:.2e}", c.status, sup_norm(&c.saddle))
    })?;
    Ok(format!(
        "saddle {:.1e} from origin, gradient {:.1e}; cubic residual {res:.1e}, ‖u‖∞ = {:.3}",
        sup_norm(&r.saddle),
        sup_norm(&g),
        sup_norm(&c.saddle)
    ))
}

fn varlab(args: &[&str], config: &Path, out: &Path, jobs: Option<usize>) -> Result<PathBuf, String> {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_varlab"));
    cmd.args(args).arg("--config").arg(config).arg("--out").arg(out);
    if let Some(j) = jobs {
        cmd.arg("--jobs").arg(j.to_string());
    }
    let o = cmd.output().map_err(fail)?;
    let stdout = String::from_utf8_lossy(&o.stdout);
    ensure(o.status.success(), || {
        format!("varlab {args:?} exited with {:?}: {}", o.status.code(), String::from_utf8_lossy(&o.stderr))
    })?;
    let dir = stdout
        .lines()
        .find_map(|l| l.strip_prefix("run directory: "))
        .ok_or("no run directory printed")?;
    Ok(PathBuf::from(dir))
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn a8() -> Outcome {
    let cfg_path = config("hunt_oscillating.json");
    let cfg: Value = serde_json::from_str(&fs::read_to_string(&cfg_path).map_err(fail)?).map_err(fail)?;
    let prob = &cfg["problem"]["oscillating_neumann"];
    ensure(
        prob["p"] == 2 && prob["n"] == 64 && prob["eta"] == "1" && cfg["mu"] == 1 && cfg["mode"] == "increasing",
        || "config does not describe the oscillating Neumann model".into(),
    )?;
    ensure(cfg["ladder"]["levels"].as_u64().unwrap_or(0) >= 6, || "fewer than 6 levels".into())?;
    let tmp = tempfile::tempdir().map_err(fail)?;
    let dir = varlab(&["hunt"], &cfg_path, tmp.path(), None)?;
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("report.json")).map_err(fail)?).map_err(fail)?;
    let accepted: Vec<LocalMin> = serde_json::from_value(report["result"]["hunt"]["accepted"].clone()).map_err(fail)?;
    ensure(!accepted.is_empty(), || "no accepted minimum".into())?;

    let model = EnergyModel::neumann(
        2.0,
        parse("distosc(2)").map_err(fail)?,
        parse("0").map_err(fail)?,
        parse("1").map_err(fail)?,
        parse("0").map_err(fail)?,
        parse("1").map_err(fail)?,
    )
    .map_err(fail)?;
    let pair = FemPair::new(model, space(64, BoundaryCondition::Neumann)).map_err(fail)?;
    let mut interior = 0;
    for m in &accepted {
        let again = certify(&pair, 1.0, m.rho, &m.point, 0).map_err(fail)?;
        let res = again.residual.ok_or("no residual")?;
        ensure(again.grad_norm <= 1e-6 && res <= 1e-6 && again.psi < m.rho, || {
            format!("minimum at Ψ = {}: gradient {:.2e}, residual {res:.2e}", m.psi, again.grad_norm)
        })?;
        interior += again.interior as usize;
    }
    ensure(interior >= 1, || "no interior minimum".into())?;
    ensure(accepted.windows(2).all(|w| w[1].psi > w[0].psi), || "Ψ not strictly increasing".into())?;
    for (i, a) in accepted.iter().enumerate() {
        for b in &accepted[i + 1..] {
            ensure(relative_distance(&a.point, &b.point) > 1e-6, || "duplicate minima".into())?;
        }
    }
    Ok(format!("{} accepted minima recertified, {interior} interior", accepted.len()))
}

fn a9() -> Outcome {
    let one = parse("1").map_err(fail)?;
    let model = BranchModel::power(one.clone(), 3.0, one, 0.5, 64).map_err(fail)?;
    let grid: Vec<f64> = (0..12).map(|k| 0.2 * 0.01_f64.powf(k as f64 / 11.0)).collect();
    let branch = continue_branch(&model, &grid, &SolveOptions::default()).map_err(fail)?;
    let conv: Vec<_> = branch.points.iter().filter(|p| p.flag.converged()).collect();
    ensure(conv.len() >= 2, || format!("only {} converged points", conv.len()))?;
    for p in &conv {
        let r = recertify(&model, p).map_err(fail)?;
        ensure(r.residual <= 1e-8 && r.min_value >= -1e-10, || {
            format!("λ = {}: residual {:.2e}, min {:.2e}", p.lambda, r.residual, r.min_value)
        })?;
    }
    ensure(conv.iter().all(|p| p.energy < 0.0), || "nonnegative energy".into())?;
    // λ decreases along the grid, so the energy must increase along it
    ensure(conv.windows(2).all(|w| w[1].energy > w[0].energy), || "energy not strictly decreasing in λ".into())?;
    // tail: the smaller-λ half of the converged points
    let ratios: Vec<f64> = conv[conv.len() / 2..].iter().map(|p| p.c1proxy / p.lambda).collect();
    let spread = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    ensure(spread <= 10.0, || format!("c1proxy/λ spread {spread:.2} over the tail"))?;
    Ok(format!(
        "{} of {} points converged, c1proxy/λ spread {spread:.2} over the last {}",
        conv.len(),
        grid.len(),
        ratios.len()
    ))
}

fn a10() -> Outcome {
    let radii = geometric_grid(1.0, 16.0, 9).map_err(fail)?;
    let opts = Multistart {
        budget: 8,
        ..Multistart::default()
    };
    let plateau = PotentialSpec::from_tag(PotentialTag::Plateau {
        dim: 2,
        width: varlab_core::fixedpoint::PLATEAU_WIDTH,
    })
    .map_err(fail)?;
    let s = sup_ratio_scan(&plateau, &radii, &opts).map_err(fail)?;
    ensure(s.straddles && s.tail_min < 0.48 && s.tail_max > 0.52, || {
        format!("plateau ratios {:?}", s.rows.iter().map(|r| r.ratio).collect::<Vec<_>>())
    })?;
    let quad = PotentialSpec::from_tag(PotentialTag::Quadratic {
        dim: 2,
        a: 0.25,
        shift: 0.0,
    })
    .map_err(fail)?;
    let q = sup_ratio_scan(&quad, &radii, &opts).map_err(fail)?;
    ensure(!q.straddles, || "quadratic potential straddles".into())?;
    Ok(format!(
        "plateau tail [{:.3}, {:.3}]; quadratic tail [{:.3}, {:.3}]",
        s.tail_min, s.tail_max, q.tail_min, q.tail_max
    ))
}

fn csv_files(dir: &Path) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let mut out = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(fail)? {
        let path = entry.map_err(fail)?.path();
        if path.extension().is_some_and(|e| e == "csv") {
            let name = path.file_name().unwrap().to_string_lossy().into_owned();
            out.insert(name, fs::read(&path).map_err(fail)?);
        }
    }
    Ok(out)
}

fn a11() -> Outcome {
    let runs = [
        ("phi-curve", "phi_curve_toy.json"),
        ("hunt", "hunt_oscillating.json"),
        ("fixed-point", "fixed_point_scan.json"),
        ("bifurcate", "bifurcate.json"),
    ];
    let tmp = tempfile::tempdir().map_err(fail)?;
    let mut compared = 0;
    for (cmd, cfg) in runs {
        let a = varlab(&[cmd, "--seed", "7"], &config(cfg), &tmp.path().join("one"), Some(1))?;
        let b = varlab(&[cmd, "--seed", "7"], &config(cfg), &tmp.path().join("eight"), Some(8))?;
        let (fa, fb) = (csv_files(&a)?, csv_files(&b)?);
        ensure(!fa.is_empty(), || format!("{cmd}: no CSV artifacts"))?;
        ensure(fa == fb, || format!("{cmd}: CSV artifacts differ between --jobs 1 and --jobs 8"))?;
        compared += fa.len();
    }
    Ok(format!("{compared} CSV files byte-identical across --jobs 1 and --jobs 8"))
}

fn main() {
    let criteria: [(&str, &str, fn() -> Outcome); 11] = [
        ("A1", "quotient exactness on Φ = -x, Ψ = x²", a1),
        ("A2", "linear potential fixed point", a2),
        ("A3", "FEM gradient vs finite differences", a3),
        ("A4", "linear FEM oracle -u'' = 1", a4),
        ("A5", "λ* and global minimizers for x², |x|", a5),
        ("A6", "hypothesis checkers and witness replay", a6),
        ("A7", "mountain pass saddles", a7),
        ("A8", "oscillation hunt recertification", a8),
        ("A9", "concave-convex branch", a9),
        ("A10", "sup-ratio straddle scan", a10),
        ("A11", "determinism across thread counts", a11),
    ];
    let mut failed = 0;
    for (id, what, run) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("{id:<4} PASS  {what}: {detail} ({secs:.1} s)"),
            Err(why) => {
                failed += 1;
                println!("{id:<4} FAIL  {what}: {why} ({secs:.1} s)");
            }
        }
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
