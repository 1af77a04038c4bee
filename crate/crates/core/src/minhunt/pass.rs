use nalgebra::{DMatrix, DVector};

use crate::error::Result;
use crate::optim::{dot, sup_norm};
use crate::varprinciple::EnergyPair;

use super::relative_distance;

#[derive(Debug, Clone, Copy)]
pub struct PassOptions {
    /// Number of path points, endpoints included.
    pub images: usize,
    /// Descent sweeps over the interior images.
    pub sweeps: usize,
    /// Gradient sup-norm required of the minimax point.
    pub tol: f64,
    pub newton_iters: usize,
}

impl Default for PassOptions {
    fn default() -> Self {
        PassOptions {
            images: 33,
            sweeps: 2000,
            tol: 1e-6,
            newton_iters: 60,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PassStatus {
    Success,
    /// Identical endpoints, no barrier along the path, or the polished point
    /// fell back onto an endpoint.
    Collapse,
    NonConvergence,
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct MountainPassResult {
    pub end_a: Vec<f64>,
    pub end_b: Vec<f64>,
    pub path: Vec<Vec<f64>>,
    /// Energy at every path point.
    pub elevation: Vec<f64>,
    /// Path index of the highest interior point before polishing.
    pub peak_index: usize,
    pub saddle: Vec<f64>,
    pub saddle_energy: f64,
    pub grad_norm: f64,
    pub residual: Option<f64>,
    pub sweeps: usize,
    pub status: PassStatus,
}

/// Relaxes the straight path between two minima by steepest descent of its
/// interior points normal to the path, re-spacing them to equal arc length after each sweep,
/// then polishes the highest point with Newton's method on `∇E = 0`.
pub fn mountain_pass<P: EnergyPair + ?Sized>(
    pair: &P,
    mu: f64,
    end_a: &[f64],
    end_b: &[f64],
    opts: &PassOptions,
) -> Result<MountainPassResult> {
    let energy = |x: &[f64]| pair.energy(x, mu);
    let ea = energy(end_a)?.0;
    let eb = energy(end_b)?.0;
    let rim = ea.max(eb);
    let floor = ea.min(eb);
    let collapse = |path: Vec<Vec<f64>>, elevation: Vec<f64>, sweeps| -> Result<MountainPassResult> {
        let g = energy(end_a)?.1;
        Ok(MountainPassResult {
            end_a: end_a.to_vec(),
            end_b: end_b.to_vec(),
            path,
            elevation,
            peak_index: 0,
            saddle: end_a.to_vec(),
            saddle_energy: ea,
            grad_norm: sup_norm(&g),
            residual: pair.weak_residual(end_a, mu)?,
            sweeps,
            status: PassStatus::Collapse,
        })
    };
    if relative_distance(end_a, end_b) <= 1e-12 {
        return collapse(vec![end_a.to_vec()], vec![ea], 0);
    }

    let k = opts.images.max(3);
    let mut path: Vec<Vec<f64>> = (0..k)
        .map(|i| {
            let t = i as f64 / (k - 1) as f64;
            end_a.iter().zip(end_b).map(|(a, b)| a + t * (b - a)).collect()
        })
        .collect();
    let mut steps = vec![1.0_f64; k];
    // displacement cap of half an initial segment keeps images from running
    // off along unbounded descent directions
    let cap = 0.5 * arc_length(&path) / (k - 1) as f64;
    let mut sweeps = 0;
    for _ in 0..opts.sweeps {
        sweeps += 1;
        let mut moved = 0.0_f64;
        let mut force = 0.0_f64;
        let old = path.clone();
        for i in 1..k - 1 {
            let (e, g) = energy(&path[i])?;
            // images below both endpoints are past the barrier and may sit on
            // unbounded descent directions; leave them where they are
            if e < floor {
                continue;
            }
            let mut tau: Vec<f64> = old[i + 1].iter().zip(&old[i - 1]).map(|(a, b)| a - b).collect();
            let tn = tau.iter().map(|v| v * v).sum::<f64>().sqrt();
            if tn > 0.0 {
                tau.iter_mut().for_each(|v| *v /= tn);
            }
            let gt = dot(&g, &tau);
            let d: Vec<f64> = g.iter().zip(&tau).map(|(a, b)| a - gt * b).collect();
            let dd: f64 = d.iter().map(|v| v * v).sum();
            force = force.max(sup_norm(&d));
            if dd == 0.0 {
                continue;
            }
            let mut t = (steps[i] * 2.0).min(cap / dd.sqrt());
            let mut done = false;
            for _ in 0..50 {
                let y: Vec<f64> = path[i].iter().zip(&d).map(|(x, v)| x - t * v).collect();
                if let Ok((ey, _)) = energy(&y) {
                    if ey <= e - 1e-4 * t * dd {
                        moved = moved.max(t * sup_norm(&d));
                        path[i] = y;
                        done = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            steps[i] = if done { t } else { steps[i] * 0.5 };
        }
        respace(&mut path);
        let scale = 1.0 + path.iter().map(|p| sup_norm(p)).fold(0.0, f64::max);
        if force <= opts.tol || moved <= 1e-12 * scale {
            break;
        }
    }
    let elevation: Vec<f64> = path.iter().map(|p| energy(p).map(|e| e.0)).collect::<Result<_>>()?;
    let peak_index = (1..k - 1).fold(1, |best, i| if elevation[i] > elevation[best] { i } else { best });
    if !(elevation[peak_index] > rim + 1e-14 * (1.0 + rim.abs())) {
        return collapse(path, elevation, sweeps);
    }

    let saddle = newton_polish(&energy, &path[peak_index], opts)?;
    let (saddle_energy, g) = energy(&saddle)?;
    let grad_norm = sup_norm(&g);
    let on_end = relative_distance(&saddle, end_a) <= 1e-6 || relative_distance(&saddle, end_b) <= 1e-6;
    let status = if on_end {
        PassStatus::Collapse
    } else if grad_norm <= opts.tol && saddle_energy >= rim - 1e-12 {
        PassStatus::Success
    } else {
        PassStatus::NonConvergence
    };
    Ok(MountainPassResult {
        end_a: end_a.to_vec(),
        end_b: end_b.to_vec(),
        residual: pair.weak_residual(&saddle, mu)?,
        path,
        elevation,
        peak_index,
        saddle,
        saddle_energy,
        grad_norm,
        sweeps,
        status,
    })
}

/// Redistributes the interior points to equal Euclidean arc length along the
/// current polyline.
fn arc_length(path: &[Vec<f64>]) -> f64 {
    path.windows(2)
        .map(|w| w[1].iter().zip(&w[0]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .sum()
}

fn respace(path: &mut [Vec<f64>]) {
    let k = path.len();
    let mut arc = vec![0.0; k];
    for i in 1..k {
        let d: f64 = path[i].iter().zip(&path[i - 1]).map(|(a, b)| (a - b) * (a - b)).sum();
        arc[i] = arc[i - 1] + d.sqrt();
    }
    let total = arc[k - 1];
    if total == 0.0 {
        return;
    }
    let old = path.to_vec();
    let mut seg = 0;
    for (i, p) in path.iter_mut().enumerate().take(k - 1).skip(1) {
        let s = total * i as f64 / (k - 1) as f64;
        while seg + 1 < k - 1 && arc[seg + 1] < s {
            seg += 1;
        }
        let len = arc[seg + 1] - arc[seg];
        let w = if len > 0.0 { (s - arc[seg]) / len } else { 0.0 };
        for (j, v) in p.iter_mut().enumerate() {
            *v = old[seg][j] + w * (old[seg + 1][j] - old[seg][j]);
        }
    }
}

/// Damped Newton iteration on the gradient with a symmetrized
/// finite-difference Hessian; steps must reduce `‖∇E‖₂`.
fn newton_polish(
    energy: &(dyn Fn(&[f64]) -> Result<(f64, Vec<f64>)> + Sync),
    start: &[f64],
    opts: &PassOptions,
) -> Result<Vec<f64>> {
    let n = start.len();
    let mut x = start.to_vec();
    let mut g = energy(&x)?.1;
    let norm2 = |v: &[f64]| v.iter().map(|a| a * a).sum::<f64>().sqrt();
    for _ in 0..opts.newton_iters {
        if sup_norm(&g) <= opts.tol * 1e-3 {
            break;
        }
        let h = 1e-6 * (1.0 + sup_norm(&x));
        let mut hess = DMatrix::zeros(n, n);
        let mut y = x.clone();
        for j in 0..n {
            y[j] = x[j] + h;
            let gp = energy(&y)?.1;
            y[j] = x[j] - h;
            let gm = energy(&y)?.1;
            y[j] = x[j];
            for i in 0..n {
                hess[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        let hess = (&hess + hess.transpose()) * 0.5;
        let rhs = -DVector::from_column_slice(&g);
        let Some(step) = hess.lu().solve(&rhs) else {
            break;
        };
        let g0 = norm2(&g);
        let mut t = 1.0;
        let mut improved = false;
        for _ in 0..30 {
            let trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, d)| a + t * d).collect();
            if let Ok((_, gt)) = energy(&trial) {
                if norm2(&gt) < g0 {
                    x = trial;
                    g = gt;
                    improved = true;
                    break;
                }
            }
            t *= 0.5;
        }
        if !improved {
            break;
        }
    }
    Ok(x)
}
