//! Derivative-free minimization (Nelder-Mead simplex).

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimplexOptions {
    /// Stop when the spread of simplex values drops below this.
    pub ftol: f64,
    /// ... and the simplex diameter below this.
    pub xtol: f64,
    pub max_evals: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions {
            ftol: 1e-12,
            xtol: 1e-10,
            max_evals: 2000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evals: usize,
    pub converged: bool,
    /// Every point that improved the best value, in order.
    pub improvements: Vec<(Vec<f64>, f64)>,
}

/// Minimizes `f` from `x0` with initial simplex edges `step`. `f` may
/// return `None` to reject a point (treated as +∞).
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> Option<f64>,
{
    let n = x0.len();
    let mut evals = 0usize;
    let mut best = (x0.to_vec(), f64::INFINITY);
    let mut improvements = Vec::new();
    let budget = opts.max_evals;
    let mut eval = |x: &[f64], evals: &mut usize, best: &mut (Vec<f64>, f64)| -> f64 {
        if *evals >= budget {
            return f64::INFINITY;
        }
        *evals += 1;
        let v = f(x).filter(|v| v.is_finite()).unwrap_or(f64::INFINITY);
        if v < best.1 {
            *best = (x.to_vec(), v);
            improvements.push((x.to_vec(), v));
        }
        v
    };

    let mut pts: Vec<Vec<f64>> = vec![x0.to_vec()];
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i];
        pts.push(p);
    }
    let mut vals: Vec<f64> = Vec::with_capacity(n + 1);
    for p in &pts {
        if evals >= opts.max_evals {
            break;
        }
        vals.push(eval(p, &mut evals, &mut best));
    }
    if vals.len() < n + 1 {
        drop(eval);
        return SimplexResult {
            x: best.0,
            value: best.1,
            evals,
            converged: false,
            improvements,
        };
    }

    let mut converged = false;
    while evals < opts.max_evals {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let diam = pts[1..]
            .iter()
            .map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if spread.abs() <= opts.ftol && diam <= opts.xtol {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n)
            .map(|j| pts[..n].iter().map(|p| p[j]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            (0..n).map(|j| centroid[j] + t * (pts[n][j] - centroid[j])).collect()
        };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals, &mut best);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals, &mut best);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
        } else if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
        } else {
            let (xc, fc) = if fr < vals[n] {
                let x = along(-0.5);
                let v = eval(&x, &mut evals, &mut best);
                (x, v)
            } else {
                let x = along(0.5);
                let v = eval(&x, &mut evals, &mut best);
                (x, v)
            };
            if fc < vals[n].min(fr) {
                pts[n] = xc;
                vals[n] = fc;
            } else {
                for i in 1..=n {
                    let p: Vec<f64> = (0..n).map(|j| pts[0][j] + 0.5 * (pts[i][j] - pts[0][j])).collect();
                    vals[i] = eval(&p, &mut evals, &mut best);
                    pts[i] = p;
                    if evals >= opts.max_evals {
                        break;
                    }
                }
            }
        }
    }
    drop(eval);
    SimplexResult {
        x: best.0,
        value: best.1,
        evals,
        converged,
        improvements,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rosenbrock() {
        let f = |x: &[f64]| Some((1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2));
        let r = nelder_mead(f, &[-1.2, 1.0], &[0.5, 0.5], &SimplexOptions { max_evals: 5000, ..Default::default() });
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-5 && (r.x[1] - 1.0).abs() < 1e-5, "{:?}", r.x);
    }

    #[test]
    fn quadratic_seven_dims() {
        let target = [1.0, -2.0, 3.0, 0.5, -0.25, 4.0, -1.5];
        let f = |x: &[f64]| Some(x.iter().zip(&target).enumerate().map(|(i, (a, b))| (i as f64 + 1.0) * (a - b).powi(2)).sum());
        let r = nelder_mead(f, &[0.0; 7], &[1.0; 7], &SimplexOptions { max_evals: 20000, ..Default::default() });
        for (a, b) in r.x.iter().zip(&target) {
            assert!((a - b).abs() < 1e-5);
        }
    }

    #[test]
    fn improvements_are_decreasing_and_budget_respected() {
        let f = |x: &[f64]| Some(x[0].powi(2) + x[1].powi(2));
        let r = nelder_mead(f, &[3.0, 2.0], &[1.0, 1.0], &SimplexOptions { max_evals: 17, ..Default::default() });
        assert!(r.evals <= 17);
        assert!(r.improvements.windows(2).all(|w| w[1].1 < w[0].1));
        let r0 = nelder_mead(f, &[3.0, 2.0], &[1.0, 1.0], &SimplexOptions { max_evals: 0, ..Default::default() });
        assert_eq!(r0.evals, 0);
        assert_eq!(r0.x, vec![3.0, 2.0]);
    }
}
