//! Nelder–Mead downhill simplex minimizer with deterministic multi-start.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Stopping rules.
#[derive(Debug, Clone, Copy)]
pub struct SimplexOptions {
    /// Stop once every vertex lies within this distance of the best one (per coordinate).
    pub x_tol: f64,
    /// Stop once the spread of objective values falls below this.
    pub f_tol: f64,
    /// Spread tolerance relative to the best objective value.
    pub f_rel_tol: f64,
    pub max_evals: usize,
    /// Extra restarts from the best point after convergence.
    pub restarts: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        SimplexOptions { x_tol: 1e-10, f_tol: 1e-16, f_rel_tol: f64::EPSILON, max_evals: 20_000, restarts: 2 }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub f: f64,
    pub evals: usize,
    pub converged: bool,
}

/// Minimize `f` from `x0` with initial simplex edge `step[i]` along axis `i`.
///
/// Non-finite objective values are treated as `+inf`.
pub fn minimize<F: FnMut(&[f64]) -> f64>(mut f: F, x0: &[f64], step: &[f64], opts: &SimplexOptions) -> SimplexResult {
    let mut eval = |x: &[f64], count: &mut usize| {
        *count += 1;
        let v = f(x);
        if v.is_finite() { v } else { f64::INFINITY }
    };
    let mut evals = 0;
    let mut best = x0.to_vec();
    let mut best_f = eval(&best, &mut evals);
    let mut converged = false;
    for round in 0..=opts.restarts {
        let scale = if round == 0 { 1.0 } else { 0.1 };
        let (x, fx, ok) = run(&mut eval, &best, step, scale, opts, &mut evals);
        let improved = fx < best_f;
        if fx <= best_f {
            best = x;
            best_f = fx;
        }
        converged = ok;
        if round > 0 && !improved {
            break;
        }
        if evals >= opts.max_evals {
            break;
        }
    }
    SimplexResult { x: best, f: best_f, evals, converged }
}

/// Perturbed starting points around a seed point.
#[derive(Debug, Clone, Copy)]
pub struct MultiStart {
    /// Total number of starts; the first is the unperturbed seed point.
    pub starts: usize,
    /// Half-width of the uniform offset applied to every coordinate.
    pub spread: f64,
    pub seed: u64,
}

/// Run [`minimize`] from several starts in parallel and return the best
/// result, ties broken by start index.
pub fn multi_start<F>(f: F, x0: &[f64], step: &[f64], ms: &MultiStart, opts: &SimplexOptions) -> SimplexResult
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    let mut rng = ChaCha8Rng::seed_from_u64(ms.seed);
    let starts: Vec<Vec<f64>> = (0..ms.starts.max(1))
        .map(|k| {
            if k == 0 {
                x0.to_vec()
            } else {
                x0.iter().map(|&v| v + rng.random_range(-ms.spread..=ms.spread)).collect()
            }
        })
        .collect();
    let results: Vec<SimplexResult> = starts.par_iter().map(|s| minimize(&f, s, step, opts)).collect();
    let total: usize = results.iter().map(|r| r.evals).sum();
    let mut best = results
        .into_iter()
        .reduce(|a, b| if b.f < a.f { b } else { a })
        .expect("at least one start");
    best.evals = total;
    best
}

/// Golden-section search for a minimum of `f` on `[a, b]`, stopping once the
/// bracket is narrower than `tol`. Returns the best abscissa and value seen.
pub fn golden_section<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let r = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - r * (b - a);
    let mut d = a + r * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - r * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + r * (b - a);
            fd = f(d);
        }
    }
    if fc < fd { (c, fc) } else { (d, fd) }
}

fn run<E: FnMut(&[f64], &mut usize) -> f64>(
    eval: &mut E,
    x0: &[f64],
    step: &[f64],
    scale: f64,
    opts: &SimplexOptions,
    evals: &mut usize,
) -> (Vec<f64>, f64, bool) {
    let n = x0.len();
    let mut pts: Vec<Vec<f64>> = Vec::with_capacity(n + 1);
    pts.push(x0.to_vec());
    for i in 0..n {
        let mut p = x0.to_vec();
        p[i] += step[i] * scale;
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p, evals)).collect();

    loop {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let x_spread = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        let f_spread = (vals[n] - vals[0]).abs();
        if x_spread <= opts.x_tol && f_spread <= opts.f_tol.max(opts.f_rel_tol * vals[0].abs()) {
            return (pts[0].clone(), vals[0], true);
        }
        if *evals >= opts.max_evals {
            return (pts[0].clone(), vals[0], false);
        }

        let centroid: Vec<f64> = (0..n).map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|k| centroid[k] + t * (pts[n][k] - centroid[k])).collect() };

        let xr = along(-1.0);
        let fr = eval(&xr, evals);
        if fr < vals[0] {
            let xe = along(-2.0);
            let fe = eval(&xe, evals);
            if fe < fr {
                pts[n] = xe;
                vals[n] = fe;
            } else {
                pts[n] = xr;
                vals[n] = fr;
            }
            continue;
        }
        if fr < vals[n - 1] {
            pts[n] = xr;
            vals[n] = fr;
            continue;
        }
        // outside contraction if the reflection helped at all, inside otherwise
        let xc = if fr < vals[n] { along(-0.5) } else { along(0.5) };
        let fc = eval(&xc, evals);
        if fc < vals[n].min(fr) {
            pts[n] = xc;
            vals[n] = fc;
            continue;
        }
        for i in 1..=n {
            let shrunk: Vec<f64> = (0..n).map(|k| pts[0][k] + 0.5 * (pts[i][k] - pts[0][k])).collect();
            vals[i] = eval(&shrunk, evals);
            pts[i] = shrunk;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finds_rosenbrock_minimum() {
        let rosen = |x: &[f64]| (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2);
        let r = minimize(rosen, &[-1.2, 1.0], &[0.1, 0.1], &SimplexOptions::default());
        assert!(r.converged);
        assert!((r.x[0] - 1.0).abs() < 1e-6 && (r.x[1] - 1.0).abs() < 1e-6, "{:?}", r.x);
    }

    #[test]
    fn respects_eval_budget() {
        let opts = SimplexOptions { max_evals: 30, ..Default::default() };
        let r = minimize(|x: &[f64]| x.iter().map(|v| v * v).sum(), &[3.0, -2.0, 1.0], &[1.0; 3], &opts);
        assert!(r.evals <= 40);
        assert!(!r.converged);
    }

    #[test]
    fn multi_start_is_deterministic() {
        let f = |x: &[f64]| (x[0].sin() * 3.0 + x[0] * x[0] * 0.1) + (x[1] - 1.0).powi(2);
        let ms = MultiStart { starts: 6, spread: 3.0, seed: 7 };
        let a = multi_start(f, &[2.0, 0.0], &[0.5, 0.5], &ms, &SimplexOptions::default());
        let b = multi_start(f, &[2.0, 0.0], &[0.5, 0.5], &ms, &SimplexOptions::default());
        assert_eq!(a.x, b.x);
        assert!(a.x[0] < 0.0, "global basin not found: {:?}", a.x);
    }

    #[test]
    fn golden_section_finds_parabola_vertex() {
        let (x, fx) = golden_section(|x| (x - 0.3).powi(2), -1.0, 2.0, 1e-10);
        assert!((x - 0.3).abs() < 1e-9);
        assert!(fx < 1e-18);
    }

    #[test]
    fn treats_nan_as_infinite() {
        let f = |x: &[f64]| if x[0] < 0.0 { f64::NAN } else { (x[0] - 2.0).powi(2) };
        let r = minimize(f, &[0.5], &[1.0], &SimplexOptions::default());
        assert!((r.x[0] - 2.0).abs() < 1e-6);
    }
}
