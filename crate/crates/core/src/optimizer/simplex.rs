//! Box-constrained Nelder-Mead downhill simplex.
//!
//! Trial points are clamped into the box before evaluation, which keeps the
//! method derivative-free and needs no penalty for the bounds themselves.

#[derive(Debug, Clone)]
pub struct SimplexOptions {
    /// Initial edge length along each coordinate.
    pub step: f64,
    /// Stop when `f_worst - f_best <= ftol * max(|f_best|, f_floor)`.
    pub ftol: f64,
    pub f_floor: f64,
    /// Stop when every vertex is within `xtol` of the best one.
    pub xtol: f64,
    pub max_iterations: usize,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self {
            step: 0.5,
            ftol: 1e-10,
            f_floor: 1e-12,
            xtol: 1e-10,
            max_iterations: 10_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SimplexResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn clamp(x: &mut [f64], lo: &[f64], hi: &[f64]) {
    for ((v, l), h) in x.iter_mut().zip(lo).zip(hi) {
        *v = v.clamp(*l, *h);
    }
}

/// Minimizes `f` from `x0` within `[lo, hi]`.
pub fn minimize<F>(mut f: F, x0: &[f64], lo: &[f64], hi: &[f64], opts: &SimplexOptions) -> SimplexResult
where
    F: FnMut(&[f64]) -> f64,
{
    let n = x0.len();
    let mut eval = |x: &[f64]| {
        let v = f(x);
        if v.is_nan() {
            f64::INFINITY
        } else {
            v
        }
    };

    let mut start = x0.to_vec();
    clamp(&mut start, lo, hi);
    let mut pts: Vec<Vec<f64>> = vec![start.clone()];
    for i in 0..n {
        let mut p = start.clone();
        p[i] += opts.step;
        if p[i] > hi[i] {
            p[i] = start[i] - opts.step;
        }
        clamp(&mut p, lo, hi);
        pts.push(p);
    }
    let mut vals: Vec<f64> = pts.iter().map(|p| eval(p)).collect();

    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iterations {
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| vals[a].total_cmp(&vals[b]));
        pts = order.iter().map(|&i| pts[i].clone()).collect();
        vals = order.iter().map(|&i| vals[i]).collect();

        let spread = vals[n] - vals[0];
        let diameter = pts[1..]
            .iter()
            .flat_map(|p| p.iter().zip(&pts[0]).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if (spread <= opts.ftol * vals[0].abs().max(opts.f_floor) && spread.is_finite()) || diameter <= opts.xtol {
            converged = true;
            break;
        }
        iterations += 1;

        let centroid: Vec<f64> = (0..n)
            .map(|k| pts[..n].iter().map(|p| p[k]).sum::<f64>() / n as f64)
            .collect();
        let along = |t: f64| -> Vec<f64> {
            let mut p: Vec<f64> = centroid
                .iter()
                .zip(&pts[n])
                .map(|(c, w)| c + t * (w - c))
                .collect();
            clamp(&mut p, lo, hi);
            p
        };

        let reflected = along(-1.0);
        let f_r = eval(&reflected);
        if f_r < vals[0] {
            let expanded = along(-2.0);
            let f_e = eval(&expanded);
            if f_e < f_r {
                pts[n] = expanded;
                vals[n] = f_e;
            } else {
                pts[n] = reflected;
                vals[n] = f_r;
            }
            continue;
        }
        if f_r < vals[n - 1] {
            pts[n] = reflected;
            vals[n] = f_r;
            continue;
        }
        let (contracted, f_c) = if f_r < vals[n] {
            let p = along(-0.5);
            let v = eval(&p);
            (p, v)
        } else {
            let p = along(0.5);
            let v = eval(&p);
            (p, v)
        };
        if f_c < vals[n].min(f_r) {
            pts[n] = contracted;
            vals[n] = f_c;
            continue;
        }
        // Shrink toward the best vertex.
        for i in 1..=n {
            let mut p: Vec<f64> = pts[i].iter().zip(&pts[0]).map(|(x, b)| b + 0.5 * (x - b)).collect();
            clamp(&mut p, lo, hi);
            vals[i] = eval(&p);
            pts[i] = p;
        }
    }
    let best = (0..=n).min_by(|&a, &b| vals[a].total_cmp(&vals[b])).unwrap_or(0);
    SimplexResult {
        x: pts[best].clone(),
        value: vals[best],
        iterations,
        converged,
    }
}
