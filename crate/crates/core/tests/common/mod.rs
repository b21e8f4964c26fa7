#![allow(dead_code)]

use pkf_core::{GaussianEstimate, TimeGrid, TimeSeriesData};

/// Classical fourth-order Runge–Kutta for a scalar ODE; negative spans
/// integrate backward.
pub fn rk4<F: Fn(f64, f64) -> f64>(f: F, x0: f64, t0: f64, t1: f64, steps: usize) -> f64 {
    let h = (t1 - t0) / steps as f64;
    let (mut t, mut x) = (t0, x0);
    for _ in 0..steps {
        let k1 = f(t, x);
        let k2 = f(t + 0.5 * h, x + 0.5 * h * k1);
        let k3 = f(t + 0.5 * h, x + 0.5 * h * k2);
        let k4 = f(t + h, x + h * k3);
        x += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
    }
    x
}

/// Scalar KF and RTS smoother for `x_t = a x_{t-1} + b + noise(q)` observed
/// through `z_t` with variance `V(Z_t)`; the state at t = 0 is the first
/// observation.
pub struct LinearReference {
    pub filtered: Vec<(f64, f64)>,
    pub smoothed: Vec<(f64, f64)>,
}

pub fn linear_kf_rts(z: &[GaussianEstimate], steps: &[(f64, f64)], q: f64) -> LinearReference {
    let n = z.len();
    let mut filtered = vec![(z[0].mean, z[0].variance)];
    let mut predicted = vec![(z[0].mean, z[0].variance)];
    for t in 1..n {
        let (a, b) = steps[t - 1];
        let (m, p) = filtered[t - 1];
        let (mp, pp) = (a * m + b, a * a * p + q);
        let k = pp / (pp + z[t].variance);
        predicted.push((mp, pp));
        filtered.push((mp + k * (z[t].mean - mp), (1.0 - k) * pp));
    }
    let mut smoothed = filtered.clone();
    for t in (0..n - 1).rev() {
        let (a, _) = steps[t];
        let g = filtered[t].1 * a / predicted[t + 1].1;
        smoothed[t] = (
            filtered[t].0 + g * (smoothed[t + 1].0 - predicted[t + 1].0),
            filtered[t].1 + g * g * (smoothed[t + 1].1 - predicted[t + 1].1),
        );
    }
    LinearReference { filtered, smoothed }
}

/// Minimiser of `w^2 C + wf^2 A + wm^2 B` over the simplex, by a 0.01 grid
/// followed by a 1e-4 grid around the coarse optimum. The objective is
/// convex, so the coarse cell contains the global minimiser.
pub fn brute_force_weights(a: f64, b: f64, c: f64) -> (f64, f64, f64) {
    let objective = |w: f64, wm: f64| {
        let wf = 1.0 - w - wm;
        w * w * c + wf * wf * a + wm * wm * b
    };
    let scan = |w_lo: f64, w_hi: f64, m_lo: f64, m_hi: f64, step: f64| {
        let mut best = (f64::INFINITY, 0.0, 0.0);
        let nw = ((w_hi - w_lo) / step).round() as usize;
        let nm = ((m_hi - m_lo) / step).round() as usize;
        for i in 0..=nw {
            let w = w_lo + i as f64 * step;
            for j in 0..=nm {
                let wm = m_lo + j as f64 * step;
                if w + wm > 1.0 + 1e-12 {
                    break;
                }
                let v = objective(w, wm);
                if v < best.0 {
                    best = (v, w, wm);
                }
            }
        }
        best
    };
    let coarse = scan(0.0, 1.0, 0.0, 1.0, 0.01);
    let clamp = |x: f64| x.clamp(0.0, 1.0);
    let fine = scan(
        clamp(coarse.1 - 0.02),
        clamp(coarse.1 + 0.02),
        clamp(coarse.2 - 0.02),
        clamp(coarse.2 + 0.02),
        1e-4,
    );
    (fine.1, fine.2, 1.0 - fine.1 - fine.2)
}

pub fn series_from_means(times: &[f64], rows: &[Vec<f64>]) -> TimeSeriesData {
    TimeSeriesData::new("test", TimeGrid::new(times.to_vec()).unwrap(), rows.to_vec()).unwrap()
}
