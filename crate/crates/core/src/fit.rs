// Copyright 2026 The udd-echo Contributors
// SPDX-License-Identifier: Apache-2.0

//! Least-squares line fits in log-log space and time grids.

use serde::Serialize;

/// Ordinary least-squares fit `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub points: usize,
}

/// Returns `None` for fewer than two points or a degenerate abscissa.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> Option<LineFit> {
    let n = xs.len();
    if n < 2 || n != ys.len() {
        return None;
    }
    let nf = n as f64;
    let mx = xs.iter().sum::<f64>() / nf;
    let my = ys.iter().sum::<f64>() / nf;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    Some(LineFit {
        slope,
        intercept,
        residual: (ss / nf).sqrt(),
        points: n,
    })
}

/// Fit of `ln y` against `ln t`; inputs must be positive.
pub fn loglog_fit(ts: &[f64], ys: &[f64]) -> Option<LineFit> {
    let lx: Vec<f64> = ts.iter().map(|t| t.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    fit_line(&lx, &ly)
}

/// `points` geometrically spaced values from `t_min` to `t_max` inclusive.
pub fn geometric_grid(t_min: f64, t_max: f64, points: usize) -> Option<Vec<f64>> {
    if !(t_min > 0.0 && t_max >= t_min && t_max.is_finite()) || points == 0 {
        return None;
    }
    if points == 1 {
        return Some(vec![t_max]);
    }
    let ratio = (t_max / t_min).ln() / (points - 1) as f64;
    Some(
        (0..points)
            .map(|k| {
                if k == points - 1 {
                    t_max
                } else {
                    t_min * (ratio * k as f64).exp()
                }
            })
            .collect(),
    )
}
