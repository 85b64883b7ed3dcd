//! Least-squares rates from diagnostic time series.
//!
//! `<t> = sqrt(1 + t^2)` throughout. Within a window, points below
//! `1e-14` times the window maximum are dropped before taking logarithms.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Minimum number of usable points in a window.
pub const MIN_POINTS: usize = 5;
/// Relative floor below which samples are treated as numerical zeros.
pub const ZERO_FLOOR: f64 = 1e-14;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("value {value} at t = {t} is not positive")]
    NonPositive { t: f64, value: f64 },
    #[error("window [{lo}, {hi}] holds {n} usable points, need {MIN_POINTS}")]
    Degenerate { lo: f64, hi: f64, n: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub exponent_or_rate: f64,
    pub intercept: f64,
    pub rms_residual: f64,
    pub window: [f64; 2],
    pub n_points: usize,
}

pub fn bracket(t: f64) -> f64 {
    (1.0 + t * t).sqrt()
}

fn in_window(t: f64, window: [f64; 2]) -> bool {
    let tol = 1e-12 * window[1].abs().max(1.0);
    t >= window[0] - tol && t <= window[1] + tol
}

/// Usable `(t, v)` samples inside `window`.
fn select(series: &[(f64, f64)], window: [f64; 2]) -> Result<Vec<(f64, f64)>, FitError> {
    let mut pts = Vec::new();
    for &(t, v) in series {
        if !in_window(t, window) {
            continue;
        }
        if !(v >= 0.0) {
            return Err(FitError::NonPositive { t, value: v });
        }
        pts.push((t, v));
    }
    let vmax = pts.iter().map(|p| p.1).fold(0.0, f64::max);
    if vmax == 0.0 && !pts.is_empty() {
        return Err(FitError::NonPositive {
            t: pts[0].0,
            value: 0.0,
        });
    }
    pts.retain(|p| p.1 > ZERO_FLOOR * vmax);
    if pts.len() < MIN_POINTS || !(window[1] > window[0]) {
        return Err(FitError::Degenerate {
            lo: window[0],
            hi: window[1],
            n: pts.len(),
        });
    }
    Ok(pts)
}

/// Ordinary least squares `y = slope x + intercept`; returns
/// `(slope, intercept, rms residual)`.
fn least_squares(xy: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / n;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let intercept = my - slope * mx;
    let rss: f64 = xy
        .iter()
        .map(|p| (p.1 - slope * p.0 - intercept).powi(2))
        .sum();
    (slope, intercept, (rss / n).sqrt())
}

/// Slope of `log v` against `log <t>`.
pub fn power_law_slope(series: &[(f64, f64)], window: [f64; 2]) -> Result<FitResult, FitError> {
    let pts = select(series, window)?;
    let xy: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(t, v)| (bracket(t).ln(), v.ln()))
        .collect();
    let (slope, intercept, rms) = least_squares(&xy);
    Ok(FitResult {
        exponent_or_rate: slope,
        intercept,
        rms_residual: rms,
        window,
        n_points: pts.len(),
    })
}

/// Decay rate `-slope` of `log v - detrend_power log <t>` against `t`.
pub fn exp_rate(
    series: &[(f64, f64)],
    window: [f64; 2],
    detrend_power: f64,
) -> Result<FitResult, FitError> {
    let pts = select(series, window)?;
    let xy: Vec<(f64, f64)> = pts
        .iter()
        .map(|&(t, v)| (t, v.ln() - detrend_power * bracket(t).ln()))
        .collect();
    let (slope, intercept, rms) = least_squares(&xy);
    Ok(FitResult {
        exponent_or_rate: -slope,
        intercept,
        rms_residual: rms,
        window,
        n_points: pts.len(),
    })
}

/// `max_tail S / max_head S` with `S = v <t>^(-exponent)`.
pub fn bound_saturation(
    series: &[(f64, f64)],
    exponent: f64,
    head: [f64; 2],
    tail: [f64; 2],
) -> Result<f64, FitError> {
    let peak = |w: [f64; 2]| -> Result<f64, FitError> {
        Ok(select(series, w)?
            .iter()
            .map(|&(t, v)| v * bracket(t).powf(-exponent))
            .fold(0.0, f64::max))
    };
    Ok(peak(tail)? / peak(head)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    fn sample(lo: f64, hi: f64, n: usize, f: impl Fn(f64) -> f64) -> Vec<(f64, f64)> {
        (0..n)
            .map(|i| {
                let t = lo + (hi - lo) * i as f64 / (n - 1) as f64;
                (t, f(t))
            })
            .collect()
    }

    #[test]
    fn power_law_examples() {
        let s = sample(10.0, 100.0, 20, |t| bracket(t).powf(-1.5));
        let f = power_law_slope(&s, [10.0, 100.0]).unwrap();
        assert_relative_eq!(f.exponent_or_rate, -1.5, epsilon = 1e-10);
        assert_eq!(f.n_points, 20);

        let s = sample(10.0, 100.0, 20, |_| 3.0);
        assert_relative_eq!(
            power_law_slope(&s, [10.0, 100.0]).unwrap().exponent_or_rate,
            0.0,
            epsilon = 1e-12
        );

        let s = sample(10.0, 100.0, 400, |t| bracket(t).sqrt() * (2.0 + t.sin()));
        let f = power_law_slope(&s, [10.0, 100.0]).unwrap();
        assert!(
            (0.4..=0.6).contains(&f.exponent_or_rate),
            "{}",
            f.exponent_or_rate
        );
        assert!(f.rms_residual > 0.0);
    }

    #[test]
    fn exp_rate_examples() {
        let s = sample(0.0, 100.0, 50, |t| (-0.1 * t).exp() * bracket(t).sqrt());
        assert_relative_eq!(
            exp_rate(&s, [0.0, 100.0], 0.5).unwrap().exponent_or_rate,
            0.1,
            epsilon = 1e-10
        );
        let s = sample(0.0, 100.0, 50, |t| bracket(t).sqrt());
        assert_relative_eq!(
            exp_rate(&s, [0.0, 100.0], 0.5).unwrap().exponent_or_rate,
            0.0,
            epsilon = 1e-12
        );
        let s = sample(0.0, 200.0, 2000, |t| {
            (-0.05 * t).exp() * (1.0 + 0.1 * t.sin())
        });
        let r = exp_rate(&s, [0.0, 200.0], 0.0).unwrap().exponent_or_rate;
        assert!((0.045..=0.055).contains(&r), "{r}");
    }

    #[test]
    fn saturation_examples() {
        let s = sample(1.0, 100.0, 991, |t| bracket(t).sqrt());
        assert_relative_eq!(
            bound_saturation(&s, 0.5, [1.0, 10.0], [10.0, 100.0]).unwrap(),
            1.0,
            epsilon = 1e-12
        );
        let s = sample(1.0, 100.0, 991, |t| bracket(t).powf(0.7));
        let r = bound_saturation(&s, 0.5, [1.0, 10.0], [10.0, 100.0]).unwrap();
        assert_relative_eq!(
            r,
            (bracket(100.0) / bracket(10.0)).powf(0.2),
            max_relative = 1e-12
        );
        assert_relative_eq!(r, 1.58, epsilon = 0.01);
        let s = sample(1.0, 100.0, 991, |t| 1.0 / bracket(t));
        assert!(bound_saturation(&s, -0.5, [1.0, 10.0], [10.0, 100.0]).unwrap() < 1.0);
    }

    #[test]
    fn errors() {
        let mut s = sample(10.0, 100.0, 20, |t| t);
        assert!(power_law_slope(&s, [10.0, 12.0]).is_err());
        assert!(power_law_slope(&s, [50.0, 50.0]).is_err());
        s[3].1 = -1.0;
        assert!(matches!(
            power_law_slope(&s, [10.0, 100.0]),
            Err(FitError::NonPositive { .. })
        ));
        s[3].1 = f64::NAN;
        assert!(exp_rate(&s, [10.0, 100.0], 0.0).is_err());
    }

    #[test]
    fn numerical_zeros_are_dropped() {
        let mut s = sample(10.0, 100.0, 30, |t| bracket(t).powf(-1.0));
        s[5].1 = 0.0;
        s[6].1 = 1e-300;
        let f = power_law_slope(&s, [10.0, 100.0]).unwrap();
        assert_eq!(f.n_points, 28);
        assert_relative_eq!(f.exponent_or_rate, -1.0, epsilon = 1e-10);
    }

    proptest! {
        #[test]
        fn fits_are_scale_invariant(a in -3.0f64..1.0, rate in 0.0f64..0.2, scale in 1e-3f64..1e3) {
            let s = sample(10.0, 100.0, 30, |t| bracket(t).powf(a) * (-rate * t).exp() * (1.2 + (0.3 * t).sin()));
            let scaled: Vec<_> = s.iter().map(|&(t, v)| (t, v * scale)).collect();
            let f1 = power_law_slope(&s, [10.0, 100.0]).unwrap();
            let f2 = power_law_slope(&scaled, [10.0, 100.0]).unwrap();
            prop_assert!((f1.exponent_or_rate - f2.exponent_or_rate).abs() < 1e-9);
            let e1 = exp_rate(&s, [10.0, 100.0], 0.5).unwrap();
            let e2 = exp_rate(&scaled, [10.0, 100.0], 0.5).unwrap();
            prop_assert!((e1.exponent_or_rate - e2.exponent_or_rate).abs() < 1e-9);
            prop_assert!((e2.intercept - e1.intercept - scale.ln()).abs() < 1e-9);
        }

        #[test]
        fn planted_rates_are_recovered(a in -3.0f64..1.0, rate in 0.0f64..0.2) {
            let s = sample(10.0, 100.0, 25, |t| bracket(t).powf(a));
            prop_assert!((power_law_slope(&s, [10.0, 100.0]).unwrap().exponent_or_rate - a).abs() < 1e-8);
            let s = sample(10.0, 100.0, 25, |t| (-rate * t).exp() * bracket(t).powf(a));
            prop_assert!((exp_rate(&s, [10.0, 100.0], a).unwrap().exponent_or_rate - rate).abs() < 1e-8);
        }
    }
}
