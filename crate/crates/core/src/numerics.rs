//! Small numerical helpers shared by the simulation modules: RK4 stepping,
//! adaptive quadrature, bracketing root search and least-squares fits.

use std::ops::{Add, Mul};

use crate::error::{Error, Result};

/// One classical RK4 step for `y' = f(y)` on a flat state vector.
pub fn rk4_step<T, F>(y: &mut [T], dt: f64, mut f: F)
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
    F: FnMut(&[T], &mut [T]),
{
    let n = y.len();
    let mut k1 = y.to_vec();
    let mut k2 = y.to_vec();
    let mut k3 = y.to_vec();
    let mut k4 = y.to_vec();
    let mut tmp = y.to_vec();
    f(y, &mut k1);
    for i in 0..n {
        tmp[i] = y[i] + k1[i] * (0.5 * dt);
    }
    f(&tmp, &mut k2);
    for i in 0..n {
        tmp[i] = y[i] + k2[i] * (0.5 * dt);
    }
    f(&tmp, &mut k3);
    for i in 0..n {
        tmp[i] = y[i] + k3[i] * dt;
    }
    f(&tmp, &mut k4);
    for i in 0..n {
        y[i] = y[i] + (k1[i] + k2[i] * 2.0 + k3[i] * 2.0 + k4[i]) * (dt / 6.0);
    }
}

/// Adaptive Simpson quadrature of `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<f64> {
    // Pre-split so oscillatory integrands are not under-resolved by the first estimate.
    const PIECES: usize = 64;
    let h = (b - a) / PIECES as f64;
    let mut total = 0.0;
    for i in 0..PIECES {
        let lo = a + i as f64 * h;
        let hi = lo + h;
        let (flo, fmid, fhi) = (f(lo), f(0.5 * (lo + hi)), f(hi));
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        total += simpson_rec(&f, lo, hi, flo, fmid, fhi, whole, tol / PIECES as f64, 48)?;
    }
    Ok(total)
}

#[allow(clippy::too_many_arguments)]
fn simpson_rec<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> Result<f64> {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    // Intervals a few ulps wide cannot be refined further.
    if delta.abs() <= 15.0 * tol || (b - a) <= 64.0 * f64::EPSILON * a.abs().max(b.abs()) {
        return Ok(left + right + delta / 15.0);
    }
    if depth == 0 {
        return Err(Error::Numerical(format!(
            "quadrature did not converge on [{a}, {b}] (residual {delta:e})"
        )));
    }
    Ok(
        simpson_rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)?
            + simpson_rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)?,
    )
}

/// Bisection on a sign-changing bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::Numerical(format!(
            "root not bracketed in [{lo}, {hi}]"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 || (hi - lo) < tol {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

/// Golden-section minimisation of a unimodal function on `[a, b]`.
pub fn golden_min<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while (b - a).abs() > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Ordinary least squares `y = intercept + slope * x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (my - slope * mx, slope)
}

/// Least squares slope of `y = slope * x`.
pub fn slope_through_origin(x: &[f64], y: &[f64]) -> f64 {
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    sxy / sxx
}

#[derive(Debug, Clone, Copy)]
pub struct SinusoidFit {
    pub omega: f64,
    pub offset: f64,
    /// Half peak-to-peak amplitude.
    pub amplitude: f64,
    pub phase: f64,
    pub rss: f64,
}

fn sinusoid_linear(t: &[f64], y: &[f64], omega: f64) -> SinusoidFit {
    // Normal equations for y ~ c0 + c1 cos(wt) + c2 sin(wt).
    let mut m = nalgebra::Matrix3::<f64>::zeros();
    let mut r = nalgebra::Vector3::<f64>::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let (s, c) = (omega * ti).sin_cos();
        let basis = nalgebra::Vector3::new(1.0, c, s);
        m += basis * basis.transpose();
        r += basis * yi;
    }
    let coef = m.lu().solve(&r).unwrap_or_else(nalgebra::Vector3::zeros);
    let rss = t
        .iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let (s, c) = (omega * ti).sin_cos();
            let e = yi - (coef[0] + coef[1] * c + coef[2] * s);
            e * e
        })
        .sum();
    SinusoidFit {
        omega,
        offset: coef[0],
        amplitude: coef[1].hypot(coef[2]),
        phase: (-coef[2]).atan2(coef[1]),
        rss,
    }
}

/// Fits `offset + amplitude * cos(omega t + phase)` with `omega` searched in `[lo, hi]`.
pub fn fit_sinusoid(t: &[f64], y: &[f64], lo: f64, hi: f64) -> SinusoidFit {
    const GRID: usize = 400;
    let mut best = sinusoid_linear(t, y, lo);
    let mut best_w = lo;
    for i in 1..=GRID {
        let w = lo + (hi - lo) * i as f64 / GRID as f64;
        let fit = sinusoid_linear(t, y, w);
        if fit.rss < best.rss {
            best = fit;
            best_w = w;
        }
    }
    let step = (hi - lo) / GRID as f64;
    let w = golden_min(
        |w| sinusoid_linear(t, y, w).rss,
        (best_w - step).max(lo),
        (best_w + step).min(hi),
        step * 1e-9,
    );
    sinusoid_linear(t, y, w)
}

/// Indices of strict interior local maxima.
pub fn local_maxima(y: &[f64]) -> Vec<usize> {
    (1..y.len().saturating_sub(1))
        .filter(|&i| y[i] > y[i - 1] && y[i] >= y[i + 1])
        .collect()
}
