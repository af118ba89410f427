//! Least-squares fitting: weighted straight lines, Levenberg–Marquardt for
//! small nonlinear models, and the two-Lorentzian line model.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Result of a weighted straight-line fit `y = intercept + slope·x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LineFit {
    pub slope: f64,
    pub slope_err: f64,
    pub intercept: f64,
    pub intercept_err: f64,
    pub chi2: f64,
}

/// Weighted linear regression with weights `1/σ²`. Parameter errors come
/// from the covariance matrix of the normal equations.
pub fn weighted_line(x: &[f64], y: &[f64], sigma: &[f64]) -> Result<LineFit> {
    if x.len() != y.len() || x.len() != sigma.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), found: y.len().min(sigma.len()) });
    }
    if x.len() < 2 {
        return Err(Error::FitFailed("need at least two points".into()));
    }
    let (mut s, mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&xi, &yi), &si) in x.iter().zip(y).zip(sigma) {
        if !(si > 0.0) || !si.is_finite() || !yi.is_finite() {
            return Err(Error::FitFailed(format!("bad point ({xi}, {yi} ± {si})")));
        }
        let w = 1.0 / (si * si);
        s += w;
        sx += w * xi;
        sy += w * yi;
        sxx += w * xi * xi;
        sxy += w * xi * yi;
    }
    let det = s * sxx - sx * sx;
    if !(det.abs() > 0.0) {
        return Err(Error::FitFailed("degenerate abscissae".into()));
    }
    let slope = (s * sxy - sx * sy) / det;
    let intercept = (sxx * sy - sx * sxy) / det;
    let chi2 = x
        .iter()
        .zip(y)
        .zip(sigma)
        .map(|((&xi, &yi), &si)| ((yi - intercept - slope * xi) / si).powi(2))
        .sum();
    Ok(LineFit { slope, slope_err: (s / det).sqrt(), intercept, intercept_err: (sxx / det).sqrt(), chi2 })
}

#[derive(Clone, Debug, PartialEq)]
pub struct LmFit {
    pub params: Vec<f64>,
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Levenberg–Marquardt minimisation of `Σ r_k(p)²` with a forward-difference
/// Jacobian. Suitable for a handful of parameters.
pub fn levenberg_marquardt<F>(residuals: F, start: &[f64], max_iter: usize) -> Result<LmFit>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let np = start.len();
    let mut p = start.to_vec();
    let mut r = residuals(&p);
    let mut cost: f64 = r.iter().map(|v| v * v).sum();
    if !cost.is_finite() {
        return Err(Error::FitFailed("non-finite residuals at the starting point".into()));
    }
    let mut lambda = 1e-3;
    let mut converged = false;
    let mut iterations = 0;
    for it in 0..max_iter {
        iterations = it + 1;
        let m = r.len();
        let mut jac = DMatrix::<f64>::zeros(m, np);
        for k in 0..np {
            let h = 1e-7 * p[k].abs().max(1e-7);
            let mut q = p.clone();
            q[k] += h;
            let rq = residuals(&q);
            for row in 0..m {
                jac[(row, k)] = (rq[row] - r[row]) / h;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * DVector::from_vec(r.clone());
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for k in 0..np {
                a[(k, k)] += lambda * jtj[(k, k)].max(1e-30);
            }
            let Some(step) = a.lu().solve(&(-&g)) else {
                lambda *= 10.0;
                continue;
            };
            let q: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let rq = residuals(&q);
            let cq: f64 = rq.iter().map(|v| v * v).sum();
            if cq.is_finite() && cq < cost {
                let rel = (cost - cq) / cost.max(1e-300);
                p = q;
                r = rq;
                cost = cq;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel < 1e-12 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !improved || converged {
            converged = true;
            break;
        }
    }
    Ok(LmFit { params: p, cost, iterations, converged })
}

/// `a / (1 + ((x − x0)/(w/2))²)`: unit-normalised peak height `a`, FWHM `w`.
#[inline]
pub fn lorentzian(x: f64, center: f64, fwhm: f64, height: f64) -> f64 {
    let u = 2.0 * (x - center) / fwhm;
    height / (1.0 + u * u)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Peak {
    pub center: f64,
    pub fwhm: f64,
    pub height: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PeakFit {
    /// Peaks ordered by center.
    pub peaks: Vec<Peak>,
    pub converged: bool,
}

impl PeakFit {
    /// Center separation of a two-peak fit, zero for a single peak.
    pub fn separation(&self) -> f64 {
        match self.peaks.as_slice() {
            [a, b] => (b.center - a.center).abs(),
            _ => 0.0,
        }
    }
}

/// Indices of strict local maxima (plateaus count once, at their low end),
/// sorted by decreasing value with ties broken toward lower abscissa.
pub fn local_maxima(y: &[f64]) -> Vec<usize> {
    let n = y.len();
    let mut out = Vec::new();
    let mut k = 0;
    while k < n {
        let mut end = k;
        while end + 1 < n && y[end + 1] == y[k] {
            end += 1;
        }
        let left_ok = k == 0 || y[k - 1] < y[k];
        let right_ok = end + 1 == n || y[end + 1] < y[k];
        if left_ok && right_ok && n > 1 {
            out.push(k);
        }
        k = end + 1;
    }
    out.sort_by(|&a, &b| y[b].total_cmp(&y[a]).then(a.cmp(&b)));
    out
}

/// Fits one or two Lorentzians to `(x, y)`, seeded from the two largest
/// local maxima. A second maximum weaker than `min_rel` of the first is
/// treated as absent and a single peak is fitted.
pub fn fit_lorentzians(x: &[f64], y: &[f64], fwhm_guess: f64, min_rel: f64) -> Result<PeakFit> {
    if x.len() != y.len() || x.len() < 4 {
        return Err(Error::FitFailed("need at least four samples".into()));
    }
    // seeds come from a boxcar-smoothed copy so shot noise cannot split a peak
    let dx = (x[x.len() - 1] - x[0]).abs() / (x.len() - 1) as f64;
    let half = ((0.25 * fwhm_guess / dx).round() as usize).min(x.len() / 8);
    let smooth: Vec<f64> = (0..y.len())
        .map(|k| {
            let (a, b) = (k.saturating_sub(half), (k + half).min(y.len() - 1));
            y[a..=b].iter().sum::<f64>() / (b - a + 1) as f64
        })
        .collect();
    let maxima = local_maxima(&smooth);
    let Some(&first) = maxima.first() else {
        return Err(Error::FitFailed("no local maximum".into()));
    };
    let (lo, hi) = (x[0].min(x[x.len() - 1]), x[0].max(x[x.len() - 1]));
    // second-peak candidates in order of height, at least one linewidth away
    let mut candidates: Vec<Option<usize>> = maxima[1..]
        .iter()
        .filter(|&&m| smooth[m] >= min_rel * smooth[first] && (x[m] - x[first]).abs() >= fwhm_guess)
        .take(3)
        .map(|&m| Some(m))
        .collect();
    candidates.push(None);
    let mut last_err = None;
    for second in candidates {
        match fit_seeded(x, y, &smooth, fwhm_guess, first, second, (lo, hi)) {
            Ok(fit) => return Ok(fit),
            Err(e) => last_err = Some(e),
        }
    }
    Err(last_err.expect("at least one attempt"))
}

fn fit_seeded(
    x: &[f64],
    y: &[f64],
    smooth: &[f64],
    fwhm_guess: f64,
    first: usize,
    second: Option<usize>,
    (lo, hi): (f64, f64),
) -> Result<PeakFit> {
    let mut start = Vec::new();
    for s in std::iter::once(first).chain(second) {
        start.extend_from_slice(&[x[s], fwhm_guess, smooth[s]]);
    }
    let model = |p: &[f64], xv: f64| p.chunks(3).map(|c| lorentzian(xv, c[0], c[1].abs(), c[2])).sum::<f64>();
    let fit = levenberg_marquardt(|p| x.iter().zip(y).map(|(&xv, &yv)| model(p, xv) - yv).collect(), &start, 200)?;
    let mut peaks: Vec<Peak> = fit
        .params
        .chunks(3)
        .map(|c| Peak { center: c[0], fwhm: c[1].abs(), height: c[2] })
        .collect();
    if peaks.iter().any(|p| !p.center.is_finite() || !p.fwhm.is_finite()) {
        return Err(Error::FitFailed("non-finite peak parameters".into()));
    }
    if peaks.iter().any(|p| p.center < lo || p.center > hi || p.fwhm > hi - lo || p.height <= 0.0) {
        return Err(Error::FitFailed("peak outside the scanned window".into()));
    }
    peaks.sort_by(|a, b| a.center.total_cmp(&b.center));
    Ok(PeakFit { peaks, converged: fit.converged })
}

/// One-parameter least squares: minimises `Σ (model(s, x_k) − y_k)²` over
/// `s` by golden-section search on `[lo, hi]` followed by Newton polishing.
pub fn fit_scale<F>(model: F, x: &[f64], y: &[f64], lo: f64, hi: f64) -> Result<f64>
where
    F: Fn(f64, f64) -> f64,
{
    let cost = |s: f64| x.iter().zip(y).map(|(&xv, &yv)| (model(s, xv) - yv).powi(2)).sum::<f64>();
    // coarse scan guards against the oscillatory model's local minima
    let n = 400;
    let mut best = lo;
    let mut best_c = f64::INFINITY;
    for k in 0..=n {
        let s = lo + (hi - lo) * k as f64 / n as f64;
        let c = cost(s);
        if c < best_c {
            best_c = c;
            best = s;
        }
    }
    let h = (hi - lo) / n as f64;
    let (mut a, mut b) = ((best - h).max(lo), (best + h).min(hi));
    let gr = 0.5 * (5f64.sqrt() - 1.0);
    for _ in 0..200 {
        let c = b - gr * (b - a);
        let d = a + gr * (b - a);
        if cost(c) < cost(d) {
            b = d;
        } else {
            a = c;
        }
        if (b - a).abs() < 1e-15 * (a.abs() + b.abs()).max(1e-300) {
            break;
        }
    }
    let s = 0.5 * (a + b);
    if !s.is_finite() {
        return Err(Error::FitFailed("scale fit diverged".into()));
    }
    Ok(s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn line_fit_recovers_exact_line() {
        let x: Vec<f64> = (0..10).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 3.0 - 2.0 * v).collect();
        let f = weighted_line(&x, &y, &vec![0.1; 10]).unwrap();
        assert!((f.slope + 2.0).abs() < 1e-12 && (f.intercept - 3.0).abs() < 1e-12);
        assert!(f.chi2 < 1e-20);
    }

    #[test]
    fn line_fit_slope_error_matches_closed_form() {
        // equal weights: σ_slope = σ / sqrt(Σ(x - x̄)²)
        let x = [0.0, 1.0, 2.0, 3.0];
        let f = weighted_line(&x, &[0.0, 1.1, 1.9, 3.0], &[0.5; 4]).unwrap();
        assert!((f.slope_err - 0.5 / 5f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn line_fit_rejects_degenerate_input() {
        assert!(weighted_line(&[1.0, 1.0], &[0.0, 1.0], &[1.0, 1.0]).is_err());
        assert!(weighted_line(&[1.0], &[0.0], &[1.0]).is_err());
        assert!(weighted_line(&[0.0, 1.0], &[0.0, 1.0], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn lm_fits_exponential() {
        let x: Vec<f64> = (0..30).map(|k| k as f64 * 0.1).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * (-1.3 * v).exp()).collect();
        let f = levenberg_marquardt(|p| x.iter().zip(&y).map(|(xv, yv)| p[0] * (-p[1] * xv).exp() - yv).collect(), &[1.0, 0.5], 200)
            .unwrap();
        assert!((f.params[0] - 2.0).abs() < 1e-6 && (f.params[1] - 1.3).abs() < 1e-6);
    }

    #[test]
    fn two_lorentzians_are_resolved() {
        let x: Vec<f64> = (0..401).map(|k| -20.0 + 0.1 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| lorentzian(v, -4.0, 2.0, 0.5) + lorentzian(v, 5.0, 2.0, 0.4)).collect();
        let f = fit_lorentzians(&x, &y, 1.5, 0.01).unwrap();
        assert_eq!(f.peaks.len(), 2);
        assert!((f.separation() - 9.0).abs() < 1e-6, "separation {}", f.separation());
    }

    #[test]
    fn single_peak_gives_zero_separation() {
        let x: Vec<f64> = (0..201).map(|k| -10.0 + 0.1 * k as f64).collect();
        let y: Vec<f64> = x.iter().map(|&v| lorentzian(v, 1.0, 2.0, 1.0)).collect();
        let f = fit_lorentzians(&x, &y, 1.0, 0.01).unwrap();
        assert_eq!(f.peaks.len(), 1);
        assert_eq!(f.separation(), 0.0);
        assert!((f.peaks[0].center - 1.0).abs() < 1e-8);
    }

    #[test]
    fn maxima_ties_prefer_lower_abscissa() {
        let y = [0.0, 1.0, 0.0, 1.0, 0.0, 0.5, 0.0];
        assert_eq!(local_maxima(&y), vec![1, 3, 5]);
    }

    #[test]
    fn scale_fit_recovers_slope() {
        let x: Vec<f64> = (0..20).map(|k| k as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| (0.37 * v).sin().abs()).collect();
        let s = fit_scale(|s, xv| (s * xv).sin().abs(), &x, &y, 0.0, 1.0).unwrap();
        assert!((s - 0.37).abs() < 1e-9);
    }
}
