use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::datamodel::EisSpectrum;

use super::error::AnalyticsError;

pub const DEFAULT_LAMBDA: f64 = 1e-3;
pub const DEFAULT_TAU_POINTS: usize = 60;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrtResult {
    pub tau_grid: Vec<f64>,
    /// mΩ per unit ln τ, elementwise nonnegative.
    pub gamma: Vec<f64>,
    pub r_inf: f64,
    pub lambda: f64,
    /// Euclidean norm of the impedance residual, excluding the penalty.
    pub residual_norm: f64,
}

impl DrtResult {
    /// Σ γ_k Δln τ_k, the total polarization resistance.
    pub fn polarization(&self) -> f64 {
        self.gamma.iter().zip(log_widths(&self.tau_grid)).map(|(g, w)| g * w).sum()
    }
}

/// Log-spaced τ grid covering the spectrum's time constants with one extra
/// decade on each side.
pub fn default_tau_grid(frequencies: &[f64], points: usize) -> Vec<f64> {
    let f_max = frequencies.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let f_min = frequencies.iter().cloned().fold(f64::INFINITY, f64::min);
    let lo = (1.0 / (2.0 * PI * f_max)).log10() - 1.0;
    let hi = (1.0 / (2.0 * PI * f_min)).log10() + 1.0;
    (0..points).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (points - 1) as f64)).collect()
}

fn log_widths(tau: &[f64]) -> Vec<f64> {
    let l: Vec<f64> = tau.iter().map(|t| t.ln()).collect();
    let k = l.len();
    (0..k)
        .map(|i| match i {
            0 => l[1] - l[0],
            i if i == k - 1 => l[k - 1] - l[k - 2],
            i => 0.5 * (l[i + 1] - l[i - 1]),
        })
        .collect()
}

/// Tikhonov-regularized nonnegative DRT fit with a second-difference penalty.
pub fn drt(spectrum: &EisSpectrum, tau_grid: &[f64], lambda: f64) -> Result<DrtResult, AnalyticsError> {
    let im = spectrum.im().ok_or(AnalyticsError::MissingImaginary)?;
    drt_fit(spectrum.grid().as_slice(), spectrum.re(), im, tau_grid, lambda)
}

pub fn drt_fit(freqs: &[f64], re: &[f64], im: &[f64], tau: &[f64], lambda: f64) -> Result<DrtResult, AnalyticsError> {
    if tau.len() < 3 || tau.iter().any(|t| !(*t > 0.0 && t.is_finite())) || tau.windows(2).any(|w| w[1] <= w[0]) {
        return Err(AnalyticsError::InvalidTauGrid);
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(AnalyticsError::InvalidLambda(lambda));
    }
    let k = tau.len();
    let widths = log_widths(tau);
    // design matrix rows: real parts then imaginary parts; column 0 is R_inf
    let n = 1 + k;
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(2 * freqs.len());
    for ((&f, &r), &x) in freqs.iter().zip(re).zip(im) {
        let w = 2.0 * PI * f;
        let mut a_re = vec![0.0; n];
        let mut a_im = vec![0.0; n];
        a_re[0] = 1.0;
        for j in 0..k {
            let wt = w * tau[j];
            let d = 1.0 + wt * wt;
            a_re[1 + j] = widths[j] / d;
            a_im[1 + j] = -widths[j] * wt / d;
        }
        rows.push((a_re, r));
        rows.push((a_im, x));
    }

    let mut h = vec![vec![0.0; n]; n];
    let mut g = vec![0.0; n];
    for (a, b) in &rows {
        for i in 0..n {
            g[i] += a[i] * b;
            for j in 0..n {
                h[i][j] += a[i] * a[j];
            }
        }
    }
    // λ DᵀD on the γ block
    for r in 0..k.saturating_sub(2) {
        let idx = [1 + r, 2 + r, 3 + r];
        let coef = [1.0, -2.0, 1.0];
        for a in 0..3 {
            for b in 0..3 {
                h[idx[a]][idx[b]] += lambda * coef[a] * coef[b];
            }
        }
    }

    let x = nnls_normal(&h, &g)?;
    let residual_norm = rows
        .iter()
        .map(|(a, b)| {
            let fit: f64 = a.iter().zip(&x).map(|(p, q)| p * q).sum();
            (fit - b).powi(2)
        })
        .sum::<f64>()
        .sqrt();
    Ok(DrtResult { tau_grid: tau.to_vec(), gamma: x[1..].to_vec(), r_inf: x[0], lambda, residual_norm })
}

/// Minimise ½xᵀHx − gᵀx subject to x ≥ 0 (active-set method of Lawson and
/// Hanson applied to the normal equations).
fn nnls_normal(h: &[Vec<f64>], g: &[f64]) -> Result<Vec<f64>, AnalyticsError> {
    let n = g.len();
    let scale = h.iter().enumerate().map(|(i, r)| r[i]).fold(0.0, f64::max).max(1e-300);
    let tol = 1e-12 * scale * g.iter().map(|v| v.abs()).fold(1.0, f64::max);
    let mut x = vec![0.0; n];
    let mut passive = vec![false; n];
    let gradient = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| g[i] - h[i].iter().zip(x).map(|(a, b)| a * b).sum::<f64>()).collect() };

    for _ in 0..(3 * n + 10) {
        let w = gradient(&x);
        let candidate = (0..n).filter(|&i| !passive[i] && w[i] > tol).max_by(|&a, &b| w[a].total_cmp(&w[b]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let p: Vec<usize> = (0..n).filter(|&i| passive[i]).collect();
            let z = solve_subset(h, g, &p)?;
            if z.iter().all(|&v| v > 0.0) {
                for (&i, &v) in p.iter().zip(&z) {
                    x[i] = v;
                }
                break;
            }
            // step back toward the feasible region
            let mut alpha = f64::INFINITY;
            for (&i, &v) in p.iter().zip(&z) {
                if v <= 0.0 {
                    alpha = alpha.min(x[i] / (x[i] - v));
                }
            }
            for (&i, &v) in p.iter().zip(&z) {
                x[i] += alpha * (v - x[i]);
                if x[i] <= 1e-15 * scale.sqrt() {
                    x[i] = 0.0;
                    passive[i] = false;
                }
            }
            if !passive.iter().any(|&b| b) {
                break;
            }
        }
    }
    Ok(x)
}

/// Solve H[p,p] z = g[p] by Cholesky.
fn solve_subset(h: &[Vec<f64>], g: &[f64], p: &[usize]) -> Result<Vec<f64>, AnalyticsError> {
    let m = p.len();
    let mut l = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..=i {
            let s = h[p[i]][p[j]] - (0..j).map(|q| l[i][q] * l[j][q]).sum::<f64>();
            if i == j {
                if s <= 0.0 {
                    return Err(AnalyticsError::SingularSystem);
                }
                l[i][i] = s.sqrt();
            } else {
                l[i][j] = s / l[j][j];
            }
        }
    }
    let mut y = vec![0.0; m];
    for i in 0..m {
        let s: f64 = (0..i).map(|q| l[i][q] * y[q]).sum();
        y[i] = (g[p[i]] - s) / l[i][i];
    }
    let mut z = vec![0.0; m];
    for i in (0..m).rev() {
        let s: f64 = (i + 1..m).map(|q| l[q][i] * z[q]).sum();
        z[i] = (y[i] - s) / l[i][i];
    }
    Ok(z)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn log_freqs(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n).map(|i| 10f64.powf(lo + (hi - lo) * i as f64 / (n - 1) as f64)).collect()
    }

    fn rc_spectrum(freqs: &[f64], r0: f64, elements: &[(f64, f64)]) -> (Vec<f64>, Vec<f64>) {
        freqs
            .iter()
            .map(|&f| {
                let w = 2.0 * PI * f;
                elements.iter().fold((r0, 0.0), |(re, im), &(r, t)| {
                    let d = 1.0 + (w * t).powi(2);
                    (re + r / d, im - r * w * t / d)
                })
            })
            .unzip()
    }

    #[test]
    fn single_rc() {
        let freqs = log_freqs(-1.0, 3.0, 16);
        let (re, im) = rc_spectrum(&freqs, 5.0, &[(10.0, 0.1)]);
        let tau = default_tau_grid(&freqs, DEFAULT_TAU_POINTS);
        let r = drt_fit(&freqs, &re, &im, &tau, DEFAULT_LAMBDA).unwrap();
        let peak = (0..tau.len()).max_by(|&a, &b| r.gamma[a].total_cmp(&r.gamma[b])).unwrap();
        let cell = tau[1].ln() - tau[0].ln();
        assert!((tau[peak].ln() - 0.1f64.ln()).abs() <= cell);
        assert!((r.polarization() - 10.0).abs() < 0.5);
        assert!(r.gamma.iter().all(|&g| g >= 0.0));
    }

    #[test]
    fn pure_resistor() {
        let freqs = log_freqs(0.0, 3.0, 16);
        let re = vec![7.0; 16];
        let im = vec![0.0; 16];
        let r = drt_fit(&freqs, &re, &im, &default_tau_grid(&freqs, 60), DEFAULT_LAMBDA).unwrap();
        assert!((r.r_inf - 7.0).abs() < 0.07);
        assert!(r.gamma.iter().cloned().fold(0.0, f64::max) < 0.07);
    }

    #[test]
    fn two_rc_peaks() {
        let freqs = log_freqs(-2.0, 3.0, 40);
        let (re, im) = rc_spectrum(&freqs, 3.0, &[(4.0, 0.01), (6.0, 1.0)]);
        let tau = default_tau_grid(&freqs, 60);
        let r = drt_fit(&freqs, &re, &im, &tau, DEFAULT_LAMBDA).unwrap();
        let widths = log_widths(&tau);
        let split = (0.01f64.ln() + 1f64.ln()) / 2.0;
        let (mut low, mut high) = (0.0, 0.0);
        for j in 0..tau.len() {
            if tau[j].ln() < split {
                low += r.gamma[j] * widths[j];
            } else {
                high += r.gamma[j] * widths[j];
            }
        }
        assert!((low - 4.0).abs() < 0.4, "low {low}");
        assert!((high - 6.0).abs() < 0.6, "high {high}");
        // the valley between the peaks is well below both
        let at = |t: f64| r.gamma[(0..tau.len()).min_by(|&a, &b| (tau[a].ln() - t.ln()).abs().total_cmp(&(tau[b].ln() - t.ln()).abs())).unwrap()];
        assert!(at(0.1) < 0.5 * at(0.01).min(at(1.0)));
    }

    #[test]
    fn residual_shrinks_with_lambda() {
        let freqs = log_freqs(-1.0, 3.0, 20);
        let (re, im) = rc_spectrum(&freqs, 2.0, &[(3.0, 0.003), (1.0, 0.2)]);
        let re: Vec<f64> = re.iter().enumerate().map(|(i, v)| v * (1.0 + 0.01 * ((i * 7 % 5) as f64 - 2.0))).collect();
        let tau = default_tau_grid(&freqs, 40);
        let mut prev = f64::INFINITY;
        for lambda in [10.0, 1.0, 0.1, 1e-2, 1e-3] {
            let r = drt_fit(&freqs, &re, &im, &tau, lambda).unwrap();
            assert!(r.residual_norm <= prev * (1.0 + 1e-9) + 1e-12);
            assert!(r.gamma.iter().all(|&g| g >= 0.0));
            prev = r.residual_norm;
        }
    }

    #[test]
    fn errors() {
        assert_eq!(drt_fit(&[1.0], &[1.0], &[0.0], &[1.0, 0.5, 2.0], 0.0), Err(AnalyticsError::InvalidTauGrid));
        assert_eq!(drt_fit(&[1.0], &[1.0], &[0.0], &[0.1, 0.5, 2.0], -1.0), Err(AnalyticsError::InvalidLambda(-1.0)));
    }
}
