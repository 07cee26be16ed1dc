//! Long-run variance estimation: Bartlett lag window with the Andrews
//! AR(1) plug-in bandwidth.
//!
//! ```text
//! Sigma = Gamma_0 + sum_{h=1}^{floor(b)} (1 - h/(b+1)) (Gamma_h + Gamma_h'),
//! Gamma_h = (1/T) sum_{t>h} z_t z_{t-h}',
//! ```
//!
//! on the internally demeaned series. Bartlett weights keep the estimate
//! positive semidefinite. The plug-in bandwidth fits an AR(1) per
//! coordinate with equal weights:
//!
//! ```text
//! alpha(1) = sum_i 4 rho_i^2 s_i^4 / ((1-rho_i)^6 (1+rho_i)^2)
//!          / sum_i s_i^4 / (1-rho_i)^4,
//! b = 1.1447 (alpha(1) T)^{1/3}.
//! ```

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// How the Bartlett bandwidth is chosen.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BandwidthRule {
    /// Andrews (AR(1) plug-in, equal coordinate weights).
    AndrewsAr1,
    Fixed(f64),
}

/// Consistent-LRV configuration; the kernel is fixed to Bartlett.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrvConfig {
    pub bandwidth_rule: BandwidthRule,
}

impl Default for LrvConfig {
    fn default() -> Self {
        LrvConfig { bandwidth_rule: BandwidthRule::AndrewsAr1 }
    }
}

impl LrvConfig {
    pub fn validate(&self) -> Result<()> {
        if let BandwidthRule::Fixed(b) = self.bandwidth_rule {
            if !(b >= 0.0) {
                return Err(Error::InvalidConfig(format!("fixed bandwidth must be >= 0, got {b}")));
            }
        }
        Ok(())
    }
}

fn demeaned(series: &DMatrix<f64>) -> DMatrix<f64> {
    let t = series.nrows() as f64;
    let mut out = series.clone();
    for j in 0..out.ncols() {
        let m = out.column(j).sum() / t;
        for i in 0..out.nrows() {
            out[(i, j)] -= m;
        }
    }
    out
}

/// Bartlett lag-window LRV of a `T x d` series (demeaned internally).
pub fn bartlett_lrv(series: &DMatrix<f64>, bandwidth: f64) -> Result<DMatrix<f64>> {
    let t = series.nrows();
    if t < 4 {
        return Err(Error::InsufficientData(format!("LRV estimation needs T >= 4, got {t}")));
    }
    if !(bandwidth >= 0.0) || !bandwidth.is_finite() {
        return Err(Error::InvalidConfig(format!("bandwidth must be finite and >= 0, got {bandwidth}")));
    }
    let z = demeaned(series);
    let d = z.ncols();
    let tf = t as f64;
    let mut sigma = z.transpose() * &z / tf;
    let max_lag = (bandwidth.floor() as usize).min(t - 1);
    for h in 1..=max_lag {
        let w = 1.0 - h as f64 / (bandwidth + 1.0);
        let lead = z.rows(h, t - h);
        let lag = z.rows(0, t - h);
        let gamma = lead.transpose() * lag / tf;
        for a in 0..d {
            for b in 0..d {
                sigma[(a, b)] += w * (gamma[(a, b)] + gamma[(b, a)]);
            }
        }
    }
    Ok(sigma)
}

/// Outcome of the plug-in bandwidth: the bandwidth and the coordinates
/// whose AR(1) fit was clipped.
#[derive(Debug, Clone)]
pub struct AndrewsBandwidth {
    pub bandwidth: f64,
    pub clipped: Vec<usize>,
}

/// Andrews AR(1) plug-in bandwidth for the Bartlett kernel.
pub fn andrews_bandwidth(series: &DMatrix<f64>) -> Result<AndrewsBandwidth> {
    let t = series.nrows();
    if t < 8 {
        return Err(Error::InsufficientData(format!(
            "plug-in bandwidth needs T >= 8, got {t}"
        )));
    }
    let z = demeaned(series);
    let tf = t as f64;
    let mut num = 0.0;
    let mut den = 0.0;
    let mut clipped = Vec::new();
    for j in 0..z.ncols() {
        let col = z.column(j);
        let mut sxx = 0.0;
        let mut sxy = 0.0;
        for i in 1..t {
            sxx += col[i - 1] * col[i - 1];
            sxy += col[i] * col[i - 1];
        }
        // A constant (zero after demeaning) coordinate pins rho at 1; the
        // clip below then routes it through the degenerate path with zero
        // innovation variance, contributing nothing to either sum.
        let mut rho = if sxx > 0.0 { sxy / sxx } else { 1.0 };
        if !rho.is_finite() || rho.abs() >= 0.999 {
            rho = 0.999_f64.copysign(if rho.is_finite() { rho } else { 1.0 });
            clipped.push(j);
        }
        let mut s2 = 0.0;
        for i in 1..t {
            let e = col[i] - rho * col[i - 1];
            s2 += e * e;
        }
        s2 /= tf - 1.0;
        let s4 = s2 * s2;
        num += 4.0 * rho * rho * s4 / ((1.0 - rho).powi(6) * (1.0 + rho).powi(2));
        den += s4 / (1.0 - rho).powi(4);
    }
    let alpha1 = if den > 0.0 { num / den } else { 0.0 };
    let bandwidth = 1.1447 * (alpha1 * tf).cbrt();
    Ok(AndrewsBandwidth { bandwidth, clipped })
}
