//! Late-time analysis: the conformal factor f of the limiting sub-Riemannian metric,
//! the limit of Q it predicts, the constancy verdict, and exponential rate fits.

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::flow::rho_mean;
use crate::geometry::{central_differences, orbit_integral, theta_grid, weight_unchecked, RadialProfile};

/// Snapshots earlier than this are still in the initial layer and are not used.
pub const EXTRACTION_T_MIN: f64 = 10.0;

#[derive(Debug, Clone, PartialEq)]
pub struct ConformalFactor {
    pub n: usize,
    pub theta: Vec<f64>,
    pub f: Vec<f64>,
    pub t_extracted: f64,
    /// Max-norm distance to the factor extracted from the snapshot nearest t/2.
    pub cauchy_residual: f64,
}

impl ConformalFactor {
    /// Zero-mean factor from explicit values, with no extraction history.
    pub fn from_values(n: usize, f: Vec<f64>) -> Result<Self> {
        if n < 2 || f.len() < 3 {
            return Err(invalid("conformal factor needs n >= 2 and at least 3 nodes"));
        }
        Ok(Self { n, theta: theta_grid(f.len()), f, t_extracted: f64::NAN, cauchy_residual: f64::NAN })
    }

    pub fn range(&self) -> f64 {
        let (lo, hi) = self.f.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)));
        hi - lo
    }
}

fn centred(profile: &RadialProfile) -> Vec<f64> {
    let mean = rho_mean(profile);
    profile.rho().iter().map(|r| r - mean).collect()
}

/// f = ρ(T) minus its orbit-weighted mean, T the last snapshot time.
pub fn extract_conformal_factor(snapshots: &[(f64, RadialProfile)]) -> Result<ConformalFactor> {
    let usable: Vec<&(f64, RadialProfile)> = snapshots.iter().filter(|(t, _)| *t >= EXTRACTION_T_MIN).collect();
    if usable.len() < 2 {
        return Err(invalid(format!(
            "need at least two snapshots at t >= {EXTRACTION_T_MIN}, got {}",
            usable.len()
        )));
    }
    let (t_end, last) = usable[usable.len() - 1];
    let (_, half) = usable[..usable.len() - 1]
        .iter()
        .min_by(|a, b| (a.0 - t_end / 2.0).abs().total_cmp(&(b.0 - t_end / 2.0).abs()))
        .expect("at least one earlier snapshot");
    if half.len() != last.len() || half.n() != last.n() {
        return Err(invalid("snapshots live on different grids"));
    }
    let f = centred(last);
    let cauchy_residual = f.iter().zip(centred(half)).fold(0.0, |m: f64, (a, b)| m.max((a - b).abs()));
    Ok(ConformalFactor { n: last.n(), theta: last.theta().to_vec(), f, t_extracted: *t_end, cauchy_residual })
}

/// Predicted limit of Q for the radial graphs τ + f:
/// (∫ e^{(4n+2)f})^{-1+1/(2n+1)} ∫ e^{(4n+2)f} (u Δu - (2n+1)|∇u|²), u = e^{-f}.
pub fn limit_q(cf: &ConformalFactor) -> f64 {
    let n = cf.n;
    let m = 2.0 * n as f64 + 1.0;
    let d = cf.theta[1] - cf.theta[0];
    let u: Vec<f64> = cf.f.iter().map(|f| (-f).exp()).collect();
    let (u_t, u_tt) = central_differences(&u, d);
    let weight: Vec<f64> = cf.f.iter().map(|f| (2.0 * m * f).exp()).collect();
    let integrand: Vec<f64> = (0..u.len())
        .map(|k| {
            let laplacian = u_tt[k] + weight_unchecked(n, cf.theta[k]) * u_t[k];
            weight[k] * (u[k] * laplacian - m * u_t[k] * u_t[k])
        })
        .collect();
    orbit_integral(&weight, n).powf(-1.0 + 1.0 / m) * orbit_integral(&integrand, n)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Verdict {
    Constant,
    NonConstant,
}

impl std::fmt::Display for Verdict {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Verdict::Constant => "CONSTANT",
            Verdict::NonConstant => "NON_CONSTANT",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerdictRecord {
    pub verdict: Verdict,
    pub f_range: f64,
    pub limit_q: f64,
    /// Non-constant f whose predicted limit of Q is nonzero: the limiting qc structure
    /// does not have constant qc-scalar curvature.
    pub certified_non_constant: bool,
}

pub fn constancy_verdict(cf: &ConformalFactor, tol: f64) -> Result<VerdictRecord> {
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    let f_range = cf.range();
    let limit_q = limit_q(cf);
    let verdict = if f_range < tol { Verdict::Constant } else { Verdict::NonConstant };
    Ok(VerdictRecord {
        verdict,
        f_range,
        limit_q,
        certified_non_constant: verdict == Verdict::NonConstant && limit_q.abs() > tol,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    pub rate: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

pub const MIN_FIT_POINTS: usize = 10;

/// Least-squares line through (t, ln y) over the points with t ≥ t_min.
pub fn fit_decay_rate(series: &[(f64, f64)], t_min: f64) -> Result<DecayFit> {
    if let Some((t, y)) = series.iter().find(|(_, y)| !(*y > 0.0)) {
        return Err(invalid(format!("decay series must be positive, got y = {y} at t = {t}")));
    }
    let pts: Vec<(f64, f64)> = series.iter().filter(|(t, _)| *t >= t_min).map(|(t, y)| (*t, y.ln())).collect();
    if pts.len() < MIN_FIT_POINTS {
        return Err(invalid(format!("need at least {MIN_FIT_POINTS} points with t >= {t_min}, got {}", pts.len())));
    }
    let m = pts.len() as f64;
    let (mt, my) = pts.iter().fold((0.0, 0.0), |(a, b), (t, y)| (a + t / m, b + y / m));
    let (sxx, sxy, syy) = pts.iter().fold((0.0, 0.0, 0.0), |(xx, xy, yy), (t, y)| {
        (xx + (t - mt).powi(2), xy + (t - mt) * (y - my), yy + (y - my).powi(2))
    });
    if sxx == 0.0 {
        return Err(invalid("decay fit needs distinct times"));
    }
    let rate = sxy / sxx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(DecayFit { rate, intercept: my - rate * mt, r_squared })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayRates {
    pub grad_phi: Option<f64>,
    #[serde(rename = "H")]
    pub h: Option<f64>,
}

/// The limit-analysis report written next to the run outputs.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub n: usize,
    pub grid_size: usize,
    pub t_end: f64,
    pub f_range: f64,
    #[serde(rename = "limit_Q")]
    pub limit_q: f64,
    #[serde(rename = "Q_final")]
    pub q_final: f64,
    pub verdict: Verdict,
    pub decay_rates: DecayRates,
    pub cauchy_residual: f64,
}
