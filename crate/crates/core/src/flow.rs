//! Inverse mean curvature flow of radial profiles: the exact ODE for geodesic
//! spheres, and an explicit method-of-lines scheme ∂ρ/∂t = v/H for θ-dependent
//! profiles with Heun (RK2) stepping under a parabolic stability limit.

use std::io::Write;

use crate::error::{invalid, Error, Result};
use crate::geometry::{
    a_norm_sq, area_element, mean_curvatures, orbit_integral, q_with, sphere_volume, volume_exponent,
    volume_with, ProfileDerivatives, RadialProfile,
};

/// Smallest time step accepted before the run is declared stiff.
pub const MIN_DT: f64 = 1e-12;

/// Times closer than this are treated as equal when landing on output times.
const TIME_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct FlowState {
    pub t: f64,
    pub profile: RadialProfile,
    pub step_count: usize,
    pub last_dt: f64,
}

impl FlowState {
    pub fn new(profile: RadialProfile) -> Self {
        Self { t: 0.0, profile, step_count: 0, last_dt: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub cfl_safety: f64,
    pub dt_max: f64,
    pub t_end: f64,
}

impl StepControl {
    pub const DEFAULT_CFL_SAFETY: f64 = 0.4;
    pub const DEFAULT_DT_MAX: f64 = 0.01;

    pub fn new(t_end: f64) -> Self {
        Self { cfl_safety: Self::DEFAULT_CFL_SAFETY, dt_max: Self::DEFAULT_DT_MAX, t_end }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(invalid(format!("cfl_safety must lie in (0, 1], got {}", self.cfl_safety)));
        }
        if !(self.dt_max > 0.0) {
            return Err(invalid(format!("dt_max must be positive, got {}", self.dt_max)));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(invalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        Ok(())
    }
}

/// dρ/dt = sinh ρ cosh ρ / ((4n-1)cosh²ρ + 3 sinh²ρ) for the geodesic sphere of radius ρ.
pub fn sphere_ode_rhs(n: usize, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(invalid(format!("radius must be positive, got {rho}")));
    }
    let (s, c) = (rho.sinh(), rho.cosh());
    let nf = n as f64;
    Ok(s * c / ((4.0 * nf - 1.0) * c * c + 3.0 * s * s))
}

/// Classical RK4 trajectory (t, ρ) of the sphere ODE; the last step is shortened to end at t_end.
pub fn integrate_sphere_ode(n: usize, rho0: f64, t_end: f64, dt: f64) -> Result<Vec<(f64, f64)>> {
    if !(rho0 > 0.0) || !(dt > 0.0) || !(t_end >= 0.0) {
        return Err(invalid(format!("need rho0 > 0, dt > 0, t_end >= 0; got {rho0}, {dt}, {t_end}")));
    }
    let f = |r: f64| sphere_ode_rhs(n, r);
    let steps = (t_end / dt).ceil() as usize;
    let mut out = Vec::with_capacity(steps + 1);
    let (mut t, mut r) = (0.0, rho0);
    out.push((t, r));
    for k in 1..=steps {
        let t_next = (k as f64 * dt).min(t_end);
        let h = t_next - t;
        let k1 = f(r)?;
        let k2 = f(r + 0.5 * h * k1)?;
        let k3 = f(r + 0.5 * h * k2)?;
        let k4 = f(r + h * k3)?;
        r += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t = t_next;
        out.push((t, r));
    }
    Ok(out)
}

/// Drift ρ - t/(2(2n+1)) from the asymptote of the sphere solution.
pub fn drift(n: usize, t: f64, rho: f64) -> f64 {
    rho - t / (2.0 * (2.0 * n as f64 + 1.0))
}

/// Geometric data the right-hand side and the stability limit share.
struct Evaluation {
    derivs: ProfileDerivatives,
    h: Vec<f64>,
    rhs: Vec<f64>,
}

fn evaluate(profile: &RadialProfile, t: f64) -> Result<Evaluation> {
    let derivs = ProfileDerivatives::compute(profile);
    let h = mean_curvatures(profile, &derivs);
    if let Some(k) = (0..h.len()).find(|&k| !(h[k] > 0.0)) {
        return Err(Error::MeanConvexityLost { node: k, theta: profile.theta()[k], t, h: h[k] });
    }
    let rhs = h.iter().zip(&derivs.v).map(|(h, v)| v / h).collect();
    Ok(Evaluation { derivs, h, rhs })
}

/// ∂ρ/∂t = v/H at every node.
pub fn pde_rhs(state: &FlowState) -> Result<Vec<f64>> {
    Ok(evaluate(&state.profile, state.t)?.rhs)
}

/// Largest stable Heun step for the linearisation of v/H in ρ: each row has diffusion
/// D = 1/(H² sinh²ρ v²) = ∂(v/H)/∂ρ'' and advection b = D v² w, with the reflected
/// ghosts folded into the end rows. The Gershgorin radius G bounds the spectrum and
/// Heun is stable on the negative axis for |λ|dt ≤ 2.
fn stable_dt(profile: &RadialProfile, eval: &Evaluation, cfl_safety: f64) -> f64 {
    let d = profile.d_theta();
    let last = profile.len() - 1;
    let mut g_max: f64 = 0.0;
    for k in 0..=last {
        let s = profile.rho()[k].sinh();
        let v2 = eval.derivs.v[k].powi(2);
        let diff = 1.0 / (eval.h[k] * eval.h[k] * s * s * v2);
        let adv = diff * v2 * eval.derivs.w[k];
        let mut lower = diff / (d * d) - adv / (2.0 * d);
        let mut upper = diff / (d * d) + adv / (2.0 * d);
        let mut diag = -2.0 * diff / (d * d);
        if k == 0 {
            diag += lower;
            lower = 0.0;
        }
        if k == last {
            diag += upper;
            upper = 0.0;
        }
        g_max = g_max.max(diag.abs() + lower.abs() + upper.abs());
    }
    cfl_safety * 2.0 / g_max
}

fn heun(profile: &RadialProfile, t: f64, first: &Evaluation, dt: f64) -> Result<RadialProfile> {
    let predicted: Vec<f64> = profile.rho().iter().zip(&first.rhs).map(|(r, k1)| r + dt * k1).collect();
    let predicted = profile.with_rho(predicted)?;
    let second = evaluate(&predicted, t + dt)?;
    let rho = profile
        .rho()
        .iter()
        .zip(first.rhs.iter().zip(&second.rhs))
        .map(|(r, (k1, k2))| r + 0.5 * dt * (k1 + k2))
        .collect();
    profile.with_rho(rho)
}

/// One Heun step with dt = min(dt_max, stability limit, t_end - t).
pub fn step(state: &FlowState, ctrl: &StepControl) -> Result<FlowState> {
    step_until(state, ctrl, ctrl.t_end)
}

fn step_until(state: &FlowState, ctrl: &StepControl, t_stop: f64) -> Result<FlowState> {
    let first = evaluate(&state.profile, state.t)?;
    step_with(state, ctrl, t_stop, &first)
}

fn step_with(state: &FlowState, ctrl: &StepControl, t_stop: f64, first: &Evaluation) -> Result<FlowState> {
    let limit = ctrl.dt_max.min(stable_dt(&state.profile, first, ctrl.cfl_safety));
    if !(limit >= MIN_DT) {
        return Err(Error::Stiffness { t: state.t, dt: limit });
    }
    let remaining = t_stop - state.t;
    let (dt, t_new) = if remaining <= limit { (remaining, t_stop) } else { (limit, state.t + limit) };
    if !(dt > 0.0) {
        return Err(invalid(format!("no time left to step: t = {}, stop = {t_stop}", state.t)));
    }
    let profile = heun(&state.profile, state.t, first, dt)?;
    Ok(FlowState { t: t_new, profile, step_count: state.step_count + 1, last_dt: dt })
}

/// Monitored quantities at one instant.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct DiagnosticsRecord {
    pub t: f64,
    pub rho_min: f64,
    pub rho_max: f64,
    pub rho_mean: f64,
    pub h_min: f64,
    pub h_max: f64,
    pub sup_grad_phi_sq: f64,
    pub volume: f64,
    pub q: f64,
    pub q_rhs: f64,
    pub drift: f64,
}

pub const DIAGNOSTICS_HEADER: &str = "t,rho_min,rho_max,rho_mean,H_min,H_max,sup_grad_phi_sq,volume,Q,q_rhs,drift";
pub const SNAPSHOT_HEADER: &str = "theta,rho";

impl DiagnosticsRecord {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.t,
            self.rho_min,
            self.rho_max,
            self.rho_mean,
            self.h_min,
            self.h_max,
            self.sup_grad_phi_sq,
            self.volume,
            self.q,
            self.q_rhs,
            self.drift
        )
    }
}

fn min_max(values: &[f64]) -> (f64, f64) {
    values.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(*x), hi.max(*x)))
}

/// Orbit-weighted mean of ρ.
pub fn rho_mean(profile: &RadialProfile) -> f64 {
    orbit_integral(profile.rho(), profile.n()) / sphere_volume(profile.n())
}

fn q_rhs_with(profile: &RadialProfile, derivs: &ProfileDerivatives, h: &[f64]) -> Result<f64> {
    let n = profile.n();
    let nf = n as f64;
    let mut curvature = Vec::with_capacity(profile.len());
    let mut radial = Vec::with_capacity(profile.len());
    for k in 0..profile.len() {
        let rho = profile.rho()[k];
        let v = derivs.v[k];
        let dmu = area_element(n, rho, v);
        let a2 = a_norm_sq(profile, derivs, k)?;
        curvature.push((a2 - 4.0 * (nf + 2.0)) / h[k] * dmu);
        // Normal trajectories move ρ at rate ḡ(∂ρ, ν)/H = 1/(vH).
        let (s, c) = (rho.sinh(), rho.cosh());
        radial.push(((4.0 * nf - 1.0) / (s * s) - 3.0 / (c * c)) / (v * h[k]) * dmu);
    }
    let volume = volume_with(profile, derivs);
    let q = q_with(profile, derivs, h);
    let scale = volume.powf(volume_exponent(n));
    Ok(q / (2.0 * nf + 1.0) - scale * orbit_integral(&curvature, n) + scale * orbit_integral(&radial, n))
}

/// Right-hand side of the evolution law of Q along the flow.
pub fn q_evolution_rhs(state: &FlowState) -> Result<f64> {
    let eval = evaluate(&state.profile, state.t)?;
    q_rhs_with(&state.profile, &eval.derivs, &eval.h)
}

fn record_with(state: &FlowState, eval: &Evaluation) -> Result<DiagnosticsRecord> {
    let profile = &state.profile;
    let (rho_min, rho_max) = min_max(profile.rho());
    let (h_min, h_max) = min_max(&eval.h);
    let mean = rho_mean(profile);
    Ok(DiagnosticsRecord {
        t: state.t,
        rho_min,
        rho_max,
        rho_mean: mean,
        h_min,
        h_max,
        sup_grad_phi_sq: eval.derivs.phi_t.iter().fold(0.0, |m: f64, p| m.max(p * p)),
        volume: volume_with(profile, &eval.derivs),
        q: q_with(profile, &eval.derivs, &eval.h),
        q_rhs: q_rhs_with(profile, &eval.derivs, &eval.h)?,
        drift: drift(profile.n(), state.t, mean),
    })
}

pub fn diagnostics(state: &FlowState) -> Result<DiagnosticsRecord> {
    record_with(state, &evaluate(&state.profile, state.t)?)
}

/// Output times of a run; `None` disables snapshots.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Schedule {
    pub record_every: f64,
    pub snapshot_every: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct FlowRun {
    pub final_state: FlowState,
    pub records: Vec<DiagnosticsRecord>,
    pub snapshots: Vec<(f64, RadialProfile)>,
    /// Minimum of H over all accepted states.
    pub min_h: f64,
}

/// A run stopped by an error, with everything produced before it.
#[derive(Debug, Clone)]
pub struct FlowAbort {
    pub error: Error,
    pub partial: FlowRun,
}

fn next_multiple(t: f64, every: f64) -> f64 {
    let k = (t / every + TIME_EPS).floor() + 1.0;
    k * every
}

/// Integrates to ctrl.t_end, landing exactly on every record and snapshot time
/// (multiples of the cadences, plus t = 0 and t_end).
pub fn run_flow(state0: FlowState, ctrl: &StepControl, schedule: &Schedule) -> std::result::Result<FlowRun, Box<FlowAbort>> {
    let mut run = FlowRun { final_state: state0.clone(), records: Vec::new(), snapshots: Vec::new(), min_h: f64::INFINITY };
    let abort = |error: Error, run: FlowRun| Box::new(FlowAbort { error, partial: run });
    if let Err(e) = ctrl.validate() {
        return Err(abort(e, run));
    }
    if !(schedule.record_every > 0.0) || schedule.snapshot_every.is_some_and(|s| !(s > 0.0)) {
        return Err(abort(invalid("output cadences must be positive"), run));
    }

    let mut state = state0;
    loop {
        let eval = match evaluate(&state.profile, state.t) {
            Ok(e) => e,
            Err(e) => return Err(abort(e, run)),
        };
        run.min_h = eval.h.iter().fold(run.min_h, |m, h| m.min(*h));

        let at_end = state.t >= ctrl.t_end - TIME_EPS;
        let on_grid = |every: f64| {
            let r = (state.t / every).round() * every;
            (state.t - r).abs() < TIME_EPS
        };
        if on_grid(schedule.record_every) || at_end {
            match record_with(&state, &eval) {
                Ok(r) => run.records.push(r),
                Err(e) => return Err(abort(e, run)),
            }
        }
        if schedule.snapshot_every.is_some_and(on_grid) || at_end {
            run.snapshots.push((state.t, state.profile.clone()));
        }
        run.final_state = state.clone();
        if at_end {
            return Ok(run);
        }

        let mut stop = next_multiple(state.t, schedule.record_every).min(ctrl.t_end);
        if let Some(every) = schedule.snapshot_every {
            stop = stop.min(next_multiple(state.t, every));
        }
        state = match step_with(&state, ctrl, stop, &eval) {
            Ok(s) => s,
            Err(e) => return Err(abort(e, run)),
        };
        if (state.t - stop).abs() < TIME_EPS {
            state.t = stop;
        }
    }
}

/// Advances to `t_stop` without recording.
pub fn advance(mut state: FlowState, ctrl: &StepControl, t_stop: f64) -> Result<FlowState> {
    while state.t < t_stop - TIME_EPS {
        state = step_until(&state, ctrl, t_stop)?;
    }
    Ok(state)
}

pub fn write_diagnostics_csv<W: Write>(mut out: W, records: &[DiagnosticsRecord]) -> Result<()> {
    writeln!(out, "{DIAGNOSTICS_HEADER}")?;
    for r in records {
        writeln!(out, "{}", r.csv_row())?;
    }
    Ok(())
}

pub fn write_snapshot_csv<W: Write>(mut out: W, profile: &RadialProfile) -> Result<()> {
    writeln!(out, "{SNAPSHOT_HEADER}")?;
    for (t, r) in profile.theta().iter().zip(profile.rho()) {
        writeln!(out, "{t},{r}")?;
    }
    Ok(())
}
