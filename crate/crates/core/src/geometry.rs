//! Geometry of star-shaped, S³-invariant radial graphs whose radial function
//! depends only on the base distance θ ∈ (0, π/2) on the quaternionic projective
//! space. A point of S^{4n-1} is written z = (cos θ · a, sin θ · b) with a ∈ S³ the
//! first quaternion and b ∈ S^{4n-5} the remaining ones.
//!
//! Derivatives along θ use second-order central differences on a cell-centred
//! grid, with even reflection across both ends of the interval.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;

use crate::ambient::{j_unchecked, QuatVector};
use crate::error::{invalid, Error, Result};

/// Radial function sampled at the cell centres θ_k = (k + ½)·(π/2)/N.
#[derive(Debug, Clone, PartialEq)]
pub struct RadialProfile {
    n: usize,
    theta: Vec<f64>,
    rho: Vec<f64>,
}

pub const MIN_GRID: usize = 4;

/// Cell-centred nodes of an N-point grid on (0, π/2).
pub fn theta_grid(points: usize) -> Vec<f64> {
    let d = FRAC_PI_2 / points as f64;
    (0..points).map(|k| (k as f64 + 0.5) * d).collect()
}

impl RadialProfile {
    pub fn new(n: usize, rho: Vec<f64>) -> Result<Self> {
        if n < 2 {
            return Err(invalid(format!("quaternionic dimension must be at least 2, got {n}")));
        }
        if rho.len() < MIN_GRID {
            return Err(invalid(format!("grid needs at least {MIN_GRID} points, got {}", rho.len())));
        }
        if let Some((k, r)) = rho.iter().enumerate().find(|(_, r)| !(**r > 0.0 && r.is_finite())) {
            return Err(invalid(format!("radial function must be positive, rho[{k}] = {r}")));
        }
        Ok(Self { n, theta: theta_grid(rho.len()), rho })
    }

    pub fn from_fn(n: usize, points: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(n, theta_grid(points).into_iter().map(f).collect())
    }

    /// Geodesic sphere of radius r0.
    pub fn constant(n: usize, points: usize, r0: f64) -> Result<Self> {
        Self::new(n, vec![r0; points])
    }

    /// r0 + a·cos 2θ, which satisfies the reflection conditions at both ends.
    pub fn bump(n: usize, points: usize, r0: f64, amplitude: f64) -> Result<Self> {
        Self::from_fn(n, points, |t| r0 + amplitude * (2.0 * t).cos())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.rho.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rho.is_empty()
    }

    pub fn theta(&self) -> &[f64] {
        &self.theta
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn d_theta(&self) -> f64 {
        FRAC_PI_2 / self.len() as f64
    }

    /// Same grid, new values.
    pub fn with_rho(&self, rho: Vec<f64>) -> Result<Self> {
        if rho.len() != self.len() {
            return Err(invalid("profile length mismatch"));
        }
        Self::new(self.n, rho)
    }
}

/// Central first and second differences with even ghost values at both ends.
pub fn central_differences(values: &[f64], d: f64) -> (Vec<f64>, Vec<f64>) {
    let n = values.len();
    let at = |k: isize| -> f64 {
        if k < 0 {
            values[(-k - 1) as usize]
        } else if k as usize >= n {
            values[2 * n - 1 - k as usize]
        } else {
            values[k as usize]
        }
    };
    let mut first = Vec::with_capacity(n);
    let mut second = Vec::with_capacity(n);
    for k in 0..n as isize {
        let (l, c, r) = (at(k - 1), at(k), at(k + 1));
        first.push((r - l) / (2.0 * d));
        second.push((r - 2.0 * c + l) / (d * d));
    }
    (first, second)
}

/// θ-derivatives of the profile and of φ, where dφ/dρ = 1/sinh ρ.
#[derive(Debug, Clone)]
pub struct ProfileDerivatives {
    pub rho_t: Vec<f64>,
    pub rho_tt: Vec<f64>,
    pub phi_t: Vec<f64>,
    pub phi_tt: Vec<f64>,
    pub v: Vec<f64>,
    pub w: Vec<f64>,
}

impl ProfileDerivatives {
    /// Finite-difference derivatives on the profile grid.
    pub fn compute(profile: &RadialProfile) -> Self {
        let (rho_t, rho_tt) = central_differences(profile.rho(), profile.d_theta());
        Self::from_rho_derivatives(profile, rho_t, rho_tt)
    }

    /// Derivatives supplied externally (e.g. analytic ones for a known profile).
    pub fn from_rho_derivatives(profile: &RadialProfile, rho_t: Vec<f64>, rho_tt: Vec<f64>) -> Self {
        let n = profile.n();
        let mut phi_t = Vec::with_capacity(profile.len());
        let mut phi_tt = Vec::with_capacity(profile.len());
        let mut v = Vec::with_capacity(profile.len());
        let mut w = Vec::with_capacity(profile.len());
        for k in 0..profile.len() {
            let (pt, ptt) = phi_from_rho(profile.rho[k], rho_t[k], rho_tt[k]);
            phi_t.push(pt);
            phi_tt.push(ptt);
            v.push((1.0 + pt * pt).sqrt());
            w.push(weight_unchecked(n, profile.theta[k]));
        }
        Self { rho_t, rho_tt, phi_t, phi_tt, v, w }
    }
}

/// (φ', φ'') from (ρ, ρ', ρ'') by the chain rule.
pub fn phi_from_rho(rho: f64, rho_t: f64, rho_tt: f64) -> (f64, f64) {
    let (s, c) = (rho.sinh(), rho.cosh());
    (rho_t / s, rho_tt / s - c * rho_t * rho_t / (s * s))
}

/// Mean curvature (4n-1)coth ρ + 3 tanh ρ of the geodesic sphere of radius ρ.
pub fn hat_h(n: usize, rho: f64) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(invalid(format!("radius must be positive, got {rho}")));
    }
    Ok(hat_h_unchecked(n, rho))
}

pub(crate) fn hat_h_unchecked(n: usize, rho: f64) -> f64 {
    (4.0 * n as f64 - 1.0) / rho.tanh() + 3.0 * rho.tanh()
}

/// Drift w(θ) = (4n-5)cot θ - 3 tan θ of the round Laplacian on θ-only functions.
pub fn reduced_weight(n: usize, theta: f64) -> Result<f64> {
    if !(theta > 0.0 && theta < FRAC_PI_2) {
        return Err(invalid(format!("theta must lie strictly inside (0, pi/2), got {theta}")));
    }
    Ok(weight_unchecked(n, theta))
}

pub(crate) fn weight_unchecked(n: usize, theta: f64) -> f64 {
    (4.0 * n as f64 - 5.0) / theta.tan() - 3.0 * theta.tan()
}

/// Volume density sin^{4n-5}θ cos³θ of the orbit through θ (up to a constant).
pub fn orbit_density(n: usize, theta: f64) -> f64 {
    theta.sin().powi(4 * n as i32 - 5) * theta.cos().powi(3)
}

/// Volume 2π^{2n}/(2n-1)! of the unit sphere S^{4n-1}.
pub fn sphere_volume(n: usize) -> f64 {
    let fact: f64 = (1..2 * n).map(|k| k as f64).product();
    2.0 * PI.powi(2 * n as i32) / fact
}

/// Integral over S^{4n-1} of a θ-only function sampled on the cell-centred grid.
pub fn orbit_integral(values: &[f64], n: usize) -> f64 {
    let theta = theta_grid(values.len());
    let (num, den) = theta.iter().zip(values).fold((0.0, 0.0), |(num, den), (t, f)| {
        let j = orbit_density(n, *t);
        (num + f * j, den + j)
    });
    sphere_volume(n) * num / den
}

/// Full mean curvature of a star-shaped graph from pointwise data: `contraction` is
/// φ_ij σ̃^{ji} and `vertical_gradient_sq` is Σ_k (ξ_k φ)².
pub fn general_mean_curvature(n: usize, rho: f64, v: f64, contraction: f64, vertical_gradient_sq: f64) -> f64 {
    let (s, c) = (rho.sinh(), rho.cosh());
    -contraction / (v * s) + hat_h_unchecked(n, rho) / v + s * vertical_gradient_sq / (v * v * v * c)
}

/// φ_ij σ̃^{ji} = φ''/v² + w φ' for a θ-only function.
pub fn reduced_contraction(phi_t: f64, phi_tt: f64, v: f64, w: f64) -> f64 {
    phi_tt / (v * v) + w * phi_t
}

/// Mean curvature at node `k`.
pub fn mean_curvature_reduced(profile: &RadialProfile, derivs: &ProfileDerivatives, k: usize) -> f64 {
    let v = derivs.v[k];
    let contraction = reduced_contraction(derivs.phi_t[k], derivs.phi_tt[k], v, derivs.w[k]);
    general_mean_curvature(profile.n, profile.rho[k], v, contraction, 0.0)
}

/// Position of the adapted frame slots: ξ1..ξ3, e_θ, J1e_θ..J3e_θ, then the rest.
pub const SLOT_THETA: usize = 3;
pub const SLOT_J_THETA: usize = 4;
pub const SLOT_REST: usize = 7;

/// Round-metric Hessian of u(θ) in the adapted frame, given u' and u''.
pub fn sigma_hessian_adapted(n: usize, theta: f64, u_t: f64, u_tt: f64) -> DMatrix<f64> {
    let m = 4 * n - 1;
    let mut h = DMatrix::zeros(m, m);
    h[(SLOT_THETA, SLOT_THETA)] = u_tt;
    let jdiag = 2.0 * u_t / (2.0 * theta).tan();
    let rest = u_t / theta.tan();
    for i in 0..3 {
        h[(SLOT_J_THETA + i, SLOT_J_THETA + i)] = jdiag;
        h[(i, SLOT_J_THETA + i)] = u_t;
        h[(SLOT_J_THETA + i, i)] = u_t;
    }
    for k in SLOT_REST..m {
        h[(k, k)] = rest;
    }
    h
}

/// Shape operator h_i^k at node `k` in the adapted frame.
pub fn shape_operator_adapted(profile: &RadialProfile, derivs: &ProfileDerivatives, k: usize) -> DMatrix<f64> {
    shape_operator_at(
        profile.n,
        profile.theta[k],
        profile.rho[k],
        derivs.phi_t[k],
        derivs.phi_tt[k],
    )
}

pub(crate) fn shape_operator_at(n: usize, theta: f64, rho: f64, phi_t: f64, phi_tt: f64) -> DMatrix<f64> {
    let m = 4 * n - 1;
    let (s, c) = (rho.sinh(), rho.cosh());
    let v = (1.0 + phi_t * phi_t).sqrt();
    let eps = c * c;

    // Hessian with respect to the Berger metric of parameter cosh²ρ
    let mut hess = sigma_hessian_adapted(n, theta, phi_t, phi_tt);
    for i in 0..3 {
        hess[(i, SLOT_J_THETA + i)] *= eps;
        hess[(SLOT_J_THETA + i, i)] *= eps;
    }
    // ẽ^{jk} = e^{jk} - φ^j φ^k / v², diagonal in this frame
    let mut e_inv = vec![1.0; m];
    for slot in e_inv.iter_mut().take(3) {
        *slot = 1.0 / eps;
    }
    e_inv[SLOT_THETA] = 1.0 / (v * v);

    let vertical = (s * s + c * c) / (s * c * v);
    let horizontal = c / (s * v);
    let mut op = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in 0..m {
            op[(i, j)] = -hess[(i, j)] * e_inv[j] / (v * s);
        }
        op[(i, i)] += if i < 3 { vertical } else { horizontal };
    }
    op
}

/// |A|² from the closed identity in terms of the reduced Hessian contraction, |∇φ|², H - Ĥ and ρ.
pub fn a_norm_sq_closed(n: usize, theta: f64, rho: f64, phi_t: f64, phi_tt: f64, h: f64) -> f64 {
    let nf = n as f64;
    let (s, c) = (rho.sinh(), rho.cosh());
    let v2 = 1.0 + phi_t * phi_t;
    let v = v2.sqrt();
    let contraction_sq = phi_tt * phi_tt / (v2 * v2)
        + (4.0 * nf - 8.0) * (phi_t / theta.tan()).powi(2)
        + 3.0 * (2.0 * phi_t / (2.0 * theta).tan()).powi(2);
    let coupling = 6.0 * c * c * phi_t * phi_t;
    let coth = c / s;
    let tanh = s / c;
    (contraction_sq + coupling) / (v2 * s * s)
        + 2.0 * coth / v * (h - hat_h_unchecked(n, rho) / v)
        + ((4.0 * nf - 1.0) * coth * coth + 3.0 * tanh * tanh + 6.0) / v2
}

/// Relative tolerance for the agreement of the two |A|² routes.
pub const A_NORM_TOL: f64 = 1e-8;

/// |A|² at node `k`: trace of the squared shape operator, cross-checked against the
/// closed identity.
pub fn a_norm_sq(profile: &RadialProfile, derivs: &ProfileDerivatives, k: usize) -> Result<f64> {
    let op = shape_operator_adapted(profile, derivs, k);
    let from_matrix = (&op * &op).trace();
    let h = mean_curvature_reduced(profile, derivs, k);
    let closed = a_norm_sq_closed(
        profile.n,
        profile.theta[k],
        profile.rho[k],
        derivs.phi_t[k],
        derivs.phi_tt[k],
        h,
    );
    if (from_matrix - closed).abs() > A_NORM_TOL * from_matrix.abs().max(1.0) {
        return Err(Error::CrossCheck { quantity: "|A|^2", node: k, first: from_matrix, second: closed });
    }
    Ok(from_matrix)
}

/// dμ/dσ = v sinh^{4n-1}ρ cosh³ρ.
pub fn area_element(n: usize, rho: f64, v: f64) -> f64 {
    v * rho.sinh().powi(4 * n as i32 - 1) * rho.cosh().powi(3)
}

/// Per-node geometric data of a radial graph.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ShapePointData {
    pub h: f64,
    pub h_hat: f64,
    pub v: f64,
    pub a_norm_sq: f64,
    pub area_density: f64,
}

pub fn shape_point_data(profile: &RadialProfile, derivs: &ProfileDerivatives, k: usize) -> Result<ShapePointData> {
    let rho = profile.rho[k];
    Ok(ShapePointData {
        h: mean_curvature_reduced(profile, derivs, k),
        h_hat: hat_h_unchecked(profile.n, rho),
        v: derivs.v[k],
        a_norm_sq: a_norm_sq(profile, derivs, k)?,
        area_density: area_element(profile.n, rho, derivs.v[k]),
    })
}

/// Mean curvature at every node.
pub fn mean_curvatures(profile: &RadialProfile, derivs: &ProfileDerivatives) -> Vec<f64> {
    (0..profile.len()).map(|k| mean_curvature_reduced(profile, derivs, k)).collect()
}

pub fn total_volume(profile: &RadialProfile) -> f64 {
    let derivs = ProfileDerivatives::compute(profile);
    volume_with(profile, &derivs)
}

pub(crate) fn volume_with(profile: &RadialProfile, derivs: &ProfileDerivatives) -> f64 {
    let density: Vec<f64> = (0..profile.len()).map(|k| area_element(profile.n, profile.rho[k], derivs.v[k])).collect();
    orbit_integral(&density, profile.n)
}

/// Exponent -1 + 1/(2n+1) of the volume normalisation.
pub fn volume_exponent(n: usize) -> f64 {
    -1.0 + 1.0 / (2.0 * n as f64 + 1.0)
}

/// Q(M) = |M|^{-1+1/(2n+1)} ∫ (H - Ĥ) dμ.
pub fn q_functional(profile: &RadialProfile) -> f64 {
    let derivs = ProfileDerivatives::compute(profile);
    q_with(profile, &derivs, &mean_curvatures(profile, &derivs))
}

pub(crate) fn q_with(profile: &RadialProfile, derivs: &ProfileDerivatives, h: &[f64]) -> f64 {
    let n = profile.n;
    let integrand: Vec<f64> = (0..profile.len())
        .map(|k| {
            let rho = profile.rho[k];
            (h[k] - hat_h_unchecked(n, rho)) * area_element(n, rho, derivs.v[k])
        })
        .collect();
    volume_with(profile, derivs).powf(volume_exponent(n)) * orbit_integral(&integrand, n)
}

/// The point (cos θ · a, sin θ · b) of S^{4n-1}; `a` has 4 entries, `b` has 4n-4.
pub fn cohomogeneity_point(theta: f64, a: &[f64], b: &[f64]) -> Result<QuatVector> {
    let mut c: Vec<f64> = a.iter().map(|x| theta.cos() * x).collect();
    c.extend(b.iter().map(|x| theta.sin() * x));
    QuatVector::new(c)
}

/// Orthonormal frame at (cos θ · a, sin θ · b) ordered as ξ1..ξ3, e_θ, J1e_θ..J3e_θ,
/// then 4n-8 directions tangent to S^{4n-5} and orthogonal to the quaternionic line of b.
pub fn adapted_frame(theta: f64, a: &[f64], b: &[f64]) -> Result<Vec<QuatVector>> {
    if a.len() != 4 || b.len() % 4 != 0 || b.is_empty() {
        return Err(invalid("adapted frame needs a in S^3 and b in S^{4n-5}"));
    }
    let z = cohomogeneity_point(theta, a, b)?;
    let n = z.dimension_n();
    let mut e_theta: Vec<f64> = a.iter().map(|x| -theta.sin() * x).collect();
    e_theta.extend(b.iter().map(|x| theta.cos() * x));
    let e_theta = QuatVector::new(e_theta)?;

    let mut frame: Vec<QuatVector> = (1..=3).map(|i| j_unchecked(i, &z)).collect();
    frame.push(e_theta.clone());
    frame.extend((1..=3).map(|i| j_unchecked(i, &e_theta)));

    let mut spanned = frame.clone();
    spanned.push(z);
    for idx in 0..4 * n {
        if frame.len() == 4 * n - 1 {
            break;
        }
        let mut r = QuatVector::basis(n, idx);
        for _ in 0..2 {
            for e in &spanned {
                r = r.axpy(-e.dot(&r), e);
            }
        }
        let norm = r.norm();
        if norm < 0.5 {
            continue;
        }
        let seed = r.scale(1.0 / norm);
        let group = [seed.clone(), j_unchecked(1, &seed), j_unchecked(2, &seed), j_unchecked(3, &seed)];
        for g in group {
            spanned.push(g.clone());
            frame.push(g);
        }
    }
    Ok(frame)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bump_exact(r0: f64, a: f64) -> (impl Fn(f64) -> f64, impl Fn(f64) -> f64, impl Fn(f64) -> f64) {
        (
            move |t: f64| r0 + a * (2.0 * t).cos(),
            move |t: f64| -2.0 * a * (2.0 * t).sin(),
            move |t: f64| -4.0 * a * (2.0 * t).cos(),
        )
    }

    fn analytic_derivs(profile: &RadialProfile, r0: f64, a: f64) -> ProfileDerivatives {
        let (_, d1, d2) = bump_exact(r0, a);
        let rt = profile.theta().iter().map(|t| d1(*t)).collect();
        let rtt = profile.theta().iter().map(|t| d2(*t)).collect();
        ProfileDerivatives::from_rho_derivatives(profile, rt, rtt)
    }

    #[test]
    fn hat_h_values() {
        assert_abs_diff_eq!(hat_h(2, 1.0).unwrap(), 7.0 / 1f64.tanh() + 3.0 * 1f64.tanh(), epsilon = 1e-14);
        assert_abs_diff_eq!(hat_h(2, 1.0).unwrap(), 11.476_029_466, epsilon = 1e-8);
        assert_abs_diff_eq!(hat_h(2, 40.0).unwrap(), 10.0, epsilon = 1e-12);
        let small = 1e-4;
        assert_abs_diff_eq!(hat_h(2, small).unwrap() * small, 7.0, epsilon = 1e-6);
        assert!(hat_h(2, 0.0).is_err());
        assert!(hat_h(2, -1.0).is_err());
    }

    #[test]
    fn reduced_weight_values() {
        assert_abs_diff_eq!(reduced_weight(2, PI / 4.0).unwrap(), 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(reduced_weight(2, PI / 6.0).unwrap(), 3.464_101_615, epsilon = 1e-8);
        assert_abs_diff_eq!(reduced_weight(2, PI / 6.0).unwrap(), 6.0 / (PI / 3.0).tan(), epsilon = 1e-13);
        assert_abs_diff_eq!(reduced_weight(3, PI / 4.0).unwrap(), 4.0, epsilon = 1e-13);
        assert!(reduced_weight(2, 0.0).is_err());
        assert!(reduced_weight(2, FRAC_PI_2).is_err());
    }

    #[test]
    fn weight_is_log_derivative_of_orbit_density() {
        for n in [2, 3, 4] {
            for t in theta_grid(32) {
                let h = 1e-3 * t.min(FRAC_PI_2 - t);
                let l = |x: f64| orbit_density(n, x).ln();
                let fd = (8.0 * (l(t + h) - l(t - h)) - (l(t + 2.0 * h) - l(t - 2.0 * h))) / (12.0 * h);
                let w = reduced_weight(n, t).unwrap();
                assert!((fd - w).abs() < 1e-10 * w.abs().max(1.0), "n={n} t={t}: {fd} vs {w}");
            }
        }
    }

    #[test]
    fn constant_profile_has_trivial_derivatives() {
        let p = RadialProfile::constant(2, 64, 1.3).unwrap();
        let d = ProfileDerivatives::compute(&p);
        assert!(d.phi_t.iter().all(|x| *x == 0.0));
        assert!(d.v.iter().all(|x| *x == 1.0));
        for k in 0..p.len() {
            assert_eq!(mean_curvature_reduced(&p, &d, k), hat_h(2, 1.3).unwrap());
        }
    }

    #[test]
    fn constant_profile_mean_curvature_values() {
        let p = RadialProfile::constant(2, 32, 1.0).unwrap();
        let d = ProfileDerivatives::compute(&p);
        assert_abs_diff_eq!(mean_curvature_reduced(&p, &d, 7), 11.476_029_466, epsilon = 1e-8);
        let far = RadialProfile::constant(2, 32, 30.0).unwrap();
        let d = ProfileDerivatives::compute(&far);
        assert_abs_diff_eq!(mean_curvature_reduced(&far, &d, 3), 10.0, epsilon = 1e-12);
    }

    #[test]
    fn shape_operator_of_geodesic_sphere() {
        let p = RadialProfile::constant(2, 16, 1.0).unwrap();
        let d = ProfileDerivatives::compute(&p);
        let op = shape_operator_adapted(&p, &d, 5);
        let lambda = 1.0 / 1f64.tanh();
        let mu = 2.0 / 2f64.tanh();
        assert_abs_diff_eq!(lambda, 1.313_035, epsilon = 1e-6);
        assert_abs_diff_eq!(mu, 2.074_629, epsilon = 1e-6);
        assert_abs_diff_eq!(mu, lambda + 1f64.tanh(), epsilon = 1e-14);
        for i in 0..7 {
            for j in 0..7 {
                let expected = if i != j { 0.0 } else if i < 3 { mu } else { lambda };
                assert_abs_diff_eq!(op[(i, j)], expected, epsilon = 1e-14);
            }
        }
        let a2 = a_norm_sq(&p, &d, 5).unwrap();
        assert_abs_diff_eq!(a2, 4.0 * lambda * lambda + 3.0 * mu * mu, epsilon = 1e-12);
        assert_abs_diff_eq!(a2, 19.808_51, epsilon = 1e-4);
    }

    #[test]
    fn a_norm_tends_to_horosphere_value() {
        for n in [2, 3] {
            let p = RadialProfile::constant(n, 8, 25.0).unwrap();
            let d = ProfileDerivatives::compute(&p);
            let a2 = a_norm_sq(&p, &d, 2).unwrap();
            assert_abs_diff_eq!(a2 - 4.0 * (n as f64 + 2.0), 0.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn trace_identity_and_dual_a_norm_on_bumps() {
        for (n, r0, a) in [(2, 3.0, 0.1), (2, 1.0, 0.2), (3, 2.0, 0.3), (4, 1.5, 0.1)] {
            let p = RadialProfile::bump(n, 64, r0, a).unwrap();
            for d in [ProfileDerivatives::compute(&p), analytic_derivs(&p, r0, a)] {
                for k in 0..p.len() {
                    let op = shape_operator_adapted(&p, &d, k);
                    let h = mean_curvature_reduced(&p, &d, k);
                    assert!((op.trace() - h).abs() < 1e-10, "trace {} vs H {}", op.trace(), h);
                    a_norm_sq(&p, &d, k).unwrap();
                }
            }
        }
    }

    #[test]
    fn couplings_vanish_exactly_where_gradient_does() {
        let p = RadialProfile::bump(2, 16, 3.0, 0.1).unwrap();
        let d = ProfileDerivatives::compute(&p);
        for k in 0..p.len() {
            let op = shape_operator_adapted(&p, &d, k);
            let coupling = (0..3).map(|i| op[(i, SLOT_J_THETA + i)].abs() + op[(SLOT_J_THETA + i, i)].abs()).sum::<f64>();
            assert_eq!(coupling == 0.0, d.phi_t[k] == 0.0);
        }
        let flat = RadialProfile::constant(2, 16, 3.0).unwrap();
        let d = ProfileDerivatives::compute(&flat);
        let op = shape_operator_adapted(&flat, &d, 4);
        assert_eq!(op[(0, SLOT_J_THETA)], 0.0);
    }

    #[test]
    fn general_formula_reduces_to_the_invariant_one() {
        let p = RadialProfile::bump(2, 48, 2.0, 0.2).unwrap();
        let d = ProfileDerivatives::compute(&p);
        for k in 0..p.len() {
            let c = reduced_contraction(d.phi_t[k], d.phi_tt[k], d.v[k], d.w[k]);
            let g = general_mean_curvature(2, p.rho()[k], d.v[k], c, 0.0);
            assert!((g - mean_curvature_reduced(&p, &d, k)).abs() < 1e-12);
        }
        assert_eq!(general_mean_curvature(3, 1.7, 1.0, 0.0, 0.0), hat_h(3, 1.7).unwrap());
    }

    #[test]
    fn general_formula_against_literal_evaluation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let n = rng.random_range(2..6usize);
            let rho: f64 = rng.random_range(0.2..5.0);
            let v: f64 = rng.random_range(1.0..3.0);
            let con: f64 = rng.random_range(-5.0..5.0);
            let vg: f64 = rng.random_range(0.0..2.0);
            let nf = n as f64;
            let literal = -con / (v * rho.sinh())
                + ((4.0 * nf - 1.0) * rho.cosh() / rho.sinh() + 3.0 * rho.sinh() / rho.cosh()) / v
                + rho.sinh() / (v.powi(3) * rho.cosh()) * vg;
            let got = general_mean_curvature(n, rho, v, con, vg);
            assert!((got - literal).abs() < 1e-12 * literal.abs().max(1.0));
        }
    }

    #[test]
    fn bump_mean_curvature_matches_independent_difference_evaluation() {
        // Reference: ρ', ρ'' by central differences of the closed-form profile,
        // then the mean curvature formula written out literally.
        let (r0, a) = (3.0, 0.1);
        let (f, _, _) = bump_exact(r0, a);
        let p = RadialProfile::bump(2, 64, r0, a).unwrap();
        let d = analytic_derivs(&p, r0, a);
        let k = 31; // θ just below π/4
        let t = p.theta()[k];
        let h = 1e-4;
        let r = f(t);
        let r1 = (f(t + h) - f(t - h)) / (2.0 * h);
        let r2 = (f(t + h) - 2.0 * r + f(t - h)) / (h * h);
        let p1 = r1 / r.sinh();
        let p2 = r2 / r.sinh() - r.cosh() * r1 * r1 / r.sinh().powi(2);
        let v = (1.0 + p1 * p1).sqrt();
        let w = 3.0 / t.tan() - 3.0 * t.tan();
        let reference = (-(p2 / (v * v) + w * p1) / r.sinh() + 7.0 / r.tanh() + 3.0 * r.tanh()) / v;
        assert_abs_diff_eq!(mean_curvature_reduced(&p, &d, k), reference, epsilon = 1e-8);
    }

    #[test]
    fn area_element_values() {
        assert_abs_diff_eq!(area_element(2, 1.0, 1.0), 1f64.sinh().powi(7) * 1f64.cosh().powi(3), epsilon = 1e-14);
        assert_abs_diff_eq!(area_element(2, 1.0, 1.0), 11.375_000_655, epsilon = 1e-8);
        assert_abs_diff_eq!(area_element(2, 1.4, 2.0) / area_element(2, 1.4, 1.0), 2.0, epsilon = 1e-15);
    }

    #[test]
    fn sphere_volume_values() {
        assert_abs_diff_eq!(sphere_volume(2), PI.powi(4) / 3.0, epsilon = 1e-12);
        // S^11: 2π^6/5!
        assert_abs_diff_eq!(sphere_volume(3), PI.powi(6) / 60.0, epsilon = 1e-12);
    }

    #[test]
    fn orbit_integral_basics() {
        assert_abs_diff_eq!(orbit_integral(&vec![1.0; 100], 2), 32.4697, epsilon = 1e-4);
        let f: Vec<f64> = theta_grid(64).iter().map(|t| t.cos()).collect();
        let g: Vec<f64> = theta_grid(64).iter().map(|t| t.sin().powi(2)).collect();
        let combo: Vec<f64> = f.iter().zip(&g).map(|(a, b)| 2.0 * a - 0.5 * b).collect();
        let lin = 2.0 * orbit_integral(&f, 2) - 0.5 * orbit_integral(&g, 2);
        assert_abs_diff_eq!(orbit_integral(&combo, 2), lin, epsilon = 1e-12);
    }

    #[test]
    fn orbit_integral_is_exact_on_trig_polynomials() {
        // ∫ sin²θ dσ on S^7 in closed form: Vol(S^7)·∫ sin⁵θ cos³θ / ∫ sin³θ cos³θ = Vol·(1/24)/(1/12)
        let exact = sphere_volume(2) / 2.0;
        let err = |n: usize| {
            let f: Vec<f64> = theta_grid(n).iter().map(|t| t.sin().powi(2)).collect();
            (orbit_integral(&f, 2) - exact).abs()
        };
        // the midpoint rule integrates the trigonometric integrand exactly
        for n in [8, 32, 64] {
            assert!(err(n) < 1e-12 * exact, "N = {n}: {}", err(n));
        }
    }

    #[test]
    fn volume_and_q_of_geodesic_sphere() {
        let p = RadialProfile::constant(2, 256, 1.0).unwrap();
        assert_abs_diff_eq!(total_volume(&p), sphere_volume(2) * area_element(2, 1.0, 1.0), epsilon = 1e-9);
        assert_abs_diff_eq!(total_volume(&p), 369.342_824_78, epsilon = 1e-6);
        assert_eq!(q_functional(&p), 0.0);
    }

    #[test]
    fn q_of_bump_converges_under_refinement() {
        let q: Vec<f64> = [256, 512, 1024]
            .iter()
            .map(|&n| q_functional(&RadialProfile::bump(2, n, 3.0, 0.1).unwrap()))
            .collect();
        assert!((q[1] - q[2]).abs() < 1e-6, "{q:?}");
        assert!((q[0] - q[1]).abs() > (q[1] - q[2]).abs());
    }

    #[test]
    fn profile_validation() {
        assert!(RadialProfile::new(2, vec![1.0, 1.0, 0.0, 1.0]).is_err());
        assert!(RadialProfile::new(1, vec![1.0; 8]).is_err());
        assert!(RadialProfile::new(2, vec![1.0; 2]).is_err());
        let p = RadialProfile::constant(2, 8, 1.0).unwrap();
        assert_abs_diff_eq!(p.theta()[0], FRAC_PI_2 / 16.0);
        assert_abs_diff_eq!(p.theta()[7], FRAC_PI_2 - FRAC_PI_2 / 16.0, epsilon = 1e-15);
    }

    #[test]
    fn adapted_frame_is_orthonormal() {
        let a = [0.5, 0.5, 0.5, 0.5];
        let mut b = vec![0.0; 8];
        b[1] = 0.6;
        b[6] = 0.8;
        let frame = adapted_frame(0.7, &a, &b).unwrap();
        let z = cohomogeneity_point(0.7, &a, &b).unwrap();
        assert_eq!(frame.len(), 11);
        for (i, e) in frame.iter().enumerate() {
            assert_abs_diff_eq!(e.dot(&z), 0.0, epsilon = 1e-12);
            for (j, f) in frame.iter().enumerate() {
                assert_abs_diff_eq!(e.dot(f), if i == j { 1.0 } else { 0.0 }, epsilon = 1e-12);
            }
        }
    }
}
