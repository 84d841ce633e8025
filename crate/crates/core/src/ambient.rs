//! Quaternionic linear algebra on R^{4n}: the complex structures J1, J2, J3,
//! the Hopf frame of the unit sphere, Berger metrics and the closed-form
//! curvature tensor of quaternionic hyperbolic space.
//!
//! Quaternions are stored as (w, x, y, z) blocks and the complex structures
//! act by left multiplication with the imaginary units, i·j = k.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, Result};

const UNIT_TOL: f64 = 1e-12;
const ORTHO_TOL: f64 = 1e-10;

/// A vector of R^{4n} read as n quaternions.
#[derive(Debug, Clone, PartialEq)]
pub struct QuatVector {
    components: Vec<f64>,
}

impl QuatVector {
    pub fn new(components: Vec<f64>) -> Result<Self> {
        if components.len() % 4 != 0 || components.len() < 8 {
            return Err(invalid(format!(
                "quaternion vector needs 4n components with n >= 2, got {}",
                components.len()
            )));
        }
        Ok(Self { components })
    }

    pub fn zeros(n: usize) -> Self {
        assert!(n >= 2, "n must be at least 2");
        Self { components: vec![0.0; 4 * n] }
    }

    /// The `index`-th standard basis vector of R^{4n}.
    pub fn basis(n: usize, index: usize) -> Self {
        let mut v = Self::zeros(n);
        v.components[index] = 1.0;
        v
    }

    /// A point drawn uniformly from the unit sphere S^{4n-1}.
    pub fn random_unit<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        loop {
            let components: Vec<f64> = (0..4 * n).map(|_| rng.sample(StandardNormal)).collect();
            let v = Self { components };
            let norm = v.norm();
            if norm > 1e-3 {
                return v.scale(1.0 / norm);
            }
        }
    }

    pub fn dimension_n(&self) -> usize {
        self.components.len() / 4
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn components(&self) -> &[f64] {
        &self.components
    }

    pub fn dot(&self, other: &Self) -> f64 {
        debug_assert_eq!(self.len(), other.len());
        self.components.iter().zip(&other.components).map(|(a, b)| a * b).sum()
    }

    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    pub fn is_unit(&self) -> bool {
        (self.norm() - 1.0).abs() <= UNIT_TOL
    }

    pub fn scale(&self, s: f64) -> Self {
        Self { components: self.components.iter().map(|a| a * s).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        Self { components: self.components.iter().zip(&other.components).map(|(a, b)| a + b).collect() }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self { components: self.components.iter().zip(&other.components).map(|(a, b)| a - b).collect() }
    }

    /// `self + s * other`
    pub fn axpy(&self, s: f64, other: &Self) -> Self {
        Self {
            components: self.components.iter().zip(&other.components).map(|(a, b)| a + s * b).collect(),
        }
    }

    fn check_same_dim(&self, other: &Self) -> Result<()> {
        if self.len() != other.len() {
            return Err(invalid(format!("dimension mismatch: {} vs {}", self.len(), other.len())));
        }
        Ok(())
    }
}

/// Left multiplication of the quaternion `q = (w, x, y, z)` by the imaginary unit
/// with index `i` in {1, 2, 3}.
fn left_unit_mul(i: usize, q: &[f64]) -> [f64; 4] {
    let (w, x, y, z) = (q[0], q[1], q[2], q[3]);
    match i {
        1 => [-x, w, -z, y],
        2 => [-y, z, w, -x],
        3 => [-z, -y, x, w],
        _ => unreachable!(),
    }
}

/// Applies the complex structure J_i, blockwise left multiplication by the i-th imaginary unit.
pub fn apply_j(i: usize, x: &QuatVector) -> Result<QuatVector> {
    if !(1..=3).contains(&i) {
        return Err(invalid(format!("complex structure index must be 1, 2 or 3, got {i}")));
    }
    Ok(j_unchecked(i, x))
}

pub(crate) fn j_unchecked(i: usize, x: &QuatVector) -> QuatVector {
    let mut components = Vec::with_capacity(x.len());
    for block in x.components.chunks_exact(4) {
        components.extend_from_slice(&left_unit_mul(i, block));
    }
    QuatVector { components }
}

/// Orthonormal frame of T_z S^{4n-1} split into the Hopf (vertical) fields
/// and a J-closed horizontal complement.
#[derive(Debug, Clone)]
pub struct TangentFrame {
    pub base_point: QuatVector,
    pub vertical: [QuatVector; 3],
    pub horizontal: Vec<QuatVector>,
}

/// Largest violations of the frame invariants.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct FrameResiduals {
    pub normal_component: f64,
    pub orthonormality: f64,
    pub hopf_mismatch: f64,
    pub j_closure: f64,
}

impl FrameResiduals {
    pub fn max(&self) -> f64 {
        self.normal_component.max(self.orthonormality).max(self.hopf_mismatch).max(self.j_closure)
    }
}

impl TangentFrame {
    /// All frame vectors, vertical first.
    pub fn vectors(&self) -> impl Iterator<Item = &QuatVector> {
        self.vertical.iter().chain(self.horizontal.iter())
    }

    pub fn dim(&self) -> usize {
        3 + self.horizontal.len()
    }

    /// Frame coordinates of a tangent vector (round-metric projections).
    pub fn coordinates(&self, x: &QuatVector) -> Vec<f64> {
        self.vectors().map(|e| e.dot(x)).collect()
    }

    pub fn residuals(&self) -> FrameResiduals {
        let vecs: Vec<&QuatVector> = self.vectors().collect();
        let normal_component = vecs.iter().map(|e| e.dot(&self.base_point).abs()).fold(0.0, f64::max);
        let mut orthonormality: f64 = 0.0;
        for (a, ea) in vecs.iter().enumerate() {
            for (b, eb) in vecs.iter().enumerate().skip(a) {
                let target = if a == b { 1.0 } else { 0.0 };
                orthonormality = orthonormality.max((ea.dot(eb) - target).abs());
            }
        }
        let mut hopf_mismatch: f64 = 0.0;
        for (k, xi) in self.vertical.iter().enumerate() {
            let expected = j_unchecked(k + 1, &self.base_point);
            let diff = xi.sub(&expected);
            hopf_mismatch = hopf_mismatch.max(diff.components.iter().fold(0.0, |m, d| m.max(d.abs())));
        }
        // J_i applied to a horizontal vector must stay in the horizontal span.
        let mut j_closure: f64 = 0.0;
        for h in &self.horizontal {
            for i in 1..=3 {
                let jh = j_unchecked(i, h);
                let proj = self.horizontal.iter().fold(QuatVector::zeros(h.dimension_n()), |acc, e| {
                    acc.axpy(e.dot(&jh), e)
                });
                j_closure = j_closure.max(jh.sub(&proj).norm());
            }
        }
        FrameResiduals { normal_component, orthonormality, hopf_mismatch, j_closure }
    }
}

fn project_out(v: &QuatVector, basis: &[QuatVector]) -> QuatVector {
    basis.iter().fold(v.clone(), |acc, e| acc.axpy(-e.dot(&acc), e))
}

/// Hopf frame at a unit point z: vertical = (J1 z, J2 z, J3 z), horizontal built
/// quaternionic line by quaternionic line from the standard basis.
pub fn hopf_frame(z: &QuatVector) -> Result<TangentFrame> {
    if !z.is_unit() {
        return Err(invalid(format!("hopf_frame needs a unit base point, |z| = {}", z.norm())));
    }
    let n = z.dimension_n();
    let vertical = [j_unchecked(1, z), j_unchecked(2, z), j_unchecked(3, z)];
    let mut spanned: Vec<QuatVector> = vec![z.clone()];
    spanned.extend(vertical.iter().cloned());
    let mut horizontal = Vec::with_capacity(4 * n - 4);

    for idx in 0..4 * n {
        if horizontal.len() == 4 * n - 4 {
            break;
        }
        let e = QuatVector::basis(n, idx);
        // modified Gram-Schmidt, applied twice
        let r = project_out(&project_out(&e, &spanned), &spanned);
        let norm = r.norm();
        if norm < 0.5 {
            continue;
        }
        let seed = r.scale(1.0 / norm);
        let group = [seed.clone(), j_unchecked(1, &seed), j_unchecked(2, &seed), j_unchecked(3, &seed)];
        for g in group {
            spanned.push(g.clone());
            horizontal.push(g);
        }
    }
    debug_assert_eq!(horizontal.len(), 4 * n - 4);
    Ok(TangentFrame { base_point: z.clone(), vertical, horizontal })
}

/// Berger deformation parameter of the round metric along the Hopf fibres.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BergerParams {
    lambda: f64,
}

impl BergerParams {
    pub fn new(lambda: f64) -> Result<Self> {
        if !(lambda > 0.0 && lambda.is_finite()) {
            return Err(invalid(format!("Berger parameter must be positive, got {lambda}")));
        }
        Ok(Self { lambda })
    }

    /// The parameter carried by the polar form of the ambient metric at radius rho.
    pub fn at_radius(rho: f64) -> Result<Self> {
        Self::new(rho.cosh().powi(2))
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}

/// e_lambda(u, v) for vectors given in frame coordinates (3 vertical, then 4n-4 horizontal).
pub fn berger_inner(p: BergerParams, frame: &TangentFrame, u: &[f64], v: &[f64]) -> Result<f64> {
    let dim = frame.dim();
    if u.len() != dim || v.len() != dim {
        return Err(invalid(format!(
            "frame coordinates need length {dim}, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    let vertical: f64 = u[..3].iter().zip(&v[..3]).map(|(a, b)| a * b).sum();
    let horizontal: f64 = u[3..].iter().zip(&v[3..]).map(|(a, b)| a * b).sum();
    Ok(p.lambda * vertical + horizontal)
}

/// A symmetric bilinear form on a tangent space, playing the role of the ambient metric.
pub trait InnerProduct {
    fn inner(&self, a: &QuatVector, b: &QuatVector) -> f64;
}

/// The flat model of a tangent space of HH^n at any point: orthonormal coordinates.
#[derive(Debug, Clone, Copy, Default)]
pub struct Euclidean;

impl InnerProduct for Euclidean {
    fn inner(&self, a: &QuatVector, b: &QuatVector) -> f64 {
        a.dot(b)
    }
}

impl<F> InnerProduct for F
where
    F: Fn(&QuatVector, &QuatVector) -> f64,
{
    fn inner(&self, a: &QuatVector, b: &QuatVector) -> f64 {
        self(a, b)
    }
}

/// Riemann tensor of quaternionic hyperbolic space (holomorphic sectional curvature -4),
/// evaluated from its closed form in the metric `g`.
pub fn curvature_tensor<G: InnerProduct + ?Sized>(
    x: &QuatVector,
    y: &QuatVector,
    z: &QuatVector,
    w: &QuatVector,
    g: &G,
) -> Result<f64> {
    x.check_same_dim(y)?;
    x.check_same_dim(z)?;
    x.check_same_dim(w)?;
    let mut r = -g.inner(x, z) * g.inner(y, w) + g.inner(x, w) * g.inner(y, z);
    for i in 1..=3 {
        let jz = j_unchecked(i, z);
        let jw = j_unchecked(i, w);
        let jy = j_unchecked(i, y);
        r -= g.inner(x, &jz) * g.inner(y, &jw) - g.inner(x, &jw) * g.inner(y, &jz);
        r -= 2.0 * g.inner(x, &jy) * g.inner(z, &jw);
    }
    Ok(r)
}

/// Sectional curvature -1 - 3 Σ ḡ(X, J_i Y)² of the plane spanned by an orthonormal pair.
pub fn sectional(x: &QuatVector, y: &QuatVector) -> Result<f64> {
    sectional_in(&Euclidean, x, y)
}

pub fn sectional_in<G: InnerProduct + ?Sized>(g: &G, x: &QuatVector, y: &QuatVector) -> Result<f64> {
    x.check_same_dim(y)?;
    let (xx, yy, xy) = (g.inner(x, x), g.inner(y, y), g.inner(x, y));
    if (xx - 1.0).abs() > ORTHO_TOL || (yy - 1.0).abs() > ORTHO_TOL || xy.abs() > ORTHO_TOL {
        return Err(invalid(format!(
            "sectional curvature needs an orthonormal pair: |X|² = {xx}, |Y|² = {yy}, <X,Y> = {xy}"
        )));
    }
    let proj: f64 = (1..=3).map(|i| g.inner(x, &j_unchecked(i, y)).powi(2)).sum();
    Ok(-1.0 - 3.0 * proj)
}

/// Ricci curvature of the unit vector `u`, traced over the standard orthonormal basis.
pub fn ricci(u: &QuatVector) -> f64 {
    let n = u.dimension_n();
    (0..4 * n)
        .map(|a| {
            let e = QuatVector::basis(n, a);
            curvature_tensor(&e, u, &e, u, &Euclidean).expect("dimensions agree")
        })
        .sum()
}

/// Einstein constant -4(n+2) of HH^n.
pub fn einstein_constant(n: usize) -> f64 {
    -4.0 * (n as f64 + 2.0)
}

#[derive(Debug, Clone, Serialize)]
pub struct RicciReport {
    pub n: usize,
    pub samples: usize,
    pub expected: f64,
    pub max_error: f64,
}

const RICCI_SEED: u64 = 0x5eed_0001;

/// Samples unit directions and reports the worst deviation of Ric(u,u) from -4(n+2).
pub fn ricci_check(n: usize, samples: usize) -> Result<RicciReport> {
    if n < 2 || samples == 0 {
        return Err(invalid(format!("ricci_check needs n >= 2 and samples >= 1, got n={n}, samples={samples}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(RICCI_SEED ^ n as u64);
    let expected = einstein_constant(n);
    let max_error = (0..samples)
        .map(|_| (ricci(&QuatVector::random_unit(n, &mut rng)) - expected).abs())
        .fold(0.0, f64::max);
    Ok(RicciReport { n, samples, expected, max_error })
}

/// Random pair orthonormal in the Euclidean tangent model.
pub fn random_orthonormal_pair<R: Rng + ?Sized>(n: usize, rng: &mut R) -> (QuatVector, QuatVector) {
    let x = QuatVector::random_unit(n, rng);
    loop {
        let y = QuatVector::random_unit(n, rng);
        let y = y.axpy(-x.dot(&y), &x);
        let norm = y.norm();
        if norm > 1e-3 {
            return (x, y.scale(1.0 / norm));
        }
    }
}

/// Unit vector orthogonal to the quaternionic line of `x`.
pub fn random_quaternionic_orthogonal<R: Rng + ?Sized>(x: &QuatVector, rng: &mut R) -> QuatVector {
    let n = x.dimension_n();
    let line = [x.clone(), j_unchecked(1, x), j_unchecked(2, x), j_unchecked(3, x)];
    loop {
        let y = project_out(&project_out(&QuatVector::random_unit(n, rng), &line), &line);
        let norm = y.norm();
        if norm > 1e-3 {
            return y.scale(1.0 / norm);
        }
    }
}

/// Summary of every closed-form ambient check, as printed by `verify-ambient`.
#[derive(Debug, Clone, Serialize)]
pub struct AmbientReport {
    pub n: usize,
    pub samples: usize,
    /// Worst excursion of the sectional curvature outside [-4, -1].
    pub sectional_range_violation: f64,
    pub sectional_min: f64,
    pub sectional_max: f64,
    /// max |sectional - R(X,Y,X,Y)|
    pub sectional_tensor_mismatch: f64,
    /// max |K(X, J_i X) + 4|
    pub holomorphic_error: f64,
    /// max |K(X, Y) + 1| for Y orthogonal to the quaternionic line of X
    pub totally_real_error: f64,
    pub antisymmetry_error: f64,
    pub pair_symmetry_error: f64,
    pub bianchi_error: f64,
    pub ricci: RicciReport,
}

impl AmbientReport {
    pub fn passes(&self) -> bool {
        self.sectional_range_violation < 1e-10
            && self.sectional_tensor_mismatch < 1e-12
            && self.holomorphic_error < 1e-10
            && self.totally_real_error < 1e-10
            && self.antisymmetry_error < 1e-10
            && self.pair_symmetry_error < 1e-10
            && self.bianchi_error < 1e-10
            && self.ricci.max_error < 1e-10
    }
}

/// Runs the sectional, symmetry and Einstein checks with `samples` random draws.
pub fn verify_ambient(n: usize, samples: usize, seed: u64) -> Result<AmbientReport> {
    if n < 2 || samples == 0 {
        return Err(invalid(format!("verify_ambient needs n >= 2 and samples >= 1, got n={n}, samples={samples}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = Euclidean;
    let mut rep = AmbientReport {
        n,
        samples,
        sectional_range_violation: 0.0,
        sectional_min: f64::INFINITY,
        sectional_max: f64::NEG_INFINITY,
        sectional_tensor_mismatch: 0.0,
        holomorphic_error: 0.0,
        totally_real_error: 0.0,
        antisymmetry_error: 0.0,
        pair_symmetry_error: 0.0,
        bianchi_error: 0.0,
        ricci: ricci_check(n, samples.min(1000))?,
    };
    for _ in 0..samples {
        let (x, y) = random_orthonormal_pair(n, &mut rng);
        let k = sectional(&x, &y)?;
        rep.sectional_min = rep.sectional_min.min(k);
        rep.sectional_max = rep.sectional_max.max(k);
        rep.sectional_range_violation = rep.sectional_range_violation.max((-4.0 - k).max(k + 1.0).max(0.0));
        let r = curvature_tensor(&x, &y, &x, &y, &g)?;
        rep.sectional_tensor_mismatch = rep.sectional_tensor_mismatch.max((k - r).abs());

        for i in 1..=3 {
            let kh = sectional(&x, &j_unchecked(i, &x))?;
            rep.holomorphic_error = rep.holomorphic_error.max((kh + 4.0).abs());
        }
        let yq = random_quaternionic_orthogonal(&x, &mut rng);
        rep.totally_real_error = rep.totally_real_error.max((sectional(&x, &yq)? + 1.0).abs());

        let z = QuatVector::random_unit(n, &mut rng);
        let w = QuatVector::random_unit(n, &mut rng);
        let rxyzw = curvature_tensor(&x, &y, &z, &w, &g)?;
        let ryxzw = curvature_tensor(&y, &x, &z, &w, &g)?;
        let rzwxy = curvature_tensor(&z, &w, &x, &y, &g)?;
        let ryzxw = curvature_tensor(&y, &z, &x, &w, &g)?;
        let rzxyw = curvature_tensor(&z, &x, &y, &w, &g)?;
        rep.antisymmetry_error = rep.antisymmetry_error.max((rxyzw + ryxzw).abs());
        rep.pair_symmetry_error = rep.pair_symmetry_error.max((rxyzw - rzwxy).abs());
        rep.bianchi_error = rep.bianchi_error.max((rxyzw + ryzxw + rzxyw).abs());
    }
    Ok(rep)
}
