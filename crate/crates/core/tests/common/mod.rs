//! Finite-difference model of the round Hessian of θ-only functions on S^{4n-1}.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use qimcf::geometry::{adapted_frame, reduced_weight, sigma_hessian_adapted};

pub fn unit_gaussian(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.into_iter().map(|x| x / norm).collect()
}

/// θ of the direction of y: arccos of the length of the first quaternion of y/|y|.
pub fn theta_of(y: &DVector<f64>) -> f64 {
    let first = y.rows(0, 4).norm() / y.norm();
    first.min(1.0).acos()
}

pub fn point(theta: f64, a: &[f64], b: &[f64]) -> DVector<f64> {
    let mut z: Vec<f64> = a.iter().map(|x| theta.cos() * x).collect();
    z.extend(b.iter().map(|x| theta.sin() * x));
    DVector::from_vec(z)
}

pub fn frame_vectors(theta: f64, a: &[f64], b: &[f64]) -> Vec<DVector<f64>> {
    adapted_frame(theta, a, b).unwrap().iter().map(|q| DVector::from_column_slice(q.components())).collect()
}

/// u(θ) with its first two derivatives.
pub fn test_function(t: f64) -> (f64, f64, f64) {
    let u = (2.0 * t).cos() + 0.3 * t.sin().powi(2) + 0.2 * (3.0 * t).sin();
    let u_t = -2.0 * (2.0 * t).sin() + 0.3 * (2.0 * t).sin() + 0.6 * (3.0 * t).cos();
    let u_tt = -4.0 * (2.0 * t).cos() + 0.6 * (2.0 * t).cos() - 1.8 * (3.0 * t).sin();
    (u, u_t, u_tt)
}

/// Worst discrepancy found by [`hessian_discrepancy`].
#[derive(Debug, Clone, Copy)]
pub struct HessianCheck {
    pub entry: f64,
    pub laplacian: f64,
    pub frame_tangency: f64,
}

/// Compares the adapted-frame Hessian model, and its trace u'' + w u', with Richardson-extrapolated
/// central differences (steps h, h/2) of u∘θ at `samples` random points. u∘θ is extended to R^{4n}
/// as a degree-0 function, so its Euclidean Hessian on tangent vectors is the round one.
pub fn hessian_discrepancy(n: usize, samples: usize, seed: u64, h: f64) -> HessianCheck {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst = HessianCheck { entry: 0.0, laplacian: 0.0, frame_tangency: 0.0 };
    for _ in 0..samples {
        let theta = rng.random_range(0.15..1.42);
        let a = unit_gaussian(&mut rng, 4);
        let b = unit_gaussian(&mut rng, 4 * n - 4);
        let z = point(theta, &a, &b);
        let frame = frame_vectors(theta, &a, &b);
        for e in &frame {
            worst.frame_tangency = worst.frame_tangency.max(e.dot(&z).abs());
        }
        let u = |y: &DVector<f64>| test_function(theta_of(y)).0;
        let (_, u_t, u_tt) = test_function(theta);
        let model = sigma_hessian_adapted(n, theta, u_t, u_tt);
        let mut laplacian = 0.0;
        for (i, x) in frame.iter().enumerate() {
            for (j, y) in frame.iter().enumerate() {
                let mixed = |h: f64| {
                    (u(&(&z + h * x + h * y)) - u(&(&z + h * x - h * y)) - u(&(&z - h * x + h * y))
                        + u(&(&z - h * x - h * y)))
                        / (4.0 * h * h)
                };
                // Richardson step removes the O(h²) term, which dominates near θ = 0
                let fd = (4.0 * mixed(h / 2.0) - mixed(h)) / 3.0;
                worst.entry = worst.entry.max((fd - model[(i, j)]).abs());
                if i == j {
                    laplacian += fd;
                }
            }
        }
        let reduced = u_tt + reduced_weight(n, theta).unwrap() * u_t;
        worst.laplacian = worst.laplacian.max((laplacian - reduced).abs() / (1.0 + reduced.abs()));
    }
    worst
}
