//! Benchmark systems: the Crommelin–Vanden-Eijnden slow/fast model in its
//! original and flattened coordinates, an isotropic OU control, and a
//! simple Euler–Maruyama integrator for consistency checks.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{GenspecError, Result};
use crate::sde::{Axis, Boundary, DomainSpec, SdeSystem};

/// Default benchmark domain [0, 2pi) x [-l, l] with a periodic x-axis.
pub fn benchmark_domain(l: f64, nx: usize, ny: usize) -> Result<DomainSpec> {
    DomainSpec::new(vec![
        Axis {
            a: 0.0,
            b: 2.0 * std::f64::consts::PI,
            boundary: Boundary::Periodic,
            n: nx,
        },
        Axis {
            a: -l,
            b: l,
            boundary: Boundary::NeumannZero,
            n: ny,
        },
    ])
}

/// Slow/fast benchmark in original coordinates:
///   dx = sin(y) dt + sqrt(1 + sin(y)/2) dW1
///   dy = (sin(x) - y)/eps dt + (1/sqrt(eps)) dW2
pub fn crommelin_original(eps: f64, l: f64, nx: usize, ny: usize) -> Result<SdeSystem> {
    if eps <= 0.0 {
        return Err(GenspecError::NonPositiveEpsilon(eps));
    }
    let domain = benchmark_domain(l, nx, ny)?;
    SdeSystem::from_fns(
        2,
        2,
        domain,
        move |z| vec![z[1].sin(), (z[0].sin() - z[1]) / eps],
        move |z| {
            vec![
                (1.0 + 0.5 * z[1].sin()).max(0.0).sqrt(),
                0.0,
                0.0,
                1.0 / eps.sqrt(),
            ]
        },
    )
}

/// The same system after the global change of variables x -> x + sin(y),
/// which bends the fast fibres into vertical lines:
///   dx = [sin(y) + (cos(y) (sin(x - sin(y)) - y) - sin(y)/2)/eps] dt
///        + sqrt(1 + sin(y)/2) dW1 + (cos(y)/sqrt(eps)) dW2
///   dy = (sin(x - sin(y)) - y)/eps dt + (1/sqrt(eps)) dW2
pub fn crommelin_transformed(eps: f64, l: f64, nx: usize, ny: usize) -> Result<SdeSystem> {
    if eps <= 0.0 {
        return Err(GenspecError::NonPositiveEpsilon(eps));
    }
    let domain = benchmark_domain(l, nx, ny)?;
    SdeSystem::from_fns(
        2,
        2,
        domain,
        move |z| {
            let (x, y) = (z[0], z[1]);
            let fast = ((x - y.sin()).sin() - y) / eps;
            vec![
                y.sin() + y.cos() * fast - 0.5 * y.sin() / eps,
                fast,
            ]
        },
        move |z| {
            let y = z[1];
            vec![
                (1.0 + 0.5 * y.sin()).max(0.0).sqrt(),
                y.cos() / eps.sqrt(),
                0.0,
                1.0 / eps.sqrt(),
            ]
        },
    )
}

/// Isotropic Ornstein-Uhlenbeck control system dz = -z dt + dW on
/// [-l, l]^2; it has no timescale separation at all.
pub fn isotropic_ou(l: f64, n: usize) -> Result<SdeSystem> {
    let domain = DomainSpec::new(vec![
        Axis {
            a: -l,
            b: l,
            boundary: Boundary::DirichletZero,
            n,
        },
        Axis {
            a: -l,
            b: l,
            boundary: Boundary::DirichletZero,
            n,
        },
    ])?;
    SdeSystem::from_fns(
        2,
        2,
        domain,
        |z| vec![-z[0], -z[1]],
        |_| vec![1.0, 0.0, 0.0, 1.0],
    )
}

/// Euler-Maruyama sample path. Periodic coordinates wrap into the domain;
/// the trajectory is aborted with `BlowUp` when any coordinate exceeds
/// 1e6 in magnitude.
pub fn euler_maruyama(
    sys: &SdeSystem,
    z0: &[f64],
    dt: f64,
    steps: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let d = sys.dim;
    let m = sys.noise_dim;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut z = z0.to_vec();
    let mut path = Vec::with_capacity(steps + 1);
    path.push(z.clone());
    let sqrt_dt = dt.sqrt();
    for step in 0..steps {
        let mu = sys.drift_at(&z);
        let sigma = sys.sigma_at(&z);
        let dw: Vec<f64> = (0..m)
            .map(|_| {
                let g: f64 = StandardNormal.sample(&mut rng);
                g * sqrt_dt
            })
            .collect();
        for i in 0..d {
            let mut incr = mu[i] * dt;
            for j in 0..m {
                incr += sigma[[i, j]] * dw[j];
            }
            z[i] += incr;
            if !z[i].is_finite() || z[i].abs() > 1e6 {
                let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
                return Err(GenspecError::BlowUp { step, norm });
            }
        }
        for (i, ax) in sys.domain.axes.iter().enumerate() {
            if ax.boundary.is_periodic() {
                z[i] = ax.wrap(z[i]);
            }
        }
        path.push(z.clone());
    }
    Ok(path)
}

/// Analytic fibre-operator eigenvalues of the benchmark: the fast process
/// conditioned on a fibre is an OU process with rate 1/eps, so the k-th
/// eigenvalue is -k/eps.
pub fn fibre_reference_eigenvalue(k: usize, eps: f64) -> f64 {
    -(k as f64) / eps
}

/// Homogenized slow drift of the benchmark, b(x) = exp(-1/4) sin(sin x).
pub fn homogenized_drift(x: f64) -> f64 {
    (-0.25f64).exp() * (x.sin()).sin()
}

/// Homogenized slow diffusion D(x) = 1 + exp(-1/4) sin(sin x) / 2
/// (squared noise amplitude of the averaged equation).
pub fn homogenized_diffusion(x: f64) -> f64 {
    1.0 + 0.5 * (-0.25f64).exp() * (x.sin()).sin()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    #[test]
    fn original_coefficients_at_reference_points() {
        let eps = 1e-3;
        let sys = crommelin_original(eps, 5.0, 50, 51).unwrap();
        let (mu, d) = sys.evaluate_coefficients(&[PI / 2.0, 0.0]).unwrap();
        // x = pi/2, y = 0: drift = (0, 1/eps); D = diag(1, 1/eps)
        assert_abs_diff_eq!(mu[0], 0.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[1], 1.0 / eps, epsilon = 1e-9);
        assert_abs_diff_eq!(d[[0, 0]], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d[[1, 1]], 1.0 / eps, epsilon = 1e-9);
        assert_abs_diff_eq!(d[[0, 1]], 0.0, epsilon = 1e-14);

        let (mu, d) = sys.evaluate_coefficients(&[0.0, PI / 2.0]).unwrap();
        // y = pi/2: drift_x = 1, D11 = 1.5
        assert_abs_diff_eq!(mu[0], 1.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu[1], -PI / 2.0 / eps, epsilon = 1e-9);
        assert_abs_diff_eq!(d[[0, 0]], 1.5, epsilon = 1e-14);
    }

    #[test]
    fn transformed_reduces_to_original_on_centerline() {
        // at y = 0 the shift sin(y) vanishes and cos(y) = 1
        let eps = 1e-3;
        let orig = crommelin_original(eps, 5.0, 50, 51).unwrap();
        let trans = crommelin_transformed(eps, 5.0, 50, 51).unwrap();
        let x = 1.2345;
        let (mu_o, _) = orig.evaluate_coefficients(&[x, 0.0]).unwrap();
        let (mu_t, d_t) = trans.evaluate_coefficients(&[x, 0.0]).unwrap();
        // fast drift identical at y = 0
        assert_abs_diff_eq!(mu_t[1], mu_o[1], epsilon = 1e-9);
        // slow drift gains the cos(y)*fast and -sin(y)/(2 eps) terms;
        // at y = 0 only the first survives
        assert_abs_diff_eq!(mu_t[0], mu_o[0] + mu_o[1], epsilon = 1e-9);
        // diffusion picks up the cross term cos(y)/sqrt(eps)
        assert_abs_diff_eq!(d_t[[0, 1]], 1.0 / eps, epsilon = 1e-9);
        assert_abs_diff_eq!(d_t[[1, 1]], 1.0 / eps, epsilon = 1e-9);
        assert_abs_diff_eq!(d_t[[0, 0]], 1.0 + 1.0 / eps, epsilon = 1e-9);
    }

    #[test]
    fn transformed_drift_is_ito_pushforward() {
        // The map T(x, y) = (x + sin y, y) sends the original process to
        // the transformed one. Check the Ito drift of the first component:
        //   mu_x' = mu_x + cos(y) mu_y - sin(y) D_yy / 2   (y-diagonal Hessian)
        let eps = 1e-2;
        let orig = crommelin_original(eps, 5.0, 50, 51).unwrap();
        let trans = crommelin_transformed(eps, 5.0, 50, 51).unwrap();
        for &(u, y) in &[(0.7, 0.3), (2.0, -1.1), (4.0, 2.2)] {
            let (mu_o, d_o) = orig.evaluate_coefficients(&[u, y]).unwrap();
            let expected = mu_o[0] + y.cos() * mu_o[1] - 0.5 * y.sin() * d_o[[1, 1]];
            // evaluate the transformed drift at the image point x = u + sin y
            let x = u + y.sin();
            let (mu_t, _) = trans.evaluate_coefficients(&[x, y]).unwrap();
            assert_abs_diff_eq!(mu_t[0], expected, epsilon = 1e-8 / eps);
        }
    }

    #[test]
    fn nonpositive_eps_rejected() {
        assert!(matches!(
            crommelin_original(0.0, 5.0, 50, 51),
            Err(GenspecError::NonPositiveEpsilon { .. })
        ));
        assert!(matches!(
            crommelin_transformed(-1.0, 5.0, 50, 51),
            Err(GenspecError::NonPositiveEpsilon { .. })
        ));
    }

    #[test]
    fn euler_maruyama_deterministic_and_reproducible() {
        let sys = isotropic_ou(8.0, 16).unwrap();
        let a = euler_maruyama(&sys, &[1.0, -0.5], 1e-3, 1000, 42).unwrap();
        let b = euler_maruyama(&sys, &[1.0, -0.5], 1e-3, 1000, 42).unwrap();
        assert_eq!(a.len(), 1001);
        assert_eq!(a, b);
        let c = euler_maruyama(&sys, &[1.0, -0.5], 1e-3, 1000, 43).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn ou_path_statistics_match_stationary_law() {
        // long OU path: mean ~ 0, variance ~ 1/2 per coordinate
        let sys = isotropic_ou(8.0, 16).unwrap();
        let path = euler_maruyama(&sys, &[0.0, 0.0], 1e-2, 200_000, 7).unwrap();
        let skip = 10_000;
        let n = (path.len() - skip) as f64;
        let mean: f64 = path[skip..].iter().map(|p| p[0]).sum::<f64>() / n;
        let var: f64 = path[skip..].iter().map(|p| p[0] * p[0]).sum::<f64>() / n;
        assert!(mean.abs() < 0.05, "mean = {mean}");
        assert!((var - 0.5).abs() < 0.05, "var = {var}");
    }

    #[test]
    fn blow_up_detected() {
        let domain = DomainSpec::new(vec![Axis {
            a: -10.0,
            b: 10.0,
            boundary: Boundary::DirichletZero,
            n: 16,
        }])
        .unwrap();
        let sys = SdeSystem::from_fns(1, 1, domain, |z| vec![z[0] * z[0]], |_| vec![0.0]).unwrap();
        assert!(matches!(
            euler_maruyama(&sys, &[5.0], 1.0, 100, 1),
            Err(GenspecError::BlowUp { .. })
        ));
    }

    #[test]
    fn periodic_wrap_keeps_x_in_domain() {
        let eps = 0.1;
        let sys = crommelin_original(eps, 5.0, 32, 33).unwrap();
        let path = euler_maruyama(&sys, &[0.1, 0.0], 1e-4, 20_000, 3).unwrap();
        for p in &path {
            assert!((0.0..2.0 * PI).contains(&p[0]), "x left domain: {}", p[0]);
        }
    }

    #[test]
    fn homogenized_coefficients_reference_values() {
        let c = (-0.25f64).exp();
        assert_abs_diff_eq!(
            homogenized_drift(PI / 2.0),
            c * 1.0f64.sin(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(homogenized_drift(0.0), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(
            homogenized_diffusion(0.0),
            1.0,
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(
            homogenized_diffusion(PI / 2.0),
            1.0 + 0.5 * c * 1.0f64.sin(),
            epsilon = 1e-15
        );
    }
}
