//! Domain types shared by every other module: drift-diffusion systems,
//! tensor-product collocation domains, and grid-sampled scalar fields.

use std::f64::consts::PI;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{GenspecError, Result};

/// Boundary treatment of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Boundary {
    /// Equispaced Fourier nodes, right endpoint excluded.
    Periodic,
    /// Chebyshev-Gauss-Lobatto nodes, value forced to zero at endpoints.
    DirichletZero,
    /// Chebyshev-Gauss-Lobatto nodes, normal derivative forced to zero.
    NeumannZero,
}

impl Boundary {
    pub fn is_periodic(self) -> bool {
        matches!(self, Boundary::Periodic)
    }
}

/// One axis of a tensor-product collocation domain.
#[derive(Debug, Clone)]
pub struct Axis {
    pub a: f64,
    pub b: f64,
    pub boundary: Boundary,
    pub n: usize,
}

impl Axis {
    /// Collocation nodes in ascending order. Periodic axes exclude the
    /// right endpoint; Chebyshev axes include both endpoints.
    pub fn nodes(&self) -> Array1<f64> {
        match self.boundary {
            Boundary::Periodic => {
                let h = (self.b - self.a) / self.n as f64;
                Array1::from_iter((0..self.n).map(|j| self.a + j as f64 * h))
            }
            _ => {
                let m = (self.n - 1) as f64;
                Array1::from_iter((0..self.n).map(|j| {
                    let t = -(PI * j as f64 / m).cos(); // ascending in [-1, 1]
                    self.a + (t + 1.0) * 0.5 * (self.b - self.a)
                }))
            }
        }
    }

    pub fn width(&self) -> f64 {
        self.b - self.a
    }

    /// Wrap a coordinate into [a, b) on periodic axes; identity otherwise.
    pub fn wrap(&self, x: f64) -> f64 {
        if self.boundary.is_periodic() {
            let w = self.width();
            let mut t = (x - self.a).rem_euclid(w);
            if t >= w {
                t = 0.0;
            }
            self.a + t
        } else {
            x
        }
    }
}

/// Tensor-product collocation domain.
#[derive(Debug, Clone)]
pub struct DomainSpec {
    pub axes: Vec<Axis>,
}

impl DomainSpec {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        for (i, ax) in axes.iter().enumerate() {
            if !(ax.a < ax.b) {
                return Err(GenspecError::InvalidGrid(format!(
                    "axis {i}: bounds [{}, {}] are not increasing",
                    ax.a, ax.b
                )));
            }
            if ax.n < 8 {
                return Err(GenspecError::InvalidGrid(format!(
                    "axis {i}: grid size {} < 8",
                    ax.n
                )));
            }
            if ax.boundary.is_periodic() && ax.n % 2 != 0 {
                return Err(GenspecError::InvalidGrid(format!(
                    "axis {i}: periodic grid size {} must be even",
                    ax.n
                )));
            }
        }
        Ok(DomainSpec { axes })
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    /// Total number of grid points.
    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Row-major flat index of a multi-index.
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut f = 0;
        for (a, &i) in self.axes.iter().zip(idx) {
            f = f * a.n + i;
        }
        f
    }

    /// Decode a flat index into a multi-index.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let d = self.dim();
        let mut idx = vec![0; d];
        for a in (0..d).rev() {
            idx[a] = flat % self.axes[a].n;
            flat /= self.axes[a].n;
        }
        idx
    }

    /// Coordinates of the grid point with the given flat index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        let idx = self.multi_index(flat);
        self.axes
            .iter()
            .zip(&idx)
            .map(|(a, &i)| a.nodes()[i])
            .collect()
    }

    /// Wrap periodic coordinates, check non-periodic ones against bounds.
    pub fn locate(&self, z: &[f64]) -> Result<Vec<f64>> {
        let tol = 1e-12;
        let mut out = Vec::with_capacity(self.dim());
        for (axis_idx, (ax, &x)) in self.axes.iter().zip(z).enumerate() {
            if ax.boundary.is_periodic() {
                out.push(ax.wrap(x));
            } else {
                let span = ax.width();
                if x < ax.a - tol * span || x > ax.b + tol * span {
                    return Err(GenspecError::OutOfDomain {
                        point: z.to_vec(),
                        axis: axis_idx,
                    });
                }
                out.push(x.clamp(ax.a, ax.b));
            }
        }
        Ok(out)
    }

    /// Quadrature weights for the full grid (trapezoidal on periodic axes,
    /// Clenshaw-Curtis on Chebyshev axes), flattened row-major.
    pub fn quadrature_weights(&self) -> Array1<f64> {
        let per_axis: Vec<Array1<f64>> = self.axes.iter().map(axis_quadrature).collect();
        let m = self.len();
        let mut w = Array1::ones(m);
        for flat in 0..m {
            let idx = self.multi_index(flat);
            for (a, &i) in per_axis.iter().zip(&idx) {
                w[flat] *= a[i];
            }
        }
        w
    }
}

/// Clenshaw-Curtis weights on CGL nodes (ascending), or uniform weights on
/// a periodic axis.
fn axis_quadrature(ax: &Axis) -> Array1<f64> {
    match ax.boundary {
        Boundary::Periodic => Array1::from_elem(ax.n, ax.width() / ax.n as f64),
        _ => {
            let n = ax.n;
            let m = n - 1;
            let mut w = Array1::zeros(n);
            // Standard Clenshaw-Curtis on [-1, 1] via cosine sums.
            for j in 0..n {
                let theta = PI * j as f64 / m as f64;
                let mut s = 1.0;
                for k in 1..=(m / 2) {
                    let c = if 2 * k == m { 1.0 } else { 2.0 };
                    s -= c * (2.0 * k as f64 * theta).cos() / ((4 * k * k - 1) as f64);
                }
                let cj = if j == 0 || j == m { 1.0 } else { 2.0 };
                w[j] = cj * s / m as f64;
            }
            w *= ax.width() / 2.0;
            w
        }
    }
}

type CoefficientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// An Ito drift-diffusion system on a tensor-product domain.
///
/// `drift` maps a point to the d drift components; `diffusion_factor` maps
/// a point to the d x noise_dim matrix sigma in row-major order. Both must
/// be deterministic.
#[derive(Clone)]
pub struct SdeSystem {
    pub dim: usize,
    pub noise_dim: usize,
    pub domain: DomainSpec,
    drift: CoefficientFn,
    diffusion_factor: CoefficientFn,
}

impl SdeSystem {
    pub fn new(
        dim: usize,
        noise_dim: usize,
        domain: DomainSpec,
        drift: CoefficientFn,
        diffusion_factor: CoefficientFn,
    ) -> Result<Self> {
        if dim == 0 || noise_dim > dim || domain.dim() != dim {
            return Err(GenspecError::InvalidGrid(format!(
                "inconsistent dimensions: d={dim}, l={noise_dim}, domain d={}",
                domain.dim()
            )));
        }
        Ok(SdeSystem {
            dim,
            noise_dim,
            domain,
            drift,
            diffusion_factor,
        })
    }

    /// Build from closures with native signatures.
    pub fn from_fns<F, G>(
        dim: usize,
        noise_dim: usize,
        domain: DomainSpec,
        drift: F,
        sigma: G,
    ) -> Result<Self>
    where
        F: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
        G: Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    {
        SdeSystem::new(dim, noise_dim, domain, Arc::new(drift), Arc::new(sigma))
    }

    pub fn drift_at(&self, z: &[f64]) -> Vec<f64> {
        (self.drift)(z)
    }

    /// The diffusion factor sigma as a d x noise_dim matrix.
    pub fn sigma_at(&self, z: &[f64]) -> Array2<f64> {
        let v = (self.diffusion_factor)(z);
        Array2::from_shape_vec((self.dim, self.noise_dim), v)
            .expect("diffusion factor has wrong length")
    }

    /// Drift vector and diffusion matrix D = sigma sigma^T, symmetrized.
    pub fn evaluate_coefficients(&self, z: &[f64]) -> Result<(Array1<f64>, Array2<f64>)> {
        let zc = self.domain.locate(z)?;
        let mu = Array1::from(self.drift_at(&zc));
        let sigma = self.sigma_at(&zc);
        let mut d_mat = sigma.dot(&sigma.t());
        // symmetrize to machine precision
        let dt = d_mat.t().to_owned();
        d_mat = (&d_mat + &dt) * 0.5;
        if mu.iter().any(|v| !v.is_finite()) || d_mat.iter().any(|v| !v.is_finite()) {
            return Err(GenspecError::NonFiniteCoefficient { point: z.to_vec() });
        }
        Ok((mu, d_mat))
    }
}

impl std::fmt::Debug for SdeSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SdeSystem")
            .field("dim", &self.dim)
            .field("noise_dim", &self.noise_dim)
            .field("domain", &self.domain)
            .finish()
    }
}

/// Values of a scalar field on the collocation grid, row-major.
#[derive(Debug, Clone)]
pub struct GridFunction {
    pub domain: DomainSpec,
    pub values: Array1<Complex64>,
    pub label: String,
}

impl GridFunction {
    pub fn new(domain: DomainSpec, values: Array1<Complex64>, label: impl Into<String>) -> Self {
        assert_eq!(
            values.len(),
            domain.len(),
            "value count must equal grid size"
        );
        GridFunction {
            domain,
            values,
            label: label.into(),
        }
    }

    pub fn from_real(domain: DomainSpec, values: Array1<f64>, label: impl Into<String>) -> Self {
        let v = values.mapv(|x| Complex64::new(x, 0.0));
        GridFunction::new(domain, v, label)
    }

    /// Sample a function of the grid coordinates.
    pub fn sample<F: Fn(&[f64]) -> Complex64>(
        domain: DomainSpec,
        f: F,
        label: impl Into<String>,
    ) -> Self {
        let m = domain.len();
        let values = Array1::from_iter((0..m).map(|i| f(&domain.point(i))));
        GridFunction::new(domain, values, label)
    }

    /// Real part as a new grid function.
    pub fn real_part(&self) -> GridFunction {
        GridFunction {
            domain: self.domain.clone(),
            values: self.values.mapv(|c| Complex64::new(c.re, 0.0)),
            label: format!("Re({})", self.label),
        }
    }

    /// Tensor-product barycentric interpolation at an arbitrary point.
    /// Chebyshev axes use polynomial barycentric weights; periodic axes the
    /// trigonometric barycentric formula.
    pub fn interpolate(&self, z: &[f64]) -> Result<Complex64> {
        let zc = self.domain.locate(z)?;
        // Reduce axis by axis, starting from the last (contiguous) axis.
        let mut current = self.values.to_vec();
        for axis_rev in (0..self.domain.dim()).rev() {
            let ax = &self.domain.axes[axis_rev];
            let n = ax.n;
            let blocks = current.len() / n;
            let mut next = Vec::with_capacity(blocks);
            for b in 0..blocks {
                let slice = &current[b * n..(b + 1) * n];
                next.push(interp_axis(ax, slice, zc[axis_rev]));
            }
            current = next;
        }
        debug_assert_eq!(current.len(), 1);
        Ok(current[0])
    }

    /// Range of the real part (max - min).
    pub fn real_range(&self) -> f64 {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in self.values.iter() {
            lo = lo.min(v.re);
            hi = hi.max(v.re);
        }
        hi - lo
    }
}

/// 1-D barycentric interpolation along a single axis.
fn interp_axis(ax: &Axis, f: &[Complex64], x: f64) -> Complex64 {
    let nodes = ax.nodes();
    let n = ax.n;
    match ax.boundary {
        Boundary::Periodic => {
            // Trigonometric barycentric formula for even n.
            let scale = 2.0 * PI / ax.width();
            let t = (x - ax.a) * scale;
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = 0.0;
            for j in 0..n {
                let tj = (nodes[j] - ax.a) * scale;
                let dt = 0.5 * (t - tj);
                if dt.sin().abs() < 1e-14 {
                    return f[j];
                }
                let w = if j % 2 == 0 { 1.0 } else { -1.0 };
                let c = w / dt.tan();
                num += f[j] * c;
                den += c;
            }
            num / den
        }
        _ => {
            let mut num = Complex64::new(0.0, 0.0);
            let mut den = 0.0;
            for j in 0..n {
                let dx = x - nodes[j];
                if dx.abs() < 1e-14 * ax.width() {
                    return f[j];
                }
                let mut w = if j % 2 == 0 { 1.0 } else { -1.0 };
                if j == 0 || j == n - 1 {
                    w *= 0.5;
                }
                let c = w / dx;
                num += f[j] * c;
                den += c;
            }
            num / den
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn fourier_axis(n: usize) -> Axis {
        Axis {
            a: 0.0,
            b: 2.0 * PI,
            boundary: Boundary::Periodic,
            n,
        }
    }

    fn cheb_axis(a: f64, b: f64, n: usize) -> Axis {
        Axis {
            a,
            b,
            boundary: Boundary::DirichletZero,
            n,
        }
    }

    #[test]
    fn parabola_coefficients() {
        // Diffusion on the embedded parabola: mu=(0,1), sigma=(1,2x)^T.
        let dom = DomainSpec::new(vec![cheb_axis(-3.0, 3.0, 16), cheb_axis(-1.0, 9.0, 16)]).unwrap();
        let sys = SdeSystem::from_fns(
            2,
            1,
            dom,
            |_z| vec![0.0, 1.0],
            |z| vec![1.0, 2.0 * z[0]],
        )
        .unwrap();
        let (mu, d) = sys.evaluate_coefficients(&[1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(mu[0], 0.0);
        assert_abs_diff_eq!(mu[1], 1.0);
        assert_abs_diff_eq!(d[[0, 0]], 1.0);
        assert_abs_diff_eq!(d[[0, 1]], 2.0);
        assert_abs_diff_eq!(d[[1, 0]], 2.0);
        assert_abs_diff_eq!(d[[1, 1]], 4.0);
    }

    #[test]
    fn identity_sigma_gives_identity_d() {
        let dom = DomainSpec::new(vec![cheb_axis(-1.0, 1.0, 8), cheb_axis(-1.0, 1.0, 8)]).unwrap();
        let sys = SdeSystem::from_fns(
            2,
            2,
            dom,
            |_| vec![0.0, 0.0],
            |_| vec![1.0, 0.0, 0.0, 1.0],
        )
        .unwrap();
        let (mu, d) = sys.evaluate_coefficients(&[0.3, -0.2]).unwrap();
        assert_eq!(mu.to_vec(), vec![0.0, 0.0]);
        assert_abs_diff_eq!(d[[0, 0]], 1.0);
        assert_abs_diff_eq!(d[[1, 1]], 1.0);
        assert_abs_diff_eq!(d[[0, 1]], 0.0);
    }

    #[test]
    fn nonfinite_coefficient_reported() {
        let dom = DomainSpec::new(vec![cheb_axis(-1.0, 1.0, 8)]).unwrap();
        let sys =
            SdeSystem::from_fns(1, 1, dom, |z| vec![1.0 / z[0]], |_| vec![1.0]).unwrap();
        assert!(matches!(
            sys.evaluate_coefficients(&[0.0]),
            Err(GenspecError::NonFiniteCoefficient { .. })
        ));
    }

    #[test]
    fn interpolate_constant() {
        let dom = DomainSpec::new(vec![fourier_axis(16), cheb_axis(-5.0, 5.0, 11)]).unwrap();
        let f = GridFunction::sample(dom, |_| Complex64::new(1.0, 0.0), "one");
        let v = f.interpolate(&[1.234, 0.7]).unwrap();
        assert_abs_diff_eq!(v.re, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn interpolate_sin_on_fourier_grid() {
        let dom = DomainSpec::new(vec![fourier_axis(50)]).unwrap();
        let f = GridFunction::sample(dom, |z| Complex64::new(z[0].sin(), 0.0), "sin");
        let v = f.interpolate(&[1.3]).unwrap();
        assert_abs_diff_eq!(v.re, 1.3_f64.sin(), epsilon = 1e-10);
    }

    #[test]
    fn interpolate_quadratic_on_chebyshev_grid() {
        let dom = DomainSpec::new(vec![cheb_axis(-5.0, 5.0, 50)]).unwrap();
        let f = GridFunction::sample(dom, |z| Complex64::new(z[0] * z[0], 0.0), "y^2");
        let v = f.interpolate(&[0.7]).unwrap();
        assert_abs_diff_eq!(v.re, 0.49, epsilon = 1e-10);
    }

    #[test]
    fn interpolation_reproduces_nodes() {
        let dom = DomainSpec::new(vec![fourier_axis(10), cheb_axis(-2.0, 3.0, 9)]).unwrap();
        let f = GridFunction::sample(dom.clone(), |z| Complex64::new(z[0].cos() * z[1], 0.1), "g");
        for flat in [0usize, 7, 33, dom.len() - 1] {
            let p = dom.point(flat);
            let v = f.interpolate(&p).unwrap();
            assert_abs_diff_eq!(v.re, f.values[flat].re, epsilon = 1e-12);
            assert_abs_diff_eq!(v.im, f.values[flat].im, epsilon = 1e-12);
        }
    }

    #[test]
    fn out_of_domain_rejected() {
        let dom = DomainSpec::new(vec![cheb_axis(-1.0, 1.0, 9)]).unwrap();
        let f = GridFunction::sample(dom, |_| Complex64::new(0.0, 0.0), "z");
        assert!(matches!(
            f.interpolate(&[1.5]),
            Err(GenspecError::OutOfDomain { .. })
        ));
    }

    #[test]
    fn quadrature_integrates_gaussian() {
        let dom = DomainSpec::new(vec![cheb_axis(-8.0, 8.0, 64)]).unwrap();
        let w = dom.quadrature_weights();
        let nodes = dom.axes[0].nodes();
        let integral: f64 = nodes
            .iter()
            .zip(w.iter())
            .map(|(x, w)| w * (-x * x / 2.0).exp())
            .sum();
        assert_abs_diff_eq!(integral, (2.0 * PI).sqrt(), epsilon = 1e-10);
    }

    #[test]
    fn quadrature_periodic_axis() {
        let dom = DomainSpec::new(vec![fourier_axis(32)]).unwrap();
        let w = dom.quadrature_weights();
        let total: f64 = w.sum();
        assert_abs_diff_eq!(total, 2.0 * PI, epsilon = 1e-12);
    }

    proptest! {
        // D = sigma sigma^T is PSD wherever evaluated.
        #[test]
        fn diffusion_matrix_psd(x in -2.9f64..2.9, y in -0.9f64..8.9) {
            let dom = DomainSpec::new(vec![cheb_axis(-3.0, 3.0, 16), cheb_axis(-1.0, 9.0, 16)]).unwrap();
            let sys = SdeSystem::from_fns(
                2,
                2,
                dom,
                |_z| vec![0.0, 1.0],
                |z| vec![1.0 + 0.3 * z[1].sin(), 2.0 * z[0], 0.0, z[0].cos()],
            )
            .unwrap();
            let (_, d) = sys.evaluate_coefficients(&[x, y]).unwrap();
            // 2x2 PSD test: trace and determinant
            let tr = d[[0, 0]] + d[[1, 1]];
            let det = d[[0, 0]] * d[[1, 1]] - d[[0, 1]] * d[[1, 0]];
            let scale = d.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-30);
            prop_assert!(tr >= -1e-12 * scale);
            prop_assert!(det >= -1e-12 * scale * scale);
        }

        // Interpolation of low-degree polynomials on Chebyshev axes is exact.
        #[test]
        fn chebyshev_interp_exact_cubics(x in -4.9f64..4.9) {
            let dom = DomainSpec::new(vec![cheb_axis(-5.0, 5.0, 20)]).unwrap();
            let f = GridFunction::sample(dom, |z| {
                Complex64::new(1.0 - 2.0 * z[0] + 0.5 * z[0].powi(2) + 0.1 * z[0].powi(3), 0.0)
            }, "p3");
            let v = f.interpolate(&[x]).unwrap().re;
            let exact = 1.0 - 2.0 * x + 0.5 * x.powi(2) + 0.1 * x.powi(3);
            prop_assert!((v - exact).abs() < 1e-10 * (1.0 + exact.abs()));
        }

        // Trigonometric interpolation of low-order harmonics is exact.
        #[test]
        fn fourier_interp_exact_harmonics(x in 0.0f64..6.28, k in 1usize..8) {
            let dom = DomainSpec::new(vec![fourier_axis(32)]).unwrap();
            let f = GridFunction::sample(dom, |z| Complex64::new((k as f64 * z[0]).sin(), 0.0), "harm");
            let v = f.interpolate(&[x]).unwrap().re;
            let exact = (k as f64 * x).sin();
            prop_assert!((v - exact).abs() < 1e-10);
        }
    }
}
