//! Local orthonormal frames along a fibre, quadratic graph fits, and the
//! Itô change of variables that flattens the fibre into a coordinate plane.

use ndarray::{Array1, Array2};
use ndarray_linalg::SVD;

use crate::error::{GenspecError, Result};

/// Affine isometry z -> A (z - base): `matrix` rows are an orthonormal
/// frame (tangent directions first, the normal last).
#[derive(Debug, Clone)]
pub struct Isometry {
    pub matrix: Array2<f64>,
    pub base: Vec<f64>,
}

impl Isometry {
    pub fn dim(&self) -> usize {
        self.base.len()
    }

    /// Frame coordinates of a point; the last component is the normal one.
    pub fn apply(&self, z: &[f64]) -> Array1<f64> {
        let delta = Array1::from_iter(z.iter().zip(&self.base).map(|(x, b)| x - b));
        self.matrix.dot(&delta)
    }

    /// Compose with a further rotation acting on frame coordinates.
    pub fn rotate(&self, r: &Array2<f64>) -> Isometry {
        Isometry {
            matrix: r.dot(&self.matrix),
            base: self.base.clone(),
        }
    }
}

/// Total-least-squares tangent frame at `z` from a cloud of nearby fibre
/// points. The tangent directions are the leading right singular vectors
/// of the centred cloud; the normal completes the orthonormal frame.
pub fn fit_tangent(points: &[Vec<f64>], z: &[f64]) -> Result<Isometry> {
    let d = z.len();
    if points.len() < d + 2 {
        return Err(GenspecError::TooFewPoints {
            need: d + 2,
            got: points.len(),
        });
    }
    let n = points.len();
    let mut centred = Array2::<f64>::zeros((n, d));
    let mut mean = vec![0.0; d];
    for p in points {
        for (m, x) in mean.iter_mut().zip(p) {
            *m += x / n as f64;
        }
    }
    for (i, p) in points.iter().enumerate() {
        for j in 0..d {
            centred[[i, j]] = p[j] - mean[j];
        }
    }
    let (_, s, vt) = centred
        .svd(false, true)
        .map_err(|e| GenspecError::EigensolverFailure(format!("tangent SVD: {e}")))?;
    let vt = vt.expect("requested right singular vectors");
    let spread = s[0];
    let z_scale = 1.0 + z.iter().map(|x| x.abs()).fold(0.0, f64::max);
    if spread < 1e-10 * z_scale {
        return Err(GenspecError::RankDeficientNeighborhood { spread });
    }
    // rows of vt, ordered by decreasing singular value: tangents then normal
    let mut matrix = vt.slice(ndarray::s![..d, ..]).to_owned();
    // deterministic signs: the largest-magnitude entry of each row positive
    for mut row in matrix.rows_mut() {
        let lead = row
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).unwrap())
            .map(|(i, _)| i)
            .unwrap();
        if row[lead] < 0.0 {
            row.mapv_inplace(|x| -x);
        }
    }
    Ok(Isometry {
        matrix,
        base: z.to_vec(),
    })
}

/// Quadratic graph fit y = p(v) of frame-transformed points, carrying the
/// first two derivatives of the graph at the frame origin.
#[derive(Debug, Clone)]
pub struct LocalGraph {
    /// dp/dv at the origin, length d-1.
    pub grad: Array1<f64>,
    /// d2p/dv2 at the origin, (d-1) x (d-1), symmetric.
    pub hess: Array2<f64>,
    /// y-value of the fitted graph at the origin.
    pub offset: f64,
    /// Root-mean-square residual of the fit.
    pub residual: f64,
}

/// Least-squares quadratic fit of the transformed cloud as a graph over
/// the tangent coordinates.
pub fn fit_local_graph(points: &[Vec<f64>], frame: &Isometry) -> Result<LocalGraph> {
    let d = frame.dim();
    let dv = d - 1;
    let n_coef = 1 + dv + dv * (dv + 1) / 2;
    if points.len() < n_coef + 1 {
        return Err(GenspecError::TooFewPoints {
            need: n_coef + 1,
            got: points.len(),
        });
    }
    let n = points.len();
    let mut design = Array2::<f64>::zeros((n, n_coef));
    let mut rhs = Array1::<f64>::zeros(n);
    let mut v_scale = 0.0f64;
    let mut coords = Vec::with_capacity(n);
    for p in points {
        let q = frame.apply(p);
        for k in 0..dv {
            v_scale = v_scale.max(q[k].abs());
        }
        coords.push(q);
    }
    // monotonicity of the graph requires distinct tangent coordinates
    if v_scale <= 0.0 {
        return Err(GenspecError::NotAGraph {
            detail: "all tangent coordinates coincide".into(),
        });
    }
    for (i, q) in coords.iter().enumerate() {
        design[[i, 0]] = 1.0;
        let mut c = 1;
        for k in 0..dv {
            design[[i, c]] = q[k];
            c += 1;
        }
        for k in 0..dv {
            for l in k..dv {
                design[[i, c]] = q[k] * q[l];
                c += 1;
            }
        }
        rhs[i] = q[d - 1];
    }
    let (coef, cond, resid) = lstsq(&design, &rhs)?;
    if cond > 1e10 {
        return Err(GenspecError::IllConditionedFit { cond });
    }
    let mut grad = Array1::<f64>::zeros(dv);
    for k in 0..dv {
        grad[k] = coef[1 + k];
    }
    let mut hess = Array2::<f64>::zeros((dv, dv));
    let mut c = 1 + dv;
    for k in 0..dv {
        for l in k..dv {
            if k == l {
                hess[[k, k]] = 2.0 * coef[c];
            } else {
                hess[[k, l]] = coef[c];
                hess[[l, k]] = coef[c];
            }
            c += 1;
        }
    }
    Ok(LocalGraph {
        grad,
        hess,
        offset: coef[0],
        residual: resid,
    })
}

/// SVD least squares returning (solution, condition number, rms residual).
pub(crate) fn lstsq(a: &Array2<f64>, b: &Array1<f64>) -> Result<(Array1<f64>, f64, f64)> {
    let (u, s, vt) = a
        .svd(true, true)
        .map_err(|e| GenspecError::EigensolverFailure(format!("least squares: {e}")))?;
    let u = u.unwrap();
    let vt = vt.unwrap();
    let smax = s[0];
    let smin = s[s.len() - 1];
    if smin <= 0.0 {
        return Err(GenspecError::IllConditionedFit { cond: f64::INFINITY });
    }
    let cond = smax / smin;
    let k = s.len();
    let mut y = Array1::<f64>::zeros(k);
    for i in 0..k {
        let ui = u.column(i);
        let proj: f64 = ui.iter().zip(b.iter()).map(|(x, y)| x * y).sum();
        y[i] = proj / s[i];
    }
    let x = vt.t().dot(&y);
    let r = a.dot(&x) - b;
    let rms = (r.iter().map(|v| v * v).sum::<f64>() / b.len() as f64).sqrt();
    Ok((x, cond, rms))
}

/// For d = 2: iteratively rotate the frame until the fitted graph has zero
/// slope at the origin, as needed by the arc-length construction.
pub fn fit_graph_zero_slope(
    points: &[Vec<f64>],
    frame: &Isometry,
) -> Result<(Isometry, LocalGraph)> {
    assert_eq!(frame.dim(), 2, "zero-slope fit is for planar fibres");
    let mut current = frame.clone();
    let mut graph = fit_local_graph(points, &current)?;
    for _ in 0..8 {
        let b = graph.grad[0];
        if b.abs() < 1e-12 {
            break;
        }
        let phi = b.atan();
        let (sin, cos) = phi.sin_cos();
        // rotate frame coordinates so the direction (1, b) becomes tangent
        let r = ndarray::arr2(&[[cos, sin], [-sin, cos]]);
        current = current.rotate(&r);
        graph = fit_local_graph(points, &current)?;
    }
    Ok((current, graph))
}

/// Drift and diffusion of the linearly transformed process w = A(z - base):
/// mu_A = A mu, D_A = A D A^T.
pub fn transform_linear(
    mu: &Array1<f64>,
    diff: &Array2<f64>,
    frame: &Isometry,
) -> (Array1<f64>, Array2<f64>) {
    let mu_a = frame.matrix.dot(mu);
    let d_a = frame.matrix.dot(diff).dot(&frame.matrix.t());
    (mu_a, d_a)
}

/// Sign convention of the Hessian correction in the flattening transform.
/// `Minus` is the Ito formula applied to y - p(v); `Plus` is kept only to
/// demonstrate that it fails to flatten (see tests).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HessianSign {
    Minus,
    Plus,
}

/// Ito change of variables (v, y) -> (v, y - p(v)) straightening the fibre
/// graph. Inputs are the frame drift/diffusion and the graph derivatives
/// at the evaluation point; the output normal components read off the
/// dynamics transverse to the fibre.
pub fn ito_flatten(
    mu_a: &Array1<f64>,
    d_a: &Array2<f64>,
    graph: &LocalGraph,
) -> (Array1<f64>, Array2<f64>) {
    ito_flatten_with_sign(mu_a, d_a, graph, HessianSign::Minus)
}

pub fn ito_flatten_with_sign(
    mu_a: &Array1<f64>,
    d_a: &Array2<f64>,
    graph: &LocalGraph,
    sign: HessianSign,
) -> (Array1<f64>, Array2<f64>) {
    let d = mu_a.len();
    let last = d - 1;
    let g = &graph.grad;
    let h = &graph.hess;
    let s = match sign {
        HessianSign::Minus => -1.0,
        HessianSign::Plus => 1.0,
    };

    let mut mu_hat = mu_a.clone();
    let mut drift_last = mu_a[last];
    for i in 0..last {
        drift_last -= mu_a[i] * g[i];
    }
    let mut hess_term = 0.0;
    for i in 0..last {
        for j in 0..last {
            hess_term += d_a[[i, j]] * h[[i, j]];
        }
    }
    drift_last += s * 0.5 * hess_term;
    mu_hat[last] = drift_last;

    let mut d_hat = d_a.clone();
    for i in 0..last {
        let mut v = d_a[[i, last]];
        for j in 0..last {
            v -= d_a[[i, j]] * g[j];
        }
        d_hat[[i, last]] = v;
        d_hat[[last, i]] = v;
    }
    let mut dnn = d_a[[last, last]];
    for i in 0..last {
        dnn -= 2.0 * d_a[[i, last]] * g[i];
        for j in 0..last {
            dnn += d_a[[i, j]] * g[i] * g[j];
        }
    }
    d_hat[[last, last]] = dnn;
    (mu_hat, d_hat)
}

/// Tangential/normal magnitudes of flattened local dynamics.
#[derive(Debug, Clone, serde::Serialize)]
pub struct LocalDynamics {
    pub mu_hat: Vec<f64>,
    pub d_hat: Vec<Vec<f64>>,
    pub mu_tan: f64,
    pub mu_nor: f64,
    pub d_tan: f64,
    pub d_nor: f64,
}

/// Split flattened coefficients into tangential and normal magnitudes:
/// Euclidean norm of the tangential drift block, absolute value of the
/// normal drift, spectral norm of the tangential diffusion block, and the
/// normal diffusion entry.
pub fn split_components(mu_hat: &Array1<f64>, d_hat: &Array2<f64>) -> LocalDynamics {
    let d = mu_hat.len();
    let last = d - 1;
    let mu_tan = (0..last).map(|i| mu_hat[i] * mu_hat[i]).sum::<f64>().sqrt();
    let mu_nor = mu_hat[last].abs();
    let d_tan = if last == 1 {
        d_hat[[0, 0]].abs()
    } else {
        // spectral norm of the (d-1)x(d-1) tangential block
        let block = d_hat.slice(ndarray::s![..last, ..last]).to_owned();
        block
            .svd(false, false)
            .map(|(_, s, _)| s[0])
            .unwrap_or_else(|_| {
                block
                    .iter()
                    .map(|v| v.abs())
                    .fold(0.0, f64::max)
                    * last as f64
            })
    };
    let d_nor = d_hat[[last, last]].abs();
    LocalDynamics {
        mu_hat: mu_hat.to_vec(),
        d_hat: d_hat
            .rows()
            .into_iter()
            .map(|r| r.to_vec())
            .collect(),
        mu_tan,
        mu_nor,
        d_tan,
        d_nor,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::{arr1, arr2};

    fn line_cloud(slope: f64, n: usize) -> Vec<Vec<f64>> {
        (0..n)
            .map(|i| {
                let t = -0.5 + i as f64 / (n - 1) as f64;
                vec![t, slope * t]
            })
            .collect()
    }

    #[test]
    fn tangent_of_straight_line() {
        let pts = line_cloud(0.0, 9);
        let iso = fit_tangent(&pts, &[0.0, 0.0]).unwrap();
        // tangent along +x, normal along +y
        assert_abs_diff_eq!(iso.matrix[[0, 0]].abs(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(iso.matrix[[0, 1]], 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(iso.matrix[[1, 1]].abs(), 1.0, epsilon = 1e-12);
        // orthonormality
        let gram = iso.matrix.dot(&iso.matrix.t());
        assert_abs_diff_eq!(gram[[0, 0]], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gram[[1, 1]], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(gram[[0, 1]], 0.0, epsilon = 1e-12);
    }

    #[test]
    fn tangent_of_sloped_line_matches_angle() {
        let slope = 0.75f64;
        let pts = line_cloud(slope, 11);
        let iso = fit_tangent(&pts, &[0.0, 0.0]).unwrap();
        let t = iso.matrix.row(0);
        let expected = [1.0 / (1.0 + slope * slope).sqrt(), slope / (1.0 + slope * slope).sqrt()];
        assert_abs_diff_eq!(t[0].abs(), expected[0], epsilon = 1e-10);
        assert_abs_diff_eq!(t[1].abs(), expected[1], epsilon = 1e-10);
        // tangent and normal orthogonal
        let n = iso.matrix.row(1);
        assert_abs_diff_eq!(t.dot(&n), 0.0, epsilon = 1e-12);
    }

    #[test]
    fn coincident_points_rank_deficient() {
        let pts = vec![vec![1.0, 2.0]; 8];
        assert!(matches!(
            fit_tangent(&pts, &[1.0, 2.0]),
            Err(GenspecError::RankDeficientNeighborhood { .. })
        ));
    }

    #[test]
    fn too_few_points_rejected() {
        let pts = line_cloud(0.0, 3);
        assert!(matches!(
            fit_tangent(&pts, &[0.0, 0.0]),
            Err(GenspecError::TooFewPoints { .. })
        ));
    }

    #[test]
    fn quadratic_graph_recovers_derivatives() {
        // points on y = 1 + 2v + 3v^2 in an already-aligned frame
        let frame = Isometry {
            matrix: arr2(&[[1.0, 0.0], [0.0, 1.0]]),
            base: vec![0.0, 0.0],
        };
        let pts: Vec<Vec<f64>> = (0..15)
            .map(|i| {
                let v = -0.35 + 0.05 * i as f64;
                vec![v, 1.0 + 2.0 * v + 3.0 * v * v]
            })
            .collect();
        let g = fit_local_graph(&pts, &frame).unwrap();
        assert_abs_diff_eq!(g.offset, 1.0, epsilon = 1e-10);
        assert_abs_diff_eq!(g.grad[0], 2.0, epsilon = 1e-10);
        assert_abs_diff_eq!(g.hess[[0, 0]], 6.0, epsilon = 1e-9);
        assert!(g.residual < 1e-10);
    }

    #[test]
    fn vertical_cloud_is_not_a_graph() {
        let frame = Isometry {
            matrix: arr2(&[[1.0, 0.0], [0.0, 1.0]]),
            base: vec![0.0, 0.0],
        };
        let pts: Vec<Vec<f64>> = (0..10).map(|i| vec![0.0, 0.1 * i as f64]).collect();
        assert!(matches!(
            fit_local_graph(&pts, &frame),
            Err(GenspecError::NotAGraph { .. })
        ));
    }

    #[test]
    fn zero_slope_rotation_flattens_line() {
        let slope = 1.3f64;
        let pts = line_cloud(slope, 13);
        let start = Isometry {
            matrix: arr2(&[[1.0, 0.0], [0.0, 1.0]]),
            base: vec![0.0, 0.0],
        };
        let (frame, graph) = fit_graph_zero_slope(&pts, &start).unwrap();
        assert!(graph.grad[0].abs() < 1e-10);
        // the frame tangent now points along the line
        let t = frame.matrix.row(0);
        let dir = [1.0, slope];
        let cross = t[0] * dir[1] - t[1] * dir[0];
        assert_abs_diff_eq!(cross, 0.0, epsilon = 1e-9);
    }

    #[test]
    fn transform_linear_rotation_oracle() {
        // rotate by 90 degrees: mu=(1,0) -> (0,-1) for R=[[0,1],[-1,0]]... rows
        let frame = Isometry {
            matrix: arr2(&[[0.0, 1.0], [-1.0, 0.0]]),
            base: vec![0.0, 0.0],
        };
        let mu = arr1(&[1.0, 2.0]);
        let diff = arr2(&[[3.0, 1.0], [1.0, 4.0]]);
        let (mu_a, d_a) = transform_linear(&mu, &diff, &frame);
        assert_abs_diff_eq!(mu_a[0], 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(mu_a[1], -1.0, epsilon = 1e-14);
        // A D A^T for this rotation swaps diagonal entries and negates
        // the off-diagonal
        assert_abs_diff_eq!(d_a[[0, 0]], 4.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d_a[[1, 1]], 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(d_a[[0, 1]], -1.0, epsilon = 1e-14);
    }

    #[test]
    fn flatten_parabola_zeroes_normal_dynamics() {
        // z1 = W, z2 = z1^2: on the parabola graph p(v) = v^2 at v = 1 the
        // flattened normal drift and diffusion vanish identically.
        let v = 1.0f64;
        let mu = arr1(&[0.0, 1.0]); // Ito drift of z2 = z1^2 with dz1 = dW
        let diff = arr2(&[[1.0, 2.0 * v], [2.0 * v, 4.0 * v * v]]);
        let frame = Isometry {
            matrix: arr2(&[[1.0, 0.0], [0.0, 1.0]]),
            base: vec![v, v * v],
        };
        let graph = LocalGraph {
            grad: arr1(&[2.0 * v]),
            hess: arr2(&[[2.0]]),
            offset: 0.0,
            residual: 0.0,
        };
        let (mu_a, d_a) = transform_linear(&mu, &diff, &frame);
        let (mu_hat, d_hat) = ito_flatten(&mu_a, &d_a, &graph);
        assert_abs_diff_eq!(mu_hat[1], 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(d_hat[[1, 1]], 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(d_hat[[0, 1]], 0.0, epsilon = 1e-13);
        // tangential dynamics unchanged
        assert_abs_diff_eq!(mu_hat[0], 0.0, epsilon = 1e-13);
        assert_abs_diff_eq!(d_hat[[0, 0]], 1.0, epsilon = 1e-13);

        // the opposite Hessian sign fails to flatten the drift
        let (mu_bad, _) =
            ito_flatten_with_sign(&mu_a, &d_a, &graph, HessianSign::Plus);
        assert!(mu_bad[1].abs() > 1.0);
    }

    #[test]
    fn split_components_magnitudes() {
        let mu = arr1(&[3.0, 4.0, -2.0]);
        let d = arr2(&[[2.0, 0.0, 0.0], [0.0, 5.0, 0.0], [0.0, 0.0, 0.25]]);
        let s = split_components(&mu, &d);
        assert_abs_diff_eq!(s.mu_tan, 5.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.mu_nor, 2.0, epsilon = 1e-14);
        assert_abs_diff_eq!(s.d_tan, 5.0, epsilon = 1e-12);
        assert_abs_diff_eq!(s.d_nor, 0.25, epsilon = 1e-14);
    }
}
