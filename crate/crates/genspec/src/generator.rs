//! Dense collocation discretizations of the Fokker-Planck operator, its
//! adjoint, and 1-D fibre-restricted operators.

use std::f64::consts::PI;

use ndarray::{Array1, Array2};

use crate::error::{GenspecError, Result};
use crate::sde::{Boundary, DomainSpec, SdeSystem};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    Fourier,
    Chebyshev,
    FiniteDifference4,
}

/// Nodes with first- and second-derivative collocation matrices.
#[derive(Debug, Clone)]
pub struct DiffMatrices {
    pub nodes: Array1<f64>,
    pub d1: Array2<f64>,
    pub d2: Array2<f64>,
    pub basis: BasisKind,
}

/// Standard Fourier spectral differentiation matrices for even n on [a, b].
pub fn fourier_diff(n: usize, interval: (f64, f64)) -> Result<DiffMatrices> {
    if n < 8 || n % 2 != 0 {
        return Err(GenspecError::InvalidGrid(format!(
            "fourier grid needs even n >= 8, got {n}"
        )));
    }
    let (a, b) = interval;
    if !(a < b) {
        return Err(GenspecError::InvalidGrid("empty interval".into()));
    }
    let width = b - a;
    let scale = 2.0 * PI / width;
    let h = 2.0 * PI / n as f64;
    let nodes = Array1::from_iter((0..n).map(|j| a + j as f64 * width / n as f64));
    let mut d1 = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            if i != j {
                let k = i as isize - j as isize;
                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                d1[[i, j]] = 0.5 * sign / (0.5 * k as f64 * h).tan() * scale;
            }
        }
    }
    let d2 = d1.dot(&d1);
    Ok(DiffMatrices {
        nodes,
        d1,
        d2,
        basis: BasisKind::Fourier,
    })
}

/// Chebyshev-Gauss-Lobatto differentiation matrices on [a, b], nodes in
/// ascending order including both endpoints.
pub fn chebyshev_diff(n: usize, interval: (f64, f64)) -> Result<DiffMatrices> {
    if n < 8 {
        return Err(GenspecError::InvalidGrid(format!(
            "chebyshev grid needs n >= 8, got {n}"
        )));
    }
    let (a, b) = interval;
    if !(a < b) {
        return Err(GenspecError::InvalidGrid("empty interval".into()));
    }
    let m = (n - 1) as f64;
    let nodes = Array1::from_iter(
        (0..n).map(|j| a + (1.0 - (PI * j as f64 / m).cos()) * 0.5 * (b - a)),
    );
    // Barycentric weights for CGL nodes (halved at the endpoints).
    let mut w = vec![0.0; n];
    for (j, wj) in w.iter_mut().enumerate() {
        *wj = if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == 0 || j == n - 1 {
            *wj *= 0.5;
        }
    }
    let mut d1 = Array2::zeros((n, n));
    for i in 0..n {
        let mut row_sum = 0.0;
        for j in 0..n {
            if i != j {
                let v = (w[j] / w[i]) / (nodes[i] - nodes[j]);
                d1[[i, j]] = v;
                row_sum += v;
            }
        }
        d1[[i, i]] = -row_sum; // negative-sum trick: exact derivative of constants
    }
    let d2 = d1.dot(&d1);
    Ok(DiffMatrices {
        nodes,
        d1,
        d2,
        basis: BasisKind::Chebyshev,
    })
}

/// Fornberg finite-difference weights for derivatives 0..=max_order at x0
/// given arbitrary distinct nodes. Returns (orders+1) x nodes.len().
fn fornberg_weights(x0: f64, nodes: &[f64], max_order: usize) -> Array2<f64> {
    let n = nodes.len();
    let mut c = Array2::zeros((max_order + 1, n));
    let mut c1 = 1.0;
    let mut c4 = nodes[0] - x0;
    c[[0, 0]] = 1.0;
    for i in 1..n {
        let mn = i.min(max_order);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = nodes[i] - x0;
        for j in 0..i {
            let c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[[k, i]] = c1 * (k as f64 * c[[k - 1, i - 1]] - c5 * c[[k, i - 1]]) / c2;
                }
                c[[0, i]] = -c1 * c5 * c[[0, i - 1]] / c2;
            }
            for k in (1..=mn).rev() {
                c[[k, j]] = (c4 * c[[k, j]] - k as f64 * c[[k - 1, j]]) / c3;
            }
            c[[0, j]] = c4 * c[[0, j]] / c3;
        }
        c1 = c2;
    }
    c
}

/// Fourth-order finite-difference matrices on a uniform grid of n points
/// with spacing h. Closed grids wrap the central stencil; open grids use
/// one-sided 6-point stencils near the ends.
pub fn fd4_diff(n: usize, h: f64, closed: bool) -> Result<DiffMatrices> {
    if n < 12 {
        return Err(GenspecError::TooFewPoints { got: n, need: 12 });
    }
    let nodes = Array1::from_iter((0..n).map(|j| j as f64 * h));
    let mut d1 = Array2::zeros((n, n));
    let mut d2 = Array2::zeros((n, n));
    // Central 4th-order stencils.
    let s1 = [1.0, -8.0, 0.0, 8.0, -1.0];
    let s2 = [-1.0, 16.0, -30.0, 16.0, -1.0];
    for i in 0..n {
        let central_ok = closed || (i >= 2 && i + 2 < n);
        if central_ok {
            for (o, (&c1v, &c2v)) in s1.iter().zip(s2.iter()).enumerate() {
                let j = (i + n + o - 2) % n;
                d1[[i, j]] += c1v / (12.0 * h);
                d2[[i, j]] += c2v / (12.0 * h * h);
            }
        } else {
            // biased 6-point stencil keeps 4th order for d2 near open ends
            let lo = i.saturating_sub(2).min(n - 6);
            let window: Vec<f64> = (lo..lo + 6).map(|j| nodes[j]).collect();
            let w = fornberg_weights(nodes[i], &window, 2);
            for (o, j) in (lo..lo + 6).enumerate() {
                d1[[i, j]] += w[[1, o]];
                d2[[i, j]] += w[[2, o]];
            }
        }
    }
    Ok(DiffMatrices {
        nodes,
        d1,
        d2,
        basis: BasisKind::FiniteDifference4,
    })
}

/// Differentiation matrices for one domain axis, chosen by boundary flag.
pub fn axis_diff(ax: &crate::sde::Axis) -> Result<DiffMatrices> {
    match ax.boundary {
        Boundary::Periodic => fourier_diff(ax.n, (ax.a, ax.b)),
        _ => chebyshev_diff(ax.n, (ax.a, ax.b)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OperatorKind {
    FokkerPlanck,
    Adjoint,
    FibreFokkerPlanck,
}

/// Boundary conditions for open fibre operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FibreBc {
    #[default]
    Dirichlet,
    Neumann,
}

/// A dense collocation matrix with boundary-replacement bookkeeping.
///
/// Rows listed in `bc_rows` have been replaced by constraint rows
/// (identity rows for Dirichlet, one-sided derivative rows for Neumann);
/// the eigensolver eliminates them before the dense decomposition.
#[derive(Debug, Clone)]
pub struct GeneratorMatrix {
    pub matrix: Array2<f64>,
    pub kind: OperatorKind,
    pub domain: Option<DomainSpec>,
    pub bc_rows: Vec<usize>,
    pub bc_applied: String,
}

impl GeneratorMatrix {
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn inf_norm(&self) -> f64 {
        self.matrix
            .rows()
            .into_iter()
            .map(|r| r.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

/// Accumulate `scale * diag(row_coef) * T * diag(col_coef)` into `m`,
/// where T is the tensor-product embedding of the per-axis `factors`
/// (identity on axes given `None`).
fn accumulate_term(
    m: &mut Array2<f64>,
    domain: &DomainSpec,
    factors: &[Option<&Array2<f64>>],
    row_coef: Option<&Array1<f64>>,
    col_coef: Option<&Array1<f64>>,
    scale: f64,
) {
    let d = domain.dim();
    let total = domain.len();
    let varying: Vec<usize> = (0..d).filter(|&a| factors[a].is_some()).collect();
    let var_sizes: Vec<usize> = varying.iter().map(|&a| domain.axes[a].n).collect();
    let combos: usize = var_sizes.iter().product();

    for r in 0..total {
        let r_idx = domain.multi_index(r);
        let rc = scale * row_coef.map_or(1.0, |c| c[r]);
        if rc == 0.0 {
            continue;
        }
        let mut col_idx = r_idx.clone();
        for combo in 0..combos {
            let mut rem = combo;
            let mut val = rc;
            for (vi, &a) in varying.iter().enumerate() {
                let j = rem % var_sizes[vi];
                rem /= var_sizes[vi];
                col_idx[a] = j;
                val *= factors[a].unwrap()[[r_idx[a], j]];
            }
            if val == 0.0 {
                continue;
            }
            let c = domain.flat_index(&col_idx);
            m[[r, c]] += val * col_coef.map_or(1.0, |cc| cc[c]);
        }
    }
}

/// Assemble the dense collocation matrix of the Fokker-Planck operator
/// (adjoint=false) or its adjoint (adjoint=true).
///
/// Non-periodic boundary rows are replaced by identity rows (Fokker-Planck,
/// forcing the density to zero) or by one-sided normal-derivative rows
/// (adjoint, zero Neumann condition).
pub fn assemble_generator(sys: &SdeSystem, adjoint: bool) -> Result<GeneratorMatrix> {
    let domain = &sys.domain;
    let d = domain.dim();
    let m = domain.len();
    if m == 0 {
        return Err(GenspecError::DomainTooSmall("empty grid".into()));
    }

    let diffs: Vec<DiffMatrices> = domain
        .axes
        .iter()
        .map(axis_diff)
        .collect::<Result<Vec<_>>>()?;

    // Tabulate coefficient fields on the grid.
    let mut mu = vec![Array1::zeros(m); d];
    let mut dcoef = vec![vec![Array1::zeros(m); d]; d];
    for flat in 0..m {
        let z = domain.point(flat);
        let (mu_z, d_z) = sys
            .evaluate_coefficients(&z)
            .map_err(|e| GenspecError::CoefficientEvaluationFailed {
                point: z.clone(),
                reason: e.to_string(),
            })?;
        for i in 0..d {
            mu[i][flat] = mu_z[i];
            for j in 0..d {
                dcoef[i][j][flat] = d_z[[i, j]];
            }
        }
    }

    let mut mat = Array2::zeros((m, m));
    for i in 0..d {
        let mut f1: Vec<Option<&Array2<f64>>> = vec![None; d];
        f1[i] = Some(&diffs[i].d1);
        if adjoint {
            // sum_i mu_i d/dz_i
            accumulate_term(&mut mat, domain, &f1, Some(&mu[i]), None, 1.0);
        } else {
            // -sum_i d/dz_i [mu_i rho]
            accumulate_term(&mut mat, domain, &f1, None, Some(&mu[i]), -1.0);
        }
        for j in i..d {
            let w = if i == j { 0.5 } else { 1.0 }; // off-diagonal pair counted once
            let mut f2: Vec<Option<&Array2<f64>>> = vec![None; d];
            if i == j {
                f2[i] = Some(&diffs[i].d2);
            } else {
                f2[i] = Some(&diffs[i].d1);
                f2[j] = Some(&diffs[j].d1);
            }
            if adjoint {
                accumulate_term(&mut mat, domain, &f2, Some(&dcoef[i][j]), None, w);
            } else {
                accumulate_term(&mut mat, domain, &f2, None, Some(&dcoef[i][j]), w);
            }
        }
    }

    // Boundary-row replacement on non-periodic axes.
    let mut bc_rows = Vec::new();
    let mut descr = Vec::new();
    for axis in 0..d {
        if domain.axes[axis].boundary.is_periodic() {
            continue;
        }
        let n_ax = domain.axes[axis].n;
        for flat in 0..m {
            let idx = domain.multi_index(flat);
            if idx[axis] != 0 && idx[axis] != n_ax - 1 {
                continue;
            }
            if !bc_rows.contains(&flat) {
                bc_rows.push(flat);
                mat.row_mut(flat).fill(0.0);
            }
            if adjoint {
                // Neumann: spectral one-sided derivative along this axis.
                // Corner nodes accumulate one derivative row per axis.
                let mut col_idx = idx.clone();
                for j in 0..n_ax {
                    col_idx[axis] = j;
                    let c = domain.flat_index(&col_idx);
                    mat[[flat, c]] += diffs[axis].d1[[idx[axis], j]];
                }
            } else {
                mat[[flat, flat]] = 1.0;
            }
        }
    }
    bc_rows.sort_unstable();
    if !bc_rows.is_empty() {
        descr.push(if adjoint {
            format!("{} Neumann derivative rows", bc_rows.len())
        } else {
            format!("{} Dirichlet identity rows", bc_rows.len())
        });
    }

    Ok(GeneratorMatrix {
        matrix: mat,
        kind: if adjoint {
            OperatorKind::Adjoint
        } else {
            OperatorKind::FokkerPlanck
        },
        domain: Some(domain.clone()),
        bc_rows,
        bc_applied: descr.join("; "),
    })
}

/// 1-D Fokker-Planck matrix for a drift-diffusion process sampled at n
/// equally spaced arc-length points on a fibre, using 4th-order central
/// finite differences.
pub fn assemble_fibre_generator(
    mu1: &Array1<f64>,
    d11: &Array1<f64>,
    spacing: f64,
    closed: bool,
) -> Result<GeneratorMatrix> {
    assemble_fibre_generator_with_bc(mu1, d11, spacing, closed, FibreBc::Dirichlet)
}

/// Variant with selectable open-end boundary condition (sensitivity checks).
pub fn assemble_fibre_generator_with_bc(
    mu1: &Array1<f64>,
    d11: &Array1<f64>,
    spacing: f64,
    closed: bool,
    bc: FibreBc,
) -> Result<GeneratorMatrix> {
    let n = mu1.len();
    if n != d11.len() {
        return Err(GenspecError::InvalidGrid(
            "mu1 and d11 length mismatch".into(),
        ));
    }
    if n < 12 {
        return Err(GenspecError::TooFewPoints { got: n, need: 12 });
    }
    for (i, &v) in d11.iter().enumerate() {
        if v < 0.0 {
            return Err(GenspecError::NegativeDiffusion { index: i, value: v });
        }
    }
    let diffs = fd4_diff(n, spacing, closed)?;
    // L rho = -(mu rho)' + 1/2 (D rho)''
    let mut mat = Array2::zeros((n, n));
    for i in 0..n {
        for j in 0..n {
            mat[[i, j]] = -diffs.d1[[i, j]] * mu1[j] + 0.5 * diffs.d2[[i, j]] * d11[j];
        }
    }
    let mut bc_rows = Vec::new();
    let mut bc_applied = String::from("closed fibre (periodic)");
    if !closed {
        for &row in &[0, n - 1] {
            mat.row_mut(row).fill(0.0);
            match bc {
                FibreBc::Dirichlet => mat[[row, row]] = 1.0,
                FibreBc::Neumann => {
                    let lo = row.saturating_sub(2).min(n - 6);
                    let window: Vec<f64> = (lo..lo + 6).map(|j| diffs.nodes[j]).collect();
                    let w = fornberg_weights(diffs.nodes[row], &window, 1);
                    for (o, j) in (lo..lo + 6).enumerate() {
                        mat[[row, j]] = w[[1, o]];
                    }
                }
            }
            bc_rows.push(row);
        }
        bc_applied = match bc {
            FibreBc::Dirichlet => "Dirichlet end rows".into(),
            FibreBc::Neumann => "Neumann end rows".into(),
        };
    }
    Ok(GeneratorMatrix {
        matrix: mat,
        kind: OperatorKind::FibreFokkerPlanck,
        domain: None,
        bc_rows,
        bc_applied,
    })
}
