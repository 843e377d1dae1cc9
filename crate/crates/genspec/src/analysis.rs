//! Top-level drivers: the multiscale test (Algorithm 1) and the two
//! timescale-separation estimators (graph and arc-length
//! parameterizations, Algorithms 2A and 2B).

use ndarray::{arr2, Array1, Array2};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{GenspecError, Result};
use crate::fibre::{self, Fibre, TraceConfig};
use crate::frames::{
    self, fit_graph_zero_slope, fit_local_graph, fit_tangent, ito_flatten, split_components,
    transform_linear, Isometry, LocalDynamics,
};
use crate::generator::{
    assemble_fibre_generator_with_bc, assemble_generator, FibreBc, GeneratorMatrix,
};
use crate::sde::{GridFunction, SdeSystem};
use crate::spectra::{fix_phase, invariant_density, leading_eigenvalues, leading_spectrum, Spectrum};

/// Tunable parameters shared by the drivers.
#[derive(Debug, Clone)]
pub struct AnalysisConfig {
    /// Fibre resampling spacing h.
    pub spacing: f64,
    /// Number of fibre points in each local fitting window.
    pub window: usize,
    /// Ratio threshold for the multiscale verdict.
    pub threshold: f64,
    /// Number of leading eigenpairs computed (including the zero mode).
    pub k_max: usize,
    /// Sample count of the 1-D graph-parameterized operator.
    pub n_samples: usize,
    /// Level-set tracing options.
    pub trace: TraceConfig,
    /// Boundary rows used for open fibre operators.
    pub fibre_bc: FibreBc,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            spacing: 0.1,
            window: 13,
            threshold: 10.0,
            k_max: 7,
            n_samples: 200,
            trace: TraceConfig::default(),
            fibre_bc: FibreBc::Dirichlet,
        }
    }
}

/// Expensive shared state: one generator assembly and one eigensolve per
/// operator, reused by every driver.
pub struct PipelineContext {
    pub sys: SdeSystem,
    pub config: AnalysisConfig,
    pub adjoint: GeneratorMatrix,
    pub fokker_planck: GeneratorMatrix,
    /// Leading spectrum of the generator (adjoint operator).
    pub spectrum: Spectrum,
    /// Invariant density, nonnegative and normalized to unit integral.
    pub rho0: GridFunction,
}

impl PipelineContext {
    pub fn new(sys: SdeSystem, config: AnalysisConfig) -> Result<Self> {
        let adjoint =
            assemble_generator(&sys, true).map_err(|e| e.at_step("assemble_adjoint"))?;
        let fokker_planck =
            assemble_generator(&sys, false).map_err(|e| e.at_step("assemble_fokker_planck"))?;
        let spectrum = leading_spectrum(&adjoint, config.k_max)
            .map_err(|e| e.at_step("generator_spectrum"))?;
        let rho0 =
            invariant_density(&fokker_planck).map_err(|e| e.at_step("invariant_density"))?;
        Ok(PipelineContext {
            sys,
            config,
            adjoint,
            fokker_planck,
            spectrum,
            rho0,
        })
    }

    /// The first nonzero-eigenvalue eigenfunction, phase-fixed at `seed`.
    pub fn psi1(&self, seed: &[f64]) -> Result<GridFunction> {
        fix_phase(&self.spectrum.eigenfunction(1), seed).map_err(|e| e.at_step("fix_phase"))
    }

    /// Trace the fibre through `seed` as the level set of psi_1, resample
    /// it uniformly, project back onto the level set, and weight it.
    pub fn extract_fibre(&self, seed: &[f64]) -> Result<Fibre> {
        let psi1 = self.psi1(seed)?;
        let raw = fibre::trace_level_set(&psi1, seed, &self.config.trace)
            .map_err(|e| e.at_step("trace_level_set"))?;
        let resampled = fibre::resample_uniform(&raw, self.config.spacing)
            .map_err(|e| e.at_step("resample_uniform"))?;
        let projected = fibre::reproject(&resampled, &psi1, &self.config.trace)
            .map_err(|e| e.at_step("reproject"))?;
        fibre::attach_weights(&projected, &self.rho0).map_err(|e| e.at_step("attach_weights"))
    }
}

/// One fibre point's flattened local dynamics.
#[derive(Debug, Clone, Serialize)]
pub struct PointReport {
    pub index: usize,
    pub arc_length: f64,
    pub point: Vec<f64>,
    pub weight: f64,
    #[serde(flatten)]
    pub dynamics: LocalDynamics,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Verdict {
    Multiscale,
    NotMultiscale,
    Inconclusive,
}

/// Multiscale test result (Algorithm 1).
#[derive(Debug, Clone, Serialize)]
pub struct MultiscaleReport {
    pub mu_tan_avg: f64,
    pub mu_nor_avg: f64,
    pub d_tan_avg: f64,
    pub d_nor_avg: f64,
    pub ratio_mu: f64,
    pub ratio_d: f64,
    pub threshold: f64,
    pub verdict: Verdict,
    pub seed: Vec<f64>,
    pub fibre_points: usize,
    pub skipped_points: usize,
    pub per_point: Vec<PointReport>,
}

/// Algorithm 1: weighted averages of the flattened local dynamics along
/// the fibre through `seed`, and the multiscale verdict.
pub fn algorithm1(ctx: &PipelineContext, seed: &[f64]) -> Result<MultiscaleReport> {
    let fibre = ctx.extract_fibre(seed)?;
    let arcs = fibre.arc_lengths();
    let n = fibre.len();
    let w = ctx.config.window;

    let results: Vec<(usize, Result<LocalDynamics>)> = (0..n)
        .into_par_iter()
        .map(|i| (i, point_dynamics(&ctx.sys, &fibre, i, w)))
        .collect();

    let mut per_point = Vec::new();
    let mut skipped = 0usize;
    for (i, r) in results {
        match r {
            Ok(dynamics) => per_point.push(PointReport {
                index: i,
                arc_length: arcs[i],
                point: fibre.points[i].clone(),
                weight: fibre.weights[i],
                dynamics,
            }),
            Err(_) => skipped += 1,
        }
    }
    if per_point.is_empty() {
        return Err(GenspecError::TooFewPoints { got: 0, need: 1 }.at_step("point_dynamics"));
    }

    let total_w: f64 = per_point.iter().map(|p| p.weight).sum();
    let avg = |f: fn(&LocalDynamics) -> f64| -> f64 {
        per_point
            .iter()
            .map(|p| p.weight * f(&p.dynamics))
            .sum::<f64>()
            / total_w
    };
    let mu_tan_avg = avg(|d| d.mu_tan);
    let mu_nor_avg = avg(|d| d.mu_nor);
    let d_tan_avg = avg(|d| d.d_tan);
    let d_nor_avg = avg(|d| d.d_nor);
    let ratio_mu = mu_tan_avg / mu_nor_avg;
    let ratio_d = d_tan_avg / d_nor_avg;

    let degenerate = !ratio_mu.is_finite() || !ratio_d.is_finite() || skipped * 2 > n;
    let verdict = if degenerate {
        Verdict::Inconclusive
    } else if ratio_mu.max(ratio_d) >= ctx.config.threshold {
        Verdict::Multiscale
    } else {
        Verdict::NotMultiscale
    };

    Ok(MultiscaleReport {
        mu_tan_avg,
        mu_nor_avg,
        d_tan_avg,
        d_nor_avg,
        ratio_mu,
        ratio_d,
        threshold: ctx.config.threshold,
        verdict,
        seed: seed.to_vec(),
        fibre_points: n,
        skipped_points: skipped,
        per_point,
    })
}

/// Algorithm 1 driver that maps fibre-extraction failures (degenerate
/// eigenfunction gradient, contour too short, ...) to an Inconclusive
/// report instead of an error: when no fast fibre can be established, the
/// multiscale question has no evidence either way. Errors after a fibre has
/// been extracted still propagate.
pub fn algorithm1_or_inconclusive(
    ctx: &PipelineContext,
    seed: &[f64],
) -> Result<MultiscaleReport> {
    if let Err(e) = ctx.extract_fibre(seed) {
        let extraction_failure = {
            let mut root: &GenspecError = &e;
            while let GenspecError::Step { source, .. } = root {
                root = source;
            }
            matches!(
                root,
                GenspecError::DegenerateGradient { .. }
                    | GenspecError::ComponentTooShort { .. }
                    | GenspecError::FibreTooShort { .. }
                    | GenspecError::AllWeightsZero
                    | GenspecError::AnchorDegenerate { .. }
            )
        };
        if !extraction_failure {
            return Err(e);
        }
        return Ok(MultiscaleReport {
            mu_tan_avg: f64::NAN,
            mu_nor_avg: f64::NAN,
            d_tan_avg: f64::NAN,
            d_nor_avg: f64::NAN,
            ratio_mu: f64::NAN,
            ratio_d: f64::NAN,
            threshold: ctx.config.threshold,
            verdict: Verdict::Inconclusive,
            seed: seed.to_vec(),
            fibre_points: 0,
            skipped_points: 0,
            per_point: Vec::new(),
        });
    }
    algorithm1(ctx, seed)
}

/// Flattened local dynamics at fibre point i from a window of neighbors.
fn point_dynamics(
    sys: &SdeSystem,
    fibre: &Fibre,
    i: usize,
    window: usize,
) -> Result<LocalDynamics> {
    let pts = window_points(fibre, i, window);
    let z = &fibre.points[i];
    let frame = fit_tangent(&pts, z)?;
    let graph = fit_local_graph(&pts, &frame)?;
    let (mu, diff) = sys.evaluate_coefficients(z)?;
    let (mu_a, d_a) = transform_linear(&mu, &diff, &frame);
    let (mu_hat, d_hat) = ito_flatten(&mu_a, &d_a, &graph);
    Ok(split_components(&mu_hat, &d_hat))
}

/// The `window` fibre points nearest to index i (wrapping when closed,
/// clipping when open).
fn window_points(fibre: &Fibre, i: usize, window: usize) -> Vec<Vec<f64>> {
    let n = fibre.len();
    let w = window.min(n);
    let half = w / 2;
    let mut out = Vec::with_capacity(w);
    if fibre.closed {
        for k in 0..w {
            let idx = (i + n + k - half) % n;
            out.push(fibre.points[idx].clone());
        }
    } else {
        let lo = i.saturating_sub(half).min(n - w);
        for item in fibre.points.iter().skip(lo).take(w) {
            out.push(item.clone());
        }
    }
    out
}

/// Timescale separation report (Algorithms 2A/2B).
#[derive(Debug, Clone, Serialize)]
pub struct TimescaleReport {
    /// Leading eigenvalues of the full generator, as (re, im) pairs.
    pub slow_eigs: Vec<[f64; 2]>,
    /// Leading eigenvalues of the fibre-restricted 1-D operator.
    pub fibre_eigs: Vec<[f64; 2]>,
    /// Re(lambda_k) / Re(lambda_hat_k) for k >= 1.
    pub ratios: Vec<f64>,
    /// Relative errors against an analytic reference, when available.
    pub err: Vec<f64>,
    /// Geometric mean of |ratios|.
    pub epsilon_estimate: f64,
    pub method: String,
    pub theta_degrees: Option<f64>,
    /// Complex slow eigenvalues are paired index-wise with real fibre
    /// eigenvalues, so ratios differ within a conjugate pair.
    pub conjugate_pairing: bool,
}

/// Algorithm 2A: rotate the plane by `theta` so the fibre becomes the
/// graph of a function over the first rotated coordinate, sample the
/// tangential coefficients on an even v-grid, and compare the spectrum of
/// the resulting 1-D operator with the slow spectrum.
pub fn algorithm2a(
    ctx: &PipelineContext,
    seed: &[f64],
    theta_degrees: f64,
    reference: Option<&[f64]>,
) -> Result<TimescaleReport> {
    let fibre = ctx.extract_fibre(seed)?;
    let theta = theta_degrees.to_radians();
    let (sin, cos) = theta.sin_cos();
    let rot = arr2(&[[cos, sin], [-sin, cos]]);

    // rotated coordinates of the fibre chain; v must be strictly monotone
    let rotated: Vec<[f64; 2]> = fibre
        .points
        .iter()
        .map(|p| {
            [
                rot[[0, 0]] * p[0] + rot[[0, 1]] * p[1],
                rot[[1, 0]] * p[0] + rot[[1, 1]] * p[1],
            ]
        })
        .collect();
    let increasing = rotated.windows(2).all(|w| w[1][0] > w[0][0]);
    let decreasing = rotated.windows(2).all(|w| w[1][0] < w[0][0]);
    if !(increasing || decreasing) {
        let bad = rotated
            .windows(2)
            .position(|w| {
                if rotated[1][0] > rotated[0][0] {
                    w[1][0] <= w[0][0]
                } else {
                    w[1][0] >= w[0][0]
                }
            })
            .unwrap_or(0);
        return Err(GenspecError::NotAGraph {
            detail: format!(
                "rotated v-coordinate not monotone near vertex {bad} (theta = {theta_degrees} deg)"
            ),
        });
    }
    let mut pairs: Vec<[f64; 2]> = rotated;
    if decreasing {
        pairs.reverse();
    }

    // v samples on the full spanned interval; the Newton solve below keeps
    // every sample on the traced level set, so no extrapolation occurs
    // even at the span ends. Truncating the interval further degrades the
    // high-k fibre eigenvalues, which are sensitive to the absorbing ends.
    let n = ctx.config.n_samples;
    let v_lo = pairs[0][0];
    let v_hi = pairs[pairs.len() - 1][0];
    if v_hi - v_lo <= 0.0 || n < 8 {
        return Err(GenspecError::TooFewPoints { got: n, need: 8 });
    }
    let dv = (v_hi - v_lo) / (n - 1) as f64;

    // inverse rotation to evaluate coefficients at physical points; the
    // graph value from the polyline is sharpened by a 1-D Newton solve on
    // the eigenfunction level set to remove resampling offsets
    let psi1 = ctx.psi1(seed)?;
    let field = crate::fibre::LevelField::new(&psi1, fibre.level, ctx.config.trace.use_imag)?;
    let tol = ctx.config.trace.level_tol_factor * field.field.real_range();
    let rot_inv = rot.t().to_owned();
    let clamp = |z: [f64; 2]| -> [f64; 2] {
        let mut out = z;
        for (k, ax) in ctx.sys.domain.axes.iter().enumerate() {
            if !ax.boundary.is_periodic() {
                out[k] = out[k].clamp(ax.a, ax.b);
            }
        }
        out
    };
    let mut mu1 = Array1::<f64>::zeros(n);
    let mut d11 = Array1::<f64>::zeros(n);
    for i in 0..n {
        let v = v_lo + i as f64 * dv;
        let mut y = graph_value(&pairs, v)?;
        for _ in 0..10 {
            let z = clamp([
                rot_inv[[0, 0]] * v + rot_inv[[0, 1]] * y,
                rot_inv[[1, 0]] * v + rot_inv[[1, 1]] * y,
            ]);
            let r = field.value(&z)? - fibre.level;
            if r.abs() < tol {
                break;
            }
            let g = field.gradient(&z)?;
            // df/dy at fixed v in rotated coordinates
            let dfdy = g[0] * rot_inv[[0, 1]] + g[1] * rot_inv[[1, 1]];
            if dfdy.abs() < 1e-14 {
                break;
            }
            y -= r / dfdy;
        }
        let z = clamp([
            rot_inv[[0, 0]] * v + rot_inv[[0, 1]] * y,
            rot_inv[[1, 0]] * v + rot_inv[[1, 1]] * y,
        ]);
        let (mu, diff) = ctx.sys.evaluate_coefficients(&z)?;
        let mu_r = rot.dot(&mu);
        let d_r = rot.dot(&diff).dot(&rot.t());
        mu1[i] = mu_r[0];
        d11[i] = d_r[[0, 0]];
    }

    let op = assemble_fibre_generator_with_bc(&mu1, &d11, dv, false, ctx.config.fibre_bc)
        .map_err(|e| e.at_step("assemble_fibre_generator"))?;
    let fibre_eigs = leading_eigenvalues(&op, ctx.config.k_max)
        .map_err(|e| e.at_step("fibre_spectrum"))?;
    let mut report = timescale_ratios(
        &ctx.spectrum.eigenvalues,
        &fibre_eigs,
        ctx.config.k_max,
        reference,
    )?;
    report.method = "graph".into();
    report.theta_degrees = Some(theta_degrees);
    Ok(report)
}

/// Local quadratic evaluation of the graph y(v) through monotone
/// (v, y) samples.
fn graph_value(pairs: &[[f64; 2]], v: f64) -> Result<f64> {
    let n = pairs.len();
    // nearest sample by bisection on the monotone v values
    let mut lo = 0usize;
    let mut hi = n - 1;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if pairs[mid][0] <= v {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let center = if (v - pairs[lo][0]).abs() <= (pairs[hi][0] - v).abs() {
        lo
    } else {
        hi
    };
    let a = center.saturating_sub(3).min(n.saturating_sub(6));
    let b = (a + 6).min(n);
    let m = b - a;
    let mut design = Array2::<f64>::zeros((m, 3));
    let mut rhs = Array1::<f64>::zeros(m);
    for (r, p) in pairs[a..b].iter().enumerate() {
        let t = p[0] - v;
        design[[r, 0]] = 1.0;
        design[[r, 1]] = t;
        design[[r, 2]] = t * t;
        rhs[r] = p[1];
    }
    let (coef, cond, _) = frames::lstsq(&design, &rhs)?;
    if cond > 1e10 {
        return Err(GenspecError::IllConditionedFit { cond });
    }
    Ok(coef[0])
}

/// Algorithm 2B: arc-length parameterization. At each fibre point the
/// frame is the chord direction q_{n+1} - q_{n-1} refined so the local
/// graph has zero slope; the tangential coefficients feed a 1-D operator
/// on the uniform arc-length grid.
pub fn algorithm2b(
    ctx: &PipelineContext,
    seed: &[f64],
    reference: Option<&[f64]>,
) -> Result<TimescaleReport> {
    let fibre = ctx.extract_fibre(seed)?;
    let n = fibre.len();
    let w = ctx.config.window;

    let coeffs: Vec<Result<(f64, f64)>> = (0..n)
        .into_par_iter()
        .map(|i| arc_length_coefficients(&ctx.sys, &fibre, i, w))
        .collect();
    let mut mu1 = Array1::<f64>::zeros(n);
    let mut d11 = Array1::<f64>::zeros(n);
    for (i, c) in coeffs.into_iter().enumerate() {
        let (m, d) = c.map_err(|e| e.at_step("arc_length_coefficients"))?;
        mu1[i] = m;
        d11[i] = d;
    }

    let op = assemble_fibre_generator_with_bc(
        &mu1,
        &d11,
        fibre.spacing,
        fibre.closed,
        ctx.config.fibre_bc,
    )
    .map_err(|e| e.at_step("assemble_fibre_generator"))?;
    let fibre_eigs = leading_eigenvalues(&op, ctx.config.k_max)
        .map_err(|e| e.at_step("fibre_spectrum"))?;
    let mut report = timescale_ratios(
        &ctx.spectrum.eigenvalues,
        &fibre_eigs,
        ctx.config.k_max,
        reference,
    )?;
    report.method = "arclength".into();
    Ok(report)
}

/// Tangential drift and diffusion at fibre point i in the zero-slope
/// chord frame.
fn arc_length_coefficients(
    sys: &SdeSystem,
    fibre: &Fibre,
    i: usize,
    window: usize,
) -> Result<(f64, f64)> {
    let n = fibre.len();
    let (prev, next) = if fibre.closed {
        ((i + n - 1) % n, (i + 1) % n)
    } else {
        (i.saturating_sub(1), (i + 1).min(n - 1))
    };
    let chord = [
        fibre.points[next][0] - fibre.points[prev][0],
        fibre.points[next][1] - fibre.points[prev][1],
    ];
    let len = (chord[0] * chord[0] + chord[1] * chord[1]).sqrt();
    if len <= 0.0 {
        return Err(GenspecError::RankDeficientNeighborhood { spread: len });
    }
    let t = [chord[0] / len, chord[1] / len];
    let frame = Isometry {
        matrix: arr2(&[[t[0], t[1]], [-t[1], t[0]]]),
        base: fibre.points[i].clone(),
    };
    let pts = window_points(fibre, i, window);
    let (frame, _) = fit_graph_zero_slope(&pts, &frame)?;
    let (mu, diff) = sys.evaluate_coefficients(&fibre.points[i])?;
    let (mu_a, d_a) = transform_linear(&mu, &diff, &frame);
    Ok((mu_a[0], d_a[[0, 0]]))
}

/// Ratios, relative errors, and the scalar timescale estimate from a slow
/// and a fibre spectrum.
pub fn timescale_ratios(
    slow: &[Complex64],
    fibre: &[Complex64],
    k_max: usize,
    reference: Option<&[f64]>,
) -> Result<TimescaleReport> {
    let k_use = k_max.min(slow.len());
    if fibre.len() < k_use {
        return Err(GenspecError::IndexMismatch {
            got: fibre.len(),
            need: k_use,
        });
    }
    let mut ratios = Vec::new();
    for k in 1..k_use {
        ratios.push(slow[k].re / fibre[k].re);
    }
    let mut err = Vec::new();
    if let Some(refs) = reference {
        for (k, &r) in refs.iter().enumerate().take(k_use.saturating_sub(1)) {
            let hat = fibre[k + 1];
            err.push((hat - Complex64::new(r, 0.0)).norm() / r.abs());
        }
    }
    let log_mean = ratios
        .iter()
        .filter(|r| r.abs() > 0.0)
        .map(|r| r.abs().ln())
        .sum::<f64>()
        / ratios.len().max(1) as f64;
    let epsilon_estimate = log_mean.exp();
    let has_complex_pair = slow.iter().any(|l| l.im.abs() > 1e-12);
    Ok(TimescaleReport {
        slow_eigs: slow[..k_use].iter().map(|l| [l.re, l.im]).collect(),
        fibre_eigs: fibre[..k_use.max(1).min(fibre.len())]
            .iter()
            .map(|l| [l.re, l.im])
            .collect(),
        ratios,
        err,
        epsilon_estimate,
        method: String::new(),
        theta_degrees: None,
        conjugate_pairing: has_complex_pair,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bench;
    use approx::assert_abs_diff_eq;

    #[test]
    fn ratios_of_identical_spectra_are_one() {
        let eigs: Vec<Complex64> = (0..5)
            .map(|k| Complex64::new(-(k as f64), 0.0))
            .collect();
        let r = timescale_ratios(&eigs, &eigs, 5, None).unwrap();
        for v in &r.ratios {
            assert_abs_diff_eq!(*v, 1.0, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(r.epsilon_estimate, 1.0, epsilon = 1e-15);
    }

    #[test]
    fn exact_reference_gives_zero_error() {
        let eps = 1e-3;
        let slow: Vec<Complex64> = (0..4)
            .map(|k| Complex64::new(-(k as f64), 0.0))
            .collect();
        let fibre: Vec<Complex64> = (0..4)
            .map(|k| Complex64::new(bench::fibre_reference_eigenvalue(k, eps), 0.0))
            .collect();
        let refs: Vec<f64> = (1..4)
            .map(|k| bench::fibre_reference_eigenvalue(k, eps))
            .collect();
        let r = timescale_ratios(&slow, &fibre, 4, Some(&refs)).unwrap();
        for e in &r.err {
            assert_abs_diff_eq!(*e, 0.0, epsilon = 1e-15);
        }
        // ratios are k eps / k = eps
        for v in &r.ratios {
            assert_abs_diff_eq!(*v, eps, epsilon = 1e-15);
        }
        assert_abs_diff_eq!(r.epsilon_estimate, eps, epsilon = 1e-12);
    }

    #[test]
    fn short_fibre_spectrum_rejected() {
        let slow: Vec<Complex64> = (0..5)
            .map(|k| Complex64::new(-(k as f64), 0.0))
            .collect();
        let fibre = vec![Complex64::new(0.0, 0.0); 2];
        assert!(matches!(
            timescale_ratios(&slow, &fibre, 5, None),
            Err(GenspecError::IndexMismatch { .. })
        ));
    }

    #[test]
    fn window_points_clip_and_wrap() {
        let mk = |closed| Fibre {
            points: (0..10).map(|i| vec![i as f64, 0.0]).collect(),
            level: 0.0,
            seed: vec![0.0, 0.0],
            spacing: 1.0,
            closed,
            weights: vec![],
        };
        let open = mk(false);
        let first = window_points(&open, 0, 5);
        assert_eq!(first.len(), 5);
        assert_abs_diff_eq!(first[0][0], 0.0);
        assert_abs_diff_eq!(first[4][0], 4.0);
        let closed = mk(true);
        let wrapped = window_points(&closed, 0, 5);
        assert_eq!(wrapped.len(), 5);
        // centered window around index 0 wraps to indices 8, 9, 0, 1, 2
        assert_abs_diff_eq!(wrapped[0][0], 8.0);
        assert_abs_diff_eq!(wrapped[4][0], 2.0);
    }
}
