//! Fast-fibre extraction: level-set tracing by marching squares on a
//! refined evaluation grid, arc-length resampling, and invariant-density
//! weights.

use std::collections::HashMap;

use ndarray::Array1;

use crate::error::{GenspecError, Result};
use crate::generator::axis_diff;
use crate::sde::GridFunction;

/// Ordered polyline approximating one connected component of a level set.
#[derive(Debug, Clone)]
pub struct Fibre {
    pub points: Vec<Vec<f64>>,
    pub level: f64,
    pub seed: Vec<f64>,
    /// Arc length between consecutive points; 0 for a raw traced polyline.
    pub spacing: f64,
    pub closed: bool,
    pub weights: Vec<f64>,
}

impl Fibre {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Total polyline length (including the closing segment when closed).
    pub fn total_length(&self) -> f64 {
        let mut l = 0.0;
        for w in self.points.windows(2) {
            l += dist(&w[0], &w[1]);
        }
        if self.closed && self.points.len() > 2 {
            l += dist(self.points.last().unwrap(), &self.points[0]);
        }
        l
    }

    /// Cumulative arc length of point n from the start.
    pub fn arc_lengths(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.points.len());
        let mut acc = 0.0;
        out.push(0.0);
        for w in self.points.windows(2) {
            acc += dist(&w[0], &w[1]);
            out.push(acc);
        }
        out
    }
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y) * (x - y))
        .sum::<f64>()
        .sqrt()
}

/// Tracing options; defaults follow the benchmark setup.
#[derive(Debug, Clone)]
pub struct TraceConfig {
    /// Refinement factor of the evaluation grid relative to the
    /// collocation grid.
    pub refine: usize,
    /// Gradient tolerance as a fraction of range/width.
    pub grad_tol_factor: f64,
    /// Level residual tolerance as a fraction of the field range.
    pub level_tol_factor: f64,
    /// Trace level sets of the imaginary part instead of the real part.
    pub use_imag: bool,
}

impl Default for TraceConfig {
    fn default() -> Self {
        TraceConfig {
            refine: 4,
            grad_tol_factor: 1e-6,
            level_tol_factor: 1e-6,
            use_imag: false,
        }
    }
}

/// A scalar field with spectral gradient grids, supporting Newton
/// projection of points onto a level set.
pub struct LevelField {
    pub field: GridFunction,
    grads: Vec<GridFunction>,
    pub level: f64,
}

impl LevelField {
    pub fn new(psi: &GridFunction, level: f64, use_imag: bool) -> Result<Self> {
        let field = if use_imag {
            GridFunction::new(
                psi.domain.clone(),
                psi.values.mapv(|c| num_complex::Complex64::new(c.im, 0.0)),
                format!("Im({})", psi.label),
            )
        } else {
            psi.real_part()
        };
        let grads = gradient_grids(&field)?;
        Ok(LevelField {
            field,
            grads,
            level,
        })
    }

    pub fn value(&self, z: &[f64]) -> Result<f64> {
        Ok(self.field.interpolate(z)?.re)
    }

    pub fn gradient(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.grads
            .iter()
            .map(|g| g.interpolate(z).map(|c| c.re))
            .collect()
    }

    /// Newton projection of a point onto the level set along the gradient.
    /// Non-periodic coordinates are clamped to the domain.
    pub fn project(&self, z: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let mut p = z.to_vec();
        for _ in 0..max_iter {
            let clamped = self.clamp(&p);
            let r = self.value(&clamped)? - self.level;
            if r.abs() < tol {
                return Ok(clamped);
            }
            let g = self.gradient(&clamped)?;
            let g2: f64 = g.iter().map(|v| v * v).sum();
            if g2 < 1e-30 {
                break;
            }
            for (pi, gi) in p.iter_mut().zip(&g) {
                *pi -= r * gi / g2;
            }
        }
        Ok(self.clamp(&p))
    }

    fn clamp(&self, z: &[f64]) -> Vec<f64> {
        self.field
            .domain
            .axes
            .iter()
            .zip(z)
            .map(|(ax, &x)| {
                if ax.boundary.is_periodic() {
                    x
                } else {
                    x.clamp(ax.a, ax.b)
                }
            })
            .collect()
    }
}

/// Spectral gradient of a grid function, one grid per axis.
pub fn gradient_grids(f: &GridFunction) -> Result<Vec<GridFunction>> {
    let dom = &f.domain;
    let d = dom.dim();
    let m = dom.len();
    let mut out = Vec::with_capacity(d);
    for a in 0..d {
        let dm = axis_diff(&dom.axes[a])?;
        let n = dom.axes[a].n;
        let stride: usize = dom.axes[a + 1..].iter().map(|ax| ax.n).product();
        let outer = m / (n * stride);
        let mut deriv = Array1::from_elem(m, num_complex::Complex64::new(0.0, 0.0));
        for o in 0..outer {
            for s in 0..stride {
                for i in 0..n {
                    let mut acc = num_complex::Complex64::new(0.0, 0.0);
                    for j in 0..n {
                        let src = (o * n + j) * stride + s;
                        acc += dm.d1[[i, j]] * f.values[src];
                    }
                    deriv[(o * n + i) * stride + s] = acc;
                }
            }
        }
        out.push(GridFunction::new(
            dom.clone(),
            deriv,
            format!("d({})/dz{a}", f.label),
        ));
    }
    Ok(out)
}

// --- marching squares -----------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
struct EdgeKey {
    ix: usize,
    iy: usize,
    vertical: bool,
}

struct RefinedGrid {
    xs: Vec<f64>,
    ys: Vec<f64>,
    /// values[ix][iy]
    values: Vec<Vec<f64>>,
    x_periodic: bool,
    x_width: f64,
}

impl RefinedGrid {
    /// Number of cells along x (wrap cell included when periodic).
    fn cells_x(&self) -> usize {
        if self.x_periodic {
            self.xs.len()
        } else {
            self.xs.len() - 1
        }
    }

    fn value(&self, ix: usize, iy: usize) -> f64 {
        self.values[ix % self.xs.len()][iy]
    }

    fn x_at(&self, ix: usize) -> f64 {
        // unwrapped coordinate, may exceed the right bound by one period
        let n = self.xs.len();
        if ix < n {
            self.xs[ix]
        } else {
            self.xs[ix - n] + self.x_width
        }
    }
}

/// Evaluate the field separably on a refined tensor grid (2-D only).
fn refine_field(field: &GridFunction, refine: usize) -> Result<RefinedGrid> {
    let dom = &field.domain;
    assert_eq!(dom.dim(), 2, "level-set tracing targets d = 2");
    let ax = &dom.axes[0];
    let ay = &dom.axes[1];
    let x_periodic = ax.boundary.is_periodic();
    let nx = ax.n * refine;
    let ny = ay.n * refine;
    let xs: Vec<f64> = if x_periodic {
        (0..nx)
            .map(|i| ax.a + i as f64 * ax.width() / nx as f64)
            .collect()
    } else {
        (0..nx)
            .map(|i| ax.a + i as f64 * ax.width() / (nx - 1) as f64)
            .collect()
    };
    let ys: Vec<f64> = (0..ny)
        .map(|j| ay.a + j as f64 * ay.width() / (ny - 1) as f64)
        .collect();

    // first interpolate along y for every collocation x-column, then along x
    let n0 = ax.n;
    let n1 = ay.n;
    let mut col_interp = vec![vec![0.0f64; ny]; n0];
    for i0 in 0..n0 {
        let column: Vec<num_complex::Complex64> =
            (0..n1).map(|i1| field.values[i0 * n1 + i1]).collect();
        let col_fn = GridFunction::new(
            crate::sde::DomainSpec::new(vec![ay.clone()])?,
            Array1::from(column),
            "col",
        );
        for (j, &y) in ys.iter().enumerate() {
            col_interp[i0][j] = col_fn.interpolate(&[y])?.re;
        }
    }
    let x_nodes = ax.nodes();
    let mut values = vec![vec![0.0f64; ny]; nx];
    for j in 0..ny {
        let row: Vec<num_complex::Complex64> = (0..n0)
            .map(|i0| num_complex::Complex64::new(col_interp[i0][j], 0.0))
            .collect();
        let _ = x_nodes; // nodes implicit in the axis definition
        let row_fn = GridFunction::new(
            crate::sde::DomainSpec::new(vec![ax.clone()])?,
            Array1::from(row),
            "row",
        );
        for (i, &x) in xs.iter().enumerate() {
            values[i][j] = row_fn.interpolate(&[x])?.re;
        }
    }
    Ok(RefinedGrid {
        xs,
        ys,
        values,
        x_periodic,
        x_width: ax.width(),
    })
}

/// All level-s segments of the refined grid, as pairs of (edge key, point).
fn marching_squares(
    grid: &RefinedGrid,
    s: f64,
) -> Vec<((EdgeKey, [f64; 2]), (EdgeKey, [f64; 2]))> {
    let mut segments = Vec::new();
    let ny = grid.ys.len();
    let nx_mod = grid.xs.len();
    for cx in 0..grid.cells_x() {
        for cy in 0..ny - 1 {
            let f00 = grid.value(cx, cy) - s;
            let f10 = grid.value(cx + 1, cy) - s;
            let f11 = grid.value(cx + 1, cy + 1) - s;
            let f01 = grid.value(cx, cy + 1) - s;
            let mut case = 0u8;
            if f00 > 0.0 {
                case |= 1;
            }
            if f10 > 0.0 {
                case |= 2;
            }
            if f11 > 0.0 {
                case |= 4;
            }
            if f01 > 0.0 {
                case |= 8;
            }
            if case == 0 || case == 15 {
                continue;
            }
            let x0 = grid.x_at(cx);
            let x1 = grid.x_at(cx + 1);
            let y0 = grid.ys[cy];
            let y1 = grid.ys[cy + 1];
            // edge crossing helpers; t from linear interpolation
            let lerp = |fa: f64, fb: f64| fa / (fa - fb);
            let bottom = || {
                (
                    EdgeKey {
                        ix: cx % nx_mod,
                        iy: cy,
                        vertical: false,
                    },
                    [x0 + lerp(f00, f10) * (x1 - x0), y0],
                )
            };
            let top = || {
                (
                    EdgeKey {
                        ix: cx % nx_mod,
                        iy: cy + 1,
                        vertical: false,
                    },
                    [x0 + lerp(f01, f11) * (x1 - x0), y1],
                )
            };
            let left = || {
                (
                    EdgeKey {
                        ix: cx % nx_mod,
                        iy: cy,
                        vertical: true,
                    },
                    [x0, y0 + lerp(f00, f01) * (y1 - y0)],
                )
            };
            let right = || {
                (
                    EdgeKey {
                        ix: (cx + 1) % nx_mod,
                        iy: cy,
                        vertical: true,
                    },
                    [x1, y0 + lerp(f10, f11) * (y1 - y0)],
                )
            };
            match case {
                1 | 14 => segments.push((left(), bottom())),
                2 | 13 => segments.push((bottom(), right())),
                3 | 12 => segments.push((left(), right())),
                4 | 11 => segments.push((right(), top())),
                6 | 9 => segments.push((bottom(), top())),
                7 | 8 => segments.push((left(), top())),
                5 | 10 => {
                    // saddle: disambiguate by the cell-center value
                    let center = 0.25 * (f00 + f10 + f11 + f01);
                    let positive_center = center > 0.0;
                    if (case == 5) == positive_center {
                        segments.push((left(), top()));
                        segments.push((bottom(), right()));
                    } else {
                        segments.push((left(), bottom()));
                        segments.push((right(), top()));
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    segments
}

/// Stitch marching-squares segments into polylines (chains of points).
/// Returns (points, closed) per chain.
fn stitch_chains(
    segments: &[((EdgeKey, [f64; 2]), (EdgeKey, [f64; 2]))],
) -> Vec<(Vec<[f64; 2]>, bool)> {
    let mut by_edge: HashMap<EdgeKey, Vec<usize>> = HashMap::new();
    for (i, seg) in segments.iter().enumerate() {
        by_edge.entry(seg.0 .0).or_default().push(i);
        by_edge.entry(seg.1 .0).or_default().push(i);
    }
    let mut used = vec![false; segments.len()];
    let mut chains = Vec::new();

    let walk = |start: usize,
                start_from_first_end: bool,
                used: &mut Vec<bool>|
     -> (Vec<(EdgeKey, [f64; 2])>, bool) {
        let mut pts = Vec::new();
        let seg = &segments[start];
        let (tail, head) = if start_from_first_end {
            (seg.0, seg.1)
        } else {
            (seg.1, seg.0)
        };
        pts.push(tail);
        pts.push(head);
        used[start] = true;
        let start_edge = tail.0;
        let mut current_edge = head.0;
        loop {
            let next = by_edge
                .get(&current_edge)
                .and_then(|ids| ids.iter().copied().find(|&i| !used[i]));
            let Some(i) = next else {
                return (pts, false);
            };
            used[i] = true;
            let seg = &segments[i];
            let (a, b) = if seg.0 .0 == current_edge {
                (seg.0, seg.1)
            } else {
                (seg.1, seg.0)
            };
            // replace duplicate junction point with the mean
            let last = pts.last_mut().unwrap();
            last.1 = [0.5 * (last.1[0] + a.1[0]), 0.5 * (last.1[1] + a.1[1])];
            pts.push(b);
            current_edge = b.0;
            if current_edge == start_edge {
                return (pts, true);
            }
        }
    };

    // open chains first: start at edges of degree 1
    for i in 0..segments.len() {
        if used[i] {
            continue;
        }
        let deg0 = by_edge[&segments[i].0 .0].len();
        let deg1 = by_edge[&segments[i].1 .0].len();
        if deg0 == 1 || deg1 == 1 {
            let (pts, closed) = walk(i, deg0 == 1, &mut used);
            chains.push((pts.into_iter().map(|p| p.1).collect(), closed));
        }
    }
    // remaining are loops
    for i in 0..segments.len() {
        if !used[i] {
            let (pts, closed) = walk(i, true, &mut used);
            let mut points: Vec<[f64; 2]> = pts.into_iter().map(|p| p.1).collect();
            if closed && points.len() > 1 {
                points.pop(); // drop repeated start point
            }
            chains.push((points, closed));
        }
    }
    chains
}

/// Extract the connected level-set component of Re(psi) (or Im with the
/// flag) through the seed point. The level is the field value at the seed.
pub fn trace_level_set(
    psi: &GridFunction,
    seed: &[f64],
    cfg: &TraceConfig,
) -> Result<Fibre> {
    let dom = &psi.domain;
    assert_eq!(dom.dim(), 2, "level-set tracing targets d = 2");
    let probe = LevelField::new(psi, 0.0, cfg.use_imag)?;
    let s = probe.value(seed)?;
    let field = LevelField {
        field: probe.field,
        grads: probe.grads,
        level: s,
    };

    let range = field.field.real_range();
    let scale = range.max(
        field
            .field
            .values
            .iter()
            .map(|c| c.re.abs())
            .fold(0.0, f64::max)
            * 1e-3,
    );
    let width = dom.axes.iter().map(|a| a.width()).fold(0.0, f64::max);
    let grad = field.gradient(seed)?;
    let gnorm = grad.iter().map(|v| v * v).sum::<f64>().sqrt();
    if gnorm <= cfg.grad_tol_factor * scale / width {
        return Err(GenspecError::DegenerateGradient {
            seed: seed.to_vec(),
            grad: gnorm,
        });
    }

    let grid = refine_field(&field.field, cfg.refine)?;
    let segments = marching_squares(&grid, s);
    let chains = stitch_chains(&segments);
    if chains.is_empty() {
        return Err(GenspecError::ComponentTooShort { vertices: 0 });
    }

    // component nearest the seed (periodic-aware distance in x)
    let x_width = if grid.x_periodic { grid.x_width } else { 0.0 };
    let point_dist = |p: &[f64; 2]| -> f64 {
        let mut dx = p[0] - seed[0];
        if x_width > 0.0 {
            dx = dx - (dx / x_width).round() * x_width;
        }
        (dx * dx + (p[1] - seed[1]) * (p[1] - seed[1])).sqrt()
    };
    let (best_chain, closed) = chains
        .iter()
        .min_by(|a, b| {
            let da = a.0.iter().map(|p| point_dist(p)).fold(f64::INFINITY, f64::min);
            let db = b.0.iter().map(|p| point_dist(p)).fold(f64::INFINITY, f64::min);
            da.partial_cmp(&db).unwrap()
        })
        .map(|(pts, closed)| (pts.clone(), *closed))
        .unwrap();
    if best_chain.len() < 12 {
        return Err(GenspecError::ComponentTooShort {
            vertices: best_chain.len(),
        });
    }

    // unwrap periodic jumps so arc lengths are continuous
    let mut points: Vec<Vec<f64>> = Vec::with_capacity(best_chain.len());
    for p in &best_chain {
        let mut q = vec![p[0], p[1]];
        if let Some(prev) = points.last() {
            if x_width > 0.0 {
                let jump = ((q[0] - prev[0]) / x_width).round();
                q[0] -= jump * x_width;
            }
        }
        points.push(q);
    }

    // orientation: y non-decreasing at the vertex nearest the seed
    let nearest = (0..points.len())
        .min_by(|&a, &b| {
            point_dist(&[points[a][0], points[a][1]])
                .partial_cmp(&point_dist(&[points[b][0], points[b][1]]))
                .unwrap()
        })
        .unwrap();
    let next = (nearest + 1).min(points.len() - 1);
    let prev = nearest.saturating_sub(1);
    if points[next][1] < points[prev][1] {
        points.reverse();
    }

    // Newton-project vertices onto the exact level set
    let tol = cfg.level_tol_factor * range;
    let projected: Vec<Vec<f64>> = points
        .iter()
        .map(|p| field.project(p, tol, 12))
        .collect::<Result<_>>()?;

    Ok(Fibre {
        points: projected,
        level: s,
        seed: seed.to_vec(),
        spacing: 0.0,
        closed,
        weights: vec![],
    })
}

/// Re-place the polyline vertices at exact arc-length increments. The
/// spacing is snapped to total_length / round(total_length / h) so that
/// open-fibre endpoints are preserved exactly.
pub fn resample_uniform(f: &Fibre, h: f64) -> Result<Fibre> {
    let total = f.total_length();
    if total < 3.0 * h {
        return Err(GenspecError::FibreTooShort {
            length: total,
            spacing: h,
        });
    }
    let mut verts = f.points.clone();
    if f.closed {
        verts.push(f.points[0].clone());
    }
    let n_seg = (total / h).round().max(3.0) as usize;
    let h_eff = total / n_seg as f64;
    let n_points = if f.closed { n_seg } else { n_seg + 1 };

    let mut out = Vec::with_capacity(n_points);
    let mut seg_idx = 0usize;
    let mut seg_start_len = 0.0;
    let mut seg_len = dist(&verts[0], &verts[1]);
    for i in 0..n_points {
        let target = i as f64 * h_eff;
        while seg_start_len + seg_len < target && seg_idx + 2 < verts.len() {
            seg_start_len += seg_len;
            seg_idx += 1;
            seg_len = dist(&verts[seg_idx], &verts[seg_idx + 1]);
        }
        let t = if seg_len > 0.0 {
            ((target - seg_start_len) / seg_len).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let a = &verts[seg_idx];
        let b = &verts[seg_idx + 1];
        out.push(a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect());
    }
    if !f.closed {
        *out.last_mut().unwrap() = f.points.last().unwrap().clone();
    }
    Ok(Fibre {
        points: out,
        level: f.level,
        seed: f.seed.clone(),
        spacing: h_eff,
        closed: f.closed,
        weights: vec![],
    })
}

/// Project every vertex of a fibre back onto the level set of psi.
pub fn reproject(f: &Fibre, psi: &GridFunction, cfg: &TraceConfig) -> Result<Fibre> {
    let field = LevelField::new(psi, f.level, cfg.use_imag)?;
    let range = field.field.real_range();
    let tol = cfg.level_tol_factor * range;
    let points: Vec<Vec<f64>> = f
        .points
        .iter()
        .map(|p| field.project(p, tol, 12))
        .collect::<Result<_>>()?;
    Ok(Fibre {
        points,
        weights: f.weights.clone(),
        ..f.clone()
    })
}

/// Attach invariant-density weights w_z proportional to rho0 at the fibre
/// points, normalized to sum 1. Negative interpolated densities are
/// clipped to zero before normalization.
pub fn attach_weights(f: &Fibre, rho0: &GridFunction) -> Result<Fibre> {
    let mut w = Vec::with_capacity(f.points.len());
    for p in &f.points {
        let v = rho0.interpolate(p)?.re;
        w.push(v.max(0.0));
    }
    let total: f64 = w.iter().sum();
    if total <= 0.0 {
        return Err(GenspecError::AllWeightsZero);
    }
    for v in &mut w {
        *v /= total;
    }
    Ok(Fibre {
        weights: w,
        ..f.clone()
    })
}

/// Symmetric Hausdorff distance between two polylines (vertex-based).
pub fn hausdorff(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    let one_sided = |p: &[Vec<f64>], q: &[Vec<f64>]| {
        p.iter()
            .map(|x| {
                q.iter()
                    .map(|y| dist(x, y))
                    .fold(f64::INFINITY, f64::min)
            })
            .fold(0.0, f64::max)
    };
    one_sided(a, b).max(one_sided(b, a))
}
