//! Leading eigenpairs of generator matrices and the invariant density.

use ndarray::{Array1, Array2, Axis as NdAxis};
use ndarray_linalg::{Eig, Inverse, Solve};
use num_complex::Complex64;

use crate::error::{GenspecError, Result};
use crate::generator::{GeneratorMatrix, OperatorKind};
use crate::sde::GridFunction;

/// Ordered eigenvalue/eigenvector pairs of a discretized generator.
///
/// Eigenvalues are sorted by decreasing real part with conjugate pairs
/// adjacent (positive imaginary part first). Each eigenvector is scaled to
/// max modulus 1 with its largest entry rotated to the positive real axis.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub eigenvalues: Vec<Complex64>,
    pub eigenvectors: Vec<Array1<Complex64>>,
    pub kind: OperatorKind,
    pub domain: Option<crate::sde::DomainSpec>,
}

impl Spectrum {
    /// Eigenvector k as a grid function (panics for fibre operators).
    pub fn eigenfunction(&self, k: usize) -> GridFunction {
        let dom = self
            .domain
            .clone()
            .expect("fibre spectra carry no domain");
        GridFunction::new(dom, self.eigenvectors[k].clone(), format!("psi_{k}"))
    }

    pub fn len(&self) -> usize {
        self.eigenvalues.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eigenvalues.is_empty()
    }
}

/// Result of eliminating boundary-constraint rows from a generator matrix:
/// the reduced operator on interior nodes plus the boundary reconstruction
/// map psi_B = recon * psi_I.
struct Eliminated {
    interior: Vec<usize>,
    boundary: Vec<usize>,
    reduced: Array2<f64>,
    recon: Option<Array2<f64>>,
}

fn eliminate_bc(g: &GeneratorMatrix) -> Result<Eliminated> {
    let m = g.size();
    if g.bc_rows.is_empty() {
        return Ok(Eliminated {
            interior: (0..m).collect(),
            boundary: vec![],
            reduced: g.matrix.clone(),
            recon: None,
        });
    }
    let boundary: Vec<usize> = g.bc_rows.clone();
    let is_bc: Vec<bool> = {
        let mut v = vec![false; m];
        for &b in &boundary {
            v[b] = true;
        }
        v
    };
    let interior: Vec<usize> = (0..m).filter(|&i| !is_bc[i]).collect();
    let nb = boundary.len();
    let ni = interior.len();

    // Constraint rows: C psi = 0, split into boundary and interior columns.
    let mut c_bb = Array2::zeros((nb, nb));
    let mut c_bi = Array2::zeros((nb, ni));
    for (r, &row) in boundary.iter().enumerate() {
        for (cb, &col) in boundary.iter().enumerate() {
            c_bb[[r, cb]] = g.matrix[[row, col]];
        }
        for (ci, &col) in interior.iter().enumerate() {
            c_bi[[r, ci]] = g.matrix[[row, col]];
        }
    }
    let c_bb_inv = c_bb
        .inv()
        .map_err(|e| GenspecError::EigensolverFailure(format!("singular constraint block: {e}")))?;
    let recon = -c_bb_inv.dot(&c_bi); // psi_B = recon psi_I

    // Reduced interior operator M_II + M_IB recon.
    let mut m_ii = Array2::zeros((ni, ni));
    let mut m_ib = Array2::zeros((ni, nb));
    for (r, &row) in interior.iter().enumerate() {
        for (ci, &col) in interior.iter().enumerate() {
            m_ii[[r, ci]] = g.matrix[[row, col]];
        }
        for (cb, &col) in boundary.iter().enumerate() {
            m_ib[[r, cb]] = g.matrix[[row, col]];
        }
    }
    let reduced = m_ii + m_ib.dot(&recon);
    Ok(Eliminated {
        interior,
        boundary,
        reduced,
        recon: Some(recon),
    })
}

/// Deterministic eigenvalue ordering: real part descending, then |Im|
/// ascending, then positive imaginary part first.
fn sort_order(vals: &Array1<Complex64>) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..vals.len()).collect();
    idx.sort_by(|&a, &b| {
        let (va, vb) = (vals[a], vals[b]);
        vb.re
            .partial_cmp(&va.re)
            .unwrap()
            .then(va.im.abs().partial_cmp(&vb.im.abs()).unwrap())
            .then(vb.im.partial_cmp(&va.im).unwrap())
    });
    idx
}

fn normalize(mut v: Array1<Complex64>) -> Array1<Complex64> {
    let mut best = 0usize;
    let mut best_mod = 0.0;
    for (i, c) in v.iter().enumerate() {
        if c.norm() > best_mod {
            best_mod = c.norm();
            best = i;
        }
    }
    if best_mod > 0.0 {
        let phase = v[best] / best_mod;
        let scale = (Complex64::new(1.0, 0.0) / phase) / best_mod;
        v.mapv_inplace(|c| c * scale);
    }
    v
}

/// Full eigendecomposition with boundary elimination; returns sorted pairs.
fn full_spectrum(g: &GeneratorMatrix) -> Result<(Vec<Complex64>, Vec<Array1<Complex64>>)> {
    let elim = eliminate_bc(g)?;
    let (vals, vecs) = elim
        .reduced
        .eig()
        .map_err(|e| GenspecError::EigensolverFailure(e.to_string()))?;
    let order = sort_order(&vals);
    let m = g.size();
    let mut out_vals = Vec::with_capacity(order.len());
    let mut out_vecs = Vec::with_capacity(order.len());
    for &i in &order {
        out_vals.push(vals[i]);
        let vi = vecs.index_axis(NdAxis(1), i).to_owned();
        let mut full = Array1::from_elem(m, Complex64::new(0.0, 0.0));
        for (r, &row) in elim.interior.iter().enumerate() {
            full[row] = vi[r];
        }
        if let Some(recon) = &elim.recon {
            for (rb, &row) in elim.boundary.iter().enumerate() {
                let mut acc = Complex64::new(0.0, 0.0);
                for (ci, _) in elim.interior.iter().enumerate() {
                    acc += recon[[rb, ci]] * vi[ci];
                }
                full[row] = acc;
            }
        }
        out_vecs.push(normalize(full));
    }
    Ok((out_vals, out_vecs))
}

/// Fraction of a grid vector's energy carried by the unresolvable Nyquist
/// sawtooth (-1)^j along one axis of the tensor grid.
fn nyquist_fraction(v: &Array1<Complex64>, domain: &crate::sde::DomainSpec, axis: usize) -> f64 {
    let total: f64 = v.iter().map(|c| c.norm_sqr()).sum();
    if total <= 0.0 {
        return 0.0;
    }
    let comp = nyquist_component(v, domain, axis);
    comp.iter().map(|c| c.norm_sqr()).sum::<f64>() / total
}

/// Orthogonal projection of a grid vector onto the sawtooth subspace
/// along one axis.
fn nyquist_component(
    v: &Array1<Complex64>,
    domain: &crate::sde::DomainSpec,
    axis: usize,
) -> Array1<Complex64> {
    let n = domain.axes[axis].n;
    let stride: usize = domain.axes[axis + 1..].iter().map(|a| a.n).product();
    let m = v.len();
    let outer = m / (n * stride);
    let mut out = Array1::from_elem(m, Complex64::new(0.0, 0.0));
    for o in 0..outer {
        for s in 0..stride {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..n {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                acc += sign * v[(o * n + j) * stride + s];
            }
            acc /= n as f64;
            for j in 0..n {
                let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
                out[(o * n + j) * stride + s] = sign * acc;
            }
        }
    }
    out
}

/// The k eigenpairs with largest real part, residual-checked on the
/// non-boundary rows. Modes dominated by the Nyquist sawtooth along a
/// periodic axis are dropped: with D2 = D1^2 the sawtooth is an exact
/// spurious kernel vector of the collocation operator.
pub fn leading_spectrum(g: &GeneratorMatrix, k: usize) -> Result<Spectrum> {
    let (mut vals, mut vecs) = full_spectrum(g)?;
    if let Some(domain) = &g.domain {
        let periodic_even: Vec<usize> = (0..domain.dim())
            .filter(|&a| domain.axes[a].boundary.is_periodic() && domain.axes[a].n % 2 == 0)
            .collect();
        if !periodic_even.is_empty() {
            // The eigensolver mixes the degenerate pair {physical zero
            // mode, sawtooth}; recombine the near-zero cluster into the
            // member with minimal sawtooth energy before filtering.
            let radius = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
            let lam_min = vals.iter().map(|v| v.norm()).fold(f64::INFINITY, f64::min);
            let cluster_tol = (1e-8 * radius).max(100.0 * lam_min);
            let cluster: Vec<usize> = (0..vals.len())
                .filter(|&i| vals[i].norm() <= cluster_tol)
                .collect();
            if cluster.len() > 1 {
                let kc = cluster.len();
                let mut s_mat = Array2::<Complex64>::zeros((kc, kc));
                let mut m_mat = Array2::<Complex64>::zeros((kc, kc));
                let comps: Vec<Vec<Array1<Complex64>>> = cluster
                    .iter()
                    .map(|&i| {
                        periodic_even
                            .iter()
                            .map(|&a| nyquist_component(&vecs[i], domain, a))
                            .collect()
                    })
                    .collect();
                let inner = |x: &Array1<Complex64>, y: &Array1<Complex64>| -> Complex64 {
                    x.iter().zip(y.iter()).map(|(a, b)| a.conj() * b).sum()
                };
                for p in 0..kc {
                    for q in 0..kc {
                        m_mat[[p, q]] = inner(&vecs[cluster[p]], &vecs[cluster[q]]);
                        for (cp, cq) in comps[p].iter().zip(comps[q].iter()) {
                            s_mat[[p, q]] += inner(cp, cq);
                        }
                    }
                }
                // smallest generalized Rayleigh quotient of (S, M)
                let m_inv_s = m_mat
                    .inv()
                    .map_err(|e| GenspecError::EigensolverFailure(format!("cluster gram: {e}")))?
                    .dot(&s_mat);
                let (cl_vals, cl_vecs) = m_inv_s
                    .eig()
                    .map_err(|e| GenspecError::EigensolverFailure(format!("cluster eig: {e}")))?;
                let best_cl = (0..kc)
                    .min_by(|&a, &b| cl_vals[a].re.partial_cmp(&cl_vals[b].re).unwrap())
                    .unwrap();
                let coeff = cl_vecs.index_axis(NdAxis(1), best_cl);
                let mut combined =
                    Array1::from_elem(vecs[cluster[0]].len(), Complex64::new(0.0, 0.0));
                for (p, &i) in cluster.iter().enumerate() {
                    combined = combined + vecs[i].mapv(|c| c * coeff[p]);
                }
                let keep_val = cluster
                    .iter()
                    .map(|&i| vals[i])
                    .min_by(|a, b| a.norm().partial_cmp(&b.norm()).unwrap())
                    .unwrap();
                vals[cluster[0]] = keep_val;
                vecs[cluster[0]] = normalize(combined);
            }
            let keep: Vec<usize> = (0..vals.len())
                .filter(|&i| {
                    periodic_even
                        .iter()
                        .all(|&a| nyquist_fraction(&vecs[i], domain, a) < 0.5)
                })
                .collect();
            vals = keep.iter().map(|&i| vals[i]).collect();
            vecs = keep.iter().map(|&i| vecs[i].clone()).collect();
        }
    }
    let k = k.min(vals.len());
    let norm = g.inf_norm().max(f64::MIN_POSITIVE);
    let is_bc: Vec<bool> = {
        let mut v = vec![false; g.size()];
        for &b in &g.bc_rows {
            v[b] = true;
        }
        v
    };
    for i in 0..k {
        let v = &vecs[i];
        let lam = vals[i];
        let mut resid = 0.0f64;
        for (r, row) in g.matrix.rows().into_iter().enumerate() {
            if is_bc[r] {
                continue;
            }
            let mut acc = Complex64::new(0.0, 0.0);
            for (c, &mrc) in row.iter().enumerate() {
                if mrc != 0.0 {
                    acc += mrc * v[c];
                }
            }
            resid = resid.max((acc - lam * v[r]).norm());
        }
        let rel = resid / norm;
        if rel > 1e-6 {
            return Err(GenspecError::ResidualTooLarge {
                index: i,
                residual: rel,
                tol: 1e-6,
            });
        }
    }
    Ok(Spectrum {
        eigenvalues: vals[..k].to_vec(),
        eigenvectors: vecs[..k].to_vec(),
        kind: g.kind,
        domain: g.domain.clone(),
    })
}

/// Leading eigenvalues only (no residual gate); used for fibre operators
/// where boundary rows perturb the near-zero mode.
pub fn leading_eigenvalues(g: &GeneratorMatrix, k: usize) -> Result<Vec<Complex64>> {
    let (vals, _) = full_spectrum(g)?;
    Ok(vals[..k.min(vals.len())].to_vec())
}

/// Solve L rho = 0: the eigenfunction with eigenvalue closest to zero,
/// rescaled real, nonnegative, and normalized to unit discrete integral.
pub fn invariant_density(g: &GeneratorMatrix) -> Result<GridFunction> {
    assert_eq!(
        g.kind,
        OperatorKind::FokkerPlanck,
        "invariant density requires a Fokker-Planck matrix"
    );
    let (vals, vecs) = full_spectrum(g)?;
    let radius = vals.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let mut best = 0usize;
    let mut best_key = (f64::INFINITY, f64::INFINITY);
    for (i, v) in vals.iter().enumerate() {
        let key = (v.norm(), v.im.abs());
        if key < best_key {
            best_key = key;
            best = i;
        }
    }
    if best_key.0 > 1e-4 * radius {
        return Err(GenspecError::ZeroModeNotFound {
            tol: 1e-4 * radius,
            closest: best_key.0,
        });
    }
    // The pseudospectral second derivative can carry a spurious extra
    // kernel vector (the Nyquist sawtooth) when the drift vanishes. Gather
    // every eigenvalue in a tight cluster around zero and project the
    // uniform function onto their span; for a simple kernel this reduces
    // to the zero-mode eigenvector itself.
    let cluster_tol = (1e-8 * radius).max(100.0 * best_key.0);
    let cluster: Vec<usize> = (0..vals.len())
        .filter(|&i| vals[i].norm() <= cluster_tol)
        .collect();
    let v: Array1<Complex64> = if cluster.len() <= 1 {
        vecs[best].clone()
    } else {
        let m = vecs[best].len();
        let k = cluster.len();
        let mut b = Array2::<Complex64>::zeros((m, k));
        for (j, &i) in cluster.iter().enumerate() {
            b.column_mut(j).assign(&vecs[i]);
        }
        let bh = b.mapv(|c| c.conj()).reversed_axes();
        let gram = bh.dot(&b);
        let ones = Array1::<Complex64>::from_elem(m, Complex64::new(1.0, 0.0));
        let rhs = bh.dot(&ones);
        let coeffs = gram
            .solve(&rhs)
            .map_err(|e| GenspecError::EigensolverFailure(format!("kernel projection: {e}")))?;
        b.dot(&coeffs)
    };
    // Rotate to the real axis and fix the overall sign by the integral.
    let mut rho: Array1<f64> = v.mapv(|c| c.re);
    let imag_max = v.iter().map(|c| c.im.abs()).fold(0.0, f64::max);
    if imag_max > 1e-8 {
        return Err(GenspecError::EigensolverFailure(format!(
            "zero mode has imaginary component {imag_max:.3e}"
        )));
    }
    let domain = g
        .domain
        .clone()
        .ok_or_else(|| GenspecError::EigensolverFailure("density needs a domain".into()))?;
    let w = domain.quadrature_weights();
    let integral: f64 = rho.iter().zip(w.iter()).map(|(r, w)| r * w).sum();
    if integral < 0.0 {
        rho.mapv_inplace(|x| -x);
    }
    let integral = integral.abs();
    if integral <= 0.0 {
        return Err(GenspecError::AllWeightsZero);
    }
    // Negativity check relative to the density peak: spectral truncation
    // leaves shallow dips where the true density is essentially zero;
    // anything deeper than 1e-4 of the peak means a wrong mode.
    let peak = rho.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
    let min = rho.iter().fold(0.0f64, |m, &v| m.min(v)) / peak;
    if min < -1e-4 {
        return Err(GenspecError::NegativeDensity { min });
    }
    rho /= integral;
    Ok(GridFunction::from_real(domain, rho, "rho_0"))
}

/// Rescale a complex eigenfunction so its value at the anchor point is
/// real and positive; the modulus profile is unchanged.
pub fn fix_phase(psi: &GridFunction, anchor: &[f64]) -> Result<GridFunction> {
    let v = psi.interpolate(anchor)?;
    let modulus = v.norm();
    if modulus < 1e-8 {
        return Err(GenspecError::AnchorDegenerate { value: modulus });
    }
    let rot = v.conj() / modulus;
    Ok(GridFunction::new(
        psi.domain.clone(),
        psi.values.mapv(|c| c * rot),
        psi.label.clone(),
    ))
}
