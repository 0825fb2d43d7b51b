//! Dense Hermitian eigendecompositions, truncated SVD, eigenvalue smoothing,
//! and the fast diagonal-minus-rank-one eigenupdate used inside the EM loops.
//!
//! The dense paths are backed by nalgebra; the rank-one downdate is solved
//! here directly via the secular equation with deflation, so the EM iteration
//! can refresh the interference eigensystem in O(R^2) instead of O(M^3).

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::{CMat, CVec};

/// Relative threshold below which eigen/singular values are treated as zero.
/// Tiny negatives above `-EPS_PSD_REL * max` are clamped to 0 so downstream
/// logs and divisions stay defined on Gram-matrix inputs.
pub const EPS_PSD_REL: f64 = 1e-10;

/// Deflation threshold for the secular solver, relative to the update norm
/// (for components of z) and to the leading diagonal entry (for gaps).
const DEFLATE_REL: f64 = 1e-12;

/// Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending
/// and paired with the orthonormal columns of `vectors`.
#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<f64>,
    pub vectors: CMat,
}

impl EigenSystem {
    /// Reconstruct `V diag(values) V^H`.
    pub fn reconstruct(&self) -> CMat {
        let k = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &v) in self.values.iter().enumerate().take(k) {
            scaled.column_mut(j).scale_mut(v);
        }
        &scaled * self.vectors.adjoint()
    }
}

/// Leading singular triplets of a complex matrix: `left` is M x N,
/// `right` is L x N, both column-orthonormal; `singulars` descending.
#[derive(Debug, Clone)]
pub struct TruncatedSvd {
    pub left: CMat,
    pub singulars: Vec<f64>,
    pub right: CMat,
}

fn check_finite(a: &CMat) -> Result<()> {
    if a.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
        return Err(Error::InvalidInput(
            "matrix contains non-finite entries".into(),
        ));
    }
    Ok(())
}

fn clamp_tiny_negatives(values: &mut [f64]) {
    let max = values.iter().cloned().fold(0.0_f64, |a, b| a.max(b.abs()));
    let eps = EPS_PSD_REL * max;
    for v in values.iter_mut() {
        if *v < 0.0 && *v >= -eps {
            *v = 0.0;
        }
    }
}

/// Full eigendecomposition of a Hermitian matrix.
///
/// The input is symmetrized as `(A + A^H)/2` before decomposing, so inputs
/// Hermitian only to roundoff are accepted. Eigenvalues come back descending.
pub fn hermitian_eig(a: &CMat) -> Result<EigenSystem> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::InvalidInput(format!(
            "expected nonempty square matrix, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    check_finite(a)?;
    let herm = (a + a.adjoint()).scale(0.5);
    let eig = herm.symmetric_eigen();
    let m = a.nrows();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].partial_cmp(&eig.eigenvalues[i]).unwrap());
    let mut values = Vec::with_capacity(m);
    let mut vectors = CMat::zeros(m, m);
    for (dst, &src) in order.iter().enumerate() {
        values.push(eig.eigenvalues[src]);
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    clamp_tiny_negatives(&mut values);
    Ok(EigenSystem { values, vectors })
}

/// One recorded Givens rotation used to deflate nearly equal diagonal pairs.
struct Rotation {
    i: usize,
    j: usize,
    c: f64,
    s: f64,
}

/// Secular equation `f(x) = 1 - sum_j u_j^2 / (d_j - x)` evaluated in shifted
/// coordinates: `delta_j = d_j - shift`, argument `mu = x - shift`.
fn secular(delta: &[f64], usq: &[f64], mu: f64) -> f64 {
    let mut acc = 1.0;
    for (dj, uj2) in delta.iter().zip(usq) {
        acc -= uj2 / (dj - mu);
    }
    acc
}

/// Solve for the root of the secular equation in `(lo, hi)` by bisection in
/// coordinates shifted to the endpoint nearest the root. `lo`/`hi` are
/// absolute eigenvalue bounds; returns `(lambda, shift, mu)` with
/// `lambda = shift + mu` so callers can form `d_j - lambda` accurately as
/// `(d_j - shift) - mu`.
fn solve_secular_root(d: &[f64], usq: &[f64], lo: f64, hi: f64) -> (f64, f64, f64) {
    let mid = 0.5 * (lo + hi);
    let deltas_for = |shift: f64| -> Vec<f64> { d.iter().map(|dj| dj - shift).collect() };
    // f decreases monotonically between poles, so the sign at the midpoint
    // tells which half holds the root.
    let f_mid = {
        let delta = deltas_for(mid);
        secular(&delta, usq, 0.0)
    };
    let shift = if f_mid >= 0.0 { hi } else { lo };
    let delta = deltas_for(shift);
    let (mut a, mut b) = if f_mid >= 0.0 {
        (mid - shift, 0.0)
    } else {
        (0.0, mid - shift)
    };
    // Bisection on mu in (a, b); f is strictly decreasing in lambda (and so
    // in mu), with f -> +inf at the left pole and -inf at the right pole.
    for _ in 0..160 {
        let mu = 0.5 * (a + b);
        if mu == a || mu == b {
            break;
        }
        let fv = secular(&delta, usq, mu);
        if fv > 0.0 {
            a = mu;
        } else if fv < 0.0 {
            b = mu;
        } else {
            a = mu;
            b = mu;
        }
    }
    let mu = 0.5 * (a + b);
    (shift + mu, shift, mu)
}

/// Eigendecomposition of `Diag(d) - z z^H` for descending `d`.
///
/// Eigenvalues are obtained from the secular equation with deflation of
/// negligible update components and nearly equal diagonal pairs; the
/// eigenvector for root `lambda` is `(Diag(d) - lambda I)^{-1} z`, assembled
/// in the deflated coordinates and rotated back.
pub fn diag_minus_rank_one_eig(d: &[f64], z: &CVec) -> Result<EigenSystem> {
    let r = d.len();
    if r == 0 || z.len() != r {
        return Err(Error::InvalidInput(format!(
            "dimension mismatch: d has {} entries, z has {}",
            r,
            z.len()
        )));
    }
    if d.iter().any(|v| !v.is_finite()) || z.iter().any(|c| !c.re.is_finite() || !c.im.is_finite())
    {
        return Err(Error::InvalidInput("non-finite entries".into()));
    }
    let scale = d[0].abs().max(d[r - 1].abs()).max(1e-300);
    for w in d.windows(2) {
        if w[0] < w[1] - 1e-12 * scale {
            return Err(Error::InvalidInput("d must be sorted descending".into()));
        }
    }

    // Factor out phases: Diag(d) - z z^H = Theta (Diag(d) - u u^T) Theta^H
    // with u = |z| entrywise and Theta the diagonal of unit phases.
    let mut phases = vec![C64::new(1.0, 0.0); r];
    let mut u = vec![0.0_f64; r];
    for (k, zk) in z.iter().enumerate() {
        let mag = zk.norm();
        u[k] = mag;
        if mag > 0.0 {
            phases[k] = zk / mag;
        }
    }
    let unorm = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let tol_z = DEFLATE_REL * unorm;
    let tol_gap = DEFLATE_REL * d[0].abs().max(scale);

    // Deflate small components, then nearly equal neighbours via Givens.
    let mut active: Vec<usize> = (0..r).filter(|&k| u[k] > tol_z).collect();
    let mut rotations: Vec<Rotation> = Vec::new();
    let mut k = 0;
    while k + 1 < active.len() {
        let i = active[k];
        let j = active[k + 1];
        if d[i] - d[j] < tol_gap {
            let rho = (u[i] * u[i] + u[j] * u[j]).sqrt();
            let (c, s) = (u[i] / rho, u[j] / rho);
            rotations.push(Rotation { i, j, c, s });
            u[i] = rho;
            u[j] = 0.0;
            active.remove(k + 1);
        } else {
            k += 1;
        }
    }

    let kact = active.len();
    let dact: Vec<f64> = active.iter().map(|&i| d[i]).collect();
    let usq: Vec<f64> = active.iter().map(|&i| u[i] * u[i]).collect();
    let rho_total: f64 = usq.iter().sum();

    // values[k] holds (lambda, shift, mu, secular_index) for active roots and
    // plain diagonal entries for deflated coordinates.
    let mut pairs: Vec<(f64, Option<(f64, f64, usize)>)> = Vec::with_capacity(r);
    for idx in 0..kact {
        let hi = dact[idx];
        let lo = if idx + 1 < kact {
            dact[idx + 1]
        } else {
            dact[kact - 1] - rho_total
        };
        let (lambda, shift, mu) = if kact == 1 {
            // Single active coordinate: exact root.
            (dact[0] - rho_total, dact[0], -rho_total)
        } else {
            solve_secular_root(&dact, &usq, lo, hi)
        };
        pairs.push((lambda, Some((shift, mu, idx))));
    }
    for idx in 0..r {
        if !active.contains(&idx) {
            pairs.push((d[idx], None));
        }
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());

    let deflated: Vec<usize> = (0..r).filter(|i| !active.contains(i)).collect();
    let mut values = Vec::with_capacity(r);
    let mut vectors = CMat::zeros(r, r);
    let mut deflated_cursor = 0usize;
    for (col, (lambda, info)) in pairs.iter().enumerate() {
        values.push(*lambda);
        let mut w = vec![0.0_f64; r];
        match info {
            Some((shift, mu, _)) => {
                for (pos, &orig) in active.iter().enumerate() {
                    // d_j - lambda evaluated as (d_j - shift) - mu for accuracy
                    let denom = (dact[pos] - shift) - mu;
                    w[orig] = u[orig] / denom;
                }
                let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
                for x in w.iter_mut() {
                    *x /= norm;
                }
            }
            None => {
                w[deflated[deflated_cursor]] = 1.0;
                deflated_cursor += 1;
            }
        }
        // Undo the deflation rotations (reverse order), then the phases.
        for rot in rotations.iter().rev() {
            let (wi, wj) = (w[rot.i], w[rot.j]);
            w[rot.i] = rot.c * wi - rot.s * wj;
            w[rot.j] = rot.s * wi + rot.c * wj;
        }
        for (row, &wr) in w.iter().enumerate() {
            vectors[(row, col)] = phases[row] * wr;
        }
    }
    clamp_tiny_negatives(&mut values);
    Ok(EigenSystem { values, vectors })
}

/// Orthonormalize the columns of `m` in place with two modified Gram-Schmidt
/// passes. Columns whose residual vanishes are replaced by unit vectors
/// orthogonal to the previous ones.
fn orthonormalize_columns(m: &mut CMat) {
    let (nrows, ncols) = m.shape();
    for j in 0..ncols {
        for _ in 0..2 {
            for i in 0..j {
                let proj = m.column(i).dotc(&m.column(j));
                let prev = m.column(i).clone_owned();
                let mut col = m.column_mut(j);
                col.axpy(-proj, &prev, C64::new(1.0, 0.0));
            }
        }
        let norm = m.column(j).norm();
        if norm > 1e-300 {
            m.column_mut(j).unscale_mut(norm);
        } else {
            // Degenerate column: pick a basis vector orthogonal to the rest.
            for cand in 0..nrows {
                let mut e = CVec::zeros(nrows);
                e[cand] = C64::new(1.0, 0.0);
                for i in 0..j {
                    let proj = m.column(i).dotc(&e);
                    e.axpy(-proj, &m.column(i).clone_owned(), C64::new(1.0, 0.0));
                }
                let n = e.norm();
                if n > 0.5 {
                    e.unscale_mut(n);
                    m.set_column(j, &e);
                    break;
                }
            }
        }
    }
}

/// Top-`n` singular triplets of an M x L complex matrix.
///
/// Works through the Gram matrix on the smaller side, so the squared
/// singular values equal the leading eigenvalues of `Y Y^H` by construction.
pub fn principal_svd(y: &CMat, n: usize) -> Result<TruncatedSvd> {
    let (m, l) = y.shape();
    if n == 0 || n > m.min(l) {
        return Err(Error::InvalidInput(format!(
            "requested {} singular triplets from a {}x{} matrix",
            n, m, l
        )));
    }
    check_finite(y)?;
    let (mut left, singulars, mut right);
    if m <= l {
        let gram = y * y.adjoint();
        let eig = hermitian_eig(&gram)?;
        let sig: Vec<f64> = eig.values[..n].iter().map(|&v| v.max(0.0).sqrt()).collect();
        left = eig.vectors.columns(0, n).clone_owned();
        right = y.adjoint() * &left;
        for j in 0..n {
            if sig[j] > 0.0 {
                right.column_mut(j).unscale_mut(sig[j]);
            }
        }
        orthonormalize_columns(&mut right);
        singulars = sig;
    } else {
        let gram = y.adjoint() * y;
        let eig = hermitian_eig(&gram)?;
        let sig: Vec<f64> = eig.values[..n].iter().map(|&v| v.max(0.0).sqrt()).collect();
        right = eig.vectors.columns(0, n).clone_owned();
        left = y * &right;
        for j in 0..n {
            if sig[j] > 0.0 {
                left.column_mut(j).unscale_mut(sig[j]);
            }
        }
        orthonormalize_columns(&mut left);
        singulars = sig;
    }
    Ok(TruncatedSvd {
        left,
        singulars,
        right,
    })
}

/// Replace the trailing `M - n` eigenvalues with their mean, the ML noise
/// variance under a rank-`n`-plus-identity covariance model. Returns the
/// smoothed sequence and the mean. The sum of the sequence is preserved.
pub fn smooth_eigenvalues(lams: &[f64], n: usize) -> Result<(Vec<f64>, f64)> {
    let m = lams.len();
    if n >= m {
        return Err(Error::InvalidInput(format!(
            "smoothing rank {} must be < dimension {}",
            n, m
        )));
    }
    let tail = &lams[n..];
    // Mean of identical values must reproduce them bitwise so smoothing is
    // idempotent.
    let nu = if tail.iter().all(|&v| v == tail[0]) {
        tail[0]
    } else {
        tail.iter().sum::<f64>() / tail.len() as f64
    };
    let mut out = lams.to_vec();
    for v in out[n..].iter_mut() {
        *v = nu;
    }
    Ok((out, nu))
}
