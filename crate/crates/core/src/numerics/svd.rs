use super::{inner, ComplexArray, C64};
use crate::error::{Error, Result};

/// Sweep cap for one-sided Jacobi.
pub const MAX_SWEEPS: usize = 60;

/// Thin SVD `m = u · diag(s) · vᴴ` with `k = min(rows, cols)` columns.
#[derive(Clone, Debug)]
pub struct SvdResult {
    /// `rows × k`, orthonormal columns.
    pub u: ComplexArray,
    /// Descending, non-negative.
    pub s: Vec<f64>,
    /// `cols × k`, orthonormal columns.
    pub v: ComplexArray,
}

impl SvdResult {
    pub fn nuclear_norm(&self) -> f64 {
        self.s.iter().sum()
    }

    pub fn reconstruct(&self) -> ComplexArray {
        let (rows, k) = (self.u.shape()[0], self.s.len());
        let cols = self.v.shape()[0];
        ComplexArray::from_fn(&[rows, cols], |idx| {
            let (r, c) = (idx / cols, idx % cols);
            (0..k).fold(C64::new(0.0, 0.0), |acc, j| {
                acc + self.u.get(&[r, j]) * self.s[j] * self.v.get(&[c, j]).conj()
            })
        })
    }
}

pub fn svd(m: &ComplexArray) -> Result<SvdResult> {
    let [rows, cols] = m.dims2()?;
    if rows == 0 || cols == 0 {
        return Err(Error::invalid("svd of an empty matrix"));
    }
    if !m.is_finite() {
        return Err(Error::invalid("svd input has non-finite entries"));
    }
    if rows < cols {
        let t = svd(&m.conj_transpose_2d()?)?;
        return Ok(SvdResult {
            u: t.v,
            s: t.s,
            v: t.u,
        });
    }
    let columns = (0..cols)
        .map(|c| (0..rows).map(|r| m.data()[r * cols + c]).collect())
        .collect();
    let thin = svd_columns(columns)?;
    let k = cols;
    let u = ComplexArray::from_fn(&[rows, k], |idx| thin.u[idx % k][idx / k]);
    let v = ComplexArray::from_fn(&[cols, k], |idx| thin.v[idx % k][idx / k]);
    Ok(SvdResult { u, s: thin.s, v })
}

/// Column-major thin SVD used by the low-rank penalty, where the Casorati
/// columns (frames) are already contiguous.
#[derive(Clone, Debug)]
pub(crate) struct ColumnSvd {
    pub u: Vec<Vec<C64>>,
    pub s: Vec<f64>,
    pub v: Vec<Vec<C64>>,
}

/// One-sided (Hestenes) Jacobi on a tall matrix given as its columns.
/// Requires `rows >= columns.len()`.
pub(crate) fn svd_columns(mut a: Vec<Vec<C64>>) -> Result<ColumnSvd> {
    let k = a.len();
    let rows = a.first().map_or(0, Vec::len);
    debug_assert!(rows >= k);
    let tol = 4.0 * f64::EPSILON * (rows as f64).sqrt();
    let mut v: Vec<Vec<C64>> = (0..k)
        .map(|j| {
            let mut col = vec![C64::new(0.0, 0.0); k];
            col[j] = C64::new(1.0, 0.0);
            col
        })
        .collect();

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..k {
            for q in p + 1..k {
                let alpha: f64 = a[p].iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = a[q].iter().map(|z| z.norm_sqr()).sum();
                let gamma = inner(&a[p], &a[q]);
                let g = gamma.norm();
                if g == 0.0 || g <= tol * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * g);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let phase = (gamma / g).conj();
                rotate(&mut a, p, q, c, s, phase);
                rotate(&mut v, p, q, c, s, phase);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::SvdNoConvergence {
            iterations: MAX_SWEEPS,
        });
    }

    let norms: Vec<f64> = a
        .iter()
        .map(|col| col.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let s_max = norms[order[0]];
    let zero_tol = f64::EPSILON * (rows as f64).sqrt() * s_max;
    let mut u: Vec<Vec<C64>> = Vec::with_capacity(k);
    for &j in &order {
        let mut residual = a[j].clone();
        orthogonalize(&mut residual, &u);
        let norm = vec_norm(&residual);
        if norm > zero_tol && norm > 0.0 {
            residual.iter_mut().for_each(|z| *z /= norm);
            u.push(residual);
        } else {
            u.push(complete_basis(&u, rows));
        }
    }
    let s = order.iter().map(|&j| norms[j]).collect();
    let v = order.iter().map(|&j| v[j].clone()).collect();
    Ok(ColumnSvd { u, s, v })
}

/// `(x_p, x_q) ← (c·x_p − s·e·x_q, s·x_p + c·e·x_q)` where `e` carries the
/// phase that makes `x_pᴴ x_q` real.
fn rotate(cols: &mut [Vec<C64>], p: usize, q: usize, c: f64, s: f64, phase: C64) {
    let (head, tail) = cols.split_at_mut(q);
    let (xp, xq) = (&mut head[p], &mut tail[0]);
    for (a, b) in xp.iter_mut().zip(xq.iter_mut()) {
        let bq = *b * phase;
        let ap = *a;
        *a = ap * c - bq * s;
        *b = ap * s + bq * c;
    }
}

fn vec_norm(x: &[C64]) -> f64 {
    x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Two passes of modified Gram–Schmidt against an orthonormal set.
fn orthogonalize(x: &mut [C64], basis: &[Vec<C64>]) {
    for _ in 0..2 {
        for b in basis {
            let proj = inner(b, x);
            x.iter_mut().zip(b).for_each(|(xi, bi)| *xi -= proj * bi);
        }
    }
}

fn complete_basis(basis: &[Vec<C64>], rows: usize) -> Vec<C64> {
    for i in 0..rows {
        let mut e = vec![C64::new(0.0, 0.0); rows];
        e[i] = C64::new(1.0, 0.0);
        orthogonalize(&mut e, basis);
        let norm = vec_norm(&e);
        if norm > 0.5 {
            e.iter_mut().for_each(|z| *z /= norm);
            return e;
        }
    }
    unreachable!("basis already spans the space")
}
