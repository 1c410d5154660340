//! Thick-restart Arnoldi for the largest-magnitude eigenvalues of a linear map.
//!
//! Restarts keep an orthonormal basis of the wanted Ritz vectors, which spans
//! an invariant subspace of the projected matrix, so the Arnoldi relation
//! survives the restart with a dense (non-Hessenberg) leading block.

use ndarray::{s, Array2};
use ndarray_linalg::Eig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{LabError, Result, C64};

#[derive(Clone, Copy, Debug)]
pub struct ArnoldiOptions {
    pub nev: usize,
    pub ncv: usize,
    pub tol: f64,
    pub max_restarts: usize,
}

impl Default for ArnoldiOptions {
    fn default() -> Self {
        Self { nev: 6, ncv: 40, tol: 1e-12, max_restarts: 200 }
    }
}

pub(crate) struct RitzPairs {
    pub values: Vec<C64>,
    pub vectors: Vec<Vec<C64>>,
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn norm(a: &[C64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn axpy(y: &mut [C64], a: C64, x: &[C64]) {
    y.iter_mut().zip(x).for_each(|(u, v)| *u += a * v);
}

/// Two passes of classical Gram–Schmidt; returns the coefficients.
fn orthogonalize(w: &mut [C64], basis: &[Vec<C64>]) -> Vec<C64> {
    let mut h = vec![C64::new(0.0, 0.0); basis.len()];
    for _ in 0..2 {
        for (k, v) in basis.iter().enumerate() {
            let c = dot(v, w);
            h[k] += c;
            axpy(w, -c, v);
        }
    }
    h
}

pub(crate) fn start_vector(n: usize, seed: u64) -> Vec<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
}

pub(crate) fn largest_magnitude(
    n: usize,
    mut op: impl FnMut(&[C64], &mut [C64]),
    opts: ArnoldiOptions,
    v0: Vec<C64>,
) -> Result<RitzPairs> {
    let nev = opts.nev.min(n).max(1);
    let m = opts.ncv.max(nev + 2).min(n);
    let keep = (nev + (m - nev) / 3).clamp(nev, m.saturating_sub(1).max(1));

    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
    let nv = norm(&v0);
    if nv == 0.0 {
        return Err(LabError::Numerical("zero start vector".into()));
    }
    basis.push(v0.into_iter().map(|z| z / nv).collect());
    let mut h = Array2::<C64>::zeros((m + 1, m));
    let mut k = 0usize;
    let mut w = vec![C64::new(0.0, 0.0); n];

    for _restart in 0..=opts.max_restarts {
        let mut m_eff = m;
        for j in k..m {
            op(&basis[j], &mut w);
            let coeffs = orthogonalize(&mut w, &basis[..=j]);
            for (i, c) in coeffs.into_iter().enumerate() {
                h[[i, j]] = c;
            }
            let beta = norm(&w);
            h[[j + 1, j]] = C64::new(beta, 0.0);
            let scale = h.slice(s![..=j + 1, j]).iter().map(|z| z.norm()).fold(0.0, f64::max);
            if beta <= 1e-14 * scale.max(f64::MIN_POSITIVE) {
                m_eff = j + 1;
                break;
            }
            basis.truncate(j + 1);
            basis.push(w.iter().map(|z| z / beta).collect());
        }
        let hm = h.slice(s![..m_eff, ..m_eff]).to_owned();
        let (theta, y) = hm.eig()?;
        let mut order: Vec<usize> = (0..m_eff).collect();
        order.sort_by(|&a, &b| theta[b].norm().total_cmp(&theta[a].norm()).then(a.cmp(&b)));
        let beta = if m_eff < m || m_eff == n { 0.0 } else { h[[m_eff, m_eff - 1]].norm() };
        let resid: Vec<f64> = order.iter().map(|&i| beta * y[[m_eff - 1, i]].norm()).collect();
        let converged = order
            .iter()
            .take(nev)
            .zip(&resid)
            .all(|(&i, &r)| r <= opts.tol * theta[i].norm().max(f64::MIN_POSITIVE));
        if converged || beta == 0.0 || _restart == opts.max_restarts {
            if !converged && beta != 0.0 {
                return Err(LabError::Numerical(format!(
                    "Arnoldi did not converge after {} restarts",
                    opts.max_restarts
                )));
            }
            let take = nev.min(m_eff);
            let mut values = Vec::with_capacity(take);
            let mut vectors = Vec::with_capacity(take);
            for &i in order.iter().take(take) {
                let mut x = vec![C64::new(0.0, 0.0); n];
                for (r, v) in basis.iter().take(m_eff).enumerate() {
                    axpy(&mut x, y[[r, i]], v);
                }
                let nx = norm(&x);
                x.iter_mut().for_each(|z| *z /= nx);
                values.push(theta[i]);
                vectors.push(x);
            }
            return Ok(RitzPairs { values, vectors });
        }

        // Thick restart on an orthonormal basis of the kept Ritz vectors.
        let mut q: Vec<Vec<C64>> = Vec::with_capacity(keep);
        for &i in order.iter().take(keep) {
            let mut col: Vec<C64> = (0..m).map(|r| y[[r, i]]).collect();
            orthogonalize(&mut col, &q);
            let nc = norm(&col);
            if nc > 1e-10 {
                col.iter_mut().for_each(|z| *z /= nc);
                q.push(col);
            }
        }
        let kk = q.len();
        let hq: Vec<Vec<C64>> = q
            .iter()
            .map(|col| (0..m).map(|r| (0..m).map(|c| h[[r, c]] * col[c]).sum()).collect())
            .collect();
        let mut hn = Array2::<C64>::zeros((m + 1, m));
        for a in 0..kk {
            for b in 0..kk {
                hn[[a, b]] = dot(&q[a], &hq[b]);
            }
        }
        let hlast = h[[m, m - 1]];
        for b in 0..kk {
            hn[[kk, b]] = hlast * q[b][m - 1];
        }
        let mut nb: Vec<Vec<C64>> = Vec::with_capacity(m + 1);
        for col in &q {
            let mut u = vec![C64::new(0.0, 0.0); n];
            for (r, v) in basis.iter().take(m).enumerate() {
                axpy(&mut u, col[r], v);
            }
            nb.push(u);
        }
        nb.push(basis[m].clone());
        basis = nb;
        h = hn;
        k = kk;
    }
    unreachable!()
}
