//! Small dense-linear-algebra helpers shared across modules: norms,
//! commutators, a checked Hermitian eigendecomposition, and a matrix-free
//! restarted GMRES used by the steady-state solver.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Eigh, UPLO};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub fn commutator(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Array2<Complex64> {
    a.dot(b) - b.dot(a)
}

pub fn max_abs(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn frobenius(a: &Array2<Complex64>) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn adjoint(a: &Array2<Complex64>) -> Array2<Complex64> {
    a.t().mapv(|z| z.conj())
}

/// Max entrywise |A - A'|.
pub fn hermiticity_drift(a: &Array2<Complex64>) -> f64 {
    let n = a.nrows();
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in i..n {
            dev = dev.max((a[[i, j]] - a[[j, i]].conj()).norm());
        }
    }
    dev
}

/// Replace A by (A + A')/2 in place.
pub fn hermitize(a: &mut Array2<Complex64>) {
    let n = a.nrows();
    for i in 0..n {
        a[[i, i]] = Complex64::new(a[[i, i]].re, 0.0);
        for j in i + 1..n {
            let m = 0.5 * (a[[i, j]] + a[[j, i]].conj());
            a[[i, j]] = m;
            a[[j, i]] = m.conj();
        }
    }
}

/// Hilbert-Schmidt inner product <a, b> = sum conj(a_ij) b_ij.
pub fn hs_dot(a: &Array2<Complex64>, b: &Array2<Complex64>) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Full spectrum of a Hermitian matrix, eigenvalues ascending, with the
/// decomposition quality verified against the input.
pub fn eigh_checked(a: &Array2<Complex64>) -> Result<(Array1<f64>, Array2<Complex64>)> {
    let drift = hermiticity_drift(a);
    let scale = max_abs(a).max(1e-300);
    if drift > 1e-10 * scale.max(1.0) {
        return Err(Error::NotHermitian { deviation: drift });
    }
    let mut h = a.clone();
    hermitize(&mut h);
    let (w, q) = h.eigh(UPLO::Lower)?;
    // orthonormality
    let qtq = adjoint(&q).dot(&q);
    let eye = Array2::<Complex64>::eye(a.nrows());
    let ortho = max_abs(&(&qtq - &eye));
    if ortho > 1e-10 {
        return Err(Error::Backend(format!("eigenvector orthonormality off by {ortho:.3e}")));
    }
    // reconstruction
    let wl: Array2<Complex64> =
        Array2::from_diag(&w.mapv(|x| Complex64::new(x, 0.0)));
    let rec = q.dot(&wl).dot(&adjoint(&q));
    let err = max_abs(&(&rec - &h));
    if err > 1e-9 * scale.max(1e-30) {
        return Err(Error::Backend(format!(
            "eigendecomposition reconstruction off by {err:.3e} (scale {scale:.3e})"
        )));
    }
    Ok((w, q))
}

/// Report of a restarted-GMRES solve.
#[derive(Debug, Clone)]
pub struct GmresReport {
    pub matvecs: usize,
    pub restarts: usize,
    pub residual: f64,
    pub converged: bool,
}

/// Right-preconditioned restarted GMRES over matrices treated as
/// Hilbert-Schmidt vectors. `apply_a` is the operator, `apply_m_inv` the
/// preconditioner; the residual reported is the true relative residual.
pub fn gmres_restarted<A, M>(
    mut apply_a: A,
    mut apply_m_inv: M,
    rhs: &Array2<Complex64>,
    restart: usize,
    max_matvecs: usize,
    rel_tol: f64,
) -> Result<(Array2<Complex64>, GmresReport)>
where
    A: FnMut(&Array2<Complex64>) -> Array2<Complex64>,
    M: FnMut(&Array2<Complex64>) -> Array2<Complex64>,
{
    let rhs_norm = frobenius(rhs);
    if rhs_norm == 0.0 {
        return Ok((
            Array2::zeros(rhs.raw_dim()),
            GmresReport { matvecs: 0, restarts: 0, residual: 0.0, converged: true },
        ));
    }
    let mut x = Array2::<Complex64>::zeros(rhs.raw_dim());
    let mut matvecs = 0usize;
    let mut restarts = 0usize;
    let mut residual = 1.0f64;

    while matvecs < max_matvecs {
        let r0 = rhs - &apply_a(&x);
        matvecs += 1;
        let beta = frobenius(&r0);
        residual = beta / rhs_norm;
        if residual < rel_tol {
            return Ok((
                x,
                GmresReport { matvecs, restarts, residual, converged: true },
            ));
        }

        let mut basis: Vec<Array2<Complex64>> = Vec::with_capacity(restart + 1);
        basis.push(r0.mapv(|z| z / beta));
        let mut hess = vec![vec![Complex64::new(0.0, 0.0); restart]; restart + 1];
        let mut cs = vec![Complex64::new(0.0, 0.0); restart];
        let mut sn = vec![Complex64::new(0.0, 0.0); restart];
        let mut g = vec![Complex64::new(0.0, 0.0); restart + 1];
        g[0] = Complex64::new(beta, 0.0);
        let mut k_used = 0usize;

        for k in 0..restart {
            if matvecs >= max_matvecs {
                break;
            }
            let z = apply_m_inv(&basis[k]);
            let mut w = apply_a(&z);
            matvecs += 1;
            // modified Gram-Schmidt
            for (i, q) in basis.iter().enumerate() {
                let hik = hs_dot(q, &w);
                hess[i][k] = hik;
                w.zip_mut_with(q, |wv, qv| *wv -= hik * qv);
            }
            let hkk = frobenius(&w);
            hess[k + 1][k] = Complex64::new(hkk, 0.0);
            if hkk < 1e-14 * rhs_norm {
                // lucky breakdown: exact solution within the subspace
                k_used = k + 1;
                apply_rotations(&mut hess, &mut cs, &mut sn, &mut g, k);
                break;
            }
            basis.push(w.mapv(|z| z / hkk));
            apply_rotations(&mut hess, &mut cs, &mut sn, &mut g, k);
            k_used = k + 1;
            residual = g[k + 1].norm() / rhs_norm;
            if residual < rel_tol {
                break;
            }
        }

        if k_used == 0 {
            return Err(Error::SingularSystem("GMRES made no progress".into()));
        }
        // back-substitution for y in the k_used x k_used triangular system
        let mut y = vec![Complex64::new(0.0, 0.0); k_used];
        for i in (0..k_used).rev() {
            let mut acc = g[i];
            for j in i + 1..k_used {
                acc -= hess[i][j] * y[j];
            }
            if hess[i][i].norm() == 0.0 {
                return Err(Error::SingularSystem("singular Hessenberg factor".into()));
            }
            y[i] = acc / hess[i][i];
        }
        let mut update = Array2::<Complex64>::zeros(rhs.raw_dim());
        for (j, yj) in y.iter().enumerate() {
            update.zip_mut_with(&basis[j], |u, q| *u += yj * q);
        }
        let update = apply_m_inv(&update);
        x += &update;
        restarts += 1;

        if residual < rel_tol {
            // verify the true residual once more on the updated iterate
            let true_res = frobenius(&(rhs - &apply_a(&x))) / rhs_norm;
            matvecs += 1;
            if true_res < rel_tol {
                return Ok((
                    x,
                    GmresReport { matvecs, restarts, residual: true_res, converged: true },
                ));
            }
            residual = true_res;
        }
    }

    Ok((
        x,
        GmresReport { matvecs, restarts, residual, converged: false },
    ))
}

fn apply_rotations(
    hess: &mut [Vec<Complex64>],
    cs: &mut [Complex64],
    sn: &mut [Complex64],
    g: &mut [Complex64],
    k: usize,
) {
    for i in 0..k {
        let t = cs[i].conj() * hess[i][k] + sn[i].conj() * hess[i + 1][k];
        hess[i + 1][k] = -sn[i] * hess[i][k] + cs[i] * hess[i + 1][k];
        hess[i][k] = t;
    }
    let (a, b) = (hess[k][k], hess[k + 1][k]);
    let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
    if r == 0.0 {
        cs[k] = Complex64::new(1.0, 0.0);
        sn[k] = Complex64::new(0.0, 0.0);
    } else {
        cs[k] = a / r;
        sn[k] = b / r;
    }
    hess[k][k] = cs[k].conj() * a + sn[k].conj() * b;
    hess[k + 1][k] = Complex64::new(0.0, 0.0);
    let t = cs[k].conj() * g[k];
    g[k + 1] = -sn[k] * g[k];
    g[k] = t;
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn eigh_identity() {
        let eye = Array2::<Complex64>::eye(5);
        let (w, _) = eigh_checked(&eye).unwrap();
        for x in w.iter() {
            assert_abs_diff_eq!(*x, 1.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn eigh_rejects_non_hermitian() {
        let mut a = Array2::<Complex64>::eye(3);
        a[[0, 1]] = Complex64::new(1.0, 0.0);
        assert!(matches!(eigh_checked(&a), Err(Error::NotHermitian { .. })));
    }

    #[test]
    fn gmres_solves_small_dense_system() {
        // operator: X -> D X + X E with diagonal D, E (acts entrywise)
        let n = 6;
        let d: Vec<f64> = (0..n).map(|i| 1.0 + i as f64).collect();
        let e: Vec<f64> = (0..n).map(|i| 0.3 * i as f64).collect();
        let apply = |x: &Array2<Complex64>| {
            let mut out = x.clone();
            for i in 0..n {
                for j in 0..n {
                    out[[i, j]] = x[[i, j]] * Complex64::new(d[i] + e[j], 0.1 * (i as f64 - j as f64));
                }
            }
            out
        };
        let mut rhs = Array2::<Complex64>::zeros((n, n));
        for i in 0..n {
            for j in 0..n {
                rhs[[i, j]] = Complex64::new((i + j) as f64, (i as f64) - 0.5 * (j as f64));
            }
        }
        let ident = |x: &Array2<Complex64>| x.clone();
        let (x, rep) = gmres_restarted(apply, ident, &rhs, 20, 500, 1e-12).unwrap();
        assert!(rep.converged);
        let resid = frobenius(&(&rhs - &apply(&x))) / frobenius(&rhs);
        assert!(resid < 1e-11, "residual {resid}");
    }

    #[test]
    fn gmres_zero_rhs() {
        let apply = |x: &Array2<Complex64>| x.clone();
        let rhs = Array2::<Complex64>::zeros((4, 4));
        let (x, rep) = gmres_restarted(apply, |x| x.clone(), &rhs, 5, 10, 1e-10).unwrap();
        assert!(rep.converged);
        assert_eq!(max_abs(&x), 0.0);
    }
}
