//! Direct solve of the steady-state deviation equation: matrix-free
//! restarted GMRES on the vectorized traceless subspace, preconditioned by
//! the resolvent of the Hamiltonian commutator in its eigenbasis. The
//! superoperator is never materialized.

use ndarray::{Array1, Array2};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::ModelParams;
use crate::linalg::{adjoint, eigh_checked, gmres_restarted};
use crate::liouville::{DensityMatrix, LiouvilleOps};

#[derive(Debug, Clone)]
pub struct DirectSettings {
    /// Largest basis dimension accepted by the solver.
    pub dim_cap: usize,
    /// Relative residual target on the vectorized equation.
    pub rel_tol: f64,
    /// GMRES restart length.
    pub restart: usize,
    pub max_matvecs: usize,
    /// Floor on the damping part of the preconditioner, as a fraction of the
    /// mean coupling weight.
    pub damping_floor: f64,
}

impl Default for DirectSettings {
    fn default() -> Self {
        DirectSettings {
            dim_cap: 400,
            rel_tol: 1e-10,
            restart: 40,
            max_matvecs: 50_000,
            damping_floor: 1e-3,
        }
    }
}

impl DirectSettings {
    pub fn with_dim_cap(mut self, cap: usize) -> Self {
        self.dim_cap = cap;
        self
    }

    pub fn with_restart(mut self, restart: usize) -> Self {
        self.restart = restart;
        self
    }
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct DirectReport {
    pub matvecs: usize,
    pub restarts: usize,
    pub residual: f64,
    /// Size of the hermiticity correction applied to the raw solution.
    pub hermiticity_fix: f64,
}

/// Solve the steady-state deviation equation at the rates of `params`:
///
///   -i[H, X] - gamma1 D_V(X) - gamma2 D_V'(X) = 2 (n_L - n_1) / dim,
///
/// returning the traceless Hermitian deviation X. The drive normalization
/// makes the rate imbalance drop out of the right-hand side; for
/// dgamma = 0 this is the strict linear-response equation, and for finite
/// dgamma it is the exact steady state of the master equation rescaled by
/// the imbalance, which is what the propagation path converges to.
pub fn solve_deviation_direct(
    ops: &LiouvilleOps,
    params: &ModelParams,
    settings: &DirectSettings,
) -> Result<(DensityMatrix, DirectReport)> {
    params.validate()?;
    let dim = ops.basis().dim();
    if dim > settings.dim_cap {
        return Err(Error::DirectSolveCap { dim, cap: settings.dim_cap });
    }
    let (g1, g2) = (params.gamma1(), params.gamma2());

    // Preconditioner: in the H eigenbasis the commutator is diagonal with
    // entries -i(E_a - E_b); damping is approximated by the diagonal of the
    // dissipator's anticommutator part.
    let h_dense = ops.hamiltonian().to_dense();
    let (energies, q) = eigh_checked(&h_dense)?;
    let q_dag = adjoint(&q);
    let coupling: Array1<f64> = {
        let basis = ops.basis();
        let weights: Vec<f64> = basis
            .states()
            .iter()
            .map(|s| {
                let occ = s.occupations();
                let (n1, nl) = (occ[0] as f64, occ[occ.len() - 1] as f64);
                nl * (n1 + 1.0) + n1 * (nl + 1.0)
            })
            .collect();
        Array1::from_iter((0..dim).map(|a| {
            (0..dim).map(|k| q[[k, a]].norm_sqr() * weights[k]).sum::<f64>()
        }))
    };
    let mean_coupling = coupling.mean().unwrap_or(0.0);
    let floor = if mean_coupling > 0.0 { settings.damping_floor * mean_coupling } else { 1.0 };
    let gamma = params.gamma;
    let denom = {
        let mut d = Array2::<Complex64>::zeros((dim, dim));
        for a in 0..dim {
            for b in 0..dim {
                let damping = gamma * (coupling[a] + coupling[b]).max(floor);
                d[[a, b]] = Complex64::new(-damping, -(energies[a] - energies[b]));
            }
        }
        d
    };

    let apply_a = |x: &Array2<Complex64>| ops.master_rhs_rates(x, g1, g2);
    let apply_m_inv = |y: &Array2<Complex64>| {
        let mut w = q_dag.dot(y).dot(&q);
        w.zip_mut_with(&denom, |v, d| *v /= d);
        q.dot(&w).dot(&q_dag)
    };

    let rhs = ops.drive_unit();
    let (mut x, rep) = gmres_restarted(
        apply_a,
        apply_m_inv,
        &rhs,
        settings.restart,
        settings.max_matvecs,
        settings.rel_tol,
    )?;
    if !rep.converged {
        return Err(Error::NonConvergence(format!(
            "direct solve stopped at relative residual {:.3e} after {} operator applications",
            rep.residual, rep.matvecs
        )));
    }

    // project onto the traceless Hermitian manifold
    let tr: Complex64 = x.diag().iter().sum();
    let shift = tr / dim as f64;
    for i in 0..dim {
        x[[i, i]] -= shift;
    }
    let fix = crate::linalg::hermiticity_drift(&x);
    crate::linalg::hermitize(&mut x);

    let dm = DensityMatrix::from_array(ops.basis().clone(), x)?;
    Ok((
        dm,
        DirectReport {
            matvecs: rep.matvecs,
            restarts: rep.restarts,
            residual: rep.residual,
            hermiticity_fix: fix,
        },
    ))
}
