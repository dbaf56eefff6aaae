//! Adaptive Dormand-Prince 5(4) relaxation of the master equation to its
//! steady state, with per-step Frobenius error control and trace /
//! hermiticity drift tracking.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fock::ModelParams;
use crate::linalg::frobenius;
use crate::liouville::{DensityMatrix, LiouvilleOps};

/// Controls for a steady-state relaxation run.
#[derive(Debug, Clone)]
pub struct PropagationSettings {
    /// Converged when ||rhs(R)||_F falls below `rel_tol` times the drive
    /// scale (the Frobenius norm of 2 dgamma (n_L - n_1)/dim, or `gamma`
    /// itself for the balanced case dgamma = 0).
    pub rel_tol: f64,
    /// Model-time horizon; non-convergence by then is flagged, not fatal.
    pub t_max: f64,
    /// Absolute per-step error tolerance on the Frobenius norm.
    pub abs_tol: f64,
    /// Model-time interval between convergence checks (default 1/gamma).
    pub check_interval: f64,
    pub max_steps: usize,
}

impl PropagationSettings {
    pub fn for_params(params: &ModelParams, dim: usize) -> Self {
        PropagationSettings {
            rel_tol: 1e-6,
            t_max: 400.0 / params.gamma,
            abs_tol: 1e-10 * dim as f64,
            check_interval: 1.0 / params.gamma,
            max_steps: 50_000_000,
        }
    }

    pub fn with_rel_tol(mut self, tol: f64) -> Self {
        self.rel_tol = tol;
        self
    }

    pub fn with_t_max(mut self, t_max: f64) -> Self {
        self.t_max = t_max;
        self
    }

    pub fn with_abs_tol(mut self, abs_tol: f64) -> Self {
        self.abs_tol = abs_tol;
        self
    }
}

/// What happened during a relaxation run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PropagationReport {
    pub elapsed_time: f64,
    pub steps: usize,
    pub rejected_steps: usize,
    pub residual_norm: f64,
    /// residual_norm divided by the drive scale
    pub residual_ratio: f64,
    pub converged: bool,
    pub max_trace_drift: f64,
    pub max_hermiticity_drift: f64,
    pub resymmetrizations: usize,
}

// Dormand-Prince 5(4) tableau.
const A2: [f64; 1] = [1.0 / 5.0];
const A3: [f64; 2] = [3.0 / 40.0, 9.0 / 40.0];
const A4: [f64; 3] = [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0];
const A5: [f64; 4] =
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0];
const A6: [f64; 5] = [
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
];
const B: [f64; 6] =
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0];
// B - B_hat, error weights of the embedded 4th-order solution
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Integrate the master equation from `r0` until the right-hand side is
/// small against the drive, or until `t_max`. Non-convergence is reported,
/// with the partial state still returned.
pub fn propagate_to_steady_state(
    r0: &DensityMatrix,
    ops: &LiouvilleOps,
    params: &ModelParams,
    settings: &PropagationSettings,
) -> Result<(DensityMatrix, PropagationReport)> {
    if !ops.basis().same_sector(r0.basis()) {
        return Err(Error::BasisMismatch("initial state on a different sector".into()));
    }
    params.validate()?;
    let (g1, g2) = (params.gamma1(), params.gamma2());
    let drive_scale = if params.dgamma != 0.0 {
        params.dgamma.abs() * ops.drive_unit_norm()
    } else {
        params.gamma
    };

    let mut r = r0.data().clone();
    let mut k1 = ops.master_rhs_rates(&r, g1, g2);
    let mut t = 0.0f64;
    let mut h = 1e-4f64;
    let mut steps = 0usize;
    let mut rejected = 0usize;
    let mut max_trace_drift = 0.0f64;
    let mut max_herm_drift = 0.0f64;
    let mut resym = 0usize;
    let mut next_check = settings.check_interval;
    let mut residual = frobenius(&k1);
    let mut converged = residual / drive_scale < settings.rel_tol;

    while !converged && t < settings.t_max {
        if steps + rejected >= settings.max_steps {
            break;
        }
        if t + h > settings.t_max {
            h = settings.t_max - t;
        }

        let k2 = ops.master_rhs_rates(&stage(&r, h, &[&k1], &A2), g1, g2);
        let k3 = ops.master_rhs_rates(&stage(&r, h, &[&k1, &k2], &A3), g1, g2);
        let k4 = ops.master_rhs_rates(&stage(&r, h, &[&k1, &k2, &k3], &A4), g1, g2);
        let k5 = ops.master_rhs_rates(&stage(&r, h, &[&k1, &k2, &k3, &k4], &A5), g1, g2);
        let k6 =
            ops.master_rhs_rates(&stage(&r, h, &[&k1, &k2, &k3, &k4, &k5], &A6), g1, g2);
        let r_new = stage(&r, h, &[&k1, &k2, &k3, &k4, &k5, &k6], &B);
        let k7 = ops.master_rhs_rates(&r_new, g1, g2);

        let mut err_mat = Array2::<Complex64>::zeros(r.raw_dim());
        for (ki, ei) in [&k1, &k2, &k3, &k4, &k5, &k6, &k7].iter().zip(E.iter()) {
            if *ei != 0.0 {
                err_mat.zip_mut_with(ki, |a, b| *a += b * *ei);
            }
        }
        let err = frobenius(&err_mat) * h;

        if err <= settings.abs_tol {
            t += h;
            steps += 1;
            r = r_new;
            k1 = k7; // first-same-as-last

            let tr: Complex64 = r.diag().iter().sum();
            max_trace_drift = max_trace_drift.max((tr - Complex64::new(1.0, 0.0)).norm());
            let drift = crate::linalg::hermiticity_drift(&r);
            max_herm_drift = max_herm_drift.max(drift);
            if drift > 1e-10 {
                crate::linalg::hermitize(&mut r);
                resym += 1;
                k1 = ops.master_rhs_rates(&r, g1, g2);
            }

            if t >= next_check || t >= settings.t_max {
                residual = frobenius(&k1);
                converged = residual / drive_scale < settings.rel_tol;
                while next_check <= t {
                    next_check += settings.check_interval;
                }
            }
        } else {
            rejected += 1;
        }

        let factor = if err == 0.0 {
            5.0
        } else {
            (0.9 * (settings.abs_tol / err).powf(0.2)).clamp(0.2, 5.0)
        };
        h = (h * factor).min(settings.t_max.max(1.0));
        if h < 1e-12 {
            return Err(Error::NonConvergence(
                "step size collapsed below 1e-12 model time".into(),
            ));
        }
    }

    residual = frobenius(&ops.master_rhs_rates(&r, g1, g2));
    converged = residual / drive_scale < settings.rel_tol;
    let state = DensityMatrix::from_array(r0.basis().clone(), r)?;
    let report = PropagationReport {
        elapsed_time: t,
        steps,
        rejected_steps: rejected,
        residual_norm: residual,
        residual_ratio: residual / drive_scale,
        converged,
        max_trace_drift,
        max_hermiticity_drift: max_herm_drift,
        resymmetrizations: resym,
    };
    Ok((state, report))
}

fn stage(
    r: &Array2<Complex64>,
    h: f64,
    ks: &[&Array2<Complex64>],
    coeffs: &[f64],
) -> Array2<Complex64> {
    let mut out = r.clone();
    for (k, c) in ks.iter().zip(coeffs.iter()) {
        if *c != 0.0 {
            let hc = h * *c;
            out.zip_mut_with(k, |a, b| *a += b * hc);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::FockBasis;
    use rand::SeedableRng;

    #[test]
    fn balanced_rates_relax_to_maximally_mixed() {
        let params = ModelParams::new(3, 2, 1.0, 0.5, 0.05, 0.0).unwrap();
        let basis = FockBasis::enumerate(3, 2).unwrap();
        let ops = LiouvilleOps::new(basis.clone(), &params).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(42);
        let r0 = DensityMatrix::random_physical(basis.clone(), &mut rng);
        let settings = PropagationSettings::for_params(&params, basis.dim())
            .with_rel_tol(1e-9)
            .with_t_max(4000.0);
        let (r, report) = propagate_to_steady_state(&r0, &ops, &params, &settings).unwrap();
        assert!(report.converged, "report: {report:?}");
        let mixed = DensityMatrix::maximally_mixed(basis);
        assert!(r.max_abs_diff(&mixed).unwrap() < 1e-7, "report: {report:?}");
        assert!(report.max_trace_drift < 1e-9);
        assert!(report.max_hermiticity_drift < 1e-9);
    }

    #[test]
    fn trace_is_conserved_along_the_run() {
        let params = ModelParams::new(2, 1, 1.0, 0.0, 0.04, 0.004).unwrap();
        let basis = FockBasis::enumerate(2, 1).unwrap();
        let ops = LiouvilleOps::new(basis.clone(), &params).unwrap();
        let r0 = DensityMatrix::maximally_mixed(basis);
        let settings = PropagationSettings::for_params(&params, 2).with_rel_tol(1e-8);
        let (r, report) = propagate_to_steady_state(&r0, &ops, &params, &settings).unwrap();
        assert!(report.converged);
        assert!((r.trace() - Complex64::new(1.0, 0.0)).norm() < 1e-9);
        assert!(report.max_trace_drift < 1e-9);
    }

    #[test]
    fn non_convergence_is_flagged_not_fatal() {
        let params = ModelParams::new(4, 2, 1.0, 1.0, 0.04, 0.004).unwrap();
        let basis = FockBasis::enumerate(4, 2).unwrap();
        let ops = LiouvilleOps::new(basis.clone(), &params).unwrap();
        let r0 = DensityMatrix::maximally_mixed(basis);
        let settings = PropagationSettings::for_params(&params, 10)
            .with_rel_tol(1e-12)
            .with_t_max(0.5);
        let (_, report) = propagate_to_steady_state(&r0, &ops, &params, &settings).unwrap();
        assert!(!report.converged);
        assert!(report.elapsed_time >= 0.5 - 1e-9);
    }
}
