//! Dissipative dynamics of the carrier density matrix: the master-equation
//! right-hand side, relaxation to the steady state, and the direct solve of
//! the steady-state deviation used as an oracle for the propagation path.

mod checkpoint;
mod direct;
mod propagate;

pub use direct::{solve_deviation_direct, DirectReport, DirectSettings};
pub use propagate::{propagate_to_steady_state, PropagationReport, PropagationSettings};

use std::sync::Arc;

use ndarray::{Array1, Array2};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::fock::{ChainOperator, FockBasis, ModelParams};
use crate::linalg::{frobenius, hermiticity_drift, hermitize, max_abs};

/// Dense complex matrix over the Fock basis holding a state, a steady state,
/// or the traceless deviation from the maximally mixed state.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    basis: Arc<FockBasis>,
    data: Array2<Complex64>,
}

impl DensityMatrix {
    pub fn from_array(basis: Arc<FockBasis>, data: Array2<Complex64>) -> Result<Self> {
        if data.dim() != (basis.dim(), basis.dim()) {
            return Err(Error::BasisMismatch(format!(
                "matrix of shape {:?} on a basis of dimension {}",
                data.dim(),
                basis.dim()
            )));
        }
        Ok(DensityMatrix { basis, data })
    }

    /// The maximally mixed state 1/dim.
    pub fn maximally_mixed(basis: Arc<FockBasis>) -> Self {
        let dim = basis.dim();
        let data = Array2::from_diag(&Array1::from_elem(
            dim,
            Complex64::new(1.0 / dim as f64, 0.0),
        ));
        DensityMatrix { basis, data }
    }

    /// Projector onto a single Fock state.
    pub fn fock_projector(basis: Arc<FockBasis>, index: usize) -> Self {
        let dim = basis.dim();
        let mut data = Array2::zeros((dim, dim));
        data[[index, index]] = Complex64::new(1.0, 0.0);
        DensityMatrix { basis, data }
    }

    /// Random full-rank physical state G G' / tr(G G') from a seeded stream.
    pub fn random_physical<R: Rng>(basis: Arc<FockBasis>, rng: &mut R) -> Self {
        let dim = basis.dim();
        let mut g = Array2::<Complex64>::zeros((dim, dim));
        for v in g.iter_mut() {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            *v = Complex64::new(re, im);
        }
        let mut rho = g.dot(&g.t().mapv(|z| z.conj()));
        let tr: Complex64 = rho.diag().iter().sum();
        rho.mapv_inplace(|z| z / tr.re);
        hermitize(&mut rho);
        DensityMatrix { basis, data: rho }
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    pub fn data(&self) -> &Array2<Complex64> {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut Array2<Complex64> {
        &mut self.data
    }

    pub fn into_data(self) -> Array2<Complex64> {
        self.data
    }

    pub fn trace(&self) -> Complex64 {
        self.data.diag().iter().sum()
    }

    pub fn hermiticity_drift(&self) -> f64 {
        hermiticity_drift(&self.data)
    }

    pub fn hermitize(&mut self) {
        hermitize(&mut self.data);
    }

    pub fn frobenius(&self) -> f64 {
        frobenius(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        max_abs(&self.data)
    }

    pub fn max_abs_diff(&self, other: &DensityMatrix) -> Result<f64> {
        if !self.basis.same_sector(&other.basis) {
            return Err(Error::BasisMismatch("comparing states across sectors".into()));
        }
        Ok(max_abs(&(&self.data - &other.data)))
    }

    /// Check the contract of a physical state: Hermitian, unit trace,
    /// non-negative spectrum (within `tol`).
    pub fn validate_physical(&self, tol: f64) -> Result<()> {
        let drift = self.hermiticity_drift();
        if drift > tol {
            return Err(Error::NotHermitian { deviation: drift });
        }
        let tr = self.trace();
        if (tr - Complex64::new(1.0, 0.0)).norm() > tol {
            return Err(Error::InvalidParams(format!("trace = {tr} is not 1")));
        }
        let (w, _) = crate::linalg::eigh_checked(&self.data)?;
        if w.iter().any(|&x| x < -tol) {
            return Err(Error::InvalidParams(format!(
                "negative eigenvalue {:.3e}",
                w.iter().cloned().fold(f64::INFINITY, f64::min)
            )));
        }
        Ok(())
    }

    pub fn validate_traceless(&self, tol: f64) -> Result<()> {
        let tr = self.trace().norm();
        if tr > tol {
            return Err(Error::InvalidParams(format!("trace norm {tr:.3e} exceeds {tol:.1e}")));
        }
        Ok(())
    }

    /// Write the checkpoint file format (see the module docs of `checkpoint`).
    pub fn write_checkpoint<W: std::io::Write>(&self, w: W, hermitian: bool) -> Result<()> {
        checkpoint::write(w, &self.basis, &self.data, hermitian)
    }

    /// Read a checkpoint written by `write_checkpoint`, bit-exact.
    pub fn read_checkpoint<Rd: std::io::Read>(basis: Arc<FockBasis>, r: Rd) -> Result<Self> {
        let (sites, particles, _herm, data) = checkpoint::read(r)?;
        if sites != basis.sites() || particles != basis.particles() {
            return Err(Error::BasisMismatch(format!(
                "checkpoint sector ({sites},{particles}) does not match basis ({},{})",
                basis.sites(),
                basis.particles()
            )));
        }
        DensityMatrix::from_array(basis, data)
    }
}

/// Precomputed operators entering the master equation for one parameter point.
pub struct LiouvilleOps {
    basis: Arc<FockBasis>,
    hamiltonian: ChainOperator,
    jump: ChainOperator,
    jump_dag: ChainOperator,
    /// V'V (diagonal as a matrix identity, stored sparse)
    vdv: ChainOperator,
    /// V V'
    vvd: ChainOperator,
    /// diagonal of 2 (n_L - n_1) / dim
    drive_diag: Array1<f64>,
    drive_unit_norm: f64,
}

impl LiouvilleOps {
    pub fn new(basis: Arc<FockBasis>, params: &ModelParams) -> Result<Self> {
        params.validate()?;
        if basis.sites() != params.sites || basis.particles() != params.particles {
            return Err(Error::BasisMismatch("params do not match the basis sector".into()));
        }
        let hamiltonian =
            ChainOperator::hamiltonian(basis.clone(), params.hopping, params.interaction);
        let jump = ChainOperator::jump(basis.clone())?;
        let jump_dag = jump.dagger();
        let vdv = jump_dag.matmul(&jump, "jump_dag_jump", true)?;
        let vvd = jump.matmul(&jump_dag, "jump_jump_dag", true)?;
        let dim = basis.dim();
        let drive_diag = Array1::from_iter(basis.states().iter().map(|s| {
            let occ = s.occupations();
            2.0 * (occ[occ.len() - 1] as f64 - occ[0] as f64) / dim as f64
        }));
        let drive_unit_norm = drive_diag.iter().map(|x| x * x).sum::<f64>().sqrt();
        Ok(LiouvilleOps {
            basis,
            hamiltonian,
            jump,
            jump_dag,
            vdv,
            vvd,
            drive_diag,
            drive_unit_norm,
        })
    }

    pub fn basis(&self) -> &Arc<FockBasis> {
        &self.basis
    }

    pub fn hamiltonian(&self) -> &ChainOperator {
        &self.hamiltonian
    }

    pub fn jump(&self) -> &ChainOperator {
        &self.jump
    }

    /// Frobenius norm of the unit drive 2(n_L - n_1)/dim.
    pub fn drive_unit_norm(&self) -> f64 {
        self.drive_unit_norm
    }

    /// Dense matrix of the unit drive.
    pub fn drive_unit(&self) -> Array2<Complex64> {
        Array2::from_diag(&self.drive_diag.mapv(|x| Complex64::new(x, 0.0)))
    }

    /// Dissipator built on the jump operator V:
    /// V'V R + R V'V - 2 V R V'.
    pub fn dissipator_v(&self, r: &Array2<Complex64>) -> Array2<Complex64> {
        let mut out = self.vdv.apply_left(r);
        out += &self.vdv.apply_right(r);
        let vrv = self.jump_dag.apply_right(&self.jump.apply_left(r));
        out.zip_mut_with(&vrv, |o, x| *o -= 2.0 * x);
        out
    }

    /// Dissipator built on the reversed jump V':
    /// V V' R + R V V' - 2 V' R V.
    pub fn dissipator_vdag(&self, r: &Array2<Complex64>) -> Array2<Complex64> {
        let mut out = self.vvd.apply_left(r);
        out += &self.vvd.apply_right(r);
        let vrv = self.jump.apply_right(&self.jump_dag.apply_left(r));
        out.zip_mut_with(&vrv, |o, x| *o -= 2.0 * x);
        out
    }

    /// Right-hand side of the master equation with explicit rates:
    /// -i[H, R] - g1 * D_V(R) - g2 * D_V'(R).
    pub fn master_rhs_rates(
        &self,
        r: &Array2<Complex64>,
        gamma1: f64,
        gamma2: f64,
    ) -> Array2<Complex64> {
        let hc = self.hamiltonian.apply_left(r);
        let ch = self.hamiltonian.apply_right(r);
        let mut out = &hc - &ch;
        out.mapv_inplace(|z| Complex64::new(z.im, -z.re)); // multiply by -i
        let d1 = self.dissipator_v(r);
        out.zip_mut_with(&d1, |o, x| *o -= gamma1 * x);
        let d2 = self.dissipator_vdag(r);
        out.zip_mut_with(&d2, |o, x| *o -= gamma2 * x);
        out
    }

    /// Master-equation right-hand side at the rates of `params`.
    pub fn master_rhs(&self, r: &DensityMatrix, params: &ModelParams) -> Result<DensityMatrix> {
        if !self.basis.same_sector(r.basis()) {
            return Err(Error::BasisMismatch("state does not live on the operator basis".into()));
        }
        let data = self.master_rhs_rates(r.data(), params.gamma1(), params.gamma2());
        DensityMatrix::from_array(self.basis.clone(), data)
    }

    /// Frobenius norm of the steady-state deviation equation applied to a
    /// candidate X: || -i[H,X] - gamma (D_V + D_V')(X) - 2(n_L - n_1)/dim ||_F.
    pub fn deviation_residual(&self, x: &Array2<Complex64>, gamma: f64) -> f64 {
        let mut lhs = self.master_rhs_rates(x, gamma, gamma);
        for (i, d) in self.drive_diag.iter().enumerate() {
            lhs[[i, i]] -= Complex64::new(*d, 0.0);
        }
        frobenius(&lhs)
    }
}

/// Deviation matrix from a converged steady state: (R - 1/dim) / dgamma.
pub fn extract_deviation(r_steady: &DensityMatrix, dgamma: f64) -> Result<DensityMatrix> {
    if dgamma == 0.0 {
        return Err(Error::InvalidParams(
            "deviation extraction needs a nonzero rate imbalance".into(),
        ));
    }
    let dim = r_steady.dim();
    let mut data = r_steady.data().clone();
    let shift = Complex64::new(1.0 / dim as f64, 0.0);
    for i in 0..dim {
        data[[i, i]] -= shift;
    }
    data.mapv_inplace(|z| z / dgamma);
    DensityMatrix::from_array(r_steady.basis().clone(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::max_abs;
    use approx::assert_abs_diff_eq;

    fn ops_for(l: usize, n: u32, u: f64) -> (Arc<FockBasis>, LiouvilleOps, ModelParams) {
        let params = ModelParams::new(l, n, 1.0, u, 0.04, 0.004).unwrap();
        let basis = FockBasis::enumerate(l, n).unwrap();
        let ops = LiouvilleOps::new(basis.clone(), &params).unwrap();
        (basis, ops, params)
    }

    #[test]
    fn dissipators_on_identity_give_number_imbalance() {
        let (basis, ops, _) = ops_for(3, 1, 0.0);
        let dim = basis.dim();
        let eye = Array2::<Complex64>::eye(dim);
        let d1 = ops.dissipator_v(&eye);
        let d2 = ops.dissipator_vdag(&eye);
        let n1 = ChainOperator::site_number(basis.clone(), 1).unwrap().to_dense();
        let nl = ChainOperator::site_number(basis, 3).unwrap().to_dense();
        let imbalance = (&nl - &n1).mapv(|z| z * 2.0);
        assert!(max_abs(&(&d1 - &imbalance)) < 1e-14);
        assert!(max_abs(&(&d2 + &imbalance)) < 1e-14);
        // detailed balance of the pair on the identity
        assert!(max_abs(&(&d1 + &d2)) < 1e-14);
    }

    #[test]
    fn dissipator_on_edge_projector() {
        // two sites, one particle: D_V on |0,1><0,1| gives 2R - 2|1,0><1,0|
        let (basis, ops, _) = ops_for(2, 1, 0.0);
        let k01 = basis.index_of(&[0, 1]).unwrap();
        let k10 = basis.index_of(&[1, 0]).unwrap();
        let r = DensityMatrix::fock_projector(basis.clone(), k01);
        let d = ops.dissipator_v(r.data());
        let mut expected = r.data().mapv(|z| z * 2.0);
        expected[[k10, k10]] -= Complex64::new(2.0, 0.0);
        assert!(max_abs(&(&d - &expected)) < 1e-14);
        // and D_V' on |1,0><1,0| mirrors it
        let r2 = DensityMatrix::fock_projector(basis, k10);
        let d2 = ops.dissipator_vdag(r2.data());
        let mut expected2 = r2.data().mapv(|z| z * 2.0);
        expected2[[k01, k01]] -= Complex64::new(2.0, 0.0);
        assert!(max_abs(&(&d2 - &expected2)) < 1e-14);
    }

    #[test]
    fn dissipators_are_traceless_on_hermitian_input() {
        let (basis, ops, _) = ops_for(3, 2, 0.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let r = DensityMatrix::random_physical(basis, &mut rng);
        let tr1: Complex64 = ops.dissipator_v(r.data()).diag().iter().sum();
        let tr2: Complex64 = ops.dissipator_vdag(r.data()).diag().iter().sum();
        assert!(tr1.norm() < 1e-13);
        assert!(tr2.norm() < 1e-13);
    }

    #[test]
    fn master_rhs_vanishes_at_equilibrium() {
        let (basis, _, _) = ops_for(4, 2, 1.0);
        let params = ModelParams::new(4, 2, 1.0, 1.0, 0.04, 0.0).unwrap();
        let ops = LiouvilleOps::new(basis.clone(), &params).unwrap();
        let mixed = DensityMatrix::maximally_mixed(basis);
        let rhs = ops.master_rhs(&mixed, &params).unwrap();
        assert!(rhs.max_abs() < 1e-12);
    }

    #[test]
    fn master_rhs_of_mixed_state_is_minus_drive() {
        let (basis, ops, params) = ops_for(4, 2, 0.0);
        let mixed = DensityMatrix::maximally_mixed(basis.clone());
        let rhs = ops.master_rhs(&mixed, &params).unwrap();
        // -2 dgamma (n_L - n_1) / dim
        let n1 = ChainOperator::site_number(basis.clone(), 1).unwrap().to_dense();
        let nl = ChainOperator::site_number(basis.clone(), 4).unwrap().to_dense();
        let expected = (&nl - &n1)
            .mapv(|z| z * Complex64::new(-2.0 * params.dgamma / basis.dim() as f64, 0.0));
        assert!(max_abs(&(rhs.data() - &expected)) < 1e-14);
        // trace-free
        assert!(rhs.trace().norm() < 1e-14);
    }

    #[test]
    fn master_rhs_preserves_hermiticity() {
        let (basis, ops, params) = ops_for(3, 2, 0.7);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        let r = DensityMatrix::random_physical(basis, &mut rng);
        let rhs = ops.master_rhs(&r, &params).unwrap();
        assert!(rhs.hermiticity_drift() < 1e-13);
        assert!(rhs.trace().norm() < 1e-13);
    }

    #[test]
    fn residual_of_zero_candidate_is_drive_norm() {
        let (basis, ops, params) = ops_for(4, 2, 0.0);
        let zero = Array2::<Complex64>::zeros((basis.dim(), basis.dim()));
        let res = ops.deviation_residual(&zero, params.gamma);
        assert_abs_diff_eq!(res, ops.drive_unit_norm(), epsilon = 1e-14);
        assert!(res > 0.0);
    }

    #[test]
    fn extraction_of_mixed_state_is_zero() {
        let (basis, _, _) = ops_for(3, 2, 0.0);
        let mixed = DensityMatrix::maximally_mixed(basis);
        let dev = extract_deviation(&mixed, 0.004).unwrap();
        assert_eq!(dev.max_abs(), 0.0);
        assert!(extract_deviation(&mixed, 0.0).is_err());
    }

    #[test]
    fn random_physical_is_physical() {
        let basis = FockBasis::enumerate(4, 2).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let r = DensityMatrix::random_physical(basis, &mut rng);
        r.validate_physical(1e-10).unwrap();
    }

    use rand::SeedableRng;
}
