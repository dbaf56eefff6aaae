//! Fixed-particle-number Fock space of the open chain and the sparse
//! operators living on it.

mod basis;
mod operator;

pub use basis::{sector_dimension, FockBasis, FockState, DEFAULT_MEMORY_CAP};
pub use operator::ChainOperator;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical parameters of a simulation point.
///
/// `gamma` is the mean incoherent rate of the two boundary couplings and
/// `dgamma` their imbalance: the individual rates are
/// `gamma1 = gamma + dgamma/2` (transfer from the last site to the first)
/// and `gamma2 = gamma - dgamma/2` (reverse transfer).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub sites: usize,
    pub particles: u32,
    pub hopping: f64,
    pub interaction: f64,
    pub gamma: f64,
    pub dgamma: f64,
}

impl ModelParams {
    pub fn new(
        sites: usize,
        particles: u32,
        hopping: f64,
        interaction: f64,
        gamma: f64,
        dgamma: f64,
    ) -> Result<Self> {
        let p = ModelParams { sites, particles, hopping, interaction, gamma, dgamma };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.sites == 0 {
            return Err(Error::InvalidParams("chain must have at least one site".into()));
        }
        if !(self.hopping > 0.0) {
            return Err(Error::InvalidParams(format!(
                "hopping must be positive, got {}",
                self.hopping
            )));
        }
        if !(self.gamma > 0.0) {
            return Err(Error::InvalidParams(format!(
                "gamma must be positive, got {}",
                self.gamma
            )));
        }
        if self.dgamma.abs() >= 2.0 * self.gamma {
            return Err(Error::InvalidParams(format!(
                "|dgamma| = {} must stay below 2 gamma = {} so both rates are non-negative",
                self.dgamma.abs(),
                2.0 * self.gamma
            )));
        }
        if self.interaction < 0.0 {
            return Err(Error::InvalidParams(format!(
                "interaction must be non-negative, got {}",
                self.interaction
            )));
        }
        Ok(())
    }

    /// Rate of the dissipative transfer from site L to site 1.
    pub fn gamma1(&self) -> f64 {
        self.gamma + 0.5 * self.dgamma
    }

    /// Rate of the reverse transfer from site 1 to site L.
    pub fn gamma2(&self) -> f64 {
        self.gamma - 0.5 * self.dgamma
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn params_validation() {
        assert!(ModelParams::new(6, 3, 1.0, 0.0, 0.04, 0.004).is_ok());
        assert!(ModelParams::new(0, 3, 1.0, 0.0, 0.04, 0.004).is_err());
        assert!(ModelParams::new(6, 3, 0.0, 0.0, 0.04, 0.004).is_err());
        assert!(ModelParams::new(6, 3, 1.0, -1.0, 0.04, 0.004).is_err());
        assert!(ModelParams::new(6, 3, 1.0, 0.0, 0.04, 0.08).is_err());
        assert!(ModelParams::new(6, 3, 1.0, 0.0, 0.0, 0.0).is_err());
    }

    #[test]
    fn rate_split() {
        let p = ModelParams::new(6, 3, 1.0, 0.0, 0.04, 0.004).unwrap();
        assert_eq!(p.gamma1(), 0.042);
        assert_eq!(p.gamma2(), 0.038);
    }
}
