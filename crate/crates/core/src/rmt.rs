//! Level-spacing statistics: rank-window trimming, polynomial unfolding of
//! the integrated density of states, and Kolmogorov-Smirnov distances to the
//! integrated Poisson and Wigner-Dyson references.

use ndarray::{Array1, Array2};
use ndarray_linalg::Solve;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

use crate::error::{Error, Result};

/// Reference spacing distributions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Reference {
    Poisson,
    /// Wigner surmise of the Gaussian unitary ensemble.
    Gue,
    /// Orthogonal-ensemble surmise, kept as an exploratory option.
    Goe,
}

/// Integrated reference distribution at spacing `s`.
pub fn reference_integrated(kind: Reference, s: f64) -> Result<f64> {
    if s < 0.0 {
        return Err(Error::NegativeSpacing(s));
    }
    Ok(match kind {
        Reference::Poisson => 1.0 - (-s).exp(),
        // density (32/pi^2) s^2 exp(-4 s^2 / pi), integrated in closed form
        Reference::Gue => {
            libm::erf(2.0 * s / std::f64::consts::PI.sqrt())
                - (4.0 * s / std::f64::consts::PI)
                    * (-4.0 * s * s / std::f64::consts::PI).exp()
        }
        Reference::Goe => 1.0 - (-std::f64::consts::PI * s * s / 4.0).exp(),
    })
}

/// Largest polynomial degree tried for the staircase fit.
pub const MAX_FIT_DEGREE: usize = 7;

/// Relative threshold below which a spacing is treated as an exact
/// degeneracy and excluded from the statistics sample.
pub const DEGENERACY_TOL: f64 = 1e-12;

/// Unfolded spacings of a spectrum window plus their distances to the
/// reference distributions.
#[derive(Debug, Clone, Serialize)]
pub struct SpacingStatistics {
    pub central_fraction: f64,
    /// rank range [lo, hi) retained from the sorted input
    pub retained: (usize, usize),
    /// unfolded spacings, in spectral order, exact degeneracies removed
    pub spacings: Vec<f64>,
    /// number of spacings collapsed as exact degeneracies
    pub collapsed_degenerate: usize,
    /// degree of the accepted monotone staircase fit
    pub fit_degree: usize,
    pub mean_spacing: f64,
    pub ks_poisson: f64,
    pub ks_gue: f64,
}

/// Unfold the central rank window of a spectrum.
///
/// The integrated density of states over the window is fitted by the
/// highest-degree polynomial (at most degree 7) whose derivative stays
/// positive on the retained nodes; the local mean density is its
/// derivative, and s_k = (e_{k+1} - e_k) f(e_k).
pub fn unfold_spacings(eigs: &[f64], central_fraction: f64) -> Result<SpacingStatistics> {
    if eigs.len() < 50 {
        return Err(Error::TooFewLevels { needed: 50, got: eigs.len() });
    }
    if !(central_fraction > 0.0 && central_fraction <= 1.0) {
        return Err(Error::InvalidParams(format!(
            "central fraction must lie in (0, 1], got {central_fraction}"
        )));
    }
    let mut sorted = eigs.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));

    let n = sorted.len();
    let keep = ((central_fraction * n as f64).round() as usize).clamp(2, n);
    let lo = (n - keep) / 2;
    let window = &sorted[lo..lo + keep];
    let width = window[keep - 1] - window[0];
    if width <= 0.0 {
        return Err(Error::InvalidParams("retained window has zero spectral width".into()));
    }

    // staircase points (e_i, i + 1/2) on the scaled coordinate t in [-1, 1]
    let t: Vec<f64> = window.iter().map(|e| 2.0 * (e - window[0]) / width - 1.0).collect();
    let y: Vec<f64> = (0..keep).map(|i| i as f64 + 0.5).collect();
    let (coeffs, fit_degree) = monotone_polyfit(&t, &y)?;

    let density = |ti: f64| -> f64 {
        // d/de = d/dt * 2/width
        polyval_derivative(&coeffs, ti) * 2.0 / width
    };

    let cutoff = DEGENERACY_TOL * width;
    let mut spacings = Vec::with_capacity(keep - 1);
    let mut collapsed = 0usize;
    for k in 0..keep - 1 {
        let gap = window[k + 1] - window[k];
        if gap < cutoff {
            collapsed += 1;
            continue;
        }
        spacings.push(gap * density(t[k]));
    }
    if spacings.is_empty() {
        return Err(Error::InvalidParams("window collapsed to a single degenerate level".into()));
    }
    let mean = spacings.iter().sum::<f64>() / spacings.len() as f64;
    let ks_poisson = ks_distance(&spacings, Reference::Poisson);
    let ks_gue = ks_distance(&spacings, Reference::Gue);
    Ok(SpacingStatistics {
        central_fraction,
        retained: (lo, lo + keep),
        spacings,
        collapsed_degenerate: collapsed,
        fit_degree,
        mean_spacing: mean,
        ks_poisson,
        ks_gue,
    })
}

fn monotone_polyfit(t: &[f64], y: &[f64]) -> Result<(Vec<f64>, usize)> {
    for degree in (1..=MAX_FIT_DEGREE).rev() {
        let coeffs = polyfit(t, y, degree)?;
        if t.iter().all(|&ti| polyval_derivative(&coeffs, ti) > 0.0) {
            return Ok((coeffs, degree));
        }
    }
    Err(Error::InvalidParams(
        "no monotone staircase fit down to degree 1 (degenerate spectrum?)".into(),
    ))
}

fn polyfit(t: &[f64], y: &[f64], degree: usize) -> Result<Vec<f64>> {
    let m = degree + 1;
    let mut ata = Array2::<f64>::zeros((m, m));
    let mut aty = Array1::<f64>::zeros(m);
    let mut powers = vec![0.0; m];
    for (&ti, &yi) in t.iter().zip(y) {
        let mut p = 1.0;
        for slot in powers.iter_mut() {
            *slot = p;
            p *= ti;
        }
        for r in 0..m {
            aty[r] += powers[r] * yi;
            for c in 0..m {
                ata[[r, c]] += powers[r] * powers[c];
            }
        }
    }
    let coeffs = ata
        .solve_into(aty)
        .map_err(|e| Error::Backend(format!("staircase fit solve failed: {e}")))?;
    Ok(coeffs.to_vec())
}

fn polyval_derivative(coeffs: &[f64], t: f64) -> f64 {
    let mut acc = 0.0;
    let mut p = 1.0;
    for (k, c) in coeffs.iter().enumerate().skip(1) {
        acc += k as f64 * c * p;
        p *= t;
    }
    acc
}

/// Two-sided Kolmogorov-Smirnov distance between the empirical integrated
/// distribution of a sample and a reference.
pub fn ks_distance(sample: &[f64], kind: Reference) -> f64 {
    let mut s = sample.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).expect("finite spacings"));
    let n = s.len() as f64;
    let mut sup: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = reference_integrated(kind, x.max(0.0)).unwrap_or(0.0);
        sup = sup.max((f - i as f64 / n).abs());
        sup = sup.max((f - (i as f64 + 1.0) / n).abs());
    }
    sup
}

impl SpacingStatistics {
    /// Empirical integrated distribution at spacing `s`.
    pub fn empirical_integrated(&self, s: f64) -> f64 {
        let count = self.spacings.iter().filter(|&&x| x <= s).count();
        count as f64 / self.spacings.len() as f64
    }

    pub fn ks(&self, kind: Reference) -> f64 {
        match kind {
            Reference::Poisson => self.ks_poisson,
            Reference::Gue => self.ks_gue,
            Reference::Goe => ks_distance(&self.spacings, kind),
        }
    }

    /// CSV rows (s, empirical, poisson_ref, gue_ref) on the uniform grid
    /// s in [0, 4] with step 0.02.
    pub fn emit_distribution<W: std::io::Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "s,empirical,poisson_ref,gue_ref")?;
        for k in 0..=200 {
            let s = 0.02 * k as f64;
            writeln!(
                w,
                "{:.2},{:.9},{:.9},{:.9}",
                s,
                self.empirical_integrated(s),
                reference_integrated(Reference::Poisson, s)?,
                reference_integrated(Reference::Gue, s)?,
            )?;
        }
        Ok(())
    }

    pub fn metadata(&self) -> serde_json::Value {
        serde_json::json!({
            "window_fraction": self.central_fraction,
            "fit_degree": self.fit_degree,
            "sample_size": self.spacings.len(),
            "collapsed_degenerate": self.collapsed_degenerate,
            "mean_spacing": self.mean_spacing,
            "ks_poisson": self.ks_poisson,
            "ks_gue": self.ks_gue,
        })
    }
}

/// Eigenvalues of one matrix drawn from the Gaussian unitary ensemble.
pub fn sample_gue_spectrum<R: Rng>(dim: usize, rng: &mut R) -> Vec<f64> {
    let mut a = Array2::<Complex64>::zeros((dim, dim));
    for i in 0..dim {
        let d: f64 = StandardNormal.sample(rng);
        a[[i, i]] = Complex64::new(d, 0.0);
        for j in i + 1..dim {
            let re: f64 = StandardNormal.sample(rng);
            let im: f64 = StandardNormal.sample(rng);
            let z = Complex64::new(re * 0.5f64.sqrt(), im * 0.5f64.sqrt());
            a[[i, j]] = z;
            a[[j, i]] = z.conj();
        }
    }
    let (w, _) = crate::linalg::eigh_checked(&a).expect("GUE draw is Hermitian");
    w.to_vec()
}
