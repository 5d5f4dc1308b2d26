//! Near-degenerate three-level benchmark: a ground state coupled to two
//! excited states split by `1/δ0`, with the splitting tied to the
//! relaxation rate it produces.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix};

use crate::bath::{BathSpec, CorrelationTransforms, Sign, SpectralDensity};
use crate::error::{Error, Result};
use crate::generators::{Generators, Scheme};
use crate::operator::{Operator, C64, ZERO};
use crate::system::SystemSpec;

/// Continuum mean of the random-matrix bath spectral density.
///
/// For `N` equally spaced levels on `[−Ω/2, Ω/2]`, couplings with variance
/// `1/(16N)` and a Gibbs bath, the emission spectrum is
/// `J(n+1) = η (1 − e^{−β(Ω−ω)})` with `η = 1/(16Ω(1 − e^{−βΩ}))`.
pub fn random_matrix_density(beta: f64, cutoff: f64) -> SpectralDensity {
    let eta = 1.0 / (16.0 * cutoff) / -ComplexField::exp_m1(-beta * cutoff);
    SpectralDensity::FlatSmoothCutoff { eta, width: 1.0 / beta, cutoff }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThreeLevelModel {
    pub system: SystemSpec,
    pub bath: BathSpec,
    /// Coarse-graining time; the excited splitting is `1/delta0`.
    pub delta0: f64,
    /// Largest population relaxation rate `max_k 2|g_k|²(R+ + R−)`.
    pub relaxation_rate: f64,
    /// Window used to keep the near-degenerate pair, `2/delta0`.
    pub window: f64,
}

impl ThreeLevelModel {
    /// `γ = 0.2`, `β = 5/Ω`, excited doublet centred at `0.1 Ω`, `Ω = 1`.
    pub fn doublet() -> Result<Self> {
        Self::new(0.2, 5.0, 0.1, 1.0)
    }

    /// Solves `δ0 = √((1/Ω)(1/Γ_max(δ0)))` by fixed-point iteration.
    pub fn new(gamma: f64, beta: f64, center: f64, cutoff: f64) -> Result<Self> {
        let bath = BathSpec::new(beta, random_matrix_density(beta, cutoff), gamma)?;
        let t = CorrelationTransforms::new(bath.clone())?;
        let g2 = cutoff;
        let rate = |w: f64| 2.0 * g2 * (t.rate_real(Sign::Plus, w, 0.0) + t.rate_real(Sign::Minus, w, 0.0));
        let mut delta0: f64 = 1.0 / center;
        let mut converged = false;
        for _ in 0..500 {
            let half = 0.5 / delta0;
            let gmax = rate(center - half).max(rate(center + half));
            if !(gmax > 0.0) {
                return Err(Error::InvalidSystem("relaxation rate vanishes".into()));
            }
            let next = ComplexField::sqrt(1.0 / (cutoff * gmax));
            let done = (next - delta0).abs() <= 1e-14 * next;
            delta0 = next;
            if done {
                converged = true;
                break;
            }
        }
        if !converged || 0.5 / delta0 >= center {
            return Err(Error::InvalidSystem("coarse-graining time did not settle".into()));
        }
        let half = 0.5 / delta0;
        let energies = vec![0.0, center - half, center + half];
        let relaxation_rate = rate(energies[1]).max(rate(energies[2]));
        let mut g = DMatrix::zeros(3, 3);
        let amp = C64::new(ComplexField::sqrt(g2), 0.0);
        g[(1, 0)] = amp;
        g[(2, 0)] = amp;
        let system = SystemSpec::new(energies, g)?;
        Ok(Self { system, bath, delta0, relaxation_rate, window: 2.0 / delta0 })
    }

    /// Same energies and bath with a different coupling strength.
    pub fn with_gamma(&self, gamma: f64) -> Result<Self> {
        let mut out = self.clone();
        out.bath = BathSpec::new(self.bath.beta, self.bath.density.clone(), gamma)?;
        let s = (gamma / self.bath.gamma).powi(2);
        out.relaxation_rate *= s;
        Ok(out)
    }

    /// `(|e1> + √3|e2>)(<e1| + √3<e2|)/4`.
    pub fn initial_state() -> Operator {
        let psi = [ZERO, C64::new(1.0, 0.0), C64::new(3f64.sqrt(), 0.0)];
        Operator::pure_state(&psi).expect("fixed nonzero vector")
    }

    pub fn generators(&self) -> Result<Generators> {
        Generators::new(self.system.clone(), vec![self.bath.clone()])
    }

    pub fn symmetrized(&self) -> Scheme {
        Scheme::symmetrized(self.window)
    }

    pub fn coarse_grained(&self) -> Scheme {
        Scheme::coarse_grained(1.0 / self.window)
    }

    pub fn schemes(&self) -> Vec<Scheme> {
        vec![Scheme::redfield(), Scheme::secular(), self.symmetrized(), self.coarse_grained()]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn doublet_model_parameters() {
        let m = ThreeLevelModel::doublet().unwrap();
        let e = m.system.energies();
        assert!((m.delta0 - 5.731).abs() < 5e-3, "{}", m.delta0);
        assert!((m.relaxation_rate * m.delta0 * m.delta0 - 1.0).abs() < 1e-12);
        let b = m.system.bohr_spectrum();
        assert_eq!(b.len(), 2);
        assert!((b.frequencies[1] - b.frequencies[0] - 1.0 / m.delta0).abs() < 1e-15);
        assert!((e[1] + e[2] - 0.2).abs() < 1e-15);
        let jumps = m.system.jumps();
        assert_eq!(jumps.len(), 2);
        assert!(jumps.iter().all(|j| j.n == 0 && j.amplitude == C64::new(1.0, 0.0)));
    }

    #[test]
    fn random_matrix_density_emission_spectrum() {
        let (beta, cutoff) = (5.0, 1.0);
        let j = random_matrix_density(beta, cutoff);
        let eta = 1.0 / (16.0 * cutoff * (1.0 - (-beta * cutoff).exp()));
        for w in [0.05, 0.2, 0.4, 0.9] {
            let n1 = 1.0 / (1.0 - (-beta * w).exp());
            let expected = eta * (1.0 - (-beta * (cutoff - w)).exp());
            assert!((j.eval(w) * n1 - expected).abs() < 1e-15);
        }
    }

    #[test]
    fn initial_state_is_normalized() {
        let rho = ThreeLevelModel::initial_state();
        assert!((rho.trace().re - 1.0).abs() < 1e-15);
        assert!((rho.get(2, 2).re - 0.75).abs() < 1e-15);
        assert!((rho.get(1, 2).re - 3f64.sqrt() / 4.0).abs() < 1e-15);
    }
}
