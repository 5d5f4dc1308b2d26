//! System Hamiltonian in its eigenbasis, jump operators and Bohr spectrum.

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix};

use crate::error::{Error, Result};
use crate::operator::{cabs, Operator, C64, ONE, ZERO};

/// Energies `E_0 <= ... <= E_{d-1}` and coupling amplitudes.
///
/// `couplings[(m, n)]` multiplies `σ_mn = |E_n><E_m|`, so the coupling
/// operator is `A = Σ g_mn σ_mn`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemSpec {
    energies: Vec<f64>,
    couplings: DMatrix<C64>,
    allow_diagonal: bool,
}

impl SystemSpec {
    pub fn new(energies: Vec<f64>, couplings: DMatrix<C64>) -> Result<Self> {
        Self::build(energies, couplings, false)
    }

    /// Like [`SystemSpec::new`] but accepts nonzero `g_nn`.
    pub fn with_diagonal_couplings(energies: Vec<f64>, couplings: DMatrix<C64>) -> Result<Self> {
        Self::build(energies, couplings, true)
    }

    fn build(energies: Vec<f64>, couplings: DMatrix<C64>, allow_diagonal: bool) -> Result<Self> {
        let d = energies.len();
        if d < 2 {
            return Err(Error::InvalidSystem(format!("need at least 2 levels, got {d}")));
        }
        if energies.iter().any(|e| !e.is_finite()) {
            return Err(Error::InvalidSystem("non-finite energy".into()));
        }
        if energies.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::InvalidSystem("energies must be sorted ascending".into()));
        }
        if couplings.nrows() != d || couplings.ncols() != d {
            return Err(Error::InvalidSystem(format!(
                "coupling matrix is {}x{}, expected {d}x{d}",
                couplings.nrows(),
                couplings.ncols()
            )));
        }
        if couplings.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidSystem("non-finite coupling".into()));
        }
        if !allow_diagonal {
            if let Some(n) = (0..d).find(|&n| couplings[(n, n)] != ZERO) {
                return Err(Error::InvalidSystem(format!("diagonal coupling g[{n}][{n}] is not allowed")));
            }
        }
        Ok(Self { energies, couplings, allow_diagonal })
    }

    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn couplings(&self) -> &DMatrix<C64> {
        &self.couplings
    }

    pub fn allows_diagonal(&self) -> bool {
        self.allow_diagonal
    }

    pub fn hamiltonian(&self) -> Operator {
        Operator::from_diagonal(&self.energies)
    }

    /// `max |E|`, the scale used for energy tolerances.
    pub fn energy_scale(&self) -> f64 {
        self.energies.iter().fold(0.0f64, |a, e| a.max(e.abs()))
    }

    /// Absolute tolerance for treating two Bohr frequencies as equal.
    pub fn omega_tolerance(&self) -> f64 {
        1e-12 * self.energy_scale()
    }

    /// `A = Σ g_mn |E_n><E_m|`.
    pub fn coupling_operator(&self) -> Operator {
        Operator::wrap(self.couplings.transpose())
    }

    /// Whether every product `g_k conj(g_k')` is real.
    pub fn is_time_reversal_even(&self) -> bool {
        let g: Vec<C64> = self.couplings.iter().copied().filter(|z| *z != ZERO).collect();
        g.iter().all(|a| {
            g.iter().all(|b| {
                let p = a * b.conj();
                p.im.abs() <= 1e-12 * cabs(p)
            })
        })
    }

    /// Whether every amplitude is real.
    pub fn has_real_couplings(&self) -> bool {
        self.couplings.iter().all(|z| z.im == 0.0)
    }

    /// Label of the degenerate energy class of each level.
    pub fn energy_classes(&self) -> Vec<usize> {
        let tol = self.omega_tolerance();
        let mut out = Vec::with_capacity(self.dim());
        let mut class = 0;
        let mut start = self.energies[0];
        for (i, &e) in self.energies.iter().enumerate() {
            if i > 0 && e - start > tol {
                class += 1;
                start = e;
            }
            out.push(class);
        }
        out
    }

    pub fn jumps(&self) -> Vec<JumpOperator> {
        build_jump_basis(self)
    }

    pub fn bohr_spectrum(&self) -> BohrSpectrum {
        bohr_spectrum(&self.jumps(), self.omega_tolerance())
    }
}

/// Rank-one jump `σ_mn = |E_n><E_m|` with amplitude `g_mn`.
#[derive(Debug, Clone, PartialEq)]
pub struct JumpOperator {
    pub m: usize,
    pub n: usize,
    pub omega: f64,
    pub amplitude: C64,
    pub sigma: Operator,
}

impl JumpOperator {
    /// `g_mn σ_mn`.
    pub fn operator(&self) -> Operator {
        self.sigma.scale(self.amplitude)
    }
}

/// One jump per nonzero amplitude, in row-major `(m, n)` order.
pub fn build_jump_basis(spec: &SystemSpec) -> Vec<JumpOperator> {
    let d = spec.dim();
    let mut out = Vec::new();
    for m in 0..d {
        for n in 0..d {
            let g = spec.couplings[(m, n)];
            if g == ZERO {
                continue;
            }
            let mut s = DMatrix::zeros(d, d);
            s[(n, m)] = ONE;
            out.push(JumpOperator {
                m,
                n,
                omega: spec.energies[m] - spec.energies[n],
                amplitude: g,
                sigma: Operator::wrap(s),
            });
        }
    }
    out
}

/// Distinct Bohr frequencies with the jumps that carry each one.
#[derive(Debug, Clone, PartialEq)]
pub struct BohrSpectrum {
    /// Ascending class representatives (mean of the members).
    pub frequencies: Vec<f64>,
    /// Jump indices per frequency.
    pub members: Vec<Vec<usize>>,
    /// Frequency index per jump.
    pub class_of: Vec<usize>,
}

impl BohrSpectrum {
    pub fn len(&self) -> usize {
        self.frequencies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frequencies.is_empty()
    }

    pub fn multiplicity(&self, k: usize) -> usize {
        self.members[k].len()
    }
}

/// Groups jump frequencies that agree within `tol`.
pub fn bohr_spectrum(jumps: &[JumpOperator], tol: f64) -> BohrSpectrum {
    let mut order: Vec<usize> = (0..jumps.len()).collect();
    order.sort_by(|&a, &b| jumps[a].omega.total_cmp(&jumps[b].omega));
    let mut members: Vec<Vec<usize>> = Vec::new();
    let mut start = f64::NEG_INFINITY;
    for &k in &order {
        let w = jumps[k].omega;
        match members.last_mut() {
            Some(last) if w - start <= tol => last.push(k),
            _ => {
                members.push(alloc::vec![k]);
                start = w;
            }
        }
    }
    let mut class_of = alloc::vec![0; jumps.len()];
    let mut frequencies = Vec::with_capacity(members.len());
    for (c, group) in members.iter().enumerate() {
        for &k in group {
            class_of[k] = c;
        }
        frequencies.push(group.iter().map(|&k| jumps[k].omega).sum::<f64>() / group.len() as f64);
    }
    BohrSpectrum { frequencies, members, class_of }
}

/// `e^{-βH}/Z`, shifted by the ground energy for stability.
pub fn gibbs_state(spec: &SystemSpec, beta: f64) -> Result<Operator> {
    Ok(Operator::from_diagonal(&gibbs_populations(spec.energies(), beta)?))
}

/// Boltzmann weights of `energies` at inverse temperature `beta`.
pub fn gibbs_populations(energies: &[f64], beta: f64) -> Result<Vec<f64>> {
    if !(beta >= 0.0) || !beta.is_finite() {
        return Err(Error::InvalidSystem(format!("inverse temperature must be finite and >= 0, got {beta}")));
    }
    let e0 = energies.iter().copied().fold(f64::INFINITY, f64::min);
    let w: Vec<f64> = energies.iter().map(|&e| ComplexField::exp(-beta * (e - e0))).collect();
    let z: f64 = w.iter().sum();
    Ok(w.into_iter().map(|x| x / z).collect())
}
