//! Exact two-point-measurement statistics of a system coupled to a
//! random-matrix bath, `H = H_S⊗1 + 1⊗H_B + γ(A + A†)⊗R`.
//!
//! The bath has `N` equally spaced levels on `[−½, ½]` and `R = X/(4√N)` with
//! `X` drawn from the Gaussian orthogonal ensemble. Couplings must be real so
//! that `H` is a real symmetric matrix; one eigendecomposition then serves
//! every time and counting field. Composite indices are `i·N + k` with the
//! system index slow.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::bath::SpectralDensity;
use crate::consistency::linspace;
use crate::error::{Error, Result};
use crate::operator::{hermitian_eigen, Operator, C64};
use crate::system::{gibbs_populations, SystemSpec};

/// Largest composite dimension accepted by default.
pub const DEFAULT_DIMENSION_CAP: usize = 4800;

/// Real symmetric `X` with density `∝ e^{−Tr X²/4}`: diagonal variance 2,
/// off-diagonal variance 1.
pub fn sample_goe(n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            if i == j {
                x[(i, i)] = core::f64::consts::SQRT_2 * z;
            } else {
                x[(i, j)] = z;
                x[(j, i)] = z;
            }
        }
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExactModel {
    pub system: SystemSpec,
    pub bath_energies: Vec<f64>,
    /// Bath coupling operator `R = X/(4√N)`.
    pub bath_coupling: DMatrix<f64>,
    pub gamma: f64,
    pub beta: f64,
    pub seed: u64,
}

impl ExactModel {
    pub fn new(system: SystemSpec, levels: usize, gamma: f64, beta: f64, seed: u64) -> Result<Self> {
        if levels < 2 {
            return Err(Error::InvalidBath("bath needs at least two levels".into()));
        }
        if !system.has_real_couplings() {
            return Err(Error::NonRealCoupling);
        }
        if !(beta > 0.0) || !beta.is_finite() || !(gamma >= 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidBath("beta must be positive and gamma nonnegative".into()));
        }
        let scale = 1.0 / (4.0 * ComplexField::sqrt(levels as f64));
        let bath_coupling = sample_goe(levels, seed) * scale;
        Ok(Self { system, bath_energies: linspace(-0.5, 0.5, levels), bath_coupling, gamma, beta, seed })
    }

    pub fn levels(&self) -> usize {
        self.bath_energies.len()
    }

    pub fn total_dim(&self) -> usize {
        self.system.dim() * self.levels()
    }

    pub fn bath_populations(&self) -> Result<Vec<f64>> {
        gibbs_populations(&self.bath_energies, self.beta)
    }

    /// `J(ω) = S(ω)(1 − e^{−βω})` tabulated on `points` nodes of `[0, 1]`,
    /// where `S(ω) = Σ_jk p_k R_jk² K_h(ω − (b_j − b_k))` is the emission
    /// spectrum of the sampled bath smoothed by a Gaussian kernel of width `h`.
    pub fn calibrated_density(&self, bandwidth: f64, points: usize) -> Result<SpectralDensity> {
        if !(bandwidth > 0.0) || points < 2 {
            return Err(Error::InvalidBath("kernel width must be positive with at least two nodes".into()));
        }
        let p = self.bath_populations()?;
        let b = &self.bath_energies;
        let n = b.len();
        let omegas = linspace(0.0, 1.0, points);
        let mut s = vec![0.0; points];
        let norm = 1.0 / (bandwidth * ComplexField::sqrt(2.0 * core::f64::consts::PI));
        let reach = 8.0 * bandwidth;
        let step = omegas[1] - omegas[0];
        for k in 0..n {
            for j in 0..n {
                let w = b[j] - b[k];
                let weight = p[k] * self.bath_coupling[(j, k)] * self.bath_coupling[(j, k)];
                if weight == 0.0 || w + reach < 0.0 {
                    continue;
                }
                let lo = (((w - reach) / step).floor().max(0.0)) as usize;
                let hi = ((((w + reach) / step).ceil()) as usize).min(points - 1);
                for (i, si) in s.iter_mut().enumerate().take(hi + 1).skip(lo) {
                    let x = (omegas[i] - w) / bandwidth;
                    *si += weight * norm * ComplexField::exp(-0.5 * x * x);
                }
            }
        }
        let values = omegas.iter().zip(&s).map(|(&w, &v)| v * -ComplexField::exp_m1(-self.beta * w)).collect();
        let density = SpectralDensity::Tabulated { omegas, values };
        density.validate()?;
        Ok(density)
    }
}

/// Real symmetric total Hamiltonian.
fn total_real(model: &ExactModel, cap: usize) -> Result<DMatrix<f64>> {
    let d = model.system.dim();
    let n = model.levels();
    let dim = d * n;
    if dim > cap {
        return Err(Error::DimensionCap { dim, cap });
    }
    let e = model.system.energies();
    let g = model.system.couplings();
    let mut h = DMatrix::zeros(dim, dim);
    for i in 0..d {
        for k in 0..n {
            h[(i * n + k, i * n + k)] = e[i] + model.bath_energies[k];
        }
    }
    // (A + A†)[i, j] = g[j, i] + g[i, j]
    for i in 0..d {
        for j in 0..d {
            let a = model.gamma * (g[(j, i)].re + g[(i, j)].re);
            if a == 0.0 {
                continue;
            }
            for k in 0..n {
                for l in 0..n {
                    h[(i * n + k, j * n + l)] += a * model.bath_coupling[(k, l)];
                }
            }
        }
    }
    Ok(h)
}

/// `H_S⊗1 + 1⊗H_B + γ(A + A†)⊗R` as a complex operator.
pub fn build_total(model: &ExactModel, cap: usize) -> Result<Operator> {
    Operator::from_matrix(total_real(model, cap)?.map(|x| C64::new(x, 0.0)))
}

/// Eigendecomposition of the total Hamiltonian.
#[derive(Debug, Clone)]
pub struct ExactSolver {
    model: ExactModel,
    energies: DVector<f64>,
    vectors: DMatrix<f64>,
}

/// `|⟨x|e^{−iHt}|ψ_j, k⟩|²` for every initial column `(j, k)` at one time.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub time: f64,
    /// Rows are composite basis states, columns initial product states.
    pub probabilities: DMatrix<f64>,
    /// `q_j p_k` for each column.
    pub weights: Vec<f64>,
    /// Initial bath energy `b_k` of each column.
    pub initial_energy: Vec<f64>,
    /// Bath energy of each composite basis state.
    pub final_energy: Vec<f64>,
}

impl Snapshot {
    /// `G(t, λ) = Σ q_j p_k e^{−λ b_k} Σ_x e^{λ b(x)} P_x`.
    pub fn mgf(&self, lambda: f64) -> f64 {
        let fin: Vec<f64> = self.final_energy.iter().map(|&b| ComplexField::exp(lambda * b)).collect();
        let mut total = 0.0;
        for (c, col) in self.probabilities.column_iter().enumerate() {
            let s: f64 = col.iter().zip(&fin).map(|(p, f)| p * f).sum();
            total += self.weights[c] * ComplexField::exp(-lambda * self.initial_energy[c]) * s;
        }
        total
    }

    /// `Tr[H_B(ρ(0) − ρ(t))]`.
    pub fn heat_direct(&self) -> f64 {
        let mut total = 0.0;
        for (c, col) in self.probabilities.column_iter().enumerate() {
            let s: f64 = col.iter().zip(&self.final_energy).map(|(p, b)| p * b).sum();
            total += self.weights[c] * (self.initial_energy[c] - s);
        }
        total
    }

    /// Reduced system populations.
    pub fn system_populations(&self, d: usize) -> Vec<f64> {
        let n = self.final_energy.len() / d;
        let mut out = vec![0.0; d];
        for (c, col) in self.probabilities.column_iter().enumerate() {
            for (x, p) in col.iter().enumerate() {
                out[x / n] += self.weights[c] * p;
            }
        }
        out
    }
}

/// Heat from the MGF derivative and from the bath energy change.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeatEstimate {
    pub from_mgf: f64,
    pub direct: f64,
}

impl ExactSolver {
    pub fn new(model: ExactModel, cap: usize) -> Result<Self> {
        let h = total_real(&model, cap)?;
        let eig = h.symmetric_eigen();
        if eig.eigenvalues.iter().any(|v| !v.is_finite()) {
            return Err(Error::Eigen);
        }
        Ok(Self { model, energies: eig.eigenvalues, vectors: eig.eigenvectors })
    }

    pub fn model(&self) -> &ExactModel {
        &self.model
    }

    pub fn eigenvalues(&self) -> &DVector<f64> {
        &self.energies
    }

    /// Evolves every product state `|ψ_j⟩⊗|k⟩`, with `ψ_j` the eigenvectors of
    /// `ρ_S0` and `|k⟩` the bath levels, weighted by `q_j p_k`.
    pub fn snapshot(&self, rho_s0: &Operator, t: f64) -> Result<Snapshot> {
        let d = self.model.system.dim();
        let n = self.model.levels();
        if rho_s0.dim() != d {
            return Err(Error::Dimension { expected: d, found: rho_s0.dim() });
        }
        let (q, psi) = hermitian_eigen(rho_s0.matrix());
        let top = q.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let p = self.model.bath_populations()?;
        let kept: Vec<usize> = (0..d).filter(|&j| q[j] > 1e-14 * top).collect();
        let cols = kept.len() * n;
        let dim = d * n;
        // C = Vᵀ Ψ split into real and imaginary parts
        let mut c_re = DMatrix::zeros(dim, cols);
        let mut c_im = DMatrix::zeros(dim, cols);
        let mut weights = Vec::with_capacity(cols);
        let mut initial_energy = Vec::with_capacity(cols);
        for (jj, &j) in kept.iter().enumerate() {
            for k in 0..n {
                let col = jj * n + k;
                weights.push(q[j] * p[k]);
                initial_energy.push(self.model.bath_energies[k]);
                for a in 0..dim {
                    let (mut re, mut im) = (0.0, 0.0);
                    for i in 0..d {
                        let v = self.vectors[(i * n + k, a)];
                        re += v * psi[(i, j)].re;
                        im += v * psi[(i, j)].im;
                    }
                    c_re[(a, col)] = re;
                    c_im[(a, col)] = im;
                }
            }
        }
        let mut x_re = DMatrix::zeros(dim, cols);
        let mut x_im = DMatrix::zeros(dim, cols);
        for a in 0..dim {
            let (s, c) = ComplexField::sin_cos(self.energies[a] * t);
            for col in 0..cols {
                let (r, i) = (c_re[(a, col)], c_im[(a, col)]);
                x_re[(a, col)] = c * r + s * i;
                x_im[(a, col)] = c * i - s * r;
            }
        }
        let phi_re = &self.vectors * x_re;
        let phi_im = &self.vectors * x_im;
        let probabilities = phi_re.zip_map(&phi_im, |r, i| r * r + i * i);
        let final_energy = (0..dim).map(|x| self.model.bath_energies[x % n]).collect();
        Ok(Snapshot { time: t, probabilities, weights, initial_energy, final_energy })
    }

    fn heat_step(&self) -> f64 {
        let scale = self.model.bath_energies.iter().fold(0.0f64, |m, b| m.max(b.abs()));
        1e-5 / scale
    }

    fn heat_from(&self, snap: &Snapshot) -> Result<HeatEstimate> {
        let h = self.heat_step();
        let at = |l: f64| snap.mgf(-l);
        let d1 = (at(h) - at(-h)) / (2.0 * h);
        let d2 = (at(0.5 * h) - at(-0.5 * h)) / h;
        let from_mgf = (4.0 * d2 - d1) / 3.0;
        if !from_mgf.is_finite() {
            return Err(Error::StepUnderflow(h));
        }
        Ok(HeatEstimate { from_mgf, direct: snap.heat_direct() })
    }
}

/// `G(t, λ_B)` with counting on the bath only.
pub fn exact_mgf(solver: &ExactSolver, rho_s0: &Operator, t: f64, lambda: f64) -> Result<C64> {
    Ok(C64::new(solver.snapshot(rho_s0, t)?.mgf(lambda), 0.0))
}

/// Heat drawn from the bath at time `t`.
pub fn exact_heat(solver: &ExactSolver, rho_s0: &Operator, t: f64) -> Result<HeatEstimate> {
    if t == 0.0 {
        return Ok(HeatEstimate { from_mgf: 0.0, direct: 0.0 });
    }
    solver.heat_from(&solver.snapshot(rho_s0, t)?)
}

/// Exact MGF samples and heat on a time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TPMResult {
    pub times: Vec<f64>,
    pub lambdas: Vec<f64>,
    /// `G(t, λ)` indexed `[time][lambda]`.
    pub mgf: Vec<Vec<f64>>,
    pub heat: Vec<f64>,
    pub heat_direct: Vec<f64>,
}

pub fn tpm_run(solver: &ExactSolver, rho_s0: &Operator, times: &[f64], lambdas: &[f64]) -> Result<TPMResult> {
    let mut out = TPMResult {
        times: times.to_vec(),
        lambdas: lambdas.to_vec(),
        mgf: Vec::with_capacity(times.len()),
        heat: Vec::with_capacity(times.len()),
        heat_direct: Vec::with_capacity(times.len()),
    };
    for &t in times {
        let snap = solver.snapshot(rho_s0, t)?;
        out.mgf.push(lambdas.iter().map(|&l| snap.mgf(l)).collect());
        let q = solver.heat_from(&snap)?;
        out.heat.push(q.from_mgf);
        out.heat_direct.push(q.direct);
    }
    Ok(out)
}
