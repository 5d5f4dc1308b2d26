//! Tilted generators for the Redfield, secular, symmetrized and
//! coarse-grained master equations.
//!
//! Every scheme is assembled in one form,
//!
//! ```text
//! L[ρ] = −i[H_S, ρ] − (Mρ + ρM†)
//!        + Σ_α Σ_kk' c⁺_kk'(λ_α) A_k ρ A_k'† + c⁻_kk'(λ_α) A_k† ρ A_k'
//! M    = Σ_α Σ_kk' m⁺_kk' A_k† A_k' + m⁻_kk' A_k A_k'†
//! ```
//!
//! and the schemes differ only in the coefficient tables. Jump coefficients
//! use the golden-rule normalization `c = 2R` with anticommutator weight `R`
//! in all schemes, so that secular, symmetrized and coarse-grained agree
//! whenever no pair of distinct frequencies is kept. System counting is
//! applied afterwards by the similarity transform of
//! [`add_system_counting`].
//!
//! Jumps with `ω ≤ 0` carry no rate (rotating-wave coupling).

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix};

use crate::bath::{BathSpec, CorrelationTransforms, Sign};
use crate::error::{Error, Result};
use crate::operator::{Operator, SuperOperator, C64, ZERO};
use crate::quadrature::QuadSettings;
use crate::system::{BohrSpectrum, JumpOperator, SystemSpec};

/// Approximation scheme.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "name", rename_all = "snake_case"))]
pub enum SchemeKind {
    Redfield,
    Secular,
    /// Pairs with `|ω − ω'| < epsilon` are kept with geometric-mean rates.
    Symmetrized {
        epsilon: f64,
    },
    /// Pairs with `|ω − ω'| < 1/delta0` are kept with midpoint rates.
    CoarseGrained {
        delta0: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Scheme {
    pub kind: SchemeKind,
    pub lamb_shift: bool,
}

impl Scheme {
    pub fn redfield() -> Self {
        Self { kind: SchemeKind::Redfield, lamb_shift: true }
    }

    pub fn secular() -> Self {
        Self { kind: SchemeKind::Secular, lamb_shift: true }
    }

    pub fn symmetrized(epsilon: f64) -> Self {
        Self { kind: SchemeKind::Symmetrized { epsilon }, lamb_shift: true }
    }

    pub fn coarse_grained(delta0: f64) -> Self {
        Self { kind: SchemeKind::CoarseGrained { delta0 }, lamb_shift: true }
    }

    pub fn with_lamb_shift(mut self, on: bool) -> Self {
        self.lamb_shift = on;
        self
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            SchemeKind::Redfield => "redfield",
            SchemeKind::Secular => "secular",
            SchemeKind::Symmetrized { .. } => "symmetrized",
            SchemeKind::CoarseGrained { .. } => "coarse_grained",
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            SchemeKind::Symmetrized { epsilon } if !(epsilon > 0.0) => {
                Err(Error::InvalidScheme(format!("epsilon must be positive, got {epsilon}")))
            }
            SchemeKind::CoarseGrained { delta0 } if !(delta0 > 0.0) => {
                Err(Error::InvalidScheme(format!("delta0 must be positive, got {delta0}")))
            }
            _ => Ok(()),
        }
    }
}

/// Superoperator tagged with its scheme and counting fields.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedGenerator {
    pub scheme: Scheme,
    pub lambda_s: f64,
    pub lambda_b: Vec<f64>,
    energies: Vec<f64>,
    matrix: SuperOperator,
}

impl TiltedGenerator {
    pub fn matrix(&self) -> &SuperOperator {
        &self.matrix
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }

    pub fn apply(&self, x: &Operator) -> Operator {
        self.matrix.apply(x)
    }

    /// Replaces the matrix, keeping the tags.
    pub fn with_matrix(&self, matrix: SuperOperator) -> Self {
        Self { matrix, ..self.clone() }
    }
}

/// Coefficient tables of one bath, indexed by jump pairs.
#[derive(Debug, Clone, PartialEq)]
pub struct Coefficients {
    pub jump_plus: DMatrix<C64>,
    pub jump_minus: DMatrix<C64>,
    pub anti_plus: DMatrix<C64>,
    pub anti_minus: DMatrix<C64>,
}

/// Builds tilted generators for one system and its baths.
#[derive(Debug, Clone)]
pub struct Generators {
    system: SystemSpec,
    jumps: Vec<JumpOperator>,
    spectrum: BohrSpectrum,
    transforms: Vec<CorrelationTransforms>,
}

impl Generators {
    pub fn new(system: SystemSpec, baths: Vec<BathSpec>) -> Result<Self> {
        Self::with_settings(system, baths, QuadSettings::default())
    }

    pub fn with_settings(system: SystemSpec, baths: Vec<BathSpec>, settings: QuadSettings) -> Result<Self> {
        if baths.is_empty() {
            return Err(Error::InvalidBath("at least one bath is required".into()));
        }
        let transforms =
            baths.into_iter().map(|b| CorrelationTransforms::with_settings(b, settings)).collect::<Result<Vec<_>>>()?;
        let jumps = system.jumps();
        let spectrum = system.bohr_spectrum();
        Ok(Self { system, jumps, spectrum, transforms })
    }

    pub fn system(&self) -> &SystemSpec {
        &self.system
    }

    pub fn jumps(&self) -> &[JumpOperator] {
        &self.jumps
    }

    pub fn spectrum(&self) -> &BohrSpectrum {
        &self.spectrum
    }

    pub fn transforms(&self) -> &[CorrelationTransforms] {
        &self.transforms
    }

    pub fn bath_count(&self) -> usize {
        self.transforms.len()
    }

    pub fn betas(&self) -> Vec<f64> {
        self.transforms.iter().map(|t| t.beta()).collect()
    }

    /// Generator with system field `lambda_s` and bath fields `lambda_b`.
    pub fn build(&self, scheme: &Scheme, lambda_s: f64, lambda_b: &[f64]) -> Result<TiltedGenerator> {
        let g = self.build_bath_tilted(scheme, lambda_b)?;
        Ok(if lambda_s == 0.0 { g } else { add_system_counting(&g, lambda_s) })
    }

    pub fn redfield(&self, lambda_b: &[f64]) -> Result<TiltedGenerator> {
        self.build(&Scheme::redfield(), 0.0, lambda_b)
    }

    pub fn secular(&self, lambda_b: &[f64]) -> Result<TiltedGenerator> {
        self.build(&Scheme::secular(), 0.0, lambda_b)
    }

    pub fn symmetrized(&self, lambda_b: &[f64], epsilon: f64) -> Result<TiltedGenerator> {
        self.build(&Scheme::symmetrized(epsilon), 0.0, lambda_b)
    }

    pub fn coarse_grained(&self, lambda_s: f64, lambda_b: &[f64], delta0: f64) -> Result<TiltedGenerator> {
        self.build(&Scheme::coarse_grained(delta0), lambda_s, lambda_b)
    }

    /// Untilted generator.
    pub fn untilted(&self, scheme: &Scheme) -> Result<TiltedGenerator> {
        self.build(scheme, 0.0, &alloc::vec![0.0; self.bath_count()])
    }

    fn build_bath_tilted(&self, scheme: &Scheme, lambda_b: &[f64]) -> Result<TiltedGenerator> {
        scheme.validate()?;
        if lambda_b.len() != self.bath_count() {
            return Err(Error::CountingFields { expected: self.bath_count(), found: lambda_b.len() });
        }
        let d = self.system.dim();
        let mut l = SuperOperator::hamiltonian(&self.system.hamiltonian()).into_matrix();
        let mut anti = DMatrix::<C64>::zeros(d, d);
        for (alpha, &lam) in lambda_b.iter().enumerate() {
            let c = self.coefficients(scheme, alpha, lam)?;
            self.add_jumps(&mut l, &c);
            self.add_anticommutator_weight(&mut anti, &c);
        }
        let m = Operator::wrap(anti);
        l -= SuperOperator::left(&m).into_matrix();
        l -= SuperOperator::right(&m.adjoint()).into_matrix();
        Ok(TiltedGenerator {
            scheme: *scheme,
            lambda_s: 0.0,
            lambda_b: lambda_b.to_vec(),
            energies: self.system.energies().to_vec(),
            matrix: SuperOperator::wrap(d, l),
        })
    }

    fn add_jumps(&self, l: &mut DMatrix<C64>, c: &Coefficients) {
        let d = self.system.dim();
        let idx = |i: usize, j: usize| i + d * j;
        for (k, a) in self.jumps.iter().enumerate() {
            for (kp, b) in self.jumps.iter().enumerate() {
                // A_k ρ A_k'† = g_k g_k'* ρ[m_k, m_k'] |n_k><n_k'|
                let cp = c.jump_plus[(k, kp)];
                if cp != ZERO {
                    l[(idx(a.n, b.n), idx(a.m, b.m))] += cp * a.amplitude * b.amplitude.conj();
                }
                // A_k† ρ A_k' = g_k* g_k' ρ[n_k, n_k'] |m_k><m_k'|
                let cm = c.jump_minus[(k, kp)];
                if cm != ZERO {
                    l[(idx(a.m, b.m), idx(a.n, b.n))] += cm * a.amplitude.conj() * b.amplitude;
                }
            }
        }
    }

    fn add_anticommutator_weight(&self, m: &mut DMatrix<C64>, c: &Coefficients) {
        for (k, a) in self.jumps.iter().enumerate() {
            for (kp, b) in self.jumps.iter().enumerate() {
                // A_k† A_k' = δ(n_k, n_k') g_k* g_k' |m_k><m_k'|
                if a.n == b.n {
                    m[(a.m, b.m)] += c.anti_plus[(k, kp)] * a.amplitude.conj() * b.amplitude;
                }
                // A_k A_k'† = δ(m_k, m_k') g_k g_k'* |n_k><n_k'|
                if a.m == b.m {
                    m[(a.n, b.n)] += c.anti_minus[(k, kp)] * a.amplitude * b.amplitude.conj();
                }
            }
        }
    }

    /// Coefficient tables of bath `alpha` at bath field `lam`.
    pub fn coefficients(&self, scheme: &Scheme, alpha: usize, lam: f64) -> Result<Coefficients> {
        let t = &self.transforms[alpha];
        let n = self.jumps.len();
        let lamb = scheme.lamb_shift;
        let mut out = Coefficients {
            jump_plus: DMatrix::zeros(n, n),
            jump_minus: DMatrix::zeros(n, n),
            anti_plus: DMatrix::zeros(n, n),
            anti_minus: DMatrix::zeros(n, n),
        };
        let omega: Vec<f64> = self.jumps.iter().map(|j| j.omega).collect();
        let class = &self.spectrum.class_of;
        let rep = |k: usize| self.spectrum.frequencies[class[k]];
        let lamb_at = |sign: Sign, w: f64| -> Result<f64> {
            if lamb {
                t.lamb_imag(sign, w, 0.0)
            } else {
                Ok(0.0)
            }
        };
        for k in 0..n {
            for kp in 0..n {
                for sign in [Sign::Plus, Sign::Minus] {
                    let (jump, anti) = match scheme.kind {
                        SchemeKind::Redfield => {
                            let a = t.gamma(sign, omega[k], lam, lamb)?;
                            let b = t.gamma(sign, omega[kp], lam, lamb)?;
                            (a + b.conj(), t.gamma(sign, omega[kp], 0.0, lamb)?)
                        }
                        SchemeKind::Secular => {
                            if class[k] != class[kp] {
                                continue;
                            }
                            let w = rep(k);
                            let r = t.rate_real(sign, w, lam);
                            let r0 = t.rate_real(sign, w, 0.0);
                            (C64::new(2.0 * r, 0.0), C64::new(r0, lamb_at(sign, w)?))
                        }
                        SchemeKind::Symmetrized { epsilon } => {
                            if !((omega[k] - omega[kp]).abs() < epsilon) {
                                continue;
                            }
                            let r = geometric_mean(t.rate_real(sign, omega[k], lam), t.rate_real(sign, omega[kp], lam));
                            let r0 =
                                geometric_mean(t.rate_real(sign, omega[k], 0.0), t.rate_real(sign, omega[kp], 0.0));
                            // the Lamb shift keeps only terms commuting with H_S
                            let im = if class[k] == class[kp] { lamb_at(sign, rep(k))? } else { 0.0 };
                            (C64::new(2.0 * r, 0.0), C64::new(r0, im))
                        }
                        SchemeKind::CoarseGrained { delta0 } => {
                            if !((omega[k] - omega[kp]).abs() < 1.0 / delta0) {
                                continue;
                            }
                            let mid = 0.5 * (omega[k] + omega[kp]);
                            let r = t.rate_real(sign, mid, lam);
                            let r0 = t.rate_real(sign, mid, 0.0);
                            (C64::new(2.0 * r, 0.0), C64::new(r0, lamb_at(sign, mid)?))
                        }
                    };
                    match sign {
                        Sign::Plus => {
                            out.jump_plus[(k, kp)] = jump;
                            out.anti_plus[(k, kp)] = anti;
                        }
                        Sign::Minus => {
                            out.jump_minus[(k, kp)] = jump;
                            out.anti_minus[(k, kp)] = anti;
                        }
                    }
                }
            }
        }
        Ok(out)
    }

    /// Near-degeneracy threshold `min √|X(ω) X(ω')|` over pairs of distinct
    /// frequencies, with `X = I` when the Lamb shift dominates the rates and
    /// `X = R` otherwise.
    pub fn default_epsilon(&self, lamb_shift: bool) -> Result<f64> {
        let n = self.jumps.len();
        let mut max_r: f64 = 0.0;
        let mut max_i: f64 = 0.0;
        for t in &self.transforms {
            for j in &self.jumps {
                for sign in [Sign::Plus, Sign::Minus] {
                    max_r = max_r.max(t.rate_real(sign, j.omega, 0.0));
                    if lamb_shift {
                        max_i = max_i.max(t.lamb_imag(sign, j.omega, 0.0)?.abs());
                    }
                }
            }
        }
        let use_lamb = lamb_shift && max_i > max_r;
        let mut best = f64::INFINITY;
        for t in &self.transforms {
            for k in 0..n {
                for kp in (k + 1)..n {
                    if self.spectrum.class_of[k] == self.spectrum.class_of[kp] {
                        continue;
                    }
                    for sign in [Sign::Plus, Sign::Minus] {
                        let (a, b) = if use_lamb {
                            (
                                t.lamb_imag(sign, self.jumps[k].omega, 0.0)?,
                                t.lamb_imag(sign, self.jumps[kp].omega, 0.0)?,
                            )
                        } else {
                            (t.rate_real(sign, self.jumps[k].omega, 0.0), t.rate_real(sign, self.jumps[kp].omega, 0.0))
                        };
                        let v = ComplexField::sqrt((a * b).abs());
                        if v > 0.0 {
                            best = best.min(v);
                        }
                    }
                }
            }
        }
        if best.is_finite() {
            Ok(best)
        } else {
            // no distinct pairs: any threshold reproduces the secular generator
            Ok(self.system.energy_scale().max(1.0))
        }
    }

    /// Jump-coefficient matrix of one channel at zero counting.
    pub fn jump_coefficient_matrix(&self, scheme: &Scheme, alpha: usize, sign: Sign) -> Result<DMatrix<C64>> {
        let c = self.coefficients(scheme, alpha, 0.0)?;
        Ok(match sign {
            Sign::Plus => c.jump_plus,
            Sign::Minus => c.jump_minus,
        })
    }
}

fn geometric_mean(a: f64, b: f64) -> f64 {
    if a == b {
        a
    } else {
        ComplexField::sqrt(a * b)
    }
}

/// `X -> e^{λH/2} L[e^{−λH/2} X e^{−λH/2}] e^{λH/2}` as a similarity transform.
pub fn add_system_counting(g: &TiltedGenerator, lambda_s: f64) -> TiltedGenerator {
    let d = g.dim();
    let e = &g.energies;
    let s: Vec<f64> = (0..d * d).map(|a| e[a % d] + e[a / d]).collect();
    let mut m = g.matrix.matrix().clone();
    for b in 0..d * d {
        for a in 0..d * d {
            let z = m[(a, b)];
            if z != ZERO {
                m[(a, b)] = z * ComplexField::exp(0.5 * lambda_s * (s[a] - s[b]));
            }
        }
    }
    TiltedGenerator { lambda_s: g.lambda_s + lambda_s, matrix: SuperOperator::wrap(d, m), ..g.clone() }
}

/// Time-reversed generator `X -> conj(L[conj(X)])` for conjugation in the
/// energy eigenbasis; the commutator sign flips through the conjugate of `−i`.
pub fn reversed_generator(g: &TiltedGenerator) -> TiltedGenerator {
    g.with_matrix(g.matrix.conjugate())
}

/// `−i` times the Hamiltonian commutator superoperator, exposed for tests.
pub fn hamiltonian_part(system: &SystemSpec) -> SuperOperator {
    SuperOperator::hamiltonian(&system.hamiltonian())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::SpectralDensity;
    use crate::operator::{frobenius, matrix_units, ONE};
    use crate::system::gibbs_state;

    fn bath(beta: f64, gamma: f64) -> BathSpec {
        BathSpec::new(beta, SpectralDensity::OhmicExpCutoff { eta: 0.4, omega_c: 1.5, cutoff: 5.0 }, gamma).unwrap()
    }

    fn two_level() -> SystemSpec {
        let mut g = DMatrix::zeros(2, 2);
        g[(1, 0)] = C64::new(0.8, 0.0);
        SystemSpec::new(alloc::vec![0.0, 0.9], g).unwrap()
    }

    fn three_level(split: f64) -> SystemSpec {
        let mut g = DMatrix::zeros(3, 3);
        g[(1, 0)] = ONE;
        g[(2, 0)] = C64::new(0.7, 0.0);
        SystemSpec::new(alloc::vec![0.0, 0.5 - split / 2.0, 0.5 + split / 2.0], g).unwrap()
    }

    fn four_level() -> SystemSpec {
        let g = DMatrix::from_fn(4, 4, |i, j| if i > j { C64::new(0.3 + 0.1 * i as f64, 0.0) } else { ZERO });
        SystemSpec::new(alloc::vec![0.0, 0.4, 0.45, 1.2], g).unwrap()
    }

    fn all_schemes() -> [Scheme; 4] {
        [Scheme::redfield(), Scheme::secular(), Scheme::symmetrized(0.1), Scheme::coarse_grained(15.0)]
    }

    /// Generator assembled from explicit sandwich superoperators.
    fn reference(g: &Generators, scheme: &Scheme, lambda_b: &[f64]) -> DMatrix<C64> {
        let d = g.system().dim();
        let mut l = SuperOperator::hamiltonian(&g.system().hamiltonian());
        let mut m = Operator::zeros(d);
        for (alpha, &lam) in lambda_b.iter().enumerate() {
            let c = g.coefficients(scheme, alpha, lam).unwrap();
            for (k, a) in g.jumps().iter().enumerate() {
                for (kp, b) in g.jumps().iter().enumerate() {
                    let ak = a.operator();
                    let akp = b.operator();
                    let jp = SuperOperator::sandwich(&ak, &akp.adjoint()).scale(c.jump_plus[(k, kp)]);
                    let jm = SuperOperator::sandwich(&ak.adjoint(), &akp).scale(c.jump_minus[(k, kp)]);
                    l = &(&l + &jp) + &jm;
                    m = &m + &(&ak.adjoint() * &akp).scale(c.anti_plus[(k, kp)]);
                    m = &m + &(&ak * &akp.adjoint()).scale(c.anti_minus[(k, kp)]);
                }
            }
        }
        let l = &(&l - &SuperOperator::left(&m)) - &SuperOperator::right(&m.adjoint());
        l.into_matrix()
    }

    #[test]
    fn direct_assembly_matches_sandwich_reference() {
        let g = Generators::new(four_level(), alloc::vec![bath(2.0, 0.3), bath(0.7, 0.2)]).unwrap();
        for scheme in all_schemes() {
            let lam = [0.3, -0.8];
            let built = g.build(&scheme, 0.0, &lam).unwrap();
            let r = reference(&g, &scheme, &lam);
            assert!(frobenius(&(built.matrix().matrix() - &r)) < 1e-13 * frobenius(&r), "{}", scheme.name());
        }
    }

    #[test]
    fn trace_and_hermiticity_preservation() {
        for sys in [two_level(), three_level(0.05), four_level()] {
            let g = Generators::new(sys, alloc::vec![bath(1.3, 0.4)]).unwrap();
            for scheme in all_schemes() {
                let l = g.untilted(&scheme).unwrap();
                let scale = l.matrix().frobenius_norm();
                assert!(l.matrix().trace_annihilation_residual() < 1e-12 * scale, "{}", scheme.name());
                assert!(l.matrix().hermiticity_preservation_residual() < 1e-12 * scale, "{}", scheme.name());
            }
        }
    }

    #[test]
    fn two_level_schemes_coincide() {
        let g = Generators::new(two_level(), alloc::vec![bath(1.0, 0.5)]).unwrap();
        let lam = [0.4];
        let sec = g.build(&Scheme::secular(), 0.3, &lam).unwrap();
        for scheme in [Scheme::redfield(), Scheme::symmetrized(0.01), Scheme::coarse_grained(0.5)] {
            let other = g.build(&scheme, 0.3, &lam).unwrap();
            let diff = frobenius(&(other.matrix().matrix() - sec.matrix().matrix()));
            assert!(diff < 1e-13 * sec.matrix().frobenius_norm(), "{} {diff}", scheme.name());
        }
    }

    #[test]
    fn secular_matches_amplitude_damping() {
        let sys = two_level();
        let g = Generators::new(sys.clone(), alloc::vec![bath(1.0, 0.5)]).unwrap();
        let t = &g.transforms()[0];
        let w = 0.9;
        let g2 = 0.64;
        let down = 2.0 * t.rate_real(Sign::Plus, w, 0.0) * g2;
        let up = 2.0 * t.rate_real(Sign::Minus, w, 0.0) * g2;
        let shift_e = t.lamb_imag(Sign::Plus, w, 0.0).unwrap() * g2;
        let shift_g = t.lamb_imag(Sign::Minus, w, 0.0).unwrap() * g2;
        let lower = Operator::from_real_rows(2, &[0.0, 1.0, 0.0, 0.0]).unwrap();
        let raise = lower.adjoint();
        let h = Operator::from_diagonal(&[shift_g, w + shift_e]);
        let dissip = |a: &Operator, rate: f64| {
            let ada = &a.adjoint() * a;
            let s = &(&SuperOperator::sandwich(a, &a.adjoint()) - &SuperOperator::left(&ada).scale(C64::new(0.5, 0.0)))
                - &SuperOperator::right(&ada).scale(C64::new(0.5, 0.0));
            s.scale(C64::new(rate, 0.0))
        };
        let expected = &(&SuperOperator::hamiltonian(&h) + &dissip(&lower, down)) + &dissip(&raise, up);
        let built = g.untilted(&Scheme::secular()).unwrap();
        assert!(frobenius(&(built.matrix().matrix() - expected.matrix())) < 1e-14);
    }

    #[test]
    fn secular_gibbs_fixed_point_and_block_structure() {
        let sys = four_level();
        let g = Generators::new(sys.clone(), alloc::vec![bath(1.7, 0.4)]).unwrap();
        let l = g.untilted(&Scheme::secular()).unwrap();
        let rho = gibbs_state(&sys, 1.7).unwrap();
        assert!(l.apply(&rho).frobenius_norm() < 1e-10 * l.matrix().frobenius_norm());
        let d = 4;
        for (a, xa) in matrix_units(d).iter().enumerate() {
            let out = l.apply(xa);
            let (i, j) = (a % d, a / d);
            for p in 0..d {
                for q in 0..d {
                    if out.get(p, q) == ZERO {
                        continue;
                    }
                    // populations feed populations; coherences stay within their Bohr frequency
                    if i == j {
                        assert_eq!(p, q);
                    } else {
                        let w_in = sys.energies()[i] - sys.energies()[j];
                        let w_out = sys.energies()[p] - sys.energies()[q];
                        assert!((w_in - w_out).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn symmetrized_threshold_collapse_and_degenerate_fixed_point() {
        let g = Generators::new(three_level(0.2), alloc::vec![bath(2.0, 0.3)]).unwrap();
        let sec = g.untilted(&Scheme::secular()).unwrap();
        let sym = g.untilted(&Scheme::symmetrized(0.1)).unwrap();
        assert!(frobenius(&(sym.matrix().matrix() - sec.matrix().matrix())) < 1e-14 * sec.matrix().frobenius_norm());
        let strict = g.untilted(&Scheme::symmetrized(0.2 - 1e-12)).unwrap();
        assert!(frobenius(&(strict.matrix().matrix() - sec.matrix().matrix())) < 1e-14);
        let kept = g.untilted(&Scheme::symmetrized(0.3)).unwrap();
        assert!(frobenius(&(kept.matrix().matrix() - sec.matrix().matrix())) > 1e-6);

        let mut gd = DMatrix::zeros(3, 3);
        gd[(1, 0)] = ONE;
        gd[(2, 0)] = C64::new(0.5, 0.0);
        let deg = SystemSpec::new(alloc::vec![0.0, 0.6, 0.6], gd).unwrap();
        let g = Generators::new(deg, alloc::vec![bath(2.0, 0.3)]).unwrap();
        let red = g.coefficients(&Scheme::redfield(), 0, 0.0).unwrap();
        let sym = g.coefficients(&Scheme::symmetrized(0.05), 0, 0.0).unwrap();
        assert!(frobenius(&(red.jump_plus - sym.jump_plus)) < 1e-15);
        assert!(frobenius(&(red.jump_minus - sym.jump_minus)) < 1e-15);
    }

    #[test]
    fn coarse_grained_midpoint_rates() {
        let g = Generators::new(three_level(0.05), alloc::vec![bath(2.0, 0.3)]).unwrap();
        let c = g.coefficients(&Scheme::coarse_grained(10.0).with_lamb_shift(false), 0, 0.0).unwrap();
        let t = &g.transforms()[0];
        let mid = 0.5;
        for sign in [Sign::Plus, Sign::Minus] {
            let (jump, anti) = match sign {
                Sign::Plus => (&c.jump_plus, &c.anti_plus),
                Sign::Minus => (&c.jump_minus, &c.anti_minus),
            };
            assert_eq!(jump[(0, 1)].re, 2.0 * t.rate_real(sign, mid, 0.0));
            assert_eq!(anti[(1, 0)].re, t.rate_real(sign, mid, 0.0));
        }
        let far = g.coefficients(&Scheme::coarse_grained(100.0), 0, 0.0).unwrap();
        assert_eq!(far.jump_plus[(0, 1)], ZERO);
    }

    #[test]
    fn gksl_coefficient_matrices_are_positive() {
        let g = Generators::new(three_level(0.05), alloc::vec![bath(2.0, 0.3)]).unwrap();
        for scheme in [Scheme::secular(), Scheme::symmetrized(0.2)] {
            for sign in [Sign::Plus, Sign::Minus] {
                let c = g.jump_coefficient_matrix(&scheme, 0, sign).unwrap();
                let (vals, _) = crate::operator::hermitian_eigen(&c);
                let max = vals.iter().cloned().fold(0.0, f64::max);
                assert!(vals[0] > -1e-12 * max);
            }
        }
    }

    #[test]
    fn additive_over_baths() {
        let sys = four_level();
        let b1 = bath(2.0, 0.3);
        let b2 = bath(0.5, 0.2);
        let both = Generators::new(sys.clone(), alloc::vec![b1.clone(), b2.clone()]).unwrap();
        let one = Generators::new(sys.clone(), alloc::vec![b1]).unwrap();
        let two = Generators::new(sys.clone(), alloc::vec![b2]).unwrap();
        let h = hamiltonian_part(&sys);
        for scheme in all_schemes() {
            let l = both.build(&scheme, 0.0, &[0.2, -0.3]).unwrap();
            let sum = &(&one.build(&scheme, 0.0, &[0.2]).unwrap().matrix().clone()
                + two.build(&scheme, 0.0, &[-0.3]).unwrap().matrix())
                - &h;
            assert!(frobenius(&(l.matrix().matrix() - sum.matrix())) < 1e-13 * l.matrix().frobenius_norm());
        }
    }

    #[test]
    fn system_counting_factors_and_composition() {
        let sys = three_level(0.1);
        let g = Generators::new(sys.clone(), alloc::vec![bath(1.0, 0.4)]).unwrap();
        let l = g.redfield(&[0.0]).unwrap();
        assert_eq!(add_system_counting(&l, 0.0).matrix(), l.matrix());
        let lam = 0.7;
        let t = add_system_counting(&l, lam);
        // jump channel σ_10 ρ σ_20† picks up e^{−λ(ω_10 + ω_20)/2}
        let e = sys.energies();
        let src = 1 + 3 * 2;
        let dst = 0;
        let ratio = t.matrix().matrix()[(dst, src)] / l.matrix().matrix()[(dst, src)];
        let expected = (-lam * ((e[1] - e[0]) + (e[2] - e[0])) / 2.0).exp();
        assert!((ratio - C64::new(expected, 0.0)).norm_sqr().sqrt() < 1e-14);
        let back = add_system_counting(&t, -lam);
        assert!(frobenius(&(back.matrix().matrix() - l.matrix().matrix())) < 1e-12 * l.matrix().frobenius_norm());
        let twice = add_system_counting(&add_system_counting(&l, 0.3), 0.5);
        let once = add_system_counting(&l, 0.8);
        assert!(
            frobenius(&(twice.matrix().matrix() - once.matrix().matrix())) < 1e-12 * once.matrix().frobenius_norm()
        );
    }

    #[test]
    fn system_counting_equals_explicit_sandwich() {
        let sys = three_level(0.1);
        let g = Generators::new(sys.clone(), alloc::vec![bath(1.0, 0.4)]).unwrap();
        let l = g.symmetrized(&[0.2], 0.3).unwrap();
        let lam = -0.9;
        let h = sys.hamiltonian();
        let p = h.exp(C64::new(lam / 2.0, 0.0)).unwrap();
        let pinv = h.exp(C64::new(-lam / 2.0, 0.0)).unwrap();
        let explicit = &(&SuperOperator::sandwich(&p, &p) * l.matrix()) * &SuperOperator::sandwich(&pinv, &pinv);
        let t = add_system_counting(&l, lam);
        assert!(frobenius(&(t.matrix().matrix() - explicit.matrix())) < 1e-13 * explicit.frobenius_norm());
    }

    #[test]
    fn reversal_cases() {
        let sys = four_level();
        let g = Generators::new(sys.clone(), alloc::vec![bath(1.5, 0.4)]).unwrap();
        let l = g.untilted(&Scheme::secular().with_lamb_shift(false)).unwrap();
        let r = reversed_generator(&l);
        let h = hamiltonian_part(&sys);
        let expected = &l.matrix().clone() - &h.scale(C64::new(2.0, 0.0));
        assert!(frobenius(&(r.matrix().matrix() - expected.matrix())) < 1e-14);
        assert_eq!(reversed_generator(&r).matrix(), l.matrix());
        let full = g.untilted(&Scheme::secular()).unwrap();
        let rho = gibbs_state(&sys, 1.5).unwrap();
        assert!(reversed_generator(&full).apply(&rho).frobenius_norm() < 1e-12);
        assert!(reversed_generator(&full).matrix().trace_annihilation_residual() < 1e-12);
    }

    #[test]
    fn validation_errors() {
        let g = Generators::new(two_level(), alloc::vec![bath(1.0, 0.5)]).unwrap();
        assert!(matches!(g.symmetrized(&[0.0], 0.0), Err(Error::InvalidScheme(_))));
        assert!(matches!(g.coarse_grained(0.0, &[0.0], -1.0), Err(Error::InvalidScheme(_))));
        assert!(matches!(g.secular(&[0.0, 1.0]), Err(Error::CountingFields { .. })));
        assert!(Generators::new(two_level(), alloc::vec![]).is_err());
    }

    #[test]
    fn default_epsilon_uses_pair_minimum() {
        let g = Generators::new(three_level(0.1), alloc::vec![bath(2.0, 0.3)]).unwrap();
        let t = &g.transforms()[0];
        let eps = g.default_epsilon(false).unwrap();
        let w1 = g.jumps()[0].omega;
        let w2 = g.jumps()[1].omega;
        let expected = [Sign::Plus, Sign::Minus]
            .iter()
            .map(|&s| (t.rate_real(s, w1, 0.0) * t.rate_real(s, w2, 0.0)).sqrt())
            .fold(f64::INFINITY, f64::min);
        assert!((eps - expected).abs() < 1e-15);
        let single = Generators::new(two_level(), alloc::vec![bath(2.0, 0.3)]).unwrap();
        assert!(single.default_epsilon(true).unwrap() > 0.0);
    }
}
