//! Tilted propagation, moment generating functions, heat, fluctuation
//! theorems and entropy production along trajectories.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::ComplexField;

use crate::consistency::{derivative_step, linspace, richardson, CheckReport};
use crate::error::{Error, Result};
use crate::generators::{reversed_generator, Generators, Scheme, TiltedGenerator};
use crate::operator::{devectorize, expm, hermitian_eigen, vectorize, Operator, C64, LOG_FLOOR, ONE};
use crate::system::{gibbs_populations, gibbs_state};

/// Tilted density at time `t`; unnormalized once any field is nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct TiltedState {
    pub time: f64,
    pub lambda_s: f64,
    pub lambda_b: Vec<f64>,
    pub rho: Operator,
}

/// `G(t, λ)` with `lambda = [λ_S, λ_B...]`.
#[derive(Debug, Clone, PartialEq)]
pub struct MGFSample {
    pub time: f64,
    pub lambda: Vec<f64>,
    pub value: C64,
}

/// `e^{tL} ρ0`.
pub fn propagate(g: &TiltedGenerator, rho0: &Operator, t: f64) -> Result<TiltedState> {
    if rho0.dim() != g.dim() {
        return Err(Error::Dimension { expected: g.dim(), found: rho0.dim() });
    }
    let rho = if t == 0.0 {
        rho0.clone()
    } else {
        let p = expm(g.matrix().matrix(), C64::new(t, 0.0))?;
        devectorize(&(p * vectorize(rho0)))?
    };
    Ok(TiltedState { time: t, lambda_s: g.lambda_s, lambda_b: g.lambda_b.clone(), rho })
}

/// `G(t, λ) = Tr e^{tL_λ} ρ0`.
pub fn mgf(g: &TiltedGenerator, rho0: &Operator, t: f64) -> Result<MGFSample> {
    let s = propagate(g, rho0, t)?;
    let mut lambda = vec![g.lambda_s];
    lambda.extend_from_slice(&g.lambda_b);
    Ok(MGFSample { time: t, lambda, value: s.rho.trace() })
}

/// `Tr[H_S (ρ(t) − ρ0)]` under the untilted generator.
pub fn energy_change(g: &TiltedGenerator, rho0: &Operator, t: f64) -> Result<f64> {
    let rho = propagate(g, rho0, t)?.rho;
    let e = g.energies();
    Ok((0..e.len()).map(|i| e[i] * (rho.get(i, i).re - rho0.get(i, i).re)).sum())
}

/// Heat drawn from one bath, `∂_λ G(t, λ_α = −λ)|_0`, from generators
/// prebuilt at the four Richardson steps.
#[derive(Debug, Clone)]
pub struct HeatProbe {
    step: f64,
    tilted: Vec<(f64, TiltedGenerator)>,
}

impl HeatProbe {
    pub fn new(gens: &Generators, scheme: &Scheme, bath: usize) -> Result<Self> {
        let nb = gens.bath_count();
        if bath >= nb {
            return Err(Error::CountingFields { expected: nb, found: bath + 1 });
        }
        let step = derivative_step(gens.system().energies())?;
        let mut tilted = Vec::with_capacity(4);
        for s in [step, -step, 0.5 * step, -0.5 * step] {
            let mut lam = vec![0.0; nb];
            lam[bath] = -s;
            tilted.push((s, gens.build(scheme, 0.0, &lam)?));
        }
        Ok(Self { step, tilted })
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn heat(&self, rho0: &Operator, t: f64) -> Result<f64> {
        if t == 0.0 {
            return Ok(0.0);
        }
        let at = |s: f64| -> Result<f64> {
            let g = &self.tilted.iter().find(|(x, _)| *x == s).expect("prebuilt step").1;
            Ok(mgf(g, rho0, t)?.value.re)
        };
        let q = richardson(at, self.step)?;
        if !q.is_finite() {
            return Err(Error::StepUnderflow(self.step));
        }
        Ok(q)
    }

    pub fn series(&self, rho0: &Operator, times: &[f64]) -> Result<Vec<f64>> {
        times.iter().map(|&t| self.heat(rho0, t)).collect()
    }
}

/// Heat from `bath` at time `t`.
pub fn heat(gens: &Generators, scheme: &Scheme, rho0: &Operator, t: f64, bath: usize) -> Result<f64> {
    HeatProbe::new(gens, scheme, bath)?.heat(rho0, t)
}

/// One point of the detailed fluctuation-theorem comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct FtPoint {
    pub lambda_s: f64,
    pub lambda_b: Vec<f64>,
    /// `log G(t, λ)`.
    pub log_forward: f64,
    /// `log G^R(t, −λ−β)`.
    pub log_reversed: f64,
}

impl FtPoint {
    pub fn residual(&self) -> f64 {
        (self.log_reversed - self.log_forward).abs()
    }
}

fn real_log(z: C64) -> f64 {
    if z.re > 0.0 {
        ComplexField::ln(z.re)
    } else {
        f64::NAN
    }
}

/// Field vectors `(λ, −λ, …, −λ)` for `λ ∈ [−β, 0]`.
pub fn default_ft_grid(beta: f64, baths: usize, points: usize) -> Vec<(f64, Vec<f64>)> {
    linspace(-beta, 0.0, points).into_iter().map(|l| (l, vec![-l; baths])).collect()
}

/// Forward and reversed log-MGFs from `ρ0 = Gibbs(β_S)`.
pub fn ft_curves(
    gens: &Generators,
    scheme: &Scheme,
    beta_s: f64,
    t: f64,
    grid: &[(f64, Vec<f64>)],
) -> Result<Vec<FtPoint>> {
    let rho0 = gibbs_state(gens.system(), beta_s)?;
    let betas = gens.betas();
    let mut out = Vec::with_capacity(grid.len());
    for (ls, lb) in grid {
        if lb.len() != betas.len() {
            return Err(Error::CountingFields { expected: betas.len(), found: lb.len() });
        }
        let fwd = gens.build(scheme, *ls, lb)?;
        let mapped: Vec<f64> = lb.iter().zip(&betas).map(|(l, b)| -l - b).collect();
        let rev = reversed_generator(&gens.build(scheme, -ls - beta_s, &mapped)?);
        out.push(FtPoint {
            lambda_s: *ls,
            lambda_b: lb.clone(),
            log_forward: real_log(mgf(&fwd, &rho0, t)?.value),
            log_reversed: real_log(mgf(&rev, &rho0, t)?.value),
        });
    }
    Ok(out)
}

/// `max_λ |log G^R(t, −λ−β) − log G(t, λ)|`; grid entries are `[λ_S, λ_B...]`.
pub fn check_ft_work(
    gens: &Generators,
    scheme: &Scheme,
    beta_s: f64,
    t: f64,
    grid: &[(f64, Vec<f64>)],
    tolerance: f64,
) -> Result<CheckReport> {
    let pts = ft_curves(gens, scheme, beta_s, t, grid)?;
    let values = pts.iter().map(FtPoint::residual).collect();
    let grid = pts
        .iter()
        .map(|p| {
            let mut v = vec![p.lambda_s];
            v.extend_from_slice(&p.lambda_b);
            v
        })
        .collect();
    Ok(CheckReport::from_values("ft_work", tolerance, grid, values))
}

/// `ρ^p` on the spectrum clamped at [`LOG_FLOOR`]; negative eigenvalues
/// beyond roundoff are rejected.
fn density_power(rho: &Operator, p: f64) -> Result<Operator> {
    let (vals, vecs) = hermitian_eigen(rho.matrix());
    let top = vals.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if vals.iter().any(|&v| v < -1e-10 * top) {
        return Err(Error::RankDeficient);
    }
    let f: Vec<C64> = vals.iter().map(|&v| C64::new(ComplexField::powf(v.max(LOG_FLOOR), p), 0.0)).collect();
    let mut scaled = vecs.clone();
    for (j, mut col) in scaled.column_iter_mut().enumerate() {
        col *= f[j];
    }
    Ok(Operator::wrap(scaled * vecs.adjoint()))
}

/// `G_Σ(t, λ) = Tr[ρ(t)^{−λ} e^{tL_{0,λβ}}[ρ0^{1+λ}]]` with `ρ(t)` the untilted
/// trajectory of the same scheme.
pub fn entropy_mgf(gens: &Generators, scheme: &Scheme, rho0: &Operator, t: f64, lambda: f64) -> Result<f64> {
    if lambda == 0.0 || t == 0.0 {
        return Ok(rho0.trace().re);
    }
    let l0 = gens.untilted(scheme)?;
    let rho_t = propagate(&l0, rho0, t)?.rho.hermitian_part();
    let lb: Vec<f64> = gens.betas().iter().map(|b| lambda * b).collect();
    let tilted = gens.build(scheme, 0.0, &lb)?;
    let start = density_power(&rho0.hermitian_part(), 1.0 + lambda)?;
    let evolved = propagate(&tilted, &start, t)?.rho;
    let left = density_power(&rho_t, -lambda)?;
    Ok((&left * &evolved).trace().re)
}

/// `|G_Σ(t, −1) − 1|` at each time.
pub fn check_integral_ft_entropy(
    gens: &Generators,
    scheme: &Scheme,
    rho0: &Operator,
    times: &[f64],
    tolerance: f64,
) -> Result<CheckReport> {
    let mut values = Vec::with_capacity(times.len());
    for &t in times {
        values.push(entropy_mgf(gens, scheme, rho0, t, -1.0)? - 1.0);
    }
    let grid = times.iter().map(|&t| vec![t]).collect();
    Ok(CheckReport::from_values("integral_ft_entropy", tolerance, grid, values))
}

/// Thermodynamic observables on a common time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermoTrajectory {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// Heat drawn from each bath, indexed `[bath][time]`.
    pub heat: Vec<Vec<f64>>,
    pub entropy: Vec<f64>,
    /// `ΔS − Σ β_α Q_α`.
    pub entropy_production: Vec<f64>,
    /// `D(ρ(t) ‖ ρ_Gibbs)` for a single bath.
    pub relative_entropy: Option<Vec<f64>>,
    pub trace: Vec<f64>,
}

fn von_neumann(rho: &Operator) -> f64 {
    let (vals, _) = hermitian_eigen(rho.matrix());
    -vals.iter().filter(|&&v| v > 0.0).map(|&v| v * ComplexField::ln(v)).sum::<f64>()
}

pub fn thermo_trajectory(
    gens: &Generators,
    scheme: &Scheme,
    rho0: &Operator,
    times: &[f64],
) -> Result<ThermoTrajectory> {
    let l0 = gens.untilted(scheme)?;
    let e = gens.system().energies().to_vec();
    let betas = gens.betas();
    let probes: Vec<HeatProbe> = (0..betas.len()).map(|a| HeatProbe::new(gens, scheme, a)).collect::<Result<_>>()?;
    let log_gibbs = match betas.as_slice() {
        [beta] => {
            Some(gibbs_populations(&e, *beta)?.iter().map(|p| ComplexField::ln(p.max(LOG_FLOOR))).collect::<Vec<f64>>())
        }
        _ => None,
    };
    let s0 = von_neumann(&rho0.hermitian_part());
    let mut out = ThermoTrajectory {
        times: times.to_vec(),
        energy: Vec::with_capacity(times.len()),
        heat: vec![Vec::with_capacity(times.len()); betas.len()],
        entropy: Vec::with_capacity(times.len()),
        entropy_production: Vec::with_capacity(times.len()),
        relative_entropy: log_gibbs.as_ref().map(|_| Vec::with_capacity(times.len())),
        trace: Vec::with_capacity(times.len()),
    };
    for &t in times {
        let rho = propagate(&l0, rho0, t)?.rho.hermitian_part();
        let energy: f64 = (0..e.len()).map(|i| e[i] * rho.get(i, i).re).sum();
        let s = von_neumann(&rho);
        let mut sigma = s - s0;
        for (a, probe) in probes.iter().enumerate() {
            let q = probe.heat(rho0, t)?;
            sigma -= betas[a] * q;
            out.heat[a].push(q);
        }
        if let (Some(lg), Some(d)) = (&log_gibbs, out.relative_entropy.as_mut()) {
            let cross: f64 = (0..e.len()).map(|i| rho.get(i, i).re * lg[i]).sum();
            d.push(-s - cross);
        }
        out.energy.push(energy);
        out.entropy.push(s);
        out.entropy_production.push(sigma);
        out.trace.push(rho.trace().re);
    }
    Ok(out)
}

/// Whether `Tr ρ = 1` within `tol`.
pub fn is_normalized(rho: &Operator, tol: f64) -> bool {
    (rho.trace() - ONE).re.abs() <= tol && rho.trace().im.abs() <= tol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bath::{BathSpec, Sign, SpectralDensity};
    use crate::models::ThreeLevelModel;
    use crate::system::SystemSpec;
    use nalgebra::DMatrix;
    use proptest::prelude::*;

    fn doublet() -> (ThreeLevelModel, Generators) {
        let m = ThreeLevelModel::doublet().unwrap();
        let g = m.generators().unwrap();
        (m, g)
    }

    fn two_level() -> Generators {
        let mut c = DMatrix::zeros(2, 2);
        c[(1, 0)] = C64::new(0.8, 0.0);
        let sys = SystemSpec::new(vec![0.0, 1.0], c).unwrap();
        let bath =
            BathSpec::new(2.0, SpectralDensity::OhmicExpCutoff { eta: 1.0, omega_c: 2.0, cutoff: 40.0 }, 0.1).unwrap();
        Generators::new(sys, vec![bath]).unwrap()
    }

    #[test]
    fn propagate_trivial_cases() {
        let (m, g) = doublet();
        let rho0 = ThreeLevelModel::initial_state();
        let l0 = g.untilted(&m.symmetrized()).unwrap();
        assert_eq!(propagate(&l0, &rho0, 0.0).unwrap().rho, rho0);
        for t in [0.5, 10.0, 200.0] {
            let r = propagate(&l0, &rho0, t).unwrap().rho;
            assert!(is_normalized(&r, 1e-10));
        }
        assert!(propagate(&l0, &Operator::identity(2), 1.0).is_err());
    }

    #[test]
    fn secular_two_level_matches_rate_equation() {
        let g = two_level();
        let tr = &g.transforms()[0];
        let c2 = 0.64;
        let down = 2.0 * c2 * tr.rate_real(Sign::Plus, 1.0, 0.0);
        let up = 2.0 * c2 * tr.rate_real(Sign::Minus, 1.0, 0.0);
        let p_ss = up / (up + down);
        let l0 = g.untilted(&Scheme::secular()).unwrap();
        let rho0 = Operator::from_diagonal(&[0.2, 0.8]);
        for t in [0.0, 1.0, 7.0, 40.0] {
            let p = propagate(&l0, &rho0, t).unwrap().rho.get(1, 1).re;
            let expected = p_ss + (0.8 - p_ss) * (-(up + down) * t).exp();
            assert!((p - expected).abs() < 1e-8, "{t}: {p} {expected}");
        }
    }

    #[test]
    fn mgf_normalization_and_zero_time() {
        let (m, g) = doublet();
        let rho0 = ThreeLevelModel::initial_state();
        for s in m.schemes() {
            let l0 = g.untilted(&s).unwrap();
            assert!((mgf(&l0, &rho0, 30.0).unwrap().value - ONE).re.abs() < 1e-10);
            let tilted = g.build(&s, 0.0, &[-2.0]).unwrap();
            assert!((mgf(&tilted, &rho0, 0.0).unwrap().value - ONE).re.abs() < 1e-15);
        }
    }

    #[test]
    fn mgf_semigroup_composition() {
        let (m, g) = doublet();
        let rho0 = ThreeLevelModel::initial_state();
        let l = g.build(&m.symmetrized(), 0.3, &[-1.2]).unwrap();
        let mid = propagate(&l, &rho0, 7.0).unwrap().rho;
        let two = propagate(&l, &mid, 5.0).unwrap().rho;
        let one = propagate(&l, &rho0, 12.0).unwrap().rho;
        assert!((&two - &one).frobenius_norm() < 1e-10);
    }

    #[test]
    fn log_mgf_is_convex() {
        let (m, g) = doublet();
        let rho0 = ThreeLevelModel::initial_state();
        let lams = linspace(-6.0, 2.0, 33);
        let vals: Vec<f64> = lams
            .iter()
            .map(|&l| mgf(&g.build(&m.symmetrized(), 0.0, &[l]).unwrap(), &rho0, 40.0).unwrap().value.re.ln())
            .collect();
        for w in vals.windows(3) {
            assert!(w[0] - 2.0 * w[1] + w[2] >= -1e-10);
        }
    }

    #[test]
    fn heat_matches_energy_change() {
        let (m, g) = doublet();
        let rho0 = ThreeLevelModel::initial_state();
        for s in [Scheme::secular(), m.symmetrized()] {
            let probe = HeatProbe::new(&g, &s, 0).unwrap();
            let l0 = g.untilted(&s).unwrap();
            assert_eq!(probe.heat(&rho0, 0.0).unwrap(), 0.0);
            for t in [1.0, 10.0, 60.0] {
                let q = probe.heat(&rho0, t).unwrap();
                let de = energy_change(&l0, &rho0, t).unwrap();
                assert!((q - de).abs() < 1e-8 * de.abs().max(1e-3), "{} {t}: {q} {de}", s.name());
            }
        }
        assert!(HeatProbe::new(&g, &Scheme::secular(), 1).is_err());
    }

    #[test]
    fn ft_holds_for_lindblad_forms_only() {
        let (m, g) = doublet();
        let beta = m.bath.beta;
        let grid = default_ft_grid(beta, 1, 11);
        let sec = check_ft_work(&g, &Scheme::secular(), beta, 20.0, &grid, 1e-8).unwrap();
        let sym = check_ft_work(&g, &m.symmetrized(), beta, 20.0, &grid, 1e-8).unwrap();
        let red = check_ft_work(&g, &Scheme::redfield(), beta, 20.0, &grid, 1e-8).unwrap();
        assert!(sec.passed(), "{}", sec.residual);
        assert!(sym.passed(), "{}", sym.residual);
        assert!(red.residual > 1e2 * sym.residual.max(1e-14), "{}", red.residual);
    }

    #[test]
    fn ft_symmetric_point_maps_to_itself() {
        let (m, g) = doublet();
        let beta = m.bath.beta;
        let grid = vec![(-beta / 2.0, vec![-beta / 2.0])];
        let p = &ft_curves(&g, &m.symmetrized(), beta, 15.0, &grid).unwrap()[0];
        assert!(p.residual() < 1e-8, "{}", p.residual());
    }

    #[test]
    fn integral_entropy_ft() {
        let (m, g) = doublet();
        let mixed = &ThreeLevelModel::initial_state().scale(C64::new(0.9, 0.0))
            + &Operator::identity(3).scale(C64::new(0.1 / 3.0, 0.0));
        let times = [0.0, 2.0, 10.0, 40.0];
        for s in [Scheme::secular(), m.symmetrized()] {
            let r = check_integral_ft_entropy(&g, &s, &mixed, &times, 1e-6).unwrap();
            assert!(r.passed(), "{} {}", s.name(), r.residual);
            assert!(r.values[0] < 1e-15);
            assert!((entropy_mgf(&g, &s, &mixed, 10.0, 0.0).unwrap() - 1.0).abs() < 1e-15);
        }
        // at λ = −1 only unitality of L_{0,−β} enters, which Redfield shares
        let red = check_integral_ft_entropy(&g, &Scheme::redfield(), &mixed, &times, 1e-6).unwrap();
        assert!(red.residual < 1e-10, "{}", red.residual);
        let lb: Vec<f64> = g.betas().iter().map(|b| -b).collect();
        let k = g.build(&Scheme::redfield(), 0.0, &lb).unwrap();
        assert!(k.apply(&Operator::identity(3)).frobenius_norm() < 1e-12);
    }

    #[test]
    fn density_power_rejects_negative_states() {
        let bad = Operator::from_diagonal(&[1.2, -0.2]);
        assert!(matches!(density_power(&bad, 0.5), Err(Error::RankDeficient)));
        let ok = density_power(&Operator::from_diagonal(&[0.25, 0.75]), 0.5).unwrap();
        assert!((ok.get(0, 0).re - 0.5).abs() < 1e-15);
    }

    #[test]
    fn second_law_along_secular_trajectory() {
        let (_, g) = doublet();
        let rho0 = ThreeLevelModel::initial_state();
        let times = linspace(0.0, 150.0, 61);
        let tr = thermo_trajectory(&g, &Scheme::secular(), &rho0, &times).unwrap();
        assert_eq!(tr.entropy_production[0], 0.0);
        let d = tr.relative_entropy.as_ref().unwrap();
        for i in 1..times.len() {
            assert!(tr.entropy_production[i] - tr.entropy_production[i - 1] > -1e-10);
            assert!(d[i] - d[i - 1] < 1e-10);
            assert!((tr.trace[i] - 1.0).abs() < 1e-10);
            let de = tr.energy[i] - tr.energy[0];
            assert!((de - tr.heat[0][i]).abs() < 1e-7 * de.abs().max(tr.heat[0][i].abs()).max(1e-12));
        }
    }

    #[test]
    fn gibbs_start_is_stationary_for_secular() {
        let (m, g) = doublet();
        let rho0 = gibbs_state(&m.system, m.bath.beta).unwrap();
        let tr = thermo_trajectory(&g, &Scheme::secular(), &rho0, &linspace(0.0, 100.0, 11)).unwrap();
        assert!(tr.entropy_production.iter().all(|s| s.abs() < 1e-9));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]
        #[test]
        fn untilted_trace_preserved(t in 0.0f64..200.0, seed in 0u64..1000) {
            let (m, g) = doublet();
            let rho0 = crate::consistency::random_density_matrices(3, 1, seed).remove(0);
            let l0 = g.untilted(&m.symmetrized()).unwrap();
            let r = propagate(&l0, &rho0, t).unwrap().rho;
            prop_assert!(is_normalized(&r, 1e-10));
        }
    }
}
