use nalgebra::DMatrix;
use proptest::prelude::*;
use qmelab_core::bath::{BathSpec, SpectralDensity};
use qmelab_core::consistency::{check_gqdb, default_lambda_grid, steady_state};
use qmelab_core::counting::{energy_change, propagate, HeatProbe};
use qmelab_core::exact::{exact_heat, ExactModel, ExactSolver, DEFAULT_DIMENSION_CAP};
use qmelab_core::generators::{Generators, Scheme};
use qmelab_core::models::ThreeLevelModel;
use qmelab_core::operator::Operator;
use qmelab_core::system::{gibbs_state, SystemSpec};
use qmelab_core::C64;

fn ladder() -> SystemSpec {
    let mut g = DMatrix::zeros(3, 3);
    g[(1, 0)] = C64::new(0.8, 0.0);
    g[(2, 1)] = C64::new(0.6, 0.0);
    g[(2, 0)] = C64::new(0.3, 0.0);
    SystemSpec::new(vec![0.0, 0.7, 1.6], g).unwrap()
}

fn bath(beta: f64, gamma: f64) -> BathSpec {
    BathSpec::new(beta, SpectralDensity::OhmicExpCutoff { eta: 0.5, omega_c: 1.5, cutoff: 8.0 }, gamma).unwrap()
}

fn two_baths() -> Generators {
    Generators::new(ladder(), vec![bath(0.5, 0.2), bath(3.0, 0.15)]).unwrap()
}

#[test]
fn secular_two_bath_balance_and_heat() {
    let g = two_baths();
    let s = Scheme::secular();
    let grid = default_lambda_grid(&g.betas(), 7);
    assert!(check_gqdb(&g, &s, &grid, 1e-8).unwrap().passed());
    assert!(!check_gqdb(&g, &Scheme::redfield(), &grid, 1e-8).unwrap().passed());

    let rho0 = Operator::from_diagonal(&[0.1, 0.3, 0.6]);
    let l0 = g.untilted(&s).unwrap();
    let probes: Vec<HeatProbe> = (0..2).map(|a| HeatProbe::new(&g, &s, a).unwrap()).collect();
    for t in [0.5, 3.0, 12.0] {
        let q: f64 = probes.iter().map(|p| p.heat(&rho0, t).unwrap()).sum();
        let de = energy_change(&l0, &rho0, t).unwrap();
        assert!((q - de).abs() < 1e-8 * de.abs().max(1e-3), "{t}: {q} {de}");
    }
}

#[test]
fn two_temperatures_carry_a_current() {
    let g = two_baths();
    let l0 = g.untilted(&Scheme::secular()).unwrap();
    let ss = steady_state(&l0).unwrap();
    let hot = gibbs_state(g.system(), 0.5).unwrap();
    let cold = gibbs_state(g.system(), 3.0).unwrap();
    let p = ss.rho.get(2, 2).re;
    assert!(p < hot.get(2, 2).re && p > cold.get(2, 2).re);
    let hot_heat = HeatProbe::new(&g, &Scheme::secular(), 0).unwrap();
    let q = hot_heat.heat(&ss.rho, 50.0).unwrap();
    assert!(q > 0.0, "heat flows out of the hot bath: {q}");
}

#[test]
fn exact_heat_estimators_agree() {
    let m = ThreeLevelModel::doublet().unwrap();
    let model = ExactModel::new(m.system.clone(), 40, 0.2, 5.0, 2).unwrap();
    let solver = ExactSolver::new(model, DEFAULT_DIMENSION_CAP).unwrap();
    let rho0 = ThreeLevelModel::initial_state();
    for t in [1.0, 10.0] {
        let h = exact_heat(&solver, &rho0, t).unwrap();
        assert!((h.from_mgf - h.direct).abs() < 1e-7, "{t}: {h:?}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagation_preserves_trace_and_hermiticity(
        t in 0.0f64..30.0,
        p in proptest::collection::vec(0.01f64..1.0, 3),
        sym in any::<bool>(),
    ) {
        let m = ThreeLevelModel::doublet().unwrap();
        let g = m.generators().unwrap();
        let s = if sym { m.symmetrized() } else { Scheme::redfield() };
        let total: f64 = p.iter().sum();
        let rho0 = Operator::from_diagonal(&p.iter().map(|x| x / total).collect::<Vec<_>>());
        let rho = propagate(&g.untilted(&s).unwrap(), &rho0, t).unwrap().rho;
        prop_assert!((rho.trace().re - 1.0).abs() < 1e-12);
        prop_assert!(rho.hermiticity_residual() < 1e-12);
    }
}
