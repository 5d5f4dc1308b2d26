//! Subcommand bodies. Each returns the reports whose verdicts decide the
//! exit status; files go through the single [`Emitter`].

use qmelab_core::bath::{BathSpec, Sign};
use qmelab_core::consistency::{
    check_average_first_law, check_gibbs_fixed_point, check_gqdb, check_strict_energy, default_lambda_grid, linspace,
    random_density_matrices, sinc_condition, steady_state, CheckReport,
};
use qmelab_core::counting::{
    check_ft_work, check_integral_ft_entropy, default_ft_grid, energy_change, ft_curves, mgf, thermo_trajectory,
    FtPoint, HeatProbe,
};
use qmelab_core::exact::{tpm_run, ExactModel, ExactSolver};
use qmelab_core::generators::{Generators, Scheme, SchemeKind};
use qmelab_core::system::gibbs_populations;
use qmelab_core::Error;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{Format, Resolved, SchemeName};
use crate::emit::{fmt_f64, Emitter, Table};
use crate::error::AppError;
use crate::plot::FIG2_SCRIPT;

fn positive_times(times: &[f64]) -> Vec<f64> {
    times.iter().copied().filter(|&t| t > 0.0).collect()
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `|a − b| / max|b|`, or absolute when `b` vanishes.
fn relative_gap(a: &[f64], b: &[f64]) -> Vec<f64> {
    let scale = max_abs(b);
    let scale = if scale > 0.0 { scale } else { 1.0 };
    a.iter().zip(b).map(|(x, y)| (x - y).abs() / scale).collect()
}

/// Trapezoid integral of `|a − b|` over `t`.
pub fn integrated_deviation(t: &[f64], a: &[f64], b: &[f64]) -> f64 {
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| (x - y).abs()).collect();
    (1..t.len()).map(|i| 0.5 * (d[i] + d[i - 1]) * (t[i] - t[i - 1])).sum()
}

/// Total heat into the system from all baths at each time.
fn total_heat(gens: &Generators, scheme: &Scheme, r: &Resolved, times: &[f64]) -> Result<Vec<f64>, AppError> {
    let mut q = vec![0.0; times.len()];
    for a in 0..gens.bath_count() {
        let probe = HeatProbe::new(gens, scheme, a)?;
        for (qi, &t) in q.iter_mut().zip(times) {
            *qi += probe.heat(&r.rho0, t)?;
        }
    }
    Ok(q)
}

/// `Σ_α Q_α(t)` against `Tr[H_S(ρ(t) − ρ0)]`, relative to the largest energy change.
pub fn heat_report(
    name: &str,
    gens: &Generators,
    scheme: &Scheme,
    r: &Resolved,
    times: &[f64],
    tolerance: f64,
) -> Result<CheckReport, AppError> {
    let l0 = gens.untilted(scheme)?;
    let q = total_heat(gens, scheme, r, times)?;
    let de = times.iter().map(|&t| energy_change(&l0, &r.rho0, t)).collect::<Result<Vec<_>, _>>()?;
    let grid = times.iter().map(|&t| vec![t]).collect();
    Ok(CheckReport::from_values(name, tolerance, grid, relative_gap(&q, &de)))
}

/// Sinc integral over near-degenerate frequency pairs kept by the scheme,
/// for each bath and branch.
fn sinc_report(gens: &Generators, delta0: f64, tolerance: f64) -> Result<CheckReport, AppError> {
    let tol = gens.system().omega_tolerance();
    let freqs: Vec<f64> = gens.spectrum().frequencies.iter().copied().filter(|&w| w > tol).collect();
    let (mut grid, mut values) = (Vec::new(), Vec::new());
    for (i, &w1) in freqs.iter().enumerate() {
        for &w2 in &freqs[i + 1..] {
            if (w2 - w1).abs() >= 1.0 / delta0 {
                continue;
            }
            for (a, tr) in gens.transforms().iter().enumerate() {
                for (s, sign) in [(1.0, Sign::Plus), (-1.0, Sign::Minus)] {
                    values.push(sinc_condition(w1, w2, delta0, tr, sign)?.normalized());
                    grid.push(vec![w1, w2, a as f64, s]);
                }
            }
        }
    }
    Ok(CheckReport::from_values("sinc_first_law", tolerance, grid, values))
}

/// Full consistency suite for the configured scheme.
pub fn check_suite(r: &Resolved) -> Result<Vec<CheckReport>, AppError> {
    let gens = r.generators()?;
    let scheme = r.scheme(&gens)?;
    let tol = &r.config.tolerances;
    let c = &r.config.counting;
    let betas = r.betas();
    let nb = betas.len();
    let mut out = Vec::new();

    match check_gqdb(&gens, &scheme, &default_lambda_grid(&betas, c.grid_points), tol.gqdb) {
        Err(Error::TimeReversalOdd) => log::warn!("couplings are not time-reversal even; gqdb skipped"),
        res => out.push(res?),
    }
    let chis = linspace(-betas[0], betas[0], c.grid_points);
    out.push(check_strict_energy(&gens, &scheme, 0.0, &vec![0.0; nb], &chis, tol.strict_energy)?);
    let samples = random_density_matrices(r.system.dim(), c.first_law_samples, c.sample_seed);
    out.push(check_average_first_law(&gens, &scheme, &samples, tol.first_law)?);
    let l0 = gens.untilted(&scheme)?;
    if nb == 1 {
        out.push(check_gibbs_fixed_point(&l0, betas[0], tol.gibbs)?);
    }
    let ss = steady_state(&l0)?;
    let rel = ss.residual / l0.matrix().frobenius_norm();
    out.push(CheckReport::from_values("steady_state", tol.steady_state, vec![], vec![rel]));
    let times = positive_times(&r.times);
    out.push(heat_report("heat_first_law", &gens, &scheme, r, &times, tol.heat)?);
    let grid = default_ft_grid(betas[0], nb, c.ft_points);
    out.push(check_ft_work(&gens, &scheme, r.beta_s(), r.ft_time(), &grid, tol.ft)?);
    out.push(check_integral_ft_entropy(&gens, &scheme, &r.rho0, &times, tol.entropy_ft)?);
    if let SchemeKind::CoarseGrained { delta0 } = scheme.kind {
        out.push(sinc_report(&gens, delta0, tol.sinc)?);
    }
    for rep in &out {
        log::info!("{}: residual {} ({:?})", rep.check, fmt_f64(rep.residual), rep.verdict);
    }
    Ok(out)
}

pub fn cmd_check(r: &Resolved, em: &mut Emitter) -> Result<Vec<CheckReport>, AppError> {
    let reports = check_suite(r)?;
    if r.config.output.wants(Format::Json) {
        em.json("check_report.json", &reports)?;
    }
    em.record(&reports);
    Ok(reports)
}

#[derive(Debug, Serialize)]
struct SteadyOutput {
    scheme: &'static str,
    residual: f64,
    populations: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    gibbs_populations: Option<Vec<f64>>,
    max_coherence: f64,
    rho: Vec<Vec<[f64; 2]>>,
}

pub fn cmd_steady(r: &Resolved, em: &mut Emitter) -> Result<Vec<CheckReport>, AppError> {
    let gens = r.generators()?;
    let scheme = r.scheme(&gens)?;
    let l0 = gens.untilted(&scheme)?;
    let ss = steady_state(&l0)?;
    let d = r.system.dim();
    let rho = &ss.rho;
    let mut max_coherence = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            if i != j {
                max_coherence = max_coherence.max(rho.get(i, j).re.hypot(rho.get(i, j).im));
            }
        }
    }
    let betas = r.betas();
    let out = SteadyOutput {
        scheme: scheme.name(),
        residual: ss.residual,
        populations: (0..d).map(|i| rho.get(i, i).re).collect(),
        gibbs_populations: match betas.as_slice() {
            [beta] => Some(gibbs_populations(r.system.energies(), *beta)?),
            _ => None,
        },
        max_coherence,
        rho: (0..d).map(|i| (0..d).map(|j| [rho.get(i, j).re, rho.get(i, j).im]).collect()).collect(),
    };
    let report = CheckReport::from_values(
        "steady_state",
        r.config.tolerances.steady_state,
        vec![],
        vec![ss.residual / l0.matrix().frobenius_norm()],
    );
    if r.config.output.wants(Format::Json) {
        em.json("steady_state.json", &out)?;
    }
    em.record(std::slice::from_ref(&report));
    Ok(vec![report])
}

/// Counting-field points of the MGF scan, `[λ_S, λ_B...]`.
pub fn mgf_grid(r: &Resolved) -> Vec<Vec<f64>> {
    let c = &r.config.counting;
    let ls = c.lambda_s.map(|x| x.values()).unwrap_or_else(|| vec![0.0]);
    let axes: Vec<Vec<f64>> = match &c.lambda_b {
        Some(ranges) => ranges.iter().map(|x| x.values()).collect(),
        None => r.baths.iter().map(|b| linspace(-b.beta, 0.0, c.grid_points)).collect(),
    };
    let mut points: Vec<Vec<f64>> = ls.into_iter().map(|l| vec![l]).collect();
    for axis in &axes {
        points = points.iter().flat_map(|p| axis.iter().map(move |&x| [p.as_slice(), &[x]].concat())).collect();
    }
    points
}

pub fn cmd_evolve(r: &Resolved, em: &mut Emitter) -> Result<Vec<CheckReport>, AppError> {
    let gens = r.generators()?;
    let scheme = r.scheme(&gens)?;
    let nb = gens.bath_count();
    let traj = thermo_trajectory(&gens, &scheme, &r.rho0, &r.times)?;
    let mut header = vec!["t".to_string(), "E_S".to_string()];
    header.extend((1..=nb).map(|a| format!("Q_{a}")));
    header.extend(["S", "Sigma", "D_rel"].map(String::from));
    let mut tt = Table::new(header);
    for (i, &t) in traj.times.iter().enumerate() {
        let mut row = vec![fmt_f64(t), fmt_f64(traj.energy[i])];
        row.extend(traj.heat.iter().map(|q| fmt_f64(q[i])));
        row.push(fmt_f64(traj.entropy[i]));
        row.push(fmt_f64(traj.entropy_production[i]));
        row.push(traj.relative_entropy.as_ref().map(|d| fmt_f64(d[i])).unwrap_or_default());
        tt.push_cells(row);
    }

    let mut header = vec!["t".to_string(), "lambda_S".to_string()];
    header.extend((1..=nb).map(|a| format!("lambda_B{a}")));
    header.extend(["Re G", "Im G"].map(String::from));
    let mut mt = Table::new(header);
    if !r.times.is_empty() {
        let points = mgf_grid(r);
        let gens_tilted = points.iter().map(|p| gens.build(&scheme, p[0], &p[1..])).collect::<Result<Vec<_>, _>>()?;
        for &t in &r.times {
            for (p, g) in points.iter().zip(&gens_tilted) {
                let v = mgf(g, &r.rho0, t)?.value;
                mt.push([t].into_iter().chain(p.iter().copied()).chain([v.re, v.im]));
            }
        }
    }
    if r.config.output.wants(Format::Csv) {
        em.csv("trajectory.csv", &tt, None)?;
        em.csv("mgf.csv", &mt, None)?;
    }
    Ok(Vec::new())
}

fn ft_table(nb: usize, points: &[FtPoint]) -> Table {
    let mut header = vec!["lambda_S".to_string()];
    header.extend((1..=nb).map(|a| format!("lambda_B{a}")));
    header.extend(["log G", "log G^R", "residual"].map(String::from));
    let mut t = Table::new(header);
    for p in points {
        t.push([p.lambda_s].into_iter().chain(p.lambda_b.iter().copied()).chain([
            p.log_forward,
            p.log_reversed,
            p.residual(),
        ]));
    }
    t
}

pub fn cmd_ft(r: &Resolved, em: &mut Emitter) -> Result<Vec<CheckReport>, AppError> {
    let gens = r.generators()?;
    let scheme = r.scheme(&gens)?;
    let nb = gens.bath_count();
    let grid = default_ft_grid(r.baths[0].beta, nb, r.config.counting.ft_points);
    let points = ft_curves(&gens, &scheme, r.beta_s(), r.ft_time(), &grid)?;
    let values = points.iter().map(FtPoint::residual).collect();
    let report = CheckReport::from_values(
        "ft_work",
        r.config.tolerances.ft,
        points.iter().map(|p| [&[p.lambda_s], p.lambda_b.as_slice()].concat()).collect(),
        values,
    );
    if r.config.output.wants(Format::Csv) {
        em.csv("ft.csv", &ft_table(nb, &points), None)?;
    }
    if r.config.output.wants(Format::Json) {
        em.json("ft_report.json", &report)?;
    }
    em.record(std::slice::from_ref(&report));
    Ok(vec![report])
}

/// Oracle inputs that are configuration errors rather than numeric failures.
fn oracle_err(e: Error) -> AppError {
    match e {
        Error::NonRealCoupling | Error::DimensionCap { .. } => AppError::Config(e.to_string()),
        e => AppError::Numeric(e),
    }
}

fn single_bath(r: &Resolved) -> Result<&BathSpec, AppError> {
    match r.baths.as_slice() {
        [b] => Ok(b),
        _ => Err(AppError::Config("the exact oracle needs exactly one bath".into())),
    }
}

fn exact_solver(r: &Resolved, seed: u64) -> Result<ExactSolver, AppError> {
    let o = &r.config.oracle;
    let b = single_bath(r)?;
    let model = ExactModel::new(r.system.clone(), o.n, b.gamma, b.beta, seed).map_err(oracle_err)?;
    ExactSolver::new(model, o.cap).map_err(oracle_err)
}

/// Generators on the spectral density estimated from the sampled bath.
fn calibrated_generators(r: &Resolved, solver: &ExactSolver) -> Result<Generators, AppError> {
    let o = &r.config.oracle;
    let b = single_bath(r)?;
    let density = solver.model().calibrated_density(o.bandwidth, o.table_points)?;
    Ok(Generators::new(r.system.clone(), vec![BathSpec::new(b.beta, density, b.gamma)?])?)
}

#[derive(Debug, Clone)]
struct OracleRun {
    seed: u64,
    exact: Vec<f64>,
    schemes: Vec<(SchemeName, Vec<f64>)>,
}

fn oracle_seed(r: &Resolved, seed: u64) -> Result<OracleRun, AppError> {
    let solver = exact_solver(r, seed)?;
    let exact = tpm_run(&solver, &r.rho0, &r.times, &[])?.heat;
    let gens = calibrated_generators(r, &solver)?;
    let mut schemes = Vec::new();
    for name in SchemeName::ALL {
        let scheme = r.scheme_named(name, &gens)?;
        schemes.push((name, HeatProbe::new(&gens, &scheme, 0)?.series(&r.rho0, &r.times)?));
    }
    log::info!("oracle seed {seed} done");
    Ok(OracleRun { seed, exact, schemes })
}

fn scheme_label(name: SchemeName) -> &'static str {
    match name {
        SchemeName::Redfield => "redfield",
        SchemeName::Secular => "secular",
        SchemeName::Symmetrized => "symmetrized",
        SchemeName::CoarseGrained => "coarse_grained",
    }
}

#[derive(Debug, Serialize)]
struct SeedSummary {
    seed: u64,
    integrated_deviation: std::collections::BTreeMap<&'static str, f64>,
}

#[derive(Debug, Serialize)]
struct OracleSummary {
    levels: usize,
    seeds: Vec<SeedSummary>,
    symmetrized_beats_secular: usize,
}

pub fn cmd_oracle(r: &Resolved, em: &mut Emitter) -> Result<Vec<CheckReport>, AppError> {
    let o = &r.config.oracle;
    single_bath(r)?;
    let seeds: Vec<u64> = (0..o.seeds as u64).map(|k| o.seed + k).collect();
    let runs = seeds.par_iter().map(|&s| oracle_seed(r, s)).collect::<Result<Vec<_>, _>>()?;
    let b = &r.baths[0];
    let mut summary = OracleSummary { levels: o.n, seeds: Vec::new(), symmetrized_beats_secular: 0 };
    for run in &runs {
        let mut header = vec!["t".to_string(), "Q_exact".to_string()];
        header.extend(run.schemes.iter().map(|(n, _)| format!("Q_{}", scheme_label(*n))));
        let mut t = Table::new(header);
        for (i, &ti) in r.times.iter().enumerate() {
            t.push([ti, run.exact[i]].into_iter().chain(run.schemes.iter().map(|(_, q)| q[i])));
        }
        let provenance = serde_json::json!({
            "seed": run.seed,
            "levels": o.n,
            "gamma": b.gamma,
            "beta": b.beta,
            "bandwidth": o.bandwidth,
            "table_points": o.table_points,
            "initial_state": r.config.initial_state,
        });
        if r.config.output.wants(Format::Csv) {
            em.csv(&format!("oracle_seed{}.csv", run.seed), &t, Some(&provenance.to_string()))?;
        }
        let dev: std::collections::BTreeMap<&'static str, f64> = run
            .schemes
            .iter()
            .map(|(n, q)| (scheme_label(*n), integrated_deviation(&r.times, q, &run.exact)))
            .collect();
        if dev["symmetrized"] < dev["secular"] {
            summary.symmetrized_beats_secular += 1;
        }
        summary.seeds.push(SeedSummary { seed: run.seed, integrated_deviation: dev });
    }
    if r.config.output.wants(Format::Json) {
        em.json("oracle_summary.json", &summary)?;
    }
    Ok(Vec::new())
}

pub fn cmd_fig2(r: &Resolved, em: &mut Emitter) -> Result<Vec<CheckReport>, AppError> {
    if !r.config.oracle.enabled {
        return Err(AppError::Config(
            "fig2 compares against the exact oracle; set `enabled = true` under [oracle] in the config".into(),
        ));
    }
    single_bath(r)?;
    let beta = r.baths[0].beta;
    let tol = &r.config.tolerances;
    let configured = r.config.scheme.name;

    let grid = default_ft_grid(beta, 1, r.config.counting.ft_points);
    let curves = SchemeName::ALL
        .par_iter()
        .map(|&name| -> Result<Vec<FtPoint>, AppError> {
            let gens = r.generators()?;
            let scheme = r.scheme_named(name, &gens)?;
            Ok(ft_curves(&gens, &scheme, r.beta_s(), r.ft_time(), &grid)?)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut header = vec!["lambda".to_string()];
    for name in SchemeName::ALL {
        header.push(format!("log G {}", scheme_label(name)));
        header.push(format!("log G^R {}", scheme_label(name)));
    }
    let mut a = Table::new(header);
    for (i, (ls, _)) in grid.iter().enumerate() {
        a.push([*ls].into_iter().chain(curves.iter().flat_map(|c| [c[i].log_forward, c[i].log_reversed])));
    }
    let mut reports: Vec<CheckReport> = SchemeName::ALL
        .iter()
        .zip(&curves)
        .map(|(name, c)| {
            CheckReport::from_values(
                &format!("fig2a_ft_{}", scheme_label(*name)),
                tol.ft,
                grid.iter().map(|(l, _)| vec![*l]).collect(),
                c.iter().map(FtPoint::residual).collect(),
            )
        })
        .collect();

    let solver = exact_solver(r, r.config.oracle.seed)?;
    let exact = tpm_run(&solver, &r.rho0, &r.times, &[])?.heat;
    let gens = calibrated_generators(r, &solver)?;
    let scheme = r.scheme_named(configured, &gens)?;
    let q = HeatProbe::new(&gens, &scheme, 0)?.series(&r.rho0, &r.times)?;
    let l0 = gens.untilted(&scheme)?;
    let de = r.times.iter().map(|&t| energy_change(&l0, &r.rho0, t)).collect::<Result<Vec<_>, _>>()?;
    let secular = r.scheme_named(SchemeName::Secular, &gens)?;
    let qs = HeatProbe::new(&gens, &secular, 0)?.series(&r.rho0, &r.times)?;
    let mut b = Table::new(["t", "Q_mgf", "dE_S", "Q_secular", "Q_exact"]);
    for (i, &t) in r.times.iter().enumerate() {
        b.push([t, q[i], de[i], qs[i], exact[i]]);
    }
    reports.push(CheckReport::from_values(
        "fig2b_first_law",
        tol.heat,
        r.times.iter().map(|&t| vec![t]).collect(),
        relative_gap(&q, &de),
    ));

    if r.config.output.wants(Format::Csv) {
        em.csv("fig2a.csv", &a, None)?;
        em.csv("fig2b.csv", &b, None)?;
    }
    if r.config.output.wants(Format::Json) {
        em.json("fig2_report.json", &reports)?;
    }
    em.write("fig2.py", FIG2_SCRIPT.as_bytes())?;
    em.record(&reports);
    let own = format!("fig2a_ft_{}", scheme_label(configured));
    Ok(reports.into_iter().filter(|x| x.check == own || x.check == "fig2b_first_law").collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Range, RunConfig};
    use std::path::Path;

    #[test]
    fn mgf_grid_is_cartesian() {
        let mut cfg = RunConfig::doublet();
        cfg.counting.lambda_s = Some(Range { start: -1.0, stop: 1.0, points: 3 });
        cfg.counting.grid_points = 4;
        let r = Resolved::new(cfg, Path::new(".")).unwrap();
        let g = mgf_grid(&r);
        assert_eq!(g.len(), 12);
        assert_eq!(g[0], vec![-1.0, -5.0]);
        assert_eq!(g[11], vec![1.0, 0.0]);
    }

    #[test]
    fn trapezoid_deviation() {
        let t = [0.0, 1.0, 2.0];
        assert_eq!(integrated_deviation(&t, &[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]), 2.0);
    }

    #[test]
    fn secular_suite_passes() {
        let mut cfg = RunConfig::doublet();
        cfg.scheme.name = SchemeName::Secular;
        cfg.times.points = 5;
        cfg.times.stop = 20.0;
        let r = Resolved::new(cfg, Path::new(".")).unwrap();
        let reports = check_suite(&r).unwrap();
        for rep in &reports {
            assert!(rep.passed(), "{} {}", rep.check, rep.residual);
        }
        assert!(reports.iter().any(|x| x.check == "gqdb"));
    }

    #[test]
    fn redfield_suite_fails_gqdb() {
        let mut cfg = RunConfig::doublet();
        cfg.scheme.name = SchemeName::Redfield;
        cfg.times.points = 3;
        let r = Resolved::new(cfg, Path::new(".")).unwrap();
        let reports = check_suite(&r).unwrap();
        let g = reports.iter().find(|x| x.check == "gqdb").unwrap();
        assert!(!g.passed());
    }
}
