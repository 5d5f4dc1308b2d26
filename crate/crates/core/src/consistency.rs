//! Residual checks for detailed balance, energy conservation, the Gibbs
//! fixed point and the first-law sinc condition.

use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{ComplexField, DMatrix, DVector};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::bath::{CorrelationTransforms, Sign};
use crate::error::{Error, Result};
use crate::generators::{reversed_generator, Generators, Scheme, TiltedGenerator};
use crate::operator::{cabs, devectorize, vectorize, Operator, C64};
use crate::quadrature::{integrate, QuadSettings};
use crate::system::gibbs_populations;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Verdict {
    Pass,
    Fail,
}

impl Verdict {
    pub fn passed(self) -> bool {
        self == Verdict::Pass
    }
}

/// Outcome of one check: the worst residual over its grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CheckReport {
    pub check: String,
    pub residual: f64,
    pub tolerance: f64,
    pub verdict: Verdict,
    pub grid: Vec<Vec<f64>>,
    /// Residual at each grid point.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub values: Vec<f64>,
}

impl CheckReport {
    /// NaN residuals count as infinite.
    pub fn from_values(check: &str, tolerance: f64, grid: Vec<Vec<f64>>, values: Vec<f64>) -> Self {
        let values: Vec<f64> = values.into_iter().map(|v| if v.is_nan() { f64::INFINITY } else { v.abs() }).collect();
        let residual = values.iter().copied().fold(0.0, f64::max);
        let verdict = if residual < tolerance { Verdict::Pass } else { Verdict::Fail };
        Self { check: check.to_string(), residual, tolerance, verdict, grid, values }
    }

    pub fn passed(&self) -> bool {
        self.verdict.passed()
    }
}

/// Default verdict thresholds.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct Tolerances {
    pub gqdb: f64,
    pub strict_energy: f64,
    pub first_law: f64,
    pub gibbs: f64,
    pub steady_state: f64,
    pub heat: f64,
    pub ft: f64,
    pub entropy_ft: f64,
    /// Bound on the sinc integral relative to its single-peak scale.
    pub sinc: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            gqdb: 1e-8,
            strict_energy: 1e-10,
            first_law: 1e-8,
            gibbs: 1e-10,
            steady_state: 1e-8,
            heat: 1e-6,
            ft: 1e-6,
            entropy_ft: 1e-6,
            sinc: 1e-3,
        }
    }
}

/// `points` equally spaced values on `[lo, hi]`.
pub fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    match points {
        0 => Vec::new(),
        1 => vec![lo],
        n => (0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect(),
    }
}

/// Bath counting vectors `s·β` for `s ∈ [−1, 1]`: each bath alone, plus the
/// common diagonal when there are several baths.
pub fn default_lambda_grid(betas: &[f64], points: usize) -> Vec<Vec<f64>> {
    let s = linspace(-1.0, 1.0, points);
    let nb = betas.len();
    let mut grid = Vec::new();
    for a in 0..nb {
        for &x in &s {
            let mut v = vec![0.0; nb];
            v[a] = x * betas[a];
            grid.push(v);
        }
    }
    if nb > 1 {
        for &x in &s {
            grid.push(betas.iter().map(|b| x * b).collect());
        }
    }
    grid
}

/// `max_λ ‖L^R_{0,λ} − L†_{0,−λ−β}‖ / ‖L_{0,0}‖`.
pub fn check_gqdb(gens: &Generators, scheme: &Scheme, grid: &[Vec<f64>], tolerance: f64) -> Result<CheckReport> {
    if !gens.system().is_time_reversal_even() {
        return Err(Error::TimeReversalOdd);
    }
    let betas = gens.betas();
    let norm = gens.untilted(scheme)?.matrix().frobenius_norm();
    let mut values = Vec::with_capacity(grid.len());
    for lam in grid {
        let forward = reversed_generator(&gens.build(scheme, 0.0, lam)?);
        let mapped: Vec<f64> = lam.iter().zip(&betas).map(|(l, b)| -l - b).collect();
        let backward = gens.build(scheme, 0.0, &mapped)?.matrix().adjoint();
        values.push((forward.matrix() - &backward).frobenius_norm() / norm);
    }
    Ok(CheckReport::from_values("gqdb", tolerance, grid.to_vec(), values))
}

/// `‖L_{λ+χ1} − L_λ‖ / ‖L_0‖` for each `χ`, at base fields `(λ_S, λ_B)`.
/// Grid entries are `[χ]`.
pub fn check_strict_energy(
    gens: &Generators,
    scheme: &Scheme,
    lambda_s: f64,
    lambda_b: &[f64],
    chis: &[f64],
    tolerance: f64,
) -> Result<CheckReport> {
    let norm = gens.untilted(scheme)?.matrix().frobenius_norm();
    let base = gens.build(scheme, lambda_s, lambda_b)?;
    let mut values = Vec::with_capacity(chis.len());
    for &chi in chis {
        if chi == 0.0 {
            values.push(0.0);
            continue;
        }
        let shifted: Vec<f64> = lambda_b.iter().map(|l| l + chi).collect();
        let g = gens.build(scheme, lambda_s + chi, &shifted)?;
        values.push((g.matrix() - base.matrix()).frobenius_norm() / norm);
    }
    let grid = chis.iter().map(|&c| vec![c]).collect();
    Ok(CheckReport::from_values("strict_energy", tolerance, grid, values))
}

/// Finite-difference step used for derivatives in the common counting field.
pub fn derivative_step(energies: &[f64]) -> Result<f64> {
    let scale = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let h = 1e-5 / scale;
    if !h.is_finite() || h <= f64::MIN_POSITIVE {
        return Err(Error::StepUnderflow(h));
    }
    Ok(h)
}

/// One Richardson level on the central difference of `f` at zero.
pub(crate) fn richardson<F: FnMut(f64) -> Result<f64>>(mut f: F, h: f64) -> Result<f64> {
    let d1 = (f(h)? - f(-h)?) / (2.0 * h);
    let d2 = (f(0.5 * h)? - f(-0.5 * h)?) / h;
    Ok((4.0 * d2 - d1) / 3.0)
}

/// `max_ρ |∂_χ Tr L_{χ1}[ρ]|_{χ=0}| / (‖H_S‖ ‖L_0 ρ‖)`.
pub fn check_average_first_law(
    gens: &Generators,
    scheme: &Scheme,
    samples: &[Operator],
    tolerance: f64,
) -> Result<CheckReport> {
    let energies = gens.system().energies();
    let h = derivative_step(energies)?;
    let scale = energies.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let nb = gens.bath_count();
    let mut shifted = Vec::new();
    for s in [h, -h, 0.5 * h, -0.5 * h] {
        shifted.push((s, gens.build(scheme, s, &vec![s; nb])?));
    }
    let l0 = gens.untilted(scheme)?;
    let mut values = Vec::with_capacity(samples.len());
    for rho in samples {
        let trace_at = |chi: f64| -> Result<f64> {
            let g = &shifted.iter().find(|(s, _)| *s == chi).expect("prebuilt step").1;
            Ok(g.apply(rho).trace().re)
        };
        let slope = richardson(trace_at, h)?;
        let denom = scale * l0.apply(rho).frobenius_norm();
        values.push(if slope == 0.0 { 0.0 } else { slope / denom });
    }
    let grid = (0..samples.len()).map(|i| vec![i as f64]).collect();
    Ok(CheckReport::from_values("average_first_law", tolerance, grid, values))
}

/// Random full-rank densities `GG†/Tr(GG†)` with complex Gaussian `G`.
pub fn random_density_matrices(dim: usize, count: usize, seed: u64) -> Vec<Operator> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|_| {
            let g = DMatrix::from_fn(dim, dim, |_, _| {
                let re: f64 = StandardNormal.sample(&mut rng);
                let im: f64 = StandardNormal.sample(&mut rng);
                C64::new(re, im)
            });
            let p = &g * g.adjoint();
            let tr = p.trace();
            Operator::wrap(p.map(|z| z / tr)).hermitian_part()
        })
        .collect()
}

/// `‖L[ρ_G]‖ / ‖L‖` with `ρ_G` the Gibbs state of the generator's energies.
pub fn check_gibbs_fixed_point(g: &TiltedGenerator, beta: f64, tolerance: f64) -> Result<CheckReport> {
    let p = gibbs_populations(g.energies(), beta)?;
    let rho = Operator::from_diagonal(&p);
    let value = g.apply(&rho).frobenius_norm() / g.matrix().frobenius_norm();
    Ok(CheckReport::from_values("gibbs_fixed_point", tolerance, vec![vec![beta]], vec![value]))
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub rho: Operator,
    /// `‖L[ρ_ss]‖`.
    pub residual: f64,
}

/// Unit-trace Hermitian kernel vector of the generator.
pub fn steady_state(g: &TiltedGenerator) -> Result<SteadyState> {
    let m = g.matrix().matrix().clone();
    let svd = m.svd(false, true);
    let vt = svd.v_t.ok_or(Error::Eigen)?;
    let sv = &svd.singular_values;
    let smax = sv.iter().copied().fold(0.0, f64::max);
    let kernel = sv.iter().filter(|&&s| s <= 1e-9 * smax).count();
    if kernel > 1 {
        return Err(Error::DegenerateKernel { dimension: kernel });
    }
    let (imin, _) = sv.iter().enumerate().fold((0, f64::INFINITY), |acc, (i, &s)| if s < acc.1 { (i, s) } else { acc });
    let v: DVector<C64> = vt.row(imin).adjoint();
    let rho = devectorize(&v)?;
    let tr = rho.trace();
    if !(cabs(tr) > 0.0) {
        return Err(Error::NonFinite("steady-state trace"));
    }
    let rho = rho.scale(C64::new(1.0, 0.0) / tr).hermitian_part();
    let residual = (g.matrix().matrix() * vectorize(&rho)).norm();
    Ok(SteadyState { rho, residual })
}

/// Sinc-condition integral and its single-peak reference scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SincValue {
    pub value: f64,
    pub peak_scale: f64,
}

impl SincValue {
    pub fn normalized(&self) -> f64 {
        if self.value == 0.0 {
            0.0
        } else {
            self.value / self.peak_scale
        }
    }
}

fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 - x * x / 6.0
    } else {
        ComplexField::sin(x) / x
    }
}

/// `∫ R(ω)(ω − ω̄) sinc((ω−ω₁)δ₀/2) sinc((ω−ω₂)δ₀/2) dω` over `[a, b]`, with
/// `ω̄` the midpoint, together with `∫ R(ω)|ω−ω₁| sinc²((ω−ω₁)δ₀/2) dω`.
///
/// Panels of width `π/δ₀` are laid out symmetrically about `ω̄`.
pub fn sinc_integral<F: Fn(f64) -> f64>(
    rate: F,
    omega1: f64,
    omega2: f64,
    delta0: f64,
    interval: (f64, f64),
    settings: &QuadSettings,
) -> Result<SincValue> {
    if !(delta0 > 0.0) || !delta0.is_finite() {
        return Err(Error::InvalidScheme("delta0 must be positive".to_string()));
    }
    let (a, b) = interval;
    let mid = 0.5 * (omega1 + omega2);
    let width = core::f64::consts::PI / delta0;
    let mut cuts = vec![a, b];
    let mut k = 0usize;
    loop {
        let lo = mid - k as f64 * width;
        let hi = mid + k as f64 * width;
        if lo <= a && hi >= b {
            break;
        }
        if lo > a && lo < b {
            cuts.push(lo);
        }
        if k > 0 && hi > a && hi < b {
            cuts.push(hi);
        }
        k += 1;
    }
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let f = |w: f64| rate(w) * (w - mid) * sinc((w - omega1) * delta0 / 2.0) * sinc((w - omega2) * delta0 / 2.0);
    let p = |w: f64| {
        let s = sinc((w - omega1) * delta0 / 2.0);
        rate(w) * (w - omega1).abs() * s * s
    };
    let local = QuadSettings { abs_tol: 0.0, ..*settings };
    let mut peak = 0.0;
    let (mut left, mut right) = (0.0, 0.0);
    for w in cuts.windows(2) {
        let v = integrate(f, w[0], w[1], &local).or_else(|_| integrate(f, w[0], w[1], settings))?.value;
        // sum the two sides separately so mirrored panels cancel cleanly
        if w[1] <= mid {
            left += v;
        } else {
            right += v;
        }
        peak += integrate(p, w[0], w[1], &local).or_else(|_| integrate(p, w[0], w[1], settings))?.value;
    }
    Ok(SincValue { value: left + right, peak_scale: peak })
}

/// Sinc condition for the bath rate `R_±(ω)` at zero counting over the
/// bath support.
pub fn sinc_condition(
    omega1: f64,
    omega2: f64,
    delta0: f64,
    transforms: &CorrelationTransforms,
    sign: Sign,
) -> Result<SincValue> {
    let support = transforms.bath().density.support();
    sinc_integral(|w| transforms.rate_real(sign, w, 0.0), omega1, omega2, delta0, support, &QuadSettings::default())
}
