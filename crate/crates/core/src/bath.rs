//! Thermal baths: spectral densities, occupations and the tilted transforms
//! `Γ±(ω, λ) = R±(ω, λ) + i I±(ω, λ)`.
//!
//! `R+(ω, λ) = π γ² J(ω) (n(ω) + 1) e^{λω}` and `R−(ω, λ) = π γ² J(ω) n(ω) e^{−λω}`.
//! The imaginary parts are principal values over the support of `J`:
//! `I+ = PV ∫ γ² J (n + 1) e^{λω'} / (ω − ω')` and
//! `I− = −PV ∫ γ² J n e^{−λω'} / (ω − ω')`, which makes
//! `Γ±(ω, −λ−β) = conj Γ∓(ω, λ)` hold exactly.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::f64::consts::PI;

use nalgebra::ComplexField;

use crate::error::{Error, Result};
use crate::operator::C64;
use crate::quadrature::{principal_value, QuadSettings};

/// Spectral density `J(ω)`, zero outside its support.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields))]
pub enum SpectralDensity {
    /// `η ω e^{−ω/ω_c}` on `[0, Ω]`.
    OhmicExpCutoff { eta: f64, omega_c: f64, cutoff: f64 },
    /// `η (1 − e^{−ω/w}) (1 − e^{−(Ω−ω)/w})` on `[0, Ω]`.
    FlatSmoothCutoff { eta: f64, width: f64, cutoff: f64 },
    /// `η ω w² / ((ω − c)² + w²)` on `[0, Ω]`.
    LorentzianPeak { eta: f64, center: f64, width: f64, cutoff: f64 },
    /// Linear interpolation through `(omegas[i], values[i])`.
    Tabulated { omegas: Vec<f64>, values: Vec<f64> },
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidBath(format!("{name} must be positive and finite, got {v}")))
    }
}

impl SpectralDensity {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::OhmicExpCutoff { eta, omega_c, cutoff } => {
                positive("eta", *eta)?;
                positive("omega_c", *omega_c)?;
                positive("cutoff", *cutoff)
            }
            Self::FlatSmoothCutoff { eta, width, cutoff } => {
                positive("eta", *eta)?;
                positive("width", *width)?;
                positive("cutoff", *cutoff)
            }
            Self::LorentzianPeak { eta, center, width, cutoff } => {
                positive("eta", *eta)?;
                positive("width", *width)?;
                positive("cutoff", *cutoff)?;
                if center.is_finite() {
                    Ok(())
                } else {
                    Err(Error::InvalidBath("center must be finite".into()))
                }
            }
            Self::Tabulated { omegas, values } => {
                if omegas.len() < 2 || omegas.len() != values.len() {
                    return Err(Error::InvalidBath("table needs at least 2 rows of (omega, J)".into()));
                }
                if omegas.iter().chain(values.iter()).any(|v| !v.is_finite()) {
                    return Err(Error::InvalidBath("table has non-finite entries".into()));
                }
                if omegas[0] < 0.0 {
                    return Err(Error::InvalidBath("table must start at omega >= 0".into()));
                }
                if omegas.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(Error::InvalidBath("table omegas must be strictly increasing".into()));
                }
                if values.iter().any(|&v| v < 0.0) {
                    return Err(Error::InvalidBath("table has negative J".into()));
                }
                if omegas[0] == 0.0 && values[0] != 0.0 {
                    return Err(Error::InvalidBath("J(0) must vanish".into()));
                }
                Ok(())
            }
        }
    }

    /// `(lower, upper)` ends of the support.
    pub fn support(&self) -> (f64, f64) {
        match self {
            Self::OhmicExpCutoff { cutoff, .. }
            | Self::FlatSmoothCutoff { cutoff, .. }
            | Self::LorentzianPeak { cutoff, .. } => (0.0, *cutoff),
            Self::Tabulated { omegas, .. } => (omegas[0], omegas[omegas.len() - 1]),
        }
    }

    /// Interior points where the density is not smooth.
    pub fn breakpoints(&self) -> &[f64] {
        match self {
            Self::Tabulated { omegas, .. } if omegas.len() > 2 => &omegas[1..omegas.len() - 1],
            _ => &[],
        }
    }

    pub fn eval(&self, w: f64) -> f64 {
        let (lo, hi) = self.support();
        if !(w >= lo && w <= hi) {
            return 0.0;
        }
        match self {
            Self::OhmicExpCutoff { eta, omega_c, .. } => eta * w * ComplexField::exp(-w / omega_c),
            Self::FlatSmoothCutoff { eta, width, cutoff } => {
                eta * -ComplexField::exp_m1(-w / width) * -ComplexField::exp_m1(-(cutoff - w) / width)
            }
            Self::LorentzianPeak { eta, center, width, .. } => {
                let x = w - center;
                eta * w * width * width / (x * x + width * width)
            }
            Self::Tabulated { omegas, values } => {
                let k = omegas.partition_point(|&x| x <= w);
                if k == 0 {
                    return values[0];
                }
                if k == omegas.len() {
                    return values[k - 1];
                }
                let (x0, x1) = (omegas[k - 1], omegas[k]);
                let t = (w - x0) / (x1 - x0);
                values[k - 1] + t * (values[k] - values[k - 1])
            }
        }
    }
}

/// One thermal bath.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BathSpec {
    pub beta: f64,
    pub density: SpectralDensity,
    pub gamma: f64,
}

impl BathSpec {
    pub fn new(beta: f64, density: SpectralDensity, gamma: f64) -> Result<Self> {
        let b = Self { beta, density, gamma };
        b.validate()?;
        Ok(b)
    }

    pub fn validate(&self) -> Result<()> {
        positive("beta", self.beta)?;
        if !(self.gamma >= 0.0) || !self.gamma.is_finite() {
            return Err(Error::InvalidBath(format!("gamma must be >= 0, got {}", self.gamma)));
        }
        self.density.validate()
    }
}

/// Emission (`+`) or absorption (`−`) branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn flip(self) -> Self {
        match self {
            Self::Plus => Self::Minus,
            Self::Minus => Self::Plus,
        }
    }
}

/// `1 / (e^{βω} − 1)`.
pub fn bose_einstein(beta: f64, omega: f64) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::NonPositiveFrequency(omega));
    }
    Ok(1.0 / ComplexField::exp_m1(beta * omega))
}

/// `Γ±(ω, λ)` of one bath with memoized principal values.
///
/// The cache uses interior mutability, so a value is confined to one thread.
#[derive(Debug, Clone)]
pub struct CorrelationTransforms {
    bath: BathSpec,
    settings: QuadSettings,
    cache: RefCell<BTreeMap<(Sign, u64, u64), f64>>,
}

impl CorrelationTransforms {
    pub fn new(bath: BathSpec) -> Result<Self> {
        Self::with_settings(bath, QuadSettings::default())
    }

    pub fn with_settings(bath: BathSpec, settings: QuadSettings) -> Result<Self> {
        bath.validate()?;
        Ok(Self { bath, settings, cache: RefCell::new(BTreeMap::new()) })
    }

    pub fn bath(&self) -> &BathSpec {
        &self.bath
    }

    pub fn beta(&self) -> f64 {
        self.bath.beta
    }

    /// `γ² J(x) (n(x) + ½ ± ½) e^{±λx}`, the integrand weight of `Γ±`.
    pub fn weight(&self, sign: Sign, x: f64, lam: f64) -> f64 {
        if !(x > 0.0) {
            return 0.0;
        }
        let j = self.bath.density.eval(x);
        if j == 0.0 {
            return 0.0;
        }
        let g2 = self.bath.gamma * self.bath.gamma;
        // n + 1 = 1/(1 − e^{−βx}), n = e^{−βx}/(1 − e^{−βx})
        let base = g2 * j / -ComplexField::exp_m1(-self.bath.beta * x);
        match sign {
            Sign::Plus => base * ComplexField::exp(lam * x),
            Sign::Minus => base * ComplexField::exp(-(self.bath.beta + lam) * x),
        }
    }

    /// `R±(ω, λ)`; zero outside `(0, Ω)`.
    pub fn rate_real(&self, sign: Sign, omega: f64, lam: f64) -> f64 {
        PI * self.weight(sign, omega, lam)
    }

    /// `I±(ω, λ)`.
    pub fn lamb_imag(&self, sign: Sign, omega: f64, lam: f64) -> Result<f64> {
        let key = (sign, omega.to_bits(), lam.to_bits());
        if let Some(&v) = self.cache.borrow().get(&key) {
            return Ok(v);
        }
        let (lo, hi) = self.bath.density.support();
        let lo = lo.max(0.0);
        let v = if self.bath.gamma == 0.0 || hi <= lo {
            0.0
        } else {
            let pv = self.principal_part(sign, lam, lo, hi, omega)?;
            match sign {
                Sign::Plus => pv,
                Sign::Minus => -pv,
            }
        };
        self.cache.borrow_mut().insert(key, v);
        Ok(v)
    }

    /// PV integral of the weight against `1/(ω − x)`, split at the density's
    /// breakpoints; a pole on a breakpoint stays inside one piece.
    fn principal_part(&self, sign: Sign, lam: f64, lo: f64, hi: f64, omega: f64) -> Result<f64> {
        let mut cuts = alloc::vec![lo];
        cuts.extend(self.bath.density.breakpoints().iter().copied().filter(|&x| x > lo && x < hi && x != omega));
        cuts.push(hi);
        let h = |x: f64| self.weight(sign, x, lam);
        let mut total = 0.0;
        for w in cuts.windows(2) {
            total += principal_value(h, w[0], w[1], omega, &self.settings)?.value;
        }
        Ok(total)
    }

    /// `Γ±(ω, λ)`; the imaginary part is dropped when `lamb_shift` is false.
    pub fn gamma(&self, sign: Sign, omega: f64, lam: f64, lamb_shift: bool) -> Result<C64> {
        let re = self.rate_real(sign, omega, lam);
        let im = if lamb_shift { self.lamb_imag(sign, omega, lam)? } else { 0.0 };
        Ok(C64::new(re, im))
    }
}
