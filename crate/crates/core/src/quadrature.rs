//! Adaptive Gauss–Kronrod (7, 15) integration and principal values.

#![allow(clippy::excessive_precision)]

use alloc::collections::BinaryHeap;
use core::cmp::Ordering;

use nalgebra::ComplexField;

use crate::error::{Error, Result};

/// Tolerances for [`integrate`].
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        Self { abs_tol: 1e-15, rel_tol: 1e-11, max_intervals: 4000 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
}

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.000000000000000000000000000000000,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// One G7K15 panel: estimate and `∫|f|`.
fn kronrod<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> (Integral, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut resg = fc * WG[3];
    let mut resk = fc * WGK[7];
    let mut resabs = resk.abs();
    let mut fv1 = [0.0; 7];
    let mut fv2 = [0.0; 7];
    for j in 0..7 {
        let x = half * XGK[j];
        let f1 = f(center - x);
        let f2 = f(center + x);
        fv1[j] = f1;
        fv2[j] = f2;
        resk += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            resg += WG[j / 2] * (f1 + f2);
        }
    }
    let mean = resk * 0.5;
    let mut resasc = WGK[7] * (fc - mean).abs();
    for j in 0..7 {
        resasc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = resk * half;
    let resabs = resabs * half.abs();
    let resasc = resasc * half.abs();
    let mut error = ((resk - resg) * half).abs();
    let magnitude = resabs;
    if resasc != 0.0 && error != 0.0 {
        error = resasc * ComplexField::powf(200.0 * error / resasc, 1.5).min(1.0);
    }
    if resabs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        error = error.max(50.0 * f64::EPSILON * resabs);
    }
    (Integral { value, error }, magnitude)
}

struct Piece {
    a: f64,
    b: f64,
    r: Integral,
    magnitude: f64,
}

impl PartialEq for Piece {
    fn eq(&self, other: &Self) -> bool {
        self.r.error == other.r.error
    }
}

impl Eq for Piece {}

impl PartialOrd for Piece {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Piece {
    fn cmp(&self, other: &Self) -> Ordering {
        self.r.error.total_cmp(&other.r.error)
    }
}

/// Globally adaptive integral of `f` over `[a, b]`.
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, settings: &QuadSettings) -> Result<Integral> {
    if a == b {
        return Ok(Integral { value: 0.0, error: 0.0 });
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(Error::NonFinite("integration bounds"));
    }
    let (first, mag) = kronrod(&mut f, a, b);
    let mut heap = BinaryHeap::new();
    let mut value = first.value;
    let mut error = first.error;
    let mut magnitude = mag;
    heap.push(Piece { a, b, r: first, magnitude: mag });
    // below ~100 ulp of ∫|f| the estimate only measures rounding
    let target = |v: f64, m: f64| settings.abs_tol.max(settings.rel_tol * v.abs()).max(100.0 * f64::EPSILON * m);
    while error > target(value, magnitude) {
        if heap.len() >= settings.max_intervals {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a.min(worst.b) && mid < worst.a.max(worst.b)) {
            heap.push(worst);
            break;
        }
        let (left, ml) = kronrod(&mut f, worst.a, mid);
        let (right, mr) = kronrod(&mut f, mid, worst.b);
        value += left.value + right.value - worst.r.value;
        error += left.error + right.error - worst.r.error;
        magnitude += ml + mr - worst.magnitude;
        heap.push(Piece { a: worst.a, b: mid, r: left, magnitude: ml });
        heap.push(Piece { a: mid, b: worst.b, r: right, magnitude: mr });
    }
    // re-sum to shed the drift of incremental updates
    value = heap.iter().map(|p| p.r.value).sum();
    error = heap.iter().map(|p| p.r.error).sum();
    magnitude = heap.iter().map(|p| p.magnitude).sum();
    if !value.is_finite() {
        return Err(Error::NonFinite("integrand"));
    }
    let requested = target(value, magnitude);
    if error > requested {
        return Err(Error::Quadrature { achieved: error, requested });
    }
    Ok(Integral { value, error })
}

/// `PV ∫_a^b h(x) / (pole − x) dx` by subtracting `h(pole)` at the pole.
pub fn principal_value<F: Fn(f64) -> f64>(
    h: F,
    a: f64,
    b: f64,
    pole: f64,
    settings: &QuadSettings,
) -> Result<Integral> {
    if !(pole > a && pole < b) {
        return integrate(|x| h(x) / (pole - x), a, b, settings);
    }
    let hp = h(pole);
    let g = |x: f64| if x == pole { 0.0 } else { (h(x) - hp) / (pole - x) };
    let left = integrate(g, a, pole, settings)?;
    let right = integrate(g, pole, b, settings)?;
    let log_term = hp * ComplexField::ln((pole - a) / (b - pole));
    Ok(Integral { value: left.value + right.value + log_term, error: left.error + right.error })
}
