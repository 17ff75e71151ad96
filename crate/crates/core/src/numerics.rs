//! Special functions, adaptive quadrature and bracketed root finding.
//!
//! Everything here is pure and reentrant. The quadrature is a global
//! adaptive Gauss-Kronrod (10/21) scheme: the interval with the largest
//! error estimate is bisected until the summed estimate meets the requested
//! tolerance.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::{E, LN_2};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NumericsError {
    #[error("argument {value} outside the domain of {function}: {reason}")]
    Domain {
        function: &'static str,
        value: f64,
        reason: &'static str,
    },
    #[error("quadrature did not converge after {subdivisions} subdivisions (estimate {estimate:e}, error {error:e})")]
    NoConvergence {
        subdivisions: usize,
        estimate: f64,
        error: f64,
    },
    #[error("root is not bracketed: f({lo}) = {f_lo:e}, f({hi}) = {f_hi:e}")]
    Bracket { lo: f64, hi: f64, f_lo: f64, f_hi: f64 },
    #[error("non-finite value encountered in {0}")]
    NonFinite(&'static str),
}

pub type Result<T> = std::result::Result<T, NumericsError>;

/// Tolerances for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub relative_tolerance: f64,
    pub absolute_tolerance: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            relative_tolerance: 1e-9,
            absolute_tolerance: 1e-12,
            max_subdivisions: 500,
        }
    }
}

impl QuadratureSpec {
    pub fn new(relative_tolerance: f64, absolute_tolerance: f64, max_subdivisions: usize) -> Result<Self> {
        if !(relative_tolerance > 0.0) {
            return Err(NumericsError::Domain {
                function: "QuadratureSpec",
                value: relative_tolerance,
                reason: "relative tolerance must be positive",
            });
        }
        if !(absolute_tolerance > 0.0) {
            return Err(NumericsError::Domain {
                function: "QuadratureSpec",
                value: absolute_tolerance,
                reason: "absolute tolerance must be positive",
            });
        }
        if max_subdivisions == 0 {
            return Err(NumericsError::Domain {
                function: "QuadratureSpec",
                value: 0.0,
                reason: "at least one subdivision is required",
            });
        }
        Ok(Self {
            relative_tolerance,
            absolute_tolerance,
            max_subdivisions,
        })
    }

    pub fn with_relative(mut self, relative_tolerance: f64) -> Self {
        self.relative_tolerance = relative_tolerance;
        self
    }
}

// ---------------------------------------------------------------------------
// Lambert W
// ---------------------------------------------------------------------------

const INV_E: f64 = 1.0 / E;

/// Principal branch W0 of the Lambert function, `w * exp(w) = y`, `w >= -1`.
pub fn lambert_w0(y: f64) -> Result<f64> {
    if y.is_nan() {
        return Err(NumericsError::NonFinite("lambert_w0"));
    }
    if y < -INV_E {
        // Allow the rounding of -1/e itself.
        if y >= -INV_E * (1.0 + 4.0 * f64::EPSILON) {
            return Ok(-1.0);
        }
        return Err(NumericsError::Domain {
            function: "lambert_w0",
            value: y,
            reason: "requires y >= -1/e",
        });
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    if y.is_infinite() {
        return Ok(f64::INFINITY);
    }

    // Near the branch point the shifted form keeps full precision.
    if y < -0.25 {
        let q = E * y + 1.0; // 1 + e*y >= 0
        return Ok(one_plus_w0_shifted(q) - 1.0);
    }

    let mut w = if y < 3.0 {
        // Pade-like start, accurate near the origin.
        y / (1.0 + y)
    } else {
        let l1 = y.ln();
        let l2 = l1.ln();
        l1 - l2 + l2 / l1
    };

    for _ in 0..64 {
        let ew = w.exp();
        let f = w * ew - y;
        let wp1 = w + 1.0;
        let denom = ew * wp1 - (w + 2.0) * f / (2.0 * wp1);
        let step = f / denom;
        w -= step;
        if step.abs() <= 4.0 * f64::EPSILON * (1.0 + w.abs()) {
            break;
        }
    }
    Ok(w)
}

/// `h(v) = (v - 1) e^v + 1`, computed without cancellation for small `v`.
///
/// `h` is the inverse of [`one_plus_w0_shifted`]: if `v = 1 + W0((q-1)/e)`
/// then `h(v) = q`.
pub(crate) fn shifted_lambert_forward(v: f64) -> f64 {
    if v.abs() < 0.125 {
        // sum_{n>=2} v^n (n-1)/n!
        let mut term = 1.0; // v^n / n! running
        let mut sum = 0.0;
        for n in 1..=24u32 {
            term *= v / n as f64;
            if n >= 2 {
                sum += term * (n - 1) as f64;
            }
        }
        sum
    } else {
        (v - 1.0) * v.exp() + 1.0
    }
}

/// Returns `v = 1 + W0((q - 1)/e)` for `q >= 0` without losing precision as
/// `q -> 0` (the branch point of W0).
pub(crate) fn one_plus_w0_shifted(q: f64) -> f64 {
    if q <= 0.0 {
        return 0.0;
    }
    if q > 4.0 {
        // Far from the branch point the direct route is accurate.
        let w = lambert_w0((q - 1.0) * INV_E).expect("argument above -1/e");
        return 1.0 + w;
    }
    // Start from the branch-point expansion v ~ sqrt(2q) (1 - sqrt(2q)/3 ...)
    let p = (2.0 * q).sqrt();
    let mut v = p - p * p / 3.0 + 11.0 / 72.0 * p * p * p;
    if !(v > 0.0) || v > 2.5 {
        v = p.min(2.0);
    }
    for _ in 0..64 {
        let ev = v.exp();
        let f = shifted_lambert_forward(v) - q;
        let d1 = v * ev; // h'(v)
        let d2 = (v + 1.0) * ev; // h''(v)
        let step = if d1 > 0.0 { f / (d1 - 0.5 * f * d2 / d1) } else { p };
        let next = v - step;
        let next = if next <= 0.0 { 0.5 * v } else { next };
        let done = (next - v).abs() <= 4.0 * f64::EPSILON * next;
        v = next;
        if done {
            break;
        }
    }
    v
}

// ---------------------------------------------------------------------------
// Quadrature
// ---------------------------------------------------------------------------

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_549_371,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// Gauss weights for XGK[1], XGK[3], ..., XGK[9].
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// One Gauss-Kronrod 10/21 panel. Returns (kronrod estimate, error estimate).
fn gk21<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[10];
    let mut gauss = 0.0;
    for j in 0..10 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    let kronrod = kronrod * half;
    let gauss = gauss * half;
    (kronrod, (kronrod - gauss).abs())
}

struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

/// Adaptive integral of `f` over the finite interval `[a, b]`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, spec: &QuadratureSpec) -> Result<f64> {
    if a == b {
        return Ok(0.0);
    }
    if !a.is_finite() || !b.is_finite() {
        return Err(NumericsError::Domain {
            function: "integrate",
            value: if a.is_finite() { b } else { a },
            reason: "finite limits required; use integrate_semi_infinite",
        });
    }
    let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };

    let (v0, e0) = gk21(&f, lo, hi);
    if !v0.is_finite() {
        return Err(NumericsError::NonFinite("integrate"));
    }
    let mut heap = BinaryHeap::new();
    heap.push(Panel {
        a: lo,
        b: hi,
        value: v0,
        error: e0,
    });
    let mut total = v0;
    let mut total_err = e0;
    let mut subdivisions = 1;

    loop {
        let tol = spec.absolute_tolerance.max(spec.relative_tolerance * total.abs());
        if total_err <= tol {
            return Ok(sign * total);
        }
        if subdivisions >= spec.max_subdivisions {
            return Err(NumericsError::NoConvergence {
                subdivisions,
                estimate: sign * total,
                error: total_err,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel at floating-point resolution; accept what we have.
            return Ok(sign * total);
        }
        let (vl, el) = gk21(&f, worst.a, mid);
        let (vr, er) = gk21(&f, mid, worst.b);
        if !(vl.is_finite() && vr.is_finite()) {
            return Err(NumericsError::NonFinite("integrate"));
        }
        total += vl + vr - worst.value;
        total_err += el + er - worst.error;
        heap.push(Panel {
            a: worst.a,
            b: mid,
            value: vl,
            error: el,
        });
        heap.push(Panel {
            a: mid,
            b: worst.b,
            value: vr,
            error: er,
        });
        subdivisions += 1;
        // Running sums drift; resynchronise occasionally.
        if subdivisions % 64 == 0 {
            total = heap.iter().map(|p| p.value).sum();
            total_err = heap.iter().map(|p| p.error).sum();
        }
    }
}

/// Adaptive integral of `f` over `[lower, +inf)`.
///
/// The half line is mapped onto `[0, 1)` with `x = lower + t / (1 - t)`.
pub fn integrate_semi_infinite<F: Fn(f64) -> f64>(f: F, lower: f64, spec: &QuadratureSpec) -> Result<f64> {
    integrate_semi_infinite_scaled(f, lower, 1.0, spec)
}

/// Like [`integrate_semi_infinite`] but with the map `x = lower + scale * t / (1 - t)`,
/// for integrands whose natural length scale is far from one.
pub fn integrate_semi_infinite_scaled<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    scale: f64,
    spec: &QuadratureSpec,
) -> Result<f64> {
    if !(scale > 0.0) || !lower.is_finite() {
        return Err(NumericsError::Domain {
            function: "integrate_semi_infinite",
            value: scale,
            reason: "finite lower limit and positive scale required",
        });
    }
    let mapped = |t: f64| {
        let one_minus = 1.0 - t;
        if one_minus <= 0.0 {
            return 0.0;
        }
        let x = lower + scale * t / one_minus;
        let v = f(x) * scale / (one_minus * one_minus);
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate(mapped, 0.0, 1.0, spec)
}

// ---------------------------------------------------------------------------
// I_a(x) = int_1^inf x / (x + z^{a/2}) dz
// ---------------------------------------------------------------------------

/// Interference integral `I_a(x) = \int_1^\infty x / (x + z^{a/2}) dz`.
///
/// With `z = t^{-2/(a-2)}` the integrand becomes smooth on `[0, 1]`:
/// `I_a(x) = 2x/(a-2) \int_0^1 dt / (1 + x t^{a/(a-2)})`.
pub fn integral_ia(a: f64, x: f64) -> Result<f64> {
    integral_ia_with(a, x, &QuadratureSpec::default())
}

pub fn integral_ia_with(a: f64, x: f64, spec: &QuadratureSpec) -> Result<f64> {
    if !(a > 2.0) {
        return Err(NumericsError::Domain {
            function: "integral_ia",
            value: a,
            reason: "path-loss exponent must exceed 2",
        });
    }
    if !(x >= 0.0) {
        return Err(NumericsError::Domain {
            function: "integral_ia",
            value: x,
            reason: "argument must be non-negative",
        });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    let power = a / (a - 2.0);
    let prefactor = 2.0 * x / (a - 2.0);
    // The integrand falls from 1 to 1/(1+x) around t ~ x^{-1/power}; split
    // there so large arguments do not starve the first panel.
    let knee = x.powf(-1.0 / power);
    let g = |t: f64| 1.0 / (1.0 + x * t.powf(power));
    let integral = if knee < 1.0 {
        integrate(g, 0.0, knee, spec)? + integrate(g, knee, 1.0, spec)?
    } else {
        integrate(g, 0.0, 1.0, spec)?
    };
    Ok(prefactor * integral)
}

// ---------------------------------------------------------------------------
// Root finding
// ---------------------------------------------------------------------------

/// Bisection for a monotone `f` with `f(lo) * f(hi) <= 0`.
///
/// Stops when `|f(x)| <= f_tol` is hit exactly at zero or when the bracket
/// width falls below `tol * max(1, |x|)`.
pub fn find_root_monotonic<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut a, mut b) = if lo <= hi { (lo, hi) } else { (hi, lo) };
    let mut fa = f(a);
    let fb = f(b);
    if fa.is_nan() || fb.is_nan() {
        return Err(NumericsError::NonFinite("find_root_monotonic"));
    }
    if fa == 0.0 {
        return Ok(a);
    }
    if fb == 0.0 {
        return Ok(b);
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::Bracket {
            lo: a,
            hi: b,
            f_lo: fa,
            f_hi: fb,
        });
    }
    for _ in 0..2000 {
        let mid = 0.5 * (a + b);
        if b - a <= tol * mid.abs().max(1.0) || mid <= a || mid >= b {
            return Ok(mid);
        }
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok(0.5 * (a + b))
}

/// Bisection in `ln x` for a monotone function of a positive argument whose
/// root may sit anywhere across many decades. `rel_width` bounds `hi/lo - 1`.
pub fn find_root_log_monotonic<F: Fn(f64) -> f64>(f: F, lo: f64, hi: f64, rel_width: f64) -> Result<f64> {
    if !(lo > 0.0 && hi > 0.0) {
        return Err(NumericsError::Domain {
            function: "find_root_log_monotonic",
            value: lo.min(hi),
            reason: "positive bracket required",
        });
    }
    let (mut a, mut b) = if lo <= hi {
        (lo.ln(), hi.ln())
    } else {
        (hi.ln(), lo.ln())
    };
    let mut fa = f(a.exp());
    let fb = f(b.exp());
    if fa.is_nan() || fb.is_nan() {
        return Err(NumericsError::NonFinite("find_root_log_monotonic"));
    }
    if fa == 0.0 {
        return Ok(a.exp());
    }
    if fb == 0.0 {
        return Ok(b.exp());
    }
    if fa.signum() == fb.signum() {
        return Err(NumericsError::Bracket {
            lo: a.exp(),
            hi: b.exp(),
            f_lo: fa,
            f_hi: fb,
        });
    }
    let width = rel_width.max(4.0 * f64::EPSILON).ln_1p();
    while b - a > width {
        let mid = 0.5 * (a + b);
        if mid <= a || mid >= b {
            break;
        }
        let fm = f(mid.exp());
        if fm == 0.0 {
            return Ok(mid.exp());
        }
        if fm.signum() == fa.signum() {
            a = mid;
            fa = fm;
        } else {
            b = mid;
        }
    }
    Ok((0.5 * (a + b)).exp())
}

/// `ln 2`, re-exported for the solvers.
pub(crate) const LN2: f64 = LN_2;
