//! Standard normal density, distribution, and quantile functions.
//!
//! The posterior-median kernel needs `Phi` and its inverse well into the
//! tails, so the CDF is backed by `erfc` in the bulk and by a Mills-ratio
//! continued fraction in the far left tail where `erfc` underflows. The
//! quantile is Wichura's AS 241 (PPND16) polished with one Newton step.

use std::f64::consts::FRAC_1_SQRT_2;

/// sqrt(2*pi)
pub const SQRT_2PI: f64 = 2.506_628_274_631_000_5;
/// ln(sqrt(2*pi))
pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

/// Standard normal density.
#[inline]
pub fn pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / SQRT_2PI
}

/// Log of the standard normal density.
#[inline]
pub fn log_pdf(x: f64) -> f64 {
    -0.5 * x * x - LN_SQRT_2PI
}

/// Standard normal CDF.
#[inline]
pub fn cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x * FRAC_1_SQRT_2)
}

/// Standard normal survival function P(X > x).
#[inline]
pub fn sf(x: f64) -> f64 {
    0.5 * libm::erfc(x * FRAC_1_SQRT_2)
}

// erfc(x/sqrt(2)) stays normal down to about x = -37; switch to the
// asymptotic path a bit before the subnormal range erodes precision.
const LEFT_TAIL_SWITCH: f64 = -34.0;

/// Log of the standard normal CDF, accurate for all finite `x`.
pub fn log_cdf(x: f64) -> f64 {
    if x < LEFT_TAIL_SWITCH {
        // log Phi(x) = log phi(x) + log R(-x), R the Mills ratio.
        log_pdf(x) + ln_mills(-x)
    } else if x > 6.0 {
        // Phi(x) = 1 - Q, Q tiny: ln(1-Q) via ln_1p avoids rounding to 0.
        (-sf(x)).ln_1p()
    } else {
        cdf(x).ln()
    }
}

/// Log of the survival function P(X > x).
#[inline]
pub fn log_sf(x: f64) -> f64 {
    log_cdf(-x)
}

/// ln of the Mills ratio Phi(-t)/phi(t) for large t > 0, via the
/// continued fraction R(t) = 1/(t + 1/(t + 2/(t + 3/(...)))).
fn ln_mills(t: f64) -> f64 {
    debug_assert!(t > 1.0);
    let mut r = 0.0;
    for k in (1..=48u32).rev() {
        r = f64::from(k) / (t + r);
    }
    (1.0 / (t + r)).ln()
}

/// Standard normal quantile (inverse CDF).
///
/// AS 241 PPND16 rational approximations, then one guarded Newton step
/// against the `erfc`-based CDF to pin down the last couple of ulps.
pub fn quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "quantile requires p in (0,1), got {p}");
    let x = ppnd16(p);
    // Newton polish on whichever tail is better conditioned.
    let polished = if p <= 0.5 {
        x - (cdf(x) - p) / pdf(x)
    } else {
        x + (sf(x) - (1.0 - p)) / pdf(x)
    };
    if polished.is_finite() {
        polished
    } else {
        x
    }
}

/// Wichura (1988), algorithm AS 241, PPND16.
fn ppnd16(p: f64) -> f64 {
    let q = p - 0.5;
    if q.abs() <= 0.425 {
        let r = 0.180_625 - q * q;
        let num = (((((((2.509_080_928_730_122_7e3 * r + 3.343_057_558_358_813e4) * r
            + 6.726_577_092_700_87e4)
            * r
            + 4.592_195_393_154_987e4)
            * r
            + 1.373_169_376_550_946e4)
            * r
            + 1.971_590_950_306_551_3e3)
            * r
            + 1.331_416_678_917_843_8e2)
            * r
            + 3.387_132_872_796_366_5)
            * q;
        let den = ((((((5.226_495_278_852_545e3 * r + 2.872_908_573_572_194_3e4) * r
            + 3.930_789_580_009_271e4)
            * r
            + 2.121_379_430_158_659_7e4)
            * r
            + 5.394_196_021_424_751e3)
            * r
            + 6.871_870_074_920_579e2)
            * r
            + 4.231_333_070_160_091e1)
            * r
            + 1.0;
        return num / den;
    }
    let r = if q < 0.0 { p } else { 1.0 - p };
    let mut r = (-r.ln()).sqrt();
    let val = if r <= 5.0 {
        r -= 1.6;
        let num = ((((((7.745_450_142_783_414e-4 * r + 2.272_384_498_926_918_4e-2) * r
            + 2.417_807_251_774_506e-1)
            * r
            + 1.270_458_252_452_368_4)
            * r
            + 3.647_848_324_763_204_5)
            * r
            + 5.769_497_221_460_691)
            * r
            + 4.630_337_846_156_546)
            * r
            + 1.423_437_110_749_683_5;
        let den = ((((((1.050_750_071_644_416_9e-9 * r + 5.475_938_084_995_345e-4) * r
            + 1.519_866_656_361_645_7e-2)
            * r
            + 1.481_039_764_274_800_8e-1)
            * r
            + 6.897_673_349_851e-1)
            * r
            + 1.676_384_830_183_803_8)
            * r
            + 2.053_191_626_637_759)
            * r
            + 1.0;
        num / den
    } else {
        r -= 5.0;
        let num = ((((((2.010_334_399_292_288_1e-7 * r + 2.711_555_568_743_487_6e-5) * r
            + 1.242_660_947_388_078_4e-3)
            * r
            + 2.653_218_952_657_612_4e-2)
            * r
            + 2.965_605_718_285_048_7e-1)
            * r
            + 1.784_826_539_917_291_3)
            * r
            + 5.463_784_911_164_114)
            * r
            + 6.657_904_643_501_103;
        let den = ((((((2.044_263_103_389_939_7e-15 * r + 1.421_511_758_316_446e-7) * r
            + 1.846_318_317_510_054_8e-5)
            * r
            + 7.868_691_311_456_133e-4)
            * r
            + 1.487_536_129_085_061_5e-2)
            * r
            + 1.369_298_809_227_358e-1)
            * r
            + 5.998_322_065_558_88e-1)
            * r
            + 1.0;
        num / den
    };
    if q < 0.0 {
        -val
    } else {
        val
    }
}
