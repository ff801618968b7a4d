//! Standard normal CDF and its inverse, accurate deep into the tails.
//!
//! All privacy thresholds in this crate are of the form `sigma * Phi^-1(1 - q)`
//! with `q` as small as `e^-10 / t` or `eta * |S|/|V|`, so both directions are
//! computed through the complementary error function to avoid cancellation.
//! `erf`/`erfc` below are the classic Sun/FreeBSD msun rational approximations
//! (as ported to Go and to several Rust numerics crates), good to about 1 ulp;
//! the inverse starts from Acklam's rational approximation and is Newton-polished
//! against `erfc` to full double precision.

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;
const SQRT_2: f64 = std::f64::consts::SQRT_2;
const SQRT_PI: f64 = 1.772_453_850_905_516_1;

const ERX: f64 = 8.450_629_115_104_675_3e-1;

// erf on [0, 0.84375]
const EFX: f64 = 1.283_791_670_955_125_9e-1;
const EFX8: f64 = 1.027_033_336_764_100_7;
const PP0: f64 = 1.283_791_670_955_125_6e-1;
const PP1: f64 = -3.250_421_072_470_015e-1;
const PP2: f64 = -2.848_174_957_559_851e-2;
const PP3: f64 = -5.770_270_296_489_442e-3;
const PP4: f64 = -2.376_301_665_665_016_3e-5;
const QQ1: f64 = 3.979_172_239_591_553_5e-1;
const QQ2: f64 = 6.502_224_998_876_729e-2;
const QQ3: f64 = 5.081_306_281_875_766e-3;
const QQ4: f64 = 1.324_947_380_043_216_4e-4;
const QQ5: f64 = -3.960_228_278_775_368e-6;

// erf on [0.84375, 1.25]
const PA0: f64 = -2.362_118_560_752_659_4e-3;
const PA1: f64 = 4.148_561_186_837_483e-1;
const PA2: f64 = -3.722_078_760_357_013_3e-1;
const PA3: f64 = 3.183_466_199_011_617_6e-1;
const PA4: f64 = -1.108_946_942_823_966_8e-1;
const PA5: f64 = 3.547_830_432_561_823_6e-2;
const PA6: f64 = -2.166_375_594_868_790_8e-3;
const QA1: f64 = 1.064_208_804_008_442_3e-1;
const QA2: f64 = 5.403_979_177_021_710_5e-1;
const QA3: f64 = 7.182_865_441_419_627e-2;
const QA4: f64 = 1.261_712_198_087_616_4e-1;
const QA5: f64 = 1.363_708_391_202_905_1e-2;
const QA6: f64 = 1.198_449_984_679_910_7e-2;

// erfc on [1.25, 1/0.35]
const RA0: f64 = -9.864_944_034_847_148e-3;
const RA1: f64 = -6.938_585_727_071_818e-1;
const RA2: f64 = -1.055_862_622_532_329_1e1;
const RA3: f64 = -6.237_533_245_032_6e1;
const RA4: f64 = -1.623_966_694_625_734_7e2;
const RA5: f64 = -1.846_050_929_067_110_4e2;
const RA6: f64 = -8.128_743_550_630_659e1;
const RA7: f64 = -9.814_329_344_169_146;
const SA1: f64 = 1.965_127_166_743_925_7e1;
const SA2: f64 = 1.376_577_541_435_190_4e2;
const SA3: f64 = 4.345_658_774_752_292_3e2;
const SA4: f64 = 6.453_872_717_332_679e2;
const SA5: f64 = 4.290_081_400_275_678_4e2;
const SA6: f64 = 1.086_350_055_417_794_4e2;
const SA7: f64 = 6.570_249_770_319_282;
const SA8: f64 = -6.042_441_521_485_81e-2;

// erfc on [1/0.35, 28]
const RB0: f64 = -9.864_942_924_700_099e-3;
const RB1: f64 = -7.992_832_376_805_23e-1;
const RB2: f64 = -1.775_795_491_775_475_2e1;
const RB3: f64 = -1.606_363_848_558_219_2e2;
const RB4: f64 = -6.375_664_433_683_896e2;
const RB5: f64 = -1.025_095_131_611_077_2e3;
const RB6: f64 = -4.835_191_916_086_514e2;
const SB1: f64 = 3.033_806_074_348_246e1;
const SB2: f64 = 3.257_925_129_965_739_2e2;
const SB3: f64 = 1.536_729_586_084_437e3;
const SB4: f64 = 3.199_858_219_508_595_4e3;
const SB5: f64 = 2.553_050_406_433_164_4e3;
const SB6: f64 = 4.745_285_412_069_553_7e2;
const SB7: f64 = -2.244_095_244_658_581_8e1;

const VERY_TINY: f64 = 2.848_094_538_889_218e-306;
const TINY: f64 = 1.387_778_780_781_445_7e-17; // 2^-56
const SMALL: f64 = 3.725_290_298_461_914e-9; // 2^-28

/// Error function, < 1 ulp over the whole range.
pub fn erf(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 1.0;
    }
    if x == f64::NEG_INFINITY {
        return -1.0;
    }
    let sign = x < 0.0;
    let x = x.abs();
    let result = if x < 0.84375 {
        if x < SMALL {
            if x < VERY_TINY {
                0.125 * (8.0 * x + EFX8 * x)
            } else {
                x + EFX * x
            }
        } else {
            let z = x * x;
            let r = PP0 + z * (PP1 + z * (PP2 + z * (PP3 + z * PP4)));
            let s = 1.0 + z * (QQ1 + z * (QQ2 + z * (QQ3 + z * (QQ4 + z * QQ5))));
            x + x * (r / s)
        }
    } else if x < 1.25 {
        let s = x - 1.0;
        let p = PA0 + s * (PA1 + s * (PA2 + s * (PA3 + s * (PA4 + s * (PA5 + s * PA6)))));
        let q = 1.0 + s * (QA1 + s * (QA2 + s * (QA3 + s * (QA4 + s * (QA5 + s * QA6)))));
        ERX + p / q
    } else if x >= 6.0 {
        1.0
    } else {
        1.0 - erfc_tail(x)
    };
    if sign {
        -result
    } else {
        result
    }
}

/// Complementary error function `1 - erf(x)`, accurate without cancellation
/// for large positive `x` (down to `erfc(27.2) ~ 1e-322`).
pub fn erfc(x: f64) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x == f64::INFINITY {
        return 0.0;
    }
    if x == f64::NEG_INFINITY {
        return 2.0;
    }
    let sign = x < 0.0;
    let x = x.abs();
    if x < 0.84375 {
        let temp = if x < TINY {
            x
        } else {
            let z = x * x;
            let r = PP0 + z * (PP1 + z * (PP2 + z * (PP3 + z * PP4)));
            let s = 1.0 + z * (QQ1 + z * (QQ2 + z * (QQ3 + z * (QQ4 + z * QQ5))));
            let y = x * (r / s);
            if x < 0.25 {
                x + y
            } else {
                0.5 + (y + (x - 0.5))
            }
        };
        return if sign { 1.0 + temp } else { 1.0 - temp };
    }
    if x < 1.25 {
        let s = x - 1.0;
        let p = PA0 + s * (PA1 + s * (PA2 + s * (PA3 + s * (PA4 + s * (PA5 + s * PA6)))));
        let q = 1.0 + s * (QA1 + s * (QA2 + s * (QA3 + s * (QA4 + s * (QA5 + s * QA6)))));
        return if sign {
            1.0 + ERX + p / q
        } else {
            1.0 - ERX - p / q
        };
    }
    if x < 28.0 {
        if sign && x > 6.0 {
            return 2.0;
        }
        let r = erfc_tail(x);
        return if sign { 2.0 - r } else { r };
    }
    if sign {
        2.0
    } else {
        0.0
    }
}

// erfc for x in [1.25, 28): (1/x) exp(-x^2 - 0.5625 + R/S), split so the
// exponent of the dominant factor is computed with a truncated-precision x.
fn erfc_tail(x: f64) -> f64 {
    let s = 1.0 / (x * x);
    let (r, t) = if x < 1.0 / 0.35 {
        (
            RA0 + s * (RA1 + s * (RA2 + s * (RA3 + s * (RA4 + s * (RA5 + s * (RA6 + s * RA7)))))),
            1.0 + s
                * (SA1
                    + s * (SA2
                        + s * (SA3 + s * (SA4 + s * (SA5 + s * (SA6 + s * (SA7 + s * SA8))))))),
        )
    } else {
        (
            RB0 + s * (RB1 + s * (RB2 + s * (RB3 + s * (RB4 + s * (RB5 + s * RB6))))),
            1.0 + s * (SB1 + s * (SB2 + s * (SB3 + s * (SB4 + s * (SB5 + s * (SB6 + s * SB7)))))),
        )
    };
    let z = f64::from_bits(x.to_bits() & 0xffff_ffff_0000_0000);
    let v = (-z * z - 0.5625).exp() * ((z - x) * (z + x) + r / t).exp();
    v / x
}

/// Standard normal CDF `Phi(x)`.
pub fn phi(x: f64) -> f64 {
    0.5 * erfc(-x * FRAC_1_SQRT_2)
}

/// Upper tail `1 - Phi(x)`, computed without cancellation.
pub fn phi_complement(x: f64) -> f64 {
    0.5 * erfc(x * FRAC_1_SQRT_2)
}

// Acklam's rational approximation to the normal quantile, relative error
// below 1.15e-9; used only as the Newton starting point.
fn quantile_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969_683_028_665_376e1,
        2.209_460_984_245_205e2,
        -2.759_285_104_469_687e2,
        1.383_577_518_672_69e2,
        -3.066_479_806_614_716e1,
        2.506_628_277_459_239,
    ];
    const B: [f64; 5] = [
        -5.447_609_879_822_406e1,
        1.615_858_368_580_409e2,
        -1.556_989_798_598_866e2,
        6.680_131_188_771_972e1,
        -1.328_068_155_288_572e1,
    ];
    const C: [f64; 6] = [
        -7.784_894_002_430_293e-3,
        -3.223_964_580_411_365e-1,
        -2.400_758_277_161_838,
        -2.549_732_539_343_734,
        4.374_664_141_464_968,
        2.938_163_982_698_783,
    ];
    const D: [f64; 4] = [
        7.784_695_709_041_462e-3,
        3.224_671_290_700_398e-1,
        2.445_134_137_142_996,
        3.754_408_661_907_416,
    ];
    const P_LOW: f64 = 0.02425;
    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -quantile_guess(1.0 - p)
    }
}

/// Inverse of the upper tail: the `x` with `1 - Phi(x) = q`.
///
/// Valid for `q` in `(0, 1)`; relative accuracy better than 1e-13 for tail
/// masses down to 1e-15 and beyond.
pub fn phi_inv_complement(q: f64) -> f64 {
    assert!(q > 0.0 && q < 1.0, "tail mass must lie in (0,1), got {q}");
    if q > 0.5 {
        return -phi_inv_complement(1.0 - q);
    }
    // Newton on f(z) = erfc(z) - 2q in erfc coordinates (x = z*sqrt(2));
    // f'(z) = -2 exp(-z^2)/sqrt(pi).
    let mut z = -quantile_guess(q) * FRAC_1_SQRT_2;
    for _ in 0..4 {
        if !(z * z < 700.0) {
            break;
        }
        let f = erfc(z) - 2.0 * q;
        let step = f * 0.5 * SQRT_PI * (z * z).exp();
        z += step;
        if step.abs() <= 1e-16 * z.abs().max(1.0) {
            break;
        }
    }
    z * SQRT_2
}

/// Standard normal quantile `Phi^-1(p)`.
///
/// Callers that need deep-tail precision near `p = 1` should compute the
/// complementary mass exactly and call [`phi_inv_complement`] instead.
pub fn phi_inv(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0, "probability must lie in (0,1), got {p}");
    if p <= 0.5 {
        -phi_inv_complement(p)
    } else {
        phi_inv_complement(1.0 - p)
    }
}

/// Tail mass `1 - (1 - delta)^{1/t}`, computed as `-expm1(log1p(-delta)/t)`
/// to avoid cancellation for small `delta` and large `t`.
pub fn per_trial_tail(delta: f64, t: u64) -> f64 {
    debug_assert!(t >= 1);
    -((-delta).ln_1p() / t as f64).exp_m1()
}
