//! Float to exact-rational conversion for the enumeration oracle and the
//! exact LP path.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;

/// Denominator bound used when rationalizing solver output.
pub const MAX_DENOMINATOR: u64 = 1_000_000_000;

/// Best rational approximation of `x` with denominator at most `max_den`,
/// from the continued-fraction convergents and the last semiconvergent.
pub fn rationalize(x: f64, max_den: u64) -> BigRational {
    assert!(x.is_finite(), "cannot rationalize {x}");
    assert!(max_den >= 1);
    let negative = x < 0.0;
    let target = x.abs();
    let max_den = max_den as i128;

    // Convergents h/k, seeded with h_{-2}/k_{-2} = 0/1 and h_{-1}/k_{-1} = 1/0.
    let (mut h0, mut h1) = (0i128, 1i128);
    let (mut k0, mut k1) = (1i128, 0i128);
    let mut r = target;
    let (num, den) = loop {
        let a = r.floor();
        if a > 1e18 {
            break (h1, k1);
        }
        let a = a as i128;
        let h2 = a * h1 + h0;
        let k2 = a * k1 + k0;
        if k2 > max_den {
            // Largest semiconvergent that fits, compared with the last convergent.
            let t = (max_den - k0) / k1;
            let (hs, ks) = (t * h1 + h0, t * k1 + k0);
            let err_semi = (target - hs as f64 / ks as f64).abs();
            let err_conv = (target - h1 as f64 / k1 as f64).abs();
            break if ks > 0 && err_semi < err_conv {
                (hs, ks)
            } else {
                (h1, k1)
            };
        }
        (h0, h1, k0, k1) = (h1, h2, k1, k2);
        let frac = r - a as f64;
        if frac <= 0.0 || h1 as f64 / k1 as f64 == target {
            break (h1, k1);
        }
        r = 1.0 / frac;
    };
    let q = BigRational::new(BigInt::from(num), BigInt::from(den));
    if negative {
        -q
    } else {
        q
    }
}

pub fn to_f64(q: &BigRational) -> f64 {
    q.to_f64().unwrap_or(f64::NAN)
}
