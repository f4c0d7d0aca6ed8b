//! Binomial tails and the Clopper-Pearson lower bound.
//!
//! Point masses use Loader's saddle-point expansion, which keeps full
//! relative precision for `n` in the hundreds of thousands where the naive
//! `exp(ln C(n,k) + ...)` route loses ~1e-10.

use std::f64::consts::PI;

use super::{Confidence, Probability};
use crate::error::{Error, Result};

/// Largest `n` for which tails are summed term by term.
const EXACT_SUM_LIMIT: u64 = 10_000;
const MAX_CF_ITERATIONS: usize = 1_000_000;
const BISECTION_STEPS: usize = 60;

/// Stirling error at `n = 1..=15` to 20 digits; index 0 is unused.
#[allow(clippy::excessive_precision)]
const STIRLING_ERROR_SMALL: [f64; 16] = [
    0.0,
    0.081_061_466_795_327_258_22,
    0.041_340_695_955_409_294_094,
    0.027_677_925_684_998_339_149,
    0.020_790_672_103_765_093_112,
    0.016_644_691_189_821_192_163,
    0.013_876_128_823_070_747_999,
    0.011_896_709_945_891_770_095,
    0.010_411_265_261_972_096_497,
    0.009_255_462_182_712_732_917_7,
    0.008_330_563_433_362_871_256_5,
    0.007_573_675_487_951_840_795,
    0.006_942_840_107_209_529_865_7,
    0.006_408_994_188_004_207_068_4,
    0.005_951_370_112_758_847_735_6,
    0.005_554_733_551_962_801_371,
];

/// `ln(n!) - ln(sqrt(2 pi n) (n/e)^n)`.
fn stirling_error(n: f64) -> f64 {
    const S0: f64 = 1.0 / 12.0;
    const S1: f64 = 1.0 / 360.0;
    const S2: f64 = 1.0 / 1260.0;
    const S3: f64 = 1.0 / 1680.0;
    const S4: f64 = 1.0 / 1188.0;
    if n <= 15.0 {
        debug_assert!(n >= 1.0 && n.fract() == 0.0);
        return STIRLING_ERROR_SMALL[n as usize];
    }
    let nn = n * n;
    if n > 500.0 {
        (S0 - S1 / nn) / n
    } else if n > 80.0 {
        (S0 - (S1 - S2 / nn) / nn) / n
    } else if n > 35.0 {
        (S0 - (S1 - (S2 - S3 / nn) / nn) / nn) / n
    } else {
        (S0 - (S1 - (S2 - (S3 - S4 / nn) / nn) / nn) / nn) / n
    }
}

/// Deviance term `x ln(x / np) + np - x`, evaluated without cancellation.
fn deviance(x: f64, np: f64) -> f64 {
    if (x - np).abs() < 0.1 * (x + np) {
        let mut v = (x - np) / (x + np);
        let mut s = (x - np) * v;
        if s.abs() < f64::MIN_POSITIVE {
            return s;
        }
        let mut ej = 2.0 * x * v;
        v *= v;
        for j in 1..1000 {
            ej *= v;
            let s1 = s + ej / f64::from(2 * j + 1);
            if s1 == s {
                return s1;
            }
            s = s1;
        }
    }
    x * (x / np).ln() + np - x
}

/// `P[X = k]` for `X ~ Binomial(n, p)` with `q = 1 - p` supplied separately.
fn pmf_raw(k: u64, n: u64, p: f64, q: f64) -> f64 {
    let (x, nf) = (k as f64, n as f64);
    if p == 0.0 {
        return if k == 0 { 1.0 } else { 0.0 };
    }
    if q == 0.0 {
        return if k == n { 1.0 } else { 0.0 };
    }
    if k == 0 {
        let lc = if p < 0.1 {
            -deviance(nf, nf * q) - nf * p
        } else {
            nf * q.ln()
        };
        return lc.exp();
    }
    if k == n {
        let lc = if q < 0.1 {
            -deviance(nf, nf * p) - nf * q
        } else {
            nf * p.ln()
        };
        return lc.exp();
    }
    let lc = stirling_error(nf)
        - stirling_error(x)
        - stirling_error(nf - x)
        - deviance(x, nf * p)
        - deviance(nf - x, nf * q);
    let lf = (2.0 * PI).ln() + x.ln() + (-x / nf).ln_1p();
    (lc - 0.5 * lf).exp()
}

/// `P[X = k]` for `X ~ Binomial(n, p)`.
pub fn binom_pmf(k: u64, n: u64, p: Probability) -> Result<f64> {
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    Ok(pmf_raw(k, n, p.get(), 1.0 - p.get()))
}

/// `P[X >= k]` for `X ~ Binomial(n, p)`.
///
/// Exact term summation for `n <= 10_000`, a continued fraction for the
/// regularized incomplete beta function above that.
pub fn binom_p_value(k: u64, n: u64, p: Probability) -> Result<Probability> {
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    Ok(Probability::saturating(upper_tail(k, n, p.get())))
}

pub(crate) fn upper_tail(k: u64, n: u64, p: f64) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if p <= 0.0 {
        return 0.0;
    }
    if p >= 1.0 {
        return 1.0;
    }
    if n <= EXACT_SUM_LIMIT {
        upper_tail_summed(k, n, p)
    } else {
        upper_tail_beta(k, n, p)
    }
}

fn upper_tail_summed(k: u64, n: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    let mean = n as f64 * p;
    if k as f64 > mean {
        // descending terms from k upwards
        let ratio = p / q;
        let mut term = pmf_raw(k, n, p, q);
        let mut sum = term;
        let mut j = k;
        while j < n && term > sum * 1e-17 {
            term *= (n - j) as f64 / (j + 1) as f64 * ratio;
            sum += term;
            j += 1;
        }
        sum
    } else {
        // complement of P[X <= k - 1], summed downwards
        let ratio = q / p;
        let mut j = k - 1;
        let mut term = pmf_raw(j, n, p, q);
        let mut sum = term;
        while j > 0 && term > sum * 1e-17 {
            term *= j as f64 / (n - j + 1) as f64 * ratio;
            sum += term;
            j -= 1;
        }
        1.0 - sum
    }
}

/// `I_p(k, n - k + 1)` via the Lentz continued fraction.
///
/// The usual prefactor `x^a (1-x)^b / (a B(a, b))` equals `pmf(k) * q` for
/// these integer arguments, so it inherits the saddle-point precision.
fn upper_tail_beta(k: u64, n: u64, p: f64) -> f64 {
    let q = 1.0 - p;
    let a = k as f64;
    let b = (n - k + 1) as f64;
    if p < (a + 1.0) / (a + b + 2.0) {
        pmf_raw(k, n, p, q) * q * beta_continued_fraction(a, b, p)
    } else {
        let lower = pmf_raw(k - 1, n, p, q) * p * beta_continued_fraction(b, a, q);
        1.0 - lower
    }
}

fn beta_continued_fraction(a: f64, b: f64, x: f64) -> f64 {
    const EPS: f64 = 1e-16;
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=MAX_CF_ITERATIONS {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// One-sided Clopper-Pearson lower bound on a binomial success probability.
///
/// Returns the largest `p` with `P[Binomial(n, p) >= k] <= 1 - conf`, which is
/// the `(1 - conf)` quantile of `Beta(k, n - k + 1)`. Closed forms are used at
/// `k = 0` and `k = n`; otherwise the survival function is bisected.
pub fn clopper_pearson_lower(k: u64, n: u64, conf: Confidence) -> Result<Probability> {
    if n == 0 {
        return Err(Error::invalid("Clopper-Pearson bound needs n >= 1"));
    }
    if k > n {
        return Err(Error::invalid(format!("k = {k} exceeds n = {n}")));
    }
    let tail = conf.tail();
    if k == 0 {
        return Ok(Probability::ZERO);
    }
    if k == n {
        return Ok(Probability::saturating(tail.powf(1.0 / n as f64)));
    }
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if upper_tail(k, n, mid) <= tail {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Probability::saturating(lo))
}
