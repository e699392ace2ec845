//! Exact dyadic brackets for the sigmoid and tanh activations.
//!
//! For a rational input `v`, `bracket(v, p)` returns `(⌊f(v)⌋_p, ⌈f(v)⌉_p)`,
//! the neighbouring points of the grid `2^-p` around `f(v)`. Both maps are
//! monotone in `v`, so applying them to interval endpoints gives a sound
//! enclosure and point evaluations nest inside box evaluations.
//!
//! `f(v)` is transcendental for every rational `v ≠ 0`, so it never sits on a
//! grid point; the bracket is found by tightening a fixed-point enclosure of
//! `exp` until both ends fall in the same grid cell.

use num_bigint::{BigInt, Sign};
use num_integer::Integer;
use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::rational::Rational;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MonotoneFn {
    Sigmoid,
    Tanh,
}

impl MonotoneFn {
    pub fn name(self) -> &'static str {
        match self {
            MonotoneFn::Sigmoid => "sigmoid",
            MonotoneFn::Tanh => "tanh",
        }
    }

    /// `(⌊f(v)⌋_p, ⌈f(v)⌉_p)` on the dyadic grid `2^-bits`.
    pub fn bracket(self, v: &Rational, bits: u32) -> (Rational, Rational) {
        match self {
            MonotoneFn::Sigmoid => sigmoid_bracket(v, bits),
            MonotoneFn::Tanh => tanh_bracket(v, bits),
        }
    }

    pub fn round_down(self, v: &Rational, bits: u32) -> Rational {
        self.bracket(v, bits).0
    }

    pub fn round_up(self, v: &Rational, bits: u32) -> Rational {
        self.bracket(v, bits).1
    }
}

const GUARD_BITS: u32 = 40;
const MAX_TIGHTENINGS: u32 = 8;

fn sigmoid_bracket(v: &Rational, bits: u32) -> (Rational, Rational) {
    if v.is_zero() {
        return (Rational::new(1, 2), Rational::new(1, 2));
    }
    let unit = Rational::dyadic_unit(bits);
    if saturated(&v.abs(), bits + 1) {
        // |σ(v) - {0,1}| < 2^-(bits+1): the bracket is the last grid cell.
        return if v.is_positive() {
            (Rational::one() - &unit, Rational::one())
        } else {
            (Rational::zero(), unit)
        };
    }
    let positive = v.is_positive();
    let mag = v.abs();
    tighten(bits, |guard| {
        let (e_lo, e_hi, scale) = exp_bounds(&mag, bits + guard);
        let one = BigInt::one() << scale;
        // σ(|v|) = E / (E + 1), increasing in E; σ(-|v|) = 1 / (1 + E).
        if positive {
            ((e_lo.clone(), &e_lo + &one), (e_hi.clone(), &e_hi + &one))
        } else {
            ((one.clone(), &one + &e_hi), (one.clone(), &one + &e_lo))
        }
    })
}

fn tanh_bracket(v: &Rational, bits: u32) -> (Rational, Rational) {
    if v.is_zero() {
        return (Rational::zero(), Rational::zero());
    }
    let unit = Rational::dyadic_unit(bits);
    let mag = v.abs();
    let (lo, hi) = if saturated(&(&mag * Rational::from_integer(2)), bits + 2) {
        (Rational::one() - &unit, Rational::one())
    } else {
        let twice = &mag * Rational::from_integer(2);
        tighten(bits, |guard| {
            let (f_lo, f_hi, scale) = exp_bounds(&twice, bits + guard);
            let one = BigInt::one() << scale;
            // tanh(|v|) = (F - 1) / (F + 1), increasing in F = e^{2|v|}.
            ((&f_lo - &one, &f_lo + &one), (&f_hi - &one, &f_hi + &one))
        })
    };
    if v.is_positive() {
        (lo, hi)
    } else {
        (-hi, -lo)
    }
}

/// True when `e^x >= 2^k`, established through `ln 2 < 6932/10000`.
fn saturated(x: &Rational, k: u32) -> bool {
    *x >= Rational::new(6932, 10000) * Rational::from_integer(k as i64)
}

/// Runs `enclose` with growing guard precision until the lower and upper
/// fraction bounds share a grid cell. `enclose` returns two fractions
/// `(num, den)` bounding the function value from below and above.
fn tighten<F>(bits: u32, mut enclose: F) -> (Rational, Rational)
where
    F: FnMut(u32) -> ((BigInt, BigInt), (BigInt, BigInt)),
{
    let scale = BigInt::one() << bits;
    let mut guard = GUARD_BITS;
    let mut last = None;
    for _ in 0..MAX_TIGHTENINGS {
        let ((ln, ld), (hn, hd)) = enclose(guard);
        let cell_lo = (&ln * &scale).div_floor(&ld);
        let cell_hi = (&hn * &scale).div_floor(&hd);
        if cell_lo == cell_hi {
            let down = Rational::from_big(cell_lo.clone(), scale.clone());
            let up = Rational::from_big(cell_lo + 1, scale.clone());
            return (down, up);
        }
        last = Some((cell_lo, (&hn * &scale).div_ceil(&hd)));
        guard *= 2;
    }
    // Unreachable in practice; an outward enclosure is still sound.
    let (lo, hi) = last.expect("at least one tightening round");
    (Rational::from_big(lo, scale.clone()), Rational::from_big(hi, scale))
}

/// Fixed-point bounds on `e^x` for rational `x > 0`, returned as integers at
/// scale `2^s` together with `s`.
fn exp_bounds(x: &Rational, work_bits: u32) -> (BigInt, BigInt, u32) {
    let scaled_lo = fixed_floor(x, work_bits);
    let scaled_hi = fixed_ceil(x, work_bits);
    // Halve the argument m times so that the reduced value is below 1/2.
    let m = (scaled_hi.bits() as u32 + 1).saturating_sub(work_bits);
    let scale = work_bits + m + 8;
    // Reduced arguments at `scale`: x / 2^m, exact since the shift is positive.
    let r_lo = scaled_lo << 8u32;
    let r_hi = scaled_hi << 8u32;
    let mut lo = exp_series(&r_lo, scale, false);
    let mut hi = exp_series(&r_hi, scale, true);
    for _ in 0..m {
        lo = (&lo * &lo) >> scale;
        let sq = &hi * &hi;
        hi = ceil_shift(&sq, scale);
    }
    (lo, hi, scale)
}

/// Taylor bound on `e^r` for `0 <= r <= 1/2` at fixed scale `2^s`.
/// Lower bound truncates the series; upper bound adds the geometric tail.
fn exp_series(r: &BigInt, s: u32, upper: bool) -> BigInt {
    let one = BigInt::one() << s;
    let mut sum = one.clone();
    let mut term = one;
    let mut k: u32 = 1;
    loop {
        let num = &term * r;
        let den = BigInt::from(k) << s;
        term = if upper { num.div_ceil(&den) } else { num.div_floor(&den) };
        if term.is_zero() {
            break;
        }
        sum += &term;
        k += 1;
        if term.bits() <= 1 {
            // Remaining terms are below one ulp each and halve at every step.
            if upper {
                sum += BigInt::from(2) * &term + 1;
            }
            break;
        }
    }
    sum
}

fn fixed_floor(x: &Rational, bits: u32) -> BigInt {
    let n = x.numer() << bits;
    n.div_floor(x.denom())
}

fn fixed_ceil(x: &Rational, bits: u32) -> BigInt {
    let n = x.numer() << bits;
    n.div_ceil(x.denom())
}

fn ceil_shift(v: &BigInt, bits: u32) -> BigInt {
    debug_assert!(v.sign() != Sign::Minus);
    let floor = v >> bits;
    if (&floor << bits) == *v {
        floor
    } else {
        floor + 1
    }
}
