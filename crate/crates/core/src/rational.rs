//! Exact rational arithmetic on `i128` components.
//!
//! Every quantity in this crate (CTR, value, budget, bid, price, utility) is a
//! `Rat`. Values are kept canonical: denominator positive, fraction in lowest
//! terms. Arithmetic is checked; an overflow aborts instead of wrapping, since
//! a silently wrong comparison would corrupt equilibrium verdicts. The inputs
//! this crate handles are desk-scale, so `i128` headroom is ample.

use std::cmp::Ordering;
use std::fmt;
use std::iter::Sum;
use std::ops::{Add, AddAssign, Div, Mul, Neg, Sub, SubAssign};
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// A rational number `num/den` with `den > 0` and `gcd(|num|, den) == 1`.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Rat {
    num: i128,
    den: i128,
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        let t = b;
        b = a % b;
        a = t;
    }
    a
}

#[inline]
fn checked(op: Option<i128>) -> i128 {
    op.expect("rational arithmetic overflowed i128; inputs exceed supported scale")
}

impl Rat {
    /// Builds `num/den` in canonical form. Panics on a zero denominator.
    pub fn new(num: i128, den: i128) -> Rat {
        assert!(den != 0, "rational with zero denominator");
        let sign = if den < 0 { -1 } else { 1 };
        let g = gcd(num.unsigned_abs(), den.unsigned_abs()) as i128;
        if g == 0 {
            return Rat { num: 0, den: 1 };
        }
        Rat {
            num: sign * (num / g),
            den: (den / g).abs(),
        }
    }

    pub const ZERO: Rat = Rat { num: 0, den: 1 };
    pub const ONE: Rat = Rat { num: 1, den: 1 };

    pub fn from_int(n: i64) -> Rat {
        Rat {
            num: n as i128,
            den: 1,
        }
    }

    pub fn numer(&self) -> i128 {
        self.num
    }

    pub fn denom(&self) -> i128 {
        self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num == 0
    }

    pub fn is_negative(&self) -> bool {
        self.num < 0
    }

    pub fn is_positive(&self) -> bool {
        self.num > 0
    }

    pub fn abs(&self) -> Rat {
        Rat {
            num: self.num.abs(),
            den: self.den,
        }
    }

    pub fn recip(&self) -> Rat {
        assert!(self.num != 0, "reciprocal of zero");
        Rat::new(self.den, self.num)
    }

    pub fn min(self, other: Rat) -> Rat {
        if self <= other {
            self
        } else {
            other
        }
    }

    pub fn max(self, other: Rat) -> Rat {
        if self >= other {
            self
        } else {
            other
        }
    }

    /// Decimal rendering truncated to `places` fractional digits, exact when
    /// the expansion terminates within that many digits. Used for display
    /// only; no floating point is involved.
    pub fn to_decimal_string(&self, places: u32) -> String {
        let neg = self.num < 0;
        let int = self.num.unsigned_abs() / self.den.unsigned_abs();
        let mut rem = self.num.unsigned_abs() % self.den.unsigned_abs();
        let mut digits = String::new();
        let mut exact = rem == 0;
        if !exact {
            for _ in 0..places {
                rem *= 10;
                digits.push(char::from(b'0' + (rem / self.den.unsigned_abs()) as u8));
                rem %= self.den.unsigned_abs();
                if rem == 0 {
                    exact = true;
                    break;
                }
            }
        }
        while digits.ends_with('0') {
            digits.pop();
        }
        let mut s = String::new();
        if neg {
            s.push('-');
        }
        s.push_str(&int.to_string());
        if !digits.is_empty() {
            s.push('.');
            s.push_str(&digits);
        }
        if !exact {
            s.push('…');
        }
        s
    }
}

impl fmt::Display for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl fmt::Debug for Rat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Error returned when a string is not an exact rational literal.
#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid rational literal {0:?}: expected an integer, p/q, or a finite decimal")]
pub struct ParseRatError(pub String);

impl FromStr for Rat {
    type Err = ParseRatError;

    /// Accepts `"p/q"`, integers, and finite decimals (`"0.4"` parses to 2/5).
    fn from_str(s: &str) -> Result<Rat, ParseRatError> {
        let t = s.trim();
        let bad = || ParseRatError(s.to_string());
        if let Some((p, q)) = t.split_once('/') {
            let num: i128 = p.trim().parse().map_err(|_| bad())?;
            let den: i128 = q.trim().parse().map_err(|_| bad())?;
            if den == 0 {
                return Err(bad());
            }
            return Ok(Rat::new(num, den));
        }
        if let Some((int_part, frac_part)) = t.split_once('.') {
            if frac_part.is_empty() || !frac_part.bytes().all(|b| b.is_ascii_digit()) {
                return Err(bad());
            }
            let negative = int_part.starts_with('-');
            let int: i128 = if int_part == "-" || int_part.is_empty() {
                0
            } else {
                int_part.parse().map_err(|_| bad())?
            };
            let scale = 10i128
                .checked_pow(frac_part.len() as u32)
                .ok_or_else(bad)?;
            let frac: i128 = frac_part.parse().map_err(|_| bad())?;
            let magnitude = checked(int.unsigned_abs().checked_mul(scale as u128).and_then(
                |v| {
                    let v = v.checked_add(frac as u128)?;
                    i128::try_from(v).ok()
                },
            ));
            let num = if negative { -magnitude } else { magnitude };
            return Ok(Rat::new(num, scale));
        }
        let num: i128 = t.parse().map_err(|_| bad())?;
        Ok(Rat { num, den: 1 })
    }
}

impl PartialOrd for Rat {
    fn partial_cmp(&self, other: &Rat) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Rat {
    fn cmp(&self, other: &Rat) -> Ordering {
        // Denominators are positive, so cross-multiplication preserves order.
        let lhs = checked(self.num.checked_mul(other.den));
        let rhs = checked(other.num.checked_mul(self.den));
        lhs.cmp(&rhs)
    }
}

impl Add for Rat {
    type Output = Rat;
    fn add(self, rhs: Rat) -> Rat {
        let num = checked(
            self.num
                .checked_mul(rhs.den)
                .and_then(|a| rhs.num.checked_mul(self.den).and_then(|b| a.checked_add(b))),
        );
        Rat::new(num, checked(self.den.checked_mul(rhs.den)))
    }
}

impl Sub for Rat {
    type Output = Rat;
    fn sub(self, rhs: Rat) -> Rat {
        self + (-rhs)
    }
}

impl Mul for Rat {
    type Output = Rat;
    fn mul(self, rhs: Rat) -> Rat {
        // Cross-reduce first to keep intermediates small.
        let g1 = gcd(self.num.unsigned_abs(), rhs.den.unsigned_abs()).max(1) as i128;
        let g2 = gcd(rhs.num.unsigned_abs(), self.den.unsigned_abs()).max(1) as i128;
        let num = checked((self.num / g1).checked_mul(rhs.num / g2));
        let den = checked((self.den / g2).checked_mul(rhs.den / g1));
        Rat { num, den }
    }
}

impl Div for Rat {
    type Output = Rat;
    fn div(self, rhs: Rat) -> Rat {
        self * rhs.recip()
    }
}

impl Neg for Rat {
    type Output = Rat;
    fn neg(self) -> Rat {
        Rat {
            num: -self.num,
            den: self.den,
        }
    }
}

impl AddAssign for Rat {
    fn add_assign(&mut self, rhs: Rat) {
        *self = *self + rhs;
    }
}

impl SubAssign for Rat {
    fn sub_assign(&mut self, rhs: Rat) {
        *self = *self - rhs;
    }
}

impl Sum for Rat {
    fn sum<I: Iterator<Item = Rat>>(iter: I) -> Rat {
        iter.fold(Rat::ZERO, |acc, x| acc + x)
    }
}

impl From<i64> for Rat {
    fn from(n: i64) -> Rat {
        Rat::from_int(n)
    }
}

impl Serialize for Rat {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for Rat {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Rat, D::Error> {
        struct V;
        impl serde::de::Visitor<'_> for V {
            type Value = Rat;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("an exact rational as a string (\"p/q\", integer, or finite decimal) or an integer")
            }
            fn visit_str<E: serde::de::Error>(self, v: &str) -> Result<Rat, E> {
                v.parse().map_err(serde::de::Error::custom)
            }
            fn visit_i64<E: serde::de::Error>(self, v: i64) -> Result<Rat, E> {
                Ok(Rat::from_int(v))
            }
            fn visit_u64<E: serde::de::Error>(self, v: u64) -> Result<Rat, E> {
                i128::try_from(v)
                    .map(|n| Rat { num: n, den: 1 })
                    .map_err(serde::de::Error::custom)
            }
            fn visit_f64<E: serde::de::Error>(self, _: f64) -> Result<Rat, E> {
                Err(serde::de::Error::custom(
                    "floating point literals are rejected; write the rational as a string",
                ))
            }
        }
        deserializer.deserialize_any(V)
    }
}

/// Shorthand used throughout the tests: `rat(7, 2)` or `rat(5, 1)`.
pub fn rat(num: i128, den: i128) -> Rat {
    Rat::new(num, den)
}
