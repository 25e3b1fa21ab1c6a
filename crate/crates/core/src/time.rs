//! Exact rational time values.
//!
//! Dwell times and thresholds are compared exactly (sums of visits against a
//! threshold), so they are kept as reduced `i64` rationals rather than floats.
//! Input files carry decimals, which convert exactly; arithmetic widens through
//! `i128` and panics with a clear message if a value leaves the 64-bit range.

use std::fmt;
use std::ops::{Add, AddAssign, Sub};
use std::str::FromStr;

use num_integer::Integer;
use num_rational::Ratio;

/// An exact non-negative rational amount of time.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Debug, Default)]
pub struct Time(Ratio<i64>);

impl Time {
    pub const ZERO: Time = Time(Ratio::new_raw(0, 1));

    /// Builds `num/den` in reduced form. Panics if `den == 0`.
    pub fn new(num: i64, den: i64) -> Time {
        Time(Ratio::new(num, den))
    }

    pub fn from_int(v: i64) -> Time {
        Time(Ratio::from_integer(v))
    }

    pub fn ratio(&self) -> Ratio<i64> {
        self.0
    }

    pub fn from_ratio(r: Ratio<i64>) -> Time {
        Time(r)
    }

    pub fn numer(&self) -> i64 {
        *self.0.numer()
    }

    pub fn denom(&self) -> i64 {
        *self.0.denom()
    }

    pub fn is_zero(&self) -> bool {
        self.numer() == 0
    }

    pub fn is_positive(&self) -> bool {
        self.numer() > 0
    }

    pub fn to_f64(&self) -> f64 {
        self.numer() as f64 / self.denom() as f64
    }

    /// `self * num / den`, exact. Panics if `den == 0` or the result overflows.
    pub fn mul_frac(&self, num: i64, den: i64) -> Time {
        assert!(den != 0, "zero denominator");
        let n = self.numer() as i128 * num as i128;
        let d = self.denom() as i128 * den as i128;
        Time(reduce_i128(n, d))
    }

    pub fn checked_add(&self, other: &Time) -> Option<Time> {
        let n = self.numer() as i128 * other.denom() as i128
            + other.numer() as i128 * self.denom() as i128;
        let d = self.denom() as i128 * other.denom() as i128;
        let g = n.gcd(&d);
        let (n, d) = if g == 0 { (0, 1) } else { (n / g, d / g) };
        let num = i64::try_from(n).ok()?;
        let den = i64::try_from(d).ok()?;
        Some(Time(Ratio::new_raw(num, den)))
    }

    /// Renders as an exact decimal when the denominator is of the form
    /// 2^a·5^b; such values round-trip through [`Time::from_str`].
    fn decimal_repr(&self) -> Option<String> {
        let mut den = self.denom();
        let mut twos = 0u32;
        let mut fives = 0u32;
        while den % 2 == 0 {
            den /= 2;
            twos += 1;
        }
        while den % 5 == 0 {
            den /= 5;
            fives += 1;
        }
        if den != 1 {
            return None;
        }
        // scale numerator so the denominator becomes 10^digits
        let digits = twos.max(fives);
        let scale = 10i128.pow(digits) / self.denom() as i128;
        let scaled = self.numer() as i128 * scale;
        if digits == 0 {
            return Some(scaled.to_string());
        }
        let sign = if scaled < 0 { "-" } else { "" };
        let abs = scaled.unsigned_abs();
        let base = 10u128.pow(digits);
        let (int, frac) = (abs / base, abs % base);
        Some(format!(
            "{sign}{int}.{frac:0width$}",
            width = digits as usize
        ))
    }
}

fn reduce_i128(n: i128, d: i128) -> Ratio<i64> {
    assert!(d != 0, "zero denominator");
    let (n, d) = if d < 0 { (-n, -d) } else { (n, d) };
    let g = n.gcd(&d);
    let (n, d) = if g == 0 { (0, 1) } else { (n / g, d / g) };
    let num = i64::try_from(n).expect("time arithmetic overflowed 64-bit range");
    let den = i64::try_from(d).expect("time arithmetic overflowed 64-bit range");
    Ratio::new_raw(num, den)
}

impl Add for Time {
    type Output = Time;

    fn add(self, other: Time) -> Time {
        self.checked_add(&other)
            .expect("time arithmetic overflowed 64-bit range")
    }
}

impl AddAssign for Time {
    fn add_assign(&mut self, other: Time) {
        *self = *self + other;
    }
}

impl Sub for Time {
    type Output = Time;

    fn sub(self, other: Time) -> Time {
        let n = self.numer() as i128 * other.denom() as i128
            - other.numer() as i128 * self.denom() as i128;
        let d = self.denom() as i128 * other.denom() as i128;
        Time(reduce_i128(n, d))
    }
}

impl fmt::Display for Time {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.decimal_repr() {
            Some(s) => f.write_str(&s),
            None => write!(f, "{}/{}", self.numer(), self.denom()),
        }
    }
}

impl FromStr for Time {
    type Err = String;

    /// Parses a plain decimal (`"30"`, `"2.5"`, `"-0.125"`), converted exactly.
    fn from_str(s: &str) -> Result<Time, String> {
        let s = s.trim();
        if s.is_empty() {
            return Err("empty time value".into());
        }
        let (sign, body) = match s.as_bytes()[0] {
            b'-' => (-1i128, &s[1..]),
            b'+' => (1, &s[1..]),
            _ => (1, s),
        };
        let (int_part, frac_part) = match body.split_once('.') {
            Some((i, f)) => (i, f),
            None => (body, ""),
        };
        if int_part.is_empty() && frac_part.is_empty() {
            return Err(format!("not a decimal number: {s:?}"));
        }
        if !int_part.bytes().all(|b| b.is_ascii_digit())
            || !frac_part.bytes().all(|b| b.is_ascii_digit())
        {
            return Err(format!("not a decimal number: {s:?}"));
        }
        if frac_part.len() > 18 {
            return Err(format!(
                "too many fractional digits (max 18): {s:?}"
            ));
        }
        let mut num: i128 = 0;
        for b in int_part.bytes().chain(frac_part.bytes()) {
            num = num
                .checked_mul(10)
                .and_then(|v| v.checked_add((b - b'0') as i128))
                .ok_or_else(|| format!("time value out of range: {s:?}"))?;
        }
        let den = 10i128.pow(frac_part.len() as u32);
        let g = num.gcd(&den);
        let (num, den) = (sign * num / g, den / g);
        let num = i64::try_from(num).map_err(|_| format!("time value out of range: {s:?}"))?;
        let den = i64::try_from(den).map_err(|_| format!("time value out of range: {s:?}"))?;
        Ok(Time(Ratio::new_raw(num, den)))
    }
}

impl std::iter::Sum for Time {
    fn sum<I: Iterator<Item = Time>>(iter: I) -> Time {
        iter.fold(Time::ZERO, |a, b| a + b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_decimals_exactly() {
        assert_eq!("30".parse::<Time>().unwrap(), Time::from_int(30));
        assert_eq!("2.5".parse::<Time>().unwrap(), Time::new(5, 2));
        assert_eq!("0.001".parse::<Time>().unwrap(), Time::new(1, 1000));
        assert_eq!("-0.125".parse::<Time>().unwrap(), Time::new(-1, 8));
        assert!("1e3".parse::<Time>().is_err());
        assert!("".parse::<Time>().is_err());
        assert!("1.2.3".parse::<Time>().is_err());
    }

    #[test]
    fn display_round_trips_decimals() {
        for s in ["30", "2.5", "0.001", "-0.125", "0"] {
            let t: Time = s.parse().unwrap();
            assert_eq!(t.to_string().parse::<Time>().unwrap(), t);
        }
        // non-decimal denominators fall back to num/den
        assert_eq!(Time::new(1, 3).to_string(), "1/3");
    }

    #[test]
    fn exact_sums() {
        let a: Time = "0.1".parse().unwrap();
        let b: Time = "0.2".parse().unwrap();
        assert_eq!(a + b, Time::new(3, 10));
        assert_eq!(Time::new(1, 3) + Time::new(1, 6), Time::new(1, 2));
    }

    #[test]
    #[should_panic(expected = "overflowed")]
    fn overflow_is_loud() {
        let big = Time::new(i64::MAX, 3);
        let _ = big + big;
    }
}
