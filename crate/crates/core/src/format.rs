//! Decimal rendering for reports.

use rug::float::Round;
use rug::Float;

/// Scientific decimal string with `digits` significant digits.
pub fn decimal(v: &Float, digits: usize) -> String {
    if v.is_zero() {
        return "0".into();
    }
    let s = v.to_string_radix_round(10, Some(digits.max(1)), Round::Nearest);
    tidy(&s)
}

/// Fixed notation for exponents in `[-6, 21)`, otherwise `d.ddde±x`, with
/// trailing mantissa zeros removed.
fn tidy(s: &str) -> String {
    let (mant, exp) = match s.split_once('e') {
        Some((m, e)) => (m, e.parse::<i64>().unwrap_or(0)),
        None => (s, 0),
    };
    let (sign, mant) = match mant.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mant),
    };
    let (int, frac) = mant.split_once('.').unwrap_or((mant, ""));
    let digits: String = format!("{int}{frac}");
    // value = 0.digits * 10^point
    let point = exp + int.len() as i64;
    let digits = digits.trim_end_matches('0');
    let digits = if digits.is_empty() { "0" } else { digits };
    let lead = digits.len() - digits.trim_start_matches('0').len();
    let digits = &digits[lead..];
    let point = point - lead as i64;
    if digits.is_empty() {
        return "0".into();
    }
    if (-5..=21).contains(&point) {
        let body = if point <= 0 {
            format!("0.{}{}", "0".repeat((-point) as usize), digits)
        } else if point as usize >= digits.len() {
            format!("{}{}", digits, "0".repeat(point as usize - digits.len()))
        } else {
            let (a, b) = digits.split_at(point as usize);
            format!("{a}.{b}")
        };
        return format!("{sign}{body}");
    }
    let (a, b) = digits.split_at(1);
    let m = if b.is_empty() {
        a.to_string()
    } else {
        format!("{a}.{b}")
    };
    format!("{sign}{m}e{}", point - 1)
}
