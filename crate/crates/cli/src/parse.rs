//! Flag value parsers.

use std::f64::consts::PI;

/// Parses an angle in radians. Accepts decimals and multiples or fractions
/// of pi: `pi`, `pi/2`, `3pi/4`, `2*pi/3`, `-pi/4`, `0.5pi`.
pub fn angle(text: &str) -> Result<f64, String> {
    let t: String = text
        .trim()
        .to_ascii_lowercase()
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect();
    if let Ok(x) = t.parse::<f64>() {
        return if x.is_finite() {
            Ok(x)
        } else {
            Err(format!("angle `{text}` is not finite"))
        };
    }
    let bad = || format!("cannot parse angle `{text}` (try 0.5, pi/2, 3pi/4)");
    let (num, den) = match t.split_once('/') {
        Some((n, d)) => (n, Some(d)),
        None => (t.as_str(), None),
    };
    let coeff = num.strip_suffix("pi").ok_or_else(bad)?;
    let coeff = coeff.strip_suffix('*').unwrap_or(coeff);
    let k = match coeff {
        "" | "+" => 1.0,
        "-" => -1.0,
        c => c.parse::<f64>().map_err(|_| bad())?,
    };
    let d = match den {
        None => 1.0,
        Some(d) => d.parse::<f64>().map_err(|_| bad())?,
    };
    if d == 0.0 || !d.is_finite() || !k.is_finite() {
        return Err(bad());
    }
    Ok(k * PI / d)
}

/// Comma-separated list, empty items dropped.
pub fn list(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}
