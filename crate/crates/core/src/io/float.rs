//! 17-significant-digit decimal formatting, exact under round-trip.

/// Formats `v` like C's `%.17g`, except that negative zero is written
/// `-0.0` so JSON readers keep its sign.
pub fn fmt_g17(v: f64) -> String {
    if v == 0.0 {
        return if v.is_sign_negative() { "-0.0".into() } else { "0".into() };
    }
    if !v.is_finite() {
        return format!("{v}");
    }
    let sci = format!("{:.16e}", v);
    let (mant, exp) = sci.split_once('e').expect("scientific format");
    let exp: i32 = exp.parse().expect("integer exponent");
    let (sign, mant) = match mant.strip_prefix('-') {
        Some(m) => ("-", m),
        None => ("", mant),
    };
    let digits: String = mant.chars().filter(|c| *c != '.').collect();
    if !(-5..17).contains(&exp) {
        let m = trim_fraction(mant);
        return format!("{sign}{m}e{exp}");
    }
    if exp >= 0 {
        let split = exp as usize + 1;
        let (int, frac) = digits.split_at(split);
        let frac = frac.trim_end_matches('0');
        if frac.is_empty() {
            format!("{sign}{int}")
        } else {
            format!("{sign}{int}.{frac}")
        }
    } else {
        let zeros = "0".repeat((-exp - 1) as usize);
        format!("{sign}0.{zeros}{}", digits.trim_end_matches('0'))
    }
}

fn trim_fraction(m: &str) -> &str {
    if m.contains('.') {
        m.trim_end_matches('0').trim_end_matches('.')
    } else {
        m
    }
}

/// Comma-separated list of [`fmt_g17`] values.
pub fn join_g17(values: impl IntoIterator<Item = f64>, sep: &str) -> String {
    values.into_iter().map(fmt_g17).collect::<Vec<_>>().join(sep)
}
