//! `%g`-style number formatting with a fixed count of significant digits.

/// Formats `x` with `digits` significant digits, choosing fixed or
/// exponent notation like C's `%.*g` and trimming trailing zeros.
pub fn format_significant(x: f64, digits: usize) -> String {
    let digits = digits.max(1);
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent form");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -5 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{}{:02}", trim_zeros(mantissa), sign, exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{:.*}", decimals, x)).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

#[cfg(test)]
mod tests {
    use super::format_significant as g;

    #[test]
    fn matches_printf_g() {
        assert_eq!(g(2.0, 9), "2");
        assert_eq!(g(0.25, 17), "0.25");
        assert_eq!(g(1.0 + 1e-8, 9), "1.00000001");
        assert_eq!(g(0.1, 17), "0.10000000000000001");
        assert_eq!(g(1.7782794100389228e-4, 9), "0.000177827941");
        assert_eq!(g(1.5e-7, 9), "1.5e-07");
        assert_eq!(g(-123456789012.0, 9), "-1.23456789e+11");
        assert_eq!(g(99999.99999, 5), "1e+05");
        assert_eq!(g(-0.0, 9), "0");
    }

    #[test]
    fn seventeen_digits_round_trip() {
        for x in [std::f64::consts::PI, -1e-300, 6.02214076e23, 0.3, 1.0 / 3.0] {
            assert_eq!(g(x, 17).parse::<f64>().unwrap(), x);
        }
    }
}
