//! Number formatting for CSV, JSON and SVG output.

use serde_json::Value;

pub const SIGNIFICANT_DIGITS: usize = 6;

/// Marker for statistics that are undefined for the input.
pub const UNDEFINED: &str = "NA";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct Fmt {
    /// Shortest round-trip decimal instead of 6 significant digits.
    pub full_precision: bool,
}

impl Fmt {
    pub fn new(full_precision: bool) -> Self {
        Fmt { full_precision }
    }

    pub fn num(&self, x: f64) -> String {
        if self.full_precision {
            full(x)
        } else {
            general(x, SIGNIFICANT_DIGITS)
        }
    }

    pub fn opt(&self, x: Option<f64>) -> String {
        x.map(|v| self.num(v)).unwrap_or_else(|| UNDEFINED.to_string())
    }

    /// Rounds every float in a JSON tree unless full precision is on.
    pub fn json(&self, mut v: Value) -> Value {
        if !self.full_precision {
            round_json(&mut v, SIGNIFICANT_DIGITS);
        }
        v
    }
}

fn full(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else if x == 0.0 {
        "0".into()
    } else {
        format!("{x}")
    }
}

/// C `%.{digits}g`: fixed notation for exponents in `[-4, digits)`,
/// scientific otherwise, trailing zeros removed.
pub fn general(x: f64, digits: usize) -> String {
    if !x.is_finite() {
        return full(x);
    }
    if x == 0.0 {
        return "0".into();
    }
    let digits = digits.max(1);
    let sci = format!("{:.*e}", digits - 1, x);
    let (mantissa, exp) = sci.split_once('e').expect("exponent present");
    let exp: i32 = exp.parse().expect("integer exponent");
    if exp < -4 || exp >= digits as i32 {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", trim_zeros(mantissa), exp.abs())
    } else {
        let decimals = (digits as i32 - 1 - exp).max(0) as usize;
        trim_zeros(&format!("{x:.decimals$}")).to_string()
    }
}

fn trim_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// `x` rounded to `digits` significant digits.
pub fn round_sig(x: f64, digits: usize) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", digits.max(1) - 1, x).parse().unwrap_or(x)
}

fn round_json(v: &mut Value, digits: usize) {
    match v {
        Value::Number(n) if n.is_f64() => {
            let r = round_sig(n.as_f64().expect("f64 number"), digits);
            if let Some(num) = serde_json::Number::from_f64(r) {
                *n = num;
            }
        }
        Value::Array(items) => items.iter_mut().for_each(|x| round_json(x, digits)),
        Value::Object(map) => map.values_mut().for_each(|x| round_json(x, digits)),
        _ => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn general_matches_printf() {
        assert_eq!(general(0.781, 6), "0.781");
        assert_eq!(general(1.2458333333, 6), "1.24583");
        assert_eq!(general(123456.7, 6), "123457");
        assert_eq!(general(1234567.0, 6), "1.23457e+06");
        assert_eq!(general(0.0001, 6), "0.0001");
        assert_eq!(general(0.00001234, 6), "1.234e-05");
        assert_eq!(general(-2.5, 6), "-2.5");
        assert_eq!(general(100.0, 6), "100");
        assert_eq!(general(0.0, 6), "0");
        assert_eq!(general(999999.5, 6), "1e+06");
    }

    #[test]
    fn full_precision_round_trips() {
        let f = Fmt::new(true);
        for x in [0.1, 1.0 / 3.0, 6.465e-17, -2.0] {
            assert_eq!(f.num(x).parse::<f64>().unwrap(), x);
        }
        assert_eq!(Fmt::new(false).opt(None), "NA");
    }

    #[test]
    fn json_floats_rounded_integers_kept() {
        let v = Fmt::new(false).json(json!({"a": 1.0 / 3.0, "b": [2.0f64.sqrt()], "n": 74}));
        assert_eq!(v.to_string(), r#"{"a":0.333333,"b":[1.41421],"n":74}"#);
        let exact = Fmt::new(true).json(json!({"a": 1.0 / 3.0}));
        assert_eq!(exact["a"].as_f64().unwrap(), 1.0 / 3.0);
    }
}
