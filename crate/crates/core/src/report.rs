//! Number formatting shared by every emitted report: 12 significant digits.

use serde::Serializer;
use serde_json::Value;

pub const SIG_DIGITS: usize = 12;

/// Rounds to 12 significant digits; non-finite values pass through.
pub fn round_sig(x: f64) -> f64 {
    if !x.is_finite() || x == 0.0 {
        return x;
    }
    format!("{:.*e}", SIG_DIGITS - 1, x).parse().unwrap_or(x)
}

/// Shortest form of [`round_sig`]`(x)`, in exponent notation outside
/// `[1e-5, 1e15)`; infinities become `inf`/`-inf`.
pub fn fmt_f64(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        let r = round_sig(x);
        if r == 0.0 {
            "0".into()
        } else if r.abs() < 1e-5 || r.abs() >= 1e15 {
            format!("{r:e}")
        } else {
            format!("{r}")
        }
    }
}

/// Serializes a float rounded to 12 digits, with infinities as `"inf"`.
pub fn ser_f64<S: Serializer>(x: &f64, ser: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_finite() {
        ser.serialize_f64(round_sig(*x))
    } else {
        ser.serialize_str(&fmt_f64(*x))
    }
}

/// [`ser_f64`] for optional fields.
pub fn ser_opt_f64<S: Serializer>(x: &Option<f64>, ser: S) -> std::result::Result<S::Ok, S::Error> {
    match x {
        Some(v) => ser_f64(v, ser),
        None => ser.serialize_none(),
    }
}

/// Rounds every float in a JSON tree to 12 significant digits.
pub fn round_json(v: Value) -> Value {
    match v {
        Value::Number(num) if num.is_f64() => {
            let x = num.as_f64().expect("f64 number");
            serde_json::Number::from_f64(round_sig(x)).map(Value::Number).unwrap_or(Value::Null)
        }
        Value::Array(items) => Value::Array(items.into_iter().map(round_json).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, x)| (k, round_json(x))).collect()),
        other => other,
    }
}

/// CSV cell: 12-digit float, infinities as an empty cell.
pub fn csv_f64(x: f64) -> String {
    if x.is_infinite() {
        String::new()
    } else {
        fmt_f64(x)
    }
}
