//! Byte-stable JSON: keys sorted (serde_json's default map), every float in
//! `{:.16e}` form, i.e. 17 significant digits.

use std::io;

use serde::Serialize;
use serde_json::ser::{Formatter, Serializer};

struct Canonical;

impl Formatter for Canonical {
    fn write_f64<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(w, "{value:.16e}")
        } else {
            w.write_all(b"null")
        }
    }

    fn write_f32<W: ?Sized + io::Write>(&mut self, w: &mut W, value: f32) -> io::Result<()> {
        self.write_f64(w, f64::from(value))
    }
}

/// `value` round-tripped through `serde_json::Value` (for key ordering) and
/// written canonically, with a trailing newline.
pub fn to_string<T: Serialize>(value: &T) -> String {
    let v = serde_json::to_value(value).expect("report types serialise to JSON");
    let mut buf = Vec::new();
    let mut ser = Serializer::with_formatter(&mut buf, Canonical);
    v.serialize(&mut ser).expect("writing to a Vec cannot fail");
    buf.push(b'\n');
    String::from_utf8(buf).expect("serde_json emits UTF-8")
}

/// CSV float cell.
pub fn float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        "NaN".into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn sorted_keys_and_fixed_floats() {
        let s = to_string(&json!({"b": 1.5, "a": [0.1, 2], "c": {"z": -0.0, "y": null}}));
        assert_eq!(
            s,
            "{\"a\":[1.0000000000000001e-1,2],\"b\":1.5000000000000000e0,\"c\":{\"y\":null,\"z\":-0.0000000000000000e0}}\n"
        );
        let back: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(back["a"][0].as_f64(), Some(0.1));
    }

    #[test]
    fn float_cells() {
        assert_eq!(float(8.0), "8.0000000000000000e0");
        assert_eq!(float(f64::NAN), "NaN");
        assert_eq!(float(1.0 / 3.0).parse::<f64>().unwrap(), 1.0 / 3.0);
    }
}
