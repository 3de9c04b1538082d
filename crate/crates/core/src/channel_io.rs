//! JSON form of a Kraus channel:
//!
//! ```json
//! {"dim": 2, "kraus": [[[re, im], ...], ...], "name": "bit-flip", "params": {"p": 0.1}}
//! ```
//!
//! Each operator is a flat row-major list of `[re, im]` pairs. Numbers are
//! written with 17 significant digits so that a round trip is exact.

use std::fmt::Write as _;

use serde_json::Value;

use crate::channels::{KrausChannel, TP_TOL_LOAD};
use crate::error::{Error, Result};
use crate::matrix::{c, CMatrix};

pub fn channel_from_json(text: &str) -> Result<KrausChannel> {
    let root: Value = serde_json::from_str(text)?;
    let obj = root
        .as_object()
        .ok_or_else(|| Error::Schema("top level must be an object".into()))?;
    let dim = obj
        .get("dim")
        .and_then(Value::as_u64)
        .ok_or_else(|| Error::Schema("\"dim\" must be a positive integer".into()))?
        as usize;
    if dim == 0 {
        return Err(Error::Schema("\"dim\" must be a positive integer".into()));
    }
    if dim > crate::matrix::MAX_DIM {
        return Err(Error::DimensionTooLarge(dim));
    }
    let ops = obj
        .get("kraus")
        .and_then(Value::as_array)
        .ok_or_else(|| Error::Schema("\"kraus\" must be an array of operators".into()))?;
    let mut kraus = Vec::with_capacity(ops.len());
    for (index, op) in ops.iter().enumerate() {
        let entries = op
            .as_array()
            .ok_or_else(|| Error::Schema(format!("Kraus operator {index} must be an array")))?;
        if entries.len() != dim * dim {
            return Err(Error::KrausEntryCount {
                index,
                expected: dim * dim,
                found: entries.len(),
            });
        }
        let data = entries
            .iter()
            .map(|e| {
                parse_complex(e).ok_or_else(|| {
                    Error::Schema(format!(
                        "Kraus operator {index} has an entry that is not [re, im]"
                    ))
                })
            })
            .collect::<Result<Vec<_>>>()?;
        kraus.push(CMatrix::from_vec(dim, dim, data)?);
    }
    let mut channel = KrausChannel::with_tolerance(dim, kraus, TP_TOL_LOAD)?;
    match obj.get("name") {
        None | Some(Value::Null) => {}
        Some(Value::String(s)) => channel = channel.named(s),
        Some(_) => return Err(Error::Schema("\"name\" must be a string".into())),
    }
    match obj.get("params") {
        None | Some(Value::Null) => {}
        Some(Value::Object(m)) => channel = channel.with_params(m.clone()),
        Some(_) => return Err(Error::Schema("\"params\" must be an object".into())),
    }
    Ok(channel)
}

fn parse_complex(v: &Value) -> Option<num_complex::Complex64> {
    match v.as_array()?.as_slice() {
        [re, im] => Some(c(re.as_f64()?, im.as_f64()?)),
        _ => None,
    }
}

pub fn channel_to_json(channel: &KrausChannel) -> String {
    let mut out = format!("{{\n  \"dim\": {},\n  \"kraus\": [", channel.dim());
    for (k, op) in channel.kraus().iter().enumerate() {
        out.push_str(if k == 0 { "\n    [" } else { ",\n    [" });
        for (i, z) in op.as_slice().iter().enumerate() {
            if i > 0 {
                out.push_str(", ");
            }
            let _ = write!(out, "[{}, {}]", fmt_f64(z.re), fmt_f64(z.im));
        }
        out.push(']');
    }
    out.push_str("\n  ]");
    if let Some(name) = channel.name() {
        let _ = write!(out, ",\n  \"name\": {}", Value::from(name));
    }
    if !channel.params().is_empty() {
        let params = Value::Object(channel.params().clone());
        let _ = write!(out, ",\n  \"params\": {params}");
    }
    out.push_str("\n}\n");
    out
}

/// 17 significant digits in scientific notation.
pub(crate) fn fmt_f64(x: f64) -> String {
    if x == 0.0 {
        // keeps the sign of negative zero
        return if x.is_sign_negative() {
            "-0.0".into()
        } else {
            "0.0".into()
        };
    }
    format!("{x:.16e}")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channels::{bit_flip, depolarizing};

    #[test]
    fn round_trip_is_exact() {
        let ch = depolarizing(0.3).unwrap();
        let back = channel_from_json(&channel_to_json(&ch)).unwrap();
        assert_eq!(back.dim(), 2);
        for (a, b) in ch.kraus().iter().zip(back.kraus()) {
            assert_eq!(a.as_slice(), b.as_slice());
        }
        assert_eq!(back.name(), Some("depolarizing"));
        assert_eq!(back.params().get("p").and_then(Value::as_f64), Some(0.3));
    }

    #[test]
    fn hand_written_bit_flip() {
        let text = r#"{
            "dim": 2,
            "kraus": [
                [[0.8660254037844386, 0], [0, 0], [0, 0], [0.8660254037844386, 0]],
                [[0, 0], [0.5, 0], [0.5, 0], [0, 0]]
            ]
        }"#;
        let ch = channel_from_json(text).unwrap();
        let reference = bit_flip(0.25).unwrap();
        for (a, b) in ch.kraus().iter().zip(reference.kraus()) {
            assert!(a.max_abs_diff(b) < 1e-15);
        }
        assert_eq!(ch.name(), None);
    }

    #[test]
    fn entry_count_error_names_index() {
        let text = r#"{"dim": 2, "kraus": [[[1,0],[0,0],[0,0],[1,0]], [[0,0],[0,0],[0,0]]]}"#;
        match channel_from_json(text) {
            Err(Error::KrausEntryCount {
                index,
                expected,
                found,
            }) => {
                assert_eq!((index, expected, found), (1, 4, 3));
            }
            other => panic!("unexpected result {other:?}"),
        }
    }

    #[test]
    fn tp_violation_reports_defect() {
        let text = r#"{"dim": 2, "kraus": [[[1,0],[0,0],[0,0],[0.9,0]]]}"#;
        match channel_from_json(text) {
            Err(Error::NotTracePreserving { defect, .. }) => assert!((defect - 0.19).abs() < 1e-12),
            other => panic!("unexpected result {other:?}"),
        }
        let slightly_off = r#"{"dim": 1, "kraus": [[[1.000000001,0]]]}"#;
        assert!(channel_from_json(slightly_off).is_ok());
    }

    #[test]
    fn schema_errors() {
        assert!(matches!(channel_from_json("[]"), Err(Error::Schema(_))));
        assert!(matches!(
            channel_from_json(r#"{"dim": 2}"#),
            Err(Error::Schema(_))
        ));
        assert!(matches!(
            channel_from_json(r#"{"dim": 1, "kraus": [[[1,0,0]]]}"#),
            Err(Error::Schema(_))
        ));
        assert!(matches!(channel_from_json("{"), Err(Error::Json(_))));
    }

    #[test]
    fn seventeen_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(0.1).parse::<f64>().unwrap(), 0.1);
    }
}
