//! Versioned text format for trained models.
//!
//! ```text
//! imitlab-model 1
//! kind=mlp input_dim=16 num_classes=2 hidden_dim=8 params=154
//! -1.2345678901234567e-1
//! ...
//! ```
//!
//! One parameter per line, 17 significant digits, which round-trips every `f64`.

use thiserror::Error;

use super::{Architecture, Model};

pub const FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "imitlab-model";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelFormatError {
    #[error("unsupported model header {0:?}")]
    VersionMismatch(String),
    #[error("model file truncated: expected {expected} parameters, found {found}")]
    Truncated { expected: usize, found: usize },
    #[error("parameter count {declared} does not match dims (expected {expected})")]
    DimensionMismatch { declared: usize, expected: usize },
    #[error("malformed model file: {0}")]
    Malformed(String),
}

pub fn serialize_model(model: &Model) -> Vec<u8> {
    let hidden = match model.arch() {
        Architecture::Linear => 0,
        Architecture::Mlp { hidden_dim } => hidden_dim,
    };
    let mut out = format!(
        "{MAGIC} {FORMAT_VERSION}\nkind={} input_dim={} num_classes={} hidden_dim={} params={}\n",
        model.arch().name(),
        model.input_dim(),
        model.num_classes(),
        hidden,
        model.params().len()
    );
    for p in model.params() {
        out.push_str(&format!("{p:.16e}\n"));
    }
    out.into_bytes()
}

fn field<'a>(parts: &[(&'a str, &'a str)], key: &str) -> Result<&'a str, ModelFormatError> {
    parts
        .iter()
        .find(|(k, _)| *k == key)
        .map(|(_, v)| *v)
        .ok_or_else(|| ModelFormatError::Malformed(format!("missing `{key}`")))
}

fn number(parts: &[(&str, &str)], key: &str) -> Result<usize, ModelFormatError> {
    let raw = field(parts, key)?;
    raw.parse()
        .map_err(|_| ModelFormatError::Malformed(format!("`{key}` is not an integer: {raw:?}")))
}

pub fn deserialize_model(bytes: &[u8]) -> Result<Model, ModelFormatError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ModelFormatError::Malformed(e.to_string()))?;
    let mut lines = text.lines();
    let header = lines.next().unwrap_or("");
    if header != format!("{MAGIC} {FORMAT_VERSION}") {
        return Err(ModelFormatError::VersionMismatch(header.to_string()));
    }
    let dims_line = lines
        .next()
        .ok_or(ModelFormatError::Truncated { expected: 0, found: 0 })?;
    let parts: Vec<(&str, &str)> = dims_line
        .split_whitespace()
        .map(|kv| kv.split_once('=').ok_or_else(|| ModelFormatError::Malformed(format!("bad field {kv:?}"))))
        .collect::<Result<_, _>>()?;
    let input_dim = number(&parts, "input_dim")?;
    let num_classes = number(&parts, "num_classes")?;
    let hidden_dim = number(&parts, "hidden_dim")?;
    let declared = number(&parts, "params")?;
    let arch = match field(&parts, "kind")? {
        "linear" => Architecture::Linear,
        "mlp" => Architecture::Mlp { hidden_dim },
        other => return Err(ModelFormatError::Malformed(format!("unknown kind {other:?}"))),
    };
    let expected = Model::param_count(arch, input_dim, num_classes)
        .map_err(|e| ModelFormatError::Malformed(e.to_string()))?;
    if declared != expected {
        return Err(ModelFormatError::DimensionMismatch { declared, expected });
    }

    let values: Vec<&str> = lines.filter(|l| !l.trim().is_empty()).collect();
    if values.len() < declared {
        return Err(ModelFormatError::Truncated {
            expected: declared,
            found: values.len(),
        });
    }
    if values.len() > declared {
        return Err(ModelFormatError::DimensionMismatch {
            declared: values.len(),
            expected,
        });
    }
    let params = values
        .iter()
        .map(|v| v.trim().parse::<f64>().map_err(|_| ModelFormatError::Malformed(format!("bad parameter {v:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    Model::from_params(arch, input_dim, num_classes, params).map_err(|e| ModelFormatError::Malformed(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::FeatureVector;
    use proptest::prelude::*;

    fn sample_model() -> Model {
        let arch = Architecture::Mlp { hidden_dim: 2 };
        let n = Model::param_count(arch, 3, 2).unwrap();
        let params = (0..n).map(|i| (i as f64 * 0.731).sin() / 3.0).collect();
        Model::from_params(arch, 3, 2, params).unwrap()
    }

    #[test]
    fn corrupt_header_is_version_mismatch() {
        let mut bytes = serialize_model(&sample_model());
        bytes[14] = b'9';
        assert!(matches!(deserialize_model(&bytes), Err(ModelFormatError::VersionMismatch(_))));
        assert!(matches!(deserialize_model(b"garbage\n"), Err(ModelFormatError::VersionMismatch(_))));
    }

    #[test]
    fn truncated_input() {
        let text = String::from_utf8(serialize_model(&sample_model())).unwrap();
        let cut: Vec<&str> = text.lines().take(5).collect();
        assert!(matches!(
            deserialize_model(cut.join("\n").as_bytes()),
            Err(ModelFormatError::Truncated { found: 3, .. })
        ));
    }

    #[test]
    fn dimension_mismatch() {
        let text = String::from_utf8(serialize_model(&sample_model())).unwrap();
        let bad = text.replace("input_dim=3", "input_dim=4");
        assert!(matches!(
            deserialize_model(bad.as_bytes()),
            Err(ModelFormatError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn zero_linear_model_predicts_identically() {
        let m = Model::zeros(Architecture::Linear, 4, 3).unwrap();
        let back = deserialize_model(&serialize_model(&m)).unwrap();
        for i in 0..4 {
            let x = FeatureVector::one_hot(4, i);
            assert_eq!(m.predict(&x).unwrap(), back.predict(&x).unwrap());
        }
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            params in prop::collection::vec(prop::num::f64::NORMAL | prop::num::f64::SUBNORMAL | prop::num::f64::ZERO, 15),
        ) {
            let m = Model::from_params(Architecture::Linear, 4, 3, params).unwrap();
            let back = deserialize_model(&serialize_model(&m)).unwrap();
            prop_assert_eq!(back.arch(), m.arch());
            for (a, b) in m.params().iter().zip(back.params()) {
                prop_assert_eq!(a.to_bits(), b.to_bits());
            }
        }
    }
}
