//! Deserialization of `{"type": ..., ...}` specs that keeps the key path.
//!
//! serde buffers internally tagged enums before dispatching, which hides the
//! position of a bad key from `serde_path_to_error`. Each spec is instead read
//! as `{tag: rest}` through an externally tagged mirror; the inner path rides
//! out in the message as `@a.b: message` and `io` splices it onto the outer path.

use serde::de::{Deserializer, Error as _};
use serde::Deserialize;
use serde_json::{Map, Value};

pub(crate) fn split<'de, D: Deserializer<'de>>(d: D) -> Result<Value, D::Error> {
    let mut map = Map::deserialize(d)?;
    let tag = match map.remove("type") {
        Some(Value::String(t)) => t,
        Some(other) => return Err(D::Error::custom(format!("`type` must be a string, got {other}"))),
        None => return Err(D::Error::missing_field("type")),
    };
    Ok(Value::Object(Map::from_iter([(tag, Value::Object(map))])))
}

/// Splits `@path: message` into its parts.
pub(crate) fn nested_path(message: &str) -> Option<(&str, &str)> {
    message.strip_prefix('@')?.split_once(": ")
}

pub(crate) fn error<E: serde::de::Error>(path: serde_path_to_error::Path, inner: serde_json::Error) -> E {
    let path = path.to_string();
    // the first segment is the variant name
    let outer = path.split_once('.').map(|(_, rest)| rest).unwrap_or("");
    let message = inner.to_string();
    let (outer, message) = match nested_path(&message) {
        Some((sub, m)) if outer.is_empty() => (sub.to_string(), m.to_string()),
        Some((sub, m)) => (format!("{outer}.{sub}"), m.to_string()),
        None => (outer.to_string(), message.clone()),
    };
    if outer.is_empty() {
        E::custom(message)
    } else {
        E::custom(format!("@{outer}: {message}"))
    }
}

macro_rules! tagged_deserialize {
    ($ty:ty, $mirror:ty) => {
        impl<'de> serde::Deserialize<'de> for $ty {
            fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
                let external = crate::fields::tagged::split(d)?;
                let mut track = serde_path_to_error::Track::new();
                let result = <$mirror>::deserialize(serde_path_to_error::Deserializer::new(external, &mut track));
                result.map_err(|e| crate::fields::tagged::error(track.path(), e))
            }
        }
    };
}

pub(crate) use tagged_deserialize;
