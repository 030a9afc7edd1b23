pub mod connection;
pub mod curvature;
pub mod error;
pub mod field;
pub mod gait;
pub mod linkage;
pub mod optimize;
pub mod render;
pub mod se2;
pub mod simulate;
pub mod verify;

pub use error::{Error, Result};

/// JSON writes non-finite numbers as `null`; read them back as NaN.
pub(crate) fn nan_or_number<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    use serde::Deserialize;
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}
