//! On-disk model format: `{"w": [...], "bias": b, "q": q}`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Halfspace, Vector};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelFile {
    pub w: Vec<f64>,
    #[serde(default)]
    pub bias: f64,
    /// Dual exponent of the norm the weights were constrained in, if any.
    #[serde(default, skip_serializing_if = "Option::is_none", with = "opt_exponent")]
    pub q: Option<f64>,
}

mod opt_exponent {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    struct Wrap(#[serde(with = "crate::norm::exponent_serde")] f64);

    pub fn serialize<S: Serializer>(q: &Option<f64>, s: S) -> Result<S::Ok, S::Error> {
        q.map(Wrap).serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<f64>, D::Error> {
        Ok(Option::<Wrap>::deserialize(d)?.map(|w| w.0))
    }
}

impl ModelFile {
    pub fn from_halfspace(h: &Halfspace, q: Option<f64>) -> Self {
        Self { w: h.weights().to_vec(), bias: h.bias(), q }
    }

    pub fn halfspace(&self) -> Result<Halfspace> {
        Halfspace::new(Vector::new(self.w.clone())?, self.bias)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::InvalidInput(format!("bad model file {}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn json_shape() {
        let m = ModelFile { w: vec![1.0, -0.5], bias: 0.25, q: Some(f64::INFINITY) };
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(s, r#"{"w":[1.0,-0.5],"bias":0.25,"q":"inf"}"#);
        let back: ModelFile = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
        let bare: ModelFile = serde_json::from_str(r#"{"w":[1,2]}"#).unwrap();
        assert_eq!(bare.bias, 0.0);
        assert!(bare.q.is_none());
        assert!(ModelFile { w: vec![0.0], bias: 0.0, q: None }.halfspace().is_err());
    }
}
