use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::SpectrumResult;
use crate::error::Result;

/// SHA-256 of the canonical JSON form of a configuration.
pub fn config_hash<T: Serialize>(config: &T) -> Result<String> {
    let value = serde_json::to_value(config)?;
    let bytes = serde_json::to_vec(&value)?;
    Ok(hex::encode(Sha256::digest(bytes)))
}

/// One row of a spectrum table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumRow {
    pub config_hash: String,
    pub h: Option<f64>,
    /// Diffusion strength or tube radius, depending on the sweep.
    pub param: f64,
    pub lambda0: f64,
    pub lambda1: f64,
    pub residual: f64,
    /// `lambda1 / param` for generator spectra.
    pub rho: Option<f64>,
}

impl SpectrumRow {
    pub fn new(hash: &str, param: f64, spec: &SpectrumResult, rho: Option<f64>) -> Self {
        Self {
            config_hash: hash.to_owned(),
            h: spec.h,
            param,
            lambda0: spec.eigenvalues[0],
            lambda1: spec.lambda1(),
            residual: spec.max_residual(),
            rho,
        }
    }

    pub const CSV_HEADER: &'static str = "config_hash,h,param,lambda0,lambda1,residual,rho";

    pub fn to_csv(&self) -> String {
        let opt = |x: Option<f64>| x.map_or(String::new(), |v| format!("{v:.12e}"));
        format!(
            "{},{},{:.12e},{:.12e},{:.12e},{:.3e},{}",
            self.config_hash,
            opt(self.h),
            self.param,
            self.lambda0,
            self.lambda1,
            self.residual,
            opt(self.rho)
        )
    }
}

/// CSV table with header.
pub fn to_csv(rows: &[SpectrumRow]) -> String {
    let mut out = String::from(SpectrumRow::CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&r.to_csv());
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&serde_json::json!({"eps": 0.1, "h": 0.01})).unwrap();
        let b = config_hash(&serde_json::json!({"h": 0.01, "eps": 0.1})).unwrap();
        let c = config_hash(&serde_json::json!({"eps": 0.2, "h": 0.01})).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.len(), 64);
    }
}
