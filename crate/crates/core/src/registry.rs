//! Frozen fitted constants.
//!
//! Bound shapes with unspecified implied constants are audited against
//! constants fitted once on a calibration grid and frozen here. The shipped
//! file is compiled in; a different file can be loaded at runtime.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::report::sha256_hex;

const BUILTIN: &str = include_str!("../registry.toml");

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Registry {
    pub version: u32,
    pub weight: WeightConstants,
    pub lemma1: Lemma1Constants,
    pub lemma2: Lemma2Constants,
    pub incomplete: IncompleteConstants,
}

/// `|W^(xi)| <= C_A (1 + |xi|)^-A` for the canonical bump.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightConstants {
    pub decay_a2: f64,
    pub decay_a4: f64,
    pub decay_a8: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Constants {
    /// Max of `|Sigma| s^(1/2) (a,s)^(1/2) / (a,b,s)` over odd prime powers.
    pub odd: f64,
    /// Same ratio over powers of two, tracked separately.
    pub two: f64,
    /// Same ratio with one residue class mod p excluded from the domain.
    pub excluded: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Lemma2Constants {
    /// Against `(Delta, xi, s1, s2)^(1/2) / [s1, s2]^(1/2)`.
    pub weak: f64,
    /// Against `(Delta, xi, s1, s2) / ([s1, s2]^(1/2) (xi, s1, s2)^(1/2))`.
    pub strong: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncompleteConstants {
    /// Against `X (Delta, s1, s2)^(1/2) / [s1, s2]^(1/2) + [s1, s2]^(1/2)`.
    pub envelope: f64,
}

impl Registry {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("shipped registry parses")
    }

    pub fn builtin_hash() -> String {
        sha256_hex(BUILTIN.as_bytes())
    }

    pub fn builtin_text() -> &'static str {
        BUILTIN
    }

    pub fn parse(text: &str) -> Result<Self> {
        let reg: Registry = toml::from_str(text).map_err(|e| Error::Registry(e.to_string()))?;
        reg.validate()?;
        Ok(reg)
    }

    pub fn load(path: &Path) -> Result<(Self, String)> {
        let text = std::fs::read_to_string(path)?;
        let reg = Self::parse(&text)?;
        Ok((reg, sha256_hex(text.as_bytes())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("registry serializes")
    }

    pub fn save(&self, path: &Path) -> Result<String> {
        let text = self.to_toml();
        std::fs::write(path, &text)?;
        Ok(sha256_hex(text.as_bytes()))
    }

    fn validate(&self) -> Result<()> {
        let all = [
            self.weight.decay_a2,
            self.weight.decay_a4,
            self.weight.decay_a8,
            self.lemma1.odd,
            self.lemma1.two,
            self.lemma1.excluded,
            self.lemma2.weak,
            self.lemma2.strong,
            self.incomplete.envelope,
        ];
        if all.iter().all(|c| c.is_finite() && *c > 0.0) {
            Ok(())
        } else {
            Err(Error::Registry("constants must be positive and finite".into()))
        }
    }
}

/// Round a fitted maximum up to a frozen constant with a small margin.
pub fn freeze(observed: f64) -> f64 {
    let padded = observed * 1.05;
    let scale = 10f64.powi(padded.log10().floor() as i32 - 2);
    (padded / scale).ceil() * scale
}
