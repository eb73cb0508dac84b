//! Experiment configuration: a TOML file with one table per section, merged
//! with command-line overrides of the form `section.key = value`.
//!
//! Every key is optional in the file; commands fill gaps with their own
//! defaults and name the offending key when a value is missing or invalid.
//! Unknown sections and keys are rejected.

use std::fmt;
use std::path::Path;

use serde::de::{self, Visitor};
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use snls_core::spectral::Exponent;

use crate::error::{LabError, LabResult};

/// A real number that also accepts TOML integers and the strings `"inf"`
/// or `"infinity"`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Real(pub f64);

impl Serialize for Real {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str(if self.0 > 0.0 { "inf" } else { "-inf" })
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Real {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Real;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Real, E> {
                Ok(Real(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Real, E> {
                Ok(Real(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Real, E> {
                match v.trim().to_ascii_lowercase().as_str() {
                    "inf" | "infinity" | "+inf" => Ok(Real(f64::INFINITY)),
                    other => other
                        .parse()
                        .map(Real)
                        .map_err(|_| E::invalid_value(de::Unexpected::Str(v), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

impl Real {
    pub fn exponent(self, key: &str) -> LabResult<Exponent> {
        Exponent::new(self.0).map_err(|e| LabError::config(key, e.to_string()))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replica: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub d: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    /// Box side.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub length: Option<Real>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhiSection {
    /// `zero`, `cutoff`, `power-law`, `truncated-power-law` or `single-mode`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub family: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_max: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<Real>,
    /// Regularity the power law must reach.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kx: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ky: Option<i64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kz: Option<i64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct U0Section {
    /// `gaussian`, `rough`, `zero` or `file`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub amplitude: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<Real>,
    /// Spectral decay exponent of the rough preset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub decay: Option<Real>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimeSection {
    /// Horizon T.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizon: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub steps: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub case: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s0: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tol: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_iters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dealias: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<Real>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NormSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub s: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho: Option<Real>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LadderSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_min: Option<Real>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<Real>,
    /// Number of ladder points (geometric).
    #[serde(skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    /// Explicit horizons; overrides the geometric ladder when present.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub horizons: Option<Vec<Real>>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MonteCarloSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_samples: Option<usize>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RandomizeSection {
    /// `gaussian` or `bernoulli`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub law: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variance: Option<Real>,
    /// Repeat on the grid with twice as many points per axis.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refine: Option<bool>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Config {
    pub run: RunSection,
    pub grid: GridSection,
    pub phi: PhiSection,
    pub u0: U0Section,
    pub time: TimeSection,
    pub solver: SolverSection,
    pub norm: NormSection,
    pub ladder: LadderSection,
    pub mc: MonteCarloSection,
    pub randomize: RandomizeSection,
}

/// Parses `raw` as a TOML value, falling back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Sets `section.key` in `table`, creating the section if needed.
pub fn apply_override(table: &mut toml::Table, key: &str, raw: &str) -> LabResult<()> {
    let (section, field) = key
        .split_once('.')
        .ok_or_else(|| LabError::config(key, "overrides must look like section.key=value"))?;
    let entry = table
        .entry(section.to_string())
        .or_insert_with(|| toml::Value::Table(toml::Table::new()));
    let sect = entry
        .as_table_mut()
        .ok_or_else(|| LabError::config(section, "is not a table"))?;
    sect.insert(field.to_string(), parse_value(raw));
    Ok(())
}

/// Reads the optional file, applies overrides in order and validates the
/// result against the schema.
pub fn load(path: Option<&Path>, overrides: &[(String, String)]) -> LabResult<Config> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| LabError::io(p, e))?;
            toml::from_str::<toml::Table>(&text)
                .map_err(|e| LabError::config(p.display().to_string(), e.message().to_string()))?
        }
        None => toml::Table::new(),
    };
    for (k, v) in overrides {
        apply_override(&mut table, k, v)?;
    }
    from_table(table)
}

pub fn from_table(table: toml::Table) -> LabResult<Config> {
    // validate section by section so errors carry the full key path
    for (section, value) in &table {
        let known = [
            "run", "grid", "phi", "u0", "time", "solver", "norm", "ladder", "mc", "randomize",
        ];
        if !known.contains(&section.as_str()) {
            return Err(LabError::config(section.as_str(), "unknown section"));
        }
        if let Some(t) = value.as_table() {
            for (k, v) in t {
                let mut single = toml::Table::new();
                let mut inner = toml::Table::new();
                inner.insert(k.clone(), v.clone());
                single.insert(section.clone(), toml::Value::Table(inner));
                if let Err(e) = Config::deserialize(single) {
                    return Err(LabError::config(format!("{section}.{k}"), e.message().to_string()));
                }
            }
        } else {
            return Err(LabError::config(section.as_str(), "must be a table"));
        }
    }
    Config::deserialize(table).map_err(|e| LabError::config("<config>", e.message().to_string()))
}

/// Flags of the form `--phi family:key=value,key=value`.
pub fn phi_overrides(spec: &str) -> LabResult<Vec<(String, String)>> {
    let (family, params) = match spec.split_once(':') {
        Some((f, p)) => (f, p),
        None => (spec, ""),
    };
    let mut out = vec![("phi.family".to_string(), format!("{:?}", family.trim()))];
    for kv in params.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| LabError::config("phi", format!("parameter {kv:?} lacks '='")))?;
        let key = match k.trim() {
            "K" | "k" | "k_max" => "k_max",
            "alpha" | "a" => "alpha",
            "s" => "s",
            "amp" | "amplitude" | "lambda" => "amplitude",
            "kx" => "kx",
            "ky" => "ky",
            "kz" => "kz",
            other => return Err(LabError::config(format!("phi.{other}"), "unknown φ parameter")),
        };
        out.push((format!("phi.{key}"), v.trim().to_string()));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_and_schema() {
        let cfg = load(
            None,
            &[
                ("grid.d".into(), "2".into()),
                ("norm.r".into(), "inf".into()),
                ("time.horizon".into(), "1".into()),
            ],
        )
        .unwrap();
        assert_eq!(cfg.grid.d, Some(2));
        assert_eq!(cfg.norm.r, Some(Real(f64::INFINITY)));
        assert_eq!(cfg.time.horizon, Some(Real(1.0)));
        let err = load(None, &[("grid.bogus".into(), "1".into())]).unwrap_err();
        assert!(matches!(err, LabError::Config { ref key, .. } if key == "grid.bogus"));
        let err = load(None, &[("grid.n".into(), "\"many\"".into())]).unwrap_err();
        assert!(matches!(err, LabError::Config { ref key, .. } if key == "grid.n"));
        let err = load(None, &[("nowhere.n".into(), "1".into())]).unwrap_err();
        assert!(matches!(err, LabError::Config { ref key, .. } if key == "nowhere"));
    }

    #[test]
    fn phi_flag_parsing() {
        let o = phi_overrides("cutoff:K=8").unwrap();
        let cfg = load(None, &o).unwrap();
        assert_eq!(cfg.phi.family.as_deref(), Some("cutoff"));
        assert_eq!(cfg.phi.k_max, Some(Real(8.0)));
        assert!(phi_overrides("cutoff:Q=8").is_err());
    }
}
