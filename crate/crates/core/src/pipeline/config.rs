//! Pipeline configuration and its flat `section.key=value` text form.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::closed_proposals::ClosedConfig;
use crate::detection::DetectionConfig;
use crate::error::{Error, Result};
use crate::metrics::DEFAULT_SAMPLE_DENSITY;
use crate::open_proposals::ProposalConfig;
use crate::selection::SelectionConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Oracle,
    Covariance,
    Sidecar,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    OpenOnly,
    ClosedOnly,
    Combined,
}

impl Mode {
    pub fn runs_open(self) -> bool {
        self != Mode::ClosedOnly
    }

    pub fn runs_closed(self) -> bool {
        self != Mode::OpenOnly
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub detection: DetectionConfig,
    pub proposals: ProposalConfig,
    pub closed: ClosedConfig,
    pub selection: SelectionConfig,
    pub scorer: ScorerKind,
    /// Score file for the sidecar scorer.
    pub sidecar: Option<PathBuf>,
    /// Neighbourhood size of the covariance scorer.
    pub covariance_k: usize,
    pub mode: Mode,
    /// Upper bound on the edge points entering the closed stage; larger sets
    /// are thinned by farthest-point sampling.
    pub closed_max_points: usize,
    /// ECD samples per unit of normalised curve length.
    pub ecd_density: f64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            detection: DetectionConfig::default(),
            proposals: ProposalConfig::default(),
            closed: ClosedConfig::default(),
            selection: SelectionConfig::default(),
            scorer: ScorerKind::Covariance,
            sidecar: None,
            covariance_k: 16,
            mode: Mode::Combined,
            closed_max_points: 4096,
            ecd_density: DEFAULT_SAMPLE_DENSITY,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        self.detection.validate()?;
        self.proposals.validate()?;
        self.closed.validate()?;
        self.selection.validate()?;
        if self.scorer == ScorerKind::Sidecar && self.sidecar.is_none() {
            return Err(Error::Config("the sidecar scorer needs a sidecar path".into()));
        }
        if self.covariance_k < 4 {
            return Err(Error::Config("covariance_k must be at least 4".into()));
        }
        if self.closed_max_points < self.closed.min_members {
            return Err(Error::Config("closed_max_points is below closed.min_members".into()));
        }
        if !(self.ecd_density > 0.0) || !self.ecd_density.is_finite() {
            return Err(Error::Config("ecd_density must be positive".into()));
        }
        Ok(())
    }

    /// Sets one dotted key from its text value. Unknown keys and values of
    /// the wrong type are config errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut tree = serde_json::to_value(&*self)?;
        let mut slot = &mut tree;
        for part in key.split('.') {
            slot = slot
                .as_object_mut()
                .and_then(|o| o.get_mut(part))
                .ok_or_else(|| Error::Config(format!("unknown key `{key}`")))?;
        }
        if slot.is_object() {
            return Err(Error::Config(format!("`{key}` is a section, not a key")));
        }
        *slot = parse_scalar(value);
        let first = serde_json::from_value::<Self>(tree.clone());
        let parsed = match first {
            Ok(c) => Ok(c),
            Err(e) if !slot_is_string(&tree, key) => {
                // Numeric-looking text may still be meant as a string.
                let mut retry = tree;
                set_path(&mut retry, key, Value::String(value.to_string()));
                serde_json::from_value::<Self>(retry).map_err(|_| e)
            }
            Err(e) => Err(e),
        };
        *self = parsed.map_err(|e| Error::Config(format!("bad value for `{key}`: {e}")))?;
        Ok(())
    }

    /// Applies `key=value` lines; blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key=value", n + 1)))?;
            self.set(k.trim(), v.trim())
                .map_err(|e| match e {
                    Error::Config(m) => Error::Config(format!("line {}: {m}", n + 1)),
                    e => e,
                })?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        cfg.apply_text(text)?;
        Ok(cfg)
    }

    /// Every key with its resolved value, one `key=value` per line, in a
    /// form `apply_text` reads back.
    pub fn to_text(&self) -> String {
        let tree = serde_json::to_value(self).expect("config serialises");
        let mut out = String::new();
        flatten("", &tree, &mut out);
        out
    }
}

fn set_path(tree: &mut Value, key: &str, v: Value) {
    let mut slot = tree;
    for part in key.split('.') {
        slot = &mut slot[part];
    }
    *slot = v;
}

fn slot_is_string(tree: &Value, key: &str) -> bool {
    key.split('.').fold(tree, |t, part| &t[part]).is_string()
}

fn parse_scalar(v: &str) -> Value {
    match v {
        "true" => return Value::Bool(true),
        "false" => return Value::Bool(false),
        "none" | "null" => return Value::Null,
        _ => {}
    }
    if let Ok(u) = v.parse::<u64>() {
        return Value::from(u);
    }
    if let Ok(i) = v.parse::<i64>() {
        return Value::from(i);
    }
    if let Ok(f) = v.parse::<f64>() {
        if let Some(n) = serde_json::Number::from_f64(f) {
            return Value::Number(n);
        }
    }
    Value::String(v.to_string())
}

fn flatten(prefix: &str, v: &Value, out: &mut String) {
    match v {
        Value::Object(map) => flatten_map(prefix, map, out),
        Value::Null => out.push_str(&format!("{prefix}=none\n")),
        Value::String(s) => out.push_str(&format!("{prefix}={s}\n")),
        other => out.push_str(&format!("{prefix}={other}\n")),
    }
}

fn flatten_map(prefix: &str, map: &Map<String, Value>, out: &mut String) {
    for (k, v) in map {
        let key = if prefix.is_empty() {
            k.clone()
        } else {
            format!("{prefix}.{k}")
        };
        flatten(&key, v, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = PipelineConfig::default();
        cfg.set("detection.tau_e", "0.6").unwrap();
        cfg.set("closed.s_bar", "42").unwrap();
        cfg.set("proposals.sampling", "uniform").unwrap();
        cfg.set("scorer", "oracle").unwrap();
        assert_eq!(cfg.detection.tau_e, 0.6);
        assert_eq!(cfg.closed.s_bar, Some(42.0));
        let back = PipelineConfig::from_text(&cfg.to_text()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(PipelineConfig::from_text(&PipelineConfig::default().to_text()).unwrap(), PipelineConfig::default());
    }

    #[test]
    fn rejects_bad_keys_and_values() {
        let mut cfg = PipelineConfig::default();
        assert!(matches!(cfg.set("detection.tau_x", "1"), Err(Error::Config(_))));
        assert!(matches!(cfg.set("detection", "1"), Err(Error::Config(_))));
        assert!(matches!(cfg.set("proposals.sample_k", "lots"), Err(Error::Config(_))));
        assert!(matches!(cfg.apply_text("tau_e 0.7"), Err(Error::Config(_))));
        assert_eq!(cfg, PipelineConfig::default());
    }

    #[test]
    fn comments_and_sidecar_rule() {
        let cfg = PipelineConfig::from_text("# c\n\nscorer = sidecar\n").unwrap();
        assert!(cfg.validate().is_err());
        let cfg = PipelineConfig::from_text("scorer=sidecar\nsidecar=s.ecsc").unwrap();
        cfg.validate().unwrap();
    }
}
