//! Mapping from predicted sensitivity class to an enforcement action.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bundle::ModelBundle;
use crate::error::{Error, Result};
use crate::ingest::ClassLabel;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Action {
    Block,
    AllowInternal,
    Allow,
    Alert,
}

impl Action {
    pub fn parse(s: &str) -> Result<Self> {
        let folded: String = s.chars().filter(|c| *c != '_' && *c != '-').collect::<String>().to_lowercase();
        match folded.as_str() {
            "block" => Ok(Action::Block),
            "allowinternal" => Ok(Action::AllowInternal),
            "allow" => Ok(Action::Allow),
            "alert" => Ok(Action::Alert),
            _ => Err(Error::Config(format!(
                "unknown action `{s}` (expected Block, AllowInternal, Allow or Alert)"
            ))),
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Action::Block => "Block",
            Action::AllowInternal => "AllowInternal",
            Action::Allow => "Allow",
            Action::Alert => "Alert",
        }
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyConfig {
    pub actions: BTreeMap<ClassLabel, Action>,
    pub default_action: Action,
}

impl Default for PolicyConfig {
    fn default() -> Self {
        PolicyConfig {
            actions: [
                ("Restricted".into(), Action::Block),
                ("Internal".into(), Action::AllowInternal),
                ("Unrestricted".into(), Action::Allow),
            ]
            .into_iter()
            .collect(),
            default_action: Action::Alert,
        }
    }
}

impl PolicyConfig {
    /// Parses `label = "action"` pairs plus an optional `default = "action"`.
    /// Labels not listed keep their built-in mapping.
    pub fn from_toml(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e| Error::Config(format!("policy file: {e}")))?;
        let mut policy = PolicyConfig::default();
        for (key, value) in &table {
            let action = match value {
                toml::Value::String(s) => Action::parse(s)?,
                other => return Err(Error::Config(format!("policy `{key}`: expected an action string, got {other}"))),
            };
            if key == "default" {
                policy.default_action = action;
            } else {
                policy.actions.insert(ClassLabel::new(key.as_str()), action);
            }
        }
        Ok(policy)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    /// Every label added by the policy file must be known to the model.
    pub fn check_labels(&self, labels: &[ClassLabel]) -> Result<()> {
        let builtin = PolicyConfig::default().actions;
        match self.actions.keys().find(|l| !labels.contains(l) && !builtin.contains_key(l)) {
            Some(unknown) => Err(Error::UnknownLabel(unknown.to_string())),
            None => Ok(()),
        }
    }
}

pub fn decide(label: &ClassLabel, policy: &PolicyConfig) -> Action {
    policy.actions.get(label).copied().unwrap_or(policy.default_action)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanDiagnostics {
    pub unknown_tokens: usize,
    pub zero_vector: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanVerdict {
    pub label: ClassLabel,
    pub probabilities: BTreeMap<ClassLabel, f64>,
    pub action: Action,
    pub diagnostics: ScanDiagnostics,
}

pub fn scan_document(bundle: &ModelBundle, text: &str, policy: &PolicyConfig) -> Result<ScanVerdict> {
    let prediction = bundle.predict_text(text)?;
    let label = bundle.label(prediction.class_index).clone();
    Ok(ScanVerdict {
        action: decide(&label, policy),
        probabilities: bundle.labels.iter().cloned().zip(prediction.probabilities).collect(),
        label,
        diagnostics: ScanDiagnostics {
            unknown_tokens: prediction.unknown_tokens,
            zero_vector: prediction.zero_vector,
        },
    })
}
