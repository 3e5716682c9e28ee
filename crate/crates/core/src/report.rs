//! Structured diagnostics shared by every check.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    /// Nothing was compared against a tolerance.
    Info,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub status: Status,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Residual {
    pub label: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pass: Option<bool>,
}

/// Where the numbers came from.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rho_hat: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub acceleration: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub engine: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub name: String,
    pub inputs: BTreeMap<String, Value>,
    pub residuals: Vec<Residual>,
    pub verdict: Verdict,
    pub tolerances: BTreeMap<String, f64>,
    pub provenance: Provenance,
    /// Free-form payload such as traces or flagged sets.
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub data: Value,
}

impl DiagnosticsReport {
    pub fn new(name: impl Into<String>) -> Self {
        DiagnosticsReport {
            name: name.into(),
            inputs: BTreeMap::new(),
            residuals: Vec::new(),
            verdict: Verdict {
                status: Status::Info,
                message: String::new(),
            },
            tolerances: BTreeMap::new(),
            provenance: Provenance::default(),
            data: Value::Null,
        }
    }

    pub fn input(mut self, key: &str, value: impl Serialize) -> Self {
        self.inputs.insert(
            key.to_string(),
            serde_json::to_value(value).unwrap_or(Value::Null),
        );
        self
    }

    pub fn tolerance(mut self, key: &str, value: f64) -> Self {
        self.tolerances.insert(key.to_string(), value);
        self
    }

    pub fn provenance(mut self, p: Provenance) -> Self {
        self.provenance = p;
        self
    }

    pub fn data(mut self, value: impl Serialize) -> Self {
        self.data = serde_json::to_value(value).unwrap_or(Value::Null);
        self
    }

    /// Records a residual checked against `value <= tolerance`.
    pub fn check(&mut self, label: impl Into<String>, value: f64, tolerance: f64) -> bool {
        let pass = value <= tolerance;
        self.residuals.push(Residual {
            label: label.into(),
            value,
            tolerance: Some(tolerance),
            pass: Some(pass),
        });
        pass
    }

    /// Records a value without a pass/fail criterion.
    pub fn note(&mut self, label: impl Into<String>, value: f64) {
        self.residuals.push(Residual {
            label: label.into(),
            value,
            tolerance: None,
            pass: None,
        });
    }

    /// Records a boolean criterion.
    pub fn require(&mut self, label: impl Into<String>, ok: bool) -> bool {
        self.residuals.push(Residual {
            label: label.into(),
            value: if ok { 0.0 } else { 1.0 },
            tolerance: Some(0.0),
            pass: Some(ok),
        });
        ok
    }

    pub fn failures(&self) -> impl Iterator<Item = &Residual> {
        self.residuals.iter().filter(|r| r.pass == Some(false))
    }

    pub fn passed(&self) -> bool {
        self.verdict.status != Status::Fail
    }

    /// Sets the verdict from the recorded residuals.
    pub fn finish(mut self, pass_message: &str, fail_message: &str) -> Self {
        let checked = self.residuals.iter().any(|r| r.pass.is_some());
        let failed: Vec<&str> = self.failures().map(|r| r.label.as_str()).collect();
        self.verdict = if !failed.is_empty() {
            Verdict {
                status: Status::Fail,
                message: format!("{fail_message}: {}", failed.join(", ")),
            }
        } else if checked {
            Verdict {
                status: Status::Pass,
                message: pass_message.to_string(),
            }
        } else {
            Verdict {
                status: Status::Info,
                message: pass_message.to_string(),
            }
        };
        self
    }

    pub fn residuals_csv(&self) -> String {
        let mut out = String::from("report,label,value,tolerance,pass\n");
        for r in &self.residuals {
            out.push_str(&format!(
                "\"{}\",\"{}\",{:.17e},{},{}\n",
                self.name,
                r.label.replace('"', "'"),
                r.value,
                r.tolerance.map(|t| format!("{t:e}")).unwrap_or_default(),
                r.pass.map(|p| p.to_string()).unwrap_or_default()
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn verdict_follows_residuals() {
        let mut r = DiagnosticsReport::new("t").input("m", 3);
        r.check("a", 0.5, 1.0);
        r.note("b", 7.0);
        let r = r.finish("ok", "bad");
        assert_eq!(r.verdict.status, Status::Pass);
        let mut f = DiagnosticsReport::new("t");
        f.check("a", f64::NAN, 1.0);
        let f = f.finish("ok", "bad");
        assert_eq!(f.verdict.status, Status::Fail);
        assert_eq!(f.verdict.message, "bad: a");
    }

    #[test]
    fn json_round_trip() {
        let mut r = DiagnosticsReport::new("t").data(vec![1, 2]);
        r.check("a", 0.0, 1.0);
        let r = r.finish("ok", "bad");
        let text = serde_json::to_string(&r).unwrap();
        let back: DiagnosticsReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, r);
    }
}
