//! Run configuration read from TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, GroupElement};
use crate::walk::{Engine, ScaledMeasure};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub group: GroupDescriptor,
    /// Measure file, resolved against the config's directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure_file: Option<PathBuf>,
    /// Measure in the measure-file format, inline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub measure: Option<String>,
    /// Simple walk: `hold` at `e`, the rest spread over the generators.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hold: Option<f64>,
    /// Cache depth `M`.
    pub depth: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<Engine>,
    #[serde(default)]
    pub balls: Balls,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub window: WindowConfig,
    #[serde(default)]
    pub metric: MetricConfig,
    #[serde(default, rename = "sequence", skip_serializing_if = "Vec::is_empty")]
    pub sequences: Vec<SequenceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub covariance: Option<CovarianceConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Jobs run by `report`.
    #[serde(default = "default_jobs")]
    pub jobs: Vec<Job>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Job {
    Spectrum,
    Kernel,
    Radical,
    Metric,
    Boundary,
    Fock,
    Covariance,
}

fn default_jobs() -> Vec<Job> {
    vec![Job::Spectrum, Job::Kernel, Job::Radical]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Balls {
    /// Radius of the `x` and `y` balls of the kernel table.
    pub kernel: usize,
    /// Radius of the `x` ball probing the radical.
    pub probe: usize,
    /// Radius of the enumeration prefix for metrics and traces.
    pub prefix: usize,
}

impl Default for Balls {
    fn default() -> Self {
        Balls {
            kernel: 2,
            probe: 2,
            prefix: 2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Tolerances {
    /// Accelerated tail oscillation accepted by the SRLP diagnostic.
    pub srlp: f64,
    /// Multiple of the kernel uncertainty used to flag the radical.
    pub radical_factor: f64,
    /// Absolute radical band; overrides `radical_factor`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub radical: Option<f64>,
    /// Relative error against a closed form.
    pub closed_form: f64,
    /// Cauchy residual of boundary traces.
    pub cauchy: f64,
    /// Relative Martin/ratio disagreement.
    pub martin_vs_ratio: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            srlp: 0.02,
            radical_factor: 3.0,
            radical: None,
            closed_form: 0.01,
            cauchy: 0.01,
            martin_vs_ratio: 0.05,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelSource {
    /// Ratio tails of the power table.
    Estimated,
    /// Closed form on free groups (and `F_s × Z^d` with a unit lattice factor).
    ClosedForm,
    /// `H ≡ 1`.
    Unit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct WindowConfig {
    pub max_level: usize,
    pub row_radius: usize,
    pub col_radius: usize,
    pub margin: usize,
    pub kernel: KernelSource,
    /// `(n, m)` pairs for the coisometry check.
    pub coisometry: Vec<(usize, usize)>,
}

impl Default for WindowConfig {
    fn default() -> Self {
        WindowConfig {
            max_level: 16,
            row_radius: 1,
            col_radius: 2,
            margin: 2,
            kernel: KernelSource::Estimated,
            coisometry: vec![(1, 1), (1, 2), (2, 3)],
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricConfig {
    /// Points whose pairwise distances are reported.
    pub points: Vec<String>,
    /// Also compute the ρ-Martin metric.
    pub martin: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SequenceConfig {
    pub name: String,
    pub elements: Vec<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovarianceConfig {
    pub g: String,
    /// `ζ` as `[re, im]`.
    #[serde(default = "unit_zeta")]
    pub zeta: [f64; 2],
    #[serde(default = "one")]
    pub n: usize,
    pub x: String,
    pub y: String,
}

fn unit_zeta() -> [f64; 2] {
    [1.0, 0.0]
}

fn one() -> usize {
    1
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let c: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut c = Self::from_toml(&text)?;
        if let (Some(f), Some(dir)) = (&c.measure_file, path.parent()) {
            if f.is_relative() {
                c.measure_file = Some(dir.join(f));
            }
        }
        Ok(c)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.group.validate()?;
        let sources = [self.measure_file.is_some(), self.measure.is_some(), self.hold.is_some()];
        if sources.iter().filter(|&&s| s).count() != 1 {
            return Err(Error::Config(
                "exactly one of measure_file, measure, hold must be set".into(),
            ));
        }
        if self.depth == 0 {
            return Err(Error::Config("depth must be positive".into()));
        }
        if let Some(h) = self.hold {
            if !(0.0..=1.0).contains(&h) {
                return Err(Error::Config(format!("hold {h} outside [0, 1]")));
            }
        }
        let t = &self.tolerances;
        for (name, v) in [
            ("srlp", t.srlp),
            ("closed_form", t.closed_form),
            ("cauchy", t.cauchy),
            ("martin_vs_ratio", t.martin_vs_ratio),
        ]
        .into_iter()
        .chain(t.radical.map(|r| ("radical", r)))
        {
            if !(v > 0.0 && v < 1.0) {
                return Err(Error::Config(format!("tolerance {name} = {v} must lie in (0, 1)")));
            }
        }
        if t.radical_factor.is_nan() || t.radical_factor <= 0.0 {
            return Err(Error::Config("radical_factor must be positive".into()));
        }
        if self.window.max_level == 0 {
            return Err(Error::Config("window.max_level must be positive".into()));
        }
        for s in &self.sequences {
            if s.elements.is_empty() {
                return Err(Error::Config(format!("sequence {} is empty", s.name)));
            }
        }
        Ok(())
    }

    /// Text of the step measure, in the measure-file format.
    pub fn measure_text(&self) -> Result<String> {
        if let Some(t) = &self.measure {
            return Ok(t.clone());
        }
        if let Some(p) = &self.measure_file {
            return std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("cannot read measure {}: {e}", p.display())));
        }
        let hold = self.hold.unwrap_or(0.0);
        Ok(ScaledMeasure::simple(&self.group, hold)?.to_text())
    }

    pub fn step(&self) -> Result<ScaledMeasure> {
        ScaledMeasure::parse(&self.group, &self.measure_text()?)
    }

    pub fn parse_elements(&self, items: &[String]) -> Result<Vec<GroupElement>> {
        items.iter().map(|s| self.group.parse_element(s)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const LAZY_Z2: &str = r#"
depth = 64
hold = 0.5
jobs = ["spectrum", "radical"]

[group]
family = "lattice"
dim = 2

[balls]
kernel = 1

[[sequence]]
name = "ray"
elements = ["(1,0)", "(2,0)"]
"#;

    #[test]
    fn round_trip() {
        let c = RunConfig::from_toml(LAZY_Z2).unwrap();
        assert_eq!(c.group, GroupDescriptor::lattice(2));
        assert_eq!(c.balls.kernel, 1);
        assert_eq!(c.balls.probe, 2);
        assert_eq!(c.jobs, vec![Job::Spectrum, Job::Radical]);
        let back = RunConfig::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
        let mu = c.step().unwrap();
        assert!((mu.value(&GroupElement::lattice([0, 0])) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(RunConfig::from_toml(&LAZY_Z2.replace("depth = 64", "depth = 0")).is_err());
        assert!(RunConfig::from_toml(&LAZY_Z2.replace("hold = 0.5", "")).is_err());
        let bad = format!("{LAZY_Z2}\n[tolerances]\nsrlp = 1.5\n");
        assert!(matches!(RunConfig::from_toml(&bad), Err(Error::Config(_))));
        assert!(RunConfig::from_toml(&format!("{LAZY_Z2}\nunknown = 1\n")).is_err());
    }
}
