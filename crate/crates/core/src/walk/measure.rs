use std::collections::{BTreeMap, HashMap, HashSet};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, GroupElement};

/// Default cap on the support size of a single measure.
pub const DEFAULT_SUPPORT_CAP: usize = 8_000_000;

const MASS_TOLERANCE: f64 = 1e-12;

/// Mantissas below this are reported as underflow: their relative precision
/// is no longer trustworthy.
pub(crate) const UNDERFLOW_FLOOR: f64 = 1e-300;
const PAR_CHUNK: usize = 4096;

/// A finitely supported nonnegative function on a group.
///
/// Values are `mantissa * exp(log_scale)` with the largest mantissa equal to 1.
/// Entries whose value underflowed during convolution stay in the support with
/// a tiny mantissa; reading them reports [`Error::Underflow`] rather than zero.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScaledMeasure {
    group: GroupDescriptor,
    support: BTreeMap<GroupElement, f64>,
    log_scale: f64,
    step_index: usize,
}

impl ScaledMeasure {
    /// Point mass at the identity: the zeroth convolution power.
    pub fn point_mass(group: &GroupDescriptor) -> Self {
        ScaledMeasure {
            group: group.clone(),
            support: BTreeMap::from([(group.identity(), 1.0)]),
            log_scale: 0.0,
            step_index: 0,
        }
    }

    /// Builds a step-one measure from explicit weights. Zero weights are dropped,
    /// repeated elements are summed.
    pub fn from_weights(
        group: &GroupDescriptor,
        weights: impl IntoIterator<Item = (GroupElement, f64)>,
    ) -> Result<Self> {
        group.validate()?;
        let mut support = BTreeMap::new();
        for (g, w) in weights {
            if !group.contains(&g) {
                return Err(Error::DescriptorMismatch {
                    expected: group.to_string(),
                });
            }
            if !(w >= 0.0 && w.is_finite()) {
                return Err(Error::InvalidMeasure(format!(
                    "weight {w} at {} is not a nonnegative number",
                    group.format(&g)
                )));
            }
            if w > 0.0 {
                *support.entry(g).or_insert(0.0) += w;
            }
        }
        if support.is_empty() {
            return Err(Error::InvalidMeasure("empty support".into()));
        }
        let mut m = ScaledMeasure {
            group: group.clone(),
            support,
            log_scale: 0.0,
            step_index: 1,
        };
        m.renormalize();
        Ok(m)
    }

    /// Uniform weight on the standard generators plus `hold` at the identity.
    pub fn simple(group: &GroupDescriptor, hold: f64) -> Result<Self> {
        let gens = group.generators();
        if gens.is_empty() {
            return Self::from_weights(group, [(group.identity(), 1.0)]);
        }
        let each = (1.0 - hold) / gens.len() as f64;
        Self::from_weights(
            group,
            std::iter::once((group.identity(), hold)).chain(gens.into_iter().map(|g| (g, each))),
        )
    }

    /// Parses a measure file: one `<element> <probability>` pair per line, where
    /// the probability is a decimal or a rational `p/q`. `#` starts a comment.
    pub fn parse(group: &GroupDescriptor, text: &str) -> Result<Self> {
        let mut weights = Vec::new();
        for line in text.lines() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (elem, prob) = line
                .rsplit_once(char::is_whitespace)
                .ok_or_else(|| Error::parse("measure line", line, "expected '<element> <probability>'"))?;
            weights.push((group.parse_element(elem.trim())?, parse_probability(prob)?));
        }
        Self::from_weights(group, weights)
    }

    /// Inverse of [`ScaledMeasure::parse`], with decimal probabilities.
    pub fn to_text(&self) -> String {
        self.support
            .keys()
            .map(|g| format!("{} {:.17e}\n", self.group.format(g), self.value(g)))
            .collect()
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.group
    }

    pub fn step_index(&self) -> usize {
        self.step_index
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    pub fn len(&self) -> usize {
        self.support.len()
    }

    pub fn is_empty(&self) -> bool {
        self.support.is_empty()
    }

    /// Support elements with their mantissas, in canonical order.
    pub fn mantissas(&self) -> impl Iterator<Item = (&GroupElement, f64)> {
        self.support.iter().map(|(g, &m)| (g, m))
    }

    pub fn contains(&self, g: &GroupElement) -> bool {
        self.support.contains_key(g)
    }

    /// Plain value (may be 0 for underflowed entries).
    pub fn value(&self, g: &GroupElement) -> f64 {
        self.support
            .get(g)
            .map_or(0.0, |m| m * self.log_scale.exp())
    }

    /// Natural log of the value; `None` when `g` is outside the support.
    pub fn log_value(&self, g: &GroupElement) -> Result<Option<f64>> {
        match self.support.get(g) {
            None => Ok(None),
            Some(&m) if m >= UNDERFLOW_FLOOR => Ok(Some(m.ln() + self.log_scale)),
            Some(_) => Err(Error::Underflow {
                level: self.step_index,
                element: self.group.format(g),
            }),
        }
    }

    /// Natural log of the total mass.
    pub fn log_total(&self) -> f64 {
        let s: f64 = self.support.values().sum();
        s.ln() + self.log_scale
    }

    pub fn radius(&self) -> Result<usize> {
        self.support
            .keys()
            .map(|g| self.group.word_length(g))
            .try_fold(0, |acc, l| l.map(|l| acc.max(l)))
    }

    /// `μ(g) = μ(g⁻¹)` for every support element, up to relative `1e-12`.
    pub fn is_symmetric(&self) -> bool {
        self.support.iter().all(|(g, &m)| {
            let n = self.support.get(&g.inv()).copied().unwrap_or(0.0);
            (m - n).abs() <= MASS_TOLERANCE * m.max(n)
        })
    }

    /// The reflected measure `g ↦ μ(g⁻¹)`.
    pub fn reflect(&self) -> Self {
        ScaledMeasure {
            group: self.group.clone(),
            support: self.support.iter().map(|(g, &m)| (g.inv(), m)).collect(),
            log_scale: self.log_scale,
            step_index: self.step_index,
        }
    }

    fn renormalize(&mut self) {
        let max = self.support.values().copied().fold(0.0, f64::max);
        if max > 0.0 && max != 1.0 {
            for m in self.support.values_mut() {
                *m /= max;
            }
            self.log_scale += max.ln();
        }
    }

    /// `(μ * ν)(w) = Σ_u μ(u) ν(u⁻¹w)`.
    pub fn convolve(&self, other: &ScaledMeasure) -> Result<ScaledMeasure> {
        self.convolve_capped(other, DEFAULT_SUPPORT_CAP)
    }

    pub fn convolve_capped(&self, other: &ScaledMeasure, cap: usize) -> Result<ScaledMeasure> {
        if self.group != other.group {
            return Err(Error::DescriptorMismatch {
                expected: self.group.to_string(),
            });
        }
        let left: Vec<(&GroupElement, f64)> = self.mantissas().collect();
        let right: Vec<(&GroupElement, f64)> = other.mantissas().collect();
        // Fixed chunking keeps the summation order independent of the thread pool.
        let partials: Vec<HashMap<GroupElement, f64>> = left
            .par_chunks(PAR_CHUNK)
            .map(|chunk| {
                let mut acc = HashMap::new();
                for &(u, a) in chunk {
                    for &(v, b) in &right {
                        *acc.entry(u.mul(v)).or_insert(0.0) += a * b;
                    }
                }
                acc
            })
            .collect();
        let mut support: HashMap<GroupElement, f64> = HashMap::new();
        for part in partials {
            for (g, x) in part {
                *support.entry(g).or_insert(0.0) += x;
            }
            if support.len() > cap {
                return Err(Error::Budget {
                    what: "measure support",
                    needed: support.len(),
                    cap,
                });
            }
        }
        let mut out = ScaledMeasure {
            group: self.group.clone(),
            support: support.into_iter().collect(),
            log_scale: self.log_scale + other.log_scale,
            step_index: self.step_index + other.step_index,
        };
        out.renormalize();
        Ok(out)
    }
}

fn parse_probability(text: &str) -> Result<f64> {
    let bad = |reason: &str| Error::parse("probability", text, reason);
    let value = match text.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.trim().parse().map_err(|_| bad("bad numerator"))?;
            let q: f64 = q.trim().parse().map_err(|_| bad("bad denominator"))?;
            if q == 0.0 {
                return Err(bad("zero denominator"));
            }
            p / q
        }
        None => text.parse().map_err(|_| bad("not a number"))?,
    };
    Ok(value)
}

/// Outcome of the finite-radius semigroup generation check.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generation {
    /// Every element of the check ball was reached.
    Generates,
    /// The reachable set closed up without covering the check ball.
    Fails,
    /// Search budget ran out first.
    Inconclusive,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MeasureReport {
    pub total_mass: f64,
    pub symmetric: bool,
    pub period: Option<usize>,
    pub generation: Generation,
    pub check_radius: usize,
}

impl MeasureReport {
    pub fn aperiodic(&self) -> bool {
        self.period == Some(1)
    }
}

/// Depth used when probing return times for the period.
pub const PERIOD_PROBE_DEPTH: usize = 24;
const PROBE_CAP: usize = 200_000;

/// Checks total mass, symmetry, period and semigroup generation.
pub fn validate_measure(mu: &ScaledMeasure, check_radius: usize) -> Result<MeasureReport> {
    let total_mass = mu.log_total().exp();
    if (total_mass - 1.0).abs() > MASS_TOLERANCE {
        return Err(Error::InvalidMeasure(format!(
            "total mass {total_mass} differs from 1"
        )));
    }
    Ok(MeasureReport {
        total_mass,
        symmetric: mu.is_symmetric(),
        period: probe_period(mu, PERIOD_PROBE_DEPTH),
        generation: generation_check(mu, check_radius)?,
        check_radius,
    })
}

/// gcd of return times up to `depth`, using support sets only.
/// `None` when no return was seen.
pub fn probe_period(mu: &ScaledMeasure, depth: usize) -> Option<usize> {
    let e = mu.group.identity();
    let steps: Vec<&GroupElement> = mu.support.keys().collect();
    let mut current: HashSet<GroupElement> = HashSet::from([e.clone()]);
    let mut period = 0usize;
    for n in 1..=depth {
        let next: HashSet<GroupElement> = current
            .iter()
            .flat_map(|g| steps.iter().map(move |s| g.mul(s)))
            .collect();
        if next.contains(&e) {
            period = gcd(period, n);
            if period == 1 {
                break;
            }
        }
        if next.len() > PROBE_CAP {
            break;
        }
        current = next;
    }
    (period > 0).then_some(period)
}

pub(crate) fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

fn generation_check(mu: &ScaledMeasure, radius: usize) -> Result<Generation> {
    let group = &mu.group;
    let target = group.ball(radius)?;
    let steps: Vec<&GroupElement> = mu.support.keys().collect();
    let step_radius = mu.radius()?.max(1);
    let max_rounds = 4 * (radius + 1) * step_radius + 8;
    let mut seen: HashSet<GroupElement> = mu.support.keys().cloned().collect();
    let mut frontier: Vec<GroupElement> = seen.iter().cloned().collect();
    let mut missing = target.elements().iter().filter(|g| !seen.contains(*g)).count();
    for _ in 0..max_rounds {
        if missing == 0 {
            return Ok(Generation::Generates);
        }
        let mut next = Vec::new();
        for g in &frontier {
            for s in &steps {
                let h = g.mul(s);
                if !seen.contains(&h) {
                    if target.contains(&h) {
                        missing -= 1;
                    }
                    seen.insert(h.clone());
                    next.push(h);
                }
            }
        }
        if next.is_empty() {
            return Ok(Generation::Fails);
        }
        if seen.len() > PROBE_CAP {
            break;
        }
        frontier = next;
    }
    Ok(if missing == 0 {
        Generation::Generates
    } else {
        Generation::Inconclusive
    })
}
