//! Isotropic measures on free groups, stored by tree distance from `e`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::measure::ScaledMeasure;
use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, GroupElement};

const ISOTROPY_TOLERANCE: f64 = 1e-12;

/// Number of vertices `u` of the `q`-regular tree with `d(e,u) = k` and
/// `d(u,w) = l`, for any fixed `w` with `d(e,w) = n`.
pub fn tree_sphere_count(n: usize, k: usize, l: usize, q: usize) -> u128 {
    if n + l < k || !(n + l - k).is_multiple_of(2) {
        return 0;
    }
    // Walk back j steps from w towards e, then t steps away without backtracking.
    let j = (n + l - k) / 2;
    if j > n || j > l {
        return 0;
    }
    let t = l - j;
    if t == 0 {
        return 1;
    }
    let first = if j == n && n == 0 {
        q
    } else if j == n || j == 0 {
        q - 1
    } else {
        q - 2
    } as u128;
    first * ((q - 1) as u128).saturating_pow(t as u32 - 1)
}

/// Natural log of the sphere size `q (q-1)^{k-1}` (1 for `k = 0`).
pub fn log_sphere_size(k: usize, q: usize) -> f64 {
    if k == 0 {
        0.0
    } else {
        (q as f64).ln() + (k - 1) as f64 * ((q - 1) as f64).ln()
    }
}

/// `w ↦ values[d(e,w)] · exp(log_scale)` on `F_s`, with `q = 2s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RadialMeasure {
    values: Vec<f64>,
    log_scale: f64,
    q: usize,
}

impl RadialMeasure {
    pub fn new(values: Vec<f64>, q: usize) -> Result<Self> {
        if q < 2 || !q.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!("tree degree {q} must be even and at least 2")));
        }
        if values.iter().any(|v| !(*v >= 0.0 && v.is_finite())) {
            return Err(Error::InvalidMeasure("radial values must be nonnegative".into()));
        }
        let mut m = RadialMeasure {
            values,
            log_scale: 0.0,
            q,
        };
        m.renormalize();
        Ok(m)
    }

    /// Point mass at `e`.
    pub fn delta(q: usize) -> Self {
        RadialMeasure {
            values: vec![1.0],
            log_scale: 0.0,
            q,
        }
    }

    pub fn degree(&self) -> usize {
        self.q
    }

    pub fn radius(&self) -> usize {
        self.values.len().saturating_sub(1)
    }

    /// Per-element value at distance `r`.
    pub fn value(&self, r: usize) -> f64 {
        self.values.get(r).map_or(0.0, |v| v * self.log_scale.exp())
    }

    pub fn mantissas(&self) -> &[f64] {
        &self.values
    }

    pub fn log_scale(&self) -> f64 {
        self.log_scale
    }

    fn renormalize(&mut self) {
        while self.values.len() > 1 && self.values.last() == Some(&0.0) {
            self.values.pop();
        }
        let max = self.values.iter().copied().fold(0.0, f64::max);
        if max > 0.0 && max != 1.0 {
            for v in &mut self.values {
                *v /= max;
            }
            self.log_scale += max.ln();
        }
    }

    /// Expands to an element-wise measure.
    pub fn to_measure(&self, group: &GroupDescriptor) -> Result<ScaledMeasure> {
        let ball = group.ball(self.radius())?;
        ScaledMeasure::from_weights(
            group,
            ball.iter()
                .map(|(i, g)| (g.clone(), self.value(ball.length_at(i)))),
        )
    }
}

/// Reduces an isotropic measure on `F_s` to its radial profile.
pub fn radial_reduce(mu: &ScaledMeasure) -> Result<RadialMeasure> {
    let s = match mu.group() {
        GroupDescriptor::Free { rank } => *rank,
        other => {
            return Err(Error::NotIsotropic(format!("{other} is not a free group")));
        }
    };
    let q = 2 * s;
    let mut spheres: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for (g, m) in mu.mantissas() {
        let r = match g {
            GroupElement::Free(w) => w.len(),
            _ => unreachable!("measure elements match the group"),
        };
        spheres.entry(r).or_default().push(m);
    }
    let radius = spheres.keys().next_back().copied().unwrap_or(0);
    let mut values = vec![0.0; radius + 1];
    for (r, masses) in spheres {
        let size = log_sphere_size(r, q).exp().round() as usize;
        let first = masses[0];
        let uniform = masses
            .iter()
            .all(|m| (m - first).abs() <= ISOTROPY_TOLERANCE * first);
        if masses.len() != size || !uniform {
            return Err(Error::NotIsotropic(format!(
                "sphere of radius {r} is not uniformly weighted"
            )));
        }
        values[r] = first;
    }
    Ok(RadialMeasure {
        values,
        log_scale: mu.log_scale(),
        q,
    })
}

/// `(f * g)(n) = Σ_{k,l} f(k) g(l) M(n,k,l)`.
pub fn radial_convolve(f: &RadialMeasure, g: &RadialMeasure) -> Result<RadialMeasure> {
    if f.q != g.q {
        return Err(Error::InvalidArgument(format!(
            "tree degrees differ ({} vs {})",
            f.q, g.q
        )));
    }
    let out_radius = f.radius() + g.radius();
    let mut values = vec![0.0; out_radius + 1];
    for (n, out) in values.iter_mut().enumerate() {
        for (k, &a) in f.values.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (l, &b) in g.values.iter().enumerate() {
                let c = tree_sphere_count(n, k, l, f.q);
                if c > 0 {
                    *out += a * b * c as f64;
                }
            }
        }
    }
    let mut m = RadialMeasure {
        values,
        log_scale: f.log_scale + g.log_scale,
        q: f.q,
    };
    m.renormalize();
    Ok(m)
}
