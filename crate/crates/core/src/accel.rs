//! Sequence acceleration for slowly converging tails.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Polynomial extrapolation in `h = 1/m` to `h = 0` through the given points.
///
/// Two points give first-order Richardson `(m₂s₂ − m₁s₁)/(m₂ − m₁)`; three
/// points also cancel the `1/m²` term.
pub fn richardson(points: &[(f64, f64)]) -> f64 {
    let mut acc = 0.0;
    for (i, &(mi, si)) in points.iter().enumerate() {
        let hi = 1.0 / mi;
        let mut w = 1.0;
        for (j, &(mj, _)) in points.iter().enumerate() {
            if i != j {
                let hj = 1.0 / mj;
                w *= hj / (hj - hi);
            }
        }
        acc += w * si;
    }
    acc
}

/// Aitken's Δ² on three consecutive terms; `None` when the second difference vanishes.
pub fn aitken(a: f64, b: f64, c: f64) -> Option<f64> {
    let d2 = c - 2.0 * b + a;
    if d2.abs() <= f64::EPSILON * (a.abs() + b.abs() + c.abs()) {
        None
    } else {
        Some(c - (c - b) * (c - b) / d2)
    }
}

/// Extrapolated limit of a sequence with an uncertainty band.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TailEstimate {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    /// First and last index of the window the band is taken over.
    pub window: (usize, usize),
    pub accelerated: bool,
    /// Last raw term.
    pub raw_last: f64,
    /// Range of the raw terms over the window.
    pub raw_lo: f64,
    pub raw_hi: f64,
}

impl TailEstimate {
    pub fn spread(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn raw_oscillation(&self) -> f64 {
        self.raw_hi - self.raw_lo
    }

    pub fn exact(value: f64, window: (usize, usize)) -> Self {
        TailEstimate {
            estimate: value,
            lo: value,
            hi: value,
            window,
            accelerated: false,
            raw_last: value,
            raw_lo: value,
            raw_hi: value,
        }
    }

    /// Applies a monotone map to estimate and band.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        let (a, b) = (f(self.lo), f(self.hi));
        let (c, d) = (f(self.raw_lo), f(self.raw_hi));
        TailEstimate {
            estimate: f(self.estimate),
            lo: a.min(b),
            hi: a.max(b),
            window: self.window,
            accelerated: self.accelerated,
            raw_last: f(self.raw_last),
            raw_lo: c.min(d),
            raw_hi: c.max(d),
        }
    }
}

/// Second-order Richardson over consecutive triples of `(m, s_m)`, which must be
/// equally spaced in `m`. The estimate is the last extrapolated value; the band
/// spans the extrapolated values over the last quarter, widened to include the
/// last first-order value.
pub fn tail_estimate(seq: &[(usize, f64)]) -> Result<TailEstimate> {
    let n = seq.len();
    let Some(&(last_m, last)) = seq.last() else {
        return Err(Error::NotConverged("empty sequence".into()));
    };
    if seq.iter().all(|p| p.1 == last) {
        return Ok(TailEstimate::exact(last, (seq[0].0, last_m)));
    }
    let pt = |i: usize| (seq[i].0 as f64, seq[i].1);
    if n < 3 {
        let est = if n == 2 { richardson(&[pt(0), pt(1)]) } else { last };
        let (lo, hi) = (est.min(last), est.max(last));
        return Ok(TailEstimate {
            estimate: est,
            lo,
            hi,
            window: (seq[0].0, last_m),
            accelerated: n == 2,
            raw_last: last,
            raw_lo: seq[0].1.min(last),
            raw_hi: seq[0].1.max(last),
        });
    }
    let r2: Vec<f64> = (0..n - 2)
        .map(|i| richardson(&[pt(i), pt(i + 1), pt(i + 2)]))
        .collect();
    let window = (r2.len() / 4).max(3).min(r2.len());
    let start = r2.len() - window;
    let tail = &r2[start..];
    let r1 = richardson(&[pt(n - 2), pt(n - 1)]);
    let mut lo = tail.iter().copied().fold(f64::INFINITY, f64::min);
    let mut hi = tail.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    lo = lo.min(r1);
    hi = hi.max(r1);
    let raw = &seq[start..];
    let raw_lo = raw.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
    let raw_hi = raw.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
    Ok(TailEstimate {
        estimate: *r2.last().expect("nonempty"),
        lo,
        hi,
        window: (seq[start].0, last_m),
        accelerated: true,
        raw_last: last,
        raw_lo,
        raw_hi,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn richardson_kills_polynomial_terms() {
        let s = |m: f64| 2.0 + 3.0 / m - 5.0 / (m * m);
        let pts: Vec<(f64, f64)> = [10.0, 11.0, 12.0].iter().map(|&m| (m, s(m))).collect();
        assert_relative_eq!(richardson(&pts), 2.0, epsilon = 1e-12);
        let r1 = richardson(&pts[..2]);
        assert_relative_eq!(r1, 11.0 * s(11.0) - 10.0 * s(10.0), epsilon = 1e-12);
    }

    #[test]
    fn aitken_geometric() {
        let s = |k: i32| 1.0 + 0.5f64.powi(k);
        assert_relative_eq!(aitken(s(3), s(4), s(5)).unwrap(), 1.0, epsilon = 1e-14);
        assert!(aitken(1.0, 1.0, 1.0).is_none());
    }

    #[test]
    fn tail_band_contains_limit() {
        let seq: Vec<(usize, f64)> = (1..=200)
            .map(|m| (m, 0.5 + 1.0 / m as f64 + 1.0 / (m * m * m) as f64))
            .collect();
        let t = tail_estimate(&seq).unwrap();
        assert!(t.lo <= 0.5 + 1e-6 && 0.5 - 1e-6 <= t.hi);
        assert!((t.estimate - 0.5).abs() < 1e-6);
        assert!(t.raw_oscillation() > 0.0);
    }

    #[test]
    fn constant_sequence_is_exact() {
        let seq: Vec<(usize, f64)> = (1..=50).map(|m| (m, 1.0)).collect();
        let t = tail_estimate(&seq).unwrap();
        assert_eq!((t.estimate, t.lo, t.hi), (1.0, 1.0, 1.0));
    }
}
