use std::collections::BTreeMap;
use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Relative stopping tolerance of the power iteration.
pub const NORM_TOLERANCE: f64 = 1e-10;
const NORM_MAX_ITERATIONS: usize = 20_000;
const NORM_SEED: u64 = 0x5eed;

/// Coefficient field of a windowed operator.
pub trait Scalar:
    Copy + PartialEq + Send + Sync + Add<Output = Self> + Sub<Output = Self> + Mul<Output = Self> + std::fmt::Debug
{
    fn zero() -> Self;
    fn from_real(v: f64) -> Self;
    fn conj(self) -> Self;
    fn modulus(self) -> f64;
    fn parts(self) -> (f64, f64);
}

impl Scalar for f64 {
    fn zero() -> Self {
        0.0
    }
    fn from_real(v: f64) -> Self {
        v
    }
    fn conj(self) -> Self {
        self
    }
    fn modulus(self) -> f64 {
        self.abs()
    }
    fn parts(self) -> (f64, f64) {
        (self, 0.0)
    }
}

impl Scalar for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn from_real(v: f64) -> Self {
        Complex64::new(v, 0.0)
    }
    fn conj(self) -> Self {
        Complex64::conj(&self)
    }
    fn modulus(self) -> f64 {
        self.norm()
    }
    fn parts(self) -> (f64, f64) {
        (self.re, self.im)
    }
}

/// Sparse matrix on a window basis, keyed by `(output, input)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOp<T: Scalar> {
    pub label: String,
    entries: BTreeMap<(usize, usize), T>,
}

pub type WindowedOperator = SparseOp<f64>;
pub type ComplexOperator = SparseOp<Complex64>;

impl<T: Scalar> SparseOp<T> {
    pub fn new(label: impl Into<String>) -> Self {
        SparseOp {
            label: label.into(),
            entries: BTreeMap::new(),
        }
    }

    pub fn from_entries(label: impl Into<String>, entries: impl IntoIterator<Item = ((usize, usize), T)>) -> Self {
        let mut op = Self::new(label);
        for ((o, i), c) in entries {
            op.add_entry(o, i, c);
        }
        op
    }

    /// Adds `c` to the `(output, input)` coefficient; exact zeros are dropped.
    pub fn add_entry(&mut self, output: usize, input: usize, c: T) {
        let slot = self.entries.entry((output, input)).or_insert(T::zero());
        *slot = *slot + c;
        if *slot == T::zero() {
            self.entries.remove(&(output, input));
        }
    }

    pub fn get(&self, output: usize, input: usize) -> T {
        self.entries.get(&(output, input)).copied().unwrap_or(T::zero())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        self.entries.iter().map(|(&(o, i), &c)| (o, i, c))
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn adjoint(&self) -> Self {
        SparseOp {
            label: format!("({})*", self.label),
            entries: self.entries.iter().map(|(&(o, i), &c)| ((i, o), c.conj())).collect(),
        }
    }

    /// `self ∘ rhs`.
    pub fn compose(&self, rhs: &SparseOp<T>) -> Self {
        let mut by_row: BTreeMap<usize, Vec<(usize, T)>> = BTreeMap::new();
        for (&(o, i), &c) in &self.entries {
            by_row.entry(i).or_default().push((o, c));
        }
        let mut out = SparseOp::new(format!("{} {}", self.label, rhs.label));
        for (&(mid, i), &b) in &rhs.entries {
            if let Some(list) = by_row.get(&mid) {
                for &(o, a) in list {
                    out.add_entry(o, i, a * b);
                }
            }
        }
        out
    }

    pub fn sub(&self, rhs: &SparseOp<T>) -> Self {
        let mut out = self.clone().with_label(format!("{} - {}", self.label, rhs.label));
        for (&(o, i), &c) in &rhs.entries {
            out.add_entry(o, i, T::zero() - c);
        }
        out
    }

    pub fn add(&self, rhs: &SparseOp<T>) -> Self {
        let mut out = self.clone().with_label(format!("{} + {}", self.label, rhs.label));
        for (&(o, i), &c) in &rhs.entries {
            out.add_entry(o, i, c);
        }
        out
    }

    pub fn scale(&self, s: T) -> Self {
        SparseOp {
            label: self.label.clone(),
            entries: self
                .entries
                .iter()
                .map(|(&k, &c)| (k, s * c))
                .filter(|(_, c)| *c != T::zero())
                .collect(),
        }
    }

    /// Keeps the entries whose output and input satisfy the predicates.
    pub fn restrict(&self, output: impl Fn(usize) -> bool, input: impl Fn(usize) -> bool) -> Self {
        SparseOp {
            label: self.label.clone(),
            entries: self
                .entries
                .iter()
                .filter(|(&(o, i), _)| output(o) && input(i))
                .map(|(&k, &c)| (k, c))
                .collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.entries.values().map(|c| c.modulus()).fold(0.0, f64::max)
    }

    /// Largest singular value by power iteration on `A*A` from a fixed seed.
    pub fn norm(&self) -> f64 {
        if self.entries.is_empty() {
            return 0.0;
        }
        let mut inputs: Vec<usize> = self.entries.keys().map(|k| k.1).collect();
        inputs.sort_unstable();
        inputs.dedup();
        let mut outputs: Vec<usize> = self.entries.keys().map(|k| k.0).collect();
        outputs.sort_unstable();
        outputs.dedup();
        let col = |i: usize| inputs.binary_search(&i).expect("input index");
        let row = |o: usize| outputs.binary_search(&o).expect("output index");
        let triples: Vec<(usize, usize, T)> = self
            .entries
            .iter()
            .map(|(&(o, i), &c)| (row(o), col(i), c))
            .collect();
        let mut rng = ChaCha8Rng::seed_from_u64(NORM_SEED);
        let mut v: Vec<T> = (0..inputs.len())
            .map(|_| T::from_real(rng.random_range(0.5..1.5)))
            .collect();
        let len = |v: &[T]| v.iter().map(|c| c.modulus().powi(2)).sum::<f64>().sqrt();
        let n0 = len(&v);
        v.iter_mut().for_each(|c| *c = *c * T::from_real(1.0 / n0));
        let mut sigma = 0.0;
        for _ in 0..NORM_MAX_ITERATIONS {
            let mut w = vec![T::zero(); outputs.len()];
            for &(o, i, c) in &triples {
                w[o] = w[o] + c * v[i];
            }
            let mut u = vec![T::zero(); inputs.len()];
            for &(o, i, c) in &triples {
                u[i] = u[i] + c.conj() * w[o];
            }
            let lambda = len(&u);
            let next = lambda.sqrt();
            if lambda == 0.0 {
                return len(&w);
            }
            u.iter_mut().for_each(|c| *c = *c * T::from_real(1.0 / lambda));
            v = u;
            if (next - sigma).abs() <= NORM_TOLERANCE * next {
                return next;
            }
            sigma = next;
        }
        sigma
    }

    pub fn dump(&self) -> OperatorDump {
        OperatorDump {
            label: self.label.clone(),
            entries: self
                .entries
                .iter()
                .map(|(&(o, i), c)| {
                    let (re, im) = c.parts();
                    (o, i, re, im)
                })
                .collect(),
        }
    }
}

impl SparseOp<f64> {
    pub fn to_complex(&self) -> ComplexOperator {
        SparseOp::from_entries(
            self.label.clone(),
            self.entries().map(|(o, i, c)| ((o, i), Complex64::new(c, 0.0))),
        )
    }
}

/// Coefficient triplets `(output, input, re, im)` in basis order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorDump {
    pub label: String,
    pub entries: Vec<(usize, usize, f64, f64)>,
}
