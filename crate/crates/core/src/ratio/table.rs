use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, GroupElement};

/// A kernel value with its uncertainty band.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelValue {
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
}

impl KernelValue {
    pub fn exact(v: f64) -> Self {
        KernelValue {
            estimate: v,
            lo: v,
            hi: v,
        }
    }

    /// Half-width of the band around the estimate (the larger side).
    pub fn uncertainty(&self) -> f64 {
        (self.hi - self.estimate).max(self.estimate - self.lo)
    }

    pub fn times(&self, other: &KernelValue) -> KernelValue {
        KernelValue {
            estimate: self.estimate * other.estimate,
            lo: self.lo * other.lo,
            hi: self.hi * other.hi,
        }
    }
}

/// A kernel `(x, y) ↦ value`, either tabulated or in closed form.
pub trait RatioKernel: Sync {
    fn value(&self, x: &GroupElement, y: &GroupElement) -> Result<KernelValue>;

    fn label(&self) -> String;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum KernelKind {
    /// Ratio-limit kernel `H`.
    Ratio,
    /// ρ-Martin kernel `K`.
    Martin,
}

/// How a tabulated value was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimateMethod {
    /// Known exactly (base point or constant sequence).
    Exact,
    /// Richardson extrapolation in `1/m` of the ratio tail.
    Richardson,
    /// Green series summed at `z = 1/ρ̂` with a tail correction.
    AtRadius,
    /// Aitken Δ² along the ladder `z_k → 1/ρ̂`.
    Ladder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelEntry {
    pub value: KernelValue,
    /// Range of levels (or ladder rungs) the band was taken over.
    pub window: (usize, usize),
    pub accelerated: bool,
    pub method: EstimateMethod,
    /// Last unaccelerated term, kept for auditing.
    pub raw_last: f64,
}

impl KernelEntry {
    pub fn exact(v: f64, window: (usize, usize)) -> Self {
        KernelEntry {
            value: KernelValue::exact(v),
            window,
            accelerated: false,
            method: EstimateMethod::Exact,
            raw_last: v,
        }
    }
}

/// Tabulated kernel estimates.
#[derive(Clone, Debug)]
pub struct KernelTable {
    pub kind: KernelKind,
    pub group: GroupDescriptor,
    pub rho_hat: f64,
    pub depth: usize,
    pub entries: BTreeMap<(GroupElement, GroupElement), KernelEntry>,
}

/// One row of an exported kernel table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelRow {
    pub x: String,
    pub y: String,
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub method: EstimateMethod,
    pub accelerated: bool,
    pub m_first: usize,
    pub m_last: usize,
    pub raw_last: f64,
}

impl KernelTable {
    pub fn new(kind: KernelKind, group: &GroupDescriptor, rho_hat: f64, depth: usize) -> Self {
        KernelTable {
            kind,
            group: group.clone(),
            rho_hat,
            depth,
            entries: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, x: GroupElement, y: GroupElement, entry: KernelEntry) {
        self.entries.insert((x, y), entry);
    }

    pub fn get(&self, x: &GroupElement, y: &GroupElement) -> Option<&KernelEntry> {
        self.entries.get(&(x.clone(), y.clone()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Largest band half-width over all entries.
    pub fn max_uncertainty(&self) -> f64 {
        self.entries
            .values()
            .map(|e| e.value.uncertainty())
            .fold(0.0, f64::max)
    }

    pub fn rows(&self) -> Vec<KernelRow> {
        self.entries
            .iter()
            .map(|((x, y), e)| KernelRow {
                x: self.group.format(x),
                y: self.group.format(y),
                estimate: e.value.estimate,
                lower: e.value.lo,
                upper: e.value.hi,
                method: e.method,
                accelerated: e.accelerated,
                m_first: e.window.0,
                m_last: e.window.1,
                raw_last: e.raw_last,
            })
            .collect()
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,y,estimate,lower,upper,method,accelerated,m_first,m_last,raw_last\n");
        for r in self.rows() {
            let method = serde_json::to_value(r.method)
                .ok()
                .and_then(|v| v.as_str().map(str::to_owned))
                .unwrap_or_default();
            out.push_str(&format!(
                "\"{}\",\"{}\",{:.17e},{:.17e},{:.17e},{},{},{},{},{:.17e}\n",
                r.x, r.y, r.estimate, r.lower, r.upper, method, r.accelerated, r.m_first, r.m_last, r.raw_last
            ));
        }
        out
    }
}

impl RatioKernel for KernelTable {
    fn value(&self, x: &GroupElement, y: &GroupElement) -> Result<KernelValue> {
        if self.group.is_identity(x) {
            return Ok(KernelValue::exact(1.0));
        }
        self.get(x, y).map(|e| e.value).ok_or_else(|| {
            Error::Coverage(format!(
                "no {:?} entry for ({}, {})",
                self.kind,
                self.group.format(x),
                self.group.format(y)
            ))
        })
    }

    fn label(&self) -> String {
        format!("{:?} table on {} (M = {})", self.kind, self.group, self.depth)
    }
}

/// The kernel that is identically 1, as for symmetric walks on amenable groups.
#[derive(Clone, Copy, Debug, Default)]
pub struct UnitKernel;

impl RatioKernel for UnitKernel {
    fn value(&self, _: &GroupElement, _: &GroupElement) -> Result<KernelValue> {
        Ok(KernelValue::exact(1.0))
    }

    fn label(&self) -> String {
        "unit kernel".into()
    }
}

/// Closed form of `H` for isotropic walks on `F_s`:
/// `(1 + c·d(x,y)) / (1 + c·|y|) · (2s−1)^{(|y| − d(x,y))/2}` with `c = (s−1)/s`.
#[derive(Clone, Copy, Debug)]
pub struct FreeClosedForm {
    pub rank: usize,
}

pub fn closed_form_h_free_isotropic(s: usize, x: &GroupElement, y: &GroupElement) -> Result<f64> {
    let group = GroupDescriptor::free(s);
    let dxy = group.word_length(&group.left_quotient(x, y)?)? as f64;
    let dy = group.word_length(y)? as f64;
    let c = (s as f64 - 1.0) / s as f64;
    let base = 2.0 * s as f64 - 1.0;
    Ok((1.0 + c * dxy) / (1.0 + c * dy) * base.powf((dy - dxy) / 2.0))
}

impl RatioKernel for FreeClosedForm {
    fn value(&self, x: &GroupElement, y: &GroupElement) -> Result<KernelValue> {
        closed_form_h_free_isotropic(self.rank, x, y).map(KernelValue::exact)
    }

    fn label(&self) -> String {
        format!("closed form on F_{}", self.rank)
    }
}

/// `H((w₁,v₁),(w₂,v₂)) = H₁(w₁,w₂)·H₂(v₁,v₂)` for Cartesian product walks.
pub struct CartesianKernel<'a> {
    pub left: &'a dyn RatioKernel,
    pub right: &'a dyn RatioKernel,
}

impl RatioKernel for CartesianKernel<'_> {
    fn value(&self, x: &GroupElement, y: &GroupElement) -> Result<KernelValue> {
        match (x, y) {
            (GroupElement::Product(x1, x2), GroupElement::Product(y1, y2)) => {
                Ok(self.left.value(x1, y1)?.times(&self.right.value(x2, y2)?))
            }
            _ => Err(Error::InvalidArgument(
                "product kernel needs product elements".into(),
            )),
        }
    }

    fn label(&self) -> String {
        format!("({}) x ({})", self.left.label(), self.right.label())
    }
}

/// Product of two component kernels at a pair of product elements.
pub fn cartesian_h(
    left: &dyn RatioKernel,
    right: &dyn RatioKernel,
    x: &GroupElement,
    y: &GroupElement,
) -> Result<KernelValue> {
    CartesianKernel { left, right }.value(x, y)
}
