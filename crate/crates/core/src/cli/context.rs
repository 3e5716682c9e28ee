use std::path::PathBuf;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use super::cache::ArtifactCache;
use crate::config::{KernelSource, RunConfig};
use crate::error::{Error, Result};
use crate::group::{GroupDescriptor, GroupElement};
use crate::ratio::{
    cartesian_h, estimate_table, nearest_neighbour_rho, FreeClosedForm, KernelEntry, KernelKind, KernelTable,
    KernelValue, RatioKernel, UnitKernel, ACCELERATION,
};
use crate::report::{DiagnosticsReport, Provenance};
use crate::spectral::{martin_table, MartinOptions, Spectrum};
use crate::walk::{build_powers, radial_reduce, PowerOptions, PowerTable, ScaledMeasure};

/// Command-line overrides of the config.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub max_depth: Option<usize>,
    pub tolerance: Option<f64>,
    pub closed_form_compare: bool,
    pub seed: Option<u64>,
}

/// Shared state of one run: the power table, lazily derived estimates and the
/// artifact cache.
pub struct Context {
    pub config: RunConfig,
    pub step: ScaledMeasure,
    pub depth: usize,
    pub seed: u64,
    pub tolerance: Option<f64>,
    pub closed_form_compare: bool,
    pub out: PathBuf,
    cache: ArtifactCache,
    base_key: String,
    table: OnceLock<Box<dyn PowerTable>>,
    spectrum: OnceLock<Spectrum>,
}

#[derive(Serialize, Deserialize)]
struct CachedTable {
    rho_hat: f64,
    depth: usize,
    entries: Vec<(GroupElement, GroupElement, KernelEntry)>,
}

impl CachedTable {
    fn from_table(t: &KernelTable) -> Self {
        CachedTable {
            rho_hat: t.rho_hat,
            depth: t.depth,
            entries: t.entries.iter().map(|((x, y), e)| (x.clone(), y.clone(), e.clone())).collect(),
        }
    }

    fn into_table(self, kind: KernelKind, group: &GroupDescriptor) -> KernelTable {
        let mut t = KernelTable::new(kind, group, self.rho_hat, self.depth);
        for (x, y, e) in self.entries {
            t.insert(x, y, e);
        }
        t
    }
}

impl Context {
    pub fn new(config: RunConfig, out: PathBuf, overrides: &Overrides) -> Result<Self> {
        let step = config.step()?;
        let depth = match overrides.max_depth {
            Some(0) => return Err(Error::InvalidArgument("--max-depth must be positive".into())),
            Some(m) => m,
            None => config.depth,
        };
        if let Some(t) = overrides.tolerance {
            if !(t > 0.0 && t < 1.0) {
                return Err(Error::InvalidArgument(format!("--tolerance {t} must lie in (0, 1)")));
            }
        }
        let base_key = ArtifactCache::key(&[
            &serde_json::to_string(&config.group)?,
            &step.to_text(),
            &depth.to_string(),
            &format!("{:?}", config.engine),
        ]);
        Ok(Context {
            seed: overrides.seed.unwrap_or(config.seed),
            tolerance: overrides.tolerance,
            closed_form_compare: overrides.closed_form_compare,
            cache: ArtifactCache::new(out.join("cache")),
            out,
            base_key,
            step,
            depth,
            config,
            table: OnceLock::new(),
            spectrum: OnceLock::new(),
        })
    }

    pub fn group(&self) -> &GroupDescriptor {
        &self.config.group
    }

    /// The power table; a budget stop before the requested depth is an error.
    pub fn table(&self) -> Result<&dyn PowerTable> {
        if let Some(t) = self.table.get() {
            return Ok(t.as_ref());
        }
        let options = PowerOptions {
            engine: self.config.engine,
            ..PowerOptions::default()
        };
        let t = build_powers(&self.step, self.depth, options)?;
        if let Some(Error::Budget { what, needed, cap }) = t.exhausted() {
            return Err(Error::Budget {
                what,
                needed: *needed,
                cap: *cap,
            });
        }
        if t.depth() < self.depth {
            return Err(Error::DepthExceeded {
                requested: self.depth,
                available: t.depth(),
            });
        }
        Ok(self.table.get_or_init(|| t).as_ref())
    }

    pub fn spectrum(&self) -> Result<&Spectrum> {
        if let Some(s) = self.spectrum.get() {
            return Ok(s);
        }
        let s = self.cache.get_or_compute("spectrum", &self.base_key, || {
            Spectrum::estimate(self.table()?)
        })?;
        Ok(self.spectrum.get_or_init(|| s))
    }

    /// Exact `ρ` when known in closed form, else `ρ̂`.
    pub fn rho(&self) -> Result<f64> {
        match nearest_neighbour_rho(&self.step) {
            Some(r) => Ok(r),
            None => Ok(self.spectrum()?.rho()),
        }
    }

    fn set_key(&self, kind: &str, xs: &[GroupElement], ys: &[GroupElement]) -> String {
        let fmt = |v: &[GroupElement]| v.iter().map(|g| self.group().format(g)).collect::<Vec<_>>().join(";");
        ArtifactCache::key(&[&self.base_key, kind, &fmt(xs), &fmt(ys)])
    }

    pub fn ratio_table(&self, xs: &[GroupElement], ys: &[GroupElement]) -> Result<KernelTable> {
        let rho = self.spectrum()?.rho();
        let cached = self.cache.get_or_compute("ratio", &self.set_key("ratio", xs, ys), || {
            Ok(CachedTable::from_table(&estimate_table(self.table()?, rho, xs, ys)?))
        })?;
        Ok(cached.into_table(KernelKind::Ratio, self.group()))
    }

    pub fn martin_table(&self, xs: &[GroupElement], ys: &[GroupElement]) -> Result<KernelTable> {
        let spectrum = self.spectrum()?;
        let cached = self.cache.get_or_compute("martin", &self.set_key("martin", xs, ys), || {
            let t = martin_table(self.table()?, spectrum, xs, ys, MartinOptions::default())?;
            Ok(CachedTable::from_table(&t))
        })?;
        Ok(cached.into_table(KernelKind::Martin, self.group()))
    }

    /// The closed-form kernel of the walk, if one applies.
    pub fn closed_form(&self) -> Result<ClosedKernel> {
        closed_form_for(&self.step)
    }

    /// The kernel named by `source`, tabulated over `xs × ys` when estimated.
    pub fn kernel(
        &self,
        source: KernelSource,
        xs: &[GroupElement],
        ys: &[GroupElement],
    ) -> Result<Box<dyn RatioKernel>> {
        Ok(match source {
            KernelSource::Estimated => Box::new(self.ratio_table(xs, ys)?),
            KernelSource::ClosedForm => Box::new(self.closed_form()?),
            KernelSource::Unit => Box::new(UnitKernel),
        })
    }

    /// Fills provenance fields a report left empty.
    pub fn stamp(&self, mut r: DiagnosticsReport) -> DiagnosticsReport {
        let p = &mut r.provenance;
        p.depth.get_or_insert(self.depth);
        if p.rho_hat.is_none() {
            p.rho_hat = self.spectrum.get().map(Spectrum::rho);
        }
        p.acceleration.get_or_insert_with(|| ACCELERATION.into());
        if p.engine.is_none() {
            p.engine = self.table.get().map(|t| format!("{:?}", t.engine()).to_lowercase());
        }
        r
    }

    pub fn provenance(&self) -> Provenance {
        self.stamp(DiagnosticsReport::new("")).provenance
    }
}

/// Closed-form ratio-limit kernels.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosedKernel {
    /// `H ≡ 1`: symmetric walks on `Z^d` and the trivial group.
    Unit,
    /// Isotropic walks on `F_s`.
    Free(usize),
    /// Cartesian walks on `F_s × Z^d` with an isotropic free marginal and a
    /// symmetric lattice marginal.
    Cartesian(usize),
}

impl RatioKernel for ClosedKernel {
    fn value(&self, x: &GroupElement, y: &GroupElement) -> Result<KernelValue> {
        match *self {
            ClosedKernel::Unit => UnitKernel.value(x, y),
            ClosedKernel::Free(rank) => FreeClosedForm { rank }.value(x, y),
            ClosedKernel::Cartesian(rank) => cartesian_h(&FreeClosedForm { rank }, &UnitKernel, x, y),
        }
    }

    fn label(&self) -> String {
        match *self {
            ClosedKernel::Unit => UnitKernel.label(),
            ClosedKernel::Free(rank) => FreeClosedForm { rank }.label(),
            ClosedKernel::Cartesian(rank) => format!("closed form on F_{rank} x unit"),
        }
    }
}

pub fn closed_form_for(step: &ScaledMeasure) -> Result<ClosedKernel> {
    let group = step.group();
    let none = || Error::InvalidArgument(format!("no closed-form kernel for this walk on {group}"));
    match group {
        GroupDescriptor::Trivial => Ok(ClosedKernel::Unit),
        GroupDescriptor::Lattice { .. } if step.is_symmetric() => Ok(ClosedKernel::Unit),
        GroupDescriptor::Free { rank } if radial_reduce(step).is_ok() => Ok(ClosedKernel::Free(*rank)),
        GroupDescriptor::Product { left, right } => {
            let (GroupDescriptor::Free { rank }, GroupDescriptor::Lattice { .. }) = (left.as_ref(), right.as_ref())
            else {
                return Err(none());
            };
            let mut lw = Vec::new();
            let mut rw = Vec::new();
            for (g, _) in step.mantissas() {
                let GroupElement::Product(a, b) = g else {
                    return Err(none());
                };
                let p = step.value(g);
                if !left.is_identity(a) && !right.is_identity(b) {
                    return Err(none());
                }
                lw.push((a.as_ref().clone(), p));
                rw.push((b.as_ref().clone(), p));
            }
            let lm = ScaledMeasure::from_weights(left, lw)?;
            let rm = ScaledMeasure::from_weights(right, rw)?;
            if radial_reduce(&lm).is_ok() && rm.is_symmetric() {
                Ok(ClosedKernel::Cartesian(*rank))
            } else {
                Err(none())
            }
        }
        _ => Err(none()),
    }
}
