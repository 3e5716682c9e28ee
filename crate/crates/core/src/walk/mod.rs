//! Measures, convolution powers and transition probabilities.

mod dense;
mod measure;
mod powers;
mod radial;

pub use dense::{DenseOptions, DensePowers};
pub use measure::{
    probe_period, validate_measure, Generation, MeasureReport, ScaledMeasure, DEFAULT_SUPPORT_CAP,
    PERIOD_PROBE_DEPTH,
};
pub use powers::{
    is_aperiodic, period, require_aperiodic, transition, Engine, PowerTable, PowersCache,
};
pub use radial::{log_sphere_size, radial_convolve, radial_reduce, tree_sphere_count, RadialMeasure};

use crate::error::{Error, Result};

/// Build options shared by all engines.
#[derive(Clone, Copy, Debug, Default)]
pub struct PowerOptions {
    /// Force an engine instead of picking one from the group.
    pub engine: Option<Engine>,
    pub support_cap: Option<usize>,
    pub dense: DenseOptions,
}

/// Builds convolution powers up to `depth`, picking the dense engine when the
/// group and measure allow it and the keyed engine otherwise.
///
/// Budget exhaustion truncates the table; check [`PowerTable::exhausted`].
pub fn build_powers(
    step: &ScaledMeasure,
    depth: usize,
    options: PowerOptions,
) -> Result<Box<dyn PowerTable>> {
    let group = step.group();
    let generic = || -> Box<dyn PowerTable> {
        Box::new(PowersCache::build_capped(
            step,
            depth,
            options.support_cap.unwrap_or(DEFAULT_SUPPORT_CAP),
        ))
    };
    match options.engine {
        Some(Engine::Generic) => Ok(generic()),
        Some(wanted) => {
            let t = DensePowers::build(step, depth, options.dense)?;
            if t.engine() != wanted {
                return Err(Error::InvalidArgument(format!(
                    "engine {wanted:?} does not apply to {group}"
                )));
            }
            Ok(Box::new(t))
        }
        None if DensePowers::supports(group) => match DensePowers::build(step, depth, options.dense) {
            Ok(t) => Ok(Box::new(t)),
            Err(Error::NotIsotropic(_)) => Ok(generic()),
            Err(e) => Err(e),
        },
        None => Ok(generic()),
    }
}
