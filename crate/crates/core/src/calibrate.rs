//! Refitting the frozen constants. Never run by the test suite; the CLI
//! exposes it as an explicit command.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::appendix::{incomplete_audit, lemma1_audit, lemma1_exclusion_audit, lemma2_bound_audit};
use crate::error::Result;
use crate::registry::{freeze, Registry};
use crate::weight::{calibration_grid, shared_bump, InertFunction, A8_FIT_LIMIT};

/// Calibration grids. The defaults are the acceptance grids.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RefitGrid {
    pub xi_max: f64,
    pub lemma1_s_max: u64,
    pub exclusion_s_max: u64,
    pub lemma2_s_max: u64,
    pub incomplete_l_max: u64,
    pub incomplete_xs: Vec<f64>,
}

impl Default for RefitGrid {
    fn default() -> Self {
        Self {
            xi_max: 1000.0,
            lemma1_s_max: 343,
            exclusion_s_max: 128,
            lemma2_s_max: 256,
            incomplete_l_max: 100,
            incomplete_xs: vec![10.0, 100.0, 1000.0],
        }
    }
}

/// Observed maxima on the grids and the registry that freezes them.
pub fn refit(grid: &RefitGrid) -> Result<(Registry, BTreeMap<String, f64>)> {
    let mut observed = BTreeMap::new();
    let w = shared_bump();
    let xis = calibration_grid(grid.xi_max);
    let near: Vec<f64> = xis.iter().copied().filter(|x| *x <= A8_FIT_LIMIT).collect();
    observed.insert("weight.decay_a2".into(), w.observed_decay(2, &xis)?.0);
    observed.insert("weight.decay_a4".into(), w.observed_decay(4, &xis)?.0);
    observed.insert("weight.decay_a8".into(), w.observed_decay(8, &near)?.0);

    // thresholds do not matter for the maxima
    let base = Registry::builtin();
    let l1 = lemma1_audit(grid.lemma1_s_max, &base)?;
    observed.insert("lemma1.odd".into(), l1.recorded.get("odd_max_ratio").copied().unwrap_or(0.0));
    observed.insert("lemma1.two".into(), l1.recorded.get("two_max_ratio").copied().unwrap_or(0.0));
    observed.insert("lemma1.excluded".into(), lemma1_exclusion_audit(grid.exclusion_s_max, &base)?.max_ratio);
    let l2 = lemma2_bound_audit(grid.lemma2_s_max, &base)?;
    observed.insert("lemma2.weak".into(), l2.max_ratio);
    observed.insert("lemma2.strong".into(), l2.recorded.get("strong_max_ratio").copied().unwrap_or(0.0));
    let inc = incomplete_audit(grid.incomplete_l_max, &grid.incomplete_xs, &InertFunction::standard(), &base)?;
    observed.insert("incomplete.envelope".into(), inc.max_ratio);

    let mut reg = base;
    let f = |k: &str| freeze(observed[k].max(f64::MIN_POSITIVE));
    reg.weight.decay_a2 = f("weight.decay_a2");
    reg.weight.decay_a4 = f("weight.decay_a4");
    reg.weight.decay_a8 = f("weight.decay_a8");
    reg.lemma1.odd = f("lemma1.odd");
    reg.lemma1.two = f("lemma1.two");
    reg.lemma1.excluded = f("lemma1.excluded");
    reg.lemma2.weak = f("lemma2.weak");
    reg.lemma2.strong = f("lemma2.strong");
    reg.incomplete.envelope = f("incomplete.envelope");
    Ok((reg, observed))
}
