//! Synthetic data-generating process with known potential outcomes, plus an
//! independent brute-force DiD oracle.
//!
//! The DGP is additive on the analysis scale: unit effects, time effects, an
//! optional extra linear trend for eventually-treated units (time-varying
//! confounding), an optional anticipation window that moves effect onset
//! before adoption, and seeded Gaussian noise. Both potential-outcome
//! surfaces are materialized so estimators can be checked against the truth
//! they chase.
//!
//! `oracle_did` re-derives the event-study contrast with plain nested loops
//! over raw observations and shares no code with the estimator module; the
//! test suites assert numeric agreement between the two routes.

use std::collections::BTreeSet;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::panel::{PanelDataset, TimeMode, TreatmentSchedule, UnitId};
use crate::scalar::Float;

/// Treatment-effect profile over event time k >= 0.
#[derive(Debug, Clone)]
pub enum EffectProfile<F> {
    Constant(F),
    /// tau(k) = table[k] for k < len, holding the last value afterwards.
    Table(Vec<F>),
}

impl<F: Float> EffectProfile<F> {
    /// Effect magnitude at event time k (clamped to k >= 0).
    pub fn at(&self, k: i64) -> F {
        let k = k.max(0) as usize;
        match self {
            EffectProfile::Constant(tau) => *tau,
            EffectProfile::Table(table) => {
                *table.get(k).or_else(|| table.last()).unwrap_or(&F::zero())
            }
        }
    }
}

/// Configuration of the synthetic panel.
#[derive(Debug, Clone)]
pub struct DgpConfig<F> {
    pub n_units: usize,
    pub n_periods: usize,
    /// Per-unit intercepts, length `n_units`.
    pub unit_effects: Vec<F>,
    /// Per-period shocks shared by all units, length `n_periods`.
    pub time_effects: Vec<F>,
    pub treatment_effect: EffectProfile<F>,
    /// Extra per-period drift carried only by eventually-treated units.
    pub differential_trend_slope: F,
    /// Effect onset this many periods before adoption (>= 0).
    pub anticipation_lead: i64,
    pub noise_sd: F,
    pub seed: u64,
    /// Adoption period per unit, `None` for never-treated; length `n_units`.
    pub adoption: Vec<Option<i64>>,
}

impl<F: Float> DgpConfig<F> {
    /// A quiet baseline: zero effects, zero noise, nobody treated.
    pub fn new(n_units: usize, n_periods: usize) -> Self {
        DgpConfig {
            n_units,
            n_periods,
            unit_effects: vec![F::zero(); n_units],
            time_effects: vec![F::zero(); n_periods],
            treatment_effect: EffectProfile::Constant(F::zero()),
            differential_trend_slope: F::zero(),
            anticipation_lead: 0,
            noise_sd: F::zero(),
            seed: 0,
            adoption: vec![None; n_units],
        }
    }

    /// Fills unit and time effects deterministically from the seed.
    pub fn with_seeded_effects(mut self, unit_sd: f64, time_sd: f64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_add(0x05ee_deff_ec75));
        let unit = Normal::new(0.0, unit_sd).expect("sd >= 0");
        let time = Normal::new(0.0, time_sd).expect("sd >= 0");
        self.unit_effects =
            (0..self.n_units).map(|_| F::from_f64_lossy(unit.sample(&mut rng))).collect();
        self.time_effects =
            (0..self.n_periods).map(|_| F::from_f64_lossy(time.sample(&mut rng))).collect();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_units == 0 || self.n_periods == 0 {
            return Err(Error::Config("n_units and n_periods must be positive".into()));
        }
        if self.unit_effects.len() != self.n_units {
            return Err(Error::Config(format!(
                "unit_effects has length {}, expected n_units = {}",
                self.unit_effects.len(),
                self.n_units
            )));
        }
        if self.time_effects.len() != self.n_periods {
            return Err(Error::Config(format!(
                "time_effects has length {}, expected n_periods = {}",
                self.time_effects.len(),
                self.n_periods
            )));
        }
        if self.adoption.len() != self.n_units {
            return Err(Error::Config(format!(
                "adoption has length {}, expected n_units = {}",
                self.adoption.len(),
                self.n_units
            )));
        }
        if self.noise_sd < F::zero() {
            return Err(Error::Config("noise_sd must be >= 0".into()));
        }
        if self.anticipation_lead < 0 {
            return Err(Error::Config("anticipation_lead must be >= 0".into()));
        }
        if let EffectProfile::Table(t) = &self.treatment_effect {
            if t.is_empty() {
                return Err(Error::Config("effect table must not be empty".into()));
            }
        }
        Ok(())
    }

    /// Stable generated unit label for index `i`.
    pub fn unit_label(&self, i: usize) -> UnitId {
        let width = (self.n_units.max(2) - 1).to_string().len();
        UnitId::new(format!("U{i:0width$}")).expect("generated label")
    }

    /// The schedule implied by the adoption vector (periods as calendar days).
    pub fn schedule(&self) -> TreatmentSchedule {
        let mut s = TreatmentSchedule::new(TimeMode::Calendar);
        for (i, adoption) in self.adoption.iter().enumerate() {
            s.insert(self.unit_label(i), *adoption).expect("unique generated labels");
        }
        s
    }

    /// Effect applied at event time k, honoring the anticipation window.
    fn active_effect(&self, k: i64) -> F {
        if k >= -self.anticipation_lead {
            self.treatment_effect.at(k)
        } else {
            F::zero()
        }
    }
}

/// A simulated panel carrying both potential-outcome surfaces.
#[derive(Debug, Clone)]
pub struct SimPanel<F> {
    pub observed: PanelDataset<F>,
    pub y0: PanelDataset<F>,
    pub y1: PanelDataset<F>,
    /// (event time, true average effect) over the simulated range.
    pub truth: Vec<(i64, F)>,
    pub schedule: TreatmentSchedule,
}

/// Draws the synthetic panel. Deterministic given the seed: noise is drawn
/// in (unit, period) order from a counter-based generator.
pub fn simulate<F: Float>(config: &DgpConfig<F>) -> Result<SimPanel<F>> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let noise_sd = config.noise_sd.to_f64().expect("finite sd");
    let normal = if noise_sd > 0.0 { Some(Normal::new(0.0, noise_sd).expect("sd > 0")) } else { None };

    let mut observed = PanelDataset::new(TimeMode::Calendar, "simulated");
    let mut y0 = PanelDataset::new(TimeMode::Calendar, "y0");
    let mut y1 = PanelDataset::new(TimeMode::Calendar, "y1");

    for i in 0..config.n_units {
        let unit = config.unit_label(i);
        let adoption = config.adoption[i];
        let eventually_treated = adoption.is_some();
        for t in 0..config.n_periods {
            let eps = match &normal {
                Some(n) => F::from_f64_lossy(n.sample(&mut rng)),
                None => F::zero(),
            };
            let mut base = config.unit_effects[i] + config.time_effects[t] + eps;
            if eventually_treated {
                base = base + config.differential_trend_slope * F::from_count(t);
            }
            let (y1_val, active) = match adoption {
                Some(a) => {
                    let k = t as i64 - a;
                    (base + config.active_effect(k), k >= -config.anticipation_lead)
                }
                None => (base, false),
            };
            y0.insert(unit.clone(), t as i64, base)?;
            y1.insert(unit.clone(), t as i64, y1_val)?;
            observed.insert(unit.clone(), t as i64, if active { y1_val } else { base })?;
        }
    }

    Ok(SimPanel { observed, y0, y1, truth: truth_table(config), schedule: config.schedule() })
}

/// The estimand table restates the configured profile exactly, over the
/// event times some treated unit observes. `oracle_truth` re-derives the
/// same values from the simulated surfaces as an independent route.
fn truth_table<F: Float>(config: &DgpConfig<F>) -> Vec<(i64, F)> {
    let adoptions: Vec<i64> = config.adoption.iter().flatten().copied().collect();
    let Some(&min_a) = adoptions.iter().min() else {
        return Vec::new();
    };
    let max_a = *adoptions.iter().max().expect("non-empty");
    let horizon = config.n_periods as i64 - 1;
    let k_lo = (-config.anticipation_lead).max(-max_a);
    let k_hi = horizon - min_a;
    (k_lo..=k_hi).map(|k| (k, config.active_effect(k))).collect()
}

/// The estimand at event time k: the average of y1 - y0 over treated units
/// observed at that event time, read directly off the simulated surfaces.
pub fn oracle_truth<F: Float>(sim: &SimPanel<F>, k: i64) -> Result<F> {
    let mut sum = F::zero();
    let mut n = 0usize;
    for (unit, adoption) in sim.schedule.entries() {
        let Some(a) = adoption else { continue };
        let t = a + k;
        if let (Some(v1), Some(v0)) = (sim.y1.value(unit, t), sim.y0.value(unit, t)) {
            sum = sum + (v1 - v0);
            n += 1;
        }
    }
    if n == 0 {
        return Err(Error::NoData(format!("no treated unit observes event time {k}")));
    }
    Ok(sum / F::from_count(n))
}

/// Brute-force event-study contrast: cell means via plain loops over raw
/// observations. Independent of the estimator module by construction.
pub fn oracle_did<F: Float>(
    panel: &PanelDataset<F>,
    cohort_units: &BTreeSet<UnitId>,
    adoption: i64,
    comparison_units: &BTreeSet<UnitId>,
    k: i64,
    reference_offset: i64,
) -> Result<F> {
    // cells: [treated@k, treated@ref, comparison@k, comparison@ref]
    let mut sums = [F::zero(); 4];
    let mut counts = [0usize; 4];
    for (unit, t, v) in panel.observations() {
        let group = if cohort_units.contains(unit) {
            0
        } else if comparison_units.contains(unit) {
            2
        } else {
            continue;
        };
        if t == adoption + k {
            sums[group] = sums[group] + v;
            counts[group] += 1;
        }
        if t == adoption + reference_offset {
            sums[group + 1] = sums[group + 1] + v;
            counts[group + 1] += 1;
        }
    }
    let names = ["treated_k", "treated_reference", "comparison_k", "comparison_reference"];
    for (idx, name) in names.iter().enumerate() {
        if counts[idx] == 0 {
            return Err(Error::NoData((*name).to_string()));
        }
    }
    let mean = |i: usize| sums[i] / F::from_count(counts[i]);
    Ok((mean(0) - mean(1)) - (mean(2) - mean(3)))
}
