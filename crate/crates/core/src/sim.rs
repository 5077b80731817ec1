//! Fluorophore photophysics: emitter placement, two-state blinking with
//! exponential dwell times, modality-specific termination and noisy
//! per-frame localizations.

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Localization precision used by every registry condition.
pub const DEFAULT_SIGMA_LOC_NM: f64 = 10.0;
/// Same-frame resolvability radius used by every registry condition.
pub const DEFAULT_FILTER_RADIUS_NM: f64 = 500.0;
/// Side length of the square field of view.
pub const DEFAULT_ROI_SIDE_NM: f64 = 500.0;

/// Densities at or above this value combined with short dark times are
/// refused (see [`EXCLUDED_MAX_MU_OFF`]).
pub const EXCLUDED_MIN_DENSITY: f64 = 1000.0;
pub const EXCLUDED_MAX_MU_OFF: f64 = 100.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid condition parameters: {0}")]
    InvalidParams(String),
    #[error(
        "excluded regime: density {density_per_um2}/um^2 with mean off-time {mu_off_frames} frames \
         (density >= {EXCLUDED_MIN_DENSITY} and mu_off <= {EXCLUDED_MAX_MU_OFF} is not simulated)"
    )]
    ExcludedRegime {
        density_per_um2: f64,
        mu_off_frames: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Roi {
    pub width_nm: f64,
    pub height_nm: f64,
}

impl Roi {
    pub fn new(width_nm: f64, height_nm: f64) -> Result<Self, SimError> {
        if !(width_nm > 0.0 && width_nm.is_finite() && height_nm > 0.0 && height_nm.is_finite()) {
            return Err(SimError::InvalidParams(format!(
                "ROI must have positive finite extent, got {width_nm} x {height_nm} nm"
            )));
        }
        Ok(Self {
            width_nm,
            height_nm,
        })
    }

    pub fn square(side_nm: f64) -> Result<Self, SimError> {
        Self::new(side_nm, side_nm)
    }

    pub fn area_um2(&self) -> f64 {
        self.width_nm * self.height_nm * 1e-6
    }

    pub fn diagonal_nm(&self) -> f64 {
        self.width_nm.hypot(self.height_nm)
    }

    pub fn contains(&self, x_nm: f64, y_nm: f64) -> bool {
        (0.0..=self.width_nm).contains(&x_nm) && (0.0..=self.height_nm).contains(&y_nm)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Modality {
    #[serde(rename = "dSTORM")]
    DStorm,
    #[serde(rename = "DNA-PAINT")]
    DnaPaint,
}

/// How an emitter stops blinking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Termination {
    /// Irreversible photobleaching after an exponentially distributed number
    /// of localization frames.
    ExponentialLocalizations { mean_events: f64 },
    /// Poisson-distributed number of binding events (on-intervals).
    PoissonBindings { lambda: f64 },
    /// Blinks until the end of the acquisition.
    Unlimited,
}

/// Every knob of one experimental condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionParams {
    pub id: String,
    pub modality: Modality,
    pub density_per_um2: f64,
    pub mu_on_frames: f64,
    pub mu_off_frames: f64,
    pub max_frames: u32,
    pub termination: Termination,
    pub sigma_loc_nm: f64,
    pub filter_radius_nm: f64,
    pub roi: Roi,
}

impl ConditionParams {
    /// Builds a condition with the default noise, filter radius and ROI.
    pub fn new(
        id: impl Into<String>,
        modality: Modality,
        density_per_um2: f64,
        mu_on_frames: f64,
        mu_off_frames: f64,
        max_frames: u32,
        termination: Termination,
    ) -> Result<Self, SimError> {
        let params = Self {
            id: id.into(),
            modality,
            density_per_um2,
            mu_on_frames,
            mu_off_frames,
            max_frames,
            termination,
            sigma_loc_nm: DEFAULT_SIGMA_LOC_NM,
            filter_radius_nm: DEFAULT_FILTER_RADIUS_NM,
            roi: Roi::square(DEFAULT_ROI_SIDE_NM)?,
        };
        params.validate()?;
        Ok(params)
    }

    /// Checks the structural invariants. Zero density is accepted so that
    /// empty acquisitions can be constructed for testing.
    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::InvalidParams(msg));
        if !(self.density_per_um2 >= 0.0 && self.density_per_um2.is_finite()) {
            return bad(format!("density must be >= 0, got {}", self.density_per_um2));
        }
        if !(self.mu_on_frames > 0.0 && self.mu_on_frames.is_finite()) {
            return bad(format!("mu_on must be > 0, got {}", self.mu_on_frames));
        }
        if !(self.mu_off_frames > 0.0 && self.mu_off_frames.is_finite()) {
            return bad(format!("mu_off must be > 0, got {}", self.mu_off_frames));
        }
        if self.max_frames == 0 {
            return bad("max_frames must be > 0".into());
        }
        if !(self.sigma_loc_nm >= 0.0 && self.sigma_loc_nm.is_finite()) {
            return bad(format!("sigma must be >= 0, got {}", self.sigma_loc_nm));
        }
        if !(self.filter_radius_nm >= 0.0 && self.filter_radius_nm.is_finite()) {
            return bad(format!(
                "filter radius must be >= 0, got {}",
                self.filter_radius_nm
            ));
        }
        Roi::new(self.roi.width_nm, self.roi.height_nm)?;
        match (self.modality, self.termination) {
            (Modality::DStorm, Termination::ExponentialLocalizations { mean_events }) => {
                if !(mean_events > 0.0 && mean_events.is_finite()) {
                    return bad(format!("termination mean must be > 0, got {mean_events}"));
                }
            }
            (Modality::DnaPaint, Termination::PoissonBindings { lambda }) => {
                if !(lambda > 0.0 && lambda.is_finite()) {
                    return bad(format!("binding lambda must be > 0, got {lambda}"));
                }
            }
            (Modality::DnaPaint, Termination::Unlimited) => {}
            (m, t) => return bad(format!("termination {t:?} is not valid for {m:?}")),
        }
        Ok(())
    }

    /// Refuses the high-density, short-dark-time regime.
    pub fn check_regime(&self) -> Result<(), SimError> {
        if self.density_per_um2 >= EXCLUDED_MIN_DENSITY && self.mu_off_frames <= EXCLUDED_MAX_MU_OFF
        {
            return Err(SimError::ExcludedRegime {
                density_per_um2: self.density_per_um2,
                mu_off_frames: self.mu_off_frames,
            });
        }
        Ok(())
    }

    /// Steady-state probability of an emitter being in the on state.
    pub fn duty_cycle(&self) -> f64 {
        self.mu_on_frames / (self.mu_on_frames + self.mu_off_frames)
    }

    /// Number of emitters placed per acquisition (round half to even).
    pub fn emitter_count(&self) -> usize {
        (self.density_per_um2 * self.roi.area_um2()).round_ties_even() as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Emitter {
    pub emitter_id: u32,
    pub x_nm: f64,
    pub y_nm: f64,
}

/// One on/off history. Intervals are inclusive 1-based frame ranges.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlinkSchedule {
    pub emitter_id: u32,
    pub on_intervals: Vec<(u32, u32)>,
    /// dSTORM: localization frames allowed. Poisson DNA-PAINT: binding
    /// events allowed. `None` when blinking is unlimited.
    pub event_budget: Option<u64>,
}

impl BlinkSchedule {
    pub fn on_frames(&self) -> u64 {
        self.on_intervals
            .iter()
            .map(|&(s, e)| u64::from(e - s + 1))
            .sum()
    }
}

/// Continuous dwell durations drawn while building a schedule, before
/// discretization and truncation.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DwellTrace {
    pub on_draws: Vec<f64>,
    pub off_draws: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalizationRecord {
    pub frame: u32,
    pub x_nm: f64,
    pub y_nm: f64,
    pub true_emitter_id: u32,
}

fn exponential<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> f64 {
    let unit: f64 = Exp1.sample(rng);
    unit * mean
}

/// Continuous duration to a whole number of frames, never less than one.
fn to_frames(duration: f64) -> u64 {
    // `as` saturates for huge values
    (duration.ceil() as u64).max(1)
}

/// Places `emitter_count()` emitters uniformly at random inside the ROI.
pub fn place_emitters<R: Rng + ?Sized>(params: &ConditionParams, rng: &mut R) -> Vec<Emitter> {
    let n = params.emitter_count();
    (0..n)
        .map(|i| Emitter {
            emitter_id: i as u32,
            x_nm: rng.random::<f64>() * params.roi.width_nm,
            y_nm: rng.random::<f64>() * params.roi.height_nm,
        })
        .collect()
}

/// Samples the blinking history of one emitter.
pub fn sample_schedule<R: Rng + ?Sized>(
    params: &ConditionParams,
    emitter_id: u32,
    rng: &mut R,
) -> BlinkSchedule {
    sample_schedule_traced(params, emitter_id, rng, None)
}

/// Like [`sample_schedule`], optionally recording every raw dwell draw.
pub fn sample_schedule_traced<R: Rng + ?Sized>(
    params: &ConditionParams,
    emitter_id: u32,
    rng: &mut R,
    mut trace: Option<&mut DwellTrace>,
) -> BlinkSchedule {
    let event_budget = match params.termination {
        Termination::ExponentialLocalizations { mean_events } => {
            Some(to_frames(exponential(rng, mean_events)))
        }
        Termination::PoissonBindings { lambda } => {
            let poisson = Poisson::new(lambda).expect("lambda validated");
            Some(poisson.sample(rng) as u64)
        }
        Termination::Unlimited => None,
    };
    let counts_frames = matches!(
        params.termination,
        Termination::ExponentialLocalizations { .. }
    );

    let max_frames = u64::from(params.max_frames);
    let mut on = rng.random::<f64>() < params.duty_cycle();
    let mut t: u64 = 1;
    let mut used: u64 = 0;
    let mut on_intervals = Vec::new();

    while t <= max_frames && event_budget.is_none_or(|b| used < b) {
        let mean = if on {
            params.mu_on_frames
        } else {
            params.mu_off_frames
        };
        let raw = exponential(rng, mean);
        if let Some(tr) = trace.as_deref_mut() {
            if on {
                tr.on_draws.push(raw);
            } else {
                tr.off_draws.push(raw);
            }
        }
        let len = to_frames(raw);
        if on {
            let mut end = (t.saturating_add(len) - 1).min(max_frames);
            match event_budget {
                Some(budget) if counts_frames => {
                    end = end.min(t + (budget - used) - 1);
                    used += end - t + 1;
                }
                Some(_) => used += 1,
                None => {}
            }
            on_intervals.push((t as u32, end as u32));
        }
        t = t.saturating_add(len);
        on = !on;
    }

    BlinkSchedule {
        emitter_id,
        on_intervals,
        event_budget,
    }
}

/// One noisy localization per on-frame. Noise is not clipped to the ROI.
pub fn render_localizations<R: Rng + ?Sized>(
    emitter: &Emitter,
    schedule: &BlinkSchedule,
    sigma_loc_nm: f64,
    rng: &mut R,
) -> Vec<LocalizationRecord> {
    debug_assert_eq!(emitter.emitter_id, schedule.emitter_id);
    let mut out = Vec::with_capacity(schedule.on_frames() as usize);
    for &(start, end) in &schedule.on_intervals {
        for frame in start..=end {
            let dx: f64 = StandardNormal.sample(rng);
            let dy: f64 = StandardNormal.sample(rng);
            out.push(LocalizationRecord {
                frame,
                x_nm: emitter.x_nm + sigma_loc_nm * dx,
                y_nm: emitter.y_nm + sigma_loc_nm * dy,
                true_emitter_id: emitter.emitter_id,
            });
        }
    }
    out
}

/// Raw (unfiltered) acquisition: emitters plus every localization, sorted by
/// `(frame, true_emitter_id)`.
pub fn simulate_acquisition<R: Rng + ?Sized>(
    params: &ConditionParams,
    rng: &mut R,
) -> Result<(Vec<Emitter>, Vec<LocalizationRecord>), SimError> {
    simulate_acquisition_traced(params, rng, None)
}

pub fn simulate_acquisition_traced<R: Rng + ?Sized>(
    params: &ConditionParams,
    rng: &mut R,
    mut trace: Option<&mut DwellTrace>,
) -> Result<(Vec<Emitter>, Vec<LocalizationRecord>), SimError> {
    params.validate()?;
    params.check_regime()?;
    let emitters = place_emitters(params, rng);
    let mut records = Vec::new();
    for emitter in &emitters {
        let schedule = sample_schedule_traced(params, emitter.emitter_id, rng, trace.as_deref_mut());
        records.extend(render_localizations(
            emitter,
            &schedule,
            params.sigma_loc_nm,
            rng,
        ));
    }
    records.sort_by_key(|r| (r.frame, r.true_emitter_id));
    Ok((emitters, records))
}
