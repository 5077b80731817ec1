//! The ten named experimental conditions and synthetic overrides on top of
//! them.
//!
//! A condition label is either a registry id (`D2`) or an id followed by
//! overrides, e.g. `D2+density=4+sigma=0`. The label is what gets recorded
//! in a dataset manifest, so any dataset can be regenerated from it.

use thiserror::Error;

use crate::sim::{ConditionParams, Modality, SimError, Termination};

pub const CONDITION_IDS: [&str; 10] = ["D1", "D2", "D3", "D4", "D5", "D6", "P1", "P2", "P3", "P4"];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegistryError {
    #[error("unknown condition '{0}' (expected one of D1-D6, P1-P4)")]
    UnknownCondition(String),
    #[error("malformed override '{0}' (expected density=, mu_off= or sigma=)")]
    BadOverride(String),
    #[error(transparent)]
    Params(#[from] SimError),
}

/// Looks up a registry condition by id.
pub fn condition(id: &str) -> Option<ConditionParams> {
    use Modality::{DStorm, DnaPaint};
    let exp = |mean_events| Termination::ExponentialLocalizations { mean_events };
    let (modality, density, mu_off, frames, termination) = match id {
        "D1" => (DStorm, 50.0, 100.0, 6305, exp(20.0)),
        "D2" => (DStorm, 50.0, 100.0, 10_000, exp(50.0)),
        "D3" => (DStorm, 50.0, 1000.0, 10_000, exp(20.0)),
        "D4" => (DStorm, 50.0, 1000.0, 10_000, exp(50.0)),
        "D5" => (DStorm, 1000.0, 1000.0, 10_000, exp(20.0)),
        "D6" => (DStorm, 1000.0, 1000.0, 10_000, exp(50.0)),
        "P1" => (
            DnaPaint,
            50.0,
            100.0,
            4583,
            Termination::PoissonBindings { lambda: 50.0 },
        ),
        "P2" => (DnaPaint, 50.0, 100.0, 10_000, Termination::Unlimited),
        "P3" => (DnaPaint, 50.0, 1000.0, 10_000, Termination::Unlimited),
        "P4" => (DnaPaint, 1000.0, 1000.0, 10_000, Termination::Unlimited),
        _ => return None,
    };
    Some(
        ConditionParams::new(id, modality, density, 5.0, mu_off, frames, termination)
            .expect("registry entries are valid"),
    )
}

pub fn all_conditions() -> Vec<ConditionParams> {
    CONDITION_IDS
        .iter()
        .map(|id| condition(id).expect("listed id"))
        .collect()
}

/// Synthetic modifications of a registry condition.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Overrides {
    pub density_per_um2: Option<f64>,
    pub mu_off_frames: Option<f64>,
    pub sigma_loc_nm: Option<f64>,
}

impl Overrides {
    pub fn is_empty(&self) -> bool {
        *self == Self::default()
    }

    fn apply(&self, params: &mut ConditionParams) {
        if let Some(d) = self.density_per_um2 {
            params.density_per_um2 = d;
        }
        if let Some(m) = self.mu_off_frames {
            params.mu_off_frames = m;
        }
        if let Some(s) = self.sigma_loc_nm {
            params.sigma_loc_nm = s;
        }
    }
}

/// Canonical label for `base` with `overrides` applied.
pub fn condition_label(base: &str, overrides: &Overrides) -> String {
    let mut label = base.to_string();
    if let Some(d) = overrides.density_per_um2 {
        label.push_str(&format!("+density={d}"));
    }
    if let Some(m) = overrides.mu_off_frames {
        label.push_str(&format!("+mu_off={m}"));
    }
    if let Some(s) = overrides.sigma_loc_nm {
        label.push_str(&format!("+sigma={s}"));
    }
    label
}

/// Builds the parameters for a registry id plus overrides. The returned
/// parameters carry the canonical label as their id.
pub fn resolve_with(base: &str, overrides: &Overrides) -> Result<ConditionParams, RegistryError> {
    let mut params =
        condition(base).ok_or_else(|| RegistryError::UnknownCondition(base.to_string()))?;
    overrides.apply(&mut params);
    params.id = condition_label(base, overrides);
    params.validate()?;
    Ok(params)
}

/// Parses a label produced by [`condition_label`].
pub fn resolve_label(label: &str) -> Result<ConditionParams, RegistryError> {
    let mut parts = label.split('+');
    let base = parts.next().unwrap_or_default();
    let mut overrides = Overrides::default();
    for part in parts {
        let (key, value) = part
            .split_once('=')
            .ok_or_else(|| RegistryError::BadOverride(part.to_string()))?;
        let value: f64 = value
            .parse()
            .map_err(|_| RegistryError::BadOverride(part.to_string()))?;
        let slot = match key {
            "density" => &mut overrides.density_per_um2,
            "mu_off" => &mut overrides.mu_off_frames,
            "sigma" => &mut overrides.sigma_loc_nm,
            _ => return Err(RegistryError::BadOverride(part.to_string())),
        };
        *slot = Some(value);
    }
    resolve_with(base, &overrides)
}
