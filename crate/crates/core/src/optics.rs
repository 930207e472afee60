//! Gaussian-beam geometry and pump/signal group-velocity walk-off.
//!
//! All lengths are meters. Velocities are fractions of `c`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BeamParams {
    /// Waist radius.
    pub w0: f64,
    pub wavelength: f64,
}

impl BeamParams {
    pub fn new(w0: f64, wavelength: f64) -> Result<Self> {
        if !(w0 > 0.0 && w0.is_finite()) {
            return invalid(format!("waist must be positive, got {w0}"));
        }
        if !(wavelength > 0.0 && wavelength.is_finite()) {
            return invalid(format!("wavelength must be positive, got {wavelength}"));
        }
        Ok(Self { w0, wavelength })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WalkoffParams {
    pub crystal_length: f64,
    pub v_pump: f64,
    pub v_signal: f64,
}

impl WalkoffParams {
    pub fn new(crystal_length: f64, v_pump: f64, v_signal: f64) -> Result<Self> {
        if !(crystal_length >= 0.0 && crystal_length.is_finite()) {
            return invalid(format!(
                "crystal length must be non-negative, got {crystal_length}"
            ));
        }
        for (name, v) in [("pump", v_pump), ("signal", v_signal)] {
            if !(v > 0.0 && v <= 1.0) {
                return invalid(format!("{name} group velocity must lie in (0, 1], got {v}"));
            }
        }
        Ok(Self {
            crystal_length,
            v_pump,
            v_signal,
        })
    }

    /// Periodically poled KTP at 390 nm pump / 780 nm signal: pump 0.41c,
    /// signal 0.52c.
    pub fn ppktp(crystal_length: f64) -> Result<Self> {
        Self::new(crystal_length, 0.41, 0.52)
    }
}

/// `πw₀²/λ`.
pub fn rayleigh_range(beam: &BeamParams) -> f64 {
    PI * beam.w0 * beam.w0 / beam.wavelength
}

/// `w₀·√(1 + (z/z_R)²)`.
pub fn beam_radius(z: f64, beam: &BeamParams) -> f64 {
    beam.w0 * (z / rayleigh_range(beam)).hypot(1.0)
}

/// Free-space-equivalent delay `L·(c/v_pump − c/v_signal)` accumulated by
/// the pump relative to the signal.
pub fn walkoff_path(params: &WalkoffParams) -> f64 {
    params.crystal_length * (1.0 / params.v_pump - 1.0 / params.v_signal)
}

/// Length of birefringent crystal whose group-index difference cancels
/// `target_delay`.
pub fn compensation_length(target_delay: f64, group_index_difference: f64) -> Result<f64> {
    if group_index_difference == 0.0 || !group_index_difference.is_finite() {
        return invalid(format!(
            "group index difference must be finite and nonzero, got {group_index_difference}"
        ));
    }
    Ok(target_delay / group_index_difference)
}

/// Parses a length such as `12.4um`, `390nm`, `0.72mm` or `1e-3` (bare
/// numbers are meters). The suffix is applied as a decimal exponent before
/// conversion to `f64`, so `0.72mm` yields exactly the double nearest
/// 0.00072.
pub fn parse_length(token: &str) -> Result<f64> {
    let s = token.trim();
    let units: [(&str, i32); 6] = [
        ("nm", -9),
        ("um", -6),
        ("μm", -6),
        ("µm", -6),
        ("mm", -3),
        ("m", 0),
    ];
    let (number, exponent) = units
        .iter()
        .find_map(|&(suffix, e)| s.strip_suffix(suffix).map(|n| (n, e)))
        .unwrap_or((s, 0));
    let number = number.trim();
    let bad = || invalid(format!("cannot parse length '{token}'"));
    if number.is_empty() || number.contains(['e', 'E']) && exponent != 0 {
        return bad();
    }
    let value: f64 = if exponent == 0 {
        number.parse().or_else(|_| bad())?
    } else {
        number.parse::<f64>().or_else(|_| bad())?;
        format!("{number}e{exponent}").parse().or_else(|_| bad())?
    };
    if !value.is_finite() {
        return bad();
    }
    Ok(value)
}

/// One output line of a design computation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DesignRow {
    pub quantity: String,
    pub value: f64,
    pub unit: String,
}

impl DesignRow {
    pub fn new(quantity: &str, value: f64, unit: &str) -> Self {
        Self {
            quantity: quantity.to_owned(),
            value,
            unit: unit.to_owned(),
        }
    }
}
