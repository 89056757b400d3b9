//! Pipe and orifice hydraulics: Reynolds numbers, the orifice equation and
//! the leak-level taxonomy.
//!
//! All quantities are SI: metres, m³/s, Pa, kg/m³, m²/s.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, ensure_positive, Error, Result};

/// Water at roughly 20 °C; reproduces the testbed's pipe Reynolds numbers
/// for both operating flows with a 50 mm bore.
pub const WATER_KINEMATIC_VISCOSITY: f64 = 1.0035e-6;
pub const WATER_DENSITY: f64 = 998.0;
/// Sharp-edged orifice.
pub const DEFAULT_DISCHARGE_COEFFICIENT: f64 = 0.61;
pub const DEFAULT_GAUGE_PRESSURE: f64 = 200e3;

/// Leak ratio at or above which a leak is at least `Significant`.
pub const SIGNIFICANT_LEAK_RATIO: f64 = 0.05;
/// Leak ratio strictly above which a leak is `Excessive`.
pub const EXCESSIVE_LEAK_RATIO: f64 = 0.15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PipeSpec {
    pub internal_diameter: f64,
    pub wall_thickness: f64,
    pub sensed_length: f64,
    pub kinematic_viscosity: f64,
    pub water_density: f64,
}

impl Default for PipeSpec {
    fn default() -> Self {
        PipeSpec {
            internal_diameter: 0.05,
            wall_thickness: 0.0036,
            sensed_length: 40.0,
            kinematic_viscosity: WATER_KINEMATIC_VISCOSITY,
            water_density: WATER_DENSITY,
        }
    }
}

impl PipeSpec {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("internal_diameter", self.internal_diameter)?;
        ensure_positive("wall_thickness", self.wall_thickness)?;
        ensure_positive("sensed_length", self.sensed_length)?;
        ensure_positive("kinematic_viscosity", self.kinematic_viscosity)?;
        ensure_positive("water_density", self.water_density)?;
        if self.sensed_length < 1.0 {
            return Err(Error::domain(format!(
                "sensed_length must be at least 1 m, got {}",
                self.sensed_length
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LeakSpec {
    pub orifice_diameter: f64,
    /// Distance along the sensed pipe section.
    pub position: f64,
    pub gauge_pressure: f64,
    pub discharge_coefficient: f64,
}

impl LeakSpec {
    pub fn new(orifice_diameter: f64, position: f64, gauge_pressure: f64) -> Self {
        LeakSpec {
            orifice_diameter,
            position,
            gauge_pressure,
            discharge_coefficient: DEFAULT_DISCHARGE_COEFFICIENT,
        }
    }

    pub fn validate(&self, pipe: &PipeSpec) -> Result<()> {
        ensure_positive("orifice_diameter", self.orifice_diameter)?;
        if self.orifice_diameter >= pipe.internal_diameter {
            return Err(Error::domain(format!(
                "orifice diameter {} m must be smaller than the pipe bore {} m",
                self.orifice_diameter, pipe.internal_diameter
            )));
        }
        ensure_finite("position", self.position)?;
        if self.position < 0.0 || self.position > pipe.sensed_length {
            return Err(Error::domain(format!(
                "leak position {} m outside sensed length {} m",
                self.position, pipe.sensed_length
            )));
        }
        ensure_positive("gauge_pressure", self.gauge_pressure)?;
        ensure_positive("discharge_coefficient", self.discharge_coefficient)?;
        if self.discharge_coefficient > 1.0 {
            return Err(Error::domain(format!(
                "discharge coefficient {} exceeds 1",
                self.discharge_coefficient
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowState {
    pub pipe_flow_rate: f64,
    /// Zero when there is no leak.
    pub leak_flow_rate: f64,
}

impl FlowState {
    pub fn validate(&self) -> Result<()> {
        ensure_positive("pipe_flow_rate", self.pipe_flow_rate)?;
        ensure_finite("leak_flow_rate", self.leak_flow_rate)?;
        if self.leak_flow_rate < 0.0 || self.leak_flow_rate >= self.pipe_flow_rate {
            return Err(Error::domain(format!(
                "leak flow {} must lie in [0, pipe flow {})",
                self.leak_flow_rate, self.pipe_flow_rate
            )));
        }
        Ok(())
    }

    pub fn leak_ratio(&self) -> f64 {
        self.leak_flow_rate / self.pipe_flow_rate
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum LeakLevel {
    NoLeak,
    Small,
    Significant,
    Excessive,
}

impl LeakLevel {
    pub const LEAKING: [LeakLevel; 3] = [LeakLevel::Small, LeakLevel::Significant, LeakLevel::Excessive];

    pub fn name(self) -> &'static str {
        match self {
            LeakLevel::NoLeak => "no-leak",
            LeakLevel::Small => "small",
            LeakLevel::Significant => "significant",
            LeakLevel::Excessive => "excessive",
        }
    }
}

impl std::fmt::Display for LeakLevel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Pipe-flow Reynolds number `4q / (pi D nu)`.
pub fn reynolds_pipe(pipe: &PipeSpec, q: f64) -> Result<f64> {
    ensure_positive("pipe flow rate", q)?;
    ensure_positive("internal_diameter", pipe.internal_diameter)?;
    ensure_positive("kinematic_viscosity", pipe.kinematic_viscosity)?;
    Ok(4.0 * q / (PI * pipe.internal_diameter * pipe.kinematic_viscosity))
}

/// Reynolds number of the leak jet, using the orifice diameter as length scale.
pub fn reynolds_leak(pipe: &PipeSpec, leak_q: f64, orifice_diameter: f64) -> Result<f64> {
    ensure_positive("leak flow rate", leak_q)?;
    ensure_positive("orifice_diameter", orifice_diameter)?;
    ensure_positive("kinematic_viscosity", pipe.kinematic_viscosity)?;
    Ok(4.0 * leak_q / (PI * orifice_diameter * pipe.kinematic_viscosity))
}

/// Leak-to-pipe Reynolds ratio; zero when the flow state carries no leak.
pub fn reynolds_ratio(pipe: &PipeSpec, flow: &FlowState, orifice_diameter: f64) -> Result<f64> {
    if flow.leak_flow_rate == 0.0 {
        return Ok(0.0);
    }
    Ok(reynolds_leak(pipe, flow.leak_flow_rate, orifice_diameter)? / reynolds_pipe(pipe, flow.pipe_flow_rate)?)
}

/// Jet velocity `C_d sqrt(2 dP / rho)` at the vena contracta.
pub fn jet_velocity(discharge_coefficient: f64, gauge_pressure: f64, density: f64) -> f64 {
    discharge_coefficient * (2.0 * gauge_pressure / density).sqrt()
}

/// Orifice equation output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrificeFlow {
    pub flow_rate: f64,
    pub jet_velocity: f64,
}

/// `Q = C_d (pi d^2 / 4) sqrt(2 dP / rho)`.
pub fn orifice_flow(leak: &LeakSpec, pipe: &PipeSpec) -> Result<OrificeFlow> {
    leak.validate(pipe)?;
    let v = jet_velocity(leak.discharge_coefficient, leak.gauge_pressure, pipe.water_density);
    let area = PI * leak.orifice_diameter * leak.orifice_diameter / 4.0;
    Ok(OrificeFlow { flow_rate: v * area, jet_velocity: v })
}

/// Gauge pressure at which the orifice equation yields `leak_q` through `orifice_diameter`.
pub fn pressure_for_flow(
    leak_q: f64,
    orifice_diameter: f64,
    discharge_coefficient: f64,
    density: f64,
) -> Result<f64> {
    ensure_positive("leak flow rate", leak_q)?;
    ensure_positive("orifice_diameter", orifice_diameter)?;
    ensure_positive("discharge_coefficient", discharge_coefficient)?;
    let area = PI * orifice_diameter * orifice_diameter / 4.0;
    let ideal_velocity = leak_q / (discharge_coefficient * area);
    Ok(0.5 * density * ideal_velocity * ideal_velocity)
}

/// Maps a leak-to-pipe flow ratio onto the four-level scale.
///
/// Both 5 % and 15 % fall into `Significant`.
pub fn classify_leak_level(leak_ratio: f64) -> Result<LeakLevel> {
    ensure_finite("leak ratio", leak_ratio)?;
    if leak_ratio < 0.0 {
        return Err(Error::domain(format!("leak ratio must be non-negative, got {leak_ratio}")));
    }
    Ok(if leak_ratio == 0.0 {
        LeakLevel::NoLeak
    } else if leak_ratio < SIGNIFICANT_LEAK_RATIO {
        LeakLevel::Small
    } else if leak_ratio <= EXCESSIVE_LEAK_RATIO {
        LeakLevel::Significant
    } else {
        LeakLevel::Excessive
    })
}
