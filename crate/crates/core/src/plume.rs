//! Steady-state Gaussian plume with ground reflection.
//!
//! World frame: `x` points east, `y` points north, `z` up, origin at the
//! south-west corner of the grid. Wind direction follows the meteorological
//! convention (the bearing the wind blows *from*), so the plume travels
//! toward bearing `D + 180°`.
//!
//! Dispersion uses the Briggs open-country formulas, with Pasquill classes
//! A–F mapped to stability classes 1–6 (`x` is downwind distance in metres):
//!
//! | class | σ_y                         | σ_z                          |
//! |-------|-----------------------------|------------------------------|
//! | 1 (A) | 0.22 x (1 + 0.0001 x)^-1/2  | 0.20 x                       |
//! | 2 (B) | 0.16 x (1 + 0.0001 x)^-1/2  | 0.12 x                       |
//! | 3 (C) | 0.11 x (1 + 0.0001 x)^-1/2  | 0.08 x (1 + 0.0002 x)^-1/2   |
//! | 4 (D) | 0.08 x (1 + 0.0001 x)^-1/2  | 0.06 x (1 + 0.0015 x)^-1/2   |
//! | 5 (E) | 0.06 x (1 + 0.0001 x)^-1/2  | 0.03 x (1 + 0.0003 x)^-1     |
//! | 6 (F) | 0.04 x (1 + 0.0001 x)^-1/2  | 0.016 x (1 + 0.0003 x)^-1    |

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{config, domain, Result};

/// Universal gas constant, J mol⁻¹ K⁻¹.
pub const GAS_CONSTANT: f64 = 8.314_462_618;

/// Molar mass of CO₂, g mol⁻¹.
pub const CO2_MOLAR_MASS: f64 = 44.01;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Point3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Point3 {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }
}

/// Pasquill stability class, 1 ("very unstable", A) to 6 ("very stable", F).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub struct StabilityClass(u8);

impl StabilityClass {
    pub fn new(class: u8) -> Result<Self> {
        if (1..=6).contains(&class) {
            Ok(Self(class))
        } else {
            Err(domain(format!("stability class must be in 1..=6, got {class}")))
        }
    }

    pub fn get(self) -> u8 {
        self.0
    }

    pub fn pasquill_letter(self) -> char {
        (b'A' + self.0 - 1) as char
    }
}

impl TryFrom<u8> for StabilityClass {
    type Error = crate::Error;

    fn try_from(value: u8) -> Result<Self> {
        Self::new(value)
    }
}

impl From<StabilityClass> for u8 {
    fn from(value: StabilityClass) -> Self {
        value.0
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PlumeConfig {
    /// Horizontal wind speed, m/s.
    pub wind_speed: f64,
    /// Bearing the wind blows from, degrees in `[0, 360)`.
    pub wind_direction_deg: f64,
    pub stability_class: StabilityClass,
    /// Source location in metres; the emitting cell is treated as a point source here.
    pub source: Point3,
    /// Grid spacing in metres. Also the side of the emitting cell: `Q = φ · cell_size²`.
    pub cell_size: f64,
    pub background_ppm: f64,
    pub air_temperature_k: f64,
    pub pressure_kpa: f64,
    /// g/mol, used in the mass-to-mixing-ratio conversion.
    pub molar_mass: f64,
}

impl Default for PlumeConfig {
    fn default() -> Self {
        Self {
            wind_speed: 4.0,
            wind_direction_deg: 320.0,
            stability_class: StabilityClass(2),
            source: Point3::new(150.0, 850.0, 0.0),
            cell_size: 100.0,
            background_ppm: 400.0,
            air_temperature_k: 288.15,
            pressure_kpa: 101.325,
            molar_mass: CO2_MOLAR_MASS,
        }
    }
}

impl PlumeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.wind_speed > 0.0 && self.wind_speed.is_finite()) {
            return Err(config(format!("wind_speed must be > 0, got {}", self.wind_speed)));
        }
        if !(0.0..360.0).contains(&self.wind_direction_deg) {
            return Err(config(format!(
                "wind_direction_deg must be in [0, 360), got {}",
                self.wind_direction_deg
            )));
        }
        if !(self.cell_size > 0.0 && self.cell_size.is_finite()) {
            return Err(config(format!("cell_size must be > 0, got {}", self.cell_size)));
        }
        if !(self.background_ppm >= 0.0 && self.background_ppm.is_finite()) {
            return Err(config(format!(
                "background_ppm must be >= 0, got {}",
                self.background_ppm
            )));
        }
        let s = self.source;
        if !(s.x.is_finite() && s.y.is_finite() && s.z.is_finite()) {
            return Err(config("source coordinates must be finite"));
        }
        for (name, v) in [
            ("air_temperature_k", self.air_temperature_k),
            ("pressure_kpa", self.pressure_kpa),
            ("molar_mass", self.molar_mass),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(config(format!("{name} must be > 0, got {v}")));
            }
        }
        Ok(())
    }

    /// Unit vector (east, north) along which the plume travels.
    pub fn downwind_unit(&self) -> (f64, f64) {
        let (sin, cos) = self.wind_direction_deg.to_radians().sin_cos();
        (-sin, -cos)
    }

    /// Multiplier turning mg/m³ into ppm (µmol/mol) via the ideal-gas law.
    pub fn mg_per_m3_to_ppm(&self) -> f64 {
        GAS_CONSTANT * self.air_temperature_k / (self.pressure_kpa * self.molar_mass)
    }
}

/// Receptor position in a source-centred frame whose +x axis points downwind.
///
/// The crosswind axis is the downwind axis turned 90° counter-clockwise
/// (viewed from above).
pub fn downwind_frame(p: Point3, cfg: &PlumeConfig) -> (f64, f64) {
    let (ux, uy) = cfg.downwind_unit();
    let dx = p.x - cfg.source.x;
    let dy = p.y - cfg.source.y;
    (dx * ux + dy * uy, -dx * uy + dy * ux)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DispersionCoefficients {
    pub sigma_y: f64,
    pub sigma_z: f64,
}

pub fn dispersion(downwind_x: f64, class: StabilityClass) -> Result<DispersionCoefficients> {
    if !(downwind_x > 0.0 && downwind_x.is_finite()) {
        return Err(domain(format!(
            "dispersion needs a positive downwind distance, got {downwind_x}"
        )));
    }
    let x = downwind_x;
    let lateral = |a: f64| a * x / (1.0 + 1e-4 * x).sqrt();
    let (sigma_y, sigma_z) = match class.0 {
        1 => (lateral(0.22), 0.20 * x),
        2 => (lateral(0.16), 0.12 * x),
        3 => (lateral(0.11), 0.08 * x / (1.0 + 2e-4 * x).sqrt()),
        4 => (lateral(0.08), 0.06 * x / (1.0 + 1.5e-3 * x).sqrt()),
        5 => (lateral(0.06), 0.03 * x / (1.0 + 3e-4 * x)),
        6 => (lateral(0.04), 0.016 * x / (1.0 + 3e-4 * x)),
        _ => unreachable!("StabilityClass is validated on construction"),
    };
    Ok(DispersionCoefficients { sigma_y, sigma_z })
}

/// Excess concentration in ppm produced by a flux of 1 mg m⁻² s⁻¹.
///
/// Zero at or upwind of the source plane. [`concentration`] is
/// `background + φ · unit_excess`, so anything that caches this value
/// reproduces `concentration` bit for bit.
pub fn unit_excess(p: Point3, cfg: &PlumeConfig) -> f64 {
    let (downwind_x, crosswind_y) = downwind_frame(p, cfg);
    if downwind_x <= 0.0 {
        return 0.0;
    }
    let DispersionCoefficients { sigma_y, sigma_z } = dispersion(downwind_x, cfg.stability_class)
        .expect("downwind_x checked positive");
    let q = cfg.cell_size * cfg.cell_size;
    let zs = cfg.source.z;
    let lateral = (-crosswind_y * crosswind_y / (2.0 * sigma_y * sigma_y)).exp();
    let vertical = (-(p.z - zs).powi(2) / (2.0 * sigma_z * sigma_z)).exp()
        + (-(p.z + zs).powi(2) / (2.0 * sigma_z * sigma_z)).exp();
    let mg_per_m3 = q / (2.0 * PI * cfg.wind_speed * sigma_y * sigma_z) * lateral * vertical;
    mg_per_m3 * cfg.mg_per_m3_to_ppm()
}

/// Concentration in ppm at `p` for a surface flux `phi` (mg CO₂ m⁻² s⁻¹).
pub fn concentration(phi: f64, p: Point3, cfg: &PlumeConfig) -> Result<f64> {
    if phi.is_nan() || phi < 0.0 {
        return Err(domain(format!("flux must be non-negative, got {phi}")));
    }
    Ok(cfg.background_ppm + phi * unit_excess(p, cfg))
}
