use serde::{Deserialize, Serialize};

use super::FemError;

/// Isotropic, temperature-independent material constants (SI units,
/// temperatures in °C).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MaterialProperties {
    /// Young's modulus (Pa).
    pub e: f64,
    /// Poisson ratio.
    pub nu: f64,
    /// Density (kg/m³).
    pub rho: f64,
    /// Thermal expansion coefficient (1/K).
    pub alpha: f64,
    /// Specific heat (J/(kg·K)).
    pub c_p: f64,
    /// Thermal conductivity (W/(m·K)).
    pub k: f64,
    /// Convective heat transfer coefficient (W/(m²·K)).
    pub h: f64,
    /// Stress-free reference temperature and initial temperature (°C).
    pub t0: f64,
}

impl Default for MaterialProperties {
    fn default() -> Self {
        Self {
            e: 210e9,
            nu: 0.3,
            rho: 8050.0,
            alpha: 13.5e-6,
            c_p: 420.0,
            k: 36.0,
            h: 20.0,
            t0: 0.0,
        }
    }
}

impl MaterialProperties {
    pub fn lambda(&self) -> f64 {
        self.nu * self.e / ((1.0 + self.nu) * (1.0 - 2.0 * self.nu))
    }

    pub fn mu(&self) -> f64 {
        self.e / (2.0 * (1.0 + self.nu))
    }

    /// Thermal stress modulus α(3λ + 2μ).
    pub fn thermal_modulus(&self) -> f64 {
        self.alpha * (3.0 * self.lambda() + 2.0 * self.mu())
    }

    /// Volumetric heat capacity ρ·c_p.
    pub fn heat_capacity(&self) -> f64 {
        self.rho * self.c_p
    }

    pub fn validate(&self) -> Result<(), FemError> {
        let positive = [
            ("E", self.e),
            ("rho", self.rho),
            ("alpha", self.alpha),
            ("c_p", self.c_p),
            ("k", self.k),
            ("h", self.h),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(FemError::InvalidMaterial(format!("{name} must be > 0, got {v}")));
            }
        }
        if !(self.nu > 0.0 && self.nu < 0.5) {
            return Err(FemError::InvalidMaterial(format!("nu must lie in (0, 0.5), got {}", self.nu)));
        }
        if !self.t0.is_finite() {
            return Err(FemError::InvalidMaterial("T0 must be finite".into()));
        }
        Ok(())
    }
}
