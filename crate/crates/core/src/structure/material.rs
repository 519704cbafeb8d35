//! Temperature-dependent thermal properties.
//!
//! The empirical 51CrV4 fits are written in a "law temperature" variable.
//! [`Material::Steel51CrV4`] states whether that variable is °C (the solver
//! converts from K) or K directly.

/// Density of 51CrV4 in kg/m³.
pub const STEEL_DENSITY: f64 = 7836.0;
pub const KELVIN_OFFSET: f64 = 273.15;

/// Operating range (K) over which property bounds are evaluated.
pub const OPERATING_RANGE: (f64, f64) = (273.0, 1300.0);

/// Heat conductivity fit `40.1 + 0.05 t - 1e-4 t^2 + 4.9e-8 t^3` in W/(m K).
pub fn lambda_eval(t: f64) -> f64 {
    40.1 + t * (0.05 + t * (-0.0001 + t * 4.9e-8))
}

pub fn lambda_derivative(t: f64) -> f64 {
    0.05 + t * (-0.0002 + t * 1.47e-7)
}

pub fn cp1(t: f64) -> f64 {
    34.2 * (0.0026 * t).exp() + 421.15
}

pub fn cp1_derivative(t: f64) -> f64 {
    34.2 * 0.0026 * (0.0026 * t).exp()
}

pub fn cp2(t: f64) -> f64 {
    956.5 * (-0.012 * (t - 900.0)).exp() + 0.45 * t
}

pub fn cp2_derivative(t: f64) -> f64 {
    -956.5 * 0.012 * (-0.012 * (t - 900.0)).exp() + 0.45
}

/// Soft minimum `-10 ln((e^{-cp1/10} + e^{-cp2/10}) / 2)` in J/(kg K),
/// evaluated relative to the smaller branch so that neither exponential
/// can overflow.
pub fn cp_eval(t: f64) -> f64 {
    let (a, b) = (cp1(t), cp2(t));
    let lo = a.min(b);
    let gap = (a - b).abs();
    lo - 10.0 * ((1.0 + (-gap / 10.0).exp()) / 2.0).ln()
}

pub fn cp_derivative(t: f64) -> f64 {
    let (a, b) = (cp1(t), cp2(t));
    // softmax weights of -c/10
    let lo = a.min(b);
    let wa = (-(a - lo) / 10.0).exp();
    let wb = (-(b - lo) / 10.0).exp();
    (wa * cp1_derivative(t) + wb * cp2_derivative(t)) / (wa + wb)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Material {
    /// Empirical steel model; `celsius` selects °C as the law variable.
    Steel51CrV4 { celsius: bool },
    Constant { conductivity: f64, specific_heat: f64, density: f64 },
}

impl Default for Material {
    fn default() -> Self {
        Material::Steel51CrV4 { celsius: true }
    }
}

impl Material {
    pub fn density(&self) -> f64 {
        match self {
            Material::Steel51CrV4 { .. } => STEEL_DENSITY,
            Material::Constant { density, .. } => *density,
        }
    }

    fn law_temperature(&self, kelvin: f64) -> f64 {
        match self {
            Material::Steel51CrV4 { celsius: true } => kelvin - KELVIN_OFFSET,
            _ => kelvin,
        }
    }

    /// Conductivity at absolute temperature `kelvin`.
    pub fn conductivity(&self, kelvin: f64) -> f64 {
        match self {
            Material::Steel51CrV4 { .. } => lambda_eval(self.law_temperature(kelvin)),
            Material::Constant { conductivity, .. } => *conductivity,
        }
    }

    pub fn conductivity_derivative(&self, kelvin: f64) -> f64 {
        match self {
            Material::Steel51CrV4 { .. } => lambda_derivative(self.law_temperature(kelvin)),
            Material::Constant { .. } => 0.0,
        }
    }

    pub fn specific_heat(&self, kelvin: f64) -> f64 {
        match self {
            Material::Steel51CrV4 { .. } => cp_eval(self.law_temperature(kelvin)),
            Material::Constant { specific_heat, .. } => *specific_heat,
        }
    }

    pub fn specific_heat_derivative(&self, kelvin: f64) -> f64 {
        match self {
            Material::Steel51CrV4 { .. } => cp_derivative(self.law_temperature(kelvin)),
            Material::Constant { .. } => 0.0,
        }
    }

    /// Volumetric heat capacity `rho c_p`.
    pub fn heat_capacity(&self, kelvin: f64) -> f64 {
        self.density() * self.specific_heat(kelvin)
    }

    /// Min and max conductivity over [`OPERATING_RANGE`] on a 1 K grid.
    pub fn conductivity_range(&self) -> (f64, f64) {
        let (lo, hi) = OPERATING_RANGE;
        let n = (hi - lo) as usize;
        (0..=n)
            .map(|i| self.conductivity(lo + i as f64))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)))
    }
}
