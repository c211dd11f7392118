//! Physical constants, parameter records and the experiment preset.
//!
//! Every stored quantity is SI. The geometry preset is kept as data in
//! [`PRESET`] and every other module reads it from there.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054_571_817e-34;
/// Atomic mass unit (the CSL reference mass m₀), kg.
pub const AMU: f64 = 1.660_539_066_60e-27;
/// Electron mass, kg.
pub const ELECTRON_MASS: f64 = 9.109_383_701_5e-31;
/// Phonon coherence lifetime in diamond, s. Recorded only; not simulated.
pub const PHONON_COHERENCE_TIME: f64 = 7.0e-12;

#[derive(Debug, Error)]
pub enum ParamError {
    #[error("`{field}` must be strictly positive and finite, got {value}")]
    NonPositive { field: &'static str, value: f64 },
    #[error("`{field}` must be non-negative and finite, got {value}")]
    Negative { field: &'static str, value: f64 },
    #[error("`{field}` = {given} is inconsistent with the derived value {derived}")]
    Inconsistent {
        field: &'static str,
        given: f64,
        derived: f64,
    },
    #[error("invalid parameter file: {0}")]
    Json(#[from] serde_json::Error),
}

fn positive(field: &'static str, value: f64) -> Result<f64, ParamError> {
    if value.is_finite() && value > 0.0 {
        Ok(value)
    } else {
        Err(ParamError::NonPositive { field, value })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhysicalConstants {
    pub hbar: f64,
    pub m0: f64,
    /// m_e/m₀. Electron terms in the smeared mass density carry its square
    /// (~10⁻⁶) and are dropped everywhere.
    pub m_e_over_m0: f64,
}

impl PhysicalConstants {
    pub const SI: PhysicalConstants = PhysicalConstants {
        hbar: HBAR,
        m0: AMU,
        m_e_over_m0: ELECTRON_MASS / AMU,
    };
}

/// A point (λ, r_C) of the CSL parameter plane.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, try_from = "RawCollapse")]
pub struct CollapseParams {
    /// Collapse rate, s⁻¹.
    pub lambda: f64,
    /// Correlation length, m.
    pub r_c: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCollapse {
    lambda: f64,
    r_c: f64,
}

impl TryFrom<RawCollapse> for CollapseParams {
    type Error = ParamError;
    fn try_from(raw: RawCollapse) -> Result<Self, Self::Error> {
        CollapseParams::new(raw.lambda, raw.r_c)
    }
}

impl CollapseParams {
    pub fn new(lambda: f64, r_c: f64) -> Result<Self, ParamError> {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(ParamError::Negative {
                field: "lambda",
                value: lambda,
            });
        }
        positive("r_c", r_c)?;
        Ok(CollapseParams { lambda, r_c })
    }

    /// The commonly quoted CSL values, λ = 10⁻¹⁷ s⁻¹ and r_C = 10⁻⁷ m.
    pub fn csl_standard() -> Self {
        CollapseParams {
            lambda: 1e-17,
            r_c: 1e-7,
        }
    }
}

/// How the mass inside the Fourier form factor is counted.
///
/// `Effective` uses m = N·m₀, which is the normalisation under which the
/// closed-form η carries N² and reproduces η ≈ 6×10³⁵ λ m⁻² for the preset.
/// `Nucleon` counts every nucleon, m = A·N·m₀, and therefore scales η by A².
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MassConvention {
    #[default]
    Effective,
    Nucleon,
}

impl MassConvention {
    /// Mass per contributing atom in units of m₀.
    pub fn mass_per_atom(self, mass_number: f64) -> f64 {
        match self {
            MassConvention::Effective => 1.0,
            MassConvention::Nucleon => mass_number,
        }
    }
}

/// Geometry and mode parameters of the optical phonon shared by the two
/// diamonds.
///
/// `n_atoms` and `delta_z` are derived quantities. They may be given
/// explicitly in a parameter file (e.g. rounded published values) as long
/// as they agree with the derivation to within [`DERIVED_TOLERANCE`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometrySpec")]
pub struct PhononGeometry {
    /// Cylinder radius R, m.
    pub radius: f64,
    /// Cylinder length d (plate thickness), m.
    pub thickness: f64,
    /// Atom number density n, m⁻³.
    pub atom_density: f64,
    pub diamonds_count: u32,
    /// Mass number A of the lattice atoms.
    pub mass_number: f64,
    /// N = diamonds_count · n · πR²d.
    pub n_atoms: f64,
    /// Reduced mass of the unit cell m*, kg.
    pub m_star: f64,
    /// Phonon mode frequency ω, s⁻¹ (used without a 2π factor).
    pub omega: f64,
    /// Δz = √(ħ/(m*ω)), m.
    pub delta_z: f64,
    /// Probe delay T, s.
    pub probe_delay: f64,
}

/// Relative agreement required between an explicitly supplied derived
/// field and its derivation.
pub const DERIVED_TOLERANCE: f64 = 0.05;

/// Parameter-file form of [`PhononGeometry`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub radius: f64,
    pub thickness: f64,
    pub atom_density: f64,
    pub diamonds_count: u32,
    pub mass_number: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_atoms: Option<f64>,
    pub m_star: f64,
    pub omega: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_z: Option<f64>,
    pub probe_delay: f64,
}

/// The two-diamond experiment: R = 3.6 μm, d = 0.25 mm,
/// n = 176.2×10²⁷ m⁻³, m* = 6 m₀, ω = 4.0×10¹³ s⁻¹, T = 350 fs.
pub const PRESET: GeometrySpec = GeometrySpec {
    radius: 3.6e-6,
    thickness: 2.5e-4,
    atom_density: 1.762e29,
    diamonds_count: 2,
    mass_number: 12.0,
    n_atoms: None,
    m_star: 6.0 * AMU,
    omega: 4.0e13,
    delta_z: None,
    probe_delay: 3.5e-13,
};

impl TryFrom<GeometrySpec> for PhononGeometry {
    type Error = ParamError;

    fn try_from(spec: GeometrySpec) -> Result<Self, Self::Error> {
        let radius = positive("radius", spec.radius)?;
        let thickness = positive("thickness", spec.thickness)?;
        let atom_density = positive("atom_density", spec.atom_density)?;
        if spec.diamonds_count == 0 {
            return Err(ParamError::NonPositive {
                field: "diamonds_count",
                value: 0.0,
            });
        }
        let mass_number = positive("mass_number", spec.mass_number)?;
        let m_star = positive("m_star", spec.m_star)?;
        let omega = positive("omega", spec.omega)?;
        let probe_delay = positive("probe_delay", spec.probe_delay)?;

        let derived_n = spec.diamonds_count as f64
            * atom_density
            * std::f64::consts::PI
            * radius
            * radius
            * thickness;
        let derived_dz = (HBAR / (m_star * omega)).sqrt();
        let n_atoms = consistent("n_atoms", spec.n_atoms, derived_n)?;
        let delta_z = consistent("delta_z", spec.delta_z, derived_dz)?;

        Ok(PhononGeometry {
            radius,
            thickness,
            atom_density,
            diamonds_count: spec.diamonds_count,
            mass_number,
            n_atoms,
            m_star,
            omega,
            delta_z,
            probe_delay,
        })
    }
}

fn consistent(field: &'static str, given: Option<f64>, derived: f64) -> Result<f64, ParamError> {
    match given {
        None => Ok(derived),
        Some(v) => {
            positive(field, v)?;
            if ((v - derived) / derived).abs() <= DERIVED_TOLERANCE {
                Ok(v)
            } else {
                Err(ParamError::Inconsistent {
                    field,
                    given: v,
                    derived,
                })
            }
        }
    }
}

impl From<PhononGeometry> for GeometrySpec {
    fn from(g: PhononGeometry) -> Self {
        GeometrySpec {
            radius: g.radius,
            thickness: g.thickness,
            atom_density: g.atom_density,
            diamonds_count: g.diamonds_count,
            mass_number: g.mass_number,
            n_atoms: Some(g.n_atoms),
            m_star: g.m_star,
            omega: g.omega,
            delta_z: Some(g.delta_z),
            probe_delay: g.probe_delay,
        }
    }
}

impl PhononGeometry {
    pub fn from_spec(spec: GeometrySpec) -> Result<Self, ParamError> {
        spec.try_into()
    }

    pub fn from_json(text: &str) -> Result<Self, ParamError> {
        let spec: GeometrySpec = serde_json::from_str(text)?;
        Self::from_spec(spec)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("geometry serialises")
    }

    /// Total mass of the phonon volume in kg under the given convention.
    pub fn total_mass(&self, convention: MassConvention) -> f64 {
        self.n_atoms * convention.mass_per_atom(self.mass_number) * AMU
    }

    /// Δz recomputed from ħ, m* and ω.
    pub fn derived_delta_z(&self) -> f64 {
        (HBAR / (self.m_star * self.omega)).sqrt()
    }
}

/// The preset geometry of the two-diamond experiment.
pub fn default_geometry() -> PhononGeometry {
    PhononGeometry::from_spec(PRESET).expect("preset geometry is valid")
}

impl Default for PhononGeometry {
    fn default() -> Self {
        default_geometry()
    }
}

/// A labelled point of the (λ, r_C) plane used as a benchmark.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferencePoint {
    pub name: String,
    pub lambda: f64,
    pub r_c: f64,
}

impl ReferencePoint {
    pub fn collapse(&self) -> CollapseParams {
        CollapseParams {
            lambda: self.lambda,
            r_c: self.r_c,
        }
    }
}

const REFERENCE_POINTS: [(&str, f64, f64); 4] = [
    ("GRW", 1e-16, 1e-7),
    ("CSL-standard", 1e-17, 1e-7),
    ("Adler-a", 1e-8, 1e-7),
    ("Adler-b", 1e-6, 1e-6),
];

pub fn reference_points() -> Vec<ReferencePoint> {
    REFERENCE_POINTS
        .iter()
        .map(|&(name, lambda, r_c)| ReferencePoint {
            name: name.to_string(),
            lambda,
            r_c,
        })
        .collect()
}
