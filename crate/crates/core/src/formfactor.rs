//! Mass-density form factors and the CSL decoherence coefficient η.
//!
//! η multiplies the double commutator −η[z,[z,ρ]] for one rigid sublattice
//! displaced along z. Three independent routes are provided:
//!
//! * [`eta_closed_form`]: λ (M/m₀)²/d² · Γ⊥(R/(√2 r_C)) · [1 − e^{−d²/(4r_C²)}],
//!   where M is the mass of the cylinder (N·m₀ by default).
//! * [`eta_fourier_quadrature`]: the k-space integral
//!   λ r_C³/(2π^{3/2} m₀²) ∫d³k k_z² |μ̃(k)|² e^{−r_C²k²}, integrated numerically.
//! * [`eta_realspace_mc`]: the real-space double integral
//!   λ/(4 r_C⁴ m₀²) ∫∫ μ(r₁)μ(r₂) e^{−(r₁−r₂)²/(4r_C²)} [r_C² − (z₁−z₂)²/2],
//!   sampled by Monte Carlo.
//!
//! Only the zz component of the Gaussian tensor integral I_ij is needed: the
//! phonon displaces the sublattices along z and cross-sublattice terms are
//! negligible. Off-diagonal components are not implemented.

use std::cell::RefCell;
use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::params::{CollapseParams, MassConvention, ParamError, PhononGeometry, AMU};
use crate::quadrature::{integrate, Estimate, QuadError, QuadOptions};
use crate::special::{gamma_perp, jinc, sinc, SpecialError};

#[derive(Debug, Error)]
pub enum FormFactorError {
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error("quadrature relative error estimate {estimate:e} exceeds tolerance {tolerance:e}")]
    Tolerance { estimate: f64, tolerance: f64 },
    #[error("Monte-Carlo estimate needs at least {min} samples, got {got}")]
    TooFewSamples { got: usize, min: usize },
    #[error("Monte-Carlo worker count must be positive")]
    NoWorkers,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaMethod {
    ClosedForm,
    FourierQuadrature,
    RealspaceMc,
}

impl EtaMethod {
    pub fn name(self) -> &'static str {
        match self {
            EtaMethod::ClosedForm => "closed_form",
            EtaMethod::FourierQuadrature => "fourier_quadrature",
            EtaMethod::RealspaceMc => "realspace_mc",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EtaResult {
    /// η, m⁻² s⁻¹.
    pub eta: f64,
    /// η/λ, m⁻²; depends on geometry and r_C only.
    pub eta_over_lambda: f64,
    pub method: EtaMethod,
    /// Absolute uncertainty on `eta_over_lambda`: zero for the closed form,
    /// the error estimate for quadrature, one standard error for Monte Carlo.
    pub uncertainty: f64,
}

impl EtaResult {
    fn new(lambda: f64, eta_over_lambda: f64, method: EtaMethod, uncertainty: f64) -> Self {
        EtaResult {
            eta: lambda * eta_over_lambda,
            eta_over_lambda,
            method,
            uncertainty,
        }
    }

    pub fn rel_uncertainty(&self) -> f64 {
        if self.eta_over_lambda == 0.0 {
            0.0
        } else {
            self.uncertainty / self.eta_over_lambda
        }
    }
}

/// Homogeneous cylinder of mass `mass`, radius `radius` and length
/// `thickness` along z, centred at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CylinderDensity {
    pub mass: f64,
    pub radius: f64,
    pub thickness: f64,
}

impl CylinderDensity {
    pub fn new(mass: f64, radius: f64, thickness: f64) -> Result<Self, ParamError> {
        for (field, value) in [("mass", mass), ("radius", radius), ("thickness", thickness)] {
            if !(value.is_finite() && value > 0.0) {
                return Err(ParamError::NonPositive { field, value });
            }
        }
        Ok(CylinderDensity {
            mass,
            radius,
            thickness,
        })
    }

    pub fn from_geometry(g: &PhononGeometry, convention: MassConvention) -> Self {
        CylinderDensity {
            mass: g.total_mass(convention),
            radius: g.radius,
            thickness: g.thickness,
        }
    }

    pub fn volume(&self) -> f64 {
        PI * self.radius * self.radius * self.thickness
    }

    /// Mass density inside the cylinder, kg m⁻³.
    pub fn density(&self) -> f64 {
        self.mass / self.volume()
    }

    fn mass_in_m0(&self) -> f64 {
        self.mass / AMU
    }
}

/// Fourier transform μ̃(k⊥, k_z) = (2m/(k⊥R)) J₁(k⊥R) sinc(k_z d/2), in kg.
pub fn cylinder_form_factor(
    k_perp: f64,
    k_z: f64,
    density: &CylinderDensity,
) -> Result<f64, FormFactorError> {
    let radial = jinc(k_perp.abs() * density.radius)?;
    Ok(density.mass * radial * sinc(0.5 * k_z * density.thickness))
}

/// Closed-form η/λ for a homogeneous cylinder, m⁻².
pub fn eta_over_lambda_closed(density: &CylinderDensity, r_c: f64) -> Result<f64, FormFactorError> {
    let n = density.mass_in_m0();
    let d = density.thickness;
    let transverse = gamma_perp(density.radius / (std::f64::consts::SQRT_2 * r_c))?;
    let axial = -(-(d * d) / (4.0 * r_c * r_c)).exp_m1();
    Ok(n * n / (d * d) * transverse * axial)
}

/// η from the closed form, effective-mass convention.
pub fn eta_closed_form(
    p: &CollapseParams,
    g: &PhononGeometry,
) -> Result<EtaResult, FormFactorError> {
    eta_closed_form_with(p, g, MassConvention::Effective)
}

pub fn eta_closed_form_with(
    p: &CollapseParams,
    g: &PhononGeometry,
    convention: MassConvention,
) -> Result<EtaResult, FormFactorError> {
    let density = CylinderDensity::from_geometry(g, convention);
    eta_closed_form_cylinder(p, &density)
}

pub fn eta_closed_form_cylinder(
    p: &CollapseParams,
    density: &CylinderDensity,
) -> Result<EtaResult, FormFactorError> {
    let factor = eta_over_lambda_closed(density, p.r_c)?;
    Ok(EtaResult::new(p.lambda, factor, EtaMethod::ClosedForm, 0.0))
}

/// Relative error bound returned by the Fourier quadrature.
pub const FOURIER_REL_TOL: f64 = 1e-6;
/// The Gaussian weight is truncated at |k| = `K_CUTOFF`/r_C.
pub const K_CUTOFF: f64 = 12.0;
const MAX_PANELS: usize = 3_000_000;

/// η from the k-space integral, effective-mass convention.
pub fn eta_fourier_quadrature(
    p: &CollapseParams,
    g: &PhononGeometry,
) -> Result<EtaResult, FormFactorError> {
    eta_fourier_quadrature_with(p, g, MassConvention::Effective)
}

pub fn eta_fourier_quadrature_with(
    p: &CollapseParams,
    g: &PhononGeometry,
    convention: MassConvention,
) -> Result<EtaResult, FormFactorError> {
    let density = CylinderDensity::from_geometry(g, convention);
    eta_fourier_cylinder(p, &density)
}

/// The k-space integral over the quadrant k⊥ ∈ [0, K], k_z ∈ [0, K]
/// (doubled for k_z < 0) with d³k = 2π k⊥ dk⊥ dk_z. The integrand is a
/// product of a k⊥ factor and a k_z factor on a rectangle, so the 2D
/// integral is the product of two adaptive 1D integrals; each is cut into
/// panels no wider than half an oscillation period of J₁² or sinc².
pub fn eta_fourier_cylinder(
    p: &CollapseParams,
    density: &CylinderDensity,
) -> Result<EtaResult, FormFactorError> {
    let r_c = p.r_c;
    let radius = density.radius;
    let half_d = 0.5 * density.thickness;
    let k_max = K_CUTOFF / r_c;
    let per_integral = 0.25 * FOURIER_REL_TOL;

    let panels = |period: f64| -> usize {
        let width = 0.5 * period.min(1.0 / r_c);
        ((k_max / width).ceil() as usize).clamp(4, MAX_PANELS)
    };
    let opts = |n: usize| QuadOptions {
        initial_panels: n,
        rel_tol: per_integral,
        abs_tol: 0.0,
        max_intervals: 2 * MAX_PANELS,
    };

    let transverse = integrate(
        |k| {
            let j = jinc(k * radius).unwrap_or(f64::NAN);
            2.0 * PI * k * j * j * (-(r_c * k) * (r_c * k)).exp()
        },
        0.0,
        k_max,
        &opts(panels(PI / radius)),
    )?;
    let axial = integrate(
        |k| {
            let s = sinc(k * half_d);
            k * k * s * s * (-(r_c * k) * (r_c * k)).exp()
        },
        0.0,
        k_max,
        &opts(panels(PI / half_d)),
    )?;

    let rel = transverse.rel_error() + axial.rel_error();
    if rel.is_nan() || rel > FOURIER_REL_TOL {
        return Err(FormFactorError::Tolerance {
            estimate: rel,
            tolerance: FOURIER_REL_TOL,
        });
    }
    let n = density.mass_in_m0();
    let prefactor = r_c.powi(3) / (2.0 * PI.powf(1.5)) * n * n;
    let factor = prefactor * transverse.value * 2.0 * axial.value;
    Ok(EtaResult::new(
        p.lambda,
        factor,
        EtaMethod::FourierQuadrature,
        rel * factor,
    ))
}

pub const MIN_MC_SAMPLES: usize = 10_000;
pub const DEFAULT_MC_WORKERS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct McOptions {
    pub samples: usize,
    pub seed: u64,
    /// Number of independent random streams. Results depend on this value
    /// but not on `parallel`.
    pub workers: usize,
    pub parallel: bool,
}

impl McOptions {
    pub fn new(samples: usize, seed: u64) -> Self {
        McOptions {
            samples,
            seed,
            workers: DEFAULT_MC_WORKERS,
            parallel: true,
        }
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn merge(self, other: Welford) -> Welford {
        if self.n == 0 {
            return other;
        }
        if other.n == 0 {
            return self;
        }
        let n = self.n + other.n;
        let delta = other.mean - self.mean;
        let mean = self.mean + delta * other.n as f64 / n as f64;
        let m2 = self.m2 + other.m2 + delta * delta * (self.n as f64 * other.n as f64) / n as f64;
        Welford { n, mean, m2 }
    }
}

fn sample_point<R: Rng>(rng: &mut R, density: &CylinderDensity) -> [f64; 3] {
    let r = density.radius * rng.gen::<f64>().sqrt();
    let phi = 2.0 * PI * rng.gen::<f64>();
    let z = density.thickness * (rng.gen::<f64>() - 0.5);
    [r * phi.cos(), r * phi.sin(), z]
}

fn mc_chunk(density: &CylinderDensity, r_c: f64, seed: u64, stream: u64, count: usize) -> Welford {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    let inv = 1.0 / (4.0 * r_c * r_c);
    let mut acc = Welford::default();
    for _ in 0..count {
        let a = sample_point(&mut rng, density);
        let b = sample_point(&mut rng, density);
        let dx = a[0] - b[0];
        let dy = a[1] - b[1];
        let dz = a[2] - b[2];
        let d2 = dx * dx + dy * dy + dz * dz;
        acc.push((-d2 * inv).exp() * (r_c * r_c - 0.5 * dz * dz));
    }
    acc
}

/// Monte-Carlo estimate of η for a homogeneous cylinder, using
/// [`DEFAULT_MC_WORKERS`] streams evaluated in parallel.
pub fn eta_realspace_mc(
    p: &CollapseParams,
    density: &CylinderDensity,
    samples: usize,
    seed: u64,
) -> Result<EtaResult, FormFactorError> {
    eta_realspace_mc_with(p, density, &McOptions::new(samples, seed))
}

/// Pairs (r₁, r₂) are drawn uniformly in the cylinder, so the double integral
/// is M² times the mean of the kernel. Stream `i` is ChaCha8 seeded with
/// `seed` on stream `i`; partial sums are merged in stream order, so the
/// result is bit-identical for serial and parallel evaluation.
pub fn eta_realspace_mc_with(
    p: &CollapseParams,
    density: &CylinderDensity,
    opts: &McOptions,
) -> Result<EtaResult, FormFactorError> {
    if opts.samples < MIN_MC_SAMPLES {
        return Err(FormFactorError::TooFewSamples {
            got: opts.samples,
            min: MIN_MC_SAMPLES,
        });
    }
    if opts.workers == 0 {
        return Err(FormFactorError::NoWorkers);
    }
    let base = opts.samples / opts.workers;
    let extra = opts.samples % opts.workers;
    let counts: Vec<(u64, usize)> = (0..opts.workers)
        .map(|i| (i as u64, base + usize::from(i < extra)))
        .collect();
    let run = |&(stream, count): &(u64, usize)| mc_chunk(density, p.r_c, opts.seed, stream, count);
    let parts: Vec<Welford> = if opts.parallel {
        counts.par_iter().map(run).collect()
    } else {
        counts.iter().map(run).collect()
    };
    let total = parts.into_iter().fold(Welford::default(), Welford::merge);

    let n = density.mass_in_m0();
    let scale = n * n / (4.0 * p.r_c.powi(4));
    let variance = total.m2 / (total.n as f64 - 1.0);
    let std_error = scale * (variance / total.n as f64).sqrt();
    Ok(EtaResult::new(
        p.lambda,
        scale * total.mean,
        EtaMethod::RealspaceMc,
        std_error,
    ))
}

/// I₃₃(r₁, r₂) = (π^{3/2}/(2r_C)) e^{−(r₁−r₂)²/(4r_C²)} [r_C² − (z₁−z₂)²/2], m.
pub fn i33_analytic(r1: [f64; 3], r2: [f64; 3], r_c: f64) -> f64 {
    let y = [r1[0] - r2[0], r1[1] - r2[1], r1[2] - r2[2]];
    let y2 = y[0] * y[0] + y[1] * y[1] + y[2] * y[2];
    PI.powf(1.5) / (2.0 * r_c) * (-y2 / (4.0 * r_c * r_c)).exp() * (r_c * r_c - 0.5 * y[2] * y[2])
}

const ENVELOPE_TOL: f64 = 1e-12;

/// Direct 3D quadrature of the defining integral
/// I₃₃ = r_C⁻⁴ ∫d³x e^{−[(x−r₁)²+(x−r₂)²]/(2r_C²)} (x−r₁)_z (x−r₂)_z
/// over the box (r₁+r₂)/2 ± 9 r_C, by iterated adaptive Gauss–Kronrod.
pub fn i33_quadrature(r1: [f64; 3], r2: [f64; 3], r_c: f64) -> Result<Estimate, QuadError> {
    let c = [
        0.5 * (r1[0] + r2[0]),
        0.5 * (r1[1] + r2[1]),
        0.5 * (r1[2] + r2[2]),
    ];
    let half = 9.0 * r_c;
    let inv = 1.0 / (2.0 * r_c * r_c);
    let scale = r_c.powi(-4);
    let opts = QuadOptions {
        initial_panels: 6,
        rel_tol: 1e-13,
        abs_tol: 0.0,
        max_intervals: 10_000,
    };
    let failure: RefCell<Option<QuadError>> = RefCell::new(None);
    let record = |r: Result<Estimate, QuadError>| match r {
        Ok(e) => e.value,
        Err(e) => {
            failure.borrow_mut().get_or_insert(e);
            f64::NAN
        }
    };

    let gauss1 = |x: f64, k: usize| {
        let a = x - r1[k];
        let b = x - r2[k];
        (-(a * a + b * b) * inv).exp()
    };
    // absolute floors track the Gaussian envelope, since the z integral
    // changes sign as a function of the offset
    let floor = |envelope: f64| QuadOptions {
        abs_tol: ENVELOPE_TOL * envelope,
        ..opts
    };
    let outer = integrate(
        |x| {
            let gx = gauss1(x, 0);
            let inner = integrate(
                |y| {
                    let gy = gauss1(y, 1);
                    record(integrate(
                        |z| gx * gy * gauss1(z, 2) * (z - r1[2]) * (z - r2[2]),
                        c[2] - half,
                        c[2] + half,
                        &floor(gx * gy * r_c.powi(3)),
                    ))
                },
                c[1] - half,
                c[1] + half,
                &floor(gx * r_c.powi(4)),
            );
            record(inner)
        },
        c[0] - half,
        c[0] + half,
        &floor(r_c.powi(5)),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    let outer = outer?;
    Ok(Estimate {
        value: outer.value * scale,
        abs_error: outer.abs_error * scale,
    })
}
