//! `validate`: cross-checks every oracle pair and invariant and reports a
//! table of (check, measured, tolerance, pass).

use csl_core::dynamics::{
    evolve_analytic, evolve_numeric_trajectory, stationary_state, DensityMatrix4, EvolutionParams,
};
use csl_core::exclusion::BoundaryCurve;
use csl_core::formfactor::{
    eta_closed_form_cylinder, eta_fourier_cylinder, eta_realspace_mc_with, i33_analytic,
    i33_quadrature, CylinderDensity, McOptions,
};
use csl_core::ode::OdeOptions;
use csl_core::params::{reference_points, CollapseParams};
use csl_core::photonics::{
    factorized_counts, fringe_probabilities, pipeline_fringe_probabilities, visibility,
    FringeConfig, Truncation,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::json;

use crate::commands::SLOPE_PROBES;
use crate::config::Settings;
use crate::error::CliError;
use crate::output::{emit, Metadata, Table};

const REFERENCE_RC: f64 = 1e-7;
const FOURIER_POINTS: usize = 30;
const I33_OFFSETS: usize = 10;
const EPS: f64 = 0.05;

#[derive(Debug, Clone)]
pub struct Check {
    pub name: &'static str,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl Check {
    /// Passes when `measured ≤ tolerance`.
    fn at_most(name: &'static str, measured: f64, tolerance: f64) -> Check {
        Check {
            name,
            measured,
            tolerance,
            pass: measured <= tolerance,
        }
    }

    /// Passes when `measured < tolerance`.
    fn below(name: &'static str, measured: f64, tolerance: f64) -> Check {
        Check {
            name,
            measured,
            tolerance,
            pass: measured < tolerance,
        }
    }
}

fn phys<E: std::fmt::Display>(e: E) -> CliError {
    CliError::physics(e)
}

fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let (a, b) = (lo.log10(), hi.log10());
    (0..n)
        .map(|i| 10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64))
        .collect()
}

fn eta_checks(s: &Settings, mc_samples: usize, perturb: f64) -> Result<Vec<Check>, CliError> {
    let density = CylinderDensity::from_geometry(&s.geometry, s.convention);
    let unit = |rc| CollapseParams::new(1.0, rc).map_err(phys);
    let closed = |rc| -> Result<f64, CliError> {
        Ok(perturb
            * eta_closed_form_cylinder(&unit(rc)?, &density)
                .map_err(phys)?
                .eta_over_lambda)
    };

    let preset = closed(REFERENCE_RC)?;
    let mut worst = 0.0f64;
    for rc in log_space(1e-9, 1e-2, FOURIER_POINTS) {
        let q = eta_fourier_cylinder(&unit(rc)?, &density).map_err(phys)?;
        worst = worst.max((q.eta_over_lambda / closed(rc)? - 1.0).abs());
    }

    // reduced body, R = d = r_C, where the real-space integrand is resolved
    let rc = REFERENCE_RC;
    let small = CylinderDensity::new(1e-20, rc, rc).map_err(phys)?;
    let q = eta_fourier_cylinder(&unit(rc)?, &small).map_err(phys)?;
    let mc = eta_realspace_mc_with(&unit(rc)?, &small, &McOptions::new(mc_samples, s.seed))
        .map_err(phys)?;
    let sigmas = (mc.eta_over_lambda - q.eta_over_lambda).abs() / mc.uncertainty;

    let mut rng = ChaCha8Rng::seed_from_u64(s.seed);
    let mut i33 = 0.0f64;
    for _ in 0..I33_OFFSETS {
        let r1: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-rc..rc));
        let offset = loop {
            let v: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-3.0 * rc..3.0 * rc));
            if v.iter().map(|x| x * x).sum::<f64>() <= 9.0 * rc * rc {
                break v;
            }
        };
        let r2 = [r1[0] + offset[0], r1[1] + offset[1], r1[2] + offset[2]];
        let exact = i33_analytic(r1, r2, rc);
        let num = i33_quadrature(r1, r2, rc).map_err(phys)?;
        i33 = i33.max((num.value - exact).abs() / exact.abs().max(1e-300));
    }

    Ok(vec![
        Check::at_most(
            "eta_over_lambda_preset_vs_6e35",
            (preset / 6e35 - 1.0).abs(),
            1.0 / 6.0,
        ),
        Check::at_most("eta_fourier_vs_closed_form", worst, 1e-4),
        Check::at_most("eta_mc_vs_fourier_sigmas", sigmas, 3.0),
        Check::at_most("i33_analytic_vs_quadrature", i33, 1e-8),
    ])
}

/// 20 (Λ, ω) pairs: ω/Λ ∈ {0.05, 0.2, 0.45} overdamped, {1.5, 5} oscillatory.
pub fn dynamics_pairs() -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for rate in [0.5, 1.0, 2.0, 4.0] {
        for ratio in [0.05, 0.2, 0.45, 1.5, 5.0] {
            out.push((rate, ratio * rate));
        }
    }
    out
}

fn dynamics_checks() -> Result<Vec<Check>, CliError> {
    let rho0 = DensityMatrix4::bell_like();
    let (mut diff, mut trace, mut neg, mut late) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (rate, omega) in dynamics_pairs() {
        let p = EvolutionParams::new(omega, rate).map_err(phys)?;
        let times: Vec<f64> = (0..=50).map(|i| 10.0 / rate * i as f64 / 50.0).collect();
        let numeric =
            evolve_numeric_trajectory(&rho0, &p, &times, &OdeOptions::default()).map_err(phys)?;
        for (&t, n) in times.iter().zip(&numeric) {
            let a = evolve_analytic(&p, t).map_err(phys)?;
            diff = diff.max(a.max_abs_diff(n));
            for r in [&a, n] {
                trace = trace.max((r.trace() - Complex64::new(1.0, 0.0)).norm());
                neg = neg.max(-r.min_eigenvalue());
            }
        }
        let slowest = rate - p.big_omega.re;
        let t_inf = 60.0 / slowest;
        late = late.max(
            evolve_analytic(&p, t_inf)
                .map_err(phys)?
                .max_abs_diff(&stationary_state()),
        );
    }
    Ok(vec![
        Check::at_most("dynamics_analytic_vs_numeric", diff, 1e-8),
        Check::at_most("dynamics_trace_error", trace, 1e-12),
        Check::at_most("dynamics_negative_eigenvalue", neg.max(0.0), 1e-10),
        Check::at_most("dynamics_long_time_vs_mixed", late, 1e-3),
    ])
}

fn fringe_checks() -> Result<Vec<Check>, CliError> {
    let eps = Complex64::new(EPS, 0.0);
    let mut rel = 0.0f64;
    for i in 0..20 {
        let phi_a = std::f64::consts::TAU * i as f64 / 20.0;
        let cfg = FringeConfig::new(eps, eps, 0.0, phi_a).map_err(phys)?;
        let (cp, cm) = fringe_probabilities(&cfg);
        let (pp, pm) = pipeline_fringe_probabilities(&cfg, Truncation::Exact).map_err(phys)?;
        rel = rel.max((pp - cp).abs().max((pm - cm).abs()) / (cp + cm));
    }
    let sweep: Vec<f64> = (0..64)
        .map(|i| {
            let phi_a = std::f64::consts::TAU * i as f64 / 64.0;
            FringeConfig::new(eps, eps, 0.0, phi_a).map(|c| fringe_probabilities(&c).0)
        })
        .collect::<Result<_, _>>()
        .map_err(phys)?;
    let (np, nm) = factorized_counts(eps);
    let half = 0.5 * EPS * EPS;
    Ok(vec![
        Check::at_most(
            "fringe_pipeline_vs_closed_form",
            rel,
            5.0 * (EPS * EPS + EPS * EPS),
        ),
        Check::at_most(
            "fringe_visibility_deviation",
            (visibility(&sweep) - 1.0).abs(),
            1e-10,
        ),
        Check::at_most(
            "factorized_counts_deviation",
            (np - half).abs().max((nm - half).abs()),
            0.0,
        ),
    ])
}

fn exclusion_checks(s: &Settings) -> Result<Vec<Check>, CliError> {
    let curve =
        BoundaryCurve::compute(&s.geometry, &s.grid.rc, s.threshold, s.convention).map_err(phys)?;
    let names = ["slope_at_rc_1e-9", "slope_at_rc_1e-5", "slope_at_rc_1e-2"];
    let mut out = Vec::new();
    for (name, &(rc, expected, tol)) in names.iter().zip(&SLOPE_PROBES) {
        let slope = curve.local_slope(rc).map_err(phys)?;
        out.push(Check::at_most(name, (slope - expected).abs(), tol));
    }

    let exponent = |p: &CollapseParams| -> Result<f64, CliError> {
        let d = CylinderDensity::from_geometry(&s.geometry, s.convention);
        let eta = eta_closed_form_cylinder(p, &d).map_err(phys)?;
        Ok(csl_core::dynamics::decoherence_exponent(
            eta.eta,
            &s.geometry,
        ))
    };
    let mut worst = 0.0f64;
    for r in reference_points() {
        worst = worst.max(exponent(&r.collapse())?);
    }
    out.push(Check::below(
        "reference_points_max_exponent",
        worst,
        s.threshold,
    ));

    let x = exponent(&CollapseParams::new(1e-8, REFERENCE_RC).map_err(phys)?)?;
    let expected = 2.3e-6;
    out.push(Check::at_most(
        "exponent_factor_from_2.3e-6",
        (x / expected).max(expected / x),
        1.5,
    ));
    Ok(out)
}

pub fn run(s: &Settings, mc_samples: usize, perturb: f64) -> Result<(), CliError> {
    if !(perturb > 0.0 && perturb.is_finite()) {
        return Err(CliError::Usage(format!(
            "perturbation factor must be positive, got {perturb}"
        )));
    }
    let mut checks = eta_checks(s, mc_samples, perturb)?;
    checks.extend(dynamics_checks()?);
    checks.extend(fringe_checks()?);
    checks.extend(exclusion_checks(s)?);

    let mut table = Table::new(&["check", "measured", "tolerance", "pass"]);
    for c in &checks {
        table.push(vec![
            c.name.into(),
            c.measured.into(),
            c.tolerance.into(),
            c.pass.into(),
        ]);
    }
    let args = json!({ "mc_samples": mc_samples, "perturb_gamma_perp": perturb });
    let hash = s.hash("validate", &args);
    let meta = Metadata::new("validate", hash, s.seed).with("args", args);
    let failed: Vec<&str> = checks.iter().filter(|c| !c.pass).map(|c| c.name).collect();

    if s.output.is_some() {
        emit(s.output.as_deref(), &table.render(&meta, s.format))?;
        for c in &checks {
            println!(
                "{:<34} {:>12.4e} {:>10.3e}  {}",
                c.name,
                c.measured,
                c.tolerance,
                if c.pass { "PASS" } else { "FAIL" }
            );
        }
    } else {
        emit(None, &table.render(&meta, s.format))?;
    }
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Physics(format!(
            "{} check(s) failed: {}",
            failed.len(),
            failed.join(", ")
        )))
    }
}
