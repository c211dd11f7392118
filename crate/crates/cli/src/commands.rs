use std::path::PathBuf;

use csl_core::dynamics::{
    evolve_analytic, evolve_numeric_trajectory, DensityMatrix4, EvolutionParams,
};
use csl_core::exclusion::{Axis, BoundaryCurve, ExclusionGrid};
use csl_core::formfactor::{
    eta_closed_form_with, eta_fourier_quadrature_with, eta_realspace_mc_with, CylinderDensity,
    EtaResult, McOptions,
};
use csl_core::ode::OdeOptions;
use csl_core::params::{reference_points, CollapseParams};
use csl_core::photonics::{
    factorized_counts, fringe_probabilities, pipeline_fringe_probabilities, visibility,
    FringeConfig, Truncation,
};
use num_complex::Complex64;
use serde_json::json;

use crate::cli::{Cli, Command, Method, TruncationArg};
use crate::config::{Overrides, RunConfig, Settings};
use crate::error::CliError;
use crate::output::{emit, Cell, Metadata, Table};

pub const SLOPE_PROBES: [(f64, f64, f64); 3] =
    [(1e-9, -2.0, 0.1), (1e-5, 0.0, 0.2), (1e-2, 2.0, 0.1)];
const DEFAULT_EXCLUSION_DIR: &str = "csl-exclusion";

pub fn run(cli: Cli) -> Result<(), CliError> {
    let g = cli.global;
    let file = match &g.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let settings = Settings::resolve(
        file,
        Overrides {
            geometry_file: g.geometry,
            output: g.output,
            format: g.format,
            seed: g.seed,
            threshold: g.threshold,
            nucleon_mass_convention: g.nucleon_mass_convention,
            lambda: g.lambda,
            r_c: g.r_c,
        },
    )?;
    match cli.command {
        Command::Eta { samples } => eta(&settings, g.method, samples),
        Command::Evolve {
            t_max,
            steps,
            rate,
            omega,
        } => evolve(&settings, t_max, steps, rate, omega),
        Command::Fringe {
            phi_s,
            phi_a_min,
            phi_a_max,
            points,
            eps_s,
            eps_a,
            truncation,
        } => {
            let truncation = match truncation {
                TruncationArg::Exact => Truncation::Exact,
                TruncationArg::FirstOrder => Truncation::FirstOrder,
            };
            fringe(
                &settings,
                phi_s,
                (phi_a_min, phi_a_max, points),
                (eps_s, eps_a),
                truncation,
            )
        }
        Command::Exclusion {
            lambda_points,
            rc_points,
        } => exclusion(settings, lambda_points, rc_points),
        Command::Validate {
            mc_samples,
            perturb_gamma_perp,
        } => crate::validate::run(&settings, mc_samples, perturb_gamma_perp),
    }
}

fn metadata(s: &Settings, command: &str, args: serde_json::Value) -> Metadata {
    let hash = s.hash(command, &args);
    Metadata::new(command, hash, s.seed).with("args", args)
}

fn eta(s: &Settings, method: Method, samples: usize) -> Result<(), CliError> {
    let p = &s.collapse;
    let g = &s.geometry;
    let mut results: Vec<EtaResult> = Vec::new();
    let closed = eta_closed_form_with(p, g, s.convention).map_err(CliError::physics)?;
    if matches!(method, Method::Closed | Method::All) {
        results.push(closed);
    }
    if matches!(method, Method::Quadrature | Method::All) {
        results.push(eta_fourier_quadrature_with(p, g, s.convention).map_err(CliError::physics)?);
    }
    if matches!(method, Method::Mc | Method::All) {
        let density = CylinderDensity::from_geometry(g, s.convention);
        let mc = eta_realspace_mc_with(p, &density, &McOptions::new(samples, s.seed))
            .map_err(CliError::physics)?;
        if mc.uncertainty == 0.0 || mc.rel_uncertainty() > 0.5 {
            log::warn!(
                "Monte-Carlo estimate is unresolved for this geometry (r_C much smaller than the body); \
                 use a reduced --geometry"
            );
        }
        results.push(mc);
    }

    let mut table = Table::new(&[
        "method",
        "lambda",
        "r_c",
        "eta",
        "eta_over_lambda",
        "uncertainty",
        "rel_uncertainty",
        "rel_diff_closed_form",
    ]);
    for r in &results {
        table.push(vec![
            r.method.name().into(),
            p.lambda.into(),
            p.r_c.into(),
            r.eta.into(),
            r.eta_over_lambda.into(),
            r.uncertainty.into(),
            r.rel_uncertainty().into(),
            (r.eta_over_lambda / closed.eta_over_lambda - 1.0).into(),
        ]);
    }
    let method_name = format!("{method:?}").to_lowercase();
    let args = json!({ "method": method_name, "samples": samples });
    let meta = metadata(s, "eta", args)
        .with("mass_convention", s.convention)
        .with("geometry", s.geometry);
    emit(s.output.as_deref(), &table.render(&meta, s.format))
}

fn evolve(
    s: &Settings,
    t_max: Option<f64>,
    steps: usize,
    rate: Option<f64>,
    omega: Option<f64>,
) -> Result<(), CliError> {
    let eta =
        eta_closed_form_with(&s.collapse, &s.geometry, s.convention).map_err(CliError::physics)?;
    let base = EvolutionParams::from_eta(eta.eta, &s.geometry).map_err(CliError::physics)?;
    let p = EvolutionParams::new(omega.unwrap_or(base.omega), rate.unwrap_or(base.rate))
        .map_err(|e| CliError::Usage(e.to_string()))?;
    let t_max = t_max.unwrap_or(s.geometry.probe_delay);
    if !(t_max > 0.0 && t_max.is_finite()) {
        return Err(CliError::Usage(format!(
            "--t-max must be positive, got {t_max}"
        )));
    }
    if steps == 0 {
        return Err(CliError::Usage("--steps must be at least 1".into()));
    }

    let times: Vec<f64> = (0..=steps)
        .map(|i| t_max * i as f64 / steps as f64)
        .collect();
    let rho0 = DensityMatrix4::bell_like();
    let numeric = evolve_numeric_trajectory(&rho0, &p, &times, &OdeOptions::default())
        .map_err(CliError::physics)?;

    let mut columns = vec!["t".to_string()];
    for prefix in ["analytic", "numeric"] {
        for i in 1..=4 {
            for j in 1..=4 {
                columns.push(format!("{prefix}_re_{i}{j}"));
                columns.push(format!("{prefix}_im_{i}{j}"));
            }
        }
    }
    columns.push("max_discrepancy".into());
    let mut table = Table::new(&columns);
    let mut worst = 0.0f64;
    for (&t, n) in times.iter().zip(&numeric) {
        let a = evolve_analytic(&p, t).map_err(CliError::physics)?;
        let mut row: Vec<Cell> = vec![t.into()];
        for rho in [&a, n] {
            for i in 0..4 {
                for j in 0..4 {
                    let z = rho.entry(i, j);
                    row.push(z.re.into());
                    row.push(z.im.into());
                }
            }
        }
        let d = a.max_abs_diff(n);
        worst = worst.max(d);
        row.push(d.into());
        table.push(row);
    }

    let args = json!({ "t_max": t_max, "steps": steps, "rate": rate, "omega": omega });
    let meta = metadata(s, "evolve", args)
        .with("eta", eta.eta)
        .with("rate", p.rate)
        .with("omega", p.omega)
        .with("exponent_at_t_max", p.rate * t_max);
    emit(s.output.as_deref(), &table.render(&meta, s.format))?;
    if s.output.is_some() {
        println!(
            "Λ = {:e} s⁻¹, ω = {:e} s⁻¹, max |analytic − numeric| = {worst:e}",
            p.rate, p.omega
        );
    }
    Ok(())
}

fn fringe(
    s: &Settings,
    phi_s: f64,
    (phi_min, phi_max, points): (f64, f64, usize),
    (eps_s, eps_a): (f64, f64),
    truncation: Truncation,
) -> Result<(), CliError> {
    if points < 2 {
        return Err(CliError::Usage("--points must be at least 2".into()));
    }
    if !(phi_min.is_finite() && phi_max.is_finite() && phi_max > phi_min) {
        return Err(CliError::Usage(format!(
            "empty φ_a range [{phi_min}, {phi_max}]"
        )));
    }
    let configs: Vec<FringeConfig> = (0..points)
        .map(|i| {
            let phi_a = phi_min + (phi_max - phi_min) * i as f64 / (points - 1) as f64;
            FringeConfig::new(
                Complex64::new(eps_s, 0.0),
                Complex64::new(eps_a, 0.0),
                phi_s,
                phi_a,
            )
        })
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::Usage(e.to_string()))?;

    let closed: Vec<(f64, f64)> = configs.iter().map(fringe_probabilities).collect();
    let pipeline: Vec<(f64, f64)> = configs
        .iter()
        .map(|c| pipeline_fringe_probabilities(c, truncation))
        .collect::<Result<_, _>>()
        .map_err(CliError::physics)?;
    let plus: Vec<f64> = closed.iter().map(|c| c.0).collect();
    let vis = visibility(&plus);
    let (nf_plus, nf_minus) = factorized_counts(Complex64::new(eps_a, 0.0));

    let mut table = Table::new(&[
        "phi_a",
        "P_plus",
        "P_minus",
        "visibility",
        "p_sum",
        "factorized_plus",
        "factorized_minus",
        "pipeline_plus",
        "pipeline_minus",
    ]);
    for ((c, (pp, pm)), (qp, qm)) in configs.iter().zip(&closed).zip(&pipeline) {
        table.push(vec![
            c.phi_a.into(),
            (*pp).into(),
            (*pm).into(),
            vis.into(),
            (pp + pm).into(),
            nf_plus.into(),
            nf_minus.into(),
            (*qp).into(),
            (*qm).into(),
        ]);
    }
    let trunc = match truncation {
        Truncation::Exact => "exact",
        Truncation::FirstOrder => "first_order",
    };
    let args = json!({
        "phi_s": phi_s, "phi_a_min": phi_min, "phi_a_max": phi_max, "points": points,
        "eps_s": eps_s, "eps_a": eps_a, "truncation": trunc,
    });
    let meta = metadata(s, "fringe", args)
        .with("visibility", vis)
        .with("factorized_visibility", visibility(&[nf_plus, nf_minus]));
    emit(s.output.as_deref(), &table.render(&meta, s.format))
}

fn with_points(axis: &Axis, points: Option<usize>, flag: &str) -> Result<Axis, CliError> {
    match (axis, points) {
        (_, None) => Ok(axis.clone()),
        (Axis::Log { min, max, .. }, Some(n)) => Ok(Axis::log(*min, *max, n)),
        (Axis::Explicit { .. }, Some(_)) => Err(CliError::Usage(format!(
            "{flag} only applies to log-spaced axes"
        ))),
    }
}

fn exclusion(
    mut s: Settings,
    lambda_points: Option<usize>,
    rc_points: Option<usize>,
) -> Result<(), CliError> {
    s.grid.lambda = with_points(&s.grid.lambda, lambda_points, "--lambda-points")?;
    s.grid.rc = with_points(&s.grid.rc, rc_points, "--rc-points")?;
    let g = &s.geometry;
    let grid_err = |e: csl_core::exclusion::ExclusionError| match e {
        csl_core::exclusion::ExclusionError::FormFactor(_) => CliError::physics(e),
        other => CliError::Usage(other.to_string()),
    };
    let grid = ExclusionGrid::scan(&s.grid, g, s.threshold, s.convention).map_err(grid_err)?;
    let curve =
        BoundaryCurve::compute(g, &s.grid.rc, s.threshold, s.convention).map_err(grid_err)?;

    let slopes: Vec<serde_json::Value> = SLOPE_PROBES
        .iter()
        .map(|&(rc, expected, tol)| match curve.local_slope(rc) {
            Ok(slope) => json!({
                "r_c": rc, "slope": slope, "expected": expected, "tolerance": tol,
                "within_tolerance": (slope - expected).abs() <= tol,
            }),
            Err(_) => json!({ "r_c": rc, "slope": null, "expected": expected, "tolerance": tol }),
        })
        .collect();
    let refs: Vec<serde_json::Value> = reference_points()
        .iter()
        .map(|r| {
            let x = exponent_at(&s, r.collapse())?;
            Ok(json!({
                "name": r.name, "lambda": r.lambda, "r_c": r.r_c,
                "exponent": x, "excluded": x >= s.threshold,
            }))
        })
        .collect::<Result<_, CliError>>()?;
    let (min_rc, min_lambda) = curve.minimum();

    let dir = s
        .output
        .clone()
        .unwrap_or_else(|| PathBuf::from(DEFAULT_EXCLUSION_DIR));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let args = json!({ "lambda_points": lambda_points, "rc_points": rc_points });
    let meta = metadata(&s, "exclusion", args).with("threshold", s.threshold);

    let mut boundary = Table::new(&["r_c", "lambda_star"]);
    for (r, l) in curve.rc.iter().zip(&curve.lambda_star) {
        boundary.push(vec![(*r).into(), (*l).into()]);
    }
    let mut scan = Table::new(&["lambda", "r_c", "exponent", "excluded"]);
    for (i, lambda) in grid.lambda_axis.iter().enumerate() {
        for (j, rc) in grid.rc_axis.iter().enumerate() {
            scan.push(vec![
                (*lambda).into(),
                (*rc).into(),
                grid.exponent[i][j].into(),
                grid.excluded[i][j].into(),
            ]);
        }
    }
    let ext = s.format.extension();
    emit(
        Some(&dir.join(format!("boundary.{ext}"))),
        &boundary.render(&meta, s.format),
    )?;
    emit(
        Some(&dir.join(format!("scan.{ext}"))),
        &scan.render(&meta, s.format),
    )?;

    let doc = meta
        .clone()
        .with("geometry", s.geometry)
        .with("mass_convention", s.convention)
        .with("grid", &s.grid)
        .with("slopes", &slopes)
        .with("reference_points", &refs)
        .with(
            "minimum",
            json!({ "r_c": min_rc, "lambda_star": min_lambda }),
        )
        .with("excluded_points", grid.excluded_count())
        .to_json();
    let mut text = serde_json::to_string_pretty(&doc).expect("metadata serialises");
    text.push('\n');
    emit(Some(&dir.join("metadata.json")), &text)?;

    println!("wrote {}", dir.display());
    for v in &slopes {
        match v["slope"].as_f64() {
            Some(slope) => println!(
                "slope at r_C = {:e} m: {slope:+.4} (expected {:+} ± {})",
                v["r_c"].as_f64().unwrap_or_default(),
                v["expected"],
                v["tolerance"]
            ),
            None => println!("slope at r_C = {} m: outside the scanned range", v["r_c"]),
        }
    }
    for v in &refs {
        println!(
            "{}: exponent {:e} -> {}",
            v["name"].as_str().unwrap_or_default(),
            v["exponent"].as_f64().unwrap_or_default(),
            if v["excluded"].as_bool() == Some(true) {
                "excluded"
            } else {
                "not excluded"
            }
        );
    }
    println!("boundary minimum: λ* = {min_lambda:e} s⁻¹ at r_C = {min_rc:e} m");
    Ok(())
}

fn exponent_at(s: &Settings, p: CollapseParams) -> Result<f64, CliError> {
    let eta = eta_closed_form_with(&p, &s.geometry, s.convention).map_err(CliError::physics)?;
    Ok(csl_core::dynamics::decoherence_exponent(
        eta.eta,
        &s.geometry,
    ))
}
