//! Two-phonon density-matrix dynamics under the CSL master equation
//!
//! dρ/dt = −iω[H, ρ] − (Λ/2) Γ[ρ]
//!
//! in the ordered basis |0_L 0_R⟩, |1_L 0_R⟩, |0_L 1_R⟩, |1_L 1_R⟩. The
//! commutator and the dissipator are implemented entry by entry from their
//! explicit 4×4 tables; Λ = 4ηΔz² is the effective decoherence rate.

use nalgebra::{Matrix4, SymmetricEigen};
use num_complex::Complex64;
use thiserror::Error;

use crate::ode::{DormandPrince, OdeError, OdeOptions};
use crate::params::PhononGeometry;

pub type Mat4 = Matrix4<Complex64>;

pub const HERMITICITY_TOL: f64 = 1e-12;
pub const TRACE_TOL: f64 = 1e-12;
pub const POSITIVITY_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("matrix is not Hermitian (max deviation {0:e})")]
    NotHermitian(f64),
    #[error("trace deviates from one by {0:e}")]
    Trace(f64),
    #[error("matrix is not positive semidefinite (smallest eigenvalue {0:e})")]
    NotPositive(f64),
    #[error("`{field}` must be non-negative and finite, got {value}")]
    BadParameter { field: &'static str, value: f64 },
    #[error("analytic solution acquired an imaginary part of {0:e}")]
    NotReal(f64),
    #[error(transparent)]
    Integrator(#[from] OdeError),
}

/// Hermitian, unit-trace, positive semidefinite 4×4 matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix4(Mat4);

impl DensityMatrix4 {
    pub fn new(m: Mat4) -> Result<Self, DynamicsError> {
        let herm = hermiticity_error(&m);
        if herm > HERMITICITY_TOL {
            return Err(DynamicsError::NotHermitian(herm));
        }
        let tr = (m.trace() - Complex64::new(1.0, 0.0)).norm();
        if tr > TRACE_TOL {
            return Err(DynamicsError::Trace(tr));
        }
        let rho = DensityMatrix4(m);
        let min = rho.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(DynamicsError::NotPositive(min));
        }
        Ok(rho)
    }

    /// (|1_L 0_R⟩ + |0_L 1_R⟩)/√2, the state heralded by one Stokes photon.
    pub fn bell_like() -> Self {
        let h = Complex64::new(0.5, 0.0);
        let mut m = Mat4::zeros();
        m[(1, 1)] = h;
        m[(1, 2)] = h;
        m[(2, 1)] = h;
        m[(2, 2)] = h;
        DensityMatrix4(m)
    }

    pub fn matrix(&self) -> &Mat4 {
        &self.0
    }

    /// Zero-based entry (i, j).
    pub fn entry(&self, i: usize, j: usize) -> Complex64 {
        self.0[(i, j)]
    }

    pub fn trace(&self) -> Complex64 {
        self.0.trace()
    }

    pub fn purity(&self) -> f64 {
        (self.0 * self.0).trace().re
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.0 + self.0.adjoint()) * Complex64::new(0.5, 0.0);
        SymmetricEigen::new(herm).eigenvalues.min()
    }

    /// Largest entrywise modulus of the difference.
    pub fn max_abs_diff(&self, other: &DensityMatrix4) -> f64 {
        (self.0 - other.0)
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max)
    }
}

/// The maximally mixed state I/4 reached at long times.
pub fn stationary_state() -> DensityMatrix4 {
    DensityMatrix4(Mat4::identity() * Complex64::new(0.25, 0.0))
}

pub fn hermiticity_error(m: &Mat4) -> f64 {
    (m - m.adjoint())
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

// [H, ρ]_ij = COMMUTATOR[i][j] · ρ_ij
const COMMUTATOR: [[f64; 4]; 4] = [
    [0.0, -1.0, -1.0, -2.0],
    [1.0, 0.0, 0.0, -1.0],
    [1.0, 0.0, 0.0, -1.0],
    [2.0, 1.0, 1.0, 0.0],
];

// Γ[ρ]_ij = 2ρ_ij − ρ_p − ρ_q with (p, q) listed per entry (zero-based).
const DISSIPATOR: [[[(usize, usize); 2]; 4]; 4] = [
    [
        [(1, 1), (2, 2)],
        [(1, 0), (2, 3)],
        [(1, 3), (2, 0)],
        [(1, 2), (2, 1)],
    ],
    [
        [(0, 1), (3, 2)],
        [(0, 0), (3, 3)],
        [(3, 0), (0, 3)],
        [(0, 2), (3, 1)],
    ],
    [
        [(3, 1), (0, 2)],
        [(3, 0), (0, 3)],
        [(3, 3), (0, 0)],
        [(3, 2), (0, 1)],
    ],
    [
        [(2, 1), (1, 2)],
        [(2, 0), (1, 3)],
        [(2, 3), (1, 0)],
        [(2, 2), (1, 1)],
    ],
];

/// [H, ρ] in the two-phonon basis.
pub fn commutator_h(rho: &Mat4) -> Mat4 {
    Mat4::from_fn(|i, j| rho[(i, j)] * COMMUTATOR[i][j])
}

/// Γ[ρ] in the two-phonon basis.
pub fn gamma_dissipator(rho: &Mat4) -> Mat4 {
    Mat4::from_fn(|i, j| {
        let [p, q] = DISSIPATOR[i][j];
        rho[(i, j)] * 2.0 - rho[p] - rho[q]
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolutionParams {
    /// Phonon frequency ω, s⁻¹.
    pub omega: f64,
    /// CSL rate Λ = 4ηΔz², s⁻¹.
    pub rate: f64,
    /// Ω = √(Λ² − 4ω²); imaginary in the oscillatory regime Λ < 2ω.
    pub big_omega: Complex64,
}

impl EvolutionParams {
    pub fn new(omega: f64, rate: f64) -> Result<Self, DynamicsError> {
        for (field, value) in [("omega", omega), ("rate", rate)] {
            if !(value.is_finite() && value >= 0.0) {
                return Err(DynamicsError::BadParameter { field, value });
            }
        }
        let big_omega = Complex64::new(rate * rate - 4.0 * omega * omega, 0.0).sqrt();
        Ok(EvolutionParams {
            omega,
            rate,
            big_omega,
        })
    }

    /// Λ = 4ηΔz² with ω taken from the geometry.
    pub fn from_eta(eta: f64, g: &PhononGeometry) -> Result<Self, DynamicsError> {
        if !(eta.is_finite() && eta >= 0.0) {
            return Err(DynamicsError::BadParameter {
                field: "eta",
                value: eta,
            });
        }
        Self::new(g.omega, 4.0 * eta * g.delta_z * g.delta_z)
    }

    /// Time unit used by the numerical integrator.
    fn time_scale(&self) -> f64 {
        if self.rate > 0.0 {
            self.rate
        } else if self.omega > 0.0 {
            self.omega
        } else {
            1.0
        }
    }
}

/// dρ/dt for the given parameters.
pub fn rhs(rho: &Mat4, p: &EvolutionParams) -> Mat4 {
    commutator_h(rho) * Complex64::new(0.0, -p.omega)
        - gamma_dissipator(rho) * Complex64::new(0.5 * p.rate, 0.0)
}

fn flatten(m: &Mat4, out: &mut [f64]) {
    for i in 0..4 {
        for j in 0..4 {
            let z = m[(i, j)];
            out[2 * (4 * i + j)] = z.re;
            out[2 * (4 * i + j) + 1] = z.im;
        }
    }
}

fn unflatten(y: &[f64]) -> Mat4 {
    Mat4::from_fn(|i, j| Complex64::new(y[2 * (4 * i + j)], y[2 * (4 * i + j) + 1]))
}

/// Numerical solution at each of `times` (non-decreasing, ≥ 0), integrating
/// in the rescaled time τ = Λt (or ωt when Λ = 0).
pub fn evolve_numeric_trajectory(
    rho0: &DensityMatrix4,
    p: &EvolutionParams,
    times: &[f64],
    opts: &OdeOptions,
) -> Result<Vec<DensityMatrix4>, DynamicsError> {
    let scale = p.time_scale();
    let scaled = EvolutionParams {
        omega: p.omega / scale,
        rate: p.rate / scale,
        big_omega: p.big_omega / scale,
    };
    let mut y = [0.0; 32];
    flatten(&rho0.0, &mut y);
    let mut ode = DormandPrince::new(
        32,
        |_, y: &[f64], dy: &mut [f64]| flatten(&rhs(&unflatten(y), &scaled), dy),
        *opts,
    );
    let mut tau = 0.0;
    let mut out = Vec::with_capacity(times.len());
    for &t in times {
        if !(t.is_finite() && t >= 0.0) {
            return Err(DynamicsError::BadParameter {
                field: "t",
                value: t,
            });
        }
        let target = t * scale;
        ode.integrate(tau, target, &mut y)?;
        tau = tau.max(target);
        out.push(DensityMatrix4::new(unflatten(&y))?);
    }
    Ok(out)
}

/// ρ(t) from the adaptive Dormand–Prince integrator (local tolerance 1e-12).
pub fn evolve_numeric(
    rho0: &DensityMatrix4,
    p: &EvolutionParams,
    t: f64,
) -> Result<DensityMatrix4, DynamicsError> {
    let mut traj = evolve_numeric_trajectory(rho0, p, &[t], &OdeOptions::default())?;
    Ok(traj.pop().expect("one time requested"))
}

const SERIES_SWITCH: f64 = 0.5;

/// e^{−Λt} sinh(Ωt)/Ω and e^{−Λt} (cosh(Ωt) − 1)/Ω², both entire in Ω².
fn damped_hyperbolics(p: &EvolutionParams, t: f64) -> (Complex64, Complex64) {
    let omega = p.big_omega;
    let decay = (-p.rate * t).exp();
    if (omega * t).norm() < SERIES_SWITCH {
        let z = omega * omega * t * t;
        let (mut s1, mut s2) = (Complex64::new(1.0, 0.0), Complex64::new(0.5, 0.0));
        let (mut t1, mut t2) = (s1, s2);
        for k in 1..30 {
            let kf = k as f64;
            t1 = t1 * z / ((2.0 * kf) * (2.0 * kf + 1.0));
            t2 = t2 * z / ((2.0 * kf + 1.0) * (2.0 * kf + 2.0));
            s1 += t1;
            s2 += t2;
            if t1.norm() < 1e-18 && t2.norm() < 1e-18 {
                break;
            }
        }
        (s1 * t * decay, s2 * t * t * decay)
    } else {
        let grow = ((omega - p.rate) * t).exp();
        let shrink = ((-omega - p.rate) * t).exp();
        let sinh = (grow - shrink) * 0.5 / omega;
        let cosh_m1 = ((grow + shrink) * 0.5 - decay) / (omega * omega);
        (sinh, cosh_m1)
    }
}

/// Closed-form ρ(t) for the Bell-like initial state.
pub fn evolve_analytic(p: &EvolutionParams, t: f64) -> Result<DensityMatrix4, DynamicsError> {
    if !(t.is_finite() && t >= 0.0) {
        return Err(DynamicsError::BadParameter {
            field: "t",
            value: t,
        });
    }
    let lam = p.rate;
    let (e_sinh, e_cosh_m1) = damped_hyperbolics(p, t);
    let imag = (lam * e_sinh.im)
        .abs()
        .max((lam * p.omega * e_cosh_m1.im).abs())
        .max((lam * lam * e_cosh_m1.im).abs());
    if imag > 1e-12 {
        return Err(DynamicsError::NotReal(imag));
    }
    let e_sinh = e_sinh.re;
    let e_cosh_m1 = e_cosh_m1.re;
    let decay = (-lam * t).exp();
    let pop_decay = (-2.0 * lam * t).exp();

    let outer = -(-2.0 * lam * t).exp_m1() / 4.0;
    let inner = (1.0 + pop_decay) / 4.0;
    let rho14 = Complex64::new(0.5 * lam * e_sinh, lam * p.omega * e_cosh_m1);
    let rho23 = 0.5 * (decay + lam * lam * e_cosh_m1);

    let mut m = Mat4::zeros();
    m[(0, 0)] = outer.into();
    m[(3, 3)] = outer.into();
    m[(1, 1)] = inner.into();
    m[(2, 2)] = inner.into();
    m[(0, 3)] = rho14;
    m[(3, 0)] = rho14.conj();
    m[(1, 2)] = rho23.into();
    m[(2, 1)] = rho23.into();
    DensityMatrix4::new(m)
}

/// Exponent 4ηΔz²T of the coherence suppression accumulated over the probe
/// delay; equals ΛT.
pub fn decoherence_exponent(eta: f64, g: &PhononGeometry) -> f64 {
    4.0 * eta * g.delta_z * g.delta_z * g.probe_delay
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::default_geometry;
    use proptest::prelude::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    // Structural oracle: H = n_L + n_R and Γ[ρ] = Σ_s (ρ − σx_s ρ σx_s).
    fn oracle_commutator(rho: &Mat4) -> Mat4 {
        let h = Mat4::from_diagonal(&nalgebra::Vector4::new(c(0.0), c(1.0), c(1.0), c(2.0)));
        h * rho - rho * h
    }

    fn sigma_x(left: bool) -> Mat4 {
        let perm: [usize; 4] = if left { [1, 0, 3, 2] } else { [2, 3, 0, 1] };
        Mat4::from_fn(|i, j| if perm[i] == j { c(1.0) } else { c(0.0) })
    }

    fn oracle_dissipator(rho: &Mat4) -> Mat4 {
        let (l, r) = (sigma_x(true), sigma_x(false));
        rho * c(2.0) - l * rho * l - r * rho * r
    }

    fn random_hermitian(seed: &[f64; 16]) -> Mat4 {
        let mut m = Mat4::zeros();
        let mut k = 0;
        for i in 0..4 {
            m[(i, i)] = c(seed[k]);
            k += 1;
            for j in (i + 1)..4 {
                let z = Complex64::new(seed[k], seed[k + 1]);
                m[(i, j)] = z;
                m[(j, i)] = z.conj();
                k += 2;
            }
        }
        m
    }

    #[test]
    fn commutator_examples() {
        assert_eq!(commutator_h(&stationary_state().0), Mat4::zeros());
        let mut m = Mat4::zeros();
        m[(0, 3)] = c(1.0);
        m[(3, 0)] = c(1.0);
        let out = commutator_h(&m);
        assert_eq!(out[(0, 3)], c(-2.0));
        assert_eq!(out[(3, 0)], c(2.0));
        assert_eq!(out.iter().filter(|z| z.norm() > 0.0).count(), 2);
        let mut m = Mat4::zeros();
        m[(1, 2)] = c(1.0);
        m[(2, 1)] = c(1.0);
        assert_eq!(commutator_h(&m), Mat4::zeros());
    }

    #[test]
    fn dissipator_examples() {
        assert_eq!(gamma_dissipator(&stationary_state().0), Mat4::zeros());
        let g = gamma_dissipator(&DensityMatrix4::bell_like().0);
        assert_eq!(g[(0, 0)], c(-1.0));
        assert_eq!(g[(1, 2)], c(1.0));
        assert_eq!(g[(1, 1)], c(1.0));
        assert_eq!(g[(0, 3)], c(-1.0));
    }

    proptest! {
        #[test]
        fn tables_match_structural_oracle(seed in prop::array::uniform16(-1.0f64..1.0)) {
            let m = random_hermitian(&seed);
            let dc = (commutator_h(&m) - oracle_commutator(&m)).norm();
            let dg = (gamma_dissipator(&m) - oracle_dissipator(&m)).norm();
            prop_assert!(dc < 1e-14 && dg < 1e-14);
            let g = gamma_dissipator(&m);
            prop_assert!(hermiticity_error(&g) < 1e-15);
            prop_assert!(g.trace().norm() < 1e-14);
            prop_assert!(hermiticity_error(&(commutator_h(&m) * Complex64::new(0.0, 1.0))) < 1e-15);
        }

        #[test]
        fn numeric_evolution_preserves_invariants(
            rate in 0.05f64..5.0, omega in 0.0f64..3.0, t in 0.0f64..6.0,
            seed in prop::array::uniform16(-1.0f64..1.0),
        ) {
            // random valid start state: A A† / tr
            let a = random_hermitian(&seed);
            let m = a * a.adjoint();
            let m = m / m.trace();
            let rho0 = DensityMatrix4::new(m).unwrap();
            let p = EvolutionParams::new(omega, rate).unwrap();
            let rho = evolve_numeric(&rho0, &p, t / rate).unwrap();
            prop_assert!((rho.trace() - c(1.0)).norm() < 1e-12);
            prop_assert!(rho.min_eigenvalue() >= -1e-10);
        }
    }

    #[test]
    fn stationary_state_is_fixed_point() {
        let s = stationary_state();
        assert_eq!(gamma_dissipator(s.matrix()), Mat4::zeros());
        let p = EvolutionParams::new(0.7, 1.3).unwrap();
        assert!(evolve_numeric(&s, &p, 4.0).unwrap().max_abs_diff(&s) < 1e-14);
    }

    #[test]
    fn analytic_initial_state() {
        for (omega, rate) in [(0.2, 1.0), (3.0, 0.5), (0.5, 1.0), (1.0, 0.0)] {
            let p = EvolutionParams::new(omega, rate).unwrap();
            let r = evolve_analytic(&p, 0.0).unwrap();
            assert!(r.max_abs_diff(&DensityMatrix4::bell_like()) < 1e-15);
            assert_eq!(r.entry(0, 0), c(0.0));
        }
    }

    #[test]
    fn zero_rate_is_frozen() {
        let p = EvolutionParams::new(0.8, 0.0).unwrap();
        let rho0 = DensityMatrix4::bell_like();
        for t in [0.3, 2.0, 17.0] {
            assert!(evolve_analytic(&p, t).unwrap().max_abs_diff(&rho0) < 1e-15);
            assert!(evolve_numeric(&rho0, &p, t).unwrap().max_abs_diff(&rho0) < 1e-13);
        }
        assert_eq!(evolve_numeric(&rho0, &p, 0.0).unwrap(), rho0);
    }

    #[test]
    fn analytic_matches_numeric_reference_case() {
        let p = EvolutionParams::new(0.2, 1.0).unwrap();
        let a = evolve_analytic(&p, 3.0).unwrap();
        let n = evolve_numeric(&DensityMatrix4::bell_like(), &p, 3.0).unwrap();
        assert!(a.max_abs_diff(&n) < 1e-8, "{}", a.max_abs_diff(&n));
    }

    #[test]
    fn critical_damping_uses_limit() {
        // Λ = 2ω makes Ω vanish
        let p = EvolutionParams::new(0.5, 1.0).unwrap();
        assert_eq!(p.big_omega, c(0.0));
        for t in [0.1, 1.0, 5.0] {
            let a = evolve_analytic(&p, t).unwrap();
            let n = evolve_numeric(&DensityMatrix4::bell_like(), &p, t).unwrap();
            assert!(a.max_abs_diff(&n) < 1e-9);
        }
    }

    #[test]
    fn long_time_limit_is_maximally_mixed() {
        let p = EvolutionParams::new(3.0, 1.0).unwrap();
        let r = evolve_analytic(&p, 40.0).unwrap();
        assert!(r.max_abs_diff(&stationary_state()) < 1e-12);
    }

    #[test]
    fn purity_non_increasing_without_unitary_part() {
        let p = EvolutionParams::new(0.0, 1.0).unwrap();
        let rho0 = DensityMatrix4::bell_like();
        let times: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let traj = evolve_numeric_trajectory(&rho0, &p, &times, &OdeOptions::default()).unwrap();
        for w in traj.windows(2) {
            assert!(w[1].purity() <= w[0].purity() + 1e-13);
        }
    }

    #[test]
    fn coherence_decays_with_rate_without_unitary_part() {
        for t in [0.5, 2.0, 6.0] {
            let mut prev = f64::INFINITY;
            for i in 0..50 {
                let rate = 0.05 * i as f64;
                let r = evolve_analytic(&EvolutionParams::new(0.0, rate).unwrap(), t).unwrap();
                let v = r.entry(1, 2).norm();
                assert!(v <= prev + 1e-14, "t={t} Λ={rate}");
                prev = v;
            }
        }
    }

    #[test]
    fn strong_rate_freezes_coherence() {
        // with ω > 0, ρ23 dips at intermediate Λ and climbs back towards 1/4
        let rho23 = |rate: f64| {
            let p = EvolutionParams::new(0.3, rate).unwrap();
            evolve_analytic(&p, 2.0).unwrap().entry(1, 2).re
        };
        assert!(rho23(1.75) < rho23(10.0));
        assert!((rho23(1e4) - 0.25).abs() < 1e-3);
    }

    #[test]
    fn exponent_matches_rate_times_delay() {
        let g = default_geometry();
        assert_eq!(decoherence_exponent(0.0, &g), 0.0);
        let eta = 6.4e27;
        let p = EvolutionParams::from_eta(eta, &g).unwrap();
        let x = decoherence_exponent(eta, &g);
        assert!(((p.rate * g.probe_delay) / x - 1.0).abs() < 1e-14);
        assert!((x / 2.3e-6 - 1.0).abs() < 0.1, "{x}");
    }

    #[test]
    fn physical_parameters_integrate() {
        // ω = 4e13 s⁻¹ over the probe delay, tiny Λ
        let g = default_geometry();
        let p = EvolutionParams::from_eta(6.4e27, &g).unwrap();
        let a = evolve_analytic(&p, g.probe_delay).unwrap();
        let n = evolve_numeric(&DensityMatrix4::bell_like(), &p, g.probe_delay).unwrap();
        assert!(a.max_abs_diff(&n) < 1e-8);
    }

    #[test]
    fn invalid_inputs() {
        assert!(EvolutionParams::new(-1.0, 1.0).is_err());
        assert!(EvolutionParams::new(1.0, f64::NAN).is_err());
        let p = EvolutionParams::new(1.0, 1.0).unwrap();
        assert!(evolve_analytic(&p, -1.0).is_err());
        let mut bad = DensityMatrix4::bell_like().0;
        bad[(0, 1)] = c(0.3);
        assert!(matches!(
            DensityMatrix4::new(bad),
            Err(DynamicsError::NotHermitian(_))
        ));
        let neg = Mat4::from_diagonal(&nalgebra::Vector4::new(c(1.5), c(-0.5), c(0.0), c(0.0)));
        assert!(matches!(
            DensityMatrix4::new(neg),
            Err(DynamicsError::NotPositive(_))
        ));
    }
}
