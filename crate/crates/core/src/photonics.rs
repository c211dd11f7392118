//! Stokes / phonon / anti-Stokes state evolution for the two-diamond
//! heralded entanglement scheme, and the resulting anti-Stokes fringes.
//!
//! Each diamond carries three single-excitation modes: Stokes photon `s`,
//! optical phonon `b` and anti-Stokes photon `a`.

use std::collections::BTreeMap;
use std::fmt;

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

pub const MAX_PROBABILITY: f64 = 0.1;
pub const WARN_PROBABILITY: f64 = 0.01;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhotonicError {
    #[error("{0} diamond already carries a Stokes or phonon excitation")]
    AlreadyExcited(Side),
    #[error("projection left a state of zero norm")]
    ZeroNorm,
    #[error("|{field}|² = {value} exceeds the perturbative limit {MAX_PROBABILITY}")]
    NotPerturbative { field: &'static str, value: f64 },
    #[error("`{field}` must be finite, got {value}")]
    NonFinite { field: &'static str, value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

impl Side {
    const BOTH: [Side; 2] = [Side::Left, Side::Right];

    fn offset(self) -> usize {
        match self {
            Side::Left => 0,
            Side::Right => 3,
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Side::Left => "left",
            Side::Right => "right",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Stokes,
    Phonon,
    AntiStokes,
}

impl Mode {
    fn index(self) -> usize {
        match self {
            Mode::Stokes => 0,
            Mode::Phonon => 1,
            Mode::AntiStokes => 2,
        }
    }
}

/// Occupation tuple (s_L, b_L, a_L, s_R, b_R, a_R), each 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Ket([u8; 6]);

impl Ket {
    pub const VACUUM: Ket = Ket([0; 6]);

    pub fn new(occupations: [u8; 6]) -> Ket {
        assert!(
            occupations.iter().all(|&n| n <= 1),
            "occupations are 0 or 1"
        );
        Ket(occupations)
    }

    pub fn occupations(&self) -> [u8; 6] {
        self.0
    }

    pub fn get(&self, side: Side, mode: Mode) -> u8 {
        self.0[side.offset() + mode.index()]
    }

    fn with(mut self, side: Side, mode: Mode, n: u8) -> Ket {
        self.0[side.offset() + mode.index()] = n;
        self
    }

    fn count(&self, mode: Mode) -> u8 {
        Side::BOTH.iter().map(|&s| self.get(s, mode)).sum()
    }
}

/// Keep or drop second-order branches.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Truncation {
    /// Normalized per-diamond maps, all branches kept.
    #[default]
    Exact,
    /// Unnormalized first-order maps; kets with two Stokes or two anti-Stokes
    /// photons are dropped.
    FirstOrder,
}

/// Sparse, possibly unnormalized, amplitude map.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct PhotonicState {
    amplitudes: BTreeMap<Ket, Complex64>,
}

impl PhotonicState {
    pub fn vacuum() -> Self {
        Self::from_terms([(Ket::VACUUM, Complex64::new(1.0, 0.0))])
    }

    pub fn from_terms<I: IntoIterator<Item = (Ket, Complex64)>>(terms: I) -> Self {
        let mut s = PhotonicState::default();
        for (k, a) in terms {
            s.add(k, a);
        }
        s
    }

    fn add(&mut self, ket: Ket, amp: Complex64) {
        if amp != Complex64::new(0.0, 0.0) {
            *self.amplitudes.entry(ket).or_default() += amp;
        }
    }

    pub fn amplitude(&self, ket: &Ket) -> Complex64 {
        self.amplitudes.get(ket).copied().unwrap_or_default()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Ket, &Complex64)> {
        self.amplitudes.iter()
    }

    pub fn len(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.amplitudes.is_empty()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    fn map<F: Fn(&Ket, Complex64, &mut PhotonicState)>(&self, f: F) -> PhotonicState {
        let mut out = PhotonicState::default();
        for (k, &a) in &self.amplitudes {
            f(k, a, &mut out);
        }
        out
    }

    /// Largest amplitude difference over the union of kets.
    pub fn max_abs_diff(&self, other: &PhotonicState) -> f64 {
        self.amplitudes
            .keys()
            .chain(other.amplitudes.keys())
            .map(|k| (self.amplitude(k) - other.amplitude(k)).norm())
            .fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeConfig {
    pub eps_s: Complex64,
    pub eps_a: Complex64,
    pub phi_s: f64,
    pub phi_a: f64,
}

impl FringeConfig {
    pub fn new(
        eps_s: Complex64,
        eps_a: Complex64,
        phi_s: f64,
        phi_a: f64,
    ) -> Result<Self, PhotonicError> {
        for (field, eps) in [("eps_s", eps_s), ("eps_a", eps_a)] {
            let p = eps.norm_sqr();
            if !p.is_finite() {
                return Err(PhotonicError::NonFinite { field, value: p });
            }
            if p > MAX_PROBABILITY {
                return Err(PhotonicError::NotPerturbative { field, value: p });
            }
            if p > WARN_PROBABILITY {
                log::warn!("|{field}|² = {p} is outside the perturbative regime");
            }
        }
        for (field, value) in [("phi_s", phi_s), ("phi_a", phi_a)] {
            if !value.is_finite() {
                return Err(PhotonicError::NonFinite { field, value });
            }
        }
        Ok(FringeConfig {
            eps_s,
            eps_a,
            phi_s,
            phi_a,
        })
    }
}

/// Pump pulse on one diamond: |0_s,0_b⟩ → |0_s,0_b⟩ + ε_s|1_s,1_b⟩.
pub fn pump_side(
    state: &PhotonicState,
    side: Side,
    eps_s: Complex64,
    truncation: Truncation,
) -> Result<PhotonicState, PhotonicError> {
    if state
        .iter()
        .any(|(k, _)| k.get(side, Mode::Stokes) == 1 || k.get(side, Mode::Phonon) == 1)
    {
        return Err(PhotonicError::AlreadyExcited(side));
    }
    let norm = match truncation {
        Truncation::Exact => 1.0 / (1.0 + eps_s.norm_sqr()).sqrt(),
        Truncation::FirstOrder => 1.0,
    };
    Ok(state.map(|k, a, out| {
        out.add(*k, a * norm);
        let excited = k.with(side, Mode::Stokes, 1).with(side, Mode::Phonon, 1);
        if truncation == Truncation::Exact || excited.count(Mode::Stokes) <= 1 {
            out.add(excited, a * eps_s * norm);
        }
    }))
}

/// Pump pulse on both diamonds.
pub fn pump_interaction(
    state: &PhotonicState,
    eps_s: Complex64,
    truncation: Truncation,
) -> Result<PhotonicState, PhotonicError> {
    let left = pump_side(state, Side::Left, eps_s, truncation)?;
    pump_side(&left, Side::Right, eps_s, truncation)
}

/// Multiplies kets carrying a right Stokes photon by e^{−iφ_s}.
pub fn apply_stokes_phase(state: &PhotonicState, phi_s: f64) -> PhotonicState {
    let phase = Complex64::from_polar(1.0, -phi_s);
    state.map(|k, a, out| {
        let f = if k.get(Side::Right, Mode::Stokes) == 1 {
            phase
        } else {
            Complex64::new(1.0, 0.0)
        };
        out.add(*k, a * f);
    })
}

fn probe_side(
    state: &PhotonicState,
    side: Side,
    eps_a: Complex64,
    truncation: Truncation,
) -> PhotonicState {
    let norm = match truncation {
        Truncation::Exact => 1.0 / (1.0 + eps_a.norm_sqr()).sqrt(),
        Truncation::FirstOrder => 1.0,
    };
    state.map(|k, a, out| {
        if k.get(side, Mode::Phonon) == 1 && k.get(side, Mode::AntiStokes) == 0 {
            out.add(*k, a * norm);
            let converted = k
                .with(side, Mode::Phonon, 0)
                .with(side, Mode::AntiStokes, 1);
            if truncation == Truncation::Exact || converted.count(Mode::AntiStokes) <= 1 {
                out.add(converted, a * eps_a * norm);
            }
        } else {
            out.add(*k, a);
        }
    })
}

/// Probe pulse on both diamonds: |0_a,1_b⟩ → |0_a,1_b⟩ + ε_a|1_a,0_b⟩.
pub fn probe_conversion(
    state: &PhotonicState,
    eps_a: Complex64,
    truncation: Truncation,
) -> PhotonicState {
    let left = probe_side(state, Side::Left, eps_a, truncation);
    probe_side(&left, Side::Right, eps_a, truncation)
}

/// Single Stokes click behind the recombining beamsplitter: keeps kets with
/// s_L + s_R = 1 and merges them onto the detected mode (Stokes occupations
/// cleared, amplitudes added).
pub fn project_stokes_detection(state: &PhotonicState) -> Result<PhotonicState, PhotonicError> {
    let out = state.map(|k, a, out| {
        if k.count(Mode::Stokes) == 1 {
            out.add(
                k.with(Side::Left, Mode::Stokes, 0)
                    .with(Side::Right, Mode::Stokes, 0),
                a,
            );
        }
    });
    if out.norm_sqr() == 0.0 {
        return Err(PhotonicError::ZeroNorm);
    }
    Ok(out)
}

/// |⟨a±|ψ⟩|² summed over the phonon configurations left behind, with
/// |a±⟩ = (|1_a⟩_L|0_a⟩_R ± e^{iφ_a}|0_a⟩_L|1_a⟩_R)/√2.
pub fn anti_stokes_projection(state: &PhotonicState, phi_a: f64) -> (f64, f64) {
    let conj_phase = Complex64::from_polar(1.0, -phi_a);
    let mut plus: BTreeMap<(u8, u8), Complex64> = BTreeMap::new();
    let mut minus: BTreeMap<(u8, u8), Complex64> = BTreeMap::new();
    for (k, &a) in state.iter() {
        let phonons = (
            k.get(Side::Left, Mode::Phonon),
            k.get(Side::Right, Mode::Phonon),
        );
        let (cp, cm) = match (
            k.get(Side::Left, Mode::AntiStokes),
            k.get(Side::Right, Mode::AntiStokes),
        ) {
            (1, 0) => (Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)),
            (0, 1) => (conj_phase, -conj_phase),
            _ => continue,
        };
        *plus.entry(phonons).or_default() += cp * a * std::f64::consts::FRAC_1_SQRT_2;
        *minus.entry(phonons).or_default() += cm * a * std::f64::consts::FRAC_1_SQRT_2;
    }
    (
        plus.values().map(|z| z.norm_sqr()).sum(),
        minus.values().map(|z| z.norm_sqr()).sum(),
    )
}

/// The post-selected state: pump, Stokes phase, probe, Stokes click.
pub fn heralded_state(
    cfg: &FringeConfig,
    truncation: Truncation,
) -> Result<PhotonicState, PhotonicError> {
    let pumped = pump_interaction(&PhotonicState::vacuum(), cfg.eps_s, truncation)?;
    let phased = apply_stokes_phase(&pumped, cfg.phi_s);
    let probed = probe_conversion(&phased, cfg.eps_a, truncation);
    project_stokes_detection(&probed)
}

/// P± from the full state pipeline, per heralding probability |ε_s|².
pub fn pipeline_fringe_probabilities(
    cfg: &FringeConfig,
    truncation: Truncation,
) -> Result<(f64, f64), PhotonicError> {
    let post = heralded_state(cfg, truncation)?;
    let (p, m) = anti_stokes_projection(&post, cfg.phi_a);
    let herald = cfg.eps_s.norm_sqr();
    Ok((p / herald, m / herald))
}

/// P± = 2|ε_a|² sin²((φ_a + φ_s)/2 + (π ± π)/4).
pub fn fringe_probabilities(cfg: &FringeConfig) -> (f64, f64) {
    let half = 0.5 * (cfg.phi_a + cfg.phi_s);
    let p2 = 2.0 * cfg.eps_a.norm_sqr();
    (
        p2 * (half + std::f64::consts::FRAC_PI_2).sin().powi(2),
        p2 * half.sin().powi(2),
    )
}

/// Counts per branch for a factorized left/right state: |ε_a|²/2 each.
pub fn factorized_counts(eps_a: Complex64) -> (f64, f64) {
    let n = 0.5 * eps_a.norm_sqr();
    (n, n)
}

/// (max − min)/(max + min); zero for an empty or all-zero sweep.
pub fn visibility(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    if values.is_empty() || max + min == 0.0 {
        0.0
    } else {
        (max - min) / (max + min)
    }
}

/// Schmidt rank across the left/right cut (singular values above
/// `rel_tol`·σ_max).
pub fn schmidt_rank(state: &PhotonicState, rel_tol: f64) -> usize {
    let local = |k: &Ket, side: Side| -> usize {
        (k.get(side, Mode::Stokes) as usize) << 2
            | (k.get(side, Mode::Phonon) as usize) << 1
            | k.get(side, Mode::AntiStokes) as usize
    };
    let mut m = DMatrix::<Complex64>::zeros(8, 8);
    for (k, &a) in state.iter() {
        m[(local(k, Side::Left), local(k, Side::Right))] += a;
    }
    let sv = m.singular_values();
    let max = sv.max();
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > rel_tol * max).count()
}
