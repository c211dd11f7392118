//! Dormand–Prince 5(4) integrator with adaptive step size for real state
//! vectors.

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OdeError {
    #[error("step size underflow at t = {t:e} (h = {h:e})")]
    StepUnderflow { t: f64, h: f64 },
    #[error("step budget of {0} exhausted")]
    TooManySteps(usize),
    #[error("non-finite state at t = {0:e}")]
    NonFinite(f64),
}

#[derive(Debug, Clone, Copy)]
pub struct OdeOptions {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_steps: usize,
    /// Smallest accepted step, relative to the integration span.
    pub h_min: f64,
}

impl Default for OdeOptions {
    fn default() -> Self {
        OdeOptions {
            rel_tol: 1e-12,
            abs_tol: 1e-12,
            max_steps: 5_000_000,
            h_min: 1e-14,
        }
    }
}

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
// fifth-order weights are the last row of A; E = b₅ − b₄
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

/// Adaptive integrator state for dy/dt = f(t, y).
pub struct DormandPrince<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    rhs: F,
    opts: OdeOptions,
    h: f64,
    steps: usize,
    k: [Vec<f64>; 7],
    tmp: Vec<f64>,
}

impl<F> DormandPrince<F>
where
    F: FnMut(f64, &[f64], &mut [f64]),
{
    pub fn new(dim: usize, rhs: F, opts: OdeOptions) -> Self {
        DormandPrince {
            rhs,
            opts,
            h: 0.0,
            steps: 0,
            k: std::array::from_fn(|_| vec![0.0; dim]),
            tmp: vec![0.0; dim],
        }
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    /// Advances `y` from `t0` to `t1` in place.
    pub fn integrate(&mut self, t0: f64, t1: f64, y: &mut [f64]) -> Result<(), OdeError> {
        if t1 <= t0 {
            return Ok(());
        }
        let span = t1 - t0;
        if self.h <= 0.0 {
            self.h = span * 1e-3;
        }
        let mut t = t0;
        let n = y.len();
        let mut y_new = vec![0.0; n];
        (self.rhs)(t, y, &mut self.k[0]);

        while t < t1 {
            if self.steps >= self.opts.max_steps {
                return Err(OdeError::TooManySteps(self.opts.max_steps));
            }
            let last = t + self.h >= t1;
            let h = if last { t1 - t } else { self.h };
            if h < self.opts.h_min * span && !last {
                return Err(OdeError::StepUnderflow { t, h });
            }

            for s in 1..7 {
                for i in 0..n {
                    let mut acc = 0.0;
                    for (j, kj) in self.k.iter().enumerate().take(s) {
                        acc += A[s][j] * kj[i];
                    }
                    self.tmp[i] = y[i] + h * acc;
                }
                let (_, tail) = self.k.split_at_mut(s);
                (self.rhs)(t + C[s] * h, &self.tmp, &mut tail[0]);
            }
            // stage 7 was evaluated at the fifth-order solution
            y_new.copy_from_slice(&self.tmp);

            let mut err = 0.0f64;
            for i in 0..n {
                let mut e = 0.0;
                for (j, kj) in self.k.iter().enumerate() {
                    e += E[j] * kj[i];
                }
                let scale = self.opts.abs_tol + self.opts.rel_tol * y[i].abs().max(y_new[i].abs());
                let r = h * e / scale;
                err += r * r;
            }
            let err = (err / n as f64).sqrt();
            if !err.is_finite() {
                return Err(OdeError::NonFinite(t));
            }
            self.steps += 1;

            if err <= 1.0 {
                t = if last { t1 } else { t + h };
                y.copy_from_slice(&y_new);
                let (first, rest) = self.k.split_at_mut(1);
                first[0].copy_from_slice(&rest[5]);
                let factor = if err == 0.0 {
                    5.0
                } else {
                    (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
                };
                if !last {
                    self.h = h * factor;
                }
            } else {
                let factor = (0.9 * err.powf(-0.2)).clamp(0.1, 1.0);
                self.h = h * factor;
                if self.h < self.opts.h_min * span {
                    return Err(OdeError::StepUnderflow { t, h: self.h });
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_decay() {
        let mut y = [1.0];
        let mut ode = DormandPrince::new(
            1,
            |_, y: &[f64], dy: &mut [f64]| dy[0] = -y[0],
            OdeOptions::default(),
        );
        ode.integrate(0.0, 5.0, &mut y).unwrap();
        assert!((y[0] - (-5.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn harmonic_oscillator_in_segments() {
        let mut y = [1.0, 0.0];
        let mut ode = DormandPrince::new(
            2,
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = y[1];
                dy[1] = -y[0];
            },
            OdeOptions::default(),
        );
        let mut t = 0.0;
        for i in 1..=20 {
            let t1 = i as f64 * 0.5;
            ode.integrate(t, t1, &mut y).unwrap();
            t = t1;
        }
        assert!((y[0] - 10f64.cos()).abs() < 1e-10);
        assert!((y[1] + 10f64.sin()).abs() < 1e-10);
    }

    #[test]
    fn step_budget_reported() {
        let mut y = [1.0, 0.0];
        let opts = OdeOptions {
            max_steps: 10,
            ..Default::default()
        };
        let mut ode = DormandPrince::new(
            2,
            |_, y: &[f64], dy: &mut [f64]| {
                dy[0] = 100.0 * y[1];
                dy[1] = -100.0 * y[0];
            },
            opts,
        );
        assert_eq!(
            ode.integrate(0.0, 100.0, &mut y),
            Err(OdeError::TooManySteps(10))
        );
    }
}
