//! Variational dynamics of the 1-D Gaussian family
//! `ψ(x) ∝ exp(−(a + i b) x²/2)` under the oscillator, parametrized by
//! `θ = (log a, b)`.
//!
//! The projected von Neumann equation keeps the ground state `(0, 0)`
//! fixed, while the projected Schrödinger equation moves it; imaginary
//! time is the natural-gradient flow of `𝓛 = ½⟨H⟩` under the metric
//! `g = diag(1/8, 1/(8a²))`.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use num_traits::Float;

/// One point of a trajectory.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TdvpState {
    pub t: f64,
    pub log_a: f64,
    pub b: f64,
}

impl TdvpState {
    pub fn new(t: f64, log_a: f64, b: f64) -> Self {
        Self { t, log_a, b }
    }

    pub fn theta(&self) -> [f64; 2] {
        [self.log_a, self.b]
    }

    /// Euclidean distance of `θ` from the origin.
    pub fn departure(&self) -> f64 {
        self.log_a.hypot(self.b)
    }

    pub fn energy(&self) -> f64 {
        family_energy(self.log_a, self.b)
    }
}

/// `⟨H⟩ = (1 + a² + b²)/(4a)` for the oscillator.
pub fn family_energy(log_a: f64, b: f64) -> f64 {
    let a = log_a.exp();
    (1.0 + a * a + b * b) / (4.0 * a)
}

/// Right-hand side of the variational von Neumann equation.
pub fn vn_rhs(theta: [f64; 2]) -> [f64; 2] {
    let [log_a, b] = theta;
    let a = log_a.exp();
    [2.0 * b, 1.0 - a * a + b * b]
}

/// Right-hand side of the variational Schrödinger equation.
pub fn tdse_rhs(theta: [f64; 2]) -> [f64; 2] {
    let [log_a, b] = theta;
    let a = log_a.exp();
    [2.0 * b, 1.0 - a * a / 3.0 + b * b]
}

/// Natural-gradient descent direction `−g⁻¹ ∇𝓛` of `𝓛 = ½⟨H⟩`.
pub fn imaginary_time_rhs(theta: [f64; 2]) -> [f64; 2] {
    let [log_a, b] = theta;
    let a = log_a.exp();
    [(1.0 + b * b - a * a) / a, -2.0 * a * b]
}

/// States at every step. `blow_up` holds the time of the first
/// non-finite state, which is not stored.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub states: Vec<TdvpState>,
    pub blow_up: Option<f64>,
}

impl Trajectory {
    pub fn last(&self) -> &TdvpState {
        self.states.last().expect("trajectory holds the initial state")
    }

    pub fn energies(&self) -> Vec<f64> {
        self.states.iter().map(TdvpState::energy).collect()
    }

    /// Largest distance of `θ` from the origin along the trajectory.
    pub fn max_departure(&self) -> f64 {
        self.states.iter().map(TdvpState::departure).fold(0.0, f64::max)
    }

    /// Errors with [`Error::NonFinite`] if the integration blew up.
    pub fn into_result(self) -> Result<Self> {
        match self.blow_up {
            Some(_) => Err(Error::NonFinite("trajectory")),
            None => Ok(self),
        }
    }
}

fn rk4_step(rhs: impl Fn([f64; 2]) -> [f64; 2], y: [f64; 2], h: f64) -> [f64; 2] {
    let shift = |y: [f64; 2], k: [f64; 2], c: f64| [y[0] + c * k[0], y[1] + c * k[1]];
    let k1 = rhs(y);
    let k2 = rhs(shift(y, k1, 0.5 * h));
    let k3 = rhs(shift(y, k2, 0.5 * h));
    let k4 = rhs(shift(y, k3, h));
    [
        y[0] + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        y[1] + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
    ]
}

/// Classic fourth-order Runge–Kutta from `t = 0` to `t_end`; the last
/// step is shortened to land on `t_end`.
pub fn integrate(
    rhs: impl Fn([f64; 2]) -> [f64; 2],
    theta0: [f64; 2],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory> {
    if !(dt > 0.0) || !dt.is_finite() {
        return Err(Error::InvalidConfig(alloc::format!("dt must be positive, got {dt}")));
    }
    if !(t_end >= 0.0) || !t_end.is_finite() {
        return Err(Error::InvalidConfig(alloc::format!("t_end must be nonnegative, got {t_end}")));
    }
    if !theta0.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("initial state"));
    }
    let steps = (t_end / dt - 1e-9).ceil().max(0.0) as usize;
    let mut states = Vec::with_capacity(steps + 1);
    states.push(TdvpState::new(0.0, theta0[0], theta0[1]));
    let mut y = theta0;
    for k in 0..steps {
        let t0 = k as f64 * dt;
        let t1 = (t0 + dt).min(t_end);
        y = rk4_step(&rhs, y, t1 - t0);
        if !y.iter().all(|v| v.is_finite()) {
            return Ok(Trajectory {
                states,
                blow_up: Some(t1),
            });
        }
        states.push(TdvpState::new(t1, y[0], y[1]));
    }
    Ok(Trajectory {
        states,
        blow_up: None,
    })
}

/// Imaginary-time evolution; energies are available through
/// [`Trajectory::energies`].
pub fn imaginary_time_flow(theta0: [f64; 2], t_end: f64, dt: f64) -> Result<Trajectory> {
    integrate(imaginary_time_rhs, theta0, t_end, dt)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: [f64; 2], b: [f64; 2]) -> bool {
        (a[0] - b[0]).abs() < 1e-14 && (a[1] - b[1]).abs() < 1e-14
    }

    #[test]
    fn vn_values() {
        assert!(close(vn_rhs([0.0, 0.0]), [0.0, 0.0]));
        assert!(close(vn_rhs([2f64.ln(), 0.0]), [0.0, -3.0]));
        assert!(close(vn_rhs([0.0, 1.0]), [2.0, 1.0]));
    }

    #[test]
    fn tdse_values() {
        assert!(close(tdse_rhs([0.0, 0.0]), [0.0, 2.0 / 3.0]));
        assert!(close(tdse_rhs([3f64.sqrt().ln(), 0.0]), [0.0, 0.0]));
        assert!(close(tdse_rhs([0.0, 1.0]), [2.0, 5.0 / 3.0]));
    }

    #[test]
    fn vn_keeps_ground_state() {
        let tr = integrate(vn_rhs, [0.0, 0.0], 5.0, 1e-3).unwrap();
        assert!(tr.max_departure() < 1e-12);
        assert_eq!(tr.last().t, 5.0);
    }

    #[test]
    fn tdse_leaves_ground_state() {
        let tr = integrate(tdse_rhs, [0.0, 0.0], 0.1, 1e-3).unwrap();
        assert!((tr.last().b - 2.0 / 3.0 * 0.1).abs() < 1e-3);
        let tr = integrate(tdse_rhs, [0.0, 0.0], 1.0, 1e-3).unwrap();
        assert!(tr.states.iter().any(|s| s.b.abs() > 0.05));
    }

    #[test]
    fn rk4_order() {
        let reference = integrate(vn_rhs, [2f64.ln(), 0.0], 1.0, 1e-4).unwrap();
        let err = |dt: f64| {
            let s = *integrate(vn_rhs, [2f64.ln(), 0.0], 1.0, dt).unwrap().last();
            let r = reference.last();
            (s.log_a - r.log_a).hypot(s.b - r.b)
        };
        let ratio = err(0.02) / err(0.01);
        assert!((ratio - 16.0).abs() < 1.5, "{ratio}");
    }

    #[test]
    fn vn_conserves_energy() {
        let tr = integrate(vn_rhs, [0.4, -0.3], 5.0, 1e-3).unwrap();
        let e0 = tr.states[0].energy();
        for s in &tr.states {
            assert!((s.energy() - e0).abs() < 1e-6);
        }
    }

    #[test]
    fn imaginary_time_converges_monotonically() {
        let tr = imaginary_time_flow([2f64.ln(), 0.0], 10.0, 1e-3).unwrap();
        assert!(tr.last().departure() < 1e-6);
        let e = tr.energies();
        for w in e.windows(2) {
            if w[0] - 0.5 > 1e-10 {
                assert!(w[1] < w[0]);
            }
        }
        let still = imaginary_time_flow([0.0, 0.0], 1.0, 1e-2).unwrap();
        assert!(still.energies().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn blow_up_is_flagged() {
        let tr = integrate(|y| [y[0] * y[0], 0.0], [1.0, 0.0], 2.0, 1e-2).unwrap();
        assert!(tr.blow_up.is_some());
        assert!(tr.states.len() > 1);
        assert!(tr.into_result().is_err());
    }

    #[test]
    fn rejects_bad_step() {
        assert!(integrate(vn_rhs, [0.0, 0.0], 1.0, 0.0).is_err());
        assert!(integrate(vn_rhs, [0.0, 0.0], 1.0, -1.0).is_err());
    }
}
