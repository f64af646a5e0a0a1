//! Sliding-mode control law and the PID baseline.
//!
//! The sliding variable is `sigma = P1 e + P2 theta_dot` with
//! `e = theta_o - theta_des` (output minus desired; the leading minus of the
//! control law absorbs the sign). Writing the state dynamics as
//! `x_dot = f + g u` with drift
//!
//! ```text
//! f = [theta_dot; M^-1 (J'F - (C_model + D) theta_dot - K theta - G)]
//! g = [0; M^-1]
//! ```
//!
//! the Lie derivatives are `L_f sigma = P1 theta_dot + P2 a_drift` and
//! `L_g sigma = P2 M^-1`, giving the equivalent component
//! `U_eq = L_g^-1 L_f` and the smoothed switching component
//! `U_sw = L_g^-1 P3 tanh(sigma)`; the commanded torque is
//! `tau = -(U_eq + U_sw)`, which drives `sigma_dot = -P3 tanh(sigma)` on the
//! matched model.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::dynamics::DynamicsTerms;
use crate::error::{Error, Result};

/// Switching-term shape: `tanh` smoothing by default, raw `sgn` available
/// for chattering comparisons.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SwitchingShape {
    #[default]
    Tanh,
    Sign,
}

impl SwitchingShape {
    fn apply(&self, sigma: f64) -> f64 {
        match self {
            SwitchingShape::Tanh => sigma.tanh(),
            SwitchingShape::Sign => {
                if sigma > 0.0 {
                    1.0
                } else if sigma < 0.0 {
                    -1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// Sliding-mode gains: error weight, rate weight, switching amplitude.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SmcGains {
    /// Error weight in the sliding variable.
    pub p1: f64,
    /// Rate weight in the sliding variable; must be nonzero (it scales the
    /// input gain `L_g sigma`).
    pub p2: f64,
    /// Switching amplitude.
    pub p3: f64,
    #[serde(default)]
    pub switching: SwitchingShape,
}

impl SmcGains {
    pub fn new(p1: f64, p2: f64, p3: f64) -> Result<Self> {
        let gains = SmcGains {
            p1,
            p2,
            p3,
            switching: SwitchingShape::Tanh,
        };
        gains.validate()?;
        Ok(gains)
    }

    pub fn validate(&self) -> Result<()> {
        if ![self.p1, self.p2, self.p3].iter().all(|g| g.is_finite()) {
            return Err(Error::invalid("SMC gains must be finite"));
        }
        if self.p2 == 0.0 {
            return Err(Error::invalid("P2 must be nonzero (L_g sigma would vanish)"));
        }
        if self.p3 < 0.0 {
            return Err(Error::invalid("P3 must be >= 0"));
        }
        Ok(())
    }
}

/// PID gains of the baseline controller.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
}

impl PidGains {
    pub fn validate(&self) -> Result<()> {
        if ![self.kp, self.ki, self.kd].iter().all(|g| g.is_finite()) {
            return Err(Error::invalid("PID gains must be finite"));
        }
        Ok(())
    }
}

/// Torque command with the sliding variable and component breakdown for
/// logging; `tau = -(u_eq + u_sw)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlCommand {
    pub tau: DVector<f64>,
    pub sigma: DVector<f64>,
    pub u_eq: DVector<f64>,
    pub u_sw: DVector<f64>,
}

/// Tracking error `e = theta_o - theta_des`, output minus desired.
pub fn tracking_error(theta_o: &DVector<f64>, theta_des: &DVector<f64>) -> Result<DVector<f64>> {
    if theta_o.len() != theta_des.len() {
        return Err(Error::LengthMismatch {
            context: "theta_o vs theta_des",
            left: theta_o.len(),
            right: theta_des.len(),
        });
    }
    Ok(theta_o - theta_des)
}

/// Sliding variable `sigma = P1 e + P2 theta_dot`, per channel.
pub fn sliding_surface(
    e: &DVector<f64>,
    theta_dot: &DVector<f64>,
    gains: &SmcGains,
) -> Result<DVector<f64>> {
    gains.validate()?;
    if e.len() != theta_dot.len() {
        return Err(Error::LengthMismatch {
            context: "e vs theta_dot",
            left: e.len(),
            right: theta_dot.len(),
        });
    }
    Ok(e * gains.p1 + theta_dot * gains.p2)
}

/// Drift acceleration of the controller's internal model:
/// `M^-1 (J'F - (C_model + D) theta_dot - K theta - G)`.
fn drift_acceleration(
    terms: &DynamicsTerms,
    f_ext: Vector2<f64>,
    m_inv: &DMatrix<f64>,
) -> DVector<f64> {
    let rhs = terms.j_task.transpose() * f_ext
        - (&terms.c_model + &terms.d_mat) * &terms.q_dot
        - &terms.k_mat * &terms.q
        - &terms.g_vec;
    m_inv * rhs
}

fn inverted_inertia(terms: &DynamicsTerms) -> Result<DMatrix<f64>> {
    terms.m.clone().try_inverse().ok_or(Error::SingularDynamics {
        theta: terms.q.iter().cloned().collect(),
        condition: f64::INFINITY,
    })
}

/// Sliding-mode torque for the state captured in `terms`.
///
/// `f_ext_estimate` is the tip force known to the controller (zero unless
/// the scenario declares it); unknown disturbances act on the plant only.
pub fn smc_control(
    terms: &DynamicsTerms,
    theta_des: &DVector<f64>,
    f_ext_estimate: Vector2<f64>,
    gains: &SmcGains,
) -> Result<ControlCommand> {
    gains.validate()?;
    let e = tracking_error(&terms.q, theta_des)?;
    let sigma = sliding_surface(&e, &terms.q_dot, gains)?;

    let m_inv = inverted_inertia(terms)?;
    for (channel, diag) in m_inv.diagonal().iter().enumerate() {
        let l_g = gains.p2 * diag;
        if l_g.abs() < 1e-12 {
            return Err(Error::ControlSingularity { channel, l_g });
        }
    }

    let drift = drift_acceleration(terms, f_ext_estimate, &m_inv);
    let l_f = &terms.q_dot * gains.p1 + &drift * gains.p2;

    // L_g = P2 M^-1, so L_g^-1 x = M x / P2: the matrix-solve form.
    let u_eq = &terms.m * &l_f / gains.p2;
    let switched = sigma.map(|s| gains.p3 * gains.switching.apply(s));
    let u_sw = &terms.m * &switched / gains.p2;
    let tau = -(&u_eq + &u_sw);

    Ok(ControlCommand {
        tau,
        sigma,
        u_eq,
        u_sw,
    })
}

/// Equivalent component by per-channel division,
/// `U_eq_i = (L_f sigma)_i / (P2 (M^-1)_ii)`. In the decoupled single-plane
/// case this agrees with the matrix-solve form used by [`smc_control`].
pub fn equivalent_control_per_channel(
    terms: &DynamicsTerms,
    f_ext_estimate: Vector2<f64>,
    gains: &SmcGains,
) -> Result<DVector<f64>> {
    gains.validate()?;
    let m_inv = inverted_inertia(terms)?;
    let drift = drift_acceleration(terms, f_ext_estimate, &m_inv);
    let l_f = &terms.q_dot * gains.p1 + &drift * gains.p2;
    let mut u = DVector::zeros(l_f.len());
    for channel in 0..l_f.len() {
        let l_g = gains.p2 * m_inv[(channel, channel)];
        if l_g.abs() < 1e-12 {
            return Err(Error::ControlSingularity { channel, l_g });
        }
        u[channel] = l_f[channel] / l_g;
    }
    Ok(u)
}

/// Integral state of one PID episode; trapezoidal accumulation, resettable.
#[derive(Debug, Clone, Default)]
pub struct PidIntegrator {
    integral: DVector<f64>,
    previous: Option<DVector<f64>>,
}

impl PidIntegrator {
    pub fn new(n: usize) -> Self {
        PidIntegrator {
            integral: DVector::zeros(n),
            previous: None,
        }
    }

    /// Accumulate `integral += (e + e_prev)/2 * dt` and return the updated
    /// integral. The first sample contributes nothing (no left endpoint yet).
    pub fn advance(&mut self, e: &DVector<f64>, dt: f64) -> &DVector<f64> {
        if let Some(prev) = &self.previous {
            self.integral += (e + prev) * (0.5 * dt);
        }
        self.previous = Some(e.clone());
        &self.integral
    }

    pub fn integral(&self) -> &DVector<f64> {
        &self.integral
    }

    pub fn reset(&mut self) {
        self.integral.fill(0.0);
        self.previous = None;
    }
}

/// PID-corrected angle command:
/// `theta_cmd = theta_ff - (Kp e + Ki int(e) + Kd e_dot)`.
///
/// The correction is subtracted because `e = theta_o - theta_des`; with zero
/// error the feedforward channel passes through unchanged.
pub fn pid_control(
    theta_ff: &DVector<f64>,
    e: &DVector<f64>,
    e_integral: &DVector<f64>,
    e_dot: &DVector<f64>,
    gains: &PidGains,
) -> DVector<f64> {
    theta_ff - (e * gains.kp + e_integral * gains.ki + e_dot * gains.kd)
}
