//! Planar constant-curvature segment kinematics.
//!
//! A segment of arc length `l` bent by angle `theta` maps frame i-1 to
//! frame i through
//!
//! ```text
//! T = | cos(theta)  -sin(theta)  l*sin(theta)/theta     |
//!     | sin(theta)   cos(theta)  l*(1-cos(theta))/theta |
//!     | 0            0           1                      |
//! ```
//!
//! The quotients are evaluated by Taylor series below [`SERIES_EPSILON`] to
//! remove the 0/0 at zero curvature. Each segment also admits a 4-element
//! augmented configuration `mu = [theta/2, d, d, theta/2]` with
//! `d = l*sin(theta/2)/theta`, the joint coordinates of an equivalent
//! revolute–prismatic–prismatic–revolute rigid chain (see [`rppr`]). The
//! mapping Jacobian `J_mu = d mu / d theta` and its time derivative feed the
//! dynamic model.

use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, Vector2};

use crate::error::{Error, Result};

/// Bending angle below which the singular quotients switch to their series.
pub const SERIES_EPSILON: f64 = 1e-4;

/// Default per-segment bending-angle validation bound: 50 degrees.
pub const THETA_MAX: f64 = 50.0 * std::f64::consts::PI / 180.0;

/// Arc length and ordinal of one constant-curvature segment.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SegmentGeometry {
    /// Arc length (m).
    pub length: f64,
    /// Segment ordinal, 1-based.
    pub index: usize,
}

impl SegmentGeometry {
    pub fn new(length: f64, index: usize) -> Result<Self> {
        if !(length.is_finite() && length > 0.0) {
            return Err(Error::invalid(format!(
                "segment {index}: length must be finite and > 0, got {length}"
            )));
        }
        Ok(SegmentGeometry { length, index })
    }

    /// `n` segments of equal arc length.
    pub fn uniform(n: usize, length: f64) -> Result<Vec<Self>> {
        if n == 0 {
            return Err(Error::invalid("segment count must be >= 1"));
        }
        (1..=n).map(|i| SegmentGeometry::new(length, i)).collect()
    }
}

/// Generalized coordinates of the wrist: per-segment bending angles and rates.
#[derive(Debug, Clone, PartialEq)]
pub struct PccState {
    theta: DVector<f64>,
    theta_dot: DVector<f64>,
}

impl PccState {
    pub fn new(theta: DVector<f64>, theta_dot: DVector<f64>) -> Result<Self> {
        if theta.len() != theta_dot.len() {
            return Err(Error::LengthMismatch {
                context: "theta vs theta_dot",
                left: theta.len(),
                right: theta_dot.len(),
            });
        }
        if theta.len() == 0 {
            return Err(Error::invalid("state must have at least one segment"));
        }
        if theta.iter().chain(theta_dot.iter()).any(|v| !v.is_finite()) {
            return Err(Error::invalid("state entries must be finite"));
        }
        Ok(PccState { theta, theta_dot })
    }

    pub fn at_rest(theta: DVector<f64>) -> Result<Self> {
        let n = theta.len();
        PccState::new(theta, DVector::zeros(n))
    }

    pub fn n(&self) -> usize {
        self.theta.len()
    }

    pub fn theta(&self) -> &DVector<f64> {
        &self.theta
    }

    pub fn theta_dot(&self) -> &DVector<f64> {
        &self.theta_dot
    }

    /// Indices of segments bent past `theta_max`. Exceeding the range is a
    /// warning condition, not an error: the controller may transiently
    /// overshoot.
    pub fn out_of_range(&self, theta_max: f64) -> Vec<usize> {
        self.theta
            .iter()
            .enumerate()
            .filter(|(_, t)| t.abs() > theta_max)
            .map(|(i, _)| i)
            .collect()
    }
}

/// 2D homogeneous transform: 2x2 rotation block, 2x1 translation, row [0 0 1].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Transform2D {
    matrix: Matrix3<f64>,
}

impl Transform2D {
    pub fn identity() -> Self {
        Transform2D {
            matrix: Matrix3::identity(),
        }
    }

    pub fn from_parts(rotation: Matrix2<f64>, translation: Vector2<f64>) -> Self {
        let mut m = Matrix3::identity();
        m.fixed_view_mut::<2, 2>(0, 0).copy_from(&rotation);
        m.fixed_view_mut::<2, 1>(0, 2).copy_from(&translation);
        Transform2D { matrix: m }
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.matrix
    }

    pub fn rotation(&self) -> Matrix2<f64> {
        self.matrix.fixed_view::<2, 2>(0, 0).into_owned()
    }

    pub fn translation(&self) -> Vector2<f64> {
        self.matrix.fixed_view::<2, 1>(0, 2).into_owned()
    }

    /// Rotation angle recovered from the rotation block.
    pub fn angle(&self) -> f64 {
        self.matrix[(1, 0)].atan2(self.matrix[(0, 0)])
    }

    pub fn compose(&self, other: &Transform2D) -> Transform2D {
        Transform2D {
            matrix: self.matrix * other.matrix,
        }
    }
}

impl std::ops::Mul for Transform2D {
    type Output = Transform2D;
    fn mul(self, rhs: Transform2D) -> Transform2D {
        self.compose(&rhs)
    }
}

/// Augmented configuration of the whole wrist: `mu` stacked per segment plus
/// the mapping Jacobian and its time derivative.
///
/// Per segment, entries 1 and 4 of `mu` are equal (the two half-angle
/// revolute joints) and entries 2 and 3 are equal (the two chord-half
/// prismatic joints), so `j_mu` is block diagonal with 4x1 blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct AugmentedConfiguration {
    pub mu: DVector<f64>,
    pub j_mu: DMatrix<f64>,
    pub j_mu_dot: DMatrix<f64>,
}

// ---------------------------------------------------------------------------
// Series-guarded scalar kernels
// ---------------------------------------------------------------------------

/// sin(theta)/theta.
pub(crate) fn sinc(theta: f64) -> f64 {
    if theta.abs() < SERIES_EPSILON {
        let t2 = theta * theta;
        1.0 - t2 / 6.0 + t2 * t2 / 120.0
    } else {
        theta.sin() / theta
    }
}

/// (1 - cos(theta))/theta.
pub(crate) fn versine_ratio(theta: f64) -> f64 {
    if theta.abs() < SERIES_EPSILON {
        let t2 = theta * theta;
        theta / 2.0 - theta * t2 / 24.0
    } else {
        (1.0 - theta.cos()) / theta
    }
}

/// f(theta) = sin(theta/2)/theta, the chord-half length per unit arc length.
pub(crate) fn half_sine_ratio(theta: f64) -> f64 {
    if theta.abs() < SERIES_EPSILON {
        let t2 = theta * theta;
        0.5 - t2 / 48.0 + t2 * t2 / 3840.0
    } else {
        (0.5 * theta).sin() / theta
    }
}

/// f'(theta).
pub(crate) fn half_sine_ratio_d1(theta: f64) -> f64 {
    if theta.abs() < SERIES_EPSILON {
        let t2 = theta * theta;
        -theta / 24.0 + theta * t2 / 960.0
    } else {
        let h = 0.5 * theta;
        (0.5 * theta * h.cos() - h.sin()) / (theta * theta)
    }
}

/// f''(theta).
pub(crate) fn half_sine_ratio_d2(theta: f64) -> f64 {
    if theta.abs() < SERIES_EPSILON {
        let t2 = theta * theta;
        -1.0 / 24.0 + t2 / 320.0
    } else {
        let h = 0.5 * theta;
        let t2 = theta * theta;
        (-(t2 / 4.0) * h.sin() - theta * h.cos() + 2.0 * h.sin()) / (t2 * theta)
    }
}

// ---------------------------------------------------------------------------
// Operations
// ---------------------------------------------------------------------------

/// Transform across one constant-curvature segment.
///
/// Rotation by `theta` with translation
/// `(l*sin(theta)/theta, l*(1-cos(theta))/theta)`; the straight configuration
/// translates by `(l, 0)`.
pub fn segment_transform(theta: f64, length: f64) -> Result<Transform2D> {
    if !theta.is_finite() {
        return Err(Error::invalid(format!("bending angle must be finite, got {theta}")));
    }
    if !(length.is_finite() && length > 0.0) {
        return Err(Error::invalid(format!(
            "segment length must be finite and > 0, got {length}"
        )));
    }
    let (s, c) = theta.sin_cos();
    let rotation = Matrix2::new(c, -s, s, c);
    let translation = Vector2::new(length * sinc(theta), length * versine_ratio(theta));
    Ok(Transform2D::from_parts(rotation, translation))
}

fn check_lengths(state: &PccState, geometry: &[SegmentGeometry]) -> Result<()> {
    if state.n() != geometry.len() {
        return Err(Error::LengthMismatch {
            context: "state vs geometry",
            left: state.n(),
            right: geometry.len(),
        });
    }
    Ok(())
}

/// Cumulative frames `0T1, 0T2, ..., 0Tn`; the tip is the translation of the
/// last entry.
pub fn forward_kinematics(
    state: &PccState,
    geometry: &[SegmentGeometry],
) -> Result<Vec<Transform2D>> {
    check_lengths(state, geometry)?;
    let mut frames = Vec::with_capacity(geometry.len());
    let mut cumulative = Transform2D::identity();
    for (theta, seg) in state.theta().iter().zip(geometry) {
        cumulative = cumulative.compose(&segment_transform(*theta, seg.length)?);
        frames.push(cumulative);
    }
    Ok(frames)
}

/// Tip (last disc) position in the base frame.
pub fn tip_position(state: &PccState, geometry: &[SegmentGeometry]) -> Result<Vector2<f64>> {
    let frames = forward_kinematics(state, geometry)?;
    Ok(frames.last().expect("at least one segment").translation())
}

/// The stacked 4-element augmented configuration
/// `[theta/2, l*sin(theta/2)/theta, l*sin(theta/2)/theta, theta/2]` per segment.
pub fn augmented_map(state: &PccState, geometry: &[SegmentGeometry]) -> Result<DVector<f64>> {
    check_lengths(state, geometry)?;
    let n = state.n();
    let mut mu = DVector::zeros(4 * n);
    for (i, (theta, seg)) in state.theta().iter().zip(geometry).enumerate() {
        let d = seg.length * half_sine_ratio(*theta);
        mu[4 * i] = 0.5 * theta;
        mu[4 * i + 1] = d;
        mu[4 * i + 2] = d;
        mu[4 * i + 3] = 0.5 * theta;
    }
    Ok(mu)
}

/// Mapping Jacobian `d mu / d theta`, block diagonal with 4x1 blocks
/// `[1/2, l f'(theta), l f'(theta), 1/2]`.
pub fn jacobian_mu(state: &PccState, geometry: &[SegmentGeometry]) -> Result<DMatrix<f64>> {
    check_lengths(state, geometry)?;
    let n = state.n();
    let mut j = DMatrix::zeros(4 * n, n);
    for (i, (theta, seg)) in state.theta().iter().zip(geometry).enumerate() {
        let dd = seg.length * half_sine_ratio_d1(*theta);
        j[(4 * i, i)] = 0.5;
        j[(4 * i + 1, i)] = dd;
        j[(4 * i + 2, i)] = dd;
        j[(4 * i + 3, i)] = 0.5;
    }
    Ok(j)
}

/// Time derivative of the mapping Jacobian,
/// `(d J_mu / d theta) * theta_dot`, assembled analytically. Linear in the
/// rates; zero at rest.
pub fn jacobian_mu_dot(state: &PccState, geometry: &[SegmentGeometry]) -> Result<DMatrix<f64>> {
    check_lengths(state, geometry)?;
    let n = state.n();
    let mut j = DMatrix::zeros(4 * n, n);
    for i in 0..n {
        let theta = state.theta()[i];
        let rate = state.theta_dot()[i];
        let ddd = geometry[i].length * half_sine_ratio_d2(theta) * rate;
        j[(4 * i + 1, i)] = ddd;
        j[(4 * i + 2, i)] = ddd;
    }
    Ok(j)
}

/// Convenience bundle of `mu`, `J_mu`, and `J_mu_dot` for one state.
pub fn augmented_configuration(
    state: &PccState,
    geometry: &[SegmentGeometry],
) -> Result<AugmentedConfiguration> {
    Ok(AugmentedConfiguration {
        mu: augmented_map(state, geometry)?,
        j_mu: jacobian_mu(state, geometry)?,
        j_mu_dot: jacobian_mu_dot(state, geometry)?,
    })
}

pub mod rppr {
    //! The equivalent rigid chain of one segment: joints
    //! revolute(theta/2) – prismatic(d) – prismatic(d) – revolute(theta/2)
    //! with link twists (pi/2, 0, -pi/2, 0).
    //!
    //! The raw chain expresses the prismatic axis through an out-of-plane
    //! twist, which leaves its end frame rotated -90 degrees about z relative
    //! to the planar segment transform; a fixed Rz(+pi/2) base and Rz(-pi/2)
    //! tool rotation restore the planar frames. The correction telescopes, so
    //! chaining segments needs it only once at each end.

    use super::*;
    use nalgebra::Matrix4;

    /// Classic joint transform: Rz(theta) * Tz(d) * Tx(a) * Rx(alpha).
    pub fn joint_transform(theta: f64, d: f64, a: f64, alpha: f64) -> Matrix4<f64> {
        let (st, ct) = theta.sin_cos();
        let (sa, ca) = alpha.sin_cos();
        Matrix4::new(
            ct, -st * ca, st * sa, a * ct,
            st, ct * ca, -ct * sa, a * st,
            0.0, sa, ca, d,
            0.0, 0.0, 0.0, 1.0,
        )
    }

    fn rot_z(angle: f64) -> Matrix4<f64> {
        joint_transform(angle, 0.0, 0.0, 0.0)
    }

    /// End frame of one segment's four-joint chain evaluated at the
    /// augmented coordinates for (`theta`, `length`), planar frames.
    pub fn segment_chain(theta: f64, length: f64) -> Matrix4<f64> {
        let half = 0.5 * theta;
        let d = length * half_sine_ratio(theta);
        let chain = joint_transform(half, 0.0, 0.0, std::f64::consts::FRAC_PI_2)
            * joint_transform(0.0, d, 0.0, 0.0)
            * joint_transform(0.0, d, 0.0, -std::f64::consts::FRAC_PI_2)
            * joint_transform(half, 0.0, 0.0, 0.0);
        rot_z(std::f64::consts::FRAC_PI_2) * chain * rot_z(-std::f64::consts::FRAC_PI_2)
    }

    /// Project an in-plane 4x4 frame onto the 2D homogeneous form.
    pub fn to_planar(m: &Matrix4<f64>) -> Transform2D {
        let rotation = Matrix2::new(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
        let translation = Vector2::new(m[(0, 3)], m[(1, 3)]);
        Transform2D::from_parts(rotation, translation)
    }
}
