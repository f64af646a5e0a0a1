//! Wrist dynamics: the augmented rigid-chain model and its projection onto
//! the bending coordinates.
//!
//! Each segment contributes four augmented joints (two half-angle revolutes,
//! two chord-half prismatics) and one point mass at the middle of its chord.
//! With mass Jacobians `Jp_i = d p_i / d mu` the augmented terms are
//!
//! ```text
//! M_b = sum_i W * Jp_i' Jp_i          (mass-Jacobian summation)
//! G_b = -sum_i W * Jp_i' g            (gradient of the gravity potential)
//! C_b : Christoffel symbols of M_b
//! ```
//!
//! and the mapped model over generalized coordinates `q` (with `theta = E q`,
//! `Jq = J_mu E`) is
//!
//! ```text
//! M = Jq' M_b Jq
//! C = Jq' M_b Jq_dot + Jq' (C_b + D_b) Jq      (plant, energy consistent)
//! C_model = Jq' M_b Jq_dot + Jq' D_b Jq        (controller drift model)
//! G = Jq' G_b
//! ```
//!
//! `E` is the identity in independent mode; in uniform mode it is the single
//! column `1/n`, making `q` the total tip bending angle with every segment at
//! curvature `q/n`.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{Error, Result};
use crate::kinematics::{
    augmented_map, jacobian_mu, jacobian_mu_dot, PccState, SegmentGeometry, THETA_MAX,
};

/// Condition-number bound beyond which the mapped inertia is treated as
/// singular.
pub const CONDITION_LIMIT: f64 = 1e12;

/// Relative singular-value cutoff for the tendon map pseudo-inverse.
const ACTUATION_RANK_TOL: f64 = 1e-12;

/// Moment arms of one tendon, one entry per segment it may cross (0 = does
/// not cross).
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TendonRoute {
    pub arms: Vec<f64>,
}

/// Physical and geometric parameters of the wrist.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct WristModel {
    pub geometry: Vec<SegmentGeometry>,
    /// Point mass at the middle of each segment chord (kg).
    pub chord_mass: f64,
    /// Elastic stiffness per generalized coordinate (N·m/rad), diagonal.
    pub stiffness: f64,
    /// Viscous damping per generalized coordinate (N·m·s/rad), diagonal.
    pub damping: f64,
    /// Damping acting on the augmented joint rates (N·m·s per unit rate);
    /// mapped into the Coriolis composition. Zero by default.
    pub augmented_damping: f64,
    /// In-plane gravity acceleration (m/s^2).
    pub gravity: Vector2<f64>,
    /// Tendon routing radius (m), the default moment arm magnitude.
    pub tendon_radius: f64,
    /// Tendon routes; together they define the actuation matrix.
    pub tendons: Vec<TendonRoute>,
    /// Bending-angle validation bound (rad).
    pub theta_max: f64,
}

impl Default for WristModel {
    /// Four 20 mm segments, one antagonistic tendon pair crossing all of
    /// them, whole-wrist stiffness 0.615 N·m/rad and damping 0.105 N·m·s/rad.
    /// The 5e-5 kg chord mass keeps the equivalent-control velocity term of
    /// the bundled sliding-mode gains inside the zero-order-hold stability
    /// margin at the default 1 kHz loop while the damping pole stays
    /// resolvable at microsecond integration steps.
    fn default() -> Self {
        let n = 4;
        let r = 0.01;
        WristModel {
            geometry: SegmentGeometry::uniform(n, 0.02).expect("valid default geometry"),
            chord_mass: 5.0e-5,
            stiffness: 0.615,
            damping: 0.105,
            augmented_damping: 0.0,
            gravity: Vector2::new(0.0, -9.81),
            tendon_radius: r,
            tendons: antagonistic_pair(n, r),
            theta_max: THETA_MAX,
        }
    }
}

/// One tendon pair with moment arms `+r` and `-r` across all `n` segments.
pub fn antagonistic_pair(n: usize, radius: f64) -> Vec<TendonRoute> {
    vec![
        TendonRoute {
            arms: vec![radius; n],
        },
        TendonRoute {
            arms: vec![-radius; n],
        },
    ]
}

impl WristModel {
    pub fn n(&self) -> usize {
        self.geometry.len()
    }

    pub fn n_tendons(&self) -> usize {
        self.tendons.len()
    }

    pub fn total_length(&self) -> f64 {
        self.geometry.iter().map(|s| s.length).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.geometry.is_empty() {
            return Err(Error::invalid("model needs at least one segment"));
        }
        if !(self.chord_mass.is_finite() && self.chord_mass >= 0.0) {
            return Err(Error::invalid("chord mass must be finite and >= 0"));
        }
        for (name, v) in [
            ("stiffness", self.stiffness),
            ("damping", self.damping),
            ("augmented damping", self.augmented_damping),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!("{name} must be finite and >= 0")));
            }
        }
        for route in &self.tendons {
            if route.arms.len() != self.n() {
                return Err(Error::LengthMismatch {
                    context: "tendon route vs segments",
                    left: route.arms.len(),
                    right: self.n(),
                });
            }
        }
        Ok(())
    }

    /// Actuation matrix on the augmented side, `4n x n_a`. A tendon crossing
    /// segment i with arm `a` torques both half-angle revolute joints of that
    /// segment by `a`, which makes `J_mu' A_b` the constant per-segment
    /// moment-arm map (the revolute rows of `J_mu` are exactly 1/2).
    pub fn actuation_matrix(&self) -> DMatrix<f64> {
        let n = self.n();
        let mut a = DMatrix::zeros(4 * n, self.tendons.len());
        for (t, route) in self.tendons.iter().enumerate() {
            for (i, arm) in route.arms.iter().enumerate() {
                a[(4 * i, t)] = *arm;
                a[(4 * i + 3, t)] = *arm;
            }
        }
        a
    }
}

/// How the generalized coordinates drive the segment angles.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BendingMode {
    /// One coordinate per segment, `theta = q`.
    Independent,
    /// A single coordinate, the total tip bending angle; every segment bends
    /// `q/n` (uniform curvature).
    Uniform,
}

impl BendingMode {
    /// Coupling matrix `E` with `theta = E q`.
    pub fn coupling(&self, n: usize) -> DMatrix<f64> {
        match self {
            BendingMode::Independent => DMatrix::identity(n, n),
            BendingMode::Uniform => DMatrix::from_element(n, 1, 1.0 / n as f64),
        }
    }

    pub fn n_coords(&self, n: usize) -> usize {
        match self {
            BendingMode::Independent => n,
            BendingMode::Uniform => 1,
        }
    }
}

/// Assembled mapped matrices for one state.
#[derive(Debug, Clone, PartialEq)]
pub struct DynamicsTerms {
    /// Generalized coordinates the terms are expressed in.
    pub q: DVector<f64>,
    pub q_dot: DVector<f64>,
    /// Mapped inertia (kg·m^2), symmetric positive definite.
    pub m: DMatrix<f64>,
    /// Full Coriolis/centrifugal plus mapped augmented damping; what the
    /// simulated mechanism obeys.
    pub c: DMatrix<f64>,
    /// Inertia-transport plus mapped-damping composition only, the
    /// controller's internal drift model (drops the mapped chain-Coriolis
    /// term).
    pub c_model: DMatrix<f64>,
    /// Gravity torque (N·m).
    pub g_vec: DVector<f64>,
    /// Diagonal stiffness (N·m/rad).
    pub k_mat: DMatrix<f64>,
    /// Diagonal damping (N·m·s/rad).
    pub d_mat: DMatrix<f64>,
    /// Tip position Jacobian (2 x n_q); maps tip forces to torques by its
    /// transpose.
    pub j_task: DMatrix<f64>,
    /// Mapping Jacobian of the full segment coordinates (4n x n).
    pub j_mu: DMatrix<f64>,
    pub j_mu_dot: DMatrix<f64>,
    /// Effective tendon map `(J_mu E)' A_b`, n_q x n_a.
    pub actuation: DMatrix<f64>,
}

/// Tendon tensions realizing a commanded torque.
#[derive(Debug, Clone, PartialEq)]
pub struct TendonForces {
    /// Tensions (N), one per tendon.
    pub forces: DVector<f64>,
    /// True when any entry is negative: a tendon cannot push, so the
    /// commanded torque is not physically realizable by this routing alone.
    pub has_negative: bool,
}

// ---------------------------------------------------------------------------
// Chain geometry over the augmented coordinates
// ---------------------------------------------------------------------------

fn rot90(v: Vector2<f64>) -> Vector2<f64> {
    Vector2::new(-v.y, v.x)
}

/// Joint-frame origins, chord directions, and mass points of the equivalent
/// chain plus their time derivatives for given `(mu, mu_dot)`.
struct ChainFrames {
    /// Segment base points b_1..b_{n+1} (the last is the tip) and rates.
    bases: Vec<(Vector2<f64>, Vector2<f64>)>,
    /// Chord unit directions per segment and rates.
    chords: Vec<(Vector2<f64>, Vector2<f64>)>,
    /// Point-mass positions (end of the first prismatic link) and rates.
    masses: Vec<(Vector2<f64>, Vector2<f64>)>,
}

fn chain_frames(mu: &DVector<f64>, mu_dot: &DVector<f64>) -> ChainFrames {
    let n = mu.len() / 4;
    let mut bases = Vec::with_capacity(n + 1);
    let mut chords = Vec::with_capacity(n);
    let mut masses = Vec::with_capacity(n);

    let mut base = Vector2::zeros();
    let mut base_rate = Vector2::zeros();
    let mut angle = 0.0;
    let mut angle_rate = 0.0;
    bases.push((base, base_rate));

    for i in 0..n {
        let (m1, m2, m3, m4) = (mu[4 * i], mu[4 * i + 1], mu[4 * i + 2], mu[4 * i + 3]);
        let (r1, r2, r3, r4) = (
            mu_dot[4 * i],
            mu_dot[4 * i + 1],
            mu_dot[4 * i + 2],
            mu_dot[4 * i + 3],
        );
        let chord_angle = angle + m1;
        let chord_angle_rate = angle_rate + r1;
        let u = Vector2::new(chord_angle.cos(), chord_angle.sin());
        let u_rate = rot90(u) * chord_angle_rate;

        let mass = base + u * m2;
        let mass_rate = base_rate + u * r2 + u_rate * m2;

        base = base + u * (m2 + m3);
        base_rate = base_rate + u * (r2 + r3) + u_rate * (m2 + m3);
        angle = chord_angle + m4;
        angle_rate = chord_angle_rate + r4;

        chords.push((u, u_rate));
        masses.push((mass, mass_rate));
        bases.push((base, base_rate));
    }

    ChainFrames {
        bases,
        chords,
        masses,
    }
}

impl ChainFrames {
    /// Position Jacobian of a point attached after joint 2 of segment
    /// `owner` (a mass point), or after the whole chain (`owner == n`, the
    /// tip), as a 2 x 4n matrix.
    fn point_jacobian(&self, point: Vector2<f64>, owner: usize) -> DMatrix<f64> {
        let n = self.chords.len();
        let mut j = DMatrix::zeros(2, 4 * n);
        for seg in 0..owner.min(n) {
            let u = self.chords[seg].0;
            let lever1 = rot90(point - self.bases[seg].0);
            j.set_column(4 * seg, &lever1);
            j.set_column(4 * seg + 1, &u);
            if seg < owner {
                j.set_column(4 * seg + 2, &u);
                let lever4 = rot90(point - self.bases[seg + 1].0);
                j.set_column(4 * seg + 3, &lever4);
            }
        }
        if owner < n {
            // The owning segment's first revolute and first prismatic move
            // the mass; its second prismatic and last revolute do not.
            let u = self.chords[owner].0;
            j.set_column(4 * owner, &rot90(point - self.bases[owner].0));
            j.set_column(4 * owner + 1, &u);
        }
        j
    }

    /// Time derivative of [`point_jacobian`] for a point with rate
    /// `point_rate`; only rates enter, the levers differentiate to
    /// `rot90(p_dot - b_dot)`.
    fn point_jacobian_rate(&self, point_rate: Vector2<f64>, owner: usize) -> DMatrix<f64> {
        let n = self.chords.len();
        let mut j = DMatrix::zeros(2, 4 * n);
        for seg in 0..owner.min(n) {
            let u_rate = self.chords[seg].1;
            let lever1 = rot90(point_rate - self.bases[seg].1);
            j.set_column(4 * seg, &lever1);
            j.set_column(4 * seg + 1, &u_rate);
            if seg < owner {
                j.set_column(4 * seg + 2, &u_rate);
                let lever4 = rot90(point_rate - self.bases[seg + 1].1);
                j.set_column(4 * seg + 3, &lever4);
            }
        }
        if owner < n {
            j.set_column(4 * owner, &rot90(point_rate - self.bases[owner].1));
            j.set_column(4 * owner + 1, &self.chords[owner].1);
        }
        j
    }

    fn mass_jacobian(&self, i: usize) -> DMatrix<f64> {
        self.point_jacobian(self.masses[i].0, i)
    }

    fn mass_jacobian_rate(&self, i: usize) -> DMatrix<f64> {
        self.point_jacobian_rate(self.masses[i].1, i)
    }

    fn tip_jacobian(&self) -> DMatrix<f64> {
        let n = self.chords.len();
        self.point_jacobian(self.bases[n].0, n)
    }
}

// ---------------------------------------------------------------------------
// Augmented terms
// ---------------------------------------------------------------------------

fn mass_matrix_from_frames(frames: &ChainFrames, w: f64) -> DMatrix<f64> {
    let n = frames.chords.len();
    let mut m = DMatrix::zeros(4 * n, 4 * n);
    for i in 0..n {
        let j = frames.mass_jacobian(i);
        m += w * j.transpose() * j;
    }
    m
}

/// Partial derivatives of `M_b` along each augmented coordinate, computed
/// exactly as the directional derivative of the mass Jacobians.
fn mass_matrix_partials(mu: &DVector<f64>, w: f64) -> Vec<DMatrix<f64>> {
    let dim = mu.len();
    let n = dim / 4;
    let frames = chain_frames(mu, &DVector::zeros(dim));
    let jacobians: Vec<_> = (0..n).map(|i| frames.mass_jacobian(i)).collect();
    (0..dim)
        .map(|k| {
            let mut direction = DVector::zeros(dim);
            direction[k] = 1.0;
            let dframes = chain_frames(mu, &direction);
            let mut dm = DMatrix::zeros(dim, dim);
            for i in 0..n {
                let jd = dframes.mass_jacobian_rate(i);
                let jtjd = jacobians[i].transpose() * &jd;
                dm += w * (&jtjd.transpose() + &jtjd);
            }
            dm
        })
        .collect()
}

/// Inertia, Coriolis, and gravity terms of the augmented chain.
///
/// `M_b` comes from the point-mass Jacobian summation, `C_b` from the
/// Christoffel symbols of `M_b` (so `M_b_dot - 2 C_b` is skew symmetric), and
/// `G_b` from the gradient of the gravity potential.
pub fn augmented_terms(
    mu: &DVector<f64>,
    mu_dot: &DVector<f64>,
    model: &WristModel,
) -> Result<(DMatrix<f64>, DMatrix<f64>, DVector<f64>)> {
    model.validate()?;
    if mu.len() != 4 * model.n() || mu_dot.len() != mu.len() {
        return Err(Error::LengthMismatch {
            context: "mu vs model",
            left: mu.len(),
            right: 4 * model.n(),
        });
    }
    let dim = mu.len();
    let w = model.chord_mass;
    let frames = chain_frames(mu, mu_dot);

    let m_b = mass_matrix_from_frames(&frames, w);

    let partials = mass_matrix_partials(mu, w);
    let mut c_b = DMatrix::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            let mut acc = 0.0;
            for (k, dm) in partials.iter().enumerate() {
                acc += 0.5
                    * (dm[(i, j)] + partials[j][(i, k)] - partials[i][(j, k)])
                    * mu_dot[k];
            }
            c_b[(i, j)] = acc;
        }
    }

    let mut g_b = DVector::zeros(dim);
    for i in 0..model.n() {
        let j = frames.mass_jacobian(i);
        g_b -= w * j.transpose() * model.gravity;
    }

    Ok((m_b, c_b, g_b))
}

/// Coriolis force of the augmented chain via the mass-Jacobian rate form,
/// `sum_i W Jp_i' Jp_i_dot`. Produces the same generalized force as the
/// Christoffel matrix and the same skew-symmetry identity, at a fraction of
/// the cost; used on the simulation path.
fn coriolis_rate_form(frames: &ChainFrames, w: f64) -> DMatrix<f64> {
    let n = frames.chords.len();
    let dim = 4 * n;
    let mut c = DMatrix::zeros(dim, dim);
    for i in 0..n {
        let j = frames.mass_jacobian(i);
        let jd = frames.mass_jacobian_rate(i);
        c += w * j.transpose() * jd;
    }
    c
}

// ---------------------------------------------------------------------------
// Mapped terms
// ---------------------------------------------------------------------------

/// Mapped terms over generalized coordinates `q` with `theta = E q`.
pub fn assemble_terms(
    q: &DVector<f64>,
    q_dot: &DVector<f64>,
    model: &WristModel,
    mode: BendingMode,
) -> Result<DynamicsTerms> {
    model.validate()?;
    let n = model.n();
    let n_q = mode.n_coords(n);
    if q.len() != n_q || q_dot.len() != n_q {
        return Err(Error::LengthMismatch {
            context: "q vs bending mode",
            left: q.len(),
            right: n_q,
        });
    }
    let coupling = mode.coupling(n);
    let theta = &coupling * q;
    let theta_dot = &coupling * q_dot;
    let state = PccState::new(theta, theta_dot)?;

    let j_mu = jacobian_mu(&state, &model.geometry)?;
    let j_mu_dot = jacobian_mu_dot(&state, &model.geometry)?;
    let mu = augmented_map(&state, &model.geometry)?;
    let mu_dot = &j_mu * state.theta_dot();

    let j_q = &j_mu * &coupling;
    let j_q_dot = &j_mu_dot * &coupling;

    let frames = chain_frames(&mu, &mu_dot);
    let w = model.chord_mass;
    let m_b = mass_matrix_from_frames(&frames, w);

    let m = j_q.transpose() * &m_b * &j_q;
    let transport = j_q.transpose() * &m_b * &j_q_dot;

    let mapped_damping = if model.augmented_damping > 0.0 {
        j_q.transpose() * &j_q * model.augmented_damping
    } else {
        DMatrix::zeros(n_q, n_q)
    };

    let c_b = coriolis_rate_form(&frames, w);
    let c = &transport + j_q.transpose() * &c_b * &j_q + &mapped_damping;
    let c_model = transport + mapped_damping;

    let mut g_vec = DVector::zeros(n_q);
    for i in 0..n {
        let jp = frames.mass_jacobian(i);
        g_vec -= w * (jp * &j_q).transpose() * model.gravity;
    }

    let j_task = frames.tip_jacobian() * &j_q;
    let actuation = j_q.transpose() * model.actuation_matrix();

    Ok(DynamicsTerms {
        q: q.clone(),
        q_dot: q_dot.clone(),
        m,
        c,
        c_model,
        g_vec,
        k_mat: DMatrix::from_diagonal(&DVector::from_element(n_q, model.stiffness)),
        d_mat: DMatrix::from_diagonal(&DVector::from_element(n_q, model.damping)),
        j_task,
        j_mu,
        j_mu_dot,
        actuation,
    })
}

/// Mapped terms in independent mode (`q = theta`).
pub fn mapped_terms(state: &PccState, model: &WristModel) -> Result<DynamicsTerms> {
    assemble_terms(
        &state.theta().clone_owned(),
        &state.theta_dot().clone_owned(),
        model,
        BendingMode::Independent,
    )
}

impl DynamicsTerms {
    /// Condition number of the mapped inertia (symmetric eigenvalue ratio).
    pub fn inertia_condition(&self) -> f64 {
        let eigen = self.m.clone().symmetric_eigenvalues();
        let max = eigen.amax();
        let min = eigen.iter().cloned().fold(f64::INFINITY, f64::min);
        if min <= 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }

    /// Kinetic plus elastic energy, the Lyapunov candidate of the free
    /// damped wrist.
    pub fn energy(&self) -> f64 {
        0.5 * (self.q_dot.dot(&(&self.m * &self.q_dot)) + self.q.dot(&(&self.k_mat * &self.q)))
    }
}

/// Accelerations from the mapped model:
/// `q_ddot = M^-1 (tau + J' F - (C + D) q_dot - G - K q)`.
///
/// Solved as a linear system; an ill-conditioned inertia is reported rather
/// than inverted.
pub fn forward_dynamics(
    terms: &DynamicsTerms,
    tau: &DVector<f64>,
    tip_force: Vector2<f64>,
) -> Result<DVector<f64>> {
    let n_q = terms.q.len();
    if tau.len() != n_q {
        return Err(Error::LengthMismatch {
            context: "tau vs terms",
            left: tau.len(),
            right: n_q,
        });
    }
    let condition = terms.inertia_condition();
    if !condition.is_finite() || condition > CONDITION_LIMIT {
        return Err(Error::SingularDynamics {
            theta: terms.q.iter().cloned().collect(),
            condition,
        });
    }
    let rhs = tau + terms.j_task.transpose() * tip_force
        - (&terms.c + &terms.d_mat) * &terms.q_dot
        - &terms.g_vec
        - &terms.k_mat * &terms.q;
    terms
        .m
        .clone()
        .cholesky()
        .map(|ch| ch.solve(&rhs))
        .or_else(|| terms.m.clone().lu().solve(&rhs))
        .ok_or_else(|| Error::SingularDynamics {
            theta: terms.q.iter().cloned().collect(),
            condition,
        })
}

/// Minimum-norm tendon tensions realizing `tau` through a given effective
/// map (square maps are solved exactly). Negative tensions are flagged, not
/// clamped.
pub fn tendon_forces_for_map(tau: &DVector<f64>, map: &DMatrix<f64>) -> Result<TendonForces> {
    if tau.len() != map.nrows() {
        return Err(Error::LengthMismatch {
            context: "tau vs actuation map",
            left: tau.len(),
            right: map.nrows(),
        });
    }
    let svd = map.clone().svd(true, true);
    let s_max = svd.singular_values.amax();
    let s_min = svd
        .singular_values
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    if s_max <= 0.0 || s_min < ACTUATION_RANK_TOL * s_max || svd.singular_values.len() < tau.len()
    {
        return Err(Error::ActuationSingularity {
            min_singular: s_min,
        });
    }
    let forces = svd
        .solve(tau, ACTUATION_RANK_TOL * s_max)
        .map_err(|e| Error::invalid(format!("tendon solve failed: {e}")))?;
    let has_negative = forces.iter().any(|f| *f < 0.0);
    Ok(TendonForces {
        forces,
        has_negative,
    })
}

/// Tendon tensions for a torque in the full segment coordinates,
/// `F_t = [J_mu' A_b]^+ tau`.
pub fn tendon_forces(
    tau: &DVector<f64>,
    state: &PccState,
    model: &WristModel,
) -> Result<TendonForces> {
    model.validate()?;
    let j_mu = jacobian_mu(state, &model.geometry)?;
    let map = j_mu.transpose() * model.actuation_matrix();
    tendon_forces_for_map(tau, &map)
}

// ---------------------------------------------------------------------------
// Allocation-free uniform-mode plant
// ---------------------------------------------------------------------------

/// Single-coordinate plant evaluator for the uniform bending mode.
///
/// Produces exactly the [`forward_dynamics`] acceleration of
/// [`assemble_terms`] with [`BendingMode::Uniform`], a few hundred flops per
/// call and no allocation: the default wrist's damping pole sits near 2e6/s,
/// so closed-loop episodes integrate with microsecond substeps and the
/// integrand dominates the simulation cost.
#[derive(Debug, Clone)]
pub struct UniformRig {
    lengths: Vec<f64>,
    w: f64,
    k: f64,
    d: f64,
    d_aug: f64,
    gravity: Vector2<f64>,
    n: usize,
    /// Effective tendon map row `(J_mu E)' A_b`, constant in uniform mode.
    actuation_row: DVector<f64>,
}

impl UniformRig {
    pub fn new(model: &WristModel) -> Result<Self> {
        model.validate()?;
        let n = model.n();
        let actuation_row = DVector::from_fn(model.n_tendons(), |t, _| {
            model.tendons[t].arms.iter().sum::<f64>() / n as f64
        });
        Ok(UniformRig {
            lengths: model.geometry.iter().map(|s| s.length).collect(),
            w: model.chord_mass,
            k: model.stiffness,
            d: model.damping,
            d_aug: model.augmented_damping,
            gravity: model.gravity,
            n,
            actuation_row,
        })
    }

    pub fn actuation_row(&self) -> &DVector<f64> {
        &self.actuation_row
    }

    /// Acceleration of the tip bending angle under held torque and tip
    /// force: the right-hand side of the mapped model solved for q_ddot.
    pub fn accel(&self, q: f64, q_dot: f64, tau: f64, tip_force: Vector2<f64>) -> f64 {
        let n_f = self.n as f64;
        let theta = q / n_f;
        let theta_dot = q_dot / n_f;

        let half = 0.5 * theta;
        let f = crate::kinematics::half_sine_ratio(theta);
        let f1 = crate::kinematics::half_sine_ratio_d1(theta);
        let f2 = crate::kinematics::half_sine_ratio_d2(theta);

        // Chain walk carrying position, true velocity, bias acceleration
        // (q_ddot = 0), and the unit-rate (d/dq) channel. Chord angles step
        // by exactly theta per segment in uniform mode, so the loop rotates
        // one unit vector incrementally instead of calling sin_cos per
        // segment.
        let mut b = Vector2::zeros();
        let mut b_dot = Vector2::zeros();
        let mut b_dd = Vector2::zeros();
        let mut b_u = Vector2::zeros();
        let mut phi_dot = 0.0_f64;
        let mut phi_u = 0.0_f64;

        let (s_h, c_h) = half.sin_cos();
        let (sin_t, cos_t) = (2.0 * s_h * c_h, 1.0 - 2.0 * s_h * s_h);
        let mut u = Vector2::new(c_h, s_h);

        let mut inertia = 0.0;
        let mut bias_force = 0.0;
        let mut gravity_torque = 0.0;
        let mut jq_sq = 0.0;
        let rot = |v: Vector2<f64>| Vector2::new(-v.y, v.x);

        for (seg, &l) in self.lengths.iter().enumerate() {
            let d_len = l * f;
            let d_rate = l * f1 * theta_dot;
            let d_acc = l * f2 * theta_dot * theta_dot;
            let d_u = l * f1 / n_f;

            if seg > 0 {
                u = Vector2::new(cos_t * u.x - sin_t * u.y, sin_t * u.x + cos_t * u.y);
            }
            let a_dot = phi_dot + 0.5 * theta_dot;
            let a_u = phi_u + 0.5 / n_f;
            let u_dot = rot(u) * a_dot;
            let u_dd = -u * (a_dot * a_dot); // angle accel is zero at q_ddot = 0
            let u_u = rot(u) * a_u;

            // Point mass at the end of the first prismatic link.
            let p_u = b_u + u * d_u + u_u * d_len;
            let p_dd = b_dd + u * d_acc + u_dot * (2.0 * d_rate) + u_dd * d_len;
            inertia += self.w * p_u.norm_squared();
            bias_force += self.w * p_u.dot(&p_dd);
            gravity_torque -= self.w * self.gravity.dot(&p_u);

            jq_sq += 2.0 * (0.5 / n_f) * (0.5 / n_f) + 2.0 * d_u * d_u;

            // Advance past both prismatic links and the closing revolute.
            let ext = 2.0 * d_len;
            let ext_dot = 2.0 * d_rate;
            let ext_dd = 2.0 * d_acc;
            let ext_u = 2.0 * d_u;
            b_dd += u * ext_dd + u_dot * (2.0 * ext_dot) + u_dd * ext;
            b_dot += u * ext_dot + u_dot * ext;
            b_u += u * ext_u + u_u * ext;
            b += u * ext;
            phi_dot = a_dot + 0.5 * theta_dot;
            phi_u = a_u + 0.5 / n_f;
        }

        let tip_torque = b_u.dot(&tip_force);
        let rhs = tau + tip_torque
            - bias_force
            - (self.d + self.d_aug * jq_sq) * q_dot
            - self.k * q
            - gravity_torque;
        rhs / inertia
    }

    /// Mapped inertia at `q` (kg·m^2).
    pub fn inertia(&self, q: f64) -> f64 {
        let n_f = self.n as f64;
        let theta = q / n_f;
        let f = crate::kinematics::half_sine_ratio(theta);
        let f1 = crate::kinematics::half_sine_ratio_d1(theta);
        let rot = |v: Vector2<f64>| Vector2::new(-v.y, v.x);
        let (s_h, c_h) = (0.5 * theta).sin_cos();
        let (sin_t, cos_t) = (2.0 * s_h * c_h, 1.0 - 2.0 * s_h * s_h);
        let mut u = Vector2::new(c_h, s_h);
        let mut b_u = Vector2::zeros();
        let mut phi_u = 0.0_f64;
        let mut inertia = 0.0;
        for (seg, &l) in self.lengths.iter().enumerate() {
            let d_len = l * f;
            let d_u = l * f1 / n_f;
            if seg > 0 {
                u = Vector2::new(cos_t * u.x - sin_t * u.y, sin_t * u.x + cos_t * u.y);
            }
            let a_u = phi_u + 0.5 / n_f;
            let u_u = rot(u) * a_u;
            let p_u = b_u + u * d_u + u_u * d_len;
            inertia += self.w * p_u.norm_squared();
            b_u += u * (2.0 * d_u) + u_u * (2.0 * d_len);
            phi_u = a_u + 0.5 / n_f;
        }
        inertia
    }
}
