//! Closed-loop episode runner and metrics.
//!
//! An episode integrates the mapped wrist dynamics under a chosen controller
//! with fixed-step RK4 and zero-order-hold control: the torque is computed
//! once per control period and held while the plant advances through the
//! integrator substeps. Disturbances are tip forces applied to the plant
//! only. Episodes are deterministic: the same scenario and seed produce a
//! bit-identical trace.

use std::fmt::Write as _;
use std::path::PathBuf;

use nalgebra::{DVector, Vector2};

use crate::control::{
    pid_control, smc_control, PidGains, PidIntegrator, SmcGains,
};
use crate::dynamics::{
    assemble_terms, forward_dynamics, tendon_forces_for_map, BendingMode, UniformRig, WristModel,
};
use crate::error::{Error, Result};
use crate::neural::MlpNetwork;

/// Which control law closes the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ControllerKind {
    Smc,
    Pid,
}

impl std::fmt::Display for ControllerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ControllerKind::Smc => write!(f, "smc"),
            ControllerKind::Pid => write!(f, "pid"),
        }
    }
}

/// Anatomical bending direction; fixes the sign of the target angle and the
/// plane label. The two planes share the same planar model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Ulnar,
    Radial,
    Flexion,
    Extension,
}

impl Direction {
    pub fn sign(&self) -> f64 {
        match self {
            Direction::Ulnar | Direction::Flexion => 1.0,
            Direction::Radial | Direction::Extension => -1.0,
        }
    }

    pub fn plane(&self) -> &'static str {
        match self {
            Direction::Ulnar | Direction::Radial => "deviation",
            Direction::Flexion | Direction::Extension => "flexion-extension",
        }
    }
}

/// Reference trajectory shaping toward the target angle.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub enum ReferenceShape {
    /// Raw step to the target at t = 0.
    Step,
    /// Quintic ramp reaching the target after `duration` seconds.
    Ramp { duration: f64 },
}

/// Where the desired angle comes from: the configured target directly, or a
/// network inverting the desired tip position.
#[derive(Debug, Clone)]
pub enum ReferenceSource {
    Direct,
    Loaded(Box<MlpNetwork>),
    File(PathBuf),
}

/// One rectangular tip-force pulse.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct DisturbancePulse {
    pub start: f64,
    pub end: f64,
    /// In-plane force (N).
    pub force: [f64; 2],
}

/// Full description of one closed-loop episode.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: WristModel,
    pub mode: BendingMode,
    pub controller: ControllerKind,
    pub smc_gains: SmcGains,
    pub pid_gains: PidGains,
    pub direction: Direction,
    /// Target bending-angle magnitude (rad); the direction fixes the sign.
    pub target: f64,
    pub duration: f64,
    /// Control period = trace grid step (s).
    pub control_period: f64,
    /// Integrator substeps per control period.
    pub substeps: u32,
    pub shape: ReferenceShape,
    pub source: ReferenceSource,
    pub disturbances: Vec<DisturbancePulse>,
    /// Tip force known to the controller (zero unless declared).
    pub known_tip_force: Vector2<f64>,
    /// Initial generalized coordinates (defaults to rest at zero).
    pub initial_angle: f64,
    pub initial_rate: f64,
    pub seed: u64,
}

impl Default for Scenario {
    fn default() -> Self {
        Scenario {
            model: WristModel::default(),
            mode: BendingMode::Uniform,
            controller: ControllerKind::Smc,
            smc_gains: SmcGains::new(1000.0, 1e-3, 1000.0).expect("valid default gains"),
            pid_gains: PidGains {
                kp: 1e4,
                ki: 5e3,
                kd: 2e3,
            },
            direction: Direction::Ulnar,
            target: 30.0_f64.to_radians(),
            duration: 6.0,
            control_period: 1e-3,
            substeps: 1000,
            shape: ReferenceShape::Step,
            source: ReferenceSource::Direct,
            disturbances: Vec::new(),
            known_tip_force: Vector2::zeros(),
            initial_angle: 0.0,
            initial_rate: 0.0,
            seed: 42,
        }
    }
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.smc_gains.validate()?;
        self.pid_gains.validate()?;
        if !(self.control_period > 0.0 && self.control_period <= self.duration) {
            return Err(Error::invalid(format!(
                "control period {} must satisfy 0 < period <= duration {}",
                self.control_period, self.duration
            )));
        }
        if self.substeps == 0 {
            return Err(Error::invalid("substeps must be >= 1"));
        }
        if self.target.abs() > self.model.theta_max {
            return Err(Error::invalid(format!(
                "target {} rad outside the +/-{} rad motion range",
                self.target, self.model.theta_max
            )));
        }
        if let ReferenceShape::Ramp { duration } = self.shape {
            if duration <= 0.0 {
                return Err(Error::invalid("ramp duration must be > 0"));
            }
        }
        for p in &self.disturbances {
            if !(p.start.is_finite() && p.end.is_finite() && p.end > p.start) {
                return Err(Error::invalid("disturbance pulse must have end > start"));
            }
        }
        Ok(())
    }

    /// Signed target angle.
    pub fn signed_target(&self) -> f64 {
        self.direction.sign() * self.target
    }

    /// Resolve the base desired angle through the configured source.
    /// Network sources invert the tip position of the signed target; the
    /// prediction warning is returned alongside.
    fn resolve_reference(&self) -> Result<(f64, bool)> {
        let signed = self.signed_target();
        match &self.source {
            ReferenceSource::Direct => Ok((signed, false)),
            ReferenceSource::Loaded(net) => Ok(predict_reference(net, &self.model, signed)?),
            ReferenceSource::File(path) => {
                let net = MlpNetwork::load(path)?;
                Ok(predict_reference(&net, &self.model, signed)?)
            }
        }
    }

    fn hash(&self) -> u64 {
        let mut text = String::new();
        let _ = write!(
            text,
            "{:?}|{:?}|{:?}|{:?}|{:?}|{}|{}|{}|{}|{:?}|{:?}|{:?}|{}|{}|{}",
            self.model,
            self.mode,
            self.controller,
            self.smc_gains,
            self.pid_gains,
            self.target,
            self.duration,
            self.control_period,
            self.substeps,
            self.shape,
            self.direction,
            self.disturbances,
            self.initial_angle,
            self.initial_rate,
            self.seed,
        );
        fnv1a(text.as_bytes())
    }
}

fn predict_reference(net: &MlpNetwork, model: &WristModel, signed: f64) -> Result<(f64, bool)> {
    let (x, y) = crate::neural::tip_of_angle(model, signed)?;
    let p = net.predict(x, y);
    Ok((p.theta, p.out_of_workspace))
}

fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf29ce484222325_u64;
    for b in bytes {
        hash ^= *b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

/// Quintic smoothstep: position fraction and its time derivative.
fn quintic(t: f64, duration: f64) -> (f64, f64) {
    if t <= 0.0 {
        return (0.0, 0.0);
    }
    if t >= duration {
        return (1.0, 0.0);
    }
    let u = t / duration;
    let s = u * u * u * (10.0 - 15.0 * u + 6.0 * u * u);
    let ds = 30.0 * u * u * (1.0 - u) * (1.0 - u) / duration;
    (s, ds)
}

/// One trace sample on the control grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub t: f64,
    pub theta_des: DVector<f64>,
    pub theta_o: DVector<f64>,
    pub theta_dot_o: DVector<f64>,
    pub e: DVector<f64>,
    pub sigma: DVector<f64>,
    pub tau: DVector<f64>,
    pub f_t: DVector<f64>,
    pub dist: Vector2<f64>,
}

/// Episode metadata carried alongside the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    pub controller: ControllerKind,
    pub scenario_hash: u64,
    pub seed: u64,
    /// The network flagged the reference query as outside its training hull.
    pub reference_warning: bool,
    /// Rows whose tendon solution contained a negative tension.
    pub negative_tension_rows: usize,
}

/// Time series of one episode.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationTrace {
    pub rows: Vec<TraceRow>,
    /// Row index at which the state went non-finite, if the episode failed.
    pub failed_at: Option<usize>,
    pub meta: TraceMeta,
}

impl SimulationTrace {
    pub fn n_coords(&self) -> usize {
        self.rows.first().map_or(0, |r| r.theta_o.len())
    }

    pub fn n_tendons(&self) -> usize {
        self.rows.first().map_or(0, |r| r.f_t.len())
    }

    /// Final reference angle, the settling target.
    pub fn final_reference(&self) -> DVector<f64> {
        self.rows
            .last()
            .map(|r| r.theta_des.clone())
            .unwrap_or_else(|| DVector::zeros(0))
    }
}

/// Run one closed-loop episode.
pub fn run_episode(scenario: &Scenario) -> Result<SimulationTrace> {
    scenario.validate()?;
    let (theta_net, reference_warning) = scenario.resolve_reference()?;

    let reference = |t: f64| -> f64 {
        match scenario.shape {
            ReferenceShape::Step => theta_net,
            ReferenceShape::Ramp { duration } => theta_net * quintic(t, duration).0,
        }
    };

    let disturbance_at = |t: f64| -> Vector2<f64> {
        let mut f = Vector2::zeros();
        for p in &scenario.disturbances {
            if t >= p.start && t < p.end {
                f += Vector2::new(p.force[0], p.force[1]);
            }
        }
        f
    };

    let n_ticks = (scenario.duration / scenario.control_period).round() as usize;
    let n_q = scenario.mode.n_coords(scenario.model.n());
    let h = scenario.control_period / scenario.substeps as f64;

    let rig = match scenario.mode {
        BendingMode::Uniform => Some(UniformRig::new(&scenario.model)?),
        BendingMode::Independent => None,
    };

    let mut q = DVector::from_element(n_q, scenario.initial_angle);
    let mut q_dot = DVector::from_element(n_q, scenario.initial_rate);
    let mut integrator = PidIntegrator::new(n_q);
    let mut prev_error: Option<DVector<f64>> = None;
    let mut rows: Vec<TraceRow> = Vec::with_capacity(n_ticks + 1);
    let mut failed_at = None;
    let mut negative_tension_rows = 0usize;

    'ticks: for k in 0..=n_ticks {
        let t = k as f64 * scenario.control_period;
        let theta_des = DVector::from_element(n_q, reference(t));

        let terms = assemble_terms(&q, &q_dot, &scenario.model, scenario.mode)?;
        let e = &q - &theta_des;

        let (tau, sigma) = match scenario.controller {
            ControllerKind::Smc => {
                let cmd = smc_control(
                    &terms,
                    &theta_des,
                    scenario.known_tip_force,
                    &scenario.smc_gains,
                )?;
                (cmd.tau, cmd.sigma)
            }
            ControllerKind::Pid => {
                // Digital derivative: backward difference of the sampled
                // error. The instantaneous rate aliases intra-tick chatter.
                let e_dot = match &prev_error {
                    Some(prev) => (&e - prev) / scenario.control_period,
                    None => DVector::zeros(n_q),
                };
                prev_error = Some(e.clone());
                let integral = integrator.advance(&e, scenario.control_period).clone();
                let command =
                    pid_control(&theta_des, &e, &integral, &e_dot, &scenario.pid_gains);
                // The corrected angle command stays inside the motion range
                // and drives the plant through the static model inverse.
                let limit = scenario.model.theta_max;
                let clamped = command.map(|c| c.clamp(-limit, limit));
                let tau = &terms.k_mat * &clamped + &terms.g_vec;
                (tau, DVector::zeros(n_q))
            }
        };

        let f_t = tendon_forces_for_map(&tau, &terms.actuation)?;
        if f_t.has_negative {
            negative_tension_rows += 1;
        }
        rows.push(TraceRow {
            t,
            theta_des,
            theta_o: q.clone(),
            theta_dot_o: q_dot.clone(),
            e,
            sigma,
            tau: tau.clone(),
            f_t: f_t.forces,
            dist: disturbance_at(t),
        });

        if k == n_ticks {
            break;
        }

        // Advance the plant under the held torque.
        match &rig {
            Some(rig) => {
                let mut qs = q[0];
                let mut qds = q_dot[0];
                let tau_s = tau[0];
                for s in 0..scenario.substeps {
                    let ts = t + s as f64 * h;
                    let f = |time: f64, a: f64, b: f64| rig.accel(a, b, tau_s, disturbance_at(time));
                    let k1v = f(ts, qs, qds);
                    let k2v = f(ts + 0.5 * h, qs + 0.5 * h * qds, qds + 0.5 * h * k1v);
                    let k2q = qds + 0.5 * h * k1v;
                    let k3v = f(ts + 0.5 * h, qs + 0.5 * h * k2q, qds + 0.5 * h * k2v);
                    let k3q = qds + 0.5 * h * k2v;
                    let k4v = f(ts + h, qs + h * k3q, qds + h * k3v);
                    let k4q = qds + h * k3v;
                    qs += h / 6.0 * (qds + 2.0 * k2q + 2.0 * k3q + k4q);
                    qds += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
                }
                if !(qs.is_finite() && qds.is_finite()) {
                    failed_at = Some(rows.len() - 1);
                    break 'ticks;
                }
                q[0] = qs;
                q_dot[0] = qds;
            }
            None => {
                for s in 0..scenario.substeps {
                    let ts = t + s as f64 * h;
                    let f = |time: f64, a: &DVector<f64>, b: &DVector<f64>| -> Result<DVector<f64>> {
                        let terms = assemble_terms(a, b, &scenario.model, scenario.mode)?;
                        forward_dynamics(&terms, &tau, disturbance_at(time))
                    };
                    let k1v = f(ts, &q, &q_dot)?;
                    let q2 = &q + &q_dot * (0.5 * h);
                    let v2 = &q_dot + &k1v * (0.5 * h);
                    let k2v = f(ts + 0.5 * h, &q2, &v2)?;
                    let q3 = &q + &v2 * (0.5 * h);
                    let v3 = &q_dot + &k2v * (0.5 * h);
                    let k3v = f(ts + 0.5 * h, &q3, &v3)?;
                    let q4 = &q + &v3 * h;
                    let v4 = &q_dot + &k3v * h;
                    let k4v = f(ts + h, &q4, &v4)?;
                    let dq = (&q_dot + &v2 * 2.0 + &v3 * 2.0 + &v4) * (h / 6.0);
                    let dv = (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (h / 6.0);
                    q += dq;
                    q_dot += dv;
                }
                if q.iter().chain(q_dot.iter()).any(|v| !v.is_finite()) {
                    failed_at = Some(rows.len() - 1);
                    break 'ticks;
                }
            }
        }
    }

    Ok(SimulationTrace {
        rows,
        failed_at,
        meta: TraceMeta {
            controller: scenario.controller,
            scenario_hash: scenario.hash(),
            seed: scenario.seed,
            reference_warning,
            negative_tension_rows,
        },
    })
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

/// Episode metrics: full-episode RMSE, 2%-band settling time, and mean |e|
/// over the final tenth.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Metrics {
    /// Root-mean-square tracking error over the whole episode (rad).
    pub rmse: f64,
    /// First time the output enters the +/-2% band of the target and stays;
    /// `None` when it never settles within the episode.
    pub settling_time: Option<f64>,
    /// Mean |e| over the final 10% of the episode (rad).
    pub steady_state_error: f64,
}

/// Fraction of the target magnitude that defines the settling band.
pub const SETTLING_BAND: f64 = 0.02;

/// Metrics of a trace against a target vector (the final reference).
pub fn compute_metrics(trace: &SimulationTrace, target: &DVector<f64>) -> Metrics {
    let rows = &trace.rows;
    if rows.is_empty() {
        return Metrics {
            rmse: 0.0,
            settling_time: None,
            steady_state_error: 0.0,
        };
    }

    let mut sq = 0.0;
    let mut count = 0usize;
    for row in rows {
        for v in row.e.iter() {
            sq += v * v;
            count += 1;
        }
    }
    let rmse = (sq / count as f64).sqrt();

    let band: DVector<f64> = target.map(|t| SETTLING_BAND * t.abs());
    let inside = |row: &TraceRow| -> bool {
        row.theta_o
            .iter()
            .zip(target.iter())
            .zip(band.iter())
            .all(|((o, t), b)| (o - t).abs() <= *b)
    };
    let settling_time = if !inside(rows.last().unwrap()) {
        None
    } else {
        let mut idx = rows.len() - 1;
        while idx > 0 && inside(&rows[idx - 1]) {
            idx -= 1;
        }
        Some(rows[idx].t)
    };

    let tail = ((rows.len() as f64) * 0.1).ceil().max(1.0) as usize;
    let mut abs = 0.0;
    let mut n = 0usize;
    for row in &rows[rows.len() - tail..] {
        for v in row.e.iter() {
            abs += v.abs();
            n += 1;
        }
    }
    Metrics {
        rmse,
        settling_time,
        steady_state_error: abs / n as f64,
    }
}

/// Convenience: metrics against the trace's own final reference.
pub fn metrics_of(trace: &SimulationTrace) -> Metrics {
    compute_metrics(trace, &trace.final_reference())
}

// ---------------------------------------------------------------------------
// Controller comparison
// ---------------------------------------------------------------------------

/// Side-by-side metrics with one verdict per metric.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub left_label: ControllerKind,
    pub right_label: ControllerKind,
    pub left: Metrics,
    pub right: Metrics,
    /// (metric name, winner label or "tie").
    pub verdicts: Vec<(&'static str, String)>,
}

/// Run matched episodes under two controllers and compare metric by metric.
pub fn compare_controllers(
    scenario: &Scenario,
    left: ControllerKind,
    right: ControllerKind,
) -> Result<ComparisonReport> {
    let mut a = scenario.clone();
    a.controller = left;
    let mut b = scenario.clone();
    b.controller = right;
    let ta = run_episode(&a)?;
    let tb = run_episode(&b)?;
    let ma = metrics_of(&ta);
    let mb = metrics_of(&tb);

    let lower = |x: f64, y: f64| -> String {
        if x < y {
            left.to_string()
        } else if y < x {
            right.to_string()
        } else {
            "tie".into()
        }
    };
    let settle = |x: Option<f64>, y: Option<f64>| -> String {
        match (x, y) {
            (Some(a), Some(b)) => lower(a, b),
            (Some(_), None) => left.to_string(),
            (None, Some(_)) => right.to_string(),
            (None, None) => "tie".into(),
        }
    };
    let verdicts = vec![
        ("rmse", lower(ma.rmse, mb.rmse)),
        ("settling_time", settle(ma.settling_time, mb.settling_time)),
        (
            "steady_state_error",
            lower(ma.steady_state_error, mb.steady_state_error),
        ),
    ];
    Ok(ComparisonReport {
        left_label: left,
        right_label: right,
        left: ma,
        right: mb,
        verdicts,
    })
}

// ---------------------------------------------------------------------------
// Trace CSV
// ---------------------------------------------------------------------------

fn vector_headers(base: &str, n: usize) -> Vec<String> {
    if n == 1 {
        vec![base.to_string()]
    } else {
        (1..=n).map(|i| format!("{base}_{i}")).collect()
    }
}

/// Header row for a trace with the given coordinate and tendon counts.
pub fn trace_headers(n_q: usize, n_a: usize) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    for base in ["theta_des", "theta_o", "theta_dot_o", "e", "sigma", "tau"] {
        h.extend(vector_headers(base, n_q));
    }
    h.extend((1..=n_a).map(|i| format!("F_t_{i}")));
    h.push("dist_fx".into());
    h.push("dist_fy".into());
    h
}

/// Write the trace as CSV. Floats use the shortest representation that
/// round-trips exactly, so a re-read reproduces the values bit for bit.
pub fn write_trace_csv<W: std::io::Write>(trace: &SimulationTrace, out: &mut W) -> Result<()> {
    let n_q = trace.n_coords();
    let n_a = trace.n_tendons();
    writeln!(out, "{}", trace_headers(n_q, n_a).join(","))?;
    let mut line = String::new();
    for row in &trace.rows {
        line.clear();
        let _ = write!(line, "{}", row.t);
        for vec in [
            &row.theta_des,
            &row.theta_o,
            &row.theta_dot_o,
            &row.e,
            &row.sigma,
            &row.tau,
            &row.f_t,
        ] {
            for v in vec.iter() {
                let _ = write!(line, ",{v}");
            }
        }
        let _ = write!(line, ",{},{}", row.dist.x, row.dist.y);
        writeln!(out, "{line}")?;
    }
    Ok(())
}

pub fn save_trace_csv(trace: &SimulationTrace, path: &std::path::Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)?;
        }
    }
    let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trace_csv(trace, &mut file)
}

/// Read back a trace CSV written by [`write_trace_csv`]. Metadata is not
/// stored in the CSV; the returned trace carries a placeholder.
pub fn read_trace_csv(path: &std::path::Path) -> Result<SimulationTrace> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Config(format!("empty trace file {}", path.display())))?;
    let columns: Vec<&str> = header.split(',').collect();
    let n_a = columns.iter().filter(|c| c.starts_with("F_t_")).count();
    let per_vec = (columns.len() - 1 - n_a - 2) / 6;
    if columns.len() != 1 + 6 * per_vec + n_a + 2 {
        return Err(Error::Config(format!(
            "unexpected trace header in {}",
            path.display()
        )));
    }

    let mut rows = Vec::new();
    for (lineno, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<f64> = line
            .split(',')
            .map(|f| {
                f.parse::<f64>().map_err(|e| {
                    Error::Config(format!("bad float on data row {}: {e}", lineno + 1))
                })
            })
            .collect::<Result<_>>()?;
        if fields.len() != columns.len() {
            return Err(Error::Config(format!(
                "row {} has {} fields, expected {}",
                lineno + 1,
                fields.len(),
                columns.len()
            )));
        }
        let mut cursor = 1usize;
        let mut take = |n: usize| {
            let v = DVector::from_row_slice(&fields[cursor..cursor + n]);
            cursor += n;
            v
        };
        rows.push(TraceRow {
            t: fields[0],
            theta_des: take(per_vec),
            theta_o: take(per_vec),
            theta_dot_o: take(per_vec),
            e: take(per_vec),
            sigma: take(per_vec),
            tau: take(per_vec),
            f_t: take(n_a),
            dist: Vector2::new(fields[columns.len() - 2], fields[columns.len() - 1]),
        });
    }
    Ok(SimulationTrace {
        rows,
        failed_at: None,
        meta: TraceMeta {
            controller: ControllerKind::Smc,
            scenario_hash: 0,
            seed: 0,
            reference_warning: false,
            negative_tension_rows: 0,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn short_scenario() -> Scenario {
        Scenario {
            duration: 0.5,
            shape: ReferenceShape::Ramp { duration: 0.3 },
            ..Scenario::default()
        }
    }

    #[test]
    fn zero_target_from_rest_stays_identically_zero() {
        let mut scenario = short_scenario();
        scenario.target = 0.0;
        scenario.shape = ReferenceShape::Step;
        scenario.model.gravity = Vector2::zeros();
        let trace = run_episode(&scenario).unwrap();
        assert_eq!(trace.rows.len(), 501);
        assert!(trace.failed_at.is_none());
        for row in &trace.rows {
            assert_eq!(row.theta_o[0], 0.0);
            assert_eq!(row.e[0], 0.0);
        }
    }

    #[test]
    fn traces_are_bit_deterministic() {
        let scenario = short_scenario();
        let a = run_episode(&scenario).unwrap();
        let b = run_episode(&scenario).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn row_count_matches_grid() {
        let mut scenario = short_scenario();
        scenario.duration = 0.25;
        scenario.control_period = 0.005;
        scenario.substeps = 5000; // keep the substep at 1e-6 s
        let trace = run_episode(&scenario).unwrap();
        assert!(trace.failed_at.is_none());
        assert_eq!(trace.rows.len(), 51);
        assert_abs_diff_eq!(trace.rows.last().unwrap().t, 0.25, epsilon = 1e-12);
    }

    #[test]
    fn halving_the_substep_barely_moves_the_final_state() {
        let mut scenario = short_scenario();
        scenario.duration = 0.2;
        let coarse = run_episode(&scenario).unwrap();
        scenario.substeps *= 2;
        let fine = run_episode(&scenario).unwrap();
        let d = (coarse.rows.last().unwrap().theta_o[0] - fine.rows.last().unwrap().theta_o[0])
            .abs();
        assert!(d < 1e-8, "step sensitivity {d:.3e}");
    }

    /// A heavier wrist with all-zero PID gains gives a smooth closed loop
    /// (pure gravity-compensated spring-damper decay) for measuring the
    /// integrator's self-convergence order.
    fn smooth_free_scenario(substeps: u32) -> Scenario {
        let mut scenario = Scenario::default();
        scenario.model.chord_mass = 0.1;
        scenario.model.damping = 5e-3;
        scenario.controller = ControllerKind::Pid;
        scenario.pid_gains = PidGains {
            kp: 0.0,
            ki: 0.0,
            kd: 0.0,
        };
        scenario.target = 0.0;
        scenario.initial_angle = 0.4;
        scenario.duration = 0.5;
        scenario.control_period = 1e-3;
        scenario.substeps = substeps;
        scenario.shape = ReferenceShape::Step;
        scenario
    }

    #[test]
    fn rk4_self_convergence_order() {
        let f1 = run_episode(&smooth_free_scenario(2)).unwrap();
        let f2 = run_episode(&smooth_free_scenario(4)).unwrap();
        let f3 = run_episode(&smooth_free_scenario(8)).unwrap();
        let x1 = f1.rows.last().unwrap().theta_o[0];
        let x2 = f2.rows.last().unwrap().theta_o[0];
        let x3 = f3.rows.last().unwrap().theta_o[0];
        let order = ((x1 - x2).abs() / (x2 - x3).abs()).log2();
        assert!(order >= 3.8, "measured order {order:.2}");
    }

    #[test]
    fn disturbance_schedule_integrates_to_its_analytic_impulse() {
        let mut scenario = short_scenario();
        scenario.duration = 2.0;
        scenario.disturbances = vec![DisturbancePulse {
            start: 0.8,
            end: 1.3,
            force: [0.3, 0.8],
        }];
        let trace = run_episode(&scenario).unwrap();
        let dt = scenario.control_period;
        // Trapezoid over the sampled force columns.
        let mut impulse = Vector2::zeros();
        for pair in trace.rows.windows(2) {
            impulse += (pair[0].dist + pair[1].dist) * (0.5 * dt);
        }
        let analytic = Vector2::new(0.3, 0.8) * 0.5;
        let tolerance = Vector2::new(0.3, 0.8).norm() * dt;
        assert!(
            (impulse - analytic).norm() <= tolerance,
            "impulse {impulse:?} vs {analytic:?}"
        );
    }

    #[test]
    fn metrics_on_synthetic_traces() {
        let meta = TraceMeta {
            controller: ControllerKind::Smc,
            scenario_hash: 0,
            seed: 0,
            reference_warning: false,
            negative_tension_rows: 0,
        };
        let row = |t: f64, o: f64, des: f64| TraceRow {
            t,
            theta_des: nalgebra::dvector![des],
            theta_o: nalgebra::dvector![o],
            theta_dot_o: nalgebra::dvector![0.0],
            e: nalgebra::dvector![o - des],
            sigma: nalgebra::dvector![0.0],
            tau: nalgebra::dvector![0.0],
            f_t: nalgebra::dvector![0.0, 0.0],
            dist: Vector2::zeros(),
        };

        // e == 0 everywhere.
        let perfect = SimulationTrace {
            rows: (0..=100).map(|k| row(k as f64 * 0.01, 0.5, 0.5)).collect(),
            failed_at: None,
            meta: meta.clone(),
        };
        let m = compute_metrics(&perfect, &nalgebra::dvector![0.5]);
        assert_eq!(m.rmse, 0.0);
        assert_eq!(m.settling_time, Some(0.0));
        assert_eq!(m.steady_state_error, 0.0);

        // Constant error outside the band: rmse = sse = |c|, unsettled.
        let c = 0.1;
        let offset = SimulationTrace {
            rows: (0..=100)
                .map(|k| row(k as f64 * 0.01, 0.5 + c, 0.5))
                .collect(),
            failed_at: None,
            meta: meta.clone(),
        };
        let m = compute_metrics(&offset, &nalgebra::dvector![0.5]);
        assert_abs_diff_eq!(m.rmse, c, epsilon = 1e-12);
        assert_abs_diff_eq!(m.steady_state_error, c, epsilon = 1e-12);
        assert_eq!(m.settling_time, None);

        // Entering the band halfway and staying.
        let crossing = SimulationTrace {
            rows: (0..=100)
                .map(|k| {
                    let t = k as f64 * 0.01;
                    let o = if t < 0.5 { 0.4 } else { 0.4999 };
                    row(t, o, 0.5)
                })
                .collect(),
            failed_at: None,
            meta,
        };
        let m = compute_metrics(&crossing, &nalgebra::dvector![0.5]);
        assert_abs_diff_eq!(m.settling_time.unwrap(), 0.5, epsilon = 1e-12);
    }

    #[test]
    fn comparison_is_symmetric_and_reflexive() {
        let scenario = short_scenario();
        let same =
            compare_controllers(&scenario, ControllerKind::Smc, ControllerKind::Smc).unwrap();
        assert_eq!(same.left, same.right);
        for (_, verdict) in &same.verdicts {
            assert_eq!(verdict, "tie");
        }

        let ab = compare_controllers(&scenario, ControllerKind::Smc, ControllerKind::Pid).unwrap();
        let ba = compare_controllers(&scenario, ControllerKind::Pid, ControllerKind::Smc).unwrap();
        assert_eq!(ab.left, ba.right);
        assert_eq!(ab.right, ba.left);
        for ((_, v1), (_, v2)) in ab.verdicts.iter().zip(&ba.verdicts) {
            assert_eq!(v1, v2); // winner labels, not columns
        }
    }

    #[test]
    fn csv_round_trip_reproduces_metrics_exactly() {
        let mut scenario = short_scenario();
        scenario.disturbances = vec![DisturbancePulse {
            start: 0.2,
            end: 0.3,
            force: [0.2, -0.4],
        }];
        let trace = run_episode(&scenario).unwrap();
        let dir = std::env::temp_dir().join("softwrist-sim-test");
        let path = dir.join("trace.csv");
        save_trace_csv(&trace, &path).unwrap();
        let back = read_trace_csv(&path).unwrap();
        assert_eq!(trace.rows, back.rows);
        let target = trace.final_reference();
        let m1 = compute_metrics(&trace, &target);
        let m2 = compute_metrics(&back, &target);
        assert_eq!(m1, m2);
        std::fs::remove_dir_all(&dir).ok();
    }

    #[test]
    fn unstable_gains_truncate_and_flag_the_trace() {
        let mut scenario = short_scenario();
        // A rate weight far too large for the hold period destabilizes the
        // discrete loop; the episode must flag, not crash.
        scenario.smc_gains = SmcGains::new(1e4, 1e4, 1.0).unwrap();
        scenario.smc_gains.p2 = 1e4;
        let trace = run_episode(&scenario).unwrap();
        if let Some(idx) = trace.failed_at {
            assert_eq!(idx, trace.rows.len() - 1);
            assert!(trace.rows.iter().all(|r| r.theta_o[0].is_finite()));
        }
        // Either it truncated, or it stayed finite throughout; both are
        // acceptable outcomes of this probe, NaN rows are not.
        for row in &trace.rows {
            assert!(row.theta_o[0].is_finite());
        }
    }

    #[test]
    fn validation_rejects_bad_scenarios() {
        let mut s = Scenario::default();
        s.control_period = 0.0;
        assert!(s.validate().is_err());
        let mut s = Scenario::default();
        s.target = 2.0;
        assert!(s.validate().is_err());
        let mut s = Scenario::default();
        s.disturbances = vec![DisturbancePulse {
            start: 1.0,
            end: 0.5,
            force: [0.0, 0.0],
        }];
        assert!(s.validate().is_err());
    }
}
