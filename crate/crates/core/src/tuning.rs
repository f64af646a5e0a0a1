//! Particle swarm search over the sliding-mode gains.
//!
//! Particles live in log10 gain space (the useful gains span many orders of
//! magnitude), with velocity clamping and reflection at the bounds. The cost
//! of a particle is one closed-loop episode: tracking RMSE plus a chattering
//! proxy, with a large finite penalty for episodes that blow up — the search
//! never crashes on a bad gain triple. Cost evaluations within an iteration
//! run in parallel; the global-best reduction is ordered by (cost, particle
//! index), so results do not depend on scheduling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::control::SmcGains;
use crate::error::{Error, Result};
use crate::sim::{metrics_of, run_episode, ControllerKind, Scenario, SimulationTrace};

/// Penalty cost for non-finite or truncated episodes.
pub const BLOWUP_PENALTY: f64 = 1e6;

/// Swarm setup and objective weights.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct PsoConfig {
    pub swarm: usize,
    pub iterations: usize,
    /// Inertia weight.
    pub inertia: f64,
    /// Cognitive (personal-best) acceleration.
    pub cognitive: f64,
    /// Social (global-best) acceleration.
    pub social: f64,
    /// Per-gain search bounds; the search runs in log10 space.
    pub bounds_low: f64,
    pub bounds_high: f64,
    pub seed: u64,
    /// Tracking-error weight in the cost.
    pub weight_error: f64,
    /// Chattering-proxy weight in the cost.
    pub weight_chatter: f64,
    /// Optional gains for particle 0 (the tuning baseline).
    pub initial: Option<[f64; 3]>,
}

impl Default for PsoConfig {
    fn default() -> Self {
        PsoConfig {
            swarm: 20,
            iterations: 50,
            inertia: 0.72,
            cognitive: 1.49,
            social: 1.49,
            bounds_low: 1e-4,
            bounds_high: 1e4,
            seed: 11,
            weight_error: 1.0,
            weight_chatter: 0.01,
            initial: Some([1.0, 1.0, 1.0]),
        }
    }
}

impl PsoConfig {
    pub fn validate(&self) -> Result<()> {
        if self.swarm == 0 {
            return Err(Error::invalid("swarm must be >= 1"));
        }
        if !(self.bounds_low > 0.0 && self.bounds_low < self.bounds_high) {
            return Err(Error::invalid("bounds must satisfy 0 < low < high"));
        }
        if let Some(g) = self.initial {
            if g.iter().any(|v| *v < self.bounds_low || *v > self.bounds_high) {
                return Err(Error::invalid("initial gains outside the search bounds"));
            }
        }
        Ok(())
    }
}

/// Global-best progress per iteration.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub best_cost: f64,
    pub best_gains: [f64; 3],
}

/// Tuning outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningResult {
    pub best_gains: SmcGains,
    pub best_cost: f64,
    pub history: Vec<IterationRecord>,
    pub evaluations: usize,
}

/// Cost decomposition of one trace.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub total: f64,
    pub error_term: f64,
    pub chatter_term: f64,
}

/// Cost of an already-run episode: `w_e * rmse + w_c * mean |delta tau|`,
/// or the blow-up penalty for failed traces.
pub fn cost_from_trace(trace: &SimulationTrace, weight_error: f64, weight_chatter: f64) -> CostBreakdown {
    if trace.failed_at.is_some() || trace.rows.len() < 2 {
        return CostBreakdown {
            total: BLOWUP_PENALTY,
            error_term: BLOWUP_PENALTY,
            chatter_term: 0.0,
        };
    }
    let rmse = metrics_of(trace).rmse;
    let mut delta = 0.0;
    let mut count = 0usize;
    for pair in trace.rows.windows(2) {
        for (a, b) in pair[1].tau.iter().zip(pair[0].tau.iter()) {
            delta += (a - b).abs();
            count += 1;
        }
    }
    let chatter = delta / count as f64;
    if !(rmse.is_finite() && chatter.is_finite()) {
        return CostBreakdown {
            total: BLOWUP_PENALTY,
            error_term: BLOWUP_PENALTY,
            chatter_term: 0.0,
        };
    }
    let error_term = weight_error * rmse;
    let chatter_term = weight_chatter * chatter;
    CostBreakdown {
        total: error_term + chatter_term,
        error_term,
        chatter_term,
    }
}

/// Evaluate one gain triple on the tuning scenario.
pub fn tuning_cost(
    gains: &SmcGains,
    scenario: &Scenario,
    weight_error: f64,
    weight_chatter: f64,
) -> f64 {
    let mut s = scenario.clone();
    s.controller = ControllerKind::Smc;
    s.smc_gains = *gains;
    match run_episode(&s) {
        Ok(trace) => cost_from_trace(&trace, weight_error, weight_chatter).total,
        Err(_) => BLOWUP_PENALTY,
    }
}

fn gains_of(position: &[f64; 3]) -> SmcGains {
    SmcGains {
        p1: 10f64.powf(position[0]),
        p2: 10f64.powf(position[1]),
        p3: 10f64.powf(position[2]),
        switching: Default::default(),
    }
}

/// Standard global-best PSO over log10 gains.
pub fn pso_tune(config: &PsoConfig, scenario: &Scenario) -> Result<TuningResult> {
    config.validate()?;
    scenario.validate()?;

    let lo = config.bounds_low.log10();
    let hi = config.bounds_high.log10();
    let range = hi - lo;
    let v_max = 0.2 * range;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut positions: Vec<[f64; 3]> = (0..config.swarm)
        .map(|_| std::array::from_fn(|_| rng.gen_range(lo..hi)))
        .collect();
    if let Some(initial) = config.initial {
        positions[0] = initial.map(f64::log10);
    }
    let mut velocities = vec![[0.0_f64; 3]; config.swarm];

    let evaluate = |positions: &[[f64; 3]]| -> Vec<f64> {
        positions
            .par_iter()
            .map(|p| tuning_cost(&gains_of(p), scenario, config.weight_error, config.weight_chatter))
            .collect()
    };

    let mut costs = evaluate(&positions);
    let mut evaluations = config.swarm;
    let mut personal_best = positions.clone();
    let mut personal_cost = costs.clone();

    let global_index = |costs: &[f64]| -> usize {
        let mut best = 0;
        for (i, c) in costs.iter().enumerate() {
            if *c < costs[best] {
                best = i;
            }
        }
        best
    };
    let mut g = global_index(&personal_cost);
    let mut global_best = personal_best[g];
    let mut global_cost = personal_cost[g];

    let mut history = vec![IterationRecord {
        iteration: 0,
        best_cost: global_cost,
        best_gains: [
            10f64.powf(global_best[0]),
            10f64.powf(global_best[1]),
            10f64.powf(global_best[2]),
        ],
    }];

    for iteration in 1..=config.iterations {
        for i in 0..config.swarm {
            for d in 0..3 {
                let r1: f64 = rng.gen();
                let r2: f64 = rng.gen();
                let mut v = config.inertia * velocities[i][d]
                    + config.cognitive * r1 * (personal_best[i][d] - positions[i][d])
                    + config.social * r2 * (global_best[d] - positions[i][d]);
                v = v.clamp(-v_max, v_max);
                let mut x = positions[i][d] + v;
                // Reflect at the bounds, then clamp against overshoot.
                if x < lo {
                    x = 2.0 * lo - x;
                    v = -v;
                }
                if x > hi {
                    x = 2.0 * hi - x;
                    v = -v;
                }
                positions[i][d] = x.clamp(lo, hi);
                velocities[i][d] = v;
            }
        }
        costs = evaluate(&positions);
        evaluations += config.swarm;

        for i in 0..config.swarm {
            if costs[i] < personal_cost[i] {
                personal_cost[i] = costs[i];
                personal_best[i] = positions[i];
            }
        }
        g = global_index(&personal_cost);
        if personal_cost[g] < global_cost {
            global_cost = personal_cost[g];
            global_best = personal_best[g];
        }
        history.push(IterationRecord {
            iteration,
            best_cost: global_cost,
            best_gains: [
                10f64.powf(global_best[0]),
                10f64.powf(global_best[1]),
                10f64.powf(global_best[2]),
            ],
        });
    }

    Ok(TuningResult {
        best_gains: gains_of(&global_best),
        best_cost: global_cost,
        history,
        evaluations,
    })
}

/// Tuning history as CSV: `iteration,best_cost,best_P1,best_P2,best_P3`.
pub fn history_csv(result: &TuningResult) -> String {
    let mut out = String::from("iteration,best_cost,best_P1,best_P2,best_P3\n");
    for rec in &result.history {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            rec.iteration, rec.best_cost, rec.best_gains[0], rec.best_gains[1], rec.best_gains[2]
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::{ReferenceShape, TraceMeta, TraceRow};
    use nalgebra::{dvector, DVector, Vector2};

    fn tuning_scenario() -> Scenario {
        Scenario {
            duration: 0.4,
            shape: ReferenceShape::Ramp { duration: 0.2 },
            substeps: 667,
            ..Scenario::default()
        }
    }

    fn synthetic_trace(e: f64, tau_step: f64, rows: usize) -> SimulationTrace {
        SimulationTrace {
            rows: (0..rows)
                .map(|k| TraceRow {
                    t: k as f64 * 0.01,
                    theta_des: dvector![0.5],
                    theta_o: dvector![0.5 + e],
                    theta_dot_o: dvector![0.0],
                    e: dvector![e],
                    sigma: dvector![0.0],
                    tau: dvector![k as f64 * tau_step],
                    f_t: dvector![0.0, 0.0],
                    dist: Vector2::zeros(),
                })
                .collect(),
            failed_at: None,
            meta: TraceMeta {
                controller: ControllerKind::Smc,
                scenario_hash: 0,
                seed: 0,
                reference_warning: false,
                negative_tension_rows: 0,
            },
        }
    }

    #[test]
    fn perfect_tracking_with_constant_torque_costs_nothing() {
        let trace = synthetic_trace(0.0, 0.0, 100);
        let cost = cost_from_trace(&trace, 1.0, 0.01);
        assert_eq!(cost.total, 0.0);
    }

    #[test]
    fn error_weight_scales_the_error_term_linearly() {
        let trace = synthetic_trace(0.05, 0.001, 100);
        let base = cost_from_trace(&trace, 1.0, 0.01);
        let doubled = cost_from_trace(&trace, 2.0, 0.01);
        assert!((doubled.error_term - 2.0 * base.error_term).abs() < 1e-15);
        assert_eq!(doubled.chatter_term, base.chatter_term);
    }

    #[test]
    fn blowup_gains_earn_the_penalty_not_a_crash() {
        let scenario = tuning_scenario();
        let wild = SmcGains::new(1e4, 1e-4, 10.0).unwrap();
        let cost = tuning_cost(&wild, &scenario, 1.0, 0.01);
        assert_eq!(cost, BLOWUP_PENALTY);
    }

    #[test]
    fn zero_iterations_return_the_initial_gains() {
        let scenario = tuning_scenario();
        let config = PsoConfig {
            swarm: 1,
            iterations: 0,
            initial: Some([1.0, 1.0, 1.0]),
            ..PsoConfig::default()
        };
        let result = pso_tune(&config, &scenario).unwrap();
        assert_eq!(result.evaluations, 1);
        assert!((result.best_gains.p1 - 1.0).abs() < 1e-12);
        assert!((result.best_gains.p2 - 1.0).abs() < 1e-12);
        assert!((result.best_gains.p3 - 1.0).abs() < 1e-12);
        let direct = tuning_cost(&result.best_gains, &scenario, 1.0, 0.01);
        assert_eq!(result.best_cost, direct);
    }

    #[test]
    fn short_swarm_improves_monotonically_within_bounds() {
        let scenario = tuning_scenario();
        let config = PsoConfig {
            swarm: 6,
            iterations: 4,
            seed: 3,
            ..PsoConfig::default()
        };
        let a = pso_tune(&config, &scenario).unwrap();
        for pair in a.history.windows(2) {
            assert!(pair[1].best_cost <= pair[0].best_cost);
        }
        for g in [a.best_gains.p1, a.best_gains.p2, a.best_gains.p3] {
            assert!(g >= config.bounds_low && g <= config.bounds_high);
        }
        assert_eq!(a.evaluations, 6 * 5);
        // Improves on (or matches) the baseline particle.
        let baseline = tuning_cost(
            &SmcGains::new(1.0, 1.0, 1.0).unwrap(),
            &scenario,
            1.0,
            0.01,
        );
        assert!(a.best_cost <= baseline);

        // Deterministic under the seed.
        let b = pso_tune(&config, &scenario).unwrap();
        assert_eq!(a.history, b.history);
        assert_eq!(a.best_gains, b.best_gains);
    }

    #[test]
    fn history_csv_shape() {
        let scenario = tuning_scenario();
        let config = PsoConfig {
            swarm: 2,
            iterations: 2,
            ..PsoConfig::default()
        };
        let result = pso_tune(&config, &scenario).unwrap();
        let csv = history_csv(&result);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines[0], "iteration,best_cost,best_P1,best_P2,best_P3");
        assert_eq!(lines.len(), 1 + result.history.len());
    }
}
