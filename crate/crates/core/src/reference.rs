//! Stored reference metrics for the bundled wrist study.
//!
//! The `reproduce` command prints these next to the values obtained from the
//! local simulation so runs can be compared at a glance. The controllers in
//! [`ALTERNATIVE_CONTROLLERS`] are not implemented here; their rows exist
//! for the comparison table only. [`EXPERIMENTAL_SMC`] summarizes hardware
//! trials of the same wrist (fabricated springs, marker tracking), which a
//! desk simulation is not expected to reproduce.

/// One row of reference metrics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceMetrics {
    pub label: &'static str,
    /// Root-mean-square tracking error (rad).
    pub rmse: f64,
    /// Settling time (s).
    pub settling_time: f64,
    /// Steady-state error (rad).
    pub steady_state_error: f64,
}

/// Sliding-mode controller, 30-degree step simulation study.
pub const SMC_SIMULATION: ReferenceMetrics = ReferenceMetrics {
    label: "smc",
    rmse: 2.7e-4,
    settling_time: 1.2,
    steady_state_error: 2.31e-4,
};

/// PID baseline on the same scenario.
pub const PID_SIMULATION: ReferenceMetrics = ReferenceMetrics {
    label: "pid",
    rmse: 1.5e-3,
    settling_time: 3.0,
    steady_state_error: 2.48e-3,
};

/// Model-based controllers evaluated elsewhere on the same wrist; kept as
/// reference rows, not implemented.
pub const ALTERNATIVE_CONTROLLERS: [ReferenceMetrics; 3] = [
    ReferenceMetrics {
        label: "mrac",
        rmse: 1.2e-3,
        settling_time: 2.8,
        steady_state_error: 1.3e-3,
    },
    ReferenceMetrics {
        label: "gvsc",
        rmse: 2.9e-2,
        settling_time: 3.18,
        steady_state_error: 1.4e-2,
    },
    ReferenceMetrics {
        label: "nc",
        rmse: 5.0e-2,
        settling_time: 1.02,
        steady_state_error: 1.9e-2,
    },
];

/// Hardware trials of the fabricated wrist (average over directions).
pub const EXPERIMENTAL_SMC: ReferenceMetrics = ReferenceMetrics {
    label: "smc (hardware)",
    rmse: 0.157,
    settling_time: 3.0,
    steady_state_error: 0.032,
};

/// One column of the activation-function training comparison.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainingReference {
    pub activation: &'static str,
    pub batch_size: usize,
    pub epochs: usize,
    pub gradient: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub accuracy: f64,
    pub learning_rate: f64,
    pub training_loss: f64,
    pub validation_loss: f64,
}

/// Reference training table; the sigmoid column is the shipped default.
pub const TRAINING_TABLE: [TrainingReference; 4] = [
    TrainingReference {
        activation: "sigmoid",
        batch_size: 100,
        epochs: 100,
        gradient: 0.0012,
        momentum: 0.90,
        weight_decay: 0.01,
        accuracy: 99.7,
        learning_rate: 0.003,
        training_loss: 0.05,
        validation_loss: 0.01,
    },
    TrainingReference {
        activation: "relu",
        batch_size: 100,
        epochs: 100,
        gradient: 0.097,
        momentum: 0.95,
        weight_decay: 0.01,
        accuracy: 95.5,
        learning_rate: 0.001,
        training_loss: 0.55,
        validation_loss: 0.25,
    },
    TrainingReference {
        activation: "leakyrelu",
        batch_size: 100,
        epochs: 100,
        gradient: 0.041,
        momentum: 0.92,
        weight_decay: 0.01,
        accuracy: 97.1,
        learning_rate: 0.001,
        training_loss: 0.31,
        validation_loss: 0.10,
    },
    TrainingReference {
        activation: "tanh",
        batch_size: 100,
        epochs: 100,
        gradient: 0.011,
        momentum: 0.97,
        weight_decay: 0.01,
        accuracy: 98.8,
        learning_rate: 0.002,
        training_loss: 0.22,
        validation_loss: 0.09,
    },
];
