//! Command-line front end: scenario simulation, network training, gain
//! tuning, controller comparison, and one-command reproduction of the
//! bundled study.
//!
//! Exit codes: 0 ok, 1 configuration error, 2 missing artifact (network
//! model or config file path), 3 runtime failure.

mod plot;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use softwrist::config::RunConfig;
use softwrist::error::Error;
use softwrist::neural::{generate_dataset, train, MlpNetwork, TrainingReport};
use softwrist::reference;
use softwrist::sim::{
    metrics_of, run_episode, save_trace_csv, ControllerKind, Direction, Metrics, ReferenceSource,
    Scenario, SimulationTrace,
};
use softwrist::tuning::{history_csv, pso_tune, tuning_cost};

#[derive(Parser)]
#[command(
    name = "softwrist",
    version,
    about = "Tendon-driven soft wrist simulation and control toolkit"
)]
struct Cli {
    /// Configuration file (TOML). Falls back to $SOFTWRIST_CONFIG, then to
    /// built-in defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one closed-loop episode; write trace CSV, metrics, and plots.
    Simulate {
        /// Override the configured controller (smc | pid).
        #[arg(long)]
        controller: Option<String>,
        /// Override the configured direction
        /// (ulnar | radial | flexion | extension).
        #[arg(long)]
        direction: Option<String>,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Generate the kinematic dataset and train the inverse-kinematics
    /// network.
    TrainIk {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Particle-swarm tuning of the sliding-mode gains.
    Tune {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Run both controllers on the configured scenario and compare.
    Compare {
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// One-command reproduction of the bundled comparison table or figure.
    Reproduce {
        /// "smc-vs-pid": metrics table with stored reference values.
        #[arg(long, conflicts_with = "figure")]
        table: Option<String>,
        /// "error-ulnar": tracking-error figure for the ulnar step.
        #[arg(long)]
        figure: Option<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            let code = match err {
                Error::Config(_) | Error::InvalidParameter(_) | Error::LengthMismatch { .. } => 1,
                Error::MissingArtifact { .. } => 2,
                _ => 3,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), Error> {
    let (config, base_dir) = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate {
            controller,
            direction,
            seed,
            out,
        } => {
            let mut config = config;
            if let Some(c) = controller {
                config.scenario.controller = parse_controller(&c)?;
            }
            if let Some(d) = direction {
                config.scenario.direction = parse_direction(&d)?;
            }
            if let Some(s) = seed {
                config.scenario.seed = s;
            }
            cmd_simulate(&config, &base_dir, &out)
        }
        Command::TrainIk { out } => cmd_train_ik(&config, &out),
        Command::Tune { out } => cmd_tune(&config, &out),
        Command::Compare { out } => cmd_compare(&config, &base_dir, &out),
        Command::Reproduce { table, figure, out } => {
            match (table.as_deref(), figure.as_deref()) {
                (Some("smc-vs-pid"), None) => cmd_reproduce_table(&config, &out),
                (None, Some("error-ulnar")) => cmd_reproduce_figure(&config, &out),
                (None, None) => Err(Error::Config(
                    "reproduce needs --table smc-vs-pid or --figure error-ulnar".into(),
                )),
                (Some(t), None) => Err(Error::Config(format!(
                    "unknown table {t:?}; available: smc-vs-pid"
                ))),
                (_, Some(f)) => Err(Error::Config(format!(
                    "unknown figure {f:?}; available: error-ulnar"
                ))),
            }
        }
    }
}

fn parse_controller(value: &str) -> Result<ControllerKind, Error> {
    match value {
        "smc" => Ok(ControllerKind::Smc),
        "pid" => Ok(ControllerKind::Pid),
        other => Err(Error::Config(format!(
            "controller must be smc or pid, got {other:?}"
        ))),
    }
}

fn parse_direction(value: &str) -> Result<Direction, Error> {
    match value {
        "ulnar" => Ok(Direction::Ulnar),
        "radial" => Ok(Direction::Radial),
        "flexion" => Ok(Direction::Flexion),
        "extension" => Ok(Direction::Extension),
        other => Err(Error::Config(format!(
            "direction must be ulnar, radial, flexion, or extension, got {other:?}"
        ))),
    }
}

fn load_config(flag: Option<&Path>) -> Result<(RunConfig, PathBuf), Error> {
    let env_path = std::env::var_os("SOFTWRIST_CONFIG").map(PathBuf::from);
    let path = flag.map(Path::to_path_buf).or(env_path);
    match path {
        Some(p) => {
            if !p.exists() {
                return Err(Error::Config(format!(
                    "configuration file not found: {}",
                    p.display()
                )));
            }
            let config = RunConfig::from_file(&p)?;
            let base = p
                .parent()
                .filter(|d| !d.as_os_str().is_empty())
                .map(Path::to_path_buf)
                .unwrap_or_else(|| PathBuf::from("."));
            Ok((config, base))
        }
        None => Ok((RunConfig::default(), PathBuf::from("."))),
    }
}

// ---------------------------------------------------------------------------
// Output helpers
// ---------------------------------------------------------------------------

fn ensure_dir(path: &Path) -> Result<(), Error> {
    std::fs::create_dir_all(path)?;
    Ok(())
}

fn write_config_echo(config: &RunConfig, out: &Path) -> Result<(), Error> {
    ensure_dir(out)?;
    std::fs::write(out.join("config-echo.toml"), config.to_toml()?)?;
    Ok(())
}

fn fmt_settle(m: &Metrics) -> String {
    match m.settling_time {
        Some(t) => format!("{t:.4}"),
        None => "unsettled".into(),
    }
}

fn metric_block(label: &str, m: &Metrics) -> String {
    format!(
        "[{label}]\nrmse_rad: {:.6e}\nsettling_time_s: {}\nsteady_state_error_rad: {:.6e}\n",
        m.rmse,
        fmt_settle(m),
        m.steady_state_error
    )
}

fn write_plots(out: &Path, traces: &[(&str, &SimulationTrace)]) -> Result<(), Error> {
    ensure_dir(&out.join("plots"))?;
    let error_series: Vec<_> = traces
        .iter()
        .map(|(label, trace)| {
            (
                *label,
                trace
                    .rows
                    .iter()
                    .map(|r| (r.t, r.e[0]))
                    .collect::<Vec<_>>(),
            )
        })
        .collect();
    let series: Vec<plot::Series> = error_series
        .iter()
        .map(|(label, pts)| plot::Series {
            label,
            points: pts,
        })
        .collect();
    std::fs::write(
        out.join("plots/error.svg"),
        plot::line_plot("Tracking error", "t (s)", "e (rad)", &series),
    )?;

    let mut theta_series: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    if let Some((_, first)) = traces.first() {
        theta_series.push((
            "desired".to_string(),
            first.rows.iter().map(|r| (r.t, r.theta_des[0])).collect(),
        ));
    }
    for (label, trace) in traces {
        theta_series.push((
            label.to_string(),
            trace.rows.iter().map(|r| (r.t, r.theta_o[0])).collect(),
        ));
    }
    let series: Vec<plot::Series> = theta_series
        .iter()
        .map(|(label, pts)| plot::Series {
            label,
            points: pts,
        })
        .collect();
    std::fs::write(
        out.join("plots/theta.svg"),
        plot::line_plot("Bending angle", "t (s)", "theta (rad)", &series),
    )?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Commands
// ---------------------------------------------------------------------------

fn cmd_simulate(config: &RunConfig, base_dir: &Path, out: &Path) -> Result<(), Error> {
    let scenario = config.scenario(base_dir)?;
    let trace = run_episode(&scenario)?;
    let metrics = metrics_of(&trace);
    let label = scenario.controller.to_string();

    write_config_echo(config, out)?;
    ensure_dir(&out.join("traces"))?;
    save_trace_csv(&trace, &out.join(format!("traces/{label}.csv")))?;
    write_plots(out, &[(&label, &trace)])?;

    let mut text = String::new();
    text.push_str(&format!(
        "scenario: {:?} {:.1} deg ({} plane), seed {}\n",
        scenario.direction,
        scenario.target.to_degrees(),
        scenario.direction.plane(),
        scenario.seed
    ));
    text.push_str(&metric_block(&label, &metrics));
    text.push_str(&format!(
        "negative_tension_rows: {}\nreference_warning: {}\n",
        trace.meta.negative_tension_rows, trace.meta.reference_warning
    ));
    if let Some(idx) = trace.failed_at {
        text.push_str(&format!("failed_at_row: {idx}\n"));
    }
    std::fs::write(out.join("metrics.txt"), &text)?;
    print!("{text}");
    println!("outputs in {}", out.display());
    Ok(())
}

fn train_network(config: &RunConfig) -> Result<(MlpNetwork, TrainingReport), Error> {
    let model = config.wrist_model()?;
    let dataset = generate_dataset(
        &model,
        config.training.samples,
        config.training.train_fraction,
        config.training.seed,
    )?;
    train(&dataset, &config.training_config())
}

fn write_training_outputs(
    out: &Path,
    net: &MlpNetwork,
    report: &TrainingReport,
) -> Result<PathBuf, Error> {
    ensure_dir(&out.join("models"))?;
    let model_path = out.join("models/ik.json");
    net.save(&model_path)?;
    let mut csv = String::from("epoch,train_loss,val_loss,learning_rate\n");
    for e in &report.epochs {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            e.epoch, e.train_loss, e.val_loss, e.learning_rate
        ));
    }
    std::fs::write(out.join("training_report.csv"), csv)?;
    Ok(model_path)
}

fn cmd_train_ik(config: &RunConfig, out: &Path) -> Result<(), Error> {
    write_config_echo(config, out)?;
    let (net, report) = train_network(config)?;
    let model_path = write_training_outputs(out, &net, &report)?;

    let row = reference::TRAINING_TABLE
        .iter()
        .find(|r| r.activation == format!("{:?}", config.training.activation).to_lowercase());
    println!(
        "trained {} epochs, validation RMSE {:.4e} rad, accuracy {:.2}",
        report.epochs.len(),
        report.val_rmse,
        report.accuracy
    );
    if let Some(r) = row {
        println!(
            "reference ({}): accuracy {:.1}, final learning rate {}",
            r.activation, r.accuracy, r.learning_rate
        );
    }
    println!("model written to {}", model_path.display());
    Ok(())
}

fn cmd_tune(config: &RunConfig, out: &Path) -> Result<(), Error> {
    write_config_echo(config, out)?;
    let scenario = config.tuning_scenario()?;
    let pso = config.pso_config();
    let result = pso_tune(&pso, &scenario)?;

    ensure_dir(&out.join("tuning"))?;
    std::fs::write(out.join("tuning/history.csv"), history_csv(&result))?;
    let baseline = pso.initial.map(|g| {
        tuning_cost(
            &softwrist::control::SmcGains::new(g[0], g[1], g[2]).expect("validated bounds"),
            &scenario,
            pso.weight_error,
            pso.weight_chatter,
        )
    });
    let mut best = String::new();
    best.push_str(&format!(
        "p1 = {}\np2 = {}\np3 = {}\ncost = {}\nevaluations = {}\n",
        result.best_gains.p1,
        result.best_gains.p2,
        result.best_gains.p3,
        result.best_cost,
        result.evaluations
    ));
    if let Some(b) = baseline {
        best.push_str(&format!("baseline_cost = {b}\n"));
    }
    std::fs::write(out.join("tuning/best_gains.toml"), &best)?;
    print!("{best}");
    Ok(())
}

fn compare_with_reference(
    scenario: &Scenario,
) -> Result<(SimulationTrace, SimulationTrace, Metrics, Metrics), Error> {
    let mut smc = scenario.clone();
    smc.controller = ControllerKind::Smc;
    let mut pid = scenario.clone();
    pid.controller = ControllerKind::Pid;
    let smc_trace = run_episode(&smc)?;
    let pid_trace = run_episode(&pid)?;
    let smc_m = metrics_of(&smc_trace);
    let pid_m = metrics_of(&pid_trace);
    Ok((smc_trace, pid_trace, smc_m, pid_m))
}

fn comparison_text(smc: &Metrics, pid: &Metrics) -> String {
    let mut text = String::new();
    text.push_str(&format!(
        "{:<24} {:>14} {:>14} {:>14} {:>14}\n",
        "metric", "smc (run)", "smc (ref)", "pid (run)", "pid (ref)"
    ));
    text.push_str(&format!(
        "{:<24} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}\n",
        "rmse_rad",
        smc.rmse,
        reference::SMC_SIMULATION.rmse,
        pid.rmse,
        reference::PID_SIMULATION.rmse
    ));
    text.push_str(&format!(
        "{:<24} {:>14} {:>14.3} {:>14} {:>14.3}\n",
        "settling_time_s",
        fmt_settle(smc),
        reference::SMC_SIMULATION.settling_time,
        fmt_settle(pid),
        reference::PID_SIMULATION.settling_time
    ));
    text.push_str(&format!(
        "{:<24} {:>14.6e} {:>14.6e} {:>14.6e} {:>14.6e}\n",
        "steady_state_error_rad",
        smc.steady_state_error,
        reference::SMC_SIMULATION.steady_state_error,
        pid.steady_state_error,
        reference::PID_SIMULATION.steady_state_error
    ));
    text.push_str("\nreference rows (other controllers, not implemented here):\n");
    for r in &reference::ALTERNATIVE_CONTROLLERS {
        text.push_str(&format!(
            "  {:<6} rmse {:.2e}  settling {:.2}s  sse {:.2e}\n",
            r.label, r.rmse, r.settling_time, r.steady_state_error
        ));
    }
    let hw = reference::EXPERIMENTAL_SMC;
    text.push_str(&format!(
        "hardware trials ({}): rmse {:.3}  settling {:.1}s  sse {:.3}\n",
        hw.label, hw.rmse, hw.settling_time, hw.steady_state_error
    ));
    text
}

fn cmd_compare(config: &RunConfig, base_dir: &Path, out: &Path) -> Result<(), Error> {
    let scenario = config.scenario(base_dir)?;
    let (smc_trace, pid_trace, smc_m, pid_m) = compare_with_reference(&scenario)?;

    write_config_echo(config, out)?;
    ensure_dir(&out.join("traces"))?;
    save_trace_csv(&smc_trace, &out.join("traces/smc.csv"))?;
    save_trace_csv(&pid_trace, &out.join("traces/pid.csv"))?;
    write_plots(out, &[("smc", &smc_trace), ("pid", &pid_trace)])?;

    let text = comparison_text(&smc_m, &pid_m);
    std::fs::write(out.join("metrics.txt"), &text)?;
    print!("{text}");
    Ok(())
}

/// Scenario used by `reproduce`: the configured scenario with the freshly
/// trained network as the reference source.
fn reproduction_scenario(config: &RunConfig, net: MlpNetwork) -> Result<Scenario, Error> {
    let mut config = config.clone();
    config.scenario.source = "direct".into(); // placeholder; replaced below
    let mut scenario = config.scenario(Path::new("."))?;
    scenario.source = ReferenceSource::Loaded(Box::new(net));
    Ok(scenario)
}

fn cmd_reproduce_table(config: &RunConfig, out: &Path) -> Result<(), Error> {
    write_config_echo(config, out)?;
    let (net, report) = train_network(config)?;
    write_training_outputs(out, &net, &report)?;
    let scenario = reproduction_scenario(config, net)?;
    let (smc_trace, pid_trace, smc_m, pid_m) = compare_with_reference(&scenario)?;

    ensure_dir(&out.join("traces"))?;
    save_trace_csv(&smc_trace, &out.join("traces/smc.csv"))?;
    save_trace_csv(&pid_trace, &out.join("traces/pid.csv"))?;
    write_plots(out, &[("smc", &smc_trace), ("pid", &pid_trace)])?;

    let text = comparison_text(&smc_m, &pid_m);
    std::fs::write(out.join("metrics.txt"), &text)?;
    print!("{text}");
    Ok(())
}

fn cmd_reproduce_figure(config: &RunConfig, out: &Path) -> Result<(), Error> {
    write_config_echo(config, out)?;
    let (net, report) = train_network(config)?;
    write_training_outputs(out, &net, &report)?;
    let mut scenario = reproduction_scenario(config, net)?;
    scenario.controller = ControllerKind::Smc;
    scenario.direction = Direction::Ulnar;
    let trace = run_episode(&scenario)?;
    let metrics = metrics_of(&trace);

    ensure_dir(&out.join("traces"))?;
    save_trace_csv(&trace, &out.join("traces/smc.csv"))?;
    write_plots(out, &[("smc", &trace)])?;
    let mut text = metric_block("smc", &metrics);
    text.push_str(&format!(
        "reference: rmse {:.2e} rad, settling {:.1} s, sse {:.2e} rad\n",
        reference::SMC_SIMULATION.rmse,
        reference::SMC_SIMULATION.settling_time,
        reference::SMC_SIMULATION.steady_state_error
    ));
    std::fs::write(out.join("metrics.txt"), &text)?;
    print!("{text}");
    println!("figure written to {}", out.join("plots/error.svg").display());
    Ok(())
}
