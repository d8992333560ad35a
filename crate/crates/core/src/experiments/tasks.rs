//! Single pipeline stages behind the `collect`, `fit`, `eval`, `lqr` and
//! `mpc` commands. Each stage reruns the deterministic stages before it.

use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::arms::{fit_and_score, lqr_swing_up, score, ScoredPredictor};
use super::config::{ExperimentConfig, PendulumSetup, RobotSetup, SystemKind};
use super::output::{trajectories_csv, Manifest, OutputSink};
use super::pendulum::{local_predictor, pendulum_data, plant};
use super::robot::{mpc_run, robot_data, robot_local_predictor};
use crate::datagen::{assemble, save_dataset, ExcitationSpec};
use crate::dynamics::Trajectory;
use crate::edmd::LiftedLinearPredictor;
use crate::error::{Error, Result};
use crate::lifting::{make_dictionary, DictionarySpec};
use crate::metrics::{EvaluationReport, MetricSpec};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

impl Format {
    pub fn ext(&self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

/// Summary of one stage, plus whether a controller run failed.
#[derive(Debug, Clone, Serialize)]
pub struct TaskOutcome {
    pub task: String,
    pub failed: bool,
    pub summary: Value,
    pub manifest: Manifest,
}

/// Everything one stage needs, resolved for either plant.
struct Pipeline {
    system: SystemKind,
    seed: u64,
    resolved: Value,
    excitation: ExcitationSpec,
    dictionary: DictionarySpec,
    fit: crate::edmd::FitOptions,
    metrics: MetricSpec,
    train: Vec<Trajectory>,
    eval: Vec<Trajectory>,
}

impl Pipeline {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        match cfg.system.unwrap_or(SystemKind::Pendulum) {
            SystemKind::Pendulum => {
                let s = PendulumSetup::resolve(cfg)?;
                let data = pendulum_data(&s, &s.excitation, s.split_seed())?;
                Ok(Pipeline {
                    system: SystemKind::Pendulum,
                    seed: s.seed,
                    resolved: serde_json::to_value(&s)?,
                    excitation: s.excitation.clone(),
                    dictionary: s.dictionary.clone(),
                    fit: s.fit,
                    metrics: s.metrics.clone(),
                    train: data.train,
                    eval: data.eval,
                })
            }
            SystemKind::Robot => {
                let s = RobotSetup::resolve(cfg)?;
                let data = robot_data(&s)?;
                Ok(Pipeline {
                    system: SystemKind::Robot,
                    seed: s.seed,
                    resolved: serde_json::to_value(&s)?,
                    excitation: s.excitation.clone(),
                    dictionary: s.dictionary.clone(),
                    fit: s.fit,
                    metrics: s.metrics.clone(),
                    train: data.train,
                    eval: data.eval,
                })
            }
        }
    }

    fn predictor(&self, saved: Option<&Path>) -> Result<ScoredPredictor> {
        match saved {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .map_err(|e| Error::Config(format!("cannot read predictor `{}`: {e}", path.display())))?;
                let p = LiftedLinearPredictor::from_json(&text)?;
                if p.state_dim() != self.train[0].state_dim() {
                    return Err(Error::Config(format!(
                        "predictor `{}` has {} states, the configured system has {}",
                        path.display(),
                        p.state_dim(),
                        self.train[0].state_dim()
                    )));
                }
                score("llp", p, None, &self.eval, &self.metrics)
            }
            None => fit_and_score("llp", &self.dictionary, &self.train, &self.eval, &self.fit, &self.metrics),
        }
    }

    fn finish(&self, sink: OutputSink, task: &str, failed: bool, summary: Value) -> Result<TaskOutcome> {
        let manifest = sink.finish(task, self.seed, &self.resolved)?;
        Ok(TaskOutcome {
            task: task.to_string(),
            failed,
            summary,
            manifest,
        })
    }
}

fn write_trajectories(sink: &mut OutputSink, stem: &str, trajs: &[Trajectory], format: Format) -> Result<()> {
    match format {
        Format::Csv => sink.write(&format!("{stem}.csv"), &trajectories_csv(trajs)),
        Format::Json => sink.write_json(&format!("{stem}.json"), trajs),
    }
}

fn write_metrics(sink: &mut OutputSink, rows: &[(&str, &EvaluationReport)], format: Format) -> Result<()> {
    match format {
        Format::Csv => {
            let mut out = format!("{}\n", EvaluationReport::CSV_HEADER);
            for (name, r) in rows {
                out.push_str(&r.csv_row("eval", name));
                out.push('\n');
            }
            sink.write("metrics.csv", &out)
        }
        Format::Json => {
            let map: serde_json::Map<String, Value> = rows
                .iter()
                .map(|(n, r)| Ok((n.to_string(), serde_json::to_value(r)?)))
                .collect::<Result<_>>()?;
            sink.write_json("metrics.json", &map)
        }
    }
}

/// Generate and split the identification data; the training part is also
/// written lifted, as a snapshot dataset.
pub fn collect_task(cfg: &ExperimentConfig, out: Option<&Path>, format: Format) -> Result<TaskOutcome> {
    let p = Pipeline::new(cfg)?;
    let mut sink = OutputSink::new(out);
    write_trajectories(&mut sink, "train_trajectories", &p.train, format)?;
    write_trajectories(&mut sink, "eval_trajectories", &p.eval, format)?;
    let map = make_dictionary(&p.dictionary)?;
    let ds = assemble(&p.train, &map)?;
    if let Some(dir) = sink.dir() {
        save_dataset(&dir.join("dataset"), &ds, Some(&p.excitation))?;
    }
    let summary = json!({
        "system": p.system,
        "train_trajectories": p.train.len(),
        "eval_trajectories": p.eval.len(),
        "snapshots": ds.len(),
        "lifted_dim": ds.lifted_dim(),
    });
    p.finish(sink, "collect", false, summary)
}

pub fn fit_task(cfg: &ExperimentConfig, out: Option<&Path>, _format: Format) -> Result<TaskOutcome> {
    let p = Pipeline::new(cfg)?;
    let scored = p.predictor(None)?;
    let mut sink = OutputSink::new(out);
    sink.write("predictor.json", &scored.predictor.to_json()?)?;
    let summary = json!({
        "system": p.system,
        "lifted_dim": scored.predictor.lifted_dim(),
        "fit": scored.fit,
    });
    sink.write_json("fit_report.json", &summary)?;
    p.finish(sink, "fit", false, summary)
}

/// Metrics of the fitted (or saved) predictor next to the local one.
pub fn eval_task(cfg: &ExperimentConfig, predictor: Option<&Path>, out: Option<&Path>, format: Format) -> Result<TaskOutcome> {
    let p = Pipeline::new(cfg)?;
    let llp = p.predictor(predictor)?;
    let local = match p.system {
        SystemKind::Pendulum => local_predictor(&PendulumSetup::resolve(cfg)?)?,
        SystemKind::Robot => robot_local_predictor(&RobotSetup::resolve(cfg)?)?,
    };
    let local = score("local", local, None, &p.eval, &p.metrics)?;
    let mut sink = OutputSink::new(out);
    write_metrics(&mut sink, &[("local", &local.evaluation), ("llp", &llp.evaluation)], format)?;
    let summary = json!({
        "system": p.system,
        "llp": super::arms::MetricSummary::from(&llp.evaluation),
        "local": super::arms::MetricSummary::from(&local.evaluation),
    });
    p.finish(sink, "eval", false, summary)
}

fn closed_loop_file(
    sink: &mut OutputSink,
    result: Option<&crate::control::ClosedLoopResult>,
    format: Format,
) -> Result<()> {
    match (result, format) {
        (Some(r), Format::Csv) => sink.write("closed_loop.csv", &r.to_csv()),
        (Some(r), Format::Json) => sink.write_json("closed_loop.json", r),
        (None, _) => Ok(()),
    }
}

/// Pendulum swing-up under LQR on the fitted (or saved) predictor.
pub fn lqr_task(cfg: &ExperimentConfig, predictor: Option<&Path>, out: Option<&Path>, format: Format) -> Result<TaskOutcome> {
    if cfg.system == Some(SystemKind::Robot) {
        return Err(Error::Config("`lqr` runs the pendulum swing-up; use `mpc` for the robot".into()));
    }
    let p = Pipeline::new(cfg)?;
    let setup = PendulumSetup::resolve(cfg)?;
    let llp = p.predictor(predictor)?;
    let outcome = lqr_swing_up(&plant(&setup)?, &llp.predictor, &setup.lqr, &setup.closed_loop)?;
    let mut sink = OutputSink::new(out);
    closed_loop_file(&mut sink, outcome.result.as_ref(), format)?;
    let summary = serde_json::to_value(outcome.summary(&llp))?;
    sink.write_json("summary.json", &summary)?;
    p.finish(sink, "lqr", !outcome.success, summary)
}

/// Robot reference tracking under MPC on the fitted (or saved) predictor.
pub fn mpc_task(cfg: &ExperimentConfig, predictor: Option<&Path>, out: Option<&Path>, format: Format) -> Result<TaskOutcome> {
    if cfg.system != Some(SystemKind::Robot) {
        return Err(Error::Config("`mpc` runs robot tracking; set `system = \"robot\"`".into()));
    }
    let p = Pipeline::new(cfg)?;
    let setup = RobotSetup::resolve(cfg)?;
    let llp = p.predictor(predictor)?;
    let x0 = nalgebra::DVector::from_column_slice(&setup.closed_loop.x0);
    let outcome = mpc_run(&setup, &llp.predictor, &x0)?;
    let mut sink = OutputSink::new(out);
    closed_loop_file(&mut sink, outcome.result.as_ref(), format)?;
    let summary = serde_json::to_value(outcome.summary(&llp))?;
    sink.write_json("summary.json", &summary)?;
    p.finish(sink, "mpc", !outcome.success, summary)
}
