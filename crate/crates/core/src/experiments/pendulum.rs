//! Pendulum swing-up: baseline, sampling pathology and dictionary pathology.

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::arms::{fit_and_score, lqr_swing_up, prediction_comparison_csv, score, ArmSummary, ControlOutcome, ScoredPredictor};
use super::config::{ExperimentConfig, PendulumSetup};
use super::output::{trajectories_csv, Manifest, OutputSink};
use crate::datagen::{collect, derive_seed, split, ExcitationSpec, InitialScheme};
use crate::dynamics::{local_linearization, Pendulum, Trajectory};
use crate::edmd::LiftedLinearPredictor;
use crate::error::Result;
use crate::lifting::{DictionaryKind, DictionarySpec};
use crate::metrics::EvaluationReport;

pub(crate) fn plant(setup: &PendulumSetup) -> Result<Pendulum> {
    Pendulum::new(setup.params)
}

/// Collected and split identification data.
pub struct PendulumData {
    pub train: Vec<Trajectory>,
    pub eval: Vec<Trajectory>,
}

pub fn pendulum_data(setup: &PendulumSetup, excitation: &ExcitationSpec, split_seed: u64) -> Result<PendulumData> {
    let trajs = collect(&plant(setup)?, excitation)?;
    let (train, eval) = split(trajs, setup.split.eval_count, split_seed)?;
    Ok(PendulumData { train, eval })
}

pub fn local_predictor(setup: &PendulumSetup) -> Result<LiftedLinearPredictor> {
    let p = plant(setup)?;
    Ok(local_linearization(&p, &DVector::zeros(2), &DVector::zeros(1), setup.closed_loop.dt)?.predictor)
}

fn write_arm(sink: &mut OutputSink, name: &str, scored: &ScoredPredictor, outcome: &ControlOutcome) -> Result<()> {
    if let Some(r) = &outcome.result {
        sink.write(&format!("closed_loop_{name}.csv"), &r.to_csv())?;
    }
    sink.write(&format!("predictor_{name}.json"), &scored.predictor.to_json()?)?;
    Ok(())
}

fn metrics_csv(experiment: &str, rows: &[(&str, &EvaluationReport)]) -> String {
    let mut out = format!("{}\n", EvaluationReport::CSV_HEADER);
    for (name, r) in rows {
        out.push_str(&r.csv_row(experiment, name));
        out.push('\n');
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PendulumBaselineReport {
    pub train_trajectories: usize,
    pub eval_trajectories: usize,
    pub sine: ArmSummary,
    pub local: ArmSummary,
    /// Lifted-predictor LQR cost is no larger than the local one.
    pub sine_cost_not_worse: bool,
}

impl PendulumBaselineReport {
    pub fn reproduced(&self) -> bool {
        self.sine.success && self.local.success && self.sine_cost_not_worse
    }
}

pub fn pendulum_baseline(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<PendulumBaselineReport> {
    let setup = PendulumSetup::resolve(cfg)?;
    let plant = plant(&setup)?;
    let data = pendulum_data(&setup, &setup.excitation, setup.split_seed())?;
    let sine = fit_and_score("sine", &setup.dictionary, &data.train, &data.eval, &setup.fit, &setup.metrics)?;
    let local = score("local", local_predictor(&setup)?, None, &data.eval, &setup.metrics)?;

    let (sine_ctl, local_ctl) = rayon::join(
        || lqr_swing_up(&plant, &sine.predictor, &setup.lqr, &setup.closed_loop),
        || lqr_swing_up(&plant, &local.predictor, &setup.lqr, &setup.closed_loop),
    );
    let (sine_ctl, local_ctl) = (sine_ctl?, local_ctl?);

    let sine_cost_not_worse = match (sine_ctl.cost, local_ctl.cost) {
        (Some(a), Some(b)) => a <= b,
        _ => false,
    };
    let report = PendulumBaselineReport {
        train_trajectories: data.train.len(),
        eval_trajectories: data.eval.len(),
        sine: sine_ctl.summary(&sine),
        local: local_ctl.summary(&local),
        sine_cost_not_worse,
    };

    sink.write("training_trajectories.csv", &trajectories_csv(&data.train))?;
    write_arm(sink, "sine", &sine, &sine_ctl)?;
    write_arm(sink, "local", &local, &local_ctl)?;
    sink.write(
        "metrics.csv",
        &metrics_csv("pendulum-baseline", &[("local", &local.evaluation), ("sine", &sine.evaluation)]),
    )?;
    sink.write_json("report.json", &report)?;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SchemeArm {
    pub scheme: InitialScheme,
    pub arm: ArmSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologyDataReport {
    pub seed: u64,
    pub arms: Vec<SchemeArm>,
}

impl PathologyDataReport {
    pub fn success(&self, scheme: InitialScheme) -> bool {
        self.arms.iter().any(|a| a.scheme == scheme && a.arm.success)
    }

    /// Only the near-stable scheme swings up.
    pub fn reproduced(&self) -> bool {
        self.success(InitialScheme::NearStable)
            && !self.success(InitialScheme::NearUnstable)
            && !self.success(InitialScheme::UniformAngle)
    }
}

struct SchemeRun {
    scheme: InitialScheme,
    data: PendulumData,
    scored: ScoredPredictor,
    outcome: ControlOutcome,
}

fn scheme_run(setup: &PendulumSetup, scheme: InitialScheme) -> Result<SchemeRun> {
    let label = format!("pendulum/pathology-data/{}", scheme.as_str());
    let excitation = ExcitationSpec {
        seed: derive_seed(setup.seed, &format!("{label}/collect")),
        ..ExcitationSpec {
            count: setup.excitation.count,
            length_s: setup.excitation.length_s,
            dt: setup.excitation.dt,
            perturbation: setup.excitation.perturbation,
            ..ExcitationSpec::pendulum_open_loop(scheme)
        }
    };
    let data = pendulum_data(setup, &excitation, derive_seed(setup.seed, &format!("{label}/split")))?;
    let scored = fit_and_score(
        scheme.as_str(),
        &setup.dictionary,
        &data.train,
        &data.eval,
        &setup.fit,
        &setup.metrics,
    )?;
    let outcome = lqr_swing_up(&plant(setup)?, &scored.predictor, &setup.lqr, &setup.closed_loop)?;
    Ok(SchemeRun {
        scheme,
        data,
        scored,
        outcome,
    })
}

pub fn pendulum_pathology_data(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<PathologyDataReport> {
    let setup = PendulumSetup::resolve(cfg)?;
    let runs: Vec<SchemeRun> = InitialScheme::ALL
        .par_iter()
        .map(|&s| scheme_run(&setup, s))
        .collect::<Result<_>>()?;
    let report = PathologyDataReport {
        seed: setup.seed,
        arms: runs
            .iter()
            .map(|r| SchemeArm {
                scheme: r.scheme,
                arm: r.outcome.summary(&r.scored),
            })
            .collect(),
    };
    for r in &runs {
        let name = r.scheme.as_str().replace('-', "_");
        sink.write(&format!("data_{name}.csv"), &trajectories_csv(&r.data.train))?;
        write_arm(sink, &name, &r.scored, &r.outcome)?;
    }
    sink.write_json("report.json", &report)?;
    Ok(report)
}

/// Per-scheme success counts over several master seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologyDataMajority {
    pub seeds: Vec<u64>,
    pub reports: Vec<PathologyDataReport>,
    pub successes: Vec<(InitialScheme, usize)>,
}

impl PathologyDataMajority {
    pub fn majority_success(&self, scheme: InitialScheme) -> bool {
        let wins = self.successes.iter().find(|(s, _)| *s == scheme).map_or(0, |s| s.1);
        2 * wins > self.seeds.len()
    }

    pub fn reproduced(&self) -> bool {
        self.majority_success(InitialScheme::NearStable)
            && !self.majority_success(InitialScheme::NearUnstable)
            && !self.majority_success(InitialScheme::UniformAngle)
    }
}

pub fn pendulum_pathology_data_majority(cfg: &ExperimentConfig, seeds: &[u64]) -> Result<PathologyDataMajority> {
    let reports: Vec<PathologyDataReport> = seeds
        .iter()
        .map(|&seed| {
            let cfg = ExperimentConfig {
                seed: Some(seed),
                ..cfg.clone()
            };
            pendulum_pathology_data(&cfg, &mut OutputSink::new(None))
        })
        .collect::<Result<_>>()?;
    let successes = InitialScheme::ALL
        .iter()
        .map(|&s| (s, reports.iter().filter(|r| r.success(s)).count()))
        .collect();
    Ok(PathologyDataMajority {
        seeds: seeds.to_vec(),
        reports,
        successes,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DictionaryCheck {
    pub dictionary: String,
    pub projected_below_local: bool,
    pub lifted_above_sine: bool,
    /// Fails to swing up, or costs more than the sine predictor.
    pub control_worse_than_sine: bool,
}

impl DictionaryCheck {
    pub fn holds(&self) -> bool {
        self.projected_below_local && self.lifted_above_sine && self.control_worse_than_sine
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathologyLiftingReport {
    /// `local`, `sine`, then the large dictionaries.
    pub arms: Vec<ArmSummary>,
    pub checks: Vec<DictionaryCheck>,
}

impl PathologyLiftingReport {
    pub fn reproduced(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(DictionaryCheck::holds)
    }
}

pub const LARGE_DICTIONARIES: [DictionaryKind; 3] = [DictionaryKind::Tps, DictionaryKind::Poly, DictionaryKind::Gauss];

pub fn pendulum_pathology_lifting(cfg: &ExperimentConfig, sink: &mut OutputSink) -> Result<PathologyLiftingReport> {
    let setup = PendulumSetup::resolve(cfg)?;
    let plant = plant(&setup)?;
    let data = pendulum_data(&setup, &setup.excitation, setup.split_seed())?;

    let mut specs: Vec<(String, Option<DictionarySpec>)> = vec![
        ("local".into(), None),
        ("sine".into(), Some(setup.dictionary.clone())),
    ];
    for kind in LARGE_DICTIONARIES {
        let spec = DictionarySpec {
            seed: derive_seed(setup.seed, &format!("pendulum/dictionary/{kind}")),
            center_range: setup.lifting.center_range,
            width_range: setup.lifting.width_range,
            ..DictionarySpec::pendulum(kind, setup.lifting.count)
        };
        specs.push((kind.to_string(), Some(spec)));
    }

    let arms: Vec<(ScoredPredictor, ControlOutcome)> = specs
        .par_iter()
        .map(|(name, spec)| {
            let scored = match spec {
                None => score(name, local_predictor(&setup)?, None, &data.eval, &setup.metrics)?,
                Some(d) => {
                    let fit = if d.kind == DictionaryKind::Sine { &setup.fit } else { &setup.lifting.fit };
                    fit_and_score(name, d, &data.train, &data.eval, fit, &setup.metrics)?
                }
            };
            let outcome = lqr_swing_up(&plant, &scored.predictor, &setup.lqr, &setup.closed_loop)?;
            Ok((scored, outcome))
        })
        .collect::<Result<_>>()?;

    let local = &arms[0].0.evaluation;
    let (sine_eval, sine_ctl) = (&arms[1].0.evaluation, &arms[1].1);
    let checks = arms[2..]
        .iter()
        .map(|(s, c)| DictionaryCheck {
            dictionary: s.name.clone(),
            projected_below_local: s.evaluation.projected < local.projected,
            lifted_above_sine: s.evaluation.lifted > sine_eval.lifted,
            control_worse_than_sine: !c.success
                || match (c.cost, sine_ctl.cost) {
                    (Some(a), Some(b)) => a > b,
                    _ => true,
                },
        })
        .collect();
    let report = PathologyLiftingReport {
        arms: arms.iter().map(|(s, c)| c.summary(s)).collect(),
        checks,
    };

    let rows: Vec<(&str, &EvaluationReport)> = arms.iter().map(|(s, _)| (s.name.as_str(), &s.evaluation)).collect();
    sink.write("metrics.csv", &metrics_csv("pendulum-pathology-lifting", &rows))?;
    let mut log_csv = String::from("dictionary,log10_eps_projected,log10_eps_lifted,log10_eps_prediction\n");
    for (name, r) in &rows {
        log_csv.push_str(&format!(
            "{name},{},{},{}\n",
            r.projected.log10(),
            r.lifted.log10(),
            r.prediction.log10()
        ));
    }
    sink.write("metrics_log10.csv", &log_csv)?;
    let scored: Vec<&ScoredPredictor> = arms.iter().map(|(s, _)| s).collect();
    if let Some(first) = data.eval.first() {
        sink.write(
            "prediction_comparison.csv",
            &prediction_comparison_csv(first, &scored, setup.metrics.horizon)?,
        )?;
    }
    for (s, c) in &arms {
        write_arm(sink, &s.name, s, c)?;
    }
    sink.write_json("report.json", &report)?;
    Ok(report)
}

/// Runs an experiment and writes its manifest.
pub(crate) fn finish_pendulum(sink: OutputSink, name: &str, cfg: &ExperimentConfig) -> Result<Manifest> {
    let setup = PendulumSetup::resolve(cfg)?;
    sink.finish(name, setup.seed, &setup)
}
