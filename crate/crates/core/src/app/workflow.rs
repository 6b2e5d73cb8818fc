//! Train / test / estimate / scenario workflows.
//!
//! Output layout of `train` (under `out`):
//!
//! ```text
//! chains/<var>.csv     global chains (fade law, k1..k7, γ ω φ, δ)
//! parameters.csv       posterior summaries of the globals
//! latents.csv          posterior summaries of every unit latent
//! split.csv            id,set  (train | test)
//! fit.csv              id,measured,mean,sd,ci_low,ci_high on the training units
//! metrics.csv          r2,rmsd_pct,n
//! pdf/<var>.csv        fitted density of each global
//! run.toml             the resolved configuration
//! ```
//!
//! `test` writes `test/predictions.csv` and `test/metrics.csv`; `estimate`
//! writes `estimate/`; `scenario` writes one directory per case plus
//! `scenario/cases.csv`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::config::{CaseSpec, RunConfig};
use super::io::{
    chain_file_name, load_time_series, load_training_set, read_chain, read_table, write_chain,
    write_pdf_curve, write_summary, write_table, SummaryRow, TrainingRecord,
};
use super::schedule::{load_schedule, LoadedSchedule};
use super::split::{split, SplitMode};
use super::AppError;
use crate::dist::Family;
use crate::model::{
    deterministic_latents, Duty, GridPowers, LatentKind, LatentState, ModelConfig, Network,
    Observation, ObservationSet, ParamKind, ParameterSet, Replay, TuningDefaults, VarId,
};
use crate::posterior::{metrics, pdf_curve, summarize, FitMetrics, PosteriorSummary};
use crate::sampler::{init_state, run_mcmc, Chain, ChainSet, SamplerConfig};
use crate::scenario::{
    compose_profile, scenario_observation, scenario_parameters, task_shares, ComposedProfile, Task,
    TaskShares, VehicleSpec,
};

/// Cell-level watts per C at the nominal voltage, used to express cycler
/// current as an L2-slot power.
const LAB_WATTS_PER_C: f64 = 3.3 * 2.3;
const PDF_POINTS: usize = 200;

/// One (cell, Ah checkpoint) pair, the training unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CyclingPoint {
    pub id: String,
    pub cell_id: String,
    pub temp_c: f64,
    pub c_rate: f64,
    /// SOC fractions.
    pub soc_avg: f64,
    pub soc_min: f64,
    pub soc_max: f64,
    pub ah: f64,
    pub fade: Vec<f64>,
}

impl CyclingPoint {
    pub fn mean_fade(&self) -> f64 {
        self.fade.iter().sum::<f64>() / self.fade.len() as f64
    }
}

pub fn cycling_points(records: &[TrainingRecord]) -> Vec<CyclingPoint> {
    records
        .iter()
        .flat_map(|r| {
            r.points.iter().map(move |p| CyclingPoint {
                id: format!("{}@{}", r.cell_id, p.ah),
                cell_id: r.cell_id.clone(),
                temp_c: r.temp_c,
                c_rate: r.c_rate,
                soc_avg: r.soc_avg / 100.0,
                soc_min: r.soc_min / 100.0,
                soc_max: r.soc_max / 100.0,
                ah: p.ah,
                fade: p.fade_pct.clone(),
            })
        })
        .collect()
}

/// Lab cells: no driving branch, one cell per "pack", the cycler current as
/// an L2-slot power and a constant-current duty over the SOC window.
pub fn cycling_observation(p: &CyclingPoint) -> Observation {
    let mut grid_powers = GridPowers::default();
    grid_powers.set(Task::ChargeL2.coefficient(), p.c_rate * LAB_WATTS_PER_C);
    Observation {
        id: p.id.clone(),
        fade: p.fade.clone(),
        temperature: vec![p.temp_c + 273.15],
        accel: Vec::new(),
        velocity: Vec::new(),
        grid_powers,
        duty: Duty::cycling(p.c_rate, p.soc_min, p.soc_max, p.soc_avg, p.ah),
        cells: 1.0,
        aux_reference_power: 0.0,
    }
}

pub fn cycling_observations(points: &[CyclingPoint]) -> ObservationSet {
    ObservationSet::new(points.iter().map(cycling_observation).collect())
}

/// Sampler settings shared by every workflow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitSettings {
    pub iterations: usize,
    pub burn_in: f64,
    pub thinning: usize,
    pub seed: u64,
    pub model: ModelConfig,
    pub tuning: TuningDefaults,
}

impl FitSettings {
    pub fn new(iterations: usize, seed: u64) -> Self {
        Self {
            iterations,
            burn_in: 0.2,
            thinning: 1,
            seed,
            model: ModelConfig::default(),
            tuning: TuningDefaults::default(),
        }
    }

    pub fn from_config(cfg: &RunConfig, seed: u64) -> Self {
        Self {
            iterations: cfg.sampler.iterations,
            burn_in: cfg.sampler.burn_in,
            thinning: cfg.sampler.thinning,
            seed,
            model: cfg.model.clone(),
            tuning: cfg.tuning.clone(),
        }
    }
}

fn sample(mut net: Network<'_>, settings: &FitSettings) -> Result<ChainSet, AppError> {
    let tuning = net.default_tuning(&settings.tuning);
    let cfg = SamplerConfig {
        iterations: settings.iterations,
        burn_in_fraction: settings.burn_in,
        thinning: settings.thinning,
        ..SamplerConfig::new(settings.iterations, settings.seed)
    }
    .with_tuning(tuning);
    Ok(run_mcmc(&mut net, &cfg)?)
}

/// Calibrates the network on cycling observations.
pub fn fit(data: &ObservationSet, settings: &FitSettings) -> Result<ChainSet, AppError> {
    let shares = TaskShares::single(Task::ChargeL2);
    let (state, params) = init_state(data, &VehicleSpec::default(), &shares, &settings.model)?;
    let priors = settings.model.priors.resolve(&params);
    let net = Network::new(data, &settings.model, state, params, priors)?;
    sample(net, settings)
}

fn global_names() -> Vec<String> {
    ParamKind::all()
        .into_iter()
        .map(|p| VarId::Param(p).to_string())
        .chain(std::iter::once(VarId::Efficiency.to_string()))
        .collect()
}

/// Global chains of a calibrated network.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub chains: Vec<Chain>,
}

impl TrainedModel {
    pub fn from_chains(set: &ChainSet) -> Result<Self, AppError> {
        let chains = global_names()
            .iter()
            .map(|name| {
                set.get(name)
                    .cloned()
                    .ok_or_else(|| AppError::Config(format!("chain set has no global '{name}'")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Self { chains })
    }

    pub fn save(&self, dir: &Path) -> Result<(), AppError> {
        for c in &self.chains {
            write_chain(&dir.join(chain_file_name(&c.variable)), c)?;
        }
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, AppError> {
        let mut chains = Vec::new();
        for name in global_names() {
            let path = dir.join(chain_file_name(&name));
            if !path.exists() {
                return Err(AppError::MissingTrained(dir.to_path_buf()));
            }
            chains.push(read_chain(&path)?);
        }
        Ok(Self { chains })
    }

    fn chain(&self, var: VarId) -> &Chain {
        let name = var.to_string();
        self.chains.iter().find(|c| c.variable == name).expect("every global has a chain")
    }

    pub fn mean(&self, var: VarId) -> f64 {
        let s = self.chain(var).post_burn_in();
        s.iter().sum::<f64>() / s.len().max(1) as f64
    }

    pub fn mean_params(&self) -> ParameterSet {
        let mut p = ParameterSet {
            alpha: 0.0,
            beta: 0.0,
            activation_energy: 0.0,
            eta: 0.0,
            zeta: 0.0,
            epsilon: 0.0,
            k: [0.0; 7],
            mass: 0.0,
            aero: 0.0,
            rolling: 0.0,
        };
        for kind in ParamKind::all() {
            p.set(kind, self.mean(VarId::Param(kind)));
        }
        p
    }

    /// Post-burn-in samples of `vars` for replay.
    pub fn replay(&self, vars: &[VarId]) -> Replay {
        Replay {
            series: vars.iter().map(|v| (*v, self.chain(*v).post_burn_in().to_vec())).collect(),
        }
    }

    pub fn summaries(&self) -> Result<Vec<PosteriorSummary>, AppError> {
        self.chains.iter().map(|c| summarize(c).map_err(AppError::from)).collect()
    }
}

fn all_globals() -> Vec<VarId> {
    ParamKind::all()
        .into_iter()
        .map(VarId::Param)
        .chain(std::iter::once(VarId::Efficiency))
        .collect()
}

fn fade_law_globals() -> Vec<VarId> {
    ParamKind::FADE_LAW.iter().map(|p| VarId::Param(*p)).collect()
}

fn network_with_replay<'a>(
    data: &'a ObservationSet,
    settings: &'a FitSettings,
    params: ParameterSet,
    efficiency: f64,
    replay: Replay,
) -> Result<Network<'a>, AppError> {
    let units = data
        .observations
        .iter()
        .map(|o| deterministic_latents(o, &params, efficiency, &settings.model))
        .collect::<Result<Vec<_>, _>>()?;
    let priors = settings.model.priors.resolve(&params);
    let mut net = Network::new(data, &settings.model, LatentState { units, efficiency }, params, priors)?;
    net.set_replay(replay);
    net.apply_replay(0);
    Ok(net)
}

/// Fade posteriors of held-out units: their measurements are removed and
/// every global replays its trained chain.
pub fn predict(
    trained: &TrainedModel,
    units: &ObservationSet,
    settings: &FitSettings,
) -> Result<Vec<PosteriorSummary>, AppError> {
    let blind = ObservationSet::new(
        units.observations.iter().map(|o| Observation { fade: Vec::new(), ..o.clone() }).collect(),
    );
    let params = trained.mean_params();
    let efficiency = trained.mean(VarId::Efficiency);
    let net = network_with_replay(&blind, settings, params, efficiency, trained.replay(&all_globals()))?;
    let chains = sample(net, settings)?;
    lambda_summaries(&chains, blind.len())
}

fn lambda_summaries(chains: &ChainSet, n: usize) -> Result<Vec<PosteriorSummary>, AppError> {
    (0..n)
        .map(|i| {
            let name = VarId::Latent(i, LatentKind::Lambda).to_string();
            let chain = chains.get(&name).ok_or_else(|| AppError::Config(format!("no chain for {name}")))?;
            Ok(summarize(chain)?)
        })
        .collect()
}

/// A fully loaded duty/climate case.
#[derive(Debug, Clone, PartialEq)]
pub struct CaseInput {
    pub name: String,
    pub schedule: LoadedSchedule,
    pub days: usize,
    /// Ambient temperature samples (°C).
    pub temperature_c: Vec<f64>,
}

pub const DEFAULT_TEMPERATURE_C: f64 = 25.0;

impl CaseInput {
    pub fn from_spec(spec: &CaseSpec) -> Result<Self, AppError> {
        let schedule = load_schedule(&spec.schedule)?.with_overrides(&spec.services);
        let temperature_c = match (&spec.temperature_file, spec.temperature_c) {
            (Some(f), _) => load_time_series(f)?.values,
            (None, t) => vec![t.unwrap_or(DEFAULT_TEMPERATURE_C)],
        };
        Ok(Self { name: spec.name.clone(), schedule, days: spec.days, temperature_c })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaseResult {
    pub name: String,
    pub profile: ComposedProfile,
    pub shares: TaskShares,
    pub fade: PosteriorSummary,
    /// Summaries of the remaining sampled variables.
    pub others: Vec<PosteriorSummary>,
}

/// Fade posterior of one case. The fade law replays its trained chains; task
/// coefficients, vehicle terms and efficiency are sampled around the case's
/// own shares and vehicle.
pub fn run_case(input: &CaseInput, trained: &TrainedModel, settings: &FitSettings) -> Result<CaseResult, AppError> {
    let s = &input.schedule;
    let profile = compose_profile(&s.schedule, &s.vehicle, input.days, &s.pack)?;
    let shares = task_shares(&profile)?;
    let params = scenario_parameters(&trained.mean_params(), &shares, &s.vehicle, settings.model.priors.k_floor);
    let temps: Vec<f64> = input.temperature_c.iter().map(|c| c + 273.15).collect();
    let obs = scenario_observation(&input.name, &profile, &s.schedule, temps, &params, &s.pack, &settings.model)?;
    let data = ObservationSet::new(vec![obs]);
    let efficiency = settings.model.priors.efficiency.mean;
    let net = network_with_replay(&data, settings, params, efficiency, trained.replay(&fade_law_globals()))?;
    let chains = sample(net, settings)?;
    let lambda = VarId::Latent(0, LatentKind::Lambda).to_string();
    let mut fade = None;
    let mut others = Vec::new();
    for c in &chains.chains {
        let summary = summarize(c)?;
        if c.variable == lambda {
            fade = Some(summary);
        } else {
            others.push(summary);
        }
    }
    let fade = fade.ok_or_else(|| AppError::Config("scenario produced no fade chain".into()))?;
    Ok(CaseResult { name: input.name.clone(), profile, shares, fade, others })
}

// ---------------------------------------------------------------------------
// File workflows
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub out: PathBuf,
    pub train_units: usize,
    pub test_units: usize,
    pub metrics: FitMetrics,
    pub parameters: Vec<PosteriorSummary>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub out: PathBuf,
    pub metrics: FitMetrics,
}

pub fn split_points(
    points: &[CyclingPoint],
    ratio: f64,
    mode: SplitMode,
    seed: u64,
) -> Result<(Vec<CyclingPoint>, Vec<CyclingPoint>), AppError> {
    Ok(split(points, ratio, mode, seed, |p: &CyclingPoint| p.mean_fade())?)
}

fn synthetic_note(records_path: &Path) -> Vec<String> {
    vec![format!("source {}", records_path.display())]
}

fn fmt(x: f64) -> String {
    x.to_string()
}

fn write_metrics(path: &Path, m: &FitMetrics) -> Result<(), AppError> {
    write_table(path, &["r2", "rmsd_pct", "n"], &[vec![fmt(m.r2), fmt(m.rmsd_pct), m.n.to_string()]], &[])
}

fn write_predictions(path: &Path, points: &[CyclingPoint], preds: &[PosteriorSummary]) -> Result<(), AppError> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .zip(preds)
        .map(|(p, s)| {
            vec![p.id.clone(), fmt(p.mean_fade()), fmt(s.mean), fmt(s.sd), fmt(s.ci_low), fmt(s.ci_high)]
        })
        .collect();
    write_table(path, &["id", "measured", "mean", "sd", "ci_low", "ci_high"], &rows, &[])
}

fn write_pdf(dir: &Path, s: &PosteriorSummary) -> Result<(), AppError> {
    if let Some(spec) = &s.fitted {
        write_pdf_curve(&dir.join(chain_file_name(&s.variable)), &pdf_curve(spec, PDF_POINTS), &[])?;
    }
    Ok(())
}

fn rows(summaries: &[PosteriorSummary]) -> Vec<SummaryRow> {
    summaries.iter().map(SummaryRow::from).collect()
}

pub fn train(cfg: &RunConfig, seed: u64) -> Result<TrainReport, AppError> {
    cfg.validate()?;
    let data_path = cfg.training_data()?;
    let out = cfg.out_dir()?.to_path_buf();
    let records = load_training_set(data_path)?;
    for w in super::io::monotonicity_warnings(&records) {
        eprintln!("warning: {w}");
    }
    let points = cycling_points(&records);
    let (train_pts, test_pts) = split_points(&points, cfg.split.ratio, cfg.split.mode, seed)?;
    let settings = FitSettings::from_config(cfg, seed);
    let data = cycling_observations(&train_pts);
    let chains = fit(&data, &settings)?;
    let trained = TrainedModel::from_chains(&chains)?;

    trained.save(&out.join("chains"))?;
    let parameters = trained.summaries()?;
    let note = synthetic_note(data_path);
    write_summary(&out.join("parameters.csv"), &rows(&parameters), &note)?;
    for s in &parameters {
        write_pdf(&out.join("pdf"), s)?;
    }
    let globals = global_names();
    let latents = chains
        .chains
        .iter()
        .filter(|c| !globals.contains(&c.variable))
        .map(summarize)
        .collect::<Result<Vec<_>, _>>()?;
    write_summary(&out.join("latents.csv"), &rows(&latents), &note)?;

    let mut split_rows: Vec<Vec<String>> = train_pts.iter().map(|p| vec![p.id.clone(), "train".into()]).collect();
    split_rows.extend(test_pts.iter().map(|p| vec![p.id.clone(), "test".into()]));
    write_table(&out.join("split.csv"), &["id", "set"], &split_rows, &[])?;

    let fitted = lambda_summaries(&chains, data.len())?;
    write_predictions(&out.join("fit.csv"), &train_pts, &fitted)?;
    let measured: Vec<f64> = train_pts.iter().map(CyclingPoint::mean_fade).collect();
    let predicted: Vec<f64> = fitted.iter().map(|s| s.mean).collect();
    let m = metrics(&predicted, &measured)?;
    write_metrics(&out.join("metrics.csv"), &m)?;

    let mut resolved = cfg.clone();
    resolved.seed = Some(seed);
    let text = toml::to_string(&resolved).map_err(|e| AppError::Config(e.to_string()))?;
    let run_path = out.join("run.toml");
    std::fs::write(&run_path, text).map_err(|e| AppError::io(&run_path, e))?;

    Ok(TrainReport { out, train_units: train_pts.len(), test_units: test_pts.len(), metrics: m, parameters })
}

fn load_trained(dir: &Path) -> Result<TrainedModel, AppError> {
    if !dir.join("split.csv").exists() {
        return Err(AppError::MissingTrained(dir.to_path_buf()));
    }
    TrainedModel::load(&dir.join("chains"))
        .map_err(|e| if let AppError::MissingTrained(_) = e { AppError::MissingTrained(dir.to_path_buf()) } else { e })
}

pub fn test(cfg: &RunConfig, seed: u64) -> Result<TestReport, AppError> {
    cfg.validate()?;
    let trained_dir = cfg.trained_dir()?.to_path_buf();
    let trained = load_trained(&trained_dir)?;
    let split_path = trained_dir.join("split.csv");
    let test_ids: Vec<String> = read_table(&split_path, &["id", "set"])?
        .into_iter()
        .filter(|r| r[1] == "test")
        .map(|mut r| r.swap_remove(0))
        .collect();
    let points = cycling_points(&load_training_set(cfg.training_data()?)?);
    let test_pts = test_ids
        .iter()
        .map(|id| {
            points.iter().find(|p| &p.id == id).cloned().ok_or_else(|| {
                AppError::Config(format!("held-out unit '{id}' is not in the training data"))
            })
        })
        .collect::<Result<Vec<_>, _>>()?;
    if test_pts.is_empty() {
        return Err(AppError::Config(format!("{} lists no test units", split_path.display())));
    }
    let settings = FitSettings::from_config(cfg, seed);
    let preds = predict(&trained, &cycling_observations(&test_pts), &settings)?;
    let out = cfg.out_dir()?.join("test");
    write_predictions(&out.join("predictions.csv"), &test_pts, &preds)?;
    let measured: Vec<f64> = test_pts.iter().map(CyclingPoint::mean_fade).collect();
    let predicted: Vec<f64> = preds.iter().map(|s| s.mean).collect();
    let m = metrics(&predicted, &measured)?;
    write_metrics(&out.join("metrics.csv"), &m)?;
    Ok(TestReport { out, metrics: m })
}

fn write_case(dir: &Path, r: &CaseResult) -> Result<(), AppError> {
    let mut summaries = vec![SummaryRow::from(&r.fade)];
    summaries.extend(r.others.iter().map(SummaryRow::from));
    write_summary(&dir.join("summary.csv"), &summaries, &[format!("case {}", r.name)])?;
    if let Some(spec) = &r.fade.fitted {
        write_pdf_curve(&dir.join("pdf_curve.csv"), &pdf_curve(spec, PDF_POINTS), &[])?;
    }
    let rows: Vec<Vec<String>> = Task::ALL
        .iter()
        .map(|t| {
            let i = r.profile.intensity(*t);
            vec![
                t.name().to_string(),
                fmt(r.shares.of(*t)),
                fmt(i.map_or(0.0, |i| i.ah)),
                fmt(i.map_or(0.0, |i| i.c_rate)),
                fmt(i.map_or(0.0, |i| i.dod)),
            ]
        })
        .collect();
    write_table(&dir.join("tasks.csv"), &["task", "ah_share", "ah_per_day", "c_rate", "dod"], &rows, &[])
}

fn case_row(r: &CaseResult) -> Vec<String> {
    vec![r.name.clone(), fmt(r.fade.mean), fmt(r.fade.sd), fmt(r.fade.ci_low), fmt(r.fade.ci_high)]
}

pub fn estimate(cfg: &RunConfig, seed: u64) -> Result<CaseResult, AppError> {
    cfg.validate()?;
    let spec = cfg.estimate.as_ref().ok_or_else(|| AppError::Config("no [estimate] section".into()))?;
    let trained = load_trained(cfg.trained_dir()?)?;
    let settings = FitSettings::from_config(cfg, seed);
    let result = run_case(&CaseInput::from_spec(spec)?, &trained, &settings)?;
    write_case(&cfg.out_dir()?.join("estimate"), &result)?;
    Ok(result)
}

/// Runs every case on its own thread with the same seed, so differences
/// between cases are not sampling noise from different streams.
pub fn scenario(cfg: &RunConfig, seed: u64) -> Result<Vec<CaseResult>, AppError> {
    cfg.validate()?;
    let sweep = cfg.scenario.as_ref().filter(|s| !s.cases.is_empty());
    let sweep = sweep.ok_or_else(|| AppError::Config("no [[scenario.cases]] configured".into()))?;
    let mut names: Vec<&str> = sweep.cases.iter().map(|c| c.name.as_str()).collect();
    names.sort_unstable();
    if names.windows(2).any(|w| w[0] == w[1]) {
        return Err(AppError::Config("scenario case names must be unique".into()));
    }
    let trained = load_trained(cfg.trained_dir()?)?;
    let settings = FitSettings::from_config(cfg, seed);
    let inputs = sweep.cases.iter().map(CaseInput::from_spec).collect::<Result<Vec<_>, _>>()?;
    let results: Vec<Result<CaseResult, AppError>> = std::thread::scope(|scope| {
        let handles: Vec<_> = inputs
            .iter()
            .map(|input| scope.spawn(|| run_case(input, &trained, &settings)))
            .collect();
        handles.into_iter().map(|h| h.join().expect("scenario worker panicked")).collect()
    });
    let results = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    let out = cfg.out_dir()?.join("scenario");
    for r in &results {
        write_case(&out.join(&r.name), r)?;
    }
    let table: Vec<Vec<String>> = results.iter().map(case_row).collect();
    write_table(&out.join("cases.csv"), &["case", "mean", "sd", "ci_low", "ci_high"], &table, &[])?;
    Ok(results)
}

/// Family of a global as written in the summaries.
pub fn global_family(name: &str) -> Option<Family> {
    name.parse::<VarId>().ok().filter(|v| v.is_global()).map(|v| v.family())
}
