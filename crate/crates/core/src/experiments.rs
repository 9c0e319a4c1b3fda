//! Monte Carlo sweeps over one scenario parameter.
//!
//! Every trial draws one channel and one noisy observation, then runs every
//! selected estimator on that same observation. Trial `t` uses RNG stream `t`
//! of the scenario seed for every sweep value, so neighbouring sweep points
//! share their random draws as far as the scenario allows. Trials run in
//! parallel and are aggregated in trial order, so results do not depend on
//! scheduling.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{
    generate_channel, observe, reconstruct_channel, stream_rng, ChannelMatrix, ChannelScenario,
    Observation,
};
use crate::error::{Error, Result};
use crate::estimators::{
    run_esbl, run_least_squares, run_mesbl, run_sbl, ConvergencePolicy, ESblHyper, EstimateReport,
    SblHyper,
};
use crate::numerics::DictionaryKron;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EstimatorKind {
    Esbl,
    Ls,
    Mesbl,
    Sbl,
}

impl EstimatorKind {
    pub const ALL: [EstimatorKind; 4] = [
        EstimatorKind::Esbl,
        EstimatorKind::Ls,
        EstimatorKind::Mesbl,
        EstimatorKind::Sbl,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorKind::Esbl => "esbl",
            EstimatorKind::Ls => "ls",
            EstimatorKind::Mesbl => "mesbl",
            EstimatorKind::Sbl => "sbl",
        }
    }

    pub fn run(
        &self,
        dict: &DictionaryKron,
        z: &[Complex64],
        sigma2: f64,
        hypers: &Hypers,
        policy: &ConvergencePolicy,
    ) -> Result<EstimateReport> {
        match self {
            EstimatorKind::Sbl => run_sbl(dict, z, sigma2, &hypers.sbl, policy),
            EstimatorKind::Esbl => run_esbl(dict, z, sigma2, &hypers.esbl, policy),
            EstimatorKind::Mesbl => run_mesbl(dict, z, sigma2, &hypers.esbl, policy),
            EstimatorKind::Ls => run_least_squares(dict, z, sigma2),
        }
    }
}

impl fmt::Display for EstimatorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.name())
    }
}

impl FromStr for EstimatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        EstimatorKind::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown estimator `{s}` (expected esbl, ls, mesbl or sbl)")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepVariable {
    SnrDb,
    PilotLength,
    NumAntennas,
    NumScatterers,
}

impl SweepVariable {
    pub fn name(&self) -> &'static str {
        match self {
            SweepVariable::SnrDb => "snr_db",
            SweepVariable::PilotLength => "pilot_length",
            SweepVariable::NumAntennas => "num_antennas",
            SweepVariable::NumScatterers => "num_scatterers",
        }
    }

    fn is_count(&self) -> bool {
        !matches!(self, SweepVariable::SnrDb)
    }
}

impl FromStr for SweepVariable {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            SweepVariable::SnrDb,
            SweepVariable::PilotLength,
            SweepVariable::NumAntennas,
            SweepVariable::NumScatterers,
        ]
        .into_iter()
        .find(|v| v.name() == s)
        .ok_or_else(|| Error::Config(format!("unknown sweep variable `{s}`")))
    }
}

/// How per-trial errors are averaged into one NMSE figure.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NmseMode {
    /// `Σ‖Ĥ − H‖² / Σ‖H‖²`.
    #[default]
    RatioOfMeans,
    /// `mean(‖Ĥ − H‖² / ‖H‖²)`.
    MeanOfRatios,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Hypers {
    pub sbl: SblHyper,
    pub esbl: ESblHyper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base_scenario: ChannelScenario,
    pub sweep_variable: SweepVariable,
    pub sweep_values: Vec<f64>,
    pub estimators: Vec<EstimatorKind>,
    pub num_trials: usize,
    pub hypers: Hypers,
    pub policy: ConvergencePolicy,
    pub nmse_mode: NmseMode,
    /// Measure wall time. Off by default so that output is reproducible byte
    /// for byte; the wall-time column is then zero.
    pub record_timing: bool,
}

impl SweepSpec {
    pub fn new(
        base_scenario: ChannelScenario,
        sweep_variable: SweepVariable,
        sweep_values: Vec<f64>,
        estimators: Vec<EstimatorKind>,
        num_trials: usize,
    ) -> Self {
        Self {
            base_scenario,
            sweep_variable,
            sweep_values,
            estimators,
            num_trials,
            hypers: Hypers::default(),
            policy: ConvergencePolicy::default(),
            nmse_mode: NmseMode::default(),
            record_timing: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sweep_values.is_empty() {
            return Err(Error::Config("sweep.values must not be empty".into()));
        }
        if self.sweep_values.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::Config("sweep.values must be strictly increasing".into()));
        }
        if self.num_trials == 0 {
            return Err(Error::Config("sweep.trials must be at least 1".into()));
        }
        self.hypers.sbl.validate()?;
        self.hypers.esbl.validate()?;
        self.policy.validate()?;
        for &v in &self.sweep_values {
            self.scenario_for(v)?.validate()?;
        }
        Ok(())
    }

    /// Base scenario with the swept parameter set to `value`.
    pub fn scenario_for(&self, value: f64) -> Result<ChannelScenario> {
        let mut s = self.base_scenario.clone();
        if self.sweep_variable.is_count() && (value < 1.0 || value.fract() != 0.0) {
            return Err(Error::Config(format!(
                "sweep value {value} for {} must be a positive integer",
                self.sweep_variable.name()
            )));
        }
        match self.sweep_variable {
            SweepVariable::SnrDb => s.snr_db = value,
            SweepVariable::PilotLength => s.pilot_length = value as usize,
            SweepVariable::NumAntennas => {
                s.num_antennas = value as usize;
                s.transform_size = None;
            }
            SweepVariable::NumScatterers => s.num_scatterers = value as usize,
        }
        if s.noise_variance() <= 0.0 {
            return Err(Error::Config(format!(
                "snr_db = {} gives zero noise variance; estimators need a finite SNR",
                s.snr_db
            )));
        }
        Ok(s)
    }

    fn sorted_estimators(&self) -> Vec<EstimatorKind> {
        let mut e = self.estimators.clone();
        e.sort();
        e.dedup();
        e
    }
}

/// The channel and observation shared by all estimators in one trial.
pub fn trial_inputs(scenario: &ChannelScenario, trial: usize) -> Result<(ChannelMatrix, Observation)> {
    let mut rng = stream_rng(scenario.seed, trial as u64);
    let (h, _) = generate_channel(scenario, &mut rng)?;
    let pilot = crate::channel::dft_pilot(scenario.num_users, scenario.pilot_length)?;
    let obs = observe(&h, &pilot, scenario.snr_db, &mut rng)?;
    Ok((h, obs))
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorOutcome {
    /// `‖Ĥ − H‖²_F`.
    pub error_energy: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_time: f64,
}

/// Per-trial outcomes, one entry per estimator (in alphabetical order).
#[derive(Debug, Clone, PartialEq)]
pub struct TrialRecord {
    pub trial: usize,
    /// `‖H‖²_F`.
    pub channel_energy: f64,
    pub outcomes: Vec<(EstimatorKind, std::result::Result<EstimatorOutcome, String>)>,
}

/// Runs every estimator in `estimators` on one trial.
pub fn run_trial(
    scenario: &ChannelScenario,
    dict: &DictionaryKron,
    trial: usize,
    estimators: &[EstimatorKind],
    hypers: &Hypers,
    policy: &ConvergencePolicy,
) -> Result<TrialRecord> {
    let (h, obs) = trial_inputs(scenario, trial)?;
    let sigma2 = obs.noise_variance;
    let outcomes = estimators
        .iter()
        .map(|&kind| {
            let outcome = kind
                .run(dict, &obs.z, sigma2, hypers, policy)
                .and_then(|report| {
                    let h_hat = reconstruct_channel(
                        &report.u_hat,
                        dict.transform(),
                        scenario.num_antennas,
                        scenario.num_users,
                    )?;
                    let err = h_hat
                        .as_slice()
                        .iter()
                        .zip(h.as_slice())
                        .map(|(a, b)| (a - b).norm_sqr())
                        .sum();
                    Ok(EstimatorOutcome {
                        error_energy: err,
                        iterations: report.iterations,
                        converged: report.converged,
                        wall_time: report.wall_time,
                    })
                })
                .map_err(|e| e.to_string());
            (kind, outcome)
        })
        .collect();
    Ok(TrialRecord {
        trial,
        channel_energy: h.frobenius_norm_sqr(),
        outcomes,
    })
}

/// NMSE over a batch of `(estimate, truth)` pairs: `Σ‖Ĥ − H‖²_F / Σ‖H‖²_F`.
pub fn nmse(estimates: &[ChannelMatrix], truths: &[ChannelMatrix]) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::Config("nmse of an empty batch".into()));
    }
    if estimates.len() != truths.len() {
        return Err(Error::shape("nmse batch", truths.len(), estimates.len()));
    }
    let mut num = 0.0;
    let mut den = 0.0;
    for (e, t) in estimates.iter().zip(truths) {
        if e.shape() != t.shape() {
            return Err(Error::shape("nmse matrix", format!("{:?}", t.shape()), format!("{:?}", e.shape())));
        }
        num += e
            .as_slice()
            .iter()
            .zip(t.as_slice())
            .map(|(a, b)| (a - b).norm_sqr())
            .sum::<f64>();
        den += t.frobenius_norm_sqr();
    }
    Ok(num / den)
}

/// Mean and standard error of NMSE from per-trial `(error, channel)` energies.
///
/// Ratio-of-means uses the delta-method standard error of `Σe/Σh`.
pub fn nmse_summary(pairs: &[(f64, f64)], mode: NmseMode) -> (f64, f64) {
    let n = pairs.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let nf = n as f64;
    match mode {
        NmseMode::RatioOfMeans => {
            let se: f64 = pairs.iter().map(|p| p.0).sum();
            let sh: f64 = pairs.iter().map(|p| p.1).sum();
            let ratio = se / sh;
            if n < 2 {
                return (ratio, 0.0);
            }
            let resid: f64 = pairs.iter().map(|(e, h)| (e - ratio * h).powi(2)).sum();
            let mean_h = sh / nf;
            (ratio, (resid / (nf * (nf - 1.0))).sqrt() / mean_h)
        }
        NmseMode::MeanOfRatios => {
            let ratios: Vec<f64> = pairs.iter().map(|(e, h)| e / h).collect();
            let mean = ratios.iter().sum::<f64>() / nf;
            if n < 2 {
                return (mean, 0.0);
            }
            let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (nf - 1.0);
            (mean, (var / nf).sqrt())
        }
    }
}

/// Aggregates for one (sweep value, estimator) pair.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub value: f64,
    pub estimator: EstimatorKind,
    pub nmse_mean: f64,
    pub nmse_stderr: f64,
    pub iters_mean: f64,
    pub walltime_mean: f64,
    /// Successful trials.
    pub trials: usize,
    /// Trials excluded because the estimator failed.
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub sweep_variable: SweepVariable,
    /// Value-major, estimators alphabetical within a value.
    pub cells: Vec<SweepCell>,
}

impl SweepResult {
    pub fn cell(&self, value: f64, estimator: EstimatorKind) -> Option<&SweepCell> {
        self.cells
            .iter()
            .find(|c| c.value == value && c.estimator == estimator)
    }

    pub fn total_failed(&self) -> usize {
        self.cells.iter().map(|c| c.failed).sum()
    }
}

/// All per-trial records for one sweep value.
pub fn run_value_trials(spec: &SweepSpec, value: f64) -> Result<Vec<TrialRecord>> {
    let scenario = spec.scenario_for(value)?;
    let dict = scenario.dictionary()?;
    let estimators = spec.sorted_estimators();
    (0..spec.num_trials)
        .into_par_iter()
        .map(|t| run_trial(&scenario, &dict, t, &estimators, &spec.hypers, &spec.policy))
        .collect()
}

pub fn aggregate(spec: &SweepSpec, value: f64, records: &[TrialRecord]) -> Vec<SweepCell> {
    spec.sorted_estimators()
        .into_iter()
        .map(|kind| {
            let mut pairs = Vec::with_capacity(records.len());
            let mut iters = 0.0;
            let mut wall = 0.0;
            let mut failed = 0;
            for rec in records {
                match rec.outcomes.iter().find(|(k, _)| *k == kind).map(|(_, o)| o) {
                    Some(Ok(o)) => {
                        pairs.push((o.error_energy, rec.channel_energy));
                        iters += o.iterations as f64;
                        wall += o.wall_time;
                    }
                    _ => failed += 1,
                }
            }
            let n = pairs.len();
            let (nmse_mean, nmse_stderr) = nmse_summary(&pairs, spec.nmse_mode);
            let denom = n.max(1) as f64;
            SweepCell {
                value,
                estimator: kind,
                nmse_mean,
                nmse_stderr,
                iters_mean: iters / denom,
                walltime_mean: if spec.record_timing { wall / denom } else { 0.0 },
                trials: n,
                failed,
            }
        })
        .collect()
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let mut cells = Vec::new();
    for &value in &spec.sweep_values {
        let records = run_value_trials(spec, value)?;
        cells.extend(aggregate(spec, value, &records));
    }
    Ok(SweepResult {
        sweep_variable: spec.sweep_variable,
        cells,
    })
}

pub const CSV_HEADER: &str = "sweep_var,value,estimator,nmse_mean,nmse_stderr,iters_mean,walltime_mean,trials";

pub fn format_csv(result: &SweepResult) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for c in &result.cells {
        out.push_str(&format!(
            "{},{},{},{:.16e},{:.16e},{:.16e},{:.16e},{}\n",
            result.sweep_variable.name(),
            c.value,
            c.estimator,
            c.nmse_mean,
            c.nmse_stderr,
            c.iters_mean,
            c.walltime_mean,
            c.trials
        ));
    }
    out
}

/// Writes `contents` through a sibling temporary file and renames it into
/// place, so a failed write never leaves a partial file at `path`.
pub fn write_atomically(path: &Path, contents: &str) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, contents)?;
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

pub fn emit_csv(result: &SweepResult, path: &Path) -> Result<()> {
    write_atomically(path, &format_csv(result))
}

/// Parses text produced by [`format_csv`]. Failure counts are not stored in
/// the file and come back as zero.
pub fn parse_csv(text: &str) -> Result<SweepResult> {
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h == CSV_HEADER => {}
        other => return Err(Error::Config(format!("unexpected CSV header {other:?}"))),
    }
    let bad = |line: &str| Error::Config(format!("malformed CSV row `{line}`"));
    let mut variable = None;
    let mut cells = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 8 {
            return Err(bad(line));
        }
        let var: SweepVariable = fields[0].parse()?;
        if *variable.get_or_insert(var) != var {
            return Err(bad(line));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| bad(line));
        cells.push(SweepCell {
            value: num(fields[1])?,
            estimator: fields[2].parse()?,
            nmse_mean: num(fields[3])?,
            nmse_stderr: num(fields[4])?,
            iters_mean: num(fields[5])?,
            walltime_mean: num(fields[6])?,
            trials: fields[7].parse().map_err(|_| bad(line))?,
            failed: 0,
        });
    }
    Ok(SweepResult {
        sweep_variable: variable.unwrap_or(SweepVariable::SnrDb),
        cells,
    })
}
