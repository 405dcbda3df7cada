//! Scenario execution, aggregation, and report writing.

use crate::config::{ConfigError, GopSpec, SchedulerKind, SimConfig};
use crate::episode::{run_episode, RunMetrics};
use crate::rng::scenario_stream;
use idnc::model::{LayeredGop, ReceiverProfile};
use idnc::rlnc::{select_policy, PolicyChoice};
use rayon::prelude::*;
use serde::Serialize;
use std::fmt;
use std::io::Write;

/// Anything that can stop a simulation, mapped to process exit codes:
/// configuration problems exit 2, refused enumeration budgets exit 3,
/// everything else 1.
#[derive(Debug)]
pub enum SimError {
    Config(ConfigError),
    Engine(idnc::Error),
    Io(std::io::Error),
    Csv(csv::Error),
    Json(serde_json::Error),
}

impl SimError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Config(_) => 2,
            SimError::Engine(
                idnc::Error::CliqueBudget { .. } | idnc::Error::PolicyBudget { .. },
            ) => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for SimError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SimError::Config(e) => write!(f, "configuration: {e}"),
            SimError::Engine(e) => write!(f, "simulation: {e}"),
            SimError::Io(e) => write!(f, "i/o: {e}"),
            SimError::Csv(e) => write!(f, "csv output: {e}"),
            SimError::Json(e) => write!(f, "json output: {e}"),
        }
    }
}

impl std::error::Error for SimError {}

impl From<ConfigError> for SimError {
    fn from(e: ConfigError) -> Self {
        SimError::Config(e)
    }
}

impl From<idnc::Error> for SimError {
    fn from(e: idnc::Error) -> Self {
        SimError::Engine(e)
    }
}

impl From<std::io::Error> for SimError {
    fn from(e: std::io::Error) -> Self {
        SimError::Io(e)
    }
}

impl From<csv::Error> for SimError {
    fn from(e: csv::Error) -> Self {
        SimError::Csv(e)
    }
}

impl From<serde_json::Error> for SimError {
    fn from(e: serde_json::Error) -> Self {
        SimError::Json(e)
    }
}

/// One scenario's aggregated results.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryRow {
    pub scheduler: String,
    pub lambda: f64,
    pub theta: usize,
    pub receivers: usize,
    pub erasure_mean: f64,
    pub runs: usize,
    /// Mean over runs of the worst receiver's decoded-packet percentage.
    pub min_pct_mean: f64,
    pub min_pct_se: f64,
    /// Mean over runs of the average decoded-packet percentage.
    pub mean_pct_mean: f64,
    pub mean_pct_se: f64,
    /// Pooled counts of decoded layer depths over every (run, receiver).
    pub hist: Vec<u64>,
}

/// Aggregates plus the per-run detail they were computed from.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioReport {
    pub summary: SummaryRow,
    pub runs: Vec<RunMetrics>,
}

fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs every repetition of one scenario and aggregates the results.  Runs
/// execute in parallel; their random streams are indexed, not shared, so the
/// output is independent of thread scheduling.
pub fn run_scenario(config: &SimConfig) -> Result<ScenarioReport, SimError> {
    config.validate()?;
    let slots = config.slots()?;
    let erasures = config.sample_receiver_erasures(&mut scenario_stream(config.seed));

    // With a fixed block the coding plan depends only on the scenario, so it
    // is worked out once and shared by every run.
    let policy: Option<PolicyChoice> =
        if config.scheduler == SchedulerKind::EwRlnc && config.gop.is_fixed() {
            let GopSpec::Fixed { layers } = &config.gop else { unreachable!() };
            let gop = LayeredGop::new(layers).map_err(SimError::Engine)?;
            let profile = ReceiverProfile::new(erasures.clone()).map_err(SimError::Engine)?;
            let params = config.rlnc.eval_params(config.seed);
            Some(select_policy(&gop, slots, &profile, config.lambda, &params)?)
        } else {
            None
        };

    let runs: Vec<RunMetrics> = (0..config.runs as u64)
        .into_par_iter()
        .map(|run| run_episode(config, run, &erasures, policy.as_ref()))
        .collect::<Result<Vec<_>, idnc::Error>>()?;

    let min_pcts: Vec<f64> = runs.iter().map(|r| r.min_pct).collect();
    let mean_pcts: Vec<f64> = runs.iter().map(|r| r.mean_pct).collect();
    let (min_pct_mean, min_pct_se) = mean_se(&min_pcts);
    let (mean_pct_mean, mean_pct_se) = mean_se(&mean_pcts);

    let mut hist = vec![0u64; config.gop.layer_count() + 1];
    for run in &runs {
        for &depth in &run.layers {
            hist[depth] += 1;
        }
    }

    let summary = SummaryRow {
        scheduler: config.scheduler.to_string(),
        lambda: config.lambda,
        theta: slots,
        receivers: config.receivers,
        erasure_mean: config.erasure_mean,
        runs: config.runs,
        min_pct_mean,
        min_pct_se,
        mean_pct_mean,
        mean_pct_se,
        hist,
    };
    Ok(ScenarioReport { summary, runs })
}

const FIXED_COLUMNS: [&str; 10] = [
    "scheduler",
    "lambda",
    "theta",
    "receivers",
    "erasure_mean",
    "runs",
    "min_pct_mean",
    "min_pct_se",
    "mean_pct_mean",
    "mean_pct_se",
];

/// Writes summary rows as CSV: the fixed columns above, then one
/// `hist_<depth>` column per decoded-layer bucket.
pub fn write_csv<W: Write>(rows: &[SummaryRow], out: W) -> Result<(), SimError> {
    let mut w = csv::Writer::from_writer(out);
    let buckets = rows.first().map_or(0, |r| r.hist.len());
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|c| c.to_string()).collect();
    header.extend((0..buckets).map(|d| format!("hist_{d}")));
    w.write_record(&header)?;
    for row in rows {
        assert_eq!(row.hist.len(), buckets, "rows must share one layer structure");
        let mut record = vec![
            row.scheduler.clone(),
            row.lambda.to_string(),
            row.theta.to_string(),
            row.receivers.to_string(),
            row.erasure_mean.to_string(),
            row.runs.to_string(),
            row.min_pct_mean.to_string(),
            row.min_pct_se.to_string(),
            row.mean_pct_mean.to_string(),
            row.mean_pct_se.to_string(),
        ];
        record.extend(row.hist.iter().map(|c| c.to_string()));
        w.write_record(&record)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct JsonRow<'a> {
    #[serde(flatten)]
    summary: &'a SummaryRow,
    run_detail: &'a [RunMetrics],
}

/// Writes the same summaries as JSON, with per-run detail attached.
pub fn write_json<W: Write>(reports: &[ScenarioReport], out: W) -> Result<(), SimError> {
    let rows: Vec<JsonRow> =
        reports.iter().map(|r| JsonRow { summary: &r.summary, run_detail: &r.runs }).collect();
    serde_json::to_writer_pretty(out, &serde_json::json!({ "rows": rows }))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(toml: &str) -> SimConfig {
        SimConfig::from_toml_str(toml).unwrap()
    }

    #[test]
    fn mean_and_error_follow_the_sample_formulas() {
        let (mean, se) = mean_se(&[1.0, 2.0, 3.0, 4.0]);
        assert!((mean - 2.5).abs() < 1e-12);
        assert!((se - (5.0f64 / 3.0).sqrt() / 2.0).abs() < 1e-12);
        let (mean, se) = mean_se(&[7.5]);
        assert_eq!((mean, se), (7.5, 0.0));
    }

    #[test]
    fn scenario_aggregates_pool_every_receiver() {
        let c = config(
            "theta = 5\nreceivers = 2\nerasure_mean = 0.2\nerasure_spread = 0.0\n\
             runs = 8\nseed = 3\n[gop]\nlayers = [2, 1]",
        );
        let report = run_scenario(&c).unwrap();
        assert_eq!(report.runs.len(), 8);
        assert_eq!(report.summary.hist.len(), 3);
        assert_eq!(report.summary.hist.iter().sum::<u64>(), 16);
        assert!(report.summary.min_pct_mean <= report.summary.mean_pct_mean + 1e-12);
        assert_eq!(report.summary.scheduler, "ew-idnc");
        assert_eq!(report.summary.theta, 5);

        let again = run_scenario(&c).unwrap();
        assert_eq!(report, again);
    }

    #[test]
    fn coding_scenarios_share_one_plan_across_runs() {
        let c = config(
            "scheduler = \"ew-rlnc\"\ntheta = 4\nreceivers = 2\nerasure_mean = 0.2\n\
             erasure_spread = 0.0\nruns = 6\n[gop]\nlayers = [2, 1]",
        );
        let report = run_scenario(&c).unwrap();
        assert_eq!(report.runs.len(), 6);
        assert!(report.runs.iter().all(|r| r.transmissions == 4));
    }

    #[test]
    fn refused_budgets_surface_as_exit_code_three() {
        let c = config(
            "scheduler = \"ew-rlnc\"\ntheta = 25\n[gop]\nlayers = [8, 3, 3, 3]\n\
             [rlnc]\npolicy_budget = 1",
        );
        let err = run_scenario(&c).unwrap_err();
        assert_eq!(err.exit_code(), 3);

        let bad = SimError::Config(ConfigError::Invalid("x".into()));
        assert_eq!(bad.exit_code(), 2);
    }

    #[test]
    fn csv_layout_is_stable() {
        let row = SummaryRow {
            scheduler: "ew-idnc".into(),
            lambda: 0.95,
            theta: 25,
            receivers: 15,
            erasure_mean: 0.2,
            runs: 2,
            min_pct_mean: 82.5,
            min_pct_se: 1.25,
            mean_pct_mean: 93.75,
            mean_pct_se: 0.5,
            hist: vec![0, 1, 3],
        };
        let mut out = Vec::new();
        write_csv(&[row], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let mut lines = text.lines();
        assert_eq!(
            lines.next().unwrap(),
            "scheduler,lambda,theta,receivers,erasure_mean,runs,\
             min_pct_mean,min_pct_se,mean_pct_mean,mean_pct_se,hist_0,hist_1,hist_2"
        );
        assert_eq!(lines.next().unwrap(), "ew-idnc,0.95,25,15,0.2,2,82.5,1.25,93.75,0.5,0,1,3");
        assert!(lines.next().is_none());
    }

    #[test]
    fn json_report_carries_per_run_detail() {
        let c = config(
            "theta = 4\nreceivers = 2\nerasure_spread = 0.0\nruns = 3\n[gop]\nlayers = [1, 1]",
        );
        let report = run_scenario(&c).unwrap();
        let mut out = Vec::new();
        write_json(&[report], &mut out).unwrap();
        let value: serde_json::Value = serde_json::from_slice(&out).unwrap();
        let rows = value["rows"].as_array().unwrap();
        assert_eq!(rows.len(), 1);
        assert_eq!(rows[0]["scheduler"], "ew-idnc");
        assert_eq!(rows[0]["runs"], 3);
        assert_eq!(rows[0]["run_detail"].as_array().unwrap().len(), 3);
        assert!(rows[0]["run_detail"][0]["layers"].is_array());
    }
}
