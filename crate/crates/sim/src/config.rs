//! Run configuration: a TOML file merged with command-line overrides.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::path::Path;
use std::str::FromStr;

/// With 1500-byte packets and 30 blocks per second, one byte per second of
/// source rate buys `1 / 45000` transmission slots per block.
pub const BYTES_PER_SLOT_SECOND: u64 = 45_000;

/// Which per-slot policy drives a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchedulerKind {
    /// Window-expanding instantly decodable scheduler.
    EwIdnc,
    /// Stay-small instantly decodable scheduler.
    NowIdnc,
    /// Coverage-greedy baseline, blind to layers and deadline.
    MaxClique,
    /// Open-loop random linear coding with an up-front budget split.
    EwRlnc,
}

impl SchedulerKind {
    pub const ALL: [SchedulerKind; 4] = [
        SchedulerKind::EwIdnc,
        SchedulerKind::NowIdnc,
        SchedulerKind::MaxClique,
        SchedulerKind::EwRlnc,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            SchedulerKind::EwIdnc => "ew-idnc",
            SchedulerKind::NowIdnc => "now-idnc",
            SchedulerKind::MaxClique => "max-clique",
            SchedulerKind::EwRlnc => "ew-rlnc",
        }
    }
}

impl fmt::Display for SchedulerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchedulerKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, ConfigError> {
        SchedulerKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| {
                ConfigError::Invalid(format!(
                    "unknown scheduler {s:?}; expected one of ew-idnc, now-idnc, max-clique, ew-rlnc"
                ))
            })
    }
}

/// Block structure: either fixed per-layer packet counts, or per-layer
/// Poisson means sampled fresh each run (clamped to at least one packet).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GopSpec {
    Fixed { layers: Vec<usize> },
    Poisson { poisson_means: Vec<f64> },
}

impl GopSpec {
    /// The number of layers is fixed even when the sizes are sampled.
    pub fn layer_count(&self) -> usize {
        match self {
            GopSpec::Fixed { layers } => layers.len(),
            GopSpec::Poisson { poisson_means } => poisson_means.len(),
        }
    }

    pub fn is_fixed(&self) -> bool {
        matches!(self, GopSpec::Fixed { .. })
    }
}

/// Evaluation budgets for the random-linear-coding planner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RlncParams {
    /// Refuse to enumerate more candidate budget splits than this.
    pub policy_budget: u64,
    /// Exact evaluation up to this many reception states, sampling beyond.
    pub max_exact_states: u64,
    /// Sample count for the sampling fallback.
    pub mc_samples: usize,
}

impl Default for RlncParams {
    fn default() -> Self {
        RlncParams { policy_budget: 1_000_000, max_exact_states: 1_000_000, mc_samples: 100_000 }
    }
}

impl RlncParams {
    /// Planner parameters for the core library, under the given seed.
    pub fn eval_params(&self, seed: u64) -> idnc::rlnc::EvalParams {
        idnc::rlnc::EvalParams {
            policy_budget: self.policy_budget as u128,
            max_exact_states: self.max_exact_states,
            mc_samples: self.mc_samples,
            seed,
        }
    }
}

/// One simulation scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub scheduler: SchedulerKind,
    /// Completion-confidence floor used by the expanding scheduler and the
    /// coding planner.
    pub lambda: f64,
    /// Transmission slots per block; mutually exclusive with `bitrate`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub theta: Option<usize>,
    /// Source rate in bytes per second, converted to slots per block;
    /// mutually exclusive with `theta`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bitrate: Option<u64>,
    pub receivers: usize,
    /// Average erasure probability across receivers.
    pub erasure_mean: f64,
    /// Per-receiver erasure probabilities are drawn uniformly from
    /// `erasure_mean ± erasure_spread`, once per scenario.
    pub erasure_spread: f64,
    pub runs: usize,
    pub seed: u64,
    pub gop: GopSpec,
    pub rlnc: RlncParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            scheduler: SchedulerKind::EwIdnc,
            lambda: 0.95,
            theta: None,
            bitrate: None,
            receivers: 15,
            erasure_mean: 0.2,
            erasure_spread: 0.15,
            runs: 1000,
            seed: 1,
            gop: GopSpec::Fixed { layers: vec![8, 3, 3, 3] },
            rlnc: RlncParams::default(),
        }
    }
}

/// Slots per block bought by a source rate of `bytes_per_second`.
pub fn theta_from_bitrate(bytes_per_second: u64) -> Result<usize, ConfigError> {
    let slots = bytes_per_second / BYTES_PER_SLOT_SECOND;
    if slots == 0 {
        return Err(ConfigError::Invalid(format!(
            "bitrate {bytes_per_second} buys no transmission slot; needs at least {BYTES_PER_SLOT_SECOND}"
        )));
    }
    Ok(slots as usize)
}

impl SimConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Invalid(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: SimConfig = toml::from_str(text)?;
        config.validate()?;
        Ok(config)
    }

    /// Transmission slots per block after resolving the rate alternative.
    pub fn slots(&self) -> Result<usize, ConfigError> {
        match (self.theta, self.bitrate) {
            (Some(_), Some(_)) => {
                Err(ConfigError::Invalid("give either theta or bitrate, not both".into()))
            }
            (Some(0), None) => {
                Err(ConfigError::Invalid("theta must be at least one slot".into()))
            }
            (Some(t), None) => Ok(t),
            (None, Some(b)) => theta_from_bitrate(b),
            (None, None) => Ok(25),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.lambda) {
            return Err(ConfigError::Invalid(format!("lambda {} outside [0, 1]", self.lambda)));
        }
        if self.receivers == 0 {
            return Err(ConfigError::Invalid("need at least one receiver".into()));
        }
        if self.runs == 0 {
            return Err(ConfigError::Invalid("need at least one run".into()));
        }
        if !(0.0..1.0).contains(&self.erasure_mean) {
            return Err(ConfigError::Invalid(format!(
                "erasure_mean {} outside [0, 1)",
                self.erasure_mean
            )));
        }
        if self.erasure_spread < 0.0
            || self.erasure_mean - self.erasure_spread < 0.0
            || self.erasure_mean + self.erasure_spread >= 1.0
        {
            return Err(ConfigError::Invalid(format!(
                "erasure range {} ± {} leaves [0, 1)",
                self.erasure_mean, self.erasure_spread
            )));
        }
        match &self.gop {
            GopSpec::Fixed { layers } => {
                if layers.is_empty() || layers.contains(&0) {
                    return Err(ConfigError::Invalid(
                        "gop layers must be non-empty with no zero-size layer".into(),
                    ));
                }
            }
            GopSpec::Poisson { poisson_means } => {
                // NaN means must be rejected too, hence not `m <= 0.0`.
                if poisson_means.is_empty() || poisson_means.iter().any(|&m| m.partial_cmp(&0.0) != Some(std::cmp::Ordering::Greater)) {
                    return Err(ConfigError::Invalid(
                        "gop poisson_means must be non-empty and positive".into(),
                    ));
                }
            }
        }
        if self.rlnc.mc_samples == 0 {
            return Err(ConfigError::Invalid("rlnc.mc_samples must be positive".into()));
        }
        self.slots().map(|_| ())
    }

    /// Per-receiver erasure probabilities for one scenario, drawn uniformly
    /// from the configured band.
    pub fn sample_receiver_erasures<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        (0..self.receivers)
            .map(|_| {
                if self.erasure_spread == 0.0 {
                    self.erasure_mean
                } else {
                    rng.gen_range(
                        self.erasure_mean - self.erasure_spread
                            ..=self.erasure_mean + self.erasure_spread,
                    )
                }
            })
            .collect()
    }
}

/// Anything wrong with a run's setup, as opposed to its execution.
#[derive(Debug)]
pub enum ConfigError {
    Parse(toml::de::Error),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Parse(e) => write!(f, "configuration does not parse: {e}"),
            ConfigError::Invalid(msg) => f.write_str(msg),
        }
    }
}

impl std::error::Error for ConfigError {}

impl From<toml::de::Error> for ConfigError {
    fn from(e: toml::de::Error) -> Self {
        ConfigError::Parse(e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn defaults_describe_the_reference_scenario() {
        let c = SimConfig::default();
        assert_eq!(c.scheduler, SchedulerKind::EwIdnc);
        assert_eq!(c.lambda, 0.95);
        assert_eq!(c.slots().unwrap(), 25);
        assert_eq!(c.receivers, 15);
        assert_eq!(c.erasure_mean, 0.2);
        assert_eq!(c.erasure_spread, 0.15);
        assert_eq!(c.runs, 1000);
        assert_eq!(c.seed, 1);
        assert_eq!(c.gop, GopSpec::Fixed { layers: vec![8, 3, 3, 3] });
        assert!(c.validate().is_ok());
    }

    #[test]
    fn bitrate_buys_whole_slots() {
        assert_eq!(theta_from_bitrate(1_125_000).unwrap(), 25);
        assert_eq!(theta_from_bitrate(360_000).unwrap(), 8);
        assert_eq!(theta_from_bitrate(45_000).unwrap(), 1);
        assert_eq!(theta_from_bitrate(89_999).unwrap(), 1);
        assert!(theta_from_bitrate(44_999).is_err());

        let c = SimConfig { bitrate: Some(360_000), ..Default::default() };
        assert_eq!(c.slots().unwrap(), 8);
        let c = SimConfig { theta: Some(12), ..Default::default() };
        assert_eq!(c.slots().unwrap(), 12);
    }

    #[test]
    fn slot_sources_are_mutually_exclusive() {
        let c = SimConfig { theta: Some(10), bitrate: Some(450_000), ..Default::default() };
        assert!(c.slots().is_err());
        assert!(c.validate().is_err());
        let c = SimConfig { theta: Some(0), ..Default::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn toml_round_trip_and_partial_files() {
        let full = r#"
            scheduler = "now-idnc"
            lambda = 0.8
            theta = 12
            receivers = 4
            erasure_mean = 0.3
            erasure_spread = 0.0
            runs = 50
            seed = 7

            [gop]
            layers = [2, 1]

            [rlnc]
            policy_budget = 500
        "#;
        let c = SimConfig::from_toml_str(full).unwrap();
        assert_eq!(c.scheduler, SchedulerKind::NowIdnc);
        assert_eq!(c.slots().unwrap(), 12);
        assert_eq!(c.gop, GopSpec::Fixed { layers: vec![2, 1] });
        assert_eq!(c.rlnc.policy_budget, 500);
        assert_eq!(c.rlnc.mc_samples, 100_000);

        let partial = SimConfig::from_toml_str("runs = 3").unwrap();
        assert_eq!(partial.runs, 3);
        assert_eq!(partial.scheduler, SchedulerKind::EwIdnc);

        let poisson = SimConfig::from_toml_str(
            "[gop]\npoisson_means = [8.0, 3.0, 3.0, 3.0]",
        )
        .unwrap();
        assert_eq!(poisson.gop.layer_count(), 4);
        assert!(!poisson.gop.is_fixed());
    }

    #[test]
    fn unknown_fields_and_bad_values_are_rejected() {
        assert!(SimConfig::from_toml_str("shceduler = \"ew-idnc\"").is_err());
        assert!(SimConfig::from_toml_str("lambda = 1.5").is_err());
        assert!(SimConfig::from_toml_str("runs = 0").is_err());
        assert!(SimConfig::from_toml_str("receivers = 0").is_err());
        assert!(SimConfig::from_toml_str("erasure_mean = 0.9\nerasure_spread = 0.2").is_err());
        assert!(SimConfig::from_toml_str("[gop]\nlayers = [2, 0]").is_err());
        assert!(SimConfig::from_toml_str("[gop]\npoisson_means = [0.0]").is_err());
        assert!(SimConfig::from_toml_str("scheduler = \"rlnc\"").is_err());
    }

    #[test]
    fn scheduler_names_round_trip() {
        for kind in SchedulerKind::ALL {
            assert_eq!(kind.to_string().parse::<SchedulerKind>().unwrap(), kind);
        }
        assert!("EW-IDNC".parse::<SchedulerKind>().is_err());
    }

    #[test]
    fn erasure_sampling_stays_in_band_and_tracks_the_mean() {
        let c = SimConfig { receivers: 4000, ..Default::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let eps = c.sample_receiver_erasures(&mut rng);
        assert_eq!(eps.len(), 4000);
        assert!(eps.iter().all(|&e| (0.05..=0.35).contains(&e)));
        let mean = eps.iter().sum::<f64>() / eps.len() as f64;
        assert!((mean - 0.2).abs() < 0.01, "sampled mean {mean}");

        let fixed = SimConfig { erasure_spread: 0.0, receivers: 3, ..Default::default() };
        assert_eq!(fixed.sample_receiver_erasures(&mut rng), vec![0.2, 0.2, 0.2]);
    }
}
