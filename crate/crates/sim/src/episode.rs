//! One simulated broadcast session and the per-run execution engines.

use crate::config::{GopSpec, SchedulerKind, SimConfig};
use crate::rng::{receiver_stream, run_stream};
use idnc::graph::{decode_attempt, Clique};
use idnc::model::{
    complete_prefix_layers, FeedbackMatrix, LayeredGop, ReceiverProfile, SessionClock,
};
use idnc::rlnc::{decodable_layers, select_policy, PolicyChoice};
use idnc::sched::{ew_idnc_step, max_clique_baseline_step, now_idnc_step, SelectionMethod};
use idnc::Error;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::Serialize;

/// Sender-side state of one block broadcast: what each receiver holds, the
/// slot clock, and how many slots have been spent.
pub struct Session {
    gop: LayeredGop,
    feedback: FeedbackMatrix,
    clock: SessionClock,
    transmissions: usize,
}

impl Session {
    /// A fresh session: every receiver misses every packet.
    pub fn new(gop: LayeredGop, receivers: usize, horizon: usize) -> Self {
        let feedback = FeedbackMatrix::all_missing(receivers, gop.total_packets());
        Session::with_initial_state(gop, feedback, horizon)
    }

    /// A session resumed from arbitrary reception state.
    pub fn with_initial_state(gop: LayeredGop, feedback: FeedbackMatrix, horizon: usize) -> Self {
        assert_eq!(feedback.packets(), gop.total_packets(), "feedback shape matches the block");
        Session { gop, feedback, clock: SessionClock::new(horizon), transmissions: 0 }
    }

    pub fn gop(&self) -> &LayeredGop {
        &self.gop
    }

    pub fn feedback(&self) -> &FeedbackMatrix {
        &self.feedback
    }

    pub fn clock(&self) -> &SessionClock {
        &self.clock
    }

    pub fn transmissions(&self) -> usize {
        self.transmissions
    }

    pub fn complete(&self) -> bool {
        self.feedback.is_complete()
    }

    /// Broadcasts the combination of `clique`'s packets.  `received[i]` says
    /// whether receiver `i`'s channel let the slot through; every receiver
    /// that caught it tries to decode — targeted or not — and the decoded
    /// `(receiver, packet)` pairs are applied and returned.
    pub fn transmit(&mut self, clique: &Clique, received: &[bool]) -> Vec<(usize, usize)> {
        assert_eq!(received.len(), self.feedback.receivers(), "one reception flag per receiver");
        assert!(!self.clock.expired(), "no slots left");
        let decoded: Vec<(usize, usize)> = (0..self.feedback.receivers())
            .filter(|&i| received[i])
            .filter_map(|i| {
                decode_attempt(clique, |p| self.feedback.has(i, p)).map(|p| (i, p))
            })
            .collect();
        for &(i, p) in &decoded {
            self.feedback.mark_received(i, p);
        }
        self.clock.advance();
        self.transmissions += 1;
        decoded
    }

    /// Leading layers receiver `i` holds completely.
    pub fn decoded_layers(&self, receiver: usize) -> usize {
        complete_prefix_layers(&self.feedback, &self.gop, receiver)
    }
}

/// Outcome of one run: per-receiver decoded layer counts and the derived
/// packet percentages.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunMetrics {
    /// Leading layers decoded, one entry per receiver.
    pub layers: Vec<usize>,
    /// Worst receiver's decoded packets as a percentage of the block.
    pub min_pct: f64,
    /// Average decoded-packet percentage across receivers.
    pub mean_pct: f64,
    /// Slots actually spent.
    pub transmissions: usize,
}

impl RunMetrics {
    fn score(gop: &LayeredGop, layers: Vec<usize>, transmissions: usize) -> Self {
        let total = gop.total_packets() as f64;
        let pcts: Vec<f64> =
            layers.iter().map(|&l| 100.0 * gop.layer_prefix(l) as f64 / total).collect();
        let min_pct = pcts.iter().copied().fold(f64::INFINITY, f64::min);
        let mean_pct = pcts.iter().sum::<f64>() / pcts.len() as f64;
        RunMetrics { layers, min_pct, mean_pct, transmissions }
    }
}

/// Executes run number `run` of the scenario.  `erasures` was drawn once per
/// scenario; `policy` carries the memoised coding plan when the block
/// structure is fixed, otherwise the plan is recomputed for the run's block.
pub fn run_episode(
    config: &SimConfig,
    run: u64,
    erasures: &[f64],
    policy: Option<&PolicyChoice>,
) -> Result<RunMetrics, Error> {
    let slots = config.slots().expect("configuration was validated");
    let gop = sample_gop(config, run);
    match config.scheduler {
        SchedulerKind::EwRlnc => run_rlnc(config, run, &gop, slots, erasures, policy),
        kind => run_idnc(config, kind, run, &gop, slots, erasures),
    }
}

fn sample_gop(config: &SimConfig, run: u64) -> LayeredGop {
    match &config.gop {
        GopSpec::Fixed { layers } => LayeredGop::new(layers).expect("configuration was validated"),
        GopSpec::Poisson { poisson_means } => {
            let mut rng = run_stream(config.seed, run);
            let sizes: Vec<usize> = poisson_means
                .iter()
                .map(|&mean| {
                    let draw = Poisson::new(mean).expect("means were validated").sample(&mut rng);
                    (draw as usize).max(1)
                })
                .collect();
            LayeredGop::new(&sizes).expect("every layer has at least one packet")
        }
    }
}

fn channel_streams(config: &SimConfig, run: u64, receivers: usize) -> Vec<ChaCha8Rng> {
    (0..receivers).map(|i| receiver_stream(config.seed, run, i)).collect()
}

fn run_idnc(
    config: &SimConfig,
    kind: SchedulerKind,
    run: u64,
    gop: &LayeredGop,
    slots: usize,
    erasures: &[f64],
) -> Result<RunMetrics, Error> {
    let profile = ReceiverProfile::new(erasures.to_vec())?;
    let mut session = Session::new(gop.clone(), erasures.len(), slots);
    let mut channels = channel_streams(config, run, erasures.len());
    while !session.clock().expired() && !session.complete() {
        let decision = match kind {
            SchedulerKind::EwIdnc => ew_idnc_step(
                session.feedback(),
                gop,
                session.clock(),
                config.lambda,
                &profile,
                SelectionMethod::Heuristic,
            )?,
            SchedulerKind::NowIdnc => now_idnc_step(
                session.feedback(),
                gop,
                session.clock(),
                &profile,
                SelectionMethod::Heuristic,
            )?,
            SchedulerKind::MaxClique => max_clique_baseline_step(session.feedback(), gop)?,
            SchedulerKind::EwRlnc => unreachable!("coding runs use their own engine"),
        };
        let received: Vec<bool> = channels
            .iter_mut()
            .zip(erasures)
            .map(|(rng, &eps)| rng.gen_bool(1.0 - eps))
            .collect();
        session.transmit(&decision.clique, &received);
    }
    let layers: Vec<usize> = (0..erasures.len()).map(|i| session.decoded_layers(i)).collect();
    Ok(RunMetrics::score(gop, layers, session.transmissions()))
}

fn run_rlnc(
    config: &SimConfig,
    run: u64,
    gop: &LayeredGop,
    slots: usize,
    erasures: &[f64],
    memoised: Option<&PolicyChoice>,
) -> Result<RunMetrics, Error> {
    let recomputed;
    let choice = match memoised {
        Some(choice) => choice,
        None => {
            let profile = ReceiverProfile::new(erasures.to_vec())?;
            let params = config.rlnc.eval_params(config.seed.wrapping_add(run));
            recomputed = select_policy(gop, slots, &profile, config.lambda, &params)?;
            &recomputed
        }
    };
    let mut channels = channel_streams(config, run, erasures.len());
    let mut received = vec![vec![0usize; gop.layers()]; erasures.len()];
    for (layer, &count) in choice.policy.counts().iter().enumerate() {
        for _ in 0..count {
            for ((rng, &eps), counts) in channels.iter_mut().zip(erasures).zip(&mut received) {
                if rng.gen_bool(1.0 - eps) {
                    counts[layer] += 1;
                }
            }
        }
    }
    let layers: Vec<usize> = received.iter().map(|r| decodable_layers(r, gop)).collect();
    Ok(RunMetrics::score(gop, layers, slots))
}
