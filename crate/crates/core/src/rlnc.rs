//! Open-loop random linear coding baseline.
//!
//! Instead of reacting to feedback each slot, the sender fixes up front how
//! many coded packets to send over each layer prefix: a packet budgeted to
//! prefix `l` mixes all packets of layers `1..=l`.  A receiver decodes the
//! first `j` layers once its receptions contain enough innovative
//! combinations for every prefix — with random coefficients over a large
//! field this is a counting condition on how many packets it caught per
//! prefix.  The planner enumerates all budget splits and keeps the one that
//! protects the deepest layer prefix at the required confidence.

use crate::error::{Error, Result};
use crate::model::{LayeredGop, ReceiverProfile};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A fixed split of the slot budget over layer prefixes: `counts()[l]` slots
/// carry combinations of layers `1..=l+1`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TransmissionPolicy {
    counts: Vec<usize>,
}

impl TransmissionPolicy {
    pub fn new(counts: Vec<usize>) -> Result<Self> {
        if counts.is_empty() {
            return Err(Error::InvalidArgument("policy needs at least one layer".into()));
        }
        Ok(TransmissionPolicy { counts })
    }

    pub fn layers(&self) -> usize {
        self.counts.len()
    }

    pub fn slots(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }
}

/// All ways to split `slots` transmissions over `layers` prefixes, in
/// ascending lexicographic order.  There are `C(slots+layers-1, layers-1)`
/// of them; when that exceeds `budget` nothing is generated and the count is
/// reported instead.
pub fn enumerate_policies(
    slots: usize,
    layers: usize,
    budget: u128,
) -> Result<Vec<TransmissionPolicy>> {
    if layers == 0 {
        return Err(Error::InvalidArgument("policy needs at least one layer".into()));
    }
    let mut count: u128 = 1;
    for i in 1..layers {
        count = count
            .checked_mul((slots + i) as u128)
            .map(|c| c / i as u128)
            .unwrap_or(u128::MAX);
    }
    if count > budget {
        return Err(Error::PolicyBudget { policies: count, budget });
    }
    let mut out = Vec::with_capacity(count as usize);
    let mut prefix = Vec::with_capacity(layers);
    fill(slots, layers, &mut prefix, &mut out);
    Ok(out)
}

fn fill(rest: usize, parts: usize, prefix: &mut Vec<usize>, out: &mut Vec<TransmissionPolicy>) {
    if parts == 1 {
        let mut counts = prefix.clone();
        counts.push(rest);
        out.push(TransmissionPolicy { counts });
        return;
    }
    for v in 0..=rest {
        prefix.push(v);
        fill(rest - v, parts - 1, prefix, out);
        prefix.pop();
    }
}

/// How many leading layers a receiver can decode after catching
/// `received[l]` packets coded over each prefix `l+1`.
///
/// Layers `1..=j` are recoverable exactly when, for every split point `m`,
/// the packets coded over prefixes deeper than `m` (and at most `j`) number
/// at least the packets of layers `m+1..=j` — with random coefficients the
/// combinations are innovative until that count is exhausted.
pub fn decodable_layers(received: &[usize], gop: &LayeredGop) -> usize {
    assert_eq!(received.len(), gop.layers(), "one reception count per layer");
    for j in (1..=gop.layers()).rev() {
        let enough = (0..j).all(|m| {
            received[m..j].iter().sum::<usize>() >= gop.layer_prefix(j) - gop.layer_prefix(m)
        });
        if enough {
            return j;
        }
    }
    0
}

/// A probability estimate, with a standard error when it came from sampling.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeProb {
    pub value: f64,
    pub std_error: Option<f64>,
}

/// Budgets and seeding for policy evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EvalParams {
    /// Refuse to enumerate more candidate policies than this.
    pub policy_budget: u128,
    /// Sum probabilities exactly over all reception patterns up to this many
    /// states; beyond it, fall back to Monte Carlo.
    pub max_exact_states: u64,
    /// Sample count for the Monte Carlo fallback.
    pub mc_samples: usize,
    /// Base seed for the Monte Carlo fallback.
    pub seed: u64,
}

impl Default for EvalParams {
    fn default() -> Self {
        EvalParams {
            policy_budget: 1_000_000,
            max_exact_states: 1_000_000,
            mc_samples: 100_000,
            seed: 0,
        }
    }
}

fn check_policy(policy: &TransmissionPolicy, gop: &LayeredGop) -> Result<()> {
    if policy.layers() != gop.layers() {
        return Err(Error::InvalidArgument(format!(
            "policy covers {} layers, block has {}",
            policy.layers(),
            gop.layers()
        )));
    }
    Ok(())
}

fn check_erasure(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("erasure probability {eps} outside [0, 1)")));
    }
    Ok(())
}

fn binom_pmf_row(n: usize, success: f64) -> Vec<f64> {
    let mut row = vec![0.0; n + 1];
    for (k, slot) in row.iter_mut().enumerate() {
        let mut p = 1.0;
        for i in 0..k {
            p *= (n - i) as f64 / (i + 1) as f64 * success;
        }
        for _ in 0..n - k {
            p *= 1.0 - success;
        }
        *slot = p;
    }
    row
}

// P[decodable layers >= j] for every j, plus standard errors when sampled.
fn reach_profile(
    policy: &TransmissionPolicy,
    gop: &LayeredGop,
    eps: f64,
    params: &EvalParams,
) -> Result<(Vec<f64>, Option<Vec<f64>>)> {
    check_policy(policy, gop)?;
    check_erasure(eps)?;
    let layers = gop.layers();
    let states: u64 = policy
        .counts()
        .iter()
        .map(|&t| (t + 1) as u64)
        .try_fold(1u64, |acc, t| acc.checked_mul(t))
        .unwrap_or(u64::MAX);

    let mut mass = vec![0.0f64; layers + 1];
    let sampled = states > params.max_exact_states;
    if !sampled {
        let pmf: Vec<Vec<f64>> =
            policy.counts().iter().map(|&t| binom_pmf_row(t, 1.0 - eps)).collect();
        let mut received = vec![0usize; layers];
        loop {
            let p: f64 = received.iter().zip(&pmf).map(|(&r, row)| row[r]).product();
            mass[decodable_layers(&received, gop)] += p;
            // Mixed-radix increment over per-layer reception counts.
            let mut digit = 0;
            loop {
                if digit == layers {
                    break;
                }
                if received[digit] < policy.counts()[digit] {
                    received[digit] += 1;
                    break;
                }
                received[digit] = 0;
                digit += 1;
            }
            if digit == layers {
                break;
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut received = vec![0usize; layers];
        let share = 1.0 / params.mc_samples as f64;
        for _ in 0..params.mc_samples {
            for (slot, &t) in received.iter_mut().zip(policy.counts()) {
                *slot = (0..t).filter(|_| rng.gen_bool(1.0 - eps)).count();
            }
            mass[decodable_layers(&received, gop)] += share;
        }
    }

    // Suffix sums turn the exact-depth distribution into reach probabilities.
    let mut probs = vec![0.0f64; layers];
    let mut acc = 0.0;
    for j in (1..=layers).rev() {
        acc += mass[j];
        probs[j - 1] = acc.min(1.0);
    }
    let errors = sampled.then(|| {
        probs
            .iter()
            .map(|&p| (p * (1.0 - p) / params.mc_samples as f64).sqrt())
            .collect()
    });
    Ok((probs, errors))
}

/// Chance that one receiver with erasure probability `eps` decodes at least
/// the first `layer` layers under `policy`.  Exact while the reception-state
/// space stays within `params.max_exact_states`, Monte Carlo beyond.
pub fn per_receiver_decode_prob(
    policy: &TransmissionPolicy,
    gop: &LayeredGop,
    layer: usize,
    eps: f64,
    params: &EvalParams,
) -> Result<DecodeProb> {
    if layer == 0 || layer > gop.layers() {
        return Err(Error::InvalidArgument(format!(
            "layer {layer} outside 1..={}",
            gop.layers()
        )));
    }
    let (probs, errors) = reach_profile(policy, gop, eps, params)?;
    Ok(DecodeProb {
        value: probs[layer - 1],
        std_error: errors.map(|e| e[layer - 1]),
    })
}

/// Chance that every receiver decodes at least the first `layer` layers,
/// assuming independent channels.  Standard errors combine first-order.
pub fn all_receivers_prob(
    policy: &TransmissionPolicy,
    gop: &LayeredGop,
    layer: usize,
    profile: &ReceiverProfile,
    params: &EvalParams,
) -> Result<DecodeProb> {
    let mut values = Vec::with_capacity(profile.len());
    let mut errors = Vec::with_capacity(profile.len());
    for i in 0..profile.len() {
        let own = EvalParams { seed: params.seed.wrapping_add(i as u64 + 1), ..*params };
        let p = per_receiver_decode_prob(policy, gop, layer, profile.erasure(i), &own)?;
        values.push(p.value);
        errors.push(p.std_error);
    }
    let value: f64 = values.iter().product();
    let std_error = errors.iter().any(Option::is_some).then(|| {
        let mut var = 0.0;
        for (i, se) in errors.iter().enumerate() {
            let others: f64 =
                values.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).product();
            var += (se.unwrap_or(0.0) * others).powi(2);
        }
        var.sqrt()
    });
    Ok(DecodeProb { value, std_error })
}

/// A selected policy together with the all-receiver reach probability of
/// every layer prefix under it.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyChoice {
    pub policy: TransmissionPolicy,
    pub layer_probs: Vec<f64>,
}

/// Pick the budget split that guards the deepest layer prefix at confidence
/// `lambda` for all receivers at once; ties prefer the higher probability on
/// the next layer beyond that prefix, then the lexicographically smallest
/// split.  When no split protects even the base layer, the best base-layer
/// probability wins — the same comparator handles both regimes.
pub fn select_policy(
    gop: &LayeredGop,
    slots: usize,
    profile: &ReceiverProfile,
    lambda: f64,
    params: &EvalParams,
) -> Result<PolicyChoice> {
    if slots == 0 {
        return Err(Error::InvalidArgument("no slots to schedule".into()));
    }
    if !(0.0..=1.0).contains(&lambda) {
        return Err(Error::InvalidArgument(format!("threshold {lambda} outside [0, 1]")));
    }
    let layers = gop.layers();
    let mut best: Option<(usize, f64, PolicyChoice)> = None;
    for policy in enumerate_policies(slots, layers, params.policy_budget)? {
        let mut layer_probs = Vec::with_capacity(layers);
        for layer in 1..=layers {
            layer_probs.push(all_receivers_prob(&policy, gop, layer, profile, params)?.value);
        }
        let guarded = layer_probs.iter().take_while(|&&p| p >= lambda).count();
        let next = if guarded < layers { layer_probs[guarded] } else { f64::INFINITY };
        let better = match &best {
            None => true,
            Some((g, n, _)) => guarded > *g || (guarded == *g && next > *n),
        };
        if better {
            best = Some((guarded, next, PolicyChoice { policy, layer_probs }));
        }
    }
    Ok(best.expect("at least one policy exists").2)
}
