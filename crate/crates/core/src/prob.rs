//! Completion-time probabilities under ideal per-slot targeting.
//!
//! A receiver that still misses `w` packets and is served a useful packet in
//! every remaining slot collects them after a negative-binomially distributed
//! number of slots.  These tails give an upper bound on the chance that every
//! receiver finishes a window before the deadline — "upper" because a real
//! schedule cannot always serve everyone at once.  The scheduler compares
//! such bounds across windows to decide how far ahead it may safely code.

use crate::error::{Error, Result};
use crate::model::{Classification, ReceiverClass, ReceiverProfile};

fn check_eps(eps: f64) -> Result<()> {
    if !(0.0..1.0).contains(&eps) {
        return Err(Error::InvalidArgument(format!("erasure probability {eps} outside [0, 1)")));
    }
    Ok(())
}

/// Probability that the `wants`-th delivery lands exactly `losses` erasures
/// late: `C(wants+losses-1, losses) * eps^losses * (1-eps)^wants`.
///
/// Accurate to about 1e-12 for `wants + losses` up to 64.
pub fn nb_pmf(wants: usize, losses: usize, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if wants == 0 {
        return Err(Error::InvalidArgument("needs at least one outstanding packet".into()));
    }
    // C(wants+losses-1, losses) by the multiplicative recurrence.
    let mut binom = 1.0;
    for k in 1..=losses {
        binom *= (wants + k - 1) as f64 / k as f64;
    }
    Ok(binom * eps.powi(losses as i32) * (1.0 - eps).powi(wants as i32))
}

/// Probability that a receiver missing `wants` packets collects them all
/// within `remaining` slots when served a useful packet in every slot.
pub fn prob_complete_within(wants: usize, remaining: usize, eps: f64) -> Result<f64> {
    check_eps(eps)?;
    if wants == 0 {
        return Ok(1.0);
    }
    if wants > remaining {
        return Ok(0.0);
    }
    // Running-term accumulation keeps intermediate magnitudes tame even for
    // horizons past the binomial-overflow point.
    let mut term = (1.0 - eps).powi(wants as i32);
    let mut sum = term;
    for losses in 1..=remaining - wants {
        term *= (wants + losses - 1) as f64 / losses as f64 * eps;
        sum += term;
    }
    Ok(sum.min(1.0))
}

/// Chance that every unsatisfied receiver finishes the window in time, each
/// one granted ideal service (a useful packet per slot).
pub fn upper_bound_all(classes: &Classification, profile: &ReceiverProfile) -> Result<f64> {
    if profile.len() != classes.receivers() {
        return Err(Error::InvalidArgument(format!(
            "profile covers {} receivers, classification {}",
            profile.len(),
            classes.receivers()
        )));
    }
    let mut value = 1.0;
    for i in classes.active() {
        value *= prob_complete_within(classes.wants(i), classes.remaining(), profile.erasure(i))?;
    }
    Ok(value)
}

/// A completion bound together with the context it was evaluated in.
#[derive(Debug, Clone, PartialEq)]
pub struct CompletionBound {
    pub value: f64,
    pub window: usize,
    pub remaining: usize,
    pub targeted: Vec<usize>,
}

/// Bound on finishing the window in time after committing one transmission.
///
/// Receivers targeted by the transmission keep the full `remaining`-slot
/// budget; everyone else has effectively lost this slot and gets one fewer.
/// The bound collapses to zero if any critical receiver is left out or any
/// receiver is already beyond saving in this window.
pub fn post_selection_bound(
    classes: &Classification,
    targeted: &[usize],
    profile: &ReceiverProfile,
) -> Result<CompletionBound> {
    if profile.len() != classes.receivers() {
        return Err(Error::InvalidArgument(format!(
            "profile covers {} receivers, classification {}",
            profile.len(),
            classes.receivers()
        )));
    }
    if classes.remaining() == 0 {
        return Err(Error::InvalidArgument("no slots left to bound".into()));
    }
    let mut targeted = targeted.to_vec();
    targeted.sort_unstable();
    targeted.dedup();
    for &i in &targeted {
        if i >= classes.receivers() {
            return Err(Error::InvalidArgument(format!("receiver {i} out of range")));
        }
        if classes.wants(i) == 0 {
            return Err(Error::InvalidArgument(format!(
                "receiver {i} has nothing to gain in this window"
            )));
        }
    }
    let window = classes.window();
    let remaining = classes.remaining();
    let ignored_critical = classes
        .receivers_in(ReceiverClass::Critical)
        .iter()
        .any(|i| !targeted.contains(i));
    if classes.any_affected() || ignored_critical {
        return Ok(CompletionBound { value: 0.0, window, remaining, targeted });
    }
    let mut value = 1.0;
    for i in classes.active() {
        let budget = if targeted.contains(&i) { remaining } else { remaining - 1 };
        value *= prob_complete_within(classes.wants(i), budget, profile.erasure(i))?;
    }
    Ok(CompletionBound { value, window, remaining, targeted })
}
