//! Sender-side state for one block of layered source packets.
//!
//! A block is an ordered list of layers; packets carry global indices `0..n`
//! chosen so that the first `layer_prefix(l)` indices are exactly the packets
//! of the first `l` layers.  A *window* is such a layer prefix and is named by
//! its layer count `l` (so window `l` covers packets `0..layer_prefix(l)`).
//! The sender learns from per-slot acknowledgements which receiver still
//! misses which packet and keeps that in a binary feedback matrix; combining
//! the matrix with the number of slots left sorts receivers into urgency
//! classes that drive every scheduling decision downstream.
//!
//! Receivers and packets are 0-based throughout; windows and slots are 1-based
//! counts.

use crate::error::{Error, Result};

/// One block of source packets split into priority layers.
///
/// Layer sizes are fixed at construction; all indexing helpers derive from
/// their prefix sums.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LayeredGop {
    sizes: Vec<usize>,
    prefix: Vec<usize>,
}

impl LayeredGop {
    /// Builds a block from per-layer packet counts, base layer first.
    pub fn new(sizes: &[usize]) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidArgument("a block needs at least one layer".into()));
        }
        if sizes.contains(&0) {
            return Err(Error::InvalidArgument("every layer needs at least one packet".into()));
        }
        let mut prefix = Vec::with_capacity(sizes.len());
        let mut total = 0usize;
        for &s in sizes {
            total += s;
            prefix.push(total);
        }
        Ok(LayeredGop { sizes: sizes.to_vec(), prefix })
    }

    /// Number of layers.
    pub fn layers(&self) -> usize {
        self.sizes.len()
    }

    /// Total packet count across all layers.
    pub fn total_packets(&self) -> usize {
        *self.prefix.last().unwrap()
    }

    /// Per-layer packet counts.
    pub fn layer_sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Number of packets in the first `window` layers; `window` may be 0.
    pub fn layer_prefix(&self, window: usize) -> usize {
        assert!(window <= self.layers(), "window {window} out of range");
        if window == 0 {
            0
        } else {
            self.prefix[window - 1]
        }
    }

    /// 1-based layer that `packet` belongs to.
    pub fn layer_of(&self, packet: usize) -> usize {
        assert!(packet < self.total_packets(), "packet {packet} out of range");
        self.prefix.partition_point(|&p| p <= packet) + 1
    }
}

/// Which receiver still misses which packet: entry `(i, j)` is true while
/// receiver `i` has not yet decoded packet `j`.  Entries only ever flip from
/// missing to held, so the matrix is monotone over a session.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeedbackMatrix {
    receivers: usize,
    packets: usize,
    missing: Vec<bool>,
}

impl FeedbackMatrix {
    /// Fresh block: every receiver misses every packet.
    pub fn all_missing(receivers: usize, packets: usize) -> Self {
        FeedbackMatrix { receivers, packets, missing: vec![true; receivers * packets] }
    }

    /// Builds a matrix from literal rows where 1 means missing.  Intended for
    /// tests and examples; panics on ragged input.
    pub fn from_rows(rows: &[&[u8]]) -> Self {
        let receivers = rows.len();
        assert!(receivers > 0, "need at least one row");
        let packets = rows[0].len();
        let mut missing = Vec::with_capacity(receivers * packets);
        for row in rows {
            assert_eq!(row.len(), packets, "rows must have equal length");
            missing.extend(row.iter().map(|&b| b != 0));
        }
        FeedbackMatrix { receivers, packets, missing }
    }

    pub fn receivers(&self) -> usize {
        self.receivers
    }

    pub fn packets(&self) -> usize {
        self.packets
    }

    /// True while `receiver` has not decoded `packet`.
    pub fn missing(&self, receiver: usize, packet: usize) -> bool {
        assert!(receiver < self.receivers && packet < self.packets, "index out of range");
        self.missing[receiver * self.packets + packet]
    }

    /// True once `receiver` holds `packet`.
    pub fn has(&self, receiver: usize, packet: usize) -> bool {
        !self.missing(receiver, packet)
    }

    /// Records that `receiver` decoded `packet`.
    pub fn mark_received(&mut self, receiver: usize, packet: usize) {
        assert!(receiver < self.receivers && packet < self.packets, "index out of range");
        self.missing[receiver * self.packets + packet] = false;
    }

    /// True when no receiver misses anything.
    pub fn is_complete(&self) -> bool {
        self.missing.iter().all(|&m| !m)
    }
}

/// Per-receiver erasure probabilities, each in `[0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ReceiverProfile {
    eps: Vec<f64>,
}

impl ReceiverProfile {
    pub fn new(eps: Vec<f64>) -> Result<Self> {
        if eps.is_empty() {
            return Err(Error::InvalidArgument("need at least one receiver".into()));
        }
        for &e in &eps {
            if !(0.0..1.0).contains(&e) {
                return Err(Error::InvalidArgument(format!(
                    "erasure probability {e} outside [0, 1)"
                )));
            }
        }
        Ok(ReceiverProfile { eps })
    }

    /// Same erasure probability for every receiver.
    pub fn uniform(eps: f64, receivers: usize) -> Result<Self> {
        Self::new(vec![eps; receivers])
    }

    pub fn len(&self) -> usize {
        self.eps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eps.is_empty()
    }

    pub fn erasure(&self, receiver: usize) -> f64 {
        self.eps[receiver]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.eps
    }
}

/// Urgency of a receiver with respect to one window and the slots left.
///
/// With `w` packets still missing in the window and `q` slots remaining:
/// `w == q` is critical (no slot to spare), `w > q` is affected (cannot finish
/// even under ideal conditions), `0 < w < q` is non-critical, and `w == 0` is
/// satisfied.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReceiverClass {
    Critical,
    Affected,
    NonCritical,
    Satisfied,
}

/// Receiver classes and missing counts for one `(window, remaining)` pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Classification {
    window: usize,
    remaining: usize,
    classes: Vec<ReceiverClass>,
    wants: Vec<usize>,
}

impl Classification {
    pub fn window(&self) -> usize {
        self.window
    }

    /// Slots that were left when the classification was taken.
    pub fn remaining(&self) -> usize {
        self.remaining
    }

    pub fn receivers(&self) -> usize {
        self.classes.len()
    }

    pub fn class(&self, receiver: usize) -> ReceiverClass {
        self.classes[receiver]
    }

    /// Packets receiver `receiver` still misses inside the window.
    pub fn wants(&self, receiver: usize) -> usize {
        self.wants[receiver]
    }

    /// Receivers of the given class, ascending.
    pub fn receivers_in(&self, class: ReceiverClass) -> Vec<usize> {
        (0..self.classes.len()).filter(|&i| self.classes[i] == class).collect()
    }

    pub fn count_in(&self, class: ReceiverClass) -> usize {
        self.classes.iter().filter(|&&c| c == class).count()
    }

    /// Receivers still missing something in the window, ascending.
    pub fn active(&self) -> Vec<usize> {
        (0..self.classes.len()).filter(|&i| self.wants[i] > 0).collect()
    }

    pub fn any_affected(&self) -> bool {
        self.classes.contains(&ReceiverClass::Affected)
    }
}

fn check_window(gop: &LayeredGop, window: usize) -> Result<()> {
    if window == 0 || window > gop.layers() {
        return Err(Error::InvalidArgument(format!(
            "window {window} out of range 1..={}",
            gop.layers()
        )));
    }
    Ok(())
}

fn check_shape(f: &FeedbackMatrix, gop: &LayeredGop) -> Result<()> {
    if f.packets() != gop.total_packets() {
        return Err(Error::InvalidArgument(format!(
            "feedback matrix covers {} packets but the block has {}",
            f.packets(),
            gop.total_packets()
        )));
    }
    Ok(())
}

/// Packets receiver `receiver` still misses among the first `window` layers,
/// ascending.
pub fn wants_set(
    f: &FeedbackMatrix,
    gop: &LayeredGop,
    receiver: usize,
    window: usize,
) -> Result<Vec<usize>> {
    check_shape(f, gop)?;
    check_window(gop, window)?;
    if receiver >= f.receivers() {
        return Err(Error::InvalidArgument(format!("receiver {receiver} out of range")));
    }
    Ok((0..gop.layer_prefix(window)).filter(|&j| f.missing(receiver, j)).collect())
}

/// Size of [`wants_set`] without materialising it.
pub fn wants_count(
    f: &FeedbackMatrix,
    gop: &LayeredGop,
    receiver: usize,
    window: usize,
) -> Result<usize> {
    check_shape(f, gop)?;
    check_window(gop, window)?;
    if receiver >= f.receivers() {
        return Err(Error::InvalidArgument(format!("receiver {receiver} out of range")));
    }
    Ok((0..gop.layer_prefix(window)).filter(|&j| f.missing(receiver, j)).count())
}

/// Sorts every receiver into its urgency class for `window` given `remaining`
/// slots.
pub fn classify_receivers(
    f: &FeedbackMatrix,
    gop: &LayeredGop,
    window: usize,
    remaining: usize,
) -> Result<Classification> {
    check_shape(f, gop)?;
    check_window(gop, window)?;
    let mut classes = Vec::with_capacity(f.receivers());
    let mut wants = Vec::with_capacity(f.receivers());
    for i in 0..f.receivers() {
        let w = wants_count(f, gop, i, window)?;
        let class = if w == 0 {
            ReceiverClass::Satisfied
        } else if w > remaining {
            ReceiverClass::Affected
        } else if w == remaining {
            ReceiverClass::Critical
        } else {
            ReceiverClass::NonCritical
        };
        classes.push(class);
        wants.push(w);
    }
    Ok(Classification { window, remaining, classes, wants })
}

/// Smallest window any receiver still misses a packet in, or `None` once the
/// whole block is delivered.
pub fn smallest_feasible_window(f: &FeedbackMatrix, gop: &LayeredGop) -> Option<usize> {
    for j in 0..gop.total_packets() {
        for i in 0..f.receivers() {
            if f.missing(i, j) {
                return Some(gop.layer_of(j));
            }
        }
    }
    None
}

/// Widest window every receiver could still finish within `remaining` slots.
///
/// Falls back to the smallest feasible window when even that one has a
/// receiver with more missing packets than slots left; `None` once the block
/// is delivered.
pub fn largest_feasible_window(
    f: &FeedbackMatrix,
    gop: &LayeredGop,
    remaining: usize,
) -> Option<usize> {
    let smallest = smallest_feasible_window(f, gop)?;
    for window in (smallest..=gop.layers()).rev() {
        let fits = (0..f.receivers())
            .all(|i| wants_count(f, gop, i, window).expect("checked shape") <= remaining);
        if fits {
            return Some(window);
        }
    }
    Some(smallest)
}

/// Applies one slot of acknowledgements: `targeted[k]` names a receiver and
/// the packet a transmission would deliver to it, `received[k]` says whether
/// that receiver heard the slot.
pub fn apply_feedback(
    f: &mut FeedbackMatrix,
    targeted: &[(usize, usize)],
    received: &[bool],
) -> Result<()> {
    if targeted.len() != received.len() {
        return Err(Error::InvalidArgument(format!(
            "{} targeted pairs but {} outcomes",
            targeted.len(),
            received.len()
        )));
    }
    for &(i, j) in targeted {
        if i >= f.receivers() || j >= f.packets() {
            return Err(Error::InvalidArgument(format!("pair ({i}, {j}) out of range")));
        }
        if f.has(i, j) {
            return Err(Error::AlreadyHeld { receiver: i, packet: j });
        }
    }
    for (&(i, j), &ok) in targeted.iter().zip(received) {
        if ok {
            f.mark_received(i, j);
        }
    }
    Ok(())
}

/// Number of leading layers receiver `receiver` holds completely.
pub fn complete_prefix_layers(f: &FeedbackMatrix, gop: &LayeredGop, receiver: usize) -> usize {
    let mut done = 0;
    for window in 1..=gop.layers() {
        let all = (gop.layer_prefix(window - 1)..gop.layer_prefix(window))
            .all(|j| f.has(receiver, j));
        if all {
            done = window;
        } else {
            break;
        }
    }
    done
}

/// Position inside the slot budget of one session: slot `1` through `horizon`,
/// then one past the end once the deadline hits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionClock {
    slot: usize,
    horizon: usize,
}

impl SessionClock {
    pub fn new(horizon: usize) -> Self {
        SessionClock { slot: 1, horizon }
    }

    /// Current 1-based slot.
    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Slots still usable, counting the current one.
    pub fn remaining(&self) -> usize {
        self.horizon + 1 - self.slot
    }

    pub fn expired(&self) -> bool {
        self.slot > self.horizon
    }

    pub fn advance(&mut self) {
        assert!(!self.expired(), "advanced past the deadline");
        self.slot += 1;
    }
}
