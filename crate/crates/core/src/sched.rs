//! Per-slot transmission selection.
//!
//! Every slot the sender picks a clique of the conflict graph: first among
//! critical receivers (those that need every remaining slot), minimising the
//! expected number of receivers pushed beyond saving, then among non-critical
//! receivers, maximising the chance that everyone still finishes in time.
//! Both an exact selector (enumerating maximal cliques) and a polynomial
//! greedy one are provided, and three per-slot policies are built from them:
//! a window-expanding scheduler, a stay-small scheduler, and a coverage-greedy
//! baseline that ignores deadline and layering altogether.

use crate::error::{Error, Result};
use crate::graph::{build_graph, enumerate_maximal_cliques_with_budget, Clique, IdncGraph};
use crate::model::{
    classify_receivers, largest_feasible_window, smallest_feasible_window, Classification,
    FeedbackMatrix, LayeredGop, ReceiverClass, ReceiverProfile, SessionClock,
};
use crate::prob::{post_selection_bound, prob_complete_within, CompletionBound};

/// How a per-slot policy should pick its clique.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SelectionMethod {
    /// Enumerate maximal cliques exactly; refuses windows whose graph exceeds
    /// `max_vertices` (at most 64).
    Exact { max_vertices: usize },
    /// Greedy vertex-by-vertex construction, polynomial in the graph size.
    Heuristic,
}

/// Quality floor for window expansion, in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignThreshold(f64);

impl DesignThreshold {
    pub fn new(value: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&value) {
            return Err(Error::InvalidArgument(format!("threshold {value} outside [0, 1]")));
        }
        Ok(DesignThreshold(value))
    }

    pub fn value(&self) -> f64 {
        self.0
    }
}

/// One slot's scheduling outcome: what to send, over which window, and how
/// the window's completion chances look afterwards (when the policy tracks
/// a deadline).
#[derive(Debug, Clone, PartialEq)]
pub struct SchedulerDecision {
    pub clique: Clique,
    pub window: usize,
    pub bound: Option<CompletionBound>,
}

/// Expected number of receivers pushed beyond saving when one slot elapses
/// and exactly the critical receivers in `targeted` are served: each one
/// escapes with its delivery probability, every other critical receiver is
/// lost for sure.
pub fn expected_affected_increase(
    classes: &Classification,
    targeted: &[usize],
    profile: &ReceiverProfile,
) -> Result<f64> {
    if profile.len() != classes.receivers() {
        return Err(Error::InvalidArgument(format!(
            "profile covers {} receivers, classification {}",
            profile.len(),
            classes.receivers()
        )));
    }
    for &i in targeted {
        if i >= classes.receivers() || classes.class(i) != ReceiverClass::Critical {
            return Err(Error::InvalidArgument(format!("receiver {i} is not critical")));
        }
    }
    Ok(critical_value(classes, targeted, profile))
}

fn critical_value(classes: &Classification, targeted: &[usize], profile: &ReceiverProfile) -> f64 {
    let escapes: f64 = targeted.iter().map(|&i| 1.0 - profile.erasure(i)).sum();
    classes.count_in(ReceiverClass::Critical) as f64 - escapes
}

// Product of per-receiver completion chances over the non-critical audience:
// served receivers keep the full budget, the rest have lost this slot.
fn noncritical_value(
    classes: &Classification,
    targeted: &[usize],
    profile: &ReceiverProfile,
) -> f64 {
    let remaining = classes.remaining();
    let mut value = 1.0;
    for i in classes.receivers_in(ReceiverClass::NonCritical) {
        let budget = if targeted.contains(&i) { remaining } else { remaining - 1 };
        value *= prob_complete_within(classes.wants(i), budget, profile.erasure(i))
            .expect("classification and profile were validated");
    }
    value
}

fn vertex_indices_of_class(
    graph: &IdncGraph,
    classes: &Classification,
    class: ReceiverClass,
) -> Vec<usize> {
    (0..graph.vertex_count())
        .filter(|&i| classes.class(graph.vertex(i).receiver) == class)
        .collect()
}

// Lexicographically first maximal clique among `candidates`; the last-resort
// transmission when every in-window receiver is already beyond saving.
fn lexicographic_fallback(graph: &IdncGraph, candidates: &[usize]) -> Vec<usize> {
    let mut clique: Vec<usize> = Vec::new();
    for &v in candidates {
        if clique.iter().all(|&u| graph.adjacent(u, v)) {
            clique.push(v);
        }
    }
    clique
}

fn decision_from_indices(
    graph: &IdncGraph,
    indices: &[usize],
    classes: &Classification,
    profile: &ReceiverProfile,
) -> Result<SchedulerDecision> {
    let mut vertices: Vec<_> = indices.iter().map(|&i| graph.vertex(i)).collect();
    vertices.sort();
    let clique = Clique::from_sorted_unchecked(vertices);
    let bound = post_selection_bound(classes, &clique.targeted_receivers(), profile)?;
    Ok(SchedulerDecision { clique, window: classes.window(), bound: Some(bound) })
}

fn check_selection_inputs(
    f: &FeedbackMatrix,
    profile: &ReceiverProfile,
    remaining: usize,
) -> Result<()> {
    if profile.len() != f.receivers() {
        return Err(Error::InvalidArgument(format!(
            "profile covers {} receivers, matrix {}",
            profile.len(),
            f.receivers()
        )));
    }
    if remaining == 0 {
        return Err(Error::InvalidArgument("no slots left".into()));
    }
    Ok(())
}

/// Exact two-stage selection over one window: enumerate maximal cliques of
/// the critical part, keep the best, then enumerate maximal extensions into
/// the non-critical part.  Ties break on the lexicographically smallest
/// vertex list.
pub fn select_clique_exact(
    f: &FeedbackMatrix,
    gop: &LayeredGop,
    window: usize,
    remaining: usize,
    profile: &ReceiverProfile,
    max_vertices: usize,
) -> Result<SchedulerDecision> {
    check_selection_inputs(f, profile, remaining)?;
    let graph = build_graph(f, gop, window)?;
    if graph.is_empty() {
        return Err(Error::InvalidArgument("window has no missing packets".into()));
    }
    if graph.vertex_count() > max_vertices {
        return Err(Error::CliqueBudget { vertices: graph.vertex_count(), budget: max_vertices });
    }
    let classes = classify_receivers(f, gop, window, remaining)?;

    let critical = vertex_indices_of_class(&graph, &classes, ReceiverClass::Critical);
    let mut chosen: Vec<usize> = Vec::new();
    if !critical.is_empty() {
        let sub = graph.induced(&critical);
        let mut best: Option<(f64, Vec<usize>)> = None;
        for clique in enumerate_maximal_cliques_with_budget(&sub, max_vertices)? {
            let value = critical_value(&classes, &clique.targeted_receivers(), profile);
            if best.as_ref().is_none_or(|(b, _)| value < *b) {
                let indices = clique
                    .vertices()
                    .iter()
                    .map(|&v| graph.index_of(v).unwrap())
                    .collect();
                best = Some((value, indices));
            }
        }
        chosen = best.expect("critical subgraph has vertices").1;
    }

    let extension: Vec<usize> = vertex_indices_of_class(&graph, &classes, ReceiverClass::NonCritical)
        .into_iter()
        .filter(|&u| chosen.iter().all(|&k| graph.adjacent(u, k)))
        .collect();
    if !extension.is_empty() {
        let sub = graph.induced(&extension);
        let mut best: Option<(f64, Vec<usize>)> = None;
        for clique in enumerate_maximal_cliques_with_budget(&sub, max_vertices)? {
            let value = noncritical_value(&classes, &clique.targeted_receivers(), profile);
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                let indices = clique
                    .vertices()
                    .iter()
                    .map(|&v| graph.index_of(v).unwrap())
                    .collect();
                best = Some((value, indices));
            }
        }
        chosen.extend(best.expect("extension subgraph has vertices").1);
    }

    if chosen.is_empty() {
        // Only receivers beyond saving remain in the window; keep the channel
        // busy with the first maximal clique rather than going silent.
        chosen = lexicographic_fallback(&graph, &(0..graph.vertex_count()).collect::<Vec<_>>());
    }
    decision_from_indices(&graph, &chosen, &classes, profile)
}

/// Greedy two-stage selection over one window.
///
/// Each step scores a candidate vertex by the best outcome still reachable
/// through it — serving its receiver plus every receiver that keeps a
/// compatible vertex — and keeps the winner, shrinking the candidate set to
/// the winner's neighbours before the next step.
pub fn select_clique_heuristic(
    f: &FeedbackMatrix,
    gop: &LayeredGop,
    window: usize,
    remaining: usize,
    profile: &ReceiverProfile,
) -> Result<SchedulerDecision> {
    check_selection_inputs(f, profile, remaining)?;
    let graph = build_graph(f, gop, window)?;
    if graph.is_empty() {
        return Err(Error::InvalidArgument("window has no missing packets".into()));
    }
    let classes = classify_receivers(f, gop, window, remaining)?;

    let mut chosen: Vec<usize> = Vec::new();
    let mut served: Vec<usize> = Vec::new();

    let mut candidates = vertex_indices_of_class(&graph, &classes, ReceiverClass::Critical);
    while !candidates.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for &v in &candidates {
            let mut reachable = served.clone();
            reachable.push(graph.vertex(v).receiver);
            reachable.extend(
                candidates
                    .iter()
                    .filter(|&&u| u != v && graph.adjacent(u, v))
                    .map(|&u| graph.vertex(u).receiver),
            );
            reachable.sort_unstable();
            reachable.dedup();
            let value = critical_value(&classes, &reachable, profile);
            if best.is_none_or(|(b, _)| value < b) {
                best = Some((value, v));
            }
        }
        let (_, v) = best.unwrap();
        chosen.push(v);
        served.push(graph.vertex(v).receiver);
        candidates.retain(|&u| u != v && graph.adjacent(u, v));
    }

    let mut candidates: Vec<usize> =
        vertex_indices_of_class(&graph, &classes, ReceiverClass::NonCritical)
            .into_iter()
            .filter(|&u| chosen.iter().all(|&k| graph.adjacent(u, k)))
            .collect();
    let mut served_noncritical: Vec<usize> = Vec::new();
    while !candidates.is_empty() {
        let mut best: Option<(f64, usize)> = None;
        for &v in &candidates {
            let mut reachable = served_noncritical.clone();
            reachable.push(graph.vertex(v).receiver);
            reachable.extend(
                candidates
                    .iter()
                    .filter(|&&u| u != v && graph.adjacent(u, v))
                    .map(|&u| graph.vertex(u).receiver),
            );
            reachable.sort_unstable();
            reachable.dedup();
            let value = noncritical_value(&classes, &reachable, profile);
            if best.is_none_or(|(b, _)| value > b) {
                best = Some((value, v));
            }
        }
        let (_, v) = best.unwrap();
        chosen.push(v);
        served_noncritical.push(graph.vertex(v).receiver);
        candidates.retain(|&u| u != v && graph.adjacent(u, v));
    }

    if chosen.is_empty() {
        chosen = lexicographic_fallback(&graph, &(0..graph.vertex_count()).collect::<Vec<_>>());
    }
    decision_from_indices(&graph, &chosen, &classes, profile)
}

fn select(
    f: &FeedbackMatrix,
    gop: &LayeredGop,
    window: usize,
    remaining: usize,
    profile: &ReceiverProfile,
    method: SelectionMethod,
) -> Result<SchedulerDecision> {
    match method {
        SelectionMethod::Exact { max_vertices } => {
            select_clique_exact(f, gop, window, remaining, profile, max_vertices)
        }
        SelectionMethod::Heuristic => select_clique_heuristic(f, gop, window, remaining, profile),
    }
}

/// Window-expanding per-slot policy.
///
/// Starts from the smallest window anyone still misses a packet in and keeps
/// widening while the post-selection completion bound stays at or above
/// `lambda`; on the first window that falls short it broadcasts the previous
/// selection (or the first one, when nothing better exists yet).  Values of
/// `lambda` above 1 therefore degenerate to the stay-small policy.
pub fn ew_idnc_step(
    f: &FeedbackMatrix,
    gop: &LayeredGop,
    clock: &SessionClock,
    lambda: f64,
    profile: &ReceiverProfile,
    method: SelectionMethod,
) -> Result<SchedulerDecision> {
    if clock.expired() {
        return Err(Error::InvalidArgument("deadline passed".into()));
    }
    let smallest = smallest_feasible_window(f, gop).ok_or(Error::SessionComplete)?;
    let widest = largest_feasible_window(f, gop, clock.remaining()).expect("session incomplete");
    let mut previous: Option<SchedulerDecision> = None;
    for window in smallest..=widest {
        let decision = select(f, gop, window, clock.remaining(), profile, method)?;
        let value = decision.bound.as_ref().expect("selection carries a bound").value;
        if value >= lambda {
            if window == widest {
                return Ok(decision);
            }
            previous = Some(decision);
        } else {
            return Ok(previous.unwrap_or(decision));
        }
    }
    unreachable!("loop returns at the widest window");
}

/// Stay-small per-slot policy: always serves the smallest window anyone still
/// misses a packet in, protecting base layers before refinements.
pub fn now_idnc_step(
    f: &FeedbackMatrix,
    gop: &LayeredGop,
    clock: &SessionClock,
    profile: &ReceiverProfile,
    method: SelectionMethod,
) -> Result<SchedulerDecision> {
    if clock.expired() {
        return Err(Error::InvalidArgument("deadline passed".into()));
    }
    let smallest = smallest_feasible_window(f, gop).ok_or(Error::SessionComplete)?;
    select(f, gop, smallest, clock.remaining(), profile, method)
}

/// Coverage-greedy baseline: over the full block, serve as many receivers at
/// once as possible, blind to layers and deadline.  Ties prefer the smallest
/// packet-index total, then the lexicographically smallest vertex list.
pub fn max_clique_baseline_step(f: &FeedbackMatrix, gop: &LayeredGop) -> Result<SchedulerDecision> {
    let graph = build_graph(f, gop, gop.layers())?;
    if graph.is_empty() {
        return Err(Error::SessionComplete);
    }
    let n = graph.vertex_count();
    let chosen: Vec<usize> = if n <= crate::graph::DEFAULT_ENUMERATION_BUDGET {
        let mut best: Option<(usize, usize, Vec<usize>)> = None;
        for clique in enumerate_maximal_cliques_with_budget(&graph, n)? {
            let size = clique.len();
            let packet_total: usize = clique.packets().iter().sum();
            let better = match &best {
                None => true,
                Some((s, p, _)) => size > *s || (size == *s && packet_total < *p),
            };
            if better {
                let indices =
                    clique.vertices().iter().map(|&v| graph.index_of(v).unwrap()).collect();
                best = Some((size, packet_total, indices));
            }
        }
        best.unwrap().2
    } else {
        // Too big to enumerate: grow a clique through high-degree vertices.
        let degree =
            |v: usize| (0..n).filter(|&u| graph.adjacent(u, v)).count();
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by_key(|&v| (std::cmp::Reverse(degree(v)), v));
        lexicographic_fallback(&graph, &order)
    };
    let mut vertices: Vec<_> = chosen.iter().map(|&i| graph.vertex(i)).collect();
    vertices.sort();
    Ok(SchedulerDecision {
        clique: Clique::from_sorted_unchecked(vertices),
        window: gop.layers(),
        bound: None,
    })
}
