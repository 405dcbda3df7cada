//! End-to-end acceptance checks: analytic golden values, oracle equivalence,
//! randomized invariants, and desk-scale statistical trends for every
//! scheduler the simulator ships.  Each test prints one summary line, so
//! `cargo test -p idnc-sim --test acceptance -- --nocapture` doubles as an
//! acceptance report.

use std::time::{Duration, Instant};

use idnc::graph::{
    build_graph, decode_attempt, enumerate_maximal_cliques_with_budget, Clique, Vertex,
};
use idnc::model::{
    classify_receivers, complete_prefix_layers, largest_feasible_window, smallest_feasible_window,
    wants_count, wants_set, FeedbackMatrix, LayeredGop, ReceiverClass, ReceiverProfile,
    SessionClock,
};
use idnc::prob::{post_selection_bound, prob_complete_within};
use idnc::rlnc::{
    decodable_layers, enumerate_policies, per_receiver_decode_prob, select_policy, EvalParams,
};
use idnc::sched::{
    ew_idnc_step, expected_affected_increase, max_clique_baseline_step, now_idnc_step,
    select_clique_exact, select_clique_heuristic, SelectionMethod,
};
use idnc_sim::config::{GopSpec, SchedulerKind, SimConfig};
use idnc_sim::episode::{run_episode, Session};
use idnc_sim::report::{run_scenario, SummaryRow};
use idnc_sim::rng::scenario_stream;
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

const EXACT_TOL: f64 = 1e-12;
const VALUE_TOL: f64 = 1e-9;

fn pooled_se(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// Runs the stock 15-receiver, 25-slot, [8,3,3,3] scenario for one scheduler.
fn summary(kind: SchedulerKind, lambda: f64) -> SummaryRow {
    let config = SimConfig { scheduler: kind, lambda, ..SimConfig::default() };
    run_scenario(&config).expect("scenario runs").summary
}

/// Random mid-session state: layered block, partially delivered feedback
/// matrix, and heterogeneous erasure probabilities.
fn random_state(
    rng: &mut StdRng,
    max_receivers: usize,
    max_packets: usize,
) -> (FeedbackMatrix, LayeredGop, ReceiverProfile) {
    let receivers = rng.gen_range(1..=max_receivers);
    let packets = rng.gen_range(1..=max_packets);
    let mut sizes = Vec::new();
    let mut left = packets;
    while left > 0 {
        let take = rng.gen_range(1..=left);
        sizes.push(take);
        left -= take;
    }
    let gop = LayeredGop::new(&sizes).unwrap();
    let mut f = FeedbackMatrix::all_missing(receivers, packets);
    for i in 0..receivers {
        for j in 0..packets {
            if rng.gen_bool(0.55) {
                f.mark_received(i, j);
            }
        }
    }
    let eps = (0..receivers).map(|_| rng.gen_range(0.05..0.45)).collect();
    let profile = ReceiverProfile::new(eps).unwrap();
    (f, gop, profile)
}

/// Two receivers, two single-packet layers, two slots left: the first
/// receiver misses only the refinement packet, the second misses both.  The
/// completion chances of the two natural openings from this state have
/// closed-form values that both the analytic path and the simulator must hit.
#[test]
fn worked_example_completion_probabilities() {
    let started = Instant::now();
    let gop = LayeredGop::new(&[1, 1]).unwrap();
    let profile = ReceiverProfile::uniform(0.2, 2).unwrap();
    let initial = FeedbackMatrix::from_rows(&[&[0, 1], &[1, 1]]);

    // The two openings the schedulers produce from this state: the
    // smallest-window step retransmits the base packet to its straggler, the
    // coverage-greedy step broadcasts the refinement packet to both.
    let clock = SessionClock::new(2);
    let base_first =
        now_idnc_step(&initial, &gop, &clock, &profile, SelectionMethod::Heuristic).unwrap();
    assert_eq!(base_first.window, 1);
    assert_eq!(base_first.clique.vertices(), &[Vertex::new(1, 0)]);
    let coverage_first = max_clique_baseline_step(&initial, &gop).unwrap();
    assert_eq!(coverage_first.clique.vertices(), &[Vertex::new(0, 1), Vertex::new(1, 1)]);

    // Completion chance of the first `window` layers given which receivers
    // the opening slot serves inside that window.
    let chance = |window: usize, targeted: &[usize]| {
        let classes = classify_receivers(&initial, &gop, window, 2).unwrap();
        post_selection_bound(&classes, targeted, &profile).unwrap().value
    };
    let analytic = [
        (chance(1, &[1]), 0.96),      // base-packet opening, base layer done in 2 slots
        (chance(2, &[1]), 0.512),     // base-packet opening, both layers done
        (chance(1, &[]), 0.8),        // refinement opening, base layer done
        (chance(2, &[0, 1]), 0.6144), // refinement opening, both layers done
    ];
    for (got, want) in analytic {
        assert!((got - want).abs() < EXACT_TOL, "analytic value {got} differs from {want}");
    }

    // Monte Carlo confirmation over 10^5 independent channel draws per case.
    let runs = 100_000u32;
    let mut rng = StdRng::seed_from_u64(2024);
    let mut base_hits = [0u32; 2];
    let mut coverage_hits = [0u32; 2];
    for _ in 0..runs {
        let mut s = Session::with_initial_state(gop.clone(), initial.clone(), 2);
        while !s.clock().expired() && !s.complete() {
            let d = now_idnc_step(s.feedback(), s.gop(), s.clock(), &profile, SelectionMethod::Heuristic)
                .unwrap();
            let r: Vec<bool> = (0..2).map(|_| rng.gen_bool(0.8)).collect();
            s.transmit(&d.clique, &r);
        }
        base_hits[0] += u32::from((0..2).all(|i| s.decoded_layers(i) >= 1));
        base_hits[1] += u32::from(s.complete());

        let mut s = Session::with_initial_state(gop.clone(), initial.clone(), 2);
        let d = max_clique_baseline_step(s.feedback(), s.gop()).unwrap();
        let r: Vec<bool> = (0..2).map(|_| rng.gen_bool(0.8)).collect();
        s.transmit(&d.clique, &r);
        if !s.complete() {
            let d = ew_idnc_step(s.feedback(), s.gop(), s.clock(), 0.5, &profile, SelectionMethod::Heuristic)
                .unwrap();
            let r: Vec<bool> = (0..2).map(|_| rng.gen_bool(0.8)).collect();
            s.transmit(&d.clique, &r);
        }
        coverage_hits[0] += u32::from((0..2).all(|i| s.decoded_layers(i) >= 1));
        coverage_hits[1] += u32::from(s.complete());
    }
    let checks = [
        (base_hits[0], 0.96),
        (base_hits[1], 0.512),
        (coverage_hits[0], 0.8),
        (coverage_hits[1], 0.6144),
    ];
    for (hits, p) in checks {
        let p_hat = f64::from(hits) / f64::from(runs);
        let se = (p * (1.0 - p) / f64::from(runs)).sqrt();
        assert!(
            (p_hat - p).abs() <= 3.0 * se,
            "simulated {p_hat:.5} strays more than 3 SE ({:.5}) from analytic {p}",
            3.0 * se
        );
    }
    assert!(started.elapsed() < Duration::from_secs(10), "worked example over time budget");
    println!(
        "criterion 1 (worked-example completion probabilities): PASS — \
         analytic 0.96/0.512/0.8/0.6144 exact, simulation within 3 SE"
    );
}

/// The closed-form completion probability must agree with brute-force
/// enumeration of every possible erasure pattern.
#[test]
fn completion_probability_matches_exhaustive_enumeration() {
    let started = Instant::now();
    for eps in [0.05, 0.2, 0.35, 0.5] {
        for remaining in 0..=10usize {
            for wants in 0..=remaining {
                let mut total = 0.0;
                for pattern in 0u32..1 << remaining {
                    let mut weight = 1.0;
                    let mut delivered = 0usize;
                    for slot in 0..remaining {
                        if pattern >> slot & 1 == 1 {
                            weight *= 1.0 - eps;
                            delivered += 1;
                        } else {
                            weight *= eps;
                        }
                    }
                    if delivered >= wants {
                        total += weight;
                    }
                }
                let closed = prob_complete_within(wants, remaining, eps).unwrap();
                assert!(
                    (closed - total).abs() < EXACT_TOL,
                    "W={wants} Q={remaining} eps={eps}: closed {closed} vs enumerated {total}"
                );
            }
        }
    }
    assert!(started.elapsed() < Duration::from_secs(5), "enumeration over time budget");
    println!(
        "criterion 2 (completion probability vs exhaustive enumeration): PASS — \
         all W ≤ Q ≤ 10 at four erasure rates, tolerance 1e-12"
    );
}

/// On random small instances the greedy selection must return a valid clique
/// and never beat the enumerating selector on either stage objective.
#[test]
fn heuristic_selection_never_beats_exact() {
    let started = Instant::now();
    let mut rng = StdRng::seed_from_u64(7);
    let mut checked = 0;
    while checked < 500 {
        let (f, gop, profile) = random_state(&mut rng, 5, 8);
        let Some(smallest) = smallest_feasible_window(&f, &gop) else { continue };
        let remaining = rng.gen_range(1..=8);
        let widest = largest_feasible_window(&f, &gop, remaining).unwrap();
        let window = rng.gen_range(smallest..=widest);
        checked += 1;

        let exact = select_clique_exact(&f, &gop, window, remaining, &profile, 40).unwrap();
        let heur = select_clique_heuristic(&f, &gop, window, remaining, &profile).unwrap();
        let classes = classify_receivers(&f, &gop, window, remaining).unwrap();

        // Validity: adjacency accepted by the graph itself, one vertex per
        // receiver.
        let graph = build_graph(&f, &gop, window).unwrap();
        Clique::from_vertices(&graph, heur.clique.vertices().to_vec()).unwrap();
        assert_eq!(heur.clique.targeted_receivers().len(), heur.clique.len());

        let part = |clique: &Clique, class: ReceiverClass| -> Vec<Vertex> {
            clique.vertices().iter().filter(|v| classes.class(v.receiver) == class).copied().collect()
        };
        let receivers = |vs: &[Vertex]| vs.iter().map(|v| v.receiver).collect::<Vec<_>>();
        let (ec, en) = (part(&exact.clique, ReceiverClass::Critical), part(&exact.clique, ReceiverClass::NonCritical));
        let (hc, hn) = (part(&heur.clique, ReceiverClass::Critical), part(&heur.clique, ReceiverClass::NonCritical));

        // First stage minimises the expected number of receivers pushed past
        // the deadline; the greedy result can never be below the enumerated
        // minimum.
        let h1 = expected_affected_increase(&classes, &receivers(&hc), &profile).unwrap();
        let e1 = expected_affected_increase(&classes, &receivers(&ec), &profile).unwrap();
        assert!(h1 >= e1 - VALUE_TOL, "greedy first stage {h1} beat the exact minimum {e1}");

        // Second stage maximises the joint completion chance of the
        // non-urgent audience.  The stages share a candidate set only when
        // the first-stage cliques coincide, so the dominance claim is scoped
        // to that case.
        if hc == ec {
            let product = |served: &[Vertex]| {
                let served = receivers(served);
                classes
                    .receivers_in(ReceiverClass::NonCritical)
                    .iter()
                    .map(|&i| {
                        let budget = if served.contains(&i) { remaining } else { remaining - 1 };
                        prob_complete_within(classes.wants(i), budget, profile.erasure(i)).unwrap()
                    })
                    .product::<f64>()
            };
            let h2 = product(&hn);
            let e2 = product(&en);
            assert!(h2 <= e2 + VALUE_TOL, "greedy second stage {h2} beat the exact maximum {e2}");
        }
    }
    assert!(started.elapsed() < Duration::from_secs(60), "selection oracle over time budget");
    println!(
        "criterion 3 (greedy selection vs enumerating selector): PASS — \
         500 random instances, objectives never better than exact"
    );
}

/// Desk-scale statistical reproduction of the published scheduler
/// comparisons: 15 receivers, block [8,3,3,3], 25 slots, mean erasure 0.2,
/// 1000 runs per scenario.
#[test]
fn desk_scale_scheduler_trends() {
    let started = Instant::now();
    let lambdas = [0.2, 0.35, 0.5, 0.65, 0.8, 0.95];
    let curve: Vec<SummaryRow> = lambdas.iter().map(|&l| summary(SchedulerKind::EwIdnc, l)).collect();
    let ew95 = curve.last().unwrap();
    let smallest = summary(SchedulerKind::NowIdnc, 0.95);
    let coverage = summary(SchedulerKind::MaxClique, 0.95);
    let coded = summary(SchedulerKind::EwRlnc, 0.65);

    let mut failures: Vec<String> = Vec::new();
    let mut note = |ok: bool, line: String| {
        println!("  trend {}: {line}", if ok { "ok  " } else { "FAIL" });
        if !ok {
            failures.push(line);
        }
    };

    // (a) expanding-window scheduling protects the worst receiver far better
    // than deadline-blind coverage scheduling.
    let margin = ew95.min_pct_mean - coverage.min_pct_mean;
    let need = 3.0 * pooled_se(ew95.min_pct_se, coverage.min_pct_se);
    note(
        margin >= need,
        format!(
            "(a) min% margin over coverage-greedy {margin:.2} (threshold 0.95: {:.2}, coverage: {:.2}), needs ≥ {need:.2}",
            ew95.min_pct_mean, coverage.min_pct_mean
        ),
    );

    // (b) raising the confidence floor trades mean quality for worst-case
    // quality monotonically, up to one pooled standard error per step.
    for pair in curve.windows(2) {
        let (lo, hi) = (&pair[0], &pair[1]);
        let slack = pooled_se(lo.min_pct_se, hi.min_pct_se);
        note(
            hi.min_pct_mean >= lo.min_pct_mean - slack,
            format!(
                "(b) min% λ {:.2}→{:.2}: {:.2} → {:.2}, slack {slack:.2}",
                lo.lambda, hi.lambda, lo.min_pct_mean, hi.min_pct_mean
            ),
        );
        let slack = pooled_se(lo.mean_pct_se, hi.mean_pct_se);
        note(
            hi.mean_pct_mean <= lo.mean_pct_mean + slack,
            format!(
                "(b) mean% λ {:.2}→{:.2}: {:.2} → {:.2}, slack {slack:.2}",
                lo.lambda, hi.lambda, lo.mean_pct_mean, hi.mean_pct_mean
            ),
        );
    }

    // (c) the fixed smallest-window scheduler matches the threshold-0.95
    // expanding scheduler on worst-case quality while losing on mean quality.
    let gap = (smallest.min_pct_mean - ew95.min_pct_mean).abs();
    let allowed = 2.0 * pooled_se(smallest.min_pct_se, ew95.min_pct_se);
    note(
        gap <= allowed,
        format!(
            "(c) min% gap smallest-window vs threshold-0.95: {gap:.2} ({:.2} vs {:.2}), allowed ≤ {allowed:.2}",
            smallest.min_pct_mean, ew95.min_pct_mean
        ),
    );
    note(
        smallest.mean_pct_mean < ew95.mean_pct_mean,
        format!(
            "(c) mean% smallest-window {:.2} strictly below threshold-0.95 {:.2}",
            smallest.mean_pct_mean, ew95.mean_pct_mean
        ),
    );

    // (d) the open-loop coded baseline at its published operating point stays
    // close to the threshold-0.95 expanding scheduler on worst-case quality.
    let gap = (coded.min_pct_mean - ew95.min_pct_mean).abs();
    let allowed = 3.0 * pooled_se(coded.min_pct_se, ew95.min_pct_se);
    note(
        gap <= allowed,
        format!(
            "(d) min% gap open-loop coded vs threshold-0.95: {gap:.2} ({:.2} vs {:.2}), allowed ≤ {allowed:.2}",
            coded.min_pct_mean, ew95.min_pct_mean
        ),
    );

    assert!(started.elapsed() < Duration::from_secs(600), "trend suite over time budget");
    if failures.is_empty() {
        println!("criterion 4 (desk-scale scheduler trends): PASS");
    } else {
        println!(
            "criterion 4 (desk-scale scheduler trends): FAIL — {} trend check(s) missed",
            failures.len()
        );
        panic!("trend checks failed:\n{}", failures.join("\n"));
    }
}

/// The exact policy evaluator, the open-loop channel simulation, and the
/// policy selector must all tell the same story on the smallest interesting
/// block.
#[test]
fn policy_evaluator_matches_open_loop_simulation() {
    let started = Instant::now();
    let gop = LayeredGop::new(&[1, 1]).unwrap();
    let params = EvalParams::default();
    let policies = enumerate_policies(3, 2, 1_000_000).unwrap();
    assert_eq!(policies.len(), 4);

    let runs = 100_000u32;
    let mut rng = StdRng::seed_from_u64(99);
    for policy in &policies {
        for layer in 1..=2usize {
            let exact = per_receiver_decode_prob(policy, &gop, layer, 0.5, &params).unwrap();
            assert!(exact.std_error.is_none(), "tiny state space must enumerate exactly");
            let mut hits = 0u32;
            for _ in 0..runs {
                let received: Vec<usize> = policy
                    .counts()
                    .iter()
                    .map(|&slots| (0..slots).filter(|_| rng.gen_bool(0.5)).count())
                    .collect();
                hits += u32::from(decodable_layers(&received, &gop) >= layer);
            }
            let p_hat = f64::from(hits) / f64::from(runs);
            let se = (exact.value * (1.0 - exact.value) / f64::from(runs)).sqrt();
            assert!(
                (p_hat - exact.value).abs() <= 3.0 * se.max(1e-9),
                "policy {:?} layer {layer}: simulated {p_hat:.5} vs exact {:.5}",
                policy.counts(),
                exact.value
            );
        }
    }

    // The selector must reproduce an independent exhaustive search for any
    // confidence floor, including the frozen hand-derived picks.
    let profile = ReceiverProfile::uniform(0.5, 1).unwrap();
    for lambda in [0.0, 0.3, 0.6, 0.9] {
        let chosen = select_policy(&gop, 3, &profile, lambda, &params).unwrap();
        let mut best: Option<(usize, f64, &[usize])> = None;
        for policy in &policies {
            let probs: Vec<f64> = (1..=2)
                .map(|l| per_receiver_decode_prob(policy, &gop, l, 0.5, &params).unwrap().value)
                .collect();
            let guarded = probs.iter().take_while(|&&p| p >= lambda).count();
            let next = if guarded == 2 { f64::INFINITY } else { probs[guarded] };
            let better = match &best {
                None => true,
                Some((g, n, _)) => guarded > *g || (guarded == *g && next > *n),
            };
            if better {
                best = Some((guarded, next, policy.counts()));
            }
        }
        assert_eq!(chosen.policy.counts(), best.unwrap().2, "selector diverged at λ={lambda}");
    }
    let at = |lambda: f64| select_policy(&gop, 3, &profile, lambda, &params).unwrap();
    assert_eq!(at(0.0).policy.counts(), &[0, 3]);
    assert_eq!(at(0.6).policy.counts(), &[1, 2]);
    assert_eq!(at(0.9).policy.counts(), &[3, 0]);

    assert!(started.elapsed() < Duration::from_secs(30), "policy suite over time budget");
    println!(
        "criterion 5 (policy evaluator vs open-loop simulation): PASS — \
         4 policies × 2 layers within 3 SE; selector equals exhaustive search"
    );
}

/// Five structural invariants, each exercised on 1000 random states.
#[test]
fn randomized_invariants_hold() {
    // Once a receiver needs more slots than remain for some prefix, no single
    // slot of progress can rescue it: the condition is absorbing.
    let mut rng = StdRng::seed_from_u64(11);
    for _ in 0..1000 {
        let (f, gop, _) = random_state(&mut rng, 5, 8);
        let remaining = rng.gen_range(1..=6);
        let mut next = f.clone();
        for i in 0..f.receivers() {
            let wants = wants_set(&f, &gop, i, gop.layers()).unwrap();
            if !wants.is_empty() && rng.gen_bool(0.7) {
                next.mark_received(i, wants[rng.gen_range(0..wants.len())]);
            }
        }
        for window in 1..=gop.layers() {
            let before = classify_receivers(&f, &gop, window, remaining).unwrap();
            let after = classify_receivers(&next, &gop, window, remaining - 1).unwrap();
            for i in 0..f.receivers() {
                if before.class(i) == ReceiverClass::Affected {
                    assert_eq!(
                        after.class(i),
                        ReceiverClass::Affected,
                        "missing-too-much must be absorbing"
                    );
                }
            }
        }
    }

    // Widening the window only adds wanted packets, and a delivery removes
    // exactly the delivered packet.
    for _ in 0..1000 {
        let (f, gop, _) = random_state(&mut rng, 5, 8);
        for i in 0..f.receivers() {
            let mut prev: Vec<usize> = Vec::new();
            for window in 1..=gop.layers() {
                let cur = wants_set(&f, &gop, i, window).unwrap();
                assert_eq!(cur.len(), wants_count(&f, &gop, i, window).unwrap());
                assert!(prev.iter().all(|p| cur.contains(p)), "widening dropped a wanted packet");
                if let Some(&packet) = cur.first() {
                    let mut delivered = f.clone();
                    delivered.mark_received(i, packet);
                    let shrunk = wants_set(&delivered, &gop, i, window).unwrap();
                    assert_eq!(shrunk.len() + 1, cur.len());
                    assert!(!shrunk.contains(&packet));
                }
                prev = cur;
            }
        }
    }

    // Reported decoded depth is exactly the longest fully held prefix.
    for _ in 0..1000 {
        let (f, gop, _) = random_state(&mut rng, 5, 8);
        for i in 0..f.receivers() {
            let mut expected = 0;
            for window in 1..=gop.layers() {
                if (0..gop.layer_prefix(window)).all(|p| f.has(i, p)) {
                    expected = window;
                } else {
                    break;
                }
            }
            assert_eq!(complete_prefix_layers(&f, &gop, i), expected);
        }
    }

    // Graph edges encode exactly "same packet or mutual side information",
    // and every maximal clique is instantly decodable by all its targets.
    let mut checked = 0;
    while checked < 1000 {
        let (f, gop, _) = random_state(&mut rng, 5, 8);
        let Some(smallest) = smallest_feasible_window(&f, &gop) else { continue };
        checked += 1;
        let window = rng.gen_range(smallest..=gop.layers());
        let graph = build_graph(&f, &gop, window).unwrap();
        for a in 0..graph.vertex_count() {
            for b in a + 1..graph.vertex_count() {
                let (va, vb) = (graph.vertex(a), graph.vertex(b));
                let expected = va.receiver != vb.receiver
                    && (va.packet == vb.packet
                        || (f.has(va.receiver, vb.packet) && f.has(vb.receiver, va.packet)));
                assert_eq!(graph.adjacent(a, b), expected, "edge rule mismatch");
            }
        }
        for clique in enumerate_maximal_cliques_with_budget(&graph, 40).unwrap() {
            for v in clique.vertices() {
                let decoded = decode_attempt(&clique, |p| f.has(v.receiver, p));
                assert_eq!(decoded, Some(v.packet), "targeted receiver failed to decode");
            }
        }
    }

    // The same seed replays the same run exactly, for every engine.
    let schedulers = [
        SchedulerKind::EwIdnc,
        SchedulerKind::NowIdnc,
        SchedulerKind::MaxClique,
        SchedulerKind::EwRlnc,
    ];
    for trial in 0..1000 {
        let config = SimConfig {
            scheduler: schedulers[trial % schedulers.len()],
            receivers: 4,
            theta: Some(6),
            gop: GopSpec::Fixed { layers: vec![2, 1, 1] },
            runs: 1,
            seed: rng.gen(),
            ..SimConfig::default()
        };
        let erasures = config.sample_receiver_erasures(&mut scenario_stream(config.seed));
        let first = run_episode(&config, 0, &erasures, None).unwrap();
        let second = run_episode(&config, 0, &erasures, None).unwrap();
        assert_eq!(first, second, "replay diverged for {:?}", config.scheduler);
    }

    println!(
        "criterion 6 (randomized invariants): PASS — \
         absorbing urgency, wants monotonicity, prefix reporting, \
         decodability of every clique, and seeded replay, 1000 trials each"
    );
}

/// Under the stock scenario the threshold-0.95 expanding scheduler leaves
/// most receiver-runs at three or four decoded layers.
#[test]
fn decoded_depth_histogram_concentrates_high() {
    let row = summary(SchedulerKind::EwIdnc, 0.95);
    let total: u64 = row.hist.iter().sum();
    let deep: u64 = row.hist[3] + row.hist[4];
    assert!(
        deep * 2 > total,
        "only {deep} of {total} receiver-runs reached 3-4 decoded layers"
    );
    println!(
        "criterion 7 (decoded-depth histogram): PASS — \
         {deep}/{total} receiver-runs at 3-4 layers (strict majority)"
    );
}
