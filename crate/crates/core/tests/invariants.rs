use equitrust_core::act::{softmax, update_source_preference, ActConfig, SourceWeights};
use equitrust_core::baselines::{gamma_m2002, greedy_hit_allocate};
use equitrust_core::crn::{aggregate_and_decide, apply_feedback, context_trust, CrnConfig, SensingReport, SuTrustRecord};
use equitrust_core::draft::{accept_plan, default_contexts, TrusteeState};
use equitrust_core::metrics::{fairness_index, naul};
use equitrust_core::reputation::{brs_score, Aggregation, BetaEvidence, RatingEvent, ReputationLedger};
use equitrust_core::sword::{allocate, check_queue_bound, desirability, SwordConfig, WorkerState};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn event(id: u64, completed: Option<u64>, deadline: u64, ok: bool) -> RatingEvent {
    RatingEvent {
        event_id: id,
        truster_id: 1,
        trustee_id: 2,
        context_id: 0,
        issued_at: 0,
        started_at: 0,
        completed_at: completed,
        deadline,
        quality_ok: ok,
    }
}

fn workers() -> impl Strategy<Value = Vec<WorkerState>> {
    prop::collection::vec((0.0..1.0f64, 0u32..8, 0u64..30), 1..20).prop_map(|v| {
        v.into_iter()
            .enumerate()
            .map(|(i, (tau, cap, q))| {
                let mut w = WorkerState::new(i as u32, cap);
                w.observe_reputation(tau);
                w.backlog = q;
                w
            })
            .collect()
    })
}

proptest! {
    #[test]
    fn brs_monotone(r in 0u64..500, s in 0u64..500) {
        let base = brs_score(BetaEvidence::new(r, s));
        prop_assert!(brs_score(BetaEvidence::new(r + 1, s)) > base);
        prop_assert!(brs_score(BetaEvidence::new(r, s + 1)) < base);
        prop_assert!(base > 0.0 && base < 1.0);
    }

    #[test]
    fn each_event_moves_one_count(
        done in prop::option::of(0u64..20),
        deadline in 0u64..20,
        ok: bool,
    ) {
        let mut ledger = ReputationLedger::new(Aggregation::Pooled);
        ledger.record_raw(2, 0, 1, true);
        let before = ledger.pooled(2, 0);
        ledger.record_outcome(&event(7, done, deadline, ok)).unwrap();
        let after = ledger.pooled(2, 0);
        let moved = (after.positives - before.positives) + (after.negatives - before.negatives);
        prop_assert_eq!(moved, 1);
    }

    #[test]
    fn late_success_is_quality_failure(deadline in 0u64..10, late in 1u64..10) {
        let mut a = ReputationLedger::new(Aggregation::MeanOfLocals);
        let mut b = ReputationLedger::new(Aggregation::MeanOfLocals);
        a.record_outcome(&event(1, Some(deadline + late), deadline, true)).unwrap();
        b.record_outcome(&event(1, Some(deadline), deadline, false)).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn softmax_sums_to_one_and_keeps_order(p in prop::collection::vec(-50.0..50.0f64, 1..30)) {
        let pi = softmax(&p);
        prop_assert!((pi.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        for i in 0..p.len() {
            for j in 0..p.len() {
                if p[i] > p[j] {
                    prop_assert!(pi[i] >= pi[j]);
                }
            }
        }
    }

    #[test]
    fn source_weights_stay_normalized(steps in prop::collection::vec((any::<bool>(), any::<bool>(), any::<bool>()), 0..200)) {
        let cfg = ActConfig::default();
        let mut w = SourceWeights::default();
        for (d, i, o) in steps {
            update_source_preference(&mut w, d, i, o, &cfg);
            prop_assert!((w.pi_direct + w.pi_indirect - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&w.gamma()));
        }
    }

    #[test]
    fn sword_conserves_and_respects_floor(ws in workers(), incoming in 0u64..200, seed: u64) {
        let cfg = SwordConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let plan = allocate(&ws, incoming, &cfg, &mut rng);
        prop_assert_eq!(plan.allocated() + plan.leftover, incoming);
        for (w, &c) in ws.iter().zip(&plan.counts) {
            prop_assert!(c <= w.capacity);
            if !plan.explored && c > 0 {
                prop_assert!(w.reputation >= cfg.rep_floor);
            }
        }
        let again = allocate(&ws, incoming, &cfg, &mut ChaCha8Rng::seed_from_u64(seed));
        prop_assert_eq!(plan, again);
    }

    #[test]
    fn desirability_falls_with_backlog(tau in 0.0..1.0f64, cap in 0u32..10, q in 0u64..100) {
        let cfg = SwordConfig::default();
        let mut w = WorkerState::new(0, cap);
        w.observe_reputation(tau);
        w.backlog = q;
        let d0 = desirability(&w, &cfg);
        w.backlog += 1;
        prop_assert!(desirability(&w, &cfg) < d0);
    }

    #[test]
    fn queue_bound_holds_under_any_arrivals(
        init in workers(),
        arrivals in prop::collection::vec((0u64..120, prop::collection::vec(0.0..1.0f64, 20)), 1..60),
        seed: u64,
    ) {
        let cfg = SwordConfig::default();
        let mut ws: Vec<WorkerState> = init.into_iter().map(|mut w| { w.backlog = 0; w }).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for (incoming, taus) in arrivals {
            for (w, t) in ws.iter_mut().zip(&taus) {
                w.observe_reputation(*t);
            }
            let plan = allocate(&ws, incoming, &cfg, &mut rng);
            for (w, c) in ws.iter_mut().zip(&plan.counts) {
                w.backlog += *c as u64;
                prop_assert!(check_queue_bound(w, &cfg).is_ok());
            }
            for w in ws.iter_mut() {
                w.backlog -= w.backlog.min(w.capacity as u64);
            }
        }
    }

    #[test]
    fn draft_plans_fit_budget(
        budget in 0u32..40,
        backlog in prop::collection::vec(0u64..30, 5),
        reps in prop::collection::vec(0.0..1.0f64, 5),
        incoming in prop::collection::vec(0u64..20, 5),
        v in 0.1..1000.0f64,
    ) {
        let specs = default_contexts();
        let mut st = TrusteeState::new(0, budget, 5);
        st.backlog = backlog;
        st.reputation = reps;
        let plan = accept_plan(&st, &incoming, &specs, v);
        let effort: u64 = plan.accepted.iter().zip(&specs).map(|(a, s)| a * s.effort as u64).sum();
        prop_assert!(effort <= budget as u64);
        prop_assert_eq!(effort + plan.budget_left as u64, budget as u64);
        for c in 0..5 {
            prop_assert!(plan.accepted[c] <= incoming[c]);
            prop_assert_eq!(plan.accepted[c] + plan.rejected[c], incoming[c]);
        }
        // A context with a worse score per effort is only served once every
        // better one is exhausted or no longer fits.
        let per = |c: usize| plan.scores[c] / specs[c].effort as f64;
        for i in 0..5 {
            for j in 0..5 {
                if per(i) > per(j) && per(j) > 0.0 && plan.accepted[j] > 0 {
                    let left_i = incoming[i] - plan.accepted[i];
                    prop_assert!(left_i == 0 || plan.budget_left < specs[i].effort);
                }
            }
        }
    }

    #[test]
    fn m2002_monotone_and_clamped(n in 0u64..10_000) {
        let a = gamma_m2002(n, 0.1, 0.95).unwrap();
        let b = gamma_m2002(n + 1, 0.1, 0.95).unwrap();
        prop_assert!(b >= a && b <= 1.0);
    }

    #[test]
    fn greedy_never_picks_below_threshold(reps in prop::collection::vec(0.0..1.0f64, 0..60), hits in 0u32..100, th in 0.0..1.0f64) {
        let workers: Vec<(u32, f64)> = reps.iter().enumerate().map(|(i, &r)| (i as u32, r)).collect();
        let plan = greedy_hit_allocate(&workers, hits, th);
        for (id, n) in &plan.assignments {
            prop_assert!(*n > 0);
            prop_assert!(workers[*id as usize].1 >= th);
        }
        prop_assert_eq!(plan.assigned() + plan.unassigned, hits);
    }

    #[test]
    fn fairness_scale_invariant(counts in prop::collection::vec(0u64..1000, 1..50), k in 1u64..50) {
        let scaled: Vec<u64> = counts.iter().map(|c| c * k).collect();
        match (fairness_index(&counts), fairness_index(&scaled)) {
            (Some(a), Some(b)) => prop_assert!((a - b).abs() < 1e-12),
            (a, b) => prop_assert_eq!(a, b),
        }
    }

    #[test]
    fn naul_extremes_sum_to_one(c in 0.01..10.0f64, extra in 0.01..10.0f64, n in 1usize..50) {
        let g = c + extra;
        let s = naul(&vec![true; n], g, c).unwrap() + naul(&vec![false; n], g, c).unwrap();
        prop_assert!((s - 1.0).abs() < 1e-12);
    }

    #[test]
    fn context_trust_bounded_and_monotone(
        entries in prop::collection::vec((0.0..20.0f64, 0.0..20.0f64), 0..25),
        rho in 0.5..1.0f64,
    ) {
        let mut r = SuTrustRecord::new(20, rho);
        for (a, b) in entries {
            r.push(a, b);
            prop_assert!((0.0..=1.0).contains(&context_trust(&r)));
        }
        let before = context_trust(&r);
        r.push(1.0, 0.0);
        let window_full = r.window.len() == r.capacity;
        if !window_full {
            prop_assert!(context_trust(&r) >= before - 1e-12);
        }
    }

    #[test]
    fn complaint_drops_trust_below_floor(prior in 0usize..=20) {
        let cfg = CrnConfig::default();
        let mut recs = vec![SuTrustRecord::new(20, cfg.rho2)];
        for _ in 0..prior {
            recs[0].push(1.0, 0.0);
        }
        let idle = SensingReport { su_id: 0, verdict: -1, confidence: 0.9 };
        apply_feedback(&mut recs, &[idle], -1, true, &cfg);
        prop_assert!(context_trust(&recs[0]) < cfg.trust_floor);
    }

    #[test]
    fn decision_sign_symmetric(
        verdicts in prop::collection::vec(-1i8..=1, 0..30),
        trusts in prop::collection::vec(0.0..1.0f64, 30),
        bs in -1i8..=1,
        conf in 0.0..1.0f64,
    ) {
        let cfg = CrnConfig::default();
        let reps: Vec<SensingReport> = verdicts.iter().enumerate().map(|(i, &v)| SensingReport { su_id: i as u32, verdict: v, confidence: 0.9 }).collect();
        let neg: Vec<SensingReport> = reps.iter().map(|r| SensingReport { verdict: -r.verdict, ..*r }).collect();
        let subs = SensingReport { su_id: 99, verdict: bs, confidence: conf };
        let (r1, d1) = aggregate_and_decide(&subs, &reps, &trusts[..reps.len()], &cfg);
        let (r2, d2) = aggregate_and_decide(&SensingReport { verdict: -bs, ..subs }, &neg, &trusts[..reps.len()], &cfg);
        prop_assert!((r1 + r2).abs() < 1e-12);
        prop_assert_eq!(d1, -d2);
    }
}
