use std::collections::BTreeMap;

use babble_core::caregiver::SimCaregiver;
use babble_core::*;

fn associative(seed: u64, condition: FeedbackCondition, trials: usize) -> EpisodeLog {
    let cfg = SessionConfig {
        seed,
        condition,
        min_iterations: trials,
        max_iterations: trials,
        ..SessionConfig::default()
    }
    .with_caregiver(CaregiverKind::Associative);
    run_episode(&cfg).unwrap()
}

fn late_accuracy(log: &EpisodeLog, last: usize) -> f64 {
    let tail = &log.trials[log.trials.len() - last..];
    tail.iter().filter(|t| t.reward == Reward::Success).count() as f64 / last as f64
}

/// Fraction of rewarded words whose outcome-route evidence peaks on the
/// object that satisfied them most often.
fn outcome_route_alignment(log: &EpisodeLog) -> Option<(usize, usize)> {
    let Some(SimCaregiver::Associative(state)) = &log.caregiver else { return None };
    let mut wins: BTreeMap<&str, [usize; 3]> = BTreeMap::new();
    for t in log.trials.iter().filter(|t| t.reward == Reward::Success) {
        wins.entry(&t.word).or_default()[t.offered_object.index()] += 1;
    }
    let mut aligned = 0;
    for (word, counts) in &wins {
        let target = (0..3).max_by_key(|&i| (counts[i], std::cmp::Reverse(i))).unwrap();
        let ev = state.outcome_evidence(word);
        let best = (0..3).max_by(|&a, &b| ev[a].total_cmp(&ev[b])).unwrap();
        if best == target {
            aligned += 1;
        }
    }
    Some((aligned, wins.len()))
}

#[test]
fn random_caregiver_expected_reward() {
    let mut total = 0i64;
    let mut count = 0i64;
    for seed in 0..500 {
        let cfg = SessionConfig { seed, ..SessionConfig::default() }.with_caregiver(CaregiverKind::Random);
        let log = run_episode(&cfg).unwrap();
        for t in &log.trials {
            total += t.reward.value();
            count += 1;
        }
    }
    let mean = total as f64 / count as f64;
    assert!((mean + 1.0 / 3.0).abs() < 0.05, "mean reward {mean}");
}

#[test]
fn dot_raises_late_accuracy_over_thirty_trials() {
    let (mut dot, mut nondot) = (0.0, 0.0);
    for seed in 0..200 {
        dot += late_accuracy(&associative(seed, FeedbackCondition::Dot, 30), 10);
        nondot += late_accuracy(&associative(seed, FeedbackCondition::NonDot, 30), 10);
    }
    assert!(dot > nondot, "DOT {} NonDOT {}", dot / 200.0, nondot / 200.0);
}

#[test]
fn outcome_route_tracks_need_only_in_dot() {
    let mut frac = BTreeMap::new();
    for condition in [FeedbackCondition::Dot, FeedbackCondition::NonDot] {
        let (mut a, mut n) = (0, 0);
        for seed in 0..200 {
            if let Some((x, y)) = outcome_route_alignment(&associative(seed, condition, 30)) {
                a += x;
                n += y;
            }
        }
        frac.insert(condition, a as f64 / n as f64);
    }
    let (dot, nondot) = (frac[&FeedbackCondition::Dot], frac[&FeedbackCondition::NonDot]);
    assert!(dot >= 0.9 && dot - nondot >= 0.2, "DOT {dot} NonDOT {nondot}");
}
