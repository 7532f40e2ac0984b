//! One line per acceptance criterion; exits non-zero if any fails.

use std::collections::HashMap;
use std::path::Path;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use babble_core::feedback::PositivePair;
use babble_core::harness::{run_experiment, run_logs, summarize_logs, ExperimentPlan, EPISODE_DIR};
use babble_core::homeostasis::{compute_motivation, Drive};
use babble_core::metrics::moving_average_reward;
use babble_core::perception::{
    synth_features, FeatureVector, InternalStateVector, NeedPerceptron, ObjectRecognizer, PerceptionConfig,
    StimulusIntensity,
};
use babble_core::session::termination_check;
use babble_core::*;

const MAR_SERIES: usize = 1000;
const MAR_TIME_LIMIT: Duration = Duration::from_secs(1);
const WH_INSTANCES: usize = 100;
const WH_REL_TOL: f64 = 1e-12;
const WH_DESCENT_STEPS: usize = 20;
/// Squared errors below this are at f64 rounding resolution.
const WH_DESCENT_FLOOR: f64 = 1e-24;
const MOTIVATION_PAIRS: usize = 1000;
const MOTIVATION_TOL: f64 = 1e-12;
const ORACLE_EPISODES: u64 = 100;
const ORACLE_MIN_CONVERGED: usize = 99;
const ORACLE_MAX_CONVERGENCE_TIME: usize = 12;
const ORACLE_MAX_LEN: usize = 16;
const ORACLE_TIME_LIMIT: Duration = Duration::from_secs(5);
const DOT_PAIRED_SEEDS: usize = 200;
const DOT_TIME_LIMIT: Duration = Duration::from_secs(60);
const MI_DRAWS: usize = 3000;
const MI_DOT_MIN_BITS: f64 = 1.5;
const MI_NONDOT_MAX_BITS: f64 = 0.05;
const PERCEPTION_TRAIN: usize = 16 * 10;
const PERCEPTION_HELD_OUT: usize = 300;
const PERCEPTION_NOISY_MIN_ACC: f64 = 0.95;
const PERCEPTION_SEEDS: u64 = 10;
const BAND_SEEDS: u64 = 100;
const BAND_MIN: usize = 1;
const BAND_MAX: usize = 16;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn mar_oracle(rewards: &[i64], m: usize, n: usize) -> f64 {
    let start = n.saturating_sub(m);
    let mut total = 0i64;
    let mut count = 0i64;
    for r in &rewards[start..n] {
        total += r;
        count += 1;
    }
    total as f64 / count as f64
}

fn mar_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let start = Instant::now();
    let mut checked = 0usize;
    for _ in 0..MAR_SERIES {
        let len = rng.random_range(1..=40);
        let values: Vec<i64> = (0..len).map(|_| if rng.random::<bool>() { 1 } else { -1 }).collect();
        let series = RewardSeries::from_values(&values).unwrap();
        let m = rng.random_range(1..=10);
        for n in 1..=len {
            let got = moving_average_reward(&series, m, n).unwrap();
            let want = mar_oracle(&values, m, n);
            if got != want {
                return Err(format!("series {values:?} m={m} n={n}: {got} != {want}"));
            }
            checked += 1;
        }
    }
    let took = start.elapsed();
    check(took < MAR_TIME_LIMIT, format!("{checked} points exact in {took:?}"))
}

fn random_features(rng: &mut ChaCha8Rng, dim: usize) -> FeatureVector {
    FeatureVector::new((0..dim).map(|_| rng.random::<f64>()).collect())
}

fn widrow_hoff() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let k = NeedKind::ALL.len();
    let mut worst: f64 = 0.0;
    for inst in 0..WH_INSTANCES {
        let dim = rng.random_range(1..=16);
        let vf = random_features(&mut rng, dim);
        let ris = InternalStateVector::one_hot(NeedKind::ALL[rng.random_range(0..k)]);
        let omega: Vec<f64> = (0..dim * k).map(|_| rng.random_range(-1.0..1.0)).collect();
        let bound = (2.0 / vf.norm_sq()).min(1.0);
        let eps = rng.random_range(1e-3..bound * 0.999);

        let mut expected = omega.clone();
        let x = vf.components();
        for j in 0..k {
            let mut y = 0.0;
            for i in 0..dim {
                y += omega[i * k + j] * x[i];
            }
            let e = ris.values()[j] - y;
            for i in 0..dim {
                expected[i * k + j] = omega[i * k + j] + eps * e * x[i];
            }
        }

        let mut p = NeedPerceptron::from_weights(dim, omega, eps).unwrap();
        let sq_err = |p: &NeedPerceptron| -> f64 {
            let y = p.predict_internal_state(&vf).unwrap();
            y.values().iter().zip(ris.values()).map(|(a, b)| (a - b) * (a - b)).sum()
        };
        let mut prev = sq_err(&p);
        p.widrow_hoff_update(&vf, &ris).unwrap();
        let diff: f64 = p.weights().iter().zip(&expected).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let norm: f64 = expected.iter().map(|b| b * b).sum::<f64>().sqrt();
        let rel = diff / norm;
        worst = worst.max(rel);
        if rel >= WH_REL_TOL {
            return Err(format!("instance {inst}: relative error {rel:e}"));
        }
        for step in 0..WH_DESCENT_STEPS {
            let now = sq_err(&p);
            if prev > WH_DESCENT_FLOOR && now >= prev {
                return Err(format!("instance {inst} step {step}: squared error {now} did not drop below {prev}"));
            }
            prev = now;
            p.widrow_hoff_update(&vf, &ris).unwrap();
        }
    }
    Ok(format!("{WH_INSTANCES} instances, worst relative error {worst:e}, error strictly decreasing above {WH_DESCENT_FLOOR:e}"))
}

fn motivation() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst: f64 = 0.0;
    for _ in 0..MOTIVATION_PAIRS {
        let need = NeedKind::ALL[rng.random_range(0..3)];
        let d: f64 = rng.random();
        let s: f64 = rng.random();
        let m = compute_motivation(Drive { need, value: d }, StimulusIntensity::new(need, s));
        worst = worst.max((m.value - d * (1.0 + s)).abs());
    }
    check(worst <= MOTIVATION_TOL, format!("{MOTIVATION_PAIRS} pairs, max deviation {worst:e}"))
}

fn oracle_convergence() -> Outcome {
    let start = Instant::now();
    let mut good = 0;
    for seed in 0..ORACLE_EPISODES {
        let cfg = SessionConfig { seed, ..SessionConfig::default() }.with_caregiver(CaregiverKind::Oracle);
        let log = run_episode(&cfg).unwrap();
        if log.converged
            && log.trials.len() <= ORACLE_MAX_LEN
            && log.convergence_time.is_some_and(|t| t <= ORACLE_MAX_CONVERGENCE_TIME)
        {
            good += 1;
        }
    }
    let took = start.elapsed();
    check(
        good >= ORACLE_MIN_CONVERGED && took < ORACLE_TIME_LIMIT,
        format!("{good}/{ORACLE_EPISODES} converged in {took:?}"),
    )
}

fn paired_plan(retention: f64, lambda: f64) -> ExperimentPlan {
    let mut base = SessionConfig::default().with_caregiver(CaregiverKind::Associative);
    let params = &mut base.caregiver.as_mut().unwrap().params;
    params.retention = retention;
    params.lambda = lambda;
    ExperimentPlan {
        base_config: base,
        n_runs_per_condition: DOT_PAIRED_SEEDS,
        seed_base: 0,
        conditions: vec![FeedbackCondition::Dot, FeedbackCondition::NonDot],
        output_dir: "unused".into(),
    }
}

fn dot_advantage() -> Outcome {
    let start = Instant::now();
    let defaults = AssociativeParams::default();
    let s = summarize_logs(&run_logs(&paired_plan(defaults.retention, defaults.lambda)).unwrap());
    let d = s.dot_minus_nondot.clone().unwrap();
    let dot = s.condition(FeedbackCondition::Dot).unwrap().mean_final_mar;
    let nondot = s.condition(FeedbackCondition::NonDot).unwrap().mean_final_mar;
    let control = summarize_logs(&run_logs(&paired_plan(1.0, 0.0)).unwrap()).dot_minus_nondot.unwrap();
    let took = start.elapsed();
    check(
        d.pairs == DOT_PAIRED_SEEDS
            && dot - nondot > 0.0
            && d.ci_excludes_zero()
            && d.ci_low > 0.0
            && !control.ci_excludes_zero()
            && took < DOT_TIME_LIMIT,
        format!(
            "DOT {dot:.4} vs NonDOT {nondot:.4}, diff {:.4} CI [{:.4}, {:.4}]; control diff {:.4} CI [{:.4}, {:.4}]; {took:?}",
            d.mean_difference, d.ci_low, d.ci_high, control.mean_difference, control.ci_low, control.ci_high
        ),
    )
}

fn mi_oracle(samples: &[(NeedKind, PositivePair)]) -> f64 {
    let n = samples.len() as f64;
    let mut joint: HashMap<(NeedKind, PositivePair), f64> = HashMap::new();
    let mut pa: HashMap<NeedKind, f64> = HashMap::new();
    let mut pb: HashMap<PositivePair, f64> = HashMap::new();
    for &(a, b) in samples {
        *joint.entry((a, b)).or_default() += 1.0 / n;
        *pa.entry(a).or_default() += 1.0 / n;
        *pb.entry(b).or_default() += 1.0 / n;
    }
    joint.iter().map(|(&(a, b), &p)| p * (p / (pa[&a] * pb[&b])).log2()).sum()
}

fn feedback_information() -> Outcome {
    let draw = |condition| {
        let map = FeedbackMap::new(condition);
        let mut need_rng = ChaCha8Rng::seed_from_u64(11);
        let mut fb_rng = ChaCha8Rng::seed_from_u64(12);
        let samples: Vec<(NeedKind, PositivePair)> = (0..MI_DRAWS)
            .map(|_| {
                let need = NeedKind::ALL[need_rng.random_range(0..3)];
                (need, map.positive_feedback(need, &mut fb_rng).positive_pair().unwrap())
            })
            .collect();
        (mi_oracle(&samples), babble_core::feedback::mutual_information_bits(&samples))
    };
    let (dot, dot_lib) = draw(FeedbackCondition::Dot);
    let (nondot, nondot_lib) = draw(FeedbackCondition::NonDot);
    check(
        dot >= MI_DOT_MIN_BITS
            && nondot <= MI_NONDOT_MAX_BITS
            && (dot - dot_lib).abs() < 1e-9
            && (nondot - nondot_lib).abs() < 1e-9,
        format!("DOT {dot:.4} bits, NonDOT {nondot:.4} bits"),
    )
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out = Vec::new();
    for sub in [dir.to_path_buf(), dir.join(EPISODE_DIR)] {
        for e in std::fs::read_dir(&sub).unwrap() {
            let p = e.unwrap().path();
            if p.is_file() {
                out.push((p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap()));
            }
        }
    }
    out.sort();
    out
}

fn determinism() -> Outcome {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let mut files = 0;
    let mut replays = 0;
    for kind in [CaregiverKind::Associative, CaregiverKind::Random, CaregiverKind::Oracle] {
        let plan = |dir: &Path| ExperimentPlan {
            base_config: SessionConfig::default().with_caregiver(kind),
            n_runs_per_condition: 20,
            seed_base: 1000,
            conditions: vec![FeedbackCondition::Dot, FeedbackCondition::NonDot],
            output_dir: dir.join(format!("{kind:?}")),
        };
        run_experiment(&plan(a.path())).unwrap();
        run_experiment(&plan(b.path())).unwrap();
        let da = dir_bytes(&a.path().join(format!("{kind:?}")));
        let db = dir_bytes(&b.path().join(format!("{kind:?}")));
        if da != db {
            return Err(format!("{kind:?}: re-run differs"));
        }
        files += da.len();
        for (name, bytes) in &da {
            if name.ends_with(".json") && name.starts_with(EPISODE_DIR) {
                let log = EpisodeLog::from_json(std::str::from_utf8(bytes).unwrap()).unwrap();
                if !log.replays_to_itself().unwrap() {
                    return Err(format!("{kind:?}/{name} does not replay to itself"));
                }
                replays += 1;
            }
        }
    }
    Ok(format!("{files} files byte-identical, {replays} logs replay to themselves"))
}

fn recognition_accuracy(seed: u64, sigma: f64) -> f64 {
    let config = PerceptionConfig { noise_sigma: sigma, ..PerceptionConfig::default() };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rec = ObjectRecognizer::new(&config, &mut rng).unwrap();
    for _ in 0..PERCEPTION_TRAIN {
        let o = ObjectKind::ALL[rng.random_range(0..3)];
        rec.train(&synth_features(o, config.feature_dim, sigma, &mut rng), o).unwrap();
    }
    let mut hits = 0;
    for _ in 0..PERCEPTION_HELD_OUT {
        let o = ObjectKind::ALL[rng.random_range(0..3)];
        if rec.recognize(&synth_features(o, config.feature_dim, sigma, &mut rng)).unwrap().object == o {
            hits += 1;
        }
    }
    hits as f64 / PERCEPTION_HELD_OUT as f64
}

fn perception() -> Outcome {
    let noisy: Vec<f64> = (0..PERCEPTION_SEEDS).map(|s| recognition_accuracy(s, 0.05)).collect();
    let clean: Vec<f64> = (0..PERCEPTION_SEEDS).map(|s| recognition_accuracy(s, 0.0)).collect();
    let worst_noisy = noisy.iter().copied().fold(f64::INFINITY, f64::min);
    let worst_clean = clean.iter().copied().fold(f64::INFINITY, f64::min);
    check(
        worst_noisy >= PERCEPTION_NOISY_MIN_ACC && worst_clean == 1.0,
        format!("worst over {PERCEPTION_SEEDS} seeds: sigma 0.05 {worst_noisy:.3}, sigma 0 {worst_clean:.3}"),
    )
}

fn episode_length_band() -> Outcome {
    let mut episodes = 0;
    for kind in [CaregiverKind::Oracle, CaregiverKind::Random, CaregiverKind::Associative] {
        for condition in [FeedbackCondition::Dot, FeedbackCondition::NonDot] {
            for seed in 0..BAND_SEEDS {
                let cfg = SessionConfig { seed, condition, ..SessionConfig::default() }.with_caregiver(kind);
                let log = run_episode(&cfg).unwrap();
                let len = log.trials.len();
                if !(BAND_MIN..=BAND_MAX).contains(&len) {
                    return Err(format!("{kind:?} {condition} seed {seed}: {len} trials"));
                }
                let rewards = log.rewards();
                for n in 1..=len {
                    let prefix = RewardSeries::new(rewards.rewards()[..n].to_vec());
                    if termination_check(&prefix, &cfg) != (n == len) {
                        return Err(format!("{kind:?} {condition} seed {seed}: stop rule disagrees at n={n}"));
                    }
                }
                episodes += 1;
            }
        }
    }
    Ok(format!("{episodes} episodes within [{BAND_MIN}, {BAND_MAX}], each stopping at its first qualifying n"))
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("MAR equals brute-force oracle", mar_equivalence),
        ("Widrow-Hoff update equals elementwise oracle", widrow_hoff),
        ("motivation equals d*(1+s)", motivation),
        ("oracle caregiver converges", oracle_convergence),
        ("DOT final MAR exceeds NonDOT", dot_advantage),
        ("feedback carries need information only in DOT", feedback_information),
        ("determinism and replay", determinism),
        ("perception recognition accuracy", perception),
        ("episode length band", episode_length_band),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        match f() {
            Ok(d) => println!("PASS [{}] {name}: {d}", i + 1),
            Err(d) => {
                failed += 1;
                println!("FAIL [{}] {name}: {d}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
