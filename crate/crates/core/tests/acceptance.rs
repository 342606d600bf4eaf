//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use amrbench::cli::{cmd_run, cmd_synth, run_mode, split_specs, ModeRun, RunConfig, SplitModes};
use amrbench::eval::{auc, roc_curve};
use amrbench::features::{build_study_rows, fit_pipeline, FeatureMatrix, PipelineOptions, StudyRow};
use amrbench::ingest::apply_cohort_filter;
use amrbench::models::{
    fit_gbm_traced, fit_l1_logistic, lambda_max, l1_objective, MlpModel, MlpParams, ModelFamily, TrainedModel, TreeParams,
};
use amrbench::scalar::sigmoid;
use amrbench::splits::{default_cutoff_year, split_random_by_stay, split_temporal, Fold, SplitSpec};
use amrbench::synth::{generate, GeneratorConfig, GroundTruth};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// tolerances and budgets, as stated by the criteria
const AUC_TOL: f64 = 1e-12;
const KKT_TOL: f64 = 1e-4;
const OBJECTIVE_TOL: f64 = 1e-4;
const GRAD_REL_TOL: f64 = 1e-4;
/// Floating-point slack allowed on a per-round loss increase.
const LOSS_SLACK: f64 = 1e-12;
const CORRELATION_MAX: f64 = 0.75;
const ENSEMBLE_GAIN: f64 = 0.01;
const BAYES_SLACK: f64 = 0.02;
const RECOVERY_WEIGHT: f64 = 2.0;
const RECOVERY_SEEDS: usize = 4;
const N_SEEDS: u64 = 5;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn within(limit: Duration, t: Instant) -> (bool, String) {
    let e = t.elapsed();
    (e < limit, format!("{:.1}s of {}s", e.as_secs_f64(), limit.as_secs()))
}

// ---------- 1, 2: AUC and ROC ----------

fn brute_auc(s: &[f64], y: &[u8]) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for (i, &yi) in y.iter().enumerate() {
        if yi != 1 {
            continue;
        }
        for (j, &yj) in y.iter().enumerate() {
            if yj == 0 {
                den += 1.0;
                num += if s[i] > s[j] {
                    1.0
                } else if s[i] == s[j] {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    num / den
}

fn auc_instances() -> Vec<(Vec<f64>, Vec<u8>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..1000)
        .map(|k| {
            let n = rng.random_range(2..=50);
            // few distinct levels give heavy ties
            let levels = if k % 2 == 0 { rng.random_range(1..=4) } else { 1000 };
            let s: Vec<f64> = (0..n).map(|_| rng.random_range(0..levels) as f64 / levels as f64).collect();
            let mut y: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
            y[0] = 1;
            y[1] = 0;
            (s, y)
        })
        .collect()
}

fn criterion_1() -> Outcome {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for (s, y) in auc_instances() {
        worst = worst.max((auc(&s, &y).unwrap() - brute_auc(&s, &y)).abs());
    }
    let (fast, time) = within(Duration::from_secs(10), t);
    outcome(worst <= AUC_TOL && fast, format!("max |auc - pairwise| = {worst:.1e} on 1000 instances, {time}"))
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for (s, y) in auc_instances() {
        let area = roc_curve(&s, &y).unwrap().area();
        worst = worst.max((area - auc(&s, &y).unwrap()).abs());
    }
    outcome(worst <= AUC_TOL, format!("max |trapezoid - auc| = {worst:.1e} on 1000 instances"))
}

// ---------- 3: L1 logistic ----------

fn random_problem(rng: &mut ChaCha8Rng) -> FeatureMatrix<f64> {
    loop {
        let n = rng.random_range(20..=200);
        let d = rng.random_range(1..=20);
        let w: Vec<f64> = (0..d).map(|_| rng.random_range(-3.0..3.0)).collect();
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..d).map(|j| if j % 3 == 0 { f64::from(u8::from(rng.random::<bool>())) } else { rng.random() }).collect())
            .collect();
        let labels: Vec<u8> = rows
            .iter()
            .map(|r| {
                let z: f64 = r.iter().zip(&w).map(|(a, b)| a * b).sum::<f64>() - 0.5;
                u8::from(rng.random::<f64>() < sigmoid(z))
            })
            .collect();
        let m = FeatureMatrix::from_rows((0..d).map(|j| format!("x{j}")).collect(), &rows, labels).unwrap();
        if m.has_both_classes() {
            return m;
        }
    }
}

fn mean_loss_grad(m: &FeatureMatrix<f64>, w: &[f64], b: f64) -> (f64, f64, Vec<f64>) {
    let n = m.n_rows() as f64;
    let (mut loss, mut g0, mut g) = (0.0, 0.0, vec![0.0; w.len()]);
    for (x, &y) in m.rows().zip(&m.labels) {
        let z = b + x.iter().zip(w).map(|(a, c)| a * c).sum::<f64>();
        loss += if z > 0.0 { z + (-z).exp().ln_1p() } else { z.exp().ln_1p() } - f64::from(y) * z;
        let r = sigmoid(z) - f64::from(y);
        g0 += r;
        for (gj, xj) in g.iter_mut().zip(x) {
            *gj += r * xj;
        }
    }
    g.iter_mut().for_each(|v| *v /= n);
    (loss / n, g0 / n, g)
}

/// Accelerated projected gradient on the split `w = u - v`, `u, v >= 0`,
/// with backtracking on the Lipschitz estimate and restart on ascent.
fn projected_gradient_oracle(m: &FeatureMatrix<f64>, lambda: f64, iters: usize) -> f64 {
    let d = m.n_cols();
    let obj = |x: &[f64]| {
        let w: Vec<f64> = (0..d).map(|j| x[j] - x[d + j]).collect();
        mean_loss_grad(m, &w, x[2 * d]).0 + lambda * x[..2 * d].iter().sum::<f64>()
    };
    let grad = |x: &[f64]| {
        let w: Vec<f64> = (0..d).map(|j| x[j] - x[d + j]).collect();
        let (_, g0, g) = mean_loss_grad(m, &w, x[2 * d]);
        let mut out = Vec::with_capacity(2 * d + 1);
        out.extend(g.iter().map(|gj| gj + lambda));
        out.extend(g.iter().map(|gj| -gj + lambda));
        out.push(g0);
        out
    };
    let project = |x: &mut [f64]| x[..2 * d].iter_mut().for_each(|v| *v = v.max(0.0));
    let mut x = vec![0.0; 2 * d + 1];
    let mut y = x.clone();
    let (mut t, mut lip) = (1.0f64, 1.0f64);
    let mut fx = obj(&x);
    for _ in 0..iters {
        let fy = obj(&y);
        let gy = grad(&y);
        let next = loop {
            let mut z: Vec<f64> = y.iter().zip(&gy).map(|(a, g)| a - g / lip).collect();
            project(&mut z);
            let diff: Vec<f64> = z.iter().zip(&y).map(|(a, b)| a - b).collect();
            let smooth_y = fy - lambda * y[..2 * d].iter().sum::<f64>();
            let smooth_z = obj(&z) - lambda * z[..2 * d].iter().sum::<f64>();
            let lin: f64 = diff.iter().zip(&gy).map(|(a, g)| a * g).sum::<f64>()
                - lambda * diff[..2 * d].iter().sum::<f64>();
            let quad = 0.5 * lip * diff.iter().map(|v| v * v).sum::<f64>();
            if smooth_z <= smooth_y + lin + quad + 1e-15 {
                break z;
            }
            lip *= 2.0;
        };
        let fnext = obj(&next);
        if fnext > fx {
            // restart momentum from the last accepted point
            y = x.clone();
            t = 1.0;
            continue;
        }
        let t_next = 0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt());
        y = next.iter().zip(&x).map(|(a, b)| a + (t - 1.0) / t_next * (a - b)).collect();
        x = next;
        fx = fnext;
        t = t_next;
        lip *= 0.95;
    }
    fx
}

fn criterion_3() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut worst_kkt, mut worst_gap, mut fails) = (0.0f64, 0.0f64, 0);
    for _ in 0..100 {
        let m = random_problem(&mut rng);
        let lambda = lambda_max(&m).unwrap() * rng.random_range(0.01..0.9);
        let fit = fit_l1_logistic(&m, lambda, 1e-12, 20_000).unwrap();
        let (_, g0, g) = mean_loss_grad(&m, &fit.weights, fit.intercept);
        let mut kkt = g0.abs();
        for (&w, gj) in fit.weights.iter().zip(&g) {
            kkt = kkt.max(if w == 0.0 { (gj.abs() - lambda).max(0.0) } else { (gj + lambda * w.signum()).abs() });
        }
        let ours = l1_objective(&m, &fit.weights, fit.intercept, lambda);
        let oracle = projected_gradient_oracle(&m, lambda, 20_000);
        let gap = (ours - oracle).abs();
        worst_kkt = worst_kkt.max(kkt);
        worst_gap = worst_gap.max(gap);
        if kkt > KKT_TOL || gap > OBJECTIVE_TOL {
            fails += 1;
        }
    }
    let (fast, time) = within(Duration::from_secs(60), t);
    outcome(
        fails == 0 && fast,
        format!("{fails}/100 failing; max KKT violation {worst_kkt:.1e}, max objective gap {worst_gap:.1e}, {time}"),
    )
}

// ---------- 4: MLP gradient ----------

fn criterion_4() -> Outcome {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut worst: f64 = 0.0;
    for k in 0..20 {
        let d = rng.random_range(1..=8);
        let hidden: Vec<usize> = (0..rng.random_range(1..=2)).map(|_| rng.random_range(1..=8)).collect();
        let n = rng.random_range(5..=30);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
        let labels: Vec<u8> = (0..n).map(|_| u8::from(rng.random::<bool>())).collect();
        let data = FeatureMatrix::from_rows((0..d).map(|j| format!("x{j}")).collect(), &rows, labels).unwrap();
        let hp = MlpParams { hidden_sizes: hidden, l2: if k % 2 == 0 { 0.0 } else { 0.01 }, ..MlpParams::default() };
        let mut net = MlpModel::<f64>::init(d, &hp, k).unwrap();
        // random biases too: zero biases park units exactly on the ReLU kink
        let random: Vec<f64> = net.params_flat().iter().map(|_| rng.random_range(-1.0..1.0)).collect();
        net.set_params_flat(&random);
        let idx: Vec<usize> = (0..n).collect();
        let (_, analytic) = net.loss_and_gradient(&data, &idx);
        let p0 = net.params_flat();
        let h = 1e-6;
        let mut numeric = Vec::with_capacity(p0.len());
        for i in 0..p0.len() {
            let mut p = p0.clone();
            p[i] = p0[i] + h;
            net.set_params_flat(&p);
            let up = net.loss_and_gradient(&data, &idx).0;
            p[i] = p0[i] - h;
            net.set_params_flat(&p);
            let down = net.loss_and_gradient(&data, &idx).0;
            numeric.push((up - down) / (2.0 * h));
        }
        net.set_params_flat(&p0);
        let norm = |v: &[f64]| v.iter().map(|x| x * x).sum::<f64>().sqrt();
        let diff: Vec<f64> = analytic.iter().zip(&numeric).map(|(a, b)| a - b).collect();
        let rel = norm(&diff) / norm(&analytic).max(norm(&numeric)).max(1e-12);
        worst = worst.max(rel);
    }
    let (fast, time) = within(Duration::from_secs(10), t);
    outcome(worst <= GRAD_REL_TOL && fast, format!("max relative gradient error {worst:.1e} over 20 networks, {time}"))
}

// ---------- 5: GBM ----------

fn criterion_5() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let bench = benchmark(0).random.test.clone();
    let mut fits = 0;
    let mut bad_rounds = 0;
    let mut prevalence_exact = true;
    let configs = [
        TreeParams::boosting(40, 8, 1),
        TreeParams::boosting(40, 31, 20),
        TreeParams { learning_rate: 1.0, ..TreeParams::boosting(20, 4, 1) },
        TreeParams { max_depth: Some(2), feature_subsample: Some(0.5), ..TreeParams::boosting(30, 16, 5) },
    ];
    for k in 0..12 {
        let data = if k < 4 {
            bench.clone()
        } else {
            let n = rng.random_range(30..300);
            let d = rng.random_range(1..6);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random()).collect()).collect();
            let mut labels: Vec<u8> = rows.iter().map(|r| u8::from(rng.random::<f64>() < sigmoid(3.0 * r[0] - 1.5))).collect();
            labels[0] = 1;
            labels[1] = 0;
            FeatureMatrix::from_rows((0..d).map(|j| format!("x{j}")).collect(), &rows, labels).unwrap()
        };
        let hp = &configs[k % configs.len()];
        let (_, trace) = fit_gbm_traced(&data, hp, k as u64).unwrap();
        bad_rounds += trace.windows(2).filter(|w| w[1] > w[0] + LOSS_SLACK * w[0].abs()).count();
        fits += 1;

        let zero = TreeParams { n_trees: 0, ..hp.clone() };
        let prevalence = data.positives() as f64 / data.n_rows() as f64;
        let (m, _) = fit_gbm_traced(&data, &zero, 0).unwrap();
        prevalence_exact &= TrainedModel::TreeEnsemble(m).predict(&data).unwrap().iter().all(|&p| p == prevalence);
        let d32 = data.cast::<f32>();
        let (m32, _) = fit_gbm_traced(&d32, &zero, 0).unwrap();
        let p32 = (d32.positives() as f64 / d32.n_rows() as f64) as f32;
        prevalence_exact &= TrainedModel::TreeEnsemble(m32).predict(&d32).unwrap().iter().all(|&p| p == p32);
    }
    outcome(
        bad_rounds == 0 && prevalence_exact,
        format!("{fits} fits, {bad_rounds} rounds with rising loss; 0-round prediction equals prevalence exactly: {prevalence_exact}"),
    )
}

// ---------- 6: pipeline leakage ----------

fn mutate(row: &mut StudyRow, rng: &mut ChaCha8Rng) {
    let text = |rng: &mut ChaCha8Rng| format!("mutant{}", rng.random_range(0..5));
    match rng.random_range(0..10) {
        0 => row.label ^= 1,
        1 => row.age = rng.random_range(-50.0..500.0),
        2 => row.y_pre = if rng.random() { None } else { Some(rng.random_range(-9.0..9.0)) },
        3 => {
            row.anti_organism = text(rng);
            row.organism = text(rng);
        }
        4 => row.admission_dx = if rng.random() { None } else { Some(text(rng)) },
        5 => row.admit_weight_kg = if rng.random() { None } else { Some(rng.random_range(0.0..1e4)) },
        6 => row.height_cm = Some(f64::from(rng.random::<u32>())),
        7 => row.culture_taken_year = rng.random_range(1900..2100),
        8 => row.unit_type = Some(text(rng)),
        _ => row.culture_taken_offset_min = rng.random_range(-1e7..1e7),
    }
}

fn criterion_6() -> Outcome {
    let b = benchmark(0);
    let rows = &b.rows;
    let assignment = &b.random.assignment;
    let train = assignment.rows(Fold::Train);
    let held: Vec<usize> = assignment.rows_in(&[Fold::Validation, Fold::Test]);
    let opts = PipelineOptions::default();
    let base = format!("{:?}", fit_pipeline(rows, &train, &opts).unwrap());
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut changed = 0;
    for _ in 0..10 {
        let mut m = rows.clone();
        for &i in &held {
            if rng.random::<f64>() < 0.5 {
                for _ in 0..3 {
                    mutate(&mut m[i], &mut rng);
                }
            }
        }
        if format!("{:?}", fit_pipeline(&m, &train, &opts).unwrap()) != base {
            changed += 1;
        }
    }

    let state = &b.random.state;
    let fitted = state.apply::<f64>(rows).unwrap().select_rows(&train);
    let cols: Vec<Vec<f64>> = (0..fitted.n_cols()).map(|j| fitted.column(j)).collect();
    let mut worst: f64 = 0.0;
    for a in 0..cols.len() {
        for c in a + 1..cols.len() {
            if let Some(r) = pearson(&cols[a], &cols[c]) {
                worst = worst.max(r.abs());
            }
        }
    }
    outcome(
        changed == 0 && worst <= CORRELATION_MAX,
        format!("{changed}/10 mutated refits changed the state; max train |r| over {} columns = {worst:.3}", cols.len()),
    )
}

fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
}

// ---------- 7, 8, 9: synthetic benchmark replicates ----------

struct Bench {
    truth: GroundTruth,
    rows: Vec<StudyRow>,
    random: ModeRun<f64>,
    random_time: Duration,
    temporal: ModeRun<f64>,
}

fn bench_config(seed: u64) -> RunConfig {
    let mut cfg = RunConfig { seed, ..RunConfig::default() };
    cfg.models.per_organism = false;
    cfg
}

fn benchmark(seed: u64) -> &'static Bench {
    static CACHE: OnceLock<Vec<Bench>> = OnceLock::new();
    &CACHE.get_or_init(|| {
        (0..N_SEEDS)
            .map(|s| {
                let t = Instant::now();
                let g = generate(&GeneratorConfig { seed: s, ..GeneratorConfig::default() }).unwrap();
                let rows = build_study_rows(&apply_cohort_filter(&g.cohort));
                let cfg = bench_config(s);
                let (rs, ts) = split_specs(&rows, &cfg).unwrap();
                let random = run_mode::<f64>(&rows, &rs.unwrap(), &cfg).unwrap();
                let random_time = t.elapsed();
                let temporal = run_mode::<f64>(&rows, &ts.unwrap(), &cfg).unwrap();
                Bench { truth: g.truth, rows, random, random_time, temporal }
            })
            .collect()
    })[seed as usize]
}

fn bayes_auc_on(run: &ModeRun<f64>, truth: &GroundTruth) -> f64 {
    let p = truth.probability_of();
    let s: Vec<f64> = run.test.row_keys.iter().map(|k| p[k.as_str()]).collect();
    auc(&s, &run.test.labels).unwrap()
}

fn criterion_7() -> Outcome {
    let (mut ens, mut ab) = (0.0, 0.0);
    let mut over_bayes = Vec::new();
    let mut elapsed = Duration::ZERO;
    for s in 0..N_SEEDS {
        let b = benchmark(s);
        elapsed += b.random_time;
        ens += b.random.auc(ModelFamily::Ensemble).unwrap() / N_SEEDS as f64;
        ab += b.random.auc(ModelFamily::Antibiogram).unwrap() / N_SEEDS as f64;
        let bayes = bayes_auc_on(&b.random, &b.truth);
        for sc in &b.random.scores {
            if sc.auc > bayes + BAYES_SLACK {
                over_bayes.push(format!("seed {s} {} {:.4} > {:.4}", sc.family.label(), sc.auc, bayes));
            }
        }
    }
    let fast = elapsed < Duration::from_secs(300);
    outcome(
        ens - ab >= ENSEMBLE_GAIN && over_bayes.is_empty() && fast,
        format!(
            "mean ensemble AUC {ens:.4} vs AB {ab:.4} (gain {:.4}); above Bayes + {BAYES_SLACK}: {:?}; {:.1}s of 300s",
            ens - ab,
            over_bayes,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_8() -> Outcome {
    let (mut random, mut temporal) = (Vec::new(), Vec::new());
    for s in 0..N_SEEDS {
        let b = benchmark(s);
        random.push(b.random.auc(ModelFamily::Ensemble).unwrap());
        temporal.push(b.temporal.auc(ModelFamily::Ensemble).unwrap());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let per_seed = random.iter().zip(&temporal).filter(|(r, t)| t <= r).count();
    outcome(
        mean(&temporal) <= mean(&random),
        format!(
            "mean ensemble AUC temporal {:.4} vs random {:.4}; temporal <= random in {per_seed}/{N_SEEDS} seeds",
            mean(&temporal),
            mean(&random)
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut good_seeds = 0;
    let mut misses = Vec::new();
    for s in 0..N_SEEDS {
        let b = benchmark(s);
        let Some(TrainedModel::Linear(m)) = b.random.models.get(&ModelFamily::L1Logistic) else {
            panic!("no L1 model");
        };
        let weight: HashMap<&str, f64> =
            b.random.state.selected_columns.iter().map(String::as_str).zip(m.weights.iter().copied()).collect();
        let mut ok = true;
        for (name, &w) in &b.truth.coefficients {
            if w.abs() < RECOVERY_WEIGHT {
                continue;
            }
            let got = weight.get(name.as_str()).copied().unwrap_or(0.0);
            if got == 0.0 || got.signum() != w.signum() {
                ok = false;
                misses.push(format!("seed {s} {name}: planted {w}, fitted {got:.3}"));
            }
        }
        good_seeds += usize::from(ok);
    }
    let planted = benchmark(0).truth.coefficients.values().filter(|w| w.abs() >= RECOVERY_WEIGHT).count();
    outcome(
        good_seeds >= RECOVERY_SEEDS,
        format!("all {planted} planted signs recovered in {good_seeds}/{N_SEEDS} seeds; misses {misses:?}"),
    )
}

// ---------- 10: split fuzzing ----------

fn criterion_10() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut problems = Vec::new();
    let mut temporal_checked = 0;
    for case in 0..500 {
        let g = rng.random_range(3..150);
        let year_of: Vec<i32> = (0..g).map(|_| rng.random_range(2005..2014)).collect();
        let mut rows: Vec<usize> = (0..g).flat_map(|s| std::iter::repeat_n(s, rng.random_range(1..5))).collect();
        rows.shuffle(&mut rng);
        let groups: Vec<String> = rows.iter().map(|s| format!("stay{s}")).collect();
        let years: Vec<i32> = rows.iter().map(|&s| year_of[s]).collect();

        let a = split_random_by_stay(&groups, &SplitSpec::random(case)).unwrap();
        let mut fold_of: HashMap<&str, HashSet<Fold>> = HashMap::new();
        for (gid, f) in groups.iter().zip(&a.fold_of_row) {
            fold_of.entry(gid).or_default().insert(*f);
        }
        if fold_of.values().any(|f| f.len() != 1) {
            problems.push(format!("case {case}: stay in two folds"));
        }
        for (fold, share) in [(Fold::Train, 0.6), (Fold::Validation, 0.2), (Fold::Test, 0.2)] {
            let n = fold_of.values().filter(|f| f.contains(&fold)).count() as f64;
            if (n - share * g as f64).abs() > 1.0 {
                problems.push(format!("case {case}: {} has {n} of {g} stays", fold.as_str()));
            }
        }

        if let Some(cutoff) = default_cutoff_year(&groups, &years) {
            let Ok(t) = split_temporal(&groups, &years, &SplitSpec::temporal(cutoff, case)) else {
                continue;
            };
            temporal_checked += 1;
            let mut folds: HashMap<&str, HashSet<Fold>> = HashMap::new();
            for (i, f) in t.fold_of_row.iter().enumerate() {
                folds.entry(&groups[i]).or_default().insert(*f);
                let before = years[i] < cutoff;
                if before == (*f == Fold::Test) {
                    problems.push(format!("case {case}: year {} in {} with cutoff {cutoff}", years[i], f.as_str()));
                }
            }
            if folds.values().any(|f| f.len() != 1) {
                problems.push(format!("case {case}: temporal stay in two folds"));
            }
        }
    }
    problems.truncate(5);
    outcome(
        problems.is_empty(),
        format!("500 cohorts, {temporal_checked} temporal splits checked; violations {problems:?}"),
    )
}

// ---------- 11: end-to-end determinism ----------

fn read_tree(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn criterion_11() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("data");
    let mut cfg = RunConfig { seed: 11, ..RunConfig::default() };
    cfg.split.modes = SplitModes::Both;
    cmd_synth(&cfg, &data).unwrap();
    cfg.paths.stays = data.join("stays.csv");
    cfg.paths.micro = data.join("micro.csv");
    let mut trees = Vec::new();
    for name in ["a", "b"] {
        cfg.paths.output_dir = tmp.path().join(name);
        let written = cmd_run(&cfg).unwrap();
        assert!(written.iter().all(|p| p.exists()));
        trees.push(read_tree(&cfg.paths.output_dir));
    }
    let reports = trees[0].keys().filter(|k| k.starts_with("report_") || k.starts_with("roc_") || k.starts_with("fig")).count();
    // the resolved config records its own output directory
    let differing: Vec<&String> =
        trees[0].keys().filter(|k| *k != "run_config.toml" && trees[1].get(*k) != trees[0].get(*k)).collect();
    let same_names = trees[0].keys().eq(trees[1].keys());
    outcome(
        differing.is_empty() && same_names && reports >= 19,
        format!("{} files per run ({reports} report files), differing: {differing:?}", trees[0].len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Outcome); 11] = [
        ("AUC oracle equivalence", criterion_1),
        ("ROC duality", criterion_2),
        ("L1LR KKT certificate", criterion_3),
        ("MLP gradient check", criterion_4),
        ("GBM monotone loss and prevalence start", criterion_5),
        ("pipeline leakage suite", criterion_6),
        ("ensemble beats antibiogram", criterion_7),
        ("temporal degradation", criterion_8),
        ("coefficient sign recovery", criterion_9),
        ("split integrity fuzzing", criterion_10),
        ("end-to-end determinism", criterion_11),
    ];
    let only: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !only.is_empty() && !only.contains(&n) {
            continue;
        }
        let t = Instant::now();
        let o = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
            let msg = e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()));
            outcome(false, format!("panicked: {}", msg.unwrap_or_default()))
        });
        failed += usize::from(!o.pass);
        println!(
            "criterion {n:>2} {:<40} {} ({:.1}s) {}",
            name,
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
