//! Acceptance suite. Runs the ten criteria in order, prints one line per
//! criterion, and exits non-zero if any fails.
//!
//!     cargo test -p genex-cli --test acceptance
//!
//! Pass criterion numbers as arguments to run a subset.

use std::collections::BTreeMap;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use genex_cli::commands::cmd_generate;
use genex_cli::pipeline::{run_seed, Prepared};
use genex_cli::report::{Metrics, Outcome};
use genex_cli::RunConfig;
use genex_core::gene::{blend, crossover_mutate, run_gene, GeneConfig, ModelPool};
use genex_core::learner::{init_params, loss_and_gradient, train, Activation, Group, ParamTensor, Role};
use genex_core::numerics::{
    adjusted_rand_index, gmm_assign, gmm_fit, mixture_cross_entropy, optimize_simplex_weights,
};
use genex_core::protonex::{cluster_models, extract_signatures, fuse_prototype, ClusterOptions};
use genex_core::seed;
use genex_core::synthetic::{gaussian_blobs, mode_embeddings, shifted_benchmark, two_blobs, ShiftedSpec};
use genex_core::trace::count_validation_queries;
use genex_core::voaware::{
    baseline_inc_ens, baseline_single, jsd_guided_split, random_split, simulate_optimism, OptimismSimConfig,
    SplitConfig,
};
use genex_core::{ConfigSpace, LearnerConfig, NamedParamSet, Trace};
use ndarray::Array2;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($msg)+));
        }
    };
}

fn within(elapsed: Duration, limit: Duration) -> Check {
    ensure!(elapsed < limit, "took {:.1}s, limit {:.0}s", elapsed.as_secs_f64(), limit.as_secs_f64());
    Ok(String::new())
}

// 1 -------------------------------------------------------------------------

fn splitter_divergence() -> Check {
    let start = Instant::now();
    let (emb, labels, _) = mode_embeddings(1000, 2, 2, 4.0, 11);
    let config = SplitConfig {
        ratio: 0.3,
        zeta: 0.0,
        seed: 3,
        ..SplitConfig::default()
    };
    let guided = jsd_guided_split(&emb, &labels, &config).map_err(|e| e.to_string())?;
    let random_mean = (0..20)
        .map(|s| random_split(&emb, &labels, 0.3, s).map(|r| r.global_jsd))
        .sum::<genex_core::Result<f64>>()
        .map_err(|e| e.to_string())?
        / 20.0;
    let ratio = guided.global_jsd / random_mean;
    ensure!(ratio >= 10.0, "guided JSD {:.3e} is only {ratio:.1}x the random mean {random_mean:.3e}", guided.global_jsd);
    for c in 0..2 {
        let n = labels.iter().filter(|&&y| y == c).count();
        let k = guided.train.iter().filter(|&&i| labels[i] == c).count();
        ensure!(k == (0.3 * n as f64).round() as usize, "class {c}: {k} of {n} in train");
    }
    ensure!(guided.iterations.iter().all(|&t| t <= 3), "iterations {:?}", guided.iterations);
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!(
        "guided {:.4} nats vs random mean {random_mean:.2e} ({ratio:.0}x), iterations {:?}",
        guided.global_jsd, guided.iterations
    ))
}

// 2 -------------------------------------------------------------------------

fn zeta_decay() -> Check {
    let start = Instant::now();
    let zetas = [0.0, 0.1, 0.2, 0.3, 0.4, 0.5];
    let mut means = Vec::new();
    for &zeta in &zetas {
        let mut total = 0.0;
        for s in 0..20 {
            let (emb, labels, _) = mode_embeddings(1000, 2, 2, 4.0, s);
            let config = SplitConfig {
                zeta,
                seed: s,
                ..SplitConfig::default()
            };
            total += jsd_guided_split(&emb, &labels, &config).map_err(|e| e.to_string())?.global_jsd;
        }
        means.push(total / 20.0);
    }
    ensure!(means[0] > 0.0, "JSD at zeta 0 is {}", means[0]);
    for w in means.windows(2) {
        ensure!(w[1] <= w[0], "JSD rises from {:.5} to {:.5}: {means:?}", w[0], w[1]);
    }
    within(start.elapsed(), Duration::from_secs(60))?;
    let shown: Vec<String> = means.iter().map(|m| format!("{m:.4}")).collect();
    Ok(format!("mean global JSD over zeta 0..0.5: {}", shown.join(" > ")))
}

// 3 -------------------------------------------------------------------------

/// Mean of the largest of `n` standard normals, straight Monte Carlo.
fn max_of_gaussians(n: usize, trials: usize, seed: u64) -> f64 {
    let mut rng = seed::rng(seed);
    let mut total = 0.0;
    for _ in 0..trials {
        let mut best = f64::NEG_INFINITY;
        for _ in 0..n {
            let z: f64 = StandardNormal.sample(&mut rng);
            best = best.max(z);
        }
        total += best;
    }
    total / trials as f64
}

fn optimism_scaling() -> Check {
    let start = Instant::now();
    let mut last = f64::NEG_INFINITY;
    let mut shown = Vec::new();
    for (runs, checkpoints) in [(10, 1), (10, 10), (100, 10)] {
        let nq = runs * checkpoints;
        let est = simulate_optimism(&OptimismSimConfig {
            runs,
            checkpoints,
            noise_scale: 1.0,
            true_loss: Vec::new(),
            trials: 100_000,
            seed: 5,
        })
        .map_err(|e| e.to_string())?;
        let oracle = max_of_gaussians(nq, 100_000, 9_000 + nq as u64);
        let rel = (est.optimism - oracle).abs() / oracle;
        ensure!(rel <= 0.15, "Nq={nq}: estimate {:.4} vs oracle {oracle:.4}", est.optimism);
        ensure!(est.optimism > last, "not increasing at Nq={nq}");
        last = est.optimism;
        shown.push(format!("Nq={nq}: {:.3} (oracle {oracle:.3})", est.optimism));
    }
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(shown.join(", "))
}

// 4 -------------------------------------------------------------------------

fn bits(p: &NamedParamSet) -> Vec<u64> {
    p.tensors().iter().flat_map(|t| t.values.iter().map(|v| v.to_bits())).collect()
}

fn with_statistics(seed: u64) -> NamedParamSet {
    let mut rng = seed::rng(seed);
    let mut draw = |n: usize| (0..n).map(|_| rng.random_range(-1.0..1.0)).collect::<Vec<f64>>();
    NamedParamSet::new(vec![
        ParamTensor::new("conv.weight", vec![4, 3], draw(12), Role::TrainableWeight, Group::Body),
        ParamTensor::new("bn.running_mean", vec![4], draw(4), Role::NormalizationStatistic, Group::Body),
        ParamTensor::new("bn.running_var", vec![4], draw(4), Role::NormalizationStatistic, Group::Body),
        ParamTensor::new("step_count", vec![1], draw(1), Role::Buffer, Group::Body),
        ParamTensor::new("head.weight", vec![2, 4], draw(8), Role::TrainableWeight, Group::Head),
        ParamTensor::new("head.bias", vec![2], draw(2), Role::TrainableBias, Group::Head),
    ])
    .expect("valid parameter set")
}

fn genetic_identity() -> Check {
    let start = Instant::now();
    let mut checked = 0;
    for s in 0..20 {
        let a = init_params(6, 16, 3, &mut seed::rng(s));
        for alpha in [0.0, 0.3, 0.5, 1.0] {
            let child = crossover_mutate(&a, &a, alpha, 0.0, 0.05, s).map_err(|e| e.to_string())?;
            ensure!(bits(&child) == bits(&a), "rho=0 crossover of identical parents changed bits (alpha {alpha})");
            checked += 1;
        }
        for m in 1..=5 {
            let copies = vec![&a; m];
            let fused = fuse_prototype(&copies).map_err(|e| e.to_string())?;
            ensure!(bits(&fused) == bits(&a), "fusing {m} copies changed bits");
            checked += 1;
        }
        let (p, q) = (with_statistics(s), with_statistics(s + 100));
        let child = crossover_mutate(&p, &q, 0.5, 1.0, 0.5, s).map_err(|e| e.to_string())?;
        let mut mutated = false;
        for ((c, x), y) in child.tensors().iter().zip(p.tensors()).zip(q.tensors()) {
            let blended: Vec<u64> = x.values.iter().zip(&y.values).map(|(&u, &v)| blend(u, v, 0.5).to_bits()).collect();
            let got: Vec<u64> = c.values.iter().map(|v| v.to_bits()).collect();
            if c.role.is_trainable() {
                mutated |= got != blended;
            } else {
                ensure!(got == blended, "{} was mutated under rho=1", c.name);
            }
            checked += 1;
        }
        ensure!(mutated, "rho=1 left every trainable tensor untouched");
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{checked} bitwise checks"))
}

// 5 -------------------------------------------------------------------------

fn query_audit() -> Check {
    let start = Instant::now();
    let all = two_blobs(200, 1.5, 21);
    let (tr, va) = all.stratified_indices(0.3, 1).map_err(|e| e.to_string())?;
    let train_set = all.subset(&tr).map_err(|e| e.to_string())?;
    let val = all.subset(&va).map_err(|e| e.to_string())?;
    let space = ConfigSpace::default();

    let gene_trace = Trace::new();
    let gene = GeneConfig {
        pool_size: 15,
        generations: 3,
        offspring: 10,
        fresh: 5,
        seed: 4,
        ..GeneConfig::default()
    };
    let pool = run_gene(&gene, &train_set, &space, &gene_trace).map_err(|e| e.to_string())?;
    let gene_q = count_validation_queries(&gene_trace.events());
    ensure!(pool.len() == 15, "pool has {} models", pool.len());
    ensure!(gene_q == 0, "run_gene made {gene_q} validation queries");

    let single_trace = Trace::new();
    baseline_single(5, 3, &space, &train_set, &val, 4, &single_trace).map_err(|e| e.to_string())?;
    let single_q = count_validation_queries(&single_trace.events());
    ensure!(single_q == 15, "Single(5,3) made {single_q} queries");

    let inc_trace = Trace::new();
    let k = 3;
    baseline_inc_ens(pool.records(), k, &val, &inc_trace).map_err(|e| e.to_string())?;
    let inc_q = count_validation_queries(&inc_trace.events());
    let expected: usize = (0..k).map(|step| pool.len() - step).sum();
    ensure!(inc_q == expected, "Inc-Ens(K={k}) made {inc_q} queries, expected {expected}");
    within(start.elapsed(), Duration::from_secs(300))?;
    Ok(format!("GenE 0, Single(5,3) {single_q}, Inc-Ens(15 models, K={k}) {inc_q} = 15+14+13"))
}

// 6 -------------------------------------------------------------------------

fn clustering_recovery() -> Check {
    let start = Instant::now();
    let data = two_blobs(100, 1.0, 2);
    let config = |seed| LearnerConfig {
        hidden_width: 8,
        epochs: 3,
        seed,
        ..LearnerConfig::default()
    };
    let a = train(&config(1), &data, None).map_err(|e| e.to_string())?;
    let b = train(&config(2), &data, None).map_err(|e| e.to_string())?;
    let mut records = Vec::new();
    let mut truth = Vec::new();
    for i in 0..10 {
        records.push(a.clone().with_id(format!("a{i:02}")));
        records.push(b.clone().with_id(format!("b{i:02}")));
    }
    let pool = ModelPool::new(records).map_err(|e| e.to_string())?;
    let probe = two_blobs(50, 1.0, 3);
    let sigs = extract_signatures(&pool, &probe, &Trace::new()).map_err(|e| e.to_string())?;
    let report = cluster_models(&sigs, &ClusterOptions::default()).map_err(|e| e.to_string())?;
    let mut found = Vec::new();
    for s in &sigs {
        truth.push(usize::from(s.model_id.starts_with('b')));
        found.push(report.assignments[&s.model_id]);
    }
    let ari = adjusted_rand_index(&truth, &found);
    ensure!(report.k == 2, "pool clustering chose K={}", report.k);
    ensure!(ari == 1.0, "pool clustering ARI {ari}");

    let centers = vec![vec![0.0, 0.0], vec![6.0, 0.0], vec![0.0, 6.0]];
    let (x, labels) = gaussian_blobs(100, &centers, 1.0, 8);
    let model = gmm_fit(&x, 3, 8).map_err(|e| e.to_string())?;
    let blob_ari = adjusted_rand_index(&labels, &gmm_assign(&model, &x).map_err(|e| e.to_string())?);
    ensure!(blob_ari >= 0.95, "3-blob GMM ARI {blob_ari:.4}");
    within(start.elapsed(), Duration::from_secs(30))?;
    Ok(format!("pool K=2 ARI {ari}, 3-blob GMM ARI {blob_ari:.4}"))
}

// 7 -------------------------------------------------------------------------

fn simplex_optimizer() -> Check {
    let start = Instant::now();
    let n = 200;
    let labels: Vec<usize> = (0..n).map(|i| i % 3).collect();
    let perfect = Array2::from_shape_fn((n, 3), |(i, c)| if c == labels[i] { 0.99 } else { 0.005 });
    let uniform = Array2::from_elem((n, 3), 1.0 / 3.0);
    let sets = vec![perfect, uniform];
    let fit = optimize_simplex_weights(&sets, &labels).map_err(|e| e.to_string())?;
    let w = fit.weights.as_slice();
    ensure!(w.iter().all(|&v| v >= -1e-8) && (w.iter().sum::<f64>() - 1.0).abs() <= 1e-8, "weights {w:?} off the simplex");
    ensure!(w[0] >= 0.9, "dominant weight {}", w[0]);
    let grid = (0..=1000)
        .map(|i| {
            let a = i as f64 / 1000.0;
            mixture_cross_entropy(&sets, &labels, &[a, 1.0 - a]).expect("valid sets")
        })
        .fold(f64::INFINITY, f64::min);
    ensure!((fit.objective - grid).abs() <= 1e-6, "objective {} vs grid {grid}", fit.objective);

    // a random interior problem for the constraint check
    let mut rng = seed::rng(12);
    let random_sets: Vec<Array2<f64>> = (0..4)
        .map(|_| {
            let mut m = Array2::from_shape_fn((n, 3), |_| rng.random_range(0.05..1.0));
            for mut row in m.rows_mut() {
                let s = row.sum();
                row.mapv_inplace(|v| v / s);
            }
            m
        })
        .collect();
    let w4 = optimize_simplex_weights(&random_sets, &labels).map_err(|e| e.to_string())?.weights;
    let w4 = w4.as_slice();
    ensure!(w4.iter().all(|&v| v >= -1e-8) && (w4.iter().sum::<f64>() - 1.0).abs() <= 1e-8, "weights {w4:?} off the simplex");
    within(start.elapsed(), Duration::from_secs(10))?;
    Ok(format!("dominant weight {:.6}, objective {:.9} vs grid {grid:.9}", w[0], fit.objective))
}

// 8 -------------------------------------------------------------------------

const BENCH_CONFIG: &str = r#"
methods = ["genex", "single"]
shared-body = true
[dataset]
path = "unused.csv"
[gene]
pool-size = 20
generations = 4
[baselines]
runs = [20]
epochs = [3]
ensemble-sizes = [3]
"#;

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Metrics per method label for one seed of the shifted benchmark.
fn bench_seed(config: &RunConfig, s: u64, guided: bool) -> Result<BTreeMap<String, Metrics>, String> {
    let (data, emb) = shifted_benchmark(&ShiftedSpec::default(), s);
    let split = if guided {
        jsd_guided_split(&emb, data.labels(), &SplitConfig { seed: s, ..SplitConfig::default() })
    } else {
        random_split(&emb, data.labels(), 0.3, s)
    }
    .map_err(|e| e.to_string())?;
    let outcome = run_seed(config, &Prepared { data, split }, s, None);
    ensure!(outcome.test_reads_outside_evaluation() == 0, "seed {s}: test data read outside evaluation");
    outcome
        .rows
        .into_iter()
        .map(|r| match r.outcome {
            Outcome::Ok { metrics, .. } => Ok((r.method, metrics)),
            Outcome::Failed(msg) => Err(format!("seed {s} {}: {msg}", r.method)),
        })
        .collect()
}

fn vo_reduction() -> Check {
    let start = Instant::now();
    let config = RunConfig::parse(BENCH_CONFIG).map_err(|e| e.to_string())?;
    config.validate().map_err(|e| e.to_string())?;
    let mut wins = 0;
    let mut test_diff = Vec::new();
    for s in 0..10 {
        let m = bench_seed(&config, s, true)?;
        let (g, single) = (&m["genex"], &m["single-n20-q3"]);
        wins += usize::from(g.vo_gap() < single.vo_gap());
        test_diff.push(g.test_gm - single.test_gm);
    }
    let diff = median(test_diff);

    let mut rs_config = config.clone();
    rs_config.methods = vec![genex_cli::config::Method::Genex, genex_cli::config::Method::IncEns];
    let (mut genex_test, mut inc_test) = (Vec::new(), Vec::new());
    for s in 0..10 {
        let m = bench_seed(&rs_config, s, false)?;
        genex_test.push(m["genex"].test_gm);
        inc_test.push(m["inc-ens-n20-q3-k3"].test_gm);
    }
    let (g_med, i_med) = (median(genex_test), median(inc_test));
    let detail = format!(
        "guided split: VO gap below Single in {wins}/10 seeds, median test GM difference {diff:+.4}; \
         random split: median test GM {g_med:.4} vs Inc-Ens {i_med:.4}"
    );
    ensure!(wins >= 8, "{detail}");
    ensure!(diff >= -0.02, "{detail}");
    ensure!((g_med - i_med).abs() <= 0.05, "{detail}");
    within(start.elapsed(), Duration::from_secs(1800))?;
    Ok(detail)
}

// 9 -------------------------------------------------------------------------

fn gradient_check() -> Check {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (act, s) in [(Activation::Relu, 1), (Activation::Tanh, 2), (Activation::Relu, 3)] {
        let mut rng = seed::rng(s);
        let params = init_params(4, 6, 3, &mut rng);
        let x = Array2::from_shape_fn((3, 4), |_| rng.random_range(-2.0..2.0));
        let labels = [0, 2, 1];
        let (_, grads) = loss_and_gradient(&params, act, &x, &labels).map_err(|e| e.to_string())?;
        let h = 1e-5;
        for (k, t) in params.tensors().iter().enumerate() {
            for i in 0..t.values.len() {
                let mut plus = params.clone();
                plus.tensors_mut()[k].values[i] += h;
                let mut minus = params.clone();
                minus.tensors_mut()[k].values[i] -= h;
                let lp = loss_and_gradient(&plus, act, &x, &labels).map_err(|e| e.to_string())?.0;
                let lm = loss_and_gradient(&minus, act, &x, &labels).map_err(|e| e.to_string())?.0;
                let numeric = (lp - lm) / (2.0 * h);
                let analytic = grads.tensors()[k].values[i];
                let rel = (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(1e-6);
                ensure!(rel <= 1e-4, "{}[{i}]: analytic {analytic} numeric {numeric}", t.name);
                worst = worst.max(rel);
                checked += 1;
            }
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{checked} partials, worst relative error {worst:.2e}"))
}

// 10 ------------------------------------------------------------------------

fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for entry in std::fs::read_dir(dir).expect("readable dir") {
            let path = entry.expect("dir entry").path();
            if path.is_dir() {
                walk(root, &path, out);
            } else {
                let name = path.file_name().unwrap_or_default();
                // wall-clock files are the only nondeterministic output
                if name != "timings.tsv" && name != "timing.tsv" {
                    out.insert(path.strip_prefix(root).expect("under root").to_path_buf(), std::fs::read(&path).expect("readable"));
                }
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

fn differences(a: &BTreeMap<PathBuf, Vec<u8>>, b: &BTreeMap<PathBuf, Vec<u8>>) -> Vec<String> {
    let keys: std::collections::BTreeSet<_> = a.keys().chain(b.keys()).collect();
    keys.into_iter()
        .filter(|k| a.get(*k) != b.get(*k))
        .map(|k| k.display().to_string())
        .collect()
}

fn genex(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_genex")).args(args).output().expect("genex runs")
}

fn determinism_resume() -> Check {
    let start = Instant::now();
    let work = tempfile::tempdir().map_err(|e| e.to_string())?;
    let spec = ShiftedSpec {
        n_per_class: 1500,
        ..ShiftedSpec::default()
    };
    cmd_generate(work.path(), &spec, 3).map_err(|e| e.to_string())?;
    let config = work.path().join("run.toml");
    std::fs::write(
        &config,
        "seeds = [0, 1, 2, 3]\nshared-body = true\n[dataset]\npath = \"data.csv\"\nembeddings = \"embeddings.csv\"\n",
    )
    .map_err(|e| e.to_string())?;
    let cfg = config.to_str().expect("utf-8 path");
    let out = |name: &str| work.path().join(name).to_str().expect("utf-8 path").to_string();

    for name in ["a", "b"] {
        let o = genex(&["run", "--config", cfg, "--out", &out(name)]);
        ensure!(o.status.success(), "run {name} failed: {}", String::from_utf8_lossy(&o.stderr));
    }
    let (a, b) = (snapshot(Path::new(&out("a"))), snapshot(Path::new(&out("b"))));
    let diff = differences(&a, &b);
    ensure!(diff.is_empty(), "two executions differ in {diff:?}");

    // Kill as soon as the first generation pool is on disk.
    let c = out("c");
    let mut child = Command::new(env!("CARGO_BIN_EXE_genex"))
        .args(["run", "--config", cfg, "--out", &c])
        .spawn()
        .map_err(|e| e.to_string())?;
    let seeds_dir = Path::new(&c).join("seeds");
    let pool_written = || {
        std::fs::read_dir(&seeds_dir)
            .map(|d| d.flatten().any(|e| e.path().join("genex/pool.ckpt").is_file()))
            .unwrap_or(false)
    };
    let waited = Instant::now();
    while !pool_written() && child.try_wait().map_err(|e| e.to_string())?.is_none() {
        ensure!(waited.elapsed() < Duration::from_secs(600), "no pool checkpoint appeared");
        std::thread::sleep(Duration::from_millis(1));
    }
    let killed = child.try_wait().map_err(|e| e.to_string())?.is_none();
    child.kill().ok();
    child.wait().map_err(|e| e.to_string())?;
    ensure!(killed, "run finished before it could be interrupted");
    ensure!(!Path::new(&c).join("report.tsv").exists(), "interrupted run wrote a report");
    let pools_before = std::fs::read_dir(&seeds_dir)
        .map(|d| d.flatten().filter(|e| e.path().join("genex/pool.ckpt").is_file()).count())
        .unwrap_or(0);

    let o = genex(&["run", "--config", cfg, "--out", &c, "--resume"]);
    ensure!(o.status.success(), "resumed run failed: {}", String::from_utf8_lossy(&o.stderr));
    let diff = differences(&a, &snapshot(Path::new(&c)));
    ensure!(diff.is_empty(), "resumed run differs in {diff:?}");
    Ok(format!(
        "{} files identical across two runs and a kill-and-resume ({pools_before} pool(s) reused), {:.1}s",
        a.len(),
        start.elapsed().as_secs_f64()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("splitter divergence", splitter_divergence),
        ("zeta decay shape", zeta_decay),
        ("optimism scaling", optimism_scaling),
        ("genetic identity suite", genetic_identity),
        ("validation-query audit", query_audit),
        ("clustering recovery", clustering_recovery),
        ("simplex optimizer", simplex_optimizer),
        ("end-to-end VO reduction", vo_reduction),
        ("gradient check", gradient_check),
        ("determinism and resume", determinism_resume),
    ];
    let wanted: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let n = i + 1;
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        match result {
            Ok(detail) => println!("criterion {n:>2} PASS  {name}: {detail}"),
            Err(detail) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {detail}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
