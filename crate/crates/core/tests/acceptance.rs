//! Acceptance suite. Run with `cargo test --test acceptance`; prints one
//! PASS/FAIL line per criterion and exits non-zero if any fails.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::Rng;
use smlm_bench::cli::baseline_predictions;
use smlm_bench::dataset::{
    generate_dataset, generate_sample, generate_slot, load_dataset, resolve_n_out, DatasetError,
    GenerateOptions, SizePolicy, Split,
};
use smlm_bench::metrics::report::{evaluate_all, SplitSummary};
use smlm_bench::metrics::{chamfer_distance, detection_report, hungarian_assignment};
use smlm_bench::registry::{self, resolve_label, CONDITION_IDS};
use smlm_bench::rng::{derive_aux_stream, derive_sample_stream};
use smlm_bench::sim::{
    simulate_acquisition_traced, ConditionParams, DwellTrace, Modality, SimError, Termination,
};
use smlm_bench::Point;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within_rel(value: f64, target: f64, rel: f64) -> bool {
    ((value - target) / target).abs() <= rel
}

fn registry_fidelity() -> Outcome {
    use Modality::{DStorm, DnaPaint};
    use Termination::{ExponentialLocalizations as Exp, PoissonBindings, Unlimited};
    let table = [
        ("D1", DStorm, 50.0, 5.0, 100.0, 6305, Exp { mean_events: 20.0 }),
        ("D2", DStorm, 50.0, 5.0, 100.0, 10000, Exp { mean_events: 50.0 }),
        ("D3", DStorm, 50.0, 5.0, 1000.0, 10000, Exp { mean_events: 20.0 }),
        ("D4", DStorm, 50.0, 5.0, 1000.0, 10000, Exp { mean_events: 50.0 }),
        ("D5", DStorm, 1000.0, 5.0, 1000.0, 10000, Exp { mean_events: 20.0 }),
        ("D6", DStorm, 1000.0, 5.0, 1000.0, 10000, Exp { mean_events: 50.0 }),
        ("P1", DnaPaint, 50.0, 5.0, 100.0, 4583, PoissonBindings { lambda: 50.0 }),
        ("P2", DnaPaint, 50.0, 5.0, 100.0, 10000, Unlimited),
        ("P3", DnaPaint, 50.0, 5.0, 1000.0, 10000, Unlimited),
        ("P4", DnaPaint, 1000.0, 5.0, 1000.0, 10000, Unlimited),
    ];
    let ids: Vec<&str> = table.iter().map(|t| t.0).collect();
    if CONDITION_IDS != ids.as_slice() {
        return outcome(false, format!("condition ids {CONDITION_IDS:?}"));
    }
    for (id, modality, density, on, off, frames, term) in table {
        let expected = ConditionParams::new(id, modality, density, on, off, frames, term).unwrap();
        match registry::condition(id) {
            Some(got) if got == expected => {}
            other => return outcome(false, format!("{id}: {other:?}")),
        }
    }
    if registry::condition("Q1").is_some() || registry::all_conditions().len() != 10 {
        return outcome(false, "unexpected extra conditions");
    }
    outcome(true, "10 conditions match exactly")
}

fn photophysics() -> Outcome {
    let params = registry::condition("D2").unwrap();
    let mut trace = DwellTrace::default();
    let (mut n_emitters, mut n_off, mut sx, mut sxx, mut sy, mut syy) = (0usize, 0usize, 0.0, 0.0, 0.0, 0.0);
    let mut id = 0;
    while n_emitters < 100_000 {
        let mut rng = derive_sample_stream(1, id);
        let (emitters, records) = simulate_acquisition_traced(&params, &mut rng, Some(&mut trace)).unwrap();
        for r in &records {
            let e = &emitters[r.true_emitter_id as usize];
            let (dx, dy) = (r.x_nm - e.x_nm, r.y_nm - e.y_nm);
            sx += dx;
            sxx += dx * dx;
            sy += dy;
            syy += dy * dy;
            n_off += 1;
        }
        n_emitters += emitters.len();
        id += 1;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let on = mean(&trace.on_draws);
    let off = mean(&trace.off_draws);
    let n = n_off as f64;
    let std_x = ((sxx - sx * sx / n) / (n - 1.0)).sqrt();
    let std_y = ((syy - sy * sy / n) / (n - 1.0)).sqrt();
    let pass = within_rel(on, 5.0, 0.01)
        && within_rel(off, 100.0, 0.01)
        && within_rel(std_x, 10.0, 0.01)
        && within_rel(std_y, 10.0, 0.01);
    outcome(
        pass,
        format!(
            "{n_emitters} emitters: on {on:.4} ({} draws), off {off:.4} ({} draws), offset std x {std_x:.4} y {std_y:.4} ({n_off} localizations)",
            trace.on_draws.len(),
            trace.off_draws.len()
        ),
    )
}

fn retained_histogram(cond: &str, seed: u64, n: u64) -> BTreeMap<usize, u64> {
    let params = registry::condition(cond).unwrap();
    let mut hist = BTreeMap::new();
    for id in 0..n {
        let fs = generate_sample(&params, &mut derive_sample_stream(seed, id)).unwrap();
        *hist.entry(fs.retained_emitters.len()).or_insert(0) += 1;
    }
    hist
}

fn mode(hist: &BTreeMap<usize, u64>) -> usize {
    let best = hist.values().max().unwrap();
    *hist.iter().find(|(_, v)| *v == best).unwrap().0
}

fn retained_counts() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (cond, target) in [("D2", 7usize), ("D4", 9usize)] {
        let hist = retained_histogram(cond, 42, 1000);
        let min = *hist.keys().next().unwrap();
        let m = mode(&hist);
        let min_ok = (target - 2..=target + 2).contains(&min);
        let mode_ok = (target - 2..=target + 2).contains(&m);
        pass &= min_ok && mode_ok;
        parts.push(format!(
            "{cond}: min {min} [{}] mode {m} [{}] target {target}±2 hist {hist:?}",
            if min_ok { "ok" } else { "out of band" },
            if mode_ok { "ok" } else { "out of band" },
        ));
    }
    outcome(pass, parts.join("; "))
}

fn filter_invariant() -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for cond in ["D2", "D4"] {
        let params = registry::condition(cond).unwrap();
        let n_out = resolve_n_out(&params, 42, 10_000).unwrap();
        let mut violations = 0;
        let mut min_full = usize::MAX;
        for id in 0..10_000u64 {
            let raw = generate_sample(&params, &mut derive_sample_stream(42, id)).unwrap();
            min_full = min_full.min(raw.retained_emitters.len());
            let slot = generate_slot(&params, 42, id, SizePolicy::Fixed(n_out), None).unwrap();
            let frames_ok = |frames: &mut dyn Iterator<Item = u32>| {
                let v: Vec<u32> = frames.collect();
                v.windows(2).all(|w| w[0] < w[1])
            };
            if !frames_ok(&mut raw.localizations.iter().map(|r| r.frame))
                || !frames_ok(&mut slot.sample.localizations.iter().map(|r| r.frame))
                || slot.sample.ground_truth.len() != n_out
            {
                violations += 1;
            }
        }
        pass &= violations == 0;
        parts.push(format!(
            "{cond}: {violations} violating samples of 10000 (pilot n_out {n_out}, min over all 10000 raw samples {min_full})"
        ));
    }
    outcome(pass, parts.join("; "))
}

fn random_points<R: Rng>(rng: &mut R, n: usize, extent: f64) -> Vec<Point> {
    (0..n)
        .map(|_| Point::new(rng.random_range(0.0..extent), rng.random_range(0.0..extent)))
        .collect()
}

/// Minimum total cost over all injective maps from the smaller set into the larger.
fn brute_force_min(a: &[Point], b: &[Point]) -> f64 {
    let (small, large) = if a.len() <= b.len() { (a, b) } else { (b, a) };
    fn rec(small: &[Point], large: &[Point], i: usize, used: &mut [bool], acc: f64, best: &mut f64) {
        if i == small.len() {
            *best = best.min(acc);
            return;
        }
        for j in 0..large.len() {
            if !used[j] {
                used[j] = true;
                rec(small, large, i + 1, used, acc + small[i].dist(&large[j]), best);
                used[j] = false;
            }
        }
    }
    let mut best = f64::INFINITY;
    rec(small, large, 0, &mut vec![false; large.len()], 0.0, &mut best);
    best
}

fn hungarian_oracle() -> Outcome {
    let mut rng = derive_aux_stream(2024, 1, 0);
    let mut worst = 0.0f64;
    for i in 0..10_000 {
        let (n_pred, n_truth) = (rng.random_range(1..=7), rng.random_range(1..=7));
        let pred = random_points(&mut rng, n_pred, 500.0);
        let truth = random_points(&mut rng, n_truth, 500.0);
        let got = hungarian_assignment(&pred, &truth).unwrap().total_cost_nm;
        let want = brute_force_min(&pred, &truth);
        let rel = (got - want).abs() / want.max(f64::MIN_POSITIVE);
        worst = worst.max(rel);
        if rel > 1e-9 {
            return outcome(false, format!("instance {i}: hungarian {got} vs brute force {want}"));
        }
    }
    outcome(true, format!("10000 instances, worst relative error {worst:.2e}"))
}

fn detection_accounting() -> Outcome {
    let mut rng = derive_aux_stream(2024, 2, 0);
    let mut balanced = 0;
    for i in 0..10_000 {
        let n_truth = rng.random_range(1..=10);
        let n_pred = if rng.random_bool(0.5) { n_truth } else { rng.random_range(1..=10) };
        let truth = random_points(&mut rng, n_truth, 100.0);
        let pred = random_points(&mut rng, n_pred, 100.0);
        let r = detection_report(&pred, &truth, 20.0).unwrap();
        let equal_ok = n_pred != n_truth || r.fp == r.fn_;
        if r.tp + r.fn_ != n_truth || r.tp + r.fp != n_pred || !equal_ok {
            return outcome(false, format!("instance {i}: {r:?} for |pred| {n_pred} |truth| {n_truth}"));
        }
        balanced += usize::from(n_pred == n_truth);
    }
    outcome(true, format!("10000 reports ({balanced} with |pred| = |truth|)"))
}

fn chamfer_spots() -> Outcome {
    let a = chamfer_distance(&[Point::new(0.0, 0.0)], &[Point::new(3.0, 4.0)]).unwrap();
    let pts = [Point::new(1.5, -2.0), Point::new(400.0, 12.25), Point::new(0.0, 0.0)];
    let b = chamfer_distance(&pts, &pts).unwrap();
    outcome(a == 10.0 && b == 0.0, format!("single pair {a}, identity {b}"))
}

fn generate_cli(out: &Path, threads: Option<&str>) -> bool {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_smlm"));
    cmd.args(["generate", "--condition", "D2", "--samples", "1000", "--seed", "42", "--out"])
        .arg(out);
    if let Some(t) = threads {
        cmd.args(["--threads", t]);
    }
    cmd.output().map(|o| o.status.success()).unwrap_or(false)
}

fn dir_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

fn determinism() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let runs = [("a", None), ("b", None), ("t1", Some("1")), ("t16", Some("16"))];
    for (name, threads) in runs {
        if !generate_cli(&tmp.path().join(name), threads) {
            return outcome(false, format!("generate run {name} failed"));
        }
    }
    let a = dir_bytes(&tmp.path().join("a"));
    let b = dir_bytes(&tmp.path().join("b"));
    let t1 = dir_bytes(&tmp.path().join("t1"));
    let t16 = dir_bytes(&tmp.path().join("t16"));
    let bytes: usize = a.iter().map(|f| f.1.len()).sum();
    outcome(
        a == b && t1 == t16 && a == t1,
        format!("{} files, {bytes} bytes; repeat equal {}, threads 1 vs 16 equal {}", a.len(), a == b, t1 == t16),
    )
}

fn baseline_floor() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let params = registry::condition("D2").unwrap();
    let opts = GenerateOptions { n_samples: 1000, master_seed: 42, fixed_n: true, threads: None };
    generate_dataset(&params, &opts, tmp.path()).unwrap();
    let ds = load_dataset(tmp.path()).unwrap();
    let n_out = ds.manifest.n_out;
    let side = params.roi.width_nm;

    let mut preds = Vec::new();
    for split in [Split::Train, Split::Val, Split::Test] {
        preds.extend(baseline_predictions(&ds, split, 0, 8, 100).unwrap());
    }
    let by_id: BTreeMap<u64, Vec<Point>> = preds.into_iter().collect();
    let random: BTreeMap<u64, Vec<Point>> = ds
        .iter()
        .map(|s| (s.sample_id, random_points(&mut derive_aux_stream(42, 99, s.sample_id), n_out, side)))
        .collect();

    let summarize = |preds: &BTreeMap<u64, Vec<Point>>| {
        let items: Vec<(u64, &[Point], &[Point])> = ds
            .iter()
            .map(|s| (s.sample_id, preds[&s.sample_id].as_slice(), s.ground_truth.as_slice()))
            .collect();
        SplitSummary::from_rows(&evaluate_all(&items, 20.0).unwrap())
    };
    let base = summarize(&by_id);
    let floor = summarize(&random);
    let acc = base.detection_accuracy.unwrap().mean;
    let floor_acc = floor.detection_accuracy.unwrap().mean;
    let rmse = base.rmse_tp_nm.map_or(0.0, |m| m.mean);
    outcome(
        acc > floor_acc && rmse <= 20.0,
        format!(
            "n_out {n_out}: baseline accuracy {acc:.4} vs random floor {floor_acc:.4}; rmse_tp {rmse:.3} nm; hungarian {:.2} nm vs {:.2} nm",
            base.hungarian_error_nm.unwrap().mean,
            floor.hungarian_error_nm.unwrap().mean
        ),
    )
}

fn excluded_regime() -> Outcome {
    let tmp = tempfile::tempdir().unwrap();
    let params = resolve_label("D5+mu_off=100").unwrap();
    let opts = GenerateOptions { n_samples: 100, master_seed: 1, fixed_n: true, threads: None };
    let out = tmp.path().join("never");
    let lib = generate_dataset(&params, &opts, &out);
    let lib_ok = matches!(lib, Err(DatasetError::Sim(SimError::ExcludedRegime { .. }))) && !out.exists();
    let cli = Command::new(env!("CARGO_BIN_EXE_smlm"))
        .args(["generate", "--condition", "P4", "--samples", "100", "--seed", "1"])
        .args(["--mu-off-override", "100", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    let code = cli.status.code();
    outcome(
        lib_ok && code == Some(4) && !out.exists(),
        format!("library: {}; cli exit code {code:?}", lib.map(|_| "generated".to_string()).unwrap_or_else(|e| e.to_string())),
    )
}

fn main() {
    type Criterion = (&'static str, Duration, fn() -> Outcome);
    let criteria: [Criterion; 10] = [
        ("registry fidelity", Duration::from_secs(1), registry_fidelity),
        ("photophysics statistics", Duration::from_secs(60), photophysics),
        ("retained-emitter counts", Duration::from_secs(120), retained_counts),
        ("filter invariant", Duration::from_secs(600), filter_invariant),
        ("hungarian oracle equivalence", Duration::from_secs(60), hungarian_oracle),
        ("detection accounting", Duration::from_secs(600), detection_accounting),
        ("chamfer spot values", Duration::from_secs(600), chamfer_spots),
        ("determinism", Duration::from_secs(120), determinism),
        ("baseline sanity floor", Duration::from_secs(600), baseline_floor),
        ("excluded regime", Duration::from_secs(600), excluded_regime),
    ];
    let mut failed = 0;
    for (name, budget, check) in criteria {
        let start = Instant::now();
        let o = check();
        let elapsed = start.elapsed();
        let pass = o.pass && elapsed <= budget;
        failed += usize::from(!pass);
        let timing = if elapsed <= budget { String::new() } else { format!(" [over budget {budget:?}]") };
        println!(
            "{} {name} ({:.2}s){timing}: {}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64(),
            o.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
