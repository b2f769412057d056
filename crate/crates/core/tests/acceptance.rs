//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails.

use std::fs;
use std::process::ExitCode;
use std::time::Instant;

use deptheval::harness::{
    evaluate, evaluate_pair, generate_synthetic, write_synthetic_dataset, PredictionKind, RunPlan,
    SceneKind, SynthParams,
};
use deptheval::io::{write_report, ReportFormat};
use deptheval::{
    backproject, chamfer, emd_approx, emd_exact, fscore_suite, metrics_2d,
    nn_distances, oracle_nn, subsample, CameraIntrinsics, DepthMap, EvalConfig, Error,
    OracleOptions, Point3, PointCloud, SampleManifest,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};

struct Verdict {
    pass: bool,
    detail: String,
}

fn verdict(pass: bool, detail: String) -> Verdict {
    Verdict { pass, detail }
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn cloud(points: Vec<Point3>) -> PointCloud {
    PointCloud::new(points).unwrap()
}

fn uniform_box(rng: &mut ChaCha8Rng, n: usize, half: f64, depth: (f64, f64)) -> Vec<Point3> {
    (0..n)
        .map(|_| {
            [
                rng.random_range(-half..half),
                rng.random_range(-half..half),
                rng.random_range(depth.0..depth.1),
            ]
        })
        .collect()
}

fn jitter(rng: &mut ChaCha8Rng, points: &[Point3], sigma: f64) -> Vec<Point3> {
    let noise = Normal::new(0.0, sigma).unwrap();
    points
        .iter()
        .map(|p| [p[0] + noise.sample(rng), p[1] + noise.sample(rng), p[2] + noise.sample(rng)])
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

fn iou_f_identity() -> Verdict {
    let start = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    let pairs = 1200;
    for i in 0..pairs {
        let t = [0.005, 0.01, 0.05][i % 3];
        let (ng, nr) = (r.random_range(1..=2000), r.random_range(1..=2000));
        // scale the box to the threshold so precision and recall spread over [0, 1]
        let half = t * r.random_range(1.0..40.0);
        let g = uniform_box(&mut r, ng, half, (1.0, 1.0 + 2.0 * half));
        let sigma = t * r.random_range(0.1..3.0);
        let mut p = jitter(&mut r, &g[..ng.min(nr)], sigma);
        p.extend(uniform_box(&mut r, nr - p.len(), half, (1.0, 1.0 + 2.0 * half)));
        let s = fscore_suite(&cloud(g), &cloud(p), t).unwrap();
        worst = worst.max((s.iou - s.fscore / (2.0 - s.fscore)).abs());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        worst <= 1e-12 && secs < 60.0,
        format!("{pairs} pairs, max |IoU - F/(2-F)| = {worst:.3e}, {secs:.1} s"),
    )
}

fn emd_oracle() -> Verdict {
    let start = Instant::now();
    let mut r = rng(2);
    let (mut worst_gap, mut below) = (0.0f64, 0);
    let pairs = 120;
    for _ in 0..pairs {
        let n = r.random_range(2..=256);
        let g = uniform_box(&mut r, n, 1.5, (1.0, 5.0));
        let sigma = r.random_range(0.05..0.5);
        let mut p = jitter(&mut r, &g, sigma);
        p.reverse();
        let (g, p) = (cloud(g), cloud(p));
        let seed = r.random();
        let config = EvalConfig {
            emd_sample_count: n,
            ..EvalConfig::default()
        };
        let approx = emd_approx(&g, &p, seed, &config).unwrap();
        let exact = emd_exact(&subsample(&g, n, seed).unwrap(), &subsample(&p, n, seed).unwrap())
            .unwrap()
            .mean_cost();
        if approx < exact {
            below += 1;
        }
        worst_gap = worst_gap.max((approx - exact) / exact);
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        below == 0 && worst_gap <= 0.01 && secs < 120.0,
        format!(
            "{pairs} pairs, approx < exact in {below}, max relative gap {:.4} %, {secs:.1} s",
            worst_gap * 100.0
        ),
    )
}

fn nn_exactness() -> Verdict {
    let mut r = rng(3);
    let mut mismatches = 0usize;
    let pairs = 120;
    for i in 0..pairs {
        let n = if i == 0 { 2000 } else { r.random_range(1..=2000) };
        let m = r.random_range(1..=2000);
        let mut target = uniform_box(&mut r, n, 2.0, (0.5, 6.0));
        if i % 4 == 0 {
            // duplicates and a coplanar slab stress the splitting rule
            let dup = target[..n / 3].to_vec();
            target.extend(dup);
            for p in target.iter_mut().step_by(2) {
                p[2] = 3.0;
            }
        }
        let query = uniform_box(&mut r, m, 2.5, (0.0, 7.0));
        let tree = nn_distances(&cloud(query.clone()), &cloud(target.clone())).unwrap();
        for (q, d) in query.iter().zip(&tree) {
            let brute = target
                .iter()
                .map(|t| {
                    let (dx, dy, dz) = (q[0] - t[0], q[1] - t[1], q[2] - t[2]);
                    dx * dx + dy * dy + dz * dz
                })
                .fold(f64::INFINITY, f64::min)
                .sqrt();
            if brute.to_bits() != d.to_bits() {
                mismatches += 1;
            }
        }
    }
    verdict(
        mismatches == 0,
        format!("{pairs} pairs up to 2000 points, {mismatches} distances differ from brute force"),
    )
}

fn rotation(rng: &mut ChaCha8Rng) -> [[f64; 3]; 3] {
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = angle.sin_cos();
    let [x, y, z] = axis;
    let k = 1.0 - c;
    [
        [c + x * x * k, x * y * k - z * s, x * z * k + y * s],
        [y * x * k + z * s, c + y * y * k, y * z * k - x * s],
        [z * x * k - y * s, z * y * k + x * s, c + z * z * k],
    ]
}

fn chamfer_properties() -> Verdict {
    let mut r = rng(4);
    let (mut asym, mut worst_scale, mut worst_rigid) = (0, 0.0f64, 0.0f64);
    let pairs = 60;
    for i in 0..pairs {
        let (na, nb) = (r.random_range(1..1500), r.random_range(1..1500));
        let a = uniform_box(&mut r, na, 1.0, (1.0, 3.0));
        let b = uniform_box(&mut r, nb, 1.0, (1.0, 3.0));
        let b = jitter(&mut r, &b, 0.05);
        let (a, b) = (cloud(a), cloud(b));
        let normalized = i % 2 == 0;
        let ab = chamfer(&a, &b, normalized).unwrap();
        if ab.to_bits() != chamfer(&b, &a, normalized).unwrap().to_bits() {
            asym += 1;
        }
        for s in [0.5, 2.0, 10.0] {
            let scale = |p: Point3| [p[0] * s, p[1] * s, p[2] * s];
            let scaled = chamfer(&a.map_points(scale).unwrap(), &b.map_points(scale).unwrap(), normalized).unwrap();
            worst_scale = worst_scale.max(rel(scaled, s * s * ab));
        }
        let m = rotation(&mut r);
        let shift: [f64; 3] = [r.random_range(-5.0..5.0), r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)];
        let rigid = |p: Point3| {
            let mut q = shift;
            for (row, out) in m.iter().zip(q.iter_mut()) {
                *out += row[0] * p[0] + row[1] * p[1] + row[2] * p[2];
            }
            q
        };
        let moved = chamfer(&a.map_points(rigid).unwrap(), &b.map_points(rigid).unwrap(), normalized).unwrap();
        worst_rigid = worst_rigid.max(rel(moved, ab));
    }
    verdict(
        asym == 0 && worst_scale <= 1e-9 && worst_rigid <= 1e-9,
        format!(
            "{pairs} pairs, {asym} asymmetric, max relative error: scaling {worst_scale:.2e}, rigid motion {worst_rigid:.2e}"
        ),
    )
}

fn random_map(rng: &mut ChaCha8Rng, w: usize, h: usize, invalid: f64) -> DepthMap {
    let values = (0..w * h)
        .map(|_| {
            if rng.random::<f64>() < invalid {
                [0.0, -1.0, 0.0005, 12.0][rng.random_range(0..4)]
            } else {
                rng.random_range(0.01..10.0)
            }
        })
        .collect();
    DepthMap::from_values(w, h, values).unwrap()
}

/// Straight double loop over rows and columns with plain sums.
fn reference_2d(pred: &DepthMap, gt: &DepthMap, c: &EvalConfig) -> Vec<f64> {
    let in_range = |z: f64| z > c.min_depth_m && z <= c.max_depth_m;
    let (mut n, mut abs, mut sqr, mut sq, mut lg) = (0.0, 0.0, 0.0, 0.0, 0.0);
    let mut under = vec![0.0; c.delta_thresholds.len()];
    for v in 0..gt.height() {
        for u in 0..gt.width() {
            let (Some(y), Some(t)) = (pred.get(u, v), gt.get(u, v)) else {
                continue;
            };
            if !(in_range(y) && in_range(t)) {
                continue;
            }
            n += 1.0;
            abs += (y - t).abs() / t;
            sqr += (y - t) * (y - t) / t;
            sq += (y - t) * (y - t);
            lg += (y.ln() - t.ln()).powi(2);
            let ratio = f64::max(y / t, t / y);
            for (k, cutoff) in c.delta_thresholds.iter().enumerate() {
                if ratio < *cutoff {
                    under[k] += 1.0;
                }
            }
        }
    }
    let mut out = vec![abs / n, sqr / n, (sq / n).sqrt(), (lg / n).sqrt()];
    out.extend(under.iter().map(|k| k / n));
    out.push(n);
    out
}

fn metrics_2d_oracle() -> Verdict {
    let mut r = rng(5);
    let c = EvalConfig::default();
    let mut worst = 0.0f64;
    let pairs = 60;
    for _ in 0..pairs {
        let gt = random_map(&mut r, 64, 64, 0.1);
        let pred = random_map(&mut r, 64, 64, 0.1);
        let m = metrics_2d(&pred.apply_validity(&c), &gt.apply_validity(&c), &c).unwrap();
        let mut got = vec![m.absrel, m.sqrel, m.rmse, m.rmse_log];
        got.extend(&m.delta_acc);
        got.push(m.valid_pixel_count as f64);
        for (a, b) in got.iter().zip(reference_2d(&pred, &gt, &c)) {
            worst = worst.max(rel(*a, b));
        }
    }
    let gt = DepthMap::from_values(2, 1, vec![2.0, 4.0]).unwrap();
    let pred = DepthMap::from_values(2, 1, vec![1.0, 4.8]).unwrap();
    let m = metrics_2d(&pred, &gt, &c).unwrap();
    let four = |x: f64, want: f64| (x - want).abs() < 5e-5;
    let example = four(m.absrel, 0.35) && four(m.rmse, 0.9055) && four(m.delta_acc[0], 0.5);
    verdict(
        worst <= 1e-12 && example,
        format!(
            "{pairs} random 64x64 pairs, max relative error {worst:.2e}; two-pixel example absrel {:.4} rmse {:.4} delta1 {:.4}",
            m.absrel, m.rmse, m.delta_acc[0]
        ),
    )
}

fn projection_round_trip() -> Verdict {
    let mut r = rng(6);
    let (mut worst, mut points, mut missing) = (0.0f64, 0usize, 0usize);
    for _ in 0..200 {
        let (w, h) = (r.random_range(1..80), r.random_range(1..60));
        let k = CameraIntrinsics::new(
            r.random_range(20.0..1500.0),
            r.random_range(20.0..1500.0),
            r.random_range(0.0..w as f64),
            r.random_range(0.0..h as f64),
        )
        .unwrap();
        let depth = random_map(&mut r, w, h, 0.2);
        let pc = backproject(&depth, &k).unwrap();
        missing += depth.valid_count().abs_diff(pc.len());
        for (p, &idx) in pc.points().iter().zip(pc.pixels().unwrap()) {
            let (u, v) = ((idx % w) as f64, (idx / w) as f64);
            let (pu, pv, pz) = k.project(*p).unwrap();
            let z = depth.values()[idx];
            worst = worst.max((pu - u).abs()).max((pv - v).abs()).max((pz - z).abs());
            points += 1;
        }
    }
    verdict(
        worst <= 1e-6 && missing == 0,
        format!("{points} valid pixels over 200 maps, max deviation {worst:.2e}, {missing} pixels without a point"),
    )
}

fn dissociation() -> Verdict {
    let c = EvalConfig::default();
    let params = SynthParams::default();
    let mp = generate_synthetic(SceneKind::TwoLayer, PredictionKind::MedianPlane, &params, 0).unwrap();
    let noisy = generate_synthetic(SceneKind::TwoLayer, PredictionKind::Noisy, &params, 0).unwrap();
    let (mp2, mp3) = evaluate_pair(&mp.pred, &mp.gt, &mp.intrinsics, &c).unwrap();
    let (n2, n3) = evaluate_pair(&noisy.pred, &noisy.gt, &noisy.intrinsics, &c).unwrap();
    let absrel_close = mp2.absrel <= 2.0 * n2.absrel;
    let f_separated = mp3.fscore <= 0.5 * n3.fscore;
    verdict(
        absrel_close && f_separated,
        format!(
            "median plane absrel {:.4} F {:.4}; noisy (5 mm) absrel {:.4} F {:.4}; absrel within 2x: {absrel_close}, F at most half: {f_separated}",
            mp2.absrel, mp3.fscore, n2.absrel, n3.fscore
        ),
    )
}

fn oracle_optimality() -> Verdict {
    let c = EvalConfig::default();
    let mut r = rng(8);
    let kinds = [SceneKind::Plane, SceneKind::TwoLayer, SceneKind::BoxRoom, SceneKind::NoisyGt];
    let preds = [PredictionKind::Copy, PredictionKind::Noisy, PredictionKind::Shifted, PredictionKind::MedianPlane];
    let mut maps: Vec<DepthMap> = (0..60)
        .map(|i| {
            let (w, h) = if i % 5 == 0 { (32, 24) } else { (64, 48) };
            let mut p = SynthParams::with_size(w, h);
            p.plane_depth = r.random_range(1.0..8.0);
            p.near_depth = r.random_range(0.5..3.0);
            p.far_depth = p.near_depth + r.random_range(0.5..5.0);
            p.room_depth = r.random_range(2.0..9.0);
            p.noise_sigma = r.random_range(0.001..0.1);
            p.shift = r.random_range(-0.3..0.3);
            let s = generate_synthetic(kinds[i % 4], preds[r.random_range(0..4)], &p, i as u64).unwrap();
            if r.random() { s.gt } else { s.pred }
        })
        .collect();
    // exact copies of a query and of a candidate force ties
    maps[10 + 7] = maps[2].clone();
    maps[10 + 30] = maps[2].clone();
    maps[10 + 44] = maps[10 + 12].clone();
    let maps: Vec<DepthMap> = maps.iter().map(|m| m.apply_validity(&c)).collect();
    let (val, train) = maps.split_at(10);
    let train: Vec<(String, DepthMap)> =
        train.iter().enumerate().map(|(i, m)| (format!("train_{i:02}"), m.clone())).collect();

    let (mut wrong, mut ties) = (0, 0);
    for (qi, query) in val.iter().enumerate() {
        let got = oracle_nn(&format!("val_{qi}"), query, &train, &c, OracleOptions::default()).unwrap();
        let mut scores = Vec::new();
        for (_, cand) in &train {
            let cand = cand.resample_nearest(query.width(), query.height()).unwrap();
            match metrics_2d(&cand, query, &c) {
                Ok(m) => scores.push(Some(m.absrel)),
                Err(Error::Degenerate(_)) => scores.push(None),
                Err(e) => panic!("{e}"),
            }
        }
        let best = scores.iter().flatten().copied().fold(f64::INFINITY, f64::min);
        let first = scores.iter().position(|s| *s == Some(best)).unwrap();
        if scores.iter().filter(|s| **s == Some(best)).count() > 1 {
            ties += 1;
        }
        if got.best_index != first || got.best_absrel.to_bits() != best.to_bits() {
            wrong += 1;
        }
    }
    verdict(
        wrong == 0 && ties > 0,
        format!("10 queries x 50 candidates, {wrong} retrievals not minimal or not first among equals, {ties} queries with tied minima"),
    )
}

fn determinism() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let params = SynthParams::with_size(160, 120);
    let manifest_path = write_synthetic_dataset(dir.path(), SceneKind::NoisyGt, PredictionKind::Noisy, &params, 11, 5).unwrap();
    let manifest = SampleManifest::load(&manifest_path).unwrap();
    let config = EvalConfig {
        emd_sample_count: 512,
        rng_seed: 42,
        ..EvalConfig::default()
    };
    let mut outputs = Vec::new();
    for (run, workers) in [(0, 1), (1, 1), (2, 4), (3, 4)] {
        let plan = RunPlan::new(manifest.clone(), config.clone(), workers).unwrap();
        let report = evaluate(&plan).unwrap();
        let mut bytes = Vec::new();
        for format in [ReportFormat::Json, ReportFormat::Csv] {
            let path = dir.path().join(format!("run{run}.{format:?}"));
            write_report(&report, &path, format).unwrap();
            bytes.push(fs::read(&path).unwrap());
        }
        outputs.push(bytes);
    }
    let identical = outputs.iter().all(|o| *o == outputs[0]);
    verdict(
        identical,
        format!("5 samples, JSON and CSV over two runs each with 1 and 4 workers: {}", if identical { "byte-identical" } else { "differ" }),
    )
}

fn throughput() -> Verdict {
    let dir = tempfile::tempdir().unwrap();
    let manifest_path = write_synthetic_dataset(
        dir.path(), SceneKind::BoxRoom, PredictionKind::Noisy, &SynthParams::default(), 0, 1,
    )
    .unwrap();
    let manifest = SampleManifest::load(&manifest_path).unwrap();
    let plan = RunPlan::new(manifest, EvalConfig::default(), 1).unwrap();
    let start = Instant::now();
    let report = evaluate(&plan).unwrap();
    let secs = start.elapsed().as_secs_f64();
    verdict(
        report.failed_count() == 0 && secs < 2.0,
        format!("640x480, {} EMD points, one worker: {secs:.3} s", plan.config.emd_sample_count),
    )
}

type Check = fn() -> Verdict;

fn main() -> ExitCode {
    let criteria: [(&str, Check); 10] = [
        ("iou_fscore_identity", iou_f_identity),
        ("emd_oracle", emd_oracle),
        ("nn_exactness", nn_exactness),
        ("chamfer_properties", chamfer_properties),
        ("metrics_2d_oracle", metrics_2d_oracle),
        ("projection_round_trip", projection_round_trip),
        ("median_plane_dissociation", dissociation),
        ("oracle_nn_optimality", oracle_optimality),
        ("end_to_end_determinism", determinism),
        ("throughput", throughput),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let v = check();
        println!("[{:>2}] {name}: {}  {}", i + 1, if v.pass { "PASS" } else { "FAIL" }, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
