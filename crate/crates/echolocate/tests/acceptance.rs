//! Acceptance gate: ten criteria covering the geometry oracles, the image
//! source renderer, the DOA/TDOA front end, the three distance estimators,
//! and the end-to-end pipeline. Each test prints one pass/fail line with the
//! measured values; tolerances and runtime budgets are pinned as constants
//! next to each check.

use std::sync::OnceLock;
use std::time::{Duration, Instant};

use echolocate::config::{DistanceMethod, ExperimentConfig};
use echolocate::dataset::{generate_dataset, Split};
use echolocate::doa::{covariance, sps_mvdr};
use echolocate::encode::Encoder;
use echolocate::geometry::{
    first_order_images, first_order_path_oracle, floor_path_oracle, BoundaryLabel, Direction,
    RoomScene, Vec3,
};
use echolocate::mlp::train_from_config;
use echolocate::pipeline::{array_from_config, mix_seed, Pipeline, RunOptions, RunReport};
use echolocate::plots::write_sps_csv;
use echolocate::room::{boundary_from_pair, plane_metrics};
use echolocate::simulator::{render_array, white_noise, MultichannelSignal};
use echolocate::source_loc::{
    distance_from_height, distance_from_tdoa, estimate_source, LocalizationFeatures,
};
use echolocate::stft::StftConfig;
use echolocate::tdoa::{estimate_tdoa, extract_beam, gcc_phat};
use echolocate::vad::energy_vad;
use echolocate::SOUND_SPEED;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal};

fn verdict(n: usize, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("criterion {n:2} {name}: {tag} [{detail}]");
    assert!(pass, "criterion {n} ({name}) failed: {detail}");
}

/// The fixed reverberant reference scene used by criteria 5 and 6.
fn reference_scene() -> RoomScene {
    RoomScene::new(
        Vec3::new(4.0, 5.0, 2.6),
        Vec3::new(3.0, 3.0, 1.5),
        Vec3::new(2.0, 2.0, 1.5),
        0.8,
    )
    .unwrap()
}

fn floor_oracle_path(scene: &RoomScene) -> echolocate::geometry::PathOracle {
    let (_, images) = first_order_path_oracle(scene).unwrap();
    images.into_iter().find(|p| p.label == BoundaryLabel::Floor).unwrap()
}

#[test]
fn criterion_01_geometric_oracle_round_trip() {
    const N: usize = 1000;
    const REL_TOL: f64 = 1e-9;
    const BUDGET: Duration = Duration::from_secs(1);
    let t = Instant::now();
    let cfg = ExperimentConfig::default();
    let samples = generate_dataset(&cfg, N, 101).unwrap();
    let mut worst = 0.0f64;
    for s in &samples {
        let fp = floor_path_oracle(&s.scene).unwrap();
        let d_true = (s.scene.source_pos - s.scene.array_pos).norm();
        let dh = distance_from_height(fp.h, fp.alpha1_deg, fp.alpha2_deg).unwrap();
        let dt =
            distance_from_tdoa(fp.dt, fp.alpha1_deg, fp.alpha2_deg, s.scene.sound_speed).unwrap();
        worst = worst
            .max(((dh - d_true) / d_true).abs())
            .max(((dt - d_true) / d_true).abs());
    }
    let el = t.elapsed();
    verdict(
        1,
        "geometric oracle round trip",
        worst < REL_TOL && el <= BUDGET,
        &format!("max rel err {worst:.2e} over {N} scenes; {el:.2?}"),
    );
}

#[test]
fn criterion_02_boundary_oracle_round_trip() {
    const N: usize = 200;
    const DIST_TOL: f64 = 1e-9;
    const ANGLE_TOL: f64 = 1e-6;
    const BUDGET: Duration = Duration::from_secs(1);
    let t = Instant::now();
    let cfg = ExperimentConfig::default();
    let samples = generate_dataset(&cfg, N, 202).unwrap();
    let mut worst_d = 0.0f64;
    let mut worst_a = 0.0f64;
    for s in &samples {
        let truth = s.scene.boundaries_array_frame();
        let ps = s.scene.to_array_frame(s.scene.source_pos);
        for (pos, label) in first_order_images(&s.scene) {
            let est = boundary_from_pair(ps, s.scene.to_array_frame(pos)).unwrap();
            let tb = truth.iter().find(|b| b.label == label).unwrap();
            let (dd, theta) = plane_metrics(&est, tb);
            worst_d = worst_d.max(dd.abs());
            worst_a = worst_a.max(theta);
        }
    }
    let el = t.elapsed();
    verdict(
        2,
        "boundary oracle round trip",
        worst_d < DIST_TOL && worst_a < ANGLE_TOL && el <= BUDGET,
        &format!("max |dd| {worst_d:.2e} m, max theta {worst_a:.2e} deg over {N} scenes; {el:.2?}"),
    );
}

/// Rebuilds `scene` inside a large cube so that one boundary keeps its exact
/// relative geometry (the translation preserves the target image's direction
/// and delay) while every other first-order image lands far outside any
/// plausible measurement window. Gains change, timings do not.
fn isolation_scene(scene: &RoomScene, label: BoundaryLabel) -> RoomScene {
    const L: f64 = 80.0;
    const T60: f64 = 4.0;
    let d = scene.dims;
    let a = scene.array_pos;
    let c = L / 2.0;
    let off = match label {
        BoundaryLabel::WallXNeg => Vec3::new(0.0, c - a.y, c - a.z),
        BoundaryLabel::WallXPos => Vec3::new(L - d.x, c - a.y, c - a.z),
        BoundaryLabel::WallYNeg => Vec3::new(c - a.x, 0.0, c - a.z),
        BoundaryLabel::WallYPos => Vec3::new(c - a.x, L - d.y, c - a.z),
        BoundaryLabel::Floor => Vec3::new(c - a.x, c - a.y, 0.0),
        BoundaryLabel::Ceiling => Vec3::new(c - a.x, c - a.y, L - d.z),
        BoundaryLabel::Unknown => unreachable!("isolation_scene needs a face label"),
    };
    RoomScene::new(Vec3::new(L, L, L), scene.source_pos + off, a + off, T60).unwrap()
}

#[test]
fn criterion_03_simulator_first_order_timing() {
    const N_SCENES: usize = 20;
    const TOL_SAMPLES: f64 = 1.0;
    const BUDGET: Duration = Duration::from_secs(120);
    const FS: f64 = 16000.0;
    const DUR_SAMPLES: usize = 19200;
    // Half-width of the search window around each expected lag, in samples.
    const WINDOW: i64 = 6;
    let t = Instant::now();
    let cfg = ExperimentConfig::default();
    let array = array_from_config(&cfg).unwrap();
    let enc =
        Encoder::new(&array, StftConfig { fft_len: cfg.fft_len, hop: cfg.hop }).unwrap();
    let samples = generate_dataset(&cfg, N_SCENES, 303).unwrap();
    let mut worst = 0.0f64;
    let mut n_paths = 0usize;
    for (i, s) in samples.iter().enumerate() {
        let scene = &s.scene;
        let src = white_noise(DUR_SAMPLES, mix_seed(303, i as u64));
        // The order-0 render is the direct path alone on the same relative
        // timeline as every isolation render (the direct path is translation
        // invariant), so subtracting it leaves only the reflections.
        let r0 = render_array(scene, &src, &array, 0, None, 1).unwrap();
        let len0 = r0.channels[0].len();
        let hoa0 = enc.encode(&r0, cfg.frame_len).unwrap();
        let (direct, images) = first_order_path_oracle(scene).unwrap();
        let b0 = extract_beam(&hoa0, direct.direction);
        for p in &images {
            let iso = isolation_scene(scene, p.label);
            let (_, iso_images) = first_order_path_oracle(&iso).unwrap();
            let target = iso_images.iter().find(|q| q.label == p.label).unwrap();
            // The translation must preserve the target path exactly; any
            // other image must stay far outside the search window.
            assert!((target.tdoa - p.tdoa).abs() * FS < 1e-6);
            assert!(target.direction.angle_to(p.direction) < 1e-4);
            let expected = target.tdoa * FS;
            for q in iso_images.iter().filter(|q| q.label != p.label) {
                assert!(q.tdoa * FS - expected > (WINDOW + 10) as f64);
            }
            let r1 = render_array(&iso, &src, &array, 1, None, 1).unwrap();
            let mut diff = Vec::with_capacity(r1.channels.len());
            for (c1, c0) in r1.channels.iter().zip(&r0.channels) {
                diff.push(c1[..len0].iter().zip(c0).map(|(a, b)| a - b).collect());
            }
            let diff = MultichannelSignal { sample_rate: FS, channels: diff };
            let hoad = enc.encode(&diff, cfg.frame_len).unwrap();
            let beam = extract_beam(&hoad, target.direction);
            let max_lag = (expected.ceil() as usize + 16).max(32);
            let corr =
                gcc_phat(&b0.samples, &beam.samples, FS, cfg.band(), max_lag).unwrap();
            let center = expected.round() as i64;
            let (mut best_lag, mut best) = (center - WINDOW, f64::MIN);
            for lag in (center - WINDOW)..=(center + WINDOW) {
                let v = corr.value_at(lag);
                if v > best {
                    best = v;
                    best_lag = lag;
                }
            }
            worst = worst.max((best_lag as f64 - expected).abs());
            n_paths += 1;
        }
    }
    let el = t.elapsed();
    verdict(
        3,
        "simulator first-order timing",
        worst <= TOL_SAMPLES && el <= BUDGET,
        &format!("max |lag err| {worst:.3} samples over {n_paths} paths; {el:.2?}"),
    );
}

#[test]
fn criterion_04_anechoic_doa_accuracy() {
    const N_DIRS: usize = 100;
    const TOL_DEG: f64 = 3.0;
    const MIN_HITS: usize = 99;
    const BUDGET: Duration = Duration::from_secs(300);
    const DUR_SAMPLES: usize = 12000;
    let t = Instant::now();
    let cfg = ExperimentConfig::default();
    let array = array_from_config(&cfg).unwrap();
    let enc =
        Encoder::new(&array, StftConfig { fft_len: cfg.fft_len, hop: cfg.hop }).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(404);
    let mut hits = 0usize;
    let mut worst = 0.0f64;
    for i in 0..N_DIRS {
        let az = rng.gen_range(-180.0..180.0);
        let el: f64 = rng.gen_range(-1.0f64..=1.0).asin().to_degrees();
        let dir = Direction::new(az, el);
        let src = white_noise(DUR_SAMPLES, mix_seed(404, i as u64));
        let mic = echolocate::simulator::render_plane_wave(
            &src,
            dir,
            &array,
            SOUND_SPEED,
            None,
            0,
        )
        .unwrap();
        let hoa = enc.encode(&mic, cfg.frame_len).unwrap();
        let cov = covariance(&hoa, cfg.band(), &[]).unwrap();
        let sps = sps_mvdr(&cov, cfg.grid_step_deg, cfg.loading_scale).unwrap();
        let err = sps.argmax().angle_to(dir);
        worst = worst.max(err);
        if err <= TOL_DEG {
            hits += 1;
        }
    }
    let el = t.elapsed();
    verdict(
        4,
        "anechoic doa accuracy",
        hits >= MIN_HITS && el <= BUDGET,
        &format!("{hits}/{N_DIRS} within {TOL_DEG} deg, worst {worst:.2} deg; {el:.2?}"),
    );
}

#[test]
fn criterion_05_reverberant_floor_doa_peak() {
    const TOL_DEG: f64 = 6.0;
    const BUDGET: Duration = Duration::from_secs(120);
    let t = Instant::now();
    let cfg = ExperimentConfig {
        distance_method: DistanceMethod::Height,
        ..ExperimentConfig::default()
    };
    let scene = reference_scene();
    let pipe = Pipeline::new(
        cfg,
        None,
        RunOptions { keep_stages: true, ..RunOptions::default() },
    )
    .unwrap();
    let (row, cache) = pipe.run_scene(0, &scene);
    let doa = row.doa.expect("doa stage must produce a peak set");
    let floor_dir = floor_oracle_path(&scene).direction;
    let best = doa
        .reflections
        .iter()
        .map(|p| p.direction.angle_to(floor_dir))
        .fold(f64::INFINITY, f64::min);
    let sps = cache.sps.expect("sps kept by keep_stages");
    let path = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("sps_reference_scene.csv");
    write_sps_csv(&sps, &path).unwrap();
    let csv_lines = std::fs::read_to_string(&path).unwrap().lines().count();
    let el = t.elapsed();
    verdict(
        5,
        "reverberant floor doa peak",
        best <= TOL_DEG && csv_lines > 1 && el <= BUDGET,
        &format!(
            "floor peak within {best:.2} deg, sps csv {csv_lines} lines at {}; {el:.2?}",
            path.display()
        ),
    );
}

#[test]
fn criterion_06_floor_tdoa_per_frame() {
    const TOL_SAMPLES: f64 = 2.0;
    const MIN_HIT_RATIO: f64 = 0.8;
    const BUDGET: Duration = Duration::from_secs(120);
    let t = Instant::now();
    let cfg = ExperimentConfig::default();
    let fs = cfg.sample_rate_hz;
    let scene = reference_scene();
    let array = array_from_config(&cfg).unwrap();
    let enc =
        Encoder::new(&array, StftConfig { fft_len: cfg.fft_len, hop: cfg.hop }).unwrap();
    let src = white_noise((cfg.duration_s * fs) as usize, mix_seed(cfg.seed, 0));
    let mic = render_array(
        &scene,
        &src,
        &array,
        cfg.render_max_order as u32,
        cfg.snr_db,
        mix_seed(cfg.seed, 1),
    )
    .unwrap();
    let hoa = enc.encode(&mic, cfg.frame_len).unwrap();
    let active = energy_vad(&hoa.eb_time[0], cfg.frame_len, cfg.vad_ratio);
    let (direct, _) = first_order_path_oracle(&scene).unwrap();
    let floor = floor_oracle_path(&scene);
    let expected = floor.tdoa * fs;
    let b0 = extract_beam(&hoa, direct.direction);
    let bf = extract_beam(&hoa, floor.direction);
    let max_lag = (cfg.max_delay_ms * 1e-3 * fs) as usize;
    let mut n_frames = 0usize;
    let mut hits = 0usize;
    let mut min_lag = i64::MAX;
    let mut leak_frames = 0usize;
    for f in 0..active.len() {
        if !active[f] {
            continue;
        }
        let lo = f * cfg.frame_len;
        let hi = ((f + 1) * cfg.frame_len).min(b0.samples.len());
        if hi <= lo {
            continue;
        }
        let corr = match gcc_phat(&b0.samples[lo..hi], &bf.samples[lo..hi], fs, cfg.band(), max_lag)
        {
            Ok(c) => c,
            Err(_) => continue,
        };
        n_frames += 1;
        let est = estimate_tdoa(
            &corr,
            fs,
            cfg.sigma_thresh,
            cfg.exclusion_samples,
            cfg.max_delay_ms * 1e-3,
        );
        min_lag = min_lag.min(est.lag);
        if est.valid && (est.lag as f64 - expected).abs() <= TOL_SAMPLES {
            hits += 1;
        }
        let excl = cfg.exclusion_samples as i64;
        let zero_zone = (-excl..=excl)
            .map(|l| corr.value_at(l))
            .fold(f64::MIN, f64::max);
        if zero_zone > est.peak {
            leak_frames += 1;
        }
    }
    let ratio = hits as f64 / n_frames.max(1) as f64;
    let rejected = min_lag > cfg.exclusion_samples as i64;
    let el = t.elapsed();
    verdict(
        6,
        "floor tdoa per-frame accuracy",
        ratio >= MIN_HIT_RATIO && rejected && n_frames > 0 && el <= BUDGET,
        &format!(
            "{hits}/{n_frames} frames within {TOL_SAMPLES} samples (expected lag {expected:.2}), \
             min returned lag {min_lag}, zero-lag peak dominant in {leak_frames} frames; {el:.2?}"
        ),
    );
}

#[test]
fn criterion_07_distance_method_ordering() {
    const N_EVAL: usize = 200;
    const NOISE_ANGLE_DEG: f64 = 1.0;
    const NOISE_DT_S: f64 = 0.5e-3;
    const N_BOOT: usize = 2000;
    const BUDGET: Duration = Duration::from_secs(600);
    let t = Instant::now();
    // The regressor is trained under the same perturbation protocol it is
    // evaluated on: noisy angles and delay, exact array height.
    let cfg = ExperimentConfig {
        ddnn: echolocate::config::DdnnConfig {
            noise_angle_deg: NOISE_ANGLE_DEG,
            noise_dt_ms: NOISE_DT_S * 1e3,
            noise_h_m: 0.0,
            ..echolocate::config::DdnnConfig::default()
        },
        ..ExperimentConfig::default()
    };
    let (model, _) = train_from_config(&cfg, cfg.seed).unwrap();
    let samples = generate_dataset(&cfg, N_EVAL, 707).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(7070);
    let gauss = Normal::new(0.0, 1.0).unwrap();
    let mut err_h = Vec::with_capacity(N_EVAL);
    let mut err_t = Vec::with_capacity(N_EVAL);
    let mut err_d = Vec::with_capacity(N_EVAL);
    for s in &samples {
        let fp = floor_path_oracle(&s.scene).unwrap();
        let d_true = (s.scene.source_pos - s.scene.array_pos).norm();
        let a1 = fp.alpha1_deg + NOISE_ANGLE_DEG * gauss.sample(&mut rng);
        let a2 = fp.alpha2_deg + NOISE_ANGLE_DEG * gauss.sample(&mut rng);
        let dt = fp.dt + NOISE_DT_S * gauss.sample(&mut rng);
        err_h.push(match distance_from_height(fp.h, a1, a2) {
            Ok(d) => (d - d_true).abs(),
            Err(_) => f64::INFINITY,
        });
        err_t.push(match distance_from_tdoa(dt, a1, a2, SOUND_SPEED) {
            Ok(d) => (d - d_true).abs(),
            Err(_) => f64::INFINITY,
        });
        let feats = LocalizationFeatures {
            h: fp.h,
            alpha1_deg: a1,
            alpha2_deg: a2,
            dt,
            direct: Direction::new(0.0, a1),
        };
        err_d.push(
            match estimate_source(&feats, DistanceMethod::Dnn, Some(&model), SOUND_SPEED) {
                Ok(e) => (e.distance - d_true).abs(),
                Err(_) => f64::INFINITY,
            },
        );
    }
    let med = |v: &mut Vec<f64>| -> f64 {
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) }
    };
    let mean = |v: &[f64]| -> f64 { v.iter().sum::<f64>() / v.len() as f64 };
    let med_h = med(&mut err_h.clone());
    let med_t = med(&mut err_t.clone());
    let med_d = med(&mut err_d.clone());
    let (mae_h, mae_d) = (mean(&err_h), mean(&err_d));
    // Paired bootstrap over scenes. The height/TDOA comparison is on medians
    // (the TDOA estimator degenerates on near-grazing draws, so its mean is
    // unbounded); the regressor comparison is on mean absolute error, the
    // statistic its training objective controls.
    let mut boot = ChaCha20Rng::seed_from_u64(7171);
    let mut d_th = Vec::with_capacity(N_BOOT);
    let mut d_hd = Vec::with_capacity(N_BOOT);
    let mut d_td = Vec::with_capacity(N_BOOT);
    for _ in 0..N_BOOT {
        let idx: Vec<usize> = (0..N_EVAL).map(|_| boot.gen_range(0..N_EVAL)).collect();
        let mut h: Vec<f64> = idx.iter().map(|&i| err_h[i]).collect();
        let mut tt: Vec<f64> = idx.iter().map(|&i| err_t[i]).collect();
        let d: Vec<f64> = idx.iter().map(|&i| err_d[i]).collect();
        let (mh, md) = (mean(&h), mean(&d));
        d_th.push(med(&mut tt) - med(&mut h));
        d_hd.push(mh - md);
        d_td.push(mean(&tt) - md);
    }
    let q05 = |v: &mut Vec<f64>| -> f64 {
        v.sort_by(f64::total_cmp);
        v[(0.05 * N_BOOT as f64) as usize]
    };
    let (q_th, q_hd, q_td) = (q05(&mut d_th), q05(&mut d_hd), q05(&mut d_td));
    let el = t.elapsed();
    verdict(
        7,
        "distance method ordering",
        q_th > 0.0 && q_hd >= 0.0 && q_td >= 0.0 && el <= BUDGET,
        &format!(
            "medians h {med_h:.3} t {med_t:.3} d {med_d:.3} m, mae h {mae_h:.3} d {mae_d:.3} m; \
             q05 med(t-h) {q_th:.3}, q05 mae(h-d) {q_hd:.3}, q05 mae(t-d) {q_td:.3}; {el:.2?}"
        ),
    );
}

struct EndToEnd {
    scenes: Vec<RoomScene>,
    report: RunReport,
    json: String,
    build: Duration,
}

fn end_to_end_cfg() -> ExperimentConfig {
    ExperimentConfig {
        t60_min: 0.3,
        t60_max: 0.5,
        distance_method: DistanceMethod::Dnn,
        ..ExperimentConfig::default()
    }
}

fn build_end_to_end() -> EndToEnd {
    let t = Instant::now();
    let cfg = end_to_end_cfg();
    let scenes: Vec<RoomScene> = generate_dataset(&cfg, 20, cfg.seed)
        .unwrap()
        .into_iter()
        .map(|s| s.scene)
        .collect();
    let (model, _) = train_from_config(&cfg, cfg.seed).unwrap();
    let pipe = Pipeline::new(cfg, Some(model), RunOptions::default()).unwrap();
    let report = pipe.run_report(&scenes);
    let json = report.to_canonical_json();
    EndToEnd { scenes, report, json, build: t.elapsed() }
}

fn shared_end_to_end() -> &'static EndToEnd {
    static CELL: OnceLock<EndToEnd> = OnceLock::new();
    CELL.get_or_init(build_end_to_end)
}

#[test]
fn criterion_08_end_to_end_floor_mapping() {
    const MIN_FLOOR_ROOMS: usize = 16;
    const MAX_MEAN_DIST: f64 = 0.3;
    const BUDGET: Duration = Duration::from_secs(1800);
    let run = shared_end_to_end();
    let mut floor_rooms = 0usize;
    for (row, scene) in run.report.rows.iter().zip(&run.scenes) {
        let truth = scene.boundaries_array_frame();
        if let Some(b) = &row.boundary {
            if b.pairs
                .iter()
                .any(|p| p.detected && truth[p.truth_index].label == BoundaryLabel::Floor)
            {
                floor_rooms += 1;
            }
        }
    }
    let agg = &run.report.aggregates.overall.boundary;
    verdict(
        8,
        "end-to-end floor mapping",
        floor_rooms >= MIN_FLOOR_ROOMS
            && agg.dist_mean <= MAX_MEAN_DIST
            && run.build <= BUDGET,
        &format!(
            "floor detected in {floor_rooms}/20 rooms, mean |dd| {:.3} m over {} detected \
             boundaries; built in {:.2?}",
            agg.dist_mean, agg.n_detected, run.build
        ),
    );
}

#[test]
fn criterion_09_byte_identical_reruns() {
    const BUDGET: Duration = Duration::from_secs(1800);
    let first = shared_end_to_end();
    let again = build_end_to_end();
    let identical = first.json == again.json;
    verdict(
        9,
        "byte-identical reruns",
        identical && again.build <= BUDGET,
        &format!(
            "report bytes {} vs {}, identical: {identical}; rerun {:.2?}",
            first.json.len(),
            again.json.len(),
            again.build
        ),
    );
}

#[test]
fn criterion_10_dataset_protocol_conformance() {
    const N: usize = 1000;
    const BUDGET: Duration = Duration::from_secs(10);
    let t = Instant::now();
    let cfg = ExperimentConfig::default();
    let samples = generate_dataset(&cfg, N, 1010).unwrap();
    let mut in_range = true;
    let mut lo = Vec3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
    let mut hi = Vec3::new(0.0, 0.0, 0.0);
    let (mut t60_lo, mut t60_hi) = (f64::INFINITY, 0.0f64);
    let mut counts = [0usize; 3];
    for s in &samples {
        let d = s.scene.dims;
        in_range &= (cfg.room_min.x..=cfg.room_max.x).contains(&d.x)
            && (cfg.room_min.y..=cfg.room_max.y).contains(&d.y)
            && (cfg.room_min.z..=cfg.room_max.z).contains(&d.z)
            && (cfg.t60_min..=cfg.t60_max).contains(&s.scene.t60)
            && s.scene.boundary_clearance(s.scene.source_pos) >= cfg.clearance_m - 1e-12
            && s.scene.boundary_clearance(s.scene.array_pos) >= cfg.clearance_m - 1e-12
            && (s.scene.source_pos - s.scene.array_pos).norm() >= 0.3;
        lo = Vec3::new(lo.x.min(d.x), lo.y.min(d.y), lo.z.min(d.z));
        hi = Vec3::new(hi.x.max(d.x), hi.y.max(d.y), hi.z.max(d.z));
        t60_lo = t60_lo.min(s.scene.t60);
        t60_hi = t60_hi.max(s.scene.t60);
        counts[match s.split {
            Split::Train => 0,
            Split::Val => 1,
            Split::Test => 2,
        }] += 1;
    }
    // Spanning evidence: with 1000 uniform draws the extremes must sit close
    // to the configured range ends.
    let spans = lo.x < 3.7
        && lo.y < 3.7
        && lo.z < 2.2
        && hi.x > 9.3
        && hi.y > 9.3
        && hi.z > 3.8
        && t60_lo < 0.37
        && t60_hi > 0.93;
    let splits_ok = counts == [800, 100, 100];
    let el = t.elapsed();
    verdict(
        10,
        "dataset protocol conformance",
        in_range && spans && splits_ok && el <= BUDGET,
        &format!(
            "ranges ok: {in_range}, spans ok: {spans}, split {counts:?}; dims x \
             [{:.2},{:.2}] z [{:.2},{:.2}] t60 [{:.2},{:.2}]; {el:.2?}",
            lo.x, hi.x, lo.z, hi.z, t60_lo, t60_hi
        ),
    );
}
