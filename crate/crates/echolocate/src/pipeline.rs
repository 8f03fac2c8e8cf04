//! End-to-end orchestration: rendering or loading a capture, encoding, DOA,
//! per-reflection TDOA, source localization by every method, and room
//! inference, with per-scene error recording and deterministic reporting.
//!
//! Stage failures never abort a batch: the failing stage is recorded in the
//! row's `status` and the partial row is kept, so aggregates always see every
//! scene that was attempted.

use crate::array::{parse_layout, ArraySpec};
use crate::config::{DistanceMethod, ExperimentConfig, SourceKind};
use crate::doa::{covariance, pick_peaks, sps_mvdr, DoaPeak, DoaSet, SpatialSpectrum};
use crate::encode::{Encoder, HoaFrames};
use crate::eval::{
    boundary_aggregate, distance_stats, t60_bucket, tdoa_stats, BoundaryAggregate, DistanceStats,
    TdoaErrorEntry, TdoaStats,
};
use crate::geometry::{first_order_path_oracle, Direction, PathOracle, RoomScene, Vec3};
use crate::mlp::MlpModel;
use crate::room::{infer_room, match_boundaries, BoundaryMetrics, InferredRoom, MatchGates};
use crate::simulator::{render_array, speech_shaped_noise, white_noise, MultichannelSignal};
use crate::source_loc::{
    estimate_source, select_floor_reflection, LocalizationFeatures, SourceEstimate,
};
use crate::stft::StftConfig;
use crate::tdoa::{aggregate_tdoa, estimate_tdoa, extract_beam, gcc_phat, CorrelationFunction, TdoaEstimate};
use crate::vad::energy_vad;
use crate::{Error, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

/// An estimated reflection is compared against the oracle path whose
/// direction lies within this angle, degrees.
pub const ORACLE_MATCH_DEG: f64 = 10.0;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// Independent seed for one purpose (`stream`) of one run seed. Scene `i`
/// owns streams `4 i .. 4 i + 3`.
pub fn mix_seed(seed: u64, stream: u64) -> u64 {
    splitmix64(seed ^ splitmix64(stream))
}

/// Oracle switches and debugging knobs for a run.
#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize)]
pub struct RunOptions {
    /// Take DOAs from scene geometry instead of the SPS.
    pub oracle_doa: bool,
    /// Take TDOAs from scene geometry instead of GCC-PHAT.
    pub oracle_tdoa: bool,
    /// Keep heavyweight intermediates (HOA frames, SPS, correlations).
    #[serde(skip)]
    pub keep_stages: bool,
}

/// Ground truth recorded alongside a simulated scene's row.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneTruth {
    pub dims: Vec3,
    pub source_pos: Vec3,
    pub array_pos: Vec3,
    pub t60: f64,
    pub direct: PathOracle,
    pub reflections: Vec<PathOracle>,
}

impl SceneTruth {
    pub fn of(scene: &RoomScene) -> Result<SceneTruth> {
        let (direct, reflections) = first_order_path_oracle(scene)?;
        Ok(SceneTruth {
            dims: scene.dims,
            source_pos: scene.source_pos,
            array_pos: scene.array_pos,
            t60: scene.t60,
            direct,
            reflections,
        })
    }
}

/// Aggregated TDOA for one detected reflection.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ReflectionTdoa {
    /// Index into `doa.reflections`.
    pub reflection: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_ms: Option<f64>,
    pub n_valid: usize,
    pub n_frames: usize,
}

/// One scene's (or one capture's) full pipeline record.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SceneRow {
    pub index: usize,
    /// Absent for bare signal input without a known scene.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth: Option<SceneTruth>,
    /// "ok", or "<stage>: <error>" for the first failing stage.
    pub status: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doa: Option<DoaSet>,
    pub tdoas: Vec<ReflectionTdoa>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub floor_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<LocalizationFeatures>,
    /// Successful estimates keyed by method name; failures keyed likewise.
    pub sources: BTreeMap<String, SourceEstimate>,
    pub source_errors: BTreeMap<String, String>,
    /// |estimated - true| direct distance, meters, per method (truth known).
    pub distance_errors_m: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inferred: Option<InferredRoom>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub boundary: Option<BoundaryMetrics>,
    /// One entry per detected reflection, for TDOA accuracy aggregation.
    pub tdoa_entries: Vec<TdoaErrorEntry>,
}

impl SceneRow {
    fn empty(index: usize) -> SceneRow {
        SceneRow {
            index,
            truth: None,
            status: "ok".into(),
            doa: None,
            tdoas: Vec::new(),
            floor_index: None,
            features: None,
            sources: BTreeMap::new(),
            source_errors: BTreeMap::new(),
            distance_errors_m: BTreeMap::new(),
            inferred: None,
            boundary: None,
            tdoa_entries: Vec::new(),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

/// Intermediates kept when `RunOptions::keep_stages` is set.
#[derive(Default)]
pub struct StageCache {
    pub hoa: Option<HoaFrames>,
    pub vad: Vec<bool>,
    pub sps: Option<SpatialSpectrum>,
    /// First usable correlation function per reflection index.
    pub correlations: Vec<(usize, CorrelationFunction)>,
}

/// Pooled statistics over one group of rows.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroupAggregate {
    pub n_scenes: usize,
    pub n_ok: usize,
    pub tdoa: TdoaStats,
    pub distance: BTreeMap<String, DistanceStats>,
    pub boundary: BoundaryAggregate,
}

/// Whole-run statistics: overall and per 100 ms T60 bucket.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Aggregates {
    pub overall: GroupAggregate,
    pub by_t60: BTreeMap<String, GroupAggregate>,
}

/// The emitted report. `elapsed_s` is informational only and excluded from
/// serialization so identical (config, seed) runs emit identical bytes.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub options: RunOptions,
    pub rows: Vec<SceneRow>,
    pub aggregates: Aggregates,
    #[serde(skip)]
    pub elapsed_s: f64,
}

impl RunReport {
    /// Deterministic serialization: field order is fixed by the structs and
    /// every map is a BTreeMap, so equal reports are equal bytes.
    pub fn to_canonical_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<RunReport> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Builds the array from the config: bundled 32-capsule layout unless a
/// layout file is named.
pub fn array_from_config(cfg: &ExperimentConfig) -> Result<ArraySpec> {
    let dirs = match &cfg.layout_path {
        Some(path) => parse_layout(&std::fs::read_to_string(path)?)?,
        None => ArraySpec::em32().capsule_dirs,
    };
    ArraySpec::new(cfg.radius_m, dirs, cfg.sh_order, cfg.sample_rate_hz)
}

/// A configured pipeline: array and encoder are built once and shared across
/// scenes.
pub struct Pipeline {
    pub cfg: ExperimentConfig,
    pub array: ArraySpec,
    pub model: Option<MlpModel>,
    pub opts: RunOptions,
    encoder: Encoder,
}

impl Pipeline {
    pub fn new(cfg: ExperimentConfig, model: Option<MlpModel>, opts: RunOptions) -> Result<Self> {
        cfg.validate()?;
        let array = array_from_config(&cfg)?;
        let encoder = Encoder::new(&array, StftConfig { fft_len: cfg.fft_len, hop: cfg.hop })?;
        Ok(Pipeline { cfg, array, model, opts, encoder })
    }

    pub fn encoder(&self) -> &Encoder {
        &self.encoder
    }

    /// Runs one simulated scene, `index` selecting its noise streams.
    pub fn run_scene(&self, index: usize, scene: &RoomScene) -> (SceneRow, StageCache) {
        self.run_inner(index, Some(scene), None)
    }

    /// Runs one captured signal; no ground truth, so truth-dependent metrics
    /// stay absent and `cfg.array_height_m` supplies h.
    pub fn run_signal(&self, index: usize, sig: &MultichannelSignal) -> (SceneRow, StageCache) {
        self.run_inner(index, None, Some(sig))
    }

    /// Runs every scene and assembles the deterministic report. Scenes run
    /// in parallel; rows keep input order.
    pub fn run_report(&self, scenes: &[RoomScene]) -> RunReport {
        let start = std::time::Instant::now();
        let rows: Vec<SceneRow> = scenes
            .par_iter()
            .enumerate()
            .map(|(i, s)| self.run_scene(i, s).0)
            .collect();
        let aggregates = compute_aggregates(&rows, self.cfg.tdoa_gate_ms);
        RunReport {
            config: self.cfg.clone(),
            options: self.opts,
            rows,
            aggregates,
            elapsed_s: start.elapsed().as_secs_f64(),
        }
    }

    fn run_inner(
        &self,
        index: usize,
        scene: Option<&RoomScene>,
        sig: Option<&MultichannelSignal>,
    ) -> (SceneRow, StageCache) {
        let cfg = &self.cfg;
        let c = scene.map_or(crate::SOUND_SPEED, |s| s.sound_speed);
        let mut cache = StageCache::default();
        let mut row = SceneRow::empty(index);

        macro_rules! stage {
            ($name:expr, $e:expr) => {
                match $e {
                    Ok(v) => v,
                    Err(err) => {
                        row.status = format!("{}: {err}", $name);
                        return (row, cache);
                    }
                }
            };
        }

        if let Some(scene) = scene {
            row.truth = Some(stage!("oracle", SceneTruth::of(scene)));
        }
        if (self.opts.oracle_doa || self.opts.oracle_tdoa) && row.truth.is_none() {
            row.status = "oracle: input has no ground truth".into();
            return (row, cache);
        }
        let truth = row.truth.clone();

        // Audio front end: skipped entirely when both oracles replace it.
        let rendered;
        let audio: Option<&MultichannelSignal> = if let Some(sig) = sig {
            if (sig.sample_rate - self.array.sample_rate).abs() > 1e-9 {
                row.status = format!(
                    "input: sample rate {} does not match array rate {}",
                    sig.sample_rate, self.array.sample_rate
                );
                return (row, cache);
            }
            Some(sig)
        } else if !(self.opts.oracle_doa && self.opts.oracle_tdoa) {
            let scene = scene.expect("scene or signal is provided");
            let n = (cfg.duration_s * self.array.sample_rate).round() as usize;
            let src_seed = mix_seed(cfg.seed, index as u64 * 4);
            let src = match cfg.source {
                SourceKind::White => white_noise(n, src_seed),
                SourceKind::Speech => speech_shaped_noise(n, self.array.sample_rate, src_seed),
            };
            let sensor_seed = mix_seed(cfg.seed, index as u64 * 4 + 1);
            rendered = stage!(
                "render",
                render_array(
                    scene,
                    &src,
                    &self.array,
                    cfg.render_max_order as u32,
                    cfg.snr_db,
                    sensor_seed,
                )
            );
            Some(&rendered)
        } else {
            None
        };

        let mut hoa_opt: Option<HoaFrames> = None;
        let mut active: Vec<bool> = Vec::new();
        if let Some(mic) = audio {
            let hoa = stage!("encode", self.encoder.encode(mic, cfg.frame_len));
            active = energy_vad(&hoa.eb_time[0], cfg.frame_len, cfg.vad_ratio);
            if self.opts.keep_stages {
                cache.vad = active.clone();
            }
            hoa_opt = Some(hoa);
        }

        let doa: DoaSet = if self.opts.oracle_doa {
            let t = truth.as_ref().expect("oracle mode checked truth");
            DoaSet {
                direct: t.direct.direction,
                reflections: t
                    .reflections
                    .iter()
                    .map(|p| DoaPeak { direction: p.direction, level_db: 0.0 })
                    .collect(),
            }
        } else {
            let hoa = hoa_opt.as_ref().expect("estimation path has audio");
            let cov = stage!("covariance", covariance(hoa, cfg.band(), &active));
            let sps = stage!("sps", sps_mvdr(&cov, cfg.grid_step_deg, cfg.loading_scale));
            let peaks = pick_peaks(&sps, cfg.beta_db, cfg.merge_deg);
            if self.opts.keep_stages {
                cache.sps = Some(sps);
            }
            peaks
        };
        row.doa = Some(doa.clone());

        // Per-reflection TDOA against the direct beam.
        let mut taus: Vec<TdoaEstimate> = Vec::new();
        if self.opts.oracle_tdoa {
            let t = truth.as_ref().expect("oracle mode checked truth");
            for (i, r) in doa.reflections.iter().enumerate() {
                let est = match nearest_oracle(&t.reflections, r.direction) {
                    Some(p) => TdoaEstimate {
                        tau: p.tdoa,
                        lag: (p.tdoa * self.array.sample_rate).round() as i64,
                        peak: 1.0,
                        valid: true,
                    },
                    None => TdoaEstimate { tau: 0.0, lag: 0, peak: 0.0, valid: false },
                };
                row.tdoas.push(ReflectionTdoa {
                    reflection: i,
                    tau_ms: est.valid.then_some(est.tau * 1e3),
                    n_valid: usize::from(est.valid),
                    n_frames: 1,
                });
                taus.push(est);
            }
        } else {
            let hoa = hoa_opt.as_ref().expect("estimation path has audio");
            let fs = hoa.sample_rate;
            let max_lag = (cfg.max_delay_ms * 1e-3 * fs).floor() as usize;
            let beam0 = extract_beam(hoa, doa.direct);
            let frames: Vec<usize> =
                (0..active.len()).filter(|&i| active[i]).collect();
            for (i, r) in doa.reflections.iter().enumerate() {
                let beam_r = extract_beam(hoa, r.direction);
                let mut ests = Vec::new();
                for &f in &frames {
                    let lo = f * cfg.frame_len;
                    let hi = ((f + 1) * cfg.frame_len).min(beam0.samples.len());
                    if hi <= lo {
                        continue;
                    }
                    let corr = match gcc_phat(
                        &beam0.samples[lo..hi],
                        &beam_r.samples[lo..hi],
                        fs,
                        cfg.band(),
                        max_lag,
                    ) {
                        Ok(c) => c,
                        // A degenerate frame (e.g. all zeros) is skipped, not fatal.
                        Err(_) => continue,
                    };
                    ests.push(estimate_tdoa(
                        &corr,
                        fs,
                        cfg.sigma_thresh,
                        cfg.exclusion_samples,
                        cfg.max_delay_ms * 1e-3,
                    ));
                    if self.opts.keep_stages
                        && !cache.correlations.iter().any(|(j, _)| *j == i)
                    {
                        cache.correlations.push((i, corr));
                    }
                }
                let tau = aggregate_tdoa(&ests);
                row.tdoas.push(ReflectionTdoa {
                    reflection: i,
                    tau_ms: tau.map(|t| t * 1e3),
                    n_valid: ests.iter().filter(|e| e.valid).count(),
                    n_frames: ests.len(),
                });
                taus.push(match tau {
                    Some(t) => TdoaEstimate {
                        tau: t,
                        lag: (t * fs).round() as i64,
                        peak: 1.0,
                        valid: true,
                    },
                    None => TdoaEstimate { tau: 0.0, lag: 0, peak: 0.0, valid: false },
                });
            }
        }

        // TDOA accuracy entries: one per detected reflection, error known
        // only when an oracle path lies within the match cone.
        for (i, r) in doa.reflections.iter().enumerate() {
            let est = &taus[i];
            let error_ms = match (&truth, est.valid) {
                (Some(t), true) => nearest_oracle(&t.reflections, r.direction)
                    .map(|p| (est.tau - p.tdoa).abs() * 1e3),
                _ => None,
            };
            row.tdoa_entries.push(TdoaErrorEntry { valid: est.valid, error_ms });
        }

        if self.opts.keep_stages {
            cache.hoa = hoa_opt;
        }

        let h = scene.map_or(cfg.array_height_m, |s| s.array_pos.z);
        let floor = stage!(
            "floor-select",
            select_floor_reflection(&doa, &taus, h, cfg.floor_max_elevation_deg, c)
        );
        row.floor_index = Some(floor);
        let features = LocalizationFeatures {
            h,
            alpha1_deg: doa.direct.elevation_deg,
            alpha2_deg: -doa.reflections[floor].direction.elevation_deg,
            dt: taus[floor].tau,
            direct: doa.direct,
        };
        row.features = Some(features);

        for method in [DistanceMethod::Height, DistanceMethod::Tdoa, DistanceMethod::Dnn] {
            if method == DistanceMethod::Dnn && self.model.is_none() {
                continue;
            }
            match estimate_source(&features, method, self.model.as_ref(), c) {
                Ok(est) => {
                    if let Some(t) = &truth {
                        row.distance_errors_m
                            .insert(method.to_string(), (est.distance - t.direct.distance).abs());
                    }
                    row.sources.insert(method.to_string(), est);
                }
                Err(e) => {
                    row.source_errors.insert(method.to_string(), e.to_string());
                }
            }
        }

        let selected = cfg.distance_method.to_string();
        let source = stage!(
            "localize",
            row.sources.get(&selected).copied().ok_or_else(|| {
                match row.source_errors.get(&selected) {
                    Some(msg) => Error::InvalidArgument(format!("method {selected}: {msg}")),
                    None => Error::InvalidArgument(format!("method {selected} unavailable")),
                }
            })
        );

        let reflections: Vec<(Direction, f64)> = doa
            .reflections
            .iter()
            .zip(&taus)
            .filter(|(_, t)| t.valid)
            .map(|(r, t)| (r.direction, t.tau))
            .collect();
        let inferred = stage!("infer", infer_room(&source, &reflections, c));
        if let Some(scene) = scene {
            let gates = MatchGates { theta_deg: cfg.gate_theta_deg, dist_m: cfg.gate_dist_m };
            row.boundary =
                Some(match_boundaries(&inferred.boundaries, &scene.boundaries_array_frame(), gates));
        }
        row.inferred = Some(inferred);
        (row, cache)
    }
}

/// Oracle path nearest in angle within [`ORACLE_MATCH_DEG`].
fn nearest_oracle(paths: &[PathOracle], dir: Direction) -> Option<&PathOracle> {
    let mut best: Option<(f64, &PathOracle)> = None;
    for p in paths {
        let a = dir.angle_to(p.direction);
        if a <= ORACLE_MATCH_DEG && best.as_ref().is_none_or(|(b, _)| a < *b) {
            best = Some((a, p));
        }
    }
    best.map(|(_, p)| p)
}

fn aggregate_group(rows: &[&SceneRow], gate_ms: Option<f64>) -> GroupAggregate {
    let entries: Vec<TdoaErrorEntry> =
        rows.iter().flat_map(|r| r.tdoa_entries.iter().copied()).collect();
    let mut pools: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
    for r in rows {
        for (k, v) in &r.distance_errors_m {
            pools.entry(k.as_str()).or_default().push(*v);
        }
    }
    let distance =
        pools.into_iter().map(|(k, v)| (k.to_string(), distance_stats(&v))).collect();
    GroupAggregate {
        n_scenes: rows.len(),
        n_ok: rows.iter().filter(|r| r.is_ok()).count(),
        tdoa: tdoa_stats(&entries, gate_ms),
        distance,
        boundary: boundary_aggregate(rows.iter().filter_map(|r| r.boundary.as_ref())),
    }
}

/// Recomputes the aggregate block from rows; the report invariant is that
/// this reproduces `RunReport::aggregates` exactly.
pub fn compute_aggregates(rows: &[SceneRow], gate_ms: Option<f64>) -> Aggregates {
    let all: Vec<&SceneRow> = rows.iter().collect();
    let mut groups: BTreeMap<String, Vec<&SceneRow>> = BTreeMap::new();
    for r in rows {
        if let Some(t) = &r.truth {
            groups.entry(t60_bucket(t.t60)).or_default().push(r);
        }
    }
    Aggregates {
        overall: aggregate_group(&all, gate_ms),
        by_t60: groups.into_iter().map(|(k, v)| (k, aggregate_group(&v, gate_ms))).collect(),
    }
}
