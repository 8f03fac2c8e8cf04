//! Configuration: a flat `key = value` text format with `[section]` headers,
//! and the typed experiment configuration all stages read from.
//!
//! Keys are namespaced as `section.key`. Values are scalars, or three
//! whitespace-separated numbers for vectors. `#` and `;` start comments.
//! Unknown keys are rejected so typos fail loudly.

use crate::geometry::Vec3;
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::str::FromStr;

/// Raw parsed config: `section.key` -> value string.
#[derive(Clone, Debug, Default)]
pub struct ParsedConfig {
    values: BTreeMap<String, String>,
}

impl ParsedConfig {
    pub fn get(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str)
    }

    pub fn keys(&self) -> impl Iterator<Item = &str> {
        self.values.keys().map(String::as_str)
    }

    fn take_parsed<T: FromStr>(&self, key: &str, seen: &mut Vec<String>) -> Result<Option<T>> {
        seen.push(key.to_string());
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => raw
                .parse::<T>()
                .map(Some)
                .map_err(|_| Error::ConfigFormat(format!("invalid value for {key}: {raw:?}"))),
        }
    }

    fn take_vec3(&self, key: &str, seen: &mut Vec<String>) -> Result<Option<Vec3>> {
        seen.push(key.to_string());
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => {
                let parts: Vec<&str> = raw.split_whitespace().collect();
                if parts.len() != 3 {
                    return Err(Error::ConfigFormat(format!(
                        "{key} needs three numbers, got {raw:?}"
                    )));
                }
                let mut v = [0.0; 3];
                for (slot, p) in v.iter_mut().zip(&parts) {
                    *slot = p.parse::<f64>().map_err(|_| {
                        Error::ConfigFormat(format!("invalid number in {key}: {p:?}"))
                    })?;
                }
                Ok(Some(Vec3::new(v[0], v[1], v[2])))
            }
        }
    }
}

/// Parses config text. Duplicate keys in one file are rejected.
pub fn parse_config(text: &str) -> Result<ParsedConfig> {
    let mut values = BTreeMap::new();
    let mut section = String::new();
    for (lineno, raw) in text.lines().enumerate() {
        let err = |msg: String| Error::ConfigFormat(format!("line {}: {msg}", lineno + 1));
        let line = match raw.find(['#', ';']) {
            Some(at) => &raw[..at],
            None => raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(inner) = line.strip_prefix('[') {
            let name = inner
                .strip_suffix(']')
                .ok_or_else(|| err("unterminated section header".into()))?
                .trim();
            if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(err(format!("bad section name {name:?}")));
            }
            section = name.to_string();
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| err("expected key = value".into()))?;
        let key = key.trim();
        if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
            return Err(err(format!("bad key {key:?}")));
        }
        let full = if section.is_empty() { key.to_string() } else { format!("{section}.{key}") };
        if values.insert(full.clone(), value.trim().to_string()).is_some() {
            return Err(err(format!("duplicate key {full}")));
        }
    }
    Ok(ParsedConfig { values })
}

/// Which closed-form or learned estimator produces the source distance.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DistanceMethod {
    Height,
    Tdoa,
    Dnn,
}

impl FromStr for DistanceMethod {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "height" => Ok(DistanceMethod::Height),
            "tdoa" => Ok(DistanceMethod::Tdoa),
            "dnn" => Ok(DistanceMethod::Dnn),
            _ => Err(format!("unknown distance method {s:?} (expected height, tdoa or dnn)")),
        }
    }
}

impl std::fmt::Display for DistanceMethod {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            DistanceMethod::Height => "height",
            DistanceMethod::Tdoa => "tdoa",
            DistanceMethod::Dnn => "dnn",
        })
    }
}

/// Built-in source signal generators.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    White,
    Speech,
}

impl FromStr for SourceKind {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "white" => Ok(SourceKind::White),
            "speech" => Ok(SourceKind::Speech),
            _ => Err(format!("unknown source kind {s:?} (expected white or speech)")),
        }
    }
}

/// Fusion-regressor training knobs.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DdnnConfig {
    pub rows: usize,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    /// Input perturbation applied afresh each epoch.
    pub noise_angle_deg: f64,
    pub noise_dt_ms: f64,
    pub noise_h_m: f64,
    pub hidden: Vec<usize>,
}

impl Default for DdnnConfig {
    fn default() -> Self {
        DdnnConfig {
            rows: 8000,
            epochs: 600,
            batch: 64,
            learning_rate: 1e-3,
            noise_angle_deg: 2.0,
            noise_dt_ms: 0.5,
            noise_h_m: 0.01,
            hidden: vec![64, 64, 32],
        }
    }
}

/// Everything a full run needs; every field has a sane default and a config
/// key. See the README for the key list.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentConfig {
    // Scene sampling.
    pub room_min: Vec3,
    pub room_max: Vec3,
    pub t60_min: f64,
    pub t60_max: f64,
    pub clearance_m: f64,
    pub duration_s: f64,
    pub snr_db: Option<f64>,
    pub source: SourceKind,
    // Array.
    pub radius_m: f64,
    pub sh_order: usize,
    pub sample_rate_hz: f64,
    pub layout_path: Option<String>,
    /// Array height used when localizing bare WAV input without a scene.
    pub array_height_m: f64,
    // Analysis band and STFT.
    pub band_low_hz: f64,
    pub band_high_hz: f64,
    pub fft_len: usize,
    pub hop: usize,
    // Framing / VAD.
    pub frame_len: usize,
    pub vad_ratio: f64,
    // DOA.
    pub grid_step_deg: f64,
    pub beta_db: f64,
    pub merge_deg: f64,
    pub loading_scale: f64,
    // TDOA.
    pub sigma_thresh: f64,
    pub exclusion_samples: usize,
    pub max_delay_ms: f64,
    // Source localization.
    pub distance_method: DistanceMethod,
    pub floor_max_elevation_deg: f64,
    // Room inference gates.
    pub gate_theta_deg: f64,
    pub gate_dist_m: f64,
    pub tdoa_gate_ms: Option<f64>,
    // Simulation.
    pub render_max_order: usize,
    pub seed: u64,
    pub ddnn: DdnnConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            room_min: Vec3::new(3.0, 3.0, 2.0),
            room_max: Vec3::new(10.0, 10.0, 4.0),
            t60_min: 0.3,
            t60_max: 1.0,
            clearance_m: 0.5,
            duration_s: 10.0,
            snr_db: Some(30.0),
            source: SourceKind::White,
            radius_m: 0.042,
            sh_order: 4,
            sample_rate_hz: 16000.0,
            layout_path: None,
            array_height_m: 1.5,
            band_low_hz: 500.0,
            band_high_hz: 4000.0,
            fft_len: 1024,
            hop: 512,
            frame_len: 5000,
            vad_ratio: 0.1,
            grid_step_deg: 3.0,
            beta_db: -3.0,
            merge_deg: 6.0,
            loading_scale: 1e-3,
            sigma_thresh: 0.3,
            exclusion_samples: 10,
            max_delay_ms: 50.0,
            distance_method: DistanceMethod::Dnn,
            floor_max_elevation_deg: -5.0,
            gate_theta_deg: 15.0,
            gate_dist_m: 0.5,
            tdoa_gate_ms: Some(1.0),
            // Deep image expansions merge first-order lobes into the pole
            // cluster of stacked floor/ceiling images in long-T60 rooms;
            // order 6 keeps every first-order reflection a distinct SPS peak
            // while still rendering a dense early tail.
            render_max_order: 6,
            seed: 0,
            ddnn: DdnnConfig::default(),
        }
    }
}

impl ExperimentConfig {
    /// Applies a parsed config file over the defaults, rejecting unknown keys.
    pub fn apply(&mut self, parsed: &ParsedConfig) -> Result<()> {
        let mut seen: Vec<String> = Vec::new();
        let s = &mut seen;

        if let Some(v) = parsed.take_vec3("scene.room_min", s)? {
            self.room_min = v;
        }
        if let Some(v) = parsed.take_vec3("scene.room_max", s)? {
            self.room_max = v;
        }
        if let Some(v) = parsed.take_parsed("scene.t60_min", s)? {
            self.t60_min = v;
        }
        if let Some(v) = parsed.take_parsed("scene.t60_max", s)? {
            self.t60_max = v;
        }
        if let Some(v) = parsed.take_parsed("scene.clearance_m", s)? {
            self.clearance_m = v;
        }
        if let Some(v) = parsed.take_parsed("scene.duration_s", s)? {
            self.duration_s = v;
        }
        s.push("scene.snr_db".into());
        if let Some(raw) = parsed.get("scene.snr_db") {
            self.snr_db = if raw == "off" {
                None
            } else {
                Some(raw.parse::<f64>().map_err(|_| {
                    Error::ConfigFormat(format!("invalid value for scene.snr_db: {raw:?}"))
                })?)
            };
        }
        if let Some(v) = parsed.take_parsed::<SourceKind>("scene.source", s)? {
            self.source = v;
        }

        if let Some(v) = parsed.take_parsed("array.radius_m", s)? {
            self.radius_m = v;
        }
        if let Some(v) = parsed.take_parsed("array.sh_order", s)? {
            self.sh_order = v;
        }
        if let Some(v) = parsed.take_parsed("array.sample_rate_hz", s)? {
            self.sample_rate_hz = v;
        }
        if let Some(v) = parsed.take_parsed("array.layout_path", s)? {
            self.layout_path = Some(v);
        }
        if let Some(v) = parsed.take_parsed("array.height_m", s)? {
            self.array_height_m = v;
        }

        if let Some(v) = parsed.take_parsed("band.low_hz", s)? {
            self.band_low_hz = v;
        }
        if let Some(v) = parsed.take_parsed("band.high_hz", s)? {
            self.band_high_hz = v;
        }
        if let Some(v) = parsed.take_parsed("stft.fft_len", s)? {
            self.fft_len = v;
        }
        if let Some(v) = parsed.take_parsed("stft.hop", s)? {
            self.hop = v;
        }
        if let Some(v) = parsed.take_parsed("vad.frame_len", s)? {
            self.frame_len = v;
        }
        if let Some(v) = parsed.take_parsed("vad.ratio", s)? {
            self.vad_ratio = v;
        }

        if let Some(v) = parsed.take_parsed("doa.grid_step_deg", s)? {
            self.grid_step_deg = v;
        }
        if let Some(v) = parsed.take_parsed("doa.beta_db", s)? {
            self.beta_db = v;
        }
        if let Some(v) = parsed.take_parsed("doa.merge_deg", s)? {
            self.merge_deg = v;
        }
        if let Some(v) = parsed.take_parsed("doa.loading_scale", s)? {
            self.loading_scale = v;
        }

        if let Some(v) = parsed.take_parsed("tdoa.sigma_thresh", s)? {
            self.sigma_thresh = v;
        }
        if let Some(v) = parsed.take_parsed("tdoa.exclusion_samples", s)? {
            self.exclusion_samples = v;
        }
        if let Some(v) = parsed.take_parsed("tdoa.max_delay_ms", s)? {
            self.max_delay_ms = v;
        }

        if let Some(v) = parsed.take_parsed::<DistanceMethod>("localize.distance_method", s)? {
            self.distance_method = v;
        }
        if let Some(v) = parsed.take_parsed("localize.floor_max_elevation_deg", s)? {
            self.floor_max_elevation_deg = v;
        }

        if let Some(v) = parsed.take_parsed("infer.gate_theta_deg", s)? {
            self.gate_theta_deg = v;
        }
        if let Some(v) = parsed.take_parsed("infer.gate_dist_m", s)? {
            self.gate_dist_m = v;
        }
        s.push("infer.tdoa_gate_ms".into());
        if let Some(raw) = parsed.get("infer.tdoa_gate_ms") {
            self.tdoa_gate_ms = if raw == "off" {
                None
            } else {
                Some(raw.parse::<f64>().map_err(|_| {
                    Error::ConfigFormat(format!("invalid value for infer.tdoa_gate_ms: {raw:?}"))
                })?)
            };
        }

        if let Some(v) = parsed.take_parsed("render.max_order", s)? {
            self.render_max_order = v;
        }
        if let Some(v) = parsed.take_parsed("run.seed", s)? {
            self.seed = v;
        }

        if let Some(v) = parsed.take_parsed("ddnn.rows", s)? {
            self.ddnn.rows = v;
        }
        if let Some(v) = parsed.take_parsed("ddnn.epochs", s)? {
            self.ddnn.epochs = v;
        }
        if let Some(v) = parsed.take_parsed("ddnn.batch", s)? {
            self.ddnn.batch = v;
        }
        if let Some(v) = parsed.take_parsed("ddnn.learning_rate", s)? {
            self.ddnn.learning_rate = v;
        }
        if let Some(v) = parsed.take_parsed("ddnn.noise_angle_deg", s)? {
            self.ddnn.noise_angle_deg = v;
        }
        if let Some(v) = parsed.take_parsed("ddnn.noise_dt_ms", s)? {
            self.ddnn.noise_dt_ms = v;
        }
        if let Some(v) = parsed.take_parsed("ddnn.noise_h_m", s)? {
            self.ddnn.noise_h_m = v;
        }

        for key in parsed.keys() {
            if !seen.iter().any(|k| k == key) {
                return Err(Error::ConfigFormat(format!("unknown key {key}")));
            }
        }
        self.validate()
    }

    pub fn from_file(path: &str) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let parsed = parse_config(&text)?;
        let mut cfg = ExperimentConfig::default();
        cfg.apply(&parsed)?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("t60_min", self.t60_min),
            ("t60_max", self.t60_max),
            ("clearance_m", self.clearance_m),
            ("duration_s", self.duration_s),
            ("radius_m", self.radius_m),
            ("sample_rate_hz", self.sample_rate_hz),
            ("band_low_hz", self.band_low_hz),
            ("band_high_hz", self.band_high_hz),
            ("vad_ratio", self.vad_ratio),
            ("grid_step_deg", self.grid_step_deg),
            ("merge_deg", self.merge_deg),
            ("loading_scale", self.loading_scale),
            ("sigma_thresh", self.sigma_thresh),
            ("max_delay_ms", self.max_delay_ms),
            ("gate_theta_deg", self.gate_theta_deg),
            ("gate_dist_m", self.gate_dist_m),
            ("array_height_m", self.array_height_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::ConfigFormat(format!("{name} must be positive, got {v}")));
            }
        }
        if self.room_min.x < 1.0
            || self.room_min.y < 1.0
            || self.room_min.z < 1.0
            || self.room_max.x < self.room_min.x
            || self.room_max.y < self.room_min.y
            || self.room_max.z < self.room_min.z
        {
            return Err(Error::ConfigFormat("bad room dimension range".into()));
        }
        if self.t60_max < self.t60_min {
            return Err(Error::ConfigFormat("t60_max < t60_min".into()));
        }
        if self.band_high_hz <= self.band_low_hz {
            return Err(Error::ConfigFormat("band.high_hz must exceed band.low_hz".into()));
        }
        if self.band_high_hz > self.sample_rate_hz / 2.0 {
            return Err(Error::ConfigFormat("band.high_hz above Nyquist".into()));
        }
        if self.fft_len < 16 || self.fft_len % 2 != 0 || self.hop == 0 || self.hop > self.fft_len {
            return Err(Error::ConfigFormat("bad stft geometry".into()));
        }
        if self.frame_len < self.fft_len {
            return Err(Error::ConfigFormat("frame_len must cover at least one fft frame".into()));
        }
        if self.beta_db >= 0.0 {
            return Err(Error::ConfigFormat("beta_db must be negative".into()));
        }
        Ok(())
    }

    /// Analysis band as a (low, high) Hz pair.
    pub fn band(&self) -> (f64, f64) {
        (self.band_low_hz, self.band_high_hz)
    }
}
