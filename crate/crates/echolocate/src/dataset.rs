//! Random scene generation and synthetic feature sampling for training and
//! evaluation, deterministic per seed.

use crate::config::ExperimentConfig;
use crate::geometry::{RoomScene, Vec3};
use crate::{Error, Result};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
    Test,
}

/// 80/10/10 split by position in the generated sequence.
pub fn split_of(index: usize, total: usize) -> Split {
    let train_end = total * 8 / 10;
    let val_end = total * 9 / 10;
    if index < train_end {
        Split::Train
    } else if index < val_end {
        Split::Val
    } else {
        Split::Test
    }
}

#[derive(Clone, Debug)]
pub struct SceneSample {
    pub scene: RoomScene,
    pub split: Split,
}

/// Samples rooms, reverberation times, and positions uniformly within the
/// configured ranges, honoring the boundary clearance for both source and
/// array plus a small source/array separation so the direct path is defined.
pub fn generate_dataset(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Vec<SceneSample>> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let clear = cfg.clearance_m;
    let mut out = Vec::with_capacity(n);
    for index in 0..n {
        let mut found = None;
        for _ in 0..1000 {
            let dims = Vec3::new(
                rng.gen_range(cfg.room_min.x..=cfg.room_max.x),
                rng.gen_range(cfg.room_min.y..=cfg.room_max.y),
                rng.gen_range(cfg.room_min.z..=cfg.room_max.z),
            );
            if dims.x < 2.0 * clear || dims.y < 2.0 * clear || dims.z < 2.0 * clear {
                continue;
            }
            let t60 = rng.gen_range(cfg.t60_min..=cfg.t60_max);
            let sample_pos = |rng: &mut ChaCha20Rng| {
                Vec3::new(
                    rng.gen_range(clear..=dims.x - clear),
                    rng.gen_range(clear..=dims.y - clear),
                    rng.gen_range(clear..=dims.z - clear),
                )
            };
            let source = sample_pos(&mut rng);
            let array = sample_pos(&mut rng);
            if (source - array).norm() < 0.3 {
                continue;
            }
            match RoomScene::new(dims, source, array, t60) {
                Ok(scene) => {
                    found = Some(scene);
                    break;
                }
                Err(_) => continue,
            }
        }
        let scene = found.ok_or_else(|| {
            Error::Infeasible(format!("no feasible scene after 1000 tries (index {index})"))
        })?;
        out.push(SceneSample { scene, split: split_of(index, n) });
    }
    Ok(out)
}

/// One training/evaluation row for the distance regressor.
#[derive(Clone, Copy, Debug)]
pub struct FeatureRow {
    /// [h, alpha1_deg, alpha2_deg, dt_s], see LocalizationFeatures.
    pub features: [f64; 4],
    /// True direct distance, meters.
    pub target: f64,
    pub split: Split,
}

/// Samples direct/floor-path feature rows from random geometry: array height
/// in `h_range`, direct distance in `d_range`, source height anywhere above
/// the floor that keeps the bounce geometry non-degenerate.
pub fn sample_floor_features(
    n: usize,
    seed: u64,
    d_range: (f64, f64),
    h_range: (f64, f64),
) -> Vec<FeatureRow> {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(n);
    for index in 0..n {
        loop {
            let h = rng.gen_range(h_range.0..=h_range.1);
            let d = rng.gen_range(d_range.0..=d_range.1);
            let zs = rng.gen_range(0.05..=(h + 0.8 * d));
            let dz = h - zs;
            if dz.abs() >= 0.95 * d {
                continue;
            }
            let r = (d * d - dz * dz).sqrt();
            // Keep the floor angle away from 90 degrees.
            if r < 0.15 * d {
                continue;
            }
            let alpha1 = (-dz).atan2(r).to_degrees();
            let alpha2 = (h + zs).atan2(r).to_degrees();
            let d_img = (r * r + (h + zs) * (h + zs)).sqrt();
            let dt = (d_img - d) / crate::SOUND_SPEED;
            out.push(FeatureRow {
                features: [h, alpha1, alpha2, dt],
                target: d,
                split: split_of(index, n),
            });
            break;
        }
    }
    out
}

/// Exact floor-path feature rows for scenes drawn by the dataset protocol,
/// so the regressor trains on the same feature distribution it will see at
/// inference time instead of a uniform synthetic envelope.
pub fn config_feature_rows(cfg: &ExperimentConfig, n: usize, seed: u64) -> Result<Vec<FeatureRow>> {
    let samples = generate_dataset(cfg, n, seed)?;
    let mut out = Vec::with_capacity(n);
    for s in samples {
        let fp = crate::geometry::floor_path_oracle(&s.scene)?;
        out.push(FeatureRow {
            features: [fp.h, fp.alpha1_deg, fp.alpha2_deg, fp.dt],
            target: (s.scene.source_pos - s.scene.array_pos).norm(),
            split: s.split,
        });
    }
    Ok(out)
}
