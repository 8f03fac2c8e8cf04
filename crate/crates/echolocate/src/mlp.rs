//! Small fully-connected regressor trained with Adam on z-scored features,
//! used to fuse (h, alpha1, alpha2, dt) into a distance estimate.
//!
//! Training is deterministic for a fixed seed: one RNG drives init, epoch
//! shuffles, and the per-epoch input perturbation, all consumed in a fixed
//! order.

use crate::{Error, Result};
use rand::seq::SliceRandom;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, StandardNormal};
use std::io::{Read, Write};
use std::path::Path;

pub const FEATURE_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    LeakyRelu,
    Linear,
}

impl Activation {
    fn tag(self) -> u8 {
        match self {
            Activation::LeakyRelu => 0,
            Activation::Linear => 1,
        }
    }

    fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Activation::LeakyRelu),
            1 => Some(Activation::Linear),
            _ => None,
        }
    }

    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z >= 0.0 {
                    z
                } else {
                    0.01 * z
                }
            }
            Activation::Linear => z,
        }
    }

    fn derivative(self, z: f64) -> f64 {
        match self {
            Activation::LeakyRelu => {
                if z >= 0.0 {
                    1.0
                } else {
                    0.01
                }
            }
            Activation::Linear => 1.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct Layer {
    pub n_in: usize,
    pub n_out: usize,
    /// Row-major n_out x n_in.
    pub w: Vec<f64>,
    pub b: Vec<f64>,
    pub act: Activation,
}

#[derive(Clone, Debug)]
pub struct MlpModel {
    pub layers: Vec<Layer>,
    pub in_mean: Vec<f64>,
    pub in_std: Vec<f64>,
    pub out_mean: f64,
    pub out_std: f64,
}

const MODEL_MAGIC: &[u8; 4] = b"EDNN";
const MODEL_VERSION: u32 = 1;
const MAX_LAYER_DIM: usize = 4096;
const MAX_LAYERS: usize = 32;

impl MlpModel {
    pub fn input_dim(&self) -> usize {
        self.layers[0].n_in
    }

    /// Forward pass on an already standardized input; scalar standardized
    /// output.
    pub fn forward_standardized(&self, x: &[f64]) -> f64 {
        let mut cur = x.to_vec();
        for layer in &self.layers {
            let mut next = Vec::with_capacity(layer.n_out);
            for o in 0..layer.n_out {
                let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                let z: f64 =
                    row.iter().zip(&cur).map(|(w, v)| w * v).sum::<f64>() + layer.b[o];
                next.push(layer.act.apply(z));
            }
            cur = next;
        }
        cur[0]
    }

    /// Standardizes raw features, runs the net, destandardizes the output.
    pub fn predict(&self, raw: &[f64]) -> f64 {
        assert_eq!(raw.len(), self.input_dim());
        let x: Vec<f64> = raw
            .iter()
            .zip(self.in_mean.iter().zip(&self.in_std))
            .map(|(v, (m, s))| (v - m) / s)
            .collect();
        self.forward_standardized(&x) * self.out_std + self.out_mean
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MODEL_MAGIC);
        out.extend_from_slice(&MODEL_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        out.extend_from_slice(&(self.input_dim() as u32).to_le_bytes());
        for layer in &self.layers {
            out.extend_from_slice(&(layer.n_in as u32).to_le_bytes());
            out.extend_from_slice(&(layer.n_out as u32).to_le_bytes());
            out.push(layer.act.tag());
        }
        for layer in &self.layers {
            for v in layer.w.iter().chain(&layer.b) {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        for v in self.in_mean.iter().chain(&self.in_std) {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&self.out_mean.to_le_bytes());
        out.extend_from_slice(&self.out_std.to_le_bytes());
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let bad = |m: &str| Error::ModelFormat(m.to_string());
        if data.len() < 16 || &data[0..4] != MODEL_MAGIC {
            return Err(bad("bad magic or truncated header"));
        }
        let u32_at = |at: usize| u32::from_le_bytes(data[at..at + 4].try_into().unwrap());
        if u32_at(4) != MODEL_VERSION {
            return Err(bad("unsupported version"));
        }
        let n_layers = u32_at(8) as usize;
        let input_dim = u32_at(12) as usize;
        if n_layers == 0 || n_layers > MAX_LAYERS {
            return Err(bad("layer count out of range"));
        }
        let mut at = 16;
        let mut shapes = Vec::with_capacity(n_layers);
        for _ in 0..n_layers {
            if at + 9 > data.len() {
                return Err(bad("truncated layer table"));
            }
            let n_in = u32_at(at) as usize;
            let n_out = u32_at(at + 4) as usize;
            let act = Activation::from_tag(data[at + 8]).ok_or_else(|| bad("bad activation"))?;
            if n_in == 0 || n_out == 0 || n_in > MAX_LAYER_DIM || n_out > MAX_LAYER_DIM {
                return Err(bad("layer size out of range"));
            }
            shapes.push((n_in, n_out, act));
            at += 9;
        }
        if shapes[0].0 != input_dim || input_dim == 0 {
            return Err(bad("input dim mismatch"));
        }
        for w in shapes.windows(2) {
            if w[0].1 != w[1].0 {
                return Err(bad("layer chain mismatch"));
            }
        }
        if shapes.last().unwrap().1 != 1 {
            return Err(bad("output must be scalar"));
        }
        let n_params: usize = shapes.iter().map(|(i, o, _)| i * o + o).sum();
        let n_std = 2 * input_dim + 2;
        let expect = at + 8 * (n_params + n_std);
        if data.len() != expect {
            return Err(bad("payload length mismatch"));
        }
        let read_f64 = |at: &mut usize| {
            let v = f64::from_le_bytes(data[*at..*at + 8].try_into().unwrap());
            *at += 8;
            v
        };
        let mut layers = Vec::with_capacity(n_layers);
        for &(n_in, n_out, act) in &shapes {
            let mut w = Vec::with_capacity(n_in * n_out);
            for _ in 0..n_in * n_out {
                w.push(read_f64(&mut at));
            }
            let mut b = Vec::with_capacity(n_out);
            for _ in 0..n_out {
                b.push(read_f64(&mut at));
            }
            layers.push(Layer { n_in, n_out, w, b, act });
        }
        let in_mean: Vec<f64> = (0..input_dim).map(|_| read_f64(&mut at)).collect();
        let in_std: Vec<f64> = (0..input_dim).map(|_| read_f64(&mut at)).collect();
        let out_mean = read_f64(&mut at);
        let out_std = read_f64(&mut at);
        let model = MlpModel { layers, in_mean, in_std, out_mean, out_std };
        let finite = model
            .layers
            .iter()
            .flat_map(|l| l.w.iter().chain(&l.b))
            .chain(&model.in_mean)
            .chain(&model.in_std)
            .all(|v| v.is_finite())
            && out_mean.is_finite()
            && out_std.is_finite()
            && model.in_std.iter().all(|&s| s > 0.0)
            && out_std > 0.0;
        if !finite {
            return Err(bad("non-finite or degenerate parameters"));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut data = Vec::new();
        std::fs::File::open(path)?.read_to_end(&mut data)?;
        Self::from_bytes(&data)
    }
}

/// Standard deviations of the zero-mean Gaussian perturbation added to raw
/// features each epoch (regularizes against measurement noise).
#[derive(Clone, Copy, Debug)]
pub struct NoiseSpec {
    pub sigma_h_m: f64,
    pub sigma_angle_deg: f64,
    pub sigma_dt_s: f64,
}

impl NoiseSpec {
    fn sigma_for(&self, feature: usize) -> f64 {
        match feature {
            0 => self.sigma_h_m,
            1 | 2 => self.sigma_angle_deg,
            3 => self.sigma_dt_s,
            _ => 0.0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct TrainConfig {
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub noise: Option<NoiseSpec>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: vec![64, 64, 32],
            epochs: 120,
            batch: 64,
            learning_rate: 1e-3,
            seed: 0,
            noise: None,
        }
    }
}

#[derive(Clone, Debug, Default)]
pub struct TrainReport {
    pub train_loss: Vec<f64>,
    pub val_loss: Vec<f64>,
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
    lr: f64,
}

impl Adam {
    fn new(n: usize, lr: f64) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0, lr }
    }

    fn step(&mut self, params: &mut [f64], grads: &[f64]) {
        const B1: f64 = 0.9;
        const B2: f64 = 0.999;
        const EPS: f64 = 1e-8;
        self.t += 1;
        let c1 = 1.0 - B1.powi(self.t as i32);
        let c2 = 1.0 - B2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = B1 * self.m[i] + (1.0 - B1) * grads[i];
            self.v[i] = B2 * self.v[i] + (1.0 - B2) * grads[i] * grads[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + EPS);
        }
    }
}

/// Flattened view of all weights and biases, layer by layer.
fn flatten(layers: &[Layer]) -> Vec<f64> {
    let mut out = Vec::new();
    for l in layers {
        out.extend_from_slice(&l.w);
        out.extend_from_slice(&l.b);
    }
    out
}

fn unflatten(layers: &mut [Layer], flat: &[f64]) {
    let mut at = 0;
    for l in layers.iter_mut() {
        let (nw, nb) = (l.w.len(), l.b.len());
        l.w.copy_from_slice(&flat[at..at + nw]);
        at += nw;
        l.b.copy_from_slice(&flat[at..at + nb]);
        at += nb;
    }
}

/// MSE over standardized targets.
fn mse(model: &MlpModel, xs: &[Vec<f64>], ys: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (x, &y) in xs.iter().zip(ys) {
        let e = model.forward_standardized(x) - y;
        acc += e * e;
    }
    acc / xs.len().max(1) as f64
}

/// Trains the regressor. Features and targets arrive raw; standardization
/// constants are computed from the training split and stored in the model.
pub fn train(
    train_x: &[[f64; FEATURE_DIM]],
    train_y: &[f64],
    val_x: &[[f64; FEATURE_DIM]],
    val_y: &[f64],
    cfg: &TrainConfig,
) -> Result<(MlpModel, TrainReport)> {
    if train_x.len() < 1000 {
        return Err(Error::InvalidArgument(format!(
            "need at least 1000 training samples, got {}",
            train_x.len()
        )));
    }
    if train_x.len() != train_y.len() || val_x.len() != val_y.len() {
        return Err(Error::InvalidArgument("feature/target length mismatch".into()));
    }
    if cfg.batch == 0 || cfg.epochs == 0 || !(cfg.learning_rate > 0.0) {
        return Err(Error::InvalidArgument("bad hyperparameters".into()));
    }
    let n = train_x.len();
    let mut in_mean = vec![0.0; FEATURE_DIM];
    let mut in_std = vec![0.0; FEATURE_DIM];
    for f in 0..FEATURE_DIM {
        let mean = train_x.iter().map(|r| r[f]).sum::<f64>() / n as f64;
        let var = train_x.iter().map(|r| (r[f] - mean).powi(2)).sum::<f64>() / n as f64;
        in_mean[f] = mean;
        in_std[f] = var.sqrt().max(1e-9);
    }
    let out_mean = train_y.iter().sum::<f64>() / n as f64;
    let out_var = train_y.iter().map(|y| (y - out_mean).powi(2)).sum::<f64>() / n as f64;
    let out_std = out_var.sqrt().max(1e-9);

    let mut rng = ChaCha20Rng::seed_from_u64(cfg.seed);
    let mut sizes = vec![FEATURE_DIM];
    sizes.extend_from_slice(&cfg.hidden);
    sizes.push(1);
    let mut layers = Vec::new();
    for i in 0..sizes.len() - 1 {
        let (n_in, n_out) = (sizes[i], sizes[i + 1]);
        let bound = (6.0 / (n_in + n_out) as f64).sqrt();
        let w: Vec<f64> = (0..n_in * n_out).map(|_| rng.gen_range(-bound..bound)).collect();
        let act =
            if i + 2 == sizes.len() { Activation::Linear } else { Activation::LeakyRelu };
        layers.push(Layer { n_in, n_out, w, b: vec![0.0; n_out], act });
    }
    let mut model = MlpModel { layers, in_mean, in_std, out_mean, out_std };

    let std_x = |rows: &[[f64; FEATURE_DIM]]| -> Vec<Vec<f64>> {
        rows.iter()
            .map(|r| {
                (0..FEATURE_DIM)
                    .map(|f| (r[f] - model.in_mean[f]) / model.in_std[f])
                    .collect()
            })
            .collect()
    };
    let std_y = |ys: &[f64]| -> Vec<f64> {
        ys.iter().map(|y| (y - model.out_mean) / model.out_std).collect()
    };
    let val_xs = std_x(val_x);
    let val_ys = std_y(val_y);
    let ty = std_y(train_y);

    let n_params: usize = model.layers.iter().map(|l| l.w.len() + l.b.len()).sum();
    let mut adam = Adam::new(n_params, cfg.learning_rate);
    let mut report = TrainReport::default();
    let mut checkpoint = model.clone();
    // Exploded-but-finite runs count as divergence too; anchor the bound to
    // the untrained validation loss.
    let val_blowup = 1e6 * (mse(&model, &val_xs, &val_ys) + 1.0);
    let mut order: Vec<usize> = (0..n).collect();

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        // Perturb raw features, then standardize.
        let mut xs: Vec<Vec<f64>> = Vec::with_capacity(n);
        for &i in &order {
            let mut row = train_x[i];
            if let Some(noise) = &cfg.noise {
                for (f, v) in row.iter_mut().enumerate() {
                    let g: f64 = StandardNormal.sample(&mut rng);
                    *v += noise.sigma_for(f) * g;
                }
            }
            xs.push(
                (0..FEATURE_DIM)
                    .map(|f| (row[f] - model.in_mean[f]) / model.in_std[f])
                    .collect(),
            );
        }
        let ys: Vec<f64> = order.iter().map(|&i| ty[i]).collect();

        let mut epoch_loss = 0.0;
        for (bx, by) in xs.chunks(cfg.batch).zip(ys.chunks(cfg.batch)) {
            let (loss, grads) = batch_gradients(&model, bx, by);
            epoch_loss += loss * bx.len() as f64;
            if !loss.is_finite() {
                return Err(Error::TrainingDiverged { epoch, checkpoint: Box::new(checkpoint) });
            }
            let mut flat = flatten(&model.layers);
            adam.step(&mut flat, &grads);
            unflatten(&mut model.layers, &flat);
        }
        epoch_loss /= n as f64;
        let val_loss = mse(&model, &val_xs, &val_ys);
        if !(epoch_loss.is_finite() && val_loss.is_finite()) || val_loss > val_blowup {
            return Err(Error::TrainingDiverged { epoch, checkpoint: Box::new(checkpoint) });
        }
        report.train_loss.push(epoch_loss);
        report.val_loss.push(val_loss);
        checkpoint = model.clone();
    }
    Ok((model, report))
}

/// Trains the distance regressor described by the experiment config: floor-path
/// feature rows of scenes drawn by the dataset protocol (80/10/10 split), the
/// ddnn block supplying network shape, schedule, and noise regularization.
pub fn train_from_config(
    cfg: &crate::config::ExperimentConfig,
    seed: u64,
) -> Result<(MlpModel, TrainReport)> {
    use crate::dataset::{config_feature_rows, Split};
    let rows = config_feature_rows(cfg, cfg.ddnn.rows, seed)?;
    let mut tx = Vec::new();
    let mut ty = Vec::new();
    let mut vx = Vec::new();
    let mut vy = Vec::new();
    for r in &rows {
        match r.split {
            Split::Train => {
                tx.push(r.features);
                ty.push(r.target);
            }
            Split::Val => {
                vx.push(r.features);
                vy.push(r.target);
            }
            Split::Test => {}
        }
    }
    let tc = TrainConfig {
        hidden: cfg.ddnn.hidden.clone(),
        epochs: cfg.ddnn.epochs,
        batch: cfg.ddnn.batch,
        learning_rate: cfg.ddnn.learning_rate,
        seed,
        noise: Some(NoiseSpec {
            sigma_h_m: cfg.ddnn.noise_h_m,
            sigma_angle_deg: cfg.ddnn.noise_angle_deg,
            sigma_dt_s: cfg.ddnn.noise_dt_ms * 1e-3,
        }),
    };
    train(&tx, &ty, &vx, &vy, &tc)
}

/// Mean loss and flattened parameter gradients for one batch.
fn batch_gradients(model: &MlpModel, xs: &[Vec<f64>], ys: &[f64]) -> (f64, Vec<f64>) {
    let n_params: usize = model.layers.iter().map(|l| l.w.len() + l.b.len()).sum();
    let mut grads = vec![0.0; n_params];
    let mut loss = 0.0;
    let scale = 1.0 / xs.len() as f64;
    for (x, &y) in xs.iter().zip(ys) {
        // Forward with caches.
        let mut acts: Vec<Vec<f64>> = vec![x.clone()];
        let mut zs: Vec<Vec<f64>> = Vec::new();
        for layer in &model.layers {
            let prev = acts.last().unwrap();
            let mut z = Vec::with_capacity(layer.n_out);
            for o in 0..layer.n_out {
                let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                z.push(row.iter().zip(prev).map(|(w, v)| w * v).sum::<f64>() + layer.b[o]);
            }
            let a: Vec<f64> = z.iter().map(|&v| layer.act.apply(v)).collect();
            zs.push(z);
            acts.push(a);
        }
        let out = acts.last().unwrap()[0];
        let err = out - y;
        loss += err * err * scale;
        // Backward.
        let mut delta = vec![2.0 * err * scale];
        let mut at = n_params;
        for (li, layer) in model.layers.iter().enumerate().rev() {
            let z = &zs[li];
            let dz: Vec<f64> = delta
                .iter()
                .zip(z)
                .map(|(d, &zv)| d * layer.act.derivative(zv))
                .collect();
            at -= layer.w.len() + layer.b.len();
            let a_prev = &acts[li];
            for o in 0..layer.n_out {
                for i in 0..layer.n_in {
                    grads[at + o * layer.n_in + i] += dz[o] * a_prev[i];
                }
                grads[at + layer.w.len() + o] += dz[o];
            }
            if li > 0 {
                let mut next = vec![0.0; layer.n_in];
                for o in 0..layer.n_out {
                    let row = &layer.w[o * layer.n_in..(o + 1) * layer.n_in];
                    for (slot, w) in next.iter_mut().zip(row) {
                        *slot += dz[o] * w;
                    }
                }
                delta = next;
            }
        }
    }
    (loss, grads)
}
