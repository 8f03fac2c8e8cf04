//! Command line front end: scene simulation, per-stage analysis of WAV
//! captures, end-to-end experiment runs, regressor training, and report
//! post-processing. Every subcommand exits nonzero on error.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use echolocate::config::{parse_config, DistanceMethod, ExperimentConfig, SourceKind};
use echolocate::dataset::{config_feature_rows, generate_dataset, Split};
use echolocate::doa::{covariance, pick_peaks, sps_mvdr};
use echolocate::encode::HoaFrames;
use echolocate::geometry::{Direction, RoomScene};
use echolocate::mlp::{train_from_config, MlpModel};
use echolocate::pipeline::{compute_aggregates, mix_seed, Pipeline, RunOptions, RunReport, SceneTruth};
use echolocate::simulator::{render_array, speech_shaped_noise, white_noise, MultichannelSignal};
use echolocate::source_loc::{estimate_source, LocalizationFeatures};
use echolocate::vad::energy_vad;
use echolocate::{wav, SOUND_SPEED};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "echolocate",
    version,
    about = "Blind shoebox-room geometry inference from spherical-array recordings"
)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args)]
struct Common {
    /// Run seed (overrides the config key run.seed).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Config file; defaults apply for keys it omits.
    #[arg(long, value_name = "PATH", global = true)]
    config: Option<String>,
    /// Override one config key, e.g. --set doa.beta_db=-3. Repeatable.
    #[arg(long, value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// Take DOAs from scene geometry instead of the spatial spectrum.
    #[arg(long, global = true)]
    oracle_doa: bool,
    /// Take TDOAs from scene geometry instead of GCC-PHAT.
    #[arg(long, global = true)]
    oracle_tdoa: bool,
    /// Distance estimator: height, tdoa or dnn.
    #[arg(long, value_name = "METHOD", global = true)]
    distance_method: Option<DistanceMethod>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Render random scenes to 32-channel WAVs plus a ground-truth JSON.
    Simulate {
        /// Number of scenes.
        #[arg(long, default_value_t = 1)]
        scenes: usize,
        /// Output directory (WAVs and truth.json).
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
    /// Encode a WAV capture into an eigen-beam (.ehoa) dump.
    Encode {
        #[arg(long, value_name = "WAV")]
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Estimate DOAs from a WAV capture or an .ehoa dump.
    Doa {
        #[arg(long, value_name = "WAV|EHOA")]
        input: PathBuf,
        /// Also write the spatial spectrum as CSV.
        #[arg(long, value_name = "PATH")]
        sps_csv: Option<PathBuf>,
    },
    /// Estimate per-reflection TDOAs from a WAV capture.
    Tdoa {
        #[arg(long, value_name = "WAV")]
        input: PathBuf,
        /// Also write per-reflection correlation functions as CSVs.
        #[arg(long, value_name = "DIR")]
        corr_dir: Option<PathBuf>,
    },
    /// Localize the source from a WAV capture or explicit floor-path features.
    Localize {
        #[arg(long, value_name = "WAV", conflicts_with = "features")]
        input: Option<PathBuf>,
        /// H,ALPHA1,ALPHA2,DT_MS (meters, degrees, degrees, milliseconds).
        #[arg(long, value_name = "CSV")]
        features: Option<String>,
        /// Saved distance regressor (trained on the fly when absent and needed).
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
    },
    /// Infer room boundary planes from a single WAV capture.
    Infer {
        #[arg(long, value_name = "WAV")]
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Write the full result row here instead of stdout.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
    },
    /// End-to-end simulated experiment producing a JSON report.
    Run {
        #[arg(long, default_value_t = 20)]
        scenes: usize,
        /// Report path; stdout when omitted.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        model: Option<PathBuf>,
        /// Also write plot CSVs into this directory.
        #[arg(long, value_name = "DIR")]
        plots: Option<PathBuf>,
    },
    /// Train the fusion distance regressor and save it.
    TrainDdnn {
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
    },
    /// Recompute report aggregates from its rows.
    Evaluate {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        /// Write the report with recomputed aggregates here.
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Fail unless stored aggregates match the recomputation.
        #[arg(long)]
        check: bool,
    },
    /// Write plot CSVs (error-vs-T60 curves, per-scene table) from a report.
    EmitPlots {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_name = "DIR")]
        out: PathBuf,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(cli: Cli) -> Result<()> {
    init_threads()?;
    let cfg = build_config(&cli.common)?;
    let opts = RunOptions {
        oracle_doa: cli.common.oracle_doa,
        oracle_tdoa: cli.common.oracle_tdoa,
        keep_stages: false,
    };
    match &cli.cmd {
        Cmd::Simulate { scenes, out } => cmd_simulate(&cfg, *scenes, out),
        Cmd::Encode { input, out } => cmd_encode(&cfg, input, out),
        Cmd::Doa { input, sps_csv } => cmd_doa(&cfg, input, sps_csv.as_deref()),
        Cmd::Tdoa { input, corr_dir } => cmd_tdoa(&cfg, opts, input, corr_dir.as_deref()),
        Cmd::Localize { input, features, model } => {
            cmd_localize(&cfg, opts, input.as_deref(), features.as_deref(), model.as_deref())
        }
        Cmd::Infer { input, model, out } => {
            cmd_infer(&cfg, opts, input, model.as_deref(), out.as_deref())
        }
        Cmd::Run { scenes, out, model, plots } => {
            cmd_run(&cfg, opts, *scenes, out.as_deref(), model.as_deref(), plots.as_deref())
        }
        Cmd::TrainDdnn { out } => cmd_train_ddnn(&cfg, out),
        Cmd::Evaluate { input, out, check } => cmd_evaluate(input, out.as_deref(), *check),
        Cmd::EmitPlots { input, out } => cmd_emit_plots(input, out),
    }
}

/// Honors ECHOLOCATE_THREADS as a cap on scene-level parallelism.
fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("ECHOLOCATE_THREADS") {
        let n: usize = v
            .trim()
            .parse()
            .ok()
            .filter(|&n| n > 0)
            .ok_or_else(|| anyhow!("ECHOLOCATE_THREADS must be a positive integer, got {v:?}"))?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("initializing the worker pool")?;
    }
    Ok(())
}

/// Defaults, then the config file, then --set overrides, then named flags.
fn build_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)
            .with_context(|| format!("loading config {path}"))?,
        None => ExperimentConfig::default(),
    };
    if !common.set.is_empty() {
        let mut text = String::new();
        for s in &common.set {
            let (key, value) = s
                .split_once('=')
                .ok_or_else(|| anyhow!("--set needs KEY=VALUE, got {s:?}"))?;
            let (section, name) = key
                .trim()
                .rsplit_once('.')
                .ok_or_else(|| anyhow!("--set keys are section.key, got {key:?}"))?;
            text.push_str(&format!("[{section}]\n{name} = {}\n", value.trim()));
        }
        let parsed = parse_config(&text)?;
        cfg.apply(&parsed)?;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(m) = common.distance_method {
        cfg.distance_method = m;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn read_signal(path: &Path, cfg: &ExperimentConfig) -> Result<MultichannelSignal> {
    let w = wav::read_wav(path).with_context(|| format!("reading {}", path.display()))?;
    let sig = MultichannelSignal { sample_rate: w.sample_rate as f64, channels: w.channels };
    if (sig.sample_rate - cfg.sample_rate_hz).abs() > 1e-9 {
        bail!(
            "{}: sample rate {} does not match configured {}",
            path.display(),
            sig.sample_rate,
            cfg.sample_rate_hz
        );
    }
    Ok(sig)
}

fn to_pretty<T: serde::Serialize>(v: &T) -> Result<String> {
    Ok(serde_json::to_string_pretty(v)?)
}

/// Loads the saved regressor, or trains one when the selected method needs it.
fn model_for(cfg: &ExperimentConfig, path: Option<&Path>) -> Result<Option<MlpModel>> {
    if let Some(p) = path {
        return Ok(Some(MlpModel::load(p).with_context(|| format!("loading {}", p.display()))?));
    }
    if cfg.distance_method == DistanceMethod::Dnn {
        eprintln!(
            "no --model given; training the distance regressor ({} rows, {} epochs)",
            cfg.ddnn.rows, cfg.ddnn.epochs
        );
        let (m, _) = train_from_config(cfg, cfg.seed)?;
        return Ok(Some(m));
    }
    Ok(None)
}

fn cmd_simulate(cfg: &ExperimentConfig, n: usize, out: &Path) -> Result<()> {
    let array = echolocate::pipeline::array_from_config(cfg)?;
    let scenes = generate_dataset(cfg, n, cfg.seed)?;
    std::fs::create_dir_all(out)?;
    let mut index = Vec::new();
    for (i, s) in scenes.iter().enumerate() {
        let len = (cfg.duration_s * cfg.sample_rate_hz).round() as usize;
        let src_seed = mix_seed(cfg.seed, i as u64 * 4);
        let src = match cfg.source {
            SourceKind::White => white_noise(len, src_seed),
            SourceKind::Speech => speech_shaped_noise(len, cfg.sample_rate_hz, src_seed),
        };
        let sensor_seed = mix_seed(cfg.seed, i as u64 * 4 + 1);
        let sig = render_array(
            &s.scene,
            &src,
            &array,
            cfg.render_max_order as u32,
            cfg.snr_db,
            sensor_seed,
        )?;
        let name = format!("scene_{i:03}.wav");
        wav::write_wav(out.join(&name), cfg.sample_rate_hz.round() as u32, &sig.channels)?;
        index.push(serde_json::json!({
            "wav": name,
            "split": s.split,
            "truth": SceneTruth::of(&s.scene)?,
        }));
    }
    let doc = serde_json::json!({ "config": cfg, "scenes": index });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(out.join("truth.json"), text)?;
    println!("wrote {} scene(s) to {}", n, out.display());
    Ok(())
}

fn cmd_encode(cfg: &ExperimentConfig, input: &Path, out: &Path) -> Result<()> {
    let pipe = Pipeline::new(cfg.clone(), None, RunOptions::default())?;
    let sig = read_signal(input, cfg)?;
    let hoa = pipe.encoder().encode(&sig, cfg.frame_len)?;
    hoa.save(out)?;
    println!("{}: order {}, {} frames x {} bins", out.display(), hoa.order, hoa.frames, hoa.bins);
    Ok(())
}

fn cmd_doa(cfg: &ExperimentConfig, input: &Path, sps_csv: Option<&Path>) -> Result<()> {
    let hoa = match input.extension().and_then(|e| e.to_str()) {
        Some("ehoa") => HoaFrames::load(input)?,
        _ => {
            let pipe = Pipeline::new(cfg.clone(), None, RunOptions::default())?;
            pipe.encoder().encode(&read_signal(input, cfg)?, cfg.frame_len)?
        }
    };
    let active = energy_vad(&hoa.eb_time[0], hoa.frame_len, cfg.vad_ratio);
    let cov = covariance(&hoa, cfg.band(), &active)?;
    let sps = sps_mvdr(&cov, cfg.grid_step_deg, cfg.loading_scale)?;
    let peaks = pick_peaks(&sps, cfg.beta_db, cfg.merge_deg);
    if let Some(path) = sps_csv {
        echolocate::plots::write_sps_csv(&sps, path)?;
    }
    println!("{}", to_pretty(&peaks)?);
    Ok(())
}

fn cmd_tdoa(
    cfg: &ExperimentConfig,
    opts: RunOptions,
    input: &Path,
    corr_dir: Option<&Path>,
) -> Result<()> {
    let pipe = Pipeline::new(cfg.clone(), None, RunOptions { keep_stages: true, ..opts })?;
    let sig = read_signal(input, cfg)?;
    let (row, cache) = pipe.run_signal(0, &sig);
    // Later stages (floor selection, localization) may fail without
    // invalidating the delay estimates this subcommand is for.
    if row.doa.is_none() || row.tdoas.is_empty() {
        bail!("{}", row.status);
    }
    if let Some(dir) = corr_dir {
        std::fs::create_dir_all(dir)?;
        for (i, corr) in &cache.correlations {
            echolocate::plots::write_correlation_csv(corr, dir.join(format!("corr_{i:02}.csv")))?;
        }
    }
    let doc = serde_json::json!({ "doa": row.doa, "tdoas": row.tdoas });
    println!("{}", to_pretty(&doc)?);
    Ok(())
}

fn parse_features(s: &str) -> Result<LocalizationFeatures> {
    let vals: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| anyhow!("bad number {p:?}")))
        .collect::<Result<_>>()?;
    let [h, a1, a2, dt_ms] = vals[..] else {
        bail!("--features needs H,ALPHA1,ALPHA2,DT_MS, got {s:?}");
    };
    Ok(LocalizationFeatures {
        h,
        alpha1_deg: a1,
        alpha2_deg: a2,
        dt: dt_ms * 1e-3,
        direct: Direction::new(0.0, a1),
    })
}

fn cmd_localize(
    cfg: &ExperimentConfig,
    opts: RunOptions,
    input: Option<&Path>,
    features: Option<&str>,
    model_path: Option<&Path>,
) -> Result<()> {
    let model = model_for(cfg, model_path)?;
    let (features, sources, errors) = match (input, features) {
        (Some(path), None) => {
            let pipe = Pipeline::new(cfg.clone(), model, opts)?;
            let sig = read_signal(path, cfg)?;
            let (row, _) = pipe.run_signal(0, &sig);
            // Room inference runs after localization; only earlier failures
            // mean there is no source estimate to print.
            if !(row.is_ok() || row.status.starts_with("infer:")) {
                bail!("{}", row.status);
            }
            (row.features.expect("localized row has features"), row.sources, row.source_errors)
        }
        (None, Some(text)) => {
            let f = parse_features(text)?;
            let mut sources = BTreeMap::new();
            let mut errors = BTreeMap::new();
            for method in [DistanceMethod::Height, DistanceMethod::Tdoa, DistanceMethod::Dnn] {
                if method == DistanceMethod::Dnn && model.is_none() {
                    continue;
                }
                match estimate_source(&f, method, model.as_ref(), SOUND_SPEED) {
                    Ok(est) => {
                        sources.insert(method.to_string(), est);
                    }
                    Err(e) => {
                        errors.insert(method.to_string(), e.to_string());
                    }
                }
            }
            if !sources.contains_key(&cfg.distance_method.to_string()) {
                bail!(
                    "selected method {} failed: {}",
                    cfg.distance_method,
                    errors
                        .get(&cfg.distance_method.to_string())
                        .map_or("unavailable", String::as_str)
                );
            }
            (f, sources, errors)
        }
        _ => bail!("localize needs exactly one of --input or --features"),
    };
    let doc = serde_json::json!({
        "features": features,
        "selected": cfg.distance_method.to_string(),
        "sources": sources,
        "errors": errors,
    });
    println!("{}", to_pretty(&doc)?);
    Ok(())
}

fn cmd_infer(
    cfg: &ExperimentConfig,
    opts: RunOptions,
    input: &Path,
    model_path: Option<&Path>,
    out: Option<&Path>,
) -> Result<()> {
    let model = model_for(cfg, model_path)?;
    let pipe = Pipeline::new(cfg.clone(), model, opts)?;
    let sig = read_signal(input, cfg)?;
    let (row, _) = pipe.run_signal(0, &sig);
    if !row.is_ok() {
        bail!("{}", row.status);
    }
    let mut text = to_pretty(&row)?;
    text.push('\n');
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn cmd_run(
    cfg: &ExperimentConfig,
    opts: RunOptions,
    n: usize,
    out: Option<&Path>,
    model_path: Option<&Path>,
    plots: Option<&Path>,
) -> Result<()> {
    let model = model_for(cfg, model_path)?;
    let pipe = Pipeline::new(cfg.clone(), model, opts)?;
    let scenes: Vec<RoomScene> =
        generate_dataset(cfg, n, cfg.seed)?.into_iter().map(|s| s.scene).collect();
    let report = pipe.run_report(&scenes);
    let text = report.to_canonical_json();
    match out {
        Some(p) => {
            std::fs::write(p, text)?;
            println!(
                "wrote {} ({}/{} scenes ok, {:.1} s)",
                p.display(),
                report.aggregates.overall.n_ok,
                n,
                report.elapsed_s
            );
        }
        None => print!("{text}"),
    }
    if let Some(dir) = plots {
        for p in echolocate::plots::emit_plots(&report, dir)? {
            eprintln!("wrote {}", p.display());
        }
    }
    Ok(())
}

fn cmd_train_ddnn(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    let (model, report) = train_from_config(cfg, cfg.seed)?;
    model.save(out)?;
    let rows = config_feature_rows(cfg, cfg.ddnn.rows, cfg.seed)?;
    let test: Vec<_> = rows.iter().filter(|r| r.split == Split::Test).collect();
    let mae = test
        .iter()
        .map(|r| (model.predict(&r.features) - r.target).abs())
        .sum::<f64>()
        / test.len().max(1) as f64;
    println!(
        "saved {} (final val MSE {:.5}, held-out MAE {:.3} m over {} rows)",
        out.display(),
        report.val_loss.last().copied().unwrap_or(f64::NAN),
        mae,
        test.len()
    );
    Ok(())
}

fn cmd_evaluate(input: &Path, out: Option<&Path>, check: bool) -> Result<()> {
    let text = std::fs::read_to_string(input)?;
    let mut report = RunReport::from_json(&text)?;
    let recomputed = compute_aggregates(&report.rows, report.config.tdoa_gate_ms);
    let consistent =
        serde_json::to_string(&report.aggregates)? == serde_json::to_string(&recomputed)?;
    report.aggregates = recomputed;
    match out {
        Some(p) => std::fs::write(p, report.to_canonical_json())?,
        None => println!("{}", to_pretty(&report.aggregates)?),
    }
    if check && !consistent {
        bail!("stored aggregates do not match recomputation from rows");
    }
    Ok(())
}

fn cmd_emit_plots(input: &Path, out: &Path) -> Result<()> {
    let text = std::fs::read_to_string(input)?;
    let report = RunReport::from_json(&text)?;
    for p in echolocate::plots::emit_plots(&report, out)? {
        println!("wrote {}", p.display());
    }
    Ok(())
}
