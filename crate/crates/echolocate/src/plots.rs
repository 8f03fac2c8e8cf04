//! Plot-data emission: CSV files for the spatial spectrum, correlation
//! functions, and error-versus-T60 curves, derived from a run report.

use crate::doa::SpatialSpectrum;
use crate::pipeline::{GroupAggregate, RunReport};
use crate::tdoa::CorrelationFunction;
use crate::Result;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

pub fn write_sps_csv(sps: &SpatialSpectrum, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, sps.to_csv())?;
    Ok(())
}

pub fn write_correlation_csv(corr: &CorrelationFunction, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, corr.to_csv())?;
    Ok(())
}

fn opt_cell(v: Option<f64>) -> String {
    v.map_or(String::new(), |x| format!("{x}"))
}

fn group_cells(g: &GroupAggregate) -> String {
    let dist = |m: &str| {
        let s = g.distance.get(m);
        format!(
            "{},{}",
            opt_cell(s.map(|s| s.s_mean)),
            opt_cell(s.map(|s| s.s_sd)),
        )
    };
    format!(
        "{},{},{},{},{},{},{},{},{},{},{}",
        g.n_scenes,
        g.n_ok,
        g.tdoa.t_mean_ms,
        g.tdoa.t_sd_ms,
        g.tdoa.r_dect,
        dist("height"),
        dist("tdoa"),
        dist("dnn"),
        g.boundary.r_dect,
        g.boundary.dist_mean,
        g.boundary.theta_mean,
    )
}

/// One row per 100 ms T60 bucket plus an "all" row, mirroring the
/// error-versus-reverberation curves.
pub fn error_vs_t60_csv(report: &RunReport) -> String {
    let mut out = String::from(
        "t60_bucket,n_scenes,n_ok,tdoa_mean_ms,tdoa_sd_ms,tdoa_r_dect,\
         dist_mean_height_m,dist_sd_height_m,dist_mean_tdoa_m,dist_sd_tdoa_m,\
         dist_mean_dnn_m,dist_sd_dnn_m,boundary_r_dect,boundary_dist_mean_m,\
         boundary_theta_mean_deg\n",
    );
    for (bucket, g) in &report.aggregates.by_t60 {
        let _ = writeln!(out, "{bucket},{}", group_cells(g));
    }
    let _ = writeln!(out, "all,{}", group_cells(&report.aggregates.overall));
    out
}

/// One row per scene: status, distance errors per method, boundary rate.
pub fn scene_table_csv(report: &RunReport) -> String {
    let mut out = String::from(
        "scene,t60,status,n_reflections,floor_index,err_height_m,err_tdoa_m,\
         err_dnn_m,boundary_r_dect\n",
    );
    for row in &report.rows {
        let err = |m: &str| opt_cell(row.distance_errors_m.get(m).copied());
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            row.index,
            opt_cell(row.truth.as_ref().map(|t| t.t60)),
            row.status.replace(',', ";"),
            opt_cell(row.doa.as_ref().map(|d| d.reflections.len() as f64)),
            opt_cell(row.floor_index.map(|i| i as f64)),
            err("height"),
            err("tdoa"),
            err("dnn"),
            opt_cell(row.boundary.as_ref().map(|b| b.r_dect)),
        );
    }
    out
}

/// Writes the report-derived CSVs into `dir`, returning the paths written.
pub fn emit_plots(report: &RunReport, dir: impl AsRef<Path>) -> Result<Vec<PathBuf>> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let files = [
        ("error_vs_t60.csv", error_vs_t60_csv(report)),
        ("scenes.csv", scene_table_csv(report)),
    ];
    let mut written = Vec::new();
    for (name, text) in files {
        let path = dir.join(name);
        std::fs::write(&path, text)?;
        written.push(path);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{DistanceMethod, ExperimentConfig};
    use crate::geometry::{RoomScene, Vec3};
    use crate::pipeline::{Pipeline, RunOptions};

    fn oracle_report() -> RunReport {
        let cfg = ExperimentConfig {
            distance_method: DistanceMethod::Height,
            ..ExperimentConfig::default()
        };
        let opts = RunOptions { oracle_doa: true, oracle_tdoa: true, keep_stages: false };
        let scenes = vec![
            RoomScene::new(
                Vec3::new(4.0, 5.0, 2.6),
                Vec3::new(3.0, 3.0, 1.5),
                Vec3::new(2.0, 2.0, 1.5),
                0.8,
            )
            .unwrap(),
            RoomScene::new(
                Vec3::new(6.0, 4.0, 3.0),
                Vec3::new(4.5, 2.0, 1.2),
                Vec3::new(2.0, 2.5, 1.6),
                0.35,
            )
            .unwrap(),
        ];
        Pipeline::new(cfg, None, opts).unwrap().run_report(&scenes)
    }

    #[test]
    fn t60_curve_has_bucket_rows_and_all_row() {
        let report = oracle_report();
        let csv = error_vs_t60_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 1 + 2 + 1, "header, two buckets, all row");
        assert!(lines[0].starts_with("t60_bucket,"));
        assert!(lines[1].starts_with("0.3-0.4,1,"));
        assert!(lines[2].starts_with("0.8-0.9,1,"));
        assert!(lines[3].starts_with("all,2,"));
        // Every row has the full column count.
        let cols = lines[0].split(',').count();
        for l in &lines {
            assert_eq!(l.split(',').count(), cols, "row {l}");
        }
        // No dnn model was loaded: dnn cells are empty, height cells are not.
        let all: Vec<&str> = lines[3].split(',').collect();
        assert!(!all[6].is_empty());
        assert!(all[10].is_empty());
    }

    #[test]
    fn scene_table_lists_every_row() {
        let report = oracle_report();
        let csv = scene_table_csv(&report);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert!(lines[1].starts_with("0,0.8,ok,"));
        assert!(lines[2].starts_with("1,0.35,ok,"));
    }

    #[test]
    fn emit_writes_both_files() {
        let report = oracle_report();
        let dir = tempfile::tempdir().unwrap();
        let written = emit_plots(&report, dir.path()).unwrap();
        assert_eq!(written.len(), 2);
        for p in &written {
            assert!(p.exists());
            assert!(std::fs::read_to_string(p).unwrap().lines().count() >= 2);
        }
    }
}
