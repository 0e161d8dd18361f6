//! Plain-text artifacts of a run: CSV time series and a JSON summary.
//!
//! Floats are written with fixed nine-decimal formatting and `\n` line
//! endings so identical runs produce byte-identical files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use crate::analysis::ConvergenceReport;
use crate::cbt::GroupPartition;
use crate::error::Result;
use crate::sim::SimResult;

pub const TRAJECTORY_FILE: &str = "trajectory.csv";
pub const SHAPE_FILE: &str = "shape.csv";
pub const REPORT_FILE: &str = "report.json";
pub const MINDIST_FILE: &str = "mindist.csv";

fn num(out: &mut String, v: f64) {
    let _ = write!(out, ",{v:.9}");
}

pub fn trajectory_csv(result: &SimResult) -> String {
    let mut out = String::from("t,robot_id,x,y,theta,theta_dot,tau_r,tau_l\n");
    for s in &result.samples {
        for (i, (st, u)) in s.states.iter().zip(&s.torques).enumerate() {
            let _ = write!(out, "{:.9},{i}", s.t);
            for v in [
                st.position.x,
                st.position.y,
                st.heading,
                st.heading_rate,
                u.tau_right,
                u.tau_left,
            ] {
                num(&mut out, v);
            }
            out.push('\n');
        }
    }
    out
}

/// Column names of one stacked shape-space vector with prefix `z` or `s`.
fn shape_columns(partition: &GroupPartition, prefix: char) -> Vec<String> {
    let mut cols = Vec::new();
    for (g, &k) in partition.sizes().iter().enumerate() {
        for j in 1..k {
            for axis in ["x", "y"] {
                cols.push(format!("{prefix}s_{}_{j}_{axis}", g + 1));
            }
        }
    }
    for j in 1..partition.groups() {
        for axis in ["x", "y"] {
            cols.push(format!("{prefix}r_{j}_{axis}"));
        }
    }
    cols.push(format!("{prefix}c_x"));
    cols.push(format!("{prefix}c_y"));
    cols
}

pub fn shape_csv(result: &SimResult) -> String {
    let mut header = vec!["t".to_string()];
    header.extend(shape_columns(&result.partition, 'z'));
    header.extend(shape_columns(&result.partition, 's'));
    header.extend(["err_intra", "err_inter", "err_centroid"].map(String::from));
    let mut out = header.join(",");
    out.push('\n');
    for s in &result.samples {
        let _ = write!(out, "{:.9}", s.t);
        for &v in s.z.iter().chain(s.sliding.iter()).chain(s.error_norms.iter()) {
            num(&mut out, v);
        }
        out.push('\n');
    }
    out
}

pub fn mindist_csv(result: &SimResult) -> String {
    let mut out = String::from("t,min_distance\n");
    for s in &result.samples {
        let _ = write!(out, "{:.9}", s.t);
        num(&mut out, s.min_distance);
        out.push('\n');
    }
    out
}

pub fn report_json(report: &ConvergenceReport) -> Result<String> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    Ok(text)
}

/// Writes the four artifacts into `out_dir`. Each file is written to a
/// temporary name and renamed into place; on failure every file written by
/// this call is removed.
pub fn write_outputs(result: &SimResult, report: &ConvergenceReport, out_dir: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    let contents = [
        (TRAJECTORY_FILE, trajectory_csv(result)),
        (SHAPE_FILE, shape_csv(result)),
        (REPORT_FILE, report_json(report)?),
        (MINDIST_FILE, mindist_csv(result)),
    ];
    let mut written = Vec::new();
    for (name, text) in contents {
        let target = out_dir.join(name);
        let tmp = out_dir.join(format!(".{name}.tmp"));
        let res = fs::write(&tmp, text).and_then(|_| fs::rename(&tmp, &target));
        if let Err(e) = res {
            let _ = fs::remove_file(&tmp);
            for p in &written {
                let _ = fs::remove_file(p);
            }
            return Err(e.into());
        }
        written.push(target);
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_column_count_for_nine_robots() {
        let p = GroupPartition::new(vec![3, 3, 3]).unwrap();
        let cols = shape_columns(&p, 'z');
        assert_eq!(cols.len(), 18);
        assert_eq!(cols[0], "zs_1_1_x");
        assert_eq!(cols[12], "zr_1_x");
        assert_eq!(cols[17], "zc_y");
    }
}
