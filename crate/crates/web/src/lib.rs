//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every export takes and returns JSON text. The plain Rust functions
//! behind the exports are public so they can be exercised natively.

use formctl_core::cbt::{CbtTransform, GroupPartition};
use formctl_core::collision::{avoidance_input, PotentialParams};
use formctl_core::config;
use formctl_core::sim::run_scenario;
use nalgebra::Vector2;
use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

/// Knobs exposed by the page. Missing fields keep the preset's values.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateRequest {
    pub preset: Option<String>,
    pub seed: Option<u64>,
    pub eps1: Option<f64>,
    pub eps2: Option<f64>,
    /// Same reaching gain for all three blocks.
    pub reach: Option<f64>,
    pub collision: Option<bool>,
    pub duration: Option<f64>,
    /// Number of frames returned; the run itself uses the preset step.
    pub frames: Option<usize>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Frame {
    pub t: f64,
    /// `[x, y, heading]` per robot.
    pub robots: Vec<[f64; 3]>,
    pub error: [f64; 3],
    pub surface: [f64; 3],
    pub min_distance: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulateResponse {
    pub groups: Vec<usize>,
    pub surface_time: [Option<f64>; 3],
    pub min_distance: f64,
    pub frames: Vec<Frame>,
}

pub fn simulate(request: &SimulateRequest) -> Result<SimulateResponse, String> {
    let name = request.preset.as_deref().unwrap_or("paper_3x3");
    let mut cfg = config::preset(name).ok_or_else(|| format!("unknown preset {name}"))?;
    if let Some(seed) = request.seed {
        cfg.seed = seed;
    }
    if let Some(v) = request.eps1 {
        cfg.gains.eps1 = v;
    }
    if let Some(v) = request.eps2 {
        cfg.gains.eps2 = v;
    }
    if let Some(v) = request.reach {
        cfg.gains.reach = formctl_core::smc::BlockGains::uniform(v);
    }
    if let Some(on) = request.collision {
        cfg.collision.enabled = on;
        // the page shows what happens when the gain check fails instead of refusing
        cfg.collision.override_gain_check = on;
    }
    if let Some(d) = request.duration {
        cfg.integrator.duration = d;
    }
    let frames = request.frames.unwrap_or(200).clamp(2, 2000);
    cfg.integrator.record_stride = (cfg.integrator.steps() / frames).max(1);
    cfg.validate().map_err(|e| e.to_string())?;

    let result = run_scenario(&cfg).map_err(|e| e.to_string())?;
    let report = formctl_core::analysis::detect_convergence(&result, &cfg.convergence);
    let frames = result
        .samples
        .iter()
        .map(|s| {
            let k = ((s.t / result.step).round() as usize).min(result.blocks.len() - 1);
            Frame {
                t: s.t,
                robots: s
                    .states
                    .iter()
                    .map(|r| [r.position.x, r.position.y, r.heading])
                    .collect(),
                error: s.error_norms,
                surface: result.blocks[k].sliding_norm,
                min_distance: s.min_distance,
            }
        })
        .collect();
    Ok(SimulateResponse {
        groups: cfg.partition.sizes().to_vec(),
        surface_time: [
            report.surface_time.intra,
            report.surface_time.inter,
            report.surface_time.centroid,
        ],
        min_distance: report.min_distance,
        frames,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct TransformResponse {
    /// Row-major.
    pub matrix: Vec<Vec<f64>>,
    /// Label of each row: `intra g.k`, `inter k` or `centroid`.
    pub rows: Vec<String>,
}

/// Parses `"3,3,3"` and returns the transformation matrix with row labels.
pub fn transform(partition: &str) -> Result<TransformResponse, String> {
    let sizes = partition
        .split(',')
        .map(|s| s.trim().parse::<usize>().map_err(|e| format!("bad group size {s:?}: {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    let p = GroupPartition::new(sizes).map_err(|e| e.to_string())?;
    let t = CbtTransform::new(&p).map_err(|e| e.to_string())?;
    let mut rows = Vec::new();
    for (g, &k) in p.sizes().iter().enumerate() {
        rows.extend((1..k).map(|j| format!("intra {}.{j}", g + 1)));
    }
    rows.extend((1..p.groups()).map(|j| format!("inter {j}")));
    rows.push("centroid".into());
    Ok(TransformResponse {
        matrix: t.matrix().row_iter().map(|r| r.iter().copied().collect()).collect(),
        rows,
    })
}

/// Magnitude of the avoidance input between two robots, including the
/// sensing cutoff, sampled on `[0, 1.2·r_sense]`.
pub fn repulsion_profile(amplitude: f64, length_scale: f64, sensing_radius: f64, samples: usize) -> Result<Vec<[f64; 2]>, String> {
    let params = PotentialParams {
        amplitude,
        length_scale,
        sensing_radius,
        ..PotentialParams::default()
    };
    params.validate().map_err(|e| e.to_string())?;
    let samples = samples.clamp(2, 10_000);
    let end = 1.2 * sensing_radius;
    Ok((0..samples)
        .map(|k| {
            let rho = end * k as f64 / (samples - 1) as f64;
            let f = avoidance_input(&[Vector2::new(rho, 0.0), Vector2::zeros()], 0, &params);
            [rho, f.norm()]
        })
        .collect())
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsValue> {
    let v = r.map_err(|e| JsValue::from_str(&e))?;
    serde_json::to_string(&v).map_err(|e| JsValue::from_str(&e.to_string()))
}

#[wasm_bindgen(js_name = simulate)]
pub fn simulate_js(request: &str) -> Result<String, JsValue> {
    let req: SimulateRequest = serde_json::from_str(request).map_err(|e| JsValue::from_str(&e.to_string()))?;
    to_js(simulate(&req))
}

#[wasm_bindgen(js_name = transformMatrix)]
pub fn transform_js(partition: &str) -> Result<String, JsValue> {
    to_js(transform(partition))
}

#[wasm_bindgen(js_name = repulsionProfile)]
pub fn repulsion_profile_js(amplitude: f64, length_scale: f64, sensing_radius: f64, samples: usize) -> Result<String, JsValue> {
    to_js(repulsion_profile(amplitude, length_scale, sensing_radius, samples))
}
