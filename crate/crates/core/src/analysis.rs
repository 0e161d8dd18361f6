//! Convergence detection on simulation results.

use serde::{Deserialize, Serialize};

use crate::cbt::Block;
use crate::config::ConvergenceSettings;
use crate::sim::SimResult;
use crate::smc::settling_time_bound;

/// One value per subsystem, serialized with named fields.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PerBlock<T> {
    pub intra: T,
    pub inter: T,
    pub centroid: T,
}

impl<T: Copy> PerBlock<T> {
    pub fn from_fn(mut f: impl FnMut(Block) -> T) -> Self {
        Self {
            intra: f(Block::Intra),
            inter: f(Block::Inter),
            centroid: f(Block::Centroid),
        }
    }

    pub fn get(&self, block: Block) -> T {
        match block {
            Block::Intra => self.intra,
            Block::Inter => self.inter,
            Block::Centroid => self.centroid,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub inter_over_intra: Option<f64>,
    pub centroid_over_inter: Option<f64>,
}

impl Ratios {
    fn of(times: &PerBlock<Option<f64>>) -> Self {
        let ratio = |num: Option<f64>, den: Option<f64>| match (num, den) {
            (Some(a), Some(b)) if b > 0.0 => Some(a / b),
            _ => None,
        };
        Self {
            inter_over_intra: ratio(times.inter, times.intra),
            centroid_over_inter: ratio(times.centroid, times.inter),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Flags {
    /// Every block error converged before the end of the run.
    pub errors_converged: bool,
    /// Sustained surface convergence ordered intra < inter < centroid.
    pub time_scale_ordering: bool,
    /// Every block reached its switching band no later than its Lyapunov
    /// bound plus one step.
    pub bounds_respected: bool,
    /// Observed potential rates stayed within the configured or estimated
    /// bound; absent when collision mode is off.
    pub rate_bound_respected: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub tolerance: f64,
    pub hold: f64,
    pub step: f64,
    /// Sustained crossing of `‖Z_e‖ < tolerance` per block.
    pub error_time: PerBlock<Option<f64>>,
    /// Sustained crossing of `‖s‖ < tolerance` per block.
    pub surface_time: PerBlock<Option<f64>>,
    /// First time `‖s‖_∞` enters the switching band.
    pub reach_time: PerBlock<Option<f64>>,
    pub reach_band: PerBlock<f64>,
    /// `V(0) = ½·sᵀs`.
    pub initial_lyapunov: PerBlock<f64>,
    /// `2·time_scale·√V(0) / δ`.
    pub settling_bound: PerBlock<f64>,
    /// Collision-mode bound `2·V(0)/γ` with `V = sᵀs`.
    pub collision_bound_linear: PerBlock<f64>,
    /// Collision-mode bound `2·√V(0)/γ` with `V = sᵀs`.
    pub collision_bound_sqrt: PerBlock<f64>,
    pub surface_ratios: Ratios,
    pub error_ratios: Ratios,
    pub min_distance: f64,
    pub max_potential_rate: PerBlock<f64>,
    pub potential_rate_bound: Option<PerBlock<f64>>,
    pub flags: Flags,
}

/// First time from which `values` stay below `tol` for at least `hold`
/// seconds, or until the end of the series.
pub fn sustained_crossing(times: &[f64], values: &[f64], tol: f64, hold: f64) -> Option<f64> {
    let mut start: Option<usize> = None;
    for (k, (&t, &v)) in times.iter().zip(values).enumerate() {
        if v < tol {
            let s = *start.get_or_insert(k);
            if t - times[s] >= hold {
                return Some(times[s]);
            }
        } else {
            start = None;
        }
    }
    start.map(|s| times[s])
}

/// First time `values <= tol`.
pub fn first_crossing(times: &[f64], values: &[f64], tol: f64) -> Option<f64> {
    times.iter().zip(values).find(|(_, &v)| v <= tol).map(|(&t, _)| t)
}

pub fn detect_convergence(result: &SimResult, settings: &ConvergenceSettings) -> ConvergenceReport {
    let gains = &result.gains;
    let h = result.step;
    let times: Vec<f64> = result.blocks.iter().map(|b| b.t).collect();
    let series = |f: &dyn Fn(usize) -> f64| -> Vec<f64> { (0..result.blocks.len()).map(f).collect() };
    let tol = settings.tolerance;

    let error_time = PerBlock::from_fn(|b| {
        let v = series(&|k| result.blocks[k].error_norm[b.index()]);
        sustained_crossing(&times, &v, tol, settings.hold)
    });
    let surface_time = PerBlock::from_fn(|b| {
        let v = series(&|k| result.blocks[k].sliding_norm[b.index()]);
        sustained_crossing(&times, &v, tol, settings.hold)
    });
    let reach_band = PerBlock::from_fn(|b| gains.boundary_layer + 2.0 * h * gains.effective_reach(b));
    let reach_time = PerBlock::from_fn(|b| {
        let v = series(&|k| result.blocks[k].sliding_max[b.index()]);
        first_crossing(&times, &v, reach_band.get(b))
    });

    let first = result.blocks.first();
    let s0 = PerBlock::from_fn(|b| first.map_or(0.0, |f| f.sliding_norm[b.index()]));
    let initial_lyapunov = PerBlock::from_fn(|b| 0.5 * s0.get(b).powi(2));
    let settling_bound = PerBlock::from_fn(|b| settling_time_bound(b, initial_lyapunov.get(b), gains));
    let collision_bound_linear = PerBlock::from_fn(|b| 2.0 * s0.get(b).powi(2) / gains.margin.get(b));
    let collision_bound_sqrt = PerBlock::from_fn(|b| 2.0 * s0.get(b) / gains.margin.get(b));

    let max_potential_rate = PerBlock::from_fn(|b| {
        result
            .blocks
            .iter()
            .map(|s| s.potential_rate_max[b.index()])
            .fold(0.0, f64::max)
    });
    let potential_rate_bound = result.rate_bound.map(|r| PerBlock::from_fn(|b| r[b.index()]));

    let bounds_respected = Block::ALL.iter().all(|&b| {
        matches!(reach_time.get(b), Some(t) if t <= settling_bound.get(b) + h)
    });
    let time_scale_ordering = match (surface_time.intra, surface_time.inter, surface_time.centroid) {
        (Some(a), Some(b), Some(c)) => a < b && b < c,
        _ => false,
    };
    let flags = Flags {
        errors_converged: Block::ALL.iter().all(|&b| error_time.get(b).is_some()),
        time_scale_ordering,
        bounds_respected,
        rate_bound_respected: potential_rate_bound
            // the centroid rate is zero up to round-off since pair terms cancel
            .map(|bound| {
                Block::ALL
                    .iter()
                    .all(|&b| max_potential_rate.get(b) <= bound.get(b) * (1.0 + 1e-9) + 1e-9)
            }),
    };

    ConvergenceReport {
        tolerance: tol,
        hold: settings.hold,
        step: h,
        surface_ratios: Ratios::of(&surface_time),
        error_ratios: Ratios::of(&error_time),
        error_time,
        surface_time,
        reach_time,
        reach_band,
        initial_lyapunov,
        settling_bound,
        collision_bound_linear,
        collision_bound_sqrt,
        min_distance: result.min_distance(),
        max_potential_rate,
        potential_rate_bound,
        flags,
    }
}
