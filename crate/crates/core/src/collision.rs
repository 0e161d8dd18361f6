//! Pairwise repulsion between robots and its image in shape coordinates.
//!
//! The pair term is `(p_i − p_j)·b·exp(−‖p_i − p_j‖²/c)`, which equals
//! `−(c/2)·∇_{p_i}[b·exp(−‖p_i − p_j‖²/c)]`: a scaled negative gradient of a
//! scalar bump, pointing from robot `j` toward robot `i`. Pairs are summed
//! only inside the sensing radius, with a smooth taper over the outer 10 %
//! of that radius.

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::cbt::{Block, CbtTransform};
use crate::error::{Error, Result};
use crate::smc::ControllerGains;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialParams {
    /// Amplitude `b`.
    pub amplitude: f64,
    /// Length scale `c` in m².
    pub length_scale: f64,
    /// Sensing radius in m.
    pub sensing_radius: f64,
    /// Relative speed scale (m/s) used when estimating the rate bound.
    pub approach_speed: f64,
    /// Known bound on `‖dF_pot/dt‖_∞` per block; estimated when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_bound: Option<[f64; 3]>,
}

impl Default for PotentialParams {
    fn default() -> Self {
        Self {
            amplitude: 5.0,
            length_scale: 2.0,
            sensing_radius: 3.0,
            approach_speed: 1.0,
            rate_bound: None,
        }
    }
}

impl PotentialParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("amplitude", self.amplitude),
            ("length_scale", self.length_scale),
            ("sensing_radius", self.sensing_radius),
            ("approach_speed", self.approach_speed),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(
                    format!("potential.{name}"),
                    format!("must be finite and > 0, got {v}"),
                ));
            }
        }
        if let Some(bound) = self.rate_bound {
            if bound.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                return Err(Error::config("potential.rate_bound", "entries must be finite and >= 0"));
            }
        }
        Ok(())
    }
}

/// Scalar bump `b·exp(−‖p_i − p_j‖²/c)`.
pub fn bump_potential(pi: &Vector2<f64>, pj: &Vector2<f64>, params: &PotentialParams) -> f64 {
    params.amplitude * (-(pi - pj).norm_squared() / params.length_scale).exp()
}

/// `(p_i − p_j)·b·exp(−‖p_i − p_j‖²/c)`, without the sensing cutoff.
pub fn pair_repulsion(pi: &Vector2<f64>, pj: &Vector2<f64>, params: &PotentialParams) -> Vector2<f64> {
    (pi - pj) * bump_potential(pi, pj, params)
}

const TAPER_START: f64 = 0.9;

/// Sensing weight and its derivative with respect to distance.
fn taper(rho: f64, radius: f64) -> (f64, f64) {
    let start = TAPER_START * radius;
    if rho <= start {
        (1.0, 0.0)
    } else if rho >= radius {
        (0.0, 0.0)
    } else {
        let width = radius - start;
        let x = (rho - start) / width;
        // 1 - smootherstep(x)
        let w = 1.0 - x * x * x * (x * (6.0 * x - 15.0) + 10.0);
        let dw = -30.0 * x * x * (x - 1.0) * (x - 1.0) / width;
        (w, dw)
    }
}

/// Avoidance input of robot `i`: tapered pair terms summed over neighbors in
/// ascending index order.
pub fn avoidance_input(positions: &[Vector2<f64>], i: usize, params: &PotentialParams) -> Vector2<f64> {
    let mut acc = Vector2::zeros();
    for (j, pj) in positions.iter().enumerate() {
        if j == i {
            continue;
        }
        let rho = (positions[i] - pj).norm();
        let (w, _) = taper(rho, params.sensing_radius);
        if w > 0.0 {
            acc += pair_repulsion(&positions[i], pj, params) * w;
        }
    }
    acc
}

/// Avoidance inputs of all robots stacked into a vector of length `2n`.
pub fn avoidance_inputs(positions: &[Vector2<f64>], params: &PotentialParams) -> DVector<f64> {
    let mut out = DVector::zeros(2 * positions.len());
    for i in 0..positions.len() {
        out.fixed_rows_mut::<2>(2 * i)
            .copy_from(&avoidance_input(positions, i, params));
    }
    out
}

/// Time derivative of the stacked avoidance inputs.
pub fn avoidance_rates(
    positions: &[Vector2<f64>],
    velocities: &[Vector2<f64>],
    params: &PotentialParams,
) -> DVector<f64> {
    let n = positions.len();
    let mut out = DVector::zeros(2 * n);
    for i in 0..n {
        let mut acc = Vector2::zeros();
        for j in 0..n {
            if j == i {
                continue;
            }
            let d = positions[i] - positions[j];
            let d_dot = velocities[i] - velocities[j];
            let rho = d.norm();
            let (w, dw) = taper(rho, params.sensing_radius);
            if w == 0.0 {
                continue;
            }
            let g = params.amplitude * (-d.norm_squared() / params.length_scale).exp();
            let proj = d.dot(&d_dot);
            let pair_rate = (d_dot - d * (2.0 / params.length_scale * proj)) * g;
            acc += pair_rate * w;
            if dw != 0.0 {
                acc += d * (g * dw * proj / rho);
            }
        }
        out.fixed_rows_mut::<2>(2 * i).copy_from(&acc);
    }
    out
}

/// Avoidance inputs mapped through `Φ ⊗ I₂` and split by block.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialBlocks {
    pub stacked: DVector<f64>,
    pub intra: DVector<f64>,
    pub inter: DVector<f64>,
    pub centroid: DVector<f64>,
}

impl PotentialBlocks {
    fn split(transform: &CbtTransform, stacked: DVector<f64>) -> Self {
        let get = |b: Block| stacked.rows_range(transform.stacked_range(b)).into_owned();
        Self {
            intra: get(Block::Intra),
            inter: get(Block::Inter),
            centroid: get(Block::Centroid),
            stacked,
        }
    }

    pub fn block(&self, block: Block) -> &DVector<f64> {
        match block {
            Block::Intra => &self.intra,
            Block::Inter => &self.inter,
            Block::Centroid => &self.centroid,
        }
    }

    /// Largest absolute component of each block.
    pub fn block_max(&self) -> [f64; 3] {
        Block::ALL.map(|b| self.block(b).amax())
    }
}

pub fn transformed_potential(inputs: &DVector<f64>, transform: &CbtTransform) -> Result<PotentialBlocks> {
    Ok(PotentialBlocks::split(transform, transform.apply(inputs)?))
}

pub fn potential_rate(
    positions: &[Vector2<f64>],
    velocities: &[Vector2<f64>],
    transform: &CbtTransform,
    params: &PotentialParams,
) -> Result<PotentialBlocks> {
    if positions.len() != transform.robots() || velocities.len() != transform.robots() {
        return Err(Error::Dimension {
            expected: transform.robots(),
            actual: positions.len().min(velocities.len()),
        });
    }
    transformed_potential(&avoidance_rates(positions, velocities, params), transform)
}

/// Outcome of `δ_eff > F̄ + γ` for one block.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GainCheck {
    pub block: Block,
    pub passed: bool,
    /// `δ_eff − F̄ − γ`; positive when the condition holds.
    pub margin: f64,
}

/// Checks the collision-mode reaching condition with the applied reaching
/// magnitude (`δ` divided by the block's time-scale factor).
pub fn check_gain_condition(gains: &ControllerGains, rate_bound: [f64; 3]) -> [GainCheck; 3] {
    Block::ALL.map(|b| {
        let margin = gains.effective_reach(b) - rate_bound[b.index()] - gains.margin.get(b);
        GainCheck {
            block: b,
            passed: margin > 0.0,
            margin,
        }
    })
}

/// Estimates `F̄_pot` per block: the largest `‖dF_pot/dt‖_∞` produced by any
/// single pair of robots approaching at up to twice `approach_speed`, sampled
/// over separations inside the sensing radius and over relative-velocity
/// directions, times a safety factor of 2.
pub fn estimate_rate_bound(transform: &CbtTransform, params: &PotentialParams) -> [f64; 3] {
    const DISTANCES: usize = 64;
    const DIRECTIONS: usize = 16;
    let n = transform.robots();
    let rel_speed = 2.0 * params.approach_speed;
    let mut best = [0.0f64; 3];
    let mut positions = vec![Vector2::new(0.0, 0.0); n];
    let mut velocities = vec![Vector2::zeros(); n];
    for i in 0..n {
        for j in i + 1..n {
            for k in 0..DISTANCES {
                let rho = params.sensing_radius * k as f64 / DISTANCES as f64;
                for q in 0..DIRECTIONS {
                    let ang = std::f64::consts::PI * q as f64 / DIRECTIONS as f64;
                    // other robots parked far apart
                    for (r, p) in positions.iter_mut().enumerate() {
                        *p = Vector2::new(1e4 * (r + 1) as f64, 0.0);
                    }
                    velocities.iter_mut().for_each(|v| *v = Vector2::zeros());
                    positions[i] = Vector2::new(rho, 0.0);
                    positions[j] = Vector2::zeros();
                    velocities[i] = Vector2::new(ang.cos(), ang.sin()) * rel_speed;
                    let rates = avoidance_rates(&positions, &velocities, params);
                    if let Ok(blocks) = transformed_potential(&rates, transform) {
                        for (b, v) in best.iter_mut().zip(blocks.block_max()) {
                            *b = b.max(v);
                        }
                    }
                }
            }
        }
    }
    best.map(|v| 2.0 * v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cbt::GroupPartition;
    use approx::assert_relative_eq;

    fn params() -> PotentialParams {
        PotentialParams {
            amplitude: 1.0,
            length_scale: 1.0,
            ..PotentialParams::default()
        }
    }

    #[test]
    fn pair_values() {
        let p = params();
        let a = Vector2::new(0.3, -0.2);
        assert_eq!(pair_repulsion(&a, &a, &p), Vector2::zeros());
        let v = pair_repulsion(&Vector2::new(1.0, 0.0), &Vector2::zeros(), &p);
        assert_relative_eq!(v.x, (-1.0f64).exp(), epsilon = 1e-15);
        assert!((v.x - 0.3679).abs() < 1e-4);
        assert_eq!(v.y, 0.0);
        let b = Vector2::new(-0.7, 1.1);
        assert_eq!(pair_repulsion(&a, &b, &p), -pair_repulsion(&b, &a, &p));
    }

    #[test]
    fn pair_is_scaled_negative_gradient_of_bump() {
        let p = PotentialParams::default();
        let pj = Vector2::new(0.4, -0.3);
        let pi = Vector2::new(1.1, 0.2);
        let h = 1e-6;
        let gx = (bump_potential(&(pi + Vector2::new(h, 0.0)), &pj, &p)
            - bump_potential(&(pi - Vector2::new(h, 0.0)), &pj, &p))
            / (2.0 * h);
        let gy = (bump_potential(&(pi + Vector2::new(0.0, h)), &pj, &p)
            - bump_potential(&(pi - Vector2::new(0.0, h)), &pj, &p))
            / (2.0 * h);
        let expected = -Vector2::new(gx, gy) * (p.length_scale / 2.0);
        assert_relative_eq!(pair_repulsion(&pi, &pj, &p), expected, epsilon = 1e-8);
    }

    #[test]
    fn magnitude_peaks_at_sqrt_half_c() {
        let p = PotentialParams::default();
        let mag = |rho: f64| pair_repulsion(&Vector2::new(rho, 0.0), &Vector2::zeros(), &p).norm();
        // golden-section search on [0, 5]
        let (mut lo, mut hi) = (0.0f64, 5.0f64);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        while hi - lo > 1e-9 {
            let a = hi - g * (hi - lo);
            let b = lo + g * (hi - lo);
            if mag(a) < mag(b) {
                lo = a;
            } else {
                hi = b;
            }
        }
        assert!((0.5 * (lo + hi) - (p.length_scale / 2.0).sqrt()).abs() < 1e-6);
        assert!(mag(1e-9) < 1e-8);
        assert!(mag(50.0) < 1e-12);
    }

    #[test]
    fn no_neighbors_no_input() {
        let p = PotentialParams::default();
        let pos = [Vector2::new(0.0, 0.0), Vector2::new(10.0, 0.0)];
        assert_eq!(avoidance_input(&pos, 0, &p), Vector2::zeros());
        let v = [Vector2::new(1.0, 0.0), Vector2::new(-1.0, 0.0)];
        assert_eq!(avoidance_rates(&pos, &v, &p).norm(), 0.0);
    }

    #[test]
    fn symmetric_pair_inputs_cancel() {
        let p = PotentialParams::default();
        let pos = [Vector2::new(-0.8, 0.0), Vector2::new(0.8, 0.0)];
        let a = avoidance_input(&pos, 0, &p);
        let b = avoidance_input(&pos, 1, &p);
        assert_eq!(a, -b);
        assert!(a.x < 0.0);
    }

    #[test]
    fn triangle_inputs_point_outward() {
        let p = PotentialParams::default();
        let side = 1.2;
        let pos: Vec<_> = (0..3)
            .map(|k| {
                let ang = std::f64::consts::FRAC_PI_2 + 2.0 * std::f64::consts::PI * k as f64 / 3.0;
                Vector2::new(ang.cos(), ang.sin()) * (side / 3f64.sqrt())
            })
            .collect();
        let mags: Vec<f64> = (0..3)
            .map(|i| {
                let f = avoidance_input(&pos, i, &p);
                let radial = pos[i].normalize();
                assert!((f.normalize() - radial).norm() < 1e-12);
                f.norm()
            })
            .collect();
        assert_relative_eq!(mags[0], mags[1], epsilon = 1e-12);
        assert_relative_eq!(mags[1], mags[2], epsilon = 1e-12);
    }

    #[test]
    fn internal_forces_sum_to_zero() {
        let p = PotentialParams {
            sensing_radius: 100.0,
            ..PotentialParams::default()
        };
        let pos: Vec<_> = (0..7)
            .map(|k| Vector2::new((k as f64 * 1.7).sin() * 2.0, (k as f64 * 0.9).cos() * 1.5))
            .collect();
        let f = avoidance_inputs(&pos, &p);
        let (sx, sy) = (0..7).fold((0.0, 0.0), |(x, y), i| (x + f[2 * i], y + f[2 * i + 1]));
        assert!(sx.abs() < 1e-12 && sy.abs() < 1e-12);
    }

    #[test]
    fn transformed_blocks() {
        let t = CbtTransform::new(&GroupPartition::new(vec![3, 3, 3]).unwrap()).unwrap();
        let zero = transformed_potential(&DVector::zeros(18), &t).unwrap();
        assert_eq!(zero.stacked.norm(), 0.0);
        assert_eq!(zero.intra.len(), 12);
        assert_eq!(zero.inter.len(), 4);

        // only group 2 (robots 3..6) is crowded
        let p = PotentialParams::default();
        let mut pos: Vec<_> = (0..9).map(|i| Vector2::new(20.0 * i as f64, 0.0)).collect();
        pos[3] = Vector2::new(100.0, 0.0);
        pos[4] = Vector2::new(100.5, 0.4);
        pos[5] = Vector2::new(99.7, -0.6);
        let f = transformed_potential(&avoidance_inputs(&pos, &p), &t).unwrap();
        for (k, v) in f.intra.iter().enumerate() {
            let group = k / 4;
            if group != 1 {
                assert_eq!(*v, 0.0);
            }
        }
        assert!(f.intra.rows(4, 4).norm() > 0.1);
        assert!(f.centroid.norm() < 1e-15);
    }

    #[test]
    fn gain_condition_arithmetic() {
        let gains = ControllerGains::default();
        let mut g = gains;
        g.margin.centroid = 0.3;
        let checks = check_gain_condition(&g, [0.0, 0.0, 0.5]);
        assert!(checks[2].passed);
        assert_relative_eq!(checks[2].margin, 0.2, epsilon = 1e-12);
        let checks = check_gain_condition(&g, [0.0, 0.0, 0.9]);
        assert!(!checks[2].passed);
    }

    #[test]
    fn taper_is_continuous_and_monotone() {
        let r = 3.0;
        let mut prev = 1.0;
        for k in 0..=400 {
            let rho = 2.6 + 0.5 * k as f64 / 400.0;
            let (w, _) = taper(rho, r);
            assert!(w <= prev + 1e-15 && (0.0..=1.0).contains(&w));
            prev = w;
        }
        assert_eq!(taper(2.7, r).0, 1.0);
        assert_eq!(taper(3.0, r).0, 0.0);
    }
}
