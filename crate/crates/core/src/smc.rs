//! Three-time-scale sliding mode control in shape coordinates.
//!
//! Every block uses the surface `s = λ·e + ė − F_pot` with an equivalent
//! control that renders `ṡ = 0` and a reaching term `−(δ/ε)·sgn(s)`. The
//! reaching gain is divided by `ε₁ε₂` for the intra-group block and by `ε₁`
//! for the inter-group block, so the shape blocks reach their surfaces on
//! progressively faster time scales than the centroid.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::cbt::{Block, CbtTransform};
use crate::dynamics::TorqueInput;
use crate::error::{Error, Result};

/// One value per subsystem.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockGains {
    pub intra: f64,
    pub inter: f64,
    pub centroid: f64,
}

impl BlockGains {
    pub const fn uniform(v: f64) -> Self {
        Self {
            intra: v,
            inter: v,
            centroid: v,
        }
    }

    pub fn get(&self, block: Block) -> f64 {
        match block {
            Block::Intra => self.intra,
            Block::Inter => self.inter,
            Block::Centroid => self.centroid,
        }
    }

    pub fn as_array(&self) -> [f64; 3] {
        [self.intra, self.inter, self.centroid]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerGains {
    /// Surface slopes `s`, `r`, `c` (1/s).
    pub slope: BlockGains,
    /// Reaching gains `δ_s`, `δ_r`, `δ_c`.
    pub reach: BlockGains,
    pub eps1: f64,
    pub eps2: f64,
    /// Width of the saturation replacing `sgn`; 0 selects the pure sign law.
    pub boundary_layer: f64,
    /// Margins `γ_s`, `γ_r`, `γ_c` demanded by the collision-mode gain condition.
    pub margin: BlockGains,
}

impl Default for ControllerGains {
    fn default() -> Self {
        Self {
            slope: BlockGains::uniform(1.0),
            reach: BlockGains::uniform(1.0),
            eps1: 0.1,
            eps2: 0.1,
            boundary_layer: 0.1,
            margin: BlockGains::uniform(0.1),
        }
    }
}

impl ControllerGains {
    /// Time-scale factor of a block: `ε₁ε₂`, `ε₁` or 1.
    pub fn time_scale(&self, block: Block) -> f64 {
        match block {
            Block::Intra => self.eps1 * self.eps2,
            Block::Inter => self.eps1,
            Block::Centroid => 1.0,
        }
    }

    /// Magnitude of the reaching term actually applied, `δ / time_scale`.
    pub fn effective_reach(&self, block: Block) -> f64 {
        self.reach.get(block) / self.time_scale(block)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, g) in [("slope", &self.slope), ("reach", &self.reach), ("margin", &self.margin)] {
            for b in Block::ALL {
                let v = g.get(b);
                if !(v.is_finite() && v > 0.0) {
                    return Err(Error::config(
                        format!("gains.{name}.{}", b.name()),
                        format!("must be finite and > 0, got {v}"),
                    ));
                }
            }
        }
        for (name, eps) in [("eps1", self.eps1), ("eps2", self.eps2)] {
            if !(eps > 0.0 && eps <= 1.0) {
                return Err(Error::config(
                    format!("gains.{name}"),
                    format!("must lie in (0, 1], got {eps}"),
                ));
            }
        }
        if !(self.boundary_layer.is_finite() && self.boundary_layer >= 0.0) {
            return Err(Error::config(
                "gains.boundary_layer",
                format!("must be finite and >= 0, got {}", self.boundary_layer),
            ));
        }
        Ok(())
    }
}

/// Sliding variables of the three blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct SlidingState {
    pub intra: DVector<f64>,
    pub inter: DVector<f64>,
    pub centroid: DVector<f64>,
}

impl SlidingState {
    pub fn block(&self, block: Block) -> &DVector<f64> {
        match block {
            Block::Intra => &self.intra,
            Block::Inter => &self.inter,
            Block::Centroid => &self.centroid,
        }
    }

    /// `V = ½·sᵀs` of a block.
    pub fn lyapunov(&self, block: Block) -> f64 {
        0.5 * self.block(block).norm_squared()
    }

    pub fn stacked(&self) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.intra.len() + self.inter.len() + 2);
        v.extend(self.intra.iter());
        v.extend(self.inter.iter());
        v.extend(self.centroid.iter());
        DVector::from_vec(v)
    }
}

/// Evaluates `s = slope·e + ė − F_pot` blockwise on stacked errors of length `2n`.
///
/// The potential enters with a negative sign: on the manifold the error
/// velocity becomes `ė = −slope·e + F_pot`, which pushes robots apart for the
/// outward-pointing avoidance input.
pub fn sliding_surfaces(
    transform: &CbtTransform,
    err: &DVector<f64>,
    err_rate: &DVector<f64>,
    gains: &ControllerGains,
    potential: Option<&DVector<f64>>,
) -> Result<SlidingState> {
    let n2 = 2 * transform.robots();
    for v in [err, err_rate].into_iter().chain(potential) {
        if v.len() != n2 {
            return Err(Error::Dimension {
                expected: n2,
                actual: v.len(),
            });
        }
    }
    let surface = |block: Block| {
        let range = transform.stacked_range(block);
        let lambda = gains.slope.get(block);
        let mut s = err.rows_range(range.clone()) * lambda + err_rate.rows_range(range.clone());
        if let Some(f) = potential {
            s -= f.rows_range(range);
        }
        s
    };
    Ok(SlidingState {
        intra: surface(Block::Intra),
        inter: surface(Block::Inter),
        centroid: surface(Block::Centroid),
    })
}

/// Inputs to the equivalent control of one block, all restricted to that
/// block's rows except `z_dot`.
#[derive(Debug, Clone, Copy)]
pub struct EquivalentInputs<'a> {
    pub err_rate: &'a DVector<f64>,
    pub p_block: &'a DMatrix<f64>,
    pub z_dot: &'a DVector<f64>,
    pub r_block: &'a DVector<f64>,
    pub desired_accel: &'a DVector<f64>,
    pub potential_rate: Option<&'a DVector<f64>>,
}

/// `−slope·ė − P_b·Ż − R_b + Z̈_d (+ dF_pot/dt)`.
pub fn equivalent_control(block: Block, gains: &ControllerGains, inputs: EquivalentInputs<'_>) -> DVector<f64> {
    let drift = inputs.p_block * inputs.z_dot + inputs.r_block;
    equivalent_control_with_drift(block, gains, inputs.err_rate, &drift, inputs.desired_accel, inputs.potential_rate)
}

/// Same as [`equivalent_control`] with the drift `P_b·Ż + R_b` precomputed.
pub fn equivalent_control_with_drift(
    block: Block,
    gains: &ControllerGains,
    err_rate: &DVector<f64>,
    drift: &DVector<f64>,
    desired_accel: &DVector<f64>,
    potential_rate: Option<&DVector<f64>>,
) -> DVector<f64> {
    let mut u = -gains.slope.get(block) * err_rate - drift + desired_accel;
    if let Some(rate) = potential_rate {
        u += rate;
    }
    u
}

/// Sign with `sgn(0) = 0`.
pub fn sgn(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Componentwise switching function: pure sign when `width == 0`,
/// `clamp(x / width, −1, 1)` otherwise.
pub fn switching(x: f64, width: f64) -> f64 {
    if width > 0.0 {
        (x / width).clamp(-1.0, 1.0)
    } else {
        sgn(x)
    }
}

pub fn reaching_control(block: Block, s: &DVector<f64>, gains: &ControllerGains) -> DVector<f64> {
    let k = gains.effective_reach(block);
    s.map(|v| -k * switching(v, gains.boundary_layer))
}

/// Stacks `[u_s; u_r; f_c]` into the transformed control `F` and recovers the
/// wheel torques `U = B⁻¹·(Φ⁻¹ ⊗ I₂)·F`, using the per-robot blocks of `B`.
pub fn compose_and_recover_torques(
    intra: &DVector<f64>,
    inter: &DVector<f64>,
    centroid: &DVector<f64>,
    transform: &CbtTransform,
    input_blocks: &[Matrix2<f64>],
) -> Result<Vec<TorqueInput>> {
    let n = transform.robots();
    let mut f = Vec::with_capacity(2 * n);
    f.extend(intra.iter());
    f.extend(inter.iter());
    f.extend(centroid.iter());
    recover_torques(&DVector::from_vec(f), transform, input_blocks)
}

pub fn recover_torques(
    f: &DVector<f64>,
    transform: &CbtTransform,
    input_blocks: &[Matrix2<f64>],
) -> Result<Vec<TorqueInput>> {
    let n = transform.robots();
    if input_blocks.len() != n {
        return Err(Error::Dimension {
            expected: n,
            actual: input_blocks.len(),
        });
    }
    let accel = transform.apply_inverse(f)?;
    input_blocks
        .iter()
        .enumerate()
        .map(|(i, b)| {
            let det = b.determinant();
            let scale = b.abs().max().powi(2);
            if !det.is_finite() || det.abs() <= 1e-12 * scale {
                return Err(Error::SingularInput { robot: i, det });
            }
            let inv = b.try_inverse().ok_or(Error::SingularInput { robot: i, det })?;
            let u = inv * Vector2::new(accel[2 * i], accel[2 * i + 1]);
            Ok(TorqueInput::new(u.x, u.y))
        })
        .collect()
}

/// Lyapunov bound on the surface-reach time, `2·time_scale·√V₀ / δ`.
pub fn settling_time_bound(block: Block, v0: f64, gains: &ControllerGains) -> f64 {
    2.0 * gains.time_scale(block) * v0.max(0.0).sqrt() / gains.reach.get(block)
}
