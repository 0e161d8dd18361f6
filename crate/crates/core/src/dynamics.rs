//! Torque-driven dynamics of a differential-drive wheeled mobile robot.
//!
//! The tracked point `p` sits at distance `d` ahead of the wheel axis. Its
//! acceleration is `p̈ = A(θ, θ̇)·ṗ + B(θ)·u + C(θ, θ̇)` with wheel torques
//! `u = [τ_r, τ_l]`, and the heading obeys `J·θ̈ = (R / r)·(τ_r − τ_l)` where
//! `J = I − m·d²`.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Physical constants of one robot.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotParams {
    /// Mass `m` in kg.
    pub mass: f64,
    /// Moment of inertia `I` in kg·m².
    pub moment_of_inertia: f64,
    /// Distance between the left and right wheels `R` in m.
    pub wheel_separation: f64,
    /// Wheel radius `r` in m.
    pub wheel_radius: f64,
    /// Distance `d` from the wheel axis to the center of mass in m.
    pub com_offset: f64,
}

impl Default for RobotParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            moment_of_inertia: 1.0,
            wheel_separation: 0.4,
            wheel_radius: 0.1,
            com_offset: 0.1,
        }
    }
}

impl RobotParams {
    /// Effective inertia `J = I − m·d²`.
    pub fn j_eff(&self) -> f64 {
        self.moment_of_inertia - self.mass * self.com_offset * self.com_offset
    }

    /// Closed-form determinant of the input matrix, `−2·d·R / (m·J·r²)`.
    pub fn input_determinant(&self) -> f64 {
        -2.0 * self.com_offset * self.wheel_separation
            / (self.mass * self.j_eff() * self.wheel_radius * self.wheel_radius)
    }

    /// Checks the invariants, reporting violations under `field` (e.g. `robots[2]`).
    pub fn validate(&self, field: &str) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("moment_of_inertia", self.moment_of_inertia),
            ("wheel_separation", self.wheel_separation),
            ("wheel_radius", self.wheel_radius),
        ];
        for (name, value) in positive {
            if !(value.is_finite() && value > 0.0) {
                return Err(Error::config(
                    format!("{field}.{name}"),
                    format!("must be finite and > 0, got {value}"),
                ));
            }
        }
        if !self.com_offset.is_finite() || self.com_offset == 0.0 {
            return Err(Error::config(
                format!("{field}.com_offset"),
                "must be finite and nonzero: torques cannot be recovered when the \
                 center of mass lies on the wheel axis",
            ));
        }
        let j = self.j_eff();
        if !j.is_finite() || j.abs() < 1e-12 {
            return Err(Error::config(
                format!("{field}.moment_of_inertia"),
                format!("effective inertia I - m*d^2 must be nonzero, got {j}"),
            ));
        }
        Ok(())
    }
}

/// Kinematic state of one robot.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobotState {
    pub position: Vector2<f64>,
    pub velocity: Vector2<f64>,
    pub heading: f64,
    pub heading_rate: f64,
}

impl RobotState {
    pub fn at_rest(position: Vector2<f64>, heading: f64) -> Self {
        Self {
            position,
            velocity: Vector2::zeros(),
            heading,
            heading_rate: 0.0,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.position.iter().all(|v| v.is_finite())
            && self.velocity.iter().all(|v| v.is_finite())
            && self.heading.is_finite()
            && self.heading_rate.is_finite()
    }
}

/// Right and left wheel torques in N·m.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct TorqueInput {
    pub tau_right: f64,
    pub tau_left: f64,
}

impl TorqueInput {
    pub fn new(tau_right: f64, tau_left: f64) -> Self {
        Self {
            tau_right,
            tau_left,
        }
    }

    pub fn as_vector(&self) -> Vector2<f64> {
        Vector2::new(self.tau_right, self.tau_left)
    }
}

pub fn eval_matrix_a(heading: f64, heading_rate: f64) -> Matrix2<f64> {
    let (s, c) = heading.sin_cos();
    Matrix2::new(
        -s * c * heading_rate,
        -s * s * heading_rate,
        c * c * heading_rate,
        s * c * heading_rate,
    )
}

pub fn eval_matrix_b(heading: f64, params: &RobotParams) -> Matrix2<f64> {
    let (s, c) = heading.sin_cos();
    let drive = 1.0 / (params.mass * params.wheel_radius);
    let turn = params.com_offset * params.wheel_separation / (params.j_eff() * params.wheel_radius);
    Matrix2::new(
        c * drive - turn * s,
        c * drive + turn * s,
        s * drive + turn * c,
        s * drive - turn * c,
    )
}

pub fn eval_vector_c(heading: f64, heading_rate: f64, params: &RobotParams) -> Vector2<f64> {
    let (s, c) = heading.sin_cos();
    let k = -params.com_offset * heading_rate * heading_rate;
    Vector2::new(k * c, k * s)
}

/// Heading acceleration `θ̈ = R·(τ_r − τ_l) / (J·r)`.
pub fn heading_accel(u: &TorqueInput, params: &RobotParams) -> f64 {
    params.wheel_separation / (params.j_eff() * params.wheel_radius) * (u.tau_right - u.tau_left)
}

/// Translational and heading acceleration of one robot.
pub fn robot_accel(state: &RobotState, u: &TorqueInput, params: &RobotParams) -> (Vector2<f64>, f64) {
    let a = eval_matrix_a(state.heading, state.heading_rate);
    let b = eval_matrix_b(state.heading, params);
    let c = eval_vector_c(state.heading, state.heading_rate, params);
    (a * state.velocity + b * u.as_vector() + c, heading_accel(u, params))
}

/// Stacked dynamics of `n` robots: `Ẍ = A·Ẋ + B·U + C` with block-diagonal
/// `A` and `B`.
#[derive(Debug, Clone)]
pub struct AugmentedSystem {
    pub x: DVector<f64>,
    pub x_dot: DVector<f64>,
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DVector<f64>,
    pub u: DVector<f64>,
}

impl AugmentedSystem {
    pub fn len(&self) -> usize {
        self.x.len() / 2
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Stacked accelerations `A·Ẋ + B·U + C`.
    pub fn accel(&self) -> DVector<f64> {
        &self.a * &self.x_dot + &self.b * &self.u + &self.c
    }
}

pub fn assemble_augmented(
    states: &[RobotState],
    params: &[RobotParams],
    torques: &[TorqueInput],
) -> Result<AugmentedSystem> {
    let n = states.len();
    if n == 0 {
        return Err(Error::config("robots", "at least one robot is required"));
    }
    if params.len() != n {
        return Err(Error::config(
            "robots",
            format!("{} parameter sets for {n} robots", params.len()),
        ));
    }
    if torques.len() != n {
        return Err(Error::config(
            "torques",
            format!("{} torque inputs for {n} robots", torques.len()),
        ));
    }
    let mut sys = AugmentedSystem {
        x: DVector::zeros(2 * n),
        x_dot: DVector::zeros(2 * n),
        a: DMatrix::zeros(2 * n, 2 * n),
        b: DMatrix::zeros(2 * n, 2 * n),
        c: DVector::zeros(2 * n),
        u: DVector::zeros(2 * n),
    };
    for (i, ((st, p), u)) in states.iter().zip(params).zip(torques).enumerate() {
        let k = 2 * i;
        sys.x.fixed_rows_mut::<2>(k).copy_from(&st.position);
        sys.x_dot.fixed_rows_mut::<2>(k).copy_from(&st.velocity);
        sys.a
            .fixed_view_mut::<2, 2>(k, k)
            .copy_from(&eval_matrix_a(st.heading, st.heading_rate));
        sys.b
            .fixed_view_mut::<2, 2>(k, k)
            .copy_from(&eval_matrix_b(st.heading, p));
        sys.c
            .fixed_rows_mut::<2>(k)
            .copy_from(&eval_vector_c(st.heading, st.heading_rate, p));
        sys.u.fixed_rows_mut::<2>(k).copy_from(&u.as_vector());
    }
    Ok(sys)
}
