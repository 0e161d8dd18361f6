//! Closed-loop simulation of the robot team.
//!
//! Each step evaluates the controller at the current state, recovers wheel
//! torques, and holds them constant while the integrator advances every
//! robot by one step.

use log::debug;
use nalgebra::{DVector, Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::cbt::{Block, CbtTransform, GroupPartition};
use crate::collision::{self, PotentialBlocks, PotentialParams};
use crate::config::ScenarioConfig;
use crate::dynamics::{eval_matrix_a, eval_matrix_b, eval_vector_c, robot_accel, RobotParams, RobotState, TorqueInput};
use crate::error::{Error, Result};
use crate::reference::DesiredTrajectory;
use crate::smc::{self, ControllerGains, SlidingState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Classical fourth-order Runge-Kutta.
    Rk4,
    /// Velocity first, then position with the updated velocity.
    SemiImplicitEuler,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IntegratorSettings {
    pub scheme: Scheme,
    /// Step size `h` in s.
    pub step: f64,
    /// Duration `T` in s.
    pub duration: f64,
    /// Full state is recorded every `record_stride` steps.
    #[serde(default = "one")]
    pub record_stride: usize,
}

fn one() -> usize {
    1
}

impl Default for IntegratorSettings {
    fn default() -> Self {
        Self {
            scheme: Scheme::Rk4,
            step: 1e-3,
            duration: 20.0,
            record_stride: 1,
        }
    }
}

impl IntegratorSettings {
    /// Number of integration steps, `floor(T / h)`.
    pub fn steps(&self) -> usize {
        (self.duration / self.step + 1e-9).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(Error::config("integrator.step", format!("must be > 0, got {}", self.step)));
        }
        if !(self.duration.is_finite() && self.duration > self.step) {
            return Err(Error::config(
                "integrator.duration",
                format!("must exceed the step {}, got {}", self.step, self.duration),
            ));
        }
        if self.record_stride == 0 {
            return Err(Error::config("integrator.record_stride", "must be >= 1"));
        }
        Ok(())
    }
}

/// Advances every robot by one step with the torques held constant.
pub fn integrate_step(
    states: &[RobotState],
    params: &[RobotParams],
    torques: &[TorqueInput],
    h: f64,
    scheme: Scheme,
) -> Vec<RobotState> {
    states
        .iter()
        .zip(params)
        .zip(torques)
        .map(|((s, p), u)| match scheme {
            Scheme::SemiImplicitEuler => {
                let (acc, heading_acc) = robot_accel(s, u, p);
                let velocity = s.velocity + acc * h;
                let heading_rate = s.heading_rate + heading_acc * h;
                RobotState {
                    position: s.position + velocity * h,
                    velocity,
                    heading: s.heading + heading_rate * h,
                    heading_rate,
                }
            }
            Scheme::Rk4 => rk4_robot(s, u, p, h),
        })
        .collect()
}

fn rk4_robot(s: &RobotState, u: &TorqueInput, p: &RobotParams, h: f64) -> RobotState {
    let deriv = |st: &RobotState| {
        let (acc, heading_acc) = robot_accel(st, u, p);
        RobotState {
            position: st.velocity,
            velocity: acc,
            heading: st.heading_rate,
            heading_rate: heading_acc,
        }
    };
    let shift = |st: &RobotState, d: &RobotState, k: f64| RobotState {
        position: st.position + d.position * k,
        velocity: st.velocity + d.velocity * k,
        heading: st.heading + d.heading * k,
        heading_rate: st.heading_rate + d.heading_rate * k,
    };
    let k1 = deriv(s);
    let k2 = deriv(&shift(s, &k1, h / 2.0));
    let k3 = deriv(&shift(s, &k2, h / 2.0));
    let k4 = deriv(&shift(s, &k3, h));
    RobotState {
        position: s.position + (k1.position + (k2.position + k3.position) * 2.0 + k4.position) * (h / 6.0),
        velocity: s.velocity + (k1.velocity + (k2.velocity + k3.velocity) * 2.0 + k4.velocity) * (h / 6.0),
        heading: s.heading + (k1.heading + 2.0 * (k2.heading + k3.heading) + k4.heading) * (h / 6.0),
        heading_rate: s.heading_rate
            + (k1.heading_rate + 2.0 * (k2.heading_rate + k3.heading_rate) + k4.heading_rate) * (h / 6.0),
    }
}

pub(crate) fn stack(vs: impl IntoIterator<Item = Vector2<f64>>) -> DVector<f64> {
    DVector::from_vec(vs.into_iter().flat_map(|v| [v.x, v.y]).collect())
}

pub(crate) fn unstack(v: &DVector<f64>) -> Vec<Vector2<f64>> {
    v.as_slice().chunks_exact(2).map(|c| Vector2::new(c[0], c[1])).collect()
}

pub fn min_pairwise_distance(positions: &[Vector2<f64>]) -> f64 {
    let mut best = f64::INFINITY;
    for i in 0..positions.len() {
        for j in i + 1..positions.len() {
            best = best.min((positions[i] - positions[j]).norm());
        }
    }
    best
}

/// Everything the controller computed at one instant.
#[derive(Debug, Clone)]
pub struct ControlOutput {
    pub torques: Vec<TorqueInput>,
    pub z: DVector<f64>,
    pub z_dot: DVector<f64>,
    /// `Z − Z_d`.
    pub error: DVector<f64>,
    pub sliding: SlidingState,
    pub potential: Option<PotentialBlocks>,
    pub potential_rate: Option<PotentialBlocks>,
}

/// The three sliding mode laws plus optional collision avoidance.
#[derive(Debug, Clone)]
pub struct FormationController {
    pub transform: CbtTransform,
    pub params: Vec<RobotParams>,
    pub gains: ControllerGains,
    pub desired: DesiredTrajectory,
    pub potential: Option<PotentialParams>,
}

impl FormationController {
    /// Controller evaluated from physical states: `Z = Φ·X`, drift
    /// `P·Ż + R = Φ·(A·Ẋ + C)`.
    pub fn evaluate(&self, t: f64, states: &[RobotState]) -> Result<ControlOutput> {
        let x = stack(states.iter().map(|s| s.position));
        let x_dot = stack(states.iter().map(|s| s.velocity));
        let free = stack(states.iter().zip(&self.params).map(|(s, p)| {
            eval_matrix_a(s.heading, s.heading_rate) * s.velocity + eval_vector_c(s.heading, s.heading_rate, p)
        }));
        let z = self.transform.apply(&x)?;
        let z_dot = self.transform.apply(&x_dot)?;
        let drift = self.transform.apply(&free)?;
        let positions: Vec<_> = states.iter().map(|s| s.position).collect();
        let velocities: Vec<_> = states.iter().map(|s| s.velocity).collect();
        let b: Vec<_> = self.input_blocks(states.iter().map(|s| s.heading));
        self.control(t, z, z_dot, &drift, &positions, &velocities, &b)
    }

    pub fn input_blocks(&self, headings: impl Iterator<Item = f64>) -> Vec<Matrix2<f64>> {
        headings.zip(&self.params).map(|(th, p)| eval_matrix_b(th, p)).collect()
    }

    /// Control law in shape coordinates. `drift` is `P·Ż + R`; positions and
    /// velocities feed the avoidance potential.
    #[allow(clippy::too_many_arguments)]
    pub fn control(
        &self,
        t: f64,
        z: DVector<f64>,
        z_dot: DVector<f64>,
        drift: &DVector<f64>,
        positions: &[Vector2<f64>],
        velocities: &[Vector2<f64>],
        input_blocks: &[Matrix2<f64>],
    ) -> Result<ControlOutput> {
        let error = &z - self.desired.position(t);
        let error_rate = &z_dot - self.desired.velocity(t);
        let desired_accel = self.desired.acceleration(t);

        let (potential, potential_rate) = match &self.potential {
            Some(p) => (
                Some(collision::transformed_potential(
                    &collision::avoidance_inputs(positions, p),
                    &self.transform,
                )?),
                Some(collision::potential_rate(positions, velocities, &self.transform, p)?),
            ),
            None => (None, None),
        };
        let sliding = smc::sliding_surfaces(
            &self.transform,
            &error,
            &error_rate,
            &self.gains,
            potential.as_ref().map(|p| &p.stacked),
        )?;

        let mut f = DVector::zeros(z.len());
        for block in Block::ALL {
            let range = self.transform.stacked_range(block);
            let rows = |v: &DVector<f64>| v.rows_range(range.clone()).into_owned();
            let rate = potential_rate.as_ref().map(|p| p.block(block).clone());
            let u = smc::equivalent_control_with_drift(
                block,
                &self.gains,
                &rows(&error_rate),
                &rows(drift),
                &rows(&desired_accel),
                rate.as_ref(),
            ) + smc::reaching_control(block, sliding.block(block), &self.gains);
            f.rows_range_mut(range).copy_from(&u);
        }
        let torques = smc::recover_torques(&f, &self.transform, input_blocks)?;
        Ok(ControlOutput {
            torques,
            z,
            z_dot,
            error,
            sliding,
            potential,
            potential_rate,
        })
    }

    /// Euclidean norm of each block of a stacked vector.
    pub fn block_norms(&self, v: &DVector<f64>) -> [f64; 3] {
        Block::ALL.map(|b| v.rows_range(self.transform.stacked_range(b)).norm())
    }
}

/// Full state at a recorded instant.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub t: f64,
    pub states: Vec<RobotState>,
    pub torques: Vec<TorqueInput>,
    pub z: DVector<f64>,
    pub z_dot: DVector<f64>,
    pub sliding: DVector<f64>,
    pub error_norms: [f64; 3],
    pub min_distance: f64,
}

/// Per-block scalars recorded at every integration step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlockSample {
    pub t: f64,
    pub error_norm: [f64; 3],
    pub sliding_norm: [f64; 3],
    /// `‖s‖_∞` per block.
    pub sliding_max: [f64; 3],
    pub min_distance: f64,
    /// `‖dF_pot/dt‖_∞` per block, zero when collision mode is off.
    pub potential_rate_max: [f64; 3],
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    pub partition: GroupPartition,
    pub step: f64,
    pub gains: ControllerGains,
    pub collision: bool,
    pub rate_bound: Option<[f64; 3]>,
    /// Recorded every `record_stride` steps and at the final step.
    pub samples: Vec<Sample>,
    /// Recorded at every step.
    pub blocks: Vec<BlockSample>,
}

impl SimResult {
    pub fn min_distance(&self) -> f64 {
        self.blocks.iter().map(|b| b.min_distance).fold(f64::INFINITY, f64::min)
    }

    pub fn final_sample(&self) -> &Sample {
        self.samples.last().expect("a result always holds the initial sample")
    }
}

/// A configured closed loop ready to run from any initial state.
#[derive(Debug, Clone)]
pub struct Simulation {
    pub controller: FormationController,
    pub integrator: IntegratorSettings,
    pub rate_bound: Option<[f64; 3]>,
}

impl Simulation {
    pub fn new(config: &ScenarioConfig) -> Result<Self> {
        config.validate()?;
        let transform = CbtTransform::new(&config.partition)?;
        let basis = config.formation.basis(&config.partition)?;
        let desired = DesiredTrajectory::from_basis(&transform, &basis, config.trajectory)?;
        let potential = config.collision.enabled.then_some(config.potential);
        let rate_bound = potential
            .as_ref()
            .map(|p| p.rate_bound.unwrap_or_else(|| collision::estimate_rate_bound(&transform, p)));
        if let Some(bound) = rate_bound {
            let checks = collision::check_gain_condition(&config.gains, bound);
            for c in checks.iter().filter(|c| !c.passed) {
                if config.collision.override_gain_check {
                    log::warn!(
                        "collision gain condition violated for {} block (margin {:.4}); continuing on override",
                        c.block.name(),
                        c.margin
                    );
                } else {
                    return Err(Error::config(
                        format!("gains.reach.{}", c.block.name()),
                        format!(
                            "collision mode requires reaching gain > rate bound {:.4} + margin (short by {:.4}); \
                             raise the gain or set collision.override_gain_check",
                            bound[c.block.index()],
                            -c.margin
                        ),
                    ));
                }
            }
        }
        Ok(Self {
            controller: FormationController {
                transform,
                params: config.robots.clone(),
                gains: config.gains,
                desired,
                potential,
            },
            integrator: config.integrator,
            rate_bound,
        })
    }

    pub fn run(&self, initial: &[RobotState]) -> Result<SimResult> {
        let ctl = &self.controller;
        let n = ctl.transform.robots();
        if initial.len() != n {
            return Err(Error::Dimension {
                expected: n,
                actual: initial.len(),
            });
        }
        let h = self.integrator.step;
        let steps = self.integrator.steps();
        let stride = self.integrator.record_stride;
        debug!("running {steps} steps of {h} s for {n} robots");

        let mut samples = Vec::with_capacity(steps / stride + 2);
        let mut blocks = Vec::with_capacity(steps + 1);
        let mut states = initial.to_vec();
        for k in 0..=steps {
            let t = k as f64 * h;
            let out = ctl.evaluate(t, &states)?;
            if out.torques.iter().any(|u| !(u.tau_left.is_finite() && u.tau_right.is_finite())) {
                return Err(Error::Divergence { step: k, time: t });
            }
            let positions: Vec<_> = states.iter().map(|s| s.position).collect();
            let min_distance = min_pairwise_distance(&positions);
            let error_norm = ctl.block_norms(&out.error);
            blocks.push(BlockSample {
                t,
                error_norm,
                sliding_norm: Block::ALL.map(|b| out.sliding.block(b).norm()),
                sliding_max: Block::ALL.map(|b| out.sliding.block(b).amax()),
                min_distance,
                potential_rate_max: out.potential_rate.as_ref().map_or([0.0; 3], |r| r.block_max()),
            });
            if k % stride == 0 || k == steps {
                samples.push(Sample {
                    t,
                    states: states.clone(),
                    torques: out.torques.clone(),
                    z: out.z.clone(),
                    z_dot: out.z_dot.clone(),
                    sliding: out.sliding.stacked(),
                    error_norms: error_norm,
                    min_distance,
                });
            }
            if k == steps {
                break;
            }
            states = integrate_step(&states, &ctl.params, &out.torques, h, self.integrator.scheme);
            if !states.iter().all(RobotState::is_finite) {
                return Err(Error::Divergence {
                    step: k + 1,
                    time: (k + 1) as f64 * h,
                });
            }
        }
        Ok(SimResult {
            partition: ctl.transform.partition().clone(),
            step: h,
            gains: ctl.gains,
            collision: ctl.potential.is_some(),
            rate_bound: self.rate_bound,
            samples,
            blocks,
        })
    }
}

/// Runs a scenario from its configured initial conditions.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimResult> {
    let sim = Simulation::new(config)?;
    sim.run(&config.initial_states()?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn zero_dynamics_leave_state_unchanged() {
        let p = [RobotParams::default(); 2];
        let s = [
            RobotState::at_rest(Vector2::new(1.0, 2.0), 0.3),
            RobotState::at_rest(Vector2::new(-1.0, 0.5), -2.0),
        ];
        let u = [TorqueInput::default(); 2];
        for scheme in [Scheme::Rk4, Scheme::SemiImplicitEuler] {
            assert_eq!(integrate_step(&s, &p, &u, 0.01, scheme), s.to_vec());
        }
    }

    #[test]
    fn rk4_is_exact_for_constant_acceleration() {
        let p = RobotParams::default();
        // equal torques: no rotation, constant forward push
        let u = TorqueInput::new(0.05, 0.05);
        let s = RobotState {
            position: Vector2::new(0.5, -0.5),
            velocity: Vector2::new(0.3, 0.1),
            heading: 0.6,
            heading_rate: 0.0,
        };
        let (acc, _) = robot_accel(&s, &u, &p);
        let h = 0.05;
        let next = integrate_step(&[s], &[p], &[u], h, Scheme::Rk4)[0];
        let expected = s.position + s.velocity * h + acc * (0.5 * h * h);
        assert_relative_eq!(next.position, expected, epsilon = 1e-14);
        assert_relative_eq!(next.velocity, s.velocity + acc * h, epsilon = 1e-14);
        assert_eq!(next.heading, s.heading);
    }

    #[test]
    fn min_distance_of_three() {
        let pos = [Vector2::new(0.0, 0.0), Vector2::new(3.0, 4.0), Vector2::new(0.0, 1.5)];
        assert_eq!(min_pairwise_distance(&pos), 1.5);
    }

    #[test]
    fn stack_round_trip() {
        let v = vec![Vector2::new(1.0, 2.0), Vector2::new(3.0, 4.0)];
        assert_eq!(unstack(&stack(v.clone())), v);
    }
}
