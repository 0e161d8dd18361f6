//! Cross-check between the physical and the transformed closed loop.
//!
//! The same scenario is integrated twice: once on robot positions, with the
//! shape coordinates obtained as `Φ·X`, and once directly on `Z` with
//! `Z̈ = P·Ż + Φ·B·U + R` and `P = Φ·A·Φ⁻¹` formed explicitly. Both runs use
//! the same integrator and control law, so they should agree up to
//! round-off.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::cbt::transform_dynamics;
use crate::config::ScenarioConfig;
use crate::dynamics::{assemble_augmented, heading_accel, RobotState, TorqueInput};
use crate::error::{Error, Result};
use crate::sim::{integrate_step, stack, unstack, Scheme, Simulation};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditReport {
    pub steps: usize,
    pub step: f64,
    /// `‖Φ·X_k − Z_k‖` at every step `k = 0..=steps`.
    pub deviations: Vec<f64>,
    pub max_deviation: f64,
}

/// State of the loop integrated in shape coordinates.
#[derive(Debug, Clone)]
struct ShapeState {
    z: DVector<f64>,
    z_dot: DVector<f64>,
    heading: Vec<f64>,
    heading_rate: Vec<f64>,
}

impl ShapeState {
    fn axpy(&self, d: &ShapeState, k: f64) -> ShapeState {
        ShapeState {
            z: &self.z + &d.z * k,
            z_dot: &self.z_dot + &d.z_dot * k,
            heading: self.heading.iter().zip(&d.heading).map(|(a, b)| a + b * k).collect(),
            heading_rate: self
                .heading_rate
                .iter()
                .zip(&d.heading_rate)
                .map(|(a, b)| a + b * k)
                .collect(),
        }
    }
}

struct ShapeLoop<'a> {
    sim: &'a Simulation,
}

impl ShapeLoop<'_> {
    /// Robot states reconstructed from the shape state (positions and
    /// velocities through `Φ⁻¹`).
    fn robot_states(&self, s: &ShapeState) -> Result<Vec<RobotState>> {
        let t = &self.sim.controller.transform;
        let x = unstack(&t.apply_inverse(&s.z)?);
        let v = unstack(&t.apply_inverse(&s.z_dot)?);
        Ok((0..x.len())
            .map(|i| RobotState {
                position: x[i],
                velocity: v[i],
                heading: s.heading[i],
                heading_rate: s.heading_rate[i],
            })
            .collect())
    }

    /// `P·Ż + R` and `Φ·B·U` at a shape state.
    fn terms(&self, s: &ShapeState, torques: &[TorqueInput]) -> Result<(DVector<f64>, DVector<f64>)> {
        let ctl = &self.sim.controller;
        let states = self.robot_states(s)?;
        let sys = assemble_augmented(&states, &ctl.params, torques)?;
        let dynamics = transform_dynamics(&ctl.transform, &sys.a, &sys.c)?;
        let drift = &dynamics.p * &s.z_dot + &dynamics.r;
        let input = ctl.transform.apply(&(&sys.b * &sys.u))?;
        Ok((drift, input))
    }

    fn control(&self, t: f64, s: &ShapeState) -> Result<Vec<TorqueInput>> {
        let ctl = &self.sim.controller;
        let states = self.robot_states(s)?;
        let zero = vec![TorqueInput::default(); states.len()];
        let (drift, _) = self.terms(s, &zero)?;
        let positions: Vec<_> = states.iter().map(|r| r.position).collect();
        let velocities: Vec<_> = states.iter().map(|r| r.velocity).collect();
        let b = ctl.input_blocks(s.heading.iter().copied());
        Ok(ctl
            .control(t, s.z.clone(), s.z_dot.clone(), &drift, &positions, &velocities, &b)?
            .torques)
    }

    fn deriv(&self, s: &ShapeState, torques: &[TorqueInput]) -> Result<ShapeState> {
        let (drift, input) = self.terms(s, torques)?;
        let params = &self.sim.controller.params;
        Ok(ShapeState {
            z: s.z_dot.clone(),
            z_dot: drift + input,
            heading: s.heading_rate.clone(),
            heading_rate: torques.iter().zip(params).map(|(u, p)| heading_accel(u, p)).collect(),
        })
    }

    fn step(&self, s: &ShapeState, torques: &[TorqueInput], h: f64, scheme: Scheme) -> Result<ShapeState> {
        match scheme {
            Scheme::SemiImplicitEuler => {
                let d = self.deriv(s, torques)?;
                let z_dot = &s.z_dot + &d.z_dot * h;
                let heading_rate: Vec<f64> =
                    s.heading_rate.iter().zip(&d.heading_rate).map(|(w, a)| w + a * h).collect();
                Ok(ShapeState {
                    z: &s.z + &z_dot * h,
                    z_dot,
                    heading: s.heading.iter().zip(&heading_rate).map(|(th, w)| th + w * h).collect(),
                    heading_rate,
                })
            }
            Scheme::Rk4 => {
                let k1 = self.deriv(s, torques)?;
                let k2 = self.deriv(&s.axpy(&k1, h / 2.0), torques)?;
                let k3 = self.deriv(&s.axpy(&k2, h / 2.0), torques)?;
                let k4 = self.deriv(&s.axpy(&k3, h), torques)?;
                Ok(s.axpy(&k1, h / 6.0)
                    .axpy(&k2, h / 3.0)
                    .axpy(&k3, h / 3.0)
                    .axpy(&k4, h / 6.0))
            }
        }
    }
}

/// Integrates the scenario for `steps` steps in both domains and reports the
/// largest `‖Φ·X − Z‖`.
pub fn domain_equivalence_audit(config: &ScenarioConfig, steps: usize) -> Result<AuditReport> {
    let sim = Simulation::new(config)?;
    let ctl = &sim.controller;
    let h = sim.integrator.step;
    let scheme = sim.integrator.scheme;
    let mut states = config.initial_states()?;
    let shape_loop = ShapeLoop { sim: &sim };
    let mut shape = ShapeState {
        z: ctl.transform.apply(&stack(states.iter().map(|s| s.position)))?,
        z_dot: ctl.transform.apply(&stack(states.iter().map(|s| s.velocity)))?,
        heading: states.iter().map(|s| s.heading).collect(),
        heading_rate: states.iter().map(|s| s.heading_rate).collect(),
    };

    let mut deviations = Vec::with_capacity(steps + 1);
    for k in 0..=steps {
        let mapped = ctl.transform.apply(&stack(states.iter().map(|s| s.position)))?;
        deviations.push((mapped - &shape.z).norm());
        if k == steps {
            break;
        }
        let t = k as f64 * h;
        let physical = ctl.evaluate(t, &states)?;
        states = integrate_step(&states, &ctl.params, &physical.torques, h, scheme);
        let torques = shape_loop.control(t, &shape)?;
        shape = shape_loop.step(&shape, &torques, h, scheme)?;
        if !shape.z.iter().all(|v| v.is_finite()) || !states.iter().all(RobotState::is_finite) {
            return Err(Error::Divergence {
                step: k + 1,
                time: (k + 1) as f64 * h,
            });
        }
    }
    let max_deviation = deviations.iter().copied().fold(0.0, f64::max);
    Ok(AuditReport {
        steps,
        step: h,
        deviations,
        max_deviation,
    })
}
