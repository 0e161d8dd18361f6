//! Desired shape vectors and the centroid tracking trajectory.

use nalgebra::{DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::cbt::{Block, CbtTransform};
use crate::error::{Error, Result};

/// Desired path of the overall centroid with analytic derivatives.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CentroidTrajectory {
    /// `(x0 + speed·t, y0 + amplitude·sin(frequency·t))`.
    SineTrack {
        origin: [f64; 2],
        speed: f64,
        amplitude: f64,
        frequency: f64,
    },
    /// Fixed point.
    Stationary { position: [f64; 2] },
}

impl CentroidTrajectory {
    /// `z_c = [t; 30·sin(0.1·t)]`.
    pub fn default_sine_track() -> Self {
        CentroidTrajectory::SineTrack {
            origin: [0.0, 0.0],
            speed: 1.0,
            amplitude: 30.0,
            frequency: 0.1,
        }
    }

    pub fn position(&self, t: f64) -> Vector2<f64> {
        match *self {
            CentroidTrajectory::SineTrack {
                origin,
                speed,
                amplitude,
                frequency,
            } => Vector2::new(origin[0] + speed * t, origin[1] + amplitude * (frequency * t).sin()),
            CentroidTrajectory::Stationary { position } => Vector2::new(position[0], position[1]),
        }
    }

    pub fn velocity(&self, t: f64) -> Vector2<f64> {
        match *self {
            CentroidTrajectory::SineTrack {
                speed,
                amplitude,
                frequency,
                ..
            } => Vector2::new(speed, amplitude * frequency * (frequency * t).cos()),
            CentroidTrajectory::Stationary { .. } => Vector2::zeros(),
        }
    }

    pub fn acceleration(&self, t: f64) -> Vector2<f64> {
        match *self {
            CentroidTrajectory::SineTrack {
                amplitude, frequency, ..
            } => Vector2::new(0.0, -amplitude * frequency * frequency * (frequency * t).sin()),
            CentroidTrajectory::Stationary { .. } => Vector2::zeros(),
        }
    }

    /// Checks parameters and that the analytic derivatives agree with
    /// central differences of the position on `[0, horizon]`.
    pub fn validate(&self, horizon: f64) -> Result<()> {
        let finite = match *self {
            CentroidTrajectory::SineTrack {
                origin,
                speed,
                amplitude,
                frequency,
            } => origin.iter().chain([speed, amplitude, frequency].iter()).all(|v| v.is_finite()),
            CentroidTrajectory::Stationary { position } => position.iter().all(|v| v.is_finite()),
        };
        if !finite {
            return Err(Error::config("trajectory", "parameters must be finite"));
        }
        let h = 1e-4;
        for k in 0..=20 {
            let t = horizon.max(1.0) * k as f64 / 20.0;
            let fd_vel = (self.position(t + h) - self.position(t - h)) / (2.0 * h);
            let fd_acc = (self.velocity(t + h) - self.velocity(t - h)) / (2.0 * h);
            for (what, fd, exact) in [
                ("velocity", fd_vel, self.velocity(t)),
                ("acceleration", fd_acc, self.acceleration(t)),
            ] {
                if (fd - exact).norm() > 1e-6 * exact.norm().max(1.0) {
                    return Err(Error::config(
                        "trajectory",
                        format!("analytic {what} disagrees with finite differences at t = {t}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// `Z_d(t)`: constant intra/inter targets and the centroid trajectory.
#[derive(Debug, Clone, PartialEq)]
pub struct DesiredTrajectory {
    /// Stacked `[Z_sd; Z_rd]`, length `2(n − 1)`.
    shape: DVector<f64>,
    centroid: CentroidTrajectory,
}

impl DesiredTrajectory {
    /// Targets taken from a formation basis: `Z_d = (Φ ⊗ I₂)·ξ` with the
    /// centroid rows replaced by the tracking trajectory.
    pub fn from_basis(
        transform: &CbtTransform,
        basis: &DVector<f64>,
        centroid: CentroidTrajectory,
    ) -> Result<Self> {
        let z = transform.apply(basis)?;
        let shape_len = transform.stacked_range(Block::Centroid).start;
        Ok(Self {
            shape: z.rows(0, shape_len).into_owned(),
            centroid,
        })
    }

    pub fn shape_targets(&self) -> &DVector<f64> {
        &self.shape
    }

    pub fn centroid(&self) -> &CentroidTrajectory {
        &self.centroid
    }

    fn stack(&self, shape: impl Iterator<Item = f64>, c: Vector2<f64>) -> DVector<f64> {
        let mut v = Vec::with_capacity(self.shape.len() + 2);
        v.extend(shape);
        v.extend(c.iter());
        DVector::from_vec(v)
    }

    pub fn position(&self, t: f64) -> DVector<f64> {
        self.stack(self.shape.iter().copied(), self.centroid.position(t))
    }

    pub fn velocity(&self, t: f64) -> DVector<f64> {
        self.stack(std::iter::repeat_n(0.0, self.shape.len()), self.centroid.velocity(t))
    }

    pub fn acceleration(&self, t: f64) -> DVector<f64> {
        self.stack(std::iter::repeat_n(0.0, self.shape.len()), self.centroid.acceleration(t))
    }
}
