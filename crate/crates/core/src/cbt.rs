//! Centroid based transformation of a multi-group robot team.
//!
//! Positions of `n` robots split into `m` groups are mapped to
//! `Z = [Z_1, …, Z_m, Z_r, z_c]`: Jacobi shape vectors inside every group,
//! Jacobi shape vectors over the group centroids, and the overall centroid.
//! The coefficient matrix `Φ` is `n × n`; it acts on stacked planar vectors
//! as `Φ ⊗ I₂`, treating the x and y coordinates identically.

use std::f64::consts::FRAC_1_SQRT_2;
use std::ops::Range;

use nalgebra::{DMatrix, DVector, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sizes of the robot groups. Robots are numbered group by group.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GroupPartition {
    sizes: Vec<usize>,
}

impl GroupPartition {
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::config("partition", "at least one group is required"));
        }
        for (i, &k) in sizes.iter().enumerate() {
            if k < 2 {
                return Err(Error::config(
                    format!("partition[{i}]"),
                    format!("group needs at least 2 robots to define a shape vector, got {k}"),
                ));
            }
        }
        Ok(Self { sizes })
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Total number of robots.
    pub fn robots(&self) -> usize {
        self.sizes.iter().sum()
    }

    /// Number of groups.
    pub fn groups(&self) -> usize {
        self.sizes.len()
    }

    /// Robot index range of group `g`.
    pub fn members(&self, g: usize) -> Range<usize> {
        let start: usize = self.sizes[..g].iter().sum();
        start..start + self.sizes[g]
    }

    pub(crate) fn validate(&self) -> Result<()> {
        Self::new(self.sizes.clone()).map(|_| ())
    }
}

/// The three subsystems produced by the transformation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    Intra,
    Inter,
    Centroid,
}

impl Block {
    pub const ALL: [Block; 3] = [Block::Intra, Block::Inter, Block::Centroid];

    pub fn index(self) -> usize {
        match self {
            Block::Intra => 0,
            Block::Inter => 1,
            Block::Centroid => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::Intra => "intra",
            Block::Inter => "inter",
            Block::Centroid => "centroid",
        }
    }
}

/// Weights of the Jacobi vectors. Vector `j` of a `k`-body Jacobi set is
/// `w_j·(p_{j+1} − mean(p_1…p_j))`; `w_1` is `intra_lead` inside a group and
/// `inter_lead` over group centroids, every later weight is `tail`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JacobiWeights {
    pub intra_lead: f64,
    pub inter_lead: f64,
    pub tail: f64,
}

impl Default for JacobiWeights {
    /// Reproduces `z_11 = (p_12 − p_11)/√2` for robots and
    /// `z_r1 = (μ_1 − μ_2)/√2` for group centroids.
    fn default() -> Self {
        Self {
            intra_lead: FRAC_1_SQRT_2,
            inter_lead: -FRAC_1_SQRT_2,
            tail: 1.0,
        }
    }
}

fn weighted_jacobi_rows(k: usize, lead: f64, tail: f64) -> Result<DMatrix<f64>> {
    if k < 2 {
        return Err(Error::config(
            "partition",
            format!("Jacobi vectors need at least 2 bodies, got {k}"),
        ));
    }
    let mut rows = DMatrix::zeros(k - 1, k);
    for j in 1..k {
        let w = if j == 1 { lead } else { tail };
        let share = -w / j as f64;
        for col in 0..j {
            rows[(j - 1, col)] = share;
        }
        rows[(j - 1, j)] = w;
    }
    Ok(rows)
}

/// Jacobi coefficient rows for `k` bodies: `(k − 1) × k`, every row sums to 0.
pub fn jacobi_rows(k: usize) -> Result<DMatrix<f64>> {
    weighted_jacobi_rows(k, FRAC_1_SQRT_2, 1.0)
}

/// The transformation matrix `Φ` with its row partition and cached inverse.
#[derive(Debug, Clone)]
pub struct CbtTransform {
    partition: GroupPartition,
    phi: DMatrix<f64>,
    phi_inv: DMatrix<f64>,
}

impl CbtTransform {
    pub fn new(partition: &GroupPartition) -> Result<Self> {
        Self::with_weights(partition, JacobiWeights::default())
    }

    pub fn with_weights(partition: &GroupPartition, weights: JacobiWeights) -> Result<Self> {
        let n = partition.robots();
        let m = partition.groups();
        let mut phi = DMatrix::zeros(n, n);
        let mut row = 0;
        for g in 0..m {
            let cols = partition.members(g);
            let jac = weighted_jacobi_rows(cols.len(), weights.intra_lead, weights.tail)?;
            phi.view_mut((row, cols.start), jac.shape()).copy_from(&jac);
            row += jac.nrows();
        }
        if m > 1 {
            let jac = weighted_jacobi_rows(m, weights.inter_lead, weights.tail)?;
            for k in 0..m - 1 {
                for g in 0..m {
                    let cols = partition.members(g);
                    let share = jac[(k, g)] / cols.len() as f64;
                    for col in cols {
                        phi[(row, col)] = share;
                    }
                }
                row += 1;
            }
        }
        phi.row_mut(row).fill(1.0 / n as f64);
        debug_assert_eq!(row + 1, n);

        let phi_inv = phi.clone().lu().try_inverse().ok_or(Error::SingularTransform)?;
        let residual = (&phi * &phi_inv - DMatrix::identity(n, n)).abs().max();
        if !residual.is_finite() || residual > 1e-8 {
            return Err(Error::SingularTransform);
        }
        Ok(Self {
            partition: partition.clone(),
            phi,
            phi_inv,
        })
    }

    pub fn partition(&self) -> &GroupPartition {
        &self.partition
    }

    pub fn robots(&self) -> usize {
        self.phi.nrows()
    }

    /// The `n × n` coefficient matrix.
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn inverse(&self) -> &DMatrix<f64> {
        &self.phi_inv
    }

    /// Coefficient rows of a block (one row per planar shape vector).
    pub fn coefficient_rows(&self, block: Block) -> Range<usize> {
        let n = self.robots();
        let m = self.partition.groups();
        match block {
            Block::Intra => 0..n - m,
            Block::Inter => n - m..n - 1,
            Block::Centroid => n - 1..n,
        }
    }

    /// Coefficient rows of the intra-group vectors of group `g`.
    pub fn group_rows(&self, g: usize) -> Range<usize> {
        let start: usize = self.partition.sizes()[..g].iter().map(|k| k - 1).sum();
        start..start + self.partition.sizes()[g] - 1
    }

    /// Entries of a block inside a stacked planar vector of length `2n`.
    pub fn stacked_range(&self, block: Block) -> Range<usize> {
        let r = self.coefficient_rows(block);
        2 * r.start..2 * r.end
    }

    /// `Φ ⊗ I₂` as a dense `2n × 2n` matrix.
    pub fn kron_matrix(&self) -> DMatrix<f64> {
        kron_i2(&self.phi)
    }

    pub fn kron_inverse(&self) -> DMatrix<f64> {
        kron_i2(&self.phi_inv)
    }

    /// Applies `Φ ⊗ I₂` to a stacked planar vector.
    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        apply_kron(&self.phi, x)
    }

    /// Applies `Φ⁻¹ ⊗ I₂` to a stacked planar vector.
    pub fn apply_inverse(&self, z: &DVector<f64>) -> Result<DVector<f64>> {
        apply_kron(&self.phi_inv, z)
    }

    pub fn to_shape(&self, x: &DVector<f64>) -> Result<ShapeCoordinates> {
        let z = self.apply(x)?;
        Ok(ShapeCoordinates::split(self, &z))
    }

    pub fn from_shape(&self, shape: &ShapeCoordinates) -> Result<DVector<f64>> {
        self.apply_inverse(&shape.stacked())
    }
}

fn kron_i2(m: &DMatrix<f64>) -> DMatrix<f64> {
    let (r, c) = m.shape();
    let mut out = DMatrix::zeros(2 * r, 2 * c);
    for i in 0..r {
        for j in 0..c {
            out[(2 * i, 2 * j)] = m[(i, j)];
            out[(2 * i + 1, 2 * j + 1)] = m[(i, j)];
        }
    }
    out
}

fn apply_kron(m: &DMatrix<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
    let n = m.ncols();
    if v.len() != 2 * n {
        return Err(Error::Dimension {
            expected: 2 * n,
            actual: v.len(),
        });
    }
    let mut out = DVector::zeros(2 * m.nrows());
    for i in 0..m.nrows() {
        let (mut sx, mut sy) = (0.0, 0.0);
        for j in 0..n {
            let w = m[(i, j)];
            sx += w * v[2 * j];
            sy += w * v[2 * j + 1];
        }
        out[2 * i] = sx;
        out[2 * i + 1] = sy;
    }
    Ok(out)
}

/// Shape vectors and centroid of a configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ShapeCoordinates {
    /// Intra-group vectors `Z_1 … Z_m`, length `2(n − m)`.
    pub intra: DVector<f64>,
    /// Inter-group vectors, length `2(m − 1)`.
    pub inter: DVector<f64>,
    pub centroid: Vector2<f64>,
}

impl ShapeCoordinates {
    pub fn split(transform: &CbtTransform, z: &DVector<f64>) -> Self {
        let intra = transform.stacked_range(Block::Intra);
        let inter = transform.stacked_range(Block::Inter);
        let c = transform.stacked_range(Block::Centroid).start;
        Self {
            intra: z.rows_range(intra).into_owned(),
            inter: z.rows_range(inter).into_owned(),
            centroid: Vector2::new(z[c], z[c + 1]),
        }
    }

    /// `[Z_s; Z_r; z_c]` as one vector of length `2n`.
    pub fn stacked(&self) -> DVector<f64> {
        let mut out = Vec::with_capacity(self.intra.len() + self.inter.len() + 2);
        out.extend(self.intra.iter());
        out.extend(self.inter.iter());
        out.extend(self.centroid.iter());
        DVector::from_vec(out)
    }

    /// Planar vector `k` of a block.
    pub fn vector(&self, block: Block, k: usize) -> Vector2<f64> {
        match block {
            Block::Intra => Vector2::new(self.intra[2 * k], self.intra[2 * k + 1]),
            Block::Inter => Vector2::new(self.inter[2 * k], self.inter[2 * k + 1]),
            Block::Centroid => self.centroid,
        }
    }
}

/// `P = (Φ⊗I₂)·A·(Φ⊗I₂)⁻¹` and `R = (Φ⊗I₂)·C` of the transformed dynamics
/// `Z̈ = P·Ż + F + R`.
#[derive(Debug, Clone)]
pub struct TransformedDynamics {
    pub p: DMatrix<f64>,
    pub r: DVector<f64>,
    blocks: [Range<usize>; 3],
}

impl TransformedDynamics {
    pub fn p_block(&self, block: Block) -> DMatrix<f64> {
        self.p.rows_range(self.blocks[block.index()].clone()).into_owned()
    }

    pub fn r_block(&self, block: Block) -> DVector<f64> {
        self.r.rows_range(self.blocks[block.index()].clone()).into_owned()
    }
}

pub fn transform_dynamics(
    transform: &CbtTransform,
    a: &DMatrix<f64>,
    c: &DVector<f64>,
) -> Result<TransformedDynamics> {
    let n2 = 2 * transform.robots();
    if a.shape() != (n2, n2) {
        return Err(Error::Dimension {
            expected: n2,
            actual: a.nrows(),
        });
    }
    let p = transform.kron_matrix() * a * transform.kron_inverse();
    let r = transform.apply(c)?;
    Ok(TransformedDynamics {
        p,
        r,
        blocks: Block::ALL.map(|b| transform.stacked_range(b)),
    })
}
