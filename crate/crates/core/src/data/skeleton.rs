//! Skeleton sequences: first-frame centering and random rotation.

use crate::error::{Error, Result};
use crate::numerics::{RngStream, Tensor2};

/// `3J x T` coordinates; rows are `x0, y0, z0, x1, y1, z1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct SkeletonSequence {
    frames: Tensor2,
}

/// Origin used by [`center_first_frame`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BodyCenter {
    /// Mean of all joints in the first frame.
    #[default]
    Centroid,
    Joint(usize),
}

impl SkeletonSequence {
    pub fn new(frames: Tensor2) -> Result<Self> {
        if frames.rows() == 0 || !frames.rows().is_multiple_of(3) {
            return Err(Error::InvalidArgument(format!(
                "skeleton input dimension {} is not a positive multiple of 3",
                frames.rows()
            )));
        }
        if frames.cols() == 0 {
            return Err(Error::EmptySequence);
        }
        Ok(Self { frames })
    }

    pub fn joints(&self) -> usize {
        self.frames.rows() / 3
    }

    pub fn num_frames(&self) -> usize {
        self.frames.cols()
    }

    pub fn frames(&self) -> &Tensor2 {
        &self.frames
    }

    pub fn into_frames(self) -> Tensor2 {
        self.frames
    }

    pub fn joint(&self, j: usize, t: usize) -> [f64; 3] {
        let f = &self.frames;
        [f.get(3 * j, t), f.get(3 * j + 1, t), f.get(3 * j + 2, t)]
    }
}

/// Subtracts the first-frame body center from every joint of every frame.
pub fn center_first_frame(seq: &SkeletonSequence, center: BodyCenter) -> Result<SkeletonSequence> {
    let j = seq.joints();
    let origin = match center {
        BodyCenter::Centroid => {
            let mut c = [0.0; 3];
            for i in 0..j {
                let p = seq.joint(i, 0);
                for a in 0..3 {
                    c[a] += p[a];
                }
            }
            c.map(|v| v / j as f64)
        }
        BodyCenter::Joint(i) if i < j => seq.joint(i, 0),
        BodyCenter::Joint(i) => {
            return Err(Error::InvalidArgument(format!(
                "center joint {i} out of range for {j} joints"
            )))
        }
    };
    let mut out = seq.frames.clone();
    for t in 0..out.cols() {
        for r in 0..out.rows() {
            out.set(r, t, out.get(r, t) - origin[r % 3]);
        }
    }
    Ok(SkeletonSequence { frames: out })
}

/// Augmentation range in degrees.
pub const MAX_ROTATION_DEG: f64 = 35.0;

/// `Rx(ax) * Ry(ay) * Rz(az)`, angles in radians, row-major.
pub fn rotation_matrix(ax: f64, ay: f64, az: f64) -> [[f64; 3]; 3] {
    let (sx, cx) = ax.sin_cos();
    let (sy, cy) = ay.sin_cos();
    let (sz, cz) = az.sin_cos();
    let rx = [[1.0, 0.0, 0.0], [0.0, cx, -sx], [0.0, sx, cx]];
    let ry = [[cy, 0.0, sy], [0.0, 1.0, 0.0], [-sy, 0.0, cy]];
    let rz = [[cz, -sz, 0.0], [sz, cz, 0.0], [0.0, 0.0, 1.0]];
    mat3_mul(&mat3_mul(&rx, &ry), &rz)
}

pub fn mat3_mul(a: &[[f64; 3]; 3], b: &[[f64; 3]; 3]) -> [[f64; 3]; 3] {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for k in 0..3 {
            out[i][k] = (0..3).map(|j| a[i][j] * b[j][k]).sum();
        }
    }
    out
}

/// Draws three angles uniformly in `±35°`.
pub fn random_rotation(rng: &mut RngStream) -> [[f64; 3]; 3] {
    let m = MAX_ROTATION_DEG.to_radians();
    let ax = rng.uniform_scalar(-m, m);
    let ay = rng.uniform_scalar(-m, m);
    let az = rng.uniform_scalar(-m, m);
    rotation_matrix(ax, ay, az)
}

pub fn rotate(seq: &SkeletonSequence, r: &[[f64; 3]; 3]) -> SkeletonSequence {
    let mut out = seq.frames.clone();
    for t in 0..out.cols() {
        for j in 0..seq.joints() {
            let p = seq.joint(j, t);
            for a in 0..3 {
                out.set(3 * j + a, t, r[a][0] * p[0] + r[a][1] * p[1] + r[a][2] * p[2]);
            }
        }
    }
    SkeletonSequence { frames: out }
}

/// One random rotation applied to every joint of every frame.
pub fn rotate_augment(seq: &SkeletonSequence, rng: &mut RngStream) -> SkeletonSequence {
    rotate(seq, &random_rotation(rng))
}
