//! Real spherical harmonics up to degree 3, in the constant and sign
//! convention used by 3DGS renderers.

use crate::error::{Error, Result};
use crate::geometry::Vec3;
use crate::scalar::Real;

pub const MAX_DEGREE: u32 = 3;

pub const C0: f64 = 0.282_094_791_773_878_14;
pub const C1: f64 = 0.488_602_511_902_919_9;
pub const C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

/// SH basis of a fixed degree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ShBasis {
    degree: u32,
}

impl ShBasis {
    pub fn new(degree: u32) -> Result<Self> {
        if degree > MAX_DEGREE {
            return Err(Error::Config(format!(
                "SH degree {degree} is not supported (maximum {MAX_DEGREE})"
            )));
        }
        Ok(ShBasis { degree })
    }

    pub fn degree(&self) -> u32 {
        self.degree
    }

    /// Number of basis functions, `(N_l + 1)²`.
    pub fn len(&self) -> usize {
        ((self.degree + 1) * (self.degree + 1)) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Writes `Y_l^m(dir)` for all `(l, m)` into `out`; `dir` must be unit.
    pub fn eval_into<T: Real>(&self, dir: &Vec3<T>, out: &mut [T]) {
        debug_assert_eq!(out.len(), self.len());
        let [x, y, z] = *dir;
        let c = T::lit;
        out[0] = c(C0);
        if self.degree < 1 {
            return;
        }
        out[1] = -c(C1) * y;
        out[2] = c(C1) * z;
        out[3] = -c(C1) * x;
        if self.degree < 2 {
            return;
        }
        let (xx, yy, zz) = (x * x, y * y, z * z);
        let (xy, yz, xz) = (x * y, y * z, x * z);
        out[4] = c(C2[0]) * xy;
        out[5] = c(C2[1]) * yz;
        out[6] = c(C2[2]) * (c(2.0) * zz - xx - yy);
        out[7] = c(C2[3]) * xz;
        out[8] = c(C2[4]) * (xx - yy);
        if self.degree < 3 {
            return;
        }
        out[9] = c(C3[0]) * y * (c(3.0) * xx - yy);
        out[10] = c(C3[1]) * xy * z;
        out[11] = c(C3[2]) * y * (c(4.0) * zz - xx - yy);
        out[12] = c(C3[3]) * z * (c(2.0) * zz - c(3.0) * xx - c(3.0) * yy);
        out[13] = c(C3[4]) * x * (c(4.0) * zz - xx - yy);
        out[14] = c(C3[5]) * z * (xx - yy);
        out[15] = c(C3[6]) * x * (xx - c(3.0) * yy);
    }

    pub fn eval<T: Real>(&self, dir: &Vec3<T>) -> Vec<T> {
        let mut out = vec![T::zero(); self.len()];
        self.eval_into(dir, &mut out);
        out
    }
}
