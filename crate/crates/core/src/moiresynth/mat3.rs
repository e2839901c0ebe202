use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major 3×3 matrix in `f64`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Mat3(pub [[f64; 3]; 3]);

impl Mat3 {
    pub const IDENTITY: Mat3 = Mat3([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]]);

    pub fn diag(d: [f64; 3]) -> Self {
        Mat3([[d[0], 0.0, 0.0], [0.0, d[1], 0.0], [0.0, 0.0, d[2]]])
    }

    pub fn det(&self) -> f64 {
        let m = &self.0;
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    }

    /// Inverse via the adjugate; fails when `|det| < 1e-9`.
    pub fn inverse(&self) -> Result<Self> {
        let d = self.det();
        if !d.is_finite() || d.abs() < 1e-9 {
            return Err(Error::Synth(format!("singular 3×3 matrix (det = {d:e})")));
        }
        let m = &self.0;
        let mut inv = [[0.0; 3]; 3];
        for (r, row) in inv.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                // Cofactor of (c, r) gives the transposed adjugate entry.
                let (r0, r1) = ((c + 1) % 3, (c + 2) % 3);
                let (c0, c1) = ((r + 1) % 3, (r + 2) % 3);
                *v = (m[r0][c0] * m[r1][c1] - m[r0][c1] * m[r1][c0]) / d;
            }
        }
        Ok(Mat3(inv))
    }

    pub fn mul(&self, o: &Mat3) -> Mat3 {
        let mut out = [[0.0; 3]; 3];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = (0..3).map(|k| self.0[r][k] * o.0[k][c]).sum();
            }
        }
        Mat3(out)
    }

    pub fn apply(&self, v: [f64; 3]) -> [f64; 3] {
        let m = &self.0;
        [0, 1, 2].map(|r| m[r][0] * v[0] + m[r][1] * v[1] + m[r][2] * v[2])
    }

    /// Projective map of a 2-D point; `None` when it lands at infinity.
    pub fn project(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        let [u, v, w] = self.apply([x, y, 1.0]);
        (w.abs() > 1e-12).then(|| (u / w, v / w))
    }

    pub fn row_sums(&self) -> [f64; 3] {
        self.0.map(|r| r.iter().sum())
    }

    /// Scales every row to sum to one.
    pub fn row_normalized(&self) -> Result<Self> {
        let mut out = self.0;
        for row in &mut out {
            let s: f64 = row.iter().sum();
            if s.abs() < 1e-9 {
                return Err(Error::Synth("ccm row sums to zero".into()));
            }
            row.iter_mut().for_each(|v| *v /= s);
        }
        Ok(Mat3(out))
    }
}
