//! Homographies in row-vector form, `(x', y', w') = (x, y, 1) · H`.

use nalgebra::{DMatrix, Matrix3};

use super::Keypoint;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Homography {
    m: Matrix3<f64>,
}

impl Homography {
    pub fn identity() -> Self {
        Self { m: Matrix3::identity() }
    }

    /// Builds from row-major entries and scales so `h33 = 1`.
    pub fn from_rows(rows: [[f64; 3]; 3]) -> Result<Self> {
        let m = Matrix3::from_fn(|i, j| rows[i][j]);
        Self::from_matrix(m)
    }

    fn from_matrix(m: Matrix3<f64>) -> Result<Self> {
        if m.iter().any(|v| !v.is_finite()) {
            return Err(Error::Degenerate("homography has non-finite entries".into()));
        }
        let m = if m[(2, 2)].abs() > 1e-12 { m / m[(2, 2)] } else { m };
        let h = Self { m };
        h.check_invertible()?;
        Ok(h)
    }

    fn check_invertible(&self) -> Result<()> {
        let sv = self.m.singular_values();
        let (max, min) = (sv.max(), sv.min());
        if !(min > 1e-12 * max.max(1.0)) {
            return Err(Error::Degenerate("homography is singular".into()));
        }
        Ok(())
    }

    pub fn rows(&self) -> [[f64; 3]; 3] {
        let mut r = [[0.0; 3]; 3];
        for (i, row) in r.iter_mut().enumerate() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = self.m[(i, j)];
            }
        }
        r
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.m[(i, j)]
    }

    pub fn project(&self, x: f64, y: f64) -> (f64, f64) {
        let m = &self.m;
        let u = x * m[(0, 0)] + y * m[(1, 0)] + m[(2, 0)];
        let v = x * m[(0, 1)] + y * m[(1, 1)] + m[(2, 1)];
        let w = x * m[(0, 2)] + y * m[(1, 2)] + m[(2, 2)];
        (u / w, v / w)
    }

    pub fn inverse(&self) -> Result<Homography> {
        let inv = self
            .m
            .try_inverse()
            .ok_or_else(|| Error::Degenerate("homography is singular".into()))?;
        Self::from_matrix(inv)
    }

    /// Applies `self` then `other`.
    pub fn then(&self, other: &Homography) -> Result<Homography> {
        Self::from_matrix(self.m * other.m)
    }

    /// Rotation angle of the linear part in degrees, for similarity-like
    /// matrices `[[c, s], [−s, c]]`.
    pub fn rotation_deg(&self) -> f64 {
        self.m[(0, 1)].atan2(self.m[(0, 0)]).to_degrees()
    }
}

fn translation(tx: f64, ty: f64) -> Matrix3<f64> {
    Matrix3::new(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, tx, ty, 1.0)
}

/// Rotation by `theta_deg` about `center`: `x' = x·cos θ − y·sin θ`,
/// `y' = x·sin θ + y·cos θ` relative to the center.
pub fn rotation_homography(theta_deg: f64, center: (f64, f64)) -> Homography {
    let (s, c) = theta_deg.to_radians().sin_cos();
    let r = Matrix3::new(c, s, 0.0, -s, c, 0.0, 0.0, 0.0, 1.0);
    let m = translation(-center.0, -center.1) * r * translation(center.0, center.1);
    Homography { m }
}

/// Pixel-center-aligned uniform scaling, `x' = s·x + (s − 1)/2`.
pub fn scale_homography(scale: f64) -> Result<Homography> {
    if !(scale > 0.0 && scale.is_finite()) {
        return Err(Error::invalid("scale must be positive"));
    }
    let t = 0.5 * (scale - 1.0);
    Ok(Homography {
        m: Matrix3::new(scale, 0.0, 0.0, 0.0, scale, 0.0, t, t, 1.0),
    })
}

#[derive(Clone, Copy, Debug)]
pub struct HomographyFit {
    pub homography: Homography,
    /// RMS projection error over the input pairs, in pixels.
    pub rms_residual: f64,
    pub max_residual: f64,
}

/// Least-squares `Ĥ = A⁺B` from rows `(x1, y1, 1)` and `(x2, y2, 1)`.
pub fn estimate_homography(pairs: &[((f64, f64), (f64, f64))]) -> Result<HomographyFit> {
    if pairs.len() < 3 {
        return Err(Error::Degenerate(format!(
            "need at least 3 point pairs, got {}",
            pairs.len()
        )));
    }
    let n = pairs.len();
    let a = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => pairs[i].0 .0,
        1 => pairs[i].0 .1,
        _ => 1.0,
    });
    let b = DMatrix::from_fn(n, 3, |i, j| match j {
        0 => pairs[i].1 .0,
        1 => pairs[i].1 .1,
        _ => 1.0,
    });
    let svd = a.clone().svd(true, true);
    let sv = &svd.singular_values;
    let smax = sv.max();
    if sv.iter().filter(|&&s| s > 1e-9 * smax.max(1.0)).count() < 3 {
        return Err(Error::Degenerate("point configuration is collinear".into()));
    }
    let pinv = svd
        .pseudo_inverse(1e-12 * smax)
        .map_err(|e| Error::Degenerate(e.to_string()))?;
    let h = pinv * b;
    let m = Matrix3::from_fn(|i, j| h[(i, j)]);
    let homography = Homography::from_matrix(m)?;
    let mut sq = 0.0;
    let mut max = 0.0f64;
    for &((x1, y1), (x2, y2)) in pairs {
        let (u, v) = homography.project(x1, y1);
        let e = (u - x2).hypot(v - y2);
        sq += e * e;
        max = max.max(e);
    }
    Ok(HomographyFit {
        homography,
        rms_residual: (sq / n as f64).sqrt(),
        max_residual: max,
    })
}

/// Fraction of keypoints re-detected under `h` (image 1 → image 2): points
/// of `kps2` are mapped back with `h⁻¹` and greedily paired, nearest first,
/// with distinct points of `kps1` closer than `t`. Returns
/// `pairs / min(n1, n2)`, or 0 when either set is empty.
pub fn repeatability(kps1: &[Keypoint], kps2: &[Keypoint], h: &Homography, t: f64) -> Result<f64> {
    let inv = h.inverse()?;
    if kps1.is_empty() || kps2.is_empty() {
        return Ok(0.0);
    }
    let back: Vec<(f64, f64)> = kps2.iter().map(|k| inv.project(k.x, k.y)).collect();
    let t2 = t * t;
    let mut cands = Vec::new();
    for (i, a) in kps1.iter().enumerate() {
        for (j, &(bx, by)) in back.iter().enumerate() {
            let d2 = (a.x - bx).powi(2) + (a.y - by).powi(2);
            if d2 < t2 {
                cands.push((d2, i, j));
            }
        }
    }
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let mut used1 = vec![false; kps1.len()];
    let mut used2 = vec![false; kps2.len()];
    let mut m = 0usize;
    for (_, i, j) in cands {
        if !used1[i] && !used2[j] {
            used1[i] = true;
            used2[j] = true;
            m += 1;
        }
    }
    Ok(m as f64 / kps1.len().min(kps2.len()) as f64)
}
