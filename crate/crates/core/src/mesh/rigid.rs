//! Closed-form best-fit 2D rotation plus translation.

use serde::{Deserialize, Serialize};

use crate::autodiff::Real;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rigid2D {
    pub angle: f64,
    pub translation: [f64; 2],
}

impl Rigid2D {
    pub const IDENTITY: Rigid2D = Rigid2D {
        angle: 0.0,
        translation: [0.0, 0.0],
    };

    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let (s, c) = self.angle.sin_cos();
        [
            c * p[0] - s * p[1] + self.translation[0],
            s * p[0] + c * p[1] + self.translation[1],
        ]
    }

    pub fn residual(&self, src: &[[f64; 2]], dst: &[[f64; 2]]) -> f64 {
        src.iter()
            .zip(dst)
            .map(|(s, d)| {
                let m = self.apply(*s);
                (d[0] - m[0]).powi(2) + (d[1] - m[1]).powi(2)
            })
            .sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidFit {
    pub transform: Rigid2D,
    /// All source points coincide; the rotation is undetermined and set to 0.
    pub degenerate: bool,
}

fn centroid(p: &[[f64; 2]]) -> [f64; 2] {
    let n = p.len() as f64;
    let s = p.iter().fold([0.0, 0.0], |a, q| [a[0] + q[0], a[1] + q[1]]);
    [s[0] / n, s[1] / n]
}

/// Rotation and translation minimizing `Σ‖dst_k − A(src_k)‖²`.
pub fn best_fit_rigid_2d(src: &[[f64; 2]], dst: &[[f64; 2]]) -> RigidFit {
    assert_eq!(src.len(), dst.len());
    let (cs, cd) = (centroid(src), centroid(dst));
    let (mut dot, mut cross, mut spread) = (0.0, 0.0, 0.0);
    for (s, d) in src.iter().zip(dst) {
        let a = [s[0] - cs[0], s[1] - cs[1]];
        let b = [d[0] - cd[0], d[1] - cd[1]];
        dot += a[0] * b[0] + a[1] * b[1];
        cross += a[0] * b[1] - a[1] * b[0];
        spread += a[0].abs() + a[1].abs();
    }
    let degenerate = spread == 0.0;
    let angle = if degenerate { 0.0 } else { cross.atan2(dot) };
    let (sn, c) = angle.sin_cos();
    let rotated = [c * cs[0] - sn * cs[1], sn * cs[0] + c * cs[1]];
    RigidFit {
        transform: Rigid2D {
            angle,
            translation: [cd[0] - rotated[0], cd[1] - rotated[1]],
        },
        degenerate,
    }
}

/// Residual of the best rigid fit of a triangle, in closed form:
/// `Σ‖a‖² + Σ‖b‖² − 2·sqrt(C² + S²)` with centred source `a`, centred
/// destination `b`, `C = Σ a·b` and `S = Σ a×b`.
pub fn rigid_residual<T: Real>(src: &[[f64; 2]; 3], dst: &[[T; 2]; 3]) -> T {
    let cs = [
        (src[0][0] + src[1][0] + src[2][0]) / 3.0,
        (src[0][1] + src[1][1] + src[2][1]) / 3.0,
    ];
    let cdx = (dst[0][0] + dst[1][0] + dst[2][0]) / 3.0;
    let cdy = (dst[0][1] + dst[1][1] + dst[2][1]) / 3.0;
    let mut aa = 0.0;
    let mut bb = T::zero();
    let mut dot = T::zero();
    let mut cross = T::zero();
    for k in 0..3 {
        let a = [src[k][0] - cs[0], src[k][1] - cs[1]];
        let b = [dst[k][0] - cdx, dst[k][1] - cdy];
        aa += a[0] * a[0] + a[1] * a[1];
        bb += b[0].square() + b[1].square();
        dot += b[0] * a[0] + b[1] * a[1];
        cross += b[1] * a[0] - b[0] * a[1];
    }
    let r2 = dot.square() + cross.square();
    let fit = if r2.value() > 0.0 {
        r2.sqrt()
    } else {
        T::zero()
    };
    (bb + aa - fit * 2.0).relu()
}
