//! Euler-spiral corner blends.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::path::{ReferencePath, RotTerm};
use crate::geometry::Vec3;

/// Fresnel integrals `(C(z), S(z))` with the `π t²/2` kernel, by power
/// series. Accurate to ~1e-15 for |z| ≤ 1.5, which covers every blend.
pub fn fresnel(z: f64) -> (f64, f64) {
    let x = PI / 2.0 * z * z;
    let x2 = x * x;
    // C = z Σ (−1)ⁿ x²ⁿ / ((2n)! (4n+1)),  S = z Σ (−1)ⁿ x²ⁿ⁺¹ / ((2n+1)! (4n+3))
    let (mut c, mut s) = (0.0, 0.0);
    let mut term_c = 1.0; // x^{2n} / (2n)!
    let mut term_s = x; // x^{2n+1} / (2n+1)!
    for n in 0..40 {
        let nf = n as f64;
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        let dc = sign * term_c / (4.0 * nf + 1.0);
        let ds = sign * term_s / (4.0 * nf + 3.0);
        c += dc;
        s += ds;
        if dc.abs() < 1e-18 && ds.abs() < 1e-18 {
            break;
        }
        term_c *= x2 / ((2.0 * nf + 1.0) * (2.0 * nf + 2.0));
        term_s *= x2 / ((2.0 * nf + 2.0) * (2.0 * nf + 3.0));
    }
    (z * c, z * s)
}

/// Symmetric clothoid pair replacing the corner at `via_points[via]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Blend {
    pub via: usize,
    pub corner: Vec3,
    /// Path parameter of the corner.
    pub phi_corner: f64,
    /// Distance from the corner to each tangent point.
    pub tangent_length: f64,
    /// Clothoid scale `A` in `τ(s) = s² / (2A²)`.
    pub scale: f64,
    /// Turning angle of the corner in radians.
    pub turn: f64,
    pub dir_in: Vec3,
    pub dir_out: Vec3,
    normal_in: Vec3,
    normal_out: Vec3,
}

impl Blend {
    pub fn new(corner: Vec3, phi_corner: f64, via: usize, dir_in: Vec3, dir_out: Vec3, tangent_length: f64) -> Option<Self> {
        let turn = dir_in.dot(&dir_out).clamp(-1.0, 1.0).acos();
        if !(turn > 1e-9 && turn < PI - 1e-3 && tangent_length > 0.0) {
            return None;
        }
        let normal_in = (dir_out - dir_in * dir_in.dot(&dir_out)).normalize();
        let normal_out = (-dir_in + dir_out * dir_out.dot(&dir_in)).normalize();
        let (c, s) = fresnel((turn / PI).sqrt());
        let scale = tangent_length / (PI.sqrt() * (c + s * (turn / 2.0).tan()));
        Some(Self {
            via,
            corner,
            phi_corner,
            tangent_length,
            scale,
            turn,
            dir_in,
            dir_out,
            normal_in,
            normal_out,
        })
    }

    /// Arc length of one clothoid half.
    pub fn half_length(&self) -> f64 {
        self.scale * self.turn.sqrt()
    }

    /// Curvature at the blend midpoint, the largest along the blend.
    pub fn max_curvature(&self) -> f64 {
        self.turn.sqrt() / self.scale
    }

    pub fn phi_range(&self) -> (f64, f64) {
        (self.phi_corner - self.tangent_length, self.phi_corner + self.tangent_length)
    }

    pub fn start(&self) -> Vec3 {
        self.corner - self.tangent_length * self.dir_in
    }

    pub fn end(&self) -> Vec3 {
        self.corner + self.tangent_length * self.dir_out
    }

    pub fn midpoint(&self) -> Vec3 {
        self.half_point(self.half_length(), true)
    }

    fn half_point(&self, s: f64, first: bool) -> Vec3 {
        let k = self.scale * PI.sqrt();
        let (c, sn) = fresnel(s / k);
        if first {
            self.start() + k * c * self.dir_in + k * sn * self.normal_in
        } else {
            self.end() - k * c * self.dir_out + k * sn * self.normal_out
        }
    }

    /// Arc length along the whole blend for `phi`, or `None` outside it.
    fn arc(&self, phi: f64) -> Option<f64> {
        let (a, b) = self.phi_range();
        if phi <= a || phi >= b {
            return None;
        }
        Some((phi - a) / (b - a) * 2.0 * self.half_length())
    }

    pub fn position(&self, phi: f64) -> Option<Vec3> {
        let s = self.arc(phi)?;
        let lc = self.half_length();
        Some(if s <= lc {
            self.half_point(s, true)
        } else {
            self.half_point(2.0 * lc - s, false)
        })
    }

    pub fn tangent(&self, phi: f64) -> Option<Vec3> {
        let s = self.arc(phi)?;
        let lc = self.half_length();
        let (s, first) = if s <= lc { (s, true) } else { (2.0 * lc - s, false) };
        let tau = s * s / (2.0 * self.scale * self.scale);
        Some(if first {
            tau.cos() * self.dir_in + tau.sin() * self.normal_in
        } else {
            tau.cos() * self.dir_out - tau.sin() * self.normal_out
        })
    }
}

const BLEND_SAMPLES: usize = 50;

/// Adds clothoid blends at interior via-points.
///
/// Each blend uses the largest tangent length up to a quarter of the shorter
/// adjacent segment for which every hull point stays in its assigned set. The
/// check is conservative: each half of the blend lies in the triangle of its
/// tangent point, the corner and the blend midpoint. Corners where no length
/// passes keep the sharp polyline.
pub fn smooth_corners(path: &ReferencePath) -> ReferencePath {
    let mut out = path.clone();
    out.blends.clear();
    for i in 1..path.num_segments() {
        let len_in = path.knots[i] - path.knots[i - 1];
        let len_out = path.knots[i + 1] - path.knots[i];
        if len_in <= 1e-9 || len_out <= 1e-9 {
            continue;
        }
        let dir_in = (path.via_points[i] - path.via_points[i - 1]) / len_in;
        let dir_out = (path.via_points[i + 1] - path.via_points[i]) / len_out;
        let mut t = 0.25 * len_in.min(len_out);
        for _ in 0..30 {
            let Some(b) = Blend::new(path.via_points[i], path.knots[i], i, dir_in, dir_out, t) else {
                break;
            };
            if blend_fits(&out, &b) {
                out.blends.push(b);
                break;
            }
            t *= 0.5;
        }
    }
    out
}

fn blend_fits(path: &ReferencePath, b: &Blend) -> bool {
    let i = b.via;
    let mid = b.midpoint();
    let (phi_a, phi_b) = b.phi_range();
    let offsets = path.start_offsets();
    let halves = [
        (i - 1, [b.start(), b.corner, mid], path.angle_at(phi_a), path.angle_at(b.phi_corner)),
        (i, [mid, b.corner, b.end()], path.angle_at(b.phi_corner), path.angle_at(phi_b)),
    ];
    for (set, tri, th0, th1) in halves {
        for h in path.sets[set].rows() {
            let lin = tri.iter().map(|p| h.normal.dot(p)).fold(f64::NEG_INFINITY, f64::max);
            for l0 in &offsets {
                let rot = RotTerm::new(&h.normal, l0, &path.omega).max_over(th0, th1);
                if lin + rot - h.offset > 0.0 {
                    return false;
                }
            }
        }
    }
    let mut trial = path.clone();
    trial.blends.push(b.clone());
    (0..BLEND_SAMPLES).all(|k| {
        let phi = phi_a + (phi_b - phi_a) * (k as f64 + 0.5) / BLEND_SAMPLES as f64;
        trial.violation_at(phi) <= 0.0
    })
}
