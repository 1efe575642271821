use serde::{Deserialize, Serialize};

use super::smoothing::Blend;
use crate::geometry::{ConvexPolytope, GeodesicKind, Halfspace, Rotation, Vec3};

/// Piecewise-linear position path with a constant-axis orientation path,
/// one segment per set.
///
/// Segment `i` runs from `via_points[i]` to `via_points[i + 1]` over
/// `[knots[i], knots[i + 1]]`, lies in `sets[i]`, and turns by `alphas[i]`
/// about `omega`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReferencePath {
    pub via_points: Vec<Vec3>,
    pub knots: Vec<f64>,
    pub omega: Vec3,
    pub theta_total: f64,
    pub geodesic: GeodesicKind,
    pub alphas: Vec<f64>,
    pub r0: Rotation,
    /// Graph ids of the sets, for diagnostics.
    pub set_ids: Vec<usize>,
    pub sets: Vec<ConvexPolytope>,
    /// End-effector hull offsets in the end-effector frame.
    pub hull_offsets: Vec<Vec3>,
    #[serde(default)]
    pub blends: Vec<Blend>,
    /// Length of a straight extension before `via_points[0]`, traversed for
    /// `φ ∈ [−lead_in, 0)` at fixed orientation.
    #[serde(default)]
    pub lead_in: f64,
    #[serde(default)]
    pub lead_dir: Vec3,
    #[serde(default)]
    pub max_iter_reached: bool,
}

/// Extremum of a hull-point row distance over one segment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SegmentExtremum {
    /// Local parameter in [0, 1].
    pub t: f64,
    pub phi: f64,
    pub value: f64,
}

/// `c0 + ρ cos(θ − ψ)`: the part of `aᵀ Exp(θω) l₀` that depends on θ.
#[derive(Clone, Copy, Debug, PartialEq)]
pub(crate) struct RotTerm {
    pub c0: f64,
    pub rho: f64,
    pub psi: f64,
}

impl RotTerm {
    pub fn new(a: &Vec3, l0: &Vec3, omega: &Vec3) -> Self {
        let par = omega * omega.dot(l0);
        let perp = l0 - par;
        let x = a.dot(&perp);
        let y = a.dot(&omega.cross(l0));
        Self {
            c0: a.dot(&par),
            rho: x.hypot(y),
            psi: y.atan2(x),
        }
    }

    pub fn value(&self, theta: f64) -> f64 {
        self.c0 + self.rho * (theta - self.psi).cos()
    }

    pub fn deriv(&self, theta: f64) -> f64 {
        -self.rho * (theta - self.psi).sin()
    }

    /// Largest value over `θ` between `lo` and `hi` (either order).
    pub fn max_over(&self, lo: f64, hi: f64) -> f64 {
        let (lo, hi) = if lo <= hi { (lo, hi) } else { (hi, lo) };
        let mut best = self.value(lo).max(self.value(hi));
        let k = ((lo - self.psi) / std::f64::consts::TAU).ceil();
        if self.psi + k * std::f64::consts::TAU <= hi {
            best = self.c0 + self.rho;
        }
        best
    }
}

/// Parameters in [0, 1] where `slope·t + term(start + t·alpha)` can attain an
/// extremum: both endpoints plus interior stationary points.
pub(crate) fn candidate_ts(slope: f64, term: &RotTerm, start: f64, alpha: f64) -> Vec<f64> {
    let mut ts = vec![0.0, 1.0];
    let w = term.rho * alpha;
    if w.abs() <= 1e-15 {
        return ts;
    }
    // slope − ρα sin(θ − ψ) = 0
    let k = slope / w;
    if k.abs() > 1.0 {
        return ts;
    }
    let base = k.asin();
    let (lo, hi) = {
        let e = start + alpha;
        if start <= e {
            (start, e)
        } else {
            (e, start)
        }
    };
    for root in [base, std::f64::consts::PI - base] {
        let first = ((lo - term.psi - root) / std::f64::consts::TAU).ceil();
        let mut n = first;
        loop {
            let theta = term.psi + root + n * std::f64::consts::TAU;
            if theta > hi {
                break;
            }
            let t = (theta - start) / alpha;
            if t > 0.0 && t < 1.0 {
                ts.push(t);
            }
            n += 1.0;
        }
    }
    ts
}

impl ReferencePath {
    pub fn num_segments(&self) -> usize {
        self.alphas.len()
    }

    pub fn length(&self) -> f64 {
        *self.knots.last().expect("at least one knot")
    }

    /// Total orientation change in radians, `Σ|αᵢ|`.
    pub fn rotation_length(&self) -> f64 {
        self.alphas.iter().map(|a| a.abs()).sum()
    }

    pub fn start_phi(&self) -> f64 {
        -self.lead_in
    }

    /// Segment containing `phi`; the final knot belongs to the last segment
    /// and the lead-in to the first.
    pub fn segment_at(&self, phi: f64) -> usize {
        let n = self.num_segments();
        let mut i = 0;
        while i + 1 < n && phi >= self.knots[i + 1] {
            i += 1;
        }
        i
    }

    /// Local parameter of `phi` within segment `i`, clamped to [0, 1].
    pub fn local_t(&self, i: usize, phi: f64) -> f64 {
        let len = self.knots[i + 1] - self.knots[i];
        if len <= 0.0 {
            if phi >= self.knots[i + 1] {
                1.0
            } else {
                0.0
            }
        } else {
            ((phi - self.knots[i]) / len).clamp(0.0, 1.0)
        }
    }

    /// Accumulated rotation angle before segment `i`.
    pub fn angle_before(&self, i: usize) -> f64 {
        self.alphas[..i].iter().sum()
    }

    /// Rotation angle about `omega` at `phi`.
    pub fn angle_at(&self, phi: f64) -> f64 {
        if phi < 0.0 {
            return 0.0;
        }
        let i = self.segment_at(phi);
        self.angle_before(i) + self.local_t(i, phi) * self.alphas[i]
    }

    pub fn orientation(&self, phi: f64) -> Rotation {
        Rotation::exp_unchecked(&self.omega, self.angle_at(phi)).compose(&self.r0)
    }

    pub fn rotation_at_angle(&self, theta: f64) -> Rotation {
        Rotation::exp_unchecked(&self.omega, theta).compose(&self.r0)
    }

    /// Position on the unblended polyline.
    pub fn polyline_position(&self, phi: f64) -> Vec3 {
        if phi < 0.0 {
            return self.via_points[0] + phi * self.lead_dir;
        }
        let i = self.segment_at(phi);
        let t = self.local_t(i, phi);
        self.via_points[i] + t * (self.via_points[i + 1] - self.via_points[i])
    }

    /// Position including corner blends.
    pub fn position(&self, phi: f64) -> Vec3 {
        for b in &self.blends {
            if let Some(p) = b.position(phi) {
                return p;
            }
        }
        self.polyline_position(phi)
    }

    /// Unit direction of travel at `phi`.
    pub fn tangent(&self, phi: f64) -> Vec3 {
        if phi < 0.0 {
            return self.lead_dir;
        }
        for b in &self.blends {
            if let Some(t) = b.tangent(phi) {
                return t;
            }
        }
        let i = self.segment_at(phi);
        let d = self.via_points[i + 1] - self.via_points[i];
        let n = d.norm();
        if n > 0.0 {
            d / n
        } else {
            Vec3::zeros()
        }
    }

    pub fn hull_points_at(&self, p: &Vec3, r: &Rotation) -> Vec<Vec3> {
        self.hull_offsets.iter().map(|l| p + r.apply(l)).collect()
    }

    pub fn hull_points(&self, phi: f64) -> Vec<Vec3> {
        self.hull_points_at(&self.position(phi), &self.orientation(phi))
    }

    /// Offsets rotated into the start orientation, `R₀ lₗ`.
    pub(crate) fn start_offsets(&self) -> Vec<Vec3> {
        self.hull_offsets.iter().map(|l| self.r0.apply(l)).collect()
    }

    /// Row distance `aᵀ p_e,l − b` at local parameter `t` of segment `i`.
    pub fn row_distance(&self, i: usize, l: usize, h: &Halfspace, t: f64) -> f64 {
        let l0 = self.r0.apply(&self.hull_offsets[l]);
        let term = RotTerm::new(&h.normal, &l0, &self.omega);
        let p = self.via_points[i] + t * (self.via_points[i + 1] - self.via_points[i]);
        h.normal.dot(&p) + term.value(self.angle_before(i) + t * self.alphas[i]) - h.offset
    }

    fn segment_extrema(&self, i: usize, l: usize, h: &Halfspace) -> Vec<SegmentExtremum> {
        let l0 = self.r0.apply(&self.hull_offsets[l]);
        let term = RotTerm::new(&h.normal, &l0, &self.omega);
        let slope = h.normal.dot(&(self.via_points[i + 1] - self.via_points[i]));
        let start = self.angle_before(i);
        candidate_ts(slope, &term, start, self.alphas[i])
            .into_iter()
            .map(|t| SegmentExtremum {
                t,
                phi: self.knots[i] + t * (self.knots[i + 1] - self.knots[i]),
                value: self.row_distance(i, l, h, t),
            })
            .collect()
    }

    /// Minimizer of the row distance of hull point `l` over segment `i`.
    pub fn phi_min(&self, i: usize, l: usize, h: &Halfspace) -> SegmentExtremum {
        self.segment_extrema(i, l, h)
            .into_iter()
            .min_by(|a, b| a.value.total_cmp(&b.value))
            .expect("endpoints are always candidates")
    }

    /// Maximizer of the row distance: the binding point for containment.
    pub fn phi_worst(&self, i: usize, l: usize, h: &Halfspace) -> SegmentExtremum {
        self.segment_extrema(i, l, h)
            .into_iter()
            .max_by(|a, b| a.value.total_cmp(&b.value))
            .expect("endpoints are always candidates")
    }

    /// Exact worst containment violation of the unblended path over all
    /// segments, hull points and rows. Negative means strictly inside.
    pub fn exact_violation(&self) -> (f64, usize) {
        let mut worst = (f64::NEG_INFINITY, 0);
        for i in 0..self.num_segments() {
            for h in self.sets[i].rows() {
                for l in 0..self.hull_offsets.len() {
                    let v = self.phi_worst(i, l, h).value;
                    if v > worst.0 {
                        worst = (v, i);
                    }
                }
            }
        }
        worst
    }

    /// Largest row violation of any hull point at `samples` evenly spaced
    /// parameters, each checked against the set of its segment. Returns the
    /// violation and the parameter where it occurs.
    pub fn sampled_violation(&self, samples: usize) -> (f64, f64) {
        let mut worst = (f64::NEG_INFINITY, 0.0);
        let len = self.length();
        for k in 0..samples {
            let phi = if samples == 1 {
                0.0
            } else {
                len * k as f64 / (samples - 1) as f64
            };
            let v = self.violation_at(phi);
            if v > worst.0 {
                worst = (v, phi);
            }
        }
        worst
    }

    pub fn violation_at(&self, phi: f64) -> f64 {
        let set = &self.sets[self.segment_at(phi)];
        self.hull_points(phi)
            .iter()
            .map(|x| set.max_violation(x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Closest path parameter to `x` within `[lo, hi]`.
    pub fn project(&self, x: &Vec3, lo: f64, hi: f64) -> f64 {
        let lo = lo.max(self.start_phi());
        let hi = hi.min(self.length()).max(lo);
        let mut best = (f64::INFINITY, lo);
        let consider = |phi: f64, best: &mut (f64, f64)| {
            let d = (self.position(phi) - x).norm_squared();
            if d < best.0 {
                *best = (d, phi);
            }
        };
        // Straight pieces: closed-form foot points.
        let mut pieces: Vec<(f64, f64, Vec3, Vec3)> = Vec::new();
        if self.lead_in > 0.0 {
            pieces.push((-self.lead_in, 0.0, self.polyline_position(-self.lead_in), self.via_points[0]));
        }
        for i in 0..self.num_segments() {
            pieces.push((self.knots[i], self.knots[i + 1], self.via_points[i], self.via_points[i + 1]));
        }
        for (a, b, pa, pb) in pieces {
            if b < lo || a > hi {
                continue;
            }
            let d = pb - pa;
            let dd = d.norm_squared();
            let s = if dd > 0.0 {
                ((x - pa).dot(&d) / dd).clamp(0.0, 1.0)
            } else {
                0.0
            };
            consider((a + s * (b - a)).clamp(lo, hi), &mut best);
        }
        consider(lo, &mut best);
        consider(hi, &mut best);
        // Blends are curved: refine by golden-section on their range.
        for blend in &self.blends {
            let (a, b) = blend.phi_range();
            let (a, b) = (a.max(lo), b.min(hi));
            if a >= b {
                continue;
            }
            let phi = golden_min(|p| (self.position(p) - x).norm_squared(), a, b, 1e-10);
            consider(phi, &mut best);
        }
        best.1
    }
}

fn golden_min(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, tol: f64) -> f64 {
    let g = 0.5 * (5f64.sqrt() - 1.0);
    let mut c = b - g * (b - a);
    let mut d = a + g * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + g * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}
