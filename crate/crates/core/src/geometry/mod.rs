//! Low-dimensional convex geometry shared by every other module: half-space
//! polytopes, inscribed ellipsoids, vertex-described convex bodies with exact
//! closest-point queries, and rotations on SO(3).

mod body;
mod ellipsoid;
mod polytope;
mod rotation;

pub use body::{closest_points, ClosestPoints, ConvexBody};
pub use ellipsoid::Ellipsoid;
pub use polytope::{Aabb, ConvexPolytope, Emptiness, Halfspace};
pub use rotation::{Geodesic, GeodesicKind, Rotation};

/// A point or direction in 3D, in meters where it denotes a position.
pub type Vec3 = nalgebra::Vector3<f64>;

/// Tolerance below which a Chebyshev radius marks a polytope as empty.
pub const EMPTY_TOL: f64 = 1e-9;
