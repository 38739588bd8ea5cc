//! Vertex-form polytopes, half-space-form cones, and the tangent/normal cone
//! machinery built on the exact LP.

mod cone;
mod distance;
mod polytope;

pub use cone::{polar_cone, tangent_normal_cones, FinitelyGeneratedCone, HPolyhedron, Halfspace};
pub use distance::{distance_squared, tangent_via_distance_oracle, Tangency};
pub use polytope::{poly_combine, Containment, PolyOp, VPolytope};
