//! Exact-arithmetic engine for wall structures on two-dimensional tropical
//! manifolds and the Landau-Ginzburg potentials they compute.
//!
//! All computations are over the rationals; there is no floating point
//! anywhere in this crate. The pipeline is:
//!
//! * [`exact_algebra`] — rationals, Laurent terms with a formal `t`-order,
//!   truncated series and wall-crossing transport.
//! * [`tropical_model`] — scene descriptions (cells, rays, slabs, focus-focus
//!   points) and their JSON serialization.
//! * [`scattering`] — local consistency at a single joint and order-by-order
//!   completion (Kontsevich-Soibelman).
//! * [`wall_structure`] — global structures: slab propagation, joint
//!   completion to a fixed point, chamber decomposition.
//! * [`broken_lines`] — backward tracing of broken lines ending at a point.
//! * [`potential`] — assembling potentials, the boundary fast path, and the
//!   mirror map.
//! * [`model_library`] — the built-in catalog of calibrated scenes.

pub mod broken_lines;
pub mod exact_algebra;
pub mod geom;
pub mod model_library;
pub mod potential;
pub mod scattering;
pub mod svg;
pub mod tropical_model;
pub mod wall_structure;
