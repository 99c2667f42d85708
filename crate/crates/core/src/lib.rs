//! Engine for the dynamic pickup-and-delivery problem with docking ports
//! and LIFO loading.

pub mod dispatcher;
pub mod docking;
pub mod evaluator;
pub mod feasibility;
pub mod io;
pub mod model;
pub mod par;
pub mod sdp;
