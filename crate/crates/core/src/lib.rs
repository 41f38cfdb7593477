//! Single-rigid-body locomotion control: QP balance control, convex MPC,
//! their L1-adaptive augmentations, and a deterministic scenario simulator.

pub mod qp;
pub mod srb;
pub mod gait;
pub mod swing;
pub mod terrain;
pub mod balance;
pub mod analysis;
pub mod l1;
pub mod mpc;
pub mod sim;
