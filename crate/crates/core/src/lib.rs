pub mod error;
pub mod harness;
pub mod l1_kernels;
pub mod energy;
pub mod parallel;
pub mod schemes;
pub mod soe;
pub mod space_disc;
pub mod temporal_mesh;

#[doc(hidden)]
pub mod oracle;
