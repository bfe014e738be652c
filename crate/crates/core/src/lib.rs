// The exact-arithmetic kernels allocate heavily; mimalloc roughly halves
// their wall time compared to the system allocator.
#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

pub mod config;
pub mod error;
pub mod grid;
pub mod hopf;
pub mod lincomb;
pub mod model;
pub mod multi_index;
pub mod params;
pub mod plus;
pub mod prep;
pub mod rules;
pub mod suite;
pub mod tree;
