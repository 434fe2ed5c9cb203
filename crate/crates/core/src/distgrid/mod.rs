//! Distributed execution over a virtual process grid: layouts, message
//! transports, distributed matrices and the distributed sweep.

mod dmatrix;
mod driver;
mod grid;
mod linalg;
mod socket;
mod transport;

pub use dmatrix::{
    check_symmetric, gather_matrix, redist_1d_to_2d, redist_2d_to_1d, replicate, scatter_matrix,
    scatter_panels, DistMatrix1D, DistMatrix2D,
};
pub use driver::{
    first_cause, rank_chunk, run_dist_inproc, run_dist_rank, DistConfig, DEFAULT_COLUMNS_PER_RANK,
};
pub use grid::{global_1d, global_2d, grid_create, local_count, owner_1d, owner_2d, GridLayout};
pub use linalg::{dist_cholesky, dist_trsolve};
pub use socket::{socket_path, SocketTransport};
pub use transport::{inproc_world, pack_f64s, unpack_f64s, InProcTransport, Traffic, Transport};
