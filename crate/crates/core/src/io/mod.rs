//! File formats: PLY point clouds, partition files and embedding matrices.

mod embedding_file;
mod partition_file;
mod ply;

pub use embedding_file::{read_embeddings, write_embeddings, EMBEDDING_MAGIC};
pub use partition_file::{
    read_partition, write_assignments, write_partition, PartitionFormat, PARTITION_MAGIC,
};
pub use ply::{read_ply, read_ply_from, write_ply, write_ply_to, PlyFormat};
