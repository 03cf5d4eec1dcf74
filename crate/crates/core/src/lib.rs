//! Superpoint partitioning of 3D point clouds.
//!
//! Points are linked in a k-nearest-neighbor graph, embedded (handcrafted
//! geometric features or a fitted linear map of them) and then grouped by a
//! parallel greedy merge that lowers a piecewise-constant energy. Repeating
//! the merge on the superpoint graph with larger minimum sizes gives a
//! nested hierarchy.
//!
//! ```no_run
//! use superpoint::{io, graph, features, partition};
//!
//! let cloud = io::read_ply("scene.ply").unwrap();
//! let g = graph::build_knn_graph(&cloud, &graph::GraphConfig::default()).unwrap();
//! let f = features::geometric_features(&cloud, &features::FeatureConfig::default()).unwrap();
//! let levels = partition::PartitionConfig::levels(0.02, &[5, 30, 90], 8, 1);
//! let h = partition::hierarchical_partition(&f, &g, &cloud.positions, &levels).unwrap();
//! println!("{} superpoints", h.levels[0].n_components());
//! ```

pub mod cli;
pub mod cloud;
pub mod config;
pub mod energy;
pub mod error;
pub mod features;
pub mod graph;
pub mod io;
pub mod kdtree;
pub mod kv;
pub mod metrics;
pub mod numeric;
pub mod partition;
pub mod pipeline;
pub mod synth;
pub mod transition;
pub mod voxel;
pub mod wcc;

pub use cloud::PointCloud;
pub use error::{Error, Result};
