//! Mesh-to-graph conversion, multi-scale hierarchy, cross-graph edges,
//! feature encodings and the sample file format.

pub mod features;
pub mod graph;
pub mod hierarchy;
pub mod mesh;
pub mod sample;

pub use features::{
    compute_edge_features, compute_node_features, edge_features_from_displacement, rest_features,
    EDGE_FEATURES, NODE_FEATURES, REST_FEATURES,
};
pub use graph::{build_graph_from_mesh, EdgeIndex, Graph};
pub use hierarchy::{
    build_coarse_hierarchy, connect_cross_graph_edges, CrossGraphEdges, GraphHierarchy,
    HierarchyLevel,
};
pub use mesh::{grid_mesh, GridDims, Mesh, Point};
pub use sample::{
    decode_sample, deserialize_sample, encode_sample, serialize_sample, GraphSequence,
    MorphParams, Sample,
};
