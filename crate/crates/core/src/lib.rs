//! Unsupervised vertex embeddings, topological vertex features, and the
//! probe classifiers that measure how well each feature can be recovered
//! from each embedding space.

pub mod embedding;
pub mod error;
pub mod features;
pub mod generators;
pub mod graph;
pub mod probe;
pub mod projection;
pub mod sdne;
pub mod seed;
pub mod skipgram;
pub mod walks;

pub use embedding::{Embedding, Geometry, MethodTag};
pub use error::{Error, Result};
pub use features::{Feature, FeatureTable};
pub use graph::{Graph, VertexId};
