pub mod clickgraph;
pub mod corpus;
pub mod deepmodel;
pub mod embeddings;
pub mod eval;
pub mod exec;
pub mod index;
pub mod ltr;
pub mod pipeline;
pub mod synth;
