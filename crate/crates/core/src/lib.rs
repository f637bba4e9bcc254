mod binio;
pub mod config;
pub mod corpus;
pub mod encoder;
pub mod error;
pub mod fusion;
pub mod kge;
pub mod kgstore;
pub mod pipeline;
pub mod synthetic;

pub use config::RunConfig;
pub use error::PipelineError;
