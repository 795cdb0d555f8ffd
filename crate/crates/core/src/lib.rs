pub mod assets;
pub mod schema;
pub mod vendor;
pub mod gateway;
pub mod llm;
pub mod nl2graphql;
pub mod agent;
pub mod eval;
pub mod cli;
