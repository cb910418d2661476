pub mod agents;
pub mod config;
pub mod engine;
pub mod game;
pub mod prompting;
pub mod provider;
pub mod report;
pub mod tournament;
