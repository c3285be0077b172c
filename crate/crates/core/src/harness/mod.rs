pub mod config;
pub mod data;
pub mod experiments;
pub mod output;
pub mod presets;
pub mod run;
pub mod suite;
