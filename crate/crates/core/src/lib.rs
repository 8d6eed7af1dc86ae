pub mod eval;
pub mod llm;
pub mod navigator;
pub mod raster;
pub mod toolkit;
