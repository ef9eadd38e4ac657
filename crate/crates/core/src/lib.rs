pub mod agent;
pub mod bench;
pub mod error;
pub mod imgproc;
pub mod kb;
pub mod raster;
pub mod synth;
pub mod text;
pub mod vision;
pub mod wire;
