pub mod cli;
mod codec;
pub mod detector;
pub mod explain;
pub mod features;
pub mod ferlab;
pub mod forge;
pub mod game;
mod linalg;
pub mod model;
pub mod statlab;
pub mod synth;
