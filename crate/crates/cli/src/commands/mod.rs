pub mod calibrate;
pub mod detect;
pub mod evaluate;
pub mod predict;
pub mod preprocess;
pub mod split;
pub mod synth;
pub mod train;
