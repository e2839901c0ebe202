//! Paired moiré data synthesis.
//!
//! A clean sRGB image is shown on a simulated RGB-stripe screen, photographed
//! through a homography, optics blur and a Bayer sensor with noise, and finally
//! developed by a simple ISP with a color cast. The clean RAW counterpart comes
//! from running the ISP backwards on the clean image.

mod capture;
mod isp;
mod mat3;
mod pair;
mod params;
mod scenes;
mod screen;

pub use capture::camera_capture;
pub use isp::{demosaic_bilinear, inverse_isp, simple_isp, simple_isp_linear};
pub use mat3::Mat3;
pub use pair::{synth_pair, synthesize_split, SampleRecord, SplitSidecar};
pub use params::{SynthConfig, SynthParams};
pub use scenes::procedural_scene;
pub use screen::{simulate_screen, stripe_mask};
