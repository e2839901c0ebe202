//! Bayer packing, image and tensor files, dataset enumeration and cropping.

mod bayer;
mod dataset;
mod png;
mod tensor_file;

pub use bayer::{pack_rggb, unpack_rggb, PackedRaw, RawMosaic, SrgbImage};
pub use dataset::{crop_patch, load_dataset, save_pair, SamplePair, Split};
pub use png::{read_mosaic_png, read_rgb_png, write_mosaic_png, write_rgb_png};
pub use tensor_file::{read_tensor, read_tensor_from, write_tensor, write_tensor_to};
