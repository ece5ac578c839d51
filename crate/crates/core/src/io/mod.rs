//! File formats: tensors, images, configuration, reports and directory
//! layouts for parameters and pyramids.

pub mod config;
pub mod files;
pub mod pnm;
pub mod report;
pub mod tensor_file;

pub use config::{parse_config, read_config, render_config};
pub use files::{load_params, read_pyramid, save_params, write_pyramid};
pub use pnm::{decode_pnm, encode_pnm, read_image, read_pnm, write_pnm, PnmImage};
pub use report::ReportDoc;
pub use tensor_file::{decode_tensor, encode_tensor, read_tensor, write_tensor};
