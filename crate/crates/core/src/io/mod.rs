//! File formats: Middlebury `.flo`, PNG/PFM images, flow visualization, the
//! metric parameter file and the upsampler weight container.

mod flo;
mod image;
mod params;
mod viz;
mod weights;

pub use self::flo::{decode_flo, encode_flo, read_flo, write_flo, FLO_MAGIC};
pub use self::image::{decode_pfm, encode_pfm, read_image, write_image};
pub use self::params::{load_params, parse_params, save_params};
pub use self::viz::flow_to_color;
pub use self::weights::{
    decode_weights, encode_weights, load_upsampler_weights, save_upsampler_weights, WEIGHTS_MAGIC,
};
