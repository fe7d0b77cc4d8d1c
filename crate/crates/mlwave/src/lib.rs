//! File formats, reports and parallel drivers around [`mlwave_core`]:
//! OBJ quad grids, binary PLY point clouds, landmark and manifest text
//! files, the binary model format, and CSV reports. The `mlwave` binary
//! wires these into the `train` / `fit` / `track` / `transform` / `synth`
//! / `eval` subcommands.

pub mod error;
pub mod landmark_file;
pub mod manifest;
pub mod model_file;
pub mod obj;
pub mod parallel;
pub mod ply;
pub mod report;

pub use error::Error;
