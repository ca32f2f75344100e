//! Image files, manifests, subject-exclusive folds and synthetic data.

pub mod folds;
pub mod manifest;
pub mod pnm;
pub mod synth;

pub use folds::{split_folds, FoldPlan};
pub use manifest::{parse_manifest, read_manifest, write_manifest, ManifestEntry};
pub use pnm::{decode_pnm, encode_pgm, encode_ppm, load_image};
pub use synth::{make_scene, make_scenes, make_synthetic_orientation_set, LabeledImage, OrientationSpec, Scene, SceneSpec};
