//! Toy three-stage face detection cascade on fused Gabor input.

pub mod bbox;
pub mod detector;
pub mod pyramid;
pub mod training;

pub use bbox::{calibrate, detection_order, iou, nms, reg_between, BBox, Detection};
pub use detector::{crop_input, score_detections, Cascade, CascadeConfig, DetectionScore};
pub use pyramid::{pyramid, Level};
pub use training::{sample_crops, train_cascade, train_stage, CascadeTraining, Crop, CropMix, CropSet, StageTraining};
