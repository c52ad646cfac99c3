//! Inner eye canthus localization on thermal face images.
//!
//! The pipeline estimates an orthographic head pose from sparse 2D keypoints,
//! projects a 3D morphable face model onto the image, detects self-occlusion
//! of the eye corners via hidden point removal, and refines each visible
//! canthus to the warmest smoothed pixel of its projected neighborhood.
//! Companion modules fit the model to dense landmark sets for ground-truth
//! augmentation, score results (normalized landmark error, region overlap,
//! pose error), and generate synthetic thermal scenes with known ground truth.

pub mod canthus;
pub mod error;
pub mod eval;
pub mod fitting;
pub mod hull;
pub mod model;
pub mod pipeline;
pub mod pose;
pub mod synth;
pub mod thermal;
pub mod visibility;

// pub use canthus::{CanthusAnnotation, CanthusRegion, EyeResult};
pub use error::{Error, Result};
// pub use fitting::{DeformationCoefficients, FittedShape};
pub use model::{load_model, save_model, Eye, MorphableModel, VertexNeighborhood};
// pub use pipeline::{FrameResult, PipelineConfig};
pub use pose::{AffineProjection, EulerAngles, HeadPose, Keypoints2D};
// pub use thermal::ThermalImage;
// pub use visibility::VisibilityMask;
