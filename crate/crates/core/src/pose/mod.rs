//! Synthetic 6D pose task: cube dataset, modular network, pose loss.

mod dataset;
mod loss;
mod model;

pub use dataset::{
    cube_vertices, generate_dataset, generate_sample, mesh_diameter, project, random_quaternion,
    render_sample, PoseSample, FOCAL_PX, TRANSLATION_XY, TRANSLATION_Z,
};
pub use loss::{batch_loss, decode_pose, evaluate, pose_errors, pose_loss, TRANSLATION_WEIGHT};
pub use model::{
    build_model, features, projected_radius, ArchConfig, ForwardPass, LayerInput, LayerSpec,
    ModelBuilder, ModularModel, Preprocess, Topology, OUTPUT_DIM,
};
