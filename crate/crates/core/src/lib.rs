//! Training-free compression for pixel-aligned 3D Gaussian scenes.
//!
//! Per view, Gaussian geometry is moved into its camera's frame (depth,
//! pixel-center offsets, camera-relative rotation and perspective-scaled
//! size). Color SH coefficients are projected onto a visibility-weighted
//! eigenbasis fitted over the whole scene. Every resulting channel is laid
//! out as an image plane, quantized to 14 bits and coded independently.
//!
//! ```no_run
//! use gsplat_codec::{decode_scene, encode_scene, EncodeConfig, Scene};
//! use gsplat_codec::synth::{generate, Geometry, SynthSpec};
//!
//! let scene: Scene = generate(&SynthSpec::new(Geometry::Plane, 2, 64, 64, 1, 0)).unwrap();
//! let cs = encode_scene(&scene, &EncodeConfig::default()).unwrap();
//! let back: Scene = decode_scene(&cs, None).unwrap();
//! assert_eq!(back.record_count(), scene.record_count());
//! ```

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

mod bytes;
pub mod codec;
pub mod container;
pub mod eigen;
pub mod error;
pub mod geometry;
pub mod model;
pub mod pipeline;
pub mod plane;
pub mod quantizer;
pub mod render;
pub mod scalar;
pub mod sh;
pub mod synth;
pub mod vabr;
pub mod vpt;

pub use codec::{BackendId, EncodedPlane, HevcConfig, QpConfig};
pub use container::{bit_allocation_report, read_container, write_container, BitAllocation, CompressedScene};
pub use error::{Error, Result};
pub use model::{load_scene, save_scene, CameraView, GaussianRecord, SceneFormat, SceneModel, ViewMap};
pub use pipeline::{decode_scene, encode_scene, evaluate, sweep, EncodeConfig, EvalReport, SweepRow};
pub use plane::Plane;
pub use quantizer::{AlphaTable, ChannelClass};
pub use scalar::Real;
pub use vabr::VabrBasis;

pub type Scene = SceneModel<f32>;
pub type Scene64 = SceneModel<f64>;
pub type Camera = CameraView<f32>;
pub type Camera64 = CameraView<f64>;
pub type Gaussian = GaussianRecord<f32>;
pub type Gaussian64 = GaussianRecord<f64>;
pub type Basis = VabrBasis<f32>;
