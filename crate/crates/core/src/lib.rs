//! Kinematic analysis of neck flexion/extension for epistemic gesture markers.
//!
//! The crate turns 2D keypoint tracks into calibrated angle series, discretizes
//! them into Typannot-style notches, detects nod bursts, holds and speed bands,
//! and scores annotated segments as certainty or uncertainty. Everything here is
//! pure computation over in-memory values; file formats and the command line
//! live in the `episteme` crate.

#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod agreement;
pub mod calibration;
pub mod classify;
pub mod dof;
pub mod kinematics;
pub mod markers;
pub mod pose;
pub mod synth;
pub mod typannot;

mod stats;

pub use self::{
    calibration::{CalibrationProfile, Notch},
    dof::{DofId, DofKind, SegmentId, Side},
    kinematics::{AngleSample, AngleSeries, Estimator, Quality, VelocitySample, VelocitySeries},
    markers::{DetectorConfig, MarkerEvent, MarkerKind},
    pose::{DetectionRegion, KeypointFrame, KeypointSchema, PoseTrack},
};
