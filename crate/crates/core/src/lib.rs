//! Object-categorization toolkit: image ingestion, PHOG and dense-SIFT
//! bag-of-words descriptors, distance-substitution kernels, an SMO kernel
//! SVM with one-vs-one multiclass composition, SVM-KNN local learning, and
//! AdaBoost over per-descriptor SVM weak learners, plus an experiment
//! harness (config, splits, metrics, persistence).

pub mod boosting;
pub mod descriptors;
pub mod harness;
pub mod imagecore;
pub mod kernels;
pub mod neighbors;
pub mod rng;
pub mod svm;

pub use descriptors::{Channel, DescriptorSpec, DescriptorVector, DistanceKind};
pub use imagecore::{Dataset, GrayImage};
pub use kernels::{BaseKernel, KernelMatrix};
pub use svm::{BinarySvmModel, MulticlassStrategy, MulticlassSvmModel};
