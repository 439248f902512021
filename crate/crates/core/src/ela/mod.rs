//! Exploratory landscape analysis features and feature-based algorithm
//! configuration.

mod aac;
mod features;
mod tree;

pub use aac::{
    evaluate_aac, fit_wizard, AacResult, AacSettings, CvMode, InstanceKey, InstanceTable, Lookup, LossRow, LossSummary, Model,
    LOSS_HEADER,
};
pub use features::{
    doe_features, features_from_sample, kurtosis, latin_hypercube, skewness, ElaFeatures, FeatureRow, FeatureTable,
    DEFAULT_SAMPLES, FEATURE_NAMES, FEATURE_VERSION,
};
pub use tree::{
    fit_forest, fit_tree, split_impurity, Forest, ForestParams, MaxFeatures, MultiOutputTree, TreeNode, DEFAULT_MAX_DEPTH,
};
