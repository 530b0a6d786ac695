//! Classification of variable-length multichannel time series by learning a
//! quadratic form over per-channel DTW distance vectors.
//!
//! Pipeline: warp every channel of every sample pair independently to get an
//! n-vector of distances per pair ([`dtw`]); learn a PSD quadratic form over
//! those vectors with a large-margin objective ([`lmnn`]); optionally project
//! the learned transform onto the span of the training distances so its
//! diagonal reads as a per-channel relevance profile ([`nullspace`]); and
//! evaluate with KNN under shared cross-validation plans ([`eval`]).

pub mod cli;
pub mod dtw;
pub mod error;
pub mod eval;
pub mod fingerprint;
pub mod lmnn;
pub mod nullspace;
pub mod quadform;
pub mod seqdata;

pub use dtw::{
    build_distance_table, dtw_component_vector, dtw_scalar, DistanceVectorTable, DtwConfig,
    LocalCost,
};
pub use error::{Error, Result};
pub use eval::{
    build_euclidean_table, compare_methods, evaluate_dtw_knn, evaluate_dtw_lmnn,
    evaluate_euclidean_lmnn, evaluate_pca_dtw_knn, feature_selection_sweep, knn_classify,
    paired_ttest, CvPlan, EvalReport, Method, MethodEval, PairingUnit, RegularizePolicy,
    SweepCurve, SweepMode, TTest,
};
pub use lmnn::{
    lmnn_gradient, lmnn_objective, select_targets, train, LmnnConfig, LowRankMode,
    NeighborStructure, TrainTrace,
};
pub use nullspace::{
    choose_effective_dim, correlation_spectrum, profile_variance, regularize,
    CorrelationSpectrum, DimensionPolicy, Projector,
};
pub use quadform::{factor_l, psd_project, MetricModel, RelevanceProfile};
pub use seqdata::{
    generate_synthetic, load_corpus, write_corpus, Corpus, Sequence, SyntheticSpec,
};
