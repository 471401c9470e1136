//! Experiment orchestration over the synthetic reaction benchmark: training,
//! evaluation in every sampling mode, ablation suites and report files.

mod ablation;
mod config;
mod output;
mod run;
mod train;

pub use ablation::{run_ablation_suite, AblationRow, AblationSuite, AblationTable};
pub use config::{ExperimentConfig, GenJob, Mode, TrainJob};
pub use output::{write_eval_outputs, write_json, write_timing, Timing};
pub use run::{
    draw_samples, evaluate_product, flat, load_model, padded_reactants, plan_sources, product_stream,
    run_experiment, run_experiment_from_files, score_samples, MetricSummary, ProductResult, RunReport,
    SourcePlan, PRODUCT_TAG,
};
pub use train::{build_coupling, train_from_files, train_model, TRAIN_TAG};
