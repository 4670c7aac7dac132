//! Training, evaluation and reporting around the fusion pipelines.

mod bench;
mod config;
mod eval;
mod gradcheck;
mod report;
mod train;

pub use bench::{
    finetune_mfe, fuse_eval, members_for, merge_split, pretrain_sources, run_benchmark, standalone_name, BenchOptions, BenchRun,
    Pretrained, E2E_MFE, ORACLE,
};
pub use config::{config_hash, TrainConfig};
pub use eval::{
    average_error, evaluate_oracle, evaluate_pipeline, evaluate_standalone, format_mass, SampleOutcome, StrategyOutcome,
    DUMP_FOCAL_SETS,
};
pub use gradcheck::{ds_loss_check, mfe_pipeline_check};
pub use report::{
    build_report, write_report, AeRow, ClassRow, DatasetAe, EvalReport, AE_TABLE_FILE, INSPECTION_FILE, PER_CLASS_FILE,
    PREDICTIONS_FILE, REPORT_FILE,
};
pub use train::{finetune, init_classifier, joint_pipeline, mean_loss, pretrain, sgd, HeadKind, LossCurve, SgdSettings};
