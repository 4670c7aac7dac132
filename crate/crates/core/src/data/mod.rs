//! Frames configuration, dataset files, merging onto the common frame and
//! the synthetic benchmark generator.

mod config;
mod dataset;
mod merge;
mod synth;

pub use config::{load_frames_config, FrameSet, FramesConfig, SourceConfig, SourceFrame, COMMON_FRAME_ID};
pub use dataset::{load_dataset_csv, save_dataset_csv, Record, SourceDataset, Split};
pub use merge::{merge_datasets, MergedDataset, MergedRecord};
pub use synth::{
    desk_bench, gen_synthetic, nearest_mean, unbalanced_bench, BenchSpec, ClassComponent, GeneratedSource, SourceSampling,
    SynthSpec,
};
