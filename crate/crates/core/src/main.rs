use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dsfusion::classifier::{Checkpoint, Classifier};
use dsfusion::data::{
    desk_bench, gen_synthetic, load_dataset_csv, unbalanced_bench, BenchSpec, FrameSet, GeneratedSource, Split,
};
use dsfusion::fusion::Strategy;
use dsfusion::harness::{
    build_report, config_hash, ds_loss_check, evaluate_oracle, evaluate_pipeline, evaluate_standalone, finetune_mfe, fuse_eval,
    merge_split, mfe_pipeline_check, pretrain_sources, run_benchmark, standalone_name, write_report, BenchOptions, HeadKind,
    LossCurve, Pretrained, StrategyOutcome, TrainConfig, E2E_MFE, ORACLE,
};
use dsfusion::{Error, Result};

const BENCH_FILE: &str = "bench.json";
const TRAIN_FILE: &str = "train.json";
const CHECKPOINT_DIR: &str = "checkpoints";
const EVAL_DIR: &str = "eval";
const REPORT_DIR: &str = "report";
const LOG_DIR: &str = "logs";

#[derive(Parser)]
#[command(
    name = "dsfusion",
    version,
    about = "Evidential fusion of classifiers on heterogeneous frames"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct Shared {
    /// Configuration file (benchmark spec for gen-data, training config otherwise).
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    strategy: Option<Strategy>,
    /// Run directory holding data, checkpoints and reports.
    #[arg(long, default_value = "run")]
    out: PathBuf,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    batch: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Preset {
    Desk,
    Unbalanced,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic benchmark into the run directory.
    GenData {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
    },
    /// Pretrain one classifier per source on its own frame.
    Pretrain {
        #[command(flatten)]
        shared: Shared,
    },
    /// Evaluate fusion strategies on the pretrained classifiers and write reports.
    FuseEval {
        #[command(flatten)]
        shared: Shared,
    },
    /// Fine-tune the MFE pipeline end to end on the merged training set.
    Finetune {
        #[command(flatten)]
        shared: Shared,
    },
    /// Compare reverse-mode gradients with central differences.
    Gradcheck {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, default_value_t = 20)]
        trials: u64,
        #[arg(long, default_value_t = 1e-5)]
        step: f64,
        #[arg(long, default_value_t = 1e-4)]
        tolerance: f64,
    },
    /// Rebuild report files from the evaluation outcomes in the run directory.
    Report {
        #[command(flatten)]
        shared: Shared,
    },
    /// Run the whole benchmark in memory over several seeds and print the table.
    Bench {
        #[command(flatten)]
        shared: Shared,
        #[arg(long, value_enum, default_value = "desk")]
        preset: Preset,
        #[arg(long, default_value_t = 5)]
        seeds: u64,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData { shared, preset } => gen_data(&shared, preset),
        Command::Pretrain { shared } => pretrain(&shared),
        Command::FuseEval { shared } => fuse(&shared),
        Command::Finetune { shared } => finetune(&shared),
        Command::Gradcheck {
            shared,
            trials,
            step,
            tolerance,
        } => gradcheck(&shared, trials, step, tolerance),
        Command::Report { shared } => report(&shared),
        Command::Bench { shared, preset, seeds } => bench(&shared, preset, seeds),
    }
}

fn preset_spec(p: Preset) -> BenchSpec {
    match p {
        Preset::Desk => desk_bench(),
        Preset::Unbalanced => unbalanced_bench(),
    }
}

fn mkdir(p: &Path) -> Result<()> {
    fs::create_dir_all(p).map_err(|e| Error::Io {
        path: p.to_path_buf(),
        source: e,
    })
}

fn data_file(out: &Path, source: &str, split: Split) -> PathBuf {
    out.join(format!("{source}_{split}.csv"))
}

fn gen_data(shared: &Shared, preset: Preset) -> Result<()> {
    let spec = match &shared.config {
        Some(p) => BenchSpec::load(p)?,
        None => preset_spec(preset),
    };
    let frames = spec.frames.resolve()?;
    let seed = shared.seed.unwrap_or(0);
    let data = gen_synthetic(seed, &spec.synth, &frames)?;
    mkdir(&shared.out)?;
    spec.save(&shared.out.join(BENCH_FILE))?;
    for d in &data {
        for ds in [&d.train, &d.test] {
            dsfusion::data::save_dataset_csv(ds, &data_file(&shared.out, &ds.id, ds.split))?;
        }
    }
    println!("wrote {} sources to {}", data.len(), shared.out.display());
    Ok(())
}

/// Training config of a run: `--config`, else the run's saved config, else
/// defaults; command-line flags then override single fields.
fn train_config(shared: &Shared, finetuning: bool) -> Result<TrainConfig> {
    let saved = shared.out.join(TRAIN_FILE);
    let mut cfg = match &shared.config {
        Some(p) => TrainConfig::load(p)?,
        None if saved.exists() => TrainConfig::load(&saved)?,
        None => TrainConfig::default(),
    };
    if let Some(s) = shared.seed {
        cfg.seed = s;
    }
    if let Some(b) = shared.batch {
        cfg.batch = b;
    }
    if finetuning {
        if let Some(lr) = shared.lr {
            cfg.finetune_lr = lr;
        }
        if let Some(e) = shared.epochs {
            cfg.finetune_epochs = e;
        }
    } else {
        if let Some(lr) = shared.lr {
            cfg.pretrain_lr = lr;
        }
        if let Some(e) = shared.epochs {
            cfg.pretrain_epochs = e;
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

struct RunData {
    spec: BenchSpec,
    frames: FrameSet,
    data: Vec<GeneratedSource>,
}

fn load_run(out: &Path) -> Result<RunData> {
    let spec = BenchSpec::load(&out.join(BENCH_FILE))?;
    let frames = spec.frames.resolve()?;
    let mut data = Vec::new();
    for sf in &frames.sources {
        let id = sf.frame.id();
        data.push(GeneratedSource {
            train: load_dataset_csv(&data_file(out, id, Split::Train), &sf.frame, id, Split::Train)?,
            test: load_dataset_csv(&data_file(out, id, Split::Test), &sf.frame, id, Split::Test)?,
        });
    }
    Ok(RunData { spec, frames, data })
}

fn kind_tag(kind: HeadKind) -> &'static str {
    match kind {
        HeadKind::Evidential => "ds",
        HeadKind::Probabilistic => "softmax",
    }
}

fn checkpoint_path(out: &Path, source: &str, tag: &str) -> PathBuf {
    out.join(CHECKPOINT_DIR).join(format!("{source}.{tag}.json"))
}

fn write_curve(path: &Path, curve: &LossCurve) -> Result<()> {
    let mut s = String::from("epoch,loss\n");
    for (i, l) in curve.iter().enumerate() {
        s.push_str(&format!("{},{l:.9}\n", i + 1));
    }
    fs::write(path, s).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn save_outcome(out: &Path, o: &StrategyOutcome) -> Result<()> {
    let dir = out.join(EVAL_DIR);
    mkdir(&dir)?;
    let path = dir.join(format!("{}.json", o.name));
    fs::write(&path, serde_json::to_string(o)?).map_err(|e| Error::Io { path, source: e })
}

fn kinds_for(strategy: Option<Strategy>) -> Vec<HeadKind> {
    match strategy {
        None => vec![HeadKind::Evidential, HeadKind::Probabilistic],
        Some(Strategy::Pmf | Strategy::Pfc) => vec![HeadKind::Probabilistic],
        Some(_) => vec![HeadKind::Evidential],
    }
}

fn pretrain(shared: &Shared) -> Result<()> {
    let cfg = train_config(shared, false)?;
    let run = load_run(&shared.out)?;
    mkdir(&shared.out.join(CHECKPOINT_DIR))?;
    mkdir(&shared.out.join(LOG_DIR))?;
    cfg.save(&shared.out.join(TRAIN_FILE))?;
    for kind in kinds_for(shared.strategy) {
        let (classifiers, curves) = pretrain_sources(&run.frames, &run.data, &cfg, kind)?;
        for ((c, curve), d) in classifiers.iter().zip(&curves).zip(&run.data) {
            Checkpoint::from_classifier(c).save(&checkpoint_path(&shared.out, &d.train.id, kind_tag(kind)))?;
            let name = standalone_name(kind, &d.train.id);
            write_curve(&shared.out.join(LOG_DIR).join(format!("pretrain_{name}.csv")), curve)?;
            save_outcome(&shared.out, &evaluate_standalone(&name, c, &d.test)?)?;
            println!("{name}: final training loss {:.6}", curve.last().copied().unwrap_or(f64::NAN));
        }
    }
    Ok(())
}

fn load_classifiers(out: &Path, frames: &FrameSet, tag: &str) -> Result<Option<Vec<Classifier>>> {
    let mut v = Vec::new();
    for sf in &frames.sources {
        let path = checkpoint_path(out, sf.frame.id(), tag);
        if !path.exists() {
            return Ok(None);
        }
        v.push(Checkpoint::load(&path)?.into_classifier(&sf.frame)?);
    }
    Ok(Some(v))
}

fn fuse(shared: &Shared) -> Result<()> {
    let cfg = train_config(shared, true)?;
    let run = load_run(&shared.out)?;
    let pretrained = Pretrained {
        evidential: load_classifiers(&shared.out, &run.frames, kind_tag(HeadKind::Evidential))?,
        probabilistic: load_classifiers(&shared.out, &run.frames, kind_tag(HeadKind::Probabilistic))?,
    };
    let strategies: Vec<Strategy> = match shared.strategy {
        Some(s) => vec![s],
        None => Strategy::ALL
            .into_iter()
            .filter(|s| match s {
                Strategy::Pmf | Strategy::Pfc => pretrained.probabilistic.is_some(),
                _ => pretrained.evidential.is_some(),
            })
            .collect(),
    };
    if strategies.is_empty() {
        return Err(Error::InvalidConfig(
            "no pretrained checkpoints found; run pretrain first".into(),
        ));
    }
    let (train, test) = merge_split(&run.frames, &run.data)?;
    for o in fuse_eval(&run.frames, &pretrained, &train, &test, &cfg, &strategies)? {
        save_outcome(&shared.out, &o)?;
    }
    save_outcome(&shared.out, &evaluate_oracle(ORACLE, &run.spec.synth, &test)?)?;
    report(shared)
}

fn finetune(shared: &Shared) -> Result<()> {
    let cfg = train_config(shared, true)?;
    let run = load_run(&shared.out)?;
    let classifiers = load_classifiers(&shared.out, &run.frames, kind_tag(HeadKind::Evidential))?
        .ok_or_else(|| Error::InvalidConfig("no DS-layer checkpoints found; run pretrain first".into()))?;
    let (train, test) = merge_split(&run.frames, &run.data)?;
    let (pipeline, curve) = finetune_mfe(&run.frames, &classifiers, &train, &cfg)?;
    mkdir(&shared.out.join(LOG_DIR))?;
    write_curve(&shared.out.join(LOG_DIR).join("finetune.csv"), &curve)?;
    for (m, sf) in pipeline.members().iter().zip(&run.frames.sources) {
        Checkpoint::from_classifier(&m.classifier).save(&checkpoint_path(&shared.out, sf.frame.id(), "ds.e2e"))?;
    }
    save_outcome(&shared.out, &evaluate_pipeline(E2E_MFE, &pipeline, &test)?)?;
    if let (Some(first), Some(last)) = (curve.first(), curve.last()) {
        println!("fine-tuning loss {first:.6} -> {last:.6}");
    }
    report(shared)
}

/// Sort key putting standalone rows first, then strategies, then the rest.
fn outcome_rank(name: &str) -> (usize, String) {
    let rank = if name.starts_with("ds-") {
        0
    } else if name.starts_with("softmax-") {
        1
    } else if let Some(i) = Strategy::ALL.iter().position(|s| s.as_str() == name) {
        2 + i
    } else if name == E2E_MFE {
        8
    } else {
        9
    };
    (rank, name.to_string())
}

fn report(shared: &Shared) -> Result<()> {
    let cfg = train_config(shared, true)?;
    let spec = BenchSpec::load(&shared.out.join(BENCH_FILE))?;
    let dir = shared.out.join(EVAL_DIR);
    let mut outcomes = Vec::new();
    for entry in fs::read_dir(&dir).map_err(|e| Error::Io {
        path: dir.clone(),
        source: e,
    })? {
        let path = entry
            .map_err(|e| Error::Io {
                path: dir.clone(),
                source: e,
            })?
            .path();
        if path.extension().is_some_and(|e| e == "json") {
            let s = fs::read_to_string(&path).map_err(|e| Error::Io {
                path: path.clone(),
                source: e,
            })?;
            outcomes.push(serde_json::from_str::<StrategyOutcome>(&s)?);
        }
    }
    outcomes.sort_by_key(|o| outcome_rank(&o.name));
    let hash = config_hash(&[&serde_json::to_value(&cfg)?, &serde_json::to_value(&spec)?])?;
    let rep = build_report(&outcomes, cfg.seed, &hash)?;
    let files = write_report(&rep, &outcomes, &cfg.inspect, &shared.out.join(REPORT_DIR))?;
    print_table(&rep);
    for f in files {
        log::info!("wrote {}", f.display());
    }
    Ok(())
}

fn print_table(rep: &dsfusion::harness::EvalReport) {
    let mut datasets: Vec<&str> = rep
        .rows
        .iter()
        .flat_map(|r| r.per_dataset.iter().map(|d| d.dataset.as_str()))
        .collect();
    datasets.sort();
    datasets.dedup();
    print!("{:<14}{:>9}", "strategy", "overall");
    for d in &datasets {
        print!("{d:>9}");
    }
    println!("{:>11}", "conflicts");
    for r in &rep.rows {
        print!("{:<14}{:>8.2}%", r.strategy, 100.0 * r.ae);
        for d in &datasets {
            match r.dataset(d) {
                Some(x) => print!("{:>8.2}%", 100.0 * x.ae),
                None => print!("{:>9}", "-"),
            }
        }
        println!("{:>11}", r.conflicts);
    }
}

fn gradcheck(shared: &Shared, trials: u64, step: f64, tolerance: f64) -> Result<()> {
    let base = shared.seed.unwrap_or(0);
    let mut failed = 0;
    for (name, check) in [
        ("ds-layer loss", ds_loss_check as fn(u64, f64) -> Result<_>),
        ("mfe pipeline", mfe_pipeline_check),
    ] {
        let mut worst: f64 = 0.0;
        for t in 0..trials {
            let c = check(base + t, step)?;
            worst = worst.max(c.max_rel_error);
            if c.max_rel_error >= tolerance {
                failed += 1;
                eprintln!(
                    "{name} seed {}: {} at {}[{}]",
                    base + t,
                    c.max_rel_error,
                    c.worst_param,
                    c.worst_index
                );
            }
        }
        println!("{name}: max relative error {worst:.3e} over {trials} trials");
    }
    if failed > 0 {
        return Err(Error::InvalidConfig(format!("{failed} gradient checks above {tolerance:e}")));
    }
    Ok(())
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn bench(shared: &Shared, preset: Preset, seeds: u64) -> Result<()> {
    let spec = match &shared.config {
        Some(p) => BenchSpec::load(p)?,
        None => preset_spec(preset),
    };
    let base = train_config(
        &Shared {
            config: None,
            ..shared.clone()
        },
        false,
    )?;
    let opts = BenchOptions {
        strategies: shared.strategy.map(|s| vec![s]).unwrap_or_else(|| Strategy::ALL.to_vec()),
        ..BenchOptions::default()
    };
    let first = shared.seed.unwrap_or(0);
    let mut rows: Vec<(String, Vec<f64>)> = Vec::new();
    for seed in first..first + seeds {
        let cfg = TrainConfig { seed, ..base.clone() };
        let run = run_benchmark(&spec, &cfg, &opts)?;
        println!("seed {seed}");
        print_table(&run.report);
        if let Some(c) = &run.finetune_curve {
            println!("fine-tuning loss {:.6} -> {:.6}", c[0], c[c.len() - 1]);
        }
        for r in &run.report.rows {
            match rows.iter_mut().find(|(n, _)| n == &r.strategy) {
                Some((_, v)) => v.push(r.ae),
                None => rows.push((r.strategy.clone(), vec![r.ae])),
            }
        }
    }
    println!("median over {seeds} seeds");
    for (name, v) in rows {
        println!("{name:<14}{:>8.2}%", 100.0 * median(v));
    }
    Ok(())
}
