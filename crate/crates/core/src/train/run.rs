use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::checkpoint::save_checkpoint;
use super::config::TrainConfig;
use super::step::{StepLosses, TrainState};
use crate::data::{copy_augment, make_fewshot_plan, make_split, BatchSchedule, DatasetSplit, FewShotPlan, GlyphDataset};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const LOSSES_FILE: &str = "losses.csv";
pub const SPLIT_FILE: &str = "split.txt";
pub const PLAN_FILE: &str = "plan.txt";
pub const CHECKPOINT_DIR: &str = "checkpoints";
/// Most recent checkpoint of a run directory.
pub const LATEST_CHECKPOINT: &str = "checkpoint.ckpt";

/// Split, pairing plan and batch order derived from a config and a dataset.
#[derive(Debug, Clone)]
pub struct RunData {
    pub split: DatasetSplit,
    pub plan: FewShotPlan,
    pub schedule: BatchSchedule,
}

pub fn prepare_run(config: &TrainConfig, data: &GlyphDataset) -> Result<RunData> {
    config.validate()?;
    if data.resolution != config.resolution {
        return Err(Error::InvalidConfig(format!(
            "dataset resolution {} differs from configured {}",
            data.resolution, config.resolution
        )));
    }
    let split = make_split(&data.shared_characters(), config.seed)?;
    let plan = make_fewshot_plan(&split, &config.fewshot, config.seed)?;
    let schedule = if config.copy_augment > 0.0 {
        BatchSchedule::from_augmented(&copy_augment(&split.train, config.copy_augment), config.batch_size, config.seed)?
    } else {
        BatchSchedule::from_plan(&plan, config.batch_size, config.seed)?
    };
    Ok(RunData { split, plan, schedule })
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub state: TrainState<T>,
    /// Losses of the steps executed by this call.
    pub history: Vec<StepLosses>,
    pub checkpoints: Vec<PathBuf>,
    pub data: RunData,
}

pub fn checkpoint_path(out_dir: &Path, step: u64) -> PathBuf {
    out_dir.join(CHECKPOINT_DIR).join(format!("step-{step:08}.ckpt"))
}

/// Fresh run from `config`. With `out_dir`, writes the split and plan manifests,
/// the loss CSV and checkpoints there.
pub fn train_run<T: Scalar>(config: &TrainConfig, data: &GlyphDataset, out_dir: Option<&Path>) -> Result<RunOutput<T>> {
    let state = TrainState::new(config.clone())?;
    run_from(state, data, out_dir)
}

/// Continues a run from a loaded state. The loss CSV keeps rows up to the
/// state's step and the new rows are appended.
pub fn resume_run<T: Scalar>(state: TrainState<T>, data: &GlyphDataset, out_dir: Option<&Path>) -> Result<RunOutput<T>> {
    run_from(state, data, out_dir)
}

fn prepare_csv(path: &Path, keep_through: u64) -> Result<std::fs::File> {
    let mut text = format!("{}\n", StepLosses::CSV_HEADER);
    if keep_through > 0 && path.is_file() {
        for line in std::fs::read_to_string(path)?.lines().skip(1) {
            match StepLosses::parse_csv_row(line) {
                Some(row) if row.step <= keep_through => {
                    text.push_str(line);
                    text.push('\n');
                }
                _ => {}
            }
        }
    }
    std::fs::write(path, text)?;
    Ok(OpenOptions::new().append(true).open(path)?)
}

fn run_from<T: Scalar>(mut state: TrainState<T>, data: &GlyphDataset, out_dir: Option<&Path>) -> Result<RunOutput<T>> {
    let config = state.config.clone();
    let run = prepare_run(&config, data)?;
    let per_epoch = run.schedule.batches_per_epoch();
    let total = config.total_steps(per_epoch);
    let mut csv = match out_dir {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            run.split.save(&dir.join(SPLIT_FILE))?;
            run.plan.save(&dir.join(PLAN_FILE))?;
            Some(prepare_csv(&dir.join(LOSSES_FILE), state.step)?)
        }
        None => None,
    };
    log::info!(
        "training {} steps ({} batches/epoch, {} paired of {} train characters)",
        total,
        per_epoch,
        run.plan.paired.len(),
        run.split.train.len()
    );
    let mut history = Vec::new();
    let mut checkpoints = Vec::new();
    while state.step < total {
        let batch = run.schedule.batch::<T>(data, state.epoch, state.batch_index as usize)?;
        let lr = config.learning_rate_at(state.step, total);
        let losses = state.train_step(&batch, lr)?;
        state.batch_index += 1;
        if state.batch_index as usize >= per_epoch {
            state.batch_index = 0;
            state.epoch += 1;
        }
        if let Some(f) = &mut csv {
            writeln!(f, "{}", losses.csv_row())?;
        }
        if state.step % 50 == 0 || state.step == total {
            log::info!(
                "step {}/{}: L_adv_D {:.4} L_adv_G {:.4} L_cyc {:.4} L_stroke {:.4} L_FS3 {:.4}",
                state.step,
                total,
                losses.adv_d,
                losses.adv_g,
                losses.cyc,
                losses.stroke,
                losses.fs3
            );
        }
        history.push(losses);
        if let Some(dir) = out_dir {
            let periodic = config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0;
            if periodic {
                let path = checkpoint_path(dir, state.step);
                save_checkpoint(&state, &path)?;
                checkpoints.push(path);
            }
            if periodic || state.step == total {
                save_checkpoint(&state, &dir.join(LATEST_CHECKPOINT))?;
            }
        }
    }
    if let Some(dir) = out_dir {
        if history.is_empty() {
            save_checkpoint(&state, &dir.join(LATEST_CHECKPOINT))?;
        }
        checkpoints.push(dir.join(LATEST_CHECKPOINT));
    }
    Ok(RunOutput {
        state,
        history,
        checkpoints,
        data: run,
    })
}
