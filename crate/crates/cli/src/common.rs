use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::Context;
use eleatt::data::{load_dataset, Dataset};
use eleatt::{DistractorSpec, SequenceBatch};

pub const DATASET_FILE: &str = "dataset.bin";

/// Bad flags or configuration; exits with code 2.
#[derive(Debug)]
pub struct UsageError(String);

impl UsageError {
    pub fn new(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

/// 2 for usage and configuration errors, 1 for everything else.
pub fn exit_code(e: &anyhow::Error) -> u8 {
    let usage = e.chain().any(|c| {
        c.is::<UsageError>()
            || matches!(
                c.downcast_ref::<eleatt::Error>(),
                Some(eleatt::Error::InvalidConfig(_) | eleatt::Error::InvalidArgument(_))
            )
    });
    if usage {
        2
    } else {
        1
    }
}

/// A dataset directory (holding `dataset.bin`) or the file itself.
pub fn dataset_path(path: &Path) -> PathBuf {
    if path.is_dir() {
        path.join(DATASET_FILE)
    } else {
        path.to_path_buf()
    }
}

pub fn load_data(path: &Path) -> anyhow::Result<(PathBuf, Dataset)> {
    let file = dataset_path(path);
    if !file.exists() {
        anyhow::bail!("dataset not found at {}", file.display());
    }
    let ds = load_dataset(&file).with_context(|| format!("reading dataset {}", file.display()))?;
    Ok((file, ds))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn pick(self, ds: &Dataset) -> &SequenceBatch {
        match self {
            Split::Train => &ds.train,
            Split::Val => &ds.val,
            Split::Test => &ds.test,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Distractor-task flags; unset fields keep the generator defaults.
#[derive(Debug, Clone, Default, clap::Args)]
pub struct TaskArgs {
    /// Input dimension D.
    #[arg(long)]
    pub dims: Option<usize>,
    /// Informative dimensions S (< D).
    #[arg(long)]
    pub informative: Option<usize>,
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub min_len: Option<usize>,
    #[arg(long)]
    pub max_len: Option<usize>,
    /// Noise standard deviation on informative dims.
    #[arg(long)]
    pub noise: Option<f64>,
    /// Distractor standard deviation as a multiple of `--noise`.
    #[arg(long)]
    pub distractor_scale: Option<f64>,
    #[arg(long)]
    pub train_size: Option<usize>,
    #[arg(long)]
    pub val_size: Option<usize>,
    #[arg(long)]
    pub test_size: Option<usize>,
}

impl TaskArgs {
    pub fn spec(&self, seed: u64) -> anyhow::Result<DistractorSpec> {
        let d = DistractorSpec::default();
        let spec = DistractorSpec {
            dims: self.dims.unwrap_or(d.dims),
            informative: self.informative.unwrap_or(d.informative),
            classes: self.classes.unwrap_or(d.classes),
            min_len: self.min_len.unwrap_or(d.min_len),
            max_len: self.max_len.unwrap_or(d.max_len),
            noise: self.noise.unwrap_or(d.noise),
            distractor_scale: self.distractor_scale.unwrap_or(d.distractor_scale),
            train: self.train_size.unwrap_or(d.train),
            val: self.val_size.unwrap_or(d.val),
            test: self.test_size.unwrap_or(d.test),
            seed,
            ..d
        };
        spec.validate().map_err(|e| UsageError::new(e.to_string()))?;
        Ok(spec)
    }
}

pub fn absolute(path: &Path) -> PathBuf {
    std::path::absolute(path).unwrap_or_else(|_| path.to_path_buf())
}
