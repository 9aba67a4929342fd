use std::path::PathBuf;

use anyhow::Context;
use eleatt::model::{load_checkpoint, Checkpoint};
use eleatt::trainer::{BEST_CHECKPOINT, LAST_CHECKPOINT};
use eleatt::{evaluate, KvConfig};

use crate::common::{absolute, load_data, Split, UsageError};
use crate::manifest::{RunManifest, MANIFEST_FILE};

/// Which model to load: a run directory, or an explicit checkpoint file.
#[derive(Debug, Clone, clap::Args)]
pub struct ModelArgs {
    /// Training run directory.
    #[arg(long, conflicts_with = "checkpoint")]
    pub run: Option<PathBuf>,
    /// Checkpoint file.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    /// Checkpoint inside `--run`: `best` or `last`.
    #[arg(long, default_value = "best", value_parser = ["best", "last"])]
    pub which: String,
    /// Dataset directory or file; defaults to the one recorded by `--run`.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Split::Test)]
    pub split: Split,
}

pub struct Loaded {
    pub ckpt_path: PathBuf,
    pub ckpt: Checkpoint,
    pub data_path: PathBuf,
    pub data: eleatt::Dataset,
}

impl ModelArgs {
    pub fn load(&self) -> anyhow::Result<Loaded> {
        let (ckpt_path, recorded) = match (&self.run, &self.checkpoint) {
            (Some(run), _) => {
                let file = if self.which == "last" { LAST_CHECKPOINT } else { BEST_CHECKPOINT };
                let data = if run.join(MANIFEST_FILE).exists() {
                    RunManifest::load(run)?.config.get("data.path").map(PathBuf::from)
                } else {
                    None
                };
                (run.join(file), data)
            }
            (None, Some(c)) => (c.clone(), None),
            (None, None) => return Err(UsageError::new("give --run or --checkpoint").into()),
        };
        let data_arg = self
            .data
            .clone()
            .or(recorded)
            .ok_or_else(|| UsageError::new("no dataset given (--data)"))?;
        let ckpt = load_checkpoint(&ckpt_path)
            .with_context(|| format!("loading checkpoint {}", ckpt_path.display()))?;
        let (data_path, data) = load_data(&data_arg)?;
        if data.dim() != ckpt.network.input_dim() || data.num_classes() != ckpt.network.num_classes() {
            anyhow::bail!(
                "dataset is {}-dimensional with {} classes; the model expects {} and {}",
                data.dim(),
                data.num_classes(),
                ckpt.network.input_dim(),
                ckpt.network.num_classes()
            );
        }
        Ok(Loaded {
            ckpt_path,
            ckpt,
            data_path,
            data,
        })
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Print JSON instead of text.
    #[arg(long)]
    pub json: bool,
    /// Also write `eval.json` and a manifest here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let l = args.model.load()?;
    let split = args.model.split;
    let batch = split.pick(&l.data);
    let ev = evaluate(&l.ckpt.network, batch)?;
    let report = serde_json::json!({
        "checkpoint": absolute(&l.ckpt_path).display().to_string(),
        "data": absolute(&l.data_path).display().to_string(),
        "split": split.as_str(),
        "count": ev.count,
        "accuracy": ev.accuracy,
        "loss": ev.loss,
    });
    if args.json {
        println!("{}", serde_json::to_string_pretty(&report)?);
    } else {
        println!(
            "{} split: accuracy {:.4}  loss {:.4}  ({} sequences)",
            split.as_str(),
            ev.accuracy,
            ev.loss,
            ev.count
        );
    }
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out)?;
        std::fs::write(out.join("eval.json"), serde_json::to_string_pretty(&report)? + "\n")?;
        let mut config = KvConfig::new();
        config.set("eval.checkpoint", absolute(&l.ckpt_path).display());
        config.set("eval.data", absolute(&l.data_path).display());
        config.set("eval.split", split.as_str());
        config.set("data.hash", l.data.hash()?);
        let mut m = RunManifest::new("eval", l.ckpt.seed, config);
        m.artifact("report", "eval.json");
        m.write(out)?;
    }
    Ok(())
}
