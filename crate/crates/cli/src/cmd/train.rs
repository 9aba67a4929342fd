use std::path::{Path, PathBuf};

use anyhow::Context;
use eleatt::model::load_checkpoint;
use eleatt::trainer::{
    train_with_progress, TrainState, BEST_CHECKPOINT, LAST_CHECKPOINT, RUNLOG_FILE,
};
use eleatt::{evaluate, CellKind, GateActivation, KvConfig, RunLog, TrainConfig, TrainOptions};

use crate::common::{absolute, load_data, UsageError};
use crate::manifest::{strip_bookkeeping, RunManifest, MANIFEST_FILE};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Dataset directory or file; defaults to `data.path` from the config.
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Run directory for the manifest, run log and checkpoints.
    #[arg(long)]
    pub out: PathBuf,
    /// `key=value` config file (a previous run's manifest works too).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Continue the run in `--out` from its last checkpoint.
    #[arg(long)]
    pub resume: bool,
    /// Cell kind for every layer.
    #[arg(long)]
    pub kind: Option<CellKind>,
    /// Hidden units per layer.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    /// Attach attention gates (`--gated false` for the baseline).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub gated: Option<bool>,
    /// Gate activation: sigmoid or softmax.
    #[arg(long)]
    pub activation: Option<GateActivation>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    /// Random rotation augmentation (D must be a multiple of 3).
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    pub augment: Option<bool>,
    /// Recorded in the manifest; every code path is single-threaded.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Suppress per-epoch lines.
    #[arg(long, short)]
    pub quiet: bool,
}

fn default_model() -> KvConfig {
    let mut kv = KvConfig::new();
    kv.set("model.kind", CellKind::Gru);
    kv.set("model.hidden", 16);
    kv.set("model.num_layers", 3);
    kv.set("model.gated", true);
    kv
}

/// Sets a stack-wide model key and drops the per-layer entries it replaces.
fn set_stack(kv: &mut KvConfig, key: &str, value: impl std::fmt::Display) {
    let stale: Vec<String> = kv
        .iter()
        .filter(|(k, _)| {
            k.strip_prefix("model.layers.")
                .and_then(|r| r.split_once('.'))
                .is_some_and(|(_, field)| field == key)
        })
        .map(|(k, _)| k.to_string())
        .collect();
    for k in stale {
        kv.remove(&k);
    }
    kv.set(&format!("model.{key}"), value);
}

fn apply_flags(kv: &mut KvConfig, a: &Args) {
    if let Some(v) = a.kind {
        set_stack(kv, "kind", v);
    }
    if let Some(v) = a.hidden {
        set_stack(kv, "hidden", v);
    }
    if let Some(v) = a.gated {
        set_stack(kv, "gated", v);
    }
    if let Some(v) = a.activation {
        set_stack(kv, "gate_activation", v);
    }
    if let Some(v) = a.layers {
        kv.set("model.num_layers", v);
    }
    let train = [
        ("epochs", a.epochs.map(|v| v.to_string())),
        ("seed", a.seed.map(|v| v.to_string())),
        ("lr", a.lr.map(|v| v.to_string())),
        ("batch_size", a.batch_size.map(|v| v.to_string())),
        ("augment", a.augment.map(|v| v.to_string())),
    ];
    for (k, v) in train {
        if let Some(v) = v {
            kv.set(&format!("train.{k}"), v);
        }
    }
}

fn load_config(path: &Path) -> anyhow::Result<KvConfig> {
    let kv = KvConfig::load(path).with_context(|| format!("reading config {}", path.display()))?;
    Ok(strip_bookkeeping(&kv))
}

pub fn run(args: Args, dotted: KvConfig) -> anyhow::Result<()> {
    let mut kv = default_model();
    let previous = if args.resume {
        if !args.out.join(MANIFEST_FILE).exists() {
            return Err(UsageError::new(format!("nothing to resume in {}", args.out.display())).into());
        }
        let m = RunManifest::load(&args.out)?;
        kv.merge(&m.config);
        Some(m)
    } else {
        if args.out.join(MANIFEST_FILE).exists() {
            return Err(UsageError::new(format!(
                "{} already holds a run; pass --resume or choose another --out",
                args.out.display()
            ))
            .into());
        }
        None
    };
    if let Some(path) = &args.config {
        kv.merge(&load_config(path)?);
    }
    kv.merge(&dotted);
    apply_flags(&mut kv, &args);

    let data_arg = match (&args.data, kv.get("data.path")) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => PathBuf::from(p),
        (None, None) => return Err(UsageError::new("no dataset given (--data)").into()),
    };
    let (data_file, ds) = load_data(&data_arg)?;
    let hash = ds.hash()?;
    if let Some(m) = &previous {
        if m.config.get("data.hash").is_some_and(|h| h != hash) {
            anyhow::bail!("dataset {} differs from the one this run was trained on", data_file.display());
        }
    }
    if !kv.contains("model.input_dim") {
        kv.set("model.input_dim", ds.dim());
    }
    if !kv.contains("model.num_classes") {
        kv.set("model.num_classes", ds.num_classes());
    }
    let config = TrainConfig::from_kv(&kv)?;

    let mut resolved = config.to_kv();
    resolved.set("data.path", absolute(&data_file).display());
    resolved.set("data.hash", &hash);
    let mut manifest = RunManifest::new("train", config.seed, resolved);
    if let Some(m) = &previous {
        manifest.created = m.created;
    }
    manifest.threads = args.threads;
    manifest.artifact("runlog", RUNLOG_FILE);
    manifest.artifact("last_checkpoint", LAST_CHECKPOINT);
    manifest.artifact("best_checkpoint", BEST_CHECKPOINT);
    manifest.write(&args.out)?;

    let resume = if args.resume {
        let ckpt = load_checkpoint(&args.out.join(LAST_CHECKPOINT))
            .with_context(|| format!("loading {}", args.out.join(LAST_CHECKPOINT).display()))?;
        let state = TrainState::from_checkpoint(&ckpt)?;
        let log = RunLog::load(&args.out.join(RUNLOG_FILE))?;
        if !args.quiet {
            println!("resuming after epoch {} at lr {}", state.epoch, state.schedule.lr);
        }
        Some((state, log))
    } else {
        None
    };

    let quiet = args.quiet;
    let outcome = train_with_progress(
        &config,
        &ds.train,
        &ds.val,
        TrainOptions {
            out_dir: Some(args.out.clone()),
            resume,
        },
        |r| {
            if !quiet {
                let val = match (r.val_loss, r.val_acc) {
                    (Some(l), Some(a)) => format!("  val loss {l:.4} acc {a:.3}"),
                    _ => String::new(),
                };
                println!(
                    "epoch {:>3}  loss {:.4}  acc {:.3}{val}  lr {:.1e}",
                    r.epoch, r.train_loss, r.train_acc, r.lr
                );
            }
        },
    )?;

    if outcome.stopped_early {
        println!("stopped early after epoch {}", outcome.state.epoch);
    }
    if let Some(b) = outcome.best_record {
        println!("best epoch {} val acc {:.4} loss {:.4}", b.epoch, b.val_acc, b.val_loss);
    }
    if !ds.test.is_empty() {
        let ev = evaluate(&outcome.best, &ds.test)?;
        println!("test acc {:.4} loss {:.4} ({} sequences)", ev.accuracy, ev.loss, ev.count);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stack_flags_replace_layer_entries() {
        let mut kv = KvConfig::new();
        kv.set("model.layers.0.gated", true);
        kv.set("model.layers.1.gated", true);
        kv.set("model.layers.1.hidden", 4);
        set_stack(&mut kv, "gated", false);
        assert_eq!(kv.get("model.gated"), Some("false"));
        assert!(!kv.contains("model.layers.0.gated"));
        assert_eq!(kv.get("model.layers.1.hidden"), Some("4"));
    }
}
