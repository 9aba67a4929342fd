use std::path::PathBuf;

use eleatt::data::{gen_distractor, save_dataset, Dataset};
use eleatt::KvConfig;

use crate::common::{TaskArgs, DATASET_FILE};
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub task: TaskArgs,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let spec = args.task.spec(args.seed)?;
    let splits = gen_distractor(&spec)?;
    let ds = Dataset::from_distractor(&spec, splits);
    std::fs::create_dir_all(&args.out)?;
    save_dataset(&ds, &args.out.join(DATASET_FILE))?;
    let hash = ds.hash()?;

    let mut config = KvConfig::new();
    config.insert_section("task", &spec.to_kv());
    config.set("data.hash", &hash);
    let mut manifest = RunManifest::new("gen", spec.seed, config);
    manifest.artifact("dataset", DATASET_FILE);
    manifest.write(&args.out)?;

    println!(
        "wrote {} ({} train / {} val / {} test, D={}, K={})",
        args.out.join(DATASET_FILE).display(),
        ds.train.len(),
        ds.val.len(),
        ds.test.len(),
        ds.dim(),
        ds.num_classes()
    );
    if let Some(dims) = ds.informative_dims()? {
        println!("informative dims {dims:?}");
    }
    println!("sha256 {hash}");
    Ok(())
}
