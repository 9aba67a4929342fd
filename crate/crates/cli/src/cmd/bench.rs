use std::fmt::Write as _;
use std::path::PathBuf;

use eleatt::experiment::{epochs_to_match, median, run as run_variant, Comparison, RunResult, Variant};
use eleatt::{CellKind, KvConfig};

use crate::common::{TaskArgs, UsageError};
use crate::manifest::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VariantArg {
    Baseline,
    Gated,
    GatedSoftmax,
}

impl VariantArg {
    fn variant(self) -> Variant {
        match self {
            VariantArg::Baseline => Variant::BASELINE,
            VariantArg::Gated => Variant::GATED,
            VariantArg::GatedSoftmax => Variant::SOFTMAX,
        }
    }
}

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Output directory for results and per-run logs.
    #[arg(long)]
    pub out: PathBuf,
    /// Paired seeds; each seed fixes both the dataset and the initialization.
    #[arg(long, default_value_t = 5)]
    pub seeds: u64,
    #[arg(long, default_value_t = 1)]
    pub first_seed: u64,
    #[arg(long, value_enum, value_delimiter = ',', default_value = "baseline,gated,gated-softmax")]
    pub variants: Vec<VariantArg>,
    #[arg(long)]
    pub kind: Option<CellKind>,
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long)]
    pub layers: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[command(flatten)]
    pub task: TaskArgs,
    /// Recorded in the manifest; every code path is single-threaded.
    #[arg(long)]
    pub threads: Option<usize>,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    if args.seeds == 0 || args.variants.is_empty() {
        return Err(UsageError::new("need at least one seed and one variant").into());
    }
    let mut cmp = Comparison::standard();
    cmp.task = args.task.spec(0)?;
    if let Some(k) = args.kind {
        cmp.kind = k;
    }
    if let Some(n) = args.hidden {
        cmp.hidden = n;
    }
    if let Some(l) = args.layers {
        cmp.layers = l;
    }
    if let Some(e) = args.epochs {
        cmp.train.epochs = e;
    }
    for v in &args.variants {
        cmp.train_config(v.variant(), 0).validate()?;
    }

    let seeds: Vec<u64> = (args.first_seed..args.first_seed + args.seeds).collect();
    let runs_dir = args.out.join("runs");
    std::fs::create_dir_all(&runs_dir)?;

    let mut config = KvConfig::new();
    config.insert_section("task", &cmp.task.to_kv());
    config.insert_section("base", &cmp.train_config(Variant::GATED, 0).to_kv());
    config.set("bench.kind", cmp.kind);
    config.set("bench.hidden", cmp.hidden);
    config.set("bench.layers", cmp.layers);
    config.set("bench.seeds", seeds.iter().map(u64::to_string).collect::<Vec<_>>().join(","));
    config.set(
        "bench.variants",
        args.variants.iter().map(|v| v.variant().to_string()).collect::<Vec<_>>().join(","),
    );
    let mut manifest = RunManifest::new("bench", args.first_seed, config);
    manifest.threads = args.threads;
    manifest.artifact("results", "results.csv");
    manifest.artifact("runs", "runs");
    manifest.write(&args.out)?;

    let mut results: Vec<RunResult> = Vec::new();
    let mut csv = String::from("variant,seed,test_acc,test_loss,final_train_loss,epochs,attn_informative,attn_distractor\n");
    for v in &args.variants {
        let variant = v.variant();
        for &seed in &seeds {
            let r = run_variant(&cmp, variant, seed)?;
            std::fs::write(runs_dir.join(format!("{variant}-{seed}.csv")), r.log.to_csv())?;
            let (ai, ad) = r
                .attention
                .map_or((String::new(), String::new()), |a| (a.relative.0.to_string(), a.relative.1.to_string()));
            writeln!(
                csv,
                "{variant},{seed},{},{},{},{},{ai},{ad}",
                r.test_acc,
                r.test_loss,
                r.log.final_train_loss().unwrap_or(f64::NAN),
                r.log.rows.len()
            )?;
            println!(
                "{variant:<14} seed {seed:>3}  test acc {:.4}  loss {:.4}  final train loss {:.4}",
                r.test_acc,
                r.test_loss,
                r.log.final_train_loss().unwrap_or(f64::NAN)
            );
            results.push(r);
        }
    }
    std::fs::write(args.out.join("results.csv"), &csv)?;

    let of = |v: Variant| -> Vec<&RunResult> { results.iter().filter(|r| r.variant == v).collect() };
    println!();
    println!("{:<14} {:>10} {:>16}", "variant", "median acc", "median final loss");
    for v in &args.variants {
        let rs = of(v.variant());
        let acc = median(&rs.iter().map(|r| r.test_acc).collect::<Vec<_>>());
        let loss = median(&rs.iter().map(|r| r.log.final_train_loss().unwrap_or(f64::NAN)).collect::<Vec<_>>());
        println!("{:<14} {acc:>10.4} {loss:>16.4}", v.variant().to_string());
    }
    let (base, gated) = (of(Variant::BASELINE), of(Variant::GATED));
    if !base.is_empty() && !gated.is_empty() {
        let ratios: Vec<f64> = gated
            .iter()
            .zip(&base)
            .map(|(g, b)| epochs_to_match(&g.log, &b.log).unwrap_or(f64::INFINITY))
            .collect();
        let gain = median(&gated.iter().map(|r| r.test_acc).collect::<Vec<_>>())
            - median(&base.iter().map(|r| r.test_acc).collect::<Vec<_>>());
        println!("gated - baseline median accuracy: {gain:+.4}");
        println!("epochs for gated to reach baseline final loss (fraction): median {:.2}", median(&ratios));
    }
    println!("wrote {}", args.out.join("results.csv").display());
    Ok(())
}
