use std::path::PathBuf;

use eleatt::analysis::{
    attention_csv, extract_attention, relative_attention, EnergyMode, Normalizer, RelativeOptions,
};
use eleatt::KvConfig;

use super::eval::ModelArgs;
use crate::common::absolute;
use crate::manifest::RunManifest;

#[derive(Debug, clap::Args)]
pub struct Args {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Network layer whose gate is analysed.
    #[arg(long, default_value_t = 0)]
    pub layer: usize,
    /// Energy used for the static factor: `abs` (mean absolute) or `rms`.
    #[arg(long, default_value = "abs")]
    pub energy: EnergyMode,
    /// `energy_ratio` or `mean_response`.
    #[arg(long, default_value = "energy_ratio")]
    pub normalizer: Normalizer,
    /// Output directory for `attention.csv`, `attention.json` and a manifest.
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let l = args.model.load()?;
    let split = args.model.split;
    let batch = split.pick(&l.data);
    let trace = extract_attention(&l.ckpt.network, batch)?;
    let options = RelativeOptions {
        energy: args.energy,
        normalizer: args.normalizer,
    };
    let rel = relative_attention(&trace, args.layer, options)?;

    std::fs::create_dir_all(&args.out)?;
    std::fs::write(args.out.join("attention.csv"), attention_csv(&trace, &rel)?)?;
    std::fs::write(args.out.join("attention.json"), rel.to_json() + "\n")?;
    let mut config = KvConfig::new();
    config.set("attn.checkpoint", absolute(&l.ckpt_path).display());
    config.set("attn.data", absolute(&l.data_path).display());
    config.set("attn.split", split.as_str());
    config.set("attn.layer", args.layer);
    config.set(
        "attn.energy",
        match args.energy {
            EnergyMode::MeanAbs => "abs",
            EnergyMode::Rms => "rms",
        },
    );
    config.set(
        "attn.normalizer",
        match args.normalizer {
            Normalizer::EnergyRatio => "energy_ratio",
            Normalizer::MeanResponse => "mean_response",
        },
    );
    config.set("data.hash", l.data.hash()?);
    let mut m = RunManifest::new("attn", l.ckpt.seed, config);
    m.artifact("csv", "attention.csv");
    m.artifact("json", "attention.json");
    m.write(&args.out)?;

    println!("element  mean response  static factor  mean relative");
    for i in 0..rel.mean_relative.len() {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
        println!(
            "{i:>7}  {:>13.4}  {:>13}  {:>13}",
            rel.mean_response[i],
            fmt(rel.static_factor[i]),
            fmt(rel.mean_relative[i])
        );
    }
    if !rel.excluded.is_empty() {
        println!("excluded (zero energy): {:?}", rel.excluded);
    }
    if let Some(informative) = l.data.informative_dims()? {
        let rest: Vec<usize> = (0..l.data.dim()).filter(|d| !informative.contains(d)).collect();
        let raw = |dims: &[usize]| dims.iter().map(|&d| rel.mean_response[d]).sum::<f64>() / dims.len().max(1) as f64;
        if let (Some(a), Some(b)) = (rel.group_mean(&informative), rel.group_mean(&rest)) {
            println!("informative dims {informative:?}: mean relative {a:.4}, raw {:.4}", raw(&informative));
            println!("distractor dims: mean relative {b:.4}, raw {:.4}", raw(&rest));
        }
    }
    println!("wrote {}", args.out.display());
    Ok(())
}
