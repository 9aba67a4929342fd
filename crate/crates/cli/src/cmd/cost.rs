use std::path::PathBuf;

use eleatt::analysis::CostReport;
use eleatt::{CellKind, GateActivation, KvConfig, LayerSpec, NetworkConfig};

#[derive(Debug, clap::Args)]
pub struct Args {
    /// Read the network from a config file or manifest (`model.*` keys).
    #[arg(long, conflicts_with_all = ["kind", "dims", "hidden", "layers", "classes", "gated", "activation"])]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = CellKind::Gru)]
    pub kind: CellKind,
    /// Input dimension D.
    #[arg(long, default_value_t = 20)]
    pub dims: usize,
    /// Hidden units N per layer.
    #[arg(long, default_value_t = 16)]
    pub hidden: usize,
    #[arg(long, default_value_t = 1)]
    pub layers: usize,
    /// Classes K of the output layer.
    #[arg(long, default_value_t = 3)]
    pub classes: usize,
    /// Attach attention gates.
    #[arg(long, num_args = 0..=1, default_missing_value = "true", default_value_t = false)]
    pub gated: bool,
    #[arg(long, default_value_t = GateActivation::Sigmoid)]
    pub activation: GateActivation,
    #[arg(long)]
    pub json: bool,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let config = match &args.config {
        Some(path) => NetworkConfig::from_kv(&KvConfig::load(path)?.section("model"))?,
        None => {
            let mut spec = LayerSpec::new(args.kind, args.hidden, args.gated);
            spec.gate_activation = args.activation;
            let cfg = NetworkConfig::stacked(args.dims, args.classes, args.layers, spec);
            cfg.validate()?;
            cfg
        }
    };
    let report = CostReport::new(&config)?;
    if args.json {
        println!("{}", report.to_json());
    } else {
        println!("params: formula (params) vs tensor enumeration (counted)");
        println!("flops per sample step: formula (flops + gate fl) vs instrumented count (measured)");
        print!("{report}");
        println!(
            "formula == enumeration: {}",
            if report.consistent() { "yes" } else { "NO" }
        );
    }
    if !report.consistent() {
        anyhow::bail!("closed-form counts disagree with enumeration");
    }
    Ok(())
}
