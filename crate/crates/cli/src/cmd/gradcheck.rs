use std::collections::BTreeMap;

use eleatt::bptt::gradcheck::{run_case, GradCheckCase};
use eleatt::{CellKind, GateActivation};

use crate::common::UsageError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Which {
    All,
    Srnn,
    Lstm,
    Gru,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GatedSel {
    All,
    True,
    False,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum ActSel {
    /// Sigmoid on even seeds, softmax on odd ones.
    Both,
    Sigmoid,
    Softmax,
}

#[derive(Debug, clap::Args)]
pub struct Args {
    #[arg(long, value_enum, default_value_t = Which::All)]
    pub kind: Which,
    #[arg(long, value_enum, default_value_t = GatedSel::All)]
    pub gated: GatedSel,
    /// Gate activation for gated blocks.
    #[arg(long, value_enum, default_value_t = ActSel::Both)]
    pub activation: ActSel,
    /// Random problems per configuration.
    #[arg(long, default_value_t = 20)]
    pub seeds: u64,
    #[arg(long, default_value_t = 0)]
    pub first_seed: u64,
    /// Force the input dimension instead of drawing it.
    #[arg(long)]
    pub dims: Option<usize>,
    /// Force every layer's hidden size instead of drawing it.
    #[arg(long)]
    pub hidden: Option<usize>,
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    /// Largest accepted relative error.
    #[arg(long, default_value_t = 1e-5)]
    pub tol: f64,
    /// Perturb one analytic gradient entry per case; the check must fail.
    #[arg(long, hide = true)]
    pub corrupt: bool,
    /// Print every case, not just the per-configuration summary.
    #[arg(long, short)]
    pub verbose: bool,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    if args.seeds == 0 {
        return Err(UsageError::new("--seeds must be positive").into());
    }
    if args.dims == Some(0) || args.hidden == Some(0) {
        return Err(UsageError::new("--dims and --hidden must be positive").into());
    }
    let kinds: Vec<CellKind> = match args.kind {
        Which::All => CellKind::ALL.to_vec(),
        Which::Srnn => vec![CellKind::Srnn],
        Which::Lstm => vec![CellKind::Lstm],
        Which::Gru => vec![CellKind::Gru],
    };
    let gated: Vec<bool> = match args.gated {
        GatedSel::All => vec![false, true],
        GatedSel::True => vec![true],
        GatedSel::False => vec![false],
    };

    let mut failures = 0;
    let mut overall: f64 = 0.0;
    for &kind in &kinds {
        for &g in &gated {
            let label = format!("{}{kind}", if g { "eleatt-" } else { "" });
            let mut per_tensor: BTreeMap<String, f64> = BTreeMap::new();
            let mut worst: f64 = 0.0;
            let mut failed = 0;
            for seed in args.first_seed..args.first_seed + args.seeds {
                let act = match args.activation {
                    ActSel::Sigmoid => GateActivation::Sigmoid,
                    ActSel::Softmax => GateActivation::Softmax,
                    ActSel::Both if seed % 2 == 1 => GateActivation::Softmax,
                    ActSel::Both => GateActivation::Sigmoid,
                };
                let mut case = GradCheckCase::random(kind, g, act, seed);
                if let Some(d) = args.dims {
                    case.config.input_dim = d;
                }
                if let Some(n) = args.hidden {
                    for l in &mut case.config.layers {
                        l.hidden_dim = n;
                    }
                }
                let r = run_case(&case, args.eps, args.corrupt)?;
                for (name, e) in &r.per_tensor {
                    let slot = per_tensor.entry(name.clone()).or_insert(0.0);
                    *slot = slot.max(*e);
                }
                worst = worst.max(r.worst);
                if !r.passed(args.tol) {
                    failed += 1;
                }
                if args.verbose {
                    println!(
                        "  {} {:.2e} {}",
                        if r.passed(args.tol) { "ok  " } else { "FAIL" },
                        r.worst,
                        r.case
                    );
                }
            }
            overall = overall.max(worst);
            failures += failed;
            println!(
                "{:<14} {} cases  worst {:.2e}  {}",
                label,
                args.seeds,
                worst,
                if failed == 0 { "PASS".to_string() } else { format!("FAIL ({failed} cases)") }
            );
            for (name, e) in &per_tensor {
                println!("    {name:<18} {e:.2e}");
            }
        }
    }
    println!("overall worst {overall:.2e} (tol {:.0e})", args.tol);
    if failures > 0 {
        anyhow::bail!("{failures} gradient-check cases exceeded tolerance");
    }
    Ok(())
}
