//! Parameter and FLOP accounting, gate-response traces and relative
//! attention.

pub mod attention;
pub mod cost;

pub use attention::{
    attention_csv, extract_attention, relative_attention, AttentionTrace, EnergyMode, JointScore,
    LayerTrace, Normalizer, RelativeAttention, RelativeOptions,
};
pub use cost::{
    block_flops, block_params, count_flops, count_params, fc_params, gate_flops, gate_params,
    CostReport, LayerCost,
};

#[cfg(test)]
mod tests;
