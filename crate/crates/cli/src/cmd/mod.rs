pub mod attn;
pub mod bench;
pub mod cost;
pub mod eval;
pub mod gen;
pub mod gradcheck;
pub mod train;
