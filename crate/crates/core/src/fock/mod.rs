//! Exact bosonic simulation on a truncated Fock basis.
//!
//! States are dense density matrices over the tensor product of per-mode
//! number bases (mode 0 is the most significant index). Operators are kept
//! sparse, since every observable of interest is a low-order polynomial in
//! ladder operators. Weight discarded by truncation is never silently
//! dropped: each state carries a `tail_mass` that accumulates it.

mod channel;
mod measure;
mod operator;
mod state;

pub use channel::{apply_channel, apply_channel_with_dims, mix_with_thermal, ChannelSpec};
pub use measure::{expectation, observable_snr};
pub use operator::ModeOperator;
pub use state::{
    attach_mode, coherent_tail, geometric_dim, make_coherent, make_thermal, make_tmsv, partial_trace, poisson_dim,
    TruncatedState,
};

pub use num_complex::Complex64 as C64;

/// Truncation policy shared by the state constructors and channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// Largest tolerated discarded probability for a single truncation.
    pub tail_target: f64,
    /// Largest allowed side of a (multi-mode) density matrix.
    pub side_cap: usize,
    /// Whether constructors may enlarge a basis that is too small.
    pub allow_growth: bool,
}

impl Default for Truncation {
    fn default() -> Self {
        Self {
            tail_target: 1e-10,
            side_cap: 4096,
            allow_growth: true,
        }
    }
}

/// Row-major strides for a list of mode dimensions.
pub(crate) fn strides(dims: &[usize]) -> Vec<usize> {
    let mut out = vec![1; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        out[k] = out[k + 1] * dims[k + 1];
    }
    out
}

pub(crate) fn side_of(dims: &[usize]) -> usize {
    dims.iter().product()
}
