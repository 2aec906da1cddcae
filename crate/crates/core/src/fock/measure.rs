use nalgebra::DMatrix;

use super::{ModeOperator, TruncatedState, C64};
use crate::{Error, Result, SnrBreakdown};

fn check_dims(state: &TruncatedState, obs: &ModeOperator) -> Result<()> {
    if state.mode_dims() != obs.mode_dims() {
        return Err(Error::DimensionMismatch {
            expected: state.mode_dims().to_vec(),
            found: obs.mode_dims().to_vec(),
        });
    }
    Ok(())
}

/// `Tr(ρ O)`.
pub fn expectation(state: &TruncatedState, obs: &ModeOperator) -> Result<C64> {
    check_dims(state, obs)?;
    Ok(trace_product(obs, state.matrix()))
}

fn trace_product(obs: &ModeOperator, m: &DMatrix<C64>) -> C64 {
    obs.rows()
        .iter()
        .enumerate()
        .map(|(i, row)| row.iter().map(|&(k, v)| v * m[(k, i)]).sum::<C64>())
        .sum()
}

/// First and second moments of a Hermitian observable.
fn moments(state: &TruncatedState, obs: &ModeOperator) -> (f64, f64) {
    let rho = state.matrix();
    let n = rho.nrows();
    // W = O ρ, then ⟨O⟩ = Tr W and ⟨O²⟩ = Tr(O W)
    let mut w = DMatrix::<C64>::zeros(n, n);
    for (i, row) in obs.rows().iter().enumerate() {
        for &(k, v) in row {
            for j in 0..n {
                w[(i, j)] += v * rho[(k, j)];
            }
        }
    }
    (w.trace().re, trace_product(obs, &w).re)
}

/// SNR of `obs` for discriminating `state_at_phi` from `state_at_zero`:
/// `S² = (⟨O⟩₀ − ⟨O⟩_φ)²` over the variance at φ.
pub fn observable_snr(
    state_at_phi: &TruncatedState,
    state_at_zero: &TruncatedState,
    obs: &ModeOperator,
) -> Result<SnrBreakdown> {
    check_dims(state_at_phi, obs)?;
    check_dims(state_at_zero, obs)?;
    let (mean_at_phi, second_moment) = moments(state_at_phi, obs);
    let mean_at_zero = expectation(state_at_zero, obs)?.re;
    let noise_var = second_moment - mean_at_phi * mean_at_phi;
    if noise_var <= 1e-12 * second_moment.abs().max(1.0) {
        return Err(Error::DegenerateVariance { variance: noise_var });
    }
    let signal_sq = (mean_at_zero - mean_at_phi).powi(2);
    Ok(SnrBreakdown {
        signal_sq,
        noise_var,
        snr: signal_sq / noise_var,
        mean_at_phi,
        mean_at_zero,
        second_moment,
    })
}
