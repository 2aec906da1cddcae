use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use super::state::{geometric_dim, make_thermal};
use super::{side_of, strides, TruncatedState, Truncation, C64};
use crate::{Error, Result};

/// A unitary acting on one or two modes of a state.
///
/// Conventions (Heisenberg picture, `U† a U`):
/// * beam splitter: `a_s → √η a_s + √(1−η) a_e`
/// * phase shift: `a → a e^{−iφ}`
/// * two-mode squeezer: `a_s → √G a_s + √(G−1) a_i†`, `a_i → √G a_i + √(G−1) a_s†`
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChannelSpec {
    BeamSplitter {
        signal: usize,
        environment: usize,
        eta: f64,
    },
    PhaseShift {
        mode: usize,
        phi: f64,
    },
    TwoModeSqueezer {
        signal: usize,
        idler: usize,
        gain: f64,
    },
}

impl ChannelSpec {
    pub fn validate(&self, num_modes: usize) -> Result<()> {
        let check = |m: usize| {
            if m >= num_modes {
                Err(Error::InvalidMode {
                    index: m,
                    modes: num_modes,
                })
            } else {
                Ok(())
            }
        };
        let distinct = |a: usize, b: usize| {
            check(a)?;
            check(b)?;
            if a == b {
                Err(Error::InvalidMode {
                    index: b,
                    modes: num_modes,
                })
            } else {
                Ok(())
            }
        };
        match *self {
            ChannelSpec::BeamSplitter {
                signal,
                environment,
                eta,
            } => {
                distinct(signal, environment)?;
                if !(0.0..=1.0).contains(&eta) {
                    return Err(Error::InvalidParameter {
                        name: "eta",
                        value: eta,
                        reason: "beam-splitter transmissivity must lie in [0, 1]",
                    });
                }
            }
            ChannelSpec::PhaseShift { mode, phi } => {
                check(mode)?;
                if !phi.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "phi",
                        value: phi,
                        reason: "phase must be finite",
                    });
                }
            }
            ChannelSpec::TwoModeSqueezer { signal, idler, gain } => {
                distinct(signal, idler)?;
                if !(gain >= 1.0) || !gain.is_finite() {
                    return Err(Error::InvalidParameter {
                        name: "G",
                        value: gain,
                        reason: "squeezer gain must be finite and at least 1",
                    });
                }
            }
        }
        Ok(())
    }
}

/// Applies `spec` keeping every mode dimension unchanged. Weight pushed
/// outside the basis is added to the tail.
pub fn apply_channel(state: &TruncatedState, spec: &ChannelSpec) -> Result<TruncatedState> {
    apply_channel_with_dims(state, spec, state.mode_dims())
}

/// Applies `spec`, emitting the result on `out_dims`. Only the modes the
/// channel acts on may change size.
pub fn apply_channel_with_dims(
    state: &TruncatedState,
    spec: &ChannelSpec,
    out_dims: &[usize],
) -> Result<TruncatedState> {
    spec.validate(state.num_modes())?;
    let dims = state.mode_dims();
    let targets: &[usize] = match spec {
        ChannelSpec::BeamSplitter {
            signal, environment, ..
        } => &[*signal, *environment],
        ChannelSpec::PhaseShift { .. } => &[],
        ChannelSpec::TwoModeSqueezer { signal, idler, .. } => &[*signal, *idler],
    };
    let mismatch = out_dims.len() != dims.len()
        || dims
            .iter()
            .zip(out_dims)
            .enumerate()
            .any(|(m, (a, b))| a != b && !targets.contains(&m))
        || out_dims.iter().any(|&d| d < 1);
    if mismatch {
        return Err(Error::DimensionMismatch {
            expected: dims.to_vec(),
            found: out_dims.to_vec(),
        });
    }

    match *spec {
        ChannelSpec::PhaseShift { mode, phi } => Ok(phase_shift(state, mode, phi)),
        ChannelSpec::BeamSplitter {
            signal,
            environment,
            eta,
        } => {
            let (dj, dk) = (dims[signal], dims[environment]);
            let map = beam_splitter_map(eta, [dj, dk], [out_dims[signal], out_dims[environment]]);
            Ok(conjugate(state, out_dims, [signal, environment], &map))
        }
        ChannelSpec::TwoModeSqueezer { signal, idler, gain } => {
            let map = squeezer_map(gain, [dims[signal], dims[idler]], [out_dims[signal], out_dims[idler]]);
            Ok(conjugate(state, out_dims, [signal, idler], &map))
        }
    }
}

fn phase_shift(state: &TruncatedState, mode: usize, phi: f64) -> TruncatedState {
    let dims = state.mode_dims();
    let st = strides(dims)[mode];
    let n = |x: usize| ((x / st) % dims[mode]) as f64;
    let mut m = state.matrix().clone();
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            let diff = n(i) - n(j);
            if diff != 0.0 {
                m[(i, j)] *= C64::from_polar(1.0, -phi * diff);
            }
        }
    }
    TruncatedState::from_parts_unchecked(dims.to_vec(), m, state.tail_mass())
}

/// Column-sparse real matrix acting on two modes: `cols[in]` lists
/// `(out, value)` pairs, with local indices `n_first * dim_second + n_second`.
struct LocalMap {
    in_dims: [usize; 2],
    out_dims: [usize; 2],
    cols: Vec<Vec<(usize, f64)>>,
}

/// `exp(K)` for the real antisymmetric tridiagonal `K` with `K[t+1,t] = sub[t]`.
///
/// With `D = diag(iᵗ)`, `D⁻¹ K D = −i S` for the symmetric `S` sharing the
/// off-diagonal, so `exp(K) = D exp(−iS) D⁻¹` follows from one real
/// symmetric eigendecomposition.
fn expm_antisymmetric_tridiagonal(sub: &[f64]) -> DMatrix<f64> {
    let n = sub.len() + 1;
    if n == 1 {
        return DMatrix::identity(1, 1);
    }
    let mut s = DMatrix::zeros(n, n);
    for (t, &v) in sub.iter().enumerate() {
        s[(t + 1, t)] = v;
        s[(t, t + 1)] = v;
    }
    let eig = SymmetricEigen::new(s);
    let v = &eig.eigenvectors;
    let cos_v = DMatrix::from_fn(n, n, |i, q| v[(i, q)] * eig.eigenvalues[q].cos());
    let sin_v = DMatrix::from_fn(n, n, |i, q| v[(i, q)] * eig.eigenvalues[q].sin());
    let c = &cos_v * v.transpose();
    let sn = &sin_v * v.transpose();
    DMatrix::from_fn(n, n, |a, b| match (a + 4 - b % 4) % 4 {
        0 => c[(a, b)],
        1 => sn[(a, b)],
        2 => -c[(a, b)],
        _ => -sn[(a, b)],
    })
}

/// Block of the beam-splitter unitary on the `total`-photon subspace,
/// indexed by the photon number of the first mode.
fn beam_splitter_block(theta: f64, total: usize) -> DMatrix<f64> {
    let sub: Vec<f64> = (0..total)
        .map(|m| theta * (((m + 1) * (total - m)) as f64).sqrt())
        .collect();
    expm_antisymmetric_tridiagonal(&sub)
}

fn beam_splitter_map(eta: f64, in_dims: [usize; 2], out_dims: [usize; 2]) -> LocalMap {
    let theta = eta.sqrt().acos();
    let [dj, dk] = in_dims;
    let [oj, ok] = out_dims;
    let mut cols = vec![Vec::new(); dj * dk];
    for total in 0..dj + dk - 1 {
        let block = beam_splitter_block(theta, total);
        for m in total.saturating_sub(dk - 1)..=total.min(dj - 1) {
            let col = &mut cols[m * dk + (total - m)];
            for m_out in total.saturating_sub(ok - 1)..=total.min(oj - 1) {
                let v = block[(m_out, m)];
                if v != 0.0 {
                    col.push((m_out * ok + (total - m_out), v));
                }
            }
        }
    }
    LocalMap {
        in_dims,
        out_dims,
        cols,
    }
}

/// The two-mode squeezer conserves `n_signal − n_idler`; each such block is
/// an infinite tridiagonal chain, cut far enough past the needed levels that
/// the boundary does not reach them (amplitudes decay like `tanh(r)^t`).
fn squeezer_map(gain: f64, in_dims: [usize; 2], out_dims: [usize; 2]) -> LocalMap {
    let r = gain.sqrt().acosh();
    let tanh_r = ((gain - 1.0) / gain).sqrt();
    let pad = if tanh_r > 0.0 {
        ((1e-17f64).ln() / tanh_r.ln()).ceil() as usize + 8
    } else {
        0
    };
    let [dj, dk] = in_dims;
    let [oj, ok] = out_dims;
    let mut cols = vec![Vec::new(); dj * dk];
    let lo = -(dk as isize - 1);
    let hi = dj as isize - 1;
    for delta in lo..=hi {
        let (p0, q0) = if delta >= 0 {
            (delta as usize, 0)
        } else {
            (0, (-delta) as usize)
        };
        let t_in = (dj - p0).min(dk - q0);
        let t_out = oj.saturating_sub(p0).min(ok.saturating_sub(q0));
        if t_out == 0 {
            continue;
        }
        let len = if r == 0.0 {
            t_in.max(t_out)
        } else {
            t_in.max(t_out) + pad
        };
        let sub: Vec<f64> = (0..len - 1)
            .map(|t| r * (((p0 + t + 1) * (q0 + t + 1)) as f64).sqrt())
            .collect();
        let block = expm_antisymmetric_tridiagonal(&sub);
        for t in 0..t_in {
            let col = &mut cols[(p0 + t) * dk + (q0 + t)];
            for u in 0..t_out {
                let v = block[(u, t)];
                if v != 0.0 {
                    col.push(((p0 + u) * ok + (q0 + u), v));
                }
            }
        }
    }
    LocalMap {
        in_dims,
        out_dims,
        cols,
    }
}

/// Applies a two-mode local map to the row index of `mat` (`U · mat`).
fn apply_on_rows(
    mat: &DMatrix<C64>,
    dims_in: &[usize],
    dims_out: &[usize],
    targets: [usize; 2],
    map: &LocalMap,
) -> DMatrix<C64> {
    let [j, k] = targets;
    let st_in = strides(dims_in);
    let st_out = strides(dims_out);
    let rows_in = side_of(dims_in);
    let rows_out = side_of(dims_out);
    debug_assert_eq!(mat.nrows(), rows_in);

    let mut local_in = Vec::with_capacity(rows_in);
    let mut base_out = Vec::with_capacity(rows_in);
    for x in 0..rows_in {
        let digit = |m: usize| (x / st_in[m]) % dims_in[m];
        local_in.push(digit(j) * map.in_dims[1] + digit(k));
        base_out.push(
            (0..dims_in.len())
                .filter(|&m| m != j && m != k)
                .map(|m| digit(m) * st_out[m])
                .sum::<usize>(),
        );
    }
    let off_out: Vec<usize> = (0..map.out_dims[0] * map.out_dims[1])
        .map(|lo| (lo / map.out_dims[1]) * st_out[j] + (lo % map.out_dims[1]) * st_out[k])
        .collect();

    let mut out = DMatrix::<C64>::zeros(rows_out, mat.ncols());
    out.as_mut_slice()
        .par_chunks_mut(rows_out)
        .zip(mat.as_slice().par_chunks(rows_in))
        .for_each(|(dst, src)| {
            for (x, &v) in src.iter().enumerate() {
                if v == C64::new(0.0, 0.0) {
                    continue;
                }
                let base = base_out[x];
                for &(lo, w) in &map.cols[local_in[x]] {
                    dst[base + off_out[lo]] += v * w;
                }
            }
        });
    out
}

fn conjugate(state: &TruncatedState, out_dims: &[usize], targets: [usize; 2], map: &LocalMap) -> TruncatedState {
    let dims = state.mode_dims();
    let w = apply_on_rows(state.matrix(), dims, out_dims, targets, map);
    let z = apply_on_rows(&w.adjoint(), dims, out_dims, targets, map);
    let rho = z.adjoint();
    let lost = 1.0 - rho.trace().re;
    TruncatedState::from_parts_unchecked(out_dims.to_vec(), rho, state.tail_mass()).renormalized(lost)
}

/// Mixes `mode` with a thermal environment on a beam splitter of
/// transmissivity `eta` and discards the environment.
///
/// This is the composition attach-thermal → beam splitter → partial trace,
/// evaluated without materialising the joint state: with the environment
/// diagonal and the beam splitter conserving total photon number, the map
/// reduces to a table `T(s, s' | a, a')` over the kept mode alone. `out_dim`
/// defaults to the full reachable support.
pub fn mix_with_thermal(
    state: &TruncatedState,
    mode: usize,
    eta: f64,
    n_th: f64,
    out_dim: Option<usize>,
    trunc: &Truncation,
) -> Result<TruncatedState> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            reason: "beam-splitter transmissivity must lie in [0, 1]",
        });
    }
    if !(n_th >= 0.0) || !n_th.is_finite() {
        return Err(Error::InvalidParameter {
            name: "n_th",
            value: n_th,
            reason: "thermal occupation must be finite and non-negative",
        });
    }
    if mode >= state.num_modes() {
        return Err(Error::InvalidMode {
            index: mode,
            modes: state.num_modes(),
        });
    }
    let lambda = if n_th > 0.0 { n_th / (1.0 + n_th) } else { 0.0 };
    let env = make_thermal(n_th, geometric_dim(lambda, trunc.tail_target), trunc)?;
    let env_p: Vec<f64> = (0..env.side()).map(|k| env.matrix()[(k, k)].re).collect();
    let d_env = env_p.len();

    let dims = state.mode_dims();
    let d_in = dims[mode];
    let d_out = out_dim.unwrap_or(d_in + d_env - 1);
    if d_out < 1 {
        return Err(Error::InvalidDimension { dim: d_out, min: 1 });
    }
    let mut out_dims = dims.to_vec();
    out_dims[mode] = d_out;
    let side_out = side_of(&out_dims);
    if side_out > trunc.side_cap {
        return Err(Error::Capacity {
            side: side_out,
            cap: trunc.side_cap,
        });
    }

    let theta = eta.sqrt().acos();
    let blocks: Vec<DMatrix<f64>> = (0..d_in + d_env - 1)
        .map(|total| beam_splitter_block(theta, total))
        .collect();

    // table[(a * d_in + a') * d_out + s]; the partner output level is s' = s − a + a'
    let mut table = vec![0.0f64; d_in * d_in * d_out];
    for a in 0..d_in {
        for ap in 0..d_in {
            for s in 0..d_out {
                let sp = s as isize - a as isize + ap as isize;
                if sp < 0 || sp as usize >= d_out {
                    continue;
                }
                let sp = sp as usize;
                let mut acc = 0.0;
                for (k, &p) in env_p.iter().enumerate() {
                    if s > a + k || sp > ap + k || p == 0.0 {
                        continue;
                    }
                    acc += p * blocks[a + k][(s, a)] * blocks[ap + k][(sp, ap)];
                }
                table[(a * d_in + ap) * d_out + s] = acc;
            }
        }
    }

    let st_in = strides(dims);
    let st_out = strides(&out_dims);
    let side_rest = state.side() / d_in;
    let mut rest_in = Vec::with_capacity(side_rest);
    let mut rest_out = Vec::with_capacity(side_rest);
    for x in 0..state.side() {
        if !(x / st_in[mode]).is_multiple_of(d_in) {
            continue;
        }
        rest_in.push(x);
        rest_out.push(
            (0..dims.len())
                .filter(|&m| m != mode)
                .map(|m| ((x / st_in[m]) % dims[m]) * st_out[m])
                .sum::<usize>(),
        );
    }
    let (si, so) = (st_in[mode], st_out[mode]);
    let rho = state.matrix();
    let rows_in = state.side();

    let mut out = DMatrix::<C64>::zeros(side_out, side_out);
    out.as_mut_slice()
        .par_chunks_mut(side_out)
        .enumerate()
        .for_each(|(y_out, dst)| {
            let sp = (y_out / so) % d_out;
            let rest_col = y_out - sp * so;
            let Some(rc) = rest_out.iter().position(|&r| r == rest_col) else {
                return;
            };
            for ap in 0..d_in {
                let y = rest_in[rc] + ap * si;
                let col = &rho.as_slice()[y * rows_in..(y + 1) * rows_in];
                for (&ri, &ro) in rest_in.iter().zip(&rest_out) {
                    for a in 0..d_in {
                        let v = col[ri + a * si];
                        if v == C64::new(0.0, 0.0) {
                            continue;
                        }
                        let s = sp as isize + a as isize - ap as isize;
                        if s < 0 || s as usize >= d_out {
                            continue;
                        }
                        let s = s as usize;
                        let w = table[(a * d_in + ap) * d_out + s];
                        if w != 0.0 {
                            dst[ro + s * so] += v * w;
                        }
                    }
                }
            }
        });
    let lost = 1.0 - out.trace().re;
    Ok(TruncatedState::from_parts_unchecked(out_dims, out, state.tail_mass() + env.tail_mass()).renormalized(lost))
}
