//! Oracle pipelines: the protocols replayed step by step on a truncated
//! Fock basis.
//!
//! Bases are sized per stage rather than by global doubling. Every stage may
//! discard at most `step` probability; the basis for each new output is
//! predicted from its (thermal) marginal, enlarged if the prediction was
//! short, then trimmed back to the smallest size within budget.

use serde::Serialize;

use super::{PipelineOrder, Protocol};
use crate::fock::{
    apply_channel, apply_channel_with_dims, geometric_dim, make_coherent, make_tmsv, mix_with_thermal, observable_snr,
    poisson_dim, ChannelSpec, ModeOperator, TruncatedState, Truncation, C64,
};
use crate::{ProtocolParams, Result, SnrBreakdown};

/// Total discarded probability the pipelines aim for.
pub const TAIL_TARGET: f64 = 1e-10;

const SIGNAL: usize = 0;
const IDLER: usize = 1;

/// One oracle evaluation of a protocol at a parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleRun {
    pub breakdown: SnrBreakdown,
    /// Largest tail mass of the two states compared.
    pub tail_mass: f64,
    /// Mode dimensions the observable was evaluated on.
    pub dims: Vec<usize>,
    /// False when the side cap forced a basis smaller than the tail target
    /// asked for.
    pub converged: bool,
}

struct Sizer {
    step: f64,
    cap: usize,
    clamped: bool,
}

impl Sizer {
    fn trunc(&self) -> Truncation {
        Truncation {
            tail_target: self.step,
            side_cap: self.cap,
            allow_growth: true,
        }
    }

    /// Largest dimension `mode` may take given the other modes of `dims`.
    fn room(&self, dims: &[usize], mode: usize) -> usize {
        let rest: usize = dims
            .iter()
            .enumerate()
            .filter(|&(m, _)| m != mode)
            .map(|(_, d)| d)
            .product();
        (self.cap / rest.max(1)).max(2)
    }

    fn clamp(&mut self, want: usize, room: usize) -> usize {
        if want > room {
            self.clamped = true;
            room
        } else {
            want
        }
    }
}

fn thermal_dim(mean: f64, budget: f64) -> usize {
    geometric_dim(mean / (1.0 + mean), budget)
}

fn source(protocol: Protocol, p: &ProtocolParams, sz: &mut Sizer) -> Result<TruncatedState> {
    let t = sz.trunc();
    match protocol {
        Protocol::Classical => {
            let n = p.n_signal;
            make_coherent(C64::new(n.sqrt(), 0.0), poisson_dim(n, sz.step), &t)
        }
        _ => {
            let d = thermal_dim(p.n_signal, sz.step);
            let d = sz.clamp(d, (sz.cap as f64).sqrt() as usize);
            make_tmsv(
                p.n_signal,
                d,
                &Truncation {
                    allow_growth: false,
                    tail_target: 1.0,
                    ..t
                },
            )
        }
    }
}

/// Mixes the signal with the thermal background and drops the environment.
fn background(state: &TruncatedState, p: &ProtocolParams, paired: bool, sz: &mut Sizer) -> Result<TruncatedState> {
    let d_in = state.mode_dims()[SIGNAL];
    let full = d_in + thermal_dim(p.n_th, sz.step) - 1;
    let room = sz.room(state.mode_dims(), SIGNAL);
    // a signal half of a pair leaves as a thermal marginal of mean M
    let mut d = if paired {
        let m = p.eta * p.n_signal + (1.0 - p.eta) * p.n_th;
        thermal_dim(m, sz.step).max(d_in).min(full)
    } else {
        full
    };
    loop {
        let dc = sz.clamp(d, room);
        let out = mix_with_thermal(state, SIGNAL, p.eta, p.n_th, Some(dc), &sz.trunc())?;
        let lost = out.tail_mass() - state.tail_mass();
        if lost <= 2.0 * sz.step || dc >= full || dc < d {
            return out.fit_mode(SIGNAL, sz.step);
        }
        d = (d * 3).div_ceil(2).min(full);
    }
}

fn phase(state: &TruncatedState, phi: f64) -> Result<TruncatedState> {
    apply_channel(state, &ChannelSpec::PhaseShift { mode: SIGNAL, phi })
}

fn expect_re(state: &TruncatedState, op: &ModeOperator) -> Result<f64> {
    Ok(crate::fock::expectation(state, op)?.re)
}

/// Two-mode squeezing on signal and idler. Output marginals of a
/// phase-covariant Gaussian input stay thermal, so their sizes follow from
/// the Heisenberg-picture occupations.
fn mixer(state: &TruncatedState, gain: f64, sz: &mut Sizer) -> Result<TruncatedState> {
    let dims = state.mode_dims().to_vec();
    let a1 = ModeOperator::lowering(&dims, SIGNAL)?;
    let a2 = ModeOperator::lowering(&dims, IDLER)?;
    let n1 = state.mean_photons(SIGNAL)?;
    let n2 = state.mean_photons(IDLER)?;
    let pair = expect_re(state, &(&a1 * &a2))?;
    let mix = 2.0 * (gain * (gain - 1.0)).sqrt() * pair;
    let out1 = gain * n1 + (gain - 1.0) * (n2 + 1.0) + mix;
    let out2 = gain * n2 + (gain - 1.0) * (n1 + 1.0) + mix;
    // both marginals are cut, so each gets half the budget
    let mut want = [
        thermal_dim(out1, sz.step / 2.0).max(dims[SIGNAL]),
        thermal_dim(out2, sz.step / 2.0).max(dims[IDLER]),
    ];
    let spec = ChannelSpec::TwoModeSqueezer {
        signal: SIGNAL,
        idler: IDLER,
        gain,
    };
    loop {
        let mut out_dims = want.to_vec();
        let over = out_dims[0] * out_dims[1] > sz.cap;
        if over {
            sz.clamped = true;
            let scale = (sz.cap as f64 / (out_dims[0] * out_dims[1]) as f64).sqrt();
            for d in out_dims.iter_mut() {
                *d = ((*d as f64 * scale).floor() as usize).max(2);
            }
        }
        let out = apply_channel_with_dims(state, &spec, &out_dims)?;
        if out.tail_mass() - state.tail_mass() <= sz.step || over {
            return out.fit_mode(SIGNAL, sz.step)?.fit_mode(IDLER, sz.step);
        }
        want = want.map(|d| d + (d / 8).max(2));
    }
}

/// Photocounters of efficiency χ: a vacuum beam splitter before each mode.
fn detectors(state: &TruncatedState, chi: f64, sz: &Sizer) -> Result<TruncatedState> {
    let mut s = state.clone();
    for mode in [SIGNAL, IDLER] {
        let d = s.mode_dims()[mode];
        s = mix_with_thermal(&s, mode, chi, 0.0, Some(d), &sz.trunc())?;
    }
    Ok(s)
}

fn prepared(
    protocol: Protocol,
    p: &ProtocolParams,
    order: PipelineOrder,
    phi: f64,
    shared: Option<&TruncatedState>,
    sz: &mut Sizer,
) -> Result<TruncatedState> {
    let paired = protocol != Protocol::Classical;
    let mut s = match (order, shared) {
        (PipelineOrder::BackgroundFirst, Some(after_background)) => phase(after_background, phi)?,
        (PipelineOrder::BackgroundFirst, None) => {
            let src = source(protocol, p, sz)?;
            phase(&background(&src, p, paired, sz)?, phi)?
        }
        (PipelineOrder::CloakFirst, _) => {
            let src = source(protocol, p, sz)?;
            background(&phase(&src, phi)?, p, paired, sz)?
        }
    };
    if matches!(protocol, Protocol::QuantumJm | Protocol::QuantumJmImperfect) {
        s = mixer(&s, p.gain, sz)?;
    }
    if protocol == Protocol::QuantumJmImperfect {
        s = detectors(&s, p.chi, sz)?;
    }
    Ok(s)
}

fn observable(protocol: Protocol, dims: &[usize], gain: f64) -> Result<ModeOperator> {
    Ok(match protocol {
        Protocol::Classical => ModeOperator::quadrature_x(dims, SIGNAL)?,
        Protocol::QuantumQuadrature => {
            let x = |m| ModeOperator::quadrature_x(dims, m);
            let p = |m| ModeOperator::quadrature_p(dims, m);
            &(&x(SIGNAL)? * &x(IDLER)?) - &(&p(SIGNAL)? * &p(IDLER)?)
        }
        Protocol::QuantumJm | Protocol::QuantumJmImperfect => {
            &(&ModeOperator::number(dims, IDLER)? * gain) - &(&ModeOperator::number(dims, SIGNAL)? * (gain - 1.0))
        }
    }
    .with_label(protocol.name()))
}

fn pad_to(state: &TruncatedState, dims: &[usize]) -> Result<TruncatedState> {
    let mut s = state.clone();
    for (m, &d) in dims.iter().enumerate() {
        s = s.pad_mode(m, d)?;
    }
    Ok(s)
}

/// Runs `protocol` at `phi` and at zero phase and evaluates its observable.
pub fn run_oracle(protocol: Protocol, p: &ProtocolParams, order: PipelineOrder, side_cap: usize) -> Result<OracleRun> {
    p.validate()?;
    let mut sz = Sizer {
        step: TAIL_TARGET / 4.0,
        cap: side_cap,
        clamped: false,
    };
    let shared = match order {
        PipelineOrder::BackgroundFirst => {
            let src = source(protocol, p, &mut sz)?;
            Some(background(&src, p, protocol != Protocol::Classical, &mut sz)?)
        }
        PipelineOrder::CloakFirst => None,
    };
    let at_phi = prepared(protocol, p, order, p.phi, shared.as_ref(), &mut sz)?;
    let at_zero = prepared(protocol, p, order, 0.0, shared.as_ref(), &mut sz)?;
    let dims: Vec<usize> = at_phi
        .mode_dims()
        .iter()
        .zip(at_zero.mode_dims())
        .map(|(a, b)| *a.max(b))
        .collect();
    let (at_phi, at_zero) = (pad_to(&at_phi, &dims)?, pad_to(&at_zero, &dims)?);
    let obs = observable(protocol, &dims, p.gain)?;
    let breakdown = observable_snr(&at_phi, &at_zero, &obs)?;
    Ok(OracleRun {
        breakdown,
        tail_mass: at_phi.tail_mass().max(at_zero.tail_mass()),
        dims,
        converged: !sz.clamped,
    })
}
