//! Closed-form signal-to-noise ratios.
//!
//! Notation used throughout: `c = cos φ`, `s = √(N(N+1))`, the thermal
//! excess `x = (1−η) n_th`, and the mean occupation of the returning signal
//! `M = ηN + x`. Ratios against the classical protocol are written in forms
//! that stay finite as `η → 0` and `N → 0`.

use serde::Serialize;

use crate::{Error, Result};

/// The physical knobs shared by every formula.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProtocolParams {
    /// Mean signal photon number `N`.
    #[serde(rename = "N")]
    pub n_signal: f64,
    /// Thermal occupation of the background.
    pub n_th: f64,
    /// Background reflectivity (beam-splitter transmissivity of the signal).
    pub eta: f64,
    /// Phase imprinted by the cloak, radians.
    pub phi: f64,
    /// Josephson-mixer gain `G ≥ 1`.
    #[serde(rename = "G")]
    pub gain: f64,
    /// Photocounter efficiency.
    pub chi: f64,
}

/// Default mixer gain `1 + max(N, 10⁻³)`.
pub fn default_gain(n_signal: f64) -> f64 {
    1.0 + n_signal.max(1e-3)
}

impl ProtocolParams {
    /// Parameters with the default gain and perfect photocounters.
    pub fn new(n_signal: f64, n_th: f64, eta: f64, phi: f64) -> Self {
        Self {
            n_signal,
            n_th,
            eta,
            phi,
            gain: default_gain(n_signal),
            chi: 1.0,
        }
    }

    pub fn with_gain(mut self, gain: f64) -> Self {
        self.gain = gain;
        self
    }

    pub fn with_chi(mut self, chi: f64) -> Self {
        self.chi = chi;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |name, value, reason| Err(Error::InvalidParameter { name, value, reason });
        if !(self.n_signal >= 0.0) || !self.n_signal.is_finite() {
            return bad("N", self.n_signal, "must be finite and non-negative");
        }
        if !(self.n_th >= 0.0) || !self.n_th.is_finite() {
            return bad("n_th", self.n_th, "must be finite and non-negative");
        }
        if !(0.0..=1.0).contains(&self.eta) {
            return bad("eta", self.eta, "must lie in [0, 1]");
        }
        if !self.phi.is_finite() {
            return bad("phi", self.phi, "must be finite");
        }
        if !(self.gain >= 1.0) || !self.gain.is_finite() {
            return bad("G", self.gain, "must be finite and at least 1");
        }
        if !(0.0..=1.0).contains(&self.chi) {
            return bad("chi", self.chi, "must lie in [0, 1]");
        }
        Ok(())
    }

    fn cos_phi(&self) -> f64 {
        self.phi.cos()
    }

    fn thermal_excess(&self) -> f64 {
        (1.0 - self.eta) * self.n_th
    }

    fn returning_mean(&self) -> f64 {
        self.eta * self.n_signal + self.thermal_excess()
    }

    fn pair_amplitude(&self) -> f64 {
        (self.n_signal * (self.n_signal + 1.0)).sqrt()
    }
}

/// Signal, noise and the raw moments they came from.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SnrBreakdown {
    pub signal_sq: f64,
    pub noise_var: f64,
    pub snr: f64,
    pub mean_at_phi: f64,
    pub mean_at_zero: f64,
    pub second_moment: f64,
}

impl SnrBreakdown {
    fn assemble(signal_sq: f64, noise_var: f64, mean_at_phi: f64, mean_at_zero: f64, second_moment: f64) -> Self {
        Self {
            signal_sq,
            noise_var,
            snr: signal_sq / noise_var,
            mean_at_phi,
            mean_at_zero,
            second_moment,
        }
    }
}

/// Coherent probe, homodyne measurement of `x`.
pub fn classical_snr(p: &ProtocolParams) -> Result<SnrBreakdown> {
    p.validate()?;
    let c = p.cos_phi();
    let amp = (2.0 * p.eta * p.n_signal).sqrt();
    let mean_at_phi = amp * c;
    let noise_var = p.eta / 2.0 + (1.0 - p.eta) * (p.n_th + 0.5);
    let signal_sq = 2.0 * p.eta * p.n_signal * (1.0 - c).powi(2);
    Ok(SnrBreakdown::assemble(
        signal_sq,
        noise_var,
        mean_at_phi,
        amp,
        noise_var + mean_at_phi * mean_at_phi,
    ))
}

/// Two-mode squeezed probe, joint measurement of `x₁x₂ − p₁p₂`.
pub fn quantum_snr(p: &ProtocolParams) -> Result<SnrBreakdown> {
    p.validate()?;
    let c = p.cos_phi();
    let nn1 = p.n_signal * (p.n_signal + 1.0);
    let mean_at_zero = 2.0 * p.eta.sqrt() * p.pair_amplitude();
    let background = (1.0 - p.eta) * (2.0 * p.n_th * p.n_signal + p.n_th + p.n_signal + 1.0);
    let noise_var = p.eta * (1.0 + 4.0 * nn1 * c * c) + background;
    let second_moment = p.eta * (1.0 + 8.0 * nn1 * c * c) + background;
    let signal_sq = 4.0 * p.eta * nn1 * (1.0 - c).powi(2);
    Ok(SnrBreakdown::assemble(
        signal_sq,
        noise_var,
        mean_at_zero * c,
        mean_at_zero,
        second_moment,
    ))
}

fn require_eta_positive(eta: f64) -> Result<()> {
    if eta <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            reason: "the ratio to the classical protocol needs eta > 0",
        });
    }
    Ok(())
}

/// Quantum-quadrature SNR over classical SNR, evaluated in closed form so
/// that it extends continuously to `φ → 0`.
pub fn snr_ratio(p: &ProtocolParams) -> Result<f64> {
    p.validate()?;
    require_eta_positive(p.eta)?;
    if p.n_signal == 0.0 && p.cos_phi() == 1.0 {
        return Err(Error::IndeterminateRatio);
    }
    let c = p.cos_phi();
    let n = p.n_signal;
    let x = p.thermal_excess();
    let den = p.eta * (1.0 + 4.0 * n * (n + 1.0) * c * c) + (1.0 - p.eta) * (2.0 * p.n_th * n + p.n_th + n + 1.0);
    Ok((n + 1.0) * (1.0 + 2.0 * x) / den)
}

/// Zero- and first-order terms of [`snr_ratio`] in `N`.
pub fn ratio_small_n_expansion(p: &ProtocolParams) -> Result<f64> {
    p.validate()?;
    require_eta_positive(p.eta)?;
    let c = p.cos_phi();
    let x = p.thermal_excess();
    let a = 1.0 + 2.0 * x;
    let d = 1.0 + x;
    Ok(a / d + (p.eta * (1.0 - 4.0 * c * c) - x) * a / (d * d) * p.n_signal)
}

/// Largest `N` for which the quadrature protocol beats the classical one at
/// `φ = π`; the positive root of `4N² + 3N − k = 0` with `k = (1−η) n_th / η`.
pub fn gain_region_upper_bound(eta: f64, n_th: f64) -> Result<f64> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::InvalidParameter {
            name: "eta",
            value: eta,
            reason: "must lie in (0, 1]",
        });
    }
    if !(n_th >= 0.0) || !n_th.is_finite() {
        return Err(Error::InvalidParameter {
            name: "n_th",
            value: n_th,
            reason: "must be finite and non-negative",
        });
    }
    let k = (1.0 - eta) / eta * n_th;
    Ok(2.0 * k / (3.0 + (9.0 + 16.0 * k).sqrt()))
}

/// How the cross-correlation term of the mixer output couples to the
/// background reflectivity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum EtaCoupling {
    /// `√η`, the amplitude transmissivity. Agrees with the Fock oracle.
    #[default]
    SqrtEta,
    /// `η`, kept for comparison.
    Eta,
}

/// `⟨O⟩` for `O = G n₂ − (G−1) n₁` after the mixer.
pub fn jm_output_mean(p: &ProtocolParams, coupling: EtaCoupling) -> Result<f64> {
    p.validate()?;
    let g = p.gain;
    let kappa = match coupling {
        EtaCoupling::SqrtEta => p.eta.sqrt(),
        EtaCoupling::Eta => p.eta,
    };
    Ok((g - 1.0)
        + (2.0 * g - 1.0) * p.n_signal
        + 2.0 * (g * (g - 1.0)).sqrt() * kappa * p.cos_phi() * p.pair_amplitude())
}

fn require_gain(p: &ProtocolParams) -> Result<()> {
    if p.gain == 1.0 {
        return Err(Error::ZeroSignal("a mixer with unit gain carries no phase information"));
    }
    Ok(())
}

/// Variance of `O` at the actual phase.
fn jm_noise_var(p: &ProtocolParams) -> f64 {
    let (g, n, c) = (p.gain, p.n_signal, p.cos_phi());
    let nn1 = n * (n + 1.0);
    let gg1 = g * (g - 1.0);
    let cross = 2.0 * (2.0 * g - 1.0) * gg1.sqrt() * (2.0 * n + 1.0) * p.eta.sqrt() * c * p.pair_amplitude();
    (2.0 * g - 1.0).powi(2) * nn1
        + gg1 * (2.0 * p.eta * nn1 * (2.0 * p.phi).cos() + p.returning_mean() * (2.0 * n + 1.0) + n + 1.0)
        + cross
}

/// Two-mode squeezed probe followed by the Josephson mixer and ideal
/// photocounting of `O`.
pub fn jm_snr(p: &ProtocolParams) -> Result<SnrBreakdown> {
    p.validate()?;
    require_gain(p)?;
    let c = p.cos_phi();
    let g = p.gain;
    let mean_at_phi = jm_output_mean(p, EtaCoupling::SqrtEta)?;
    let mean_at_zero = jm_output_mean(&ProtocolParams { phi: 0.0, ..*p }, EtaCoupling::SqrtEta)?;
    let noise_var = jm_noise_var(p);
    let signal_sq = 4.0 * p.eta * g * (g - 1.0) * p.n_signal * (p.n_signal + 1.0) * (1.0 - c).powi(2);
    Ok(SnrBreakdown::assemble(
        signal_sq,
        noise_var,
        mean_at_phi,
        mean_at_zero,
        noise_var + mean_at_phi * mean_at_phi,
    ))
}

/// The closed-form `σ²` for the mixer protocol in its circulated
/// typesetting, with the undefined `M(M+1)` read as `N(N+1)`. It disagrees
/// with the Fock oracle and is exposed only so that the disagreement can be
/// shown.
pub fn jm_noise_var_as_printed(p: &ProtocolParams) -> Result<f64> {
    p.validate()?;
    let (g, n, nth, eta, c) = (p.gain, p.n_signal, p.n_th, p.eta, p.cos_phi());
    let se = eta.sqrt();
    Ok(1.0 + n + n * n + 2.0 * nth + 2.0 * n * eta
        - 2.0 * nth * eta
        - g * (3.0 + 4.0 * n * n + 5.0 * nth - 5.0 * nth * eta + n * (7.0 + 2.0 * nth + 3.0 * eta - 2.0 * nth * eta))
        + g * g * (2.0 + 4.0 * n * n + 3.0 * nth - 3.0 * nth * eta + n * (7.0 + 2.0 * nth + eta - 2.0 * nth * eta))
        + 2.0
            * (g * (g - 1.0)).sqrt()
            * p.pair_amplitude()
            * ((2.0 * g - 1.0) * (1.0 + 2.0 * n) + 2.0 * (g - 1.0) * se)
            * se
            * c
        + 4.0 * g * (g - 1.0) * n * (n + 1.0) * eta * c * c)
}

/// [`jm_snr`] over [`classical_snr`], continuous at `φ → 0`.
pub fn jm_ratio(p: &ProtocolParams) -> Result<f64> {
    p.validate()?;
    require_eta_positive(p.eta)?;
    require_gain(p)?;
    let g = p.gain;
    Ok(g * (g - 1.0) * (p.n_signal + 1.0) * (1.0 + 2.0 * p.thermal_excess()) / jm_noise_var(p))
}

/// Mean photon numbers `(⟨n₁⟩, ⟨n₂⟩)` of the two mixer outputs.
fn jm_output_occupations(p: &ProtocolParams) -> (f64, f64) {
    let g = p.gain;
    let m = p.returning_mean();
    let cross = 2.0 * (g * (g - 1.0)).sqrt() * p.eta.sqrt() * p.cos_phi() * p.pair_amplitude();
    let n1 = g * m + (g - 1.0) * (p.n_signal + 1.0) + cross;
    let n2 = g * p.n_signal + (g - 1.0) * (m + 1.0) + cross;
    (n1, n2)
}

/// Detector loss adds binomial partition noise `χ(1−χ) Σ wᵢ² ⟨nᵢ⟩` to the
/// thinned variance.
fn imperfect_noise_var(p: &ProtocolParams) -> f64 {
    let g = p.gain;
    let (n1, n2) = jm_output_occupations(p);
    let partition = g * g * n2 + (g - 1.0).powi(2) * n1;
    p.chi * p.chi * jm_noise_var(p) + p.chi * (1.0 - p.chi) * partition
}

fn require_chi(p: &ProtocolParams) -> Result<()> {
    if p.chi == 0.0 {
        return Err(Error::ZeroSignal("photocounters with zero efficiency see only vacuum"));
    }
    Ok(())
}

/// [`jm_snr`] with photocounters of efficiency `χ`.
pub fn imperfect_jm_snr(p: &ProtocolParams) -> Result<SnrBreakdown> {
    let ideal = jm_snr(p)?;
    require_chi(p)?;
    let chi = p.chi;
    let noise_var = imperfect_noise_var(p);
    let mean_at_phi = chi * ideal.mean_at_phi;
    Ok(SnrBreakdown::assemble(
        chi * chi * ideal.signal_sq,
        noise_var,
        mean_at_phi,
        chi * ideal.mean_at_zero,
        noise_var + mean_at_phi * mean_at_phi,
    ))
}

/// [`imperfect_jm_snr`] over [`classical_snr`], continuous at `φ → 0`.
pub fn imperfect_jm_ratio(p: &ProtocolParams) -> Result<f64> {
    p.validate()?;
    require_eta_positive(p.eta)?;
    require_gain(p)?;
    require_chi(p)?;
    let g = p.gain;
    Ok(p.chi * p.chi * g * (g - 1.0) * (p.n_signal + 1.0) * (1.0 + 2.0 * p.thermal_excess()) / imperfect_noise_var(p))
}

fn asymptotic_inputs(p: &ProtocolParams) -> Result<(f64, f64)> {
    p.validate()?;
    let eps = p.gain - 1.0;
    if eps <= 0.0 {
        return Err(Error::InvalidParameter {
            name: "G",
            value: p.gain,
            reason: "the asymptotic forms need G > 1",
        });
    }
    let x = p.thermal_excess();
    if x <= 0.0 {
        return Err(Error::OutOfRegime(
            "the thermal excess n_th(1-eta) must be positive".into(),
        ));
    }
    Ok((eps, x))
}

/// Small-`N`, small-`ε`, large-`n_th(1−η)` limit of [`jm_ratio`]:
/// `2 − (4√(ηN/ε) + 1) / (n_th(1−η))` with `ε = G − 1`.
pub fn jm_ratio_asymptotic(p: &ProtocolParams) -> Result<f64> {
    let (eps, x) = asymptotic_inputs(p)?;
    Ok(2.0 - (4.0 * (p.eta * p.n_signal / eps).sqrt() + 1.0) / x)
}

/// Sign convention for the correction term of [`imperfect_ratio_asymptotic`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum AsymptoteForm {
    /// `2χ/(1+2ε(1−χ)) − χ(4√(ηN/ε)+1)/x`, which reduces to
    /// [`jm_ratio_asymptotic`] at `χ = 1` and tracks the exact ratio.
    #[default]
    Derived,
    /// `2χ/(1+2ε(1−χ)) + (4χ√(ηN/ε)+1)/x`, the circulated expression.
    AsPrinted,
}

/// Asymptotic ratio with imperfect photocounters.
pub fn imperfect_ratio_asymptotic(p: &ProtocolParams, form: AsymptoteForm) -> Result<f64> {
    let (eps, x) = asymptotic_inputs(p)?;
    let chi = p.chi;
    let lead = 2.0 * chi / (1.0 + 2.0 * eps * (1.0 - chi));
    let root = (p.eta * p.n_signal / eps).sqrt();
    Ok(match form {
        AsymptoteForm::Derived => lead - chi * (4.0 * root + 1.0) / x,
        AsymptoteForm::AsPrinted => lead + (4.0 * chi * root + 1.0) / x,
    })
}

/// Asymptotic photocounter efficiency above which the mixer protocol beats
/// the classical one: `1/2 + 2√(ηN/ε) / (n_th(1−η))`.
///
/// Only meaningful when `ε > ηN / (n_th(1−η))²`.
pub fn efficiency_threshold(p: &ProtocolParams) -> Result<f64> {
    let (eps, x) = asymptotic_inputs(p)?;
    let floor = p.eta * p.n_signal / (x * x);
    if eps <= floor {
        return Err(Error::OutOfRegime(format!(
            "gain excess {eps:e} must exceed eta*N/(n_th(1-eta))^2 = {floor:e}"
        )));
    }
    Ok(0.5 + 2.0 * (p.eta * p.n_signal / eps).sqrt() / x)
}

#[cfg(test)]
mod tests;
