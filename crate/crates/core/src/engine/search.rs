use serde::Serialize;

use crate::analytic::{efficiency_threshold, gain_region_upper_bound, imperfect_jm_ratio, jm_ratio, snr_ratio};
use crate::{Error, ProtocolParams, Result};

/// Bisection on a bracket with `f(lo) > 0 ≥ f(hi)` (or the reverse). Stops
/// once the bracket is below `1e-12` absolute and `1e-13` relative, or when
/// its ends are neighbouring floats.
fn bisect<F>(mut lo: f64, mut hi: f64, f: F) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let lo_positive = f(lo)? > 0.0;
    loop {
        let mid = 0.5 * (lo + hi);
        let width = (hi - lo).abs();
        if (width <= 1e-12 && width <= 1e-13 * mid.abs()) || mid == lo || mid == hi {
            return Ok(mid);
        }
        if (f(mid)? > 0.0) == lo_positive {
            lo = mid;
        } else {
            hi = mid;
        }
    }
}

/// Signal strength `N` above which the quadrature protocol stops beating the
/// classical one, found by bisection on the ratio.
pub fn find_gain_boundary(eta: f64, n_th: f64, phi: f64) -> Result<f64> {
    let bound = gain_region_upper_bound(eta, n_th)?;
    if !phi.is_finite() {
        return Err(Error::InvalidParameter {
            name: "phi",
            value: phi,
            reason: "must be finite",
        });
    }
    let x = (1.0 - eta) * n_th;
    if x <= 0.0 {
        return Err(Error::NoBoundary(
            "without thermal background the ratio never exceeds 1".into(),
        ));
    }
    let excess = |n: f64| -> Result<f64> {
        if n == 0.0 {
            // limit of the ratio at vanishing signal
            return Ok((1.0 + 2.0 * x) / (1.0 + x) - 1.0);
        }
        Ok(snr_ratio(&ProtocolParams::new(n, n_th, eta, phi))? - 1.0)
    };
    let mut hi = if bound > 0.0 { 10.0 * bound } else { 1.0 };
    while excess(hi)? > 0.0 {
        hi *= 10.0;
        if hi > 1e8 {
            return Err(Error::NoBoundary(format!(
                "the ratio stays above 1 up to N = 1e8 at phi = {phi}"
            )));
        }
    }
    bisect(0.0, hi, excess)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EfficiencyBoundary {
    /// Photocounter efficiency at which the imperfect ratio crosses 1.
    pub chi_star: f64,
    /// The asymptotic threshold formula, when its validity condition holds.
    pub asymptotic: Option<f64>,
}

/// Smallest photocounter efficiency at which the mixer protocol beats the
/// classical one.
pub fn find_efficiency_boundary(params: &ProtocolParams) -> Result<EfficiencyBoundary> {
    params.validate()?;
    if params.gain <= 1.0 {
        return Err(Error::InvalidParameter {
            name: "G",
            value: params.gain,
            reason: "the efficiency boundary needs G > 1",
        });
    }
    let excess = |chi: f64| -> Result<f64> {
        if chi == 0.0 {
            return Ok(-1.0);
        }
        Ok(imperfect_jm_ratio(&params.with_chi(chi))? - 1.0)
    };
    if jm_ratio(params)? <= 1.0 {
        return Err(Error::NoBoundary(
            "even perfect photocounters do not beat the classical protocol".into(),
        ));
    }
    let chi_star = bisect(0.0, 1.0, excess)?;
    Ok(EfficiencyBoundary {
        chi_star,
        asymptotic: efficiency_threshold(params).ok(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn gain_boundary_closed_form() {
        let n = find_gain_boundary(0.5, 9.0, PI).unwrap();
        let want = (-3.0 + 153f64.sqrt()) / 8.0;
        assert!((n - want).abs() <= 1e-9 * want, "{n} vs {want}");
    }

    #[test]
    fn no_gain_without_background() {
        assert!(matches!(find_gain_boundary(1.0, 4.0, PI), Err(Error::NoBoundary(_))));
        assert!(matches!(find_gain_boundary(0.7, 0.0, PI), Err(Error::NoBoundary(_))));
        assert!(find_gain_boundary(0.0, 1.0, PI).is_err());
    }

    #[test]
    fn weaker_cosine_moves_boundary_out() {
        let at_pi = find_gain_boundary(0.5, 9.0, PI).unwrap();
        let tilted = find_gain_boundary(0.5, 9.0, 1.2).unwrap();
        assert!(tilted > at_pi);
        let ratio = snr_ratio(&ProtocolParams::new(tilted, 9.0, 0.5, 1.2)).unwrap();
        assert!((ratio - 1.0).abs() < 1e-12);
        // at a right angle the quadratic term vanishes and the ratio never drops to 1
        assert!(matches!(
            find_gain_boundary(0.5, 9.0, PI / 2.0),
            Err(Error::NoBoundary(_))
        ));
    }

    #[test]
    fn efficiency_boundary_lies_above_half() {
        let p = ProtocolParams::new(1e-4, 1e3, 0.99, 0.1).with_gain(1.01);
        let b = find_efficiency_boundary(&p).unwrap();
        assert!(b.chi_star > 0.5 && b.chi_star < 1.0);
        let r = imperfect_jm_ratio(&p.with_chi(b.chi_star)).unwrap();
        assert!((r - 1.0).abs() < 1e-9);
        assert!((b.chi_star - b.asymptotic.unwrap()).abs() < 0.05);
    }

    #[test]
    fn efficiency_boundary_preconditions() {
        let p = ProtocolParams::new(1e-4, 1e3, 0.99, 0.1).with_gain(1.0);
        assert!(matches!(
            find_efficiency_boundary(&p),
            Err(Error::InvalidParameter { name: "G", .. })
        ));
        // almost no background: the mixer never wins
        let q = ProtocolParams::new(0.1, 0.01, 0.9, 0.1).with_gain(1.2);
        assert!(matches!(find_efficiency_boundary(&q), Err(Error::NoBoundary(_))));
    }
}
