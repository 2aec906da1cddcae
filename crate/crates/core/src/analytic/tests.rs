use approx::assert_relative_eq;
use num_complex::Complex64 as C64;
use proptest::prelude::*;

use super::*;
use std::f64::consts::PI;

/// Moments of zero-mean Gaussian states via Wick/Isserlis pairings.
///
/// Operators are linear forms over `(a_0..a_{m-1}, a_0†..a_{m-1}†)`.
struct Gaussian {
    modes: usize,
    pair: Vec<Vec<C64>>,
}

type Form = Vec<C64>;

impl Gaussian {
    /// `corr[i][j] = ⟨a_i a_j⟩`, `occ[i] = ⟨a_i† a_i⟩`, no other correlations.
    fn new(corr: Vec<Vec<C64>>, occ: Vec<f64>) -> Self {
        let m = occ.len();
        let mut pair = vec![vec![C64::new(0.0, 0.0); 2 * m]; 2 * m];
        for i in 0..m {
            for j in 0..m {
                pair[i][j] = corr[i][j];
                pair[m + i][m + j] = corr[i][j].conj();
            }
            pair[m + i][i] = C64::new(occ[i], 0.0);
            pair[i][m + i] = C64::new(occ[i] + 1.0, 0.0);
        }
        Self { modes: m, pair }
    }

    fn lower(&self, i: usize) -> Form {
        let mut f = vec![C64::new(0.0, 0.0); 2 * self.modes];
        f[i] = C64::new(1.0, 0.0);
        f
    }

    fn dagger(&self, f: &Form) -> Form {
        let m = self.modes;
        (0..2 * m).map(|k| f[(k + m) % (2 * m)].conj()).collect()
    }

    fn two(&self, x: &Form, y: &Form) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (p, xp) in x.iter().enumerate() {
            for (q, yq) in y.iter().enumerate() {
                acc += xp * yq * self.pair[p][q];
            }
        }
        acc
    }

    /// Mean and variance of `Σ coef·X·Y`.
    fn mean_var(&self, terms: &[(f64, Form, Form)]) -> (f64, f64) {
        let mean: C64 = terms.iter().map(|(c, x, y)| *c * self.two(x, y)).sum();
        let mut second = C64::new(0.0, 0.0);
        for (c, x, y) in terms {
            for (c2, x2, y2) in terms {
                second += c
                    * c2
                    * (self.two(x, y) * self.two(x2, y2)
                        + self.two(x, x2) * self.two(y, y2)
                        + self.two(x, y2) * self.two(y, x2));
            }
        }
        (mean.re, (second - mean * mean).re)
    }
}

fn add(a: &Form, b: &Form, ka: f64, kb: f64) -> Form {
    a.iter().zip(b).map(|(x, y)| x * ka + y * kb).collect()
}

/// Returning signal (mode 0), idler (mode 1) and two detector vacua.
fn returned_pair(p: &ProtocolParams) -> Gaussian {
    let z = C64::new(0.0, 0.0);
    let amp = C64::from_polar(p.eta.sqrt() * p.pair_amplitude(), -p.phi);
    let mut corr = vec![vec![z; 4]; 4];
    corr[0][1] = amp;
    corr[1][0] = amp;
    Gaussian::new(corr, vec![p.returning_mean(), p.n_signal, 0.0, 0.0])
}

/// Mean and variance of the photocount observable, including detector loss.
fn jm_oracle(p: &ProtocolParams) -> (f64, f64) {
    let gs = returned_pair(p);
    let (g, chi) = (p.gain, p.chi);
    let (a1, a2) = (gs.lower(0), gs.lower(1));
    let b1 = add(&a1, &gs.dagger(&a2), g.sqrt(), (g - 1.0).sqrt());
    let b2 = add(&a2, &gs.dagger(&a1), g.sqrt(), (g - 1.0).sqrt());
    let c1 = add(&b1, &gs.lower(2), chi.sqrt(), (1.0 - chi).sqrt());
    let c2 = add(&b2, &gs.lower(3), chi.sqrt(), (1.0 - chi).sqrt());
    gs.mean_var(&[
        (g, gs.dagger(&c2), c2.clone()),
        (-(g - 1.0), gs.dagger(&c1), c1.clone()),
    ])
}

fn quadrature_oracle(p: &ProtocolParams) -> (f64, f64) {
    let gs = returned_pair(p);
    let (a1, a2) = (gs.lower(0), gs.lower(1));
    gs.mean_var(&[(1.0, a1.clone(), a2.clone()), (1.0, gs.dagger(&a1), gs.dagger(&a2))])
}

fn reference() -> ProtocolParams {
    ProtocolParams::new(0.1, 1.0, 0.9, PI / 4.0).with_gain(1.2)
}

#[test]
fn classical_direct_substitution() {
    let b = classical_snr(&ProtocolParams::new(0.5, 3.0, 1.0, PI)).unwrap();
    assert_relative_eq!(b.snr, 8.0, max_relative = 1e-15);
    assert_eq!(
        classical_snr(&ProtocolParams::new(0.5, 3.0, 0.8, 0.0)).unwrap().snr,
        0.0
    );
}

#[test]
fn quantum_direct_substitution() {
    let b = quantum_snr(&ProtocolParams::new(0.5, 3.0, 1.0, PI)).unwrap();
    assert_relative_eq!(b.snr, 3.0, max_relative = 1e-15);
    assert_eq!(quantum_snr(&ProtocolParams::new(0.5, 3.0, 0.8, 0.0)).unwrap().snr, 0.0);
}

#[test]
fn quantum_moments_match_gaussian_pairings() {
    for p in [
        ProtocolParams::new(0.05, 1.5, 0.9, PI / 3.0),
        ProtocolParams::new(0.7, 0.2, 0.4, 2.0),
    ] {
        let b = quantum_snr(&p).unwrap();
        let (mean, var) = quadrature_oracle(&p);
        assert_relative_eq!(b.mean_at_phi, mean, max_relative = 1e-13);
        assert_relative_eq!(b.noise_var, var, max_relative = 1e-13);
    }
}

#[test]
fn ratio_quotient_identity_example() {
    let p = ProtocolParams::new(0.1, 5.0, 0.8, PI / 2.0);
    let q = quantum_snr(&p).unwrap().snr / classical_snr(&p).unwrap().snr;
    assert_relative_eq!(snr_ratio(&p).unwrap(), q, max_relative = 1e-12);
}

#[test]
fn ratio_limits() {
    // (1−η) n_th / η = 100
    let eta = 0.5;
    let p = ProtocolParams::new(1e-7, 100.0, eta, PI);
    assert!((snr_ratio(&p).unwrap() - 2.0).abs() < 0.05);
    let p = ProtocolParams::new(1e-9, 7.0, 1.0, 1.1);
    assert!((snr_ratio(&p).unwrap() - 1.0).abs() < 1e-6);
    assert_eq!(
        snr_ratio(&ProtocolParams::new(0.0, 1.0, 0.5, 0.0)),
        Err(Error::IndeterminateRatio)
    );
    assert!(snr_ratio(&ProtocolParams::new(0.1, 1.0, 0.0, 1.0)).is_err());
}

#[test]
fn expansion_leading_term_and_limit() {
    let (eta, nth) = (0.7, 2.5);
    let k = (1.0 - eta) / eta;
    let zero_order = (1.0 + k + 2.0 * k * nth) / (1.0 + k + k * nth);
    let p = ProtocolParams::new(0.0, nth, eta, PI);
    assert_relative_eq!(ratio_small_n_expansion(&p).unwrap(), zero_order, max_relative = 1e-14);
    let big = ProtocolParams::new(0.0, 1e12, 0.5, PI);
    assert!((ratio_small_n_expansion(&big).unwrap() - 2.0).abs() < 1e-9);
}

#[test]
fn expansion_remainder_is_quadratic() {
    let p = ProtocolParams::new(1e-2, 3.0, 0.6, PI);
    let err = |n: f64| {
        let q = ProtocolParams { n_signal: n, ..p };
        (snr_ratio(&q).unwrap() - ratio_small_n_expansion(&q).unwrap()).abs()
    };
    let r = err(1e-2) / err(5e-3);
    assert!((3.5..=4.5).contains(&r), "{r}");
}

#[test]
fn gain_bound_examples() {
    assert_eq!(gain_region_upper_bound(1.0, 5.0).unwrap(), 0.0);
    let want = (-3.0 + 153f64.sqrt()) / 8.0;
    assert_relative_eq!(gain_region_upper_bound(0.5, 9.0).unwrap(), want, max_relative = 1e-15);
    assert!((want - 1.17117).abs() < 1e-5);
    assert!(gain_region_upper_bound(0.0, 1.0).is_err());
    assert!(gain_region_upper_bound(1.5, 1.0).is_err());
}

#[test]
fn gain_bound_matches_ratio_sign_on_grid() {
    for &eta in &[0.3, 0.5, 0.8, 0.95] {
        for &nth in &[0.2, 1.0, 4.0, 20.0] {
            let bound = gain_region_upper_bound(eta, nth).unwrap();
            for i in 1..=40 {
                let n = 2.0 * bound * i as f64 / 40.0;
                if (n - bound).abs() < 1e-9 * bound {
                    continue;
                }
                let r = snr_ratio(&ProtocolParams::new(n, nth, eta, PI)).unwrap();
                assert_eq!((r - 1.0).signum(), (bound - n).signum(), "eta={eta} nth={nth} n={n}");
            }
        }
    }
}

#[test]
fn jm_mean_examples() {
    let p = ProtocolParams::new(0.3, 2.0, 0.7, 1.0).with_gain(1.0);
    assert_relative_eq!(
        jm_output_mean(&p, EtaCoupling::SqrtEta).unwrap(),
        0.3,
        max_relative = 1e-15
    );
    let q = ProtocolParams::new(0.3, 2.0, 0.7, PI / 2.0).with_gain(1.4);
    for coupling in [EtaCoupling::SqrtEta, EtaCoupling::Eta] {
        assert_relative_eq!(
            jm_output_mean(&q, coupling).unwrap(),
            0.4 + 1.8 * 0.3,
            max_relative = 1e-12
        );
    }
}

#[test]
fn jm_mean_coupling_is_sqrt_eta() {
    let p = reference();
    let (mean, _) = jm_oracle(&p);
    let sqrt = jm_output_mean(&p, EtaCoupling::SqrtEta).unwrap();
    let lin = jm_output_mean(&p, EtaCoupling::Eta).unwrap();
    assert_relative_eq!(sqrt, mean, max_relative = 1e-13);
    assert!((lin - mean).abs() > 1e-3);
}

#[test]
fn jm_variance_matches_gaussian_pairings() {
    for p in [
        reference(),
        ProtocolParams::new(0.05, 1.5, 0.9, PI / 3.0).with_gain(1.5),
        ProtocolParams::new(0.8, 0.3, 0.2, 2.5).with_gain(3.0),
    ] {
        let b = jm_snr(&p).unwrap();
        let (mean, var) = jm_oracle(&p);
        assert_relative_eq!(b.mean_at_phi, mean, max_relative = 1e-13);
        assert_relative_eq!(b.noise_var, var, max_relative = 1e-12);
    }
}

#[test]
fn printed_jm_variance_disagrees() {
    let p = ProtocolParams::new(0.05, 0.3, 0.9, PI / 4.0).with_gain(1.2);
    let (_, var) = jm_oracle(&p);
    let printed = jm_noise_var_as_printed(&p).unwrap();
    assert!((printed - var).abs() / var > 0.1, "printed {printed} oracle {var}");
}

#[test]
fn jm_errors_and_zero_phase() {
    assert!(matches!(
        jm_snr(&ProtocolParams::new(0.1, 1.0, 0.9, 1.0).with_gain(1.0)),
        Err(Error::ZeroSignal(_))
    ));
    assert_eq!(
        jm_snr(&ProtocolParams {
            phi: 0.0,
            ..reference()
        })
        .unwrap()
        .snr,
        0.0
    );
}

#[test]
fn imperfect_variance_matches_gaussian_pairings() {
    for chi in [0.7, 0.3, 1.0] {
        let p = reference().with_chi(chi);
        let b = imperfect_jm_snr(&p).unwrap();
        let (mean, var) = jm_oracle(&p);
        assert_relative_eq!(b.mean_at_phi, mean, max_relative = 1e-13);
        assert_relative_eq!(b.noise_var, var, max_relative = 1e-12);
    }
}

#[test]
fn imperfect_reduces_to_ideal() {
    let p = reference();
    assert_eq!(imperfect_jm_snr(&p).unwrap(), jm_snr(&p).unwrap());
    assert!(matches!(imperfect_jm_snr(&p.with_chi(0.0)), Err(Error::ZeroSignal(_))));
}

#[test]
fn jm_asymptote_examples() {
    let p = ProtocolParams::new(0.0, 1e12, 0.5, 0.1).with_gain(1e6);
    assert!((jm_ratio_asymptotic(&p).unwrap() - 2.0).abs() < 1e-9);
    let q = ProtocolParams::new(0.0, 40.0, 0.5, 0.1).with_gain(1.01);
    assert_relative_eq!(jm_ratio_asymptotic(&q).unwrap(), 2.0 - 1.0 / 20.0, max_relative = 1e-15);
    assert!(jm_ratio_asymptotic(&ProtocolParams::new(0.0, 0.0, 0.5, 0.1).with_gain(1.1)).is_err());
}

#[test]
fn jm_asymptote_tracks_exact_ratio() {
    // n_th(1−η) = 50
    let p = ProtocolParams::new(1e-4, 5000.0, 0.99, 0.1).with_gain(1.01);
    let exact = jm_ratio(&p).unwrap();
    let approx = jm_ratio_asymptotic(&p).unwrap();
    assert!((approx - exact).abs() / exact < 0.1, "{approx} vs {exact}");
}

#[test]
fn imperfect_asymptote_sign() {
    let p = ProtocolParams::new(1e-4, 5000.0, 0.99, 0.1)
        .with_gain(1.01)
        .with_chi(0.8);
    let exact = imperfect_jm_ratio(&p).unwrap();
    let derived = imperfect_ratio_asymptotic(&p, AsymptoteForm::Derived).unwrap();
    let printed = imperfect_ratio_asymptotic(&p, AsymptoteForm::AsPrinted).unwrap();
    assert!((derived - exact).abs() < 0.01, "{derived} vs {exact}");
    assert!((printed - exact).abs() > 3.0 * (derived - exact).abs());
    let one = p.with_chi(1.0);
    assert_relative_eq!(
        imperfect_ratio_asymptotic(&one, AsymptoteForm::Derived).unwrap(),
        jm_ratio_asymptotic(&one).unwrap(),
        max_relative = 1e-15
    );
}

#[test]
fn efficiency_threshold_examples() {
    let p = ProtocolParams::new(1e-4, 1e15, 0.99, 0.1).with_gain(1.01);
    assert!((efficiency_threshold(&p).unwrap() - 0.5).abs() < 1e-12);
    let q = ProtocolParams::new(0.0, 30.0, 0.9, 0.1).with_gain(1.01);
    assert_eq!(efficiency_threshold(&q).unwrap(), 0.5);
    // ε below ηN/x²
    let r = ProtocolParams::new(0.1, 1.0, 0.5, 0.1).with_gain(1.01);
    assert!(matches!(efficiency_threshold(&r), Err(Error::OutOfRegime(_))));
}

#[test]
fn parameter_validation() {
    let base = ProtocolParams::new(0.1, 1.0, 0.9, 0.5);
    let bad = [
        ProtocolParams { n_signal: -1.0, ..base },
        ProtocolParams { n_th: f64::NAN, ..base },
        ProtocolParams { eta: 1.5, ..base },
        ProtocolParams {
            phi: f64::INFINITY,
            ..base
        },
        ProtocolParams { gain: 0.5, ..base },
        ProtocolParams { chi: -0.1, ..base },
    ];
    for p in bad {
        assert!(
            matches!(classical_snr(&p), Err(Error::InvalidParameter { .. })),
            "{p:?}"
        );
    }
    assert!(ProtocolParams {
        eta: 1.0,
        n_th: 4.0,
        ..base
    }
    .validate()
    .is_ok());
    assert_eq!(ProtocolParams::new(0.1, 0.0, 1.0, 0.0).gain, 1.1);
    assert_eq!(ProtocolParams::new(1e-5, 0.0, 1.0, 0.0).gain, 1.001);
}

fn params() -> impl Strategy<Value = ProtocolParams> {
    (
        1e-4..3.0f64,
        0.0..20.0f64,
        0.01..1.0f64,
        -6.0..6.0f64,
        1.0001..4.0f64,
        0.01..1.0f64,
    )
        .prop_map(|(n, nth, eta, phi, g, chi)| ProtocolParams::new(n, nth, eta, phi).with_gain(g).with_chi(chi))
}

type Snr = fn(&ProtocolParams) -> Result<SnrBreakdown>;
const ALL: [Snr; 4] = [classical_snr, quantum_snr, jm_snr, imperfect_jm_snr];

proptest! {
    #[test]
    fn snr_is_nonnegative_and_consistent(p in params()) {
        for f in ALL {
            let b = f(&p).unwrap();
            prop_assert!(b.snr >= 0.0 && b.noise_var > 0.0);
            prop_assert!((b.snr - b.signal_sq / b.noise_var).abs() <= 1e-14 * b.snr);
            prop_assert_eq!(f(&ProtocolParams { phi: 0.0, ..p }).unwrap().snr, 0.0);
        }
    }

    #[test]
    fn phase_parity(p in params()) {
        let m = ProtocolParams { phi: -p.phi, ..p };
        for f in ALL {
            prop_assert_eq!(f(&p).unwrap().snr, f(&m).unwrap().snr);
        }
        prop_assert_eq!(snr_ratio(&p).unwrap(), snr_ratio(&m).unwrap());
        prop_assert_eq!(jm_ratio(&p).unwrap(), jm_ratio(&m).unwrap());
    }

    #[test]
    fn ratios_are_quotients(p in params()) {
        prop_assume!((1.0 - p.phi.cos()).abs() > 1e-6);
        let c = classical_snr(&p).unwrap().snr;
        let pairs = [
            (snr_ratio(&p).unwrap(), quantum_snr(&p).unwrap().snr),
            (jm_ratio(&p).unwrap(), jm_snr(&p).unwrap().snr),
            (imperfect_jm_ratio(&p).unwrap(), imperfect_jm_snr(&p).unwrap().snr),
        ];
        for (ratio, q) in pairs {
            prop_assert!((ratio - q / c).abs() <= 1e-12 * ratio, "{} vs {}", ratio, q / c);
        }
    }

    #[test]
    fn classical_noise_is_phase_independent(p in params(), other in -6.0..6.0f64) {
        let a = classical_snr(&p).unwrap().noise_var;
        let b = classical_snr(&ProtocolParams { phi: other, ..p }).unwrap().noise_var;
        prop_assert_eq!(a, b);
    }

    #[test]
    fn jm_moments_match_pairings(p in params()) {
        let b = imperfect_jm_snr(&p).unwrap();
        let (mean, var) = jm_oracle(&p);
        prop_assert!((b.mean_at_phi - mean).abs() <= 1e-11 * mean.abs().max(1.0));
        prop_assert!((b.noise_var - var).abs() <= 1e-11 * var);
    }

    #[test]
    fn bound_increases_with_occupation(eta in 0.01..0.999f64, a in 0.0..50.0f64, d in 0.01..50.0f64) {
        prop_assert!(gain_region_upper_bound(eta, a + d).unwrap() > gain_region_upper_bound(eta, a).unwrap());
    }
}
