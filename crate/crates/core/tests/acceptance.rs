//! Acceptance run. Prints one PASS/FAIL line per criterion and exits nonzero
//! if any criterion fails.

use std::f64::consts::PI;
use std::time::{Duration, Instant};

use qi_cloak::analytic::{
    classical_snr, efficiency_threshold, gain_region_upper_bound, imperfect_jm_ratio, jm_snr, quantum_snr,
    ratio_small_n_expansion, snr_ratio,
};
use qi_cloak::engine::{
    cross_validate, cross_validate_with, find_efficiency_boundary, find_gain_boundary, run_oracle, Field, Perturbation,
    PipelineOrder, Protocol, Status, DEFAULT_DIM_CAP,
};
use qi_cloak::{ProtocolParams, Result, SnrBreakdown};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    ok: bool,
    detail: String,
}

fn outcome(ok: bool, detail: String) -> Outcome {
    Outcome { ok, detail }
}

fn grid() -> Vec<ProtocolParams> {
    let mut out = Vec::new();
    for n in [0.01, 0.05, 0.2] {
        for n_th in [0.5, 1.5, 3.0] {
            for eta in [0.7, 0.9, 0.99] {
                for phi in [0.3, PI / 3.0, PI] {
                    out.push(ProtocolParams::new(n, n_th, eta, phi));
                }
            }
        }
    }
    out
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

fn oracle_grid(
    protocol: Protocol,
    points: &[ProtocolParams],
    analytic: fn(&ProtocolParams) -> Result<SnrBreakdown>,
    tol: f64,
) -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut unconverged = 0;
    for p in points {
        let o = run_oracle(protocol, p, PipelineOrder::BackgroundFirst, DEFAULT_DIM_CAP)?;
        if !o.converged {
            unconverged += 1;
        }
        worst = worst.max(rel(o.breakdown.snr, analytic(p)?.snr));
    }
    Ok(outcome(
        worst <= tol && unconverged == 0,
        format!(
            "{} points, worst relative {worst:.2e}, unconverged {unconverged}",
            points.len()
        ),
    ))
}

fn ac1() -> Result<Outcome> {
    oracle_grid(Protocol::Classical, &grid(), classical_snr, 1e-6)
}

fn ac2() -> Result<Outcome> {
    oracle_grid(Protocol::QuantumQuadrature, &grid(), quantum_snr, 1e-6)
}

fn ac3() -> Result<Outcome> {
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut selected = Vec::new();
    for n in [0.01, 0.05, 0.2] {
        for n_th in [0.5, 1.5] {
            for g in [1.05, 1.2, 1.5] {
                let p = ProtocolParams::new(n, n_th, 0.9, PI / 3.0).with_gain(g);
                let report = cross_validate(&p, &[Protocol::QuantumJm], 1e-5)?;
                let check = &report.checks[0];
                let o = check.result.oracle.as_ref().expect("oracle ran");
                if check.status != Status::Pass || !o.converged {
                    return Ok(outcome(false, format!("status {:?} at {p:?}", check.status)));
                }
                worst = worst.max(rel(o.breakdown.snr, jm_snr(&p)?.snr));
                selected.push(report.adjudication.expect("adjudication recorded").selected);
                count += 1;
            }
        }
    }
    let all_sqrt = selected.iter().all(|s| *s == "sqrt_eta");
    Ok(outcome(
        worst <= 1e-5 && all_sqrt,
        format!("{count} points, worst relative {worst:.2e}, adjudication sqrt_eta on all: {all_sqrt}"),
    ))
}

fn ac4() -> Result<Outcome> {
    let eta = 0.5;
    let mut ratios = Vec::new();
    for k in [1e2, 1e3, 1e4] {
        let n_th = k * eta / (1.0 - eta);
        ratios.push(snr_ratio(&ProtocolParams::new(1e-4, n_th, eta, PI))?);
    }
    let monotone = ratios.windows(2).all(|w| w[1] > w[0]) && ratios.iter().all(|r| *r < 2.0);
    let last = ratios[2];
    let db = 10.0 * last.log10();
    Ok(outcome(
        monotone && last >= 1.95 && db >= 2.9,
        format!("ratios {ratios:.5?}, final {db:.4} dB"),
    ))
}

fn ac5() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst = 0.0f64;
    for _ in 0..20 {
        let eta = rng.gen_range(0.3..0.999);
        let n_th = rng.gen_range(0.1..50.0);
        let root = find_gain_boundary(eta, n_th, PI)?;
        worst = worst.max(rel(root, gain_region_upper_bound(eta, n_th)?));
    }
    Ok(outcome(worst <= 1e-9, format!("20 pairs, worst relative {worst:.2e}")))
}

fn ac6() -> Result<Outcome> {
    let p = ProtocolParams::new(1e-4, 1e3, 0.99, 0.1).with_gain(1.01);
    let b = find_efficiency_boundary(&p)?;
    let predicted = efficiency_threshold(&p)?;
    let at_root = imperfect_jm_ratio(&p.with_chi(b.chi_star))?;
    let gap = (b.chi_star - predicted).abs();
    Ok(outcome(
        gap <= 0.05 && b.chi_star > 0.5 && (at_root - 1.0).abs() < 1e-9,
        format!("exact {:.6}, asymptotic {predicted:.6}, gap {gap:.4}", b.chi_star),
    ))
}

fn ac7() -> Result<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut factors = Vec::new();
    for _ in 0..10 {
        let eta = rng.gen_range(0.3..0.999);
        let n_th = rng.gen_range(0.1..50.0);
        let err = |n: f64| -> Result<f64> {
            let p = ProtocolParams::new(n, n_th, eta, PI);
            Ok((snr_ratio(&p)? - ratio_small_n_expansion(&p)?).abs())
        };
        factors.push(err(1e-2)? / err(5e-3)?);
    }
    let ok = factors.iter().all(|f| (3.5..=4.5).contains(f));
    let (lo, hi) = factors
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), f| (lo.min(*f), hi.max(*f)));
    Ok(outcome(ok, format!("10 pairs, factors in [{lo:.4}, {hi:.4}]")))
}

fn ac8() -> Result<Outcome> {
    let points = [
        ProtocolParams::new(0.05, 1.5, 0.9, PI / 3.0)
            .with_gain(1.2)
            .with_chi(0.8),
        ProtocolParams::new(0.01, 0.5, 0.7, 0.3).with_gain(1.05),
        ProtocolParams::new(0.2, 3.0, 0.99, PI).with_gain(1.5).with_chi(0.9),
        ProtocolParams::new(0.1, 1.0, 0.8, 1.0).with_gain(1.3).with_chi(0.6),
        ProtocolParams::new(0.02, 2.0, 0.95, 2.5).with_gain(1.1).with_chi(0.95),
    ];
    let mut worst = 0.0f64;
    for p in &points {
        for protocol in Protocol::ALL {
            let a = run_oracle(protocol, p, PipelineOrder::BackgroundFirst, DEFAULT_DIM_CAP)?;
            let b = run_oracle(protocol, p, PipelineOrder::CloakFirst, DEFAULT_DIM_CAP)?;
            worst = worst.max(rel(b.breakdown.snr, a.breakdown.snr));
        }
    }
    Ok(outcome(
        worst <= 1e-8,
        format!("5 points x 4 protocols, worst relative {worst:.2e}"),
    ))
}

fn ac9() -> Result<Outcome> {
    let p = ProtocolParams::new(0.05, 1.5, 0.9, PI / 3.0)
        .with_gain(1.2)
        .with_chi(0.8);
    let pert = Perturbation {
        field: Field::NoiseVar,
        factor: 1.01,
    };
    let clean = cross_validate(&p, &Protocol::ALL, 1e-5)?;
    let report = cross_validate_with(&p, &Protocol::ALL, 1e-5, DEFAULT_DIM_CAP, Some(pert))?;
    let named = report
        .checks
        .iter()
        .all(|c| c.status == Status::Fail { field: Field::NoiseVar });
    Ok(outcome(
        clean.passed() && !report.passed() && named,
        format!(
            "unperturbed passes: {}, perturbed fails naming noise_var: {named}",
            clean.passed()
        ),
    ))
}

type Criterion = (&'static str, fn() -> Result<Outcome>, Duration);

fn main() {
    let criteria: [Criterion; 9] = [
        ("AC1 classical oracle equivalence", ac1, Duration::from_secs(60)),
        ("AC2 quadrature oracle equivalence", ac2, Duration::from_secs(120)),
        ("AC3 mixer oracle equivalence", ac3, Duration::from_secs(180)),
        ("AC4 gain asymptote", ac4, Duration::from_secs(1)),
        ("AC5 gain boundary", ac5, Duration::from_secs(10)),
        ("AC6 efficiency threshold", ac6, Duration::from_secs(10)),
        ("AC7 expansion order", ac7, Duration::from_secs(1)),
        ("AC8 order equivalence", ac8, Duration::from_secs(60)),
        ("AC9 negative control", ac9, Duration::from_secs(60)),
    ];
    let mut failed = 0;
    for (name, run, budget) in criteria {
        let start = Instant::now();
        let result = run();
        let took = start.elapsed();
        let (ok, detail) = match result {
            Ok(o) => (o.ok && took <= budget, o.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {name}: {detail} ({:.2}s, budget {}s)",
            if ok { "PASS" } else { "FAIL" },
            took.as_secs_f64(),
            budget.as_secs()
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
