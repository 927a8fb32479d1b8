//! Acceptance criteria 1–10. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::BTreeMap;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wfa_stats::asymptotics::{clt_distance, moment_convergence, summary};
use wfa_stats::deviations::{ldp_verify, rate_g_star, rate_j_star, RateStatus};
use wfa_stats::exact::{exact_distribution, mgf, DEFAULT_BUDGET};
use wfa_stats::sampler::sample_counts;
use wfa_stats::spectral::{grad_log_growth, log_growth};
use wfa_stats::{fixtures, PrimitiveModel};

use common::{binomial_pmf, brute_force_distribution, chi_square_p_value, kl_divergence};

type Outcome = Result<String, String>;

fn fixture(name: &str) -> PrimitiveModel {
    let rep = fixtures::all()
        .into_iter()
        .find(|(n, _)| *n == name)
        .map(|(_, r)| r)
        .unwrap();
    PrimitiveModel::new(rep).unwrap()
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

fn brute_force_equivalence() -> Outcome {
    let mut worst = 0.0f64;
    for (name, rep) in fixtures::all() {
        for n in 0..=7 {
            let dist = exact_distribution(&rep, n).map_err(err)?;
            let oracle = brute_force_distribution(&rep, n);
            for (k, p) in dist.iter() {
                let expected = oracle.get(&k).copied().unwrap_or(0.0);
                let gap = (p - expected).abs();
                worst = worst.max(gap);
                ensure(gap <= 1e-12, || format!("{name} n={n} k={k:?}: {p} vs {expected}"))?;
            }
        }
    }
    Ok(format!("max entry error {worst:.1e}"))
}

/// Uniform points of the open simplex with every coordinate at least 0.01.
fn interior_points(ell: usize, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    while points.len() < count {
        let mut cuts: Vec<f64> = (0..ell).map(|_| rng.random::<f64>()).collect();
        cuts.push(0.0);
        cuts.push(1.0);
        cuts.sort_by(f64::total_cmp);
        let parts: Vec<f64> = cuts.windows(2).map(|w| w[1] - w[0]).collect();
        if parts.iter().all(|&p| p >= 0.01) {
            points.push(parts[..ell].to_vec());
        }
    }
    points
}

fn multinomial_oracle() -> Outcome {
    let cases = [
        ("f1", vec![2.0 / 3.0], DMatrix::from_element(1, 1, 2.0 / 9.0)),
        (
            "f2",
            vec![0.25, 0.25],
            DMatrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 3.0]) / 16.0,
        ),
    ];
    let mut worst_rate = 0.0f64;
    let mut worst_quad = 0.0f64;
    for (name, p, gamma) in cases {
        let model = fixture(name);
        let s = summary(&model).map_err(err)?;
        let beta_gap = (s.beta.clone() - DVector::from_column_slice(&p)).amax();
        ensure(beta_gap <= 1e-9, || format!("{name}: beta off by {beta_gap:e}"))?;
        let gamma_gap = (&s.gamma - &gamma).amax();
        ensure(gamma_gap <= 1e-9, || format!("{name}: gamma off by {gamma_gap:e}"))?;
        let gamma_inv = gamma.clone().try_inverse().unwrap();
        for x in interior_points(p.len(), 50, 7) {
            let r = rate_g_star(&model, &x).map_err(err)?;
            let kl = kl_divergence(&x, &p);
            worst_rate = worst_rate.max((r.value - kl).abs());
            ensure((r.value - kl).abs() <= 1e-8, || {
                format!("{name} G*({x:?}) = {} vs KL {kl}", r.value)
            })?;
            let xv = DVector::from_column_slice(&x);
            let quad = 0.5 * (xv.transpose() * &gamma_inv * &xv)[(0, 0)];
            let j = rate_j_star(&model, &x).map_err(err)?.value;
            worst_quad = worst_quad.max((j - quad).abs());
            ensure((j - quad).abs() <= 1e-8, || format!("{name} J*({x:?}) = {j} vs {quad}"))?;
        }
    }
    Ok(format!(
        "max |G* - KL| {worst_rate:.1e}, max |J* - quadratic| {worst_quad:.1e}"
    ))
}

fn closed_form_surfaces() -> Outcome {
    let f3 = summary(&fixture("f3")).map_err(err)?;
    let f4 = summary(&fixture("f4")).map_err(err)?;
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let checks = [
        ("f3 lambda", f3.lambda, 2.0),
        ("f3 beta", f3.beta[0], 0.75),
        ("f3 gamma", f3.gamma[(0, 0)], 0.0625),
        ("f4 lambda", f4.lambda, phi),
        ("f4 beta", f4.beta[0], (5.0 - 5f64.sqrt()) / 10.0),
    ];
    let mut worst = 0.0f64;
    for (label, got, want) in checks {
        worst = worst.max((got - want).abs());
        ensure((got - want).abs() <= 1e-9, || format!("{label}: {got} vs {want}"))?;
    }
    Ok(format!("max error {worst:.1e}"))
}

fn quasi_power() -> Outcome {
    let mut ratios = Vec::new();
    let mut failures = Vec::new();
    for name in ["f3", "f4"] {
        let model = fixture(name);
        for t in [-1.0, 0.5, 1.0] {
            let g = log_growth(&model, &[t]).map_err(err)?;
            let residual = |n: usize| -> Result<f64, String> {
                Ok((mgf(&model, &[t], n).map_err(err)? / n as f64 - g).abs())
            };
            let r100 = residual(100)?;
            let r200 = residual(200)?;
            let r400 = residual(400)?;
            let ratio = r400 / r100;
            if ratio > 0.25 {
                failures.push(format!("{name} t={t}: residual(400)/residual(100) = {ratio:.15} > 1/4"));
            }
            let scaled = [100.0 * r100, 200.0 * r200, 400.0 * r400];
            let hi = scaled.iter().copied().fold(0.0, f64::max);
            let lo = scaled.iter().copied().fold(f64::INFINITY, f64::min);
            if hi > 1.5 * lo {
                failures.push(format!("{name} t={t}: n*residual not bounded: {scaled:?}"));
            }
            ratios.push(format!("{name}@{t}: {ratio:.15}"));
        }
    }
    let detail = format!("residual ratios 400/100 {}", ratios.join(", "));
    if failures.is_empty() {
        Ok(detail)
    } else {
        Err(format!("{}; {detail}", failures.join("; ")))
    }
}

fn moment_expansions() -> Outcome {
    let rows = moment_convergence(&fixture("f3"), &[20, 60]).map_err(err)?;
    let (r20, r60) = (rows[0], rows[1]);
    let detail = format!(
        "mean {:.2e} -> {:.2e}, cov {:.2e} -> {:.2e}",
        r20.mean_resid, r60.mean_resid, r20.cov_resid, r60.cov_resid
    );
    ensure(r60.mean_resid <= 1e-6 && r60.cov_resid <= 1e-6, || {
        format!("residual above 1e-6 at n=60: {detail}")
    })?;
    ensure(
        r60.mean_resid * 10.0 <= r20.mean_resid && r60.cov_resid * 10.0 <= r20.cov_resid,
        || format!("not 10x smaller at n=60 than n=20: {detail}"),
    )?;
    Ok(detail)
}

fn gaussian_limit() -> Outcome {
    let mut parts = Vec::new();
    for name in ["f1", "f3"] {
        let model = fixture(name);
        let d100 = clt_distance(&model, 100, &[vec![1.0]]).map_err(err)?[0].distance;
        let d400 = clt_distance(&model, 400, &[vec![1.0]]).map_err(err)?[0].distance;
        let ratio = d100 / d400;
        ensure((1.4..=2.8).contains(&ratio), || {
            format!("{name}: distance ratio {ratio} outside [1.4, 2.8]")
        })?;
        ensure(d400 <= 0.05, || format!("{name}: distance {d400} at n=400"))?;
        parts.push(format!("{name} ratio {ratio:.3}, d(400) {d400:.2e}"));
    }
    Ok(parts.join("; "))
}

fn ldp_decay() -> Outcome {
    let f1 = fixture("f1");
    let row = ldp_verify(&f1, &[2.0 / 3.0], 0.1, &[2000], DEFAULT_BUDGET).map_err(err)?[0];
    let rel = (row.exact_rate - 0.0216).abs() / 0.0216;
    ensure(rel <= 0.15, || {
        format!("f1 exact rate {} is {rel:.3} away from 0.0216", row.exact_rate)
    })?;

    let f3 = fixture("f3");
    let rows = ldp_verify(&f3, &[0.75], 0.15, &[250, 500, 1000], DEFAULT_BUDGET).map_err(err)?;
    let gaps: Vec<f64> = rows
        .iter()
        .map(|r| (r.exact_rate - r.theoretical_rate).abs())
        .collect();
    ensure(gaps[0] > gaps[1] && gaps[1] > gaps[2], || {
        format!("f3 gaps not strictly decreasing: {gaps:?}")
    })?;
    Ok(format!(
        "f1 relative error {rel:.3}; f3 gaps {:.2e} > {:.2e} > {:.2e}",
        gaps[0], gaps[1], gaps[2]
    ))
}

fn grid(ell: usize) -> Vec<Vec<f64>> {
    if ell == 1 {
        return (0..1000).map(|i| vec![(i as f64 + 0.5) / 1000.0]).collect();
    }
    let n = 46;
    let mut pts = Vec::new();
    for i in 1..n {
        for j in 1..n - i {
            pts.push(vec![i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    pts
}

fn rate_structure() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut worst_dual = 0.0f64;
    for (name, rep) in fixtures::all() {
        let model = PrimitiveModel::new(rep).unwrap();
        let ell = model.ell();
        let beta = grad_log_growth(&model, &vec![0.0; ell]).map_err(err)?;
        let mut points = grid(ell);
        points.push(beta.iter().copied().collect());
        let mut zero_seen = false;
        for x in &points {
            let r = rate_g_star(&model, x).map_err(err)?;
            ensure(r.value >= 0.0, || format!("{name}: G*({x:?}) = {}", r.value))?;
            if r.value <= 1e-14 {
                let dist = (DVector::from_column_slice(x) - &beta).norm();
                ensure(dist <= 1e-6, || format!("{name}: G* vanishes at {x:?}"))?;
                zero_seen = true;
            }
        }
        ensure(zero_seen, || format!("{name}: G*(beta) is not zero"))?;

        for _ in 0..20 {
            let mut t: Vec<f64> = (0..ell).map(|_| rng.random_range(-3.0..3.0)).collect();
            let norm = t.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > 3.0 {
                t.iter_mut().for_each(|v| *v *= 3.0 / norm);
            }
            let x: Vec<f64> = grad_log_growth(&model, &t).map_err(err)?.iter().copied().collect();
            let r = rate_g_star(&model, &x).map_err(err)?;
            let dual = t.iter().zip(&x).map(|(a, b)| a * b).sum::<f64>()
                - log_growth(&model, &t).map_err(err)?;
            worst_dual = worst_dual.max((r.value - dual).abs());
            ensure((r.value - dual).abs() <= 1e-8, || {
                format!("{name}: G*(grad G({t:?})) = {} vs {dual}", r.value)
            })?;
            let tstar = r.maximizer_t.unwrap_or_default();
            ensure(
                tstar.len() == ell && tstar.iter().zip(&t).all(|(a, b)| (a - b).abs() <= 1e-6),
                || format!("{name}: maximizer {tstar:?} vs {t:?}"),
            )?;
        }

        for i in 0..10 {
            let mut x = vec![0.1; ell];
            match i % 3 {
                0 => x[0] = -0.05 * (i + 1) as f64,
                1 => x[ell - 1] = 1.0 + 0.1 * i as f64,
                _ => x.iter_mut().for_each(|v| *v = 0.6 + 0.01 * i as f64),
            }
            if ell == 1 && i % 3 == 2 {
                x[0] = 1.0 + 1e-6 * (i + 1) as f64;
            }
            let r = rate_g_star(&model, &x).map_err(err)?;
            ensure(
                r.value == f64::INFINITY && r.status == RateStatus::OutsideSimplex,
                || format!("{name}: G*({x:?}) = {} outside the simplex", r.value),
            )?;
        }
    }
    Ok(format!("max Legendre gap {worst_dual:.1e}"))
}

fn local_consistency() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut ratios = Vec::new();
    for name in ["f1", "f2", "f3"] {
        let model = fixture(name);
        let s = summary(&model).map_err(err)?;
        let inv = s.gamma.clone().try_inverse().ok_or("gamma not invertible")?;
        for _ in 0..5 {
            let d: Vec<f64> = loop {
                let d: Vec<f64> = (0..model.ell()).map(|_| rng.random_range(-1.0..1.0)).collect();
                if d.iter().map(|v| v * v).sum::<f64>() > 0.01 {
                    break d;
                }
            };
            let eps = 1e-3;
            let x: Vec<f64> = s.beta.iter().zip(&d).map(|(b, di)| b + eps * di).collect();
            let dv = DVector::from_column_slice(&d);
            let quad = 0.5 * eps * eps * (dv.transpose() * &inv * &dv)[(0, 0)];
            let ratio = rate_g_star(&model, &x).map_err(err)?.value / quad;
            ensure((0.9..=1.1).contains(&ratio), || {
                format!("{name}: ratio {ratio} for direction {d:?}")
            })?;
            ratios.push(ratio);
        }
    }
    let lo = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    Ok(format!("ratios in [{lo:.4}, {hi:.4}]"))
}

fn sampler_exactness() -> Outcome {
    let batch = sample_counts(&fixture("f1"), 10, 100_000, 42).map_err(err)?;
    let freq = batch.frequencies();
    let tv = 0.5
        * (0..=10usize)
            .map(|k| {
                let observed = freq.get(&vec![k]).copied().unwrap_or(0.0);
                (observed - binomial_pmf(10, k, 2.0 / 3.0)).abs()
            })
            .sum::<f64>();
    ensure(tv <= 0.02, || format!("f1 total variation {tv}"))?;

    let f3 = fixtures::f3();
    let expected: BTreeMap<Vec<usize>, f64> = exact_distribution(&f3, 6)
        .map_err(err)?
        .iter()
        .filter(|(_, p)| *p > 0.0)
        .collect();
    let mut passing = 0;
    for seed in 0..20u64 {
        let batch = sample_counts(&f3, 6, 100_000, seed).map_err(err)?;
        if chi_square_p_value(&batch.histogram, &expected) >= 0.001 {
            passing += 1;
        }
    }
    ensure(passing >= 19, || format!("only {passing}/20 seeds pass chi-square"))?;
    Ok(format!("f1 TV {tv:.4}; f3 chi-square {passing}/20 seeds"))
}

struct Criterion {
    id: usize,
    title: &'static str,
    limit: Duration,
    check: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, title: "brute-force equivalence", limit: Duration::from_secs(10), check: brute_force_equivalence },
        Criterion { id: 2, title: "multinomial oracle", limit: Duration::from_secs(5), check: multinomial_oracle },
        Criterion { id: 3, title: "closed-form eigen-surfaces", limit: Duration::from_secs(1), check: closed_form_surfaces },
        Criterion { id: 4, title: "quasi-power", limit: Duration::from_secs(5), check: quasi_power },
        Criterion { id: 5, title: "moment expansions", limit: Duration::from_secs(5), check: moment_expansions },
        Criterion { id: 6, title: "gaussian limit", limit: Duration::from_secs(10), check: gaussian_limit },
        Criterion { id: 7, title: "ldp decay", limit: Duration::from_secs(60), check: ldp_decay },
        Criterion { id: 8, title: "rate-function structure", limit: Duration::from_secs(30), check: rate_structure },
        Criterion { id: 9, title: "moderate/large local consistency", limit: Duration::from_secs(10), check: local_consistency },
        Criterion { id: 10, title: "sampler exactness", limit: Duration::from_secs(60), check: sampler_exactness },
    ];

    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.check)();
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(detail) if elapsed > c.limit => Err(format!(
                "{detail}; took {:.2} s, limit {} s",
                elapsed.as_secs_f64(),
                c.limit.as_secs()
            )),
            other => other,
        };
        match outcome {
            Ok(detail) => println!(
                "criterion {:>2} PASS  {} ({:.2} s): {detail}",
                c.id,
                c.title,
                elapsed.as_secs_f64()
            ),
            Err(reason) => {
                failures += 1;
                println!(
                    "criterion {:>2} FAIL  {} ({:.2} s): {reason}",
                    c.id,
                    c.title,
                    elapsed.as_secs_f64()
                );
            }
        }
    }
    println!(
        "acceptance: {} passed, {failures} failed",
        criteria.len() - failures
    );
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
