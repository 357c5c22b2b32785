//! Acceptance gate: one PASS/FAIL line per criterion, non-zero exit on any
//! failure. Runs without the libtest harness so the lines always print.

use std::process::ExitCode;
use std::time::Instant;

use loadcov::analytic::{
    convergence_threshold, coverage, coverage_bounds, coverage_fully_loaded, coverage_idle_only,
    coverage_single_tier, g1_g2_closed_form_alpha4, g_term, g_trace, tier_addition_effect,
    truncation_terms, TierAddition,
};
use loadcov::mcsim::{
    estimate_coverage, estimate_coverage_system, Estimate, LoadModel, Placement, SimConfig,
};
use loadcov::model::{
    db_to_linear, derived_constants, effective_load, open_density_for_fraction, with_user_load,
    Network, SeriesControl, Tier,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Check = Result<String, String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn ctl() -> SeriesControl {
    SeriesControl::default()
}

/// Series summed until terms drop below 1e-16, i.e. to machine precision.
fn tight() -> SeriesControl {
    SeriesControl::new(1e-16, 10_000).unwrap()
}

fn uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * rng.random::<f64>()
}

/// p in (0, 1]
fn activity(rng: &mut ChaCha8Rng) -> f64 {
    1.0 - rng.random::<f64>()
}

fn random_tier(rng: &mut ChaCha8Rng, beta: f64, p: f64) -> Tier {
    let power = 10f64.powf(uniform(rng, -3.0, 1.0));
    let density = 10f64.powf(uniform(rng, -1.0, 1.0));
    Tier::new(power, density, beta, p)
}

fn mc(net: &Network, trials: u64, seed: u64, load: LoadModel) -> Estimate {
    let sim = SimConfig::for_network(net, trials, seed).unwrap();
    estimate_coverage(net, &sim, Placement::Ppp, load).unwrap()
}

fn c1_threshold() -> Check {
    let p = convergence_threshold(1.0, 4.0).map_err(|e| e.to_string())?;
    ensure((0.355..=0.366).contains(&p), || format!("threshold {p}"))?;
    Ok(format!("p* = {p:.5}"))
}

fn c2_closed_form() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst = 0.0_f64;
    for i in 0..100 {
        let k = 1 + i % 2;
        let tiers = (0..k)
            .map(|_| {
                let beta = uniform(&mut rng, 1.0, 10.0);
                let p = activity(&mut rng);
                random_tier(&mut rng, beta, p)
            })
            .collect();
        let net = Network::open(4.0, tiers).unwrap();
        let (g1, g2) = g1_g2_closed_form_alpha4(&net).map_err(|e| e.to_string())?;
        let s1 = g_term(&net, 1).unwrap();
        let s2 = g_term(&net, 2).unwrap();
        let err = (g1 - s1).abs().max((g2 - s2).abs());
        worst = worst.max(err);
        ensure(err <= 1e-10, || {
            format!("network {i}: closed ({g1}, {g2}) series ({s1}, {s2})")
        })?;
    }
    Ok(format!("100 networks, worst |diff| = {worst:.2e}"))
}

fn c3_full_load() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0_f64;
    for i in 0..50 {
        let k = rng.random_range(1..=4);
        let alpha = uniform(&mut rng, 2.5, 5.0);
        let mut tiers: Vec<Tier> = (0..k)
            .map(|_| {
                let beta = db_to_linear(uniform(&mut rng, 0.0, 10.0));
                random_tier(&mut rng, beta, 1.0)
            })
            .collect();
        tiers.iter_mut().for_each(|t| t.activity = 1.0);
        let access: Vec<usize> = (0..k).filter(|_| rng.random::<f64>() < 0.7).collect();
        let access = if access.is_empty() { vec![0] } else { access };
        let net = Network::new(alpha, tiers, access).unwrap();
        let r = coverage(&net, &ctl()).unwrap();
        let full = coverage_fully_loaded(&net).unwrap();
        let err = (r.value - full.value).abs();
        worst = worst.max(err);
        ensure(err <= 1e-12 && r.terms_used == 0, || {
            format!("network {i}: {} vs {} with {} terms", r.value, full.value, r.terms_used)
        })?;
    }
    Ok(format!("50 networks, worst |diff| = {worst:.2e}, terms_used = 0"))
}

fn c4_bounds() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut accepted = 0;
    let mut drawn = 0;
    while accepted < 20 {
        drawn += 1;
        let k = rng.random_range(1..=3);
        let alpha = uniform(&mut rng, 3.0, 5.0);
        let tiers = (0..k)
            .map(|_| {
                let beta = db_to_linear(uniform(&mut rng, 0.5, 10.0));
                let p = uniform(&mut rng, 0.2, 1.0);
                random_tier(&mut rng, beta, p)
            })
            .collect();
        let net = Network::open(alpha, tiers).unwrap();
        // past the hump: the envelope (A/η)^m/Γ(1+2m/α) decreases from m = 1
        let ratio = derived_constants(&net).unwrap().a_over_eta();
        if !(ratio > 0.0 && ratio < 1.0) {
            continue;
        }
        accepted += 1;
        let value = coverage(&net, &tight()).unwrap().value;
        let mut prev_width = f64::INFINITY;
        let mut prev_g = f64::INFINITY;
        for m in 1..=10 {
            let (lo, hi) = coverage_bounds(&net, m).unwrap();
            let g = g_term(&net, 2 * m).unwrap().abs();
            let width = hi - lo;
            // the two truncations differ by one term; their difference is
            // exact up to the rounding of the bounds themselves
            let ulps = 4.0 * f64::EPSILON * lo.abs().max(hi.abs());
            ensure(lo <= value && value <= hi, || {
                format!("network {accepted} m={m}: {lo} <= {value} <= {hi} fails")
            })?;
            ensure((width - g).abs() <= ulps, || {
                format!("network {accepted} m={m}: width {width} vs |g(2m)| {g}")
            })?;
            ensure(g < prev_g && width <= prev_width, || {
                format!("network {accepted} m={m}: widths not decreasing")
            })?;
            prev_g = g;
            prev_width = width;
        }
    }
    Ok(format!("20 networks (of {drawn} drawn) with A/eta < 1, m = 1..10"))
}

fn c5_scale_invariance() -> Check {
    let mut worst = 0.0_f64;
    for (beta, p, alpha) in [(1.0, 0.5, 4.0), (2.0, 0.8, 3.8), (5.0, 0.3, 3.5)] {
        let reference = coverage(&Network::open(alpha, vec![Tier::new(1.0, 1.0, beta, p)]).unwrap(), &ctl())
            .unwrap()
            .value;
        for c in [0.1, 1.0, 10.0] {
            for d in [0.1, 1.0, 10.0] {
                let net = Network::open(alpha, vec![Tier::new(d, c, beta, p)]).unwrap();
                let v = coverage(&net, &ctl()).unwrap().value;
                worst = worst.max((v - reference).abs());
                let scalar = coverage_single_tier(d, c, beta, p, alpha, &ctl()).unwrap().value;
                worst = worst.max((scalar - reference).abs());
            }
        }
        let multi = Network::open(
            alpha,
            vec![
                Tier::new(1.0, 1.0, beta, p),
                Tier::new(0.01, 5.0, beta, p),
                Tier::new(0.001, 20.0, beta, p),
            ],
        )
        .unwrap();
        worst = worst.max((coverage(&multi, &ctl()).unwrap().value - reference).abs());
    }
    ensure(worst <= 1e-10, || format!("worst deviation {worst:.2e}"))?;
    Ok(format!("single-tier and same-(beta, p) K-tier, worst |diff| = {worst:.2e}"))
}

fn c6_tier_addition() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for i in 0..30 {
        let alpha = uniform(&mut rng, 3.0, 4.5);
        let beta = db_to_linear(uniform(&mut rng, 0.5, 8.0));
        let k = rng.random_range(1..=3);
        let tiers = (0..k)
            .map(|_| {
                let p = uniform(&mut rng, 0.45, 0.9);
                random_tier(&mut rng, beta, p)
            })
            .collect();
        let net = Network::open(alpha, tiers).unwrap();
        let before = coverage(&net, &ctl()).unwrap().value;
        let p_eff = effective_load(&net);
        let shift = uniform(&mut rng, 0.05, 0.09);
        let template = random_tier(&mut rng, beta, p_eff);
        for (p, expect) in [
            (p_eff, TierAddition::Unchanged),
            (p_eff - shift, TierAddition::Increases),
            (p_eff + shift, TierAddition::Decreases),
        ] {
            let new = Tier { activity: p, ..template };
            let after = coverage(&net.with_added_tier(new).unwrap(), &ctl()).unwrap().value;
            let delta = after - before;
            let ok = match expect {
                TierAddition::Unchanged => delta.abs() < 1e-8,
                TierAddition::Increases => delta > 0.0,
                TierAddition::Decreases => delta < 0.0,
            };
            let predicted = tier_addition_effect(&net, &new).unwrap();
            ensure(ok && predicted == expect, || {
                format!("instance {i}: p={p} p_eff={p_eff} delta={delta:e} predicted {predicted:?}")
            })?;
        }
    }
    Ok("30 instances, unchanged / raised / lowered as predicted".into())
}

fn fig6_network(beta_db: f64) -> Network {
    let beta = db_to_linear(beta_db);
    Network::open(
        3.8,
        vec![Tier::new(1.0, 1.0, beta, 0.8), Tier::new(0.01, 2.0, beta, 0.6)],
    )
    .unwrap()
}

fn c7_monte_carlo() -> Check {
    let mut rows = Vec::new();
    for (i, db) in [0.0, 2.0, 4.0, 8.0].into_iter().enumerate() {
        let net = fig6_network(db);
        let a = coverage(&net, &ctl()).unwrap().value;
        let e = mc(&net, 100_000, 70 + i as u64, LoadModel::ConditionalThinning);
        let tol = (3.0 * e.stderr).max(0.01);
        ensure((a - e.mean).abs() <= tol, || {
            format!("{db} dB: analytic {a:.4} vs MC {:.4} +- {:.4}", e.mean, e.stderr)
        })?;
        rows.push(format!("{db}dB {a:.4}/{:.4}", e.mean));
    }
    let net = fig6_network(-6.0);
    let a = coverage(&net, &ctl()).unwrap().value;
    let e = mc(&net, 100_000, 79, LoadModel::ConditionalThinning);
    ensure(a > e.mean, || format!("-6 dB: analytic {a:.4} <= MC {:.4}", e.mean))?;
    rows.push(format!("-6dB {a:.4}>{:.4}", e.mean));
    Ok(rows.join(", "))
}

fn c8_full_load_pessimism() -> Check {
    let net = |p| Network::open(3.8, vec![Tier::new(1.0, 1.0, 1.0, p)]).unwrap();
    let a8 = coverage(&net(0.8), &ctl()).unwrap().value;
    let a1 = coverage(&net(1.0), &ctl()).unwrap().value;
    ensure(a8 - a1 > 0.01, || format!("analytic gap {}", a8 - a1))?;
    let e8 = mc(&net(0.8), 100_000, 80, LoadModel::ConditionalThinning);
    let e1 = mc(&net(1.0), 100_000, 81, LoadModel::ConditionalThinning);
    let se = e8.stderr.hypot(e1.stderr);
    let gap = e8.mean - e1.mean;
    ensure(gap > 0.0 && (gap - (a8 - a1)).abs() <= 3.0 * se, || {
        format!("MC gap {gap:.4} +- {se:.4} vs analytic {:.4}", a8 - a1)
    })?;
    Ok(format!("analytic gap {:.4}, MC gap {gap:.4} +- {se:.4}", a8 - a1))
}

fn c9_density_trends() -> Check {
    let grid: Vec<f64> = (0..=30).map(|i| 10f64.powf(-1.0 + 2.0 * i as f64 / 30.0)).collect();
    let curve = |p2: f64| -> Vec<f64> {
        grid.iter()
            .map(|&l2| {
                let net = Network::open(
                    3.8,
                    vec![Tier::new(1.0, 1.0, 1.0, 0.6), Tier::new(0.01, l2, 1.0, p2)],
                )
                .unwrap();
                coverage(&net, &ctl()).unwrap().value
            })
            .collect()
    };
    let up = curve(0.4);
    let flat = curve(0.6);
    let down = curve(0.8);
    ensure(up.windows(2).all(|w| w[1] > w[0]), || "p2=0.4 not increasing".into())?;
    ensure(down.windows(2).all(|w| w[1] < w[0]), || "p2=0.8 not decreasing".into())?;
    let spread = flat.iter().cloned().fold(f64::MIN, f64::max)
        - flat.iter().cloned().fold(f64::MAX, f64::min);
    ensure(spread < 1e-9, || format!("p2=0.6 spread {spread:e}"))?;
    Ok(format!(
        "p2=0.4: {:.4}->{:.4}, p2=0.6 spread {spread:.1e}, p2=0.8: {:.4}->{:.4}",
        up[0], up[30], down[0], down[30]
    ))
}

fn c10_system() -> Check {
    let net = Network::open(
        3.8,
        vec![Tier::new(1.0, 1.0, 1.0, 0.5), Tier::new(0.1, 1.0, 1.0, 0.5)],
    )
    .unwrap();
    let mut rows = Vec::new();
    for (i, lu) in [4.0, 6.0, 8.0, 10.0, 12.0].into_iter().enumerate() {
        let a = coverage(&with_user_load(&net, lu, 20).unwrap(), &ctl()).unwrap().value;
        let sim = SimConfig::for_system(&net, 2_000, 100 + i as u64).unwrap();
        let e = estimate_coverage_system(&net, lu, 20, &sim).unwrap().coverage;
        ensure((a - e.mean).abs() <= 0.05, || {
            format!("lambda_u={lu}: analytic {a:.4} vs simulated {:.4}", e.mean)
        })?;
        rows.push(format!("{lu}: {a:.3}/{:.3}", e.mean));
    }
    Ok(rows.join(", "))
}

fn fig8_gap(f: f64, p2: f64) -> f64 {
    let closed_density = 10.0;
    let open_density = open_density_for_fraction(closed_density, f).unwrap();
    let tiers = vec![
        Tier::new(1.0, 1.0, 1.0, 1.0),
        Tier::new(0.01, open_density, 1.0, p2),
        Tier::new(0.01, closed_density, 1.0, p2),
    ];
    let open = Network::open(3.8, tiers.clone()).unwrap();
    let closed = Network::new(3.8, tiers, vec![0, 1]).unwrap();
    coverage(&open, &ctl()).unwrap().value - coverage(&closed, &ctl()).unwrap().value
}

fn c11_closed_vs_open() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for i in 0..20 {
        let k = rng.random_range(2..=3);
        let alpha = uniform(&mut rng, 3.0, 4.5);
        let tiers = (0..k)
            .map(|_| {
                let beta = db_to_linear(uniform(&mut rng, 0.5, 8.0));
                let p = uniform(&mut rng, 0.4, 1.0);
                random_tier(&mut rng, beta, p)
            })
            .collect();
        let open = Network::open(alpha, tiers).unwrap();
        let keep = rng.random_range(1..k);
        let mut subset: Vec<usize> = (0..k).collect();
        for j in (1..k).rev() {
            subset.swap(j, rng.random_range(0..=j));
        }
        subset.truncate(keep);
        let closed = open.with_access(subset).unwrap();
        let a_open = coverage(&open, &ctl()).unwrap().value;
        let a_closed = coverage(&closed, &ctl()).unwrap().value;
        let e_open = mc(&open, 2_000, 110 + i, LoadModel::ConditionalThinning);
        let e_closed = mc(&closed, 2_000, 110 + i, LoadModel::ConditionalThinning);
        ensure(a_closed <= a_open && e_closed.mean <= e_open.mean, || {
            format!(
                "network {i}: analytic {a_closed:.4} vs {a_open:.4}, MC {:.4} vs {:.4}",
                e_closed.mean, e_open.mean
            )
        })?;
    }
    let fs: Vec<f64> = (0..=19).map(|i| 0.05 * i as f64).collect();
    let mut ends = Vec::new();
    for p2 in [0.2, 0.5, 0.8] {
        let gaps: Vec<f64> = fs.iter().map(|&f| fig8_gap(f, p2)).collect();
        ensure(gaps.windows(2).all(|w| w[1] <= w[0] + 1e-12), || {
            format!("p2={p2}: gap not non-increasing {gaps:?}")
        })?;
        ends.push(format!("p2={p2}: {:.4}->{:.4}", gaps[0], gaps[19]));
    }
    Ok(format!("20 networks closed <= open; f-sweep gaps {}", ends.join(", ")))
}

fn c12_convergence() -> Check {
    let net = |p| Network::open(4.0, vec![Tier::new(1.0, 1.0, 1.0, p)]).unwrap();
    let trace = g_trace(&net(0.25), 60).unwrap();
    let mags: Vec<f64> = trace.iter().map(|t| t.g_m.abs()).collect();
    let peak = mags
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let rises = mags[..=peak].windows(2).all(|w| w[1] > w[0]);
    let falls = mags[peak..].windows(2).all(|w| w[1] < w[0]);
    ensure(peak > 0 && rises && falls && mags[59] < 1e-8, || {
        format!("p=0.25 |g(m)| peak at m={} rises={rises} falls={falls}", peak + 1)
    })?;
    let counts: Vec<usize> = [0.25, 0.5, 0.75, 1.0]
        .iter()
        .map(|&p| truncation_terms(&net(p), 1e-8, 10_000).unwrap())
        .collect();
    ensure(counts.windows(2).all(|w| w[1] <= w[0]), || {
        format!("M_eps not non-increasing: {counts:?}")
    })?;
    Ok(format!("p=0.25 terms peak at m={}, M_eps = {counts:?}", peak + 1))
}

fn c13_idle_only() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut rows = Vec::new();
    for i in 0..5 {
        let alpha = uniform(&mut rng, 3.0, 4.5);
        let beta = db_to_linear(uniform(&mut rng, 0.0, 8.0));
        let p = uniform(&mut rng, 0.3, 0.9);
        let net = Network::open(alpha, vec![random_tier(&mut rng, beta, p)]).unwrap();
        let a = coverage_idle_only(&net, &ctl()).unwrap().value;
        let e = mc(&net, 100_000, 130 + i, LoadModel::IdleOnly);
        ensure((a - e.mean).abs() <= 3.0 * e.stderr, || {
            format!("config {i}: analytic {a:.4} vs MC {:.4} +- {:.4}", e.mean, e.stderr)
        })?;
        rows.push(format!("{a:.4}/{:.4}", e.mean));
    }
    Ok(rows.join(", "))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Check); 13] = [
        ("convergence threshold", c1_threshold),
        ("closed-form g(1), g(2)", c2_closed_form),
        ("full-load reduction", c3_full_load),
        ("bounds sandwich", c4_bounds),
        ("scale invariance", c5_scale_invariance),
        ("tier addition trichotomy", c6_tier_addition),
        ("Monte Carlo agreement", c7_monte_carlo),
        ("full-load pessimism", c8_full_load_pessimism),
        ("density-sweep trends", c9_density_trends),
        ("system simulation", c10_system),
        ("closed vs open access", c11_closed_vs_open),
        ("convergence behaviour", c12_convergence),
        ("idle-only variant", c13_idle_only),
    ];
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = check();
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
