//! Acceptance suite: one numbered check per line, `PASS` or `FAIL`.
//!
//! Runs as a plain binary so the verdict lines are always visible.

use std::time::{Duration, Instant};

use permreg::counting::{compare_under_smoothing, estimate_pattern_count, EstimateOptions};
use permreg::patterns::{
    all_patterns, concentration_intervals, count_pattern, destroy_pattern, pseudomonotone_subset,
    verify_destroyed, Pattern,
};
use permreg::quasirand::{
    discrepancy, discrepancy_star, quasirandom_via_uniformity, two_subseq_stat, DiscrepancyMode,
};
use permreg::regularity::{
    exploit_irregular, is_regular_pair, is_regular_partition, iteration_bound, q_of_intervals,
    q_pair, regular_partition, EquitablePartition, PairCheckMode, RegularityLimits,
};
use permreg::uniformity::{canonical_family, uniform_partition, verify_uniform, UniformPartition};
use permreg::{
    generate, DominanceTable, GeneratorKind, Interval, Permutation, StepCdf, UniformStrategy,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn random(n: usize, seed: u64) -> Permutation {
    generate(GeneratorKind::Random, n, seed).unwrap()
}

fn binom(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    (0..k as u64).fold(1, |acc, i| acc * (n as u64 - i) / (i + 1))
}

/// Counts occurrences by trying every index set.
fn naive_count(sigma: &[usize], tau: &[usize]) -> u64 {
    fn rec(sigma: &[usize], tau: &[usize], start: usize, chosen: &mut Vec<usize>) -> u64 {
        if chosen.len() == tau.len() {
            let ok = (0..tau.len()).all(|a| {
                (0..tau.len()).all(|b| (sigma[chosen[a]] < sigma[chosen[b]]) == (tau[a] < tau[b]))
            });
            return u64::from(ok);
        }
        let mut total = 0;
        for i in start..sigma.len() {
            chosen.push(i);
            total += rec(sigma, tau, i + 1, chosen);
            chosen.pop();
        }
        total
    }
    rec(sigma, tau, 0, &mut Vec::new())
}

fn within(elapsed: Duration, limit_s: u64) -> Result<(), String> {
    if elapsed > Duration::from_secs(limit_s) {
        Err(format!(
            "took {:.1}s, limit {limit_s}s",
            elapsed.as_secs_f64()
        ))
    } else {
        Ok(())
    }
}

fn c1_conservation() -> Outcome {
    let start = Instant::now();
    for seed in 0..50 {
        let s = random(30, seed);
        for m in 2..=4 {
            let total: u64 = all_patterns(m)
                .iter()
                .map(|t| count_pattern(&s, t, None).unwrap())
                .sum();
            if total != binom(30, m) {
                return Err(format!("seed {seed}, m={m}: {total} != {}", binom(30, m)));
            }
        }
    }
    within(start.elapsed(), 30)?;
    Ok(format!(
        "150 sums exact in {:.2}s",
        start.elapsed().as_secs_f64()
    ))
}

fn c2_oracle() -> Outcome {
    let mut cases = 0;
    for sigma in all_patterns(6) {
        for tau in all_patterns(3) {
            let fast = count_pattern(sigma.perm(), &tau, None).unwrap();
            if fast != naive_count(sigma.images(), tau.images()) {
                return Err(format!("σ={sigma} τ={tau}"));
            }
            cases += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let taus = all_patterns(4);
    for seed in 0..100 {
        let s = random(40, 1000 + seed);
        let tau = taus.choose(&mut rng).unwrap();
        if count_pattern(&s, tau, None).unwrap() != naive_count(s.images(), tau.images()) {
            return Err(format!("seed {seed}, τ={tau}"));
        }
        cases += 1;
    }
    Ok(format!("{cases} cases agree"))
}

/// Random cut of `[lo, hi)` into nonempty intervals.
fn cut(rng: &mut ChaCha8Rng, iv: Interval) -> Vec<Interval> {
    let pieces = rng.gen_range(1..=iv.len().min(4));
    let mut points: Vec<usize> = (iv.lo + 1..iv.hi).collect();
    points.shuffle(rng);
    let mut points: Vec<usize> = points.into_iter().take(pieces - 1).collect();
    points.push(iv.lo);
    points.push(iv.hi);
    points.sort_unstable();
    points
        .windows(2)
        .map(|w| Interval::new(w[0], w[1]))
        .collect()
}

fn c3_nodecrease() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = f64::INFINITY;
    for trial in 0..500u64 {
        let n = rng.gen_range(8..=256);
        let t = DominanceTable::new(&random(n, trial)).unwrap();
        let k = rng.gen_range(1..=n.min(16));
        let p = EquitablePartition::equitable(n, k).unwrap();
        let singletons: Vec<Interval> = p
            .exceptional
            .members()
            .iter()
            .map(|&x| Interval::new(x, x + 1))
            .collect();
        let coarse: Vec<Interval> = p
            .blocks
            .iter()
            .copied()
            .chain(singletons.iter().copied())
            .collect();
        let fine: Vec<Interval> = p
            .blocks
            .iter()
            .flat_map(|&b| cut(&mut rng, b))
            .chain(singletons.iter().copied())
            .collect();
        let diff = q_of_intervals(&t, &fine) - q_of_intervals(&t, &coarse);
        worst = worst.min(diff);
        if diff < -1e-12 {
            return Err(format!("trial {trial}: q dropped by {}", -diff));
        }
    }
    Ok(format!("500 refinements, smallest change {worst:.3e}"))
}

/// Identity with a few random transpositions.
fn near_identity(n: usize, rng: &mut ChaCha8Rng) -> Permutation {
    let mut v: Vec<usize> = (0..n).collect();
    for _ in 0..rng.gen_range(0..=n / 16) {
        let a = rng.gen_range(0..n);
        let b = rng.gen_range(0..n);
        v.swap(a, b);
    }
    Permutation::new(v).unwrap()
}

fn c4_exploit() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut done = 0;
    let mut tries = 0;
    let mut min_ratio = f64::INFINITY;
    while done < 100 {
        tries += 1;
        if tries > 10_000 {
            return Err(format!("only {done} irregular pairs constructed"));
        }
        let n = rng.gen_range(32..=256);
        let eps = if done % 2 == 0 { 0.05 } else { 0.1 };
        let t = DominanceTable::new(&near_identity(n, &mut rng)).unwrap();
        let len = rng.gen_range(n / 8..=n / 2);
        let c_lo = rng.gen_range(0..=n - len);
        let d_lo = rng.gen_range(0..=n - len);
        let c = Interval::new(c_lo, c_lo + len);
        let d = Interval::new(d_lo, d_lo + len);
        let check = is_regular_pair(&t, c, d, eps, PairCheckMode::Exhaustive).unwrap();
        if check.regular {
            continue;
        }
        let w = check.witness;
        let (cs, ds) = exploit_irregular(&t, c, d, w.i, w.j, eps).map_err(|e| e.to_string())?;
        let gain = q_pair(&t, &cs, &ds) - q_pair(&t, &[c], &[d]);
        let want = eps.powi(4) * (c.len() * d.len()) as f64 / (n * n) as f64;
        if gain < want - 1e-12 {
            return Err(format!("gain {gain} < {want} for {c} x {d}"));
        }
        min_ratio = min_ratio.min(gain / want);
        done += 1;
    }
    Ok(format!(
        "100 pairs, smallest gain/required = {min_ratio:.2}"
    ))
}

fn c5_driver() -> Outcome {
    let start = Instant::now();
    let eps = 0.25;
    let mut max_iter = 0;
    for seed in 0..20 {
        let t = DominanceTable::new(&random(4096, 500 + seed)).unwrap();
        let out = regular_partition(&t, eps, 4, &RegularityLimits::default())
            .map_err(|e| e.to_string())?;
        if !out.is_regular() {
            return Err(format!("seed {seed}: {:?}", out.status));
        }
        let rep = is_regular_partition(&t, &out.partition, eps).unwrap();
        if !rep.regular {
            return Err(format!("seed {seed}: returned partition fails the check"));
        }
        if out.iterations.windows(2).any(|w| w[1].q < w[0].q - 1e-12) {
            return Err(format!("seed {seed}: q trace decreases"));
        }
        if out.iterations.len() > iteration_bound(eps) {
            return Err(format!("seed {seed}: {} iterations", out.iterations.len()));
        }
        max_iter = max_iter.max(out.iterations.len());
    }
    within(start.elapsed(), 120)?;
    Ok(format!(
        "20 runs regular, at most {max_iter} checks, {:.1}s",
        start.elapsed().as_secs_f64()
    ))
}

fn c6_uniform() -> Outcome {
    let start = Instant::now();
    let n = 2048;
    let mut ks = Vec::new();
    for seed in 0..20 {
        let s = random(n, 600 + seed);
        let t = DominanceTable::new(&s).unwrap();
        for eps in [0.15, 0.25] {
            let out = uniform_partition(&t, eps, 4, UniformStrategy::Coarsest)
                .map_err(|e| e.to_string())?;
            let check = verify_uniform(&s, &out.uniform).unwrap();
            if !check.uniform {
                return Err(format!("seed {seed}, ε={eps}: verification failed"));
            }
            if out.uniform.partition.exceptional_size() as f64 > eps * n as f64 {
                return Err(format!("seed {seed}, ε={eps}: |C_0| too large"));
            }
            ks.push(out.uniform.partition.k());
        }
    }
    within(start.elapsed(), 120)?;
    Ok(format!(
        "40 partitions verified (k in {}..={}), {:.1}s",
        ks.iter().min().unwrap(),
        ks.iter().max().unwrap(),
        start.elapsed().as_secs_f64()
    ))
}

fn c7_estimator() -> Outcome {
    let n = 500;
    let k = 20;
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut worst = 0.0f64;
    for seed in 0..20 {
        let s = random(n, 700 + seed);
        let m = 2 + seed as usize % 2;
        let tau = all_patterns(m).choose(&mut rng).unwrap().clone();
        let p = EquitablePartition::equitable(n, k).unwrap();
        let u = UniformPartition {
            family: canonical_family(&s, &p).unwrap(),
            partition: p,
            epsilon: 0.01,
        };
        let opts = EstimateOptions {
            exact: true,
            ..Default::default()
        };
        let e = estimate_pattern_count(&s, &u, &tau, &opts).map_err(|e| e.to_string())?;
        let err = (e.exact.unwrap() as f64 - e.estimate).abs();
        if err > e.bound {
            return Err(format!(
                "seed {seed}, τ={tau}: error {err} > bound {}",
                e.bound
            ));
        }
        worst = worst.max(err / e.bound);
    }
    Ok(format!(
        "20 estimates within bound, largest error/bound = {worst:.4}"
    ))
}

/// Piecewise-linear CDF with knots every `1/20` and a random profile.
fn random_linear(rng: &mut ChaCha8Rng) -> StepCdf {
    let steps = 20;
    let w: Vec<f64> = (0..steps).map(|_| rng.gen_range(0.2..1.8)).collect();
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    let mut knots = vec![(0.0, 0.0)];
    for (i, x) in w.iter().enumerate() {
        acc += x / total;
        knots.push(((i + 1) as f64 / steps as f64, acc));
    }
    StepCdf::linear(knots, 1.0).unwrap()
}

/// `g(x - s)`, extended to `[0, 1 + s]`.
fn shifted(g: &StepCdf, s: f64) -> StepCdf {
    let mut knots = vec![(0.0, 0.0)];
    knots.extend(
        g.knots()
            .iter()
            .filter(|&&(p, _)| p + s > 0.0)
            .map(|&(p, v)| (p + s, v)),
    );
    knots.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12);
    StepCdf::linear(knots, 1.0 + s).unwrap()
}

/// Nested trapezoid rule on a uniform grid of width `h`.
fn quadrature(cdfs: &[StepCdf], weight: Option<&StepCdf>, beta: f64, h: f64) -> f64 {
    let steps = (beta / h).round() as usize;
    let xs: Vec<f64> = (0..=steps).map(|i| (i as f64 * h).min(beta)).collect();
    let mut prev: Vec<f64> = xs
        .iter()
        .map(|&x| weight.map_or(1.0, |w| w.eval(x)))
        .collect();
    for f in cdfs {
        let vals: Vec<f64> = xs.iter().map(|&x| f.eval(x)).collect();
        let mut cur = vec![0.0; xs.len()];
        for i in 1..xs.len() {
            let df = vals[i] - vals[i - 1];
            cur[i] = cur[i - 1] + 0.5 * (prev[i - 1] + prev[i]) * df;
        }
        prev = cur;
    }
    *prev.last().unwrap()
}

fn c8_integral_estimate() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut worst_ratio = 0.0f64;
    let mut worst_quad = 0.0f64;
    let mut done = 0;
    while done < 100 {
        let r = rng.gen_range(1..=3);
        let eps = [0.02, 0.05, 0.1][rng.gen_range(0..3)];
        let gs: Vec<StepCdf> = (0..r).map(|_| random_linear(&mut rng)).collect();
        let fs: Vec<StepCdf> = gs
            .iter()
            .map(|g| shifted(g, rng.gen_range(0..=(eps * 5000.0) as usize) as f64 * 1e-4))
            .collect();
        let b = gs
            .iter()
            .map(|g| g.lipschitz_modulus(eps).unwrap())
            .fold(0.0, f64::max);
        let weight = if rng.gen_bool(0.5) {
            Some(random_linear(&mut rng))
        } else {
            None
        };
        let beta = rng.gen_range(3000..=10_000) as f64 * 1e-4;
        let c = compare_under_smoothing(&fs, &gs, eps, b, beta, weight.as_ref())
            .map_err(|e| e.to_string())?;
        if !c.certified() {
            continue;
        }
        if !c.within_bound {
            return Err(format!("difference {} exceeds {}", c.difference, c.bound));
        }
        let qf = quadrature(&fs, weight.as_ref(), beta, 1e-4);
        let qg = quadrature(&gs, weight.as_ref(), beta, 1e-4);
        let dq = (qf - c.f_integral).abs().max((qg - c.g_integral).abs());
        if dq > 1e-6 {
            return Err(format!("quadrature disagrees by {dq}"));
        }
        worst_ratio = worst_ratio.max(c.difference / c.bound);
        worst_quad = worst_quad.max(dq);
        done += 1;
    }
    Ok(format!(
        "100 instances, largest diff/bound = {worst_ratio:.3}, quadrature gap {worst_quad:.1e}"
    ))
}

/// Step CDF with atoms at multiples of `1/40`.
fn random_step(rng: &mut ChaCha8Rng) -> StepCdf {
    let mut pos: Vec<usize> = (0..rng.gen_range(3..12))
        .map(|_| rng.gen_range(1..=40))
        .collect();
    pos.sort_unstable();
    pos.dedup();
    let w: Vec<f64> = pos.iter().map(|_| rng.gen_range(0.1..1.0)).collect();
    let total: f64 = w.iter().sum();
    let mut acc = 0.0;
    let knots = pos
        .iter()
        .zip(&w)
        .map(|(&p, &x)| {
            acc += x / total;
            (p as f64 / 40.0, acc)
        })
        .collect();
    StepCdf::step(knots, 1.0).unwrap()
}

fn c9_convolution() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let mut worst = 0.0f64;
    for i in 0..100 {
        let eps = [0.02, 0.05, 0.1][i % 3];
        let g = random_step(&mut rng);
        let s = rng.gen_range(0.0..eps);
        let knots: Vec<(f64, f64)> = g.knots().iter().map(|&(p, v)| (p + s, v)).collect();
        let f = StepCdf::step(knots, 1.0 + s).unwrap();
        if !f.eps_near(&g, eps).near {
            return Err(format!("pair {i} is not ε-near to begin with"));
        }
        for delta in [0.05, 0.2] {
            let fs = f.convolve_smooth(delta).unwrap();
            let gs = g.convolve_smooth(delta).unwrap();
            if !fs.eps_near(&gs, eps).near {
                return Err(format!("pair {i}, δ={delta}: smoothing broke nearness"));
            }
            for h in [&fs, &gs] {
                let inc = h.max_window_increment(eps).unwrap();
                if inc > 2.0 * eps / delta + 1e-9 {
                    return Err(format!("pair {i}, δ={delta}: increment {inc} > 2ε/δ"));
                }
                worst = worst.max(inc / (2.0 * eps / delta));
            }
        }
    }
    Ok(format!(
        "100 pairs x 2 widths, largest increment/(2ε/δ) = {worst:.3}"
    ))
}

fn c10_destroy() -> Outcome {
    let start = Instant::now();
    let n = 200;
    let eps = 0.02;
    let s = generate(GeneratorKind::Interleave, n, 0).unwrap();
    let t = DominanceTable::new(&s).unwrap();
    let tau: Pattern = "1 0".parse().unwrap();
    let out = destroy_pattern(&t, &tau, eps, 4).map_err(|e| e.to_string())?;
    let check = verify_destroyed(&s, &tau, &out.deletion).unwrap();
    if !check.destroyed {
        return Err(format!("occurrence {:?} survives", check.witness));
    }
    let a = &out.audit;
    let nn = (n * n) as f64;
    if a.rule_b as f64 > nn / (2 * a.k) as f64 {
        return Err(format!("rule (b) count {} > n²/2k", a.rule_b));
    }
    if a.rule_c as f64 > 12.0 * eps * nn + n as f64 {
        return Err(format!("rule (c) count {} > 12εn² + n", a.rule_c));
    }
    within(start.elapsed(), 60)?;
    Ok(format!(
        "destroyed; rules a/b/c = {}/{}/{}, union {}, k = {}",
        a.rule_a, a.rule_b, a.rule_c, a.total, a.k
    ))
}

fn c11_sandwich() -> Outcome {
    let mut perms: Vec<Permutation> = (0..20)
        .map(|s| random(16 + 8 * (s as usize % 15), 1100 + s))
        .collect();
    perms.push(Permutation::identity(128));
    perms.push(Permutation::reverse(128));
    perms.push(generate(GeneratorKind::Interleave, 128, 0).unwrap());
    for p in &perms {
        let t = DominanceTable::new(p).unwrap();
        let star = discrepancy_star(&t);
        let d = discrepancy(&t, DiscrepancyMode::Exact).unwrap().lower;
        if !(star <= d + 1e-12 && d <= 4.0 * star + 1e-12) {
            return Err(format!("n={}: D*={star}, D={d}", p.len()));
        }
    }
    let id8 = discrepancy_star(&DominanceTable::new(&Permutation::identity(8)).unwrap());
    if id8 != 2.0 {
        return Err(format!("identity_8 D* = {id8}"));
    }
    Ok(format!(
        "{} permutations sandwiched, identity_8 D* = 2",
        perms.len()
    ))
}

fn c12_coherence() -> Outcome {
    let n = 4096;
    let all = Interval::new(0, n);
    let (mut max_star, mut max_two) = (0.0f64, 0i64);
    for seed in 0..20 {
        let s = random(n, 1200 + seed);
        let t = DominanceTable::new(&s).unwrap();
        let star = discrepancy_star(&t);
        if star > 0.05 * n as f64 {
            return Err(format!("seed {seed}: D* = {star}"));
        }
        let q = quasirandom_via_uniformity(&t, 0.15, 4).map_err(|e| e.to_string())?;
        if !q.quasirandom {
            return Err(format!(
                "seed {seed}: block {:?} not 2ε-near identity",
                q.worst_block
            ));
        }
        let two = two_subseq_stat(&s, all, all).unwrap().difference;
        if two.unsigned_abs() as f64 > 0.05 * (n * n) as f64 {
            return Err(format!("seed {seed}: Λ01 - Λ10 = {two}"));
        }
        max_star = max_star.max(star);
        max_two = max_two.max(two.abs());
    }
    Ok(format!(
        "20 seeds coherent; max D* = {max_star:.1} (gate {:.1}), max |Λ01-Λ10| = {max_two}",
        0.05 * n as f64
    ))
}

/// Even positions carry a high decreasing run, odd positions a low one.
fn two_decreasing_runs(n: usize) -> Permutation {
    let h = n / 2;
    Permutation::new(
        (0..n)
            .map(|x| {
                if x % 2 == 0 {
                    n - 1 - x / 2
                } else {
                    h - 1 - x / 2
                }
            })
            .collect(),
    )
    .unwrap()
}

fn c13_concentration() -> Outcome {
    let n = 2000;
    let eps = 1.0 / 12.0;
    let tau: Pattern = "0 1 2".parse().unwrap();
    let mut notes = Vec::new();
    for (name, s) in [
        ("reverse", Permutation::reverse(n)),
        ("two runs", two_decreasing_runs(n)),
    ] {
        let t = DominanceTable::new(&s).unwrap();
        let lambda = count_pattern(&s, &tau, None).unwrap();
        if lambda != 0 {
            return Err(format!("{name} contains 012"));
        }
        let u = uniform_partition(&t, eps, 4, UniformStrategy::Coarsest)
            .map_err(|e| e.to_string())?
            .uniform;
        let fam = concentration_intervals(&s, &u, &tau, Some(lambda)).map_err(|e| e.to_string())?;
        for b in &fam.blocks {
            if b.intervals.len() > 2 {
                return Err(format!(
                    "{name}: block {} has {} intervals",
                    b.block,
                    b.intervals.len()
                ));
            }
            if let Some(iv) = b
                .intervals
                .iter()
                .find(|iv| iv[1] - iv[0] > 6.0 * eps + 1e-12)
            {
                return Err(format!("{name}: interval {iv:?} longer than 6ε"));
            }
        }
        let rep = pseudomonotone_subset(&t, &tau, 0.25).map_err(|e| e.to_string())?;
        if rep.delta_achieved > 0.25 {
            return Err(format!("{name}: δ′ = {}", rep.delta_achieved));
        }
        notes.push(format!(
            "{name}: k={} |X|={} δ′={}",
            fam.blocks.len(),
            rep.size,
            rep.delta_achieved
        ));
    }
    Ok(notes.join("; "))
}

fn main() {
    let checks: [(&str, fn() -> Outcome); 13] = [
        ("pattern conservation", c1_conservation),
        ("counting engines match the naive oracle", c2_oracle),
        ("index does not decrease under refinement", c3_nodecrease),
        ("irregular pairs yield the index increment", c4_exploit),
        ("regularity driver soundness", c5_driver),
        ("uniform partition round trip", c6_uniform),
        ("pattern-count estimator bound", c7_estimator),
        ("integral comparison bound", c8_integral_estimate),
        (
            "smoothing keeps nearness and bounds increments",
            c9_convolution,
        ),
        ("pattern destruction end to end", c10_destroy),
        ("discrepancy sandwich", c11_sandwich),
        ("quasirandomness coherence", c12_coherence),
        ("concentration sweep", c13_concentration),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let result = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {:>2} {name} ({secs:.1}s): {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("FAIL {:>2} {name} ({secs:.1}s): {detail}", i + 1);
            }
        }
    }
    println!(
        "{} of {} acceptance checks passed",
        checks.len() - failed,
        checks.len()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
