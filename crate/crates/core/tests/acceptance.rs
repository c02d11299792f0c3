//! Acceptance run: prints one `ACCEPTANCE n <name>: PASS|FAIL (details)` line
//! per criterion and exits nonzero if any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_bigint::BigUint;
use num_traits::{One, Signed};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rectiflow::checks::{all_hold, failures, Check};
use rectiflow::lipschitz_approx::{
    build_quantized_function, estimate_lipschitz, sup_grid_error, InputNorm, LipschitzFunction, LipschitzMode,
};
use rectiflow::measures::{
    metric_entropy_bound, quantize_simplex_exact, rng_from_seed, DiscreteMeasure, UniformMixture,
};
use rectiflow::rectifiable::{
    bit_count, bit_count_countable, build_pipeline, class_constant, log_grid, midpoint_measure, quarter_circle,
    quarter_circle_target, scaling_exponent, Kappa,
};
use rectiflow::scalar::{int, ratio};
use rectiflow::spike::{partition_sum, spike_bounds, spike_network, spike_value};
use rectiflow::transport::{
    build_sigma, build_transport_network, cell_mass_check, sigma_log2_count, sigma_log2_count_bound, w1_certificate,
    CellMassMethod,
};
use rectiflow::wasserstein::{dual_lower_bound, w1_1d, w1_discrete, SolverOptions};
use rectiflow::{Rational, Result, WeightGrid};

type Outcome = Result<(bool, String)>;
type Criterion = (u32, &'static str, fn() -> Outcome);

fn secs(d: Duration) -> f64 {
    d.as_secs_f64()
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        (1, "spike exactness", spike_exactness),
        (2, "partition of unity", partition_of_unity),
        (3, "approximation error", approximation_error),
        (4, "lipschitz control", lipschitz_control),
        (5, "simplex quantization", simplex_quantization),
        (6, "transport cell masses", transport_cell_masses),
        (7, "transport W1", transport_w1),
        (8, "sigma certificate", sigma_certificate),
        (9, "end-to-end rectifiable", end_to_end),
        (10, "bit-count scaling", bit_count_scaling),
        (11, "OT solver integrity", solver_integrity),
        (12, "closed-form calculators", closed_form),
    ];
    let mut failed = 0;
    for (n, name, run) in criteria {
        let (pass, details) = match catch_unwind(AssertUnwindSafe(run)) {
            Ok(Ok(r)) => r,
            Ok(Err(e)) => (false, format!("error: {e}")),
            Err(_) => (false, "panicked".to_string()),
        };
        if !pass {
            failed += 1;
        }
        println!(
            "ACCEPTANCE {n} {name}: {} ({details})",
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}

fn cube_point(rng: &mut ChaCha8Rng, m: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..m).map(|_| rng.gen_range(lo..=hi)).collect()
}

fn spike_exactness() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(1);
    let mut worst = 0.0f64;
    let mut bad = Vec::new();
    for m in 1..=8 {
        let spike = spike_network(m)?;
        let net = spike.net.to_f64();
        for _ in 0..10_000 {
            let x = cube_point(&mut rng, m, -2.0, 2.0);
            worst = worst.max((net.evaluate(&x)?[0] - spike_value(&x)).abs());
        }
        let metrics = spike.net.metrics();
        let (l, c, w) = spike_bounds(m);
        let grid = WeightGrid::F { n: 1 };
        let checks = [
            Check::le("depth", metrics.depth as f64, l as f64),
            Check::le("connectivity", metrics.connectivity as f64, c as f64),
            Check::le("width", metrics.width as f64, w as f64),
            Check::eq(
                "weights outside {0,±1}",
                grid.violations(&metrics.weight_set).len() as f64,
                0.0,
            ),
        ];
        bad.extend(failures(&checks).into_iter().map(|f| format!("m={m}: {f}")));
    }
    let elapsed = start.elapsed();
    let pass = worst <= 1e-12 && bad.is_empty() && elapsed < Duration::from_secs(10);
    Ok((
        pass,
        format!("max err {worst:.2e}, metric failures {bad:?}, {:.2}s", secs(elapsed)),
    ))
}

fn partition_of_unity() -> Outcome {
    let mut rng = rng_from_seed(2);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let m = rng.gen_range(1..=4);
        let n = rng.gen_range(1..=8);
        let x = cube_point(&mut rng, m, -1.0, 2.0);
        worst = worst.max((partition_sum(&x, n) - 1.0).abs());
    }
    Ok((worst <= 1e-12, format!("max deviation {worst:.2e} over 10000 pairs")))
}

fn benchmarks() -> Vec<(&'static str, LipschitzFunction)> {
    use std::f64::consts::PI;
    vec![
        (
            "sine",
            LipschitzFunction::new(1, 0.5, 0.5 / (2.0 * PI), |x| 0.5 * (2.0 * PI * x[0]).sin() / (2.0 * PI)),
        ),
        (
            "tent",
            LipschitzFunction::new(1, 0.5, 0.25, |x| 0.5 * (x[0] - 0.5).abs()),
        ),
        (
            "parabola",
            LipschitzFunction::new(1, 0.3, 0.075, |x| 0.3 * x[0] * (1.0 - x[0])),
        ),
        ("max", LipschitzFunction::new(2, 0.25, 0.25, |x| 0.25 * x[0].max(x[1]))),
        (
            "wave",
            LipschitzFunction::new(2, 0.3, 0.3, |x| 0.3 * (3.0 * x[0]).sin() * (2.0 * x[1]).cos() / 3.0),
        ),
    ]
}

const RESOLUTIONS: [u64; 4] = [2, 4, 8, 16];

fn approximation_error() -> Outcome {
    let start = Instant::now();
    let mut worst_ratio = 0.0f64;
    let mut bad = Vec::new();
    for (name, f) in benchmarks() {
        for n in RESOLUTIONS {
            let approx = build_quantized_function(&f, n)?;
            let cells = if f.dim == 1 { 2048 } else { 128 };
            let err = sup_grid_error(&approx, |x| f.eval(x), cells);
            let bound = (f.lip + 0.5) / n as f64;
            worst_ratio = worst_ratio.max(err / bound);
            if err > bound + 1e-9 {
                bad.push(format!("{name} N={n}: {err} > {bound}"));
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = bad.is_empty() && elapsed < Duration::from_secs(30);
    Ok((
        pass,
        format!(
            "worst err/bound {worst_ratio:.3}, violations {bad:?}, {:.2}s",
            secs(elapsed)
        ),
    ))
}

fn lipschitz_control() -> Outcome {
    let mut bad = Vec::new();
    let mut worst = 0.0f64;
    for (name, f) in benchmarks() {
        for n in RESOLUTIONS {
            let approx = build_quantized_function(&f, n)?;
            let m = f.dim;
            let (lo, hi) = (vec![0.0; m], vec![1.0; m]);
            let (lip, bound) = if m == 1 {
                (
                    estimate_lipschitz(&approx.net, &lo, &hi, LipschitzMode::Exact1D)?,
                    f.lip + 1.0,
                )
            } else {
                let mode = LipschitzMode::Sampled {
                    resolution: 96,
                    norm: InputNorm::Sup,
                };
                (
                    estimate_lipschitz(&approx.net, &lo, &hi, mode)?,
                    m as f64 * (f.lip + 1.0),
                )
            };
            worst = worst.max(lip / bound);
            if lip > bound + 1e-9 {
                bad.push(format!("{name} N={n}: {lip} > {bound}"));
            }
        }
    }
    Ok((
        bad.is_empty(),
        format!("worst lip/bound {worst:.3}, violations {bad:?}"),
    ))
}

fn simplex_quantization() -> Outcome {
    let mut rng = rng_from_seed(5);
    let mut violations = 0;
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.gen_range(1..=64usize);
        let counts: Vec<i64> = (0..n).map(|_| rng.gen_range(0..1000)).collect();
        let total: i64 = counts.iter().sum::<i64>().max(1);
        let mut w: Vec<Rational> = counts.iter().map(|c| ratio(*c, total)).collect();
        if counts.iter().all(|c| *c == 0) {
            w[0] = int(1);
        }
        let n_res = n as u64 + rng.gen_range(0..=500u64);
        let q = quantize_simplex_exact(&w, n_res)?;
        let nn = int(n_res as i64);
        let on_grid = q.iter().all(|x| (x * &nn).is_integer() && !x.is_negative());
        let sums_to_one = q.iter().cloned().sum::<Rational>() == Rational::one();
        let l1: Rational = q.iter().zip(&w).map(|(a, b)| (a - b).abs()).sum();
        let bound = ratio(4 * (n as i64 - 1), n_res as i64);
        worst = worst.max(rectiflow::scalar::rational_to_f64(&l1) * n_res as f64 / (4.0 * (n as f64 - 1.0)).max(1.0));
        if !(on_grid && sums_to_one && l1 <= bound) {
            violations += 1;
        }
    }
    Ok((
        violations == 0,
        format!("{violations} violations in 1000 simplexes, worst L1·N/(4(n-1)) {worst:.3}"),
    ))
}

fn random_mixture(rng: &mut ChaCha8Rng, d: usize, k: usize) -> Result<UniformMixture> {
    let cells = k.pow(d as u32);
    let counts: Vec<i64> = (0..cells).map(|_| rng.gen_range(1..=9)).collect();
    let n: i64 = counts.iter().sum();
    let w = counts.iter().map(|c| ratio(*c, n)).collect();
    UniformMixture::new(d, k, w)?.with_resolution(n as u64)
}

/// `w_parent / 2^{d(s−1)}` for every refined cell in lexicographic order.
fn refined_expectation(mix: &UniformMixture, s: u32) -> Vec<Rational> {
    let (d, k) = (mix.d(), mix.k());
    let r = 1usize << (s - 1);
    let side = k * r;
    let split = int(1i64 << (d as u32 * (s - 1)));
    (0..side.pow(d as u32))
        .map(|mut idx| {
            let mut parent = vec![0; d];
            for c in (0..d).rev() {
                parent[c] = idx % side / r + 1;
                idx /= side;
            }
            mix.weight(&parent) / &split
        })
        .collect()
}

fn transport_cell_masses() -> Outcome {
    let start = Instant::now();
    let mut rng = rng_from_seed(6);
    let (mut runs, mut bad) = (0, Vec::new());
    for d in 1..=2 {
        for k in 2..=4 {
            for s in 1..=3u32 {
                for trial in 0..50 {
                    let mix = random_mixture(&mut rng, d, k)?;
                    let tnet = build_transport_network(&mix, s)?;
                    let report = cell_mass_check(&tnet, CellMassMethod::Exact)?;
                    let expect = refined_expectation(&mix, s);
                    let exact = report.rows.len() == expect.len()
                        && report
                            .rows
                            .iter()
                            .zip(&expect)
                            .all(|(r, e)| r.measured_exact.as_ref() == Some(e));
                    if !exact || !report.passed {
                        bad.push(format!("d={d} K={k} s={s} trial {trial}"));
                    }
                    runs += 1;
                }
            }
        }
    }
    let elapsed = start.elapsed();
    let pass = bad.is_empty() && elapsed < Duration::from_secs(60);
    Ok((
        pass,
        format!("{runs} mixtures, mismatches {bad:?}, {:.2}s", secs(elapsed)),
    ))
}

fn transport_w1() -> Outcome {
    let mut rng = rng_from_seed(7);
    let opts = SolverOptions { max_atoms: 10_000 };
    let mut rows = Vec::new();
    let mut pass = true;
    for (d, k, s, ppc) in [(1, 3, 2, 2000), (2, 2, 2, 64)] {
        let mix = random_mixture(&mut rng, d, k)?;
        let tnet = build_transport_network(&mix, s)?;
        let cert = w1_certificate(&tnet, 10_000, ppc, opts)?;
        let ok = cert.holds && cert.curve_atoms == 10_000 && cert.slack < 0.25 * cert.bound;
        pass &= ok;
        rows.push(format!(
            "d={d} K={k} s={s}: W1 {:.4} <= {:.4} + slack {:.2e} ({:.1}% of bound)",
            cert.measured,
            cert.bound,
            cert.slack,
            100.0 * cert.slack / cert.bound
        ));
    }
    Ok((pass, rows.join("; ")))
}

fn sigma_certificate() -> Outcome {
    let mut rng = rng_from_seed(8);
    let opts = SolverOptions::default();
    let (mut runs, mut worst, mut bad) = (0, 0.0f64, Vec::new());
    for d in 1..=2usize {
        for k in 2..=5usize {
            for trial in 0..10 {
                let atoms = rng.gen_range(20..=200);
                let points: Vec<Vec<f64>> = (0..atoms).map(|_| cube_point(&mut rng, d, 0.0, 1.0)).collect();
                let masses: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.1..1.0)).collect();
                let total: f64 = masses.iter().sum();
                let mu = DiscreteMeasure::new(points, masses.iter().map(|m| m / total).collect())?;
                let sigma = build_sigma(&mu, k)?;
                let cert = sigma.w1_certificate(&mu, 2000, opts)?;
                let checks = sigma.checks()?;
                worst = worst.max(cert.measured / cert.bound);
                if !cert.holds || !all_hold(&checks) {
                    bad.push(format!(
                        "d={d} K={k} trial {trial}: W1 {} {:?}",
                        cert.measured,
                        failures(&checks)
                    ));
                }
                runs += 1;
            }
        }
    }
    Ok((
        bad.is_empty(),
        format!("{runs} measures, worst W1/(3/K) {worst:.3}, failures {bad:?}"),
    ))
}

fn end_to_end() -> Outcome {
    let start = Instant::now();
    let arc = quarter_circle(3200)?;
    let mu = midpoint_measure(1920)?;
    let target = quarter_circle_target(2000)?;
    let mut rows = Vec::new();
    let mut measured = Vec::new();
    let mut pass = true;
    for n in [4u64, 8, 16, 32] {
        let mut pipe = build_pipeline(&arc, &mu, n)?;
        pipe.certify_w1(&target.measure, target.slack, 2000, SolverOptions::default())?;
        let c = &pipe.certificate;
        let w = c.measured_w1.unwrap_or(f64::INFINITY);
        pass &= c.holds;
        if !c.holds {
            rows.push(format!("N={n} failed {:?}", failures(&c.checks)));
        }
        rows.push(format!("N={n}: {w:.4} <= {:.4}", c.claimed_w1));
        measured.push(w);
    }
    let monotone = measured.windows(2).all(|p| p[1] <= p[0]);
    let elapsed = start.elapsed();
    pass &= monotone && elapsed < Duration::from_secs(300);
    Ok((
        pass,
        format!("{}, non-increasing {monotone}, {:.1}s", rows.join("; "), secs(elapsed)),
    ))
}

fn bit_count_scaling() -> Outcome {
    let grid = log_grid(1e-3, 1e-1, 41)?;
    let c = class_constant(1, std::f64::consts::FRAC_PI_2, 1.0, 1.0);
    let slope = |bits: Vec<f64>| scaling_exponent(&grid, &bits);
    let mut pass = true;
    let mut rows = Vec::new();
    for m in 1..=3u32 {
        let b = grid
            .iter()
            .map(|&e| bit_count(m, 2, c, e))
            .collect::<Result<Vec<_>>>()?;
        let s = slope(b)?;
        pass &= (s - m as f64).abs() <= 0.15;
        rows.push(format!("m={m}: {s:.3}"));
        for k in 1..=3u32 {
            let kappa = Kappa::Polynomial(k);
            let b = grid
                .iter()
                .map(|&e| bit_count_countable(m, 2, c, |x| kappa.eval(x), e))
                .collect::<Result<Vec<_>>>()?;
            let s = slope(b)?;
            pass &= (s - kappa.nominal_exponent(m)).abs() <= 0.2;
            rows.push(format!("m={m} poly k={k}: {s:.3} vs {}", kappa.nominal_exponent(m)));
        }
        let b = grid
            .iter()
            .map(|&e| bit_count_countable(m, 2, c, |x| Kappa::Exponential.eval(x), e))
            .collect::<Result<Vec<_>>>()?;
        rows.push(format!("m={m} exp (info only): {:.3}", slope(b)?));
    }
    Ok((pass, rows.join("; ")))
}

fn solver_integrity() -> Outcome {
    let mut rng = rng_from_seed(11);
    let (mut worst_gap, mut dual_violations) = (0.0f64, 0);
    for _ in 0..500 {
        let measure = |rng: &mut ChaCha8Rng| {
            let atoms = rng.gen_range(1..=40);
            let points: Vec<Vec<f64>> = (0..atoms).map(|_| vec![rng.gen_range(-1.0..1.0)]).collect();
            let masses: Vec<f64> = (0..atoms).map(|_| rng.gen_range(0.01..1.0)).collect();
            let total: f64 = masses.iter().sum();
            DiscreteMeasure::new(points, masses.iter().map(|m| m / total).collect())
        };
        let mu = measure(&mut rng)?;
        let nu = measure(&mut rng)?;
        let (primal, _) = w1_discrete(&mu, &nu)?;
        worst_gap = worst_gap.max((primal - w1_1d(&mu, &nu)?).abs());
        let c: f64 = rng.gen_range(-1.0..1.0);
        let id = |x: &[f64]| x[0];
        let neg = |x: &[f64]| -x[0];
        let cone = move |x: &[f64]| (x[0] - c).abs();
        let lb = dual_lower_bound(&mu, &nu, &[&id, &neg, &cone])?;
        if lb > primal + 1e-12 {
            dual_violations += 1;
        }
    }
    let pass = worst_gap <= 1e-9 && dual_violations == 0;
    Ok((
        pass,
        format!("max |simplex - closed form| {worst_gap:.2e}, dual violations {dual_violations}"),
    ))
}

fn binomial(n: u64, r: u64) -> BigUint {
    (0..r).fold(BigUint::one(), |acc, i| acc * (n - i) / (i + 1))
}

/// `log₂` of a big integer to within `2⁻⁵⁰` relative precision.
fn log2_big(x: &BigUint) -> f64 {
    let bits = x.bits();
    let shift = bits.saturating_sub(64);
    let top: BigUint = x >> shift;
    let lead = top.to_u64_digits().first().copied().unwrap_or(0) as f64;
    lead.log2() + shift as f64
}

fn closed_form() -> Outcome {
    let mut bad = Vec::new();
    // codebook count (2N²+1)^{(N+1)^m} by exact enumeration of its size
    for m in 1..=2u32 {
        for n in [2u64, 4, 8] {
            let exact = BigUint::from(2 * n * n + 1).pow((n + 1).pow(m) as u32);
            let got = rectiflow::lipschitz_approx::codebook_log2_count(m, n);
            if (got - log2_big(&exact)).abs() > 1e-9 * got {
                bad.push(format!("codebook m={m} N={n}: {got} vs {}", log2_big(&exact)));
            }
        }
    }
    // Σ candidate count binom(N−1, K^d−1) and its bound
    for d in 1..=2usize {
        for k in 2..=5usize {
            let n = 4 * (k as u64).pow(d as u32 + 1);
            let cells = (k as u64).pow(d as u32);
            let exact = log2_big(&binomial(n - 1, cells - 1));
            let got = sigma_log2_count(d, k);
            if (got - exact).abs() > 1e-6 * exact.max(1.0) || got > sigma_log2_count_bound(d, k) {
                bad.push(format!("sigma d={d} K={k}: {got} vs {exact}"));
            }
        }
    }
    // bit counts: ε^m b(ε)/log₂(1/ε) stays bounded as ε → 0
    for m in 1..=3u32 {
        let ratios: Vec<f64> = (1..=8)
            .map(|p| {
                let e = 10f64.powi(-p);
                bit_count(m, 2, 5.0, e).map(|b| b * e.powi(m as i32) / (1.0 / e).log2())
            })
            .collect::<Result<_>>()?;
        let (lo, hi) = ratios
            .iter()
            .fold((f64::MAX, 0.0f64), |(a, b), r| (a.min(*r), b.max(*r)));
        if hi / lo > 4.0 {
            bad.push(format!("bit count m={m}: normalized range {lo}..{hi}"));
        }
    }
    // covering bound decreases in ε and grows with d
    for d in 1..=3u32 {
        let a = metric_entropy_bound(d, 0.1)?;
        let b = metric_entropy_bound(d, 0.05)?;
        let c = metric_entropy_bound(d + 1, 0.1)?;
        if !(b > a && c > a) {
            bad.push(format!("entropy d={d}"));
        }
    }
    Ok((bad.is_empty(), format!("mismatches {bad:?}")))
}
