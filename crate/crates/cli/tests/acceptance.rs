//! Acceptance run: one PASS/FAIL line per criterion part.
//!
//! Exits non-zero if any part fails that is not in `KNOWN_FAILURES`, or if
//! a known failure starts passing (so the list cannot go stale silently).

use std::process::Command;
use std::time::Instant;

use nctransport::calculus::{fdq_adjoint, TensorPoly};
use nctransport::onevar::{moment_recursion, pushforward_moments, solve_1d, OneVarSeries};
use nctransport::rmt::{quartic, transport_compare, ChainConfig, CompareReport};
use nctransport::solver::{loglog_slope, q_m, q_series, solve_transport, SolverConfig};
use nctransport::verify::{entropy_shift, lemma_suite, sd_report};
use nctransport::{FloatPoly, NCPoly, Signature, TraceCache, Word};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Parts that fail for reasons recorded in the decisions ledger.
const KNOWN_FAILURES: &[&str] = &["5c"];

struct Outcome {
    id: &'static str,
    pass: bool,
    detail: String,
}

struct Run {
    lines: Vec<Outcome>,
}

impl Run {
    fn record(&mut self, id: &'static str, pass: bool, detail: String) {
        let known = KNOWN_FAILURES.contains(&id);
        let tag = match (pass, known) {
            (true, false) => "PASS",
            (false, false) => "FAIL",
            (false, true) => "FAIL (known)",
            (true, true) => "PASS (was known failure)",
        };
        println!("[{tag}] {id:<3} {detail}");
        self.lines.push(Outcome { id, pass, detail });
    }
}

fn criterion_1_and_2(run: &mut Run) {
    let t = Instant::now();
    let report = lemma_suite(20240601, 2, 4, 50).expect("suite runs");
    let (pairing, identities): (Vec<_>, Vec<_>) = report.checks.iter().partition(|c| c.name == "adjoint pairing");
    let failures: usize = identities.iter().map(|c| c.failures).sum();
    let min_cases = identities.iter().map(|c| c.cases).min().unwrap_or(0);
    run.record(
        "1",
        failures == 0 && min_cases >= 50 && identities.len() == 9,
        format!(
            "exact identity suite: {} identities, ≥ {min_cases} inputs each, {failures} failures ({:.1?})",
            identities.len(),
            t.elapsed()
        ),
    );

    let cache = TraceCache::global();
    let sig = Signature::new(2, 18).unwrap();
    let unit_ok = (0..2).all(|j| {
        let lhs = fdq_adjoint(cache, &TensorPoly::<nctransport::Rational>::one(sig), j).unwrap();
        lhs == NCPoly::var(sig, j).unwrap()
    });
    let p = pairing[0];
    run.record(
        "2",
        p.failures == 0 && unit_ok,
        format!(
            "adjoint pairing exact on {} (monomial, elementary tensor) pairs, {} failures; ∂*_j(1⊗1) = X_j: {unit_ok}",
            p.cases, p.failures
        ),
    );
}

fn random_g(rng: &mut ChaCha8Rng, a: f64, target: f64) -> FloatPoly {
    let sig = Signature::new(2, 8).unwrap();
    let count = rng.random_range(1..=6);
    let terms: Vec<(Word, f64)> = (0..count)
        .map(|_| {
            let len = rng.random_range(2..=5);
            let letters: Vec<u8> = (0..len).map(|_| rng.random_range(0..2)).collect();
            (Word::from_letters(&letters), rng.random_range(-1.0..1.0))
        })
        .collect();
    let g = NCPoly::from_terms(sig, terms).unwrap();
    let n = g.norm_a(a);
    if n == 0.0 {
        g
    } else {
        g.scale(&(target / n))
    }
}

fn criterion_3(run: &mut Run) {
    let t = Instant::now();
    let cfg = SolverConfig::default();
    let a = cfg.a;
    let cache = TraceCache::global();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut violations = 0;
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        // radius r = 2‖g‖/A² spread over (0, 0.9)
        let r = rng.random_range(0.001..0.9);
        let g = random_g(&mut rng, a, r * a * a / 2.0);
        let norm = g.norm_a(a);
        for m in 1..=4 {
            let (q, _) = q_m(cache, &g, m).unwrap();
            let bound = 2.0 * (2.0 / (a * a)).powi(m as i32) * norm.powi(m as i32);
            worst = worst.max(q.norm_a(a) / bound);
            violations += (q.norm_a(a) > bound * (1.0 + 1e-12)) as usize;
        }
        let q = q_series(cache, &g, &cfg).unwrap();
        let rr = 2.0 * norm / (a * a);
        let bound = rr * rr / (1.0 - rr);
        worst = worst.max(q.value.norm_a(a) / bound);
        violations += (q.value.norm_a(a) > bound * (1.0 + 1e-12)) as usize;
    }
    run.record(
        "3",
        violations == 0,
        format!(
            "norm bounds on 100 random g (Q_1..Q_4 and the full series): {violations} violations, worst ratio to bound {worst:.3} ({:.1?})",
            t.elapsed()
        ),
    );
}

const BETA: f64 = 5e-5;

fn criterion_4_5_8(run: &mut Run) {
    let t = Instant::now();
    let cfg = SolverConfig::default();
    let cache = TraceCache::global();

    let zero = FloatPoly::zero(Signature::new(2, cfg.dmax).unwrap());
    let z = solve_transport(&zero, &cfg).unwrap();
    let zero_ok = z.g.is_zero() && z.iterations == 1;

    let w = quartic(2, cfg.dmax, BETA).unwrap();
    let res = solve_transport(&w, &cfg).unwrap();
    let converged = res.final_delta < cfg.tol_fix && res.iterations < cfg.max_iter;
    let pass = zero_ok
        && res.conditions.passed
        && converged
        && res.contraction_ratio_estimate < 7.0 / 8.0 + 0.05
        && res.norm_g_a <= 3.0 * res.norm_w_a
        && res.hessian_pnorm < 1.0;
    run.record(
        "4",
        pass,
        format!(
            "solver: W=0 → g=0 in {} step; β=5e-5 conditions {}, {} iterations, ratio {:.3}, ‖g‖ {:.3e} ≤ 3‖W‖ {:.3e}, pnorm 𝒥𝒟g {:.3e} ({:.1?})",
            z.iterations,
            res.conditions.passed,
            res.iterations,
            res.contraction_ratio_estimate,
            res.norm_g_a,
            3.0 * res.norm_w_a,
            res.hessian_pnorm,
            t.elapsed()
        ),
    );

    let t = Instant::now();
    let sd = sd_report(cache, &res.y, &w, 3, cfg.dmax).unwrap();
    let allowance = 50.0 * BETA * BETA + res.truncation_loss_total;
    run.record(
        "5a",
        sd.max_residual <= allowance,
        format!(
            "SD residual at β=5e-5: {:.3e} ≤ 50β² + loss = {:.3e} ({:.1?})",
            sd.max_residual,
            allowance,
            t.elapsed()
        ),
    );

    let t = Instant::now();
    let cfg10 = SolverConfig { dmax: 10, ..cfg.clone() };
    let w10 = quartic(2, 10, BETA).unwrap();
    let res10 = solve_transport(&w10, &cfg10).unwrap();
    let sd10 = sd_report(cache, &res10.y, &w10, 3, 10).unwrap();
    run.record(
        "5b",
        sd10.max_residual < sd.max_residual,
        format!(
            "dmax 8 → 10: residual {:.3e} → {:.3e} ({:.1?})",
            sd.max_residual,
            sd10.max_residual,
            t.elapsed()
        ),
    );

    let t = Instant::now();
    let betas = [1e-5, 2e-5, 5e-5, 1e-4];
    // β = 1e-4 fails the contractivity conditions and runs uncertified.
    let sweep_cfg = SolverConfig { override_conditions: true, ..cfg.clone() };
    let mut at_dmax = Vec::new();
    let mut exact_eval = Vec::new();
    for &b in &betas {
        let wb = quartic(2, cfg.dmax, b).unwrap();
        let r = solve_transport(&wb, &sweep_cfg).unwrap();
        at_dmax.push(sd_report(cache, &r.y, &wb, 3, cfg.dmax).unwrap().max_residual);
        exact_eval.push(sd_report(cache, &r.y, &wb, 3, 24).unwrap().max_residual);
    }
    let slope = loglog_slope(&betas, &at_dmax);
    let slope_exact = loglog_slope(&betas, &exact_eval);
    run.record(
        "5c",
        (slope - 2.0).abs() <= 0.2,
        format!(
            "log-log slope of the SD residual over β ∈ {{1e-5, 2e-5, 5e-5, 1e-4}}: {slope:.2} (exact evaluation {slope_exact:.2}), window 2 ± 0.2 ({:.1?})",
            t.elapsed()
        ),
    );

    let t = Instant::now();
    let e = entropy_shift(cache, &res.g, &cfg).unwrap();
    let e0 = entropy_shift(cache, &z.g, &cfg).unwrap();
    let gap = (e.value - e.value_via_q).abs();
    run.record(
        "8",
        gap <= 1e-10 && e0.value == 0.0 && e0.value_via_q == 0.0,
        format!(
            "entropy shift: routes {:.6e} and {:.6e} differ by {gap:.1e}; β=0 value {} ({:.1?})",
            e.value,
            e.value_via_q,
            e0.value,
            t.elapsed()
        ),
    );
}

fn criterion_6(run: &mut Run) {
    let t = Instant::now();
    // dmax 14: at 8 the β = 1e-3 moments carry ~3e-6 of truncation error.
    let cfg = SolverConfig {
        override_conditions: true,
        dmax: 14,
        ..SolverConfig::default()
    };
    let unit = OneVarSeries::monomial(4, 1.0, cfg.a);
    let mut moment_gap: f64 = 0.0;
    let mut coeff_gap: f64 = 0.0;
    for beta in [1e-4, 1e-3] {
        let w = OneVarSeries::monomial(4, beta, cfg.a);
        let sol = solve_1d(&w, &cfg).unwrap();
        let oracle = moment_recursion(beta, &unit, 8, 8).unwrap();
        let pushed = pushforward_moments(&sol.transport, 8);
        for k in 0..=8 {
            moment_gap = moment_gap.max((pushed[k] - oracle.moments[k]).abs());
        }
        let multi = solve_transport(&w.to_ncpoly(cfg.dmax).unwrap(), &cfg).unwrap();
        let other = OneVarSeries::from_ncpoly(&multi.ghat, cfg.a);
        for k in 0..=cfg.dmax {
            coeff_gap = coeff_gap.max((other.coeff(k) - sol.ghat.coeff(k)).abs());
        }
    }
    run.record(
        "6",
        moment_gap <= 1e-8 && coeff_gap <= 1e-10,
        format!(
            "one variable, β ∈ {{1e-4, 1e-3}}: moments k ≤ 8 vs oracle {moment_gap:.1e} (≤ 1e-8), n=1 engine vs 1-d coefficients {coeff_gap:.1e} (≤ 1e-10) ({:.1?})",
            t.elapsed()
        ),
    );
}

fn criterion_7(run: &mut Run) {
    let t = Instant::now();
    // A = 5 puts 2‖ĝ‖_A/A² past 1 at β = 1e-2; just above 4 it converges.
    let cfg = SolverConfig {
        a: 4.1,
        a_prime: 4.05,
        override_conditions: true,
        ..SolverConfig::default()
    };
    let w = quartic(1, cfg.dmax, 1e-2).unwrap();
    let chain = ChainConfig {
        step_size: 0.05,
        steps: 2000,
        burn_in: 500,
        thin: 5,
        seed: 1,
    };
    let r = transport_compare(&w, &cfg, 64, 400, &chain, 8).unwrap();
    let mut worst_t: f64 = 0.0;
    let mut worst_m: f64 = 0.0;
    let mut ok = true;
    for s in &r.words {
        let o = s.oracle.expect("oracle at n = 1");
        let dt = (s.transport_mean - o).abs();
        let dm = (s.mala_mean - o).abs();
        ok &= dt <= 3.0 * s.transport_se + 0.02 && dm <= 3.0 * s.mala_se + 0.02;
        worst_t = worst_t.max(dt);
        worst_m = worst_m.max(dm);
    }
    let kept = r.draws - r.transport_rejected;
    ok &= kept >= 200 && r.mala_min_ess >= 200.0;
    run.record(
        "7a",
        ok,
        format!(
            "n=1 β=1e-2 N=64: |transport − oracle| ≤ {worst_t:.2e}, |MALA − oracle| ≤ {worst_m:.2e}; {kept} draws, MALA ESS ≥ {:.0}, acceptance {} ({:.1?})",
            r.mala_min_ess,
            acceptance_range(&r),
            t.elapsed()
        ),
    );

    let t = Instant::now();
    let cfg = SolverConfig::default();
    let w = quartic(2, cfg.dmax, BETA).unwrap();
    let chain = ChainConfig {
        step_size: 0.05,
        steps: 1500,
        burn_in: 500,
        thin: 5,
        seed: 1,
    };
    let r = transport_compare(&w, &cfg, 48, 300, &chain, 4).unwrap();
    let worst_z = r.words.iter().map(|s| s.z).fold(0.0, f64::max);
    let kept = r.draws - r.transport_rejected;
    run.record(
        "7b",
        worst_z <= 3.0 && kept >= 200 && r.mala_min_ess >= 200.0,
        format!(
            "n=2 β=5e-5 N=48: {} words, max |z| = {worst_z:.2}; {kept} draws, MALA ESS ≥ {:.0}, acceptance {} ({:.1?})",
            r.words.len(),
            r.mala_min_ess,
            acceptance_range(&r),
            t.elapsed()
        ),
    );
}

fn acceptance_range(r: &CompareReport) -> String {
    let lo = r.mala_acceptance.iter().copied().fold(1.0, f64::min);
    let hi = r.mala_acceptance.iter().copied().fold(0.0, f64::max);
    format!("{lo:.2}..{hi:.2}")
}

fn run_bin(args: &[&str], threads: &str) -> Vec<u8> {
    let o = Command::new(env!("CARGO_BIN_EXE_nctransport"))
        .args(args)
        .env("RAYON_NUM_THREADS", threads)
        .output()
        .expect("binary runs");
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    o.stdout
}

fn criterion_9(run: &mut Run) {
    let t = Instant::now();
    let config = concat!(env!("CARGO_MANIFEST_DIR"), "/../../configs/quartic.toml");
    let self_a = run_bin(&["--command", "selftest", "--seed", "11"], "1");
    let self_b = run_bin(&["--command", "selftest", "--seed", "11"], "1");
    let self_c = run_bin(&["--command", "selftest", "--seed", "11"], "4");
    let solve_a = run_bin(&["--config", config, "--command", "solve"], "1");
    let solve_b = run_bin(&["--config", config, "--command", "solve"], "1");
    let solve_c = run_bin(&["--config", config, "--command", "solve"], "4");
    let selftest_same = self_a == self_b && self_a == self_c;
    let solve_same = solve_a == solve_b && solve_a == solve_c;
    run.record(
        "9",
        selftest_same && solve_same,
        format!(
            "reruns byte-identical: selftest {selftest_same} ({} bytes), solve {solve_same} ({} bytes), 1 and 4 threads ({:.1?})",
            self_a.len(),
            solve_a.len(),
            t.elapsed()
        ),
    );
}

fn main() {
    let start = Instant::now();
    let mut run = Run { lines: Vec::new() };
    criterion_1_and_2(&mut run);
    criterion_3(&mut run);
    criterion_4_5_8(&mut run);
    criterion_6(&mut run);
    criterion_7(&mut run);
    criterion_9(&mut run);

    let unexpected: Vec<&Outcome> = run
        .lines
        .iter()
        .filter(|o| o.pass == KNOWN_FAILURES.contains(&o.id))
        .collect();
    let passed = run.lines.iter().filter(|o| o.pass).count();
    println!(
        "acceptance: {passed}/{} parts pass, {} known failure(s), total {:.1?}",
        run.lines.len(),
        KNOWN_FAILURES.len(),
        start.elapsed()
    );
    if !unexpected.is_empty() {
        for o in unexpected {
            println!("unexpected result for {}: {}", o.id, o.detail);
        }
        std::process::exit(1);
    }
}
