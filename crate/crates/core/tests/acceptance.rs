//! Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on failure.
//! Scenario: 1D, m = 257, box half-width 8, p = 4, dt = 1e-2 unless noted.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::Instant;

use rand::Rng;
use wplap::attractor::*;
use wplap::bounds::*;
use wplap::config::{Experiment, RunConfig};
use wplap::experiment::{self, MANIFEST};
use wplap::forcing::*;
use wplap::grid::*;
use wplap::operators::*;
use wplap::sample::{self, SampleRng};
use wplap::stepper::*;
use wplap::weights::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn grid() -> Grid {
    make_grid(1, 8.0, 257).unwrap()
}

fn theory() -> TheoryParams {
    TheoryParams::new(4.0, 5).unwrap()
}

fn energy_at(g: &Grid, eps: f64) -> Energy {
    Energy::new(
        make_weight(g, &WeightFamily::default(), eps).unwrap(),
        theory(),
    )
}

fn c_embed(g: &Grid) -> f64 {
    embedding_constant(
        &make_weight(g, &WeightFamily::default(), 0.0).unwrap(),
        &theory(),
    )
    .unwrap()
}

/// Smooth, rough, or a displaced bump, with amplitudes spread over decades.
fn random_state(g: &Grid, rng: &mut SampleRng, k: usize) -> State {
    let amp = 10f64.powf(rng.random_range(-2.0..1.5));
    match k % 3 {
        0 => sample::random_direction(g, rng, sample::DEFAULT_MODES).scaled(amp),
        1 => sample::random_rough(g, rng, amp),
        _ => {
            let c = rng.random_range(-7.0..7.0);
            let w = rng.random_range(0.2..2.0);
            State::from_fn(g, |x| amp * (-(x[0] - c).powi(2) / (2.0 * w * w)).exp())
        }
    }
}

fn unforced(g: &Grid) -> Forcing {
    let spec = ForcingSpec {
        l1: L1Profile::Constant { b0: 0.0 },
        coupling: Coupling::None,
        ..ForcingSpec::default()
    };
    Forcing::new(g, spec).unwrap()
}

fn c1_embedding() -> Outcome {
    let g = grid();
    let c = c_embed(&g);
    let mut rng = sample::rng(101);
    let states: Vec<State> = (0..1000).map(|k| random_state(&g, &mut rng, k)).collect();
    let (mut violations, mut worst) = (0, 0.0f64);
    for eps in [0.0, 0.1, 0.5] {
        let w = make_weight(&g, &WeightFamily::default(), eps).unwrap();
        for u in &states {
            let lhs = norm_l2(u).powi(2);
            let rhs = c * norm_e(u, &w, 4.0).unwrap().powi(2);
            worst = worst.max(lhs / rhs);
            if lhs > rhs * (1.0 + 1e-12) {
                violations += 1;
            }
        }
    }
    outcome(
        violations == 0,
        format!("c_embed = {c:.6}, 3000 checks, {violations} violations, max ‖u‖²/(c‖u‖_E²) = {worst:.4}"),
    )
}

fn c2_tail() -> Outcome {
    let g = grid();
    let tp = theory();
    let mut rng = sample::rng(202);
    let states: Vec<State> = (0..200).map(|k| random_state(&g, &mut rng, k)).collect();
    let (mut violations, mut checks, mut worst) = (0, 0, 0.0f64);
    for eps in [0.0, 0.1, 0.5] {
        let w = make_weight(&g, &WeightFamily::default(), eps).unwrap();
        for r in [2.0, 4.0, 6.0] {
            let factor = tail_mass(&w, &tp, r).unwrap().powf(1.0 / tp.theta_conj);
            for u in &states {
                let lhs = norm_l2_sq_outside(u, r);
                let rhs = factor * norm_e(u, &w, 4.0).unwrap().powi(2);
                checks += 1;
                worst = worst.max(lhs / rhs);
                if lhs > rhs * (1.0 + 1e-12) {
                    violations += 1;
                }
            }
        }
    }
    outcome(
        violations == 0,
        format!("{checks} checks (R ∈ {{2,4,6}}, ε ∈ {{0,0.1,0.5}}), {violations} violations, max ratio {worst:.4}"),
    )
}

fn c3_monotone_tartar() -> Outcome {
    let g = grid();
    let e = energy_at(&g, 0.1);
    let mut rng = sample::rng(303);
    let mut mono_viol = 0;
    let mut min_rel = f64::INFINITY;
    for k in 0..1000 {
        let u = random_state(&g, &mut rng, k);
        let v = random_state(&g, &mut rng, k + 1);
        let gap = monotonicity_gap(&e, &u, &v).unwrap();
        let scale = inner_l2(&apply_a(&e, &u).unwrap(), &u).unwrap()
            + inner_l2(&apply_a(&e, &v).unwrap(), &v).unwrap();
        min_rel = min_rel.min(gap / scale.max(1e-300));
        if gap < -1e-12 * scale {
            mono_viol += 1;
        }
    }
    let mut tartar_viol = 0;
    for p in [2.5, 3.0, 4.0, 6.0] {
        for k in 0..100_000 {
            let dim = 1 + k % 3;
            let scale = 10f64.powf(rng.random_range(-3.0..2.0));
            let x: Vec<f64> = (0..dim)
                .map(|_| scale * rng.random_range(-1.0..1.0))
                .collect();
            let y: Vec<f64> = (0..dim)
                .map(|_| scale * rng.random_range(-1.0..1.0))
                .collect();
            let (lhs, rhs) = tartar_pointwise(&x, &y, p).unwrap();
            if lhs < rhs * (1.0 - 1e-12) {
                tartar_viol += 1;
            }
        }
    }
    outcome(
        mono_viol == 0 && tartar_viol == 0,
        format!(
            "monotonicity: 1000 pairs, {mono_viol} violations (min gap/scale {min_rel:.3e}); \
             Tartar: 4×1e5 pairs, {tartar_viol} violations"
        ),
    )
}

fn c4_gradient() -> Outcome {
    let g = grid();
    let e = energy_at(&g, 0.2);
    let mut rng = sample::rng(404);
    let s = 1e-4;
    let mut worst = 0.0f64;
    for k in 0..50 {
        let u = sample::random_direction(&g, &mut rng, 16).scaled(rng.random_range(0.5..5.0));
        let v = random_state(&g, &mut rng, k);
        let v = v.scaled(1.0 / norm_l2(&v));
        let plus = energy(&e, &u.add_scaled(s, &v).unwrap()).unwrap();
        let minus = energy(&e, &u.add_scaled(-s, &v).unwrap()).unwrap();
        let fd = (plus - minus) / (2.0 * s);
        let exact = inner_l2(&apply_a(&e, &u).unwrap(), &v).unwrap();
        worst = worst.max((fd - exact).abs() / exact.abs().max(1e-300));
    }
    outcome(
        worst <= 1e-6,
        format!("50 pairs, s = 1e-4, max relative error {worst:.3e}"),
    )
}

fn c5_dissipation() -> Outcome {
    let g = grid();
    let e = energy_at(&g, 0.1);
    let f = unforced(&g);
    let cfg = StepConfig::default();
    let mut rng = sample::rng(505);
    let (mut e_viol, mut l2_viol, mut steps) = (0, 0, 0);
    for k in 0..20 {
        let u0 = random_state(&g, &mut rng, k);
        let traj = evolve(&e, &f, &u0, 0.0, 2.0, &cfg).unwrap();
        for w in traj.monitors.windows(2) {
            steps += 1;
            if w[1].energy > w[0].energy {
                e_viol += 1;
            }
            if w[1].l2_norm > w[0].l2_norm {
                l2_viol += 1;
            }
        }
    }
    let tight = StepConfig {
        dt: 0.05,
        tol_inner: 1e-11,
        ..StepConfig::default()
    };
    let (mut nonexp_viol, mut worst) = (0, 0.0f64);
    for k in 0..100 {
        let u = random_state(&g, &mut rng, k);
        let v = random_state(&g, &mut rng, k + 1);
        let (pu, _) = prox_step(&e, &f, &u, 0.0, &tight).unwrap();
        let (pv, _) = prox_step(&e, &f, &v, 0.0, &tight).unwrap();
        let ratio = dist_l2(&pu, &pv).unwrap() / dist_l2(&u, &v).unwrap();
        worst = worst.max(ratio);
        if ratio > 1.0 + 1e-6 {
            nonexp_viol += 1;
        }
    }
    outcome(
        e_viol + l2_viol + nonexp_viol == 0,
        format!(
            "{steps} steps: {e_viol} energy increases, {l2_viol} L² increases; \
             resolvent: 100 pairs, max contraction ratio {worst:.6}, {nonexp_viol} violations"
        ),
    )
}

struct BoundRuns {
    report: BoundsReport,
    tau: f64,
    runs: Vec<Vec<Monitor>>,
}

fn bound_runs() -> BoundRuns {
    let g = grid();
    let e = energy_at(&g, 0.0);
    let f = Forcing::new(&g, ForcingSpec::default()).unwrap();
    let report = build_bounds(
        &theory(),
        c_embed(&g),
        f.lipschitz(),
        f.l1(),
        EtaChoice::default(),
    )
    .unwrap();
    let cfg = StepConfig::default();
    let tau = -20.0;
    let samples = sample::sample_ball(&g, 10.0, 20, 606);
    let runs = samples
        .iter()
        .map(|u0| {
            let mut mons = Vec::new();
            evolve_with(&e, &f, u0, tau, 10.0, &cfg, |m, _| mons.push(*m)).unwrap();
            mons
        })
        .collect();
    BoundRuns { report, tau, runs }
}

fn c6_lemma31(b: &BoundRuns) -> Outcome {
    let br = &b.report;
    let (mut viol, mut worst, mut checks) = (0, 0.0f64, 0);
    for run in &b.runs {
        for m in run.iter().filter(|m| m.time - b.tau >= br.t1) {
            let ratio = 0.5 * m.l2_norm * m.l2_norm / br.beta1(m.time);
            worst = worst.max(ratio);
            checks += 1;
            if ratio > 1.05 {
                viol += 1;
            }
        }
    }
    // comparison ODE against the closed-form transient bound
    let mut rng = sample::rng(607);
    let mut ode_viol = 0;
    for _ in 0..20 {
        let p = rng.random_range(2.5..6.0);
        let theta = p / 2.0;
        let gamma = rng.random_range(0.05..2.0);
        let (d0, d1) = (rng.random_range(0.0..3.0), rng.random_range(0.0..0.3));
        let delta = move |s: f64| d0 + d1 * s;
        let y0 = rng.random_range(0.0..200.0);
        let horizon = 20.0;
        let curve = ode_decay_oracle(gamma, theta, delta, y0, horizon).unwrap();
        for (s, y) in curve.times.iter().zip(&curve.values).skip(1) {
            let bound = (delta(*s) / gamma).powf(2.0 / p)
                + (0.5 * gamma * (p - 2.0) * s).powf(-2.0 / (p - 2.0));
            if 0.5 * y > bound * (1.0 + 1e-9) {
                ode_viol += 1;
            }
        }
    }
    outcome(
        viol == 0 && ode_viol == 0,
        format!(
            "T1 = {:.3}, {checks} samples over 20 runs, max ½‖u‖²/β₁ = {worst:.4} (limit 1.05), \
             {viol} violations; ODE oracle: 20 parameter sets, {ode_viol} violations",
            br.t1
        ),
    )
}

fn c7_lemma32(b: &BoundRuns) -> Outcome {
    let br = &b.report;
    let (mut viol, mut worst, mut checks) = (0, 0.0f64, 0);
    for run in &b.runs {
        for m in run.iter().filter(|m| m.time - b.tau >= br.t2) {
            let ratio = m.e_norm.powi(4) / br.beta2(m.time);
            worst = worst.max(ratio);
            checks += 1;
            if ratio > 1.10 {
                viol += 1;
            }
        }
    }
    outcome(
        viol == 0,
        format!(
            "T2 = {:.3}, {checks} samples, max ‖u‖_E^p/β₂ = {worst:.3e} (limit 1.10), {viol} violations",
            br.t2
        ),
    )
}

fn c8_perturbation() -> Outcome {
    let g = grid();
    let e0 = energy_at(&g, 0.0);
    let f = Forcing::new(&g, ForcingSpec::default()).unwrap();
    let u0 = sample::random_in_ball(&g, &mut sample::rng(808), 10.0);
    let cfg = StepConfig::default();
    let mut viol = 0;
    let mut rows = Vec::new();
    for eps in [0.4, 0.2, 0.1, 0.05] {
        let ee = energy_at(&g, eps);
        let gap = process_gap(&ee, &e0, &f, &u0, &u0, 0.0, 10.0, &cfg).unwrap();
        viol += gap.violations();
        rows.push((eps, gap.weight_gap, gap.sup_gap_sq()));
    }
    // ‖w‖ linear in the weight gap: normalised slopes within 25% of each other
    let slopes: Vec<f64> = rows.iter().map(|(_, wg, s)| s.sqrt() / wg).collect();
    let spread = slopes.iter().copied().fold(f64::MIN, f64::max)
        / slopes.iter().copied().fold(f64::MAX, f64::min);
    // squared gap drops at least twofold per halving, with 25% slack
    let halving: Vec<f64> = rows.windows(2).map(|w| w[0].2 / w[1].2).collect();
    let halving_ok = halving.iter().all(|&r| r >= 2.0 * 0.75);
    outcome(
        viol == 0 && spread <= 1.25 && halving_ok,
        format!(
            "{viol} envelope violations on [τ, τ+10]; sup‖w‖/‖a_ε-a₀‖ spread {spread:.3} (limit 1.25); \
             sup‖w‖² ratio per halving {:?} (need ≥ 1.5)",
            halving.iter().map(|r| format!("{r:.2}")).collect::<Vec<_>>()
        ),
    )
}

struct Sections {
    e: Energy,
    f: Forcing,
    step: StepConfig,
    cfg: PullbackConfig,
    at_t: PullbackResult,
}

fn sections() -> Sections {
    let g = grid();
    let e = energy_at(&g, 0.0);
    let f = Forcing::new(&g, ForcingSpec::default()).unwrap();
    let step = StepConfig::default();
    let cfg = PullbackConfig::default();
    let at_t = pullback_section(&e, &f, 0.0, &cfg, &step).unwrap();
    Sections {
        e,
        f,
        step,
        cfg,
        at_t,
    }
}

fn c9_attraction(s: &Sections) -> Outcome {
    let g = s.e.weight().grid();
    let b0 = Cloud::new(s.cfg.samples(g), 0.0, s.at_t.cloud.provenance()).unwrap();
    let diag = attraction_diagnostic(
        &s.e,
        &s.f,
        0.0,
        &b0,
        &s.cfg.depth_schedule,
        &s.step,
        &s.at_t.cloud,
    )
    .unwrap();
    // differences below the section's own convergence certificate are not resolvable
    let resolution = *s.at_t.certificate.last().unwrap();
    let monotone = diag[1..].windows(2).all(|w| w[1] <= w[0] + resolution);
    let last = *diag.last().unwrap();
    outcome(
        s.at_t.converged && monotone && last < s.cfg.tol_pullback,
        format!(
            "section converged at depth {} (certificate {resolution:.2e}); sequence {:?}; \
             final {last:.2e} < {:.0e}",
            s.at_t.depth_used,
            diag.iter().map(|d| format!("{d:.2e}")).collect::<Vec<_>>(),
            s.cfg.tol_pullback
        ),
    )
}

fn c10_usc(s: &Sections) -> Outcome {
    let g = s.e.weight().grid().clone();
    let family = WeightFamily::default();
    let setup = SweepSetup {
        grid: &g,
        family: &family,
        theory: s.e.theory(),
        forcing: &s.f,
        t: 0.0,
        pullback: &s.cfg,
        step: &s.step,
    };
    let rows = usc_sweep(&[0.4, 0.2, 0.1, 0.05, 0.025], &setup).unwrap();
    let tol = s.cfg.tol_pullback;
    let nonincreasing = rows
        .windows(2)
        .all(|w| w[1].dist_h_to_a0 <= w[0].dist_h_to_a0 + tol);
    let last = rows.last().unwrap();
    let within = last.dist_h_to_a0 <= 2.0 * last.envelope;
    let gaps_ok = rows.iter().all(|r| r.sup_gap_sq <= r.envelope);
    outcome(
        nonincreasing && within && gaps_ok && rows.iter().all(|r| r.converged),
        format!(
            "dist_H column {:?}; last {:.3e} ≤ 2×envelope {:.3e}",
            rows.iter()
                .map(|r| format!("{:.3e}", r.dist_h_to_a0))
                .collect::<Vec<_>>(),
            last.dist_h_to_a0,
            2.0 * last.envelope
        ),
    )
}

fn c11_invariance(s: &Sections) -> Outcome {
    let lag = 5.0;
    let earlier = pullback_section(&s.e, &s.f, -lag, &s.cfg, &s.step).unwrap();
    let inv = invariance_diagnostic(&s.e, &s.f, &earlier.cloud, &s.at_t.cloud, &s.step).unwrap();
    let limit = 5.0 * s.cfg.tol_pullback;
    outcome(
        inv.forward <= limit && inv.backward <= limit,
        format!(
            "τ = t - {lag}: forward {:.3e}, backward {:.3e} (limit {limit:.0e})",
            inv.forward, inv.backward
        ),
    )
}

fn c12_replay() -> Outcome {
    let root = tempfile::tempdir().unwrap();
    let cfg = RunConfig::default();
    let mut lines = Vec::new();
    let mut all = true;
    for exp in Experiment::ALL {
        let first = root.path().join(exp.name());
        experiment::run(&cfg, exp, &first, root.path()).unwrap();
        let again = root.path().join(format!("{}-replay", exp.name()));
        let report = experiment::replay(&first.join(MANIFEST), &again).unwrap();
        let csvs = report
            .identical
            .iter()
            .filter(|f| f.ends_with(".csv"))
            .count();
        all &= report.is_identical() && csvs > 0;
        lines.push(format!(
            "{}: {} files identical ({csvs} csv), {} differing",
            exp.name(),
            report.identical.len(),
            report.differing.len()
        ));
    }
    outcome(all, lines.join("; "))
}

fn main() -> ExitCode {
    let mut failures = 0;
    let mut report = |id: usize, name: &str, f: &mut dyn FnMut() -> Outcome| {
        let start = Instant::now();
        let res = catch_unwind(AssertUnwindSafe(f));
        let secs = start.elapsed().as_secs_f64();
        let (pass, detail) = match res {
            Ok(o) => (o.pass, o.detail),
            Err(e) => {
                let msg = e
                    .downcast_ref::<String>()
                    .cloned()
                    .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                    .unwrap_or_default();
                (false, format!("panicked: {msg}"))
            }
        };
        if !pass {
            failures += 1;
        }
        println!(
            "[{}] criterion {id:2} {name} ({secs:.1}s): {detail}",
            if pass { "PASS" } else { "FAIL" }
        );
    };

    report(1, "embedding inequality", &mut c1_embedding);
    report(2, "tail estimate", &mut c2_tail);
    report(3, "monotonicity + Tartar", &mut c3_monotone_tartar);
    report(4, "gradient consistency", &mut c4_gradient);
    report(5, "proximal dissipation", &mut c5_dissipation);
    let runs = catch_unwind(bound_runs);
    match &runs {
        Ok(b) => {
            report(6, "L² absorbing bound", &mut || c6_lemma31(b));
            report(7, "E absorbing bound", &mut || c7_lemma32(b));
        }
        Err(_) => {
            report(6, "L² absorbing bound", &mut || {
                outcome(false, "runs failed".into())
            });
            report(7, "E absorbing bound", &mut || {
                outcome(false, "runs failed".into())
            });
        }
    }
    report(8, "perturbation estimate", &mut c8_perturbation);
    match catch_unwind(sections) {
        Ok(s) => {
            report(9, "pullback attraction", &mut || c9_attraction(&s));
            report(10, "upper-semicontinuity", &mut || c10_usc(&s));
            report(11, "invariance", &mut || c11_invariance(&s));
        }
        Err(_) => {
            for (id, name) in [
                (9, "pullback attraction"),
                (10, "upper-semicontinuity"),
                (11, "invariance"),
            ] {
                report(id, name, &mut || {
                    outcome(false, "section construction failed".into())
                });
            }
        }
    }
    report(12, "reproducibility", &mut c12_replay);

    println!("acceptance: {} of 12 criteria passed", 12 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
