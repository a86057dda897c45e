//! Experiment drivers: each writes its tables into an output directory next
//! to a config echo and a manifest that is enough to replay the run.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::attractor::{
    attraction_diagnostic, invariance_diagnostic, process_gap, pullback_section, usc_sweep,
    write_sweep_csv, Cloud, Provenance, SweepSetup,
};
use crate::bounds::{build_bounds, m_tilde, uniform_gronwall_oracle, BoundsReport};
use crate::config::{Experiment, RunConfig, Scenario};
use crate::error::{Error, Result};
use crate::grid;
use crate::stepper::{evolve_with, write_monitors_csv, Monitor};
use crate::weights::{embedding_constant, integrability, make_weight};

pub const VERSION: &str = concat!("wplap ", env!("CARGO_PKG_VERSION"));

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_ECHO: &str = "config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub experiment: Experiment,
    pub seed: u64,
    /// Directory that relative paths in the config refer to.
    pub base_dir: PathBuf,
    pub config: String,
    pub warnings: Vec<String>,
    /// Output files relative to the run directory, config echo excluded.
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Parse(format!("manifest: {e}")))
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub manifest: Manifest,
    pub summary: serde_json::Value,
}

struct Sink {
    dir: PathBuf,
    files: Vec<String>,
}

impl Sink {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        self.files.push(name.to_string());
        Ok(BufWriter::new(File::create(path)?))
    }

    fn json(&mut self, name: &str, value: &serde_json::Value) -> Result<()> {
        let mut out = self.create(name)?;
        serde_json::to_writer_pretty(&mut out, value).expect("json values serialise");
        writeln!(out)?;
        out.flush()?;
        Ok(())
    }
}

/// Runs `experiment` with outputs in `out_dir`; relative paths inside the
/// config resolve against `base_dir`.
pub fn run(
    cfg: &RunConfig,
    experiment: Experiment,
    out_dir: &Path,
    base_dir: &Path,
) -> Result<RunOutput> {
    let (sc, warnings) = cfg.scenario()?;
    std::fs::create_dir_all(out_dir)?;
    let mut sink = Sink {
        dir: out_dir.to_path_buf(),
        files: Vec::new(),
    };
    let summary = match experiment {
        Experiment::Simulate => simulate(cfg, &sc, base_dir, &mut sink)?,
        Experiment::Bounds => bounds(cfg, &sc, &mut sink)?,
        Experiment::Attractor => attractor(cfg, &sc, &mut sink)?,
        Experiment::Perturb => perturb(cfg, &sc, base_dir, &mut sink)?,
        Experiment::Sweep => sweep(cfg, &sc, &mut sink)?,
    };

    let mut echo = cfg.clone();
    echo.experiment = Some(experiment);
    echo.out_dir = None;
    let config = echo.to_toml_string();
    std::fs::write(out_dir.join(CONFIG_ECHO), &config)?;
    let manifest = Manifest {
        version: VERSION.to_string(),
        experiment,
        seed: cfg.seed,
        base_dir: base_dir.to_path_buf(),
        config,
        warnings,
        outputs: sink.files,
    };
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serialises");
    std::fs::write(out_dir.join(MANIFEST), text)?;
    Ok(RunOutput {
        dir: out_dir.to_path_buf(),
        manifest,
        summary,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReplayReport {
    pub identical: Vec<String>,
    pub differing: Vec<String>,
}

impl ReplayReport {
    pub fn is_identical(&self) -> bool {
        self.differing.is_empty()
    }
}

/// Re-runs a manifest into `out_dir` and compares every output byte for byte.
pub fn replay(manifest_path: &Path, out_dir: &Path) -> Result<ReplayReport> {
    let manifest = Manifest::load(manifest_path)?;
    let original = manifest_path.parent().unwrap_or(Path::new("."));
    if original.canonicalize().ok() == out_dir.canonicalize().ok() {
        return Err(Error::param(
            "out",
            "replay needs a directory other than the original run",
        ));
    }
    let cfg = RunConfig::from_toml_str(&manifest.config)?;
    let fresh = run(&cfg, manifest.experiment, out_dir, &manifest.base_dir)?;
    let mut report = ReplayReport {
        identical: Vec::new(),
        differing: Vec::new(),
    };
    for name in &manifest.outputs {
        let a = std::fs::read(original.join(name))?;
        let same = fresh.manifest.outputs.contains(name)
            && std::fs::read(out_dir.join(name)).is_ok_and(|b| a == b);
        if same {
            report.identical.push(name.clone());
        } else {
            report.differing.push(name.clone());
        }
    }
    Ok(report)
}

fn report_for(cfg: &RunConfig, sc: &Scenario) -> Result<(BoundsReport, f64)> {
    let c_embed = match cfg.bounds.c_embed {
        Some(c) => c,
        None => {
            let w0 = make_weight(&sc.grid, &sc.family, 0.0)?;
            embedding_constant(&w0, &sc.theory)?
        }
    };
    let report = build_bounds(
        &sc.theory,
        c_embed,
        sc.forcing.lipschitz(),
        sc.forcing.l1(),
        cfg.bounds.eta_choice(),
    )?;
    Ok((report, c_embed))
}

fn simulate(
    cfg: &RunConfig,
    sc: &Scenario,
    base_dir: &Path,
    sink: &mut Sink,
) -> Result<serde_json::Value> {
    let s = &cfg.simulate;
    let e = sc.energy(cfg.weights.eps)?;
    let u0 = s.initial.build(&sc.grid, base_dir)?;
    let (br, _) = report_for(cfg, sc)?;
    let mut monitors: Vec<Monitor> = Vec::new();
    let last = evolve_with(&e, &sc.forcing, &u0, s.tau, s.t_end, &sc.step, |m, _| {
        monitors.push(*m)
    })?;

    let p = sc.theory.p;
    let mut out = sink.create("monitors.csv")?;
    write_monitors_csv(&monitors, &mut out)?;
    out.flush()?;

    let mut out = sink.create("bounds_check.csv")?;
    writeln!(out, "time,half_l2_sq,l2_bound,beta1,e_norm_pow,beta2")?;
    let mut max_b1: f64 = 0.0;
    let mut max_b2: f64 = 0.0;
    let mut l2_violations = 0usize;
    for m in &monitors {
        let half = 0.5 * m.l2_norm * m.l2_norm;
        let epow = m.e_norm.powf(p);
        let elapsed = m.time - s.tau;
        let l2_bound = if elapsed > 0.0 {
            br.l2_half_bound(m.time, s.tau)
        } else {
            f64::INFINITY
        };
        if half > l2_bound {
            l2_violations += 1;
        }
        if elapsed >= br.t1 {
            max_b1 = max_b1.max(half / br.beta1(m.time));
        }
        if elapsed >= br.t2 {
            max_b2 = max_b2.max(epow / br.beta2(m.time));
        }
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
            m.time,
            half,
            l2_bound,
            br.beta1(m.time),
            epow,
            br.beta2(m.time)
        )?;
    }
    out.flush()?;

    // uniform Gronwall on the last full window [t, t + R] after the transient T1
    let r = br.r_window;
    let gronwall = monitors
        .last()
        .map(|end| end.time - r)
        .filter(|&t| t - s.tau >= br.t1)
        .map(|t| {
            let y: Vec<f64> = monitors
                .iter()
                .filter(|m| m.time >= t - 1e-9)
                .map(|m| m.e_norm.powf(p))
                .collect();
            uniform_gronwall_oracle(br.a1, br.a2(t), br.a3(t), r, &y)
        })
        .transpose()?;

    let mut out = sink.create("final_state.txt")?;
    grid::write_snapshot(&last, &mut out)?;
    out.flush()?;

    let summary = json!({
        "steps": monitors.len() - 1,
        "final": monitors.last(),
        "max_inner_iters": monitors.iter().map(|m| m.inner_iters).max(),
        "t1": br.t1,
        "t2": br.t2,
        "max_ratio_beta1_after_t1": max_b1,
        "max_ratio_beta2_after_t2": max_b2,
        "l2_bound_violations": l2_violations,
        "uniform_gronwall": gronwall,
    });
    sink.json("simulate.json", &summary)?;
    Ok(summary)
}

fn bounds(cfg: &RunConfig, sc: &Scenario, sink: &mut Sink) -> Result<serde_json::Value> {
    let b = &cfg.bounds;
    let (br, c_embed) = report_for(cfg, sc)?;
    let w0 = make_weight(&sc.grid, &sc.family, 0.0)?;
    let integ = integrability(&w0, &sc.theory);
    let mut report = br.to_json(Some((b.tau, b.t_end)));
    report["integrability"] = json!({
        "value": integ.value,
        "finite_on_whole_space": integ.finite_on_whole_space,
    });
    report["c_embed_source"] = json!(if b.c_embed.is_some() {
        "config"
    } else {
        "weight"
    });
    report["beta1_at_t_ref"] = json!(br.beta1(b.t_ref));
    report["beta2_at_t_ref"] = json!(br.beta2(b.t_ref));
    report["weight_gap"] = json!(sc.family.weight_gap(b.eps));
    debug_assert_eq!(report["c_embed"], json!(c_embed));
    sink.json("bounds.json", &report)?;

    let n = b.samples;
    let times: Vec<f64> = (0..n)
        .map(|k| b.tau + (b.t_end - b.tau) * k as f64 / (n - 1) as f64)
        .collect();
    let mut out = sink.create("bounds_curves.csv")?;
    br.write_curves_csv(&times, b.tau, sc.family.weight_gap(b.eps), &mut out)?;
    out.flush()?;
    Ok(report)
}

fn attractor(cfg: &RunConfig, sc: &Scenario, sink: &mut Sink) -> Result<serde_json::Value> {
    let a = &cfg.attractor;
    let e = sc.energy(cfg.weights.eps)?;
    let res = pullback_section(&e, &sc.forcing, a.t, &sc.pullback, &sc.step)?;
    res.cloud.save(&sink.dir.join("cloud"))?;
    for k in 0..res.cloud.len() {
        sink.files.push(format!("cloud/state_{k:04}.txt"));
    }
    sink.files.push("cloud/manifest.json".into());

    let mut out = sink.create("certificate.csv")?;
    writeln!(out, "depth,dist_H_successive")?;
    for (depth, d) in res.depths.iter().skip(1).zip(&res.certificate) {
        writeln!(out, "{depth:.16e},{d:.16e}")?;
    }
    out.flush()?;

    let b0 = Cloud::new(
        sc.pullback.samples(&sc.grid),
        a.t,
        Provenance {
            eps: cfg.weights.eps,
            depth: 0.0,
            seed: cfg.seed,
        },
    )?;
    let diag = attraction_diagnostic(
        &e,
        &sc.forcing,
        a.t,
        &b0,
        &sc.pullback.depth_schedule,
        &sc.step,
        &res.cloud,
    )?;
    let mut out = sink.create("attraction.csv")?;
    writeln!(out, "depth,dist_H")?;
    for (depth, d) in sc.pullback.depth_schedule.iter().zip(&diag) {
        writeln!(out, "{depth:.16e},{d:.16e}")?;
    }
    out.flush()?;

    let earlier = pullback_section(
        &e,
        &sc.forcing,
        a.t - a.invariance_lag,
        &sc.pullback,
        &sc.step,
    )?;
    let inv = invariance_diagnostic(&e, &sc.forcing, &earlier.cloud, &res.cloud, &sc.step)?;

    let (br, _) = report_for(cfg, sc)?;
    let summary = json!({
        "t": a.t,
        "eps": cfg.weights.eps,
        "depth_used": res.depth_used,
        "converged": res.converged,
        "certificate": res.certificate,
        "attraction": diag,
        "invariance": inv,
        "invariance_section_converged": earlier.converged,
        "cloud_max_l2_norm": res.cloud.max_norm(),
        "absorbing_l2_radius": (2.0 * br.beta1(a.t)).sqrt(),
    });
    sink.json("attractor.json", &summary)?;
    Ok(summary)
}

fn perturb(
    cfg: &RunConfig,
    sc: &Scenario,
    base_dir: &Path,
    sink: &mut Sink,
) -> Result<serde_json::Value> {
    let s = &cfg.perturb;
    let ee = sc.energy(s.eps)?;
    let e0 = sc.energy(0.0)?;
    let u0 = s.initial.build(&sc.grid, base_dir)?;
    let gap = process_gap(&ee, &e0, &sc.forcing, &u0, &u0, s.tau, s.t_end, &sc.step)?;
    let mut out = sink.create("gap.csv")?;
    gap.write_csv(&mut out)?;
    out.flush()?;
    let (br, _) = report_for(cfg, sc)?;
    let summary = json!({
        "eps": s.eps,
        "weight_gap": gap.weight_gap,
        "sup_gap_sq": gap.sup_gap_sq(),
        "violations": gap.violations(),
        "m_measured": gap.m_measured,
        "m_tilde_measured": m_tilde(sc.forcing.lipschitz(), gap.m_measured, s.t_end, s.tau),
        "apriori": br.perturbation_constants(s.tau, s.t_end),
    });
    sink.json("perturb.json", &summary)?;
    Ok(summary)
}

fn sweep(cfg: &RunConfig, sc: &Scenario, sink: &mut Sink) -> Result<serde_json::Value> {
    let setup = SweepSetup {
        grid: &sc.grid,
        family: &sc.family,
        theory: &sc.theory,
        forcing: &sc.forcing,
        t: cfg.sweep.t,
        pullback: &sc.pullback,
        step: &sc.step,
    };
    let rows = usc_sweep(&cfg.sweep.eps_list, &setup)?;
    let mut out = sink.create("sweep.csv")?;
    write_sweep_csv(&rows, &mut out)?;
    out.flush()?;
    let summary = json!({
        "t": cfg.sweep.t,
        "window": "each row uses the compact window [t - depth_used, t]",
        "rows": rows,
    });
    sink.json("sweep.json", &summary)?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> RunConfig {
        let mut c = RunConfig::default();
        c.grid.m = 65;
        c.simulate.tau = -1.0;
        c.perturb.t_end = 1.0;
        c
    }

    #[test]
    fn simulate_writes_outputs_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let out = run(&small(), Experiment::Simulate, dir.path(), dir.path()).unwrap();
        assert_eq!(
            out.manifest.outputs,
            [
                "monitors.csv",
                "bounds_check.csv",
                "final_state.txt",
                "simulate.json"
            ]
        );
        for f in &out.manifest.outputs {
            assert!(dir.path().join(f).exists());
        }
        let echo = std::fs::read_to_string(dir.path().join(CONFIG_ECHO)).unwrap();
        let back = RunConfig::from_toml_str(&echo).unwrap();
        assert_eq!(back.experiment, Some(Experiment::Simulate));
        assert_eq!(back.grid.m, 65);
    }

    #[test]
    fn perturb_replays_identically() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        run(&small(), Experiment::Perturb, a.path(), a.path()).unwrap();
        let rep = replay(&a.path().join(MANIFEST), b.path()).unwrap();
        assert!(rep.is_identical(), "{rep:?}");
        assert_eq!(rep.identical.len(), 2);
    }

    #[test]
    fn replay_refuses_its_own_directory() {
        let a = tempfile::tempdir().unwrap();
        run(&small(), Experiment::Bounds, a.path(), a.path()).unwrap();
        assert!(replay(&a.path().join(MANIFEST), a.path()).is_err());
    }
}
