//! Pullback-attractor sections as finite clouds of trajectory endpoints,
//! Hausdorff semi-distances between clouds, attraction and invariance
//! diagnostics, and the ε-sweep for upper-semicontinuity.
//!
//! A section `Â(t)` is built by evolving a seeded sample of an L² ball from
//! `t - depth` to `t` for increasing depths, until two successive clouds are
//! within `tol_pullback` of each other (symmetric Hausdorff distance).

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bounds::perturbation_envelope;
use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::grid::{self, dist_l2, Grid, State};
use crate::operators::Energy;
use crate::sample;
use crate::stepper::{evolve, evolve_with, StepConfig};
use crate::weights::{make_weight, TheoryParams, WeightFamily};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub eps: f64,
    pub depth: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cloud {
    states: Vec<State>,
    time_tag: f64,
    provenance: Provenance,
}

impl Cloud {
    pub fn new(states: Vec<State>, time_tag: f64, provenance: Provenance) -> Result<Self> {
        let first = states.first().ok_or(Error::EmptyCloud)?;
        if states.iter().any(|s| s.grid() != first.grid()) {
            return Err(Error::GridMismatch);
        }
        if states.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("cloud member"));
        }
        let states = states.into_iter().map(|s| s.with_time(time_tag)).collect();
        Ok(Cloud {
            states,
            time_tag,
            provenance,
        })
    }

    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn time_tag(&self) -> f64 {
        self.time_tag
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn grid(&self) -> &Grid {
        self.states[0].grid()
    }

    pub fn max_norm(&self) -> f64 {
        self.states.iter().map(grid::norm_l2).fold(0.0, f64::max)
    }

    /// Writes one snapshot per member plus `manifest.json` into `dir`.
    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        let mut files = Vec::with_capacity(self.states.len());
        for (i, s) in self.states.iter().enumerate() {
            let name = format!("state_{i:04}.txt");
            grid::save_snapshot(s, &dir.join(&name))?;
            files.push(name);
        }
        let manifest = CloudManifest {
            time_tag: self.time_tag,
            eps: self.provenance.eps,
            seed: self.provenance.seed,
            depth: self.provenance.depth,
            members: files,
        };
        let text = serde_json::to_string_pretty(&manifest).expect("serialisable");
        std::fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(dir.join("manifest.json"))?;
        let m: CloudManifest = serde_json::from_str(&text)
            .map_err(|e| Error::Parse(format!("cloud manifest: {e}")))?;
        let states = m
            .members
            .iter()
            .map(|f| grid::load_snapshot(&dir.join(f)))
            .collect::<Result<Vec<_>>>()?;
        Cloud::new(
            states,
            m.time_tag,
            Provenance {
                eps: m.eps,
                depth: m.depth,
                seed: m.seed,
            },
        )
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CloudManifest {
    time_tag: f64,
    eps: f64,
    seed: u64,
    depth: f64,
    members: Vec<String>,
}

#[cfg(feature = "parallel")]
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn par_map<T: Sync, U: Send>(items: &[T], f: impl Fn(&T) -> U + Sync + Send) -> Vec<U> {
    items.iter().map(f).collect()
}

/// `sup_{a∈A} inf_{b∈B} ‖a - b‖_{L²}`.
pub fn hausdorff_semidist(a: &Cloud, b: &Cloud) -> Result<f64> {
    semidist_states(&a.states, &b.states)
}

/// Symmetric Hausdorff distance, the larger of the two semi-distances.
pub fn hausdorff_dist(a: &Cloud, b: &Cloud) -> Result<f64> {
    Ok(hausdorff_semidist(a, b)?.max(hausdorff_semidist(b, a)?))
}

pub fn semidist_states(a: &[State], b: &[State]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyCloud);
    }
    let nearest = par_map(a, |x| {
        b.iter()
            .map(|y| dist_l2(x, y))
            .try_fold(f64::INFINITY, |m, d| d.map(|d| m.min(d)))
    });
    nearest
        .into_iter()
        .try_fold(0.0, |m, d| d.map(|d| f64::max(m, d)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackConfig {
    pub rho0: f64,
    pub m_samples: usize,
    pub depth_schedule: Vec<f64>,
    pub tol_pullback: f64,
    pub seed: u64,
}

impl Default for PullbackConfig {
    fn default() -> Self {
        PullbackConfig {
            rho0: 10.0,
            m_samples: 8,
            depth_schedule: vec![0.0, 5.0, 10.0, 15.0, 20.0, 25.0, 30.0, 40.0],
            tol_pullback: 1e-4,
            seed: 42,
        }
    }
}

impl PullbackConfig {
    pub fn validate(&self) -> Result<()> {
        if self.m_samples < 2 {
            return Err(Error::param("pullback.m_samples", "must be at least 2"));
        }
        if self.depth_schedule.is_empty() {
            return Err(Error::param("pullback.depth_schedule", "must not be empty"));
        }
        if self
            .depth_schedule
            .iter()
            .any(|d| !(*d >= 0.0) || !d.is_finite())
        {
            return Err(Error::param(
                "pullback.depth_schedule",
                "depths must be finite and >= 0",
            ));
        }
        if self.depth_schedule.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::param(
                "pullback.depth_schedule",
                "must be strictly increasing",
            ));
        }
        if !(self.tol_pullback > 0.0) {
            return Err(Error::param("pullback.tol_pullback", "must be positive"));
        }
        if !(self.rho0 >= 0.0) || !self.rho0.is_finite() {
            return Err(Error::param("pullback.rho0", "must be finite and >= 0"));
        }
        Ok(())
    }

    pub fn samples(&self, grid: &Grid) -> Vec<State> {
        sample::sample_ball(grid, self.rho0, self.m_samples, self.seed)
    }
}

/// Evolves every member from `tau` to `t` (independently, possibly in parallel).
pub fn evolve_states(
    e: &Energy,
    f: &Forcing,
    states: &[State],
    tau: f64,
    t: f64,
    step: &StepConfig,
) -> Result<Vec<State>> {
    par_map(states, |u| evolve_with(e, f, u, tau, t, step, |_, _| {}))
        .into_iter()
        .collect()
}

#[derive(Debug, Clone)]
pub struct PullbackResult {
    pub cloud: Cloud,
    /// Depths actually evaluated, in order.
    pub depths: Vec<f64>,
    /// `certificate[k]` = Hausdorff distance between the clouds at `depths[k]` and `depths[k+1]`.
    pub certificate: Vec<f64>,
    pub depth_used: f64,
    pub converged: bool,
}

/// Approximates `Â(t)` by pullback from increasingly remote initial times.
pub fn pullback_section(
    e: &Energy,
    f: &Forcing,
    t: f64,
    cfg: &PullbackConfig,
    step: &StepConfig,
) -> Result<PullbackResult> {
    cfg.validate()?;
    let samples = cfg.samples(e.weight().grid());
    let provenance = |depth| Provenance {
        eps: e.weight().eps(),
        depth,
        seed: cfg.seed,
    };
    let mut depths = Vec::new();
    let mut certificate = Vec::new();
    let mut prev: Option<Vec<State>> = None;
    for &depth in &cfg.depth_schedule {
        let cloud = evolve_states(e, f, &samples, t - depth, t, step)?;
        depths.push(depth);
        if let Some(prev) = &prev {
            let d = semidist_states(prev, &cloud)?.max(semidist_states(&cloud, prev)?);
            certificate.push(d);
            if d < cfg.tol_pullback {
                return Ok(PullbackResult {
                    cloud: Cloud::new(cloud, t, provenance(depth))?,
                    depths,
                    certificate,
                    depth_used: depth,
                    converged: true,
                });
            }
        }
        prev = Some(cloud);
    }
    let depth = *depths.last().expect("schedule is nonempty");
    Ok(PullbackResult {
        cloud: Cloud::new(prev.expect("schedule is nonempty"), t, provenance(depth))?,
        depths,
        certificate,
        depth_used: depth,
        converged: false,
    })
}

/// `k ↦ dist_H(S(t, t - depth_k) B₀, attractor)`.
pub fn attraction_diagnostic(
    e: &Energy,
    f: &Forcing,
    t: f64,
    b0: &Cloud,
    depths: &[f64],
    step: &StepConfig,
    attractor: &Cloud,
) -> Result<Vec<f64>> {
    depths
        .iter()
        .map(|&depth| {
            let evolved = evolve_states(e, f, b0.states(), t - depth, t, step)?;
            semidist_states(&evolved, attractor.states())
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InvarianceReport {
    /// `dist_H(S(t, τ) Â(τ), Â(t))`
    pub forward: f64,
    /// `dist_H(Â(t), S(t, τ) Â(τ))`
    pub backward: f64,
}

/// Compares the evolved section `S(t, τ) Â(τ)` with `Â(t)` in both directions.
pub fn invariance_diagnostic(
    e: &Energy,
    f: &Forcing,
    section_tau: &Cloud,
    section_t: &Cloud,
    step: &StepConfig,
) -> Result<InvarianceReport> {
    let tau = section_tau.time_tag();
    let t = section_t.time_tag();
    let evolved = evolve_states(e, f, section_tau.states(), tau, t, step)?;
    Ok(InvarianceReport {
        forward: semidist_states(&evolved, section_t.states())?,
        backward: semidist_states(section_t.states(), &evolved)?,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GapCurve {
    pub times: Vec<f64>,
    /// `‖u^ε(s) - u^0(s)‖²`
    pub gap_sq: Vec<f64>,
    pub envelope: Vec<f64>,
    /// `sup_s ‖u⁰‖_p^p + ‖u⁰‖_p^{p-1} ‖u^ε‖_p` along the run.
    pub m_measured: f64,
    pub weight_gap: f64,
}

impl GapCurve {
    pub fn sup_gap_sq(&self) -> f64 {
        self.gap_sq.iter().copied().fold(0.0, f64::max)
    }

    /// Number of samples where the measured gap exceeds the envelope.
    pub fn violations(&self) -> usize {
        self.gap_sq
            .iter()
            .zip(&self.envelope)
            .filter(|(g, e)| g > e)
            .count()
    }

    pub fn write_csv(&self, mut out: impl Write) -> Result<()> {
        writeln!(out, "t,gap_sq,envelope")?;
        for ((t, g), e) in self.times.iter().zip(&self.gap_sq).zip(&self.envelope) {
            writeln!(out, "{t:.16e},{g:.16e},{e:.16e}")?;
        }
        Ok(())
    }
}

/// Paired stepping of the perturbed and unperturbed problems with the same
/// forcing and time grid; returns the squared gap and its Gronwall envelope.
#[allow(clippy::too_many_arguments)]
pub fn process_gap(
    e_eps: &Energy,
    e_0: &Energy,
    f: &Forcing,
    u_tau_eps: &State,
    u_tau_0: &State,
    tau: f64,
    t: f64,
    step: &StepConfig,
) -> Result<GapCurve> {
    if e_eps.weight().grid() != e_0.weight().grid() {
        return Err(Error::GridMismatch);
    }
    let p = e_0.p();
    let eps_traj = evolve(e_eps, f, u_tau_eps, tau, t, step)?;
    let zero_traj = evolve(e_0, f, u_tau_0, tau, t, step)?;
    let mut m_measured: f64 = 0.0;
    let mut gap_sq = Vec::with_capacity(eps_traj.states.len());
    for (ue, u0) in eps_traj.states.iter().zip(&zero_traj.states) {
        let n0 = grid::norm_lp(u0, p)?;
        let ne = grid::norm_lp(ue, p)?;
        m_measured = m_measured.max(n0.powf(p) + n0.powf(p - 1.0) * ne);
        gap_sq.push(dist_l2(ue, u0)?.powi(2));
    }
    let weight_gap = e_eps
        .weight()
        .values()
        .iter()
        .zip(e_0.weight().values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
        .max(e_eps.weight().weight_gap() - e_0.weight().weight_gap());
    let gap0 = gap_sq[0];
    let envelope = eps_traj
        .times
        .iter()
        .map(|&s| perturbation_envelope(f.lipschitz(), m_measured, s, tau, gap0, weight_gap))
        .collect::<Result<Vec<_>>>()?;
    Ok(GapCurve {
        times: eps_traj.times,
        gap_sq,
        envelope,
        m_measured,
        weight_gap,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub eps: f64,
    pub dist_h_to_a0: f64,
    pub sup_gap_sq: f64,
    pub envelope: f64,
    pub depth_used: f64,
    pub converged: bool,
}

pub fn write_sweep_csv(rows: &[SweepRow], mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "eps,dist_H_to_A0,sup_gap_sq,envelope,depth_used,converged_flag"
    )?;
    for r in rows {
        writeln!(
            out,
            "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            r.eps,
            r.dist_h_to_a0,
            r.sup_gap_sq,
            r.envelope,
            r.depth_used,
            u8::from(r.converged)
        )?;
    }
    Ok(())
}

/// Everything the ε-sweep needs besides the ε values.
#[derive(Debug, Clone)]
pub struct SweepSetup<'a> {
    pub grid: &'a Grid,
    pub family: &'a WeightFamily,
    pub theory: &'a TheoryParams,
    pub forcing: &'a Forcing,
    pub t: f64,
    pub pullback: &'a PullbackConfig,
    pub step: &'a StepConfig,
}

/// For each ε: `dist_H(Â_ε(t), Â_0(t))`, the measured paired gap over the
/// pullback window `[t - depth, t]` from the shared samples, and the matching
/// envelope. Rows come back sorted by decreasing ε.
pub fn usc_sweep(eps_list: &[f64], setup: &SweepSetup) -> Result<Vec<SweepRow>> {
    let energy = |eps: f64| -> Result<Energy> {
        Ok(Energy::new(
            make_weight(setup.grid, setup.family, eps)?,
            *setup.theory,
        ))
    };
    let e0 = energy(0.0)?;
    let reference = pullback_section(&e0, setup.forcing, setup.t, setup.pullback, setup.step)?;
    let samples = setup.pullback.samples(setup.grid);

    let mut eps_sorted = eps_list.to_vec();
    eps_sorted.sort_by(|a, b| b.total_cmp(a));
    let mut rows = Vec::with_capacity(eps_sorted.len());
    for eps in eps_sorted {
        let ee = energy(eps)?;
        let section = if eps == 0.0 {
            reference.clone()
        } else {
            pullback_section(&ee, setup.forcing, setup.t, setup.pullback, setup.step)?
        };
        let dist = hausdorff_semidist(&section.cloud, &reference.cloud)?;
        let tau = setup.t - section.depth_used;
        let gaps = par_map(&samples, |u| {
            process_gap(&ee, &e0, setup.forcing, u, u, tau, setup.t, setup.step)
        })
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
        let sup_gap_sq = gaps.iter().map(GapCurve::sup_gap_sq).fold(0.0, f64::max);
        let m = gaps.iter().map(|g| g.m_measured).fold(0.0, f64::max);
        let weight_gap = gaps.first().map_or(0.0, |g| g.weight_gap);
        let envelope =
            perturbation_envelope(setup.forcing.lipschitz(), m, setup.t, tau, 0.0, weight_gap)?;
        rows.push(SweepRow {
            eps,
            dist_h_to_a0: dist,
            sup_gap_sq,
            envelope,
            depth_used: section.depth_used,
            converged: section.converged,
        });
    }
    Ok(rows)
}
