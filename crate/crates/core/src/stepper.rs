//! Proximal (implicit Euler) time stepping of `u' + A u = B(t, u)`.
//!
//! Each step solves `v + dt A v = z` with `z = u + dt B(t, u)`, i.e. it
//! minimises `J(v) = ½‖v - z‖² + dt φ(v)`. `B` is explicit, `A` implicit.
//! The inner solver is gradient descent with Barzilai–Borwein steps and a
//! nonmonotone Armijo backtracking safeguard, warm-started at `u`.
//!
//! Times live on the lattice `k · dt` (`k` integer), so splitting a run in two
//! reproduces the single run bit-for-bit.

use std::collections::VecDeque;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::forcing::Forcing;
use crate::grid::{self, State};
use crate::operators::Energy;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepConfig {
    pub dt: f64,
    pub tol_inner: f64,
    pub max_inner_iters: usize,
}

impl Default for StepConfig {
    fn default() -> Self {
        StepConfig {
            dt: 1e-2,
            tol_inner: 1e-8,
            max_inner_iters: 50_000,
        }
    }
}

impl StepConfig {
    /// Checks the invariants, including `dt · L < 1` for the explicit forcing.
    pub fn validate(&self, lipschitz: f64) -> Result<()> {
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return Err(Error::param("step.dt", "must be positive"));
        }
        if !(self.tol_inner > 0.0 && self.tol_inner <= 1e-3) {
            return Err(Error::param("step.tol_inner", "must lie in (0, 1e-3]"));
        }
        if self.max_inner_iters == 0 {
            return Err(Error::param("step.max_inner_iters", "must be positive"));
        }
        let dl = self.dt * lipschitz;
        if dl >= 1.0 {
            return Err(Error::StepRejected(dl));
        }
        Ok(())
    }

    /// Index of the time lattice point `t`, which must lie on the lattice.
    pub fn lattice_index(&self, t: f64) -> Result<i64> {
        let k = (t / self.dt).round();
        if (k * self.dt - t).abs() > 1e-9 * t.abs().max(1.0) {
            return Err(Error::param(
                "time",
                format!("{t} is not a multiple of dt = {}", self.dt),
            ));
        }
        Ok(k as i64)
    }

    pub fn lattice_time(&self, k: i64) -> f64 {
        k as f64 * self.dt
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InnerStats {
    pub residual: f64,
    pub iters: usize,
}

/// Scratch space for the inner minimisation.
struct InnerSolver {
    z: Vec<f64>,
    v: Vec<f64>,
    g: Vec<f64>,
    trial: Vec<f64>,
    g_trial: Vec<f64>,
}

impl InnerSolver {
    fn new(n: usize) -> Self {
        InnerSolver {
            z: vec![0.0; n],
            v: vec![0.0; n],
            g: vec![0.0; n],
            trial: vec![0.0; n],
            g_trial: vec![0.0; n],
        }
    }

    /// `J(v)` and `∇J(v)` (into `grad`) for the current `z`.
    fn objective(
        e: &Energy,
        dt: f64,
        z: &[f64],
        v: &State,
        grad: &mut [f64],
        weights: &[f64],
    ) -> f64 {
        e.apply_into(v, grad);
        let mut fit = 0.0;
        for ((gi, (vi, zi)), w) in grad.iter_mut().zip(v.values().iter().zip(z)).zip(weights) {
            let d = vi - zi;
            fit += w * d * d;
            *gi = d + dt * *gi;
        }
        0.5 * fit + dt * e.energy_unchecked(v)
    }

    fn solve(&mut self, e: &Energy, u: &State, cfg: &StepConfig) -> Result<(State, InnerStats)> {
        const MEMORY: usize = 10;
        const ARMIJO: f64 = 1e-4;
        let grid = u.grid().clone();
        let w = grid.node_weights();
        let dt = cfg.dt;
        let znorm = grid::dot_weighted(w, &self.z, &self.z).sqrt();
        let target = cfg.tol_inner * (1.0 + znorm);

        self.v.copy_from_slice(u.values());
        let mut v = State::from_values_unchecked(&grid, std::mem::take(&mut self.v));
        let mut jv = Self::objective(e, dt, &self.z, &v, &mut self.g, w);
        let mut res = grid::dot_weighted(w, &self.g, &self.g).sqrt();
        let mut history: VecDeque<f64> = VecDeque::with_capacity(MEMORY);
        history.push_back(jv);
        let mut alpha = 1.0;
        let mut iters = 0;

        while res > target {
            if iters >= cfg.max_inner_iters {
                return Err(Error::InnerNonConvergence {
                    iters,
                    residual: res,
                    target,
                });
            }
            iters += 1;
            let gg = res * res;
            let j_ref = history.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let slack = 4.0 * f64::EPSILON * j_ref.abs();
            let mut trial_state;
            let mut j_trial;
            let mut backtracks = 0;
            loop {
                for ((t, vi), gi) in self.trial.iter_mut().zip(v.values()).zip(&self.g) {
                    *t = vi - alpha * gi;
                }
                trial_state = State::from_values_unchecked(&grid, std::mem::take(&mut self.trial));
                j_trial = Self::objective(e, dt, &self.z, &trial_state, &mut self.g_trial, w);
                if j_trial <= j_ref - ARMIJO * alpha * gg + slack || backtracks >= 60 {
                    break;
                }
                self.trial = trial_state.into_values();
                alpha *= 0.5;
                backtracks += 1;
            }
            let (mut ss, mut sy) = (0.0, 0.0);
            let steps = trial_state.values().iter().zip(v.values());
            let grads = self.g_trial.iter().zip(&self.g);
            for ((wi, (a, b)), (ga, gb)) in w.iter().zip(steps).zip(grads) {
                let (s, y) = (a - b, ga - gb);
                ss += wi * s * s;
                sy += wi * s * y;
            }
            self.trial = std::mem::replace(&mut v, trial_state).into_values();
            std::mem::swap(&mut self.g, &mut self.g_trial);
            jv = j_trial;
            if history.len() == MEMORY {
                history.pop_front();
            }
            history.push_back(jv);
            res = grid::dot_weighted(w, &self.g, &self.g).sqrt();
            // J is 1-strongly convex, so the BB step never needs to exceed 1
            alpha = if sy > 0.0 {
                (ss / sy).clamp(1e-14, 1.0)
            } else {
                1.0
            };
        }
        if !res.is_finite() || !v.is_finite() {
            return Err(Error::NonFinite("inner solve"));
        }
        let out = v.clone();
        self.v = v.into_values();
        Ok((
            out,
            InnerStats {
                residual: res,
                iters,
            },
        ))
    }
}

/// One proximal step from `u` at time `t`; returns the new state (untagged)
/// together with the inner-solver statistics.
pub fn prox_step(
    e: &Energy,
    f: &Forcing,
    u: &State,
    t: f64,
    cfg: &StepConfig,
) -> Result<(State, InnerStats)> {
    cfg.validate(f.lipschitz())?;
    if u.grid() != e.weight().grid() || u.grid() != f.profile().grid() {
        return Err(Error::GridMismatch);
    }
    let mut solver = InnerSolver::new(u.grid().len());
    step_with(&mut solver, e, f, u, t, cfg)
}

fn step_with(
    solver: &mut InnerSolver,
    e: &Energy,
    f: &Forcing,
    u: &State,
    t: f64,
    cfg: &StepConfig,
) -> Result<(State, InnerStats)> {
    f.eval_into(t, u.values(), &mut solver.z);
    for (zi, ui) in solver.z.iter_mut().zip(u.values()) {
        *zi = ui + cfg.dt * *zi;
    }
    solver.solve(e, u, cfg)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Monitor {
    pub step: usize,
    pub time: f64,
    pub l2_norm: f64,
    pub e_norm: f64,
    pub energy: f64,
    pub inner_residual: f64,
    pub inner_iters: usize,
}

impl Monitor {
    fn of(e: &Energy, step: usize, time: f64, u: &State, stats: InnerStats) -> Self {
        let energy = e.energy_unchecked(u);
        Monitor {
            step,
            time,
            l2_norm: grid::norm_l2(u),
            e_norm: (e.p() * energy).powf(1.0 / e.p()),
            energy,
            inner_residual: stats.residual,
            inner_iters: stats.iters,
        }
    }

    pub fn is_finite(&self) -> bool {
        [
            self.time,
            self.l2_norm,
            self.e_norm,
            self.energy,
            self.inner_residual,
        ]
        .iter()
        .all(|v| v.is_finite())
    }
}

/// Number of steps covering `[tau, t_end]`, rounded up.
pub fn step_count(tau: f64, t_end: f64, cfg: &StepConfig) -> Result<usize> {
    if !(t_end >= tau) {
        return Err(Error::param("t_end", "must not precede tau"));
    }
    Ok(((t_end - tau) / cfg.dt - 1e-9).ceil().max(0.0) as usize)
}

/// Low-level driver: steps from `tau` to (at least) `t_end`, calling
/// `observe` with the monitor and state after every step (and once for the
/// initial state). Returns the final state, tagged with its time.
pub fn evolve_with(
    e: &Energy,
    f: &Forcing,
    u_tau: &State,
    tau: f64,
    t_end: f64,
    cfg: &StepConfig,
    mut observe: impl FnMut(&Monitor, &State),
) -> Result<State> {
    cfg.validate(f.lipschitz())?;
    if u_tau.grid() != e.weight().grid() || u_tau.grid() != f.profile().grid() {
        return Err(Error::GridMismatch);
    }
    let k0 = cfg.lattice_index(tau)?;
    let n = step_count(tau, t_end, cfg)?;
    let mut solver = InnerSolver::new(u_tau.grid().len());
    let mut u = u_tau.clone().with_time(cfg.lattice_time(k0));
    let zero = InnerStats {
        residual: 0.0,
        iters: 0,
    };
    observe(&Monitor::of(e, 0, cfg.lattice_time(k0), &u, zero), &u);
    for j in 0..n {
        let t = cfg.lattice_time(k0 + j as i64);
        let (next, stats) = step_with(&mut solver, e, f, &u, t, cfg)?;
        let t_next = cfg.lattice_time(k0 + j as i64 + 1);
        u = next.with_time(t_next);
        let mon = Monitor::of(e, j + 1, t_next, &u, stats);
        if !mon.is_finite() {
            return Err(Error::NonFinite("trajectory monitors"));
        }
        observe(&mon, &u);
    }
    Ok(u)
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub monitors: Vec<Monitor>,
}

impl Trajectory {
    pub fn final_state(&self) -> &State {
        self.states
            .last()
            .expect("trajectory holds the initial state")
    }

    pub fn write_csv(&self, out: impl Write) -> Result<()> {
        write_monitors_csv(&self.monitors, out)
    }
}

pub fn write_monitors_csv(monitors: &[Monitor], mut out: impl Write) -> Result<()> {
    writeln!(
        out,
        "step,time,l2_norm,E_norm,energy,inner_residual,inner_iters"
    )?;
    for m in monitors {
        writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{:.16e},{:.16e},{}",
            m.step, m.time, m.l2_norm, m.e_norm, m.energy, m.inner_residual, m.inner_iters
        )?;
    }
    Ok(())
}

/// Evolves `u_tau` from `tau` to `t_end`, keeping every state.
pub fn evolve(
    e: &Energy,
    f: &Forcing,
    u_tau: &State,
    tau: f64,
    t_end: f64,
    cfg: &StepConfig,
) -> Result<Trajectory> {
    let mut traj = Trajectory {
        times: Vec::new(),
        states: Vec::new(),
        monitors: Vec::new(),
    };
    evolve_with(e, f, u_tau, tau, t_end, cfg, |m, u| {
        traj.times.push(m.time);
        traj.states.push(u.clone());
        traj.monitors.push(*m);
    })?;
    Ok(traj)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forcing::{Coupling, ForcingSpec, L1Profile};
    use crate::grid::{make_grid, norm_l2};
    use crate::operators::{apply_a, energy};
    use crate::weights::{make_weight, TheoryParams, WeightFamily};

    fn system(forced: bool) -> (Energy, Forcing) {
        let g = make_grid(1, 8.0, 257).unwrap();
        let w = make_weight(&g, &WeightFamily::default(), 0.0).unwrap();
        let e = Energy::new(w, TheoryParams::new(4.0, 5).unwrap());
        let spec = if forced {
            ForcingSpec::default()
        } else {
            ForcingSpec {
                l1: L1Profile::Constant { b0: 0.0 },
                coupling: Coupling::None,
                ..ForcingSpec::default()
            }
        };
        let f = Forcing::new(&g, spec).unwrap();
        (e, f)
    }

    fn smooth(e: &Energy, amp: f64) -> State {
        State::from_fn(e.weight().grid(), |x| {
            amp * (0.8 * x[0]).sin() * (-x[0] * x[0] / 8.0).exp()
        })
    }

    #[test]
    fn zero_is_fixed_without_forcing() {
        let (e, f) = system(false);
        let z = State::zeros(e.weight().grid());
        let (next, stats) = prox_step(&e, &f, &z, 0.0, &StepConfig::default()).unwrap();
        assert!(next.values().iter().all(|&v| v == 0.0));
        assert_eq!(stats.iters, 0);
    }

    #[test]
    fn residual_contract_and_dissipation() {
        let (e, f) = system(false);
        let cfg = StepConfig::default();
        let u = smooth(&e, 2.0);
        let (next, stats) = prox_step(&e, &f, &u, 0.0, &cfg).unwrap();
        let r = next
            .add_scaled(cfg.dt, &apply_a(&e, &next).unwrap())
            .unwrap()
            .sub(&u)
            .unwrap();
        assert!(norm_l2(&r) <= cfg.tol_inner * (1.0 + norm_l2(&u)));
        assert!(stats.residual <= cfg.tol_inner * (1.0 + norm_l2(&u)));
        assert!(energy(&e, &next).unwrap() <= energy(&e, &u).unwrap());
        assert!(norm_l2(&next) <= norm_l2(&u));
    }

    #[test]
    fn rejects_unstable_dt() {
        let (e, f) = system(true);
        let cfg = StepConfig {
            dt: 1.0,
            ..StepConfig::default()
        };
        let u = smooth(&e, 1.0);
        assert!(matches!(
            prox_step(&e, &f, &u, 0.0, &cfg),
            Err(Error::StepRejected(_))
        ));
    }

    #[test]
    fn nonconvergence_is_reported() {
        let (e, f) = system(true);
        let cfg = StepConfig {
            max_inner_iters: 1,
            ..StepConfig::default()
        };
        let u = smooth(&e, 3.0);
        assert!(matches!(
            prox_step(&e, &f, &u, 0.0, &cfg),
            Err(Error::InnerNonConvergence { iters: 1, .. })
        ));
    }

    #[test]
    fn identity_when_no_time_passes() {
        let (e, f) = system(true);
        let u = smooth(&e, 1.0);
        let traj = evolve(&e, &f, &u, 0.5, 0.5, &StepConfig::default()).unwrap();
        assert_eq!(traj.states.len(), 1);
        assert_eq!(traj.final_state().values(), u.values());
    }

    #[test]
    fn split_runs_compose_exactly() {
        let (e, f) = system(true);
        let cfg = StepConfig::default();
        let u = smooth(&e, 1.5);
        let whole = evolve(&e, &f, &u, -1.0, 0.5, &cfg).unwrap();
        let first = evolve(&e, &f, &u, -1.0, -0.2, &cfg).unwrap();
        let second = evolve(&e, &f, first.final_state(), -0.2, 0.5, &cfg).unwrap();
        assert_eq!(whole.final_state().values(), second.final_state().values());
        assert_eq!(whole.times.len(), 151);
        assert_eq!(whole.final_state().time(), Some(cfg.lattice_time(50)));
    }

    #[test]
    fn off_lattice_start_is_rejected() {
        let (e, f) = system(true);
        let u = smooth(&e, 1.0);
        assert!(evolve(&e, &f, &u, 0.005, 1.0, &StepConfig::default()).is_err());
    }

    #[test]
    fn csv_header() {
        let (e, f) = system(true);
        let u = smooth(&e, 1.0);
        let traj = evolve(&e, &f, &u, 0.0, 0.03, &StepConfig::default()).unwrap();
        let mut buf = Vec::new();
        traj.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("step,time,l2_norm,E_norm,energy,inner_residual,inner_iters\n"));
        assert_eq!(text.lines().count(), 5);
    }
}
