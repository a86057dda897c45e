//! Closed-form dissipativity and perturbation constants, together with
//! numerical oracles for the two comparison lemmas they rely on.
//!
//! Conventions: `θ = p/2`, `θ'` its conjugate, `p'` the conjugate of `p`.
//! `c_coerc = c_embed^{-p/2}` is the constant in `‖u‖_E^p ≥ c_coerc ‖u‖_{L²}^p`.

use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::forcing::L1Profile;
use crate::weights::TheoryParams;

/// How the Young parameter `η` is picked.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EtaChoice {
    /// Minimise `β₁(t_ref)` over the feasible interval.
    Optimize {
        t_ref: f64,
    },
    Fixed(f64),
}

impl Default for EtaChoice {
    fn default() -> Self {
        EtaChoice::Optimize { t_ref: 0.0 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BoundsReport {
    pub p: f64,
    pub theta: f64,
    pub theta_conj: f64,
    pub p_conj: f64,
    pub c_embed: f64,
    pub c_coerc: f64,
    pub lipschitz: f64,
    pub l1: L1Profile,
    pub eta: f64,
    /// Upper end of the feasible `η` interval (`γ(η_max) = 0`).
    pub eta_max: f64,
    pub gamma: f64,
    pub t1: f64,
    pub t2: f64,
    pub r_window: f64,
    pub a1: f64,
}

/// `η^θ/θ + η^p/p`
fn young_loss(eta: f64, p: f64) -> f64 {
    let theta = p / 2.0;
    eta.powf(theta) / theta + eta.powf(p) / p
}

pub fn build_bounds(
    tp: &TheoryParams,
    c_embed: f64,
    lipschitz: f64,
    l1: L1Profile,
    choice: EtaChoice,
) -> Result<BoundsReport> {
    if !(c_embed >= 1.0) || !c_embed.is_finite() {
        return Err(Error::param("c_embed", "must be finite and >= 1"));
    }
    if !(lipschitz > 0.0) || !lipschitz.is_finite() {
        return Err(Error::param("forcing.lipschitz", "must be positive"));
    }
    let p = tp.p;
    let c_coerc = c_embed.powf(-p / 2.0);
    if !(c_coerc > 0.0) {
        return Err(Error::NoFeasibleEta { c_coerc });
    }
    // young_loss is increasing in η; bracket and bisect for γ(η_max) = 0
    let mut hi = 1.0;
    while young_loss(hi, p) < c_coerc {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if young_loss(mid, p) < c_coerc {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let eta_max = lo;
    if !(eta_max > 0.0) {
        return Err(Error::NoFeasibleEta { c_coerc });
    }

    let mut report = BoundsReport {
        p,
        theta: tp.theta,
        theta_conj: tp.theta_conj,
        p_conj: tp.p_conj,
        c_embed,
        c_coerc,
        lipschitz,
        l1,
        eta: f64::NAN,
        eta_max,
        gamma: f64::NAN,
        t1: f64::NAN,
        t2: f64::NAN,
        r_window: f64::NAN,
        a1: f64::NAN,
    };
    let eta = match choice {
        EtaChoice::Fixed(eta) => {
            if !(eta > 0.0 && eta < eta_max) {
                return Err(Error::NoFeasibleEta { c_coerc });
            }
            eta
        }
        EtaChoice::Optimize { t_ref } => {
            let objective = |log_eta: f64| {
                let mut r = report.clone();
                r.set_eta(log_eta.exp());
                r.beta1(t_ref)
            };
            golden_section(objective, (eta_max * 1e-8).ln(), eta_max.ln() - 1e-12, 200).exp()
        }
    };
    report.set_eta(eta);
    if !(report.gamma > 0.0) {
        return Err(Error::NoFeasibleEta { c_coerc });
    }
    Ok(report)
}

/// Minimiser of a unimodal function on `[a, b]`.
fn golden_section(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    for _ in 0..iters {
        if (b - a).abs() < 1e-13 {
            break;
        }
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

impl BoundsReport {
    fn set_eta(&mut self, eta: f64) {
        self.eta = eta;
        self.gamma = self.c_coerc - young_loss(eta, self.p);
        self.t1 = 2.0 / (self.gamma * (self.p - 2.0));
        self.t2 = 2.0 * self.t1;
        self.r_window = self.t1;
        self.a1 = self.r_window * self.p / self.theta;
    }

    pub fn l1_at(&self, t: f64) -> f64 {
        self.l1.eval(t)
    }

    /// `δ(t) = (1/θ')(L/η)^{θ'} + (1/p')(L₁(t)/η)^{p'}`
    pub fn delta(&self, t: f64) -> f64 {
        (self.lipschitz / self.eta).powf(self.theta_conj) / self.theta_conj
            + (self.l1_at(t) / self.eta).powf(self.p_conj) / self.p_conj
    }

    /// `[γ/2 (p-2) s]^{-2/(p-2)}`, the transient part of the L² bound.
    pub fn transient(&self, s: f64) -> f64 {
        (0.5 * self.gamma * (self.p - 2.0) * s).powf(-2.0 / (self.p - 2.0))
    }

    /// Bound on `½‖u(t)‖²` valid for every `t > tau`.
    pub fn l2_half_bound(&self, t: f64, tau: f64) -> f64 {
        (self.delta(t) / self.gamma).powf(2.0 / self.p) + self.transient(t - tau)
    }

    /// `β₁(t) = (δ(t)/γ)^{2/p} + 1`, bounding `½‖u(t)‖²` for `t ≥ τ + T₁`.
    pub fn beta1(&self, t: f64) -> f64 {
        (self.delta(t) / self.gamma).powf(2.0 / self.p) + 1.0
    }

    /// `a₂(t) = (Rp/θ') L^{2θ'} + R p L₁(t+R)²`
    pub fn a2(&self, t: f64) -> f64 {
        let r = self.r_window;
        r * self.p / self.theta_conj * self.lipschitz.powf(2.0 * self.theta_conj)
            + r * self.p * self.l1_at(t + r).powi(2)
    }

    /// `a₃(t) = ½β₁(t) + R L β₁(t+R) + R L₁(t+R) β₁(t+R)^{1/2}`
    pub fn a3(&self, t: f64) -> f64 {
        let r = self.r_window;
        let b_next = self.beta1(t + r);
        0.5 * self.beta1(t) + r * self.lipschitz * b_next + r * self.l1_at(t + r) * b_next.sqrt()
    }

    /// `β₂(t) = (a₃(t)/R + a₂(t)) e^{a₁}`, bounding `‖u(t)‖_E^p` for `t ≥ τ + T₂`.
    pub fn beta2(&self, t: f64) -> f64 {
        (self.a3(t) / self.r_window + self.a2(t)) * self.a1.exp()
    }

    /// A-priori perturbation constant: `‖u‖_{L^p} ≤ ‖u‖_E ≤ β₂^{1/p}` gives
    /// `‖u⁰‖_p^p + ‖u⁰‖_p^{p-1}‖u^ε‖_p ≤ 2 β₂(t)`.
    pub fn m_apriori(&self, t: f64) -> f64 {
        2.0 * self.beta2(t)
    }

    pub fn perturbation_constants(&self, tau: f64, t: f64) -> PerturbationConstants {
        let m = self.m_apriori(t);
        PerturbationConstants {
            tau,
            t,
            m_apriori: m,
            m_tilde: m_tilde(self.lipschitz, m, t, tau),
        }
    }

    pub fn to_json(&self, window: Option<(f64, f64)>) -> serde_json::Value {
        let mut v = serde_json::to_value(self).expect("report is serialisable");
        if let Some((tau, t)) = window {
            v["perturbation"] =
                serde_json::to_value(self.perturbation_constants(tau, t)).expect("serialisable");
        }
        v
    }

    /// Writes `(t, δ, β₁, β₂, envelope)` rows; the envelope uses zero initial
    /// gap, the a-priori `M` at the window end, and the given weight gap.
    pub fn write_curves_csv(
        &self,
        times: &[f64],
        tau: f64,
        weight_gap: f64,
        mut out: impl Write,
    ) -> Result<()> {
        writeln!(out, "t,delta,beta1,beta2,envelope")?;
        let m = times.last().map_or(0.0, |&t| self.m_apriori(t));
        for &t in times {
            let env = perturbation_envelope(self.lipschitz, m, t, tau, 0.0, weight_gap)?;
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                t,
                self.delta(t),
                self.beta1(t),
                self.beta2(t),
                env
            )?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PerturbationConstants {
    pub tau: f64,
    pub t: f64,
    pub m_apriori: f64,
    pub m_tilde: f64,
}

/// Convenience wrapper matching the report field.
pub fn beta2_curve(report: &BoundsReport, t: f64) -> f64 {
    report.beta2(t)
}

/// `(gap0 + 2M(t-τ)‖a_ε - a_0‖_∞) e^{2L(t-τ)}`
pub fn perturbation_envelope(
    lipschitz: f64,
    m: f64,
    t: f64,
    tau: f64,
    gap0: f64,
    weight_gap: f64,
) -> Result<f64> {
    if !(t >= tau) {
        return Err(Error::param("t", "must not precede tau"));
    }
    if !(gap0 >= 0.0) || !(weight_gap >= 0.0) {
        return Err(Error::param(
            "gap",
            "initial and weight gaps must be nonnegative",
        ));
    }
    let s = t - tau;
    Ok((gap0 + 2.0 * m * s * weight_gap) * (2.0 * lipschitz * s).exp())
}

/// `M̃ = max(1, 2M(t-τ)) e^{2L(t-τ)}` on the window `[τ, t]`.
pub fn m_tilde(lipschitz: f64, m: f64, t: f64, tau: f64) -> f64 {
    let s = t - tau;
    (2.0 * m * s).max(1.0) * (2.0 * lipschitz * s).exp()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

/// Integrates the comparison ODE `y' = 2(δ(t) - γ y^θ)`, `y(0) = y0`, on
/// `[0, horizon]` (time measured from `τ`) with classical RK4 and a step
/// limited by the local stiffness `2γθ y^{θ-1}`.
pub fn ode_decay_oracle(
    gamma: f64,
    theta: f64,
    delta: impl Fn(f64) -> f64,
    y0: f64,
    horizon: f64,
) -> Result<Curve> {
    if !(gamma > 0.0) || !(theta > 1.0) || !(y0 >= 0.0) || !(horizon >= 0.0) {
        return Err(Error::param(
            "ode",
            "need gamma > 0, theta > 1, y0 >= 0, horizon >= 0",
        ));
    }
    let rhs = |t: f64, y: f64| 2.0 * (delta(t) - gamma * y.max(0.0).powf(theta));
    let h_max = (horizon / 2000.0).max(1e-6);
    let mut t = 0.0;
    let mut y = y0;
    let mut curve = Curve {
        times: vec![0.0],
        values: vec![y0],
    };
    while t < horizon {
        let stiff = 2.0 * gamma * theta * y.max(1e-300).powf(theta - 1.0);
        let h = (0.05 / stiff).min(h_max).min(horizon - t);
        let k1 = rhs(t, y);
        let k2 = rhs(t + h / 2.0, y + h / 2.0 * k1);
        let k3 = rhs(t + h / 2.0, y + h / 2.0 * k2);
        let k4 = rhs(t + h, y + h * k3);
        y += h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        t += h;
        if !y.is_finite() || y > 1e300 {
            return Err(Error::NonFinite("comparison ODE (blow-up)"));
        }
        curve.times.push(t);
        curve.values.push(y);
    }
    Ok(curve)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GronwallCheck {
    pub holds: bool,
    pub bound: f64,
    pub value: f64,
    /// `bound - value`; negative on violation.
    pub margin: f64,
}

/// Checks the uniform-Gronwall conclusion `y(t+R) ≤ (a₃/R + a₂) e^{a₁}` for a
/// curve sampled on `[t, t+R]` (last sample is `y(t+R)`).
pub fn uniform_gronwall_oracle(
    a1: f64,
    a2: f64,
    a3: f64,
    r: f64,
    y: &[f64],
) -> Result<GronwallCheck> {
    if !(r > 0.0) {
        return Err(Error::param("R", "window must be positive"));
    }
    let value = *y.last().ok_or(Error::param("y", "empty curve"))?;
    if y.iter().any(|v| !(*v >= 0.0)) {
        return Err(Error::param("y", "samples must be nonnegative"));
    }
    let bound = (a3 / r + a2) * a1.exp();
    Ok(GronwallCheck {
        holds: value <= bound,
        bound,
        value,
        margin: bound - value,
    })
}
