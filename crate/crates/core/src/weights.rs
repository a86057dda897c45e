//! Weight functions `a_ε ≥ 1`, the integrability condition on `a_0`, and the
//! embedding and tail constants derived from it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, State};

/// Exponent bookkeeping for a given `p` and "theory" dimension `n`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TheoryParams {
    pub p: f64,
    pub n_theory: usize,
    /// `pn/(n-p)` when `n > p`.
    pub p_star: Option<f64>,
    /// `p / 2`
    pub theta: f64,
    /// Hölder conjugate of `theta`, equal to `p / (p - 2)`.
    pub theta_conj: f64,
    pub p_conj: f64,
}

impl TheoryParams {
    pub fn new(p: f64, n_theory: usize) -> Result<Self> {
        if !(p > 2.0) || !p.is_finite() {
            return Err(Error::param("p", format!("must satisfy 2 < p, got {p}")));
        }
        if n_theory == 0 {
            return Err(Error::param("n_theory", "must be positive"));
        }
        let n = n_theory as f64;
        let theta = p / 2.0;
        Ok(TheoryParams {
            p,
            n_theory,
            p_star: (n > p).then(|| p * n / (n - p)),
            theta,
            theta_conj: theta / (theta - 1.0),
            p_conj: p / (p - 1.0),
        })
    }

    /// Whether `2 < p < n` holds for the theory dimension. Reported, never enforced.
    pub fn dimension_condition(&self) -> bool {
        self.p < self.n_theory as f64
    }

    /// Exponent `2/(p-2)` of the integrability condition.
    pub fn integrability_exponent(&self) -> f64 {
        2.0 / (self.p - 2.0)
    }
}

/// Unperturbed weight `a_0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum BaseWeight {
    /// `a_0 ≡ 1`; never integrable on an unbounded domain.
    Unit,
    /// `a_0(x) = 1 + |x|^q`.
    Polynomial { q: f64 },
}

/// Bounded nonnegative perturbation profile `g`, scaled by `ε`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Perturbation {
    None,
    /// `g ≡ 1`
    Constant,
    /// `g(x) = exp(-|x|² / (2 width²))`
    Gaussian {
        width: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightFamily {
    pub base: BaseWeight,
    pub perturbation: Perturbation,
}

impl Default for WeightFamily {
    fn default() -> Self {
        WeightFamily {
            base: BaseWeight::Polynomial { q: 6.0 },
            perturbation: Perturbation::Gaussian { width: 1.0 },
        }
    }
}

impl WeightFamily {
    pub fn polynomial(q: f64) -> Self {
        WeightFamily {
            base: BaseWeight::Polynomial { q },
            perturbation: Perturbation::None,
        }
    }

    pub fn shifted(q: f64, perturbation: Perturbation) -> Self {
        WeightFamily {
            base: BaseWeight::Polynomial { q },
            perturbation,
        }
    }

    pub fn base_value(&self, r: f64) -> f64 {
        match self.base {
            BaseWeight::Unit => 1.0,
            BaseWeight::Polynomial { q } => 1.0 + r.powf(q),
        }
    }

    pub fn perturbation_value(&self, r: f64) -> f64 {
        match self.perturbation {
            Perturbation::None => 0.0,
            Perturbation::Constant => 1.0,
            Perturbation::Gaussian { width } => (-r * r / (2.0 * width * width)).exp(),
        }
    }

    /// Analytic `‖g‖_∞` over ℝⁿ.
    pub fn perturbation_sup(&self) -> f64 {
        match self.perturbation {
            Perturbation::None => 0.0,
            Perturbation::Constant | Perturbation::Gaussian { .. } => 1.0,
        }
    }

    /// Analytic `‖a_ε - a_0‖_∞`.
    pub fn weight_gap(&self, eps: f64) -> f64 {
        eps * self.perturbation_sup()
    }

    /// Whether `∫_{ℝⁿ} a_0^{-2/(p-2)} dx` is finite, decided analytically.
    pub fn integrable_on_whole_space(&self, tp: &TheoryParams) -> bool {
        match self.base {
            BaseWeight::Unit => false,
            // borderline 2q/(p-2) = n diverges logarithmically
            BaseWeight::Polynomial { q } => q * tp.integrability_exponent() > tp.n_theory as f64,
        }
    }

    fn validate(&self) -> Result<()> {
        if let BaseWeight::Polynomial { q } = self.base {
            if !(q > 0.0) || !q.is_finite() {
                return Err(Error::param(
                    "weights.base.q",
                    format!("must be positive, got {q}"),
                ));
            }
        }
        if let Perturbation::Gaussian { width } = self.perturbation {
            if !(width > 0.0) || !width.is_finite() {
                return Err(Error::param(
                    "weights.perturbation.width",
                    "must be positive",
                ));
            }
        }
        Ok(())
    }
}

/// Sampled `a_ε` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightField {
    grid: Grid,
    values: Vec<f64>,
    family: WeightFamily,
    eps: f64,
}

pub fn make_weight(grid: &Grid, family: &WeightFamily, eps: f64) -> Result<WeightField> {
    family.validate()?;
    if !(0.0..=1.0).contains(&eps) {
        return Err(Error::param(
            "weights.eps",
            format!("must lie in [0, 1], got {eps}"),
        ));
    }
    let values = (0..grid.len())
        .map(|i| {
            let r = grid.radius(i);
            family.base_value(r) + eps * family.perturbation_value(r)
        })
        .collect();
    Ok(WeightField {
        grid: grid.clone(),
        values,
        family: *family,
        eps,
    })
}

impl WeightField {
    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn family(&self) -> &WeightFamily {
        &self.family
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// The `ε = 0` member on the same grid.
    pub fn base(&self) -> WeightField {
        make_weight(&self.grid, &self.family, 0.0).expect("family already validated")
    }

    /// `max_nodes |a_ε - a_0|` measured on the lattice.
    pub fn lattice_gap(&self) -> f64 {
        (0..self.grid.len())
            .map(|i| self.eps * self.family.perturbation_value(self.grid.radius(i)))
            .fold(0.0, f64::max)
    }

    /// Analytic `‖a_ε - a_0‖_∞`.
    pub fn weight_gap(&self) -> f64 {
        self.family.weight_gap(self.eps)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Integrability {
    /// Quadrature of `∫ a^{-2/(p-2)}` over the truncated box.
    pub value: f64,
    /// Analytic verdict for the family on ℝⁿ (theory dimension).
    pub finite_on_whole_space: bool,
}

pub fn integrability(w: &WeightField, tp: &TheoryParams) -> Integrability {
    let e = tp.integrability_exponent();
    let value = w
        .grid
        .node_weights()
        .iter()
        .zip(&w.values)
        .map(|(q, a)| q * a.powf(-e))
        .sum();
    Integrability {
        value,
        finite_on_whole_space: w.family.integrable_on_whole_space(tp),
    }
}

/// Quadrature of `∫_{|x| > R} a^{-2/(p-2)}` over the lattice.
pub fn tail_mass(w: &WeightField, tp: &TheoryParams, radius: f64) -> Result<f64> {
    let half_width = w.grid.half_width();
    if !(radius > 0.0) || radius > half_width {
        return Err(Error::RadiusOutOfDomain { radius, half_width });
    }
    let e = tp.integrability_exponent();
    Ok((0..w.grid.len())
        .filter(|&i| w.grid.radius(i) > radius)
        .map(|i| w.grid.node_weights()[i] * w.values[i].powf(-e))
        .sum())
}

/// `c = (∫ a_0^{-2/(p-2)} + 1)^{1/θ'}`, valid for every member with `‖a_ε - a_0‖_∞ ≤ 1`.
pub fn embedding_constant(w0: &WeightField, tp: &TheoryParams) -> Result<f64> {
    if w0.eps != 0.0 {
        return Err(Error::param(
            "weights.eps",
            "embedding constant must be computed from the eps = 0 member",
        ));
    }
    Ok(embedding_constant_from_integral(
        integrability(w0, tp).value,
        tp,
    ))
}

pub fn embedding_constant_from_integral(integral: f64, tp: &TheoryParams) -> f64 {
    (integral + 1.0).powf(1.0 / tp.theta_conj)
}

/// Right-hand side of the weighted Hölder chain,
/// `[∫ a^{-2/(p-2)}]^{1/θ'} [∫ a |u|^p]^{2/p}`, restricted to `|x| > radius`
/// when a radius is given.
pub fn holder_bound(w: &WeightField, tp: &TheoryParams, u: &State, radius: Option<f64>) -> f64 {
    let g = &w.grid;
    let e = tp.integrability_exponent();
    let (mut inv, mut pot) = (0.0, 0.0);
    for i in 0..g.len() {
        if radius.is_some_and(|r| g.radius(i) <= r) {
            continue;
        }
        let q = g.node_weights()[i];
        inv += q * w.values[i].powf(-e);
        pot += q * w.values[i] * u.values()[i].abs().powf(tp.p);
    }
    inv.powf(1.0 / tp.theta_conj) * pot.powf(2.0 / tp.p)
}
