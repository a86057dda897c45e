//! The discrete weighted p-Laplacian `A`, its convex potential `φ` and the
//! monotonicity estimates used by the perturbation argument.

use crate::error::{Error, Result};
use crate::grid::{self, State};
use crate::weights::{TheoryParams, WeightField};

/// `|x|^e` with an integer fast path.
#[derive(Debug, Clone, Copy)]
struct AbsPow {
    e: f64,
    int: Option<i32>,
}

impl AbsPow {
    fn new(e: f64) -> Self {
        let int = (e.fract() == 0.0 && e.abs() < 64.0).then_some(e as i32);
        AbsPow { e, int }
    }

    #[inline]
    fn of(self, x: f64) -> f64 {
        match self.int {
            Some(0) => 1.0,
            Some(k) => x.abs().powi(k),
            None => x.abs().powf(self.e),
        }
    }
}

/// `φ(u) = (1/p) ‖u‖_E^p` for a fixed weight.
#[derive(Debug, Clone)]
pub struct Energy {
    weight: WeightField,
    tp: TheoryParams,
    pow_p: AbsPow,
    pow_pm2: AbsPow,
}

impl Energy {
    pub fn new(weight: WeightField, tp: TheoryParams) -> Self {
        Energy {
            pow_p: AbsPow::new(tp.p),
            pow_pm2: AbsPow::new(tp.p - 2.0),
            weight,
            tp,
        }
    }

    pub fn weight(&self) -> &WeightField {
        &self.weight
    }

    pub fn theory(&self) -> &TheoryParams {
        &self.tp
    }

    pub fn p(&self) -> f64 {
        self.tp.p
    }

    fn check(&self, u: &State) -> Result<()> {
        if u.grid() == self.weight.grid() {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `‖u‖_E^p`, split into gradient and potential parts.
    fn parts(&self, u: &State) -> (f64, f64) {
        let g = u.grid();
        let v = u.values();
        let inv_h = 1.0 / g.spacing();
        let mut grad_part = 0.0;
        for axis in 0..g.dim() {
            let stride = g.stride(axis);
            for (i, &fw) in g.face_weights(axis).iter().enumerate() {
                if fw > 0.0 {
                    grad_part += fw * self.pow_p.of((v[i + stride] - v[i]) * inv_h);
                }
            }
        }
        let mut pot = 0.0;
        for ((q, a), x) in g.node_weights().iter().zip(self.weight.values()).zip(v) {
            pot += q * a * self.pow_p.of(*x);
        }
        (grad_part, pot)
    }

    pub(crate) fn energy_unchecked(&self, u: &State) -> f64 {
        let (a, b) = self.parts(u);
        (a + b) / self.tp.p
    }

    /// Writes `A u` into `out` (boundary entries zero).
    pub(crate) fn apply_into(&self, u: &State, out: &mut [f64]) {
        let g = u.grid();
        let v = u.values();
        let inv_h = 1.0 / g.spacing();
        out.iter_mut().for_each(|o| *o = 0.0);
        // accumulate face fluxes weighted by face quadrature, then divide by node weight
        for axis in 0..g.dim() {
            let stride = g.stride(axis);
            for (i, &fw) in g.face_weights(axis).iter().enumerate() {
                if fw > 0.0 {
                    let d = (v[i + stride] - v[i]) * inv_h;
                    let flux = fw * self.pow_pm2.of(d) * d * inv_h;
                    out[i] -= flux;
                    out[i + stride] += flux;
                }
            }
        }
        let nw = g.node_weights();
        let a = self.weight.values();
        for i in 0..g.len() {
            if g.is_interior(i) {
                out[i] = out[i] / nw[i] + a[i] * self.pow_pm2.of(v[i]) * v[i];
            } else {
                out[i] = 0.0;
            }
        }
    }
}

pub fn energy(e: &Energy, u: &State) -> Result<f64> {
    e.check(u)?;
    Ok(e.energy_unchecked(u))
}

/// `A u = -div_h(|∇_h u|^{p-2} ∇_h u) + a |u|^{p-2} u` at interior nodes, scaled so
/// that `inner_l2(A u, v)` is the discrete duality pairing for every `v`.
pub fn apply_a(e: &Energy, u: &State) -> Result<State> {
    e.check(u)?;
    let mut out = vec![0.0; u.grid().len()];
    e.apply_into(u, &mut out);
    Ok(State::from_values_unchecked(u.grid(), out))
}

/// `⟨A u - A v, u - v⟩`, nonnegative by monotonicity.
pub fn monotonicity_gap(e: &Energy, u: &State, v: &State) -> Result<f64> {
    e.check(u)?;
    e.check(v)?;
    let au = apply_a(e, u)?;
    let av = apply_a(e, v)?;
    grid::inner_l2(&au.sub(&av)?, &u.sub(v)?)
}

/// Facewise/nodewise Tartar lower bound for [`monotonicity_gap`]:
/// `2^{2-p} (Σ_faces |∇(u-v)|^p + Σ_nodes a |u-v|^p)`.
pub fn tartar_lower_bound(e: &Energy, u: &State, v: &State) -> Result<f64> {
    e.check(u)?;
    let w = u.sub(v)?;
    let (a, b) = e.parts(&w);
    Ok(tartar_constant(e.p()) * (a + b))
}

/// `α = 2^{2-p}`.
pub fn tartar_constant(p: f64) -> f64 {
    2f64.powf(2.0 - p)
}

/// Returns `(lhs, rhs)` with `lhs = (|x|^{p-2}x - |y|^{p-2}y)·(x-y)` and
/// `rhs = 2^{2-p}|x-y|^p`; `lhs ≥ rhs` for `p ≥ 2`.
pub fn tartar_pointwise(x: &[f64], y: &[f64], p: f64) -> Result<(f64, f64)> {
    if !(p > 2.0) {
        return Err(Error::param("p", "must exceed 2"));
    }
    if x.len() != y.len() {
        return Err(Error::param("y", "vector lengths differ"));
    }
    let norm = |z: &[f64]| z.iter().map(|c| c * c).sum::<f64>().sqrt();
    let (nx, ny) = (norm(x), norm(y));
    let (sx, sy) = (nx.powf(p - 2.0), ny.powf(p - 2.0));
    let mut lhs = 0.0;
    let mut diff2 = 0.0;
    for (a, b) in x.iter().zip(y) {
        lhs += (sx * a - sy * b) * (a - b);
        diff2 += (a - b) * (a - b);
    }
    Ok((lhs, tartar_constant(p) * diff2.sqrt().powf(p)))
}
