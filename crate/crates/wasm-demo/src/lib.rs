//! Browser bindings: a live 1D simulation, the bound curves, and the weight
//! with its integrability constants.

use wasm_bindgen::prelude::*;
use wplap::bounds::{build_bounds, EtaChoice};
use wplap::forcing::{Coupling, Forcing, ForcingSpec, L1Profile};
use wplap::grid::{make_grid, norm_l2, Grid, State};
use wplap::operators::{energy, Energy};
use wplap::stepper::{prox_step, StepConfig};
use wplap::weights::{
    embedding_constant, integrability, make_weight, Perturbation, TheoryParams, WeightFamily,
};

fn js_err(e: wplap::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn coupling(name: &str) -> Result<Coupling, JsError> {
    match name {
        "none" => Ok(Coupling::None),
        "damping" => Ok(Coupling::Damping),
        "sine" => Ok(Coupling::Sine),
        other => Err(JsError::new(&format!("unknown coupling `{other}`"))),
    }
}

fn family(q: f64, width: f64) -> WeightFamily {
    WeightFamily::shifted(q, Perturbation::Gaussian { width })
}

/// One trajectory on `[-r_dom, r_dom]`, advanced a few steps per frame.
#[wasm_bindgen]
pub struct Simulation {
    grid: Grid,
    energy: Energy,
    forcing: Forcing,
    step: StepConfig,
    state: State,
    time: f64,
    last_iters: usize,
}

#[wasm_bindgen]
impl Simulation {
    #[wasm_bindgen(constructor)]
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        m: usize,
        r_dom: f64,
        p: f64,
        q: f64,
        eps: f64,
        coupling_name: &str,
        forcing_amp: f64,
        amplitude: f64,
        dt: f64,
    ) -> Result<Simulation, JsError> {
        let grid = make_grid(1, r_dom, m).map_err(js_err)?;
        let tp = TheoryParams::new(p, 5).map_err(js_err)?;
        let w = make_weight(&grid, &family(q, 1.0), eps).map_err(js_err)?;
        let spec = ForcingSpec {
            l1: L1Profile::Constant { b0: forcing_amp },
            coupling: coupling(coupling_name)?,
            ..ForcingSpec::default()
        };
        let forcing = Forcing::new(&grid, spec).map_err(js_err)?;
        let step = StepConfig {
            dt,
            tol_inner: 1e-7,
            max_inner_iters: 20_000,
        };
        step.validate(forcing.lipschitz()).map_err(js_err)?;
        let state = State::from_fn(&grid, |x| {
            amplitude * (1.3 * x[0]).sin() * (-x[0] * x[0] / 4.0).exp()
        });
        Ok(Simulation {
            grid,
            energy: Energy::new(w, tp),
            forcing,
            step,
            state,
            time: 0.0,
            last_iters: 0,
        })
    }

    /// Advances `n` proximal steps.
    pub fn advance(&mut self, n: usize) -> Result<(), JsError> {
        for _ in 0..n {
            let (next, stats) = prox_step(
                &self.energy,
                &self.forcing,
                &self.state,
                self.time,
                &self.step,
            )
            .map_err(js_err)?;
            self.time += self.step.dt;
            self.state = next;
            self.last_iters = stats.iters;
        }
        Ok(())
    }

    /// Node coordinates.
    pub fn xs(&self) -> Vec<f64> {
        (0..self.grid.len())
            .map(|i| self.grid.coords(i)[0])
            .collect()
    }

    pub fn values(&self) -> Vec<f64> {
        self.state.values().to_vec()
    }

    pub fn weight(&self) -> Vec<f64> {
        self.energy.weight().values().to_vec()
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn l2_norm(&self) -> f64 {
        norm_l2(&self.state)
    }

    pub fn energy(&self) -> f64 {
        energy(&self.energy, &self.state).unwrap_or(f64::NAN)
    }

    pub fn inner_iters(&self) -> usize {
        self.last_iters
    }
}

/// `[t, δ, β₁, β₂]` rows, flattened, for a ramp `L₁(t) = b0 + b1 (t - t0)⁺`.
#[wasm_bindgen]
#[allow(clippy::too_many_arguments)]
pub fn bound_curves(
    p: f64,
    q: f64,
    lipschitz: f64,
    b0: f64,
    b1: f64,
    t_start: f64,
    t_end: f64,
    samples: usize,
) -> Result<Vec<f64>, JsError> {
    let grid = make_grid(1, 8.0, 257).map_err(js_err)?;
    let tp = TheoryParams::new(p, 5).map_err(js_err)?;
    let w0 = make_weight(&grid, &WeightFamily::polynomial(q), 0.0).map_err(js_err)?;
    let c = embedding_constant(&w0, &tp).map_err(js_err)?;
    let l1 = L1Profile::Ramp {
        b0,
        b1,
        t0: t_start,
    };
    let br = build_bounds(
        &tp,
        c,
        lipschitz,
        l1,
        EtaChoice::Optimize { t_ref: t_start },
    )
    .map_err(js_err)?;
    let n = samples.max(2);
    let mut out = Vec::with_capacity(4 * n);
    for k in 0..n {
        let t = t_start + (t_end - t_start) * k as f64 / (n - 1) as f64;
        out.extend([t, br.delta(t), br.beta1(t), br.beta2(t)]);
    }
    Ok(out)
}

/// `[∫a₀^{-2/(p-2)}, finite-on-ℝⁿ flag, c_embed, c_coerc]`.
#[wasm_bindgen]
pub fn weight_constants(p: f64, n_theory: usize, q: f64) -> Result<Vec<f64>, JsError> {
    let grid = make_grid(1, 8.0, 257).map_err(js_err)?;
    let tp = TheoryParams::new(p, n_theory).map_err(js_err)?;
    let w0 = make_weight(&grid, &WeightFamily::polynomial(q), 0.0).map_err(js_err)?;
    let integ = integrability(&w0, &tp);
    let c = embedding_constant(&w0, &tp).map_err(js_err)?;
    Ok(vec![
        integ.value,
        f64::from(u8::from(integ.finite_on_whole_space)),
        c,
        c.powf(-p / 2.0),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn simulation_runs_and_dissipates() {
        let mut s = Simulation::new(129, 8.0, 4.0, 6.0, 0.2, "none", 0.0, 3.0, 0.01).unwrap();
        let e0 = s.energy();
        s.advance(50).unwrap();
        assert!(s.energy() < e0);
        assert!((s.time() - 0.5).abs() < 1e-12);
        assert_eq!(s.xs().len(), s.values().len());
    }

    #[test]
    fn curves_have_four_columns() {
        let c = bound_curves(4.0, 6.0, 1.0, 1.0, 0.1, -5.0, 5.0, 11).unwrap();
        assert_eq!(c.len(), 44);
        assert!(c.chunks(4).all(|r| r[2] >= 1.0 && r[3] > 0.0));
    }

    #[test]
    fn weight_constants_report_verdict() {
        let v = weight_constants(4.0, 5, 6.0).unwrap();
        assert_eq!(v[1], 1.0);
        assert!((v[2] - (v[0] + 1.0).sqrt()).abs() < 1e-12);
        assert_eq!(weight_constants(4.0, 5, 2.0).unwrap()[1], 0.0);
    }
}
