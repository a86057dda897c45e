//! Nonautonomous forcing `B(t, u) = L₁(t) φ̂ + coupling(u)`, globally Lipschitz in
//! `u` with constant `L` and with `‖B(t, 0)‖ = L₁(t)` nondecreasing.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{norm_l2, Grid, State};

/// Analytic families for `L₁(t) = ‖B(t, 0)‖_{L²}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum L1Profile {
    Constant {
        b0: f64,
    },
    /// `b0 + b1 max(0, t - t0)`
    Ramp {
        b0: f64,
        b1: f64,
        t0: f64,
    },
    /// `b0 exp(b1 min(t, t_cap))`
    Exponential {
        b0: f64,
        b1: f64,
        t_cap: f64,
    },
}

impl L1Profile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            L1Profile::Constant { b0 } => b0,
            L1Profile::Ramp { b0, b1, t0 } => b0 + b1 * (t - t0).max(0.0),
            L1Profile::Exponential { b0, b1, t_cap } => b0 * (b1 * t.min(t_cap)).exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        let (b0, b1) = match *self {
            L1Profile::Constant { b0 } => (b0, 0.0),
            L1Profile::Ramp { b0, b1, t0 } => {
                if !t0.is_finite() {
                    return Err(Error::param("forcing.l1.t0", "must be finite"));
                }
                (b0, b1)
            }
            L1Profile::Exponential { b0, b1, t_cap } => {
                if !t_cap.is_finite() {
                    return Err(Error::param("forcing.l1.t_cap", "must be finite"));
                }
                (b0, b1)
            }
        };
        if !(b0 >= 0.0) || !b0.is_finite() {
            return Err(Error::param("forcing.l1.b0", "must be nonnegative"));
        }
        if !(b1 >= 0.0) || !b1.is_finite() {
            return Err(Error::param(
                "forcing.l1.b1",
                "must be nonnegative (L1 nondecreasing)",
            ));
        }
        Ok(())
    }
}

/// Nodewise nonlinearity with Lipschitz constant `L`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Coupling {
    None,
    /// `u ↦ -L tanh(u)`
    Damping,
    /// `u ↦ L sin(u)`
    Sine,
}

/// Gaussian bump, normalised to unit discrete L² norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpatialProfile {
    #[serde(default)]
    pub center: Vec<f64>,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingSpec {
    pub lipschitz: f64,
    pub l1: L1Profile,
    pub profile: SpatialProfile,
    pub coupling: Coupling,
}

impl Default for ForcingSpec {
    fn default() -> Self {
        ForcingSpec {
            lipschitz: 1.0,
            l1: L1Profile::Ramp {
                b0: 1.0,
                b1: 0.1,
                t0: -5.0,
            },
            profile: SpatialProfile {
                center: vec![1.0],
                width: 1.5,
            },
            coupling: Coupling::Damping,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Forcing {
    spec: ForcingSpec,
    profile: State,
}

impl Forcing {
    pub fn new(grid: &Grid, spec: ForcingSpec) -> Result<Self> {
        if !(spec.lipschitz > 0.0) || !spec.lipschitz.is_finite() {
            return Err(Error::param("forcing.lipschitz", "must be positive"));
        }
        spec.l1.validate()?;
        let SpatialProfile { center, width } = &spec.profile;
        if !(*width > 0.0) {
            return Err(Error::param("forcing.profile.width", "must be positive"));
        }
        if center.len() > grid.dim() {
            return Err(Error::param(
                "forcing.profile.center",
                "more entries than dimensions",
            ));
        }
        let raw = State::from_fn(grid, |x| {
            let r2: f64 = x
                .iter()
                .enumerate()
                .map(|(k, xk)| {
                    let c = center.get(k).copied().unwrap_or(0.0);
                    (xk - c) * (xk - c)
                })
                .sum();
            (-r2 / (2.0 * width * width)).exp()
        });
        let n = norm_l2(&raw);
        if !(n > 0.0) {
            return Err(Error::param("forcing.profile", "vanishes on the grid"));
        }
        Ok(Forcing {
            profile: raw.scaled(1.0 / n),
            spec,
        })
    }

    pub fn spec(&self) -> &ForcingSpec {
        &self.spec
    }

    pub fn lipschitz(&self) -> f64 {
        self.spec.lipschitz
    }

    /// Unit-norm spatial profile `φ̂`.
    pub fn profile(&self) -> &State {
        &self.profile
    }

    pub fn l1(&self) -> L1Profile {
        self.spec.l1
    }

    #[inline]
    fn couple(&self, u: f64) -> f64 {
        let l = self.spec.lipschitz;
        match self.spec.coupling {
            Coupling::None => 0.0,
            Coupling::Damping => -l * u.tanh(),
            Coupling::Sine => l * u.sin(),
        }
    }

    /// Writes `B(t, u)` into `out`.
    pub(crate) fn eval_into(&self, t: f64, u: &[f64], out: &mut [f64]) {
        let l1 = self.spec.l1.eval(t);
        for ((o, &x), &phi) in out.iter_mut().zip(u).zip(self.profile.values()) {
            *o = l1 * phi + self.couple(x);
        }
    }
}

pub fn eval_b(f: &Forcing, t: f64, u: &State) -> Result<State> {
    if u.grid() != f.profile.grid() {
        return Err(Error::GridMismatch);
    }
    let mut out = vec![0.0; u.values().len()];
    f.eval_into(t, u.values(), &mut out);
    Ok(State::from_values_unchecked(u.grid(), out))
}

pub fn l1_profile(f: &Forcing, t: f64) -> f64 {
    f.spec.l1.eval(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{dist_l2, make_grid};

    fn grid() -> Grid {
        make_grid(1, 8.0, 257).unwrap()
    }

    #[test]
    fn ramp_arithmetic() {
        let r = L1Profile::Ramp {
            b0: 1.0,
            b1: 2.0,
            t0: 0.0,
        };
        assert_eq!(r.eval(3.0), 7.0);
        assert_eq!(r.eval(-3.0), 1.0);
        let e = L1Profile::Exponential {
            b0: 2.0,
            b1: 0.5,
            t_cap: 4.0,
        };
        assert_eq!(e.eval(10.0), e.eval(4.0));
    }

    #[test]
    fn profiles_nondecreasing() {
        let fams = [
            L1Profile::Constant { b0: 0.7 },
            L1Profile::Ramp {
                b0: 1.0,
                b1: 0.3,
                t0: -2.0,
            },
            L1Profile::Exponential {
                b0: 1.0,
                b1: 0.2,
                t_cap: 5.0,
            },
        ];
        for f in fams {
            let mut prev = f64::NEG_INFINITY;
            for k in -200..200 {
                let v = f.eval(k as f64 * 0.05);
                assert!(v >= prev && v.is_finite());
                prev = v;
            }
        }
    }

    #[test]
    fn zero_forcing() {
        let g = grid();
        let spec = ForcingSpec {
            l1: L1Profile::Constant { b0: 0.0 },
            coupling: Coupling::None,
            ..ForcingSpec::default()
        };
        let f = Forcing::new(&g, spec).unwrap();
        let u = State::from_fn(&g, |x| x[0].cos());
        let b = eval_b(&f, 1.0, &u).unwrap();
        assert!(b.values().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn norm_at_zero_is_l1() {
        let g = grid();
        for coupling in [Coupling::None, Coupling::Damping, Coupling::Sine] {
            let f = Forcing::new(
                &g,
                ForcingSpec {
                    coupling,
                    ..ForcingSpec::default()
                },
            )
            .unwrap();
            for t in [-10.0, 0.0, 2.5, 30.0] {
                let b = eval_b(&f, t, &State::zeros(&g)).unwrap();
                let l1 = l1_profile(&f, t);
                assert!((norm_l2(&b) - l1).abs() <= 1e-10 * l1);
            }
        }
    }

    #[test]
    fn sine_coupling_lipschitz_sharp() {
        let g = grid();
        let f = Forcing::new(
            &g,
            ForcingSpec {
                coupling: Coupling::Sine,
                ..ForcingSpec::default()
            },
        )
        .unwrap();
        // tiny difference around u = 0, where sin' = 1
        let u = State::zeros(&g);
        let v = State::from_fn(&g, |x| 1e-6 * (-x[0] * x[0]).exp());
        let num = dist_l2(&eval_b(&f, 0.0, &u).unwrap(), &eval_b(&f, 0.0, &v).unwrap()).unwrap();
        let den = dist_l2(&u, &v).unwrap();
        assert!(num / den > 0.999_999 && num / den <= 1.0 + 1e-10);
    }

    #[test]
    fn rejects_bad_specs() {
        let g = grid();
        let bad_l = ForcingSpec {
            lipschitz: 0.0,
            ..ForcingSpec::default()
        };
        assert!(Forcing::new(&g, bad_l).is_err());
        let decreasing = ForcingSpec {
            l1: L1Profile::Ramp {
                b0: 1.0,
                b1: -1.0,
                t0: 0.0,
            },
            ..ForcingSpec::default()
        };
        assert!(Forcing::new(&g, decreasing).is_err());
        let f = Forcing::new(&g, ForcingSpec::default()).unwrap();
        let other = State::zeros(&make_grid(1, 8.0, 129).unwrap());
        assert!(matches!(eval_b(&f, 0.0, &other), Err(Error::GridMismatch)));
    }
}
