//! Run configuration: a TOML file with one table per module.
//!
//! Every key has a default, so an empty file is a valid configuration of the
//! reference scenario. Unknown keys are rejected. Validation errors carry the
//! dotted path of the offending field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attractor::PullbackConfig;
use crate::bounds::EtaChoice;
use crate::error::{Error, Result};
use crate::forcing::{Forcing, ForcingSpec};
use crate::grid::{make_grid, Grid, State};
use crate::operators::Energy;
use crate::sample;
use crate::stepper::StepConfig;
use crate::weights::{make_weight, BaseWeight, Perturbation, TheoryParams, WeightFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    Simulate,
    Bounds,
    Attractor,
    Perturb,
    Sweep,
}

impl Experiment {
    pub const ALL: [Experiment; 5] = [
        Experiment::Simulate,
        Experiment::Bounds,
        Experiment::Attractor,
        Experiment::Perturb,
        Experiment::Sweep,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Simulate => "simulate",
            Experiment::Bounds => "bounds",
            Experiment::Attractor => "attractor",
            Experiment::Perturb => "perturb",
            Experiment::Sweep => "sweep",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Parse(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSection {
    pub d: usize,
    pub r_dom: f64,
    pub m: usize,
}

impl Default for GridSection {
    fn default() -> Self {
        GridSection {
            d: 1,
            r_dom: 8.0,
            m: 257,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TheorySection {
    pub p: f64,
    pub n_theory: usize,
}

impl Default for TheorySection {
    fn default() -> Self {
        TheorySection {
            p: 4.0,
            n_theory: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WeightsSection {
    pub base: BaseWeight,
    pub perturbation: Perturbation,
    /// Perturbation size used by `simulate` and `attractor`.
    pub eps: f64,
}

impl WeightsSection {
    pub fn family(&self) -> WeightFamily {
        WeightFamily {
            base: self.base,
            perturbation: self.perturbation,
        }
    }
}

impl Default for WeightsSection {
    fn default() -> Self {
        let family = WeightFamily::default();
        WeightsSection {
            base: family.base,
            perturbation: family.perturbation,
            eps: 0.0,
        }
    }
}

/// Initial datum `u_τ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialData {
    Zero,
    /// `amplitude · exp(-|x - center|² / (2 width²))`, zeroed on the boundary.
    Gaussian {
        amplitude: f64,
        width: f64,
        #[serde(default)]
        center: Vec<f64>,
    },
    /// Seeded smooth random state of the given L² norm.
    Random {
        norm: f64,
        seed: u64,
    },
    Snapshot {
        path: PathBuf,
    },
}

impl Default for InitialData {
    fn default() -> Self {
        InitialData::Random {
            norm: 10.0,
            seed: 42,
        }
    }
}

impl InitialData {
    pub fn build(&self, grid: &Grid, base_dir: &Path) -> Result<State> {
        match self {
            InitialData::Zero => Ok(State::zeros(grid)),
            InitialData::Gaussian {
                amplitude,
                width,
                center,
            } => {
                if !(*width > 0.0) {
                    return Err(Error::param("initial.width", "must be positive"));
                }
                if center.len() > grid.dim() {
                    return Err(Error::param(
                        "initial.center",
                        "more entries than dimensions",
                    ));
                }
                let u = State::from_fn(grid, |x| {
                    let r2: f64 = x
                        .iter()
                        .enumerate()
                        .map(|(j, xj)| (xj - center.get(j).copied().unwrap_or(0.0)).powi(2))
                        .sum();
                    amplitude * (-r2 / (2.0 * width * width)).exp()
                });
                if !u.is_finite() {
                    return Err(Error::param("initial.amplitude", "must be finite"));
                }
                Ok(u)
            }
            InitialData::Random { norm, seed } => {
                if !(*norm >= 0.0) || !norm.is_finite() {
                    return Err(Error::param("initial.norm", "must be finite and >= 0"));
                }
                let mut rng = sample::rng(*seed);
                Ok(sample::random_direction(grid, &mut rng, sample::DEFAULT_MODES).scaled(*norm))
            }
            InitialData::Snapshot { path } => {
                let path = if path.is_relative() {
                    base_dir.join(path)
                } else {
                    path.clone()
                };
                let u = crate::grid::load_snapshot(&path)?;
                if u.grid() != grid {
                    return Err(Error::param(
                        "initial.path",
                        "snapshot grid differs from [grid]",
                    ));
                }
                Ok(u)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateSection {
    pub tau: f64,
    pub t_end: f64,
    pub initial: InitialData,
}

impl Default for SimulateSection {
    fn default() -> Self {
        SimulateSection {
            tau: -30.0,
            t_end: 0.0,
            initial: InitialData::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsSection {
    /// Overrides the embedding constant computed from the ε = 0 weight.
    pub c_embed: Option<f64>,
    /// Fixed Young parameter; when absent `η` is optimised at `t_ref`.
    pub eta: Option<f64>,
    pub t_ref: f64,
    /// Initial time of the window used for the envelope and `M̃`.
    pub tau: f64,
    pub t_end: f64,
    pub samples: usize,
    /// `‖a_ε - a_0‖_∞` used for the envelope column.
    pub eps: f64,
}

impl Default for BoundsSection {
    fn default() -> Self {
        BoundsSection {
            c_embed: None,
            eta: None,
            t_ref: 0.0,
            tau: -10.0,
            t_end: 0.0,
            samples: 101,
            eps: 0.1,
        }
    }
}

impl BoundsSection {
    pub fn eta_choice(&self) -> EtaChoice {
        match self.eta {
            Some(eta) => EtaChoice::Fixed(eta),
            None => EtaChoice::Optimize { t_ref: self.t_ref },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PullbackSection {
    pub rho0: f64,
    pub m_samples: usize,
    pub depth_schedule: Vec<f64>,
    pub tol_pullback: f64,
}

impl Default for PullbackSection {
    fn default() -> Self {
        let d = PullbackConfig::default();
        PullbackSection {
            rho0: d.rho0,
            m_samples: d.m_samples,
            depth_schedule: d.depth_schedule,
            tol_pullback: d.tol_pullback,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttractorSection {
    /// Section time.
    pub t: f64,
    /// `τ = t - lag` for the invariance diagnostic.
    pub invariance_lag: f64,
}

impl Default for AttractorSection {
    fn default() -> Self {
        AttractorSection {
            t: 0.0,
            invariance_lag: 5.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerturbSection {
    pub eps: f64,
    pub tau: f64,
    pub t_end: f64,
    pub initial: InitialData,
}

impl Default for PerturbSection {
    fn default() -> Self {
        PerturbSection {
            eps: 0.1,
            tau: 0.0,
            t_end: 10.0,
            initial: InitialData::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub eps_list: Vec<f64>,
    pub t: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            eps_list: vec![0.4, 0.2, 0.1, 0.05, 0.025],
            t: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub experiment: Option<Experiment>,
    pub out_dir: Option<PathBuf>,
    pub grid: GridSection,
    pub theory: TheorySection,
    pub weights: WeightsSection,
    pub forcing: ForcingSpec,
    pub step: StepConfig,
    pub pullback: PullbackSection,
    pub simulate: SimulateSection,
    pub bounds: BoundsSection,
    pub attractor: AttractorSection,
    pub perturb: PerturbSection,
    pub sweep: SweepSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 42,
            experiment: None,
            out_dir: None,
            grid: GridSection::default(),
            theory: TheorySection::default(),
            weights: WeightsSection::default(),
            forcing: ForcingSpec::default(),
            step: StepConfig::default(),
            pullback: PullbackSection::default(),
            simulate: SimulateSection::default(),
            bounds: BoundsSection::default(),
            attractor: AttractorSection::default(),
            perturb: PerturbSection::default(),
            sweep: SweepSection::default(),
        }
    }
}

/// Prefixes `path` onto errors that do not already name a dotted field.
fn at(path: &str, err: Error) -> Error {
    match err {
        Error::InvalidParameter { name, reason } if name.contains('.') => {
            Error::InvalidParameter { name, reason }
        }
        Error::InvalidParameter { name, reason } => Error::InvalidParameter {
            name: format!("{path}.{name}"),
            reason,
        },
        e @ (Error::Parse(_) | Error::Io(_) | Error::InnerNonConvergence { .. }) => e,
        other => Error::InvalidParameter {
            name: path.to_string(),
            reason: other.to_string(),
        },
    }
}

fn check_lattice(path: &str, step: &StepConfig, t: f64) -> Result<()> {
    step.lattice_index(t).map(|_| ()).map_err(|e| match e {
        Error::InvalidParameter { reason, .. } => Error::param(path, reason),
        other => at(path, other),
    })
}

/// Objects shared by every experiment.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub grid: Grid,
    pub theory: TheoryParams,
    pub family: WeightFamily,
    pub forcing: Forcing,
    pub step: StepConfig,
    pub pullback: PullbackConfig,
}

impl Scenario {
    pub fn energy(&self, eps: f64) -> Result<Energy> {
        let w = make_weight(&self.grid, &self.family, eps).map_err(|e| at("weights", e))?;
        Ok(Energy::new(w, self.theory))
    }
}

impl RunConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Parse(e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Parse(format!("{path}: {}", e.into_inner().message().trim()))
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is serialisable")
    }

    /// Checks every invariant and returns non-fatal warnings.
    pub fn validate(&self) -> Result<Vec<String>> {
        self.scenario().map(|(_, w)| w)
    }

    pub fn scenario(&self) -> Result<(Scenario, Vec<String>)> {
        let mut warnings = Vec::new();
        let grid = make_grid(self.grid.d, self.grid.r_dom, self.grid.m).map_err(|e| match e {
            Error::InvalidDimension(_) => Error::param("grid.d", e.to_string()),
            Error::TooFewPoints(_) => Error::param("grid.m", e.to_string()),
            other => at("grid", other),
        })?;
        let theory =
            TheoryParams::new(self.theory.p, self.theory.n_theory).map_err(|e| at("theory", e))?;
        if !theory.dimension_condition() {
            warnings.push(format!(
                "theory: 2 < p < n_theory violated (p = {}, n_theory = {})",
                theory.p, theory.n_theory
            ));
        }
        let family = self.weights.family();
        make_weight(&grid, &family, self.weights.eps).map_err(|e| at("weights", e))?;
        if !family.integrable_on_whole_space(&theory) {
            warnings.push(
                "weights: a_0^{-2/(p-2)} is not integrable on the whole space; \
                 constants hold on the truncated box only"
                    .to_string(),
            );
        }
        let forcing = Forcing::new(&grid, self.forcing.clone()).map_err(|e| at("forcing", e))?;
        self.step
            .validate(forcing.lipschitz())
            .map_err(|e| at("step", e))?;
        let pullback = PullbackConfig {
            rho0: self.pullback.rho0,
            m_samples: self.pullback.m_samples,
            depth_schedule: self.pullback.depth_schedule.clone(),
            tol_pullback: self.pullback.tol_pullback,
            seed: self.seed,
        };
        pullback.validate()?;
        for (k, d) in pullback.depth_schedule.iter().enumerate() {
            check_lattice(&format!("pullback.depth_schedule[{k}]"), &self.step, *d)?;
        }

        let window = |path: &str, tau: f64, t_end: f64| -> Result<()> {
            check_lattice(&format!("{path}.tau"), &self.step, tau)?;
            check_lattice(&format!("{path}.t_end"), &self.step, t_end)?;
            if !(t_end >= tau) {
                return Err(Error::param(
                    &format!("{path}.t_end"),
                    "must not precede tau",
                ));
            }
            Ok(())
        };
        window("simulate", self.simulate.tau, self.simulate.t_end)?;
        window("perturb", self.perturb.tau, self.perturb.t_end)?;
        if !(self.bounds.t_end >= self.bounds.tau) {
            return Err(Error::param("bounds.t_end", "must not precede tau"));
        }
        if self.bounds.samples < 2 {
            return Err(Error::param("bounds.samples", "need at least 2 samples"));
        }
        if let Some(eta) = self.bounds.eta {
            if !(eta > 0.0) {
                return Err(Error::param("bounds.eta", "must be positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.bounds.eps) {
            return Err(Error::param("bounds.eps", "must lie in [0, 1]"));
        }
        check_lattice("attractor.t", &self.step, self.attractor.t)?;
        check_lattice(
            "attractor.invariance_lag",
            &self.step,
            self.attractor.invariance_lag,
        )?;
        if !(self.attractor.invariance_lag >= 0.0) {
            return Err(Error::param("attractor.invariance_lag", "must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.perturb.eps) {
            return Err(Error::param("perturb.eps", "must lie in [0, 1]"));
        }
        check_lattice("sweep.t", &self.step, self.sweep.t)?;
        if self.sweep.eps_list.is_empty() {
            return Err(Error::param("sweep.eps_list", "must not be empty"));
        }
        if self.sweep.eps_list.iter().any(|e| !(0.0..=1.0).contains(e)) {
            return Err(Error::param("sweep.eps_list", "entries must lie in [0, 1]"));
        }
        if self.sweep.eps_list.windows(2).any(|w| w[1] >= w[0]) {
            return Err(Error::param(
                "sweep.eps_list",
                "must be strictly decreasing",
            ));
        }

        Ok((
            Scenario {
                grid,
                theory,
                family,
                forcing,
                step: self.step,
                pullback,
            },
            warnings,
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn field_of(err: Error) -> String {
        match err {
            Error::InvalidParameter { name, .. } => name,
            Error::Parse(msg) => msg,
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn empty_file_is_reference_scenario() {
        let c = RunConfig::from_toml_str("").unwrap();
        assert_eq!(c, RunConfig::default());
        let warnings = c.validate().unwrap();
        assert!(warnings.is_empty(), "{warnings:?}");
    }

    #[test]
    fn roundtrip_through_toml() {
        let mut c = RunConfig::default();
        c.bounds.eta = Some(0.5);
        c.simulate.initial = InitialData::Gaussian {
            amplitude: 2.0,
            width: 1.0,
            center: vec![0.5],
        };
        let back = RunConfig::from_toml_str(&c.to_toml_string()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn partial_sections_keep_defaults() {
        let c = RunConfig::from_toml_str(
            "[grid]\nm = 129\n[forcing.l1]\nkind = \"constant\"\nb0 = 2.0\n[weights.base]\nkind = \"unit\"\n",
        )
        .unwrap();
        assert_eq!(c.grid.m, 129);
        assert_eq!(c.grid.r_dom, 8.0);
        assert_eq!(c.forcing.lipschitz, 1.0);
        let w = c.validate().unwrap();
        assert_eq!(w.len(), 1);
        assert!(w[0].starts_with("weights"));
    }

    #[test]
    fn errors_name_the_field() {
        let p2 = RunConfig::from_toml_str("[theory]\np = 2.0\n").unwrap();
        assert_eq!(field_of(p2.validate().unwrap_err()), "theory.p");

        let bad_m = RunConfig::from_toml_str("[grid]\nm = 2\n").unwrap();
        assert_eq!(field_of(bad_m.validate().unwrap_err()), "grid.m");

        let eps = RunConfig::from_toml_str("[weights]\neps = 1.5\n").unwrap();
        assert_eq!(field_of(eps.validate().unwrap_err()), "weights.eps");

        let dt = RunConfig::from_toml_str("[step]\ndt = 2.0\n").unwrap();
        assert!(dt.validate().is_err());

        let lattice = RunConfig::from_toml_str("[simulate]\ntau = -0.005\n").unwrap();
        assert_eq!(field_of(lattice.validate().unwrap_err()), "simulate.tau");

        let order = RunConfig::from_toml_str("[sweep]\neps_list = [0.1, 0.2]\n").unwrap();
        assert_eq!(field_of(order.validate().unwrap_err()), "sweep.eps_list");

        let typo = RunConfig::from_toml_str("[grid]\nmm = 3\n").unwrap_err();
        assert!(field_of(typo).contains("mm"));

        let wrong_type = RunConfig::from_toml_str("[theory]\np = \"four\"\n").unwrap_err();
        assert!(field_of(wrong_type).starts_with("theory.p"));
    }

    #[test]
    fn dimension_condition_is_a_warning() {
        let c = RunConfig::from_toml_str("[theory]\np = 6.0\nn_theory = 3\n").unwrap();
        let w = c.validate().unwrap();
        assert!(w.iter().any(|m| m.starts_with("theory")));
    }

    #[test]
    fn initial_data_builders() {
        let g = make_grid(1, 4.0, 65).unwrap();
        let here = Path::new(".");
        assert_eq!(InitialData::Zero.build(&g, here).unwrap(), State::zeros(&g));
        let r = InitialData::Random { norm: 3.0, seed: 1 }
            .build(&g, here)
            .unwrap();
        assert!((crate::grid::norm_l2(&r) - 3.0).abs() < 1e-12);
        let dir = tempfile::tempdir().unwrap();
        crate::grid::save_snapshot(&r, &dir.path().join("u.txt")).unwrap();
        let back = InitialData::Snapshot {
            path: "u.txt".into(),
        }
        .build(&g, dir.path())
        .unwrap();
        assert_eq!(back.values(), r.values());
    }
}
