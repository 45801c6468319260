//! Run configuration: one JSON document with nested sections, strict about
//! unknown keys, with documented defaults.

use crate::cell::CellGeometrySpec;
use crate::corrector::MvVariant;
use crate::domain::{Domain, FaceBc};
use crate::energy::BulkFreeEnergy;
use crate::error::{Error, Result};
use crate::stepper::{Scheme, StepperConfig};
use crate::wetting::{ChannelWallPattern, WettingSpec};
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scenario {
    Cell,
    Homogeneous,
    Upscaled,
    Micro,
    Compare,
    Channel,
    ContactAngle,
    CheckF,
}

impl Scenario {
    pub fn name(&self) -> &'static str {
        match self {
            Scenario::Cell => "cell",
            Scenario::Homogeneous => "homogeneous",
            Scenario::Upscaled => "upscaled",
            Scenario::Micro => "micro",
            Scenario::Compare => "compare",
            Scenario::Channel => "channel",
            Scenario::ContactAngle => "contact-angle",
            Scenario::CheckF => "check-f",
        }
    }
}

/// Bulk free energy, either by coefficients {a0,a1,a2,a3} of f or by well
/// locations {alpha1, alpha2}; exactly one of the two groups.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnergySpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a0: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub a3: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_reg: Option<f64>,
}

impl EnergySpec {
    pub fn build(&self) -> Result<BulkFreeEnergy> {
        let has_coeffs =
            self.a0.is_some() || self.a1.is_some() || self.a2.is_some() || self.a3.is_some();
        let has_wells = self.alpha1.is_some() || self.alpha2.is_some();
        let mut energy = match (has_coeffs, has_wells) {
            (true, true) => {
                return Err(Error::Config(
                    "energy: give either {a0,a1,a2,a3} or {alpha1,alpha2}, not both".into(),
                ))
            }
            (false, false) => {
                return Err(Error::Config(
                    "energy: missing coefficients or well locations".into(),
                ))
            }
            (true, false) => BulkFreeEnergy::from_coeffs(
                self.a0.unwrap_or(0.0),
                self.a1.unwrap_or(0.0),
                self.a2.unwrap_or(0.0),
                self.a3.unwrap_or(0.0),
            ),
            (false, true) => {
                let a1 = self.alpha1.ok_or_else(|| {
                    Error::Config("energy: alpha1 is required with alpha2".into())
                })?;
                let a2 = self.alpha2.ok_or_else(|| {
                    Error::Config("energy: alpha2 is required with alpha1".into())
                })?;
                BulkFreeEnergy::from_wells(a1, a2)?
            }
        };
        if let Some(d) = self.delta_reg {
            if !(d > 0.0) {
                return Err(Error::Config("energy: delta_reg must be > 0".into()));
            }
            energy = energy.with_delta_reg(d);
        }
        Ok(energy)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct StepperSpec {
    pub dt: f64,
    pub steps: u64,
    #[serde(default)]
    pub scheme: Scheme,
    /// convex-splitting stabilization; default max(f') over the well range
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stabilization: Option<f64>,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default = "default_one")]
    pub mobility: f64,
    #[serde(default = "default_solver_tol")]
    pub solver_tol: f64,
}

fn default_one() -> f64 {
    1.0
}

fn default_solver_tol() -> f64 {
    1e-12
}

/// Default stabilization: max f' over the well interval (or a sampled range
/// for coefficient-form energies), floored at 1.
pub fn default_stabilization(energy: &BulkFreeEnergy) -> f64 {
    let mut s: f64 = 1.0;
    match energy.wells {
        Some((a1, a2)) => {
            let pad = 0.1 * (a2 - a1);
            for k in 0..=16 {
                let x = a1 - pad + (a2 - a1 + 2.0 * pad) * k as f64 / 16.0;
                s = s.max(energy.f_prime(x));
            }
        }
        None => {
            for k in 0..=80 {
                let x = -2.0 + 4.0 * k as f64 / 80.0;
                s = s.max(energy.f_prime(x));
            }
        }
    }
    s
}

impl StepperSpec {
    pub fn build(&self, energy: &BulkFreeEnergy) -> StepperConfig {
        StepperConfig {
            dt: self.dt,
            scheme: self.scheme,
            stabilization: self
                .stabilization
                .unwrap_or_else(|| default_stabilization(energy)),
            lambda: self.lambda,
            mobility: self.mobility,
            solver_tol: self.solver_tol,
        }
    }
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BcSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub left: Option<FaceBc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub right: Option<FaceBc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bottom: Option<FaceBc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub top: Option<FaceBc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub front: Option<FaceBc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub back: Option<FaceBc>,
}

impl BcSpec {
    pub fn faces(&self) -> [[FaceBc; 2]; 3] {
        let pick = |o: &Option<FaceBc>| o.unwrap_or(FaceBc::NoFlux);
        [
            [pick(&self.left), pick(&self.right)],
            [pick(&self.bottom), pick(&self.top)],
            [pick(&self.front), pick(&self.back)],
        ]
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub lengths: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sizes: Option<Vec<usize>>,
    #[serde(default)]
    pub bc: BcSpec,
}

impl GridSpec {
    pub fn build_domain(&self) -> Result<Domain> {
        let sizes = self
            .sizes
            .as_ref()
            .ok_or_else(|| Error::Config("grid: sizes are required for this scenario".into()))?;
        Domain::new(
            self.lengths.len(),
            sizes,
            &self.lengths,
            self.bc.faces(),
            None,
        )
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialSpec {
    Constant {
        value: f64,
    },
    /// seeded uniform noise in [mean - amplitude, mean + amplitude]
    Noise {
        mean: f64,
        amplitude: f64,
    },
    /// mean + amplitude * prod_a cos(modes_a pi x_a / L_a)
    Cosine {
        mean: f64,
        amplitude: f64,
        #[serde(default)]
        modes: Option<Vec<usize>>,
    },
    /// two-well step along x
    Step {
        left: f64,
        right: f64,
        #[serde(default = "default_half")]
        position: f64,
    },
}

fn default_half() -> f64 {
    0.5
}

impl InitialSpec {
    pub fn build(&self, domain: &Domain, seed: u64) -> Vec<f64> {
        let mut phi = vec![0.0; domain.shape.len()];
        match self {
            InitialSpec::Constant { value } => {
                for i in domain.pore_cells() {
                    phi[i] = *value;
                }
            }
            InitialSpec::Noise { mean, amplitude } => {
                let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
                // fixed cell order keeps runs reproducible
                for i in 0..domain.shape.len() {
                    let v = mean + rng.random_range(-*amplitude..=*amplitude);
                    if domain.pore[i] {
                        phi[i] = v;
                    }
                }
            }
            InitialSpec::Cosine {
                mean,
                amplitude,
                modes,
            } => {
                let modes = modes.clone().unwrap_or_else(|| vec![1; domain.d]);
                for i in domain.pore_cells() {
                    let x = domain.center(i);
                    let mut v = *amplitude;
                    for a in 0..domain.d {
                        let m = *modes.get(a).unwrap_or(&1) as f64;
                        v *= (m * std::f64::consts::PI * x[a] / domain.lengths[a]).cos();
                    }
                    phi[i] = mean + v;
                }
            }
            InitialSpec::Step {
                left,
                right,
                position,
            } => {
                for i in domain.pore_cells() {
                    let x = domain.center(i);
                    phi[i] = if x[0] < *position { *left } else { *right };
                }
            }
        }
        phi
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CellSolveSpec {
    pub lambda: f64,
    #[serde(default = "default_one")]
    pub mobility: f64,
    #[serde(default = "default_cell_tol")]
    pub tol: f64,
}

fn default_cell_tol() -> f64 {
    1e-10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct CompareSpec {
    pub epsilons: Vec<f64>,
    /// micro steps per macro step (micro dt = stepper.dt / micro-substeps)
    #[serde(default = "default_one_u64")]
    pub micro_substeps: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub micro_scheme: Option<Scheme>,
}

fn default_one_u64() -> u64 {
    1
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct ChannelSpec {
    /// wall-class measures |dY_w^i| of one periodic wall slice
    pub wall_measures: Vec<f64>,
    /// prescribed n.J on the channel entrance
    #[serde(default)]
    pub inflow: f64,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContactSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g0: Option<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GTildeSign {
    /// derivation form: div(D grad phi0) + g0t inside the fourth-order term
    #[default]
    Plus,
    /// the corollary's printed form: div(D grad phi0) - g0t
    Minus,
}

impl GTildeSign {
    pub fn value(&self) -> f64 {
        match self {
            GTildeSign::Plus => 1.0,
            GTildeSign::Minus => -1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct OutputSpec {
    /// write monitors every `cadence` steps (0 = final state only)
    #[serde(default = "default_cadence")]
    pub cadence: u64,
    #[serde(default)]
    pub snapshots: bool,
    #[serde(default)]
    pub vtk: bool,
}

impl Default for OutputSpec {
    fn default() -> Self {
        OutputSpec {
            cadence: default_cadence(),
            snapshots: false,
            vtk: false,
        }
    }
}

fn default_cadence() -> u64 {
    10
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct RunConfig {
    pub scenario: Scenario,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub geometry: Option<CellGeometrySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub energy: Option<EnergySpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stepper: Option<StepperSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<InitialSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cell: Option<CellSolveSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wetting: Option<WettingSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<ChannelSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub contact: Option<ContactSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compare: Option<CompareSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tensor_file: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default)]
    pub g_tilde_sign: GTildeSign,
    /// apply the upscaled wetting source in the upscaled scenario
    #[serde(default)]
    pub use_g_tilde: bool,
    #[serde(default)]
    pub normalize_g_tilde: bool,
    #[serde(default)]
    pub mv_variant: MvVariant,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub output: OutputSpec,
}

pub fn parse_config(text: &str) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let config: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        Error::Config(format!("at `{path}`: {}", e.inner()))
    })?;
    config.validate()?;
    Ok(config)
}

pub fn canonical_json(config: &RunConfig) -> String {
    let mut s = serde_json::to_string_pretty(config).expect("config serializes");
    s.push('\n');
    s
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let need = |ok: bool, what: &str| -> Result<()> {
            if ok {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "scenario `{}` requires the `{what}` section",
                    self.scenario.name()
                )))
            }
        };
        if let Some(g) = &self.geometry {
            g.validate()?;
        }
        if let Some(e) = &self.energy {
            e.build()?;
        }
        if let Some(s) = &self.stepper {
            if !(s.dt > 0.0) {
                return Err(Error::Config("stepper: dt must be > 0".into()));
            }
            if s.lambda < 0.0 {
                return Err(Error::Config("stepper: lambda must be >= 0".into()));
            }
        }
        if let Some(g) = &self.grid {
            let d = g.lengths.len();
            if d != 2 && d != 3 {
                return Err(Error::Config("grid: lengths must have 2 or 3 entries".into()));
            }
            if let Some(sizes) = &g.sizes {
                if sizes.len() != d {
                    return Err(Error::Config("grid: sizes/lengths dimension mismatch".into()));
                }
            }
        }
        if let Some(w) = &self.wetting {
            w.validate()?;
        }
        match self.scenario {
            Scenario::Cell => {
                need(self.geometry.is_some(), "geometry")?;
                need(self.cell.is_some(), "cell")?;
            }
            Scenario::Homogeneous => {
                need(self.grid.is_some(), "grid")?;
                need(self.energy.is_some(), "energy")?;
                need(self.stepper.is_some(), "stepper")?;
                need(self.initial.is_some(), "initial")?;
            }
            Scenario::Upscaled => {
                need(self.grid.is_some(), "grid")?;
                need(self.energy.is_some(), "energy")?;
                need(self.stepper.is_some(), "stepper")?;
                need(self.initial.is_some(), "initial")?;
                if self.tensor_file.is_none() {
                    return Err(Error::Config(
                        "upscaled scenario needs a tensor file: run `porous-ch cell-solve` \
                         first and point `tensor-file` at its tensors.json"
                            .into(),
                    ));
                }
                if self.use_g_tilde {
                    need(self.geometry.is_some(), "geometry")?;
                    need(self.wetting.is_some(), "wetting")?;
                }
            }
            Scenario::Micro => {
                need(self.geometry.is_some(), "geometry")?;
                need(self.energy.is_some(), "energy")?;
                need(self.stepper.is_some(), "stepper")?;
                need(self.initial.is_some(), "initial")?;
                need(self.grid.is_some(), "grid")?;
                need(self.epsilon.is_some(), "epsilon")?;
            }
            Scenario::Compare => {
                need(self.geometry.is_some(), "geometry")?;
                need(self.energy.is_some(), "energy")?;
                need(self.stepper.is_some(), "stepper")?;
                need(self.initial.is_some(), "initial")?;
                need(self.grid.is_some(), "grid")?;
                need(self.compare.is_some(), "compare")?;
            }
            Scenario::Channel => {
                need(self.grid.is_some(), "grid")?;
                need(self.energy.is_some(), "energy")?;
                need(self.stepper.is_some(), "stepper")?;
                need(self.initial.is_some(), "initial")?;
                need(self.wetting.is_some(), "wetting")?;
                need(self.channel.is_some(), "channel")?;
            }
            Scenario::ContactAngle => {
                need(self.wetting.is_some(), "wetting")?;
                let has_g0 = self.contact.as_ref().map(|c| c.g0.is_some()).unwrap_or(false);
                if !has_g0 && self.geometry.is_none() {
                    return Err(Error::Config(
                        "contact-angle scenario needs either contact.g0 or a geometry section"
                            .into(),
                    ));
                }
            }
            Scenario::CheckF => {
                need(self.energy.is_some(), "energy")?;
                let e = self.energy.as_ref().unwrap();
                if e.alpha1.is_none() || e.alpha2.is_none() {
                    return Err(Error::Config(
                        "check-f needs the energy given as well locations {alpha1, alpha2}".into(),
                    ));
                }
            }
        }
        Ok(())
    }

    pub fn channel_pattern(&self) -> Option<ChannelWallPattern> {
        self.channel.as_ref().map(|c| ChannelWallPattern {
            class_measures: c.wall_measures.clone(),
        })
    }
}
