//! JSON run configurations. Every struct rejects unknown keys so a typo
//! fails before any computation starts.

use std::sync::Arc;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use varlab_core::bifurcation::BranchModel;
use varlab_core::fixedpoint::PotentialTag;
use varlab_core::hypotheses::{Grid, SeqMode, SequencePair};
use varlab_core::minhunt::{Ladder, Mode, Tolerances};
use varlab_core::optim::DescentOptions;
use varlab_core::varprinciple::{geometric_grid, AnalyticPair, EnergyPair, FemPair, Multistart};
use varlab_core::{parse, BoundaryCondition, EnergyModel, Expr, FeSpace, Mesh1D};

use crate::error::CliError;

/// Deserializes `text`, reporting the path of the offending field.
pub fn from_json<T: DeserializeOwned>(text: &str) -> Result<T, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.into_inner()))
    })
}

/// Parses the expression stored under config field `field`.
pub fn expr(field: &str, src: &str) -> Result<Expr, CliError> {
    parse(src).map_err(|e| CliError::Parse(format!("`{field}` = {src:?}: {e}")))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Policy {
    pub seed: u64,
    pub restarts: usize,
    pub max_iter: usize,
    pub tol: f64,
}

impl Default for Policy {
    fn default() -> Self {
        let m = Multistart::default();
        Policy {
            seed: m.seed,
            restarts: m.budget,
            max_iter: m.descent.max_iter,
            tol: m.descent.tol,
        }
    }
}

impl Policy {
    pub fn multistart(&self) -> Result<Multistart, CliError> {
        if self.restarts == 0 {
            return Err(CliError::Config("at `policy.restarts`: must be positive".into()));
        }
        if !(self.tol > 0.0) {
            return Err(CliError::Config("at `policy.tol`: must be positive".into()));
        }
        Ok(Multistart {
            budget: self.restarts,
            seed: self.seed,
            descent: DescentOptions {
                tol: self.tol,
                max_iter: self.max_iter,
                ..DescentOptions::default()
            },
        })
    }
}

fn one() -> String {
    "1".into()
}

fn zero() -> String {
    "0".into()
}

/// The pair `(Φ, Ψ)` a command works on.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PairSpec {
    /// A named closed-form pair.
    Toy { name: String },
    /// `Ψ = ∫|u'|^p`, `Φ = −∫F(x, u)` with zero boundary values.
    Dirichlet { p: f64, n: usize, f: String },
    /// `Ψ = (∫|u'|^p + ∫λ|u|^p)/p`, `Φ = −∫(αF + βG)`.
    Neumann {
        p: f64,
        n: usize,
        f: String,
        #[serde(default = "zero")]
        g: String,
        #[serde(default = "one")]
        alpha: String,
        #[serde(default = "zero")]
        beta: String,
        #[serde(default = "one")]
        lambda: String,
    },
    /// Neumann problem with `f = distosc(p)` weighted by `eta` on both sides.
    OscillatingNeumann {
        p: f64,
        n: usize,
        #[serde(default = "one")]
        eta: String,
    },
}

impl PairSpec {
    pub fn build(&self) -> Result<Box<dyn EnergyPair>, CliError> {
        let mesh = |n: usize| Mesh1D::unit(n).map_err(|e| CliError::Config(format!("at `problem.n`: {e}")));
        Ok(match self {
            PairSpec::Toy { name } => Box::new(AnalyticPair::named(name).ok_or_else(|| {
                CliError::Config(format!(
                    "at `problem.toy.name`: unknown pair {name:?}, expected one of {}",
                    AnalyticPair::NAMES.join(", ")
                ))
            })?),
            PairSpec::Dirichlet { p, n, f } => {
                let model = EnergyModel::dirichlet(*p, expr("problem.dirichlet.f", f)?)?;
                let space = Arc::new(FeSpace::new(mesh(*n)?, BoundaryCondition::Dirichlet));
                Box::new(FemPair::new(model, space)?)
            }
            PairSpec::Neumann {
                p,
                n,
                f,
                g,
                alpha,
                beta,
                lambda,
            } => {
                let model = EnergyModel::neumann(
                    *p,
                    expr("problem.neumann.f", f)?,
                    expr("problem.neumann.g", g)?,
                    expr("problem.neumann.alpha", alpha)?,
                    expr("problem.neumann.beta", beta)?,
                    expr("problem.neumann.lambda", lambda)?,
                )?;
                let space = Arc::new(FeSpace::new(mesh(*n)?, BoundaryCondition::Neumann));
                Box::new(FemPair::new(model, space)?)
            }
            PairSpec::OscillatingNeumann { p, n, eta } => {
                let eta = expr("problem.oscillating_neumann.eta", eta)?;
                let f = Expr::call(varlab_core::dsl::Func::DistOsc, vec![Expr::Const(*p)]);
                let model = EnergyModel::neumann(*p, f, Expr::Const(0.0), eta.clone(), Expr::Const(0.0), eta)?;
                let space = Arc::new(FeSpace::new(mesh(*n)?, BoundaryCondition::Neumann));
                Box::new(FemPair::new(model, space)?)
            }
        })
    }

    /// The nonlinearity `f` and exponent `p` of a boundary value problem.
    pub fn nonlinearity(&self) -> Result<(Expr, f64), CliError> {
        match self {
            PairSpec::Toy { .. } => Err(CliError::Config(
                "at `problem`: this command needs a boundary value problem, not a toy pair".into(),
            )),
            PairSpec::Dirichlet { p, f, .. } => Ok((expr("problem.dirichlet.f", f)?, *p)),
            PairSpec::Neumann { p, f, .. } => Ok((expr("problem.neumann.f", f)?, *p)),
            PairSpec::OscillatingNeumann { p, .. } => {
                Ok((Expr::call(varlab_core::dsl::Func::DistOsc, vec![Expr::Const(*p)]), *p))
            }
        }
    }

    /// Free nodes of the finite-element space, for profile end points.
    pub fn free_nodes(&self) -> Option<Vec<f64>> {
        let (n, bc) = match self {
            PairSpec::Toy { .. } => return None,
            PairSpec::Dirichlet { n, .. } => (*n, BoundaryCondition::Dirichlet),
            PairSpec::Neumann { n, .. } | PairSpec::OscillatingNeumann { n, .. } => (*n, BoundaryCondition::Neumann),
        };
        let space = FeSpace::new(Mesh1D::unit(n).ok()?, bc);
        let nodes = space.mesh().nodes();
        Some((0..nodes.len()).filter(|&i| space.free_index(i).is_some()).map(|i| nodes[i]).collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    List(Vec<f64>),
    Geometric { from: f64, to: f64, n: usize },
}

impl GridSpec {
    pub fn values(&self, field: &str) -> Result<Vec<f64>, CliError> {
        let v = match self {
            GridSpec::List(v) => v.clone(),
            GridSpec::Geometric { from, to, n } => geometric_grid(*from, *to, *n)?,
        };
        if v.is_empty() {
            return Err(CliError::Config(format!("at `{field}`: empty grid")));
        }
        if v.iter().any(|x| !x.is_finite()) {
            return Err(CliError::Config(format!("at `{field}`: grid values must be finite")));
        }
        Ok(v)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PhiCurveConfig {
    pub problem: PairSpec,
    pub rho_grid: GridSpec,
    /// Window for the head and tail estimates.
    #[serde(default = "default_window")]
    pub window: usize,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn default_window() -> usize {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LadderSpec {
    pub start: f64,
    pub factor: f64,
    pub levels: usize,
}

impl LadderSpec {
    pub fn build(&self) -> Result<Ladder, CliError> {
        Ladder::new(self.start, self.factor, self.levels).map_err(|e| CliError::Config(format!("at `ladder`: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HuntConfig {
    pub problem: PairSpec,
    pub mu: f64,
    pub ladder: LadderSpec,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stagnation: Option<usize>,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BranchSpec {
    pub f: String,
    pub g: String,
    pub s: f64,
    pub q: f64,
    pub n: usize,
}

impl BranchSpec {
    pub fn build(&self) -> Result<BranchModel, CliError> {
        let f = expr("model.f", &self.f)?;
        let g = expr("model.g", &self.g)?;
        BranchModel::new(f, g, self.s, self.q, self.n).map_err(|e| CliError::Config(format!("at `model`: {e}")))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BifurcateConfig {
    pub model: BranchSpec,
    pub lambda_grid: GridSpec,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FixedPointConfig {
    pub potential: PotentialTag,
    pub rho: f64,
    /// Radii for the sup-ratio table.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<GridSpec>,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GrowthSpec {
    pub a: f64,
    pub q: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArSpec {
    pub c: f64,
    pub r: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallDataSpec {
    pub s: f64,
    pub q: f64,
    pub d: (f64, f64),
    pub b: (f64, f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OscSpec {
    pub sequences: SequencePair,
    pub p: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GSideSpec {
    pub p: f64,
    pub mode: SeqMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckConfig {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<String>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub growth: Option<GrowthSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ar: Option<ArSpec>,
    #[serde(default)]
    pub limit_zero: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub small_data: Option<SmallDataSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub osc: Option<OscSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g_side: Option<GSideSpec>,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

/// End point of a mountain-pass path.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum EndSpec {
    Point(Vec<f64>),
    /// An expression in `x` sampled at the free nodes of a finite-element pair.
    Profile(String),
}

impl EndSpec {
    pub fn resolve(&self, field: &str, problem: &PairSpec) -> Result<Vec<f64>, CliError> {
        match self {
            EndSpec::Point(v) => Ok(v.clone()),
            EndSpec::Profile(src) => {
                let e = expr(field, src)?;
                let nodes = problem
                    .free_nodes()
                    .ok_or_else(|| CliError::Config(format!("at `{field}`: profiles need a finite-element problem")))?;
                nodes.iter().map(|&x| Ok(e.eval(x, 0.0)?)).collect()
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MountainPassConfig {
    pub problem: PairSpec,
    pub mu: f64,
    pub end_a: EndSpec,
    pub end_b: EndSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweeps: Option<usize>,
    /// Gradient bound for the saddle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tol: Option<f64>,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

fn default_p() -> f64 {
    2.0
}

fn default_ar() -> ArSpec {
    ArSpec { c: 3.0, r: 1.0 }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem1Config {
    pub f: String,
    #[serde(default = "default_p")]
    pub p: f64,
    pub n: usize,
    pub rho_grid: GridSpec,
    #[serde(default = "default_ar")]
    pub ar: ArSpec,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl Problem1Config {
    pub fn pair_spec(&self) -> PairSpec {
        PairSpec::Dirichlet {
            p: self.p,
            n: self.n,
            f: self.f.clone(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Problem3Config {
    pub problem: PairSpec,
    pub sequences: SequencePair,
    pub horizon: usize,
    pub mu: f64,
    pub ladder: LadderSpec,
    pub mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stagnation: Option<usize>,
    #[serde(default)]
    pub grid: Grid,
    #[serde(default)]
    pub policy: Policy,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<String>,
}

impl Problem3Config {
    pub fn hunt(&self) -> HuntConfig {
        HuntConfig {
            problem: self.problem.clone(),
            mu: self.mu,
            ladder: self.ladder.clone(),
            mode: self.mode,
            stagnation: self.stagnation,
            policy: self.policy.clone(),
            out: None,
        }
    }
}

pub fn tolerances(pair: &dyn EnergyPair) -> Tolerances {
    Tolerances::for_backing(pair.backing())
}
