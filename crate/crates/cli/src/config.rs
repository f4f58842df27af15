//! Run configuration: a single JSON document, optionally overridden by flags.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use whitenoise::integrate::{polynomial_growth, GrowthTag, IntegrandSpec};
use whitenoise::localtime::LocalTimeMode;
use whitenoise::procmodel::{Domain, HurstFunction, ModelKnobs, ProcessModel, VGammaKernel};
use whitenoise::simulate::{GridSpec, Sampler};
use whitenoise::verify::{Cosine, ItoFunction, Mollified, Power, TimeTimesX};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::Subcommand)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    /// Orthonormality of the basis, coefficient dump and decay check.
    #[command(after_help = "CSV coeffs.csv: t,k,c,c_prime (c_prime empty where the path is not differentiable)")]
    BasisCheck,
    /// Truncated covariance against the closed form or a reference model.
    #[command(
        after_help = "CSV defects.csv: t,variance,captured,defect\nCSV golden.csv (with covcheck.golden): k,golden,model,difference"
    )]
    Covcheck,
    /// Sample paths.
    #[command(
        after_help = "CSV paths.csv: path_id,t,value\nCSV coords.csv (hermite sampler): path_id,k,z\nCSV defects.csv (hermite sampler): t,variance,captured,defect"
    )]
    Simulate,
    /// Wiener integral of a deterministic function.
    #[command(after_help = "CSV wiener.csv: k,coefficient")]
    Wiener,
    /// Forward and Wick Riemann sums of an integrand.
    #[command(after_help = "CSV integrals.csv: path_id,forward,wick")]
    Integrate,
    /// Itô formula residual on a refinement ladder.
    #[command(after_help = "CSV ladder.csv: n_steps,residual_l2,stderr,relative_residual")]
    VerifyIto,
    /// Tanaka formula with a mollifier ladder.
    #[command(after_help = "CSV tanaka.csv: eps,n_steps,ito_relative,delta_term,delta_stderr,gap,gap_stderr")]
    VerifyTanaka,
    /// Pathwise forward minus Wick sums.
    #[command(after_help = "CSV compare.csv: path_id,forward,wick,difference")]
    Compare,
    /// Box-kernel local-time histogram.
    #[command(after_help = "CSV localtime.csv: path_id,level,value\nCSV levels.csv: level,mean,stderr")]
    Localtime,
    /// Occupation identity residuals over a bin-width ladder.
    #[command(after_help = "CSV occupation.csv: half_width,path_id,residual")]
    Occupation,
    /// Square-integrability diagnostic for the local time.
    #[command(name = "l2-diag", after_help = "CSV l2.csv (with Monte Carlo): path_id,integral")]
    L2Diag,
    /// Wick-exponential linear SDE.
    #[command(after_help = "CSV sde.csv: path_id,z")]
    Sde,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::BasisCheck => "basis-check",
            Command::Covcheck => "covcheck",
            Command::Simulate => "simulate",
            Command::Wiener => "wiener",
            Command::Integrate => "integrate",
            Command::VerifyIto => "verify-ito",
            Command::VerifyTanaka => "verify-tanaka",
            Command::Compare => "compare",
            Command::Localtime => "localtime",
            Command::Occupation => "occupation",
            Command::L2Diag => "l2-diag",
            Command::Sde => "sde",
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FamilySpec {
    #[default]
    Bm,
    Bridge,
    Fbm {
        hurst: f64,
    },
    Mbm {
        h: HurstFunction,
    },
    /// `γ(r) = r^hurst`.
    Vgamma {
        hurst: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSpec {
    #[serde(default)]
    pub family: FamilySpec,
    #[serde(default = "default_order")]
    pub order: usize,
    /// `[lo, hi]`; defaults to the family's natural domain.
    #[serde(default)]
    pub domain: Option<[f64; 2]>,
    #[serde(default)]
    pub knobs: ModelKnobs,
}

fn default_order() -> usize {
    64
}

impl ModelSpec {
    pub fn build(&self) -> whitenoise::Result<ProcessModel> {
        let m = match &self.family {
            FamilySpec::Bm => ProcessModel::bm(self.order)?,
            FamilySpec::Bridge => ProcessModel::bridge(self.order)?,
            FamilySpec::Fbm { hurst } => ProcessModel::fbm(*hurst, self.order)?,
            FamilySpec::Mbm { h } => {
                let [lo, hi] = self.domain.unwrap_or([0.0, 1.0]);
                ProcessModel::mbm(h.clone(), Domain::new(lo, hi)?, self.order)?
            }
            FamilySpec::Vgamma { hurst } => ProcessModel::vgamma(VGammaKernel::power_law(*hurst), self.order)?,
        };
        let m = match self.domain {
            Some([lo, hi]) if !matches!(self.family, FamilySpec::Mbm { .. }) => m.with_domain(Domain::new(lo, hi)?)?,
            _ => m,
        };
        Ok(m.with_knobs(self.knobs.clone()))
    }
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            family: FamilySpec::Bm,
            order: default_order(),
            domain: None,
            knobs: ModelKnobs::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct McSpec {
    #[serde(default = "default_paths")]
    pub paths: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default = "default_sampler")]
    pub sampler: Sampler,
}

fn default_paths() -> usize {
    2_000
}
fn default_seed() -> u64 {
    1
}
fn default_sampler() -> Sampler {
    Sampler::Cholesky
}

impl Default for McSpec {
    fn default() -> Self {
        Self {
            paths: default_paths(),
            seed: default_seed(),
            sampler: default_sampler(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    /// Relative L² residual for the Itô and Tanaka checks.
    #[serde(default = "d_relative")]
    pub relative: f64,
    /// Absolute covariance error for `covcheck`.
    #[serde(default = "d_covariance")]
    pub covariance: f64,
    /// Maximum relative truncation defect accepted for Hermite ensembles.
    #[serde(default = "d_defect")]
    pub defect: f64,
    /// Standard errors allowed between Monte Carlo means and their targets.
    #[serde(default = "d_sigmas")]
    pub sigmas: f64,
    /// Relative gap between the Monte Carlo and quadrature `∫ℓ²`.
    #[serde(default = "d_l2")]
    pub l2: f64,
    /// Orthonormality error for `basis-check`.
    #[serde(default = "d_basis")]
    pub basis: f64,
    /// Relative error of the coefficient decay check in `basis-check`.
    #[serde(default = "d_assumption")]
    pub assumption: f64,
    /// Largest coefficient difference against a golden table.
    #[serde(default = "d_golden")]
    pub golden: f64,
}

fn d_relative() -> f64 {
    0.05
}
fn d_covariance() -> f64 {
    1e-2
}
fn d_defect() -> f64 {
    1e-2
}
fn d_sigmas() -> f64 {
    3.0
}
fn d_l2() -> f64 {
    0.15
}
fn d_golden() -> f64 {
    1e-8
}
fn d_basis() -> f64 {
    1e-10
}
fn d_assumption() -> f64 {
    1e-3
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            relative: d_relative(),
            covariance: d_covariance(),
            defect: d_defect(),
            sigmas: d_sigmas(),
            l2: d_l2(),
            basis: d_basis(),
            assumption: d_assumption(),
            golden: d_golden(),
        }
    }
}

/// Functions `f(t, x)` for the Itô check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ItoSpec {
    Power { n: i32 },
    Cosine { frequency: f64 },
    TimeTimesX,
    Mollified { level: f64, eps: f64 },
}

impl ItoSpec {
    pub fn build(self) -> Box<dyn ItoFunction> {
        match self {
            ItoSpec::Power { n } => Box::new(Power(n)),
            ItoSpec::Cosine { frequency } => Box::new(Cosine { frequency }),
            ItoSpec::TimeTimesX => Box::new(TimeTimesX),
            ItoSpec::Mollified { level, eps } => Box::new(Mollified { level, eps }),
        }
    }
}

/// Integrands `φ(t, x)` for forward and Wick sums.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IntegrandKind {
    Power { n: i32 },
    Cosine { frequency: f64 },
    TimeTimesX,
}

impl IntegrandKind {
    pub fn build(self, horizon: f64) -> IntegrandSpec {
        match self {
            IntegrandKind::Power { n } => IntegrandSpec::power(n),
            IntegrandKind::Cosine { frequency: w } => IntegrandSpec::new(
                format!("cos({w}x)"),
                move |_, x| (w * x).cos(),
                move |_, x| -w * (w * x).sin(),
                GrowthTag {
                    constant: 1.0,
                    lambda: 0.0,
                },
            ),
            IntegrandKind::TimeTimesX => {
                let g = polynomial_growth(1);
                IntegrandSpec::new(
                    "t*x",
                    |t, x| t * x,
                    |t, _| t,
                    GrowthTag {
                        constant: horizon.abs().max(1.0) * g.constant,
                        lambda: g.lambda,
                    },
                )
            }
        }
    }
}

/// Deterministic functions of time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum TimeFn {
    Constant {
        value: f64,
    },
    /// `1` on `[a, b]`, `0` elsewhere.
    Indicator {
        a: f64,
        b: f64,
    },
    /// `intercept + slope · t`.
    Linear {
        intercept: f64,
        slope: f64,
    },
    /// `amplitude · cos(frequency · t + phase)`.
    Cosine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
}

impl TimeFn {
    pub fn eval(self, t: f64) -> f64 {
        match self {
            TimeFn::Constant { value } => value,
            TimeFn::Indicator { a, b } => f64::from(u8::from(a <= t && t <= b)),
            TimeFn::Linear { intercept, slope } => intercept + slope * t,
            TimeFn::Cosine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).cos(),
        }
    }
}

/// Test functions `Φ(x)` for the occupation check.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum PhiSpec {
    Abs,
    Cosine {
        frequency: f64,
    },
    /// Indicator of every other bin of the level grid in use.
    BinParity,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ItoBlock {
    #[serde(default = "d_ito_fn")]
    pub function: ItoSpec,
    /// Step counts, each dividing `grid.steps`; defaults to `n/8, n/4, n/2, n`.
    #[serde(default)]
    pub ladder: Option<Vec<usize>>,
}

fn d_ito_fn() -> ItoSpec {
    ItoSpec::Power { n: 2 }
}

impl Default for ItoBlock {
    fn default() -> Self {
        Self {
            function: d_ito_fn(),
            ladder: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TanakaBlock {
    #[serde(default)]
    pub level: f64,
    /// `(ε, steps)` rungs; defaults to `(0.4, 512), (0.2, 1024), (0.1, 2048)`.
    /// Paths are sampled on the least common multiple of the step counts,
    /// so `grid.steps` is ignored here.
    #[serde(default)]
    pub ladder: Option<Vec<(f64, usize)>>,
    #[serde(default = "d_tanaka_h")]
    pub half_width: f64,
    #[serde(default = "d_tanaka_tol")]
    pub tolerance: f64,
}

fn d_tanaka_h() -> f64 {
    0.025
}
fn d_tanaka_tol() -> f64 {
    0.1
}

impl Default for TanakaBlock {
    fn default() -> Self {
        Self {
            level: 0.0,
            ladder: None,
            half_width: d_tanaka_h(),
            tolerance: d_tanaka_tol(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WienerBlock {
    #[serde(default = "d_wiener_f")]
    pub f: TimeFn,
    #[serde(default)]
    pub a: f64,
    #[serde(default = "one")]
    pub b: f64,
}

fn d_wiener_f() -> TimeFn {
    TimeFn::Constant { value: 1.0 }
}
fn one() -> f64 {
    1.0
}

impl Default for WienerBlock {
    fn default() -> Self {
        Self {
            f: d_wiener_f(),
            a: 0.0,
            b: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LocaltimeBlock {
    #[serde(default = "d_mode")]
    pub mode: LocalTimeMode,
    #[serde(default = "d_lt_h")]
    pub half_width: f64,
    /// Level at which the estimate is compared with its mean.
    #[serde(default)]
    pub anchor: f64,
}

fn d_mode() -> LocalTimeMode {
    LocalTimeMode::Weighted
}
fn d_lt_h() -> f64 {
    0.05
}

impl Default for LocaltimeBlock {
    fn default() -> Self {
        Self {
            mode: d_mode(),
            half_width: d_lt_h(),
            anchor: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OccupationBlock {
    #[serde(default = "d_phi")]
    pub phi: PhiSpec,
    #[serde(default = "d_mode")]
    pub mode: LocalTimeMode,
    #[serde(default = "d_occ_ladder")]
    pub half_widths: Vec<f64>,
}

fn d_phi() -> PhiSpec {
    PhiSpec::Abs
}
fn d_occ_ladder() -> Vec<f64> {
    vec![0.2, 0.1, 0.05, 0.025]
}

impl Default for OccupationBlock {
    fn default() -> Self {
        Self {
            phi: d_phi(),
            mode: d_mode(),
            half_widths: d_occ_ladder(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct L2Block {
    #[serde(default = "d_lt_h")]
    pub half_width: f64,
    /// Skip the Monte Carlo estimate.
    #[serde(default)]
    pub quadrature_only: bool,
}

impl Default for L2Block {
    fn default() -> Self {
        Self {
            half_width: d_lt_h(),
            quadrature_only: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SdeBlock {
    #[serde(default = "d_alpha")]
    pub alpha: TimeFn,
    #[serde(default = "d_beta")]
    pub beta: TimeFn,
    #[serde(default = "one")]
    pub x0: f64,
}

fn d_alpha() -> TimeFn {
    TimeFn::Constant { value: 0.1 }
}
fn d_beta() -> TimeFn {
    TimeFn::Constant { value: 1.0 }
}

impl Default for SdeBlock {
    fn default() -> Self {
        Self {
            alpha: d_alpha(),
            beta: d_beta(),
            x0: 1.0,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CovcheckBlock {
    /// Times whose pairs are compared; defaults to the grid without `t = 0`.
    #[serde(default)]
    pub times: Option<Vec<f64>>,
    /// Compare against this model's truncated covariance table instead of
    /// the closed form.
    #[serde(default)]
    pub reference: Option<FamilySpec>,
    /// Compare `c_k(t)` against a stored `k,value` table.
    #[serde(default)]
    pub golden: Option<GoldenTable>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GoldenTable {
    pub path: PathBuf,
    pub t: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default = "d_out")]
    pub dir: PathBuf,
}

fn d_out() -> PathBuf {
    PathBuf::from("out")
}

impl Default for OutputSpec {
    fn default() -> Self {
        Self { dir: d_out() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "schema")]
    pub schema_version: u32,
    #[serde(default)]
    pub command: Option<Command>,
    #[serde(default)]
    pub model: ModelSpec,
    #[serde(default = "d_grid")]
    pub grid: GridSpec,
    #[serde(default)]
    pub mc: McSpec,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub output: OutputSpec,
    #[serde(default)]
    pub covcheck: CovcheckBlock,
    #[serde(default)]
    pub ito: ItoBlock,
    #[serde(default)]
    pub tanaka: TanakaBlock,
    #[serde(default)]
    pub integrand: Option<IntegrandKind>,
    #[serde(default)]
    pub wiener: WienerBlock,
    #[serde(default)]
    pub localtime: LocaltimeBlock,
    #[serde(default)]
    pub occupation: OccupationBlock,
    #[serde(default)]
    pub l2: L2Block,
    #[serde(default)]
    pub sde: SdeBlock,
}

fn schema() -> u32 {
    SCHEMA_VERSION
}
fn d_grid() -> GridSpec {
    GridSpec::uniform(1.0, 512)
}

impl Default for RunConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("every field has a default")
    }
}

/// Flags that override scalar fields of the config.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub paths: Option<usize>,
    pub steps: Option<usize>,
    pub order: Option<usize>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn apply(&mut self, command: Command, o: &Overrides) -> Result<(), String> {
        if let Some(c) = self.command {
            if c != command {
                return Err(format!("config is for `{}` but `{}` was requested", c.name(), command.name()));
            }
        }
        self.command = Some(command);
        if let Some(v) = o.seed {
            self.mc.seed = v;
        }
        if let Some(v) = o.paths {
            self.mc.paths = v;
        }
        if let Some(v) = o.steps {
            self.grid.steps = v;
        }
        if let Some(v) = o.order {
            self.model.order = v;
        }
        if let Some(v) = &o.out {
            self.output.dir = v.clone();
        }
        Ok(())
    }

    pub fn ito_ladder(&self) -> Vec<usize> {
        self.ito.ladder.clone().unwrap_or_else(|| default_ladder(self.grid.steps))
    }

    pub fn tanaka_ladder(&self) -> Vec<(f64, usize)> {
        self.tanaka
            .ladder
            .clone()
            .unwrap_or_else(|| vec![(0.4, 512), (0.2, 1024), (0.1, 2048)])
    }

    /// Step count the Tanaka ensemble is sampled on.
    pub fn tanaka_steps(&self) -> usize {
        fn gcd(a: usize, b: usize) -> usize {
            if b == 0 {
                a
            } else {
                gcd(b, a % b)
            }
        }
        self.tanaka_ladder()
            .iter()
            .fold(1, |acc, &(_, s)| acc / gcd(acc, s.max(1)) * s.max(1))
    }

    /// Checks everything that does not need a computation.
    pub fn validate(&self) -> Result<(), String> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        let positive = |name: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(format!("`{name}` must be positive, got {v}"))
            }
        };
        let t = &self.tolerances;
        positive("tolerances.relative", t.relative)?;
        positive("tolerances.covariance", t.covariance)?;
        positive("tolerances.defect", t.defect)?;
        positive("tolerances.sigmas", t.sigmas)?;
        positive("tolerances.l2", t.l2)?;
        positive("tolerances.basis", t.basis)?;
        positive("tolerances.assumption", t.assumption)?;
        positive("tolerances.golden", t.golden)?;
        if self.mc.paths == 0 {
            return Err("`mc.paths` must be at least 1".into());
        }
        self.grid.times().map_err(|e| e.to_string())?;
        let n = self.grid.steps;
        let divides = |s: usize| s > 0 && n.is_multiple_of(s);
        match self.command {
            Some(Command::Covcheck) => {
                if self.covcheck.reference.is_some() && self.covcheck.golden.is_some() {
                    return Err("`covcheck.reference` and `covcheck.golden` are mutually exclusive".into());
                }
                if let Some(g) = &self.covcheck.golden {
                    if !g.t.is_finite() {
                        return Err(format!("`covcheck.golden.t` must be finite, got {}", g.t));
                    }
                }
            }
            Some(Command::VerifyIto) => {
                let ladder = self.ito_ladder();
                if ladder.is_empty() || !ladder.iter().all(|&s| divides(s)) {
                    return Err(format!("every ladder entry must divide grid.steps = {n}: {ladder:?}"));
                }
                if let ItoSpec::Mollified { eps, .. } = self.ito.function {
                    positive("ito.function.eps", eps)?;
                }
            }
            Some(Command::VerifyTanaka) => {
                let ladder = self.tanaka_ladder();
                if ladder.is_empty() {
                    return Err("`tanaka.ladder` must not be empty".into());
                }
                for &(eps, s) in &ladder {
                    positive("tanaka.ladder eps", eps)?;
                    if s == 0 {
                        return Err("tanaka rungs need at least one step".into());
                    }
                }
                if self.tanaka_steps() > 1 << 16 {
                    return Err(format!("tanaka rungs {ladder:?} need more than 65536 sampling steps"));
                }
                positive("tanaka.half_width", self.tanaka.half_width)?;
                positive("tanaka.tolerance", self.tanaka.tolerance)?;
            }
            Some(Command::Localtime) => positive("localtime.half_width", self.localtime.half_width)?,
            Some(Command::Occupation) => {
                if self.occupation.half_widths.is_empty() {
                    return Err("`occupation.half_widths` must not be empty".into());
                }
                for &h in &self.occupation.half_widths {
                    positive("occupation.half_widths", h)?;
                }
            }
            Some(Command::L2Diag) => positive("l2.half_width", self.l2.half_width)?,
            Some(Command::Wiener) => {
                if self.wiener.b.partial_cmp(&self.wiener.a) != Some(std::cmp::Ordering::Greater) {
                    return Err("`wiener.b` must exceed `wiener.a`".into());
                }
            }
            Some(Command::Sde) if self.mc.paths < 2 => return Err("`sde` needs at least two paths".into()),
            _ => {}
        }
        Ok(())
    }
}

fn default_ladder(n: usize) -> Vec<usize> {
    [8, 4, 2, 1].iter().filter(|&&d| n.is_multiple_of(d)).map(|d| n / d).collect()
}
