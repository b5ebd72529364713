//! Group-spec files, run configuration and the `kleingreen` subcommands.
//!
//! Spec files are JSON with complex numbers as `[re, im]` pairs and the point at
//! infinity as the string `"inf"`. Output floats carry 17 significant digits so
//! that identical input gives byte-identical output.

use std::ffi::OsString;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, ErrorKind, Result};
use crate::freegroup::{ball, Alphabet, Letter, Word};
use crate::fuchsian::{
    build_markov, fixed_point_codings_hold, green_s0, j_limit_point, multiplier_product, relation_residual, substitute,
    FuchsianSpec, Side,
};
use crate::green::{
    green_divisors, green_genus0, green_pair_points, green_pair_series, harmonicity_residual, nu_b_period_real, Divisor,
    GreenResult,
};
use crate::kleinian::{
    check_disc_lemmas, component_green, expected_rank, green_sn1, limit_set_sample, FactorDomain, FactorInput,
    KleinianSpec,
};
use crate::moebius::{MapClass, MoebiusMap, SpherePoint};
use crate::periods::{a_period_numeric, tau_matrix};
use crate::schottky::{Circle, SchottkyGroup, Verdict};

pub const EXIT_OK: i32 = 0;
/// A self-check ran but some invariant failed.
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_CONVERGENCE: i32 = 3;
pub const EXIT_NUMERICAL: i32 = 4;

/// Exit code for an error, by its category.
pub fn exit_code(e: &Error) -> i32 {
    match e.kind() {
        ErrorKind::Validation => EXIT_VALIDATION,
        ErrorKind::Convergence => EXIT_CONVERGENCE,
        ErrorKind::Numerical => EXIT_NUMERICAL,
    }
}

// ---------------------------------------------------------------------------
// Spec file schema

/// `[[a, b], [c, d]]`, each entry `[re, im]`.
pub type MatrixSpec = [[[f64; 2]; 2]; 2];

/// A finite point `[re, im]` or `"inf"`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PointSpec {
    Finite([f64; 2]),
    Named(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CircleSpec {
    pub center: [f64; 2],
    pub radius: f64,
    /// The disc is the outside of the circle.
    #[serde(default, skip_serializing_if = "is_false")]
    pub outside: bool,
}

fn is_false(b: &bool) -> bool {
    !*b
}

/// A Schottky group: circles `C₁..C_{2p}` (`g_i` sends `C_i` to `C_{p+i}`),
/// optional explicit generators and the base point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchottkySection {
    /// Omitted: each pair of circles is joined by the reflection-composite pairing.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<MatrixSpec>>,
    pub circles: Vec<CircleSpec>,
    pub basepoint: PointSpec,
}

/// A value the fixture is known to produce.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExpectedValue {
    pub quantity: String,
    pub value: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance: Option<f64>,
    /// Where the value comes from, e.g. `analytic` or `computed`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Metadata {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub expected: Vec<ExpectedValue>,
}

impl Metadata {
    pub fn is_empty(&self) -> bool {
        *self == Metadata::default()
    }

    pub fn named(name: &str, description: &str) -> Self {
        Metadata { name: Some(name.into()), description: Some(description.into()), expected: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchottkyFile {
    #[serde(default, skip_serializing_if = "Metadata::is_empty")]
    pub metadata: Metadata,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub generators: Option<Vec<MatrixSpec>>,
    pub circles: Vec<CircleSpec>,
    pub basepoint: PointSpec,
}

impl SchottkyFile {
    pub fn section(&self) -> SchottkySection {
        SchottkySection { generators: self.generators.clone(), circles: self.circles.clone(), basepoint: self.basepoint.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FuchsianFile {
    #[serde(default, skip_serializing_if = "Metadata::is_empty")]
    pub metadata: Metadata,
    /// `f₁..f_{2p}`.
    pub generators: Vec<MatrixSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub invariant_circle: Option<CircleSpec>,
    /// Polygon sides `4p`, in boundary order.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sides: Option<Vec<CircleSpec>>,
    pub schottky: SchottkySection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSection {
    pub disc: CircleSpec,
    #[serde(default)]
    pub sides: Vec<CircleSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorSection {
    pub generators: Vec<MatrixSpec>,
    pub schottky: SchottkySection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<DomainSection>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KleinianFile {
    #[serde(default, skip_serializing_if = "Metadata::is_empty")]
    pub metadata: Metadata,
    #[serde(default)]
    pub factors: Vec<FactorSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma0: Option<SchottkySection>,
    pub gamma: SchottkySection,
    /// Flattened `G₀` generator `k` maps to generator `dictionary[k]` of `Γ`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<Vec<usize>>,
}

/// Top level of a spec file, tagged by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum GroupSpecFile {
    Schottky(SchottkyFile),
    Fuchsian(FuchsianFile),
    Quasifuchsian(FuchsianFile),
    Kleinian(KleinianFile),
}

impl GroupSpecFile {
    pub fn metadata(&self) -> &Metadata {
        match self {
            GroupSpecFile::Schottky(f) => &f.metadata,
            GroupSpecFile::Fuchsian(f) | GroupSpecFile::Quasifuchsian(f) => &f.metadata,
            GroupSpecFile::Kleinian(f) => &f.metadata,
        }
    }
}

/// A validated group, ready for the numerical modules.
#[derive(Debug, Clone)]
pub enum Model {
    Schottky(SchottkyGroup),
    Fuchsian(FuchsianSpec),
    Kleinian(KleinianSpec),
}

impl Model {
    /// The Schottky group the series run over: the group itself, the partner
    /// of a Fuchsian group, or `Γ` of a Kleinian model.
    pub fn schottky(&self) -> &SchottkyGroup {
        match self {
            Model::Schottky(g) => g,
            Model::Fuchsian(f) => f.schottky(),
            Model::Kleinian(k) => k.gamma(),
        }
    }
}

fn point_from(p: &PointSpec, field: &str) -> Result<SpherePoint> {
    match p {
        PointSpec::Finite([re, im]) if re.is_finite() && im.is_finite() => Ok(SpherePoint::new(*re, *im)),
        PointSpec::Finite(_) => Err(Error::Invalid(format!("{field}: non-finite coordinate"))),
        PointSpec::Named(s) if s == "inf" => Ok(SpherePoint::Infinity),
        PointSpec::Named(s) => Err(Error::Parse(format!("{field}: expected [re, im] or \"inf\", found \"{s}\""))),
    }
}

pub fn point_to(z: SpherePoint) -> PointSpec {
    match z.finite() {
        Some(z) => PointSpec::Finite([z.re, z.im]),
        None => PointSpec::Named("inf".into()),
    }
}

fn circle_from(c: &CircleSpec, field: &str) -> Result<Circle> {
    if !(c.radius.is_finite() && c.radius > 0.0) || !c.center.iter().all(|x| x.is_finite()) {
        return Err(Error::Invalid(format!("{field}: circle needs a finite centre and a positive radius")));
    }
    let center = Complex64::new(c.center[0], c.center[1]);
    Ok(if c.outside { Circle::exterior(center, c.radius) } else { Circle::new(center, c.radius) })
}

pub fn circle_to(c: &Circle) -> CircleSpec {
    CircleSpec { center: [c.center.re, c.center.im], radius: c.radius, outside: c.outside }
}

fn circles_from(cs: &[CircleSpec], field: &str) -> Result<Vec<Circle>> {
    cs.iter().enumerate().map(|(k, c)| circle_from(c, &format!("{field}[{k}]"))).collect()
}

fn matrix_from(m: &MatrixSpec, field: &str) -> Result<MoebiusMap> {
    let e = |r: usize, c: usize| Complex64::new(m[r][c][0], m[r][c][1]);
    MoebiusMap::new(e(0, 0), e(0, 1), e(1, 0), e(1, 1)).map_err(|err| Error::Invalid(format!("{field}: {err}")))
}

pub fn matrix_to(m: &MoebiusMap) -> MatrixSpec {
    let p = |z: Complex64| [z.re, z.im];
    [[p(m.a), p(m.b)], [p(m.c), p(m.d)]]
}

fn matrices_from(ms: &[MatrixSpec], field: &str) -> Result<Vec<MoebiusMap>> {
    ms.iter().enumerate().map(|(k, m)| matrix_from(m, &format!("{field}[{k}]"))).collect()
}

fn schottky_from(s: &SchottkySection, field: &str) -> Result<SchottkyGroup> {
    let circles = circles_from(&s.circles, &format!("{field}.circles"))?;
    let basepoint = point_from(&s.basepoint, &format!("{field}.basepoint"))?;
    match &s.generators {
        Some(g) => SchottkyGroup::build(matrices_from(g, &format!("{field}.generators"))?, circles, basepoint),
        None => SchottkyGroup::from_circle_pairs(circles, basepoint),
    }
}

pub fn schottky_to(g: &SchottkyGroup) -> SchottkySection {
    SchottkySection {
        generators: Some(g.generators().iter().map(matrix_to).collect()),
        circles: g.circles().iter().map(circle_to).collect(),
        basepoint: point_to(g.basepoint()),
    }
}

fn fuchsian_from(f: &FuchsianFile, needs_circle: bool) -> Result<FuchsianSpec> {
    let circle = match (&f.invariant_circle, needs_circle) {
        (Some(c), true) => Some(circle_from(c, "invariant_circle")?),
        (None, true) => return Err(Error::Invalid("a fuchsian spec needs invariant_circle".into())),
        (Some(_), false) => {
            return Err(Error::Invalid("a quasifuchsian spec has no round invariant circle; use kind fuchsian".into()))
        }
        (None, false) => None,
    };
    let sides = f.sides.as_ref().map(|s| circles_from(s, "sides")).transpose()?;
    FuchsianSpec::new(matrices_from(&f.generators, "generators")?, circle, sides, schottky_from(&f.schottky, "schottky")?)
}

fn kleinian_from(k: &KleinianFile) -> Result<KleinianSpec> {
    let factors = k
        .factors
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let field = format!("factors[{i}]");
            let domain = f
                .domain
                .as_ref()
                .map(|d| {
                    Ok::<_, Error>(FactorDomain {
                        disc: circle_from(&d.disc, &format!("{field}.domain.disc"))?,
                        sides: circles_from(&d.sides, &format!("{field}.domain.sides"))?,
                    })
                })
                .transpose()?;
            Ok(FactorInput {
                generators: matrices_from(&f.generators, &format!("{field}.generators"))?,
                schottky: schottky_from(&f.schottky, &format!("{field}.schottky"))?,
                domain,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let gamma0 = k.gamma0.as_ref().map(|s| schottky_from(s, "gamma0")).transpose()?;
    KleinianSpec::new(factors, gamma0, schottky_from(&k.gamma, "gamma")?, k.dictionary.clone())
}

/// Validates a parsed file and hands it to the matching builder.
pub fn build_model(file: &GroupSpecFile) -> Result<Model> {
    Ok(match file {
        GroupSpecFile::Schottky(s) => Model::Schottky(schottky_from(&s.section(), "schottky")?),
        GroupSpecFile::Fuchsian(f) => Model::Fuchsian(fuchsian_from(f, true)?),
        GroupSpecFile::Quasifuchsian(f) => Model::Fuchsian(fuchsian_from(f, false)?),
        GroupSpecFile::Kleinian(k) => Model::Kleinian(kleinian_from(k)?),
    })
}

/// Parses spec text. Syntax and schema errors carry line and column.
pub fn parse_spec_str(text: &str) -> Result<(GroupSpecFile, Model)> {
    let file: GroupSpecFile = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    let model = build_model(&file)?;
    Ok((file, model))
}

/// Reads and validates a spec file.
pub fn parse_spec(path: &Path) -> Result<(GroupSpecFile, Model)> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    parse_spec_str(&text).map_err(|e| match e {
        Error::Parse(msg) => Error::Parse(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// The spec file describing a model.
pub fn spec_file_from_model(model: &Model, metadata: Metadata) -> GroupSpecFile {
    match model {
        Model::Schottky(g) => {
            let s = schottky_to(g);
            GroupSpecFile::Schottky(SchottkyFile { metadata, generators: s.generators, circles: s.circles, basepoint: s.basepoint })
        }
        Model::Fuchsian(f) => {
            let file = FuchsianFile {
                metadata,
                generators: f.generators().iter().map(matrix_to).collect(),
                invariant_circle: f.invariant_circle().map(circle_to),
                sides: f.sides().map(|s| s.iter().map(circle_to).collect()),
                schottky: schottky_to(f.schottky()),
            };
            if file.invariant_circle.is_some() {
                GroupSpecFile::Fuchsian(file)
            } else {
                GroupSpecFile::Quasifuchsian(file)
            }
        }
        Model::Kleinian(k) => GroupSpecFile::Kleinian(KleinianFile {
            metadata,
            factors: k
                .factors()
                .iter()
                .map(|f| FactorSection {
                    generators: f.group.generators().iter().map(matrix_to).collect(),
                    schottky: schottky_to(f.group.schottky()),
                    domain: f.domain.as_ref().map(|d| DomainSection {
                        disc: circle_to(&d.disc),
                        sides: d.sides.iter().map(circle_to).collect(),
                    }),
                })
                .collect(),
            gamma0: k.gamma0().map(schottky_to),
            gamma: schottky_to(k.gamma()),
            dictionary: Some(k.dictionary().to_vec()),
        }),
    }
}

struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + Write>(&mut self, w: &mut W, v: f64) -> io::Result<()> {
        write!(w, "{v:.16e}")
    }

    fn write_f32<W: ?Sized + Write>(&mut self, w: &mut W, v: f32) -> io::Result<()> {
        write!(w, "{:.16e}", v as f64)
    }
}

/// Compact JSON with every float written as `{:.16e}`; non-finite floats become `null`.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut buf = Vec::new();
    let mut ser = serde_json::Serializer::with_formatter(&mut buf, FixedFloats);
    value.serialize(&mut ser).expect("serializing to memory");
    String::from_utf8(buf).expect("serde_json writes UTF-8")
}

fn fmt_f(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else {
        x.to_string()
    }
}

// ---------------------------------------------------------------------------
// Run configuration

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum Format {
    #[default]
    Json,
    Csv,
}

#[derive(Debug, Clone, Args)]
pub struct RunConfig {
    /// Truncation length L (default: 8, lowered for large ranks to keep the word count bounded).
    #[arg(long, global = true)]
    pub max_word_length: Option<usize>,
    /// Iteration depth for limit points.
    #[arg(long, global = true, default_value_t = 40)]
    pub depth: usize,
    /// Target tail for the green command.
    #[arg(long, global = true, default_value_t = 1e-6)]
    pub tol: f64,
    /// Contour and circle sample count.
    #[arg(long, global = true, default_value_t = 512)]
    pub samples: usize,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    pub format: Format,
    /// Worker threads (overridden by GREEN_THREADS).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    /// Report wall time (makes output run-dependent).
    #[arg(long, global = true)]
    pub timing: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { max_word_length: None, depth: 40, tol: 1e-6, samples: 512, format: Format::Json, threads: None, timing: false }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_word_length == Some(0) {
            return Err(Error::Invalid("--max-word-length must be at least 1".into()));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(Error::Invalid("--tol must be positive".into()));
        }
        if self.depth == 0 || self.samples < 4 {
            return Err(Error::Invalid("--depth must be positive and --samples at least 4".into()));
        }
        Ok(())
    }

    /// Truncation length for series over `g`.
    pub fn length(&self, g: &SchottkyGroup) -> usize {
        self.max_word_length.unwrap_or_else(|| g.default_gate_length())
    }

    /// Thread count: `GREEN_THREADS` wins over `--threads`.
    pub fn thread_count(&self) -> Result<Option<usize>> {
        match std::env::var("GREEN_THREADS") {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .map(Some)
                .ok_or_else(|| Error::Invalid(format!("GREEN_THREADS={v} is not a positive integer"))),
            Err(_) => Ok(self.threads),
        }
    }
}

// ---------------------------------------------------------------------------
// Command line

#[derive(Debug, Parser)]
#[command(name = "kleingreen", version, about = "Green's functions of Schottky, Fuchsian and Kleinian uniformizations")]
pub struct Cli {
    #[command(flatten)]
    pub config: RunConfig,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Default)]
pub enum SideArg {
    #[default]
    S0,
    S1,
}

#[derive(Debug, Clone, Args)]
pub struct GreenArgs {
    /// Spec file; omitted for the genus-0 formula on the sphere.
    pub spec: Option<PathBuf>,
    /// Point `a` of `(a) − (b)`: `x`, `x,y` or `inf`.
    #[arg(long, allow_hyphen_values = true)]
    pub a: Option<String>,
    /// Point `b` of `(a) − (b)`.
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<String>,
    /// Point `c` of `(c) − (d)`.
    #[arg(long, allow_hyphen_values = true)]
    pub c: Option<String>,
    /// Point `d` of `(c) − (d)`.
    #[arg(long, allow_hyphen_values = true)]
    pub d: Option<String>,
    /// Degree-zero divisor `m@point;m@point;…`, instead of --a/--b.
    #[arg(long = "divisor-a", allow_hyphen_values = true)]
    pub divisor_a: Option<String>,
    /// Degree-zero divisor, instead of --c/--d.
    #[arg(long = "divisor-b", allow_hyphen_values = true)]
    pub divisor_b: Option<String>,
    /// Boundary component of a Fuchsian spec.
    #[arg(long, value_enum, default_value_t = SideArg::S0)]
    pub side: SideArg,
    /// Component `S_i` (1-based) of a Kleinian spec; default `S_{n+1}`.
    #[arg(long)]
    pub component: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Evaluate the Green's function.
    Green(GreenArgs),
    /// Truncated period matrix `τ`.
    Periods { spec: PathBuf },
    /// Poincaré series gate and exponent estimate.
    Dimension { spec: PathBuf },
    /// Limit-set sample, one point per row.
    LimitSet { spec: PathBuf },
    /// Run the invariant checks on a spec.
    Selfcheck { spec: PathBuf },
    /// Classify the generators.
    Classify { spec: PathBuf },
}

/// Parses `x`, `x,y` or `inf`.
pub fn parse_point(s: &str) -> Result<SpherePoint> {
    let t = s.trim();
    if t == "inf" {
        return Ok(SpherePoint::Infinity);
    }
    let nums = t
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|_| Error::Parse(format!("point \"{s}\": expected x, x,y or inf"))))
        .collect::<Result<Vec<_>>>()?;
    match nums[..] {
        [x] if x.is_finite() => Ok(SpherePoint::real(x)),
        [x, y] if x.is_finite() && y.is_finite() => Ok(SpherePoint::new(x, y)),
        _ => Err(Error::Parse(format!("point \"{s}\": expected x, x,y or inf"))),
    }
}

/// Parses `m@point;m@point;…`.
pub fn parse_divisor(s: &str) -> Result<Divisor> {
    let terms = s
        .split(';')
        .filter(|t| !t.trim().is_empty())
        .map(|t| {
            let (m, p) = t
                .split_once('@')
                .ok_or_else(|| Error::Parse(format!("divisor term \"{t}\": expected m@point")))?;
            let m = m.trim().parse::<i64>().map_err(|_| Error::Parse(format!("divisor term \"{t}\": bad multiplicity")))?;
            Ok((parse_point(p)?, m))
        })
        .collect::<Result<Vec<_>>>()?;
    Divisor::new(terms)
}

// ---------------------------------------------------------------------------
// Output records

#[derive(Debug, Clone, Serialize)]
pub struct GreenOutput {
    pub value: f64,
    #[serde(rename = "L")]
    pub max_len: usize,
    pub tail: f64,
    pub rho: f64,
    /// `X` (or `X̄` for a Kleinian `S_{n+1}`).
    #[serde(rename = "X")]
    pub x: Vec<f64>,
    pub condition_number: f64,
    /// `tail ≤ tol`.
    pub within_tol: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wall_time_s: Option<f64>,
}

impl GreenOutput {
    fn from_result(r: &GreenResult, tol: f64) -> Self {
        GreenOutput {
            value: r.value,
            max_len: r.max_len,
            tail: r.tail,
            rho: r.rho,
            x: r.x.clone(),
            condition_number: r.condition_number,
            within_tol: r.tail <= tol,
            wall_time_s: None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PeriodsOutput {
    #[serde(rename = "L")]
    pub max_len: usize,
    pub tau: Vec<Vec<[f64; 2]>>,
    pub tails: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct DimensionOutput {
    #[serde(rename = "L")]
    pub max_len: usize,
    pub rho: f64,
    pub verdict: Verdict,
    pub abscissa: f64,
    pub sums: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LimitPoint {
    pub re: f64,
    pub im: f64,
    pub word: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub residual: f64,
    pub tolerance: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

impl Check {
    fn measure(name: &str, residual: Result<f64>, tolerance: f64) -> Self {
        match residual {
            Ok(r) => Check { name: name.into(), passed: r <= tolerance, residual: r, tolerance, note: None },
            Err(e) => Check { name: name.into(), passed: false, residual: f64::NAN, tolerance, note: Some(e.to_string()) },
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SelfcheckOutput {
    pub passed: bool,
    pub checks: Vec<Check>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassifyRow {
    pub group: String,
    pub index: usize,
    pub class: MapClass,
    pub trace: [f64; 2],
    #[serde(skip_serializing_if = "Option::is_none")]
    pub multiplier: Option<[f64; 2]>,
}

#[derive(Debug, Clone)]
pub enum Output {
    Green(GreenOutput),
    Periods(PeriodsOutput),
    Dimension(DimensionOutput),
    LimitSet(Vec<LimitPoint>),
    Selfcheck(SelfcheckOutput),
    Classify(Vec<ClassifyRow>),
}

impl Output {
    pub fn json(&self) -> String {
        match self {
            Output::Green(o) => to_json(o),
            Output::Periods(o) => to_json(o),
            Output::Dimension(o) => to_json(o),
            Output::LimitSet(o) => to_json(&serde_json::json!({ "points": o })),
            Output::Selfcheck(o) => to_json(o),
            Output::Classify(o) => to_json(&serde_json::json!({ "generators": o })),
        }
    }

    pub fn csv(&self) -> String {
        let mut s = String::new();
        let mut line = |l: String| {
            s.push_str(&l);
            s.push('\n');
        };
        match self {
            Output::Green(o) => {
                line("value,L,tail,rho,condition_number,within_tol,X".into());
                let x: Vec<String> = o.x.iter().map(|&v| fmt_f(v)).collect();
                line(format!(
                    "{},{},{},{},{},{},{}",
                    fmt_f(o.value),
                    o.max_len,
                    fmt_f(o.tail),
                    fmt_f(o.rho),
                    fmt_f(o.condition_number),
                    o.within_tol,
                    x.join(";")
                ));
            }
            Output::Periods(o) => {
                line("i,j,re,im,tail".into());
                for (i, row) in o.tau.iter().enumerate() {
                    for (j, z) in row.iter().enumerate() {
                        line(format!("{},{},{},{},{}", i + 1, j + 1, fmt_f(z[0]), fmt_f(z[1]), fmt_f(o.tails[i][j])));
                    }
                }
            }
            Output::Dimension(o) => {
                line("L,rho,verdict,abscissa".into());
                line(format!("{},{},{},{}", o.max_len, fmt_f(o.rho), o.verdict, fmt_f(o.abscissa)));
            }
            Output::LimitSet(o) => {
                line("re,im,word".into());
                for p in o {
                    line(format!("{},{},{}", fmt_f(p.re), fmt_f(p.im), p.word));
                }
            }
            Output::Selfcheck(o) => {
                line("name,passed,residual,tolerance".into());
                for c in &o.checks {
                    line(format!("{},{},{},{}", c.name, c.passed, fmt_f(c.residual), fmt_f(c.tolerance)));
                }
            }
            Output::Classify(o) => {
                line("group,index,class,trace_re,trace_im,multiplier_re,multiplier_im".into());
                for r in o {
                    let (mr, mi) = r.multiplier.map_or((String::new(), String::new()), |m| (fmt_f(m[0]), fmt_f(m[1])));
                    line(format!("{},{},{},{},{},{mr},{mi}", r.group, r.index, r.class, fmt_f(r.trace[0]), fmt_f(r.trace[1])));
                }
            }
        }
        s
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => self.json() + "\n",
            Format::Csv => self.csv(),
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            Output::Selfcheck(o) if !o.passed => EXIT_CHECK_FAILED,
            _ => EXIT_OK,
        }
    }
}

// ---------------------------------------------------------------------------
// Commands

fn required_point(p: &Option<String>, name: &str) -> Result<SpherePoint> {
    parse_point(p.as_deref().ok_or_else(|| Error::Invalid(format!("--{name} is required")))?)
}

enum GreenInput {
    Points([SpherePoint; 4]),
    Divisors(Divisor, Divisor),
}

fn green_input(args: &GreenArgs) -> Result<GreenInput> {
    match (&args.divisor_a, &args.divisor_b) {
        (Some(a), Some(b)) => Ok(GreenInput::Divisors(parse_divisor(a)?, parse_divisor(b)?)),
        (None, None) => Ok(GreenInput::Points([
            required_point(&args.a, "a")?,
            required_point(&args.b, "b")?,
            required_point(&args.c, "c")?,
            required_point(&args.d, "d")?,
        ])),
        _ => Err(Error::Invalid("--divisor-a and --divisor-b go together".into())),
    }
}

/// `green`: the Green's function for the model (or the sphere when `model` is `None`).
pub fn cmd_green(model: Option<&Model>, config: &RunConfig, args: &GreenArgs) -> Result<GreenOutput> {
    let input = green_input(args)?;
    let start = Instant::now();
    let result = match model {
        None => {
            let (a, b) = match input {
                GreenInput::Points([a, b, c, d]) => (Divisor::pair(a, b)?, Divisor::pair(c, d)?),
                GreenInput::Divisors(a, b) => (a, b),
            };
            GreenResult {
                value: green_genus0(&a, &b)?,
                max_len: 0,
                tail: 0.0,
                rho: 0.0,
                x: Vec::new(),
                condition_number: 1.0,
                group_sum_tail: 0.0,
                class_sum_tails: Vec::new(),
            }
        }
        Some(Model::Schottky(g)) => {
            let l = config.length(g);
            match input {
                GreenInput::Points([a, b, c, d]) => green_pair_points(g, a, b, c, d, l)?,
                GreenInput::Divisors(a, b) => green_divisors(g, &a, &b, l)?,
            }
        }
        Some(Model::Fuchsian(f)) => {
            let side = match args.side {
                SideArg::S0 => Side::S0,
                SideArg::S1 => Side::S1,
            };
            let l = config.length(f.schottky());
            match input {
                GreenInput::Points([a, b, c, d]) => green_s0(f, a, b, c, d, l, side)?,
                GreenInput::Divisors(a, b) => green_divisors(&f.side_group(side)?, &a, &b, l)?,
            }
        }
        Some(Model::Kleinian(k)) => {
            let [a, b, c, d] = match input {
                GreenInput::Points(p) => p,
                GreenInput::Divisors(..) => {
                    return Err(Error::Invalid("Kleinian specs take --a/--b/--c/--d".into()));
                }
            };
            match args.component {
                Some(i) => {
                    let group = k
                        .factors()
                        .get(i.wrapping_sub(1))
                        .map(|f| f.group.schottky())
                        .unwrap_or(k.gamma());
                    component_green(k, i, a, b, c, d, config.length(group))?
                }
                None => green_sn1(k, a, b, c, d, config.length(k.gamma()))?,
            }
        }
    };
    let mut out = GreenOutput::from_result(&result, config.tol);
    if config.timing {
        out.wall_time_s = Some(start.elapsed().as_secs_f64());
    }
    Ok(out)
}

/// `periods`: `τ` of the model's Schottky group.
pub fn cmd_periods(model: &Model, config: &RunConfig) -> Result<PeriodsOutput> {
    let g = model.schottky();
    let tau = tau_matrix(g, config.length(g))?;
    Ok(PeriodsOutput {
        max_len: tau.max_len,
        tau: tau.entries.iter().map(|row| row.iter().map(|z| [z.re, z.im]).collect()).collect(),
        tails: tau.tails.clone(),
    })
}

/// `dimension`: the convergence gate at the configured length.
pub fn cmd_dimension(model: &Model, config: &RunConfig) -> Result<DimensionOutput> {
    let g = model.schottky();
    let r = g.estimate_convergence(config.length(g))?;
    Ok(DimensionOutput { max_len: r.max_len, rho: r.rho, verdict: r.verdict, abscissa: r.abscissa, sums: r.sums })
}

fn limit_row(z: SpherePoint, word: String) -> LimitPoint {
    let w = z.finite().unwrap_or(Complex64::new(f64::INFINITY, f64::INFINITY));
    LimitPoint { re: w.re, im: w.im, word }
}

/// `limit-set`: attracting fixed points of all nonempty words of length `≤ L`
/// (Schottky, Fuchsian), or the sample of `Λ(G)` (Kleinian).
pub fn cmd_limit_set(model: &Model, config: &RunConfig) -> Result<Vec<LimitPoint>> {
    let l = config.length(model.schottky());
    match model {
        Model::Schottky(g) => ball(g.alphabet(), l)
            .into_iter()
            .filter(|w| !w.is_empty())
            .map(|w| Ok(limit_row(g.limit_point(&w, config.depth)?, w.to_string())))
            .collect(),
        Model::Fuchsian(f) => ball(&Alphabet::free(2 * f.genus()), l)
            .into_iter()
            .filter(|w| !w.is_empty())
            .map(|w| Ok(limit_row(f.word_to_map(&w)?.fixed_points()?.0, w.to_string())))
            .collect(),
        Model::Kleinian(k) => Ok(limit_set_sample(k, l)?
            .into_iter()
            .map(|(w, s, z)| limit_row(z, format!("{w}|{s}")))
            .collect()),
    }
}

fn class_row(group: &str, index: usize, m: &MoebiusMap) -> ClassifyRow {
    let class = m.classify();
    let t = m.trace();
    let multiplier = match class {
        MapClass::Loxodromic => m.multiplier().ok().map(|k| [k.re, k.im]),
        _ => None,
    };
    ClassifyRow { group: group.into(), index: index + 1, class, trace: [t.re, t.im], multiplier }
}

/// `classify`: class, trace and multiplier of every generator in the model.
pub fn cmd_classify(model: &Model) -> Vec<ClassifyRow> {
    let rows = |name: &str, gens: &[MoebiusMap]| -> Vec<ClassifyRow> {
        gens.iter().enumerate().map(|(i, m)| class_row(name, i, m)).collect()
    };
    match model {
        Model::Schottky(g) => rows("gamma", g.generators()),
        Model::Fuchsian(f) => [rows("f", f.generators()), rows("gamma", f.schottky().generators())].concat(),
        Model::Kleinian(k) => {
            let mut out = Vec::new();
            for (i, f) in k.factors().iter().enumerate() {
                out.extend(rows(&format!("q{}", i + 1), f.group.generators()));
            }
            if let Some(g0) = k.gamma0() {
                out.extend(rows("gamma0", g0.generators()));
            }
            out.extend(rows("gamma", k.gamma().generators()));
            out
        }
    }
}

/// Up to `count` well-separated finite points of the fundamental domain near
/// the base point, on a golden-angle spiral.
pub fn domain_sample_points(g: &SchottkyGroup, count: usize) -> Vec<SpherePoint> {
    let clearance = |z: Complex64, c: &Circle| ((z - c.center).norm() - c.radius).abs();
    let (center, scale) = match g.basepoint().finite() {
        Some(z) => (z, g.circles().iter().map(|c| clearance(z, c)).fold(f64::INFINITY, f64::min)),
        None => (Complex64::new(0.0, 0.0), g.circles().iter().map(|c| c.center.norm() + c.radius).fold(1.0, f64::max)),
    };
    let scale = if scale.is_finite() { scale } else { 1.0 };
    let n = 2000;
    let mut out: Vec<Complex64> = Vec::new();
    for k in 1..n {
        let z = center + Complex64::from_polar(2.0 * scale * (k as f64 / n as f64).sqrt(), k as f64 * 2.399963229728653);
        let clear = g.circles().iter().all(|c| clearance(z, c) >= 0.1 * scale);
        let apart = out.iter().all(|w| (z - w).norm() >= 0.5 * scale);
        if clear && apart && g.fundamental_domain_contains(z.into()) {
            out.push(z);
            if out.len() == count {
                break;
            }
        }
    }
    out.into_iter().map(SpherePoint::from).collect()
}

fn max_abs(v: impl IntoIterator<Item = f64>) -> f64 {
    v.into_iter().fold(0.0, |m, x| if x.is_nan() || m.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

/// The Schottky-level invariant checks at length `l`.
pub fn schottky_checks(g: &SchottkyGroup, l: usize, config: &RunConfig) -> Vec<Check> {
    let p = g.genus();
    let mut checks = Vec::new();
    let gate = g.convergence();
    checks.push(Check {
        name: "convergence_gate".into(),
        passed: gate.converges(),
        residual: gate.rho,
        tolerance: 1.0,
        note: Some(format!("verdict {}", gate.verdict)),
    });
    let a_periods = (|| {
        let mut worst: f64 = 0.0;
        for i in 0..p {
            for j in 0..p {
                let v = a_period_numeric(g, i, j, l, config.samples)? / Complex64::new(0.0, std::f64::consts::TAU);
                let delta = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v - delta).norm());
            }
        }
        Ok(worst)
    })();
    checks.push(Check::measure("a_periods", a_periods, 1e-3));
    let tau = tau_matrix(g, l);
    checks.push(Check::measure(
        "period_symmetry",
        tau.as_ref()
            .map(|t| max_abs((0..p).flat_map(|i| (0..p).map(move |j| (i, j))).map(|(i, j)| t.entries[i][j].re - t.entries[j][i].re)))
            .map_err(Clone::clone),
        1e-6,
    ));
    checks.push(Check::measure(
        "period_negative_definite",
        tau.as_ref()
            .map(|t| {
                let m = DMatrix::from_fn(p, p, |i, j| 0.5 * (t.entries[i][j].re + t.entries[j][i].re));
                m.symmetric_eigen().eigenvalues.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
            })
            .map_err(Clone::clone),
        0.0,
    ));
    if p == 1 {
        checks.push(Check::measure(
            "cyclic_tau_is_log_q",
            tau.as_ref().map(|t| (t.entries[0][0] - g.multiplier(0).ln()).norm()).map_err(Clone::clone),
            1e-12,
        ));
    }

    let pts = domain_sample_points(g, 4);
    if pts.len() < 4 {
        checks.push(Check::measure("sample_points", Err(Error::Invalid("too few fundamental-domain points".into())), 0.0));
        return checks;
    }
    let (a, b, c, d) = (pts[0], pts[1], pts[2], pts[3]);
    let sym = (|| {
        let x = green_pair_points(g, a, b, c, d, l)?.value;
        let y = green_pair_points(g, c, d, a, b, l)?.value;
        Ok((x - y).abs())
    })();
    checks.push(Check::measure("green_symmetry", sym, 1e-5));
    checks.push(Check::measure("harmonicity", harmonicity_residual(g, a, b, c, 1e-3, l), 1e-3));
    let invariance = (|| {
        let h = MoebiusMap::new(Complex64::new(1.2, 0.4), Complex64::new(0.3, -0.7), Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0))?
            .normalize()?;
        let gh = g.conjugate(&h)?;
        let x = green_pair_points(g, a, b, c, d, l)?.value;
        let y = green_pair_points(&gh, h.apply(a), h.apply(b), h.apply(c), h.apply(d), l)?.value;
        Ok((x - y).abs() / x.abs().max(1.0))
    })();
    checks.push(Check::measure("moebius_invariance", invariance, 1e-9));
    let decay = (|| {
        let s = green_pair_series(g, a, b, c, d, l)?;
        let r = s
            .group_sum
            .decay_ratio()
            .ok_or_else(|| Error::Invalid(format!("L = {l} is too short for a decay ratio")))?;
        Ok((r - g.convergence().rho).abs())
    })();
    checks.push(Check::measure("truncation_decay", decay, 0.1));
    checks
}

fn fuchsian_checks(f: &FuchsianSpec, config: &RunConfig) -> Vec<Check> {
    let g = f.schottky();
    let l = config.length(g);
    let p = f.genus();
    let mut checks = vec![Check::measure("surface_relation", Ok(relation_residual(f.generators())), 1e-9)];
    if f.invariant_circle().is_some() {
        let codings = build_markov(f).and_then(|part| fixed_point_codings_hold(f, &part));
        checks.push(Check::measure("fixed_point_codings", codings.map(|ok| if ok { 0.0 } else { 1.0 }), 0.0));
    }
    let equivariance = (|| {
        let mut worst: f64 = 0.0;
        let w = Word::from_letters(&[Letter::gen(0), Letter::inv((p - 1) as u16)]);
        for i in 0..p {
            let fi = Word::letter(Letter::gen(i as u16));
            let conj = fi.mul(&w).mul(&fi.inverse());
            let lhs = j_limit_point(f, &conj, config.depth)?;
            let gamma = g.word_to_map(&substitute(f, &fi)?);
            let rhs = gamma.apply(j_limit_point(f, &w, config.depth)?);
            worst = worst.max(lhs.chordal_distance(&rhs));
        }
        Ok(worst)
    })();
    checks.push(Check::measure("j_equivariance", equivariance, 1e-9));
    let pts = domain_sample_points(g, 2);
    let multiplier = (|| {
        let [a, b] = <[SpherePoint; 2]>::try_from(pts.clone())
            .map_err(|_| Error::Invalid("too few fundamental-domain points".into()))?;
        let mut worst: f64 = 0.0;
        for i in 0..p {
            let mu = multiplier_product(f, a, b, i, l)?;
            let nu = nu_b_period_real(g, a, b, i, l)?;
            worst = worst.max((mu.norm().ln() - nu).abs());
        }
        Ok(worst)
    })();
    checks.push(Check::measure("multiplier_period", multiplier, 1e-9));
    checks.extend(schottky_checks(g, l, config));
    checks
}

fn kleinian_checks(k: &KleinianSpec, config: &RunConfig) -> Vec<Check> {
    let g = k.gamma();
    let l = config.length(g);
    let genera: Vec<usize> = k.factors().iter().map(|f| f.genus()).collect();
    let mut checks = vec![Check::measure(
        "rank_arithmetic",
        Ok((expected_rank(k.p0(), &genera) as f64 - g.genus() as f64).abs()),
        0.0,
    )];
    if !k.factors().is_empty() && k.factors().iter().all(|f| f.domain.is_some()) {
        checks.push(Check::measure("disc_lemmas", check_disc_lemmas(k, l.min(3)).map(|_| 0.0), 0.0));
    }
    let pts = domain_sample_points(g, 4);
    if pts.len() == 4 {
        let (a, b, c, d) = (pts[0], pts[1], pts[2], pts[3]);
        if k.n() == 0 {
            let deg = (|| Ok((green_sn1(k, a, b, c, d, l)?.value - green_pair_points(g, a, b, c, d, l)?.value).abs()))();
            checks.push(Check::measure("degeneration", deg, 1e-12));
        }
        let sym = (|| Ok((green_sn1(k, a, b, c, d, l)?.value - green_sn1(k, c, d, a, b, l)?.value).abs()))();
        checks.push(Check::measure("sn1_symmetry", sym, 1e-5));
    }
    checks.extend(schottky_checks(g, l, config));
    checks
}

/// `selfcheck`: every invariant that applies to the model, with residuals.
pub fn cmd_selfcheck(model: &Model, config: &RunConfig) -> SelfcheckOutput {
    let checks = match model {
        Model::Schottky(g) => schottky_checks(g, config.length(g), config),
        Model::Fuchsian(f) => fuchsian_checks(f, config),
        Model::Kleinian(k) => kleinian_checks(k, config),
    };
    SelfcheckOutput { passed: checks.iter().all(|c| c.passed), checks }
}

fn load(path: &Path) -> Result<Model> {
    parse_spec(path).map(|(_, m)| m)
}

/// Runs one parsed command line.
pub fn execute(cli: &Cli) -> Result<Output> {
    let config = &cli.config;
    config.validate()?;
    let run = || -> Result<Output> {
        Ok(match &cli.command {
            Command::Green(args) => {
                let model = args.spec.as_deref().map(load).transpose()?;
                Output::Green(cmd_green(model.as_ref(), config, args)?)
            }
            Command::Periods { spec } => Output::Periods(cmd_periods(&load(spec)?, config)?),
            Command::Dimension { spec } => Output::Dimension(cmd_dimension(&load(spec)?, config)?),
            Command::LimitSet { spec } => Output::LimitSet(cmd_limit_set(&load(spec)?, config)?),
            Command::Selfcheck { spec } => Output::Selfcheck(cmd_selfcheck(&load(spec)?, config)),
            Command::Classify { spec } => Output::Classify(cmd_classify(&load(spec)?)),
        })
    };
    match config.thread_count()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Invalid(format!("thread pool: {e}")))?
            .install(run),
        None => run(),
    }
}

/// Entry point of the binary: parses `args`, prints the output and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(out) => {
            let mut stdout = io::stdout().lock();
            let _ = stdout.write_all(out.render(cli.config.format).as_bytes());
            out.exit_code()
        }
        Err(e) => {
            eprintln!("kleingreen: {e}");
            exit_code(&e)
        }
    }
}
