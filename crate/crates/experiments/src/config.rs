//! Experiment configuration: INI-style `key = value` lines under
//! `[problem]`, `[conditions]`, `[run]` and `[output]`.

use std::path::{Path, PathBuf};

use ini::Ini;
use mtem_core::analysis::MIN_SURVIVORS;
use mtem_core::brownian::MAX_LEVEL;
use mtem_core::builtins::RadiusConstruction;
use mtem_core::Scheme;

use crate::error::{CliError, Result};
use crate::expr::Expr;

/// Printed by `mtem run --help`.
pub const CONFIG_HELP: &str = "\
CONFIG FILE KEYS (INI sections; `#` or `;` starts a comment)

[problem]
  name        example1 | example2 | linear | inline
  x0          initial state (default 2 for example1, 1 otherwise)
  a           example1 and linear drift parameter (default 1, resp. 0.5)
  b           linear diffusion parameter (default 0.3)
  epsilon     radius exponent in (0, 1) for the examples (default 0.5)
  h           truncation radius construction:
                example1: l-inverse (default) | remark21-inverse
                example2: remark21-inverse (default) | sqrt-closed-form
                linear:   wide (default, 1e6 / sqrt(delta)) | remark21-inverse
                inline:   remark21-inverse (default) | wide
  constants   provenance JSON from `mtem derive-constants` (relative to the
              config file); derived on the fly when absent
  drift       inline only: expression in x, e.g. `x - x^3`
  diffusion   inline only: expression in x, e.g. `|x|^1.5`
  lipschitz   inline only: nondecreasing expression in R, e.g. `3*R^2 + 1`

[conditions]
  p, q        moment and error exponents, 2 < q < p <= 6 (default 6, 4)
  r, k_bar    diffusion growth exponent and constant (optional)
  k, h        Khasminskii and monotonicity constants (required for inline)
  samples     sample count of each condition check (default 100000)
  radius      sampling radius of the condition checks (default 50)

[run]
  schemes     comma list of mtem, em, tem (default mtem)
  t_end       horizon T (default 1)
  levels      `6..12` or `6, 8, 10`; step T 2^-j, 0 <= j <= 26
  reference   fine:J (J at least every level) or closed-form[:J] (linear
              only; sups over the level-J grid, default deepest level + 4)
  replicates  at least 100
  seed        unsigned integer (overridden by --seed)

[output]
  dir           output directory (default mtem-out; overridden by --out-dir)
  error_ladder  default error_ladder.csv
  rate_fit      default rate_fit.json
  conditions    default conditions.json
  divergence    default divergence.csv
";

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemKind {
    Example1 { a: f64, epsilon: f64 },
    Example2 { epsilon: f64 },
    Linear { a: f64, b: f64 },
    Inline { drift: Expr, diffusion: Expr, lipschitz: Expr },
}

impl ProblemKind {
    pub fn name(&self) -> &'static str {
        match self {
            ProblemKind::Example1 { .. } => "example1",
            ProblemKind::Example2 { .. } => "example2",
            ProblemKind::Linear { .. } => "linear",
            ProblemKind::Inline { .. } => "inline",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RadiusChoice {
    /// `l(R) = 1/(3^4 R^{1-ε} e^{12R})` inverted (example1).
    LInverse,
    ProfileInverse,
    SqrtClosedForm,
    Wide,
}

impl RadiusChoice {
    pub fn name(self) -> &'static str {
        match self {
            RadiusChoice::LInverse => "l-inverse",
            RadiusChoice::ProfileInverse => "remark21-inverse",
            RadiusChoice::SqrtClosedForm => "sqrt-closed-form",
            RadiusChoice::Wide => "wide",
        }
    }

    pub fn construction(self) -> Option<RadiusConstruction> {
        match self {
            RadiusChoice::ProfileInverse => Some(RadiusConstruction::ProfileInverse),
            RadiusChoice::SqrtClosedForm => Some(RadiusConstruction::SqrtClosedForm),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceChoice {
    /// Exact solution; sups are taken over the grid at the given level.
    ClosedForm(u32),
    Fine(u32),
}

impl ReferenceChoice {
    pub fn label(self) -> String {
        match self {
            ReferenceChoice::ClosedForm(j) => format!("closed-form:{j}"),
            ReferenceChoice::Fine(j) => format!("fine:{j}"),
        }
    }
}

/// Explicit `[conditions]` entries; unset fields fall back to the built-in
/// problem's constants.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ConditionOverrides {
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub r: Option<f64>,
    pub k: Option<f64>,
    pub h: Option<f64>,
    pub k_bar: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputPaths {
    pub dir: PathBuf,
    pub error_ladder: String,
    pub rate_fit: String,
    pub conditions: String,
    pub divergence: String,
}

impl OutputPaths {
    pub fn error_ladder(&self) -> PathBuf {
        self.dir.join(&self.error_ladder)
    }
    pub fn rate_fit(&self) -> PathBuf {
        self.dir.join(&self.rate_fit)
    }
    pub fn conditions(&self) -> PathBuf {
        self.dir.join(&self.conditions)
    }
    pub fn divergence(&self) -> PathBuf {
        self.dir.join(&self.divergence)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: ProblemKind,
    pub x0: f64,
    pub radius: RadiusChoice,
    pub constants: Option<PathBuf>,
    pub conditions: ConditionOverrides,
    pub check_samples: usize,
    pub check_radius: f64,
    pub schemes: Vec<Scheme>,
    pub t_end: f64,
    pub levels: Vec<u32>,
    pub reference: ReferenceChoice,
    pub replicates: usize,
    pub seed: u64,
    pub output: OutputPaths,
}

const SECTIONS: [(&str, &[&str]); 4] = [
    (
        "problem",
        &["name", "x0", "a", "b", "epsilon", "h", "constants", "drift", "diffusion", "lipschitz"],
    ),
    ("conditions", &["p", "q", "r", "k", "h", "k_bar", "samples", "radius"]),
    ("run", &["schemes", "t_end", "levels", "reference", "replicates", "seed"]),
    ("output", &["dir", "error_ladder", "rate_fit", "conditions", "divergence"]),
];

struct Sections<'a>(&'a Ini);

impl Sections<'_> {
    fn raw(&self, section: &str, key: &str) -> Option<&str> {
        self.0.section(Some(section)).and_then(|s| s.get(key)).map(str::trim)
    }

    fn parse<T: std::str::FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        self.raw(section, key)
            .map(|v| {
                v.parse()
                    .map_err(|_| CliError::config(format!("[{section}] {key}: cannot parse `{v}`")))
            })
            .transpose()
    }

    fn required(&self, section: &str, key: &str) -> Result<&str> {
        self.raw(section, key)
            .ok_or_else(|| CliError::config(format!("[{section}] {key} is required")))
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::io(format!("reading {}", path.display()), e))?;
        let mut config = Self::parse(&text)?;
        if let (Some(c), Some(base)) = (&config.constants, path.parent()) {
            config.constants = Some(base.join(c));
        }
        Ok(config)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| CliError::config(e.to_string()))?;
        check_keys(&ini)?;
        let s = Sections(&ini);

        let name = s.required("problem", "name")?;
        let epsilon = s.parse("problem", "epsilon")?.unwrap_or(0.5);
        let problem = match name {
            "example1" => ProblemKind::Example1 {
                a: s.parse("problem", "a")?.unwrap_or(1.0),
                epsilon,
            },
            "example2" => ProblemKind::Example2 { epsilon },
            "linear" => ProblemKind::Linear {
                a: s.parse("problem", "a")?.unwrap_or(0.5),
                b: s.parse("problem", "b")?.unwrap_or(0.3),
            },
            "inline" => {
                let expr = |key: &str, var: &str| -> Result<Expr> {
                    Expr::parse(s.required("problem", key)?, var)
                        .map_err(|e| CliError::config(format!("[problem] {key}: {e}")))
                };
                ProblemKind::Inline {
                    drift: expr("drift", "x")?,
                    diffusion: expr("diffusion", "x")?,
                    lipschitz: expr("lipschitz", "R")?,
                }
            }
            other => return Err(CliError::config(format!("unknown problem `{other}`"))),
        };
        if !matches!(problem, ProblemKind::Inline { .. }) {
            for key in ["drift", "diffusion", "lipschitz"] {
                if s.raw("problem", key).is_some() {
                    return Err(CliError::config(format!(
                        "[problem] {key} only applies to inline problems"
                    )));
                }
            }
        }
        let x0 = s.parse("problem", "x0")?.unwrap_or(match problem {
            ProblemKind::Example1 { .. } => 2.0,
            _ => 1.0,
        });
        let radius = parse_radius(&problem, s.raw("problem", "h"))?;
        let constants = s.raw("problem", "constants").map(PathBuf::from);
        if constants.is_some() && !matches!(problem, ProblemKind::Example1 { .. } | ProblemKind::Example2 { .. }) {
            return Err(CliError::config("[problem] constants only applies to example1 and example2"));
        }

        let conditions = ConditionOverrides {
            p: s.parse("conditions", "p")?,
            q: s.parse("conditions", "q")?,
            r: s.parse("conditions", "r")?,
            k: s.parse("conditions", "k")?,
            h: s.parse("conditions", "h")?,
            k_bar: s.parse("conditions", "k_bar")?,
        };
        let check_samples = s.parse("conditions", "samples")?.unwrap_or(100_000);
        let check_radius: f64 = s.parse("conditions", "radius")?.unwrap_or(50.0);
        if check_samples == 0 || !(check_radius > 0.0) {
            return Err(CliError::config("[conditions] samples and radius must be positive"));
        }

        let schemes = s
            .raw("run", "schemes")
            .unwrap_or("mtem")
            .split(',')
            .map(|name| {
                name.trim()
                    .parse::<Scheme>()
                    .map_err(|e| CliError::config(format!("[run] schemes: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        let t_end: f64 = s.parse("run", "t_end")?.unwrap_or(1.0);
        if !(t_end > 0.0 && t_end.is_finite()) {
            return Err(CliError::config("[run] t_end must be positive"));
        }
        let levels = parse_levels(s.required("run", "levels")?)?;
        let reference = parse_reference(s.required("run", "reference")?, &levels)?;
        match reference {
            ReferenceChoice::ClosedForm(_) if !matches!(problem, ProblemKind::Linear { .. }) => {
                return Err(CliError::config(format!(
                    "no closed-form solution for problem `{}`",
                    problem.name()
                )));
            }
            ReferenceChoice::Fine(j) | ReferenceChoice::ClosedForm(j) if levels.iter().any(|&l| l > j) => {
                return Err(CliError::config(format!(
                    "reference level {j} is coarser than a ladder level"
                )));
            }
            _ => {}
        }
        let replicates: usize = s.parse("run", "replicates")?.unwrap_or(10_000);
        if replicates < MIN_SURVIVORS {
            return Err(CliError::TooFewReplicates(replicates));
        }
        let seed = s.parse("run", "seed")?.unwrap_or(0);

        let file = |key: &str, default: &str| s.raw("output", key).unwrap_or(default).to_string();
        let output = OutputPaths {
            dir: PathBuf::from(s.raw("output", "dir").unwrap_or("mtem-out")),
            error_ladder: file("error_ladder", "error_ladder.csv"),
            rate_fit: file("rate_fit", "rate_fit.json"),
            conditions: file("conditions", "conditions.json"),
            divergence: file("divergence", "divergence.csv"),
        };

        Ok(ExperimentConfig {
            problem,
            x0,
            radius,
            constants,
            conditions,
            check_samples,
            check_radius,
            schemes,
            t_end,
            levels,
            reference,
            replicates,
            seed,
            output,
        })
    }
}

fn check_keys(ini: &Ini) -> Result<()> {
    for (section, props) in ini.iter() {
        let Some(name) = section else {
            if let Some((key, _)) = props.iter().next() {
                return Err(CliError::config(format!("key `{key}` outside any section")));
            }
            continue;
        };
        let Some((_, known)) = SECTIONS.iter().find(|(s, _)| *s == name) else {
            return Err(CliError::config(format!("unknown section [{name}]")));
        };
        if let Some((key, _)) = props.iter().find(|(k, _)| !known.contains(k)) {
            return Err(CliError::config(format!("unknown key `{key}` in [{name}]")));
        }
    }
    Ok(())
}

fn parse_radius(problem: &ProblemKind, value: Option<&str>) -> Result<RadiusChoice> {
    use RadiusChoice::*;
    let allowed: &[RadiusChoice] = match problem {
        ProblemKind::Example1 { .. } => &[LInverse, ProfileInverse],
        ProblemKind::Example2 { .. } => &[ProfileInverse, SqrtClosedForm],
        ProblemKind::Linear { .. } => &[Wide, ProfileInverse],
        ProblemKind::Inline { .. } => &[ProfileInverse, Wide],
    };
    let Some(value) = value else {
        return Ok(allowed[0]);
    };
    allowed.iter().copied().find(|r| r.name() == value).ok_or_else(|| {
        let names: Vec<_> = allowed.iter().map(|r| r.name()).collect();
        CliError::config(format!(
            "[problem] h = `{value}` not available for {}; expected one of {}",
            problem.name(),
            names.join(", ")
        ))
    })
}

pub fn parse_levels(value: &str) -> Result<Vec<u32>> {
    let bad = || CliError::config(format!("[run] levels: cannot parse `{value}`"));
    let parse = |v: &str| v.trim().parse::<u32>().map_err(|_| bad());
    let mut levels = match value.split_once("..") {
        Some((lo, hi)) => {
            let (lo, hi) = (parse(lo)?, parse(hi.trim_start_matches('='))?);
            if lo > hi {
                return Err(bad());
            }
            (lo..=hi).collect()
        }
        None => value.split(',').map(parse).collect::<Result<Vec<_>>>()?,
    };
    levels.sort_unstable();
    levels.dedup();
    if let Some(&j) = levels.iter().find(|&&j| j > MAX_LEVEL) {
        return Err(CliError::config(format!("level {j} outside [0, {MAX_LEVEL}]")));
    }
    Ok(levels)
}

/// `fine:J`, `closed-form:J` or `closed-form`, which samples sups four
/// levels below the deepest ladder level.
pub fn parse_reference(value: &str, levels: &[u32]) -> Result<ReferenceChoice> {
    let bad = || CliError::config(format!("[run] reference: expected fine:J or closed-form[:J], got `{value}`"));
    let level = |j: &str| j.trim().parse::<u32>().ok().filter(|&j| j <= MAX_LEVEL).ok_or_else(bad);
    if value == "closed-form" {
        let deepest = levels.last().copied().unwrap_or(0);
        return Ok(ReferenceChoice::ClosedForm((deepest + 4).min(MAX_LEVEL)));
    }
    if let Some(j) = value.strip_prefix("closed-form:") {
        return level(j).map(ReferenceChoice::ClosedForm);
    }
    value.strip_prefix("fine:").ok_or_else(bad).and_then(level).map(ReferenceChoice::Fine)
}
