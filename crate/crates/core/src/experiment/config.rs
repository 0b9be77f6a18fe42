use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::integrators::MethodFamily;
use crate::spectral::{
    HyperviscositySpec, RepartitionKind, RepartitionSpec, KDV_DELTA, KDV_POINTS, KDV_T_END,
    ZDS_POINTS, ZDS_T_END,
};

fn config_err(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    Stability,
    Converge,
    Longtime,
    Solve,
    Reference,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Stability => "stability",
            Command::Converge => "converge",
            Command::Longtime => "longtime",
            Command::Solve => "solve",
            Command::Reference => "reference",
        }
    }
}

impl FromStr for Command {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stability" => Ok(Command::Stability),
            "converge" => Ok(Command::Converge),
            "longtime" => Ok(Command::Longtime),
            "solve" => Ok(Command::Solve),
            "reference" => Ok(Command::Reference),
            _ => Err(config_err(format!("unknown command {s:?}"))),
        }
    }
}

/// One modification applied to a run; hyperviscosity picks up `dt` from the
/// run's step count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RunModification {
    None,
    Repartition(RepartitionSpec),
    Hyperviscosity(HyperviscositySpec),
}

impl RunModification {
    pub fn label(&self) -> String {
        match self {
            RunModification::None => "none".into(),
            RunModification::Repartition(r) => r.to_string(),
            RunModification::Hyperviscosity(h) => h.to_string(),
        }
    }
}

impl fmt::Display for RunModification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// Reference solution settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSpec {
    pub method: MethodFamily,
    /// `None` picks [`ExperimentConfig::reference_steps`] automatically.
    pub steps: Option<usize>,
    pub repartition: Option<RepartitionSpec>,
}

/// Settings of a single CLI invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub command: Command,
    pub problem: String,
    pub nx: usize,
    /// KdV dispersion coefficient; ignored for ZDS.
    pub delta: f64,
    pub t_end: f64,
    pub methods: Vec<MethodFamily>,
    pub steps: Vec<usize>,
    pub modifications: Vec<RunModification>,
    pub out: PathBuf,
    pub reference: ReferenceSpec,
    /// Number of equispaced sample times for `longtime`.
    pub samples: usize,
    /// Intermediate snapshots written by `solve`.
    pub snapshots: usize,
    /// Worker threads; 0 uses all logical cores.
    pub threads: usize,
    pub rho: Vec<f64>,
    pub k1_range: (f64, f64),
    pub k2_range: Option<(f64, f64)>,
    pub grid: (usize, usize),
    pub imex_sweep: bool,
    pub split_scan: bool,
}

impl ExperimentConfig {
    /// Defaults for a command and problem.
    pub fn defaults(command: Command, problem: &str) -> Result<Self> {
        let kdv = match problem {
            "zds" => false,
            "kdv" => true,
            _ => {
                return Err(config_err(format!(
                    "unknown problem {problem:?} (expected zds or kdv)"
                )))
            }
        };
        let (nx, t_end) = if kdv {
            (KDV_POINTS, KDV_T_END)
        } else {
            (ZDS_POINTS, ZDS_T_END)
        };
        let long = command == Command::Longtime;
        let steps = match command {
            Command::Solve => vec![2000],
            _ if long || kdv => vec![56000],
            _ => vec![500, 1000, 2000, 4000, 8000, 16000, 32000],
        };
        let methods = match command {
            Command::Solve => vec![MethodFamily::Erk4],
            Command::Converge if !kdv => {
                vec![
                    MethodFamily::Erk4,
                    MethodFamily::Esdc6,
                    MethodFamily::Epbm5,
                    MethodFamily::Imrk4,
                ]
            }
            _ => vec![MethodFamily::Erk4, MethodFamily::Esdc6, MethodFamily::Epbm5],
        };
        let modifications = if long {
            vec![
                RunModification::None,
                RunModification::Repartition(RepartitionSpec::abs_k3(PI / 64.0)?),
                RunModification::Repartition(RepartitionSpec::k2(PI / 3.0)?),
                RunModification::Repartition(RepartitionSpec::identity(16.0)?),
            ]
        } else {
            vec![RunModification::None]
        };
        let reference = if kdv {
            ReferenceSpec {
                method: MethodFamily::Erk4,
                steps: None,
                repartition: Some(RepartitionSpec::abs_k3(PI / 64.0)?),
            }
        } else {
            ReferenceSpec {
                method: MethodFamily::Rk4,
                steps: None,
                repartition: None,
            }
        };
        Ok(Self {
            command,
            problem: problem.to_string(),
            nx,
            delta: KDV_DELTA,
            t_end,
            methods,
            steps,
            modifications,
            out: PathBuf::from("out"),
            reference,
            samples: if long || (kdv && command == Command::Reference) {
                30
            } else {
                0
            },
            snapshots: 0,
            threads: 0,
            rho: vec![0.0, PI / 2048.0],
            k1_range: (0.0, 60.0),
            k2_range: None,
            grid: (600, 200),
            imex_sweep: true,
            split_scan: false,
        })
    }

    /// Defaults, then the file's settings, then `overrides` (later wins).
    pub fn load(
        command: Command,
        file: Option<&Path>,
        overrides: &[(String, String)],
    ) -> Result<Self> {
        let mut pairs: Vec<(String, String)> = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_err(format!("cannot read config {}: {e}", path.display())))?;
            pairs.extend(parse_key_values(&text)?);
        }
        pairs.extend(overrides.iter().cloned());
        Self::from_pairs(command, &pairs)
    }

    pub fn from_pairs(command: Command, pairs: &[(String, String)]) -> Result<Self> {
        let problem = pairs
            .iter()
            .rev()
            .find(|(k, _)| k == "problem")
            .map(|(_, v)| v.clone())
            .unwrap_or_else(|| {
                if command == Command::Longtime {
                    "kdv"
                } else {
                    "zds"
                }
                .to_string()
            });
        let mut cfg = Self::defaults(command, &problem)?;
        let mut modifications: Option<Vec<RunModification>> = None;
        for (key, value) in pairs {
            cfg.set(key, value, &mut modifications)?;
        }
        if let Some(m) = modifications {
            cfg.modifications = m;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    fn set(
        &mut self,
        key: &str,
        value: &str,
        modifications: &mut Option<Vec<RunModification>>,
    ) -> Result<()> {
        let v = value.trim();
        let bad = |what: &str| config_err(format!("{key}: {what} (got {v:?})"));
        match key {
            "problem" => {}
            "nx" => self.nx = v.parse().map_err(|_| bad("expected an integer"))?,
            "delta" => self.delta = parse_number(v).map_err(|_| bad("expected a number"))?,
            "t_end" => self.t_end = parse_number(v).map_err(|_| bad("expected a number"))?,
            "methods" | "method" => {
                self.methods = split_list(v).map(|s| s.parse()).collect::<Result<_>>()?;
            }
            "steps" => {
                self.steps = split_list(v)
                    .map(|s| s.parse::<usize>().map_err(|_| bad("expected integers")))
                    .collect::<Result<_>>()?;
            }
            "repartition" | "hyperviscosity" => {
                let list = modifications.get_or_insert_with(Vec::new);
                list.retain(|m| match key {
                    "repartition" => {
                        !matches!(m, RunModification::Repartition(_) | RunModification::None)
                    }
                    _ => !matches!(m, RunModification::Hyperviscosity(_)),
                });
                for item in split_list(v) {
                    list.push(if key == "repartition" {
                        parse_repartition(item)?
                            .map_or(RunModification::None, RunModification::Repartition)
                    } else {
                        RunModification::Hyperviscosity(parse_hyperviscosity(item)?)
                    });
                }
            }
            "out" => self.out = PathBuf::from(v),
            "reference_method" => self.reference.method = v.parse()?,
            "reference_steps" => {
                self.reference.steps = Some(v.parse().map_err(|_| bad("expected an integer"))?)
            }
            "reference_repartition" => self.reference.repartition = parse_repartition(v)?,
            "samples" => self.samples = v.parse().map_err(|_| bad("expected an integer"))?,
            "snapshots" => self.snapshots = v.parse().map_err(|_| bad("expected an integer"))?,
            "threads" => self.threads = v.parse().map_err(|_| bad("expected an integer"))?,
            "rho" => self.rho = split_list(v).map(parse_angle).collect::<Result<_>>()?,
            "k1_range" => self.k1_range = parse_range(v)?,
            "k2_range" => self.k2_range = Some(parse_range(v)?),
            "grid" => {
                let (a, b) = v.split_once('x').ok_or_else(|| bad("expected N1xN2"))?;
                self.grid = (
                    a.trim().parse().map_err(|_| bad("expected N1xN2"))?,
                    b.trim().parse().map_err(|_| bad("expected N1xN2"))?,
                );
            }
            "imex_sweep" => {
                self.imex_sweep = parse_bool(v).ok_or_else(|| bad("expected true or false"))?
            }
            "split_scan" => {
                self.split_scan = parse_bool(v).ok_or_else(|| bad("expected true or false"))?
            }
            _ => return Err(config_err(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.nx < 32 || !self.nx.is_power_of_two() {
            return Err(config_err(format!(
                "nx must be a power of two >= 32, got {}",
                self.nx
            )));
        }
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(config_err(format!(
                "t_end must be positive, got {}",
                self.t_end
            )));
        }
        if !self.delta.is_finite() {
            return Err(config_err("delta must be finite"));
        }
        if self.methods.is_empty() {
            return Err(config_err("at least one method is required"));
        }
        if self.steps.is_empty() || self.steps.contains(&0) {
            return Err(config_err("step counts must be at least 1"));
        }
        if self.steps.windows(2).any(|w| w[0] >= w[1]) {
            return Err(config_err(format!(
                "step counts must be strictly increasing, got {:?}",
                self.steps
            )));
        }
        if self.modifications.is_empty() {
            return Err(config_err(
                "at least one modification (or none) is required",
            ));
        }
        if self.reference.steps == Some(0) {
            return Err(config_err("reference_steps must be at least 1"));
        }
        if self.command == Command::Longtime && self.samples == 0 {
            return Err(config_err("longtime needs samples >= 1"));
        }
        if self.grid.0 == 0 || self.grid.1 == 0 {
            return Err(config_err("grid resolution must be positive"));
        }
        for &rho in &self.rho {
            if !(0.0..std::f64::consts::FRAC_PI_2).contains(&rho) {
                return Err(config_err(format!("rho must lie in [0, pi/2), got {rho}")));
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    /// Explicit `reference_steps`, or the larger of the problem's usual
    /// count (200000 for ZDS, 560000 for KdV) and ten times the finest
    /// experiment, rounded up to a multiple of the coarsest.
    pub fn reference_steps(&self) -> usize {
        if let Some(n) = self.reference.steps {
            return n;
        }
        let base: usize = if self.problem == "kdv" {
            560000
        } else {
            200000
        };
        let finest = self.steps.iter().copied().max().unwrap_or(1);
        let coarsest = self.steps.iter().copied().min().unwrap_or(1);
        base.max(10 * finest).div_ceil(coarsest) * coarsest
    }
}

/// `key = value` lines; `#` starts a comment.
pub fn parse_key_values(text: &str) -> Result<Vec<(String, String)>> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            config_err(format!("line {}: expected key = value, got {raw:?}", i + 1))
        })?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

fn split_list(v: &str) -> impl Iterator<Item = &str> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty())
}

fn parse_bool(v: &str) -> Option<bool> {
    match v {
        "true" | "yes" | "1" => Some(true),
        "false" | "no" | "0" => Some(false),
        _ => None,
    }
}

fn parse_number(v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| config_err(format!("expected a number, got {v:?}")))?;
    if !x.is_finite() {
        return Err(config_err(format!("expected a finite number, got {v:?}")));
    }
    Ok(x)
}

/// A number or a multiple of pi: `0.1`, `pi`, `pi/128`, `3pi/4`, `3*pi/4`.
pub fn parse_angle(v: &str) -> Result<f64> {
    let s: String = v.chars().filter(|c| !c.is_whitespace()).collect();
    let Some((coeff, rest)) = s.split_once("pi") else {
        return parse_number(&s);
    };
    let coeff = coeff.trim_end_matches('*');
    let c = if coeff.is_empty() {
        1.0
    } else {
        parse_number(coeff)?
    };
    let d = match rest.strip_prefix('/') {
        Some(d) => parse_number(d)?,
        None if rest.is_empty() => 1.0,
        None => return Err(config_err(format!("bad angle {v:?}"))),
    };
    if d == 0.0 {
        return Err(config_err(format!("bad angle {v:?}")));
    }
    Ok(c * PI / d)
}

fn parse_range(v: &str) -> Result<(f64, f64)> {
    let (a, b) = v
        .split_once(':')
        .ok_or_else(|| config_err(format!("expected a range lo:hi, got {v:?}")))?;
    let r = (parse_number(a.trim())?, parse_number(b.trim())?);
    if r.1 < r.0 {
        return Err(config_err(format!("range must be ascending, got {v:?}")));
    }
    Ok(r)
}

/// `kind:param` with `kind` in `abs_k3`, `k2` (param is an angle) or
/// `identity` (param is epsilon); `none` gives `None`.
pub fn parse_repartition(v: &str) -> Result<Option<RepartitionSpec>> {
    let v = v.trim();
    if v == "none" {
        return Ok(None);
    }
    let (kind, param) = v
        .split_once(':')
        .ok_or_else(|| config_err(format!("expected kind:param for repartition, got {v:?}")))?;
    let kind: RepartitionKind = kind.trim().parse()?;
    let param = parse_angle(param)?;
    RepartitionSpec::new(kind, param)
        .map(Some)
        .map_err(|e| config_err(format!("repartition {v:?}: {e}")))
}

/// `m:gamma`, e.g. `8:1e10`.
pub fn parse_hyperviscosity(v: &str) -> Result<HyperviscositySpec> {
    let (m, g) = v
        .trim()
        .split_once(':')
        .ok_or_else(|| config_err(format!("expected m:gamma for hyperviscosity, got {v:?}")))?;
    let m: u32 = m.trim().parse().map_err(|_| {
        config_err(format!(
            "hyperviscosity order must be an integer, got {m:?}"
        ))
    })?;
    HyperviscositySpec::new(m, parse_number(g.trim())?)
        .map_err(|e| config_err(format!("hyperviscosity {v:?}: {e}")))
}
