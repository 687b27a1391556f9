//! Flat `key = value` experiment configuration.
//!
//! Lines are `key = value`; `#` starts a comment. Command-line overrides are
//! merged on top of the file, so flags win.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use fracwave_core::spectral::Domain;
use fracwave_core::study::{CflPolicy, ErrorMetric, ExtendedParams, Problem, RungSpec, StepRule};
use fracwave_core::time::Scheme;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{config, HarnessError, Result};

/// Raw key/value pairs in key order.
pub type RawConfig = BTreeMap<String, String>;

pub const KEYS: &[&str] = &[
    "problem",
    "domain",
    "s",
    "scheme",
    "T",
    "dt",
    "ladder",
    "n",
    "Y",
    "M",
    "sigma",
    "slope",
    "metric",
    "cfl",
    "theta",
    "cfl_factor",
    "oracle_modes",
    "snapshots",
    "g",
    "h",
    "random_modes",
    "seed",
    "out",
];

/// Parses `key = value` lines.
pub fn parse(text: &str) -> Result<RawConfig> {
    let mut out = RawConfig::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| config(format!("line {}: expected `key = value`", i + 1)))?;
        insert(&mut out, k.trim(), v.trim())?;
    }
    Ok(out)
}

pub fn read(path: &Path) -> Result<RawConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
    parse(&text)
}

/// Parses one `key=value` override.
pub fn parse_override(arg: &str) -> Result<(String, String)> {
    let (k, v) = arg
        .split_once('=')
        .ok_or_else(|| config(format!("override `{arg}` is not `key=value`")))?;
    Ok((k.trim().to_string(), v.trim().to_string()))
}

/// Applies `overrides` on top of `base`.
pub fn merge(
    mut base: RawConfig,
    overrides: impl IntoIterator<Item = (String, String)>,
) -> Result<RawConfig> {
    for (k, v) in overrides {
        insert(&mut base, &k, &v)?;
    }
    Ok(base)
}

fn insert(map: &mut RawConfig, key: &str, value: &str) -> Result<()> {
    if !KEYS.contains(&key) {
        return Err(config(format!("unknown key `{key}`")));
    }
    map.insert(key.to_string(), value.to_string());
    Ok(())
}

/// Real number, optionally a multiple of `pi`: `1.5`, `pi/2`, `3*pi/4`.
pub fn parse_real(text: &str) -> Result<f64> {
    let bad = || config(format!("`{text}` is not a number"));
    let t: String = text
        .chars()
        .filter(|c| !c.is_whitespace())
        .collect::<String>()
        .to_lowercase();
    let (num, den) = t.split_once('/').unwrap_or((&t, "1"));
    let den: f64 = den.parse().map_err(|_| bad())?;
    let num = match num.strip_suffix("pi") {
        Some(c) => {
            let c = c.strip_suffix('*').unwrap_or(c);
            let c: f64 = if c.is_empty() {
                1.0
            } else {
                c.parse().map_err(|_| bad())?
            };
            c * PI
        }
        None => num.parse().map_err(|_| bad())?,
    };
    let v = num / den;
    if v.is_finite() {
        Ok(v)
    } else {
        Err(bad())
    }
}

fn parse_usize(key: &str, text: &str) -> Result<usize> {
    text.parse()
        .map_err(|_| config(format!("`{key}`: `{text}` is not a nonnegative integer")))
}

fn parse_list<T>(text: &str, f: impl Fn(&str) -> Result<T>) -> Result<Vec<T>> {
    text.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(f)
        .collect()
}

/// Which data set drives the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProblemKind {
    Paper1d,
    Paper2d,
    CustomModal,
}

/// A fully resolved experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: Problem,
    pub kind: ProblemKind,
    pub s: f64,
    pub scheme: Scheme,
    pub t_final: f64,
    pub step: StepRule,
    pub ladder: Vec<usize>,
    /// Mesh for single runs; defaults to the last ladder rung.
    pub n: usize,
    pub extended: ExtendedParams,
    pub metric: ErrorMetric,
    pub cfl: CflPolicy,
    /// When set, `Δt = cfl_factor · 2/√λ_max` replaces the step rule.
    pub cfl_factor: Option<f64>,
    pub oracle_modes: Option<usize>,
    pub snapshots: Vec<f64>,
    pub seed: u64,
    pub out: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn from_raw(raw: &RawConfig) -> Result<Self> {
        let get = |k: &str| raw.get(k).map(String::as_str);
        let real = |k: &str| get(k).map(parse_real).transpose();
        let kind = match get("problem").unwrap_or("paper-1d") {
            "paper-1d" => ProblemKind::Paper1d,
            "paper-2d" => ProblemKind::Paper2d,
            "custom-modal" => ProblemKind::CustomModal,
            other => return Err(config(format!("unknown problem `{other}`"))),
        };
        let domain = match (kind, get("domain")) {
            (ProblemKind::Paper1d, None | Some("interval")) => Domain::UnitInterval,
            (ProblemKind::Paper2d, None | Some("square")) => Domain::Square,
            (ProblemKind::CustomModal, None | Some("interval")) => Domain::UnitInterval,
            (ProblemKind::CustomModal, Some("square")) => Domain::Square,
            (_, Some(d)) => return Err(config(format!("domain `{d}` does not fit this problem"))),
        };
        let s = real("s")?.unwrap_or(0.5);
        if !(s > 0.0 && s < 1.0) {
            return Err(config(format!("s = {s} outside (0, 1)")));
        }
        let paper2d = kind == ProblemKind::Paper2d;
        let scheme = match get("scheme") {
            None if paper2d => Scheme::Leapfrog,
            None => Scheme::Trapezoidal,
            Some("trapezoidal") => Scheme::Trapezoidal,
            Some("leapfrog") => Scheme::Leapfrog,
            Some(other) => return Err(config(format!("unknown scheme `{other}`"))),
        };
        let t_final = real("T")?.unwrap_or(if paper2d { 1.5 } else { PI / 2.0 });
        if t_final.is_nan() || t_final <= 0.0 {
            return Err(config("T must be positive"));
        }
        let step = match get("dt") {
            None if paper2d => StepRule::Linear,
            None if scheme == Scheme::Leapfrog => StepRule::SPower,
            None => StepRule::HalfPower,
            Some("half-power") => StepRule::HalfPower,
            Some("s-power") => StepRule::SPower,
            Some("linear") => StepRule::Linear,
            Some(v) => {
                let dt = parse_real(v)?;
                if dt.is_nan() || dt <= 0.0 {
                    return Err(config("dt must be positive"));
                }
                StepRule::Explicit(dt)
            }
        };
        let ladder = match get("ladder") {
            Some(v) => parse_list(v, |t| parse_usize("ladder", t))?,
            None => vec![8, 16, 32, 64],
        };
        if ladder.is_empty() || ladder.iter().any(|&n| n < 2) {
            return Err(config("ladder needs at least one mesh with n >= 2"));
        }
        let n = match get("n") {
            Some(v) => parse_usize("n", v)?,
            None => *ladder.last().expect("nonempty ladder"),
        };
        if n < 2 {
            return Err(config("n must be at least 2"));
        }
        let mut extended = ExtendedParams {
            height: real("Y")?,
            elements: get("M").map(|v| parse_usize("M", v)).transpose()?,
            ..ExtendedParams::default()
        };
        if let Some(v) = real("sigma")? {
            extended.sigma = v;
        }
        if let Some(v) = real("slope")? {
            extended.slope = v;
        }
        let metric = match get("metric") {
            None if paper2d => ErrorMetric::L2DtStaggered,
            None => ErrorMetric::HsFinal,
            Some("hs-final") => ErrorMetric::HsFinal,
            Some("l2-dt-staggered") => ErrorMetric::L2DtStaggered,
            Some(other) => return Err(config(format!("unknown metric `{other}`"))),
        };
        let theta = real("theta")?.unwrap_or(0.5);
        let cfl = match get("cfl").unwrap_or("classical") {
            "enforce" => CflPolicy::Enforce { theta },
            "classical" => CflPolicy::Classical { theta },
            "report" => CflPolicy::Report { theta },
            other => return Err(config(format!("unknown cfl policy `{other}`"))),
        };
        let cfl_factor = real("cfl_factor")?;
        if cfl_factor.is_some_and(|f| f.is_nan() || f <= 0.0) {
            return Err(config("cfl_factor must be positive"));
        }
        let oracle_modes = get("oracle_modes")
            .map(|v| parse_usize("oracle_modes", v))
            .transpose()?;
        let snapshots = match get("snapshots") {
            Some(v) => parse_list(v, parse_real)?,
            None => vec![t_final],
        };
        let seed = match get("seed") {
            Some(v) => v
                .parse()
                .map_err(|_| config(format!("seed `{v}` is not an integer")))?,
            None => 0,
        };
        let problem = match kind {
            ProblemKind::Paper1d => Problem::Paper1d,
            ProblemKind::Paper2d => Problem::Paper2d,
            ProblemKind::CustomModal => {
                let random_modes = match get("random_modes") {
                    Some(v) => parse_usize("random_modes", v)?,
                    None => 3,
                };
                let (g, h) = match (get("g"), get("h")) {
                    (None, None) => random_modal(domain, random_modes, seed),
                    (g, h) => (
                        g.map(|v| parse_modes(domain, v))
                            .transpose()?
                            .unwrap_or_default(),
                        h.map(|v| parse_modes(domain, v))
                            .transpose()?
                            .unwrap_or_default(),
                    ),
                };
                Problem::CustomModal { domain, g, h }
            }
        };
        Ok(Self {
            problem,
            kind,
            s,
            scheme,
            t_final,
            step,
            ladder,
            n,
            extended,
            metric,
            cfl,
            cfl_factor,
            oracle_modes,
            snapshots,
            seed,
            out: get("out").map(PathBuf::from),
        })
    }

    pub fn rung(&self, n: usize) -> RungSpec {
        RungSpec {
            problem: self.problem.clone(),
            s: self.s,
            scheme: self.scheme,
            t_final: self.t_final,
            step: self.step,
            n,
            extended: self.extended,
            metric: self.metric,
            cfl: self.cfl,
            oracle_modes: self.oracle_modes,
        }
    }

    /// Canonical `key = value` text that parses back to `self`.
    pub fn to_text(&self) -> String {
        let mut t = String::new();
        let kind = match self.kind {
            ProblemKind::Paper1d => "paper-1d",
            ProblemKind::Paper2d => "paper-2d",
            ProblemKind::CustomModal => "custom-modal",
        };
        let _ = writeln!(t, "problem = {kind}");
        if let Problem::CustomModal { domain, g, h } = &self.problem {
            let d = match domain {
                Domain::UnitInterval => "interval",
                Domain::Square => "square",
            };
            let _ = writeln!(t, "domain = {d}");
            let _ = writeln!(t, "g = {}", format_modes(*domain, g));
            let _ = writeln!(t, "h = {}", format_modes(*domain, h));
        }
        let join = |v: &[String]| v.join(", ");
        let _ = writeln!(t, "s = {:e}", self.s);
        let _ = writeln!(t, "scheme = {}", self.scheme.name());
        let _ = writeln!(t, "T = {:e}", self.t_final);
        let _ = writeln!(t, "dt = {}", self.step.name());
        let _ = writeln!(
            t,
            "ladder = {}",
            join(
                &self
                    .ladder
                    .iter()
                    .map(|n| n.to_string())
                    .collect::<Vec<_>>()
            )
        );
        let _ = writeln!(t, "n = {}", self.n);
        if let Some(y) = self.extended.height {
            let _ = writeln!(t, "Y = {y:e}");
        }
        if let Some(m) = self.extended.elements {
            let _ = writeln!(t, "M = {m}");
        }
        let _ = writeln!(t, "sigma = {:e}", self.extended.sigma);
        let _ = writeln!(t, "slope = {:e}", self.extended.slope);
        let _ = writeln!(t, "metric = {}", self.metric.name());
        let policy = match self.cfl {
            CflPolicy::Enforce { .. } => "enforce",
            CflPolicy::Classical { .. } => "classical",
            CflPolicy::Report { .. } => "report",
        };
        let _ = writeln!(t, "cfl = {policy}");
        let _ = writeln!(t, "theta = {:e}", self.cfl.theta());
        if let Some(f) = self.cfl_factor {
            let _ = writeln!(t, "cfl_factor = {f:e}");
        }
        if let Some(k) = self.oracle_modes {
            let _ = writeln!(t, "oracle_modes = {k}");
        }
        let _ = writeln!(
            t,
            "snapshots = {}",
            join(
                &self
                    .snapshots
                    .iter()
                    .map(|v| format!("{v:e}"))
                    .collect::<Vec<_>>()
            )
        );
        let _ = writeln!(t, "seed = {}", self.seed);
        if let Some(p) = &self.out {
            let _ = writeln!(t, "out = {}", p.display());
        }
        t
    }
}

/// `m:c` terms on the interval, `mxn:c` on the square, whitespace separated.
fn parse_modes(domain: Domain, text: &str) -> Result<Vec<((usize, usize), f64)>> {
    text.split_whitespace()
        .map(|term| {
            let bad = || config(format!("mode term `{term}` is not `index:coefficient`"));
            let (idx, c) = term.split_once(':').ok_or_else(bad)?;
            let index = match domain {
                Domain::UnitInterval => (idx.parse().map_err(|_| bad())?, 1),
                Domain::Square => {
                    let (m, n) = idx.split_once('x').ok_or_else(bad)?;
                    (m.parse().map_err(|_| bad())?, n.parse().map_err(|_| bad())?)
                }
            };
            if index.0 == 0 || index.1 == 0 {
                return Err(config(format!("mode indices start at 1 in `{term}`")));
            }
            Ok((index, parse_real(c)?))
        })
        .collect()
}

fn format_modes(domain: Domain, terms: &[((usize, usize), f64)]) -> String {
    terms
        .iter()
        .map(|&((m, n), c)| match domain {
            Domain::UnitInterval => format!("{m}:{c:e}"),
            Domain::Square => format!("{m}x{n}:{c:e}"),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

type Modes = Vec<((usize, usize), f64)>;

/// `count` random low modes for each of `g` and `h`, coefficients in `[−1, 1]`.
fn random_modal(domain: Domain, count: usize, seed: u64) -> (Modes, Modes) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut draw = || -> Modes {
        (0..count)
            .map(|_| {
                let index = match domain {
                    Domain::UnitInterval => (rng.gen_range(1..=8), 1),
                    Domain::Square => (rng.gen_range(1..=4), rng.gen_range(1..=4)),
                };
                (index, rng.gen_range(-1.0..=1.0))
            })
            .collect()
    };
    let g = draw();
    (g, draw())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reals_with_pi() {
        assert_eq!(parse_real("1.5").unwrap(), 1.5);
        assert_eq!(parse_real("pi/2").unwrap(), PI / 2.0);
        assert_eq!(parse_real("3 * pi / 4").unwrap(), 3.0 * PI / 4.0);
        assert_eq!(parse_real("2pi").unwrap(), 2.0 * PI);
        assert!(parse_real("x").is_err());
        assert!(parse_real("1/0").is_err());
    }

    #[test]
    fn comments_and_unknown_keys() {
        let raw = parse("# header\ns = 0.25 # trailing\n\nscheme=leapfrog\n").unwrap();
        assert_eq!(raw["s"], "0.25");
        assert_eq!(raw["scheme"], "leapfrog");
        assert!(parse("bogus = 1").is_err());
        assert!(parse("novalue").is_err());
    }

    #[test]
    fn overrides_win() {
        let raw = parse("s = 0.25\nladder = 8, 16").unwrap();
        let raw = merge(raw, [parse_override("s=0.75").unwrap()]).unwrap();
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        assert_eq!(cfg.s, 0.75);
        assert_eq!(cfg.ladder, vec![8, 16]);
        assert_eq!(cfg.n, 16);
    }

    #[test]
    fn problem_defaults() {
        let one = ExperimentConfig::from_raw(&RawConfig::new()).unwrap();
        assert_eq!(one.scheme, Scheme::Trapezoidal);
        assert_eq!(one.step, StepRule::HalfPower);
        assert_eq!(one.t_final, PI / 2.0);
        let two = ExperimentConfig::from_raw(&parse("problem = paper-2d").unwrap()).unwrap();
        assert_eq!(two.scheme, Scheme::Leapfrog);
        assert_eq!(two.step, StepRule::Linear);
        assert_eq!(two.metric, ErrorMetric::L2DtStaggered);
        assert_eq!(two.t_final, 1.5);
        let lf = ExperimentConfig::from_raw(&parse("scheme = leapfrog").unwrap()).unwrap();
        assert_eq!(lf.step, StepRule::SPower);
    }

    #[test]
    fn invalid_values() {
        for text in [
            "s = 1.2",
            "scheme = euler",
            "ladder = 1",
            "problem = paper-2d\ndomain = interval",
            "dt = -1",
        ] {
            assert!(
                ExperimentConfig::from_raw(&parse(text).unwrap()).is_err(),
                "{text}"
            );
        }
    }

    #[test]
    fn custom_modes_and_seed() {
        let raw = parse("problem = custom-modal\ndomain = square\ng = 1x2:0.5 3x1:-1").unwrap();
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        let Problem::CustomModal { g, h, .. } = &cfg.problem else {
            panic!()
        };
        assert_eq!(g, &vec![((1, 2), 0.5), ((3, 1), -1.0)]);
        assert!(h.is_empty());
        let a = ExperimentConfig::from_raw(&parse("problem = custom-modal\nseed = 7").unwrap())
            .unwrap();
        let b = ExperimentConfig::from_raw(&parse("problem = custom-modal\nseed = 7").unwrap())
            .unwrap();
        let c = ExperimentConfig::from_raw(&parse("problem = custom-modal\nseed = 8").unwrap())
            .unwrap();
        assert_eq!(a.problem, b.problem);
        assert_ne!(a.problem, c.problem);
    }

    #[test]
    fn text_round_trip() {
        let raw = parse(
            "problem = custom-modal\ng = 2:0.25\nY = 3\nM = 6\ncfl = report\nsnapshots = 0, pi/4",
        )
        .unwrap();
        let cfg = ExperimentConfig::from_raw(&raw).unwrap();
        let again = ExperimentConfig::from_raw(&parse(&cfg.to_text()).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }
}
