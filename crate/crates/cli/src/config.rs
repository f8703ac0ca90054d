//! Line-oriented `key = value` configuration with `[section]` headers.
//!
//! Parsing reports every problem it finds (with line numbers), not just the
//! first. Global keys (`experiment`, `name`, `seed`, `sweep_*`) appear
//! before the first section; everything else lives in the sections
//! `[grid] [u1] [u2] [solver] [estimate] [flow] [output]`.

use harnack_core::grid::MAX_DIM;
use harnack_core::{GridSpec, PotentialSpec, Topology, TrigMode};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone)]
pub struct ConfigIssue {
    pub line: usize,
    pub message: String,
}

impl fmt::Display for ConfigIssue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "line {}: {}", self.line, self.message)
    }
}

#[derive(Debug)]
pub struct ConfigErrors(pub Vec<ConfigIssue>);

impl fmt::Display for ConfigErrors {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for issue in &self.0 {
            writeln!(f, "{issue}")?;
        }
        Ok(())
    }
}

impl std::error::Error for ConfigErrors {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum ExperimentTag {
    LiYau,
    MatrixLiYau,
    Harnack,
    CheegerYau,
    Ab,
    CostCompare,
    Flow,
    Volume,
    Sweep,
}

impl ExperimentTag {
    fn parse(s: &str) -> Option<Self> {
        match s {
            "liyau" => Some(Self::LiYau),
            "matrix-liyau" => Some(Self::MatrixLiYau),
            "harnack" => Some(Self::Harnack),
            "cheeger-yau" => Some(Self::CheegerYau),
            "ab" => Some(Self::Ab),
            "cost-compare" => Some(Self::CostCompare),
            "flow" => Some(Self::Flow),
            "volume" => Some(Self::Volume),
            "sweep" => Some(Self::Sweep),
            _ => None,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Self::LiYau => "liyau",
            Self::MatrixLiYau => "matrix-liyau",
            Self::Harnack => "harnack",
            Self::CheegerYau => "cheeger-yau",
            Self::Ab => "ab",
            Self::CostCompare => "cost-compare",
            Self::Flow => "flow",
            Self::Volume => "volume",
            Self::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum SolveMode {
    /// Integrate the PDE numerically.
    Solve,
    /// Assemble the closed-form sharp solution and its derivatives.
    Analytic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum InitKind {
    /// The closed-form sharp profile at `t_start`.
    Oracle,
    /// Seeded random positive trigonometric data.
    Random,
    Constant,
    /// The self-similar porous-medium profile at `t_start`.
    Barenblatt,
}

#[derive(Debug, Clone)]
pub struct SolverBlock {
    pub scheme: harnack_core::Scheme,
    pub dt: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub floor: f64,
    pub mode: SolveMode,
    pub init: InitKind,
    pub init_scale: f64,
    pub sigma0: Option<f64>,
    pub m: f64,
    pub convergence_study: bool,
    pub error_tolerance: f64,
    pub ratio_min: f64,
}

#[derive(Debug, Clone)]
pub struct EstimateBlock {
    pub k: f64,
    pub k3: Option<f64>,
    pub k3_matrix: Option<f64>,
    pub times: Vec<f64>,
    pub s: Option<f64>,
    pub tolerance: f64,
    pub boundary_margin: usize,
    pub pairs: usize,
    pub pair_radius: f64,
    pub pair_from_origin: bool,
    pub core_radius: Option<f64>,
    pub equality: bool,
    pub oracle_endpoints: usize,
    pub path_nodes: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum CurveKind {
    Circle,
    Ellipse,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum VariantKind {
    Sinh,
    B,
    Weighted,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub enum FlowCheck {
    Constant,
    Monotone,
}

#[derive(Debug, Clone)]
pub struct FlowBlock {
    pub nodes: usize,
    pub curve: CurveKind,
    pub r0: f64,
    pub ellipse_axes: (f64, f64),
    pub dt: f64,
    pub t_end: f64,
    /// `None` means extinction-matched: T = ln(1 + k r0^2) / (2k).
    pub horizon: Option<f64>,
    pub variant: VariantKind,
    /// `None` derives K from the infimum of the Hessian of U.
    pub big_k: Option<f64>,
    pub audits: usize,
    pub redistribute_every: usize,
    pub check: FlowCheck,
    pub flow_tolerance: f64,
    pub seeds: usize,
    pub seed_radius: f64,
    pub t0: f64,
    pub t1: f64,
    pub advect_steps: usize,
    pub radius_oracle_tolerance: f64,
}

#[derive(Debug, Clone)]
pub struct OutputBlock {
    pub dir: String,
    pub json: bool,
    pub csv: bool,
    pub svg: bool,
}

#[derive(Debug, Clone)]
pub struct SweepBlock {
    pub experiment: ExperimentTag,
    pub parameter: String,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub experiment: ExperimentTag,
    pub name: String,
    pub seed: u64,
    pub grid: GridSpec,
    pub u1: PotentialSpec,
    pub u2: PotentialSpec,
    pub solver: SolverBlock,
    pub estimate: EstimateBlock,
    pub flow: FlowBlock,
    pub output: OutputBlock,
    pub sweep: Option<SweepBlock>,
    /// Original text, echoed into the summary.
    pub source: String,
}

struct RawEntry {
    line: usize,
    value: String,
    used: std::cell::Cell<bool>,
}

struct Raw {
    /// (section, key) -> entry; the global scope uses section "".
    entries: BTreeMap<(String, String), RawEntry>,
    issues: Vec<ConfigIssue>,
}

const SECTIONS: &[&str] = &["grid", "u1", "u2", "solver", "estimate", "flow", "output"];

fn parse_raw(text: &str) -> Raw {
    let mut entries = BTreeMap::new();
    let mut issues = Vec::new();
    let mut section = String::new();
    for (idx, raw_line) in text.lines().enumerate() {
        let line = idx + 1;
        let stripped = match raw_line.find('#') {
            Some(pos) => &raw_line[..pos],
            None => raw_line,
        }
        .trim();
        if stripped.is_empty() {
            continue;
        }
        if let Some(name) = stripped.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            let name = name.trim();
            if !SECTIONS.contains(&name) {
                issues.push(ConfigIssue {
                    line,
                    message: format!(
                        "unknown section [{name}]; expected one of {}",
                        SECTIONS.iter().map(|s| format!("[{s}]")).collect::<Vec<_>>().join(" ")
                    ),
                });
            }
            section = name.to_string();
            continue;
        }
        match stripped.split_once('=') {
            Some((key, value)) => {
                let key = key.trim().to_string();
                let prev = entries.insert(
                    (section.clone(), key.clone()),
                    RawEntry {
                        line,
                        value: value.trim().to_string(),
                        used: std::cell::Cell::new(false),
                    },
                );
                if prev.is_some() {
                    issues.push(ConfigIssue {
                        line,
                        message: format!("duplicate key `{key}`"),
                    });
                }
            }
            None => issues.push(ConfigIssue {
                line,
                message: format!("expected `key = value`, got `{stripped}`"),
            }),
        }
    }
    Raw { entries, issues }
}

impl Raw {
    fn get(&self, section: &str, key: &str) -> Option<&RawEntry> {
        let e = self.entries.get(&(section.to_string(), key.to_string()));
        if let Some(e) = e {
            e.used.set(true);
        }
        e
    }
}

/// Typed field extraction that appends issues instead of failing fast.
struct Extract<'a> {
    raw: &'a Raw,
    issues: Vec<ConfigIssue>,
}

impl<'a> Extract<'a> {
    fn parse_with<T>(&mut self, section: &str, key: &str, f: impl Fn(&str) -> Option<T>) -> Option<T> {
        let entry = self.raw.get(section, key)?;
        match f(&entry.value) {
            Some(v) => Some(v),
            None => {
                self.issues.push(ConfigIssue {
                    line: entry.line,
                    message: format!("could not parse `{key} = {}`", entry.value),
                });
                None
            }
        }
    }

    fn f64(&mut self, section: &str, key: &str, default: f64) -> f64 {
        self.parse_with(section, key, |v| v.parse().ok()).unwrap_or(default)
    }

    fn f64_opt(&mut self, section: &str, key: &str) -> Option<f64> {
        self.parse_with(section, key, |v| v.parse().ok())
    }

    fn usize(&mut self, section: &str, key: &str, default: usize) -> usize {
        self.parse_with(section, key, |v| v.parse().ok()).unwrap_or(default)
    }

    fn bool(&mut self, section: &str, key: &str, default: bool) -> bool {
        self.parse_with(section, key, |v| match v {
            "true" | "yes" | "1" => Some(true),
            "false" | "no" | "0" => Some(false),
            _ => None,
        })
        .unwrap_or(default)
    }

    fn string(&mut self, section: &str, key: &str, default: &str) -> String {
        self.raw
            .get(section, key)
            .map(|e| e.value.clone())
            .unwrap_or_else(|| default.to_string())
    }

    fn f64_list(&mut self, section: &str, key: &str) -> Option<Vec<f64>> {
        self.parse_with(section, key, |v| {
            v.split_whitespace().map(|x| x.parse().ok()).collect::<Option<Vec<f64>>>()
        })
    }

    fn issue(&mut self, section: &str, key: &str, message: String) {
        let line = self.raw.get(section, key).map(|e| e.line).unwrap_or(0);
        self.issues.push(ConfigIssue { line, message });
    }

    fn point(&mut self, section: &str, key: &str, default: [f64; MAX_DIM]) -> [f64; MAX_DIM] {
        match self.f64_list(section, key) {
            Some(values) if values.len() <= MAX_DIM => {
                let mut p = [0.0; MAX_DIM];
                p[..values.len()].copy_from_slice(&values);
                p
            }
            Some(_) => {
                self.issue(section, key, format!("`{key}` takes at most {MAX_DIM} numbers"));
                default
            }
            None => default,
        }
    }
}

fn parse_potential(ex: &mut Extract, section: &str, dim: usize, extents: &[f64; MAX_DIM]) -> PotentialSpec {
    let family = ex.string(section, "family", "zero");
    match family.as_str() {
        "zero" => PotentialSpec::zero(dim),
        "quadratic" => {
            let a = ex.f64(section, "a", 0.0);
            let b = ex.point(section, "b", [0.0; MAX_DIM]);
            let c = ex.f64(section, "c", 0.0);
            PotentialSpec::quadratic(dim, a, b, c)
        }
        "gaussian" => {
            let amplitude = ex.f64(section, "amplitude", 1.0);
            let center = ex.point(section, "center", [0.0; MAX_DIM]);
            let width = ex.f64(section, "width", 1.0);
            if width <= 0.0 {
                ex.issue(section, "width", "gaussian width must be positive".into());
            }
            PotentialSpec::GaussianBump { dim, amplitude, center, width }
        }
        "trig" => {
            // modes = amp:m1,m2,m3:phase; amp:m1,m2,m3:phase; ...
            let spec = ex.string(section, "modes", "");
            let mut modes = Vec::new();
            for part in spec.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let fields: Vec<&str> = part.split(':').map(str::trim).collect();
                let parsed = (|| -> Option<TrigMode> {
                    let amplitude: f64 = fields.first()?.parse().ok()?;
                    let mode_nums: Vec<i32> = fields
                        .get(1)?
                        .split(',')
                        .map(|x| x.trim().parse().ok())
                        .collect::<Option<Vec<i32>>>()?;
                    if mode_nums.len() > MAX_DIM {
                        return None;
                    }
                    let mut mode = [0i32; MAX_DIM];
                    mode[..mode_nums.len()].copy_from_slice(&mode_nums);
                    let phase: f64 = match fields.get(2) {
                        Some(p) => p.parse().ok()?,
                        None => 0.0,
                    };
                    Some(TrigMode { amplitude, mode, phase })
                })();
                match parsed {
                    Some(m) => modes.push(m),
                    None => ex.issue(
                        section,
                        "modes",
                        format!("bad mode `{part}`; expected amp:m1,m2,m3:phase"),
                    ),
                }
            }
            if modes.is_empty() {
                ex.issue(section, "modes", "trig family needs at least one mode".into());
            }
            PotentialSpec::Trig { dim, extents: *extents, modes }
        }
        other => {
            ex.issue(
                section,
                "family",
                format!("unknown family `{other}`; expected zero|quadratic|gaussian|trig"),
            );
            PotentialSpec::zero(dim)
        }
    }
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigErrors> {
    let raw = parse_raw(text);
    let mut ex = Extract { raw: &raw, issues: raw.issues.clone() };

    let experiment = match ex.parse_with("", "experiment", ExperimentTag::parse) {
        Some(tag) => tag,
        None => {
            if raw.get("", "experiment").is_none() {
                ex.issues.push(ConfigIssue {
                    line: 0,
                    message: "missing global key `experiment`".into(),
                });
            }
            ExperimentTag::LiYau
        }
    };
    let name = ex.string("", "name", experiment.as_str());
    let seed = ex.usize("", "seed", 42) as u64;

    // [grid]
    let dim = ex.usize("grid", "d", 1);
    let extents = ex.point("grid", "extent", [16.0, 16.0, 16.0]);
    let counts_f = ex
        .f64_list("grid", "count")
        .unwrap_or_else(|| vec![512.0]);
    let topology = match ex.string("grid", "topology", "box").as_str() {
        "box" => Topology::Box,
        "periodic" => Topology::Periodic,
        other => {
            ex.issue("grid", "topology", format!("unknown topology `{other}`"));
            Topology::Box
        }
    };
    let mut counts = [0usize; MAX_DIM];
    for a in 0..MAX_DIM {
        let v = counts_f.get(a).or(counts_f.first()).copied().unwrap_or(512.0);
        counts[a] = v as usize;
    }
    let mut grid_extents = [0.0; MAX_DIM];
    for a in 0..MAX_DIM {
        grid_extents[a] = if extents[a] > 0.0 { extents[a] } else { extents[0] };
    }
    let grid = match GridSpec::new(dim, &grid_extents[..dim.min(MAX_DIM)], &counts[..dim.min(MAX_DIM)], topology) {
        Ok(g) => g,
        Err(e) => {
            ex.issue("grid", "d", e.to_string());
            GridSpec::cube(1, 1.0, 8, Topology::Box).expect("fallback grid")
        }
    };

    let u1 = parse_potential(&mut ex, "u1", dim.clamp(1, MAX_DIM), &grid_extents);
    let u2 = parse_potential(&mut ex, "u2", dim.clamp(1, MAX_DIM), &grid_extents);
    if let Err(e) = u1.validate(&grid) {
        ex.issue("u1", "family", e.to_string());
    }
    if let Err(e) = u2.validate(&grid) {
        ex.issue("u2", "family", e.to_string());
    }

    // [solver]
    let scheme = match ex.string("solver", "scheme", "imex").as_str() {
        "explicit" => harnack_core::Scheme::Explicit,
        "imex" => harnack_core::Scheme::Imex,
        other => {
            ex.issue("solver", "scheme", format!("unknown scheme `{other}`"));
            harnack_core::Scheme::Imex
        }
    };
    let solver = SolverBlock {
        scheme,
        dt: ex.f64("solver", "dt", 1e-3),
        t_start: ex.f64("solver", "t_start", 0.0),
        t_end: ex.f64("solver", "t_end", 1.0),
        floor: ex.f64("solver", "floor", 1e-30),
        mode: match ex.string("solver", "mode", "solve").as_str() {
            "solve" => SolveMode::Solve,
            "analytic" => SolveMode::Analytic,
            other => {
                ex.issue("solver", "mode", format!("unknown mode `{other}`"));
                SolveMode::Solve
            }
        },
        init: match ex.string("solver", "init", "oracle").as_str() {
            "oracle" => InitKind::Oracle,
            "random" => InitKind::Random,
            "constant" => InitKind::Constant,
            "barenblatt" => InitKind::Barenblatt,
            other => {
                ex.issue("solver", "init", format!("unknown init `{other}`"));
                InitKind::Oracle
            }
        },
        init_scale: ex.f64("solver", "init_scale", 0.3),
        sigma0: ex.f64_opt("solver", "sigma0"),
        m: ex.f64("solver", "m", 2.0),
        convergence_study: ex.bool("solver", "convergence_study", false),
        error_tolerance: ex.f64("solver", "error_tolerance", 2e-4),
        ratio_min: ex.f64("solver", "ratio_min", 3.5),
    };
    if solver.t_end <= solver.t_start {
        ex.issue("solver", "t_end", "t_end must exceed t_start".into());
    }

    // [estimate]
    let k = ex.f64("estimate", "k", 1.0);
    if k < 0.0 {
        ex.issue("estimate", "k", "k must be >= 0".into());
    }
    let times = ex
        .f64_list("estimate", "times")
        .or_else(|| ex.f64_opt("estimate", "t").map(|t| vec![t]))
        .unwrap_or_else(|| vec![solver.t_end]);
    let estimate = EstimateBlock {
        k,
        k3: ex.f64_opt("estimate", "k3"),
        k3_matrix: ex.f64_opt("estimate", "k3_matrix"),
        times,
        s: ex.f64_opt("estimate", "s"),
        tolerance: ex.f64("estimate", "tolerance", 5e-3),
        boundary_margin: ex.usize("estimate", "boundary_margin", 2),
        pairs: ex.usize("estimate", "pairs", 20),
        pair_radius: ex.f64("estimate", "pair_radius", 2.0),
        pair_from_origin: ex.bool("estimate", "pair_from_origin", false),
        core_radius: ex.f64_opt("estimate", "core_radius"),
        equality: ex.bool("estimate", "equality", false),
        oracle_endpoints: ex.usize("estimate", "oracle_endpoints", 0),
        path_nodes: ex.usize("estimate", "path_nodes", 256),
    };

    // [flow]
    let flow = FlowBlock {
        nodes: ex.usize("flow", "q", 512),
        curve: match ex.string("flow", "curve", "circle").as_str() {
            "circle" => CurveKind::Circle,
            "ellipse" => CurveKind::Ellipse,
            other => {
                ex.issue("flow", "curve", format!("unknown curve `{other}`"));
                CurveKind::Circle
            }
        },
        r0: ex.f64("flow", "r0", 1.0),
        ellipse_axes: (ex.f64("flow", "ellipse_a", 1.2), ex.f64("flow", "ellipse_b", 0.8)),
        dt: ex.f64("flow", "dt", 1e-5),
        t_end: ex.f64("flow", "t_end", 0.2),
        horizon: ex.f64_opt("flow", "horizon"),
        variant: match ex.string("flow", "variant", "weighted").as_str() {
            "sinh" => VariantKind::Sinh,
            "b" => VariantKind::B,
            "weighted" => VariantKind::Weighted,
            other => {
                ex.issue("flow", "variant", format!("unknown variant `{other}`"));
                VariantKind::Weighted
            }
        },
        big_k: ex.f64_opt("flow", "big_k"),
        audits: ex.usize("flow", "audits", 21),
        redistribute_every: ex.usize("flow", "redistribute_every", 10),
        check: match ex.string("flow", "check", "monotone").as_str() {
            "constant" => FlowCheck::Constant,
            "monotone" => FlowCheck::Monotone,
            other => {
                ex.issue("flow", "check", format!("unknown check `{other}`"));
                FlowCheck::Monotone
            }
        },
        flow_tolerance: ex.f64("flow", "flow_tolerance", 1e-3),
        seeds: ex.usize("flow", "seeds", 5),
        seed_radius: ex.f64("flow", "seed_radius", 1.0),
        t0: ex.f64("flow", "t0", 0.2),
        t1: ex.f64("flow", "t1", 0.6),
        advect_steps: ex.usize("flow", "advect_steps", 20),
        radius_oracle_tolerance: ex.f64("flow", "radius_oracle_tolerance", 1e-4),
    };

    // [output]
    let formats = ex.string("output", "formats", "json csv svg");
    let output = OutputBlock {
        dir: ex.string("output", "dir", "out"),
        json: formats.contains("json"),
        csv: formats.contains("csv"),
        svg: formats.contains("svg"),
    };

    // Sweep block (global keys).
    let sweep = if experiment == ExperimentTag::Sweep {
        let child = ex
            .parse_with("", "sweep_experiment", ExperimentTag::parse)
            .unwrap_or(ExperimentTag::LiYau);
        if raw.get("", "sweep_experiment").is_none() {
            ex.issues.push(ConfigIssue {
                line: 0,
                message: "sweep needs `sweep_experiment`".into(),
            });
        }
        if child == ExperimentTag::Sweep {
            ex.issues.push(ConfigIssue { line: 0, message: "sweeps cannot nest".into() });
        }
        let parameter = ex.string("", "sweep_parameter", "k");
        if !matches!(parameter.as_str(), "k" | "k3" | "t") {
            ex.issues.push(ConfigIssue {
                line: raw.get("", "sweep_parameter").map(|e| e.line).unwrap_or(0),
                message: format!("sweep_parameter must be k, k3, or t, got `{parameter}`"),
            });
        }
        let values = ex.f64_list("", "sweep_values").unwrap_or_default();
        if values.is_empty() {
            ex.issues.push(ConfigIssue {
                line: 0,
                message: "sweep needs `sweep_values` with at least one number".into(),
            });
        }
        Some(SweepBlock { experiment: child, parameter, values })
    } else {
        None
    };

    // Unknown keys.
    for ((section, key), entry) in &raw.entries {
        if !entry.used.get() {
            let loc = if section.is_empty() {
                format!("global key `{key}`")
            } else {
                format!("key `{key}` in [{section}]")
            };
            ex.issues.push(ConfigIssue {
                line: entry.line,
                message: format!("unknown {loc}"),
            });
        }
    }

    let mut issues = ex.issues;
    issues.sort_by_key(|i| i.line);
    if !issues.is_empty() {
        return Err(ConfigErrors(issues));
    }
    Ok(ExperimentConfig {
        experiment,
        name,
        seed,
        grid,
        u1,
        u2,
        solver,
        estimate,
        flow,
        output,
        sweep,
        source: text.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "\
experiment = liyau

[grid]
d = 1
extent = 16
count = 512
topology = box

[u1]
family = quadratic
a = -1.0

[solver]
dt = 1e-4
t_start = 0.0
t_end = 0.7

[estimate]
k = 1.0
t = 0.7
";

    #[test]
    fn minimal_config_parses_with_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.experiment, ExperimentTag::LiYau);
        assert_eq!(cfg.grid.count(0), 512);
        assert_eq!(cfg.estimate.times, vec![0.7]);
        assert_eq!(cfg.estimate.tolerance, 5e-3);
        assert_eq!(cfg.output.dir, "out");
        assert!(matches!(cfg.u2, PotentialSpec::Zero { .. }));
    }

    #[test]
    fn negative_k_is_rejected_with_line_number() {
        let text = MINIMAL.replace("k = 1.0", "k = -1.0");
        let err = parse_config(&text).unwrap_err();
        let issue = err.0.iter().find(|i| i.message.contains("k must be >= 0")).unwrap();
        let expected_line = text.lines().position(|l| l.starts_with("k = -1")).unwrap() + 1;
        assert_eq!(issue.line, expected_line);
    }

    #[test]
    fn all_errors_are_reported_not_just_the_first() {
        let text = "\
experiment = nonsense
[grid]
d = 9
topology = moebius
[whatever]
x = 1
";
        let err = parse_config(text).unwrap_err();
        assert!(err.0.len() >= 3, "expected several issues, got {:?}", err.0);
        assert!(err.0.iter().any(|i| i.message.contains("unknown section")));
        assert!(err.0.iter().any(|i| i.message.contains("moebius")));
    }

    #[test]
    fn unknown_keys_are_flagged() {
        let text = format!("{MINIMAL}\n[solver]\nwarp_factor = 9\n");
        // Note: duplicate [solver] section reuses the same namespace.
        let err = parse_config(&text).unwrap_err();
        assert!(err.0.iter().any(|i| i.message.contains("warp_factor")));
    }

    #[test]
    fn sweep_requires_child_and_values() {
        let text = "experiment = sweep\n";
        let err = parse_config(text).unwrap_err();
        assert!(err.0.iter().any(|i| i.message.contains("sweep_experiment")));
        assert!(err.0.iter().any(|i| i.message.contains("sweep_values")));

        let ok = "\
experiment = sweep
sweep_experiment = liyau
sweep_parameter = k
sweep_values = 0.5 1 2
[grid]
d = 1
extent = 16
count = 512
[u1]
family = quadratic
a = -1.0
[estimate]
t = 0.7
";
        let cfg = parse_config(ok).unwrap();
        let sweep = cfg.sweep.unwrap();
        assert_eq!(sweep.values, vec![0.5, 1.0, 2.0]);
        assert_eq!(sweep.experiment, ExperimentTag::LiYau);
    }

    #[test]
    fn trig_modes_parse() {
        let text = "\
experiment = liyau
[grid]
d = 1
extent = 2
count = 256
topology = periodic
[u1]
family = trig
modes = 0.25:1:0.7; -0.1:2,0,0:0.0
[solver]
t_end = 1.0
[estimate]
k = 1.0
t = 1.0
";
        let cfg = parse_config(text).unwrap();
        match cfg.u1 {
            PotentialSpec::Trig { ref modes, .. } => {
                assert_eq!(modes.len(), 2);
                assert_eq!(modes[0].mode[0], 1);
                assert_eq!(modes[1].amplitude, -0.1);
            }
            ref other => panic!("expected trig, got {other:?}"),
        }
    }
}
