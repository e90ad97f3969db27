//! Structured-text run configuration.
//!
//! The format is deliberately small: `[section]` headers over flat
//! `key = value` pairs, `#` comment lines, blank lines ignored. Parsing is
//! strict — unknown sections or keys, duplicate keys, and malformed values
//! are errors carrying a 1-based line number — because config files are an
//! external input surface (and a fuzz target).
//!
//! [`parse_config`] starts from scenario-specific defaults, so a two-line
//! file selecting the scenario kind is a complete runnable configuration;
//! [`render_config`] emits every field in a fixed order with full-precision
//! numerics, and `parse(render(c)) == c` exactly. The rendered form doubles
//! as the run manifest: re-running it reproduces the run.

use crate::{Error, Result};

/// Which experiment family a run drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScenarioKind {
    /// Correlated random-field estimation on a sensor grid.
    Field,
    /// Range-based source localization.
    Localization,
}

/// How node positions are produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TopologyKind {
    /// Regular grid of `rows × cols` cell centers.
    Grid,
    /// Random geometric graph: `nodes` placed in the region, edges within
    /// `radius`.
    RandomGeometric,
}

/// Placement distribution for the random geometric topology.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlacementKind {
    Uniform,
    Gaussian,
}

/// Constraint family coupling neighboring nodes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConstraintKind {
    /// Half squared distance with a per-edge tolerance.
    Quadratic,
    /// Exact agreement (zero tolerance).
    Consensus,
    /// Squared distance plus a log-sum-exp anchor coupling term.
    LseRange,
}

/// Step-size schedule family.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Constant,
    HorizonConstant,
    Hybrid,
}

/// Rule mapping the field correlation ρ(i,j) to the proximity tolerance
/// γ_ij. The pairwise gap of the true field has variance 2(1 − ρ), so
/// its expected half squared distance is 1 − ρ.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GammaRule {
    /// γ_ij = ρ(i,j): tolerance equals the correlation itself.
    Corr,
    /// γ_ij = 1 − ρ(i,j): tolerance equals the expected half squared
    /// distance of the field values, so the constraint binds at truth
    /// scale.
    OneMinusCorr,
    /// γ_ij = 9(1 − ρ(i,j)): tolerance admits three standard deviations
    /// of the true field's pairwise gap, so the constraint clips noise
    /// excursions while essentially never squeezing the truth.
    ThreeSigma,
}

/// Which node the per-node metric columns track.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MonitorChoice {
    /// The node nearest the region center (deterministic tie-break).
    Auto,
    /// A fixed node index.
    Node(usize),
}

/// Fully-resolved run configuration. Every field has a scenario-specific
/// default; fields irrelevant to the selected topology or scenario are
/// carried (and echoed in the manifest) but not consulted.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub kind: ScenarioKind,
    /// Iterations per run.
    pub horizon: usize,
    /// Replica count.
    pub runs: usize,
    pub monitor: MonitorChoice,
    /// Root seed; may be supplied by the CLI instead. A run cannot start
    /// without one.
    pub seed: Option<u64>,
    /// Held-out observation batch size for localization objectives.
    pub held_out: usize,
    pub topology: TopologyKind,
    pub rows: usize,
    pub cols: usize,
    /// Node count for the random geometric topology.
    pub nodes: usize,
    pub width: f64,
    pub height: f64,
    /// Connection radius for the random geometric topology.
    pub radius: f64,
    pub placement: PlacementKind,
    /// Regenerate the random topology until its algebraic connectivity is
    /// within `fiedler_tol` (relative) of this target.
    pub fiedler_match: Option<f64>,
    pub fiedler_tol: f64,
    pub constraint: ConstraintKind,
    pub gamma_rule: GammaRule,
    /// Correlation length of the field kernel, in units of the longer
    /// region side: ρ(i,j) = exp(−‖l_i−l_j‖ / (corr_len · side)).
    pub corr_len: f64,
    /// Dual regularization weight δ.
    pub delta: f64,
    /// Radius of the ball the primal variables are projected onto.
    pub projection_radius: f64,
    /// Optional bound on the primal gradient norms, used only to report
    /// whether δ satisfies the step-validity condition; without it the
    /// condition is unverifiable.
    pub lipschitz: Option<f64>,
    pub schedule: ScheduleKind,
    /// Base step size ε.
    pub eps: f64,
    /// Switch-over round for the hybrid schedule.
    pub t0: usize,
    /// Field observation noise variance σ².
    pub sigma2: f64,
    /// Localization range-noise scale c in Var = c·d̂.
    pub range_c: f64,
    pub out_dir: String,
    pub dump_state: bool,
}

impl RunConfig {
    /// Scenario defaults matching the published experiment configurations.
    #[must_use]
    pub fn defaults(kind: ScenarioKind) -> Self {
        match kind {
            ScenarioKind::Field => RunConfig {
                kind,
                horizon: 500,
                runs: 1,
                monitor: MonitorChoice::Auto,
                seed: None,
                held_out: 1000,
                topology: TopologyKind::Grid,
                rows: 5,
                cols: 10,
                nodes: 50,
                width: 200.0,
                height: 200.0,
                radius: 50.0,
                placement: PlacementKind::Uniform,
                fiedler_match: None,
                fiedler_tol: 0.05,
                constraint: ConstraintKind::Quadratic,
                gamma_rule: GammaRule::OneMinusCorr,
                corr_len: 4.0,
                delta: 1e-5,
                projection_radius: 1e6,
                lipschitz: None,
                schedule: ScheduleKind::Hybrid,
                eps: 1e-2,
                t0: 100,
                sigma2: 10.0,
                range_c: 2.0,
                out_dir: "out".to_string(),
                dump_state: false,
            },
            ScenarioKind::Localization => RunConfig {
                kind,
                horizon: 1000,
                runs: 100,
                monitor: MonitorChoice::Auto,
                seed: None,
                held_out: 1000,
                topology: TopologyKind::Grid,
                rows: 8,
                cols: 8,
                nodes: 64,
                width: 1000.0,
                height: 1000.0,
                radius: 50.0,
                placement: PlacementKind::Uniform,
                fiedler_match: None,
                fiedler_tol: 0.05,
                constraint: ConstraintKind::LseRange,
                gamma_rule: GammaRule::OneMinusCorr,
                corr_len: 4.0,
                delta: 1e-7,
                projection_radius: 1e6,
                lipschitz: None,
                schedule: ScheduleKind::Hybrid,
                eps: 10f64.powf(-1.5),
                t0: 100,
                sigma2: 10.0,
                range_c: 2.0,
                out_dir: "out".to_string(),
                dump_state: false,
            },
        }
    }

    /// Node count implied by the topology selection.
    #[must_use]
    pub fn n_nodes(&self) -> usize {
        match self.topology {
            TopologyKind::Grid => self.rows * self.cols,
            TopologyKind::RandomGeometric => self.nodes,
        }
    }

    /// Cross-field consistency, applied after parsing and after CLI
    /// overrides.
    ///
    /// # Errors
    ///
    /// `InvalidArgument` naming the offending key.
    pub fn validate(&self) -> Result<()> {
        fn positive(v: f64, key: &str) -> Result<()> {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::invalid(format!("{key} must be positive (got {v})")))
            }
        }
        if self.horizon == 0 {
            return Err(Error::invalid("t must be at least 1"));
        }
        if self.runs == 0 {
            return Err(Error::invalid("runs must be at least 1"));
        }
        if self.held_out == 0 {
            return Err(Error::invalid("held_out must be at least 1"));
        }
        if self.n_nodes() < 2 {
            return Err(Error::invalid(
                "the topology must produce at least 2 nodes (rows·cols or nodes)",
            ));
        }
        positive(self.width, "width")?;
        positive(self.height, "height")?;
        positive(self.radius, "radius")?;
        positive(self.fiedler_tol, "fiedler_tol")?;
        if let Some(f) = self.fiedler_match {
            positive(f, "fiedler_match")?;
        }
        positive(self.corr_len, "corr_len")?;
        positive(self.delta, "delta")?;
        positive(self.projection_radius, "projection_radius")?;
        if let Some(l) = self.lipschitz {
            positive(l, "lipschitz")?;
        }
        positive(self.eps, "eps")?;
        if self.schedule == ScheduleKind::Hybrid && self.t0 == 0 {
            return Err(Error::invalid("t0 must be at least 1"));
        }
        // Zero noise is legal in both scenarios (noiseless smoke cases).
        if !self.sigma2.is_finite() || self.sigma2 < 0.0 {
            return Err(Error::invalid(format!(
                "sigma2 must be nonnegative (got {})",
                self.sigma2
            )));
        }
        if !self.range_c.is_finite() || self.range_c < 0.0 {
            return Err(Error::invalid(format!(
                "range_c must be nonnegative (got {})",
                self.range_c
            )));
        }
        if let MonitorChoice::Node(i) = self.monitor {
            if i >= self.n_nodes() {
                return Err(Error::invalid(format!(
                    "monitor node {i} out of range for {} nodes",
                    self.n_nodes()
                )));
            }
        }
        if self.kind == ScenarioKind::Field && self.constraint == ConstraintKind::LseRange {
            return Err(Error::invalid(
                "constraint = lse-range applies to the localization scenario only",
            ));
        }
        Ok(())
    }
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

struct Entry<'a> {
    line: usize,
    section: &'a str,
    key: &'a str,
    value: &'a str,
}

/// Structural pass: section tracking, key = value splitting, duplicate
/// detection. All errors carry the offending 1-based line.
fn tokenize(text: &str) -> Result<Vec<Entry<'_>>> {
    let mut section: Option<&str> = None;
    let mut entries: Vec<Entry> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let n = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let Some(name) = name.strip_suffix(']') else {
                return Err(parse_err(n, "unterminated section header"));
            };
            if !matches!(
                name,
                "scenario" | "network" | "problem" | "schedule" | "noise" | "output"
            ) {
                return Err(parse_err(n, format!("unknown section [{name}]")));
            }
            section = Some(name);
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(parse_err(n, format!("expected key = value, got {line:?}")));
        };
        let (key, value) = (key.trim(), value.trim());
        if value.is_empty() {
            return Err(parse_err(n, format!("empty value for key {key:?}")));
        }
        let Some(section) = section else {
            return Err(parse_err(n, "key outside any [section]"));
        };
        if entries.iter().any(|e| e.section == section && e.key == key) {
            return Err(parse_err(n, format!("duplicate key {key:?}")));
        }
        entries.push(Entry {
            line: n,
            section,
            key,
            value,
        });
    }
    Ok(entries)
}

/// Parses a configuration file.
///
/// # Errors
///
/// `Parse` with a 1-based line number for structural problems, unknown
/// sections/keys, duplicates, and malformed values; `InvalidArgument`
/// from the final cross-field validation.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let entries = tokenize(text)?;
    // The scenario kind selects the default set, so resolve it first.
    let kind = match entries
        .iter()
        .find(|e| e.section == "scenario" && e.key == "kind")
    {
        Some(e) => match e.value {
            "field" => ScenarioKind::Field,
            "localization" => ScenarioKind::Localization,
            other => {
                return Err(parse_err(
                    e.line,
                    format!("unknown scenario kind {other:?} (field | localization)"),
                ))
            }
        },
        None => {
            return Err(parse_err(
                text.lines().count() + 1,
                "missing required key 'kind' in [scenario]",
            ))
        }
    };
    let mut cfg = RunConfig::defaults(kind);
    for e in &entries {
        apply_key(&mut cfg, e.section, e.key, e.value, e.line)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn apply_key(cfg: &mut RunConfig, section: &str, key: &str, value: &str, n: usize) -> Result<()> {
    let count = |v: &str, key: &str| -> Result<usize> {
        v.parse()
            .map_err(|_| parse_err(n, format!("key {key:?}: invalid count {v:?}")))
    };
    let real = |v: &str, key: &str| -> Result<f64> {
        v.parse::<f64>()
            .ok()
            .filter(|x| x.is_finite())
            .ok_or_else(|| parse_err(n, format!("key {key:?}: invalid number {v:?}")))
    };
    let unknown = || Err(parse_err(n, format!("unknown key {key:?} in [{section}]")));
    match section {
        "scenario" => match key {
            "kind" => {} // consumed by the first pass
            "t" => cfg.horizon = count(value, key)?,
            "runs" => cfg.runs = count(value, key)?,
            "monitor" => {
                cfg.monitor = if value == "auto" {
                    MonitorChoice::Auto
                } else {
                    MonitorChoice::Node(count(value, key)?)
                }
            }
            "seed" => {
                cfg.seed = Some(value.parse().map_err(|_| {
                    parse_err(n, format!("key \"seed\": invalid seed {value:?}"))
                })?)
            }
            "held_out" => cfg.held_out = count(value, key)?,
            _ => return unknown(),
        },
        "network" => match key {
            "topology" => {
                cfg.topology = match value {
                    "grid" => TopologyKind::Grid,
                    "random" => TopologyKind::RandomGeometric,
                    _ => {
                        return Err(parse_err(
                            n,
                            format!("unknown topology {value:?} (grid | random)"),
                        ))
                    }
                }
            }
            "rows" => cfg.rows = count(value, key)?,
            "cols" => cfg.cols = count(value, key)?,
            "nodes" => cfg.nodes = count(value, key)?,
            "width" => cfg.width = real(value, key)?,
            "height" => cfg.height = real(value, key)?,
            "radius" => cfg.radius = real(value, key)?,
            "placement" => {
                cfg.placement = match value {
                    "uniform" => PlacementKind::Uniform,
                    "gaussian" => PlacementKind::Gaussian,
                    _ => {
                        return Err(parse_err(
                            n,
                            format!("unknown placement {value:?} (uniform | gaussian)"),
                        ))
                    }
                }
            }
            "fiedler_match" => cfg.fiedler_match = Some(real(value, key)?),
            "fiedler_tol" => cfg.fiedler_tol = real(value, key)?,
            _ => return unknown(),
        },
        "problem" => match key {
            "constraint" => {
                cfg.constraint = match value {
                    "quadratic" => ConstraintKind::Quadratic,
                    "consensus" => ConstraintKind::Consensus,
                    "lse-range" => ConstraintKind::LseRange,
                    _ => {
                        return Err(parse_err(
                            n,
                            format!(
                                "unknown constraint {value:?} (quadratic | consensus | lse-range)"
                            ),
                        ))
                    }
                }
            }
            "gamma_rule" => {
                cfg.gamma_rule = match value {
                    "corr" => GammaRule::Corr,
                    "one-minus-corr" => GammaRule::OneMinusCorr,
                    "three-sigma" => GammaRule::ThreeSigma,
                    _ => {
                        return Err(parse_err(
                            n,
                            format!(
                                "unknown gamma_rule {value:?} (corr | one-minus-corr | three-sigma)"
                            ),
                        ))
                    }
                }
            }
            "corr_len" => cfg.corr_len = real(value, key)?,
            "delta" => cfg.delta = real(value, key)?,
            "projection_radius" => cfg.projection_radius = real(value, key)?,
            "lipschitz" => cfg.lipschitz = Some(real(value, key)?),
            _ => return unknown(),
        },
        "schedule" => match key {
            "kind" => {
                cfg.schedule = match value {
                    "constant" => ScheduleKind::Constant,
                    "horizon" => ScheduleKind::HorizonConstant,
                    "hybrid" => ScheduleKind::Hybrid,
                    _ => {
                        return Err(parse_err(
                            n,
                            format!("unknown schedule {value:?} (constant | horizon | hybrid)"),
                        ))
                    }
                }
            }
            "eps" => cfg.eps = real(value, key)?,
            "t0" => cfg.t0 = count(value, key)?,
            _ => return unknown(),
        },
        "noise" => match key {
            "sigma2" => cfg.sigma2 = real(value, key)?,
            "range_c" => cfg.range_c = real(value, key)?,
            _ => return unknown(),
        },
        "output" => match key {
            "dir" => cfg.out_dir = value.to_string(),
            "dump_state" => {
                cfg.dump_state = match value {
                    "true" => true,
                    "false" => false,
                    _ => {
                        return Err(parse_err(
                            n,
                            format!("key \"dump_state\": expected true or false, got {value:?}"),
                        ))
                    }
                }
            }
            _ => return unknown(),
        },
        _ => unreachable!("sections are filtered during parsing"),
    }
    Ok(())
}

/// Renders the fully-resolved configuration; this is the manifest format,
/// and `parse_config(render_config(c)) == c` for any valid `c` (up to a
/// missing seed, which is omitted).
#[must_use]
pub fn render_config(cfg: &RunConfig) -> String {
    use std::fmt::Write as _;
    let mut s = String::with_capacity(640);
    let _ = writeln!(s, "[scenario]");
    let _ = writeln!(
        s,
        "kind = {}",
        match cfg.kind {
            ScenarioKind::Field => "field",
            ScenarioKind::Localization => "localization",
        }
    );
    let _ = writeln!(s, "t = {}", cfg.horizon);
    let _ = writeln!(s, "runs = {}", cfg.runs);
    match cfg.monitor {
        MonitorChoice::Auto => {
            let _ = writeln!(s, "monitor = auto");
        }
        MonitorChoice::Node(i) => {
            let _ = writeln!(s, "monitor = {i}");
        }
    }
    if let Some(seed) = cfg.seed {
        let _ = writeln!(s, "seed = {seed}");
    }
    let _ = writeln!(s, "held_out = {}", cfg.held_out);
    let _ = writeln!(s, "\n[network]");
    let _ = writeln!(
        s,
        "topology = {}",
        match cfg.topology {
            TopologyKind::Grid => "grid",
            TopologyKind::RandomGeometric => "random",
        }
    );
    let _ = writeln!(s, "rows = {}", cfg.rows);
    let _ = writeln!(s, "cols = {}", cfg.cols);
    let _ = writeln!(s, "nodes = {}", cfg.nodes);
    let _ = writeln!(s, "width = {:.16e}", cfg.width);
    let _ = writeln!(s, "height = {:.16e}", cfg.height);
    let _ = writeln!(s, "radius = {:.16e}", cfg.radius);
    let _ = writeln!(
        s,
        "placement = {}",
        match cfg.placement {
            PlacementKind::Uniform => "uniform",
            PlacementKind::Gaussian => "gaussian",
        }
    );
    if let Some(f) = cfg.fiedler_match {
        let _ = writeln!(s, "fiedler_match = {f:.16e}");
    }
    let _ = writeln!(s, "fiedler_tol = {:.16e}", cfg.fiedler_tol);
    let _ = writeln!(s, "\n[problem]");
    let _ = writeln!(
        s,
        "constraint = {}",
        match cfg.constraint {
            ConstraintKind::Quadratic => "quadratic",
            ConstraintKind::Consensus => "consensus",
            ConstraintKind::LseRange => "lse-range",
        }
    );
    let _ = writeln!(
        s,
        "gamma_rule = {}",
        match cfg.gamma_rule {
            GammaRule::Corr => "corr",
            GammaRule::OneMinusCorr => "one-minus-corr",
            GammaRule::ThreeSigma => "three-sigma",
        }
    );
    let _ = writeln!(s, "corr_len = {:.16e}", cfg.corr_len);
    let _ = writeln!(s, "delta = {:.16e}", cfg.delta);
    let _ = writeln!(s, "projection_radius = {:.16e}", cfg.projection_radius);
    if let Some(l) = cfg.lipschitz {
        let _ = writeln!(s, "lipschitz = {l:.16e}");
    }
    let _ = writeln!(s, "\n[schedule]");
    let _ = writeln!(
        s,
        "kind = {}",
        match cfg.schedule {
            ScheduleKind::Constant => "constant",
            ScheduleKind::HorizonConstant => "horizon",
            ScheduleKind::Hybrid => "hybrid",
        }
    );
    let _ = writeln!(s, "eps = {:.16e}", cfg.eps);
    let _ = writeln!(s, "t0 = {}", cfg.t0);
    let _ = writeln!(s, "\n[noise]");
    let _ = writeln!(s, "sigma2 = {:.16e}", cfg.sigma2);
    let _ = writeln!(s, "range_c = {:.16e}", cfg.range_c);
    let _ = writeln!(s, "\n[output]");
    let _ = writeln!(s, "dir = {}", cfg.out_dir);
    let _ = writeln!(s, "dump_state = {}", cfg.dump_state);
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_config_gets_scenario_defaults() {
        let cfg = parse_config("[scenario]\nkind = field\n").unwrap();
        assert_eq!(cfg, RunConfig::defaults(ScenarioKind::Field));
        assert_eq!(cfg.horizon, 500);
        assert_eq!((cfg.rows, cfg.cols), (5, 10));
        assert_eq!(cfg.sigma2, 10.0);
        assert_eq!(cfg.n_nodes(), 50);

        let cfg = parse_config("[scenario]\nkind = localization\n").unwrap();
        assert_eq!(cfg.horizon, 1000);
        assert_eq!((cfg.rows, cfg.cols), (8, 8));
        assert_eq!(cfg.delta, 1e-7);
        assert!((cfg.eps - 0.03162277660168379).abs() < 1e-18);
        assert_eq!(cfg.constraint, ConstraintKind::LseRange);
    }

    #[test]
    fn overrides_comments_and_sections_apply() {
        let text = "\
# experiment tweak
[scenario]
kind = field
t = 50
runs = 3
monitor = 7
seed = 99

[network]
topology = random
nodes = 12
radius = 80
placement = gaussian
fiedler_match = 0.5

[schedule]
kind = constant
eps = 0.05

[output]
dir = results/run1
dump_state = true
";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.horizon, 50);
        assert_eq!(cfg.runs, 3);
        assert_eq!(cfg.monitor, MonitorChoice::Node(7));
        assert_eq!(cfg.seed, Some(99));
        assert_eq!(cfg.topology, TopologyKind::RandomGeometric);
        assert_eq!(cfg.n_nodes(), 12);
        assert_eq!(cfg.placement, PlacementKind::Gaussian);
        assert_eq!(cfg.fiedler_match, Some(0.5));
        assert_eq!(cfg.schedule, ScheduleKind::Constant);
        assert_eq!(cfg.eps, 0.05);
        assert_eq!(cfg.out_dir, "results/run1");
        assert!(cfg.dump_state);
    }

    #[test]
    fn render_parse_round_trips_exactly() {
        for kind in [ScenarioKind::Field, ScenarioKind::Localization] {
            let mut cfg = RunConfig::defaults(kind);
            cfg.seed = Some(31);
            cfg.monitor = MonitorChoice::Node(3);
            cfg.fiedler_match = Some(0.5857864376269049);
            cfg.lipschitz = Some(2.5);
            cfg.corr_len = 2.5;
            cfg.eps = 10f64.powf(-1.5);
            assert_eq!(parse_config(&render_config(&cfg)).unwrap(), cfg);
        }
    }

    #[test]
    fn errors_carry_line_numbers_and_keys() {
        let no_kind = parse_config("[scenario]\nt = 5\n");
        assert!(matches!(no_kind, Err(Error::Parse { .. })));

        let bad_t = "[scenario]\nkind = field\nt = -1\n";
        match parse_config(bad_t) {
            Err(Error::Parse { line, message }) => {
                assert_eq!(line, 3);
                assert!(message.contains("\"t\""), "message: {message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }

        let unknown_key = "[scenario]\nkind = field\nspeed = 3\n";
        assert!(matches!(
            parse_config(unknown_key),
            Err(Error::Parse { line: 3, .. })
        ));

        let unknown_section = "[scenario]\nkind = field\n[extra]\na = 1\n";
        assert!(matches!(
            parse_config(unknown_section),
            Err(Error::Parse { line: 3, .. })
        ));

        let duplicate = "[scenario]\nkind = field\nt = 5\nt = 6\n";
        assert!(matches!(
            parse_config(duplicate),
            Err(Error::Parse { line: 4, .. })
        ));

        let no_section = "kind = field\n";
        assert!(matches!(
            parse_config(no_section),
            Err(Error::Parse { line: 1, .. })
        ));

        let not_kv = "[scenario]\nkind = field\njust words\n";
        assert!(matches!(
            parse_config(not_kv),
            Err(Error::Parse { line: 3, .. })
        ));

        let unterminated = "[scenario\nkind = field\n";
        assert!(matches!(
            parse_config(unterminated),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn validation_rejects_inconsistent_configs() {
        let field_lse = "[scenario]\nkind = field\n[problem]\nconstraint = lse-range\n";
        assert!(matches!(
            parse_config(field_lse),
            Err(Error::InvalidArgument(_))
        ));

        let monitor_oob = "[scenario]\nkind = field\nmonitor = 50\n";
        assert!(parse_config(monitor_oob).is_err());

        let zero_eps = "[scenario]\nkind = field\n[schedule]\neps = 0\n";
        assert!(parse_config(zero_eps).is_err());

        let one_node = "[scenario]\nkind = field\n[network]\nrows = 1\ncols = 1\n";
        assert!(parse_config(one_node).is_err());
    }

    #[test]
    fn weird_but_harmless_inputs_survive() {
        // Values may contain '=' (only the first one splits).
        let cfg = parse_config("[scenario]\nkind = field\n[output]\ndir = a=b\n").unwrap();
        assert_eq!(cfg.out_dir, "a=b");
        // Whitespace around keys/values is trimmed.
        let cfg = parse_config("[scenario]\n  kind   =   field  \n").unwrap();
        assert_eq!(cfg.kind, ScenarioKind::Field);
    }
}
