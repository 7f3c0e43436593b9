//! Run configuration: TOML file plus `--set key=value` overrides.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use carnot_hconv::{Calculus, CarnotGroup, Coefficient, CutoffSpec, FieldRule, Grid, OperatorSpec, SequenceConfig};
use serde::{Deserialize, Serialize};
use toml::{Table, Value};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Solve,
    CheckClass,
    VerifyEstimates,
    Hconv,
    Divcurl,
    Effective,
}

impl Task {
    pub fn name(self) -> &'static str {
        match self {
            Task::Solve => "solve",
            Task::CheckClass => "check-class",
            Task::VerifyEstimates => "verify-estimates",
            Task::Hconv => "hconv",
            Task::Divcurl => "divcurl",
            Task::Effective => "effective",
        }
    }

    pub fn parse(s: &str) -> Result<Self, CliError> {
        Value::String(s.to_string()).try_into().map_err(|_| {
            CliError::Config(format!("unknown task '{s}' (expected solve, check-class, verify-estimates, hconv, divcurl or effective)"))
        })
    }

    fn samples(self) -> bool {
        matches!(self, Task::CheckClass | Task::VerifyEstimates)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    fn expand(&self, n: usize, key: &str) -> Result<Vec<T>, CliError> {
        match self {
            OneOrMany::One(v) => Ok(vec![v.clone(); n]),
            OneOrMany::Many(v) if v.len() == n => Ok(v.clone()),
            OneOrMany::Many(v) => Err(CliError::Config(format!("{key}: expected {n} entries, got {}", v.len()))),
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GroupConfig {
    pub kind: Option<String>,
    pub dim: Option<usize>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub nodes: Option<OneOrMany<usize>>,
    #[serde(default = "zero")]
    pub lower: OneOrMany<f64>,
    #[serde(default = "one")]
    pub upper: OneOrMany<f64>,
}

fn zero() -> OneOrMany<f64> {
    OneOrMany::One(0.0)
}

fn one() -> OneOrMany<f64> {
    OneOrMany::One(1.0)
}

impl Default for GridConfig {
    fn default() -> Self {
        Self { nodes: None, lower: zero(), upper: one() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorConfig {
    pub kind: Option<String>,
    pub p: Option<f64>,
    #[serde(default = "unit_coefficient")]
    pub coefficient: String,
    pub matrix: Option<Vec<Vec<f64>>>,
    pub alpha: Option<f64>,
    pub beta: Option<f64>,
}

fn unit_coefficient() -> String {
    "const:1".into()
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self { kind: None, p: None, coefficient: unit_coefficient(), matrix: None, alpha: None, beta: None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tol: 1e-10, max_iter: 10_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DataConfig {
    pub rhs: String,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { rhs: "const:1".into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MembershipConfig {
    pub samples: usize,
}

impl Default for MembershipConfig {
    fn default() -> Self {
        Self { samples: 100_000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EstimatesConfig {
    pub trials: usize,
}

impl Default for EstimatesConfig {
    fn default() -> Self {
        Self { trials: 100 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HConvConfig {
    pub scales: Vec<u32>,
    /// Plateau of the cutoff, one `[lo, hi]` per axis; middle half by default.
    pub window: Option<Vec<[f64; 2]>>,
    /// Ramp width per axis; 1/8 of the box by default.
    pub ramp: Option<OneOrMany<f64>>,
    pub test_functions: Vec<String>,
    pub cell_resolution: Option<usize>,
    pub reference_refinement: usize,
}

impl Default for HConvConfig {
    fn default() -> Self {
        Self {
            scales: vec![1, 2, 4, 8],
            window: None,
            ramp: None,
            test_functions: Vec::new(),
            cell_resolution: None,
            reference_refinement: 4,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EffectiveConfig {
    /// Semicolon-separated vectors, e.g. `"1,0;0,1"`.
    pub probes: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    pub report: Option<String>,
    pub csv: Option<String>,
    pub dump_field: Option<String>,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: Option<Task>,
    pub seed: Option<u64>,
    #[serde(default)]
    pub group: GroupConfig,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub operator: OperatorConfig,
    #[serde(default)]
    pub solver: SolverConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub membership: MembershipConfig,
    #[serde(default)]
    pub estimates: EstimatesConfig,
    #[serde(default)]
    pub hconv: HConvConfig,
    #[serde(default)]
    pub effective: EffectiveConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

const KNOWN_KEYS: &[&str] = &[
    "task",
    "seed",
    "group.kind",
    "group.dim",
    "grid.nodes",
    "grid.lower",
    "grid.upper",
    "operator.kind",
    "operator.p",
    "operator.coefficient",
    "operator.matrix",
    "operator.alpha",
    "operator.beta",
    "solver.tol",
    "solver.max_iter",
    "data.rhs",
    "membership.samples",
    "estimates.trials",
    "hconv.scales",
    "hconv.window",
    "hconv.ramp",
    "hconv.test_functions",
    "hconv.cell_resolution",
    "hconv.reference_refinement",
    "effective.probes",
    "output.report",
    "output.csv",
    "output.dump_field",
];

fn collect_keys(prefix: &str, table: &Table, out: &mut Vec<String>) {
    for (k, v) in table {
        let path = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) if !KNOWN_KEYS.contains(&path.as_str()) => collect_keys(&path, t, out),
            _ => out.push(path),
        }
    }
}

fn check_unknown(table: &Table) -> Result<(), CliError> {
    let mut keys = Vec::new();
    collect_keys("", table, &mut keys);
    let unknown: Vec<String> = keys.into_iter().filter(|k| !KNOWN_KEYS.contains(&k.as_str())).collect();
    if unknown.is_empty() {
        Ok(())
    } else {
        Err(CliError::Config(format!("unknown configuration keys: {}", unknown.join(", "))))
    }
}

/// Parses the right-hand side of `--set`; anything that is not a TOML value
/// is taken as a bare string.
fn parse_value(raw: &str) -> Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => Value::String(raw.to_string()),
    }
}

pub fn apply_override(table: &mut Table, assignment: &str) -> Result<(), CliError> {
    let (key, raw) =
        assignment.split_once('=').ok_or_else(|| CliError::Config(format!("override '{assignment}' is not of the form key=value")))?;
    let parts: Vec<&str> = key.trim().split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(CliError::Config(format!("override key '{key}' is malformed")));
    }
    let mut cur = table;
    for p in &parts[..parts.len() - 1] {
        let entry = cur.entry(p.to_string()).or_insert_with(|| Value::Table(Table::new()));
        cur = match entry {
            Value::Table(t) => t,
            _ => return Err(CliError::Config(format!("override '{key}': '{p}' is not a section"))),
        };
    }
    cur.insert(parts[parts.len() - 1].to_string(), parse_value(raw.trim()));
    Ok(())
}

/// Reads the config, applies overrides in order (last wins) and rejects
/// unknown keys.
pub fn load(path: &Path, overrides: &[String]) -> Result<RunConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    let name = path.display();
    let mut table: Table = text.parse().map_err(|e| CliError::Config(format!("{name}: {e}")))?;
    check_unknown(&table)?;
    // typed pass over the file itself so errors carry line and column
    toml::from_str::<RunConfig>(&text).map_err(|e| CliError::Config(format!("{name}: {e}")))?;
    for o in overrides {
        apply_override(&mut table, o)?;
    }
    check_unknown(&table)?;
    let mut cfg: RunConfig = Value::Table(table).try_into().map_err(|e| CliError::Config(format!("after overrides: {e}")))?;
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    cfg.resolve_paths(&base);
    Ok(cfg)
}

fn missing(key: &str) -> CliError {
    CliError::Config(format!("missing required key '{key}'"))
}

fn core(e: carnot_hconv::Error) -> CliError {
    CliError::from(e)
}

fn resolve(base: &Path, p: &str) -> String {
    let pb = PathBuf::from(p);
    if pb.is_absolute() {
        p.to_string()
    } else {
        base.join(pb).display().to_string()
    }
}

impl RunConfig {
    /// Table paths in `file:` coefficients are relative to the config file.
    fn resolve_paths(&mut self, base: &Path) {
        if let Some(rest) = self.operator.coefficient.strip_prefix("file:") {
            self.operator.coefficient = format!("file:{}", resolve(base, rest.trim()));
        }
    }

    pub fn task(&self) -> Result<Task, CliError> {
        self.task.ok_or_else(|| missing("task"))
    }

    /// Checks keys every task needs and fills the remaining defaults so the
    /// stored config is complete.
    pub fn validate(&mut self) -> Result<(), CliError> {
        let task = self.task()?;
        if task.samples() && self.seed.is_none() {
            return Err(CliError::Config(format!("missing required key 'seed' (task {} samples randomly)", task.name())));
        }
        let kind = self.group.kind.clone().ok_or_else(|| missing("group.kind"))?;
        match kind.as_str() {
            "heisenberg" => {
                if self.group.dim.is_some_and(|d| d != 3) {
                    return Err(CliError::Config("group.dim must be 3 for heisenberg".into()));
                }
                self.group.dim = Some(3);
            }
            "euclidean" => {
                self.group.dim.get_or_insert(2);
            }
            other => return Err(CliError::Config(format!("group.kind: unknown group '{other}' (expected euclidean or heisenberg)"))),
        }
        let dim = self.group.dim.expect("set above");
        let nodes = self.grid.nodes.as_ref().ok_or_else(|| missing("grid.nodes"))?.expand(dim, "grid.nodes")?;
        let lower = self.grid.lower.expand(dim, "grid.lower")?;
        let upper = self.grid.upper.expand(dim, "grid.upper")?;
        self.grid.nodes = Some(OneOrMany::Many(nodes));
        self.grid.lower = OneOrMany::Many(lower.clone());
        self.grid.upper = OneOrMany::Many(upper.clone());
        self.operator.kind.as_ref().ok_or_else(|| missing("operator.kind"))?;
        self.operator.p.ok_or_else(|| missing("operator.p"))?;
        if matches!(task, Task::Hconv | Task::Divcurl | Task::Effective) {
            if self.hconv.window.is_none() {
                self.hconv.window = Some(lower.iter().zip(&upper).map(|(a, b)| [a + 0.25 * (b - a), a + 0.75 * (b - a)]).collect());
            }
            let m = if kind == "heisenberg" { 2 } else { dim };
            self.hconv.cell_resolution.get_or_insert(SequenceConfig::default_cell_resolution(m));
            if self.hconv.ramp.is_none() {
                self.hconv.ramp = Some(OneOrMany::Many(lower.iter().zip(&upper).map(|(a, b)| (b - a) / 8.0).collect()));
            }
        }
        if task == Task::Effective && self.effective.probes.is_none() {
            return Err(missing("effective.probes"));
        }
        Ok(())
    }

    pub fn group(&self) -> Result<CarnotGroup, CliError> {
        match self.group.kind.as_deref() {
            Some("heisenberg") => Ok(CarnotGroup::heisenberg()),
            Some("euclidean") => CarnotGroup::euclidean(self.group.dim.unwrap_or(2)).map_err(core),
            Some(other) => Err(CliError::Config(format!("group.kind: unknown group '{other}'"))),
            None => Err(missing("group.kind")),
        }
    }

    pub fn bounds(&self) -> Result<Vec<(f64, f64)>, CliError> {
        let dim = self.group()?.dim();
        let lo = self.grid.lower.expand(dim, "grid.lower")?;
        let hi = self.grid.upper.expand(dim, "grid.upper")?;
        Ok(lo.into_iter().zip(hi).collect())
    }

    pub fn calculus(&self) -> Result<Arc<Calculus>, CliError> {
        let group = self.group()?;
        let dim = group.dim();
        let shape = self.grid.nodes.as_ref().ok_or_else(|| missing("grid.nodes"))?.expand(dim, "grid.nodes")?;
        let grid = Grid::new(self.bounds()?, shape).map_err(core)?;
        Ok(Arc::new(Calculus::new(Arc::new(group), Arc::new(grid)).map_err(core)?))
    }

    pub fn operator(&self) -> Result<OperatorSpec, CliError> {
        let m = self.group()?.horizontal_dim();
        let p = self.operator.p.ok_or_else(|| missing("operator.p"))?;
        let coefficient =
            Coefficient::parse(&self.operator.coefficient).map_err(|e| CliError::Config(format!("operator.coefficient: {e}")))?;
        let kind = self.operator.kind.as_deref().ok_or_else(|| missing("operator.kind"))?;
        let linear_p = || {
            if p != 2.0 {
                Err(CliError::Config(format!("operator.p must be 2 for a linear operator (got {p})")))
            } else {
                Ok(())
            }
        };
        let spec = match kind {
            "scalar_p_laplacian" => OperatorSpec::scalar_p_laplacian(p, coefficient).map_err(core)?,
            "identity" => {
                linear_p()?;
                OperatorSpec::identity(m)
            }
            "linear_matrix" => {
                linear_p()?;
                let matrix = self.operator.matrix.clone().ok_or_else(|| missing("operator.matrix"))?;
                if matrix.len() != m {
                    return Err(CliError::Config(format!("operator.matrix must be {m} x {m}")));
                }
                OperatorSpec::linear_matrix(matrix, coefficient).map_err(core)?
            }
            "custom" => return Err(CliError::Config("custom operators are only available through the library".into())),
            other => {
                return Err(CliError::Config(format!(
                    "operator.kind: unknown operator '{other}' (expected scalar_p_laplacian, linear_matrix or identity)"
                )))
            }
        };
        match (self.operator.alpha, self.operator.beta) {
            (None, None) => Ok(spec),
            (a, b) => {
                let (alpha, beta) = (a.unwrap_or(spec.alpha()), b.unwrap_or(spec.beta()));
                spec.with_constants(alpha, beta).map_err(core)
            }
        }
    }

    pub fn rhs(&self, dim: usize) -> Result<FieldRule, CliError> {
        FieldRule::parse(&self.data.rhs, dim).map_err(|e| CliError::Config(format!("data.rhs: {e}")))
    }

    pub fn cutoff(&self, grid: &Grid) -> Result<CutoffSpec, CliError> {
        let dim = grid.dim();
        let window = self.hconv.window.clone().ok_or_else(|| missing("hconv.window"))?;
        if window.len() != dim {
            return Err(CliError::Config(format!("hconv.window: expected {dim} intervals, got {}", window.len())));
        }
        let inner = window.into_iter().map(|[a, b]| (a, b)).collect();
        let width = match &self.hconv.ramp {
            Some(r) => r.expand(dim, "hconv.ramp")?,
            None => grid.bounds().iter().map(|(a, b)| (b - a) / 8.0).collect(),
        };
        let c = CutoffSpec { inner, width };
        c.validate(grid).map_err(|e| CliError::Config(format!("hconv.window/ramp: {e}")))?;
        Ok(c)
    }

    pub fn probes(&self, m: usize) -> Result<Vec<Vec<f64>>, CliError> {
        let raw = self.effective.probes.as_deref().ok_or_else(|| missing("effective.probes"))?;
        parse_probes(raw, m)
    }
}

/// `"1,0;0,1"` into vectors of length `m`.
pub fn parse_probes(raw: &str, m: usize) -> Result<Vec<Vec<f64>>, CliError> {
    raw.split(';')
        .filter(|s| !s.trim().is_empty())
        .map(|s| {
            let v: Vec<f64> = s
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| CliError::Config(format!("probe '{s}': malformed number '{}'", t.trim()))))
                .collect::<Result<_, _>>()?;
            if v.len() != m {
                return Err(CliError::Config(format!("probe '{s}' has {} components, expected {m}", v.len())));
            }
            Ok(v)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(s: &str) -> Table {
        s.parse().unwrap()
    }

    #[test]
    fn overrides_last_wins() {
        let mut t = table("[operator]\np = 2.0\n");
        apply_override(&mut t, "operator.p=3").unwrap();
        apply_override(&mut t, "operator.p=4.5").unwrap();
        apply_override(&mut t, "data.rhs=sin:1").unwrap();
        assert_eq!(t["operator"]["p"].as_float(), Some(4.5));
        assert_eq!(t["data"]["rhs"].as_str(), Some("sin:1"));
        assert!(apply_override(&mut t, "operator.p").is_err());
        assert!(apply_override(&mut t, "operator.p.x=1").is_err());
    }

    #[test]
    fn unknown_keys_are_listed() {
        let t = table("task = \"solve\"\nbogus = 1\n[operator]\npp = 2\n[extra]\nx = 1\n");
        let e = check_unknown(&t).unwrap_err().to_string();
        assert!(e.contains("bogus") && e.contains("operator.pp") && e.contains("extra.x"), "{e}");
    }

    #[test]
    fn probes_parse() {
        assert_eq!(parse_probes("1,0;0,1; 1,1", 2).unwrap(), vec![vec![1.0, 0.0], vec![0.0, 1.0], vec![1.0, 1.0]]);
        assert!(parse_probes("1,0,0", 2).is_err());
        assert!(parse_probes("1,x", 2).is_err());
    }

    #[test]
    fn validate_fills_defaults() {
        let mut c: RunConfig = toml::from_str(
            "task = \"hconv\"\n[group]\nkind = \"euclidean\"\n[grid]\nnodes = 33\n[operator]\nkind = \"scalar_p_laplacian\"\np = 2.0\n",
        )
        .unwrap();
        c.validate().unwrap();
        assert_eq!(c.grid.nodes, Some(OneOrMany::Many(vec![33, 33])));
        assert_eq!(c.hconv.window, Some(vec![[0.25, 0.75]; 2]));
        let mut c: RunConfig = toml::from_str("task = \"check-class\"\n[group]\nkind = \"heisenberg\"\n").unwrap();
        assert!(c.validate().unwrap_err().to_string().contains("seed"));
    }
}
