//! Scenario files.
//!
//! A scenario is a TOML document with the sections below; every key is
//! optional and defaults to the values in parentheses. Key names are unique
//! across sections, so a key may also be written at the top level (except
//! `algorithm`, which at the top level would clash with its section).
//!
//! ```toml
//! [physics]
//! k = 7.0                    # wavenumber (7)
//!
//! [grid]
//! S = 3.0                    # half width of the domain (3)
//! M = 6                      # cells per half side (6)
//!
//! [data]
//! N = 60                     # incident directions (60)
//! J = 60                     # observation directions (60)
//! phantom = "disk"           # or "nine_disks" (disk)
//! sigma = 0.0                # noise standard deviation (0)
//! noise = "complex"          # or "real" (complex)
//! seed = 0                   # (0)
//!
//! [algorithm]
//! algorithm = "ekf_init"     # flm, kfl_init, kfl_carry, ekf_init, ekf_carry
//! schedule = "constant"      # or "morozov" (constant)
//! alpha = 100.0              # constant schedule (100)
//! rho = 0.8                  # morozov schedule (0.8)
//! outer_iterations = 10      # (10)
//! r = 1.0                    # measurement weight R = r I (1)
//!
//! [output]
//! snapshots = false          # write every iterate (false)
//! record_wall_time = false   # real timings in mse.csv (false)
//!
//! [sweep]
//! axis = "sigma"             # or "alpha"
//! values = [0.6, 0.9, 1.2]
//! algorithms = ["ekf_init", "ekf_carry", "kfl_init", "kfl_carry"]
//!
//! [equivalence]
//! scale = "tiny"             # or "full" (tiny)
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use toml::{Table, Value};

use crate::experiments::{Algorithm, NoiseModel, ScenarioConfig, Scale};
use crate::filters::RegularizationSchedule;
use crate::grid::PhantomKind;
use crate::{Error, Result};

const SECTIONS: &[(&str, &[&str])] = &[
    ("physics", &["k"]),
    ("grid", &["S", "M"]),
    ("data", &["N", "J", "phantom", "sigma", "noise", "seed"]),
    ("algorithm", &["algorithm", "schedule", "alpha", "rho", "outer_iterations", "r"]),
    ("output", &["snapshots", "record_wall_time"]),
    ("sweep", &["axis", "values", "algorithms"]),
    ("equivalence", &["scale"]),
];

fn section_of(key: &str) -> Option<&'static str> {
    SECTIONS
        .iter()
        .find(|(_, keys)| keys.contains(&key))
        .map(|(s, _)| *s)
}

/// What gets written besides `mse.csv` and the final estimate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct OutputOptions {
    pub snapshots: bool,
    pub record_wall_time: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    Sigma,
    Alpha,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            SweepAxis::Sigma => "sigma",
            SweepAxis::Alpha => "alpha",
        }
    }

    /// Copy of `base` with this axis set to `value`.
    pub fn apply(&self, base: &ScenarioConfig, value: f64) -> Result<ScenarioConfig> {
        let mut cfg = base.clone();
        match self {
            SweepAxis::Sigma => cfg.sigma = value,
            SweepAxis::Alpha => cfg.schedule = RegularizationSchedule::Constant(value),
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub algorithms: Vec<Algorithm>,
}

/// A fully validated scenario file.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub output: OutputOptions,
    pub sweep: Option<SweepSpec>,
    pub scale: Scale,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioConfig::default(),
            output: OutputOptions::default(),
            sweep: None,
            scale: Scale::Tiny,
        }
    }
}

/// Reads and validates a scenario file, then applies `key=value` overrides.
pub fn parse_config(path: &Path, overrides: &[String]) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config_str(&text, overrides)
}

pub fn parse_config_str(text: &str, overrides: &[String]) -> Result<RunConfig> {
    let table: Table = text.parse().map_err(|e: toml::de::Error| Error::ConfigParse(e.to_string()))?;
    let mut values = flatten(table)?;
    for item in overrides {
        let (key, value) = parse_override(item)?;
        values.insert(key, value);
    }
    build(values)
}

fn flatten(table: Table) -> Result<BTreeMap<String, Value>> {
    let mut out = BTreeMap::new();
    let insert = |key: String, value: Value, out: &mut BTreeMap<String, Value>| {
        if out.insert(key.clone(), value).is_some() {
            return Err(Error::config(key, "given more than once"));
        }
        Ok(())
    };
    for (key, value) in table {
        if let Some((_, keys)) = SECTIONS.iter().find(|(s, _)| *s == key) {
            let Value::Table(inner) = value else {
                return Err(Error::config(key, "expected a section"));
            };
            for (k, v) in inner {
                if !keys.contains(&k.as_str()) {
                    return Err(Error::config(format!("{key}.{k}"), "unknown key in this section"));
                }
                insert(k, v, &mut out)?;
            }
        } else if section_of(&key).is_some() {
            insert(key, value, &mut out)?;
        } else {
            return Err(Error::config(key, "unknown key"));
        }
    }
    Ok(out)
}

/// `key=value` or `section.key=value`; the value is read as a TOML value and
/// falls back to a bare string.
pub fn parse_override(item: &str) -> Result<(String, Value)> {
    let (lhs, rhs) = item
        .split_once('=')
        .ok_or_else(|| Error::config(item, "override must look like key=value"))?;
    let lhs = lhs.trim();
    let key = match lhs.split_once('.') {
        Some((section, key)) => {
            if section_of(key) != Some(section) {
                return Err(Error::config(lhs, "unknown key in this section"));
            }
            key
        }
        None => {
            if section_of(lhs).is_none() {
                return Err(Error::config(lhs, "unknown key"));
            }
            lhs
        }
    };
    let rhs = rhs.trim();
    let value = match format!("v = {rhs}").parse::<Table>() {
        Ok(mut t) => t.remove("v").expect("parsed key"),
        Err(_) => Value::String(rhs.to_string()),
    };
    Ok((key.to_string(), value))
}

struct Reader {
    values: BTreeMap<String, Value>,
}

impl Reader {
    fn float(&mut self, key: &str) -> Result<Option<f64>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(f)),
            Some(Value::Integer(i)) => Ok(Some(i as f64)),
            Some(other) => Err(Error::config(key, format!("expected a number, found {}", other.type_str()))),
        }
    }

    fn count(&mut self, key: &str) -> Result<Option<usize>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if i >= 0 => Ok(Some(i as usize)),
            Some(Value::Integer(i)) => Err(Error::config(key, format!("must not be negative, got {i}"))),
            Some(other) => Err(Error::config(key, format!("expected an integer, found {}", other.type_str()))),
        }
    }

    fn string(&mut self, key: &str) -> Result<Option<String>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s)),
            Some(other) => Err(Error::config(key, format!("expected a string, found {}", other.type_str()))),
        }
    }

    fn boolean(&mut self, key: &str) -> Result<Option<bool>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(b)),
            Some(other) => Err(Error::config(key, format!("expected true or false, found {}", other.type_str()))),
        }
    }

    fn array(&mut self, key: &str) -> Result<Option<Vec<Value>>> {
        match self.values.remove(key) {
            None => Ok(None),
            Some(Value::Array(a)) => Ok(Some(a)),
            Some(other) => Err(Error::config(key, format!("expected an array, found {}", other.type_str()))),
        }
    }

    fn parsed<T: std::str::FromStr<Err = Error>>(&mut self, key: &str) -> Result<Option<T>> {
        self.string(key)?
            .map(|s| {
                s.parse().map_err(|e: Error| match e {
                    Error::Config { message, .. } => Error::config(key, message),
                    other => other,
                })
            })
            .transpose()
    }
}

fn build(values: BTreeMap<String, Value>) -> Result<RunConfig> {
    let mut rd = Reader { values };
    let mut sc = ScenarioConfig::default();
    if let Some(v) = rd.float("k")? {
        sc.wavenumber = v;
    }
    if let Some(v) = rd.float("S")? {
        sc.half_width = v;
    }
    if let Some(v) = rd.count("M")? {
        sc.half_divisions = v;
    }
    if let Some(v) = rd.count("N")? {
        sc.directions = v;
    }
    if let Some(v) = rd.count("J")? {
        sc.observations = v;
    }
    if let Some(v) = rd.parsed::<PhantomKind>("phantom")? {
        sc.phantom = v;
    }
    if let Some(v) = rd.float("sigma")? {
        sc.sigma = v;
    }
    if let Some(v) = rd.parsed::<NoiseModel>("noise")? {
        sc.noise = v;
    }
    if let Some(v) = rd.count("seed")? {
        sc.seed = v as u64;
    }
    if let Some(v) = rd.parsed::<Algorithm>("algorithm")? {
        sc.algorithm = v;
    }
    if let Some(v) = rd.count("outer_iterations")? {
        sc.outer_iterations = v;
    }
    if let Some(v) = rd.float("r")? {
        sc.r = v;
    }
    let alpha = rd.float("alpha")?.unwrap_or(100.0);
    let rho = rd.float("rho")?.unwrap_or(0.8);
    sc.schedule = match rd.string("schedule")?.as_deref() {
        None | Some("constant") => RegularizationSchedule::Constant(alpha),
        Some("morozov") => RegularizationSchedule::Morozov(rho),
        Some(other) => return Err(Error::config("schedule", format!("unknown schedule `{other}`"))),
    };
    sc.validate()?;

    let output = OutputOptions {
        snapshots: rd.boolean("snapshots")?.unwrap_or(false),
        record_wall_time: rd.boolean("record_wall_time")?.unwrap_or(false),
    };

    let axis = rd.string("axis")?;
    let sweep_values = rd.array("values")?;
    let algorithms = rd.array("algorithms")?;
    let sweep = match (axis, sweep_values) {
        (None, None) => {
            if algorithms.is_some() {
                return Err(Error::config("algorithms", "only meaningful together with a sweep axis"));
            }
            None
        }
        (None, Some(_)) => return Err(Error::config("axis", "a sweep needs an axis")),
        (Some(_), None) => return Err(Error::config("values", "a sweep needs a list of values")),
        (Some(axis), Some(list)) => {
            let axis = match axis.as_str() {
                "sigma" => SweepAxis::Sigma,
                "alpha" => SweepAxis::Alpha,
                other => return Err(Error::config("axis", format!("unknown axis `{other}`"))),
            };
            if list.is_empty() {
                return Err(Error::config("values", "sweep list is empty"));
            }
            let values = list
                .iter()
                .map(|v| match v {
                    Value::Float(f) => Ok(*f),
                    Value::Integer(i) => Ok(*i as f64),
                    other => Err(Error::config("values", format!("expected numbers, found {}", other.type_str()))),
                })
                .collect::<Result<Vec<_>>>()?;
            for &v in &values {
                axis.apply(&sc, v).map_err(|e| Error::config("values", e.to_string()))?;
            }
            let algorithms = match algorithms {
                None => Algorithm::KALMAN_VARIANTS.to_vec(),
                Some(list) if list.is_empty() => return Err(Error::config("algorithms", "list is empty")),
                Some(list) => list
                    .iter()
                    .map(|v| match v {
                        Value::String(s) => s.parse::<Algorithm>().map_err(|e| Error::config("algorithms", e.to_string())),
                        other => Err(Error::config("algorithms", format!("expected strings, found {}", other.type_str()))),
                    })
                    .collect::<Result<Vec<_>>>()?,
            };
            Some(SweepSpec {
                axis,
                values,
                algorithms,
            })
        }
    };
    let scale = rd.parsed::<Scale>("scale")?.unwrap_or(Scale::Tiny);
    debug_assert!(rd.values.is_empty(), "unread keys: {:?}", rd.values.keys());
    Ok(RunConfig {
        scenario: sc,
        output,
        sweep,
        scale,
    })
}

impl RunConfig {
    /// Canonical TOML rendering with every key spelled out.
    pub fn to_toml(&self) -> String {
        let sc = &self.scenario;
        let mut doc = Table::new();
        let mut section = |name: &str, entries: Vec<(&str, Value)>| {
            let t: Table = entries.into_iter().map(|(k, v)| (k.to_string(), v)).collect();
            doc.insert(name.to_string(), Value::Table(t));
        };
        section("physics", vec![("k", Value::Float(sc.wavenumber))]);
        section(
            "grid",
            vec![("S", Value::Float(sc.half_width)), ("M", Value::Integer(sc.half_divisions as i64))],
        );
        section(
            "data",
            vec![
                ("N", Value::Integer(sc.directions as i64)),
                ("J", Value::Integer(sc.observations as i64)),
                ("phantom", Value::String(sc.phantom.to_string())),
                ("sigma", Value::Float(sc.sigma)),
                ("noise", Value::String(sc.noise.to_string())),
                ("seed", Value::Integer(sc.seed as i64)),
            ],
        );
        let mut alg = vec![
            ("algorithm", Value::String(sc.algorithm.to_string())),
            ("outer_iterations", Value::Integer(sc.outer_iterations as i64)),
            ("r", Value::Float(sc.r)),
        ];
        match sc.schedule {
            RegularizationSchedule::Constant(a) => {
                alg.push(("schedule", Value::String("constant".into())));
                alg.push(("alpha", Value::Float(a)));
            }
            RegularizationSchedule::Morozov(rho) => {
                alg.push(("schedule", Value::String("morozov".into())));
                alg.push(("rho", Value::Float(rho)));
            }
        }
        section("algorithm", alg);
        section(
            "output",
            vec![
                ("snapshots", Value::Boolean(self.output.snapshots)),
                ("record_wall_time", Value::Boolean(self.output.record_wall_time)),
            ],
        );
        if let Some(sw) = &self.sweep {
            section(
                "sweep",
                vec![
                    ("axis", Value::String(sw.axis.to_string())),
                    ("values", Value::Array(sw.values.iter().map(|v| Value::Float(*v)).collect())),
                    (
                        "algorithms",
                        Value::Array(sw.algorithms.iter().map(|a| Value::String(a.to_string())).collect()),
                    ),
                ],
            );
        }
        section("equivalence", vec![("scale", Value::String(self.scale.to_string()))]);
        doc.to_string()
    }
}
