//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # K_{5,5} with a repulsive scalar channel
//! graph = complete_bipartite(5,5)
//! variant = gradient_flow
//! W = [[-1]]
//! tau = 0.5
//! steps = 60
//! init = random_normal
//! seed = 7
//! csv = out/trajectory.csv
//! svg = out/rayleigh.svg
//! report = out/report.txt
//! ```
//!
//! Matrices are written row-major inline (`W = [[1,-0.5],[-0.5,1]]`) or
//! read from a whitespace-separated file (`W_file = w.txt`); vectors as
//! `omega = [0.5, -1]`. Relative paths resolve against the config file's
//! directory.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use gel_core::{GraphKind, Variant};
use ndarray::{Array1, Array2};

use crate::error::{read, CliError, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum GraphSource {
    Generator(GraphKind),
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum InitSpec {
    RandomNormal(u64),
    /// Ones on every channel of one node, zeros elsewhere.
    OneHot(usize),
    File(PathBuf),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outputs {
    pub csv: Option<PathBuf>,
    pub svg: Option<PathBuf>,
    pub report: Option<PathBuf>,
}

/// Optional verify checks run against the configured model.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConfigCheck {
    Monotonicity,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub graph: GraphSource,
    pub variant: Variant,
    pub tau: f64,
    pub steps: usize,
    pub d: usize,
    pub w: Option<Array2<f64>>,
    pub omega: Option<Array2<f64>>,
    pub wtilde: Option<Array2<f64>>,
    pub omega_diag: Option<Array1<f64>>,
    pub beta: f64,
    pub mu: f64,
    pub ktk: Option<Array2<f64>>,
    pub omega_tilde: Option<Array2<f64>>,
    pub sigma: String,
    pub init: InitSpec,
    pub outputs: Outputs,
    pub checks: Vec<ConfigCheck>,
}

const KEYS: &[&str] = &[
    "graph", "graph_file", "variant", "tau", "steps", "d", "seed", "init", "sigma", "beta", "mu",
    "W", "W_file", "Omega", "Omega_file", "Wtilde", "Wtilde_file", "KtK", "KtK_file",
    "OmegaTilde", "OmegaTilde_file", "omega", "csv", "svg", "report", "checks",
];

struct Entry {
    line: usize,
    value: String,
}

struct Reader<'a> {
    path: &'a str,
    base: &'a Path,
    entries: BTreeMap<String, Entry>,
}

impl Reader<'_> {
    fn err(&self, key: &str, msg: impl Into<String>) -> CliError {
        CliError::Config {
            path: self.path.to_string(),
            line: self.entries.get(key).map_or(0, |e| e.line),
            key: key.to_string(),
            msg: msg.into(),
        }
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    fn required(&self, key: &str) -> Result<&str> {
        self.raw(key).ok_or_else(|| self.err(key, "missing required key"))
    }

    fn parsed<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.raw(key)
            .map(|v| v.parse::<T>().map_err(|e| self.err(key, format!("`{v}`: {e}"))))
            .transpose()
    }

    fn path(&self, key: &str) -> Option<PathBuf> {
        self.raw(key).map(|v| self.base.join(v))
    }

    /// Inline `key` or whitespace-separated `key_file`, never both.
    fn matrix(&self, key: &str) -> Result<Option<Array2<f64>>> {
        let file_key = format!("{key}_file");
        match (self.raw(key), self.path(&file_key)) {
            (Some(_), Some(_)) => Err(self.err(key, format!("give either `{key}` or `{file_key}`"))),
            (Some(v), None) => parse_matrix(v).map(Some).map_err(|m| self.err(key, m)),
            (None, Some(p)) => {
                let text = read(&p)?;
                parse_matrix_file(&text).map(Some).map_err(|m| self.err(&file_key, m))
            }
            (None, None) => Ok(None),
        }
    }
}

impl ExperimentConfig {
    pub fn from_file(path: &Path) -> Result<Self> {
        let text = read(path)?;
        let base = path.parent().unwrap_or(Path::new(""));
        Self::parse(&text, &path.display().to_string(), base)
    }

    /// Parses config text; `origin` names the source in error messages and
    /// relative paths resolve against `base`.
    pub fn parse(text: &str, origin: &str, base: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split_once('#').map_or(raw, |(c, _)| c).trim();
            if content.is_empty() {
                continue;
            }
            let fail = |key: &str, msg: &str| CliError::Config {
                path: origin.to_string(),
                line,
                key: key.to_string(),
                msg: msg.to_string(),
            };
            let (key, value) = content.split_once('=').ok_or_else(|| fail(content, "expected `key = value`"))?;
            let key = key.trim();
            if !KEYS.contains(&key) {
                return Err(fail(key, "unknown key"));
            }
            let entry = Entry {
                line,
                value: value.trim().to_string(),
            };
            if entries.insert(key.to_string(), entry).is_some() {
                return Err(fail(key, "key given twice"));
            }
        }
        let r = Reader {
            path: origin,
            base,
            entries,
        };

        let graph = match (r.raw("graph"), r.path("graph_file")) {
            (Some(g), None) => GraphSource::Generator(g.parse().map_err(|e: gel_core::Error| r.err("graph", e.to_string()))?),
            (None, Some(p)) => GraphSource::File(p),
            (Some(_), Some(_)) => return Err(r.err("graph", "give either `graph` or `graph_file`")),
            (None, None) => return Err(r.err("graph", "missing required key")),
        };
        let variant: Variant = r.required("variant")?.parse().map_err(|e: gel_core::Error| r.err("variant", e.to_string()))?;
        let tau = r.parsed::<f64>("tau")?.unwrap_or(gel_core::dynamics::DEFAULT_TAU);
        let steps = r.parsed::<usize>("steps")?.ok_or_else(|| r.err("steps", "missing required key"))?;

        let w = r.matrix("W")?;
        let omega = r.matrix("Omega")?;
        let wtilde = r.matrix("Wtilde")?;
        let ktk = r.matrix("KtK")?;
        let omega_tilde = r.matrix("OmegaTilde")?;
        let omega_diag = r
            .raw("omega")
            .map(|v| parse_vector(v).map_err(|m| r.err("omega", m)))
            .transpose()?;
        let inferred = [&w, &omega, &wtilde, &ktk, &omega_tilde]
            .into_iter()
            .flatten()
            .map(|m| m.nrows())
            .next()
            .or(omega_diag.as_ref().map(|v| v.len()));
        let d = match (r.parsed::<usize>("d")?, inferred) {
            (Some(d), _) => d,
            (None, Some(d)) => d,
            (None, None) => return Err(r.err("d", "missing; give `d` or a weight matrix")),
        };

        let seed = r.parsed::<u64>("seed")?;
        let init = parse_init(r.required("init")?, seed, base).map_err(|m| r.err("init", m))?;
        let checks = match r.raw("checks") {
            None => Vec::new(),
            Some(v) => v
                .split(',')
                .map(str::trim)
                .filter(|c| !c.is_empty())
                .map(|c| match c {
                    "monotonicity" => Ok(ConfigCheck::Monotonicity),
                    other => Err(r.err("checks", format!("unknown check `{other}`"))),
                })
                .collect::<Result<_>>()?,
        };

        Ok(Self {
            graph,
            variant,
            tau,
            steps,
            d,
            w,
            omega,
            wtilde,
            omega_diag,
            beta: r.parsed::<f64>("beta")?.unwrap_or(0.0),
            mu: r.parsed::<f64>("mu")?.unwrap_or(0.0),
            ktk,
            omega_tilde,
            sigma: r.raw("sigma").unwrap_or("identity").to_string(),
            init,
            outputs: Outputs {
                csv: r.path("csv"),
                svg: r.path("svg"),
                report: r.path("report"),
            },
            checks,
        })
    }

    /// Replaces the seed of a random initialization.
    pub fn override_seed(&mut self, seed: u64) {
        if let InitSpec::RandomNormal(s) = &mut self.init {
            *s = seed;
        }
    }
}

fn parse_init(v: &str, seed: Option<u64>, base: &Path) -> std::result::Result<InitSpec, String> {
    let (name, arg) = match v.split_once('(') {
        Some((name, rest)) => {
            let arg = rest.strip_suffix(')').ok_or_else(|| format!("unbalanced parentheses in `{v}`"))?;
            (name.trim(), Some(arg.trim()))
        }
        None => (v.trim(), None),
    };
    match (name, arg) {
        ("random_normal", None) => seed
            .map(InitSpec::RandomNormal)
            .ok_or_else(|| "random_normal needs a seed: `seed = <u64>` or `random_normal(<u64>)`".to_string()),
        ("random_normal", Some(a)) => a.parse().map(InitSpec::RandomNormal).map_err(|_| format!("bad seed `{a}`")),
        ("one_hot", Some(a)) => a.parse().map(InitSpec::OneHot).map_err(|_| format!("bad node `{a}`")),
        ("file", Some(a)) => Ok(InitSpec::File(base.join(a))),
        _ => Err(format!("expected random_normal[(seed)], one_hot(node) or file(path), got `{v}`")),
    }
}

fn parse_numbers(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}

/// `[[a, b], [c, d]]`, or a bare number for a `1 × 1` matrix.
pub fn parse_matrix(s: &str) -> std::result::Result<Array2<f64>, String> {
    let s = s.trim();
    if let Ok(x) = s.parse::<f64>() {
        return Ok(Array2::from_elem((1, 1), x));
    }
    let inner = s
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .filter(|t| t.trim_start().starts_with('[') && t.trim_end().ends_with(']'))
        .ok_or_else(|| format!("expected [[row], [row], ...], got `{s}`"))?;
    let rows: Vec<Vec<f64>> = inner
        .split(']')
        .map(|part| part.trim().trim_start_matches(',').trim())
        .filter(|part| !part.is_empty())
        .map(|part| {
            let body = part.strip_prefix('[').ok_or_else(|| format!("malformed row `{part}`"))?;
            parse_numbers(body)
        })
        .collect::<std::result::Result<_, _>>()?;
    rows_to_matrix(rows)
}

/// One row per line, entries separated by whitespace or commas; `#` comments.
pub fn parse_matrix_file(text: &str) -> std::result::Result<Array2<f64>, String> {
    let rows = text
        .lines()
        .map(|l| l.split_once('#').map_or(l, |(c, _)| c).trim())
        .filter(|l| !l.is_empty())
        .map(|l| parse_numbers(&l.replace(char::is_whitespace, ",")))
        .collect::<std::result::Result<Vec<_>, _>>()?;
    rows_to_matrix(rows)
}

fn rows_to_matrix(rows: Vec<Vec<f64>>) -> std::result::Result<Array2<f64>, String> {
    let cols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || cols == 0 {
        return Err("empty matrix".into());
    }
    if let Some(bad) = rows.iter().position(|r| r.len() != cols) {
        return Err(format!("row {} has {} entries, expected {cols}", bad + 1, rows[bad].len()));
    }
    let n = rows.len();
    Ok(Array2::from_shape_vec((n, cols), rows.concat()).expect("rectangular"))
}

pub fn parse_vector(s: &str) -> std::result::Result<Array1<f64>, String> {
    let body = s
        .trim()
        .strip_prefix('[')
        .and_then(|t| t.strip_suffix(']'))
        .ok_or_else(|| format!("expected [a, b, ...], got `{s}`"))?;
    let v = parse_numbers(body)?;
    if v.is_empty() {
        return Err("empty vector".into());
    }
    Ok(Array1::from_vec(v))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    const BASIC: &str = "
        # comment
        graph = complete_bipartite(5,5)
        variant = gradient_flow
        W = [[-1]]
        tau = 0.5
        steps = 60
        init = random_normal
        seed = 7   # trailing comment
        csv = out/t.csv
    ";

    #[test]
    fn parses_the_basic_example() {
        let c = ExperimentConfig::parse(BASIC, "basic", Path::new("/tmp/x")).unwrap();
        assert_eq!(c.graph, GraphSource::Generator(GraphKind::CompleteBipartite(5, 5)));
        assert_eq!(c.variant, Variant::GradientFlow);
        assert_eq!(c.w, Some(array![[-1.0]]));
        assert_eq!(c.d, 1);
        assert_eq!(c.steps, 60);
        assert_eq!(c.init, InitSpec::RandomNormal(7));
        assert_eq!(c.outputs.csv, Some(PathBuf::from("/tmp/x/out/t.csv")));
        assert_eq!(c.outputs.svg, None);
    }

    #[test]
    fn matrices_inline_and_scalar() {
        assert_eq!(parse_matrix("[[1,-0.5],[-0.5, 1]]").unwrap(), array![[1.0, -0.5], [-0.5, 1.0]]);
        assert_eq!(parse_matrix(" [ [2] ] ").unwrap(), array![[2.0]]);
        assert_eq!(parse_matrix("-1").unwrap(), array![[-1.0]]);
        assert!(parse_matrix("[[1,2],[3]]").is_err());
        assert!(parse_matrix("[1,2]").is_err());
        assert_eq!(parse_matrix_file("1 2\n# x\n3, 4\n").unwrap(), array![[1.0, 2.0], [3.0, 4.0]]);
        assert_eq!(parse_vector("[0.5, -1]").unwrap(), array![0.5, -1.0]);
    }

    #[test]
    fn errors_name_the_key_and_line() {
        let text = BASIC.replace("tau = 0.5", "tau = fast");
        match ExperimentConfig::parse(&text, "cfg", Path::new("")) {
            Err(CliError::Config { key, line, .. }) => {
                assert_eq!(key, "tau");
                assert_eq!(line, 6);
            }
            other => panic!("{other:?}"),
        }
        let text = BASIC.replace("seed = 7", "colour = red");
        assert!(matches!(
            ExperimentConfig::parse(&text, "cfg", Path::new("")),
            Err(CliError::Config { key, .. }) if key == "colour"
        ));
        let text = BASIC.replace("seed = 7", "");
        assert!(matches!(
            ExperimentConfig::parse(&text, "cfg", Path::new("")),
            Err(CliError::Config { key, .. }) if key == "init"
        ));
    }

    #[test]
    fn init_forms() {
        assert_eq!(parse_init("random_normal(3)", None, Path::new("")).unwrap(), InitSpec::RandomNormal(3));
        assert_eq!(parse_init("one_hot(2)", None, Path::new("")).unwrap(), InitSpec::OneHot(2));
        assert_eq!(parse_init("file(f.txt)", None, Path::new("/a")).unwrap(), InitSpec::File("/a/f.txt".into()));
        assert!(parse_init("zeros", None, Path::new("")).is_err());
    }

    #[test]
    fn seed_override_only_touches_random_init() {
        let mut c = ExperimentConfig::parse(BASIC, "basic", Path::new("")).unwrap();
        c.override_seed(99);
        assert_eq!(c.init, InitSpec::RandomNormal(99));
    }
}
