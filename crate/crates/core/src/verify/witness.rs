use std::collections::BTreeMap;
use std::fmt::Write as _;

use ndarray::{Array1, Array2};

use crate::energy::WeightSet;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::scalar::Scalar;

const HEADER: &str = "# gel witness";

/// A self-contained check instance: a graph plus named matrices, scalars
/// and tags. Serializes to a line-oriented text document.
///
/// ```text
/// # gel witness
/// kind gradient_fd
/// graph 3
/// 0 1
/// 1 2
/// end
/// matrix F 3 1
/// 1.0
/// 0.0
/// -2.5
/// scalar h 1e-5
/// tag activation relu
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    pub kind: String,
    pub graph: Graph,
    pub matrices: BTreeMap<String, Array2<f64>>,
    pub scalars: BTreeMap<String, f64>,
    pub tags: BTreeMap<String, String>,
}

impl Instance {
    pub fn new(kind: impl Into<String>, graph: Graph) -> Self {
        Self {
            kind: kind.into(),
            graph,
            matrices: BTreeMap::new(),
            scalars: BTreeMap::new(),
            tags: BTreeMap::new(),
        }
    }

    pub fn with_matrix(mut self, name: &str, m: &Array2<f64>) -> Self {
        self.matrices.insert(name.to_string(), m.clone());
        self
    }

    pub fn with_scalar(mut self, name: &str, v: f64) -> Self {
        self.scalars.insert(name.to_string(), v);
        self
    }

    pub fn with_tag(mut self, name: &str, v: &str) -> Self {
        self.tags.insert(name.to_string(), v.to_string());
        self
    }

    /// Stores `W`, `Omega`, `Wtilde`, `beta` and, when present, `omega` (as a row).
    pub fn with_weights<T: Scalar>(mut self, w: &WeightSet<T>) -> Self {
        let conv = |m: &Array2<T>| m.mapv(|x| x.as_f64());
        self = self
            .with_matrix("W", &conv(w.w()))
            .with_matrix("Omega", &conv(w.omega()))
            .with_matrix("Wtilde", &conv(w.wtilde()))
            .with_scalar("beta", w.beta().as_f64());
        if let Some(om) = w.omega_diag() {
            let row = om.mapv(|x| x.as_f64()).insert_axis(ndarray::Axis(0));
            self = self.with_matrix("omega", &row);
        }
        self
    }

    /// Rebuilds the weights stored by [`with_weights`](Self::with_weights).
    pub fn weights(&self) -> Result<WeightSet<f64>> {
        let mut w = WeightSet::zeros(self.matrix("W")?.nrows())
            .with_w(self.matrix("W")?.clone())?
            .with_beta(self.scalar_or("beta", 0.0));
        if let Ok(om) = self.matrix("Omega") {
            w = w.with_omega(om.clone())?;
        }
        if let Ok(wt) = self.matrix("Wtilde") {
            w = w.with_wtilde(wt.clone())?;
        }
        if let Ok(om) = self.matrix("omega") {
            w = w.with_omega_diag(om.row(0).to_owned())?;
        }
        Ok(w)
    }

    pub fn matrix(&self, name: &str) -> Result<&Array2<f64>> {
        self.matrices
            .get(name)
            .ok_or_else(|| Error::Config(format!("{} instance lacks matrix `{name}`", self.kind)))
    }

    pub fn vector(&self, name: &str) -> Result<Array1<f64>> {
        let m = self.matrix(name)?;
        Ok(m.iter().copied().collect())
    }

    pub fn scalar(&self, name: &str) -> Result<f64> {
        self.scalars
            .get(name)
            .copied()
            .ok_or_else(|| Error::Config(format!("{} instance lacks scalar `{name}`", self.kind)))
    }

    pub fn scalar_or(&self, name: &str, default: f64) -> f64 {
        self.scalars.get(name).copied().unwrap_or(default)
    }

    pub fn tag(&self, name: &str) -> Result<&str> {
        self.tags
            .get(name)
            .map(String::as_str)
            .ok_or_else(|| Error::Config(format!("{} instance lacks tag `{name}`", self.kind)))
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{HEADER}");
        let _ = writeln!(out, "kind {}", self.kind);
        let _ = writeln!(out, "graph {}", self.graph.n());
        for &(u, v) in self.graph.edges() {
            let _ = writeln!(out, "{u} {v}");
        }
        let _ = writeln!(out, "end");
        for (name, m) in &self.matrices {
            let _ = writeln!(out, "matrix {name} {} {}", m.nrows(), m.ncols());
            for row in m.rows() {
                let cells: Vec<String> = row.iter().map(|x| format!("{x:?}")).collect();
                let _ = writeln!(out, "{}", cells.join(" "));
            }
        }
        for (name, v) in &self.scalars {
            let _ = writeln!(out, "scalar {name} {v:?}");
        }
        for (name, v) in &self.tags {
            let _ = writeln!(out, "tag {name} {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let perr = |line: usize, msg: &str| Error::Parse { line, msg: msg.to_string() };
        let num = |line: usize, s: &str| -> Result<f64> {
            s.parse::<f64>().map_err(|_| perr(line, &format!("`{s}` is not a number")))
        };
        let count = |line: usize, s: Option<&str>| -> Result<usize> {
            s.and_then(|s| s.parse().ok()).ok_or_else(|| perr(line, "expected a count"))
        };

        match lines.next() {
            Some((_, HEADER)) => {}
            Some((line, _)) => return Err(perr(line, "missing `# gel witness` header")),
            None => return Err(perr(0, "empty witness")),
        }
        let mut kind = None;
        let mut graph = None;
        let mut matrices = BTreeMap::new();
        let mut scalars = BTreeMap::new();
        let mut tags = BTreeMap::new();
        while let Some((line, l)) = lines.next() {
            let mut parts = l.split_whitespace();
            match parts.next() {
                Some("kind") => kind = parts.next().map(str::to_string),
                Some("graph") => {
                    let n = count(line, parts.next())?;
                    let mut edges = Vec::new();
                    loop {
                        let (eline, el) = lines.next().ok_or_else(|| perr(line, "unterminated graph block"))?;
                        if el == "end" {
                            break;
                        }
                        let mut uv = el.split_whitespace();
                        let u = count(eline, uv.next())?;
                        let v = count(eline, uv.next())?;
                        edges.push((u, v));
                    }
                    graph = Some(Graph::new(n, edges)?);
                }
                Some("matrix") => {
                    let name = parts.next().ok_or_else(|| perr(line, "matrix needs a name"))?;
                    let rows = count(line, parts.next())?;
                    let cols = count(line, parts.next())?;
                    let mut data = Vec::with_capacity(rows * cols);
                    for _ in 0..rows {
                        let (rline, rl) = lines.next().ok_or_else(|| perr(line, "matrix truncated"))?;
                        let before = data.len();
                        for cell in rl.split_whitespace() {
                            data.push(num(rline, cell)?);
                        }
                        if data.len() - before != cols {
                            return Err(perr(rline, &format!("expected {cols} values")));
                        }
                    }
                    let m = Array2::from_shape_vec((rows, cols), data).expect("shape checked");
                    matrices.insert(name.to_string(), m);
                }
                Some("scalar") => {
                    let name = parts.next().ok_or_else(|| perr(line, "scalar needs a name"))?;
                    let v = num(line, parts.next().ok_or_else(|| perr(line, "scalar needs a value"))?)?;
                    scalars.insert(name.to_string(), v);
                }
                Some("tag") => {
                    let name = parts.next().ok_or_else(|| perr(line, "tag needs a name"))?;
                    let v = parts.next().ok_or_else(|| perr(line, "tag needs a value"))?;
                    tags.insert(name.to_string(), v.to_string());
                }
                Some(c) if c.starts_with('#') => {}
                Some(other) => return Err(perr(line, &format!("unknown record `{other}`"))),
                None => {}
            }
        }
        Ok(Self {
            kind: kind.ok_or_else(|| perr(0, "witness has no kind"))?,
            graph: graph.ok_or_else(|| perr(0, "witness has no graph"))?,
            matrices,
            scalars,
            tags,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::GraphKind;
    use ndarray::array;

    #[test]
    fn round_trip_is_exact() {
        let g = Graph::generate(&GraphKind::Cycle(4)).unwrap();
        let inst = Instance::new("closed_form", g)
            .with_matrix("F0", &array![[0.1, 1.0 / 3.0], [-2.5e-17, 7.0], [1e300, -0.0], [3.0, 4.0]])
            .with_scalar("tau", 0.25)
            .with_tag("activation", "relu");
        let back = Instance::parse(&inst.to_text()).unwrap();
        assert_eq!(back, inst);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = "# gel witness\nkind x\ngraph 2\n0 1\nend\nmatrix F 1 2\n1.0 abc\n";
        match Instance::parse(text) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 7),
            other => panic!("{other:?}"),
        }
        assert!(Instance::parse("kind x").is_err());
    }
}
