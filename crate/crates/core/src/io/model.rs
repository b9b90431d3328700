//! Line-oriented model files.
//!
//! ```text
//! prtree-model 1
//! feature 0 x1
//! feature 1 x2
//! kernel norm NA
//! fill_type 2
//! sigma 0.5 0.25
//! control cp 0.01
//! mse_train 0.123
//! mse_valid NA
//! nodes 3
//! node 0 0 NA split 0 1.5 1 2
//! node 1 1 0 leaf
//! node 2 1 0 leaf
//! region 0 -inf inf -inf inf
//! region 1 -inf 1.5 -inf inf
//! region 2 1.5 inf -inf inf
//! gamma 2 0.75 -1.25
//! end
//! ```
//!
//! Node lines read `id depth parent (leaf | split feature threshold left
//! right)`; region lines list `lower upper` per feature. Floats use the
//! shortest representation that parses back to the same value, and infinite
//! bounds are written `inf` / `-inf`, so writing a parsed file reproduces it
//! byte for byte.

use std::fmt::Write as _;
use std::path::Path;

use super::fmt_opt;
use crate::error::{Error, Result};
use crate::estimation::FitResult;
use crate::kernels::{KernelFamily, KernelSpec};
use crate::tree::{FillType, NodeInfo, NodeSplit, PrTree, Region};

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &str = "prtree-model";

/// A tree together with the metadata stored next to it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelFile {
    pub tree: PrTree,
    pub feature_names: Vec<String>,
    /// Control settings as recorded at fit time.
    pub control: Vec<(String, String)>,
    pub mse_train: Option<f64>,
    pub mse_valid: Option<f64>,
}

impl ModelFile {
    pub fn from_fit(fit: &FitResult, feature_names: Vec<String>, control: &crate::ControlParams) -> Result<Self> {
        if feature_names.len() != fit.tree.n_features() {
            return Err(Error::Shape(format!(
                "{} feature names for {} features",
                feature_names.len(),
                fit.tree.n_features()
            )));
        }
        Ok(ModelFile {
            tree: fit.tree.clone(),
            feature_names,
            control: control.to_pairs().into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            mse_train: Some(fit.mse_train),
            mse_valid: fit.mse_valid,
        })
    }

    pub fn to_text(&self) -> String {
        let t = &self.tree;
        let mut s = String::new();
        let _ = writeln!(s, "{MAGIC} {MODEL_FORMAT_VERSION}");
        for (j, name) in self.feature_names.iter().enumerate() {
            let _ = writeln!(s, "feature {j} {name}");
        }
        let k = t.kernel();
        let _ = writeln!(s, "kernel {} {}", k.family(), fmt_opt(k.shape()));
        let _ = writeln!(s, "fill_type {}", t.fill_type());
        let _ = writeln!(s, "sigma {}", join(t.sigma()));
        for (key, value) in &self.control {
            let _ = writeln!(s, "control {key} {value}");
        }
        let _ = writeln!(s, "mse_train {}", fmt_opt(self.mse_train));
        let _ = writeln!(s, "mse_valid {}", fmt_opt(self.mse_valid));
        let _ = writeln!(s, "nodes {}", t.nodes().len());
        for n in t.nodes() {
            let parent = n.parent.map_or_else(|| "NA".to_string(), |p| p.to_string());
            match n.split {
                Some(sp) => {
                    let _ = writeln!(
                        s,
                        "node {} {} {parent} split {} {} {} {}",
                        n.id, n.depth, sp.feature, sp.threshold, sp.left, sp.right
                    );
                }
                None => {
                    let _ = writeln!(s, "node {} {} {parent} leaf", n.id, n.depth);
                }
            }
        }
        for (i, r) in t.regions().iter().enumerate() {
            let b: Vec<f64> = r.bounds().iter().flat_map(|&(lo, hi)| [lo, hi]).collect();
            let _ = writeln!(s, "region {i} {}", join(&b));
        }
        let _ = writeln!(s, "gamma {} {}", t.gamma().len(), join(t.gamma()));
        s.push_str("end\n");
        s
    }
}

fn join(v: &[f64]) -> String {
    v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ")
}

pub fn save_model(model: &ModelFile, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, model.to_text())?;
    Ok(())
}

pub fn load_model(path: impl AsRef<Path>) -> Result<ModelFile> {
    parse_model(&std::fs::read_to_string(path)?)
}

struct Lines<'a> {
    iter: std::iter::Peekable<std::iter::Enumerate<std::str::Lines<'a>>>,
    version: String,
    line: usize,
}

impl<'a> Lines<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::ModelFormat {
            version: self.version.clone(),
            message: format!("line {}: {}", self.line, message.into()),
        }
    }

    fn peek_key(&mut self) -> Option<&'a str> {
        self.iter.peek().and_then(|(_, l)| l.split(' ').next())
    }

    /// Next line, which must start with `key`; returns the rest of the line.
    fn expect(&mut self, key: &str) -> Result<&'a str> {
        let Some((i, l)) = self.iter.next() else {
            return Err(self.err(format!("unexpected end of file, expected '{key}'")));
        };
        self.line = i + 1;
        match l.split_once(' ') {
            Some((k, rest)) if k == key => Ok(rest),
            _ if l == key => Ok(""),
            _ => Err(self.err(format!("expected '{key}'"))),
        }
    }

    fn float(&self, tok: &str) -> Result<f64> {
        tok.parse().map_err(|_| self.err(format!("bad number '{tok}'")))
    }

    fn opt_float(&self, tok: &str) -> Result<Option<f64>> {
        if tok == "NA" {
            Ok(None)
        } else {
            self.float(tok).map(Some)
        }
    }

    fn index(&self, tok: &str) -> Result<usize> {
        tok.parse().map_err(|_| self.err(format!("bad index '{tok}'")))
    }

    fn floats(&self, rest: &str) -> Result<Vec<f64>> {
        if rest.is_empty() {
            return Ok(Vec::new());
        }
        rest.split(' ').map(|t| self.float(t)).collect()
    }
}

pub fn parse_model(text: &str) -> Result<ModelFile> {
    let mut lines = Lines {
        iter: text.lines().enumerate().peekable(),
        version: "?".to_string(),
        line: 0,
    };
    let version = lines.expect(MAGIC)?;
    lines.version = version.to_string();
    if version != MODEL_FORMAT_VERSION.to_string() {
        return Err(lines.err(format!("unsupported version, this build reads {MODEL_FORMAT_VERSION}")));
    }

    let mut feature_names = Vec::new();
    while lines.peek_key() == Some("feature") {
        let rest = lines.expect("feature")?;
        let (j, name) = rest.split_once(' ').ok_or_else(|| lines.err("feature needs an index and a name"))?;
        if lines.index(j)? != feature_names.len() {
            return Err(lines.err("features out of order"));
        }
        feature_names.push(name.to_string());
    }

    let kernel = {
        let rest = lines.expect("kernel")?;
        let (fam, shape) = rest.split_once(' ').ok_or_else(|| lines.err("kernel needs a family and a shape"))?;
        let fam: KernelFamily = fam.parse().map_err(|e: Error| lines.err(e.to_string()))?;
        KernelSpec::new(fam, lines.opt_float(shape)?).map_err(|e| lines.err(e.to_string()))?
    };
    let fill_type: FillType = lines
        .expect("fill_type")?
        .parse()
        .map_err(|e: Error| lines.err(e.to_string()))?;
    let sigma = {
        let rest = lines.expect("sigma")?;
        lines.floats(rest)?
    };
    if sigma.len() != feature_names.len() {
        return Err(lines.err(format!(
            "{} sigma values for {} features",
            sigma.len(),
            feature_names.len()
        )));
    }
    let p = sigma.len();

    let mut control = Vec::new();
    while lines.peek_key() == Some("control") {
        let rest = lines.expect("control")?;
        let (k, v) = rest.split_once(' ').ok_or_else(|| lines.err("control needs a key and a value"))?;
        control.push((k.to_string(), v.to_string()));
    }
    let mse_train = {
        let rest = lines.expect("mse_train")?;
        lines.opt_float(rest)?
    };
    let mse_valid = {
        let rest = lines.expect("mse_valid")?;
        lines.opt_float(rest)?
    };

    let n_nodes = {
        let rest = lines.expect("nodes")?;
        lines.index(rest)?
    };
    let mut nodes = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let rest = lines.expect("node")?;
        let tok: Vec<&str> = rest.split(' ').collect();
        if tok.len() < 4 {
            return Err(lines.err("node line is too short"));
        }
        let id = lines.index(tok[0])?;
        if id != i {
            return Err(lines.err(format!("expected node {i}, found {id}")));
        }
        let depth = lines.index(tok[1])?;
        let parent = if tok[2] == "NA" { None } else { Some(lines.index(tok[2])?) };
        let split = match (tok[3], tok.len()) {
            ("leaf", 4) => None,
            ("split", 8) => Some(NodeSplit {
                feature: lines.index(tok[4])?,
                threshold: lines.float(tok[5])?,
                left: lines.index(tok[6])?,
                right: lines.index(tok[7])?,
            }),
            _ => return Err(lines.err("node must end with 'leaf' or 'split feature threshold left right'")),
        };
        if split.is_some_and(|s| s.feature >= p) {
            return Err(lines.err("split feature out of range"));
        }
        nodes.push(NodeInfo { id, depth, parent, split });
    }

    let mut regions = Vec::with_capacity(n_nodes);
    for i in 0..n_nodes {
        let rest = lines.expect("region")?;
        let (id, b) = rest.split_once(' ').unwrap_or((rest, ""));
        if lines.index(id)? != i {
            return Err(lines.err(format!("expected region {i}")));
        }
        let b = lines.floats(b)?;
        if b.len() != 2 * p {
            return Err(lines.err(format!("region needs {} bounds, found {}", 2 * p, b.len())));
        }
        let bounds = b.chunks(2).map(|c| (c[0], c[1])).collect();
        regions.push(Region::from_bounds(bounds).map_err(|e| lines.err(e.to_string()))?);
    }

    let gamma = {
        let rest = lines.expect("gamma")?;
        let (count, vals) = rest.split_once(' ').unwrap_or((rest, ""));
        let count = lines.index(count)?;
        let vals = lines.floats(vals)?;
        if vals.len() != count {
            return Err(lines.err(format!("gamma declares {count} values, found {}", vals.len())));
        }
        vals
    };
    lines.expect("end")?;
    if let Some((i, _)) = lines.iter.find(|(_, l)| !l.trim().is_empty()) {
        lines.line = i + 1;
        return Err(lines.err("content after 'end'"));
    }

    let tree = PrTree::from_parts(nodes, regions, gamma, sigma, kernel, fill_type).map_err(|e| lines.err(e.to_string()))?;
    Ok(ModelFile {
        tree,
        feature_names,
        control,
        mse_train,
        mse_valid,
    })
}
