use std::collections::btree_map::Entry;
use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use ndarray::Array2;
use serde::Serialize;

use super::Dataset;
use crate::error::{Error, Result};
use crate::graph::build_graph;

pub const FORMAT_MAGIC: &str = "TAGCN-DATASET";
const FORMAT_VERSION: &str = "v1";

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct LoadOptions {
    /// Scale each feature row to unit sum after loading.
    pub row_normalize: bool,
}

/// Counts observed while loading. `edge_lines` is the number of `E` records in
/// the file; `undirected_edges` counts distinct vertex pairs after merging
/// records listed in both directions; `stored_entries` is the number of
/// nonzeros of the symmetric adjacency matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LoadReport {
    pub num_nodes: usize,
    pub edge_lines: usize,
    pub undirected_edges: usize,
    pub stored_entries: usize,
    pub num_features: usize,
    pub feature_entries: usize,
    pub num_classes: usize,
    pub labeled: usize,
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub repaired_isolated: Vec<usize>,
}

pub fn load_dataset(path: &Path) -> Result<Dataset> {
    Ok(load_dataset_with(path, LoadOptions::default())?.0)
}

pub fn load_dataset_with(path: &Path, opts: LoadOptions) -> Result<(Dataset, LoadReport)> {
    parse_dataset(&std::fs::read_to_string(path)?, opts)
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

struct Fields<'a> {
    line: usize,
    parts: std::str::SplitWhitespace<'a>,
}

impl<'a> Fields<'a> {
    fn next_str(&mut self, what: &str) -> Result<&'a str> {
        self.parts
            .next()
            .ok_or_else(|| format_err(self.line, format!("missing {what}")))
    }

    fn index(&mut self, what: &str, bound: usize) -> Result<usize> {
        let s = self.next_str(what)?;
        let v: usize = s
            .parse()
            .map_err(|_| format_err(self.line, format!("invalid {what} `{s}`")))?;
        if v >= bound {
            return Err(format_err(self.line, format!("{what} {v} out of range (limit {bound})")));
        }
        Ok(v)
    }

    fn count(&mut self, what: &str) -> Result<usize> {
        self.index(what, usize::MAX)
    }

    fn real(&mut self, what: &str) -> Result<f64> {
        let s = self.next_str(what)?;
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(format_err(self.line, format!("invalid {what} `{s}`"))),
        }
    }

    fn finish(mut self) -> Result<()> {
        match self.parts.next() {
            Some(extra) => Err(format_err(self.line, format!("unexpected trailing field `{extra}`"))),
            None => Ok(()),
        }
    }
}

/// Parses the text format. Blank lines and lines starting with `#` are ignored.
pub fn parse_dataset(text: &str, opts: LoadOptions) -> Result<(Dataset, LoadReport)> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));

    let (hline, header) = lines.next().ok_or_else(|| format_err(1, "empty file"))?;
    let mut h = Fields {
        line: hline,
        parts: header.split_whitespace(),
    };
    if h.next_str("magic")? != FORMAT_MAGIC {
        return Err(format_err(hline, format!("expected `{FORMAT_MAGIC}` header")));
    }
    let version = h.next_str("version")?;
    if version != FORMAT_VERSION {
        return Err(format_err(hline, format!("unsupported version `{version}`")));
    }
    let n = h.count("node count")?;
    let declared_edges = h.count("edge count")?;
    let dim = h.count("feature count")?;
    let num_classes = h.count("class count")?;
    h.finish()?;
    if n == 0 {
        return Err(format_err(hline, "node count must be positive"));
    }

    let mut edges: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut edge_lines = 0usize;
    let mut feats: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut labels = vec![-1i64; n];
    let mut labeled = HashSet::new();
    let mut splits: [Vec<usize>; 3] = Default::default();

    for (line, content) in lines {
        let mut f = Fields {
            line,
            parts: content.split_whitespace(),
        };
        match f.next_str("record tag")? {
            "E" => {
                let src = f.index("source", n)?;
                let dst = f.index("target", n)?;
                let w = f.real("weight")?;
                f.finish()?;
                edge_lines += 1;
                match edges.entry((src.min(dst), src.max(dst))) {
                    Entry::Vacant(e) => {
                        e.insert(w);
                    }
                    Entry::Occupied(e) if *e.get() == w => {}
                    Entry::Occupied(e) => {
                        return Err(format_err(
                            line,
                            format!("edge {src}-{dst} listed with weights {} and {w}", e.get()),
                        ))
                    }
                }
            }
            "X" => {
                let node = f.index("node", n)?;
                let idx = f.index("feature index", dim)?;
                let v = f.real("feature value")?;
                f.finish()?;
                if feats.insert((node, idx), v).is_some() {
                    return Err(format_err(line, format!("feature ({node}, {idx}) listed twice")));
                }
            }
            "Y" => {
                let node = f.index("node", n)?;
                let label_str = f.next_str("label")?;
                let label: i64 = label_str
                    .parse()
                    .map_err(|_| format_err(line, format!("invalid label `{label_str}`")))?;
                f.finish()?;
                if label < 0 || label >= num_classes as i64 {
                    return Err(Error::LabelOutOfRange { node, label, num_classes });
                }
                if !labeled.insert(node) {
                    return Err(format_err(line, format!("node {node} labeled twice")));
                }
                labels[node] = label;
            }
            "SPLIT" => {
                let which = match f.next_str("split name")? {
                    "train" => 0,
                    "val" => 1,
                    "test" => 2,
                    other => return Err(format_err(line, format!("unknown split `{other}`"))),
                };
                let node = f.index("node", n)?;
                f.finish()?;
                splits[which].push(node);
            }
            other => return Err(format_err(line, format!("unknown record `{other}`"))),
        }
    }
    if edge_lines != declared_edges {
        return Err(format_err(
            hline,
            format!("header declares {declared_edges} edges, found {edge_lines}"),
        ));
    }

    let mut triples: Vec<(usize, usize, f64)> = edges.iter().map(|(&(a, b), &w)| (a, b, w)).collect();
    let mut touched = vec![false; n];
    for &(a, b, _) in &triples {
        touched[a] = true;
        touched[b] = true;
    }
    let repaired: Vec<usize> = (0..n).filter(|&i| !touched[i]).collect();
    triples.extend(repaired.iter().map(|&i| (i, i, 1.0)));
    let graph = build_graph(&triples, n, false)?;

    let mut features = Array2::zeros((n, dim));
    for (&(node, idx), &v) in &feats {
        features[[node, idx]] = v;
    }
    let [train, val, test] = splits;
    let report = LoadReport {
        num_nodes: n,
        edge_lines,
        undirected_edges: edges.len(),
        stored_entries: graph.nnz(),
        num_features: dim,
        feature_entries: feats.len(),
        num_classes,
        labeled: labeled.len(),
        train: train.len(),
        val: val.len(),
        test: test.len(),
        repaired_isolated: repaired.clone(),
    };
    let mut d = Dataset::new(graph, features, labels, train, val, test, num_classes)?.with_repaired(repaired);
    if opts.row_normalize {
        d.row_normalize_features();
    }
    Ok((d, report))
}

/// Writes the canonical form: every section sorted, zero features omitted,
/// self-loops added by the loader's isolated-vertex repair left out.
pub fn write_dataset<W: Write>(d: &Dataset, mut w: W) -> Result<()> {
    let g = d.graph();
    if g.is_directed() {
        return Err(Error::InvalidArgument("the dataset format stores undirected graphs only".into()));
    }
    let repaired: HashSet<usize> = d.repaired_vertices().iter().copied().collect();
    let mut edges: Vec<(usize, usize, f64)> = g
        .edges()
        .filter(|&(src, dst, _)| src <= dst && !(src == dst && repaired.contains(&src)))
        .collect();
    edges.sort_by_key(|e| (e.0, e.1));

    let mut out = String::new();
    let _ = writeln!(
        out,
        "{FORMAT_MAGIC} {FORMAT_VERSION} {} {} {} {}",
        d.num_nodes(),
        edges.len(),
        d.num_features(),
        d.num_classes()
    );
    for (a, b, wt) in edges {
        let _ = writeln!(out, "E {a} {b} {wt}");
    }
    for (node, row) in d.features().rows().into_iter().enumerate() {
        for (idx, &v) in row.iter().enumerate() {
            if v != 0.0 {
                let _ = writeln!(out, "X {node} {idx} {v}");
            }
        }
    }
    for (node, &label) in d.labels().iter().enumerate() {
        if label >= 0 {
            let _ = writeln!(out, "Y {node} {label}");
        }
    }
    for (name, idx) in [("train", d.train_idx()), ("val", d.val_idx()), ("test", d.test_idx())] {
        let mut sorted = idx.to_vec();
        sorted.sort_unstable();
        for node in sorted {
            let _ = writeln!(out, "SPLIT {name} {node}");
        }
    }
    w.write_all(out.as_bytes())?;
    w.flush()?;
    Ok(())
}
