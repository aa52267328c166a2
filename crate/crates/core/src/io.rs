//! On-disk formats: dataset directories, key=value configs and atomic writes.
//!
//! A dataset directory holds
//!
//! * `meta.json`: `{"name", "num_nodes", "num_features", "num_classes"}`
//! * `edges.tsv`: one `src<TAB>dst` pair per line, 0-based
//! * `nodes.tsv`: one `id<TAB>label<TAB>f_1,...,f_f` line per node

use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::linalg::Dense;
use crate::model::DsfConfig;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub num_nodes: usize,
    pub num_features: usize,
    pub num_classes: usize,
}

#[derive(Debug, Clone)]
pub struct Dataset<T> {
    pub meta: DatasetMeta,
    pub graph: Graph<T>,
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn parse_index(path: &Path, line: usize, field: &str, what: &str) -> Result<usize> {
    field
        .trim()
        .parse()
        .map_err(|_| parse_err(path, line, format!("{what} {field:?} is not a non-negative integer")))
}

/// Reads and validates a dataset directory.
pub fn load_dataset<T: Scalar>(dir: &Path) -> Result<Dataset<T>> {
    let meta_path = dir.join("meta.json");
    let meta: DatasetMeta = serde_json::from_str(&read_text(&meta_path)?)
        .map_err(|e| parse_err(&meta_path, e.line(), e.to_string()))?;
    let n = meta.num_nodes;

    let edges_path = dir.join("edges.tsv");
    let mut edges = Vec::new();
    for (idx, line) in read_text(&edges_path)?.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.split('\t');
        let (Some(a), Some(b), None) = (parts.next(), parts.next(), parts.next()) else {
            return Err(parse_err(&edges_path, lineno, "expected `src<TAB>dst`"));
        };
        let a = parse_index(&edges_path, lineno, a, "source")?;
        let b = parse_index(&edges_path, lineno, b, "target")?;
        for v in [a, b] {
            if v >= n {
                return Err(parse_err(&edges_path, lineno, format!("node {v} out of range for {n} nodes")));
            }
        }
        edges.push((a, b));
    }

    let nodes_path = dir.join("nodes.tsv");
    let f = meta.num_features;
    let mut features = Dense::zeros(n, f);
    let mut labels = vec![None; n];
    for (idx, line) in read_text(&nodes_path)?.lines().enumerate() {
        let lineno = idx + 1;
        if line.trim().is_empty() {
            continue;
        }
        let mut parts = line.splitn(3, '\t');
        let (Some(id), Some(label)) = (parts.next(), parts.next()) else {
            return Err(parse_err(&nodes_path, lineno, "expected `id<TAB>label<TAB>features`"));
        };
        let id = parse_index(&nodes_path, lineno, id, "node id")?;
        if id >= n {
            return Err(parse_err(&nodes_path, lineno, format!("node {id} out of range for {n} nodes")));
        }
        if labels[id].is_some() {
            return Err(parse_err(&nodes_path, lineno, format!("node {id} listed twice")));
        }
        let label = parse_index(&nodes_path, lineno, label, "label")?;
        if label >= meta.num_classes {
            return Err(parse_err(
                &nodes_path,
                lineno,
                format!("label {label} not below {} classes", meta.num_classes),
            ));
        }
        labels[id] = Some(label);
        let raw = parts.next().unwrap_or("").trim();
        let values: Vec<&str> = if raw.is_empty() { Vec::new() } else { raw.split(',').collect() };
        if values.len() != f {
            return Err(parse_err(
                &nodes_path,
                lineno,
                format!("{} feature values, expected {f}", values.len()),
            ));
        }
        for (c, v) in values.iter().enumerate() {
            let x: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(&nodes_path, lineno, format!("feature {v:?} is not a number")))?;
            features[(id, c)] = T::of(x);
        }
    }
    let labels = labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| l.ok_or_else(|| parse_err(&nodes_path, 0, format!("node {i} missing"))))
        .collect::<Result<Vec<_>>>()?;
    let graph = Graph::build(&edges, n, features, labels, meta.num_classes)?;
    Ok(Dataset { meta, graph })
}

/// Writes `graph` in the dataset directory format (creating `dir`).
pub fn write_dataset<T: Scalar>(dir: &Path, name: &str, graph: &Graph<T>) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let meta = DatasetMeta {
        name: name.to_string(),
        num_nodes: graph.num_nodes(),
        num_features: graph.num_features(),
        num_classes: graph.class_count(),
    };
    write_atomic(&dir.join("meta.json"), serde_json::to_string_pretty(&meta)?.as_bytes())?;
    let mut edges = String::new();
    for &(a, b) in graph.edges() {
        writeln!(edges, "{a}\t{b}").expect("write to string");
    }
    write_atomic(&dir.join("edges.tsv"), edges.as_bytes())?;
    let mut nodes = String::new();
    let x = graph.features();
    for i in 0..graph.num_nodes() {
        let feats: Vec<String> = x.row(i).iter().map(|v| v.as_f64().to_string()).collect();
        writeln!(nodes, "{i}\t{}\t{}", graph.labels()[i], feats.join(",")).expect("write to string");
    }
    write_atomic(&dir.join("nodes.tsv"), nodes.as_bytes())
}

/// Parses `key = value` lines over the defaults. `#` starts a comment.
pub fn parse_config(text: &str, origin: &Path) -> Result<DsfConfig> {
    let mut config = DsfConfig::default();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = |msg: String| Error::Config(format!("{}:{}: {msg}", origin.display(), idx + 1));
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| at(format!("expected key = value, got {line:?}")))?;
        config.set(key.trim(), value.trim()).map_err(|e| match e {
            Error::Config(msg) => at(msg),
            other => other,
        })?;
    }
    Ok(config)
}

pub fn load_config(path: &Path) -> Result<DsfConfig> {
    parse_config(&read_text(path)?, path)
}

/// Canonical `key = value` rendering of every config key.
pub fn render_config(config: &DsfConfig) -> String {
    let mut out = String::new();
    for (k, v) in config.entries() {
        writeln!(out, "{k} = {v}").expect("write to string");
    }
    out
}

/// First 16 hex digits of the SHA-256 of [`render_config`].
pub fn config_hash(config: &DsfConfig) -> String {
    let digest = Sha256::digest(render_config(config).as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let mut file = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    file.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    file.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(file);
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn write_json<S: Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

/// Comma-separated table with a header row.
pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    write_atomic(path, out.as_bytes())
}

/// Reads a numeric CSV with a header; returns the header and rows.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>)> {
    let text = read_text(path)?;
    let mut lines = text.lines().enumerate();
    let header = lines
        .next()
        .ok_or_else(|| parse_err(path, 1, "empty file"))?
        .1
        .split(',')
        .map(str::to_string)
        .collect::<Vec<_>>();
    let mut rows = Vec::new();
    for (idx, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let row = line
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| parse_err(path, idx + 1, format!("{v:?} is not a number")))
            })
            .collect::<Result<Vec<_>>>()?;
        if row.len() != header.len() {
            return Err(parse_err(
                path,
                idx + 1,
                format!("{} fields, header has {}", row.len(), header.len()),
            ));
        }
        rows.push(row);
    }
    Ok((header, rows))
}
