//! Text formats for graphs and node attributes.
//!
//! A dataset directory holds up to four files:
//!
//! | file           | format                                           |
//! |----------------|--------------------------------------------------|
//! | `edges.txt`    | one `u v` pair per line, `#` starts a comment    |
//! | `features.csv` | row `r` holds the features of node `r`, no header|
//! | `labels.csv`   | `node,label`, optional header                     |
//! | `masks.csv`    | `node,split` with split in `train`/`val`/`test`  |

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::graph::{Masks, NodeId, Split, WeightedGraph};
use crate::linalg::Matrix;

pub const DATASET_FILES: [&str; 4] = ["edges.txt", "features.csv", "labels.csv", "masks.csv"];

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

/// Reads an edge list. `n_nodes` is `max id + 1`, or `n_hint` when larger.
pub fn load_edge_list(path: impl AsRef<Path>, n_hint: Option<usize>) -> Result<WeightedGraph> {
    let path = path.as_ref();
    parse_edge_list(
        BufReader::new(open(path)?),
        &path.display().to_string(),
        n_hint,
    )
}

pub fn parse_edge_list<R: BufRead>(
    reader: R,
    source: &str,
    n_hint: Option<usize>,
) -> Result<WeightedGraph> {
    let mut edges = Vec::new();
    let mut max_id: Option<NodeId> = None;
    for (idx, line) in reader.lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::io(source, e))?;
        let body = line.trim();
        if body.is_empty() || body.starts_with('#') {
            continue;
        }
        let parse_err = |msg: String| Error::Parse {
            path: source.to_string(),
            line: line_no,
            msg,
        };
        let mut fields = body.split_whitespace();
        let (Some(a), Some(b), None) = (fields.next(), fields.next(), fields.next()) else {
            return Err(parse_err(format!("expected `u v`, found `{body}`")));
        };
        let mut ids = [0 as NodeId; 2];
        for (slot, tok) in ids.iter_mut().zip([a, b]) {
            let raw: u64 = tok
                .parse()
                .map_err(|_| parse_err(format!("`{tok}` is not a nonnegative integer")))?;
            *slot = NodeId::try_from(raw).map_err(|_| Error::IdOverflow(raw))?;
        }
        max_id = max_id.max(Some(ids[0].max(ids[1])));
        edges.push((ids[0], ids[1]));
    }
    let from_ids = max_id.map_or(0, |m| m as usize + 1);
    let n = from_ids.max(n_hint.unwrap_or(0));
    WeightedGraph::from_edges(n, edges)
}

pub fn write_edge_list<W: Write>(g: &WeightedGraph, mut out: W) -> std::io::Result<()> {
    for (u, v) in g.edges() {
        writeln!(out, "{u} {v}")?;
    }
    Ok(())
}

pub fn load_features(path: impl AsRef<Path>) -> Result<Matrix> {
    let path = path.as_ref();
    read_features(open(path)?, &path.display().to_string())
}

fn read_features<R: Read>(reader: R, source: &str) -> Result<Matrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let parse_err = |msg: String| Error::Parse {
            path: source.to_string(),
            line: idx + 1,
            msg,
        };
        if *cols.get_or_insert(rec.len()) != rec.len() {
            return Err(parse_err(format!(
                "expected {} columns, found {}",
                cols.unwrap(),
                rec.len()
            )));
        }
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| parse_err(format!("`{field}` is not a number")))?;
            data.push(v);
        }
        rows += 1;
    }
    Ok(Matrix::from_vec(rows, cols.unwrap_or(0), data))
}

/// Reads `node,<value>` rows; a first row whose node field is not an integer
/// is taken as a header.
fn read_node_pairs<R: Read>(reader: R, source: &str) -> Result<Vec<(usize, usize, String)>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let line = idx + 1;
        if rec.len() != 2 {
            return Err(Error::Parse {
                path: source.to_string(),
                line,
                msg: format!("expected 2 columns, found {}", rec.len()),
            });
        }
        match rec[0].parse::<usize>() {
            Ok(node) => out.push((line, node, rec[1].to_string())),
            Err(_) if idx == 0 => continue,
            Err(_) => {
                return Err(Error::Parse {
                    path: source.to_string(),
                    line,
                    msg: format!("`{}` is not a node id", &rec[0]),
                })
            }
        }
    }
    Ok(out)
}

pub fn load_labels(path: impl AsRef<Path>, n_nodes: usize) -> Result<Vec<u32>> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let mut labels = vec![None; n_nodes];
    for (line, node, value) in read_node_pairs(open(path)?, &source)? {
        let err = |msg: String| Error::Parse {
            path: source.clone(),
            line,
            msg,
        };
        if node >= n_nodes {
            return Err(err(format!("node {node} out of range ({n_nodes} nodes)")));
        }
        let label: u32 = value
            .parse()
            .map_err(|_| err(format!("`{value}` is not a class id")))?;
        labels[node] = Some(label);
    }
    labels
        .into_iter()
        .enumerate()
        .map(|(i, l)| {
            l.ok_or_else(|| Error::Parse {
                path: source.clone(),
                line: 0,
                msg: format!("node {i} has no label"),
            })
        })
        .collect()
}

pub fn load_masks(path: impl AsRef<Path>, n_nodes: usize) -> Result<Masks> {
    let path = path.as_ref();
    let source = path.display().to_string();
    let mut split = vec![None; n_nodes];
    for (line, node, value) in read_node_pairs(open(path)?, &source)? {
        let err = |msg: String| Error::Parse {
            path: source.clone(),
            line,
            msg,
        };
        if node >= n_nodes {
            return Err(err(format!("node {node} out of range ({n_nodes} nodes)")));
        }
        split[node] = Some(value.parse::<Split>().map_err(err)?);
    }
    Ok(Masks::new(split))
}

/// Loads a dataset directory. Only `edges.txt` is required; `n_nodes` also
/// covers trailing isolated nodes that have features.
pub fn load_dataset_dir(dir: impl AsRef<Path>) -> Result<WeightedGraph> {
    let dir = dir.as_ref();
    let features_path = dir.join("features.csv");
    let features = if features_path.exists() {
        Some(load_features(&features_path)?)
    } else {
        None
    };
    let hint = features.as_ref().map(Matrix::rows);
    let mut g = load_edge_list(dir.join("edges.txt"), hint)?;
    let n = g.n_nodes();
    if let Some(f) = features {
        g = g.with_features(f)?;
    }
    let labels_path = dir.join("labels.csv");
    if labels_path.exists() {
        g = g.with_labels(load_labels(&labels_path, n)?)?;
    }
    let masks_path = dir.join("masks.csv");
    if masks_path.exists() {
        g = g.with_masks(load_masks(&masks_path, n)?)?;
    }
    Ok(g)
}

/// Writes `g` in the dataset directory layout. Self-loops added by
/// normalization are written like any other edge.
pub fn write_dataset_dir(g: &WeightedGraph, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let create = |name: &str| {
        let p = dir.join(name);
        File::create(&p)
            .map(BufWriter::new)
            .map_err(|e| Error::io(p, e))
    };
    let io_err = |name: &str, e| Error::io(dir.join(name), e);

    let mut out = create("edges.txt")?;
    write_edge_list(g, &mut out).map_err(|e| io_err("edges.txt", e))?;
    out.flush().map_err(|e| io_err("edges.txt", e))?;

    if let Some(f) = g.features() {
        let mut out = create("features.csv")?;
        for i in 0..f.rows() {
            let line: Vec<String> = f.row(i).iter().map(|v| format!("{v}")).collect();
            writeln!(out, "{}", line.join(",")).map_err(|e| io_err("features.csv", e))?;
        }
        out.flush().map_err(|e| io_err("features.csv", e))?;
    }
    if let Some(labels) = g.labels() {
        let mut out = create("labels.csv")?;
        writeln!(out, "node,label").map_err(|e| io_err("labels.csv", e))?;
        for (i, l) in labels.iter().enumerate() {
            writeln!(out, "{i},{l}").map_err(|e| io_err("labels.csv", e))?;
        }
        out.flush().map_err(|e| io_err("labels.csv", e))?;
    }
    if let Some(m) = g.masks() {
        let mut out = create("masks.csv")?;
        writeln!(out, "node,split").map_err(|e| io_err("masks.csv", e))?;
        for i in 0..m.len() {
            if let Some(s) = m.split_of(i as NodeId) {
                writeln!(out, "{i},{s}").map_err(|e| io_err("masks.csv", e))?;
            }
        }
        out.flush().map_err(|e| io_err("masks.csv", e))?;
    }
    Ok(())
}
