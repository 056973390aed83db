//! Canonical on-disk dataset layout.
//!
//! ```text
//! meta.json     {"name": str, "n": int, "m": int, "d": int, "k": int}
//! features.bin  n·d little-endian f32, row-major
//! edges.tsv     "<i>\t<j>\n", one line per undirected edge, 0-based
//! labels.tsv    "<node>\t<class>\n" for each labeled node
//! train.idx, val.idx, test.idx   optional, one node id per line
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, Split};
use crate::numerics::DenseMatrix;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub k: usize,
}

#[derive(Clone, Copy, Debug, Default)]
pub struct LoadOptions {
    /// Divide each feature row by its L1 norm after loading.
    pub row_normalize: bool,
}

pub fn read_meta(dir: &Path) -> Result<DatasetMeta> {
    let path = dir.join("meta.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::ingest(&path, "open", e.to_string()))?;
    serde_json::from_str(&text).map_err(|e| Error::ingest(&path, format!("line {}", e.line()), e.to_string()))
}

/// Load a dataset directory. The edge count is taken from `edges.tsv` after
/// deduplication, not from `meta.json`.
pub fn load_dataset(dir: &Path, opts: &LoadOptions) -> Result<Graph> {
    let meta = read_meta(dir)?;
    let features = read_features(&dir.join("features.bin"), meta.n, meta.d)?;
    let edges = read_edges(&dir.join("edges.tsv"), meta.n)?;
    let labels = read_labels(&dir.join("labels.tsv"), meta.n, meta.k)?;
    let mut g = Graph::from_edges(meta.name.clone(), meta.n, &edges, features, labels, meta.k)?;
    if opts.row_normalize {
        g.row_normalize_features();
    }

    let idx_files = ["train.idx", "val.idx", "test.idx"].map(|f| dir.join(f));
    if idx_files.iter().any(|p| p.exists()) {
        let mut parts = Vec::with_capacity(3);
        for p in &idx_files {
            parts.push(if p.exists() { read_index(p, meta.n)? } else { Vec::new() });
        }
        let test = parts.pop().unwrap_or_default();
        let val = parts.pop().unwrap_or_default();
        let train = parts.pop().unwrap_or_default();
        let split = Split { train, val, test };
        split.validate(meta.n).map_err(|e| Error::ingest(dir.join("train.idx"), "split", e.to_string()))?;
        g.fixed_split = Some(split);
    }
    Ok(g)
}

fn read_features(path: &Path, n: usize, d: usize) -> Result<DenseMatrix> {
    let bytes = fs::read(path).map_err(|e| Error::ingest(path, "open", e.to_string()))?;
    let expected = n * d * 4;
    if bytes.len() != expected {
        return Err(Error::ingest(
            path,
            format!("byte offset {}", bytes.len().min(expected)),
            format!("expected {expected} bytes ({n}x{d} f32), found {}", bytes.len()),
        ));
    }
    let data: Vec<f64> = bytes.chunks_exact(4).map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64).collect();
    if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
        return Err(Error::ingest(path, format!("byte offset {}", pos * 4), "non-finite feature value"));
    }
    DenseMatrix::new(n, d, data)
}

fn parse_id(path: &Path, line_no: usize, field: &str, bound: usize, what: &str) -> Result<usize> {
    let v: usize = field
        .parse()
        .map_err(|_| Error::ingest(path, format!("line {line_no}"), format!("invalid {what} {field:?}")))?;
    if v >= bound {
        return Err(Error::ingest(path, format!("line {line_no}"), format!("{what} {v} out of range (< {bound})")));
    }
    Ok(v)
}

fn lines(path: &Path) -> Result<Vec<(usize, String)>> {
    let text = fs::read_to_string(path).map_err(|e| Error::ingest(path, "open", e.to_string()))?;
    Ok(text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r').to_string()))
        .filter(|(_, l)| !l.is_empty())
        .collect())
}

fn two_fields<'a>(path: &Path, line_no: usize, line: &'a str) -> Result<(&'a str, &'a str)> {
    let mut it = line.split('\t');
    match (it.next(), it.next(), it.next()) {
        (Some(a), Some(b), None) => Ok((a, b)),
        _ => Err(Error::ingest(path, format!("line {line_no}"), "expected two tab-separated fields")),
    }
}

fn read_edges(path: &Path, n: usize) -> Result<Vec<(usize, usize)>> {
    lines(path)?
        .iter()
        .map(|(no, line)| {
            let (a, b) = two_fields(path, *no, line)?;
            Ok((parse_id(path, *no, a, n, "node id")?, parse_id(path, *no, b, n, "node id")?))
        })
        .collect()
}

fn read_labels(path: &Path, n: usize, k: usize) -> Result<Vec<Option<usize>>> {
    let mut labels = vec![None; n];
    for (no, line) in lines(path)? {
        let (a, b) = two_fields(path, no, &line)?;
        let node = parse_id(path, no, a, n, "node id")?;
        let class = parse_id(path, no, b, k, "class id")?;
        if labels[node].replace(class).is_some() {
            return Err(Error::ingest(path, format!("line {no}"), format!("node {node} labeled twice")));
        }
    }
    Ok(labels)
}

fn read_index(path: &Path, n: usize) -> Result<Vec<usize>> {
    lines(path)?.iter().map(|(no, line)| parse_id(path, *no, line.trim(), n, "node id")).collect()
}

/// Write `g` in the canonical layout. Features are narrowed to f32, so
/// graphs loaded from disk round-trip exactly.
pub fn write_dataset(dir: &Path, g: &Graph) -> Result<()> {
    fs::create_dir_all(dir)?;
    let meta = DatasetMeta {
        name: g.name.clone(),
        n: g.node_count(),
        m: g.edge_count(),
        d: g.feature_dim(),
        k: g.class_count(),
    };
    fs::write(
        dir.join("meta.json"),
        serde_json::to_string_pretty(&meta).map_err(|e| Error::Contract(e.to_string()))? + "\n",
    )?;
    let mut bytes = Vec::with_capacity(g.features.len() * 4);
    for &v in g.features.as_slice() {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(dir.join("features.bin"), bytes)?;

    let mut edges = String::new();
    for (i, j) in g.edges() {
        edges.push_str(&format!("{i}\t{j}\n"));
    }
    fs::write(dir.join("edges.tsv"), edges)?;

    let mut labels = String::new();
    for (i, l) in g.labels().iter().enumerate() {
        if let Some(c) = l {
            labels.push_str(&format!("{i}\t{c}\n"));
        }
    }
    fs::write(dir.join("labels.tsv"), labels)?;

    if let Some(split) = &g.fixed_split {
        for (file, idx) in [("train.idx", &split.train), ("val.idx", &split.val), ("test.idx", &split.test)] {
            let body: String = idx.iter().map(|i| format!("{i}\n")).collect();
            fs::write(dir.join(file), body)?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::from_edges(
            "triangle",
            3,
            &[(0, 1), (1, 2), (2, 0)],
            DenseMatrix::from_rows(&[[1.0, 0.0], [0.5, 0.25], [0.0, 2.0]]),
            vec![Some(0), Some(1), None],
            2,
        )
        .unwrap()
    }

    #[test]
    fn round_trip_is_identical() {
        let dir = tempfile::tempdir().unwrap();
        let mut g = triangle();
        g.fixed_split = Some(Split { train: vec![0], val: vec![1], test: vec![2] });
        write_dataset(dir.path(), &g).unwrap();
        let back = load_dataset(dir.path(), &LoadOptions::default()).unwrap();
        assert_eq!(back, g);
    }

    #[test]
    fn duplicate_edge_lines_are_ignored() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &triangle()).unwrap();
        fs::write(dir.path().join("edges.tsv"), "0\t1\n1\t2\n2\t0\n0\t1\n1\t0\n").unwrap();
        let g = load_dataset(dir.path(), &LoadOptions::default()).unwrap();
        assert_eq!(g.edge_count(), 3);
        assert_eq!(g.adjacency().nnz(), 6);
    }

    #[test]
    fn truncated_features_name_byte_offset() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &triangle()).unwrap();
        fs::write(dir.path().join("features.bin"), [0u8; 10]).unwrap();
        let msg = load_dataset(dir.path(), &LoadOptions::default()).unwrap_err().to_string();
        assert!(msg.contains("features.bin") && msg.contains("byte offset 10"), "{msg}");
    }

    #[test]
    fn malformed_edge_names_line() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &triangle()).unwrap();
        fs::write(dir.path().join("edges.tsv"), "0\t1\n1 2\n").unwrap();
        let msg = load_dataset(dir.path(), &LoadOptions::default()).unwrap_err().to_string();
        assert!(msg.contains("edges.tsv:line 2"), "{msg}");
        fs::write(dir.path().join("edges.tsv"), "0\t1\n1\t7\n").unwrap();
        let msg = load_dataset(dir.path(), &LoadOptions::default()).unwrap_err().to_string();
        assert!(msg.contains("line 2") && msg.contains("out of range"), "{msg}");
    }

    #[test]
    fn label_class_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &triangle()).unwrap();
        fs::write(dir.path().join("labels.tsv"), "0\t5\n").unwrap();
        assert!(load_dataset(dir.path(), &LoadOptions::default()).is_err());
    }

    #[test]
    fn missing_file_is_reported() {
        let dir = tempfile::tempdir().unwrap();
        write_dataset(dir.path(), &triangle()).unwrap();
        fs::remove_file(dir.path().join("labels.tsv")).unwrap();
        let msg = load_dataset(dir.path(), &LoadOptions::default()).unwrap_err().to_string();
        assert!(msg.contains("labels.tsv"), "{msg}");
    }
}
