//! The shared store: a directory every worker can read, holding the
//! normalized input graph and its manifest.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;

pub const GRAPH_FILE: &str = "graph.txt";
pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecodeRecord {
    pub workers: usize,
    pub scratch: PathBuf,
    pub wall_ms: f64,
    pub load_ms: f64,
    pub messages: u64,
    pub supersteps: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub vertices: u64,
    /// Adjacency list items; an undirected edge counts twice.
    pub arcs: u64,
    pub directed: bool,
    pub weighted: bool,
    pub recode: Option<RecodeRecord>,
}

impl Manifest {
    pub fn load(store: &Path) -> Result<Self> {
        let path = store.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).map_err(Error::at(&path))?;
        serde_json::from_str(&text).map_err(|e| Error::Corruption(format!("{}: {e}", path.display())))
    }

    pub fn save(&self, store: &Path) -> Result<()> {
        let path = store.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&path, text).map_err(Error::at(&path))
    }
}

/// Validates `input` and copies it, normalized, into `store`.
pub fn put(input: &Path, store: &Path, directed: bool) -> Result<Manifest> {
    let g = Graph::read_text(input, directed)?;
    if !directed && !g.is_symmetric() {
        return Err(Error::Precondition("undirected input must list every edge in both adjacency lists".into()));
    }
    fs::create_dir_all(store).map_err(Error::at(store))?;
    g.write_text(&store.join(GRAPH_FILE))?;
    let m =
        Manifest { vertices: g.num_vertices(), arcs: g.num_arcs(), directed, weighted: g.is_weighted(), recode: None };
    m.save(store)?;
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::recode_example;
    use crate::model::VertexId;

    #[test]
    fn manifest_counts_the_example() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        recode_example().write_text(&input).unwrap();
        let m = put(&input, &dir.path().join("store"), true).unwrap();
        assert_eq!(m.vertices, 12);
        assert_eq!(m.arcs, 20);
        assert_eq!(Manifest::load(&dir.path().join("store")).unwrap(), m);
    }

    #[test]
    fn rejects_bad_inputs() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("in.txt");
        let store = dir.path().join("store");
        fs::write(&input, "1\t0\n1\t0\n").unwrap();
        assert!(matches!(put(&input, &store, true), Err(Error::DuplicateVertex(VertexId(1)))));
        fs::write(&input, "1\t0\n2\n").unwrap();
        assert!(matches!(put(&input, &store, true), Err(Error::Parse { line: 2, .. })));
        fs::write(&input, "1\t1 2\n2\t0\n").unwrap();
        assert!(matches!(put(&input, &store, false), Err(Error::Precondition(_))));
        assert!(put(&input, &store, true).is_ok());
    }
}
