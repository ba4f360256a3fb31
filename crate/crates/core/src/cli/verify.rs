//! Joins two result dumps by vertex id and compares the values.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Clone, Debug, Default, PartialEq)]
pub struct VerifyReport {
    pub compared: u64,
    pub mismatches: u64,
    /// Ids present on one side only.
    pub missing: u64,
    pub max_abs_diff: f64,
    /// First differing vertex: `(id, got, expected)`.
    pub first: Option<(u64, String, String)>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.mismatches == 0 && self.missing == 0
    }
}

/// Reads `id<TAB>value` lines from a file or from every `part-*` file of a
/// directory.
pub fn read_results(path: &Path) -> Result<BTreeMap<u64, String>> {
    let mut files = Vec::new();
    if path.is_dir() {
        for e in fs::read_dir(path).map_err(Error::at(path))? {
            let p = e.map_err(Error::at(path))?.path();
            if p.file_name().and_then(|n| n.to_str()).is_some_and(|n| n.starts_with("part-")) {
                files.push(p);
            }
        }
        files.sort();
    } else {
        files.push(path.to_path_buf());
    }
    let mut out = BTreeMap::new();
    for f in files {
        let text = fs::read_to_string(&f).map_err(Error::at(&f))?;
        for (i, line) in text.lines().enumerate() {
            let bad = |msg: String| Error::Parse { line: i as u64 + 1, msg: format!("{}: {msg}", f.display()) };
            let (id, value) = line.split_once('\t').ok_or_else(|| bad("expected id<TAB>value".into()))?;
            let id: u64 = id.parse().map_err(|_| bad(format!("bad id `{id}`")))?;
            if out.insert(id, value.to_string()).is_some() {
                return Err(bad(format!("vertex {id} appears twice")));
            }
        }
    }
    Ok(out)
}

/// Numeric values match within `tol`; anything else must match exactly.
pub fn compare(got: &BTreeMap<u64, String>, want: &BTreeMap<u64, String>, tol: f64) -> VerifyReport {
    let mut r = VerifyReport::default();
    for (id, g) in got {
        let Some(w) = want.get(id) else {
            r.missing += 1;
            continue;
        };
        r.compared += 1;
        let same = match (g.parse::<f64>(), w.parse::<f64>()) {
            (Ok(a), Ok(b)) if a == b => true,
            (Ok(a), Ok(b)) => {
                let d = (a - b).abs();
                if d.is_finite() {
                    r.max_abs_diff = r.max_abs_diff.max(d);
                } else {
                    r.max_abs_diff = f64::INFINITY;
                }
                d <= tol
            }
            _ => g == w,
        };
        if !same {
            r.mismatches += 1;
            r.first.get_or_insert((*id, g.clone(), w.clone()));
        }
    }
    r.missing += want.keys().filter(|k| !got.contains_key(k)).count() as u64;
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn map(items: &[(u64, &str)]) -> BTreeMap<u64, String> {
        items.iter().map(|&(k, v)| (k, v.to_string())).collect()
    }

    #[test]
    fn identical_outputs_match() {
        let a = map(&[(1, "0.5"), (2, "inf"), (3, "7 00ff")]);
        let r = compare(&a, &a, 0.0);
        assert!(r.ok());
        assert_eq!(r.compared, 3);
    }

    #[test]
    fn one_perturbed_value_is_located() {
        let a = map(&[(1, "0.5"), (2, "0.25"), (3, "1")]);
        let b = map(&[(1, "0.5"), (2, "0.2500001"), (3, "1")]);
        let r = compare(&a, &b, 0.0);
        assert_eq!(r.mismatches, 1);
        assert_eq!(r.first.as_ref().unwrap().0, 2);
    }

    #[test]
    fn tolerance_sweep() {
        let a = map(&[(1, "1.0")]);
        let b = map(&[(1, "1.000001")]);
        for (tol, ok) in [(0.0, false), (1e-7, false), (1e-6 + 1e-12, true), (1.0, true)] {
            assert_eq!(compare(&a, &b, tol).ok(), ok, "tol {tol}");
        }
        assert!((compare(&a, &b, 0.0).max_abs_diff - 1e-6).abs() < 1e-12);
    }

    #[test]
    fn missing_ids_count() {
        let r = compare(&map(&[(1, "1")]), &map(&[(2, "1")]), 0.0);
        assert_eq!(r.missing, 2);
        assert!(!r.ok());
    }

    #[test]
    fn reads_part_directories() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("part-0"), "3\t1\n1\t2\n").unwrap();
        fs::write(dir.path().join("part-1"), "2\tinf\n").unwrap();
        fs::write(dir.path().join("stats.json"), "{}").unwrap();
        let m = read_results(dir.path()).unwrap();
        assert_eq!(m.len(), 3);
        assert_eq!(m[&2], "inf");
    }
}
