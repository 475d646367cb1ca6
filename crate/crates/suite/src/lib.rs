//! Reference implementations and file helpers for the acceptance run in
//! `tests/acceptance.rs`. Nothing here calls into the library under test.

use std::collections::{BTreeMap, BTreeSet};
use std::io;
use std::path::{Path, PathBuf};

/// Euclidean distance, summed in index order.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Minimum warping cost by enumerating every monotone path from the first
/// pair to the last with unit steps. Costs accumulate in path order.
pub fn brute_force_dtw(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    fn walk(a: &[Vec<f64>], b: &[Vec<f64>], i: usize, j: usize, acc: f64) -> f64 {
        let acc = acc + distance(&a[i], &b[j]);
        if i + 1 == a.len() && j + 1 == b.len() {
            return acc;
        }
        let mut best = f64::INFINITY;
        if i + 1 < a.len() && j + 1 < b.len() {
            best = best.min(walk(a, b, i + 1, j + 1, acc));
        }
        if i + 1 < a.len() {
            best = best.min(walk(a, b, i + 1, j, acc));
        }
        if j + 1 < b.len() {
            best = best.min(walk(a, b, i, j + 1, acc));
        }
        best
    }
    if a.is_empty() || b.is_empty() {
        return f64::INFINITY;
    }
    walk(a, b, 0, 0, 0.0)
}

pub type Snapshot = BTreeMap<PathBuf, Vec<u8>>;

/// Contents of every file below `root`, keyed by relative path.
pub fn snapshot(root: &Path) -> io::Result<Snapshot> {
    fn walk(root: &Path, dir: &Path, out: &mut Snapshot) -> io::Result<()> {
        for e in std::fs::read_dir(dir)? {
            let p = e?.path();
            if p.is_dir() {
                walk(root, &p, out)?;
            } else {
                let rel = p.strip_prefix(root).expect("below root").to_path_buf();
                out.insert(rel, std::fs::read(&p)?);
            }
        }
        Ok(())
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out)?;
    Ok(out)
}

/// First path (in sorted order) that is missing on one side or differs.
pub fn first_difference(a: &Snapshot, b: &Snapshot) -> Option<PathBuf> {
    let keys: BTreeSet<&PathBuf> = a.keys().chain(b.keys()).collect();
    keys.into_iter().find(|k| a.get(*k) != b.get(*k)).cloned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn brute_force_small_cases() {
        let a = vec![vec![0.0], vec![1.0], vec![2.0]];
        assert_eq!(brute_force_dtw(&a, &a), 0.0);
        let b = vec![vec![0.0], vec![2.0]];
        assert_eq!(brute_force_dtw(&a, &b), 1.0);
        assert_eq!(brute_force_dtw(&[vec![3.0, 4.0]], &[vec![0.0, 0.0]]), 5.0);
    }

    #[test]
    fn snapshot_diff() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::create_dir(dir.path().join("d")).unwrap();
        std::fs::write(dir.path().join("d/x"), "1").unwrap();
        let before = snapshot(dir.path()).unwrap();
        assert_eq!(first_difference(&before, &before), None);
        std::fs::write(dir.path().join("d/x"), "2").unwrap();
        let after = snapshot(dir.path()).unwrap();
        assert_eq!(first_difference(&before, &after), Some(PathBuf::from("d/x")));
    }
}
