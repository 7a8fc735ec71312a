//! Plain-text datasets, train/validation/test splits, and a stochastic block
//! model generator.
//!
//! A dataset directory holds:
//!
//! * `meta.txt`: `n=<int>`, `C=<int>`, `features=<none|sparse|dense>` (and
//!   optionally `F=<int>` for the sparse feature dimension);
//! * `edges.txt`: `u v` per line;
//! * `labels.txt`: `node class` per line, unlabeled nodes absent;
//! * `features.txt`: sparse `node feature value` triplets, or one CSV row per
//!   node in dense mode.
//!
//! Ids are 0-based; `#` starts a comment line. Randomness comes from ChaCha8
//! seeded with a `u64`, which is portable across platforms.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{parse_edge_list, SparseGraph};
use crate::matrix::Dense;
use crate::priors::{FeatureMatrix, Labels};

pub type SplitRng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> SplitRng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureMode {
    None,
    Sparse,
    Dense,
}

impl FeatureMode {
    fn as_str(self) -> &'static str {
        match self {
            FeatureMode::None => "none",
            FeatureMode::Sparse => "sparse",
            FeatureMode::Dense => "dense",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub name: String,
    pub graph: SparseGraph,
    pub features: Option<FeatureMatrix>,
    pub feature_mode: FeatureMode,
    pub labels: Labels,
    pub classes: usize,
}

impl Dataset {
    pub fn node_count(&self) -> usize {
        self.graph.node_count()
    }

    /// Labeled nodes of each class, ascending.
    pub fn nodes_by_class(&self) -> Vec<Vec<usize>> {
        let mut by = vec![Vec::new(); self.classes];
        for (v, y) in self.labels.iter().enumerate() {
            if let Some(y) = y {
                by[*y].push(v);
            }
        }
        by
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Non-comment, non-blank lines with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

struct Meta {
    n: usize,
    classes: usize,
    mode: FeatureMode,
    dim: Option<usize>,
}

fn parse_meta(path: &Path) -> Result<Meta> {
    let text = read(path)?;
    let (mut n, mut classes, mut mode, mut dim) = (None, None, FeatureMode::None, None);
    for (line, l) in content_lines(&text) {
        let (key, value) = l
            .split_once('=')
            .ok_or_else(|| Error::parse(path, line, "expected key=value"))?;
        let value = value.trim();
        let int = || {
            value
                .parse::<usize>()
                .map_err(|e| Error::parse(path, line, format!("bad integer: {e}")))
        };
        match key.trim() {
            "n" => n = Some(int()?),
            "C" => classes = Some(int()?),
            "F" => dim = Some(int()?),
            "features" => {
                mode = match value {
                    "none" => FeatureMode::None,
                    "sparse" => FeatureMode::Sparse,
                    "dense" => FeatureMode::Dense,
                    other => {
                        return Err(Error::parse(
                            path,
                            line,
                            format!("unknown feature mode {other:?}"),
                        ))
                    }
                }
            }
            other => return Err(Error::parse(path, line, format!("unknown key {other:?}"))),
        }
    }
    let n = n.ok_or_else(|| Error::parse(path, 0, "missing n"))?;
    let classes = classes.ok_or_else(|| Error::parse(path, 0, "missing C"))?;
    if classes < 2 {
        return Err(Error::parse(
            path,
            0,
            format!("C must be at least 2, got {classes}"),
        ));
    }
    Ok(Meta {
        n,
        classes,
        mode,
        dim,
    })
}

fn parse_labels(path: &Path, n: usize, classes: usize) -> Result<Labels> {
    let text = read(path)?;
    let mut labels = vec![None; n];
    for (line, l) in content_lines(&text) {
        let mut it = l.split_whitespace();
        let mut next = |what: &str| -> Result<usize> {
            it.next()
                .ok_or_else(|| Error::parse(path, line, format!("missing {what}")))?
                .parse::<usize>()
                .map_err(|e| Error::parse(path, line, format!("bad {what}: {e}")))
        };
        let v = next("node")?;
        let y = next("class")?;
        if v >= n {
            return Err(Error::parse(
                path,
                line,
                format!("node {v} outside [0, {n})"),
            ));
        }
        if y >= classes {
            return Err(Error::parse(
                path,
                line,
                format!("class {y} outside [0, {classes})"),
            ));
        }
        match labels[v] {
            Some(prev) if prev != y => {
                return Err(Error::parse(
                    path,
                    line,
                    format!("node {v} relabeled {prev} -> {y}"),
                ))
            }
            _ => labels[v] = Some(y),
        }
    }
    Ok(labels)
}

fn parse_sparse_features(path: &Path, n: usize, dim: Option<usize>) -> Result<FeatureMatrix> {
    let text = read(path)?;
    let mut rows = vec![Vec::new(); n];
    let mut max_f = 0;
    for (line, l) in content_lines(&text) {
        let toks: Vec<_> = l.split_whitespace().collect();
        if toks.len() != 3 {
            return Err(Error::parse(path, line, "expected `node feature value`"));
        }
        let v: usize = toks[0]
            .parse()
            .map_err(|e| Error::parse(path, line, format!("bad node: {e}")))?;
        let f: usize = toks[1]
            .parse()
            .map_err(|e| Error::parse(path, line, format!("bad feature index: {e}")))?;
        let x: f64 = toks[2]
            .parse()
            .map_err(|e| Error::parse(path, line, format!("bad value: {e}")))?;
        if v >= n {
            return Err(Error::parse(
                path,
                line,
                format!("node {v} outside [0, {n})"),
            ));
        }
        if !x.is_finite() {
            return Err(Error::parse(path, line, "value is not finite"));
        }
        if let Some(d) = dim {
            if f >= d {
                return Err(Error::parse(
                    path,
                    line,
                    format!("feature {f} outside [0, {d})"),
                ));
            }
        }
        max_f = max_f.max(f + 1);
        rows[v].push((f, x));
    }
    FeatureMatrix::new(dim.unwrap_or(max_f), rows)
}

fn parse_dense_features(path: &Path, n: usize) -> Result<FeatureMatrix> {
    let text = read(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (line, l) in content_lines(&text) {
        let row = l
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::parse(path, line, format!("bad value: {e}")))
            })
            .collect::<Result<Vec<_>>>()?;
        if let Some(first) = rows.first() {
            if first.len() != row.len() {
                return Err(Error::parse(
                    path,
                    line,
                    format!("row has {} columns, expected {}", row.len(), first.len()),
                ));
            }
        }
        if row.iter().any(|x| !x.is_finite()) {
            return Err(Error::parse(path, line, "value is not finite"));
        }
        rows.push(row);
    }
    if rows.len() != n {
        return Err(Error::parse(
            path,
            0,
            format!("{} feature rows for {n} nodes", rows.len()),
        ));
    }
    Ok(FeatureMatrix::from_dense(&Dense::from_rows(&rows)))
}

/// Loads a dataset directory; the name is the directory's file name.
pub fn load_dataset(dir: &Path) -> Result<Dataset> {
    let meta = parse_meta(&dir.join("meta.txt"))?;
    let edges_path = dir.join("edges.txt");
    let parsed = parse_edge_list(&read(&edges_path)?, &edges_path)?;
    for &((u, v), line) in &parsed {
        if u >= meta.n || v >= meta.n {
            return Err(Error::parse(
                &edges_path,
                line,
                format!("edge ({u}, {v}) references a node outside [0, {})", meta.n),
            ));
        }
    }
    let pairs: Vec<_> = parsed.into_iter().map(|(e, _)| e).collect();
    let graph = SparseGraph::build(&pairs, meta.n)?;
    let labels = parse_labels(&dir.join("labels.txt"), meta.n, meta.classes)?;
    let features = match meta.mode {
        FeatureMode::None => None,
        FeatureMode::Sparse => Some(parse_sparse_features(
            &dir.join("features.txt"),
            meta.n,
            meta.dim,
        )?),
        FeatureMode::Dense => Some(parse_dense_features(&dir.join("features.txt"), meta.n)?),
    };
    let name = dir
        .file_name()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "dataset".into());
    Ok(Dataset {
        name,
        graph,
        features,
        feature_mode: meta.mode,
        labels,
        classes: meta.classes,
    })
}

/// Writes the canonical text form. Loading the result and writing it again
/// produces identical bytes.
pub fn write_dataset(ds: &Dataset, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let write = |name: &str, body: String| {
        let p = dir.join(name);
        std::fs::write(&p, body).map_err(|e| Error::io(&p, e))
    };

    let mode = match (&ds.features, ds.feature_mode) {
        (None, _) => FeatureMode::None,
        (Some(_), FeatureMode::None) => FeatureMode::Sparse,
        (Some(_), m) => m,
    };
    let mut meta = format!(
        "n={}\nC={}\nfeatures={}\n",
        ds.node_count(),
        ds.classes,
        mode.as_str()
    );
    if let (Some(x), FeatureMode::Sparse) = (&ds.features, mode) {
        let inferred = (0..x.node_count())
            .flat_map(|v| x.row(v).iter().map(|&(f, _)| f + 1))
            .max()
            .unwrap_or(0);
        if inferred != x.dim() {
            let _ = writeln!(meta, "F={}", x.dim());
        }
    }
    write("meta.txt", meta)?;

    let mut edges = String::new();
    for &(u, v) in ds.graph.edges() {
        let _ = writeln!(edges, "{u} {v}");
    }
    write("edges.txt", edges)?;

    let mut labels = String::new();
    for (v, y) in ds.labels.iter().enumerate() {
        if let Some(y) = y {
            let _ = writeln!(labels, "{v} {y}");
        }
    }
    write("labels.txt", labels)?;

    if let Some(x) = &ds.features {
        let mut body = String::new();
        match mode {
            FeatureMode::Dense => {
                for v in 0..x.node_count() {
                    let mut row = vec![0.0; x.dim()];
                    for &(f, val) in x.row(v) {
                        row[f] = val;
                    }
                    let cells: Vec<_> = row.iter().map(|x| format!("{x:?}")).collect();
                    let _ = writeln!(body, "{}", cells.join(","));
                }
            }
            _ => {
                for v in 0..x.node_count() {
                    for &(f, val) in x.row(v) {
                        let _ = writeln!(body, "{v} {f} {val:?}");
                    }
                }
            }
        }
        write("features.txt", body)?;
    }
    Ok(())
}

/// Disjoint node sets for training, validation and testing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Split {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
    pub seed: Option<u64>,
}

impl Split {
    fn validate(&self, n: usize) -> Result<()> {
        let mut seen = BTreeSet::new();
        for &v in self.train.iter().chain(&self.val).chain(&self.test) {
            if v >= n {
                return Err(Error::Input(format!("split node {v} outside [0, {n})")));
            }
            if !seen.insert(v) {
                return Err(Error::Input(format!("node {v} appears in two splits")));
            }
        }
        if self.train.is_empty() {
            return Err(Error::Input("training split is empty".into()));
        }
        Ok(())
    }
}

/// How the test set is chosen.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TestSelection {
    /// A fixed, externally supplied test set (kept out of train and validation).
    Fixed(Vec<usize>),
    /// Sample this many from the labeled nodes left after train and validation.
    Count(usize),
    /// Every labeled node not used for train or validation.
    Remaining,
}

fn shuffle(v: &mut [usize], rng: &mut SplitRng) {
    // Fisher-Yates, written out so the draw sequence is fixed by this code
    for i in (1..v.len()).rev() {
        let j = rng.gen_range(0..=i);
        v.swap(i, j);
    }
}

/// Draws `per_class` training nodes from each class and `val_total` validation
/// nodes from the remaining labeled nodes, uniformly without replacement.
pub fn sample_split(
    ds: &Dataset,
    per_class: usize,
    val_total: usize,
    test: &TestSelection,
    seed: u64,
) -> Result<Split> {
    let mut rng = rng_from_seed(seed);
    let fixed: BTreeSet<usize> = match test {
        TestSelection::Fixed(t) => t.iter().copied().collect(),
        _ => BTreeSet::new(),
    };
    let mut train = Vec::with_capacity(per_class * ds.classes);
    for (class, nodes) in ds.nodes_by_class().into_iter().enumerate() {
        let mut pool: Vec<_> = nodes.into_iter().filter(|v| !fixed.contains(v)).collect();
        if pool.len() < per_class {
            return Err(Error::Input(format!(
                "class {class} has {} eligible labeled nodes, {per_class} requested",
                pool.len()
            )));
        }
        shuffle(&mut pool, &mut rng);
        train.extend_from_slice(&pool[..per_class]);
    }
    let in_train: BTreeSet<usize> = train.iter().copied().collect();
    let mut rest: Vec<usize> = (0..ds.node_count())
        .filter(|v| ds.labels[*v].is_some() && !in_train.contains(v) && !fixed.contains(v))
        .collect();
    if rest.len() < val_total {
        return Err(Error::Input(format!(
            "{} labeled nodes left for validation, {val_total} requested",
            rest.len()
        )));
    }
    shuffle(&mut rest, &mut rng);
    let val = rest[..val_total].to_vec();
    let remaining = &rest[val_total..];
    let test = match test {
        TestSelection::Fixed(t) => t.clone(),
        TestSelection::Remaining => remaining.to_vec(),
        TestSelection::Count(k) => {
            if remaining.len() < *k {
                return Err(Error::Input(format!(
                    "{} labeled nodes left for testing, {k} requested",
                    remaining.len()
                )));
            }
            remaining[..*k].to_vec()
        }
    };
    let split = Split {
        train,
        val,
        test,
        seed: Some(seed),
    };
    split.validate(ds.node_count())?;
    Ok(split)
}

/// Reads `node split` lines with split ∈ {train, val, test}.
pub fn read_split_file(path: &Path, n: usize) -> Result<Split> {
    let text = read(path)?;
    let mut split = Split {
        train: vec![],
        val: vec![],
        test: vec![],
        seed: None,
    };
    for (line, l) in content_lines(&text) {
        let mut it = l.split_whitespace();
        let v: usize = it
            .next()
            .ok_or_else(|| Error::parse(path, line, "missing node"))?
            .parse()
            .map_err(|e| Error::parse(path, line, format!("bad node: {e}")))?;
        if v >= n {
            return Err(Error::parse(
                path,
                line,
                format!("node {v} outside [0, {n})"),
            ));
        }
        match it.next() {
            Some("train") => split.train.push(v),
            Some("val") => split.val.push(v),
            Some("test") => split.test.push(v),
            other => return Err(Error::parse(path, line, format!("unknown split {other:?}"))),
        }
    }
    Ok(split)
}

pub fn write_split_file(split: &Split, path: &Path) -> Result<()> {
    let mut s = String::new();
    for (name, nodes) in [
        ("train", &split.train),
        ("val", &split.val),
        ("test", &split.test),
    ] {
        for v in nodes {
            let _ = writeln!(s, "{v} {name}");
        }
    }
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

/// Community of node `v` when `n` nodes are cut into `classes` contiguous,
/// near-equal blocks.
pub fn sbm_block(v: usize, n: usize, classes: usize) -> usize {
    v * classes / n
}

/// Stochastic block model: `classes` near-equal communities, each pair
/// `u < v` linked with probability `p_in` inside a community and `p_out`
/// across. Labels are the community ids; there are no features.
pub fn gen_sbm(n: usize, classes: usize, p_in: f64, p_out: f64, seed: u64) -> Result<Dataset> {
    if classes < 2 || classes > n {
        return Err(Error::Input(format!(
            "need 2 ≤ C ≤ n, got C={classes}, n={n}"
        )));
    }
    if !(0.0..=1.0).contains(&p_in) || !(0.0..=1.0).contains(&p_out) || p_out > p_in {
        return Err(Error::Input(format!(
            "need 0 ≤ p_out ≤ p_in ≤ 1, got p_in={p_in}, p_out={p_out}"
        )));
    }
    let mut rng = rng_from_seed(seed);
    let mut edges = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let p = if sbm_block(u, n, classes) == sbm_block(v, n, classes) {
                p_in
            } else {
                p_out
            };
            // one draw per pair regardless of p keeps the stream aligned
            let r: f64 = rng.gen();
            if r < p {
                edges.push((u, v));
            }
        }
    }
    Ok(Dataset {
        name: format!("sbm-n{n}-c{classes}-s{seed}"),
        graph: SparseGraph::build(&edges, n)?,
        features: None,
        feature_mode: FeatureMode::None,
        labels: (0..n).map(|v| Some(sbm_block(v, n, classes))).collect(),
        classes,
    })
}

/// Fraction of edges whose endpoints share a label, over edges with both
/// endpoints labeled. `None` if there are no such edges.
pub fn homophily(ds: &Dataset) -> Option<f64> {
    let (mut same, mut total) = (0usize, 0usize);
    for &(u, v) in ds.graph.edges() {
        if let (Some(a), Some(b)) = (ds.labels[u], ds.labels[v]) {
            total += 1;
            if a == b {
                same += 1;
            }
        }
    }
    (total > 0).then(|| same as f64 / total as f64)
}
