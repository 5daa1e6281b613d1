//! Lexical project reference index: which files mention which other files by
//! basename or stem.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use aho_corasick::{AhoCorasick, MatchKind};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::screener::{is_binary, list_files};

/// Longest snippet kept for a reference site.
pub const SITE_SNIPPET_MAX: usize = 240;
/// Lines of surrounding text kept on each side of a reference site.
pub const SITE_CONTEXT_LINES: usize = 2;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeSite {
    /// 1-based line in the referencing file.
    pub line: usize,
    /// The referencing line, shortened around the match when very long.
    pub snippet: String,
    /// Nearby lines, for the backend.
    pub context: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceEdge {
    pub from: String,
    pub to: String,
    pub sites: Vec<EdgeSite>,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ReferenceGraph {
    pub nodes: Vec<String>,
    /// Sorted by `(from, to)`.
    pub edges: Vec<ReferenceEdge>,
    #[serde(skip)]
    pub warnings: Vec<String>,
}

impl ReferenceGraph {
    /// Edges pointing at `file`.
    pub fn referencing<'a>(&'a self, file: &'a str) -> impl Iterator<Item = &'a ReferenceEdge> + 'a {
        self.edges.iter().filter(move |e| e.to == file)
    }

    pub fn contains(&self, file: &str) -> bool {
        self.nodes.binary_search_by(|n| n.as_str().cmp(file)).is_ok()
    }

    /// Compact adjacency list: referencing file to referenced files.
    pub fn adjacency(&self) -> BTreeMap<&str, Vec<&str>> {
        let mut adj: BTreeMap<&str, Vec<&str>> = BTreeMap::new();
        for e in &self.edges {
            adj.entry(e.from.as_str()).or_default().push(e.to.as_str());
        }
        adj
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("graph serializes")
    }
}

pub fn basename(path: &str) -> &str {
    path.rsplit('/').next().unwrap_or(path)
}

/// Tokens by which `path` can be referenced: its basename, plus its stem
/// when the stem differs and is at least `min_stem_len` characters. A
/// basename without an extension is itself subject to `min_stem_len`.
pub fn reference_tokens(path: &str, min_stem_len: usize) -> Vec<String> {
    let base = basename(path);
    let mut tokens = Vec::new();
    match base.rfind('.') {
        Some(dot) if dot > 0 => {
            tokens.push(base.to_string());
            let stem = &base[..dot];
            if stem.chars().count() >= min_stem_len {
                tokens.push(stem.to_string());
            }
        }
        Some(_) => tokens.push(base.to_string()),
        None => {
            if base.chars().count() >= min_stem_len {
                tokens.push(base.to_string());
            }
        }
    }
    tokens
}

pub(crate) fn is_word_byte(b: u8) -> bool {
    b.is_ascii_alphanumeric() || b == b'_'
}

/// `bytes[start..end]` is not embedded in a longer identifier-like run.
pub fn token_boundary(bytes: &[u8], start: usize, end: usize) -> bool {
    let before = start == 0 || !is_word_byte(bytes[start - 1]);
    let after = end == bytes.len() || !is_word_byte(bytes[end]);
    before && after
}

fn line_starts(bytes: &[u8]) -> Vec<usize> {
    std::iter::once(0)
        .chain(bytes.iter().enumerate().filter(|(_, b)| **b == b'\n').map(|(i, _)| i + 1))
        .collect()
}

fn line_range(bytes: &[u8], starts: &[usize], idx: usize) -> (usize, usize) {
    let start = starts[idx];
    let mut end = starts.get(idx + 1).map_or(bytes.len(), |s| s - 1);
    if end > start && bytes[end - 1] == b'\r' {
        end -= 1;
    }
    (start, end)
}

fn site_snippet(line: &[u8], at: usize, len: usize) -> String {
    if line.len() <= SITE_SNIPPET_MAX {
        return String::from_utf8_lossy(line).trim().to_string();
    }
    let pad = SITE_SNIPPET_MAX.saturating_sub(len) / 2;
    let from = at.saturating_sub(pad);
    let to = (at + len + pad).min(line.len());
    String::from_utf8_lossy(&line[from..to]).trim().to_string()
}

fn site_context(bytes: &[u8], starts: &[usize], idx: usize) -> String {
    let first = idx.saturating_sub(SITE_CONTEXT_LINES);
    let last = (idx + SITE_CONTEXT_LINES).min(starts.len() - 1);
    let from = starts[first];
    let (_, to) = line_range(bytes, starts, last);
    let text = &bytes[from..to.max(from)];
    let text = if text.len() > 4 * SITE_SNIPPET_MAX {
        &text[..4 * SITE_SNIPPET_MAX]
    } else {
        text
    };
    String::from_utf8_lossy(text).into_owned()
}

/// Build the reference index over every text file under `root`. Binary files
/// and files above `max_file_bytes` are not nodes.
pub fn build_reference_index(root: &Path, max_file_bytes: u64, min_stem_len: usize) -> Result<ReferenceGraph> {
    let listing = list_files(root, max_file_bytes)?;
    let mut warnings = listing.warnings;
    let loaded: Vec<(String, std::result::Result<Vec<u8>, String>)> = listing
        .files
        .par_iter()
        .map(|f| {
            let bytes = std::fs::read(&f.abs_path).map_err(|e| Error::io(&f.abs_path, e).to_string());
            (f.rel_path.clone(), bytes)
        })
        .collect();
    let mut files = Vec::with_capacity(loaded.len());
    for (rel, bytes) in loaded {
        match bytes {
            Ok(b) if !is_binary(&b) => files.push((rel, b)),
            Ok(_) => {}
            Err(e) => warnings.push(e),
        }
    }
    files.sort_by(|a, b| a.0.cmp(&b.0));
    let mut graph = index_files(&files, min_stem_len);
    graph.warnings = warnings;
    Ok(graph)
}

/// Index in-memory files given as `(repo-relative path, bytes)`.
pub fn index_files(files: &[(String, Vec<u8>)], min_stem_len: usize) -> ReferenceGraph {
    let mut nodes: Vec<String> = files.iter().map(|(p, _)| p.clone()).collect();
    nodes.sort();
    nodes.dedup();

    let mut targets: HashMap<String, Vec<usize>> = HashMap::new();
    for (idx, node) in nodes.iter().enumerate() {
        for token in reference_tokens(node, min_stem_len) {
            targets.entry(token).or_default().push(idx);
        }
    }
    let mut patterns: Vec<String> = targets.keys().cloned().collect();
    patterns.sort();
    if patterns.is_empty() {
        return ReferenceGraph {
            nodes,
            ..Default::default()
        };
    }
    let ac = AhoCorasick::builder()
        .match_kind(MatchKind::Standard)
        .build(&patterns)
        .expect("literal patterns compile");

    let node_index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
    let mut edges: Vec<ReferenceEdge> = files
        .par_iter()
        .flat_map_iter(|(from, bytes)| {
            let from_idx = node_index[from.as_str()];
            let starts = line_starts(bytes);
            // target -> line index -> first match (offset, len) on that line
            let mut hits: BTreeMap<usize, BTreeMap<usize, (usize, usize)>> = BTreeMap::new();
            for m in ac.find_overlapping_iter(bytes.as_slice()) {
                if !token_boundary(bytes, m.start(), m.end()) {
                    continue;
                }
                let line_idx = starts.partition_point(|&s| s <= m.start()) - 1;
                for &to in &targets[&patterns[m.pattern().as_usize()]] {
                    if to != from_idx {
                        hits.entry(to)
                            .or_default()
                            .entry(line_idx)
                            .or_insert((m.start(), m.len()));
                    }
                }
            }
            hits.into_iter()
                .map(|(to, lines)| {
                    let sites = lines
                        .into_iter()
                        .map(|(idx, (at, len))| {
                            let (ls, le) = line_range(bytes, &starts, idx);
                            EdgeSite {
                                line: idx + 1,
                                snippet: site_snippet(&bytes[ls..le.max(ls)], at - ls, len),
                                context: site_context(bytes, &starts, idx),
                            }
                        })
                        .collect();
                    ReferenceEdge {
                        from: from.clone(),
                        to: nodes[to].clone(),
                        sites,
                    }
                })
                .collect::<Vec<_>>()
        })
        .collect();
    edges.sort_by(|a, b| (&a.from, &a.to).cmp(&(&b.from, &b.to)));
    ReferenceGraph {
        nodes,
        edges,
        warnings: Vec::new(),
    }
}

/// All `(from, to, line)` triples of a graph, for comparisons.
pub fn edge_lines(graph: &ReferenceGraph) -> BTreeSet<(String, String, usize)> {
    graph
        .edges
        .iter()
        .flat_map(|e| e.sites.iter().map(move |s| (e.from.clone(), e.to.clone(), s.line)))
        .collect()
}
