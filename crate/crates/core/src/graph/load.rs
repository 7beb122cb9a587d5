//! Whitespace-separated edge lists (SNAP and KONECT layouts).

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use super::{Graph, GraphError};

/// Edge-list dialect.
#[derive(Clone, Debug)]
pub struct EdgeListFormat {
    /// A line whose first non-blank character is one of these is skipped.
    pub comment_prefixes: Vec<char>,
    /// Reject node tokens that are not unsigned integers.
    pub integer_ids: bool,
}

impl Default for EdgeListFormat {
    fn default() -> Self {
        Self {
            comment_prefixes: vec!['#', '%'],
            integer_ids: false,
        }
    }
}

/// What the loader saw and discarded.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LoadReport {
    pub data_lines: usize,
    pub comment_lines: usize,
    pub blank_lines: usize,
    pub self_loops: usize,
    pub duplicates: usize,
}

/// Reads an undirected edge list. The first two tokens of each data line are the
/// endpoints; further columns (weights, timestamps) are ignored. Self-loops are
/// dropped and repeated edges collapse to one, both counted in the report.
pub fn load_edge_list<R: BufRead>(
    reader: R,
    format: &EdgeListFormat,
) -> Result<(Graph, LoadReport), GraphError> {
    let mut report = LoadReport::default();
    let mut interned: HashMap<String, usize> = HashMap::new();
    let mut labels: Vec<String> = Vec::new();
    let mut seen: HashSet<(usize, usize)> = HashSet::new();
    let mut edges = Vec::new();

    let mut intern = |token: &str| -> usize {
        if let Some(&i) = interned.get(token) {
            return i;
        }
        let i = labels.len();
        labels.push(token.to_owned());
        interned.insert(token.to_owned(), i);
        i
    };

    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = lineno + 1;
        let trimmed = line.trim_start();
        if trimmed.is_empty() {
            report.blank_lines += 1;
            continue;
        }
        if trimmed
            .chars()
            .next()
            .is_some_and(|c| format.comment_prefixes.contains(&c))
        {
            report.comment_lines += 1;
            continue;
        }
        let mut tokens = trimmed.split_whitespace();
        let (Some(a), Some(b)) = (tokens.next(), tokens.next()) else {
            return Err(GraphError::Parse {
                line: lineno,
                found: trimmed.split_whitespace().count(),
            });
        };
        if format.integer_ids {
            for t in [a, b] {
                if t.parse::<u64>().is_err() {
                    return Err(GraphError::NonIntegerId {
                        line: lineno,
                        token: t.to_owned(),
                    });
                }
            }
        }
        report.data_lines += 1;
        let (u, v) = (intern(a), intern(b));
        if u == v {
            report.self_loops += 1;
            continue;
        }
        let key = (u.min(v), u.max(v));
        if seen.insert(key) {
            edges.push(key);
        } else {
            report.duplicates += 1;
        }
    }

    // Canonical index order: numeric when every label is an integer, else lexical.
    let mut order: Vec<usize> = (0..labels.len()).collect();
    let numeric: Option<Vec<u64>> = labels.iter().map(|l| l.parse().ok()).collect();
    match &numeric {
        Some(keys) => order.sort_by_key(|&i| keys[i]),
        None => order.sort_by(|&x, &y| labels[x].cmp(&labels[y])),
    }
    let mut rank = vec![0; labels.len()];
    for (r, &i) in order.iter().enumerate() {
        rank[i] = r;
    }
    let sorted_labels = order.iter().map(|&i| labels[i].clone()).collect();
    let edges = edges
        .into_iter()
        .map(|(u, v)| {
            let (u, v) = (rank[u], rank[v]);
            (u.min(v), u.max(v))
        })
        .collect();
    Ok((Graph::assemble(sorted_labels, edges), report))
}
