//! Simple-hypergraph data structure, canonicalization, derived structures,
//! text I/O, and bipartite (paper/author) ingestion.
//!
//! Nodes are dense integers `0..n-1`. Hyperedges are strictly ascending
//! sequences of at least two in-range node ids, stored deduplicated in
//! lexicographic order, so iteration is deterministic and equality is
//! structural. External id spaces are remapped on ingestion and the mapping
//! is returned alongside.

use std::collections::HashMap;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// A simple hypergraph: no repeated nodes within a hyperedge, no self-loops,
/// no duplicate hyperedges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Hypergraph {
    n: usize,
    edges: Vec<Vec<usize>>,
    m_max: usize,
}

/// One paper of a bipartite co-authorship file: a paper id and the authors
/// incident to it.
#[derive(Debug, Clone)]
pub struct BipartiteRecord {
    pub paper_id: String,
    pub author_ids: Vec<String>,
}

/// Outcome of parsing a hyperedge text file.
#[derive(Debug, Clone)]
pub struct ParsedHypergraph {
    pub hypergraph: Hypergraph,
    /// External id of each internal node, ascending in external id.
    pub external_ids: Vec<u64>,
    /// Duplicate hyperedge lines collapsed by set semantics.
    pub duplicates: usize,
}

/// Outcome of bipartite ingestion.
#[derive(Debug, Clone)]
pub struct IngestedHypergraph {
    pub hypergraph: Hypergraph,
    /// Author external id per internal node, in first-appearance order.
    pub author_ids: Vec<String>,
    /// Papers dropped because their author set exceeded the size cap.
    pub dropped_oversize: usize,
    /// Papers dropped because they had a single distinct author.
    pub dropped_single: usize,
    /// Papers whose author set duplicated an earlier one.
    pub duplicates: usize,
}

/// Sort, deduplicate and bounds-check a node id sequence into a canonical
/// hyperedge. At least two distinct ids must survive.
pub fn canonical_hyperedge(nodes: &[usize], n: usize) -> Result<Vec<usize>> {
    for &id in nodes {
        if id >= n {
            return Err(Error::OutOfRange { id, n });
        }
    }
    let mut edge = nodes.to_vec();
    edge.sort_unstable();
    edge.dedup();
    if edge.len() < 2 {
        return Err(Error::TooSmall { got: edge.len() });
    }
    Ok(edge)
}

impl Hypergraph {
    /// Build from raw node id sequences. Each edge is canonicalized;
    /// duplicates are collapsed (the count is discarded here — use
    /// [`Hypergraph::from_edges_counted`] to observe it).
    pub fn new(n: usize, edges: Vec<Vec<usize>>) -> Result<Self> {
        Ok(Self::from_edges_counted(n, edges)?.0)
    }

    /// Build from raw node id sequences, reporting how many duplicate edges
    /// were collapsed.
    pub fn from_edges_counted(n: usize, edges: Vec<Vec<usize>>) -> Result<(Self, usize)> {
        let mut canonical: Vec<Vec<usize>> = Vec::with_capacity(edges.len());
        for edge in &edges {
            canonical.push(canonical_hyperedge(edge, n)?);
        }
        canonical.sort_unstable();
        let before = canonical.len();
        canonical.dedup();
        let duplicates = before - canonical.len();
        let m_max = canonical.iter().map(|e| e.len()).max().unwrap_or(2);
        Ok((
            Self {
                n,
                edges: canonical,
                m_max,
            },
            duplicates,
        ))
    }

    /// An edgeless hypergraph on `n` nodes.
    pub fn empty(n: usize) -> Self {
        Self {
            n,
            edges: Vec::new(),
            m_max: 2,
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[Vec<usize>] {
        &self.edges
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Largest hyperedge size present (2 when edgeless), or a configured cap.
    pub fn m_max(&self) -> usize {
        self.m_max
    }

    /// Raise the size cap beyond the largest observed hyperedge (the model
    /// may account for absent sizes).
    pub fn with_m_max(mut self, m_max: usize) -> Self {
        assert!(m_max >= self.m_max);
        self.m_max = m_max;
        self
    }

    pub fn contains_edge(&self, edge: &[usize]) -> bool {
        self.edges.binary_search_by(|e| e.as_slice().cmp(edge)).is_ok()
    }

    /// Number of hyperedges of each size `0..=m_max`.
    pub fn size_histogram(&self) -> Vec<usize> {
        let mut hist = vec![0usize; self.m_max + 1];
        for e in &self.edges {
            hist[e.len()] += 1;
        }
        hist
    }

    /// `d_i` = number of hyperedges containing node `i`.
    pub fn degree_sequence(&self) -> Vec<usize> {
        let mut deg = vec![0usize; self.n];
        for e in &self.edges {
            for &i in e {
                deg[i] += 1;
            }
        }
        deg
    }

    /// Edge indices incident to each node.
    pub fn incidence_lists(&self) -> Vec<Vec<usize>> {
        let mut lists = vec![Vec::new(); self.n];
        for (idx, e) in self.edges.iter().enumerate() {
            for &i in e {
                lists[i].push(idx);
            }
        }
        lists
    }

    /// 0/1 adjacency of the size-2 slice; hyperedges of size >= 3 ignored.
    pub fn size2_adjacency(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            if e.len() == 2 {
                a[(e[0], e[1])] = 1.0;
                a[(e[1], e[0])] = 1.0;
            }
        }
        a
    }

    /// Co-occurrence matrix: `A_ij` = number of hyperedges containing both
    /// `i` and `j` (zero diagonal).
    pub fn cooccurrence(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.n, self.n);
        for e in &self.edges {
            for (k, &i) in e.iter().enumerate() {
                for &j in &e[k + 1..] {
                    a[(i, j)] += 1.0;
                    a[(j, i)] += 1.0;
                }
            }
        }
        a
    }

    /// Largest connected component under shared-node incidence, with nodes
    /// relabeled `0..n'-1` in ascending original-id order. Returns the new
    /// hypergraph and the original id of each new node. Ties between
    /// equal-size components go to the one containing the smallest original
    /// id. Isolated nodes are singleton components.
    pub fn largest_component(&self) -> (Hypergraph, Vec<usize>) {
        let mut parent: Vec<usize> = (0..self.n).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for e in &self.edges {
            let root = find(&mut parent, e[0]);
            for &i in &e[1..] {
                let r = find(&mut parent, i);
                parent[r] = root;
            }
        }
        let mut size: HashMap<usize, usize> = HashMap::new();
        for i in 0..self.n {
            let r = find(&mut parent, i);
            *size.entry(r).or_insert(0) += 1;
        }
        // Largest component; ties to the smallest contained id (roots are
        // compared by the smallest member id, which node order gives us).
        let mut smallest_member: HashMap<usize, usize> = HashMap::new();
        for i in 0..self.n {
            let r = find(&mut parent, i);
            smallest_member.entry(r).or_insert(i);
        }
        let best_root = (0..self.n)
            .map(|i| find(&mut parent, i))
            .max_by(|&a, &b| {
                size[&a]
                    .cmp(&size[&b])
                    .then(smallest_member[&b].cmp(&smallest_member[&a]))
            })
            .unwrap_or(0);
        let kept: Vec<usize> = (0..self.n)
            .filter(|&i| find(&mut parent, i) == best_root)
            .collect();
        let remap: HashMap<usize, usize> = kept.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let edges: Vec<Vec<usize>> = self
            .edges
            .iter()
            .filter(|e| remap.contains_key(&e[0]))
            .map(|e| e.iter().map(|i| remap[i]).collect())
            .collect();
        let h = Hypergraph::new(kept.len(), edges).expect("component edges stay canonical");
        (h, kept)
    }

    /// Drop degree-zero nodes, relabeling the rest in ascending order.
    /// Returns the reduced hypergraph and the original id of each new node.
    pub fn without_isolated(&self) -> (Hypergraph, Vec<usize>) {
        let deg = self.degree_sequence();
        let kept: Vec<usize> = (0..self.n).filter(|&i| deg[i] > 0).collect();
        let remap: HashMap<usize, usize> = kept.iter().enumerate().map(|(new, &old)| (old, new)).collect();
        let edges = self
            .edges
            .iter()
            .map(|e| e.iter().map(|i| remap[i]).collect())
            .collect();
        let h = Hypergraph::new(kept.len(), edges).expect("edges stay canonical");
        (h, kept)
    }
}

/// Parse the hyperedge text format: one hyperedge per line, non-negative
/// integer ids separated by spaces or tabs, `#` starts a comment line, blank
/// lines ignored. External ids are compacted to `0..n-1` in ascending order.
pub fn parse_hyperedge_text(text: &str) -> Result<ParsedHypergraph> {
    let mut raw_edges: Vec<Vec<u64>> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut ids = Vec::new();
        for token in line.split_whitespace() {
            let id: u64 = token.parse().map_err(|_| Error::Parse {
                line: lineno + 1,
                msg: format!("invalid node id {token:?}"),
            })?;
            ids.push(id);
        }
        ids.sort_unstable();
        ids.dedup();
        if ids.len() < 2 {
            return Err(Error::Parse {
                line: lineno + 1,
                msg: format!("hyperedge needs >= 2 distinct nodes, got {}", ids.len()),
            });
        }
        raw_edges.push(ids);
    }
    let mut external_ids: Vec<u64> = raw_edges.iter().flatten().copied().collect();
    external_ids.sort_unstable();
    external_ids.dedup();
    let index: HashMap<u64, usize> = external_ids
        .iter()
        .enumerate()
        .map(|(internal, &ext)| (ext, internal))
        .collect();
    let edges: Vec<Vec<usize>> = raw_edges
        .iter()
        .map(|e| e.iter().map(|id| index[id]).collect())
        .collect();
    let (hypergraph, duplicates) = Hypergraph::from_edges_counted(external_ids.len(), edges)?;
    Ok(ParsedHypergraph {
        hypergraph,
        external_ids,
        duplicates,
    })
}

/// Serialize to the hyperedge text format (edges in lexicographic order).
/// `parse(write(h))` is the identity on canonical hypergraphs whose node ids
/// are already dense.
pub fn write_hyperedge_text(h: &Hypergraph) -> String {
    let mut out = String::new();
    for e in h.edges() {
        let line: Vec<String> = e.iter().map(|i| i.to_string()).collect();
        out.push_str(&line.join(" "));
        out.push('\n');
    }
    out
}

/// Build a simple hypergraph from bipartite paper/author records: one
/// candidate hyperedge per paper (its distinct author set). Papers with more
/// than `m_cap` distinct authors or fewer than two are dropped and counted;
/// duplicate author sets collapse. Author ids are assigned `0..n-1` in
/// first-appearance order over the record stream.
pub fn ingest_bipartite(records: &[BipartiteRecord], m_cap: usize) -> Result<IngestedHypergraph> {
    assert!(m_cap >= 2, "m_cap must be at least 2");
    if records.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut author_index: HashMap<String, usize> = HashMap::new();
    let mut author_ids: Vec<String> = Vec::new();
    let mut edges: Vec<Vec<usize>> = Vec::new();
    let mut dropped_oversize = 0usize;
    let mut dropped_single = 0usize;
    for record in records {
        let mut nodes: Vec<usize> = Vec::with_capacity(record.author_ids.len());
        for author in &record.author_ids {
            let id = *author_index.entry(author.clone()).or_insert_with(|| {
                author_ids.push(author.clone());
                author_ids.len() - 1
            });
            nodes.push(id);
        }
        nodes.sort_unstable();
        nodes.dedup();
        if nodes.len() > m_cap {
            dropped_oversize += 1;
        } else if nodes.len() < 2 {
            dropped_single += 1;
        } else {
            edges.push(nodes);
        }
    }
    let (hypergraph, duplicates) = Hypergraph::from_edges_counted(author_ids.len(), edges)?;
    Ok(IngestedHypergraph {
        hypergraph,
        author_ids,
        dropped_oversize,
        dropped_single,
        duplicates,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn h(n: usize, edges: &[&[usize]]) -> Hypergraph {
        Hypergraph::new(n, edges.iter().map(|e| e.to_vec()).collect()).unwrap()
    }

    #[test]
    fn canonicalization() {
        assert_eq!(canonical_hyperedge(&[3, 1, 2], 5).unwrap(), vec![1, 2, 3]);
        assert_eq!(canonical_hyperedge(&[2, 2, 4], 5).unwrap(), vec![2, 4]);
        assert!(matches!(
            canonical_hyperedge(&[7], 5),
            Err(Error::OutOfRange { id: 7, n: 5 })
        ));
        assert!(matches!(
            canonical_hyperedge(&[2, 2], 5),
            Err(Error::TooSmall { got: 1 })
        ));
    }

    #[test]
    fn degrees() {
        assert_eq!(h(3, &[&[0, 1], &[0, 1, 2]]).degree_sequence(), vec![2, 2, 1]);
        assert_eq!(Hypergraph::empty(4).degree_sequence(), vec![0; 4]);
        assert_eq!(
            h(4, &[&[0, 1], &[2, 3], &[0, 2, 3]]).degree_sequence(),
            vec![2, 1, 2, 2]
        );
    }

    #[test]
    fn degree_sum_is_size_sum() {
        let g = h(6, &[&[0, 1], &[1, 2, 3], &[0, 4, 5], &[2, 5]]);
        let degrees: usize = g.degree_sequence().iter().sum();
        let sizes: usize = g.edges().iter().map(|e| e.len()).sum();
        assert_eq!(degrees, sizes);
    }

    #[test]
    fn size2_slice() {
        let a = h(3, &[&[0, 1], &[0, 1, 2]]).size2_adjacency();
        assert_eq!(a[(0, 1)], 1.0);
        assert_eq!(a[(1, 0)], 1.0);
        assert_eq!(a[(0, 2)], 0.0);
        assert_eq!(a[(0, 0)], 0.0);

        let zero = h(3, &[&[0, 1, 2]]).size2_adjacency();
        assert_eq!(zero.sum(), 0.0);

        let path = h(3, &[&[0, 1], &[1, 2]]).size2_adjacency();
        assert_eq!(path[(0, 1)], 1.0);
        assert_eq!(path[(1, 2)], 1.0);
        assert_eq!(path[(0, 2)], 0.0);
    }

    #[test]
    fn component_extraction() {
        // Connected graph maps to itself.
        let g = h(3, &[&[0, 1], &[1, 2]]);
        let (c, ids) = g.largest_component();
        assert_eq!(c, g);
        assert_eq!(ids, vec![0, 1, 2]);

        // {2,3,4} beats {0,1} and is relabeled {0,1,2}.
        let g = h(5, &[&[0, 1], &[2, 3, 4]]);
        let (c, ids) = g.largest_component();
        assert_eq!(ids, vec![2, 3, 4]);
        assert_eq!(c.edges(), &[vec![0, 1, 2]]);

        // Isolated node excluded.
        let g = h(6, &[&[0, 1]]);
        let (c, ids) = g.largest_component();
        assert_eq!(ids, vec![0, 1]);
        assert_eq!(c.n(), 2);

        // Tie between {0,1} and {2,3}: smallest contained id wins.
        let g = h(4, &[&[0, 1], &[2, 3]]);
        let (_, ids) = g.largest_component();
        assert_eq!(ids, vec![0, 1]);
    }

    #[test]
    fn component_is_connected_and_maximal() {
        let g = h(9, &[&[0, 1], &[1, 2, 3], &[4, 5], &[5, 6], &[7, 8]]);
        let (c, ids) = g.largest_component();
        assert_eq!(ids.len(), 4);
        // Every other component is no larger.
        assert!(ids.len() >= 3);
        // Connectivity: union-find over the returned component has one root.
        let (again, _) = c.largest_component();
        assert_eq!(again.n(), c.n());
    }

    #[test]
    fn parse_basics() {
        let parsed = parse_hyperedge_text("0 1\n0 1 2\n").unwrap();
        assert_eq!(parsed.hypergraph.n(), 3);
        assert_eq!(parsed.hypergraph.edges(), &[vec![0, 1], vec![0, 1, 2]]);
        assert_eq!(parsed.duplicates, 0);

        let parsed = parse_hyperedge_text("# comment\n5 3\n").unwrap();
        assert_eq!(parsed.hypergraph.edges(), &[vec![0, 1]]);
        assert_eq!(parsed.external_ids, vec![3, 5]);

        let parsed = parse_hyperedge_text("0 1\n0 1\n").unwrap();
        assert_eq!(parsed.hypergraph.edge_count(), 1);
        assert_eq!(parsed.duplicates, 1);
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let err = parse_hyperedge_text("0 1\nx y\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 2, .. }));
        let err = parse_hyperedge_text("0 1\n\n7\n").unwrap_err();
        assert!(matches!(err, Error::Parse { line: 3, .. }));
    }

    #[test]
    fn write_then_parse_roundtrip() {
        let g = h(5, &[&[0, 2], &[1, 3, 4], &[0, 1]]);
        let text = write_hyperedge_text(&g);
        let parsed = parse_hyperedge_text(&text).unwrap();
        assert_eq!(parsed.hypergraph, g);
        assert_eq!(parsed.external_ids, vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn ingest_rules() {
        let rec = |paper: &str, authors: &[&str]| BipartiteRecord {
            paper_id: paper.into(),
            author_ids: authors.iter().map(|s| s.to_string()).collect(),
        };
        let records = vec![
            rec("P1", &["a", "b"]),
            rec("P2", &["a", "b"]),                      // duplicate set
            rec("P3", &["c", "d", "e", "f", "g"]),       // oversize at cap 4
            rec("P4", &["h"]),                           // single author
            rec("P5", &["a", "a", "b"]),                 // repeated author collapses, duplicate set
            rec("P6", &["c", "d"]),
        ];
        let out = ingest_bipartite(&records, 4).unwrap();
        assert_eq!(out.dropped_oversize, 1);
        assert_eq!(out.dropped_single, 1);
        assert_eq!(out.duplicates, 2);
        assert_eq!(out.hypergraph.edge_count(), 2);
        // First-appearance order: a b c d e f g h.
        assert_eq!(out.author_ids, vec!["a", "b", "c", "d", "e", "f", "g", "h"]);
        assert!(out.hypergraph.contains_edge(&[0, 1]));
        assert!(out.hypergraph.contains_edge(&[2, 3]));
        for e in out.hypergraph.edges() {
            assert!(e.len() >= 2 && e.len() <= 4);
        }

        assert!(matches!(ingest_bipartite(&[], 4), Err(Error::EmptyInput)));
    }

    #[test]
    fn without_isolated_compacts() {
        let g = h(6, &[&[1, 3], &[3, 5]]);
        let (r, kept) = g.without_isolated();
        assert_eq!(kept, vec![1, 3, 5]);
        assert_eq!(r.edges(), &[vec![0, 1], vec![1, 2]]);
    }
}
