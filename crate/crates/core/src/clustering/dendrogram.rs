//! Merge trees, cuts, and their text encodings.
//!
//! Node ids follow the usual linkage convention: leaves are `0..n`, and the
//! cluster created by merge `s` is `n + s`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Merge {
    pub left: usize,
    pub right: usize,
    pub height: f64,
    /// Number of leaves under the new node.
    pub size: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dendrogram {
    leaves: Vec<String>,
    merges: Vec<Merge>,
}

/// Height tolerance for the monotonicity check.
const HEIGHT_EPS: f64 = 1e-12;

impl Dendrogram {
    /// Validates structure: `n - 1` merges, each node consumed exactly once,
    /// children created before parents, sizes consistent, heights
    /// non-decreasing.
    pub fn new(leaves: Vec<String>, merges: Vec<Merge>) -> Result<Self> {
        let n = leaves.len();
        if n < 2 {
            return Err(Error::DegenerateInput(n));
        }
        if merges.len() != n - 1 {
            return Err(Error::Invariant(format!("{} merges for {n} leaves", merges.len())));
        }
        let mut used = vec![false; 2 * n - 1];
        let mut sizes: Vec<usize> = vec![1; n];
        let mut prev = f64::NEG_INFINITY;
        for (step, m) in merges.iter().enumerate() {
            let id = n + step;
            for child in [m.left, m.right] {
                if child >= id || used[child] {
                    return Err(Error::Invariant(format!("merge {step} reuses or forward-references node {child}")));
                }
                used[child] = true;
            }
            if m.left == m.right {
                return Err(Error::Invariant(format!("merge {step} joins a node with itself")));
            }
            if !m.height.is_finite() || m.height < 0.0 {
                return Err(Error::Invariant(format!("merge {step} has height {}", m.height)));
            }
            if m.height < prev - HEIGHT_EPS {
                return Err(Error::Invariant(format!(
                    "merge heights decrease at step {step}: {} < {prev}",
                    m.height
                )));
            }
            prev = prev.max(m.height);
            let size = sizes[m.left] + sizes[m.right];
            if size != m.size {
                return Err(Error::Invariant(format!("merge {step} size {} != {size}", m.size)));
            }
            sizes.push(size);
        }
        Ok(Dendrogram { leaves, merges })
    }

    pub fn leaves(&self) -> &[String] {
        &self.leaves
    }

    pub fn merges(&self) -> &[Merge] {
        &self.merges
    }

    pub fn len(&self) -> usize {
        self.leaves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.leaves.is_empty()
    }

    pub fn root(&self) -> usize {
        2 * self.leaves.len() - 2
    }

    pub fn children(&self, node: usize) -> Option<(usize, usize)> {
        node.checked_sub(self.leaves.len())
            .and_then(|s| self.merges.get(s))
            .map(|m| (m.left, m.right))
    }

    /// Height of a node; leaves sit at 0.
    pub fn height(&self, node: usize) -> f64 {
        node.checked_sub(self.leaves.len()).map_or(0.0, |s| self.merges[s].height)
    }

    /// Leaf indices under `node`, left to right.
    pub fn members(&self, node: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![node];
        while let Some(x) = stack.pop() {
            match self.children(x) {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.push(x),
            }
        }
        out
    }

    /// Leaf order of a left-to-right traversal from the root.
    pub fn leaf_order(&self) -> Vec<usize> {
        self.members(self.root())
    }

    /// Tree text with explicit node ids and heights, e.g.
    /// `((Go#0,Java#1)#3@0.25,C#2)#4@0.5;`. Round-trips exactly through
    /// [`Dendrogram::parse_tree_text`].
    pub fn to_tree_text(&self, manifest_digest: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(d) = manifest_digest {
            let _ = write!(out, "[manifest {d}]");
        }
        self.write_tree_text(self.root(), &mut out);
        out.push_str(";\n");
        out
    }

    fn write_tree_text(&self, node: usize, out: &mut String) {
        match self.children(node) {
            Some((l, r)) => {
                out.push('(');
                self.write_tree_text(l, out);
                out.push(',');
                self.write_tree_text(r, out);
                let _ = write!(out, ")#{node}@{}", self.height(node));
            }
            None => {
                out.push_str(&quote_label(&self.leaves[node]));
                let _ = write!(out, "#{node}");
            }
        }
    }

    pub fn parse_tree_text(text: &str) -> Result<Self> {
        let mut p = Parser::new(text);
        p.skip_comment()?;
        let mut leaves: Vec<(usize, String)> = Vec::new();
        let mut internal: Vec<(usize, usize, usize, f64)> = Vec::new();
        let root = p.tree_text_node(&mut leaves, &mut internal)?;
        p.expect(';')?;
        p.skip_ws();
        if !p.at_end() {
            return Err(Error::Parse("trailing input after `;`".into()));
        }
        let n = leaves.len();
        leaves.sort_by_key(|(i, _)| *i);
        if leaves.iter().enumerate().any(|(i, (id, _))| i != *id) {
            return Err(Error::Parse("leaf ids are not 0..n".into()));
        }
        internal.sort_by_key(|(id, ..)| *id);
        if internal.iter().enumerate().any(|(s, (id, ..))| *id != n + s) || root.0 != 2 * n.max(1) - 2 {
            return Err(Error::Parse("internal node ids are not n..2n-1".into()));
        }
        let mut sizes = vec![1usize; n];
        let mut merges = Vec::with_capacity(internal.len());
        for (_, l, r, h) in internal {
            let size = sizes.get(l).copied().unwrap_or(0) + sizes.get(r).copied().unwrap_or(0);
            sizes.push(size);
            merges.push(Merge { left: l, right: r, height: h, size });
        }
        Dendrogram::new(leaves.into_iter().map(|(_, name)| name).collect(), merges)
    }

    /// Standard Newick with branch lengths (parent height minus child height).
    pub fn to_newick(&self, manifest_digest: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(d) = manifest_digest {
            let _ = write!(out, "[manifest {d}]");
        }
        self.write_newick(self.root(), None, &mut out);
        out.push_str(";\n");
        out
    }

    fn write_newick(&self, node: usize, parent_height: Option<f64>, out: &mut String) {
        if let Some((l, r)) = self.children(node) {
            out.push('(');
            self.write_newick(l, Some(self.height(node)), out);
            out.push(',');
            self.write_newick(r, Some(self.height(node)), out);
            out.push(')');
        } else {
            out.push_str(&quote_label(&self.leaves[node]));
        }
        if let Some(ph) = parent_height {
            let _ = write!(out, ":{}", ph - self.height(node));
        }
    }

    /// Graphviz description; when `labels` is given, leaves are filled with
    /// their cluster colour.
    pub fn to_dot(&self, labels: Option<&[usize]>, manifest_digest: Option<&str>) -> String {
        let mut out = String::new();
        if let Some(d) = manifest_digest {
            let _ = writeln!(out, "// manifest {d}");
        }
        out.push_str("digraph dendrogram {\n  rankdir=TB;\n  node [shape=box, fontname=\"Helvetica\"];\n");
        for (i, name) in self.leaves.iter().enumerate() {
            let fill = labels
                .and_then(|l| l.get(i))
                .map(|&c| format!(", style=filled, fillcolor=\"{}\"", crate::report::palette(c)))
                .unwrap_or_default();
            let _ = writeln!(out, "  n{i} [label=\"{}\"{fill}];", name.replace('\\', "\\\\").replace('"', "\\\""));
        }
        for (s, m) in self.merges.iter().enumerate() {
            let id = self.leaves.len() + s;
            let _ = writeln!(out, "  n{id} [shape=point, xlabel=\"{:.4}\", height={}];", m.height, m.height);
            let _ = writeln!(out, "  n{id} -> n{};\n  n{id} -> n{};", m.left, m.right);
        }
        out.push_str("}\n");
        out
    }
}

fn needs_quotes(label: &str) -> bool {
    label.is_empty() || label.chars().any(|c| "()[]',;:#@".contains(c) || c.is_whitespace())
}

fn quote_label(label: &str) -> String {
    if needs_quotes(label) {
        format!("'{}'", label.replace('\'', "''"))
    } else {
        label.to_string()
    }
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    _src: &'a str,
}

impl<'a> Parser<'a> {
    fn new(src: &'a str) -> Self {
        Parser { chars: src.chars().collect(), pos: 0, _src: src }
    }

    fn at_end(&self) -> bool {
        self.pos >= self.chars.len()
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn skip_comment(&mut self) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some('[') {
            while let Some(c) = self.peek() {
                self.pos += 1;
                if c == ']' {
                    return Ok(());
                }
            }
            return Err(Error::Parse("unterminated comment".into()));
        }
        Ok(())
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse(format!("expected `{c}` at offset {}", self.pos)))
        }
    }

    fn label(&mut self) -> Result<String> {
        self.skip_ws();
        if self.peek() == Some('\'') {
            self.pos += 1;
            let mut s = String::new();
            loop {
                match self.peek() {
                    None => return Err(Error::Parse("unterminated quoted label".into())),
                    Some('\'') if self.chars.get(self.pos + 1) == Some(&'\'') => {
                        s.push('\'');
                        self.pos += 2;
                    }
                    Some('\'') => {
                        self.pos += 1;
                        return Ok(s);
                    }
                    Some(c) => {
                        s.push(c);
                        self.pos += 1;
                    }
                }
            }
        }
        let start = self.pos;
        while self.peek().is_some_and(|c| !"()[]',;:#@".contains(c) && !c.is_whitespace()) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Parse(format!("expected label at offset {start}")));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn token(&mut self, stop: &str) -> String {
        self.skip_ws();
        let start = self.pos;
        while self.peek().is_some_and(|c| !stop.contains(c) && !c.is_whitespace()) {
            self.pos += 1;
        }
        self.chars[start..self.pos].iter().collect()
    }

    fn node_id(&mut self) -> Result<usize> {
        self.expect('#')?;
        let t = self.token("(),;@#");
        t.parse().map_err(|_| Error::Parse(format!("bad node id `{t}`")))
    }

    /// Returns (node id, is_leaf).
    fn tree_text_node(
        &mut self,
        leaves: &mut Vec<(usize, String)>,
        internal: &mut Vec<(usize, usize, usize, f64)>,
    ) -> Result<(usize, bool)> {
        self.skip_ws();
        if self.peek() == Some('(') {
            self.pos += 1;
            let (l, _) = self.tree_text_node(leaves, internal)?;
            self.expect(',')?;
            let (r, _) = self.tree_text_node(leaves, internal)?;
            self.expect(')')?;
            let id = self.node_id()?;
            self.expect('@')?;
            let t = self.token("(),;#");
            let h: f64 = t.parse().map_err(|_| Error::Parse(format!("bad height `{t}`")))?;
            internal.push((id, l, r, h));
            Ok((id, false))
        } else {
            let name = self.label()?;
            let id = self.node_id()?;
            leaves.push((id, name));
            Ok((id, true))
        }
    }
}

/// A flat clustering of dendrogram leaves. Labels are canonical: clusters
/// are numbered by the first leaf index they contain.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub leaves: Vec<String>,
    pub labels: Vec<usize>,
}

impl Partition {
    /// Relabels `raw` canonically.
    pub fn from_raw(leaves: Vec<String>, raw: &[usize]) -> Self {
        let mut map = std::collections::HashMap::new();
        let labels = raw
            .iter()
            .map(|r| {
                let next = map.len();
                *map.entry(*r).or_insert(next)
            })
            .collect();
        Partition { leaves, labels }
    }

    pub fn k(&self) -> usize {
        self.labels.iter().max().map_or(0, |m| m + 1)
    }

    /// Member index lists per cluster label.
    pub fn cluster_indices(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.k()];
        for (i, &l) in self.labels.iter().enumerate() {
            out[l].push(i);
        }
        out
    }

    pub fn clusters(&self) -> Vec<Vec<String>> {
        self.cluster_indices()
            .into_iter()
            .map(|c| c.into_iter().map(|i| self.leaves[i].clone()).collect())
            .collect()
    }

    pub fn label_of(&self, leaf: &str) -> Option<usize> {
        self.leaves.iter().position(|l| l == leaf).map(|i| self.labels[i])
    }

    /// True when every cluster of `self` lies inside one cluster of `coarser`.
    pub fn refines(&self, coarser: &Partition) -> bool {
        self.cluster_indices().iter().all(|members| {
            let first = coarser.labels[members[0]];
            members.iter().all(|&i| coarser.labels[i] == first)
        })
    }

    /// `{"language": cluster, ...}` in leaf order.
    pub fn to_json(&self, manifest_digest: Option<&str>) -> String {
        let mut out = String::from("{\n");
        if let Some(d) = manifest_digest {
            let _ = writeln!(out, "  \"_manifest\": {},", serde_json::to_string(d).expect("string"));
        }
        let n = self.leaves.len();
        for (i, (name, label)) in self.leaves.iter().zip(&self.labels).enumerate() {
            let sep = if i + 1 == n { "" } else { "," };
            let _ = writeln!(out, "  {}: {label}{sep}", serde_json::to_string(name).expect("string"));
        }
        out.push_str("}\n");
        out
    }
}

/// Undoes the last `k - 1` merges.
pub fn cut_dendrogram(dendrogram: &Dendrogram, k: usize) -> Result<Partition> {
    let n = dendrogram.len();
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, leaves: n });
    }
    let mut parent: Vec<usize> = (0..2 * n - 1).collect();
    fn find(parent: &mut [usize], mut x: usize) -> usize {
        while parent[x] != x {
            parent[x] = parent[parent[x]];
            x = parent[x];
        }
        x
    }
    for (s, m) in dendrogram.merges().iter().take(n - k).enumerate() {
        let id = n + s;
        let a = find(&mut parent, m.left);
        let b = find(&mut parent, m.right);
        parent[a] = id;
        parent[b] = id;
    }
    let raw: Vec<usize> = (0..n).map(|i| find(&mut parent, i)).collect();
    Ok(Partition::from_raw(dendrogram.leaves().to_vec(), &raw))
}
