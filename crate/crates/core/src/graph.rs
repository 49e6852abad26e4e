//! Path diagrams: directed acyclic graphs with linear coefficients on directed
//! edges and error covariances on bidirected edges, plus the graphical queries
//! built on them (reachability, d-separation, back-door, conditional IV,
//! single-door, and the treatment-centred vertex partition).

use std::collections::{HashMap, VecDeque};

use crate::error::{Error, Result};

/// A directed edge `from -> to` carrying the path coefficient of `from` in the
/// structural equation of `to`.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedEdge {
    pub from: String,
    pub to: String,
    pub coefficient: f64,
}

/// A bidirected edge `a <-> b` carrying the covariance of the two disturbances.
#[derive(Debug, Clone, PartialEq)]
pub struct BidirectedEdge {
    pub a: String,
    pub b: String,
    pub covariance: f64,
}

/// An immutable path diagram. Vertex order is the declaration order and fixes
/// every downstream matrix layout. All queries are read-only.
#[derive(Debug, Clone)]
pub struct PathDiagram {
    names: Vec<String>,
    index: HashMap<String, usize>,
    directed: Vec<(usize, usize, f64)>,
    bidirected: Vec<(usize, usize, f64)>,
    parents: Vec<Vec<usize>>,
    children: Vec<Vec<usize>>,
    topo: Vec<usize>,
    // Adjacency of the augmented graph in which every bidirected edge is
    // replaced by a synthetic latent parent of both endpoints. Latents occupy
    // indices n.. and never surface in user-facing sets.
    aug_parents: Vec<Vec<usize>>,
    aug_children: Vec<Vec<usize>>,
}

/// Incremental construction of a [`PathDiagram`].
#[derive(Debug, Clone, Default)]
pub struct PathDiagramBuilder {
    vertices: Vec<String>,
    directed: Vec<(String, String, f64)>,
    bidirected: Vec<(String, String, f64)>,
}

impl PathDiagramBuilder {
    pub fn edge(mut self, from: &str, to: &str, coefficient: f64) -> Self {
        self.directed
            .push((from.to_string(), to.to_string(), coefficient));
        self
    }

    pub fn confounded(mut self, a: &str, b: &str, covariance: f64) -> Self {
        self.bidirected
            .push((a.to_string(), b.to_string(), covariance));
        self
    }

    pub fn build(self) -> Result<PathDiagram> {
        PathDiagram::from_parts(self.vertices, self.directed, self.bidirected)
    }
}

impl PathDiagram {
    /// Starts a builder over the given vertex order.
    pub fn builder(vertices: impl IntoIterator<Item = impl Into<String>>) -> PathDiagramBuilder {
        PathDiagramBuilder {
            vertices: vertices.into_iter().map(Into::into).collect(),
            ..Default::default()
        }
    }

    /// Validates and builds a diagram from explicit edge lists.
    pub fn from_parts(
        vertices: Vec<String>,
        directed_edges: Vec<(String, String, f64)>,
        bidirected_edges: Vec<(String, String, f64)>,
    ) -> Result<Self> {
        let n = vertices.len();
        let mut index = HashMap::with_capacity(n);
        for (i, v) in vertices.iter().enumerate() {
            if index.insert(v.clone(), i).is_some() {
                return Err(Error::DuplicateVertex(v.clone()));
            }
        }

        let lookup = |name: &str| -> Result<usize> {
            index
                .get(name)
                .copied()
                .ok_or_else(|| Error::UnknownVertex(name.to_string()))
        };

        let mut parents = vec![Vec::new(); n];
        let mut children = vec![Vec::new(); n];
        let mut directed = Vec::with_capacity(directed_edges.len());
        let mut seen = HashMap::new();
        for (from, to, coef) in &directed_edges {
            let f = lookup(from)?;
            let t = lookup(to)?;
            if f == t {
                return Err(Error::Cycle(from.clone()));
            }
            if !coef.is_finite() || *coef == 0.0 {
                return Err(Error::InvalidCoefficient {
                    from: from.clone(),
                    to: to.clone(),
                });
            }
            if seen.insert((f, t), ()).is_some() {
                return Err(Error::DuplicateEdge {
                    a: from.clone(),
                    b: to.clone(),
                });
            }
            parents[t].push(f);
            children[f].push(t);
            directed.push((f, t, *coef));
        }

        let mut bidirected = Vec::with_capacity(bidirected_edges.len());
        let mut seen_bi = HashMap::new();
        for (a, b, cov) in &bidirected_edges {
            let i = lookup(a)?;
            let j = lookup(b)?;
            if i == j {
                return Err(Error::DuplicateEdge {
                    a: a.clone(),
                    b: b.clone(),
                });
            }
            if !cov.is_finite() {
                return Err(Error::InvalidErrorCovariance {
                    a: a.clone(),
                    b: b.clone(),
                });
            }
            let key = (i.min(j), i.max(j));
            if seen_bi.insert(key, ()).is_some() {
                return Err(Error::DuplicateEdge {
                    a: a.clone(),
                    b: b.clone(),
                });
            }
            bidirected.push((key.0, key.1, *cov));
        }

        let topo = topological_order(n, &parents, &children, &vertices)?;

        // Augmented adjacency: one latent parent per bidirected edge.
        let m = bidirected.len();
        let mut aug_parents: Vec<Vec<usize>> = parents.clone();
        let mut aug_children: Vec<Vec<usize>> = children.clone();
        aug_parents.resize(n + m, Vec::new());
        aug_children.resize(n + m, Vec::new());
        for (k, &(a, b, _)) in bidirected.iter().enumerate() {
            let latent = n + k;
            aug_children[latent] = vec![a, b];
            aug_parents[a].push(latent);
            aug_parents[b].push(latent);
        }

        Ok(Self {
            names: vertices,
            index,
            directed,
            bidirected,
            parents,
            children,
            topo,
            aug_parents,
            aug_children,
        })
    }

    pub fn vertex_count(&self) -> usize {
        self.names.len()
    }

    pub fn vertices(&self) -> &[String] {
        &self.names
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn index_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownVertex(name.to_string()))
    }

    pub fn name(&self, idx: usize) -> &str {
        &self.names[idx]
    }

    pub fn directed_edges(&self) -> impl Iterator<Item = DirectedEdge> + '_ {
        self.directed.iter().map(|&(f, t, c)| DirectedEdge {
            from: self.names[f].clone(),
            to: self.names[t].clone(),
            coefficient: c,
        })
    }

    pub fn bidirected_edges(&self) -> impl Iterator<Item = BidirectedEdge> + '_ {
        self.bidirected.iter().map(|&(a, b, c)| BidirectedEdge {
            a: self.names[a].clone(),
            b: self.names[b].clone(),
            covariance: c,
        })
    }

    /// Path coefficient on `from -> to`, if that edge exists.
    pub fn coefficient(&self, from: &str, to: &str) -> Option<f64> {
        let f = self.index.get(from)?;
        let t = self.index.get(to)?;
        self.directed
            .iter()
            .find(|&&(a, b, _)| a == *f && b == *t)
            .map(|&(_, _, c)| c)
    }

    /// Vertex indices in a topological order of the directed part.
    pub(crate) fn topological_indices(&self) -> &[usize] {
        &self.topo
    }

    pub(crate) fn parent_indices(&self, v: usize) -> &[usize] {
        &self.parents[v]
    }

    pub(crate) fn directed_index_triples(&self) -> &[(usize, usize, f64)] {
        &self.directed
    }

    pub(crate) fn bidirected_index_triples(&self) -> &[(usize, usize, f64)] {
        &self.bidirected
    }

    /// Parents of `v` in declaration order.
    pub fn parents(&self, v: &str) -> Result<Vec<String>> {
        let vi = self.index_of(v)?;
        let mut out: Vec<usize> = self.parents[vi].clone();
        out.sort_unstable();
        Ok(out.into_iter().map(|i| self.names[i].clone()).collect())
    }

    /// All vertices reachable from `v` along directed paths, excluding `v`,
    /// in declaration order.
    pub fn descendants(&self, v: &str) -> Result<Vec<String>> {
        let root = self.index_of(v)?;
        let mask = self.descendant_mask(root);
        Ok(self.collect_in_order(&mask))
    }

    /// Vertices that are neither `v` nor descendants of `v`, in declaration order.
    pub fn nondescendants(&self, v: &str) -> Result<Vec<String>> {
        let root = self.index_of(v)?;
        let mask = self.descendant_mask(root);
        Ok(self
            .names
            .iter()
            .enumerate()
            .filter(|&(i, _)| !mask[i] && i != root)
            .map(|(_, n)| n.clone())
            .collect())
    }

    pub(crate) fn descendant_mask(&self, root: usize) -> Vec<bool> {
        let mut mask = vec![false; self.names.len()];
        let mut queue = VecDeque::from([root]);
        while let Some(v) = queue.pop_front() {
            for &c in &self.children[v] {
                if !mask[c] {
                    mask[c] = true;
                    queue.push_back(c);
                }
            }
        }
        mask[root] = false;
        mask
    }

    fn collect_in_order(&self, mask: &[bool]) -> Vec<String> {
        self.names
            .iter()
            .enumerate()
            .filter(|&(i, _)| mask[i])
            .map(|(_, n)| n.clone())
            .collect()
    }

    /// Whether `z` d-separates `a` from `b`, treating each bidirected edge as a
    /// latent common parent. The three sets must be pairwise disjoint.
    pub fn d_separated(&self, a: &[&str], b: &[&str], z: &[&str]) -> Result<bool> {
        let a_idx = self.resolve_set(a)?;
        let b_idx = self.resolve_set(b)?;
        let z_idx = self.resolve_set(z)?;
        for &i in &a_idx {
            if b_idx.contains(&i) || z_idx.contains(&i) {
                return Err(Error::OverlappingSets(self.names[i].clone()));
            }
        }
        for &i in &b_idx {
            if z_idx.contains(&i) {
                return Err(Error::OverlappingSets(self.names[i].clone()));
            }
        }
        Ok(d_separated_in(
            &self.aug_parents,
            &self.aug_children,
            &a_idx,
            &b_idx,
            &z_idx,
        ))
    }

    /// Back-door criterion: `t` contains no descendant of `x` and `t`
    /// d-separates `x` from `y` once the arrows leaving `x` are deleted.
    pub fn backdoor_admissible(&self, x: &str, y: &str, t: &[&str]) -> Result<bool> {
        let xi = self.index_of(x)?;
        let yi = self.index_of(y)?;
        let t_idx = self.resolve_set(t)?;
        let desc = self.descendant_mask(xi);
        if t_idx.iter().any(|&v| desc[v] || v == xi || v == yi) {
            return Ok(false);
        }
        let children = self.aug_children_without_outgoing(xi);
        Ok(d_separated_in(
            &self.aug_parents_for(&children),
            &children,
            &[xi],
            &[yi],
            &t_idx,
        ))
    }

    /// Conditional instrumental variable criterion for `z` given `t` relative
    /// to `(x, y)`: `t` holds no descendant of `y`, and in the graph with the
    /// arrows leaving `x` deleted, `t` d-separates `z` from `y` but not from `x`.
    pub fn conditional_iv(&self, x: &str, y: &str, z: &str, t: &[&str]) -> Result<bool> {
        let xi = self.index_of(x)?;
        let yi = self.index_of(y)?;
        let zi = self.index_of(z)?;
        let t_idx = self.resolve_set(t)?;
        if zi == xi || zi == yi {
            // a variable is never d-separated from itself, so the criterion fails
            return Ok(false);
        }
        if t_idx.iter().any(|&v| v == xi || v == yi || v == zi) {
            return Ok(false);
        }
        let y_desc = self.descendant_mask(yi);
        if t_idx.iter().any(|&v| y_desc[v] || v == yi) {
            return Ok(false);
        }
        let children = self.aug_children_without_outgoing(xi);
        let parents = self.aug_parents_for(&children);
        let sep_y = d_separated_in(&parents, &children, &[zi], &[yi], &t_idx);
        if !sep_y {
            return Ok(false);
        }
        let sep_x = d_separated_in(&parents, &children, &[zi], &[xi], &t_idx);
        Ok(!sep_x)
    }

    /// Single-door criterion for the edge `vi -> vj`: `z` holds no descendant
    /// of `vj` and d-separates `vi` from `vj` once that edge is deleted.
    pub fn single_door(&self, vi: &str, vj: &str, z: &[&str]) -> Result<bool> {
        let i = self.index_of(vi)?;
        let j = self.index_of(vj)?;
        let z_idx = self.resolve_set(z)?;
        if !self.directed.iter().any(|&(f, t, _)| f == i && t == j) {
            return Err(Error::MissingEdge {
                from: vi.to_string(),
                to: vj.to_string(),
            });
        }
        let vj_desc = self.descendant_mask(j);
        if z_idx.iter().any(|&v| vj_desc[v] || v == j || v == i) {
            return Ok(false);
        }
        let mut children = self.aug_children.clone();
        children[i].retain(|&c| c != j);
        Ok(d_separated_in(
            &self.aug_parents_for(&children),
            &children,
            &[i],
            &[j],
            &z_idx,
        ))
    }

    /// Partitions the vertex set around treatment `x`: `s` is the descendant
    /// block with response `y` first, and the nondescendants split into the
    /// plan covariates `w` (caller order) and the remainder `z`.
    pub fn partition(&self, x: &str, y: &str, w: &[&str]) -> Result<VertexPartition> {
        let xi = self.index_of(x)?;
        let yi = self.index_of(y)?;
        let desc = self.descendant_mask(xi);
        if !desc[yi] {
            return Err(Error::ResponseNotDescendant {
                x: x.to_string(),
                y: y.to_string(),
            });
        }
        let mut s = vec![self.names[yi].clone()];
        s.extend(
            self.names
                .iter()
                .enumerate()
                .filter(|&(i, _)| desc[i] && i != yi)
                .map(|(_, n)| n.clone()),
        );
        let w_idx = self.resolve_set(w)?;
        for &wv in &w_idx {
            if desc[wv] || wv == xi {
                return Err(Error::PlanCovariateIsDescendant(self.names[wv].clone()));
            }
        }
        let w_names: Vec<String> = w_idx.iter().map(|&i| self.names[i].clone()).collect();
        let z = self
            .names
            .iter()
            .enumerate()
            .filter(|&(i, _)| !desc[i] && i != xi && !w_idx.contains(&i))
            .map(|(_, n)| n.clone())
            .collect();
        Ok(VertexPartition {
            s,
            x: self.names[xi].clone(),
            z,
            w: w_names,
        })
    }

    fn resolve_set(&self, set: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(set.len());
        for v in set {
            let i = self.index_of(v)?;
            if out.contains(&i) {
                return Err(Error::OverlappingSets(v.to_string()));
            }
            out.push(i);
        }
        Ok(out)
    }

    /// Augmented children with the directed arrows leaving `x` removed
    /// (bidirected attachments at `x` survive: they are latent -> x arrows).
    fn aug_children_without_outgoing(&self, x: usize) -> Vec<Vec<usize>> {
        let mut children = self.aug_children.clone();
        children[x].clear();
        children
    }

    /// Parent lists consistent with a modified children relation.
    fn aug_parents_for(&self, children: &[Vec<usize>]) -> Vec<Vec<usize>> {
        let mut parents = vec![Vec::new(); children.len()];
        for (p, ch) in children.iter().enumerate() {
            for &c in ch {
                parents[c].push(p);
            }
        }
        parents
    }
}

/// The treatment-centred partition: `s` = descendants of the treatment with
/// the response first, `z`/`w` = nondescendants outside/inside the plan.
#[derive(Debug, Clone, PartialEq)]
pub struct VertexPartition {
    pub s: Vec<String>,
    pub x: String,
    pub z: Vec<String>,
    pub w: Vec<String>,
}

impl VertexPartition {
    /// The nondescendant block `t = z ∪ w`.
    pub fn t(&self) -> Vec<String> {
        let mut t = self.z.clone();
        t.extend(self.w.iter().cloned());
        t
    }
}

fn topological_order(
    n: usize,
    parents: &[Vec<usize>],
    children: &[Vec<usize>],
    names: &[String],
) -> Result<Vec<usize>> {
    let mut in_deg: Vec<usize> = parents.iter().map(Vec::len).collect();
    let mut queue: VecDeque<usize> = (0..n).filter(|&v| in_deg[v] == 0).collect();
    let mut order = Vec::with_capacity(n);
    while let Some(v) = queue.pop_front() {
        order.push(v);
        for &c in &children[v] {
            in_deg[c] -= 1;
            if in_deg[c] == 0 {
                queue.push_back(c);
            }
        }
    }
    if order.len() != n {
        let stuck = (0..n).find(|&v| in_deg[v] > 0).unwrap();
        return Err(Error::Cycle(names[stuck].clone()));
    }
    Ok(order)
}

/// Reachability-style d-separation over explicit adjacency lists. A trail is
/// tracked as (vertex, arrived-from-parent?) states; colliders pass only when
/// the vertex has a descendant in the conditioning set.
fn d_separated_in(
    parents: &[Vec<usize>],
    children: &[Vec<usize>],
    a: &[usize],
    b: &[usize],
    z: &[usize],
) -> bool {
    let n = parents.len();
    let mut in_z = vec![false; n];
    for &v in z {
        in_z[v] = true;
    }
    let mut in_b = vec![false; n];
    for &v in b {
        in_b[v] = true;
    }

    // ancestors of z (inclusive), walking parent links
    let mut anc_z = in_z.clone();
    let mut queue: VecDeque<usize> = z.iter().copied().collect();
    while let Some(v) = queue.pop_front() {
        for &p in &parents[v] {
            if !anc_z[p] {
                anc_z[p] = true;
                queue.push_back(p);
            }
        }
    }

    // visited[v][0] = reached moving up (from a child or as a source),
    // visited[v][1] = reached moving down (from a parent)
    let mut visited = vec![[false; 2]; n];
    let mut stack: Vec<(usize, bool)> = a.iter().map(|&v| (v, false)).collect();
    while let Some((v, from_parent)) = stack.pop() {
        let slot = usize::from(from_parent);
        if visited[v][slot] {
            continue;
        }
        visited[v][slot] = true;
        if in_b[v] {
            return false;
        }
        if !from_parent {
            if !in_z[v] {
                for &p in &parents[v] {
                    stack.push((p, false));
                }
                for &c in &children[v] {
                    stack.push((c, true));
                }
            }
        } else {
            if !in_z[v] {
                for &c in &children[v] {
                    stack.push((c, true));
                }
            }
            if anc_z[v] {
                for &p in &parents[v] {
                    stack.push((p, false));
                }
            }
        }
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m2() -> PathDiagram {
        PathDiagram::builder(["Z", "X", "Y"])
            .edge("Z", "X", 1.0)
            .edge("Z", "Y", 1.0)
            .edge("X", "Y", 0.5)
            .build()
            .unwrap()
    }

    fn m3() -> PathDiagram {
        PathDiagram::builder(["Z", "X", "Y"])
            .edge("Z", "X", 1.0)
            .edge("X", "Y", 0.5)
            .confounded("X", "Y", 0.5)
            .build()
            .unwrap()
    }

    #[test]
    fn builds_single_vertex_diagram() {
        let g = PathDiagram::builder(["A"]).build().unwrap();
        assert_eq!(g.vertex_count(), 1);
        assert_eq!(g.descendants("A").unwrap(), Vec::<String>::new());
    }

    #[test]
    fn rejects_two_cycle() {
        let err = PathDiagram::builder(["X", "Y"])
            .edge("X", "Y", 1.0)
            .edge("Y", "X", 1.0)
            .build()
            .unwrap_err();
        assert!(matches!(err, Error::Cycle(_)));
    }

    #[test]
    fn rejects_self_loop_duplicates_and_unknowns() {
        assert!(matches!(
            PathDiagram::builder(["X"]).edge("X", "X", 1.0).build(),
            Err(Error::Cycle(_))
        ));
        assert!(matches!(
            PathDiagram::builder(["X", "Y"])
                .edge("X", "Y", 1.0)
                .edge("X", "Y", 0.3)
                .build(),
            Err(Error::DuplicateEdge { .. })
        ));
        assert!(matches!(
            PathDiagram::builder(["X", "Y"])
                .confounded("X", "Y", 0.1)
                .confounded("Y", "X", 0.1)
                .build(),
            Err(Error::DuplicateEdge { .. })
        ));
        assert!(matches!(
            PathDiagram::builder(["X"]).edge("X", "W", 1.0).build(),
            Err(Error::UnknownVertex(_))
        ));
        assert!(matches!(
            PathDiagram::builder(["X", "Y"]).edge("X", "Y", f64::NAN).build(),
            Err(Error::InvalidCoefficient { .. })
        ));
        assert!(matches!(
            PathDiagram::builder(["X", "Y"]).edge("X", "Y", 0.0).build(),
            Err(Error::InvalidCoefficient { .. })
        ));
    }

    #[test]
    fn m2_is_valid_with_topological_order() {
        let g = m2();
        let topo: Vec<&str> = g.topological_indices().iter().map(|&i| g.name(i)).collect();
        assert_eq!(topo, vec!["Z", "X", "Y"]);
    }

    #[test]
    fn descendants_cover_reachable_set() {
        let g = m2();
        assert_eq!(g.descendants("Z").unwrap(), vec!["X", "Y"]);
        assert_eq!(g.descendants("Y").unwrap(), Vec::<String>::new());
        let chain = PathDiagram::builder(["X", "M", "Y"])
            .edge("X", "M", 1.0)
            .edge("M", "Y", 1.0)
            .build()
            .unwrap();
        assert_eq!(chain.descendants("X").unwrap(), vec!["M", "Y"]);
    }

    #[test]
    fn d_separation_basics() {
        let g = m2();
        assert!(!g.d_separated(&["X"], &["Y"], &[]).unwrap());

        let chain = PathDiagram::builder(["X", "M", "Y"])
            .edge("X", "M", 1.0)
            .edge("M", "Y", 1.0)
            .build()
            .unwrap();
        assert!(chain.d_separated(&["X"], &["Y"], &["M"]).unwrap());
        assert!(!chain.d_separated(&["X"], &["Y"], &[]).unwrap());

        let collider = PathDiagram::builder(["X", "Y", "C"])
            .edge("X", "C", 1.0)
            .edge("Y", "C", 1.0)
            .build()
            .unwrap();
        assert!(collider.d_separated(&["X"], &["Y"], &[]).unwrap());
        assert!(!collider.d_separated(&["X"], &["Y"], &["C"]).unwrap());
    }

    #[test]
    fn d_separation_sees_bidirected_edges() {
        let g = PathDiagram::builder(["X", "Y"])
            .confounded("X", "Y", 0.5)
            .build()
            .unwrap();
        assert!(!g.d_separated(&["X"], &["Y"], &[]).unwrap());
    }

    #[test]
    fn d_separation_rejects_overlap() {
        let g = m2();
        assert!(matches!(
            g.d_separated(&["X"], &["X"], &[]),
            Err(Error::OverlappingSets(_))
        ));
        assert!(matches!(
            g.d_separated(&["X"], &["Y"], &["X"]),
            Err(Error::OverlappingSets(_))
        ));
    }

    #[test]
    fn backdoor_on_fixtures() {
        let g = m2();
        assert!(g.backdoor_admissible("X", "Y", &["Z"]).unwrap());
        assert!(!g.backdoor_admissible("X", "Y", &[]).unwrap());
        let m1 = PathDiagram::builder(["X", "Y"])
            .edge("X", "Y", 0.5)
            .build()
            .unwrap();
        assert!(m1.backdoor_admissible("X", "Y", &[]).unwrap());
    }

    #[test]
    fn conditional_iv_on_fixtures() {
        assert!(m3().conditional_iv("X", "Y", "Z", &[]).unwrap());
        assert!(!m2().conditional_iv("X", "Y", "Z", &[]).unwrap());
        let m1 = PathDiagram::builder(["X", "Y"])
            .edge("X", "Y", 0.5)
            .build()
            .unwrap();
        assert!(!m1.conditional_iv("X", "Y", "Y", &[]).unwrap());
    }

    #[test]
    fn single_door_on_fixtures() {
        let m1 = PathDiagram::builder(["X", "Y"])
            .edge("X", "Y", 0.5)
            .build()
            .unwrap();
        assert!(m1.single_door("X", "Y", &[]).unwrap());
        let g = m2();
        assert!(g.single_door("X", "Y", &["Z"]).unwrap());
        assert!(!g.single_door("X", "Y", &[]).unwrap());
        assert!(matches!(
            g.single_door("Y", "Z", &[]),
            Err(Error::MissingEdge { .. })
        ));
    }

    #[test]
    fn partition_on_fixtures() {
        let g = m2();
        let p = g.partition("X", "Y", &["Z"]).unwrap();
        assert_eq!(p.s, vec!["Y"]);
        assert_eq!(p.x, "X");
        assert_eq!(p.z, Vec::<String>::new());
        assert_eq!(p.w, vec!["Z"]);

        let m1 = PathDiagram::builder(["X", "Y"])
            .edge("X", "Y", 0.5)
            .build()
            .unwrap();
        let p1 = m1.partition("X", "Y", &[]).unwrap();
        assert_eq!(p1.s, vec!["Y"]);
        assert!(p1.t().is_empty());

        assert!(matches!(
            g.partition("X", "Y", &["Y"]),
            Err(Error::PlanCovariateIsDescendant(_))
        ));
        assert!(matches!(
            g.partition("Y", "X", &[]),
            Err(Error::ResponseNotDescendant { .. })
        ));
    }

    #[test]
    fn partition_blocks_cover_vertex_set() {
        let g = PathDiagram::builder(["A", "B", "X", "C", "Y", "D"])
            .edge("A", "X", 1.0)
            .edge("B", "A", 0.7)
            .edge("X", "C", 2.0)
            .edge("C", "Y", 1.5)
            .edge("B", "D", 1.0)
            .build()
            .unwrap();
        let p = g.partition("X", "Y", &["B"]).unwrap();
        assert_eq!(p.s, vec!["Y", "C"]);
        assert_eq!(p.w, vec!["B"]);
        assert_eq!(p.z, vec!["A", "D"]);
        let mut all: Vec<String> = p.s.clone();
        all.push(p.x.clone());
        all.extend(p.t());
        all.sort();
        let mut expect: Vec<String> = g.vertices().to_vec();
        expect.sort();
        assert_eq!(all, expect);
    }
}
