//! Class-feature bipartite graph and the semantic relevance score.
//!
//! From a probe weight matrix, each class keeps its top-K features; features
//! predictive of only one class are pruned in a single pass; connected
//! components are read off the surviving bipartite graph. The relevance
//! score sums, over classes, the fraction of each class's 2-neighbours
//! (classes sharing at least one surviving feature) that lie in the same
//! superclass.

use std::collections::VecDeque;
use std::io::Write as IoWrite;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Total assignment of classes to superclasses, with display names.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuperclassMap {
    /// Indexed by class id.
    pub class_names: Vec<String>,
    /// Indexed by superclass id, in first-appearance order.
    pub superclass_names: Vec<String>,
    /// class id -> superclass id.
    pub assignment: Vec<usize>,
}

impl SuperclassMap {
    /// Aligns (class name, superclass name) rows to the given class order.
    /// Every class in `class_order` must appear in the rows; extra rows are
    /// ignored.
    pub fn from_pairs(pairs: &[(String, String)], class_order: &[String]) -> Result<Self> {
        let mut superclass_names: Vec<String> = Vec::new();
        let mut assignment = Vec::with_capacity(class_order.len());
        for class in class_order {
            let hits: Vec<&str> = pairs
                .iter()
                .filter(|(c, _)| c == class)
                .map(|(_, s)| s.as_str())
                .collect();
            let sup = match hits.as_slice() {
                [] => return Err(Error::data(format!("class {class:?} has no superclass"))),
                [s] => *s,
                [first, rest @ ..] if rest.iter().all(|s| s == first) => *first,
                _ => {
                    return Err(Error::data(format!(
                        "class {class:?} maps to more than one superclass"
                    )))
                }
            };
            let id = match superclass_names.iter().position(|s| s == sup) {
                Some(i) => i,
                None => {
                    superclass_names.push(sup.to_string());
                    superclass_names.len() - 1
                }
            };
            assignment.push(id);
        }
        Ok(SuperclassMap {
            class_names: class_order.to_vec(),
            superclass_names,
            assignment,
        })
    }

    /// Parses two-column comma-separated text (class, superclass); `#`
    /// comment lines and blank lines are skipped.
    pub fn parse_text(text: &str, class_order: &[String]) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let Some((class, sup)) = line.split_once(',') else {
                return Err(Error::format(format!(
                    "superclass map line {} needs two comma-separated fields",
                    lineno + 1
                )));
            };
            pairs.push((class.trim().to_string(), sup.trim().to_string()));
        }
        Self::from_pairs(&pairs, class_order)
    }

    /// Groups consecutive class pairs: classes 2i and 2i+1 share
    /// a superclass.
    pub fn consecutive_pairs(class_names: &[String]) -> Self {
        let n_super = class_names.len().div_ceil(2);
        SuperclassMap {
            class_names: class_names.to_vec(),
            superclass_names: (0..n_super).map(|i| format!("super_{i}")).collect(),
            assignment: (0..class_names.len()).map(|c| c / 2).collect(),
        }
    }

    pub fn n_classes(&self) -> usize {
        self.assignment.len()
    }

    pub fn same_superclass(&self, a: usize, b: usize) -> bool {
        self.assignment[a] == self.assignment[b]
    }
}

/// How each class ranks its features.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Ranking {
    /// Largest signed weight.
    Signed,
    /// Largest absolute weight.
    Absolute,
}

/// One connected component, labeled by its smallest class id.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Component {
    pub label: usize,
    pub classes: Vec<usize>,
    pub features: Vec<usize>,
}

/// The pruned bipartite graph.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RelevanceGraph<S: Scalar = f64> {
    pub k: usize,
    pub n_classes: usize,
    /// Surviving (class id, feature id, signed weight) edges, sorted by
    /// class then feature.
    pub edges: Vec<(usize, usize, S)>,
    /// Features dropped for being predictive of a single class, sorted.
    pub pruned_features: Vec<usize>,
    pub components: Vec<Component>,
}

impl<S: Scalar> RelevanceGraph<S> {
    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn edge_pairs(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|&(c, f, _)| (c, f)).collect()
    }
}

/// Builds the graph from a `[n_features, n_classes]` weight matrix: top-K
/// features per class (ties to the lowest feature index), then a single
/// pruning pass dropping features incident to exactly one class.
pub fn build_wk<S: Scalar>(w: &Tensor<S>, k: usize, ranking: Ranking) -> Result<RelevanceGraph<S>> {
    let (n, c) = w.dims2()?;
    if k == 0 || k > n {
        return Err(Error::param(format!("K must lie in [1, {n}], got {k}")));
    }
    let mut candidate: Vec<(usize, usize, S)> = Vec::with_capacity(c * k);
    for class in 0..c {
        let mut order: Vec<usize> = (0..n).collect();
        let key = |i: usize| {
            let v = w.data()[i * c + class];
            match ranking {
                Ranking::Signed => v,
                Ranking::Absolute => v.abs(),
            }
        };
        order.sort_by(|&a, &b| {
            key(b).partial_cmp(&key(a)).expect("finite weights").then(a.cmp(&b))
        });
        for &feature in order.iter().take(k) {
            candidate.push((class, feature, w.data()[feature * c + class]));
        }
    }
    let mut degree = vec![0usize; n];
    for &(_, f, _) in &candidate {
        degree[f] += 1;
    }
    let mut edges: Vec<(usize, usize, S)> =
        candidate.into_iter().filter(|&(_, f, _)| degree[f] >= 2).collect();
    edges.sort_by_key(|&(cl, f, _)| (cl, f));
    let mut pruned_features: Vec<usize> =
        (0..n).filter(|&f| degree[f] == 1).collect();
    pruned_features.sort_unstable();
    let components = connected_components(
        &edges.iter().map(|&(cl, f, _)| (cl, f)).collect::<Vec<_>>(),
    );
    Ok(RelevanceGraph { k, n_classes: c, edges, pruned_features, components })
}

/// Undirected components of a bipartite (class, feature) edge list, found
/// by breadth-first search. Components are labeled by their smallest class
/// id and sorted by label; member lists are sorted.
pub fn connected_components(edges: &[(usize, usize)]) -> Vec<Component> {
    // Adjacency over the induced node set; classes and features are
    // distinct namespaces.
    let mut class_adj: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    let mut feat_adj: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &(c, f) in edges {
        class_adj.entry(c).or_default().push(f);
        feat_adj.entry(f).or_default().push(c);
    }
    let mut seen_class: std::collections::BTreeSet<usize> = Default::default();
    let mut out = Vec::new();
    for &start in class_adj.keys() {
        if seen_class.contains(&start) {
            continue;
        }
        let mut classes = Vec::new();
        let mut features: std::collections::BTreeSet<usize> = Default::default();
        let mut queue = VecDeque::from([start]);
        seen_class.insert(start);
        while let Some(c) = queue.pop_front() {
            classes.push(c);
            for &f in &class_adj[&c] {
                if features.insert(f) {
                    for &c2 in &feat_adj[&f] {
                        if seen_class.insert(c2) {
                            queue.push_back(c2);
                        }
                    }
                }
            }
        }
        classes.sort_unstable();
        out.push(Component {
            label: classes[0],
            classes,
            features: features.into_iter().collect(),
        });
    }
    out.sort_by_key(|comp| comp.label);
    out
}

/// Semantic relevance: for each class, the fraction of its 2-neighbours in
/// the same superclass, summed over classes. Classes without neighbours
/// contribute 0. Value in [0, n_classes].
pub fn relevance_score<S: Scalar>(
    graph: &RelevanceGraph<S>,
    map: &SuperclassMap,
) -> Result<S> {
    let mut feat_classes: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for &(c, f, _) in &graph.edges {
        if c >= map.n_classes() {
            return Err(Error::data(format!("class {c} is not in the superclass map")));
        }
        feat_classes.entry(f).or_default().push(c);
    }
    let n_classes = graph.n_classes;
    let mut neighbours: Vec<std::collections::BTreeSet<usize>> =
        vec![Default::default(); n_classes];
    for classes in feat_classes.values() {
        for &a in classes {
            for &b in classes {
                if a != b {
                    neighbours[a].insert(b);
                }
            }
        }
    }
    let mut score = 0.0;
    for (c, nbrs) in neighbours.iter().enumerate() {
        if nbrs.is_empty() {
            continue;
        }
        let same = nbrs.iter().filter(|&&j| map.same_superclass(c, j)).count();
        score += same as f64 / nbrs.len() as f64;
    }
    Ok(S::of(score))
}

/// JSON summary of one (K, graph) evaluation.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct RelevanceSummary<S: Scalar = f64> {
    #[serde(rename = "K")]
    pub k: usize,
    pub n_edges: usize,
    pub n_components: usize,
    pub relevance: S,
}

impl<S: Scalar> RelevanceSummary<S> {
    pub fn new(graph: &RelevanceGraph<S>, map: &SuperclassMap) -> Result<Self> {
        Ok(RelevanceSummary {
            k: graph.k,
            n_edges: graph.n_edges(),
            n_components: graph.components.len(),
            relevance: relevance_score(graph, map)?,
        })
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self)
            .map_err(|e| Error::format(format!("summary serialization failed: {e}")))
    }
}

/// Default K grid for relevance-over-K tables.
pub fn default_k_grid() -> Vec<usize> {
    (1..=10).collect()
}

/// Writes the edge list: `#` component summary lines, a header line, then
/// one `class_name,feature_id,weight` line per edge.
pub fn export_graph<S: Scalar, W: IoWrite>(
    graph: &RelevanceGraph<S>,
    class_names: &[String],
    mut w: W,
) -> Result<()> {
    if class_names.len() < graph.n_classes {
        return Err(Error::data("class name table is shorter than the class count"));
    }
    writeln!(w, "# components: {}", graph.components.len())?;
    for comp in &graph.components {
        writeln!(
            w,
            "# component {}: classes={:?} features={:?}",
            comp.label, comp.classes, comp.features
        )?;
    }
    writeln!(w, "class,feature,weight")?;
    for &(c, f, wt) in &graph.edges {
        writeln!(w, "{},{f},{wt}", class_names[c])?;
    }
    Ok(())
}

/// Reads an exported edge list back as (class id, feature id, weight)
/// rows, resolving class names against the given order.
pub fn import_graph<S: Scalar>(
    text: &str,
    class_names: &[String],
) -> Result<Vec<(usize, usize, S)>> {
    let mut edges = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') || line == "class,feature,weight" {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 3 {
            return Err(Error::format(format!(
                "edge line {} needs three comma-separated fields",
                lineno + 1
            )));
        }
        let class = class_names
            .iter()
            .position(|n| n == parts[0])
            .ok_or_else(|| Error::data(format!("unknown class name {:?}", parts[0])))?;
        let feature: usize = parts[1]
            .parse()
            .map_err(|_| Error::format(format!("bad feature id {:?}", parts[1])))?;
        let weight: f64 = parts[2]
            .parse()
            .map_err(|_| Error::format(format!("bad weight {:?}", parts[2])))?;
        edges.push((class, feature, S::of(weight)));
    }
    Ok(edges)
}

// ---------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("class_{i}")).collect()
    }

    fn matrix(rows: Vec<Vec<f64>>) -> Tensor<f64> {
        let n = rows.len();
        let c = rows[0].len();
        Tensor::new([n, c], rows.into_iter().flatten().collect()).unwrap()
    }

    #[test]
    fn identity_matrix_prunes_to_empty_at_k1() {
        let w = matrix(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ]);
        let g = build_wk(&w, 1, Ranking::Signed).unwrap();
        assert!(g.edges.is_empty());
        assert!(g.components.is_empty());
        assert_eq!(g.pruned_features, vec![0, 1, 2]);
    }

    #[test]
    fn identical_columns_share_one_feature() {
        let w = matrix(vec![vec![0.5, 0.5], vec![2.0, 2.0], vec![1.0, 1.0]]);
        let g = build_wk(&w, 1, Ranking::Signed).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 1), (1, 1)]);
        assert_eq!(g.components.len(), 1);
        let comp = &g.components[0];
        assert_eq!(comp.label, 0);
        assert_eq!(comp.classes, vec![0, 1]);
        assert_eq!(comp.features, vec![1]);
    }

    #[test]
    fn ties_break_to_the_lowest_feature_index() {
        let w = matrix(vec![vec![1.0, 0.0], vec![1.0, 0.0], vec![1.0, 1.0]]);
        let g = build_wk(&w, 1, Ranking::Signed).unwrap();
        // Class 0 ties across all three features and takes feature 0;
        // class 1's top is feature 2; no feature is shared, all pruned.
        assert!(g.edges.is_empty());
        let g = build_wk(&w, 2, Ranking::Signed).unwrap();
        // Class 0 takes features 0+1; class 1 takes 2 then ties 0/1 -> 0.
        assert_eq!(g.edge_pairs(), vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn absolute_ranking_sees_large_negative_weights() {
        let w = matrix(vec![vec![-5.0, -5.0], vec![1.0, 1.0], vec![0.5, 0.5]]);
        let signed = build_wk(&w, 1, Ranking::Signed).unwrap();
        assert_eq!(signed.edge_pairs(), vec![(0, 1), (1, 1)]);
        let abs = build_wk(&w, 1, Ranking::Absolute).unwrap();
        assert_eq!(abs.edge_pairs(), vec![(0, 0), (1, 0)]);
    }

    #[test]
    fn k_out_of_range_is_rejected() {
        let w = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        assert!(build_wk(&w, 0, Ranking::Signed).is_err());
        assert!(build_wk(&w, 3, Ranking::Signed).is_err());
    }

    #[test]
    fn class_degree_never_exceeds_k() {
        let w = matrix(vec![
            vec![0.9, 0.1, 0.5],
            vec![0.8, 0.7, 0.4],
            vec![0.2, 0.6, 0.3],
            vec![0.1, 0.5, 0.2],
        ]);
        for k in 1..=4 {
            let g = build_wk(&w, k, Ranking::Signed).unwrap();
            for class in 0..3 {
                let deg = g.edges.iter().filter(|&&(c, _, _)| c == class).count();
                assert!(deg <= k);
            }
            for comp in &g.components {
                for &f in &comp.features {
                    let deg = g.edges.iter().filter(|&&(_, ff, _)| ff == f).count();
                    assert!(deg >= 2);
                }
            }
        }
    }

    #[test]
    fn relevance_trivial_same_and_different_superclass() {
        let w = matrix(vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        let g = build_wk(&w, 1, Ranking::Signed).unwrap();
        assert_eq!(g.edge_pairs(), vec![(0, 0), (1, 0)]);
        let same = SuperclassMap::consecutive_pairs(&names(2));
        assert_eq!(relevance_score(&g, &same).unwrap(), 2.0);
        let diff = SuperclassMap::from_pairs(
            &[
                ("class_0".into(), "a".into()),
                ("class_1".into(), "b".into()),
            ],
            &names(2),
        )
        .unwrap();
        assert_eq!(relevance_score(&g, &diff).unwrap(), 0.0);
    }

    #[test]
    fn relevance_is_invariant_to_positive_column_rescaling() {
        let w = matrix(vec![
            vec![0.9, 0.1, 0.5],
            vec![0.8, 0.7, 0.4],
            vec![0.2, 0.6, 0.3],
        ]);
        let mut scaled_rows = vec![vec![0.0; 3]; 3];
        for (i, row) in scaled_rows.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                *cell = w.data()[i * 3 + c] * [2.0, 0.5, 7.0][c];
            }
        }
        let scaled = matrix(scaled_rows);
        let map = SuperclassMap::consecutive_pairs(&names(3));
        for k in 1..=3 {
            let a = build_wk(&w, k, Ranking::Signed).unwrap();
            let b = build_wk(&scaled, k, Ranking::Signed).unwrap();
            assert_eq!(a.edge_pairs(), b.edge_pairs());
            assert_eq!(
                relevance_score(&a, &map).unwrap(),
                relevance_score(&b, &map).unwrap()
            );
        }
    }

    #[test]
    fn components_of_empty_edge_set() {
        assert!(connected_components(&[]).is_empty());
    }

    #[test]
    fn minimal_path_is_one_component() {
        let comps = connected_components(&[(0, 5), (2, 5)]);
        assert_eq!(comps.len(), 1);
        assert_eq!(comps[0].label, 0);
        assert_eq!(comps[0].classes, vec![0, 2]);
        assert_eq!(comps[0].features, vec![5]);
    }

    #[test]
    fn export_import_roundtrip() {
        let w = matrix(vec![
            vec![0.9, 0.8, 0.1],
            vec![0.25, 0.7, 0.6],
            vec![-0.125, 0.6, 0.55],
        ]);
        let g = build_wk(&w, 2, Ranking::Signed).unwrap();
        assert!(!g.edges.is_empty());
        let mut buf = Vec::new();
        export_graph(&g, &names(3), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let back: Vec<(usize, usize, f64)> = import_graph(&text, &names(3)).unwrap();
        assert_eq!(back, g.edges);
    }

    #[test]
    fn export_of_empty_graph_is_header_only() {
        let w = matrix(vec![vec![1.0, 0.0], vec![0.0, 1.0]]);
        let g = build_wk(&w, 1, Ranking::Signed).unwrap();
        let mut buf = Vec::new();
        export_graph(&g, &names(2), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let data_lines: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty() && *l != "class,feature,weight")
            .collect();
        assert!(data_lines.is_empty());
    }

    #[test]
    fn superclass_map_parsing_and_errors() {
        let text = "# taxonomy\nclass_0, mammals\nclass_1,mammals\n\nclass_2, fish\n";
        let map = SuperclassMap::parse_text(text, &names(3)).unwrap();
        assert_eq!(map.superclass_names, vec!["mammals", "fish"]);
        assert_eq!(map.assignment, vec![0, 0, 1]);
        assert!(map.same_superclass(0, 1));
        assert!(!map.same_superclass(0, 2));
        assert!(SuperclassMap::parse_text("class_0,a\n", &names(2)).is_err());
        assert!(SuperclassMap::parse_text("junk line\n", &names(1)).is_err());
        let dup = "class_0,a\nclass_0,b\nclass_1,a\n";
        assert!(SuperclassMap::parse_text(dup, &names(2)).is_err());
    }

    #[test]
    fn summary_serializes_the_headline_numbers() {
        let w = matrix(vec![vec![1.0, 1.0], vec![0.0, 0.0]]);
        let g = build_wk(&w, 1, Ranking::Signed).unwrap();
        let map = SuperclassMap::consecutive_pairs(&names(2));
        let s = RelevanceSummary::new(&g, &map).unwrap();
        assert_eq!(s.n_edges, 2);
        assert_eq!(s.n_components, 1);
        assert_eq!(s.relevance, 2.0);
        let json = s.to_json().unwrap();
        assert!(json.contains("\"relevance\": 2.0"));
        assert_eq!(default_k_grid(), (1..=10).collect::<Vec<_>>());
    }
}
