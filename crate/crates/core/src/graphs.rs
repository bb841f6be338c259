//! County connectivity networks: shared borders and socioeconomic similarity.
//!
//! Both networks are static; only node features vary over time.

use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;
use std::fmt;
use std::io::{BufRead, BufReader, Read};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ingest::Fips;
use crate::ndiff::Neighborhood;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GraphKind {
    Border,
    Socio,
}

impl GraphKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GraphKind::Border => "border",
            GraphKind::Socio => "socio",
        }
    }
}

impl fmt::Display for GraphKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for GraphKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "border" => Ok(GraphKind::Border),
            "socio" | "socioeconomic" => Ok(GraphKind::Socio),
            other => Err(Error::invalid(format!("unknown graph kind {other:?}"))),
        }
    }
}

/// Undirected edge between node indices `a < b`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub weight: f64,
}

/// Undirected weighted county graph with no self-loops.
///
/// Serialized as `{"nodes": [fips...], "edges": [[i, j, weight]...], "kind": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "GraphJson", try_from = "GraphJson")]
pub struct CountyGraph {
    nodes: Vec<Fips>,
    edges: Vec<Edge>,
    kind: GraphKind,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    nodes: Vec<Fips>,
    edges: Vec<(usize, usize, f64)>,
    kind: GraphKind,
}

impl From<CountyGraph> for GraphJson {
    fn from(g: CountyGraph) -> Self {
        GraphJson {
            nodes: g.nodes,
            edges: g.edges.iter().map(|e| (e.a, e.b, e.weight)).collect(),
            kind: g.kind,
        }
    }
}

impl TryFrom<GraphJson> for CountyGraph {
    type Error = Error;
    fn try_from(j: GraphJson) -> Result<Self> {
        CountyGraph::new(j.nodes, j.edges, j.kind)
    }
}

impl CountyGraph {
    /// Builds a graph from arbitrary `(i, j, weight)` pairs. Pairs are
    /// normalized to `i < j`; self-loops are dropped and a repeated pair keeps
    /// its first weight.
    pub fn new(nodes: Vec<Fips>, pairs: impl IntoIterator<Item = (usize, usize, f64)>, kind: GraphKind) -> Result<Self> {
        let n = nodes.len();
        if nodes.iter().collect::<BTreeSet<_>>().len() != n {
            return Err(Error::invalid("graph nodes contain duplicates"));
        }
        let mut seen = BTreeMap::new();
        for (i, j, w) in pairs {
            if i >= n || j >= n {
                return Err(Error::invalid(format!("edge ({i}, {j}) out of range for {n} nodes")));
            }
            if !(w >= 0.0) {
                return Err(Error::invalid(format!("edge ({i}, {j}) has invalid weight {w}")));
            }
            if i == j {
                continue;
            }
            seen.entry((i.min(j), i.max(j))).or_insert(w);
        }
        let edges = seen.into_iter().map(|((a, b), weight)| Edge { a, b, weight }).collect();
        Ok(Self { nodes, edges, kind })
    }

    pub fn nodes(&self) -> &[Fips] {
        &self.nodes
    }

    /// Edges sorted by `(a, b)`.
    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn kind(&self) -> GraphKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.len()];
        for e in &self.edges {
            deg[e.a] += 1;
            deg[e.b] += 1;
        }
        deg
    }

    pub fn neighborhood(&self) -> Arc<Neighborhood> {
        Neighborhood::from_edges(self.len(), self.edges.iter().map(|e| (e.a, e.b)))
    }

    /// Edges whose weight is at most `threshold`.
    pub fn filter_by_weight(&self, threshold: f64) -> CountyGraph {
        CountyGraph {
            nodes: self.nodes.clone(),
            edges: self.edges.iter().copied().filter(|e| e.weight <= threshold).collect(),
            kind: self.kind,
        }
    }

    /// Set of edges as FIPS pairs, independent of node ordering.
    pub fn edge_set(&self) -> BTreeSet<(Fips, Fips)> {
        self.edges
            .iter()
            .map(|e| {
                let (x, y) = (self.nodes[e.a].clone(), self.nodes[e.b].clone());
                if x < y { (x, y) } else { (y, x) }
            })
            .collect()
    }
}

/// One line of the county adjacency file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AdjacencyRecord {
    pub county_name: String,
    pub fips: String,
    pub neighbor_name: String,
    pub neighbor_fips: String,
}

fn unquote(s: &str) -> &str {
    let s = s.trim();
    s.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(s)
}

/// Reads `county_name|fips|neighbor_name|neighbor_fips` records.
///
/// As in the census layout, a line with empty county fields continues the
/// previous county. Blank lines are skipped and a header line whose second
/// field is not numeric is ignored.
pub fn read_adjacency<R: Read>(reader: R) -> Result<Vec<AdjacencyRecord>> {
    let mut out = Vec::new();
    let mut current: Option<(String, String)> = None;
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('|').map(unquote).collect();
        if fields.len() != 4 {
            return Err(Error::Parse {
                line: i + 1,
                message: format!("expected 4 pipe-separated fields, got {}", fields.len()),
            });
        }
        if i == 0 && !fields[1].is_empty() && !fields[1].bytes().all(|b| b.is_ascii_digit()) {
            continue;
        }
        if !fields[1].is_empty() {
            current = Some((fields[0].to_string(), fields[1].to_string()));
        }
        let Some((name, fips)) = current.clone() else {
            return Err(Error::Parse {
                line: i + 1,
                message: "continuation line before any county".into(),
            });
        };
        out.push(AdjacencyRecord {
            county_name: name,
            fips,
            neighbor_name: fields[2].to_string(),
            neighbor_fips: fields[3].to_string(),
        });
    }
    Ok(out)
}

/// Result of a graph build that may drop unknown counties.
#[derive(Debug, Clone)]
pub struct GraphBuild {
    pub graph: CountyGraph,
    pub warnings: Vec<String>,
}

/// Builds the in-state shared-border graph over `county_order`.
///
/// Cross-state pairs are dropped. An in-state county that is not part of
/// `county_order` produces a warning and is left out.
pub fn build_border_graph(records: &[AdjacencyRecord], state: &str, county_order: &[Fips]) -> Result<GraphBuild> {
    if state.len() != 2 || !state.bytes().all(|b| b.is_ascii_digit()) {
        return Err(Error::invalid(format!("state prefix {state:?} must be 2 digits")));
    }
    let index: BTreeMap<&str, usize> = county_order.iter().enumerate().map(|(i, f)| (f.as_str(), i)).collect();
    let mut dropped = BTreeSet::new();
    let mut pairs = Vec::new();
    for r in records {
        let a = Fips::parse(&r.fips)?;
        let b = Fips::parse(&r.neighbor_fips)?;
        if a.state() != state || b.state() != state {
            continue;
        }
        match (index.get(a.as_str()), index.get(b.as_str())) {
            (Some(&i), Some(&j)) => pairs.push((i, j, 1.0)),
            (ia, ib) => {
                if ia.is_none() {
                    dropped.insert(a);
                }
                if ib.is_none() {
                    dropped.insert(b);
                }
            }
        }
    }
    let warnings: Vec<String> = dropped
        .iter()
        .map(|f| format!("county {f} is in the adjacency file but not in the panel; dropped"))
        .collect();
    for w in &warnings {
        log::warn!("{w}");
    }
    let graph = CountyGraph::new(county_order.to_vec(), pairs, GraphKind::Border)?;
    Ok(GraphBuild { graph, warnings })
}

/// The nine county-level socioeconomic indices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocioIndex {
    SocioeconomicStatus,
    HouseholdCompositionDisability,
    MinorityStatusLanguage,
    HousingTypeTransportation,
    OverallVulnerability,
    HistoricUndervaccination,
    SociodemographicBarriers,
    ResourceConstrainedHealthcare,
    HealthcareAccessibilityBarriers,
}

impl SocioIndex {
    pub const ALL: [SocioIndex; 9] = [
        SocioIndex::SocioeconomicStatus,
        SocioIndex::HouseholdCompositionDisability,
        SocioIndex::MinorityStatusLanguage,
        SocioIndex::HousingTypeTransportation,
        SocioIndex::OverallVulnerability,
        SocioIndex::HistoricUndervaccination,
        SocioIndex::SociodemographicBarriers,
        SocioIndex::ResourceConstrainedHealthcare,
        SocioIndex::HealthcareAccessibilityBarriers,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            SocioIndex::SocioeconomicStatus => "socioeconomic_status",
            SocioIndex::HouseholdCompositionDisability => "household_composition_disability",
            SocioIndex::MinorityStatusLanguage => "minority_status_language",
            SocioIndex::HousingTypeTransportation => "housing_type_transportation",
            SocioIndex::OverallVulnerability => "overall_vulnerability",
            SocioIndex::HistoricUndervaccination => "historic_undervaccination",
            SocioIndex::SociodemographicBarriers => "sociodemographic_barriers",
            SocioIndex::ResourceConstrainedHealthcare => "resource_constrained_healthcare",
            SocioIndex::HealthcareAccessibilityBarriers => "healthcare_accessibility_barriers",
        }
    }
}

fn squash(s: &str) -> String {
    s.chars().filter(|c| c.is_ascii_alphanumeric()).map(|c| c.to_ascii_lowercase()).collect()
}

impl FromStr for SocioIndex {
    type Err = Error;

    /// Accepts the snake_case names as well as the spelled-out titles
    /// ("Household Composition & Disability", "Overall Vulnerability Index").
    fn from_str(s: &str) -> Result<Self> {
        let key = squash(s);
        let key = key.strip_suffix("index").unwrap_or(&key);
        let key = key.strip_suffix("system").unwrap_or(key);
        SocioIndex::ALL
            .iter()
            .copied()
            .find(|i| squash(i.name()) == key)
            .ok_or_else(|| Error::invalid(format!("unknown socioeconomic index {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SocioVector {
    pub fips: Fips,
    pub indices: BTreeMap<SocioIndex, f64>,
}

impl SocioVector {
    pub fn complete(fips: Fips, values: [f64; 9]) -> Self {
        Self {
            fips,
            indices: SocioIndex::ALL.iter().copied().zip(values).collect(),
        }
    }

    /// Values in canonical index order; errors on a missing or non-finite index.
    pub fn values(&self) -> Result<[f64; 9]> {
        let mut out = [0.0; 9];
        for (slot, idx) in out.iter_mut().zip(SocioIndex::ALL) {
            match self.indices.get(&idx) {
                Some(v) if v.is_finite() => *slot = *v,
                _ => {
                    return Err(Error::MissingSocioIndex {
                        fips: self.fips.to_string(),
                        index: idx.name().to_string(),
                    })
                }
            }
        }
        Ok(out)
    }
}

#[derive(Debug, Deserialize)]
struct SocioRow {
    fips: String,
    index_name: String,
    value: f64,
}

/// Reads a `fips,index_name,value` file, one vector per county in FIPS order.
/// Completeness is checked when the vectors are used.
pub fn load_socio<R: Read>(reader: R) -> Result<Vec<SocioVector>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut by_county: BTreeMap<Fips, BTreeMap<SocioIndex, f64>> = BTreeMap::new();
    for (i, row) in rdr.deserialize::<SocioRow>().enumerate() {
        let row = row?;
        let fips = Fips::parse(&row.fips)?;
        let idx = row.index_name.parse::<SocioIndex>().map_err(|e| Error::Parse {
            line: i + 2,
            message: e.to_string(),
        })?;
        by_county.entry(fips).or_default().insert(idx, row.value);
    }
    Ok(by_county
        .into_iter()
        .map(|(fips, indices)| SocioVector { fips, indices })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SocioScaling {
    /// Each index standardized across the counties (population std).
    #[default]
    ZScore,
    None,
}

/// Symmetric `N × N` matrix with a zero diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub nodes: Vec<Fips>,
    /// Row-major.
    pub data: Vec<f64>,
}

impl DistanceMatrix {
    pub fn from_rows(nodes: Vec<Fips>, data: Vec<f64>) -> Result<Self> {
        let n = nodes.len();
        if data.len() != n * n {
            return Err(Error::shape("distance_matrix", format!("{} entries for {n} nodes", data.len())));
        }
        Ok(Self { nodes, data })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.len() + j]
    }
}

/// Euclidean distance between (optionally standardized) socioeconomic vectors.
pub fn socio_distance_matrix(vectors: &[SocioVector], scaling: SocioScaling) -> Result<DistanceMatrix> {
    let mut rows: Vec<[f64; 9]> = vectors.iter().map(SocioVector::values).collect::<Result<_>>()?;
    let n = rows.len();
    if scaling == SocioScaling::ZScore && n > 0 {
        for k in 0..9 {
            let mean = rows.iter().map(|r| r[k]).sum::<f64>() / n as f64;
            let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n as f64;
            let std = var.sqrt();
            for r in rows.iter_mut() {
                r[k] = if std > 0.0 { (r[k] - mean) / std } else { 0.0 };
            }
        }
    }
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = rows[i].iter().zip(&rows[j]).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            data[i * n + j] = d;
            data[j * n + i] = d;
        }
    }
    DistanceMatrix::from_rows(vectors.iter().map(|v| v.fips.clone()).collect(), data)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "rule")]
pub enum SocioRule {
    /// Union of each node's `k` nearest neighbors (ties to the lower index).
    TopK { k: usize },
    /// Every pair with distance at most `d`.
    Threshold { d: f64 },
}

impl Default for SocioRule {
    fn default() -> Self {
        SocioRule::TopK { k: 4 }
    }
}

pub fn build_socio_graph(matrix: &DistanceMatrix, rule: SocioRule) -> Result<CountyGraph> {
    let n = matrix.len();
    let mut pairs = Vec::new();
    match rule {
        SocioRule::TopK { k } => {
            if k < 1 || k >= n {
                return Err(Error::invalid(format!("top_k requires 1 <= k < N, got k={k}, N={n}")));
            }
            for i in 0..n {
                let mut others: Vec<usize> = (0..n).filter(|&j| j != i).collect();
                others.sort_by(|&a, &b| matrix.get(i, a).total_cmp(&matrix.get(i, b)).then(a.cmp(&b)));
                pairs.extend(others.into_iter().take(k).map(|j| (i, j, matrix.get(i, j))));
            }
        }
        SocioRule::Threshold { d } => {
            if !(d >= 0.0) {
                return Err(Error::invalid(format!("threshold must be >= 0, got {d}")));
            }
            for i in 0..n {
                for j in (i + 1)..n {
                    if matrix.get(i, j) <= d {
                        pairs.push((i, j, matrix.get(i, j)));
                    }
                }
            }
        }
    }
    CountyGraph::new(matrix.nodes.clone(), pairs, GraphKind::Socio)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Centrality {
    pub fips: Fips,
    pub index: usize,
    pub degree: usize,
    pub score: f64,
    /// Dense rank, 1 = most central; equal scores share a rank.
    pub rank: usize,
}

/// Degree centrality `degree / (N - 1)` in presentation order: by rank, then FIPS.
pub fn degree_centrality(graph: &CountyGraph) -> Result<Vec<Centrality>> {
    let n = graph.len();
    if n == 0 {
        return Err(Error::invalid("degree centrality of an empty graph"));
    }
    let degrees = graph.degrees();
    let mut distinct: Vec<usize> = degrees.clone();
    distinct.sort_unstable_by(|a, b| b.cmp(a));
    distinct.dedup();
    let mut out: Vec<Centrality> = degrees
        .iter()
        .enumerate()
        .map(|(i, &deg)| Centrality {
            fips: graph.nodes()[i].clone(),
            index: i,
            degree: deg,
            score: if n > 1 { deg as f64 / (n - 1) as f64 } else { 0.0 },
            rank: distinct.iter().position(|&d| d == deg).unwrap() + 1,
        })
        .collect();
    out.sort_by(|a, b| a.rank.cmp(&b.rank).then_with(|| a.fips.cmp(&b.fips)));
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fips(list: &[&str]) -> Vec<Fips> {
        list.iter().map(|s| Fips::parse(s).unwrap()).collect()
    }

    #[test]
    fn border_fixture_and_self_loop() {
        let text = "\"A County\"|48001|\"A County\"|48001\n\
                    \"A County\"|48001|\"B County\"|48003\n\
                    \"B County\"|48003|\"A County\"|48001\n\
                    ||\"C County\"|48005\n\
                    \"C County\"|48005|\"B County\"|48003\n\
                    \"C County\"|48005|\"Other\"|35001\n";
        let recs = read_adjacency(text.as_bytes()).unwrap();
        assert_eq!(recs[3].fips, "48003");
        let order = fips(&["48001", "48003", "48005"]);
        let b = build_border_graph(&recs, "48", &order).unwrap();
        let pairs: Vec<_> = b.graph.edges().iter().map(|e| (e.a, e.b, e.weight)).collect();
        assert_eq!(pairs, vec![(0, 1, 1.0), (1, 2, 1.0)]);
        assert!(b.warnings.is_empty());
    }

    #[test]
    fn border_drops_counties_missing_from_panel() {
        let text = "A|48001|B|48003\nB|48003|Z|48999\n";
        let recs = read_adjacency(text.as_bytes()).unwrap();
        let b = build_border_graph(&recs, "48", &fips(&["48001", "48003"])).unwrap();
        assert_eq!(b.graph.edges().len(), 1);
        assert_eq!(b.warnings.len(), 1);
        assert!(b.warnings[0].contains("48999"));

        let bad = read_adjacency("A|48001|B|48003\nA|4800X|B|48003\n".as_bytes()).unwrap();
        assert!(matches!(
            build_border_graph(&bad, "48", &fips(&["48003"])),
            Err(Error::InvalidFips(_))
        ));
    }

    #[test]
    fn socio_distance_closed_forms() {
        let mut e1 = [0.0; 9];
        e1[0] = 1.0;
        let mut e2 = [0.0; 9];
        e2[1] = 1.0;
        let v = vec![
            SocioVector::complete(Fips::parse("48001").unwrap(), e1),
            SocioVector::complete(Fips::parse("48003").unwrap(), e2),
            SocioVector::complete(Fips::parse("48005").unwrap(), e1),
        ];
        let m = socio_distance_matrix(&v, SocioScaling::None).unwrap();
        assert_eq!(m.get(0, 1), 2f64.sqrt());
        assert_eq!(m.get(0, 2), 0.0);
        assert_eq!(m.get(1, 1), 0.0);

        let mut partial = v[0].clone();
        partial.indices.remove(&SocioIndex::HistoricUndervaccination);
        match socio_distance_matrix(&[partial], SocioScaling::None) {
            Err(Error::MissingSocioIndex { fips, index }) => {
                assert_eq!(fips, "48001");
                assert_eq!(index, "historic_undervaccination");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn index_names_parse_from_titles() {
        assert_eq!(
            "Household Composition & Disability".parse::<SocioIndex>().unwrap(),
            SocioIndex::HouseholdCompositionDisability
        );
        assert_eq!(
            "Overall Vulnerability Index".parse::<SocioIndex>().unwrap(),
            SocioIndex::OverallVulnerability
        );
        assert_eq!(
            "Resource-Constrained Healthcare System".parse::<SocioIndex>().unwrap(),
            SocioIndex::ResourceConstrainedHealthcare
        );
        for i in SocioIndex::ALL {
            assert_eq!(i.name().parse::<SocioIndex>().unwrap(), i);
        }
    }

    fn line_matrix(points: &[f64]) -> DistanceMatrix {
        let n = points.len();
        let nodes = (0..n).map(|i| Fips::parse(&format!("48{:03}", 2 * i + 1)).unwrap()).collect();
        let data = (0..n * n).map(|k| (points[k / n] - points[k % n]).abs()).collect();
        DistanceMatrix::from_rows(nodes, data).unwrap()
    }

    #[test]
    fn top_k_on_collinear_points() {
        let m = line_matrix(&[0.0, 1.0, 3.0]);
        let g = build_socio_graph(&m, SocioRule::TopK { k: 1 }).unwrap();
        let pairs: Vec<_> = g.edges().iter().map(|e| (e.a, e.b, e.weight)).collect();
        assert_eq!(pairs, vec![(0, 1, 1.0), (1, 2, 2.0)]);
        assert!(build_socio_graph(&m, SocioRule::TopK { k: 3 }).is_err());
        assert!(build_socio_graph(&m, SocioRule::TopK { k: 0 }).is_err());
        assert!(build_socio_graph(&m, SocioRule::Threshold { d: -1.0 }).is_err());
    }

    #[test]
    fn infinite_threshold_is_complete() {
        let m = line_matrix(&[0.0, 1.0, 3.0, 7.0, 8.0]);
        let g = build_socio_graph(&m, SocioRule::Threshold { d: f64::INFINITY }).unwrap();
        assert_eq!(g.edges().len(), 5 * 4 / 2);
    }

    #[test]
    fn centrality_path_and_complete() {
        let order = fips(&["48001", "48003", "48005"]);
        let path = CountyGraph::new(order.clone(), [(0, 1, 1.0), (1, 2, 1.0)], GraphKind::Border).unwrap();
        let c = degree_centrality(&path).unwrap();
        assert_eq!(c[0].fips.as_str(), "48003");
        assert_eq!((c[0].rank, c[0].score), (1, 1.0));
        assert_eq!((c[1].fips.as_str(), c[1].rank, c[1].score), ("48001", 2, 0.5));
        assert_eq!((c[2].fips.as_str(), c[2].rank, c[2].score), ("48005", 2, 0.5));

        let complete = CountyGraph::new(order, [(0, 1, 1.0), (1, 2, 1.0), (0, 2, 1.0)], GraphKind::Border).unwrap();
        assert!(degree_centrality(&complete).unwrap().iter().all(|c| c.score == 1.0 && c.rank == 1));

        let single = CountyGraph::new(fips(&["48001"]), [], GraphKind::Border).unwrap();
        assert_eq!(degree_centrality(&single).unwrap()[0].score, 0.0);
    }

    #[test]
    fn graph_json_shape() {
        let g = CountyGraph::new(fips(&["48001", "48003"]), [(1, 0, 2.5)], GraphKind::Socio).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert_eq!(s, r#"{"nodes":["48001","48003"],"edges":[[0,1,2.5]],"kind":"socio"}"#);
        let back: CountyGraph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
    }
}
