use std::collections::BTreeMap;

use geocon::consensus::{aggregate_votes, VoteAggregate, VoteTable};
use geocon::graphs::{build_socio_graph, degree_centrality, Centrality, SocioRule};
use geocon::ingest::Fips;
use geocon::viz_stats::{quantile_bins, trend_line, BinningPayload, TrendLine, DEFAULT_BINS};
use geocon::{CountyGraph, GraphKind};
use serde::Serialize;

use crate::store::{ResultStore, StateData, VoteKey};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub body: String,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    message: String,
}

fn error(status: u16, code: &str, message: impl Into<String>) -> Response {
    let body = serde_json::to_string(&ErrorBody { error: code, message: message.into() }).expect("error body");
    Response { status, body }
}

fn ok<T: Serialize>(value: &T) -> Response {
    match serde_json::to_string(value) {
        Ok(body) => Response { status: 200, body },
        Err(e) => error(500, "internal", e.to_string()),
    }
}

type Reply = std::result::Result<Response, Response>;

fn bad(message: impl Into<String>) -> Response {
    error(400, "bad_parameter", message)
}

struct Query(BTreeMap<String, String>);

impl Query {
    fn parse(raw: &str) -> Self {
        Query(form_urlencoded::parse(raw.as_bytes()).into_owned().collect())
    }

    fn get(&self, key: &str) -> Option<&str> {
        self.0.get(key).map(String::as_str)
    }

    fn require(&self, key: &str) -> std::result::Result<&str, Response> {
        self.get(key).ok_or_else(|| bad(format!("missing query parameter {key:?}")))
    }

    fn kind(&self) -> std::result::Result<Option<GraphKind>, Response> {
        self.get("kind").map(|k| k.parse().map_err(|_| bad(format!("kind must be border or socio, got {k:?}")))).transpose()
    }

    fn number(&self, key: &str) -> std::result::Result<Option<f64>, Response> {
        self.get(key)
            .map(|v| match v.parse::<f64>() {
                Ok(x) if x.is_finite() => Ok(x),
                _ => Err(bad(format!("{key} must be a finite number, got {v:?}"))),
            })
            .transpose()
    }
}

/// Answers one GET request. `path` excludes the query string.
pub fn handle(store: &ResultStore, path: &str, query: &str) -> Response {
    let q = Query::parse(query);
    let parts: Vec<&str> = path.trim_end_matches('/').split('/').skip(1).collect();
    let reply = match parts.as_slice() {
        ["api", "states"] => Ok(states(store)),
        ["api", "states", s, rest @ ..] => match store.states.get(*s) {
            None => Err(error(404, "unknown_state", format!("state {s:?} is not loaded"))),
            Some(data) => match rest {
                ["counties"] => Ok(counties(data)),
                ["network"] => network(data, &q),
                ["variables", var] => variable(data, var, &q),
                ["votes"] => votes(data, &q),
                ["scatter"] => scatter(data, &q),
                _ => Err(error(404, "unknown_endpoint", format!("no endpoint at {path}"))),
            },
        },
        _ => Err(error(404, "unknown_endpoint", format!("no endpoint at {path}"))),
    };
    reply.unwrap_or_else(|e| e)
}

#[derive(Serialize)]
struct StateEntry<'a> {
    state: &'a str,
    counties: usize,
    variables: Vec<String>,
    graphs: Vec<GraphKind>,
    votes: Vec<&'a VoteKey>,
}

fn states(store: &ResultStore) -> Response {
    let list: Vec<StateEntry> = store
        .states
        .iter()
        .map(|(s, d)| StateEntry {
            state: s,
            counties: d.panel.nodes(),
            variables: d.variable_names(),
            graphs: d.graphs.keys().copied().collect(),
            votes: d.votes.iter().map(|(k, _)| k).collect(),
        })
        .collect();
    ok(&list)
}

#[derive(Serialize)]
struct CountyEntry<'a> {
    fips: &'a Fips,
    name: &'a str,
    population: Option<u64>,
    /// Time mean of each panel variable.
    summary: BTreeMap<&'a str, f64>,
}

fn counties(data: &StateData) -> Response {
    let days = data.panel.days() as f64;
    let list: Vec<CountyEntry> = data
        .counties
        .iter()
        .map(|c| {
            let n = data.panel.county_index(c.fips.as_str());
            let summary = n
                .map(|n| {
                    data.panel
                        .variable_order
                        .iter()
                        .enumerate()
                        .map(|(f, v)| (v.as_str(), data.panel.column(n, f).iter().sum::<f64>() / days))
                        .collect()
                })
                .unwrap_or_default();
            CountyEntry { fips: &c.fips, name: &c.name, population: c.population, summary }
        })
        .collect();
    ok(&list)
}

#[derive(Serialize)]
struct NetworkBody<'a> {
    kind: GraphKind,
    threshold: Option<f64>,
    graph: &'a CountyGraph,
    centrality: &'a [Centrality],
}

fn network(data: &StateData, q: &Query) -> Reply {
    let kind = q.kind()?.unwrap_or(GraphKind::Border);
    let threshold = q.number("threshold")?;
    let missing = || error(404, "unknown_graph", format!("no {kind} graph for this state"));
    match (kind, threshold) {
        (GraphKind::Border, Some(_)) => Err(bad("threshold applies to the socio network only")),
        (_, Some(d)) if d < 0.0 => Err(bad("threshold must be non-negative")),
        (GraphKind::Socio, Some(d)) => {
            let matrix = data.distance.as_ref().ok_or_else(missing)?;
            let graph = build_socio_graph(matrix, SocioRule::Threshold { d }).map_err(|e| bad(e.to_string()))?;
            let centrality = degree_centrality(&graph).map_err(|e| bad(e.to_string()))?;
            Ok(ok(&NetworkBody { kind, threshold, graph: &graph, centrality: &centrality }))
        }
        (_, None) => {
            let graph = data.graphs.get(&kind).ok_or_else(missing)?;
            let computed;
            let centrality = match data.centrality.get(&kind) {
                Some(c) => c.as_slice(),
                None => {
                    computed = degree_centrality(graph).map_err(|e| bad(e.to_string()))?;
                    computed.as_slice()
                }
            };
            Ok(ok(&NetworkBody { kind, threshold: None, graph, centrality }))
        }
    }
}

fn lookup_variable(data: &StateData, name: &str) -> std::result::Result<Vec<(Fips, f64)>, Response> {
    data.variable(name).ok_or_else(|| error(404, "unknown_variable", format!("variable {name:?} is not available")))
}

#[derive(Serialize)]
struct VariableBody<'a> {
    variable: &'a str,
    values: BTreeMap<Fips, f64>,
    binning: BinningPayload,
}

fn variable(data: &StateData, var: &str, q: &Query) -> Reply {
    let k = match q.get("bins") {
        None => DEFAULT_BINS,
        Some(s) => s.parse::<usize>().ok().filter(|&k| k >= 2).ok_or_else(|| bad(format!("bins must be an integer >= 2, got {s:?}")))?,
    };
    let values = lookup_variable(data, var)?;
    let binning = quantile_bins(&values, k).map_err(|e| bad(e.to_string()))?;
    Ok(ok(&VariableBody { variable: var, values: values.into_iter().collect(), binning: (&binning).into() }))
}

#[derive(Serialize)]
struct VotesBody<'a> {
    table: &'a VoteTable,
    aggregate: VoteAggregate,
}

fn votes(data: &StateData, q: &Query) -> Reply {
    let factor = q.require("factor")?;
    let kind = q.kind()?;
    let alpha = q.number("alpha")?;
    let matches: Vec<&(VoteKey, VoteTable)> = data
        .votes
        .iter()
        .filter(|(k, _)| k.factor == factor && kind.is_none_or(|g| g == k.graph_kind) && alpha.is_none_or(|a| a == k.alpha))
        .collect();
    match matches.as_slice() {
        [] => Err(error(404, "unknown_votes", format!("no vote table for factor {factor:?} with the given kind and alpha"))),
        [(_, table)] => Ok(ok(&VotesBody { table, aggregate: aggregate_votes(table) })),
        _ => Err(bad(format!("{} vote tables match; specify kind and alpha", matches.len()))),
    }
}

#[derive(Serialize)]
struct Point<'a> {
    fips: &'a Fips,
    x: f64,
    y: f64,
}

#[derive(Serialize)]
struct ScatterBody<'a> {
    x: &'a str,
    y: &'a str,
    points: Vec<Point<'a>>,
    trend: TrendLine,
}

fn scatter(data: &StateData, q: &Query) -> Reply {
    let (xn, yn) = (q.require("x")?, q.require("y")?);
    let xs = lookup_variable(data, xn)?;
    let ys = lookup_variable(data, yn)?;
    let trend = trend_line(&xs, &ys).map_err(|e| bad(e.to_string()))?;
    let by_fips: BTreeMap<&Fips, f64> = ys.iter().map(|(f, v)| (f, *v)).collect();
    let points = xs.iter().filter_map(|(f, x)| by_fips.get(f).map(|y| Point { fips: f, x: *x, y: *y })).collect();
    Ok(ok(&ScatterBody { x: xn, y: yn, points, trend }))
}
