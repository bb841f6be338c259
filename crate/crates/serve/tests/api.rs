use std::collections::BTreeSet;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use geocon::consensus::{CountyVotes, ModelVote, VoteTable};
use geocon::graphs::{Centrality, DistanceMatrix};
use geocon::pipeline::{graph, ingest, votes_file_name, PipelineConfig};
use geocon::synth::{generate, SynthConfig};
use geocon::viz_stats::{quantile_bins, trend_line, TrendLine};
use geocon::{CountyGraph, GraphKind};
use geocon_serve::{handle, ResultStore};
use serde_json::Value;

fn fixture(dir: &Path) -> PipelineConfig {
    let state = generate(&SynthConfig { counties: 10, signal: 2, days: 40, ..SynthConfig::default() }).unwrap();
    state.write(&dir.join("in"), None).unwrap();
    let cfg = PipelineConfig::load(&dir.join("in/config.toml"), &dir.join("out")).unwrap();
    ingest(&cfg).unwrap();
    graph(&cfg).unwrap();

    let panel = geocon::pipeline::load_panel(&cfg).unwrap();
    let table = VoteTable {
        state: "99".into(),
        factor: "aod".into(),
        graph_kind: GraphKind::Border,
        alpha: 0.1,
        members: vec!["a".into(), "b".into()],
        failed_runs: 0,
        counties: panel
            .county_order
            .iter()
            .enumerate()
            .map(|(i, f)| CountyVotes {
                fips: f.clone(),
                votes: i % 3,
                models: ["a", "b"]
                    .iter()
                    .enumerate()
                    .map(|(m, name)| ModelVote {
                        name: name.to_string(),
                        p: if m < i % 3 { 0.01 } else { 0.6 },
                        significant: m < i % 3,
                        rmse_base: 1.0,
                        rmse_factor: 0.9,
                    })
                    .collect(),
            })
            .collect(),
    };
    let path = cfg.state_dir().join("votes").join(votes_file_name("aod", GraphKind::Border, 0.1));
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(path, serde_json::to_string(&table).unwrap()).unwrap();
    cfg
}

fn get(store: &ResultStore, path: &str, query: &str) -> (u16, Value) {
    let r = handle(store, path, query);
    (r.status, serde_json::from_str(&r.body).unwrap())
}

#[test]
fn empty_store_lists_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let store = ResultStore::load(dir.path()).unwrap();
    let (status, body) = get(&store, "/api/states", "");
    assert_eq!(status, 200);
    assert_eq!(body, serde_json::json!([]));
    assert!(ResultStore::load(&dir.path().join("absent")).is_err());
}

#[test]
fn endpoints_answer_and_errors_are_machine_readable() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let store = ResultStore::load(&cfg.out).unwrap();

    let (status, body) = get(&store, "/api/states", "");
    assert_eq!(status, 200);
    assert_eq!(body[0]["state"], "99");
    assert_eq!(body[0]["counties"], 10);
    assert_eq!(body[0]["votes"][0]["factor"], "aod");

    let (status, body) = get(&store, "/api/states/99/counties", "");
    assert_eq!(status, 200);
    assert_eq!(body.as_array().unwrap().len(), 10);
    assert!(body[0]["summary"]["hospitalizations_per100k"].is_number());
    assert!(body[0]["population"].is_number());

    for (path, query, code) in [
        ("/api/states/42/counties", "", "unknown_state"),
        ("/api/states/99/votes", "factor=humidity", "unknown_votes"),
        ("/api/states/99/votes", "factor=aod&kind=socio", "unknown_votes"),
        ("/api/states/99/variables/nope", "", "unknown_variable"),
        ("/api/states/99/elsewhere", "", "unknown_endpoint"),
    ] {
        let (status, body) = get(&store, path, query);
        assert_eq!((status, body["error"].as_str().unwrap()), (404, code), "{path}?{query}");
    }
    for (path, query) in [
        ("/api/states/99/votes", ""),
        ("/api/states/99/votes", "factor=aod&alpha=x"),
        ("/api/states/99/network", "kind=roads"),
        ("/api/states/99/network", "kind=border&threshold=1"),
        ("/api/states/99/network", "kind=socio&threshold=-1"),
        ("/api/states/99/variables/hospitalizations_per100k", "bins=1"),
        ("/api/states/99/scatter", "x=aod"),
    ] {
        let (status, body) = get(&store, path, query);
        assert_eq!((status, body["error"].as_str().unwrap()), (400, "bad_parameter"), "{path}?{query}");
    }
}

#[test]
fn votes_round_trip_with_aggregate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let store = ResultStore::load(&cfg.out).unwrap();
    let r = handle(&store, "/api/states/99/votes", "factor=aod&kind=border&alpha=0.1");
    assert_eq!(r.status, 200);
    let body: Value = serde_json::from_str(&r.body).unwrap();
    let table: VoteTable = serde_json::from_value(body["table"].clone()).unwrap();
    let votes: Vec<usize> = table.counties.iter().map(|c| c.votes).collect();
    assert_eq!(body["aggregate"]["total"], votes.iter().sum::<usize>());
    let hist: Vec<usize> = serde_json::from_value(body["aggregate"]["histogram"].clone()).unwrap();
    assert_eq!(hist.iter().sum::<usize>(), 10);
    assert_eq!(hist, vec![4, 3, 3]);
    // Repeated requests give identical bytes.
    assert_eq!(handle(&store, "/api/states/99/votes", "factor=aod&kind=border&alpha=0.1"), r);
}

#[test]
fn socio_threshold_edges_grow_with_the_threshold() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let store = ResultStore::load(&cfg.out).unwrap();
    let matrix = &store.states["99"].distance;
    let matrix: &DistanceMatrix = matrix.as_ref().unwrap();

    let mut previous: BTreeSet<(String, String)> = BTreeSet::new();
    for d in [0.0, 0.2, 0.5, 0.8, 1.2, 2.0, 10.0] {
        let (status, body) = get(&store, "/api/states/99/network", &format!("kind=socio&threshold={d}"));
        assert_eq!(status, 200);
        let g: CountyGraph = serde_json::from_value(body["graph"].clone()).unwrap();
        let edges: BTreeSet<(String, String)> =
            g.edge_set().into_iter().map(|(a, b)| (a.to_string(), b.to_string())).collect();
        assert!(edges.is_superset(&previous), "threshold {d}");
        // Brute force over the stored distances.
        let n = matrix.len();
        let expected = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).filter(|&(i, j)| matrix.get(i, j) <= d).count();
        assert_eq!(edges.len(), expected);
        let centrality: Vec<Centrality> = serde_json::from_value(body["centrality"].clone()).unwrap();
        assert_eq!(centrality.len(), n);
        previous = edges;
    }
    assert_eq!(previous.len(), 45);

    let (status, body) = get(&store, "/api/states/99/network", "kind=border");
    assert_eq!(status, 200);
    let g: CountyGraph = serde_json::from_value(body["graph"].clone()).unwrap();
    assert_eq!(g.kind(), GraphKind::Border);
    assert_eq!(g.edges().len(), 13);
}

#[test]
fn variables_and_scatter_match_the_stat_helpers() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let store = ResultStore::load(&cfg.out).unwrap();
    let data = &store.states["99"];

    let (status, body) = get(&store, "/api/states/99/variables/hospitalizations_per100k", "bins=4");
    assert_eq!(status, 200);
    let values = data.variable("hospitalizations_per100k").unwrap();
    let binning = quantile_bins(&values, 4).unwrap();
    assert_eq!(body["binning"]["counts"], serde_json::to_value(geocon::viz_stats::histogram(&binning)).unwrap());
    assert_eq!(body["binning"]["breakpoints"], serde_json::to_value(&binning.breakpoints).unwrap());

    let (status, body) = get(&store, "/api/states/99/variables/socioeconomic_status", "");
    assert_eq!(status, 200);
    assert_eq!(body["binning"]["counts"].as_array().unwrap().len(), 5);

    let (status, body) = get(&store, "/api/states/99/scatter", "x=socioeconomic_status&y=hospitalizations_per100k");
    assert_eq!(status, 200);
    let trend: TrendLine = serde_json::from_value(body["trend"].clone()).unwrap();
    let expected = trend_line(&data.variable("socioeconomic_status").unwrap(), &values).unwrap();
    assert_eq!(trend, expected);
    assert_eq!(body["points"].as_array().unwrap().len(), 10);
}

#[test]
fn http_smoke() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = fixture(dir.path());
    let store = Arc::new(ResultStore::load(&cfg.out).unwrap());
    let rt = tokio::runtime::Builder::new_current_thread().enable_all().build().unwrap();
    let listener = rt.block_on(tokio::net::TcpListener::bind("127.0.0.1:0")).unwrap();
    let addr = listener.local_addr().unwrap();
    let server = std::thread::spawn(move || rt.block_on(geocon_serve::serve(store, listener)));

    let mut stream = std::net::TcpStream::connect(addr).unwrap();
    write!(stream, "GET /api/states/99/votes?factor=aod HTTP/1.1\r\nHost: localhost\r\nConnection: close\r\n\r\n").unwrap();
    let mut raw = String::new();
    stream.read_to_string(&mut raw).unwrap();
    let (head, body) = raw.split_once("\r\n\r\n").unwrap();
    assert!(head.starts_with("HTTP/1.1 200"), "{head}");
    let head = head.to_ascii_lowercase();
    assert!(head.contains("access-control-allow-origin: *"));
    assert!(head.contains("content-type: application/json"));
    let body: Value = serde_json::from_str(body).unwrap();
    assert_eq!(body["table"]["factor"], "aod");
    assert!(!server.is_finished());
}
