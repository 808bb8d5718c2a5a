//! Weight-file contract with external trainers: files written from plain JSON
//! load, and a straightforward re-implementation of the forward pass agrees
//! with the runtime.

use gridse::gnn::{infer_centralized, load_model, load_model_file, NodeFeatures, FEATURE_DIM};
use gridse::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

fn random_document(rng: &mut ChaCha8Rng, k: usize, hidden: usize, activation: &str) -> Value {
    let mut mat = |len: usize| -> Vec<f64> { (0..len).map(|_| rng.random_range(-0.6..0.6)).collect() };
    let layers: Vec<Value> = (0..k)
        .map(|l| {
            let input = if l == 0 { FEATURE_DIM } else { hidden };
            json!({"w_self": mat(hidden * input), "w_neigh": mat(hidden * input), "bias": mat(hidden)})
        })
        .collect();
    json!({
        "format_version": 1, "k": k, "input_dim": FEATURE_DIM, "hidden_dim": hidden,
        "activation": activation, "layers": layers, "w_out": mat(2 * hidden), "b_out": mat(2)
    })
}

fn floats(v: &Value) -> Vec<f64> {
    v.as_array().unwrap().iter().map(|x| x.as_f64().unwrap()).collect()
}

/// Row-major `W x` on a flat matrix.
fn matvec(w: &[f64], x: &[f64]) -> Vec<f64> {
    w.chunks(x.len()).map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
}

fn reference_forward(doc: &Value, adjacency: &[Vec<usize>], features: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let act = |x: f64| match doc["activation"].as_str().unwrap() {
        "relu" => x.max(0.0),
        "tanh" => x.tanh(),
        _ => x,
    };
    let mut h: Vec<Vec<f64>> = features.to_vec();
    for layer in doc["layers"].as_array().unwrap() {
        let (ws, wn, b) = (floats(&layer["w_self"]), floats(&layer["w_neigh"]), floats(&layer["bias"]));
        h = (0..h.len())
            .map(|u| {
                let width = h[u].len();
                let mut mean = vec![0.0; width];
                for &v in &adjacency[u] {
                    for i in 0..width {
                        mean[i] += h[v][i] / adjacency[u].len() as f64;
                    }
                }
                let a = matvec(&ws, &h[u]);
                let c = matvec(&wn, &mean);
                (0..b.len()).map(|i| act(a[i] + c[i] + b[i])).collect()
            })
            .collect();
    }
    let (wo, bo) = (floats(&doc["w_out"]), floats(&doc["b_out"]));
    h.iter()
        .map(|x| {
            let y = matvec(&wo, x);
            [y[0] + bo[0], y[1] + bo[1]]
        })
        .collect()
}

fn random_graph(rng: &mut ChaCha8Rng, n: usize) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); n];
    for v in 1..n {
        let u = rng.random_range(0..v);
        adj[u].push(v);
        adj[v].push(u);
    }
    for _ in 0..n / 2 {
        let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
        if a != b && !adj[a].contains(&b) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for l in &mut adj {
        l.sort_unstable();
    }
    adj
}

#[test]
fn runtime_agrees_with_reference_forward_on_random_inputs() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let mut worst: f64 = 0.0;
    for trial in 0..100 {
        let act = ["identity", "relu", "tanh"][trial % 3];
        let doc = random_document(&mut rng, 1 + trial % 4, 4 + trial % 13, act);
        let model = load_model(&doc.to_string()).unwrap();
        let n = rng.random_range(1..20);
        let adjacency = random_graph(&mut rng, n);
        let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..FEATURE_DIM).map(|_| rng.random_range(-1.5..1.5)).collect()).collect();
        let features = NodeFeatures {
            rows: rows.iter().map(|r| r.as_slice().try_into().unwrap()).collect(),
        };
        let got = infer_centralized(&model, &adjacency, &features).unwrap();
        for (u, want) in reference_forward(&doc, &adjacency, &rows).iter().enumerate() {
            let v = got.voltage(u);
            worst = worst.max((v.re - want[0]).abs()).max((v.im - want[1]).abs());
        }
    }
    assert!(worst <= 1e-12, "max deviation {worst:e}");
}

#[test]
fn files_on_disk_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let doc = random_document(&mut rng, 3, 8, "tanh");
    std::fs::write(&path, serde_json::to_string_pretty(&doc).unwrap()).unwrap();
    let model = load_model_file(&path).unwrap();
    assert_eq!(model.k(), 3);
    assert_eq!(load_model(&model.to_json()).unwrap(), model);
    assert!(matches!(load_model_file(dir.path().join("absent.json")), Err(Error::Io { .. })));
}

#[test]
fn malformed_files_are_rejected() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let good = random_document(&mut rng, 2, 4, "relu");

    let mut newer = good.clone();
    newer["format_version"] = json!(2);
    assert!(matches!(load_model(&newer.to_string()), Err(Error::ModelVersion { found: 2, expected: 1 })));

    let mut extra = good.clone();
    extra["dropout"] = json!(0.1);
    assert!(matches!(load_model(&extra.to_string()), Err(Error::ModelFormat(_))));

    let mut short = good.clone();
    short["layers"][1]["w_neigh"].as_array_mut().unwrap().pop();
    assert!(matches!(load_model(&short.to_string()), Err(Error::Dimension(_))));

    let mut k_mismatch = good.clone();
    k_mismatch["k"] = json!(3);
    assert!(matches!(load_model(&k_mismatch.to_string()), Err(Error::Dimension(_))));

    let mut bad_act = good.clone();
    bad_act["activation"] = json!("gelu");
    assert!(load_model(&bad_act.to_string()).is_err());

    let text = good.to_string();
    assert!(matches!(load_model(&text[..text.len() / 2]), Err(Error::ModelFormat(_))));
}
