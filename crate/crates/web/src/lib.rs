//! WebAssembly bindings for the demo page in `www/`.
//!
//! Every export returns a JSON string. Failures come back as
//! `{"error": "..."}` so the page can show them next to the plot.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use tagcn::filters::apply_poly_filter;
use tagcn::graph::{build_graph, make_cyclic_graph};
use tagcn::shift::{normalize, OperatorKind};
use tagcn::spectral::{spectral_decompose, spectral_filter_response};
use tagcn::theory::{convergence_report, random_aperiodic_graph, MonomialStackSpec};
use wasm_bindgen::prelude::*;

const MAX_NODES: usize = 256;
const MAX_LAYERS: usize = 2000;

fn respond(r: Result<Value, String>) -> String {
    match r {
        Ok(v) => v.to_string(),
        Err(e) => json!({ "error": e }).to_string(),
    }
}

fn parse_coeffs(s: &str) -> Result<Vec<f64>, String> {
    let coeffs: Vec<f64> = s
        .split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|_| format!("bad coefficient `{t}`")))
        .collect::<Result<_, _>>()?;
    if coeffs.is_empty() || coeffs.len() > 16 || coeffs.iter().any(|c| !c.is_finite()) {
        return Err("give between 1 and 16 finite coefficients".into());
    }
    Ok(coeffs)
}

fn check_nodes(n: usize, min: usize) -> Result<(), String> {
    if n < min || n > MAX_NODES {
        return Err(format!("node count must be in {min}..={MAX_NODES}"));
    }
    Ok(())
}

/// Frequency response of `sum_k g_k A^k` on the directed cyclic graph,
/// next to the classical DTFT of the coefficients at the same frequencies.
pub fn cyclic_response_value(n: usize, coeffs: &str) -> Result<Value, String> {
    check_nodes(n, 2)?;
    let coeffs = parse_coeffs(coeffs)?;
    let g = make_cyclic_graph(n).map_err(|e| e.to_string())?;
    let s = normalize(&g, OperatorKind::Raw).map_err(|e| e.to_string())?;
    let dec = spectral_decompose(&s).map_err(|e| e.to_string())?;
    let response = spectral_filter_response(&coeffs, &dec);
    let tau = std::f64::consts::TAU;
    let mut points: Vec<Value> = Vec::with_capacity(n);
    let mut max_dev: f64 = 0.0;
    for (lambda, h) in dec.eigenvalues().iter().zip(&response) {
        // lambda = exp(-j 2 pi f)
        let f = (-lambda.im.atan2(lambda.re) / tau).rem_euclid(1.0);
        let (mut re, mut im) = (0.0, 0.0);
        for (k, c) in coeffs.iter().enumerate() {
            re += c * (tau * f * k as f64).cos();
            im -= c * (tau * f * k as f64).sin();
        }
        max_dev = max_dev.max(((h.re - re).powi(2) + (h.im - im).powi(2)).sqrt());
        points.push(json!({ "freq": f, "re": h.re, "im": h.im, "mag": h.norm(), "dtft_re": re, "dtft_im": im }));
    }
    points.sort_by(|a, b| a["freq"].as_f64().unwrap_or(0.0).total_cmp(&b["freq"].as_f64().unwrap_or(0.0)));
    Ok(json!({ "points": points, "max_deviation": max_dev }))
}

/// Cosine between each layer's output and the dominant eigenvector for a
/// random connected graph and random positive gains.
pub fn convergence_curve_value(nodes: usize, layers: usize, seed: u32, zero_gain_layer: usize) -> Result<Value, String> {
    check_nodes(nodes, 3)?;
    if layers == 0 || layers > MAX_LAYERS {
        return Err(format!("layer count must be in 1..={MAX_LAYERS}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(u64::from(seed));
    let g = random_aperiodic_graph(nodes, 0.3, &mut rng).map_err(|e| e.to_string())?;
    let s = normalize(&g, OperatorKind::SymNormalized).map_err(|e| e.to_string())?;
    let mut gains: Vec<f64> = (0..layers).map(|_| rng.random_range(0.5..1.5)).collect();
    if zero_gain_layer >= 2 && zero_gain_layer <= layers {
        gains[zero_gain_layer - 1] = 0.0;
    }
    let x: Vec<f64> = (0..nodes).map(|_| rng.random_range(0.1..1.0)).collect();
    let spec = MonomialStackSpec::new(gains, vec![1; layers]).map_err(|e| e.to_string())?;
    let report = convergence_report(&spec, &s, &x).map_err(|e| e.to_string())?;
    Ok(json!({
        "cosines": report.cosine_to_v1_per_layer,
        "final_cosine": report.final_cosine,
        "dominant_eigenvalue": report.dominant_eigenvalue,
    }))
}

/// Filters a test signal on an undirected ring with `sum_k g_k A^k`, both by
/// repeated shifts and through the graph Fourier transform.
pub fn ring_filter_value(n: usize, coeffs: &str, signal: &str) -> Result<Value, String> {
    check_nodes(n, 3)?;
    let coeffs = parse_coeffs(coeffs)?;
    let edges: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect();
    let g = build_graph(&edges, n, false).map_err(|e| e.to_string())?;
    let s = normalize(&g, OperatorKind::SymNormalized).map_err(|e| e.to_string())?;
    let x: Vec<f64> = match signal {
        "impulse" => (0..n).map(|i| if i == n / 2 { 1.0 } else { 0.0 }).collect(),
        "step" => (0..n).map(|i| if i < n / 2 { 1.0 } else { -1.0 }).collect(),
        "noise" => {
            let mut rng = ChaCha8Rng::seed_from_u64(7);
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
        }
        "cosine" => (0..n)
            .map(|i| (std::f64::consts::TAU * 3.0 * i as f64 / n as f64).cos())
            .collect(),
        other => return Err(format!("unknown signal `{other}`")),
    };
    let y = apply_poly_filter(&coeffs, &s, &x).map_err(|e| e.to_string())?;
    let dec = spectral_decompose(&s).map_err(|e| e.to_string())?;
    let y_spec = dec.filter(&coeffs, &x).map_err(|e| e.to_string())?;
    let deviation = y.iter().zip(&y_spec).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    Ok(json!({ "input": x, "output": y, "spectral_deviation": deviation }))
}

#[wasm_bindgen]
pub fn cyclic_response(n: usize, coeffs: &str) -> String {
    respond(cyclic_response_value(n, coeffs))
}

#[wasm_bindgen]
pub fn convergence_curve(nodes: usize, layers: usize, seed: u32, zero_gain_layer: usize) -> String {
    respond(convergence_curve_value(nodes, layers, seed, zero_gain_layer))
}

#[wasm_bindgen]
pub fn ring_filter(n: usize, coeffs: &str, signal: &str) -> String {
    respond(ring_filter_value(n, coeffs, signal))
}
