#![allow(dead_code)]

use std::io::{Read, Write};
use std::net::TcpListener;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use asl_core::env::{gen_scenarios, Family, Scenario};
use asl_core::policy::{FeatureConfig, PolicyParams};
use asl_core::rngs::stream;
use rand::Rng;

pub fn chain_suite(count: usize, seed: u64) -> Vec<Scenario> {
    gen_scenarios(Family::Chain, count, seed).expect("chain suite")
}

pub fn mixed_suite(seed: u64) -> Vec<Scenario> {
    let mut suite = gen_scenarios(Family::Chain, 3, seed).expect("chain");
    suite.extend(gen_scenarios(Family::MenuTree, 2, seed + 1).expect("menu_tree"));
    suite.extend(gen_scenarios(Family::FormFill, 2, seed + 2).expect("form_fill"));
    suite
}

pub fn random_params(cfg: FeatureConfig, seed: u64) -> PolicyParams {
    let mut params = PolicyParams::zeros(cfg);
    let mut rng = stream(seed, "test-params", 0);
    for w in &mut params.weights {
        *w = rng.gen_range(-0.8..0.8);
    }
    params
}

/// Relative error with an absolute regime for near-zero pairs, where the
/// quotient would amplify finite-difference noise.
pub fn rel_err(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-7 {
        (a - b).abs()
    } else {
        (a - b).abs() / scale
    }
}

/// Central finite differences of `f` at `params`, one coordinate at a time,
/// checked against `analytic`. Returns the worst relative error.
pub fn fd_max_rel_err(
    params: &PolicyParams,
    analytic: &[f64],
    h: f64,
    f: impl Fn(&PolicyParams) -> f64,
) -> f64 {
    assert_eq!(analytic.len(), params.weights.len());
    let mut worst = 0.0f64;
    for (i, &g) in analytic.iter().enumerate() {
        let mut plus = params.clone();
        plus.weights[i] += h;
        let mut minus = params.clone();
        minus.weights[i] -= h;
        let fd = (f(&plus) - f(&minus)) / (2.0 * h);
        worst = worst.max(rel_err(fd, g));
    }
    worst
}

/// Gauss-Jordan elimination with partial pivoting; returns None when a
/// pivot collapses. Deliberately a different algorithm from the library's
/// LU path so the two can cross-check each other.
pub fn gauss_jordan_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    assert!(a.len() == n && a.iter().all(|row| row.len() == n));
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-12 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col];
        for v in &mut a[col] {
            *v /= p;
        }
        b[col] /= p;
        let pivot_row = a[col].clone();
        for row in 0..n {
            if row == col {
                continue;
            }
            let factor = a[row][col];
            if factor == 0.0 {
                continue;
            }
            for (v, p) in a[row].iter_mut().zip(&pivot_row) {
                *v -= factor * p;
            }
            b[row] -= factor * b[col];
        }
    }
    Some(b)
}

pub struct MockServer {
    pub url: String,
    pub requests: Arc<Mutex<Vec<String>>>,
    pub hits: Arc<AtomicUsize>,
    handle: Option<JoinHandle<()>>,
}

impl MockServer {
    pub fn request_count(&self) -> usize {
        self.hits.load(Ordering::SeqCst)
    }
}

impl Drop for MockServer {
    fn drop(&mut self) {
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

/// One-shot HTTP server answering the given (status, body) responses in
/// order, recording each raw request. Stops after the last response.
pub fn mock_server(responses: Vec<(u16, String)>) -> MockServer {
    let listener = TcpListener::bind("127.0.0.1:0").expect("bind");
    let url = format!("http://{}/describe", listener.local_addr().expect("addr"));
    let requests = Arc::new(Mutex::new(Vec::new()));
    let hits = Arc::new(AtomicUsize::new(0));
    let req_clone = Arc::clone(&requests);
    let hits_clone = Arc::clone(&hits);
    let handle = std::thread::spawn(move || {
        for (status, body) in responses {
            let Ok((mut sock, _)) = listener.accept() else { return };
            let mut raw = Vec::new();
            let mut buf = [0u8; 4096];
            let mut header_end = None;
            while header_end.is_none() {
                let Ok(n) = sock.read(&mut buf) else { return };
                if n == 0 {
                    break;
                }
                raw.extend_from_slice(&buf[..n]);
                header_end = raw.windows(4).position(|w| w == b"\r\n\r\n");
            }
            let Some(end) = header_end else { return };
            let head = String::from_utf8_lossy(&raw[..end]).to_string();
            let content_length: usize = head
                .lines()
                .find_map(|l| {
                    let (name, value) = l.split_once(':')?;
                    name.eq_ignore_ascii_case("content-length")
                        .then(|| value.trim().parse().ok())?
                })
                .unwrap_or(0);
            let mut body_bytes = raw[end + 4..].to_vec();
            while body_bytes.len() < content_length {
                let Ok(n) = sock.read(&mut buf) else { return };
                if n == 0 {
                    break;
                }
                body_bytes.extend_from_slice(&buf[..n]);
            }
            let full = format!("{head}\r\n\r\n{}", String::from_utf8_lossy(&body_bytes));
            req_clone.lock().expect("requests lock").push(full);
            hits_clone.fetch_add(1, Ordering::SeqCst);
            let reply = format!(
                "HTTP/1.1 {status} X\r\ncontent-type: application/json\r\n\
                 content-length: {}\r\nconnection: close\r\n\r\n{body}",
                body.len()
            );
            let _ = sock.write_all(reply.as_bytes());
        }
    });
    MockServer { url, requests, hits, handle: Some(handle) }
}
