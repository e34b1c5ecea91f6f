//! Test-only helpers: seeded RNGs and oracles that share no code with the
//! library routines they check.

pub use crate::fixtures::*;
use crate::matrix::SquareMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

/// Spectral abscissa from `rho(exp(M)) = exp(alpha)`: `exp(M)` by scaling
/// and squaring of a Taylor series, then `alpha ~ log ||exp(M)^(2^k)|| / 2^k`
/// via normalised repeated squaring.
pub fn perron_abscissa_bruteforce(m: &SquareMatrix) -> f64 {
    let n = m.dim();
    let norm = m.max_abs() * n as f64;
    let mut s = 0;
    while norm / f64::powi(2.0, s) > 0.25 {
        s += 1;
    }
    let scale = f64::powi(2.0, s);
    let a: Vec<f64> = m.rows().concat().iter().map(|v| v / scale).collect();
    let mut e = vec![0.0; n * n];
    let mut term = vec![0.0; n * n];
    for i in 0..n {
        e[i * n + i] = 1.0;
        term[i * n + i] = 1.0;
    }
    for k in 1..30 {
        term = matmul(&term, &a, n);
        for v in term.iter_mut() {
            *v /= k as f64;
        }
        for (x, t) in e.iter_mut().zip(&term) {
            *x += t;
        }
    }
    for _ in 0..s {
        e = matmul(&e, &e, n);
    }
    let mut log_scale = 0.0f64;
    let rounds = 40;
    for _ in 0..rounds {
        e = matmul(&e, &e, n);
        log_scale *= 2.0;
        let mx = e.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        for v in e.iter_mut() {
            *v /= mx;
        }
        log_scale += mx.ln();
    }
    log_scale / f64::powi(2.0, rounds)
}

/// Simple cycles by plain DFS from every start node, visiting only larger
/// nodes; each cycle is reported once starting at its smallest node.
pub fn brute_force_cycles(m: &SquareMatrix) -> Vec<Vec<usize>> {
    let n = m.dim();
    let succ = |v: usize| (0..n).filter(move |&w| w != v && m.get(w, v) != 0.0);
    let mut out = Vec::new();
    fn dfs(
        v: usize,
        start: usize,
        path: &mut Vec<usize>,
        on_path: &mut Vec<bool>,
        succ: &dyn Fn(usize) -> Vec<usize>,
        out: &mut Vec<Vec<usize>>,
    ) {
        for w in succ(v) {
            if w == start && path.len() >= 2 {
                out.push(path.clone());
            } else if w > start && !on_path[w] {
                on_path[w] = true;
                path.push(w);
                dfs(w, start, path, on_path, succ, out);
                path.pop();
                on_path[w] = false;
            }
        }
    }
    let succ_vec = |v: usize| succ(v).collect::<Vec<_>>();
    for s in 0..n {
        let mut on_path = vec![false; n];
        on_path[s] = true;
        let mut path = vec![s];
        dfs(s, s, &mut path, &mut on_path, &succ_vec, &mut out);
    }
    out.sort();
    out
}

/// Nodes reachable from `v` (including `v`) following edges `j -> i` where `m[i][j] != 0`.
pub fn reachable(m: &SquareMatrix, v: usize) -> Vec<bool> {
    let n = m.dim();
    let mut seen = vec![false; n];
    let mut stack = vec![v];
    seen[v] = true;
    while let Some(u) = stack.pop() {
        for w in 0..n {
            if m.get(w, u) != 0.0 && !seen[w] {
                seen[w] = true;
                stack.push(w);
            }
        }
    }
    seen
}
