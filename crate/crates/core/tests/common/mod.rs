//! Brute-force evaluators written directly from the definitions. They share
//! nothing with the library beyond `DataMatrix` access and are deliberately
//! naive: explicit double and triple sums, ranks by counting.

#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use seqcop::DataMatrix;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Small random sample; with `ties` the values come from a 4-letter alphabet.
pub fn fixture(seed: u64, n: usize, d: usize, ties: bool) -> DataMatrix {
    let mut r = rng(seed);
    let values = (0..n * d)
        .map(|_| {
            if ties {
                f64::from(r.random_range(0..4u8))
            } else {
                r.random::<f64>()
            }
        })
        .collect();
    DataMatrix::new(n, d, values).unwrap()
}

/// Evaluation points that include exact rank fractions `a/m` for several
/// window lengths, plus a few generic points.
pub fn probe_points(n: usize, seed: u64) -> Vec<Vec<f64>> {
    let mut r = rng(seed ^ 0xabc);
    let mut pts = Vec::new();
    for _ in 0..6 {
        let m1 = r.random_range(1..=n) as f64;
        let m2 = r.random_range(1..=n) as f64;
        let a1 = r.random_range(0..=n) as f64;
        let a2 = r.random_range(0..=n) as f64;
        pts.push(vec![(a1 / m1).min(1.0), (a2 / m2).min(1.0)]);
        pts.push(vec![r.random::<f64>(), r.random::<f64>()]);
    }
    pts.push(vec![1.0, 1.0]);
    pts.push(vec![0.5, 1.0]);
    pts.push(vec![1.0, 0.25]);
    pts
}

/// Mid-rank of observation `i` in column `j` within rows `k..=l` (1-based).
pub fn mid_rank(data: &DataMatrix, k: usize, l: usize, i: usize, j: usize) -> f64 {
    let x = data.get(i - 1, j);
    let mut less = 0.0;
    let mut equal = 0.0;
    for r in k..=l {
        let y = data.get(r - 1, j);
        if y < x {
            less += 1.0;
        } else if y == x {
            equal += 1.0;
        }
    }
    less + (equal + 1.0) / 2.0
}

pub fn pseudo_obs(data: &DataMatrix, k: usize, l: usize, i: usize, j: usize) -> f64 {
    mid_rank(data, k, l, i, j) / (l - k + 1) as f64
}

fn below_in_window(data: &DataMatrix, k: usize, l: usize, i: usize, u: &[f64]) -> bool {
    (0..data.d()).all(|j| pseudo_obs(data, k, l, i, j) <= u[j])
}

/// `C_{k:l}(u)`, zero for an empty window.
pub fn copula(data: &DataMatrix, k: usize, l: usize, u: &[f64]) -> f64 {
    if k > l {
        return 0.0;
    }
    let hits = (k..=l).filter(|&i| below_in_window(data, k, l, i, u)).count();
    hits as f64 / (l - k + 1) as f64
}

pub fn fl(n: usize, s: f64) -> usize {
    (n as f64 * s).floor() as usize
}

/// `√n λ_n(s,t) {C_{⌊ns⌋+1:⌊nt⌋}(u) - c}`.
pub fn seq_process(data: &DataMatrix, s: f64, t: f64, u: &[f64], c: f64) -> f64 {
    let n = data.n();
    let (a, b) = (fl(n, s), fl(n, t));
    if a == b {
        return 0.0;
    }
    let lam = (b - a) as f64 / n as f64;
    (n as f64).sqrt() * lam * (copula(data, a + 1, b, u) - c)
}

/// `n^{-1/2} Σ_{i≤⌊ns⌋} {1(Û_i^{1:n} ≤ u) - c}`.
pub fn ruschendorf(data: &DataMatrix, s: f64, u: &[f64], c: f64) -> f64 {
    let n = data.n();
    let mut sum = 0.0;
    for i in 1..=fl(n, s) {
        sum += f64::from(u8::from(below_in_window(data, 1, n, i, u))) - c;
    }
    sum / (n as f64).sqrt()
}

/// `n^{-1/2} Σ_{i≤⌊ns⌋} {1(U_i ≤ u) - c}` on known uniforms.
pub fn oracle_b(uniforms: &DataMatrix, s: f64, u: &[f64], c: f64) -> f64 {
    let n = uniforms.n();
    let mut sum = 0.0;
    for i in 0..fl(n, s) {
        let hit = (0..uniforms.d()).all(|j| uniforms.get(i, j) <= u[j]);
        sum += f64::from(u8::from(hit)) - c;
    }
    sum / (n as f64).sqrt()
}

/// Multiplier replicate `n^{-1/2} Σ_{i≤⌊ns⌋} ξ_i {1(Û_i ≤ u) - C_n(u)}`.
pub fn bhat(data: &DataMatrix, xi: &[f64], s: f64, u: &[f64]) -> f64 {
    bhat_upto(data, xi, fl(data.n(), s), u)
}

pub fn bhat_upto(data: &DataMatrix, xi: &[f64], k: usize, u: &[f64]) -> f64 {
    let n = data.n();
    let c = copula(data, 1, n, u);
    let mut sum = 0.0;
    for i in 1..=k {
        sum += xi[i - 1] * (f64::from(u8::from(below_in_window(data, 1, n, i, u))) - c);
    }
    sum / (n as f64).sqrt()
}

fn with_coord(u: &[f64], j: usize, x: f64) -> Vec<f64> {
    let mut v = u.to_vec();
    v[j] = x;
    v
}

/// Central difference of `C_n` with step `n^{-1/2}`, window clipped to
/// `[0,1]`, divided by `2h`, clamped to `[0,1]`.
pub fn partial_rs(data: &DataMatrix, j: usize, u: &[f64]) -> f64 {
    let n = data.n();
    let h = 1.0 / (n as f64).sqrt();
    let hi = with_coord(u, j, (u[j] + h).min(1.0));
    let lo = with_coord(u, j, (u[j] - h).max(0.0));
    ((copula(data, 1, n, &hi) - copula(data, 1, n, &lo)) / (2.0 * h)).clamp(0.0, 1.0)
}

fn ones_except(u: &[f64], j: usize) -> Vec<f64> {
    (0..u.len()).map(|i| if i == j { u[j] } else { 1.0 }).collect()
}

pub fn chat(data: &DataMatrix, xi: &[f64], s: f64, t: f64, u: &[f64]) -> f64 {
    let n = data.n();
    chat_between(data, xi, fl(n, s), fl(n, t), u)
}

/// `Ĉ` between summation limits `a < i ≤ b`.
pub fn chat_between(data: &DataMatrix, xi: &[f64], a: usize, b: usize, u: &[f64]) -> f64 {
    let diff = |v: &[f64]| bhat_upto(data, xi, b, v) - bhat_upto(data, xi, a, v);
    let mut value = diff(u);
    for j in 0..u.len() {
        value -= partial_rs(data, j, u) * diff(&ones_except(u, j));
    }
    value
}

/// `D_n(k,u) = √n (k/n) ((n-k)/n) {C_{1:k}(u) - C_{k+1:n}(u)}`.
pub fn changepoint(data: &DataMatrix, k: usize, u: &[f64]) -> f64 {
    let n = data.n();
    let nf = n as f64;
    nf.sqrt() * (k as f64 / nf) * ((n - k) as f64 / nf) * (copula(data, 1, k, u) - copula(data, k + 1, n, u))
}

/// Replicate change-point process
/// `Ĉ(0,k/n,u) - (k/n) Ĉ(0,1,u)` by direct summation.
pub fn changepoint_replicate(data: &DataMatrix, xi: &[f64], k: usize, u: &[f64]) -> f64 {
    let n = data.n();
    chat_between(data, xi, 0, k, u) - (k as f64 / n as f64) * chat_between(data, xi, 0, n, u)
}

/// `γ̂_n(k,u,v)` by the two-branch index ranges.
pub fn gamma(data: &DataMatrix, k: isize, u: &[f64], v: &[f64]) -> f64 {
    let n = data.n();
    let ind = |i: usize, w: &[f64]| f64::from(u8::from(below_in_window(data, 1, n, i, w)));
    let cu = copula(data, 1, n, u);
    let cv = copula(data, 1, n, v);
    let mut sum = 0.0;
    if k >= 0 {
        let k = k as usize;
        for i in 1..=n - k {
            sum += (ind(i, u) - cu) * (ind(i + k, v) - cv);
        }
    } else {
        let k = k.unsigned_abs();
        for i in 1 + k..=n {
            sum += (ind(i, u) - cu) * (ind(i - k, v) - cv);
        }
    }
    sum / n as f64
}

/// Chi-square statistic of 10 equiprobable bins for values in `[0,1]`.
pub fn chi_square_10(values: &[f64]) -> (f64, [usize; 10]) {
    let mut bins = [0usize; 10];
    for &v in values {
        bins[((v * 10.0) as usize).min(9)] += 1;
    }
    let e = values.len() as f64 / 10.0;
    (bins.iter().map(|&b| (b as f64 - e).powi(2) / e).sum(), bins)
}

/// Upper 1% point of the chi-square law with 9 degrees of freedom.
pub const CHI2_9_99: f64 = 21.665994;

pub fn sample_cov(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (n - 1.0)
}

/// Lag-`h` sample autocovariance averaged over the rows of a batch.
pub fn lag_cov(rows: &[&[f64]], h: usize) -> f64 {
    let mut sum = 0.0;
    let mut count = 0usize;
    for r in rows {
        let n = r.len();
        let mean = r.iter().sum::<f64>() / n as f64;
        for i in 0..n - h {
            sum += (r[i] - mean) * (r[i + h] - mean);
        }
        count += n - h;
    }
    sum / count as f64
}

/// Largest absolute discrepancy between the library's process evaluators
/// and the brute-force sums above on one random fixture (`n ≤ 8`, `d = 2`).
pub fn oracle_discrepancy(seed: u64) -> f64 {
    use seqcop::bandwidth::cross_covariance;
    use seqcop::bootstrap::{changepoint_observed, replicate_bhat, replicate_chat};
    use seqcop::empirical::{oracle_seq_process, ranks, ruschendorf_process, seq_copula_process};
    use seqcop::{EvalGrid, PartialDerivEstimator, PseudoObsWindow, ReplicateDesign};

    let mut r = rng(seed.wrapping_mul(31).wrapping_add(7));
    let n = r.random_range(4..=8usize);
    let data = fixture(seed, n, 2, seed.is_multiple_of(3));
    let uniforms = fixture(seed ^ 0x55, n, 2, false);
    let xi: Vec<f64> = (0..n).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
    let points = probe_points(n, seed);
    let c_ref = |u: &[f64]| u[0] * u[1];
    let pobs = PseudoObsWindow::full(&data);
    let mut worst = 0.0f64;
    let mut track = |a: f64, b: f64| worst = worst.max((a - b).abs());

    let mut times: Vec<f64> = (0..=n).map(|i| i as f64 / n as f64).collect();
    times.extend((0..3).map(|_| r.random::<f64>()));
    for u in &points {
        for k in 1..=n {
            for l in k..=n {
                track(
                    ranks(&data, (k, l)).unwrap().empirical_copula(u),
                    copula(&data, k, l, u),
                );
            }
        }
        for &s in &times {
            track(
                ruschendorf_process(&data, s, u, &c_ref).unwrap(),
                ruschendorf(&data, s, u, c_ref(u)),
            );
            track(
                oracle_seq_process(&uniforms, s, u, &c_ref).unwrap(),
                oracle_b(&uniforms, s, u, c_ref(u)),
            );
            track(replicate_bhat(&pobs, &xi, s, u), bhat(&data, &xi, s, u));
            for &t in times.iter().filter(|&&t| t >= s) {
                track(
                    seq_copula_process(&data, s, t, u, &c_ref).unwrap(),
                    seq_process(&data, s, t, u, c_ref(u)),
                );
                let est = PartialDerivEstimator::RemillardScaillet;
                track(replicate_chat(&pobs, &xi, est, s, t, u), chat(&data, &xi, s, t, u));
            }
        }
        for k in -(n as isize - 1)..n as isize {
            track(
                cross_covariance(&pobs, k, u, &points[0]).unwrap(),
                gamma(&data, k, u, &points[0]),
            );
        }
    }

    let grid = EvalGrid::explicit(&points).unwrap();
    let design = ReplicateDesign::new(&pobs, &grid, PartialDerivEstimator::RemillardScaillet).unwrap();
    for &s in &times {
        for (p, u) in points.iter().enumerate() {
            track(design.bhat(&xi, s)[p], bhat(&data, &xi, s, u));
        }
    }
    let observed = changepoint_observed(&data, &grid).unwrap();
    let surface = design.changepoint_surface(&xi);
    let g = points.len();
    for (row, k) in (2..=n - 2).enumerate() {
        for (p, u) in points.iter().enumerate() {
            track(observed[row * g + p], changepoint(&data, k, u));
            track(surface[row * g + p], changepoint_replicate(&data, &xi, k, u));
        }
    }
    worst
}
