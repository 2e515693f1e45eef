//! Ranks, pseudo-observations, empirical copulas on sub-windows, and the
//! sequential empirical processes indexed by `(s, t, u)`.
//!
//! Pseudo-observations are stored as doubled mid-ranks `2 R_ij` together with
//! the window length `m`. A test `Û_ij ≤ u_j` compares the integer rank with
//! a per-coordinate integer threshold, the largest `r` whose correctly rounded
//! quotient `r / 2m` does not exceed `u_j`. An evaluation point written as
//! `k as f64 / m as f64` therefore admits exactly the ranks up to `k`, with no
//! floating-point misclassification at the jumps.
//!
//! Time indices in the public API are 1-based and windows `k..=l` are
//! inclusive, matching the usual notation `C_{k:l}`. Fractions `s` map to
//! indices through `⌊ns⌋`.

use crate::data::DataMatrix;
use crate::error::{Error, Result};

/// `⌊ns⌋`, clamped to `0..=n`.
#[inline]
pub fn floor_index(n: usize, s: f64) -> usize {
    let k = (n as f64 * s).floor();
    if k <= 0.0 {
        0
    } else {
        (k as usize).min(n)
    }
}

/// `λ_n(s, t) = (⌊nt⌋ - ⌊ns⌋) / n`.
pub fn lambda(n: usize, s: f64, t: f64) -> f64 {
    (floor_index(n, t) as f64 - floor_index(n, s) as f64) / n as f64
}

/// Largest doubled rank `r` with `fl(r / 2m) ≤ u`, where `fl` is the
/// correctly rounded quotient. Negative when no rank qualifies.
#[inline]
pub fn rank_threshold(m: usize, u: f64) -> i64 {
    let two_m = 2 * m as i64;
    if u.is_nan() || u < 0.0 {
        return -1;
    }
    if u >= 1.0 {
        return two_m;
    }
    let scale = two_m as f64;
    let admits = |r: i64| (r as f64) / scale <= u;
    let mut t = ((scale * u).floor() as i64).clamp(0, two_m);
    while t < two_m && admits(t + 1) {
        t += 1;
    }
    while t >= 0 && !admits(t) {
        t -= 1;
    }
    t
}

/// Evaluation points in `[0, 1]^d`.
#[derive(Debug, Clone, PartialEq)]
pub struct EvalGrid {
    d: usize,
    points: Vec<f64>,
    kind: GridKind,
}

#[derive(Debug, Clone, PartialEq)]
pub enum GridKind {
    /// Product of `per_axis` values per coordinate; axis 0 varies slowest.
    Lattice {
        per_axis: usize,
        open: bool,
        axis: Vec<f64>,
    },
    Explicit,
}

impl EvalGrid {
    /// Open lattices use `i / (per_axis + 1)`, `i = 1..=per_axis`; closed
    /// lattices use `i / (per_axis - 1)`, `i = 0..per_axis`.
    pub fn lattice(per_axis: usize, d: usize, open: bool) -> Result<Self> {
        if per_axis == 0 || d == 0 || (!open && per_axis < 2) {
            return Err(Error::InvalidArgument(format!(
                "bad lattice: {per_axis} points per axis in dimension {d}"
            )));
        }
        let axis: Vec<f64> = if open {
            (1..=per_axis).map(|i| i as f64 / (per_axis + 1) as f64).collect()
        } else {
            (0..per_axis).map(|i| i as f64 / (per_axis - 1) as f64).collect()
        };
        let total = per_axis
            .checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidArgument("lattice too large".into()))?;
        let mut points = Vec::with_capacity(total * d);
        for idx in 0..total {
            let mut rem = idx;
            let mut coords = vec![0.0; d];
            for j in (0..d).rev() {
                coords[j] = axis[rem % per_axis];
                rem /= per_axis;
            }
            points.extend(coords);
        }
        Ok(Self {
            d,
            points,
            kind: GridKind::Lattice { per_axis, open, axis },
        })
    }

    /// Open lattice with `g` points; `g` must be a perfect `d`-th power.
    pub fn open_lattice_with_size(g: usize, d: usize) -> Result<Self> {
        let per = (g as f64).powf(1.0 / d as f64).round() as usize;
        if per == 0 || per.pow(d as u32) != g {
            return Err(Error::InvalidArgument(format!(
                "grid size {g} is not a perfect power of order {d}"
            )));
        }
        Self::lattice(per, d, true)
    }

    pub fn explicit(points: &[Vec<f64>]) -> Result<Self> {
        let d = points.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(Error::InvalidArgument("empty grid".into()));
        }
        for p in points {
            if p.len() != d {
                return Err(Error::InvalidArgument("grid points of unequal length".into()));
            }
            if p.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return Err(Error::InvalidArgument(format!("grid point {p:?} outside [0,1]^d")));
            }
        }
        Ok(Self {
            d,
            points: points.concat(),
            kind: GridKind::Explicit,
        })
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.d)
    }

    pub fn kind(&self) -> &GridKind {
        &self.kind
    }
}

/// Per-column sort order of a full sample, reused to rank any sub-window in
/// linear time.
#[derive(Debug, Clone)]
pub struct RankIndex {
    n: usize,
    d: usize,
    /// `order[j]` lists 0-based row indices sorted by column `j`.
    order: Vec<Vec<usize>>,
    values: Vec<f64>,
}

impl RankIndex {
    pub fn new(data: &DataMatrix) -> Self {
        let (n, d) = (data.n(), data.d());
        let order = (0..d)
            .map(|j| {
                let mut idx: Vec<usize> = (0..n).collect();
                idx.sort_by(|&a, &b| data.get(a, j).total_cmp(&data.get(b, j)));
                idx
            })
            .collect();
        Self {
            n,
            d,
            order,
            values: data.values().to_vec(),
        }
    }

    /// Pseudo-observations of rows `k..=l` (1-based).
    pub fn window(&self, k: usize, l: usize) -> Result<PseudoObsWindow> {
        if k == 0 || k > l || l > self.n {
            return Err(Error::InvalidWindow { k, l, n: self.n });
        }
        let m = l - k + 1;
        let (lo, hi) = (k - 1, l - 1);
        let mut ranks2 = vec![0u32; m * self.d];
        let mut members: Vec<usize> = Vec::with_capacity(m);
        for j in 0..self.d {
            members.clear();
            members.extend(self.order[j].iter().copied().filter(|&i| i >= lo && i <= hi));
            let mut p = 0;
            while p < m {
                let v = self.values[members[p] * self.d + j];
                let mut q = p;
                while q + 1 < m && self.values[members[q + 1] * self.d + j] == v {
                    q += 1;
                }
                // ranks p+1..=q+1 share the mid-rank (p+q+2)/2
                let r2 = (p + q + 2) as u32;
                for &i in &members[p..=q] {
                    ranks2[(i - lo) * self.d + j] = r2;
                }
                p = q + 1;
            }
        }
        Ok(PseudoObsWindow {
            k,
            l,
            d: self.d,
            ranks2,
        })
    }
}

/// Rank-based pseudo-observations `Û_i^{k:l}` of one window.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoObsWindow {
    k: usize,
    l: usize,
    d: usize,
    ranks2: Vec<u32>,
}

/// Column-wise mid-ranks of rows `k..=l` (1-based) divided by the window
/// length.
pub fn ranks(data: &DataMatrix, window: (usize, usize)) -> Result<PseudoObsWindow> {
    let (k, l) = window;
    if k == 0 || k > l || l > data.n() {
        return Err(Error::InvalidWindow { k, l, n: data.n() });
    }
    let sub = data.slice_rows(k - 1, l)?;
    let mut w = RankIndex::new(&sub).window(1, sub.n())?;
    w.k = k;
    w.l = l;
    Ok(w)
}

impl PseudoObsWindow {
    pub fn full(data: &DataMatrix) -> Self {
        RankIndex::new(data)
            .window(1, data.n())
            .expect("a non-empty matrix has a full window")
    }

    /// Window length `m = l - k + 1`.
    #[inline]
    pub fn m(&self) -> usize {
        self.l - self.k + 1
    }

    #[inline]
    pub fn d(&self) -> usize {
        self.d
    }

    pub fn window(&self) -> (usize, usize) {
        (self.k, self.l)
    }

    /// `2 R_ij` for the `i`-th row of the window (0-based).
    #[inline]
    pub fn doubled_rank(&self, i: usize, j: usize) -> u32 {
        self.ranks2[i * self.d + j]
    }

    pub fn doubled_ranks_row(&self, i: usize) -> &[u32] {
        &self.ranks2[i * self.d..(i + 1) * self.d]
    }

    #[inline]
    pub fn uhat(&self, i: usize, j: usize) -> f64 {
        self.doubled_rank(i, j) as f64 / (2 * self.m()) as f64
    }

    pub fn uhat_row(&self, i: usize) -> Vec<f64> {
        (0..self.d).map(|j| self.uhat(i, j)).collect()
    }

    /// Exact integer thresholds for the coordinates of `u`.
    pub fn thresholds(&self, u: &[f64]) -> Vec<i64> {
        debug_assert_eq!(u.len(), self.d);
        u.iter().map(|&x| rank_threshold(self.m(), x)).collect()
    }

    /// `1(Û_i ≤ u)` given thresholds from [`Self::thresholds`].
    #[inline]
    pub fn below(&self, i: usize, thresholds: &[i64]) -> bool {
        self.doubled_ranks_row(i)
            .iter()
            .zip(thresholds)
            .all(|(&r, &t)| (r as i64) <= t)
    }

    pub fn indicators(&self, u: &[f64]) -> Vec<bool> {
        let t = self.thresholds(u);
        (0..self.m()).map(|i| self.below(i, &t)).collect()
    }

    /// `C_{k:l}(u)`.
    pub fn empirical_copula(&self, u: &[f64]) -> f64 {
        let t = self.thresholds(u);
        let count = (0..self.m()).filter(|&i| self.below(i, &t)).count();
        count as f64 / self.m() as f64
    }

    /// `C_{k:l}` at every grid point. Lattices are handled by a cumulative
    /// cell histogram, which costs `O(m d log P + P^d)` instead of
    /// `O(m d P^d)`.
    pub fn empirical_copula_on(&self, grid: &EvalGrid) -> Vec<f64> {
        match grid.kind() {
            GridKind::Lattice { per_axis, axis, .. } if grid.d() == self.d => {
                let counts = self.lattice_counts(*per_axis, axis);
                let m = self.m() as f64;
                counts.into_iter().map(|c| c as f64 / m).collect()
            }
            _ => grid.points().map(|u| self.empirical_copula(u)).collect(),
        }
    }

    /// Number of pseudo-observations below each lattice point, in grid order.
    fn lattice_counts(&self, per_axis: usize, axis: &[f64]) -> Vec<u32> {
        let thresholds: Vec<i64> = axis.iter().map(|&a| rank_threshold(self.m(), a)).collect();
        let cells = per_axis.pow(self.d as u32);
        let mut hist = vec![0u32; cells];
        'rows: for i in 0..self.m() {
            let mut flat = 0usize;
            for &r in self.doubled_ranks_row(i) {
                // first axis value whose threshold admits r
                let c = thresholds.partition_point(|&t| t < r as i64);
                if c == per_axis {
                    continue 'rows;
                }
                flat = flat * per_axis + c;
            }
            hist[flat] += 1;
        }
        // cumulative sums along each axis
        let mut stride = 1usize;
        for _ in 0..self.d {
            for idx in 0..cells {
                if !(idx / stride).is_multiple_of(per_axis) {
                    hist[idx] += hist[idx - stride];
                }
            }
            stride *= per_axis;
        }
        hist
    }
}

/// `C_{k:l}(u)`, with `C_{k:k-1} ≡ 0` for an absent (empty) window.
pub fn empirical_copula(pobs: Option<&PseudoObsWindow>, u: &[f64]) -> f64 {
    pobs.map_or(0.0, |w| w.empirical_copula(u))
}

fn check_u(d: usize, u: &[f64]) -> Result<()> {
    if u.len() != d {
        return Err(Error::InvalidArgument(format!(
            "evaluation point has {} coordinates, data has {d}",
            u.len()
        )));
    }
    Ok(())
}

fn check_st(s: f64, t: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&t) || s > t {
        return Err(Error::InvalidArgument(format!(
            "need 0 <= s <= t <= 1, got s = {s}, t = {t}"
        )));
    }
    Ok(())
}

/// Two-sided sequential empirical copula process
/// `ℂ_n(s,t,u) = √n λ_n(s,t) {C_{⌊ns⌋+1:⌊nt⌋}(u) - C_ref(u)}`.
pub fn seq_copula_process(data: &DataMatrix, s: f64, t: f64, u: &[f64], c_ref: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    check_st(s, t)?;
    check_u(data.d(), u)?;
    let n = data.n();
    let (ks, kt) = (floor_index(n, s), floor_index(n, t));
    if ks == kt {
        return Ok(0.0);
    }
    let w = ranks(data, (ks + 1, kt))?;
    let lam = (kt - ks) as f64 / n as f64;
    Ok((n as f64).sqrt() * lam * (w.empirical_copula(u) - c_ref(u)))
}

/// `ℂ°_n(s,u) = n^{-1/2} Σ_{i≤⌊ns⌋} {1(Û_i^{1:n} ≤ u) - C_ref(u)}`.
pub fn ruschendorf_process(data: &DataMatrix, s: f64, u: &[f64], c_ref: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    check_st(0.0, s)?;
    check_u(data.d(), u)?;
    let n = data.n();
    let ks = floor_index(n, s);
    let full = PseudoObsWindow::full(data);
    let t = full.thresholds(u);
    let c = c_ref(u);
    let sum: f64 = (0..ks).map(|i| f64::from(u8::from(full.below(i, &t))) - c).sum();
    Ok(sum / (n as f64).sqrt())
}

/// Oracle sequential empirical process of a sample with known uniform
/// margins: `B̃_n(s,u) = n^{-1/2} Σ_{i≤⌊ns⌋} {1(U_i ≤ u) - C(u)}`.
pub fn oracle_seq_process(uniforms: &DataMatrix, s: f64, u: &[f64], c_true: &dyn Fn(&[f64]) -> f64) -> Result<f64> {
    check_st(0.0, s)?;
    check_u(uniforms.d(), u)?;
    let n = uniforms.n();
    let ks = floor_index(n, s);
    let c = c_true(u);
    let sum: f64 = uniforms
        .rows()
        .take(ks)
        .map(|row| {
            let below = row.iter().zip(u).all(|(x, y)| x <= y);
            f64::from(u8::from(below)) - c
        })
        .sum();
    Ok(sum / (n as f64).sqrt())
}

/// `u^{(j)}`: all ones except coordinate `j`.
pub fn margin_point(u: &[f64], j: usize) -> Vec<f64> {
    let mut v = vec![1.0; u.len()];
    v[j] = u[j];
    v
}

/// Linear asymptotic representation
/// `{B̃_n(t,u) - B̃_n(s,u)} - Σ_j Ċ_j(u) {B̃_n(t,u^{(j)}) - B̃_n(s,u^{(j)})}`.
pub fn oracle_representation(
    uniforms: &DataMatrix,
    s: f64,
    t: f64,
    u: &[f64],
    c_true: &dyn Fn(&[f64]) -> f64,
    partials: &dyn Fn(usize, &[f64]) -> f64,
) -> Result<f64> {
    check_st(s, t)?;
    let diff = |v: &[f64]| -> Result<f64> {
        Ok(oracle_seq_process(uniforms, t, v, c_true)? - oracle_seq_process(uniforms, s, v, c_true)?)
    };
    let mut value = diff(u)?;
    for j in 0..u.len() {
        let uj = margin_point(u, j);
        value -= partials(j, u) * diff(&uj)?;
    }
    Ok(value)
}
