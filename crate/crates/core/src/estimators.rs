//! Sampling estimators for Lipschitz, turning, doubling and chain invariants.
//!
//! Sampled estimators draw sample `k` from `sample_rng(seed, k)`, so a larger
//! budget always sees a superset of the samples of a smaller one. Samples
//! alternate between uniform draws (even `k`) and near draws (odd `k`).

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constructions::{ConstructionError, Domain, Handle, HandleKind};
use crate::curve::SampledCurve;
use crate::diameter::RangeDiameter;
use crate::metric::{MapSample, MetricError, MetricSpace};
use crate::sampling::{log_uniform_offset, par_argmax, rng_for, sample_rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimateError {
    #[error("no admissible sample among {0} draws")]
    NoAdmissible(u64),
    #[error("points {0} and {1} coincide")]
    CoincidentPair(usize, usize),
    #[error("need at least {0} points")]
    TooFewPoints(usize),
    #[error("exhaustive mode supports at most {limit} points, got {n}")]
    TooLarge { n: usize, limit: usize },
    #[error("invalid argument: {0}")]
    Invalid(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
}

type Result<T> = std::result::Result<T, EstimateError>;

/// A named estimate with the sample that realizes it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub name: String,
    pub value: f64,
    pub witness: Vec<usize>,
    pub budget: u64,
    pub seed: u64,
    pub refinement: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Flavor {
    Full,
    Delta,
    DeltaTilde,
}

/// Draws tuples from the full product, `Δ_r` or `Δ̃_r` of a space.
#[derive(Debug, Clone)]
pub struct DomainSampler<'a> {
    space: &'a MetricSpace,
    flavor: Flavor,
    r: f64,
    neighbors: Vec<Vec<usize>>,
}

const RETRIES: usize = 64;
const CANDIDATES: usize = 12;

impl<'a> DomainSampler<'a> {
    pub fn new(space: &'a MetricSpace, flavor: Flavor, r: f64) -> Result<Self> {
        if space.is_empty() {
            return Err(EstimateError::TooFewPoints(1));
        }
        if flavor != Flavor::Full && !(r > 0.0) {
            return Err(EstimateError::Invalid("sampler radius must be positive".into()));
        }
        let neighbors = match flavor {
            Flavor::Full => Vec::new(),
            _ => (0..space.len())
                .into_par_iter()
                .map(|a| (0..space.len()).filter(|&b| space.d(a, b) <= r).collect())
                .collect(),
        };
        Ok(Self { space, flavor, r, neighbors })
    }

    /// Sampler matching a handle's domain.
    pub fn for_handle(h: &Handle<'a>) -> Result<Self> {
        match h.domain() {
            Domain::Full => Self::new(h.space(), Flavor::Full, 0.0),
            Domain::Delta(r) => Self::new(h.space(), Flavor::Delta, r),
            Domain::DeltaTilde(r) => Self::new(h.space(), Flavor::DeltaTilde, r),
        }
    }

    pub fn flavor(&self) -> Flavor {
        self.flavor
    }

    pub fn radius(&self) -> f64 {
        self.r
    }

    pub fn space(&self) -> &'a MetricSpace {
        self.space
    }

    pub fn contains(&self, t: &[usize]) -> bool {
        let pairs = || (0..t.len()).flat_map(move |i| (i + 1..t.len()).map(move |j| (t[i], t[j])));
        match self.flavor {
            Flavor::Full => true,
            Flavor::Delta => pairs().all(|(a, b)| self.space.d(a, b) <= self.r),
            Flavor::DeltaTilde => t.len() < 2 || pairs().any(|(a, b)| self.space.d(a, b) <= self.r),
        }
    }

    /// A tuple of the domain, or `None` after repeated rejections.
    pub fn sample(&self, rng: &mut ChaCha8Rng, arity: usize) -> Option<Vec<usize>> {
        let n = self.space.len();
        match self.flavor {
            Flavor::Full => Some((0..arity).map(|_| rng.gen_range(0..n)).collect()),
            Flavor::Delta => {
                for _ in 0..RETRIES {
                    let a = rng.gen_range(0..n);
                    let nb = &self.neighbors[a];
                    let mut t: Vec<usize> = std::iter::once(a)
                        .chain((1..arity).map(|_| nb[rng.gen_range(0..nb.len())]))
                        .collect();
                    t.shuffle(rng);
                    if self.contains(&t) {
                        return Some(t);
                    }
                }
                None
            }
            Flavor::DeltaTilde => {
                let a = rng.gen_range(0..n);
                let nb = &self.neighbors[a];
                let mut t = vec![a, nb[rng.gen_range(0..nb.len())]];
                t.extend((2..arity).map(|_| rng.gen_range(0..n)));
                t.truncate(arity.max(1));
                t.shuffle(rng);
                Some(t)
            }
        }
    }

    /// A point close to `id`: a small index offset or the nearest of a few
    /// random candidates.
    pub fn near(&self, rng: &mut ChaCha8Rng, id: usize) -> usize {
        let n = self.space.len();
        if n == 1 {
            return id;
        }
        if rng.gen_bool(0.5) {
            let off = log_uniform_offset(rng, n - 1);
            if rng.gen_bool(0.5) && id + off < n {
                id + off
            } else if id >= off {
                id - off
            } else {
                id + off
            }
        } else {
            let pool: &[usize] = match self.flavor {
                Flavor::Full => &[],
                _ => &self.neighbors[id],
            };
            let mut best = (f64::INFINITY, id);
            for _ in 0..CANDIDATES {
                let c = if pool.len() > 1 { pool[rng.gen_range(0..pool.len())] } else { rng.gen_range(0..n) };
                let d = self.space.d(id, c);
                if c != id && d < best.0 {
                    best = (d, c);
                }
            }
            best.1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LipMode {
    /// pairs of tuples may differ in every coordinate
    Joint,
    /// pairs of tuples differ in exactly one coordinate
    PerVariable,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipOptions {
    pub budget: u64,
    pub seed: u64,
    pub min_sep: f64,
    pub mode: LipMode,
}

impl Default for LipOptions {
    fn default() -> Self {
        Self { budget: 10_000, seed: 0, min_sep: 1e-9, mode: LipMode::Joint }
    }
}

fn check_options(budget: u64, min_sep: f64) -> Result<()> {
    if budget == 0 {
        return Err(EstimateError::Invalid("budget must be at least 1".into()));
    }
    if !(min_sep > 0.0) {
        return Err(EstimateError::Invalid("min_sep must be positive".into()));
    }
    Ok(())
}

/// Largest sampled difference quotient of a recorded map.
pub fn lipschitz_map(m: &MapSample<'_>, budget: u64, seed: u64, min_sep: f64) -> Result<EstimateReport> {
    check_options(budget, min_sep)?;
    let n = m.len();
    if n < 2 {
        return Err(EstimateError::TooFewPoints(2));
    }
    let best = par_argmax(budget, |k| {
        let mut rng = sample_rng(seed, k);
        let i = rng.gen_range(0..n);
        let j = if k % 2 == 0 {
            rng.gen_range(0..n)
        } else if rng.gen_bool(0.5) {
            let off = log_uniform_offset(&mut rng, n - 1);
            if i + off < n { i + off } else { i - off.min(i) }
        } else {
            (0..CANDIDATES)
                .map(|_| rng.gen_range(0..n))
                .filter(|&j| j != i)
                .min_by(|&a, &b| m.input_distance(i, a).total_cmp(&m.input_distance(i, b)))
                .unwrap_or(i)
        };
        let din = m.input_distance(i, j);
        (i != j && din >= min_sep).then(|| (m.output_distance(i, j) / din, (i, j)))
    })
    .ok_or(EstimateError::NoAdmissible(budget))?;
    let (i, j) = best.item;
    let witness = m.pairs()[i].0.iter().chain(&m.pairs()[j].0).copied().collect();
    Ok(EstimateReport {
        name: "lipschitz".into(),
        value: best.value,
        witness,
        budget,
        seed,
        refinement: n,
        note: None,
    })
}

fn tuple_distance(space: &MetricSpace, x: &[usize], y: &[usize]) -> f64 {
    x.iter().zip(y).map(|(&a, &b)| space.d(a, b)).sum()
}

type Sampled = std::result::Result<(Vec<usize>, Vec<usize>), ConstructionError>;

fn ratio(h: &Handle<'_>, x: &[usize], y: &[usize], min_sep: f64) -> Option<(f64, Sampled)> {
    let din = tuple_distance(h.space(), x, y);
    if !(din >= min_sep) {
        return None;
    }
    match (h.eval(x), h.eval(y)) {
        (Ok(fx), Ok(fy)) => Some((h.norm().distance(&fx, &fy) / din, Ok((x.to_vec(), y.to_vec())))),
        // an evaluation failure inside the domain always wins the arg-max
        (Err(e), _) | (_, Err(e)) => Some((f64::INFINITY, Err(e))),
    }
}

/// Largest sampled difference quotient of a handle over its domain, in the
/// sum metric on tuples. Extra tuple pairs are evaluated after the sampled ones.
pub fn lipschitz_handle(
    h: &Handle<'_>,
    sampler: &DomainSampler<'_>,
    opts: LipOptions,
    extra: &[(Vec<usize>, Vec<usize>)],
) -> Result<EstimateReport> {
    check_options(opts.budget, opts.min_sep)?;
    if !std::ptr::eq(sampler.space(), h.space()) {
        return Err(EstimateError::Invalid("sampler and handle use different spaces".into()));
    }
    let arity = h.arity();
    let total = opts.budget + extra.len() as u64;
    let best = par_argmax(total, |k| {
        if k >= opts.budget {
            let (x, y) = &extra[(k - opts.budget) as usize];
            return (h.in_domain(x) && h.in_domain(y)).then(|| ratio(h, x, y, opts.min_sep)).flatten();
        }
        let mut rng = sample_rng(opts.seed, k);
        let x = sampler.sample(&mut rng, arity)?;
        let y = match (opts.mode, k % 2) {
            (LipMode::Joint, 0) => sampler.sample(&mut rng, arity)?,
            (LipMode::PerVariable, 0) => {
                let mut y = x.clone();
                y[rng.gen_range(0..arity)] = rng.gen_range(0..sampler.space().len());
                y
            }
            (mode, _) => {
                let mut y = x.clone();
                if mode == LipMode::Joint && rng.gen_bool(0.5) {
                    for v in y.iter_mut() {
                        *v = sampler.near(&mut rng, *v);
                    }
                } else {
                    let i = rng.gen_range(0..arity);
                    y[i] = sampler.near(&mut rng, y[i]);
                }
                y
            }
        };
        if !h.in_domain(&y) {
            return None;
        }
        ratio(h, &x, &y, opts.min_sep)
    })
    .ok_or(EstimateError::NoAdmissible(total))?;
    let (x, y) = best.item?;
    Ok(EstimateReport {
        name: "lipschitz".into(),
        value: best.value,
        witness: x.into_iter().chain(y).collect(),
        budget: opts.budget,
        seed: opts.seed,
        refinement: h.space().len(),
        note: (!extra.is_empty()).then(|| format!("{} extra pairs", extra.len())),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TurningMode {
    Exhaustive,
    Budget(u64),
}

/// Largest number of points for exhaustive turning estimates.
pub const EXHAUSTIVE_LIMIT: usize = 4096;

/// `max diam(arc(i, j)) / d(i, j)`, with the smaller-diameter arc on circles.
pub fn turning_constant(c: &SampledCurve, mode: TurningMode, seed: u64) -> Result<EstimateReport> {
    let n = c.len();
    if n < 2 {
        return Err(EstimateError::TooFewPoints(2));
    }
    let (value, (i, j), budget) = match mode {
        TurningMode::Exhaustive => {
            if n > EXHAUSTIVE_LIMIT {
                return Err(EstimateError::TooLarge { n, limit: EXHAUSTIVE_LIMIT });
            }
            let (v, w) = if c.is_circle() { turning_circle(c.space())? } else { turning_arc(c.space())? };
            (v, w, (n * (n - 1) / 2) as u64)
        }
        TurningMode::Budget(budget) => {
            let (v, w) = turning_sampled(c, budget, seed)?;
            (v, w, budget)
        }
    };
    Ok(EstimateReport {
        name: "turning".into(),
        value,
        witness: vec![i, j],
        budget,
        seed,
        refinement: n,
        note: matches!(mode, TurningMode::Exhaustive).then(|| "exhaustive".into()),
    })
}

fn better(v: f64, w: (usize, usize), best: &(f64, (usize, usize))) -> bool {
    v > best.0 || (v == best.0 && w < best.1)
}

fn turning_arc(s: &MetricSpace) -> Result<(f64, (usize, usize))> {
    let n = s.len();
    // prev[e] = diam{s+1..=e}, cur[e] = diam{s..=e}
    let mut prev = vec![0.0f64; n];
    let mut cur = vec![0.0f64; n];
    let mut best = (0.0, (0, 1));
    for st in (0..n - 1).rev() {
        cur[st] = 0.0;
        for e in st + 1..n {
            let d = s.d(st, e);
            if d == 0.0 {
                return Err(EstimateError::CoincidentPair(st, e));
            }
            cur[e] = prev[e].max(cur[e - 1]).max(d);
            let v = cur[e] / d;
            if better(v, (st, e), &best) {
                best = (v, (st, e));
            }
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    Ok(best)
}

fn turning_circle(s: &MetricSpace) -> Result<(f64, (usize, usize))> {
    let n = s.len();
    let half = n / 2;
    // levels[l][st] = diam of the forward window st, st+1, ..., st+l
    let mut levels: Vec<Vec<f64>> = Vec::with_capacity(half + 1);
    levels.push(vec![0.0; n]);
    let mut level = vec![0.0f64; n];
    let mut best = (0.0, (0, 1));
    for l in 1..n {
        let next: Vec<f64> = (0..n)
            .into_par_iter()
            .map(|st| level[st].max(level[(st + 1) % n]).max(s.d(st, (st + l) % n)))
            .collect();
        level = next;
        if l <= half {
            levels.push(level.clone());
        }
        if n - l <= half {
            for st in 0..n {
                let e = (st + l) % n;
                let d = s.d(st, e);
                if d == 0.0 {
                    return Err(EstimateError::CoincidentPair(st.min(e), st.max(e)));
                }
                let v = level[st].min(levels[n - l][e]) / d;
                let w = (st.min(e), st.max(e));
                if better(v, w, &best) {
                    best = (v, w);
                }
            }
        }
    }
    Ok(best)
}

fn turning_sampled(c: &SampledCurve, budget: u64, seed: u64) -> Result<(f64, (usize, usize))> {
    check_options(budget, 1.0)?;
    let n = c.len();
    let rd = RangeDiameter::new(c.space());
    let circle = c.is_circle();
    let best = par_argmax(budget, |k| {
        let mut rng = sample_rng(seed, k);
        let i = rng.gen_range(0..n);
        let j = if k % 2 == 0 {
            rng.gen_range(0..n)
        } else {
            let off = log_uniform_offset(&mut rng, n - 1);
            if circle {
                (i + off) % n
            } else if i + off < n {
                i + off
            } else {
                i.saturating_sub(off)
            }
        };
        if i == j {
            return None;
        }
        let (a, b) = (i.min(j), i.max(j));
        let d = c.space().d(a, b);
        if d == 0.0 {
            return Some((f64::INFINITY, Err(EstimateError::CoincidentPair(a, b))));
        }
        let diam = if circle {
            rd.query(&[(a, b)]).min(rd.query(&[(b, n - 1), (0, a)]))
        } else {
            rd.query(&[(a, b)])
        };
        Some((diam / d, Ok((a, b))))
    })
    .ok_or(EstimateError::NoAdmissible(budget))?;
    Ok((best.value, best.item?))
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }
    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = (ra.min(rb), ra.max(rb));
            self.0[hi] = lo;
        }
    }
}

/// Components of the graph joining points at distance `< eps`, each sorted,
/// ordered by smallest member.
pub fn chain_components(s: &MetricSpace, eps: f64) -> Result<Vec<Vec<usize>>> {
    if !(eps > 0.0) {
        return Err(EstimateError::Invalid("eps must be positive".into()));
    }
    let n = s.len();
    let mut uf = UnionFind((0..n).collect());
    if s.norm().is_some() {
        // sweep along the first coordinate; both norms dominate it
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| s.point(a)[0].total_cmp(&s.point(b)[0]).then(a.cmp(&b)));
        for (k, &a) in order.iter().enumerate() {
            for &b in &order[k + 1..] {
                if s.point(b)[0] - s.point(a)[0] >= eps {
                    break;
                }
                if s.d(a, b) < eps {
                    uf.union(a, b);
                }
            }
        }
    } else {
        for a in 0..n {
            for b in a + 1..n {
                if s.d(a, b) < eps {
                    uf.union(a, b);
                }
            }
        }
    }
    let mut groups: std::collections::BTreeMap<usize, Vec<usize>> = Default::default();
    for i in 0..n {
        let r = uf.find(i);
        groups.entry(r).or_default().push(i);
    }
    Ok(groups.into_values().collect())
}

pub fn is_chain_connected(s: &MetricSpace, a: usize, b: usize, eps: f64) -> Result<bool> {
    s.check_id(a)?;
    s.check_id(b)?;
    Ok(chain_components(s, eps)?.iter().any(|c| c.binary_search(&a).is_ok() && c.binary_search(&b).is_ok()))
}

/// Minimax step over chains between every pair, as a row-major `n x n` table:
/// the largest edge on the path between the points in a minimum spanning tree.
pub fn minimax_table(s: &MetricSpace) -> Vec<f64> {
    let n = s.len();
    let mut parent = vec![usize::MAX; n];
    let mut key = vec![f64::INFINITY; n];
    let mut used = vec![false; n];
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
    key[0] = 0.0;
    for _ in 0..n {
        let u = (0..n)
            .filter(|&v| !used[v])
            .min_by(|&a, &b| key[a].total_cmp(&key[b]).then(a.cmp(&b)))
            .unwrap();
        used[u] = true;
        if parent[u] != usize::MAX {
            let w = s.d(u, parent[u]);
            adj[u].push((parent[u], w));
            adj[parent[u]].push((u, w));
        }
        for v in 0..n {
            if !used[v] {
                let d = s.d(u, v);
                if d < key[v] {
                    key[v] = d;
                    parent[v] = u;
                }
            }
        }
    }
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|root| {
            let mut row = vec![0.0f64; n];
            let mut seen = vec![false; n];
            let mut stack = vec![root];
            seen[root] = true;
            while let Some(u) = stack.pop() {
                for &(v, w) in &adj[u] {
                    if !seen[v] {
                        seen[v] = true;
                        row[v] = row[u].max(w);
                        stack.push(v);
                    }
                }
            }
            row
        })
        .collect();
    rows.concat()
}

/// `min over pairs of minimax(a, b) / d(a, b)`.
pub fn uniform_disconnectedness(s: &MetricSpace) -> Result<EstimateReport> {
    let n = s.len();
    if n < 2 {
        return Err(EstimateError::TooFewPoints(2));
    }
    let table = minimax_table(s);
    let mut best = (f64::INFINITY, (0, 1));
    for a in 0..n {
        for b in a + 1..n {
            let d = s.d(a, b);
            if d == 0.0 {
                return Err(EstimateError::CoincidentPair(a, b));
            }
            let v = table[a * n + b] / d;
            if v < best.0 {
                best = (v, (a, b));
            }
        }
    }
    Ok(EstimateReport {
        name: "uniform-disconnectedness".into(),
        value: best.0,
        witness: vec![best.1 .0, best.1 .1],
        budget: (n * (n - 1) / 2) as u64,
        seed: 0,
        refinement: n,
        note: None,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Centers {
    Explicit(Vec<usize>),
    Sampled { count: u64, seed: u64 },
}

/// Greedy count of `r/2`-balls covering `ball(c, r)`, farthest point first.
pub fn greedy_cover(s: &MetricSpace, c: usize, r: f64) -> usize {
    let ball: Vec<usize> = (0..s.len()).filter(|&x| s.d(c, x) <= r).collect();
    let mut gap: Vec<f64> = ball.iter().map(|&x| s.d(c, x)).collect();
    let mut count = 1;
    loop {
        let (k, g) = gap.iter().enumerate().fold((0, f64::NEG_INFINITY), |b, (k, &g)| if g > b.1 { (k, g) } else { b });
        if g <= r / 2.0 {
            return count;
        }
        count += 1;
        let p = ball[k];
        for (slot, &x) in gap.iter_mut().zip(&ball) {
            *slot = slot.min(s.d(p, x));
        }
    }
}

/// Largest greedy cover count over the given centers and radii; an upper
/// bound for the doubling count at those balls, not a certified constant.
pub fn doubling_estimate(s: &MetricSpace, radii: &[f64], centers: &Centers) -> Result<EstimateReport> {
    if s.is_empty() {
        return Err(EstimateError::TooFewPoints(1));
    }
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(EstimateError::Invalid("radii must be positive".into()));
    }
    let (ids, seed) = match centers {
        Centers::Explicit(ids) => {
            for &i in ids {
                s.check_id(i)?;
            }
            (ids.clone(), 0)
        }
        Centers::Sampled { count, seed } => {
            let mut rng = rng_for(*seed, 0);
            ((0..*count).map(|_| rng.gen_range(0..s.len())).collect(), *seed)
        }
    };
    if ids.is_empty() {
        return Err(EstimateError::Invalid("no centers".into()));
    }
    let grid: Vec<(usize, f64)> = ids.iter().flat_map(|&c| radii.iter().map(move |&r| (c, r))).collect();
    let best = par_argmax(grid.len() as u64, |k| {
        let (c, r) = grid[k as usize];
        Some((greedy_cover(s, c, r) as f64, (c, r)))
    })
    .unwrap();
    Ok(EstimateReport {
        name: "doubling".into(),
        value: best.value,
        witness: vec![best.item.0],
        budget: ids.len() as u64,
        seed,
        refinement: s.len(),
        note: Some(format!("greedy cover upper bound, radius {}", best.item.1)),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QhPoint {
    pub t_in: f64,
    pub t_out: f64,
}

/// Upper envelope of `(d(x1,x2)/d(x3,x4), d(y1,y2)/d(y3,y4))` over sampled
/// quadruples, one point per logarithmic bin of `t_in`.
pub fn qh_profile(f: &MapSample<'_>, budget: u64, seed: u64, bins_per_decade: u32) -> Result<Vec<QhPoint>> {
    check_options(budget, 1.0)?;
    if bins_per_decade == 0 {
        return Err(EstimateError::Invalid("bins_per_decade must be positive".into()));
    }
    let n = f.len();
    if n < 4 {
        return Err(EstimateError::TooFewPoints(4));
    }
    let samples: Vec<Option<(i64, QhPoint)>> = (0..budget)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(seed, k);
            let q: Vec<usize> = rand::seq::index::sample(&mut rng, n, 4).into_vec();
            let (a, b) = (f.input_distance(q[0], q[1]), f.input_distance(q[2], q[3]));
            let (c, d) = (f.output_distance(q[0], q[1]), f.output_distance(q[2], q[3]));
            if a == 0.0 || b == 0.0 || d == 0.0 {
                return None;
            }
            let t_in = a / b;
            let bin = (t_in.log10() * bins_per_decade as f64).floor() as i64;
            Some((bin, QhPoint { t_in, t_out: c / d }))
        })
        .collect();
    let mut env: std::collections::BTreeMap<i64, QhPoint> = Default::default();
    for (bin, p) in samples.into_iter().flatten() {
        let e = env.entry(bin).or_insert(p);
        if p.t_out > e.t_out {
            *e = p;
        }
    }
    Ok(env.into_values().collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionViolation {
    pub triple: [usize; 3],
    /// argument pattern that failed, e.g. `"(a, a, b)"`
    pub identity: String,
    pub output: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AbsorptionReport {
    pub passed: bool,
    pub checked: u64,
    pub violation: Option<AbsorptionViolation>,
    /// `max d(σ(a, b, c), a) / d(a, b)` over sampled triples
    pub displacement_constant: f64,
    pub displacement_witness: Vec<usize>,
    /// sampled Lipschitz estimate, including the pairs `(a, b, c), (a, a, c)`
    pub lip_estimate: f64,
    pub budget: u64,
    pub seed: u64,
}

/// Checks `σ(a, a, b) = σ(a, b, a) = σ(b, a, a) = a` exactly and the
/// displacement bound `d(σ(a, b, c), a) <= L d(a, b)` on sampled triples.
pub fn absorption_check(
    sigma: &Handle<'_>,
    sampler: &DomainSampler<'_>,
    budget: u64,
    seed: u64,
    tol: f64,
) -> Result<AbsorptionReport> {
    check_options(budget, 1.0)?;
    if sigma.kind() != HandleKind::Mixer || sigma.arity() != 3 {
        return Err(EstimateError::Invalid("absorption needs a ternary mixer".into()));
    }
    let want = match sigma.domain() {
        Domain::Full => Flavor::Full,
        Domain::Delta(_) => Flavor::Delta,
        Domain::DeltaTilde(_) => Flavor::DeltaTilde,
    };
    if sampler.flavor() != want {
        return Err(EstimateError::Invalid(format!("sampler flavor {:?} does not match the mixer domain", sampler.flavor())));
    }
    let space = sigma.space();
    type Outcome = std::result::Result<(Vec<usize>, Option<AbsorptionViolation>), ConstructionError>;
    let triples: Vec<Option<(f64, Outcome)>> = (0..budget)
        .into_par_iter()
        .map(|k| {
            let mut rng = sample_rng(seed, k);
            let t = sampler.sample(&mut rng, 3)?;
            let (a, b, c) = (t[0], t[1], t[2]);
            let run = || -> std::result::Result<(f64, Option<AbsorptionViolation>), ConstructionError> {
                for (args, name) in [([a, a, b], "(a, a, b)"), ([a, b, a], "(a, b, a)"), ([b, a, a], "(b, a, a)")] {
                    let out = sigma.eval(&args)?;
                    if out.as_slice() != space.point(a) {
                        let v = AbsorptionViolation { triple: [a, b, c], identity: name.into(), output: out };
                        return Ok((0.0, Some(v)));
                    }
                }
                let dab = space.d(a, b);
                let k = if dab > 0.0 { sigma.norm().distance(&sigma.eval(&t)?, space.point(a)) / dab } else { 0.0 };
                Ok((k, None))
            };
            Some(match run() {
                Ok((k, v)) => (k, Ok((t, v))),
                Err(e) => (0.0, Err(e)),
            })
        })
        .collect();
    let mut checked = 0;
    let mut violation = None;
    let mut disp = (0.0f64, Vec::new());
    let mut extra = Vec::new();
    for (k, outcome) in triples.into_iter().flatten() {
        let (t, v) = outcome?;
        checked += 1;
        if let Some(v) = v {
            violation.get_or_insert(v);
            continue;
        }
        if k > disp.0 {
            disp = (k, t.clone());
        }
        extra.push((t.clone(), vec![t[0], t[0], t[2]]));
    }
    if checked == 0 {
        return Err(EstimateError::NoAdmissible(budget));
    }
    let opts = LipOptions { budget, seed, min_sep: 1e-12, mode: LipMode::Joint };
    let lip = lipschitz_handle(sigma, sampler, opts, &extra)?.value;
    let passed = violation.is_none() && disp.0 <= lip * (1.0 + tol) + tol;
    Ok(AbsorptionReport {
        passed,
        checked,
        violation,
        displacement_constant: disp.0,
        displacement_witness: disp.1,
        lip_estimate: lip,
        budget,
        seed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constructions::{circle_local_mixer, coordinate_median_mixer, median_mixer};
    use crate::curve::{generate, CurveSpec, Profile};
    use crate::metric::Norm;
    use proptest::prelude::*;
    use rand::Rng;

    fn gen(spec: CurveSpec) -> SampledCurve {
        generate(&spec).unwrap().into_curve().unwrap()
    }

    fn line(xs: &[f64]) -> MetricSpace {
        MetricSpace::euclidean(xs.iter().map(|&x| vec![x]).collect()).unwrap()
    }

    #[test]
    fn lipschitz_of_simple_maps() {
        let s = line(&(0..=100).map(|k| k as f64 / 100.0).collect::<Vec<_>>());
        let id = MapSample::from_fn(&s, Norm::Euclidean, |x| x.to_vec()).unwrap();
        assert_eq!(lipschitz_map(&id, 1000, 1, 1e-9).unwrap().value, 1.0);
        let double = MapSample::from_fn(&s, Norm::Euclidean, |x| vec![2.0 * x[0]]).unwrap();
        let r = lipschitz_map(&double, 1000, 1, 1e-9).unwrap();
        assert!((r.value - 2.0).abs() < 1e-12);
        assert_eq!(r.witness.len(), 2);
        let one = line(&[0.0]);
        let m = MapSample::from_fn(&one, Norm::Euclidean, |x| x.to_vec()).unwrap();
        assert_eq!(lipschitz_map(&m, 10, 1, 1e-9), Err(EstimateError::TooFewPoints(2)));
    }

    #[test]
    fn lipschitz_rejects_when_nothing_admissible() {
        let s = line(&[0.0, 1e-12]);
        let m = MapSample::from_fn(&s, Norm::Euclidean, |x| x.to_vec()).unwrap();
        assert_eq!(lipschitz_map(&m, 50, 0, 1e-9), Err(EstimateError::NoAdmissible(50)));
    }

    #[test]
    fn median_on_segment_is_one_lipschitz() {
        let c = gen(CurveSpec::Segment { from: vec![0.0], to: vec![1.0], n: 500 });
        let h = median_mixer(&c).unwrap();
        let sampler = DomainSampler::for_handle(&h).unwrap();
        let r = lipschitz_handle(&h, &sampler, LipOptions { budget: 100_000, ..Default::default() }, &[]).unwrap();
        assert!(r.value <= 1.0 + 1e-12 && r.value >= 1.0 - 1e-3, "{}", r.value);
        assert_eq!(r.witness.len(), 6);
    }

    #[test]
    fn lipschitz_estimates_are_nested_in_budget() {
        let c = gen(CurveSpec::GraphCurve { profile: Profile::Cusp, extent: 1.0, n: 301 });
        let h = crate::constructions::graph_mean_handle(&c, 2).unwrap();
        let sampler = DomainSampler::for_handle(&h).unwrap();
        let mut last = 0.0;
        for budget in [10, 100, 1000, 10_000] {
            let v = lipschitz_handle(&h, &sampler, LipOptions { budget, seed: 4, ..Default::default() }, &[]).unwrap().value;
            assert!(v >= last);
            last = v;
        }
    }

    #[test]
    fn turning_examples() {
        let c = gen(CurveSpec::Circle { r: 1.0, n: 1000 });
        let r = turning_constant(&c, TurningMode::Exhaustive, 0).unwrap();
        assert!((r.value - 1.0).abs() <= 10.0 / 1000.0, "{}", r.value);
        let p = gen(CurveSpec::GraphCurve { profile: Profile::Parabola, extent: 10.0, n: 201 });
        assert!(turning_constant(&p, TurningMode::Exhaustive, 0).unwrap().value >= 5.0);
        let b = gen(CurveSpec::BoxCurve { t: 1.05, per_edge: 20 });
        assert!(turning_constant(&b, TurningMode::Exhaustive, 0).unwrap().value >= 10.0);
    }

    /// Direct evaluation over all pairs with a fresh diameter per subarc.
    fn turning_oracle(c: &SampledCurve) -> f64 {
        let n = c.len();
        let brute = |ids: &[usize]| {
            let mut m = 0.0f64;
            for &a in ids {
                for &b in ids {
                    m = m.max(c.space().d(a, b));
                }
            }
            m
        };
        let mut best = 0.0f64;
        for i in 0..n {
            for j in i + 1..n {
                let d = c.space().d(i, j);
                let diam = if c.is_circle() {
                    let fwd: Vec<usize> = (i..=j).collect();
                    let back: Vec<usize> = (j..n).chain(0..=i).collect();
                    brute(&fwd).min(brute(&back))
                } else {
                    brute(&(i..=j).collect::<Vec<_>>())
                };
                best = best.max(diam / d);
            }
        }
        best
    }

    #[test]
    fn exhaustive_turning_matches_oracle() {
        for spec in [
            CurveSpec::BoxCurve { t: 1.3, per_edge: 5 },
            CurveSpec::SnowflakeVertex { depth: 2 },
            CurveSpec::Circle { r: 1.0, n: 7 },
            CurveSpec::Circle { r: 1.0, n: 8 },
            CurveSpec::GraphCurve { profile: Profile::Cusp, extent: 1.0, n: 31 },
            CurveSpec::CirclesArc { n_max: 3, per_circle: 10, per_gap: 3 },
        ] {
            let c = gen(spec.clone());
            let r = turning_constant(&c, TurningMode::Exhaustive, 0).unwrap();
            assert_eq!(r.value, turning_oracle(&c), "{spec:?}");
        }
    }

    #[test]
    fn budgeted_turning_never_exceeds_exhaustive() {
        for spec in [CurveSpec::BoxCurve { t: 1.2, per_edge: 60 }, CurveSpec::SnowflakeVertex { depth: 4 }] {
            let c = gen(spec);
            let ex = turning_constant(&c, TurningMode::Exhaustive, 0).unwrap().value;
            for seed in 0..3 {
                let b = turning_constant(&c, TurningMode::Budget(2000), seed).unwrap().value;
                assert!(b <= ex);
            }
        }
    }

    #[test]
    fn chain_examples() {
        let two = generate(&CurveSpec::TwoLines { extent: 10.0, n: 201 }).unwrap();
        let s = two.space();
        assert_eq!(chain_components(s, 0.5).unwrap().len(), 2);
        assert_eq!(chain_components(s, 1.5).unwrap().len(), 1);
        assert!(!is_chain_connected(s, 0, 201, 0.5).unwrap());
        assert!(is_chain_connected(s, 0, 200, 0.5).unwrap());
    }

    #[test]
    fn chain_components_match_brute_force_on_matrix_copy() {
        let mut rng = rng_for(21, 0);
        let pts: Vec<Vec<f64>> = (0..60).map(|_| vec![rng.gen_range(0.0..3.0), rng.gen_range(0.0..3.0)]).collect();
        let e = MetricSpace::euclidean(pts).unwrap();
        let rows: Vec<Vec<f64>> = (0..e.len()).map(|a| (0..e.len()).map(|b| e.d(a, b)).collect()).collect();
        let m = MetricSpace::from_matrix(rows).unwrap();
        for eps in [0.1, 0.3, 0.5] {
            assert_eq!(chain_components(&e, eps).unwrap(), chain_components(&m, eps).unwrap());
        }
    }

    /// Minimax step by enumerating every simple chain.
    fn minimax_oracle(s: &MetricSpace, a: usize, b: usize) -> f64 {
        fn go(s: &MetricSpace, u: usize, b: usize, seen: &mut Vec<bool>, worst: f64, best: &mut f64) {
            if u == b {
                *best = best.min(worst);
                return;
            }
            for v in 0..s.len() {
                if !seen[v] {
                    seen[v] = true;
                    go(s, v, b, seen, worst.max(s.d(u, v)), best);
                    seen[v] = false;
                }
            }
        }
        let mut seen = vec![false; s.len()];
        seen[a] = true;
        let mut best = f64::INFINITY;
        go(s, a, b, &mut seen, 0.0, &mut best);
        best
    }

    #[test]
    fn uniform_disconnectedness_examples() {
        assert_eq!(uniform_disconnectedness(&line(&[0.0, 1.0])).unwrap().value, 1.0);
        assert_eq!(uniform_disconnectedness(&line(&[0.0, 0.5, 1.0])).unwrap().value, 0.5);
        let mut rng = rng_for(31, 0);
        for _ in 0..20 {
            let n = rng.gen_range(2..=7);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
            let s = MetricSpace::euclidean(pts).unwrap();
            let t = minimax_table(&s);
            for a in 0..n {
                for b in 0..n {
                    if a != b {
                        assert!((t[a * n + b] - minimax_oracle(&s, a, b)).abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn doubling_examples() {
        let seg = gen(CurveSpec::Segment { from: vec![0.0], to: vec![1.0], n: 201 });
        for r in [0.05, 0.1, 0.3, 1.0] {
            let rep = doubling_estimate(seg.space(), &[r], &Centers::Sampled { count: 50, seed: 3 }).unwrap();
            assert!(rep.value <= 3.0, "r = {r}: {}", rep.value);
        }
        assert_eq!(doubling_estimate(&line(&[0.5]), &[1.0], &Centers::Explicit(vec![0])).unwrap().value, 1.0);
        let tv = gen(CurveSpec::TvCurve { terms: 20, per_segment: 20 });
        let zero = tv.len() - 1;
        let tv_n = doubling_estimate(tv.space(), &[0.2], &Centers::Explicit(vec![zero])).unwrap().value;
        let mid = seg.len() / 2;
        let seg_n = doubling_estimate(seg.space(), &[0.2], &Centers::Explicit(vec![mid])).unwrap().value;
        assert!(tv_n > seg_n, "{tv_n} vs {seg_n}");
    }

    #[test]
    fn qh_profiles() {
        let s = line(&(0..200).map(|k| (k as f64 * 0.37).sin() * 3.0 + k as f64 * 1e-3).collect::<Vec<_>>());
        let id = MapSample::from_fn(&s, Norm::Euclidean, |x| x.to_vec()).unwrap();
        for p in qh_profile(&id, 5000, 2, 4).unwrap() {
            assert_eq!(p.t_in, p.t_out);
        }
        let double = MapSample::from_fn(&s, Norm::Euclidean, |x| vec![2.0 * x[0]]).unwrap();
        for p in qh_profile(&double, 5000, 2, 4).unwrap() {
            assert_eq!(p.t_in, p.t_out);
        }
        // x -> 1.5x + 0.5 sin x is 2-bi-Lipschitz
        let bl = MapSample::from_fn(&s, Norm::Euclidean, |x| vec![1.5 * x[0] + 0.5 * x[0].sin()]).unwrap();
        let prof = qh_profile(&bl, 20_000, 2, 4).unwrap();
        assert!(prof.len() > 4);
        for p in prof {
            assert!(p.t_out <= 4.0 * p.t_in * (1.0 + 1e-12));
        }
    }

    #[test]
    fn absorption_examples() {
        let mut rng = rng_for(41, 0);
        let pts: Vec<Vec<f64>> = (0..300).map(|_| vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)]).collect();
        let plane = MetricSpace::euclidean(pts).unwrap();
        let cm = coordinate_median_mixer(&plane).unwrap();
        let sampler = DomainSampler::for_handle(&cm).unwrap();
        let rep = absorption_check(&cm, &sampler, 2000, 1, 1e-9).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.displacement_constant <= rep.lip_estimate);

        let arc = gen(CurveSpec::GraphCurve { profile: Profile::Parabola, extent: 5.0, n: 301 });
        let med = median_mixer(&arc).unwrap();
        let sampler = DomainSampler::for_handle(&med).unwrap();
        assert!(absorption_check(&med, &sampler, 2000, 1, 1e-9).unwrap().passed);

        let circle = gen(CurveSpec::Circle { r: 1.0, n: 500 });
        let sigma = circle_local_mixer(&circle, 1.0).unwrap();
        let sampler = DomainSampler::for_handle(&sigma).unwrap();
        let rep = absorption_check(&sigma, &sampler, 2000, 1, 1e-9).unwrap();
        assert!(rep.passed && rep.checked == 2000, "{rep:?}");
        let wrong = DomainSampler::new(circle.space(), Flavor::Full, 0.0).unwrap();
        assert!(absorption_check(&sigma, &wrong, 10, 1, 1e-9).is_err());
    }

    #[test]
    fn absorption_detects_a_bad_mixer() {
        let s = line(&[0.0, 1.0, 2.0, 3.0]);
        let bad = Handle::new(HandleKind::Mixer, 3, Domain::Full, true, &s, |t| Ok(s.point(t[2]).to_vec())).unwrap();
        let sampler = DomainSampler::for_handle(&bad).unwrap();
        let rep = absorption_check(&bad, &sampler, 100, 0, 1e-9).unwrap();
        assert!(!rep.passed);
        assert!(rep.violation.is_some());
    }

    #[test]
    fn samplers_stay_in_their_domains() {
        let c = gen(CurveSpec::Circle { r: 1.0, n: 400 });
        for flavor in [Flavor::Delta, Flavor::DeltaTilde] {
            let s = DomainSampler::new(c.space(), flavor, 0.1).unwrap();
            let mut rng = rng_for(5, 0);
            for _ in 0..2000 {
                if let Some(t) = s.sample(&mut rng, 3) {
                    assert!(s.contains(&t));
                    let ds = [c.space().d(t[0], t[1]), c.space().d(t[1], t[2]), c.space().d(t[0], t[2])];
                    match flavor {
                        Flavor::Delta => assert!(ds.iter().all(|&d| d <= 0.1)),
                        _ => assert!(ds.iter().any(|&d| d <= 0.1)),
                    }
                }
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn chain_components_are_invariant_under_reordering(seed in 0u64..1000, eps in 0.05f64..0.6) {
            let mut rng = rng_for(seed, 0);
            let n = 40;
            let pts: Vec<Vec<f64>> = (0..n).map(|_| vec![rng.gen_range(0.0..2.0), rng.gen_range(0.0..2.0)]).collect();
            let mut perm: Vec<usize> = (0..n).collect();
            perm.shuffle(&mut rng);
            let shuffled: Vec<Vec<f64>> = perm.iter().map(|&i| pts[i].clone()).collect();
            let a = chain_components(&MetricSpace::euclidean(pts).unwrap(), eps).unwrap();
            let b = chain_components(&MetricSpace::euclidean(shuffled).unwrap(), eps).unwrap();
            let mut mapped: Vec<Vec<usize>> = b.iter().map(|c| { let mut v: Vec<usize> = c.iter().map(|&i| perm[i]).collect(); v.sort(); v }).collect();
            mapped.sort();
            prop_assert_eq!(a, mapped);
        }

        #[test]
        fn subarc_diameter_dominates_chord(seed in 0u64..1000) {
            let c = gen(CurveSpec::SnowflakeVertex { depth: 2 });
            let mut rng = rng_for(seed, 0);
            let (i, j) = (rng.gen_range(0..c.len()), rng.gen_range(0..c.len()));
            let rd = RangeDiameter::new(c.space());
            prop_assert!(rd.query(&[(i.min(j), i.max(j))]) >= c.space().d(i, j));
        }
    }

    #[test]
    fn unit_circle_turning_is_near_one_at_every_refinement() {
        for n in [10, 37, 100, 301] {
            let c = gen(CurveSpec::Circle { r: 1.0, n });
            let v = turning_constant(&c, TurningMode::Exhaustive, 0).unwrap().value;
            assert!((v - 1.0).abs() <= 10.0 / n as f64, "n = {n}: {v}");
        }
    }
}
