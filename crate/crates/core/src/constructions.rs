//! Explicit means, mixers and retractions as evaluable handles.
//!
//! A [`Handle`] evaluates tuples of point ids of one space and returns output
//! coordinates in the ambient norm of that space. Each handle carries its
//! domain (full product, `Δ_r` or `Δ̃_r`) and refuses tuples outside it.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{med3, CurveError, CurveSpec, Profile, SampledCurve, Topology};
use crate::diameter::diameter;
use crate::metric::{MetricError, MetricSpace, Norm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConstructionError {
    #[error("tuple outside the domain: d({0}, {1}) = {2} exceeds r = {3}")]
    OutsideDelta(usize, usize, f64, f64),
    #[error("tuple outside the domain: no pair within r = {1} (closest pair {0:?})")]
    OutsideDeltaTilde((usize, usize), f64),
    #[error("handle expects {expected} arguments, got {found}")]
    Arity { expected: usize, found: usize },
    #[error("needs {0}")]
    WrongInput(&'static str),
    #[error("phi exceeds psi at x = {x}: {phi} > {psi}")]
    PhiAbovePsi { x: f64, phi: f64, psi: f64 },
    #[error("invalid piecewise-linear function: {0}")]
    BadFunction(String),
    #[error("path must run from {expected:?} to {found:?}")]
    Endpoints {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("internal consistency: {0}")]
    Internal(String),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Curve(#[from] CurveError),
}

type Result<T> = std::result::Result<T, ConstructionError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HandleKind {
    Mixer,
    Mean,
}

/// Where a handle is defined.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "r", rename_all = "kebab-case")]
pub enum Domain {
    Full,
    /// all pairwise distances at most `r`
    Delta(f64),
    /// some pairwise distance at most `r`
    DeltaTilde(f64),
}

impl Domain {
    pub fn check(&self, space: &MetricSpace, t: &[usize]) -> Result<()> {
        match *self {
            Domain::Full => Ok(()),
            Domain::Delta(r) => {
                for i in 0..t.len() {
                    for j in i + 1..t.len() {
                        let d = space.d(t[i], t[j]);
                        if !(d <= r) {
                            return Err(ConstructionError::OutsideDelta(t[i], t[j], d, r));
                        }
                    }
                }
                Ok(())
            }
            Domain::DeltaTilde(r) => {
                let mut best = (f64::INFINITY, (0, 0));
                for i in 0..t.len() {
                    for j in i + 1..t.len() {
                        let d = space.d(t[i], t[j]);
                        if d <= r {
                            return Ok(());
                        }
                        if d < best.0 {
                            best = (d, (t[i], t[j]));
                        }
                    }
                }
                Err(ConstructionError::OutsideDeltaTilde(best.1, r))
            }
        }
    }

    pub fn contains(&self, space: &MetricSpace, t: &[usize]) -> bool {
        self.check(space, t).is_ok()
    }

    pub fn radius(&self) -> Option<f64> {
        match *self {
            Domain::Full => None,
            Domain::Delta(r) | Domain::DeltaTilde(r) => Some(r),
        }
    }
}

type Evaluator<'a> = Box<dyn Fn(&[usize]) -> Result<Vec<f64>> + Send + Sync + 'a>;

/// An evaluable mean or mixer on the points of one space.
pub struct Handle<'a> {
    kind: HandleKind,
    arity: usize,
    domain: Domain,
    symmetric: bool,
    space: &'a MetricSpace,
    norm: Norm,
    eval: Evaluator<'a>,
}

impl fmt::Debug for Handle<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Handle")
            .field("kind", &self.kind)
            .field("arity", &self.arity)
            .field("domain", &self.domain)
            .field("symmetric", &self.symmetric)
            .finish_non_exhaustive()
    }
}

impl<'a> Handle<'a> {
    pub fn new(
        kind: HandleKind,
        arity: usize,
        domain: Domain,
        symmetric: bool,
        space: &'a MetricSpace,
        eval: impl Fn(&[usize]) -> Result<Vec<f64>> + Send + Sync + 'a,
    ) -> Result<Self> {
        let norm = space.norm().ok_or(MetricError::NotEmbedded)?;
        Ok(Self { kind, arity, domain, symmetric, space, norm, eval: Box::new(eval) })
    }

    pub fn kind(&self) -> HandleKind {
        self.kind
    }
    pub fn arity(&self) -> usize {
        self.arity
    }
    pub fn domain(&self) -> Domain {
        self.domain
    }
    pub fn symmetric(&self) -> bool {
        self.symmetric
    }
    pub fn space(&self) -> &'a MetricSpace {
        self.space
    }
    pub fn norm(&self) -> Norm {
        self.norm
    }

    /// Evaluates after checking ids, arity and domain.
    pub fn eval(&self, t: &[usize]) -> Result<Vec<f64>> {
        if t.len() != self.arity {
            return Err(ConstructionError::Arity { expected: self.arity, found: t.len() });
        }
        for &i in t {
            self.space.check_id(i)?;
        }
        self.domain.check(self.space, t)?;
        (self.eval)(t)
    }

    pub fn in_domain(&self, t: &[usize]) -> bool {
        t.len() == self.arity && t.iter().all(|&i| i < self.space.len()) && self.domain.contains(self.space, t)
    }
}

/// Componentwise median of three vectors.
pub fn coordinate_median(x: &[f64], y: &[f64], z: &[f64]) -> Result<Vec<f64>> {
    if x.len() != y.len() || x.len() != z.len() {
        let found = if x.len() != y.len() { y.len() } else { z.len() };
        return Err(MetricError::DimensionMismatch { index: 1, expected: x.len(), found }.into());
    }
    Ok((0..x.len()).map(|k| median(x[k], y[k], z[k])).collect())
}

#[inline]
fn median(a: f64, b: f64, c: f64) -> f64 {
    a.min(b).max(b.min(c)).max(a.min(c))
}

/// Coordinate median of three points of an embedded space.
pub fn coordinate_median_mixer(space: &MetricSpace) -> Result<Handle<'_>> {
    Handle::new(HandleKind::Mixer, 3, Domain::Full, true, space, move |t| {
        coordinate_median(space.point(t[0]), space.point(t[1]), space.point(t[2]))
    })
}

/// The median in the order of an arc.
pub fn median_mixer(c: &SampledCurve) -> Result<Handle<'_>> {
    if c.topology() != Topology::Arc {
        return Err(ConstructionError::WrongInput("an arc"));
    }
    let params = c.params();
    Handle::new(HandleKind::Mixer, 3, Domain::Full, true, c.space(), move |t| {
        Ok(c.point(med3(t[0], t[1], t[2], |i| params[i])).to_vec())
    })
}

/// `(min |x_k|) sign(max x_k)`.
pub fn graph_mean(xs: &[f64]) -> f64 {
    let m = xs.iter().map(|x| x.abs()).fold(f64::INFINITY, f64::min);
    let top = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if top > 0.0 {
        m
    } else if top < 0.0 {
        -m
    } else {
        0.0
    }
}

/// The graph mean lifted to a graph curve through the x-coordinates.
pub fn graph_mean_handle(c: &SampledCurve, arity: usize) -> Result<Handle<'_>> {
    let Some(CurveSpec::GraphCurve { profile, .. }) = c.spec() else {
        return Err(ConstructionError::WrongInput("a graph-curve"));
    };
    graph_mean_with_profile(c.space(), profile.clone(), arity)
}

/// Graph mean for points `(x, f(x))` of `space` with the given profile.
pub fn graph_mean_with_profile(space: &MetricSpace, profile: Profile, arity: usize) -> Result<Handle<'_>> {
    if arity < 2 {
        return Err(ConstructionError::WrongInput("arity at least 2"));
    }
    if space.dim() != 2 {
        return Err(ConstructionError::WrongInput("a planar graph"));
    }
    Handle::new(HandleKind::Mean, arity, Domain::Full, true, space, move |t| {
        let xs: Vec<f64> = t.iter().map(|&i| space.point(i)[0]).collect();
        let m = graph_mean(&xs);
        Ok(vec![m, profile.eval(m)])
    })
}

/// Positions along a circle by cumulative edge length, plus total length.
fn circle_positions(c: &SampledCurve) -> (Vec<f64>, f64) {
    let edges = c.edge_lengths();
    let mut pos = Vec::with_capacity(c.len());
    let mut acc = 0.0;
    for k in 0..c.len() {
        pos.push(acc);
        acc += edges[k];
    }
    (pos, acc)
}

/// Points of `t` in the order of the arc that is the complement of their
/// largest circular gap. Gap ties go to the gap starting at the lowest index.
fn containing_arc_order(t: &[usize], pos: &[f64], total: f64) -> Vec<usize> {
    let mut v = t.to_vec();
    v.sort_unstable();
    let m = v.len();
    let mut best = (f64::NEG_INFINITY, 0);
    for k in 0..m {
        let gap = if k + 1 < m { pos[v[k + 1]] - pos[v[k]] } else { total - pos[v[m - 1]] + pos[v[0]] };
        if gap > best.0 {
            best = (gap, k);
        }
    }
    let start = (best.1 + 1) % m;
    (0..m).map(|k| v[(start + k) % m]).collect()
}

fn circle_radius(c: &SampledCurve, turning: f64) -> Result<f64> {
    if !c.is_circle() {
        return Err(ConstructionError::WrongInput("a circle"));
    }
    if !(turning >= 1.0) {
        return Err(ConstructionError::WrongInput("a turning constant C >= 1"));
    }
    let ids: Vec<usize> = (0..c.len()).collect();
    Ok(diameter(c.space(), &ids) / (9.0 * turning))
}

/// Median on the short arc containing three close points of a circle.
pub fn circle_local_mixer(c: &SampledCurve, turning: f64) -> Result<Handle<'_>> {
    let r = circle_radius(c, turning)?;
    let (pos, total) = circle_positions(c);
    Handle::new(HandleKind::Mixer, 3, Domain::Delta(r), true, c.space(), move |t| {
        let order = containing_arc_order(t, &pos, total);
        Ok(c.point(order[1]).to_vec())
    })
}

/// First point, in the orientation of the circle, of the short arc through two close points.
pub fn circle_local_mean(c: &SampledCurve, turning: f64) -> Result<Handle<'_>> {
    let r = circle_radius(c, turning)?;
    let (pos, total) = circle_positions(c);
    Handle::new(HandleKind::Mean, 2, Domain::Delta(r), true, c.space(), move |t| {
        let order = containing_arc_order(t, &pos, total);
        Ok(c.point(order[0]).to_vec())
    })
}

/// Continuous piecewise-linear function on `[xs[0], xs[last]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinear {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl PiecewiseLinear {
    pub fn new(xs: Vec<f64>, ys: Vec<f64>) -> Result<Self> {
        if xs.len() != ys.len() || xs.is_empty() {
            return Err(ConstructionError::BadFunction("need matching nonempty breakpoints and values".into()));
        }
        if xs.iter().chain(&ys).any(|v| !v.is_finite()) {
            return Err(ConstructionError::BadFunction("non-finite breakpoint or value".into()));
        }
        if xs.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(ConstructionError::BadFunction("breakpoints must increase".into()));
        }
        Ok(Self { xs, ys })
    }

    pub fn interval(&self) -> (f64, f64) {
        (self.xs[0], *self.xs.last().unwrap())
    }

    pub fn breakpoints(&self) -> &[f64] {
        &self.xs
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.xs.partition_point(|&b| b <= x);
        if k == 0 {
            return self.ys[0];
        }
        if k == self.xs.len() {
            return *self.ys.last().unwrap();
        }
        let (x0, x1, y0, y1) = (self.xs[k - 1], self.xs[k], self.ys[k - 1], self.ys[k]);
        y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    }

    /// Largest slope magnitude.
    pub fn lipschitz(&self) -> f64 {
        (1..self.xs.len())
            .map(|k| ((self.ys[k] - self.ys[k - 1]) / (self.xs[k] - self.xs[k - 1])).abs())
            .fold(0.0, f64::max)
    }
}

/// Retraction of the plane onto `{x in I, phi(x) <= y <= psi(x)}`.
#[derive(Debug, Clone, PartialEq)]
pub struct StripRetraction {
    phi: PiecewiseLinear,
    psi: PiecewiseLinear,
    lo: f64,
    hi: f64,
}

pub fn strip_retraction(phi: PiecewiseLinear, psi: PiecewiseLinear) -> Result<StripRetraction> {
    let (lo, hi) = phi.interval();
    if psi.interval() != (lo, hi) {
        return Err(ConstructionError::BadFunction("phi and psi need the same interval".into()));
    }
    let mut xs: Vec<f64> = phi.breakpoints().iter().chain(psi.breakpoints()).copied().collect();
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    for x in xs {
        let (a, b) = (phi.eval(x), psi.eval(x));
        if a > b {
            return Err(ConstructionError::PhiAbovePsi { x, phi: a, psi: b });
        }
    }
    Ok(StripRetraction { phi, psi, lo, hi })
}

impl StripRetraction {
    pub fn apply(&self, p: [f64; 2]) -> [f64; 2] {
        let x = p[0].clamp(self.lo, self.hi);
        [x, median(p[1], self.phi.eval(x), self.psi.eval(x))]
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.lo && p[0] <= self.hi && self.phi.eval(p[0]) <= p[1] && p[1] <= self.psi.eval(p[0])
    }

    /// `sqrt(L^2 + 1)` with `L` the larger slope bound of phi and psi.
    pub fn lipschitz_bound(&self) -> f64 {
        let l = self.phi.lipschitz().max(self.psi.lipschitz());
        (l * l + 1.0).sqrt()
    }
}

/// `||x| - 1| + |y|`.
pub fn box_level(p: [f64; 2]) -> f64 {
    (p[0].abs() - 1.0).abs() + p[1].abs()
}

/// The retraction onto the closed region bounded by the box curve.
pub fn box_strip(t: f64) -> Result<StripRetraction> {
    let xs = vec![-1.0 - t, -1.0, 0.0, 1.0, 1.0 + t];
    let psi = vec![0.0, t, t - 1.0, t, 0.0];
    let phi = psi.iter().map(|v| -v).collect();
    strip_retraction(PiecewiseLinear::new(xs.clone(), phi)?, PiecewiseLinear::new(xs, psi)?)
}

/// Retraction of the box-curve neighbourhood onto the curve: radial
/// projection from `(±1, 0)` inside, strip retraction outside.
#[derive(Debug, Clone)]
pub struct BoxRetraction {
    t: f64,
    strip: StripRetraction,
    corners: Vec<[f64; 2]>,
}

const ON_CURVE: f64 = 1e-12;
const SNAP: f64 = 1e-9;

impl BoxRetraction {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 1.0 && t < 2.0) {
            return Err(ConstructionError::WrongInput("t in (1, 2)"));
        }
        Ok(Self { t, strip: box_strip(t)?, corners: crate::curve::box_corners(t) })
    }

    pub fn apply(&self, p: [f64; 2]) -> Result<[f64; 2]> {
        let t = self.t;
        let g = box_level(p);
        if (g - t).abs() <= ON_CURVE {
            return Ok(p);
        }
        let raw = if g < t {
            if g < 0.5 || p[0] == 0.0 {
                return Err(ConstructionError::Internal(format!(
                    "({}, {}) lies outside the retraction domain",
                    p[0], p[1]
                )));
            }
            let (cx, s) = (p[0].signum(), t / g);
            [cx + s * (p[0] - cx), s * p[1]]
        } else {
            self.strip.apply(p)
        };
        let (q, d) = self.nearest_on_curve(raw);
        if d > SNAP {
            return Err(ConstructionError::Internal(format!(
                "image ({}, {}) is {d:e} away from the curve",
                raw[0], raw[1]
            )));
        }
        Ok(q)
    }

    fn nearest_on_curve(&self, p: [f64; 2]) -> ([f64; 2], f64) {
        let m = self.corners.len();
        let mut best = (p, f64::INFINITY);
        for k in 0..m {
            let q = closest_on_segment(p, self.corners[k], self.corners[(k + 1) % m]);
            let d = ((q[0] - p[0]).powi(2) + (q[1] - p[1]).powi(2)).sqrt();
            if d < best.1 {
                best = (q, d);
            }
        }
        best
    }
}

pub(crate) fn closest_on_segment(p: [f64; 2], a: [f64; 2], b: [f64; 2]) -> [f64; 2] {
    let (dx, dy) = (b[0] - a[0], b[1] - a[1]);
    let len2 = dx * dx + dy * dy;
    if len2 == 0.0 {
        return a;
    }
    let s = (((p[0] - a[0]) * dx + (p[1] - a[1]) * dy) / len2).clamp(0.0, 1.0);
    if s == 0.0 {
        a
    } else if s == 1.0 {
        b
    } else {
        [a[0] + s * dx, a[1] + s * dy]
    }
}

/// Coordinate median followed by the box retraction, on triples of diameter at most 1/6.
pub fn box_mixer(c: &SampledCurve) -> Result<Handle<'_>> {
    let Some(&CurveSpec::BoxCurve { t, .. }) = c.spec() else {
        return Err(ConstructionError::WrongInput("a box-curve"));
    };
    let f = BoxRetraction::new(t)?;
    let space = c.space();
    Handle::new(HandleKind::Mixer, 3, Domain::Delta(1.0 / 6.0), true, space, move |tr| {
        let w = coordinate_median(space.point(tr[0]), space.point(tr[1]), space.point(tr[2]))?;
        Ok(f.apply([w[0], w[1]])?.to_vec())
    })
}

/// `y = sqrt|x|` on the graph, `y = 1, |x| < 1` on the top segment.
fn on_top_segment(p: &[f64]) -> bool {
    p[1] == 1.0 && p[0].abs() < 1.0
}

/// Local mean on the cusp Jordan curve with domain `Δ_1`.
pub fn cusp_jordan_local_mean(c: &SampledCurve) -> Result<Handle<'_>> {
    if !matches!(c.spec(), Some(CurveSpec::CuspJordan { .. })) {
        return Err(ConstructionError::WrongInput("a cusp-jordan curve"));
    }
    let space = c.space();
    Handle::new(HandleKind::Mean, 2, Domain::Delta(1.0), true, space, move |t| {
        let (a, b) = (space.point(t[0]), space.point(t[1]));
        Ok(cusp_mean(a, b))
    })
}

/// The cusp-curve mean on coordinates.
pub fn cusp_mean(a: &[f64], b: &[f64]) -> Vec<f64> {
    match (on_top_segment(a), on_top_segment(b)) {
        (false, false) => {
            let m = graph_mean(&[a[0], b[0]]);
            vec![m, m.abs().sqrt()]
        }
        (false, true) => a.to_vec(),
        (true, false) => b.to_vec(),
        (true, true) => {
            if a == b {
                return a.to_vec();
            }
            let dist_c = |p: &[f64]| (1.0 - p[0].abs()).hypot(p[1] - 1.0);
            let (da, db) = (dist_c(a), dist_c(b));
            (0..2).map(|k| (db * a[k] + da * b[k]) / (da + db)).collect()
        }
    }
}

/// A sampled path `t -> point`, possibly with repeated points.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    pub params: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub norm: Norm,
}

impl PathSample {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn diameter(&self) -> Result<f64> {
        let space = self.space()?;
        let ids: Vec<usize> = (0..space.len()).collect();
        Ok(diameter(&space, &ids))
    }

    fn space(&self) -> Result<MetricSpace> {
        let backend = match self.norm {
            Norm::Euclidean => crate::metric::Backend::Euclidean,
            Norm::Sup => crate::metric::Backend::Sup,
        };
        Ok(MetricSpace::embedded(backend, self.points.clone())?)
    }

    /// The path as an arc, dropping consecutive repeats.
    pub fn to_curve(&self) -> Result<SampledCurve> {
        let mut pts: Vec<Vec<f64>> = Vec::new();
        let mut params = Vec::new();
        for (p, &t) in self.points.iter().zip(&self.params) {
            if pts.last() != Some(p) {
                pts.push(p.clone());
                params.push(t);
            }
        }
        let backend = match self.norm {
            Norm::Euclidean => crate::metric::Backend::Euclidean,
            Norm::Sup => crate::metric::Backend::Sup,
        };
        Ok(SampledCurve::new(MetricSpace::embedded(backend, pts)?, Topology::Arc, params, None)?)
    }
}

fn check_path(path: &[usize], a: usize, b: usize) -> Result<()> {
    match (path.first(), path.last()) {
        (Some(&p), Some(&q)) if p == a && q == b => Ok(()),
        (Some(&p), Some(&q)) => Err(ConstructionError::Endpoints { expected: (a, b), found: (p, q) }),
        _ => Err(ConstructionError::WrongInput("a nonempty path")),
    }
}

fn uniform_params(m: usize) -> Vec<f64> {
    if m == 1 {
        return vec![0.0];
    }
    (0..m).map(|k| k as f64 / (m - 1) as f64).collect()
}

/// `t -> σ(a, b, Γ(t))` along a path `Γ` of point ids from `a` to `b`.
pub fn mixer_path(sigma: &Handle<'_>, a: usize, b: usize, path: &[usize]) -> Result<PathSample> {
    if sigma.kind() != HandleKind::Mixer {
        return Err(ConstructionError::WrongInput("a mixer"));
    }
    check_path(path, a, b)?;
    let points = path.iter().map(|&p| sigma.eval(&[a, b, p])).collect::<Result<Vec<_>>>()?;
    Ok(PathSample { params: uniform_params(path.len()), points, norm: sigma.norm() })
}

/// `μ(Γ(t), a)` on `[0, 1]` followed by `μ(Γ(t - 1), b)` on `[1, 2]`.
/// Entry `k` and entry `k + len/2` sit at parameters `t` and `t + 1`.
pub fn symmetrized_curve(mu: &Handle<'_>, a: usize, b: usize, path: &[usize]) -> Result<PathSample> {
    if mu.kind() != HandleKind::Mean || mu.arity() != 2 {
        return Err(ConstructionError::WrongInput("a binary mean"));
    }
    check_path(path, a, b)?;
    let half = uniform_params(path.len());
    let mut points = Vec::with_capacity(2 * path.len());
    for &p in path {
        points.push(mu.eval(&[p, a])?);
    }
    for &p in path {
        points.push(mu.eval(&[p, b])?);
    }
    let params = half.iter().copied().chain(half.iter().map(|t| t + 1.0)).collect();
    Ok(PathSample { params, points, norm: mu.norm() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::generate;
    use crate::sampling::rng_for;
    use proptest::prelude::*;
    use rand::Rng;
    use std::f64::consts::TAU;

    fn gen(spec: CurveSpec) -> SampledCurve {
        generate(&spec).unwrap().into_curve().unwrap()
    }

    fn unit_segment(n: usize) -> SampledCurve {
        gen(CurveSpec::Segment { from: vec![0.0], to: vec![1.0], n })
    }

    #[test]
    fn coordinate_median_examples() {
        assert_eq!(coordinate_median(&[0.0, 0.0], &[1.0, 0.0], &[1.0, 1.0]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(coordinate_median(&[2.0, 3.0], &[2.0, 3.0], &[7.0, -1.0]).unwrap(), vec![2.0, 3.0]);
        assert!(coordinate_median(&[0.0], &[0.0, 1.0], &[1.0]).is_err());
        let mut rng = rng_for(2, 0);
        for _ in 0..1000 {
            let p: Vec<Vec<f64>> = (0..3).map(|_| (0..3).map(|_| rng.gen_range(-1.0..1.0)).collect()).collect();
            let m = coordinate_median(&p[0], &p[1], &p[2]).unwrap();
            for perm in [[0, 2, 1], [1, 0, 2], [1, 2, 0], [2, 0, 1], [2, 1, 0]] {
                assert_eq!(coordinate_median(&p[perm[0]], &p[perm[1]], &p[perm[2]]).unwrap(), m);
            }
        }
    }

    #[test]
    fn median_mixer_on_segment() {
        let c = unit_segment(11);
        let m = median_mixer(&c).unwrap();
        assert_eq!(m.eval(&[1, 9, 4]).unwrap(), vec![0.4]);
        let circle = gen(CurveSpec::Circle { r: 1.0, n: 10 });
        assert!(median_mixer(&circle).is_err());
    }

    #[test]
    fn graph_mean_examples() {
        assert_eq!(graph_mean(&[-2.0, 3.0]), 2.0);
        assert_eq!(graph_mean(&[1.5, 1.5]), 1.5);
        assert_eq!(graph_mean(&[-2.0, -3.0, -1.0]), -1.0);
        assert_eq!(graph_mean(&[-2.0, 0.0]), 0.0);
    }

    #[test]
    fn graph_mean_handle_lifts_to_curve() {
        let c = gen(CurveSpec::GraphCurve { profile: Profile::Parabola, extent: 5.0, n: 11 });
        let mu = graph_mean_handle(&c, 2).unwrap();
        // x = -2 is id 3, x = 3 is id 8
        assert_eq!(mu.eval(&[3, 8]).unwrap(), vec![2.0, 4.0]);
        assert_eq!(mu.eval(&[8, 8]).unwrap(), c.point(8).to_vec());
    }

    #[test]
    fn circle_mixer_and_mean_examples() {
        // angles 0, 0.05, 0.1 on a circle with step 0.05 radians
        let n = (TAU / 0.05).round() as usize;
        let c = gen(CurveSpec::Circle { r: 1.0, n });
        let sigma = circle_local_mixer(&c, 1.0).unwrap();
        assert_eq!(sigma.domain(), Domain::Delta(diameter(c.space(), &(0..n).collect::<Vec<_>>()) / 9.0));
        for t in [[0, 1, 2], [2, 0, 1], [1, 2, 0]] {
            assert_eq!(sigma.eval(&t).unwrap(), c.point(1).to_vec());
        }
        // wrapping around the start
        assert_eq!(sigma.eval(&[n - 1, 0, 1]).unwrap(), c.point(0).to_vec());
        assert!(matches!(sigma.eval(&[0, 1, n / 4]), Err(ConstructionError::OutsideDelta(0, _, _, _))));
        assert_eq!(sigma.eval(&[3, 3, 5]).unwrap(), c.point(3).to_vec());

        let mu = circle_local_mean(&c, 1.0).unwrap();
        assert_eq!(mu.eval(&[2, 4]).unwrap(), c.point(2).to_vec());
        assert_eq!(mu.eval(&[4, 2]).unwrap(), c.point(2).to_vec());
        assert_eq!(mu.eval(&[0, n - 1]).unwrap(), c.point(n - 1).to_vec());
        assert_eq!(mu.eval(&[7, 7]).unwrap(), c.point(7).to_vec());
    }

    #[test]
    fn circle_median_is_orientation_independent() {
        let c = gen(CurveSpec::Circle { r: 1.0, n: 200 });
        let rev = c.reversed();
        let (s1, s2) = (circle_local_mixer(&c, 1.0).unwrap(), circle_local_mixer(&rev, 1.0).unwrap());
        // id k of the reversed curve is id (n - k) % n of the original
        let back = |k: usize| (200 - k) % 200;
        let mut rng = rng_for(8, 0);
        let mut checked = 0;
        for _ in 0..2000 {
            let a = rng.gen_range(0..200);
            let t = [a, (a + rng.gen_range(0..8)) % 200, (a + 200 - rng.gen_range(0..8)) % 200];
            if !s1.in_domain(&t) {
                continue;
            }
            let r = [back(t[0]), back(t[1]), back(t[2])];
            assert_eq!(s1.eval(&t).unwrap(), s2.eval(&r).unwrap());
            checked += 1;
        }
        assert!(checked > 1000);
    }

    #[test]
    fn strip_examples() {
        let zero = PiecewiseLinear::new(vec![0.0, 1.0], vec![0.0, 0.0]).unwrap();
        let one = PiecewiseLinear::new(vec![0.0, 1.0], vec![1.0, 1.0]).unwrap();
        let s = strip_retraction(zero.clone(), one.clone()).unwrap();
        assert_eq!(s.apply([0.5, 0.5]), [0.5, 0.5]);
        assert_eq!(s.apply([2.0, 3.0]), [1.0, 1.0]);
        assert_eq!(s.lipschitz_bound(), 1.0);
        let tent = PiecewiseLinear::new(vec![0.0, 0.5, 1.0], vec![0.0, 0.5, 0.0]).unwrap();
        let low = PiecewiseLinear::new(vec![0.0, 1.0], vec![0.25, 0.25]).unwrap();
        match strip_retraction(tent, low) {
            Err(ConstructionError::PhiAbovePsi { x, .. }) => assert_eq!(x, 0.5),
            other => panic!("{other:?}"),
        }
        assert!(PiecewiseLinear::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
    }

    #[test]
    fn box_retraction_examples() {
        let f = BoxRetraction::new(1.5).unwrap();
        assert_eq!(f.apply([1.5, 0.0]).unwrap(), [2.5, 0.0]);
        assert_eq!(f.apply([-1.5, 0.0]).unwrap(), [-2.5, 0.0]);
        assert_eq!(f.apply([1.0, 1.5]).unwrap(), [1.0, 1.5]);
        // outside: straight down to the upper edge above x = 1
        assert_eq!(f.apply([1.0, 1.7]).unwrap(), [1.0, 1.5]);
        assert_eq!(f.apply([4.0, 1.0]).unwrap(), [2.5, 0.0]);
        assert!(f.apply([0.0, 0.2]).is_err());
        assert!(f.apply([1.0, 0.1]).is_err());
        assert!(BoxRetraction::new(2.0).is_err());
    }

    #[test]
    fn box_mixer_absorbs() {
        let c = gen(CurveSpec::BoxCurve { t: 1.5, per_edge: 40 });
        let sigma = box_mixer(&c).unwrap();
        for i in 0..c.len() {
            let j = (i + 3) % c.len();
            for t in [[i, i, j], [i, j, i], [j, i, i]] {
                assert_eq!(sigma.eval(&t).unwrap(), c.point(i).to_vec());
            }
        }
    }

    #[test]
    fn cusp_mean_examples() {
        let c = gen(CurveSpec::CuspJordan { n_graph: 21, n_top: 19 });
        let mu = cusp_jordan_local_mean(&c).unwrap();
        let find = |x: f64, y: f64| {
            (0..c.len()).find(|&i| (c.point(i)[0] - x).abs() < 1e-12 && (c.point(i)[1] - y).abs() < 1e-12).unwrap()
        };
        let (a, b) = (find(0.5, 1.0), find(-0.5, 1.0));
        assert_eq!(mu.eval(&[a, b]).unwrap(), vec![0.0, 1.0]);
        let (g, s) = (find(0.3, 0.3f64.sqrt()), find(0.9, 1.0));
        assert_eq!(mu.eval(&[g, s]).unwrap(), c.point(g).to_vec());
        assert_eq!(mu.eval(&[s, g]).unwrap(), c.point(g).to_vec());
        assert_eq!(mu.eval(&[s, s]).unwrap(), c.point(s).to_vec());
        assert!(mu.eval(&[find(-1.0, 1.0), find(0.9, 1.0)]).is_err());
    }

    #[test]
    fn paths() {
        let c = unit_segment(101);
        let sigma = median_mixer(&c).unwrap();
        let path: Vec<usize> = (0..=10).collect();
        let p = mixer_path(&sigma, 0, 10, &path).unwrap();
        assert_eq!(p.points[0], vec![0.0]);
        assert_eq!(p.points[10], vec![0.1]);
        assert!(p.diameter().unwrap() <= 0.2);
        assert!(matches!(mixer_path(&sigma, 0, 9, &path), Err(ConstructionError::Endpoints { .. })));

        let g = gen(CurveSpec::GraphCurve { profile: Profile::Parabola, extent: 2.0, n: 41 });
        let mu = graph_mean_handle(&g, 2).unwrap();
        let path: Vec<usize> = (5..=30).collect();
        let s = symmetrized_curve(&mu, 5, 30, &path).unwrap();
        let m = path.len();
        assert_eq!(s.points[0], g.point(5).to_vec());
        assert_eq!(s.points[2 * m - 1], g.point(30).to_vec());
        assert_eq!(s.points[m - 1], s.points[m]);
        assert_eq!(s.params[m - 1], 1.0);
        assert_eq!(s.params[m], 1.0);
        let arc = s.to_curve().unwrap();
        assert!(arc.len() < s.len());
    }

    proptest! {
        #[test]
        fn graph_mean_is_set_symmetric(xs in prop::collection::vec(-10.0f64..10.0, 1..5), extra in prop::collection::vec(0usize..4, 0..4)) {
            let mut padded = xs.clone();
            for e in extra {
                padded.push(xs[e % xs.len()]);
            }
            prop_assert_eq!(graph_mean(&xs), graph_mean(&padded));
            let mut rev = padded.clone();
            rev.reverse();
            prop_assert_eq!(graph_mean(&rev), graph_mean(&padded));
        }

        #[test]
        fn strip_retraction_is_identity_on_region_and_lands_inside(
            ys in prop::collection::vec(-1.0f64..1.0, 4),
            gaps in prop::collection::vec(0.0f64..1.0, 4),
            p in (-3.0f64..3.0, -3.0f64..3.0),
        ) {
            let xs = vec![-1.0, 0.0, 0.5, 1.0];
            let psi: Vec<f64> = ys.iter().zip(&gaps).map(|(y, g)| y + g).collect();
            let s = strip_retraction(PiecewiseLinear::new(xs.clone(), ys).unwrap(), PiecewiseLinear::new(xs, psi).unwrap()).unwrap();
            let q = s.apply([p.0, p.1]);
            prop_assert!(s.contains(q));
            prop_assert_eq!(s.apply(q), q);
        }

        #[test]
        fn box_retraction_fixes_curve_points(u in 0.0f64..8.0, t in 1.01f64..1.99) {
            let corners = crate::curve::box_corners(t);
            let k = u.floor() as usize % 8;
            let s = u.fract();
            let (a, b) = (corners[k], corners[(k + 1) % 8]);
            let p = [a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s];
            let f = BoxRetraction::new(t).unwrap();
            let q = f.apply(p).unwrap();
            prop_assert!((q[0] - p[0]).abs() < 1e-9 && (q[1] - p[1]).abs() < 1e-9);
        }
    }
}
