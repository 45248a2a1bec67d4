//! Sampled metric arcs and circles and the generators for the example curves.
//!
//! Points of a [`SampledCurve`] are stored in curve order, so point ids are
//! also positions along the curve. Arcs carry strictly increasing parameter
//! values; circles close up with an edge from the last point to the first.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diameter::diameter;
use crate::metric::{Backend, MetricError, MetricSpace, Norm};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurveError {
    #[error("invalid curve spec: {0}")]
    Spec(String),
    #[error("profile is not even: f({x}) = {left} but f({neg_x}) = {right}", neg_x = -x)]
    ProfileNotEven { x: f64, left: f64, right: f64 },
    #[error("profile decreases on x >= 0 between x = {from} and x = {to}")]
    ProfileDecreasing { from: f64, to: f64 },
    #[error("params must be strictly increasing on an arc (index {0})")]
    ParamsNotMonotone(usize),
    #[error("params length {params} does not match point count {points}")]
    ParamsLength { params: usize, points: usize },
    #[error("a circle needs at least 3 points, got {0}")]
    TooFewPoints(usize),
    #[error("consecutive points {0} and {1} coincide")]
    RepeatedPoint(usize, usize),
    #[error("curve is empty")]
    Empty,
    #[error("operation needs an arc")]
    NotArc,
    #[error("operation needs a circle")]
    NotCircle,
    #[error("endpoints of a circular arc must differ (got {0} twice)")]
    SameEndpoints(usize),
    #[error("median needs exactly three points, got {0}")]
    Arity(usize),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Arc,
    Circle,
}

/// Even profile of a graph curve `y = f(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Profile {
    /// `x^2`
    Parabola,
    /// `sqrt(|x|)`
    Cusp,
    /// Piecewise-linear interpolation of `(x, f(x))` rows; must contain `x = 0`.
    Table(Vec<[f64; 2]>),
}

impl Profile {
    /// Checks evenness and monotonicity on `x >= 0` for table profiles.
    pub fn validate(&self) -> Result<(), CurveError> {
        let Profile::Table(rows) = self else {
            return Ok(());
        };
        let mut pos: Vec<[f64; 2]> = rows.iter().copied().filter(|r| r[0] >= 0.0).collect();
        pos.sort_by(|a, b| a[0].total_cmp(&b[0]));
        if pos.first().map(|r| r[0]) != Some(0.0) {
            return Err(CurveError::Spec("table profile must contain x = 0".into()));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(CurveError::Spec("table profile has non-finite entries".into()));
        }
        for w in pos.windows(2) {
            if w[1][0] == w[0][0] && w[1][1] != w[0][1] {
                return Err(CurveError::Spec(format!("table profile repeats x = {}", w[0][0])));
            }
            if w[1][1] < w[0][1] {
                return Err(CurveError::ProfileDecreasing { from: w[0][0], to: w[1][0] });
            }
        }
        let max_x = pos.last().unwrap()[0];
        for r in rows.iter().filter(|r| r[0] < 0.0) {
            if -r[0] > max_x {
                return Err(CurveError::ProfileNotEven { x: r[0], left: r[1], right: f64::NAN });
            }
            let mirror = interp(&pos, -r[0]);
            if (mirror - r[1]).abs() > 1e-12 {
                return Err(CurveError::ProfileNotEven { x: r[0], left: r[1], right: mirror });
            }
        }
        Ok(())
    }

    /// Largest `|x|` where the profile is defined.
    pub fn reach(&self) -> f64 {
        match self {
            Profile::Table(rows) => rows.iter().map(|r| r[0].abs()).fold(0.0, f64::max),
            _ => f64::INFINITY,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Profile::Parabola => x * x,
            Profile::Cusp => x.abs().sqrt(),
            Profile::Table(rows) => {
                let mut pos: Vec<[f64; 2]> = rows.iter().copied().filter(|r| r[0] >= 0.0).collect();
                pos.sort_by(|a, b| a[0].total_cmp(&b[0]));
                interp(&pos, x.abs())
            }
        }
    }
}

fn interp(rows: &[[f64; 2]], x: f64) -> f64 {
    let k = rows.partition_point(|r| r[0] <= x);
    if k == 0 {
        return rows[0][1];
    }
    if k == rows.len() {
        return rows[k - 1][1];
    }
    let ([x0, y0], [x1, y1]) = (rows[k - 1], rows[k]);
    y0 + (y1 - y0) * (x - x0) / (x1 - x0)
}

fn default_per_circle() -> usize {
    64
}
fn default_per_gap() -> usize {
    16
}
fn default_from() -> Vec<f64> {
    vec![0.0]
}
fn default_to() -> Vec<f64> {
    vec![1.0]
}

/// Description of a generated curve or point set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CurveSpec {
    /// Straight segment between two points, `n` samples.
    Segment {
        #[serde(default = "default_from")]
        from: Vec<f64>,
        #[serde(default = "default_to")]
        to: Vec<f64>,
        n: usize,
    },
    /// Circle of radius `r` about the origin, `n` samples.
    Circle { r: f64, n: usize },
    /// `{r e^{it} : 0 <= t <= t_max}`, `n` samples.
    CircularArc { r: f64, t_max: f64, n: usize },
    /// Graph `y = f(x)` over `[-extent, extent]`, `n` samples.
    GraphCurve {
        profile: Profile,
        extent: f64,
        n: usize,
    },
    /// `z -> |z|^(alpha-1) z` applied to the points of `base`.
    PowerImage { alpha: f64, base: Box<CurveSpec> },
    /// `[0, 1]` with circles of radius `2^(-n-2)` and angular size
    /// `2 pi - 1/n` attached at `2^(-n)` for `n <= n_max`.
    CirclesArc {
        n_max: u32,
        #[serde(default = "default_per_circle")]
        per_circle: usize,
        #[serde(default = "default_per_gap")]
        per_gap: usize,
    },
    /// Level set `||x| - 1| + |y| = t`; `per_edge` samples on each of its 8 edges.
    BoxCurve { t: f64, per_edge: usize },
    /// Koch refinement of the arc of length 1 at one vertex of the unit triangle.
    SnowflakeVertex { depth: u32 },
    /// Polyline `v_1, ..., v_N, 0` in the sup norm of `R^N`, `v_n = e_n / n`.
    TvCurve { terms: usize, per_segment: usize },
    /// `R x {0, 1}` truncated to `|x| <= extent`; `n` samples per line.
    TwoLines { extent: f64, n: usize },
    /// Jordan curve made of `y = sqrt|x|` on `[-1, 1]` closed by the segment `y = 1`.
    CuspJordan { n_graph: usize, n_top: usize },
}

/// A generated object: most kinds give curves, `two-lines` gives a point set.
#[derive(Debug, Clone)]
pub enum Generated {
    Curve(SampledCurve),
    Space(MetricSpace),
}

impl Generated {
    pub fn into_curve(self) -> Result<SampledCurve, CurveError> {
        match self {
            Generated::Curve(c) => Ok(c),
            Generated::Space(_) => Err(CurveError::Spec("spec generates a point set, not a curve".into())),
        }
    }

    pub fn space(&self) -> &MetricSpace {
        match self {
            Generated::Curve(c) => c.space(),
            Generated::Space(s) => s,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampledCurve {
    space: MetricSpace,
    topology: Topology,
    params: Vec<f64>,
    spec: Option<CurveSpec>,
}

/// On-disk form of a [`SampledCurve`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveFile {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<CurveSpec>,
    pub topology: Topology,
    #[serde(default = "default_backend")]
    pub backend: Backend,
    pub points: Vec<Vec<f64>>,
    pub params: Vec<f64>,
}

fn default_backend() -> Backend {
    Backend::Euclidean
}

impl SampledCurve {
    pub fn new(
        space: MetricSpace,
        topology: Topology,
        params: Vec<f64>,
        spec: Option<CurveSpec>,
    ) -> Result<Self, CurveError> {
        let n = space.len();
        if n == 0 {
            return Err(CurveError::Empty);
        }
        if params.len() != n {
            return Err(CurveError::ParamsLength { params: params.len(), points: n });
        }
        if topology == Topology::Circle && n < 3 {
            return Err(CurveError::TooFewPoints(n));
        }
        for i in 1..n {
            if topology == Topology::Arc && !(params[i] > params[i - 1]) {
                return Err(CurveError::ParamsNotMonotone(i));
            }
            if !(space.d(i - 1, i) > 0.0) {
                return Err(CurveError::RepeatedPoint(i - 1, i));
            }
        }
        if topology == Topology::Circle && !(space.d(n - 1, 0) > 0.0) {
            return Err(CurveError::RepeatedPoint(n - 1, 0));
        }
        Ok(Self { space, topology, params, spec })
    }

    pub fn from_file(file: CurveFile) -> Result<Self, CurveError> {
        let space = MetricSpace::embedded(file.backend, file.points)?;
        Self::new(space, file.topology, file.params, file.spec)
    }

    pub fn to_file(&self) -> CurveFile {
        CurveFile {
            spec: self.spec.clone(),
            topology: self.topology,
            backend: self.space.backend(),
            points: self.space.points().map(<[f64]>::to_vec).collect(),
            params: self.params.clone(),
        }
    }

    pub fn space(&self) -> &MetricSpace {
        &self.space
    }

    pub fn topology(&self) -> Topology {
        self.topology
    }

    pub fn is_circle(&self) -> bool {
        self.topology == Topology::Circle
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn spec(&self) -> Option<&CurveSpec> {
        self.spec.as_ref()
    }

    pub fn len(&self) -> usize {
        self.space.len()
    }

    pub fn is_empty(&self) -> bool {
        self.space.is_empty()
    }

    pub fn point(&self, id: usize) -> &[f64] {
        self.space.point(id)
    }

    /// Same point set traversed in the opposite direction.
    pub fn reversed(&self) -> Self {
        let n = self.len();
        let ids: Vec<usize> = match self.topology {
            Topology::Arc => (0..n).rev().collect(),
            Topology::Circle => std::iter::once(0).chain((1..n).rev()).collect(),
        };
        let space = self.space.subspace(&ids).expect("ids are in range");
        let params = match self.topology {
            Topology::Arc => ids.iter().map(|&i| -self.params[i]).collect(),
            Topology::Circle => ids.iter().map(|&i| self.params[i]).collect(),
        };
        Self { space, topology: self.topology, params, spec: None }
    }

    /// Edge lengths in order, including the closing edge of a circle.
    pub fn edge_lengths(&self) -> Vec<f64> {
        let n = self.len();
        let mut out: Vec<f64> = (1..n).map(|i| self.space.d(i - 1, i)).collect();
        if self.is_circle() {
            out.push(self.space.d(n - 1, 0));
        }
        out
    }

    /// Ids of the oriented arc from `a` forward to `b`. On an arc this is
    /// the subarc between them, in index order.
    pub fn forward_ids(&self, a: usize, b: usize) -> Vec<usize> {
        let n = self.len();
        match self.topology {
            Topology::Arc => (a.min(b)..=a.max(b)).collect(),
            Topology::Circle => {
                let len = (b + n - a) % n;
                (0..=len).map(|k| (a + k) % n).collect()
            }
        }
    }

    fn check(&self, id: usize) -> Result<(), CurveError> {
        Ok(self.space.check_id(id)?)
    }
}

/// Builds an arc from ids of `curve` traversed in the given order, with
/// cumulative length as parameter.
fn arc_from_ids(curve: &SampledCurve, ids: &[usize]) -> Result<SampledCurve, CurveError> {
    let space = curve.space.subspace(ids)?;
    let mut params = Vec::with_capacity(ids.len());
    let mut acc = 0.0;
    for k in 0..ids.len() {
        if k > 0 {
            acc += space.d(k - 1, k);
        }
        params.push(acc);
    }
    SampledCurve::new(space, Topology::Arc, params, None)
}

pub fn generate(spec: &CurveSpec) -> Result<Generated, CurveError> {
    match spec {
        CurveSpec::Segment { from, to, n } => {
            need(*n >= 2, "segment needs n >= 2")?;
            need(from.len() == to.len() && !from.is_empty(), "segment endpoints need one dimension")?;
            need(from != to, "segment endpoints must differ")?;
            let pts: Vec<Vec<f64>> = (0..*n)
                .map(|k| {
                    let s = k as f64 / (*n - 1) as f64;
                    from.iter().zip(to).map(|(a, b)| a + (b - a) * s).collect()
                })
                .collect();
            let params = (0..*n).map(|k| k as f64 / (*n - 1) as f64).collect();
            curve(Backend::Euclidean, pts, Topology::Arc, params, spec)
        }
        CurveSpec::Circle { r, n } => {
            need(*r > 0.0, "circle needs r > 0")?;
            need(*n >= 3, "circle needs n >= 3")?;
            let params: Vec<f64> = (0..*n).map(|k| TAU * k as f64 / *n as f64).collect();
            let pts = params.iter().map(|t| vec![r * t.cos(), r * t.sin()]).collect();
            curve(Backend::Euclidean, pts, Topology::Circle, params, spec)
        }
        CurveSpec::CircularArc { r, t_max, n } => {
            need(*r > 0.0, "circular-arc needs r > 0")?;
            need(*t_max > 0.0 && *t_max <= TAU, "circular-arc needs t_max in (0, 2 pi]")?;
            need(*n >= 2, "circular-arc needs n >= 2")?;
            let params: Vec<f64> = (0..*n).map(|k| t_max * k as f64 / (*n - 1) as f64).collect();
            let pts = params.iter().map(|t| vec![r * t.cos(), r * t.sin()]).collect();
            curve(Backend::Euclidean, pts, Topology::Arc, params, spec)
        }
        CurveSpec::GraphCurve { profile, extent, n } => {
            profile.validate()?;
            need(*extent > 0.0, "graph-curve needs extent > 0")?;
            need(*extent <= profile.reach(), "graph-curve extent exceeds the profile table")?;
            need(*n >= 2, "graph-curve needs n >= 2")?;
            let xs = symmetric_grid(*extent, *n);
            let pts = xs.iter().map(|&x| vec![x, profile.eval(x)]).collect();
            curve(Backend::Euclidean, pts, Topology::Arc, xs, spec)
        }
        CurveSpec::PowerImage { alpha, base } => {
            need(*alpha > 0.0 && alpha.is_finite(), "power-image needs alpha > 0")?;
            match generate(base)? {
                Generated::Curve(c) => {
                    let norm = c.space.norm().ok_or(MetricError::NotEmbedded)?;
                    let pts = c.space.points().map(|z| power_map(norm, *alpha, z)).collect();
                    curve(c.space.backend(), pts, c.topology, c.params.clone(), spec)
                }
                Generated::Space(s) => {
                    let norm = s.norm().ok_or(MetricError::NotEmbedded)?;
                    let pts = s.points().map(|z| power_map(norm, *alpha, z)).collect();
                    Ok(Generated::Space(MetricSpace::embedded(s.backend(), pts)?))
                }
            }
        }
        CurveSpec::CirclesArc { n_max, per_circle, per_gap } => {
            need(*n_max >= 1 && *n_max <= 60, "circles-arc needs 1 <= n_max <= 60")?;
            need(*per_circle >= 8, "circles-arc needs per_circle >= 8")?;
            need(*per_gap >= 1, "circles-arc needs per_gap >= 1")?;
            let pts = circles_arc_points(*n_max, *per_circle, *per_gap);
            let params = cumulative(Norm::Euclidean, &pts);
            curve(Backend::Euclidean, pts, Topology::Arc, params, spec)
        }
        CurveSpec::BoxCurve { t, per_edge } => {
            need(*t > 1.0 && *t < 2.0, "box-curve needs t in (1, 2)")?;
            need(*per_edge >= 1, "box-curve needs per_edge >= 1")?;
            let corners = box_corners(*t);
            let pts = polygon_samples(&corners, *per_edge);
            let params = cumulative(Norm::Euclidean, &pts);
            curve(Backend::Euclidean, pts, Topology::Circle, params, spec)
        }
        CurveSpec::SnowflakeVertex { depth } => {
            need(*depth <= 13, "snowflake-vertex needs depth <= 13")?;
            let pts: Vec<Vec<f64>> = snowflake_vertex(*depth).into_iter().map(|p| p.to_vec()).collect();
            let params = cumulative(Norm::Euclidean, &pts);
            curve(Backend::Euclidean, pts, Topology::Circle, params, spec)
        }
        CurveSpec::TvCurve { terms, per_segment } => {
            need(*terms >= 1, "tv-curve needs terms >= 1")?;
            need(*per_segment >= 1, "tv-curve needs per_segment >= 1")?;
            let pts = tv_points(*terms, *per_segment);
            let params = cumulative(Norm::Sup, &pts);
            curve(Backend::Sup, pts, Topology::Arc, params, spec)
        }
        CurveSpec::TwoLines { extent, n } => {
            need(*extent > 0.0, "two-lines needs extent > 0")?;
            need(*n >= 2, "two-lines needs n >= 2")?;
            let xs = symmetric_grid(*extent, *n);
            let pts = [0.0, 1.0]
                .iter()
                .flat_map(|&y| xs.iter().map(move |&x| vec![x, y]))
                .collect();
            Ok(Generated::Space(MetricSpace::euclidean(pts)?))
        }
        CurveSpec::CuspJordan { n_graph, n_top } => {
            need(*n_graph >= 3, "cusp-jordan needs n_graph >= 3")?;
            need(*n_top >= 1, "cusp-jordan needs n_top >= 1")?;
            let mut pts: Vec<Vec<f64>> =
                symmetric_grid(1.0, *n_graph).into_iter().map(|x| vec![x, x.abs().sqrt()]).collect();
            for k in 1..=*n_top {
                let x = 1.0 - 2.0 * k as f64 / (*n_top + 1) as f64;
                pts.push(vec![x, 1.0]);
            }
            let params = cumulative(Norm::Euclidean, &pts);
            curve(Backend::Euclidean, pts, Topology::Circle, params, spec)
        }
    }
}

fn need(ok: bool, msg: &str) -> Result<(), CurveError> {
    if ok {
        Ok(())
    } else {
        Err(CurveError::Spec(msg.into()))
    }
}

fn curve(
    backend: Backend,
    pts: Vec<Vec<f64>>,
    topology: Topology,
    params: Vec<f64>,
    spec: &CurveSpec,
) -> Result<Generated, CurveError> {
    let space = MetricSpace::embedded(backend, pts)?;
    Ok(Generated::Curve(SampledCurve::new(space, topology, params, Some(spec.clone()))?))
}

/// `n` points of `[-extent, extent]`, exactly symmetric about 0.
fn symmetric_grid(extent: f64, n: usize) -> Vec<f64> {
    let m = (n - 1) as f64;
    (0..n)
        .map(|k| extent * (2.0 * k as f64 - m) / m)
        .collect()
}

fn cumulative(norm: Norm, pts: &[Vec<f64>]) -> Vec<f64> {
    let mut acc = 0.0;
    let mut out = Vec::with_capacity(pts.len());
    for k in 0..pts.len() {
        if k > 0 {
            acc += norm.distance(&pts[k - 1], &pts[k]);
        }
        out.push(acc);
    }
    out
}

/// `z -> |z|^(alpha - 1) z`, with `0 -> 0`.
pub fn power_map(norm: Norm, alpha: f64, z: &[f64]) -> Vec<f64> {
    let r = norm.length(z);
    if r == 0.0 {
        return vec![0.0; z.len()];
    }
    let s = r.powf(alpha - 1.0);
    z.iter().map(|c| c * s).collect()
}

/// Radius and center of the circle attached at `2^(-n)` in `circles-arc`.
/// The center sits at height `rho cos(1/(2n))` so that the missing sector of
/// angle `1/n` has both endpoints on the x-axis.
pub fn circles_arc_circle(n: u32) -> (f64, [f64; 2]) {
    let rho = 2f64.powi(-(n as i32) - 2);
    let half = 1.0 / (2.0 * n as f64);
    (rho, [2f64.powi(-(n as i32)), rho * half.cos()])
}

fn circles_arc_points(n_max: u32, per_circle: usize, per_gap: usize) -> Vec<Vec<f64>> {
    let mut pts = vec![vec![0.0, 0.0]];
    let line_to = |pts: &mut Vec<Vec<f64>>, x1: f64| {
        let x0 = pts.last().unwrap()[0];
        for k in 1..=per_gap {
            pts.push(vec![x0 + (x1 - x0) * k as f64 / per_gap as f64, 0.0]);
        }
    };
    for n in (1..=n_max).rev() {
        let (rho, c) = circles_arc_circle(n);
        let half = 1.0 / (2.0 * n as f64);
        line_to(&mut pts, c[0] - rho * half.sin());
        // clockwise over the top, from 3pi/2 - half down to -pi/2 + half
        let start = 1.5 * PI - half;
        let sweep = TAU - 2.0 * half;
        for k in 1..per_circle {
            let th = start - sweep * k as f64 / per_circle as f64;
            pts.push(vec![c[0] + rho * th.cos(), c[1] + rho * th.sin()]);
        }
        pts.push(vec![c[0] + rho * half.sin(), 0.0]);
    }
    line_to(&mut pts, 1.0);
    pts
}

/// Corners of `{||x| - 1| + |y| = t}` in counterclockwise order.
pub fn box_corners(t: f64) -> Vec<[f64; 2]> {
    vec![
        [1.0 + t, 0.0],
        [1.0, t],
        [0.0, t - 1.0],
        [-1.0, t],
        [-1.0 - t, 0.0],
        [-1.0, -t],
        [0.0, 1.0 - t],
        [1.0, -t],
    ]
}

fn polygon_samples(corners: &[[f64; 2]], per_edge: usize) -> Vec<Vec<f64>> {
    let m = corners.len();
    let mut pts = Vec::with_capacity(m * per_edge);
    for i in 0..m {
        let (a, b) = (corners[i], corners[(i + 1) % m]);
        for k in 0..per_edge {
            let s = k as f64 / per_edge as f64;
            pts.push(vec![a[0] + (b[0] - a[0]) * s, a[1] + (b[1] - a[1]) * s]);
        }
    }
    pts
}

/// Vertices of the closed polygon after `depth` one-endpoint Koch steps.
/// Step `k` refines the first `3^k` edges counted from the marked vertex
/// `(0, 0)`, which together have length 1.
pub fn snowflake_vertex(depth: u32) -> Vec<[f64; 2]> {
    let h = 3f64.sqrt() / 2.0;
    let mut poly = vec![[0.0, 0.0], [1.0, 0.0], [0.5, h]];
    for step in 0..depth {
        let edges = 3usize.pow(step);
        let mut next = Vec::with_capacity(poly.len() + 3 * edges);
        for e in 0..edges {
            let a = poly[e];
            let b = poly[(e + 1) % poly.len()];
            let d = [(b[0] - a[0]) / 3.0, (b[1] - a[1]) / 3.0];
            let p1 = [a[0] + d[0], a[1] + d[1]];
            let p3 = [a[0] + 2.0 * d[0], a[1] + 2.0 * d[1]];
            // outward bump: rotate d by -60 degrees (the polygon is ccw)
            let (c, s) = (0.5, -h);
            let peak = [p1[0] + c * d[0] - s * d[1], p1[1] + s * d[0] + c * d[1]];
            next.extend_from_slice(&[a, p1, peak, p3]);
        }
        next.extend_from_slice(&poly[edges..]);
        poly = next;
    }
    poly
}

fn tv_points(terms: usize, per_segment: usize) -> Vec<Vec<f64>> {
    let vertex = |n: usize| -> Vec<f64> {
        let mut v = vec![0.0; terms];
        if n >= 1 {
            v[n - 1] = 1.0 / n as f64;
        }
        v
    };
    // v_1, ..., v_N, then the endpoint 0
    let mut corners: Vec<Vec<f64>> = (1..=terms).map(vertex).collect();
    corners.push(vertex(0));
    let mut pts = Vec::new();
    for w in corners.windows(2) {
        for k in 0..per_segment {
            let s = k as f64 / per_segment as f64;
            pts.push(w[0].iter().zip(&w[1]).map(|(a, b)| a + (b - a) * s).collect());
        }
    }
    pts.push(corners.last().unwrap().clone());
    pts
}

/// Polygonal length, closing edge included for circles.
pub fn curve_length(c: &SampledCurve) -> f64 {
    c.edge_lengths().iter().sum()
}

/// The subarc between `i` and `j` in index order; `i == j` is a single point.
pub fn subarc(c: &SampledCurve, i: usize, j: usize) -> Result<SampledCurve, CurveError> {
    if c.is_circle() {
        return Err(CurveError::NotArc);
    }
    c.check(i)?;
    c.check(j)?;
    let ids: Vec<usize> = (i.min(j)..=i.max(j)).collect();
    let space = c.space.subspace(&ids)?;
    let params = ids.iter().map(|&k| c.params[k]).collect();
    SampledCurve::new(space, Topology::Arc, params, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ArcMode {
    Oriented,
    SmallerDiameter,
}

/// Ids of a circular arc between `a` and `b`. In smaller-diameter mode the
/// two arcs are compared by sample diameter; on a tie the arc starting at the
/// lower index wins.
pub fn arc_ids(c: &SampledCurve, a: usize, b: usize, mode: ArcMode) -> Result<Vec<usize>, CurveError> {
    if !c.is_circle() {
        return Err(CurveError::NotCircle);
    }
    c.check(a)?;
    c.check(b)?;
    if a == b {
        return Err(CurveError::SameEndpoints(a));
    }
    let ab = c.forward_ids(a, b);
    if mode == ArcMode::Oriented {
        return Ok(ab);
    }
    let ba = c.forward_ids(b, a);
    let (dab, dba) = (diameter(&c.space, &ab), diameter(&c.space, &ba));
    Ok(if dab < dba || (dab == dba && a < b) { ab } else { ba })
}

pub fn arc_between(c: &SampledCurve, a: usize, b: usize, mode: ArcMode) -> Result<SampledCurve, CurveError> {
    arc_from_ids(c, &arc_ids(c, a, b, mode)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OrderStat {
    Min,
    Max,
    Med,
}

/// Order statistic of two or three points of an arc, by position along it.
pub fn order_stats(c: &SampledCurve, pts: &[usize], stat: OrderStat) -> Result<usize, CurveError> {
    if c.is_circle() {
        return Err(CurveError::NotArc);
    }
    for &p in pts {
        c.check(p)?;
    }
    let first_param = |ids: &mut dyn Iterator<Item = usize>, max: bool| {
        ids.reduce(|x, y| {
            let (px, py) = (c.params[x], c.params[y]);
            if (py > px) == max && py != px {
                y
            } else {
                x
            }
        })
    };
    match (stat, pts.len()) {
        (OrderStat::Med, 3) => Ok(med3(pts[0], pts[1], pts[2], |i| c.params[i])),
        (OrderStat::Med, k) => Err(CurveError::Arity(k)),
        (_, 2 | 3) => Ok(first_param(&mut pts.iter().copied(), stat == OrderStat::Max).unwrap()),
        (_, k) => Err(CurveError::Arity(k)),
    }
}

/// Middle element of three under the order given by `key`.
pub fn med3(a: usize, b: usize, c: usize, key: impl Fn(usize) -> f64) -> usize {
    let mut v = [a, b, c];
    v.sort_by(|&x, &y| key(x).total_cmp(&key(y)));
    v[1]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::rng_for;
    use rand::Rng;

    fn gen(spec: CurveSpec) -> SampledCurve {
        generate(&spec).unwrap().into_curve().unwrap()
    }

    #[test]
    fn circular_arc_endpoints_and_chord() {
        let c = gen(CurveSpec::CircularArc { r: 1.0, t_max: 1.5 * PI, n: 4 });
        let first = c.point(0);
        let last = c.point(3);
        assert_eq!(first, &[1.0, 0.0]);
        assert!((last[0]).abs() < 1e-15 && (last[1] + 1.0).abs() < 1e-15);
        assert!((c.space().d(0, 3) - 2f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn circle_diameter_is_two() {
        let c = gen(CurveSpec::Circle { r: 1.0, n: 100 });
        let ids: Vec<usize> = (0..100).collect();
        assert!((diameter(c.space(), &ids) - 2.0).abs() < 1e-15);
    }

    #[test]
    fn box_curve_contains_axis_and_corner_points() {
        let c = gen(CurveSpec::BoxCurve { t: 1.5, per_edge: 4 });
        let has = |x: f64, y: f64| c.space().points().any(|p| (p[0] - x).abs() < 1e-12 && (p[1] - y).abs() < 1e-12);
        for (x, y) in [(2.5, 0.0), (-2.5, 0.0), (1.0, 1.5), (-1.0, 1.5), (1.0, -1.5), (-1.0, -1.5), (0.0, 0.5), (0.0, -0.5)] {
            assert!(has(x, y), "missing ({x}, {y})");
        }
        for p in c.space().points() {
            assert!(((p[0].abs() - 1.0).abs() + p[1].abs() - 1.5).abs() < 1e-12);
        }
        assert!(generate(&CurveSpec::BoxCurve { t: 2.0, per_edge: 4 }).is_err());
    }

    #[test]
    fn lengths() {
        let s = gen(CurveSpec::Segment { from: vec![0.0], to: vec![1.0], n: 37 });
        assert!((curve_length(&s) - 1.0).abs() < 1e-15);
        let c = gen(CurveSpec::Circle { r: 1.0, n: 1000 });
        let exact = 2000.0 * (PI / 1000.0).sin();
        assert!((curve_length(&c) - exact).abs() < 1e-12);
        assert!((curve_length(&c) - TAU).abs() / TAU < 1e-3);
        for k in 0..=6 {
            let f = gen(CurveSpec::SnowflakeVertex { depth: k });
            assert!((curve_length(&f) - (3.0 + k as f64 / 3.0)).abs() < 1e-12, "depth {k}");
        }
    }

    #[test]
    fn snowflake_is_simple_at_low_depth() {
        let p = snowflake_vertex(3);
        let n = p.len();
        let seg_cross = |a: [f64; 2], b: [f64; 2], c: [f64; 2], d: [f64; 2]| {
            let o = |p: [f64; 2], q: [f64; 2], r: [f64; 2]| (q[0] - p[0]) * (r[1] - p[1]) - (q[1] - p[1]) * (r[0] - p[0]);
            let (d1, d2, d3, d4) = (o(a, b, c), o(a, b, d), o(c, d, a), o(c, d, b));
            d1 * d2 < -1e-12 && d3 * d4 < -1e-12
        };
        for i in 0..n {
            for j in (i + 2)..n {
                if i == 0 && j == n - 1 {
                    continue;
                }
                assert!(!seg_cross(p[i], p[(i + 1) % n], p[j], p[(j + 1) % n]), "edges {i} and {j} cross");
            }
        }
    }

    #[test]
    fn subarc_and_arc_between() {
        let s = gen(CurveSpec::Segment { from: vec![0.0], to: vec![1.0], n: 11 });
        let sub = subarc(&s, 2, 7).unwrap();
        let ids: Vec<usize> = (0..sub.len()).collect();
        assert!((diameter(sub.space(), &ids) - 0.5).abs() < 1e-15);
        assert_eq!(subarc(&s, 4, 4).unwrap().len(), 1);

        let c = gen(CurveSpec::Circle { r: 1.0, n: 8 });
        let ids = arc_ids(&c, 6, 2, ArcMode::SmallerDiameter).unwrap();
        assert_eq!(ids[0], 2, "tie goes to the arc starting at the lower index");
        let arc = arc_between(&c, 2, 6, ArcMode::SmallerDiameter).unwrap();
        let all: Vec<usize> = (0..arc.len()).collect();
        assert!((diameter(arc.space(), &all) - 2.0).abs() < 1e-15);
        assert_eq!(arc_ids(&c, 1, 3, ArcMode::SmallerDiameter).unwrap(), vec![1, 2, 3]);
        assert_eq!(arc_ids(&c, 3, 1, ArcMode::SmallerDiameter).unwrap(), vec![1, 2, 3]);
        assert_eq!(arc_ids(&c, 3, 1, ArcMode::Oriented).unwrap(), vec![3, 4, 5, 6, 7, 0, 1]);
        assert!(matches!(arc_ids(&c, 3, 3, ArcMode::Oriented), Err(CurveError::SameEndpoints(3))));
    }

    #[test]
    fn order_statistics() {
        let pts = vec![vec![0.2], vec![0.9], vec![0.5]];
        let c = SampledCurve::new(
            MetricSpace::euclidean(pts).unwrap(),
            Topology::Arc,
            vec![0.2, 0.9, 1.5],
            None,
        );
        // params must increase with index, so build the segment properly
        assert!(c.is_ok());
        let s = gen(CurveSpec::Segment { from: vec![0.0], to: vec![1.0], n: 11 });
        assert_eq!(order_stats(&s, &[2, 9, 5], OrderStat::Med).unwrap(), 5);
        assert_eq!(order_stats(&s, &[2, 9, 5], OrderStat::Min).unwrap(), 2);
        assert_eq!(order_stats(&s, &[2, 9, 5], OrderStat::Max).unwrap(), 9);
        assert_eq!(order_stats(&s, &[3, 3, 8], OrderStat::Med).unwrap(), 3);
        assert!(matches!(order_stats(&s, &[3, 8], OrderStat::Med), Err(CurveError::Arity(2))));
    }

    #[test]
    fn median_matches_max_of_mins() {
        let mut rng = rng_for(5, 0);
        let key = |i: usize| i as f64;
        for _ in 0..1000 {
            let (a, b, c) = (rng.gen_range(0..50), rng.gen_range(0..50), rng.gen_range(0..50));
            let via = a.min(b).max(b.min(c)).max(a.min(c));
            assert_eq!(med3(a, b, c, key), via);
        }
    }

    #[test]
    fn table_profile_validation() {
        let bad_even = Profile::Table(vec![[0.0, 0.0], [1.0, 1.0], [-1.0, 2.0]]);
        assert!(matches!(bad_even.validate(), Err(CurveError::ProfileNotEven { .. })));
        let bad_mono = Profile::Table(vec![[0.0, 0.0], [1.0, 1.0], [2.0, 0.5]]);
        assert!(matches!(bad_mono.validate(), Err(CurveError::ProfileDecreasing { from, to }) if from == 1.0 && to == 2.0));
        let good = Profile::Table(vec![[0.0, 0.0], [1.0, 1.0], [-1.0, 1.0], [2.0, 3.0]]);
        assert!(good.validate().is_ok());
        assert_eq!(good.eval(-1.5), 2.0);
    }

    #[test]
    fn generators_reject_bad_params() {
        for spec in [
            CurveSpec::Circle { r: 1.0, n: 2 },
            CurveSpec::CircularArc { r: 1.0, t_max: 7.0, n: 10 },
            CurveSpec::Segment { from: vec![0.0], to: vec![1.0], n: 1 },
            CurveSpec::PowerImage { alpha: 0.0, base: Box::new(CurveSpec::Circle { r: 1.0, n: 5 }) },
            CurveSpec::GraphCurve { profile: Profile::Table(vec![[0.0, 0.0], [1.0, 1.0]]), extent: 2.0, n: 5 },
        ] {
            assert!(matches!(generate(&spec), Err(CurveError::Spec(_))), "{spec:?}");
        }
    }

    #[test]
    fn power_image_with_unit_exponent_is_identity() {
        let base = CurveSpec::GraphCurve { profile: Profile::Parabola, extent: 3.0, n: 41 };
        let c = gen(base.clone());
        let p = gen(CurveSpec::PowerImage { alpha: 1.0, base: Box::new(base) });
        assert_eq!(c.space(), p.space());
    }

    #[test]
    fn circles_arc_sector_endpoints_lie_on_axis() {
        let c = gen(CurveSpec::CirclesArc { n_max: 6, per_circle: 32, per_gap: 4 });
        for n in 1..=6 {
            let (rho, ctr) = circles_arc_circle(n);
            let on_axis: Vec<&[f64]> = c
                .space()
                .points()
                .filter(|p| p[1] == 0.0 && ((p[0] - ctr[0]).powi(2) + ctr[1] * ctr[1]).sqrt() - rho < 1e-15 * 4.0)
                .filter(|p| (((p[0] - ctr[0]).powi(2) + ctr[1] * ctr[1]).sqrt() - rho).abs() < 1e-15)
                .collect();
            assert_eq!(on_axis.len(), 2, "circle {n}");
        }
        assert_eq!(c.point(0), &[0.0, 0.0]);
        assert_eq!(c.point(c.len() - 1), &[1.0, 0.0]);
    }

    #[test]
    fn tv_curve_vertices_have_norm_one_over_n() {
        let c = gen(CurveSpec::TvCurve { terms: 5, per_segment: 3 });
        assert_eq!(c.space().backend(), Backend::Sup);
        assert_eq!(c.len(), 5 * 3 + 1);
        for n in 1..=5 {
            let p = c.point((n - 1) * 3);
            assert_eq!(Norm::Sup.length(p), 1.0 / n as f64);
        }
        assert_eq!(Norm::Sup.length(c.point(c.len() - 1)), 0.0);
    }

    #[test]
    fn reversed_circle_keeps_start() {
        let c = gen(CurveSpec::Circle { r: 1.0, n: 6 });
        let r = c.reversed();
        assert_eq!(r.point(0), c.point(0));
        assert_eq!(r.point(1), c.point(5));
    }

    #[test]
    fn curve_file_round_trip() {
        let c = gen(CurveSpec::TvCurve { terms: 3, per_segment: 2 });
        let json = serde_json::to_string(&c.to_file()).unwrap();
        let back = SampledCurve::from_file(serde_json::from_str(&json).unwrap()).unwrap();
        assert_eq!(back, c);
    }
}
