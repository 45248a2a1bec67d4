//! Continuous argument along planar polylines and the winding obstruction
//! to Lipschitz means on planar arcs.
//!
//! If an arc has an `L`-Lipschitz mean and `L |a - b| <= dist(z0, arc)`, the
//! argument of `γ - z0` along the subarc from `a` to `b` changes by an amount
//! within `2π/3` of a multiple of `4π`. Every pair violating that gives the
//! lower bound `L > dist(z0, arc) / |a - b|`.

use std::f64::consts::{FRAC_PI_2, PI};

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constructions::{closest_on_segment, PathSample};
use crate::curve::SampledCurve;
use crate::estimators::EstimateReport;
use crate::metric::{Backend, Norm};
use crate::sampling::{par_argmax, sample_rng};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ObstructionError {
    #[error("vertex {0} coincides with the base point")]
    Singularity(usize),
    #[error("segment {0} turns by at least pi/2 around the base point; refine the polyline")]
    Refine(usize),
    #[error("needs a planar euclidean curve")]
    NotPlanar,
    #[error("needs an arc")]
    NotArc,
    #[error("every base point lies on the curve")]
    AllOnCurve,
    #[error("path halves are not aligned")]
    Misaligned,
    #[error("polyline is empty")]
    Empty,
}

type Result<T> = std::result::Result<T, ObstructionError>;

/// A continuous branch of `arg(p_k - z0)` along a polyline.
#[derive(Debug, Clone, PartialEq)]
pub struct ArgTrace {
    pub z0: [f64; 2],
    pub args: Vec<f64>,
}

impl ArgTrace {
    /// Traces the vertices in order; `closed` adds the edge back to the first
    /// vertex, so `args` then has one more entry than `points`.
    pub fn new(points: &[[f64; 2]], z0: [f64; 2], closed: bool) -> Result<Self> {
        if points.is_empty() {
            return Err(ObstructionError::Empty);
        }
        let rel = |k: usize| [points[k][0] - z0[0], points[k][1] - z0[1]];
        for k in 0..points.len() {
            if rel(k) == [0.0, 0.0] {
                return Err(ObstructionError::Singularity(k));
            }
        }
        let first = rel(0);
        let mut args = Vec::with_capacity(points.len() + 1);
        args.push(first[1].atan2(first[0]));
        let edges = if closed { points.len() } else { points.len() - 1 };
        for k in 0..edges {
            let (u, v) = (rel(k), rel((k + 1) % points.len()));
            let inc = (u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1]);
            if inc.abs() >= FRAC_PI_2 {
                return Err(ObstructionError::Refine(k));
            }
            args.push(args[k] + inc);
        }
        Ok(Self { z0, args })
    }

    pub fn total(&self) -> f64 {
        self.args.last().unwrap() - self.args[0]
    }

    /// Change of argument from vertex `i` to vertex `j`.
    pub fn between(&self, i: usize, j: usize) -> f64 {
        self.args[j] - self.args[i]
    }
}

pub fn delta_arg(points: &[[f64; 2]], z0: [f64; 2], closed: bool) -> Result<f64> {
    Ok(ArgTrace::new(points, z0, closed)?.total())
}

/// True iff `Δ` is within `2π/3` of a multiple of `4π`, boundary included.
pub fn allowed_delta(delta: f64) -> bool {
    let k = (delta / (4.0 * PI)).round();
    (delta - 4.0 * PI * k).abs() <= 2.0 * PI / 3.0
}

/// Distance from `z0` to the polyline through `points`.
pub fn polyline_distance(points: &[[f64; 2]], z0: [f64; 2], closed: bool) -> f64 {
    let n = points.len();
    let dist = |p: [f64; 2]| (p[0] - z0[0]).hypot(p[1] - z0[1]);
    if n == 1 {
        return dist(points[0]);
    }
    let edges = if closed { n } else { n - 1 };
    (0..edges)
        .into_par_iter()
        .map(|k| dist(closest_on_segment(z0, points[k], points[(k + 1) % n])))
        .reduce(|| f64::INFINITY, f64::min)
}

fn planar_points(c: &SampledCurve) -> Result<Vec<[f64; 2]>> {
    if c.space().backend() != Backend::Euclidean || c.space().dim() != 2 {
        return Err(ObstructionError::NotPlanar);
    }
    Ok(c.space().points().map(|p| [p[0], p[1]]).collect())
}

/// Base points for the obstruction search.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BasePoints {
    Explicit(Vec<[f64; 2]>),
    /// circumcenters of the most sharply turning vertex triples
    Auto(usize),
}

/// Circumcenters of consecutive vertex triples, sharpest turns first,
/// without near-duplicates, at most `cap`.
pub fn auto_base_points(points: &[[f64; 2]], cap: usize) -> Vec<[f64; 2]> {
    let mut turns: Vec<(f64, usize)> = (1..points.len().saturating_sub(1))
        .map(|k| {
            let (a, b, c) = (points[k - 1], points[k], points[k + 1]);
            let (u, v) = ([b[0] - a[0], b[1] - a[1]], [c[0] - b[0], c[1] - b[1]]);
            ((u[0] * v[1] - u[1] * v[0]).atan2(u[0] * v[0] + u[1] * v[1]).abs(), k)
        })
        .filter(|t| t.0 > 0.0)
        .collect();
    turns.sort_by(|x, y| y.0.total_cmp(&x.0).then(x.1.cmp(&y.1)));
    let mut out: Vec<[f64; 2]> = Vec::new();
    for (_, k) in turns {
        if out.len() >= cap {
            break;
        }
        let Some(z) = circumcenter(points[k - 1], points[k], points[k + 1]) else {
            continue;
        };
        let scale = (points[k][0] - z[0]).hypot(points[k][1] - z[1]);
        if out.iter().all(|w| (w[0] - z[0]).hypot(w[1] - z[1]) > 1e-6 * scale) {
            out.push(z);
        }
    }
    out
}

fn circumcenter(a: [f64; 2], b: [f64; 2], c: [f64; 2]) -> Option<[f64; 2]> {
    let (bx, by, cx, cy) = (b[0] - a[0], b[1] - a[1], c[0] - a[0], c[1] - a[1]);
    let d = 2.0 * (bx * cy - by * cx);
    if d == 0.0 {
        return None;
    }
    let (b2, c2) = (bx * bx + by * by, cx * cx + cy * cy);
    Some([a[0] + (cy * b2 - by * c2) / d, a[1] + (bx * c2 - cx * b2) / d])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObstructionReport {
    pub lower_bound: f64,
    pub witness_pair: Option<[usize; 2]>,
    pub witness_z0: Option<[f64; 2]>,
    pub delta_arg: Option<f64>,
    pub no_obstruction: bool,
    pub base_points: usize,
    pub exhaustive: bool,
    pub budget: u64,
    pub seed: u64,
    pub refinement: usize,
}

impl ObstructionReport {
    pub fn to_estimate(&self) -> EstimateReport {
        EstimateReport {
            name: "mean-lipschitz-lower-bound".into(),
            value: self.lower_bound,
            witness: self.witness_pair.map(|p| p.to_vec()).unwrap_or_default(),
            budget: self.budget,
            seed: self.seed,
            refinement: self.refinement,
            note: self.no_obstruction.then(|| "no obstruction found".into()),
        }
    }
}

struct Found {
    value: f64,
    pair: [usize; 2],
    delta: f64,
}

/// Certified lower bound on the Lipschitz constant of any mean on a planar
/// arc. Pairs are exhaustive when `budget >= n(n-1)/2`, sampled otherwise.
pub fn mean_lip_lower_bound(c: &SampledCurve, base: &BasePoints, budget: u64, seed: u64) -> Result<ObstructionReport> {
    if c.is_circle() {
        return Err(ObstructionError::NotArc);
    }
    let pts = planar_points(c)?;
    let n = pts.len();
    let (candidates, strict) = match base {
        BasePoints::Explicit(z) => (z.clone(), true),
        BasePoints::Auto(cap) => (auto_base_points(&pts, *cap), false),
    };
    let pairs = (n * (n.saturating_sub(1)) / 2) as u64;
    let exhaustive = budget >= pairs;
    let mut usable = 0;
    let mut best: Option<(Found, [f64; 2])> = None;
    for &z0 in &candidates {
        let dist = polyline_distance(&pts, z0, false);
        if !(dist > 0.0) {
            continue;
        }
        let trace = match ArgTrace::new(&pts, z0, false) {
            Ok(t) => t,
            Err(e) if strict => return Err(e),
            Err(_) => continue,
        };
        usable += 1;
        let found = if exhaustive {
            search_all(c, &trace, dist)
        } else {
            search_sampled(c, &trace, dist, budget, seed)
        };
        if let Some(f) = found {
            if best.as_ref().is_none_or(|(b, _)| f.value > b.value) {
                best = Some((f, z0));
            }
        }
    }
    if usable == 0 {
        return Err(ObstructionError::AllOnCurve);
    }
    let (lower_bound, witness_pair, witness_z0, delta_arg) = match &best {
        Some((f, z)) => (f.value, Some(f.pair), Some(*z), Some(f.delta)),
        None => (0.0, None, None, None),
    };
    Ok(ObstructionReport {
        lower_bound,
        witness_pair,
        witness_z0,
        delta_arg,
        no_obstruction: best.is_none(),
        base_points: usable,
        exhaustive,
        budget: if exhaustive { pairs } else { budget },
        seed,
        refinement: n,
    })
}

fn search_all(c: &SampledCurve, trace: &ArgTrace, dist: f64) -> Option<Found> {
    let n = c.len();
    par_argmax(n as u64, |i| {
        let i = i as usize;
        let mut row: Option<(f64, usize)> = None;
        for j in i + 1..n {
            if !allowed_delta(trace.between(i, j)) {
                let v = dist / c.space().d(i, j);
                if row.is_none_or(|(b, _)| v > b) {
                    row = Some((v, j));
                }
            }
        }
        row.map(|(v, j)| (v, [i, j]))
    })
    .map(|b| Found { value: b.value, pair: b.item, delta: trace.between(b.item[0], b.item[1]) })
}

fn search_sampled(c: &SampledCurve, trace: &ArgTrace, dist: f64, budget: u64, seed: u64) -> Option<Found> {
    let n = c.len();
    let s = c.space();
    par_argmax(budget, |k| {
        let mut rng = sample_rng(seed, k);
        let i = rng.gen_range(0..n);
        let j = if k % 2 == 0 {
            rng.gen_range(0..n)
        } else {
            (0..16).map(|_| rng.gen_range(0..n)).filter(|&j| j != i).min_by(|&a, &b| s.d(i, a).total_cmp(&s.d(i, b)))?
        };
        let (i, j) = (i.min(j), i.max(j));
        (i != j && !allowed_delta(trace.between(i, j))).then(|| (dist / s.d(i, j), [i, j]))
    })
    .map(|b| Found { value: b.value, pair: b.item, delta: trace.between(b.item[0], b.item[1]) })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindingCheck {
    /// `max_k |γ(t_k + 1) - γ(t_k)|`
    pub sup_step: f64,
    /// distance from the base point to the path polyline
    pub dist: f64,
    pub hypothesis: bool,
    pub delta_arg: f64,
    pub allowed: bool,
}

impl WindingCheck {
    /// The winding conclusion holds whenever the hypothesis does.
    pub fn consistent(&self) -> bool {
        !self.hypothesis || self.allowed
    }
}

/// Checks the winding implication on a path over `[0, 2]` whose two halves
/// share one parameter grid, as produced by `symmetrized_curve`.
pub fn winding_check(path: &PathSample, z0: [f64; 2]) -> Result<WindingCheck> {
    let m = path.len() / 2;
    if path.len() != 2 * m || m == 0 || path.norm != Norm::Euclidean {
        return Err(ObstructionError::Misaligned);
    }
    if (0..m).any(|k| path.params[k] + 1.0 != path.params[m + k]) {
        return Err(ObstructionError::Misaligned);
    }
    if path.points.iter().any(|p| p.len() != 2) {
        return Err(ObstructionError::NotPlanar);
    }
    let pts: Vec<[f64; 2]> = path.points.iter().map(|p| [p[0], p[1]]).collect();
    let sup_step = (0..m).map(|k| Norm::Euclidean.distance(&path.points[k], &path.points[m + k])).fold(0.0, f64::max);
    let dist = polyline_distance(&pts, z0, false);
    let delta_arg = delta_arg(&pts, z0, false)?;
    Ok(WindingCheck { sup_step, dist, hypothesis: sup_step <= dist, delta_arg, allowed: allowed_delta(delta_arg) })
}
