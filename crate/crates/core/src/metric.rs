//! Finite metric spaces, product metrics and map samples.
//!
//! A [`MetricSpace`] is a finite list of points together with a distance
//! backend. Embedded backends (Euclidean and sup-norm) keep only the
//! coordinates and compute distances on demand; the explicit-matrix backend
//! stores the full table.

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sampling::rng_for;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("point id {id} out of range for a space with {len} points")]
    InvalidId { id: usize, len: usize },
    #[error("points must share one dimension: point {index} has dimension {found}, expected {expected}")]
    DimensionMismatch {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("distance matrix must be square: row {row} has {found} entries, expected {expected}")]
    NotSquare {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("distance matrix is not symmetric at ({0}, {1})")]
    NotSymmetric(usize, usize),
    #[error("distance matrix entry ({0}, {1}) is negative or not finite")]
    BadEntry(usize, usize),
    #[error("non-finite coordinate at point {0}")]
    NonFinite(usize),
    #[error("operation requires an embedded (euclidean or sup) backend")]
    NotEmbedded,
    #[error("product space needs at least one factor")]
    NoFactors,
    #[error("tuple has {found} entries, expected {expected}")]
    Arity { expected: usize, found: usize },
    #[error("empty map sample")]
    EmptyMap,
    #[error("duplicate input tuple {0:?}")]
    DuplicateInput(Vec<usize>),
    #[error("map output {index} has dimension {found}, codomain expects {expected}")]
    OutputDimension {
        index: usize,
        expected: usize,
        found: usize,
    },
    #[error("displacement needs a self-map of a single factor")]
    NotSelfMap,
}

/// Norm used for coordinate distances.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Norm {
    Euclidean,
    Sup,
}

impl Norm {
    #[inline]
    pub fn distance(self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            Norm::Sup => x
                .iter()
                .zip(y)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max),
        }
    }

    #[inline]
    pub fn length(self, x: &[f64]) -> f64 {
        match self {
            Norm::Euclidean => x.iter().map(|a| a * a).sum::<f64>().sqrt(),
            Norm::Sup => x.iter().map(|a| a.abs()).fold(0.0, f64::max),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Euclidean,
    Sup,
    Matrix,
}

impl Backend {
    pub fn norm(self) -> Option<Norm> {
        match self {
            Backend::Euclidean => Some(Norm::Euclidean),
            Backend::Sup => Some(Norm::Sup),
            Backend::Matrix => None,
        }
    }
}

/// A finite metric space. Point ids are indices into the point list.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricSpace {
    backend: Backend,
    dim: usize,
    len: usize,
    coords: Vec<f64>,
    matrix: Vec<f64>,
}

/// On-disk form of a [`MetricSpace`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricSpaceFile {
    pub backend: Backend,
    #[serde(default)]
    pub points: Vec<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub matrix: Option<Vec<Vec<f64>>>,
}

impl MetricSpace {
    pub fn euclidean(points: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        Self::embedded(Backend::Euclidean, points)
    }

    pub fn sup(points: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        Self::embedded(Backend::Sup, points)
    }

    pub fn embedded(norm: Backend, points: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        if norm == Backend::Matrix {
            return Err(MetricError::NotEmbedded);
        }
        let dim = points.first().map_or(0, Vec::len);
        let mut coords = Vec::with_capacity(points.len() * dim);
        for (index, p) in points.iter().enumerate() {
            if p.len() != dim {
                return Err(MetricError::DimensionMismatch {
                    index,
                    expected: dim,
                    found: p.len(),
                });
            }
            if p.iter().any(|c| !c.is_finite()) {
                return Err(MetricError::NonFinite(index));
            }
            coords.extend_from_slice(p);
        }
        Ok(Self {
            backend: norm,
            dim,
            len: points.len(),
            coords,
            matrix: Vec::new(),
        })
    }

    /// Explicit distance table. Must be square, symmetric, finite and nonnegative.
    pub fn from_matrix(rows: Vec<Vec<f64>>) -> Result<Self, MetricError> {
        let n = rows.len();
        let mut matrix = Vec::with_capacity(n * n);
        for (row, r) in rows.iter().enumerate() {
            if r.len() != n {
                return Err(MetricError::NotSquare {
                    row,
                    expected: n,
                    found: r.len(),
                });
            }
            for (col, &v) in r.iter().enumerate() {
                if !v.is_finite() || v < 0.0 {
                    return Err(MetricError::BadEntry(row, col));
                }
            }
            matrix.extend_from_slice(r);
        }
        for i in 0..n {
            for j in (i + 1)..n {
                if matrix[i * n + j] != matrix[j * n + i] {
                    return Err(MetricError::NotSymmetric(i, j));
                }
            }
        }
        Ok(Self {
            backend: Backend::Matrix,
            dim: 0,
            len: n,
            coords: Vec::new(),
            matrix,
        })
    }

    pub fn from_file(file: MetricSpaceFile) -> Result<Self, MetricError> {
        match file.backend {
            Backend::Matrix => Self::from_matrix(file.matrix.unwrap_or_default()),
            b => Self::embedded(b, file.points),
        }
    }

    pub fn to_file(&self) -> MetricSpaceFile {
        match self.backend {
            Backend::Matrix => MetricSpaceFile {
                backend: Backend::Matrix,
                points: Vec::new(),
                matrix: Some(self.matrix.chunks(self.len.max(1)).map(<[f64]>::to_vec).collect()),
            },
            b => MetricSpaceFile {
                backend: b,
                points: self.points().map(<[f64]>::to_vec).collect(),
                matrix: None,
            },
        }
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn norm(&self) -> Option<Norm> {
        self.backend.norm()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Coordinates of point `id`; empty for the matrix backend.
    #[inline]
    pub fn point(&self, id: usize) -> &[f64] {
        &self.coords[id * self.dim..(id + 1) * self.dim]
    }

    pub fn points(&self) -> impl Iterator<Item = &[f64]> + '_ {
        (0..self.len).map(move |i| self.point(i))
    }

    pub fn check_id(&self, id: usize) -> Result<(), MetricError> {
        if id < self.len {
            Ok(())
        } else {
            Err(MetricError::InvalidId { id, len: self.len })
        }
    }

    pub fn distance(&self, a: usize, b: usize) -> Result<f64, MetricError> {
        self.check_id(a)?;
        self.check_id(b)?;
        Ok(self.d(a, b))
    }

    /// Unchecked distance for sampling loops; panics on a bad id.
    #[inline]
    pub fn d(&self, a: usize, b: usize) -> f64 {
        match self.backend {
            Backend::Euclidean => Norm::Euclidean.distance(self.point(a), self.point(b)),
            Backend::Sup => Norm::Sup.distance(self.point(a), self.point(b)),
            Backend::Matrix => self.matrix[a * self.len + b],
        }
    }

    /// Distance between two coordinate vectors in this space's ambient norm.
    pub fn coord_distance(&self, x: &[f64], y: &[f64]) -> Result<f64, MetricError> {
        self.norm()
            .map(|n| n.distance(x, y))
            .ok_or(MetricError::NotEmbedded)
    }

    /// Restriction to a subset of ids, in the given order.
    pub fn subspace(&self, ids: &[usize]) -> Result<Self, MetricError> {
        for &i in ids {
            self.check_id(i)?;
        }
        match self.backend {
            Backend::Matrix => {
                let rows = ids
                    .iter()
                    .map(|&i| ids.iter().map(|&j| self.d(i, j)).collect())
                    .collect();
                Self::from_matrix(rows)
            }
            b => Self::embedded(b, ids.iter().map(|&i| self.point(i).to_vec()).collect()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ViolationKind {
    NonzeroSelfDistance,
    Asymmetry,
    Triangle,
}

/// Outcome of [`validate_metric`]. For a triangle violation the witness is
/// `(a, c, b)` with `d(a, b) > d(a, c) + d(c, b) + tol`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub checked: u64,
    pub violation: Option<(ViolationKind, [usize; 3])>,
}

/// Checks the metric axioms. Matrix spaces are checked on all triples,
/// embedded spaces on `budget` random triples.
pub fn validate_metric(space: &MetricSpace, tol: f64, budget: u64, seed: u64) -> ValidationReport {
    let n = space.len();
    let mut checked = 0u64;
    let mut check = |a: usize, b: usize, c: usize| -> Option<(ViolationKind, [usize; 3])> {
        checked += 1;
        if space.d(a, a) > tol {
            return Some((ViolationKind::NonzeroSelfDistance, [a, a, a]));
        }
        if (space.d(a, b) - space.d(b, a)).abs() > tol {
            return Some((ViolationKind::Asymmetry, [a, b, b]));
        }
        if space.d(a, b) > space.d(a, c) + space.d(c, b) + tol {
            return Some((ViolationKind::Triangle, [a, c, b]));
        }
        None
    };
    let mut violation = None;
    if n > 0 {
        if space.backend() == Backend::Matrix {
            'outer: for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        if let Some(v) = check(a, b, c) {
                            violation = Some(v);
                            break 'outer;
                        }
                    }
                }
            }
        } else {
            let mut rng = rng_for(seed, 0);
            for _ in 0..budget {
                let (a, b, c) = (rng.gen_range(0..n), rng.gen_range(0..n), rng.gen_range(0..n));
                if let Some(v) = check(a, b, c) {
                    violation = Some(v);
                    break;
                }
            }
        }
    }
    ValidationReport {
        passed: violation.is_none(),
        checked,
        violation,
    }
}

/// Cartesian product with the sum metric.
#[derive(Debug, Clone)]
pub struct ProductSpace<'a> {
    factors: Vec<&'a MetricSpace>,
}

impl<'a> ProductSpace<'a> {
    pub fn new(factors: Vec<&'a MetricSpace>) -> Result<Self, MetricError> {
        if factors.is_empty() {
            return Err(MetricError::NoFactors);
        }
        Ok(Self { factors })
    }

    /// `space^n`.
    pub fn power(space: &'a MetricSpace, n: usize) -> Result<Self, MetricError> {
        Self::new(vec![space; n])
    }

    pub fn arity(&self) -> usize {
        self.factors.len()
    }

    pub fn factors(&self) -> &[&'a MetricSpace] {
        &self.factors
    }

    pub fn check_tuple(&self, t: &[usize]) -> Result<(), MetricError> {
        if t.len() != self.arity() {
            return Err(MetricError::Arity {
                expected: self.arity(),
                found: t.len(),
            });
        }
        for (f, &id) in self.factors.iter().zip(t) {
            f.check_id(id)?;
        }
        Ok(())
    }

    pub fn distance(&self, a: &[usize], b: &[usize]) -> Result<f64, MetricError> {
        self.check_tuple(a)?;
        self.check_tuple(b)?;
        Ok(self.d(a, b))
    }

    #[inline]
    pub fn d(&self, a: &[usize], b: &[usize]) -> f64 {
        self.factors
            .iter()
            .zip(a.iter().zip(b))
            .map(|(f, (&x, &y))| f.d(x, y))
            .sum()
    }
}

/// A finite evaluated map: input tuples of the domain with output coordinates
/// in an embedded codomain.
#[derive(Debug, Clone)]
pub struct MapSample<'a> {
    domain: ProductSpace<'a>,
    codomain: Norm,
    codomain_dim: usize,
    pairs: Vec<(Vec<usize>, Vec<f64>)>,
}

impl<'a> MapSample<'a> {
    pub fn new(
        domain: ProductSpace<'a>,
        codomain: Norm,
        codomain_dim: usize,
        pairs: Vec<(Vec<usize>, Vec<f64>)>,
    ) -> Result<Self, MetricError> {
        let mut seen = std::collections::HashSet::with_capacity(pairs.len());
        for (index, (input, output)) in pairs.iter().enumerate() {
            domain.check_tuple(input)?;
            if output.len() != codomain_dim {
                return Err(MetricError::OutputDimension {
                    index,
                    expected: codomain_dim,
                    found: output.len(),
                });
            }
            if !seen.insert(input.clone()) {
                return Err(MetricError::DuplicateInput(input.clone()));
            }
        }
        Ok(Self {
            domain,
            codomain,
            codomain_dim,
            pairs,
        })
    }

    /// Samples `f` at every point of `space`.
    pub fn from_fn(
        space: &'a MetricSpace,
        codomain: Norm,
        f: impl Fn(&[f64]) -> Vec<f64>,
    ) -> Result<Self, MetricError> {
        let pairs: Vec<_> = (0..space.len()).map(|i| (vec![i], f(space.point(i)))).collect();
        let dim = pairs.first().map_or(0, |p| p.1.len());
        Self::new(ProductSpace::power(space, 1)?, codomain, dim, pairs)
    }

    pub fn domain(&self) -> &ProductSpace<'a> {
        &self.domain
    }

    pub fn codomain(&self) -> Norm {
        self.codomain
    }

    pub fn codomain_dim(&self) -> usize {
        self.codomain_dim
    }

    pub fn pairs(&self) -> &[(Vec<usize>, Vec<f64>)] {
        &self.pairs
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    #[inline]
    pub fn output_distance(&self, i: usize, j: usize) -> f64 {
        self.codomain.distance(&self.pairs[i].1, &self.pairs[j].1)
    }

    #[inline]
    pub fn input_distance(&self, i: usize, j: usize) -> f64 {
        self.domain.d(&self.pairs[i].0, &self.pairs[j].0)
    }
}

/// `max d(f(x), x)` over the recorded inputs of a self-map.
pub fn displacement(m: &MapSample<'_>) -> Result<f64, MetricError> {
    if m.is_empty() {
        return Err(MetricError::EmptyMap);
    }
    let [space] = m.domain().factors() else {
        return Err(MetricError::NotSelfMap);
    };
    if space.norm() != Some(m.codomain()) || space.dim() != m.codomain_dim() {
        return Err(MetricError::NotSelfMap);
    }
    Ok(m.pairs()
        .iter()
        .map(|(x, y)| m.codomain().distance(space.point(x[0]), y))
        .fold(0.0, f64::max))
}
