//! Finite-subset hyperspaces with the Hausdorff metric, and the retraction
//! `X(n) -> X` induced by a set-symmetric mean.

use rand::seq::SliceRandom;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constructions::{ConstructionError, Handle, HandleKind};
use crate::estimators::{lipschitz_handle, DomainSampler, EstimateError, LipMode, LipOptions};
use crate::metric::{MetricError, MetricSpace};
use crate::sampling::sample_rng;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HyperspaceError {
    #[error("subsets live in different base spaces")]
    DifferentBase,
    #[error("a subset must be nonempty")]
    Empty,
    #[error("subset has {found} members, capacity is {capacity}")]
    OverCapacity { found: usize, capacity: usize },
    #[error("mean is not set-symmetric: {left:?} and {right:?} give different values")]
    SetSymmetry { left: Vec<usize>, right: Vec<usize> },
    #[error("needs {0}")]
    WrongInput(&'static str),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Construction(#[from] ConstructionError),
    #[error(transparent)]
    Estimate(#[from] EstimateError),
}

type Result<T> = std::result::Result<T, HyperspaceError>;

/// A nonempty subset of at most `capacity` points, members sorted by id.
#[derive(Debug, Clone)]
pub struct FiniteSubset<'a> {
    base: &'a MetricSpace,
    members: Vec<usize>,
    capacity: usize,
}

impl PartialEq for FiniteSubset<'_> {
    fn eq(&self, other: &Self) -> bool {
        std::ptr::eq(self.base, other.base) && self.members == other.members
    }
}

impl<'a> FiniteSubset<'a> {
    pub fn new(base: &'a MetricSpace, ids: &[usize], capacity: usize) -> Result<Self> {
        let mut members = ids.to_vec();
        members.sort_unstable();
        members.dedup();
        if members.is_empty() {
            return Err(HyperspaceError::Empty);
        }
        if members.len() > capacity {
            return Err(HyperspaceError::OverCapacity { found: members.len(), capacity });
        }
        for &i in &members {
            base.check_id(i)?;
        }
        Ok(Self { base, members, capacity })
    }

    pub fn base(&self) -> &'a MetricSpace {
        self.base
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    /// The members as an `n`-tuple, repeating `pad` to fill.
    pub fn padded_with(&self, n: usize, pad: usize) -> Vec<usize> {
        let mut t = self.members.clone();
        t.resize(n.max(t.len()), pad);
        t
    }

    /// Canonical padding: repeat the last member.
    pub fn padded(&self, n: usize) -> Vec<usize> {
        self.padded_with(n, *self.members.last().unwrap())
    }
}

/// On-disk subset: a list of member ids of a curve or space file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubsetFile {
    pub base: String,
    pub members: Vec<usize>,
}

fn same_base(a: &FiniteSubset<'_>, b: &FiniteSubset<'_>) -> Result<()> {
    if std::ptr::eq(a.base, b.base) {
        Ok(())
    } else {
        Err(HyperspaceError::DifferentBase)
    }
}

/// For each member of `from`, its nearest member of `to` (ties to the lower id).
pub fn nearest_map(from: &FiniteSubset<'_>, to: &FiniteSubset<'_>) -> Vec<usize> {
    let s = from.base;
    from.members
        .iter()
        .map(|&a| {
            *to.members
                .iter()
                .min_by(|&&x, &&y| s.d(a, x).total_cmp(&s.d(a, y)).then(x.cmp(&y)))
                .unwrap()
        })
        .collect()
}

fn one_sided(from: &FiniteSubset<'_>, to: &FiniteSubset<'_>) -> f64 {
    let s = from.base;
    from.members
        .iter()
        .zip(nearest_map(from, to))
        .map(|(&a, b)| s.d(a, b))
        .fold(0.0, f64::max)
}

pub fn hausdorff(a: &FiniteSubset<'_>, b: &FiniteSubset<'_>) -> Result<f64> {
    same_base(a, b)?;
    Ok(one_sided(a, b).max(one_sided(b, a)))
}

/// The retraction `r(A) = μ(a_1, ..., a_n)` for a set-symmetric `n`-mean.
#[derive(Debug)]
pub struct Retraction<'h, 'a> {
    mu: &'h Handle<'a>,
}

/// Multiset with underlying set `members`, of length `n`, in random order.
fn random_cover(rng: &mut impl Rng, members: &[usize], n: usize) -> Vec<usize> {
    let mut t = members.to_vec();
    while t.len() < n {
        t.push(members[rng.gen_range(0..members.len())]);
    }
    t.shuffle(rng);
    t
}

/// Builds the retraction after checking set-symmetry of `mu` on `budget`
/// sampled multisets.
pub fn mean_to_retraction<'h, 'a>(mu: &'h Handle<'a>, budget: u64, seed: u64) -> Result<Retraction<'h, 'a>> {
    if mu.kind() != HandleKind::Mean {
        return Err(HyperspaceError::WrongInput("a mean"));
    }
    let n = mu.arity();
    let sampler = DomainSampler::for_handle(mu)?;
    let failure = (0..budget)
        .into_par_iter()
        .map(|k| -> Option<Result<()>> {
            let mut rng = sample_rng(seed, k);
            let t = sampler.sample(&mut rng, n)?;
            let mut set = t.clone();
            set.sort_unstable();
            set.dedup();
            let (x, y) = (random_cover(&mut rng, &set, n), random_cover(&mut rng, &set, n));
            Some(match (mu.eval(&x), mu.eval(&y)) {
                (Ok(fx), Ok(fy)) if fx == fy => Ok(()),
                (Ok(_), Ok(_)) => Err(HyperspaceError::SetSymmetry { left: x, right: y }),
                (Err(e), _) | (_, Err(e)) => Err(e.into()),
            })
        })
        .flatten()
        .collect::<Vec<_>>()
        .into_iter()
        .find(|r| r.is_err());
    if let Some(Err(e)) = failure {
        return Err(e);
    }
    Ok(Retraction { mu })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetractionCheck {
    pub passed: bool,
    pub checked: u64,
    pub arity: usize,
    pub lip_estimate: f64,
    /// `max d(r(A), r(B)) / (n ρ)` over the sampled pairs
    pub worst_ratio: f64,
    pub worst_pair: Option<(Vec<usize>, Vec<usize>)>,
    pub failure: Option<String>,
}

struct PairSample {
    a: Vec<usize>,
    b: Vec<usize>,
    rho: f64,
    ta: Vec<usize>,
    tfa: Vec<usize>,
    tb: Vec<usize>,
    thb: Vec<usize>,
}

impl<'h, 'a> Retraction<'h, 'a> {
    pub fn arity(&self) -> usize {
        self.mu.arity()
    }

    pub fn apply(&self, a: &FiniteSubset<'_>) -> Result<Vec<f64>> {
        self.check(a)?;
        Ok(self.mu.eval(&a.padded(self.arity()))?)
    }

    /// `r(A)` with the padding slots filled by `pad`, which must be a member.
    pub fn apply_with_pad(&self, a: &FiniteSubset<'_>, pad: usize) -> Result<Vec<f64>> {
        self.check(a)?;
        if a.members.binary_search(&pad).is_err() {
            return Err(HyperspaceError::WrongInput("a pad member of the subset"));
        }
        Ok(self.mu.eval(&a.padded_with(self.arity(), pad))?)
    }

    fn check(&self, a: &FiniteSubset<'_>) -> Result<()> {
        if !std::ptr::eq(a.base, self.mu.space()) {
            return Err(HyperspaceError::DifferentBase);
        }
        if a.len() > self.arity() {
            return Err(HyperspaceError::OverCapacity { found: a.len(), capacity: self.arity() });
        }
        Ok(())
    }

    fn sample_pair(&self, sampler: &DomainSampler<'_>, seed: u64, k: u64) -> Option<PairSample> {
        let n = self.arity();
        let space = self.mu.space();
        let mut rng = sample_rng(seed, k);
        let t = sampler.sample(&mut rng, n)?;
        let a = FiniteSubset::new(space, &t, n).ok()?;
        let b_ids: Vec<usize> = if k % 2 == 0 {
            sampler.sample(&mut rng, n)?
        } else {
            let mut ids: Vec<usize> = a
                .members
                .iter()
                .map(|&x| if rng.gen_bool(0.75) { sampler.near(&mut rng, x) } else { x })
                .collect();
            if ids.len() < n && rng.gen_bool(0.25) {
                let x = a.members[rng.gen_range(0..a.len())];
                ids.push(sampler.near(&mut rng, x));
            }
            ids
        };
        let b = FiniteSubset::new(space, &b_ids, n).ok()?;
        let rho = hausdorff(&a, &b).ok()?;
        if rho == 0.0 {
            return None;
        }
        let f = nearest_map(&a, &b);
        let g = nearest_map(&b, &a);
        let f_of = |x: usize| f[a.members.binary_search(&x).unwrap()];
        let mut image: Vec<usize> = f.clone();
        image.sort_unstable();
        image.dedup();
        let h = |y: usize| {
            if image.binary_search(&y).is_ok() {
                y
            } else {
                f_of(g[b.members.binary_search(&y).unwrap()])
            }
        };
        let ta = a.padded(n);
        let tfa: Vec<usize> = ta.iter().map(|&x| f_of(x)).collect();
        let tb = b.padded(n);
        let thb: Vec<usize> = tb.iter().map(|&y| h(y)).collect();
        let pair = PairSample { a: a.members.clone(), b: b.members.clone(), rho, ta, tfa, tb, thb };
        (self.mu.in_domain(&pair.tfa) && self.mu.in_domain(&pair.thb) && self.mu.in_domain(&pair.tb)).then_some(pair)
    }

    /// Samples subset pairs and checks `d(r(A), r(B)) <= 3 n L ρ` through the
    /// intermediate set `B' = f(A)`. `L` is a sampled Lipschitz estimate of
    /// the mean that also covers the tuple pairs used in the chain.
    pub fn verify(&self, budget: u64, seed: u64, lip_budget: u64, tol: f64) -> Result<RetractionCheck> {
        let n = self.arity();
        let space = self.mu.space();
        let sampler = DomainSampler::for_handle(self.mu)?;
        let pairs: Vec<PairSample> =
            (0..budget).into_par_iter().filter_map(|k| self.sample_pair(&sampler, seed, k)).collect();
        if pairs.is_empty() {
            return Err(EstimateError::NoAdmissible(budget).into());
        }
        let extra: Vec<(Vec<usize>, Vec<usize>)> =
            pairs.iter().flat_map(|p| [(p.ta.clone(), p.tfa.clone()), (p.tb.clone(), p.thb.clone())]).collect();
        let opts = LipOptions { budget: lip_budget.max(1), seed, min_sep: 1e-12, mode: LipMode::Joint };
        let lip = lipschitz_handle(self.mu, &sampler, opts, &extra)?.value;
        let nf = n as f64;
        let slack = |bound: f64| bound * (1.0 + tol) + tol;
        let mut check = RetractionCheck {
            passed: true,
            checked: pairs.len() as u64,
            arity: n,
            lip_estimate: lip,
            worst_ratio: 0.0,
            worst_pair: None,
            failure: None,
        };
        for p in &pairs {
            let fail = |msg: String| format!("A = {:?}, B = {:?}: {msg}", p.a, p.b);
            let disp_f = p.ta.iter().zip(&p.tfa).map(|(&x, &y)| space.d(x, y)).fold(0.0, f64::max);
            let disp_h = p.tb.iter().zip(&p.thb).map(|(&x, &y)| space.d(x, y)).fold(0.0, f64::max);
            let mut set_h = p.thb.clone();
            set_h.sort_unstable();
            set_h.dedup();
            let mut set_f = p.tfa.clone();
            set_f.sort_unstable();
            set_f.dedup();
            let ra = self.mu.eval(&p.ta)?;
            let rb = self.mu.eval(&p.tb)?;
            let rb1 = self.mu.eval(&p.tfa)?;
            let rb2 = self.mu.eval(&p.thb)?;
            let d = |x: &[f64], y: &[f64]| self.mu.norm().distance(x, y);
            let problem = if set_h != set_f {
                Some(fail("h(B) differs from f(A)".into()))
            } else if disp_f > slack(p.rho) || disp_h > slack(2.0 * p.rho) {
                Some(fail(format!("displacements {disp_f}, {disp_h} exceed rho = {}", p.rho)))
            } else if rb1 != rb2 {
                Some(fail("two tuples of B' give different values".into()))
            } else if d(&ra, &rb1) > slack(nf * lip * p.rho) {
                Some(fail(format!("d(r(A), r(B')) = {} > n L rho", d(&ra, &rb1))))
            } else if d(&rb, &rb2) > slack(2.0 * nf * lip * p.rho) {
                Some(fail(format!("d(r(B), r(B')) = {} > 2 n L rho", d(&rb, &rb2))))
            } else if d(&ra, &rb) > slack(3.0 * nf * lip * p.rho) {
                Some(fail(format!("d(r(A), r(B)) = {} > 3 n L rho", d(&ra, &rb))))
            } else {
                None
            };
            if let Some(msg) = problem {
                check.passed = false;
                check.failure.get_or_insert(msg);
            }
            let ratio = d(&ra, &rb) / (nf * p.rho);
            if ratio > check.worst_ratio {
                check.worst_ratio = ratio;
                check.worst_pair = Some((p.a.clone(), p.b.clone()));
            }
        }
        Ok(check)
    }
}
