//! The end-to-end verification suite: ten criteria, each a reproducible run
//! with fixed seeds and stated tolerances.

use std::error::Error;
use std::f64::consts::{PI, SQRT_2};
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::constructions::{
    box_mixer, circle_local_mixer, graph_mean_handle, median_mixer, strip_retraction, Handle, PiecewiseLinear,
};
use crate::curve::{circles_arc_circle, curve_length, generate, CurveSpec, Profile, SampledCurve};
use crate::estimators::{
    absorption_check, chain_components, lipschitz_handle, minimax_table, turning_constant,
    uniform_disconnectedness, DomainSampler, LipOptions, TurningMode, EXHAUSTIVE_LIMIT,
};
use crate::hyperspace::{hausdorff, mean_to_retraction, FiniteSubset};
use crate::metric::MetricSpace;
use crate::obstruction::{mean_lip_lower_bound, BasePoints};
use crate::sampling::{rng_for, sample_rng};

type Outcome = Result<(bool, String), Box<dyn Error + Send + Sync>>;

#[derive(Debug, Clone, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_secs: f64,
}

struct Criterion {
    id: u8,
    name: &'static str,
    time_limit: Option<f64>,
    run: fn() -> Outcome,
}

const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, name: "median mixers", time_limit: Some(10.0), run: median_bounds },
    Criterion { id: 2, name: "turning constants", time_limit: Some(60.0), run: turning_constants },
    Criterion { id: 3, name: "box mixer", time_limit: Some(60.0), run: box_mixers },
    Criterion { id: 4, name: "strip retraction", time_limit: None, run: strip_retractions },
    Criterion { id: 5, name: "graph mean", time_limit: None, run: graph_means },
    Criterion { id: 6, name: "hyperspace retraction", time_limit: None, run: hyperspace },
    Criterion { id: 7, name: "winding obstruction", time_limit: None, run: obstruction },
    Criterion { id: 8, name: "vertex snowflake", time_limit: None, run: snowflake },
    Criterion { id: 9, name: "uniform disconnectedness", time_limit: None, run: minimax_chains },
    Criterion { id: 10, name: "chain connectivity", time_limit: None, run: chain_connectivity },
];

pub fn criteria() -> impl Iterator<Item = (u8, &'static str)> {
    CRITERIA.iter().map(|c| (c.id, c.name))
}

pub fn run_criterion(id: u8) -> Option<CriterionResult> {
    let c = CRITERIA.iter().find(|c| c.id == id)?;
    let start = Instant::now();
    let outcome = (c.run)();
    let elapsed_secs = start.elapsed().as_secs_f64();
    let (mut passed, mut detail) = match outcome {
        Ok(r) => r,
        Err(e) => (false, format!("error: {e}")),
    };
    if let Some(limit) = c.time_limit {
        if elapsed_secs >= limit {
            passed = false;
            detail.push_str(&format!("; took {elapsed_secs:.1} s, limit {limit} s"));
        }
    }
    Some(CriterionResult { id, name: c.name, passed, detail, elapsed_secs })
}

pub fn run_all() -> Vec<CriterionResult> {
    CRITERIA.iter().filter_map(|c| run_criterion(c.id)).collect()
}

impl CriterionResult {
    pub fn line(&self) -> String {
        let mark = if self.passed { "PASS" } else { "FAIL" };
        format!("[{mark}] {:>2} {:<26} {:>7.2}s  {}", self.id, self.name, self.elapsed_secs, self.detail)
    }
}

fn curve(spec: CurveSpec) -> Result<SampledCurve, Box<dyn Error + Send + Sync>> {
    Ok(generate(&spec)?.into_curve()?)
}

fn lip(h: &Handle<'_>, budget: u64, seed: u64) -> Result<f64, Box<dyn Error + Send + Sync>> {
    let sampler = DomainSampler::for_handle(h)?;
    let opts = LipOptions { budget, seed, ..LipOptions::default() };
    Ok(lipschitz_handle(h, &sampler, opts, &[])?.value)
}

fn median_bounds() -> Outcome {
    let seg = curve(CurveSpec::Segment { from: vec![0.0], to: vec![1.0], n: 500 })?;
    let med = median_mixer(&seg)?;
    let l = lip(&med, 100_000, 1)?;
    let median_ok = (1.0 - 1e-3..=1.0 + 1e-12).contains(&l);

    let circle = curve(CurveSpec::Circle { r: 1.0, n: 1000 })?;
    let sigma = circle_local_mixer(&circle, 1.0)?;
    let sampler = DomainSampler::for_handle(&sigma)?;
    let rep = absorption_check(&sigma, &sampler, 20_000, 2, 1e-9)?;
    Ok((
        median_ok && rep.passed,
        format!(
            "Lip(med) on [0,1] = {l:.6}; circle mixer absorption {} on {} triples (K = {:.3}, L = {:.3})",
            if rep.passed { "exact" } else { "violated" },
            rep.checked,
            rep.displacement_constant,
            rep.lip_estimate
        ),
    ))
}

fn turning_constants() -> Outcome {
    let t = |spec| -> Result<f64, Box<dyn Error + Send + Sync>> {
        Ok(turning_constant(&curve(spec)?, TurningMode::Exhaustive, 0)?.value)
    };
    let circle = t(CurveSpec::Circle { r: 1.0, n: 1000 })?;
    let parabola = t(CurveSpec::GraphCurve { profile: Profile::Parabola, extent: 10.0, n: 2001 })?;
    let boxed = t(CurveSpec::BoxCurve { t: 1.05, per_edge: 250 })?;
    Ok((
        (circle - 1.0).abs() <= 0.01 && parabola >= 5.0 && boxed >= 10.0,
        format!("circle {circle:.6}, parabola {parabola:.4}, box t=1.05 {boxed:.3}"),
    ))
}

fn box_mixers() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for t in [1.2, 1.5, 1.8] {
        let c = curve(CurveSpec::BoxCurve { t, per_edge: 120 })?;
        let sigma = box_mixer(&c)?;
        let sampler = DomainSampler::for_handle(&sigma)?;
        let rep = absorption_check(&sigma, &sampler, 10_000, 3, 1e-9)?;
        let l = lip(&sigma, 10_000, 4)?;
        ok &= rep.passed && l <= 50.0;
        parts.push(format!("t={t}: absorption {}, Lip {l:.3}", if rep.passed { "ok" } else { "failed" }));
    }
    Ok((ok, parts.join("; ")))
}

fn random_pl(rng: &mut impl Rng, xs: &[f64]) -> Vec<f64> {
    let mut ys = vec![rng.gen_range(-1.0..1.0)];
    for w in xs.windows(2) {
        let y = ys.last().unwrap() + rng.gen_range(-1.0..=1.0) * (w[1] - w[0]);
        ys.push(y);
    }
    ys
}

fn strip_retractions() -> Outcome {
    let mut worst = 0.0f64;
    let mut moved = 0usize;
    let mut checked = 0usize;
    for inst in 0..20u64 {
        let mut rng = rng_for(404, inst);
        let k = rng.gen_range(2..10);
        let mut xs: Vec<f64> = (0..k).map(|_| rng.gen_range(-2.0..2.0)).collect();
        xs.extend([-2.0, 2.0]);
        xs.sort_by(f64::total_cmp);
        xs.dedup();
        let phi = random_pl(&mut rng, &xs);
        let mut psi = random_pl(&mut rng, &xs);
        let lift = phi.iter().zip(&psi).map(|(a, b)| a - b).fold(f64::NEG_INFINITY, f64::max) + rng.gen_range(0.0..1.0);
        psi.iter_mut().for_each(|y| *y += lift);
        let (phi, psi) = (PiecewiseLinear::new(xs.clone(), phi)?, PiecewiseLinear::new(xs, psi)?);
        let slopes = phi.lipschitz().max(psi.lipschitz());
        if slopes > 1.0 + 1e-12 {
            return Err(format!("instance {inst} has slope {slopes}").into());
        }
        let r = strip_retraction(phi.clone(), psi.clone())?;
        let stats: Vec<(f64, usize, usize)> = (0..20_000u64)
            .into_par_iter()
            .map(|j| {
                let mut rng = sample_rng(inst, j);
                let p = [rng.gen_range(-3.0..3.0), rng.gen_range(-5.0..5.0)];
                let q = if j % 2 == 0 {
                    [rng.gen_range(-3.0..3.0), rng.gen_range(-5.0..5.0)]
                } else {
                    let s = 10f64.powf(rng.gen_range(-6.0..0.0));
                    [p[0] + s * rng.gen_range(-1.0..1.0), p[1] + s * rng.gen_range(-1.0..1.0)]
                };
                let (a, b) = (r.apply(p), r.apply(q));
                let d = (p[0] - q[0]).hypot(p[1] - q[1]);
                let ratio = if d > 0.0 { (a[0] - b[0]).hypot(a[1] - b[1]) / d } else { 0.0 };
                let x = rng.gen_range(-2.0..=2.0);
                let e = [x, phi.eval(x) + rng.gen_range(0.0..=1.0) * (psi.eval(x) - phi.eval(x))];
                let inside = r.contains(e);
                (ratio, inside as usize, (inside && r.apply(e) != e) as usize)
            })
            .collect();
        for (ratio, inside, bad) in stats {
            worst = worst.max(ratio);
            checked += inside;
            moved += bad;
        }
    }
    Ok((
        worst <= SQRT_2 + 1e-6 && moved == 0 && checked > 0,
        format!("max Lip over 20 strips = {worst:.9}; {moved} of {checked} points of E moved"),
    ))
}

fn graph_means() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, profile, extent) in [("parabola", Profile::Parabola, 3.0), ("cusp", Profile::Cusp, 1.0)] {
        let mut lips = Vec::new();
        let mut turnings = Vec::new();
        for n in [200, 400, 800] {
            let c = curve(CurveSpec::GraphCurve { profile: profile.clone(), extent, n })?;
            let mu = graph_mean_handle(&c, 2)?;
            let bad = (0..20_000u64)
                .into_par_iter()
                .filter(|&k| {
                    let mut rng = sample_rng(5, k);
                    let (a, b) = (rng.gen_range(0..n), rng.gen_range(0..n));
                    let (ab, ba, aa) = (mu.eval(&[a, b]), mu.eval(&[b, a]), mu.eval(&[a, a]));
                    !matches!((ab, ba), (Ok(x), Ok(y)) if x == y) || !matches!(aa, Ok(p) if p == c.point(a))
                })
                .count();
            ok &= bad == 0;
            let mu3 = graph_mean_handle(&c, 3)?;
            ok &= mean_to_retraction(&mu3, 5_000, 6).is_ok();
            lips.push(lip(&mu, 50_000, 7)?);
            turnings.push(turning_constant(&c, TurningMode::Exhaustive, 0)?.value);
        }
        let (lo, hi) = lips.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &l| (lo.min(l), hi.max(l)));
        let spread = (hi - lo) / lo;
        ok &= spread < 0.2;
        parts.push(format!(
            "{name}: Lip {:.3}/{:.3}/{:.3} (spread {:.1}%), turning {:.2}/{:.2}/{:.2}",
            lips[0],
            lips[1],
            lips[2],
            100.0 * spread,
            turnings[0],
            turnings[1],
            turnings[2]
        ));
        if name == "cusp" {
            // sampled turning grows without bound under refinement
            ok &= turnings.windows(2).all(|w| w[1] > w[0]);
        }
    }
    Ok((ok, parts.join("; ")))
}

/// Smallest ρ admitting maps `A -> B` and `B -> A` of displacement at most ρ,
/// over every such pair of maps.
fn hausdorff_by_maps(s: &MetricSpace, a: &[usize], b: &[usize]) -> f64 {
    let one = |from: &[usize], to: &[usize]| {
        (0..to.len().pow(from.len() as u32))
            .map(|code| {
                let mut c = code;
                from.iter()
                    .map(|&x| {
                        let y = to[c % to.len()];
                        c /= to.len();
                        s.d(x, y)
                    })
                    .fold(0.0, f64::max)
            })
            .fold(f64::INFINITY, f64::min)
    };
    one(a, b).max(one(b, a))
}

fn hyperspace() -> Outcome {
    let mismatches: usize = (0..100u64)
        .into_par_iter()
        .map(|inst| {
            let mut rng = rng_for(606, inst);
            let pts: Vec<Vec<f64>> = (0..6).map(|_| vec![rng.gen_range(0.0..1.0), rng.gen_range(0.0..1.0)]).collect();
            let s = MetricSpace::euclidean(pts).unwrap();
            let subsets: Vec<Vec<usize>> = (1u32..64)
                .filter(|m| m.count_ones() <= 4)
                .map(|m| (0..6).filter(|i| m >> i & 1 == 1).collect())
                .collect();
            let mut bad = 0;
            for x in &subsets {
                for y in &subsets {
                    let (a, b) = (FiniteSubset::new(&s, x, 4).unwrap(), FiniteSubset::new(&s, y, 4).unwrap());
                    if hausdorff(&a, &b).unwrap() != hausdorff_by_maps(&s, x, y) {
                        bad += 1;
                    }
                }
            }
            bad
        })
        .sum();
    let mut ok = mismatches == 0;
    let mut parts = vec![format!("hausdorff mismatches: {mismatches}")];
    let c = curve(CurveSpec::GraphCurve { profile: Profile::Parabola, extent: 3.0, n: 401 })?;
    for n in [2, 3, 4] {
        let mu = graph_mean_handle(&c, n)?;
        let r = mean_to_retraction(&mu, 5_000, 8)?;
        let check = r.verify(10_000, 9, 10_000, 1e-9)?;
        ok &= check.passed;
        let status = check.failure.as_deref().unwrap_or("ok");
        parts.push(format!("n={n}: {} pairs, L = {:.3}, worst ratio {:.3}, {status}", check.checked, check.lip_estimate, check.worst_ratio));
    }
    Ok((ok, parts.join("; ")))
}

fn obstruction() -> Outcome {
    let arc = curve(CurveSpec::CircularArc { r: 1.0, t_max: 1.5 * PI, n: 4001 })?;
    let long = mean_lip_lower_bound(&arc, &BasePoints::Explicit(vec![[0.0, 0.0]]), u64::MAX, 0)?;
    let long_ok = long.lower_bound >= 2.0 / PI && (long.lower_bound - 1.0 / SQRT_2).abs() <= 1e-6;

    let circles = curve(CurveSpec::CirclesArc { n_max: 50, per_circle: 64, per_gap: 16 })?;
    let centers = (1..=50).map(|n| circles_arc_circle(n).1).collect();
    let ca = mean_lip_lower_bound(&circles, &BasePoints::Explicit(centers), u64::MAX, 0)?;

    let seg = curve(CurveSpec::Segment { from: vec![0.0, 0.0], to: vec![1.0, 0.0], n: 200 })?;
    let far = vec![[0.5, 1.0], [0.5, -1.0], [-1.0, 0.0], [2.0, 0.5]];
    let s = mean_lip_lower_bound(&seg, &BasePoints::Explicit(far), u64::MAX, 0)?;
    Ok((
        long_ok && ca.lower_bound >= 5.0 && s.no_obstruction && s.lower_bound == 0.0,
        format!(
            "long arc {:.9} (pair {:?}); circles-arc {:.3}; segment {}",
            long.lower_bound,
            long.witness_pair.unwrap_or_default(),
            ca.lower_bound,
            if s.no_obstruction { "no obstruction" } else { "obstructed" }
        ),
    ))
}

fn snowflake() -> Outcome {
    let mut worst_len = 0.0f64;
    let mut worst_turn = 0.0f64;
    for depth in 0..=12u32 {
        let c = curve(CurveSpec::SnowflakeVertex { depth })?;
        worst_len = worst_len.max((curve_length(&c) - (3.0 + depth as f64 / 3.0)).abs());
        let mode = if c.len() <= EXHAUSTIVE_LIMIT { TurningMode::Exhaustive } else { TurningMode::Budget(50_000) };
        worst_turn = worst_turn.max(turning_constant(&c, mode, 10)?.value);
    }
    Ok((
        worst_len <= 1e-9 && worst_turn <= 10.0,
        format!("depths 0..=12: max length error {worst_len:.2e}, max turning {worst_turn:.4}"),
    ))
}

/// Minimax step between `a` and `b` over every simple chain.
fn minimax_by_chains(s: &MetricSpace, a: usize, b: usize) -> f64 {
    fn go(s: &MetricSpace, u: usize, b: usize, seen: &mut [bool], worst: f64, best: &mut f64) {
        if u == b {
            *best = best.min(worst);
            return;
        }
        for v in 0..s.len() {
            if !seen[v] && worst.max(s.d(u, v)) < *best {
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

fn minimax_chains() -> Outcome {
    let worst = (0..100u64)
        .into_par_iter()
        .map(|inst| {
            let mut rng = rng_for(909, inst);
            let n = rng.gen_range(2..=8);
            let dim = rng.gen_range(1..=3);
            let pts: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.gen_range(0.0..1.0)).collect()).collect();
            let s = MetricSpace::euclidean(pts).unwrap();
            let table = minimax_table(&s);
            let mut err = 0.0f64;
            let mut ratio = f64::INFINITY;
            for a in 0..n {
                for b in a + 1..n {
                    let m = minimax_by_chains(&s, a, b);
                    err = err.max((table[a * n + b] - m).abs());
                    ratio = ratio.min(m / s.d(a, b));
                }
            }
            let est = uniform_disconnectedness(&s).unwrap().value;
            err.max((est - ratio).abs())
        })
        .reduce(|| 0.0, f64::max);
    Ok((worst <= 1e-12, format!("100 instances, max deviation from chain enumeration {worst:.1e}")))
}

fn chain_connectivity() -> Outcome {
    let lines = generate(&CurveSpec::TwoLines { extent: 10.0, n: 201 })?;
    let two = chain_components(lines.space(), 0.5)?.len();
    let image = generate(&CurveSpec::PowerImage {
        alpha: 0.5,
        base: Box::new(CurveSpec::TwoLines { extent: 100.0, n: 8001 }),
    })?;
    let one = chain_components(image.space(), 0.2)?.len();
    Ok((two == 2 && one == 1, format!("two-lines at 0.5: {two} components; power image at 0.2: {one} component(s)")))
}

