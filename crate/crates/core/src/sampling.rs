//! Deterministic randomness and order-independent reductions.
//!
//! Every random choice flows from a `u64` seed through ChaCha8 (`rand_chacha`),
//! one stream per purpose. Sample `k` of an estimator is drawn from its own
//! generator keyed by `(seed, k)`, so the first `B` samples of a run with
//! budget `B' > B` are exactly the samples of a run with budget `B`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Generator for stream `stream` of `seed`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Generator for sample number `k`. Streams below 2^32 are reserved for
/// whole-run generators.
pub fn sample_rng(seed: u64, k: u64) -> ChaCha8Rng {
    rng_for(seed, (1u64 << 32) + k)
}

/// Log-uniform integer offset in `1..=max`.
pub fn log_uniform_offset<R: Rng>(rng: &mut R, max: usize) -> usize {
    if max <= 1 {
        return 1;
    }
    let u: f64 = rng.gen();
    let k = ((max as f64).ln() * u).exp().floor() as usize;
    k.clamp(1, max)
}

/// Best value with the lowest index among ties. `NaN` values never win.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Best<T> {
    pub value: f64,
    pub index: u64,
    pub item: T,
}

fn better<T>(a: &Option<Best<T>>, b: &Option<Best<T>>, maximize: bool) -> bool {
    match (a, b) {
        (Some(_), None) => true,
        (None, _) => false,
        (Some(x), Some(y)) => {
            let (lhs, rhs) = if maximize { (x.value, y.value) } else { (y.value, x.value) };
            lhs > rhs || (lhs == rhs && x.index < y.index)
        }
    }
}

fn pick<T>(a: Option<Best<T>>, b: Option<Best<T>>, maximize: bool) -> Option<Best<T>> {
    if better(&a, &b, maximize) {
        a
    } else if b.is_some() {
        b
    } else {
        a
    }
}

/// Parallel arg-max over `0..count`; `f` returns `None` for inadmissible samples.
/// The result does not depend on the thread schedule.
pub fn par_argmax<T, F>(count: u64, f: F) -> Option<Best<T>>
where
    T: Send,
    F: Fn(u64) -> Option<(f64, T)> + Sync,
{
    reduce(count, f, true)
}

pub fn par_argmin<T, F>(count: u64, f: F) -> Option<Best<T>>
where
    T: Send,
    F: Fn(u64) -> Option<(f64, T)> + Sync,
{
    reduce(count, f, false)
}

fn reduce<T, F>(count: u64, f: F, maximize: bool) -> Option<Best<T>>
where
    T: Send,
    F: Fn(u64) -> Option<(f64, T)> + Sync,
{
    (0..count)
        .into_par_iter()
        .map(|k| {
            f(k).filter(|(v, _)| !v.is_nan()).map(|(value, item)| Best {
                value,
                index: k,
                item,
            })
        })
        .reduce(|| None, |a, b| pick(a, b, maximize))
}
