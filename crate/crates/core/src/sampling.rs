//! Seeded samples of Diffie-Hellman triples `(g^a, g^b, g^{ab})` and the
//! plug-in estimate of `H(g^a, g^b | g^{ab})` built from them.

use std::collections::BTreeMap;
use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::entropy::{sum_m_ln_m, MultiplicityTable};
use crate::error::{Error, Result};
use crate::group::{mul_mod, CyclicGroup};

/// A distinct triple together with its repeat count `k_ijk`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SampledTriple {
    pub x: u64,
    pub y: u64,
    pub z: u64,
    /// Discrete log of `z`, i.e. `a * b mod N`.
    pub z_index: u64,
    pub count: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TripleSample {
    group: CyclicGroup,
    n: u64,
    seed: u64,
    triples: Vec<SampledTriple>,
}

impl TripleSample {
    /// Builds a sample from explicit exponent pairs `(a, b)` in `[1, N]^2`.
    pub fn from_exponent_pairs<I>(group: &CyclicGroup, pairs: I, seed: u64) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, u64)>,
    {
        let order = group.order();
        let mut raw = Vec::new();
        for (a, b) in pairs {
            if a == 0 || a > order || b == 0 || b > order {
                return Err(Error::input(format!("exponent pair ({a}, {b}) outside [1, {order}]")));
            }
            raw.push(triple_of(group, a, b));
        }
        if raw.is_empty() {
            return Err(Error::input("sample size must be at least 1"));
        }
        Ok(Self::collapse(group, raw, seed))
    }

    /// Sorts and run-length encodes raw triples.
    fn collapse(group: &CyclicGroup, mut raw: Vec<(u64, u64, u64, u64)>, seed: u64) -> Self {
        raw.sort_unstable();
        let n = raw.len() as u64;
        let mut triples: Vec<SampledTriple> = Vec::new();
        for (x, y, z, z_index) in raw {
            match triples.last_mut() {
                Some(t) if (t.x, t.y, t.z) == (x, y, z) => t.count += 1,
                _ => triples.push(SampledTriple {
                    x,
                    y,
                    z,
                    z_index,
                    count: 1,
                }),
            }
        }
        TripleSample {
            group: *group,
            n,
            seed,
            triples,
        }
    }

    pub fn group(&self) -> &CyclicGroup {
        &self.group
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Distinct triples in increasing `(x, y, z)` order.
    pub fn triples(&self) -> &[SampledTriple] {
        &self.triples
    }
}

fn triple_of(group: &CyclicGroup, a: u64, b: u64) -> (u64, u64, u64, u64) {
    let order = group.order();
    let c = mul_mod(a % order, b % order, order);
    (group.pow_generator(a), group.pow_generator(b), group.pow_generator(c), c)
}

/// Draws `n` exponent pairs uniformly with replacement from `[1, N]^2`.
///
/// Draws are split over `shards` ChaCha8 streams of the same seed (stream id
/// = shard index); shard `i` receives `n / shards` draws plus one if
/// `i < n % shards`. With one shard, the sample of size `k` is a prefix of the
/// sample of size `n > k` for the same seed. `threads` only controls how many
/// shards run at once.
#[derive(Clone, Copy, Debug)]
pub struct Sampler {
    pub shards: usize,
    pub threads: usize,
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler {
            shards: 1,
            threads: 1,
        }
    }
}

impl Sampler {
    pub fn sample(&self, group: &CyclicGroup, n: u64, seed: u64) -> Result<TripleSample> {
        if n == 0 {
            return Err(Error::input("sample size must be at least 1"));
        }
        if self.shards == 0 {
            return Err(Error::config("shard count must be at least 1"));
        }
        let shards = self.shards as u64;
        let quota = |i: u64| n / shards + u64::from(i < n % shards);
        let draw_shard = |i: u64| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i);
            let order = group.order();
            (0..quota(i))
                .map(|_| {
                    let a = rng.random_range(1..=order);
                    let b = rng.random_range(1..=order);
                    triple_of(group, a, b)
                })
                .collect::<Vec<_>>()
        };

        let threads = self.threads.clamp(1, self.shards);
        let mut raw = Vec::with_capacity(n as usize);
        if threads == 1 {
            for i in 0..shards {
                raw.extend(draw_shard(i));
            }
        } else {
            let per_worker = shards.div_ceil(threads as u64);
            let parts: Vec<Vec<_>> = thread::scope(|s| {
                let handles: Vec<_> = (0..threads as u64)
                    .map(|w| {
                        let draw_shard = &draw_shard;
                        s.spawn(move || {
                            let lo = (w * per_worker).min(shards);
                            let hi = ((w + 1) * per_worker).min(shards);
                            (lo..hi).flat_map(draw_shard).collect::<Vec<_>>()
                        })
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("sampling worker panicked")).collect()
            });
            for p in parts {
                raw.extend(p);
            }
        }
        Ok(TripleSample::collapse(group, raw, seed))
    }
}

pub fn sample_triples(group: &CyclicGroup, n: u64, seed: u64) -> Result<TripleSample> {
    Sampler::default().sample(group, n, seed)
}

/// Multiplicities of the sampled `z` values, keyed by discrete log.
pub fn z_multiplicities(sample: &TripleSample) -> MultiplicityTable {
    let mut counts: BTreeMap<u64, u64> = BTreeMap::new();
    for t in &sample.triples {
        *counts.entry(t.z_index).or_default() += t.count;
    }
    MultiplicityTable::new(sample.group.order(), counts).expect("sample triples are in range")
}

/// Plug-in entropy estimates from a triple sample.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SampleStatistic {
    /// `S_n = -sum (k_ijk / n) ln(k_ijk / m_k)`, the estimate of
    /// `H(g^a, g^b | g^{ab})`. Equals `sum (m_k / n) ln m_k` when no triple repeats.
    pub raw_entropy: f64,
    /// `T_n = S_n - ln n`.
    pub statistic_t: f64,
    pub n: u64,
}

pub fn sample_statistic(sample: &TripleSample) -> SampleStatistic {
    let z = z_multiplicities(sample);
    let n = sample.n as f64;
    let zs = sum_m_ln_m(z.iter().map(|(_, m)| m));
    let repeats = sum_m_ln_m(sample.triples.iter().map(|t| t.count));
    let raw = ((zs - repeats) / n).max(0.0);
    SampleStatistic {
        raw_entropy: raw,
        statistic_t: raw - n.ln(),
        n: sample.n,
    }
}
