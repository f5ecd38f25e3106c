//! Null distribution of the sample entropy under uniform `g^{ab}`, and the
//! permutation test built on it.
//!
//! Under the null hypothesis every group element occurs exactly `N` times
//! among the `N^2` triples, so the `z`-multiplicities of a size-`n` sample are
//! multivariate hypergeometric with `N` categories of `N` copies each.

use std::thread;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::function::factorial::ln_binomial;

use crate::entropy::{sum_m_ln_m, CompensatedSum};
use crate::error::{Error, Result};
use crate::group::CyclicGroup;
use crate::sampling::{sample_statistic, Sampler};

/// One draw from the hypergeometric distribution: successes in `draws` items
/// taken without replacement from `population` items of which `successes`
/// are marked.
///
/// Inverts the CDF by walking outward from the mode, alternating below and
/// above, with each probability obtained from its neighbour through the exact
/// pmf ratio. Only the starting mass at the mode uses log-factorials.
pub fn sample_hypergeometric<R: Rng + ?Sized>(
    rng: &mut R,
    population: u64,
    successes: u64,
    draws: u64,
) -> u64 {
    debug_assert!(successes <= population && draws <= population);
    let failures = population - successes;
    let lo = draws.saturating_sub(failures);
    let hi = successes.min(draws);
    if lo == hi {
        return lo;
    }

    let pmf_ln = |k: u64| {
        ln_binomial(successes, k) + ln_binomial(failures, draws - k) - ln_binomial(population, draws)
    };
    let (s, d, t) = (successes as f64, draws as f64, population as f64);
    // p(k + 1) / p(k)
    let up = |k: f64| (s - k) * (d - k) / ((k + 1.0) * (t - s - d + k + 1.0));
    // p(k - 1) / p(k)
    let down = |k: f64| k * (t - s - d + k) / ((s - k + 1.0) * (d - k + 1.0));

    let mode = ((((draws + 1) as u128 * (successes + 1) as u128) / (population + 2) as u128) as u64)
        .clamp(lo, hi);
    let p_mode = pmf_ln(mode).exp();

    let mut u: f64 = rng.random::<f64>() - p_mode;
    if u <= 0.0 {
        return mode;
    }
    let (mut below, mut above) = (mode, mode);
    let (mut p_below, mut p_above) = (p_mode, p_mode);
    loop {
        let mut moved = false;
        if below > lo {
            p_below *= down(below as f64);
            below -= 1;
            u -= p_below;
            if u <= 0.0 {
                return below;
            }
            moved = true;
        }
        if above < hi {
            p_above *= up(above as f64);
            above += 1;
            u -= p_above;
            if u <= 0.0 {
                return above;
            }
            moved = true;
        }
        if !moved {
            // leftover rounding mass
            return mode;
        }
    }
}

fn check_null_shape(order: u64, n: u64) -> Result<u64> {
    let population = order
        .checked_mul(order)
        .ok_or(Error::ResourceLimit {
            order,
            bound: u32::MAX as u64,
        })?;
    if order == 0 || n == 0 || n > population {
        return Err(Error::input(format!(
            "sample size {n} must lie in [1, N^2 = {population}]"
        )));
    }
    Ok(population)
}

/// Fills `out` with one multivariate hypergeometric draw `(M_1, .., M_N)` by
/// sequential conditional univariate draws.
fn draw_null_multiplicities<R: Rng + ?Sized>(order: u64, n: u64, rng: &mut R, out: &mut Vec<u64>) {
    out.clear();
    let mut remaining_population = order * order;
    let mut remaining = n;
    for _ in 0..order {
        let m = if remaining == 0 {
            0
        } else {
            sample_hypergeometric(rng, remaining_population, order, remaining)
        };
        out.push(m);
        remaining -= m;
        remaining_population -= order;
    }
    debug_assert_eq!(remaining, 0);
}

fn replicate_rng(seed: u64, replicate: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(replicate);
    rng
}

/// One draw of the null multiplicity vector for an order-`N` group and
/// sample size `n`.
pub fn sample_null_multiplicities(order: u64, n: u64, seed: u64) -> Result<Vec<u64>> {
    check_null_shape(order, n)?;
    let mut out = Vec::with_capacity(order as usize);
    draw_null_multiplicities(order, n, &mut replicate_rng(seed, 0), &mut out);
    Ok(out)
}

fn check_counts(multiplicities: &[u64], n: u64) -> Result<()> {
    let sum: u64 = multiplicities.iter().sum();
    if n == 0 || sum != n {
        return Err(Error::input(format!("multiplicities sum to {sum}, expected {n}")));
    }
    Ok(())
}

/// `sum (M_k / n) ln M_k`.
pub fn null_statistic(multiplicities: &[u64], n: u64) -> Result<f64> {
    check_counts(multiplicities, n)?;
    Ok(sum_m_ln_m(multiplicities.iter().copied()) / n as f64)
}

/// `sum (M_k / n) ln M_k - ln n`, the null counterpart of `T_n`.
pub fn shifted_null_statistic(multiplicities: &[u64], n: u64) -> Result<f64> {
    Ok(null_statistic(multiplicities, n)? - (n as f64).ln())
}

#[derive(Clone, Debug, PartialEq)]
pub struct NullDistribution {
    pub order: u64,
    pub n: u64,
    pub seed: u64,
    /// Raw replicate values, in replicate order.
    pub values: Vec<f64>,
}

impl NullDistribution {
    pub fn replicates(&self) -> usize {
        self.values.len()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().copied().collect::<CompensatedSum>().value() / self.values.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// The same distribution with every value shifted by `-ln n`.
    pub fn shifted(&self) -> NullDistribution {
        let shift = (self.n as f64).ln();
        NullDistribution {
            values: self.values.iter().map(|v| v - shift).collect(),
            ..self.clone()
        }
    }
}

/// Builds `replicates` null values; replicate `r` uses ChaCha8 stream `r` of
/// `seed`, so the result does not depend on `threads`.
pub fn build_null_distribution_threaded(
    order: u64,
    n: u64,
    replicates: usize,
    seed: u64,
    threads: usize,
) -> Result<NullDistribution> {
    check_null_shape(order, n)?;
    if replicates == 0 {
        return Err(Error::input("replicate count must be at least 1"));
    }
    let run = |range: std::ops::Range<usize>| {
        let mut buf = Vec::with_capacity(order as usize);
        range
            .map(|r| {
                draw_null_multiplicities(order, n, &mut replicate_rng(seed, r as u64), &mut buf);
                sum_m_ln_m(buf.iter().copied()) / n as f64
            })
            .collect::<Vec<f64>>()
    };
    let workers = threads.clamp(1, replicates);
    let values = if workers == 1 {
        run(0..replicates)
    } else {
        let chunk = replicates.div_ceil(workers);
        thread::scope(|s| {
            let handles: Vec<_> = (0..workers)
                .map(|w| {
                    let run = &run;
                    s.spawn(move || run((w * chunk).min(replicates)..((w + 1) * chunk).min(replicates)))
                })
                .collect();
            handles
                .into_iter()
                .flat_map(|h| h.join().expect("null worker panicked"))
                .collect()
        })
    };
    Ok(NullDistribution {
        order,
        n,
        seed,
        values,
    })
}

pub fn build_null_distribution(order: u64, n: u64, replicates: usize, seed: u64) -> Result<NullDistribution> {
    build_null_distribution_threaded(order, n, replicates, seed, 1)
}

/// Position of an observed value relative to a null distribution.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NullComparison {
    /// Fraction of replicates strictly below the observation.
    pub proportion_lower: f64,
    /// Fraction of replicates at or above the observation.
    pub p_value: f64,
    /// `|observed - mean|`.
    pub distance_to_center: f64,
    /// `distance_to_center / max_r |observed - value_r|`, or 0 when every
    /// replicate equals the observation.
    pub relative_distance: f64,
    pub outside_support: bool,
}

pub fn compare_to_null(observed: f64, null: &NullDistribution) -> NullComparison {
    let r = null.values.len() as f64;
    let below = null.values.iter().filter(|&&v| v < observed).count() as f64;
    let distance = (observed - null.mean()).abs();
    let farthest = null
        .values
        .iter()
        .map(|v| (observed - v).abs())
        .fold(0.0, f64::max);
    let relative = if farthest > 0.0 {
        (distance / farthest).min(1.0)
    } else {
        0.0
    };
    NullComparison {
        proportion_lower: below / r,
        p_value: (r - below) / r,
        distance_to_center: distance,
        relative_distance: relative,
        outside_support: observed > null.max() || observed < null.min(),
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DhiTestReport {
    pub group: CyclicGroup,
    pub n: u64,
    pub replicates: usize,
    /// Observed `S_n`.
    pub raw_entropy: f64,
    /// Observed `T_n = S_n - ln n`.
    pub statistic_t: f64,
    pub proportion_lower: f64,
    pub p_value: f64,
    pub distance_to_center: f64,
    pub relative_distance: f64,
    pub outside_support: bool,
    /// `observed - mean(null)`, signed.
    pub excess_over_center: f64,
    pub sample_seed: u64,
    pub null_seed: u64,
}

/// Permutation test settings shared by the CLI and survey driver.
#[derive(Clone, Copy, Debug)]
pub struct DhiTest {
    pub replicates: usize,
    pub threads: usize,
    pub sampler: Sampler,
}

pub const DEFAULT_REPLICATES: usize = 1000;

impl Default for DhiTest {
    fn default() -> Self {
        DhiTest {
            replicates: DEFAULT_REPLICATES,
            threads: 1,
            sampler: Sampler::default(),
        }
    }
}

impl DhiTest {
    pub fn run(&self, group: &CyclicGroup, n: u64, sample_seed: u64, null_seed: u64) -> Result<DhiTestReport> {
        let order = group.order();
        check_null_shape(order, n)?;
        let observed = sample_statistic(&self.sampler.sample(group, n, sample_seed)?);
        let null = build_null_distribution_threaded(order, n, self.replicates, null_seed, self.threads)?;
        let cmp = compare_to_null(observed.raw_entropy, &null);
        Ok(DhiTestReport {
            group: *group,
            n,
            replicates: self.replicates,
            raw_entropy: observed.raw_entropy,
            statistic_t: observed.statistic_t,
            proportion_lower: cmp.proportion_lower,
            p_value: cmp.p_value,
            distance_to_center: cmp.distance_to_center,
            relative_distance: cmp.relative_distance,
            outside_support: cmp.outside_support,
            excess_over_center: observed.raw_entropy - null.mean(),
            sample_seed,
            null_seed,
        })
    }
}

pub fn dhi_permutation_test(
    group: &CyclicGroup,
    n: u64,
    replicates: usize,
    sample_seed: u64,
    null_seed: u64,
) -> Result<DhiTestReport> {
    DhiTest {
        replicates,
        ..Default::default()
    }
    .run(group, n, sample_seed, null_seed)
}
