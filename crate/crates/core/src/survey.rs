//! Survey driver: prime classification, cross-group runs and the `Z_1193^*`
//! convergence table.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use serde::{Deserialize, Serialize};

use crate::entropy::{ExactEngine, DEFAULT_EXACT_ORDER_BOUND};
use crate::error::{Error, Result};
use crate::group::{is_prime, make_full_group, make_prime_subgroup, CyclicGroup, GroupFamily, PrimeClass, SafetyClass};
use crate::permutation::{DhiTest, DhiTestReport};

/// Default sample-size schedule for the `Z_1193^*` convergence table.
pub const TABLE1_SCHEDULE: [u64; 41] = [
    59, 118, 354, 885, 1829, 3304, 5428, 8319, 12095, 16874, 22774, 29913, 38409, 48380, 59944, 73219, 88323,
    105374, 124490, 145789, 169389, 195408, 223964, 255175, 289159, 326034, 365918, 408929, 455185, 504804,
    557904, 614603, 675019, 739270, 807474, 879749, 956213, 1036984, 1122180, 1211919, 1306319,
];

/// Default modulus of the convergence table.
pub const TABLE1_PRIME: u64 = 1193;

/// Upper end of the supported prime range.
pub const MAX_RANGE: u64 = 1 << 63;

/// SplitMix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Deterministic child seed of `base` for the given path of labels.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix64(base), |acc, &p| mix64(acc ^ mix64(p)))
}

/// All primes in `[lo, hi]`, ascending, tagged safe or other.
pub fn classify_primes(lo: u64, hi: u64) -> Result<Vec<PrimeClass>> {
    if lo < 2 || hi > MAX_RANGE {
        return Err(Error::config(format!("range [{lo}, {hi}] must lie within [2, 2^63]")));
    }
    if lo > hi {
        return Ok(Vec::new());
    }
    (lo..=hi)
        .filter(|&p| is_prime(p))
        .map(PrimeClass::of)
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RunMode {
    Exact,
    Sampled,
}

impl RunMode {
    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Exact => "exact",
            RunMode::Sampled => "sampled",
        }
    }
}

/// One tested `(prime, family)` combination.
///
/// For exact runs `statistic` is `T_N`; for sampled runs it is the raw sample
/// entropy `S_n`, with the permutation-test columns filled in.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SurveyRecord {
    pub prime: u64,
    pub class: SafetyClass,
    pub family: GroupFamily,
    pub order: u64,
    pub mode: RunMode,
    pub n: u64,
    pub replicates: Option<usize>,
    pub statistic: f64,
    pub p_value: Option<f64>,
    pub proportion_lower: Option<f64>,
    pub distance_to_center: Option<f64>,
    pub relative_distance: Option<f64>,
    pub sample_seed: Option<u64>,
    pub null_seed: Option<u64>,
}

impl SurveyRecord {
    pub fn exact(group: &CyclicGroup, engine: &ExactEngine) -> Result<Self> {
        let class = PrimeClass::of(group.modulus())?.class;
        let result = engine.dhi_statistic(group)?;
        Ok(SurveyRecord {
            prime: group.modulus(),
            class,
            family: group.family(),
            order: group.order(),
            mode: RunMode::Exact,
            n: 0,
            replicates: None,
            statistic: result.statistic_t,
            p_value: None,
            proportion_lower: None,
            distance_to_center: None,
            relative_distance: None,
            sample_seed: None,
            null_seed: None,
        })
    }

    pub fn sampled(report: &DhiTestReport) -> Result<Self> {
        let group = report.group;
        Ok(SurveyRecord {
            prime: group.modulus(),
            class: PrimeClass::of(group.modulus())?.class,
            family: group.family(),
            order: group.order(),
            mode: RunMode::Sampled,
            n: report.n,
            replicates: Some(report.replicates),
            statistic: report.raw_entropy,
            p_value: Some(report.p_value),
            proportion_lower: Some(report.proportion_lower),
            distance_to_center: Some(report.distance_to_center),
            relative_distance: Some(report.relative_distance),
            sample_seed: Some(report.sample_seed),
            null_seed: Some(report.null_seed),
        })
    }

    fn sort_key(&self) -> (u64, GroupFamily, u64) {
        (self.prime, self.family, self.n)
    }
}

/// Sorts records into report order: prime, family, sample size.
pub fn sort_records(records: &mut [SurveyRecord]) {
    records.sort_by_key(SurveyRecord::sort_key);
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SurveyMode {
    Exact,
    /// One shared sample size and replicate count for every group, so that
    /// the statistics are comparable.
    Sampled { n: u64, replicates: usize },
}

#[derive(Clone, Debug)]
pub struct SurveyConfig {
    pub mode: SurveyMode,
    pub base_seed: u64,
    pub families: Vec<GroupFamily>,
    /// Work items run concurrently; each item itself is single-threaded.
    pub threads: usize,
    pub exact_bound: u64,
}

impl Default for SurveyConfig {
    fn default() -> Self {
        SurveyConfig {
            mode: SurveyMode::Exact,
            base_seed: 0,
            families: vec![GroupFamily::FullGroup],
            threads: 1,
            exact_bound: DEFAULT_EXACT_ORDER_BOUND,
        }
    }
}

/// `(sample_seed, null_seed)` for one group in a survey.
pub fn survey_seeds(base: u64, prime: u64, family: GroupFamily) -> (u64, u64) {
    let f = family as u64;
    (derive_seed(base, &[prime, f, 0]), derive_seed(base, &[prime, f, 1]))
}

fn build_group(prime: u64, family: GroupFamily) -> Result<CyclicGroup> {
    match family {
        GroupFamily::FullGroup => make_full_group(prime),
        GroupFamily::PrimeSubgroup => make_prime_subgroup(prime),
    }
}

/// Runs every requested family on every prime in `[lo, hi]`. Subgroup runs
/// are only emitted for safe primes. Output is sorted and independent of the
/// worker count.
pub fn run_survey(lo: u64, hi: u64, config: &SurveyConfig) -> Result<Vec<SurveyRecord>> {
    let primes = classify_primes(lo, hi)?;
    let mut items: Vec<(u64, GroupFamily)> = Vec::new();
    for pc in primes.iter().filter(|pc| pc.prime >= 3) {
        for &family in &config.families {
            if family == GroupFamily::PrimeSubgroup && pc.class != SafetyClass::SafePrime {
                continue;
            }
            items.push((pc.prime, family));
        }
    }
    items.sort();
    items.dedup();

    let groups: Vec<CyclicGroup> = items
        .iter()
        .map(|&(p, f)| build_group(p, f))
        .collect::<Result<_>>()?;

    let engine = ExactEngine {
        threads: 1,
        order_bound: config.exact_bound,
    };
    if let SurveyMode::Sampled { n, replicates } = config.mode {
        if n == 0 || replicates == 0 {
            return Err(Error::config("sampled surveys need n >= 1 and replicates >= 1"));
        }
        if let Some(smallest) = groups.iter().map(|g| g.order()).min() {
            let cap = smallest.saturating_mul(smallest);
            if n > cap {
                return Err(Error::config(format!(
                    "sample size {n} exceeds N^2 = {cap} of the smallest group in range"
                )));
            }
        }
    } else if let Some(g) = groups.iter().find(|g| g.order() > config.exact_bound) {
        return Err(Error::config(format!(
            "order {} of {g} exceeds the exact bound {}",
            g.order(),
            config.exact_bound
        )));
    }

    let run_one = |group: &CyclicGroup| -> Result<SurveyRecord> {
        match config.mode {
            SurveyMode::Exact => SurveyRecord::exact(group, &engine),
            SurveyMode::Sampled { n, replicates } => {
                let (sample_seed, null_seed) = survey_seeds(config.base_seed, group.modulus(), group.family());
                let test = DhiTest {
                    replicates,
                    ..Default::default()
                };
                SurveyRecord::sampled(&test.run(group, n, sample_seed, null_seed)?)
            }
        }
    };

    let workers = config.threads.clamp(1, groups.len().max(1));
    let mut records: Vec<SurveyRecord> = if workers == 1 {
        groups.iter().map(run_one).collect::<Result<_>>()?
    } else {
        let next = AtomicUsize::new(0);
        let slots: Mutex<Vec<Option<Result<SurveyRecord>>>> = Mutex::new((0..groups.len()).map(|_| None).collect());
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    if i >= groups.len() {
                        break;
                    }
                    let out = run_one(&groups[i]);
                    slots.lock().expect("result slots poisoned")[i] = Some(out);
                });
            }
        });
        slots
            .into_inner()
            .expect("result slots poisoned")
            .into_iter()
            .map(|r| r.expect("every work item runs"))
            .collect::<Result<_>>()?
    };
    sort_records(&mut records);
    Ok(records)
}

/// One row of the convergence table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Table1Record {
    pub n: u64,
    pub sample_entropy: f64,
    pub proportion_lower: f64,
    pub distance_to_center: f64,
    pub relative_distance: f64,
}

impl From<&DhiTestReport> for Table1Record {
    fn from(r: &DhiTestReport) -> Self {
        Table1Record {
            n: r.n,
            sample_entropy: r.raw_entropy,
            proportion_lower: r.proportion_lower,
            distance_to_center: r.distance_to_center,
            relative_distance: r.relative_distance,
        }
    }
}

/// Runs the permutation test on `Z_p^*` for each sample size in `schedule`.
///
/// Every row uses the same sample seed, so with a single sampling shard each
/// row's sample extends the previous one. Every row also uses the same null
/// seed.
pub fn reproduce_table1(
    p: u64,
    schedule: &[u64],
    test: &DhiTest,
    sample_seed: u64,
    null_seed: u64,
) -> Result<Vec<Table1Record>> {
    if schedule.is_empty() {
        return Err(Error::config("schedule must not be empty"));
    }
    if schedule.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::config("schedule must be strictly increasing"));
    }
    let group = make_full_group(p)?;
    let cap = group.order().saturating_mul(group.order());
    if let Some(&bad) = schedule.iter().find(|&&n| n > cap || n == 0) {
        return Err(Error::config(format!("sample size {bad} outside [1, N^2 = {cap}]")));
    }
    schedule
        .iter()
        .map(|&n| test.run(&group, n, sample_seed, null_seed).map(|r| Table1Record::from(&r)))
        .collect()
}
