//! Joint and conditional entropy of discrete distributions, and the exact
//! Diffie-Hellman multiplicity engine.
//!
//! All logarithms are natural. Zero-probability cells contribute nothing.
//!
//! The exact engine counts `m_c = #{(a, b) in [1, N]^2 : a*b = c (mod N)}` in
//! exponent space. Because `g` generates the group, `g^{ab}` takes the value
//! `g^c` exactly `m_c` times, so the exponent-space table is the element table
//! up to relabelling, and every entropy value here is a function of `N` alone.

use std::collections::BTreeMap;
use std::thread;

use crate::error::{Error, Result};
use crate::group::CyclicGroup;

/// Default ceiling on `N` for the `O(N^2)` exact engine.
pub const DEFAULT_EXACT_ORDER_BOUND: u64 = 1 << 20;

const PMF_SUM_TOLERANCE: f64 = 1e-12;

/// Tolerance under which the independence gap counts as zero.
pub const INDEPENDENCE_TOLERANCE: f64 = 1e-12;

/// Neumaier-compensated running sum.
#[derive(Clone, Copy, Debug, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    carry: f64,
}

impl CompensatedSum {
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    pub(crate) fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

impl FromIterator<f64> for CompensatedSum {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = CompensatedSum::default();
        for x in iter {
            acc.add(x);
        }
        acc
    }
}

/// `sum m * ln m` over a multiset of counts.
///
/// Counts are first grouped by value so the result is independent of input
/// order and each distinct `ln m` is evaluated once.
pub(crate) fn sum_m_ln_m<I: IntoIterator<Item = u64>>(counts: I) -> f64 {
    let mut by_value: BTreeMap<u64, u64> = BTreeMap::new();
    for m in counts {
        if m > 1 {
            *by_value.entry(m).or_default() += 1;
        }
    }
    by_value
        .into_iter()
        .map(|(m, freq)| (m as f64 * freq as f64) * (m as f64).ln())
        .collect::<CompensatedSum>()
        .value()
}

/// Joint pmf of three discrete variables on an `nx * ny * nz` grid,
/// stored row-major as `p[(i * ny + j) * nz + k]`.
#[derive(Clone, Debug, PartialEq)]
pub struct JointPmf3 {
    dims: (usize, usize, usize),
    probs: Vec<f64>,
}

impl JointPmf3 {
    pub fn new(dims: (usize, usize, usize), probs: Vec<f64>) -> Result<Self> {
        let (nx, ny, nz) = dims;
        if nx == 0 || ny == 0 || nz == 0 {
            return Err(Error::InvalidDistribution("empty support".into()));
        }
        if probs.len() != nx * ny * nz {
            return Err(Error::InvalidDistribution(format!(
                "expected {} cells, got {}",
                nx * ny * nz,
                probs.len()
            )));
        }
        if let Some(bad) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidDistribution(format!("bad probability {bad}")));
        }
        let total = probs.iter().copied().collect::<CompensatedSum>().value();
        if (total - 1.0).abs() > PMF_SUM_TOLERANCE {
            return Err(Error::InvalidDistribution(format!("probabilities sum to {total}")));
        }
        Ok(JointPmf3 { dims, probs })
    }

    /// Builds `p(x, y, z) = p(x, y) * p(z)`.
    pub fn independent(pxy: &[f64], ny: usize, pz: &[f64]) -> Result<Self> {
        if ny == 0 || !pxy.len().is_multiple_of(ny) {
            return Err(Error::InvalidDistribution("xy table is not rectangular".into()));
        }
        let probs = pxy
            .iter()
            .flat_map(|&a| pz.iter().map(move |&b| a * b))
            .collect();
        JointPmf3::new((pxy.len() / ny, ny, pz.len()), probs)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        let (_, ny, nz) = self.dims;
        self.probs[(i * ny + j) * nz + k]
    }

    /// `p(x_i, y_j)`, indexed `i * ny + j`.
    pub fn marginal_xy(&self) -> Vec<f64> {
        let nz = self.dims.2;
        self.probs
            .chunks(nz)
            .map(|cell| cell.iter().copied().collect::<CompensatedSum>().value())
            .collect()
    }

    pub fn marginal_z(&self) -> Vec<f64> {
        let nz = self.dims.2;
        let mut acc = vec![CompensatedSum::default(); nz];
        for cell in self.probs.chunks(nz) {
            for (a, &p) in acc.iter_mut().zip(cell) {
                a.add(p);
            }
        }
        acc.iter().map(CompensatedSum::value).collect()
    }
}

/// `H(X, Y) = -sum p(x, y, z) ln p(x, y)`.
pub fn joint_entropy(pmf: &JointPmf3) -> f64 {
    let nz = pmf.dims.2;
    let pxy = pmf.marginal_xy();
    let h = pmf
        .probs
        .chunks(nz)
        .zip(&pxy)
        .flat_map(|(cell, &m)| cell.iter().filter(|&&p| p > 0.0).map(move |&p| -p * m.ln()))
        .collect::<CompensatedSum>()
        .value();
    h.max(0.0)
}

/// `H(X, Y | Z) = -sum p(x, y, z) ln p(x, y | z)`. Every `p(z)` must be positive.
pub fn conditional_entropy(pmf: &JointPmf3) -> Result<f64> {
    let nz = pmf.dims.2;
    let pz = pmf.marginal_z();
    if let Some(k) = pz.iter().position(|&p| p <= 0.0) {
        return Err(Error::InvalidDistribution(format!("marginal p(z_{k}) is zero")));
    }
    let h = pmf
        .probs
        .chunks(nz)
        .flat_map(|cell| {
            cell.iter()
                .zip(&pz)
                .filter(|(&p, _)| p > 0.0)
                .map(|(&p, &z)| -p * (p / z).ln())
        })
        .collect::<CompensatedSum>()
        .value();
    Ok(h.max(0.0))
}

/// Multiplicities `m_k` of categories `k in [0, N)`. Zero counts are not stored.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiplicityTable {
    order: u64,
    total: u64,
    counts: BTreeMap<u64, u64>,
}

impl MultiplicityTable {
    pub fn new(order: u64, counts: BTreeMap<u64, u64>) -> Result<Self> {
        if let Some((&k, _)) = counts.iter().find(|(&k, _)| k >= order) {
            return Err(Error::input(format!("category {k} outside [0, {order})")));
        }
        let counts: BTreeMap<u64, u64> = counts.into_iter().filter(|&(_, m)| m > 0).collect();
        let total = counts.values().sum();
        if total == 0 {
            return Err(Error::input("multiplicity table is empty"));
        }
        Ok(MultiplicityTable { order, total, counts })
    }

    fn from_dense(dense: &[u64]) -> Self {
        let counts: BTreeMap<u64, u64> = dense
            .iter()
            .enumerate()
            .filter(|(_, &m)| m > 0)
            .map(|(k, &m)| (k as u64, m))
            .collect();
        MultiplicityTable {
            order: dense.len() as u64,
            total: counts.values().sum(),
            counts,
        }
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn get(&self, k: u64) -> u64 {
        self.counts.get(&k).copied().unwrap_or(0)
    }

    /// Nonzero `(k, m_k)` pairs in increasing `k`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&k, &m)| (k, m))
    }

    /// `sum (m_k / total) ln m_k`.
    pub fn mean_log_multiplicity(&self) -> f64 {
        sum_m_ln_m(self.counts.values().copied()) / self.total as f64
    }
}

/// Result of evaluating the exact DHI statistic over all `N^2` triples.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactTestResult {
    pub group: CyclicGroup,
    /// `H(g^a, g^b | g^{ab})`.
    pub conditional_entropy: f64,
    /// `T_N = H(g^a, g^b | g^{ab}) - ln N`.
    pub statistic_t: f64,
    /// `2 ln N - H(g^a, g^b | g^{ab})`.
    pub independence_gap: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Independence {
    pub gap: f64,
    pub independent: bool,
}

/// Exhaustive `O(N^2)` multiplicity engine.
///
/// The `a`-range is split into `threads` contiguous blocks, each counted into
/// its own array and merged in block order, so the table does not depend on
/// the thread count.
#[derive(Clone, Copy, Debug)]
pub struct ExactEngine {
    pub threads: usize,
    pub order_bound: u64,
}

impl Default for ExactEngine {
    fn default() -> Self {
        ExactEngine {
            threads: 1,
            order_bound: DEFAULT_EXACT_ORDER_BOUND,
        }
    }
}

impl ExactEngine {
    pub fn with_threads(threads: usize) -> Self {
        ExactEngine {
            threads,
            ..Default::default()
        }
    }

    fn check_bound(&self, order: u64) -> Result<()> {
        if order > self.order_bound {
            return Err(Error::ResourceLimit {
                order,
                bound: self.order_bound,
            });
        }
        Ok(())
    }

    /// Counts `a * b mod n` over `a in block`, `b in [1, n]`.
    fn count_block(n: u64, block: std::ops::Range<u64>) -> Vec<u64> {
        let size = n as usize;
        let mut counts = vec![0u64; size];
        for a in block {
            let step = (a % n) as usize;
            let mut r = 0usize;
            for _ in 0..size {
                r += step;
                if r >= size {
                    r -= size;
                }
                counts[r] += 1;
            }
        }
        counts
    }

    /// Dense `m_c` for `c in [0, n)`.
    pub fn dense_multiplicities(&self, n: u64) -> Result<Vec<u64>> {
        if n == 0 {
            return Err(Error::input("group order must be positive"));
        }
        self.check_bound(n)?;
        let workers = (self.threads.max(1) as u64).min(n);
        if workers == 1 {
            return Ok(Self::count_block(n, 1..n + 1));
        }
        let chunk = n.div_ceil(workers);
        let blocks: Vec<_> = (0..workers)
            .map(|w| (1 + w * chunk).min(n + 1)..(1 + (w + 1) * chunk).min(n + 1))
            .collect();
        let partials: Vec<Vec<u64>> = thread::scope(|s| {
            let handles: Vec<_> = blocks
                .into_iter()
                .map(|b| s.spawn(move || Self::count_block(n, b)))
                .collect();
            handles.into_iter().map(|h| h.join().expect("counting worker panicked")).collect()
        });
        let mut merged = vec![0u64; n as usize];
        for part in &partials {
            for (m, c) in merged.iter_mut().zip(part) {
                *m += c;
            }
        }
        Ok(merged)
    }

    pub fn multiplicities(&self, group: &CyclicGroup) -> Result<MultiplicityTable> {
        Ok(MultiplicityTable::from_dense(&self.dense_multiplicities(group.order())?))
    }

    pub fn conditional_entropy(&self, group: &CyclicGroup) -> Result<f64> {
        Ok(self.multiplicities(group)?.mean_log_multiplicity())
    }

    pub fn dhi_statistic(&self, group: &CyclicGroup) -> Result<ExactTestResult> {
        let h = self.conditional_entropy(group)?;
        let ln_n = (group.order() as f64).ln();
        Ok(ExactTestResult {
            group: *group,
            conditional_entropy: h,
            statistic_t: h - ln_n,
            independence_gap: 2.0 * ln_n - h,
        })
    }

    pub fn independence_test(&self, group: &CyclicGroup) -> Result<Independence> {
        let gap = self.dhi_statistic(group)?.independence_gap;
        Ok(Independence {
            gap,
            independent: gap <= INDEPENDENCE_TOLERANCE,
        })
    }
}

pub fn exact_multiplicities(group: &CyclicGroup) -> Result<MultiplicityTable> {
    ExactEngine::default().multiplicities(group)
}

pub fn exact_conditional_entropy(group: &CyclicGroup) -> Result<f64> {
    ExactEngine::default().conditional_entropy(group)
}

pub fn exact_dhi_statistic(group: &CyclicGroup) -> Result<ExactTestResult> {
    ExactEngine::default().dhi_statistic(group)
}

pub fn independence_test(group: &CyclicGroup) -> Result<Independence> {
    ExactEngine::default().independence_test(group)
}

/// Closed form of `T_q` for a group of prime order `q`, where `m_0 = 2q - 1`
/// and every other residue has multiplicity `q - 1`.
pub fn analytic_subgroup_statistic(q: u64) -> Result<f64> {
    if !crate::group::is_prime(q) {
        return Err(Error::input(format!("{q} is not prime")));
    }
    let qf = q as f64;
    let q2 = qf * qf;
    let zero_class = (2.0 * qf - 1.0) / q2 * (2.0 * qf - 1.0).ln();
    let other = (qf - 1.0) * (qf - 1.0) / q2 * (qf - 1.0).ln();
    Ok(zero_class + other - qf.ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::group::{make_full_group, make_prime_subgroup, CyclicGroup, GroupFamily};
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn joint_entropy_examples() {
        let uniform = JointPmf3::new((2, 2, 1), vec![0.25; 4]).unwrap();
        assert!(close(joint_entropy(&uniform), 4f64.ln(), 1e-15));

        let mut point = vec![0.0; 8];
        point[5] = 1.0;
        let point = JointPmf3::new((2, 2, 2), point).unwrap();
        assert_eq!(joint_entropy(&point), 0.0);

        let skew = JointPmf3::new((1, 3, 1), vec![0.5, 0.25, 0.25]).unwrap();
        assert!(close(joint_entropy(&skew), 1.0397207708399179, 1e-12));
    }

    #[test]
    fn conditional_entropy_examples() {
        let constant_z = JointPmf3::new((2, 2, 1), vec![0.25; 4]).unwrap();
        assert!(close(conditional_entropy(&constant_z).unwrap(), 4f64.ln(), 1e-15));

        let indep = JointPmf3::independent(&[0.1, 0.2, 0.3, 0.4], 2, &[0.25, 0.75]).unwrap();
        let h = joint_entropy(&indep);
        assert!(close(conditional_entropy(&indep).unwrap(), h, 1e-12));

        // z identifies (x, y)
        let mut probs = vec![0.0; 16];
        for cell in 0..4 {
            probs[cell * 4 + cell] = 0.25;
        }
        let identify = JointPmf3::new((2, 2, 4), probs).unwrap();
        assert!(close(conditional_entropy(&identify).unwrap(), 0.0, 1e-15));
    }

    #[test]
    fn conditional_entropy_rejects_empty_z() {
        let pmf = JointPmf3::new((1, 2, 2), vec![0.5, 0.0, 0.5, 0.0]).unwrap();
        assert!(matches!(conditional_entropy(&pmf), Err(Error::InvalidDistribution(_))));
    }

    #[test]
    fn pmf_validation() {
        assert!(JointPmf3::new((1, 1, 2), vec![0.5, 0.4]).is_err());
        assert!(JointPmf3::new((1, 1, 2), vec![1.5, -0.5]).is_err());
        assert!(JointPmf3::new((1, 1, 2), vec![1.0]).is_err());
        assert!(JointPmf3::new((0, 1, 1), vec![]).is_err());
        assert!(JointPmf3::new((1, 1, 2), vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn multiplicity_examples() {
        let one = ExactEngine::default().dense_multiplicities(1).unwrap();
        assert_eq!(one, vec![1]);
        let five = ExactEngine::default().dense_multiplicities(5).unwrap();
        assert_eq!(five, vec![9, 4, 4, 4, 4]);
        let four = ExactEngine::default().dense_multiplicities(4).unwrap();
        assert_eq!(four, vec![8, 2, 4, 2]);
    }

    #[test]
    fn exact_bound_is_enforced() {
        let engine = ExactEngine {
            threads: 1,
            order_bound: 100,
        };
        let g = make_full_group(1193).unwrap();
        assert!(matches!(
            engine.multiplicities(&g),
            Err(Error::ResourceLimit { order: 1192, bound: 100 })
        ));
    }

    #[test]
    fn subgroup_of_eleven() {
        let g = make_prime_subgroup(11).unwrap();
        let r = exact_dhi_statistic(&g).unwrap();
        let h = (9.0 / 25.0) * 9f64.ln() + (16.0 / 25.0) * 4f64.ln();
        assert!(close(r.conditional_entropy, h, 1e-14));
        assert!(close(r.statistic_t, 0.06879132652366882, 1e-12));
        let ind = independence_test(&g).unwrap();
        assert!(close(ind.gap, 2.0 * 5f64.ln() - h, 1e-12));
        assert!(!ind.independent);
    }

    #[test]
    fn trivial_group_is_uniform() {
        let table = MultiplicityTable::from_dense(&ExactEngine::default().dense_multiplicities(1).unwrap());
        assert_eq!(table.total(), 1);
        assert_eq!(table.mean_log_multiplicity(), 0.0);
    }

    #[test]
    fn uniform_multiplicities_give_ln_n() {
        let n = 7u64;
        let counts = (0..n).map(|k| (k, n)).collect();
        let t = MultiplicityTable::new(n, counts).unwrap();
        assert!(close(t.mean_log_multiplicity(), (n as f64).ln(), 1e-15));
    }

    #[test]
    fn analytic_examples() {
        assert!(close(analytic_subgroup_statistic(5).unwrap(), 0.06879132652366882, 1e-12));
        assert!(close(analytic_subgroup_statistic(2).unwrap(), 0.130812035941137, 1e-12));
        for q in [1009u64, 4733, 104_729] {
            let v = analytic_subgroup_statistic(q).unwrap();
            assert!(v > 0.0 && v < 10.0 * (q as f64).ln() / q as f64, "q = {q}: {v}");
        }
        assert!(analytic_subgroup_statistic(4).is_err());
    }

    #[test]
    fn thread_count_does_not_change_table() {
        let base = ExactEngine::default().dense_multiplicities(997).unwrap();
        for threads in [2, 3, 7, 16] {
            assert_eq!(ExactEngine::with_threads(threads).dense_multiplicities(997).unwrap(), base);
        }
        // more threads than rows
        assert_eq!(
            ExactEngine::with_threads(8).dense_multiplicities(3).unwrap(),
            ExactEngine::default().dense_multiplicities(3).unwrap()
        );
    }

    #[test]
    fn exponent_space_matches_element_space() {
        for p in (3..=201u64).filter(|&p| crate::group::is_prime(p)) {
            let mut groups = vec![make_full_group(p).unwrap()];
            if crate::group::is_safe_prime(p) {
                groups.push(make_prime_subgroup(p).unwrap());
            }
            for g in groups {
                let mut by_element: BTreeMap<u64, u64> = BTreeMap::new();
                for a in 1..=g.order() {
                    let ga = g.element_of(a).unwrap();
                    for b in 1..=g.order() {
                        *by_element.entry(crate::group::pow_mod(ga, b, p)).or_default() += 1;
                    }
                }
                let direct = sum_m_ln_m(by_element.values().copied()) / (g.order() * g.order()) as f64;
                let table = exact_multiplicities(&g).unwrap();
                assert_eq!(table.total(), g.order() * g.order());
                assert!(close(exact_conditional_entropy(&g).unwrap(), direct, 1e-12), "{g}");
            }
        }
    }

    #[test]
    fn statistic_is_generator_independent() {
        for p in (3..=200u64).filter(|&p| crate::group::is_prime(p) && p > 3) {
            let g = make_full_group(p).unwrap();
            let second = (g.generator() + 1..p)
                .find(|&h| CyclicGroup::new(p, p - 1, h, GroupFamily::FullGroup).is_ok())
                .unwrap();
            let other = CyclicGroup::new(p, p - 1, second, GroupFamily::FullGroup).unwrap();
            let mut by_element: BTreeMap<u64, u64> = BTreeMap::new();
            for a in 1..p {
                let ga = other.element_of(a).unwrap();
                for b in 1..p {
                    *by_element.entry(crate::group::pow_mod(ga, b, p)).or_default() += 1;
                }
            }
            let n = (p - 1) as f64;
            let direct = sum_m_ln_m(by_element.values().copied()) / (n * n) - n.ln();
            let t = exact_dhi_statistic(&g).unwrap().statistic_t;
            assert!(close(t, direct, 1e-12), "p = {p}");
        }
    }

    #[test]
    fn full_groups_are_never_independent_or_uniform() {
        for p in (3..=200u64).filter(|&p| crate::group::is_prime(p)) {
            let r = exact_dhi_statistic(&make_full_group(p).unwrap()).unwrap();
            assert!(r.statistic_t > 0.0, "p = {p}");
            assert!(r.independence_gap > 0.0, "p = {p}");
            let ln_n = ((p - 1) as f64).ln();
            assert!(r.conditional_entropy >= 0.0 && r.conditional_entropy <= 2.0 * ln_n);
        }
    }

    proptest! {
        #[test]
        fn exact_totals_are_n_squared(n in 1u64..300) {
            let dense = ExactEngine::default().dense_multiplicities(n).unwrap();
            prop_assert_eq!(dense.iter().sum::<u64>(), n * n);
        }

        #[test]
        fn sum_m_ln_m_is_order_free(mut v in proptest::collection::vec(0u64..50, 1..40)) {
            let a = sum_m_ln_m(v.iter().copied());
            v.reverse();
            prop_assert_eq!(a, sum_m_ln_m(v.iter().copied()));
        }
    }
}
