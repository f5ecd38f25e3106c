//! Statistical assessment of Diffie-Hellman indistinguishability in finite
//! cyclic groups.
//!
//! The conditional entropy `H(g^a, g^b | g^{ab})` measures how far the shared
//! key `g^{ab}` is from uniform given the public values. It is computed
//! exactly over all `N^2` exponent pairs ([`entropy`]), estimated from seeded
//! samples ([`sampling`]) and compared against a multivariate hypergeometric
//! null by permutation ([`permutation`]). [`survey`] runs these across prime
//! ranges and group families, and [`report`] writes the results.

pub mod cli;
pub mod entropy;
pub mod error;
pub mod group;
pub mod permutation;
pub mod report;
pub mod sampling;
pub mod survey;

pub use entropy::{
    analytic_subgroup_statistic, conditional_entropy, exact_conditional_entropy, exact_dhi_statistic,
    exact_multiplicities, independence_test, joint_entropy, ExactEngine, ExactTestResult, Independence,
    JointPmf3, MultiplicityTable,
};
pub use error::{Error, Result};
pub use group::{
    element_of, find_generator, is_prime, is_safe_prime, legendre_symbol, make_full_group, make_prime_subgroup,
    mod_pow, CyclicGroup, GroupFamily, PrimeClass, SafetyClass,
};
pub use permutation::{
    build_null_distribution, dhi_permutation_test, null_statistic, sample_null_multiplicities, DhiTest,
    DhiTestReport, NullDistribution,
};
pub use report::{emit_report, ReportFormat};
pub use sampling::{sample_statistic, sample_triples, z_multiplicities, SampleStatistic, Sampler, TripleSample};
pub use survey::{classify_primes, reproduce_table1, run_survey, SurveyConfig, SurveyMode, SurveyRecord, Table1Record};
