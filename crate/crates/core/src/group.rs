//! Finite cyclic groups inside `Z_p^*`: full multiplicative groups, prime-order
//! subgroups of safe primes, primality and the Legendre-symbol distinguisher.
//!
//! All elements and moduli are 64-bit words; products go through `u128`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Witnesses making Miller-Rabin deterministic for every `n < 3.3 * 10^24`,
/// which covers the whole `u64` range.
const MR_WITNESSES: [u64; 12] = [2, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37];

#[inline]
pub(crate) fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

/// Square-and-multiply without argument checks. `m >= 2` is assumed.
#[inline]
pub(crate) fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    let mut acc = 1u64;
    base %= m;
    while exp > 0 {
        if exp & 1 == 1 {
            acc = mul_mod(acc, base, m);
        }
        base = mul_mod(base, base, m);
        exp >>= 1;
    }
    acc
}

/// `base^exponent mod modulus` in `O(log exponent)` multiplications.
pub fn mod_pow(base: u64, exponent: u64, modulus: u64) -> Result<u64> {
    if modulus < 2 {
        return Err(Error::InvalidModulus(modulus));
    }
    Ok(pow_mod(base, exponent, modulus))
}

/// Deterministic primality test over the full `u64` range.
///
/// Small inputs are settled by trial division against the witness primes; the
/// rest go through Miller-Rabin with the first twelve primes as bases.
pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    for &p in &MR_WITNESSES {
        if n == p {
            return true;
        }
        if n.is_multiple_of(p) {
            return false;
        }
    }
    let mut d = n - 1;
    let mut s = 0;
    while d.is_multiple_of(2) {
        d /= 2;
        s += 1;
    }
    'witness: for &a in &MR_WITNESSES {
        let mut x = pow_mod(a, d, n);
        if x == 1 || x == n - 1 {
            continue;
        }
        for _ in 1..s {
            x = mul_mod(x, x, n);
            if x == n - 1 {
                continue 'witness;
            }
        }
        return false;
    }
    true
}

/// True iff `p` and `(p - 1) / 2` are both prime.
pub fn is_safe_prime(p: u64) -> bool {
    p >= 5 && is_prime(p) && is_prime((p - 1) / 2)
}

/// Distinct prime factors of `n` in increasing order, by trial division.
pub fn prime_factors(mut n: u64) -> Vec<u64> {
    let mut out = Vec::new();
    let mut d = 2u64;
    while d.saturating_mul(d) <= n {
        if n.is_multiple_of(d) {
            out.push(d);
            while n.is_multiple_of(d) {
                n /= d;
            }
        }
        d += if d == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push(n);
    }
    out
}

/// Checks that `g` has multiplicative order exactly `order` modulo `p`,
/// given the distinct prime factors of `order`.
fn has_exact_order(g: u64, order: u64, factors: &[u64], p: u64) -> bool {
    pow_mod(g, order, p) == 1 && factors.iter().all(|&r| pow_mod(g, order / r, p) != 1)
}

/// Smallest primitive root modulo the prime `p`.
pub fn find_generator(p: u64) -> Result<u64> {
    if p < 3 || !is_prime(p) {
        return Err(Error::input(format!("{p} is not an odd prime")));
    }
    let order = p - 1;
    let factors = prime_factors(order);
    (2..p)
        .find(|&h| has_exact_order(h, order, &factors, p))
        .ok_or_else(|| Error::input(format!("no primitive root found modulo {p}")))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum GroupFamily {
    /// The whole multiplicative group `Z_p^*`, order `p - 1`.
    FullGroup,
    /// A subgroup of prime order `q | p - 1`.
    PrimeSubgroup,
}

impl GroupFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupFamily::FullGroup => "full",
            GroupFamily::PrimeSubgroup => "subgroup",
        }
    }
}

/// A cyclic group `<g>` of order `N` inside `Z_p^*`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CyclicGroup {
    modulus: u64,
    order: u64,
    generator: u64,
    family: GroupFamily,
}

impl CyclicGroup {
    /// Validates every structural invariant, including that `generator` has
    /// order exactly `order`.
    pub fn new(modulus: u64, order: u64, generator: u64, family: GroupFamily) -> Result<Self> {
        if modulus < 3 || !is_prime(modulus) {
            return Err(Error::input(format!("modulus {modulus} is not an odd prime")));
        }
        if generator < 2 || generator >= modulus {
            return Err(Error::input(format!(
                "generator {generator} outside [2, {}]",
                modulus - 1
            )));
        }
        if order == 0 || !(modulus - 1).is_multiple_of(order) {
            return Err(Error::input(format!("order {order} does not divide {}", modulus - 1)));
        }
        match family {
            GroupFamily::FullGroup if order != modulus - 1 => {
                return Err(Error::input(format!(
                    "full group mod {modulus} must have order {}",
                    modulus - 1
                )));
            }
            GroupFamily::PrimeSubgroup if !is_prime(order) => {
                return Err(Error::input(format!("subgroup order {order} is not prime")));
            }
            _ => {}
        }
        if !has_exact_order(generator, order, &prime_factors(order), modulus) {
            return Err(Error::input(format!(
                "{generator} does not have order {order} modulo {modulus}"
            )));
        }
        Ok(CyclicGroup {
            modulus,
            order,
            generator,
            family,
        })
    }

    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    pub fn order(&self) -> u64 {
        self.order
    }

    pub fn generator(&self) -> u64 {
        self.generator
    }

    pub fn family(&self) -> GroupFamily {
        self.family
    }

    /// `g^e` for an exponent residue; `e` is reduced mod `N` first.
    #[inline]
    pub(crate) fn pow_generator(&self, e: u64) -> u64 {
        pow_mod(self.generator, e % self.order, self.modulus)
    }

    /// `g^exponent` for `exponent` in `[1, N]`. `g^N` is the identity.
    pub fn element_of(&self, exponent: u64) -> Result<u64> {
        if exponent == 0 || exponent > self.order {
            return Err(Error::input(format!(
                "exponent {exponent} outside [1, {}]",
                self.order
            )));
        }
        Ok(self.pow_generator(exponent))
    }
}

impl std::fmt::Display for CyclicGroup {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} mod {} (order {}, generator {})",
            self.family.as_str(),
            self.modulus,
            self.order,
            self.generator
        )
    }
}

/// `Z_p^*` with its smallest primitive root.
pub fn make_full_group(p: u64) -> Result<CyclicGroup> {
    let g = find_generator(p)?;
    CyclicGroup::new(p, p - 1, g, GroupFamily::FullGroup)
}

/// The order-`q` subgroup of quadratic residues of a safe prime `p = 2q + 1`,
/// generated by `h^2` for the smallest `h >= 2` with `h^2 != 1`.
pub fn make_prime_subgroup(p: u64) -> Result<CyclicGroup> {
    if !is_safe_prime(p) {
        return Err(Error::input(format!("{p} is not a safe prime")));
    }
    let q = (p - 1) / 2;
    let g = (2..p)
        .map(|h| mul_mod(h, h, p))
        .find(|&sq| sq != 1)
        .ok_or_else(|| Error::input(format!("no subgroup generator modulo {p}")))?;
    CyclicGroup::new(p, q, g, GroupFamily::PrimeSubgroup)
}

/// Free-function form of [`CyclicGroup::element_of`].
pub fn element_of(group: &CyclicGroup, exponent: u64) -> Result<u64> {
    group.element_of(exponent)
}

/// Legendre symbol `(a / p)` by Euler's criterion.
pub fn legendre_symbol(a: i64, p: u64) -> Result<i8> {
    if p < 3 || !is_prime(p) {
        return Err(Error::input(format!("{p} is not an odd prime")));
    }
    let a = (a as i128).rem_euclid(p as i128) as u64;
    match pow_mod(a, (p - 1) / 2, p) {
        0 => Ok(0),
        1 => Ok(1),
        r if r == p - 1 => Ok(-1),
        r => Err(Error::input(format!("Euler criterion gave {r} mod {p}"))),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SafetyClass {
    SafePrime,
    OtherPrime,
}

impl SafetyClass {
    pub fn as_str(self) -> &'static str {
        match self {
            SafetyClass::SafePrime => "safe",
            SafetyClass::OtherPrime => "other",
        }
    }
}

/// A prime tagged by whether it is safe (`p = 2q + 1`, `q` prime).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PrimeClass {
    pub prime: u64,
    pub class: SafetyClass,
}

impl PrimeClass {
    pub fn of(prime: u64) -> Result<Self> {
        if !is_prime(prime) {
            return Err(Error::input(format!("{prime} is not prime")));
        }
        let class = if is_safe_prime(prime) {
            SafetyClass::SafePrime
        } else {
            SafetyClass::OtherPrime
        };
        Ok(PrimeClass { prime, class })
    }
}
