//! Exact modular arithmetic over moduli up to 2^32.
//!
//! Raw helpers work on `u64`/`i64` with 128-bit intermediates and are what the
//! summation loops use. [`Modulus`] and [`ResidueClass`] wrap them for the
//! typed API.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a
}

/// `gcd(|a|, m)`, with `gcd(0, m) = m`.
pub fn gcd_signed(a: i64, m: u64) -> u64 {
    gcd(a.unsigned_abs(), m)
}

pub fn lcm(a: u64, b: u64) -> u64 {
    a / gcd(a, b) * b
}

/// Least nonnegative residue of `x` modulo `m`.
#[inline]
pub fn reduce(x: i64, m: u64) -> u64 {
    (x as i128).rem_euclid(m as i128) as u64
}

#[inline]
pub fn reduce_wide(x: i128, m: u64) -> u64 {
    x.rem_euclid(m as i128) as u64
}

#[inline]
pub fn mul_mod(a: u64, b: u64, m: u64) -> u64 {
    ((a as u128 * b as u128) % m as u128) as u64
}

pub fn pow_mod(mut base: u64, mut exp: u64, m: u64) -> u64 {
    if m == 1 {
        return 0;
    }
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

/// Inverse of `x` modulo `m` by the extended Euclidean algorithm.
pub fn inv_mod(x: u64, m: u64) -> Option<u64> {
    if m == 1 {
        return Some(0);
    }
    let (mut r0, mut r1) = (m as i128, (x % m) as i128);
    let (mut t0, mut t1) = (0i128, 1i128);
    while r1 != 0 {
        let q = r0 / r1;
        (r0, r1) = (r1, r0 - q * r1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    if r0 != 1 {
        return None;
    }
    Some(t0.rem_euclid(m as i128) as u64)
}

/// Inverse of a signed integer modulo `m`.
pub fn inv_mod_signed(x: i64, m: u64) -> Option<u64> {
    inv_mod(reduce(x, m), m)
}

pub fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n < 4 {
        return true;
    }
    if n % 2 == 0 {
        return false;
    }
    let mut d = 3u64;
    while d * d <= n {
        if n % d == 0 {
            return false;
        }
        d += 2;
    }
    true
}

/// Prime factorization by trial division; primes increasing, exponents >= 1.
pub fn factorize(mut n: u64) -> Vec<(u64, u32)> {
    let mut out = Vec::new();
    let mut p = 2u64;
    while p * p <= n {
        if n % p == 0 {
            let mut e = 0;
            while n % p == 0 {
                n /= p;
                e += 1;
            }
            out.push((p, e));
        }
        p += if p == 2 { 1 } else { 2 };
    }
    if n > 1 {
        out.push((n, 1));
    }
    out
}

/// Primes in the closed interval `[lo, hi]`.
pub fn primes_in(lo: u64, hi: u64) -> Vec<u64> {
    (lo..=hi).filter(|&n| is_prime(n)).collect()
}

/// Sorted list of positive divisors.
pub fn divisors(n: u64) -> Vec<u64> {
    let mut small = Vec::new();
    let mut large = Vec::new();
    let mut d = 1u64;
    while d * d <= n {
        if n % d == 0 {
            small.push(d);
            if d * d != n {
                large.push(n / d);
            }
        }
        d += 1;
    }
    small.extend(large.into_iter().rev());
    small
}

/// Number of divisors.
pub fn tau(n: u64) -> u64 {
    factorize(n).iter().map(|&(_, e)| e as u64 + 1).product()
}

pub fn euler_phi(n: u64) -> u64 {
    factorize(n)
        .iter()
        .fold(n, |acc, &(p, _)| acc / p * (p - 1))
}

/// Smallest primitive root modulo the prime `p`.
pub fn primitive_root(p: u64) -> Result<u64> {
    if !is_prime(p) {
        return Err(Error::NotPrime(p));
    }
    if p == 2 {
        return Ok(1);
    }
    let order_primes: Vec<u64> = factorize(p - 1).into_iter().map(|(f, _)| f).collect();
    (2..p)
        .find(|&g| order_primes.iter().all(|&f| pow_mod(g, (p - 1) / f, p) != 1))
        .ok_or(Error::NotPrime(p))
}

/// A positive modulus together with its factorization.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Modulus {
    value: u64,
    factorization: Vec<(u64, u32)>,
}

impl Modulus {
    pub fn new(value: u64) -> Result<Self> {
        if value == 0 {
            return Err(Error::InvalidModulus(0));
        }
        if value > u32::MAX as u64 {
            return Err(Error::InvalidModulus(value as i128));
        }
        Ok(Self {
            value,
            factorization: factorize(value),
        })
    }

    pub fn prime(p: u64) -> Result<Self> {
        if !is_prime(p) {
            return Err(Error::NotPrime(p));
        }
        Self::new(p)
    }

    #[inline]
    pub fn value(&self) -> u64 {
        self.value
    }

    pub fn factorization(&self) -> &[(u64, u32)] {
        &self.factorization
    }

    /// `Some((p, n))` when the modulus is `p^n` with `n >= 1`.
    pub fn prime_power(&self) -> Option<(u64, u32)> {
        match self.factorization.as_slice() {
            [(p, e)] => Some((*p, *e)),
            _ => None,
        }
    }

    pub fn is_prime(&self) -> bool {
        matches!(self.factorization.as_slice(), [(_, 1)])
    }

    pub fn phi(&self) -> u64 {
        self.factorization
            .iter()
            .fold(self.value, |acc, &(p, _)| acc / p * (p - 1))
    }

    pub fn tau(&self) -> u64 {
        self.factorization.iter().map(|&(_, e)| e as u64 + 1).product()
    }
}

impl fmt::Debug for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Modulus({})", self.value)
    }
}

impl fmt::Display for Modulus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.value)
    }
}

/// Number of distinct prime divisors.
pub fn omega(s: &Modulus) -> usize {
    s.factorization.len()
}

/// An element of `Z/m`, stored as its least nonnegative residue.
#[derive(Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResidueClass {
    residue: u64,
    modulus: Modulus,
}

impl ResidueClass {
    pub fn new(x: i64, modulus: &Modulus) -> Self {
        Self {
            residue: reduce(x, modulus.value),
            modulus: modulus.clone(),
        }
    }

    #[inline]
    pub fn residue(&self) -> u64 {
        self.residue
    }

    pub fn modulus(&self) -> &Modulus {
        &self.modulus
    }
}

impl fmt::Debug for ResidueClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} mod {}", self.residue, self.modulus.value)
    }
}

pub fn mod_inverse(x: &ResidueClass) -> Result<ResidueClass> {
    let m = x.modulus.value;
    match inv_mod(x.residue, m) {
        Some(y) => Ok(ResidueClass {
            residue: y,
            modulus: x.modulus.clone(),
        }),
        None => Err(Error::NonInvertible {
            value: x.residue,
            modulus: m,
            gcd: gcd(x.residue, m),
        }),
    }
}

/// Reduce `x mod m1*m2` to the pair `(x mod m1, x mod m2)`.
pub fn crt_split(
    x: &ResidueClass,
    m1: &Modulus,
    m2: &Modulus,
) -> Result<(ResidueClass, ResidueClass)> {
    if gcd(m1.value, m2.value) != 1 {
        return Err(Error::NotCoprime(m1.value, m2.value));
    }
    if m1.value as u128 * m2.value as u128 != x.modulus.value as u128 {
        return Err(Error::PreconditionViolation(format!(
            "{} * {} != {}",
            m1.value, m2.value, x.modulus.value
        )));
    }
    Ok((
        ResidueClass {
            residue: x.residue % m1.value,
            modulus: m1.clone(),
        },
        ResidueClass {
            residue: x.residue % m2.value,
            modulus: m2.clone(),
        },
    ))
}

/// Inverse of [`crt_split`].
pub fn crt_combine(x1: &ResidueClass, x2: &ResidueClass) -> Result<ResidueClass> {
    let (m1, m2) = (x1.modulus.value, x2.modulus.value);
    let inv = inv_mod(m1 % m2, m2).ok_or(Error::NotCoprime(m1, m2))?;
    let modulus = Modulus::new(m1 * m2)?;
    Ok(ResidueClass {
        residue: crt_lift(x1.residue, m1, x2.residue, m2, inv),
        modulus,
    })
}

/// The residue mod `m1*m2` congruent to `x1` mod `m1` and `x2` mod `m2`,
/// given `m1_inv = m1^{-1} mod m2`.
#[inline]
pub fn crt_lift(x1: u64, m1: u64, x2: u64, m2: u64, m1_inv: u64) -> u64 {
    // m2 < 2^32, so the product fits in 64 bits.
    let diff = (x2 + m2 - x1 % m2) % m2;
    x1 + m1 * (diff * m1_inv % m2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn m(v: u64) -> Modulus {
        Modulus::new(v).unwrap()
    }

    #[test]
    fn inverse_examples() {
        let x = ResidueClass::new(3, &m(7));
        assert_eq!(mod_inverse(&x).unwrap().residue(), 5);
        for c in 1..40 {
            let one = ResidueClass::new(1, &m(c));
            assert_eq!(mod_inverse(&one).unwrap().residue(), 1 % c);
        }
        let two = ResidueClass::new(2, &m(4));
        assert!(matches!(
            mod_inverse(&two),
            Err(Error::NonInvertible { gcd: 2, .. })
        ));
    }

    #[test]
    fn inverse_is_involution_up_to_ten_thousand() {
        for c in (1..=10_000u64).step_by(97).chain([9_973, 10_000]) {
            let modulus = m(c);
            for x in 0..c {
                if gcd(x, c) != 1 {
                    continue;
                }
                let r = ResidueClass::new(x as i64, &modulus);
                let y = mod_inverse(&r).unwrap();
                assert_eq!(mul_mod(x, y.residue(), c), 1 % c);
                assert_eq!(mod_inverse(&y).unwrap(), r);
            }
        }
    }

    #[test]
    fn crt_examples() {
        let x = ResidueClass::new(7, &m(15));
        let (a, b) = crt_split(&x, &m(3), &m(5)).unwrap();
        assert_eq!((a.residue(), b.residue()), (1, 2));

        let zero = ResidueClass::new(0, &m(35));
        let (a, b) = crt_split(&zero, &m(5), &m(7)).unwrap();
        assert_eq!((a.residue(), b.residue()), (0, 0));

        let y = ResidueClass::new(5, &m(24));
        assert!(matches!(
            crt_split(&y, &m(4), &m(6)),
            Err(Error::NotCoprime(4, 6))
        ));
    }

    #[test]
    fn crt_round_trip_exhaustive() {
        for m1 in 1..=10_000u64 {
            for m2 in 1..=(10_000 / m1) {
                if gcd(m1, m2) != 1 {
                    continue;
                }
                let inv = inv_mod(m1 % m2, m2).unwrap();
                for x in 0..m1 * m2 {
                    assert_eq!(crt_lift(x % m1, m1, x % m2, m2, inv), x);
                }
            }
        }
    }

    #[test]
    fn crt_typed_round_trip() {
        for (m1, m2) in [(1, 7), (4, 9), (8, 15), (11, 13), (16, 25)] {
            let big = m(m1 * m2);
            let (a, b) = (m(m1), m(m2));
            for x in 0..m1 * m2 {
                let r = ResidueClass::new(x as i64, &big);
                let (x1, x2) = crt_split(&r, &a, &b).unwrap();
                assert_eq!(crt_combine(&x1, &x2).unwrap(), r);
            }
        }
    }

    #[test]
    fn omega_examples() {
        assert_eq!(omega(&m(12)), 2);
        assert_eq!(omega(&m(1)), 0);
        assert_eq!(omega(&m(30)), 3);
    }

    #[test]
    fn factorization_invariants() {
        for v in 1..3_000u64 {
            let md = m(v);
            let prod: u64 = md
                .factorization()
                .iter()
                .map(|&(p, e)| p.pow(e))
                .product();
            assert_eq!(prod, v);
            assert!(md.factorization().windows(2).all(|w| w[0].0 < w[1].0));
            assert!(md.factorization().iter().all(|&(p, e)| e >= 1 && is_prime(p)));
        }
        assert!(Modulus::new(0).is_err());
    }

    #[test]
    fn primitive_roots() {
        assert_eq!(primitive_root(7).unwrap(), 3);
        assert_eq!(primitive_root(5).unwrap(), 2);
        assert_eq!(primitive_root(13).unwrap(), 2);
        assert!(primitive_root(15).is_err());
    }

    #[test]
    fn divisor_helpers() {
        assert_eq!(divisors(12), vec![1, 2, 3, 4, 6, 12]);
        assert_eq!(tau(36), 9);
        assert_eq!(euler_phi(36), 12);
        assert_eq!(lcm(4, 6), 12);
    }
}
