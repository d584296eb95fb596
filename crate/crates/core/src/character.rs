//! Dirichlet characters modulo a prime, indexed by discrete-log exponent.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;

use crate::arith::{inv_mod, is_prime, mul_mod, primitive_root, reduce};
use crate::error::{Error, Result};
use crate::roots::RootTable;

const NO_LOG: u32 = u32::MAX;

/// Discrete-log table for `(Z/q)^*` with respect to the smallest primitive
/// root. Shared by every character modulo `q`.
#[derive(Clone)]
pub struct CharacterGroup {
    q: u64,
    generator: u64,
    dlog: Arc<[u32]>,
}

impl CharacterGroup {
    pub fn new(q: u64) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        let generator = primitive_root(q)?;
        let mut dlog = vec![NO_LOG; q as usize];
        let mut x = 1u64;
        for j in 0..(q - 1) {
            dlog[x as usize] = j as u32;
            x = mul_mod(x, generator, q);
        }
        Ok(Self {
            q,
            generator,
            dlog: dlog.into(),
        })
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn generator(&self) -> u64 {
        self.generator
    }

    /// Discrete log of a unit residue, `None` for `0`.
    pub fn log(&self, x: u64) -> Option<u32> {
        match self.dlog[(x % self.q) as usize] {
            NO_LOG => None,
            j => Some(j),
        }
    }

    /// The character with `chi(g) = e(k / (q - 1))`.
    pub fn character(&self, k: u64) -> Result<DirichletCharacter> {
        let order = self.q - 1;
        if k >= order.max(1) {
            return Err(Error::PreconditionViolation(format!(
                "character exponent {k} outside [0, {order})"
            )));
        }
        let roots = RootTable::new(order.max(1));
        let values: Vec<Complex64> = (0..self.q)
            .map(|x| match self.dlog[x as usize] {
                NO_LOG => Complex64::new(0.0, 0.0),
                j => roots.at(mul_mod(k, j as u64, order.max(1))),
            })
            .collect();
        Ok(DirichletCharacter {
            q: self.q,
            generator: self.generator,
            exponent: k,
            values: values.into(),
        })
    }

    /// All `q - 1` characters in exponent order.
    pub fn characters(&self) -> impl Iterator<Item = DirichletCharacter> + '_ {
        (0..(self.q - 1).max(1)).map(move |k| self.character(k).expect("k in range"))
    }

    /// The nontrivial (equivalently, primitive) characters in exponent order.
    pub fn primitive(&self) -> impl Iterator<Item = DirichletCharacter> + '_ {
        (1..self.q - 1).map(move |k| self.character(k).expect("k in range"))
    }
}

/// A character modulo the prime `q`, stored as its value table.
#[derive(Clone)]
pub struct DirichletCharacter {
    q: u64,
    generator: u64,
    exponent: u64,
    values: Arc<[Complex64]>,
}

impl DirichletCharacter {
    pub fn new(q: u64, exponent: u64) -> Result<Self> {
        CharacterGroup::new(q)?.character(exponent)
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn generator(&self) -> u64 {
        self.generator
    }

    pub fn exponent(&self) -> u64 {
        self.exponent
    }

    pub fn is_trivial(&self) -> bool {
        self.exponent == 0
    }

    /// For prime modulus, every nontrivial character is primitive.
    pub fn is_primitive(&self) -> bool {
        self.exponent != 0
    }

    /// `chi(-1)`, as `+1` or `-1`.
    pub fn parity(&self) -> i8 {
        if self.q == 2 || self.exponent % 2 == 0 {
            1
        } else {
            -1
        }
    }

    #[inline]
    pub fn eval(&self, n: i64) -> Complex64 {
        self.values[reduce(n, self.q) as usize]
    }

    #[inline]
    pub fn at(&self, residue: u64) -> Complex64 {
        self.values[residue as usize]
    }

    /// `chi(n / m)` for `m` coprime to `q`.
    pub fn eval_ratio(&self, n: i64, m: i64) -> Result<Complex64> {
        let mm = reduce(m, self.q);
        let inv = inv_mod(mm, self.q).ok_or(Error::NonInvertible {
            value: mm,
            modulus: self.q,
            gcd: self.q,
        })?;
        Ok(self.eval(n) * self.at(inv))
    }

    pub fn conj(&self) -> DirichletCharacter {
        let order = (self.q - 1).max(1);
        DirichletCharacter {
            q: self.q,
            generator: self.generator,
            exponent: (order - self.exponent) % order,
            values: self.values.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }
}

impl fmt::Debug for DirichletCharacter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "chi_{}^({})", self.q, self.exponent)
    }
}

/// `chi(n)`; zero when `q | n`.
pub fn char_eval(chi: &DirichletCharacter, n: i64) -> Complex64 {
    chi.eval(n)
}
