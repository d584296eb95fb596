//! Complete exponential sums: Gauss, Kloosterman, twisted Kloosterman and
//! Ramanujan sums, with their identities and Weil-bound audits.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{gcd, inv_mod, is_prime, primes_in, reduce, tau, Modulus};
use crate::character::{CharacterGroup, DirichletCharacter};
use crate::error::{Error, Result};
use crate::report::{params, AuditBuilder, AuditReport, Metric};
use crate::roots::RootTable;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SumKind {
    Gauss,
    Kloosterman,
    TwistedKloosterman,
    Ramanujan,
    RationalPhase,
    Correlation,
}

/// A sum value tagged with what was summed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExpSumValue {
    pub value: Complex64,
    pub modulus: Modulus,
    pub kind: SumKind,
    pub params: Vec<i64>,
}

impl ExpSumValue {
    pub fn norm(&self) -> f64 {
        self.value.norm()
    }
}

/// Units mod `c` paired with their inverses, plus the root table `e_c`.
/// Every Kloosterman-type sum modulo `c` runs over this table.
#[derive(Clone, Debug)]
pub struct UnitTable {
    c: u64,
    units: Vec<(u64, u64)>,
    roots: RootTable,
}

impl UnitTable {
    pub fn new(c: u64) -> Self {
        assert!(c >= 1);
        let units = (0..c)
            .filter(|&x| gcd(x, c) == 1)
            .map(|x| (x, inv_mod(x, c).expect("unit")))
            .collect();
        Self {
            c,
            units,
            roots: RootTable::new(c),
        }
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.c
    }

    pub fn units(&self) -> &[(u64, u64)] {
        &self.units
    }

    pub fn roots(&self) -> &RootTable {
        &self.roots
    }

    /// `S(a, b; c)` for residues `a, b < c`.
    pub fn kloosterman(&self, a: u64, b: u64) -> Complex64 {
        let c = self.c;
        let mut acc = Complex64::new(0.0, 0.0);
        for &(x, y) in &self.units {
            let k = (a * x % c + b * y % c) % c;
            acc += self.roots.at(k);
        }
        acc
    }

    /// `K_c(a) = c^(-1/2) S(a, 1; c)`, which is real.
    pub fn normalized(&self, a: u64) -> f64 {
        self.kloosterman(a, 1 % self.c).re / (self.c as f64).sqrt()
    }

    /// `K_c(a)` for every residue `a`.
    pub fn normalized_all(&self) -> Vec<f64> {
        (0..self.c).map(|a| self.normalized(a)).collect()
    }
}

/// `S(a, b; c) = sum_{x mod c, (x,c)=1} e_c(a x + b x^-1)`.
pub fn kloosterman(a: i64, b: i64, c: &Modulus) -> ExpSumValue {
    let m = c.value();
    let t = UnitTable::new(m);
    ExpSumValue {
        value: t.kloosterman(reduce(a, m), reduce(b, m)),
        modulus: c.clone(),
        kind: SumKind::Kloosterman,
        params: vec![a, b],
    }
}

/// `K_c(a) = c^(-1/2) S(a, 1; c)`.
pub fn normalized_kloosterman(a: i64, c: &Modulus) -> f64 {
    let m = c.value();
    UnitTable::new(m).normalized(reduce(a, m))
}

/// `S_chi(a, b; q) = sum_{x mod q} chi(x) e_q(a x + b x^-1)`.
pub fn twisted_kloosterman(chi: &DirichletCharacter, a: i64, b: i64) -> ExpSumValue {
    let q = chi.modulus();
    let t = UnitTable::new(q);
    ExpSumValue {
        value: twisted_with(&t, chi, reduce(a, q), reduce(b, q)),
        modulus: Modulus::new(q).expect("prime modulus"),
        kind: SumKind::TwistedKloosterman,
        params: vec![a, b],
    }
}

/// [`twisted_kloosterman`] against a prebuilt table for `q`.
pub fn twisted_with(t: &UnitTable, chi: &DirichletCharacter, a: u64, b: u64) -> Complex64 {
    let q = t.c;
    let mut acc = Complex64::new(0.0, 0.0);
    for &(x, y) in &t.units {
        acc += chi.at(x) * t.roots.at((a * x % q + b * y % q) % q);
    }
    acc
}

/// `eps(chi-bar) = q^(-1/2) sum_a chi-bar(a) e_q(a)`.
pub fn gauss_eps(chi: &DirichletCharacter) -> Result<Complex64> {
    if chi.is_trivial() {
        return Err(Error::DegenerateCharacter);
    }
    let q = chi.modulus();
    let roots = RootTable::new(q);
    let sum: Complex64 = (1..q).map(|a| chi.at(a).conj() * roots.at(a)).sum();
    let eps = sum / (q as f64).sqrt();
    debug_assert!((eps.norm() - 1.0).abs() < 1e-10);
    Ok(eps)
}

/// `sum_{x mod q, (x,q)=1} e_q(a x)` for prime `q`: `q - 1` if `q | a`, else `-1`.
pub fn ramanujan(a: i64, q: &Modulus) -> Result<i64> {
    if !q.is_prime() {
        return Err(Error::NotPrime(q.value()));
    }
    let p = q.value();
    Ok(if reduce(a, p) == 0 { p as i64 - 1 } else { -1 })
}

/// `|S(a^-1, n; m) - m^(1/2) K_m(n a^-1)|` with `m = c/d`, both sides by
/// separate direct summation.
pub fn kloosterman_factorization_check(a: i64, n: i64, c: &Modulus, d: u64) -> Result<f64> {
    let cv = c.value();
    if d == 0 || cv % d != 0 {
        return Err(Error::PreconditionViolation(format!("{d} does not divide {cv}")));
    }
    let m = cv / d;
    let t = UnitTable::new(m);
    Ok(factorization_residual(&t, a, n))
}

fn factorization_residual(t: &UnitTable, a: i64, n: i64) -> f64 {
    let m = t.modulus();
    let Some(abar) = inv_mod(reduce(a, m), m) else {
        // callers check invertibility first
        return f64::NAN;
    };
    let lhs = t.kloosterman(abar, reduce(n, m));
    let arg = reduce(n, m) * abar % m;
    let rhs = (m as f64).sqrt() * t.normalized(arg);
    (lhs - Complex64::new(rhs, 0.0)).norm()
}

/// Checked form of [`kloosterman_factorization_check`] that reports the
/// non-invertible case as an error.
pub fn kloosterman_factorization(a: i64, n: i64, c: &Modulus, d: u64) -> Result<f64> {
    let cv = c.value();
    if d == 0 || cv % d != 0 {
        return Err(Error::PreconditionViolation(format!("{d} does not divide {cv}")));
    }
    let m = cv / d;
    let g = gcd(reduce(a, m), m);
    if g != 1 {
        return Err(Error::NonInvertible {
            value: reduce(a, m),
            modulus: m,
            gcd: g,
        });
    }
    kloosterman_factorization_check(a, n, c, d)
}

/// Exhaustive factorization audit: every `c <= c_max`, every `d | c`, every
/// `a` invertible mod `c/d` and every `n` mod `c/d`.
pub fn factorization_audit(c_max: u64) -> Result<AuditReport> {
    if c_max < 1 {
        return Err(Error::PreconditionViolation("c_max must be at least 1".into()));
    }
    let root = AuditBuilder::new("kloosterman-factorization", Metric::Residual, 1e-9, [1, c_max]);
    let chunks: Vec<AuditBuilder> = (1..=c_max)
        .into_par_iter()
        .map(|c| {
            let mut b = root.fork();
            for d in crate::arith::divisors(c) {
                let m = c / d;
                let t = UnitTable::new(m);
                for &(a, _) in t.units() {
                    for n in 0..m {
                        let r = factorization_residual(&t, a as i64, n as i64);
                        b.observe(
                            params([("c", c as i64), ("d", d as i64), ("a", a as i64), ("n", n as i64)]),
                            r,
                        );
                    }
                }
            }
            b
        })
        .collect();
    Ok(merge_all(root, chunks))
}

pub(crate) fn merge_all(mut root: AuditBuilder, chunks: Vec<AuditBuilder>) -> AuditReport {
    for c in chunks {
        root.merge(c);
    }
    root.finish()
}

/// Weil audit. Primes: `|S(a,b;p)| <= 2 sqrt(p)` for `p` not dividing `ab`,
/// asserted as ratio `<= 1`. Higher prime powers: the ratio
/// `|S| / (tau(c) sqrt(c (a,b,c)))` is recorded, not asserted.
pub fn weil_audit(c_max: u64) -> Result<AuditReport> {
    if c_max < 2 {
        return Err(Error::PreconditionViolation(format!(
            "c_max must be at least 2, got {c_max}"
        )));
    }
    let root = AuditBuilder::new("weil", Metric::Ratio, 1.0, [2, c_max]);
    let moduli: Vec<u64> = (2..=c_max)
        .filter(|&c| Modulus::new(c).unwrap().prime_power().is_some())
        .collect();
    let chunks: Vec<AuditBuilder> = moduli
        .par_iter()
        .map(|&c| {
            let mut b = root.fork();
            let t = UnitTable::new(c);
            let bound = 2.0 * (c as f64).sqrt();
            if is_prime(c) {
                for a in 1..c {
                    for bb in 1..c {
                        let s = t.kloosterman(a, bb).norm();
                        b.observe(
                            params([("c", c as i64), ("a", a as i64), ("b", bb as i64)]),
                            s / bound,
                        );
                    }
                }
            } else {
                let tc = tau(c) as f64;
                for a in 0..c {
                    for bb in 0..c {
                        let g = gcd(gcd(a, bb), c) as f64;
                        let s = t.kloosterman(a, bb).norm();
                        b.record_max("prime_power_max_ratio", s / (tc * (c as f64 * g).sqrt()));
                    }
                }
            }
            b
        })
        .collect();
    Ok(merge_all(root, chunks))
}

/// `| |eps(chi-bar)| - 1 |` for every primitive character mod every prime `q <= q_max`.
pub fn gauss_audit(q_max: u64) -> Result<AuditReport> {
    if q_max < 3 {
        return Err(Error::PreconditionViolation(format!(
            "q_max must be at least 3, got {q_max}"
        )));
    }
    let mut b = AuditBuilder::new("gauss", Metric::Residual, 1e-10, [3, q_max]);
    for q in primes_in(3, q_max) {
        let group = CharacterGroup::new(q)?;
        for chi in group.primitive() {
            let eps = gauss_eps(&chi)?;
            b.observe(
                params([("q", q as i64), ("k", chi.exponent() as i64)]),
                (eps.norm() - 1.0).abs(),
            );
        }
    }
    Ok(b.finish())
}
