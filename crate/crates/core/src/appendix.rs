//! Rational-phase complete sums with p-adic stationary phase, correlations
//! of Kloosterman sums, and their smoothed incomplete versions.
//!
//! Audits run on grids reduced by exact symmetries:
//!
//! * rational phases: dividing through by `d` gives `d = 1`, and `x -> u x`
//!   maps `(a, b, c)` to `(a u^2, b u, c u)`, so `b` may be taken in
//!   `{0, 1, p, ..., p^(n-1)}`;
//! * correlations: `x -> u x` scales `(l1, l2, xi)` by the unit `u`, so
//!   `l1` may be taken to be a divisor of `s1`.

use std::collections::BTreeMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{divisors, factorize, gcd, inv_mod, lcm, reduce, Modulus};
use crate::error::{Error, Result};
use crate::expsums::{ExpSumValue, SumKind, UnitTable};
use crate::registry::Registry;
use crate::report::{params, AuditBuilder, AuditReport, Metric, Params};
use crate::roots::RootTable;
use crate::weight::FourierPair;

/// Zero test for sums claimed to vanish.
pub const VANISHING_TOL: f64 = 1e-9;
/// Agreement of two evaluations of one correlation sum.
pub const IDENTITY_TOL: f64 = 1e-9;
/// Direct against Poisson side of an incomplete correlation.
pub const POISSON_TOL: f64 = 1e-8;
/// Tail budget as a fraction of [`POISSON_TOL`].
const TAIL_FRACTION: f64 = 1e-3;

const NO_INVERSE: u64 = u64::MAX;

fn inverse_table(s: u64) -> Vec<u64> {
    (0..s).map(|x| inv_mod(x, s).unwrap_or(NO_INVERSE)).collect()
}

/// `(p, n, p^n)` for prime powers `2 <= p^n <= max`, ordered by `p^n`.
pub fn prime_powers(max: u64) -> Vec<(u64, u32, u64)> {
    (2..=max)
        .filter_map(|s| match factorize(s).as_slice() {
            [(p, n)] => Some((*p, *n, s)),
            _ => None,
        })
        .collect()
}

fn p_part(s: u64, p: u64) -> u64 {
    let mut m = 1;
    let mut t = s;
    while t % p == 0 {
        t /= p;
        m *= p;
    }
    m
}

// ---------------------------------------------------------------------------
// Rational phases

/// `phi(x) = x (a x + b) / (c x + d)` modulo `s`, on the domain of `x` with
/// `c x + d` a unit and `x mod p` outside the excluded classes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalPhase {
    pub s: Modulus,
    pub a: u64,
    pub b: u64,
    pub c: u64,
    pub d: u64,
    /// `(p, r)`: residues `x = r mod p` are removed from the domain.
    pub excluded: Vec<(u64, u64)>,
}

impl RationalPhase {
    pub fn new(s: u64, a: i64, b: i64, c: i64, d: i64) -> Result<Self> {
        let m = Modulus::new(s)?;
        let d = reduce(d, s);
        if gcd(d, s) != 1 {
            return Err(Error::NotCoprime(d, s));
        }
        Ok(Self {
            a: reduce(a, s),
            b: reduce(b, s),
            c: reduce(c, s),
            d,
            s: m,
            excluded: Vec::new(),
        })
    }

    /// Remove the class `r mod p` from the domain.
    pub fn excluding(mut self, p: u64, r: u64) -> Result<Self> {
        if self.s.value() % p != 0 || !crate::arith::is_prime(p) {
            return Err(Error::PreconditionViolation(format!(
                "{p} is not a prime divisor of {}",
                self.s.value()
            )));
        }
        self.excluded.push((p, r % p));
        Ok(self)
    }

    fn in_domain(&self, x: u64) -> bool {
        let s = self.s.value();
        gcd((self.c * x + self.d) % s, s) == 1 && self.excluded.iter().all(|&(p, r)| x % p != r)
    }

    pub fn domain(&self) -> Vec<u64> {
        (0..self.s.value()).filter(|&x| self.in_domain(x)).collect()
    }

    /// `phi(x) mod s` for `x` in the domain.
    pub fn phase(&self, x: u64) -> Option<u64> {
        let s = self.s.value();
        if !self.in_domain(x) {
            return None;
        }
        let den = inv_mod((self.c * x + self.d) % s, s)?;
        let num = x % s * ((self.a * x + self.b) % s) % s;
        Some(num * den % s)
    }
}

/// A rational-phase sum with the size of its domain; an empty domain gives
/// the value zero, flagged by `domain_size == 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RationalPhaseSum {
    pub sum: ExpSumValue,
    pub domain_size: usize,
}

/// `s^-1 sum_{x in domain} e_s(phi(x))` by direct summation.
pub fn rational_phase_sum(p: &RationalPhase) -> RationalPhaseSum {
    let s = p.s.value();
    let roots = RootTable::new(s);
    let mut acc = Complex64::new(0.0, 0.0);
    let mut size = 0;
    for x in 0..s {
        if let Some(k) = p.phase(x) {
            acc += roots.at(k);
            size += 1;
        }
    }
    RationalPhaseSum {
        sum: ExpSumValue {
            value: acc / s as f64,
            modulus: p.s.clone(),
            kind: SumKind::RationalPhase,
            params: vec![p.a as i64, p.b as i64, p.c as i64, p.d as i64],
        },
        domain_size: size,
    }
}

/// Shared tables for every phase modulo one prime power.
struct PhaseKernel {
    s: u64,
    p: u64,
    roots: RootTable,
    inv: Vec<u64>,
}

impl PhaseKernel {
    fn new(p: u64, s: u64) -> Self {
        Self {
            s,
            p,
            roots: RootTable::new(s),
            inv: inverse_table(s),
        }
    }

    /// The normalized sum with `d = 1` and an optional excluded class mod `p`.
    fn sum(&self, a: u64, b: u64, c: u64, excluded: Option<u64>) -> Complex64 {
        let s = self.s;
        let mut acc = Complex64::new(0.0, 0.0);
        for x in 0..s {
            let den = self.inv[((c * x + 1) % s) as usize];
            if den == NO_INVERSE || excluded == Some(x % self.p) {
                continue;
            }
            acc += self.roots.at(x * ((a * x + b) % s) % s * den % s);
        }
        acc / s as f64
    }
}

/// `|Sigma| s^(1/2) (a,s)^(1/2) / (a,b,s)`.
pub fn lemma1_ratio(value: f64, s: u64, a: u64, b: u64) -> f64 {
    value * (s as f64).sqrt() * (gcd(a, s) as f64).sqrt() / gcd(gcd(a, b), s) as f64
}

/// A critical point of `phi` modulo `p^alpha`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationaryPoint {
    pub x: u64,
    /// `(phi''(x), p)`.
    pub second_derivative_gcd: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationaryData {
    pub p: u64,
    pub n: u32,
    pub alpha: u32,
    /// Points of `R` found by Hensel lifting from the roots modulo `p`.
    pub points: Vec<StationaryPoint>,
    /// `#R` by enumerating every `x mod p^alpha`.
    pub enumerated: usize,
    /// Degree of `a c x^2 + 2 a d x + b d` modulo `p`.
    pub reduced_degree: u32,
    /// Whether the discriminant `4 a d (a d - b c)` is a `p`-unit.
    pub unit_discriminant: bool,
    /// `s^(-1/2) sum_{x in R} (phi''(x), p)^(1/2)`.
    pub bound: f64,
}

/// The critical set `R = {x mod p^alpha : phi'(x) = 0 mod p^alpha}` with
/// `n = 2 alpha` or `2 alpha + 1`, for the nondegenerate branch `p` not
/// dividing `a`.
pub fn stationary_points(ph: &RationalPhase) -> Result<StationaryData> {
    let (p, n) = ph.s.prime_power().ok_or_else(|| {
        Error::PreconditionViolation(format!("{} is not a prime power", ph.s.value()))
    })?;
    if n < 2 {
        return Err(Error::PreconditionViolation("stationary phase needs n >= 2".into()));
    }
    if ph.a % p == 0 {
        return Err(Error::DegenerateBranch);
    }
    let alpha = n / 2;
    let m = p.pow(alpha);
    let (a, b, c, d) = (ph.a % m, ph.b % m, ph.c % m, ph.d % m);
    // phi'(x) (c x + d)^2 = a c x^2 + 2 a d x + b d
    let numerator = |x: u64, md: u64| (a * c % md * (x * x % md) + 2 * a * d % md * x + b * d) % md;
    let admissible = |x: u64| gcd((c * x + d) % p, p) == 1 && ph.excluded.iter().all(|&(_, r)| x % p != r);

    let mut level: Vec<u64> = (0..p).filter(|&x| numerator(x, p) == 0).collect();
    let mut pk = p;
    for _ in 1..alpha {
        let next = pk * p;
        level = level
            .iter()
            .flat_map(|&r| (0..p).map(move |t| r + t * pk))
            .filter(|&x| numerator(x, next) == 0)
            .collect();
        pk = next;
    }
    level.retain(|&x| admissible(x));
    level.sort_unstable();

    let enumerated = (0..m).filter(|&x| admissible(x) && numerator(x, m) == 0).count();

    let mut points = Vec::with_capacity(level.len());
    for &x in &level {
        let den = inv_mod((c * x + d) % m, m).expect("admissible");
        let phi1 = numerator(x, m) * den % m * den % m;
        let phi2 = (2 * a + 2 * c * phi1) % m * den % m;
        debug_assert_eq!(phi2, 2 * a % m * den % m);
        points.push(StationaryPoint {
            x,
            second_derivative_gcd: gcd(phi2 % p, p),
        });
    }
    let (ac, ad2) = (ph.a * ph.c % p, 2 * ph.a * ph.d % p);
    let reduced_degree = if ac != 0 {
        2
    } else if ad2 != 0 {
        1
    } else {
        0
    };
    let disc = 4 * ph.a % p * (ph.d % p) % p * reduce((ph.a * ph.d) as i64 - (ph.b * ph.c) as i64, p) % p;
    let s = ph.s.value() as f64;
    let bound = points.iter().map(|pt| (pt.second_derivative_gcd as f64).sqrt()).sum::<f64>() / s.sqrt();
    Ok(StationaryData {
        p,
        n,
        alpha,
        points,
        enumerated,
        reduced_degree,
        unit_discriminant: disc % p != 0,
        bound,
    })
}

/// Reduced `b` values: `0` and `p^k` for `k < n`.
fn reduced_b(p: u64, n: u32) -> Vec<u64> {
    std::iter::once(0).chain((0..n).map(|k| p.pow(k))).collect()
}

/// Rational-phase audit over every prime power `s <= s_max`.
///
/// Odd `s` are observed against `lemma1.odd`; powers of two are counted,
/// tracked as `two_max_ratio` and failed against `lemma1.two`. On the branch
/// `n >= 2`, `(a, b, p) = 1` every instance also checks the stationary-phase
/// inequality with constant one, the Hensel count against a full
/// enumeration, the bound `#R <= deg` when the discriminant is a unit, and
/// `Sigma = 0` when `p | a`.
pub fn lemma1_audit(s_max: u64, reg: &Registry) -> Result<AuditReport> {
    if s_max < 2 {
        return Err(Error::PreconditionViolation(format!("s_max must be at least 2, got {s_max}")));
    }
    let mut b = AuditBuilder::new("lemma1", Metric::Ratio, reg.lemma1.odd, [2, s_max]);
    b.note("grid: d = 1, b in {0, p^k}, all a and c (exact symmetry reduction)");
    b.note("powers of two tracked separately as two_max_ratio");
    let two = reg.lemma1.two;
    for (p, n, s) in prime_powers(s_max) {
        let kernel = PhaseKernel::new(p, s);
        let bs = reduced_b(p, n);
        let parts: Vec<AuditBuilder> = (0..s)
            .into_par_iter()
            .map(|a| {
                let mut part = b.fork();
                for &bb in &bs {
                    for c in 0..s {
                        let value = kernel.sum(a, bb, c, None).norm();
                        let ratio = lemma1_ratio(value, s, a, bb);
                        let pr = params([("s", s as i64), ("a", a as i64), ("b", bb as i64), ("c", c as i64), ("d", 1)]);
                        if p == 2 {
                            part.count_only();
                            part.record_max("two_max_ratio", ratio);
                            if ratio > two {
                                part.fail(pr.clone(), ratio);
                            }
                        } else {
                            part.record_max("odd_max_ratio", ratio);
                            part.observe(pr.clone(), ratio);
                        }
                        if n >= 2 && gcd(gcd(a, bb), p) == 1 {
                            stationary_checks(&mut part, pr, p, s, a, bb, c, value);
                        }
                    }
                }
                part
            })
            .collect();
        for part in parts {
            b.merge(part);
        }
    }
    Ok(b.finish())
}

#[allow(clippy::too_many_arguments)]
fn stationary_checks(part: &mut AuditBuilder, pr: Params, p: u64, s: u64, a: u64, b: u64, c: u64, value: f64) {
    if a % p == 0 {
        part.record_max("degenerate_branch_max_abs", value);
        if value > VANISHING_TOL {
            part.fail(pr, value);
        }
        return;
    }
    let ph = RationalPhase::new(s, a as i64, b as i64, c as i64, 1).expect("d = 1");
    let data = stationary_points(&ph).expect("nondegenerate branch");
    let count = data.points.len();
    part.record_max("hensel_max_count", count as f64);
    if count != data.enumerated || (data.unit_discriminant && count > data.reduced_degree as usize) {
        part.fail(pr, count as f64);
        return;
    }
    if data.bound == 0.0 {
        part.record_max("empty_critical_set_max_abs", value);
        if value > VANISHING_TOL {
            part.fail(pr, value);
        }
    } else {
        let ratio = value / data.bound;
        part.record_max("stationary_phase_max_ratio", ratio);
        if ratio > 1.0 + VANISHING_TOL {
            part.fail(pr, ratio);
        }
    }
}

/// The same ratio with the class `x = e mod p` removed from the domain, over
/// every prime power `s <= s_max` and both orbit representatives `e = 0`
/// (with reduced `b`) and `e = 1` (with every `b`).
pub fn lemma1_exclusion_audit(s_max: u64, reg: &Registry) -> Result<AuditReport> {
    if s_max < 2 {
        return Err(Error::PreconditionViolation(format!("s_max must be at least 2, got {s_max}")));
    }
    let mut b = AuditBuilder::new("lemma1-excluded", Metric::Ratio, reg.lemma1.excluded, [2, s_max]);
    b.note("domain: one residue class mod p removed");
    for (p, n, s) in prime_powers(s_max) {
        let kernel = PhaseKernel::new(p, s);
        let reduced = reduced_b(p, n);
        let all: Vec<u64> = (0..s).collect();
        let parts: Vec<AuditBuilder> = (0..s)
            .into_par_iter()
            .map(|a| {
                let mut part = b.fork();
                for (e, bs) in [(0u64, &reduced), (1 % p, &all)] {
                    for &bb in bs.iter() {
                        for c in 0..s {
                            let value = kernel.sum(a, bb, c, Some(e)).norm();
                            let pr = params([
                                ("s", s as i64),
                                ("a", a as i64),
                                ("b", bb as i64),
                                ("c", c as i64),
                                ("excluded", e as i64),
                            ]);
                            part.observe(pr, lemma1_ratio(value, s, a, bb));
                        }
                    }
                }
                part
            })
            .collect();
        for part in parts {
            b.merge(part);
        }
    }
    Ok(b.finish())
}

/// Largest rational-phase ratio modulo `s` over the unreduced grid of every
/// `(a, b, c, d)` with `d` a unit. Exponential in size; for validating the
/// reduced grid on small `s`.
pub fn lemma1_max_unreduced(s: u64) -> f64 {
    let mut best = 0.0f64;
    for d in (0..s).filter(|&d| gcd(d, s) == 1) {
        for a in 0..s {
            for b in 0..s {
                for c in 0..s {
                    let ph = RationalPhase::new(s, a as i64, b as i64, c as i64, d as i64).expect("unit d");
                    let v = rational_phase_sum(&ph).sum.norm();
                    best = best.max(lemma1_ratio(v, s, a, b));
                }
            }
        }
    }
    best
}

/// Largest rational-phase ratio modulo the prime power `s` over the reduced grid.
pub fn lemma1_max_reduced(s: u64) -> Result<f64> {
    let (p, n) = Modulus::new(s)?
        .prime_power()
        .ok_or_else(|| Error::PreconditionViolation(format!("{s} is not a prime power")))?;
    let kernel = PhaseKernel::new(p, s);
    let mut best = 0.0f64;
    for a in 0..s {
        for &b in &reduced_b(p, n) {
            for c in 0..s {
                best = best.max(lemma1_ratio(kernel.sum(a, b, c, None).norm(), s, a, b));
            }
        }
    }
    Ok(best)
}

// ---------------------------------------------------------------------------
// Kloosterman correlations

/// Parameters of a correlation `K_{s1}(l1 x) K_{s2}(l2 x)` with
/// `l_i = a_i / b_i mod s_i`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorrelationParams {
    pub s1: u64,
    pub s2: u64,
    pub a1: i64,
    pub a2: i64,
    pub b1: i64,
    pub b2: i64,
    pub xi: i64,
}

impl CorrelationParams {
    pub fn new(s1: u64, s2: u64, a: [i64; 2], b: [i64; 2], xi: i64) -> Result<Self> {
        if s1 == 0 || s2 == 0 {
            return Err(Error::InvalidModulus(0));
        }
        for (bi, si) in [(b[0], s1), (b[1], s2)] {
            let g = crate::arith::gcd_signed(bi, si);
            if g != 1 {
                return Err(Error::NotCoprime(reduce(bi, si), si));
            }
        }
        Ok(Self {
            s1,
            s2,
            a1: a[0],
            a2: a[1],
            b1: b[0],
            b2: b[1],
            xi,
        })
    }

    /// `b1 = b2 = 1`, so `l_i = a_i`.
    pub fn from_ell(s1: u64, s2: u64, l1: i64, l2: i64, xi: i64) -> Result<Self> {
        Self::new(s1, s2, [l1, l2], [1, 1], xi)
    }

    pub fn ell1(&self) -> u64 {
        ell(self.a1, self.b1, self.s1)
    }

    pub fn ell2(&self) -> u64 {
        ell(self.a2, self.b2, self.s2)
    }

    /// `[s1, s2]`.
    pub fn lcm(&self) -> u64 {
        lcm(self.s1, self.s2)
    }

    /// `(s1, s2)`.
    pub fn gcd(&self) -> u64 {
        gcd(self.s1, self.s2)
    }

    /// `(w1, w2)` with `w_i = s_i / (s1, s2)`.
    pub fn w(&self) -> (u64, u64) {
        let g = self.gcd();
        (self.s1 / g, self.s2 / g)
    }

    /// `(s2^2 b2 a1 - s1^2 b1 a2) / (s1, s2)^2 = w2^2 b2 a1 - w1^2 b1 a2`.
    pub fn delta(&self) -> i128 {
        let (w1, w2) = self.w();
        (w2 as i128).pow(2) * self.b2 as i128 * self.a1 as i128
            - (w1 as i128).pow(2) * self.b1 as i128 * self.a2 as i128
    }

    /// `(Delta, xi, s1, s2)`.
    pub fn delta_xi_gcd(&self) -> u64 {
        let g = self.gcd();
        gcd(gcd(reduce_wide(self.delta(), g), reduce(self.xi, g)), g)
    }
}

fn reduce_wide(x: i128, m: u64) -> u64 {
    crate::arith::reduce_wide(x, m)
}

fn ell(a: i64, b: i64, s: u64) -> u64 {
    let binv = crate::arith::inv_mod_signed(b, s).expect("b coprime to s");
    reduce(a, s) * binv % s
}

/// `K_s(a)` for every residue `a mod s`.
fn kloosterman_table(s: u64) -> Vec<f64> {
    UnitTable::new(s).normalized_all()
}

/// `f(x) = K_{s1}(l1 x) K_{s2}(l2 x)` for `x mod [s1, s2]`.
fn correlation_profile(k1: &[f64], k2: &[f64], l1: u64, l2: u64) -> Vec<f64> {
    let (s1, s2) = (k1.len() as u64, k2.len() as u64);
    let l = lcm(s1, s2);
    (0..l)
        .map(|x| k1[(l1 * x % s1) as usize] * k2[(l2 * x % s2) as usize])
        .collect()
}

/// `[s1,s2]^-1 sum_x f(x) e_{[s1,s2]}(xi x)` for every `xi mod [s1, s2]`.
fn correlation_spectrum(profile: &[f64], roots: &RootTable) -> Vec<Complex64> {
    let l = profile.len() as u64;
    (0..l)
        .map(|xi| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, f) in profile.iter().enumerate() {
                if *f != 0.0 {
                    acc += roots.at(xi * x as u64 % l) * *f;
                }
            }
            acc / l as f64
        })
        .collect()
}

/// `Sigma = [s1,s2]^-1 sum_{x mod [s1,s2]} K_{s1}(l1 x) conj(K_{s2}(l2 x)) e_{[s1,s2]}(xi x)`
/// by direct summation.
pub fn correlation_sum(cp: &CorrelationParams) -> ExpSumValue {
    let l = cp.lcm();
    let profile = correlation_profile(&kloosterman_table(cp.s1), &kloosterman_table(cp.s2), cp.ell1(), cp.ell2());
    let roots = RootTable::new(l);
    let xi = reduce(cp.xi, l);
    let value: Complex64 = profile
        .iter()
        .enumerate()
        .map(|(x, f)| roots.at(xi * x as u64 % l) * *f)
        .sum::<Complex64>()
        / l as f64;
    ExpSumValue {
        value,
        modulus: Modulus::new(l).expect("positive"),
        kind: SumKind::Correlation,
        params: vec![cp.s1 as i64, cp.s2 as i64, cp.ell1() as i64, cp.ell2() as i64, cp.xi],
    }
}

/// Unit tables for the dual form of one `(s1, s2)` pair.
struct DualTables {
    s1: u64,
    s2: u64,
    l: u64,
    w1: u64,
    w2: u64,
    u1: Vec<(u64, u64)>,
    u2: Vec<(u64, u64)>,
    roots: RootTable,
}

impl DualTables {
    fn new(s1: u64, s2: u64) -> Self {
        let l = lcm(s1, s2);
        let g = gcd(s1, s2);
        Self {
            s1,
            s2,
            l,
            w1: s1 / g,
            w2: s2 / g,
            u1: UnitTable::new(s1).units().to_vec(),
            u2: UnitTable::new(s2).units().to_vec(),
            roots: RootTable::new(l),
        }
    }

    /// Dual form for every `xi mod [s1, s2]`, bucketing `x2` by the value of
    /// `w1 l2 / x2 mod [s1, s2]`.
    fn all_xi(&self, l1: u64, l2: u64) -> Vec<Complex64> {
        let l = self.l;
        let mut buckets: BTreeMap<u64, Vec<u64>> = BTreeMap::new();
        for &(x2, x2bar) in &self.u2 {
            buckets.entry(self.w1 * (l2 * x2bar % self.s2) % l).or_default().push(x2);
        }
        let norm = ((self.s1 * self.s2) as f64).sqrt();
        (0..l)
            .map(|xi| {
                let mut acc = Complex64::new(0.0, 0.0);
                for &(x1, x1bar) in &self.u1 {
                    let target = (self.w2 * (l1 * x1bar % self.s1) + xi) % l;
                    if let Some(xs) = buckets.get(&target) {
                        for &x2 in xs {
                            let k = (self.w2 * x1 % l + l - self.w1 * x2 % l) % l;
                            acc += self.roots.at(k);
                        }
                    }
                }
                acc / norm
            })
            .collect()
    }
}

/// `Sigma` from the dual form
/// `(s1 s2)^(-1/2) sum_{x1, x2 : w1 l2/x2 = w2 l1/x1 + xi} e_{[s1,s2]}(w2 x1 - w1 x2)`,
/// obtained by opening both Kloosterman sums and summing over `x`.
pub fn correlation_parseval(cp: &CorrelationParams) -> Complex64 {
    let l = cp.lcm();
    let (w1, w2) = cp.w();
    let (l1, l2) = (cp.ell1(), cp.ell2());
    let xi = reduce(cp.xi, l);
    let roots = RootTable::new(l);
    let mut acc = Complex64::new(0.0, 0.0);
    for &(x1, x1bar) in UnitTable::new(cp.s1).units() {
        for &(x2, x2bar) in UnitTable::new(cp.s2).units() {
            let lhs = w1 * (l2 * x2bar % cp.s2) % l;
            let rhs = (w2 * (l1 * x1bar % cp.s1) + xi) % l;
            if lhs == rhs {
                acc += roots.at((w2 * x1 % l + l - w1 * x2 % l) % l);
            }
        }
    }
    acc / ((cp.s1 * cp.s2) as f64).sqrt()
}

/// `Sigma` as the product of its prime-power parts: for `p | [s1, s2]` the
/// part has moduli the `p`-parts `s_ip`, `l_i (s_i / s_ip)^-2` and
/// `xi ([s1,s2] / [s1,s2]_p)^-1`.
pub fn correlation_factored(cp: &CorrelationParams) -> Complex64 {
    let l = cp.lcm();
    let (l1, l2) = (cp.ell1() as i64, cp.ell2() as i64);
    let mut product = Complex64::new(1.0, 0.0);
    for (p, _) in factorize(l) {
        let (s1p, s2p, lp) = (p_part(cp.s1, p), p_part(cp.s2, p), p_part(l, p));
        let twist = |li: i64, si: u64, sip: u64| -> i64 {
            let r = inv_mod((si / sip) % sip, sip).unwrap_or(0);
            (reduce(li, sip) * r % sip * r % sip) as i64
        };
        let xip = reduce(cp.xi, lp) * inv_mod((l / lp) % lp, lp).unwrap_or(0) % lp;
        let part = CorrelationParams::from_ell(s1p, s2p, twist(l1, cp.s1, s1p), twist(l2, cp.s2, s2p), xip as i64)
            .expect("b = 1");
        product *= correlation_sum(&part).value;
    }
    product
}

/// Closed form for prime powers `s1 | s2`, `s1 < s2`, of one prime `p` with
/// `l1 l2 xi` prime to `p`:
/// `Sigma = (s1 s2)^(-1/2) e_{s2}(-(w2^2 l1 + l2) / xi) s1^(1/2) K_{s1}(l1 l2 / xi^2)`.
pub fn correlation_closed_form(cp: &CorrelationParams) -> Result<Complex64> {
    let (s1, s2) = (cp.s1, cp.s2);
    let (p1, p2) = match (Modulus::new(s1)?.prime_power(), Modulus::new(s2)?.prime_power()) {
        (Some((p1, _)), Some((p2, _))) => (p1, p2),
        _ => return Err(Error::PreconditionViolation("moduli must be prime powers".into())),
    };
    if p1 != p2 || s1 >= s2 || s2 % s1 != 0 {
        return Err(Error::PreconditionViolation(format!(
            "need s1 | s2 strictly for one prime, got ({s1}, {s2})"
        )));
    }
    let p = p1;
    let (l1, l2) = (cp.ell1(), cp.ell2());
    let xi = reduce(cp.xi, s2);
    if (l1 % p) * (l2 % p) % p * (xi % p) % p == 0 {
        return Err(Error::PreconditionViolation(format!("l1 l2 xi must be prime to {p}")));
    }
    let w2 = s2 / s1;
    let xibar2 = inv_mod(xi, s2).expect("unit");
    let shift = (w2 * w2 % s2 * l1 % s2 + l2) % s2 * xibar2 % s2;
    let phase = RootTable::new(s2).at((s2 - shift) % s2);
    let xibar1 = xibar2 % s1;
    let arg = l1 * (l2 % s1) % s1 * xibar1 % s1 * xibar1 % s1;
    let k = UnitTable::new(s1).normalized(arg);
    Ok(phase * (k * (s1 as f64).sqrt() / ((s1 * s2) as f64).sqrt()))
}

/// `|Sigma - closed form|` with `Sigma` by direct summation.
pub fn exact_identity_check(cp: &CorrelationParams) -> Result<f64> {
    let closed = correlation_closed_form(cp)?;
    Ok((correlation_sum(cp).value - closed).norm())
}

/// Ratios of `|Sigma|` to the weak and strong bound shapes.
pub fn lemma2_ratios(value: f64, cp: &CorrelationParams) -> (f64, f64) {
    let l = cp.lcm() as f64;
    let dxg = cp.delta_xi_gcd() as f64;
    let xg = gcd(reduce(cp.xi, cp.gcd()), cp.gcd()) as f64;
    let weak = value * l.sqrt() / dxg.sqrt();
    let strong = value * l.sqrt() * xg.sqrt() / dxg;
    (weak, strong)
}

/// Pairs `(p^i, p^j)` with `max(i, j) >= 1` and `p^max(i,j) <= s_max`.
fn prime_power_pairs(s_max: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for (p, n, s) in prime_powers(s_max) {
        for k in 0..=n {
            out.push((p.pow(k), s));
            if k < n {
                out.push((s, p.pow(k)));
            }
        }
    }
    out
}

/// All `(s1, s2)` with `[s1, s2] <= l_max`, ordered by `[s1, s2]` then `s1`.
pub fn modulus_pairs(l_max: u64) -> Vec<(u64, u64)> {
    let mut out = Vec::new();
    for l in 1..=l_max {
        let ds = divisors(l);
        for &s1 in &ds {
            for &s2 in &ds {
                if lcm(s1, s2) == l {
                    out.push((s1, s2));
                }
            }
        }
    }
    out
}

/// Representatives `l1 | s1` (with `s1` standing for zero) of the unit
/// orbits modulo `s1`.
fn orbit_representatives(s1: u64) -> Vec<u64> {
    divisors(s1).into_iter().map(|d| d % s1).collect()
}

/// Correlation bound audit over prime-power pairs with `[s1, s2] <= s_max`,
/// every `l2`, every `xi` and orbit representatives for `l1`. The weak
/// shape is observed against `lemma2.weak`; the strong shape is tracked as
/// `strong_max_ratio` and failed against `lemma2.strong`.
pub fn lemma2_bound_audit(s_max: u64, reg: &Registry) -> Result<AuditReport> {
    if s_max < 2 {
        return Err(Error::PreconditionViolation(format!("s_max must be at least 2, got {s_max}")));
    }
    let mut b = AuditBuilder::new("lemma2", Metric::Ratio, reg.lemma2.weak, [2, s_max]);
    b.note("prime-power pairs; composite moduli follow from the product formula");
    b.note("grid: l1 over unit-orbit representatives, every l2 and xi");
    let strong = reg.lemma2.strong;
    for (s1, s2) in prime_power_pairs(s_max) {
        let (k1, k2) = (kloosterman_table(s1), kloosterman_table(s2));
        let l = lcm(s1, s2);
        let roots = RootTable::new(l);
        let tasks: Vec<(u64, u64)> = orbit_representatives(s1)
            .into_iter()
            .flat_map(|l1| (0..s2).map(move |l2| (l1, l2)))
            .collect();
        let parts: Vec<AuditBuilder> = tasks
            .par_iter()
            .map(|&(l1, l2)| {
                let mut part = b.fork();
                let spectrum = correlation_spectrum(&correlation_profile(&k1, &k2, l1, l2), &roots);
                for (xi, v) in spectrum.iter().enumerate() {
                    let cp = CorrelationParams::from_ell(s1, s2, l1 as i64, l2 as i64, xi as i64).expect("b = 1");
                    let (weak, st) = lemma2_ratios(v.norm(), &cp);
                    let pr = params([
                        ("s1", s1 as i64),
                        ("s2", s2 as i64),
                        ("l1", l1 as i64),
                        ("l2", l2 as i64),
                        ("xi", xi as i64),
                    ]);
                    part.record_max("strong_max_ratio", st);
                    if st > strong {
                        part.fail(pr.clone(), st);
                    }
                    part.observe(pr, weak);
                }
                part
            })
            .collect();
        for part in parts {
            b.merge(part);
        }
    }
    Ok(b.finish())
}

/// Direct sum against the dual form for every `(s1, s2)` with
/// `[s1, s2] <= l_max`, every `xi`, `l1` over orbit representatives and
/// `l2` in `{1, 2, 3} mod s2`.
pub fn parseval_audit(l_max: u64) -> Result<AuditReport> {
    if l_max < 1 {
        return Err(Error::PreconditionViolation("l_max must be positive".into()));
    }
    let mut b = AuditBuilder::new("lemma2-dual-form", Metric::Residual, IDENTITY_TOL, [1, l_max]);
    let pairs = modulus_pairs(l_max);
    let parts: Vec<AuditBuilder> = pairs
        .par_iter()
        .map(|&(s1, s2)| {
            let mut part = b.fork();
            let (k1, k2) = (kloosterman_table(s1), kloosterman_table(s2));
            let dual = DualTables::new(s1, s2);
            let mut l2s: Vec<u64> = [1, 2, 3].iter().map(|v| v % s2).collect();
            l2s.dedup();
            for l1 in orbit_representatives(s1) {
                for &l2 in &l2s {
                    let direct = correlation_spectrum(&correlation_profile(&k1, &k2, l1, l2), &dual.roots);
                    let other = dual.all_xi(l1, l2);
                    for (xi, (u, v)) in direct.iter().zip(&other).enumerate() {
                        let pr = params([
                            ("s1", s1 as i64),
                            ("s2", s2 as i64),
                            ("l1", l1 as i64),
                            ("l2", l2 as i64),
                            ("xi", xi as i64),
                        ]);
                        part.observe(pr, (u - v).norm());
                    }
                }
            }
            part
        })
        .collect();
    for part in parts {
        b.merge(part);
    }
    Ok(b.finish())
}

/// Closed form against direct summation for `(s1, s2) = (p^i, p^j)` over
/// every `l1 mod s1`, `l2 mod s2` prime to `p` and every `xi mod s2`; for
/// `p | xi` the sum must vanish.
pub fn exact_identity_audit(pairs: &[(u64, u64)]) -> Result<AuditReport> {
    let hi = pairs.iter().map(|p| p.1).max().unwrap_or(1);
    let mut b = AuditBuilder::new("lemma2-closed-form", Metric::Residual, IDENTITY_TOL, [1, hi]);
    for &(s1, s2) in pairs {
        let p = match Modulus::new(s2)?.prime_power() {
            Some((p, _)) => p,
            None => return Err(Error::PreconditionViolation(format!("{s2} is not a prime power"))),
        };
        let (k1, k2) = (kloosterman_table(s1), kloosterman_table(s2));
        let roots = RootTable::new(s2);
        let tasks: Vec<(u64, u64)> = (0..s1)
            .filter(|l1| l1 % p != 0)
            .flat_map(|l1| (0..s2).filter(|l2| l2 % p != 0).map(move |l2| (l1, l2)))
            .collect();
        let parts: Vec<AuditBuilder> = tasks
            .par_iter()
            .map(|&(l1, l2)| {
                let mut part = b.fork();
                let spectrum = correlation_spectrum(&correlation_profile(&k1, &k2, l1, l2), &roots);
                for (xi, v) in spectrum.iter().enumerate() {
                    let pr = params([
                        ("s1", s1 as i64),
                        ("s2", s2 as i64),
                        ("l1", l1 as i64),
                        ("l2", l2 as i64),
                        ("xi", xi as i64),
                    ]);
                    if xi as u64 % p == 0 {
                        part.record_max("vanishing_max_abs", v.norm());
                        part.observe(pr, v.norm());
                    } else {
                        let cp = CorrelationParams::from_ell(s1, s2, l1 as i64, l2 as i64, xi as i64).expect("b = 1");
                        let closed = correlation_closed_form(&cp).expect("preconditions hold");
                        part.observe(pr, (v - closed).norm());
                    }
                }
                part
            })
            .collect();
        for part in parts {
            b.merge(part);
        }
    }
    Ok(b.finish())
}

// ---------------------------------------------------------------------------
// Incomplete correlations

/// Periodized transform `P_j = sum_{|xi| <= K, xi = j mod L} V^(xi X / L)`.
pub struct PoissonKernel {
    l: u64,
    x: f64,
    cutoff: u64,
    tail: f64,
    budget: f64,
    periodized: Vec<Complex64>,
}

impl PoissonKernel {
    /// Cutoff certified for `|Sigma(xi)| <= amplitude`.
    pub fn new(v: &dyn FourierPair, l: u64, x: f64, amplitude: f64) -> Result<Self> {
        let scale = x / l as f64;
        let budget = TAIL_FRACTION * POISSON_TOL;
        let tail_at = |k: u64| -> Result<f64> {
            let t = v.fourier_tail(scale, k).ok_or(Error::TruncationInsufficient {
                cutoff: k,
                tail: f64::INFINITY,
                budget,
            })?;
            // fourier_tail bounds sum |scale f^(scale h)|
            Ok(x * amplitude * t / scale)
        };
        let mut hi = 1u64;
        while tail_at(hi)? > budget {
            hi *= 2;
            if hi > 1 << 24 {
                return Err(Error::TruncationInsufficient {
                    cutoff: hi,
                    tail: tail_at(hi)?,
                    budget,
                });
            }
        }
        let mut lo = 0u64;
        while lo < hi {
            let mid = (lo + hi) / 2;
            if tail_at(mid)? <= budget {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        let cutoff = lo;
        let values: Vec<Complex64> = (1..=cutoff)
            .into_par_iter()
            .map(|h| v.fourier(scale * h as f64))
            .collect::<Result<_>>()?;
        let mut periodized = vec![Complex64::new(0.0, 0.0); l as usize];
        periodized[0] += v.fourier(0.0)?;
        for (k, val) in values.iter().enumerate() {
            let h = k as u64 + 1;
            periodized[(h % l) as usize] += *val;
            // V is real, so V^(-t) = conj V^(t)
            periodized[((l - h % l) % l) as usize] += val.conj();
        }
        Ok(Self {
            l,
            x,
            cutoff,
            tail: tail_at(cutoff)?,
            budget,
            periodized,
        })
    }

    pub fn cutoff(&self) -> u64 {
        self.cutoff
    }

    /// `X sum_j P_j Sigma(j)`.
    fn apply(&self, spectrum: &[Complex64]) -> Complex64 {
        debug_assert_eq!(spectrum.len() as u64, self.l);
        self.periodized.iter().zip(spectrum).map(|(p, s)| p * s).sum::<Complex64>() * self.x
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IncompleteCorrelation {
    /// `sum_n V(n/X) K_{s1}(l1 n) K_{s2}(l2 n)` summed directly.
    pub direct: f64,
    /// `X sum_{|xi| <= K} V^(xi X / [s1,s2]) Sigma(xi)`.
    pub poisson: Complex64,
    pub residual: f64,
    pub cutoff: u64,
    pub tail_bound: f64,
    pub tail_budget: f64,
    /// `X (Delta, s1, s2)^(1/2) / [s1,s2]^(1/2) + [s1,s2]^(1/2)`.
    pub envelope: f64,
    pub ratio: f64,
}

fn incomplete_with(
    cp: &CorrelationParams,
    v: &dyn FourierPair,
    x: f64,
    k1: &[f64],
    k2: &[f64],
    roots: &RootTable,
    kernel: &PoissonKernel,
) -> IncompleteCorrelation {
    let (l1, l2) = (cp.ell1(), cp.ell2());
    let (s1, s2) = (cp.s1, cp.s2);
    let (lo, hi) = v.support();
    let first = (lo * x).ceil().max(1.0) as u64;
    let last = (hi * x).floor() as u64;
    let direct: f64 = (first..=last)
        .map(|n| v.eval(n as f64 / x) * k1[(l1 * (n % s1) % s1) as usize] * k2[(l2 * (n % s2) % s2) as usize])
        .sum();
    let spectrum = correlation_spectrum(&correlation_profile(k1, k2, l1, l2), roots);
    let poisson = kernel.apply(&spectrum);
    let l = cp.lcm() as f64;
    let g = cp.gcd();
    let dg = gcd(reduce_wide(cp.delta(), g), g) as f64;
    let envelope = x * dg.sqrt() / l.sqrt() + l.sqrt();
    IncompleteCorrelation {
        direct,
        poisson,
        residual: (poisson - direct).norm(),
        cutoff: kernel.cutoff,
        tail_bound: kernel.tail,
        tail_budget: kernel.budget,
        envelope,
        ratio: direct.abs() / envelope,
    }
}

/// Smoothed correlation by direct summation and through Poisson summation
/// against the complete sums.
pub fn incomplete_correlation(cp: &CorrelationParams, v: &dyn FourierPair, x: f64) -> Result<IncompleteCorrelation> {
    if !(x >= 1.0) {
        return Err(Error::PreconditionViolation(format!("X = {x} must be at least 1")));
    }
    let l = cp.lcm();
    let kernel = PoissonKernel::new(v, l, x, l as f64)?;
    Ok(incomplete_with(
        cp,
        v,
        x,
        &kloosterman_table(cp.s1),
        &kloosterman_table(cp.s2),
        &RootTable::new(l),
        &kernel,
    ))
}

/// Incomplete-correlation audit over every `(s1, s2)` with
/// `[s1, s2] <= l_max`, `l_i in {1, 2, 3, 6} mod s_i` and each `X`. The
/// envelope ratio is observed against `incomplete.envelope`; the Poisson
/// residual is tracked as `max_poisson_residual` and failed above its
/// tolerance.
pub fn incomplete_audit(l_max: u64, xs: &[f64], v: &(dyn FourierPair + Sync), reg: &Registry) -> Result<AuditReport> {
    if l_max < 1 || xs.is_empty() {
        return Err(Error::PreconditionViolation("empty incomplete-correlation grid".into()));
    }
    let mut b = AuditBuilder::new("incomplete", Metric::Ratio, reg.incomplete.envelope, [1, l_max]);
    b.note("l_i in {1, 2, 3, 6} mod s_i");
    let pairs = modulus_pairs(l_max);
    for &x in xs {
        let kernels: Vec<PoissonKernel> = (1..=l_max)
            .into_par_iter()
            .map(|l| PoissonKernel::new(v, l, x, l as f64))
            .collect::<Result<_>>()?;
        let parts: Vec<AuditBuilder> = pairs
            .par_iter()
            .map(|&(s1, s2)| {
                let mut part = b.fork();
                let (k1, k2) = (kloosterman_table(s1), kloosterman_table(s2));
                let l = lcm(s1, s2);
                let roots = RootTable::new(l);
                let kernel = &kernels[(l - 1) as usize];
                let mut l1s: Vec<u64> = [1, 2, 3, 6].iter().map(|v| v % s1).collect();
                let mut l2s: Vec<u64> = [1, 2, 3, 6].iter().map(|v| v % s2).collect();
                l1s.sort_unstable();
                l1s.dedup();
                l2s.sort_unstable();
                l2s.dedup();
                for &l1 in &l1s {
                    for &l2 in &l2s {
                        let cp = CorrelationParams::from_ell(s1, s2, l1 as i64, l2 as i64, 0).expect("b = 1");
                        let r = incomplete_with(&cp, v, x, &k1, &k2, &roots, kernel);
                        let pr = params([
                            ("s1", s1 as i64),
                            ("s2", s2 as i64),
                            ("l1", l1 as i64),
                            ("l2", l2 as i64),
                            ("X", x as i64),
                        ]);
                        part.record_max("max_poisson_residual", r.residual);
                        if !(r.residual <= POISSON_TOL) {
                            part.fail(pr.clone(), r.residual);
                        }
                        part.observe(pr, r.ratio);
                    }
                }
                part
            })
            .collect();
        for part in parts {
            b.merge(part);
        }
    }
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weight::{InertFunction, ZeroFunction};

    fn rp(s: u64, a: i64, b: i64, c: i64, d: i64) -> RationalPhase {
        RationalPhase::new(s, a, b, c, d).unwrap()
    }

    #[test]
    fn quadratic_phase_example() {
        let v = rational_phase_sum(&rp(5, 1, 0, 0, 1));
        assert_eq!(v.domain_size, 5);
        assert!((v.sum.norm() - 1.0 / 5f64.sqrt()).abs() < 1e-10);
        let zero = rational_phase_sum(&rp(9, 0, 0, 4, 1));
        // c x + 1 is a unit unless x = 2 mod 3
        assert_eq!(zero.domain_size, 6);
        assert!((zero.sum.value - Complex64::new(6.0 / 9.0, 0.0)).norm() < 1e-12);
        assert!(matches!(RationalPhase::new(9, 1, 1, 1, 3), Err(Error::NotCoprime(3, 9))));
    }

    #[test]
    fn empty_domain_is_flagged() {
        let ph = rp(5, 1, 1, 0, 1)
            .excluding(5, 0)
            .unwrap()
            .excluding(5, 1)
            .unwrap()
            .excluding(5, 2)
            .unwrap()
            .excluding(5, 3)
            .unwrap()
            .excluding(5, 4)
            .unwrap();
        let r = rational_phase_sum(&ph);
        assert_eq!(r.domain_size, 0);
        assert_eq!(r.sum.value, Complex64::new(0.0, 0.0));
        assert!(rp(9, 1, 1, 1, 1).excluding(5, 1).is_err());
    }

    #[test]
    fn prime_case_bounds() {
        for p in [3u64, 5, 7, 11] {
            let mut worst: f64 = 0.0;
            for a in 1..p {
                for b in 0..p {
                    for c in 0..p {
                        let v = rational_phase_sum(&rp(p, a as i64, b as i64, c as i64, 1)).sum.norm();
                        worst = worst.max(lemma1_ratio(v, p, a, b));
                    }
                }
            }
            assert!(worst <= 2.0 + 1e-12, "p={p}: {worst}");
            // p | a, p | b: (a, b, s) = p
            let v = rational_phase_sum(&rp(p, 0, 0, 1, 1)).sum.norm();
            assert!(lemma1_ratio(v, p, 0, 0) <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn kernel_matches_definition() {
        for (p, s) in [(3u64, 9u64), (2, 8), (5, 25)] {
            let k = PhaseKernel::new(p, s);
            for a in 0..s {
                for b in [0, 1, p] {
                    for c in 0..s {
                        let direct = rational_phase_sum(&rp(s, a as i64, b as i64, c as i64, 1)).sum.value;
                        assert!((k.sum(a, b, c, None) - direct).norm() < 1e-12);
                        let excl = rational_phase_sum(&rp(s, a as i64, b as i64, c as i64, 1).excluding(p, 1).unwrap());
                        assert!((k.sum(a, b, c, Some(1)) - excl.sum.value).norm() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn reduced_grid_attains_full_maximum() {
        for s in [2u64, 3, 4, 5, 7, 8, 9, 16, 25, 27] {
            let full = lemma1_max_unreduced(s);
            let reduced = lemma1_max_reduced(s).unwrap();
            assert!((full - reduced).abs() < 1e-12, "s={s}: {full} vs {reduced}");
        }
    }

    #[test]
    fn stationary_points_examples() {
        // 3x^2 + 2x + 0 = x (3x + 2) has the simple roots 0 and 1 mod 5
        let data = stationary_points(&rp(25, 1, 0, 3, 1)).unwrap();
        assert_eq!(data.alpha, 1);
        assert_eq!(data.enumerated, data.points.len());
        assert!(data.points.len() <= 2);
        assert!(data.points.iter().all(|p| p.second_derivative_gcd == 1));
        let direct = rational_phase_sum(&rp(25, 1, 0, 3, 1)).sum.norm();
        assert!(direct <= data.bound + 1e-12);

        let data = stationary_points(&rp(16, 1, 1, 1, 1)).unwrap();
        assert!(data.points.iter().all(|p| p.second_derivative_gcd == 2));
        let direct = rational_phase_sum(&rp(16, 1, 1, 1, 1)).sum.norm();
        assert!(direct <= data.bound + 1e-12);

        assert!(matches!(stationary_points(&rp(25, 5, 1, 1, 1)), Err(Error::DegenerateBranch)));
        assert!(rational_phase_sum(&rp(25, 5, 1, 1, 1)).sum.norm() < 1e-12);
        assert!(stationary_points(&rp(5, 1, 1, 1, 1)).is_err());
    }

    #[test]
    fn hensel_against_enumeration() {
        for (_, n, s) in prime_powers(125) {
            if n < 2 {
                continue;
            }
            for a in 1..s.min(20) {
                for b in 0..s.min(12) {
                    for c in 0..s.min(12) {
                        let ph = rp(s, a as i64, b as i64, c as i64, 1);
                        if let Ok(d) = stationary_points(&ph) {
                            assert_eq!(d.points.len(), d.enumerated, "s={s} a={a} b={b} c={c}");
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn small_lemma1_audit() {
        let reg = Registry::builtin();
        let r = lemma1_audit(32, &reg).unwrap();
        assert!(r.recorded["odd_max_ratio"] > 0.5);
        assert!(r.recorded["stationary_phase_max_ratio"] <= 1.0 + 1e-9);
        assert_eq!(r.recorded["degenerate_branch_max_abs"] < 1e-9, true);
        assert!(lemma1_audit(1, &reg).is_err());
    }

    #[test]
    fn ell_and_delta() {
        let cp = CorrelationParams::new(5, 25, [2, 3], [3, 7], 1).unwrap();
        assert_eq!(cp.ell1(), 4); // 2 / 3 mod 5
        assert_eq!(cp.ell2() * 7 % 25, 3);
        assert_eq!(cp.w(), (1, 5));
        assert_eq!(cp.delta(), 25 * 7 * 2 - 3 * 3);
        let (w1, w2) = cp.w();
        assert_eq!(w1 * cp.s2, cp.s1 * w2);
        assert!(matches!(CorrelationParams::new(5, 25, [1, 1], [5, 1], 0), Err(Error::NotCoprime(0, 5))));
    }

    #[test]
    fn diagonal_correlation_is_mean_square() {
        for l in 1..5 {
            let cp = CorrelationParams::from_ell(5, 5, l, l, 0).unwrap();
            let v = correlation_sum(&cp).value;
            let t = UnitTable::new(5);
            let mean: f64 = (0..5).map(|x| t.normalized(l as u64 * x % 5).powi(2)).sum::<f64>() / 5.0;
            assert!(v.im.abs() < 1e-12 && (v.re - mean).abs() < 1e-12 && v.re > 0.0);
        }
    }

    #[test]
    fn vanishing_cases() {
        for xi in 0..27 {
            let cp = CorrelationParams::from_ell(9, 27, 3, 2, xi).unwrap();
            assert!(correlation_sum(&cp).norm() < 1e-12);
        }
        for l2 in 1..25 {
            let cp = CorrelationParams::from_ell(5, 25, 1, l2, 10).unwrap();
            assert!(correlation_sum(&cp).norm() < 1e-12);
        }
    }

    #[test]
    fn closed_form_examples() {
        let cp = CorrelationParams::from_ell(5, 25, 1, 1, 1).unwrap();
        assert!(exact_identity_check(&cp).unwrap() < 1e-10);
        for (s1, s2) in [(3u64, 9u64), (3, 27), (9, 27), (5, 125), (2, 8), (4, 16)] {
            for l1 in (1..s1).filter(|x| gcd(*x, s1) == 1) {
                for l2 in (1..s2).filter(|x| gcd(*x, s2) == 1).take(6) {
                    for xi in (1..s2).filter(|x| gcd(*x, s2) == 1).take(6) {
                        let cp = CorrelationParams::from_ell(s1, s2, l1 as i64, l2 as i64, xi as i64).unwrap();
                        assert!(exact_identity_check(&cp).unwrap() < 1e-10, "{cp:?}");
                    }
                }
            }
        }
        let bad = CorrelationParams::from_ell(5, 25, 1, 1, 5).unwrap();
        assert!(matches!(exact_identity_check(&bad), Err(Error::PreconditionViolation(_))));
        let bad = CorrelationParams::from_ell(5, 15, 1, 1, 1).unwrap();
        assert!(exact_identity_check(&bad).is_err());
    }

    #[test]
    fn dual_form_matches() {
        for (s1, s2) in [(5u64, 5u64), (5, 25), (4, 6), (12, 18), (7, 1), (9, 6)] {
            let dual = DualTables::new(s1, s2);
            for l1 in 0..s1.min(7) {
                for l2 in 0..s2.min(7) {
                    let all = dual.all_xi(l1, l2);
                    for xi in 0..lcm(s1, s2) {
                        let cp = CorrelationParams::from_ell(s1, s2, l1 as i64, l2 as i64, xi as i64).unwrap();
                        let direct = correlation_sum(&cp).value;
                        assert!((correlation_parseval(&cp) - direct).norm() < 1e-10);
                        assert!((all[xi as usize] - direct).norm() < 1e-10);
                    }
                }
            }
        }
    }

    #[test]
    fn product_over_primes() {
        for (s1, s2) in modulus_pairs(120) {
            if factorize(lcm(s1, s2)).len() < 2 {
                continue;
            }
            for (l1, l2, xi) in [(1i64, 1i64, 0i64), (1, 2, 1), (5, 7, 11), (6, 1, 13)] {
                let cp = CorrelationParams::from_ell(s1, s2, l1, l2, xi).unwrap();
                let r = (correlation_factored(&cp) - correlation_sum(&cp).value).norm();
                assert!(r < 1e-9, "{cp:?}: {r}");
            }
        }
    }

    #[test]
    fn change_of_variables() {
        for (s1, s2) in [(5u64, 25u64), (6, 10), (9, 9), (8, 12)] {
            let l = lcm(s1, s2);
            for (a1, a2, b1, b2, xi) in [(1i64, 2i64, 7i64, 11i64, 3i64), (4, 1, 13, 1, 0), (2, 3, 1, 17, 5)] {
                if gcd(b1 as u64 * b2 as u64, l) != 1 {
                    continue;
                }
                let cp = CorrelationParams::new(s1, s2, [a1, a2], [b1, b2], xi).unwrap();
                let moved = CorrelationParams::from_ell(s1, s2, a1 * b2, a2 * b1, xi * b1 * b2).unwrap();
                assert!((correlation_sum(&cp).value - correlation_sum(&moved).value).norm() < 1e-12);
            }
        }
    }

    #[test]
    fn equal_moduli_delegate_to_rational_phase() {
        for s in [5u64, 7, 9, 25] {
            for l1 in (1..s).filter(|x| gcd(*x, s) == 1) {
                for l2 in (1..s).filter(|x| gcd(*x, s) == 1) {
                    for xi in 0..s {
                        let cp = CorrelationParams::from_ell(s, s, l1 as i64, l2 as i64, xi as i64).unwrap();
                        let p = factorize(s)[0].0;
                        let ph = RationalPhase::new(s, xi as i64, l1 as i64 - l2 as i64, xi as i64, l1 as i64)
                            .unwrap()
                            .excluding(p, 0)
                            .unwrap();
                        let r = rational_phase_sum(&ph).sum.value;
                        assert!((correlation_sum(&cp).value - r).norm() < 1e-12, "{cp:?}");
                    }
                }
            }
        }
    }

    #[test]
    fn incomplete_examples() {
        let v = InertFunction::standard();
        let cp = CorrelationParams::from_ell(7, 7, 1, 3, 0).unwrap();
        let r = incomplete_correlation(&cp, &v, 50.0).unwrap();
        assert!(r.residual < 1e-8, "{r:?}");
        assert!(r.tail_bound <= r.tail_budget);
        let z = incomplete_correlation(&cp, &ZeroFunction, 50.0).unwrap();
        assert_eq!(z.direct, 0.0);
        assert!(z.poisson.norm() == 0.0);
        for (s1, s2, x) in [(4u64, 6u64, 10.0), (25, 5, 100.0), (1, 9, 10.0), (10, 10, 1000.0)] {
            let cp = CorrelationParams::from_ell(s1, s2, 1, 2, 0).unwrap();
            let r = incomplete_correlation(&cp, &v, x).unwrap();
            assert!(r.residual < 1e-8, "{s1} {s2} {x}: {r:?}");
        }
        assert!(incomplete_correlation(&cp, &v, 0.5).is_err());
    }
}
