//! The additive formula for a character, amplification, the `F - eps^-1 O`
//! decomposition of the dyadic sum, and the `Pi_0` evaluation chain.

use std::collections::HashMap;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::arith::{gcd, inv_mod, is_prime, primes_in, reduce};
use crate::character::DirichletCharacter;
use crate::coeffs::{d3, CoefficientSource};
use crate::error::{Error, Result};
use crate::expsums::{gauss_eps, ramanujan, twisted_with, UnitTable};
use crate::arith::Modulus;
use crate::character::CharacterGroup;
use crate::report::{params, AuditBuilder, AuditReport, Metric};
use crate::roots::{e, RootTable};
use crate::weight::{
    certify_truncation, plan_truncation, shared_bump, BumpWeight, InertFunction, TruncationPlan,
};

/// Residual target for the character formula.
pub const FORMULA_TOL: f64 = 1e-8;
/// Residual target for the decomposition.
pub const DECOMPOSITION_TOL: f64 = 1e-6;

fn inverse_table(q: u64) -> Vec<u64> {
    (0..q).map(|x| inv_mod(x, q).unwrap_or(0)).collect()
}

/// `alpha_r = eps(chi-bar)^-1 R^-1 W(r/R) chi(r)` for integers `r` in `[R, 2R]`.
#[derive(Clone, Debug)]
pub struct AlphaSequence {
    r_scale: f64,
    q: u64,
    entries: Vec<(u64, Complex64)>,
    /// Support points divisible by `q`; their `alpha_r` vanish with `chi(r)`.
    multiples_of_q: Vec<u64>,
}

impl AlphaSequence {
    pub fn new(chi: &DirichletCharacter, r_scale: f64) -> Result<Self> {
        Self::with_weight(chi, r_scale, shared_bump())
    }

    pub fn with_weight(chi: &DirichletCharacter, r_scale: f64, w: &BumpWeight) -> Result<Self> {
        let q = chi.modulus();
        if !(r_scale >= 1.0) {
            return Err(Error::PreconditionViolation(format!("R = {r_scale} must be at least 1")));
        }
        if r_scale >= q as f64 {
            return Err(Error::SupportCollision(format!(
                "R = {r_scale} is not below q = {q}"
            )));
        }
        let eps_inv = gauss_eps(chi)?.inv();
        let lo = r_scale.ceil() as u64;
        let hi = (2.0 * r_scale).floor() as u64;
        let mut entries = Vec::new();
        let mut multiples_of_q = Vec::new();
        for r in lo..=hi {
            if r % q == 0 {
                multiples_of_q.push(r);
            }
            let a = eps_inv * chi.at(r % q) * (w.eval(r as f64 / r_scale) / r_scale);
            entries.push((r, a));
        }
        Ok(Self {
            r_scale,
            q,
            entries,
            multiples_of_q,
        })
    }

    pub fn r_scale(&self) -> f64 {
        self.r_scale
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn entries(&self) -> &[(u64, Complex64)] {
        &self.entries
    }

    pub fn multiples_of_q(&self) -> &[u64] {
        &self.multiples_of_q
    }

    pub fn l1_norm(&self) -> f64 {
        self.entries.iter().map(|(_, a)| a.norm()).sum()
    }

    pub fn max_norm(&self) -> f64 {
        self.entries.iter().map(|(_, a)| a.norm()).fold(0.0, f64::max)
    }
}

/// Periodized Fourier weights `P_j = sum_{0 < |h| <= K, h = j mod q} W^(h/H)`,
/// with `H = q/R`, shared by every character and every `u` modulo `q`.
pub struct FormulaContext {
    q: u64,
    r_scale: f64,
    h_scale: f64,
    plan: TruncationPlan,
    periodized: Vec<Complex64>,
    units: UnitTable,
    inverses: Vec<u64>,
}

impl FormulaContext {
    /// Choose the cutoff from the tail policy for `amplitude * W^` tails
    /// against `tolerance`, or certify the caller's `h_cutoff`.
    pub fn new(
        q: u64,
        r_scale: f64,
        tolerance: f64,
        amplitude: f64,
        h_cutoff: Option<u64>,
    ) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        let w = shared_bump();
        let h_scale = q as f64 / r_scale;
        let plan = match h_cutoff {
            Some(k) => certify_truncation(w.envelope(), h_scale, amplitude, tolerance, k)?,
            None => plan_truncation(w.envelope(), h_scale, amplitude, tolerance),
        };
        let values: Vec<Complex64> = (1..=plan.cutoff)
            .into_par_iter()
            .map(|h| w.fourier(h as f64 / h_scale))
            .collect::<Result<_>>()?;
        let mut periodized = vec![Complex64::new(0.0, 0.0); q as usize];
        for (k, v) in values.iter().enumerate() {
            let h = k as u64 + 1;
            periodized[(h % q) as usize] += *v;
            periodized[((q - h % q) % q) as usize] += v.conj();
        }
        Ok(Self {
            q,
            r_scale,
            h_scale,
            plan,
            periodized,
            units: UnitTable::new(q),
            inverses: inverse_table(q),
        })
    }

    pub fn modulus(&self) -> u64 {
        self.q
    }

    pub fn r_scale(&self) -> f64 {
        self.r_scale
    }

    pub fn h_scale(&self) -> f64 {
        self.h_scale
    }

    pub fn plan(&self) -> &TruncationPlan {
        &self.plan
    }

    pub fn periodized(&self) -> &[Complex64] {
        &self.periodized
    }

    /// `sum_{0 < |h| <= K} W^(h/H) S_chi(h, u; q) / sqrt(q)`.
    pub fn dual_term(&self, chi: &DirichletCharacter, u: u64) -> Complex64 {
        let q = self.q;
        let mut acc = Complex64::new(0.0, 0.0);
        for (j, p) in self.periodized.iter().enumerate() {
            acc += p * twisted_with(&self.units, chi, j as u64, u % q);
        }
        acc / (q as f64).sqrt()
    }

    /// [`Self::dual_term`] for every `u mod q`, `u = 0` included.
    pub fn dual_kernel(&self, chi: &DirichletCharacter) -> Vec<Complex64> {
        (0..self.q).map(|u| self.dual_term(chi, u)).collect()
    }

    /// `q^(1/2) sum_r alpha_r e_q(u / r)`; terms with `q | r` carry `alpha_r = 0`.
    pub fn additive_term(&self, alpha: &AlphaSequence, u: u64) -> Complex64 {
        let q = self.q;
        let roots = self.units.roots();
        let mut acc = Complex64::new(0.0, 0.0);
        for &(r, a) in alpha.entries() {
            if r % q == 0 {
                continue;
            }
            acc += a * roots.at(u % q * self.inverses[(r % q) as usize] % q);
        }
        acc * (q as f64).sqrt()
    }

    /// Right-hand side of the character formula at `u`.
    pub fn evaluate(&self, chi: &DirichletCharacter, alpha: &AlphaSequence, u: i64) -> Result<Complex64> {
        let q = self.q;
        let u = reduce(u, q);
        if u == 0 {
            return Err(Error::PreconditionViolation(format!("u must be a unit mod {q}")));
        }
        if alpha.modulus() != q || alpha.r_scale() != self.r_scale {
            return Err(Error::PreconditionViolation("alpha built for another (q, R)".into()));
        }
        let eps_inv = gauss_eps(chi)?.inv();
        Ok(self.additive_term(alpha, u) - eps_inv * self.dual_term(chi, u))
    }
}

/// `chi(u)` through the additive formula with cutoff `h_cutoff` (or the
/// tail-policy cutoff when `None`).
pub fn chi_via_formula(
    chi: &DirichletCharacter,
    u: i64,
    alpha: &AlphaSequence,
    h_cutoff: Option<u64>,
) -> Result<Complex64> {
    let q = chi.modulus();
    let ctx = FormulaContext::new(q, alpha.r_scale(), FORMULA_TOL, (q as f64).sqrt(), h_cutoff)?;
    ctx.evaluate(chi, alpha, u)
}

/// Amplifiers `beta_s = chi(s)/#P_S` on primes `s` in `[S, 2S]` and
/// `gamma_t = chi-bar(t)/#P_T` on primes `t` in `[T, 2T]`.
#[derive(Clone, Debug)]
pub struct AmplifierPair {
    pub beta: Vec<(u64, Complex64)>,
    pub gamma: Vec<(u64, Complex64)>,
    pub chi: DirichletCharacter,
}

impl AmplifierPair {
    pub fn new(chi: &DirichletCharacter, s: u64, t: u64) -> Result<Self> {
        Self::from_primes(chi, &primes_in(s, 2 * s), &primes_in(t, 2 * t))
    }

    /// Uniform amplifiers over explicit prime lists.
    pub fn from_primes(chi: &DirichletCharacter, s_primes: &[u64], t_primes: &[u64]) -> Result<Self> {
        let q = chi.modulus();
        for &p in s_primes.iter().chain(t_primes) {
            if p % q == 0 {
                return Err(Error::SupportCollision(format!("amplifier prime {p} is divisible by q = {q}")));
            }
        }
        if s_primes.is_empty() || t_primes.is_empty() {
            return Err(Error::PreconditionViolation("amplifier support is empty".into()));
        }
        let ns = s_primes.len() as f64;
        let nt = t_primes.len() as f64;
        Ok(Self {
            beta: s_primes.iter().map(|&s| (s, chi.at(s % q) / ns)).collect(),
            gamma: t_primes.iter().map(|&t| (t, chi.at(t % q).conj() / nt)).collect(),
            chi: chi.clone(),
        })
    }

    /// `(sum_s beta_s chi-bar(s), sum_t gamma_t chi(t))`, both `1` by construction.
    pub fn normalizations(&self) -> (Complex64, Complex64) {
        let q = self.chi.modulus();
        let b = self.beta.iter().map(|(s, b)| b * self.chi.at(s % q).conj()).sum();
        let g = self.gamma.iter().map(|(t, g)| g * self.chi.at(t % q)).sum();
        (b, g)
    }
}

/// Integers in the support of `V(n/N)` with their weights `V(n/N)/N`.
fn weighted_range(v: &InertFunction, n_scale: f64) -> Vec<(u64, f64)> {
    let (lo, hi) = v.bounds();
    let a = (lo * n_scale).ceil().max(1.0) as u64;
    let b = (hi * n_scale).floor();
    if b < a as f64 {
        return Vec::new();
    }
    (a..=b as u64)
        .map(|n| (n, v.eval(n as f64 / n_scale) / n_scale))
        .filter(|(_, w)| *w != 0.0)
        .collect()
}

fn weighted_coefficients(
    lambda: &CoefficientSource,
    v: &InertFunction,
    n_scale: f64,
) -> Result<Vec<(u64, Complex64)>> {
    weighted_range(v, n_scale)
        .into_iter()
        .map(|(n, w)| lambda.get(n).map(|l| (n, l * w)))
        .collect()
}

/// `Sigma = sum_n V(n/N)/N lambda(1,n) chi(n)`.
pub fn sigma_direct(
    lambda: &CoefficientSource,
    chi: &DirichletCharacter,
    v: &InertFunction,
    n_scale: f64,
) -> Result<Complex64> {
    let q = chi.modulus();
    Ok(weighted_coefficients(lambda, v, n_scale)?
        .iter()
        .map(|(n, c)| c * chi.at(n % q))
        .sum())
}

/// `sum_{n,s,t} V(n/N)/N lambda(1,n) beta_s gamma_t chi(t n / s)`.
pub fn sigma_amplified(
    lambda: &CoefficientSource,
    chi: &DirichletCharacter,
    v: &InertFunction,
    n_scale: f64,
    amp: &AmplifierPair,
) -> Result<Complex64> {
    let q = chi.modulus();
    let inv = inverse_table(q);
    let coeffs = weighted_coefficients(lambda, v, n_scale)?;
    let mut total = Complex64::new(0.0, 0.0);
    for &(s, b) in &amp.beta {
        let sbar = inv[(s % q) as usize];
        for &(t, g) in &amp.gamma {
            let ts = t % q * sbar % q;
            let inner: Complex64 = coeffs.iter().map(|(n, c)| c * chi.at(n % q * ts % q)).sum();
            total += b * g * inner;
        }
    }
    Ok(total)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub q: u64,
    pub character: u64,
    pub n_scale: f64,
    pub r_scale: f64,
    pub s_scale: u64,
    pub t_scale: u64,
    pub sigma: Complex64,
    pub f: Complex64,
    pub o: Complex64,
    pub eps: Complex64,
    pub residual: f64,
    pub h_cutoff: u64,
    pub tail_bound: f64,
    pub tail_budget: f64,
    pub envelope_constant: f64,
    pub coefficients: String,
}

/// `Sigma`, `F` and `O` by their definitions, and `|Sigma - (F - eps^-1 O)|`.
#[allow(clippy::too_many_arguments)]
pub fn decompose(
    lambda: &CoefficientSource,
    chi: &DirichletCharacter,
    v: &InertFunction,
    n_scale: f64,
    alpha: &AlphaSequence,
    amp: &AmplifierPair,
    h_cutoff: Option<u64>,
) -> Result<DecompositionReport> {
    let q = chi.modulus();
    let coeffs = weighted_coefficients(lambda, v, n_scale)?;
    let mass: f64 = coeffs.iter().map(|(_, c)| c.norm()).sum();
    let amplitude = (q as f64).sqrt() * mass.max(f64::MIN_POSITIVE);
    let ctx = FormulaContext::new(q, alpha.r_scale(), DECOMPOSITION_TOL, amplitude, h_cutoff)?;
    decompose_with(&ctx, lambda, chi, v, n_scale, alpha, amp, &coeffs)
}

#[allow(clippy::too_many_arguments)]
fn decompose_with(
    ctx: &FormulaContext,
    lambda: &CoefficientSource,
    chi: &DirichletCharacter,
    _v: &InertFunction,
    n_scale: f64,
    alpha: &AlphaSequence,
    amp: &AmplifierPair,
    coeffs: &[(u64, Complex64)],
) -> Result<DecompositionReport> {
    let q = chi.modulus();
    let inv = inverse_table(q);
    let roots = RootTable::new(q);
    let eps = gauss_eps(chi)?;

    let sigma: Complex64 = coeffs.iter().map(|(n, c)| c * chi.at(n % q)).sum();

    let mut f = Complex64::new(0.0, 0.0);
    for &(r, a) in alpha.entries() {
        if r % q == 0 {
            continue;
        }
        for &(s, b) in &amp.beta {
            let rs_bar = inv[(r % q * (s % q) % q) as usize];
            for &(t, g) in &amp.gamma {
                let k = t % q * rs_bar % q;
                let inner: Complex64 = coeffs.iter().map(|(n, c)| c * roots.at(n % q * k % q)).sum();
                f += a * b * g * inner;
            }
        }
    }
    f *= (q as f64).sqrt();

    let kernel = ctx.dual_kernel(chi);
    let mut o = Complex64::new(0.0, 0.0);
    for &(s, b) in &amp.beta {
        let sbar = inv[(s % q) as usize];
        for &(t, g) in &amp.gamma {
            let ts = t % q * sbar % q;
            let inner: Complex64 = coeffs.iter().map(|(n, c)| c * kernel[(n % q * ts % q) as usize]).sum();
            o += b * g * inner;
        }
    }

    let residual = (sigma - (f - o / eps)).norm();
    Ok(DecompositionReport {
        q,
        character: chi.exponent(),
        n_scale,
        r_scale: alpha.r_scale(),
        s_scale: amp.beta.first().map(|p| p.0).unwrap_or(0),
        t_scale: amp.gamma.first().map(|p| p.0).unwrap_or(0),
        sigma,
        f,
        o,
        eps,
        residual,
        h_cutoff: ctx.plan().cutoff,
        tail_bound: ctx.plan().tail,
        tail_budget: ctx.plan().budget,
        envelope_constant: ctx.plan().envelope_constant,
        coefficients: lambda.label().to_string(),
    })
}

/// `|e_q(t n / (r s)) - e_{q r s}(t n) e_{r s}(-t n / q)|`.
pub fn reciprocity_check(t: i64, n: i64, r: u64, s: u64, q: u64) -> Result<f64> {
    let rs = r * s;
    if gcd(rs, q) != 1 {
        return Err(Error::NotCoprime(rs, q));
    }
    let tn = t as i128 * n as i128;
    let lhs = {
        let inv = inv_mod(rs % q, q).expect("coprime");
        let k = (tn.rem_euclid(q as i128) as u64) * inv % q;
        e(k as f64 / q as f64)
    };
    let big = q as u128 * rs as u128;
    let first = e((tn.rem_euclid(big as i128) as f64) / big as f64);
    let second = if rs == 1 {
        Complex64::new(1.0, 0.0)
    } else {
        let qbar = inv_mod(q % rs, rs).expect("coprime");
        let k = (tn.rem_euclid(rs as i128) as u64) * qbar % rs;
        e(-(k as f64) / rs as f64)
    };
    Ok((lhs - first * second).norm())
}

/// Three evaluations of `Pi_0` for one tuple.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pi0Chain {
    /// `q^-1 sum_{n mod q} S_chi(h1, t1 n/s1) conj(S_chi(h2, t2 n/s2))`.
    pub period_sum: Complex64,
    /// `sum_{x,y} 1[t1/(s1 x) = t2/(s2 y)] chi(x/y) e_q(h1 x - h2 y)`.
    pub double_sum: Complex64,
    /// `t1 s2 h1 - t2 s1 h2`.
    pub argument: i64,
    /// Ramanujan sum `c_q(argument)`.
    pub ramanujan: i64,
    /// `chi(t1 s2 / (t2 s1)) c_q(argument)`.
    pub predicted: Complex64,
}

impl Pi0Chain {
    /// Largest discrepancy among the three routes, magnitudes included.
    pub fn residual(&self) -> f64 {
        let a = (self.period_sum - self.double_sum).norm();
        let b = (self.period_sum - self.predicted).norm();
        let c = (self.period_sum.norm() - self.ramanujan.abs() as f64).abs();
        a.max(b).max(c)
    }
}

/// Tables reused across every tuple modulo one `q`.
pub struct Pi0Tables {
    q: u64,
    units: UnitTable,
    inverses: Vec<u64>,
}

impl Pi0Tables {
    pub fn new(q: u64) -> Result<Self> {
        if !is_prime(q) {
            return Err(Error::NotPrime(q));
        }
        Ok(Self {
            q,
            units: UnitTable::new(q),
            inverses: inverse_table(q),
        })
    }

    pub fn chain(&self, chi: &DirichletCharacter, s: [u64; 2], t: [u64; 2], h: [u64; 2]) -> Result<Pi0Chain> {
        let q = self.q;
        for v in s.iter().chain(&t).chain(&h) {
            if v % q == 0 {
                return Err(Error::NotCoprime(*v, q));
            }
        }
        let inv = &self.inverses;
        let m1 = t[0] % q * inv[(s[0] % q) as usize] % q;
        let m2 = t[1] % q * inv[(s[1] % q) as usize] % q;

        let mut period_sum = Complex64::new(0.0, 0.0);
        for n in 0..q {
            let a = twisted_with(&self.units, chi, h[0] % q, n * m1 % q);
            let b = twisted_with(&self.units, chi, h[1] % q, n * m2 % q);
            period_sum += a * b.conj();
        }
        period_sum /= q as f64;

        let roots = self.units.roots();
        let mut double_sum = Complex64::new(0.0, 0.0);
        for x in 1..q {
            let lhs = m1 * inv[x as usize] % q;
            for y in 1..q {
                if lhs == m2 * inv[y as usize] % q {
                    let ratio = chi.at(x * inv[y as usize] % q);
                    let phase = (h[0] % q * x % q + q - h[1] % q * y % q) % q;
                    double_sum += ratio * roots.at(phase);
                }
            }
        }

        let argument = (t[0] * s[1] * h[0]) as i64 - (t[1] * s[0] * h[1]) as i64;
        let c = ramanujan(argument, &Modulus::new(q)?)?;
        let num = t[0] % q * (s[1] % q) % q;
        let den = t[1] % q * (s[0] % q) % q;
        let predicted = chi.at(num * inv[den as usize] % q) * c as f64;
        Ok(Pi0Chain {
            period_sum,
            double_sum,
            argument,
            ramanujan: c,
            predicted,
        })
    }
}

/// One-shot [`Pi0Tables::chain`].
pub fn pi0_chain(chi: &DirichletCharacter, s: [u64; 2], t: [u64; 2], h: [u64; 2]) -> Result<Pi0Chain> {
    Pi0Tables::new(chi.modulus())?.chain(chi, s, t, h)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagonalCount {
    pub s: u64,
    pub t: u64,
    pub h: u64,
    /// Tuples in `[T,2T]^2 x [S,2S]^2 x [1,H]^2` with `t1 s2 h2 = t2 s1 h1`.
    pub count: u64,
    /// `#([T,2T] x [S,2S] x [1,H]) * max_{m <= 4STH} d3(m)`.
    pub bound: u64,
    /// `count / (S T H max d3)`.
    pub constant: f64,
}

/// Brute-force count of the diagonal tuples against the divisor bound.
pub fn diagonal_count(s: u64, t: u64, h: u64) -> DiagonalCount {
    let mut products: HashMap<u64, u64> = HashMap::new();
    for t1 in t..=2 * t {
        for s2 in s..=2 * s {
            for h2 in 1..=h {
                *products.entry(t1 * s2 * h2).or_default() += 1;
            }
        }
    }
    let mut count = 0;
    for t2 in t..=2 * t {
        for s1 in s..=2 * s {
            for h1 in 1..=h {
                count += products.get(&(t2 * s1 * h1)).copied().unwrap_or(0);
            }
        }
    }
    let box_size = (t + 1) * (s + 1) * h;
    let max_d3 = (1..=4 * s * t * h).map(d3).max().unwrap_or(1);
    DiagonalCount {
        s,
        t,
        h,
        count,
        bound: box_size * max_d3,
        constant: count as f64 / ((s * t * h * max_d3) as f64),
    }
}

/// One row of the F/O envelope scan.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScanRow {
    pub q: u64,
    pub n: f64,
    pub r: f64,
    pub s: u64,
    pub t: u64,
    pub sigma_abs: f64,
    pub f_abs: f64,
    pub o_abs: f64,
    pub residual: f64,
    pub predicted_f_envelope: f64,
    pub predicted_o_envelope: f64,
}

/// Square roots of the F and O propositions' right-hand sides with all
/// implied constants set to one.
pub fn envelopes(q: f64, n: f64, r: f64, s: f64, t: f64) -> (f64, f64) {
    let first = q / n * (q * r * s / (t * n)).powi(3);
    let second = q * (r * s).powi(3) / (n * n) * (1.0 / (s * t) + (1.0 + n / (r * r * s)) / (r.sqrt() * s));
    let h = q / r;
    ((first + second).sqrt(), (h / (s * t)).sqrt())
}

/// Scan row for one tuple, taking the character with exponent `k`.
pub fn scan_row(
    lambda: &CoefficientSource,
    q: u64,
    k: u64,
    n: f64,
    r: f64,
    s: u64,
    t: u64,
) -> Result<ScanRow> {
    let chi = DirichletCharacter::new(q, k)?;
    let v = InertFunction::standard();
    let alpha = AlphaSequence::new(&chi, r)?;
    let amp = AmplifierPair::new(&chi, s, t)?;
    let rep = decompose(lambda, &chi, &v, n, &alpha, &amp, None)?;
    let (fe, oe) = envelopes(q as f64, n, r, s as f64, t as f64);
    Ok(ScanRow {
        q,
        n,
        r,
        s,
        t,
        sigma_abs: rep.sigma.norm(),
        f_abs: rep.f.norm(),
        o_abs: rep.o.norm(),
        residual: rep.residual,
        predicted_f_envelope: fe,
        predicted_o_envelope: oe,
    })
}

/// Decompose for every primitive character modulo `q` with a shared context.
pub fn decompose_all(
    lambda: &CoefficientSource,
    q: u64,
    n_scale: f64,
    r_scale: f64,
    s: u64,
    t: u64,
) -> Result<Vec<(DecompositionReport, Complex64)>> {
    let v = InertFunction::standard();
    let coeffs = weighted_coefficients(lambda, &v, n_scale)?;
    let mass: f64 = coeffs.iter().map(|(_, c)| c.norm()).sum();
    let amplitude = (q as f64).sqrt() * mass.max(f64::MIN_POSITIVE);
    let ctx = FormulaContext::new(q, r_scale, DECOMPOSITION_TOL, amplitude, None)?;
    let group = CharacterGroup::new(q)?;
    let chars: Vec<DirichletCharacter> = group.primitive().collect();
    chars
        .par_iter()
        .map(|chi| {
            let alpha = AlphaSequence::new(chi, r_scale)?;
            let amp = AmplifierPair::new(chi, s, t)?;
            let rep = decompose_with(&ctx, lambda, chi, &v, n_scale, &alpha, &amp, &coeffs)?;
            let amplified = sigma_amplified(lambda, chi, &v, n_scale, &amp)?;
            Ok((rep, amplified))
        })
        .collect()
}

/// Character formula against direct evaluation for every primitive
/// character and unit `u` modulo each prime in `qs`, for each `R`.
pub fn formula_audit(qs: &[u64], rs: &[f64]) -> Result<AuditReport> {
    if qs.is_empty() || rs.is_empty() {
        return Err(Error::PreconditionViolation("empty character-formula grid".into()));
    }
    let lo = *qs.iter().min().expect("nonempty");
    let hi = *qs.iter().max().expect("nonempty");
    let mut b = AuditBuilder::new("chi-formula", Metric::Residual, FORMULA_TOL, [lo, hi]);
    for &q in qs {
        for &r in rs {
            let ctx = FormulaContext::new(q, r, FORMULA_TOL, (q as f64).sqrt(), None)?;
            b.record_max("max_cutoff", ctx.plan().cutoff as f64);
            let group = CharacterGroup::new(q)?;
            let chars: Vec<DirichletCharacter> = group.primitive().collect();
            let parts: Vec<Result<AuditBuilder>> = chars
                .par_iter()
                .map(|chi| {
                    let mut part = b.fork();
                    let alpha = AlphaSequence::new(chi, r)?;
                    for u in 1..q {
                        let v = ctx.evaluate(chi, &alpha, u as i64)?;
                        let pr = params([("q", q as i64), ("k", chi.exponent() as i64), ("R", r as i64), ("u", u as i64)]);
                        part.observe(pr, (v - chi.at(u)).norm());
                    }
                    Ok(part)
                })
                .collect();
            let mut worst = 0.0f64;
            for part in parts {
                let part = part?;
                worst = worst.max(part.max_value());
                b.merge(part);
            }
            b.record(&format!("max_residual(q={q:03},R={r})"), worst);
        }
    }
    Ok(b.finish())
}

/// Decomposition residual for every primitive character modulo each `q`,
/// with `N = floor(q^(3/2) / 4)`, `d3` coefficients, and the given `R, S, T`.
/// The amplified-sum identity is tracked as `max_amplified_residual` and
/// failed above [`AMPLIFIED_TOL`].
pub fn decomposition_audit(qs: &[u64], r: f64, s: u64, t: u64) -> Result<AuditReport> {
    if qs.is_empty() {
        return Err(Error::PreconditionViolation("empty decomposition grid".into()));
    }
    let lo = *qs.iter().min().expect("nonempty");
    let hi = *qs.iter().max().expect("nonempty");
    let mut b = AuditBuilder::new("decomposition", Metric::Residual, DECOMPOSITION_TOL, [lo, hi]);
    b.note("coefficients: d3 stand-in");
    for &q in qs {
        let n = ((q as f64).powf(1.5) / 4.0).floor();
        let lambda = CoefficientSource::ternary_divisor((4.0 * n).ceil() as u64 + 1);
        for (rep, amplified) in decompose_all(&lambda, q, n, r, s, t)? {
            let pr = params([("q", q as i64), ("k", rep.character as i64), ("N", n as i64)]);
            let amp = (rep.sigma - amplified).norm();
            b.record_max("max_amplified_residual", amp);
            b.record_max("max_h_cutoff", rep.h_cutoff as f64);
            if !(amp <= AMPLIFIED_TOL) {
                b.fail(pr.clone(), amp);
            }
            b.observe(pr, rep.residual);
        }
    }
    Ok(b.finish())
}

/// Residual target for the amplified-sum identity.
pub const AMPLIFIED_TOL: f64 = 1e-10;
/// Residual target for the `Pi_0` chain.
pub const PI0_TOL: f64 = 1e-8;

/// `s1 t2 h1 - s2 t1 h2`, the argument as printed alongside the chain.
pub fn pi0_printed_argument(s: [u64; 2], t: [u64; 2], h: [u64; 2]) -> i64 {
    (s[0] * t[1] * h[0]) as i64 - (s[1] * t[0] * h[1]) as i64
}

/// `Pi_0` chain for every primitive character modulo each `q` and every
/// `s_i, t_i, h_i` in `[1, max]` prime to `q`. The number of tuples where
/// the printed argument predicts the wrong magnitude is recorded as
/// `printed_argument_mismatches`.
pub fn pi0_audit(qs: &[u64], max: u64) -> Result<AuditReport> {
    if qs.is_empty() || max == 0 {
        return Err(Error::PreconditionViolation("empty Pi_0 grid".into()));
    }
    let lo = *qs.iter().min().expect("nonempty");
    let hi = *qs.iter().max().expect("nonempty");
    let mut b = AuditBuilder::new("pi0", Metric::Residual, PI0_TOL, [lo, hi]);
    let mut mismatches = 0u64;
    for &q in qs {
        let tables = Pi0Tables::new(q)?;
        let modulus = Modulus::new(q)?;
        let vals: Vec<u64> = (1..=max).filter(|v| v % q != 0).collect();
        let mut tuples = Vec::new();
        for &s1 in &vals {
            for &s2 in &vals {
                for &t1 in &vals {
                    for &t2 in &vals {
                        for &h1 in &vals {
                            for &h2 in &vals {
                                tuples.push(([s1, s2], [t1, t2], [h1, h2]));
                            }
                        }
                    }
                }
            }
        }
        for chi in CharacterGroup::new(q)?.primitive() {
            let parts: Vec<Result<(AuditBuilder, u64)>> = tuples
                .par_chunks(256)
                .map(|chunk| {
                    let mut part = b.fork();
                    let mut miss = 0;
                    for &(s, t, h) in chunk {
                        let c = tables.chain(&chi, s, t, h)?;
                        let printed = ramanujan(pi0_printed_argument(s, t, h), &modulus)?;
                        if printed.abs() != c.ramanujan.abs() {
                            miss += 1;
                        }
                        let pr = params([
                            ("q", q as i64),
                            ("k", chi.exponent() as i64),
                            ("s1", s[0] as i64),
                            ("s2", s[1] as i64),
                            ("t1", t[0] as i64),
                            ("t2", t[1] as i64),
                            ("h1", h[0] as i64),
                            ("h2", h[1] as i64),
                        ]);
                        part.observe(pr, c.residual());
                    }
                    Ok((part, miss))
                })
                .collect();
            for part in parts {
                let (part, miss) = part?;
                mismatches += miss;
                b.merge(part);
            }
        }
    }
    b.record("printed_argument_mismatches", mismatches as f64);
    Ok(b.finish())
}

/// Diagonal counts against the divisor bound for `S, T` in `st` and `H` in `hs`.
pub fn diagonal_audit(st: &[u64], hs: &[u64]) -> Result<AuditReport> {
    if st.is_empty() || hs.is_empty() {
        return Err(Error::PreconditionViolation("empty diagonal grid".into()));
    }
    let mut b = AuditBuilder::new("diagonal", Metric::Ratio, 1.0, [1, 1]);
    b.note("ratio = count / ((T+1)(S+1)H max d3(m <= 4STH))");
    let mut grid = Vec::new();
    for &s in st {
        for &t in st {
            for &h in hs {
                grid.push((s, t, h));
            }
        }
    }
    let counts: Vec<DiagonalCount> = grid.par_iter().map(|&(s, t, h)| diagonal_count(s, t, h)).collect();
    for d in counts {
        b.record_max("max_constant", d.constant);
        b.observe(
            params([("S", d.s as i64), ("T", d.t as i64), ("H", d.h as i64)]),
            d.count as f64 / d.bound as f64,
        );
    }
    Ok(b.finish())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn formula_at_thirteen() {
        let q = 13;
        let ctx = FormulaContext::new(q, 4.0, FORMULA_TOL, (q as f64).sqrt(), None).unwrap();
        for chi in CharacterGroup::new(q).unwrap().primitive() {
            let alpha = AlphaSequence::new(&chi, 4.0).unwrap();
            for u in 1..q as i64 {
                let v = ctx.evaluate(&chi, &alpha, u).unwrap();
                assert!((v - chi.eval(u)).norm() < 1e-8, "k={} u={u}", chi.exponent());
            }
            assert!(ctx.evaluate(&chi, &alpha, 0).is_err());
            assert!(ctx.evaluate(&chi, &alpha, 13).is_err());
        }
    }

    #[test]
    fn one_shot_matches_context() {
        let chi = DirichletCharacter::new(11, 3).unwrap();
        let alpha = AlphaSequence::new(&chi, 4.0).unwrap();
        let v = chi_via_formula(&chi, 5, &alpha, None).unwrap();
        assert!((v - chi.eval(5)).norm() < 1e-8);
        assert!(matches!(
            chi_via_formula(&chi, 5, &alpha, Some(3)),
            Err(Error::TruncationInsufficient { .. })
        ));
    }

    #[test]
    fn alpha_properties() {
        for q in [11u64, 13, 29, 97] {
            for chi in CharacterGroup::new(q).unwrap().primitive().take(3) {
                for r in [4.0, 8.0] {
                    let a = AlphaSequence::new(&chi, r).unwrap();
                    assert!(a.entries().iter().all(|(x, _)| *x as f64 >= r && *x as f64 <= 2.0 * r));
                    let l1 = a.l1_norm();
                    assert!((0.25..=4.0).contains(&l1), "q={q} R={r}: {l1}");
                    for &m in a.multiples_of_q() {
                        assert_eq!(a.entries().iter().find(|e| e.0 == m).unwrap().1.norm(), 0.0);
                    }
                }
            }
        }
        let chi = DirichletCharacter::new(11, 1).unwrap();
        assert_eq!(AlphaSequence::new(&chi, 8.0).unwrap().multiples_of_q(), &[11]);
        assert!(matches!(AlphaSequence::new(&chi, 11.0), Err(Error::SupportCollision(_))));
        let trivial = DirichletCharacter::new(11, 0).unwrap();
        assert!(matches!(AlphaSequence::new(&trivial, 4.0), Err(Error::DegenerateCharacter)));
    }

    #[test]
    fn amplifier_normalization() {
        for chi in CharacterGroup::new(29).unwrap().primitive() {
            let amp = AmplifierPair::new(&chi, 2, 5).unwrap();
            let (b, g) = amp.normalizations();
            assert!((b - 1.0).norm() < 1e-12 && (g - 1.0).norm() < 1e-12);
            let ns = amp.beta.len() as f64;
            assert!(amp.beta.iter().all(|(_, b)| b.norm() <= 1.0 / ns + 1e-15));
        }
        let chi = DirichletCharacter::new(3, 1).unwrap();
        assert!(matches!(AmplifierPair::new(&chi, 2, 2), Err(Error::SupportCollision(_))));
    }

    #[test]
    fn sigma_examples() {
        let v = InertFunction::standard();
        let ones = CoefficientSource::constant(Complex64::new(1.0, 0.0), 1000);
        let trivial = DirichletCharacter::new(13, 0).unwrap();
        let n = 100.0;
        let direct = sigma_direct(&ones, &trivial, &v, n).unwrap();
        let riemann: f64 = (1..=400u64)
            .filter(|m| m % 13 != 0)
            .map(|m| v.eval(m as f64 / n) / n)
            .sum();
        assert!((direct.re - riemann).abs() < 1e-12);

        let d = CoefficientSource::ternary_divisor(200);
        let chi = DirichletCharacter::new(13, 5).unwrap();
        let a = sigma_direct(&d, &chi, &v, 40.0).unwrap();
        let b: Complex64 = (20..=160u64)
            .rev()
            .map(|m| d.at(m) * chi.eval(m as i64) * (v.eval(m as f64 / 40.0) / 40.0))
            .sum();
        assert!((a - b).norm() < 1e-12);
        assert_eq!(sigma_direct(&d, &chi, &v, 0.2).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn amplified_equals_direct() {
        let v = InertFunction::standard();
        let d = CoefficientSource::ternary_divisor(200);
        for q in [5u64, 7, 11, 29, 31] {
            for chi in CharacterGroup::new(q).unwrap().primitive() {
                let amp = AmplifierPair::new(&chi, 2, 2).unwrap();
                let direct = sigma_direct(&d, &chi, &v, 30.0).unwrap();
                let amplified = sigma_amplified(&d, &chi, &v, 30.0, &amp).unwrap();
                assert!((direct - amplified).norm() < 1e-10);

                let single = AmplifierPair::from_primes(&chi, &[2], &[3]).unwrap();
                let one = sigma_amplified(&d, &chi, &v, 30.0, &single).unwrap();
                assert!((direct - one).norm() < 1e-10);

                let c = chi.conj();
                let amp = AmplifierPair::new(&c, 2, 2).unwrap();
                let lhs = sigma_amplified(&d, &c, &v, 30.0, &amp).unwrap();
                assert!((sigma_direct(&d, &c, &v, 30.0).unwrap() - lhs).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn decomposition_at_twenty_nine() {
        let q = 29u64;
        let n = ((q as f64).powf(1.5) / 4.0).floor();
        let d = CoefficientSource::ternary_divisor(1000);
        for (rep, amplified) in decompose_all(&d, q, n, 4.0, 2, 2).unwrap() {
            assert!(rep.residual < 1e-6, "k={}: {}", rep.character, rep.residual);
            assert!(rep.tail_bound <= rep.tail_budget);
            assert!((rep.sigma - amplified).norm() < 1e-10);
        }
    }

    #[test]
    fn decomposition_of_zero_coefficients() {
        let zero = CoefficientSource::constant(Complex64::new(0.0, 0.0), 1000);
        let chi = DirichletCharacter::new(29, 3).unwrap();
        let v = InertFunction::standard();
        let alpha = AlphaSequence::new(&chi, 4.0).unwrap();
        let amp = AmplifierPair::new(&chi, 2, 2).unwrap();
        let rep = decompose(&zero, &chi, &v, 39.0, &alpha, &amp, None).unwrap();
        assert_eq!((rep.sigma, rep.f, rep.o), Default::default());
        assert_eq!(rep.residual, 0.0);
    }

    #[test]
    fn widening_cutoff_does_not_hurt() {
        let d = CoefficientSource::ternary_divisor(1000);
        let chi = DirichletCharacter::new(29, 5).unwrap();
        let v = InertFunction::standard();
        let alpha = AlphaSequence::new(&chi, 4.0).unwrap();
        let amp = AmplifierPair::new(&chi, 2, 2).unwrap();
        let base = decompose(&d, &chi, &v, 39.0, &alpha, &amp, None).unwrap();
        let wide = decompose(&d, &chi, &v, 39.0, &alpha, &amp, Some(2 * base.h_cutoff)).unwrap();
        assert!(wide.residual <= base.residual.max(1e-12));
    }

    #[test]
    fn reciprocity_exhaustive() {
        for q in [7u64, 13] {
            for r in 1..=12u64 {
                for s in 1..=12u64 {
                    if gcd(r * s, q) != 1 {
                        assert!(matches!(reciprocity_check(1, 1, r, s, q), Err(Error::NotCoprime(..))));
                        continue;
                    }
                    for t in 1..=12i64 {
                        for n in 1..=12i64 {
                            assert!(reciprocity_check(t, n, r, s, q).unwrap() < 1e-12);
                        }
                    }
                    assert!(reciprocity_check(0, 5, r, s, q).unwrap() < 1e-15);
                }
            }
        }
    }

    #[test]
    fn pi0_examples() {
        let chi = DirichletCharacter::new(5, 1).unwrap();
        let c = pi0_chain(&chi, [1, 1], [1, 1], [1, 1]).unwrap();
        assert!((c.period_sum.norm() - 4.0).abs() < 1e-10);
        assert_eq!(c.ramanujan, 4);

        let tables = Pi0Tables::new(7).unwrap();
        for chi in CharacterGroup::new(7).unwrap().primitive() {
            let c = tables.chain(&chi, [1, 2], [1, 1], [1, 1]).unwrap();
            assert_eq!(c.ramanujan, -1);
            assert!((c.period_sum.norm() - 1.0).abs() < 1e-10);
            assert!(c.residual() < 1e-10);
        }
        assert!(matches!(tables.chain(&chi_7(), [7, 1], [1, 1], [1, 1]), Err(Error::NotCoprime(7, 7))));
    }

    fn chi_7() -> DirichletCharacter {
        DirichletCharacter::new(7, 1).unwrap()
    }

    #[test]
    fn diagonal_count_small() {
        let d = diagonal_count(1, 1, 1);
        // t, s in {1, 2}, h = 1: t1 s2 = t2 s1
        let mut brute = 0;
        for t1 in 1..=2u64 {
            for t2 in 1..=2u64 {
                for s1 in 1..=2u64 {
                    for s2 in 1..=2u64 {
                        if t1 * s2 == t2 * s1 {
                            brute += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(d.count, brute);
        for (s, t, h) in [(2, 2, 4), (8, 8, 16), (4, 2, 16)] {
            let d = diagonal_count(s, t, h);
            assert!(d.count <= d.bound);
            assert!(d.count >= (t + 1) * (s + 1) * h);
        }
    }

    #[test]
    fn envelopes_are_positive() {
        let (f, o) = envelopes(29.0, 39.0, 4.0, 2.0, 2.0);
        assert!(f > 0.0 && o > 0.0);
        assert!((o - (29.0f64 / 4.0 / 4.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn small_audits() {
        let f = formula_audit(&[11, 13], &[4.0, 8.0]).unwrap();
        assert!(f.passed(), "{:?}", f.worst_witness);
        assert_eq!(f.checked, 2 * (9 * 10 + 11 * 12));
        let p = pi0_audit(&[5, 7], 3).unwrap();
        assert!(p.passed());
        assert!(p.recorded["printed_argument_mismatches"] > 0.0);
        let d = diagonal_audit(&[1, 2], &[1, 2, 4]).unwrap();
        assert!(d.passed());
        assert!(formula_audit(&[], &[4.0]).is_err());
        assert!(matches!(formula_audit(&[15], &[4.0]), Err(Error::NotPrime(15))));
    }
}
