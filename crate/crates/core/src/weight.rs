//! The canonical bump weight, inert test functions, Fourier transforms by
//! quadrature, and a numeric Poisson-summation checker.

use std::io::Write;
use std::path::Path;
use std::sync::OnceLock;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::quadrature::{composite_nodes, integrate};
use crate::registry::{Registry, WeightConstants};
use crate::roots::e;

/// Absolute tolerance for every Fourier value.
pub const FOURIER_TOL: f64 = 1e-12;

/// Truncation tails are certified below this fraction of the target tolerance.
pub const TAIL_FRACTION: f64 = 1e-3;

const MAX_LEVEL: usize = 12;

/// `exp(-1 / ((y - 1)(2 - y)))` on `(1, 2)`, zero elsewhere.
#[inline]
fn raw_bump(y: f64) -> f64 {
    if y <= 1.0 || y >= 2.0 {
        return 0.0;
    }
    (-1.0 / ((y - 1.0) * (2.0 - y))).exp()
}

/// A smooth compactly supported function with a computable Fourier transform
/// `f^(xi) = int f(x) e(-xi x) dx`.
pub trait FourierPair: Sync {
    fn eval(&self, x: f64) -> f64;

    fn support(&self) -> (f64, f64);

    fn fourier(&self, xi: f64) -> Result<Complex64>;

    /// Upper bound for `sum_{|h| > cutoff} |scale f^(scale h)|`, when the
    /// function carries a decay envelope.
    fn fourier_tail(&self, scale: f64, cutoff: u64) -> Option<f64>;
}

/// Fitted envelope `|W^(xi)| <= C_A (1 + |xi|)^-A`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DecayEnvelope {
    pub a2: f64,
    pub a4: f64,
    pub a8: f64,
}

impl DecayEnvelope {
    pub fn constant(&self, a: u32) -> f64 {
        match a {
            2 => self.a2,
            4 => self.a4,
            8 => self.a8,
            _ => panic!("no fitted envelope for A = {a}"),
        }
    }

    pub fn bound(&self, a: u32, xi: f64) -> f64 {
        self.constant(a) * (1.0 + xi.abs()).powi(-(a as i32))
    }

    /// `sum_{|h| > k} C_8 (1 + |h|/H)^-8 <= 2 C_8 H (1 + k/H)^-7 / 7`.
    pub fn lattice_tail(&self, h_scale: f64, cutoff: u64) -> f64 {
        2.0 * self.a8 * h_scale / 7.0 * (1.0 + cutoff as f64 / h_scale).powi(-7)
    }
}

impl From<&WeightConstants> for DecayEnvelope {
    fn from(w: &WeightConstants) -> Self {
        Self {
            a2: w.decay_a2,
            a4: w.decay_a4,
            a8: w.decay_a8,
        }
    }
}

struct Panels {
    /// Nodes shifted by the midpoint 3/2.
    centered: Vec<f64>,
    /// Quadrature weight times `W` at each node.
    weighted: Vec<f64>,
}

/// `W(x) = c exp(-1/((x-1)(2-x)))` on `(1, 2)` with unit mass.
pub struct BumpWeight {
    norm: f64,
    envelope: DecayEnvelope,
    panels: [OnceLock<Panels>; MAX_LEVEL + 1],
}

impl BumpWeight {
    pub fn new(envelope: DecayEnvelope) -> Self {
        let mass = integrate(raw_bump, 1.0, 2.0, 512);
        Self {
            norm: 1.0 / mass,
            envelope,
            panels: Default::default(),
        }
    }

    pub fn normalization(&self) -> f64 {
        self.norm
    }

    pub fn envelope(&self) -> &DecayEnvelope {
        &self.envelope
    }

    pub fn with_envelope(&self, envelope: DecayEnvelope) -> Self {
        Self::new(envelope)
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        self.norm * raw_bump(x)
    }

    fn panels(&self, level: usize) -> &Panels {
        self.panels[level].get_or_init(|| {
            let (xs, ws) = composite_nodes(1.0, 2.0, 1 << level);
            Panels {
                centered: xs.iter().map(|x| x - 1.5).collect(),
                weighted: xs.iter().zip(&ws).map(|(x, w)| w * self.eval(*x)).collect(),
            }
        })
    }

    /// `W^(xi)` by the composite rule with `2^level` panels.
    pub fn fourier_at_level(&self, xi: f64, level: usize) -> Complex64 {
        let p = self.panels(level);
        let omega = std::f64::consts::TAU * xi;
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, w) in p.centered.iter().zip(&p.weighted) {
            let (s, c) = (omega * t).sin_cos();
            acc += Complex64::new(w * c, -w * s);
        }
        let shift = -1.5 * xi;
        acc * e(shift - shift.round())
    }

    /// Panel count used first for a given frequency: enough to resolve the
    /// oscillation before the convergence test runs.
    fn start_level(xi: f64) -> usize {
        let want = (xi.abs() / 4.0).max(4.0);
        (want.log2().ceil() as usize).min(MAX_LEVEL - 1)
    }

    /// `W^(xi)` to absolute tolerance [`FOURIER_TOL`], doubling panels until
    /// two successive estimates agree.
    pub fn fourier(&self, xi: f64) -> Result<Complex64> {
        let mut level = Self::start_level(xi);
        let mut prev = self.fourier_at_level(xi, level);
        while level < MAX_LEVEL {
            level += 1;
            let next = self.fourier_at_level(xi, level);
            if (next - prev).norm() < FOURIER_TOL {
                return Ok(next);
            }
            prev = next;
        }
        Err(Error::QuadratureFailure {
            xi,
            tolerance: FOURIER_TOL,
        })
    }

    /// `d/dxi W^(xi)`, used for Hermite interpolation of the table.
    fn fourier_derivative(&self, xi: f64) -> Complex64 {
        let level = Self::start_level(xi) + 1;
        let p = self.panels(level);
        let omega = std::f64::consts::TAU * xi;
        let mut acc = Complex64::new(0.0, 0.0);
        for (t, w) in p.centered.iter().zip(&p.weighted) {
            let x = t + 1.5;
            let z = Complex64::new(0.0, -std::f64::consts::TAU * x) * *w;
            acc += z * Complex64::from_polar(1.0, -omega * t);
        }
        let shift = -1.5 * xi;
        acc * e(shift - shift.round())
    }

    /// Tabulate `W^` on `0, step, 2 step, ..., xi_max`.
    pub fn table(&self, xi_max: f64, step: f64) -> Result<FourierTable> {
        if !(step > 0.0) || !(xi_max >= 0.0) {
            return Err(Error::PreconditionViolation(
                "table needs step > 0 and xi_max >= 0".into(),
            ));
        }
        let n = (xi_max / step).floor() as usize + 1;
        let mut values = Vec::with_capacity(n);
        let mut slopes = Vec::with_capacity(n);
        for k in 0..n {
            let xi = k as f64 * step;
            values.push(self.fourier(xi)?);
            slopes.push(self.fourier_derivative(xi));
        }
        Ok(FourierTable {
            step,
            values,
            slopes,
        })
    }

    /// Max over `xis` of `|W^(xi)| (1 + |xi|)^A`.
    pub fn observed_decay(&self, a: u32, xis: &[f64]) -> Result<(f64, f64)> {
        let mut best = (0.0, 0.0);
        for &xi in xis {
            let v = self.fourier(xi)?.norm() * (1.0 + xi.abs()).powi(a as i32);
            if v > best.0 {
                best = (v, xi);
            }
        }
        Ok(best)
    }
}

impl Default for BumpWeight {
    fn default() -> Self {
        make_bump()
    }
}

/// The canonical weight with the shipped decay envelope.
pub fn make_bump() -> BumpWeight {
    BumpWeight::new(DecayEnvelope::from(&Registry::builtin().weight))
}

/// Frequencies on which envelope constants are fitted: a log grid on
/// `[1/8, xi_max]` plus a fine linear grid over the peak region.
pub fn calibration_grid(xi_max: f64) -> Vec<f64> {
    let mut xs: Vec<f64> = (0..=160)
        .map(|k| 0.125 * (xi_max / 0.125).powf(k as f64 / 160.0))
        .collect();
    xs.extend((0..=400).map(|k| k as f64 * 0.05).filter(|x| *x <= xi_max));
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    xs.dedup();
    xs
}

/// Largest frequency on which the `A = 8` envelope is fitted; beyond it
/// `|W^|` sits at the rounding floor and `(1 + xi)^8` amplifies noise.
pub const A8_FIT_LIMIT: f64 = 64.0;

impl FourierPair for BumpWeight {
    fn eval(&self, x: f64) -> f64 {
        BumpWeight::eval(self, x)
    }

    fn support(&self) -> (f64, f64) {
        (1.0, 2.0)
    }

    fn fourier(&self, xi: f64) -> Result<Complex64> {
        BumpWeight::fourier(self, xi)
    }

    fn fourier_tail(&self, scale: f64, cutoff: u64) -> Option<f64> {
        Some(2.0 * self.envelope.a8 / 7.0 * (1.0 + scale * cutoff as f64).powi(-7))
    }
}

/// Tabulated `W^` with cubic Hermite interpolation between nodes.
pub struct FourierTable {
    step: f64,
    values: Vec<Complex64>,
    slopes: Vec<Complex64>,
}

impl FourierTable {
    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn xi_max(&self) -> f64 {
        (self.values.len() - 1) as f64 * self.step
    }

    /// `(xi, W^(xi))` at each node.
    pub fn nodes(&self) -> impl Iterator<Item = (f64, Complex64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(k, v)| (k as f64 * self.step, *v))
    }

    /// Interpolated `W^(xi)`; negative `xi` by conjugate symmetry, and zero
    /// past the tabulated range.
    pub fn interpolate(&self, xi: f64) -> Complex64 {
        if xi < 0.0 {
            return self.interpolate(-xi).conj();
        }
        let pos = xi / self.step;
        let k = pos.floor() as usize;
        if k + 1 >= self.values.len() {
            return if k < self.values.len() && pos == k as f64 {
                self.values[k]
            } else {
                Complex64::new(0.0, 0.0)
            };
        }
        let t = pos - k as f64;
        let h = self.step;
        let (t2, t3) = (t * t, t * t * t);
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        self.values[k] * h00
            + self.slopes[k] * (h10 * h)
            + self.values[k + 1] * h01
            + self.slopes[k + 1] * (h11 * h)
    }

    /// CSV with header `xi,re,im`, one row per node.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(csv_io)?;
        w.write_record(["xi", "re", "im"]).map_err(csv_io)?;
        for (xi, v) in self.nodes() {
            w.write_record([
                format!("{xi}"),
                format!("{:.17e}", v.re),
                format!("{:.17e}", v.im),
            ])
            .map_err(csv_io)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut out = Vec::new();
        writeln!(out, "xi,re,im").unwrap();
        for (xi, v) in self.nodes() {
            writeln!(out, "{xi},{:.17e},{:.17e}", v.re, v.im).unwrap();
        }
        String::from_utf8(out).unwrap()
    }
}

fn csv_io(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

/// Derivative certificate `sup |(x d/dx)^j V| <= bound`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DerivativeCertificate {
    pub order: u32,
    pub step: f64,
    pub bound: f64,
}

/// Finite-difference steps in `log x` per derivative order. Higher orders
/// use wider steps so rounding (`~eps / h^j`) stays below truncation error.
const FD_STEPS: [f64; 5] = [0.0, 1e-4, 1e-4, 1e-3, 5e-3];
const CERT_GRID: usize = 256;
const CERT_MARGIN: f64 = 1.1;

/// The canonical bump moved to `[lo, hi]` and scaled so `V(mid) = 1`:
/// `V(x) = e^4 exp(-1/((y-1)(2-y)))`, `y = 1 + (x - lo)/(hi - lo)`.
#[derive(Clone, Debug)]
pub struct InertFunction {
    lo: f64,
    hi: f64,
    certificates: Vec<DerivativeCertificate>,
}

impl InertFunction {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if !(0.5..4.0).contains(&lo) || !(lo < hi && hi <= 4.0) {
            return Err(Error::PreconditionViolation(format!(
                "inert support [{lo}, {hi}] must lie in [1/2, 4]"
            )));
        }
        let mut v = Self {
            lo,
            hi,
            certificates: Vec::new(),
        };
        v.certificates = (1..=4)
            .map(|j| DerivativeCertificate {
                order: j,
                step: FD_STEPS[j as usize],
                bound: CERT_MARGIN * v.max_log_derivative(j, CERT_GRID),
            })
            .collect();
        Ok(v)
    }

    /// Support `[1/2, 4]`, the widest admissible.
    pub fn standard() -> Self {
        Self::new(0.5, 4.0).expect("valid support")
    }

    pub fn bounds(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (4.0f64).exp() * raw_bump(1.0 + (x - self.lo) / (self.hi - self.lo))
    }

    pub fn certificates(&self) -> &[DerivativeCertificate] {
        &self.certificates
    }

    /// `(x d/dx)^j V` at `x` by central differences in `log x`.
    pub fn log_derivative(&self, j: u32, x: f64) -> f64 {
        let h = FD_STEPS[j as usize];
        let y = x.ln();
        let g = |k: f64| self.eval((y + k * h).exp());
        match j {
            0 => self.eval(x),
            1 => (g(1.0) - g(-1.0)) / (2.0 * h),
            2 => (g(1.0) - 2.0 * g(0.0) + g(-1.0)) / (h * h),
            3 => (g(2.0) - 2.0 * g(1.0) + 2.0 * g(-1.0) - g(-2.0)) / (2.0 * h * h * h),
            4 => (g(2.0) - 4.0 * g(1.0) + 6.0 * g(0.0) - 4.0 * g(-1.0) + g(-2.0)) / (h * h * h * h),
            _ => panic!("derivative certificates stop at order 4"),
        }
    }

    /// Max of `|(x d/dx)^j V|` over an `n`-point grid spanning the support.
    pub fn max_log_derivative(&self, j: u32, n: usize) -> f64 {
        (0..n)
            .map(|k| {
                let x = self.lo + (self.hi - self.lo) * (k as f64 + 0.5) / n as f64;
                self.log_derivative(j, x).abs()
            })
            .fold(0.0, f64::max)
    }

    /// Re-check every certificate on a grid of `n` points.
    pub fn verify_certificates(&self, n: usize) -> bool {
        self.certificates
            .iter()
            .all(|c| self.max_log_derivative(c.order, n) <= c.bound)
    }
}

impl FourierPair for InertFunction {
    fn eval(&self, x: f64) -> f64 {
        InertFunction::eval(self, x)
    }

    fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    fn fourier(&self, xi: f64) -> Result<Complex64> {
        let mid = 0.5 * (self.lo + self.hi);
        let omega = std::f64::consts::TAU * xi;
        let start = ((xi.abs() * self.width() / 4.0).max(4.0).log2().ceil() as usize).min(MAX_LEVEL - 1);
        let at = |level: usize| {
            let (xs, ws) = composite_nodes(self.lo, self.hi, 1 << level);
            let mut acc = Complex64::new(0.0, 0.0);
            for (x, w) in xs.iter().zip(&ws) {
                let (s, c) = (omega * (x - mid)).sin_cos();
                let v = w * self.eval(*x);
                acc += Complex64::new(v * c, -v * s);
            }
            let shift = -mid * xi;
            acc * e(shift - shift.round())
        };
        let mut prev = at(start);
        for level in start + 1..=MAX_LEVEL {
            let next = at(level);
            if (next - prev).norm() < FOURIER_TOL {
                return Ok(next);
            }
            prev = next;
        }
        Err(Error::QuadratureFailure {
            xi,
            tolerance: FOURIER_TOL,
        })
    }

    /// From `V^(xi) = e^4 w e(-xi (lo - w)) W0^(w xi)` with `w = hi - lo` and
    /// `W0 = W / c`, the canonical envelope transfers with factor `e^4 / c`.
    fn fourier_tail(&self, scale: f64, cutoff: u64) -> Option<f64> {
        let bump = shared_bump();
        let factor = (4.0f64).exp() / bump.normalization();
        let w = self.width();
        Some(factor * 2.0 * bump.envelope.a8 / 7.0 * (1.0 + w * scale * cutoff as f64).powi(-7))
    }
}

/// The identically zero function.
pub struct ZeroFunction;

impl FourierPair for ZeroFunction {
    fn eval(&self, _x: f64) -> f64 {
        0.0
    }

    fn support(&self) -> (f64, f64) {
        (1.0, 2.0)
    }

    fn fourier(&self, _xi: f64) -> Result<Complex64> {
        Ok(Complex64::new(0.0, 0.0))
    }

    fn fourier_tail(&self, _scale: f64, _cutoff: u64) -> Option<f64> {
        Some(0.0)
    }
}

/// Process-wide canonical bump, so Fourier panel caches are shared.
pub fn shared_bump() -> &'static BumpWeight {
    static BUMP: OnceLock<BumpWeight> = OnceLock::new();
    BUMP.get_or_init(make_bump)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoissonResult {
    pub lhs: f64,
    pub rhs: Complex64,
    pub residual: f64,
    pub tail_bound: f64,
}

/// `|sum_n f(n/R) - sum_{|h| <= K} R f^(R h)|` without certifying the tail.
pub fn poisson_residual(f: &dyn FourierPair, scale: f64, truncation: u64) -> Result<PoissonResult> {
    let (lo, hi) = f.support();
    let n_lo = (lo * scale).floor() as i64;
    let n_hi = (hi * scale).ceil() as i64;
    let lhs: f64 = (n_lo..=n_hi).map(|n| f.eval(n as f64 / scale)).sum();
    let mut rhs = f.fourier(0.0)? * scale;
    for h in 1..=truncation {
        let v = f.fourier(scale * h as f64)?;
        let w = f.fourier(-scale * h as f64)?;
        rhs += (v + w) * scale;
    }
    Ok(PoissonResult {
        lhs,
        rhs,
        residual: (rhs - lhs).norm(),
        tail_bound: f.fourier_tail(scale, truncation).unwrap_or(f64::INFINITY),
    })
}

/// Poisson check whose truncation must certify the tail below
/// [`TAIL_FRACTION`] times `tolerance`.
pub fn poisson_check(
    f: &dyn FourierPair,
    scale: f64,
    truncation: u64,
    tolerance: f64,
) -> Result<PoissonResult> {
    let budget = TAIL_FRACTION * tolerance;
    let tail = f.fourier_tail(scale, truncation).unwrap_or(f64::INFINITY);
    if tail > budget {
        return Err(Error::TruncationInsufficient {
            cutoff: truncation,
            tail,
            budget,
        });
    }
    poisson_residual(f, scale, truncation)
}

/// A certified cutoff for `sum_h amplitude * W^(h/H)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TruncationPlan {
    pub cutoff: u64,
    pub tail: f64,
    pub budget: f64,
    pub envelope_constant: f64,
}

/// Smallest `K` with `amplitude * sum_{|h| > K} C_8 (1 + |h|/H)^-8` below
/// `TAIL_FRACTION * tolerance`.
pub fn plan_truncation(
    envelope: &DecayEnvelope,
    h_scale: f64,
    amplitude: f64,
    tolerance: f64,
) -> TruncationPlan {
    let budget = TAIL_FRACTION * tolerance;
    let ratio = 2.0 * envelope.a8 * h_scale * amplitude / (7.0 * budget);
    let mut cutoff = ((ratio.powf(1.0 / 7.0) - 1.0) * h_scale).ceil().max(0.0) as u64;
    while amplitude * envelope.lattice_tail(h_scale, cutoff) > budget {
        cutoff += 1;
    }
    while cutoff > 0 && amplitude * envelope.lattice_tail(h_scale, cutoff - 1) <= budget {
        cutoff -= 1;
    }
    TruncationPlan {
        cutoff,
        tail: amplitude * envelope.lattice_tail(h_scale, cutoff),
        budget,
        envelope_constant: envelope.a8,
    }
}

/// Certify a caller-chosen cutoff.
pub fn certify_truncation(
    envelope: &DecayEnvelope,
    h_scale: f64,
    amplitude: f64,
    tolerance: f64,
    cutoff: u64,
) -> Result<TruncationPlan> {
    let budget = TAIL_FRACTION * tolerance;
    let tail = amplitude * envelope.lattice_tail(h_scale, cutoff);
    if tail > budget {
        return Err(Error::TruncationInsufficient {
            cutoff,
            tail,
            budget,
        });
    }
    Ok(TruncationPlan {
        cutoff,
        tail,
        budget,
        envelope_constant: envelope.a8,
    })
}
