//! Coefficient sources `n -> lambda(1, n)`: the ternary divisor function as a
//! desk-scale stand-in, coefficient files, and constants.

use std::path::Path;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::arith::factorize;
use crate::error::{Error, Result};
use crate::report::{params, AuditBuilder, AuditReport, Metric};

/// `d_3(n)` for `0 <= n <= limit` (index 0 unused), by two Dirichlet
/// convolutions with the constant function.
pub fn d3_sieve(limit: usize) -> Vec<u64> {
    let mut d2 = vec![0u64; limit + 1];
    for d in 1..=limit {
        for m in (d..=limit).step_by(d) {
            d2[m] += 1;
        }
    }
    let mut d3 = vec![0u64; limit + 1];
    for d in 1..=limit {
        for (k, m) in (d..=limit).step_by(d).enumerate() {
            d3[m] += d2[k + 1];
        }
    }
    d3
}

/// `d_3(n) = prod_p C(e_p + 2, 2)`.
pub fn d3(n: u64) -> u64 {
    assert!(n >= 1, "d3 is defined for n >= 1");
    factorize(n)
        .iter()
        .map(|&(_, e)| {
            let e = e as u64;
            (e + 2) * (e + 1) / 2
        })
        .product()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SourceKind {
    TernaryDivisor,
    FileBacked,
    Constant,
}

#[derive(Clone, Debug)]
enum Table {
    Divisor(Arc<[u64]>),
    Complex(Arc<[Complex64]>),
    Constant(Complex64),
}

/// `n -> lambda(1, n)` on `1..=range`.
#[derive(Clone, Debug)]
pub struct CoefficientSource {
    table: Table,
    range: u64,
}

impl CoefficientSource {
    /// `d_3` on `1..=range`, by sieve.
    pub fn ternary_divisor(range: u64) -> Self {
        Self {
            table: Table::Divisor(d3_sieve(range as usize).into()),
            range,
        }
    }

    pub fn constant(value: Complex64, range: u64) -> Self {
        Self {
            table: Table::Constant(value),
            range,
        }
    }

    /// Values for `n = 1, 2, ...` in order.
    pub fn from_values(values: Vec<Complex64>) -> Self {
        let range = values.len() as u64;
        let mut v = Vec::with_capacity(values.len() + 1);
        v.push(Complex64::new(0.0, 0.0));
        v.extend(values);
        Self {
            table: Table::Complex(v.into()),
            range,
        }
    }

    pub fn kind(&self) -> SourceKind {
        match self.table {
            Table::Divisor(_) => SourceKind::TernaryDivisor,
            Table::Complex(_) => SourceKind::FileBacked,
            Table::Constant(_) => SourceKind::Constant,
        }
    }

    pub fn range(&self) -> u64 {
        self.range
    }

    /// Label carried into reports.
    pub fn label(&self) -> &'static str {
        match self.table {
            Table::Divisor(_) => "d3 stand-in",
            Table::Complex(_) => "file",
            Table::Constant(_) => "constant",
        }
    }

    pub fn get(&self, n: u64) -> Result<Complex64> {
        if n == 0 || n > self.range {
            return Err(Error::OutOfRange { n, range: self.range });
        }
        Ok(self.at(n))
    }

    /// Unchecked lookup for `1 <= n <= range`.
    #[inline]
    pub fn at(&self, n: u64) -> Complex64 {
        match &self.table {
            Table::Divisor(t) => Complex64::new(t[n as usize] as f64, 0.0),
            Table::Complex(t) => t[n as usize],
            Table::Constant(c) => *c,
        }
    }

    /// Write `n,re,im` rows for `1..=range`.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
        w.write_record(["n", "re", "im"]).map_err(|e| csv_error(path, e))?;
        for n in 1..=self.range {
            let v = self.at(n);
            w.write_record([n.to_string(), format!("{:?}", v.re), format!("{:?}", v.im)])
                .map_err(|e| csv_error(path, e))?;
        }
        w.flush()?;
        Ok(())
    }
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.kind() {
        csv::ErrorKind::Io(_) => match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            _ => unreachable!(),
        },
        _ => Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        },
    }
}

/// Read a `n,re,im` file with `n = 1, 2, 3, ...` and no gaps.
pub fn load_coefficients(path: &Path) -> Result<CoefficientSource> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header = r.headers().map_err(|e| csv_error(path, e))?.clone();
    if header.iter().map(str::trim).collect::<Vec<_>>() != ["n", "re", "im"] {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            message: format!("expected header n,re,im, found {}", header.iter().collect::<Vec<_>>().join(",")),
        });
    }
    let parse_err = |line: u64, what: &str| Error::Parse {
        path: path.to_path_buf(),
        message: format!("line {line}: {what}"),
    };
    let mut values = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let line = i as u64 + 2;
        if rec.len() != 3 {
            return Err(parse_err(line, "expected three fields"));
        }
        let n: u64 = rec[0].trim().parse().map_err(|_| parse_err(line, "bad index"))?;
        let re: f64 = rec[1].trim().parse().map_err(|_| parse_err(line, "bad real part"))?;
        let im: f64 = rec[2].trim().parse().map_err(|_| parse_err(line, "bad imaginary part"))?;
        let expected = values.len() as u64 + 1;
        if n != expected {
            return Err(Error::Gap {
                path: path.to_path_buf(),
                expected,
                found: n,
            });
        }
        values.push(Complex64::new(re, im));
    }
    Ok(CoefficientSource::from_values(values))
}

/// Mean-square growth audit: `S(X) = sum_{n <= X} |lambda(1,n)|^2` at
/// dyadic `X`, with the exponent `log2(S(2X)/S(X))` asserted below 1.5 for
/// every dyadic `X` in `[64, x_max / 2]`.
pub fn rankin_selberg_audit(src: &CoefficientSource, x_max: u64) -> Result<AuditReport> {
    if x_max > src.range() {
        return Err(Error::OutOfRange {
            n: x_max,
            range: src.range(),
        });
    }
    if x_max < 128 {
        return Err(Error::PreconditionViolation(format!(
            "x_max must be at least 128, got {x_max}"
        )));
    }
    let mut b = AuditBuilder::new("rankin-selberg", Metric::Exponent, 1.5, [1, x_max]);
    b.note(format!("coefficients: {}", src.label()));
    let mut partial = vec![0.0f64; x_max as usize + 1];
    for n in 1..=x_max {
        partial[n as usize] = partial[n as usize - 1] + src.at(n).norm_sqr();
    }
    let mut x = 1u64;
    while x <= x_max {
        b.record(&format!("S(2^{:02})", x.trailing_zeros()), partial[x as usize]);
        if x >= 64 && 2 * x <= x_max {
            let exponent = (partial[2 * x as usize] / partial[x as usize]).log2();
            b.record(&format!("exponent(2^{:02})", x.trailing_zeros()), exponent);
            b.observe(params([("X", x as i64)]), exponent);
        }
        x *= 2;
    }
    Ok(b.finish())
}

/// `sum_{n <= x} |lambda(1, n)|^2`.
pub fn mean_square(src: &CoefficientSource, x: u64) -> Result<f64> {
    (1..=x).map(|n| src.get(n).map(|v| v.norm_sqr())).sum()
}
