use num_complex::Complex64;

/// The additive character `e_c(j) = exp(2 pi i j / c)` tabulated for `j < c`.
///
/// Entries satisfy `e_c(c - j) = conj(e_c(j))` bit-for-bit, and the points
/// `1, i, -1, -i` are exact whenever they occur.
#[derive(Clone, Debug)]
pub struct RootTable {
    modulus: u64,
    values: Vec<Complex64>,
}

impl RootTable {
    pub fn new(modulus: u64) -> Self {
        assert!(modulus >= 1, "root table needs a positive modulus");
        let c = modulus as usize;
        let mut values = vec![Complex64::new(0.0, 0.0); c];
        for j in 0..=c / 2 {
            let z = if j == 0 {
                Complex64::new(1.0, 0.0)
            } else if 2 * j == c {
                Complex64::new(-1.0, 0.0)
            } else if 4 * j == c {
                Complex64::new(0.0, 1.0)
            } else {
                let theta = std::f64::consts::TAU * j as f64 / modulus as f64;
                Complex64::new(theta.cos(), theta.sin())
            };
            values[j] = z;
            if j != 0 {
                values[c - j] = z.conj();
            }
        }
        Self { modulus, values }
    }

    #[inline]
    pub fn modulus(&self) -> u64 {
        self.modulus
    }

    /// `e_c(j)` for a residue `j < c`.
    #[inline]
    pub fn at(&self, j: u64) -> Complex64 {
        self.values[j as usize]
    }

    /// `e_c(x)` for any signed integer.
    #[inline]
    pub fn at_signed(&self, x: i64) -> Complex64 {
        self.values[crate::arith::reduce(x, self.modulus) as usize]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.values
    }
}

/// `e(x) = exp(2 pi i x)` for a real argument.
#[inline]
pub fn e(x: f64) -> Complex64 {
    let theta = std::f64::consts::TAU * x;
    Complex64::new(theta.cos(), theta.sin())
}
