//! Real trigonometric polynomials on the 2-torus, stored by Fourier coefficients.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::SpectralError;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Coefficient store and sampling sizes for a band-limited field.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FourierGrid {
    /// Coefficients are stored for `|k1|, |k2| <= max_freq`.
    pub max_freq: usize,
    /// Physical grid size per dimension used for point evaluation.
    pub phys_size: usize,
    /// Oversampling factor for sup-norm evaluation.
    pub oversample: f64,
}

impl FourierGrid {
    pub const DEFAULT_OVERSAMPLE: f64 = 4.0;

    pub fn for_max_freq(max_freq: usize) -> Self {
        FourierGrid {
            max_freq,
            phys_size: super::fft::good_size(2 * max_freq + 2),
            oversample: Self::DEFAULT_OVERSAMPLE,
        }
    }

    /// Grid size on which sup norms are sampled.
    pub fn sup_size(&self) -> usize {
        let want = (self.oversample * (2 * self.max_freq + 2) as f64).ceil() as usize;
        super::fft::good_size(want.max(self.phys_size))
    }
}

/// A real-valued trigonometric polynomial
/// `f(x) = sum_k fhat(k) e^{i k.x}` with `fhat(k) = (2 pi)^-2 int f e^{-i k.x}`.
///
/// Only the half-plane `k2 >= 0` is stored; `fhat(-k) = conj(fhat(k))` gives the rest.
/// On the row `k2 = 0` both `k1` and `-k1` are stored and kept conjugate.
#[derive(Clone, Debug)]
pub struct SpectralField {
    k: usize,
    support: f64,
    coeffs: Vec<Complex64>,
}

/// Equality of coefficients; the declared support radius is bookkeeping and not compared.
impl PartialEq for SpectralField {
    fn eq(&self, other: &Self) -> bool {
        self.k == other.k && self.coeffs == other.coeffs
    }
}

impl SpectralField {
    pub fn zeros(max_freq: usize) -> Self {
        let k = max_freq;
        SpectralField {
            k,
            support: 0.0,
            coeffs: vec![ZERO; (2 * k + 1) * (k + 1)],
        }
    }

    /// Builds a field from a coefficient rule evaluated on the stored half-plane.
    /// The rule is only consulted for half-lattice representatives
    /// (`k2 > 0`, or `k2 = 0, k1 >= 0`); the rest is mirrored.
    /// The value at `k = 0` has its imaginary part discarded.
    pub fn from_fn(max_freq: usize, mut rule: impl FnMut(i64, i64) -> Complex64) -> Self {
        let mut out = Self::zeros(max_freq);
        let k = max_freq as i64;
        for k1 in -k..=k {
            for k2 in 0..=k {
                if k2 == 0 && k1 < 0 {
                    continue;
                }
                let mut v = rule(k1, k2);
                if k1 == 0 && k2 == 0 {
                    v.im = 0.0;
                }
                let i = out.index(k1, k2);
                out.coeffs[i] = v;
                if k2 == 0 && k1 > 0 {
                    let j = out.index(-k1, 0);
                    out.coeffs[j] = v.conj();
                }
            }
        }
        out.support = out.measured_support();
        out
    }

    /// Builds a field from a full `(2K+1)^2` row-major array (`k1` outer, `k2` inner).
    /// Fails unless the array is Hermitian to within `tol` (absolute).
    pub fn from_full(max_freq: usize, full: &[Complex64], tol: f64) -> Result<Self, SpectralError> {
        let side = 2 * max_freq + 1;
        if full.len() != side * side {
            return Err(SpectralError::SizeMismatch {
                expected: side * side,
                got: full.len(),
            });
        }
        let k = max_freq as i64;
        let at = |k1: i64, k2: i64| full[((k1 + k) as usize) * side + (k2 + k) as usize];
        for k1 in -k..=k {
            for k2 in -k..=k {
                let d = (at(k1, k2) - at(-k1, -k2).conj()).norm();
                if d > tol {
                    return Err(SpectralError::NotHermitian { k1, k2, defect: d });
                }
            }
        }
        let mut out = Self::from_fn(max_freq, |k1, k2| at(k1, k2));
        // keep the k2 = 0 row exactly as stored on the k1 >= 0 side
        out.support = out.measured_support();
        Ok(out)
    }

    /// Full `(2K+1)^2` row-major coefficient array (`k1` outer, `k2` inner).
    pub fn to_full(&self) -> Vec<Complex64> {
        let k = self.k as i64;
        let mut v = Vec::with_capacity((2 * self.k + 1).pow(2));
        for k1 in -k..=k {
            for k2 in -k..=k {
                v.push(self.get(k1, k2));
            }
        }
        v
    }

    #[inline]
    pub fn max_freq(&self) -> usize {
        self.k
    }

    pub fn grid(&self) -> FourierGrid {
        FourierGrid::for_max_freq(self.k)
    }

    /// Declared support radius: `fhat(k) = 0` exactly for `|k| > support_radius()`.
    #[inline]
    pub fn support_radius(&self) -> f64 {
        self.support
    }

    /// Largest `|k|` carrying a nonzero coefficient (0 for the zero field).
    pub fn measured_support(&self) -> f64 {
        let mut r2 = 0i64;
        self.for_each_stored(|k1, k2, c| {
            if c != ZERO {
                r2 = r2.max(k1 * k1 + k2 * k2);
            }
        });
        (r2 as f64).sqrt()
    }

    /// Tightens or loosens the declared support. Fails if a nonzero coefficient
    /// lies outside the new radius.
    pub fn with_support(mut self, radius: f64) -> Result<Self, SpectralError> {
        let m = self.measured_support();
        if m > radius + 1e-9 {
            return Err(SpectralError::SupportViolation {
                declared: radius,
                measured: m,
            });
        }
        self.support = radius.min(self.k as f64 * std::f64::consts::SQRT_2);
        Ok(self)
    }

    pub(crate) fn set_support_unchecked(&mut self, radius: f64) {
        self.support = radius;
    }

    #[inline]
    pub(crate) fn index(&self, k1: i64, k2: i64) -> usize {
        debug_assert!(k2 >= 0);
        ((k1 + self.k as i64) as usize) * (self.k + 1) + k2 as usize
    }

    #[inline]
    pub(crate) fn raw(&self) -> &[Complex64] {
        &self.coeffs
    }

    #[inline]
    pub(crate) fn raw_mut(&mut self) -> &mut [Complex64] {
        &mut self.coeffs
    }

    /// Coefficient at any lattice point (zero outside the stored box).
    #[inline]
    pub fn get(&self, k1: i64, k2: i64) -> Complex64 {
        let k = self.k as i64;
        if k1.abs() > k || k2.abs() > k {
            return ZERO;
        }
        if k2 >= 0 {
            self.coeffs[self.index(k1, k2)]
        } else {
            self.coeffs[self.index(-k1, -k2)].conj()
        }
    }

    /// Sets `fhat(k)` and `fhat(-k)` consistently.
    pub fn set(&mut self, k1: i64, k2: i64, v: Complex64) {
        let k = self.k as i64;
        assert!(k1.abs() <= k && k2.abs() <= k, "mode ({k1},{k2}) outside K={k}");
        let (a, b, v) = if k2 > 0 || (k2 == 0 && k1 >= 0) {
            (k1, k2, v)
        } else {
            (-k1, -k2, v.conj())
        };
        let v = if a == 0 && b == 0 { Complex64::new(v.re, 0.0) } else { v };
        let i = self.index(a, b);
        self.coeffs[i] = v;
        if b == 0 && a != 0 {
            let j = self.index(-a, 0);
            self.coeffs[j] = v.conj();
        }
        let r = ((a * a + b * b) as f64).sqrt();
        if v != ZERO && r > self.support {
            self.support = r;
        }
    }

    /// Visits every stored coefficient (half-plane, including the mirrored part of row k2 = 0).
    pub fn for_each_stored(&self, mut visit: impl FnMut(i64, i64, Complex64)) {
        let k = self.k as i64;
        let w = self.k + 1;
        for (r, row) in self.coeffs.chunks(w).enumerate() {
            let k1 = r as i64 - k;
            for (k2, &c) in row.iter().enumerate() {
                visit(k1, k2 as i64, c);
            }
        }
    }

    /// Visits one representative of each `{k, -k}` pair with its multiplicity
    /// (1 for `k = 0`, 2 otherwise). Useful for real inner products.
    pub fn for_each_half(&self, mut visit: impl FnMut(i64, i64, Complex64, f64)) {
        self.for_each_stored(|k1, k2, c| {
            if k2 == 0 && k1 < 0 {
                return;
            }
            let mult = if k1 == 0 && k2 == 0 { 1.0 } else { 2.0 };
            visit(k1, k2, c, mult);
        });
    }

    #[inline]
    pub fn mean(&self) -> f64 {
        self.coeffs[self.index(0, 0)].re
    }

    #[inline]
    pub fn is_mean_free(&self) -> bool {
        self.coeffs[self.index(0, 0)] == ZERO
    }

    pub fn remove_mean(mut self) -> Self {
        let i = self.index(0, 0);
        self.coeffs[i] = ZERO;
        self
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|c| *c == ZERO)
    }

    /// Copy with a different coefficient box. Fails if nonzero modes would be dropped.
    pub fn resized(&self, max_freq: usize) -> Result<Self, SpectralError> {
        if max_freq < self.k {
            let m = self.max_abs_index();
            if m > max_freq as i64 {
                return Err(SpectralError::Truncation {
                    from: self.k,
                    to: max_freq,
                });
            }
        }
        Ok(self.truncated(max_freq))
    }

    /// Copy on a different coefficient box, silently dropping modes outside it.
    pub fn truncated(&self, max_freq: usize) -> Self {
        let mut out = Self::zeros(max_freq);
        let kk = self.k.min(max_freq) as i64;
        for k1 in -kk..=kk {
            let src = self.index(k1, 0);
            let dst = out.index(k1, 0);
            let len = kk as usize + 1;
            out.coeffs[dst..dst + len].copy_from_slice(&self.coeffs[src..src + len]);
        }
        out.support = self.support.min(max_freq as f64 * std::f64::consts::SQRT_2);
        out
    }

    /// Largest `max(|k1|, |k2|)` over nonzero coefficients.
    fn max_abs_index(&self) -> i64 {
        let mut m = 0;
        self.for_each_stored(|k1, k2, c| {
            if c != ZERO {
                m = m.max(k1.abs()).max(k2);
            }
        });
        m
    }

    pub fn scale(&self, c: f64) -> Self {
        let mut out = self.clone();
        out.scale_in_place(c);
        out
    }

    pub fn scale_in_place(&mut self, c: f64) {
        for v in &mut self.coeffs {
            *v *= c;
        }
        if c == 0.0 {
            self.support = 0.0;
        }
    }

    /// `self + c * other`, on the larger of the two boxes.
    pub fn axpy(&self, c: f64, other: &SpectralField) -> Self {
        let k = self.k.max(other.k);
        let mut out = if self.k == k { self.clone() } else { self.truncated(k) };
        out.add_scaled_in_place(c, other);
        out
    }

    /// `self += c * other`; `other` must fit in `self`'s box.
    pub fn add_scaled_in_place(&mut self, c: f64, other: &SpectralField) {
        assert!(other.k <= self.k, "add: box K={} does not fit in K={}", other.k, self.k);
        let kk = other.k as i64;
        let w = other.k + 1;
        for k1 in -kk..=kk {
            let src = other.index(k1, 0);
            let dst = self.index(k1, 0);
            for j in 0..w {
                self.coeffs[dst + j] += other.coeffs[src + j] * c;
            }
        }
        if c != 0.0 {
            self.support = self.support.max(other.support);
        }
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        self.axpy(1.0, other)
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        self.axpy(-1.0, other)
    }

    /// Largest coefficient modulus.
    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().fold(0.0, |m, c| m.max(c.norm()))
    }

    /// Largest coefficient-wise difference, over the union of both boxes.
    pub fn max_abs_diff(&self, other: &SpectralField) -> f64 {
        self.sub(other).max_abs()
    }

    /// `sum_k |fhat(k)|^2` over the whole lattice.
    pub fn coeff_energy(&self) -> f64 {
        let mut s = 0.0;
        self.for_each_half(|_, _, c, m| s += m * c.norm_sqr());
        s
    }

    /// L2 norm by Parseval: `||f||^2 = (2 pi)^2 sum |fhat|^2`.
    pub fn l2_norm(&self) -> f64 {
        (4.0 * PI * PI * self.coeff_energy()).sqrt()
    }

    /// Real L2 inner product `int f g dx = (2 pi)^2 sum fhat conj(ghat)`.
    pub fn inner(&self, other: &SpectralField) -> f64 {
        let (small, big) = if self.k <= other.k { (self, other) } else { (other, self) };
        let mut s = 0.0;
        small.for_each_half(|k1, k2, c, m| {
            let d = big.get(k1, k2);
            s += m * (c.re * d.re + c.im * d.im);
        });
        4.0 * PI * PI * s
    }

    /// Number of nonzero stored coefficients on the half plane.
    pub fn nonzero_count(&self) -> usize {
        let mut n = 0;
        self.for_each_half(|_, _, c, _| {
            if c != ZERO {
                n += 1;
            }
        });
        n
    }

    /// Real trigonometric monomial `amp * cos(k.x)`.
    pub fn cosine(max_freq: usize, k1: i64, k2: i64, amp: f64) -> Self {
        let mut f = Self::zeros(max_freq);
        if k1 == 0 && k2 == 0 {
            f.set(0, 0, Complex64::new(amp, 0.0));
        } else {
            f.set(k1, k2, Complex64::new(0.5 * amp, 0.0));
        }
        f
    }

    /// Real trigonometric monomial `amp * sin(k.x)`.
    pub fn sine(max_freq: usize, k1: i64, k2: i64, amp: f64) -> Self {
        let mut f = Self::zeros(max_freq);
        if k1 != 0 || k2 != 0 {
            f.set(k1, k2, Complex64::new(0.0, -0.5 * amp));
        }
        f
    }

    /// Constant field.
    pub fn constant(max_freq: usize, c: f64) -> Self {
        Self::cosine(max_freq, 0, 0, c)
    }

    /// Point evaluation by direct summation (for tests and small fields).
    pub fn eval(&self, x1: f64, x2: f64) -> f64 {
        let mut s = 0.0;
        self.for_each_half(|k1, k2, c, m| {
            if c != ZERO {
                let ph = k1 as f64 * x1 + k2 as f64 * x2;
                s += m * (c.re * ph.cos() - c.im * ph.sin());
            }
        });
        s
    }

    /// Applies `map` to every stored coefficient with its wave vector.
    /// The map must respect `map(-k, conj c) = conj(map(k, c))`.
    pub(crate) fn map_coeffs(&self, mut map: impl FnMut(i64, i64, Complex64) -> Complex64) -> Self {
        let mut out = self.clone();
        let k = self.k as i64;
        let w = self.k + 1;
        for (r, row) in out.coeffs.chunks_mut(w).enumerate() {
            let k1 = r as i64 - k;
            for (k2, c) in row.iter_mut().enumerate() {
                if *c != ZERO {
                    *c = map(k1, k2 as i64, *c);
                }
            }
        }
        out
    }
}
