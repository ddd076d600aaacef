//! Real 2D transforms between half-plane coefficient stores and physical grids.
//!
//! Physical samples are `f(2 pi j1 / N, 2 pi j2 / N)` stored row-major with `j1` outer.

use std::cell::RefCell;
use std::sync::Arc;

use num_complex::Complex64;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};
use rustfft::{Fft, FftPlanner};

use super::{SpectralError, SpectralField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const BATCH: usize = 8;

/// Samples of a real field on a uniform `n x n` grid.
#[derive(Clone, Debug, PartialEq)]
pub struct PhysField {
    pub n: usize,
    pub data: Vec<f64>,
}

impl PhysField {
    pub fn zeros(n: usize) -> Self {
        PhysField { n, data: vec![0.0; n * n] }
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let h = 2.0 * std::f64::consts::PI / n as f64;
        let mut data = Vec::with_capacity(n * n);
        for j1 in 0..n {
            for j2 in 0..n {
                data.push(f(j1 as f64 * h, j2 as f64 * h));
            }
        }
        PhysField { n, data }
    }

    #[inline]
    pub fn at(&self, j1: usize, j2: usize) -> f64 {
        self.data[j1 * self.n + j2]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Index and value of the smallest sample.
    pub fn argmin(&self) -> (usize, usize, f64) {
        let (mut bi, mut bv) = (0, f64::INFINITY);
        for (i, &v) in self.data.iter().enumerate() {
            if v < bv {
                bi = i;
                bv = v;
            }
        }
        (bi / self.n, bi % self.n, bv)
    }
}

/// Smallest even `n >= m` whose only prime factors are 2, 3 and 5.
pub fn good_size(m: usize) -> usize {
    let mut n = m.max(2);
    if n % 2 == 1 {
        n += 1;
    }
    loop {
        let mut r = n;
        for p in [2, 3, 5] {
            while r % p == 0 {
                r /= p;
            }
        }
        if r == 1 {
            return n;
        }
        n += 2;
    }
}

/// Grid size on which a product with output box `k_out` of inputs with boxes
/// `k1, k2` is formed without aliasing (the zero-padding rule `N >= 2(K1+K2)+2`).
pub fn product_size(k1: usize, k2: usize) -> usize {
    good_size(2 * (k1 + k2) + 2)
}

struct Plans {
    real: RealFftPlanner<f64>,
    complex: FftPlanner<f64>,
}

thread_local! {
    static PLANS: RefCell<Plans> = RefCell::new(Plans {
        real: RealFftPlanner::new(),
        complex: FftPlanner::new(),
    });
}

fn plans(n: usize) -> (Arc<dyn RealToComplex<f64>>, Arc<dyn ComplexToReal<f64>>, Arc<dyn Fft<f64>>, Arc<dyn Fft<f64>>) {
    PLANS.with(|p| {
        let mut p = p.borrow_mut();
        let r2c = p.real.plan_fft_forward(n);
        let c2r = p.real.plan_fft_inverse(n);
        let fwd = p.complex.plan_fft_forward(n);
        let inv = p.complex.plan_fft_inverse(n);
        (r2c, c2r, fwd, inv)
    })
}

/// Point values of `f` on an `n x n` grid. Requires `n` even and `n >= 2K + 2`.
pub fn inverse_transform(f: &SpectralField, n: usize) -> Result<PhysField, SpectralError> {
    let k = f.max_freq();
    if n % 2 != 0 || n < 2 * k + 2 {
        return Err(SpectralError::GridTooSmall { needed: 2 * k + 2, got: n });
    }
    let (_, c2r, _, inv) = plans(n);
    let m = n / 2 + 1;
    let mut half = vec![ZERO; n * m];
    let kk = k as i64;
    let raw = f.raw();
    let w = k + 1;

    let mut bufs = vec![vec![ZERO; n]; BATCH];
    let mut scratch = vec![ZERO; inv.get_inplace_scratch_len()];
    let mut c0 = 0;
    while c0 <= k {
        let cols = BATCH.min(k + 1 - c0);
        for (b, buf) in bufs.iter_mut().take(cols).enumerate() {
            buf.iter_mut().for_each(|v| *v = ZERO);
            let k2 = c0 + b;
            for k1 in -kk..=kk {
                let v = raw[((k1 + kk) as usize) * w + k2];
                buf[k1.rem_euclid(n as i64) as usize] = v;
            }
            inv.process_with_scratch(buf, &mut scratch);
        }
        for j1 in 0..n {
            let row = &mut half[j1 * m..j1 * m + m];
            for (b, buf) in bufs.iter().take(cols).enumerate() {
                row[c0 + b] = buf[j1];
            }
        }
        c0 += cols;
    }

    let mut out = vec![0.0; n * n];
    let mut rscratch = vec![ZERO; c2r.get_scratch_len()];
    for (row, dst) in half.chunks_mut(m).zip(out.chunks_mut(n)) {
        row[0].im = 0.0;
        row[m - 1].im = 0.0;
        c2r.process_with_scratch(row, dst, &mut rscratch)
            .expect("c2r length mismatch");
    }
    Ok(PhysField { n, data: out })
}

/// Coefficients of the samples, truncated to the box `|k_i| <= k_out`.
/// Requires `n >= 2 k_out + 2`. Normalization: `fhat(k) = N^-2 sum f(x_j) e^{-i k.x_j}`.
pub fn forward_transform_to(values: &PhysField, k_out: usize) -> Result<SpectralField, SpectralError> {
    let n = values.n;
    if values.data.len() != n * n {
        return Err(SpectralError::SizeMismatch { expected: n * n, got: values.data.len() });
    }
    if n % 2 != 0 || n < 2 * k_out + 2 {
        return Err(SpectralError::GridTooSmall { needed: 2 * k_out + 2, got: n });
    }
    let (r2c, _, fwd, _) = plans(n);
    let m = n / 2 + 1;
    let mut half = vec![ZERO; n * m];
    let mut rin = vec![0.0; n];
    let mut rscratch = vec![ZERO; r2c.get_scratch_len()];
    for (src, row) in values.data.chunks(n).zip(half.chunks_mut(m)) {
        rin.copy_from_slice(src);
        r2c.process_with_scratch(&mut rin, row, &mut rscratch)
            .expect("r2c length mismatch");
    }

    let mut out = SpectralField::zeros(k_out);
    let kk = k_out as i64;
    let w = k_out + 1;
    let norm = 1.0 / (n as f64 * n as f64);
    let mut bufs = vec![vec![ZERO; n]; BATCH];
    let mut scratch = vec![ZERO; fwd.get_inplace_scratch_len()];
    let mut c0 = 0;
    while c0 <= k_out {
        let cols = BATCH.min(k_out + 1 - c0);
        for j1 in 0..n {
            let row = &half[j1 * m..j1 * m + m];
            for (b, buf) in bufs.iter_mut().take(cols).enumerate() {
                buf[j1] = row[c0 + b];
            }
        }
        let raw = out.raw_mut();
        for (b, buf) in bufs.iter_mut().take(cols).enumerate() {
            fwd.process_with_scratch(buf, &mut scratch);
            let k2 = c0 + b;
            for k1 in -kk..=kk {
                raw[((k1 + kk) as usize) * w + k2] = buf[k1.rem_euclid(n as i64) as usize] * norm;
            }
        }
        c0 += cols;
    }
    // exact Hermitian symmetry on the k2 = 0 row and a real mean
    {
        let raw = out.raw_mut();
        for k1 in 1..=kk {
            let p = raw[((k1 + kk) as usize) * w];
            raw[((kk - k1) as usize) * w] = p.conj();
        }
        raw[(kk as usize) * w].im = 0.0;
    }
    out.set_support_unchecked(k_out as f64 * std::f64::consts::SQRT_2);
    Ok(out)
}

/// Coefficients of the samples on the largest box the grid resolves (`K = N/2 - 1`).
pub fn forward_transform(values: &PhysField) -> Result<SpectralField, SpectralError> {
    if values.n < 2 {
        return Err(SpectralError::GridTooSmall { needed: 2, got: values.n });
    }
    forward_transform_to(values, values.n / 2 - 1)
}
