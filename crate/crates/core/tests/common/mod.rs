#![allow(dead_code)]
//! Independent reference implementations used by the integration tests.
//! Everything here works on full `(2K+1)^2` coefficient arrays with direct sums.

use std::collections::HashMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sqg_core::spectral::SpectralField;

pub type Modes = HashMap<(i64, i64), Complex64>;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Random real field with all modes in the box `|k_i| <= k` (mean-free if asked).
pub fn random_field(k: usize, seed: u64, mean_free: bool) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpectralField::from_fn(k, |k1, k2| {
        if mean_free && k1 == 0 && k2 == 0 {
            return c(0.0, 0.0);
        }
        c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
    })
}

/// Random real field supported in the disk `|k| <= r`.
pub fn random_disk_field(k: usize, r: f64, seed: u64) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    SpectralField::from_fn(k, |k1, k2| {
        let a: f64 = rng.random_range(-1.0..1.0);
        let b: f64 = rng.random_range(-1.0..1.0);
        if (k1 == 0 && k2 == 0) || ((k1 * k1 + k2 * k2) as f64) > r * r {
            c(0.0, 0.0)
        } else {
            c(a, b)
        }
    })
}

pub fn modes_of(f: &SpectralField) -> Modes {
    let k = f.max_freq() as i64;
    let mut m = Modes::new();
    for k1 in -k..=k {
        for k2 in -k..=k {
            let v = f.get(k1, k2);
            if v != c(0.0, 0.0) {
                m.insert((k1, k2), v);
            }
        }
    }
    m
}

/// Direct convolution `(fg)^(k) = sum_m fhat(m) ghat(k - m)`.
pub fn convolve(f: &Modes, g: &Modes) -> Modes {
    let mut out = Modes::new();
    for (&(a1, a2), &x) in f {
        for (&(b1, b2), &y) in g {
            *out.entry((a1 + b1, a2 + b2)).or_insert(c(0.0, 0.0)) += x * y;
        }
    }
    out
}

pub fn scale_modes(f: &Modes, sym: impl Fn(i64, i64) -> Complex64) -> Modes {
    f.iter().map(|(&k, &v)| (k, v * sym(k.0, k.1))).collect()
}

pub fn add_modes(a: &Modes, b: &Modes, sb: f64) -> Modes {
    let mut out = a.clone();
    for (&k, &v) in b {
        *out.entry(k).or_insert(c(0.0, 0.0)) += v * sb;
    }
    out
}

/// `max_k |f(k) - g(k)|` relative to `max_k |g(k)|`.
pub fn rel_diff(f: &SpectralField, g: &Modes) -> f64 {
    let fm = modes_of(f);
    let mut scale: f64 = 0.0;
    let mut err: f64 = 0.0;
    for (k, v) in g {
        scale = scale.max(v.norm());
        err = err.max((fm.get(k).copied().unwrap_or(c(0.0, 0.0)) - v).norm());
    }
    for (k, v) in &fm {
        if !g.contains_key(k) {
            err = err.max(v.norm());
        }
    }
    err / scale.max(1e-300)
}

/// Brute-force forward DFT with the `(2 pi)^-2 int` normalization.
pub fn dft_forward(values: &[f64], n: usize, k: i64) -> Modes {
    let mut out = Modes::new();
    let h = 2.0 * PI / n as f64;
    for k1 in -k..=k {
        for k2 in -k..=k {
            let mut s = c(0.0, 0.0);
            for j1 in 0..n {
                for j2 in 0..n {
                    let ph = -(k1 as f64 * j1 as f64 + k2 as f64 * j2 as f64) * h;
                    s += c(ph.cos(), ph.sin()) * values[j1 * n + j2];
                }
            }
            out.insert((k1, k2), s / (n * n) as f64);
        }
    }
    out
}

/// Point values by direct summation.
pub fn eval_modes(f: &Modes, x1: f64, x2: f64) -> f64 {
    let mut s = c(0.0, 0.0);
    for (&(k1, k2), &v) in f {
        let ph = k1 as f64 * x1 + k2 as f64 * x2;
        s += v * c(ph.cos(), ph.sin());
    }
    s.re
}

pub fn riesz_sym(j: u8) -> impl Fn(i64, i64) -> Complex64 {
    move |k1, k2| {
        let r = ((k1 * k1 + k2 * k2) as f64).sqrt();
        if r == 0.0 {
            return c(0.0, 0.0);
        }
        let kj = if j == 1 { k1 } else { k2 } as f64;
        c(0.0, kj / r)
    }
}

pub fn deriv_sym(j: u8) -> impl Fn(i64, i64) -> Complex64 {
    move |k1, k2| c(0.0, if j == 1 { k1 } else { k2 } as f64)
}
