//! Bilinear operations: alias-free products, velocity, inverse divergence, commutators.

use num_complex::Complex64;

use super::fft::{forward_transform_to, inverse_transform, product_size, PhysField};
use super::multiplier::Multiplier;
use super::norms::tight;
use super::{SpectralError, SpectralField};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Sparse factors with at most this many nonzero modes are convolved directly.
const SPARSE_MODES: usize = 24;

/// Zeros every coefficient with `|k| > radius` and declares that radius.
pub fn clamp_support(mut f: SpectralField, radius: f64) -> SpectralField {
    let kk = f.max_freq() as i64;
    let w = f.max_freq() + 1;
    let r2max = radius * radius;
    for (r, row) in f.raw_mut().chunks_mut(w).enumerate() {
        let k1 = r as i64 - kk;
        for (k2, c) in row.iter_mut().enumerate() {
            if ((k1 * k1) as f64 + (k2 * k2) as f64) > r2max + 1e-9 {
                *c = ZERO;
            }
        }
    }
    let cap = radius.min(f.max_freq() as f64 * std::f64::consts::SQRT_2);
    f.set_support_unchecked(cap);
    f
}

/// Nonzero modes over the full lattice (both members of each conjugate pair).
fn nonzero_modes(f: &SpectralField) -> Vec<(i64, i64, Complex64)> {
    let mut v = Vec::new();
    f.for_each_half(|k1, k2, c, _| {
        if c != ZERO {
            v.push((k1, k2, c));
            if k1 != 0 || k2 != 0 {
                v.push((-k1, -k2, c.conj()));
            }
        }
    });
    v
}

fn sparse_product(sparse: &[(i64, i64, Complex64)], g: &SpectralField, k_out: usize, radius: f64) -> SpectralField {
    let mut out = SpectralField::from_fn(k_out, |k1, k2| {
        let mut s = ZERO;
        for &(m1, m2, c) in sparse {
            s += c * g.get(k1 - m1, k2 - m2);
        }
        s
    });
    out = clamp_support(out, radius);
    out
}

/// Exact coefficients of `f g`. Support radii add; the product is formed on a
/// zero-padded grid so nothing aliases.
pub fn product(f: &SpectralField, g: &SpectralField) -> SpectralField {
    let f = tight(f);
    let g = tight(g);
    let radius = f.support_radius() + g.support_radius();
    let k_out = f.max_freq() + g.max_freq();
    let nf = f.nonzero_count();
    let ng = g.nonzero_count();
    if nf == 0 || ng == 0 {
        return SpectralField::zeros(k_out);
    }
    if nf.min(ng) <= SPARSE_MODES {
        let (s, d) = if nf <= ng { (&*f, &*g) } else { (&*g, &*f) };
        return sparse_product(&nonzero_modes(s), d, k_out, radius);
    }
    let n = product_size(f.max_freq(), g.max_freq());
    let a = inverse_transform(&f, n).expect("product grid");
    let b = inverse_transform(&g, n).expect("product grid");
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    let out = forward_transform_to(&PhysField { n, data }, k_out).expect("product grid");
    clamp_support(out, radius)
}

/// Grid size on which a quadratic combination of fields with box `k_in` is
/// resolved without aliasing into the output box `k_out`.
pub fn quadratic_size(k_in: usize, k_out: usize) -> usize {
    super::fft::good_size((2 * k_in + k_out + 1).max(2 * k_out + 2))
}

/// Evaluates several fields on one grid, combines the samples pointwise with a
/// combination of degree at most two, and transforms back onto the box `k_out`,
/// zeroing modes beyond `radius`.
pub fn pointwise(fields: &[&SpectralField], k_out: usize, radius: f64, combine: impl Fn(&[f64]) -> f64) -> SpectralField {
    let kin = fields.iter().map(|f| f.max_freq()).max().unwrap_or(0);
    pointwise_on(fields, quadratic_size(kin, k_out), k_out, radius, combine)
}

/// As [`pointwise`] on an explicit grid size `n`; alias-free only if `n` is large enough
/// for the nonlinearity in `combine`.
pub fn pointwise_on(fields: &[&SpectralField], n: usize, k_out: usize, radius: f64, combine: impl Fn(&[f64]) -> f64) -> SpectralField {
    let phys: Vec<PhysField> = fields
        .iter()
        .map(|f| inverse_transform(f, n).expect("pointwise grid"))
        .collect();
    let mut buf = vec![0.0; fields.len()];
    let data = (0..n * n)
        .map(|i| {
            for (b, p) in buf.iter_mut().zip(&phys) {
                *b = p.data[i];
            }
            combine(&buf)
        })
        .collect();
    let out = forward_transform_to(&PhysField { n, data }, k_out).expect("pointwise grid");
    clamp_support(out, radius)
}

/// `u = grad^perp Lambda^-1 theta = (-R_2 theta, R_1 theta)`.
pub fn perp_velocity(theta: &SpectralField) -> Result<[SpectralField; 2], SpectralError> {
    let r1 = Multiplier::Riesz(1).apply(theta)?;
    let r2 = Multiplier::Riesz(2).apply(theta)?;
    Ok([r2.scale(-1.0), r1])
}

/// `grad f = (d_1 f, d_2 f)`.
pub fn gradient(f: &SpectralField) -> [SpectralField; 2] {
    [
        Multiplier::Derivative(1).apply(f).expect("total"),
        Multiplier::Derivative(2).apply(f).expect("total"),
    ]
}

/// `grad^perp f = (-d_2 f, d_1 f)`.
pub fn perp_gradient(f: &SpectralField) -> [SpectralField; 2] {
    let [a, b] = gradient(f);
    [b.scale(-1.0), a]
}

/// `Delta^-1 div v`: `qhat(k) = -i k.vhat(k) / |k|^2`, `qhat(0) = 0`.
pub fn inverse_div(v: &[SpectralField; 2]) -> Result<SpectralField, SpectralError> {
    if !v[0].is_mean_free() || !v[1].is_mean_free() {
        return Err(SpectralError::NotMeanFree("inverse_div".into()));
    }
    let k = v[0].max_freq().max(v[1].max_freq());
    let mut out = SpectralField::from_fn(k, |k1, k2| {
        let r2 = (k1 * k1 + k2 * k2) as f64;
        if r2 == 0.0 {
            return ZERO;
        }
        let s = v[0].get(k1, k2) * k1 as f64 + v[1].get(k1, k2) * k2 as f64;
        Complex64::new(0.0, -1.0) * s / r2
    });
    let radius = v[0].support_radius().max(v[1].support_radius());
    out = clamp_support(out, radius);
    Ok(out)
}

/// `Delta^-1 g` on mean-free `g` (zero mode to 0).
pub fn inverse_laplacian(g: &SpectralField) -> SpectralField {
    let s = g.support_radius();
    let mut out = g.map_coeffs(|k1, k2, c| {
        let r2 = (k1 * k1 + k2 * k2) as f64;
        if r2 == 0.0 {
            ZERO
        } else {
            -c / r2
        }
    });
    out.set_support_unchecked(s);
    out
}

fn riesz_any_mean(f: &SpectralField, j: u8) -> SpectralField {
    let f0 = f.clone().remove_mean();
    Multiplier::Riesz(j).apply(&f0).expect("mean removed")
}

/// `[R^perp . , grad psi] theta = -[R_2 ., d_1 psi] theta + [R_1 ., d_2 psi] theta`
/// with `[R_j ., g] theta = R_j(g theta) - g R_j theta`.
pub fn commutator(theta: &SpectralField, psi: &SpectralField) -> Result<SpectralField, SpectralError> {
    if !theta.is_mean_free() {
        return Err(SpectralError::NotMeanFree("commutator".into()));
    }
    let [d1, d2] = gradient(psi);
    let r1 = Multiplier::Riesz(1).apply(theta)?;
    let r2 = Multiplier::Riesz(2).apply(theta)?;
    let a = product(&d1, theta);
    let b = product(&d2, theta);
    let c = product(&d1, &r2).sub(&product(&d2, &r1));
    let out = riesz_any_mean(&b, 1).sub(&riesz_any_mean(&a, 2)).add(&c);
    let radius = theta.support_radius() + psi.support_radius();
    Ok(clamp_support(out, radius))
}
