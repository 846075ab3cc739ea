//! Seeded samplers for the distributions the pipeline draws from.
//!
//! Everything here is a pure function of the RNG that is passed in, which is
//! what makes whole experiment runs replayable from a single seed.

use rand::Rng;

/// Standard normal draw via Marsaglia's polar method.
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    loop {
        let u = 2.0 * rng.random::<f64>() - 1.0;
        let v = 2.0 * rng.random::<f64>() - 1.0;
        let s = u * u + v * v;
        if s > 0.0 && s < 1.0 {
            return u * (-2.0 * s.ln() / s).sqrt();
        }
    }
}

/// Gamma(shape, 1) draw using Marsaglia & Tsang's squeeze method, with the
/// usual `U^(1/shape)` boost for shape < 1.
pub fn gamma<R: Rng + ?Sized>(shape: f64, rng: &mut R) -> f64 {
    assert!(shape > 0.0 && shape.is_finite(), "gamma shape must be > 0");
    if shape < 1.0 {
        let g = gamma(shape + 1.0, rng);
        let u: f64 = rng.random();
        return g * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let x = standard_normal(rng);
        let v = 1.0 + c * x;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u: f64 = rng.random();
        if u < 1.0 - 0.0331 * x.powi(4) {
            return d * v;
        }
        if u.ln() < 0.5 * x * x + d * (1.0 - v + v.ln()) {
            return d * v;
        }
    }
}

/// Beta(a, b) draw as `X / (X + Y)` for independent gammas.
pub fn beta<R: Rng + ?Sized>(a: f64, b: f64, rng: &mut R) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta shapes must be > 0");
    let x = gamma(a, rng);
    let y = gamma(b, rng);
    if x + y == 0.0 {
        // Both gammas underflowed (tiny shapes); the limit law is Bernoulli.
        return if rng.random::<f64>() < a / (a + b) {
            1.0
        } else {
            0.0
        };
    }
    x / (x + y)
}
