//! Point samplers for the sampled condition checks.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::linalg::norm;

/// Uniform random direction written into `out`.
pub(crate) fn direction<R: Rng>(rng: &mut R, out: &mut [f64]) {
    loop {
        for v in out.iter_mut() {
            *v = rng.sample(StandardNormal);
        }
        let n = norm(out);
        if n > 1e-300 {
            out.iter_mut().for_each(|v| *v /= n);
            return;
        }
    }
}

/// Point at the given radius in a uniform direction.
pub(crate) fn on_sphere<R: Rng>(rng: &mut R, radius: f64, out: &mut [f64]) {
    direction(rng, out);
    out.iter_mut().for_each(|v| *v *= radius);
}

/// Uniform point in the closed ball of radius `radius`.
pub(crate) fn in_ball<R: Rng>(rng: &mut R, radius: f64, out: &mut [f64]) {
    let d = out.len() as f64;
    let u: f64 = rng.random();
    on_sphere(rng, radius * u.powf(1.0 / d), out);
}

/// Uniform point in the shell `inner <= |x| <= outer` (radius uniform).
pub(crate) fn in_shell<R: Rng>(rng: &mut R, inner: f64, outer: f64, out: &mut [f64]) {
    let r = rng.random_range(inner..=outer);
    on_sphere(rng, r, out);
}

/// Point whose radius is log-uniform on `[inner, outer]`.
pub(crate) fn log_radius<R: Rng>(rng: &mut R, inner: f64, outer: f64, out: &mut [f64]) {
    let r = (rng.random_range(inner.ln()..=outer.ln())).exp();
    on_sphere(rng, r, out);
}

/// `out = x + s * z` with `z` a normal vector and `s` log-uniform up to `scale`.
pub(crate) fn near<R: Rng>(rng: &mut R, x: &[f64], scale: f64, out: &mut [f64]) {
    let s = scale * 10f64.powf(-rng.random_range(0.0..6.0));
    for (o, xi) in out.iter_mut().zip(x) {
        let z: f64 = rng.sample(StandardNormal);
        *o = xi + s * z;
    }
}

pub(crate) fn clamp_to_ball(radius: f64, x: &mut [f64]) {
    let n = norm(x);
    if n > radius {
        let s = radius / n;
        x.iter_mut().for_each(|v| *v *= s);
    }
}
