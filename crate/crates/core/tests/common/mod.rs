//! Reference implementations shared by the integration tests. Everything
//! here recomputes quantities from their definitions, sharing no code
//! with the library: arc length by adaptive quadrature instead of the
//! closed form, inversion by bisection instead of Newton.

use fkchain::potential::ModelParams;

/// sqrt(1 + a^2 t^2) integrated by adaptive Simpson.
pub fn arc_quadrature(x: f64, a: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, lo: f64, hi: f64, flo: f64, fmid: f64, fhi: f64, tol: f64, depth: u32) -> f64 {
        let mid = 0.5 * (lo + hi);
        let lm = 0.5 * (lo + mid);
        let rm = 0.5 * (mid + hi);
        let flm = f(lm);
        let frm = f(rm);
        let whole = (hi - lo) / 6.0 * (flo + 4.0 * fmid + fhi);
        let left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        let right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() < 15.0 * tol {
            left + right + delta / 15.0
        } else {
            simpson(f, lo, mid, flo, flm, fmid, tol / 2.0, depth - 1)
                + simpson(f, mid, hi, fmid, frm, fhi, tol / 2.0, depth - 1)
        }
    }
    let f = move |t: f64| (1.0 + a * a * t * t).sqrt();
    simpson(&f, 0.0, x, f(0.0), f(0.5 * x), f(x), 1e-13, 40)
}

/// Inverts the arc length by bisection on [0, u].
pub fn arc_invert(u: f64, a: f64) -> f64 {
    if u == 0.0 {
        return 0.0;
    }
    let (mut lo, mut hi) = (0.0_f64, u);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if arc_quadrature(mid, a) < u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Reference lattice sum, sharing nothing with the library routine but
/// the definition.
pub fn vper_oracle(s: f64, kappa: f64, params: &ModelParams) -> f64 {
    let sf = s - s.floor();
    let a = kappa.abs();
    let c = params.lattice_cutoff as i64;
    let mut total = 0.0;
    for i in (1 - c)..=c {
        let u = (i as f64 - sf).abs();
        let x = arc_invert(u, a);
        let y = -params.h + 0.5 * kappa * x * x;
        let r = x.hypot(y);
        let x6 = (params.sigma / r).powi(6);
        total += 4.0 * params.eps * (x6 * x6 - x6);
    }
    total
}

/// Deterministic uniform samples on [0, 1).
pub fn splitmix(state: &mut u64) -> f64 {
    *state = state.wrapping_add(0x9e3779b97f4a7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    ((z ^ (z >> 31)) >> 11) as f64 / (1u64 << 53) as f64
}
