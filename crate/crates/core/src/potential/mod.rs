//! Effective substrate potential for the upper chain.
//!
//! The lower chain is replaced by a rigid parabola through the probe atom's
//! neighborhood: unit-spaced atoms sit at arc-length positions along
//! `y(x) = -h + kappa x^2 / 2` in the probe's local frame, and the probe
//! accumulates Lennard-Jones energy from the `2 * lattice_cutoff` nearest
//! of them. The resulting two-variable function `vper(s, kappa)` is
//! 1-periodic in the registry coordinate `s` and smooth in the local
//! curvature `kappa`; [`TabulatedPotential`] samples it on a grid and
//! interpolates with cubic splines so that the rest of the crate gets
//! values and derivatives in constant time.

mod table;

pub use table::{TabulatedPotential, TableDerivs};

use crate::{Error, Result};

/// The golden ratio.
pub fn golden_ratio() -> f64 {
    (1.0 + 5.0_f64.sqrt()) / 2.0
}

/// Spacing ratio of the two chains, kept in symbolic form when it is a
/// rational multiple of the golden ratio so the float value can always be
/// regenerated at full precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Alpha {
    /// `num/den` times the golden ratio.
    GoldenMultiple { num: i64, den: i64 },
    /// A plain decimal value.
    Decimal(f64),
}

impl Alpha {
    pub fn value(&self) -> f64 {
        match *self {
            Alpha::GoldenMultiple { num, den } => num as f64 * golden_ratio() / den as f64,
            Alpha::Decimal(x) => x,
        }
    }
}

/// Physical parameters of the double chain.
///
/// Lengths are measured in units of the lower-chain spacing, energies in
/// units of its own `eps` unless stated otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    alpha: Alpha,
    /// Chain separation.
    pub h: f64,
    /// Angular (bending) stiffness of the upper chain.
    pub beta: f64,
    /// Lennard-Jones well depth.
    pub eps: f64,
    /// Lennard-Jones length.
    pub sigma: f64,
    /// Half-width, in lattice spacings, of the neighbor window used for
    /// the substrate sum. The window holds `2 * lattice_cutoff` atoms.
    pub lattice_cutoff: u32,
}

impl ModelParams {
    pub fn new(
        alpha: Alpha,
        h: f64,
        beta: f64,
        eps: f64,
        sigma: f64,
        lattice_cutoff: u32,
    ) -> Result<Self> {
        let a = alpha.value();
        if !(a > 0.0 && a.is_finite()) {
            return Err(Error::Params(format!("alpha must be positive, got {a}")));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(Error::Params(format!("h must be positive, got {h}")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(Error::Params(format!("beta must be >= 0, got {beta}")));
        }
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::Params(format!("eps must be positive, got {eps}")));
        }
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::Params(format!("sigma must be positive, got {sigma}")));
        }
        if lattice_cutoff < 1 {
            return Err(Error::Params("lattice_cutoff must be >= 1".into()));
        }
        Ok(ModelParams {
            alpha,
            h,
            beta,
            eps,
            sigma,
            lattice_cutoff,
        })
    }

    /// The parameter set used throughout the examples and tests: golden
    /// spacing ratio `(8/13) * phi`, LJ length twice the lower spacing,
    /// separation just above the LJ minimum distance.
    pub fn canonical(beta: f64) -> Self {
        ModelParams::new(
            Alpha::GoldenMultiple { num: 8, den: 13 },
            2.1262,
            beta,
            1.0,
            2.0,
            30,
        )
        .expect("canonical parameters are valid")
    }

    /// Spacing ratio as a float.
    pub fn alpha(&self) -> f64 {
        self.alpha.value()
    }

    /// Spacing ratio in its stored form.
    pub fn alpha_spec(&self) -> Alpha {
        self.alpha
    }

    pub fn with_beta(&self, beta: f64) -> Self {
        let mut p = self.clone();
        p.beta = beta;
        p
    }
}

/// Lennard-Jones pair energy `4 eps ((sigma/r)^12 - (sigma/r)^6)`.
pub fn lj(r: f64, eps: f64, sigma: f64) -> Result<f64> {
    if !(r > 0.0) {
        return Err(Error::Domain(format!("LJ distance must be positive, got {r}")));
    }
    let x6 = (sigma / r).powi(6);
    Ok(4.0 * eps * (x6 * x6 - x6))
}

/// LJ energy and radial derivative in one go.
#[inline]
pub(crate) fn lj_pair(r: f64, eps: f64, sigma: f64) -> (f64, f64) {
    let x = sigma / r;
    let x6 = x.powi(6);
    let x12 = x6 * x6;
    let v = 4.0 * eps * (x12 - x6);
    let dv = 4.0 * eps * (-12.0 * x12 + 6.0 * x6) / r;
    (v, dv)
}

/// Arc length along `y = kappa x^2 / 2` from the vertex to abscissa `x`,
/// for curvature magnitude `a = |kappa| >= 0`.
#[inline]
fn arc_len(x: f64, a: f64) -> f64 {
    if a == 0.0 {
        x
    } else {
        let z = a * x;
        0.5 * (x * (1.0 + z * z).sqrt() + z.asinh() / a)
    }
}

/// Inverts `arc_len(x, a) = u` for `x >= 0`, `u >= 0`.
///
/// The arc length is increasing and convex in `x`, so Newton started at
/// `x = u` (always an overestimate) descends monotonically onto the root.
/// For small `a u` the closed form loses nothing and a short series is both
/// faster and free of `0/0` trouble at `a = 0`.
fn arc_inv(u: f64, a: f64) -> Result<f64> {
    debug_assert!(u >= 0.0 && a >= 0.0);
    let au = a * u;
    if au < 1e-4 {
        return Ok(u * (1.0 - au * au / 6.0));
    }
    let mut x = u;
    for _ in 0..60 {
        let slope = (1.0 + a * a * x * x).sqrt();
        let delta = (arc_len(x, a) - u) / slope;
        x -= delta;
        if delta.abs() <= 1e-15 * u.max(1.0) {
            return Ok(x);
        }
    }
    Err(Error::Solver(format!(
        "arc-length inversion stalled at u={u}, kappa={a}"
    )))
}

/// Returns the window of lattice-atom indices contributing to the substrate
/// sum at registry coordinate `s`: the `2 C` atoms nearest the probe's foot.
#[inline]
fn window(s: f64, c: u32) -> (i64, std::ops::RangeInclusive<i64>) {
    let base = s.floor() as i64;
    let c = c as i64;
    (base, (base - c + 1)..=(base + c))
}

/// Positions, in the probe atom's local frame, of the lower-chain atoms
/// that contribute to the substrate sum at `(s, kappa)`.
///
/// The lower chain is bent into the parabola `y(x) = -h + kappa x^2 / 2`;
/// its atoms keep unit arc-length spacing, with the atom of index `i`
/// sitting at signed arc distance `i - s` from the vertex below the probe.
/// Positive `kappa` bends the chain toward the probe. Output is ordered by
/// ascending lattice index.
pub fn parabola_neighbors(s: f64, kappa: f64, params: &ModelParams) -> Result<Vec<[f64; 2]>> {
    neighbors_for_h(s, kappa, params.h, params)
}

fn neighbors_for_h(s: f64, kappa: f64, h: f64, params: &ModelParams) -> Result<Vec<[f64; 2]>> {
    if !((h * kappa).abs() < 1.0) {
        return Err(Error::Domain(format!(
            "projection breaks down: |h kappa| = {} >= 1",
            (h * kappa).abs()
        )));
    }
    let a = kappa.abs();
    let (_, range) = window(s, params.lattice_cutoff);
    let mut out = Vec::with_capacity(2 * params.lattice_cutoff as usize);
    for i in range {
        let u = i as f64 - s;
        let x = u.signum() * arc_inv(u.abs(), a)?;
        let y = -h + 0.5 * kappa * x * x;
        out.push([x, y]);
    }
    Ok(out)
}

/// The effective substrate potential: total LJ energy between the probe at
/// the origin and the bent lower chain, truncated to the neighbor window.
///
/// 1-periodic in `s` (exactly so: only `s - floor(s)` enters) and even in
/// `s` around every integer.
pub fn vper(s: f64, kappa: f64, params: &ModelParams) -> Result<f64> {
    vper_for_h(s, kappa, params.h, params)
}

fn vper_for_h(s: f64, kappa: f64, h: f64, params: &ModelParams) -> Result<f64> {
    if !((h * kappa).abs() < 1.0) {
        return Err(Error::Domain(format!(
            "projection breaks down: |h kappa| = {} >= 1",
            (h * kappa).abs()
        )));
    }
    let sf = s - s.floor();
    let a = kappa.abs();
    let c = params.lattice_cutoff as i64;
    let mut sum = 0.0;
    for i in (1 - c)..=c {
        let u = i as f64 - sf;
        let x = arc_inv(u.abs(), a)?;
        let y = -h + 0.5 * kappa * x * x;
        let r = (x * x + y * y).sqrt();
        let x6 = (params.sigma / r).powi(6);
        sum += 4.0 * params.eps * (x6 * x6 - x6);
    }
    Ok(sum)
}

/// Substrate potential with the chain separation relaxed: minimizes the
/// lattice sum over `h` in the bracket `[h_lo, h_hi]` by golden-section
/// search. Returns `(minimum value, minimizing h)`.
///
/// Errors if the bracket does not contain an interior minimum.
pub fn vper_relaxed_h(
    s: f64,
    kappa: f64,
    params: &ModelParams,
    h_lo: f64,
    h_hi: f64,
) -> Result<(f64, f64)> {
    if !(h_lo > 0.0 && h_hi > h_lo) {
        return Err(Error::Params(format!(
            "relaxed-h bracket must satisfy 0 < h_lo < h_hi, got [{h_lo}, {h_hi}]"
        )));
    }
    if !((h_hi * kappa).abs() < 1.0) {
        return Err(Error::Domain(format!(
            "projection breaks down at h_hi: |h kappa| = {}",
            (h_hi * kappa).abs()
        )));
    }
    // Coarse scan to confirm the minimum is interior.
    let n = 33;
    let mut best_i = 0;
    let mut best_v = f64::INFINITY;
    for i in 0..n {
        let h = h_lo + (h_hi - h_lo) * i as f64 / (n - 1) as f64;
        let v = vper_for_h(s, kappa, h, params)?;
        if v < best_v {
            best_v = v;
            best_i = i;
        }
    }
    if best_i == 0 || best_i == n - 1 {
        return Err(Error::Solver(format!(
            "no interior minimum of vper over h in [{h_lo}, {h_hi}] at s={s}, kappa={kappa}"
        )));
    }
    let mut lo = h_lo + (h_hi - h_lo) * (best_i - 1) as f64 / (n - 1) as f64;
    let mut hi = h_lo + (h_hi - h_lo) * (best_i + 1) as f64 / (n - 1) as f64;
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - inv_phi * (hi - lo);
    let mut x2 = lo + inv_phi * (hi - lo);
    let mut f1 = vper_for_h(s, kappa, x1, params)?;
    let mut f2 = vper_for_h(s, kappa, x2, params)?;
    while hi - lo > 1e-10 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - inv_phi * (hi - lo);
            f1 = vper_for_h(s, kappa, x1, params)?;
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + inv_phi * (hi - lo);
            f2 = vper_for_h(s, kappa, x2, params)?;
        }
    }
    let h_min = 0.5 * (lo + hi);
    Ok((vper_for_h(s, kappa, h_min, params)?, h_min))
}

/// Builds the spline table for `vper` on an `n_s x n_kappa` grid covering
/// one period in `s` and `[-kappa_max, kappa_max]` in curvature.
pub fn tabulate(
    params: &ModelParams,
    n_s: usize,
    n_kappa: usize,
    kappa_max: f64,
) -> Result<TabulatedPotential> {
    TabulatedPotential::build(params, n_s, n_kappa, kappa_max)
}

/// Grid defaults that resolve the corrugation well past the solver
/// tolerances used elsewhere.
pub const DEFAULT_N_S: usize = 256;
pub const DEFAULT_N_KAPPA: usize = 64;

/// Default curvature half-range, scaled so that `h kappa_max = 0.2`.
pub fn default_kappa_max(params: &ModelParams) -> f64 {
    0.2 / params.h
}

/// [`tabulate`] with the default grid.
pub fn tabulate_default(params: &ModelParams) -> Result<TabulatedPotential> {
    tabulate(params, DEFAULT_N_S, DEFAULT_N_KAPPA, default_kappa_max(params))
}
