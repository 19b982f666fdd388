//! Hull functions of relaxed supercells and the convergence study.
//!
//! A relaxed `(p, q)` state induces a piecewise-linear circle map: sorting
//! the fractional positions `j p/q mod 1` against the abscissas gives a
//! monotone graph exactly when the state is ordered like a ground state.
//! Comparing hulls of coarse approximants against a fine reference, after
//! aligning the free phase, measures how fast the commensurate ground
//! states approach the incommensurate limit.

use crate::fkmodel::{SiteModel, SupercellState};
use crate::relax::{approximants, minimize, RelaxOptions};
use crate::{Error, Result};
use rayon::prelude::*;
use std::io::Write as _;

/// Piecewise-linear hull function built from one relaxed supercell.
///
/// Stores values at the breakpoints `i/q` for `i = 0..q` plus the closing
/// value at `x = 1`; evaluation extends by `F(x + 1) = F(x) + 1`.
#[derive(Debug, Clone)]
pub struct HullFn {
    p: i64,
    q: i64,
    /// `values[i]` at `x = i/q`; `values[q] = values[0] + 1`.
    values: Vec<f64>,
    /// Source abscissas in site order, translated so the first lies in
    /// `[0, 1)`.
    abscissas: Vec<f64>,
    monotone: bool,
    /// Phase found by the last alignment against a reference.
    phase: Option<f64>,
}

/// Builds the hull function of `state`.
///
/// Site `j` contributes at breakpoint `(j p mod q)/q`; the stored value is
/// `{s_j - s_0} + s_0` after translating the state so `s_0` lies in
/// `[0, 1)`. The map is marked monotone when the breakpoint values
/// strictly increase.
pub fn build_hull(state: &SupercellState) -> HullFn {
    let q = state.q();
    let p = state.p();
    let shift = state.abscissas()[0].floor();
    let abscissas: Vec<f64> = state.abscissas().iter().map(|s| s - shift).collect();
    let base = abscissas[0];
    let mut values = vec![0.0; q + 1];
    for (j, &s) in abscissas.iter().enumerate() {
        let i = (j as i64 * p).rem_euclid(q as i64) as usize;
        let d = s - base;
        values[i] = (d - d.floor()) + base;
    }
    values[q] = values[0] + 1.0;
    let monotone = values.windows(2).all(|w| w[1] > w[0]);
    HullFn {
        p,
        q: q as i64,
        values,
        abscissas,
        monotone,
        phase: None,
    }
}

impl HullFn {
    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> i64 {
        self.q
    }

    /// Breakpoint values on `[0, 1]`, length `q + 1`.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Source abscissas in site order (first entry in `[0, 1)`).
    pub fn abscissas(&self) -> &[f64] {
        &self.abscissas
    }

    /// Mean advance per site, `p/q`.
    pub fn rotation(&self) -> f64 {
        self.p as f64 / self.q as f64
    }

    pub fn is_monotone(&self) -> bool {
        self.monotone
    }

    /// Phase stored by the last [`hull_error`] alignment.
    pub fn phase(&self) -> Option<f64> {
        self.phase
    }

    /// Evaluates the extended map at any real `x`.
    pub fn eval(&self, x: f64) -> f64 {
        let k = x.floor();
        let u = x - k;
        let t = u * self.q as f64;
        let i = (t.floor() as usize).min(self.q as usize - 1);
        let w = t - i as f64;
        k + self.values[i] + w * (self.values[i + 1] - self.values[i])
    }

    /// Deviation from the identity, `F(x) - x`. One-periodic.
    pub fn g(&self, x: f64) -> f64 {
        self.eval(x) - x
    }

    /// Inverts the extended map. Requires a monotone hull.
    pub fn invert(&self, y: f64) -> Result<f64> {
        if !self.monotone {
            return Err(Error::State("cannot invert a non-monotone hull".into()));
        }
        let k = (y - self.values[0]).floor();
        let yy = y - k;
        // values[0] <= yy < values[0] + 1; bisect for the cell.
        let (mut lo, mut hi) = (0usize, self.q as usize);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.values[mid] <= yy {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let dv = self.values[lo + 1] - self.values[lo];
        let w = if dv > 0.0 { (yy - self.values[lo]) / dv } else { 0.0 };
        Ok(k + (lo as f64 + w) / self.q as f64)
    }

    /// Steepest linear piece, in units where the identity has slope 1.
    /// Large values flag near-discontinuities (soliton staircases).
    pub fn max_slope(&self) -> f64 {
        let q = self.q as f64;
        self.values
            .windows(2)
            .fold(0.0_f64, |m, w| m.max((w[1] - w[0]) * q))
    }
}

/// Sup-norm distance from the sites of `f` to the reference hull, after
/// minimizing over the phase:
///
/// `min over w of max over j of |s_j - F_ref(j p/q + w)|`.
///
/// The optimal phase is stored in `f`. The reference should come from a
/// finer approximant than `f` for the distance to mean anything, but
/// nothing enforces that here.
pub fn hull_error(f: &mut HullFn, reference: &HullFn) -> Result<f64> {
    let l = f.rotation();
    let energy = |w: f64| -> f64 {
        let mut worst = 0.0_f64;
        for (j, &s) in f.abscissas.iter().enumerate() {
            worst = worst.max((s - reference.eval(j as f64 * l + w)).abs());
        }
        worst
    };
    // Center the scan where the first site is matched exactly, then cover
    // a full period at the reference's own resolution so no linear piece
    // is skipped. A non-monotone reference (strong coupling leaves defects
    // in relaxed states) cannot be inverted; the full-period scan still
    // finds the aligned phase without the centering shortcut.
    let w0 = if reference.monotone {
        reference.invert(f.abscissas[0])?
    } else {
        0.0
    };
    let n = (reference.q as usize).max(64);
    let mut best_w = w0;
    let mut best = energy(w0);
    for m in 0..=n {
        let w = w0 + (m as f64 / n as f64 - 0.5);
        let e = energy(w);
        if e < best {
            best = e;
            best_w = w;
        }
    }
    // Golden-section refinement inside the winning coarse cell. A short
    // equispaced pass first pins down the right kink interval; the
    // objective is piecewise linear and only locally unimodal.
    let mut lo = best_w - 1.0 / n as f64;
    let mut hi = best_w + 1.0 / n as f64;
    let step = (hi - lo) / 32.0;
    for m in 0..=32 {
        let w = lo + step * m as f64;
        let e = energy(w);
        if e < best {
            best = e;
            best_w = w;
        }
    }
    lo = best_w - step;
    hi = best_w + step;
    let inv_phi = 0.5 * (5.0_f64.sqrt() - 1.0);
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let mut ec = energy(c);
    let mut ed = energy(d);
    while hi - lo > 1e-10 {
        if ec < ed {
            hi = d;
            d = c;
            ed = ec;
            c = hi - inv_phi * (hi - lo);
            ec = energy(c);
        } else {
            lo = c;
            c = d;
            ec = ed;
            d = lo + inv_phi * (hi - lo);
            ed = energy(d);
        }
    }
    let w = 0.5 * (lo + hi);
    let e = energy(w);
    if e < best {
        best = e;
        best_w = w;
    }
    f.phase = Some(best_w);
    Ok(best)
}

/// Fractions of sites whose positions modulo 1 fall in the staggered band
/// `[0.35, 0.65]` and in the tight plateau band `|x - 0.5| <= 0.02`.
fn band_fractions(state: &SupercellState) -> (f64, f64) {
    let fracs = state.fractional_parts();
    let q = fracs.len() as f64;
    let wide = fracs.iter().filter(|&&x| (0.35..=0.65).contains(&x)).count();
    let tight = fracs.iter().filter(|&&x| (x - 0.5).abs() <= 0.02).count();
    (wide as f64 / q, tight as f64 / q)
}

/// One relaxed approximant in a convergence study.
#[derive(Debug, Clone)]
pub struct StudyRow {
    pub p: i64,
    pub q: i64,
    pub strain: f64,
    /// Phase-minimized sup distance to the reference hull.
    pub error: f64,
    pub converged: bool,
    pub residual: f64,
    pub iterations: usize,
    /// Fraction of sites with `s mod 1` in `[0.35, 0.65]`.
    pub staggered_fraction: f64,
    /// Fraction of sites within 0.02 of the half-integer registry.
    pub plateau_fraction: f64,
    pub max_slope: f64,
    pub monotone: bool,
}

/// Relaxes every approximant with `q <= q_max` from the uniform state and
/// measures its hull against `reference`. Rows that fail to reach the
/// solver tolerance are reported with `converged = false` rather than
/// aborting the study. Rows are independent and run in parallel; the
/// returned order is by decreasing strain, same as [`approximants`].
pub fn convergence_study(
    model: &SiteModel,
    q_max: i64,
    reference: &HullFn,
    opts: &RelaxOptions,
) -> Result<Vec<StudyRow>> {
    let rows = approximants(model.params.alpha(), q_max)?;
    rows.par_iter()
        .map(|a| {
            let initial = SupercellState::uniform(a.p, a.q as usize)?;
            let out = minimize(&initial, model, opts)?;
            let mut f = build_hull(&out.state);
            let error = hull_error(&mut f, reference)?;
            let (staggered_fraction, plateau_fraction) = band_fractions(&out.state);
            Ok(StudyRow {
                p: a.p,
                q: a.q,
                strain: a.strain,
                error,
                converged: out.converged,
                residual: out.residual,
                iterations: out.iterations,
                staggered_fraction,
                plateau_fraction,
                max_slope: f.max_slope(),
                monotone: f.is_monotone(),
            })
        })
        .collect()
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes breakpoints of `f` as CSV with columns `x,F_q(x),g(x)`.
pub fn write_hull_csv(f: &HullFn, path: &std::path::Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "x,F_q(x),g(x)")?;
    for (i, &v) in f.values.iter().enumerate() {
        let x = i as f64 / f.q as f64;
        writeln!(out, "{},{},{}", fmt(x), fmt(v), fmt(v - x))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes study rows as CSV with columns
/// `p,q,artificial_strain,error,converged_flag`.
pub fn write_study_csv(rows: &[StudyRow], path: &std::path::Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "p,q,artificial_strain,error,converged_flag")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            r.p,
            r.q,
            fmt(r.strain),
            fmt(r.error),
            r.converged
        )?;
    }
    out.flush()?;
    Ok(())
}
