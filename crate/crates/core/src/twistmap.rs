//! The equilibrium recursion as an area-preserving map on the cylinder.
//!
//! Writing the equilibrium condition of the chain as a two-term recursion
//! in (angle, momentum) variables turns ground states into orbits. One
//! step solves the implicit equation `d1 v(s, t) = -p` for the next
//! abscissa, which is well posed because the twist condition makes
//! `d1 v(s, t)` strictly monotone in `t`, then reads the next momentum
//! off the conjugate derivative.

use crate::fkmodel::{SiteModel, SupercellState};
use crate::{Error, Result};
use std::io::Write as _;

/// A point of the cylinder dynamics with its real lift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrbitPoint {
    p: f64,
    theta: f64,
    s_lift: f64,
}

impl OrbitPoint {
    /// Builds a point from momentum and lifted abscissa; the angle is the
    /// fractional part of the lift.
    pub fn new(p: f64, s_lift: f64) -> Self {
        let mut theta = s_lift - s_lift.floor();
        if theta >= 1.0 {
            theta -= 1.0;
        }
        OrbitPoint { p, theta, s_lift }
    }

    /// Point at site `j` of a supercell, with the momentum carried into
    /// that site from its left neighbor.
    pub fn from_state(state: &SupercellState, model: &SiteModel, site: usize) -> Result<Self> {
        let q = state.q();
        if site >= q {
            return Err(Error::Params(format!(
                "site {site} out of range for q = {q}"
            )));
        }
        let s = state.abscissas()[site];
        let s_prev = if site == 0 {
            state.abscissas()[q - 1] - state.p() as f64
        } else {
            state.abscissas()[site - 1]
        };
        let (_, _, d2) = model.d1(s_prev, s)?;
        Ok(OrbitPoint::new(d2, s))
    }

    pub fn p(&self) -> f64 {
        self.p
    }

    /// Angle in `[0, 1)`.
    pub fn theta(&self) -> f64 {
        self.theta
    }

    /// Real lift of the angle.
    pub fn s_lift(&self) -> f64 {
        self.s_lift
    }
}

/// One forward application of the map.
///
/// Solves `d1 v(s, t) = -p` for `t` with a bracketed, bisection-guarded
/// Newton iteration (the left-hand side is strictly decreasing in `t`
/// under the twist condition), then returns `(d2 v(s, t), t)` as the next
/// point. Fails when the requested momentum is outside the range the
/// tabulated curvature window can produce.
pub fn step(model: &SiteModel, pt: &OrbitPoint) -> Result<OrbitPoint> {
    let s = pt.s_lift;
    let (lo, hi) = model.t_bounds(s);
    let margin = 1e-9 * (hi - lo);
    let (lo, hi) = (lo + margin, hi - margin);
    let residual = |t: f64| -> Result<(f64, f64, f64)> {
        let d = model.d2(s, t)?;
        Ok((d.d1 + pt.p, d.d12, d.d2))
    };

    // Geometric bracket expansion around the nominal spacing.
    let t0 = (s + model.params.alpha()).clamp(lo, hi);
    let mut half = (hi - lo) / 64.0;
    let (mut a, mut b);
    loop {
        a = (t0 - half).max(lo);
        b = (t0 + half).min(hi);
        let fa = residual(a)?.0;
        let fb = residual(b)?.0;
        if fa >= 0.0 && fb <= 0.0 {
            break;
        }
        if a <= lo && b >= hi {
            return Err(Error::Domain(format!(
                "momentum {} not reachable from s = {s}: residual range [{fb}, {fa}]",
                pt.p
            )));
        }
        half *= 2.0;
    }

    let mut t = 0.5 * (a + b);
    let mut last = (0.0, 0.0, 0.0);
    let mut converged = false;
    for _ in 0..200 {
        let (f, fp, d2) = residual(t)?;
        last = (f, fp, d2);
        if f > 0.0 {
            a = t;
        } else {
            b = t;
        }
        if f == 0.0 {
            converged = true;
            break;
        }
        let newton = t - f / fp;
        let next = if fp < 0.0 && newton > a && newton < b {
            newton
        } else {
            0.5 * (a + b)
        };
        if (next - t).abs() <= 1e-15 * t.abs().max(1.0) {
            t = next;
            converged = true;
            break;
        }
        t = next;
        if b - a <= 4e-16 * t.abs().max(1.0) {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Solver(format!(
            "implicit step stagnated at s = {s}, p = {}, residual {}",
            pt.p, last.0
        )));
    }
    let d = model.d2(s, t)?;
    Ok(OrbitPoint::new(d.d2, t))
}

/// Iterates [`step`] `n` times, returning all `n + 1` points.
pub fn orbit(model: &SiteModel, pt0: &OrbitPoint, n: usize) -> Result<Vec<OrbitPoint>> {
    let mut pts = Vec::with_capacity(n + 1);
    pts.push(*pt0);
    for j in 0..n {
        let next = step(model, pts.last().unwrap())
            .map_err(|e| Error::Solver(format!("orbit step {j}: {e}")))?;
        pts.push(next);
    }
    Ok(pts)
}

/// `|det J - 1|` for the Jacobian of [`step`] at `pt`, by central finite
/// differences in (lift, momentum) with increment `fd_step`.
pub fn area_preservation_check(model: &SiteModel, pt: &OrbitPoint, fd_step: f64) -> Result<f64> {
    if !(fd_step > 0.0) {
        return Err(Error::Params(format!("fd_step must be > 0, got {fd_step}")));
    }
    let h = fd_step;
    let sp = step(model, &OrbitPoint::new(pt.p, pt.s_lift + h))?;
    let sm = step(model, &OrbitPoint::new(pt.p, pt.s_lift - h))?;
    let pp = step(model, &OrbitPoint::new(pt.p + h, pt.s_lift))?;
    let pm = step(model, &OrbitPoint::new(pt.p - h, pt.s_lift))?;
    let j11 = (sp.s_lift - sm.s_lift) / (2.0 * h);
    let j21 = (sp.p - sm.p) / (2.0 * h);
    let j12 = (pp.s_lift - pm.s_lift) / (2.0 * h);
    let j22 = (pp.p - pm.p) / (2.0 * h);
    Ok((j11 * j22 - j12 * j21 - 1.0).abs())
}

/// Minimal cylinder distance from `points[0]` over all indices at or past
/// `window`: angle difference wrapped to the circle, momentum difference
/// taken straight.
pub fn recurrence_indicator(points: &[OrbitPoint], window: usize) -> Result<f64> {
    if points.len() <= window {
        return Err(Error::Params(format!(
            "orbit of {} points is shorter than the window {window}",
            points.len()
        )));
    }
    let p0 = &points[0];
    let mut best = f64::INFINITY;
    for pt in &points[window..] {
        let dth = pt.theta - p0.theta;
        let dth = (dth - dth.round()).abs();
        let dp = pt.p - p0.p;
        best = best.min((dth * dth + dp * dp).sqrt());
    }
    Ok(best)
}

/// Writes an orbit as CSV with columns `j,theta,p,s_lift`.
pub fn write_orbit_csv(points: &[OrbitPoint], path: &std::path::Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "j,theta,p,s_lift")?;
    for (j, pt) in points.iter().enumerate() {
        writeln!(
            out,
            "{j},{:.16e},{:.16e},{:.16e}",
            pt.theta, pt.p, pt.s_lift
        )?;
    }
    out.flush()?;
    Ok(())
}
