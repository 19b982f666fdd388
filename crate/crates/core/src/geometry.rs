//! Planar reconstruction of the rippled chains and disregistry measures.
//!
//! A relaxed state only knows arc-length abscissas; to draw the ripple the
//! lower chain is rebuilt as a C1 curve of piecewise-constant curvature,
//! one arc per neighbor gap, starting at the origin with horizontal
//! tangent. Arcs compose in closed form (rotate + chord), so the
//! reconstruction is exact rather than an ODE integration, and projecting
//! points back onto the curve recovers arc coordinates at full precision.

use crate::fkmodel::{curvature_from_pair, SupercellState};
use crate::potential::ModelParams;
use crate::{Error, Result};
use std::io::Write as _;

/// One constant-curvature piece of the reconstructed lower chain.
#[derive(Debug, Clone, Copy)]
struct ArcSegment {
    /// Arc coordinate of the segment start.
    s0: f64,
    len: f64,
    kappa: f64,
    /// Start point.
    origin: [f64; 2],
    /// Tangent angle at the start.
    phi: f64,
}

impl ArcSegment {
    /// Point and tangent angle at arc offset `d` from the segment start.
    fn at(&self, d: f64) -> ([f64; 2], f64) {
        let (x, y) = if self.kappa == 0.0 {
            (d, 0.0)
        } else {
            let half = 0.5 * self.kappa * d;
            (
                (self.kappa * d).sin() / self.kappa,
                2.0 * half.sin() * half.sin() / self.kappa,
            )
        };
        let (sin, cos) = self.phi.sin_cos();
        (
            [
                self.origin[0] + cos * x - sin * y,
                self.origin[1] + sin * x + cos * y,
            ],
            self.phi + self.kappa * d,
        )
    }

    /// Foot of the perpendicular from `q`, as an arc offset, found by
    /// Newton on the orthogonality condition. Works in the segment frame
    /// so nothing is divided by a small curvature. Returns the clamped
    /// offset, its distance to `q`, and whether the true foot was inside.
    fn project(&self, q: [f64; 2]) -> (f64, f64, bool) {
        let (sin, cos) = self.phi.sin_cos();
        let rel = [q[0] - self.origin[0], q[1] - self.origin[1]];
        let local = [cos * rel[0] + sin * rel[1], -sin * rel[0] + cos * rel[1]];
        let curve = |d: f64| -> ([f64; 2], [f64; 2]) {
            if self.kappa == 0.0 {
                ([d, 0.0], [1.0, 0.0])
            } else {
                let half = 0.5 * self.kappa * d;
                let p = [
                    (self.kappa * d).sin() / self.kappa,
                    2.0 * half.sin() * half.sin() / self.kappa,
                ];
                (p, [(self.kappa * d).cos(), (self.kappa * d).sin()])
            }
        };
        let mut d = local[0].clamp(0.0, self.len);
        let mut inside = true;
        for _ in 0..50 {
            let (p, t) = curve(d);
            let f = (local[0] - p[0]) * t[0] + (local[1] - p[1]) * t[1];
            // f'(d) = -1 + kappa * ((q - p) x t rotated); bounded away
            // from zero while |kappa| * distance < 1.
            let n = [-t[1], t[0]];
            let fp = -1.0 + self.kappa * ((local[0] - p[0]) * n[0] + (local[1] - p[1]) * n[1]);
            if fp == 0.0 {
                break;
            }
            let next = d - f / fp;
            if !next.is_finite() {
                break;
            }
            let step = (next - d).abs();
            d = next;
            if step <= 1e-14 * d.abs().max(1.0) {
                break;
            }
        }
        if d < 0.0 || d > self.len {
            inside = false;
            d = d.clamp(0.0, self.len);
        }
        let (p, _) = curve(d);
        let dist = ((local[0] - p[0]).powi(2) + (local[1] - p[1]).powi(2)).sqrt();
        (d, dist, inside)
    }
}

/// An atom of a reconstructed curve.
#[derive(Debug, Clone, Copy)]
pub struct CurveAtom {
    pub index: i64,
    pub position: [f64; 2],
}

/// The two chains rebuilt in the plane from one supercell.
#[derive(Debug, Clone)]
pub struct Reconstruction {
    segments: Vec<ArcSegment>,
    /// Lower-chain atoms, one per integer arc coordinate in the cell.
    pub chain1: Vec<CurveAtom>,
    /// Upper-chain atoms at normal offset `h` over the abscissas.
    pub chain_top: Vec<CurveAtom>,
    /// Net tangent rotation over the cell, `sum of kappa_j * gap_j`.
    pub turning: f64,
    /// Curve endpoint after one cell; the cell is not forced to close.
    pub end_point: [f64; 2],
    /// Tangent angle at the endpoint (equals `turning`).
    pub end_angle: f64,
}

/// Rebuilds both chains from `state`. Each gap `[s_j, s_{j+1}]` becomes an
/// arc with the curvature implied by that gap; any `|h kappa| >= 1` means
/// the upper offset curve would fold onto its center and is rejected.
pub fn reconstruct_curves(state: &SupercellState, params: &ModelParams) -> Result<Reconstruction> {
    state.require_admissible()?;
    let q = state.q();
    let p = state.p() as f64;
    let s = state.abscissas();
    let h = params.h;

    let mut segments = Vec::with_capacity(q);
    let mut origin = [0.0, 0.0];
    let mut phi = 0.0;
    let mut turning = 0.0;
    for j in 0..q {
        let (a, b) = (s[j], if j + 1 < q { s[j + 1] } else { s[0] + p });
        let kappa = curvature_from_pair(a, b, params);
        if (h * kappa).abs() >= 1.0 {
            return Err(Error::Geometry(format!(
                "gap {j} implies h*kappa = {}, offset curve degenerates",
                h * kappa
            )));
        }
        let seg = ArcSegment {
            s0: a,
            len: b - a,
            kappa,
            origin,
            phi,
        };
        let (end, end_phi) = seg.at(seg.len);
        segments.push(seg);
        origin = end;
        phi = end_phi;
        turning += kappa * seg.len;
    }

    let recon = Reconstruction {
        segments,
        chain1: Vec::new(),
        chain_top: Vec::new(),
        turning,
        end_point: origin,
        end_angle: phi,
    };

    let mut chain1 = Vec::new();
    let first = s[0].ceil() as i64;
    for n in first..first + state.p() {
        let (position, _) = recon.point_at(n as f64)?;
        chain1.push(CurveAtom { index: n, position });
    }
    let mut chain_top = Vec::new();
    for (j, &sj) in s.iter().enumerate() {
        let (pos, ang) = recon.point_at(sj)?;
        chain_top.push(CurveAtom {
            index: j as i64,
            position: [pos[0] - h * ang.sin(), pos[1] + h * ang.cos()],
        });
    }

    Ok(Reconstruction {
        chain1,
        chain_top,
        ..recon
    })
}

impl Reconstruction {
    /// Covered arc range `[s_0, s_0 + p]`.
    pub fn arc_span(&self) -> (f64, f64) {
        let first = &self.segments[0];
        let last = &self.segments[self.segments.len() - 1];
        (first.s0, last.s0 + last.len)
    }

    /// Point and tangent angle at arc coordinate `s`.
    pub fn point_at(&self, s: f64) -> Result<([f64; 2], f64)> {
        let (lo, hi) = self.arc_span();
        if !(s >= lo && s <= hi) {
            return Err(Error::Geometry(format!(
                "arc coordinate {s} outside [{lo}, {hi}]"
            )));
        }
        let mut a = 0usize;
        let mut b = self.segments.len();
        while b - a > 1 {
            let mid = (a + b) / 2;
            if self.segments[mid].s0 <= s {
                a = mid;
            } else {
                b = mid;
            }
        }
        let seg = &self.segments[a];
        Ok(seg.at((s - seg.s0).min(seg.len)))
    }

    /// Arc coordinate of the closest curve point to `q`.
    pub fn arc_coordinate_of(&self, q: [f64; 2]) -> Result<f64> {
        let mut best = f64::INFINITY;
        let mut coord = None;
        for seg in &self.segments {
            let (d, dist, _) = seg.project(q);
            if dist < best {
                best = dist;
                coord = Some(seg.s0 + d);
            }
        }
        coord.ok_or_else(|| Error::Geometry("empty reconstruction".into()))
    }
}

/// Fractional abscissas `{s_j}` of the reduced model: its own registry
/// measure, aligned at 0 and staggered at 1/2.
pub fn fk_disregistry(state: &SupercellState) -> Vec<f64> {
    state.fractional_parts()
}

/// Registry offset of one projected atom.
#[derive(Debug, Clone, Copy)]
pub struct Disregistry {
    /// Arc-length coordinate of the foot on the lower polyline.
    pub arc_position: f64,
    /// Arc distance to the nearest lower atom to the left, in
    /// `[0, spacing)`.
    pub delta: f64,
}

/// Projects each `top` atom onto the polyline through `bottom` (whose
/// vertices are the lower atoms) and measures the arc distance back to
/// the nearest vertex on the left.
///
/// Equidistant candidate segments resolve to the smallest arc coordinate.
/// An atom whose closest approach runs off either end of the polyline
/// does not project and is an error.
pub fn disregistry(
    bottom: &[[f64; 2]],
    top: &[[f64; 2]],
    spacing: f64,
) -> Result<Vec<Disregistry>> {
    if bottom.len() < 2 {
        return Err(Error::Geometry("polyline needs at least two vertices".into()));
    }
    if !(spacing > 0.0) {
        return Err(Error::Geometry(format!("spacing must be > 0, got {spacing}")));
    }
    let mut vertex_arc = Vec::with_capacity(bottom.len());
    let mut acc = 0.0;
    vertex_arc.push(0.0);
    for w in bottom.windows(2) {
        let len = ((w[1][0] - w[0][0]).powi(2) + (w[1][1] - w[0][1]).powi(2)).sqrt();
        if len == 0.0 {
            return Err(Error::Geometry("polyline has a zero-length edge".into()));
        }
        acc += len;
        vertex_arc.push(acc);
    }

    let mut out = Vec::with_capacity(top.len());
    for (k, atom) in top.iter().enumerate() {
        let mut best = f64::INFINITY;
        let mut best_u = 0.0;
        let mut off_end = false;
        for (i, w) in bottom.windows(2).enumerate() {
            let e = [w[1][0] - w[0][0], w[1][1] - w[0][1]];
            let len2 = e[0] * e[0] + e[1] * e[1];
            let t = ((atom[0] - w[0][0]) * e[0] + (atom[1] - w[0][1]) * e[1]) / len2;
            let tc = t.clamp(0.0, 1.0);
            let foot = [w[0][0] + tc * e[0], w[0][1] + tc * e[1]];
            let dist = ((atom[0] - foot[0]).powi(2) + (atom[1] - foot[1]).powi(2)).sqrt();
            if dist < best {
                best = dist;
                best_u = vertex_arc[i] + tc * (vertex_arc[i + 1] - vertex_arc[i]);
                off_end = (i == 0 && t < 0.0) || (i == bottom.len() - 2 && t > 1.0);
            }
        }
        if off_end {
            return Err(Error::Geometry(format!(
                "atom {k} at ({}, {}) projects past the end of the chain",
                atom[0], atom[1]
            )));
        }
        // Nearest vertex at or left of the foot.
        let i = match vertex_arc.binary_search_by(|a| a.partial_cmp(&best_u).unwrap()) {
            Ok(i) => i,
            Err(i) => i - 1,
        };
        let mut delta = best_u - vertex_arc[i];
        if delta >= spacing {
            delta -= spacing * (delta / spacing).floor();
        }
        out.push(Disregistry {
            arc_position: best_u,
            delta,
        });
    }
    Ok(out)
}

/// Wavelength (in units of `dx`) and amplitude of the strongest harmonic
/// of `samples` after removing the best straight-line trend.
pub fn dominant_wavelength(samples: &[f64], dx: f64) -> Result<(f64, f64)> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::Params(format!("need at least 4 samples, got {n}")));
    }
    // Least-squares line.
    let nf = n as f64;
    let mean_x = (nf - 1.0) / 2.0;
    let mean_y = samples.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for (i, &y) in samples.iter().enumerate() {
        let d = i as f64 - mean_x;
        sxx += d * d;
        sxy += d * (y - mean_y);
    }
    let slope = sxy / sxx;
    let detrended: Vec<f64> = samples
        .iter()
        .enumerate()
        .map(|(i, &y)| y - mean_y - slope * (i as f64 - mean_x))
        .collect();

    let mut best = (0.0, 0usize);
    for m in 1..=n / 2 {
        let w = 2.0 * std::f64::consts::PI * m as f64 / nf;
        let (mut c, mut s) = (0.0, 0.0);
        for (i, &y) in detrended.iter().enumerate() {
            c += y * (w * i as f64).cos();
            s += y * (w * i as f64).sin();
        }
        let power = c * c + s * s;
        if power > best.0 {
            best = (power, m);
        }
    }
    if best.1 == 0 {
        return Err(Error::Geometry("signal has no oscillatory part".into()));
    }
    Ok((nf * dx / best.1 as f64, 2.0 * best.0.sqrt() / nf))
}

fn fmt(x: f64) -> String {
    format!("{x:.16e}")
}

/// Writes both chains as CSV with columns `chain_id,atom_index,x,y`.
pub fn write_curve_csv(recon: &Reconstruction, path: &std::path::Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "chain_id,atom_index,x,y")?;
    for a in &recon.chain1 {
        writeln!(out, "1,{},{},{}", a.index, fmt(a.position[0]), fmt(a.position[1]))?;
    }
    for a in &recon.chain_top {
        writeln!(out, "2,{},{},{}", a.index, fmt(a.position[0]), fmt(a.position[1]))?;
    }
    out.flush()?;
    Ok(())
}

/// Writes registry offsets as CSV with columns
/// `atom_index,arc_position,delta`.
pub fn write_disregistry_csv(rows: &[Disregistry], path: &std::path::Path) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "atom_index,arc_position,delta")?;
    for (i, r) in rows.iter().enumerate() {
        writeln!(out, "{i},{},{}", fmt(r.arc_position), fmt(r.delta))?;
    }
    out.flush()?;
    Ok(())
}
