//! Spline table for the effective substrate potential.
//!
//! The table samples `vper` on a uniform grid, periodic in `s` over one
//! period and spanning `[-kappa_max, kappa_max]` in curvature, and stores
//! the nodal second derivatives of a tensor-product cubic spline: periodic
//! along `s`, end-clamped along `kappa` with one-sided finite-difference
//! slopes. Evaluation gathers one 4x4 block and contracts it with weight
//! vectors, which also yields all partial derivatives through second order
//! as exact derivatives of the interpolant, so the gradient of a tabulated
//! energy really is the derivative of the energy being minimized.

use std::fmt::Write as _;
use std::path::Path;

use crate::spline::{cell_weights, second_derivs, second_derivs_periodic, Boundary};
use crate::{Error, Result};

use super::{vper, ModelParams};

/// Value and partial derivatives of the tabulated potential at one point.
#[derive(Debug, Clone, Copy, Default)]
pub struct TableDerivs {
    pub v: f64,
    pub vs: f64,
    pub vk: f64,
    pub vss: f64,
    pub vkk: f64,
    pub vsk: f64,
}

#[derive(Debug, Clone)]
pub struct TabulatedPotential {
    h: f64,
    eps: f64,
    sigma: f64,
    lattice_cutoff: u32,
    n_s: usize,
    n_k: usize,
    kappa_max: f64,
    dk: f64,
    /// Sampled values, row-major `[i_s * n_k + j_kappa]`.
    f: Vec<f64>,
    /// Second derivatives along `s` (periodic spline per kappa column).
    m: Vec<f64>,
    /// Second derivatives along `kappa` (clamped spline per s row).
    n: Vec<f64>,
    /// Kappa-spline second derivatives of `m`.
    p: Vec<f64>,
}

/// One-sided five-point first-derivative estimates for the ends of a row.
fn edge_slopes(y: &[f64], dx: f64) -> (f64, f64) {
    let n = y.len();
    let d0 = (-25.0 * y[0] + 48.0 * y[1] - 36.0 * y[2] + 16.0 * y[3] - 3.0 * y[4]) / (12.0 * dx);
    let d1 = (25.0 * y[n - 1] - 48.0 * y[n - 2] + 36.0 * y[n - 3] - 16.0 * y[n - 4]
        + 3.0 * y[n - 5])
        / (12.0 * dx);
    (d0, d1)
}

impl TabulatedPotential {
    pub fn build(
        params: &ModelParams,
        n_s: usize,
        n_kappa: usize,
        kappa_max: f64,
    ) -> Result<Self> {
        if n_s < 64 {
            return Err(Error::Params(format!("n_s must be >= 64, got {n_s}")));
        }
        if n_kappa < 16 {
            return Err(Error::Params(format!("n_kappa must be >= 16, got {n_kappa}")));
        }
        let hk = params.h * kappa_max;
        if !(hk > 0.0 && hk < 0.5) {
            return Err(Error::Params(format!(
                "need 0 < h * kappa_max < 0.5, got {hk}"
            )));
        }
        let dk = 2.0 * kappa_max / (n_kappa - 1) as f64;
        let mut f = vec![0.0; n_s * n_kappa];
        for i in 0..n_s {
            let s = i as f64 / n_s as f64;
            for j in 0..n_kappa {
                let kappa = -kappa_max + j as f64 * dk;
                f[i * n_kappa + j] = vper(s, kappa, params)?;
            }
        }
        let mut table = TabulatedPotential {
            h: params.h,
            eps: params.eps,
            sigma: params.sigma,
            lattice_cutoff: params.lattice_cutoff,
            n_s,
            n_k: n_kappa,
            kappa_max,
            dk,
            f,
            m: Vec::new(),
            n: Vec::new(),
            p: Vec::new(),
        };
        table.rebuild_splines();
        Ok(table)
    }

    /// Recomputes the three derivative arrays from the samples. Determinism
    /// matters here: a table loaded from disk must evaluate bit-identically
    /// to the one that was saved.
    fn rebuild_splines(&mut self) {
        let (ns, nk) = (self.n_s, self.n_k);
        let ds = 1.0 / ns as f64;
        self.m = vec![0.0; ns * nk];
        self.n = vec![0.0; ns * nk];
        self.p = vec![0.0; ns * nk];
        let mut col = vec![0.0; ns];
        for j in 0..nk {
            for i in 0..ns {
                col[i] = self.f[i * nk + j];
            }
            let sec = second_derivs_periodic(&col, ds);
            for i in 0..ns {
                self.m[i * nk + j] = sec[i];
            }
        }
        for i in 0..ns {
            let row = &self.f[i * nk..(i + 1) * nk];
            let (d0, d1) = edge_slopes(row, self.dk);
            let sec = second_derivs(row, self.dk, Boundary::Clamped { d_start: d0, d_end: d1 });
            self.n[i * nk..(i + 1) * nk].copy_from_slice(&sec);
        }
        // Second pass: kappa-splines of the s-second-derivative rows, so the
        // two directions compose into one tensor-product interpolant.
        let mut mrow = vec![0.0; nk];
        for i in 0..ns {
            mrow.copy_from_slice(&self.m[i * nk..(i + 1) * nk]);
            let (d0, d1) = edge_slopes(&mrow, self.dk);
            let sec = second_derivs(&mrow, self.dk, Boundary::Clamped { d_start: d0, d_end: d1 });
            self.p[i * nk..(i + 1) * nk].copy_from_slice(&sec);
        }
    }

    pub fn n_s(&self) -> usize {
        self.n_s
    }

    pub fn n_kappa(&self) -> usize {
        self.n_k
    }

    pub fn kappa_max(&self) -> f64 {
        self.kappa_max
    }

    /// Checks that this table was built for the given physical parameters.
    pub fn matches(&self, params: &ModelParams) -> Result<()> {
        let close = |a: f64, b: f64| (a - b).abs() <= 1e-12 * a.abs().max(1.0);
        if !close(self.h, params.h)
            || !close(self.eps, params.eps)
            || !close(self.sigma, params.sigma)
            || self.lattice_cutoff != params.lattice_cutoff
        {
            return Err(Error::Params(format!(
                "table built for (h={}, eps={}, sigma={}, cutoff={}) but model has \
                 (h={}, eps={}, sigma={}, cutoff={})",
                self.h,
                self.eps,
                self.sigma,
                self.lattice_cutoff,
                params.h,
                params.eps,
                params.sigma,
                params.lattice_cutoff
            )));
        }
        Ok(())
    }

    /// Locates the spline cell for `(s, kappa)`. `s` is reduced into the
    /// period first; `kappa` must lie in the tabulated range.
    #[inline]
    fn locate(&self, s: f64, kappa: f64) -> Result<(usize, usize, usize, f64, f64)> {
        if !(kappa >= -self.kappa_max - 1e-12 && kappa <= self.kappa_max + 1e-12) {
            return Err(Error::KappaRange {
                kappa,
                min: -self.kappa_max,
                max: self.kappa_max,
            });
        }
        let sf = s - s.floor();
        let ds = 1.0 / self.n_s as f64;
        let mut i = (sf * self.n_s as f64).floor() as usize;
        if i >= self.n_s {
            i = self.n_s - 1;
        }
        let ts = (sf - i as f64 * ds).clamp(0.0, ds);
        let off = kappa + self.kappa_max;
        let mut j = (off / self.dk).floor() as isize;
        j = j.clamp(0, self.n_k as isize - 2);
        let j = j as usize;
        let tk = (off - j as f64 * self.dk).clamp(0.0, self.dk);
        Ok((i, (i + 1) % self.n_s, j, ts, tk))
    }

    /// Gathers the 4x4 coefficient block for one cell.
    #[inline]
    fn gather(&self, i: usize, ip: usize, j: usize) -> [[f64; 4]; 4] {
        let nk = self.n_k;
        let (r0, r1) = (i * nk + j, ip * nk + j);
        [
            [self.f[r0], self.f[r0 + 1], self.n[r0], self.n[r0 + 1]],
            [self.f[r1], self.f[r1 + 1], self.n[r1], self.n[r1 + 1]],
            [self.m[r0], self.m[r0 + 1], self.p[r0], self.p[r0 + 1]],
            [self.m[r1], self.m[r1 + 1], self.p[r1], self.p[r1 + 1]],
        ]
    }

    #[inline]
    fn contract(g: &[[f64; 4]; 4], ws: &[f64; 4], wk: &[f64; 4]) -> f64 {
        let mut acc = 0.0;
        for a in 0..4 {
            let row = &g[a];
            acc += ws[a] * (row[0] * wk[0] + row[1] * wk[1] + row[2] * wk[2] + row[3] * wk[3]);
        }
        acc
    }

    /// Interpolated potential value.
    pub fn eval(&self, s: f64, kappa: f64) -> Result<f64> {
        let (i, ip, j, ts, tk) = self.locate(s, kappa)?;
        let g = self.gather(i, ip, j);
        let ws = cell_weights(ts, 1.0 / self.n_s as f64)[0];
        let wk = cell_weights(tk, self.dk)[0];
        Ok(Self::contract(&g, &ws, &wk))
    }

    /// Value and first partials `(v, dv/ds, dv/dkappa)`.
    pub fn eval_d1(&self, s: f64, kappa: f64) -> Result<(f64, f64, f64)> {
        let (i, ip, j, ts, tk) = self.locate(s, kappa)?;
        let g = self.gather(i, ip, j);
        let ws = cell_weights(ts, 1.0 / self.n_s as f64);
        let wk = cell_weights(tk, self.dk);
        Ok((
            Self::contract(&g, &ws[0], &wk[0]),
            Self::contract(&g, &ws[1], &wk[0]),
            Self::contract(&g, &ws[0], &wk[1]),
        ))
    }

    /// Value and all partials through second order.
    pub fn eval_d2(&self, s: f64, kappa: f64) -> Result<TableDerivs> {
        let (i, ip, j, ts, tk) = self.locate(s, kappa)?;
        let g = self.gather(i, ip, j);
        let ws = cell_weights(ts, 1.0 / self.n_s as f64);
        let wk = cell_weights(tk, self.dk);
        Ok(TableDerivs {
            v: Self::contract(&g, &ws[0], &wk[0]),
            vs: Self::contract(&g, &ws[1], &wk[0]),
            vk: Self::contract(&g, &ws[0], &wk[1]),
            vss: Self::contract(&g, &ws[2], &wk[0]),
            vkk: Self::contract(&g, &ws[0], &wk[2]),
            vsk: Self::contract(&g, &ws[1], &wk[1]),
        })
    }

    /// Writes the table as a self-describing text file: a header with the
    /// parameters it was built from, then the raw samples, one `s` row per
    /// line. 17 significant digits, enough to round-trip every f64 exactly.
    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("fk-potential-table v1\n");
        let _ = writeln!(out, "h {:.16e}", self.h);
        let _ = writeln!(out, "eps {:.16e}", self.eps);
        let _ = writeln!(out, "sigma {:.16e}", self.sigma);
        let _ = writeln!(out, "lattice_cutoff {}", self.lattice_cutoff);
        let _ = writeln!(out, "n_s {}", self.n_s);
        let _ = writeln!(out, "n_kappa {}", self.n_k);
        let _ = writeln!(out, "kappa_max {:.16e}", self.kappa_max);
        out.push_str("samples\n");
        for i in 0..self.n_s {
            for j in 0..self.n_k {
                if j > 0 {
                    out.push(' ');
                }
                let _ = write!(out, "{:.16e}", self.f[i * self.n_k + j]);
            }
            out.push('\n');
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Reads a table back. The spline arrays are rebuilt from the samples,
    /// so a saved and reloaded table evaluates bit-identically.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let perr = |msg: String| Error::Parse {
            path: path.display().to_string(),
            msg,
        };
        let mut lines = text.lines();
        match lines.next() {
            Some("fk-potential-table v1") => {}
            other => {
                return Err(perr(format!(
                    "expected header 'fk-potential-table v1', got {other:?}"
                )))
            }
        }
        let mut h = None;
        let mut eps = None;
        let mut sigma = None;
        let mut cutoff = None;
        let mut n_s = None;
        let mut n_k = None;
        let mut kappa_max = None;
        loop {
            let line = lines
                .next()
                .ok_or_else(|| perr("truncated header".into()))?;
            if line == "samples" {
                break;
            }
            let (key, val) = line
                .split_once(' ')
                .ok_or_else(|| perr(format!("malformed header line {line:?}")))?;
            let bad = |e: std::num::ParseFloatError| perr(format!("bad value for {key}: {e}"));
            match key {
                "h" => h = Some(val.parse().map_err(bad)?),
                "eps" => eps = Some(val.parse().map_err(bad)?),
                "sigma" => sigma = Some(val.parse().map_err(bad)?),
                "kappa_max" => kappa_max = Some(val.parse().map_err(bad)?),
                "lattice_cutoff" => {
                    cutoff = Some(
                        val.parse()
                            .map_err(|e| perr(format!("bad value for {key}: {e}")))?,
                    )
                }
                "n_s" => {
                    n_s = Some(
                        val.parse()
                            .map_err(|e| perr(format!("bad value for {key}: {e}")))?,
                    )
                }
                "n_kappa" => {
                    n_k = Some(
                        val.parse()
                            .map_err(|e| perr(format!("bad value for {key}: {e}")))?,
                    )
                }
                _ => return Err(perr(format!("unknown header key {key:?}"))),
            }
        }
        let n_s: usize = n_s.ok_or_else(|| perr("missing n_s".into()))?;
        let n_k: usize = n_k.ok_or_else(|| perr("missing n_kappa".into()))?;
        let kappa_max: f64 = kappa_max.ok_or_else(|| perr("missing kappa_max".into()))?;
        let mut f = Vec::with_capacity(n_s * n_k);
        for (i, line) in lines.enumerate() {
            for tok in line.split_ascii_whitespace() {
                f.push(
                    tok.parse::<f64>()
                        .map_err(|e| perr(format!("bad sample in row {i}: {e}")))?,
                );
            }
        }
        if f.len() != n_s * n_k {
            return Err(perr(format!(
                "expected {} samples, found {}",
                n_s * n_k,
                f.len()
            )));
        }
        let mut table = TabulatedPotential {
            h: h.ok_or_else(|| perr("missing h".into()))?,
            eps: eps.ok_or_else(|| perr("missing eps".into()))?,
            sigma: sigma.ok_or_else(|| perr("missing sigma".into()))?,
            lattice_cutoff: cutoff.ok_or_else(|| perr("missing lattice_cutoff".into()))?,
            n_s,
            n_k,
            kappa_max,
            dk: 2.0 * kappa_max / (n_k - 1) as f64,
            f,
            m: Vec::new(),
            n: Vec::new(),
            p: Vec::new(),
        };
        table.rebuild_splines();
        Ok(table)
    }

    /// [`TabulatedPotential::load`] plus a consistency check against the
    /// parameters the caller is about to use it with.
    pub fn load_checked(path: &Path, params: &ModelParams) -> Result<Self> {
        let table = Self::load(path)?;
        table.matches(params)?;
        Ok(table)
    }
}
