//! The reduced Frenkel-Kontorova chain.
//!
//! Degrees of freedom are the arc-length abscissas `s_j` of the upper-chain
//! atoms measured along the lower chain, in units of the lower spacing. A
//! consecutive pair `(s_j, s_{j+1})` determines the local curvature of the
//! segment between them and hence a per-site energy: the tabulated substrate
//! potential evaluated at the left endpoint plus a quadratic bending term.
//! Periodic approximants close the chain with `s_{j+q} = s_j + p`.

use std::fmt::Write as _;
use std::path::Path;

use crate::minimize::KahanSum;
use crate::potential::{Alpha, ModelParams, TabulatedPotential, TableDerivs};
use crate::{Error, Result};

/// Local curvature implied by a neighbor pair: `((t - s)/alpha - 1) / h`.
/// Zero when the gap is exactly the natural spacing `alpha`, positive when
/// the pair is stretched (chain bowing toward the substrate's far side).
pub fn curvature_from_pair(s: f64, t: f64, params: &ModelParams) -> f64 {
    ((t - s) / params.alpha() - 1.0) / params.h
}

/// Which endpoint the substrate term is attributed to.
///
/// The left-endpoint rule matches the energy being minimized everywhere
/// else; the symmetrized rule averages the two endpoints and exists to
/// quantify how much the exchange symmetry `v(s,t) = v(-t,-s)` is broken
/// by single-endpoint attribution.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Attribution {
    #[default]
    LeftEndpoint,
    Symmetrized,
}

/// Value and derivatives of the pair energy `v(s, t)`.
#[derive(Debug, Clone, Copy, Default)]
pub struct SiteDerivs {
    pub v: f64,
    pub d1: f64,
    pub d2: f64,
    pub d11: f64,
    pub d12: f64,
    pub d22: f64,
}

/// A substrate table bound to the physical parameters it is used with.
#[derive(Clone, Copy)]
pub struct SiteModel<'a> {
    pub table: &'a TabulatedPotential,
    pub params: &'a ModelParams,
    pub attribution: Attribution,
}

impl<'a> SiteModel<'a> {
    pub fn new(table: &'a TabulatedPotential, params: &'a ModelParams) -> Result<Self> {
        table.matches(params)?;
        Ok(SiteModel {
            table,
            params,
            attribution: Attribution::LeftEndpoint,
        })
    }

    pub fn with_attribution(mut self, attribution: Attribution) -> Self {
        self.attribution = attribution;
        self
    }

    #[inline]
    fn w(&self) -> f64 {
        1.0 / (self.params.alpha() * self.params.h)
    }

    /// Admissible `t` range for a fixed `s`, set by the tabulated curvature
    /// window.
    pub fn t_bounds(&self, s: f64) -> (f64, f64) {
        let a = self.params.alpha();
        let h = self.params.h;
        let kmax = self.table.kappa_max();
        (s + a * (1.0 - h * kmax), s + a * (1.0 + h * kmax))
    }

    /// Pair energy `v(s, t)`.
    pub fn value(&self, s: f64, t: f64) -> Result<f64> {
        let kappa = curvature_from_pair(s, t, self.params);
        let bend = 0.5 * self.params.beta * kappa * kappa;
        let sub = match self.attribution {
            Attribution::LeftEndpoint => self.table.eval(s, kappa)?,
            Attribution::Symmetrized => {
                0.5 * (self.table.eval(s, kappa)? + self.table.eval(t, kappa)?)
            }
        };
        Ok(sub + bend)
    }

    /// Pair energy with first partials `(v, dv/ds, dv/dt)`.
    pub fn d1(&self, s: f64, t: f64) -> Result<(f64, f64, f64)> {
        let kappa = curvature_from_pair(s, t, self.params);
        let w = self.w();
        let bk = self.params.beta * kappa;
        match self.attribution {
            Attribution::LeftEndpoint => {
                let (v, vs, vk) = self.table.eval_d1(s, kappa)?;
                let chain = vk + bk;
                Ok((
                    v + 0.5 * bk * kappa,
                    vs - w * chain,
                    w * chain,
                ))
            }
            Attribution::Symmetrized => {
                let (va, vsa, vka) = self.table.eval_d1(s, kappa)?;
                let (vb, vsb, vkb) = self.table.eval_d1(t, kappa)?;
                let chain = 0.5 * (vka + vkb) + bk;
                Ok((
                    0.5 * (va + vb) + 0.5 * bk * kappa,
                    0.5 * vsa - w * chain,
                    0.5 * vsb + w * chain,
                ))
            }
        }
    }

    /// Pair energy with all partials through second order.
    pub fn d2(&self, s: f64, t: f64) -> Result<SiteDerivs> {
        let kappa = curvature_from_pair(s, t, self.params);
        let w = self.w();
        let beta = self.params.beta;
        let bk = beta * kappa;
        match self.attribution {
            Attribution::LeftEndpoint => {
                let d: TableDerivs = self.table.eval_d2(s, kappa)?;
                let chain = d.vk + bk;
                let curv = d.vkk + beta;
                Ok(SiteDerivs {
                    v: d.v + 0.5 * bk * kappa,
                    d1: d.vs - w * chain,
                    d2: w * chain,
                    d11: d.vss - 2.0 * w * d.vsk + w * w * curv,
                    d12: w * d.vsk - w * w * curv,
                    d22: w * w * curv,
                })
            }
            Attribution::Symmetrized => {
                let da = self.table.eval_d2(s, kappa)?;
                let db = self.table.eval_d2(t, kappa)?;
                let chain = 0.5 * (da.vk + db.vk) + bk;
                let curv = 0.5 * (da.vkk + db.vkk) + beta;
                Ok(SiteDerivs {
                    v: 0.5 * (da.v + db.v) + 0.5 * bk * kappa,
                    d1: 0.5 * da.vs - w * chain,
                    d2: 0.5 * db.vs + w * chain,
                    d11: 0.5 * da.vss - w * da.vsk + w * w * curv,
                    d12: 0.5 * w * (da.vsk - db.vsk) - w * w * curv,
                    d22: 0.5 * db.vss + w * db.vsk + w * w * curv,
                })
            }
        }
    }

    /// Twist margin `-d^2 v / ds dt` at one point. The map construction in
    /// [`crate::twistmap`] needs this positive everywhere.
    pub fn twist_margin_at(&self, s: f64, t: f64) -> Result<f64> {
        Ok(-self.d2(s, t)?.d12)
    }
}

/// Per-site energy of a neighbor pair under left-endpoint attribution.
pub fn site_energy(
    s: f64,
    t: f64,
    table: &TabulatedPotential,
    params: &ModelParams,
) -> Result<f64> {
    SiteModel::new(table, params)?.value(s, t)
}

fn gcd(mut a: u64, mut b: u64) -> u64 {
    while b != 0 {
        let r = a % b;
        a = b;
        b = r;
    }
    a
}

/// A periodic approximant configuration: `q` abscissas with the closure
/// `s_{j+q} = s_j + p`.
#[derive(Debug, Clone, PartialEq)]
pub struct SupercellState {
    p: i64,
    q: usize,
    s: Vec<f64>,
}

impl SupercellState {
    pub fn new(p: i64, q: usize, s: Vec<f64>) -> Result<Self> {
        if q == 0 || p < 1 {
            return Err(Error::State(format!("need q >= 1 and p >= 1, got p={p}, q={q}")));
        }
        if gcd(p as u64, q as u64) != 1 {
            return Err(Error::State(format!("p={p} and q={q} must be coprime")));
        }
        if s.len() != q {
            return Err(Error::State(format!(
                "expected {q} abscissas, got {}",
                s.len()
            )));
        }
        if s.iter().any(|x| !x.is_finite()) {
            return Err(Error::State("non-finite abscissa".into()));
        }
        Ok(SupercellState { p, q, s })
    }

    /// The equally spaced configuration `s_j = j p / q`.
    pub fn uniform(p: i64, q: usize) -> Result<Self> {
        let s = (0..q)
            .map(|j| j as f64 * p as f64 / q as f64)
            .collect();
        SupercellState::new(p, q, s)
    }

    pub fn p(&self) -> i64 {
        self.p
    }

    pub fn q(&self) -> usize {
        self.q
    }

    pub fn abscissas(&self) -> &[f64] {
        &self.s
    }

    #[cfg(test)]
    pub(crate) fn abscissas_mut(&mut self) -> &mut [f64] {
        &mut self.s
    }

    /// Neighbor pair `(s_j, s_{j+1})`, wrapping the last pair through the
    /// closure rule.
    #[inline]
    pub fn pair(&self, j: usize) -> (f64, f64) {
        if j + 1 < self.q {
            (self.s[j], self.s[j + 1])
        } else {
            (self.s[self.q - 1], self.s[0] + self.p as f64)
        }
    }

    /// Gap `s_{j+1} - s_j`, wrapping at the end.
    #[inline]
    pub fn spacing(&self, j: usize) -> f64 {
        let (a, b) = self.pair(j);
        b - a
    }

    /// Strict ordering of all `q` gaps, including the wrapped one.
    pub fn is_admissible(&self) -> bool {
        (0..self.q).all(|j| self.spacing(j) > 0.0)
    }

    pub fn require_admissible(&self) -> Result<()> {
        for j in 0..self.q {
            if !(self.spacing(j) > 0.0) {
                return Err(Error::State(format!(
                    "ordering violated at j={j}: gap {}",
                    self.spacing(j)
                )));
            }
        }
        Ok(())
    }

    /// The same configuration translated by an integer number of lower-chain
    /// spacings; physically equivalent.
    pub fn translated(&self, k: i64) -> Self {
        let mut out = self.clone();
        for x in &mut out.s {
            *x += k as f64;
        }
        out
    }

    /// Integer-translates so that `s_0` lands in `[0, 1)`.
    pub fn normalized(&self) -> Self {
        self.translated(-(self.s[0].floor() as i64))
    }

    /// Fractional parts `s_j - floor(s_j)`, the registry offsets.
    pub fn fractional_parts(&self) -> Vec<f64> {
        self.s.iter().map(|x| x - x.floor()).collect()
    }

    /// Writes the state with the parameters it belongs to.
    pub fn save(&self, params: &ModelParams, path: &Path) -> Result<()> {
        let mut out = String::new();
        out.push_str("fk-state v1\n");
        let _ = writeln!(out, "p {}", self.p);
        let _ = writeln!(out, "q {}", self.q);
        match params.alpha_spec() {
            Alpha::GoldenMultiple { num, den } => {
                let _ = writeln!(out, "alpha_golden {num} {den}");
            }
            Alpha::Decimal(x) => {
                let _ = writeln!(out, "alpha {:.16e}", x);
            }
        }
        let _ = writeln!(out, "h {:.16e}", params.h);
        let _ = writeln!(out, "beta {:.16e}", params.beta);
        let _ = writeln!(out, "eps {:.16e}", params.eps);
        let _ = writeln!(out, "sigma {:.16e}", params.sigma);
        let _ = writeln!(out, "lattice_cutoff {}", params.lattice_cutoff);
        out.push_str("s\n");
        for x in &self.s {
            let _ = writeln!(out, "{:.16e}", x);
        }
        std::fs::write(path, out)?;
        Ok(())
    }

    /// Reads a state file back, returning the state and its parameters.
    pub fn load(path: &Path) -> Result<(Self, ModelParams)> {
        let text = std::fs::read_to_string(path)?;
        let perr = |msg: String| Error::Parse {
            path: path.display().to_string(),
            msg,
        };
        let mut lines = text.lines();
        match lines.next() {
            Some("fk-state v1") => {}
            other => return Err(perr(format!("expected 'fk-state v1', got {other:?}"))),
        }
        let mut p = None;
        let mut q = None;
        let mut alpha = None;
        let mut h = None;
        let mut beta = None;
        let mut eps = None;
        let mut sigma = None;
        let mut cutoff = None;
        loop {
            let line = lines.next().ok_or_else(|| perr("truncated header".into()))?;
            if line == "s" {
                break;
            }
            let mut toks = line.split_ascii_whitespace();
            let key = toks.next().ok_or_else(|| perr("empty header line".into()))?;
            let mut next_f64 = || -> Result<f64> {
                toks.next()
                    .ok_or_else(|| perr(format!("missing value for {key}")))?
                    .parse()
                    .map_err(|e| perr(format!("bad value for {key}: {e}")))
            };
            match key {
                "p" => p = Some(next_f64()? as i64),
                "q" => q = Some(next_f64()? as usize),
                "alpha" => alpha = Some(Alpha::Decimal(next_f64()?)),
                "alpha_golden" => {
                    let num = next_f64()? as i64;
                    let den = next_f64()? as i64;
                    alpha = Some(Alpha::GoldenMultiple { num, den });
                }
                "h" => h = Some(next_f64()?),
                "beta" => beta = Some(next_f64()?),
                "eps" => eps = Some(next_f64()?),
                "sigma" => sigma = Some(next_f64()?),
                "lattice_cutoff" => cutoff = Some(next_f64()? as u32),
                _ => return Err(perr(format!("unknown header key {key:?}"))),
            }
        }
        let s: Vec<f64> = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| {
                l.trim()
                    .parse::<f64>()
                    .map_err(|e| perr(format!("bad abscissa: {e}")))
            })
            .collect::<Result<_>>()?;
        let params = ModelParams::new(
            alpha.ok_or_else(|| perr("missing alpha".into()))?,
            h.ok_or_else(|| perr("missing h".into()))?,
            beta.ok_or_else(|| perr("missing beta".into()))?,
            eps.ok_or_else(|| perr("missing eps".into()))?,
            sigma.ok_or_else(|| perr("missing sigma".into()))?,
            cutoff.ok_or_else(|| perr("missing lattice_cutoff".into()))?,
        )?;
        let state = SupercellState::new(
            p.ok_or_else(|| perr("missing p".into()))?,
            q.ok_or_else(|| perr("missing q".into()))?,
            s,
        )?;
        Ok((state, params))
    }
}

/// Total supercell energy: the `q` pair terms summed in index order with
/// compensated accumulation.
pub fn supercell_energy(state: &SupercellState, model: &SiteModel) -> Result<f64> {
    let mut acc = KahanSum::new();
    for j in 0..state.q() {
        let (s, t) = state.pair(j);
        acc.add(model.value(s, t)?);
    }
    Ok(acc.total())
}

/// Gradient of the supercell energy with respect to every abscissa. Each
/// edge contributes its two partials to the two sites it touches; the
/// closure edge couples `s_{q-1}` to `s_0`.
pub fn supercell_gradient(state: &SupercellState, model: &SiteModel) -> Result<Vec<f64>> {
    let q = state.q();
    let mut g = vec![0.0; q];
    for j in 0..q {
        let (s, t) = state.pair(j);
        let (_, d1, d2) = model.d1(s, t)?;
        g[j] += d1;
        g[(j + 1) % q] += d2;
    }
    Ok(g)
}

/// Summary quantities for the validity of the reduced model on a parameter
/// grid: the minimum pair energy (boundedness below), the worst violation
/// of the exchange symmetry `v(s,t) = v(-t,-s)`, and the minimum twist
/// margin `-d12 v`.
#[derive(Debug, Clone, Copy)]
pub struct ConditionsReport {
    pub lower_bound: f64,
    pub symmetry_defect: f64,
    pub twist_margin: f64,
}

/// Scans `v` on an `n_s x n_t` grid covering one registry period and the
/// full tabulated curvature range.
pub fn check_conditions(model: &SiteModel, n_s: usize, n_t: usize) -> Result<ConditionsReport> {
    if n_s < 2 || n_t < 2 {
        return Err(Error::Params("conditions grid needs at least 2x2 points".into()));
    }
    let a = model.params.alpha();
    let h = model.params.h;
    let kmax = model.table.kappa_max();
    let mut lower = f64::INFINITY;
    let mut defect: f64 = 0.0;
    let mut margin = f64::INFINITY;
    for i in 0..n_s {
        let s = i as f64 / n_s as f64;
        for j in 0..n_t {
            let kappa = -kmax + 2.0 * kmax * j as f64 / (n_t - 1) as f64;
            let t = s + a * (1.0 + h * kappa);
            let d = model.d2(s, t)?;
            lower = lower.min(d.v);
            margin = margin.min(-d.d12);
            let mirrored = model.value(-t, -s)?;
            defect = defect.max((d.v - mirrored).abs());
        }
    }
    Ok(ConditionsReport {
        lower_bound: lower,
        symmetry_defect: defect,
        twist_margin: margin,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::potential::tabulate;
    use std::sync::OnceLock;

    fn shared() -> &'static (ModelParams, TabulatedPotential) {
        static CELL: OnceLock<(ModelParams, TabulatedPotential)> = OnceLock::new();
        CELL.get_or_init(|| {
            let params = ModelParams::canonical(764.0);
            let table = tabulate(&params, 64, 16, 0.2 / params.h).unwrap();
            (params, table)
        })
    }

    #[test]
    fn curvature_zero_at_natural_spacing() {
        let params = ModelParams::canonical(764.0);
        let a = params.alpha();
        assert_eq!(curvature_from_pair(0.0, a, &params), 0.0);
        assert!(curvature_from_pair(0.3, 0.3 + a, &params).abs() < 1e-15);
        assert!(curvature_from_pair(0.3, 0.3 + 1.05 * a, &params) > 0.0);
        assert!(curvature_from_pair(0.3, 0.3 + 0.95 * a, &params) < 0.0);
    }

    #[test]
    fn site_energy_splits_into_substrate_and_bending() {
        let (params, table) = shared();
        let a = params.alpha();
        let kappa = 0.05;
        let s = 0.3;
        let t = s + a * (1.0 + params.h * kappa);
        let v = site_energy(s, t, table, params).unwrap();
        let sub = table.eval(s, kappa).unwrap();
        let bend = 0.5 * params.beta * kappa * kappa;
        assert!((v - sub - bend).abs() < 1e-10 * bend);
    }

    #[test]
    fn pair_derivatives_match_finite_differences() {
        let (params, table) = shared();
        for attribution in [Attribution::LeftEndpoint, Attribution::Symmetrized] {
            let model = SiteModel::new(table, params).unwrap().with_attribution(attribution);
            let (s, t) = (0.27, 0.27 + params.alpha() * 1.002);
            let d = model.d2(s, t).unwrap();
            let e = 1e-6;
            let vpp = model.value(s + e, t).unwrap();
            let vpm = model.value(s - e, t).unwrap();
            let vtp = model.value(s, t + e).unwrap();
            let vtm = model.value(s, t - e).unwrap();
            let fd1 = (vpp - vpm) / (2.0 * e);
            let fd2 = (vtp - vtm) / (2.0 * e);
            assert!((d.d1 - fd1).abs() < 1e-5 * fd1.abs().max(1.0), "{attribution:?}");
            assert!((d.d2 - fd2).abs() < 1e-5 * fd2.abs().max(1.0), "{attribution:?}");
            let f11 = (vpp - 2.0 * d.v + vpm) / (e * e);
            let f22 = (vtp - 2.0 * d.v + vtm) / (e * e);
            let f12 = (model.value(s + e, t + e).unwrap() - model.value(s + e, t - e).unwrap()
                - model.value(s - e, t + e).unwrap()
                + model.value(s - e, t - e).unwrap())
                / (4.0 * e * e);
            assert!((d.d11 - f11).abs() < 1e-3 * f11.abs().max(1.0), "{attribution:?}");
            assert!((d.d22 - f22).abs() < 1e-3 * f22.abs().max(1.0), "{attribution:?}");
            assert!((d.d12 - f12).abs() < 1e-3 * f12.abs().max(1.0), "{attribution:?}");
        }
    }

    #[test]
    fn supercell_construction_checks_inputs() {
        assert!(SupercellState::uniform(34, 35).is_ok());
        assert!(SupercellState::uniform(34, 36).is_err()); // gcd 2
        assert!(SupercellState::new(3, 5, vec![0.0; 4]).is_err());
        assert!(SupercellState::new(0, 5, vec![0.0; 5]).is_err());
    }

    #[test]
    fn uniform_state_is_admissible_and_wraps() {
        let st = SupercellState::uniform(34, 35).unwrap();
        assert!(st.is_admissible());
        let gap = 34.0 / 35.0;
        for j in 0..35 {
            assert!((st.spacing(j) - gap).abs() < 1e-12);
        }
        let (a, b) = st.pair(34);
        assert!((b - a - gap).abs() < 1e-12);
    }

    #[test]
    fn disordered_state_is_flagged() {
        let mut s: Vec<f64> = (0..5).map(|j| j as f64 * 3.0 / 5.0).collect();
        s.swap(1, 2);
        let st = SupercellState::new(3, 5, s).unwrap();
        assert!(!st.is_admissible());
        assert!(st.require_admissible().is_err());
    }

    #[test]
    fn supercell_energy_matches_naive_sum() {
        let (params, table) = shared();
        let model = SiteModel::new(table, params).unwrap();
        let st = SupercellState::uniform(34, 35).unwrap();
        let fast = supercell_energy(&st, &model).unwrap();
        let mut naive = 0.0;
        for j in 0..35 {
            let (s, t) = st.pair(j);
            naive += site_energy(s, t, table, params).unwrap();
        }
        assert!((fast - naive).abs() < 1e-12 * naive.abs().max(1.0));
    }

    #[test]
    fn energy_is_translation_invariant() {
        let (params, table) = shared();
        let model = SiteModel::new(table, params).unwrap();
        let st = SupercellState::uniform(34, 35).unwrap();
        let e0 = supercell_energy(&st, &model).unwrap();
        let e5 = supercell_energy(&st.translated(5), &model).unwrap();
        assert!((e0 - e5).abs() < 1e-10 * e0.abs().max(1.0));
    }

    #[test]
    fn energy_is_relabeling_invariant() {
        let (params, table) = shared();
        let model = SiteModel::new(table, params).unwrap();
        // A mildly non-uniform admissible state.
        let q = 35;
        let s: Vec<f64> = (0..q)
            .map(|j| {
                let x = j as f64 * 34.0 / 35.0;
                x + 0.01 * (2.0 * std::f64::consts::PI * x).sin()
            })
            .collect();
        let st = SupercellState::new(34, q, s.clone()).unwrap();
        assert!(st.is_admissible());
        // Relabel j -> j+1 with wrap: rotate and shift the wrapped entry.
        let mut rot: Vec<f64> = s[1..].to_vec();
        rot.push(s[0] + 34.0);
        let str = SupercellState::new(34, q, rot).unwrap();
        let e0 = supercell_energy(&st, &model).unwrap();
        let e1 = supercell_energy(&str, &model).unwrap();
        assert!((e0 - e1).abs() < 1e-11 * e0.abs().max(1.0));
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let (params, table) = shared();
        let model = SiteModel::new(table, params).unwrap();
        let (p, q) = (12i64, 13i64);
        let s: Vec<f64> = (0..q)
            .map(|j| {
                let x = j as f64 * p as f64 / q as f64;
                x + 0.008 * (2.0 * std::f64::consts::PI * x / p as f64).cos()
            })
            .collect();
        let st = SupercellState::new(p, q as usize, s).unwrap();
        let g = supercell_gradient(&st, &model).unwrap();
        let e = 1e-6;
        for j in 0..q as usize {
            let mut plus = st.clone();
            plus.abscissas_mut()[j] += e;
            let mut minus = st.clone();
            minus.abscissas_mut()[j] -= e;
            let fd = (supercell_energy(&plus, &model).unwrap()
                - supercell_energy(&minus, &model).unwrap())
                / (2.0 * e);
            assert!(
                (g[j] - fd).abs() < 1e-5 * fd.abs().max(1e-3),
                "site {j}: {} vs {fd}",
                g[j]
            );
        }
    }

    #[test]
    fn conditions_report_is_sane() {
        let (params, table) = shared();
        let model = SiteModel::new(table, params).unwrap();
        let rep = check_conditions(&model, 24, 17).unwrap();
        assert!(rep.lower_bound.is_finite());
        assert!(rep.twist_margin > 0.0);
        assert!(rep.symmetry_defect >= 0.0);
        // Symmetrized attribution kills the defect.
        let sym = model.with_attribution(Attribution::Symmetrized);
        let rep_sym = check_conditions(&sym, 24, 17).unwrap();
        assert!(rep_sym.symmetry_defect < 1e-12);
    }

    #[test]
    fn state_file_round_trip_is_exact() {
        let (params, _) = shared();
        let st = SupercellState::uniform(34, 35).unwrap();
        let dir = std::env::temp_dir().join("fkchain-state-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.txt");
        st.save(params, &path).unwrap();
        let (back, back_params) = SupercellState::load(&path).unwrap();
        assert_eq!(back.p(), 34);
        assert_eq!(back.q(), 35);
        assert_eq!(back.abscissas(), st.abscissas());
        assert_eq!(back_params.alpha(), params.alpha());
        assert_eq!(back_params.beta, params.beta);
    }
}
