//! Two elastic chains coupled by Lennard-Jones in a periodic, relaxable
//! cell.
//!
//! This is the direct simulator the reduced chain model is checked
//! against: each chain carries harmonic bonds and angular springs, the
//! layers interact through a 12-6 potential over a neighbor list frozen
//! at construction, and the cell length is a degree of freedom that
//! scales x-coordinates affinely. Energies are accumulated with
//! compensated summation because the interesting relaxation signals are
//! ten orders below the raw Lennard-Jones total.

use crate::minimize::{lbfgs, KahanSum, LbfgsParams};
use crate::potential::lj_pair;
use crate::{Error, Result};
use std::io::Write as _;
use std::path::Path;

/// Elastic constants of one chain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChainConstants {
    /// Rest length of a bond.
    pub bond_length: f64,
    /// Harmonic bond stiffness (energy / length^2).
    pub bond_stiffness: f64,
    /// Angular spring stiffness (energy).
    pub angle_stiffness: f64,
}

/// Interlayer pair potential constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LjConstants {
    pub eps: f64,
    pub sigma: f64,
    /// Pairs closer than this at construction enter the frozen list.
    pub cutoff: f64,
}

/// Energy split by physical origin.
#[derive(Debug, Clone, Copy, Default)]
pub struct EnergyBreakdown {
    pub bond: f64,
    pub angle: f64,
    pub lj: f64,
    pub total: f64,
}

/// Selects one term of the energy.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnergyTerm {
    Bond,
    Angle,
    Lj,
}

/// Energy derivatives with respect to positions and cell length.
#[derive(Debug, Clone)]
pub struct ForceField {
    /// dE/d(x, y) per chain-1 atom.
    pub chain1: Vec<[f64; 2]>,
    /// dE/d(x, y) per chain-2 atom.
    pub chain2: Vec<[f64; 2]>,
    /// dE/dL with x-coordinates riding affinely on L.
    pub cell: f64,
}

/// The coupled two-chain system.
#[derive(Debug, Clone)]
pub struct AtomisticSystem {
    chain1: Vec<[f64; 2]>,
    chain2: Vec<[f64; 2]>,
    cell: f64,
    c1: ChainConstants,
    c2: ChainConstants,
    lj: LjConstants,
    /// Frozen interlayer pairs `(i, j, image)` with
    /// `dx = x2[j] + image * L - x1[i]`.
    neighbors: Vec<(u32, u32, i32)>,
}

fn check_constants(c1: &ChainConstants, c2: &ChainConstants, lj: &LjConstants) -> Result<()> {
    for (name, c) in [("chain 1", c1), ("chain 2", c2)] {
        if !(c.bond_length > 0.0 && c.bond_stiffness >= 0.0 && c.angle_stiffness >= 0.0) {
            return Err(Error::Params(format!("invalid elastic constants for {name}")));
        }
    }
    if !(lj.eps >= 0.0 && lj.sigma > 0.0 && lj.cutoff > 0.0) {
        return Err(Error::Params("invalid pair-potential constants".into()));
    }
    Ok(())
}

/// Builds the system with straight chains at their rest spacings,
/// chain 1 at `y = 0` and chain 2 at `y = separation`, and freezes the
/// interlayer neighbor list from those positions.
///
/// Both chains must tile the cell: `n * bond_length = cell_length` for
/// each, to one part in 1e9.
pub fn build_system(
    n1: usize,
    n2: usize,
    cell_length: f64,
    separation: f64,
    c1: ChainConstants,
    c2: ChainConstants,
    lj: LjConstants,
) -> Result<AtomisticSystem> {
    if !(cell_length > 0.0) {
        return Err(Error::Params(format!("cell length {cell_length} must be > 0")));
    }
    for (name, n, l) in [("chain 1", n1, c1.bond_length), ("chain 2", n2, c2.bond_length)] {
        if (n as f64 * l - cell_length).abs() > 1e-9 * cell_length.max(1.0) {
            return Err(Error::Params(format!(
                "{name}: {n} bonds of {l} do not tile the cell {cell_length}"
            )));
        }
    }
    let chain1 = (0..n1).map(|i| [i as f64 * c1.bond_length, 0.0]).collect();
    let chain2 = (0..n2)
        .map(|j| [j as f64 * c2.bond_length, separation])
        .collect();
    from_positions(chain1, chain2, cell_length, c1, c2, lj)
}

/// Builds a system from explicit positions, freezing the neighbor list
/// from them.
pub fn from_positions(
    chain1: Vec<[f64; 2]>,
    chain2: Vec<[f64; 2]>,
    cell: f64,
    c1: ChainConstants,
    c2: ChainConstants,
    lj: LjConstants,
) -> Result<AtomisticSystem> {
    check_constants(&c1, &c2, &lj)?;
    if chain1.len() < 3 || chain2.len() < 3 {
        return Err(Error::Params(format!(
            "chains need at least 3 atoms, got {} and {}",
            chain1.len(),
            chain2.len()
        )));
    }
    if !(cell > 0.0) {
        return Err(Error::Params(format!("cell length {cell} must be > 0")));
    }
    let mut neighbors = Vec::new();
    for (i, a) in chain1.iter().enumerate() {
        for (j, b) in chain2.iter().enumerate() {
            let image = ((a[0] - b[0]) / cell).round();
            let dx = b[0] + image * cell - a[0];
            let dy = b[1] - a[1];
            if (dx * dx + dy * dy).sqrt() <= lj.cutoff {
                neighbors.push((i as u32, j as u32, image as i32));
            }
        }
    }
    Ok(AtomisticSystem {
        chain1,
        chain2,
        cell,
        c1,
        c2,
        lj,
        neighbors,
    })
}

/// The default bilayer: a half-spacing chain of 232 atoms against a
/// 233-atom chain over the same 116-sigma cell, covalent-scale bond and
/// angle stiffness (scaled per bond length so both chains share one
/// elastic modulus), and a weak interlayer potential with a generous
/// frozen cutoff.
pub fn canonical_system() -> Result<AtomisticSystem> {
    let l1 = 0.5;
    let l2 = 116.0 / 233.0;
    let k1 = 130_600.0;
    let ktheta1 = 764.0;
    build_system(
        232,
        233,
        116.0,
        1.063,
        ChainConstants {
            bond_length: l1,
            bond_stiffness: k1,
            angle_stiffness: ktheta1,
        },
        ChainConstants {
            bond_length: l2,
            bond_stiffness: k1 * l2 / l1,
            angle_stiffness: ktheta1 * l2 / l1,
        },
        LjConstants {
            eps: 1.0,
            sigma: 1.0,
            cutoff: 29.0,
        },
    )
}

/// Outcome of a structural relaxation.
#[derive(Debug, Clone)]
pub struct AtomisticRelaxation {
    pub system: AtomisticSystem,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    /// Final minus initial energy, per term.
    pub delta: EnergyBreakdown,
    /// Relative cell-length change, `(L_final - L_initial) / L_initial`.
    pub length_change: f64,
    /// Force max-norm at the returned state.
    pub residual: f64,
}

impl AtomisticSystem {
    pub fn chain1(&self) -> &[[f64; 2]] {
        &self.chain1
    }

    pub fn chain2(&self) -> &[[f64; 2]] {
        &self.chain2
    }

    pub fn cell(&self) -> f64 {
        self.cell
    }

    pub fn chain1_constants(&self) -> &ChainConstants {
        &self.c1
    }

    pub fn chain2_constants(&self) -> &ChainConstants {
        &self.c2
    }

    pub fn lj_constants(&self) -> &LjConstants {
        &self.lj
    }

    /// Frozen interlayer pairs `(i, j, image)`.
    pub fn neighbors(&self) -> &[(u32, u32, i32)] {
        &self.neighbors
    }

    /// Copy with one atom displaced; the frozen list is kept.
    pub fn displaced(&self, chain: usize, index: usize, dx: f64, dy: f64) -> AtomisticSystem {
        let mut out = self.clone();
        let target = match chain {
            1 => &mut out.chain1[index],
            _ => &mut out.chain2[index],
        };
        target[0] += dx;
        target[1] += dy;
        out
    }

    /// Copy with the cell and every x-coordinate scaled by `factor`; the
    /// frozen list is kept.
    pub fn with_cell_scaled(&self, factor: f64) -> AtomisticSystem {
        let mut out = self.clone();
        out.cell *= factor;
        for a in out.chain1.iter_mut().chain(out.chain2.iter_mut()) {
            a[0] *= factor;
        }
        out
    }

    // Degrees of freedom are packed as [u1, u2, y1, y2, lambda] where
    // physical x = lambda * u and L = lambda * cell; the stored state is
    // lambda = 1.
    fn dof_len(&self) -> usize {
        2 * (self.chain1.len() + self.chain2.len()) + 1
    }

    fn pack(&self) -> Vec<f64> {
        let (n1, n2) = (self.chain1.len(), self.chain2.len());
        let mut z = Vec::with_capacity(self.dof_len());
        z.extend(self.chain1.iter().map(|a| a[0]));
        z.extend(self.chain2.iter().map(|a| a[0]));
        z.extend(self.chain1.iter().map(|a| a[1]));
        z.extend(self.chain2.iter().map(|a| a[1]));
        z.push(1.0);
        debug_assert_eq!(z.len(), 2 * (n1 + n2) + 1);
        z
    }

    fn unpack(&self, z: &[f64]) -> AtomisticSystem {
        let (n1, n2) = (self.chain1.len(), self.chain2.len());
        let lambda = z[2 * (n1 + n2)];
        let mut out = self.clone();
        for (i, a) in out.chain1.iter_mut().enumerate() {
            a[0] = lambda * z[i];
            a[1] = z[n1 + n2 + i];
        }
        for (j, a) in out.chain2.iter_mut().enumerate() {
            a[0] = lambda * z[n1 + j];
            a[1] = z[2 * n1 + n2 + j];
        }
        out.cell = lambda * self.cell;
        out
    }

    /// Energy of the packed state `z`; `grad` (same layout) is filled
    /// with the exact derivatives. `term` restricts both to one
    /// component.
    fn eval_dof(
        &self,
        z: &[f64],
        term: Option<EnergyTerm>,
        grad: &mut [f64],
    ) -> Result<EnergyBreakdown> {
        let (n1, n2) = (self.chain1.len(), self.chain2.len());
        let (u, rest) = z.split_at(n1 + n2);
        let (y, lam) = rest.split_at(n1 + n2);
        let lambda = lam[0];
        let l0 = self.cell;
        grad.iter_mut().for_each(|g| *g = 0.0);
        let (gp, gl) = grad.split_at_mut(2 * (n1 + n2));
        let (gu, gy) = gp.split_at_mut(n1 + n2);
        let glam = &mut gl[0];

        let mut bond = KahanSum::new();
        let mut angle = KahanSum::new();
        let mut ljsum = KahanSum::new();

        let want = |t: EnergyTerm| term.is_none() || term == Some(t);

        for (chain, c) in [(0usize, &self.c1), (1, &self.c2)] {
            let (off, n) = if chain == 0 { (0, n1) } else { (n1, n2) };
            let u = &u[off..off + n];
            let y = &y[off..off + n];
            let gu = &mut gu[off..off + n];
            let gy = &mut gy[off..off + n];

            // Bond vectors i -> i+1, the wrap closing through the cell.
            let mut bvec = Vec::with_capacity(n);
            for i in 0..n {
                let j = (i + 1) % n;
                let shift = if i + 1 == n { l0 } else { 0.0 };
                let bx = lambda * (u[j] + shift - u[i]);
                let by = y[j] - y[i];
                let r = (bx * bx + by * by).sqrt();
                if r == 0.0 {
                    return Err(Error::Geometry(format!(
                        "coincident consecutive atoms {i}, {j} in chain {}",
                        chain + 1
                    )));
                }
                bvec.push((bx, by, r));
            }

            if want(EnergyTerm::Bond) {
                for i in 0..n {
                    let j = (i + 1) % n;
                    let (bx, by, r) = bvec[i];
                    let stretch = r - c.bond_length;
                    bond.add(0.5 * c.bond_stiffness * stretch * stretch);
                    let dedr = c.bond_stiffness * stretch;
                    let px = dedr * bx / r;
                    let py = dedr * by / r;
                    gu[i] -= lambda * px;
                    gu[j] += lambda * px;
                    gy[i] -= py;
                    gy[j] += py;
                    *glam += px * bx / lambda;
                }
            }

            if want(EnergyTerm::Angle) {
                for i in 0..n {
                    let (px, py, np) = bvec[i];
                    let im = (i + n - 1) % n;
                    let (mx, my, nm) = bvec[im];
                    let cross = px * my - py * mx;
                    let d = cross / (np * nm);
                    let dc = d.clamp(-(1.0 - 1e-12), 1.0 - 1e-12);
                    let a = dc.asin();
                    angle.add(0.5 * c.angle_stiffness * a * a);
                    let dedd = c.angle_stiffness * a / (1.0 - dc * dc).sqrt();
                    // d = cross / (np * nm); derivatives per bond vector.
                    let dp = [
                        my / (np * nm) - d * px / (np * np),
                        -mx / (np * nm) - d * py / (np * np),
                    ];
                    let dm = [
                        -py / (np * nm) - d * mx / (nm * nm),
                        px / (np * nm) - d * my / (nm * nm),
                    ];
                    let j = (i + 1) % n;
                    gu[j] += dedd * dp[0] * lambda;
                    gu[i] -= dedd * dp[0] * lambda;
                    gy[j] += dedd * dp[1];
                    gy[i] -= dedd * dp[1];
                    gu[i] += dedd * dm[0] * lambda;
                    gu[im] -= dedd * dm[0] * lambda;
                    gy[i] += dedd * dm[1];
                    gy[im] -= dedd * dm[1];
                    *glam += dedd * (dp[0] * px + dm[0] * mx) / lambda;
                }
            }
        }

        if want(EnergyTerm::Lj) {
            let (u1g, u2g) = (0, n1);
            for &(i, j, image) in &self.neighbors {
                let (i, j) = (i as usize, j as usize);
                let dx = lambda * (u[u2g + j] + image as f64 * l0 - u[u1g + i]);
                let dy = y[n1 + j] - y[i];
                let r = (dx * dx + dy * dy).sqrt();
                if r == 0.0 {
                    return Err(Error::Geometry(format!(
                        "coincident interlayer pair ({i}, {j})"
                    )));
                }
                let (v, dv) = lj_pair(r, self.lj.eps, self.lj.sigma);
                ljsum.add(v);
                let px = dv * dx / r;
                let py = dv * dy / r;
                gu[u1g + i] -= lambda * px;
                gu[u2g + j] += lambda * px;
                gy[i] -= py;
                gy[n1 + j] += py;
                *glam += px * dx / lambda;
            }
        }

        let (b, a, l) = (bond.total(), angle.total(), ljsum.total());
        Ok(EnergyBreakdown {
            bond: b,
            angle: a,
            lj: l,
            total: b + a + l,
        })
    }

    /// Current energy, split by term.
    pub fn total_energy(&self) -> Result<EnergyBreakdown> {
        let z = self.pack();
        let mut scratch = vec![0.0; z.len()];
        self.eval_dof(&z, None, &mut scratch)
    }

    /// Exact derivatives of the selected term (or the total) with
    /// respect to atom positions and the cell length.
    pub fn energy_gradient(&self, term: Option<EnergyTerm>) -> Result<ForceField> {
        let z = self.pack();
        let mut grad = vec![0.0; z.len()];
        self.eval_dof(&z, term, &mut grad)?;
        let (n1, n2) = (self.chain1.len(), self.chain2.len());
        let chain1 = (0..n1).map(|i| [grad[i], grad[n1 + n2 + i]]).collect();
        let chain2 = (0..n2)
            .map(|j| [grad[n1 + j], grad[2 * n1 + n2 + j]])
            .collect();
        Ok(ForceField {
            chain1,
            chain2,
            cell: grad[2 * (n1 + n2)] / self.cell,
        })
    }

    /// Minimizes the total energy over all positions and the cell
    /// length. Non-convergence is reported, not an error; the best state
    /// found is returned either way.
    pub fn relax_system(&self, tol: f64, max_iter: usize) -> Result<AtomisticRelaxation> {
        let e0 = self.total_energy()?;
        let z0 = self.pack();
        let dim = z0.len();
        let objective = |z: &[f64], grad: &mut [f64]| -> Option<f64> {
            if !(z[dim - 1] > 0.1) {
                return None;
            }
            match self.eval_dof(z, None, grad) {
                Ok(bd) => Some(bd.total - e0.total),
                Err(_) => None,
            }
        };
        let params = LbfgsParams {
            tol_grad_inf: tol,
            max_iter,
            max_step_component: 0.05,
            ..LbfgsParams::default()
        };
        let res = lbfgs(objective, z0, &params)?;
        let system = self.unpack(&res.x);
        let e1 = system.total_energy()?;
        Ok(AtomisticRelaxation {
            converged: res.converged,
            iterations: res.iterations,
            evaluations: res.evals,
            delta: EnergyBreakdown {
                bond: e1.bond - e0.bond,
                angle: e1.angle - e0.angle,
                lj: e1.lj - e0.lj,
                total: e1.total - e0.total,
            },
            length_change: system.cell / self.cell - 1.0,
            residual: res.grad_inf,
            system,
        })
    }

    /// Writes the full state as a text snapshot.
    pub fn save_snapshot(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(out, "fk-atomistic v1")?;
        writeln!(out, "n1 {}", self.chain1.len())?;
        writeln!(out, "n2 {}", self.chain2.len())?;
        writeln!(out, "cell {:.16e}", self.cell)?;
        for (name, c) in [("chain1", &self.c1), ("chain2", &self.c2)] {
            writeln!(
                out,
                "{name} {:.16e} {:.16e} {:.16e}",
                c.bond_length, c.bond_stiffness, c.angle_stiffness
            )?;
        }
        writeln!(
            out,
            "lj {:.16e} {:.16e} {:.16e}",
            self.lj.eps, self.lj.sigma, self.lj.cutoff
        )?;
        writeln!(out, "atoms")?;
        for (id, chain) in [(1, &self.chain1), (2, &self.chain2)] {
            for (i, a) in chain.iter().enumerate() {
                writeln!(out, "{id} {i} {:.16e} {:.16e}", a[0], a[1])?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

/// Reads a snapshot written by [`AtomisticSystem::save_snapshot`]. The
/// neighbor list is rebuilt from the stored positions.
pub fn load_snapshot(path: &Path) -> Result<AtomisticSystem> {
    let text = std::fs::read_to_string(path)?;
    let parse = |msg: &str| Error::Parse {
        path: path.display().to_string(),
        msg: msg.to_string(),
    };
    let mut lines = text.lines();
    if lines.next() != Some("fk-atomistic v1") {
        return Err(parse("missing fk-atomistic v1 header"));
    }
    let mut field = |name: &str| -> Result<Vec<f64>> {
        let line = lines.next().ok_or_else(|| parse("truncated header"))?;
        let mut it = line.split_whitespace();
        if it.next() != Some(name) {
            return Err(parse(&format!("expected field {name}, got {line:?}")));
        }
        it.map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse(&format!("bad number {t:?} in {name}")))
        })
        .collect()
    };
    let n1 = field("n1")?.first().copied().unwrap_or(0.0) as usize;
    let n2 = field("n2")?.first().copied().unwrap_or(0.0) as usize;
    let cell = *field("cell")?.first().ok_or_else(|| parse("empty cell"))?;
    let read_chain = |v: Vec<f64>| -> Result<ChainConstants> {
        if v.len() != 3 {
            return Err(parse("chain constants need 3 numbers"));
        }
        Ok(ChainConstants {
            bond_length: v[0],
            bond_stiffness: v[1],
            angle_stiffness: v[2],
        })
    };
    let c1 = read_chain(field("chain1")?)?;
    let c2 = read_chain(field("chain2")?)?;
    let ljv = field("lj")?;
    if ljv.len() != 3 {
        return Err(parse("lj constants need 3 numbers"));
    }
    let lj = LjConstants {
        eps: ljv[0],
        sigma: ljv[1],
        cutoff: ljv[2],
    };
    if lines.next() != Some("atoms") {
        return Err(parse("missing atoms section"));
    }
    let mut chain1 = Vec::with_capacity(n1);
    let mut chain2 = Vec::with_capacity(n2);
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != 4 {
            return Err(parse(&format!("bad atom line {line:?}")));
        }
        let x: f64 = toks[2].parse().map_err(|_| parse("bad x"))?;
        let y: f64 = toks[3].parse().map_err(|_| parse("bad y"))?;
        match toks[0] {
            "1" => chain1.push([x, y]),
            "2" => chain2.push([x, y]),
            _ => return Err(parse("chain_id must be 1 or 2")),
        }
    }
    if chain1.len() != n1 || chain2.len() != n2 {
        return Err(parse(&format!(
            "expected {n1} + {n2} atoms, found {} + {}",
            chain1.len(),
            chain2.len()
        )));
    }
    from_positions(chain1, chain2, cell, c1, c2, lj)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny_constants(l: f64) -> ChainConstants {
        ChainConstants {
            bond_length: l,
            bond_stiffness: 1000.0,
            angle_stiffness: 10.0,
        }
    }

    #[test]
    fn canonical_geometry() {
        let sys = canonical_system().unwrap();
        assert_eq!(sys.chain1().len(), 232);
        assert_eq!(sys.chain2().len(), 233);
        assert!((sys.cell() - 116.0).abs() < 1e-12);
        let l2 = sys.chain2_constants().bond_length;
        assert!((l2 - 0.49785).abs() < 1e-4);
        assert!((233.0 * l2 - 116.0).abs() < 1e-9);

        // Frozen-list sanity: every chain-1 atom sees a wide window of
        // the other chain; the per-atom count can differ by one because
        // the cutoff circle boundary sweeps across the incommensurate
        // second chain.
        let mut counts = vec![0usize; 232];
        for &(i, _, _) in sys.neighbors() {
            counts[i as usize] += 1;
        }
        let lo = *counts.iter().min().unwrap();
        let hi = *counts.iter().max().unwrap();
        assert!(lo > 100, "implausibly small neighbor count {lo}");
        assert!(hi - lo <= 1, "counts spread [{lo}, {hi}]");
    }

    #[test]
    fn straight_chains_carry_no_elastic_energy() {
        let sys = canonical_system().unwrap();
        let e = sys.total_energy().unwrap();
        // Angles of a straight chain vanish identically; bonds are zero
        // up to the rounding of the irrational chain-2 spacing.
        assert_eq!(e.angle, 0.0);
        assert!(e.bond.abs() < 1e-18, "bond energy {}", e.bond);
        assert!(e.lj < 0.0);
        assert!((e.total - (e.bond + e.angle + e.lj)).abs() < 1e-12);
    }

    #[test]
    fn isolated_pairs_sit_at_the_lj_minimum() {
        let h = 2.0_f64.powf(1.0 / 6.0);
        let sys = build_system(
            3,
            3,
            30.0,
            h,
            tiny_constants(10.0),
            tiny_constants(10.0),
            LjConstants {
                eps: 1.0,
                sigma: 1.0,
                cutoff: 5.0,
            },
        )
        .unwrap();
        assert_eq!(sys.neighbors().len(), 3);
        let e = sys.total_energy().unwrap();
        assert!((e.lj + 3.0).abs() < 1e-12, "lj {}", e.lj);
        assert_eq!(e.angle, 0.0);
        assert!(e.bond.abs() < 1e-20);
    }

    #[test]
    fn mismatched_chain_lengths_are_rejected() {
        let err = build_system(
            3,
            3,
            31.0,
            1.0,
            tiny_constants(10.0),
            tiny_constants(10.0),
            LjConstants {
                eps: 1.0,
                sigma: 1.0,
                cutoff: 5.0,
            },
        )
        .unwrap_err();
        assert!(matches!(err, Error::Params(_)));
    }

    #[test]
    fn lj_total_matches_naive_double_loop() {
        let sys = canonical_system().unwrap();
        let e = sys.total_energy().unwrap();
        let mut oracle = KahanSum::new();
        let mut pairs = 0usize;
        for a in sys.chain1() {
            for b in sys.chain2() {
                for n in -1..=1 {
                    let dx = b[0] + n as f64 * sys.cell() - a[0];
                    let dy = b[1] - a[1];
                    let r = (dx * dx + dy * dy).sqrt();
                    if r <= sys.lj_constants().cutoff {
                        let (v, _) = lj_pair(r, 1.0, 1.0);
                        oracle.add(v);
                        pairs += 1;
                    }
                }
            }
        }
        assert_eq!(pairs, sys.neighbors().len());
        assert!((e.lj - oracle.total()).abs() < 1e-10, "delta {}", e.lj - oracle.total());
    }

    fn perturbed_canonical() -> AtomisticSystem {
        let mut sys = canonical_system().unwrap();
        let mut rng: u64 = 0x9e3779b97f4a7c15;
        let mut next = move || {
            rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5
        };
        for chain in [1, 2] {
            let n = if chain == 1 { 232 } else { 233 };
            for i in 0..n {
                sys = sys.displaced(chain, i, 2e-3 * next(), 2e-3 * next());
            }
        }
        sys
    }

    #[test]
    fn gradients_match_finite_differences() {
        let sys = perturbed_canonical();
        let step = 1e-7;
        for term in [None, Some(EnergyTerm::Bond), Some(EnergyTerm::Angle), Some(EnergyTerm::Lj)] {
            let grad = sys.energy_gradient(term).unwrap();
            let scale = grad
                .chain1
                .iter()
                .chain(&grad.chain2)
                .flatten()
                .fold(grad.cell.abs(), |m, g| m.max(g.abs()));
            let energy = |s: &AtomisticSystem| -> f64 {
                let e = s.total_energy().unwrap();
                match term {
                    None => e.total,
                    Some(EnergyTerm::Bond) => e.bond,
                    Some(EnergyTerm::Angle) => e.angle,
                    Some(EnergyTerm::Lj) => e.lj,
                }
            };
            for &(chain, idx) in &[(1usize, 0usize), (1, 57), (1, 231), (2, 0), (2, 116), (2, 232)] {
                for dir in 0..2 {
                    let (dx, dy) = if dir == 0 { (step, 0.0) } else { (0.0, step) };
                    let ep = energy(&sys.displaced(chain, idx, dx, dy));
                    let em = energy(&sys.displaced(chain, idx, -dx, -dy));
                    let fd = (ep - em) / (2.0 * step);
                    let g = if chain == 1 {
                        grad.chain1[idx][dir]
                    } else {
                        grad.chain2[idx][dir]
                    };
                    assert!(
                        (fd - g).abs() <= 1e-5 * scale.max(1.0),
                        "term {term:?} chain {chain} atom {idx} dir {dir}: fd {fd} vs {g}"
                    );
                }
            }
            // Cell derivative under affine x-scaling.
            let f = step / sys.cell();
            let ep = energy(&sys.with_cell_scaled(1.0 + f));
            let em = energy(&sys.with_cell_scaled(1.0 - f));
            let fd = (ep - em) / (2.0 * step);
            assert!(
                (fd - grad.cell).abs() <= 1e-5 * scale.max(1.0),
                "term {term:?} cell: fd {fd} vs {}",
                grad.cell
            );
        }
    }

    #[test]
    fn energy_survives_translation_and_relabeling() {
        let sys = canonical_system().unwrap();
        let e0 = sys.total_energy().unwrap();

        let slide = |v: &[[f64; 2]], d: f64| v.iter().map(|a| [a[0] + d, a[1]]).collect();
        let moved = from_positions(
            slide(sys.chain1(), 116.0),
            slide(sys.chain2(), 116.0),
            sys.cell(),
            *sys.chain1_constants(),
            *sys.chain2_constants(),
            *sys.lj_constants(),
        )
        .unwrap();
        let e1 = moved.total_energy().unwrap();
        assert!((e1.total - e0.total).abs() < 1e-9);

        // Cyclic relabeling of chain 2: same atom set modulo the cell.
        let n = sys.chain2().len();
        let shift = 5;
        let relabeled: Vec<[f64; 2]> = (0..n)
            .map(|j| {
                let k = (j + shift) % n;
                let wrap = if j + shift >= n { sys.cell() } else { 0.0 };
                [sys.chain2()[k][0] + wrap, sys.chain2()[k][1]]
            })
            .collect();
        let relab = from_positions(
            sys.chain1().to_vec(),
            relabeled,
            sys.cell(),
            *sys.chain1_constants(),
            *sys.chain2_constants(),
            *sys.lj_constants(),
        )
        .unwrap();
        let e2 = relab.total_energy().unwrap();
        assert!((e2.total - e0.total).abs() < 1e-9);
        assert_eq!(relab.neighbors().len(), sys.neighbors().len());
    }

    #[test]
    fn collinear_chains_have_zero_angle_energy() {
        // Uneven spacings along a line: bonds stretch, angles stay zero.
        let spac = [1.0, 1.3, 0.7, 1.0, 1.2, 0.8];
        let mut x = 0.0;
        let mut chain1 = Vec::new();
        for s in spac {
            chain1.push([x, 0.0]);
            x += s;
        }
        let chain2: Vec<[f64; 2]> = (0..6).map(|j| [j as f64, 2.0]).collect();
        let sys = from_positions(
            chain1,
            chain2,
            6.0,
            tiny_constants(1.0),
            tiny_constants(1.0),
            LjConstants {
                eps: 1.0,
                sigma: 1.0,
                cutoff: 3.0,
            },
        )
        .unwrap();
        let e = sys.total_energy().unwrap();
        assert_eq!(e.angle, 0.0);
        assert!(e.bond > 0.0);
    }

    #[test]
    fn coincident_atoms_are_rejected() {
        let chain1 = vec![[0.0, 0.0], [0.0, 0.0], [2.0, 0.0]];
        let chain2 = vec![[0.0, 1.0], [1.0, 1.0], [2.0, 1.0]];
        let sys = from_positions(
            chain1,
            chain2,
            3.0,
            tiny_constants(1.0),
            tiny_constants(1.0),
            LjConstants {
                eps: 1.0,
                sigma: 1.0,
                cutoff: 2.0,
            },
        )
        .unwrap();
        assert!(matches!(sys.total_energy(), Err(Error::Geometry(_))));
    }

    #[test]
    fn small_bilayer_relaxation_descends() {
        let l2 = 8.0 / 17.0;
        let sys = build_system(
            16,
            17,
            8.0,
            1.0,
            ChainConstants {
                bond_length: 0.5,
                bond_stiffness: 2000.0,
                angle_stiffness: 20.0,
            },
            ChainConstants {
                bond_length: l2,
                bond_stiffness: 2000.0 * l2 / 0.5,
                angle_stiffness: 20.0 * l2 / 0.5,
            },
            LjConstants {
                eps: 1.0,
                sigma: 1.0,
                cutoff: 4.0,
            },
        )
        .unwrap();
        let out = sys.relax_system(1e-7, 20_000).unwrap();
        assert!(out.delta.total < 0.0, "delta {}", out.delta.total);
        assert!(out.residual < 1e-6, "residual {}", out.residual);
        assert!(out.length_change.abs() < 0.05);
        let check = out.system.total_energy().unwrap();
        assert!((check.total - (sys.total_energy().unwrap().total + out.delta.total)).abs() < 1e-9);
    }

    #[test]
    fn snapshot_round_trips() {
        let sys = perturbed_canonical();
        let dir = std::env::temp_dir().join("fkchain-atomistic-snapshot-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("state.txt");
        sys.save_snapshot(&path).unwrap();
        let back = load_snapshot(&path).unwrap();
        assert_eq!(back.chain1().len(), 232);
        for (a, b) in sys.chain1().iter().zip(back.chain1()) {
            assert_eq!(a, b);
        }
        for (a, b) in sys.chain2().iter().zip(back.chain2()) {
            assert_eq!(a, b);
        }
        assert_eq!(sys.cell(), back.cell());
        let (e0, e1) = (sys.total_energy().unwrap(), back.total_energy().unwrap());
        assert!((e0.total - e1.total).abs() < 1e-12);
        std::fs::remove_dir_all(&dir).ok();
    }
}
