//! Subcommand implementations.
//!
//! Every command reads one validated config, writes its declared outputs
//! into the run directory, and finishes with a manifest recording the
//! config hash, the full parameter set, crate versions, and wall time.
//! Output files other than the manifest are deterministic: rerunning
//! with identical inputs reproduces them byte for byte.

use crate::config::Config;
use anyhow::{bail, Context as _};
use fkchain::fkmodel::{check_conditions, SiteModel, SupercellState};
use fkchain::geometry::{
    disregistry, dominant_wavelength, reconstruct_curves, write_curve_csv, write_disregistry_csv,
};
use fkchain::hull::{build_hull, convergence_study, write_hull_csv, write_study_csv};
use fkchain::potential::{tabulate, TabulatedPotential};
use fkchain::relax::{approximants, minimize, RelaxOutcome};
use fkchain::twistmap::{orbit, write_orbit_csv, OrbitPoint};
use serde_json::json;
use sha2::{Digest, Sha256};
use std::path::{Path, PathBuf};
use std::time::Instant;

pub struct RunContext {
    pub config: Config,
    pub config_path: PathBuf,
    pub config_sha256: String,
    pub out_dir: PathBuf,
    pub started: Instant,
    /// Per-run parameters passed on the command line.
    pub p: Option<i64>,
    pub q: Option<i64>,
    pub qmax: Option<i64>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(bytes);
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

impl RunContext {
    fn write_json(&self, name: &str, value: &serde_json::Value) -> anyhow::Result<()> {
        let path = self.out_dir.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        std::fs::write(&path, text)
            .with_context(|| format!("cannot write {}", path.display()))?;
        Ok(())
    }

    fn write_manifest(&self, command: &str) -> anyhow::Result<()> {
        let manifest = json!({
            "command": command,
            "config": self.config_path.display().to_string(),
            "config_sha256": self.config_sha256,
            "parameters": serde_json::to_value(&self.config)?,
            "versions": {
                "fkchain": fkchain::VERSION,
                "fkchain-cli": env!("CARGO_PKG_VERSION"),
            },
            "wall_time_s": self.started.elapsed().as_secs_f64(),
        });
        self.write_json("manifest.json", &manifest)
    }

    fn require_pq(&self) -> anyhow::Result<(i64, usize)> {
        let p = self.p.context("this command needs --p INT")?;
        let q = self.q.context("this command needs --q INT")?;
        if q < 1 {
            bail!("--q must be >= 1, got {q}");
        }
        Ok((p, q as usize))
    }

    fn build_table(&self) -> anyhow::Result<(fkchain::potential::ModelParams, TabulatedPotential)> {
        let params = self.config.model_params()?;
        let t = &self.config.table;
        let table = tabulate(&params, t.n_s, t.n_kappa, self.config.kappa_max(&params))
            .map_err(|e| anyhow::anyhow!("table: {e}"))?;
        Ok((params, table))
    }

    fn relax_uniform(
        &self,
        model: &SiteModel,
        p: i64,
        q: usize,
    ) -> anyhow::Result<RelaxOutcome> {
        let initial = SupercellState::uniform(p, q)?;
        Ok(minimize(&initial, model, &self.config.relax_options())?)
    }
}

pub fn cmd_table(ctx: &RunContext) -> anyhow::Result<()> {
    let (_, table) = ctx.build_table()?;
    table.save(&ctx.out_dir.join("potential_table.txt"))?;
    ctx.write_manifest("table")
}

pub fn cmd_relax(ctx: &RunContext) -> anyhow::Result<()> {
    let (p, q) = ctx.require_pq()?;
    let (params, table) = ctx.build_table()?;
    let model = SiteModel::new(&table, &params)?;
    let out = ctx.relax_uniform(&model, p, q)?;
    out.state.save(&params, &ctx.out_dir.join("state.txt"))?;
    ctx.write_json(
        "summary.json",
        &json!({
            "p": p,
            "q": q,
            "converged": out.converged,
            "iterations": out.iterations,
            "evaluations": out.evaluations,
            "initial_energy": out.initial_energy,
            "final_energy": out.final_energy,
            "residual": out.residual,
        }),
    )?;
    ctx.write_manifest("relax")
}

pub fn cmd_hull(ctx: &RunContext) -> anyhow::Result<()> {
    let (p, q) = ctx.require_pq()?;
    let (params, table) = ctx.build_table()?;
    let model = SiteModel::new(&table, &params)?;
    let out = ctx.relax_uniform(&model, p, q)?;
    let f = build_hull(&out.state);
    write_hull_csv(&f, &ctx.out_dir.join("hull.csv"))?;
    ctx.write_json(
        "summary.json",
        &json!({
            "p": p,
            "q": q,
            "converged": out.converged,
            "residual": out.residual,
            "monotone": f.is_monotone(),
            "max_slope": f.max_slope(),
            "rotation": f.rotation(),
        }),
    )?;
    ctx.write_manifest("hull")
}

pub fn cmd_converge(ctx: &RunContext) -> anyhow::Result<()> {
    let q_max = ctx.qmax.context("converge needs --qmax INT")?;
    if q_max < 1 {
        bail!("--qmax must be >= 1, got {q_max}");
    }
    let (params, table) = ctx.build_table()?;
    let model = SiteModel::new(&table, &params)?;

    // Reference: the lowest-strain approximant below the configured bound.
    let reference_q = ctx.config.solver.reference_q;
    let refs = approximants(params.alpha(), reference_q)?;
    let best = refs
        .last()
        .with_context(|| format!("no approximants with q <= {reference_q}"))?;
    let ref_out = ctx.relax_uniform(&model, best.p, best.q as usize)?;
    if !ref_out.converged {
        eprintln!(
            "warning: reference approximant {}/{} stopped above tolerance (residual {:e}); comparing against its best state",
            ref_out.state.p(),
            ref_out.state.q(),
            ref_out.residual
        );
    }
    let reference = build_hull(&ref_out.state);

    let rows = convergence_study(&model, q_max, &reference, &ctx.config.relax_options())?;
    write_study_csv(&rows, &ctx.out_dir.join("study.csv"))?;
    ctx.write_json(
        "summary.json",
        &json!({
            "rows": rows.len(),
            "all_converged": rows.iter().all(|r| r.converged),
            "reference_p": best.p,
            "reference_q": best.q,
            "reference_converged": ref_out.converged,
            "reference_residual": ref_out.residual,
        }),
    )?;
    ctx.write_manifest("converge")
}

pub fn cmd_reconstruct(ctx: &RunContext) -> anyhow::Result<()> {
    let (p, q) = ctx.require_pq()?;
    let (params, table) = ctx.build_table()?;
    let model = SiteModel::new(&table, &params)?;
    let out = ctx.relax_uniform(&model, p, q)?;
    let recon = reconstruct_curves(&out.state, &params)?;
    write_curve_csv(&recon, &ctx.out_dir.join("curve.csv"))?;
    let heights: Vec<f64> = recon.chain_top.iter().map(|a| a.position[1]).collect();
    let (wavelength, amplitude) = dominant_wavelength(&heights, p as f64 / q as f64)?;
    ctx.write_json(
        "summary.json",
        &json!({
            "p": p,
            "q": q,
            "converged": out.converged,
            "residual": out.residual,
            "ripple_wavelength": wavelength,
            "ripple_amplitude": amplitude,
            "net_turning": recon.turning,
        }),
    )?;
    ctx.write_manifest("reconstruct")
}

pub fn cmd_orbit(ctx: &RunContext) -> anyhow::Result<()> {
    let (p, q) = ctx.require_pq()?;
    let (params, table) = ctx.build_table()?;
    let model = SiteModel::new(&table, &params)?;
    let out = ctx.relax_uniform(&model, p, q)?;
    let steps = if ctx.config.solver.orbit_steps == 0 {
        4 * q
    } else {
        ctx.config.solver.orbit_steps
    };
    let pt0 = OrbitPoint::from_state(&out.state, &model, 0)?;
    let points = orbit(&model, &pt0, steps)?;
    write_orbit_csv(&points, &ctx.out_dir.join("orbit.csv"))?;
    let mut summary = json!({
        "p": p,
        "q": q,
        "steps": steps,
        "converged": out.converged,
    });
    if steps >= q {
        let ret = &points[q];
        let dtheta = {
            let d = (ret.theta() - pt0.theta()).abs();
            d.min(1.0 - d)
        };
        summary["return_theta_gap"] = json!(dtheta);
        summary["return_p_gap"] = json!((ret.p() - pt0.p()).abs());
        summary["lift_advance_minus_p"] =
            json!((ret.s_lift() - pt0.s_lift() - p as f64).abs());
    }
    ctx.write_json("summary.json", &summary)?;
    ctx.write_manifest("orbit")
}

pub fn cmd_atomistic(ctx: &RunContext) -> anyhow::Result<()> {
    let sys = ctx.config.atomistic_system()?;
    let a = &ctx.config.atomistic;
    let out = sys.relax_system(a.tol, a.max_iter)?;
    out.system.save_snapshot(&ctx.out_dir.join("snapshot.txt"))?;
    ctx.write_json(
        "summary.json",
        &json!({
            "converged": out.converged,
            "iterations": out.iterations,
            "evaluations": out.evaluations,
            "residual": out.residual,
            "delta_bond": out.delta.bond,
            "delta_angle": out.delta.angle,
            "delta_lj": out.delta.lj,
            "delta_total": out.delta.total,
            "length_change": out.length_change,
        }),
    )?;
    ctx.write_manifest("atomistic")
}

/// Lower polyline for projections, extended by one wrapped atom on each
/// side so every upper atom lands on an interior segment.
fn periodic_polyline(chain: &[[f64; 2]], cell: f64) -> Vec<[f64; 2]> {
    let mut out = Vec::with_capacity(chain.len() + 2);
    let last = chain[chain.len() - 1];
    out.push([last[0] - cell, last[1]]);
    out.extend_from_slice(chain);
    let first = chain[0];
    out.push([first[0] + cell, first[1]]);
    out
}

pub fn cmd_disregistry(ctx: &RunContext) -> anyhow::Result<()> {
    let sys = ctx.config.atomistic_system()?;
    let a = &ctx.config.atomistic;
    let out = sys.relax_system(a.tol, a.max_iter)?;
    let relaxed = &out.system;
    let bottom = periodic_polyline(relaxed.chain1(), relaxed.cell());
    let spacing = relaxed.chain1_constants().bond_length;
    let rows = disregistry(&bottom, relaxed.chain2(), spacing)?;
    write_disregistry_csv(&rows, &ctx.out_dir.join("disregistry.csv"))?;

    // Histogram of the offsets, bin width 0.02 in LJ length units.
    let bin = 0.02 * a.lj_sigma;
    let nbins = (spacing / bin).ceil() as usize;
    let mut counts = vec![0usize; nbins.max(1)];
    for r in &rows {
        let i = ((r.delta / bin) as usize).min(counts.len() - 1);
        counts[i] += 1;
    }
    let (mode_bin, _) = counts
        .iter()
        .enumerate()
        .max_by_key(|&(i, c)| (*c, std::cmp::Reverse(i)))
        .unwrap();
    let mode = (mode_bin as f64 + 0.5) * bin;
    ctx.write_json(
        "summary.json",
        &json!({
            "atoms": rows.len(),
            "spacing": spacing,
            "bin_width": bin,
            "mode_delta": mode,
            "converged": out.converged,
        }),
    )?;
    ctx.write_manifest("disregistry")
}

pub fn cmd_check(ctx: &RunContext) -> anyhow::Result<()> {
    let (params, table) = ctx.build_table()?;
    let model = SiteModel::new(&table, &params)?;
    let report = check_conditions(&model, 96, 33)?;
    let a = params.alpha();
    let flat_margin = params.beta / (a * a * params.h * params.h);
    ctx.write_json(
        "conditions.json",
        &json!({
            "lower_bound": report.lower_bound,
            "symmetry_defect": report.symmetry_defect,
            "twist_margin": report.twist_margin,
            "flat_substrate_margin": flat_margin,
        }),
    )?;
    let dumped = ctx.config.dump()?;
    std::fs::write(ctx.out_dir.join("config.toml"), dumped)?;
    ctx.write_manifest("check")
}

pub fn prepare(
    config_path: &Path,
    out_override: Option<PathBuf>,
    beta: Option<f64>,
    p: Option<i64>,
    q: Option<i64>,
    qmax: Option<i64>,
) -> anyhow::Result<RunContext> {
    let started = Instant::now();
    let bytes = std::fs::read(config_path)
        .with_context(|| format!("cannot read config {}", config_path.display()))?;
    let mut config = Config::load(config_path)?;
    if let Some(b) = beta {
        config.model.beta = b;
        config.validate()?;
        config.model_params()?;
    }
    let out_dir = out_override
        .or_else(|| config.io.out_dir.as_deref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("fkchain-out"));
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("cannot create output directory {}", out_dir.display()))?;
    Ok(RunContext {
        config,
        config_path: config_path.to_path_buf(),
        config_sha256: sha256_hex(&bytes),
        out_dir,
        started,
        p,
        q,
        qmax,
    })
}
