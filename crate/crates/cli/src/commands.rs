use std::fs;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use serde::Serialize;
use serde_json::json;

use topolattice::analysis::{
    correlation_map, facet_powers, metrics_report, mismatch_predictions, mode_populations, parity_coupling,
    site_labels, MetricsReport, MismatchPrediction, ModePopulationMatrix,
};
use topolattice::dynamics::{propagate_pump, BiphotonState, PumpField, Trajectory};
use topolattice::ensemble::{pair_ensembles, run_disorder_ensemble, EnsembleStats, LatticeSource};
use topolattice::io::{self, ResolvedLattice, RunConfig, SCHEMA_VERSION};
use topolattice::lattice::{build_hamiltonian, UnitCellSpec};
use topolattice::spectral::{
    band_structure, closed_form_report, eigensystem, numeric_gaps, tagged_eigensystem, validate_interface,
    EigenSystem,
};
use topolattice::topology::{invariants, phase_diagram, winding_integral};

use crate::output::{sha256_hex, write_manifest, InputEntry, Manifest, Outputs};
use crate::svg;
use crate::{Command, Common, Format};

struct Ctx<'a> {
    cfg: &'a RunConfig,
    common: &'a Common,
    out: Outputs,
    warnings: Vec<String>,
    integrator: Vec<serde_json::Value>,
}

impl Ctx<'_> {
    fn warn(&mut self, msg: String) {
        if !self.common.quiet {
            eprintln!("warning: {msg}");
        }
        self.warnings.push(msg);
    }

    fn say(&self, msg: impl AsRef<str>) {
        if !self.common.quiet {
            println!("{}", msg.as_ref());
        }
    }
}

pub fn run(command: Command, common: &Common) -> Result<()> {
    let started = Instant::now();
    let path = common.config.as_ref().context("--config is required")?;
    let text = fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
    let mut cfg = io::parse_config(&text).with_context(|| format!("invalid configuration {}", path.display()))?;
    // fold the override into the echoed config so the manifest alone reproduces the run
    if let (Some(seed), Some(e)) = (common.seed, cfg.ensemble.as_mut()) {
        e.seed = seed;
    }
    let mut ctx = Ctx { cfg: &cfg, common, out: Outputs::new(&common.out, common.format)?, warnings: Vec::new(), integrator: Vec::new() };

    let lattice = cfg.lattice.resolve()?;
    match command {
        Command::Bands => bands(&mut ctx, &lattice, true)?,
        Command::Topology => topology(&mut ctx, &lattice, true)?,
        Command::Propagate => {
            propagate(&mut ctx, &lattice)?;
        }
        Command::Analyze => {
            let t = propagate(&mut ctx, &lattice)?;
            analyze(&mut ctx, &lattice, &t)?;
        }
        Command::Ensemble => ensemble(&mut ctx)?,
        Command::Report => {
            bands(&mut ctx, &lattice, false)?;
            topology(&mut ctx, &lattice, false)?;
            let t = propagate(&mut ctx, &lattice)?;
            analyze(&mut ctx, &lattice, &t)?;
            if cfg.ensemble.is_some() {
                ensemble(&mut ctx)?;
            }
        }
    }

    let manifest = Manifest {
        tool: "topolattice",
        version: env!("CARGO_PKG_VERSION"),
        schema_version: SCHEMA_VERSION,
        command: command.name(),
        seed: common.seed,
        config: &cfg,
        inputs: vec![InputEntry { path: path.display().to_string(), sha256: sha256_hex(text.as_bytes()) }],
        outputs: &ctx.out.files,
        warnings: &ctx.warnings,
        integrator: std::mem::take(&mut ctx.integrator),
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_manifest(ctx.out.dir(), &manifest)?;
    ctx.say(format!("wrote {} files and manifest.json to {}", ctx.out.files.len(), ctx.out.dir().display()));
    Ok(())
}

fn need_cell<'a>(lattice: &'a ResolvedLattice, what: &str) -> Result<&'a UnitCellSpec> {
    lattice.cell.as_ref().with_context(|| format!("{what} needs a unit cell; the lattice is an explicit chain"))
}

fn finite_spectrum(ctx: &mut Ctx, lattice: &ResolvedLattice) -> Result<(EigenSystem, Vec<usize>)> {
    let h = build_hamiltonian(&lattice.source.sequence())?;
    let eig = match (&lattice.source, &lattice.cell) {
        (LatticeSource::Interface(spec), Some(_)) => {
            let (eig, v) = validate_interface(spec)?;
            if let Some(w) = v.warning() {
                ctx.warn(w);
            }
            eig
        }
        (_, Some(cell)) => tagged_eigensystem(&h, cell),
        _ => eigensystem(&h),
    };
    let modes = match lattice.cell {
        Some(_) => eig.interface_modes(),
        None => localized_modes(&eig),
    };
    Ok((eig, modes))
}

/// Without a unit cell there are no bands to define gaps against, so fall
/// back to modes that are strongly localized (IPR above `10/N`) and centred.
fn localized_modes(eig: &EigenSystem) -> Vec<usize> {
    let n = eig.n();
    (0..n)
        .filter(|&m| eig.tags[m].ipr > 10.0 / n as f64 && eig.central_weight(m, (n - 1) / 4) > 0.5)
        .collect()
}

fn spectrum_csv(eig: &EigenSystem) -> String {
    let n = eig.n();
    let mut s = String::from("index,site_label,beta,kind,parity,ipr\n");
    for m in 0..n {
        let t = eig.tags[m];
        s.push_str(&format!(
            "{m},{},{},{},{},{}\n",
            topolattice::lattice::centered_index(m, n),
            eig.values[m],
            format!("{:?}", t.kind).to_lowercase(),
            format!("{:?}", t.parity).to_lowercase(),
            t.ipr
        ));
    }
    s
}

fn bands(ctx: &mut Ctx, lattice: &ResolvedLattice, strict: bool) -> Result<()> {
    let Some(cell) = lattice.cell.as_ref() else {
        if strict {
            need_cell(lattice, "bands")?;
        }
        let (eig, _) = finite_spectrum(ctx, lattice)?;
        ctx.out.write("spectrum.csv", Format::Csv, &spectrum_csv(&eig))?;
        return Ok(());
    };
    let b = band_structure(cell, ctx.cfg.bands.n_k)?;
    ctx.out.write("bands.csv", Format::Csv, &io::band_csv(&b)?)?;
    let x: Vec<f64> = b.k.iter().map(|k| k * cell.lattice_constant()).collect();
    ctx.out.write("bands.svg", Format::Svg, &svg::line_plot("Bloch bands", &x, &b.bands, "k a", "beta (1/m)"))?;

    let closed = match closed_form_report(cell) {
        Ok(r) => Some(r),
        Err(topolattice::Error::Unsupported(msg)) => {
            ctx.warn(msg);
            None
        }
        Err(e) => return Err(e.into()),
    };
    let (eig, modes) = finite_spectrum(ctx, lattice)?;
    ctx.out.write("spectrum.csv", Format::Csv, &spectrum_csv(&eig))?;
    let report = json!({
        "J": cell.j(),
        "intracell": cell.intracell(),
        "intercell": cell.intercell(),
        "closed_form": closed,
        "numeric_gaps": numeric_gaps(cell),
        "interface_modes": modes.iter().map(|&m| json!({"index": m, "beta": eig.values[m], "parity": eig.tags[m].parity, "ipr": eig.tags[m].ipr})).collect::<Vec<_>>(),
        "expected_interface_modes": cell.j() - 1,
        "chain_couplings": lattice.source.sequence().values,
    });
    ctx.out.write_json("gaps.json", &report)?;
    ctx.say(format!("J = {}: {} interface modes (expected {})", cell.j(), modes.len(), cell.j() - 1));
    Ok(())
}

fn topology(ctx: &mut Ctx, lattice: &ResolvedLattice, strict: bool) -> Result<()> {
    let Some(cell) = lattice.cell.as_ref() else {
        if strict {
            need_cell(lattice, "topology")?;
        }
        return Ok(());
    };
    let n_k = ctx.cfg.topology.n_k;
    let inv = invariants(cell, n_k)?;
    let integral = if inv.at_transition { None } else { Some(winding_integral(cell, n_k)?) };
    ctx.out.write_json("invariants.json", &json!({ "invariants": inv, "winding_integral": integral }))?;
    ctx.say(format!("nu = {}, Zak = {:?}", inv.nu_total, inv.zak));

    if let Some(pd) = &ctx.cfg.topology.phase_diagram {
        let points = phase_diagram(cell, pd.t_range, pd.tau_range, pd.resolution, n_k)?;
        ctx.out.write("phase_diagram.csv", Format::Csv, &io::phase_diagram_csv(&points, cell.j())?)?;
        if ctx.out.wants(Format::Svg) {
            let r = pd.resolution;
            // rows: tau descending, columns: t ascending
            let grid: Vec<Vec<f64>> = (0..r)
                .rev()
                .map(|iu| (0..r).map(|it| points[it * r + iu].nu_total as f64).collect())
                .collect();
            let rows: Vec<String> = (0..r).rev().map(|iu| format!("{:.3e}", points[iu].tau)).collect();
            let cols: Vec<String> = (0..r).map(|it| format!("{:.3e}", points[it * r].t)).collect();
            ctx.out.write("phase_diagram.svg", Format::Svg, &svg::heatmap("nu (rows tau, columns t)", &grid, &rows, &cols))?;
        }
    }
    Ok(())
}

fn propagate(ctx: &mut Ctx, lattice: &ResolvedLattice) -> Result<Trajectory> {
    let design = ctx.cfg.design()?;
    let t = design.run(None)?;
    let h = build_hamiltonian(&lattice.source.sequence())?;
    let pump: Vec<PumpField> = if ctx.cfg.pump.propagate {
        let drive = ctx.cfg.pump.drive(&h)?;
        propagate_pump(&h, &drive.input, &ctx.cfg.propagation)?
    } else {
        let input = ctx.cfg.pump.drive(&h)?.input;
        ctx.cfg.propagation.sample_points().into_iter().map(|z| PumpField { z, ..input.clone() }).collect()
    };
    ctx.out.write("pump.csv", Format::Csv, &io::pump_csv(&pump)?)?;
    ctx.out.write("trajectory.csv", Format::Csv, &io::trajectory_csv(&t)?)?;
    let last = t.last();
    ctx.out.write_json(
        "propagation.json",
        &json!({ "z": t.z(), "sites": last.n(), "norm": t.states.iter().map(BiphotonState::norm).collect::<Vec<_>>(), "stats": t.stats }),
    )?;
    if ctx.out.wants(Format::Svg) {
        let n = last.n();
        let full: Vec<Vec<f64>> = (0..n).map(|a| (0..n).map(|b| last.psi[(a, b)].norm_sqr()).collect()).collect();
        let labels: Vec<String> = site_labels(n).iter().map(i64::to_string).collect();
        ctx.out.write("output_intensity.svg", Format::Svg, &svg::heatmap("|psi|^2 at the output", &full, &labels, &labels))?;
        let z: Vec<f64> = pump.iter().map(|f| f.z * 1e3).collect();
        let centre: Vec<f64> = pump.iter().map(|f| f.amplitudes[n / 2].norm_sqr()).collect();
        ctx.out.write("pump_centre.svg", Format::Svg, &svg::line_plot("pump power in the centre guide", &z, &[centre], "z (mm)", "power (W)"))?;
    }
    ctx.integrator.push(serde_json::to_value(&t.stats)?);
    ctx.say(format!(
        "propagated {} sites to z = {:.4e} m ({} steps, |psi| = {:.4e})",
        last.n(),
        last.z,
        t.stats.accepted_steps,
        last.norm()
    ));
    Ok(t)
}

#[derive(Serialize)]
struct ParityEntry {
    a: String,
    b: String,
    re: f64,
    im: f64,
    abs: f64,
}

#[derive(Serialize)]
struct AnalysisReport {
    window: i64,
    correlation_peak: (i64, i64),
    mode_source: &'static str,
    metrics: MetricsReport,
    localized_populations: Option<ModePopulationMatrix>,
    mismatch: Vec<MismatchPrediction>,
    parity_couplings: Vec<ParityEntry>,
    signal_facet: Vec<f64>,
    idler_facet: Vec<f64>,
}

fn analyze(ctx: &mut Ctx, lattice: &ResolvedLattice, t: &Trajectory) -> Result<()> {
    let state = t.last();
    let w = ctx.cfg.analysis.window;
    if w < 0 {
        bail!("analysis.window must be >= 0");
    }
    let map = correlation_map(state, -w, w, true)?;
    ctx.out.write("correlation.csv", Format::Csv, &io::correlation_csv(&map)?)?;

    let (eig, modes) = finite_spectrum(ctx, lattice)?;
    let metrics = metrics_report(state, &eig, &eig, None)?;
    // explicit chains carry no interface tags; report the localized modes instead
    let (localized_populations, mode_source) = if lattice.cell.is_some() {
        (None, "interface")
    } else {
        (Some(mode_populations(state, &eig, &eig, Some(&modes), true)?), "localized")
    };
    let pairs: Vec<(usize, usize)> = modes.iter().flat_map(|&a| modes.iter().map(move |&b| (a, b))).collect();
    let mismatch = mismatch_predictions(&eig, &eig, &pairs, ctx.cfg.propagation.pair_phase)?;

    let h = build_hamiltonian(&lattice.source.sequence())?;
    let pump_in = ctx.cfg.pump.drive(&h)?.input;
    let labels = topolattice::analysis::mode_labels(modes.len());
    let mut parity_couplings = Vec::new();
    for (i, &a) in modes.iter().enumerate() {
        for (j, &b) in modes.iter().enumerate().skip(i) {
            match parity_coupling(&eig, a, b, pump_in.amplitudes.as_slice()) {
                Ok(eta) => parity_couplings.push(ParityEntry {
                    a: labels[i].clone(),
                    b: labels[j].clone(),
                    re: eta.re,
                    im: eta.im,
                    abs: eta.norm(),
                }),
                Err(e) => ctx.warn(e.to_string()),
            }
        }
    }
    let (signal_facet, idler_facet) = facet_powers(&state.psi);

    if ctx.out.wants(Format::Svg) {
        let grid: Vec<Vec<f64>> =
            (0..map.labels.len()).map(|a| (0..map.labels.len()).map(|b| map.intensities[(a, b)]).collect()).collect();
        let l: Vec<String> = map.labels.iter().map(i64::to_string).collect();
        ctx.out.write("correlation.svg", Format::Svg, &svg::heatmap("two-photon correlation", &grid, &l, &l))?;
        let pops = localized_populations.as_ref().unwrap_or(&metrics.mode_populations);
        let k = pops.labels.len();
        if k > 0 {
            let grid: Vec<Vec<f64>> = (0..k).map(|a| (0..k).map(|b| pops.populations[(a, b)]).collect()).collect();
            ctx.out.write("populations.svg", Format::Svg, &svg::heatmap("mode populations", &grid, &pops.labels, &pops.labels))?;
        }
    }

    ctx.say(format!("K = {:.4}, {} {} modes, peak at {:?}", metrics.schmidt_k, modes.len(), mode_source, map.peak()));
    let report = AnalysisReport {
        window: w,
        correlation_peak: map.peak(),
        mode_source,
        metrics,
        localized_populations,
        mismatch,
        parity_couplings,
        signal_facet,
        idler_facet,
    };
    ctx.out.write_json("analysis.json", &report)?;
    Ok(())
}

fn level_plot(title: &str, s: &EnsembleStats, pick: impl Fn(&topolattice::ensemble::LevelStats) -> f64) -> String {
    let x: Vec<f64> = s.levels.iter().map(|l| l.level).collect();
    let y: Vec<f64> = s.levels.iter().map(pick).collect();
    svg::line_plot(title, &x, &[y], "disorder D", title)
}

fn ensemble(ctx: &mut Ctx) -> Result<()> {
    let (main, other) = ctx.cfg.ensembles(None)?;
    let stats = run_disorder_ensemble(&main)?;
    ctx.out.write("ensemble.csv", Format::Csv, &io::ensemble_csv(&stats)?)?;
    for l in &stats.levels {
        if l.failures > 0 {
            ctx.warn(format!("{} realizations failed at D = {}", l.failures, l.level));
        }
        ctx.say(format!("D = {:.3}: K = {:.4} +- {:.4}, F = {:.4} +- {:.4}", l.level, l.k.mean, l.k.std, l.f.mean, l.f.std));
    }
    ctx.out.write_json(
        "ensemble_summary.json",
        &json!({ "seed": main.seed, "realizations": main.realizations, "reference_k": stats.reference_k, "levels": stats.levels }),
    )?;
    if ctx.out.wants(Format::Svg) {
        ctx.out.write("ensemble_fidelity.svg", Format::Svg, &level_plot("mean fidelity", &stats, |l| l.f.mean))?;
        ctx.out.write("ensemble_schmidt.svg", Format::Svg, &level_plot("mean Schmidt number", &stats, |l| l.k.mean))?;
    }
    if let Some(b) = other {
        let cmp = pair_ensembles(&stats, &run_disorder_ensemble(&b)?)?;
        ctx.out.write_json("comparison.json", &cmp)?;
        for l in &cmp.levels {
            ctx.say(format!("D = {:.3}: paired dF = {:.4} +- {:.4} over {} pairs", l.level, l.delta_f.mean, l.delta_f.std, l.pairs));
        }
    }
    Ok(())
}
