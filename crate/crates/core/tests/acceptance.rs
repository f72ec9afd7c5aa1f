//! One PASS/FAIL line per acceptance criterion; exits non-zero on any FAIL.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::{LN_2, PI};
use std::time::{Duration, Instant};

use common::fd::{derivative_errors, full_generators, probe_state, taylor_slope};
use common::*;
use rand::Rng;
use wahtor_core::analysis::*;
use wahtor_core::integrals::{MoleculeMetadata, SpatialIntegrals};
use wahtor_core::pauli::{pauli_expectation, qubit_hamiltonian};
use wahtor_core::rotation::{build_generators, rotate_integrals, rotate_with_matrix};
use wahtor_core::simulator::{apply_ansatz, fermionic_rdms, hf_reference, AnsatzCircuit};
use wahtor_core::vqe::random_theta;
use wahtor_core::wahtor::{fixed_state_energy, wahtor_run, FixedState, WahtorOptions, WahtorOutcome};

const FCI_TOL: f64 = 1e-3;
const DERIVATIVE_TOL: f64 = 1e-6;
const TAYLOR_SLOPE: f64 = 2.7;
const INVARIANCE_TOL: f64 = 1e-9;
const CACHE_TOL: f64 = 1e-10;
const H2_EPSILON: f64 = 0.6;
const H2_RUNTIME: Duration = Duration::from_secs(300);
const LIH_DELTA: f64 = 0.95;
const BEH2_EPSILON_CHANGE: f64 = 0.02;
const MI_THRESHOLD: f64 = 1e-3;
const MI_AGREEMENT: f64 = 2e-2;
const SANDWICH_SLACK: f64 = 1e-9;
const HISTORY_SLACK: f64 = 1e-8;

struct Report {
    failures: usize,
}

impl Report {
    fn line(&mut self, ok: bool, name: &str, detail: String) {
        if !ok {
            self.failures += 1;
        }
        println!("{} {name}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
}

struct Fixture {
    ints: SpatialIntegrals,
    meta: MoleculeMetadata,
    fci: FciSolution,
    fci_time: Duration,
}

struct Run {
    outcome: WahtorOutcome,
    seconds: f64,
}

impl Run {
    fn eps(&self, f: &Fixture) -> (f64, f64) {
        let e_hf = f.meta.hf_electronic_energy;
        let r = &self.outcome.report;
        (
            correlation_fraction(r.initial_vqe_energy, e_hf, f.fci.energy).unwrap(),
            correlation_fraction(r.final_energy, e_hf, f.fci.energy).unwrap(),
        )
    }

    fn delta(&self, f: &Fixture) -> DeltaMetric {
        let d = spin_summed_density(&f.fci.ground_vector);
        let no = symmetry_adapted_natural_orbitals(&d, &f.meta.symmetry_groups).unwrap();
        delta_metric(&self.outcome.state.accumulated_rotation, &no.coefficients, &f.meta.symmetry_groups).unwrap()
    }
}

fn run_wahtor(f: &Fixture, n_starts: usize, seed: u64) -> Run {
    let t = Instant::now();
    let circ = AnsatzCircuit::ladder(f.ints.n_spin_orbitals(), f.meta.ansatz_depth);
    let opts = WahtorOptions {
        n_starts,
        seed,
        ..Default::default()
    };
    let outcome = wahtor_run(&f.ints, &f.meta.symmetry_groups, &circ, &opts).unwrap();
    Run {
        outcome,
        seconds: t.elapsed().as_secs_f64(),
    }
}

fn fci_reference(report: &mut Report) -> BTreeMap<&'static str, Fixture> {
    let mut fixtures = BTreeMap::new();
    let mut worst: f64 = 0.0;
    let mut ok = true;
    let mut detail = Vec::new();
    for mol in MOLECULES {
        let (ints, meta) = load(mol);
        let t = Instant::now();
        let fci = fci_from_integrals(&ints).unwrap();
        let fci_time = t.elapsed();
        let err = (fci.energy - meta.reference.fci).abs();
        let limit = if mol == "nh3" { Duration::from_secs(600) } else { Duration::from_secs(60) };
        ok &= err < FCI_TOL && fci_time < limit;
        worst = worst.max(err);
        detail.push(format!("{mol} {:.6} ({:.2}s)", fci.energy, fci_time.as_secs_f64()));
        fixtures.insert(
            mol,
            Fixture {
                ints,
                meta,
                fci,
                fci_time,
            },
        );
    }
    report.line(
        ok,
        "fci_reference_energies",
        format!("max |E - E_table| = {worst:.2e} < {FCI_TOL:.0e}; {}", detail.join(", ")),
    );
    fixtures
}

fn derivative_suite(report: &mut Report) {
    let mut worst: f64 = 0.0;
    let mut asym: f64 = 0.0;
    let mut min_slope = f64::INFINITY;
    for k in 0..10u64 {
        let m = 2 + (k as usize % 5);
        let ints = random_integrals(m, 2, 1000 + k);
        let g = full_generators(m);
        let state = FixedState::new(&fermionic_rdms(&probe_state(m, 2000 + k)));
        let errs = derivative_errors(&ints, &g, &state);
        worst = worst.max(errs.worst());
        asym = asym.max(errs.hess_asymmetry);
        for l in 0..g.len() {
            min_slope = min_slope.min(taylor_slope(&ints, &g, l));
        }
    }
    report.line(
        worst < DERIVATIVE_TOL && min_slope >= TAYLOR_SLOPE,
        "derivative_oracle",
        format!(
            "10 random sets (m = 2..6): max relative error {worst:.2e} < {DERIVATIVE_TOL:.0e}, \
             min Taylor slope {min_slope:.3} >= {TAYLOR_SLOPE}, Hessian asymmetry {asym:.1e}"
        ),
    );
}

fn unitary_invariance(report: &mut Report, fixtures: &BTreeMap<&str, Fixture>) {
    let mut worst: f64 = 0.0;
    let mut detail = Vec::new();
    for (mol, f) in fixtures {
        let m = f.ints.n_orbitals();
        let g = full_generators(m);
        let mut r = rng(77);
        let mut drift: f64 = 0.0;
        for _ in 0..20 {
            let v: Vec<f64> = (0..g.len()).map(|_| r.random_range(-PI..PI)).collect();
            let u = g.rotation_matrix(&v).unwrap();
            let e = fci_from_integrals(&rotate_with_matrix(&f.ints, &u).unwrap()).unwrap().energy;
            drift = drift.max((e - f.fci.energy).abs());
        }
        worst = worst.max(drift);
        detail.push(format!("{mol} {drift:.1e}"));
    }
    report.line(
        worst < INVARIANCE_TOL,
        "unitary_invariance",
        format!("max FCI drift over 20 rotations {worst:.2e} < {INVARIANCE_TOL:.0e}; {}", detail.join(", ")),
    );
}

fn rdm_cache(report: &mut Report, f: &Fixture) {
    let g = build_generators(&f.meta.symmetry_groups, f.ints.n_orbitals());
    let circ = AnsatzCircuit::ladder(8, f.meta.ansatz_depth);
    let psi = apply_ansatz(&circ, &random_theta(circ.n_params(), 31), &hf_reference(8, 2).unwrap()).unwrap();
    let rdms = fermionic_rdms(&psi);
    let mut r = rng(32);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let v: Vec<f64> = (0..g.len()).map(|_| r.random_range(-PI..PI)).collect();
        let rotated = rotate_integrals(&f.ints, &g, &v).unwrap();
        let cached = fixed_state_energy(&rdms, &rotated, false).unwrap();
        let measured = pauli_expectation(&qubit_hamiltonian(&rotated, false).unwrap(), &psi).unwrap();
        worst = worst.max((cached - measured).abs());
    }
    report.line(
        worst < CACHE_TOL,
        "rdm_cache_exactness",
        format!("H2, 20 random R: max |E_cached - E_rebuilt| = {worst:.2e} < {CACHE_TOL:.0e}"),
    );
}

fn wahtor_improvement(report: &mut Report, h2: &Fixture, h2_run: &Run, lih: &Fixture, lih_run: &Run) {
    let mut ok = true;
    let mut detail = Vec::new();
    for seed in 1..5 {
        let run = run_wahtor(h2, 20, seed);
        let (ev, ew) = run.eps(h2);
        ok &= ew >= ev && ew >= H2_EPSILON && run.seconds < H2_RUNTIME.as_secs_f64();
        detail.push(format!("seed {seed}: {ev:.4} -> {ew:.4}"));
    }
    let (ev, ew) = h2_run.eps(h2);
    let h2_ok = ew >= ev && ew >= H2_EPSILON && h2_run.seconds < H2_RUNTIME.as_secs_f64();
    let (lv, lw) = lih_run.eps(lih);
    let delta = lih_run.delta(lih);
    let lih_ok = lw >= lv && delta.value().is_some_and(|d| d >= LIH_DELTA);
    report.line(
        ok && h2_ok && lih_ok,
        "wahtor_improvement",
        format!(
            "H2 depth 2, 20 starts, seed 0: eps {ev:.4} -> {ew:.4} (>= {H2_EPSILON}) in {:.1}s; other seeds {}; \
             LiH eps {lv:.4} -> {lw:.4}, delta {:.4} (>= {LIH_DELTA})",
            h2_run.seconds,
            detail.join(", "),
            delta.value().unwrap_or(f64::NAN)
        ),
    );
}

fn beh2_null_case(report: &mut Report, f: &Fixture, run: &Run) {
    let (ev, ew) = run.eps(f);
    let delta = run.delta(f);
    let detail = match delta {
        DeltaMetric::HfEqualsNo { denominator } => format!("delta = HF~NO sentinel (denominator {denominator:.2e})"),
        DeltaMetric::Value { delta, .. } => format!("delta = {delta:.4}, sentinel expected"),
    };
    report.line(
        (ew - ev).abs() < BEH2_EPSILON_CHANGE && delta.is_sentinel(),
        "beh2_null_case",
        format!("eps {ev:.4} -> {ew:.4}, |change| {:.4} < {BEH2_EPSILON_CHANGE}; {detail}", (ew - ev).abs()),
    );
}

fn mutual_information_sparsity(report: &mut Report, f: &Fixture, run: &Run) {
    let groups = &f.meta.symmetry_groups;
    let w = &run.outcome.state.accumulated_rotation;
    let d = spin_summed_density(&f.fci.ground_vector);
    let no = symmetry_adapted_natural_orbitals(&d, groups).unwrap();
    let no_aligned = align_orbitals(w, &no.coefficients, groups).unwrap();
    let hf_mi = mutual_information(&f.fci.ground_vector).unwrap();
    let no_mi = mutual_information(&basis_change_state(&f.ints, &no_aligned).unwrap().ground_vector).unwrap();
    let w_mi = mutual_information(&basis_change_state(&f.ints, w).unwrap().ground_vector).unwrap();
    let (n_hf, n_no) = (hf_mi.count_above(MI_THRESHOLD), no_mi.count_above(MI_THRESHOLD));
    let diff = w_mi.max_abs_diff(&no_mi);
    report.line(
        n_no < n_hf && diff < MI_AGREEMENT && run.outcome.report.converged,
        "mutual_information_sparsity",
        format!(
            "H2O pairs with I > {MI_THRESHOLD:.0e}: NO basis {n_no} < HF basis {n_hf}; \
             max |I_WAHTOR - I_NO| = {diff:.2e} < {MI_AGREEMENT:.0e} (delta {:.4})",
            run.delta(f).value().unwrap_or(f64::NAN)
        ),
    );
}

fn invariant_suites(report: &mut Report, fixtures: &BTreeMap<&str, Fixture>, runs: &BTreeMap<&str, Run>) {
    let mut ok = true;
    let mut detail = Vec::new();
    for (mol, f) in fixtures {
        let run = &runs[mol];
        let r = &run.outcome.report;
        let (e_hf, e_v, e_w, e_fci) = (f.meta.hf_electronic_energy, r.initial_vqe_energy, r.final_energy, f.fci.energy);
        let sandwich =
            e_hf >= e_v - SANDWICH_SLACK && e_v >= e_w - SANDWICH_SLACK && e_w >= e_fci - SANDWICH_SLACK;
        let monotone = r.energy_history.windows(2).all(|w| w[1] <= w[0] + HISTORY_SLACK);

        let mut entropy_ok = true;
        for psi in [&run.outcome.final_state, &f.fci.ground_vector] {
            let mi = mutual_information(psi).unwrap();
            let s = &mi.single_entropies;
            for i in 0..mi.n_qubits {
                entropy_ok &= s[i] >= 0.0 && s[i] <= LN_2 + 1e-10;
                for j in i + 1..mi.n_qubits {
                    let s_ij = s[i] + s[j] - mi.get(i, j);
                    entropy_ok &= (-1e-10..=2.0 * LN_2 + 1e-10).contains(&s_ij) && mi.get(i, j) >= -1e-10;
                }
            }
        }
        let trace = fermionic_rdms(&f.fci.ground_vector).trace();
        let trace_ok = (trace - f.ints.n_electrons as f64).abs() < 1e-10;
        let symmetry = run.outcome.state.current_integrals.h2.eightfold_violation();
        let this = sandwich && monotone && entropy_ok && trace_ok && symmetry < 1e-12;
        ok &= this;
        detail.push(format!(
            "{mol}{} [HF {e_hf:.6} >= VQE {e_v:.6} >= WAHTOR {e_w:.6} >= FCI {e_fci:.6}]",
            if this { "" } else { " FAILED" }
        ));
    }
    report.line(
        ok,
        "invariant_suites",
        format!(
            "sandwich, monotone energy_history, entropy bounds, trace(gamma) = N, 8-fold h2 after rotation on all fixtures; {}",
            detail.join("; ")
        ),
    );
}

fn main() {
    let start = Instant::now();
    let mut report = Report { failures: 0 };
    let fixtures = fci_reference(&mut report);
    derivative_suite(&mut report);
    unitary_invariance(&mut report, &fixtures);
    rdm_cache(&mut report, &fixtures["h2"]);

    // One seeded run per fixture feeds the remaining criteria.
    let starts = |mol: &str| match mol {
        "nh3" => 3,
        _ => 20,
    };
    let runs: BTreeMap<&str, Run> = fixtures
        .iter()
        .map(|(mol, f)| (*mol, run_wahtor(f, starts(mol), 0)))
        .collect();

    wahtor_improvement(&mut report, &fixtures["h2"], &runs["h2"], &fixtures["lih"], &runs["lih"]);
    beh2_null_case(&mut report, &fixtures["beh2"], &runs["beh2"]);
    mutual_information_sparsity(&mut report, &fixtures["h2o"], &runs["h2o"]);
    invariant_suites(&mut report, &fixtures, &runs);

    let fci_total: f64 = fixtures.values().map(|f| f.fci_time.as_secs_f64()).sum();
    println!(
        "acceptance: {} failure(s); FCI {:.1}s, total {:.1}s",
        report.failures,
        fci_total,
        start.elapsed().as_secs_f64()
    );
    if report.failures > 0 {
        std::process::exit(1);
    }
}
