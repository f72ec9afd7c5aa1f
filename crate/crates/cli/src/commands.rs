use std::path::{Path, PathBuf};

use serde::Serialize;
use wahtor_core::analysis::{
    align_orbitals, basis_change_state, correlation_fraction, fci_from_integrals, mutual_information,
    natural_orbitals_from_density, spin_summed_density, symmetry_adapted_natural_orbitals, DeltaMetric, FciSolution,
    MutualInfoMatrix, MAX_FCI_QUBITS,
};
use wahtor_core::integrals::{MoleculeMetadata, SpatialIntegrals, SymmetryGroups};
use wahtor_core::pauli::{pauli_expectation, qubit_hamiltonian};
use wahtor_core::simulator::{apply_ansatz, hf_reference, AnsatzCircuit, Statevector};
use wahtor_core::vqe::{MultistartResult, VqeProblem, VqeResult};
use wahtor_core::wahtor::{wahtor_run, WahtorOptions, WahtorOutcome, WahtorReport};

use crate::config::{Entangler, RunConfig};
use crate::error::CliError;

/// Integrals plus everything derived from the config that every command needs.
pub struct Problem {
    pub name: String,
    pub ints: SpatialIntegrals,
    pub groups: SymmetryGroups,
    pub circuit: AnsatzCircuit,
    pub reference: Statevector,
    pub hf_energy: f64,
    /// Added to every reported energy.
    pub offset: f64,
}

impl Problem {
    pub fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        let ints = SpatialIntegrals::from_path(&cfg.fcidump_path)?;
        let meta = cfg.metadata_path.as_ref().map(MoleculeMetadata::from_path).transpose()?;
        let m = ints.n_orbitals();
        let groups = match (&cfg.symmetry_groups, &meta) {
            (Some(g), _) => g.clone(),
            (None, Some(meta)) => meta.symmetry_groups.clone(),
            (None, None) => SymmetryGroups::new(vec![(1..=m).collect()]),
        };
        groups.validate(m)?;
        let depth = cfg.ansatz_depth.or(meta.as_ref().map(|x| x.ansatz_depth)).unwrap_or(2);
        let n = ints.n_spin_orbitals();
        let circuit = match &cfg.entangler {
            Entangler::Named(_) => AnsatzCircuit::ladder(n, depth),
            Entangler::Pairs(p) => AnsatzCircuit::with_entangler(n, depth, p.clone())?,
        };
        let reference = hf_reference(n, ints.n_electrons)?;
        let hf_energy = pauli_expectation(&qubit_hamiltonian(&ints, false)?, &reference)?;
        let name = meta.map(|x| x.molecule).unwrap_or_else(|| stem(&cfg.fcidump_path));
        let offset = if cfg.include_core_energy { ints.core_energy } else { 0.0 };
        Ok(Self {
            name,
            ints,
            groups,
            circuit,
            reference,
            hf_energy,
            offset,
        })
    }

    /// Exact ground state, or `None` when the register is too large to diagonalize.
    fn fci_if_feasible(&self) -> Result<Option<FciSolution>, CliError> {
        if self.ints.n_spin_orbitals() > MAX_FCI_QUBITS {
            log::warn!("{} qubits: skipping exact diagonalization", self.ints.n_spin_orbitals());
            return Ok(None);
        }
        Ok(Some(fci_from_integrals(&self.ints)?))
    }

    fn epsilon(&self, e: f64, fci: Option<&FciSolution>) -> Option<f64> {
        fci.and_then(|f| correlation_fraction(e, self.hf_energy, f.energy).ok())
    }

    fn vqe(&self, cfg: &RunConfig) -> Result<(VqeProblem, MultistartResult), CliError> {
        let h = qubit_hamiltonian(&self.ints, false)?;
        let problem = VqeProblem::new(&h, self.circuit.clone(), self.reference.clone())?;
        let runs = problem.multistart(cfg.n_starts, cfg.seed, &cfg.vqe)?;
        Ok((problem, runs))
    }

    fn wahtor(&self, cfg: &RunConfig) -> Result<WahtorOutcome, CliError> {
        let opts = WahtorOptions {
            n_starts: cfg.n_starts,
            seed: cfg.seed,
            vqe: cfg.vqe,
            trust_region: cfg.wahtor.trust_region,
            outer_tol: cfg.wahtor.outer_tol,
            max_outer: cfg.wahtor.max_outer,
        };
        Ok(wahtor_run(&self.ints, &self.groups, &self.circuit, &opts)?)
    }
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// Outcome of one subcommand: what to print, what to write, and whether it converged.
pub struct Emitted {
    pub summary: String,
    pub converged: bool,
}

fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    std::fs::create_dir_all(dir)?;
    let path = dir.join(name);
    let mut text = serde_json::to_string_pretty(value).map_err(wahtor_core::Error::from)?;
    text.push('\n');
    std::fs::write(&path, text)?;
    Ok(path)
}

fn write_panel(dir: &Path, panel: &str, mi: &MutualInfoMatrix) -> Result<Vec<String>, CliError> {
    std::fs::create_dir_all(dir)?;
    let csv = format!("mi_{panel}.csv");
    let json = format!("mi_{panel}.json");
    std::fs::write(dir.join(&csv), mi.to_csv())?;
    std::fs::write(dir.join(&json), mi.to_json()?)?;
    Ok(vec![csv, json])
}

#[derive(Serialize)]
struct FciReport<'a> {
    command: &'static str,
    molecule: &'a str,
    n_qubits: usize,
    n_electrons: usize,
    include_core_energy: bool,
    core_energy: f64,
    energy: f64,
    hf_energy: f64,
    residual: f64,
    sector_dim: usize,
    /// Spin-summed natural occupations, largest first.
    natural_occupations: Vec<f64>,
}

pub fn cmd_fci(cfg: &RunConfig, out: &Path) -> Result<Emitted, CliError> {
    let p = Problem::load(cfg)?;
    let sol = fci_from_integrals(&p.ints)?;
    let no = natural_orbitals_from_density(&spin_summed_density(&sol.ground_vector));
    let report = FciReport {
        command: "fci",
        molecule: &p.name,
        n_qubits: p.ints.n_spin_orbitals(),
        n_electrons: p.ints.n_electrons,
        include_core_energy: cfg.include_core_energy,
        core_energy: p.ints.core_energy,
        energy: sol.energy + p.offset,
        hf_energy: p.hf_energy + p.offset,
        residual: sol.residual,
        sector_dim: sol.sector_dim,
        natural_occupations: no.occupations.iter().copied().collect(),
    };
    write_json(out, "report.json", &report)?;
    let occ: Vec<String> = report.natural_occupations.iter().map(|x| format!("{x:.6}")).collect();
    Ok(Emitted {
        summary: format!(
            "{}: E_FCI = {:.6} Ha (sector dim {}); occupations [{}]",
            p.name,
            report.energy,
            sol.sector_dim,
            occ.join(", ")
        ),
        converged: true,
    })
}

#[derive(Serialize)]
struct VqeReport<'a> {
    command: &'static str,
    molecule: &'a str,
    n_qubits: usize,
    ansatz_depth: usize,
    n_parameters: usize,
    n_cnots: usize,
    n_starts: usize,
    seed: u64,
    include_core_energy: bool,
    hf_energy: f64,
    fci_energy: Option<f64>,
    energy: f64,
    epsilon: Option<f64>,
    best: &'a VqeResult,
    /// Running minimum over starts, in start order.
    best_so_far: Vec<f64>,
    converged: bool,
}

pub fn cmd_vqe(cfg: &RunConfig, out: &Path) -> Result<Emitted, CliError> {
    let p = Problem::load(cfg)?;
    let fci = p.fci_if_feasible()?;
    let (_, runs) = p.vqe(cfg)?;
    let best = &runs.best;
    let report = VqeReport {
        command: "vqe",
        molecule: &p.name,
        n_qubits: p.ints.n_spin_orbitals(),
        ansatz_depth: p.circuit.depth(),
        n_parameters: p.circuit.n_params(),
        n_cnots: p.circuit.n_cnots(),
        n_starts: cfg.n_starts,
        seed: cfg.seed,
        include_core_energy: cfg.include_core_energy,
        hf_energy: p.hf_energy + p.offset,
        fci_energy: fci.as_ref().map(|f| f.energy + p.offset),
        energy: best.energy + p.offset,
        epsilon: p.epsilon(best.energy, fci.as_ref()),
        best,
        best_so_far: runs.best_so_far().iter().map(|e| e + p.offset).collect(),
        converged: best.converged,
    };
    write_json(out, "report.json", &report)?;
    Ok(Emitted {
        summary: format!(
            "{}: E_VQE = {:.6} Ha, eps = {}",
            p.name,
            report.energy,
            fmt_opt(report.epsilon)
        ),
        converged: best.converged,
    })
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map(|v| format!("{v:.4}")).unwrap_or_else(|| "n/a".into())
}

/// Which state and orbital basis a mutual-information matrix is taken in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Panel {
    /// Best VQE state, HF orbitals.
    VqeHf,
    /// Final WAHTOR state, optimized orbitals.
    WahtorRotated,
    /// Exact ground state, HF orbitals.
    FciHf,
    /// Exact ground state, optimized orbitals.
    FciRotated,
    /// Exact ground state, natural orbitals matched to the optimized ones.
    FciNatural,
}

impl Panel {
    pub const ALL: [Panel; 5] = [
        Panel::VqeHf,
        Panel::WahtorRotated,
        Panel::FciHf,
        Panel::FciRotated,
        Panel::FciNatural,
    ];

    fn file_stem(self) -> &'static str {
        match self {
            Panel::VqeHf => "vqe_hf",
            Panel::WahtorRotated => "wahtor_rotated",
            Panel::FciHf => "fci_hf",
            Panel::FciRotated => "fci_rotated",
            Panel::FciNatural => "fci_natural",
        }
    }

    fn needs_wahtor(self) -> bool {
        matches!(self, Panel::WahtorRotated | Panel::FciRotated | Panel::FciNatural)
    }

    fn needs_fci(self) -> bool {
        matches!(self, Panel::FciHf | Panel::FciRotated | Panel::FciNatural)
    }
}

/// Lazily computed states shared by the panels of one run.
struct PanelSource<'a> {
    p: &'a Problem,
    fci: Option<&'a FciSolution>,
    wahtor: Option<&'a WahtorOutcome>,
    vqe_state: Statevector,
}

impl PanelSource<'_> {
    fn matrix(&self, panel: Panel) -> Result<Option<MutualInfoMatrix>, CliError> {
        let fci = match (panel.needs_fci(), self.fci) {
            (true, None) => return Ok(None),
            (_, f) => f,
        };
        let w = self.wahtor.map(|o| &o.state.accumulated_rotation);
        let psi = match panel {
            Panel::VqeHf => self.vqe_state.clone(),
            Panel::WahtorRotated => self.wahtor.expect("wahtor run").final_state.clone(),
            Panel::FciHf => fci.expect("fci").ground_vector.clone(),
            Panel::FciRotated => basis_change_state(&self.p.ints, w.expect("rotation"))?.ground_vector,
            Panel::FciNatural => {
                let d = spin_summed_density(&fci.expect("fci").ground_vector);
                let no = symmetry_adapted_natural_orbitals(&d, &self.p.groups)?;
                let aligned = align_orbitals(w.expect("rotation"), &no.coefficients, &self.p.groups)?;
                basis_change_state(&self.p.ints, &aligned)?.ground_vector
            }
        };
        Ok(Some(mutual_information(&psi)?))
    }

    fn write(&self, dir: &Path, panels: &[Panel]) -> Result<Vec<String>, CliError> {
        let mut files = Vec::new();
        for &panel in panels {
            match self.matrix(panel)? {
                Some(mi) => files.extend(write_panel(dir, panel.file_stem(), &mi)?),
                None => log::warn!("panel {} skipped: no exact ground state", panel.file_stem()),
            }
        }
        Ok(files)
    }
}

#[derive(Serialize)]
struct WahtorRunReport<'a> {
    command: &'static str,
    molecule: &'a str,
    n_qubits: usize,
    ansatz_depth: usize,
    n_starts: usize,
    seed: u64,
    symmetry_groups: &'a SymmetryGroups,
    include_core_energy: bool,
    hf_energy: f64,
    fci_energy: Option<f64>,
    vqe_energy: f64,
    wahtor_energy: f64,
    epsilon_vqe: Option<f64>,
    epsilon_wahtor: Option<f64>,
    delta: Option<DeltaMetric>,
    /// Energies inside this block are electronic (core excluded).
    wahtor: &'a WahtorReport,
    mutual_information_files: Vec<String>,
    converged: bool,
}

pub fn cmd_wahtor(cfg: &RunConfig, out: &Path) -> Result<Emitted, CliError> {
    let p = Problem::load(cfg)?;
    let fci = p.fci_if_feasible()?;
    let outcome = p.wahtor(cfg)?;
    let r = &outcome.report;
    let delta = match &fci {
        Some(f) => {
            let d = spin_summed_density(&f.ground_vector);
            let no = symmetry_adapted_natural_orbitals(&d, &p.groups)?;
            Some(wahtor_core::analysis::delta_metric(
                &outcome.state.accumulated_rotation,
                &no.coefficients,
                &p.groups,
            )?)
        }
        None => None,
    };
    let source = PanelSource {
        p: &p,
        fci: fci.as_ref(),
        wahtor: Some(&outcome),
        vqe_state: apply_ansatz(&p.circuit, &outcome.initial_vqe.best.theta, &p.reference)?,
    };
    let files = source.write(out, &Panel::ALL)?;
    let report = WahtorRunReport {
        command: "wahtor",
        molecule: &p.name,
        n_qubits: p.ints.n_spin_orbitals(),
        ansatz_depth: p.circuit.depth(),
        n_starts: cfg.n_starts,
        seed: cfg.seed,
        symmetry_groups: &p.groups,
        include_core_energy: cfg.include_core_energy,
        hf_energy: p.hf_energy + p.offset,
        fci_energy: fci.as_ref().map(|f| f.energy + p.offset),
        vqe_energy: r.initial_vqe_energy + p.offset,
        wahtor_energy: r.final_energy + p.offset,
        epsilon_vqe: p.epsilon(r.initial_vqe_energy, fci.as_ref()),
        epsilon_wahtor: p.epsilon(r.final_energy, fci.as_ref()),
        delta,
        wahtor: r,
        mutual_information_files: files,
        converged: r.converged,
    };
    write_json(out, "report.json", &report)?;
    let delta_text = match &delta {
        Some(DeltaMetric::Value { delta, .. }) => format!("{delta:.4}"),
        Some(DeltaMetric::HfEqualsNo { .. }) => "HF~NO".into(),
        None => "n/a".into(),
    };
    Ok(Emitted {
        summary: format!(
            "{}: E_VQE = {:.6} -> E_WAHTOR = {:.6} Ha in {} outer iterations; eps {} -> {}, delta {}",
            p.name,
            report.vqe_energy,
            report.wahtor_energy,
            r.iterations.len(),
            fmt_opt(report.epsilon_vqe),
            fmt_opt(report.epsilon_wahtor),
            delta_text
        ),
        converged: r.converged,
    })
}

pub fn cmd_mutual_info(cfg: &RunConfig, out: &Path, panels: &[Panel]) -> Result<Emitted, CliError> {
    let p = Problem::load(cfg)?;
    let fci = if panels.iter().any(|x| x.needs_fci()) {
        p.fci_if_feasible()?
    } else {
        None
    };
    let (outcome, vqe_theta, converged) = if panels.iter().any(|x| x.needs_wahtor()) {
        let o = p.wahtor(cfg)?;
        let theta = o.initial_vqe.best.theta.clone();
        let c = o.report.converged;
        (Some(o), theta, c)
    } else if panels.contains(&Panel::VqeHf) {
        let (_, runs) = p.vqe(cfg)?;
        (None, runs.best.theta, runs.best.converged)
    } else {
        (None, vec![0.0; p.circuit.n_params()], true)
    };
    let source = PanelSource {
        p: &p,
        fci: fci.as_ref(),
        wahtor: outcome.as_ref(),
        vqe_state: apply_ansatz(&p.circuit, &vqe_theta, &p.reference)?,
    };
    let files = source.write(out, panels)?;
    Ok(Emitted {
        summary: format!("{}: wrote {}", p.name, files.join(", ")),
        converged,
    })
}
