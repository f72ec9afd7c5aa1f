//! Alternating optimization of ansatz parameters and orbital rotations.
//!
//! Each outer iteration freezes the VQE state, caches its reduced density
//! matrices and minimizes the fixed-state energy `E(R) = ⟨ψ|H(R)|ψ⟩` over the
//! rotation parameters with an exact trust-region method. Accepted rotations
//! are folded into the integrals so that derivatives are always taken at
//! `R = 0`. The VQE is then rerun, warm-started, on the rotated Hamiltonian.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrals::{SpatialIntegrals, SymmetryGroups, Tensor4};
use crate::pauli::qubit_hamiltonian;
use crate::rotation::{
    build_generators, commutator_one_body, derivatives_at_zero, lift_two_body, reorthonormalize, rotate_integrals,
    GeneratorSet,
};
use crate::simulator::{fermionic_rdms, hf_reference, AnsatzCircuit, Statevector};
pub use crate::simulator::ReducedDensityMatrices;
use crate::vqe::{MultistartResult, VqeOptions, VqeProblem};

/// Spin-summed spatial density matrices of a frozen state.
#[derive(Debug, Clone)]
pub struct FixedState {
    pub one_body: DMatrix<f64>,
    pub two_body: Tensor4,
}

impl FixedState {
    pub fn new(rdms: &ReducedDensityMatrices) -> Self {
        Self {
            one_body: rdms.spin_summed_one_body(),
            two_body: rdms.spin_summed_two_body(),
        }
    }

    /// `Σ h1_pq D_pq + ½ Σ (pq|rs) P_pqrs`, core energy excluded.
    pub fn energy(&self, ints: &SpatialIntegrals) -> f64 {
        self.one_body.dot(&ints.h1) + 0.5 * self.two_body.dot(&ints.h2)
    }
}

/// Energy of the cached state under `ints`; `include_core` adds the constant.
pub fn fixed_state_energy(rdms: &ReducedDensityMatrices, ints: &SpatialIntegrals, include_core: bool) -> Result<f64> {
    if rdms.n_spin_orbitals() != ints.n_spin_orbitals() {
        return Err(Error::Dimension {
            expected: ints.n_spin_orbitals(),
            found: rdms.n_spin_orbitals(),
        });
    }
    let e = FixedState::new(rdms).energy(ints);
    Ok(if include_core { e + ints.core_energy } else { e })
}

/// Gradient and Hessian of the fixed-state energy at `R = 0`.
pub fn energy_gradient_hessian(
    state: &FixedState,
    ints: &SpatialIntegrals,
    g: &GeneratorSet,
) -> (DVector<f64>, DMatrix<f64>) {
    let d = derivatives_at_zero(ints, g);
    let n = g.len();
    let grad = DVector::from_fn(n, |l, _| {
        d.grad_h1[l].dot(&state.one_body) + 0.5 * d.grad_h2[l].dot(&state.two_body)
    });
    let mut hess = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let v = d.hess_h1[a][b].dot(&state.one_body) + 0.5 * d.hess_h2[a][b].dot(&state.two_body);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    (grad, hess)
}

/// Same quantities contracted generator by generator, without materializing
/// every Hessian tensor. Used inside the optimization loop.
fn gradient_hessian_lean(state: &FixedState, ints: &SpatialIntegrals, g: &GeneratorSet) -> (DVector<f64>, DMatrix<f64>) {
    let n = g.len();
    let gens: Vec<DMatrix<f64>> = (0..n).map(|l| g.generator(l)).collect();
    let g1: Vec<DMatrix<f64>> = gens.iter().map(|a| commutator_one_body(a, &ints.h1)).collect();
    let g2: Vec<Tensor4> = gens.iter().map(|a| lift_two_body(a, &ints.h2)).collect();
    let grad = DVector::from_fn(n, |l, _| g1[l].dot(&state.one_body) + 0.5 * g2[l].dot(&state.two_body));
    let mut hess = DMatrix::zeros(n, n);
    for a in 0..n {
        for b in a..n {
            let one = commutator_one_body(&gens[a], &g1[b]) + commutator_one_body(&gens[b], &g1[a]);
            let two = lift_two_body(&gens[a], &g2[b]).dot(&state.two_body)
                + lift_two_body(&gens[b], &g2[a]).dot(&state.two_body);
            let v = 0.5 * (one.dot(&state.one_body) + 0.5 * two);
            hess[(a, b)] = v;
            hess[(b, a)] = v;
        }
    }
    (grad, hess)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrustRegionStep {
    pub step: DVector<f64>,
    /// `-(gᵀs + ½ sᵀHs)`.
    pub predicted_decrease: f64,
    pub on_boundary: bool,
}

/// Exact minimizer of `gᵀs + ½ sᵀHs` over `‖s‖ ≤ radius`.
///
/// Uses the eigendecomposition of `H` and a safeguarded Newton iteration on
/// the secular equation `1/‖s(μ)‖ = 1/radius`, including the hard case where
/// the gradient has no component along the lowest eigenvector.
pub fn trust_region_step(gradient: &DVector<f64>, hessian: &DMatrix<f64>, radius: f64) -> Result<TrustRegionStep> {
    let n = gradient.len();
    if hessian.nrows() != n || hessian.ncols() != n {
        return Err(Error::Dimension {
            expected: n,
            found: hessian.nrows(),
        });
    }
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::Numerical(format!("trust radius {radius}")));
    }
    if gradient.iter().chain(hessian.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numerical("non-finite trust-region model".into()));
    }
    if n == 0 {
        return Ok(TrustRegionStep {
            step: DVector::zeros(0),
            predicted_decrease: 0.0,
            on_boundary: false,
        });
    }

    let sym = (hessian + hessian.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym.clone());
    let lambdas = eig.eigenvalues.clone();
    let q = eig.eigenvectors.clone();
    let gt = q.transpose() * gradient;
    let gnorm = gradient.norm();
    let scale = lambdas.iter().fold(1.0f64, |m, v| m.max(v.abs()));
    let (imin, lmin) = lambdas
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });

    let step_for = |mu: f64, skip: &dyn Fn(usize) -> bool| -> DVector<f64> {
        let mut coeffs = DVector::zeros(n);
        for i in 0..n {
            if !skip(i) {
                coeffs[i] = -gt[i] / (lambdas[i] + mu);
            }
        }
        &q * coeffs
    };
    let model = |s: &DVector<f64>| gradient.dot(s) + 0.5 * s.dot(&(&sym * s));
    let finish = |s: DVector<f64>, on_boundary: bool| -> Result<TrustRegionStep> {
        let predicted_decrease = (-model(&s)).max(0.0);
        Ok(TrustRegionStep {
            step: s,
            predicted_decrease,
            on_boundary,
        })
    };

    let degenerate_tol = 1e-12 * scale;
    let no_skip = |_: usize| false;

    // Interior Newton step.
    if lmin > degenerate_tol {
        let s = step_for(0.0, &no_skip);
        if s.norm() <= radius {
            return finish(s, false);
        }
    }

    let mu_floor = (-lmin).max(0.0);
    let lowest: Vec<usize> = (0..n).filter(|&i| lambdas[i] - lmin <= degenerate_tol).collect();
    let weight_lowest: f64 = lowest.iter().map(|&i| gt[i] * gt[i]).sum::<f64>().sqrt();
    if lmin <= degenerate_tol && weight_lowest <= 1e-14 * gnorm.max(1.0) {
        // Possible hard case: evaluate the step at μ = -λ_min without the lowest space.
        let in_lowest = |i: usize| lowest.contains(&i);
        let s = step_for(mu_floor, &in_lowest);
        let norm = s.norm();
        if norm <= radius {
            let tau = (radius * radius - norm * norm).max(0.0).sqrt();
            let mut z = q.column(imin).clone_owned();
            let (imax, _) = z.iter().enumerate().fold((0, 0.0f64), |(bi, bv), (i, v)| {
                if v.abs() > bv {
                    (i, v.abs())
                } else {
                    (bi, bv)
                }
            });
            if z[imax] < 0.0 {
                z = -z;
            }
            return finish(s + z * tau, true);
        }
    }

    // Secular equation on (mu_floor, hi].
    let norm_at = |mu: f64| -> f64 {
        (0..n)
            .map(|i| {
                let d = lambdas[i] + mu;
                (gt[i] / d).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    };
    let mut lo = mu_floor;
    let mut hi = mu_floor.max(gnorm / radius - lmin) + 1e-12 * scale.max(1.0);
    while norm_at(hi) > radius {
        hi *= 2.0;
    }
    let mut mu = if lmin > 0.0 { 0.0 } else { 0.5 * (lo + hi) };
    for _ in 0..200 {
        let norm = norm_at(mu);
        if !norm.is_finite() || norm > radius {
            lo = lo.max(mu);
        } else {
            hi = hi.min(mu);
        }
        if norm.is_finite() && (norm - radius).abs() <= 1e-13 * radius {
            break;
        }
        // Newton on φ(μ) = 1/‖s‖ - 1/radius.
        let mut next = f64::NAN;
        if norm.is_finite() && norm > 0.0 {
            let dnorm: f64 = -(0..n).map(|i| gt[i].powi(2) / (lambdas[i] + mu).powi(3)).sum::<f64>() / norm;
            let phi = 1.0 / norm - 1.0 / radius;
            let dphi = -dnorm / (norm * norm);
            next = mu - phi / dphi;
        }
        mu = if next.is_finite() && next > lo && next < hi { next } else { 0.5 * (lo + hi) };
        if hi - lo <= 1e-15 * hi.max(1.0) {
            break;
        }
    }
    let s = step_for(mu, &no_skip);
    finish(s, true)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrustRegionOptions {
    pub initial_radius: f64,
    pub max_radius: f64,
    /// Acceptance threshold on actual/predicted decrease.
    pub eta: f64,
    pub expand: f64,
    pub shrink: f64,
    pub grad_tol: f64,
    pub energy_tol: f64,
    pub max_inner: usize,
}

impl Default for TrustRegionOptions {
    fn default() -> Self {
        Self {
            initial_radius: 0.1,
            max_radius: std::f64::consts::PI,
            eta: 0.1,
            expand: 2.0,
            shrink: 0.25,
            grad_tol: 1e-8,
            energy_tol: 1e-9,
            max_inner: 100,
        }
    }
}

/// Orbitals, integrals and ansatz angles carried across outer iterations.
#[derive(Debug, Clone)]
pub struct WahtorState {
    /// Columns are the current orbitals expanded in the starting (HF) orbitals.
    pub accumulated_rotation: DMatrix<f64>,
    pub current_integrals: SpatialIntegrals,
    pub theta: Vec<f64>,
    pub energy_history: Vec<f64>,
    pub outer_iteration: usize,
}

impl WahtorState {
    pub fn new(ints: SpatialIntegrals, theta: Vec<f64>) -> Self {
        let m = ints.n_orbitals();
        Self {
            accumulated_rotation: DMatrix::identity(m, m),
            current_integrals: ints,
            theta,
            energy_history: Vec::new(),
            outer_iteration: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HamiltonianPhase {
    pub initial_energy: f64,
    pub final_energy: f64,
    /// Gradient norm at the start of the phase.
    pub grad_norm: f64,
    pub final_grad_norm: f64,
    pub radius: f64,
    pub accepted_steps: usize,
    pub inner_iterations: usize,
}

/// Trust-region minimization of the fixed-state energy over orbital rotations.
pub fn optimize_hamiltonian(
    rdms: &ReducedDensityMatrices,
    state: &mut WahtorState,
    g: &GeneratorSet,
    opts: &TrustRegionOptions,
) -> Result<HamiltonianPhase> {
    let frozen = FixedState::new(rdms);
    let mut energy = frozen.energy(&state.current_integrals);
    let initial_energy = energy;
    let mut radius = opts.initial_radius;
    let mut accepted = 0;
    let mut inner = 0;
    let mut first_grad_norm = None;
    let mut grad_norm = 0.0;

    while inner < opts.max_inner && !g.is_empty() {
        let (grad, hess) = gradient_hessian_lean(&frozen, &state.current_integrals, g);
        grad_norm = grad.norm();
        first_grad_norm.get_or_insert(grad_norm);
        if grad_norm < opts.grad_tol {
            break;
        }
        inner += 1;
        let step = trust_region_step(&grad, &hess, radius)?;
        if step.predicted_decrease <= 0.0 {
            break;
        }
        let r: Vec<f64> = step.step.iter().copied().collect();
        let u = g.rotation_matrix(&r)?;
        let trial = rotate_integrals(&state.current_integrals, g, &r)?;
        let trial_energy = frozen.energy(&trial);
        let actual = energy - trial_energy;
        let ratio = actual / step.predicted_decrease;

        if ratio < 0.1 {
            radius *= opts.shrink;
        } else if ratio > 0.75 && step.on_boundary {
            radius = (radius * opts.expand).min(opts.max_radius);
        }
        if ratio > opts.eta {
            state.current_integrals = trial;
            state.accumulated_rotation = &state.accumulated_rotation * u.transpose();
            reorthonormalize(&mut state.accumulated_rotation, 1e-9);
            energy = trial_energy;
            accepted += 1;
            if actual.abs() < opts.energy_tol {
                let (grad, _) = gradient_hessian_lean(&frozen, &state.current_integrals, g);
                grad_norm = grad.norm();
                break;
            }
        } else if radius < 1e-12 {
            break;
        }
    }

    Ok(HamiltonianPhase {
        initial_energy,
        final_energy: energy,
        grad_norm: first_grad_norm.unwrap_or(0.0),
        final_grad_norm: grad_norm,
        radius,
        accepted_steps: accepted,
        inner_iterations: inner,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WahtorOptions {
    pub n_starts: usize,
    pub seed: u64,
    pub vqe: VqeOptions,
    pub trust_region: TrustRegionOptions,
    /// Convergence threshold on successive VQE energies (Hartree).
    pub outer_tol: f64,
    pub max_outer: usize,
}

impl Default for WahtorOptions {
    fn default() -> Self {
        Self {
            n_starts: 100,
            seed: 0,
            vqe: VqeOptions::default(),
            trust_region: TrustRegionOptions::default(),
            outer_tol: 1e-6,
            max_outer: 50,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterIteration {
    pub vqe_energy: f64,
    pub post_rotation_energy: f64,
    pub grad_norm: f64,
    pub radius: f64,
    pub accepted_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WahtorReport {
    pub initial_vqe_energy: f64,
    pub final_energy: f64,
    pub iterations: Vec<OuterIteration>,
    /// Row-major; columns are optimized orbitals in the HF basis.
    pub final_rotation: Vec<Vec<f64>>,
    pub final_theta: Vec<f64>,
    pub energy_history: Vec<f64>,
    pub n_generators: usize,
    pub converged: bool,
}

#[derive(Debug, Clone)]
pub struct WahtorOutcome {
    pub state: WahtorState,
    pub report: WahtorReport,
    pub initial_vqe: MultistartResult,
    /// Final ansatz state, expressed in the optimized orbitals.
    pub final_state: Statevector,
}

pub fn matrix_rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

/// Multistart VQE on the HF Hamiltonian followed by alternating
/// Hamiltonian/VQE optimization.
pub fn wahtor_run(
    ints: &SpatialIntegrals,
    groups: &SymmetryGroups,
    circuit: &AnsatzCircuit,
    opts: &WahtorOptions,
) -> Result<WahtorOutcome> {
    groups.validate(ints.n_orbitals())?;
    let g = build_generators(groups, ints.n_orbitals());
    let reference = hf_reference(ints.n_spin_orbitals(), ints.n_electrons)?;
    let h0 = qubit_hamiltonian(ints, false)?;
    let problem = VqeProblem::new(&h0, circuit.clone(), reference.clone())?;
    let initial = problem.multistart(opts.n_starts, opts.seed, &opts.vqe)?;
    wahtor_from(ints, &g, circuit, reference, initial, opts)
}

/// Outer loop starting from an existing VQE result on `ints`.
pub fn wahtor_from(
    ints: &SpatialIntegrals,
    g: &GeneratorSet,
    circuit: &AnsatzCircuit,
    reference: Statevector,
    initial: MultistartResult,
    opts: &WahtorOptions,
) -> Result<WahtorOutcome> {
    let mut state = WahtorState::new(ints.clone(), initial.best.theta.clone());
    let mut vqe_energy = initial.best.energy;
    state.energy_history.push(vqe_energy);
    let mut iterations = Vec::new();
    let mut converged = g.is_empty();
    let mut psi = crate::simulator::apply_ansatz(circuit, &state.theta, &reference)?;

    while !converged && state.outer_iteration < opts.max_outer {
        state.outer_iteration += 1;
        let rdms = fermionic_rdms(&psi);
        let phase = optimize_hamiltonian(&rdms, &mut state, g, &opts.trust_region)?;
        state.energy_history.push(phase.final_energy);

        let h = qubit_hamiltonian(&state.current_integrals, false)?;
        let problem = VqeProblem::new(&h, circuit.clone(), reference.clone())?;
        let result = problem.minimize(&state.theta, &opts.vqe, initial.best.seed)?;
        state.theta = result.theta;
        psi = problem.state(&state.theta)?;
        state.energy_history.push(result.energy);
        log::debug!(
            "outer {}: rotated {:.10} -> vqe {:.10} (|g| = {:.2e})",
            state.outer_iteration,
            phase.final_energy,
            result.energy,
            phase.grad_norm
        );
        iterations.push(OuterIteration {
            vqe_energy: result.energy,
            post_rotation_energy: phase.final_energy,
            grad_norm: phase.grad_norm,
            radius: phase.radius,
            accepted_steps: phase.accepted_steps,
        });
        converged = (vqe_energy - result.energy).abs() < opts.outer_tol;
        vqe_energy = result.energy;
    }

    let report = WahtorReport {
        initial_vqe_energy: initial.best.energy,
        final_energy: vqe_energy,
        iterations,
        final_rotation: matrix_rows(&state.accumulated_rotation),
        final_theta: state.theta.clone(),
        energy_history: state.energy_history.clone(),
        n_generators: g.len(),
        converged,
    };
    Ok(WahtorOutcome {
        state,
        report,
        initial_vqe: initial,
        final_state: psi,
    })
}
