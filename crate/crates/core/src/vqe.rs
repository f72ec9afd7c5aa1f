//! Ansatz-parameter optimization against a fixed qubit Hamiltonian.

use std::f64::consts::{FRAC_PI_2, PI};


use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lbfgs::{self, LbfgsOptions};
use crate::pauli::PauliSum;
use crate::simulator::{adjoint_ry_step, apply_ansatz, apply_gate, AnsatzCircuit, Gate, Statevector};
use crate::sparse::{inner, SparseOperator};

/// How `∂E/∂θ` is obtained. Both are exact for Ry gates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GradientMethod {
    /// Two shifted circuit evaluations per parameter.
    ParameterShift,
    /// One forward and one reverse sweep over the circuit.
    #[default]
    Adjoint,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct VqeOptions {
    pub max_evaluations: usize,
    pub grad_tol: f64,
    pub energy_tol: f64,
    pub memory: usize,
    pub gradient: GradientMethod,
}

impl Default for VqeOptions {
    fn default() -> Self {
        Self {
            max_evaluations: 10_000,
            grad_tol: 1e-8,
            energy_tol: 1e-10,
            memory: 10,
            gradient: GradientMethod::Adjoint,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VqeResult {
    pub energy: f64,
    pub theta: Vec<f64>,
    pub n_evaluations: usize,
    pub converged: bool,
    pub seed: u64,
}

/// A compiled Hamiltonian together with the circuit and reference it is probed with.
#[derive(Debug, Clone)]
pub struct VqeProblem {
    op: SparseOperator,
    circuit: AnsatzCircuit,
    reference: Statevector,
}

impl VqeProblem {
    pub fn new(h: &PauliSum, circuit: AnsatzCircuit, reference: Statevector) -> Result<Self> {
        if h.n_qubits() != circuit.n_qubits() {
            return Err(Error::Dimension {
                expected: circuit.n_qubits(),
                found: h.n_qubits(),
            });
        }
        if reference.n_qubits() != circuit.n_qubits() {
            return Err(Error::Dimension {
                expected: circuit.n_qubits(),
                found: reference.n_qubits(),
            });
        }
        Ok(Self {
            op: SparseOperator::from_pauli_sum(h),
            circuit,
            reference,
        })
    }

    pub fn circuit(&self) -> &AnsatzCircuit {
        &self.circuit
    }

    pub fn reference(&self) -> &Statevector {
        &self.reference
    }

    pub fn operator(&self) -> &SparseOperator {
        &self.op
    }

    pub fn state(&self, theta: &[f64]) -> Result<Statevector> {
        apply_ansatz(&self.circuit, theta, &self.reference)
    }

    pub fn energy(&self, theta: &[f64]) -> Result<f64> {
        let psi = self.state(theta)?;
        let e = self.op.expectation(psi.amplitudes());
        if !e.is_finite() {
            return Err(Error::Numerical(format!("energy evaluated to {e}")));
        }
        Ok(e)
    }

    /// `∂E/∂θ_k = [E(θ_k + π/2) - E(θ_k - π/2)] / 2`.
    pub fn parameter_shift_gradient(&self, theta: &[f64]) -> Result<Vec<f64>> {
        (0..theta.len())
            .into_par_iter()
            .map(|k| {
                let mut shifted = theta.to_vec();
                shifted[k] = theta[k] + FRAC_PI_2;
                let plus = self.energy(&shifted)?;
                shifted[k] = theta[k] - FRAC_PI_2;
                let minus = self.energy(&shifted)?;
                Ok(0.5 * (plus - minus))
            })
            .collect()
    }

    /// Energy and exact gradient from a reverse sweep over the gate list.
    pub fn adjoint_energy_gradient(&self, theta: &[f64]) -> Result<(f64, Vec<f64>)> {
        let mut psi = self.state(theta)?.amplitudes().to_vec();
        let mut lambda = vec![Complex64::new(0.0, 0.0); psi.len()];
        self.op.apply(&psi, &mut lambda);
        let energy = inner(&psi, &lambda).re;
        if !energy.is_finite() {
            return Err(Error::Numerical(format!("energy evaluated to {energy}")));
        }
        let mut grad = vec![0.0; theta.len()];
        for gate in self.circuit.gates().into_iter().rev() {
            match gate {
                Gate::Ry { qubit, param } => {
                    grad[param] += adjoint_ry_step(&mut psi, &mut lambda, qubit, theta[param]);
                }
                Gate::Cnot { .. } => {
                    apply_gate(&mut psi, gate, theta);
                    apply_gate(&mut lambda, gate, theta);
                }
            }
        }
        Ok((energy, grad))
    }

    pub fn energy_and_gradient(&self, theta: &[f64], method: GradientMethod) -> Result<(f64, Vec<f64>)> {
        match method {
            GradientMethod::Adjoint => self.adjoint_energy_gradient(theta),
            GradientMethod::ParameterShift => Ok((self.energy(theta)?, self.parameter_shift_gradient(theta)?)),
        }
    }

    pub fn minimize(&self, theta0: &[f64], opts: &VqeOptions, seed: u64) -> Result<VqeResult> {
        if theta0.len() != self.circuit.n_params() {
            return Err(Error::Dimension {
                expected: self.circuit.n_params(),
                found: theta0.len(),
            });
        }
        let lopts = LbfgsOptions {
            memory: opts.memory,
            grad_tol: opts.grad_tol,
            f_tol: opts.energy_tol,
            max_evaluations: opts.max_evaluations,
            ..Default::default()
        };
        let report = lbfgs::minimize(|t| self.energy_and_gradient(t, opts.gradient), theta0, &lopts)?;
        Ok(VqeResult {
            energy: report.f,
            converged: report.converged(),
            theta: report.x,
            n_evaluations: report.n_evaluations,
            seed,
        })
    }

    /// Runs `n_starts` minimizations from uniform `[-π, π)` draws. Start `k`
    /// draws its angles from a generator seeded with `seed + k`.
    pub fn multistart(&self, n_starts: usize, seed: u64, opts: &VqeOptions) -> Result<MultistartResult> {
        if n_starts == 0 {
            return Err(Error::Unsupported("at least one VQE start is required".into()));
        }
        let n = self.circuit.n_params();
        let all: Result<Vec<VqeResult>> = (0..n_starts as u64)
            .into_par_iter()
            .map(|k| {
                let start_seed = seed.wrapping_add(k);
                self.minimize(&random_theta(n, start_seed), opts, start_seed)
            })
            .collect();
        let all = all?;
        let best = all
            .iter()
            .min_by(|a, b| a.energy.total_cmp(&b.energy).then(a.seed.cmp(&b.seed)))
            .cloned()
            .expect("n_starts >= 1");
        Ok(MultistartResult { best, all })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultistartResult {
    pub best: VqeResult,
    /// In start order.
    pub all: Vec<VqeResult>,
}

impl MultistartResult {
    /// Running minimum of the energies in start order.
    pub fn best_so_far(&self) -> Vec<f64> {
        self.all
            .iter()
            .scan(f64::INFINITY, |m, r| {
                *m = m.min(r.energy);
                Some(*m)
            })
            .collect()
    }
}

/// Uniform `[-π, π)` angles from a ChaCha8 stream seeded with `seed`.
pub fn random_theta(n: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-PI..PI)).collect()
}

pub fn vqe_minimize(
    h: &PauliSum,
    circuit: &AnsatzCircuit,
    reference: &Statevector,
    theta0: &[f64],
    opts: &VqeOptions,
) -> Result<VqeResult> {
    VqeProblem::new(h, circuit.clone(), reference.clone())?.minimize(theta0, opts, 0)
}

pub fn vqe_multistart(
    h: &PauliSum,
    circuit: &AnsatzCircuit,
    reference: &Statevector,
    n_starts: usize,
    seed: u64,
    opts: &VqeOptions,
) -> Result<MultistartResult> {
    VqeProblem::new(h, circuit.clone(), reference.clone())?.multistart(n_starts, seed, opts)
}
