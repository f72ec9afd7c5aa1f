//! Exact statevector simulation of the Ry/CNOT hardware-efficient ansatz,
//! qubit reduced density matrices and fermionic expectation values.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::integrals::Tensor4;
use crate::sparse::inner;

const NORM_TOLERANCE: f64 = 1e-10;

/// Normalized amplitudes over `2^n` basis states; qubit `q` is bit `q` of the index.
#[derive(Debug, Clone, PartialEq)]
pub struct Statevector {
    n_qubits: usize,
    amps: Vec<Complex64>,
}

impl Statevector {
    pub fn from_amplitudes(amps: Vec<Complex64>) -> Result<Self> {
        let dim = amps.len();
        if dim == 0 || !dim.is_power_of_two() {
            return Err(Error::Dimension {
                expected: dim.next_power_of_two(),
                found: dim,
            });
        }
        let norm2: f64 = amps.iter().map(|a| a.norm_sqr()).sum();
        if (norm2 - 1.0).abs() > NORM_TOLERANCE {
            return Err(Error::Numerical(format!("state norm² is {norm2}")));
        }
        Ok(Self {
            n_qubits: dim.trailing_zeros() as usize,
            amps,
        })
    }

    /// Rescales to unit norm.
    pub fn normalized(mut amps: Vec<Complex64>) -> Result<Self> {
        let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::Numerical("cannot normalize a null state".into()));
        }
        amps.iter_mut().for_each(|a| *a /= norm);
        Self::from_amplitudes(amps)
    }

    pub fn basis_state(n_qubits: usize, index: usize) -> Self {
        let mut amps = vec![Complex64::new(0.0, 0.0); 1 << n_qubits];
        amps[index] = Complex64::new(1.0, 0.0);
        Self { n_qubits, amps }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `⟨N⟩` for `N = Σ_q (I - Z_q)/2`.
    pub fn mean_particle_number(&self) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .map(|(b, a)| a.norm_sqr() * b.count_ones() as f64)
            .sum()
    }

    /// `⟨(I - Z_q)/2⟩`.
    pub fn occupation(&self, q: usize) -> f64 {
        self.amps
            .iter()
            .enumerate()
            .filter(|(b, _)| (b >> q) & 1 == 1)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    /// `|⟨self|other⟩|`.
    pub fn overlap(&self, other: &Statevector) -> f64 {
        inner(&self.amps, &other.amps).norm()
    }

    /// Raw little-endian dump: `dim` pairs of f64 (re, im).
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.amps.len() * 16);
        for a in &self.amps {
            out.extend_from_slice(&a.re.to_le_bytes());
            out.extend_from_slice(&a.im.to_le_bytes());
        }
        out
    }
}

/// Closed-shell Hartree-Fock determinant in the spin-block qubit ordering.
pub fn hf_reference(n_qubits: usize, n_electrons: usize) -> Result<Statevector> {
    if n_electrons % 2 == 1 {
        return Err(Error::Unsupported(format!(
            "open-shell reference with {n_electrons} electrons"
        )));
    }
    if n_qubits % 2 == 1 || n_electrons > n_qubits || n_qubits > 30 {
        return Err(Error::Unsupported(format!(
            "{n_electrons} electrons on {n_qubits} spin-orbital qubits"
        )));
    }
    let m = n_qubits / 2;
    let half = n_electrons / 2;
    let mut index = 0usize;
    for p in 0..half {
        index |= 1 << p;
        index |= 1 << (p + m);
    }
    Ok(Statevector::basis_state(n_qubits, index))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gate {
    Ry { qubit: usize, param: usize },
    Cnot { control: usize, target: usize },
}

/// Ry layer followed by `depth` blocks of (entangler, Ry layer).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AnsatzCircuit {
    n_qubits: usize,
    depth: usize,
    entangler: Vec<(usize, usize)>,
}

impl AnsatzCircuit {
    /// CNOT ladder `(0,1), (1,2), …, (n-2,n-1)`.
    pub fn ladder(n_qubits: usize, depth: usize) -> Self {
        let entangler = (1..n_qubits).map(|q| (q - 1, q)).collect();
        Self {
            n_qubits,
            depth,
            entangler,
        }
    }

    pub fn with_entangler(n_qubits: usize, depth: usize, entangler: Vec<(usize, usize)>) -> Result<Self> {
        for &(c, t) in &entangler {
            if c == t || c >= n_qubits || t >= n_qubits {
                return Err(Error::BadIndex(format!(
                    "CNOT ({c}, {t}) invalid on {n_qubits} qubits"
                )));
            }
        }
        Ok(Self {
            n_qubits,
            depth,
            entangler,
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn entangler(&self) -> &[(usize, usize)] {
        &self.entangler
    }

    pub fn n_params(&self) -> usize {
        self.n_qubits * (self.depth + 1)
    }

    pub fn n_cnots(&self) -> usize {
        self.entangler.len() * self.depth
    }

    /// Gate sequence in application order; parameter `k·n + q` drives Ry on qubit `q` in layer `k`.
    pub fn gates(&self) -> Vec<Gate> {
        let n = self.n_qubits;
        let mut gates = Vec::with_capacity(self.n_params() + self.n_cnots());
        gates.extend((0..n).map(|q| Gate::Ry { qubit: q, param: q }));
        for layer in 1..=self.depth {
            gates.extend(
                self.entangler
                    .iter()
                    .map(|&(control, target)| Gate::Cnot { control, target }),
            );
            gates.extend((0..n).map(|q| Gate::Ry {
                qubit: q,
                param: layer * n + q,
            }));
        }
        gates
    }
}

/// In-place `Ry(angle) = exp(-i·angle·Y/2)` on `qubit`.
pub fn apply_ry(amps: &mut [Complex64], qubit: usize, angle: f64) {
    let (s, c) = (0.5 * angle).sin_cos();
    let bit = 1usize << qubit;
    let block = bit << 1;
    for base in (0..amps.len()).step_by(block) {
        for b0 in base..base + bit {
            let b1 = b0 | bit;
            let (a0, a1) = (amps[b0], amps[b1]);
            amps[b0] = a0 * c - a1 * s;
            amps[b1] = a0 * s + a1 * c;
        }
    }
}

/// One reverse step of the adjoint method through `Ry(angle)` on `qubit`:
/// undoes the gate on `psi` and `lambda` and returns `Re⟨λ|∂Ry ψ⟩·2`, the
/// contribution of this gate's angle to the energy gradient.
pub(crate) fn adjoint_ry_step(psi: &mut [Complex64], lambda: &mut [Complex64], qubit: usize, angle: f64) -> f64 {
    let (s, c) = (0.5 * angle).sin_cos();
    let bit = 1usize << qubit;
    let block = bit << 1;
    let mut acc = 0.0;
    for base in (0..psi.len()).step_by(block) {
        for b0 in base..base + bit {
            let b1 = b0 | bit;
            let (a0, a1) = (psi[b0], psi[b1]);
            let p0 = a0 * c + a1 * s;
            let p1 = a1 * c - a0 * s;
            psi[b0] = p0;
            psi[b1] = p1;
            // Ry(angle + π) applied to the pre-gate amplitudes.
            let m0 = -(p0 * s + p1 * c);
            let m1 = p0 * c - p1 * s;
            let (l0, l1) = (lambda[b0], lambda[b1]);
            acc += (l0.conj() * m0 + l1.conj() * m1).re;
            lambda[b0] = l0 * c + l1 * s;
            lambda[b1] = l1 * c - l0 * s;
        }
    }
    acc
}

pub fn apply_cnot(amps: &mut [Complex64], control: usize, target: usize) {
    let (cb, tb) = (1usize << control, 1usize << target);
    let (lo, hi) = (control.min(target), control.max(target));
    let (lo_mask, hi_mask) = ((1usize << lo) - 1, (1usize << hi) - 1);
    for k in 0..amps.len() >> 2 {
        // Insert zero bits at `lo` and `hi`.
        let t = (k & lo_mask) | ((k & !lo_mask) << 1);
        let b = (t & hi_mask) | ((t & !hi_mask) << 1);
        amps.swap(b | cb, b | cb | tb);
    }
}

pub(crate) fn apply_gate(amps: &mut [Complex64], gate: Gate, theta: &[f64]) {
    match gate {
        Gate::Ry { qubit, param } => apply_ry(amps, qubit, theta[param]),
        Gate::Cnot { control, target } => apply_cnot(amps, control, target),
    }
}

pub fn apply_ansatz(circuit: &AnsatzCircuit, theta: &[f64], reference: &Statevector) -> Result<Statevector> {
    if theta.len() != circuit.n_params() {
        return Err(Error::Dimension {
            expected: circuit.n_params(),
            found: theta.len(),
        });
    }
    if reference.n_qubits() != circuit.n_qubits() {
        return Err(Error::Dimension {
            expected: circuit.n_qubits(),
            found: reference.n_qubits(),
        });
    }
    let mut amps = reference.amps.clone();
    for gate in circuit.gates() {
        apply_gate(&mut amps, gate, theta);
    }
    Ok(Statevector {
        n_qubits: circuit.n_qubits,
        amps,
    })
}

/// Partial trace onto `keep` (one or two qubits). Local bit `t` of the result
/// corresponds to qubit `keep[t]`.
pub fn reduced_density_matrix(psi: &Statevector, keep: &[usize]) -> Result<DMatrix<Complex64>> {
    if keep.is_empty() || keep.len() > 2 {
        return Err(Error::BadIndex(format!("keep set of size {}", keep.len())));
    }
    if keep.iter().any(|&q| q >= psi.n_qubits) || (keep.len() == 2 && keep[0] == keep[1]) {
        return Err(Error::BadIndex(format!(
            "qubits {keep:?} on a {}-qubit register",
            psi.n_qubits
        )));
    }
    let k = keep.len();
    let local_dim = 1usize << k;
    let keep_mask: usize = keep.iter().map(|q| 1usize << q).sum();
    let deposit = |a: usize| -> usize {
        keep.iter()
            .enumerate()
            .filter(|(t, _)| (a >> t) & 1 == 1)
            .map(|(_, q)| 1usize << q)
            .sum()
    };
    let deposits: Vec<usize> = (0..local_dim).map(deposit).collect();
    let mut rho = DMatrix::zeros(local_dim, local_dim);
    for rest in 0..psi.dim() {
        if rest & keep_mask != 0 {
            continue;
        }
        for a in 0..local_dim {
            let amp_a = psi.amps[rest | deposits[a]];
            if amp_a.norm_sqr() == 0.0 {
                continue;
            }
            for b in 0..local_dim {
                rho[(a, b)] += amp_a * psi.amps[rest | deposits[b]].conj();
            }
        }
    }
    Ok(rho)
}

/// `a_p` applied to `src`; components without orbital `p` occupied vanish.
pub fn annihilate(p: usize, src: &[Complex64]) -> Vec<Complex64> {
    let bit = 1usize << p;
    let below = bit - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for (b, a) in src.iter().enumerate() {
        if b & bit != 0 {
            let sign = if (b & below).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[b ^ bit] = a * sign;
        }
    }
    out
}

/// `a†_p` applied to `src`.
pub fn create(p: usize, src: &[Complex64]) -> Vec<Complex64> {
    let bit = 1usize << p;
    let below = bit - 1;
    let mut out = vec![Complex64::new(0.0, 0.0); src.len()];
    for (b, a) in src.iter().enumerate() {
        if b & bit == 0 {
            let sign = if (b & below).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[b | bit] = a * sign;
        }
    }
    out
}

/// Cached one- and two-particle expectation values of a fixed state.
#[derive(Debug, Clone)]
pub struct ReducedDensityMatrices {
    n_spin_orbitals: usize,
    /// `γ[i][j] = ⟨a†_i a_j⟩`.
    pub gamma: DMatrix<Complex64>,
    /// `Γ[c][d][e][f] = ⟨a†_c a†_d a_e a_f⟩`, dense row-major.
    gamma2: Vec<Complex64>,
}

impl ReducedDensityMatrices {
    pub fn n_spin_orbitals(&self) -> usize {
        self.n_spin_orbitals
    }

    pub fn two_body(&self, c: usize, d: usize, e: usize, f: usize) -> Complex64 {
        let n = self.n_spin_orbitals;
        self.gamma2[((c * n + d) * n + e) * n + f]
    }

    pub fn trace(&self) -> f64 {
        self.gamma.trace().re
    }

    /// Spin-summed spatial 1-RDM `D[p][q] = γ[p↑,q↑] + γ[p↓,q↓]` (real part).
    pub fn spin_summed_one_body(&self) -> DMatrix<f64> {
        let m = self.n_spin_orbitals / 2;
        DMatrix::from_fn(m, m, |p, q| (self.gamma[(p, q)] + self.gamma[(p + m, q + m)]).re)
    }

    /// Spin-summed spatial 2-RDM in chemist order,
    /// `P[p][q][r][s] = Σ_{στ} ⟨a†_{pσ} a†_{rτ} a_{sτ} a_{qσ}⟩`, so that the
    /// two-electron energy is `½ Σ (pq|rs) P[p][q][r][s]`.
    pub fn spin_summed_two_body(&self) -> Tensor4 {
        let m = self.n_spin_orbitals / 2;
        let mut out = Tensor4::zeros(m);
        for p in 0..m {
            for q in 0..m {
                for r in 0..m {
                    for s in 0..m {
                        let mut v = 0.0;
                        for sigma in [0, m] {
                            for tau in [0, m] {
                                v += self.two_body(p + sigma, r + tau, s + tau, q + sigma).re;
                            }
                        }
                        out.set(p, q, r, s, v);
                    }
                }
            }
        }
        out
    }

    /// Largest violation of `Γ[c][d][e][f] = -Γ[d][c][e][f] = -Γ[c][d][f][e]`.
    pub fn antisymmetry_violation(&self) -> f64 {
        let n = self.n_spin_orbitals;
        let mut worst = 0.0f64;
        for c in 0..n {
            for d in 0..n {
                for e in 0..n {
                    for f in 0..n {
                        let v = self.two_body(c, d, e, f);
                        worst = worst
                            .max((v + self.two_body(d, c, e, f)).norm())
                            .max((v + self.two_body(c, d, f, e)).norm());
                    }
                }
            }
        }
        worst
    }
}

/// Exact `γ` and `Γ` by ladder-operator action on the statevector.
pub fn fermionic_rdms(psi: &Statevector) -> ReducedDensityMatrices {
    let n = psi.n_qubits;
    let singles: Vec<Vec<Complex64>> = (0..n).into_par_iter().map(|p| annihilate(p, &psi.amps)).collect();
    let gamma = DMatrix::from_fn(n, n, |i, j| inner(&singles[i], &singles[j]));

    // v[(i,j)] = a_i a_j ψ for i < j; a_j a_i ψ = -v[(i,j)].
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let doubles: Vec<Vec<Complex64>> = pairs
        .par_iter()
        .map(|&(i, j)| annihilate(i, &singles[j]))
        .collect();
    let pair_index = |i: usize, j: usize| -> (usize, f64) {
        if i < j {
            (i * n - i * (i + 1) / 2 + (j - i - 1), 1.0)
        } else {
            (j * n - j * (j + 1) / 2 + (i - j - 1), -1.0)
        }
    };
    let npairs = pairs.len();
    let overlaps: Vec<Complex64> = (0..npairs * npairs)
        .into_par_iter()
        .map(|k| {
            let (a, b) = (k / npairs, k % npairs);
            if a > b {
                Complex64::new(0.0, 0.0)
            } else {
                inner(&doubles[a], &doubles[b])
            }
        })
        .collect();
    let overlap = |a: usize, b: usize| -> Complex64 {
        if a <= b {
            overlaps[a * npairs + b]
        } else {
            overlaps[b * npairs + a].conj()
        }
    };

    let mut gamma2 = vec![Complex64::new(0.0, 0.0); n.pow(4)];
    for c in 0..n {
        for d in 0..n {
            if c == d {
                continue;
            }
            // (a†_c a†_d)† = a_d a_c
            let (left, s1) = pair_index(d, c);
            for e in 0..n {
                for f in 0..n {
                    if e == f {
                        continue;
                    }
                    let (right, s2) = pair_index(e, f);
                    gamma2[((c * n + d) * n + e) * n + f] = overlap(left, right) * (s1 * s2);
                }
            }
        }
    }
    ReducedDensityMatrices {
        n_spin_orbitals: n,
        gamma,
        gamma2,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    #[test]
    fn hf_reference_layout() {
        let hf = hf_reference(4, 2).unwrap();
        assert_eq!(hf.amplitudes()[0b0101], c(1.0));
        assert_eq!(hf_reference(4, 0).unwrap().amplitudes()[0], c(1.0));
        assert!(matches!(hf_reference(4, 3), Err(Error::Unsupported(_))));
        assert!(hf_reference(4, 6).is_err());
        let h2o = hf_reference(12, 8).unwrap();
        assert!((h2o.mean_particle_number() - 8.0).abs() < 1e-14);
        for q in 0..12 {
            let expected = if q % 6 < 4 { 1.0 } else { 0.0 };
            assert_eq!(h2o.occupation(q), expected);
        }
    }

    #[test]
    fn zero_angles_leave_vacuum() {
        let circ = AnsatzCircuit::ladder(4, 2);
        let out = apply_ansatz(&circ, &vec![0.0; circ.n_params()], &Statevector::basis_state(4, 0)).unwrap();
        assert_eq!(out.amplitudes()[0], c(1.0));
    }

    #[test]
    fn ry_pi_flips() {
        let circ = AnsatzCircuit::ladder(1, 0);
        let out = apply_ansatz(&circ, &[PI], &Statevector::basis_state(1, 0)).unwrap();
        assert!(out.amplitudes()[0].norm() < 1e-15);
        assert!((out.amplitudes()[1].norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn parameter_count_and_errors() {
        let circ = AnsatzCircuit::ladder(8, 2);
        assert_eq!(circ.n_params(), 24);
        assert_eq!(circ.n_cnots(), 14);
        let r = apply_ansatz(&circ, &[0.0; 3], &Statevector::basis_state(8, 0));
        assert!(matches!(r, Err(Error::Dimension { expected: 24, found: 3 })));
        assert!(AnsatzCircuit::with_entangler(3, 1, vec![(0, 0)]).is_err());
        assert!(AnsatzCircuit::with_entangler(3, 1, vec![(0, 3)]).is_err());
    }

    #[test]
    fn cnot_truth_table() {
        let mut amps = vec![c(0.0); 4];
        amps[0b01] = c(1.0); // control qubit 0 set
        apply_cnot(&mut amps, 0, 1);
        assert_eq!(amps[0b11], c(1.0));
    }

    #[test]
    fn single_qubit_rdm_of_product_state() {
        // qubit 0 in |1⟩, qubit 1 in |0⟩
        let psi = Statevector::basis_state(2, 0b01);
        let rho = reduced_density_matrix(&psi, &[0]).unwrap();
        assert_eq!(rho[(1, 1)], c(1.0));
        assert_eq!(rho[(0, 0)], c(0.0));
        let rho1 = reduced_density_matrix(&psi, &[1]).unwrap();
        assert_eq!(rho1[(0, 0)], c(1.0));
    }

    #[test]
    fn bell_state_marginal() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = Statevector::from_amplitudes(vec![c(s), c(0.0), c(0.0), c(s)]).unwrap();
        let rho = reduced_density_matrix(&psi, &[0]).unwrap();
        assert!((rho[(0, 0)].re - 0.5).abs() < 1e-15);
        assert!((rho[(1, 1)].re - 0.5).abs() < 1e-15);
        assert!(rho[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn rdm_index_errors() {
        let psi = Statevector::basis_state(3, 0);
        assert!(reduced_density_matrix(&psi, &[3]).is_err());
        assert!(reduced_density_matrix(&psi, &[1, 1]).is_err());
        assert!(reduced_density_matrix(&psi, &[]).is_err());
        assert!(reduced_density_matrix(&psi, &[0, 1, 2]).is_err());
    }

    #[test]
    fn hf_rdms_are_diagonal() {
        let psi = hf_reference(6, 4).unwrap();
        let rdms = fermionic_rdms(&psi);
        assert!((rdms.trace() - 4.0).abs() < 1e-14);
        for i in 0..6 {
            for j in 0..6 {
                let expected = if i == j { psi.occupation(i) } else { 0.0 };
                assert!((rdms.gamma[(i, j)].re - expected).abs() < 1e-14);
            }
        }
        assert!(rdms.antisymmetry_violation() < 1e-14);
    }

    #[test]
    fn unnormalized_rejected() {
        assert!(Statevector::from_amplitudes(vec![c(1.0), c(1.0)]).is_err());
        assert!(Statevector::from_amplitudes(vec![c(1.0), c(0.0), c(0.0)]).is_err());
        assert!(Statevector::normalized(vec![c(0.0), c(0.0)]).is_err());
    }
}
