//! Exact ground states, natural orbitals, orbital-quality metrics and
//! qubit mutual information.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrals::{SpatialIntegrals, SymmetryGroups};
use crate::pauli::{qubit_hamiltonian, PauliSum};
use crate::rotation::rotate_with_matrix;
use crate::simulator::{annihilate, reduced_density_matrix, Statevector};
use crate::sparse::inner;

pub const MAX_FCI_QUBITS: usize = 16;
/// Sectors up to this size are diagonalized densely.
pub const DENSE_SECTOR_LIMIT: usize = 1200;
/// `δ` denominators below this are reported as the HF≈NO sentinel.
pub const HF_NO_THRESHOLD: f64 = 1e-3;
/// Density-matrix eigenvalues below this count as exact zeros.
pub const ENTROPY_ZERO: f64 = 1e-14;

#[derive(Debug, Clone)]
pub struct FciSolution {
    pub energy: f64,
    pub ground_vector: Statevector,
    pub n_electrons: usize,
    /// `‖Hv - Ev‖`.
    pub residual: f64,
    pub sector_dim: usize,
}

/// Hamiltonian restricted to one particle-number sector, stored by rows.
struct SectorOperator {
    basis: Vec<usize>,
    rows: Vec<Vec<(usize, Complex64)>>,
}

impl SectorOperator {
    fn new(h: &PauliSum, n_electrons: usize) -> Self {
        let n = h.n_qubits();
        let basis: Vec<usize> = (0..1usize << n)
            .filter(|b| b.count_ones() as usize == n_electrons)
            .collect();
        let mut position = vec![usize::MAX; 1usize << n];
        for (i, &b) in basis.iter().enumerate() {
            position[b] = i;
        }
        let rows = basis
            .par_iter()
            .map(|&a| {
                let mut row: Vec<(usize, Complex64)> = Vec::new();
                for (p, coeff) in h.terms() {
                    let c = a ^ p.x_mask() as usize;
                    let j = position[c];
                    if j == usize::MAX {
                        continue;
                    }
                    let (_, phase) = p.apply_to_basis(c as u64);
                    row.push((j, phase * *coeff));
                }
                row.sort_by_key(|e| e.0);
                let mut merged: Vec<(usize, Complex64)> = Vec::with_capacity(row.len());
                for (j, v) in row {
                    match merged.last_mut() {
                        Some(last) if last.0 == j => last.1 += v,
                        _ => merged.push((j, v)),
                    }
                }
                merged
            })
            .collect();
        Self { basis, rows }
    }

    fn dim(&self) -> usize {
        self.basis.len()
    }

    fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        self.rows
            .par_iter()
            .map(|row| row.iter().map(|(j, v)| v * x[*j]).sum())
            .collect()
    }

    fn is_real(&self) -> bool {
        self.rows.iter().flatten().all(|(_, v)| v.im == 0.0)
    }

    fn dense(&self) -> DMatrix<Complex64> {
        let d = self.dim();
        let mut m = DMatrix::zeros(d, d);
        for (i, row) in self.rows.iter().enumerate() {
            for (j, v) in row {
                m[(i, *j)] = *v;
            }
        }
        m
    }
}

fn lowest_dense(op: &SectorOperator) -> (f64, Vec<Complex64>) {
    let d = op.dim();
    if op.is_real() {
        let m = op.dense().map(|v| v.re);
        let m = (&m + m.transpose()) * 0.5;
        let eig = SymmetricEigen::new(m);
        let k = eig.eigenvalues.imin();
        let v = eig.eigenvectors.column(k).iter().map(|x| Complex64::new(*x, 0.0)).collect();
        (eig.eigenvalues[k], v)
    } else {
        let m = op.dense();
        let m = (&m + m.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = SymmetricEigen::new(m);
        let k = eig.eigenvalues.imin();
        let v = (0..d).map(|i| eig.eigenvectors[(i, k)]).collect();
        (eig.eigenvalues[k], v)
    }
}

fn normalize(v: &mut [Complex64]) -> f64 {
    let n = inner(v, v).re.sqrt();
    if n > 0.0 {
        v.iter_mut().for_each(|x| *x /= n);
    }
    n
}

/// Lanczos with full reorthogonalization, restarted from the Ritz vector.
fn lowest_lanczos(op: &SectorOperator) -> Result<(f64, Vec<Complex64>)> {
    let d = op.dim();
    let max_krylov = d.min(160);
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut start: Vec<Complex64> = (0..d).map(|_| Complex64::new(rng.random_range(-1.0..1.0), 0.0)).collect();
    normalize(&mut start);
    let mut best = (f64::INFINITY, start.clone());

    for _restart in 0..30 {
        let mut basis: Vec<Vec<Complex64>> = vec![start.clone()];
        let mut alpha: Vec<f64> = Vec::new();
        let mut beta: Vec<f64> = Vec::new();
        for k in 0..max_krylov {
            let mut w = op.apply(&basis[k]);
            alpha.push(inner(&basis[k], &w).re);
            for _ in 0..2 {
                for b in &basis {
                    let c = inner(b, &w);
                    w.iter_mut().zip(b).for_each(|(x, y)| *x -= c * y);
                }
            }
            let nb = normalize(&mut w);
            if k + 1 == max_krylov || nb < 1e-12 {
                break;
            }
            beta.push(nb);
            basis.push(w);
        }
        let kdim = alpha.len();
        let t = DMatrix::from_fn(kdim, kdim, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let k = eig.eigenvalues.imin();
        let mut ritz = vec![Complex64::new(0.0, 0.0); d];
        for (i, b) in basis.iter().take(kdim).enumerate() {
            let c = eig.eigenvectors[(i, k)];
            ritz.iter_mut().zip(b).for_each(|(x, y)| *x += y * c);
        }
        normalize(&mut ritz);
        let e = op.apply(&ritz);
        let energy = inner(&ritz, &e).re;
        let residual = e
            .iter()
            .zip(&ritz)
            .map(|(a, b)| (a - b * energy).norm_sqr())
            .sum::<f64>()
            .sqrt();
        best = (energy, ritz.clone());
        if residual < 1e-11 {
            return Ok(best);
        }
        start = ritz;
    }
    log::warn!("Lanczos stopped at the restart limit");
    Ok(best)
}

/// Lowest eigenpair of `h` among states with `n_electrons` set bits.
pub fn fci_solve(h: &PauliSum, n_electrons: usize) -> Result<FciSolution> {
    let n = h.n_qubits();
    if n > MAX_FCI_QUBITS {
        return Err(Error::Scale {
            n_qubits: n,
            limit: MAX_FCI_QUBITS,
        });
    }
    if n_electrons > n {
        return Err(Error::Unsupported(format!("{n_electrons} electrons on {n} qubits")));
    }
    let op = SectorOperator::new(h, n_electrons);
    let (_, mut v) = if op.dim() <= DENSE_SECTOR_LIMIT {
        lowest_dense(&op)
    } else {
        lowest_lanczos(&op)?
    };
    normalize(&mut v);
    fix_phase(&mut v);
    let hv = op.apply(&v);
    let energy = inner(&v, &hv).re;
    let residual = hv.iter().zip(&v).map(|(a, b)| (a - b * energy).norm_sqr()).sum::<f64>().sqrt();
    if !energy.is_finite() {
        return Err(Error::Numerical(format!("FCI energy {energy}")));
    }
    let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << n];
    for (i, &b) in op.basis.iter().enumerate() {
        amps[b] = v[i];
    }
    Ok(FciSolution {
        energy,
        ground_vector: Statevector::from_amplitudes(amps)?,
        n_electrons,
        residual,
        sector_dim: op.dim(),
    })
}

/// Electronic (core-excluded) FCI solution of a set of integrals.
pub fn fci_from_integrals(ints: &SpatialIntegrals) -> Result<FciSolution> {
    fci_solve(&qubit_hamiltonian(ints, false)?, ints.n_electrons)
}

/// Largest-magnitude amplitude made real and positive; the first index wins
/// ties within 1e-10.
fn fix_phase(v: &mut [Complex64]) {
    let max = v.iter().map(|x| x.norm()).fold(0.0, f64::max);
    if max == 0.0 {
        return;
    }
    let pivot = v.iter().position(|x| x.norm() >= max - 1e-10).unwrap_or(0);
    let phase = v[pivot].conj() / v[pivot].norm();
    v.iter_mut().for_each(|x| *x *= phase);
}

/// `γ[p][q] = ⟨a†_p a_q⟩`.
pub fn one_body_rdm(psi: &Statevector) -> DMatrix<Complex64> {
    let n = psi.n_qubits();
    let singles: Vec<Vec<Complex64>> = (0..n).into_par_iter().map(|p| annihilate(p, psi.amplitudes())).collect();
    DMatrix::from_fn(n, n, |i, j| inner(&singles[i], &singles[j]))
}

/// `D[p][q] = γ[p][q] + γ[p+m][q+m]`, real part.
pub fn spin_summed_density(psi: &Statevector) -> DMatrix<f64> {
    let gamma = one_body_rdm(psi);
    let m = psi.n_qubits() / 2;
    DMatrix::from_fn(m, m, |p, q| (gamma[(p, q)] + gamma[(p + m, q + m)]).re)
}

#[derive(Debug, Clone, PartialEq)]
pub struct NaturalOrbitals {
    /// Sorted descending.
    pub occupations: DVector<f64>,
    /// Columns are natural orbitals in the current basis.
    pub coefficients: DMatrix<f64>,
}

/// Each column's largest-magnitude entry is made positive.
fn fix_column_signs(c: &mut DMatrix<f64>) {
    for mut col in c.column_iter_mut() {
        let pivot = col.iamax();
        if col[pivot] < 0.0 {
            col.neg_mut();
        }
    }
}

pub fn natural_orbitals_from_density(d: &DMatrix<f64>) -> NaturalOrbitals {
    let sym = (d + d.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..d.nrows()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let occupations = DVector::from_iterator(order.len(), order.iter().map(|&k| eig.eigenvalues[k]));
    let mut coefficients = DMatrix::from_fn(d.nrows(), order.len(), |i, j| eig.eigenvectors[(i, order[j])]);
    fix_column_signs(&mut coefficients);
    NaturalOrbitals {
        occupations,
        coefficients,
    }
}

pub fn natural_orbitals(sol: &FciSolution, m: usize) -> Result<NaturalOrbitals> {
    if sol.ground_vector.n_qubits() != 2 * m {
        return Err(Error::Dimension {
            expected: 2 * m,
            found: sol.ground_vector.n_qubits(),
        });
    }
    Ok(natural_orbitals_from_density(&spin_summed_density(&sol.ground_vector)))
}

/// Natural orbitals obtained block by block inside each symmetry group, so
/// that accidental degeneracies never mix irreducible representations.
/// Orbitals outside every multi-member group are kept as they are. Column
/// order follows the orbital order of the current basis within each group,
/// filled by descending occupation.
pub fn symmetry_adapted_natural_orbitals(d: &DMatrix<f64>, groups: &SymmetryGroups) -> Result<NaturalOrbitals> {
    let m = d.nrows();
    groups.validate(m)?;
    let mut coefficients = DMatrix::identity(m, m);
    let mut occupations = DVector::from_fn(m, |i, _| d[(i, i)]);
    for group in groups.rotatable() {
        let block = DMatrix::from_fn(group.len(), group.len(), |a, b| d[(group[a], group[b])]);
        let no = natural_orbitals_from_density(&block);
        for (b, &col) in group.iter().enumerate() {
            occupations[col] = no.occupations[b];
            for (a, &row) in group.iter().enumerate() {
                coefficients[(row, col)] = no.coefficients[(a, b)];
            }
        }
    }
    Ok(NaturalOrbitals {
        occupations,
        coefficients,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DeltaMetric {
    Value { delta: f64, denominator: f64 },
    /// Hartree-Fock orbitals already coincide with the natural orbitals.
    HfEqualsNo { denominator: f64 },
}

impl DeltaMetric {
    pub fn value(&self) -> Option<f64> {
        match self {
            DeltaMetric::Value { delta, .. } => Some(*delta),
            DeltaMetric::HfEqualsNo { .. } => None,
        }
    }

    pub fn is_sentinel(&self) -> bool {
        matches!(self, DeltaMetric::HfEqualsNo { .. })
    }
}

/// Maximum-weight perfect matching on a small square matrix by dynamic
/// programming over subsets. Returns the optimal weight and `perm` with row
/// `i` matched to column `perm[i]`.
pub fn optimal_assignment(w: &DMatrix<f64>) -> Result<(f64, Vec<usize>)> {
    let k = w.nrows();
    if w.ncols() != k {
        return Err(Error::Dimension {
            expected: k,
            found: w.ncols(),
        });
    }
    if k > 20 {
        return Err(Error::Unsupported(format!("assignment of size {k}")));
    }
    let full = (1usize << k) - 1;
    let mut best = vec![f64::NEG_INFINITY; full + 1];
    let mut choice = vec![usize::MAX; full + 1];
    best[0] = 0.0;
    for mask in 0..full {
        let row = mask.count_ones() as usize;
        if best[mask] == f64::NEG_INFINITY {
            continue;
        }
        for col in 0..k {
            if mask & (1 << col) == 0 {
                let next = mask | (1 << col);
                let v = best[mask] + w[(row, col)];
                if v > best[next] {
                    best[next] = v;
                    choice[next] = col;
                }
            }
        }
    }
    let mut perm = vec![0; k];
    let mut mask = full;
    for row in (0..k).rev() {
        perm[row] = choice[mask];
        mask &= !(1 << choice[mask]);
    }
    Ok((best[full], perm))
}

pub fn max_weight_assignment(w: &DMatrix<f64>) -> Result<f64> {
    optimal_assignment(w).map(|(v, _)| v)
}

/// Reorders and sign-flips the columns of `target` inside each rotatable
/// group so that column `i` has maximal overlap with column `i` of
/// `reference`. Other columns are returned unchanged.
pub fn align_orbitals(reference: &DMatrix<f64>, target: &DMatrix<f64>, groups: &SymmetryGroups) -> Result<DMatrix<f64>> {
    let m = reference.nrows();
    if reference.shape() != (m, m) || target.shape() != (m, m) {
        return Err(Error::Dimension {
            expected: m,
            found: target.nrows(),
        });
    }
    groups.validate(m)?;
    let s = reference.transpose() * target;
    let mut out = target.clone();
    for g in groups.rotatable() {
        let block = DMatrix::from_fn(g.len(), g.len(), |i, j| s[(g[i], g[j])].abs());
        let (_, perm) = optimal_assignment(&block)?;
        for (i, &j) in perm.iter().enumerate() {
            let sign = if s[(g[i], g[j])] < 0.0 { -1.0 } else { 1.0 };
            out.set_column(g[i], &(target.column(g[j]) * sign));
        }
    }
    Ok(out)
}

/// Summed `|⟨A_i|B_j⟩|` over the best pairing inside each rotatable group.
fn matched_overlap(a: &DMatrix<f64>, b: &DMatrix<f64>, groups: &[Vec<usize>]) -> Result<f64> {
    let s = a.transpose() * b;
    groups
        .iter()
        .map(|g| max_weight_assignment(&DMatrix::from_fn(g.len(), g.len(), |i, j| s[(g[i], g[j])].abs())))
        .sum()
}

/// Fraction of the HF-to-NO distance covered by the orbitals `w`.
///
/// `w` and `no` hold orbitals as columns in the HF basis. Only orbitals in
/// multi-member symmetry groups enter the sums; each overlap sum uses its own
/// maximal-overlap pairing within every group.
pub fn delta_metric(w: &DMatrix<f64>, no: &DMatrix<f64>, groups: &SymmetryGroups) -> Result<DeltaMetric> {
    let m = w.nrows();
    if w.shape() != (m, m) || no.shape() != (m, m) {
        return Err(Error::Dimension {
            expected: m,
            found: no.nrows(),
        });
    }
    groups.validate(m)?;
    let rotatable = groups.rotatable();
    let n: usize = rotatable.iter().map(|g| g.len()).sum();
    let hf = DMatrix::identity(m, m);
    let w_no = matched_overlap(w, no, &rotatable)?;
    let hf_no = matched_overlap(&hf, no, &rotatable)?;
    let denominator = n as f64 - hf_no;
    if denominator < HF_NO_THRESHOLD {
        return Ok(DeltaMetric::HfEqualsNo { denominator });
    }
    Ok(DeltaMetric::Value {
        delta: (w_no - hf_no) / denominator,
        denominator,
    })
}

/// `ε = (e - e_hf) / (e_fci - e_hf)`.
pub fn correlation_fraction(e: f64, e_hf: f64, e_fci: f64) -> Result<f64> {
    let gap = e_fci - e_hf;
    if gap.abs() <= 1e-14 * e_hf.abs().max(1.0) {
        return Err(Error::Degenerate);
    }
    Ok((e - e_hf) / gap)
}

/// Von Neumann entropy in nats.
pub fn von_neumann_entropy(rho: &DMatrix<Complex64>) -> f64 {
    let herm = (rho + rho.adjoint()) * Complex64::new(0.5, 0.0);
    SymmetricEigen::new(herm)
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0))
        .filter(|&l| l > ENTROPY_ZERO)
        .map(|l| -l * l.ln())
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MutualInfoMatrix {
    pub n_qubits: usize,
    /// Row-major `n × n`, nats.
    pub values: Vec<Vec<f64>>,
    pub single_entropies: Vec<f64>,
}

impl MutualInfoMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }

    /// Unordered pairs with `I_ij > threshold`.
    pub fn count_above(&self, threshold: f64) -> usize {
        (0..self.n_qubits)
            .flat_map(|i| (i + 1..self.n_qubits).map(move |j| (i, j)))
            .filter(|&(i, j)| self.values[i][j] > threshold)
            .count()
    }

    pub fn max_abs_diff(&self, other: &MutualInfoMatrix) -> f64 {
        self.values
            .iter()
            .flatten()
            .zip(other.values.iter().flatten())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn max_asymmetry(&self) -> f64 {
        let n = self.n_qubits;
        (0..n)
            .flat_map(|i| (0..n).map(move |j| (i, j)))
            .map(|(i, j)| (self.values[i][j] - self.values[j][i]).abs())
            .fold(0.0, f64::max)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        for row in &self.values {
            let line: Vec<String> = row.iter().map(|v| format!("{v:.12e}")).collect();
            out.push_str(&line.join(","));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// `I_ij = S(ρ_i) + S(ρ_j) - S(ρ_ij)` for every qubit pair, zero diagonal.
pub fn mutual_information(psi: &Statevector) -> Result<MutualInfoMatrix> {
    let n = psi.n_qubits();
    if n > MAX_FCI_QUBITS {
        return Err(Error::Scale {
            n_qubits: n,
            limit: MAX_FCI_QUBITS,
        });
    }
    let single: Vec<f64> = (0..n)
        .into_par_iter()
        .map(|i| reduced_density_matrix(psi, &[i]).map(|r| von_neumann_entropy(&r)))
        .collect::<Result<_>>()?;
    let pairs: Vec<(usize, usize)> = (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect();
    let pair_entropy: Vec<f64> = pairs
        .par_iter()
        .map(|&(i, j)| reduced_density_matrix(psi, &[i, j]).map(|r| von_neumann_entropy(&r)))
        .collect::<Result<_>>()?;
    let mut values = vec![vec![0.0; n]; n];
    for (&(i, j), s_ij) in pairs.iter().zip(&pair_entropy) {
        let v = single[i] + single[j] - s_ij;
        values[i][j] = v;
        values[j][i] = v;
    }
    Ok(MutualInfoMatrix {
        n_qubits: n,
        values,
        single_entropies: single,
    })
}

/// Ground state expressed in the orbitals given as columns of `orbitals`
/// (in the basis of `ints`), found by diagonalizing the rotated Hamiltonian.
pub fn basis_change_state(ints: &SpatialIntegrals, orbitals: &DMatrix<f64>) -> Result<FciSolution> {
    let rotated = rotate_with_matrix(ints, &orbitals.transpose())?;
    fci_from_integrals(&rotated)
}
