//! Second-quantized spin-orbital Hamiltonians and their Jordan-Wigner images.
//!
//! Spin-orbital `p` (0 <= p < m) is the spin-up copy of spatial orbital `p`,
//! `p + m` the spin-down copy. Qubit `q` is bit `q` of a basis-state index and
//! carries spin-orbital `q`.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrals::SpatialIntegrals;
use crate::simulator::Statevector;

/// Coefficients below this magnitude are dropped from a [`PauliSum`].
pub const PRUNE_THRESHOLD: f64 = 1e-12;
/// Largest imaginary residue tolerated when collapsing JW coefficients to reals.
pub const IMAGINARY_TOLERANCE: f64 = 1e-10;

/// `constant + Σ one_body[(i,j)] a†_i a_j + ½ Σ two_body[(c,d,e,f)] a†_c a†_d a_e a_f`.
///
/// `two_body` stores the full `h_cdef`; the one-half prefactor is applied on
/// expansion.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FermionOperator {
    pub n_spin_orbitals: usize,
    pub constant: f64,
    pub one_body: BTreeMap<(usize, usize), f64>,
    pub two_body: BTreeMap<[usize; 4], f64>,
}

impl FermionOperator {
    pub fn new(n_spin_orbitals: usize) -> Self {
        Self {
            n_spin_orbitals,
            ..Default::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        self.constant == 0.0 && self.one_body.is_empty() && self.two_body.is_empty()
    }

    /// Term-wise `alpha * self + beta * other`.
    pub fn linear_combination(&self, alpha: f64, other: &FermionOperator, beta: f64) -> Self {
        let mut out = FermionOperator::new(self.n_spin_orbitals.max(other.n_spin_orbitals));
        out.constant = alpha * self.constant + beta * other.constant;
        for (&k, &v) in &self.one_body {
            *out.one_body.entry(k).or_default() += alpha * v;
        }
        for (&k, &v) in &other.one_body {
            *out.one_body.entry(k).or_default() += beta * v;
        }
        for (&k, &v) in &self.two_body {
            *out.two_body.entry(k).or_default() += alpha * v;
        }
        for (&k, &v) in &other.two_body {
            *out.two_body.entry(k).or_default() += beta * v;
        }
        out
    }
}

/// Lifts spatial integrals to spin orbitals (core energy excluded).
pub fn spatial_to_spin_hamiltonian(ints: &SpatialIntegrals) -> FermionOperator {
    let m = ints.n_orbitals();
    let mut op = FermionOperator::new(2 * m);
    for sigma in 0..2 {
        for p in 0..m {
            for q in 0..m {
                let v = ints.h1[(p, q)];
                if v != 0.0 {
                    op.one_body.insert((p + sigma * m, q + sigma * m), v);
                }
            }
        }
    }
    // a†_c a†_d a_e a_f with h_cdef = (cf|de), spins of (c,f) and (d,e) matched.
    for s1 in 0..2 {
        for s2 in 0..2 {
            for c in 0..m {
                for d in 0..m {
                    for e in 0..m {
                        for f in 0..m {
                            let v = ints.h2.get(c, f, d, e);
                            if v == 0.0 {
                                continue;
                            }
                            let (sc, sd, se, sf) = (c + s1 * m, d + s2 * m, e + s2 * m, f + s1 * m);
                            if sc == sd || se == sf {
                                continue;
                            }
                            op.two_body.insert([sc, sd, se, sf], v);
                        }
                    }
                }
            }
        }
    }
    op
}

/// A tensor product of single-qubit Paulis. Bit `q` of `x`/`z` marks an X/Z on
/// qubit `q`; both set means Y.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        assert!(n_qubits <= 64, "at most 64 qubits");
        Self { n_qubits, x: 0, z: 0 }
    }

    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Self {
        assert!(n_qubits <= 64, "at most 64 qubits");
        let mask = if n_qubits == 64 { u64::MAX } else { (1u64 << n_qubits) - 1 };
        assert!(x & !mask == 0 && z & !mask == 0, "Pauli masks exceed register");
        Self { n_qubits, x, z }
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn letter(&self, q: usize) -> char {
        match ((self.x >> q) & 1, (self.z >> q) & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (1, 1) => 'Y',
            _ => 'Z',
        }
    }

    pub fn n_y(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Action on a basis state: `P|b⟩ = phase · |b ⊕ x⟩`.
    #[inline]
    pub fn apply_to_basis(&self, b: u64) -> (u64, Complex64) {
        let sign = if (b & self.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
        (b ^ self.x, i_power(self.n_y()) * sign)
    }
}

/// Qubit 0 is the leftmost character.
impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits {
            write!(f, "{}", self.letter(q))?;
        }
        Ok(())
    }
}

impl FromStr for PauliString {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let n = s.chars().count();
        if n > 64 {
            return Err(Error::Unsupported("Pauli strings longer than 64 qubits".into()));
        }
        let (mut x, mut z) = (0u64, 0u64);
        for (q, c) in s.chars().enumerate() {
            match c {
                'I' => {}
                'X' => x |= 1 << q,
                'Y' => {
                    x |= 1 << q;
                    z |= 1 << q
                }
                'Z' => z |= 1 << q,
                other => {
                    return Err(Error::Parse {
                        line: 0,
                        message: format!("invalid Pauli letter '{other}'"),
                    })
                }
            }
        }
        Ok(Self { n_qubits: n, x, z })
    }
}

#[inline]
pub(crate) fn i_power(k: u32) -> Complex64 {
    match k % 4 {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Real-weighted sum of Pauli strings, sorted, without duplicates.
#[derive(Debug, Clone, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: Vec<(PauliString, f64)>,
}

#[derive(Serialize, Deserialize)]
struct JsonTerm {
    string: String,
    coeff: f64,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        Self {
            n_qubits,
            terms: Vec::new(),
        }
    }

    /// Merges duplicate strings and prunes small coefficients.
    pub fn from_terms(n_qubits: usize, terms: impl IntoIterator<Item = (PauliString, f64)>) -> Result<Self> {
        let mut merged: BTreeMap<PauliString, f64> = BTreeMap::new();
        for (p, c) in terms {
            if p.n_qubits() != n_qubits {
                return Err(Error::Dimension {
                    expected: n_qubits,
                    found: p.n_qubits(),
                });
            }
            *merged.entry(p).or_default() += c;
        }
        Ok(Self {
            n_qubits,
            terms: merged
                .into_iter()
                .filter(|(_, c)| c.abs() >= PRUNE_THRESHOLD)
                .collect(),
        })
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(PauliString, f64)] {
        &self.terms
    }

    pub fn coefficient(&self, p: &PauliString) -> f64 {
        self.terms
            .binary_search_by(|(q, _)| q.cmp(p))
            .map(|i| self.terms[i].1)
            .unwrap_or(0.0)
    }

    /// Adds `shift * I`.
    pub fn shifted(&self, shift: f64) -> Self {
        let mut terms = self.terms.clone();
        terms.push((PauliString::identity(self.n_qubits), shift));
        Self::from_terms(self.n_qubits, terms).expect("same register")
    }

    pub fn linear_combination(&self, alpha: f64, other: &PauliSum, beta: f64) -> Result<Self> {
        if self.n_qubits != other.n_qubits {
            return Err(Error::Dimension {
                expected: self.n_qubits,
                found: other.n_qubits,
            });
        }
        let terms = self
            .terms
            .iter()
            .map(|&(p, c)| (p, alpha * c))
            .chain(other.terms.iter().map(|&(p, c)| (p, beta * c)));
        Self::from_terms(self.n_qubits, terms)
    }

    pub fn to_json(&self) -> String {
        let list: Vec<JsonTerm> = self
            .terms
            .iter()
            .map(|(p, c)| JsonTerm {
                string: p.to_string(),
                coeff: *c,
            })
            .collect();
        serde_json::to_string_pretty(&list).expect("plain data serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let list: Vec<JsonTerm> = serde_json::from_str(text)?;
        let Some(first) = list.first() else {
            return Ok(Self::zero(0));
        };
        let n = first.string.chars().count();
        let terms: Result<Vec<_>> = list
            .iter()
            .map(|t| Ok((t.string.parse::<PauliString>()?, t.coeff)))
            .collect();
        Self::from_terms(n, terms?)
    }

    /// Dense matrix, for small registers only.
    pub fn dense_matrix(&self) -> nalgebra::DMatrix<Complex64> {
        assert!(self.n_qubits <= 12, "dense matrices limited to 12 qubits");
        let dim = 1usize << self.n_qubits;
        let mut mat = nalgebra::DMatrix::zeros(dim, dim);
        for (p, c) in &self.terms {
            for col in 0..dim {
                let (row, phase) = p.apply_to_basis(col as u64);
                mat[(row as usize, col)] += phase * *c;
            }
        }
        mat
    }
}

// Internal "xz form": coefficient times X^x Z^z (all X factors to the left).
type XzKey = (u64, u64);

fn xz_multiply(a: XzKey, b: XzKey) -> (XzKey, f64) {
    let sign = if (a.1 & b.0).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
    ((a.0 ^ b.0, a.1 ^ b.1), sign)
}

/// Two-term expansion of a ladder operator on spin-orbital `p`.
fn ladder_xz(p: usize, dagger: bool) -> [(XzKey, f64); 2] {
    let chain = (1u64 << p) - 1;
    let bit = 1u64 << p;
    // a = (X - XZ)/2, a† = (X + XZ)/2 on qubit p, times the Z chain below p.
    let s = if dagger { 0.5 } else { -0.5 };
    [((bit, chain), 0.5), ((bit, chain | bit), s)]
}

fn expand_monomial(ops: &[(usize, bool)], coeff: f64, acc: &mut HashMap<XzKey, f64>, order: &mut Vec<XzKey>) {
    let mut product: Vec<(XzKey, f64)> = vec![((0, 0), coeff)];
    for &(p, dagger) in ops {
        let factors = ladder_xz(p, dagger);
        let mut next = Vec::with_capacity(product.len() * 2);
        for &(k, c) in &product {
            for &(fk, fc) in &factors {
                let (key, sign) = xz_multiply(k, fk);
                next.push((key, c * fc * sign));
            }
        }
        product = next;
    }
    for (key, c) in product {
        match acc.get_mut(&key) {
            Some(v) => *v += c,
            None => {
                acc.insert(key, c);
                order.push(key);
            }
        }
    }
}

/// Jordan-Wigner image of a fermionic operator.
pub fn jordan_wigner(op: &FermionOperator, n_spin_orbitals: usize) -> Result<PauliSum> {
    if n_spin_orbitals > 64 {
        return Err(Error::Unsupported("more than 64 spin orbitals".into()));
    }
    let check = |i: usize| -> Result<()> {
        if i >= n_spin_orbitals {
            Err(Error::BadIndex(format!(
                "spin-orbital {i} outside register of {n_spin_orbitals}"
            )))
        } else {
            Ok(())
        }
    };
    // xz-form coefficients are real: every ladder factor is real in that form.
    let mut acc: HashMap<XzKey, f64> = HashMap::new();
    let mut order = Vec::new();
    if op.constant != 0.0 {
        expand_monomial(&[], op.constant, &mut acc, &mut order);
    }
    for (&(i, j), &v) in &op.one_body {
        check(i)?;
        check(j)?;
        expand_monomial(&[(i, true), (j, false)], v, &mut acc, &mut order);
    }
    for (&[c, d, e, f], &v) in &op.two_body {
        for i in [c, d, e, f] {
            check(i)?;
        }
        expand_monomial(&[(c, true), (d, true), (e, false), (f, false)], 0.5 * v, &mut acc, &mut order);
    }

    // The xz key and the letter string are in bijection, so `acc` is already merged.
    let mut terms = Vec::with_capacity(order.len());
    let mut residue = 0.0f64;
    for key in order {
        let c = acc[&key];
        // X^x Z^z = (-i)^{#Y} · (letter string)
        let n_y = (key.0 & key.1).count_ones();
        let coeff = i_power((4 - n_y % 4) % 4) * c;
        residue = residue.max(coeff.im.abs());
        terms.push((PauliString::from_masks(n_spin_orbitals, key.0, key.1), coeff.re));
    }
    if residue > IMAGINARY_TOLERANCE {
        return Err(Error::Encoding(residue));
    }
    let sum = PauliSum::from_terms(n_spin_orbitals, terms)?;
    Ok(sum)
}

/// Qubit Hamiltonian of spatial integrals; core energy added when `include_core`.
pub fn qubit_hamiltonian(ints: &SpatialIntegrals, include_core: bool) -> Result<PauliSum> {
    let mut op = spatial_to_spin_hamiltonian(ints);
    if include_core {
        op.constant = ints.core_energy;
    }
    jordan_wigner(&op, ints.n_spin_orbitals())
}

/// `Σ_k c_k ⟨ψ|P_k|ψ⟩`, evaluated term by term.
pub fn pauli_expectation(h: &PauliSum, psi: &Statevector) -> Result<f64> {
    if h.n_qubits() != psi.n_qubits() {
        return Err(Error::Dimension {
            expected: h.n_qubits(),
            found: psi.n_qubits(),
        });
    }
    let amps = psi.amplitudes();
    let per_term: Vec<f64> = h
        .terms()
        .par_iter()
        .map(|(p, c)| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (b, a) in amps.iter().enumerate() {
                let (target, phase) = p.apply_to_basis(b as u64);
                acc += amps[target as usize].conj() * phase * a;
            }
            c * acc.re
        })
        .collect();
    Ok(per_term.iter().sum())
}
