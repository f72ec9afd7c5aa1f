#![allow(dead_code)]

use std::path::PathBuf;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wahtor_core::integrals::{MoleculeMetadata, SpatialIntegrals, Tensor4};

pub const MOLECULES: [&str; 7] = ["h2", "lih", "hf", "beh2", "h2o", "h2s", "nh3"];

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn load(mol: &str) -> (SpatialIntegrals, MoleculeMetadata) {
    let dir = data_dir();
    let ints = SpatialIntegrals::from_path(dir.join(format!("{mol}.fcidump"))).unwrap();
    let meta = MoleculeMetadata::from_path(dir.join(format!("{mol}.json"))).unwrap();
    (ints, meta)
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random real integrals with full 8-fold symmetry.
pub fn random_integrals(m: usize, n_electrons: usize, seed: u64) -> SpatialIntegrals {
    let mut r = rng(seed);
    let mut h1 = DMatrix::zeros(m, m);
    for p in 0..m {
        for q in 0..=p {
            let v = r.random_range(-1.0..1.0) - if p == q { 2.0 / (p + 1) as f64 } else { 0.0 };
            h1[(p, q)] = v;
            h1[(q, p)] = v;
        }
    }
    let mut h2 = Tensor4::zeros(m);
    for p in 0..m {
        for q in 0..=p {
            for s in 0..m {
                for t in 0..=s {
                    if p * (p + 1) / 2 + q < s * (s + 1) / 2 + t {
                        continue;
                    }
                    let diag = if p == q && s == t { 0.5 } else { 0.0 };
                    h2.set_symmetric(p, q, s, t, diag + 0.2 * r.random_range(-1.0..1.0));
                }
            }
        }
    }
    SpatialIntegrals::new(n_electrons, r.random_range(-1.0..1.0), h1, h2).unwrap()
}

/// `a_p` or `a†_p` on a determinant; spin-orbital `p` is bit `p` and the
/// sign counts occupied orbitals with smaller index.
pub fn ladder(det: usize, p: usize, dagger: bool) -> Option<(usize, f64)> {
    let occupied = det >> p & 1 == 1;
    if occupied == dagger {
        return None;
    }
    let mut below = 0;
    for k in 0..p {
        below += det >> k & 1;
    }
    let sign = if below % 2 == 0 { 1.0 } else { -1.0 };
    Some((det ^ (1 << p), sign))
}

fn apply_string(det: usize, ops: &[(usize, bool)]) -> Option<(usize, f64)> {
    let mut state = det;
    let mut sign = 1.0;
    for &(p, dagger) in ops.iter().rev() {
        let (next, s) = ladder(state, p, dagger)?;
        state = next;
        sign *= s;
    }
    Some((state, sign))
}

/// Dense electronic Hamiltonian over the whole Fock space, assembled by a
/// naive loop over every spin-orbital index tuple.
pub fn naive_fock_hamiltonian(ints: &SpatialIntegrals) -> DMatrix<f64> {
    let m = ints.n_orbitals();
    let n = 2 * m;
    let dim = 1usize << n;
    let spatial = |i: usize| i % m;
    let spin = |i: usize| i / m;
    let mut h = DMatrix::zeros(dim, dim);
    for det in 0..dim {
        for i in 0..n {
            for j in 0..n {
                if spin(i) != spin(j) {
                    continue;
                }
                if let Some((out, s)) = apply_string(det, &[(i, true), (j, false)]) {
                    h[(out, det)] += s * ints.h1[(spatial(i), spatial(j))];
                }
            }
        }
        // ½ Σ (pq|rs) a†_p a†_r a_s a_q over spin orbitals
        for p in 0..n {
            for q in 0..n {
                if spin(p) != spin(q) {
                    continue;
                }
                for r in 0..n {
                    for s in 0..n {
                        if spin(r) != spin(s) {
                            continue;
                        }
                        let v = ints.h2.get(spatial(p), spatial(q), spatial(r), spatial(s));
                        if v == 0.0 {
                            continue;
                        }
                        if let Some((out, sg)) = apply_string(det, &[(p, true), (r, true), (s, false), (q, false)]) {
                            h[(out, det)] += 0.5 * sg * v;
                        }
                    }
                }
            }
        }
    }
    h
}

/// Lowest eigenpair of `h` restricted to determinants with `n` electrons.
pub fn sector_ground_state(h: &DMatrix<f64>, n: usize) -> (f64, Vec<f64>) {
    let basis: Vec<usize> = (0..h.nrows()).filter(|b| b.count_ones() as usize == n).collect();
    let sub = DMatrix::from_fn(basis.len(), basis.len(), |i, j| h[(basis[i], basis[j])]);
    let eig = sub.symmetric_eigen();
    let k = eig.eigenvalues.imin();
    let mut v = vec![0.0; h.nrows()];
    for (i, &b) in basis.iter().enumerate() {
        v[b] = eig.eigenvectors[(i, k)];
    }
    (eig.eigenvalues[k], v)
}

pub fn complex(v: &[f64]) -> Vec<Complex64> {
    v.iter().map(|x| Complex64::new(*x, 0.0)).collect()
}

pub fn random_state(n_qubits: usize, seed: u64) -> wahtor_core::simulator::Statevector {
    let mut r = rng(seed);
    let amps = (0..1usize << n_qubits)
        .map(|_| Complex64::new(r.random_range(-1.0..1.0), r.random_range(-1.0..1.0)))
        .collect();
    wahtor_core::simulator::Statevector::normalized(amps).unwrap()
}

pub mod fd;
