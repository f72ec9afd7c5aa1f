//! Symmetry-restricted real orbital rotations and their action on integrals.
//!
//! A rotation is `U = exp(Σ_l r_l A_l)` with real antisymmetric pair
//! generators `A_l`. Integrals transform as `h1 → U h1 Uᵀ` and each index of
//! `(pq|rs)` is contracted with `U`. Row `p` of `U` holds the coefficients of
//! new orbital `p` in the old basis.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::integrals::{SpatialIntegrals, SymmetryGroups, Tensor4};

/// One antisymmetric generator per within-group orbital pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeneratorSet {
    m: usize,
    /// 0-based `(p, q)` with `p < q`; generator has `+1` at `(p,q)`, `-1` at `(q,p)`.
    pairs: Vec<(usize, usize)>,
}

impl GeneratorSet {
    pub fn empty(m: usize) -> Self {
        Self { m, pairs: Vec::new() }
    }

    pub fn from_pairs(m: usize, pairs: Vec<(usize, usize)>) -> Result<Self> {
        for &(p, q) in &pairs {
            if p >= q || q >= m {
                return Err(Error::BadIndex(format!("generator pair ({p}, {q}) for {m} orbitals")));
            }
        }
        Ok(Self { m, pairs })
    }

    pub fn n_orbitals(&self) -> usize {
        self.m
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    pub fn generator(&self, l: usize) -> DMatrix<f64> {
        let (p, q) = self.pairs[l];
        let mut a = DMatrix::zeros(self.m, self.m);
        a[(p, q)] = 1.0;
        a[(q, p)] = -1.0;
        a
    }

    /// `Σ_l r_l A_l`.
    pub fn combine(&self, r: &[f64]) -> Result<DMatrix<f64>> {
        if r.len() != self.len() {
            return Err(Error::Dimension {
                expected: self.len(),
                found: r.len(),
            });
        }
        let mut x = DMatrix::zeros(self.m, self.m);
        for (&(p, q), &v) in self.pairs.iter().zip(r) {
            x[(p, q)] += v;
            x[(q, p)] -= v;
        }
        Ok(x)
    }

    /// `U(r) = exp(Σ_l r_l A_l)`.
    pub fn rotation_matrix(&self, r: &[f64]) -> Result<DMatrix<f64>> {
        let u = self.combine(r)?.exp();
        if u.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical("non-finite matrix exponential".into()));
        }
        Ok(u)
    }
}

/// Generators ordered by group, then lexicographically by pair.
pub fn build_generators(groups: &SymmetryGroups, m: usize) -> GeneratorSet {
    let mut pairs = Vec::new();
    for group in groups.rotatable() {
        let mut members = group;
        members.sort_unstable();
        for (i, &p) in members.iter().enumerate() {
            for &q in &members[i + 1..] {
                pairs.push((p, q));
            }
        }
    }
    GeneratorSet { m, pairs }
}

/// `out[.., i, ..] = Σ_a u[i][a] t[.., a, ..]` along `axis`.
fn contract_axis(t: &Tensor4, u: &DMatrix<f64>, axis: usize) -> Tensor4 {
    let m = t.dim();
    let mut out = Tensor4::zeros(m);
    let mut idx = [0usize; 4];
    for p in 0..m {
        for q in 0..m {
            for r in 0..m {
                for s in 0..m {
                    let target = [p, q, r, s];
                    let mut acc = 0.0;
                    for a in 0..m {
                        let w = u[(target[axis], a)];
                        if w == 0.0 {
                            continue;
                        }
                        idx.copy_from_slice(&target);
                        idx[axis] = a;
                        acc += w * t.get(idx[0], idx[1], idx[2], idx[3]);
                    }
                    out.set(p, q, r, s, acc);
                }
            }
        }
    }
    out
}

/// `(pq|rs) → Σ U_pa U_qb U_rc U_sd (ab|cd)` as four single-index passes.
pub fn transform_two_body(h2: &Tensor4, u: &DMatrix<f64>) -> Tensor4 {
    (0..4).fold(h2.clone(), |t, axis| contract_axis(&t, u, axis))
}

/// Applies an explicit orthogonal `U` (rows are new orbitals in the old basis).
pub fn rotate_with_matrix(ints: &SpatialIntegrals, u: &DMatrix<f64>) -> Result<SpatialIntegrals> {
    let m = ints.n_orbitals();
    if u.nrows() != m || u.ncols() != m {
        return Err(Error::Dimension {
            expected: m,
            found: u.nrows(),
        });
    }
    let mut out = ints.clone();
    out.h1 = u * &ints.h1 * u.transpose();
    // Restore exact symmetry lost to rounding.
    out.h1 = (&out.h1 + out.h1.transpose()) * 0.5;
    out.h2 = transform_two_body(&ints.h2, u);
    symmetrize_eightfold(&mut out.h2);
    if !out.is_finite() {
        return Err(Error::Numerical("rotated integrals are not finite".into()));
    }
    Ok(out)
}

/// Averages every 8-fold image class in place.
pub fn symmetrize_eightfold(t: &mut Tensor4) {
    let m = t.dim();
    for p in 0..m {
        for q in 0..=p {
            for r in 0..m {
                for s in 0..=r {
                    if p * (p + 1) / 2 + q < r * (r + 1) / 2 + s {
                        continue;
                    }
                    let images = crate::integrals::eightfold_images(p, q, r, s);
                    let mean = images.iter().map(|i| t.get(i[0], i[1], i[2], i[3])).sum::<f64>() / 8.0;
                    t.set_symmetric(p, q, r, s, mean);
                }
            }
        }
    }
}

pub fn rotate_integrals(ints: &SpatialIntegrals, g: &GeneratorSet, r: &[f64]) -> Result<SpatialIntegrals> {
    if g.n_orbitals() != ints.n_orbitals() {
        return Err(Error::Dimension {
            expected: ints.n_orbitals(),
            found: g.n_orbitals(),
        });
    }
    let u = g.rotation_matrix(r)?;
    rotate_with_matrix(ints, &u)
}

/// `[A, h1] = A h1 - h1 A`.
pub fn commutator_one_body(a: &DMatrix<f64>, h1: &DMatrix<f64>) -> DMatrix<f64> {
    a * h1 - h1 * a
}

/// `A` acting on every index of a chemist-notation tensor: the derivative of
/// the four-index transform along `exp(tA)` at `t = 0`.
pub fn lift_two_body(a: &DMatrix<f64>, h2: &Tensor4) -> Tensor4 {
    let m = h2.dim();
    let mut out = Tensor4::zeros(m);
    let nz: Vec<(usize, usize, f64)> = (0..m)
        .flat_map(|i| (0..m).map(move |j| (i, j)))
        .filter(|&(i, j)| a[(i, j)] != 0.0).map(|(i, j)| (i, j, a[(i, j)]))
        .collect();
    for p in 0..m {
        for q in 0..m {
            for r in 0..m {
                for s in 0..m {
                    let mut acc = 0.0;
                    for &(i, j, w) in &nz {
                        if i == p {
                            acc += w * h2.get(j, q, r, s);
                        }
                        if i == q {
                            acc += w * h2.get(p, j, r, s);
                        }
                        if i == r {
                            acc += w * h2.get(p, q, j, s);
                        }
                        if i == s {
                            acc += w * h2.get(p, q, r, j);
                        }
                    }
                    out.set(p, q, r, s, acc);
                }
            }
        }
    }
    out
}

/// First and second derivatives of the integrals with respect to the rotation
/// parameters, at `r = 0`.
#[derive(Debug, Clone)]
pub struct RotationDerivatives {
    pub grad_h1: Vec<DMatrix<f64>>,
    pub grad_h2: Vec<Tensor4>,
    /// `hess_h1[a][b]`, symmetric in `(a, b)`.
    pub hess_h1: Vec<Vec<DMatrix<f64>>>,
    pub hess_h2: Vec<Vec<Tensor4>>,
}

pub fn derivatives_at_zero(ints: &SpatialIntegrals, g: &GeneratorSet) -> RotationDerivatives {
    let n = g.len();
    let gens: Vec<DMatrix<f64>> = (0..n).map(|l| g.generator(l)).collect();
    let grad_h1: Vec<DMatrix<f64>> = gens.iter().map(|a| commutator_one_body(a, &ints.h1)).collect();
    let grad_h2: Vec<Tensor4> = gens.iter().map(|a| lift_two_body(a, &ints.h2)).collect();

    let mut hess_h1 = vec![vec![DMatrix::zeros(0, 0); n]; n];
    let mut hess_h2 = vec![vec![Tensor4::zeros(0); n]; n];
    for a in 0..n {
        for b in a..n {
            let one = (commutator_one_body(&gens[a], &grad_h1[b]) + commutator_one_body(&gens[b], &grad_h1[a])) * 0.5;
            let mut two = lift_two_body(&gens[a], &grad_h2[b]);
            two.axpy(1.0, &lift_two_body(&gens[b], &grad_h2[a]));
            two.scale(0.5);
            hess_h1[a][b] = one.clone();
            hess_h1[b][a] = one;
            hess_h2[a][b] = two.clone();
            hess_h2[b][a] = two;
        }
    }
    RotationDerivatives {
        grad_h1,
        grad_h2,
        hess_h1,
        hess_h2,
    }
}

/// Re-orthonormalizes the columns of `c` (modified Gram-Schmidt) when
/// `‖CᵀC - I‖_max` exceeds `tol`. Returns the drift observed before the fix.
pub fn reorthonormalize(c: &mut DMatrix<f64>, tol: f64) -> f64 {
    let drift = orthogonality_error(c);
    if drift > tol {
        let n = c.ncols();
        for j in 0..n {
            for k in 0..j {
                let proj = c.column(k).dot(&c.column(j));
                let ck = c.column(k).clone_owned();
                let mut cj = c.column_mut(j);
                cj -= ck * proj;
            }
            let norm = c.column(j).norm();
            c.column_mut(j).unscale_mut(norm);
        }
    }
    drift
}

/// `max |UᵀU - I|`.
pub fn orthogonality_error(u: &DMatrix<f64>) -> f64 {
    let n = u.ncols();
    let gram = u.transpose() * u;
    (gram - DMatrix::<f64>::identity(n, n)).abs().max()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn groups(g: &[&[usize]]) -> SymmetryGroups {
        SymmetryGroups::new(g.iter().map(|v| v.to_vec()).collect())
    }

    #[test]
    fn generator_counts() {
        assert_eq!(build_generators(&groups(&[&[1, 3, 5], &[2, 6]]), 6).len(), 4);
        assert_eq!(build_generators(&groups(&[&[1, 4, 5], &[2, 6], &[3, 7]]), 7).len(), 5);
        assert_eq!(build_generators(&groups(&[&[1], &[2], &[3]]), 3).len(), 0);
        let h2 = build_generators(&groups(&[&[1, 3], &[2, 4]]), 4);
        assert_eq!(h2.pairs(), &[(0, 2), (1, 3)]);
    }

    #[test]
    fn generators_are_antisymmetric_pairs() {
        let g = build_generators(&groups(&[&[5, 1, 3]]), 6);
        assert_eq!(g.pairs(), &[(0, 2), (0, 4), (2, 4)]);
        for l in 0..g.len() {
            let a = g.generator(l);
            assert_eq!(&a + a.transpose(), DMatrix::zeros(6, 6));
            assert_eq!(a.iter().filter(|v| **v != 0.0).count(), 2);
        }
    }

    #[test]
    fn diagonal_h1_gradient() {
        // A on (p,q) with diagonal h1: [A,h1] has (p,q) = h_qq - h_pp.
        let g = GeneratorSet::from_pairs(3, vec![(0, 2)]).unwrap();
        let h1 = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![-1.0, 0.3, 0.5]));
        let grad = commutator_one_body(&g.generator(0), &h1);
        assert!((grad[(0, 2)] - 1.5).abs() < 1e-15);
        assert!((grad[(2, 0)] - 1.5).abs() < 1e-15);
        assert_eq!(grad.iter().filter(|v| **v != 0.0).count(), 2);
    }

    #[test]
    fn commuting_generator_has_zero_gradient() {
        let g = GeneratorSet::from_pairs(2, vec![(0, 1)]).unwrap();
        let h1 = DMatrix::identity(2, 2) * 0.7;
        assert_eq!(commutator_one_body(&g.generator(0), &h1), DMatrix::zeros(2, 2));
    }

    #[test]
    fn zero_rotation_is_identity() {
        let g = GeneratorSet::from_pairs(3, vec![(0, 1), (1, 2)]).unwrap();
        let u = g.rotation_matrix(&[0.0, 0.0]).unwrap();
        assert_eq!(u, DMatrix::identity(3, 3));
        assert!(g.rotation_matrix(&[0.0]).is_err());
        assert!(GeneratorSet::from_pairs(3, vec![(1, 1)]).is_err());
    }

    #[test]
    fn gram_schmidt_restores_orthogonality() {
        let g = GeneratorSet::from_pairs(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let mut u = g.rotation_matrix(&[0.4, -1.1, 2.0]).unwrap();
        u[(0, 0)] += 1e-6;
        let drift = reorthonormalize(&mut u, 1e-9);
        assert!(drift > 1e-9);
        assert!(orthogonality_error(&u) < 1e-14);
    }
}
