//! Central finite differences of the rotated integrals and of the fixed-state
//! energy, with one Richardson refinement.

use nalgebra::{DMatrix, DVector};
use wahtor_core::integrals::SpatialIntegrals;
use wahtor_core::rotation::{derivatives_at_zero, rotate_integrals, GeneratorSet};
use wahtor_core::wahtor::{energy_gradient_hessian, FixedState};

pub const STEP: f64 = 1e-4;
/// Second differences lose ~ε/h² to roundoff, so they use a wider step.
pub const SECOND_STEP: f64 = 1e-3;

/// `h1` followed by `h2`, flattened.
pub fn flatten(ints: &SpatialIntegrals) -> DVector<f64> {
    DVector::from_iterator(
        ints.h1.len() + ints.h2.as_slice().len(),
        ints.h1.iter().copied().chain(ints.h2.as_slice().iter().copied()),
    )
}

fn rotated(ints: &SpatialIntegrals, g: &GeneratorSet, r: &[f64]) -> DVector<f64> {
    flatten(&rotate_integrals(ints, g, r).unwrap())
}

fn unit(n: usize, pairs: &[(usize, f64)]) -> Vec<f64> {
    let mut v = vec![0.0; n];
    for &(i, x) in pairs {
        v[i] += x;
    }
    v
}

fn first(f: &dyn Fn(&[f64]) -> DVector<f64>, n: usize, l: usize, h: f64) -> DVector<f64> {
    (f(&unit(n, &[(l, h)])) - f(&unit(n, &[(l, -h)]))) / (2.0 * h)
}

fn second(f: &dyn Fn(&[f64]) -> DVector<f64>, n: usize, a: usize, b: usize, h: f64) -> DVector<f64> {
    if a == b {
        (f(&unit(n, &[(a, h)])) - f(&vec![0.0; n]) * 2.0 + f(&unit(n, &[(a, -h)]))) / (h * h)
    } else {
        (f(&unit(n, &[(a, h), (b, h)])) - f(&unit(n, &[(a, h), (b, -h)])) - f(&unit(n, &[(a, -h), (b, h)]))
            + f(&unit(n, &[(a, -h), (b, -h)])))
            / (4.0 * h * h)
    }
}

fn richardson(step: f64, d: impl Fn(f64) -> DVector<f64>) -> DVector<f64> {
    let coarse = d(step);
    let fine = d(step / 2.0);
    (fine * 4.0 - coarse) / 3.0
}

pub fn relative(analytic: &DVector<f64>, numeric: &DVector<f64>) -> f64 {
    let scale = analytic.norm().max(numeric.norm());
    if scale < 1e-12 {
        (analytic - numeric).norm()
    } else {
        (analytic - numeric).norm() / scale
    }
}

#[derive(Debug, Default, Clone, Copy)]
pub struct DerivativeErrors {
    pub grad_integrals: f64,
    pub hess_integrals: f64,
    pub grad_energy: f64,
    pub hess_energy: f64,
    pub hess_asymmetry: f64,
}

impl DerivativeErrors {
    pub fn worst(&self) -> f64 {
        self.grad_integrals
            .max(self.hess_integrals)
            .max(self.grad_energy)
            .max(self.hess_energy)
    }
}

/// Worst relative deviation between analytic and finite-difference
/// derivatives over every generator (pair).
pub fn derivative_errors(ints: &SpatialIntegrals, g: &GeneratorSet, state: &FixedState) -> DerivativeErrors {
    let n = g.len();
    let d = derivatives_at_zero(ints, g);
    let f = |r: &[f64]| rotated(ints, g, r);
    let e = |r: &[f64]| DVector::from_element(1, state.energy(&rotate_integrals(ints, g, r).unwrap()));
    let pack = |h1: &DMatrix<f64>, h2: &wahtor_core::integrals::Tensor4| {
        DVector::from_iterator(h1.len() + h2.as_slice().len(), h1.iter().copied().chain(h2.as_slice().iter().copied()))
    };
    let (grad, hess) = energy_gradient_hessian(state, ints, g);
    let mut out = DerivativeErrors::default();
    let mut num_grad = DVector::zeros(n);
    let mut num_hess = DVector::zeros(n * n);
    for a in 0..n {
        let num = richardson(STEP, |h| first(&f, n, a, h));
        out.grad_integrals = out.grad_integrals.max(relative(&pack(&d.grad_h1[a], &d.grad_h2[a]), &num));
        num_grad[a] = richardson(STEP, |h| first(&e, n, a, h))[0];
        for b in 0..n {
            let num = richardson(SECOND_STEP, |h| second(&f, n, a, b, h));
            out.hess_integrals = out.hess_integrals.max(relative(&pack(&d.hess_h1[a][b], &d.hess_h2[a][b]), &num));
            num_hess[a * n + b] = richardson(SECOND_STEP, |h| second(&e, n, a, b, h))[0];
            out.hess_asymmetry = out.hess_asymmetry.max((hess[(a, b)] - hess[(b, a)]).abs());
        }
    }
    out.grad_energy = relative(&grad, &num_grad);
    let analytic_hess = DVector::from_iterator(n * n, (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| hess[(a, b)]));
    out.hess_energy = relative(&analytic_hess, &num_hess);
    out
}

/// Least-squares slope of `log ‖h1(εe_l) - second-order model‖` against
/// `log ε` over ε in 1e-1 … 1e-3.
pub fn taylor_slope(ints: &SpatialIntegrals, g: &GeneratorSet, l: usize) -> f64 {
    let d = derivatives_at_zero(ints, g);
    let eps: Vec<f64> = (0..=8).map(|k| 10f64.powf(-1.0 - 0.25 * k as f64)).collect();
    let points: Vec<(f64, f64)> = eps
        .iter()
        .map(|&e| {
            let r = unit(g.len(), &[(l, e)]);
            let h1 = rotate_integrals(ints, g, &r).unwrap().h1;
            let model = &ints.h1 + &d.grad_h1[l] * e + &d.hess_h1[l][l] * (0.5 * e * e);
            (e.ln(), (h1 - model).norm().ln())
        })
        .collect();
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let num: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    num / den
}

/// Every unordered pair of `m` orbitals.
pub fn full_generators(m: usize) -> GeneratorSet {
    let pairs = (0..m).flat_map(|p| (p + 1..m).map(move |q| (p, q))).collect();
    GeneratorSet::from_pairs(m, pairs).unwrap()
}

/// Half-filled ground state of an unrelated random Hamiltonian. Its RDMs have
/// real structure, so the energy surface is not flat and second differences
/// stay above roundoff (a dense random state is close to isotropic).
pub fn probe_state(m: usize, seed: u64) -> wahtor_core::simulator::Statevector {
    let ints = super::random_integrals(m, m, seed);
    wahtor_core::analysis::fci_from_integrals(&ints)
        .expect("probe FCI")
        .ground_vector
}
