#![allow(dead_code)]

use proctensor::instrument::{haar_unitary, Instrument};
use proctensor::linalg::{ComplexMatrix, C64};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn ginibre(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> ComplexMatrix {
    ComplexMatrix::from_fn(rows, cols, |_, _| C64::new(StandardNormal.sample(rng), StandardNormal.sample(rng)))
}

/// G G† / tr, full rank almost surely.
pub fn random_state(seed: u64, d: usize) -> ComplexMatrix {
    let mut r = rng(seed);
    let g = ginibre(&mut r, d, d);
    let m = g.matmul(&g.adjoint());
    let t = m.trace().re;
    m.scale(1.0 / t).hermitian_part()
}

/// Rank-`k` state, so supports are not always full.
pub fn random_state_rank(seed: u64, d: usize, k: usize) -> ComplexMatrix {
    let mut r = rng(seed);
    let g = ginibre(&mut r, d, k);
    let m = g.matmul(&g.adjoint());
    let t = m.trace().re;
    m.scale(1.0 / t).hermitian_part()
}

pub fn random_pure(seed: u64, d: usize) -> Vec<C64> {
    let mut r = rng(seed);
    let v: Vec<C64> = (0..d).map(|_| C64::new(StandardNormal.sample(&mut r), StandardNormal.sample(&mut r))).collect();
    let n = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    v.into_iter().map(|z| z / n).collect()
}

pub fn random_hermitian(seed: u64, d: usize) -> ComplexMatrix {
    let mut r = rng(seed);
    ginibre(&mut r, d, d).hermitian_part()
}

pub fn random_unitary(seed: u64, d: usize) -> ComplexMatrix {
    haar_unitary(&mut rng(seed), d)
}

/// Projective measurement onto the columns of a Haar unitary.
pub fn random_basis_measurement(seed: u64, d: usize) -> Instrument {
    let u = random_unitary(seed, d);
    let els = (0..d)
        .map(|k| {
            let c = u.column(k);
            ComplexMatrix::outer(&c, &c)
        })
        .collect();
    Instrument::new(d, els).unwrap()
}

/// Two-outcome unsharp POVM {A, 1 − A} with 0 ≤ A ≤ 1.
pub fn random_binary_povm(seed: u64, d: usize) -> Instrument {
    let u = random_unitary(seed, d);
    let mut r = rng(seed ^ 0x5eed);
    let w: Vec<f64> = (0..d).map(|_| rand::Rng::random::<f64>(&mut r)).collect();
    let a = u.matmul(&ComplexMatrix::diag(&w)).matmul(&u.adjoint()).hermitian_part();
    let b = (&ComplexMatrix::identity(d) - &a).hermitian_part();
    Instrument::new(d, vec![a, b]).unwrap()
}
