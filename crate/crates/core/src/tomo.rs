//! Simulated tomography: product-basis counts, linear-inversion reconstruction
//! with spectral projection, and bootstrap error bars.

use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{fidelity, hermitian_eig, kron_all, ComplexMatrix, C64, ZERO};
use crate::memory::quantum_cmi;
use crate::process::common_cause;

/// Rank cutoff relative to the largest frame-operator eigenvalue.
const RANK_TOL: f64 = 1e-10;

/// Orthonormal measurement basis on one leg.
#[derive(Debug, Clone, PartialEq)]
pub struct LegBasis {
    pub label: String,
    pub vectors: Vec<Vec<C64>>,
}

impl LegBasis {
    pub fn dim(&self) -> usize {
        self.vectors.len()
    }

    fn projectors(&self) -> Vec<ComplexMatrix> {
        self.vectors.iter().map(|v| ComplexMatrix::projector(v)).collect()
    }
}

fn unit(d: usize, k: usize) -> Vec<C64> {
    let mut v = vec![ZERO; d];
    v[k] = C64::new(1.0, 0.0);
    v
}

/// Basis with (|j⟩ ± e^{iφ}|k⟩)/√2 and the remaining computational states.
fn pair_basis(d: usize, j: usize, k: usize, phase: C64, label: String) -> LegBasis {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut plus = vec![ZERO; d];
    let mut minus = vec![ZERO; d];
    plus[j] = C64::new(s, 0.0);
    minus[j] = C64::new(s, 0.0);
    plus[k] = phase * s;
    minus[k] = -phase * s;
    let mut vectors = vec![plus, minus];
    vectors.extend((0..d).filter(|&l| l != j && l != k).map(|l| unit(d, l)));
    LegBasis { label, vectors }
}

/// Z plus X_jk and Y_jk for every level pair: 3 bases for a qubit, 7 for a qutrit.
pub fn pair_bases(d: usize) -> Vec<LegBasis> {
    let mut out = vec![LegBasis { label: "Z".into(), vectors: (0..d).map(|k| unit(d, k)).collect() }];
    let one = C64::new(1.0, 0.0);
    let i = C64::new(0.0, 1.0);
    for j in 0..d {
        for k in j + 1..d {
            let tag = if d == 2 { String::new() } else { format!("{j}{k}") };
            out.push(pair_basis(d, j, k, one, format!("X{tag}")));
            out.push(pair_basis(d, j, k, i, format!("Y{tag}")));
        }
    }
    out
}

/// Mutually unbiased bases for prime d: Z and v_{m,k}[j] = ω^{m j² + k j}/√d.
/// For d = 2 the quadratic phase degenerates, so the Pauli set is used.
pub fn mub_bases(d: usize) -> Result<Vec<LegBasis>> {
    if d == 2 {
        return Ok(pair_bases(2));
    }
    if d < 2 || (2..d).any(|q| d % q == 0) {
        return Err(Error::InvalidArgument(format!("mutually unbiased bases need a prime dimension, got {d}")));
    }
    let mut out = vec![LegBasis { label: "Z".into(), vectors: (0..d).map(|k| unit(d, k)).collect() }];
    let norm = 1.0 / (d as f64).sqrt();
    for m in 0..d {
        let vectors = (0..d)
            .map(|k| {
                (0..d)
                    .map(|j| {
                        let e = (m * j * j + k * j) % d;
                        C64::from_polar(norm, 2.0 * std::f64::consts::PI * e as f64 / d as f64)
                    })
                    .collect()
            })
            .collect();
        out.push(LegBasis { label: format!("M{m}"), vectors });
    }
    Ok(out)
}

/// Full product of per-leg bases.
#[derive(Debug, Clone, PartialEq)]
pub struct Settings {
    pub dims: Vec<usize>,
    pub per_leg: Vec<Vec<LegBasis>>,
}

impl Settings {
    /// Mutually unbiased bases on prime-dimensional legs, pair bases elsewhere.
    /// Pauli X, Y, Z on qubits; Z plus three Fourier-type bases on a qutrit.
    pub fn standard(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec(), per_leg: dims.iter().map(|&d| mub_bases(d).unwrap_or_else(|_| pair_bases(d))).collect() }
    }

    /// Pair bases on every leg (7 settings per qutrit).
    pub fn pairs(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec(), per_leg: dims.iter().map(|&d| pair_bases(d)).collect() }
    }

    /// Z-only settings; never informationally complete.
    pub fn computational(dims: &[usize]) -> Self {
        Self { dims: dims.to_vec(), per_leg: dims.iter().map(|&d| pair_bases(d)[..1].to_vec()).collect() }
    }

    /// The setting family whose labels cover a counts table: standard, then pairs.
    pub fn for_counts(counts: &CountsTable) -> Result<Self> {
        for s in [Self::standard(&counts.dims), Self::pairs(&counts.dims)] {
            if counts.labels.iter().all(|l| s.find(l).is_some()) {
                return Ok(s);
            }
        }
        Err(Error::InvalidArgument("counts table uses unknown setting labels".into()))
    }

    pub fn len(&self) -> usize {
        self.per_leg.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn outcomes(&self) -> usize {
        self.dims.iter().product()
    }

    /// Per-leg basis indices of setting `i`, first leg slowest.
    pub fn indices(&self, mut i: usize) -> Vec<usize> {
        let mut idx = vec![0; self.per_leg.len()];
        for (k, bases) in self.per_leg.iter().enumerate().rev() {
            idx[k] = i % bases.len();
            i /= bases.len();
        }
        idx
    }

    pub fn label(&self, i: usize) -> String {
        self.indices(i).iter().zip(&self.per_leg).map(|(&b, bases)| bases[b].label.as_str()).collect::<Vec<_>>().join(":")
    }

    fn find(&self, label: &str) -> Option<usize> {
        (0..self.len()).find(|&i| self.label(i) == label)
    }

    /// Born probabilities of every outcome of setting `i`.
    pub fn probabilities(&self, rho: &ComplexMatrix, i: usize) -> Vec<f64> {
        let idx = self.indices(i);
        let n = self.outcomes();
        (0..n)
            .map(|o| {
                let v = self.product_vector(&idx, o);
                let rv = rho.apply(&v);
                v.iter().zip(&rv).map(|(a, b)| a.conj() * b).sum::<C64>().re.max(0.0)
            })
            .collect()
    }

    fn outcome_digits(&self, mut o: usize) -> Vec<usize> {
        let mut digits = vec![0; self.dims.len()];
        for (k, &d) in self.dims.iter().enumerate().rev() {
            digits[k] = o % d;
            o /= d;
        }
        digits
    }

    fn product_vector(&self, idx: &[usize], o: usize) -> Vec<C64> {
        let digits = self.outcome_digits(o);
        let mut v = vec![C64::new(1.0, 0.0)];
        for ((bases, &b), &dgt) in self.per_leg.iter().zip(idx).zip(&digits) {
            let w = &bases[b].vectors[dgt];
            v = v.iter().flat_map(|a| w.iter().map(move |c| a * c)).collect();
        }
        v
    }
}

/// Counts per setting, outcomes in row-major leg order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountsTable {
    pub dims: Vec<usize>,
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl CountsTable {
    pub fn shots(&self, i: usize) -> u64 {
        self.counts[i].iter().sum()
    }

    pub fn total_shots(&self) -> u64 {
        (0..self.counts.len()).map(|i| self.shots(i)).sum()
    }

    /// `setting,outcome,count` with one row per outcome; outcome digits joined by `:`.
    pub fn to_csv(&self) -> String {
        let settings = Settings::pairs(&self.dims);
        let mut out = String::from("setting,outcome,count\n");
        for (label, row) in self.labels.iter().zip(&self.counts) {
            for (o, c) in row.iter().enumerate() {
                let digits = settings.outcome_digits(o).iter().map(|d| d.to_string()).collect::<Vec<_>>().join(":");
                let _ = writeln!(out, "{label},{digits},{c}");
            }
        }
        out
    }

    pub fn from_csv(dims: &[usize], text: &str) -> Result<Self> {
        let n: usize = dims.iter().product();
        let mut labels: Vec<String> = Vec::new();
        let mut counts: Vec<Vec<u64>> = Vec::new();
        for (line_no, line) in text.lines().enumerate().skip(1) {
            if line.trim().is_empty() {
                continue;
            }
            let bad = || Error::Serialization(format!("malformed counts row {}", line_no + 1));
            let mut parts = line.split(',');
            let (label, outcome, count) = (parts.next().ok_or_else(bad)?, parts.next().ok_or_else(bad)?, parts.next().ok_or_else(bad)?);
            let digits: Vec<usize> = outcome.split(':').map(|d| d.trim().parse().map_err(|_| bad())).collect::<Result<_>>()?;
            if digits.len() != dims.len() || digits.iter().zip(dims).any(|(d, m)| d >= m) {
                return Err(bad());
            }
            let o = digits.iter().zip(dims).fold(0, |acc, (d, m)| acc * m + d);
            let c: u64 = count.trim().parse().map_err(|_| bad())?;
            if labels.last().map(String::as_str) != Some(label) {
                labels.push(label.to_string());
                counts.push(vec![0; n]);
            }
            counts.last_mut().expect("row pushed")[o] = c;
        }
        Ok(Self { dims: dims.to_vec(), labels, counts })
    }
}

/// Splits `total` shots as evenly as possible, remainder to the first settings.
fn split_shots(total: u64, n: usize) -> Vec<u64> {
    let base = total / n as u64;
    let rem = (total % n as u64) as usize;
    (0..n).map(|i| base + u64::from(i < rem)).collect()
}

fn multinomial(rng: &mut ChaCha8Rng, n: u64, probs: &[f64]) -> Vec<u64> {
    let mut left = n;
    let mut mass = 1.0;
    let mut out = Vec::with_capacity(probs.len());
    for (k, &p) in probs.iter().enumerate() {
        if k + 1 == probs.len() {
            out.push(left);
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let c = if left == 0 || q == 0.0 { 0 } else { Binomial::new(left, q).expect("valid binomial").sample(rng) };
        out.push(c);
        left -= c;
        mass -= p;
    }
    out
}

/// Multinomial counts from Born probabilities, `total_shots` split over settings.
/// Setting `i` samples from its own ChaCha stream.
pub fn simulate_counts(gamma: &ComplexMatrix, settings: &Settings, total_shots: u64, seed: u64) -> Result<CountsTable> {
    let d = settings.outcomes();
    if gamma.rows() != d || gamma.cols() != d {
        return Err(Error::DimensionMismatch(format!("state is {}x{} but settings act on dimension {d}", gamma.rows(), gamma.cols())));
    }
    let shots = split_shots(total_shots, settings.len());
    let counts = (0..settings.len())
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            multinomial(&mut rng, shots[i], &settings.probabilities(gamma, i))
        })
        .collect();
    Ok(CountsTable { dims: settings.dims.clone(), labels: (0..settings.len()).map(|i| settings.label(i)).collect(), counts })
}

/// Canonical dual operators of one leg's basis projectors.
fn leg_duals(bases: &[LegBasis]) -> Result<Vec<Vec<ComplexMatrix>>> {
    let d = bases[0].dim();
    let projectors: Vec<Vec<ComplexMatrix>> = bases.iter().map(LegBasis::projectors).collect();
    // Frame operator S = Σ |P⟩⟩⟨⟨P| on vectorized operators.
    let mut s = ComplexMatrix::zeros(d * d, d * d);
    for p in projectors.iter().flatten() {
        let v = p.as_slice();
        s += &ComplexMatrix::outer(v, v);
    }
    let e = hermitian_eig(&s)?;
    let cutoff = e.max() * RANK_TOL;
    if e.values.iter().any(|&x| x <= cutoff) {
        return Err(Error::Incomplete);
    }
    let sinv = e.map(|x| 1.0 / x);
    Ok(projectors
        .iter()
        .map(|ps| ps.iter().map(|p| ComplexMatrix::from_vec(d, d, sinv.apply(p.as_slice())).expect("d×d")).collect())
        .collect())
}

/// Precomputed linear-inversion map for a setting family.
#[derive(Debug, Clone)]
pub struct Reconstructor {
    settings: Settings,
    duals: Vec<Vec<Vec<ComplexMatrix>>>,
}

impl Reconstructor {
    /// Fails with [`Error::Incomplete`] if any leg's bases are not informationally complete.
    pub fn new(settings: Settings) -> Result<Self> {
        let duals = settings.per_leg.iter().map(|b| leg_duals(b)).collect::<Result<_>>()?;
        Ok(Self { settings, duals })
    }

    pub fn settings(&self) -> &Settings {
        &self.settings
    }

    /// Least-squares estimate Σ_{s,o} f(o|s) ⊗_k D_k(s_k, o_k); Hermitian, unit trace, possibly not positive.
    pub fn linear(&self, freqs: &[Vec<f64>]) -> Result<ComplexMatrix> {
        if freqs.len() != self.settings.len() {
            return Err(Error::DimensionMismatch(format!("{} frequency rows for {} settings", freqs.len(), self.settings.len())));
        }
        let d = self.settings.outcomes();
        let mut acc = ComplexMatrix::zeros(d, d);
        for (i, row) in freqs.iter().enumerate() {
            let idx = self.settings.indices(i);
            for (o, &f) in row.iter().enumerate() {
                if f == 0.0 {
                    continue;
                }
                let digits = self.settings.outcome_digits(o);
                let factors: Vec<&ComplexMatrix> =
                    idx.iter().zip(&digits).enumerate().map(|(k, (&b, &dg))| &self.duals[k][b][dg]).collect();
                acc += &kron_all(factors).scale(f);
            }
        }
        Ok(acc.hermitian_part())
    }

    /// Linear inversion followed by projection onto density matrices.
    pub fn reconstruct_frequencies(&self, freqs: &[Vec<f64>]) -> Result<ComplexMatrix> {
        project_to_states(&self.linear(freqs)?)
    }

    pub fn reconstruct(&self, counts: &CountsTable) -> Result<ComplexMatrix> {
        let freqs = self.frequencies(counts)?;
        self.reconstruct_frequencies(&freqs)
    }

    fn frequencies(&self, counts: &CountsTable) -> Result<Vec<Vec<f64>>> {
        if counts.dims != self.settings.dims {
            return Err(Error::DimensionMismatch("counts table dimensions differ from the settings".into()));
        }
        let mut freqs = vec![vec![0.0; self.settings.outcomes()]; self.settings.len()];
        let mut seen = vec![false; self.settings.len()];
        for (label, row) in counts.labels.iter().zip(&counts.counts) {
            let i = self.settings.find(label).ok_or_else(|| Error::InvalidArgument(format!("unknown setting `{label}`")))?;
            let n: u64 = row.iter().sum();
            if n == 0 {
                return Err(Error::InvalidArgument(format!("setting `{label}` has no shots")));
            }
            freqs[i] = row.iter().map(|&c| c as f64 / n as f64).collect();
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Incomplete);
        }
        Ok(freqs)
    }
}

/// Euclidean projection of a vector onto the probability simplex.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.total_cmp(a));
    let mut css = 0.0;
    let mut theta = 0.0;
    for (k, &x) in u.iter().enumerate() {
        css += x;
        let t = (css - 1.0) / (k + 1) as f64;
        if x - t > 0.0 {
            theta = t;
        }
    }
    v.iter().map(|&x| (x - theta).max(0.0)).collect()
}

/// Closest density matrix in Frobenius norm: eigenvalues projected onto the simplex.
pub fn project_to_states(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    let e = hermitian_eig(&m.hermitian_part())?;
    let p = project_simplex(&e.values);
    let n = p.len();
    let v = &e.vectors;
    Ok(ComplexMatrix::from_fn(n, n, |i, j| (0..n).filter(|&k| p[k] > 0.0).map(|k| v[(i, k)] * v[(j, k)].conj() * p[k]).sum()))
}

/// Reconstruct with the standard settings for the table's dimensions.
pub fn reconstruct(counts: &CountsTable) -> Result<ComplexMatrix> {
    Reconstructor::new(Settings::for_counts(counts)?)?.reconstruct(counts)
}

/// Exact Born frequencies → state; the inverse of noiseless measurement.
pub fn reconstruct_from_frequencies(settings: &Settings, freqs: &[Vec<f64>]) -> Result<ComplexMatrix> {
    Reconstructor::new(settings.clone())?.reconstruct_frequencies(freqs)
}

/// Noiseless Born frequencies for every setting.
pub fn exact_frequencies(rho: &ComplexMatrix, settings: &Settings) -> Vec<Vec<f64>> {
    (0..settings.len()).map(|i| settings.probabilities(rho, i)).collect()
}

/// Statistics available to the bootstrap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Statistic {
    Trace,
    Purity,
    /// Relative entropy to the product of single-leg marginals (three legs).
    NonMarkovianity,
    /// I(A:C|B) (three legs).
    ConditionalMutualInformation,
    /// Uhlmann fidelity to a reference state.
    Fidelity(ComplexMatrix),
}

impl Statistic {
    pub fn by_name(name: &str, reference: Option<&ComplexMatrix>) -> Result<Self> {
        match name {
            "trace" => Ok(Self::Trace),
            "purity" => Ok(Self::Purity),
            "non-markovianity" => Ok(Self::NonMarkovianity),
            "cmi" => Ok(Self::ConditionalMutualInformation),
            "fidelity" => reference
                .map(|r| Self::Fidelity(r.clone()))
                .ok_or_else(|| Error::InvalidArgument("fidelity needs a reference state".into())),
            other => Err(Error::InvalidArgument(format!("unknown statistic `{other}`"))),
        }
    }

    pub fn evaluate(&self, rho: &ComplexMatrix, dims: &[usize]) -> Result<f64> {
        let three = || -> Result<[usize; 3]> {
            dims.try_into().map_err(|_| Error::DimensionMismatch("statistic needs three legs".into()))
        };
        match self {
            Self::Trace => Ok(rho.trace().re),
            Self::Purity => Ok(rho.trace_product(rho).re),
            Self::NonMarkovianity => common_cause::total_correlation(rho, three()?),
            Self::ConditionalMutualInformation => quantum_cmi(rho, three()?),
            Self::Fidelity(r) => fidelity(rho, r),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct BootstrapResult {
    pub estimate: f64,
    pub mean: f64,
    pub stderr: f64,
    pub resamples: usize,
}

pub const DEFAULT_RESAMPLES: usize = 500;

/// Multinomial resampling of every setting's counts; stderr is the sample
/// standard deviation of the statistic over resamples.
pub fn bootstrap(counts: &CountsTable, resamples: usize, statistic: &Statistic, seed: u64) -> Result<BootstrapResult> {
    if resamples < 2 {
        return Err(Error::InvalidArgument("bootstrap needs at least two resamples".into()));
    }
    let rec = Reconstructor::new(Settings::for_counts(counts)?)?;
    let freqs = rec.frequencies(counts)?;
    let shots: Vec<u64> = counts.counts.iter().map(|r| r.iter().sum()).collect();
    let order: Vec<usize> =
        counts.labels.iter().map(|l| rec.settings.find(l).expect("checked by frequencies")).collect();
    let estimate = statistic.evaluate(&rec.reconstruct_frequencies(&freqs)?, &counts.dims)?;
    let values = (0..resamples)
        .into_par_iter()
        .map(|r| -> Result<f64> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(r as u64);
            let mut resampled = vec![Vec::new(); freqs.len()];
            for (row, &i) in order.iter().enumerate() {
                let c = multinomial(&mut rng, shots[row], &freqs[i]);
                resampled[i] = c.iter().map(|&x| x as f64 / shots[row] as f64).collect();
            }
            statistic.evaluate(&rec.reconstruct_frequencies(&resampled)?, &counts.dims)
        })
        .collect::<Result<Vec<f64>>>()?;
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(BootstrapResult { estimate, mean, stderr: var.sqrt(), resamples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{lambda_state, omega_state};

    #[test]
    fn qutrit_basis_count_and_orthonormality() {
        let b = pair_bases(3);
        assert_eq!(b.len(), 7);
        let m = mub_bases(3).unwrap();
        assert_eq!(m.len(), 4);
        for (x, y) in m.iter().zip(m.iter().skip(1)) {
            for u in &x.vectors {
                for v in &y.vectors {
                    let ip: C64 = u.iter().zip(v).map(|(a, b)| a.conj() * b).sum();
                    assert!((ip.norm_sqr() - 1.0 / 3.0).abs() < 1e-14);
                }
            }
        }
        for basis in b.iter().chain(&m) {
            let mut sum = ComplexMatrix::zeros(3, 3);
            for p in basis.projectors() {
                sum += &p;
            }
            assert!(sum.max_abs_diff(&ComplexMatrix::identity(3)) < 1e-15);
        }
    }

    #[test]
    fn exact_frequencies_invert_exactly() {
        for (rho, dims) in [(lambda_state(), [2, 2, 2]), (omega_state(), [2, 3, 2])] {
            for s in [Settings::standard(&dims), Settings::pairs(&dims)] {
                let back = reconstruct_from_frequencies(&s, &exact_frequencies(&rho, &s)).unwrap();
                assert!(back.max_abs_diff(&rho) < 1e-10);
            }
        }
    }

    #[test]
    fn z_only_is_incomplete() {
        assert!(matches!(Reconstructor::new(Settings::computational(&[2, 2])), Err(Error::Incomplete)));
    }

    #[test]
    fn pure_zero_in_z() {
        let s = Settings::computational(&[2]);
        let rho = ComplexMatrix::diag(&[1.0, 0.0]);
        let c = simulate_counts(&rho, &s, 1000, 3).unwrap();
        assert_eq!(c.counts[0], vec![1000, 0]);
    }

    #[test]
    fn maximally_mixed_binomial() {
        let s = Settings::computational(&[2]);
        let c = simulate_counts(&ComplexMatrix::identity(2).scale(0.5), &s, 10_000, 11).unwrap();
        assert!((c.counts[0][0] as f64 - 5000.0).abs() < 3.0 * 2500f64.sqrt());
    }

    #[test]
    fn simplex_projection() {
        let p = project_simplex(&[0.7, 0.5, -0.1]);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((p[0] - 0.6).abs() < 1e-15 && (p[1] - 0.4).abs() < 1e-15 && p[2] == 0.0);
        assert_eq!(project_simplex(&[0.25; 4]), vec![0.25; 4]);
    }

    #[test]
    fn csv_round_trip() {
        let s = Settings::pairs(&[2, 3]);
        let c = simulate_counts(&ComplexMatrix::identity(6).scale(1.0 / 6.0), &s, 2100, 1).unwrap();
        let back = CountsTable::from_csv(&[2, 3], &c.to_csv()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn trace_has_zero_stderr() {
        let s = Settings::standard(&[2, 2, 2]);
        let c = simulate_counts(&lambda_state(), &s, 27_000, 2).unwrap();
        let b = bootstrap(&c, 20, &Statistic::Trace, 4).unwrap();
        assert!(b.stderr < 1e-12);
    }
}
