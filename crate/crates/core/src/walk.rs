//! Discrete-time quantum walk on a line with a qubit coin, used to realize
//! qubit POVMs as output ports.
//!
//! Coin index 0 is H, 1 is V. Translation moves V one site right and H one
//! site left.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::instrument::{validate, Instrument};
use crate::linalg::{pauli, ComplexMatrix, C64, ZERO};

pub const UNITARITY_TOL: f64 = 1e-10;
pub const NORM_TOL: f64 = 1e-12;
/// Kraus rows with every entry below this are treated as unreachable ports.
pub const AMPLITUDE_FLOOR: f64 = 1e-14;

/// Amplitudes over (position, coin). Absent keys are zero.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkState {
    amplitudes: BTreeMap<(i64, u8), C64>,
}

impl WalkState {
    /// Walker at x = 0 with coin state `coin`.
    pub fn at_origin(coin: [C64; 2]) -> Self {
        let mut amplitudes = BTreeMap::new();
        for (c, a) in coin.into_iter().enumerate() {
            if a != ZERO {
                amplitudes.insert((0, c as u8), a);
            }
        }
        Self { amplitudes }
    }

    pub fn from_amplitudes(amplitudes: BTreeMap<(i64, u8), C64>) -> Result<Self> {
        if let Some(&(_, c)) = amplitudes.keys().find(|(_, c)| *c > 1) {
            return Err(Error::InvalidArgument(format!("coin index {c} is not 0 or 1")));
        }
        Ok(Self { amplitudes })
    }

    pub fn amplitude(&self, position: i64, coin: u8) -> C64 {
        self.amplitudes.get(&(position, coin)).copied().unwrap_or(ZERO)
    }

    pub fn amplitudes(&self) -> &BTreeMap<(i64, u8), C64> {
        &self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn positions(&self) -> BTreeSet<i64> {
        self.amplitudes.keys().map(|&(x, _)| x).collect()
    }

    fn coin_vector(&self, x: i64) -> [C64; 2] {
        [self.amplitude(x, 0), self.amplitude(x, 1)]
    }
}

/// |x,V⟩ → |x+1,V⟩, |x,H⟩ → |x−1,H⟩.
pub fn translate(s: &WalkState) -> WalkState {
    let amplitudes = s
        .amplitudes
        .iter()
        .map(|(&(x, c), &a)| ((if c == 1 { x + 1 } else { x - 1 }, c), a))
        .collect();
    WalkState { amplitudes }
}

/// A coin operation at one site.
#[derive(Debug, Clone, PartialEq)]
pub enum Coin {
    Matrix(ComplexMatrix),
    /// |H⟩ ↔ |V⟩
    BitFlip,
}

impl Coin {
    pub fn matrix(&self) -> ComplexMatrix {
        match self {
            Coin::Matrix(m) => m.clone(),
            Coin::BitFlip => pauli::x(),
        }
    }

    fn check(&self, position: i64) -> Result<()> {
        if let Coin::Matrix(m) = self {
            if m.rows() != 2 || m.cols() != 2 {
                return Err(Error::DimensionMismatch(format!("coin at position {position} is not 2×2")));
            }
            let residual = m.unitarity_residual();
            if residual > UNITARITY_TOL {
                return Err(Error::NonUnitaryCoin { position, residual });
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum CoinRepr {
    Named(String),
    Matrix(ComplexMatrix),
}

impl Serialize for Coin {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Coin::BitFlip => CoinRepr::Named("bitflip".into()).serialize(s),
            Coin::Matrix(m) => CoinRepr::Matrix(m.clone()).serialize(s),
        }
    }
}

impl<'de> Deserialize<'de> for Coin {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        match CoinRepr::deserialize(d)? {
            CoinRepr::Named(n) if n == "bitflip" => Ok(Coin::BitFlip),
            CoinRepr::Named(n) => Err(serde::de::Error::custom(format!("unknown coin `{n}`"))),
            CoinRepr::Matrix(m) => Ok(Coin::Matrix(m)),
        }
    }
}

/// Applies the coin at each mapped position; identity elsewhere.
pub fn apply_coins(s: &WalkState, coins: &BTreeMap<i64, Coin>) -> Result<WalkState> {
    for (&x, c) in coins {
        c.check(x)?;
    }
    let mut amplitudes = s.amplitudes.clone();
    for (&x, c) in coins {
        let v = s.coin_vector(x);
        let w = match c {
            Coin::BitFlip => [v[1], v[0]],
            Coin::Matrix(m) => [m[(0, 0)] * v[0] + m[(0, 1)] * v[1], m[(1, 0)] * v[0] + m[(1, 1)] * v[1]],
        };
        for (k, a) in w.into_iter().enumerate() {
            if a == ZERO {
                amplitudes.remove(&(x, k as u8));
            } else {
                amplitudes.insert((x, k as u8), a);
            }
        }
    }
    Ok(WalkState { amplitudes })
}

/// Coins applied simultaneously, followed by one translation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkStep {
    pub coins: BTreeMap<i64, Coin>,
}

/// Terminal (position, coin) pair and the POVM element it realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Port {
    pub position: i64,
    pub coin: u8,
    pub element: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WalkCircuit {
    pub steps: Vec<WalkStep>,
    pub ports: Vec<Port>,
}

impl WalkCircuit {
    /// Builds the two-step rounds of the POVM protocol: (a) C₁ at x = 0 then
    /// translate, (b) C₂ at x = 1 and a bit flip at x = −1 then translate.
    pub fn from_rounds(rounds: &[(ComplexMatrix, ComplexMatrix)], ports: Vec<Port>) -> Self {
        let mut steps = Vec::with_capacity(2 * rounds.len());
        for (c1, c2) in rounds {
            steps.push(WalkStep { coins: BTreeMap::from([(0, Coin::Matrix(c1.clone()))]) });
            steps.push(WalkStep { coins: BTreeMap::from([(1, Coin::Matrix(c2.clone())), (-1, Coin::BitFlip)]) });
        }
        Self { steps, ports }
    }

    /// Checks every coin for unitarity and the port map for consistency.
    pub fn check(&self) -> Result<()> {
        for step in &self.steps {
            for (&x, c) in &step.coins {
                c.check(x)?;
            }
        }
        let mut seen = BTreeSet::new();
        for p in &self.ports {
            if p.coin > 1 {
                return Err(Error::InvalidArgument(format!("port coin index {} is not 0 or 1", p.coin)));
            }
            if !seen.insert((p.position, p.coin)) {
                return Err(Error::InvalidArgument(format!("port ({}, {}) listed twice", p.position, p.coin)));
            }
        }
        let mut elements: Vec<usize> = self.ports.iter().map(|p| p.element).collect();
        elements.sort_unstable();
        if elements.iter().enumerate().any(|(i, &e)| i != e) {
            return Err(Error::InvalidArgument("port elements must be a permutation of 0..n".into()));
        }
        Ok(())
    }

    /// Positions where a coin is applied although no amplitude can be present.
    pub fn unreachable_coins(&self) -> Vec<(usize, i64)> {
        let mut reach = BTreeSet::from([0i64]);
        let mut out = Vec::new();
        for (k, step) in self.steps.iter().enumerate() {
            out.extend(step.coins.keys().filter(|x| !reach.contains(x)).map(|&x| (k, x)));
            reach = reach.iter().flat_map(|&x| [x - 1, x + 1]).collect();
        }
        out
    }

    /// Lattice half-width that contains every reachable site.
    pub fn lattice_bound(&self) -> i64 {
        self.steps.len() as i64
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(s)?;
        c.check()?;
        Ok(c)
    }
}

/// Runs the circuit from x = 0 and returns the terminal state.
pub fn run_protocol(initial_coin: [C64; 2], circuit: &WalkCircuit) -> Result<WalkState> {
    let mut s = WalkState::at_origin(initial_coin);
    for step in &circuit.steps {
        s = translate(&apply_coins(&s, &step.coins)?);
    }
    Ok(s)
}

/// Terminal amplitudes grouped by position, ordered by position descending.
pub fn port_amplitudes(s: &WalkState) -> Vec<(i64, [C64; 2])> {
    s.positions().into_iter().rev().map(|x| (x, s.coin_vector(x))).collect()
}

/// Kraus rows K_port[j] = amplitude at the port for input basis state j,
/// for every terminal pair reached, ordered by position descending.
pub fn kraus_rows(circuit: &WalkCircuit) -> Result<Vec<((i64, u8), [C64; 2])>> {
    let one = C64::new(1.0, 0.0);
    let h = run_protocol([one, ZERO], circuit)?;
    let v = run_protocol([ZERO, one], circuit)?;
    let keys: BTreeSet<(i64, u8)> = h.amplitudes.keys().chain(v.amplitudes.keys()).copied().collect();
    let mut rows: Vec<_> = keys
        .into_iter()
        .map(|(x, c)| ((x, c), [h.amplitude(x, c), v.amplitude(x, c)]))
        .filter(|(_, k)| k.iter().any(|a| a.norm() > AMPLITUDE_FLOOR))
        .collect();
    rows.sort_by_key(|&((x, c), _)| (std::cmp::Reverse(x), c));
    Ok(rows)
}

/// POVM realized by the circuit's output ports, E = K†K per port.
pub fn extract_povm(circuit: &WalkCircuit) -> Result<Instrument> {
    circuit.check()?;
    let rows = kraus_rows(circuit)?;
    let n = circuit.ports.len();
    let mut elements = vec![ComplexMatrix::zeros(2, 2); n];
    let mut labels = vec![String::new(); n];
    for ((x, c), k) in rows {
        let port = circuit
            .ports
            .iter()
            .find(|p| p.position == x && p.coin == c)
            .ok_or(Error::UnexpectedPort { position: x, coin: c })?;
        let ket = [k[0].conj(), k[1].conj()];
        elements[port.element] = ComplexMatrix::outer(&ket, &ket);
        labels[port.element] = format!("x={x},{}", if c == 1 { "V" } else { "H" });
    }
    let inst = Instrument::with_labels(2, elements, labels)?;
    let report = validate(&inst)?;
    if report.completeness_residual > 1e-8 {
        return Err(Error::InvalidInstrument(format!(
            "port elements miss completeness by {:.3e}",
            report.completeness_residual
        )));
    }
    Ok(inst)
}

/// Probability of each port, indexed by POVM element.
pub fn port_probabilities(initial_coin: [C64; 2], circuit: &WalkCircuit) -> Result<Vec<f64>> {
    let s = run_protocol(initial_coin, circuit)?;
    let mut probs = vec![0.0; circuit.ports.len()];
    for (&(x, c), a) in s.amplitudes() {
        if a.norm() <= AMPLITUDE_FLOOR {
            continue;
        }
        let port = circuit
            .ports
            .iter()
            .find(|p| p.position == x && p.coin == c)
            .ok_or(Error::UnexpectedPort { position: x, coin: c })?;
        probs[port.element] += a.norm_sqr();
    }
    Ok(probs)
}

#[derive(Debug, Clone, Serialize)]
pub struct WalkVerification {
    /// max |E_walk − E_target| per element.
    pub element_residuals: Vec<f64>,
    pub max_element_residual: f64,
    /// max over inputs and ports of |p_walk − tr[E_target ρ]|.
    pub max_probability_residual: f64,
    pub max_norm_drift: f64,
    pub inputs: usize,
    pub pass: bool,
}

/// Random pure coin state, Gaussian amplitudes normalized.
pub fn random_coin<R: Rng + ?Sized>(rng: &mut R) -> [C64; 2] {
    let mut v = [ZERO; 2];
    for a in &mut v {
        *a = C64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
    }
    let n = (v[0].norm_sqr() + v[1].norm_sqr()).sqrt();
    [v[0] / n, v[1] / n]
}

/// Compares the circuit against `target` elementwise (tolerance 1e-8) and on
/// `inputs` random coin states (tolerance 1e-10). Inputs run in parallel, one
/// ChaCha stream each.
pub fn verify(circuit: &WalkCircuit, target: &Instrument, inputs: usize, seed: u64) -> Result<WalkVerification> {
    if target.dim() != 2 || target.len() != circuit.ports.len() {
        return Err(Error::DimensionMismatch("target instrument does not match the circuit ports".into()));
    }
    let realized = extract_povm(circuit)?;
    let element_residuals: Vec<f64> =
        realized.matrices().zip(target.matrices()).map(|(a, b)| a.max_abs_diff(b)).collect();
    let max_element_residual = element_residuals.iter().cloned().fold(0.0, f64::max);
    let per_input = (0..inputs)
        .into_par_iter()
        .map(|i| -> Result<(f64, f64)> {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let psi = random_coin(&mut rng);
            let s = run_protocol(psi, circuit)?;
            let rho = ComplexMatrix::projector(&psi);
            let born = target.probabilities(&rho);
            let walk = port_probabilities(psi, circuit)?;
            let diff = born.iter().zip(&walk).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            Ok((diff, (s.norm_sqr() - 1.0).abs()))
        })
        .collect::<Result<Vec<_>>>()?;
    let max_probability_residual = per_input.iter().map(|r| r.0).fold(0.0, f64::max);
    let max_norm_drift = per_input.iter().map(|r| r.1).fold(0.0, f64::max);
    Ok(WalkVerification {
        pass: max_element_residual < 1e-8 && max_probability_residual < 1e-10 && max_norm_drift < NORM_TOL,
        element_residuals,
        max_element_residual,
        max_probability_residual,
        max_norm_drift,
        inputs,
    })
}

/// Built-in circuits.
pub mod circuits {
    use super::*;
    use std::f64::consts::PI;

    fn port(position: i64, element: usize) -> Port {
        Port { position, coin: 1, element }
    }

    fn real(rows: &[&[f64]]) -> ComplexMatrix {
        ComplexMatrix::from_real_rows(rows)
    }

    /// One round of identity coins: the computational-basis measurement.
    pub fn trivial() -> WalkCircuit {
        let i = ComplexMatrix::identity(2);
        WalkCircuit {
            steps: vec![WalkStep { coins: BTreeMap::from([(0, Coin::Matrix(i))]) }],
            ports: vec![Port { position: 1, coin: 1, element: 1 }, Port { position: -1, coin: 0, element: 0 }],
        }
    }

    /// Θ circuit with unitary coins.
    ///
    /// C₁^(2) = (1 + √2)^{-1/2} [[2^{1/4}, 1], [1, −2^{1/4}]] and
    /// C₂^(1) = [[−2^{−1/4}, s], [s, 2^{−1/4}]] with s = √((√2 − 1)/√2).
    pub fn theta() -> WalkCircuit {
        let s2 = 2f64.sqrt();
        let q = 2f64.powf(0.25);
        let s = ((s2 - 1.0) / s2).sqrt();
        let c12 = real(&[&[q, 1.0], &[1.0, -q]]).scale(1.0 / (1.0 + s2).sqrt());
        let c21 = real(&[&[-1.0 / q, s], &[s, 1.0 / q]]);
        let i = ComplexMatrix::identity(2);
        WalkCircuit::from_rounds(&[(i.clone(), c12), (c21, i.clone()), (i.clone(), i)], vec![port(6, 0), port(4, 2), port(2, 1)])
    }

    /// Θ coin table with the normalizations (1 + √2)^{-1} and 2^{1/4} as
    /// tabulated; neither matrix is unitary.
    pub fn theta_tabulated() -> WalkCircuit {
        let s2 = 2f64.sqrt();
        let q = 2f64.powf(0.25);
        let s = ((s2 - 1.0) / s2).sqrt();
        let c12 = real(&[&[s2, 1.0], &[1.0, -s2]]).scale(1.0 / (1.0 + s2));
        let c21 = real(&[&[-q, s], &[s, q]]);
        let i = ComplexMatrix::identity(2);
        WalkCircuit::from_rounds(&[(i.clone(), c12), (c21, i.clone()), (i.clone(), i)], vec![port(6, 0), port(4, 2), port(2, 1)])
    }

    fn tetra_coins() -> [ComplexMatrix; 6] {
        let s2 = 2f64.sqrt();
        let s3 = 3f64.sqrt();
        let e = |t: f64| C64::from_polar(1.0, t);
        let r = |x: f64| C64::new(x, 0.0);
        let n11 = 1.0 / (6.0 + 2.0 * s3).sqrt();
        let c11 = ComplexMatrix::from_rows(&[&[r(1.0 + s3), r(s2)], &[e(PI / 4.0) * s2, -e(PI / 4.0) * (1.0 + s3)]]).scale(n11);
        let c12 = real(&[&[-1.0, 1.0], &[1.0, 1.0]]).scale(1.0 / s2);
        let c21 = real(&[&[1.0, 1.0], &[1.0, -1.0]]).scale(1.0 / s2);
        let c22 = real(&[&[s2, 1.0], &[1.0, -s2]]).scale(1.0 / s3);
        let c31 = ComplexMatrix::from_rows(&[&[e(-PI / 3.0), e(PI / 6.0)], &[e(PI / 3.0), e(-PI / 6.0)]]).scale(1.0 / s2);
        [c11, c12, c21, c22, c31, ComplexMatrix::identity(2)]
    }

    fn tetra_ports() -> Vec<Port> {
        vec![port(6, 2), port(4, 1), port(2, 0), port(0, 3)]
    }

    /// Π circuit; the first coin is the transpose of the tabulated C₁^(1).
    pub fn tetra() -> WalkCircuit {
        let [c11, c12, c21, c22, c31, c32] = tetra_coins();
        WalkCircuit::from_rounds(&[(c11.transpose(), c12), (c21, c22), (c31, c32)], tetra_ports())
    }

    /// Π coin table exactly as tabulated. Unitary, but realizes a different POVM.
    pub fn tetra_tabulated() -> WalkCircuit {
        let [c11, c12, c21, c22, c31, c32] = tetra_coins();
        WalkCircuit::from_rounds(&[(c11, c12), (c21, c22), (c31, c32)], tetra_ports())
    }

    pub fn by_name(name: &str) -> Result<WalkCircuit> {
        match name {
            "theta" => Ok(theta()),
            "tetra" => Ok(tetra()),
            "theta-tabulated" => Ok(theta_tabulated()),
            "tetra-tabulated" => Ok(tetra_tabulated()),
            "trivial" => Ok(trivial()),
            other => Err(Error::InvalidArgument(format!("unknown circuit `{other}`"))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instrument::{computational, tetra_povm, theta_povm};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn translation_examples() {
        let h = WalkState::at_origin([c(1.0), ZERO]);
        assert_eq!(translate(&h).amplitude(-1, 0), c(1.0));
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let plus = translate(&WalkState::at_origin([c(s), c(s)]));
        assert_eq!(plus.amplitude(-1, 0), c(s));
        assert_eq!(plus.amplitude(1, 1), c(s));
        let v = WalkState::at_origin([ZERO, c(1.0)]);
        assert_eq!(translate(&translate(&v)).amplitude(2, 1), c(1.0));
    }

    #[test]
    fn bitflip_at_minus_one() {
        let s = WalkState::from_amplitudes(BTreeMap::from([((-1, 0), c(0.6)), ((-1, 1), c(0.8))])).unwrap();
        let t = apply_coins(&s, &BTreeMap::from([(-1, Coin::BitFlip)])).unwrap();
        assert_eq!(t.amplitude(-1, 0), c(0.8));
        assert_eq!(t.amplitude(-1, 1), c(0.6));
        assert_eq!(apply_coins(&s, &BTreeMap::new()).unwrap(), s);
    }

    #[test]
    fn non_unitary_coin_rejected() {
        let s = WalkState::at_origin([c(1.0), ZERO]);
        let bad = BTreeMap::from([(3, Coin::Matrix(ComplexMatrix::diag(&[1.0, 0.5])))]);
        assert!(matches!(apply_coins(&s, &bad), Err(Error::NonUnitaryCoin { position: 3, .. })));
        assert!(matches!(extract_povm(&circuits::theta_tabulated()), Err(Error::NonUnitaryCoin { .. })));
    }

    #[test]
    fn trivial_circuit_is_computational() {
        let inst = extract_povm(&circuits::trivial()).unwrap();
        for (a, b) in inst.matrices().zip(computational(2).matrices()) {
            assert!(a.max_abs_diff(b) < 1e-15);
        }
    }

    #[test]
    fn theta_and_tetra_circuits() {
        assert!(verify(&circuits::theta(), &theta_povm(), 100, 5).unwrap().pass);
        let v = verify(&circuits::tetra(), &tetra_povm(), 100, 5).unwrap();
        assert!(v.pass, "{v:?}");
        let off = verify(&circuits::tetra_tabulated(), &tetra_povm(), 10, 5);
        assert!(off.map(|v| v.max_element_residual > 0.05).unwrap_or(true));
    }

    #[test]
    fn theta_ports_descend() {
        let rows = kraus_rows(&circuits::theta()).unwrap();
        let pos: Vec<i64> = rows.iter().map(|r| r.0 .0).collect();
        assert_eq!(pos, vec![6, 4, 2]);
        assert!(circuits::theta().unreachable_coins().is_empty());
    }

    #[test]
    fn circuit_json_round_trip() {
        let t = circuits::tetra();
        let back = WalkCircuit::from_json(&t.to_json().unwrap()).unwrap();
        assert_eq!(back, t);
        assert!(t.to_json().unwrap().contains("\"bitflip\""));
    }
}
