use serde::{Deserialize, Serialize};

use super::matrix::{ComplexMatrix, ZERO};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Input,
    Output,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Leg {
    pub label: String,
    pub dim: usize,
    pub direction: Direction,
}

impl Leg {
    pub fn input(label: &str, dim: usize) -> Self {
        Self { label: label.to_string(), dim, direction: Direction::Input }
    }

    pub fn output(label: &str, dim: usize) -> Self {
        Self { label: label.to_string(), dim, direction: Direction::Output }
    }
}

/// Ordered tensor legs of an operator. Leg 0 is the most significant index.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(transparent)]
pub struct LegLayout {
    legs: Vec<Leg>,
}

impl<'de> Deserialize<'de> for LegLayout {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let legs = Vec::<Leg>::deserialize(d)?;
        LegLayout::new(legs).map_err(serde::de::Error::custom)
    }
}

impl LegLayout {
    pub fn new(legs: Vec<Leg>) -> Result<Self> {
        for (i, leg) in legs.iter().enumerate() {
            if leg.dim == 0 {
                return Err(Error::DimensionMismatch(format!("leg `{}` has dimension 0", leg.label)));
            }
            if legs[..i].iter().any(|l| l.label == leg.label) {
                return Err(Error::DuplicateLabel(leg.label.clone()));
            }
        }
        Ok(Self { legs })
    }

    /// Canonical three-party layout Ai, Ao, Bi, Bo, Ci.
    pub fn three_party(d_ai: usize, d_ao: usize, d_bi: usize, d_bo: usize, d_ci: usize) -> Self {
        Self {
            legs: vec![
                Leg::input("Ai", d_ai),
                Leg::output("Ao", d_ao),
                Leg::input("Bi", d_bi),
                Leg::output("Bo", d_bo),
                Leg::input("Ci", d_ci),
            ],
        }
    }

    /// Input-only layout with the given labels.
    pub fn inputs(labels: &[&str], dims: &[usize]) -> Self {
        assert_eq!(labels.len(), dims.len());
        Self::new(labels.iter().zip(dims).map(|(l, &d)| Leg::input(l, d)).collect())
            .expect("valid literal layout")
    }

    pub fn legs(&self) -> &[Leg] {
        &self.legs
    }

    pub fn len(&self) -> usize {
        self.legs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.legs.is_empty()
    }

    pub fn dims(&self) -> Vec<usize> {
        self.legs.iter().map(|l| l.dim).collect()
    }

    pub fn total_dim(&self) -> usize {
        self.legs.iter().map(|l| l.dim).product()
    }

    pub fn output_dim(&self) -> usize {
        self.legs.iter().filter(|l| l.direction == Direction::Output).map(|l| l.dim).product()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.legs
            .iter()
            .position(|l| l.label == label)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    pub fn leg(&self, label: &str) -> Result<&Leg> {
        Ok(&self.legs[self.position(label)?])
    }

    pub fn contains(&self, label: &str) -> bool {
        self.legs.iter().any(|l| l.label == label)
    }

    pub fn labels(&self) -> Vec<&str> {
        self.legs.iter().map(|l| l.label.as_str()).collect()
    }

    /// Sub-layout of the given positions, kept in layout order.
    fn select(&self, positions: &[usize]) -> Self {
        let mut pos = positions.to_vec();
        pos.sort_unstable();
        Self { legs: pos.iter().map(|&p| self.legs[p].clone()).collect() }
    }

    fn positions_of(&self, labels: &[&str]) -> Result<Vec<usize>> {
        let mut out = Vec::with_capacity(labels.len());
        for l in labels {
            let p = self.position(l)?;
            if out.contains(&p) {
                return Err(Error::DuplicateLabel(l.to_string()));
            }
            out.push(p);
        }
        out.sort_unstable();
        Ok(out)
    }

    pub fn check_matrix(&self, m: &ComplexMatrix) -> Result<()> {
        let d = self.total_dim();
        if m.rows() != d || m.cols() != d {
            return Err(Error::DimensionMismatch(format!(
                "layout dimension {d} but matrix is {}x{}",
                m.rows(),
                m.cols()
            )));
        }
        Ok(())
    }
}

/// Offsets splitting a composite index into a chosen subset of legs and its complement.
///
/// `full = sub[s] + comp[t]` for subset multi-index `s` and complement multi-index `t`.
struct Split {
    sub: Vec<usize>,
    comp: Vec<usize>,
}

impl Split {
    fn new(dims: &[usize], subset: &[usize]) -> Self {
        let n = dims.len();
        let mut strides = vec![1usize; n];
        for k in (0..n.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * dims[k + 1];
        }
        let in_sub: Vec<bool> = (0..n).map(|k| subset.contains(&k)).collect();
        let offsets = |pick: bool| -> Vec<usize> {
            let legs: Vec<usize> = (0..n).filter(|&k| in_sub[k] == pick).collect();
            let count: usize = legs.iter().map(|&k| dims[k]).product();
            let mut out = Vec::with_capacity(count);
            let mut digits = vec![0usize; legs.len()];
            for _ in 0..count {
                out.push(legs.iter().zip(&digits).map(|(&k, &d)| d * strides[k]).sum());
                for q in (0..legs.len()).rev() {
                    digits[q] += 1;
                    if digits[q] < dims[legs[q]] {
                        break;
                    }
                    digits[q] = 0;
                }
            }
            out
        };
        Self { sub: offsets(true), comp: offsets(false) }
    }
}

/// Traces out every leg not listed in `keep`. The result keeps layout order.
pub fn partial_trace(
    m: &ComplexMatrix,
    layout: &LegLayout,
    keep: &[&str],
) -> Result<(ComplexMatrix, LegLayout)> {
    layout.check_matrix(m)?;
    let kept = layout.positions_of(keep)?;
    let traced: Vec<usize> = (0..layout.len()).filter(|k| !kept.contains(k)).collect();
    let split = Split::new(&layout.dims(), &traced);
    let n = split.comp.len();
    let mut out = ComplexMatrix::zeros(n, n);
    for (r, &ro) in split.comp.iter().enumerate() {
        for (c, &co) in split.comp.iter().enumerate() {
            let mut acc = ZERO;
            for &s in &split.sub {
                acc += m[(s + ro, s + co)];
            }
            out[(r, c)] = acc;
        }
    }
    Ok((out, layout.select(&kept)))
}

/// Computes tr_L[(op ⊗ 1)ᵀ m] where `op` acts on the legs `labels` (in layout order).
///
/// This is the contraction of an instrument element against a process: the
/// transpose sits on the instrument side.
pub fn contract(
    m: &ComplexMatrix,
    layout: &LegLayout,
    labels: &[&str],
    op: &ComplexMatrix,
) -> Result<(ComplexMatrix, LegLayout)> {
    layout.check_matrix(m)?;
    let sub = layout.positions_of(labels)?;
    let split = Split::new(&layout.dims(), &sub);
    if op.rows() != split.sub.len() || op.cols() != split.sub.len() {
        return Err(Error::DimensionMismatch(format!(
            "operator is {}x{} but legs {:?} have dimension {}",
            op.rows(),
            op.cols(),
            labels,
            split.sub.len()
        )));
    }
    let rest: Vec<usize> = (0..layout.len()).filter(|k| !sub.contains(k)).collect();
    let n = split.comp.len();
    let mut out = ComplexMatrix::zeros(n, n);
    // result[t, t'] = Σ_{k,l} op[k, l] m[(k, t), (l, t')]
    for (k, &ko) in split.sub.iter().enumerate() {
        for (l, &lo) in split.sub.iter().enumerate() {
            let w = op[(k, l)];
            if w == ZERO {
                continue;
            }
            for (r, &ro) in split.comp.iter().enumerate() {
                for (c, &co) in split.comp.iter().enumerate() {
                    out[(r, c)] += w * m[(ko + ro, lo + co)];
                }
            }
        }
    }
    Ok((out, layout.select(&rest)))
}

/// Embeds `op` acting on `labels` into the full layout as op ⊗ 1.
pub fn embed(layout: &LegLayout, labels: &[&str], op: &ComplexMatrix) -> Result<ComplexMatrix> {
    let sub = layout.positions_of(labels)?;
    let split = Split::new(&layout.dims(), &sub);
    if op.rows() != split.sub.len() || op.cols() != split.sub.len() {
        return Err(Error::DimensionMismatch("embedded operator has wrong size".into()));
    }
    let d = layout.total_dim();
    let mut out = ComplexMatrix::zeros(d, d);
    for (k, &ko) in split.sub.iter().enumerate() {
        for (l, &lo) in split.sub.iter().enumerate() {
            let w = op[(k, l)];
            if w == ZERO {
                continue;
            }
            for &t in &split.comp {
                out[(ko + t, lo + t)] = w;
            }
        }
    }
    Ok(out)
}

/// Reorders legs so that `order` (a permutation of the layout labels) becomes the new leg order.
pub fn permute(
    m: &ComplexMatrix,
    layout: &LegLayout,
    order: &[&str],
) -> Result<(ComplexMatrix, LegLayout)> {
    layout.check_matrix(m)?;
    if order.len() != layout.len() {
        return Err(Error::DimensionMismatch("permutation must list every leg".into()));
    }
    let perm: Vec<usize> = order.iter().map(|l| layout.position(l)).collect::<Result<_>>()?;
    let mut seen = vec![false; perm.len()];
    for &p in &perm {
        if seen[p] {
            return Err(Error::DuplicateLabel(layout.legs[p].label.clone()));
        }
        seen[p] = true;
    }
    let dims = layout.dims();
    let n = dims.len();
    let mut old_strides = vec![1usize; n];
    for k in (0..n.saturating_sub(1)).rev() {
        old_strides[k] = old_strides[k + 1] * dims[k + 1];
    }
    let new_dims: Vec<usize> = perm.iter().map(|&p| dims[p]).collect();
    let d = layout.total_dim();
    // map new composite index → old composite index
    let mut map = Vec::with_capacity(d);
    let mut digits = vec![0usize; n];
    for _ in 0..d {
        map.push(digits.iter().zip(&perm).map(|(&x, &p)| x * old_strides[p]).sum::<usize>());
        for q in (0..n).rev() {
            digits[q] += 1;
            if digits[q] < new_dims[q] {
                break;
            }
            digits[q] = 0;
        }
    }
    let out = ComplexMatrix::from_fn(d, d, |i, j| m[(map[i], map[j])]);
    let new_layout = LegLayout { legs: perm.iter().map(|&p| layout.legs[p].clone()).collect() };
    Ok((out, new_layout))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::matrix::{kron, C64};

    fn rho() -> ComplexMatrix {
        ComplexMatrix::from_rows(&[
            &[C64::new(0.7, 0.0), C64::new(0.1, 0.2)],
            &[C64::new(0.1, -0.2), C64::new(0.3, 0.0)],
        ])
    }

    fn sigma() -> ComplexMatrix {
        ComplexMatrix::from_real_rows(&[&[0.2, 0.0, 0.1], &[0.0, 0.5, 0.0], &[0.1, 0.0, 0.3]])
    }

    #[test]
    fn trace_of_product_state_factorizes() {
        let layout = LegLayout::inputs(&["A", "B"], &[2, 3]);
        let m = kron(&rho(), &sigma());
        let (a, la) = partial_trace(&m, &layout, &["A"]).unwrap();
        assert!(a.max_abs_diff(&rho()) < 1e-15);
        assert_eq!(la.labels(), vec!["A"]);
        let (b, _) = partial_trace(&m, &layout, &["B"]).unwrap();
        assert!(b.max_abs_diff(&sigma()) < 1e-15);
    }

    #[test]
    fn kept_legs_follow_layout_order() {
        let layout = LegLayout::inputs(&["A", "B", "C"], &[2, 3, 2]);
        let m = kron(&kron(&rho(), &sigma()), &rho().transpose());
        let (ac, l) = partial_trace(&m, &layout, &["C", "A"]).unwrap();
        assert_eq!(l.labels(), vec!["A", "C"]);
        assert!(ac.max_abs_diff(&kron(&rho(), &rho().transpose())) < 1e-15);
    }

    #[test]
    fn unknown_label_and_bad_size_rejected() {
        let layout = LegLayout::inputs(&["A", "B"], &[2, 2]);
        let m = ComplexMatrix::identity(4);
        assert_eq!(partial_trace(&m, &layout, &["Z"]).unwrap_err(), Error::UnknownLabel("Z".into()));
        assert!(partial_trace(&ComplexMatrix::identity(3), &layout, &["A"]).is_err());
    }

    #[test]
    fn duplicate_labels_rejected() {
        assert!(LegLayout::new(vec![Leg::input("A", 2), Leg::output("A", 2)]).is_err());
    }

    #[test]
    fn contract_matches_embedded_product() {
        let layout = LegLayout::inputs(&["A", "B", "C"], &[2, 3, 2]);
        let m = kron(&kron(&rho(), &sigma()), &rho());
        let op = ComplexMatrix::from_rows(&[
            &[C64::new(0.0, 0.0), C64::new(0.0, 0.3), C64::new(0.2, 0.0)],
            &[C64::new(0.5, 0.1), C64::new(0.4, 0.0), C64::new(0.0, -0.2)],
            &[C64::new(0.1, 0.0), C64::new(0.0, 0.0), C64::new(0.9, 0.0)],
        ]);
        let (fast, l) = contract(&m, &layout, &["B"], &op).unwrap();
        let big = embed(&layout, &["B"], &op.transpose()).unwrap();
        let (slow, _) = partial_trace(&big.matmul(&m), &layout, &["A", "C"]).unwrap();
        assert!(fast.max_abs_diff(&slow) < 1e-14);
        assert_eq!(l.labels(), vec!["A", "C"]);
    }

    #[test]
    fn permute_swaps_kron_factors() {
        let layout = LegLayout::inputs(&["A", "B"], &[2, 3]);
        let m = kron(&rho(), &sigma());
        let (p, l) = permute(&m, &layout, &["B", "A"]).unwrap();
        assert_eq!(l.labels(), vec!["B", "A"]);
        assert!(p.max_abs_diff(&kron(&sigma(), &rho())) < 1e-15);
    }

    #[test]
    fn layout_json_round_trip() {
        let l = LegLayout::three_party(2, 2, 3, 3, 2);
        let s = serde_json::to_string(&l).unwrap();
        assert!(s.contains("\"direction\":\"output\""));
        let back: LegLayout = serde_json::from_str(&s).unwrap();
        assert_eq!(back, l);
    }
}
