//! Independent brute-force verifiers.
//!
//! Everything in this module is deliberately self-contained: the Schmidt
//! spectrum comes from an explicit reduced density matrix diagonalized by
//! plain Jacobi rotations, and the cascade statistics come from a direct
//! classical enumeration of the stop rule. None of it shares a code path
//! with the engine or the circuit builders it is used to check, so an
//! agreement between the two is meaningful evidence.

use crate::statevec::{Label, StateVector, NORM_TOL};
use num_complex::Complex64;
use num_rational::Ratio;
use std::collections::BTreeMap;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum OracleError {
    #[error("partition must put at least one qubit on each side")]
    DegeneratePartition,
    #[error("label {0} not in the state or listed twice")]
    BadPartitionLabel(Label),
    #[error("reduced matrix of dimension {0} exceeds the small-matrix bound of 64")]
    DimensionTooLarge(usize),
    #[error("{0} EPR pairs exceed the reference-state bound of 10")]
    TooManyPairs(usize),
}

pub type Result<T> = std::result::Result<T, OracleError>;

/// Reduced density matrix of one side of a bipartition, row-major.
#[derive(Debug, Clone)]
pub struct ReducedDensityMatrix {
    dim: usize,
    entries: Vec<Complex64>,
}

impl ReducedDensityMatrix {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entry(&self, row: usize, col: usize) -> Complex64 {
        self.entries[row * self.dim + col]
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.entry(i, i).re).sum()
    }

    /// Eigenvalues in descending order, via Jacobi rotations on the real
    /// symmetric embedding of the Hermitian matrix.
    pub fn eigenvalues(&self) -> Vec<f64> {
        hermitian_eigenvalues(self.dim, &self.entries)
    }
}

/// Trace out every qubit not listed in `keep`. The kept side is indexed
/// by its labels in the given order, leftmost first.
pub fn reduced_density_matrix(state: &StateVector, keep: &[Label]) -> Result<ReducedDensityMatrix> {
    let n = state.num_qubits();
    if keep.is_empty() || keep.len() >= n {
        return Err(OracleError::DegeneratePartition);
    }
    let mut keep_positions = Vec::with_capacity(keep.len());
    for (i, &label) in keep.iter().enumerate() {
        if keep[..i].contains(&label) {
            return Err(OracleError::BadPartitionLabel(label));
        }
        let pos = state
            .labels()
            .iter()
            .position(|&l| l == label)
            .ok_or(OracleError::BadPartitionLabel(label))?;
        keep_positions.push(pos);
    }
    let dim = 1usize << keep.len();
    if dim > 64 {
        return Err(OracleError::DimensionTooLarge(dim));
    }
    let rest_positions: Vec<usize> = (0..n).filter(|p| !keep_positions.contains(p)).collect();
    let rest_dim = 1usize << rest_positions.len();

    // columns[b] lists the amplitudes psi(a, b) for a = 0..dim-1
    let mut columns = vec![vec![Complex64::new(0.0, 0.0); dim]; rest_dim];
    for (idx, &amp) in state.amplitudes().iter().enumerate() {
        let mut a = 0usize;
        for &p in &keep_positions {
            a = (a << 1) | ((idx >> (n - 1 - p)) & 1);
        }
        let mut b = 0usize;
        for &p in &rest_positions {
            b = (b << 1) | ((idx >> (n - 1 - p)) & 1);
        }
        columns[b][a] = amp;
    }

    let mut entries = vec![Complex64::new(0.0, 0.0); dim * dim];
    for col in &columns {
        for (r, &ar) in col.iter().enumerate() {
            if ar == Complex64::new(0.0, 0.0) {
                continue;
            }
            for (c, &ac) in col.iter().enumerate() {
                entries[r * dim + c] += ar * ac.conj();
            }
        }
    }
    Ok(ReducedDensityMatrix { dim, entries })
}

/// Squared Schmidt coefficients of a pure state across the given cut:
/// the eigenvalues of the reduced density matrix of the `alice` side,
/// in descending order. They sum to one.
pub fn schmidt_squares(state: &StateVector, alice: &[Label]) -> Result<Vec<f64>> {
    let rdm = reduced_density_matrix(state, alice)?;
    let mut eigs = rdm.eigenvalues();
    for e in &mut eigs {
        if *e < 0.0 && *e > -NORM_TOL {
            *e = 0.0;
        }
    }
    Ok(eigs)
}

/// Shannon entropy (bits) of a probability vector: -sum p log2 p with
/// the convention 0 log 0 = 0. For Schmidt squares this is the
/// entanglement entropy of the cut.
pub fn von_neumann_entropy(squares: &[f64]) -> f64 {
    squares
        .iter()
        .filter(|&&p| p > 1e-15)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Exact distribution of distilled-pair counts when the shared rank
/// register is uniform over 0..c-1 and the stop rule scans the binary
/// expansion of c from the leading bit down to bit 1: the scan stops at
/// the first position i where the expansion has a 1 and the rank string
/// has a 0 (all higher positions having matched), yielding i pairs;
/// if no such position exists the yield is 0.
#[derive(Debug, Clone, PartialEq)]
pub struct CascadeDistribution {
    /// The superposition size c the distribution was built from.
    pub c: u64,
    /// Probability of each pair count, as exact rationals over c.
    pub mass: BTreeMap<usize, Ratio<i128>>,
}

impl CascadeDistribution {
    /// Exact expected number of pairs.
    pub fn mean(&self) -> Ratio<i128> {
        self.mass
            .iter()
            .map(|(&pairs, p)| Ratio::from_integer(pairs as i128) * p)
            .sum()
    }

    pub fn probability(&self, pairs: usize) -> Ratio<i128> {
        self.mass.get(&pairs).copied().unwrap_or_else(|| Ratio::from_integer(0))
    }
}

pub fn brute_force_cascade(c: u64) -> CascadeDistribution {
    assert!(c >= 1, "superposition size must be positive");
    let k = (64 - c.leading_zeros()) as usize;
    let mut counts: BTreeMap<usize, u64> = BTreeMap::new();
    for y in 0..c {
        let mut stopped = None;
        for i in (1..k).rev() {
            let xi = (c >> i) & 1 == 1;
            let yi = (y >> i) & 1 == 1;
            if xi && !yi {
                stopped = Some(i);
                break;
            }
            if xi != yi {
                // y has a 1 where c has a 0: impossible while scanning,
                // since y < c forces the first difference to favor c
                unreachable!("y exceeded c during the scan");
            }
        }
        *counts.entry(stopped.unwrap_or(0)).or_insert(0) += 1;
    }
    let mass = counts
        .into_iter()
        .map(|(pairs, count)| (pairs, Ratio::new(count as i128, c as i128)))
        .collect();
    CascadeDistribution { c, mass }
}

/// The r-pair reference state 2^{-r/2} sum_y |y⟩_A |y⟩_B over 2r qubits,
/// Alice's half leftmost. r = 0 degenerates to the empty unit state.
pub fn ideal_epr_state(r: usize) -> Result<StateVector> {
    if r > 10 {
        return Err(OracleError::TooManyPairs(r));
    }
    if r == 0 {
        return Ok(StateVector::empty());
    }
    let mut labels = crate::statevec::labels(crate::statevec::Role::AliceData, r);
    labels.extend(crate::statevec::labels(crate::statevec::Role::BobData, r));
    let dim = 1usize << (2 * r);
    let coeff = Complex64::new(0.5f64.powi(r as i32).sqrt(), 0.0);
    let mut amps = vec![Complex64::new(0.0, 0.0); dim];
    for y in 0..1u64 << r {
        amps[((y << r) | y) as usize] = coeff;
    }
    Ok(StateVector::from_amplitudes(labels, amps).expect("reference state is normalized"))
}

/// Eigenvalues of a Hermitian matrix given row-major, descending.
///
/// The d-dimensional Hermitian problem is embedded as the 2d-dimensional
/// real symmetric matrix [[Re, -Im], [Im, Re]], whose spectrum is that
/// of the original with every eigenvalue doubled in multiplicity.
fn hermitian_eigenvalues(dim: usize, entries: &[Complex64]) -> Vec<f64> {
    let d2 = dim * 2;
    let mut m = vec![0.0f64; d2 * d2];
    for r in 0..dim {
        for c in 0..dim {
            let z = entries[r * dim + c];
            m[r * d2 + c] = z.re;
            m[(r + dim) * d2 + (c + dim)] = z.re;
            m[r * d2 + (c + dim)] = -z.im;
            m[(r + dim) * d2 + c] = z.im;
        }
    }
    let mut eigs = jacobi_eigenvalues(d2, m);
    eigs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    eigs.into_iter().step_by(2).collect()
}

/// Cyclic Jacobi sweeps on a real symmetric matrix, row-major.
fn jacobi_eigenvalues(n: usize, mut a: Vec<f64>) -> Vec<f64> {
    const MAX_SWEEPS: usize = 100;
    let idx = |r: usize, c: usize| r * n + c;
    let scale: f64 = (0..n * n).map(|i| a[i].abs()).fold(0.0, f64::max).max(1.0);
    for _ in 0..MAX_SWEEPS {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in (p + 1)..n {
                off += a[idx(p, q)].abs();
            }
        }
        if off <= 1e-14 * scale {
            break;
        }
        for p in 0..n - 1 {
            for q in (p + 1)..n {
                let apq = a[idx(p, q)];
                if apq.abs() <= 1e-300 {
                    continue;
                }
                let theta = 0.5 * (a[idx(q, q)] - a[idx(p, p)]) / apq;
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let s = theta.signum();
                    s / (theta.abs() + (1.0 + theta * theta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = t * c;
                let tau = s / (1.0 + c);
                let h = t * apq;
                a[idx(p, p)] -= h;
                a[idx(q, q)] += h;
                a[idx(p, q)] = 0.0;
                a[idx(q, p)] = 0.0;
                for j in 0..n {
                    if j == p || j == q {
                        continue;
                    }
                    let ajp = a[idx(j, p)];
                    let ajq = a[idx(j, q)];
                    let new_jp = ajp - s * (ajq + ajp * tau);
                    let new_jq = ajq + s * (ajp - ajq * tau);
                    a[idx(j, p)] = new_jp;
                    a[idx(p, j)] = new_jp;
                    a[idx(j, q)] = new_jq;
                    a[idx(q, j)] = new_jq;
                }
            }
        }
    }
    (0..n).map(|i| a[idx(i, i)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::statevec::{labels, BitString, Role};

    fn epr() -> StateVector {
        ideal_epr_state(1).unwrap()
    }

    #[test]
    fn jacobi_diagonalizes_known_matrices() {
        // real symmetric
        let eigs = jacobi_eigenvalues(2, vec![2.0, 1.0, 1.0, 2.0]);
        let mut sorted = eigs.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert!((sorted[0] - 1.0).abs() < 1e-12);
        assert!((sorted[1] - 3.0).abs() < 1e-12);
        // complex Hermitian: [[2, i], [-i, 2]] has eigenvalues 1 and 3
        let entries = vec![
            Complex64::new(2.0, 0.0),
            Complex64::new(0.0, 1.0),
            Complex64::new(0.0, -1.0),
            Complex64::new(2.0, 0.0),
        ];
        let eigs = hermitian_eigenvalues(2, &entries);
        assert!((eigs[0] - 3.0).abs() < 1e-12);
        assert!((eigs[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn epr_pair_has_flat_schmidt_spectrum() {
        let squares = schmidt_squares(&epr(), &[Label::alice(0)]).unwrap();
        assert_eq!(squares.len(), 2);
        assert!((squares[0] - 0.5).abs() < 1e-12);
        assert!((squares[1] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn product_state_has_trivial_spectrum() {
        let zero = StateVector::basis_state(vec![Label::qubit(9)], &BitString::parse("0").unwrap()).unwrap();
        let s = zero.tensor(&epr());
        let squares = schmidt_squares(&s, &[Label::qubit(9)]).unwrap();
        assert!((squares[0] - 1.0).abs() < 1e-12);
        assert!(squares[1].abs() < 1e-12);
    }

    #[test]
    fn partition_validation() {
        let s = epr();
        assert_eq!(schmidt_squares(&s, &[]), Err(OracleError::DegeneratePartition));
        assert_eq!(
            schmidt_squares(&s, &[Label::alice(0), Label::bob(0)]),
            Err(OracleError::DegeneratePartition)
        );
        assert_eq!(
            schmidt_squares(&s, &[Label::qubit(5)]),
            Err(OracleError::BadPartitionLabel(Label::qubit(5)))
        );
    }

    #[test]
    fn rdm_trace_is_one() {
        let rdm = reduced_density_matrix(&ideal_epr_state(2).unwrap(), &labels(Role::AliceData, 2)).unwrap();
        assert!((rdm.trace() - 1.0).abs() < NORM_TOL);
        for e in rdm.eigenvalues() {
            assert!(e >= -NORM_TOL && e <= 1.0 + NORM_TOL);
        }
    }

    #[test]
    fn entropy_values() {
        assert!((von_neumann_entropy(&[0.5, 0.5]) - 1.0).abs() < 1e-12);
        assert_eq!(von_neumann_entropy(&[1.0]), 0.0);
        assert_eq!(von_neumann_entropy(&[1.0, 0.0, 0.0]), 0.0);
    }

    /// Schmidt squares of (alpha|00⟩ + beta|11⟩)^n across the Alice|Bob
    /// cut, built directly from the closed form: alpha^{2(n-j)} beta^{2j}
    /// with multiplicity C(n,j).
    fn closed_form_squares(alpha: f64, n: usize) -> Vec<f64> {
        let a2 = alpha * alpha;
        let b2 = 1.0 - a2;
        let mut out = Vec::new();
        for j in 0..=n {
            let lam = a2.powi((n - j) as i32) * b2.powi(j as i32);
            let mult = crate::combinat::binomial(n, j).unwrap();
            out.extend(std::iter::repeat(lam).take(mult as usize));
        }
        out.sort_by(|a, b| b.partial_cmp(a).unwrap());
        out
    }

    #[test]
    fn schmidt_spectrum_matches_closed_form() {
        for n in 1..=4usize {
            for alpha2 in [0.25f64, 0.5, 0.7] {
                let alpha = alpha2.sqrt();
                let beta = (1.0 - alpha2).sqrt();
                let mut alice = labels(Role::AliceData, n);
                let mut all = alice.clone();
                all.extend(labels(Role::BobData, n));
                let dim = 1usize << (2 * n);
                let mut amps = vec![Complex64::new(0.0, 0.0); dim];
                for x in 0..1u64 << n {
                    let w = x.count_ones() as i32;
                    amps[((x << n) | x) as usize] =
                        Complex64::new(alpha.powi(n as i32 - w) * beta.powi(w), 0.0);
                }
                let s = StateVector::from_amplitudes(all, amps).unwrap();
                alice.truncate(n);
                let got = schmidt_squares(&s, &alice).unwrap();
                let expect = closed_form_squares(alpha, n);
                assert_eq!(got.len(), expect.len());
                for (g, e) in got.iter().zip(expect.iter()) {
                    assert!((g - e).abs() < 1e-9, "n={n} alpha2={alpha2}: {g} vs {e}");
                }
            }
        }
    }

    #[test]
    fn cascade_power_of_two_is_deterministic() {
        let d = brute_force_cascade(4);
        assert_eq!(d.probability(2), Ratio::from_integer(1));
        assert_eq!(d.mean(), Ratio::from_integer(2));
    }

    #[test]
    fn cascade_three_strings() {
        let d = brute_force_cascade(3);
        assert_eq!(d.probability(1), Ratio::new(2, 3));
        assert_eq!(d.probability(0), Ratio::new(1, 3));
        assert_eq!(d.mean(), Ratio::new(2, 3));
    }

    #[test]
    fn cascade_ten_strings() {
        let d = brute_force_cascade(10);
        assert_eq!(d.probability(3), Ratio::new(8, 10));
        assert_eq!(d.probability(1), Ratio::new(2, 10));
        assert_eq!(d.probability(2), Ratio::from_integer(0));
        assert_eq!(d.mean(), Ratio::new(26, 10));
    }

    #[test]
    fn cascade_leading_block_mass() {
        // the pair-count k-1 carries weight 2^{k-1}/c whenever c > 1
        for c in 2..=200u64 {
            let k = (64 - c.leading_zeros()) as usize;
            let d = brute_force_cascade(c);
            assert_eq!(
                d.probability(k - 1),
                Ratio::new(1i128 << (k - 1), c as i128),
                "c={c}"
            );
        }
    }

    #[test]
    fn ideal_epr_states() {
        let one = ideal_epr_state(1).unwrap();
        assert_eq!(one.num_qubits(), 2);
        let r = std::f64::consts::FRAC_1_SQRT_2;
        assert!((one.amplitude(0b00).re - r).abs() < 1e-15);
        assert!((one.amplitude(0b11).re - r).abs() < 1e-15);

        let zero = ideal_epr_state(0).unwrap();
        assert_eq!(zero.num_qubits(), 0);
        assert!((zero.norm_sqr() - 1.0).abs() < 1e-15);

        assert_eq!(ideal_epr_state(11).unwrap_err(), OracleError::TooManyPairs(11));

        for r in 1..=3usize {
            let s = ideal_epr_state(r).unwrap();
            let squares = schmidt_squares(&s, &labels(Role::AliceData, r)).unwrap();
            for lam in squares {
                assert!((lam - 0.5f64.powi(r as i32)).abs() < 1e-12);
            }
        }
    }
}
