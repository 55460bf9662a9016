//! Dense state-vector engine over a labeled qubit register.
//!
//! States are exact complex amplitude arrays of length 2^n. Every qubit
//! carries a [`Label`] (a role tag plus an index) and the register is
//! MSB-first: the label at list position 0 is the leftmost, most
//! significant bit of the basis index. All reversible operations are
//! permutations of basis states applied in place, so norms are preserved
//! exactly; measurement renormalizes the projected branch.

use num_complex::Complex64;
use rand::Rng;
use std::fmt;
use thiserror::Error;

/// A single complex probability amplitude.
pub type Amplitude = Complex64;

/// Per-amplitude agreement tolerance for exact reversible arithmetic.
pub const AMP_TOL: f64 = 1e-12;
/// Tolerance on squared norms and probabilities.
pub const NORM_TOL: f64 = 1e-10;
/// Tolerance on fidelities against ideal reference states.
pub const FIDELITY_TOL: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum EngineError {
    #[error("label {0} not present in the register")]
    LabelNotFound(Label),
    #[error("label {0} used more than once in the same operation")]
    DuplicateLabel(Label),
    #[error("bit string of width {width} does not fit a register of {qubits} qubits")]
    WidthMismatch { width: usize, qubits: usize },
    #[error("mapping on {0} values is not a bijection")]
    NotBijective(usize),
    #[error("qubit {label} is not in a definite basis state (minority probability {minority:.3e})")]
    QubitNotDefinite { label: Label, minority: f64 },
    #[error("state dimensions differ: {0} vs {1} qubits")]
    DimensionMismatch(usize, usize),
    #[error("amplitudes are not normalized (squared norm {0})")]
    NotNormalized(f64),
    #[error("non-finite amplitude at basis index {0}")]
    NonFinite(u64),
    #[error("register of {0} qubits exceeds the dense-engine limit of {MAX_QUBITS}")]
    RegisterTooLarge(usize),
}

pub type Result<T> = std::result::Result<T, EngineError>;

/// Hard cap on dense register width; 2^26 amplitudes is 1 GiB.
pub const MAX_QUBITS: usize = 26;

/// What a qubit is for. Determines the display prefix of its [`Label`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Role {
    /// One of Alice's shared data qubits.
    AliceData,
    /// One of Bob's shared data qubits.
    BobData,
    /// Holds one bit of a binomial-coefficient binary expansion.
    XRegister,
    /// Per-bit comparison flags in the counting cascade.
    ControlAncilla,
    /// Counter ancilla that is read out by a measurement.
    MeasureAncilla,
    /// Holds an integer rank value.
    RankRegister,
    /// Running register-length counter in the ranking network.
    SizeCounter,
    /// Running Hamming-weight counter in the ranking network.
    WeightCounter,
    /// Generic data qubit.
    Qubit,
}

impl Role {
    fn prefix(self) -> &'static str {
        match self {
            Role::AliceData => "a",
            Role::BobData => "b",
            Role::XRegister => "x",
            Role::ControlAncilla => "t",
            Role::MeasureAncilla => "m",
            Role::RankRegister => "y",
            Role::SizeCounter => "n",
            Role::WeightCounter => "w",
            Role::Qubit => "q",
        }
    }
}

/// Name of one qubit: a role tag plus an index within that role.
#[derive(Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Label {
    pub role: Role,
    pub index: u32,
}

impl Label {
    pub const fn new(role: Role, index: u32) -> Self {
        Label { role, index }
    }

    pub const fn qubit(index: u32) -> Self {
        Label::new(Role::Qubit, index)
    }

    pub const fn alice(index: u32) -> Self {
        Label::new(Role::AliceData, index)
    }

    pub const fn bob(index: u32) -> Self {
        Label::new(Role::BobData, index)
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.role.prefix(), self.index)
    }
}

impl fmt::Debug for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

/// Build `count` labels `role0 .. role{count-1}` in ascending index order.
pub fn labels(role: Role, count: usize) -> Vec<Label> {
    (0..count as u32).map(|i| Label::new(role, i)).collect()
}

/// Build `count` labels with descending indices, so the label written
/// `role{count-1}` sits in the leftmost (most significant) position.
pub fn labels_msb_first(role: Role, count: usize) -> Vec<Label> {
    (0..count as u32).rev().map(|i| Label::new(role, i)).collect()
}

/// Whether a control fires on |1⟩ (positive) or on |0⟩ (negative).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Polarity {
    Positive,
    Negative,
}

impl fmt::Display for Polarity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarity::Positive => write!(f, "+"),
            Polarity::Negative => write!(f, "-"),
        }
    }
}

/// Fixed-width binary word. Position 0 is the leftmost, most significant
/// bit, so the word prints exactly as it is written on paper.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitString {
    bits: Vec<bool>,
}

impl BitString {
    /// Parse from a string of `0`/`1` characters, e.g. `"101"`.
    pub fn parse(s: &str) -> Result<Self> {
        if s.is_empty() || s.len() > 63 {
            return Err(EngineError::WidthMismatch {
                width: s.len(),
                qubits: 63,
            });
        }
        let mut bits = Vec::with_capacity(s.len());
        for c in s.chars() {
            match c {
                '0' => bits.push(false),
                '1' => bits.push(true),
                _ => {
                    return Err(EngineError::WidthMismatch {
                        width: s.len(),
                        qubits: 63,
                    })
                }
            }
        }
        Ok(BitString { bits })
    }

    /// The width-bit binary representation of `value`.
    pub fn from_value(width: usize, value: u64) -> Result<Self> {
        if width == 0 || width > 63 {
            return Err(EngineError::WidthMismatch { width, qubits: 63 });
        }
        if value >> width != 0 {
            return Err(EngineError::WidthMismatch { width, qubits: 63 });
        }
        let bits = (0..width).map(|i| (value >> (width - 1 - i)) & 1 == 1).collect();
        Ok(BitString { bits })
    }

    pub fn from_bits(bits: Vec<bool>) -> Result<Self> {
        if bits.is_empty() || bits.len() > 63 {
            return Err(EngineError::WidthMismatch {
                width: bits.len(),
                qubits: 63,
            });
        }
        Ok(BitString { bits })
    }

    pub fn width(&self) -> usize {
        self.bits.len()
    }

    /// Integer value, reading the word MSB-first.
    pub fn value(&self) -> u64 {
        self.bits.iter().fold(0, |acc, &b| (acc << 1) | b as u64)
    }

    /// Bit at `pos`, counting 0 as the leftmost position.
    pub fn bit(&self, pos: usize) -> bool {
        self.bits[pos]
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "\"{self}\"")
    }
}

impl std::str::FromStr for BitString {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self> {
        BitString::parse(s)
    }
}

/// Record of one projective measurement in the computational basis.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementRecord {
    /// Qubits measured, leftmost first.
    pub qubits: Vec<Label>,
    /// Observed bit values, in the same order as `qubits`.
    pub outcome: BitString,
    /// Born probability of this outcome in the pre-measurement state.
    pub probability: f64,
}

/// Dense state vector over a labeled register.
#[derive(Clone, Debug)]
pub struct StateVector {
    labels: Vec<Label>,
    amps: Vec<Complex64>,
}

impl StateVector {
    /// The zero-qubit state: a single unit amplitude.
    pub fn empty() -> Self {
        StateVector {
            labels: Vec::new(),
            amps: vec![Complex64::new(1.0, 0.0)],
        }
    }

    /// Computational basis state |value⟩ over the given labels.
    pub fn basis_state(labels: Vec<Label>, value: &BitString) -> Result<Self> {
        if value.width() != labels.len() {
            return Err(EngineError::WidthMismatch {
                width: value.width(),
                qubits: labels.len(),
            });
        }
        Self::check_register(&labels)?;
        let mut amps = vec![Complex64::new(0.0, 0.0); 1usize << labels.len()];
        amps[value.value() as usize] = Complex64::new(1.0, 0.0);
        Ok(StateVector { labels, amps })
    }

    /// Basis state over generic qubit labels `q0 .. q{n-1}`.
    pub fn make_basis_state(num_qubits: usize, value: &BitString) -> Result<Self> {
        Self::basis_state(labels(Role::Qubit, num_qubits), value)
    }

    /// Build a state from explicit amplitudes. The array length must be
    /// 2^n and the squared norm must be 1 within `NORM_TOL`.
    pub fn from_amplitudes(labels: Vec<Label>, amps: Vec<Complex64>) -> Result<Self> {
        Self::check_register(&labels)?;
        if amps.len() != 1usize << labels.len() {
            return Err(EngineError::WidthMismatch {
                width: amps.len(),
                qubits: labels.len(),
            });
        }
        let mut norm = 0.0;
        for (i, a) in amps.iter().enumerate() {
            if !a.re.is_finite() || !a.im.is_finite() {
                return Err(EngineError::NonFinite(i as u64));
            }
            norm += a.norm_sqr();
        }
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(EngineError::NotNormalized(norm));
        }
        Ok(StateVector { labels, amps })
    }

    fn check_register(labels: &[Label]) -> Result<()> {
        if labels.len() > MAX_QUBITS {
            return Err(EngineError::RegisterTooLarge(labels.len()));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(EngineError::DuplicateLabel(*l));
            }
        }
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.labels.len()
    }

    pub fn labels(&self) -> &[Label] {
        &self.labels
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    /// Amplitude of the basis state with the given MSB-first index.
    pub fn amplitude(&self, index: u64) -> Complex64 {
        self.amps[index as usize]
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(Complex64::norm_sqr).sum()
    }

    /// List position of `label`; position 0 is the most significant bit.
    fn position(&self, label: Label) -> Result<usize> {
        let mut found = None;
        for (i, l) in self.labels.iter().enumerate() {
            if *l == label {
                if found.is_some() {
                    return Err(EngineError::DuplicateLabel(label));
                }
                found = Some(i);
            }
        }
        found.ok_or(EngineError::LabelNotFound(label))
    }

    fn bit_mask(&self, position: usize) -> u64 {
        1u64 << (self.labels.len() - 1 - position)
    }

    /// Resolve controls into (mask, expected-value) pair, rejecting
    /// duplicates and any label listed in `exclude`.
    fn control_masks(&self, controls: &[(Label, Polarity)], exclude: &[Label]) -> Result<(u64, u64)> {
        let mut cmask = 0u64;
        let mut cval = 0u64;
        for &(label, polarity) in controls {
            if exclude.contains(&label) {
                return Err(EngineError::DuplicateLabel(label));
            }
            let mask = self.bit_mask(self.position(label)?);
            if cmask & mask != 0 {
                return Err(EngineError::DuplicateLabel(label));
            }
            cmask |= mask;
            if polarity == Polarity::Positive {
                cval |= mask;
            }
        }
        Ok((cmask, cval))
    }

    /// Bit masks of a multi-qubit register, leftmost label first.
    fn register_masks(&self, register: &[Label]) -> Result<Vec<u64>> {
        let mut masks = Vec::with_capacity(register.len());
        for (i, &label) in register.iter().enumerate() {
            if register[..i].contains(&label) {
                return Err(EngineError::DuplicateLabel(label));
            }
            masks.push(self.bit_mask(self.position(label)?));
        }
        Ok(masks)
    }

    /// NOT on `target`, applied on every basis state whose controls all
    /// match their declared polarity. An empty control list is an
    /// unconditional NOT.
    pub fn apply_not(&mut self, target: Label, controls: &[(Label, Polarity)]) -> Result<()> {
        let tmask = self.bit_mask(self.position(target)?);
        let (cmask, cval) = self.control_masks(controls, &[target])?;
        for i in 0..self.amps.len() as u64 {
            if i & cmask == cval && i & tmask == 0 {
                self.amps.swap(i as usize, (i | tmask) as usize);
            }
        }
        Ok(())
    }

    /// Controlled addition of the constant `c` to a register, modulo
    /// 2^m where m is the register width. The register labels are given
    /// leftmost (most significant) first.
    pub fn apply_add_constant(
        &mut self,
        register: &[Label],
        c: i64,
        controls: &[(Label, Polarity)],
    ) -> Result<()> {
        let masks = self.register_masks(register)?;
        let (cmask, cval) = self.control_masks(controls, register)?;
        let m = register.len();
        if m == 0 {
            return Ok(());
        }
        let modulus = 1u64 << m;
        let shift = c.rem_euclid(modulus as i64) as u64;
        if shift == 0 {
            return Ok(());
        }
        let spread = spread_table(&masks);
        let regmask: u64 = masks.iter().copied().fold(0, |a, b| a | b);
        let mut cycle = vec![Complex64::new(0.0, 0.0); modulus as usize];
        for base in 0..self.amps.len() as u64 {
            if base & regmask != 0 || base & cmask != cval {
                continue;
            }
            for v in 0..modulus {
                cycle[v as usize] = self.amps[(base | spread[v as usize]) as usize];
            }
            for v in 0..modulus {
                let dest = (v + shift) & (modulus - 1);
                self.amps[(base | spread[dest as usize]) as usize] = cycle[v as usize];
            }
        }
        Ok(())
    }

    /// Relabel basis states of a register by an arbitrary bijection on
    /// its value range: |v⟩ ↦ |perm[v]⟩. The table is checked to be a
    /// bijection before anything is touched.
    pub fn apply_classical_permutation(&mut self, register: &[Label], perm: &[u64]) -> Result<()> {
        let masks = self.register_masks(register)?;
        let m = register.len();
        let modulus = 1u64 << m;
        check_bijection(perm, modulus)?;
        let spread = spread_table(&masks);
        let regmask: u64 = masks.iter().copied().fold(0, |a, b| a | b);
        let mut cycle = vec![Complex64::new(0.0, 0.0); modulus as usize];
        for base in 0..self.amps.len() as u64 {
            if base & regmask != 0 {
                continue;
            }
            for v in 0..modulus {
                cycle[v as usize] = self.amps[(base | spread[v as usize]) as usize];
            }
            for v in 0..modulus {
                self.amps[(base | spread[perm[v as usize] as usize]) as usize] = cycle[v as usize];
            }
        }
        Ok(())
    }

    /// Reorder the register so its labels appear in the given order.
    /// Purely a change of qubit position; amplitudes move accordingly.
    pub fn reorder_qubits(&mut self, order: &[Label]) -> Result<()> {
        if order.len() != self.labels.len() {
            return Err(EngineError::DimensionMismatch(order.len(), self.labels.len()));
        }
        // old bit mask of the label that lands at each new position
        let mut old_masks = Vec::with_capacity(order.len());
        for (i, &label) in order.iter().enumerate() {
            if order[..i].contains(&label) {
                return Err(EngineError::DuplicateLabel(label));
            }
            old_masks.push(self.bit_mask(self.position(label)?));
        }
        let n = self.labels.len();
        let mut new_amps = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        for old in 0..self.amps.len() as u64 {
            let mut new = 0u64;
            for (pos, &mask) in old_masks.iter().enumerate() {
                if old & mask != 0 {
                    new |= 1 << (n - 1 - pos);
                }
            }
            new_amps[new as usize] = self.amps[old as usize];
        }
        self.amps = new_amps;
        self.labels = order.to_vec();
        Ok(())
    }

    /// Tensor product; `self`'s qubits occupy the leftmost positions.
    pub fn tensor(&self, other: &StateVector) -> StateVector {
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        let mut amps = Vec::with_capacity(self.amps.len() * other.amps.len());
        for a in &self.amps {
            for b in &other.amps {
                amps.push(a * b);
            }
        }
        StateVector { labels, amps }
    }

    /// Born probabilities of all 2^q outcomes of measuring `qubits`,
    /// indexed by the outcome value read leftmost-label first.
    pub fn outcome_probabilities(&self, qubits: &[Label]) -> Result<Vec<f64>> {
        let masks = self.register_masks(qubits)?;
        let mut probs = vec![0.0f64; 1usize << qubits.len()];
        for (i, amp) in self.amps.iter().enumerate() {
            let p = amp.norm_sqr();
            if p == 0.0 {
                continue;
            }
            probs[gather_value(i as u64, &masks) as usize] += p;
        }
        Ok(probs)
    }

    /// Project onto the basis indices selected by `keep` and
    /// renormalize. Returns the probability mass kept; a return of 0
    /// leaves the state zeroed and unusable, so callers must check.
    pub fn project_where(&mut self, keep: impl Fn(u64) -> bool) -> f64 {
        let mut kept = 0.0f64;
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if keep(i as u64) {
                kept += amp.norm_sqr();
            } else {
                *amp = Complex64::new(0.0, 0.0);
            }
        }
        if kept > 0.0 {
            let scale = 1.0 / kept.sqrt();
            for amp in &mut self.amps {
                *amp *= scale;
            }
        }
        kept
    }

    /// Project onto the branch where `qubits` read `outcome`, and
    /// renormalize. Returns the Born probability of that branch.
    pub fn project(&mut self, qubits: &[Label], outcome: u64) -> Result<f64> {
        let masks = self.register_masks(qubits)?;
        let mut kept = 0.0f64;
        for (i, amp) in self.amps.iter_mut().enumerate() {
            if gather_value(i as u64, &masks) == outcome {
                kept += amp.norm_sqr();
            } else {
                *amp = Complex64::new(0.0, 0.0);
            }
        }
        if kept > 0.0 {
            let scale = 1.0 / kept.sqrt();
            for amp in &mut self.amps {
                *amp *= scale;
            }
        }
        Ok(kept)
    }

    /// Measure `qubits` in the computational basis, collapsing the state.
    /// Sampling is driven entirely by `rng`, so a seeded generator makes
    /// the outcome reproducible.
    pub fn measure<R: Rng>(&mut self, qubits: &[Label], rng: &mut R) -> Result<MeasurementRecord> {
        let probs = self.outcome_probabilities(qubits)?;
        let draw: f64 = rng.gen();
        let mut acc = 0.0;
        let mut chosen = None;
        for (v, &p) in probs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            acc += p;
            chosen = Some(v as u64);
            if draw < acc {
                break;
            }
        }
        let outcome = chosen.expect("normalized state has at least one outcome");
        let probability = self.project(qubits, outcome)?;
        Ok(MeasurementRecord {
            qubits: qubits.to_vec(),
            outcome: BitString::from_value(qubits.len(), outcome)?,
            probability,
        })
    }

    /// Remove qubits that are already in a definite basis state. Refuses
    /// any qubit still carrying amplitude on both bit values, which
    /// would require a partial trace rather than a discard.
    pub fn discard_fixed_qubits(&mut self, qubits: &[Label]) -> Result<()> {
        if qubits.is_empty() {
            return Ok(());
        }
        let mut fixed_mask = 0u64;
        let mut fixed_val = 0u64;
        for &label in qubits {
            let mask = self.bit_mask(self.position(label)?);
            if fixed_mask & mask != 0 {
                return Err(EngineError::DuplicateLabel(label));
            }
            let mut p_one = 0.0f64;
            for (i, amp) in self.amps.iter().enumerate() {
                if i as u64 & mask != 0 {
                    p_one += amp.norm_sqr();
                }
            }
            let minority = p_one.min(1.0 - p_one);
            if minority > NORM_TOL {
                return Err(EngineError::QubitNotDefinite { label, minority });
            }
            fixed_mask |= mask;
            if p_one > 0.5 {
                fixed_val |= mask;
            }
        }
        let keep: Vec<Label> = self
            .labels
            .iter()
            .copied()
            .filter(|l| !qubits.contains(l))
            .collect();
        let n = self.labels.len();
        let mut new_amps = vec![Complex64::new(0.0, 0.0); 1usize << keep.len()];
        let kept_positions: Vec<usize> = (0..n)
            .filter(|&p| fixed_mask & self.bit_mask(p) == 0)
            .collect();
        let mut kept_norm = 0.0f64;
        for old in 0..self.amps.len() as u64 {
            if old & fixed_mask != fixed_val {
                continue;
            }
            let mut new = 0u64;
            for (newpos, &oldpos) in kept_positions.iter().enumerate() {
                if old & self.bit_mask(oldpos) != 0 {
                    new |= 1 << (kept_positions.len() - 1 - newpos);
                }
            }
            let amp = self.amps[old as usize];
            kept_norm += amp.norm_sqr();
            new_amps[new as usize] = amp;
        }
        let scale = 1.0 / kept_norm.sqrt();
        for amp in &mut new_amps {
            *amp *= scale;
        }
        self.labels = keep;
        self.amps = new_amps;
        Ok(())
    }

    /// |⟨other|self⟩|², compared positionally on basis indices.
    pub fn fidelity(&self, other: &StateVector) -> Result<f64> {
        if self.num_qubits() != other.num_qubits() {
            return Err(EngineError::DimensionMismatch(
                self.num_qubits(),
                other.num_qubits(),
            ));
        }
        let overlap: Complex64 = self
            .amps
            .iter()
            .zip(other.amps.iter())
            .map(|(a, b)| b.conj() * a)
            .sum();
        Ok(overlap.norm_sqr())
    }
}

/// Table mapping a register value to its scattered bit pattern inside a
/// full basis index, given the per-bit masks (leftmost bit first).
pub(crate) fn spread_table(masks: &[u64]) -> Vec<u64> {
    let m = masks.len();
    let modulus = 1u64 << m;
    (0..modulus)
        .map(|v| {
            let mut bits = 0u64;
            for (r, &mask) in masks.iter().enumerate() {
                if (v >> (m - 1 - r)) & 1 == 1 {
                    bits |= mask;
                }
            }
            bits
        })
        .collect()
}

/// Read a register value out of a full basis index.
pub(crate) fn gather_value(index: u64, masks: &[u64]) -> u64 {
    let mut v = 0u64;
    for &mask in masks {
        v = (v << 1) | u64::from(index & mask != 0);
    }
    v
}

pub(crate) fn check_bijection(perm: &[u64], modulus: u64) -> Result<()> {
    if perm.len() as u64 != modulus {
        return Err(EngineError::NotBijective(perm.len()));
    }
    let mut seen = vec![false; modulus as usize];
    for &v in perm {
        if v >= modulus || seen[v as usize] {
            return Err(EngineError::NotBijective(perm.len()));
        }
        seen[v as usize] = true;
    }
    Ok(())
}
