//! Builders for the three reversible networks used by the protocol.
//!
//! A [`Circuit`] is an ordered list of primitive steps over named
//! registers: polarity-controlled NOTs, controlled additions of a
//! constant, and table-driven classical permutations. Every circuit here
//! is a bijection on basis states, so it can be run two ways: applied to
//! a dense [`StateVector`], or evaluated as a plain index permutation
//! through a [`ClassicalEvaluator`]. The two paths share the step
//! definitions but none of the arithmetic, which is what makes the
//! exhaustive basis checks meaningful.
//!
//! The networks:
//!
//! * **Hamming counter** - one controlled increment per data qubit,
//!   accumulating the Hamming weight into an ancilla:
//!   |x⟩|0⟩ → |x⟩|H(x)⟩.
//! * **Ranking network** - alternating threshold/reduce stages that peel
//!   one output bit per round, converting a rank y into the y-th
//!   smallest fixed-weight string (and, run backwards, the reverse).
//! * **Counting cascade** - three stages over a rank register y and the
//!   binary expansion x of the superposition size: comparison flags are
//!   raised into a control ancilla, a counter is decremented once per
//!   leading matched position, and the flags are uncomputed, leaving the
//!   counter holding the number of clean pairs.

use crate::combinat::{binomial_or_zero, CombinatError};
use crate::statevec::{
    check_bijection, gather_value, labels, labels_msb_first, spread_table, BitString, EngineError,
    Label, Polarity, Role, StateVector,
};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum CircuitError {
    #[error("step {step} references label {label} outside the register map")]
    UnknownLabel { step: usize, label: Label },
    #[error("step {step} uses label {label} twice")]
    DuplicateLabel { step: usize, label: Label },
    #[error("permutation table in step {step} is not a bijection")]
    TableNotBijective { step: usize },
    #[error("no register named {0} in this circuit")]
    NoSuchRegister(String),
    #[error("register {register} has width {width}, value has width {value_width}")]
    RegisterWidthMismatch { register: String, width: usize, value_width: usize },
    #[error("step {step} writes to specialized register {register}")]
    SpecializeWrite { step: usize, register: String },
    #[error(transparent)]
    Combinat(#[from] CombinatError),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

pub type Result<T> = std::result::Result<T, CircuitError>;

/// One control wire: the label and the bit value it fires on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Control {
    pub label: Label,
    pub polarity: Polarity,
}

impl Control {
    pub fn positive(label: Label) -> Self {
        Control { label, polarity: Polarity::Positive }
    }

    pub fn negative(label: Label) -> Self {
        Control { label, polarity: Polarity::Negative }
    }
}

/// Named bijection table for a classical permutation step.
#[derive(Debug, Clone, PartialEq)]
pub struct PermTable {
    pub name: String,
    pub map: Vec<u64>,
}

impl PermTable {
    fn inverted(&self) -> PermTable {
        let mut map = vec![0u64; self.map.len()];
        for (v, &p) in self.map.iter().enumerate() {
            map[p as usize] = v as u64;
        }
        let name = match self.name.strip_suffix("_inv") {
            Some(base) => base.to_string(),
            None => format!("{}_inv", self.name),
        };
        PermTable { name, map }
    }
}

/// One primitive reversible step.
#[derive(Debug, Clone, PartialEq)]
pub enum Step {
    Not {
        target: Label,
        controls: Vec<Control>,
    },
    AddConst {
        /// Register labels, most significant first.
        register: Vec<Label>,
        amount: i64,
        controls: Vec<Control>,
    },
    Permutation {
        register: Vec<Label>,
        table: PermTable,
    },
}

/// An ordered reversible network over named registers.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    registers: Vec<(String, Vec<Label>)>,
    steps: Vec<Step>,
}

impl Circuit {
    pub fn new(registers: Vec<(&str, Vec<Label>)>) -> Self {
        Circuit {
            registers: registers.into_iter().map(|(n, l)| (n.to_string(), l)).collect(),
            steps: Vec::new(),
        }
    }

    fn push(&mut self, step: Step) {
        self.steps.push(step);
    }

    pub fn steps(&self) -> &[Step] {
        &self.steps
    }

    pub fn registers(&self) -> &[(String, Vec<Label>)] {
        &self.registers
    }

    pub fn register(&self, name: &str) -> Result<&[Label]> {
        self.registers
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, l)| l.as_slice())
            .ok_or_else(|| CircuitError::NoSuchRegister(name.to_string()))
    }

    /// All labels of the circuit in register-map order, leftmost first.
    pub fn all_labels(&self) -> Vec<Label> {
        self.registers.iter().flat_map(|(_, l)| l.iter().copied()).collect()
    }

    /// Check the structural invariants: every step references only
    /// mapped labels, no step uses a label twice, and every permutation
    /// table is a bijection of the right size.
    pub fn validate(&self) -> Result<()> {
        let known = self.all_labels();
        for (i, step) in self.steps.iter().enumerate() {
            let mut used: Vec<Label> = Vec::new();
            let mut touch = |label: Label| -> Result<()> {
                if !known.contains(&label) {
                    return Err(CircuitError::UnknownLabel { step: i, label });
                }
                if used.contains(&label) {
                    return Err(CircuitError::DuplicateLabel { step: i, label });
                }
                used.push(label);
                Ok(())
            };
            match step {
                Step::Not { target, controls } => {
                    touch(*target)?;
                    for c in controls {
                        touch(c.label)?;
                    }
                }
                Step::AddConst { register, controls, .. } => {
                    for &l in register {
                        touch(l)?;
                    }
                    for c in controls {
                        touch(c.label)?;
                    }
                }
                Step::Permutation { register, table } => {
                    for &l in register {
                        touch(l)?;
                    }
                    check_bijection(&table.map, 1u64 << register.len())
                        .map_err(|_| CircuitError::TableNotBijective { step: i })?;
                }
            }
        }
        Ok(())
    }

    /// Run the circuit on a dense state.
    pub fn apply_to_state(&self, state: &mut StateVector) -> Result<()> {
        for step in &self.steps {
            match step {
                Step::Not { target, controls } => {
                    let c: Vec<(Label, Polarity)> =
                        controls.iter().map(|c| (c.label, c.polarity)).collect();
                    state.apply_not(*target, &c)?;
                }
                Step::AddConst { register, amount, controls } => {
                    let c: Vec<(Label, Polarity)> =
                        controls.iter().map(|c| (c.label, c.polarity)).collect();
                    state.apply_add_constant(register, *amount, &c)?;
                }
                Step::Permutation { register, table } => {
                    state.apply_classical_permutation(register, &table.map)?;
                }
            }
        }
        Ok(())
    }

    /// Compile the circuit into a fast index permutation over the given
    /// label order (leftmost label is the most significant index bit).
    pub fn classical(&self, order: &[Label]) -> Result<ClassicalEvaluator> {
        let n = order.len();
        let pos = |step: usize, label: Label| -> Result<u64> {
            order
                .iter()
                .position(|&l| l == label)
                .map(|p| 1u64 << (n - 1 - p))
                .ok_or(CircuitError::UnknownLabel { step, label })
        };
        let mut compiled = Vec::with_capacity(self.steps.len());
        for (i, step) in self.steps.iter().enumerate() {
            compiled.push(match step {
                Step::Not { target, controls } => {
                    let tmask = pos(i, *target)?;
                    let (cmask, cval) = compile_controls(controls, &mut |l| pos(i, l))?;
                    CompiledStep::Not { tmask, cmask, cval }
                }
                Step::AddConst { register, amount, controls } => {
                    let masks: Vec<u64> =
                        register.iter().map(|&l| pos(i, l)).collect::<Result<_>>()?;
                    let (cmask, cval) = compile_controls(controls, &mut |l| pos(i, l))?;
                    let modulus = 1u64 << register.len();
                    CompiledStep::Add {
                        regmask: masks.iter().fold(0, |a, &b| a | b),
                        spread: spread_table(&masks),
                        masks,
                        shift: amount.rem_euclid(modulus as i64) as u64,
                        modulus,
                        cmask,
                        cval,
                    }
                }
                Step::Permutation { register, table } => {
                    let masks: Vec<u64> =
                        register.iter().map(|&l| pos(i, l)).collect::<Result<_>>()?;
                    CompiledStep::Perm {
                        regmask: masks.iter().fold(0, |a, &b| a | b),
                        spread: spread_table(&masks),
                        masks,
                        table: table.map.clone(),
                    }
                }
            });
        }
        Ok(ClassicalEvaluator { width: n, steps: compiled })
    }

    /// The inverse network: steps reversed, each step inverted.
    pub fn inverse(&self) -> Circuit {
        let steps = self
            .steps
            .iter()
            .rev()
            .map(|step| match step {
                Step::Not { target, controls } => Step::Not {
                    target: *target,
                    controls: controls.clone(),
                },
                Step::AddConst { register, amount, controls } => Step::AddConst {
                    register: register.clone(),
                    amount: -amount,
                    controls: controls.clone(),
                },
                Step::Permutation { register, table } => Step::Permutation {
                    register: register.clone(),
                    table: table.inverted(),
                },
            })
            .collect();
        Circuit {
            registers: self.registers.clone(),
            steps,
        }
    }

    /// Pin a register to a classical value. Controls on its qubits are
    /// resolved: steps whose resolved controls can never fire are
    /// dropped, the rest keep only their remaining controls. Steps that
    /// would write into the pinned register are rejected.
    pub fn specialize(&self, register: &str, value: &BitString) -> Result<Circuit> {
        let pinned = self.register(register)?.to_vec();
        if pinned.len() != value.width() {
            return Err(CircuitError::RegisterWidthMismatch {
                register: register.to_string(),
                width: pinned.len(),
                value_width: value.width(),
            });
        }
        let bit_of = |label: Label| -> Option<bool> {
            pinned.iter().position(|&l| l == label).map(|p| value.bit(p))
        };
        let mut steps = Vec::new();
        'steps: for (i, step) in self.steps.iter().enumerate() {
            let (writes, controls): (Vec<Label>, &Vec<Control>) = match step {
                Step::Not { target, controls } => (vec![*target], controls),
                Step::AddConst { register, controls, .. } => (register.clone(), controls),
                Step::Permutation { register, .. } => (register.clone(), &EMPTY_CONTROLS),
            };
            for w in &writes {
                if bit_of(*w).is_some() {
                    return Err(CircuitError::SpecializeWrite {
                        step: i,
                        register: register.to_string(),
                    });
                }
            }
            let mut kept = Vec::new();
            for c in controls {
                match bit_of(c.label) {
                    Some(bit) => {
                        let wanted = c.polarity == Polarity::Positive;
                        if bit != wanted {
                            continue 'steps; // can never fire
                        }
                    }
                    None => kept.push(*c),
                }
            }
            steps.push(match step {
                Step::Not { target, .. } => Step::Not { target: *target, controls: kept },
                Step::AddConst { register, amount, .. } => Step::AddConst {
                    register: register.clone(),
                    amount: *amount,
                    controls: kept,
                },
                Step::Permutation { register, table } => Step::Permutation {
                    register: register.clone(),
                    table: table.clone(),
                },
            });
        }
        Ok(Circuit {
            registers: self
                .registers
                .iter()
                .filter(|(n, _)| n != register)
                .cloned()
                .collect(),
            steps,
        })
    }

    /// Text netlist, one step per line.
    pub fn to_netlist(&self) -> String {
        let mut out = String::new();
        for step in &self.steps {
            match step {
                Step::Not { target, controls } => {
                    out.push_str(&format!("NOT {target} controls=[{}]\n", join_controls(controls)));
                }
                Step::AddConst { register, amount, controls } => {
                    out.push_str(&format!(
                        "ADD register=[{}] c={amount} controls=[{}]\n",
                        join_labels(register),
                        join_controls(controls)
                    ));
                }
                Step::Permutation { register, table } => {
                    out.push_str(&format!(
                        "PERM register=[{}] table={}\n",
                        join_labels(register),
                        table.name
                    ));
                }
            }
        }
        out
    }
}

static EMPTY_CONTROLS: Vec<Control> = Vec::new();

fn join_labels(labels: &[Label]) -> String {
    labels.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(",")
}

fn join_controls(controls: &[Control]) -> String {
    controls
        .iter()
        .map(|c| format!("{}:{}", c.label, c.polarity))
        .collect::<Vec<_>>()
        .join(",")
}

fn compile_controls(
    controls: &[Control],
    pos: &mut dyn FnMut(Label) -> Result<u64>,
) -> Result<(u64, u64)> {
    let mut cmask = 0u64;
    let mut cval = 0u64;
    for c in controls {
        let mask = pos(c.label)?;
        cmask |= mask;
        if c.polarity == Polarity::Positive {
            cval |= mask;
        }
    }
    Ok((cmask, cval))
}

enum CompiledStep {
    Not { tmask: u64, cmask: u64, cval: u64 },
    Add {
        masks: Vec<u64>,
        spread: Vec<u64>,
        regmask: u64,
        shift: u64,
        modulus: u64,
        cmask: u64,
        cval: u64,
    },
    Perm {
        masks: Vec<u64>,
        spread: Vec<u64>,
        regmask: u64,
        table: Vec<u64>,
    },
}

/// A circuit compiled to a bare permutation of basis indices.
pub struct ClassicalEvaluator {
    width: usize,
    steps: Vec<CompiledStep>,
}

impl ClassicalEvaluator {
    pub fn width(&self) -> usize {
        self.width
    }

    /// Thread one basis index through the whole circuit.
    pub fn apply(&self, mut index: u64) -> u64 {
        for step in &self.steps {
            match step {
                CompiledStep::Not { tmask, cmask, cval } => {
                    if index & cmask == *cval {
                        index ^= tmask;
                    }
                }
                CompiledStep::Add { masks, spread, regmask, shift, modulus, cmask, cval } => {
                    if index & cmask == *cval {
                        let v = gather_value(index, masks);
                        index = (index & !regmask) | spread[((v + shift) % modulus) as usize];
                    }
                }
                CompiledStep::Perm { masks, spread, regmask, table } => {
                    let v = gather_value(index, masks);
                    index = (index & !regmask) | spread[table[v as usize] as usize];
                }
            }
        }
        index
    }
}

/// Width in bits of the counter needed to hold values 0..=max.
pub fn counter_width(max: usize) -> usize {
    (usize::BITS - max.leading_zeros()).max(1) as usize
}

// ---------------------------------------------------------------------
// Hamming-weight counter
// ---------------------------------------------------------------------

/// The weight counter over caller-supplied labels: one controlled
/// increment of `ancilla` per data qubit.
pub fn hamming_network_on(data: &[Label], ancilla: &[Label]) -> Circuit {
    let mut circuit = Circuit::new(vec![("data", data.to_vec()), ("ancilla", ancilla.to_vec())]);
    for &d in data {
        circuit.push(Step::AddConst {
            register: ancilla.to_vec(),
            amount: 1,
            controls: vec![Control::positive(d)],
        });
    }
    circuit
}

/// |x1..xn⟩|0..0⟩ → |x1..xn⟩|H(x)⟩ over canonical labels; the ancilla
/// has ceil(log2(n+1)) qubits.
pub fn build_hamming_network(n: usize) -> Circuit {
    assert!(n >= 1);
    let data = labels(Role::Qubit, n);
    let ancilla = labels_msb_first(Role::MeasureAncilla, counter_width(n));
    hamming_network_on(&data, &ancilla)
}

// ---------------------------------------------------------------------
// Ranking network
// ---------------------------------------------------------------------

/// Which way the ranking network runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermDirection {
    /// String to rank: |x⟩ is replaced by its position y in increasing
    /// binary order among same-weight strings.
    ForwardF,
    /// Rank to string: |y⟩|n⟩|j⟩|0..0⟩ → |0⟩|0⟩|0⟩|unrank(y)⟩.
    InverseF,
}

/// Kind of one ranking-network stage.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermStepKind {
    /// Writes the branch bit: fires when the remaining rank lies at or
    /// above the count of strings whose next bit is 0.
    Threshold,
    /// Consumes the branch bit: subtracts the block offset from the
    /// rank and steps the running length/weight counters down.
    Reduce,
}

/// Schedule entry for the ranking network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PermStep {
    pub kind: PermStepKind,
    pub step_index: usize,
    /// How many rank-register bits the stage still acts on.
    pub acting_width: usize,
}

/// The alternating threshold/reduce schedule: one pair per output bit,
/// each pair acting on one fewer rank bit than the previous.
pub fn perm_step_schedule(n: usize) -> Vec<PermStep> {
    (0..n)
        .flat_map(|i| {
            [
                PermStep { kind: PermStepKind::Threshold, step_index: i, acting_width: n - i },
                PermStep { kind: PermStepKind::Reduce, step_index: i, acting_width: n - i },
            ]
        })
        .collect()
}

/// Ranking network over caller-supplied registers. `rank` holds the
/// integer being unranked (n qubits, leftmost first), `len_counter` and
/// `weight_counter` hold the running (length, weight) pair, `output`
/// receives the unranked string one bit per round.
pub fn perm_network_on(
    rank: &[Label],
    len_counter: &[Label],
    weight_counter: &[Label],
    output: &[Label],
    n: usize,
    j: usize,
    direction: PermDirection,
) -> Result<Circuit> {
    assert_eq!(rank.len(), n);
    assert_eq!(output.len(), n);
    let _ = crate::combinat::binomial(n, j)?; // domain check
    let wn = len_counter.len();
    let wj = weight_counter.len();
    let mut circuit = Circuit::new(vec![
        ("rank", rank.to_vec()),
        ("len", len_counter.to_vec()),
        ("weight", weight_counter.to_vec()),
        ("output", output.to_vec()),
    ]);
    for spec in perm_step_schedule(n) {
        let i = spec.step_index;
        let wy = spec.acting_width;
        let mut register: Vec<Label> = rank[i..].to_vec();
        register.extend_from_slice(len_counter);
        register.extend_from_slice(weight_counter);
        register.push(output[i]);
        let table = match spec.kind {
            PermStepKind::Threshold => threshold_table(i, wy, wn, wj)?,
            PermStepKind::Reduce => reduce_table(i, wy, wn, wj)?,
        };
        circuit.push(Step::Permutation { register, table });
    }
    debug_assert!(circuit.validate().is_ok());
    let circuit = match direction {
        PermDirection::InverseF => circuit,
        PermDirection::ForwardF => circuit.inverse(),
    };
    Ok(circuit)
}

/// Canonical-label ranking network for parameters (n, j).
pub fn build_perm_network(n: usize, j: usize, direction: PermDirection) -> Result<Circuit> {
    assert!(n >= 1);
    let w = counter_width(n);
    perm_network_on(
        &labels_msb_first(Role::RankRegister, n),
        &labels_msb_first(Role::SizeCounter, w),
        &labels_msb_first(Role::WeightCounter, w),
        &labels(Role::Qubit, n),
        n,
        j,
        direction,
    )
}

fn split_fields(v: u64, wn: usize, wj: usize) -> (u64, u64, u64, u64) {
    let b = v & 1;
    let jv = (v >> 1) & ((1 << wj) - 1);
    let nv = (v >> (1 + wj)) & ((1 << wn) - 1);
    let yv = v >> (1 + wj + wn);
    (yv, nv, jv, b)
}

fn join_fields(yv: u64, nv: u64, jv: u64, b: u64, wn: usize, wj: usize) -> u64 {
    (((yv << wn) | nv) << (wj + 1)) | (jv << 1) | b
}

/// Flip the output bit when the remaining rank falls in the upper block,
/// i.e. at or beyond the count of continuations that start with a 0 bit.
fn threshold_table(step: usize, wy: usize, wn: usize, wj: usize) -> Result<PermTable> {
    let size = 1u64 << (wy + wn + wj + 1);
    let mut map = Vec::with_capacity(size as usize);
    for v in 0..size {
        let (yv, nv, jv, b) = split_fields(v, wn, wj);
        let flips = nv > 0 && yv >= binomial_or_zero(nv as usize - 1, jv as usize)?;
        map.push(join_fields(yv, nv, jv, b ^ flips as u64, wn, wj));
    }
    Ok(PermTable { name: format!("cmp{step}"), map })
}

/// Controlled on the branch bit, subtract the block offset from the rank
/// and decrement the weight counter; the length counter always steps
/// down. All register arithmetic wraps, keeping the map a bijection on
/// the whole domain.
fn reduce_table(step: usize, wy: usize, wn: usize, wj: usize) -> Result<PermTable> {
    let size = 1u64 << (wy + wn + wj + 1);
    let ymod = 1u64 << wy;
    let nmod = 1u64 << wn;
    let jmod = 1u64 << wj;
    let mut map = Vec::with_capacity(size as usize);
    for v in 0..size {
        let (yv, nv, jv, b) = split_fields(v, wn, wj);
        let (yv2, nv2, jv2) = if b == 1 {
            let offset = if nv == 0 {
                0
            } else {
                binomial_or_zero(nv as usize - 1, jv as usize)?
            };
            (
                (yv + ymod - (offset % ymod)) % ymod,
                (nv + nmod - 1) % nmod,
                (jv + jmod - 1) % jmod,
            )
        } else {
            (yv, (nv + nmod - 1) % nmod, jv)
        };
        map.push(join_fields(yv2, nv2, jv2, b, wn, wj));
    }
    Ok(PermTable { name: format!("sub{step}"), map })
}

// ---------------------------------------------------------------------
// Counting cascade
// ---------------------------------------------------------------------

/// The cascade over caller-supplied registers. `rank` (y) and
/// `expansion` (x) have k qubits each, leftmost first; `flags` (the
/// control ancilla, prepared all-ones) also k; `counter` (the
/// measurement ancilla, prepared to k-1) is wide enough to hold k-1.
///
/// Stage 1 lowers flag i when the expansion bit is 1 and the rank bit
/// is 0. Stage 2 decrements the counter once per flag scanned from the
/// left, each decrement conditioned on every flag scanned so far still
/// being raised, so the first lowered flag freezes the counter; the
/// lowest-significance position is never scanned. Stage 3 repeats
/// stage 1, restoring the flags.
pub fn cascade_network_on(
    rank: &[Label],
    expansion: &[Label],
    flags: &[Label],
    counter: &[Label],
) -> Circuit {
    let k = rank.len();
    assert_eq!(expansion.len(), k);
    assert_eq!(flags.len(), k);
    assert!(!counter.is_empty());
    let mut circuit = Circuit::new(vec![
        ("y", rank.to_vec()),
        ("x", expansion.to_vec()),
        ("t", flags.to_vec()),
        ("m", counter.to_vec()),
    ]);
    let compare_stage: Vec<Step> = (0..k)
        .map(|p| Step::Not {
            target: flags[p],
            controls: vec![Control::positive(expansion[p]), Control::negative(rank[p])],
        })
        .collect();
    for step in &compare_stage {
        circuit.push(step.clone());
    }
    for p in 0..k.saturating_sub(1) {
        circuit.push(Step::AddConst {
            register: counter.to_vec(),
            amount: -1,
            controls: (0..=p).map(|q| Control::positive(flags[q])).collect(),
        });
    }
    for step in compare_stage {
        circuit.push(step);
    }
    circuit
}

/// Canonical-label cascade for bit length k; the counter has
/// ceil(log2 k) + 1 qubits.
pub fn build_cascade_network(k: usize) -> Circuit {
    assert!(k >= 1);
    cascade_network_on(
        &labels_msb_first(Role::RankRegister, k),
        &labels_msb_first(Role::XRegister, k),
        &labels_msb_first(Role::ControlAncilla, k),
        &labels_msb_first(Role::MeasureAncilla, counter_width(k.saturating_sub(1)) + 1),
    )
}
