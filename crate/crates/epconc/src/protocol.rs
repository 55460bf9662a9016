//! End-to-end orchestration of the concentration protocol.
//!
//! One run starts from n identically prepared partially entangled pairs
//! and performs: weight counting and measurement on each side, the
//! ranking permutation on each side, the counting cascade with its
//! counter readout, and the discards that leave a known number of clean
//! pairs. Two engines execute the same steps:
//!
//! * **full** - both halves are simulated literally, ancilla qubits and
//!   all. Expensive, and kept deliberately so: it validates the
//!   compressed engine rather than assuming it.
//! * **mirrored** - exploits the matched-basis structure. Every state
//!   the protocol touches has the form sum c_x |x⟩_A |x⟩_B with both
//!   sides carrying identical labels through identical classical
//!   operations, so one amplitude per matched pair suffices and ancilla
//!   registers stay definite functions of x that never need amplitude
//!   storage.

use crate::analysis::YieldTable;
use crate::circuits::{cascade_network_on, counter_width, hamming_network_on, Circuit};
use crate::combinat::{binomial_expansion, extended_rank_table, CombinatError};
use crate::oracle::{ideal_epr_state, OracleError};
use crate::circuits::CircuitError;
use crate::statevec::{
    labels, labels_msb_first, BitString, EngineError, Label, Role, StateVector,
};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt;
use thiserror::Error;

/// Largest n the full engine runs end to end; the cascade briefly needs
/// 3k + log k extra qubits on top of the 2n data qubits.
pub const FULL_RUN_MAX_PAIRS: usize = 6;
/// Largest n the full engine will prepare a joint state for.
pub const FULL_PREPARE_MAX_PAIRS: usize = 10;
/// Largest n for the mirrored engine (2^n amplitudes).
pub const MIRRORED_MAX_PAIRS: usize = 20;

#[derive(Debug, Error, PartialEq)]
pub enum ProtocolError {
    #[error("alpha must lie strictly inside (0, 1), got {0}")]
    InvalidAlpha(f64),
    #[error("need at least one shared pair")]
    NoPairs,
    #[error("{engine} engine handles at most n = {max} pairs here, got n = {n}")]
    EngineLimit { engine: Engine, max: usize, n: usize },
    #[error("Alice and Bob diverged at the {stage} readout: {alice} vs {bob}")]
    MirrorDivergence { stage: &'static str, alice: u64, bob: u64 },
    #[error("ancilla {label} failed to return to its initial value")]
    AncillaNotRestored { label: Label },
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Combinat(#[from] CombinatError),
    #[error(transparent)]
    Circuit(#[from] CircuitError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
}

pub type Result<T> = std::result::Result<T, ProtocolError>;

/// Which simulation backend executes the run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Engine {
    Full,
    Mirrored,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Engine::Full => write!(f, "full"),
            Engine::Mirrored => write!(f, "mirrored"),
        }
    }
}

/// Input description: n shared pairs, each alpha|00⟩ + beta|11⟩ with
/// positive real coefficients.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairParams {
    pub(crate) alpha: f64,
    pub(crate) beta: f64,
    pub(crate) n: usize,
}

impl PairParams {
    pub fn new(alpha: f64, n: usize) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(ProtocolError::InvalidAlpha(alpha));
        }
        if n == 0 {
            return Err(ProtocolError::NoPairs);
        }
        Ok(PairParams {
            alpha,
            beta: (1.0 - alpha * alpha).sqrt(),
            n,
        })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn num_pairs(&self) -> usize {
        self.n
    }
}

/// Compressed representation of sum c_x |x⟩_A |x⟩_B: one amplitude per
/// matched basis label. The carried labels are Alice's; Bob's half is
/// implied.
#[derive(Debug, Clone)]
pub struct MirroredState {
    inner: StateVector,
}

impl MirroredState {
    pub fn state(&self) -> &StateVector {
        &self.inner
    }

    pub fn num_pairs(&self) -> usize {
        self.inner.num_qubits()
    }

    /// The matched-pair coefficients c_x.
    pub fn amplitudes(&self) -> &[Complex64] {
        self.inner.amplitudes()
    }
}

/// Output of state preparation under either engine.
#[derive(Debug, Clone)]
pub enum PreparedState {
    Full(StateVector),
    Mirrored(MirroredState),
}

/// Who is speaking in a classical message.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Party {
    Alice,
    Bob,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MessagePayload {
    /// The measured Hamming weight.
    HammingWeight(usize),
    /// The counter readout, i.e. the number of clean pairs.
    DistilledPairs(usize),
}

/// One classical message of the run. Both parties compute everything
/// locally and agree; the transcript records what one party would send
/// the other if only one of them ran the readouts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ClassicalMessage {
    pub from: Party,
    pub to: Party,
    pub payload: MessagePayload,
}

/// Everything observable from one protocol run.
#[derive(Debug, Clone)]
pub struct ProtocolOutcome {
    /// Measured Hamming weight.
    pub j: usize,
    /// Bit length of C(n,j).
    pub k: usize,
    /// Stop iteration of the cascade, 0 ≤ l ≤ k-1.
    pub l: usize,
    /// Number of clean pairs distilled, k - l - 1.
    pub pairs: usize,
    /// State of the retained qubits: the joint 2·pairs-qubit state under
    /// the full engine, the compressed pairs-qubit form under mirrored.
    pub final_state: StateVector,
    /// Fidelity of the retained state against the ideal pairs-pair
    /// reference state.
    pub fidelity_vs_ideal: f64,
    /// Seed this run was sampled with.
    pub seed: u64,
    pub engine: Engine,
    pub transcript: Vec<ClassicalMessage>,
}

/// Exact probability and outcome of one measurement branch.
#[derive(Debug, Clone, PartialEq)]
pub struct BranchOutcome {
    pub j: usize,
    pub l: usize,
    pub pairs: usize,
    pub probability: f64,
    pub fidelity: f64,
}

// ---------------------------------------------------------------------
// Preparation
// ---------------------------------------------------------------------

fn single_pair(p: &PairParams, a: Label, b: Label) -> StateVector {
    let mut amps = vec![Complex64::new(0.0, 0.0); 4];
    amps[0b00] = Complex64::new(p.alpha, 0.0);
    amps[0b11] = Complex64::new(p.beta, 0.0);
    StateVector::from_amplitudes(vec![a, b], amps).expect("pair state is normalized")
}

/// The joint 2n-qubit state, built as a literal tensor power of the
/// shared pair and then reordered so Alice's qubits come first.
pub fn prepare_full(p: &PairParams) -> Result<StateVector> {
    if p.n > FULL_PREPARE_MAX_PAIRS {
        return Err(ProtocolError::EngineLimit {
            engine: Engine::Full,
            max: FULL_PREPARE_MAX_PAIRS,
            n: p.n,
        });
    }
    let mut state = single_pair(p, Label::alice(0), Label::bob(0));
    for i in 1..p.n as u32 {
        state = state.tensor(&single_pair(p, Label::alice(i), Label::bob(i)));
    }
    let mut order = labels(Role::AliceData, p.n);
    order.extend(labels(Role::BobData, p.n));
    state.reorder_qubits(&order)?;
    Ok(state)
}

/// The compressed form: c_x = alpha^{n-H(x)} beta^{H(x)} on Alice's
/// labels, one amplitude per matched pair of basis labels.
pub fn prepare_mirrored(p: &PairParams) -> Result<MirroredState> {
    if p.n > MIRRORED_MAX_PAIRS {
        return Err(ProtocolError::EngineLimit {
            engine: Engine::Mirrored,
            max: MIRRORED_MAX_PAIRS,
            n: p.n,
        });
    }
    let n = p.n;
    let mut amps = Vec::with_capacity(1 << n);
    for x in 0..1u64 << n {
        let w = x.count_ones() as i32;
        amps.push(Complex64::new(
            p.alpha.powi(n as i32 - w) * p.beta.powi(w),
            0.0,
        ));
    }
    let inner = StateVector::from_amplitudes(labels(Role::AliceData, n), amps)?;
    Ok(MirroredState { inner })
}

pub fn prepare_state(p: &PairParams, engine: Engine) -> Result<PreparedState> {
    match engine {
        Engine::Full => prepare_full(p).map(PreparedState::Full),
        Engine::Mirrored => prepare_mirrored(p).map(PreparedState::Mirrored),
    }
}

// ---------------------------------------------------------------------
// Measurement plumbing
// ---------------------------------------------------------------------

/// How measurement outcomes are decided during a run.
enum RunMode<'r> {
    /// Sample both readouts from the generator.
    Sample(&'r mut ChaCha8Rng),
    /// Force the weight and counter readouts to fixed values, for exact
    /// branch-by-branch enumeration.
    Force { weight: u64, counter: u64 },
}

impl RunMode<'_> {
    fn forced_weight(&self) -> Option<u64> {
        match self {
            RunMode::Sample(_) => None,
            RunMode::Force { weight, .. } => Some(*weight),
        }
    }

    fn forced_counter(&self) -> Option<u64> {
        match self {
            RunMode::Sample(_) => None,
            RunMode::Force { counter, .. } => Some(*counter),
        }
    }
}

const IMPOSSIBLE: f64 = 1e-12;

/// Measure a register of the dense state, either sampling or forcing
/// the outcome. `None` means the forced branch has no amplitude.
fn resolve_measurement(
    state: &mut StateVector,
    qubits: &[Label],
    forced: Option<u64>,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Result<Option<(u64, f64)>> {
    match forced {
        None => {
            let rng = rng.as_mut().expect("sampling mode carries a generator");
            let record = state.measure(qubits, rng)?;
            Ok(Some((record.outcome.value(), record.probability)))
        }
        Some(value) => {
            let probs = state.outcome_probabilities(qubits)?;
            let p = probs.get(value as usize).copied().unwrap_or(0.0);
            if p < IMPOSSIBLE {
                return Ok(None);
            }
            let p = state.project(qubits, value)?;
            Ok(Some((value, p)))
        }
    }
}

/// Run a classical network over the state plus definite ancilla bits,
/// then measure a subregister of the network — without ever storing
/// ancilla amplitudes. Each basis label x of the state deterministically
/// fixes the network output, so the measurement classifies the state's
/// own basis indices. Ancilla bits listed in `restored` are checked to
/// come back to their initial values on every branch.
fn measure_through_network(
    state: &mut StateVector,
    circuit: &Circuit,
    ancillas: &[(Label, bool)],
    measured: &[Label],
    restored: &[Label],
    forced: Option<u64>,
    rng: &mut Option<&mut ChaCha8Rng>,
) -> Result<Option<(u64, f64)>> {
    let mut order: Vec<Label> = state.labels().to_vec();
    order.extend(ancillas.iter().map(|&(l, _)| l));
    let eval = circuit.classical(&order)?;
    let total = order.len();
    let anc_count = ancillas.len();
    let init: u64 = ancillas.iter().fold(0, |acc, &(_, b)| (acc << 1) | b as u64);
    let mask_of = |label: Label| -> Result<u64> {
        order
            .iter()
            .position(|&l| l == label)
            .map(|p| 1u64 << (total - 1 - p))
            .ok_or_else(|| EngineError::LabelNotFound(label).into())
    };
    let measured_masks: Vec<u64> = measured.iter().map(|&l| mask_of(l)).collect::<Result<_>>()?;
    let restored_masks: Vec<(u64, bool, Label)> = restored
        .iter()
        .map(|&l| {
            let bit = ancillas
                .iter()
                .find(|&&(al, _)| al == l)
                .map(|&(_, b)| b)
                .ok_or(ProtocolError::AncillaNotRestored { label: l })?;
            Ok((mask_of(l)?, bit, l))
        })
        .collect::<Result<_>>()?;

    let dim = state.amplitudes().len();
    let mut classes = vec![0u64; dim];
    let mut probs = vec![0.0f64; 1 << measured.len()];
    for x in 0..dim as u64 {
        let out = eval.apply((x << anc_count) | init);
        for &(mask, expect, label) in &restored_masks {
            if (out & mask != 0) != expect {
                return Err(ProtocolError::AncillaNotRestored { label });
            }
        }
        let mut class = 0u64;
        for &mask in &measured_masks {
            class = (class << 1) | u64::from(out & mask != 0);
        }
        classes[x as usize] = class;
        probs[class as usize] += state.amplitude(x).norm_sqr();
    }

    let outcome = match forced {
        Some(value) => {
            if probs.get(value as usize).copied().unwrap_or(0.0) < IMPOSSIBLE {
                return Ok(None);
            }
            value
        }
        None => {
            let rng = rng.as_mut().expect("sampling mode carries a generator");
            let draw: f64 = rand::Rng::gen(*rng);
            let mut acc = 0.0;
            let mut chosen = 0u64;
            for (v, &p) in probs.iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                acc += p;
                chosen = v as u64;
                if draw < acc {
                    break;
                }
            }
            chosen
        }
    };
    let p = state.project_where(|x| classes[x as usize] == outcome);
    Ok(Some((outcome, p)))
}

// ---------------------------------------------------------------------
// The protocol itself
// ---------------------------------------------------------------------

struct RunParts {
    j: usize,
    k: usize,
    l: usize,
    pairs: usize,
    final_state: StateVector,
    fidelity: f64,
    probability: f64,
}

fn transcript_for(j: usize, pairs: usize) -> Vec<ClassicalMessage> {
    vec![
        ClassicalMessage {
            from: Party::Alice,
            to: Party::Bob,
            payload: MessagePayload::HammingWeight(j),
        },
        ClassicalMessage {
            from: Party::Alice,
            to: Party::Bob,
            payload: MessagePayload::DistilledPairs(pairs),
        },
    ]
}

/// Fidelity of a compressed state against the uniform matched-pair
/// reference of the same width.
fn mirrored_reference_fidelity(state: &StateVector) -> f64 {
    let r = state.num_qubits();
    let sum: Complex64 = state.amplitudes().iter().sum();
    sum.norm_sqr() / (1u64 << r) as f64
}

fn run_mirrored(p: &PairParams, mut mode: RunMode) -> Result<Option<RunParts>> {
    let prepared = prepare_mirrored(p)?;
    let mut state = prepared.inner;
    let n = p.n;
    let data: Vec<Label> = state.labels().to_vec();

    // weight counting network, ancilla never materialized
    let anc = labels_msb_first(Role::MeasureAncilla, counter_width(n));
    let counter_circuit = hamming_network_on(&data, &anc);
    let anc_bits: Vec<(Label, bool)> = anc.iter().map(|&l| (l, false)).collect();
    let mut rng = None;
    let forced_weight = mode.forced_weight();
    let forced_counter = mode.forced_counter();
    if let RunMode::Sample(r) = &mut mode {
        rng = Some(&mut **r);
    }
    let Some((j, p_weight)) = measure_through_network(
        &mut state,
        &counter_circuit,
        &anc_bits,
        &anc,
        &[],
        forced_weight,
        &mut rng,
    )?
    else {
        return Ok(None);
    };
    let j = j as usize;

    let expansion = binomial_expansion(n, j)?;
    let k = expansion.k;

    if expansion.value == 1 {
        // weight 0 or n: nothing to concentrate, every qubit is definite
        if let Some(v) = forced_counter {
            if v != 0 {
                return Ok(None);
            }
        }
        state.discard_fixed_qubits(&data)?;
        let fidelity = mirrored_reference_fidelity(&state);
        return Ok(Some(RunParts {
            j,
            k,
            l: 0,
            pairs: 0,
            final_state: state,
            fidelity,
            probability: p_weight,
        }));
    }

    // ranking permutation, applied once: it acts identically on both
    // mirrored halves
    state.apply_classical_permutation(&data, &extended_rank_table(n, j)?)?;
    state.discard_fixed_qubits(&data[..n - k])?;
    let rank_register: Vec<Label> = state.labels().to_vec();

    // counting cascade with the expansion register pinned classically
    let flags = labels_msb_first(Role::ControlAncilla, k);
    let counter = labels_msb_first(Role::MeasureAncilla, counter_width(k - 1) + 1);
    let x_register = labels_msb_first(Role::XRegister, k);
    let cascade = cascade_network_on(&rank_register, &x_register, &flags, &counter)
        .specialize("x", &expansion.bits)?;
    let mut anc_bits: Vec<(Label, bool)> = flags.iter().map(|&l| (l, true)).collect();
    let counter_init = BitString::from_value(counter.len(), (k - 1) as u64)?;
    anc_bits.extend(counter.iter().zip(counter_init.bits()).map(|(&l, &b)| (l, b)));
    let Some((v, p_counter)) = measure_through_network(
        &mut state,
        &cascade,
        &anc_bits,
        &counter,
        &flags,
        forced_counter,
        &mut rng,
    )?
    else {
        return Ok(None);
    };
    let pairs = v as usize;
    let l = k - 1 - pairs;

    // the scanned prefix is definite on this branch; dropping it on both
    // (implied) sides leaves the clean pairs
    state.discard_fixed_qubits(&rank_register[..l + 1])?;
    let fidelity = mirrored_reference_fidelity(&state);
    Ok(Some(RunParts {
        j,
        k,
        l,
        pairs,
        final_state: state,
        fidelity,
        probability: p_weight * p_counter,
    }))
}

fn run_full(p: &PairParams, mut mode: RunMode) -> Result<Option<RunParts>> {
    if p.n > FULL_RUN_MAX_PAIRS {
        return Err(ProtocolError::EngineLimit {
            engine: Engine::Full,
            max: FULL_RUN_MAX_PAIRS,
            n: p.n,
        });
    }
    let mut state = prepare_full(p)?;
    let n = p.n;
    let alice: Vec<Label> = labels(Role::AliceData, n);
    let bob: Vec<Label> = labels(Role::BobData, n);

    let mut rng = None;
    let forced_weight = mode.forced_weight();
    let forced_counter = mode.forced_counter();
    if let RunMode::Sample(r) = &mut mode {
        rng = Some(&mut **r);
    }

    // Alice counts and measures her weight; Bob repeats the identical
    // procedure and must observe the same value with certainty
    let anc = labels_msb_first(Role::MeasureAncilla, counter_width(n));
    let anc_zero = BitString::from_value(anc.len(), 0)?;
    let mut weight = None;
    let mut weight_prob = 1.0;
    for (party, data) in [(Party::Alice, &alice), (Party::Bob, &bob)] {
        state = state.tensor(&StateVector::basis_state(anc.clone(), &anc_zero)?);
        hamming_network_on(data, &anc).apply_to_state(&mut state)?;
        let forced = match party {
            Party::Alice => forced_weight,
            // Bob samples when a generator is present so the agreement
            // check is a real one; in forced mode his branch is pinned
            // to Alice's and its probability is checked to be 1
            Party::Bob => {
                if rng.is_some() {
                    None
                } else {
                    weight
                }
            }
        };
        let Some((j, prob)) = resolve_measurement(&mut state, &anc, forced, &mut rng)? else {
            return Ok(None);
        };
        match weight {
            None => {
                weight = Some(j);
                weight_prob = prob;
            }
            Some(expected) => {
                if j != expected || (prob - 1.0).abs() > 1e-6 {
                    return Err(ProtocolError::MirrorDivergence {
                        stage: "weight",
                        alice: expected,
                        bob: j,
                    });
                }
            }
        }
        state.discard_fixed_qubits(&anc)?;
    }
    let j = weight.expect("weight measured") as usize;

    let expansion = binomial_expansion(n, j)?;
    let k = expansion.k;

    if expansion.value == 1 {
        if let Some(v) = forced_counter {
            if v != 0 {
                return Ok(None);
            }
        }
        let mut all = alice.clone();
        all.extend_from_slice(&bob);
        state.discard_fixed_qubits(&all)?;
        let fidelity = state.fidelity(&ideal_epr_state(0)?)?;
        return Ok(Some(RunParts {
            j,
            k,
            l: 0,
            pairs: 0,
            final_state: state,
            fidelity,
            probability: weight_prob,
        }));
    }

    // both parties apply the same ranking permutation to their half
    let table = extended_rank_table(n, j)?;
    state.apply_classical_permutation(&alice, &table)?;
    state.apply_classical_permutation(&bob, &table)?;
    state.discard_fixed_qubits(&alice[..n - k])?;
    state.discard_fixed_qubits(&bob[..n - k])?;
    let alice_rank = &alice[n - k..];
    let bob_rank = &bob[n - k..];

    // each party runs the cascade on their own ancillas; the counter
    // readouts must agree
    let flags = labels_msb_first(Role::ControlAncilla, k);
    let counter = labels_msb_first(Role::MeasureAncilla, counter_width(k - 1) + 1);
    let x_register = labels_msb_first(Role::XRegister, k);
    let flags_ones = BitString::from_value(flags.len(), (1u64 << k) - 1)?;
    let counter_init = BitString::from_value(counter.len(), (k - 1) as u64)?;
    let mut readout = None;
    let mut p_counter = 1.0;
    for (party, rank_register) in [(Party::Alice, alice_rank), (Party::Bob, bob_rank)] {
        state = state.tensor(&StateVector::basis_state(flags.clone(), &flags_ones)?);
        state = state.tensor(&StateVector::basis_state(counter.clone(), &counter_init)?);
        cascade_network_on(rank_register, &x_register, &flags, &counter)
            .specialize("x", &expansion.bits)?
            .apply_to_state(&mut state)?;
        let forced = match party {
            Party::Alice => forced_counter,
            Party::Bob => {
                if rng.is_some() {
                    None
                } else {
                    readout
                }
            }
        };
        let Some((v, prob)) = resolve_measurement(&mut state, &counter, forced, &mut rng)? else {
            return Ok(None);
        };
        match readout {
            None => {
                readout = Some(v);
                p_counter = prob;
            }
            Some(expected) => {
                if v != expected || (prob - 1.0).abs() > 1e-6 {
                    return Err(ProtocolError::MirrorDivergence {
                        stage: "counter",
                        alice: expected,
                        bob: v,
                    });
                }
            }
        }
        state.discard_fixed_qubits(&counter)?;
        state.discard_fixed_qubits(&flags)?;
    }
    let pairs = readout.expect("counter measured") as usize;
    let l = k - 1 - pairs;

    state.discard_fixed_qubits(&alice_rank[..l + 1])?;
    state.discard_fixed_qubits(&bob_rank[..l + 1])?;
    let fidelity = state.fidelity(&ideal_epr_state(pairs)?)?;
    Ok(Some(RunParts {
        j,
        k,
        l,
        pairs,
        final_state: state,
        fidelity,
        probability: weight_prob * p_counter,
    }))
}

fn run_once(p: &PairParams, engine: Engine, mode: RunMode) -> Result<Option<RunParts>> {
    match engine {
        Engine::Full => run_full(p, mode),
        Engine::Mirrored => run_mirrored(p, mode),
    }
}

/// Execute one seeded protocol run end to end.
pub fn run_protocol(p: &PairParams, seed: u64, engine: Engine) -> Result<ProtocolOutcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let parts = run_once(p, engine, RunMode::Sample(&mut rng))?
        .expect("sampled runs always land on a live branch");
    Ok(ProtocolOutcome {
        j: parts.j,
        k: parts.k,
        l: parts.l,
        pairs: parts.pairs,
        transcript: transcript_for(parts.j, parts.pairs),
        final_state: parts.final_state,
        fidelity_vs_ideal: parts.fidelity,
        seed,
        engine,
    })
}

/// Run many independent trials and aggregate them into a yield table.
/// Trial i draws from stream i of a generator seeded with `base_seed`,
/// so trial 0 reproduces `run_protocol` with the same seed, and results
/// are identical regardless of how the trials are scheduled.
pub fn run_trials(
    p: &PairParams,
    trials: u64,
    base_seed: u64,
    engine: Engine,
) -> Result<YieldTable> {
    let observations: Result<Vec<(usize, usize)>> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
            rng.set_stream(i);
            let parts = run_once(p, engine, RunMode::Sample(&mut rng))?
                .expect("sampled runs always land on a live branch");
            Ok((parts.j, parts.pairs))
        })
        .collect();
    YieldTable::from_trials(p.alpha, p.n, base_seed, &engine.to_string(), &observations?)
        .map_err(|e| match e {
            crate::analysis::AnalysisError::Combinat(c) => ProtocolError::Combinat(c),
            other => panic!("yield table construction failed: {other}"),
        })
}

/// Enumerate every measurement branch with its exact probability, by
/// forcing each (weight, counter) combination in turn. The returned
/// probabilities sum to one.
pub fn enumerate_outcomes(p: &PairParams, engine: Engine) -> Result<Vec<BranchOutcome>> {
    let mut out = Vec::new();
    for j in 0..=p.n {
        let expansion = binomial_expansion(p.n, j)?;
        let top = if expansion.value == 1 { 0 } else { expansion.k - 1 };
        for v in 0..=top as u64 {
            if let Some(parts) = run_once(
                p,
                engine,
                RunMode::Force { weight: j as u64, counter: v },
            )? {
                out.push(BranchOutcome {
                    j: parts.j,
                    l: parts.l,
                    pairs: parts.pairs,
                    probability: parts.probability,
                    fidelity: parts.fidelity,
                });
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::weight_probability;
    use crate::statevec::FIDELITY_TOL;

    const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn params_validation() {
        assert!(PairParams::new(SQRT_HALF, 3).is_ok());
        assert_eq!(PairParams::new(0.0, 3), Err(ProtocolError::InvalidAlpha(0.0)));
        assert_eq!(PairParams::new(1.0, 3), Err(ProtocolError::InvalidAlpha(1.0)));
        assert_eq!(PairParams::new(f64::NAN, 3).is_err(), true);
        assert_eq!(PairParams::new(0.5, 0), Err(ProtocolError::NoPairs));
        let p = PairParams::new(0.6, 2).unwrap();
        assert!((p.alpha() * p.alpha() + p.beta() * p.beta() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_coefficient_gives_product_state() {
        // alpha = 1 is rejected at the API boundary, but the preparation
        // math itself degrades gracefully to |00..0⟩
        let p = PairParams { alpha: 1.0, beta: 0.0, n: 1 };
        let s = prepare_full(&p).unwrap();
        assert_eq!(s.amplitude(0b00), Complex64::new(1.0, 0.0));
        for i in 1..4 {
            assert_eq!(s.amplitude(i).norm_sqr(), 0.0);
        }
    }

    #[test]
    fn prepared_amplitudes_follow_weight_pattern() {
        let p = PairParams::new(0.8, 3).unwrap();
        let s = prepare_full(&p).unwrap();
        let (a, b) = (p.alpha(), p.beta());
        // matched labels: coefficient alpha^{3-w} beta^w
        for x in 0..8u64 {
            let w = x.count_ones() as i32;
            let expect = a.powi(3 - w) * b.powi(w);
            assert!((s.amplitude((x << 3) | x).re - expect).abs() < 1e-12);
        }
        // any unmatched label pair carries nothing
        assert_eq!(s.amplitude((0b001 << 3) | 0b010).norm_sqr(), 0.0);
    }

    #[test]
    fn engines_prepare_identical_coefficients() {
        for n in 1..=5usize {
            let p = PairParams::new(0.55, n).unwrap();
            let full = prepare_full(&p).unwrap();
            let mirrored = prepare_mirrored(&p).unwrap();
            for x in 0..1u64 << n {
                let joint = full.amplitude((x << n) | x);
                let compressed = mirrored.amplitudes()[x as usize];
                assert!((joint - compressed).norm() < 1e-12, "n={n} x={x}");
            }
        }
    }

    #[test]
    fn prepare_guards_sizes() {
        let p = PairParams { alpha: SQRT_HALF, beta: SQRT_HALF, n: 11 };
        assert!(matches!(
            prepare_full(&p),
            Err(ProtocolError::EngineLimit { max: 10, .. })
        ));
        let p = PairParams { alpha: SQRT_HALF, beta: SQRT_HALF, n: 21 };
        assert!(matches!(
            prepare_mirrored(&p),
            Err(ProtocolError::EngineLimit { max: 20, .. })
        ));
        let p = PairParams { alpha: SQRT_HALF, beta: SQRT_HALF, n: 7 };
        assert!(matches!(
            run_protocol(&p, 1, Engine::Full),
            Err(ProtocolError::EngineLimit { max: 6, .. })
        ));
    }

    #[test]
    fn single_pair_cannot_concentrate() {
        // with one shared pair both weights give C(1,j) = 1 and no
        // known-good pair can be extracted
        let p = PairParams::new(SQRT_HALF, 1).unwrap();
        let mut seen = [0u32; 2];
        for seed in 0..40 {
            for engine in [Engine::Full, Engine::Mirrored] {
                let o = run_protocol(&p, seed, engine).unwrap();
                assert_eq!(o.pairs, 0);
                assert_eq!(o.k, 1);
                assert!(o.fidelity_vs_ideal >= 1.0 - FIDELITY_TOL);
                assert_eq!(o.final_state.num_qubits(), 0);
                if engine == Engine::Mirrored {
                    seen[o.j] += 1;
                }
            }
        }
        assert!(seen[0] > 0 && seen[1] > 0);
    }

    #[test]
    fn two_pairs_at_weight_one_always_yield_one_pair() {
        let p = PairParams::new(0.77, 2).unwrap();
        for engine in [Engine::Full, Engine::Mirrored] {
            let branches = enumerate_outcomes(&p, engine).unwrap();
            let b = branches.iter().find(|b| b.j == 1).unwrap();
            // C(2,1) = 2 = 10b: the cascade stops immediately, l = 0
            assert_eq!(b.pairs, 1);
            assert_eq!(b.l, 0);
            assert!((b.probability - weight_probability(0.77, 2, 1).unwrap()).abs() < 1e-12);
            assert!(b.fidelity >= 1.0 - FIDELITY_TOL);
            // no other branch exists for j = 1
            assert_eq!(branches.iter().filter(|b| b.j == 1).count(), 1);
        }
    }

    #[test]
    fn three_pairs_split_two_to_one() {
        // C(3,1) = 3: one pair with probability 2/3, none with 1/3
        let p = PairParams::new(SQRT_HALF, 3).unwrap();
        for engine in [Engine::Full, Engine::Mirrored] {
            let branches = enumerate_outcomes(&p, engine).unwrap();
            let total: f64 = branches.iter().map(|b| b.probability).sum();
            assert!((total - 1.0).abs() < 1e-10, "{engine}: branches sum to {total}");
            let p_j1: f64 = branches.iter().filter(|b| b.j == 1).map(|b| b.probability).sum();
            let p_j1_pairs1: f64 = branches
                .iter()
                .filter(|b| b.j == 1 && b.pairs == 1)
                .map(|b| b.probability)
                .sum();
            assert!((p_j1_pairs1 / p_j1 - 2.0 / 3.0).abs() < 1e-10);
            for b in &branches {
                assert!(b.fidelity >= 1.0 - FIDELITY_TOL);
                let k = binomial_expansion(3, b.j).unwrap().k;
                assert_eq!(b.pairs, k - b.l - 1);
            }
        }
    }

    #[test]
    fn engines_agree_branch_by_branch() {
        for n in 1..=4usize {
            for alpha2 in [0.25f64, 0.5, 0.75] {
                let p = PairParams::new(alpha2.sqrt(), n).unwrap();
                let full = enumerate_outcomes(&p, Engine::Full).unwrap();
                let mirrored = enumerate_outcomes(&p, Engine::Mirrored).unwrap();
                assert_eq!(full.len(), mirrored.len(), "n={n} a2={alpha2}");
                for (f, m) in full.iter().zip(mirrored.iter()) {
                    assert_eq!((f.j, f.l, f.pairs), (m.j, m.l, m.pairs));
                    assert!(
                        (f.probability - m.probability).abs() < 1e-10,
                        "n={n} a2={alpha2} branch {:?}: {} vs {}",
                        (f.j, f.pairs),
                        f.probability,
                        m.probability
                    );
                    assert!(f.fidelity >= 1.0 - FIDELITY_TOL);
                    assert!(m.fidelity >= 1.0 - FIDELITY_TOL);
                }
            }
        }
    }

    #[test]
    fn weight_branch_probabilities_match_analysis() {
        let p = PairParams::new(0.62, 4).unwrap();
        let branches = enumerate_outcomes(&p, Engine::Mirrored).unwrap();
        for j in 0..=4usize {
            let measured: f64 = branches.iter().filter(|b| b.j == j).map(|b| b.probability).sum();
            let expect = weight_probability(0.62, 4, j).unwrap();
            assert!((measured - expect).abs() < 1e-10, "j={j}");
        }
    }

    #[test]
    fn sampled_runs_are_seed_deterministic() {
        let p = PairParams::new(0.6, 4).unwrap();
        for engine in [Engine::Full, Engine::Mirrored] {
            let a = run_protocol(&p, 12345, engine).unwrap();
            let b = run_protocol(&p, 12345, engine).unwrap();
            assert_eq!((a.j, a.l, a.pairs), (b.j, b.l, b.pairs));
            assert_eq!(a.transcript, b.transcript);
        }
    }

    #[test]
    fn transcript_records_both_messages() {
        let p = PairParams::new(0.6, 3).unwrap();
        let o = run_protocol(&p, 9, Engine::Mirrored).unwrap();
        assert_eq!(o.transcript.len(), 2);
        assert_eq!(o.transcript[0].payload, MessagePayload::HammingWeight(o.j));
        assert_eq!(o.transcript[1].payload, MessagePayload::DistilledPairs(o.pairs));
        assert_eq!(o.transcript[0].from, Party::Alice);
        assert_eq!(o.transcript[0].to, Party::Bob);
    }

    #[test]
    fn trials_reproduce_single_run_at_matching_seed() {
        let p = PairParams::new(SQRT_HALF, 3).unwrap();
        let single = run_protocol(&p, 77, Engine::Mirrored).unwrap();
        let table = run_trials(&p, 1, 77, Engine::Mirrored).unwrap();
        assert_eq!(table.totals.trials, 1);
        assert_eq!(table.rows[single.j].trials, 1);
        assert!((table.totals.empirical_mean - single.pairs as f64).abs() < 1e-12);
    }

    #[test]
    fn trials_are_deterministic_and_validated() {
        let p = PairParams::new(0.7, 4).unwrap();
        let a = run_trials(&p, 500, 5, Engine::Mirrored).unwrap();
        let b = run_trials(&p, 500, 5, Engine::Mirrored).unwrap();
        assert_eq!(a, b);
        a.validate().unwrap();
    }

    #[test]
    fn monte_carlo_tracks_exact_mean() {
        // 20_000 trials at the balanced point: the empirical mean lands
        // within three standard errors of the exact value 1/2
        let p = PairParams::new(SQRT_HALF, 3).unwrap();
        let table = run_trials(&p, 20_000, 7, Engine::Mirrored).unwrap();
        let exact_mean = 0.5;
        let exact_var = 0.25; // E[pairs²] = 1/2 at this point
        let se = (exact_var / 20_000f64).sqrt();
        assert!(
            (table.totals.empirical_mean - exact_mean).abs() <= 3.0 * se,
            "mean {} outside 3se of {exact_mean}",
            table.totals.empirical_mean
        );
        for j in 0..=3usize {
            let p_j = weight_probability(SQRT_HALF, 3, j).unwrap();
            let freq = table.rows[j].trials as f64 / 20_000.0;
            let band = 4.0 * (p_j * (1.0 - p_j) / 20_000f64).sqrt();
            assert!((freq - p_j).abs() <= band, "j={j}: {freq} vs {p_j}");
        }
    }

    #[test]
    fn every_sampled_outcome_is_perfect() {
        for n in 1..=5usize {
            let p = PairParams::new(0.6, n).unwrap();
            for seed in 0..20u64 {
                for engine in [Engine::Full, Engine::Mirrored] {
                    if engine == Engine::Full && n > FULL_RUN_MAX_PAIRS {
                        continue;
                    }
                    let o = run_protocol(&p, seed, engine).unwrap();
                    assert!(
                        o.fidelity_vs_ideal >= 1.0 - FIDELITY_TOL,
                        "n={n} seed={seed} {engine}: fidelity {}",
                        o.fidelity_vs_ideal
                    );
                    assert_eq!(o.pairs, o.k - o.l - 1);
                    assert_eq!(o.final_state.num_qubits() % o.pairs.max(1), 0);
                }
            }
        }
    }
}
