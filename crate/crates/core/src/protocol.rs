//! Two-party simulation of the controlled-rotation protocol.
//!
//! Alice holds `a` and `A`, Bob holds `b` and `B`. A shared register is used
//! internally, but every quantum operation goes through [`Register::act`] or
//! [`Register::measure`], which refuse qubits the acting party does not own
//! and log the action. Everything that crosses between the parties is an
//! [`Envelope`] in the run transcript.
//!
//! Steps:
//! 1. Alice applies a controlled phase `a → A`, measures `a` in the σx basis
//!    and announces the sign.
//! 2. Bob applies `σz` to `b` on a `−1` announcement.
//! 3. Bob applies a controlled phase `b → B`.
//! 4. Bob measures `b` with the three-element POVM. Outcome 1 leaves `U(θ)`
//!    on `(A, B)`, outcome 2 leaves `σzσz U(θ)` (up to phase) which both
//!    parties undo locally, outcome 3 is a failure with a known residual
//!    controlled rotation.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::entanglement::e_alpha;
use crate::error::{Error, Result};
use crate::model::{build_povm, check_alpha, optimum, phi_vectors, PovmSet, PovmWeights, ProtocolParams};
use crate::qmath::{fidelity, kron, psd_sqrt2, Complex, ComplexMatrix, Mat2, Qubit, StateVector, I, ONE, ZERO};

use Qubit::{AliceAncilla, AliceTarget, BobAncilla, BobTarget};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PartyRole {
    Alice,
    Bob,
}

impl PartyRole {
    pub fn owns(&self, q: Qubit) -> bool {
        match self {
            PartyRole::Alice => matches!(q, AliceAncilla | AliceTarget),
            PartyRole::Bob => matches!(q, BobAncilla | BobTarget),
        }
    }

    pub fn peer(&self) -> PartyRole {
        match self {
            PartyRole::Alice => PartyRole::Bob,
            PartyRole::Bob => PartyRole::Alice,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ClassicalMessage {
    /// Alice's σx outcome, `+1` or `-1`.
    XResult { sign: i8 },
    /// Bob's POVM outcome, 1 to 3.
    PovmResult { branch: u8 },
    /// Bob's computational-basis outcome on `b` after a failure.
    BasisResult { bit: u8 },
}

impl ClassicalMessage {
    /// Variant name, as used in transcripts.
    pub fn kind(&self) -> &'static str {
        match self {
            ClassicalMessage::XResult { .. } => "XResult",
            ClassicalMessage::PovmResult { .. } => "PovmResult",
            ClassicalMessage::BasisResult { .. } => "BasisResult",
        }
    }

    /// The only legal sender of this message kind.
    pub fn sender(&self) -> PartyRole {
        match self {
            ClassicalMessage::XResult { .. } => PartyRole::Alice,
            _ => PartyRole::Bob,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub from: PartyRole,
    pub to: PartyRole,
    pub message: ClassicalMessage,
}

impl Envelope {
    fn send(message: ClassicalMessage) -> Self {
        let from = message.sender();
        Envelope {
            from,
            to: from.peer(),
            message,
        }
    }
}

/// One logged quantum action.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LocalOp {
    pub party: PartyRole,
    pub qubits: Vec<Qubit>,
    pub what: &'static str,
}

/// Shared simulation register with per-party access control.
#[derive(Debug, Clone)]
pub struct Register {
    state: StateVector,
    log: Vec<LocalOp>,
}

impl Register {
    pub fn new(state: StateVector) -> Self {
        Register { state, log: Vec::new() }
    }

    pub fn state(&self) -> &StateVector {
        &self.state
    }

    pub fn log(&self) -> &[LocalOp] {
        &self.log
    }

    fn check(&self, party: PartyRole, qubits: &[Qubit]) -> Result<()> {
        match qubits.iter().find(|&&q| !party.owns(q)) {
            Some(&qubit) => Err(Error::NonLocal { party, qubit }),
            None => Ok(()),
        }
    }

    /// Apply `gate` on `targets` on behalf of `party`.
    pub fn act(&mut self, party: PartyRole, gate: &ComplexMatrix, targets: &[Qubit], what: &'static str) -> Result<()> {
        self.check(party, targets)?;
        self.state = self.state.apply(gate, targets)?;
        self.log.push(LocalOp {
            party,
            qubits: targets.to_vec(),
            what,
        });
        Ok(())
    }

    /// Projective measurement of `q` onto the orthonormal `basis`; the
    /// qubit is discarded afterwards. Returns the outcome index.
    pub fn measure<R: Rng + ?Sized>(
        &mut self,
        party: PartyRole,
        q: Qubit,
        basis: [[Complex; 2]; 2],
        rng: &mut R,
        what: &'static str,
    ) -> Result<usize> {
        self.check(party, &[q])?;
        let branches = [self.state.contract(q, basis[0])?, self.state.contract(q, basis[1])?];
        let probs = [branches[0].norm_sqr(), branches[1].norm_sqr()];
        let k = sample_index(&probs, rng.random::<f64>());
        let [b0, b1] = branches;
        self.state = if k == 0 { b0 } else { b1 }.normalized()?;
        self.log.push(LocalOp {
            party,
            qubits: vec![q],
            what,
        });
        Ok(k)
    }

    fn replace(&mut self, party: PartyRole, qubits: &[Qubit], state: StateVector, what: &'static str) -> Result<()> {
        self.check(party, qubits)?;
        self.state = state;
        self.log.push(LocalOp {
            party,
            qubits: qubits.to_vec(),
            what,
        });
        Ok(())
    }
}

/// Pick index `k` with probability proportional to `probs[k]`, given a
/// uniform draw `u ∈ [0, 1)`. Zero-weight entries are never chosen.
pub(crate) fn sample_index(probs: &[f64], u: f64) -> usize {
    let total: f64 = probs.iter().sum();
    let target = u * total;
    let mut acc = 0.0;
    let mut last = 0;
    for (k, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = k;
        if target < acc {
            return k;
        }
    }
    last
}

/// Seeded ChaCha8 stream. Trial `k` of a Monte Carlo run with seed `s`
/// draws from stream `k` of the generator keyed by `s`, so trials are
/// independent of scheduling order.
#[derive(Debug, Clone)]
pub struct TrialRng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

impl TrialRng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        TrialRng { seed, stream, inner }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }
}

impl RngCore for TrialRng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

fn controlled_z() -> ComplexMatrix {
    ComplexMatrix::from_rows(
        4,
        vec![
            ONE, ZERO, ZERO, ZERO, //
            ZERO, ONE, ZERO, ZERO, //
            ZERO, ZERO, ONE, ZERO, //
            ZERO, ZERO, ZERO, -ONE,
        ],
    )
    .expect("4x4")
}

/// `U(θ) = cos(θ/2) I + i sin(θ/2) σz⊗σz`
pub fn target_gate(theta: f64) -> ComplexMatrix {
    let plus = Complex::from_polar(1.0, 0.5 * theta);
    let minus = plus.conj();
    ComplexMatrix::from_rows(
        4,
        vec![
            plus, ZERO, ZERO, ZERO, //
            ZERO, minus, ZERO, ZERO, //
            ZERO, ZERO, minus, ZERO, //
            ZERO, ZERO, ZERO, plus,
        ],
    )
    .expect("4x4")
}

pub fn zz() -> ComplexMatrix {
    let z = ComplexMatrix::from(Mat2::pauli_z());
    kron(&z, &z).expect("4x4")
}

/// Map an angle to `(−π, π]`.
pub fn wrap_angle(theta: f64) -> f64 {
    let mut t = theta.rem_euclid(2.0 * PI);
    if t > PI {
        t -= 2.0 * PI;
    }
    t
}

fn target_labels() -> Vec<Qubit> {
    vec![AliceTarget, BobTarget]
}

/// `cos(α/2)|00⟩ + i sin(α/2)|11⟩` on `(a, b)`.
pub fn prepare_resource(alpha: f64) -> Result<StateVector> {
    check_alpha(alpha)?;
    let (c, s) = crate::model::alpha_half(alpha);
    StateVector::new(vec![AliceAncilla, BobAncilla], vec![Complex::from(c), ZERO, ZERO, I * s])
}

/// Haar-random two-qubit input on `(A, B)`.
pub fn random_input<R: Rng + ?Sized>(rng: &mut R) -> StateVector {
    loop {
        let amps: Vec<Complex> = (0..4)
            .map(|_| Complex::new(rng.sample(StandardNormal), rng.sample(StandardNormal)))
            .collect();
        if let Ok(s) = StateVector::new(target_labels(), amps).and_then(StateVector::normalized) {
            return s;
        }
    }
}

/// Register `(a, A, B, b)` holding the resource pair and the input.
pub fn initial_register(alpha: f64, input: &StateVector) -> Result<Register> {
    if input.labels() != [AliceTarget, BobTarget] {
        return Err(Error::LabelMismatch(input.labels().to_vec(), target_labels()));
    }
    let resource = prepare_resource(alpha)?;
    let r = resource.amplitudes();
    let phi = input.amplitudes();
    let mut amps = vec![ZERO; 16];
    for a in 0..2 {
        for b in 0..2 {
            for t in 0..4 {
                amps[(a << 3) | (t << 1) | b] = r[(a << 1) | b] * phi[t];
            }
        }
    }
    Ok(Register::new(StateVector::new(
        vec![AliceAncilla, AliceTarget, BobTarget, BobAncilla],
        amps,
    )?))
}

/// Alice: controlled phase `a → A`, σx measurement of `a`, announce the sign.
pub fn step1_alice<R: Rng + ?Sized>(reg: &mut Register, rng: &mut R) -> Result<Envelope> {
    reg.act(PartyRole::Alice, &controlled_z(), &[AliceAncilla, AliceTarget], "controlled-phase a->A")?;
    let h = Complex::from(FRAC_1_SQRT_2);
    let basis = [[h, h], [h, -h]];
    let k = reg.measure(PartyRole::Alice, AliceAncilla, basis, rng, "measure sigma_x on a")?;
    let sign = if k == 0 { 1 } else { -1 };
    Ok(Envelope::send(ClassicalMessage::XResult { sign }))
}

/// Bob: undo the sign of the `|1⟩_b` branch when Alice reports `−1`.
pub fn step2_bob(reg: &mut Register, msg: &Envelope) -> Result<()> {
    match msg.message {
        ClassicalMessage::XResult { sign: 1 } => Ok(()),
        ClassicalMessage::XResult { sign: -1 } => {
            reg.act(PartyRole::Bob, &ComplexMatrix::from(Mat2::pauli_z()), &[BobAncilla], "sigma_z on b")
        }
        other => Err(Error::UnexpectedMessage {
            expected: "XResult(+1|-1)",
            found: format!("{other:?}"),
        }),
    }
}

/// Bob: controlled phase `b → B`.
pub fn step3_bob(reg: &mut Register) -> Result<()> {
    reg.act(PartyRole::Bob, &controlled_z(), &[BobAncilla, BobTarget], "controlled-phase b->B")
}

/// Known controlled rotation left on `(A, B)` after a failed run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResidualGate {
    /// In `(−π, π]`.
    pub theta_f: f64,
    pub b_outcome: u8,
}

/// POVM elements together with their Kraus operators.
#[derive(Debug, Clone)]
pub struct Protocol {
    povm: PovmSet,
    kraus: [Mat2; 3],
    /// Normalized `φ1`, `φ2`: the state `b` is left in on outcomes 1 and 2.
    success_dirs: [[f64; 2]; 2],
}

impl Protocol {
    pub fn new(params: ProtocolParams, weights: PovmWeights) -> Result<Self> {
        let povm = build_povm(&params, &weights);
        if !povm.is_valid() {
            return Err(Error::InvalidPovm(povm.e3_min_eigenvalue));
        }
        let kraus = [psd_sqrt2(&povm.e1)?, psd_sqrt2(&povm.e2)?, psd_sqrt2(&povm.e3)?];
        let (p1, p2) = phi_vectors(&params);
        let unit = |v: [f64; 2]| {
            let n = v[0].hypot(v[1]);
            [v[0] / n, v[1] / n]
        };
        Ok(Protocol {
            povm,
            kraus,
            success_dirs: [unit(p1), unit(p2)],
        })
    }

    /// Uses the weights of [`optimum`].
    pub fn optimal(params: ProtocolParams) -> Result<Self> {
        Protocol::new(params, optimum(&params).weights())
    }

    pub fn params(&self) -> &ProtocolParams {
        &self.povm.params
    }

    pub fn weights(&self) -> &PovmWeights {
        &self.povm.weights
    }

    pub fn povm(&self) -> &PovmSet {
        &self.povm
    }

    pub fn kraus(&self) -> &[Mat2; 3] {
        &self.kraus
    }

    /// Bob's POVM on `b`. On outcomes 1 and 2 `b` factors out and is
    /// discarded; on outcome 3 it stays in the register.
    pub fn step4_bob_povm<R: Rng + ?Sized>(&self, reg: &mut Register, rng: &mut R) -> Result<u8> {
        let state = reg.state();
        let mut posts = self
            .kraus
            .iter()
            .map(|k| state.apply_single(k, BobAncilla))
            .collect::<Result<Vec<_>>>()?;
        let probs: Vec<f64> = posts.iter().map(StateVector::norm_sqr).collect();
        let k = sample_index(&probs, rng.random::<f64>());
        let post = posts.swap_remove(k);
        self.commit_outcome(reg, k, post)?;
        Ok(k as u8 + 1)
    }

    /// Update the register as if Bob had observed `branch`. Returns the
    /// probability of that outcome.
    pub fn postselect(&self, reg: &mut Register, branch: u8) -> Result<f64> {
        if !(1..=3).contains(&branch) {
            return Err(Error::WrongBranch {
                expected: "1, 2 or 3",
                found: branch,
            });
        }
        let k = (branch - 1) as usize;
        let post = reg.state().apply_single(&self.kraus[k], BobAncilla)?;
        let p = post.norm_sqr();
        self.commit_outcome(reg, k, post)?;
        Ok(p)
    }

    fn commit_outcome(&self, reg: &mut Register, k: usize, post: StateVector) -> Result<()> {
        let post = post.normalized()?;
        let post = if k < 2 {
            let d = self.success_dirs[k];
            post.contract(BobAncilla, [Complex::from(d[0]), Complex::from(d[1])])?
                .normalized()?
        } else {
            post
        };
        reg.replace(PartyRole::Bob, &[BobAncilla], post, "povm on b")
    }

    /// Bob measures `b` in the computational basis after outcome 3 and
    /// reads off the controlled rotation now acting on `(A, B)`.
    pub fn failure_residual<R: Rng + ?Sized>(&self, reg: &mut Register, branch: u8, rng: &mut R) -> Result<(ResidualGate, Envelope)> {
        if branch != 3 {
            return Err(Error::WrongBranch {
                expected: "3",
                found: branch,
            });
        }
        let j = reg.measure(PartyRole::Bob, BobAncilla, [[ONE, ZERO], [ZERO, ONE]], rng, "measure z on b")?;
        let root = &self.kraus[2];
        let (c, s) = self.params().alpha_half();
        let half = (root.get(j, 1).re * s).atan2(root.get(j, 0).re * c);
        let residual = ResidualGate {
            theta_f: wrap_angle(2.0 * half),
            b_outcome: j as u8,
        };
        Ok((residual, Envelope::send(ClassicalMessage::BasisResult { bit: j as u8 })))
    }

    /// Steps 1 to 4 on a register prepared by [`initial_register`].
    fn steps<R: Rng + ?Sized>(&self, reg: &mut Register, transcript: &mut Vec<Envelope>, rng: &mut R) -> Result<u8> {
        let msg = step1_alice(reg, rng)?;
        transcript.push(msg);
        step2_bob(reg, &msg)?;
        step3_bob(reg)?;
        self.step4_bob_povm(reg, rng)
    }

    /// One run. In [`RunMode::Deterministic`] a failure is followed by
    /// [`recover_with_bell`].
    pub fn run_once(&self, input: &StateVector, mode: RunMode, rng: &mut TrialRng) -> Result<RunOutcome> {
        let mut reg = initial_register(self.params().alpha(), input)?;
        let mut transcript = Vec::new();
        let branch = self.steps(&mut reg, &mut transcript, rng)?;
        let mut residual = None;
        let mut bell_pairs_consumed = 0;
        let mut ops = Vec::new();
        if branch == 3 {
            let (r, msg) = self.failure_residual(&mut reg, branch, rng)?;
            transcript.push(Envelope::send(ClassicalMessage::PovmResult { branch }));
            transcript.push(msg);
            residual = Some(r);
            if mode == RunMode::Deterministic {
                let remaining = wrap_angle(self.params().theta() - r.theta_f);
                ops.extend_from_slice(reg.log());
                reg = recover_with_bell(reg.state(), remaining, &mut transcript, rng)?;
                bell_pairs_consumed = 1;
            }
        } else {
            finish_success(branch, &mut reg, &mut transcript)?;
        }
        ops.extend_from_slice(reg.log());
        Ok(RunOutcome {
            branch,
            transcript,
            final_state: reg.state,
            residual,
            bell_pairs_consumed,
            rng_seed: rng.seed(),
            trial: rng.stream(),
            ops,
        })
    }
}

/// Branch 1: nothing to do. Branch 2: Bob announces the outcome and both
/// parties apply `σz` to their target.
pub fn finish_success(branch: u8, reg: &mut Register, transcript: &mut Vec<Envelope>) -> Result<()> {
    match branch {
        1 => Ok(()),
        2 => {
            transcript.push(Envelope::send(ClassicalMessage::PovmResult { branch }));
            let z = ComplexMatrix::from(Mat2::pauli_z());
            reg.act(PartyRole::Bob, &z, &[BobTarget], "sigma_z on B")?;
            reg.act(PartyRole::Alice, &z, &[AliceTarget], "sigma_z on A")
        }
        other => Err(Error::WrongBranch {
            expected: "1 or 2",
            found: other,
        }),
    }
}

/// Implement `U(theta_remaining)` on `state` (labels `(A, B)`) with a fresh
/// Bell pair. Outcome 3 has probability zero for a Bell resource; should
/// rounding ever produce it, the residual is compensated the same way.
pub fn recover_with_bell<R: Rng + ?Sized>(
    state: &StateVector,
    theta_remaining: f64,
    transcript: &mut Vec<Envelope>,
    rng: &mut R,
) -> Result<Register> {
    let mut theta = wrap_angle(theta_remaining);
    let mut current = state.clone();
    let mut ops = Vec::new();
    loop {
        if theta == 0.0 {
            let mut reg = Register::new(current);
            reg.log = ops;
            return Ok(reg);
        }
        let protocol = Protocol::new(ProtocolParams::bell(theta)?, PovmWeights::new(0.5, 0.5)?)?;
        let mut reg = initial_register(protocol.params().alpha(), &current)?;
        let branch = protocol.steps(&mut reg, transcript, rng)?;
        if branch != 3 {
            finish_success(branch, &mut reg, transcript)?;
            ops.extend_from_slice(reg.log());
            reg.log = ops;
            return Ok(reg);
        }
        let (r, msg) = protocol.failure_residual(&mut reg, branch, rng)?;
        transcript.push(Envelope::send(ClassicalMessage::PovmResult { branch }));
        transcript.push(msg);
        ops.extend_from_slice(reg.log());
        theta = wrap_angle(theta - r.theta_f);
        current = reg.state;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// Stop after the POVM; outcome 3 is reported as a failure.
    Probabilistic,
    /// Compensate failures with one Bell pair.
    Deterministic,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub branch: u8,
    pub transcript: Vec<Envelope>,
    /// On `(A, B)`.
    pub final_state: StateVector,
    pub residual: Option<ResidualGate>,
    pub bell_pairs_consumed: u32,
    pub rng_seed: u64,
    pub trial: u64,
    /// Every quantum action, in order, including recovery.
    pub ops: Vec<LocalOp>,
}

impl RunOutcome {
    pub fn succeeded(&self) -> bool {
        self.branch != 3
    }
}

/// Input state for Monte Carlo runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InputSpec {
    /// Computational basis state `|AB⟩`, index 0 to 3.
    Basis(u8),
    /// Fresh Haar-random state per trial.
    Random,
}

impl InputSpec {
    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<StateVector> {
        match *self {
            InputSpec::Basis(k) => StateVector::basis(target_labels(), k as usize),
            InputSpec::Random => Ok(random_input(rng)),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SummaryStats {
    pub trials: u64,
    pub seed: u64,
    pub success_count: u64,
    pub branch_counts: [u64; 3],
    pub empirical_p: f64,
    pub analytic_p: f64,
    /// Binomial standard deviation of `empirical_p`.
    pub sigma: f64,
    pub z_score: f64,
    /// Over runs whose final state should be `U(θ)Φ`.
    pub mean_fidelity: Option<f64>,
    pub min_fidelity: Option<f64>,
    pub mean_bell_pairs: f64,
    /// `E_α` plus Bell pairs, deterministic mode only.
    pub mean_ebits: Option<f64>,
}

struct TrialRecord {
    branch: u8,
    fidelity: Option<f64>,
    bell_pairs: u32,
}

fn run_trial(protocol: &Protocol, input: InputSpec, mode: RunMode, seed: u64, trial: u64) -> Result<TrialRecord> {
    let mut rng = TrialRng::new(seed, trial);
    let phi = input.draw(&mut rng)?;
    let outcome = protocol.run_once(&phi, mode, &mut rng)?;
    let fidelity = if outcome.succeeded() || mode == RunMode::Deterministic {
        let want = phi.apply(&target_gate(protocol.params().theta()), &target_labels())?;
        Some(fidelity(&want, &outcome.final_state)?)
    } else {
        None
    };
    Ok(TrialRecord {
        branch: outcome.branch,
        fidelity,
        bell_pairs: outcome.bell_pairs_consumed,
    })
}

/// Repeated runs with the optimal weights. Trials run in parallel; the
/// aggregate is reduced in trial order and does not depend on scheduling.
pub fn monte_carlo(params: ProtocolParams, trials: u64, seed: u64, mode: RunMode, input: InputSpec) -> Result<SummaryStats> {
    if trials == 0 {
        return Err(Error::InvalidArgument("trials must be at least 1".into()));
    }
    let protocol = Protocol::optimal(params)?;
    let records = (0..trials)
        .into_par_iter()
        .map(|t| run_trial(&protocol, input, mode, seed, t))
        .collect::<Result<Vec<_>>>()?;

    let mut branch_counts = [0u64; 3];
    let mut fid_sum = 0.0;
    let mut fid_min = f64::INFINITY;
    let mut fid_n = 0u64;
    let mut pairs = 0u64;
    for r in &records {
        branch_counts[(r.branch - 1) as usize] += 1;
        if let Some(f) = r.fidelity {
            fid_sum += f;
            fid_min = fid_min.min(f);
            fid_n += 1;
        }
        pairs += r.bell_pairs as u64;
    }
    let n = trials as f64;
    let success_count = branch_counts[0] + branch_counts[1];
    let empirical_p = success_count as f64 / n;
    let analytic_p = protocol.weights().success_probability();
    let sigma = (analytic_p * (1.0 - analytic_p) / n).max(0.0).sqrt();
    let diff = empirical_p - analytic_p;
    let z_score = if sigma > 0.0 {
        diff / sigma
    } else if diff.abs() < 1e-12 {
        0.0
    } else {
        f64::INFINITY.copysign(diff)
    };
    let mean_bell_pairs = pairs as f64 / n;
    let mean_ebits = match mode {
        RunMode::Deterministic => Some(e_alpha(params.alpha())? + mean_bell_pairs),
        RunMode::Probabilistic => None,
    };
    Ok(SummaryStats {
        trials,
        seed,
        success_count,
        branch_counts,
        empirical_p,
        analytic_p,
        sigma,
        z_score,
        mean_fidelity: (fid_n > 0).then(|| fid_sum / fid_n as f64),
        min_fidelity: (fid_n > 0).then_some(fid_min),
        mean_bell_pairs,
        mean_ebits,
    })
}

/// Reference states written down directly from the amplitudes, for
/// checking the simulated intermediate states.
pub mod analytic {
    use super::*;

    fn branch_state(alpha: f64, phi: &StateVector, second: &ComplexMatrix) -> Result<StateVector> {
        let (c, s) = crate::model::alpha_half(alpha);
        let rotated = phi.apply(second, &target_labels())?;
        let mut amps = vec![ZERO; 8];
        for t in 0..4 {
            amps[t << 1] = phi.amplitudes()[t] * c;
            amps[(t << 1) | 1] = I * s * rotated.amplitudes()[t];
        }
        StateVector::new(vec![AliceTarget, BobTarget, BobAncilla], amps)
    }

    /// `cos(α/2)|0⟩_b Φ + i sin(α/2)|1⟩_b σz^A Φ` on `(A, B, b)`.
    pub fn after_step2(alpha: f64, phi: &StateVector) -> Result<StateVector> {
        let z = ComplexMatrix::from(Mat2::pauli_z());
        let za = kron(&z, &ComplexMatrix::identity(2)?)?;
        branch_state(alpha, phi, &za)
    }

    /// `cos(α/2)|0⟩_b Φ + i sin(α/2)|1⟩_b σz^Aσz^B Φ` on `(A, B, b)`.
    pub fn after_step3(alpha: f64, phi: &StateVector) -> Result<StateVector> {
        branch_state(alpha, phi, &zz())
    }

    /// `U(θ)Φ`
    pub fn target_output(theta: f64, phi: &StateVector) -> Result<StateVector> {
        phi.apply(&target_gate(theta), &target_labels())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_3, FRAC_PI_4};

    #[test]
    fn resource_examples() {
        let r = prepare_resource(FRAC_PI_2).unwrap();
        assert!((r.norm_sqr() - 1.0).abs() < 1e-15);
        assert!((r.amplitudes()[0].re - FRAC_1_SQRT_2).abs() < 1e-16);
        assert!((r.amplitudes()[3].im - FRAC_1_SQRT_2).abs() < 1e-16);

        let r = prepare_resource(1e-6).unwrap();
        assert!((r.amplitudes()[3].norm() - 5e-7).abs() < 1e-15);

        let r = prepare_resource(FRAC_PI_3).unwrap();
        let a = r.amplitudes();
        assert!((a[0].re - 0.866_025_403_784_438_6).abs() < 1e-15);
        assert_eq!((a[1], a[2]), (ZERO, ZERO));
        assert!((a[3] - Complex::new(0.0, 0.5)).norm() < 1e-15);

        assert!(prepare_resource(0.0).is_err());
        assert!(prepare_resource(2.0).is_err());
    }

    #[test]
    fn sampling_skips_empty_outcomes() {
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.0), 1);
        assert_eq!(sample_index(&[0.0, 1.0, 0.0], 0.999_999), 1);
        assert_eq!(sample_index(&[0.5, 0.5], 0.25), 0);
        assert_eq!(sample_index(&[0.5, 0.5], 0.75), 1);
    }

    #[test]
    fn wrap_angle_range() {
        assert_eq!(wrap_angle(PI), PI);
        assert!((wrap_angle(-PI) - PI).abs() < 1e-15);
        assert!((wrap_angle(3.0 * PI / 2.0) + PI / 2.0).abs() < 1e-15);
        assert_eq!(wrap_angle(0.3), 0.3);
    }

    #[test]
    fn x_outcome_is_unbiased_and_sign_is_tracked() {
        let mut rng = TrialRng::new(9, 0);
        let phi = random_input(&mut rng);
        let alpha = 0.7;
        let mut reg = initial_register(alpha, &phi).unwrap();
        reg.act(PartyRole::Alice, &controlled_z(), &[AliceAncilla, AliceTarget], "cz").unwrap();
        let h = Complex::from(FRAC_1_SQRT_2);
        let plus = reg.state().contract(AliceAncilla, [h, h]).unwrap();
        let minus = reg.state().contract(AliceAncilla, [h, -h]).unwrap();
        assert!((plus.norm_sqr() - 0.5).abs() < 1e-14);
        assert!((minus.norm_sqr() - 0.5).abs() < 1e-14);

        let corrected = analytic::after_step2(alpha, &phi).unwrap();
        let plus = plus.normalized().unwrap();
        assert!(fidelity(&plus, &corrected).unwrap() > 1.0 - 1e-12);
        // −1 without correction: the |1⟩_b term carries −i
        let minus = minus.normalized().unwrap();
        let flipped: Vec<Complex> = corrected
            .amplitudes()
            .iter()
            .enumerate()
            .map(|(k, z)| if k & 1 == 1 { -z } else { *z })
            .collect();
        let flipped = StateVector::new(corrected.labels().to_vec(), flipped).unwrap();
        assert!(fidelity(&minus, &flipped).unwrap() > 1.0 - 1e-12);
        assert!(fidelity(&minus, &corrected).unwrap() < 1.0 - 1e-3);
    }

    #[test]
    fn step2_rejects_wrong_message() {
        let phi = StateVector::basis(target_labels(), 0).unwrap();
        let mut reg = initial_register(0.5, &phi).unwrap();
        let bad = Envelope::send(ClassicalMessage::PovmResult { branch: 1 });
        assert!(matches!(step2_bob(&mut reg, &bad), Err(Error::UnexpectedMessage { .. })));
    }

    #[test]
    fn parties_cannot_touch_remote_qubits() {
        let phi = StateVector::basis(target_labels(), 0).unwrap();
        let mut reg = initial_register(0.5, &phi).unwrap();
        let z = ComplexMatrix::from(Mat2::pauli_z());
        assert_eq!(
            reg.act(PartyRole::Alice, &z, &[BobTarget], "x"),
            Err(Error::NonLocal {
                party: PartyRole::Alice,
                qubit: BobTarget
            })
        );
        assert!(reg.act(PartyRole::Bob, &controlled_z(), &[BobAncilla, AliceTarget], "x").is_err());
        let mut rng = TrialRng::new(1, 1);
        assert!(reg
            .measure(PartyRole::Bob, AliceAncilla, [[ONE, ZERO], [ZERO, ONE]], &mut rng, "x")
            .is_err());
        assert!(reg.log().is_empty());
    }

    #[test]
    fn step3_examples() {
        let alpha = FRAC_PI_3;
        let (c, s) = crate::model::alpha_half(alpha);
        for (idx, sign) in [(0usize, 1.0), (1, -1.0)] {
            let phi = StateVector::basis(target_labels(), idx).unwrap();
            let mut rng = TrialRng::new(3, idx as u64);
            let mut reg = initial_register(alpha, &phi).unwrap();
            let m = step1_alice(&mut reg, &mut rng).unwrap();
            step2_bob(&mut reg, &m).unwrap();
            step3_bob(&mut reg).unwrap();
            let mut amps = vec![ZERO; 8];
            amps[idx << 1] = Complex::from(c);
            amps[(idx << 1) | 1] = I * s * sign;
            let want = StateVector::new(vec![AliceTarget, BobTarget, BobAncilla], amps).unwrap();
            assert!(fidelity(reg.state(), &want).unwrap() > 1.0 - 1e-12);
        }
    }

    #[test]
    fn bell_resource_never_fails() {
        let p = ProtocolParams::new(0.9, FRAC_PI_2).unwrap();
        let proto = Protocol::optimal(p).unwrap();
        let phi = StateVector::basis(target_labels(), 2).unwrap();
        let mut reg = initial_register(FRAC_PI_2, &phi).unwrap();
        let mut rng = TrialRng::new(5, 0);
        let m = step1_alice(&mut reg, &mut rng).unwrap();
        step2_bob(&mut reg, &m).unwrap();
        step3_bob(&mut reg).unwrap();
        let p3 = reg.state().apply_single(&proto.kraus()[2], BobAncilla).unwrap().norm_sqr();
        assert!(p3 < 1e-12);
    }

    #[test]
    fn branch_two_on_basis_inputs() {
        let p = ProtocolParams::new(FRAC_PI_4, FRAC_PI_3).unwrap();
        let proto = Protocol::optimal(p).unwrap();
        for idx in [0usize, 1] {
            let phi = StateVector::basis(target_labels(), idx).unwrap();
            let want = analytic::target_output(p.theta(), &phi).unwrap();
            let mut seen = false;
            for trial in 0..200 {
                let mut rng = TrialRng::new(11, trial);
                let out = proto.run_once(&phi, RunMode::Probabilistic, &mut rng).unwrap();
                if out.branch == 2 {
                    seen = true;
                    assert_eq!(
                        out.transcript.last().unwrap().message,
                        ClassicalMessage::PovmResult { branch: 2 }
                    );
                    assert!(fidelity(&out.final_state, &want).unwrap() > 1.0 - 1e-12);
                }
            }
            assert!(seen);
        }
    }

    #[test]
    fn finish_success_rejects_failure_branch() {
        let phi = StateVector::basis(target_labels(), 0).unwrap();
        let mut reg = Register::new(phi);
        assert!(matches!(
            finish_success(3, &mut reg, &mut Vec::new()),
            Err(Error::WrongBranch { .. })
        ));
    }

    #[test]
    fn trivial_povm_residuals() {
        // x = y = 0: E3 = I, so b just collapses in the computational basis
        let p = ProtocolParams::new(0.8, 0.6).unwrap();
        let proto = Protocol::new(p, PovmWeights::new(0.0, 0.0).unwrap()).unwrap();
        let mut seen = [false; 2];
        for trial in 0..64 {
            let mut rng = TrialRng::new(2, trial);
            let phi = random_input(&mut rng);
            let out = proto.run_once(&phi, RunMode::Probabilistic, &mut rng).unwrap();
            assert_eq!(out.branch, 3);
            let r = out.residual.unwrap();
            let want = if r.b_outcome == 0 { 0.0 } else { PI };
            assert!((r.theta_f - want).abs() < 1e-15);
            seen[r.b_outcome as usize] = true;
        }
        assert_eq!(seen, [true, true]);
    }

    #[test]
    fn failure_residual_requires_branch_three() {
        let p = ProtocolParams::new(0.8, 0.6).unwrap();
        let proto = Protocol::optimal(p).unwrap();
        let phi = StateVector::basis(target_labels(), 0).unwrap();
        let mut reg = initial_register(0.6, &phi).unwrap();
        let mut rng = TrialRng::new(0, 0);
        assert!(proto.failure_residual(&mut reg, 1, &mut rng).is_err());
    }

    #[test]
    fn invalid_povm_is_rejected() {
        let p = ProtocolParams::new(0.8, 0.6).unwrap();
        assert!(matches!(
            Protocol::new(p, PovmWeights::new(0.9, 0.9).unwrap()),
            Err(Error::InvalidPovm(_))
        ));
    }

    #[test]
    fn recovery_edge_cases() {
        let mut rng = TrialRng::new(4, 4);
        let phi = random_input(&mut rng);
        let mut transcript = Vec::new();
        let reg = recover_with_bell(&phi, 0.0, &mut transcript, &mut rng).unwrap();
        assert_eq!(reg.state(), &phi);
        assert!(transcript.is_empty());

        let theta = 0.6;
        let reg = recover_with_bell(&phi, theta, &mut transcript, &mut rng).unwrap();
        let want = analytic::target_output(theta, &phi).unwrap();
        assert!(fidelity(reg.state(), &want).unwrap() > 1.0 - 1e-12);
        assert!(!transcript.is_empty());
    }

    #[test]
    fn seeds_reproduce_runs() {
        let p = ProtocolParams::new(1.1, 0.4).unwrap();
        let proto = Protocol::optimal(p).unwrap();
        for trial in 0..50 {
            let run = |mode| {
                let mut rng = TrialRng::new(77, trial);
                let phi = random_input(&mut rng);
                proto.run_once(&phi, mode, &mut rng).unwrap()
            };
            assert_eq!(run(RunMode::Deterministic), run(RunMode::Deterministic));
            assert_eq!(run(RunMode::Probabilistic), run(RunMode::Probabilistic));
        }
    }

    #[test]
    fn monte_carlo_rejects_zero_trials() {
        let p = ProtocolParams::new(1.1, 0.4).unwrap();
        assert!(monte_carlo(p, 0, 1, RunMode::Probabilistic, InputSpec::Random).is_err());
    }
}
