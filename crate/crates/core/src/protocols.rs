//! Semi-classical protocols built from a single kind of test.
//!
//! * SRS(m): m sequential Swap Tests on three registers, the next pair being
//!   the untested register plus one of the two just tested.
//! * RCIR: a uniformly random relabeling of the n states followed by one
//!   Circle Test.
//!
//! Each has a sampled runner that tracks measurement collapse and an exact
//! evaluator in rational arithmetic.

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{QsiError, Result};
use crate::identity_tests::{controlled_group_circuit, equal_prob_formula, run_circuit_with, Caps, TestKind};
use crate::instances::{verify_promise, PromiseVerdict, QsiInstance};
use crate::par::{map_indexed, Exec};
use crate::permgroup::{binomial, next_permutation, Partition, Permutation};
use crate::qmath::{measure_first_register, JointState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    No,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SwapRound {
    /// Registers tested, 1-based.
    pub pair: (usize, usize),
    pub equal: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProtocolOutcome {
    pub verdict: Verdict,
    pub rounds_executed: usize,
    pub transcript: Vec<SwapRound>,
}

/// How step (ii-2) picks which tested register goes on.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrsPolicy {
    /// Either tested register with probability 1/2.
    Uniform,
    /// After testing the ordered pair `(a, b)`, test `(b, leftover)`.
    KeepSecond,
}

fn require_three_with_promise(inst: &QsiInstance) -> Result<()> {
    if inst.n() != 3 {
        return Err(QsiError::InvalidArgument(format!(
            "SRS runs on 3 states, got {}",
            inst.n()
        )));
    }
    if verify_promise(inst) == PromiseVerdict::Violated {
        return Err(QsiError::PromiseViolated);
    }
    Ok(())
}

const SRS_PAIRS: [(usize, usize); 3] = [(1, 2), (1, 3), (2, 3)];

fn leftover(pair: (usize, usize)) -> usize {
    6 - pair.0 - pair.1
}

/// One sampled run of SRS(m) on the joint three-register state.
pub fn srs_sample<R: Rng + ?Sized>(inst: &QsiInstance, m: usize, rng: &mut R) -> Result<ProtocolOutcome> {
    require_three_with_promise(inst)?;
    if m == 0 {
        return Err(QsiError::InvalidArgument("SRS needs m >= 1".into()));
    }
    let mut state = JointState::product(inst.states())?;
    let mut pair = SRS_PAIRS[rng.random_range(0..3)];
    let mut transcript = Vec::with_capacity(m);
    for _ in 0..m {
        let group = [
            Permutation::identity(3),
            Permutation::transposition(3, pair.0, pair.1)?,
        ];
        let joint = controlled_group_circuit(&state, &group, Exec::Sequential)?;
        let outcomes = measure_first_register(&joint);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let picked = outcomes
            .iter()
            .find(|o| {
                acc += o.probability;
                u < acc
            })
            .unwrap_or_else(|| outcomes.last().expect("at least one outcome"));
        let equal = picked.outcome == 0;
        transcript.push(SwapRound { pair, equal });
        if !equal {
            return Ok(ProtocolOutcome {
                verdict: Verdict::No,
                rounds_executed: transcript.len(),
                transcript,
            });
        }
        state = picked
            .post_state
            .content_for_control(0)
            .expect("outcome 0 was observed");
        let kept = if rng.random_bool(0.5) { pair.0 } else { pair.1 };
        let other = leftover(pair);
        pair = (kept.min(other), kept.max(other));
    }
    Ok(ProtocolOutcome {
        verdict: Verdict::Yes,
        rounds_executed: m,
        transcript,
    })
}

/// Real rational amplitudes over `b^3` basis triples, unnormalized: the
/// squared norm of a branch vector is that branch's probability mass.
#[derive(Debug, Clone)]
struct RationalTriple {
    b: usize,
    amps: Vec<BigRational>,
}

impl RationalTriple {
    fn basis(b: usize, digits: [usize; 3]) -> Self {
        let mut amps = vec![BigRational::zero(); b * b * b];
        amps[(digits[0] * b + digits[1]) * b + digits[2]] = BigRational::one();
        Self { b, amps }
    }

    fn digits(&self, idx: usize) -> [usize; 3] {
        let b = self.b;
        [idx / (b * b), (idx / b) % b, idx % b]
    }

    fn index(&self, d: [usize; 3]) -> usize {
        (d[0] * self.b + d[1]) * self.b + d[2]
    }

    /// `(v + S_{ij} v)/2`, the unnormalized post-EQUAL state.
    fn symmetrize(&self, pair: (usize, usize)) -> Self {
        let half = BigRational::new(1.into(), 2.into());
        let amps = (0..self.amps.len())
            .map(|idx| {
                let mut d = self.digits(idx);
                d.swap(pair.0 - 1, pair.1 - 1);
                (&self.amps[idx] + &self.amps[self.index(d)]) * &half
            })
            .collect();
        Self { b: self.b, amps }
    }

    fn norm_sqr(&self) -> BigRational {
        self.amps.iter().map(|a| a * a).sum()
    }
}

fn srs_branch(
    v: &RationalTriple,
    weight: &BigRational,
    pair: (usize, usize),
    rounds_left: usize,
    policy: SrsPolicy,
) -> BigRational {
    if rounds_left == 0 {
        return weight * v.norm_sqr();
    }
    let next = v.symmetrize(pair);
    let other = leftover(pair);
    match policy {
        SrsPolicy::KeepSecond => srs_branch(&next, weight, (pair.1, other), rounds_left - 1, policy),
        SrsPolicy::Uniform => {
            let half = weight * BigRational::new(1.into(), 2.into());
            [pair.0, pair.1]
                .into_iter()
                .map(|kept| {
                    let p = (kept.min(other), kept.max(other));
                    srs_branch(&next, &half, p, rounds_left - 1, policy)
                })
                .sum()
        }
    }
}

/// Exact YES probability of SRS(m) with uniform step-(ii-2) choices.
pub fn srs_exact(inst: &QsiInstance, m: usize) -> Result<BigRational> {
    srs_exact_with_policy(inst, m, SrsPolicy::Uniform)
}

/// Exhaustive branching over pair choices and measurement outcomes on the
/// canonical basis embedding of the instance's blocks. The YES probability
/// is basis independent, so rotated instances evaluate to the same value.
pub fn srs_exact_with_policy(inst: &QsiInstance, m: usize, policy: SrsPolicy) -> Result<BigRational> {
    require_three_with_promise(inst)?;
    if m == 0 {
        return Err(QsiError::InvalidArgument("SRS needs m >= 1".into()));
    }
    let part = inst.structure()?;
    let labels = part.labels();
    let start = RationalTriple::basis(part.num_blocks(), [labels[0], labels[1], labels[2]]);
    let third = BigRational::new(1.into(), 3.into());
    let first_pairs: [(usize, usize); 3] = match policy {
        SrsPolicy::Uniform => SRS_PAIRS,
        SrsPolicy::KeepSecond => [(1, 2), (2, 3), (3, 1)],
    };
    Ok(first_pairs
        .into_iter()
        .map(|p| srs_branch(&start, &third, p, m, policy))
        .sum())
}

/// `p_k`, `a_k`, `q_k` for the two-identical instance with the first test on
/// an identical-orthogonal pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrsClosedForm {
    /// conditional probability of passing round `k`
    pub p: BigRational,
    pub a: BigRational,
    /// probability of passing rounds `1..=k`
    pub q: BigRational,
}

pub fn srs_closed_form(k: usize) -> Result<SrsClosedForm> {
    if k == 0 {
        return Err(QsiError::InvalidArgument("k must be >= 1".into()));
    }
    let r = |a: BigInt, b: BigInt| BigRational::new(a, b);
    let four_k = BigInt::from(4).pow(k as u32);
    let p = BigRational::one() - r(6.into(), &four_k + 8);
    let a = if k % 2 == 1 {
        r(2.into(), 3.into())
            * (BigRational::from(BigInt::from(4).pow(((k - 1) / 2) as u32)) - BigRational::one())
    } else {
        r(1.into(), 3.into()) * (BigRational::from(BigInt::from(4).pow((k / 2) as u32)) - BigRational::one())
    };
    let q = r(1.into(), 3.into()) + r(2.into(), 3 * four_k);
    Ok(SrsClosedForm { p, a, q })
}

/// One round of the canonical branch on `(ψ, ψ⊥, ψ)` starting with the pair (1, 2).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SrsTraceRound {
    pub pair: (usize, usize),
    /// conditional probability of EQUAL in this round
    pub p: BigRational,
    /// amplitudes on `|ℓ⟩` (ψ⊥ in register ℓ), scaled by `2^k`
    pub coefficients: [BigInt; 3],
}

/// Exact conditional probabilities and unnormalized states along the branch
/// that never halts, under `SrsPolicy::KeepSecond`.
pub fn srs_case_a_trace(m: usize) -> Vec<SrsTraceRound> {
    // blocks: ψ → 0, ψ⊥ → 1
    let mut v = RationalTriple::basis(2, [0, 1, 0]);
    let mut pair = (1, 2);
    let mut scale = BigRational::one();
    let two = BigRational::from(BigInt::from(2));
    let mut out = Vec::with_capacity(m);
    for _ in 0..m {
        let next = v.symmetrize(pair);
        let p = next.norm_sqr() / v.norm_sqr();
        scale *= &two;
        let coefficients = [[1, 0, 0], [0, 1, 0], [0, 0, 1]].map(|d| {
            let c = &next.amps[next.index(d)] * &scale;
            debug_assert!(c.is_integer());
            c.to_integer()
        });
        out.push(SrsTraceRound {
            pair,
            p,
            coefficients,
        });
        pair = (pair.1, leftover(pair));
        v = next;
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CirclePath {
    /// Circuit when within caps, else an exact Bernoulli draw from the formula.
    Auto,
    Circuit,
    Formula,
}

pub fn rcir_sample<R: Rng + ?Sized>(inst: &QsiInstance, rng: &mut R) -> Result<Verdict> {
    rcir_sample_with(inst, rng, CirclePath::Auto, Caps::default())
}

pub fn rcir_sample_with<R: Rng + ?Sized>(
    inst: &QsiInstance,
    rng: &mut R,
    path: CirclePath,
    caps: Caps,
) -> Result<Verdict> {
    if verify_promise(inst) == PromiseVerdict::Violated {
        return Err(QsiError::PromiseViolated);
    }
    let mut images: Vec<usize> = (0..inst.n()).collect();
    images.shuffle(rng);
    let tau = Permutation::from_zero_based(images)?;
    let phi = inst.relabeled(&tau)?;
    let p_equal = match path {
        CirclePath::Formula => equal_prob_formula(TestKind::Circle, &phi)?,
        CirclePath::Circuit => run_circuit_with(TestKind::Circle, &phi, caps, Exec::Sequential)?.p_equal,
        CirclePath::Auto => match run_circuit_with(TestKind::Circle, &phi, caps, Exec::Sequential) {
            Ok(r) => r.p_equal,
            Err(e) if e.is_cap() => equal_prob_formula(TestKind::Circle, &phi)?,
            Err(e) => return Err(e),
        },
    };
    Ok(if rng.random::<f64>() < p_equal {
        Verdict::Yes
    } else {
        Verdict::No
    })
}

pub const MAX_RCIR_ALIGNMENTS: u64 = 10_000_000;

/// Repetition number of the `n`-bit cyclic word `mask`.
pub(crate) fn repetition_of_mask(mask: u64, n: usize) -> usize {
    let full = if n == 64 { u64::MAX } else { (1u64 << n) - 1 };
    for period in (1..n).filter(|d| n.is_multiple_of(*d)) {
        let rot = ((mask << period) | (mask >> (n - period))) & full;
        if rot == mask {
            return n / period;
        }
    }
    1
}

/// Calls `f` with every `k`-subset of `m` bits (Gosper's hack).
fn for_each_subset<F: FnMut(u64)>(m: usize, k: usize, mut f: F) {
    if k == 0 {
        f(0);
        return;
    }
    if k > m {
        return;
    }
    let limit = 1u64 << m;
    let mut x = (1u64 << k) - 1;
    while x < limit {
        f(x);
        let c = x & x.wrapping_neg();
        let r = x + c;
        x = (((r ^ x) >> 2) / c) | r;
    }
}

fn check_rcir_args(n: usize, r: usize) -> Result<()> {
    if r == 0 || r >= n {
        return Err(QsiError::InvalidArgument(format!(
            "RCIR needs 1 <= r <= n-1, got n={n}, r={r}"
        )));
    }
    if n > 63 || binomial(n, r) > BigUint::from(MAX_RCIR_ALIGNMENTS) {
        return Err(QsiError::CapExceeded(format!(
            "C({n},{r}) exceeds {MAX_RCIR_ALIGNMENTS} alignments"
        )));
    }
    Ok(())
}

pub fn rcir_exact(n: usize, r: usize) -> Result<BigRational> {
    rcir_exact_with(n, r, Exec::default())
}

/// Soundness error of RCIR on a two-block instance with `|I_1| = r`:
/// the average of `s(A)/n` over all `C(n, r)` alignments `A`.
pub fn rcir_exact_with(n: usize, r: usize, exec: Exec) -> Result<BigRational> {
    check_rcir_args(n, r)?;
    // split by smallest member so each chunk enumerates a disjoint slice
    let per_min = map_indexed(exec, n, |low| {
        let rest = n - low - 1;
        let mut sum = 0u128;
        for_each_subset(rest, r - 1, |upper| {
            let mask = (1u64 << low) | (upper << (low + 1));
            sum += repetition_of_mask(mask, n) as u128;
        });
        sum
    });
    let total: u128 = per_min.into_iter().sum();
    let denom = BigInt::from(n) * BigInt::from(binomial(n, r));
    Ok(BigRational::new(BigInt::from(total), denom))
}

/// Worst two-block merge of a multi-block NO instance.
pub fn rcir_worst_merge(part: &Partition) -> Result<BigRational> {
    let b = part.num_blocks();
    if b == 1 {
        return Ok(BigRational::one());
    }
    if b > 20 {
        return Err(QsiError::CapExceeded("more than 20 blocks".into()));
    }
    let sizes: Vec<usize> = part.blocks().iter().map(Vec::len).collect();
    let mut best: Option<BigRational> = None;
    // subsets containing block 0, excluding the full set
    for mask in 0..(1u32 << (b - 1)) {
        let chosen = (mask << 1) | 1;
        if chosen == (1u32 << b) - 1 {
            continue;
        }
        let r: usize = (0..b).filter(|i| chosen & (1 << i) != 0).map(|i| sizes[i]).sum();
        let v = rcir_exact(part.n(), r)?;
        if best.as_ref().is_none_or(|x| &v > x) {
            best = Some(v);
        }
    }
    Ok(best.expect("b >= 2 gives at least one merge"))
}

/// Exact RCIR soundness error on a multi-block instance, averaging `s/n`
/// over every distinct arrangement of the block labels around the cycle.
pub fn rcir_exact_partition(part: &Partition) -> Result<BigRational> {
    let n = part.n();
    let mut labels = part.labels();
    labels.sort_unstable();
    let count = multinomial(part);
    if count > BigUint::from(MAX_RCIR_ALIGNMENTS) {
        return Err(QsiError::CapExceeded(format!(
            "{count} arrangements exceed {MAX_RCIR_ALIGNMENTS}"
        )));
    }
    let mut total = 0u128;
    loop {
        total += (0..n)
            .filter(|&k| (0..n).all(|i| labels[i] == labels[(i + k) % n]))
            .count() as u128;
        if !next_permutation(&mut labels) {
            break;
        }
    }
    Ok(BigRational::new(
        BigInt::from(total),
        BigInt::from(n) * BigInt::from(count),
    ))
}

fn multinomial(part: &Partition) -> BigUint {
    let mut acc = crate::permgroup::factorial(part.n());
    for b in part.blocks() {
        acc /= crate::permgroup::factorial(b.len());
    }
    acc
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub trials: u64,
    pub successes: u64,
    pub p_hat: f64,
    pub ci95: (f64, f64),
}

pub const Z95: f64 = 1.959_963_984_540_054;

/// Wilson score interval at `z` standard deviations.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).max(0.0).min(p), (center + half).min(1.0).max(p))
}

impl McEstimate {
    fn from_counts(successes: u64, trials: u64) -> Self {
        Self {
            trials,
            successes,
            p_hat: successes as f64 / trials as f64,
            ci95: wilson_interval(successes, trials, Z95),
        }
    }

    /// True if `p` lies inside the Wilson interval at `sigmas` standard deviations.
    pub fn consistent_with(&self, p: f64, sigmas: f64) -> bool {
        let (lo, hi) = wilson_interval(self.successes, self.trials, sigmas);
        lo <= p && p <= hi
    }
}

pub fn trial_seed(base_seed: u64, trial: u64) -> u64 {
    base_seed ^ trial
}

const MC_CHUNK: u64 = 4096;

/// Runs `trials` independent trials; trial `i` draws from a ChaCha8 stream
/// seeded with `base_seed ^ i`, so the estimate does not depend on scheduling.
pub fn mc_run<F>(trials: u64, base_seed: u64, trial: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> Result<bool> + Sync + Send,
{
    mc_run_with(trials, base_seed, Exec::default(), trial)
}

pub fn mc_run_with<F>(trials: u64, base_seed: u64, exec: Exec, trial: F) -> Result<McEstimate>
where
    F: Fn(&mut ChaCha8Rng) -> Result<bool> + Sync + Send,
{
    if trials == 0 {
        return Err(QsiError::InvalidArgument("trials must be >= 1".into()));
    }
    let chunks = trials.div_ceil(MC_CHUNK) as usize;
    let counts = map_indexed(exec, chunks, |c| -> Result<u64> {
        let start = c as u64 * MC_CHUNK;
        let end = (start + MC_CHUNK).min(trials);
        let mut hits = 0;
        for i in start..end {
            let mut rng = ChaCha8Rng::seed_from_u64(trial_seed(base_seed, i));
            if trial(&mut rng)? {
                hits += 1;
            }
        }
        Ok(hits)
    });
    let successes = counts.into_iter().sum::<Result<u64>>()?;
    Ok(McEstimate::from_counts(successes, trials))
}

/// A protocol run to be repeated by `mc_protocol`.
#[derive(Debug, Clone)]
pub enum ProtocolSpec {
    Srs { instance: QsiInstance, m: usize },
    Rcir { instance: QsiInstance },
}

/// Monte Carlo estimate of the YES probability of `spec`.
pub fn mc_protocol(spec: &ProtocolSpec, trials: u64, base_seed: u64) -> Result<McEstimate> {
    match spec {
        ProtocolSpec::Srs { instance, m } => {
            require_three_with_promise(instance)?;
            mc_run(trials, base_seed, |rng| {
                Ok(srs_sample(instance, *m, rng)?.verdict == Verdict::Yes)
            })
        }
        ProtocolSpec::Rcir { instance } => {
            if verify_promise(instance) == PromiseVerdict::Violated {
                return Err(QsiError::PromiseViolated);
            }
            mc_run(trials, base_seed, |rng| {
                Ok(rcir_sample(instance, rng)? == Verdict::Yes)
            })
        }
    }
}

pub fn to_f64(r: &BigRational) -> f64 {
    r.to_f64().unwrap_or(f64::NAN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{build_instance, haar_unitary};

    fn q(a: i64, b: i64) -> BigRational {
        BigRational::new(a.into(), b.into())
    }

    fn three(blocks: &[&[usize]], seed: Option<u64>) -> QsiInstance {
        let p = Partition::new(3, blocks.iter().map(|b| b.to_vec()).collect()).unwrap();
        let rot = seed.map(|s| haar_unitary(3, s));
        build_instance(&p, 3, rot.as_ref()).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let c1 = srs_closed_form(1).unwrap();
        assert_eq!((c1.p, c1.a, c1.q), (q(1, 2), q(0, 1), q(1, 2)));
        let c2 = srs_closed_form(2).unwrap();
        assert_eq!((c2.p, c2.a, c2.q), (q(3, 4), q(1, 1), q(3, 8)));
        let c3 = srs_closed_form(3).unwrap();
        assert_eq!((c3.p, c3.a, c3.q), (q(11, 12), q(2, 1), q(11, 32)));
        assert!(srs_closed_form(0).is_err());
    }

    #[test]
    fn closed_form_q_is_running_product() {
        let mut acc = BigRational::one();
        for k in 1..=12 {
            let c = srs_closed_form(k).unwrap();
            acc *= &c.p;
            assert_eq!(acc, c.q, "k={k}");
        }
    }

    #[test]
    fn exact_examples() {
        let yes = three(&[&[1, 2, 3]], None);
        for m in 1..=6 {
            assert_eq!(srs_exact(&yes, m).unwrap(), BigRational::one());
        }
        let orth = three(&[&[1], &[2], &[3]], None);
        assert_eq!(srs_exact(&orth, 1).unwrap(), q(1, 2));
        assert_eq!(srs_exact(&orth, 2).unwrap(), q(1, 4));
        let two = three(&[&[1, 3], &[2]], None);
        assert_eq!(srs_exact(&two, 2).unwrap(), q(5, 12));
    }

    #[test]
    fn exact_is_basis_independent_and_policy_free() {
        let plain = three(&[&[1, 3], &[2]], None);
        let rotated = three(&[&[1, 3], &[2]], Some(9));
        let unstructured = QsiInstance::unstructured(rotated.states().to_vec()).unwrap();
        for m in 1..=5 {
            let a = srs_exact(&plain, m).unwrap();
            assert_eq!(a, srs_exact(&unstructured, m).unwrap());
            assert_eq!(
                a,
                srs_exact_with_policy(&plain, m, SrsPolicy::KeepSecond).unwrap()
            );
        }
    }

    #[test]
    fn errors() {
        let four = build_instance(&Partition::discrete(4).unwrap(), 4, None).unwrap();
        assert!(srs_exact(&four, 2).is_err());
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(srs_sample(&four, 2, &mut rng).is_err());
        let bad = QsiInstance::unstructured(vec![
            crate::qmath::PureState::basis(2, 0).unwrap(),
            crate::qmath::PureState::plus(),
            crate::qmath::PureState::basis(2, 0).unwrap(),
        ])
        .unwrap();
        assert_eq!(srs_exact(&bad, 2).unwrap_err(), QsiError::PromiseViolated);
        assert_eq!(
            rcir_sample(&bad, &mut rng).unwrap_err(),
            QsiError::PromiseViolated
        );
        assert!(rcir_exact(5, 0).is_err());
        assert!(rcir_exact(5, 5).is_err());
        assert!(rcir_exact(40, 20).unwrap_err().is_cap());
    }

    #[test]
    fn sample_yes_instance_always_yes() {
        let yes = three(&[&[1, 2, 3]], Some(3));
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for m in 1..=4 {
            let out = srs_sample(&yes, m, &mut rng).unwrap();
            assert_eq!(out.verdict, Verdict::Yes);
            assert_eq!(out.rounds_executed, m);
            assert!(out.transcript.iter().all(|r| r.equal));
        }
    }

    #[test]
    fn sample_transcript_invariants() {
        let orth = three(&[&[1], &[2], &[3]], None);
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let out = srs_sample(&orth, 4, &mut rng).unwrap();
            assert!(out.rounds_executed <= 4);
            assert_eq!(out.rounds_executed, out.transcript.len());
            if out.verdict == Verdict::No {
                assert!(!out.transcript.last().unwrap().equal);
            }
            for w in out.transcript.windows(2) {
                // the next pair contains the previous leftover
                let prev_left = leftover(w[0].pair);
                assert!(w[1].pair.0 == prev_left || w[1].pair.1 == prev_left);
            }
        }
    }

    #[test]
    fn sample_transcript_is_seed_stable() {
        let inst = three(&[&[1, 3], &[2]], Some(1));
        let run = |s| srs_sample(&inst, 5, &mut ChaCha8Rng::seed_from_u64(s)).unwrap();
        for s in 0..20 {
            assert_eq!(run(s), run(s));
        }
    }

    #[test]
    fn case_a_trace_matches_closed_form() {
        let trace = srs_case_a_trace(8);
        for (i, round) in trace.iter().enumerate() {
            let k = i + 1;
            let c = srs_closed_form(k).unwrap();
            assert_eq!(round.p, c.p, "p_{k}");
            let a = c.a.to_integer();
            let left = leftover(round.pair) - 1;
            let (t0, t1) = (round.pair.0 - 1, round.pair.1 - 1);
            let co = &round.coefficients;
            // the tested pair always ends with equal amplitudes
            assert_eq!(co[t0], co[t1]);
            if k % 2 == 1 {
                assert_eq!(co[t0], &a + 1, "k={k}");
                assert_eq!(co[left], a, "k={k}");
            } else {
                assert_eq!(co[t0], a, "k={k}");
                assert_eq!(co[left], &a + 1, "k={k}");
            }
        }
        assert_eq!(trace[1].coefficients, [2.into(), 1.into(), 1.into()]);
    }

    #[test]
    fn rcir_examples() {
        for r in 1..7 {
            assert_eq!(rcir_exact(7, r).unwrap(), q(1, 7));
        }
        assert_eq!(rcir_exact(4, 2).unwrap(), q(1, 3));
        assert_eq!(rcir_exact(4, 1).unwrap(), q(1, 4));
    }

    #[test]
    fn rcir_exec_agree_and_complement_symmetry() {
        for n in 2..=14 {
            for r in 1..n {
                let a = rcir_exact_with(n, r, Exec::Sequential).unwrap();
                assert_eq!(a, rcir_exact_with(n, r, Exec::Parallel).unwrap());
                assert_eq!(a, rcir_exact(n, n - r).unwrap());
            }
        }
    }

    #[test]
    fn rcir_partition_exact_two_block_matches() {
        for n in 2..=9 {
            for r in 1..n {
                let members: Vec<usize> = (1..=r).collect();
                let p = Partition::two_block(n, &members).unwrap();
                assert_eq!(rcir_exact_partition(&p).unwrap(), rcir_exact(n, r).unwrap());
            }
        }
    }

    #[test]
    fn rcir_worst_merge_dominates_multi_block() {
        let parts = [
            Partition::new(6, vec![vec![1, 2], vec![3, 4], vec![5, 6]]).unwrap(),
            Partition::new(6, vec![vec![1, 2, 3], vec![4], vec![5, 6]]).unwrap(),
            Partition::discrete(4).unwrap(),
            Partition::new(8, vec![vec![1, 2], vec![3, 4], vec![5, 6], vec![7, 8]]).unwrap(),
        ];
        for p in parts {
            assert!(
                rcir_exact_partition(&p).unwrap() <= rcir_worst_merge(&p).unwrap(),
                "{p:?}"
            );
        }
        assert_eq!(
            rcir_worst_merge(&Partition::single_block(5).unwrap()).unwrap(),
            BigRational::one()
        );
    }

    #[test]
    fn rcir_sample_yes_always_yes() {
        let inst =
            build_instance(&Partition::single_block(5).unwrap(), 2, Some(&haar_unitary(2, 4))).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            assert_eq!(rcir_sample(&inst, &mut rng).unwrap(), Verdict::Yes);
        }
    }

    #[test]
    fn mc_trivial_protocols() {
        let det = mc_run(100, 3, |_| Ok(true)).unwrap();
        assert_eq!(det.p_hat, 1.0);
        assert_eq!(det.successes, 100);
        let coin = mc_run(100_000, 11, |rng| Ok(rng.random_bool(0.5))).unwrap();
        assert!((coin.p_hat - 0.5).abs() < 0.01);
        assert!(coin.ci95.0 <= coin.p_hat && coin.p_hat <= coin.ci95.1);
        assert!(mc_run(0, 0, |_| Ok(true)).is_err());
    }

    #[test]
    fn mc_is_schedule_independent() {
        let inst = three(&[&[1, 3], &[2]], Some(2));
        let f = |rng: &mut ChaCha8Rng| Ok(srs_sample(&inst, 2, rng)?.verdict == Verdict::Yes);
        let a = mc_run_with(9000, 77, Exec::Sequential, f).unwrap();
        let b = mc_run_with(9000, 77, Exec::Parallel, f).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn wilson_interval_contains_p_hat() {
        for (s, n) in [(0u64, 10u64), (10, 10), (3, 10), (500, 1000)] {
            let (lo, hi) = wilson_interval(s, n, Z95);
            let p = s as f64 / n as f64;
            assert!(lo <= p && p <= hi && lo >= 0.0 && hi <= 1.0);
        }
    }

    #[test]
    fn subset_enumeration_counts() {
        for m in 0..12 {
            for k in 0..=m {
                let mut c = 0u64;
                for_each_subset(m, k, |x| {
                    assert_eq!(x.count_ones() as usize, k);
                    c += 1;
                });
                assert_eq!(BigUint::from(c), binomial(m, k));
            }
        }
    }
}
