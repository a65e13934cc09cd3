//! Built-in reproduction checks, one per numbered claim, run by `qsi selftest`.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, ToPrimitive};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::time::Instant;

use crate::bounds::{
    basel_partial_sum_check, eq2_bound, max_scaled_rcir, ps_lower_bound, ps_lower_bound_exact, q_bound_check,
    rcir_bound_rows, two_block_soundness, two_sided_gap_check, worst_case_no_instance,
};
use crate::error::Result;
use crate::identity_tests::{equal_prob_formula, exact_equal_prob, run_circuit, TestKind};
use crate::instances::{build_instance, haar_unitary, QsiInstance};
use crate::par::Exec;
use crate::permgroup::Partition;
use crate::protocols::{
    mc_protocol, srs_case_a_trace, srs_closed_form, srs_exact, srs_exact_with_policy, ProtocolSpec, SrsPolicy,
};
use crate::qmath::{PureState, C64};

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub title: &'static str,
    pub passed: bool,
    pub detail: String,
    pub elapsed_ms: u128,
}

pub const CRITERIA: [(u8, &str); 9] = [
    (1, "swap test circuit on equal and orthogonal pairs"),
    (2, "circuit and formula agree on random instances"),
    (3, "two-block soundness of permutation and alternation tests"),
    (4, "symmetric projector witness and dominance"),
    (5, "circle test n=4 dichotomy"),
    (6, "circle test soundness for prime n"),
    (7, "sequential random swap closed forms and sampling"),
    (8, "randomized circle test against the divisor-sum bound"),
    (9, "two-sided error trace distance"),
];

type Check = Result<(bool, String)>;

pub fn run_criterion(id: u8) -> Option<CriterionReport> {
    let &(_, title) = CRITERIA.iter().find(|c| c.0 == id)?;
    let start = Instant::now();
    let outcome = match id {
        1 => criterion_1(),
        2 => criterion_2(),
        3 => criterion_3(),
        4 => criterion_4(),
        5 => criterion_5(),
        6 => criterion_6(),
        7 => criterion_7(),
        8 => criterion_8(),
        _ => criterion_9(),
    };
    let (passed, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
    Some(CriterionReport {
        id,
        title,
        passed,
        detail,
        elapsed_ms: start.elapsed().as_millis(),
    })
}

pub fn run_all() -> Vec<CriterionReport> {
    CRITERIA.iter().filter_map(|c| run_criterion(c.0)).collect()
}

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

fn criterion_1() -> Check {
    let u = haar_unitary(2, 1);
    let yes = build_instance(&Partition::single_block(2)?, 2, Some(&u))?;
    let orth = build_instance(&Partition::discrete(2)?, 2, Some(&u))?;
    let p_yes = run_circuit(TestKind::Swap, &yes)?.p_equal;
    let p_orth = run_circuit(TestKind::Swap, &orth)?.p_equal;
    let ok = (p_yes - 1.0).abs() <= 1e-12 && (p_orth - 0.5).abs() <= 1e-12;
    Ok((ok, format!("p_yes={p_yes:.15} p_orth={p_orth:.15}")))
}

/// Random complex unit vector.
fn random_state(rng: &mut ChaCha8Rng, dim: usize) -> Result<PureState> {
    let amps = (0..dim)
        .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
        .collect();
    PureState::normalized(amps)
}

fn random_partition(rng: &mut ChaCha8Rng, n: usize, max_blocks: usize) -> Result<Partition> {
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..max_blocks)).collect();
    Partition::from_labels(&labels)
}

/// Structured (plain), rotated and unstructured instances in rotation.
pub fn random_instance(rng: &mut ChaCha8Rng, kind: TestKind, index: usize) -> Result<QsiInstance> {
    let n = match kind {
        TestKind::Swap => 2,
        TestKind::Circle => rng.random_range(2..=7),
        TestKind::Permutation | TestKind::Alternation => rng.random_range(2..=5),
    };
    let dim = if n >= 6 { 2 } else { rng.random_range(2..=3) };
    match index % 3 {
        0 => build_instance(&random_partition(rng, n, dim)?, dim, None),
        1 => {
            let seed = rng.random();
            build_instance(
                &random_partition(rng, n, dim)?,
                dim,
                Some(&haar_unitary(dim, seed)),
            )
        }
        _ => QsiInstance::unstructured(
            (0..n)
                .map(|_| random_state(rng, dim))
                .collect::<Result<Vec<_>>>()?,
        ),
    }
}

fn criterion_2() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(0x51);
    let mut worst = 0.0f64;
    let mut count = 0;
    for i in 0..240 {
        let kind = TestKind::ALL[i % 4];
        let inst = random_instance(&mut rng, kind, i / 4)?;
        let circuit = run_circuit(kind, &inst)?.p_equal;
        let formula = equal_prob_formula(kind, &inst)?;
        worst = worst.max((circuit - formula).abs());
        count += 1;
    }
    Ok((
        worst <= 1e-9,
        format!("{count} instances, max |circuit - formula| = {worst:e}"),
    ))
}

fn criterion_3() -> Check {
    let mut checked = 0;
    for n in 2..=9 {
        for l in 1..n {
            let members: Vec<usize> = (1..=l).collect();
            let part = Partition::two_block(n, &members)?;
            let expect = two_block_soundness(n, l)?.value;
            if exact_equal_prob(TestKind::Permutation, &part)? != expect {
                return Ok((false, format!("permutation mismatch at n={n}, l={l}")));
            }
            // A_2 is trivial, so the alternation identity starts at n = 3
            if n >= 3 && exact_equal_prob(TestKind::Alternation, &part)? != expect {
                return Ok((false, format!("alternation mismatch at n={n}, l={l}")));
            }
            checked += 1;
        }
    }
    let p32 = Partition::two_block(3, &[1, 2])?;
    let third = exact_equal_prob(TestKind::Permutation, &p32)? == q(1, 3)
        && exact_equal_prob(TestKind::Alternation, &p32)? == q(1, 3);
    Ok((
        third,
        format!("{checked} (n,l) pairs exact; (3,2) -> 1/3: {third}"),
    ))
}

fn criterion_4() -> Check {
    for n in 2..=8 {
        let part = Partition::two_block(n, &[1])?;
        if ps_lower_bound_exact(&part)? != q(1, n as i64) {
            return Ok((false, format!("P_S witness differs from 1/{n}")));
        }
        let float = ps_lower_bound(&worst_case_no_instance(n, 2)?)?;
        if (float - 1.0 / n as f64).abs() > 1e-12 {
            return Ok((false, format!("Gram path gives {float} at n={n}")));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x52);
    let mut worst_slack = f64::INFINITY;
    let mut count = 0;
    for i in 0..120 {
        let n = rng.random_range(2..=6);
        let dim = rng.random_range(2..=3);
        let part = random_partition(&mut rng, n, dim)?;
        let rot = (i % 2 == 1).then(|| haar_unitary(dim, i as u64));
        let inst = build_instance(&part, dim, rot.as_ref())?;
        let ps = ps_lower_bound(&inst)?;
        for kind in TestKind::ALL.into_iter().filter(|k| k.accepts(n)) {
            let slack = equal_prob_formula(kind, &inst)? - ps;
            worst_slack = worst_slack.min(slack);
            count += 1;
        }
    }
    Ok((
        worst_slack >= -1e-9,
        format!("1/n exact for n<=8; {count} test evaluations, min p_equal - ps = {worst_slack:e}"),
    ))
}

fn criterion_5() -> Check {
    let a = Partition::new(4, vec![vec![1, 2, 3], vec![4]])?;
    let b = Partition::new(4, vec![vec![1, 3], vec![2, 4]])?;
    let pa = exact_equal_prob(TestKind::Circle, &a)?;
    let pb = exact_equal_prob(TestKind::Circle, &b)?;
    let ca = run_circuit(TestKind::Circle, &build_instance(&a, 2, None)?)?.p_equal;
    let cb = run_circuit(TestKind::Circle, &build_instance(&b, 2, None)?)?.p_equal;
    let ok = pa == q(1, 4) && pb == q(1, 2) && (ca - 0.25).abs() < 1e-12 && (cb - 0.5).abs() < 1e-12;
    Ok((
        ok,
        format!("(psi,psi,psi,perp) -> {pa}, (psi,perp,psi,perp) -> {pb}"),
    ))
}

fn criterion_6() -> Check {
    let mut total = 0;
    for n in [2usize, 3, 5, 7, 11, 13] {
        let expect = q(1, n as i64);
        for mask in 1u32..(1 << n) - 1 {
            let members: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| i + 1).collect();
            let part = Partition::two_block(n, &members)?;
            if exact_equal_prob(TestKind::Circle, &part)? != expect {
                return Ok((false, format!("n={n} alignment {members:?} is not 1/{n}")));
            }
            total += 1;
        }
    }
    Ok((true, format!("{total} alignments, all at 1/n")))
}

fn criterion_7() -> Check {
    let c1 = srs_closed_form(1)?;
    let c2 = srs_closed_form(2)?;
    let mut ok = c1.p == q(1, 2) && c2.p == q(3, 4) && c1.a == q(0, 1) && c2.a == q(1, 1);
    let orth = build_instance(&Partition::discrete(3)?, 3, None)?;
    let two = build_instance(&Partition::two_block(3, &[1, 3])?, 2, None)?;
    let trace = srs_case_a_trace(6);
    let mut q_prev = BigRational::one();
    for m in 1..=6 {
        let c = srs_closed_form(m)?;
        let four_m = BigInt::from(4).pow(m as u32);
        ok &= c.q == q(1, 3) + BigRational::new(2.into(), 3 * four_m.clone());
        ok &= trace[m - 1].p == c.p;
        let exact = srs_exact(&two, m)?;
        ok &= exact == srs_exact_with_policy(&two, m, SrsPolicy::KeepSecond)?;
        ok &= exact == q(2, 3) * &c.q + q(1, 3) * &q_prev;
        ok &= exact <= q(1, 3) + BigRational::new(4.into(), four_m);
        q_prev = c.q;
    }
    let mut detail = String::new();
    for (inst, m, name) in [(&orth, 2, "all-orthogonal"), (&two, 2, "two-identical")] {
        let exact = srs_exact(inst, m)?;
        let est = mc_protocol(
            &ProtocolSpec::Srs {
                instance: inst.clone(),
                m,
            },
            100_000,
            0x53,
        )?;
        let within = est.consistent_with(exact.to_f64().unwrap_or(f64::NAN), 5.0);
        ok &= within;
        detail.push_str(&format!("{name} m={m}: exact {exact}, mc {:.4}; ", est.p_hat));
    }
    ok &= srs_exact(&orth, 2)? == q(1, 4);
    Ok((ok, detail.trim_end_matches("; ").to_string()))
}

fn criterion_8() -> Check {
    let mut detail = Vec::new();
    for n in 2..=24 {
        let rows = rcir_bound_rows(n, Exec::default())?;
        if let Some(bad) = rows.iter().find(|r| !r.holds) {
            return Ok((false, format!("rcir_exact({n},{}) exceeds the bound", bad.r)));
        }
        if let Some((r, scaled, bound)) = max_scaled_rcir(&rows) {
            if scaled > bound {
                return Ok((false, format!("n={n}: n*rcir {scaled} > n*eq2 {bound}")));
            }
            if n >= 20 {
                detail.push(format!(
                    "n={n}: max n*rcir={:.4} at r={r}",
                    scaled.to_f64().unwrap_or(0.0)
                ));
            }
        }
        eq2_bound(n, 1)?;
    }
    let mut cases = 0;
    for n in 4..=40 {
        for r in 1..=n / 2 {
            for s in (2..=r).filter(|s| n % s == 0 && r % s == 0) {
                let check = q_bound_check(n, r, s)?;
                if check.is_violated() {
                    return Ok((false, format!("q({n},{r},{s}) breaks its case bound")));
                }
                cases += 1;
            }
        }
    }
    let basel = basel_partial_sum_check(20_000, 1e-8);
    detail.push(format!("{cases} case bounds hold"));
    detail.push(format!(
        "basel bracket [{:.12}, {:.12}]",
        basel.lower, basel.upper
    ));
    Ok((basel.within, detail.join("; ")))
}

fn criterion_9() -> Check {
    let r = two_sided_gap_check()?;
    Ok((
        r.holds,
        format!(
            "trace distance {:.12}, (p_c, p_s) = ({:.3e}, {:.12})",
            r.trace_distance, r.p_c, r.p_s
        ),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cheap_criteria_pass() {
        for id in [1, 3, 5, 9] {
            let r = run_criterion(id).unwrap();
            assert!(r.passed, "{r:?}");
        }
        assert!(run_criterion(0).is_none());
    }
}
