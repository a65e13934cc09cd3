use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::One;
use std::path::Path;
use std::time::Instant;

use qsi_core::bounds::{
    basel_asymptote, basel_partial_sum_check, companion_bound, eq2_bound, ps_lower_bound,
    ps_lower_bound_exact, ps_trace_dense, q_bound_check, q_case_bound, q_value, rcir_bound_rows,
    symmetric_projector, two_block_soundness, two_sided_gap_check, QBoundCheck,
};
use qsi_core::identity_tests::{equal_prob_formula, exact_equal_prob, run_circuit_with, Caps, TestKind};
use qsi_core::instances::{build_instance, InstanceSpec, QsiInstance};
use qsi_core::par::{map_indexed, Exec};
use qsi_core::permgroup::{Partition, MAX_ENUM_N};
use qsi_core::protocols::{
    mc_protocol, rcir_exact, rcir_exact_partition, rcir_worst_merge, srs_closed_form, srs_exact,
    srs_exact_with_policy, ProtocolSpec, SrsPolicy,
};
use qsi_core::selftest::{run_criterion, CriterionReport, CRITERIA};
use qsi_core::QsiError;

use crate::record::RunRecord;
use crate::CliError;

pub type CmdResult = Result<Vec<RunRecord>, CliError>;

fn elapsed_ms(start: Instant) -> u64 {
    start.elapsed().as_millis() as u64
}

fn q(a: i64, b: i64) -> BigRational {
    BigRational::new(a.into(), b.into())
}

pub fn load_instance(path: &Path) -> Result<QsiInstance, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(InstanceSpec::from_json(&text)?.build()?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum EvalPath {
    Circuit,
    Formula,
    Both,
}

pub fn test(kind: TestKind, instance: &Path, path: EvalPath) -> CmdResult {
    let start = Instant::now();
    let inst = load_instance(instance)?;
    let caps = Caps::from_env()?;
    let mut rec = RunRecord::new("test")
        .param("kind", kind.to_string())
        .param("instance", instance.display().to_string())
        .param("path", format!("{path:?}").to_lowercase());
    let circuit = match path {
        EvalPath::Formula => None,
        _ => Some(run_circuit_with(kind, &inst, caps, Exec::default())?.p_equal),
    };
    let formula = match path {
        EvalPath::Circuit => None,
        _ => Some(equal_prob_formula(kind, &inst)?),
    };
    rec.output("p_equal_circuit", circuit);
    rec.output("p_equal_formula", formula);
    rec.output("abs_diff", circuit.zip(formula).map(|(a, b)| (a - b).abs()));
    let exact = match inst.structure() {
        Ok(p) if p.n() <= MAX_ENUM_N || matches!(kind, TestKind::Circle | TestKind::Swap) => {
            Some(exact_equal_prob(kind, &p)?)
        }
        _ => None,
    };
    match exact {
        Some(v) => rec.rational("p_equal_exact", &v),
        None => rec.output("p_equal_exact", serde_json::Value::Null),
    }
    Ok(vec![rec.finish(elapsed_ms(start))])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Policy {
    Uniform,
    KeepSecond,
}

pub struct ProtocolArgs<'a> {
    pub instance: Option<&'a Path>,
    pub n: Option<usize>,
    pub r: Option<usize>,
    pub m: usize,
    pub exact: bool,
    pub trials: u64,
    pub seed: u64,
    pub policy: Policy,
}

pub fn protocol_srs(a: &ProtocolArgs) -> CmdResult {
    let start = Instant::now();
    let path = a
        .instance
        .ok_or_else(|| CliError::Input("srs needs --instance".into()))?;
    let inst = load_instance(path)?;
    let base = RunRecord::new("protocol")
        .param("protocol", "srs")
        .param("instance", path.display().to_string())
        .param("m", a.m);
    let mut rec = if a.exact {
        let (policy, label) = match a.policy {
            Policy::Uniform => (SrsPolicy::Uniform, "uniform"),
            Policy::KeepSecond => (SrsPolicy::KeepSecond, "keep-second"),
        };
        let mut rec = base.param("mode", "exact").param("policy", label);
        rec.rational("p_yes", &srs_exact_with_policy(&inst, a.m, policy)?);
        rec
    } else {
        let est = mc_protocol(
            &ProtocolSpec::Srs {
                instance: inst,
                m: a.m,
            },
            a.trials,
            a.seed,
        )?;
        let mut rec = base
            .param("mode", "monte_carlo")
            .param("trials", a.trials)
            .seed(Some(a.seed));
        mc_outputs(&mut rec, &est);
        rec
    };
    rec = rec.finish(elapsed_ms(start));
    Ok(vec![rec])
}

fn mc_outputs(rec: &mut RunRecord, est: &qsi_core::protocols::McEstimate) {
    rec.output("successes", est.successes);
    rec.output("p_hat", est.p_hat);
    rec.output("ci95_lo", est.ci95.0);
    rec.output("ci95_hi", est.ci95.1);
}

pub fn protocol_rcir(a: &ProtocolArgs) -> CmdResult {
    let start = Instant::now();
    let (inst, mut rec) = match (a.instance, a.n, a.r) {
        (Some(path), None, None) => (
            load_instance(path)?,
            RunRecord::new("protocol")
                .param("protocol", "rcir")
                .param("instance", path.display().to_string()),
        ),
        (None, Some(n), Some(r)) => {
            let members: Vec<usize> = (1..=r).collect();
            let part = Partition::two_block(n, &members)?;
            (
                build_instance(&part, 2.max(part.num_blocks()), None)?,
                RunRecord::new("protocol")
                    .param("protocol", "rcir")
                    .param("n", n)
                    .param("r", r),
            )
        }
        _ => {
            return Err(CliError::Input(
                "rcir needs either --instance or both --n and --r".into(),
            ))
        }
    };
    if a.exact {
        rec = rec.param("mode", "exact");
        let part = inst.structure()?;
        match part.num_blocks() {
            1 => rec.rational("p_yes", &BigRational::one()),
            2 => rec.rational("p_yes", &rcir_exact(part.n(), part.blocks()[0].len())?),
            _ => {
                match rcir_exact_partition(&part) {
                    Ok(v) => rec.rational("p_yes", &v),
                    Err(e) if e.is_cap() => rec.output("p_yes", serde_json::Value::Null),
                    Err(e) => return Err(e.into()),
                }
                rec.rational("worst_merge_bound", &rcir_worst_merge(&part)?);
            }
        }
    } else {
        rec = rec
            .param("mode", "monte_carlo")
            .param("trials", a.trials)
            .seed(Some(a.seed));
        let est = mc_protocol(&ProtocolSpec::Rcir { instance: inst }, a.trials, a.seed)?;
        mc_outputs(&mut rec, &est);
    }
    Ok(vec![rec.finish(elapsed_ms(start))])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum SweepTarget {
    PermSoundness,
    RcirVsBound,
    SrsVsM,
    Qbounds,
}

pub struct SweepArgs {
    pub target: SweepTarget,
    pub from: Option<usize>,
    pub to: Option<usize>,
    pub trials: Option<u64>,
    pub seed: u64,
}

/// Runs `f` on every grid point and returns the rows in grid order.
fn grid<T: Sync, F>(points: &[T], f: F) -> CmdResult
where
    F: Fn(&T) -> Result<RunRecord, CliError> + Sync + Send,
{
    map_indexed(Exec::default(), points.len(), |i| {
        let start = Instant::now();
        f(&points[i]).map(|r| r.finish(elapsed_ms(start)))
    })
    .into_iter()
    .collect()
}

fn check_range(from: usize, to: usize, lo: usize, hi: usize, what: &str) -> Result<(), CliError> {
    if from < lo || to > hi || from > to {
        let msg = format!("{what} range {from}..={to} outside {lo}..={hi}");
        return Err(if to > hi {
            CliError::Core(QsiError::CapExceeded(msg))
        } else {
            CliError::Input(msg)
        });
    }
    Ok(())
}

pub fn sweep(a: &SweepArgs) -> CmdResult {
    match a.target {
        SweepTarget::PermSoundness => {
            let (from, to) = (a.from.unwrap_or(2), a.to.unwrap_or(9));
            check_range(from, to, 2, MAX_ENUM_N, "n")?;
            let points: Vec<(usize, usize)> = (from..=to).flat_map(|n| (1..n).map(move |l| (n, l))).collect();
            grid(&points, |&(n, l)| {
                let members: Vec<usize> = (1..=l).collect();
                let part = Partition::two_block(n, &members)?;
                let perm = exact_equal_prob(TestKind::Permutation, &part)?;
                let alt = exact_equal_prob(TestKind::Alternation, &part)?;
                let ratio = two_block_soundness(n, l)?.value;
                let mut rec = RunRecord::new("sweep perm-soundness").param("n", n).param("l", l);
                rec.rational("permutation", &perm);
                rec.rational("alternation", &alt);
                rec.rational("stabilizer_ratio", &ratio);
                rec.rational("one_over_n", &q(1, n as i64));
                rec.output("permutation_matches", perm == ratio);
                // A_2 is trivial; the identity is claimed from n = 3 on
                rec.output(
                    "alternation_matches",
                    if n >= 3 { Some(alt == ratio) } else { None },
                );
                Ok(rec)
            })
        }
        SweepTarget::RcirVsBound => {
            let (from, to) = (a.from.unwrap_or(2), a.to.unwrap_or(24));
            check_range(from, to, 2, 26, "n")?;
            let mut out = Vec::new();
            for n in from..=to {
                let start = Instant::now();
                let rows = rcir_bound_rows(n, Exec::default())?;
                let ms = elapsed_ms(start);
                let max_r = rows
                    .iter()
                    .max_by(|x, y| x.rcir.value.cmp(&y.rcir.value).then(y.r.cmp(&x.r)))
                    .map(|row| row.r);
                let nq = BigRational::from_integer(BigInt::from(n));
                for row in rows {
                    let mut rec = RunRecord::new("sweep rcir-vs-bound")
                        .param("n", n)
                        .param("r", row.r);
                    rec.rational("rcir_exact", &row.rcir.value);
                    rec.rational("eq2_bound", &row.eq2.value);
                    rec.output("companion_1_7_over_n", companion_bound(n));
                    rec.output("basel_pi2_over_6n", basel_asymptote(n));
                    rec.rational("n_rcir", &(&row.rcir.value * &nq));
                    rec.rational("n_eq2", &(&row.eq2.value * &nq));
                    rec.output("max_over_r", Some(row.r) == max_r);
                    rec.output("holds", row.holds);
                    out.push(rec.finish(ms));
                }
            }
            Ok(out)
        }
        SweepTarget::SrsVsM => {
            let (from, to) = (a.from.unwrap_or(1), a.to.unwrap_or(6));
            check_range(from, to, 1, 12, "m")?;
            let orth = build_instance(&Partition::discrete(3)?, 3, None)?;
            let two = build_instance(&Partition::two_block(3, &[1, 3])?, 2, None)?;
            let ms: Vec<usize> = (from..=to).collect();
            grid(&ms, |&m| {
                let exact_orth = srs_exact(&orth, m)?;
                let exact_two = srs_exact(&two, m)?;
                let q_m = srs_closed_form(m)?.q;
                let q_prev = if m == 1 {
                    BigRational::one()
                } else {
                    srs_closed_form(m - 1)?.q
                };
                let decomposed = q(2, 3) * &q_m + q(1, 3) * &q_prev;
                let four = BigRational::from_integer(BigInt::from(4).pow(m as u32 - 1));
                let upper = q(1, 3) + four.recip();
                let mut rec = RunRecord::new("sweep srs-vs-m").param("m", m);
                rec.rational("all_orthogonal", &exact_orth);
                rec.rational("two_identical", &exact_two);
                rec.rational("two_identical_closed_form", &decomposed);
                rec.rational("bound_1_3_plus_4_pow_1_minus_m", &upper);
                rec.output("bound_holds", exact_two <= upper && exact_orth <= upper);
                rec.output("closed_form_matches", exact_two == decomposed);
                if let Some(trials) = a.trials {
                    let seed = a.seed.wrapping_add(m as u64);
                    let est = mc_protocol(
                        &ProtocolSpec::Srs {
                            instance: two.clone(),
                            m,
                        },
                        trials,
                        seed,
                    )?;
                    rec = rec.param("trials", trials).seed(Some(seed));
                    mc_outputs(&mut rec, &est);
                }
                Ok(rec)
            })
        }
        SweepTarget::Qbounds => {
            let (from, to) = (a.from.unwrap_or(4), a.to.unwrap_or(40));
            check_range(from, to, 4, 60, "n")?;
            let points: Vec<(usize, usize, usize)> = (from..=to)
                .flat_map(|n| {
                    (1..=n / 2).flat_map(move |r| {
                        (2..=r)
                            .filter(move |s| n % s == 0 && r % s == 0)
                            .map(move |s| (n, r, s))
                    })
                })
                .collect();
            grid(&points, |&(n, r, s)| {
                let value = q_value(n, r, s)?.value;
                let check = q_bound_check(n, r, s)?;
                let mut rec = RunRecord::new("sweep qbounds")
                    .param("n", n)
                    .param("r", r)
                    .param("s", s);
                rec.rational("q", &value);
                match q_case_bound(n, r, s) {
                    Some((case, bound)) => {
                        rec.output("case", serde_json::to_value(case).expect("case serializes"));
                        rec.rational("case_bound", &bound);
                    }
                    None => {
                        rec.output("case", "uncovered");
                        rec.output("case_bound", serde_json::Value::Null);
                    }
                }
                let status = match check {
                    QBoundCheck::Holds { .. } => "holds",
                    QBoundCheck::Violated { .. } => "violated",
                    QBoundCheck::Uncovered => "uncovered",
                };
                rec.output("status", status);
                Ok(rec)
            })
        }
    }
}

#[derive(Debug, Clone, clap::Subcommand)]
pub enum BoundsCmd {
    /// l!(n-l)!/n!
    TwoBlock {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        l: usize,
    },
    /// q(n, r, s) and its case bound
    Q {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
        #[arg(long)]
        s: usize,
    },
    /// The divisor-sum RCIR bound
    DivisorSum {
        #[arg(long)]
        n: usize,
        #[arg(long)]
        r: usize,
    },
    /// pi^2/(6n), 1.7/n and the bracketed sum of 1/s^2
    Basel {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 20_000)]
        terms: usize,
    },
    /// Symmetric-subspace projector value on an instance
    Ps {
        #[arg(long)]
        instance: std::path::PathBuf,
    },
    /// Dense projector properties
    Projector {
        #[arg(long)]
        dim: usize,
        #[arg(long)]
        n: usize,
    },
    /// Trace-distance check for two-sided error
    Gap,
}

pub fn bounds(cmd: &BoundsCmd) -> CmdResult {
    let start = Instant::now();
    let rec = match cmd {
        BoundsCmd::TwoBlock { n, l } => {
            let mut rec = RunRecord::new("bounds two-block").param("n", *n).param("l", *l);
            rec.rational("soundness", &two_block_soundness(*n, *l)?.value);
            rec.rational("one_over_n", &q(1, *n as i64));
            rec
        }
        BoundsCmd::Q { n, r, s } => {
            let mut rec = RunRecord::new("bounds q")
                .param("n", *n)
                .param("r", *r)
                .param("s", *s);
            rec.rational("q", &q_value(*n, *r, *s)?.value);
            let status = match q_bound_check(*n, *r, *s)? {
                QBoundCheck::Holds { .. } => "holds",
                QBoundCheck::Violated { .. } => "violated",
                QBoundCheck::Uncovered => "uncovered",
            };
            rec.output("status", status);
            rec
        }
        BoundsCmd::DivisorSum { n, r } => {
            let mut rec = RunRecord::new("bounds divisor-sum").param("n", *n).param("r", *r);
            rec.rational("eq2_bound", &eq2_bound(*n, *r)?.value);
            rec.output("companion_1_7_over_n", companion_bound(*n));
            rec
        }
        BoundsCmd::Basel { n, terms } => {
            if *n < 2 {
                return Err(CliError::Input("basel needs n >= 2".into()));
            }
            let check = basel_partial_sum_check(*terms, 1e-8);
            let mut rec = RunRecord::new("bounds basel")
                .param("n", *n)
                .param("terms", *terms);
            rec.output("pi2_over_6n", basel_asymptote(*n));
            rec.output("companion_1_7_over_n", companion_bound(*n));
            rec.output("partial_sum", check.partial);
            rec.output("bracket_lo", check.lower);
            rec.output("bracket_hi", check.upper);
            rec.output("target", check.target);
            rec.output("within", check.within);
            rec
        }
        BoundsCmd::Ps { instance } => {
            let inst = load_instance(instance)?;
            let mut rec = RunRecord::new("bounds ps").param("instance", instance.display().to_string());
            rec.output("ps_gram", ps_lower_bound(&inst)?);
            match ps_trace_dense(&inst) {
                Ok(v) => rec.output("ps_dense", v),
                Err(e) if e.is_cap() => rec.output("ps_dense", serde_json::Value::Null),
                Err(e) => return Err(e.into()),
            }
            match inst.partition() {
                Some(p) => rec.rational("ps_exact", &ps_lower_bound_exact(p)?),
                None => rec.output("ps_exact", serde_json::Value::Null),
            }
            rec
        }
        BoundsCmd::Projector { dim, n } => {
            let p = symmetric_projector(*dim, *n)?;
            let idem = (&p * &p - &p).iter().map(|z| z.norm()).fold(0.0, f64::max);
            let herm = (&p - p.adjoint()).iter().map(|z| z.norm()).fold(0.0, f64::max);
            let mut rec = RunRecord::new("bounds projector")
                .param("dim", *dim)
                .param("n", *n);
            rec.output("trace", p.trace().re);
            rec.output("idempotency_deviation", idem);
            rec.output("hermiticity_deviation", herm);
            rec
        }
        BoundsCmd::Gap => {
            let g = two_sided_gap_check()?;
            let mut rec = RunRecord::new("bounds gap");
            rec.output("trace_distance", g.trace_distance);
            rec.output("p_c", g.p_c);
            rec.output("p_s", g.p_s);
            rec.output("floor", g.floor);
            rec.output("holds", g.holds);
            rec
        }
    };
    Ok(vec![rec.finish(elapsed_ms(start))])
}

pub fn selftest(only: Option<u8>) -> Result<Vec<CriterionReport>, CliError> {
    let ids: Vec<u8> = match only {
        Some(id) => vec![id],
        None => CRITERIA.iter().map(|c| c.0).collect(),
    };
    ids.into_iter()
        .map(|id| run_criterion(id).ok_or_else(|| CliError::Input(format!("no criterion {id}"))))
        .collect()
}
