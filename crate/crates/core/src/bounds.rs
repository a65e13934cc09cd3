//! Analytic soundness bounds and the witnesses that certify them: two-block
//! stabilizer ratios, the divisor-sum RCIR bound and its per-term estimates,
//! the Basel-sum asymptote, the symmetric-subspace projector and the
//! trace-norm check for two-sided error.

use nalgebra::DMatrix;
use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::Serialize;
use std::collections::BTreeMap;
use std::f64::consts::PI;

use crate::error::{QsiError, Result};
use crate::identity_tests::{run_circuit, sum_over_group, TestKind};
use crate::instances::{build_instance, QsiInstance};
use crate::par::{map_indexed, Exec};
use crate::permgroup::{binomial, factorial, stabilizer_count_with, GroupKind, Partition};
use crate::qmath::{gram, tensor, trace_distance, DensityMatrix, PureState, C64};

/// Exact value with its float view.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RationalBound {
    #[serde(serialize_with = "ser_rational")]
    pub value: BigRational,
    pub float_view: f64,
}

fn ser_rational<S: serde::Serializer>(v: &BigRational, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&v.to_string())
}

impl RationalBound {
    pub fn new(value: BigRational) -> Self {
        let float_view = value.to_f64().unwrap_or(f64::NAN);
        Self { value, float_view }
    }
}

impl From<BigRational> for RationalBound {
    fn from(v: BigRational) -> Self {
        Self::new(v)
    }
}

fn ratio(a: impl Into<BigInt>, b: impl Into<BigInt>) -> BigRational {
    BigRational::new(a.into(), b.into())
}

pub const MAX_TWO_BLOCK_N: usize = 40;

/// `l!(n-l)!/n!`, the Permutation Test's EQUAL probability on a two-block
/// instance with block sizes `l` and `n - l`.
pub fn two_block_soundness(n: usize, l: usize) -> Result<RationalBound> {
    if l == 0 || l >= n || n > MAX_TWO_BLOCK_N {
        return Err(QsiError::InvalidArgument(format!(
            "two-block soundness needs 1 <= l <= n-1, n <= {MAX_TWO_BLOCK_N}; got n={n}, l={l}"
        )));
    }
    let v = BigRational::new(
        BigInt::from(factorial(l) * factorial(n - l)),
        BigInt::from(factorial(n)),
    );
    assert!(v <= ratio(1, n as i64), "l!(n-l)!/n! exceeded 1/n");
    Ok(v.into())
}

/// `C(n/s, r/s)/C(n, r) · s/n`, the mass of alignments with repetition `s`
/// counted through their period-`n/s` pattern.
pub fn q_value(n: usize, r: usize, s: usize) -> Result<RationalBound> {
    if s == 0 || !n.is_multiple_of(s) || !r.is_multiple_of(s) || r == 0 || 2 * r > n {
        return Err(QsiError::InvalidArgument(format!(
            "q(n,r,s) needs s | n, s | r, 1 <= r <= n/2; got ({n},{r},{s})"
        )));
    }
    let v = BigRational::new(BigInt::from(binomial(n / s, r / s)), BigInt::from(binomial(n, r)))
        * ratio(s as i64, n as i64);
    Ok(v.into())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum QCase {
    /// `s <= r/3`, bound `1/(n s^2)`
    SmallS,
    /// `s = r/2`, bound `6/((n-1)(n-2)(n-3))`
    HalfR,
    /// `s = r`, bound `2/(n(n-1))`
    FullR,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case", tag = "status")]
pub enum QBoundCheck {
    Holds {
        case: QCase,
    },
    Violated {
        case: QCase,
    },
    /// no case bound applies; with `s | r` this only happens at `s = 1`
    Uncovered,
}

impl QBoundCheck {
    pub fn is_violated(&self) -> bool {
        matches!(self, QBoundCheck::Violated { .. })
    }
}

/// The case bound on `q(n, r, s)` that applies to `(n, r, s)`, if any.
pub fn q_case_bound(n: usize, r: usize, s: usize) -> Option<(QCase, BigRational)> {
    if s < 2 {
        return None;
    }
    let n_i = n as i64;
    if 3 * s <= r {
        Some((QCase::SmallS, ratio(1, n_i * (s * s) as i64)))
    } else if 2 * s == r {
        Some((QCase::HalfR, ratio(6, (n_i - 1) * (n_i - 2) * (n_i - 3))))
    } else if s == r {
        Some((QCase::FullR, ratio(2, n_i * (n_i - 1))))
    } else {
        None
    }
}

pub fn q_bound_check(n: usize, r: usize, s: usize) -> Result<QBoundCheck> {
    if n < 4 {
        return Err(QsiError::InvalidArgument(format!(
            "case bounds need n >= 4, got {n}"
        )));
    }
    let q = q_value(n, r, s)?;
    Ok(match q_case_bound(n, r, s) {
        None => QBoundCheck::Uncovered,
        Some((case, bound)) if q.value <= bound => QBoundCheck::Holds { case },
        Some((case, _)) => QBoundCheck::Violated { case },
    })
}

/// `1/n + Σ_{s >= 2, s | n, s | r} q(n, r, s)`.
pub fn eq2_bound(n: usize, r: usize) -> Result<RationalBound> {
    if r == 0 || 2 * r > n {
        return Err(QsiError::InvalidArgument(format!(
            "divisor-sum bound needs 1 <= r <= n/2; got n={n}, r={r}"
        )));
    }
    let mut acc = ratio(1, n as i64);
    for s in (2..=r).filter(|s| n.is_multiple_of(*s) && r.is_multiple_of(*s)) {
        acc += q_value(n, r, s)?.value;
    }
    Ok(acc.into())
}

/// `π²/(6n)`, the leading term of the RCIR soundness bound.
pub fn basel_asymptote(n: usize) -> f64 {
    PI * PI / (6.0 * n as f64)
}

pub const COMPANION_CONSTANT: f64 = 1.7;

/// `1.7/n`, the rounded form of the leading term.
pub fn companion_bound(n: usize) -> f64 {
    COMPANION_CONSTANT / n as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BaselCheck {
    pub terms: usize,
    /// `Σ_{s=2..S} 1/s²`
    pub partial: f64,
    /// `partial + 1/(S+1)`, below the full sum
    pub lower: f64,
    /// `partial + 1/S`, above the full sum
    pub upper: f64,
    pub target: f64,
    pub within: bool,
}

/// Brackets `Σ_{s>=2} 1/s²` between `partial + 1/(S+1)` and `partial + 1/S`
/// and checks that `π²/6 - 1` lies inside a bracket narrower than `tol`.
pub fn basel_partial_sum_check(terms: usize, tol: f64) -> BaselCheck {
    let s_max = terms.max(2);
    // smallest terms first
    let partial: f64 = (2..=s_max).rev().map(|s| 1.0 / (s as f64 * s as f64)).sum();
    let lower = partial + 1.0 / (s_max as f64 + 1.0);
    let upper = partial + 1.0 / s_max as f64;
    let target = PI * PI / 6.0 - 1.0;
    let slack = 1e-13;
    BaselCheck {
        terms: s_max,
        partial,
        lower,
        upper,
        target,
        within: lower - slack <= target && target <= upper + slack && upper - lower <= tol,
    }
}

/// Largest `dim^n` for which the dense projector is built.
pub const MAX_PROJECTOR_DIM: usize = 1 << 10;

/// `(1/n!) Σ_σ W_σ`, where `W_σ` permutes the `n` content registers.
///
/// `W_σ` maps `|x⟩` to a rearrangement of `x`, and exactly `Π_c m_c!` of the
/// `n!` permutations map `x` to any given rearrangement, so the average is
/// `1/|class|` on every pair of indices with the same letter counts.
pub fn symmetric_projector(dim: usize, n: usize) -> Result<DMatrix<C64>> {
    if dim == 0 || n == 0 {
        return Err(QsiError::InvalidArgument("dim and n must be positive".into()));
    }
    let total = (dim as u128).checked_pow(n as u32).unwrap_or(u128::MAX);
    if total > MAX_PROJECTOR_DIM as u128 {
        return Err(QsiError::CapExceeded(format!(
            "projector on {dim}^{n} dimensions exceeds {MAX_PROJECTOR_DIM}"
        )));
    }
    let total = total as usize;
    let mut classes: BTreeMap<Vec<usize>, Vec<usize>> = BTreeMap::new();
    for x in 0..total {
        let mut counts = vec![0usize; dim];
        let mut rest = x;
        for _ in 0..n {
            counts[rest % dim] += 1;
            rest /= dim;
        }
        classes.entry(counts).or_default().push(x);
    }
    let mut p = DMatrix::<C64>::zeros(total, total);
    for members in classes.values() {
        let w = C64::new(1.0 / members.len() as f64, 0.0);
        for &y in members {
            for &x in members {
                p[(y, x)] = w;
            }
        }
    }
    Ok(p)
}

/// `(1/n!) Σ_σ Π_i |⟨ψ_i|ψ_σ(i)⟩|²` from the Gram matrix.
///
/// On promise instances every overlap is 0 or of unit modulus and this is
/// `Tr[P_S ρ]`. On arbitrary states `Tr[P_S ρ]` keeps the phases, see
/// [`ps_trace_dense`].
pub fn ps_lower_bound(inst: &QsiInstance) -> Result<f64> {
    ps_lower_bound_with(inst, Exec::default())
}

pub fn ps_lower_bound_with(inst: &QsiInstance, exec: Exec) -> Result<f64> {
    let n = inst.n();
    let g = gram(inst.states())?;
    let sum = sum_over_group(TestKind::Permutation, n, exec, |perm| {
        let prod = perm
            .iter()
            .enumerate()
            .fold(1.0, |acc, (m, &x)| acc * g[m][x].norm_sqr());
        C64::new(prod, 0.0)
    })?;
    Ok(sum.re / TestKind::Permutation.group_order(n) as f64)
}

/// Exact `Tr[P_S ρ]` on a partition-structured instance.
pub fn ps_lower_bound_exact(part: &Partition) -> Result<BigRational> {
    let count = stabilizer_count_with(part, GroupKind::Sym, Exec::default())?;
    Ok(BigRational::new(
        BigInt::from(count),
        BigInt::from(factorial(part.n())),
    ))
}

/// `⟨Ψ|P_S|Ψ⟩` with `P_S` built densely.
pub fn ps_trace_dense(inst: &QsiInstance) -> Result<f64> {
    let p = symmetric_projector(inst.dim(), inst.n())?;
    let psi = tensor(inst.states())?;
    let v = nalgebra::DVector::from_column_slice(psi.amps());
    Ok((v.adjoint() * &p * &v)[(0, 0)].re)
}

/// `|ψ_1⟩ ⊥ |ψ_2⟩ = … = |ψ_n⟩`, the instance where `P_S` gives exactly `1/n`.
pub fn worst_case_no_instance(n: usize, dim: usize) -> Result<QsiInstance> {
    if n < 2 {
        return Err(QsiError::InvalidArgument(
            "worst-case instance needs n >= 2".into(),
        ));
    }
    build_instance(&Partition::two_block(n, &[1])?, dim, None)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GapReport {
    pub trace_distance: f64,
    /// Swap Test NOT-EQUAL probability on the YES states
    pub p_c: f64,
    /// Swap Test EQUAL probability on the NO states
    pub p_s: f64,
    /// `1 - trace_distance`, the floor for `p_c + p_s`
    pub floor: f64,
    pub holds: bool,
}

/// The two-qubit mixtures `ρ_y = (|00⟩⟨00| + |11⟩⟨11|)/2` and
/// `ρ_n = (|+−⟩⟨+−| + |−+⟩⟨−+|)/2` are at trace distance 1/2, so any test
/// has `p_c + p_s >= 1/2`; the Swap Test meets it with `(0, 1/2)`.
pub fn two_sided_gap_check() -> Result<GapReport> {
    let zero = PureState::basis(2, 0)?;
    let one = PureState::basis(2, 1)?;
    let (plus, minus) = (PureState::plus(), PureState::minus());
    let rho_y = DensityMatrix::mixture(&[
        (0.5, &tensor(&[zero.clone(), zero.clone()])?),
        (0.5, &tensor(&[one.clone(), one.clone()])?),
    ])?;
    let rho_n = DensityMatrix::mixture(&[
        (0.5, &tensor(&[plus.clone(), minus.clone()])?),
        (0.5, &tensor(&[minus.clone(), plus.clone()])?),
    ])?;
    let td = trace_distance(&rho_y, &rho_n)?;
    let swap_equal = |a: &PureState, b: &PureState| -> Result<f64> {
        let inst = QsiInstance::unstructured(vec![a.clone(), b.clone()])?;
        Ok(run_circuit(TestKind::Swap, &inst)?.p_equal)
    };
    // both mixture components give the same Swap statistics
    let p_c = 1.0 - swap_equal(&zero, &zero)?.min(swap_equal(&one, &one)?);
    let p_s = swap_equal(&plus, &minus)?.max(swap_equal(&minus, &plus)?);
    let floor = 1.0 - td;
    Ok(GapReport {
        trace_distance: td,
        p_c,
        p_s,
        floor,
        holds: (td - 0.5).abs() <= 1e-10
            && p_c.abs() <= 1e-12
            && (p_s - 0.5).abs() <= 1e-12
            && p_c + p_s >= floor - 1e-10,
    })
}

/// One row of the RCIR-versus-bound table.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RcirBoundRow {
    pub n: usize,
    pub r: usize,
    pub rcir: RationalBound,
    pub eq2: RationalBound,
    pub holds: bool,
}

/// `rcir_exact(n, r)` against `eq2_bound(n, r)` for `1 <= r <= n/2`,
/// rows in increasing `r`.
pub fn rcir_bound_rows(n: usize, exec: Exec) -> Result<Vec<RcirBoundRow>> {
    let rows = map_indexed(exec, n / 2, |i| -> Result<RcirBoundRow> {
        let r = i + 1;
        let rcir: RationalBound = crate::protocols::rcir_exact_with(n, r, Exec::Sequential)?.into();
        let eq2 = eq2_bound(n, r)?;
        let holds = rcir.value <= eq2.value;
        Ok(RcirBoundRow {
            n,
            r,
            rcir,
            eq2,
            holds,
        })
    });
    rows.into_iter().collect()
}

/// `max_r n·rcir_exact(n, r)` and the `n·eq2_bound` at the same `r`.
pub fn max_scaled_rcir(rows: &[RcirBoundRow]) -> Option<(usize, BigRational, BigRational)> {
    rows.iter()
        .max_by(|a, b| a.rcir.value.cmp(&b.rcir.value).then(b.r.cmp(&a.r)))
        .map(|row| {
            let n = BigRational::from_integer(BigInt::from(row.n));
            (row.r, &row.rcir.value * &n, &row.eq2.value * &n)
        })
}
