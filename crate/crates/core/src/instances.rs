//! QSI instances: n pure states that are pairwise equal or orthogonal,
//! optionally tagged with the block partition that produced them.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{QsiError, Result};
use crate::permgroup::{Partition, Permutation};
use crate::qmath::{gram, unitarity_deviation, PureState, C64, NORM_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct QsiInstance {
    states: Vec<PureState>,
    partition: Option<Partition>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PromiseVerdict {
    Yes,
    No,
    Violated,
}

impl QsiInstance {
    /// Free-form states; the promise is not checked.
    pub fn unstructured(states: Vec<PureState>) -> Result<Self> {
        let first = states
            .first()
            .ok_or_else(|| QsiError::InvalidArgument("instance with no states".into()))?;
        let dim = first.dim();
        if let Some(bad) = states.iter().find(|s| s.dim() != dim) {
            return Err(QsiError::DimensionMismatch {
                left: dim,
                right: bad.dim(),
            });
        }
        Ok(Self {
            states,
            partition: None,
        })
    }

    pub fn n(&self) -> usize {
        self.states.len()
    }

    pub fn dim(&self) -> usize {
        self.states[0].dim()
    }

    pub fn states(&self) -> &[PureState] {
        &self.states
    }

    pub fn partition(&self) -> Option<&Partition> {
        self.partition.as_ref()
    }

    /// The block structure: the stored partition, or the one read off the
    /// Gram matrix when the promise holds.
    pub fn structure(&self) -> Result<Partition> {
        if let Some(p) = &self.partition {
            return Ok(p.clone());
        }
        infer_partition(&self.states)?.ok_or(QsiError::PromiseViolated)
    }

    /// `(φ_1, …, φ_n)` with `φ_j = ψ_{τ(j)}`.
    pub fn relabeled(&self, tau: &Permutation) -> Result<Self> {
        if tau.n() != self.n() {
            return Err(QsiError::DimensionMismatch {
                left: tau.n(),
                right: self.n(),
            });
        }
        let states = (1..=self.n())
            .map(|j| self.states[tau.image(j) - 1].clone())
            .collect();
        let partition = match &self.partition {
            Some(p) => {
                let labels = p.labels();
                let relabeled: Vec<usize> = (1..=self.n()).map(|j| labels[tau.image(j) - 1]).collect();
                Some(Partition::from_labels(&relabeled)?)
            }
            None => None,
        };
        Ok(Self { states, partition })
    }
}

/// Block `i` of `partition` ↦ `e_i`, then `rotation` (if any) on every state.
pub fn build_instance(
    partition: &Partition,
    dim: usize,
    rotation: Option<&DMatrix<C64>>,
) -> Result<QsiInstance> {
    if dim < partition.num_blocks() {
        return Err(QsiError::InvalidArgument(format!(
            "dimension {dim} is smaller than the block count {}",
            partition.num_blocks()
        )));
    }
    if let Some(u) = rotation {
        if u.nrows() != dim {
            return Err(QsiError::DimensionMismatch {
                left: u.nrows(),
                right: dim,
            });
        }
        let deviation = unitarity_deviation(u);
        if deviation > NORM_TOL {
            return Err(QsiError::NotUnitary { deviation });
        }
    }
    let columns = (0..partition.num_blocks())
        .map(|b| {
            let e = PureState::basis(dim, b)?;
            match rotation {
                Some(u) => e.apply(u),
                None => Ok(e),
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let states = partition
        .labels()
        .into_iter()
        .map(|b| columns[b].clone())
        .collect();
    Ok(QsiInstance {
        states,
        partition: Some(partition.clone()),
    })
}

/// Haar-random unitary from a seeded ChaCha8 stream (QR of a complex
/// Ginibre matrix with the phases of `R`'s diagonal divided out).
pub fn haar_unitary(dim: usize, seed: u64) -> DMatrix<C64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let z = DMatrix::from_fn(dim, dim, |_, _| {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        C64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
    });
    let qr = z.qr();
    let (mut q, r) = qr.unpack();
    for c in 0..dim {
        let d = r[(c, c)];
        let phase = if d.norm() > 0.0 {
            d / d.norm()
        } else {
            C64::new(1.0, 0.0)
        };
        for row in 0..dim {
            q[(row, c)] *= phase;
        }
    }
    q
}

/// Groups states whose overlap has modulus ≈ 1; `None` if some pair is
/// neither equal nor orthogonal.
pub fn infer_partition(states: &[PureState]) -> Result<Option<Partition>> {
    let g = gram(states)?;
    let n = states.len();
    let mut labels = vec![usize::MAX; n];
    let mut next = 0;
    for i in 0..n {
        if labels[i] == usize::MAX {
            labels[i] = next;
            next += 1;
        }
        for j in (i + 1)..n {
            let m = g[i][j].norm();
            if (m - 1.0).abs() <= NORM_TOL {
                if labels[j] == usize::MAX {
                    labels[j] = labels[i];
                } else if labels[j] != labels[i] {
                    return Ok(None);
                }
            } else if m > NORM_TOL {
                return Ok(None);
            }
        }
    }
    // transitivity: every pair inside a block must be equal, across blocks orthogonal
    for i in 0..n {
        for j in (i + 1)..n {
            let m = g[i][j].norm();
            let same = labels[i] == labels[j];
            if (same && (m - 1.0).abs() > NORM_TOL) || (!same && m > NORM_TOL) {
                return Ok(None);
            }
        }
    }
    Partition::from_labels(&labels).map(Some)
}

pub fn verify_promise(inst: &QsiInstance) -> PromiseVerdict {
    match infer_partition(&inst.states) {
        Ok(Some(p)) if p.num_blocks() == 1 => PromiseVerdict::Yes,
        Ok(Some(_)) => PromiseVerdict::No,
        _ => PromiseVerdict::Violated,
    }
}

/// Placement of the `I_1` states around the cycle; `members` is 1-based, sorted.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alignment {
    n: usize,
    members: Vec<usize>,
}

impl Alignment {
    pub fn new(n: usize, mut members: Vec<usize>) -> Result<Self> {
        if n == 0 {
            return Err(QsiError::InvalidArgument("alignment on zero points".into()));
        }
        members.sort_unstable();
        members.dedup();
        if members.iter().any(|&m| m == 0 || m > n) {
            return Err(QsiError::InvalidArgument(format!(
                "alignment members {members:?} outside [1, {n}]"
            )));
        }
        Ok(Self { n, members })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn r(&self) -> usize {
        self.members.len()
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    /// True when `1 <= r <= n-1`, i.e. the alignment describes a NO instance.
    pub fn is_proper(&self) -> bool {
        !self.members.is_empty() && self.members.len() < self.n
    }

    /// Bitmask with bit `i-1` set for each member `i`.
    pub fn mask(&self) -> u64 {
        assert!(self.n <= 64, "mask needs n <= 64");
        self.members.iter().fold(0u64, |m, &i| m | (1 << (i - 1)))
    }

    pub fn to_partition(&self) -> Result<Partition> {
        Partition::two_block(self.n, &self.members)
    }
}

/// Repeats `pattern` `s` times: index `jk + i` is a member iff `pattern[i-1]`.
pub fn alignment_from_pattern(pattern: &[bool], s: usize) -> Result<Alignment> {
    if pattern.is_empty() || s == 0 {
        return Err(QsiError::InvalidArgument(
            "pattern and repetition must be nonempty".into(),
        ));
    }
    let k = pattern.len();
    let members = (0..s)
        .flat_map(|j| {
            pattern
                .iter()
                .enumerate()
                .filter(|(_, &b)| b)
                .map(move |(i, _)| j * k + i + 1)
        })
        .collect();
    Alignment::new(s * k, members)
}

/// On-disk instance description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum InstanceSpec {
    Structured {
        n: usize,
        dim: usize,
        partition: Vec<Vec<usize>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation_seed: Option<u64>,
    },
    Unstructured {
        n: usize,
        dim: usize,
        states: Vec<Vec<[f64; 2]>>,
    },
}

impl InstanceSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| QsiError::InvalidArgument(format!("instance JSON: {e}")))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("instance spec serializes")
    }

    pub fn build(&self) -> Result<QsiInstance> {
        match self {
            InstanceSpec::Structured {
                n,
                dim,
                partition,
                rotation_seed,
            } => {
                let part = Partition::new(*n, partition.clone())?;
                let rotation = rotation_seed.map(|seed| haar_unitary(*dim, seed));
                build_instance(&part, *dim, rotation.as_ref())
            }
            InstanceSpec::Unstructured { n, dim, states } => {
                if states.len() != *n {
                    return Err(QsiError::InvalidArgument(format!(
                        "expected {n} states, found {}",
                        states.len()
                    )));
                }
                let states = states
                    .iter()
                    .map(|amps| {
                        if amps.len() != *dim {
                            return Err(QsiError::DimensionMismatch {
                                left: *dim,
                                right: amps.len(),
                            });
                        }
                        PureState::new(amps.iter().map(|[re, im]| C64::new(*re, *im)).collect())
                    })
                    .collect::<Result<Vec<_>>>()?;
                QsiInstance::unstructured(states)
            }
        }
    }
}
