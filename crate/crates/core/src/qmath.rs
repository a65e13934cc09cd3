//! Dense complex linear algebra: pure states, joint registers, density
//! matrices, the DFT on a control register, and trace distance.

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex;
use std::f64::consts::PI;

use crate::error::{QsiError, Result};

pub type C64 = Complex<f64>;

pub const NORM_TOL: f64 = 1e-9;
pub const CMP_TOL: f64 = 1e-10;
/// Outcomes below this probability are dropped by `measure_first_register`.
pub const PROB_FLOOR: f64 = 1e-14;

pub(crate) fn norm_sqr(amps: &[C64]) -> f64 {
    amps.iter().map(|a| a.norm_sqr()).sum()
}

/// A normalized pure state on a `dim`-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amps: Vec<C64>,
}

impl PureState {
    /// Accepts `amps` only if its L2 norm is 1 within `NORM_TOL`.
    pub fn new(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(QsiError::InvalidArgument("state of dimension 0".into()));
        }
        let norm = norm_sqr(&amps).sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QsiError::NotNormalized { norm });
        }
        Ok(Self { amps })
    }

    /// Builder stage for unnormalized vectors: rescales to unit norm.
    pub fn normalized(amps: Vec<C64>) -> Result<Self> {
        if amps.is_empty() {
            return Err(QsiError::InvalidArgument("state of dimension 0".into()));
        }
        let norm = norm_sqr(&amps).sqrt();
        if norm < 1e-300 || !norm.is_finite() {
            return Err(QsiError::NotNormalized { norm });
        }
        Ok(Self {
            amps: amps.into_iter().map(|a| a / norm).collect(),
        })
    }

    pub fn from_real(amps: &[f64]) -> Result<Self> {
        Self::new(amps.iter().map(|&x| C64::new(x, 0.0)).collect())
    }

    /// Computational basis vector `e_index`.
    pub fn basis(dim: usize, index: usize) -> Result<Self> {
        if index >= dim {
            return Err(QsiError::InvalidArgument(format!(
                "basis index {index} out of range for dimension {dim}"
            )));
        }
        let mut amps = vec![C64::new(0.0, 0.0); dim];
        amps[index] = C64::new(1.0, 0.0);
        Ok(Self { amps })
    }

    /// |+⟩ = (|0⟩ + |1⟩)/√2
    pub fn plus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amps: vec![C64::new(h, 0.0), C64::new(h, 0.0)],
        }
    }

    /// |−⟩ = (|0⟩ − |1⟩)/√2
    pub fn minus() -> Self {
        let h = std::f64::consts::FRAC_1_SQRT_2;
        Self {
            amps: vec![C64::new(h, 0.0), C64::new(-h, 0.0)],
        }
    }

    pub fn dim(&self) -> usize {
        self.amps.len()
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    /// Applies a square matrix; the result is renormalized only to absorb
    /// rounding, callers pass unitaries.
    pub fn apply(&self, u: &DMatrix<C64>) -> Result<Self> {
        if u.nrows() != self.dim() || u.ncols() != self.dim() {
            return Err(QsiError::DimensionMismatch {
                left: u.nrows(),
                right: self.dim(),
            });
        }
        let out: Vec<C64> = (0..self.dim())
            .map(|r| self.amps.iter().enumerate().map(|(c, a)| u[(r, c)] * a).sum())
            .collect();
        Self::normalized(out)
    }

    /// |ψ⟩⟨ψ|
    pub fn projector(&self) -> DensityMatrix {
        let d = self.dim();
        let entries = DMatrix::from_fn(d, d, |r, c| self.amps[r] * self.amps[c].conj());
        DensityMatrix { entries }
    }
}

/// Kronecker product of `states` in list order.
pub fn tensor(states: &[PureState]) -> Result<PureState> {
    let (first, rest) = states.split_first().ok_or(QsiError::EmptyTensor)?;
    let mut acc = first.amps.clone();
    for s in rest {
        let mut next = Vec::with_capacity(acc.len() * s.dim());
        for a in &acc {
            next.extend(s.amps.iter().map(|b| a * b));
        }
        acc = next;
    }
    Ok(PureState { amps: acc })
}

/// ⟨a|b⟩, conjugate-linear in `a`.
pub fn inner(a: &PureState, b: &PureState) -> Result<C64> {
    if a.dim() != b.dim() {
        return Err(QsiError::DimensionMismatch {
            left: a.dim(),
            right: b.dim(),
        });
    }
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// Gram matrix `G[i][j] = ⟨ψ_i|ψ_j⟩`.
pub fn gram(states: &[PureState]) -> Result<Vec<Vec<C64>>> {
    states
        .iter()
        .map(|a| states.iter().map(|b| inner(a, b)).collect())
        .collect()
}

/// Unitary DFT with entry `(j, k) = ω^{jk}/√N`, `ω = exp(2πi/N)`.
pub fn dft(n: usize) -> Result<DMatrix<C64>> {
    if n == 0 {
        return Err(QsiError::InvalidArgument("dft of size 0".into()));
    }
    let scale = 1.0 / (n as f64).sqrt();
    let roots: Vec<C64> = (0..n)
        .map(|t| C64::from_polar(scale, 2.0 * PI * t as f64 / n as f64))
        .collect();
    Ok(DMatrix::from_fn(n, n, |j, k| roots[(j * k) % n]))
}

/// Max-entry deviation of `u·u†` from the identity.
pub fn unitarity_deviation(u: &DMatrix<C64>) -> f64 {
    if u.nrows() != u.ncols() {
        return f64::INFINITY;
    }
    let prod = u * u.adjoint();
    let mut worst = 0.0f64;
    for r in 0..prod.nrows() {
        for c in 0..prod.ncols() {
            let target = if r == c { 1.0 } else { 0.0 };
            worst = worst.max((prod[(r, c)] - C64::new(target, 0.0)).norm());
        }
    }
    worst
}

/// Pure state on `control ⊗ register_1 ⊗ … ⊗ register_n`, control-major
/// layout with register 1 the most significant content digit.
#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    factor_dims: Vec<usize>,
    amps: Vec<C64>,
}

impl JointState {
    pub fn new(factor_dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        let s = Self::new_unchecked_norm(factor_dims, amps)?;
        let norm = norm_sqr(&s.amps).sqrt();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(QsiError::NotNormalized { norm });
        }
        Ok(s)
    }

    pub(crate) fn new_unchecked_norm(factor_dims: Vec<usize>, amps: Vec<C64>) -> Result<Self> {
        if factor_dims.is_empty() || factor_dims.contains(&0) {
            return Err(QsiError::InvalidArgument(
                "joint state needs positive factor dimensions".into(),
            ));
        }
        let total: usize = factor_dims.iter().product();
        if total != amps.len() {
            return Err(QsiError::DimensionMismatch {
                left: total,
                right: amps.len(),
            });
        }
        Ok(Self { factor_dims, amps })
    }

    /// `|0⟩_control ⊗ |content⟩`.
    pub fn with_control(control_dim: usize, content: &JointState) -> Result<Self> {
        if control_dim == 0 {
            return Err(QsiError::InvalidArgument("control dimension 0".into()));
        }
        let mut dims = Vec::with_capacity(content.factor_dims.len() + 1);
        dims.push(control_dim);
        dims.extend_from_slice(&content.factor_dims);
        let mut amps = vec![C64::new(0.0, 0.0); control_dim * content.amps.len()];
        amps[..content.amps.len()].copy_from_slice(&content.amps);
        Ok(Self {
            factor_dims: dims,
            amps,
        })
    }

    /// Content registers `ψ_1 ⊗ … ⊗ ψ_n`, one factor per state.
    pub fn product(states: &[PureState]) -> Result<Self> {
        let t = tensor(states)?;
        Ok(Self {
            factor_dims: states.iter().map(PureState::dim).collect(),
            amps: t.amps,
        })
    }

    pub fn factor_dims(&self) -> &[usize] {
        &self.factor_dims
    }

    pub fn amps(&self) -> &[C64] {
        &self.amps
    }

    pub(crate) fn amps_mut(&mut self) -> &mut [C64] {
        &mut self.amps
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.amps).sqrt()
    }

    pub fn control_dim(&self) -> usize {
        self.factor_dims[0]
    }

    /// Size of one control slice (product of all non-control factors).
    pub fn slice_len(&self) -> usize {
        self.amps.len() / self.factor_dims[0]
    }

    /// Content registers conditioned on control value `outcome`,
    /// renormalized. `None` if that slice is numerically empty.
    pub fn content_for_control(&self, outcome: usize) -> Option<JointState> {
        if outcome >= self.control_dim() || self.factor_dims.len() < 2 {
            return None;
        }
        let len = self.slice_len();
        let slice = &self.amps[outcome * len..(outcome + 1) * len];
        let norm = norm_sqr(slice).sqrt();
        if norm * norm < PROB_FLOOR {
            return None;
        }
        Some(JointState {
            factor_dims: self.factor_dims[1..].to_vec(),
            amps: slice.iter().map(|a| a / norm).collect(),
        })
    }

    /// Overlap ⟨self|other⟩.
    pub fn overlap(&self, other: &JointState) -> Result<C64> {
        if self.factor_dims != other.factor_dims {
            return Err(QsiError::DimensionMismatch {
                left: self.amps.len(),
                right: other.amps.len(),
            });
        }
        Ok(self.amps.iter().zip(&other.amps).map(|(a, b)| a.conj() * b).sum())
    }
}

#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    pub outcome: usize,
    pub probability: f64,
    pub post_state: JointState,
}

/// Probability of each control value; not renormalized.
pub(crate) fn control_probabilities(s: &JointState) -> Vec<f64> {
    let len = s.slice_len();
    s.amps.chunks(len).map(norm_sqr).collect()
}

/// Computational-basis measurement of the first register.
pub fn measure_first_register(s: &JointState) -> Vec<MeasurementOutcome> {
    let len = s.slice_len();
    let probs = control_probabilities(s);
    let total: f64 = probs.iter().sum();
    probs
        .iter()
        .enumerate()
        .filter(|(_, &p)| p / total >= PROB_FLOOR)
        .map(|(outcome, &p)| {
            let scale = 1.0 / p.sqrt();
            let mut amps = vec![C64::new(0.0, 0.0); s.amps.len()];
            for (dst, src) in amps[outcome * len..(outcome + 1) * len]
                .iter_mut()
                .zip(&s.amps[outcome * len..(outcome + 1) * len])
            {
                *dst = src * scale;
            }
            MeasurementOutcome {
                outcome,
                probability: p / total,
                post_state: JointState {
                    factor_dims: s.factor_dims.clone(),
                    amps,
                },
            }
        })
        .collect()
}

/// Hermitian, PSD, unit-trace matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    entries: DMatrix<C64>,
}

impl DensityMatrix {
    pub fn new(entries: DMatrix<C64>) -> Result<Self> {
        if entries.nrows() != entries.ncols() || entries.nrows() == 0 {
            return Err(QsiError::InvalidDensityMatrix("not square".into()));
        }
        let herm = (&entries - entries.adjoint())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        if herm > CMP_TOL {
            return Err(QsiError::InvalidDensityMatrix(format!(
                "not Hermitian (deviation {herm:e})"
            )));
        }
        let tr = entries.trace();
        if (tr - C64::new(1.0, 0.0)).norm() > CMP_TOL {
            return Err(QsiError::InvalidDensityMatrix(format!("trace {tr}")));
        }
        let min = hermitian_eigenvalues(&entries)
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        if min < -CMP_TOL {
            return Err(QsiError::InvalidDensityMatrix(format!(
                "negative eigenvalue {min:e}"
            )));
        }
        Ok(Self { entries })
    }

    /// Convex mixture `Σ w_i |ψ_i⟩⟨ψ_i|`.
    pub fn mixture(terms: &[(f64, &PureState)]) -> Result<Self> {
        let (_, first) = terms.first().ok_or(QsiError::EmptyTensor)?;
        let d = first.dim();
        let mut m = DMatrix::zeros(d, d);
        for (w, s) in terms {
            if s.dim() != d {
                return Err(QsiError::DimensionMismatch {
                    left: d,
                    right: s.dim(),
                });
            }
            m += s.projector().entries * C64::new(*w, 0.0);
        }
        Self::new(m)
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn entries(&self) -> &DMatrix<C64> {
        &self.entries
    }
}

pub(crate) fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    SymmetricEigen::new(m.clone())
        .eigenvalues
        .iter()
        .copied()
        .collect()
}

/// `½ Σ |λ_i(r1 − r2)|`.
pub fn trace_distance(r1: &DensityMatrix, r2: &DensityMatrix) -> Result<f64> {
    if r1.dim() != r2.dim() {
        return Err(QsiError::DimensionMismatch {
            left: r1.dim(),
            right: r2.dim(),
        });
    }
    let diff = &r1.entries - &r2.entries;
    let sum: f64 = hermitian_eigenvalues(&diff).iter().map(|l| l.abs()).sum();
    Ok((0.5 * sum).clamp(0.0, 1.0))
}
