use nalgebra::DMatrix;

use super::{side_of, strides, Truncation, C64};
use crate::{Error, Result};

/// Multimode density matrix on a truncated Fock basis.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedState {
    mode_dims: Vec<usize>,
    matrix: DMatrix<C64>,
    tail_mass: f64,
}

impl TruncatedState {
    /// Builds `|ψ⟩⟨ψ|`, normalising the amplitudes.
    pub fn from_pure(mode_dims: Vec<usize>, amplitudes: &[C64], tail_mass: f64) -> Result<Self> {
        check_dims(&mode_dims)?;
        let side = side_of(&mode_dims);
        if amplitudes.len() != side {
            return Err(Error::DimensionMismatch {
                expected: vec![side],
                found: vec![amplitudes.len()],
            });
        }
        let norm = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        let matrix = DMatrix::from_fn(side, side, |i, j| amplitudes[i] * amplitudes[j].conj() / (norm * norm));
        Ok(Self {
            mode_dims,
            matrix,
            tail_mass,
        })
    }

    /// Wraps an explicit density matrix. The matrix is renormalised to unit trace.
    pub fn from_density(mode_dims: Vec<usize>, matrix: DMatrix<C64>, tail_mass: f64) -> Result<Self> {
        check_dims(&mode_dims)?;
        let side = side_of(&mode_dims);
        if matrix.nrows() != side || matrix.ncols() != side {
            return Err(Error::DimensionMismatch {
                expected: vec![side, side],
                found: vec![matrix.nrows(), matrix.ncols()],
            });
        }
        Ok(Self {
            mode_dims,
            matrix,
            tail_mass,
        }
        .renormalized(0.0))
    }

    pub fn vacuum(mode_dims: Vec<usize>) -> Result<Self> {
        check_dims(&mode_dims)?;
        let side = side_of(&mode_dims);
        let mut matrix = DMatrix::zeros(side, side);
        matrix[(0, 0)] = C64::new(1.0, 0.0);
        Ok(Self {
            mode_dims,
            matrix,
            tail_mass: 0.0,
        })
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn num_modes(&self) -> usize {
        self.mode_dims.len()
    }

    pub fn side(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    /// Probability weight discarded by every truncation applied so far.
    pub fn tail_mass(&self) -> f64 {
        self.tail_mass
    }

    pub fn trace(&self) -> C64 {
        self.matrix.trace()
    }

    /// Largest entrywise deviation from Hermiticity.
    pub fn hermiticity_error(&self) -> f64 {
        let n = self.side();
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self.matrix[(i, j)] - self.matrix[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (&self.matrix + self.matrix.adjoint()) * C64::new(0.5, 0.0);
        herm.symmetric_eigenvalues()
            .iter()
            .copied()
            .fold(f64::INFINITY, f64::min)
    }

    /// `Tr ρ²`.
    pub fn purity(&self) -> f64 {
        self.matrix.iter().map(|z| z.norm_sqr()).sum()
    }

    fn check_mode(&self, mode: usize) -> Result<()> {
        if mode >= self.num_modes() {
            return Err(Error::InvalidMode {
                index: mode,
                modes: self.num_modes(),
            });
        }
        Ok(())
    }

    /// Marginal photon-number distribution of one mode.
    pub fn photon_distribution(&self, mode: usize) -> Result<Vec<f64>> {
        self.check_mode(mode)?;
        let st = strides(&self.mode_dims)[mode];
        let dim = self.mode_dims[mode];
        let mut out = vec![0.0; dim];
        for x in 0..self.side() {
            out[(x / st) % dim] += self.matrix[(x, x)].re;
        }
        Ok(out)
    }

    pub fn mean_photons(&self, mode: usize) -> Result<f64> {
        Ok(self
            .photon_distribution(mode)?
            .iter()
            .enumerate()
            .map(|(n, p)| n as f64 * p)
            .sum())
    }

    /// Keeps levels `0..dim` of `mode`, adding the removed weight to the tail.
    pub fn truncate_mode(&self, mode: usize, dim: usize) -> Result<Self> {
        self.check_mode(mode)?;
        if dim < 2 {
            return Err(Error::InvalidDimension { dim, min: 2 });
        }
        let old = self.mode_dims[mode];
        if dim >= old {
            return self.pad_mode(mode, dim);
        }
        let mut dims = self.mode_dims.clone();
        dims[mode] = dim;
        let st = strides(&self.mode_dims)[mode];
        let kept: Vec<usize> = (0..self.side()).filter(|x| (x / st) % old < dim).collect();
        let matrix = self.matrix.select_rows(&kept).select_columns(&kept);
        let lost = 1.0 - matrix.trace().re;
        Ok(Self {
            mode_dims: dims,
            matrix,
            tail_mass: self.tail_mass,
        }
        .renormalized(lost))
    }

    /// Embeds the state in a larger basis for `mode`. Exact: no weight moves.
    pub fn pad_mode(&self, mode: usize, dim: usize) -> Result<Self> {
        self.check_mode(mode)?;
        let old = self.mode_dims[mode];
        if dim <= old {
            return Ok(self.clone());
        }
        let mut dims = self.mode_dims.clone();
        dims[mode] = dim;
        let map = index_map(&self.mode_dims, &dims);
        let side = side_of(&dims);
        let mut matrix = DMatrix::zeros(side, side);
        for (j, &nj) in map.iter().enumerate() {
            for (i, &ni) in map.iter().enumerate() {
                matrix[(ni, nj)] = self.matrix[(i, j)];
            }
        }
        Ok(Self {
            mode_dims: dims,
            matrix,
            tail_mass: self.tail_mass,
        })
    }

    /// Shrinks `mode` to the smallest basis whose discarded marginal weight
    /// stays below `budget`, never going under two levels.
    pub fn fit_mode(&self, mode: usize, budget: f64) -> Result<Self> {
        let dist = self.photon_distribution(mode)?;
        let mut tail = 0.0;
        let mut dim = dist.len();
        while dim > 2 && tail + dist[dim - 1].max(0.0) < budget {
            tail += dist[dim - 1].max(0.0);
            dim -= 1;
        }
        self.truncate_mode(mode, dim)
    }

    /// Weight of the top `levels` basis states of `mode`.
    pub fn edge_weight(&self, mode: usize, levels: usize) -> Result<f64> {
        let dist = self.photon_distribution(mode)?;
        Ok(dist.iter().rev().take(levels).map(|p| p.max(0.0)).sum())
    }

    pub(crate) fn from_parts_unchecked(mode_dims: Vec<usize>, matrix: DMatrix<C64>, tail_mass: f64) -> Self {
        Self {
            mode_dims,
            matrix,
            tail_mass,
        }
    }

    /// Records `lost` in the tail and rescales to unit trace.
    pub(crate) fn renormalized(mut self, lost: f64) -> Self {
        self.tail_mass += lost.max(0.0);
        let tr = self.matrix.trace().re;
        if tr > 0.0 {
            self.matrix /= C64::new(tr, 0.0);
        }
        self
    }
}

fn check_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(Error::InvalidDimension { dim: 0, min: 1 });
    }
    if let Some(&d) = dims.iter().find(|&&d| d < 1) {
        return Err(Error::InvalidDimension { dim: d, min: 1 });
    }
    Ok(())
}

/// For every index of `from`, its position in the (elementwise larger) `to` basis.
fn index_map(from: &[usize], to: &[usize]) -> Vec<usize> {
    let to_st = strides(to);
    let side = side_of(from);
    let mut out = Vec::with_capacity(side);
    let mut digits = vec![0usize; from.len()];
    for _ in 0..side {
        out.push(digits.iter().zip(&to_st).map(|(d, s)| d * s).sum());
        for k in (0..from.len()).rev() {
            digits[k] += 1;
            if digits[k] < from[k] {
                break;
            }
            digits[k] = 0;
        }
    }
    out
}

/// Smallest dimension `d ≥ 2` with `ratio^d < budget`.
pub fn geometric_dim(ratio: f64, budget: f64) -> usize {
    if ratio <= 0.0 {
        return 2;
    }
    let d = (budget.ln() / ratio.ln()).floor() as usize + 1;
    d.max(2)
}

/// Probability that a Poisson variable of mean `mean` is at least `dim`.
pub fn coherent_tail(mean: f64, dim: usize) -> f64 {
    if mean == 0.0 {
        return if dim == 0 { 1.0 } else { 0.0 };
    }
    let ln_mean = mean.ln();
    if (dim as f64) <= mean {
        let mut ln_term = -mean;
        let mut head = 0.0;
        for k in 0..dim {
            head += ln_term.exp();
            ln_term += ln_mean - ((k + 1) as f64).ln();
        }
        return (1.0 - head).max(0.0);
    }
    // terms decrease monotonically past the mean
    let ln_fact: f64 = (1..=dim).map(|k| (k as f64).ln()).sum();
    let mut ln_term = -mean + dim as f64 * ln_mean - ln_fact;
    let mut tail = 0.0;
    let mut n = dim;
    loop {
        let term = ln_term.exp();
        tail += term;
        if term <= 1e-18 * tail || term == 0.0 {
            return tail;
        }
        n += 1;
        ln_term += ln_mean - (n as f64).ln();
    }
}

/// Smallest dimension `d ≥ 2` whose Poisson tail beyond `d` is below `budget`.
pub fn poisson_dim(mean: f64, budget: f64) -> usize {
    let mut d = 2;
    while coherent_tail(mean, d) >= budget {
        d += 1;
    }
    d
}

fn grow_until<F>(what: &'static str, start: usize, trunc: &Truncation, cap: usize, tail: F) -> Result<(usize, f64)>
where
    F: Fn(usize) -> f64,
{
    let mut dim = start;
    loop {
        let t = tail(dim);
        if t < trunc.tail_target {
            return Ok((dim, t));
        }
        if !trunc.allow_growth || dim * 2 > cap {
            return Err(Error::TruncationOverflow {
                what,
                dim,
                cap,
                tail: t,
            });
        }
        dim *= 2;
    }
}

/// Coherent state `|α⟩`, enlarged (by doubling) until the Poisson tail is
/// below the truncation target.
pub fn make_coherent(alpha: C64, dim: usize, trunc: &Truncation) -> Result<TruncatedState> {
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    if !alpha.re.is_finite() || !alpha.im.is_finite() {
        return Err(Error::InvalidParameter {
            name: "alpha",
            value: alpha.norm(),
            reason: "must be finite",
        });
    }
    let mean = alpha.norm_sqr();
    let (dim, tail) = grow_until("coherent state", dim, trunc, trunc.side_cap, |d| coherent_tail(mean, d))?;
    let mut amps = Vec::with_capacity(dim);
    let mut c = C64::new((-mean / 2.0).exp(), 0.0);
    for n in 0..dim {
        if n > 0 {
            c = c * alpha / (n as f64).sqrt();
        }
        amps.push(c);
    }
    TruncatedState::from_pure(vec![dim], &amps, tail)
}

/// Thermal state `(1−λ) Σ λⁿ |n⟩⟨n|` with `λ = n_th/(1+n_th)`.
pub fn make_thermal(n_th: f64, dim: usize, trunc: &Truncation) -> Result<TruncatedState> {
    if !(n_th >= 0.0) || !n_th.is_finite() {
        return Err(Error::InvalidParameter {
            name: "n_th",
            value: n_th,
            reason: "must be finite and non-negative",
        });
    }
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    let lambda = n_th / (1.0 + n_th);
    let (dim, tail) = grow_until("thermal state", dim, trunc, trunc.side_cap, |d| lambda.powi(d as i32))?;
    let mut matrix = DMatrix::zeros(dim, dim);
    let mut p = 1.0 - lambda;
    for n in 0..dim {
        matrix[(n, n)] = C64::new(p, 0.0);
        p *= lambda;
    }
    Ok(TruncatedState::from_parts_unchecked(vec![dim], matrix, 0.0).renormalized(tail))
}

/// Two-mode squeezed vacuum `√(1−λ²) Σ λⁿ |n,n⟩` with per-mode mean `n_mean`.
pub fn make_tmsv(n_mean: f64, dim: usize, trunc: &Truncation) -> Result<TruncatedState> {
    if !(n_mean >= 0.0) || !n_mean.is_finite() {
        return Err(Error::InvalidParameter {
            name: "N",
            value: n_mean,
            reason: "must be finite and non-negative",
        });
    }
    if dim < 2 {
        return Err(Error::InvalidDimension { dim, min: 2 });
    }
    let lambda_sq = n_mean / (n_mean + 1.0);
    let cap = (trunc.side_cap as f64).sqrt().floor() as usize;
    let (dim, tail) = grow_until("two-mode squeezed vacuum", dim, trunc, cap, |d| {
        lambda_sq.powi(d as i32)
    })?;
    let mut amps = vec![C64::new(0.0, 0.0); dim * dim];
    let lambda = lambda_sq.sqrt();
    let mut a = (1.0 - lambda_sq).sqrt();
    for n in 0..dim {
        amps[n * dim + n] = C64::new(a, 0.0);
        a *= lambda;
    }
    TruncatedState::from_pure(vec![dim, dim], &amps, tail)
}

/// Tensor product `state ⊗ new_mode`; tail masses add.
pub fn attach_mode(state: &TruncatedState, new_mode: &TruncatedState, trunc: &Truncation) -> Result<TruncatedState> {
    let side = state.side() * new_mode.side();
    if side > trunc.side_cap {
        return Err(Error::Capacity {
            side,
            cap: trunc.side_cap,
        });
    }
    let mut dims = state.mode_dims.clone();
    dims.extend_from_slice(&new_mode.mode_dims);
    Ok(TruncatedState {
        mode_dims: dims,
        matrix: state.matrix.kronecker(&new_mode.matrix),
        tail_mass: state.tail_mass + new_mode.tail_mass,
    })
}

/// Reduced state on the modes listed in `keep` (ascending order, no repeats).
pub fn partial_trace(state: &TruncatedState, keep: &[usize]) -> Result<TruncatedState> {
    if keep.is_empty() {
        return Err(Error::InvalidMode {
            index: 0,
            modes: state.num_modes(),
        });
    }
    for (k, &m) in keep.iter().enumerate() {
        state.check_mode(m)?;
        if k > 0 && keep[k - 1] >= m {
            return Err(Error::InvalidMode {
                index: m,
                modes: state.num_modes(),
            });
        }
    }
    let dims = &state.mode_dims;
    let st = strides(dims);
    let kept_dims: Vec<usize> = keep.iter().map(|&m| dims[m]).collect();
    let kept_st = strides(&kept_dims);
    let traced: Vec<usize> = (0..dims.len()).filter(|m| !keep.contains(m)).collect();
    let traced_dims: Vec<usize> = traced.iter().map(|&m| dims[m]).collect();
    let traced_st = strides(&traced_dims);

    let side_traced = side_of(&traced_dims);
    let mut groups: Vec<Vec<(usize, usize)>> = vec![Vec::new(); side_traced];
    for x in 0..state.side() {
        let digit = |m: usize| (x / st[m]) % dims[m];
        let k: usize = keep.iter().zip(&kept_st).map(|(&m, s)| digit(m) * s).sum();
        let t: usize = traced.iter().zip(&traced_st).map(|(&m, s)| digit(m) * s).sum();
        groups[t].push((k, x));
    }
    let side = side_of(&kept_dims);
    let mut out = DMatrix::zeros(side, side);
    for group in &groups {
        for &(kb, xb) in group {
            for &(ka, xa) in group {
                out[(ka, kb)] += state.matrix[(xa, xb)];
            }
        }
    }
    Ok(TruncatedState {
        mode_dims: kept_dims,
        matrix: out,
        tail_mass: state.tail_mass,
    })
}
