use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;

use super::{side_of, strides, C64};
use crate::{Error, Result};

/// Sparse matrix representation of a bosonic operator on a multimode
/// truncated basis. Rows hold `(column, value)` pairs sorted by column.
#[derive(Clone, PartialEq)]
pub struct ModeOperator {
    mode_dims: Vec<usize>,
    rows: Vec<Vec<(usize, C64)>>,
    label: String,
}

impl fmt::Debug for ModeOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ModeOperator")
            .field("label", &self.label)
            .field("mode_dims", &self.mode_dims)
            .field("nnz", &self.nnz())
            .finish()
    }
}

impl ModeOperator {
    /// Single-mode annihilation operator: `a|n⟩ = √n |n−1⟩`.
    pub fn annihilation(dim: usize) -> Result<Self> {
        Self::lowering(&[dim], 0)
    }

    /// Annihilation operator of `mode` embedded in a multimode basis.
    pub fn lowering(mode_dims: &[usize], mode: usize) -> Result<Self> {
        check_mode(mode_dims, mode)?;
        if mode_dims[mode] < 2 {
            return Err(Error::InvalidDimension {
                dim: mode_dims[mode],
                min: 2,
            });
        }
        let side = side_of(mode_dims);
        let st = strides(mode_dims)[mode];
        let dim = mode_dims[mode];
        let mut rows = vec![Vec::new(); side];
        for x in 0..side {
            let n = (x / st) % dim;
            if n > 0 {
                rows[x - st].push((x, C64::new((n as f64).sqrt(), 0.0)));
            }
        }
        Ok(Self {
            mode_dims: mode_dims.to_vec(),
            rows,
            label: format!("a{mode}"),
        })
    }

    pub fn raising(mode_dims: &[usize], mode: usize) -> Result<Self> {
        Ok(Self::lowering(mode_dims, mode)?
            .adjoint()
            .with_label(format!("a{mode}†")))
    }

    /// `a†a` on `mode`; diagonal and exact (no truncation artifact).
    pub fn number(mode_dims: &[usize], mode: usize) -> Result<Self> {
        check_mode(mode_dims, mode)?;
        let side = side_of(mode_dims);
        let st = strides(mode_dims)[mode];
        let dim = mode_dims[mode];
        let rows = (0..side)
            .map(|x| {
                let n = (x / st) % dim;
                if n == 0 {
                    Vec::new()
                } else {
                    vec![(x, C64::new(n as f64, 0.0))]
                }
            })
            .collect();
        Ok(Self {
            mode_dims: mode_dims.to_vec(),
            rows,
            label: format!("n{mode}"),
        })
    }

    pub fn identity(mode_dims: &[usize]) -> Self {
        let side = side_of(mode_dims);
        Self {
            mode_dims: mode_dims.to_vec(),
            rows: (0..side).map(|x| vec![(x, C64::new(1.0, 0.0))]).collect(),
            label: "I".into(),
        }
    }

    /// `x = (a + a†)/√2`.
    pub fn quadrature_x(mode_dims: &[usize], mode: usize) -> Result<Self> {
        let a = Self::lowering(mode_dims, mode)?;
        Ok(((&a + &a.adjoint()) * std::f64::consts::FRAC_1_SQRT_2).with_label(format!("x{mode}")))
    }

    /// `p = (a − a†)/(i√2)`.
    pub fn quadrature_p(mode_dims: &[usize], mode: usize) -> Result<Self> {
        let a = Self::lowering(mode_dims, mode)?;
        let scale = C64::new(0.0, -std::f64::consts::FRAC_1_SQRT_2);
        Ok(((&a - &a.adjoint()) * scale).with_label(format!("p{mode}")))
    }

    pub fn from_dense(mode_dims: &[usize], matrix: &DMatrix<C64>, label: impl Into<String>) -> Result<Self> {
        let side = side_of(mode_dims);
        if matrix.nrows() != side || matrix.ncols() != side {
            return Err(Error::DimensionMismatch {
                expected: vec![side, side],
                found: vec![matrix.nrows(), matrix.ncols()],
            });
        }
        let rows = (0..side)
            .map(|i| {
                (0..side)
                    .filter_map(|j| {
                        let v = matrix[(i, j)];
                        (v != C64::new(0.0, 0.0)).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        Ok(Self {
            mode_dims: mode_dims.to_vec(),
            rows,
            label: label.into(),
        })
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let side = self.side();
        let mut m = DMatrix::zeros(side, side);
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                m[(i, j)] = v;
            }
        }
        m
    }

    pub fn mode_dims(&self) -> &[usize] {
        &self.mode_dims
    }

    pub fn side(&self) -> usize {
        self.rows.len()
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    pub(crate) fn rows(&self) -> &[Vec<(usize, C64)>] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        self.rows[i]
            .binary_search_by_key(&j, |&(c, _)| c)
            .map(|k| self.rows[i][k].1)
            .unwrap_or_default()
    }

    pub fn adjoint(&self) -> Self {
        let mut rows = vec![Vec::new(); self.side()];
        for (i, row) in self.rows.iter().enumerate() {
            for &(j, v) in row {
                rows[j].push((i, v.conj()));
            }
        }
        Self {
            mode_dims: self.mode_dims.clone(),
            rows,
            label: format!("({})†", self.label),
        }
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.side(), "vector length must match operator side");
        self.rows
            .iter()
            .map(|row| row.iter().map(|&(j, a)| a * v[j]).sum())
            .collect()
    }

    pub fn commutator(&self, other: &Self) -> Self {
        (&(self * other) - &(other * self)).with_label(format!("[{},{}]", self.label, other.label))
    }

    fn assert_compatible(&self, other: &Self) {
        assert_eq!(
            self.mode_dims, other.mode_dims,
            "operator dimensions differ: {} vs {}",
            self.label, other.label
        );
    }

    fn combine(&self, other: &Self, sign: f64, label: String) -> Self {
        self.assert_compatible(other);
        let rows = self
            .rows
            .iter()
            .zip(&other.rows)
            .map(|(a, b)| {
                let mut out = Vec::with_capacity(a.len() + b.len());
                let (mut i, mut j) = (0, 0);
                while i < a.len() || j < b.len() {
                    let take_a = j >= b.len() || (i < a.len() && a[i].0 < b[j].0);
                    let take_b = i >= a.len() || (j < b.len() && b[j].0 < a[i].0);
                    if take_a {
                        out.push(a[i]);
                        i += 1;
                    } else if take_b {
                        out.push((b[j].0, b[j].1 * sign));
                        j += 1;
                    } else {
                        let v = a[i].1 + b[j].1 * sign;
                        if v != C64::new(0.0, 0.0) {
                            out.push((a[i].0, v));
                        }
                        i += 1;
                        j += 1;
                    }
                }
                out
            })
            .collect();
        Self {
            mode_dims: self.mode_dims.clone(),
            rows,
            label,
        }
    }

    fn scaled(&self, s: C64) -> Self {
        Self {
            mode_dims: self.mode_dims.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| r.iter().map(|&(j, v)| (j, v * s)).collect())
                .collect(),
            label: self.label.clone(),
        }
    }
}

fn check_mode(mode_dims: &[usize], mode: usize) -> Result<()> {
    if mode >= mode_dims.len() {
        return Err(Error::InvalidMode {
            index: mode,
            modes: mode_dims.len(),
        });
    }
    Ok(())
}

impl Add for &ModeOperator {
    type Output = ModeOperator;
    fn add(self, rhs: Self) -> ModeOperator {
        self.combine(rhs, 1.0, format!("{} + {}", self.label, rhs.label))
    }
}

impl Sub for &ModeOperator {
    type Output = ModeOperator;
    fn sub(self, rhs: Self) -> ModeOperator {
        self.combine(rhs, -1.0, format!("{} - {}", self.label, rhs.label))
    }
}

impl Neg for &ModeOperator {
    type Output = ModeOperator;
    fn neg(self) -> ModeOperator {
        self.scaled(C64::new(-1.0, 0.0))
    }
}

impl Mul for &ModeOperator {
    type Output = ModeOperator;
    fn mul(self, rhs: Self) -> ModeOperator {
        self.assert_compatible(rhs);
        let side = self.side();
        let mut acc = vec![C64::new(0.0, 0.0); side];
        let mut touched = vec![false; side];
        let mut cols = Vec::new();
        let rows = self
            .rows
            .iter()
            .map(|row| {
                for &(k, a) in row {
                    for &(j, b) in &rhs.rows[k] {
                        if !touched[j] {
                            touched[j] = true;
                            cols.push(j);
                        }
                        acc[j] += a * b;
                    }
                }
                cols.sort_unstable();
                let out: Vec<(usize, C64)> = cols
                    .iter()
                    .filter_map(|&j| {
                        let v = std::mem::take(&mut acc[j]);
                        touched[j] = false;
                        (v != C64::new(0.0, 0.0)).then_some((j, v))
                    })
                    .collect();
                cols.clear();
                out
            })
            .collect();
        ModeOperator {
            mode_dims: self.mode_dims.clone(),
            rows,
            label: format!("{}·{}", self.label, rhs.label),
        }
    }
}

impl Mul<C64> for &ModeOperator {
    type Output = ModeOperator;
    fn mul(self, rhs: C64) -> ModeOperator {
        self.scaled(rhs)
    }
}

impl Mul<f64> for &ModeOperator {
    type Output = ModeOperator;
    fn mul(self, rhs: f64) -> ModeOperator {
        self.scaled(C64::new(rhs, 0.0))
    }
}

impl Mul<C64> for ModeOperator {
    type Output = ModeOperator;
    fn mul(self, rhs: C64) -> ModeOperator {
        self.scaled(rhs)
    }
}

impl Mul<f64> for ModeOperator {
    type Output = ModeOperator;
    fn mul(self, rhs: f64) -> ModeOperator {
        self.scaled(C64::new(rhs, 0.0))
    }
}
