//! Symmetric 2×2 / 3×3 matrices with closed-form inversion.
//!
//! Moment matrices built from raw layer positions span many decades
//! (`N` against `Σy⁴ ~ 1e14` for a 445 mm tracker), so inversion runs on
//! the Jacobi-equilibrated matrix `D·M·D` with `D = diag(1/√M_ii)` and the
//! result is scaled back. Singularity and the residual are judged on the
//! equilibrated matrix, which has a unit diagonal.

use serde::ser::SerializeSeq;
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

/// Determinant floor for the unit-diagonal equilibrated matrix.
const SINGULAR_DET: f64 = 1e-13;
/// Max-norm bound on `S·S⁻¹ − 1` for the equilibrated matrix.
const MAX_RESIDUAL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymMatrix {
    dim: usize,
    a: [[f64; 3]; 3],
}

impl SymMatrix {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim == 2 || dim == 3, "only 2×2 and 3×3 matrices are supported");
        Self { dim, a: [[0.0; 3]; 3] }
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let mut m = Self::zeros(rows.len());
        for (i, r) in rows.iter().enumerate() {
            assert_eq!(r.len(), rows.len());
            for (j, v) in r.iter().enumerate() {
                m.a[i][j] = *v;
            }
        }
        m
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.a[i][i] = 1.0;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i][j]
    }

    /// Sets both `(i, j)` and `(j, i)`.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i][j] = v;
        self.a[j][i] = v;
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut m = *self;
        for row in m.a.iter_mut() {
            for v in row.iter_mut() {
                *v *= s;
            }
        }
        m
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim).map(|i| self.a[i][..self.dim].to_vec()).collect()
    }

    pub fn mul_vec(&self, v: &[f64]) -> [f64; 3] {
        let mut out = [0.0; 3];
        for (i, o) in out.iter_mut().enumerate().take(self.dim) {
            *o = (0..self.dim).map(|j| self.a[i][j] * v[j]).sum();
        }
        out
    }

    /// Plain matrix product; not symmetric in general, so returned as rows.
    pub fn matmul(&self, other: &SymMatrix) -> [[f64; 3]; 3] {
        assert_eq!(self.dim, other.dim);
        let mut out = [[0.0; 3]; 3];
        for i in 0..self.dim {
            for j in 0..self.dim {
                out[i][j] = (0..self.dim).map(|k| self.a[i][k] * other.a[k][j]).sum();
            }
        }
        out
    }

    /// `A·M·A` for symmetric `A = self`.
    pub fn sandwich(&self, middle: &SymMatrix) -> SymMatrix {
        let am = self.matmul(middle);
        let mut out = SymMatrix::zeros(self.dim);
        for i in 0..self.dim {
            for j in i..self.dim {
                let v = (0..self.dim).map(|k| am[i][k] * self.a[k][j]).sum();
                out.set(i, j, v);
            }
        }
        out
    }

    pub fn det(&self) -> f64 {
        let a = &self.a;
        match self.dim {
            2 => a[0][0] * a[1][1] - a[0][1] * a[1][0],
            _ => {
                a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1])
                    - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
                    + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
            }
        }
    }

    fn cofactor_inverse(&self) -> (SymMatrix, f64) {
        let a = &self.a;
        let det = self.det();
        let mut inv = SymMatrix::zeros(self.dim);
        match self.dim {
            2 => {
                inv.a[0][0] = a[1][1] / det;
                inv.a[1][1] = a[0][0] / det;
                inv.a[0][1] = -a[0][1] / det;
                inv.a[1][0] = -a[1][0] / det;
            }
            _ => {
                let c = |r0: usize, r1: usize, c0: usize, c1: usize| a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
                inv.a[0][0] = c(1, 2, 1, 2) / det;
                inv.a[0][1] = -c(0, 2, 1, 2) / det;
                inv.a[0][2] = c(0, 1, 1, 2) / det;
                inv.a[1][0] = -c(1, 2, 0, 2) / det;
                inv.a[1][1] = c(0, 2, 0, 2) / det;
                inv.a[1][2] = -c(0, 1, 0, 2) / det;
                inv.a[2][0] = c(1, 2, 0, 1) / det;
                inv.a[2][1] = -c(0, 2, 0, 1) / det;
                inv.a[2][2] = c(0, 1, 0, 1) / det;
            }
        }
        (inv, det)
    }

    /// Inverse via equilibrated cofactors. `what` names the matrix in errors.
    pub fn inverse(&self, what: &'static str) -> Result<SymMatrix> {
        let n = self.dim;
        let mut d = [0.0; 3];
        for i in 0..n {
            let v = self.a[i][i];
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::SingularMatrix { what, det: self.det() });
            }
            d[i] = 1.0 / v.sqrt();
        }
        let mut s = SymMatrix::zeros(n);
        for i in 0..n {
            for j in 0..n {
                s.a[i][j] = d[i] * self.a[i][j] * d[j];
            }
        }
        let (si, sdet) = s.cofactor_inverse();
        if !(sdet.is_finite() && sdet > SINGULAR_DET) {
            return Err(Error::SingularMatrix { what, det: self.det() });
        }
        let prod = s.matmul(&si);
        let mut resid: f64 = 0.0;
        for (i, row) in prod.iter().enumerate().take(n) {
            for (j, v) in row.iter().enumerate().take(n) {
                let target = if i == j { 1.0 } else { 0.0 };
                resid = resid.max((v - target).abs());
            }
        }
        if resid > MAX_RESIDUAL {
            return Err(Error::SingularMatrix { what, det: self.det() });
        }
        let mut out = SymMatrix::zeros(n);
        for i in 0..n {
            for j in i..n {
                // average the two triangles to keep the result exactly symmetric
                let v = 0.5 * (si.a[i][j] + si.a[j][i]) * d[i] * d[j];
                out.set(i, j, v);
            }
        }
        Ok(out)
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut seq = serializer.serialize_seq(Some(self.dim))?;
        for row in self.rows() {
            seq.serialize_element(&row)?;
        }
        seq.end()
    }
}
