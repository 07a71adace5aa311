//! Semi-implicit contour evolution.
//!
//! The update for each coordinate vector is
//! `v_new = (I - dt*A)^-1 (v_old - dt * Q .* n_v)`, where `A` is the
//! pentadiagonal matrix combining the second- and fourth-difference
//! operators with Neumann boundary rows. `A` depends only on
//! `(M, alpha, beta)`, so `(I - dt*A)` is factored once per system and the
//! factorization is reused for every step and both coordinates.

use crate::error::{Error, Result};
use crate::geometry::{NormalField, OpenContour, Point};

/// A reusable evolution system: the matrix `A` and the banded LU
/// factorization of `(I - dt*A)`.
#[derive(Debug, Clone)]
pub struct EvolutionSystem {
    m: usize,
    alpha: f64,
    beta: f64,
    dt: f64,
    factor: PentaLu,
}

/// Builds the system for `m` control points and factors `(I - dt*A)`.
pub fn build_system(m: usize, alpha: f64, beta: f64, dt: f64) -> Result<EvolutionSystem> {
    if m < 5 {
        return Err(Error::SystemTooSmall { got: m });
    }
    if !(alpha.is_finite() && beta.is_finite() && alpha >= 0.0 && beta >= 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("alpha and beta must be non-negative, got {alpha}, {beta}"),
        });
    }
    if alpha == 0.0 && beta == 0.0 {
        return Err(Error::InvalidParameter {
            what: "alpha and beta must not both be zero".to_string(),
        });
    }
    if !(dt.is_finite() && dt > 0.0) {
        return Err(Error::InvalidParameter {
            what: format!("dt must be positive and finite, got {dt}"),
        });
    }
    let system = EvolutionSystem {
        m,
        alpha,
        beta,
        dt,
        factor: PentaLu::empty(),
    };
    // Diagonals of B = I - dt*A.
    let b = |i: usize, j: usize| {
        let id = if i == j { 1.0 } else { 0.0 };
        id - dt * system.a_entry(i, j)
    };
    let l2: Vec<f64> = (0..m - 2).map(|i| b(i + 2, i)).collect();
    let l1: Vec<f64> = (0..m - 1).map(|i| b(i + 1, i)).collect();
    let d0: Vec<f64> = (0..m).map(|i| b(i, i)).collect();
    let u1: Vec<f64> = (0..m - 1).map(|i| b(i, i + 1)).collect();
    let u2: Vec<f64> = (0..m - 2).map(|i| b(i, i + 2)).collect();
    let factor = PentaLu::factor(&l2, &l1, &d0, &u1, &u2)?;
    Ok(EvolutionSystem { factor, ..system })
}

impl EvolutionSystem {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Entry `A[i][j]` of the evolution matrix.
    ///
    /// Boundary rows: `(-a-2b, a+3b, -b)` in row 0 and `(a+3b, -2a-6b,
    /// a+4b, -b)` in row 1; interior rows carry the stencil
    /// `(-b, a+4b, -2a-6b, a+4b, -b)`; the last two rows mirror the first
    /// two. Everything off the five central diagonals is zero.
    pub fn a_entry(&self, i: usize, j: usize) -> f64 {
        let (a, b) = (self.alpha, self.beta);
        let m = self.m;
        // Mirror the bottom rows onto the top ones.
        let (i, j) = if i >= m - 2 {
            (m - 1 - i, m - 1 - j)
        } else {
            (i, j)
        };
        let offset = j as isize - i as isize;
        match (i, offset) {
            (0, 0) => -a - 2.0 * b,
            (0, 1) => a + 3.0 * b,
            (0, 2) => -b,
            (1, -1) => a + 3.0 * b,
            (1, 0) => -2.0 * a - 6.0 * b,
            (1, 1) => a + 4.0 * b,
            (1, 2) => -b,
            (_, -2) | (_, 2) => -b,
            (_, -1) | (_, 1) => a + 4.0 * b,
            (_, 0) => -2.0 * a - 6.0 * b,
            _ => 0.0,
        }
    }

    /// Solves `(I - dt*A) w = rhs` with the stored factorization.
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if rhs.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: rhs.len(),
            });
        }
        if !rhs.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput { what: "rhs" });
        }
        Ok(self.factor.solve(rhs))
    }

    /// One semi-implicit step. `q` holds the force density at each control
    /// point; output points are not clamped here.
    pub fn step(
        &self,
        contour: &OpenContour,
        normals: &NormalField,
        q: &[f64],
    ) -> Result<OpenContour> {
        let m = self.m;
        if contour.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: contour.len(),
            });
        }
        if normals.len() != m || q.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: normals.len().min(q.len()),
            });
        }
        if !q.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFiniteInput { what: "q" });
        }
        let pts = contour.points();
        let nrm = normals.normals();
        let mut rhs_x = Vec::with_capacity(m);
        let mut rhs_y = Vec::with_capacity(m);
        for i in 0..m {
            rhs_x.push(pts[i].x - self.dt * q[i] * nrm[i].x);
            rhs_y.push(pts[i].y - self.dt * q[i] * nrm[i].y);
        }
        let xs = self.factor.solve(&rhs_x);
        let ys = self.factor.solve(&rhs_y);
        OpenContour::new(
            xs.into_iter()
                .zip(ys)
                .map(|(x, y)| Point::new(x, y))
                .collect(),
        )
    }
}

/// LU factorization of a pentadiagonal matrix (bandwidth 2), no pivoting.
///
/// `(I - dt*A)` is symmetric positive definite for the stencils above
/// (A is negative semi-definite), so elimination without pivoting is stable.
#[derive(Debug, Clone)]
struct PentaLu {
    /// Second sub-diagonal of the input matrix (reused in the forward sweep).
    l2: Vec<f64>,
    /// Effective first sub-diagonal after elimination.
    ga: Vec<f64>,
    /// Pivots.
    mu: Vec<f64>,
    /// Normalized first super-diagonal of U.
    al: Vec<f64>,
    /// Normalized second super-diagonal of U.
    be: Vec<f64>,
}

impl PentaLu {
    fn empty() -> Self {
        PentaLu {
            l2: Vec::new(),
            ga: Vec::new(),
            mu: Vec::new(),
            al: Vec::new(),
            be: Vec::new(),
        }
    }

    fn factor(l2: &[f64], l1: &[f64], d0: &[f64], u1: &[f64], u2: &[f64]) -> Result<Self> {
        let n = d0.len();
        debug_assert!(n >= 5);
        let mut ga = vec![0.0; n];
        let mut mu = vec![0.0; n];
        let mut al = vec![0.0; n - 1];
        let mut be = vec![0.0; n - 2];

        mu[0] = d0[0];
        al[0] = u1[0] / mu[0];
        be[0] = u2[0] / mu[0];

        ga[1] = l1[0];
        mu[1] = d0[1] - al[0] * ga[1];
        al[1] = (u1[1] - be[0] * ga[1]) / mu[1];
        be[1] = u2[1] / mu[1];

        for i in 2..n {
            ga[i] = l1[i - 1] - al[i - 2] * l2[i - 2];
            mu[i] = d0[i] - be[i - 2] * l2[i - 2] - al[i - 1] * ga[i];
            if i < n - 1 {
                al[i] = (u1[i] - be[i - 1] * ga[i]) / mu[i];
            }
            if i < n - 2 {
                be[i] = u2[i] / mu[i];
            }
        }
        if !mu.iter().all(|v| v.is_finite() && *v != 0.0) {
            return Err(Error::Numerical {
                what: "singular banded factorization",
            });
        }
        Ok(PentaLu {
            l2: l2.to_vec(),
            ga,
            mu,
            al,
            be,
        })
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let n = rhs.len();
        let mut ze = vec![0.0; n];
        ze[0] = rhs[0] / self.mu[0];
        ze[1] = (rhs[1] - ze[0] * self.ga[1]) / self.mu[1];
        for i in 2..n {
            ze[i] = (rhs[i] - ze[i - 2] * self.l2[i - 2] - ze[i - 1] * self.ga[i]) / self.mu[i];
        }
        let mut x = ze;
        x[n - 2] -= x[n - 1] * self.al[n - 2];
        for i in (0..n - 2).rev() {
            x[i] = x[i] - x[i + 1] * self.al[i] - x[i + 2] * self.be[i];
        }
        x
    }
}
