//! Optimal quadratic quantisers of the standard Gaussian law in one and
//! two dimensions, their Voronoi weights, and the maps that turn them into
//! quantised OU states.
//!
//! Expectations are approximated as `E[f(Y)] ≈ Σ_j f(y_j) p_j`, where
//! `p_j` is the Gaussian mass of the Voronoi cell of `y_j`.

mod cache;
mod io;
mod kdtree;
mod one_d;
mod two_d;

pub use cache::{default_cache_dir, GridCache, CACHE_ENV, TOL_1D, TOL_2D};
pub use io::{load_grid, save_grid};
pub use one_d::build_gaussian_1d;
pub use two_d::{build_gaussian_2d, build_gaussian_2d_with, Lloyd2dOptions};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{cross_var, ou_var, ModelParams, TwoFactorParams};

/// Bumped whenever a generator change would alter cached grids.
pub const ALGORITHM_VERSION: u32 = 1;

/// Default grid sizes.
pub const DEFAULT_N_1D: usize = 1000;
pub const DEFAULT_N_2D: usize = 1450;

/// `N` points of `R^dim` with their Voronoi probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantiserGrid {
    dim: usize,
    /// Row-major, `dim` coordinates per point.
    points: Vec<f64>,
    probs: Vec<f64>,
    /// `L²` quantisation error `e_N = ‖Y - Ŷ‖₂`.
    distortion: f64,
}

impl QuantiserGrid {
    /// Validates and assembles a grid. Probabilities must be positive and
    /// sum to one within `1e-12`; 1-D points must be strictly increasing.
    pub fn from_parts(
        dim: usize,
        points: Vec<f64>,
        probs: Vec<f64>,
        distortion: f64,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::domain(format!("unsupported dimension {dim}")));
        }
        if probs.is_empty() {
            return Err(Error::Empty("quantiser grid"));
        }
        if points.len() != dim * probs.len() {
            return Err(Error::domain(format!(
                "{} coordinates for {} points of dimension {dim}",
                points.len(),
                probs.len()
            )));
        }
        if let Some(p) = probs.iter().find(|p| !(**p > 0.0)) {
            return Err(Error::domain(format!("non-positive cell probability {p}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Normalisation(total));
        }
        if points.iter().any(|x| !x.is_finite()) {
            return Err(Error::domain("non-finite quantiser point"));
        }
        if dim == 1 && points.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::domain(
                "1-D quantiser points must be strictly increasing",
            ));
        }
        if !(distortion >= 0.0) {
            return Err(Error::domain(format!("distortion {distortion} < 0")));
        }
        Ok(Self {
            dim,
            points,
            probs,
            distortion,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.dim..(j + 1) * self.dim]
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn distortion(&self) -> f64 {
        self.distortion
    }

    /// One coordinate of every point.
    pub fn axis(&self, axis: usize) -> Vec<f64> {
        assert!(axis < self.dim);
        self.points
            .iter()
            .skip(axis)
            .step_by(self.dim)
            .copied()
            .collect()
    }

    /// `Σ_j f(y_j) p_j`.
    pub fn expectation(&self, mut f: impl FnMut(&[f64]) -> f64) -> f64 {
        (0..self.len())
            .map(|j| f(self.point(j)) * self.probs[j])
            .sum()
    }
}

/// A pair of grids with target correlation, built from independent
/// coordinates by a Cholesky factor.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelatedPair {
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
    pub rho12: f64,
}

/// `y1 = z1`, `y2 = ρ₁₂ z1 + √(1-ρ₁₂²) z2`.
pub fn correlate(z1: &[f64], z2: &[f64], rho12: f64) -> Result<CorrelatedPair> {
    if !(rho12.abs() <= 1.0) {
        return Err(Error::domain(format!("|rho12| = {} > 1", rho12.abs())));
    }
    if z1.len() != z2.len() {
        return Err(Error::domain("coordinate vectors differ in length"));
    }
    let c = (1.0 - rho12 * rho12).max(0.0).sqrt();
    let y2 = if rho12 == 0.0 {
        z2.to_vec()
    } else {
        z1.iter()
            .zip(z2)
            .map(|(&a, &b)| rho12 * a + c * b)
            .collect()
    };
    Ok(CorrelatedPair {
        y1: z1.to_vec(),
        y2,
        rho12,
    })
}

/// Quantised OU states at a fixed observation time.
#[derive(Debug, Clone, PartialEq)]
pub enum OuGrid {
    One {
        t: f64,
        x: Vec<f64>,
        probs: Vec<f64>,
    },
    Two {
        t: f64,
        x1: Vec<f64>,
        x2: Vec<f64>,
        probs: Vec<f64>,
    },
}

impl OuGrid {
    pub fn t(&self) -> f64 {
        match self {
            OuGrid::One { t, .. } | OuGrid::Two { t, .. } => *t,
        }
    }

    pub fn probs(&self) -> &[f64] {
        match self {
            OuGrid::One { probs, .. } | OuGrid::Two { probs, .. } => probs,
        }
    }

    pub fn len(&self) -> usize {
        self.probs().len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs().is_empty()
    }
}

fn check_time(t: f64) -> Result<()> {
    if !(t >= 0.0) {
        return Err(Error::domain(format!("t = {t} < 0")));
    }
    Ok(())
}

/// `X_t = σ_{X_t} z` for a 1-D grid.
pub fn scale_to_ou_1f(grid: &QuantiserGrid, k: f64, t: f64) -> Result<OuGrid> {
    check_time(t)?;
    if grid.dim() != 1 {
        return Err(Error::domain("one-factor states need a 1-D grid"));
    }
    if !(k >= 0.0) {
        return Err(Error::domain(format!("k = {k} < 0")));
    }
    let sd = ou_var(k, t).sqrt();
    Ok(OuGrid::One {
        t,
        x: grid.points().iter().map(|z| sd * z).collect(),
        probs: grid.probs().to_vec(),
    })
}

/// Correlates a 2-D grid with `ρ₁₂(t)` and scales each coordinate by its
/// OU standard deviation.
pub fn scale_to_ou_2f(grid: &QuantiserGrid, p: &TwoFactorParams, t: f64) -> Result<OuGrid> {
    check_time(t)?;
    if grid.dim() != 2 {
        return Err(Error::domain("two-factor states need a 2-D grid"));
    }
    let (v1, v2, v12) = cross_var(p, t);
    let rho12 = if v1 > 0.0 && v2 > 0.0 {
        (v12 / (v1 * v2).sqrt()).clamp(-1.0, 1.0)
    } else {
        p.rho
    };
    let pair = correlate(&grid.axis(0), &grid.axis(1), rho12)?;
    let (s1, s2) = (v1.sqrt(), v2.sqrt());
    Ok(OuGrid::Two {
        t,
        x1: pair.y1.iter().map(|y| s1 * y).collect(),
        x2: pair.y2.iter().map(|y| s2 * y).collect(),
        probs: grid.probs().to_vec(),
    })
}

pub fn scale_to_ou(grid: &QuantiserGrid, params: &ModelParams, t: f64) -> Result<OuGrid> {
    match params {
        ModelParams::OneFactor(p) => scale_to_ou_1f(grid, p.k, t),
        ModelParams::TwoFactor(p) => scale_to_ou_2f(grid, p, t),
    }
}
