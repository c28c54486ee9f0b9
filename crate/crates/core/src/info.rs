//! Entropies and mutual information of the wave–count pair `(W, C)` and of
//! the count–count pair `(C₁, C₂)`, in nats.
//!
//! `I(W; C) = h(W) + H(C) - H(W, C)` where `H(W, C)` is the mixed entropy of
//! the pair `g₀, g₁`. The production path evaluates the same quantity as a
//! single Kullback–Leibler integral in standardized units `t = w / sigma`,
//!
//! ```text
//! I = ∫ φ(t) [ B₀ ln(B₀ / ((1-P) B₁)) - P ln B₁ ] dt,
//! B₀ = 1 - P - |s|² + |s|² t²,   B₁ = 1 - |s|² + |s|² t²,
//! ```
//!
//! which is manifestly independent of `sigma` and avoids cancelling three
//! entropies of order one when `I` is tiny.

use std::f64::consts::PI;

use rayon::prelude::*;
use serde::Serialize;

use crate::dists::{MixedJointPdf, WavePdf};
use crate::error::{Error, Result};
use crate::model::FEASIBILITY_SLACK;
use crate::numeric::{adaptive_integrate, golden_section_max, nelder_mead_max, xlnx, AdaptiveOptions};

/// Half-width of the entropy integration window in units of the effective
/// standard deviation `sigma (1 + 2|s|²)^{1/2}`.
pub const WINDOW_SIGMAS: f64 = 12.0;

fn window(sigma: f64, s2: f64) -> [f64; 5] {
    let l = WINDOW_SIGMAS * sigma * (1.0 + 2.0 * s2).sqrt();
    [-l, -sigma, 0.0, sigma, l]
}

fn opts() -> AdaptiveOptions {
    AdaptiveOptions {
        abs_tol: 1e-14,
        rel_tol: 1e-13,
        max_panels: 20_000,
    }
}

fn check_s(s: f64) -> Result<f64> {
    let a = s.abs();
    if a <= 1.0 + 1e-12 {
        Ok(a.min(1.0))
    } else {
        Err(Error::Domain(format!("|s| = {a} exceeds 1")))
    }
}

fn check_feasible(s: f64, p: f64) -> Result<(f64, f64)> {
    let s = check_s(s)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("P must lie in [0, 1], got {p}")));
    }
    let slack = 1.0 - p - s * s;
    if slack < -FEASIBILITY_SLACK {
        return Err(Error::Infeasible(vec![format!(
            "1 - P - |s|^2 >= 0 violated (value {slack:.6})"
        )]));
    }
    Ok((s, p))
}

/// Differential entropy `h(W)` of the single-photon amplitude.
pub fn diff_entropy_w(sigma: f64, s: f64) -> Result<f64> {
    let s = check_s(s)?;
    let pdf = WavePdf::single(sigma, s)?;
    let (v, _) = adaptive_integrate(|w| -xlnx(pdf.density(w)), &window(sigma, s * s), opts())?;
    Ok(v)
}

/// Binary entropy `H(C) = -P ln P - (1-P) ln(1-P)`.
pub fn discrete_entropy_c(p: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("P must lie in [0, 1], got {p}")));
    }
    Ok(-xlnx(p) - xlnx(1.0 - p))
}

/// Mixed entropy `-Σᵢ ∫ gᵢ ln gᵢ dw` of the wave–count pair.
pub fn mixed_entropy_wc(sigma: f64, s: f64, p: f64) -> Result<f64> {
    let (s, p) = check_feasible(s, p)?;
    let m = MixedJointPdf::single(sigma, s, p)?;
    let (v, _) = adaptive_integrate(|w| -xlnx(m.g0(w)) - xlnx(m.g1(w)), &window(sigma, s * s), opts())?;
    Ok(v)
}

/// `I(W; C)` assembled from the three entropies at scale `sigma`.
pub fn mutual_info_wc_decomposed(sigma: f64, s: f64, p: f64) -> Result<f64> {
    let (s, p) = check_feasible(s, p)?;
    Ok(diff_entropy_w(sigma, s)? + discrete_entropy_c(p)? - mixed_entropy_wc(sigma, s, p)?)
}

/// Mutual information `I(W; C)` in nats for overlap `s` and click
/// probability `P`. Independent of `sigma`.
pub fn mutual_info_wc(s: f64, p: f64) -> Result<f64> {
    let (s, p) = check_feasible(s, p)?;
    let s2 = s * s;
    if s2 == 0.0 || p == 0.0 || p >= 1.0 {
        return Ok(0.0);
    }
    let norm = 1.0 / (2.0 * PI).sqrt();
    let integrand = |t: f64| {
        let phi = norm * (-0.5 * t * t).exp();
        let b1 = 1.0 - s2 + s2 * t * t;
        let b0 = ((1.0 - p - s2) + s2 * t * t).max(0.0);
        // b1 ≥ P > 0 whenever b0 ≥ 0, so the logs are finite.
        let kl0 = if b0 > 0.0 { b0 * (b0 / ((1.0 - p) * b1)).ln() } else { 0.0 };
        phi * (kl0 - p * b1.ln())
    };
    let (v, _) = adaptive_integrate(integrand, &window(1.0, s2), opts())?;
    Ok(v.max(0.0))
}

/// `I(C₁; C₂)` for two counting detectors.
pub fn mutual_info_cc(p1: f64, p2: f64) -> Result<f64> {
    for p in [p1, p2] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("P must lie in [0, 1], got {p}")));
        }
    }
    if p1 + p2 > 1.0 + FEASIBILITY_SLACK {
        return Err(Error::Infeasible(vec![format!(
            "P1 + P2 <= 1 violated (value {:.6})",
            p1 + p2
        )]));
    }
    let none = (1.0 - p1 - p2).max(0.0);
    Ok((-xlnx(1.0 - p1) - xlnx(1.0 - p2) + xlnx(none)).max(0.0))
}

/// Location and value of the largest `I(W; C)` over the feasible region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiMaximum {
    pub s: f64,
    #[serde(rename = "P")]
    pub p: f64,
    pub value: f64,
    /// `1 - P - s²` at the maximizer.
    pub boundary_gap: f64,
    pub on_boundary: bool,
    /// Best value found by the unconstrained interior search.
    pub interior_value: f64,
}

/// Distance from the boundary `P = 1 - s²` within which a maximizer counts as
/// lying on it.
pub const BOUNDARY_TOLERANCE: f64 = 1e-3;

/// Maximizes `I(W; C)` over `1 - P - s² ≥ 0`: coarse grid scan, golden-section
/// refinement along the boundary curve, and a Nelder–Mead search in the
/// interior. Whether the maximizer lies on the boundary is reported, not
/// assumed.
pub fn maximize_mi_wc() -> Result<MiMaximum> {
    const N: usize = 41;
    let step = 1.0 / (N - 1) as f64;
    let objective = |s: f64, p: f64| -> f64 {
        if !(0.0..=1.0).contains(&s) || !(0.0..=1.0).contains(&p) || 1.0 - p - s * s < 0.0 {
            return f64::NEG_INFINITY;
        }
        mutual_info_wc(s, p).unwrap_or(f64::NEG_INFINITY)
    };

    let grid = mi_map(&MapGrid {
        s_min: 0.0,
        s_max: 1.0,
        n_s: N,
        p_min: 0.0,
        p_max: 1.0,
        n_p: N,
    })?;
    let best_cell = grid
        .iter()
        .filter(|c| c.feasible)
        .max_by(|a, b| a.mi.total_cmp(&b.mi))
        .copied()
        .expect("grid contains feasible cells");

    // Boundary: P ∈ [0, 1], s = √(1 - P).
    let boundary_scan: Vec<(f64, f64)> = (0..=200)
        .map(|i| {
            let p = i as f64 / 200.0;
            (p, objective((1.0 - p).sqrt(), p))
        })
        .collect();
    let (p0, _) = boundary_scan
        .iter()
        .copied()
        .max_by(|a, b| a.1.total_cmp(&b.1))
        .unwrap();
    let (p_b, i_b) = golden_section_max(
        |p| objective((1.0 - p).max(0.0).sqrt(), p),
        (p0 - 0.01).max(0.0),
        (p0 + 0.01).min(1.0),
        1e-9,
    );
    let s_b = (1.0 - p_b).max(0.0).sqrt();

    // Interior: start from the best grid cell pulled inside the region.
    let start = [best_cell.s * 0.95, best_cell.p * 0.95];
    let (x_i, i_i) = nelder_mead_max(|[s, p]| objective(s, p), start, 0.5 * step, 1e-13, 2000);

    let (s, p, value) = if i_i > i_b { (x_i[0], x_i[1], i_i) } else { (s_b, p_b, i_b) };
    let gap = 1.0 - p - s * s;
    Ok(MiMaximum {
        s,
        p,
        value,
        boundary_gap: gap,
        on_boundary: gap.abs() <= BOUNDARY_TOLERANCE,
        interior_value: i_i,
    })
}

/// Rectangular `(s, P)` grid for [`mi_map`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MapGrid {
    pub s_min: f64,
    pub s_max: f64,
    pub n_s: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub n_p: usize,
}

impl Default for MapGrid {
    fn default() -> Self {
        MapGrid {
            s_min: 0.0,
            s_max: 1.0,
            n_s: 101,
            p_min: 0.0,
            p_max: 1.0,
            n_p: 101,
        }
    }
}

/// One cell of the mutual-information surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MiSurfacePoint {
    pub s: f64,
    #[serde(rename = "P")]
    pub p: f64,
    /// Mutual information in nats; NaN on infeasible cells.
    #[serde(rename = "I")]
    pub mi: f64,
    pub feasible: bool,
}

fn linspace(a: f64, b: f64, n: usize, i: usize) -> f64 {
    if i + 1 == n {
        b
    } else {
        a + (b - a) * i as f64 / (n - 1) as f64
    }
}

/// Evaluates `I(W; C)` on a grid (P varies fastest). Cells are independent,
/// so the parallel result does not depend on scheduling.
pub fn mi_map(grid: &MapGrid) -> Result<Vec<MiSurfacePoint>> {
    if grid.n_s < 2 || grid.n_p < 2 {
        return Err(Error::Domain("MI map needs at least 2 points per axis".into()));
    }
    if grid.s_min < -1.0 || grid.s_max > 1.0 || grid.p_min < 0.0 || grid.p_max > 1.0 {
        return Err(Error::Domain("MI map must stay within |s| <= 1, 0 <= P <= 1".into()));
    }
    (0..grid.n_s * grid.n_p)
        .into_par_iter()
        .map(|k| {
            let s = linspace(grid.s_min, grid.s_max, grid.n_s, k / grid.n_p);
            let p = linspace(grid.p_min, grid.p_max, grid.n_p, k % grid.n_p);
            let feasible = 1.0 - p - s * s >= -FEASIBILITY_SLACK;
            let mi = if feasible { mutual_info_wc(s, p)? } else { f64::NAN };
            Ok(MiSurfacePoint { s, p, mi, feasible })
        })
        .collect()
}
