//! Beam fields, smearing functions and detector regions in the transverse
//! plane, and the quadrature that reduces them to the three detector scalars
//! `sigma`, `s` and `P`.
//!
//! Lengths are measured in units of the beam waist. For a wave detector with
//! smearing function `f` (normalized so that `∫ f = 1`) and a photon field
//! `φ` with `(φ, φ) = 1`:
//!
//! * `sigma² = (f, f) / 2` is the vacuum variance of the smeared amplitude,
//! * `s = (φ, f) / (f, f)^{1/2}` is the overlap of the photon with the detector,
//! * `P = ∫_D |φ|²` is the fraction of intensity falling on region `D`.
//!
//! Every statistic of the wave and counting variables depends on the
//! geometry only through these numbers.

use std::f64::consts::{PI, TAU};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::GaussRule;

pub type Point = [f64; 2];

/// Axis-aligned box `[x0, x1] × [y0, y1]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x0: f64,
    pub x1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl BBox {
    pub fn around(center: Point, half_x: f64, half_y: f64) -> BBox {
        BBox {
            x0: center[0] - half_x,
            x1: center[0] + half_x,
            y0: center[1] - half_y,
            y1: center[1] + half_y,
        }
    }

    pub fn intersect(&self, other: &BBox) -> Option<BBox> {
        let b = BBox {
            x0: self.x0.max(other.x0),
            x1: self.x1.min(other.x1),
            y0: self.y0.max(other.y0),
            y1: self.y1.min(other.y1),
        };
        (b.x1 > b.x0 && b.y1 > b.y0).then_some(b)
    }

    fn contains_box(&self, other: &BBox) -> bool {
        other.x0 >= self.x0 && other.x1 <= self.x1 && other.y0 >= self.y0 && other.y1 <= self.y1
    }

    fn corners(&self) -> [Point; 4] {
        [
            [self.x0, self.y0],
            [self.x1, self.y0],
            [self.x0, self.y1],
            [self.x1, self.y1],
        ]
    }
}

/// A uniform grid of cell-centred samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Grid {
    /// Centre of cell `(0, 0)`.
    pub origin: Point,
    pub spacing: f64,
    pub nx: usize,
    pub ny: usize,
}

impl Grid {
    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Centre of the cell with linear index `i` (row-major, x fastest).
    pub fn cell_center(&self, i: usize) -> Point {
        let ix = i % self.nx;
        let iy = i / self.nx;
        [
            self.origin[0] + ix as f64 * self.spacing,
            self.origin[1] + iy as f64 * self.spacing,
        ]
    }

    /// Linear index of the cell containing `(x, y)`, if any.
    pub fn locate(&self, x: f64, y: f64) -> Option<usize> {
        let fx = ((x - self.origin[0]) / self.spacing + 0.5).floor();
        let fy = ((y - self.origin[1]) / self.spacing + 0.5).floor();
        if fx < 0.0 || fy < 0.0 {
            return None;
        }
        let (ix, iy) = (fx as usize, fy as usize);
        (ix < self.nx && iy < self.ny).then_some(iy * self.nx + ix)
    }

    fn validate(&self, len: usize) -> Result<()> {
        if !(self.spacing > 0.0) || self.nx == 0 || self.ny == 0 {
            return Err(Error::Config("grid needs positive spacing and size".into()));
        }
        if len != self.len() {
            return Err(Error::Config(format!(
                "grid expects {} samples, got {len}",
                self.len()
            )));
        }
        Ok(())
    }
}

/// Anything that can be integrated against another field in the plane.
pub trait Field: Sync {
    fn value(&self, x: f64, y: f64) -> Complex64;

    /// Box outside which the field is negligible, if it is localized.
    fn focus(&self) -> Option<BBox> {
        None
    }

    /// Region the field is restricted to, if any.
    fn region(&self) -> Option<&DetectorRegion> {
        None
    }

    /// Grid on which the field is sampled, for grid-valued fields.
    fn grid(&self) -> Option<&Grid> {
        None
    }
}

/// Normalized transverse profile of the single photon.
#[derive(Debug, Clone, PartialEq)]
pub enum BeamField {
    /// Fundamental Gaussian beam at its waist, `φ = √(2/π)/w₀ · exp(-r²/w₀²)`.
    Gaussian { center: Point, waist: f64 },
    /// Complex samples on a grid, renormalized so that `(φ, φ) = 1`.
    Grid { grid: Grid, values: Vec<Complex64> },
}

impl BeamField {
    pub fn gaussian(center: Point, waist: f64) -> Result<BeamField> {
        if !(waist > 0.0) || !waist.is_finite() {
            return Err(Error::Domain(format!("beam waist must be positive, got {waist}")));
        }
        Ok(BeamField::Gaussian { center, waist })
    }

    pub fn from_grid(grid: Grid, values: Vec<Complex64>) -> Result<BeamField> {
        grid.validate(values.len())?;
        let norm: f64 = values.iter().map(|v| v.norm_sqr()).sum::<f64>() * grid.cell_area();
        if !(norm > 0.0) || !norm.is_finite() {
            return Err(Error::Domain("beam samples have zero or non-finite norm".into()));
        }
        let scale = norm.sqrt().recip();
        let values = values.into_iter().map(|v| v * scale).collect();
        Ok(BeamField::Grid { grid, values })
    }

    pub fn center(&self) -> Point {
        match self {
            BeamField::Gaussian { center, .. } => *center,
            BeamField::Grid { grid, .. } => [
                grid.origin[0] + 0.5 * (grid.nx as f64 - 1.0) * grid.spacing,
                grid.origin[1] + 0.5 * (grid.ny as f64 - 1.0) * grid.spacing,
            ],
        }
    }

    pub fn translated(&self, d: Point) -> BeamField {
        match self {
            BeamField::Gaussian { center, waist } => BeamField::Gaussian {
                center: [center[0] + d[0], center[1] + d[1]],
                waist: *waist,
            },
            BeamField::Grid { grid, values } => BeamField::Grid {
                grid: Grid {
                    origin: [grid.origin[0] + d[0], grid.origin[1] + d[1]],
                    ..grid.clone()
                },
                values: values.clone(),
            },
        }
    }
}

impl Field for BeamField {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        match self {
            BeamField::Gaussian { center, waist } => {
                let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                let amp = (2.0 / PI).sqrt() / waist * (-r2 / (waist * waist)).exp();
                Complex64::new(amp, 0.0)
            }
            BeamField::Grid { grid, values } => grid
                .locate(x, y)
                .map_or(Complex64::new(0.0, 0.0), |i| values[i]),
        }
    }

    fn grid(&self) -> Option<&Grid> {
        match self {
            BeamField::Grid { grid, .. } => Some(grid),
            BeamField::Gaussian { .. } => None,
        }
    }
}

// exp(-72) ≈ 5e-32: the Gaussian smearing is negligible beyond this many widths.
const GAUSSIAN_FOCUS_WIDTHS: f64 = 8.5;

/// Real detector response `f` with `∫ f = 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum SmearingFunction {
    /// `f = exp(-|x - c|²/a²) / (π a²)`.
    Gaussian { center: Point, width: f64 },
    Grid { grid: Grid, values: Vec<f64> },
}

impl SmearingFunction {
    pub fn gaussian(center: Point, width: f64) -> Result<SmearingFunction> {
        if !(width > 0.0) || !width.is_finite() {
            return Err(Error::Domain(format!(
                "smearing width must be positive (a = 0 makes sigma diverge), got {width}"
            )));
        }
        Ok(SmearingFunction::Gaussian { center, width })
    }

    pub fn from_grid(grid: Grid, values: Vec<f64>) -> Result<SmearingFunction> {
        grid.validate(values.len())?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("smearing samples must be finite".into()));
        }
        let total: f64 = values.iter().sum::<f64>() * grid.cell_area();
        if !(total > 0.0) {
            return Err(Error::Domain("smearing samples must have positive integral".into()));
        }
        let values = values.into_iter().map(|v| v / total).collect();
        Ok(SmearingFunction::Grid { grid, values })
    }

    pub fn translated(&self, d: Point) -> SmearingFunction {
        match self {
            SmearingFunction::Gaussian { center, width } => SmearingFunction::Gaussian {
                center: [center[0] + d[0], center[1] + d[1]],
                width: *width,
            },
            SmearingFunction::Grid { grid, values } => SmearingFunction::Grid {
                grid: Grid {
                    origin: [grid.origin[0] + d[0], grid.origin[1] + d[1]],
                    ..grid.clone()
                },
                values: values.clone(),
            },
        }
    }

    pub fn real_value(&self, x: f64, y: f64) -> f64 {
        match self {
            SmearingFunction::Gaussian { center, width } => {
                let r2 = (x - center[0]).powi(2) + (y - center[1]).powi(2);
                (-r2 / (width * width)).exp() / (PI * width * width)
            }
            SmearingFunction::Grid { grid, values } => grid.locate(x, y).map_or(0.0, |i| values[i]),
        }
    }
}

impl Field for SmearingFunction {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        Complex64::new(self.real_value(x, y), 0.0)
    }

    fn focus(&self) -> Option<BBox> {
        match self {
            SmearingFunction::Gaussian { center, width } => Some(BBox::around(
                *center,
                GAUSSIAN_FOCUS_WIDTHS * width,
                GAUSSIAN_FOCUS_WIDTHS * width,
            )),
            SmearingFunction::Grid { .. } => None,
        }
    }

    fn grid(&self) -> Option<&Grid> {
        match self {
            SmearingFunction::Grid { grid, .. } => Some(grid),
            SmearingFunction::Gaussian { .. } => None,
        }
    }
}

/// Active surface of a detector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case", deny_unknown_fields)]
pub enum RegionShape {
    Disc { center: Point, radius: f64 },
    Rect { center: Point, half_widths: [f64; 2] },
}

impl RegionShape {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        match self {
            RegionShape::Disc { center, radius } => {
                (x - center[0]).powi(2) + (y - center[1]).powi(2) <= radius * radius
            }
            RegionShape::Rect { center, half_widths } => {
                (x - center[0]).abs() <= half_widths[0] && (y - center[1]).abs() <= half_widths[1]
            }
        }
    }

    pub fn area(&self) -> f64 {
        match self {
            RegionShape::Disc { radius, .. } => PI * radius * radius,
            RegionShape::Rect { half_widths, .. } => 4.0 * half_widths[0] * half_widths[1],
        }
    }

    pub fn bbox(&self) -> BBox {
        match self {
            RegionShape::Disc { center, radius } => BBox::around(*center, *radius, *radius),
            RegionShape::Rect { center, half_widths } => {
                BBox::around(*center, half_widths[0], half_widths[1])
            }
        }
    }

    pub fn translated(&self, d: Point) -> RegionShape {
        match self {
            RegionShape::Disc { center, radius } => RegionShape::Disc {
                center: [center[0] + d[0], center[1] + d[1]],
                radius: *radius,
            },
            RegionShape::Rect { center, half_widths } => RegionShape::Rect {
                center: [center[0] + d[0], center[1] + d[1]],
                half_widths: *half_widths,
            },
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = match self {
            RegionShape::Disc { radius, .. } => *radius >= 0.0 && radius.is_finite(),
            RegionShape::Rect { half_widths, .. } => half_widths.iter().all(|h| *h >= 0.0 && h.is_finite()),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Domain(format!("region has negative or non-finite size: {self:?}")))
        }
    }
}

/// A detector region with its index `n`.
#[derive(Debug, Clone, PartialEq)]
pub struct DetectorRegion {
    pub id: usize,
    pub shape: RegionShape,
}

impl DetectorRegion {
    pub fn new(id: usize, shape: RegionShape) -> Result<DetectorRegion> {
        shape.validate()?;
        Ok(DetectorRegion { id, shape })
    }

    pub fn disc(id: usize, center: Point, radius: f64) -> Result<DetectorRegion> {
        DetectorRegion::new(id, RegionShape::Disc { center, radius })
    }

    pub fn rect(id: usize, center: Point, half_widths: [f64; 2]) -> Result<DetectorRegion> {
        DetectorRegion::new(id, RegionShape::Rect { center, half_widths })
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        self.shape.contains(x, y)
    }

    /// Conservative disjointness test (touching boundaries count as disjoint).
    pub fn is_disjoint(&self, other: &DetectorRegion) -> bool {
        match (&self.shape, &other.shape) {
            (RegionShape::Disc { center: c1, radius: r1 }, RegionShape::Disc { center: c2, radius: r2 }) => {
                (c1[0] - c2[0]).hypot(c1[1] - c2[1]) >= r1 + r2
            }
            (RegionShape::Rect { center: c1, half_widths: h1 }, RegionShape::Rect { center: c2, half_widths: h2 }) => {
                (c1[0] - c2[0]).abs() >= h1[0] + h2[0] || (c1[1] - c2[1]).abs() >= h1[1] + h2[1]
            }
            (RegionShape::Disc { center, radius }, RegionShape::Rect { center: rc, half_widths })
            | (RegionShape::Rect { center: rc, half_widths }, RegionShape::Disc { center, radius }) => {
                let dx = ((center[0] - rc[0]).abs() - half_widths[0]).max(0.0);
                let dy = ((center[1] - rc[1]).abs() - half_widths[1]).max(0.0);
                dx.hypot(dy) >= *radius
            }
        }
    }
}

/// A smearing function restricted to its detector region and rescaled to
/// integrate to exactly one there.
#[derive(Debug, Clone)]
pub struct MaskedSmearing<'a> {
    pub smearing: &'a SmearingFunction,
    pub region: &'a DetectorRegion,
    scale: f64,
}

impl Field for MaskedSmearing<'_> {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        if self.region.contains(x, y) {
            Complex64::new(self.scale * self.smearing.real_value(x, y), 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    fn focus(&self) -> Option<BBox> {
        self.smearing.focus()
    }

    fn region(&self) -> Option<&DetectorRegion> {
        Some(self.region)
    }

    fn grid(&self) -> Option<&Grid> {
        self.smearing.grid()
    }
}

struct Indicator<'a>(&'a DetectorRegion);

impl Field for Indicator<'_> {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        Complex64::new(if self.0.contains(x, y) { 1.0 } else { 0.0 }, 0.0)
    }

    fn region(&self) -> Option<&DetectorRegion> {
        Some(self.0)
    }
}

/// Tensor-product Gauss–Legendre quadrature on a square of half-extent `R`
/// (centred on `center`), with region-aware panels.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    pub half_extent: f64,
    pub points: usize,
    pub center: Point,
    /// Relative tolerance between the estimate and its doubled-resolution
    /// refinement.
    pub tolerance: f64,
}

impl Default for Quadrature {
    fn default() -> Self {
        Quadrature {
            half_extent: 6.0,
            points: 96,
            center: [0.0, 0.0],
            tolerance: 1e-8,
        }
    }
}

impl Quadrature {
    pub fn new(half_extent: f64, points: usize) -> Result<Quadrature> {
        if !(half_extent > 0.0) || points < 2 {
            return Err(Error::Domain(format!(
                "quadrature needs positive extent and >= 2 points, got R={half_extent}, n={points}"
            )));
        }
        Ok(Quadrature {
            half_extent,
            points,
            ..Quadrature::default()
        })
    }

    pub fn centered_at(&self, center: Point) -> Quadrature {
        Quadrature {
            center,
            ..self.clone()
        }
    }

    fn refined(&self) -> Quadrature {
        Quadrature {
            points: self.points * 2,
            ..self.clone()
        }
    }

    fn domain(&self) -> BBox {
        BBox::around(self.center, self.half_extent, self.half_extent)
    }

    /// Integral of `(φ, φ)`-style products over the whole domain; used to
    /// check that the rule has converged for a given beam.
    pub fn check_converged(&self, beam: &BeamField) -> Result<f64> {
        let a = self.raw_inner(beam, beam)?.re;
        let b = self.refined().raw_inner(beam, beam)?.re;
        if (a - b).abs() >= self.tolerance.max(1e-15) {
            return Err(Error::QuadratureNotConverged {
                estimate: a,
                refined: b,
                tolerance: self.tolerance,
            });
        }
        Ok(b)
    }

    fn raw_inner(&self, f: &dyn Field, g: &dyn Field) -> Result<Complex64> {
        let integrand = |x: f64, y: f64| f.value(x, y).conj() * g.value(x, y);
        if let Some(grid) = shared_grid(f, g)? {
            return Ok(grid_sum(grid, integrand));
        }
        let focus = match (f.focus(), g.focus()) {
            (Some(a), Some(b)) => match a.intersect(&b) {
                Some(bb) => Some(bb),
                None => return Ok(Complex64::new(0.0, 0.0)),
            },
            (a, b) => a.or(b),
        };
        let region = match (f.region(), g.region()) {
            (Some(a), Some(b)) if a.shape != b.shape => {
                if a.is_disjoint(b) {
                    return Ok(Complex64::new(0.0, 0.0));
                }
                // Overlapping distinct regions: integrate over the first,
                // the second's mask stays in the integrand.
                Some(a)
            }
            (a, b) => a.or(b),
        };
        Ok(self.integrate(region.map(|r| &r.shape), focus, integrand))
    }

    /// Integrates `h` over `region ∩ focus` (or the quadrature square when
    /// neither is given).
    fn integrate<H>(&self, region: Option<&RegionShape>, focus: Option<BBox>, h: H) -> Complex64
    where
        H: Fn(f64, f64) -> Complex64,
    {
        let zero = Complex64::new(0.0, 0.0);
        let rule = GaussRule::legendre(self.points);
        match region {
            None => {
                let bbox = focus.unwrap_or_else(|| self.domain());
                integrate_box(&rule, &bbox, &h)
            }
            Some(RegionShape::Rect { center, half_widths }) => {
                let rect = BBox::around(*center, half_widths[0], half_widths[1]);
                let clipped = match focus {
                    Some(f) => rect.intersect(&f),
                    None => rect.intersect(&rect),
                };
                clipped.map_or(zero, |b| integrate_box(&rule, &b, &h))
            }
            Some(disc @ RegionShape::Disc { center, radius }) => {
                if *radius <= 0.0 {
                    return zero;
                }
                if let Some(f) = focus {
                    if f.corners().iter().all(|p| disc.contains(p[0], p[1])) {
                        return integrate_box(&rule, &f, &h);
                    }
                    if !disc.bbox().contains_box(&f) && disc.bbox().intersect(&f).is_none() {
                        return zero;
                    }
                }
                let (r_lo, r_hi) = match focus {
                    Some(f) => radial_range(*center, &f, *radius),
                    None => (0.0, *radius),
                };
                if r_hi <= r_lo {
                    return zero;
                }
                integrate_polar(&rule, *center, r_lo, r_hi, 2 * self.points, &h)
            }
        }
    }

    /// `∫ |φ|²` over the region.
    fn region_intensity(&self, beam: &BeamField, region: &DetectorRegion) -> Result<f64> {
        Ok(self.raw_inner(beam, &WeightedByIndicator { beam, region })?.re)
    }
}

// φ·1_D so that (φ, φ·1_D) = ∫_D |φ|²; grid beams keep their grid.
struct WeightedByIndicator<'a> {
    beam: &'a BeamField,
    region: &'a DetectorRegion,
}

impl Field for WeightedByIndicator<'_> {
    fn value(&self, x: f64, y: f64) -> Complex64 {
        if self.region.contains(x, y) {
            self.beam.value(x, y)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }

    fn region(&self) -> Option<&DetectorRegion> {
        Some(self.region)
    }

    fn grid(&self) -> Option<&Grid> {
        self.beam.grid()
    }
}

fn shared_grid<'a>(f: &'a dyn Field, g: &'a dyn Field) -> Result<Option<&'a Grid>> {
    match (f.grid(), g.grid()) {
        (Some(a), Some(b)) if a != b => Err(Error::Config(
            "inner product of fields sampled on different grids".into(),
        )),
        (a, b) => Ok(a.or(b)),
    }
}

fn grid_sum<H: Fn(f64, f64) -> Complex64>(grid: &Grid, h: H) -> Complex64 {
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..grid.len() {
        let [x, y] = grid.cell_center(i);
        acc += h(x, y);
    }
    acc * grid.cell_area()
}

fn integrate_box<H: Fn(f64, f64) -> Complex64>(rule: &GaussRule, b: &BBox, h: &H) -> Complex64 {
    rule.integrate(b.y0, b.y1, |y| rule.integrate(b.x0, b.x1, |x| h(x, y)))
}

fn integrate_polar<H: Fn(f64, f64) -> Complex64>(
    rule: &GaussRule,
    center: Point,
    r_lo: f64,
    r_hi: f64,
    n_theta: usize,
    h: &H,
) -> Complex64 {
    // Trapezoid in the angle is spectrally accurate for periodic integrands.
    let dtheta = TAU / n_theta as f64;
    rule.integrate(r_lo, r_hi, |r| {
        let mut acc = Complex64::new(0.0, 0.0);
        for k in 0..n_theta {
            let t = k as f64 * dtheta;
            acc += h(center[0] + r * t.cos(), center[1] + r * t.sin());
        }
        acc * (r * dtheta)
    })
}

fn radial_range(center: Point, f: &BBox, radius: f64) -> (f64, f64) {
    let dx = (f.x0 - center[0]).max(center[0] - f.x1).max(0.0);
    let dy = (f.y0 - center[1]).max(center[1] - f.y1).max(0.0);
    let nearest = dx.hypot(dy);
    let farthest = f
        .corners()
        .iter()
        .map(|p| (p[0] - center[0]).hypot(p[1] - center[1]))
        .fold(0.0, f64::max);
    (nearest.min(radius), farthest.min(radius))
}

/// `(f, g) = ∫ f* g d²x`, checked against a refinement at twice the
/// resolution.
pub fn inner_product(f: &dyn Field, g: &dyn Field, q: &Quadrature) -> Result<Complex64> {
    let estimate = q.raw_inner(f, g)?;
    let refined = q.refined().raw_inner(f, g)?;
    let scale = refined.norm().max(1.0);
    if (estimate - refined).norm() > q.tolerance * scale {
        return Err(Error::QuadratureNotConverged {
            estimate: estimate.norm(),
            refined: refined.norm(),
            tolerance: q.tolerance,
        });
    }
    Ok(refined)
}

/// The three scalars governing every statistic of one detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorParams {
    /// Vacuum standard deviation of the smeared amplitude.
    pub sigma: f64,
    /// Overlap of the photon profile with the (normalized) smearing function.
    pub s: Complex64,
    /// Fraction of the beam intensity on the detector.
    #[serde(rename = "P")]
    pub p: f64,
}

const S_SLACK: f64 = 1e-9;

impl DetectorParams {
    /// Direct-mode construction; checks `sigma > 0`, `|s| ≤ 1` and `0 ≤ P ≤ 1`.
    pub fn new(sigma: f64, s: Complex64, p: f64) -> Result<DetectorParams> {
        if !(sigma > 0.0) || !sigma.is_finite() {
            return Err(Error::Domain(format!("sigma must be positive and finite, got {sigma}")));
        }
        if !(s.norm() <= 1.0 + S_SLACK) {
            return Err(Error::Domain(format!("|s| must not exceed 1, got {}", s.norm())));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Domain(format!("P must lie in [0, 1], got {p}")));
        }
        Ok(DetectorParams { sigma, s, p })
    }

    pub fn real(sigma: f64, s: f64, p: f64) -> Result<DetectorParams> {
        DetectorParams::new(sigma, Complex64::new(s, 0.0), p)
    }

    pub fn s_abs2(&self) -> f64 {
        self.s.norm_sqr()
    }
}

// Fraction of the smearing integral that must fall inside its region.
const SUPPORT_MASS: f64 = 1.0 - 1e-6;

/// Restricts `f` to `region`, checking the support condition and
/// rescaling so the restricted function integrates to one.
pub fn mask_smearing<'a>(
    f: &'a SmearingFunction,
    region: &'a DetectorRegion,
    q: &Quadrature,
) -> Result<MaskedSmearing<'a>> {
    let inside = inner_product(&Indicator(region), f, q)?.re;
    if !(inside >= SUPPORT_MASS) {
        return Err(Error::SupportViolation {
            region: region.id,
            mass_inside: inside,
        });
    }
    Ok(MaskedSmearing {
        smearing: f,
        region,
        scale: 1.0 / inside,
    })
}

/// Fraction of the beam intensity falling on `region`.
pub fn count_probability(phi: &BeamField, region: &DetectorRegion, q: &Quadrature) -> Result<f64> {
    let q = q.centered_at(phi.center());
    if region.shape.area() == 0.0 {
        return Ok(0.0);
    }
    let a = q.region_intensity(phi, region)?;
    let b = q.refined().region_intensity(phi, region)?;
    if (a - b).abs() > q.tolerance {
        return Err(Error::QuadratureNotConverged {
            estimate: a,
            refined: b,
            tolerance: q.tolerance,
        });
    }
    Ok(b.clamp(0.0, 1.0))
}

/// Derives `(sigma, s, P)` for a detector with smearing `f` restricted to
/// `region`.
pub fn detector_params(
    phi: &BeamField,
    f: &SmearingFunction,
    region: &DetectorRegion,
    q: &Quadrature,
) -> Result<DetectorParams> {
    let q = q.centered_at(phi.center());
    if region.shape.area() == 0.0 {
        let ff = inner_product(f, f, &q)?.re;
        return DetectorParams::new((ff / 2.0).sqrt(), Complex64::new(0.0, 0.0), 0.0);
    }
    let masked = mask_smearing(f, region, &q)?;
    let ff = inner_product(&masked, &masked, &q)?.re;
    let phi_f = inner_product(phi, &masked, &q)?;
    let p = count_probability(phi, region, &q)?;
    let sigma = (ff / 2.0).sqrt();
    let s = phi_f / ff.sqrt();
    if !(sigma.is_finite() && s.re.is_finite() && s.im.is_finite()) {
        return Err(Error::Domain("non-finite detector parameters".into()));
    }
    if s.norm() > 1.0 + S_SLACK {
        return Err(Error::Domain(format!(
            "|s| = {} exceeds 1; beam or smearing normalization is broken",
            s.norm()
        )));
    }
    DetectorParams::new(sigma, s, p)
}

/// Which pair of observables an experiment measures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentMode {
    /// Every detector measures the wave amplitude.
    #[serde(rename = "ww")]
    WaveWave,
    /// Every detector counts photons.
    #[serde(rename = "cc")]
    CountCount,
    /// Detector 1 measures the amplitude, detector 2 counts.
    #[serde(rename = "wc")]
    WaveCount,
}

/// A violated feasibility constraint and the offending quantity.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: &'static str,
    pub value: f64,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} violated (value {:.6})", self.constraint, self.value)
    }
}

/// Outcome of [`validate_experiment`].
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct ConstraintReport {
    pub violations: Vec<Violation>,
}

impl ConstraintReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::Infeasible(self.violations.iter().map(|v| v.to_string()).collect()))
        }
    }
}

/// Slack allowed on the closed feasibility constraints.
pub const FEASIBILITY_SLACK: f64 = 1e-12;

/// Checks the joint feasibility constraints of an experiment.
///
/// For [`ExperimentMode::WaveCount`] the first entry is the wave detector and
/// the second the counting detector.
pub fn validate_experiment(params: &[DetectorParams], mode: ExperimentMode) -> Result<ConstraintReport> {
    if params.is_empty() {
        return Err(Error::Domain("experiment needs at least one detector".into()));
    }
    let mut report = ConstraintReport::default();
    match mode {
        ExperimentMode::WaveWave => {
            let total: f64 = params.iter().map(|p| p.s_abs2()).sum();
            if total > 1.0 + FEASIBILITY_SLACK {
                report.violations.push(Violation {
                    constraint: "sum |s_n|^2 <= 1",
                    value: total,
                });
            }
        }
        ExperimentMode::CountCount => {
            let total: f64 = params.iter().map(|p| p.p).sum();
            if total > 1.0 + FEASIBILITY_SLACK {
                report.violations.push(Violation {
                    constraint: "sum P_n <= 1",
                    value: total,
                });
            }
        }
        ExperimentMode::WaveCount => {
            if params.len() != 2 {
                return Err(Error::Domain(format!(
                    "wave-count experiment needs exactly two detectors, got {}",
                    params.len()
                )));
            }
            let slack = 1.0 - params[1].p - params[0].s_abs2();
            if slack < -FEASIBILITY_SLACK {
                report.violations.push(Violation {
                    constraint: "1 - P - |s|^2 >= 0",
                    value: slack,
                });
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn beam() -> BeamField {
        BeamField::gaussian([0.0, 0.0], 1.0).unwrap()
    }

    #[test]
    fn gaussian_beam_is_normalized() {
        let q = Quadrature::default();
        let n = inner_product(&beam(), &beam(), &q).unwrap();
        assert!((n.re - 1.0).abs() < 1e-8 && n.im.abs() < 1e-14);
        assert!((q.check_converged(&beam()).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn gaussian_smearing_self_overlap() {
        let q = Quadrature::default();
        for a in [0.5, 1.0, 2.0] {
            let f = SmearingFunction::gaussian([0.3, -0.2], a).unwrap();
            let ff = inner_product(&f, &f, &q).unwrap().re;
            assert!((ff - 1.0 / (2.0 * PI * a * a)).abs() < 1e-10 * ff, "a={a}");
        }
    }

    #[test]
    fn disjoint_supports_give_zero_overlap() {
        let q = Quadrature::default();
        let f = SmearingFunction::gaussian([40.0, 40.0], 0.5).unwrap();
        let v = inner_product(&f, &beam(), &q).unwrap();
        assert!(v.norm() < 1e-10);
    }

    #[test]
    fn zero_width_smearing_rejected() {
        assert!(matches!(
            SmearingFunction::gaussian([0.0, 0.0], 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn full_region_captures_all_intensity() {
        let q = Quadrature::default();
        let region = DetectorRegion::disc(1, [0.0, 0.0], 5.5).unwrap();
        let f = SmearingFunction::gaussian([0.0, 0.0], 0.5).unwrap();
        let p = detector_params(&beam(), &f, &region, &q).unwrap();
        assert!((p.p - 1.0).abs() < 1e-6);
        let rect = DetectorRegion::rect(1, [0.0, 0.0], [5.5, 5.5]).unwrap();
        assert!((count_probability(&beam(), &rect, &q).unwrap() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn half_plane_gets_half_the_intensity() {
        let q = Quadrature::default();
        let right = DetectorRegion::rect(1, [3.0, 0.0], [3.0, 6.0]).unwrap();
        let p = count_probability(&beam(), &right, &q).unwrap();
        assert!((p - 0.5).abs() < 1e-9);
    }

    #[test]
    fn support_violation_is_reported() {
        let q = Quadrature::default();
        let region = DetectorRegion::disc(3, [0.0, 0.0], 0.5).unwrap();
        let f = SmearingFunction::gaussian([0.0, 0.0], 0.5).unwrap();
        match detector_params(&beam(), &f, &region, &q) {
            Err(Error::SupportViolation { region, mass_inside }) => {
                assert_eq!(region, 3);
                // 1 - exp(-1)
                assert!((mass_inside - (1.0 - (-1.0f64).exp())).abs() < 1e-8);
            }
            other => panic!("expected support violation, got {other:?}"),
        }
    }

    #[test]
    fn zero_area_region_gives_zero_overlap_and_probability() {
        let q = Quadrature::default();
        let region = DetectorRegion::disc(1, [0.0, 0.0], 0.0).unwrap();
        let f = SmearingFunction::gaussian([0.0, 0.0], 0.5).unwrap();
        let p = detector_params(&beam(), &f, &region, &q).unwrap();
        assert_eq!(p.p, 0.0);
        assert_eq!(p.s.norm(), 0.0);
    }

    #[test]
    fn point_detector_overlap_scales_with_area() {
        // For a -> 0 the overlap is |s|² = 2π a² |φ(x₁)|² (1 + O(a²)).
        let q = Quadrature::default();
        let a = 0.01;
        let region = DetectorRegion::disc(1, [0.0, 0.0], 0.5).unwrap();
        let f = SmearingFunction::gaussian([0.0, 0.0], a).unwrap();
        let p = detector_params(&beam(), &f, &region, &q).unwrap();
        let phi0 = beam().value(0.0, 0.0).norm_sqr();
        let law = 2.0 * PI * a * a * phi0;
        assert!((p.s_abs2() / law - 1.0).abs() < 0.05);
        // closed form for the unit-waist Gaussian beam: 4a²/(1+a²)²
        let exact = 4.0 * a * a / (1.0 + a * a).powi(2);
        assert!((p.s_abs2() - exact).abs() < 1e-9 * exact);
    }

    #[test]
    fn validate_experiment_examples() {
        let wave = DetectorParams::real(1.0, 0.5, 0.0).unwrap();
        let count = DetectorParams::real(1.0, 0.0, 0.5).unwrap();
        assert!(validate_experiment(&[wave, count], ExperimentMode::WaveCount).unwrap().is_ok());

        let wave = DetectorParams::real(1.0, 0.8, 0.0).unwrap();
        let r = validate_experiment(&[wave, count], ExperimentMode::WaveCount).unwrap();
        assert_eq!(r.violations.len(), 1);
        assert!((r.violations[0].value - (1.0 - 0.5 - 0.64)).abs() < 1e-12);

        let c = DetectorParams::real(1.0, 0.0, 0.6).unwrap();
        let r = validate_experiment(&[c, c], ExperimentMode::CountCount).unwrap();
        assert!(!r.is_ok());
        assert!(matches!(r.into_result(), Err(Error::Infeasible(_))));

        let w = DetectorParams::real(1.0, 0.75, 0.0).unwrap();
        assert!(!validate_experiment(&[w, w], ExperimentMode::WaveWave).unwrap().is_ok());
        assert!(validate_experiment(&[], ExperimentMode::WaveWave).is_err());
    }

    #[test]
    fn direct_params_reject_out_of_range() {
        assert!(DetectorParams::real(0.0, 0.1, 0.1).is_err());
        assert!(DetectorParams::real(1.0, 1.1, 0.1).is_err());
        assert!(DetectorParams::real(1.0, 0.1, 1.1).is_err());
    }

    #[test]
    fn grid_fields_use_cell_sums() {
        let grid = Grid {
            origin: [-1.5, -1.5],
            spacing: 1.0,
            nx: 4,
            ny: 4,
        };
        let vals: Vec<Complex64> = (0..16).map(|i| Complex64::new(i as f64, 1.0)).collect();
        let b = BeamField::from_grid(grid.clone(), vals).unwrap();
        let q = Quadrature::default();
        assert!((inner_product(&b, &b, &q).unwrap().re - 1.0).abs() < 1e-14);
        let other = Grid { spacing: 0.5, ..grid };
        let f = SmearingFunction::from_grid(other, vec![1.0; 16]).unwrap();
        assert!(matches!(inner_product(&b, &f, &q), Err(Error::Config(_))));
    }

    #[test]
    fn region_disjointness() {
        let a = DetectorRegion::disc(1, [-1.0, 0.0], 0.5).unwrap();
        let b = DetectorRegion::disc(2, [1.0, 0.0], 0.5).unwrap();
        let c = DetectorRegion::rect(3, [0.0, 0.0], [0.6, 0.1]).unwrap();
        assert!(a.is_disjoint(&b));
        assert!(!a.is_disjoint(&c));
        assert!(!c.is_disjoint(&b));
    }
}
