//! Brute-force lattice oracle.
//!
//! The transverse plane is replaced by a `G × G` lattice of sites, each
//! carrying one bosonic mode `a_x`. On the Fock space truncated at `N_max`
//! photons the smeared amplitude, counting and number operators become
//! sparse matrices, and the operator algebra and the single-photon statistics
//! can be checked as finite-dimensional identities:
//!
//! * `W_n = Σ_x f_n(x) √ΔA (a_x + a_x†) / √2`,
//! * `C_n = Σ_{x ∈ D_n} a_x† a_x`,
//! * `|1[φ]⟩ = Σ_x φ_x √ΔA a_x† |0⟩`, with `φ` renormalized on the lattice.
//!
//! Truncation only affects states on the `N_max` shell, so commutators are
//! compared on the block with fewer than `N_max` photons and moments are only
//! taken at orders whose operator paths stay below the shell.

use std::collections::{BTreeMap, HashMap};
use std::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, SymmetricEigen};
use nalgebra_sparse::{CooMatrix, CsrMatrix};
use num_complex::Complex64;
use serde::Serialize;

use crate::dists::{JointCountPmf, JointWavePdf, State, WavePdf};
use crate::error::{Error, Result};
use crate::model::{BeamField, DetectorParams, DetectorRegion, Field, Point, SmearingFunction};
use crate::numeric::{gaussian_expectation, GaussRule};

pub const DEFAULT_DIMENSION_CAP: usize = 20_000;

/// Square lattice of `G × G` sites covering `[c - extent, c + extent]²`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LatticeModel {
    pub g: usize,
    pub extent: f64,
    pub center: Point,
    pub spacing: f64,
}

impl LatticeModel {
    pub fn new(g: usize, extent: f64, center: Point) -> Result<LatticeModel> {
        if g == 0 || !(extent > 0.0) {
            return Err(Error::Domain(format!(
                "lattice needs G >= 1 and positive extent, got G = {g}, extent = {extent}"
            )));
        }
        Ok(LatticeModel {
            g,
            extent,
            center,
            spacing: 2.0 * extent / g as f64,
        })
    }

    pub fn sites(&self) -> usize {
        self.g * self.g
    }

    pub fn cell_area(&self) -> f64 {
        self.spacing * self.spacing
    }

    /// Centre of site `i` (row-major, x fastest).
    pub fn site(&self, i: usize) -> Point {
        let (ix, iy) = (i % self.g, i / self.g);
        [
            self.center[0] - self.extent + (ix as f64 + 0.5) * self.spacing,
            self.center[1] - self.extent + (iy as f64 + 0.5) * self.spacing,
        ]
    }
}

/// `Σ_{n ≤ N_max} C(L + n - 1, n)`, or `None` on overflow.
pub fn fock_dimension(sites: usize, n_max: usize) -> Option<usize> {
    let mut total: usize = 0;
    let mut term: u128 = 1;
    for n in 0..=n_max {
        if n > 0 {
            term = term * (sites + n - 1) as u128 / n as u128;
        }
        total = total.checked_add(usize::try_from(term).ok()?)?;
    }
    Some(total)
}

/// Occupation-number basis with total photon number at most `n_max`.
#[derive(Debug, Clone)]
pub struct FockSpace {
    pub sites: usize,
    pub n_max: usize,
    pub basis: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
}

impl FockSpace {
    pub fn new(sites: usize, n_max: usize, cap: usize) -> Result<FockSpace> {
        let dimension = fock_dimension(sites, n_max).unwrap_or(usize::MAX);
        if dimension > cap || n_max > u8::MAX as usize {
            return Err(Error::DimensionCap { dimension, cap });
        }
        let mut basis = Vec::with_capacity(dimension);
        for total in 0..=n_max {
            let mut occ = vec![0u8; sites];
            compositions(&mut occ, 0, total, &mut basis);
        }
        let index = basis.iter().enumerate().map(|(i, b)| (b.clone(), i)).collect();
        Ok(FockSpace {
            sites,
            n_max,
            basis,
            index,
        })
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn index_of(&self, occupation: &[u8]) -> Option<usize> {
        self.index.get(occupation).copied()
    }

    pub fn photons(&self, i: usize) -> usize {
        self.basis[i].iter().map(|&n| n as usize).sum()
    }

    /// Mask of basis states strictly below the truncation shell.
    pub fn below_shell(&self) -> Vec<bool> {
        (0..self.dimension()).map(|i| self.photons(i) < self.n_max).collect()
    }

    /// `Σ_x c_x a_x` (lowering) or `Σ_x c_x a_x†` (raising).
    pub fn ladder(&self, coeffs: &[f64], raising: bool) -> CsrMatrix<f64> {
        let dim = self.dimension();
        let mut coo = CooMatrix::new(dim, dim);
        let mut occ = Vec::new();
        for (i, state) in self.basis.iter().enumerate() {
            let total: usize = state.iter().map(|&n| n as usize).sum();
            for (x, &c) in coeffs.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                occ.clone_from(state);
                let amp = if raising {
                    if total >= self.n_max {
                        continue;
                    }
                    occ[x] += 1;
                    (occ[x] as f64).sqrt()
                } else {
                    if occ[x] == 0 {
                        continue;
                    }
                    let a = (occ[x] as f64).sqrt();
                    occ[x] -= 1;
                    a
                };
                coo.push(self.index[&occ], i, c * amp);
            }
        }
        CsrMatrix::from(&coo)
    }

    /// Diagonal operator `Σ_x c_x a_x† a_x`.
    pub fn number(&self, coeffs: &[f64]) -> CsrMatrix<f64> {
        let dim = self.dimension();
        let mut coo = CooMatrix::new(dim, dim);
        for (i, state) in self.basis.iter().enumerate() {
            let v: f64 = state.iter().zip(coeffs).map(|(&n, c)| n as f64 * c).sum();
            if v != 0.0 {
                coo.push(i, i, v);
            }
        }
        CsrMatrix::from(&coo)
    }
}

fn compositions(occ: &mut Vec<u8>, site: usize, left: usize, out: &mut Vec<Vec<u8>>) {
    if site + 1 == occ.len() {
        occ[site] = left as u8;
        out.push(occ.clone());
        occ[site] = 0;
        return;
    }
    for k in (0..=left).rev() {
        occ[site] = k as u8;
        compositions(occ, site + 1, left - k, out);
    }
    occ[site] = 0;
}

/// Matrices of the smeared amplitudes, counting operators and total number.
#[derive(Debug, Clone)]
pub struct OperatorSet {
    pub w: Vec<CsrMatrix<f64>>,
    pub c: Vec<CsrMatrix<f64>>,
    pub n_op: CsrMatrix<f64>,
    /// `f_n(x) √ΔA` on the sites of region `n`.
    pub smearing_coeffs: Vec<Vec<f64>>,
    /// Region membership indicators per site.
    pub indicators: Vec<Vec<f64>>,
}

/// Detector geometry for the lattice.
#[derive(Debug, Clone)]
pub struct LatticeDetector {
    pub smearing: SmearingFunction,
    pub region: DetectorRegion,
}

/// A fully materialized lattice oracle.
#[derive(Debug, Clone)]
pub struct LatticeOracle {
    pub lattice: LatticeModel,
    pub fock: FockSpace,
    pub ops: OperatorSet,
    /// `φ_x √ΔA`, a unit vector.
    pub psi: Vec<Complex64>,
    pub vacuum: Vec<Complex64>,
    pub single: Vec<Complex64>,
}

/// Builds the lattice, Fock space, operators and the two reference states.
pub fn build_lattice_model(
    lattice: LatticeModel,
    phi: &BeamField,
    detectors: &[LatticeDetector],
    n_max: usize,
    cap: usize,
) -> Result<LatticeOracle> {
    let sites = lattice.sites();
    let root_da = lattice.spacing;
    let mut owner: Vec<Option<usize>> = vec![None; sites];
    let mut indicators = Vec::with_capacity(detectors.len());
    let mut smearing_coeffs = Vec::with_capacity(detectors.len());
    for (n, d) in detectors.iter().enumerate() {
        let mut ind = vec![0.0; sites];
        let mut coeffs = vec![0.0; sites];
        for x in 0..sites {
            let [px, py] = lattice.site(x);
            if d.region.contains(px, py) {
                if let Some(m) = owner[x] {
                    return Err(Error::Domain(format!(
                        "detector regions {m} and {n} share lattice site {x}"
                    )));
                }
                owner[x] = Some(n);
                ind[x] = 1.0;
                coeffs[x] = d.smearing.real_value(px, py) * root_da;
            }
        }
        indicators.push(ind);
        smearing_coeffs.push(coeffs);
    }

    let mut psi: Vec<Complex64> = (0..sites)
        .map(|x| {
            let [px, py] = lattice.site(x);
            phi.value(px, py) * root_da
        })
        .collect();
    let norm = psi.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if !(norm > 0.0) {
        return Err(Error::Domain("beam vanishes on every lattice site".into()));
    }
    psi.iter_mut().for_each(|v| *v /= norm);

    let fock = FockSpace::new(sites, n_max, cap)?;
    let dim = fock.dimension();
    let w = smearing_coeffs
        .iter()
        .map(|coeffs| {
            let scaled: Vec<f64> = coeffs.iter().map(|c| c / SQRT_2).collect();
            &fock.ladder(&scaled, false) + &fock.ladder(&scaled, true)
        })
        .collect();
    let c = indicators.iter().map(|ind| fock.number(ind)).collect();
    let n_op = fock.number(&vec![1.0; sites]);

    let mut vacuum = vec![Complex64::new(0.0, 0.0); dim];
    vacuum[0] = Complex64::new(1.0, 0.0);
    let mut single = vec![Complex64::new(0.0, 0.0); dim];
    if n_max >= 1 {
        let mut occ = vec![0u8; sites];
        for (x, amp) in psi.iter().enumerate() {
            occ[x] = 1;
            single[fock.index[&occ]] = *amp;
            occ[x] = 0;
        }
    }

    Ok(LatticeOracle {
        lattice,
        fock,
        ops: OperatorSet {
            w,
            c,
            n_op,
            smearing_coeffs,
            indicators,
        },
        psi,
        vacuum,
        single,
    })
}

fn matvec(m: &CsrMatrix<f64>, v: &[Complex64]) -> Vec<Complex64> {
    m.row_iter()
        .map(|row| {
            row.col_indices()
                .iter()
                .zip(row.values())
                .map(|(&j, &a)| v[j] * a)
                .sum()
        })
        .collect()
}

fn dot(u: &[Complex64], v: &[Complex64]) -> Complex64 {
    u.iter().zip(v).map(|(a, b)| a.conj() * b).sum()
}

impl LatticeOracle {
    pub fn state(&self, state: State) -> &[Complex64] {
        match state {
            State::Vacuum => &self.vacuum,
            State::SinglePhoton => &self.single,
        }
    }

    /// `(σ, s, P)` of detector `n` from lattice inner products.
    pub fn params(&self, n: usize) -> Result<DetectorParams> {
        let f = &self.ops.smearing_coeffs[n];
        let ff: f64 = f.iter().map(|c| c * c).sum();
        if !(ff > 0.0) {
            return Err(Error::Domain(format!("detector {n} covers no lattice site")));
        }
        let s: Complex64 = self.psi.iter().zip(f).map(|(p, c)| p.conj() * c).sum::<Complex64>() / ff.sqrt();
        let p: f64 = self
            .psi
            .iter()
            .zip(&self.ops.indicators[n])
            .map(|(v, i)| v.norm_sqr() * i)
            .sum();
        DetectorParams::new((ff / 2.0).sqrt(), s, p.min(1.0))
    }

    /// `⟨ψ| A |ψ⟩` for a product `A = ops[0] ops[1] ⋯`.
    pub fn expectation(&self, state: State, ops: &[&CsrMatrix<f64>]) -> Complex64 {
        let psi = self.state(state);
        // Split the product so both halves stay as far below the shell as possible.
        let half = ops.len() / 2;
        let mut right = psi.to_vec();
        for m in ops[half..].iter().rev() {
            right = matvec(m, &right);
        }
        let mut left = psi.to_vec();
        for m in &ops[..half] {
            // (A†)ψ with A real symmetric is Aψ.
            left = matvec(m, &left);
        }
        dot(&left, &right)
    }
}

/// One identity in the oracle report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub deviation: f64,
    pub threshold: f64,
    pub pass: bool,
}

impl Check {
    fn new(name: impl Into<String>, deviation: f64, threshold: f64) -> Check {
        Check {
            name: name.into(),
            deviation,
            threshold,
            pass: deviation.is_finite() && deviation < threshold,
        }
    }
}

pub const COMMUTATOR_THRESHOLD: f64 = 1e-10;
pub const PROJECTOR_THRESHOLD: f64 = 1e-12;

/// Frobenius norm of `A B - B A - rhs` on the block below the shell.
fn commutator_deviation(
    a: &CsrMatrix<f64>,
    b: &CsrMatrix<f64>,
    rhs: Option<&CsrMatrix<f64>>,
    block: &[bool],
) -> f64 {
    let mut d = &(a * b) - &(b * a);
    if let Some(r) = rhs {
        d = &d - r;
    }
    d.triplet_iter()
        .filter(|(i, j, _)| block[*i] && block[*j])
        .map(|(_, _, v)| v * v)
        .sum::<f64>()
        .sqrt()
}

fn asymmetry(m: &CsrMatrix<f64>) -> f64 {
    let d = m - &m.transpose();
    d.values().iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Norms of the commutators `[W_m, W_n]`, `[C_m, C_n]`, `[W_m, C_n] - δ_mn R_n`
/// and of `[a_x, a_y†] - δ_xy`, all on the block below the truncation shell.
pub fn check_commutators(oracle: &LatticeOracle) -> Vec<Check> {
    let ops = &oracle.ops;
    let fock = &oracle.fock;
    let block = fock.below_shell();
    let mut checks = Vec::new();

    let sites = fock.sites;
    let identity = CsrMatrix::identity(fock.dimension());
    let mut worst_ccr: f64 = 0.0;
    let mut unit = vec![0.0; sites];
    let lowering: Vec<_> = (0..sites)
        .map(|x| {
            unit.fill(0.0);
            unit[x] = 1.0;
            fock.ladder(&unit, false)
        })
        .collect();
    for x in 0..sites {
        for y in 0..sites {
            let raise = lowering[y].transpose();
            let rhs = (x == y).then_some(&identity);
            worst_ccr = worst_ccr.max(commutator_deviation(&lowering[x], &raise, rhs, &block));
        }
    }
    checks.push(Check::new("[a_x, a_y^dag] = delta_xy", worst_ccr, COMMUTATOR_THRESHOLD));

    for (n, w) in ops.w.iter().enumerate() {
        checks.push(Check::new(format!("W_{} hermitian", n + 1), asymmetry(w), PROJECTOR_THRESHOLD));
    }

    let m = ops.w.len();
    for i in 0..m {
        for j in (i + 1)..m {
            checks.push(Check::new(
                format!("[W_{}, W_{}] = 0", i + 1, j + 1),
                commutator_deviation(&ops.w[i], &ops.w[j], None, &block),
                COMMUTATOR_THRESHOLD,
            ));
            checks.push(Check::new(
                format!("[C_{}, C_{}] = 0", i + 1, j + 1),
                commutator_deviation(&ops.c[i], &ops.c[j], None, &block),
                PROJECTOR_THRESHOLD,
            ));
        }
    }

    for i in 0..m {
        for j in 0..m {
            let rhs = (i == j).then(|| {
                // (1/√2) Σ_x f_n(x) √ΔA 1_n(x) (a_x - a_x†)
                let coeffs: Vec<f64> = ops.smearing_coeffs[i]
                    .iter()
                    .zip(&ops.indicators[i])
                    .map(|(f, ind)| f * ind / SQRT_2)
                    .collect();
                &fock.ladder(&coeffs, false) - &fock.ladder(&coeffs, true)
            });
            let threshold = if i == j { COMMUTATOR_THRESHOLD } else { PROJECTOR_THRESHOLD };
            checks.push(Check::new(
                format!("[W_{}, C_{}] = {}", i + 1, j + 1, if i == j { "R" } else { "0" }),
                commutator_deviation(&ops.w[i], &ops.c[j], rhs.as_ref(), &block),
                threshold,
            ));
        }
    }
    checks
}

pub const MOMENT_RTOL: f64 = 1e-10;

fn relative_gap(got: f64, want: f64, scale: f64) -> f64 {
    (got - want).abs() / want.abs().max(scale)
}

fn photons(state: State) -> usize {
    match state {
        State::Vacuum => 0,
        State::SinglePhoton => 1,
    }
}

/// Highest amplitude moment whose operator paths stay below the shell.
pub fn max_safe_order(state: State, n_max: usize) -> u32 {
    (2 * n_max.saturating_sub(photons(state))) as u32
}

/// A single matrix-vs-analytic comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentRow {
    pub quantity: String,
    pub operator: f64,
    pub analytic: f64,
    pub relative_gap: f64,
}

/// Compares `⟨W_n^k⟩`, `⟨C_n^k⟩`, `⟨W_1 W_2⟩` and `⟨W_m C_n⟩` from the
/// matrices with the closed-form distributions evaluated at the lattice
/// `(σ, s, P)`.
pub fn moments_vs_analytic(oracle: &LatticeOracle, state: State, k_max: u32) -> Result<Vec<MomentRow>> {
    let safe = max_safe_order(state, oracle.fock.n_max);
    if k_max > safe {
        return Err(Error::TruncationUnsafe {
            order: k_max,
            photons: photons(state),
            cutoff: oracle.fock.n_max,
        });
    }
    let ops = &oracle.ops;
    let m = ops.w.len();
    let params: Vec<DetectorParams> = (0..m).map(|n| oracle.params(n)).collect::<Result<_>>()?;
    let rule = GaussRule::hermite(32);
    let mut rows = Vec::new();
    let mut push = |quantity: String, got: Complex64, want: f64, scale: f64| {
        rows.push(MomentRow {
            quantity,
            operator: got.re,
            analytic: want,
            relative_gap: relative_gap(got.re, want, scale).max(got.im.abs() / scale),
        });
    };

    for (n, p) in params.iter().enumerate() {
        let pdf = WavePdf::new(state, p.sigma, p.s)?;
        for k in 1..=k_max {
            let ops_k: Vec<_> = (0..k).map(|_| &ops.w[n]).collect();
            let got = oracle.expectation(state, &ops_k);
            let want = gaussian_expectation(&rule, p.sigma, |w| {
                w.powi(k as i32) * pdf.density(w) / crate::dists::gaussian_pdf(p.sigma, w)
            });
            push(format!("<W_{}^{k}>", n + 1), got, want, p.sigma.powi(k as i32));
        }
        let count = crate::dists::CountPmf::new(state, p.p)?;
        for k in 1..=k_max.max(1) {
            let ops_k: Vec<_> = (0..k).map(|_| &ops.c[n]).collect();
            push(format!("<C_{}^{k}>", n + 1), oracle.expectation(state, &ops_k), count.moment(k), 1.0);
        }
    }
    if m >= 2 && k_max >= 2 {
        let joint = JointWavePdf::from_params(state, &params[..2])?;
        push(
            "<W_1 W_2>".into(),
            oracle.expectation(state, &[&ops.w[0], &ops.w[1]]),
            joint.covariance(0, 1),
            params[0].sigma * params[1].sigma,
        );
    }
    if k_max >= 2 {
        for i in 0..m {
            for j in 0..m {
                // The wave-count cross moment vanishes for every pair.
                push(
                    format!("<W_{} C_{}>", i + 1, j + 1),
                    oracle.expectation(state, &[&ops.w[i], &ops.c[j]]),
                    0.0,
                    params[i].sigma,
                );
            }
        }
    }
    push(
        "<N>".into(),
        oracle.expectation(state, &[&ops.n_op]),
        photons(state) as f64,
        1.0,
    );
    Ok(rows)
}

/// Exact joint count distribution of `state`, keyed by outcome vectors.
pub fn counting_spectrum(oracle: &LatticeOracle, state: State) -> Result<BTreeMap<Vec<u32>, f64>> {
    let psi = oracle.state(state);
    let ops = &oracle.ops;
    let diag: Vec<Vec<f64>> = ops
        .c
        .iter()
        .map(|c| {
            let mut d = vec![0.0; oracle.fock.dimension()];
            for (i, j, v) in c.triplet_iter() {
                if i == j {
                    d[i] = *v;
                }
            }
            d
        })
        .collect();
    let mut pmf = BTreeMap::new();
    for (i, amp) in psi.iter().enumerate() {
        let w = amp.norm_sqr();
        if w == 0.0 {
            continue;
        }
        if oracle.fock.photons(i) > 1 {
            return Err(Error::Domain("counting spectrum needs a state with at most one photon".into()));
        }
        let outcome: Vec<u32> = diag
            .iter()
            .map(|d| {
                let v = d[i];
                debug_assert!(v == 0.0 || v == 1.0);
                v as u32
            })
            .collect();
        *pmf.entry(outcome).or_insert(0.0) += w;
    }
    Ok(pmf)
}

/// Largest gap between the lattice counting spectrum and `pmf_cc` with the
/// lattice `P_n`, over all outcomes in `{0, 1}^M`.
pub fn counting_spectrum_gap(oracle: &LatticeOracle, state: State) -> Result<f64> {
    let spectrum = counting_spectrum(oracle, state)?;
    let m = oracle.ops.c.len();
    let ps: Vec<f64> = (0..m).map(|n| oracle.params(n).map(|p| p.p)).collect::<Result<_>>()?;
    let joint = JointCountPmf::new(state, ps)?;
    let mut gap: f64 = 0.0;
    for bits in 0..(1u32 << m) {
        let outcome: Vec<u32> = (0..m).map(|n| (bits >> n) & 1).collect();
        let got = spectrum.get(&outcome).copied().unwrap_or(0.0);
        gap = gap.max((got - joint.mass(&outcome)?).abs());
    }
    Ok(gap)
}

/// Settings of the characteristic-function reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CharacteristicOptions {
    /// Points of the α grid.
    pub alpha_points: usize,
    /// `α_max = alpha_sigmas / σ`.
    pub alpha_sigmas: f64,
    /// Levels kept in the smearing mode.
    pub levels: usize,
    /// Densities below `-negativity_tolerance` count as aliasing.
    pub negativity_tolerance: f64,
    pub max_refinements: u32,
}

impl Default for CharacteristicOptions {
    fn default() -> Self {
        CharacteristicOptions {
            alpha_points: 256,
            alpha_sigmas: 12.0,
            levels: 256,
            negativity_tolerance: 1e-6,
            max_refinements: 3,
        }
    }
}

/// Reconstruction of `p_W` by Fourier inversion of `⟨ψ|exp(iαW_n)|ψ⟩`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CharacteristicPdf {
    pub w: Vec<f64>,
    pub density: Vec<f64>,
    pub alpha_points: usize,
}

/// `W_n` only acts on the normalized smearing mode `b = Σ e_x a_x`. In the
/// number basis of that mode it is the tridiagonal matrix
/// `σ (b + b†)`, which is diagonalized once; the photon's overlap with the
/// mode is `c = Σ e_x ψ_x`, and the orthogonal part is a spectator. So
/// `χ(α) = |c|² ⟨1|e^{iαW}|1⟩ + (1 - |c|²) ⟨0|e^{iαW}|0⟩` for a single photon.
struct ModeSpectrum {
    eigenvalues: Vec<f64>,
    amp0: Vec<f64>,
    amp1: Vec<f64>,
}

impl ModeSpectrum {
    fn new(sigma: f64, levels: usize) -> ModeSpectrum {
        let t = DMatrix::from_fn(levels, levels, |i, j| {
            if i + 1 == j || j + 1 == i {
                sigma * (i.max(j) as f64).sqrt()
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        ModeSpectrum {
            eigenvalues: eig.eigenvalues.iter().copied().collect(),
            amp0: eig.eigenvectors.row(0).iter().map(|v| v * v).collect(),
            amp1: eig.eigenvectors.row(1).iter().map(|v| v * v).collect(),
        }
    }

    /// `(⟨0|e^{iαW}|0⟩, ⟨1|e^{iαW}|1⟩)`.
    fn diagonal(&self, alpha: f64) -> (Complex64, Complex64) {
        let mut d0 = Complex64::new(0.0, 0.0);
        let mut d1 = Complex64::new(0.0, 0.0);
        for ((l, a0), a1) in self.eigenvalues.iter().zip(&self.amp0).zip(&self.amp1) {
            let e = Complex64::from_polar(1.0, alpha * l);
            d0 += e * a0;
            d1 += e * a1;
        }
        (d0, d1)
    }

    /// `⟨k|W^j|k⟩` from the spectral decomposition, for cross-checks.
    fn moment(&self, level: usize, j: i32) -> f64 {
        let amp = if level == 0 { &self.amp0 } else { &self.amp1 };
        self.eigenvalues.iter().zip(amp).map(|(l, a)| a * l.powi(j)).sum()
    }
}

impl LatticeOracle {
    /// `|c|²`, the weight of the smearing mode in the single photon.
    pub fn mode_overlap(&self, n: usize) -> f64 {
        let f = &self.ops.smearing_coeffs[n];
        let norm = f.iter().map(|c| c * c).sum::<f64>().sqrt();
        self.psi
            .iter()
            .zip(f)
            .map(|(p, c)| p * (c / norm))
            .sum::<Complex64>()
            .norm_sqr()
    }

    /// Moments `⟨ψ|W_n^k⟩` from the smearing-mode block, to compare with the
    /// full lattice matrices.
    pub fn mode_block_moments(&self, n: usize, state: State, k_max: u32) -> Result<Vec<f64>> {
        let sigma = self.params(n)?.sigma;
        let spec = ModeSpectrum::new(sigma, CharacteristicOptions::default().levels);
        let c2 = self.mode_overlap(n);
        Ok((1..=k_max as i32)
            .map(|k| match state {
                State::Vacuum => spec.moment(0, k),
                State::SinglePhoton => c2 * spec.moment(1, k) + (1.0 - c2) * spec.moment(0, k),
            })
            .collect())
    }
}

/// Reconstructs `p_W` for detector `n` at the points `w` by trapezoidal
/// Fourier inversion of the characteristic function on a symmetric α grid.
/// The α grid is doubled when the result dips below zero, and aliasing is
/// reported if refinement does not cure it.
pub fn characteristic_pdf_w(
    oracle: &LatticeOracle,
    n: usize,
    state: State,
    w: &[f64],
    opts: &CharacteristicOptions,
) -> Result<CharacteristicPdf> {
    let sigma = oracle.params(n)?.sigma;
    let spec = ModeSpectrum::new(sigma, opts.levels);
    let c2 = match state {
        State::Vacuum => 0.0,
        State::SinglePhoton => oracle.mode_overlap(n),
    };
    let alpha_max = opts.alpha_sigmas / sigma;
    let mut points = opts.alpha_points.max(3);
    let mut min_density = f64::NAN;
    for _ in 0..=opts.max_refinements {
        let step = 2.0 * alpha_max / (points - 1) as f64;
        let chi: Vec<(f64, Complex64)> = (0..points)
            .map(|i| {
                let alpha = -alpha_max + i as f64 * step;
                let (d0, d1) = spec.diagonal(alpha);
                (alpha, d1 * c2 + d0 * (1.0 - c2))
            })
            .collect();
        let density: Vec<f64> = w
            .iter()
            .map(|&x| {
                let sum: Complex64 = chi
                    .iter()
                    .enumerate()
                    .map(|(i, (alpha, c))| {
                        let weight = if i == 0 || i + 1 == points { 0.5 } else { 1.0 };
                        c * Complex64::from_polar(weight, -alpha * x)
                    })
                    .sum();
                sum.re * step / (2.0 * PI)
            })
            .collect();
        min_density = density.iter().copied().fold(f64::INFINITY, f64::min);
        if min_density >= -opts.negativity_tolerance {
            return Ok(CharacteristicPdf {
                w: w.to_vec(),
                density,
                alpha_points: points,
            });
        }
        points = 2 * points - 1;
    }
    Err(Error::Aliasing { min_density })
}

/// Summary of a full oracle run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub g: usize,
    pub n_max: usize,
    pub extent: f64,
    pub dimension: usize,
    pub params: Vec<DetectorParams>,
    pub checks: Vec<Check>,
    pub moments: Vec<MomentRow>,
    pub all_pass: bool,
}

pub const SPECTRUM_THRESHOLD: f64 = 1e-14;
pub const CHARACTERISTIC_THRESHOLD: f64 = 1e-4;
pub const NORMALIZATION_THRESHOLD: f64 = 1e-3;

/// Reference geometry of the oracle: a Gaussian beam of waist 1 centred on
/// a lattice of half-width 2, split into two half-plane detectors with
/// Gaussian smearing of width 0.6 centred in each half.
pub fn reference_setup(g: usize) -> Result<(LatticeModel, BeamField, Vec<LatticeDetector>)> {
    let extent = 2.0;
    let lattice = LatticeModel::new(g, extent, [0.0, 0.0])?;
    let beam = BeamField::gaussian([0.0, 0.0], 1.0)?;
    let detectors = [-1.0, 1.0]
        .iter()
        .enumerate()
        .map(|(i, &cx)| {
            Ok(LatticeDetector {
                smearing: SmearingFunction::gaussian([cx, 0.0], 0.6)?,
                region: DetectorRegion::rect(i, [cx, 0.0], [1.0, extent])?,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((lattice, beam, detectors))
}

/// Runs every oracle check on the reference geometry.
pub fn run_oracle(g: usize, n_max: usize) -> Result<OracleReport> {
    let (lattice, beam, detectors) = reference_setup(g)?;
    let extent = lattice.extent;
    let oracle = build_lattice_model(lattice, &beam, &detectors, n_max, DEFAULT_DIMENSION_CAP)?;
    let mut checks = check_commutators(&oracle);

    let m = detectors.len();
    let params: Vec<DetectorParams> = (0..m).map(|n| oracle.params(n)).collect::<Result<_>>()?;

    let mut moments = Vec::new();
    for state in [State::Vacuum, State::SinglePhoton] {
        if photons(state) > n_max {
            continue;
        }
        let k_max = max_safe_order(state, n_max).min(4);
        let rows = moments_vs_analytic(&oracle, state, k_max)?;
        let worst = rows.iter().map(|r| r.relative_gap).fold(0.0, f64::max);
        checks.push(Check::new(
            format!("{state:?} moments vs analytic (relative)"),
            worst,
            MOMENT_RTOL,
        ));
        moments.extend(rows);

        checks.push(Check::new(
            format!("{state:?} counting spectrum vs pmf_cc"),
            counting_spectrum_gap(&oracle, state)?,
            SPECTRUM_THRESHOLD,
        ));

        for n in 0..m {
            let block = oracle.mode_block_moments(n, state, k_max)?;
            let mut worst: f64 = 0.0;
            for (k, b) in block.iter().enumerate() {
                let ops_k: Vec<_> = (0..=k).map(|_| &oracle.ops.w[n]).collect();
                let full = oracle.expectation(state, &ops_k).re;
                worst = worst.max(relative_gap(*b, full, params[n].sigma.powi(k as i32 + 1)));
            }
            checks.push(Check::new(
                format!("{state:?} W_{} mode block vs lattice moments", n + 1),
                worst,
                MOMENT_RTOL,
            ));

            let sigma = params[n].sigma;
            let w: Vec<f64> = (0..=160).map(|i| -8.0 * sigma + i as f64 * 0.1 * sigma).collect();
            let rec = characteristic_pdf_w(&oracle, n, state, &w, &CharacteristicOptions::default())?;
            let exact = WavePdf::new(state, sigma, params[n].s)?;
            let gap = rec
                .w
                .iter()
                .zip(&rec.density)
                .filter(|(x, _)| x.abs() <= 4.0 * sigma + 1e-12)
                .map(|(x, d)| (d - exact.density(*x)).abs())
                .fold(0.0, f64::max);
            checks.push(Check::new(
                format!("{state:?} W_{} characteristic-function pdf", n + 1),
                gap,
                CHARACTERISTIC_THRESHOLD,
            ));
            let dw = 0.1 * sigma;
            let mass: f64 = rec
                .density
                .iter()
                .enumerate()
                .map(|(i, d)| if i == 0 || i + 1 == rec.density.len() { 0.5 * d } else { *d })
                .sum::<f64>()
                * dw;
            checks.push(Check::new(
                format!("{state:?} W_{} reconstructed normalization", n + 1),
                (mass - 1.0).abs(),
                NORMALIZATION_THRESHOLD,
            ));
        }
    }

    let all_pass = checks.iter().all(|c| c.pass);
    Ok(OracleReport {
        g,
        n_max,
        extent,
        dimension: oracle.fock.dimension(),
        params,
        checks,
        moments,
        all_pass,
    })
}
