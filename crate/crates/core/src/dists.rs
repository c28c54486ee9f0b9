//! Closed-form distributions of the wave amplitude `W` and photon count `C`
//! for the vacuum and single-photon states, for one and two detectors.
//!
//! Counting outcomes are kept symbolic: a count distribution is a list of
//! labelled masses, never a numeric spike, so mixed wave–count laws keep
//! exact discrete marginals.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DetectorParams, FEASIBILITY_SLACK};

/// Photon-number state of the beam.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum State {
    Vacuum,
    SinglePhoton,
}

fn check_sigma(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("sigma must be positive and finite, got {sigma}")))
    }
}

fn check_s(s: Complex64) -> Result<()> {
    if s.norm() <= 1.0 + 1e-12 {
        Ok(())
    } else {
        Err(Error::Domain(format!("|s| = {} exceeds 1", s.norm())))
    }
}

fn check_p(p: f64) -> Result<()> {
    if (0.0..=1.0).contains(&p) {
        Ok(())
    } else {
        Err(Error::Domain(format!("P must lie in [0, 1], got {p}")))
    }
}

/// Zero-mean normal density.
pub fn gaussian_pdf(sigma: f64, w: f64) -> f64 {
    (-0.5 * (w / sigma).powi(2)).exp() / ((2.0 * PI).sqrt() * sigma)
}

fn std_normal_cdf(t: f64) -> f64 {
    0.5 * libm::erfc(-t / std::f64::consts::SQRT_2)
}

/// Density of the smeared amplitude measured by one detector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WavePdf {
    pub state: State,
    pub sigma: f64,
    pub s: Complex64,
}

impl WavePdf {
    pub fn new(state: State, sigma: f64, s: Complex64) -> Result<WavePdf> {
        check_sigma(sigma)?;
        check_s(s)?;
        Ok(WavePdf { state, sigma, s })
    }

    pub fn vacuum(sigma: f64) -> Result<WavePdf> {
        WavePdf::new(State::Vacuum, sigma, Complex64::new(0.0, 0.0))
    }

    pub fn single(sigma: f64, s: f64) -> Result<WavePdf> {
        WavePdf::new(State::SinglePhoton, sigma, Complex64::new(s, 0.0))
    }

    fn s2(&self) -> f64 {
        match self.state {
            State::Vacuum => 0.0,
            State::SinglePhoton => self.s.norm_sqr(),
        }
    }

    pub fn density(&self, w: f64) -> f64 {
        let s2 = self.s2();
        let t2 = (w / self.sigma).powi(2);
        gaussian_pdf(self.sigma, w) * (1.0 - s2 * (1.0 - t2))
    }

    /// `F(w) = Φ(t) - |s|² t φ(t)` with `t = w / sigma`.
    pub fn cdf(&self, w: f64) -> f64 {
        let t = w / self.sigma;
        let phi = (-0.5 * t * t).exp() / (2.0 * PI).sqrt();
        std_normal_cdf(t) - self.s2() * t * phi
    }

    /// `E[W²] = sigma² (1 + 2|s|²)`.
    pub fn second_moment(&self) -> f64 {
        self.sigma * self.sigma * (1.0 + 2.0 * self.s2())
    }

    /// Standard deviation of the equivalent Gaussian envelope, used to size
    /// integration windows.
    pub fn effective_sigma(&self) -> f64 {
        self.second_moment().sqrt()
    }
}

/// `p_W(state, w)`.
pub fn pdf_w(state: State, sigma: f64, s: Complex64, w: f64) -> Result<f64> {
    Ok(WavePdf::new(state, sigma, s)?.density(w))
}

/// Photon-count law of one detector (outcomes 0 and 1 only).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CountPmf {
    pub state: State,
    pub p: f64,
}

impl CountPmf {
    pub fn new(state: State, p: f64) -> Result<CountPmf> {
        check_p(p)?;
        Ok(CountPmf { state, p })
    }

    pub fn mass(&self, c: u32) -> Result<f64> {
        match (self.state, c) {
            (State::Vacuum, 0) => Ok(1.0),
            (State::Vacuum, 1) => Ok(0.0),
            (State::SinglePhoton, 0) => Ok(1.0 - self.p),
            (State::SinglePhoton, 1) => Ok(self.p),
            _ => Err(Error::Domain(format!(
                "count outcome {c} is outside the one-photon sector {{0, 1}}"
            ))),
        }
    }

    /// Labelled masses `[(0, m0), (1, m1)]`.
    pub fn masses(&self) -> [(u32, f64); 2] {
        [(0, self.mass(0).unwrap()), (1, self.mass(1).unwrap())]
    }

    /// `E[C^k]` for `k ≥ 1`; counts are 0/1 so every power has the same mean.
    pub fn moment(&self, k: u32) -> f64 {
        if k == 0 {
            1.0
        } else {
            self.mass(1).unwrap()
        }
    }
}

/// `Prob(C = c)`.
pub fn pmf_c(state: State, p: f64, c: u32) -> Result<f64> {
    CountPmf::new(state, p)?.mass(c)
}

/// Joint density of `M ≥ 2` wave amplitudes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointWavePdf {
    pub state: State,
    pub sigmas: Vec<f64>,
    pub s: Vec<Complex64>,
}

impl JointWavePdf {
    pub fn new(state: State, sigmas: Vec<f64>, s: Vec<Complex64>) -> Result<JointWavePdf> {
        if sigmas.len() < 2 || sigmas.len() != s.len() {
            return Err(Error::Domain(format!(
                "joint wave density needs M >= 2 matching (sigma, s) pairs, got {} and {}",
                sigmas.len(),
                s.len()
            )));
        }
        for (&sig, &sn) in sigmas.iter().zip(&s) {
            check_sigma(sig)?;
            check_s(sn)?;
        }
        let total: f64 = s.iter().map(|z| z.norm_sqr()).sum();
        if state == State::SinglePhoton && total > 1.0 + FEASIBILITY_SLACK {
            return Err(Error::Infeasible(vec![format!(
                "sum |s_n|^2 <= 1 violated (value {total:.6})"
            )]));
        }
        Ok(JointWavePdf { state, sigmas, s })
    }

    pub fn from_params(state: State, params: &[DetectorParams]) -> Result<JointWavePdf> {
        JointWavePdf::new(
            state,
            params.iter().map(|p| p.sigma).collect(),
            params.iter().map(|p| p.s).collect(),
        )
    }

    /// Symmetric real-overlap pair `s₁ = s₂ = s`.
    pub fn symmetric(sigma: f64, s: f64) -> Result<JointWavePdf> {
        let z = Complex64::new(s, 0.0);
        JointWavePdf::new(State::SinglePhoton, vec![sigma, sigma], vec![z, z])
    }

    pub fn dim(&self) -> usize {
        self.sigmas.len()
    }

    /// `p_W(0, w) [1 - Σ|s_n|² + |Σ w_n s_n / sigma_n|²]`.
    pub fn density(&self, w: &[f64]) -> Result<f64> {
        if w.len() != self.dim() {
            return Err(Error::Domain(format!(
                "expected a {}-component amplitude vector, got {}",
                self.dim(),
                w.len()
            )));
        }
        let vacuum: f64 = self.sigmas.iter().zip(w).map(|(&s, &x)| gaussian_pdf(s, x)).product();
        if self.state == State::Vacuum {
            return Ok(vacuum);
        }
        let total: f64 = self.s.iter().map(|z| z.norm_sqr()).sum();
        let sum: Complex64 = self
            .s
            .iter()
            .zip(&self.sigmas)
            .zip(w)
            .map(|((&sn, &sig), &x)| sn * (x / sig))
            .sum();
        Ok(vacuum * (1.0 - total + sum.norm_sqr()))
    }

    /// `E[W_n W_m] = sigma_n sigma_m (s_n s_m* + s_n* s_m)` for `n ≠ m`.
    pub fn covariance(&self, n: usize, m: usize) -> f64 {
        if self.state == State::Vacuum {
            return if n == m { self.sigmas[n].powi(2) } else { 0.0 };
        }
        if n == m {
            return self.sigmas[n].powi(2) * (1.0 + 2.0 * self.s[n].norm_sqr());
        }
        self.sigmas[n] * self.sigmas[m] * 2.0 * (self.s[n] * self.s[m].conj()).re
    }

    pub fn marginal(&self, n: usize) -> WavePdf {
        WavePdf {
            state: self.state,
            sigma: self.sigmas[n],
            s: self.s[n],
        }
    }
}

/// Joint density of the amplitudes at several detectors.
pub fn pdf_ww(state: State, params: &[DetectorParams], w: &[f64]) -> Result<f64> {
    JointWavePdf::from_params(state, params)?.density(w)
}

/// Joint count law over `M` detectors; at most one detector clicks.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JointCountPmf {
    pub state: State,
    pub p: Vec<f64>,
}

impl JointCountPmf {
    pub fn new(state: State, p: Vec<f64>) -> Result<JointCountPmf> {
        if p.is_empty() {
            return Err(Error::Domain("joint count law needs at least one detector".into()));
        }
        for &pn in &p {
            check_p(pn)?;
        }
        let total: f64 = p.iter().sum();
        if total > 1.0 + FEASIBILITY_SLACK {
            return Err(Error::Infeasible(vec![format!(
                "sum P_n <= 1 violated (value {total:.6})"
            )]));
        }
        Ok(JointCountPmf { state, p })
    }

    /// Probability that no detector clicks.
    pub fn p_none(&self) -> f64 {
        match self.state {
            State::Vacuum => 1.0,
            State::SinglePhoton => (1.0 - self.p.iter().sum::<f64>()).max(0.0),
        }
    }

    pub fn mass(&self, c: &[u32]) -> Result<f64> {
        if c.len() != self.p.len() {
            return Err(Error::Domain(format!(
                "expected {} count outcomes, got {}",
                self.p.len(),
                c.len()
            )));
        }
        if let Some(bad) = c.iter().find(|&&x| x > 1) {
            return Err(Error::Domain(format!(
                "count outcome {bad} is outside the one-photon sector {{0, 1}}"
            )));
        }
        let clicks: Vec<usize> = (0..c.len()).filter(|&i| c[i] == 1).collect();
        Ok(match (self.state, clicks.as_slice()) {
            (_, []) => self.p_none(),
            (State::SinglePhoton, [m]) => self.p[*m],
            _ => 0.0,
        })
    }

    /// All outcomes with nonzero support: all-zeros, then each unit vector.
    pub fn masses(&self) -> Vec<(Vec<u32>, f64)> {
        let m = self.p.len();
        let mut out = vec![(vec![0; m], self.p_none())];
        for i in 0..m {
            let mut c = vec![0; m];
            c[i] = 1;
            let mass = self.mass(&c).unwrap();
            out.push((c, mass));
        }
        out
    }

    pub fn marginal(&self, n: usize) -> CountPmf {
        CountPmf {
            state: self.state,
            p: self.p[n],
        }
    }
}

/// `Prob(C₁ = c₁, …, C_M = c_M)`.
pub fn pmf_cc(state: State, p: &[f64], c: &[u32]) -> Result<f64> {
    JointCountPmf::new(state, p.to_vec())?.mass(c)
}

/// Mixed law of the amplitude at detector 1 and the count at detector 2,
/// written as `δ(c) g₀(w) + δ(c-1) g₁(w)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MixedJointPdf {
    pub state: State,
    pub sigma: f64,
    pub s: Complex64,
    pub p: f64,
}

impl MixedJointPdf {
    pub fn new(state: State, sigma: f64, s: Complex64, p: f64) -> Result<MixedJointPdf> {
        check_sigma(sigma)?;
        check_s(s)?;
        check_p(p)?;
        if state == State::SinglePhoton {
            let slack = 1.0 - p - s.norm_sqr();
            if slack < -FEASIBILITY_SLACK {
                return Err(Error::Infeasible(vec![format!(
                    "1 - P - |s|^2 >= 0 violated (value {slack:.6})"
                )]));
            }
        }
        Ok(MixedJointPdf { state, sigma, s, p })
    }

    pub fn single(sigma: f64, s: f64, p: f64) -> Result<MixedJointPdf> {
        MixedJointPdf::new(State::SinglePhoton, sigma, Complex64::new(s, 0.0), p)
    }

    pub fn wave_marginal(&self) -> WavePdf {
        WavePdf {
            state: self.state,
            sigma: self.sigma,
            s: self.s,
        }
    }

    pub fn count_marginal(&self) -> CountPmf {
        CountPmf {
            state: self.state,
            p: self.p,
        }
    }

    /// `g₀(w) = p_W(1, w) - P p_W(0, w)`; clamped at zero against rounding on
    /// the feasibility boundary.
    pub fn g0(&self, w: f64) -> f64 {
        match self.state {
            State::Vacuum => gaussian_pdf(self.sigma, w),
            State::SinglePhoton => {
                let s2 = self.s.norm_sqr();
                let t2 = (w / self.sigma).powi(2);
                let bracket = (1.0 - self.p - s2) + s2 * t2;
                gaussian_pdf(self.sigma, w) * bracket.max(0.0)
            }
        }
    }

    /// `g₁(w) = P p_W(0, w)`.
    pub fn g1(&self, w: f64) -> f64 {
        match self.state {
            State::Vacuum => 0.0,
            State::SinglePhoton => self.p * gaussian_pdf(self.sigma, w),
        }
    }

    pub fn density(&self, w: f64, c: u32) -> Result<f64> {
        match c {
            0 => Ok(self.g0(w)),
            1 => Ok(self.g1(w)),
            _ => Err(Error::Domain(format!(
                "count outcome {c} is outside the one-photon sector {{0, 1}}"
            ))),
        }
    }
}

/// `p_WC(state, w, c)`.
pub fn pdf_wc(state: State, sigma: f64, s: Complex64, p: f64, w: f64, c: u32) -> Result<f64> {
    MixedJointPdf::new(state, sigma, s, p)?.density(w, c)
}

/// Any of the distributions above.
#[derive(Debug, Clone, PartialEq)]
pub enum Distribution {
    Wave(WavePdf),
    Count(CountPmf),
    WaveWave(JointWavePdf),
    CountCount(JointCountPmf),
    WaveCount(MixedJointPdf),
}

/// Pearson coefficient of a pair, or why it does not exist.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "kind", content = "value")]
pub enum Correlation {
    Value(f64),
    /// One of the variables has zero variance.
    Degenerate,
    /// The distribution has a single variable.
    NotApplicable,
}

impl Correlation {
    pub fn value(&self) -> Option<f64> {
        match self {
            Correlation::Value(v) => Some(*v),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Moments {
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Covariance of the first two variables.
    pub covariance: Option<f64>,
    pub pearson: Correlation,
}

fn pearson(cov: f64, v1: f64, v2: f64) -> Correlation {
    if v1 <= 0.0 || v2 <= 0.0 {
        Correlation::Degenerate
    } else {
        Correlation::Value(cov / (v1 * v2).sqrt())
    }
}

/// Closed-form means, variances, covariance and Pearson coefficient.
pub fn moments_and_corr(dist: &Distribution) -> Moments {
    match dist {
        Distribution::Wave(w) => Moments {
            means: vec![0.0],
            variances: vec![w.second_moment()],
            covariance: None,
            pearson: Correlation::NotApplicable,
        },
        Distribution::Count(c) => {
            let p = c.moment(1);
            Moments {
                means: vec![p],
                variances: vec![p * (1.0 - p)],
                covariance: None,
                pearson: Correlation::NotApplicable,
            }
        }
        Distribution::WaveWave(j) => {
            let variances: Vec<f64> = (0..j.dim()).map(|n| j.covariance(n, n)).collect();
            let cov = j.covariance(0, 1);
            Moments {
                means: vec![0.0; j.dim()],
                pearson: pearson(cov, variances[0], variances[1]),
                variances,
                covariance: Some(cov),
            }
        }
        Distribution::CountCount(j) => {
            let means: Vec<f64> = (0..j.p.len()).map(|n| j.marginal(n).moment(1)).collect();
            let variances: Vec<f64> = means.iter().map(|p| p * (1.0 - p)).collect();
            if means.len() < 2 {
                return Moments {
                    means,
                    variances,
                    covariance: None,
                    pearson: Correlation::NotApplicable,
                };
            }
            // E[C₁C₂] = 0: a single photon never clicks twice.
            let cov = -means[0] * means[1];
            let corr = if variances[0] <= 0.0 || variances[1] <= 0.0 {
                Correlation::Degenerate
            } else {
                let (p1, p2) = (means[0], means[1]);
                Correlation::Value(-(p1 * p2 / ((1.0 - p1) * (1.0 - p2))).sqrt())
            };
            Moments {
                means,
                variances,
                covariance: Some(cov),
                pearson: corr,
            }
        }
        Distribution::WaveCount(m) => {
            let vw = m.wave_marginal().second_moment();
            let p = m.count_marginal().moment(1);
            let vc = p * (1.0 - p);
            // E[WC] = ∫ w g₁(w) dw = 0 by symmetry of g₁.
            let cov = 0.0;
            Moments {
                means: vec![0.0, p],
                variances: vec![vw, vc],
                covariance: Some(cov),
                pearson: pearson(cov, vw, vc),
            }
        }
    }
}
