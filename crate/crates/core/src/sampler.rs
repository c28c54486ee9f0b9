//! Exact, seeded Monte Carlo samplers for the single-photon distributions and
//! the empirical statistics used to compare them with the closed forms.
//!
//! Every single-photon density is a finite mixture of a Gaussian and
//! "Maxwell-sign" components (density `t² φ(t)`, drawn as a chi(3) magnitude
//! with a random sign), so all samplers are rejection-free.
//!
//! Rows are produced in blocks of [`BLOCK_ROWS`]; block `k` draws from the
//! ChaCha8 stream `k` of the seed. Blocks run in parallel and are
//! concatenated in order, so a batch depends only on `(seed, parameters, n)`.

use std::io::Write;

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{DetectorParams, FEASIBILITY_SLACK};

pub const BLOCK_ROWS: usize = 1 << 14;

/// Column layout of a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Layout {
    /// One amplitude column `w`.
    Wave,
    /// Amplitudes `w1..wM`.
    WaveVector(usize),
    /// Counts `c1, c2`.
    CountPair,
    /// Amplitude `w` and count `c`.
    WaveCount,
}

impl Layout {
    pub fn columns(&self) -> Vec<String> {
        match self {
            Layout::Wave => vec!["w".into()],
            Layout::WaveVector(m) => (1..=*m).map(|i| format!("w{i}")).collect(),
            Layout::CountPair => vec!["c1".into(), "c2".into()],
            Layout::WaveCount => vec!["w".into(), "c".into()],
        }
    }

    pub fn is_count_column(&self, i: usize) -> bool {
        match self {
            Layout::CountPair => true,
            Layout::WaveCount => i == 1,
            _ => false,
        }
    }

    fn width(&self) -> usize {
        match self {
            Layout::Wave => 1,
            Layout::WaveVector(m) => *m,
            Layout::CountPair | Layout::WaveCount => 2,
        }
    }
}

/// Sampled records stored column-wise.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBatch {
    pub layout: Layout,
    pub columns: Vec<Vec<f64>>,
    pub seed: u64,
    pub count: usize,
}

impl SampleBatch {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.layout
            .columns()
            .iter()
            .position(|c| c == name)
            .map(|i| self.columns[i].as_slice())
    }

    /// CSV with a header row; amplitudes at 17 significant digits, counts as
    /// integers.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "{}", self.layout.columns().join(","))?;
        let mut line = String::new();
        for r in 0..self.count {
            line.clear();
            for (i, col) in self.columns.iter().enumerate() {
                if i > 0 {
                    line.push(',');
                }
                if self.layout.is_count_column(i) {
                    line.push_str(&format!("{}", col[r] as u8));
                } else {
                    line.push_str(&format!("{:.16e}", col[r]));
                }
            }
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

fn generate<F>(n: usize, seed: u64, layout: Layout, draw: F) -> SampleBatch
where
    F: Fn(&mut ChaCha8Rng, &mut [f64]) + Sync,
{
    let width = layout.width();
    let blocks = n.div_ceil(BLOCK_ROWS);
    let chunks: Vec<Vec<f64>> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let rows = BLOCK_ROWS.min(n - b * BLOCK_ROWS);
            let mut flat = vec![0.0; rows * width];
            for row in flat.chunks_exact_mut(width) {
                draw(&mut rng, row);
            }
            flat
        })
        .collect();
    let mut columns = vec![Vec::with_capacity(n); width];
    for chunk in &chunks {
        for row in chunk.chunks_exact(width) {
            for (col, v) in columns.iter_mut().zip(row) {
                col.push(*v);
            }
        }
    }
    SampleBatch {
        layout,
        columns,
        seed,
        count: n,
    }
}

fn normal<R: Rng>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Draw from the density `t² φ(t)`.
fn maxwell_sign<R: Rng>(rng: &mut R) -> f64 {
    let (a, b, c) = (normal(rng), normal(rng), normal(rng));
    let r = (a * a + b * b + c * c).sqrt();
    if rng.random::<bool>() {
        r
    } else {
        -r
    }
}

fn check_abs_s(s2: f64) -> Result<()> {
    if s2 <= 1.0 + 1e-12 {
        Ok(())
    } else {
        Err(Error::Domain(format!("|s| = {} exceeds 1", s2.sqrt())))
    }
}

/// `n` draws of `W` for a single photon: `(1-|s|²) N(0, σ²) + |s|² Maxwell-sign`.
pub fn sample_w_single(n: usize, sigma: f64, s: f64, seed: u64) -> Result<SampleBatch> {
    let s2 = s * s;
    check_abs_s(s2)?;
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(generate(n, seed, Layout::Wave, |rng, row| {
        let u: f64 = rng.random();
        let t = if u < s2 { maxwell_sign(rng) } else { normal(rng) };
        row[0] = sigma * t;
    }))
}

/// Mixture decomposition of the joint single-photon amplitude density in
/// standardized coordinates `x_n = w_n / σ_n`:
/// `φ(x) [w₀ + Σ_k λ_k (e_k · x)²]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WwMixture {
    /// Weight `1 - Σ|s_n|²` of the product Gaussian.
    pub gaussian_weight: f64,
    /// `(λ_k, e_k)` for the rank ≤ 2 quadratic form.
    pub components: Vec<(f64, Vec<f64>)>,
}

impl WwMixture {
    pub fn weights(&self) -> Vec<f64> {
        std::iter::once(self.gaussian_weight)
            .chain(self.components.iter().map(|(l, _)| *l))
            .collect()
    }
}

/// Eigen-decomposes `Re(s) Re(s)ᵀ + Im(s) Im(s)ᵀ`.
pub fn ww_mixture(params: &[DetectorParams]) -> Result<WwMixture> {
    let m = params.len();
    if m < 2 {
        return Err(Error::Domain("joint wave sampling needs at least two detectors".into()));
    }
    let total: f64 = params.iter().map(|p| p.s_abs2()).sum();
    if total > 1.0 + FEASIBILITY_SLACK {
        return Err(Error::Infeasible(vec![format!(
            "sum |s_n|^2 <= 1 violated (value {total:.6})"
        )]));
    }
    let re: Vec<f64> = params.iter().map(|p| p.s.re).collect();
    let im: Vec<f64> = params.iter().map(|p| p.s.im).collect();
    let q = DMatrix::from_fn(m, m, |i, j| re[i] * re[j] + im[i] * im[j]);
    let eig = SymmetricEigen::new(q);
    let mut components = Vec::new();
    for k in 0..m {
        let l = eig.eigenvalues[k];
        if l > 1e-300 {
            components.push((l, eig.eigenvectors.column(k).iter().copied().collect()));
        }
    }
    // Σλ equals the trace Σ|s_n|²; tiny negative eigenvalues are rounding.
    let lambda: f64 = components.iter().map(|(l, _)| l).sum();
    Ok(WwMixture {
        gaussian_weight: (1.0 - lambda).max(0.0),
        components,
    })
}

/// `n` joint draws of `(W₁, …, W_M)` for a single photon.
pub fn sample_ww_single(n: usize, params: &[DetectorParams], seed: u64) -> Result<SampleBatch> {
    let mix = ww_mixture(params)?;
    let m = params.len();
    let sigmas: Vec<f64> = params.iter().map(|p| p.sigma).collect();
    let cumulative: Vec<f64> = mix
        .components
        .iter()
        .scan(mix.gaussian_weight, |acc, (l, _)| {
            *acc += l;
            Some(*acc)
        })
        .collect();
    Ok(generate(n, seed, Layout::WaveVector(m), |rng, row| {
        for x in row.iter_mut() {
            *x = normal(rng);
        }
        let u: f64 = rng.random();
        if u >= mix.gaussian_weight {
            let k = cumulative.iter().position(|&c| u < c).unwrap_or(cumulative.len() - 1);
            let e = &mix.components[k].1;
            // Replace the Gaussian coordinate along e by a Maxwell-sign draw.
            let along: f64 = row.iter().zip(e).map(|(x, e)| x * e).sum();
            let t = maxwell_sign(rng);
            for (x, e) in row.iter_mut().zip(e) {
                *x += (t - along) * e;
            }
        }
        for (x, s) in row.iter_mut().zip(&sigmas) {
            *x *= s;
        }
    }))
}

/// `n` joint draws of `(C₁, C₂)`; the outcome `(1, 1)` never occurs.
pub fn sample_cc_single(n: usize, p1: f64, p2: f64, seed: u64) -> Result<SampleBatch> {
    if !(0.0..=1.0).contains(&p1) || !(0.0..=1.0).contains(&p2) {
        return Err(Error::Domain(format!("P values must lie in [0, 1], got {p1}, {p2}")));
    }
    if p1 + p2 > 1.0 + FEASIBILITY_SLACK {
        return Err(Error::Infeasible(vec![format!(
            "P1 + P2 <= 1 violated (value {:.6})",
            p1 + p2
        )]));
    }
    Ok(generate(n, seed, Layout::CountPair, |rng, row| {
        let u: f64 = rng.random();
        let (c1, c2) = if u < p1 {
            (1.0, 0.0)
        } else if u < p1 + p2 {
            (0.0, 1.0)
        } else {
            (0.0, 0.0)
        };
        row[0] = c1;
        row[1] = c2;
    }))
}

/// Mixture weights of the wave–count sampler:
/// `[P, 1 - P - |s|², |s|²]` for (click, no-click Gaussian, no-click Maxwell).
pub fn wc_mixture(s: f64, p: f64) -> Result<[f64; 3]> {
    let s2 = s * s;
    check_abs_s(s2)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::Domain(format!("P must lie in [0, 1], got {p}")));
    }
    let slack = 1.0 - p - s2;
    if slack < -FEASIBILITY_SLACK {
        return Err(Error::Infeasible(vec![format!(
            "1 - P - |s|^2 >= 0 violated (value {slack:.6})"
        )]));
    }
    Ok([p, slack.max(0.0), s2])
}

/// `n` joint draws of `(W, C)`: a click with probability `P` leaves `W`
/// Gaussian; otherwise `W ~ g₀ / (1-P)`.
pub fn sample_wc_single(n: usize, sigma: f64, s: f64, p: f64, seed: u64) -> Result<SampleBatch> {
    let [pc, _, s2] = wc_mixture(s, p)?;
    if !(sigma > 0.0) {
        return Err(Error::Domain(format!("sigma must be positive, got {sigma}")));
    }
    Ok(generate(n, seed, Layout::WaveCount, |rng, row| {
        let u: f64 = rng.random();
        if u < pc {
            row[0] = sigma * normal(rng);
            row[1] = 1.0;
        } else {
            // Given no click, the Maxwell part has weight |s|² / (1 - P).
            let v: f64 = rng.random();
            let t = if v * (1.0 - pc) < s2 { maxwell_sign(rng) } else { normal(rng) };
            row[0] = sigma * t;
            row[1] = 0.0;
        }
    }))
}

/// Summary statistics of a batch.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EmpiricalStats {
    pub means: Vec<f64>,
    /// Pearson coefficient of the first two columns; `None` for one-column
    /// batches or when a column has zero variance.
    pub pearson: Option<f64>,
    /// True when a column had zero variance.
    pub degenerate: bool,
    /// Plug-in mutual information (nats) for wave–count batches.
    pub plugin_mi: Option<f64>,
    /// Kolmogorov–Smirnov distances `(column, D)` against supplied CDFs.
    pub ks: Vec<(usize, f64)>,
}

/// A reference CDF for one column.
pub type ColumnCdf<'a> = (usize, &'a (dyn Fn(f64) -> f64 + Sync));

/// Means, Pearson coefficient, plug-in MI and KS distances of a batch.
pub fn empirical_stats(batch: &SampleBatch, cdfs: &[ColumnCdf<'_>]) -> Result<EmpiricalStats> {
    if batch.count < 2 {
        return Err(Error::Domain("empirical statistics need at least two rows".into()));
    }
    let n = batch.count as f64;
    let means: Vec<f64> = batch.columns.iter().map(|c| c.iter().sum::<f64>() / n).collect();

    let (pearson, degenerate) = if batch.columns.len() >= 2 {
        match pearson(&batch.columns[0], &batch.columns[1]) {
            Some(r) => (Some(r), false),
            None => (None, true),
        }
    } else {
        let var = batch.columns[0].iter().map(|x| (x - means[0]).powi(2)).sum::<f64>();
        (None, var == 0.0)
    };

    let plugin_mi = match batch.layout {
        Layout::WaveCount => Some(plugin_mi_wc(&batch.columns[0], &batch.columns[1])),
        _ => None,
    };

    let mut ks = Vec::new();
    for (col, cdf) in cdfs {
        let column = batch
            .columns
            .get(*col)
            .ok_or_else(|| Error::Domain(format!("batch has no column {col}")))?;
        ks.push((*col, ks_distance(column, cdf)));
    }
    Ok(EmpiricalStats {
        means,
        pearson,
        degenerate,
        plugin_mi,
        ks,
    })
}

fn is_integral(xs: &[f64]) -> bool {
    xs.iter().all(|x| x.fract() == 0.0 && x.abs() < 1e15)
}

/// Sample Pearson coefficient; `None` if either column is constant.
pub fn pearson(x: &[f64], y: &[f64]) -> Option<f64> {
    let n = x.len() as f64;
    let (sxy, sxx, syy) = if is_integral(x) && is_integral(y) {
        // Integer sums are exact, so e.g. c₂ = 1 - c₁ gives exactly -1.
        let (sx, sy): (f64, f64) = (x.iter().sum(), y.iter().sum());
        let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
        let sxx: f64 = x.iter().map(|a| a * a).sum();
        let syy: f64 = y.iter().map(|b| b * b).sum();
        (n * sxy - sx * sy, n * sxx - sx * sx, n * syy - sy * sy)
    } else {
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let mut acc = (0.0, 0.0, 0.0);
        for (a, b) in x.iter().zip(y) {
            let (dx, dy) = (a - mx, b - my);
            acc.0 += dx * dy;
            acc.1 += dx * dx;
            acc.2 += dy * dy;
        }
        acc
    };
    if sxx <= 0.0 || syy <= 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

/// Plug-in `I(W; C)` with Freedman–Diaconis bins on the pooled `w` sample.
pub fn plugin_mi_wc(w: &[f64], c: &[f64]) -> f64 {
    let n = w.len();
    let mut sorted = w.to_vec();
    sorted.sort_by(f64::total_cmp);
    let (lo, hi) = (sorted[0], sorted[n - 1]);
    let iqr = quantile(&sorted, 0.75) - quantile(&sorted, 0.25);
    let width = 2.0 * iqr * (n as f64).powf(-1.0 / 3.0);
    let bins = if width > 0.0 && hi > lo {
        (((hi - lo) / width).ceil() as usize).max(1)
    } else {
        1
    };
    let mut counts = vec![[0usize; 2]; bins];
    for (&x, &k) in w.iter().zip(c) {
        let b = if bins == 1 {
            0
        } else {
            (((x - lo) / width) as usize).min(bins - 1)
        };
        counts[b][usize::from(k != 0.0)] += 1;
    }
    let nf = n as f64;
    let class = [
        counts.iter().map(|b| b[0]).sum::<usize>() as f64 / nf,
        counts.iter().map(|b| b[1]).sum::<usize>() as f64 / nf,
    ];
    let mut mi = 0.0;
    for b in &counts {
        let pb = (b[0] + b[1]) as f64 / nf;
        for k in 0..2 {
            if b[k] > 0 {
                let pj = b[k] as f64 / nf;
                mi += pj * (pj / (pb * class[k])).ln();
            }
        }
    }
    mi
}

/// Two-sided Kolmogorov–Smirnov distance between a sample and a CDF.
pub fn ks_distance(sample: &[f64], cdf: &(dyn Fn(f64) -> f64 + Sync)) -> f64 {
    let mut sorted = sample.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn batches_are_reproducible() {
        let a = sample_wc_single(40_000, 1.0, 0.5, 0.4, 7).unwrap();
        let b = sample_wc_single(40_000, 1.0, 0.5, 0.4, 7).unwrap();
        assert_eq!(a, b);
        let c = sample_wc_single(40_000, 1.0, 0.5, 0.4, 8).unwrap();
        assert_ne!(a.columns, c.columns);
    }

    #[test]
    fn results_do_not_depend_on_thread_count() {
        let one = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let four = rayon::ThreadPoolBuilder::new().num_threads(4).build().unwrap();
        let a = one.install(|| sample_w_single(100_000, 1.0, 0.6, 3).unwrap());
        let b = four.install(|| sample_w_single(100_000, 1.0, 0.6, 3).unwrap());
        assert_eq!(a, b);
    }

    #[test]
    fn empty_batch() {
        let b = sample_w_single(0, 1.0, 0.5, 1).unwrap();
        assert_eq!(b.count, 0);
        assert!(b.columns[0].is_empty());
        assert!(empirical_stats(&b, &[]).is_err());
    }

    #[test]
    fn domain_errors() {
        assert!(sample_w_single(10, 1.0, 1.2, 1).is_err());
        assert!(sample_cc_single(10, 0.6, 0.6, 1).is_err());
        assert!(sample_wc_single(10, 1.0, 0.8, 0.5, 1).is_err());
        let p = DetectorParams::real(1.0, 0.75, 0.0).unwrap();
        assert!(sample_ww_single(10, &[p, p], 1).is_err());
    }

    #[test]
    fn csv_layout() {
        let b = sample_wc_single(3, 1.0, 0.5, 0.5, 11).unwrap();
        let mut out = Vec::new();
        b.write_csv(&mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "w,c");
        assert_eq!(lines.len(), 4);
        for l in &lines[1..] {
            let (w, c) = l.split_once(',').unwrap();
            let parsed: f64 = w.parse().unwrap();
            assert!(parsed.is_finite());
            assert!(c == "0" || c == "1");
            // 17 significant digits
            assert_eq!(w.trim_start_matches('-').split('e').next().unwrap().len(), 18);
        }
    }

    #[test]
    fn anticorrelated_counts_give_exact_minus_one() {
        let b = sample_cc_single(10_001, 0.5, 0.5, 5).unwrap();
        let st = empirical_stats(&b, &[]).unwrap();
        assert_eq!(st.pearson, Some(-1.0));
        assert!(b.columns[0].iter().zip(&b.columns[1]).all(|(a, c)| a + c == 1.0));
    }

    #[test]
    fn degenerate_variance_is_flagged() {
        let b = sample_wc_single(1000, 1.0, 0.0, 1.0, 2).unwrap();
        assert!(b.columns[1].iter().all(|&c| c == 1.0));
        let st = empirical_stats(&b, &[]).unwrap();
        assert!(st.degenerate && st.pearson.is_none());
    }

    #[test]
    fn ks_distance_of_exact_quantiles_is_small() {
        let n = 1000;
        let sample: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
        let d = ks_distance(&sample, &|x: f64| x.clamp(0.0, 1.0));
        assert!((d - 0.5 / n as f64).abs() < 1e-12);
    }
}
