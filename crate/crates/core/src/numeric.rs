//! Quadrature rules and small optimizers shared by the other modules.

use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};

/// Nodes and weights of an n-point Gauss rule.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussRule {
    /// Gauss–Legendre rule on [-1, 1].
    pub fn legendre(n: usize) -> GaussRule {
        assert!(n >= 1, "Gauss–Legendre rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        for i in 0..m {
            let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre_with_derivative(n, x);
            if d != 0.0 {
                dp = d;
            }
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    /// Gauss–Hermite rule for the weight `exp(-x²)` on the real line.
    pub fn hermite(n: usize) -> GaussRule {
        assert!(n >= 1, "Gauss–Hermite rule needs at least one node");
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        let m = n.div_ceil(2);
        let nf = n as f64;
        let mut z = 0.0_f64;
        for i in 0..m {
            // Initial guesses follow the asymptotic spacing of Hermite roots.
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * nodes[n - 1],
                3 => 1.91 * z - 0.91 * nodes[n - 2],
                _ => 2.0 * z - nodes[n - i + 1],
            };
            let mut pp = 0.0;
            for _ in 0..200 {
                let (p, d) = hermite_orthonormal_with_derivative(n, z);
                pp = d;
                let dz = p / d;
                z -= dz;
                if dz.abs() < 1e-15 * z.abs().max(1.0) {
                    break;
                }
            }
            let (_, d) = hermite_orthonormal_with_derivative(n, z);
            if d != 0.0 {
                pp = d;
            }
            nodes[n - 1 - i] = z;
            nodes[i] = -z;
            let w = 2.0 / (pp * pp);
            weights[n - 1 - i] = w;
            weights[i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        GaussRule { nodes, weights }
    }

    /// Integrates `f` over [a, b] with this (Legendre) rule mapped affinely.
    pub fn integrate<T, F>(&self, a: f64, b: f64, mut f: F) -> T
    where
        T: std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T> + Default,
        F: FnMut(f64) -> T,
    {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        let mut acc = T::default();
        for (x, w) in self.nodes.iter().zip(&self.weights) {
            acc = acc + f(mid + half * x) * (w * half);
        }
        acc
    }
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

// Orthonormal Hermite recurrence; avoids overflow for large n.
fn hermite_orthonormal_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let pim4 = PI.powf(-0.25);
    let mut p1 = pim4;
    let mut p2 = 0.0;
    for j in 0..n {
        let p3 = p2;
        p2 = p1;
        let jf = j as f64;
        p1 = x * (2.0 / (jf + 1.0)).sqrt() * p2 - (jf / (jf + 1.0)).sqrt() * p3;
    }
    let d = (2.0 * n as f64).sqrt() * p2;
    (p1, d)
}

/// Expectation of `g(Z)` for `Z ~ N(0, sigma²)` by Gauss–Hermite quadrature.
pub fn gaussian_expectation<F: FnMut(f64) -> f64>(rule: &GaussRule, sigma: f64, mut g: F) -> f64 {
    let scale = std::f64::consts::SQRT_2 * sigma;
    let norm = 1.0 / PI.sqrt();
    rule.nodes
        .iter()
        .zip(&rule.weights)
        .map(|(x, w)| w * norm * g(scale * x))
        .sum()
}

const GK_NODES: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const GK_WEIGHTS: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const G7_WEIGHTS: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod15<F: FnMut(f64) -> f64>(f: &mut F, a: f64, b: f64) -> Panel {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let fc = f(mid);
    let mut kronrod = fc * GK_WEIGHTS[7];
    let mut gauss = fc * G7_WEIGHTS[3];
    for j in 0..7 {
        let dx = half * GK_NODES[j];
        let s = f(mid - dx) + f(mid + dx);
        kronrod += GK_WEIGHTS[j] * s;
        if j % 2 == 1 {
            gauss += G7_WEIGHTS[j / 2] * s;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Settings for [`adaptive_integrate`].
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_panels: usize,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        AdaptiveOptions {
            abs_tol: 1e-13,
            rel_tol: 1e-12,
            max_panels: 4000,
        }
    }
}

/// Globally adaptive Gauss–Kronrod (7/15) integration of `f` over the
/// panels delimited by `breakpoints` (sorted, at least two entries).
///
/// Returns the value and the final error estimate.
pub fn adaptive_integrate<F: FnMut(f64) -> f64>(
    mut f: F,
    breakpoints: &[f64],
    opts: AdaptiveOptions,
) -> Result<(f64, f64)> {
    assert!(breakpoints.len() >= 2, "need an integration interval");
    let mut heap = BinaryHeap::new();
    for w in breakpoints.windows(2) {
        if w[1] > w[0] {
            heap.push(kronrod15(&mut f, w[0], w[1]));
        }
    }
    loop {
        let (value, error): (f64, f64) = heap
            .iter()
            .fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
        let target = opts.abs_tol.max(opts.rel_tol * value.abs());
        if error <= target {
            return Ok((value, error));
        }
        if heap.len() >= opts.max_panels {
            return Err(Error::IntegralNotConverged {
                tolerance: target,
                estimate: error,
            });
        }
        let worst = heap.pop().expect("nonempty panel heap");
        let mid = 0.5 * (worst.a + worst.b);
        if mid <= worst.a || mid >= worst.b {
            // Panel cannot be split further in floating point.
            return Err(Error::IntegralNotConverged {
                tolerance: target,
                estimate: error,
            });
        }
        heap.push(kronrod15(&mut f, worst.a, mid));
        heap.push(kronrod15(&mut f, mid, worst.b));
    }
}

/// Golden-section maximization of a unimodal function on [a, b].
pub fn golden_section_max<F: FnMut(f64) -> f64>(mut f: F, mut a: f64, mut b: f64, tol: f64) -> (f64, f64) {
    let inv_phi = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc > fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

/// Nelder–Mead maximization in two dimensions. Infeasible points should
/// evaluate to `f64::NEG_INFINITY`.
pub fn nelder_mead_max<F: FnMut([f64; 2]) -> f64>(
    mut f: F,
    start: [f64; 2],
    step: f64,
    tol: f64,
    max_iter: usize,
) -> ([f64; 2], f64) {
    let mut simplex = [
        start,
        [start[0] + step, start[1]],
        [start[0], start[1] + step],
    ];
    let mut values = simplex.map(&mut f);
    for _ in 0..max_iter {
        // Sort descending: best first.
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|&i, &j| values[j].total_cmp(&values[i]));
        simplex = idx.map(|i| simplex[i]);
        values = idx.map(|i| values[i]);
        if (values[0] - values[2]).abs() < tol && spread(&simplex) < tol.sqrt() {
            break;
        }
        let centroid = [
            0.5 * (simplex[0][0] + simplex[1][0]),
            0.5 * (simplex[0][1] + simplex[1][1]),
        ];
        let along = |t: f64| {
            [
                centroid[0] + t * (simplex[2][0] - centroid[0]),
                centroid[1] + t * (simplex[2][1] - centroid[1]),
            ]
        };
        let reflected = along(-1.0);
        let fr = f(reflected);
        if fr > values[0] {
            let expanded = along(-2.0);
            let fe = f(expanded);
            if fe > fr {
                simplex[2] = expanded;
                values[2] = fe;
            } else {
                simplex[2] = reflected;
                values[2] = fr;
            }
        } else if fr > values[1] {
            simplex[2] = reflected;
            values[2] = fr;
        } else {
            let contracted = along(0.5);
            let fk = f(contracted);
            if fk > values[2] {
                simplex[2] = contracted;
                values[2] = fk;
            } else {
                for k in 1..3 {
                    simplex[k] = [
                        0.5 * (simplex[0][0] + simplex[k][0]),
                        0.5 * (simplex[0][1] + simplex[k][1]),
                    ];
                    values[k] = f(simplex[k]);
                }
            }
        }
    }
    let best = (0..3).max_by(|&i, &j| values[i].total_cmp(&values[j])).unwrap();
    (simplex[best], values[best])
}

fn spread(simplex: &[[f64; 2]; 3]) -> f64 {
    let mut m: f64 = 0.0;
    for k in 1..3 {
        m = m.max((simplex[k][0] - simplex[0][0]).abs());
        m = m.max((simplex[k][1] - simplex[0][1]).abs());
    }
    m
}

/// `x ln x` with the convention `0 ln 0 = 0`; arguments below 1e-300 count as zero.
pub fn xlnx(x: f64) -> f64 {
    if x < 1e-300 {
        0.0
    } else {
        x * x.ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let rule = GaussRule::legendre(5);
        // degree 9 is the highest exact degree for 5 nodes
        let v: f64 = rule.integrate(-1.0, 2.0, |x| x.powi(9) + 3.0 * x * x);
        let exact = (2f64.powi(10) - 1.0) / 10.0 + (8.0 + 1.0);
        assert!((v - exact).abs() < 1e-11, "{v} vs {exact}");
        let total: f64 = GaussRule::legendre(96).weights.iter().sum();
        assert!((total - 2.0).abs() < 1e-13);
    }

    #[test]
    fn hermite_moments_match_gaussian() {
        let rule = GaussRule::hermite(64);
        for (k, exact) in [(0, 1.0), (2, 4.0), (4, 3.0 * 16.0), (6, 15.0 * 64.0)] {
            let m = gaussian_expectation(&rule, 2.0, |w| w.powi(k));
            assert!((m - exact).abs() < 1e-10 * exact, "k={k}: {m}");
        }
        let odd = gaussian_expectation(&rule, 1.0, |w| w.powi(5));
        assert!(odd.abs() < 1e-12);
    }

    #[test]
    fn hermite_small_rules() {
        let r = GaussRule::hermite(2);
        assert!((r.nodes[1] - 0.5f64.sqrt()).abs() < 1e-14);
        assert!((r.weights[0] - PI.sqrt() / 2.0).abs() < 1e-14);
        let r3 = GaussRule::hermite(3);
        assert!(r3.nodes[1].abs() < 1e-15);
        assert!((r3.nodes[2] - 1.5f64.sqrt()).abs() < 1e-14);
    }

    #[test]
    fn adaptive_handles_log_singularity() {
        // ∫_0^1 x ln x dx = -1/4
        let (v, _) = adaptive_integrate(xlnx, &[0.0, 1.0], AdaptiveOptions::default()).unwrap();
        assert!((v + 0.25).abs() < 1e-12);
        // ∫ exp(-x²) over a wide window
        let (g, _) = adaptive_integrate(|x| (-x * x).exp(), &[-10.0, 0.0, 10.0], AdaptiveOptions::default()).unwrap();
        assert!((g - PI.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn adaptive_reports_non_convergence() {
        let opts = AdaptiveOptions {
            abs_tol: 1e-15,
            rel_tol: 0.0,
            max_panels: 3,
        };
        let r = adaptive_integrate(|x: f64| (50.0 * x).sin().abs(), &[0.0, 10.0], opts);
        assert!(matches!(r, Err(Error::IntegralNotConverged { .. })));
    }

    #[test]
    fn optimizers_find_quadratic_peaks() {
        let (x, fx) = golden_section_max(|x| -(x - 0.3) * (x - 0.3) + 1.0, 0.0, 1.0, 1e-9);
        assert!((x - 0.3).abs() < 1e-8 && (fx - 1.0).abs() < 1e-12);
        let (p, _) = nelder_mead_max(
            |[a, b]| -(a - 1.0).powi(2) - 2.0 * (b + 0.5).powi(2),
            [0.0, 0.0],
            0.2,
            1e-14,
            500,
        );
        assert!((p[0] - 1.0).abs() < 1e-5 && (p[1] + 0.5).abs() < 1e-5);
    }
}
