use wavepart::dists::{gaussian_pdf, JointWavePdf, State, WavePdf};
use wavepart::model::DetectorParams;
use wavepart::sampler::{
    empirical_stats, ks_distance, sample_cc_single, sample_w_single, sample_wc_single, sample_ww_single,
};
use wavepart::Complex64;

const N: usize = 200_000;

/// KS critical value at the 0.1% level.
fn ks_critical(n: usize) -> f64 {
    1.95 / (n as f64).sqrt()
}

fn std_normal_cdf(t: f64) -> f64 {
    // Composite Simpson on the density, independent of the library's CDF.
    let (a, n) = (-10.0, 4_000);
    if t <= a {
        return 0.0;
    }
    let h = (t - a) / n as f64;
    let f = |x: f64| gaussian_pdf(1.0, x);
    let mut sum = f(a) + f(t);
    for k in 1..n {
        sum += f(a + k as f64 * h) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

#[test]
fn single_wave_samples_follow_the_dip_law() {
    for (sigma, s) in [(1.0, 0.0), (0.7, 0.5), (2.0, 1.0)] {
        let batch = sample_w_single(N, sigma, s, 11).unwrap();
        let pdf = WavePdf::single(sigma, s).unwrap();
        let cdf = |w: f64| pdf.cdf(w);
        let d = ks_distance(&batch.columns[0], &cdf);
        assert!(d < ks_critical(N), "sigma {sigma}, s {s}: D = {d}");
        let m2 = batch.columns[0].iter().map(|w| w * w).sum::<f64>() / N as f64;
        assert!((m2 / pdf.second_moment() - 1.0).abs() < 0.02);
    }
}

#[test]
fn library_cdf_matches_independent_quadrature() {
    let (sigma, s) = (1.3, 0.8);
    let pdf = WavePdf::single(sigma, s).unwrap();
    for t in [-3.0, -1.0, -0.2, 0.0, 0.4, 1.0, 2.5] {
        let reference = std_normal_cdf(t) - s * s * t * gaussian_pdf(1.0, t);
        assert!((pdf.cdf(t * sigma) - reference).abs() < 1e-10);
    }
}

#[test]
fn wave_wave_samples_reproduce_covariance() {
    let params = [
        DetectorParams::real(1.0, 0.6, 0.0).unwrap(),
        DetectorParams::new(1.5, Complex64::new(0.3, 0.4), 0.0).unwrap(),
    ];
    let batch = sample_ww_single(N, &params, 5).unwrap();
    let joint = JointWavePdf::from_params(State::SinglePhoton, &params).unwrap();
    let (w1, w2) = (&batch.columns[0], &batch.columns[1]);
    let n = N as f64;
    let cov = w1.iter().zip(w2).map(|(a, b)| a * b).sum::<f64>() / n;
    let v1 = w1.iter().map(|a| a * a).sum::<f64>() / n;
    let v2 = w2.iter().map(|b| b * b).sum::<f64>() / n;
    let scale = (joint.covariance(0, 0) * joint.covariance(1, 1)).sqrt();
    assert!((cov - joint.covariance(0, 1)).abs() < 0.02 * scale);
    assert!((v1 / joint.covariance(0, 0) - 1.0).abs() < 0.02);
    assert!((v2 / joint.covariance(1, 1) - 1.0).abs() < 0.02);

    for (i, p) in params.iter().enumerate() {
        let marginal = joint.marginal(i);
        let cdf = |w: f64| marginal.cdf(w);
        let d = ks_distance(&batch.columns[i], &cdf);
        assert!(d < ks_critical(N), "detector {i}: D = {d} (sigma {})", p.sigma);
    }
}

#[test]
fn count_count_samples_are_exclusive() {
    let batch = sample_cc_single(N, 0.3, 0.45, 9).unwrap();
    let (c1, c2) = (&batch.columns[0], &batch.columns[1]);
    assert!(c1.iter().zip(c2).all(|(a, b)| a * b == 0.0));
    let f1 = c1.iter().sum::<f64>() / N as f64;
    let f2 = c2.iter().sum::<f64>() / N as f64;
    let tol = 4.0 * (0.25 / N as f64).sqrt();
    assert!((f1 - 0.3).abs() < tol && (f2 - 0.45).abs() < tol);
}

#[test]
fn wave_count_samples_match_conditional_laws() {
    let (sigma, s, p) = (1.0, 0.6, 0.4);
    let batch = sample_wc_single(N, sigma, s, p, 21).unwrap();
    let (w, c) = (&batch.columns[0], &batch.columns[1]);

    // Given a click the wave detector sees vacuum statistics.
    let clicked: Vec<f64> = w.iter().zip(c).filter(|(_, &k)| k == 1.0).map(|(x, _)| *x).collect();
    let gauss = |x: f64| std_normal_cdf(x / sigma);
    assert!(ks_distance(&clicked, &gauss) < ks_critical(clicked.len()));

    let pdf = WavePdf::single(sigma, s).unwrap();
    let cdf = |x: f64| pdf.cdf(x);
    let stats = empirical_stats(&batch, &[(0, &cdf)]).unwrap();
    assert!(stats.ks[0].1 < ks_critical(N));
    assert!((stats.means[1] - p).abs() < 4.0 * (p * (1.0 - p) / N as f64).sqrt());
    assert!(stats.pearson.unwrap().abs() < 4.0 / (N as f64).sqrt());
}
