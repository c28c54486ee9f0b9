use proptest::prelude::*;
use wavepart::dists::{
    moments_and_corr, CountPmf, Distribution, JointCountPmf, JointWavePdf, MixedJointPdf, State, WavePdf,
};
use wavepart::info::{discrete_entropy_c, mutual_info_cc, mutual_info_wc, mutual_info_wc_decomposed};
use wavepart::model::{validate_experiment, DetectorParams, ExperimentMode};
use wavepart::sampler::{wc_mixture, ww_mixture};
use wavepart::Complex64;

fn trapezoid(l: f64, h: f64, f: impl Fn(f64) -> f64) -> f64 {
    let n = (2.0 * l / h).round() as i64;
    (0..=n).map(|i| f(-l + i as f64 * h)).sum::<f64>() * h
}

/// `(s, P)` inside the feasible region `s² + P ≤ 1`.
fn feasible_sp() -> impl Strategy<Value = (f64, f64)> {
    (0.0..=1.0f64, 0.0..=1.0f64).prop_map(|(s, u)| (s, u * (1.0 - s * s)))
}

fn complex_in_disc(r_max: f64) -> impl Strategy<Value = Complex64> {
    (0.0..=r_max, 0.0..std::f64::consts::TAU).prop_map(|(r, t)| Complex64::from_polar(r, t))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn wave_pdf_is_normalized_nonnegative_and_dips(sigma in 0.05..20.0f64, s in complex_in_disc(1.0), w in -6.0..6.0f64) {
        let pdf = WavePdf::new(State::SinglePhoton, sigma, s).unwrap();
        let vac = WavePdf::vacuum(sigma).unwrap();
        let total = trapezoid(16.0 * sigma, 0.05 * sigma, |x| pdf.density(x));
        prop_assert!((total - 1.0).abs() < 1e-9);
        prop_assert!(pdf.density(w * sigma) >= 0.0);
        prop_assert!((pdf.density(0.0) - vac.density(0.0) * (1.0 - s.norm_sqr())).abs() < 1e-12 * vac.density(0.0));
        prop_assert!((pdf.density(sigma) - vac.density(sigma)).abs() <= 1e-15 * vac.density(sigma));
        let c = pdf.cdf(w * sigma);
        prop_assert!((0.0..=1.0).contains(&c));
    }

    #[test]
    fn wave_cdf_is_monotone(sigma in 0.1..5.0f64, s in 0.0..=1.0f64, a in -8.0..8.0f64, d in 0.0..3.0f64) {
        let pdf = WavePdf::single(sigma, s).unwrap();
        prop_assert!(pdf.cdf(a * sigma) <= pdf.cdf((a + d) * sigma) + 1e-15);
    }

    #[test]
    fn mixed_law_marginalizes((s, p) in feasible_sp(), sigma in 0.1..5.0f64, w in -5.0..5.0f64) {
        let joint = MixedJointPdf::single(sigma, s, p).unwrap();
        let x = w * sigma;
        let g0 = joint.density(x, 0).unwrap();
        let g1 = joint.density(x, 1).unwrap();
        prop_assert!(g0 >= 0.0 && g1 >= 0.0);
        let marginal = WavePdf::single(sigma, s).unwrap().density(x);
        prop_assert!((g0 + g1 - marginal).abs() <= 1e-14 * marginal.max(1e-300));
        let total1 = trapezoid(16.0 * sigma, 0.05 * sigma, |y| joint.density(y, 1).unwrap());
        prop_assert!((total1 - p).abs() < 1e-9);
    }

    #[test]
    fn joint_wave_law_is_normalized(s1 in complex_in_disc(0.7), s2 in complex_in_disc(0.7), sig1 in 0.2..3.0f64, sig2 in 0.2..3.0f64) {
        prop_assume!(s1.norm_sqr() + s2.norm_sqr() <= 1.0);
        let joint = JointWavePdf::new(State::SinglePhoton, vec![sig1, sig2], vec![s1, s2]).unwrap();
        let (h1, h2) = (0.12 * sig1, 0.12 * sig2);
        let (l1, l2) = (13.0 * sig1, 13.0 * sig2);
        let mut total = 0.0;
        let n1 = (2.0 * l1 / h1).round() as i64;
        let n2 = (2.0 * l2 / h2).round() as i64;
        for i in 0..=n1 {
            for j in 0..=n2 {
                let d = joint.density(&[-l1 + i as f64 * h1, -l2 + j as f64 * h2]).unwrap();
                prop_assert!(d >= -1e-15);
                total += d;
            }
        }
        prop_assert!((total * h1 * h2 - 1.0).abs() < 1e-9);
    }

    #[test]
    fn ww_correlation_bounded_by_half_when_symmetric(s2 in 0.0..=0.5f64, sigma in 0.1..10.0f64) {
        let joint = JointWavePdf::symmetric(sigma, s2.sqrt()).unwrap();
        let r = moments_and_corr(&Distribution::WaveWave(joint)).pearson.value().unwrap();
        prop_assert!((r - 2.0 * s2 / (1.0 + 2.0 * s2)).abs() < 1e-14);
        prop_assert!(r <= 0.5 + 1e-15);
    }

    #[test]
    fn count_laws_sum_to_one(p1 in 0.0..=1.0f64, u in 0.0..=1.0f64) {
        let p2 = u * (1.0 - p1);
        let joint = JointCountPmf::new(State::SinglePhoton, vec![p1, p2]).unwrap();
        let total: f64 = joint.masses().iter().map(|m| m.1).sum();
        prop_assert!((total - 1.0).abs() < 1e-15);
        prop_assert!(joint.masses().iter().all(|m| m.1 >= 0.0));
        prop_assert_eq!(joint.mass(&[1, 1]).unwrap(), 0.0);
        let single = CountPmf::new(State::SinglePhoton, p1).unwrap();
        prop_assert!((joint.marginal(0).mass(1).unwrap() - single.mass(1).unwrap()).abs() < 1e-15);
    }

    #[test]
    fn wave_count_mi_is_bounded((s, p) in feasible_sp()) {
        let i = mutual_info_wc(s, p).unwrap();
        prop_assert!(i >= -1e-10);
        prop_assert!(i <= discrete_entropy_c(p).unwrap() + 1e-10);
        prop_assert!((mutual_info_wc(-s, p).unwrap() - i).abs() < 1e-12);
    }

    #[test]
    fn mi_routes_agree((s, p) in feasible_sp(), sigma in 0.2..5.0f64) {
        let kl = mutual_info_wc(s, p).unwrap();
        let decomposed = mutual_info_wc_decomposed(sigma, s, p).unwrap();
        prop_assert!((kl - decomposed).abs() < 1e-9, "kl {} vs decomposed {}", kl, decomposed);
    }

    #[test]
    fn count_count_mi_is_bounded(p1 in 0.0..=1.0f64, u in 0.0..=1.0f64) {
        let p2 = u * (1.0 - p1);
        let i = mutual_info_cc(p1, p2).unwrap();
        prop_assert!(i >= 0.0 && i <= std::f64::consts::LN_2 + 1e-12);
    }

    #[test]
    fn sampler_mixture_weights_are_a_distribution((s, p) in feasible_sp()) {
        let w = wc_mixture(s, p).unwrap();
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn ww_mixture_weights_are_a_distribution(s1 in complex_in_disc(0.7), s2 in complex_in_disc(0.7)) {
        prop_assume!(s1.norm_sqr() + s2.norm_sqr() <= 1.0);
        let p = [DetectorParams::new(1.0, s1, 0.0).unwrap(), DetectorParams::new(2.0, s2, 0.0).unwrap()];
        let w = ww_mixture(&p).unwrap().weights();
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn feasibility_check_matches_constraint(s in 0.0..=1.0f64, p in 0.0..=1.0f64) {
        let params = [DetectorParams::real(1.0, s, 0.0).unwrap(), DetectorParams::real(1.0, 0.0, p).unwrap()];
        let report = validate_experiment(&params, ExperimentMode::WaveCount).unwrap();
        prop_assert_eq!(report.is_ok(), 1.0 - p - s * s >= -1e-12);
        prop_assert_eq!(MixedJointPdf::single(1.0, s, p).is_ok(), report.is_ok());
    }
}
