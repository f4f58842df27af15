use proptest::prelude::*;

use whitenoise::chaos::wick_exp_sample;
use whitenoise::hermite::hermite_functions;
use whitenoise::linalg::PivotedCholesky;
use whitenoise::localtime::LevelGrid;
use whitenoise::procmodel::ProcessModel;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hermite_functions_are_uniformly_bounded(x in -40.0f64..40.0) {
        let mut e = vec![0.0; 200];
        hermite_functions(x, &mut e);
        let bound = std::f64::consts::PI.powf(-0.25) + 1e-12;
        prop_assert!(e.iter().all(|v| v.abs() <= bound));
    }

    #[test]
    fn single_precision_tracks_double(x in -6.0f64..6.0) {
        let mut e64 = vec![0.0f64; 24];
        let mut e32 = vec![0.0f32; 24];
        hermite_functions(x, &mut e64);
        hermite_functions(x as f32, &mut e32);
        for (a, b) in e64.iter().zip(&e32) {
            prop_assert!((a - *b as f64).abs() < 1e-4);
        }
    }

    #[test]
    fn fbm_covariance_is_a_covariance(h in 0.1f64..0.9, t in 0.01f64..2.0, s in 0.01f64..2.0) {
        let m = ProcessModel::fbm(h, 8).unwrap();
        let c = m.covariance(t, s).unwrap();
        prop_assert!((c - m.covariance(s, t).unwrap()).abs() < 1e-14);
        let bound = (m.variance(t).unwrap() * m.variance(s).unwrap()).sqrt();
        prop_assert!(c.abs() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn captured_variance_obeys_bessel(h in 0.2f64..0.8, t in 0.05f64..1.5) {
        let m = ProcessModel::fbm(h, 24).unwrap();
        let captured: f64 = m.coeffs(t).unwrap().iter().map(|c| c * c).sum();
        prop_assert!(captured <= m.variance(t).unwrap() + 1e-9);
    }

    #[test]
    fn bins_contain_their_points(x in -3.0f64..3.0, h in 0.01f64..0.5) {
        let g = LevelGrid::covering(0.0, h, -3.0, 3.0).unwrap();
        let j = g.bin_of(x).unwrap();
        prop_assert!((x - g.centers[j]).abs() <= h * (1.0 + 1e-12));
    }

    #[test]
    fn wick_exponential_closed_form(c in -1.0f64..1.0, m in prop::collection::vec(-1.0f64..1.0, 1..8), seed in 0u64..1000) {
        let z = whitenoise::simulate::gaussian_draws(seed, 0, m.len());
        let lin: f64 = m.iter().zip(&z).map(|(a, b)| a * b).sum();
        let var: f64 = m.iter().map(|a| a * a).sum();
        let expected = (c + lin - 0.5 * var).exp();
        prop_assert!((wick_exp_sample(c, &m, &z) - expected).abs() < 1e-12 * expected.max(1.0));
    }

    #[test]
    fn cholesky_reconstructs_gram(v in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 2..7)) {
        let n = v.len();
        let a: Vec<Vec<f64>> = (0..n)
            .map(|i| (0..n).map(|j| v[i].iter().zip(&v[j]).map(|(x, y)| x * y).sum()).collect())
            .collect();
        let c = PivotedCholesky::new(&a, 1e-14).unwrap();
        prop_assert!(c.rank <= 3);
        for i in 0..n {
            for j in 0..n {
                let r: f64 = (0..c.rank).map(|k| c.factor[i][k] * c.factor[j][k]).sum();
                prop_assert!((r - a[i][j]).abs() < 1e-9 * (1.0 + a[i][i].max(a[j][j])));
            }
        }
    }
}
