use whitenoise::procmodel::ProcessModel;
use whitenoise::simulate::{gaussian_draws, max_relative_defect, sample_paths, truncation_defect, GridSpec, Sampler, Spacing};

#[test]
fn same_seed_same_paths() {
    let m = ProcessModel::fbm(0.7, 32).unwrap();
    let g = GridSpec::uniform(1.0, 64);
    for sampler in [Sampler::Hermite, Sampler::Cholesky] {
        let a = sample_paths(&m, &g, 8, 3, sampler).unwrap();
        let b = sample_paths(&m, &g, 8, 3, sampler).unwrap();
        let c = sample_paths(&m, &g, 8, 4, sampler).unwrap();
        assert_eq!(a.paths, b.paths);
        assert_ne!(a.paths, c.paths);
    }
    assert_eq!(gaussian_draws(1, 5, 10), gaussian_draws(1, 5, 10));
    assert_ne!(gaussian_draws(1, 5, 10), gaussian_draws(1, 6, 10));
}

#[test]
fn hermite_paths_have_truncated_covariance() {
    let m = ProcessModel::fbm(0.3, 48).unwrap();
    let ens = sample_paths(&m, &GridSpec::uniform(1.0, 8), 20_000, 11, Sampler::Hermite).unwrap();
    for (i, j) in [(8, 8), (4, 8), (2, 6)] {
        let exact = ens.cov(i, j);
        let sample = ens.sample_cov(i, j);
        // the sample covariance of Gaussians has stderr about √(2/M)·R
        assert!(
            (sample - exact).abs() < 5.0 * (2.0f64 / 20_000.0).sqrt() * exact.abs().max(0.1),
            "({i},{j}): {sample} vs {exact}"
        );
    }
    let coords = ens.coords.as_ref().unwrap();
    let z = &coords[3];
    let table = m.coeffs(ens.grid[5]).unwrap();
    let value: f64 = table.iter().zip(z).map(|(c, z)| c * z).sum();
    assert!((value - ens.paths[3][5]).abs() < 1e-12);
}

#[test]
fn cholesky_bridge_is_pinned() {
    let m = ProcessModel::bridge(16).unwrap();
    let ens = sample_paths(&m, &GridSpec::uniform(1.0, 50), 100, 2, Sampler::Cholesky).unwrap();
    for p in &ens.paths {
        assert_eq!(p[0], 0.0);
        assert!(p[50].abs() < 1e-6);
    }
}

#[test]
fn coarsening_keeps_every_stride_point() {
    let m = ProcessModel::bm(16).unwrap();
    let ens = sample_paths(&m, &GridSpec::uniform(2.0, 32), 4, 9, Sampler::Cholesky).unwrap();
    let c = ens.coarsen(4).unwrap();
    assert_eq!(c.steps(), 8);
    assert_eq!(c.horizon(), 2.0);
    for (p, q) in ens.paths.iter().zip(&c.paths) {
        for (i, v) in q.iter().enumerate() {
            assert_eq!(*v, p[4 * i]);
        }
    }
    assert_eq!(c.cov(3, 5), ens.cov(12, 20));
    assert!(ens.coarsen(5).is_err());
}

#[test]
fn refined_grid_clusters_at_start() {
    let g = GridSpec {
        start: 0.0,
        horizon: 1.0,
        steps: 10,
        spacing: Spacing::RefinedAtStart { power: 2.0 },
    };
    let t = g.times().unwrap();
    assert_eq!(t[0], 0.0);
    assert_eq!(t[10], 1.0);
    assert!((t[1] - 0.01).abs() < 1e-15);
    let bad = GridSpec {
        spacing: Spacing::RefinedAtStart { power: 0.5 },
        ..g
    };
    assert!(bad.times().is_err());
}

#[test]
fn defects_are_non_negative_and_shrink() {
    let m = ProcessModel::fbm(0.7, 16).unwrap();
    let g = GridSpec::uniform(1.0, 4);
    let coarse = truncation_defect(&m, &g, 16).unwrap();
    let fine = truncation_defect(&m, &g, 64).unwrap();
    assert!(coarse.iter().all(|r| r.defect >= 0.0));
    assert!(max_relative_defect(&fine) < max_relative_defect(&coarse));
}

#[test]
fn csv_layout() {
    let m = ProcessModel::bm(8).unwrap();
    let ens = sample_paths(&m, &GridSpec::uniform(1.0, 2), 2, 1, Sampler::Hermite).unwrap();
    let mut out = Vec::new();
    ens.write_csv(&mut out).unwrap();
    let text = String::from_utf8(out).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "path_id,t,value");
    assert_eq!(lines.len(), 1 + 2 * 3);
    assert!(lines[4].starts_with("1,0,"));
    let mut coords = Vec::new();
    ens.write_coords_csv(&mut coords).unwrap();
    assert!(String::from_utf8(coords).unwrap().starts_with("path_id,k,z"));
}
