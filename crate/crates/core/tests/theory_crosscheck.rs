use fpu_lyapunov::integrator::IntegratorConfig;
use fpu_lyapunov::model::{ModelSpec, Preset};
use fpu_lyapunov::sampler::{sample_state, SamplerConfig};
use fpu_lyapunov::theory::{
    asymptotic_chi, constrained_gaussian_stats, curvature_stats_timeavg, van_kampen_chi, ConstrainedGaussian,
};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

/// Mean and standard error of a sample.
fn mean_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

#[test]
fn constrained_strains_have_the_projected_covariance() {
    let (n, eps, draws) = (8usize, 1e-3, 200_000);
    let measure = ConstrainedGaussian::new(eps).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let mut r = vec![0.0; n];
    let mut prods: Vec<Vec<f64>> = (0..n * n).map(|_| Vec::with_capacity(draws)).collect();
    let mut odd: Vec<Vec<f64>> = (0..4).map(|_| Vec::with_capacity(draws)).collect();
    for _ in 0..draws {
        measure.fill(&mut rng, &mut r);
        assert!(r.iter().sum::<f64>().abs() < 1e-15);
        for i in 0..n {
            for j in 0..n {
                prods[i * n + j].push(r[i] * r[j]);
            }
        }
        // m + n odd: r_0, r_0^3, r_0^2 r_1, r_0 r_1^2 r_2^2
        odd[0].push(r[0]);
        odd[1].push(r[0].powi(3));
        odd[2].push(r[0] * r[0] * r[1]);
        odd[3].push(r[0] * r[1] * r[1] * r[2] * r[2]);
    }
    for i in 0..n {
        for j in 0..n {
            let want = eps * (f64::from(u8::from(i == j)) - 1.0 / n as f64);
            let (m, se) = mean_se(&prods[i * n + j]);
            assert!((m - want).abs() < 3.0 * se, "<r{i} r{j}> = {m}, want {want} ± {se}");
        }
    }
    for (k, v) in odd.iter().enumerate() {
        let (m, se) = mean_se(v);
        assert!(m.abs() < 3.0 * se, "odd moment {k}: {m} ± {se}");
    }
}

/// Full formula on Monte Carlo statistics against the closed-form table.
#[test]
fn full_formula_matches_table_at_small_eps() {
    for (preset, eps) in [
        (Preset::VarAlphaA, 1e-4),
        (Preset::PureBeta, 1e-3),
        (Preset::GammaDelta, 1e-3),
        (Preset::PureDelta, 1e-3),
    ] {
        let m = ModelSpec::preset(preset, 512, 3).unwrap();
        let g = constrained_gaussian_stats(&m, eps, 100_000, 5).unwrap();
        let full = van_kampen_chi(&g.stats).chi;
        let table = asymptotic_chi(&m, eps).unwrap().chi;
        let rel_mc = g.sigma2_stderr / g.stats.sigma2;
        assert!(
            (full / table - 1.0).abs() < 0.10 + 3.0 * rel_mc,
            "{preset}: full {full:e} vs table {table:e}"
        );
    }
}

#[test]
fn time_average_variance_matches_gaussian_prediction() {
    let (n, eps) = (1024, 1e-3);
    let m = ModelSpec::preset(Preset::PureBeta, n, 0).unwrap();
    let mut x = sample_state(&m, &SamplerConfig::new(eps, 21), 0).unwrap();
    let ta = curvature_stats_timeavg(&m, &mut x, &IntegratorConfig::yoshida(0.1), 2e3, 5).unwrap();
    let want = 36.0 * eps * eps;
    assert!(
        (ta.stats.sigma2 / want - 1.0).abs() < 0.15,
        "time average {:e} vs {want:e}",
        ta.stats.sigma2
    );
    assert!((ta.stats.omega0 - 2.0).abs() < 0.02);
    assert!(ta.converged, "drift {}", ta.drift);
}
