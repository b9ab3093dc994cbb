use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use ergodicity_core::factors::{
    canonical_correlations, extract_factors, impute_missing, marginal_r2, standardize_panel,
    ImputeConfig, Panel,
};

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

/// Share of total variance carried by the largest `k` of `n` eigenvalues
/// under the Marchenko-Pastur law with ratio `n / t` and unit scale.
fn marchenko_pastur_share(n: usize, t: usize, k: usize) -> f64 {
    let g = n as f64 / t as f64;
    let (a, b) = ((1.0 - g.sqrt()).powi(2), (1.0 + g.sqrt()).powi(2));
    let density =
        |x: f64| ((b - x) * (x - a)).max(0.0).sqrt() / (2.0 * std::f64::consts::PI * g * x);
    let steps = 200_000;
    let h = (b - a) / steps as f64;
    let target = k as f64 / n as f64;
    let (mut mass, mut first_moment) = (0.0, 0.0);
    for i in 0..steps {
        let x = b - (i as f64 + 0.5) * h;
        let w = density(x) * h;
        if mass + w > target {
            first_moment += x * (target - mass);
            break;
        }
        mass += w;
        first_moment += x * w;
    }
    first_moment
}

#[test]
fn identity_covariance_panel_follows_marchenko_pastur() {
    let (t, n, k) = (500, 50, 3);
    let oracle = marchenko_pastur_share(n, t, k);
    let mut shares = Vec::new();
    for seed in 0..5 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let p = Panel::new(gaussian(t, n, &mut rng), ids(n)).unwrap();
        let fr = extract_factors(&standardize_panel(&p).panel, k).unwrap();
        shares.push(fr.explained_total);
    }
    let mean = shares.iter().sum::<f64>() / shares.len() as f64;
    assert!(
        (mean / oracle - 1.0).abs() < 0.2,
        "share {mean} vs oracle {oracle}"
    );
    // The naive k/N value sits below the whole sampling distribution.
    assert!(shares.iter().all(|s| *s > k as f64 / n as f64));
}

fn ols_r2(y: &DVector<f64>, f: &DMatrix<f64>) -> f64 {
    let t = y.len();
    let mut x = DMatrix::from_element(t, f.ncols() + 1, 1.0);
    x.view_mut((0, 1), (t, f.ncols())).copy_from(f);
    let qr = x.clone().qr();
    let beta = qr
        .r()
        .solve_upper_triangular(&(qr.q().transpose() * y))
        .unwrap();
    let resid = y - &x * beta;
    let mean = y.mean();
    let tss: f64 = y.iter().map(|v| (v - mean).powi(2)).sum();
    1.0 - resid.norm_squared() / tss
}

#[test]
fn nested_r2_matches_direct_regressions() {
    for seed in 0..10 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let (t, n) = (80, 15);
        let p = standardize_panel(&Panel::new(gaussian(t, n, &mut rng), ids(n)).unwrap()).panel;
        let fr = extract_factors(&p, 3).unwrap();
        let m = marginal_r2(&fr.factors, &p, 5).unwrap();
        for i in 0..n {
            let y = p.data.column(i).into_owned();
            for k in 1..=3 {
                let direct = ols_r2(&y, &fr.factors.columns(0, k).into_owned());
                assert!(
                    (m.r2[(i, k - 1)] - direct).abs() < 1e-10,
                    "series {i}, k {k}"
                );
            }
        }
    }
}

#[test]
fn masked_factor_panel_is_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (t, n) = (150, 60);
    let truth = gaussian(t, 3, &mut rng);
    let x = &truth * gaussian(n, 3, &mut rng).transpose() + gaussian(t, n, &mut rng) * 0.1;
    let mut masked = x.clone();
    for v in masked.iter_mut() {
        if rng.random::<f64>() < 0.1 {
            *v = f64::NAN;
        }
    }
    let p = standardize_panel(&Panel::new(masked, ids(n)).unwrap()).panel;
    let imputed = impute_missing(
        &p,
        &ImputeConfig {
            k: 3,
            ..Default::default()
        },
    )
    .unwrap();
    assert!(imputed.converged);
    for (a, b) in p.data.iter().zip(imputed.panel.data.iter()) {
        if a.is_finite() {
            assert_eq!(a, b);
        }
    }
    let fr = extract_factors(&imputed.panel, 3).unwrap();
    let cc = canonical_correlations(&truth, &fr.factors);
    assert!(cc.iter().all(|c| *c > 0.99), "{cc:?}");
}
