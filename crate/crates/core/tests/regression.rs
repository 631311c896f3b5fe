use nalgebra::{DMatrix, DVector};
use ontrack_core::experiment::regression::{ols, tsls, CovarianceKind};
use ontrack_core::experiment::*;
use ontrack_core::projection::Gender;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

type Mat = Vec<Vec<f64>>;

fn transpose(a: &Mat) -> Mat {
    (0..a[0].len()).map(|j| a.iter().map(|row| row[j]).collect()).collect()
}

fn matmul(a: &Mat, b: &Mat) -> Mat {
    a.iter()
        .map(|row| {
            (0..b[0].len())
                .map(|j| row.iter().zip(b).map(|(x, brow)| x * brow[j]).sum())
                .collect()
        })
        .collect()
}

/// Gauss-Jordan inverse with partial pivoting.
fn inverse(a: &Mat) -> Mat {
    let n = a.len();
    let mut m: Mat = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| f64::from(u8::from(i == j))));
            r
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        m.swap(col, pivot);
        let p = m[col][col];
        for v in m[col].iter_mut() {
            *v /= p;
        }
        for row in 0..n {
            if row != col {
                let f = m[row][col];
                let pivot_row = m[col].clone();
                for (v, pv) in m[row].iter_mut().zip(pivot_row) {
                    *v -= f * pv;
                }
            }
        }
    }
    m.into_iter().map(|r| r[n..].to_vec()).collect()
}

/// `(X'X)^{-1} X'y` by brute force.
fn normal_equations(x: &Mat, y: &[f64]) -> Vec<f64> {
    let xt = transpose(x);
    let xtx_inv = inverse(&matmul(&xt, x));
    let xty: Mat = xt.iter().map(|r| vec![r.iter().zip(y).map(|(a, b)| a * b).sum()]).collect();
    matmul(&xtx_inv, &xty).into_iter().map(|r| r[0]).collect()
}

fn explicit_hc1(x: &Mat, resid: &[f64]) -> Mat {
    let (n, k) = (x.len(), x[0].len());
    let bread = inverse(&matmul(&transpose(x), x));
    let mut meat = vec![vec![0.0; k]; k];
    for (row, e) in x.iter().zip(resid) {
        for a in 0..k {
            for b in 0..k {
                meat[a][b] += e * e * row[a] * row[b];
            }
        }
    }
    let scale = n as f64 / (n - k) as f64;
    matmul(&matmul(&bread, &meat), &bread)
        .into_iter()
        .map(|r| r.into_iter().map(|v| v * scale).collect())
        .collect()
}

fn to_dmatrix(a: &Mat) -> DMatrix<f64> {
    DMatrix::from_fn(a.len(), a[0].len(), |i, j| a[i][j])
}

fn names(prefix: &str, k: usize) -> Vec<String> {
    (0..k).map(|j| format!("{prefix}{j}")).collect()
}

fn fixture(seed: u64, n: usize, k: usize) -> (Mat, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x: Mat = (0..n)
        .map(|_| {
            let mut row = vec![1.0];
            row.extend((1..k).map(|_| rng.random_range(-3.0..3.0)));
            row
        })
        .collect();
    let y = x
        .iter()
        .map(|row| {
            let scale = 0.5 + row[1].abs();
            row.iter().enumerate().map(|(j, v)| (j as f64 + 1.0) * v).sum::<f64>()
                + scale * rng.random_range(-1.0..1.0)
        })
        .collect();
    (x, y)
}

#[test]
fn ols_matches_normal_equations_and_sandwich() {
    for seed in 0..25 {
        let (x, y) = fixture(seed, 40 + seed as usize, 2 + (seed as usize % 4));
        let k = x[0].len();
        let fit = ols(&to_dmatrix(&x), &DVector::from_vec(y.clone()), &names("x", k), CovarianceKind::Hc1).unwrap();
        let oracle = normal_equations(&x, &y);
        for j in 0..k {
            assert!((fit.beta[j] - oracle[j]).abs() < 1e-8, "seed {seed} beta {j}");
        }
        let resid: Vec<f64> = x
            .iter()
            .zip(&y)
            .map(|(row, yi)| yi - row.iter().zip(&oracle).map(|(a, b)| a * b).sum::<f64>())
            .collect();
        for j in 0..k {
            let dot: f64 = x.iter().zip(fit.residuals.iter()).map(|(row, e)| row[j] * e).sum();
            assert!(dot.abs() < 1e-8, "residuals not orthogonal to column {j}: {dot}");
        }
        let cov = explicit_hc1(&x, &resid);
        for a in 0..k {
            for b in 0..k {
                assert!((fit.cov[(a, b)] - cov[a][b]).abs() < 1e-8 * cov[a][b].abs().max(1.0));
            }
        }
        let hc0 = ols(&to_dmatrix(&x), &DVector::from_vec(y.clone()), &names("x", k), CovarianceKind::Hc0).unwrap();
        let ratio = fit.cov[(0, 0)] / hc0.cov[(0, 0)];
        assert!((ratio - x.len() as f64 / (x.len() - k) as f64).abs() < 1e-12);
    }
}

#[test]
fn tsls_matches_projection_formula() {
    for seed in 0..20 {
        let mut rng = ChaCha8Rng::seed_from_u64(100 + seed);
        let n = 60;
        let z: Mat = (0..n)
            .map(|_| vec![1.0, rng.random_range(0.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let x: Mat = z
            .iter()
            .map(|zr| vec![1.0, zr[1] + 0.5 * zr[2] + rng.random_range(-0.3..0.3)])
            .collect();
        let y: Vec<f64> = x.iter().map(|xr| 2.0 + 1.5 * xr[1] + rng.random_range(-1.0..1.0)).collect();

        // x_hat = Z (Z'Z)^{-1} Z'X, then beta = (x_hat'x_hat)^{-1} x_hat'y
        let zt = transpose(&z);
        let x_hat = matmul(&matmul(&z, &inverse(&matmul(&zt, &z))), &matmul(&zt, &x));
        let oracle = normal_equations(&x_hat, &y);
        let fit = tsls(&to_dmatrix(&x), &to_dmatrix(&z), &DVector::from_vec(y.clone()), &names("x", 2), &names("z", 3), CovarianceKind::Hc1).unwrap();
        for j in 0..2 {
            assert!((fit.beta[j] - oracle[j]).abs() < 1e-8);
        }
        // structural residuals in the sandwich, projected regressors in the bread
        let resid: Vec<f64> = x.iter().zip(&y).map(|(r, yi)| yi - oracle[0] - oracle[1] * r[1]).collect();
        let cov = explicit_hc1(&x_hat, &resid);
        assert!((fit.cov[(1, 1)] - cov[1][1]).abs() < 1e-8 * cov[1][1].max(1.0));
    }
}

#[test]
fn rank_deficiency_names_the_column() {
    let x = DMatrix::from_row_slice(4, 3, &[1.0, 1.0, 2.0, 1.0, 2.0, 4.0, 1.0, 3.0, 6.0, 1.0, 4.0, 8.0]);
    let y = DVector::from_vec(vec![1.0, 2.0, 3.0, 4.0]);
    let err = ols(&x, &y, &["a".into(), "b".into(), "c".into()], CovarianceKind::Hc1).unwrap_err();
    assert_eq!(err, ExperimentError::RankDeficient("c is collinear with earlier regressors".into()));
}

fn record(id: usize, gender: Gender, arm: Arm, clicked: bool, post: f64) -> EmployeeRecord {
    EmployeeRecord {
        id: format!("r{id}"),
        age: 30,
        gender,
        disadvantaged: false,
        tenure: 2.0,
        pre_rate: 10.0,
        post_rate: Some(post),
        treatment: Some(arm),
        clicked,
        attrited: false,
    }
}

#[test]
fn itt_with_strata_is_average_within_stratum_difference() {
    // two strata of six rows, three treated and three control in each
    let men = [(Arm::Email, 12.0), (Arm::Email, 13.0), (Arm::Email, 11.0), (Arm::Control, 10.0), (Arm::Control, 10.5), (Arm::Control, 9.5)];
    let women = [(Arm::Email, 10.0), (Arm::Email, 10.2), (Arm::Email, 10.4), (Arm::Control, 10.0), (Arm::Control, 9.0), (Arm::Control, 8.0)];
    let mut roster = Vec::new();
    for (i, (arm, post)) in men.iter().enumerate() {
        roster.push(record(i, Gender::Male, *arm, false, *post));
    }
    for (i, (arm, post)) in women.iter().enumerate() {
        roster.push(record(10 + i, Gender::Female, *arm, false, *post));
    }
    let opts = EstimatorOptions { outcome: Outcome::PostRate, ..EstimatorOptions::default() };
    let fit = itt(&roster, &opts).unwrap();
    // men: 12 - 10 = 2; women: 10.2 - 9 = 1.2; equal weights
    let hand = (2.0 + 1.2) / 2.0;
    assert!((fit.coefficients["email"] - hand).abs() < 1e-10);

    let x: Mat = roster
        .iter()
        .map(|r| vec![1.0, f64::from(u8::from(r.treatment == Some(Arm::Email))), f64::from(u8::from(r.gender == Gender::Male))])
        .collect();
    let y: Vec<f64> = roster.iter().map(|r| r.post_rate.unwrap()).collect();
    assert!((fit.coefficients["email"] - normal_equations(&x, &y)[1]).abs() < 1e-10);
    assert_eq!(fit.control_mean, Some((10.0 + 10.5 + 9.5 + 10.0 + 9.0 + 8.0) / 6.0));
    let (lo, hi) = fit.ci95["email"];
    assert!((hi - lo - 2.0 * 1.96 * fit.robust_se["email"]).abs() < 1e-12);
}

#[test]
fn late_equals_wald_ratio_without_covariates() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let roster: Vec<EmployeeRecord> = (0..300)
        .map(|i| {
            let arm = if i % 2 == 0 { Arm::Email } else { Arm::Control };
            let clicked = arm == Arm::Email && rng.random_bool(0.4);
            let post = 10.0 + if clicked { 1.0 } else { 0.0 } + rng.random_range(-1.0..1.0);
            record(i, Gender::Male, arm, clicked, post)
        })
        .collect();
    let opts = EstimatorOptions { fixed_effects: false, outcome: Outcome::PostRate, ..EstimatorOptions::default() };
    let fit = late(&roster, &opts).unwrap();
    let mean = |arm: Arm, f: &dyn Fn(&EmployeeRecord) -> f64| {
        let v: Vec<f64> = roster.iter().filter(|r| r.treatment == Some(arm)).map(f).collect();
        v.iter().sum::<f64>() / v.len() as f64
    };
    let dy = mean(Arm::Email, &|r| r.post_rate.unwrap()) - mean(Arm::Control, &|r| r.post_rate.unwrap());
    let dd = mean(Arm::Email, &|r| f64::from(u8::from(r.clicked))) - mean(Arm::Control, &|r| f64::from(u8::from(r.clicked)));
    assert!((fit.coefficients["clicked"] - dy / dd).abs() < 1e-10);
    assert!(fit.first_stage_f.unwrap() > 10.0);
}

#[test]
fn late_equals_pooled_itt_under_full_uptake() {
    let dgp = DgpParams { uptake_email: 1.0, uptake_email_phone: 1.0, effect_email: 0.7, effect_email_phone: 0.7, ..DgpParams::default() };
    let roster = simulate_population(&dgp, &AgeCutpoints::default(), 12).unwrap();
    let opts = EstimatorOptions { arms: ArmCoding::Pooled, ..EstimatorOptions::default() };
    let l = late(&roster, &opts).unwrap();
    let i = itt(&roster, &opts).unwrap();
    assert!((l.coefficients["clicked"] - i.coefficients["treated"]).abs() < 1e-10);
    assert!(l.warnings.iter().any(|w| w.contains("full compliance")));
}

#[test]
fn no_compliers_is_an_error() {
    let roster: Vec<EmployeeRecord> = (0..20)
        .map(|i| record(i, Gender::Male, if i % 2 == 0 { Arm::Email } else { Arm::Control }, false, 10.0))
        .collect();
    assert_eq!(late(&roster, &EstimatorOptions::default()).unwrap_err(), ExperimentError::NoCompliers);
}

#[test]
fn null_process_without_noise_gives_exact_zeros() {
    let dgp = DgpParams { noise_sd: 0.0, ..DgpParams::default() };
    let roster = simulate_population(&dgp, &AgeCutpoints::default(), 4).unwrap();
    let fit = itt(&roster, &EstimatorOptions::default()).unwrap();
    for arm in ["email", "email_phone"] {
        assert!(fit.coefficients[arm].abs() < 1e-12);
    }
    let het = het_effects(&roster, &EstimatorOptions::for_heterogeneity(), GroupIndicator::Male).unwrap();
    for name in ["email:male", "email_phone:male"] {
        assert!(het.coefficients[name].abs() < 1e-12);
    }
    assert_eq!(fit.n_obs + fit.n_attrited, roster.len());
}

#[test]
fn constant_group_is_rank_deficient() {
    let dgp = DgpParams { share_male: 1.0, ..DgpParams::default() };
    let roster = simulate_population(&dgp, &AgeCutpoints::default(), 5).unwrap();
    assert!(matches!(
        het_effects(&roster, &EstimatorOptions::for_heterogeneity(), GroupIndicator::Female),
        Err(ExperimentError::RankDeficient(_))
    ));
}

fn floorless(n: usize) -> DgpParams {
    DgpParams { n, share_at_minimum: 0.0, above_minimum_range: (12.0, 20.0), ..DgpParams::default() }
}

#[test]
fn monte_carlo_itt() {
    let dgp = DgpParams { uptake_email: 1.0, uptake_email_phone: 1.0, effect_email: 0.5, effect_email_phone: 0.5, ..floorless(10_000) };
    let roster = simulate_population(&dgp, &AgeCutpoints::default(), 31).unwrap();
    let fit = itt(&roster, &EstimatorOptions::default()).unwrap();
    for arm in ["email", "email_phone"] {
        assert!((fit.coefficients[arm] - 0.5).abs() <= 0.05, "{arm}: {}", fit.coefficients[arm]);
    }
}

#[test]
fn monte_carlo_late() {
    let dgp = DgpParams { effect_email: 1.0, effect_email_phone: 1.0, ..floorless(10_000) };
    let roster = simulate_population(&dgp, &AgeCutpoints::default(), 32).unwrap();
    let fit = late(&roster, &EstimatorOptions::default()).unwrap();
    assert!((fit.coefficients["clicked"] - 1.0).abs() <= 0.1, "{}", fit.coefficients["clicked"]);
}

#[test]
fn monte_carlo_male_interaction() {
    let dgp = DgpParams { uptake_email: 1.0, uptake_email_phone: 1.0, male_extra_effect: 1.0, ..floorless(10_000) };
    let roster = simulate_population(&dgp, &AgeCutpoints::default(), 33).unwrap();
    let fit = het_effects(&roster, &EstimatorOptions::for_heterogeneity(), GroupIndicator::Male).unwrap();
    assert!((fit.coefficients["email:male"] - 1.0).abs() <= 0.2, "{}", fit.coefficients["email:male"]);
    assert!(fit.coefficients["email"].abs() <= 0.2);
}

#[test]
fn default_uptake_is_close_to_nominal() {
    let roster = simulate_population(&DgpParams::default(), &AgeCutpoints::default(), 34).unwrap();
    let rate = |arm: Arm| {
        let group: Vec<_> = roster.iter().filter(|r| r.treatment == Some(arm)).collect();
        group.iter().filter(|r| r.clicked).count() as f64 / group.len() as f64
    };
    assert!((rate(Arm::Email) - 0.27).abs() <= 0.05);
    assert!((rate(Arm::EmailPhone) - 0.65).abs() <= 0.05);
}

#[test]
fn bootstrap_covers_known_shift() {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut covered = 0;
    let reps = 500;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(1_000 + rep);
        let roster: Vec<EmployeeRecord> = (0..400)
            .map(|i| {
                let arm = if i % 2 == 0 { Arm::Email } else { Arm::Control };
                let shift = if arm == Arm::Email { 0.5 } else { 0.0 };
                let mut r = record(i, Gender::Female, arm, false, 0.0);
                r.post_rate = Some(10.0 + shift + normal.sample(&mut rng));
                r
            })
            .collect();
        let b = bootstrap_mean_diff(&roster, (Arm::Email, Arm::Control), Outcome::Change, 1000, rep).unwrap();
        if b.ci_lo <= 0.5 && 0.5 <= b.ci_hi {
            covered += 1;
        }
    }
    let share = covered as f64 / reps as f64;
    assert!((0.92..=0.98).contains(&share), "coverage {share}");
}

proptest::proptest! {
    #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]

    #[test]
    fn ols_shifts_with_a_column_added_to_y(seed in 0u64..10_000, k in 2usize..6, j in 0usize..6, c in -5.0f64..5.0) {
        let j = j % k;
        let (x, y) = fixture(seed, 30 + k * 3, k);
        let shifted: Vec<f64> = y.iter().zip(&x).map(|(v, row)| v + c * row[j]).collect();
        let fit = |y: &[f64]| ols(&to_dmatrix(&x), &DVector::from_vec(y.to_vec()), &names("x", k), CovarianceKind::Hc1).unwrap();
        let (a, b) = (fit(&y), fit(&shifted));
        for i in 0..k {
            let expected = a.beta[i] + if i == j { c } else { 0.0 };
            proptest::prop_assert!((b.beta[i] - expected).abs() < 1e-8);
        }
        // residuals, and so the sandwich, are unchanged
        proptest::prop_assert!((&a.residuals - &b.residuals).amax() < 1e-8);
    }

    #[test]
    fn ols_recovers_an_exact_linear_response(seed in 0u64..10_000, k in 2usize..6) {
        let (x, _) = fixture(seed, 20 + k * 4, k);
        let truth: Vec<f64> = (0..k).map(|i| i as f64 - 1.5).collect();
        let y: Vec<f64> = x.iter().map(|row| row.iter().zip(&truth).map(|(a, b)| a * b).sum()).collect();
        let fit = ols(&to_dmatrix(&x), &DVector::from_vec(y), &names("x", k), CovarianceKind::Hc0).unwrap();
        for i in 0..k {
            proptest::prop_assert!((fit.beta[i] - truth[i]).abs() < 1e-9);
        }
        proptest::prop_assert!(fit.ssr < 1e-16 * x.len() as f64);
    }
}
