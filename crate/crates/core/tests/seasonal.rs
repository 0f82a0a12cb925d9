use std::path::PathBuf;

use landmix::seasonal::{decompose_values, landuse_basis, loess_smooth, stl, BasisKind, BasisSet, StlParams};
use proptest::prelude::*;

fn fixture(name: &str) -> Vec<Vec<f64>> {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name);
    let mut reader = csv::Reader::from_path(path).unwrap();
    reader
        .records()
        .map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect())
        .collect()
}

fn column(rows: &[Vec<f64>], c: usize) -> Vec<f64> {
    rows.iter().map(|r| r[c]).collect()
}

fn rms(a: &[f64], b: &[f64]) -> f64 {
    (a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.len() as f64).sqrt()
}

fn correlation(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len() as f64;
    let (ma, mb) = (a.iter().sum::<f64>() / n, b.iter().sum::<f64>() / n);
    let cov: f64 = a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let va: f64 = a.iter().map(|x| (x - ma).powi(2)).sum();
    let vb: f64 = b.iter().map(|y| (y - mb).powi(2)).sum();
    cov / (va * vb).sqrt()
}

#[test]
fn loess_matches_reference_lowess() {
    let rows = fixture("loess_reference.csv");
    let (x, clean, noisy, reference) = (column(&rows, 0), column(&rows, 1), column(&rows, 2), column(&rows, 3));
    let fit = loess_smooth(&noisy, &x, 0.1, 1).unwrap();
    for (a, b) in fit.iter().zip(&reference) {
        assert!((a - b).abs() < 1e-10, "{a} vs {b}");
    }
    assert!(rms(&fit, &clean) < 0.1);
}

fn check_against(name: &str, params: &StlParams) {
    let rows = fixture(name);
    let y = column(&rows, 1);
    let out = stl(&y, params).unwrap();
    let (trend, seasonal) = (column(&rows, 2), column(&rows, 3));
    for t in 0..y.len() {
        assert!((out.trend[t] - trend[t]).abs() < 1e-9, "{name} trend at {t}");
        assert!((out.seasonal[t] - seasonal[t]).abs() < 1e-9, "{name} seasonal at {t}");
    }
}

#[test]
fn stl_matches_reference_implementation() {
    let params = StlParams::for_period(52);
    check_against("stl_reference.csv", &params);
    check_against("stl_noisy_reference.csv", &params);
    check_against("stl_robust_reference.csv", &params.robust());
}

#[test]
fn planted_sine_is_recovered() {
    let rows = fixture("stl_reference.csv");
    let y = column(&rows, 1);
    let basis = decompose_values("s", &y, &StlParams::for_period(52)).unwrap();
    let sine: Vec<f64> = (0..y.len()).map(|t| (std::f64::consts::TAU * t as f64 / 52.0).sin()).collect();
    assert!(correlation(&basis.seasonal_component(), &sine) >= 0.99);

    let line: Vec<f64> = (0..y.len()).map(|t| 2.0 + 0.01 * t as f64).collect();
    let trend: Vec<f64> = basis.trend_component().iter().map(|v| v + basis.f_const).collect();
    let scale = (line.iter().map(|v| v * v).sum::<f64>() / line.len() as f64).sqrt();
    assert!(rms(&trend, &line) <= 0.05 * scale);
    let reference = column(&rows, 2);
    assert!(rms(&trend, &reference) <= 0.05 * scale);
}

#[test]
fn landuse_basis_of_one_member_is_that_site() {
    let y: Vec<f64> = (0..156).map(|t| (t as f64 * 0.2).cos() + 0.01 * t as f64).collect();
    let b = decompose_values("s", &y, &StlParams::for_period(52)).unwrap();
    let bases = vec![b.clone()];
    assert_eq!(landuse_basis(&bases, &[0], 0, BasisKind::Seasonal).unwrap(), b.seasonal_component());
    assert_eq!(landuse_basis(&bases, &[0], 0, BasisKind::Trend).unwrap(), b.trend_component());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn reconstruction_is_exact(values in prop::collection::vec(-50.0f64..50.0, 104..220), robust in any::<bool>()) {
        let mut params = StlParams::for_period(52);
        if robust {
            params = params.robust();
        }
        let b = decompose_values("s", &values, &params).unwrap();
        for (a, v) in b.reconstruct().iter().zip(&values) {
            prop_assert!((a - v).abs() <= 1e-10);
        }
        let tn: f64 = b.f_trend.iter().map(|v| v * v).sum();
        let sn: f64 = b.f_seasonal.iter().map(|v| v * v).sum();
        prop_assert!((tn - 1.0).abs() < 1e-9 && (sn - 1.0).abs() < 1e-9);
        let s = b.seasonal_component();
        for block in s.chunks(52).filter(|c| c.len() == 52) {
            let mean = block.iter().sum::<f64>() / 52.0;
            prop_assert!(mean.abs() <= 1e-6 * b.seasonal_scale.max(1e-12));
        }
    }

    #[test]
    fn loess_idempotent_on_polynomials(
        coef in prop::array::uniform3(-2.0f64..2.0),
        degree in 0usize..=2,
        span in 0.3f64..1.0,
        n in 15usize..60,
    ) {
        let x: Vec<f64> = (0..n).map(|i| i as f64 / 3.0).collect();
        let y: Vec<f64> = x
            .iter()
            .map(|v| (0..=degree).map(|d| coef[d] * v.powi(d as i32)).sum())
            .collect();
        let fit = loess_smooth(&y, &x, span, degree).unwrap();
        let scale = 1.0 + y.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (a, b) in fit.iter().zip(&y) {
            prop_assert!((a - b).abs() <= 1e-8 * scale);
        }
    }

    #[test]
    fn basis_is_permutation_equivariant(seed in 0u64..1000) {
        let bases: Vec<_> = (0..5)
            .map(|i| {
                let y: Vec<f64> = (0..110)
                    .map(|t| ((t as f64 + seed as f64) * 0.07 * (i + 1) as f64).sin() + i as f64)
                    .collect();
                decompose_values(&i.to_string(), &y, &StlParams::for_period(52)).unwrap()
            })
            .collect();
        let labels = [0usize, 1, 0, 2, 1];
        let perm = [2usize, 0, 1];
        let relabelled: Vec<usize> = labels.iter().map(|&z| perm[z]).collect();
        let a = BasisSet::from_labels(&bases, &labels, 3).unwrap();
        let b = BasisSet::from_labels(&bases, &relabelled, 3).unwrap();
        for k in 0..3 {
            prop_assert_eq!(a.get(k), b.get(perm[k]));
        }
        let mut reversed = bases.clone();
        reversed.reverse();
        let rev_labels: Vec<usize> = labels.iter().rev().copied().collect();
        let c = BasisSet::from_labels(&reversed, &rev_labels, 3).unwrap();
        for k in 0..3 {
            let (x, y) = (a.get(k).unwrap(), c.get(k).unwrap());
            for t in 0..x.trend.len() {
                prop_assert!((x.trend[t] - y.trend[t]).abs() < 1e-12);
                prop_assert!((x.seasonal[t] - y.seasonal[t]).abs() < 1e-12);
            }
        }
    }
}
