mod common;

use common::{panel, weighted_ols};
use landmix::lattice::{adjacency_from_edges, Adjacency};
use landmix::nem::{
    basis_from_labels, e_step, fit_nem, fixed_point, initial_labels, loglik_matrix, m_step, penalty_g, run_nem,
    site_loglik, unpenalized, InitMethod, MixtureParams, NemConfig, Responsibilities, LAMBDA_GRID,
};
use landmix::potts::{same_label_edges, LabelField};
use landmix::prep::MixtureData;
use landmix::seasonal::{BasisSet, ComponentBasis};
use landmix::simgen::recovery_score;
use proptest::prelude::*;

fn naive_loglik(y: &[f64], curve: &[f64], nu: f64) -> f64 {
    y.iter()
        .zip(curve)
        .map(|(v, m)| {
            let density = (-(v - m).powi(2) / (2.0 * nu)).exp() / (2.0 * std::f64::consts::PI * nu).sqrt();
            density.ln()
        })
        .sum()
}

fn curve(p: &MixtureParams, k: usize, b: &ComponentBasis) -> Vec<f64> {
    (0..b.trend.len())
        .map(|t| p.mu0[k] + p.b_trend[k] * b.trend[t] + p.b_seas[k] * b.seasonal[t])
        .collect()
}

fn fixed_basis(data: &MixtureData, labels: &LabelField) -> BasisSet {
    let pooled = BasisSet::pooled(&data.bases).unwrap();
    basis_from_labels(data, labels, &vec![pooled; labels.k]).unwrap()
}

fn some_params(k: usize) -> MixtureParams {
    MixtureParams {
        mu0: (0..k).map(|c| -3.0 + 2.0 * c as f64).collect(),
        b_trend: vec![0.5; k],
        b_seas: vec![2.0; k],
        nu: vec![0.3; k],
        pi: vec![1.0 / k as f64; k],
    }
}

/// Oracle M-step: stacked weighted least squares over every site and cell.
fn oracle_m_step(data: &MixtureData, c: &[Vec<f64>], basis: &BasisSet) -> MixtureParams {
    let k = c[0].len();
    let n = data.n_sites();
    let mut p = MixtureParams {
        mu0: vec![],
        b_trend: vec![],
        b_seas: vec![],
        nu: vec![],
        pi: vec![],
    };
    for comp in 0..k {
        let b = basis.get(comp).unwrap();
        let (mut rows, mut y, mut w) = (vec![], vec![], vec![]);
        for i in 0..n {
            for t in 0..data.t_len() {
                if data.active[i][t] && c[i][comp] > 0.0 {
                    rows.push([1.0, b.trend[t], b.seasonal[t]]);
                    y.push(data.y[i][t]);
                    w.push(c[i][comp]);
                }
            }
        }
        let beta = weighted_ols(&rows, &y, &w);
        let rss: f64 = rows
            .iter()
            .zip(&y)
            .zip(&w)
            .map(|((x, v), wt)| wt * (v - beta[0] - beta[1] * x[1] - beta[2] * x[2]).powi(2))
            .sum();
        p.mu0.push(beta[0]);
        p.b_trend.push(beta[1]);
        p.b_seas.push(beta[2]);
        p.nu.push(rss / w.iter().sum::<f64>());
        p.pi.push(c.iter().map(|row| row[comp]).sum::<f64>() / n as f64);
    }
    p
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * (1.0 + a.abs().max(b.abs()))
}

fn params_close(a: &MixtureParams, b: &MixtureParams, rel: f64) -> bool {
    [(&a.mu0, &b.mu0), (&a.b_trend, &b.b_trend), (&a.b_seas, &b.b_seas), (&a.nu, &b.nu), (&a.pi, &b.pi)]
        .iter()
        .all(|(x, y)| x.iter().zip(y.iter()).all(|(u, v)| close(*u, *v, rel)))
}

#[test]
fn site_loglik_matches_naive_density() {
    let p = panel(3, 12, 1);
    let basis = fixed_basis(&p.data, &p.truth);
    let params = some_params(3);
    for i in 0..p.data.n_sites() {
        for k in 0..3 {
            let c = curve(&params, k, basis.get(k).unwrap());
            let expect = naive_loglik(&p.data.y[i], &c, params.nu[k]);
            let got = site_loglik(&p.data, i, k, &params, &basis).unwrap();
            assert!(close(got, expect, 1e-10), "{got} vs {expect}");
        }
    }
}

#[test]
fn perfect_fit_loglik_is_normaliser_only() {
    let mut p = panel(2, 8, 2);
    let basis = fixed_basis(&p.data, &p.truth);
    let mut params = some_params(2);
    p.data.y[0] = curve(&params, 1, basis.get(1).unwrap());
    let t = p.data.t_len() as f64;
    let base = site_loglik(&p.data, 0, 1, &params, &basis).unwrap();
    assert!(close(base, -0.5 * t * (2.0 * std::f64::consts::PI * 0.3).ln(), 1e-12));
    params.nu[1] = 0.6;
    let doubled = site_loglik(&p.data, 0, 1, &params, &basis).unwrap();
    assert!(close(base - doubled, 0.5 * t * 2f64.ln(), 1e-12));
}

#[test]
fn m_step_matches_weighted_least_squares() {
    let p = panel(3, 14, 3);
    let basis = fixed_basis(&p.data, &p.truth);
    let hard = Responsibilities::one_hot(&p.truth);
    assert!(params_close(&m_step(&p.data, &hard, &basis).unwrap(), &oracle_m_step(&p.data, &hard.c, &basis), 1e-8));

    let soft: Vec<Vec<f64>> = (0..p.data.n_sites())
        .map(|i| {
            let raw: Vec<f64> = (0..3).map(|k| 1.0 + ((i * 7 + k * 3) % 5) as f64).collect();
            let s: f64 = raw.iter().sum();
            raw.iter().map(|v| v / s).collect()
        })
        .collect();
    let got = m_step(&p.data, &Responsibilities { c: soft.clone() }, &basis).unwrap();
    assert!(params_close(&got, &oracle_m_step(&p.data, &soft, &basis), 1e-8));
}

#[test]
fn m_step_on_constant_component_floors_variance() {
    let ids: Vec<String> = (0..3).map(|i| format!("s{i}")).collect();
    let y = vec![vec![2.5; 156]; 3];
    let comps = vec![vec![1.0]; 3];
    let data = MixtureData::from_series(ids, y, comps, vec!["a".into()], &landmix::seasonal::StlParams::for_period(52)).unwrap();
    let labels = LabelField::constant(3, 1);
    let basis = fixed_basis(&data, &labels);
    let params = m_step(&data, &Responsibilities::one_hot(&labels), &basis).unwrap();
    assert!(close(params.mu0[0], 2.5, 1e-10));
    assert!(params.nu[0] > 0.0 && params.nu[0] <= 1e-10);
}

#[test]
fn zero_penalty_equals_plain_em() {
    let p = panel(3, 20, 4);
    let init = initial_labels(&p.data, 3, &InitMethod::KMeans, 4, 0).unwrap();
    let run = run_nem(&p.data, &p.adjacency, 0.0, &init, 15, 0.0, false).unwrap();
    assert!(run.segments.is_empty());

    let basis = fixed_basis(&p.data, &init);
    let mut c = Responsibilities::one_hot(&init).c;
    let mut params = oracle_m_step(&p.data, &c, &basis);
    for _ in 0..run.iterations {
        c = (0..p.data.n_sites())
            .map(|i| {
                let w: Vec<f64> = (0..3)
                    .map(|k| {
                        params.pi[k].ln() + naive_loglik(&p.data.y[i], &curve(&params, k, basis.get(k).unwrap()), params.nu[k])
                    })
                    .collect();
                let m = w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                let e: Vec<f64> = w.iter().map(|v| (v - m).exp()).collect();
                let s: f64 = e.iter().sum();
                e.iter().map(|v| v / s).collect()
            })
            .collect();
        params = oracle_m_step(&p.data, &c, &basis);
    }
    assert!(params_close(&run.params, &params, 1e-6), "{:?}\n{:?}", run.params, params);
}

#[test]
fn objective_never_decreases_within_a_segment() {
    for seed in 0..12u64 {
        let p = panel(3, 16, 100 + seed);
        for &lambda in &LAMBDA_GRID {
            let init = initial_labels(&p.data, 3, &InitMethod::Random, seed, 0).unwrap();
            let run = run_nem(&p.data, &p.adjacency, lambda, &init, 60, 1e-9, true).unwrap();
            let mut bounds = vec![0];
            bounds.extend(&run.segments);
            bounds.push(run.u_trace.len());
            for seg in bounds.windows(2) {
                for w in run.u_trace[seg[0]..seg[1]].windows(2) {
                    assert!(w[1] >= w[0] - 1e-9 * w[0].abs().max(1.0), "seed {seed} λ {lambda}: {} < {}", w[1], w[0]);
                }
            }
        }
    }
}

#[test]
fn zero_penalty_ignores_the_lattice() {
    let p = panel(3, 16, 5);
    let cfg = NemConfig {
        k: 3,
        lambda: Some(0.0),
        seed: 5,
        restarts: 4,
        ..NemConfig::default()
    };
    let with = fit_nem(&p.data, &p.adjacency, &cfg).unwrap();
    let empty = adjacency_from_edges(p.data.n_sites(), &[]).unwrap();
    let without = fit_nem(&p.data, &empty, &cfg).unwrap();
    assert_eq!(with.map_labels, without.map_labels);
    assert_eq!(with.params, without.params);
}

#[test]
fn recovers_well_separated_components() {
    let p = panel(3, 30, 6);
    let cfg = NemConfig {
        k: 3,
        lambda: None,
        seed: 6,
        ..NemConfig::default()
    };
    let fit = fit_nem(&p.data, &p.adjacency, &cfg).unwrap();
    assert!(recovery_score(&p.truth, fit.map_labels.as_ref().unwrap()).unwrap() >= 0.9);
    assert!(LAMBDA_GRID.contains(&fit.diagnostics.lambda.unwrap()));
    let mu0 = &fit.params.as_ref().unwrap().mu0;
    assert!(mu0.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn e_step_is_deterministic_and_normalised() {
    let p = panel(3, 16, 7);
    let basis = fixed_basis(&p.data, &p.truth);
    let params = m_step(&p.data, &Responsibilities::one_hot(&p.truth), &basis).unwrap();
    let a = e_step(&p.data, &params, &basis, &p.adjacency, 1.0).unwrap();
    let b = e_step(&p.data, &params, &basis, &p.adjacency, 1.0).unwrap();
    assert_eq!(a, b);
    let ll = loglik_matrix(&p.data, &params, &basis).unwrap();
    assert_eq!(unpenalized(&ll, &params.pi), e_step(&p.data, &params, &basis, &p.adjacency, 0.0).unwrap());
}

fn loglik_rows(n: usize, k: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
    prop::collection::vec(prop::collection::vec(-30.0f64..0.0, k), n)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn penalty_is_twice_agreement_on_hard_labels(labels in prop::collection::vec(0usize..3, 12)) {
        let a = Adjacency::grid(4, 3);
        let z = LabelField::new(labels, 3).unwrap();
        let g = penalty_g(&Responsibilities::one_hot(&z), &a).unwrap();
        prop_assert_eq!(g, 2.0 * same_label_edges(&z, &a).unwrap() as f64);
    }

    #[test]
    fn fixed_point_is_a_normalised_solution(ll in loglik_rows(9, 3), lambda in 0.0f64..0.5) {
        let a = Adjacency::grid(3, 3);
        let pi = [0.2, 0.5, 0.3];
        let c = fixed_point(&ll, &pi, &a, lambda, unpenalized(&ll, &pi)).unwrap();
        for (i, row) in c.c.iter().enumerate() {
            prop_assert!(row.iter().all(|&v| v >= 0.0));
            prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let w: Vec<f64> = (0..3)
                .map(|k| {
                    let field: f64 = a.neighbors(i).iter().map(|&j| c.c[j][k]).sum();
                    pi[k] * (ll[i][k] + 2.0 * lambda * field).exp()
                })
                .collect();
            let s: f64 = w.iter().sum();
            for k in 0..3 {
                prop_assert!((row[k] - w[k] / s).abs() < 1e-6);
            }
        }
    }
}
