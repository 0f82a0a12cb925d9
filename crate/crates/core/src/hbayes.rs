//! Four-block Gibbs sampler for the hidden-Potts mixture and MAP extraction.
//!
//! One sweep updates, in order: labels, component bases, component mean
//! coefficients, noise variances and the Potts interaction δ.

use std::io::Write;

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{self, Diagnostics, FitResult, Method};
use crate::kmeans;
use crate::lattice::Adjacency;
use crate::linalg;
use crate::nem::{self, MixtureParams, NemError};
use crate::potts::{exchange_update_delta_with, LabelField, PottsParams, DELTA_PRIOR};
use crate::prep::MixtureData;
use crate::rng::{substream, Stream};
use crate::seasonal::{BasisSet, ComponentBasis};

#[derive(Debug, Error, PartialEq)]
pub enum GibbsError {
    #[error("invalid sampler configuration: {0}")]
    InvalidConfig(String),
    #[error("posterior chain is empty")]
    EmptyChain,
    #[error("non-finite parameter in sweep {0}")]
    NonFinite(usize),
    #[error("normal matrix of component {0} is singular")]
    SingularDesign(usize),
    #[error(transparent)]
    Nem(#[from] NemError),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GibbsConfig {
    pub sweeps: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Inverse-gamma shape prior on the noise variances.
    pub a: f64,
    /// Inverse-gamma scale prior on the noise variances.
    pub b: f64,
    pub delta_proposal_sd: f64,
    pub seed: u64,
    pub shared_variance: bool,
    pub chains: usize,
    pub delta_prior: (f64, f64),
    pub delta_init: f64,
    pub aux_sweeps: usize,
    /// Keep component coefficients and variances at their initial values.
    pub freeze_params: bool,
    pub freeze_delta: bool,
    pub freeze_basis: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_labels: Option<Vec<usize>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_params: Option<MixtureParams>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub init_basis: Option<BasisSet>,
}

impl Default for GibbsConfig {
    fn default() -> Self {
        GibbsConfig {
            sweeps: 2000,
            burn_in: 500,
            thin: 1,
            a: 2.0,
            b: 1.0,
            delta_proposal_sd: 0.2,
            seed: 0,
            shared_variance: false,
            chains: 1,
            delta_prior: DELTA_PRIOR,
            delta_init: 0.5,
            aux_sweeps: crate::potts::AUX_SWEEPS,
            freeze_params: false,
            freeze_delta: false,
            freeze_basis: false,
            init_labels: None,
            init_params: None,
            init_basis: None,
        }
    }
}

impl GibbsConfig {
    pub fn validate(&self) -> Result<(), GibbsError> {
        let bad = |m: &str| Err(GibbsError::InvalidConfig(m.to_string()));
        if self.burn_in >= self.sweeps {
            return bad("burn_in must be below sweeps");
        }
        if self.thin == 0 {
            return bad("thin must be positive");
        }
        if !(self.a > 0.0 && self.b > 0.0) {
            return bad("a and b must be positive");
        }
        if !(self.delta_proposal_sd >= 0.0) {
            return bad("delta_proposal_sd must be non-negative");
        }
        if self.chains == 0 {
            return bad("chains must be positive");
        }
        let (lo, hi) = self.delta_prior;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return bad("delta prior must be a finite range within [0, ∞)");
        }
        if !(self.delta_init >= lo && self.delta_init <= hi) {
            return bad("delta_init must lie in the prior range");
        }
        Ok(())
    }
}

/// State of one retained sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainRecord {
    pub chain: usize,
    pub sweep: usize,
    pub labels: Vec<usize>,
    pub mu0: Vec<f64>,
    pub b_trend: Vec<f64>,
    pub b_seas: Vec<f64>,
    pub nu: Vec<f64>,
    pub delta: f64,
    pub log_posterior: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorChain {
    pub k: usize,
    pub records: Vec<ChainRecord>,
    pub delta_proposals: usize,
    pub delta_accepted: usize,
    pub empty_component_draws: usize,
}

impl PosteriorChain {
    pub fn acceptance_rate(&self) -> Option<f64> {
        (self.delta_proposals > 0).then(|| self.delta_accepted as f64 / self.delta_proposals as f64)
    }

    /// Newline-delimited JSON, one record per retained sweep.
    pub fn write_ndjson<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut out, r)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

// ---------------------------------------------------------------------------
// Conditional draws

/// Inverse-gamma draw with shape `n/2 + a` and scale `ss/2 + b`.
pub fn sample_noise_variance_ss<R: Rng + ?Sized>(ss: f64, n: usize, a: f64, b: f64, rng: &mut R) -> f64 {
    let shape = n as f64 / 2.0 + a;
    let scale = ss / 2.0 + b;
    let g = Gamma::new(shape, 1.0 / scale).expect("positive gamma parameters");
    1.0 / g.sample(rng)
}

/// Inverse-gamma conditional of a noise variance given residuals.
pub fn sample_noise_variance<R: Rng + ?Sized>(residuals: &[f64], cfg: &GibbsConfig, rng: &mut R) -> f64 {
    let ss = residuals.iter().map(|r| r * r).sum();
    sample_noise_variance_ss(ss, residuals.len(), cfg.a, cfg.b, rng)
}

/// Intercept-only conditional `N(ȳ, ν/n)`; `None` without members.
pub fn sample_component_mean<R: Rng + ?Sized>(members: &[f64], nu: f64, rng: &mut R) -> Option<f64> {
    if members.is_empty() {
        return None;
    }
    let n = members.len() as f64;
    let mean = members.iter().sum::<f64>() / n;
    let z: f64 = StandardNormal.sample(rng);
    Some(mean + (nu / n).sqrt() * z)
}

/// Diffuse draw `N(global_mean, 10 ν)` used for components without members.
pub fn sample_fallback_mean<R: Rng + ?Sized>(global_mean: f64, nu: f64, rng: &mut R) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    global_mean + (10.0 * nu).sqrt() * z
}

/// Draw from `N(β̂, ν (XᵀX)⁻¹)` given the normal equations.
pub fn sample_coefficients<R: Rng + ?Sized>(
    xtx: &nalgebra::DMatrix<f64>,
    xty: &nalgebra::DVector<f64>,
    nu: f64,
    rng: &mut R,
) -> Option<nalgebra::DVector<f64>> {
    let (beta, cov) = linalg::solve_normal(xtx, xty)?;
    let cov = cov * nu;
    let chol = linalg::cholesky_jittered(&cov)?;
    let z = nalgebra::DVector::from_fn(beta.len(), |_, _| StandardNormal.sample(rng));
    Some(beta + chol.l() * z)
}

/// Normalised label probabilities of site `i` given its neighbours.
pub fn label_weights(loglik_i: &[f64], labels: &[usize], i: usize, delta: f64, a: &Adjacency) -> Vec<f64> {
    let k = loglik_i.len();
    let mut logw = loglik_i.to_vec();
    for &j in a.neighbors(i) {
        logw[labels[j]] += delta;
    }
    let m = logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut w: Vec<f64> = logw.iter().map(|l| (l - m).exp()).collect();
    let total: f64 = w.iter().sum();
    for v in &mut w {
        *v /= total;
    }
    debug_assert_eq!(w.len(), k);
    w
}

fn draw_index<R: Rng + ?Sized>(w: &[f64], rng: &mut R) -> usize {
    let mut u: f64 = rng.random();
    for (k, &p) in w.iter().enumerate() {
        if u < p {
            return k;
        }
        u -= p;
    }
    w.len() - 1
}

/// One sequential single-site sweep over the labels in ascending site order.
pub fn sample_labels<R: Rng + ?Sized>(
    loglik: &[Vec<f64>],
    labels: &LabelField,
    delta: f64,
    a: &Adjacency,
    rng: &mut R,
) -> LabelField {
    let mut z = labels.labels.clone();
    for i in 0..z.len() {
        let w = label_weights(&loglik[i], &z, i, delta, a);
        z[i] = draw_index(&w, rng);
    }
    LabelField { labels: z, k: labels.k }
}

// ---------------------------------------------------------------------------
// Sampler

struct ChainState {
    labels: LabelField,
    params: MixtureParams,
    basis: BasisSet,
    delta: f64,
}

fn initial_state(data: &MixtureData, a: &Adjacency, k: usize, cfg: &GibbsConfig, chain: usize) -> Result<ChainState, GibbsError> {
    let labels = match &cfg.init_labels {
        Some(l) => nem::initial_labels(data, k, &nem::InitMethod::Given(l.clone()), cfg.seed, 0)?,
        None => {
            let pts = kmeans::standardize(&data.summaries());
            let mut rng = substream(cfg.seed, Stream::Init, chain as u32);
            LabelField {
                labels: kmeans::kmeans_best(&pts, k, 10, &mut rng),
                k,
            }
        }
    };
    let run = nem::run_nem(data, a, 0.0, &labels, 0, 0.0, false)?;
    let labels = run.c.harden();
    let basis = cfg.init_basis.clone().unwrap_or(run.basis);
    let mut params = cfg.init_params.clone().unwrap_or(run.params);
    let counts = labels.counts();
    params.pi = counts.iter().map(|&c| c as f64 / labels.len() as f64).collect();
    Ok(ChainState {
        labels,
        params,
        basis,
        delta: cfg.delta_init,
    })
}

fn log_posterior(loglik: &[Vec<f64>], labels: &LabelField, delta: f64, a: &Adjacency) -> f64 {
    let data: f64 = labels.labels.iter().enumerate().map(|(i, &z)| loglik[i][z]).sum();
    let same = a.edges().iter().filter(|&&(i, j)| labels.labels[i] == labels.labels[j]).count();
    data + delta * same as f64
}

fn update_params<R: Rng + ?Sized>(
    data: &MixtureData,
    state: &mut ChainState,
    cfg: &GibbsConfig,
    global_mean: f64,
    rng: &mut R,
) -> Result<usize, GibbsError> {
    let k = state.labels.k;
    let mut empty_draws = 0;
    let mut member_ss = vec![0.0; k];
    let mut member_n = vec![0usize; k];
    for comp in 0..k {
        let members: Vec<usize> = (0..data.n_sites()).filter(|&i| state.labels.labels[i] == comp).collect();
        let b = state.basis.get(comp).expect("basis is always filled");
        if members.is_empty() {
            state.params.mu0[comp] = sample_fallback_mean(global_mean, state.params.nu[comp], rng);
            empty_draws += 1;
            continue;
        }
        let mut xtx = nalgebra::DMatrix::zeros(3, 3);
        let mut xty = nalgebra::DVector::zeros(3);
        for &i in &members {
            for t in 0..data.t_len() {
                if !data.active[i][t] {
                    continue;
                }
                let x = [1.0, b.trend[t], b.seasonal[t]];
                for r in 0..3 {
                    xty[r] += x[r] * data.y[i][t];
                    for c in 0..3 {
                        xtx[(r, c)] += x[r] * x[c];
                    }
                }
            }
        }
        let beta = sample_coefficients(&xtx, &xty, state.params.nu[comp], rng).ok_or(GibbsError::SingularDesign(comp))?;
        state.params.mu0[comp] = beta[0];
        state.params.b_trend[comp] = beta[1];
        state.params.b_seas[comp] = beta[2];
        let curve = state.params.component_curve(comp, b);
        for &i in &members {
            for t in 0..data.t_len() {
                if data.active[i][t] {
                    member_ss[comp] += (data.y[i][t] - curve[t]).powi(2);
                    member_n[comp] += 1;
                }
            }
        }
    }
    if cfg.shared_variance {
        let nu = sample_noise_variance_ss(member_ss.iter().sum(), member_n.iter().sum(), cfg.a, cfg.b, rng);
        state.params.nu.iter_mut().for_each(|v| *v = nu);
    } else {
        for comp in 0..k {
            state.params.nu[comp] = sample_noise_variance_ss(member_ss[comp], member_n[comp], cfg.a, cfg.b, rng);
        }
    }
    Ok(empty_draws)
}

fn params_finite(p: &MixtureParams, delta: f64) -> bool {
    delta.is_finite()
        && p.mu0.iter().chain(&p.b_trend).chain(&p.b_seas).all(|v| v.is_finite())
        && p.nu.iter().all(|v| v.is_finite() && *v > 0.0)
}

fn run_chain(data: &MixtureData, a: &Adjacency, k: usize, cfg: &GibbsConfig, chain: usize) -> Result<PosteriorChain, GibbsError> {
    let mut state = initial_state(data, a, k, cfg, chain)?;
    let mut rng: ChaCha8Rng = substream(cfg.seed, Stream::Chain, chain as u32);
    let global_mean = data.active_mean();
    let mut out = PosteriorChain {
        k,
        records: Vec::with_capacity((cfg.sweeps - cfg.burn_in) / cfg.thin + 1),
        delta_proposals: 0,
        delta_accepted: 0,
        empty_component_draws: 0,
    };
    for sweep in 0..cfg.sweeps {
        let ll = nem::loglik_matrix(data, &state.params, &state.basis)?;
        state.labels = sample_labels(&ll, &state.labels, state.delta, a, &mut rng);

        if !cfg.freeze_basis {
            let fallback: Vec<ComponentBasis> = state
                .basis
                .components
                .iter()
                .map(|c| c.clone().expect("basis is always filled"))
                .collect();
            state.basis = nem::basis_from_labels(data, &state.labels, &fallback)?;
        }

        if !cfg.freeze_params {
            out.empty_component_draws += update_params(data, &mut state, cfg, global_mean, &mut rng)?;
        }
        let counts = state.labels.counts();
        state.params.pi = counts.iter().map(|&c| c as f64 / data.n_sites() as f64).collect();

        if !cfg.freeze_delta {
            let step = exchange_update_delta_with(
                &state.labels,
                &PottsParams { delta: state.delta },
                a,
                cfg.delta_proposal_sd,
                cfg.delta_prior,
                cfg.aux_sweeps,
                &mut rng,
            );
            out.delta_proposals += 1;
            out.delta_accepted += step.accepted as usize;
            state.delta = step.params.delta;
        }

        if !params_finite(&state.params, state.delta) {
            return Err(GibbsError::NonFinite(sweep));
        }
        if sweep >= cfg.burn_in && (sweep - cfg.burn_in) % cfg.thin == 0 {
            let ll = nem::loglik_matrix(data, &state.params, &state.basis)?;
            out.records.push(ChainRecord {
                chain,
                sweep,
                labels: state.labels.labels.clone(),
                mu0: state.params.mu0.clone(),
                b_trend: state.params.b_trend.clone(),
                b_seas: state.params.b_seas.clone(),
                nu: state.params.nu.clone(),
                delta: state.delta,
                log_posterior: log_posterior(&ll, &state.labels, state.delta, a),
            });
        }
    }
    Ok(out)
}

/// Runs `cfg.chains` independent chains in parallel.
pub fn run_gibbs_chains(data: &MixtureData, a: &Adjacency, k: usize, cfg: &GibbsConfig) -> Result<Vec<PosteriorChain>, GibbsError> {
    cfg.validate()?;
    if k < 2 {
        return Err(GibbsError::InvalidConfig("K must be at least 2".into()));
    }
    if k > data.n_sites() {
        return Err(GibbsError::InvalidConfig("K exceeds the number of sites".into()));
    }
    (0..cfg.chains)
        .into_par_iter()
        .map(|c| run_chain(data, a, k, cfg, c))
        .collect()
}

/// Single-chain sampler.
pub fn run_gibbs(data: &MixtureData, a: &Adjacency, k: usize, cfg: &GibbsConfig) -> Result<PosteriorChain, GibbsError> {
    let cfg = GibbsConfig { chains: 1, ..cfg.clone() };
    Ok(run_gibbs_chains(data, a, k, &cfg)?.remove(0))
}

// ---------------------------------------------------------------------------
// Summaries

/// Record relabelled so that components are sorted by ascending baseline.
pub fn canonical_record(r: &ChainRecord) -> ChainRecord {
    let mut order: Vec<usize> = (0..r.mu0.len()).collect();
    order.sort_by(|&x, &y| r.mu0[x].total_cmp(&r.mu0[y]).then(x.cmp(&y)));
    let mut inverse = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        inverse[old] = new;
    }
    let pick = |v: &Vec<f64>| order.iter().map(|&o| v[o]).collect();
    ChainRecord {
        labels: r.labels.iter().map(|&z| inverse[z]).collect(),
        mu0: pick(&r.mu0),
        b_trend: pick(&r.b_trend),
        b_seas: pick(&r.b_seas),
        nu: pick(&r.nu),
        ..r.clone()
    }
}

/// Split-R̂ of a scalar across chains; `None` with fewer than four draws per
/// chain.
pub fn split_rhat(chains: &[Vec<f64>]) -> Option<f64> {
    let half = chains.iter().map(Vec::len).min()? / 2;
    if half < 2 {
        return None;
    }
    let seqs: Vec<&[f64]> = chains.iter().flat_map(|c| [&c[..half], &c[half..2 * half]]).collect();
    let m = seqs.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = seqs.iter().map(|s| linalg::mean(s)).collect();
    let grand = linalg::mean(&means);
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = seqs
        .iter()
        .zip(&means)
        .map(|(s, mu)| s.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w <= 0.0 {
        return Some(1.0);
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Some((var_plus / w).sqrt())
}

/// Per-site posterior-mode labels (ties to the lowest index) and the tied
/// sites.
pub fn mode_labels(records: &[ChainRecord], n: usize, k: usize) -> (Vec<usize>, Vec<usize>) {
    let mut counts = vec![vec![0usize; k]; n];
    for r in records {
        for (i, &z) in r.labels.iter().enumerate() {
            counts[i][z] += 1;
        }
    }
    let mut ties = Vec::new();
    let labels = counts
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let max = *c.iter().max().unwrap_or(&0);
            let first = c.iter().position(|&v| v == max).unwrap_or(0);
            if c.iter().filter(|&&v| v == max).count() > 1 {
                ties.push(i);
            }
            first
        })
        .collect();
    (labels, ties)
}

/// MAP summary of one or more chains.
///
/// Records are first put in baseline order. Labels are per-site posterior
/// modes; parameters are posterior means over the records whose labelling
/// equals the MAP labelling, or over every record when none does.
pub fn map_estimate(chains: &[PosteriorChain], data: &MixtureData) -> Result<FitResult, GibbsError> {
    let k = chains.first().ok_or(GibbsError::EmptyChain)?.k;
    let per_chain: Vec<Vec<ChainRecord>> = chains
        .iter()
        .map(|c| c.records.iter().map(canonical_record).collect())
        .collect();
    let records: Vec<ChainRecord> = per_chain.iter().flatten().cloned().collect();
    if records.is_empty() {
        return Err(GibbsError::EmptyChain);
    }
    let n = data.n_sites();
    let (map, ties) = mode_labels(&records, n, k);
    let matching: Vec<&ChainRecord> = records.iter().filter(|r| r.labels == map).collect();
    let pool: Vec<&ChainRecord> = if matching.is_empty() { records.iter().collect() } else { matching };
    let avg = |f: fn(&ChainRecord) -> &Vec<f64>| -> Vec<f64> {
        (0..k).map(|c| pool.iter().map(|r| f(r)[c]).sum::<f64>() / pool.len() as f64).collect()
    };
    let labels = LabelField { labels: map, k };
    let counts = labels.counts();
    let params = MixtureParams {
        mu0: avg(|r| &r.mu0),
        b_trend: avg(|r| &r.b_trend),
        b_seas: avg(|r| &r.b_seas),
        nu: avg(|r| &r.nu),
        pi: counts.iter().map(|&c| c as f64 / n as f64).collect(),
    };
    let pooled = BasisSet::pooled(&data.bases).map_err(NemError::from)?;
    let basis = nem::basis_from_labels(data, &labels, &vec![pooled; k])?;
    let fitted = fit::mixture_fitted(&labels, &params, &basis);
    let sse = fit::sse(&fitted, data).expect("fitted values align with the panel");
    let component_category = fit::match_components(&labels, &data.compositions);

    let deltas: Vec<Vec<f64>> = per_chain.iter().map(|c| c.iter().map(|r| r.delta).collect()).collect();
    let (proposals, accepted) = chains
        .iter()
        .fold((0, 0), |(p, a), c| (p + c.delta_proposals, a + c.delta_accepted));
    let diagnostics = Diagnostics {
        delta_acceptance: (proposals > 0).then(|| accepted as f64 / proposals as f64),
        delta_mean: Some(linalg::mean(&records.iter().map(|r| r.delta).collect::<Vec<_>>())),
        rhat_delta: split_rhat(&deltas),
        rhat_mu0: (0..k)
            .filter_map(|c| split_rhat(&per_chain.iter().map(|ch| ch.iter().map(|r| r.mu0[c]).collect()).collect::<Vec<_>>()))
            .collect(),
        log_posterior_trace: records.iter().map(|r| r.log_posterior).collect(),
        tied_sites: ties,
        empty_component_draws: Some(chains.iter().map(|c| c.empty_component_draws).sum()),
        ..Diagnostics::default()
    };
    Ok(FitResult {
        method: Method::Gibbs,
        site_ids: data.site_ids.clone(),
        categories: data.categories.clone(),
        category_baselines: fit::category_baselines(&component_category, &params, data.n_categories()),
        component_category,
        map_labels: Some(labels),
        params: Some(params),
        basis: Some(basis),
        fitted,
        sse,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(labels: Vec<usize>, mu0: Vec<f64>) -> ChainRecord {
        let k = mu0.len();
        ChainRecord {
            chain: 0,
            sweep: 0,
            labels,
            mu0,
            b_trend: vec![0.0; k],
            b_seas: vec![0.0; k],
            nu: vec![1.0; k],
            delta: 0.5,
            log_posterior: 0.0,
        }
    }

    #[test]
    fn mode_and_ties() {
        let mut records = Vec::new();
        for i in 0..100 {
            records.push(record(vec![if i < 70 { 0 } else { 1 }, if i < 50 { 0 } else { 1 }], vec![0.0, 1.0]));
        }
        let (labels, ties) = mode_labels(&records, 2, 2);
        assert_eq!(labels, vec![0, 0]);
        assert_eq!(ties, vec![1]);
    }

    #[test]
    fn canonical_order_sorts_baselines() {
        let r = canonical_record(&record(vec![0, 1, 2], vec![3.0, 1.0, 2.0]));
        assert_eq!(r.mu0, vec![1.0, 2.0, 3.0]);
        assert_eq!(r.labels, vec![2, 0, 1]);
    }

    #[test]
    fn strong_neighbours_follow_formula() {
        // Star: site 0 joined to three neighbours labelled 1.
        let a = crate::lattice::adjacency_from_edges(4, &[(0, 1), (0, 2), (0, 3)]).unwrap();
        let w = label_weights(&[0.0, 0.0, 0.0], &[0, 1, 1, 1], 0, 5.0, &a);
        let e = (15.0f64).exp();
        assert!((w[1] - e / (e + 2.0)).abs() < 1e-12);
    }

    #[test]
    fn rhat_of_identical_chains_is_near_one() {
        let c: Vec<f64> = (0..400).map(|i| ((i * 7919) % 101) as f64).collect();
        let r = split_rhat(&[c.clone(), c]).unwrap();
        assert!((r - 1.0).abs() < 0.05);
        assert!(split_rhat(&[vec![1.0, 2.0]]).is_none());
    }

    #[test]
    fn config_validation() {
        let cfg = GibbsConfig {
            burn_in: 10,
            sweeps: 10,
            ..GibbsConfig::default()
        };
        assert!(cfg.validate().is_err());
        assert!(GibbsConfig::default().validate().is_ok());
    }
}
