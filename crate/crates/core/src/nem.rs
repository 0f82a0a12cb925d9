//! Neighborhood EM: a Gaussian mixture over site series whose responsibilities
//! are smoothed over the lattice by the penalty
//! `G(c) = Σ_i Σ_j Σ_k c_ik c_jk v_ij`.
//!
//! The fit maximises `U = Σ_ik c_ik (log π_k + ℓ_ik) − Σ_ik c_ik log c_ik + λ G(c)`.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fit::{self, Diagnostics, FitResult, Method};
use crate::kmeans;
use crate::lattice::Adjacency;
use crate::linalg;
use crate::potts::LabelField;
use crate::prep::MixtureData;
use crate::rng::{substream, Stream};
use crate::seasonal::{BasisSet, ComponentBasis, SeasonalError};

/// Penalty weights tried when λ is selected automatically.
pub const LAMBDA_GRID: [f64; 4] = [0.0, 0.5, 1.0, 2.0];

/// Every `HOLD_OUT_EVERY`-th grid step is held out for λ selection.
pub const HOLD_OUT_EVERY: usize = 5;

const FIXED_POINT_TOL: f64 = 1e-8;
const FIXED_POINT_ITERS: usize = 500;
const EMPTY_MASS: f64 = 1e-8;

#[derive(Debug, Error, PartialEq)]
pub enum NemError {
    #[error("component {0} has no responsibility mass")]
    EmptyComponent(usize),
    #[error("design matrix of component {0} is singular")]
    SingularDesign(usize),
    #[error("responsibility fixed point did not converge in {iterations} iterations (last change {change:e})")]
    FixedPointDiverged { iterations: usize, change: f64 },
    #[error("responsibilities have {rows} rows but the lattice has {sites} sites")]
    LengthMismatch { rows: usize, sites: usize },
    #[error("need K ≥ 2 components, got {0}")]
    TooFewComponents(usize),
    #[error("K = {k} exceeds the number of sites ({n})")]
    TooManyComponents { k: usize, n: usize },
    #[error("invalid initial labels: {0}")]
    InvalidInit(String),
    #[error(transparent)]
    Seasonal(#[from] SeasonalError),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
}

/// Parameters of the `K` mixture components.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixtureParams {
    pub mu0: Vec<f64>,
    pub b_trend: Vec<f64>,
    pub b_seas: Vec<f64>,
    pub nu: Vec<f64>,
    pub pi: Vec<f64>,
}

impl MixtureParams {
    pub fn k(&self) -> usize {
        self.mu0.len()
    }

    /// Mean curve `mu0 + b_trend·f₂ + b_seas·f₃` of component `k`.
    pub fn component_curve(&self, k: usize, basis: &ComponentBasis) -> Vec<f64> {
        basis
            .trend
            .iter()
            .zip(&basis.seasonal)
            .map(|(f2, f3)| self.mu0[k] + self.b_trend[k] * f2 + self.b_seas[k] * f3)
            .collect()
    }

    /// Reorders components so that new component `j` is old component
    /// `order[j]`.
    pub fn permuted(&self, order: &[usize]) -> MixtureParams {
        let pick = |v: &Vec<f64>| order.iter().map(|&o| v[o]).collect();
        MixtureParams {
            mu0: pick(&self.mu0),
            b_trend: pick(&self.b_trend),
            b_seas: pick(&self.b_seas),
            nu: pick(&self.nu),
            pi: pick(&self.pi),
        }
    }
}

/// Soft assignment of sites to components; rows sum to one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Responsibilities {
    pub c: Vec<Vec<f64>>,
}

impl Responsibilities {
    pub fn one_hot(labels: &LabelField) -> Responsibilities {
        Responsibilities {
            c: labels
                .labels
                .iter()
                .map(|&z| (0..labels.k).map(|k| if k == z { 1.0 } else { 0.0 }).collect())
                .collect(),
        }
    }

    pub fn k(&self) -> usize {
        self.c.first().map(Vec::len).unwrap_or(0)
    }

    /// Argmax label per site, ties to the lowest index.
    pub fn harden(&self) -> LabelField {
        let k = self.k();
        let labels = self
            .c
            .iter()
            .map(|row| {
                let mut best = 0;
                for j in 1..k {
                    if row[j] > row[best] {
                        best = j;
                    }
                }
                best
            })
            .collect();
        LabelField { labels, k }
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.k()];
        for row in &self.c {
            for (a, v) in s.iter_mut().zip(row) {
                *a += v;
            }
        }
        s
    }
}

fn gaussian_loglik(y: &[f64], active: &[bool], curve: &[f64], nu: f64) -> f64 {
    let mut ss = 0.0;
    let mut n = 0usize;
    for t in 0..y.len() {
        if active[t] {
            let r = y[t] - curve[t];
            ss += r * r;
            n += 1;
        }
    }
    -0.5 * n as f64 * (2.0 * std::f64::consts::PI * nu).ln() - 0.5 * ss / nu
}

/// Gaussian log-likelihood of site `i`'s active cells under component `k`.
pub fn site_loglik(
    data: &MixtureData,
    i: usize,
    k: usize,
    params: &MixtureParams,
    basis: &BasisSet,
) -> Result<f64, NemError> {
    let b = basis.get(k).ok_or(SeasonalError::EmptyComponent(k))?;
    let curve = params.component_curve(k, b);
    Ok(gaussian_loglik(&data.y[i], &data.active[i], &curve, params.nu[k]))
}

/// `ℓ_ik` for every site and component.
pub fn loglik_matrix(data: &MixtureData, params: &MixtureParams, basis: &BasisSet) -> Result<Vec<Vec<f64>>, NemError> {
    let curves: Vec<Vec<f64>> = (0..params.k())
        .map(|k| {
            basis
                .get(k)
                .map(|b| params.component_curve(k, b))
                .ok_or(NemError::Seasonal(SeasonalError::EmptyComponent(k)))
        })
        .collect::<Result<_, _>>()?;
    Ok((0..data.n_sites())
        .into_par_iter()
        .map(|i| {
            (0..params.k())
                .map(|k| gaussian_loglik(&data.y[i], &data.active[i], &curves[k], params.nu[k]))
                .collect()
        })
        .collect())
}

/// `G(c)`, counting each edge in both orientations.
pub fn penalty_g(c: &Responsibilities, a: &Adjacency) -> Result<f64, NemError> {
    if c.c.len() != a.n() {
        return Err(NemError::LengthMismatch {
            rows: c.c.len(),
            sites: a.n(),
        });
    }
    Ok(a.edges()
        .iter()
        .map(|&(i, j)| 2.0 * c.c[i].iter().zip(&c.c[j]).map(|(x, y)| x * y).sum::<f64>())
        .sum())
}

/// Penalised Hathaway criterion `U`.
pub fn objective(c: &Responsibilities, loglik: &[Vec<f64>], pi: &[f64], a: &Adjacency, lambda: f64) -> f64 {
    let mut u = 0.0;
    for (row, ll) in c.c.iter().zip(loglik) {
        for k in 0..row.len() {
            if row[k] > 0.0 {
                u += row[k] * (pi[k].ln() + ll[k] - row[k].ln());
            }
        }
    }
    if lambda != 0.0 {
        u += lambda * penalty_g(c, a).unwrap_or(0.0);
    }
    u
}

fn softmax_into(logits: &[f64], out: &mut [f64]) {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, l) in out.iter_mut().zip(logits) {
        *o = (l - m).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Responsibilities without the spatial term.
pub fn unpenalized(loglik: &[Vec<f64>], pi: &[f64]) -> Responsibilities {
    let c = loglik
        .iter()
        .map(|ll| {
            let logits: Vec<f64> = ll.iter().zip(pi).map(|(l, p)| l + p.ln()).collect();
            let mut row = vec![0.0; logits.len()];
            softmax_into(&logits, &mut row);
            row
        })
        .collect();
    Responsibilities { c }
}

/// Fixed point of `c_ik ∝ π_k exp(ℓ_ik + 2λ Σ_j v_ij c_jk)` from `start`.
///
/// Sites are updated in place in ascending order; every site update is the
/// exact maximiser of `U` in that row, so the sweep never lowers `U`.
pub fn fixed_point(
    loglik: &[Vec<f64>],
    pi: &[f64],
    a: &Adjacency,
    lambda: f64,
    start: Responsibilities,
) -> Result<Responsibilities, NemError> {
    let mut c = start;
    if c.c.len() != a.n() {
        return Err(NemError::LengthMismatch {
            rows: c.c.len(),
            sites: a.n(),
        });
    }
    let k = pi.len();
    let log_pi: Vec<f64> = pi.iter().map(|p| p.ln()).collect();
    let mut logits = vec![0.0; k];
    let mut row = vec![0.0; k];
    let mut change = f64::INFINITY;
    for _ in 0..FIXED_POINT_ITERS {
        change = 0.0;
        for i in 0..c.c.len() {
            for j in 0..k {
                logits[j] = log_pi[j] + loglik[i][j];
            }
            if lambda != 0.0 {
                for &nb in a.neighbors(i) {
                    for j in 0..k {
                        logits[j] += 2.0 * lambda * c.c[nb][j];
                    }
                }
            }
            softmax_into(&logits, &mut row);
            for j in 0..k {
                change = f64::max(change, (row[j] - c.c[i][j]).abs());
                c.c[i][j] = row[j];
            }
        }
        if change < FIXED_POINT_TOL {
            return Ok(c);
        }
    }
    Err(NemError::FixedPointDiverged {
        iterations: FIXED_POINT_ITERS,
        change,
    })
}

/// Penalised E-step from the unpenalised responsibilities.
pub fn e_step(
    data: &MixtureData,
    params: &MixtureParams,
    basis: &BasisSet,
    a: &Adjacency,
    lambda: f64,
) -> Result<Responsibilities, NemError> {
    let ll = loglik_matrix(data, params, basis)?;
    fixed_point(&ll, &params.pi, a, lambda, unpenalized(&ll, &params.pi))
}

/// Floor applied to every noise variance.
pub fn variance_floor(data: &MixtureData) -> f64 {
    let v = data.active_variance();
    if v > 0.0 {
        1e-8 * v
    } else {
        1e-12
    }
}

/// Per-site sufficient statistics of the regression on `[1, f₂, f₃]`.
struct SiteMoments {
    xtx: [[f64; 3]; 3],
    xty: [f64; 3],
    yty: f64,
    n: f64,
}

fn site_moments(y: &[f64], active: &[bool], b: &ComponentBasis) -> SiteMoments {
    let mut m = SiteMoments {
        xtx: [[0.0; 3]; 3],
        xty: [0.0; 3],
        yty: 0.0,
        n: 0.0,
    };
    for t in 0..y.len() {
        if !active[t] {
            continue;
        }
        let x = [1.0, b.trend[t], b.seasonal[t]];
        for r in 0..3 {
            m.xty[r] += x[r] * y[t];
            for c in 0..3 {
                m.xtx[r][c] += x[r] * x[c];
            }
        }
        m.yty += y[t] * y[t];
        m.n += 1.0;
    }
    m
}

/// Responsibility-weighted least squares per component.
pub fn m_step(data: &MixtureData, c: &Responsibilities, basis: &BasisSet) -> Result<MixtureParams, NemError> {
    let k = c.k();
    let n = data.n_sites();
    let floor = variance_floor(data);
    let sums = c.column_sums();
    let mut p = MixtureParams {
        mu0: vec![0.0; k],
        b_trend: vec![0.0; k],
        b_seas: vec![0.0; k],
        nu: vec![0.0; k],
        pi: sums.iter().map(|s| s / n as f64).collect(),
    };
    for comp in 0..k {
        if sums[comp] <= EMPTY_MASS {
            return Err(NemError::EmptyComponent(comp));
        }
        let b = basis.get(comp).ok_or(NemError::EmptyComponent(comp))?;
        let mut xtx = nalgebra::DMatrix::zeros(3, 3);
        let mut xty = nalgebra::DVector::zeros(3);
        let mut yty = 0.0;
        let mut weight_n = 0.0;
        for i in 0..n {
            let w = c.c[i][comp];
            if w == 0.0 {
                continue;
            }
            let m = site_moments(&data.y[i], &data.active[i], b);
            for r in 0..3 {
                xty[r] += w * m.xty[r];
                for s in 0..3 {
                    xtx[(r, s)] += w * m.xtx[r][s];
                }
            }
            yty += w * m.yty;
            weight_n += w * m.n;
        }
        let (beta, _) = linalg::solve_normal(&xtx, &xty).ok_or(NemError::SingularDesign(comp))?;
        // Residual sum of squares from the normal equations: yᵀy − 2βᵀXᵀy + βᵀXᵀXβ.
        let rss = yty - 2.0 * beta.dot(&xty) + beta.dot(&(&xtx * &beta));
        let mut direct = 0.0;
        if rss < 1e-6 * yty.max(1.0) {
            // Cancellation-prone regime: recompute residuals directly.
            let curve: Vec<f64> = b
                .trend
                .iter()
                .zip(&b.seasonal)
                .map(|(f2, f3)| beta[0] + beta[1] * f2 + beta[2] * f3)
                .collect();
            for i in 0..n {
                let w = c.c[i][comp];
                for t in 0..data.t_len() {
                    if w > 0.0 && data.active[i][t] {
                        direct += w * (data.y[i][t] - curve[t]).powi(2);
                    }
                }
            }
        } else {
            direct = rss;
        }
        p.mu0[comp] = beta[0];
        p.b_trend[comp] = beta[1];
        p.b_seas[comp] = beta[2];
        p.nu[comp] = (direct / weight_n).max(floor);
        if !(p.mu0[comp].is_finite() && p.nu[comp].is_finite()) {
            return Err(NemError::NonFinite("m-step"));
        }
    }
    Ok(p)
}

// ---------------------------------------------------------------------------
// Fitting

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InitMethod {
    KMeans,
    Random,
    Given(Vec<usize>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NemConfig {
    pub k: usize,
    /// Penalty weight; `None` selects it from [`LAMBDA_GRID`] by held-out
    /// likelihood.
    pub lambda: Option<f64>,
    pub max_iters: usize,
    pub tol: f64,
    pub seed: u64,
    pub restarts: usize,
    pub init: InitMethod,
    /// Recompute the temporal basis from hardened labels each iteration.
    pub update_basis: bool,
}

impl Default for NemConfig {
    fn default() -> Self {
        NemConfig {
            k: 4,
            lambda: Some(0.0),
            max_iters: 200,
            tol: 1e-6,
            seed: 0,
            restarts: 10,
            init: InitMethod::KMeans,
            update_basis: true,
        }
    }
}

/// Outcome of one NEM run from one initialisation.
#[derive(Clone, Debug)]
pub struct NemRun {
    pub c: Responsibilities,
    pub params: MixtureParams,
    pub basis: BasisSet,
    pub u_trace: Vec<f64>,
    pub segments: Vec<usize>,
    pub iterations: usize,
    pub converged: bool,
}

impl NemRun {
    pub fn final_u(&self) -> f64 {
        *self.u_trace.last().unwrap_or(&f64::NEG_INFINITY)
    }
}

/// Component bases from hard labels, empty components taken from `fallback`.
pub fn basis_from_labels(data: &MixtureData, labels: &LabelField, fallback: &[ComponentBasis]) -> Result<BasisSet, NemError> {
    let mut set = BasisSet::from_labels(&data.bases, &labels.labels, labels.k)?;
    set.fill_from(fallback);
    Ok(set)
}

fn components_of(basis: &BasisSet) -> Vec<ComponentBasis> {
    basis.components.iter().map(|c| c.clone().expect("filled basis")).collect()
}

/// Initial labels for restart `r`.
pub fn initial_labels(data: &MixtureData, k: usize, init: &InitMethod, seed: u64, r: usize) -> Result<LabelField, NemError> {
    let n = data.n_sites();
    let mut rng = substream(seed, Stream::Restart, r as u32);
    match init {
        InitMethod::KMeans => {
            let pts = kmeans::standardize(&data.summaries());
            Ok(LabelField {
                labels: kmeans::kmeans(&pts, k, 100, &mut rng),
                k,
            })
        }
        InitMethod::Random => {
            let mut labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..k)).collect();
            // Seed every component with at least one site.
            for (comp, i) in rand::seq::index::sample(&mut rng, n, k).into_iter().enumerate() {
                labels[i] = comp;
            }
            Ok(LabelField { labels, k })
        }
        InitMethod::Given(labels) => {
            if labels.len() != n {
                return Err(NemError::InvalidInit(format!("{} labels for {} sites", labels.len(), n)));
            }
            LabelField::new(labels.clone(), k).map_err(|e| NemError::InvalidInit(e.to_string()))
        }
    }
}

/// M-step that reseeds empty components at the worst-fitting sites.
fn m_step_reseeding(
    data: &MixtureData,
    c: &mut Responsibilities,
    basis: &mut BasisSet,
    loglik: Option<&[Vec<f64>]>,
) -> Result<(MixtureParams, bool), NemError> {
    let mut reseeded = false;
    for _ in 0..=c.k() {
        match m_step(data, c, basis) {
            Ok(p) => return Ok((p, reseeded)),
            Err(NemError::EmptyComponent(comp)) => {
                reseeded = true;
                let labels = c.harden();
                let counts = labels.counts();
                let fit_of = |i: usize| match loglik {
                    Some(ll) => c.c[i].iter().zip(&ll[i]).map(|(w, l)| w * l).sum::<f64>(),
                    None => -data.bases[i].remainder.iter().map(|r| r * r).sum::<f64>(),
                };
                let worst = (0..data.n_sites())
                    .filter(|&i| counts[labels.labels[i]] > 1)
                    .min_by(|&a, &b| fit_of(a).total_cmp(&fit_of(b)))
                    .ok_or(NemError::EmptyComponent(comp))?;
                for (j, v) in c.c[worst].iter_mut().enumerate() {
                    *v = if j == comp { 1.0 } else { 0.0 };
                }
                let fallback = components_of(basis);
                *basis = basis_from_labels(data, &c.harden(), &fallback)?;
            }
            Err(e) => return Err(e),
        }
    }
    Err(NemError::EmptyComponent(0))
}

/// One NEM run from fixed initial labels.
pub fn run_nem(
    data: &MixtureData,
    a: &Adjacency,
    lambda: f64,
    init: &LabelField,
    max_iters: usize,
    tol: f64,
    update_basis: bool,
) -> Result<NemRun, NemError> {
    let k = init.k;
    let pooled = BasisSet::pooled(&data.bases)?;
    let mut basis = basis_from_labels(data, init, &vec![pooled; k])?;
    let mut c = Responsibilities::one_hot(init);
    let (mut params, _) = m_step_reseeding(data, &mut c, &mut basis, None)?;
    let mut ll = loglik_matrix(data, &params, &basis)?;
    let mut u = objective(&c, &ll, &params.pi, a, lambda);
    let mut trace = vec![u];
    let mut segments = Vec::new();
    let mut converged = false;
    let mut iterations = 0;

    for _ in 0..max_iters {
        iterations += 1;
        // E-step: warm start, plus a cold start when the penalty can create
        // several fixed points.
        let mut c_new = fixed_point(&ll, &params.pi, a, lambda, c.clone());
        if lambda != 0.0 {
            let cold = fixed_point(&ll, &params.pi, a, lambda, unpenalized(&ll, &params.pi));
            c_new = match (c_new, cold) {
                (Ok(w), Ok(cd)) => {
                    let uw = objective(&w, &ll, &params.pi, a, lambda);
                    let uc = objective(&cd, &ll, &params.pi, a, lambda);
                    Ok(if uc > uw { cd } else { w })
                }
                (Ok(w), Err(_)) => Ok(w),
                (Err(_), Ok(cd)) => Ok(cd),
                (Err(e), Err(_)) => Err(e),
            };
        }
        let c_new = c_new?;
        if objective(&c_new, &ll, &params.pi, a, lambda) >= objective(&c, &ll, &params.pi, a, lambda) {
            c = c_new;
        }

        // M-step.
        let (p_new, reseeded) = m_step_reseeding(data, &mut c, &mut basis, Some(&ll))?;
        if reseeded {
            params = p_new;
            ll = loglik_matrix(data, &params, &basis)?;
            u = objective(&c, &ll, &params.pi, a, lambda);
            segments.push(trace.len());
            trace.push(u);
            continue;
        }
        let ll_new = loglik_matrix(data, &p_new, &basis)?;
        if objective(&c, &ll_new, &p_new.pi, a, lambda) >= objective(&c, &ll, &params.pi, a, lambda) {
            params = p_new;
            ll = ll_new;
        }

        // Basis refresh from the hardened labels, kept only if U does not drop.
        if update_basis {
            let candidate = basis_from_labels(data, &c.harden(), &components_of(&basis))?;
            if candidate != basis {
                let ll_cand = loglik_matrix(data, &params, &candidate)?;
                if objective(&c, &ll_cand, &params.pi, a, lambda) >= objective(&c, &ll, &params.pi, a, lambda) {
                    basis = candidate;
                    ll = ll_cand;
                }
            }
        }

        let u_new = objective(&c, &ll, &params.pi, a, lambda);
        if !u_new.is_finite() {
            return Err(NemError::NonFinite("objective"));
        }
        trace.push(u_new);
        let gain = u_new - u;
        u = u_new;
        if gain < tol {
            converged = true;
            break;
        }
    }
    Ok(NemRun {
        c,
        params,
        basis,
        u_trace: trace,
        segments,
        iterations,
        converged,
    })
}

/// Best of the configured restarts at a fixed penalty weight.
pub fn fit_nem_runs(data: &MixtureData, a: &Adjacency, lambda: f64, cfg: &NemConfig) -> Result<(usize, NemRun), NemError> {
    let n_runs = match cfg.init {
        InitMethod::Given(_) => 1,
        _ => cfg.restarts.max(1),
    };
    let runs: Vec<Result<NemRun, NemError>> = (0..n_runs)
        .into_par_iter()
        .map(|r| {
            let init = initial_labels(data, cfg.k, &cfg.init, cfg.seed, r)?;
            run_nem(data, a, lambda, &init, cfg.max_iters, cfg.tol, cfg.update_basis)
        })
        .collect();
    let mut best: Option<(usize, NemRun)> = None;
    let mut first_err = None;
    for (r, run) in runs.into_iter().enumerate() {
        match run {
            Ok(run) => {
                if best.as_ref().is_none_or(|(_, b)| run.final_u() > b.final_u()) {
                    best = Some((r, run));
                }
            }
            Err(e) => {
                first_err.get_or_insert(e);
            }
        }
    }
    best.ok_or_else(|| first_err.unwrap_or(NemError::EmptyComponent(0)))
}

/// Held-out predictive log-likelihood of the cells in `test`.
pub fn held_out_score(data: &MixtureData, test: &[Vec<bool>], run: &NemRun) -> f64 {
    (0..data.n_sites())
        .map(|i| {
            let terms: Vec<f64> = (0..run.params.k())
                .map(|k| {
                    let curve = run.params.component_curve(k, run.basis.get(k).expect("filled basis"));
                    run.c.c[i][k].ln() + gaussian_loglik(&data.y[i], &test[i], &curve, run.params.nu[k])
                })
                .collect();
            linalg::log_sum_exp(&terms)
        })
        .sum()
}

/// Penalty weight from [`LAMBDA_GRID`] with the best held-out score.
pub fn select_lambda(data: &MixtureData, a: &Adjacency, cfg: &NemConfig) -> Result<(f64, Vec<(f64, f64)>), NemError> {
    let (train, test) = data.hold_out(HOLD_OUT_EVERY);
    let mut scores = Vec::new();
    for &lambda in &LAMBDA_GRID {
        let (_, run) = fit_nem_runs(&train, a, lambda, cfg)?;
        scores.push((lambda, held_out_score(&train, &test, &run)));
    }
    let best = scores
        .iter()
        .fold((LAMBDA_GRID[0], f64::NEG_INFINITY), |acc, &(l, s)| if s > acc.1 { (l, s) } else { acc });
    Ok((best.0, scores))
}

/// Order that sorts components by ascending baseline.
pub fn baseline_order(params: &MixtureParams) -> Vec<usize> {
    let mut order: Vec<usize> = (0..params.k()).collect();
    order.sort_by(|&a, &b| params.mu0[a].total_cmp(&params.mu0[b]).then(a.cmp(&b)));
    order
}

/// Relabels a run so that components are sorted by ascending baseline.
pub fn canonicalize(labels: &LabelField, params: &MixtureParams, basis: &BasisSet) -> (LabelField, MixtureParams, BasisSet) {
    let order = baseline_order(params);
    let mut inverse = vec![0; order.len()];
    for (new, &old) in order.iter().enumerate() {
        inverse[old] = new;
    }
    let labels = LabelField {
        labels: labels.labels.iter().map(|&z| inverse[z]).collect(),
        k: labels.k,
    };
    let basis = BasisSet {
        t_len: basis.t_len,
        components: order.iter().map(|&o| basis.components[o].clone()).collect(),
    };
    (labels, params.permuted(&order), basis)
}

/// Full NEM fit: λ selection (when unset), restarts, and the fit summary.
pub fn fit_nem(data: &MixtureData, a: &Adjacency, cfg: &NemConfig) -> Result<FitResult, NemError> {
    if cfg.k < 2 {
        return Err(NemError::TooFewComponents(cfg.k));
    }
    if cfg.k > data.n_sites() {
        return Err(NemError::TooManyComponents {
            k: cfg.k,
            n: data.n_sites(),
        });
    }
    let (lambda, scores) = match cfg.lambda {
        Some(l) => (l, Vec::new()),
        None => select_lambda(data, a, cfg)?,
    };
    let (restart, run) = fit_nem_runs(data, a, lambda, cfg)?;
    let (labels, params, basis) = canonicalize(&run.c.harden(), &run.params, &run.basis);
    let fitted = fit::mixture_fitted(&labels, &params, &basis);
    let sse = fit::sse(&fitted, data).expect("fitted values align with the panel");
    let matching = fit::match_components(&labels, &data.compositions);
    Ok(FitResult {
        method: Method::Nem,
        site_ids: data.site_ids.clone(),
        categories: data.categories.clone(),
        category_baselines: fit::category_baselines(&matching, &params, data.n_categories()),
        component_category: matching,
        map_labels: Some(labels),
        params: Some(params),
        basis: Some(basis),
        fitted,
        sse,
        diagnostics: Diagnostics {
            u_trace: run.u_trace,
            trace_segments: run.segments,
            iterations: Some(run.iterations),
            converged: Some(run.converged),
            lambda: Some(lambda),
            lambda_scores: scores,
            restart: Some(restart),
            ..Diagnostics::default()
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn penalty_examples() {
        let c4 = Adjacency::cycle(4);
        let hard = Responsibilities::one_hot(&LabelField::new(vec![0, 0, 1, 1], 2).unwrap());
        assert_eq!(penalty_g(&hard, &c4), Ok(4.0));
        let uniform = Responsibilities {
            c: vec![vec![1.0 / 3.0; 3]; 4],
        };
        assert!((penalty_g(&uniform, &c4).unwrap() - 2.0 * 4.0 / 3.0).abs() < 1e-12);
        let none = crate::lattice::adjacency_from_edges(4, &[]).unwrap();
        assert_eq!(penalty_g(&hard, &none), Ok(0.0));
    }

    #[test]
    fn zero_lambda_is_one_pass_em() {
        let ll = vec![vec![-1.0, -2.0], vec![-3.0, -1.5]];
        let pi = [0.3, 0.7];
        let a = Adjacency::path(2);
        let c = fixed_point(&ll, &pi, &a, 0.0, unpenalized(&ll, &pi)).unwrap();
        for (row, l) in c.c.iter().zip(&ll) {
            let w: Vec<f64> = l.iter().zip(&pi).map(|(x, p)| p * x.exp()).collect();
            let s: f64 = w.iter().sum();
            for k in 0..2 {
                assert!((row[k] - w[k] / s).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn symmetric_site_is_split_evenly() {
        let ll = vec![vec![-4.0, -4.0]];
        let a = crate::lattice::adjacency_from_edges(1, &[]).unwrap();
        let c = fixed_point(&ll, &[0.5, 0.5], &a, 1.0, unpenalized(&ll, &[0.5, 0.5])).unwrap();
        assert_eq!(c.c[0], vec![0.5, 0.5]);
    }

    #[test]
    fn neighbours_pull_the_middle_site() {
        let ll = vec![vec![0.0, -5.0], vec![-0.2, 0.0], vec![0.0, -5.0]];
        let pi = [0.5, 0.5];
        let a = Adjacency::path(3);
        let free = fixed_point(&ll, &pi, &a, 0.0, unpenalized(&ll, &pi)).unwrap();
        let pulled = fixed_point(&ll, &pi, &a, 1.0, unpenalized(&ll, &pi)).unwrap();
        assert!(pulled.c[1][0] > free.c[1][0]);
        for row in &pulled.c {
            assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
