//! Loess smoothing, STL decomposition and the per-land-use temporal basis.
//!
//! The STL routine follows Cleveland et al.'s inner loop (cycle-subseries
//! smoothing, low-pass filter, detrended seasonal, trend smoothing) with the
//! optional robustness outer loop. The local regression kernel reproduces the
//! netlib conventions: tricube weights on the `q` nearest points, the
//! `0.999 h` / `0.001 h` weight cut-offs and the span inflation when the
//! window is wider than the series.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::RegularSeries;

#[derive(Debug, Error, PartialEq)]
pub enum SeasonalError {
    #[error("span covers {points} points, need at least {needed}")]
    SpanTooSmall { points: usize, needed: usize },
    #[error("x and y lengths differ ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("unsupported loess degree {0}")]
    BadDegree(usize),
    #[error("series of length {len} is shorter than two periods of {period}")]
    SeriesTooShort { len: usize, period: usize },
    #[error("period must be at least 2")]
    BadPeriod,
    #[error("component {0} has no member sites")]
    EmptyComponent(usize),
    #[error("site bases do not share a common grid")]
    GridMismatch,
}

// ---------------------------------------------------------------------------
// Local regression kernel

/// Fits a local polynomial at `xs` from the points `lo..=hi`.
///
/// `inflate` widens the bandwidth, used when the requested span exceeds the
/// number of available points. `range` is the spread of the whole abscissa
/// and guards the local slope against near-degenerate windows.
#[allow(clippy::too_many_arguments)]
fn local_fit(
    x: &[f64],
    y: &[f64],
    robustness: Option<&[f64]>,
    xs: f64,
    lo: usize,
    hi: usize,
    inflate: f64,
    degree: usize,
    range: f64,
) -> Option<f64> {
    let h = (xs - x[lo]).max(x[hi] - xs) + inflate;
    let (h9, h1) = (0.999 * h, 0.001 * h);
    let mut w = vec![0.0; hi - lo + 1];
    let mut total = 0.0;
    for j in lo..=hi {
        let r = (x[j] - xs).abs();
        let mut wj = if r <= h1 {
            1.0
        } else if r <= h9 {
            let u = r / h;
            let v = 1.0 - u * u * u;
            v * v * v
        } else {
            0.0
        };
        if let Some(rw) = robustness {
            wj *= rw[j];
        }
        w[j - lo] = wj;
        total += wj;
    }
    if total <= 0.0 {
        return None;
    }
    for wj in &mut w {
        *wj /= total;
    }
    match degree {
        0 => {}
        1 => linear_weights(&mut w, &x[lo..=hi], xs, range),
        _ => {
            if !quadratic_weights(&mut w, &x[lo..=hi], xs) {
                linear_weights(&mut w, &x[lo..=hi], xs, range);
            }
        }
    }
    Some(w.iter().zip(&y[lo..=hi]).map(|(wj, yj)| wj * yj).sum())
}

/// Turns normalised kernel weights into the equivalent-kernel weights of a
/// local linear fit evaluated at `xs`.
fn linear_weights(w: &mut [f64], x: &[f64], xs: f64, range: f64) {
    let a: f64 = w.iter().zip(x).map(|(wj, xj)| wj * xj).sum();
    let c: f64 = w.iter().zip(x).map(|(wj, xj)| wj * (xj - a) * (xj - a)).sum();
    if c.sqrt() > 0.001 * range {
        let b = (xs - a) / c;
        for (wj, xj) in w.iter_mut().zip(x) {
            *wj *= b * (xj - a) + 1.0;
        }
    }
}

/// Equivalent-kernel weights of a local quadratic fit; `false` when the
/// weighted moment matrix is singular.
fn quadratic_weights(w: &mut [f64], x: &[f64], xs: f64) -> bool {
    let mut m = [[0.0; 3]; 3];
    for (wj, xj) in w.iter().zip(x) {
        let d = xj - xs;
        let p = [1.0, d, d * d];
        for r in 0..3 {
            for c in 0..3 {
                m[r][c] += wj * p[r] * p[c];
            }
        }
    }
    // First row of M⁻¹ gives the intercept at d = 0.
    let Some(inv) = crate::linalg::invert3(&m) else {
        return false;
    };
    for (wj, xj) in w.iter_mut().zip(x) {
        let d = xj - xs;
        *wj *= inv[0][0] + inv[0][1] * d + inv[0][2] * d * d;
    }
    true
}

/// Locally weighted polynomial regression evaluated at every `x`.
///
/// Each fit uses the `floor(span · n)` nearest points with tricube weights.
/// The abscissa need not be sorted.
pub fn loess_smooth(y: &[f64], x: &[f64], span: f64, degree: usize) -> Result<Vec<f64>, SeasonalError> {
    if x.len() != y.len() {
        return Err(SeasonalError::LengthMismatch(x.len(), y.len()));
    }
    if degree > 2 {
        return Err(SeasonalError::BadDegree(degree));
    }
    let n = x.len();
    let q = ((span.min(1.0) * n as f64) + 1e-10).floor() as usize;
    if !(span > 0.0) || q < degree + 1 {
        return Err(SeasonalError::SpanTooSmall {
            points: q,
            needed: degree + 1,
        });
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let xs: Vec<f64> = order.iter().map(|&i| x[i]).collect();
    let ys: Vec<f64> = order.iter().map(|&i| y[i]).collect();
    let range = xs[n - 1] - xs[0];

    let mut fitted = vec![0.0; n];
    let mut lo = 0;
    for (k, &i) in order.iter().enumerate() {
        let at = xs[k];
        while lo + q < n && xs[lo + q] - at < at - xs[lo] {
            lo += 1;
        }
        let hi = lo + q - 1;
        fitted[i] = local_fit(&xs, &ys, None, at, lo, hi, 0.0, degree, range).unwrap_or(ys[k]);
    }
    Ok(fitted)
}

/// Loess over unit-spaced positions `0..n` with a span of `len` points,
/// evaluated at every position (netlib `stless`).
fn smooth_positions(y: &[f64], len: usize, degree: usize, robustness: Option<&[f64]>) -> Vec<f64> {
    let n = y.len();
    if n < 2 {
        return y.to_vec();
    }
    let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let range = (n - 1) as f64;
    let mut out = vec![0.0; n];
    if len >= n {
        let inflate = ((len - n) / 2) as f64;
        for i in 0..n {
            out[i] = local_fit(&x, y, robustness, i as f64, 0, n - 1, inflate, degree, range).unwrap_or(y[i]);
        }
    } else {
        let half = (len + 1) / 2;
        let (mut lo, mut hi) = (0, len - 1);
        for i in 0..n {
            if i + 1 > half && hi != n - 1 {
                lo += 1;
                hi += 1;
            }
            out[i] = local_fit(&x, y, robustness, i as f64, lo, hi, 0.0, degree, range).unwrap_or(y[i]);
        }
    }
    out
}

/// Loess estimate at an arbitrary position `xs` using the window `lo..=hi`
/// (netlib `stlest`).
fn estimate_at(
    y: &[f64],
    len: usize,
    degree: usize,
    robustness: Option<&[f64]>,
    xs: f64,
    lo: usize,
    hi: usize,
) -> Option<f64> {
    let n = y.len();
    let x: Vec<f64> = (0..n).map(|i| i as f64).collect();
    let inflate = if len > n { ((len - n) / 2) as f64 } else { 0.0 };
    local_fit(&x, y, robustness, xs, lo, hi, inflate, degree, (n - 1) as f64)
}

// ---------------------------------------------------------------------------
// STL

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StlParams {
    pub period: usize,
    pub seasonal_span: usize,
    pub trend_span: usize,
    pub lowpass_span: usize,
    pub seasonal_degree: usize,
    pub trend_degree: usize,
    pub lowpass_degree: usize,
    pub inner_iters: usize,
    /// Robustness iterations; 0 disables the outer loop.
    pub outer_iters: usize,
}

fn next_odd(v: usize) -> usize {
    if v % 2 == 0 {
        v + 1
    } else {
        v
    }
}

impl StlParams {
    /// Standard spans for a period: seasonal 7, trend the smallest odd
    /// integer ≥ 1.5·period / (1 − 1.5/7), low-pass the smallest odd integer
    /// above the period.
    pub fn for_period(period: usize) -> StlParams {
        let seasonal_span = 7;
        let trend = (1.5 * period as f64 / (1.0 - 1.5 / seasonal_span as f64)).ceil() as usize;
        StlParams {
            period,
            seasonal_span,
            trend_span: next_odd(trend),
            lowpass_span: next_odd(period + 1),
            seasonal_degree: 1,
            trend_degree: 1,
            lowpass_degree: 1,
            inner_iters: 2,
            outer_iters: 0,
        }
    }

    /// Enables the robustness loop with the customary 15 outer and 1 inner
    /// iteration.
    pub fn robust(mut self) -> StlParams {
        self.inner_iters = 1;
        self.outer_iters = 15;
        self
    }
}

impl Default for StlParams {
    fn default() -> Self {
        StlParams::for_period(52)
    }
}

/// Raw STL output, `y = trend + seasonal + remainder`.
#[derive(Clone, Debug, PartialEq)]
pub struct Stl {
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
}

fn moving_average(x: &[f64], len: usize) -> Vec<f64> {
    x.windows(len).map(|w| w.iter().sum::<f64>() / len as f64).collect()
}

fn cycle_subseries(
    y: &[f64],
    params: &StlParams,
    robustness: Option<&[f64]>,
) -> Vec<f64> {
    let n = y.len();
    let np = params.period;
    let ns = params.seasonal_span;
    let mut out = vec![0.0; n + 2 * np];
    for j in 0..np {
        let sub: Vec<f64> = (j..n).step_by(np).map(|i| y[i]).collect();
        let sub_rw: Option<Vec<f64>> = robustness.map(|rw| (j..n).step_by(np).map(|i| rw[i]).collect());
        let k = sub.len();
        let smoothed = smooth_positions(&sub, ns, params.seasonal_degree, sub_rw.as_deref());
        let first = estimate_at(&sub, ns, params.seasonal_degree, sub_rw.as_deref(), -1.0, 0, ns.min(k) - 1)
            .unwrap_or(smoothed[0]);
        let last_lo = (k as isize - ns as isize).max(0) as usize;
        let last = estimate_at(&sub, ns, params.seasonal_degree, sub_rw.as_deref(), k as f64, last_lo, k - 1)
            .unwrap_or(smoothed[k - 1]);
        out[j] = first;
        for (m, v) in smoothed.iter().enumerate() {
            out[(m + 1) * np + j] = *v;
        }
        out[(k + 1) * np + j] = last;
    }
    out
}

fn inner_loop(y: &[f64], params: &StlParams, robustness: Option<&[f64]>, trend: &mut Vec<f64>, seasonal: &mut Vec<f64>) {
    let n = y.len();
    let np = params.period;
    for _ in 0..params.inner_iters {
        let detrended: Vec<f64> = y.iter().zip(trend.iter()).map(|(a, b)| a - b).collect();
        let cycle = cycle_subseries(&detrended, params, robustness);
        let low = moving_average(&moving_average(&moving_average(&cycle, np), np), 3);
        let low = smooth_positions(&low, params.lowpass_span, params.lowpass_degree, None);
        for i in 0..n {
            seasonal[i] = cycle[np + i] - low[i];
        }
        let deseasoned: Vec<f64> = y.iter().zip(seasonal.iter()).map(|(a, b)| a - b).collect();
        *trend = smooth_positions(&deseasoned, params.trend_span, params.trend_degree, robustness);
    }
}

fn robustness_weights(y: &[f64], fit: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = y.iter().zip(fit).map(|(a, b)| (a - b).abs()).collect();
    let mut sorted = r.clone();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let median = 0.5 * (sorted[(n - 1) / 2] + sorted[n / 2]);
    let cmad = 6.0 * median;
    r.iter()
        .map(|&ri| {
            if ri <= 0.001 * cmad {
                1.0
            } else if ri <= 0.999 * cmad {
                let u = ri / cmad;
                (1.0 - u * u) * (1.0 - u * u)
            } else {
                0.0
            }
        })
        .collect()
}

/// Seasonal-trend decomposition of a regularly spaced series.
pub fn stl(y: &[f64], params: &StlParams) -> Result<Stl, SeasonalError> {
    let np = params.period;
    if np < 2 {
        return Err(SeasonalError::BadPeriod);
    }
    if y.len() < 2 * np {
        return Err(SeasonalError::SeriesTooShort { len: y.len(), period: np });
    }
    let mut p = params.clone();
    p.seasonal_span = next_odd(p.seasonal_span.max(3));
    p.trend_span = next_odd(p.trend_span.max(3));
    p.lowpass_span = next_odd(p.lowpass_span.max(3));
    p.inner_iters = p.inner_iters.max(1);

    let n = y.len();
    let mut trend = vec![0.0; n];
    let mut seasonal = vec![0.0; n];
    inner_loop(y, &p, None, &mut trend, &mut seasonal);
    for _ in 0..p.outer_iters {
        let fit: Vec<f64> = trend.iter().zip(&seasonal).map(|(t, s)| t + s).collect();
        let rw = robustness_weights(y, &fit);
        inner_loop(y, &p, Some(&rw), &mut trend, &mut seasonal);
    }
    let remainder = (0..n).map(|i| y[i] - trend[i] - seasonal[i]).collect();
    Ok(Stl {
        trend,
        seasonal,
        remainder,
    })
}

// ---------------------------------------------------------------------------
// Site bases

/// Per-site decomposition `y = f_const + trend_scale·f_trend +
/// seasonal_scale·f_seasonal + remainder`, with unit-norm shape vectors.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SiteBasis {
    pub site_id: String,
    pub f_const: f64,
    pub f_trend: Vec<f64>,
    pub f_seasonal: Vec<f64>,
    pub remainder: Vec<f64>,
    pub trend_scale: f64,
    pub seasonal_scale: f64,
}

impl SiteBasis {
    pub fn len(&self) -> usize {
        self.remainder.len()
    }

    pub fn is_empty(&self) -> bool {
        self.remainder.is_empty()
    }

    pub fn trend_component(&self) -> Vec<f64> {
        self.f_trend.iter().map(|v| self.trend_scale * v).collect()
    }

    pub fn seasonal_component(&self) -> Vec<f64> {
        self.f_seasonal.iter().map(|v| self.seasonal_scale * v).collect()
    }

    pub fn reconstruct(&self) -> Vec<f64> {
        (0..self.len())
            .map(|t| {
                self.f_const + self.trend_scale * self.f_trend[t] + self.seasonal_scale * self.f_seasonal[t]
                    + self.remainder[t]
            })
            .collect()
    }

    /// Least-squares slope of the trend component per grid step.
    pub fn trend_slope(&self) -> f64 {
        let n = self.len() as f64;
        let mid = (n - 1.0) / 2.0;
        let (num, den) = (0..self.len()).fold((0.0, 0.0), |(num, den), t| {
            let d = t as f64 - mid;
            (num + d * self.trend_scale * self.f_trend[t], den + d * d)
        });
        if den > 0.0 {
            num / den
        } else {
            0.0
        }
    }

    /// Amplitude of a sinusoid with the same energy as the seasonal component.
    pub fn seasonal_amplitude(&self) -> f64 {
        self.seasonal_scale * (2.0 / self.len() as f64).sqrt()
    }
}

fn unit_or(v: Vec<f64>, fallback: impl Fn(usize) -> f64, reference: f64) -> (Vec<f64>, f64) {
    let norm = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if norm > 1e-12 * reference.max(1.0) {
        (v.iter().map(|a| a / norm).collect(), norm)
    } else {
        let mut f: Vec<f64> = (0..v.len()).map(fallback).collect();
        let mean = f.iter().sum::<f64>() / f.len() as f64;
        f.iter_mut().for_each(|a| *a -= mean);
        let n = f.iter().map(|a| a * a).sum::<f64>().sqrt();
        (f.iter().map(|a| a / n).collect(), 0.0)
    }
}

/// STL on a regular series, split into constant, trend, seasonal and
/// remainder pieces.
///
/// The seasonal component is centred within every cycle block (the means are
/// moved into the trend), so each full cycle of the seasonal part sums to
/// zero. A zero-energy trend or seasonal piece gets scale 0 and a fixed unit
/// shape vector.
pub fn stl_decompose(series: &RegularSeries, params: &StlParams) -> Result<SiteBasis, SeasonalError> {
    decompose_values(&series.site_id, &series.values, params)
}

pub fn decompose_values(site_id: &str, y: &[f64], params: &StlParams) -> Result<SiteBasis, SeasonalError> {
    let raw = stl(y, params)?;
    let n = y.len();
    let np = params.period;
    let mut trend = raw.trend;
    let mut seasonal = raw.seasonal;
    for start in (0..n).step_by(np) {
        let end = (start + np).min(n);
        let mean = seasonal[start..end].iter().sum::<f64>() / (end - start) as f64;
        for t in start..end {
            seasonal[t] -= mean;
            trend[t] += mean;
        }
    }
    let f_const = y.iter().sum::<f64>() / n as f64;
    let trend_mean = trend.iter().sum::<f64>() / n as f64;
    let centred_trend: Vec<f64> = trend.iter().map(|v| v - trend_mean).collect();
    let reference = y.iter().map(|v| v * v).sum::<f64>().sqrt();
    let (f_trend, trend_scale) = unit_or(centred_trend, |t| t as f64, reference);
    let (f_seasonal, seasonal_scale) = unit_or(
        seasonal,
        |t| (2.0 * std::f64::consts::PI * t as f64 / np as f64).sin(),
        reference,
    );
    let remainder = (0..n)
        .map(|t| y[t] - (f_const + trend_scale * f_trend[t] + seasonal_scale * f_seasonal[t]))
        .collect();
    Ok(SiteBasis {
        site_id: site_id.to_string(),
        f_const,
        f_trend,
        f_seasonal,
        remainder,
        trend_scale,
        seasonal_scale,
    })
}

// ---------------------------------------------------------------------------
// Land-use basis

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Constant,
    Trend,
    Seasonal,
}

impl BasisKind {
    pub const ALL: [BasisKind; 3] = [BasisKind::Constant, BasisKind::Trend, BasisKind::Seasonal];

    pub fn name(self) -> &'static str {
        match self {
            BasisKind::Constant => "constant",
            BasisKind::Trend => "trend",
            BasisKind::Seasonal => "seasonal",
        }
    }
}

fn site_piece(b: &SiteBasis, kind: BasisKind) -> Vec<f64> {
    match kind {
        BasisKind::Constant => vec![b.f_const; b.len()],
        BasisKind::Trend => b.trend_component(),
        BasisKind::Seasonal => b.seasonal_component(),
    }
}

fn check_grid(site_bases: &[SiteBasis]) -> Result<usize, SeasonalError> {
    let t_len = site_bases.first().map(SiteBasis::len).unwrap_or(0);
    if site_bases.iter().any(|b| b.len() != t_len) {
        return Err(SeasonalError::GridMismatch);
    }
    Ok(t_len)
}

/// Pointwise mean of the scaled `kind` pieces over the sites labelled `k`.
pub fn landuse_basis(
    site_bases: &[SiteBasis],
    labels: &[usize],
    k: usize,
    kind: BasisKind,
) -> Result<Vec<f64>, SeasonalError> {
    let t_len = check_grid(site_bases)?;
    let members: Vec<&SiteBasis> = site_bases
        .iter()
        .zip(labels)
        .filter(|(_, &z)| z == k)
        .map(|(b, _)| b)
        .collect();
    if members.is_empty() {
        return Err(SeasonalError::EmptyComponent(k));
    }
    let mut acc = vec![0.0; t_len];
    for b in &members {
        for (a, v) in acc.iter_mut().zip(site_piece(b, kind)) {
            *a += v;
        }
    }
    let m = members.len() as f64;
    Ok(acc.into_iter().map(|a| a / m).collect())
}

/// Temporal basis of one mixture component.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComponentBasis {
    pub constant: f64,
    pub trend: Vec<f64>,
    pub seasonal: Vec<f64>,
    pub members: usize,
}

impl ComponentBasis {
    pub fn curve(&self, kind: BasisKind) -> Vec<f64> {
        match kind {
            BasisKind::Constant => vec![self.constant; self.trend.len()],
            BasisKind::Trend => self.trend.clone(),
            BasisKind::Seasonal => self.seasonal.clone(),
        }
    }
}

/// Component bases over a shared grid; `None` marks a component without
/// member sites.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BasisSet {
    pub t_len: usize,
    pub components: Vec<Option<ComponentBasis>>,
}

impl BasisSet {
    pub fn from_labels(site_bases: &[SiteBasis], labels: &[usize], k: usize) -> Result<BasisSet, SeasonalError> {
        let t_len = check_grid(site_bases)?;
        let components = (0..k)
            .map(|c| {
                let members = labels.iter().filter(|&&z| z == c).count();
                if members == 0 {
                    return Ok(None);
                }
                let piece = |kind| landuse_basis(site_bases, labels, c, kind);
                Ok(Some(ComponentBasis {
                    constant: piece(BasisKind::Constant)?[0],
                    trend: piece(BasisKind::Trend)?,
                    seasonal: piece(BasisKind::Seasonal)?,
                    members,
                }))
            })
            .collect::<Result<_, SeasonalError>>()?;
        Ok(BasisSet { t_len, components })
    }

    /// Single basis averaged over every site.
    pub fn pooled(site_bases: &[SiteBasis]) -> Result<ComponentBasis, SeasonalError> {
        let labels = vec![0; site_bases.len()];
        let set = BasisSet::from_labels(site_bases, &labels, 1)?;
        set.components
            .into_iter()
            .next()
            .flatten()
            .ok_or(SeasonalError::EmptyComponent(0))
    }

    pub fn k(&self) -> usize {
        self.components.len()
    }

    pub fn get(&self, k: usize) -> Option<&ComponentBasis> {
        self.components.get(k).and_then(Option::as_ref)
    }

    pub fn is_empty(&self) -> bool {
        self.components.iter().all(Option::is_none)
    }

    /// Replaces empty components by the matching entry of `fallback`.
    pub fn fill_from(&mut self, fallback: &[ComponentBasis]) {
        for (slot, fb) in self.components.iter_mut().zip(fallback) {
            if slot.is_none() {
                let mut frozen = fb.clone();
                frozen.members = 0;
                *slot = Some(frozen);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn linspace(n: usize) -> Vec<f64> {
        (0..n).map(|i| i as f64).collect()
    }

    #[test]
    fn constant_is_a_fixed_point() {
        let x = linspace(40);
        let y = vec![3.25; 40];
        for degree in 0..=2 {
            for span in [0.2, 0.5, 1.0] {
                let fit = loess_smooth(&y, &x, span, degree).unwrap();
                assert!(fit.iter().all(|v| (v - 3.25).abs() < 1e-12), "degree {degree} span {span}");
            }
        }
    }

    #[test]
    fn local_linear_reproduces_a_line() {
        let x: Vec<f64> = (0..50).map(|i| (i as f64 * 0.37).sin() * 10.0 + i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v| 1.5 - 0.25 * v).collect();
        for span in [0.1, 0.3, 1.0] {
            let fit = loess_smooth(&y, &x, span, 1).unwrap();
            for (a, b) in fit.iter().zip(&y) {
                assert!((a - b).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn quadratic_is_idempotent_at_degree_two() {
        let x = linspace(30);
        let y: Vec<f64> = x.iter().map(|v| 0.5 + v - 0.03 * v * v).collect();
        let once = loess_smooth(&y, &x, 0.4, 2).unwrap();
        for (a, b) in once.iter().zip(&y) {
            assert!((a - b).abs() < 1e-9);
        }
        let twice = loess_smooth(&once, &x, 0.4, 2).unwrap();
        for (a, b) in twice.iter().zip(&once) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn span_too_small() {
        let x = linspace(10);
        assert_eq!(
            loess_smooth(&x, &x, 0.1, 1),
            Err(SeasonalError::SpanTooSmall { points: 1, needed: 2 })
        );
    }

    #[test]
    fn constant_series_decomposes_trivially() {
        let b = decompose_values("s", &vec![4.0; 156], &StlParams::for_period(52)).unwrap();
        assert_eq!(b.f_const, 4.0);
        assert!(b.trend_scale < 1e-9);
        assert!(b.seasonal_scale < 1e-9);
        let norm: f64 = b.f_trend.iter().map(|v| v * v).sum();
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn too_short_for_stl() {
        assert_eq!(
            decompose_values("s", &vec![1.0; 60], &StlParams::for_period(52)),
            Err(SeasonalError::SeriesTooShort { len: 60, period: 52 })
        );
    }

    #[test]
    fn seasonal_cycles_are_centred() {
        let y: Vec<f64> = (0..230)
            .map(|t| (t as f64 * 0.121).sin() * 2.0 + (t as f64 / 52.0 * std::f64::consts::TAU).cos() + 0.002 * t as f64)
            .collect();
        let b = decompose_values("s", &y, &StlParams::for_period(52)).unwrap();
        let s = b.seasonal_component();
        for block in s.chunks(52).filter(|c| c.len() == 52) {
            let mean = block.iter().sum::<f64>() / 52.0;
            assert!(mean.abs() <= 1e-6 * b.seasonal_scale.max(1e-300));
        }
        for (a, b) in b.reconstruct().iter().zip(&y) {
            assert!((a - b).abs() <= 1e-10);
        }
    }

    fn toy_bases() -> Vec<SiteBasis> {
        let mk = |id: &str, c: f64, tr: [f64; 3], se: [f64; 3]| SiteBasis {
            site_id: id.into(),
            f_const: c,
            f_trend: tr.to_vec(),
            f_seasonal: se.to_vec(),
            remainder: vec![0.0; 3],
            trend_scale: 2.0,
            seasonal_scale: 1.0,
        };
        vec![
            mk("a", 1.0, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
            mk("b", 3.0, [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
            mk("c", 5.0, [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]),
        ]
    }

    #[test]
    fn landuse_basis_means() {
        let bases = toy_bases();
        let z = [0, 1, 1];
        assert_eq!(landuse_basis(&bases, &z, 0, BasisKind::Trend).unwrap(), vec![2.0, 0.0, 0.0]);
        assert_eq!(landuse_basis(&bases, &z, 1, BasisKind::Seasonal).unwrap(), vec![0.5, 0.0, 0.5]);
        assert_eq!(landuse_basis(&bases, &z, 1, BasisKind::Constant).unwrap(), vec![4.0; 3]);
        assert_eq!(
            landuse_basis(&bases, &z, 2, BasisKind::Trend),
            Err(SeasonalError::EmptyComponent(2))
        );
        let set = BasisSet::from_labels(&bases, &z, 3).unwrap();
        assert!(set.get(2).is_none());
        assert_eq!(set.get(1).unwrap().members, 2);
    }
}
