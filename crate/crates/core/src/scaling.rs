//! Regression layer over relative error rates: OLS, random-intercept mixed
//! models, likelihood-ratio tests, Spearman correlation, crossover points, and
//! partial regression.
//!
//! The mixed model is `y = X b + u[group] + e` with `u ~ N(0, s2_u)` and
//! `e ~ N(0, s2_e)`. For a fixed variance ratio `g = s2_u / s2_e` the marginal
//! covariance of a group of size `m` is `s2_e (I + g 11')`, whose inverse and
//! determinant are closed form, so fixed effects and the residual variance
//! profile out and only `g` is searched numerically.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Uniform};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, StudentsT};

use crate::error::{invalid, Error, Result};
use crate::metrics::Metric;

pub const INTERCEPT: &str = "intercept";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Predictor {
    #[serde(rename = "log_train")]
    LogTrain,
    #[serde(rename = "mattr_z")]
    MattrZ,
}

impl Predictor {
    pub fn name(&self) -> &'static str {
        match self {
            Predictor::LogTrain => "log_train",
            Predictor::MattrZ => "mattr_z",
        }
    }
}

impl fmt::Display for Predictor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScalingObservation {
    pub language: String,
    /// log10 of the training sentence count.
    pub log_train: f64,
    pub mattr_z: f64,
    pub rer: f64,
    pub metric: Metric,
    pub model: String,
    pub seed: Option<u64>,
}

impl ScalingObservation {
    pub fn value(&self, predictor: Predictor) -> f64 {
        match predictor {
            Predictor::LogTrain => self.log_train,
            Predictor::MattrZ => self.mattr_z,
        }
    }
}

/// Response, named predictor columns (an intercept is always added), and
/// group labels for the random intercept.
#[derive(Clone, Debug, PartialEq)]
pub struct RegressionData {
    pub y: Vec<f64>,
    pub columns: Vec<(String, Vec<f64>)>,
    pub groups: Vec<String>,
}

impl RegressionData {
    pub fn from_observations(obs: &[ScalingObservation], predictors: &[Predictor]) -> Result<Self> {
        for o in obs {
            if !(o.log_train > 0.0 && o.log_train.is_finite()) {
                return invalid(format!(
                    "{}: log_train must be positive and finite, got {}",
                    o.language, o.log_train
                ));
            }
            if !(o.rer.is_finite() && o.mattr_z.is_finite()) {
                return invalid(format!("{}: non-finite observation", o.language));
            }
        }
        Ok(RegressionData {
            y: obs.iter().map(|o| o.rer).collect(),
            columns: predictors
                .iter()
                .map(|&p| (p.name().to_string(), obs.iter().map(|o| o.value(p)).collect()))
                .collect(),
            groups: obs.iter().map(|o| o.language.clone()).collect(),
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Coefficient names, intercept first.
    pub fn names(&self) -> Vec<String> {
        std::iter::once(INTERCEPT.to_string())
            .chain(self.columns.iter().map(|(n, _)| n.clone()))
            .collect()
    }

    fn design(&self) -> DMatrix<f64> {
        let n = self.y.len();
        let p = self.columns.len() + 1;
        DMatrix::from_fn(n, p, |i, j| if j == 0 { 1.0 } else { self.columns[j - 1].1[i] })
    }

    fn check(&self) -> Result<()> {
        if self.columns.iter().any(|(_, c)| c.len() != self.y.len()) || self.groups.len() != self.y.len() {
            return invalid("regression columns differ in length");
        }
        Ok(())
    }

    /// Observation indices per group, groups in sorted order.
    fn group_members(&self) -> Vec<Vec<usize>> {
        let mut map: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, g) in self.groups.iter().enumerate() {
            map.entry(g.as_str()).or_default().push(i);
        }
        map.into_values().collect()
    }

    /// Keep only the named predictor columns.
    pub fn restrict(&self, keep: &[String]) -> Result<RegressionData> {
        let columns = keep
            .iter()
            .map(|name| {
                self.columns
                    .iter()
                    .find(|(n, _)| n == name)
                    .cloned()
                    .ok_or_else(|| Error::InvalidInput(format!("unknown predictor {name:?}")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(RegressionData {
            y: self.y.clone(),
            columns,
            groups: self.groups.clone(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OlsFit {
    pub names: Vec<String>,
    pub coefficients: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// Gaussian log-likelihood at the ML variance estimate `rss / n`.
    pub log_likelihood: f64,
}

impl OlsFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.coefficients[i])
    }
}

const RANK_TOL: f64 = 1e-10;

fn solve_least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if smax == 0.0 || smin / smax < RANK_TOL {
        return invalid("design matrix is rank deficient");
    }
    svd.solve(y, 0.0)
        .map_err(|e| Error::InvalidInput(format!("least squares failed: {e}")))
}

pub fn fit_ols_data(data: &RegressionData) -> Result<OlsFit> {
    data.check()?;
    let n = data.len();
    let p = data.columns.len() + 1;
    if n <= p {
        return invalid(format!("{n} observations for {p} coefficients"));
    }
    let x = data.design();
    let y = DVector::from_column_slice(&data.y);
    let beta = solve_least_squares(&x, &y)?;
    let resid = &y - &x * &beta;
    let rss = resid.norm_squared();
    let sigma2 = rss / (n - p) as f64;
    let xtx_inv = (x.transpose() * &x)
        .try_inverse()
        .ok_or_else(|| Error::InvalidInput("design matrix is rank deficient".into()))?;
    let nf = n as f64;
    Ok(OlsFit {
        names: data.names(),
        coefficients: beta.iter().copied().collect(),
        std_errors: (0..p).map(|j| (sigma2 * xtx_inv[(j, j)]).sqrt()).collect(),
        residuals: resid.iter().copied().collect(),
        rss,
        log_likelihood: -0.5 * nf * ((2.0 * PI * rss / nf).ln() + 1.0),
    })
}

pub fn fit_ols(obs: &[ScalingObservation], predictors: &[Predictor]) -> Result<OlsFit> {
    fit_ols_data(&RegressionData::from_observations(obs, predictors)?)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FitMethod {
    #[serde(rename = "ML")]
    Ml,
    #[serde(rename = "REML")]
    Reml,
}

impl fmt::Display for FitMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FitMethod::Ml => "ML",
            FitMethod::Reml => "REML",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixedModelFit {
    pub names: Vec<String>,
    pub fixed_effects: Vec<f64>,
    pub std_errors: Vec<f64>,
    /// Two-sided Wald p-values under a normal reference distribution.
    pub p_values: Vec<f64>,
    pub random_intercept_variance: f64,
    pub residual_variance: f64,
    pub log_likelihood: f64,
    pub n_obs: usize,
    pub n_groups: usize,
    pub fitted_by: FitMethod,
    pub iterations: usize,
    pub warnings: Vec<String>,
}

impl MixedModelFit {
    pub fn coefficient(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.fixed_effects[i])
    }

    pub fn p_value(&self, name: &str) -> Option<f64> {
        self.names.iter().position(|n| n == name).map(|i| self.p_values[i])
    }

    /// Fixed-effects prediction at the given predictor values (missing
    /// predictors are taken as 0).
    pub fn predict(&self, values: &[(&str, f64)]) -> f64 {
        self.names
            .iter()
            .zip(&self.fixed_effects)
            .map(|(name, b)| {
                if name == INTERCEPT {
                    *b
                } else {
                    b * values.iter().find(|(n, _)| n == name).map_or(0.0, |(_, v)| *v)
                }
            })
            .sum()
    }
}

/// Profiled quantities at one variance ratio.
struct Profile {
    loglik: f64,
    beta: DVector<f64>,
    sigma2: f64,
    cov_unscaled: DMatrix<f64>,
}

struct Grouped {
    x: DMatrix<f64>,
    y: DVector<f64>,
    members: Vec<Vec<usize>>,
}

impl Grouped {
    fn profile(&self, ratio: f64, method: FitMethod) -> Option<Profile> {
        let n = self.y.len();
        let p = self.x.ncols();
        let mut a = self.x.transpose() * &self.x;
        let mut b = self.x.transpose() * &self.y;
        let mut logdet_v = 0.0;
        let mut shrink = Vec::with_capacity(self.members.len());
        for rows in &self.members {
            let m = rows.len() as f64;
            let c = ratio / (1.0 + m * ratio);
            shrink.push(c);
            logdet_v += (m * ratio).ln_1p();
            let mut xs = DVector::zeros(p);
            let mut ys = 0.0;
            for &i in rows {
                xs += self.x.row(i).transpose();
                ys += self.y[i];
            }
            a -= c * &xs * xs.transpose();
            b -= c * ys * &xs;
        }
        let chol = a.clone().cholesky()?;
        let beta = chol.solve(&b);
        let resid = &self.y - &self.x * &beta;
        let mut q = resid.norm_squared();
        for (rows, c) in self.members.iter().zip(&shrink) {
            let s: f64 = rows.iter().map(|&i| resid[i]).sum();
            q -= c * s * s;
        }
        if !(q > 0.0) {
            return None;
        }
        let logdet_a: f64 = chol.l().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        let (dof, extra) = match method {
            FitMethod::Ml => (n as f64, 0.0),
            FitMethod::Reml => ((n - p) as f64, logdet_a),
        };
        let sigma2 = q / dof;
        let loglik = -0.5 * (dof * (2.0 * PI * sigma2).ln() + logdet_v + extra + dof);
        Some(Profile {
            loglik,
            beta,
            sigma2,
            cov_unscaled: chol.inverse(),
        })
    }
}

const LOG_RATIO_MIN: f64 = -25.0;
const LOG_RATIO_MAX: f64 = 12.0;
const CONVERGENCE_TOL: f64 = 1e-10;
const MAX_ITERATIONS: usize = 500;

pub fn fit_mixed_model_data(data: &RegressionData, method: FitMethod) -> Result<MixedModelFit> {
    data.check()?;
    let n = data.len();
    let p = data.columns.len() + 1;
    if n <= p {
        return invalid(format!("{n} observations for {p} coefficients"));
    }
    let members = data.group_members();
    if members.len() < 2 {
        return invalid("a random intercept needs at least two groups");
    }
    let x = data.design();
    solve_least_squares(&x, &DVector::from_column_slice(&data.y))?;
    let grouped = Grouped {
        x,
        y: DVector::from_column_slice(&data.y),
        members,
    };
    let n_groups = grouped.members.len();

    let mut warnings = Vec::new();
    let identifiable = grouped.members.iter().any(|g| g.len() >= 2);
    let (ratio, iterations) = if !identifiable {
        warnings.push(
            "one observation per group: random intercept not identifiable, fitted as OLS".to_string(),
        );
        (0.0, 0)
    } else {
        maximize_ratio(&grouped, method)?
    };

    let prof = grouped
        .profile(ratio, method)
        .ok_or_else(|| Error::NonConvergence("profiled likelihood undefined at optimum".into()))?;
    let normal = statrs::distribution::Normal::new(0.0, 1.0).expect("standard normal");
    let std_errors: Vec<f64> = (0..p)
        .map(|j| (prof.sigma2 * prof.cov_unscaled[(j, j)]).sqrt())
        .collect();
    let p_values = prof
        .beta
        .iter()
        .zip(&std_errors)
        .map(|(b, se)| 2.0 * normal.sf((b / se).abs()))
        .collect();
    Ok(MixedModelFit {
        names: data.names(),
        fixed_effects: prof.beta.iter().copied().collect(),
        std_errors,
        p_values,
        random_intercept_variance: ratio * prof.sigma2,
        residual_variance: prof.sigma2,
        log_likelihood: prof.loglik,
        n_obs: n,
        n_groups,
        fitted_by: method,
        iterations,
        warnings,
    })
}

/// Grid scan over log(ratio), golden-section refinement around the best
/// grid point, and a check of the ratio = 0 boundary.
fn maximize_ratio(grouped: &Grouped, method: FitMethod) -> Result<(f64, usize)> {
    let eval = |s: f64| {
        grouped
            .profile(s.exp(), method)
            .map_or(f64::NEG_INFINITY, |p| p.loglik)
    };
    let step = 0.5;
    let steps = ((LOG_RATIO_MAX - LOG_RATIO_MIN) / step).round() as usize;
    let grid: Vec<(f64, f64)> = (0..=steps)
        .map(|k| {
            let s = LOG_RATIO_MIN + step * k as f64;
            (s, eval(s))
        })
        .collect();
    let best = grid
        .iter()
        .enumerate()
        .max_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
        .map(|(i, _)| i)
        .unwrap();

    let boundary = grouped
        .profile(0.0, method)
        .map_or(f64::NEG_INFINITY, |p| p.loglik);
    if best == 0 && boundary >= grid[0].1 {
        return Ok((0.0, 0));
    }

    let mut lo = grid[best.saturating_sub(1)].0;
    let mut hi = grid[(best + 1).min(steps)].0;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = hi - inv_phi * (hi - lo);
    let mut d = lo + inv_phi * (hi - lo);
    let (mut fc, mut fd) = (eval(c), eval(d));
    let mut previous = grid[best].1;
    let mut trace = Vec::new();
    for iteration in 1..=MAX_ITERATIONS {
        if fc > fd {
            hi = d;
            d = c;
            fd = fc;
            c = hi - inv_phi * (hi - lo);
            fc = eval(c);
        } else {
            lo = c;
            c = d;
            fc = fd;
            d = lo + inv_phi * (hi - lo);
            fd = eval(d);
        }
        let current = fc.max(fd).max(previous);
        trace.push(current);
        if (current - previous).abs() < CONVERGENCE_TOL && hi - lo < 1e-8 {
            let (mut s, mut f) = if fc > fd { (c, fc) } else { (d, fd) };
            if f < grid[best].1 {
                (s, f) = grid[best];
            }
            if boundary >= f {
                return Ok((0.0, iteration));
            }
            return Ok((s.exp(), iteration));
        }
        previous = current;
    }
    let tail: Vec<String> = trace.iter().rev().take(5).map(|v| format!("{v:.12}")).collect();
    Err(Error::NonConvergence(format!(
        "variance-ratio search did not converge in {MAX_ITERATIONS} iterations; last log-likelihoods {}",
        tail.join(", ")
    )))
}

pub fn fit_mixed_model(
    obs: &[ScalingObservation],
    predictors: &[Predictor],
    method: FitMethod,
) -> Result<MixedModelFit> {
    fit_mixed_model_data(&RegressionData::from_observations(obs, predictors)?, method)
}

/// Mixed model with the variance ratio pinned to zero (GLS reduces to OLS).
pub fn fit_fixed_only(data: &RegressionData, method: FitMethod) -> Result<MixedModelFit> {
    let mut fit = fit_mixed_model_data(
        &RegressionData {
            groups: (0..data.len()).map(|i| i.to_string()).collect(),
            ..data.clone()
        },
        method,
    )?;
    fit.warnings.clear();
    Ok(fit)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LrtResult {
    pub chi2: f64,
    pub df: usize,
    pub p_value: f64,
}

/// Upper tail of the chi-square distribution.
pub fn chi_square_sf(x: f64, df: usize) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df as f64)
        .expect("positive degrees of freedom")
        .sf(x)
}

pub fn likelihood_ratio_test(null: &MixedModelFit, alt: &MixedModelFit) -> Result<LrtResult> {
    if null.fitted_by != FitMethod::Ml || alt.fitted_by != FitMethod::Ml {
        return invalid("likelihood-ratio tests over fixed effects need ML fits, not REML");
    }
    if null.n_obs != alt.n_obs {
        return invalid("models were fitted to different observations");
    }
    if !null.names.iter().all(|n| alt.names.contains(n)) || alt.names.len() <= null.names.len() {
        return invalid("null model predictors must be a strict subset of the alternative's");
    }
    let chi2 = (2.0 * (alt.log_likelihood - null.log_likelihood)).max(0.0);
    let df = alt.names.len() - null.names.len();
    Ok(LrtResult {
        chi2,
        df,
        p_value: chi_square_sf(chi2, df),
    })
}

/// Fit the model with and without `added` (both by ML) and test the difference.
pub fn lrt_for_predictor(
    data: &RegressionData,
    added: &str,
) -> Result<(MixedModelFit, MixedModelFit, LrtResult)> {
    let keep: Vec<String> = data
        .columns
        .iter()
        .map(|(n, _)| n.clone())
        .filter(|n| n != added)
        .collect();
    if keep.len() == data.columns.len() {
        return invalid(format!("predictor {added:?} is not in the model"));
    }
    let null = fit_mixed_model_data(&data.restrict(&keep)?, FitMethod::Ml)?;
    let alt = fit_mixed_model_data(data, FitMethod::Ml)?;
    let lrt = likelihood_ratio_test(&null, &alt)?;
    Ok((null, alt, lrt))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub rho: f64,
    pub p_value: f64,
    pub n: usize,
}

/// Ranks starting at 1, ties get their average rank.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &k in &order[i..=j] {
            ranks[k] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0)
}

/// Spearman's rho with tie-averaged ranks; p from the t approximation with
/// n - 2 degrees of freedom.
pub fn spearman(x: &[f64], y: &[f64]) -> Result<CorrelationResult> {
    if x.len() != y.len() {
        return invalid(format!("lengths differ: {} vs {}", x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return invalid("Spearman correlation needs at least 3 pairs");
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return invalid("Spearman correlation needs finite values");
    }
    let constant = |v: &[f64]| v.iter().all(|a| *a == v[0]);
    if constant(x) || constant(y) {
        return invalid("Spearman correlation undefined for a constant vector");
    }
    let rho = pearson(&average_ranks(x), &average_ranks(y));
    let p_value = if rho.abs() >= 1.0 {
        0.0
    } else {
        let df = (n - 2) as f64;
        let t = rho * (df / (1.0 - rho * rho)).sqrt();
        let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
        (2.0 * dist.sf(t.abs())).min(1.0)
    };
    Ok(CorrelationResult { rho, p_value, n })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CrossoverEstimate {
    pub log10_sentences: f64,
    pub sentences: u64,
}

impl CrossoverEstimate {
    pub fn from_log10(log10_sentences: f64) -> Self {
        CrossoverEstimate {
            log10_sentences,
            sentences: 10f64.powf(log10_sentences).round() as u64,
        }
    }
}

/// Training size at which the fixed-effects RER prediction reaches zero,
/// with every other predictor held at 0.
pub fn crossover(fit: &MixedModelFit) -> Result<CrossoverEstimate> {
    let slope = fit
        .coefficient(Predictor::LogTrain.name())
        .ok_or_else(|| Error::InvalidInput("fit has no log_train coefficient".into()))?;
    let intercept = fit.coefficient(INTERCEPT).unwrap_or(0.0);
    crossover_from_line(intercept, slope)
}

pub fn crossover_from_line(intercept: f64, slope: f64) -> Result<CrossoverEstimate> {
    if !(slope < 0.0) {
        return invalid(format!(
            "slope on log_train is {slope}; a crossover needs a negative slope"
        ));
    }
    Ok(CrossoverEstimate::from_log10(-intercept / slope))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PartialRegression {
    /// (focal residual, outcome residual) pairs.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
}

/// Residualize outcome and focal predictor on the controls and regress one
/// residual on the other.
pub fn partial_regression_data(
    data: &RegressionData,
    focal: &str,
    controls: &[String],
) -> Result<PartialRegression> {
    let focal_values = data
        .columns
        .iter()
        .find(|(n, _)| n == focal)
        .map(|(_, v)| v.clone())
        .ok_or_else(|| Error::InvalidInput(format!("unknown predictor {focal:?}")))?;
    let base = data.restrict(controls)?;
    let y_res = fit_ols_data(&base)?.residuals;
    let x_res = fit_ols_data(&RegressionData {
        y: focal_values.clone(),
        ..base
    })?
    .residuals;
    let sxx: f64 = x_res.iter().map(|v| v * v).sum();
    let scale: f64 = focal_values.iter().map(|v| v * v).sum::<f64>().max(1.0);
    if sxx <= 1e-20 * scale {
        return invalid(format!(
            "{focal} is collinear with the controls; its residuals vanish"
        ));
    }
    let sxy: f64 = x_res.iter().zip(&y_res).map(|(a, b)| a * b).sum();
    Ok(PartialRegression {
        points: x_res.into_iter().zip(y_res).collect(),
        slope: sxy / sxx,
    })
}

pub fn partial_regression(
    obs: &[ScalingObservation],
    focal: Predictor,
    controls: &[Predictor],
) -> Result<PartialRegression> {
    let mut all = vec![focal];
    all.extend_from_slice(controls);
    let data = RegressionData::from_observations(obs, &all)?;
    let names: Vec<String> = controls.iter().map(|p| p.name().to_string()).collect();
    partial_regression_data(&data, focal.name(), &names)
}

/// Generator for grouped data with a random intercept: `groups` groups of
/// `replicates` rows, `x ~ U(2, 4)` per row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SyntheticMixedSpec {
    pub groups: usize,
    pub replicates: usize,
    pub intercept: f64,
    pub slope: f64,
    pub intercept_sd: f64,
    pub residual_sd: f64,
}

impl Default for SyntheticMixedSpec {
    fn default() -> Self {
        SyntheticMixedSpec {
            groups: 10,
            replicates: 5,
            intercept: 1.0,
            slope: -0.4,
            intercept_sd: 0.1,
            residual_sd: 0.05,
        }
    }
}

/// Draw a dataset with columns `log_train` and an independent standard
/// normal `noise` column that has no effect on the response.
pub fn synthetic_mixed_data(spec: &SyntheticMixedSpec, seed: u64) -> RegressionData {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let x_dist = Uniform::new(2.0, 4.0);
    let std = Normal::new(0.0, 1.0).expect("unit normal");
    let mut y = Vec::new();
    let mut x = Vec::new();
    let mut noise = Vec::new();
    let mut groups = Vec::new();
    for g in 0..spec.groups {
        let u = spec.intercept_sd * std.sample(&mut rng);
        for _ in 0..spec.replicates {
            let xi = x_dist.sample(&mut rng);
            let e = spec.residual_sd * std.sample(&mut rng);
            y.push(spec.intercept + spec.slope * xi + u + e);
            x.push(xi);
            noise.push(std.sample(&mut rng));
            groups.push(format!("g{g:02}"));
        }
    }
    RegressionData {
        y,
        columns: vec![
            (Predictor::LogTrain.name().to_string(), x),
            ("noise".to_string(), noise),
        ],
        groups,
    }
}
