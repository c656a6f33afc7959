//! Per-segment regressors: constant mean, ridge-stabilised least squares and
//! exact Gaussian-process regression with a linear + RBF kernel.
//!
//! The GP kernel is
//!
//! ```text
//! k(x, x') = s_l * <x, x'> + s_f * exp(-|x - x'|^2 / (2 l^2))
//! ```
//!
//! with observation noise `s_n` on the diagonal. Hyperparameters are learned
//! by maximising the log marginal likelihood in log-parameter space.

use faer::linalg::solvers::{DenseSolveCore, Solve};
use faer::linalg::triangular_solve::solve_lower_triangular_in_place;
use faer::{Mat, MatRef, Par, Side};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ridge used when an unregularised normal-equation system is rank deficient.
pub const DEFAULT_RIDGE_EPS: f64 = 1e-8;
/// Smallest admissible noise variance.
pub const NOISE_FLOOR: f64 = 1e-8;
pub const DEFAULT_GP_ITERS: usize = 100;
pub const GRADIENT_TOLERANCE: f64 = 1e-5;

const JITTER_START: f64 = 1e-8;
const JITTER_MAX: f64 = 1e-2;
const LOG_PARAM_MAX: f64 = 18.0;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConstantModel {
    pub mean: f64,
}

pub fn fit_constant(y: &[f64]) -> Result<ConstantModel> {
    if y.is_empty() {
        return Err(Error::Empty("constant model response"));
    }
    Ok(ConstantModel {
        mean: y.iter().sum::<f64>() / y.len() as f64,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub weights: Vec<f64>,
    pub intercept: f64,
    /// Ridge actually applied (may differ from the request after fallback).
    pub ridge_eps: f64,
    pub fell_back: bool,
}

impl LinearModel {
    pub fn predict(&self, x: &[f64]) -> f64 {
        self.intercept + self.weights.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
    }
}

/// Ridge-regularised least squares on the centred design; the intercept is
/// not penalised. With `ridge_eps == 0` a numerically rank-deficient design
/// switches to [`DEFAULT_RIDGE_EPS`] and sets `fell_back`.
pub fn fit_ols(x: MatRef<'_, f64>, y: &[f64], ridge_eps: f64) -> Result<LinearModel> {
    let (m, d) = (x.nrows(), x.ncols());
    if m == 0 {
        return Err(Error::Empty("least-squares design"));
    }
    if y.len() != m {
        return Err(Error::LengthMismatch { left: m, right: y.len() });
    }
    if ridge_eps < 0.0 {
        return Err(Error::InvalidParameter(format!("negative ridge {ridge_eps}")));
    }
    let y_mean = y.iter().sum::<f64>() / m as f64;
    let x_mean: Vec<f64> = (0..d)
        .map(|j| (0..m).map(|i| x[(i, j)]).sum::<f64>() / m as f64)
        .collect();
    if d == 0 {
        return Ok(LinearModel {
            weights: vec![],
            intercept: y_mean,
            ridge_eps,
            fell_back: false,
        });
    }
    let xc = Mat::from_fn(m, d, |i, j| x[(i, j)] - x_mean[j]);
    let yc = Mat::from_fn(m, 1, |i, _| y[i] - y_mean);
    let gram = xc.transpose() * &xc;
    let rhs = xc.transpose() * &yc;

    let mut eps = ridge_eps;
    let mut fell_back = false;
    if eps == 0.0 && rank_deficient(gram.as_ref()) {
        eps = DEFAULT_RIDGE_EPS;
        fell_back = true;
    }
    let system = Mat::from_fn(d, d, |i, j| gram[(i, j)] + if i == j { eps } else { 0.0 });
    let w = match system.llt(Side::Lower) {
        Ok(llt) => llt.solve(&rhs),
        Err(_) if !fell_back && eps < DEFAULT_RIDGE_EPS => {
            fell_back = true;
            eps = DEFAULT_RIDGE_EPS;
            let system = Mat::from_fn(d, d, |i, j| gram[(i, j)] + if i == j { eps } else { 0.0 });
            system
                .llt(Side::Lower)
                .map_err(|_| Error::NotPositiveDefinite { jitter: eps })?
                .solve(&rhs)
        }
        Err(_) => return Err(Error::NotPositiveDefinite { jitter: eps }),
    };
    let weights: Vec<f64> = (0..d).map(|j| w[(j, 0)]).collect();
    let intercept = y_mean - weights.iter().zip(&x_mean).map(|(w, m)| w * m).sum::<f64>();
    Ok(LinearModel {
        weights,
        intercept,
        ridge_eps: eps,
        fell_back,
    })
}

fn rank_deficient(gram: MatRef<'_, f64>) -> bool {
    let Ok(eig) = gram.self_adjoint_eigenvalues(Side::Lower) else {
        return true;
    };
    let max = eig.iter().fold(0.0f64, |a, &b| a.max(b.abs()));
    let min = eig.iter().fold(f64::INFINITY, |a, &b| a.min(b));
    max == 0.0 || min <= 1e-12 * max
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelParams {
    pub linear_variance: f64,
    pub rbf_variance: f64,
    pub rbf_lengthscale: f64,
    pub noise_variance: f64,
}

impl KernelParams {
    /// Default start point for standardised inputs of dimension `d`.
    pub fn initial(y_variance: f64, d: usize) -> Self {
        KernelParams {
            linear_variance: y_variance,
            rbf_variance: y_variance,
            rbf_lengthscale: (d.max(1) as f64).sqrt(),
            noise_variance: (0.1 * y_variance).max(NOISE_FLOOR),
        }
    }

    pub fn to_log(self) -> [f64; 4] {
        [
            self.linear_variance.ln(),
            self.rbf_variance.ln(),
            self.rbf_lengthscale.ln(),
            self.noise_variance.ln(),
        ]
    }

    pub fn from_log(theta: [f64; 4]) -> Self {
        KernelParams {
            linear_variance: theta[0].exp(),
            rbf_variance: theta[1].exp(),
            rbf_lengthscale: theta[2].exp(),
            noise_variance: theta[3].exp(),
        }
    }

    fn validate(&self) -> Result<()> {
        let ok = [
            self.linear_variance,
            self.rbf_variance,
            self.rbf_lengthscale,
            self.noise_variance,
        ]
        .iter()
        .all(|v| v.is_finite() && *v > 0.0);
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidParameter(format!("kernel parameters must be positive: {self:?}")))
        }
    }

    #[inline]
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        let mut dot = 0.0;
        let mut sq = 0.0;
        for (u, v) in a.iter().zip(b) {
            dot += u * v;
            sq += (u - v) * (u - v);
        }
        self.linear_variance * dot
            + self.rbf_variance * (-sq / (2.0 * self.rbf_lengthscale * self.rbf_lengthscale)).exp()
    }
}

fn row(x: MatRef<'_, f64>, i: usize) -> Vec<f64> {
    (0..x.ncols()).map(|j| x[(i, j)]).collect()
}

/// Cross-covariance matrix `k(A_i, B_j)`.
pub fn kernel_matrix(params: &KernelParams, a: MatRef<'_, f64>, b: MatRef<'_, f64>) -> Result<Mat<f64>> {
    if a.ncols() != b.ncols() {
        return Err(Error::DimensionMismatch {
            expected: a.ncols(),
            got: b.ncols(),
        });
    }
    let a_rows: Vec<Vec<f64>> = (0..a.nrows()).map(|i| row(a, i)).collect();
    let b_rows: Vec<Vec<f64>> = (0..b.nrows()).map(|i| row(b, i)).collect();
    Ok(Mat::from_fn(a.nrows(), b.nrows(), |i, j| params.eval(&a_rows[i], &b_rows[j])))
}

/// Parameter-independent pieces of the training covariance.
struct GramCache {
    gram: Mat<f64>,
    sqdist: Mat<f64>,
}

impl GramCache {
    fn new(x: MatRef<'_, f64>) -> Self {
        let m = x.nrows();
        let gram = x * x.transpose();
        let sqdist = Mat::from_fn(m, m, |i, j| {
            if i == j {
                0.0
            } else {
                (gram[(i, i)] + gram[(j, j)] - 2.0 * gram[(i, j)]).max(0.0)
            }
        });
        GramCache { gram, sqdist }
    }

    fn rbf(&self, p: &KernelParams) -> Mat<f64> {
        let scale = -0.5 / (p.rbf_lengthscale * p.rbf_lengthscale);
        let m = self.gram.nrows();
        Mat::from_fn(m, m, |i, j| p.rbf_variance * (self.sqdist[(i, j)] * scale).exp())
    }

    fn covariance(&self, p: &KernelParams, rbf: &Mat<f64>, diag: f64) -> Mat<f64> {
        let m = self.gram.nrows();
        Mat::from_fn(m, m, |i, j| {
            p.linear_variance * self.gram[(i, j)] + rbf[(i, j)] + if i == j { diag } else { 0.0 }
        })
    }
}

struct Factored {
    llt: faer::linalg::solvers::Llt<f64>,
    alpha: Vec<f64>,
    jitter: f64,
}

/// Cholesky of `K + noise I`, escalating jitter on failure.
fn factor(cov_without_noise: impl Fn(f64) -> Mat<f64>, noise: f64, y: &[f64]) -> Result<Factored> {
    let mut jitter = 0.0;
    loop {
        let k = cov_without_noise(noise + jitter);
        if let Ok(llt) = k.llt(Side::Lower) {
            let rhs = Mat::from_fn(y.len(), 1, |i, _| y[i]);
            let sol = llt.solve(&rhs);
            let alpha = (0..y.len()).map(|i| sol[(i, 0)]).collect();
            return Ok(Factored { llt, alpha, jitter });
        }
        jitter = if jitter == 0.0 { JITTER_START } else { jitter * 10.0 };
        if jitter > JITTER_MAX * (1.0 + 1e-9) {
            return Err(Error::NotPositiveDefinite { jitter: JITTER_MAX });
        }
    }
}

fn lml_from(f: &Factored, y: &[f64]) -> f64 {
    let m = y.len();
    let l = f.llt.L();
    let fit: f64 = y.iter().zip(&f.alpha).map(|(a, b)| a * b).sum();
    let log_det: f64 = (0..m).map(|i| l[(i, i)].ln()).sum();
    -0.5 * fit - log_det - 0.5 * m as f64 * LN_2PI
}

fn check_inputs(x: MatRef<'_, f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            left: x.nrows(),
            right: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::Empty("gaussian process training set"));
    }
    Ok(())
}

struct Objective<'a> {
    cache: GramCache,
    y: &'a [f64],
}

impl Objective<'_> {
    fn value(&self, p: &KernelParams) -> Result<f64> {
        let rbf = self.cache.rbf(p);
        let f = factor(|diag| self.cache.covariance(p, &rbf, diag), p.noise_variance, self.y)?;
        Ok(lml_from(&f, self.y))
    }

    fn value_and_gradient(&self, p: &KernelParams) -> Result<(f64, [f64; 4])> {
        let m = self.y.len();
        let rbf = self.cache.rbf(p);
        let f = factor(|diag| self.cache.covariance(p, &rbf, diag), p.noise_variance, self.y)?;
        let value = lml_from(&f, self.y);
        let inv = f.llt.inverse();
        let inv_l2 = 1.0 / (p.rbf_lengthscale * p.rbf_lengthscale);
        // d lml / d theta_j = 1/2 sum_ij (a_i a_j - Kinv_ij) dK_ij
        let mut g = [0.0; 4];
        for j in 0..m {
            for i in 0..m {
                let w = f.alpha[i] * f.alpha[j] - inv[(i, j)];
                let r = rbf[(i, j)];
                g[0] += w * self.cache.gram[(i, j)];
                g[1] += w * r;
                g[2] += w * r * self.cache.sqdist[(i, j)];
            }
            g[3] += f.alpha[j] * f.alpha[j] - inv[(j, j)];
        }
        g[0] *= 0.5 * p.linear_variance;
        g[1] *= 0.5;
        g[2] *= 0.5 * inv_l2;
        g[3] *= 0.5 * p.noise_variance;
        Ok((value, g))
    }
}

/// Log marginal likelihood of `y` under the GP prior and its gradient with
/// respect to the log-parameters (linear variance, RBF variance, lengthscale,
/// noise variance).
pub fn log_marginal_likelihood(params: &KernelParams, x: MatRef<'_, f64>, y: &[f64]) -> Result<(f64, [f64; 4])> {
    params.validate()?;
    check_inputs(x, y)?;
    if params.noise_variance < NOISE_FLOOR {
        return Err(Error::InvalidParameter(format!(
            "noise variance {} below floor {NOISE_FLOOR}",
            params.noise_variance
        )));
    }
    Objective {
        cache: GramCache::new(x),
        y,
    }
    .value_and_gradient(params)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GpSettings {
    pub max_iters: usize,
    /// Start point; derived from the response variance when absent.
    pub init: Option<KernelParams>,
}

impl Default for GpSettings {
    fn default() -> Self {
        GpSettings {
            max_iters: DEFAULT_GP_ITERS,
            init: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizationTrace {
    pub initial_lml: f64,
    pub final_lml: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GpModel {
    pub params: KernelParams,
    pub n_features: usize,
    /// Row-major training inputs (already standardised by the caller).
    pub inputs: Vec<f64>,
    pub alpha: Vec<f64>,
    pub y_mean: f64,
    pub jitter: f64,
    pub solve_residual: f64,
    pub trace: Option<OptimizationTrace>,
    #[serde(skip)]
    factor: Option<Mat<f64>>,
}

impl PartialEq for GpModel {
    fn eq(&self, other: &Self) -> bool {
        self.params == other.params
            && self.n_features == other.n_features
            && self.inputs == other.inputs
            && self.alpha == other.alpha
            && self.y_mean == other.y_mean
            && self.jitter == other.jitter
            && self.solve_residual == other.solve_residual
            && self.trace == other.trace
    }
}

impl GpModel {
    /// Conditions a GP with fixed hyperparameters on `(x, y)`.
    pub fn condition(x: MatRef<'_, f64>, y: &[f64], params: KernelParams) -> Result<GpModel> {
        params.validate()?;
        check_inputs(x, y)?;
        let y_mean = y.iter().sum::<f64>() / y.len() as f64;
        let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
        let cache = GramCache::new(x);
        let rbf = cache.rbf(&params);
        let f = factor(|diag| cache.covariance(&params, &rbf, diag), params.noise_variance, &yc)?;

        // relative residual of the solve, against the factored system
        let k = cache.covariance(&params, &rbf, params.noise_variance + f.jitter);
        let m = yc.len();
        let mut num = 0.0;
        for i in 0..m {
            let r: f64 = (0..m).map(|j| k[(i, j)] * f.alpha[j]).sum::<f64>() - yc[i];
            num += r * r;
        }
        let den = yc.iter().map(|v| v * v).sum::<f64>();
        let solve_residual = if den > 0.0 { (num / den).sqrt() } else { num.sqrt() };

        let inputs = (0..m).flat_map(|i| row(x, i)).collect();
        Ok(GpModel {
            params,
            n_features: x.ncols(),
            inputs,
            alpha: f.alpha,
            y_mean,
            jitter: f.jitter,
            solve_residual,
            trace: None,
            factor: Some(f.llt.L().to_owned()),
        })
    }

    pub fn n_train(&self) -> usize {
        self.alpha.len()
    }

    fn input(&self, i: usize) -> &[f64] {
        &self.inputs[i * self.n_features..(i + 1) * self.n_features]
    }

    fn input_mat(&self) -> Mat<f64> {
        Mat::from_fn(self.n_train(), self.n_features, |i, j| self.inputs[i * self.n_features + j])
    }

    /// Recomputes the Cholesky factor (it is not serialised).
    pub fn refactor(&mut self) -> Result<()> {
        let x = self.input_mat();
        let cache = GramCache::new(x.as_ref());
        let rbf = cache.rbf(&self.params);
        let k = cache.covariance(&self.params, &rbf, self.params.noise_variance + self.jitter);
        let llt = k
            .llt(Side::Lower)
            .map_err(|_| Error::NotPositiveDefinite { jitter: self.jitter })?;
        self.factor = Some(llt.L().to_owned());
        Ok(())
    }

    /// Lower Cholesky factor of `K + (noise + jitter) I`.
    pub fn cholesky_factor(&mut self) -> Result<MatRef<'_, f64>> {
        if self.factor.is_none() {
            self.refactor()?;
        }
        Ok(self.factor.as_ref().expect("factor present").as_ref())
    }

    /// Training covariance including noise and jitter.
    pub fn training_covariance(&self) -> Mat<f64> {
        let x = self.input_mat();
        let cache = GramCache::new(x.as_ref());
        let rbf = cache.rbf(&self.params);
        cache.covariance(&self.params, &rbf, self.params.noise_variance + self.jitter)
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: self.n_features,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Posterior mean only; needs no factorisation.
    pub fn predict_mean(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        let mut mean = self.y_mean;
        for (i, a) in self.alpha.iter().enumerate() {
            mean += self.params.eval(x, self.input(i)) * a;
        }
        Ok(mean)
    }

    /// Posterior mean and (noise-free) variance at `x`.
    pub fn predict(&mut self, x: &[f64]) -> Result<(f64, f64)> {
        let mean = self.predict_mean(x)?;
        let m = self.n_train();
        let mut v = Mat::from_fn(m, 1, |i, _| self.params.eval(x, self.input(i)));
        let prior = self.params.eval(x, x);
        let l = self.cholesky_factor()?;
        solve_lower_triangular_in_place(l, v.as_mut(), Par::Seq);
        let explained: f64 = (0..m).map(|i| v[(i, 0)] * v[(i, 0)]).sum();
        Ok((mean, (prior - explained).max(0.0)))
    }
}

/// Maximises the log marginal likelihood with BFGS and Armijo backtracking in
/// log-parameter space, then conditions on the optimum. The response is
/// centred internally.
pub fn fit_gp(x: MatRef<'_, f64>, y: &[f64], settings: &GpSettings) -> Result<GpModel> {
    check_inputs(x, y)?;
    if y.len() < 2 {
        return Err(Error::InvalidParameter("gaussian process needs at least two rows".into()));
    }
    if x.ncols() == 0 {
        return Err(Error::InvalidParameter("gaussian process needs at least one feature".into()));
    }
    let m = y.len() as f64;
    let y_mean = y.iter().sum::<f64>() / m;
    let yc: Vec<f64> = y.iter().map(|v| v - y_mean).collect();
    let var = yc.iter().map(|v| v * v).sum::<f64>() / m;
    let init = match settings.init {
        Some(p) => p,
        None if var > 0.0 => KernelParams::initial(var, x.ncols()),
        None => {
            return Err(Error::InvalidParameter("constant response, nothing to model".into()));
        }
    };
    init.validate()?;

    let objective = Objective {
        cache: GramCache::new(x),
        y: &yc,
    };
    let (theta, trace) = maximize(&objective, init.to_log(), settings.max_iters)?;
    let params = KernelParams::from_log(theta);
    let mut model = GpModel::condition(x, y, params)?;
    model.trace = Some(trace);
    Ok(model)
}

fn clamp_theta(mut t: [f64; 4]) -> [f64; 4] {
    let floor = NOISE_FLOOR.ln();
    for (k, v) in t.iter_mut().enumerate() {
        let lo = if k == 3 { floor } else { -LOG_PARAM_MAX };
        *v = v.clamp(lo, LOG_PARAM_MAX);
    }
    t
}

fn dot(a: &[f64; 4], b: &[f64; 4]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs(a: &[f64; 4]) -> f64 {
    a.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// BFGS ascent. Works on the negated objective so the update is the textbook
/// minimisation form.
fn maximize(obj: &Objective<'_>, start: [f64; 4], max_iters: usize) -> Result<([f64; 4], OptimizationTrace)> {
    const ARMIJO: f64 = 1e-4;
    const MAX_STEP: f64 = 2.0;

    let mut x = clamp_theta(start);
    let (f0, g0) = obj.value_and_gradient(&KernelParams::from_log(x))?;
    let initial_lml = f0;
    let mut f = -f0;
    let mut g = g0.map(|v| -v);
    let mut h = [[0.0; 4]; 4];
    (0..4).for_each(|i| h[i][i] = 1.0);

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iters {
        if max_abs(&g) < GRADIENT_TOLERANCE {
            converged = true;
            break;
        }
        iterations += 1;
        let mut p = [0.0; 4];
        for i in 0..4 {
            p[i] = -(0..4).map(|j| h[i][j] * g[j]).sum::<f64>();
        }
        if dot(&p, &g) >= 0.0 {
            h = [[0.0; 4]; 4];
            (0..4).for_each(|i| h[i][i] = 1.0);
            p = g.map(|v| -v);
        }
        let mut t = (MAX_STEP / max_abs(&p)).min(1.0);
        let slope = dot(&g, &p);
        let mut accepted = None;
        for _ in 0..40 {
            let cand = clamp_theta(std::array::from_fn(|i| x[i] + t * p[i]));
            if let Ok(v) = obj.value(&KernelParams::from_log(cand)) {
                let fc = -v;
                if fc.is_finite() && fc <= f + ARMIJO * t * slope.min(0.0) {
                    accepted = Some(cand);
                    break;
                }
            }
            t *= 0.5;
        }
        let Some(x_new) = accepted else {
            break;
        };
        if x_new == x {
            break;
        }
        let (fv, gv) = obj.value_and_gradient(&KernelParams::from_log(x_new))?;
        let f_new = -fv;
        let g_new = gv.map(|v| -v);
        let s: [f64; 4] = std::array::from_fn(|i| x_new[i] - x[i]);
        let yv: [f64; 4] = std::array::from_fn(|i| g_new[i] - g[i]);
        let sy = dot(&s, &yv);
        if sy > 1e-12 {
            // H <- (I - rho s y^T) H (I - rho y s^T) + rho s s^T
            let rho = 1.0 / sy;
            let mut hy = [0.0; 4];
            for i in 0..4 {
                hy[i] = (0..4).map(|j| h[i][j] * yv[j]).sum();
            }
            let yhy = dot(&yv, &hy);
            for i in 0..4 {
                for j in 0..4 {
                    h[i][j] += -rho * (hy[i] * s[j] + s[i] * hy[j])
                        + (rho * rho * yhy + rho) * s[i] * s[j];
                }
            }
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }
    if !converged && max_abs(&g) < GRADIENT_TOLERANCE {
        converged = true;
    }
    Ok((
        x,
        OptimizationTrace {
            initial_lml,
            final_lml: -f,
            iterations,
            converged,
        },
    ))
}

/// A fitted segment regressor. Linear and GP models expect inputs already
/// transformed by the segment's scaler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LeafModel {
    Constant(ConstantModel),
    Linear(LinearModel),
    Gp(GpModel),
}

impl LeafModel {
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        match self {
            LeafModel::Constant(c) => Ok(c.mean),
            LeafModel::Linear(l) => {
                if x.len() != l.weights.len() {
                    return Err(Error::DimensionMismatch {
                        expected: l.weights.len(),
                        got: x.len(),
                    });
                }
                Ok(l.predict(x))
            }
            LeafModel::Gp(g) => g.predict_mean(x),
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            LeafModel::Constant(_) => "constant",
            LeafModel::Linear(_) => "linear",
            LeafModel::Gp(_) => "gp",
        }
    }
}
