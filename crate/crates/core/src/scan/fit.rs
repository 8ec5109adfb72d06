//! Levenberg-Marquardt fit of an envelope-modulated sinusoid
//! `R(x) = B [1 + V exp(-(x - x0)^2 / (2 s^2)) cos(2 pi x / L + phi)]`.
//!
//! The solver works on internal coordinates that keep the problem well
//! scaled and the visibility inside [0, 1]:
//!
//! | internal | natural                          |
//! |----------|----------------------------------|
//! | `b`      | `B = b`                          |
//! | `q`      | `V = sin^2 q`                    |
//! | `u`      | `x0 = xc + h u`                  |
//! | `w`      | `s = h / abs(w)` (w = 0 is flat) |
//! | `l`      | `L = L0 e^l`                     |
//! | `psi`    | `phi = psi - 2 pi xc / L`        |
//!
//! with `xc` the grid center, `h` the half span and `L0` the periodogram seed.

use std::f64::consts::{LN_2, PI};

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::periodogram::{estimate_period, NoFringe};

/// Iteration budget of a single damped least-squares solve.
pub const MAX_ITERATIONS: usize = 200;
/// Converged once every accepted step moves each parameter by less than this, relatively.
pub const PARAM_TOL: f64 = 1e-10;
/// Envelopes wider than this many spans are reported as lower bounds.
pub const SIGMA_CAP: f64 = 100.0;
/// Chi-square drop the envelope's two extra parameters must buy: the
/// 3-sigma (p = 0.0027) point of a chi-square with two degrees of freedom.
const ENVELOPE_DELTA_CHI2: f64 = 11.83;
const IRLS_PASSES: usize = 4;
const LAMBDA_START: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;
const DEFAULT_W: f64 = 0.05;

const B: usize = 0;
const Q: usize = 1;
const U: usize = 2;
const W: usize = 3;
const L: usize = 4;
const PSI: usize = 5;
const FULL: [usize; 6] = [B, Q, U, W, L, PSI];
const FLAT: [usize; 4] = [B, Q, L, PSI];

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Noise {
    /// Exact model values; unit weights, uncertainties scaled by the residual.
    None,
    /// Rates estimated from counts over `dwell` seconds; Poisson weights.
    Poisson { dwell: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitInput {
    pub delays: Vec<f64>,
    pub values: Vec<f64>,
    pub noise: Noise,
}

impl FitInput {
    pub fn new(delays: Vec<f64>, values: Vec<f64>, noise: Noise) -> Self {
        Self {
            delays,
            values,
            noise,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeFit {
    pub period: f64,
    pub period_sigma: f64,
    pub visibility: f64,
    pub visibility_sigma: f64,
    pub envelope_center: f64,
    pub envelope_center_sigma: f64,
    pub envelope_fwhm: f64,
    pub envelope_fwhm_sigma: f64,
    /// The envelope was not resolved; `envelope_fwhm` is a lower bound.
    pub envelope_lower_bound: bool,
    /// The fitted model carries no envelope at all.
    pub envelope_flat: bool,
    /// Phase of the carrier `2 pi x / period + phase`, in (-pi, pi].
    pub phase: f64,
    pub phase_sigma: f64,
    pub baseline: f64,
    pub baseline_sigma: f64,
    /// Reduced chi-square for Poisson data; RMS residual over baseline otherwise.
    pub reduced_residual: f64,
    pub converged: bool,
    pub iterations: usize,
}

impl FringeFit {
    pub fn envelope_sigma(&self) -> f64 {
        self.envelope_fwhm / (2.0 * (2.0 * LN_2).sqrt())
    }

    pub fn model(&self, x: f64) -> f64 {
        let env = if self.envelope_flat {
            1.0
        } else {
            let z = (x - self.envelope_center) / self.envelope_sigma();
            (-0.5 * z * z).exp()
        };
        self.baseline * (1.0 + self.visibility * env * (2.0 * PI * x / self.period + self.phase).cos())
    }

    /// `(max - min) / (max + min)` of the fitted carrier at the envelope center.
    pub fn visibility_minmax(&self) -> f64 {
        let at = |c: f64| self.baseline * (1.0 + self.visibility * c);
        let (max, min) = (at(1.0), at(-1.0));
        if max + min == 0.0 {
            return 0.0;
        }
        (max - min) / (max + min)
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FitError {
    #[error("need at least 8 points to fit, got {0}")]
    TooFewPoints(usize),
    #[error("delays and values differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("delays must be finite and strictly increasing")]
    BadDelays,
    #[error("values must be finite")]
    NonFinite,
    #[error(transparent)]
    NoFringe(#[from] NoFringe),
    #[error("fit did not converge: {diagnostic}")]
    NotConverged {
        best: Box<FringeFit>,
        diagnostic: String,
    },
}

#[derive(Debug, Clone, Copy)]
struct Frame {
    xc: f64,
    h: f64,
    period0: f64,
}

type Params = [f64; 6];

fn visibility_of(p: &Params) -> f64 {
    p[Q].sin().powi(2)
}

fn period_of(frame: &Frame, p: &Params) -> f64 {
    frame.period0 * p[L].exp()
}

/// Model value and its gradient in internal coordinates.
fn eval(frame: &Frame, p: &Params, x: f64) -> (f64, Params) {
    let v = visibility_of(p);
    let period = period_of(frame, p);
    let zeta = (x - frame.xc) / frame.h;
    let d = zeta - p[U];
    let env = (-0.5 * p[W] * p[W] * d * d).exp();
    let theta = 2.0 * PI * (x - frame.xc) / period + p[PSI];
    let (s, c) = theta.sin_cos();
    let b = p[B];
    let value = b * (1.0 + v * env * c);
    let bvec = b * v * env * c;
    let bves = b * v * env * s;
    let grad = [
        1.0 + v * env * c,
        b * (2.0 * p[Q]).sin() * env * c,
        bvec * p[W] * p[W] * d,
        -bvec * p[W] * d * d,
        bves * 2.0 * PI * (x - frame.xc) / period,
        -bves,
    ];
    (value, grad)
}

struct Problem<'a> {
    frame: Frame,
    x: &'a [f64],
    y: &'a [f64],
    weights: Vec<f64>,
}

impl Problem<'_> {
    fn chi2(&self, p: &Params) -> f64 {
        self.x
            .iter()
            .zip(self.y)
            .zip(&self.weights)
            .map(|((x, y), w)| {
                let r = y - eval(&self.frame, p, *x).0;
                w * r * r
            })
            .sum()
    }

    /// Normal equations `J^T W J` and `J^T W r` restricted to `active`.
    fn normal(&self, p: &Params, active: &[usize]) -> (DMatrix<f64>, DVector<f64>) {
        let k = active.len();
        let mut a = DMatrix::zeros(k, k);
        let mut g = DVector::zeros(k);
        for ((x, y), w) in self.x.iter().zip(self.y).zip(&self.weights) {
            let (m, grad) = eval(&self.frame, p, *x);
            let r = y - m;
            for (i, &pi) in active.iter().enumerate() {
                g[i] += w * grad[pi] * r;
                for (j, &pj) in active.iter().enumerate().take(i + 1) {
                    a[(i, j)] += w * grad[pi] * grad[pj];
                }
            }
        }
        for i in 0..k {
            for j in 0..i {
                a[(j, i)] = a[(i, j)];
            }
        }
        (a, g)
    }
}

struct Solve {
    params: Params,
    chi2: f64,
    iterations: usize,
    converged: bool,
    diagnostic: String,
}

/// Relative step test; the visibility is measured as V itself, since `q`
/// keeps moving near V = 1 long after V has settled.
fn step_small(step: &DVector<f64>, p: &Params, trial: &Params, active: &[usize]) -> bool {
    active.iter().enumerate().all(|(i, &pi)| match pi {
        B => step[i].abs() <= PARAM_TOL * p[B].abs(),
        Q => (visibility_of(trial) - visibility_of(p)).abs() <= PARAM_TOL,
        _ => step[i].abs() <= PARAM_TOL * p[pi].abs().max(1.0),
    })
}

fn levenberg_marquardt(problem: &Problem, start: Params, active: &[usize]) -> Solve {
    let mut p = start;
    let mut chi2 = problem.chi2(&p);
    let mut lambda = LAMBDA_START;
    let mut diagnostic = String::new();
    if !chi2.is_finite() {
        return Solve {
            params: p,
            chi2,
            iterations: 0,
            converged: false,
            diagnostic: "non-finite residual at the starting point".into(),
        };
    }
    let (mut a, mut g) = problem.normal(&p, active);
    for iteration in 1..=MAX_ITERATIONS {
        if chi2 == 0.0 {
            return Solve {
                params: p,
                chi2,
                iterations: iteration - 1,
                converged: true,
                diagnostic,
            };
        }
        let max_diag = (0..active.len()).map(|i| a[(i, i)]).fold(0.0, f64::max);
        let mut damped = a.clone();
        for i in 0..active.len() {
            damped[(i, i)] += lambda * a[(i, i)].max(1e-15 * max_diag);
        }
        let step = match damped.cholesky() {
            Some(ch) => ch.solve(&g),
            None => {
                lambda *= 10.0;
                continue;
            }
        };
        let mut trial = p;
        for (i, &pi) in active.iter().enumerate() {
            trial[pi] += step[i];
        }
        let trial_chi2 = problem.chi2(&trial);
        if trial_chi2.is_finite() && trial_chi2 <= chi2 {
            let small = step_small(&step, &p, &trial, active);
            p = trial;
            chi2 = trial_chi2;
            lambda = (lambda / 10.0).max(1e-12);
            if small {
                return Solve {
                    params: p,
                    chi2,
                    iterations: iteration,
                    converged: true,
                    diagnostic,
                };
            }
            (a, g) = problem.normal(&p, active);
        } else {
            lambda *= 10.0;
            if lambda > LAMBDA_MAX {
                // no descent direction left at working precision
                return Solve {
                    params: p,
                    chi2,
                    iterations: iteration,
                    converged: true,
                    diagnostic,
                };
            }
        }
    }
    diagnostic = format!(
        "{MAX_ITERATIONS} iterations without a relative parameter change below {PARAM_TOL:e} (damping {lambda:e})"
    );
    Solve {
        params: p,
        chi2,
        iterations: MAX_ITERATIONS,
        converged: false,
        diagnostic,
    }
}

fn poisson_weights(values: impl Iterator<Item = f64>, dwell: f64) -> Vec<f64> {
    values.map(|rate| dwell * dwell / (rate * dwell).max(1.0)).collect()
}

/// Runs the solver, re-deriving Poisson weights from the model between passes.
fn solve(frame: Frame, input: &FitInput, start: Params, active: &[usize]) -> (Solve, Vec<f64>) {
    let x = &input.delays;
    let y = &input.values;
    let mut weights = match input.noise {
        Noise::None => vec![1.0; x.len()],
        Noise::Poisson { dwell } => poisson_weights(y.iter().copied(), dwell),
    };
    let passes = match input.noise {
        Noise::None => 1,
        Noise::Poisson { .. } => IRLS_PASSES,
    };
    let mut start = start;
    let mut total = 0;
    let mut last = None;
    for _ in 0..passes {
        let problem = Problem {
            frame,
            x,
            y,
            weights: weights.clone(),
        };
        let mut s = levenberg_marquardt(&problem, start, active);
        total += s.iterations;
        s.iterations = total;
        start = s.params;
        let done = !s.converged;
        last = Some(s);
        if done {
            break;
        }
        if let Noise::Poisson { dwell } = input.noise {
            weights = poisson_weights(x.iter().map(|x| eval(&frame, &start, *x).0), dwell);
        }
    }
    (last.expect("at least one pass"), weights)
}

/// Least-squares `a + b cos(t) + c sin(t)` on the given points.
fn carrier_projection(frame: &Frame, x: &[f64], y: &[f64]) -> Option<(f64, f64, f64)> {
    let mut m = Matrix3::zeros();
    let mut v = Vector3::zeros();
    for (x, y) in x.iter().zip(y) {
        let (s, c) = (2.0 * PI * (x - frame.xc) / frame.period0).sin_cos();
        let row = Vector3::new(1.0, c, s);
        m += row * row.transpose();
        v += row * *y;
    }
    let sol = m.cholesky()?.solve(&v);
    let amp = (sol[1] * sol[1] + sol[2] * sol[2]).sqrt();
    Some((sol[0], amp, (-sol[2]).atan2(sol[1])))
}

/// Starting point from the carrier projection plus a log-quadratic fit of
/// the local fringe contrast over chunks of about two periods.
fn seed(frame: &Frame, x: &[f64], y: &[f64]) -> Params {
    let (b, amp, psi) = carrier_projection(frame, x, y).unwrap_or((y.iter().sum::<f64>() / y.len() as f64, 0.0, 0.0));
    let global_v = if b != 0.0 { (amp / b.abs()).clamp(1e-3, 0.999) } else { 0.5 };

    let step = (x[x.len() - 1] - x[0]) / (x.len() - 1) as f64;
    let chunk = ((2.0 * frame.period0 / step).ceil() as usize).max(8);
    let mut rows = Vec::new();
    for (xs, ys) in x.chunks(chunk).zip(y.chunks(chunk)) {
        if xs.len() < chunk / 2 + 1 {
            continue;
        }
        if let Some((a, amp, _)) = carrier_projection(frame, xs, ys) {
            if a > 0.0 && amp > 0.0 {
                let zeta = (xs.iter().sum::<f64>() / xs.len() as f64 - frame.xc) / frame.h;
                rows.push((zeta, (amp / a).ln(), (amp / a).powi(2)));
            }
        }
    }
    let (mut u, mut w, mut v) = (0.0, DEFAULT_W, global_v);
    if rows.len() >= 3 {
        let mut m = Matrix3::zeros();
        let mut rhs = Vector3::zeros();
        for (z, ln, wt) in &rows {
            let r = Vector3::new(1.0, *z, z * z);
            m += r * r.transpose() * *wt;
            rhs += r * (*ln * wt);
        }
        if let Some(ch) = m.cholesky() {
            let c = ch.solve(&rhs);
            if c[2] < 0.0 && c.iter().all(|v| v.is_finite()) {
                w = (-2.0 * c[2]).sqrt().clamp(DEFAULT_W, 10.0);
                u = (c[1] / (w * w)).clamp(-1.5, 1.5);
                v = (c[0] + c[1] * u + c[2] * u * u).exp().clamp(1e-3, 0.999);
            }
        }
    }
    let mut p = [0.0; 6];
    p[B] = b;
    p[Q] = v.sqrt().asin();
    p[U] = u;
    p[W] = w;
    p[L] = 0.0;
    p[PSI] = psi;
    p
}

fn wrap_phase(phi: f64) -> f64 {
    let mut r = phi.rem_euclid(2.0 * PI);
    if r > PI {
        r -= 2.0 * PI;
    }
    r
}

/// Natural-parameter gradient `(B, V, x0, s, L, phi)` of the model.
fn natural_gradient(n: &Natural, x: f64, flat: bool) -> [f64; 6] {
    let z = x - n.x0;
    let env = if flat { 1.0 } else { (-0.5 * z * z / (n.sigma * n.sigma)).exp() };
    let theta = 2.0 * PI * x / n.period + n.phase;
    let (s, c) = theta.sin_cos();
    let bvec = n.b * n.v * env * c;
    let bves = n.b * n.v * env * s;
    [
        1.0 + n.v * env * c,
        n.b * env * c,
        if flat { 0.0 } else { bvec * z / (n.sigma * n.sigma) },
        if flat { 0.0 } else { bvec * z * z / n.sigma.powi(3) },
        bves * 2.0 * PI * x / (n.period * n.period),
        -bves,
    ]
}

struct Natural {
    b: f64,
    v: f64,
    x0: f64,
    sigma: f64,
    period: f64,
    phase: f64,
}

fn natural(frame: &Frame, p: &Params) -> Natural {
    let period = period_of(frame, p);
    Natural {
        b: p[B],
        v: visibility_of(p),
        x0: frame.xc + frame.h * p[U],
        sigma: if p[W] == 0.0 { f64::INFINITY } else { frame.h / p[W].abs() },
        period,
        phase: wrap_phase(p[PSI] - 2.0 * PI * frame.xc / period),
    }
}

fn natural_sigmas(n: &Natural, input: &FitInput, weights: &[f64], flat: bool, scale: f64) -> [f64; 6] {
    let active: &[usize] = if flat { &FLAT } else { &FULL };
    let k = active.len();
    let mut a = DMatrix::<f64>::zeros(k, k);
    for (x, w) in input.delays.iter().zip(weights) {
        let g = natural_gradient(n, *x, flat);
        for (i, &pi) in active.iter().enumerate() {
            for (j, &pj) in active.iter().enumerate() {
                a[(i, j)] += w * g[pi] * g[pj];
            }
        }
    }
    let mut out = [f64::INFINITY; 6];
    if let Some(inv) = a.try_inverse() {
        for (i, &pi) in active.iter().enumerate() {
            out[pi] = (inv[(i, i)] * scale).max(0.0).sqrt();
        }
    }
    out
}

fn validate(input: &FitInput) -> Result<(), FitError> {
    let (x, y) = (&input.delays, &input.values);
    if x.len() != y.len() {
        return Err(FitError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 8 {
        return Err(FitError::TooFewPoints(x.len()));
    }
    if x.iter().any(|v| !v.is_finite()) || x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(FitError::BadDelays);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(FitError::NonFinite);
    }
    Ok(())
}

/// Fits all six parameters; falls back to a flat envelope when the data do
/// not resolve it, reporting the envelope width as a lower bound.
pub fn fit_fringe(input: &FitInput) -> Result<FringeFit, FitError> {
    validate(input)?;
    let (x, y) = (&input.delays, &input.values);
    let n = x.len();
    let period0 = estimate_period(x, y)?;
    let span = x[n - 1] - x[0];
    let frame = Frame {
        xc: 0.5 * (x[0] + x[n - 1]),
        h: 0.5 * span,
        period0,
    };
    let start = seed(&frame, x, y);

    let (full, full_weights) = solve(frame, input, start, &FULL);
    let dof = |k: usize| (n - k).max(1) as f64;
    let scale_for = |chi2: f64, k: usize| match input.noise {
        Noise::None => chi2 / dof(k),
        Noise::Poisson { .. } => 1.0,
    };
    let mut flat_start = start;
    flat_start[U] = 0.0;
    flat_start[W] = 0.0;
    let (flat_fit, flat_weights) = solve(frame, input, flat_start, &FLAT);
    // likelihood ratio under shared weights; a Wald test on w misbehaves when
    // V sits at its upper bound
    let resolved = full.converged && {
        let problem = Problem {
            frame,
            x,
            y,
            weights: full_weights.clone(),
        };
        let chi2_full = problem.chi2(&full.params);
        let drop = problem.chi2(&flat_fit.params) - chi2_full;
        drop > ENVELOPE_DELTA_CHI2 * scale_for(chi2_full, FULL.len())
    };

    let (sol, weights, flat) = if resolved {
        (full, full_weights, false)
    } else {
        (flat_fit, flat_weights, true)
    };

    let k = if flat { FLAT.len() } else { FULL.len() };
    let scale = scale_for(sol.chi2, k);
    let nat = natural(&frame, &sol.params);
    let sig = natural_sigmas(&nat, input, &weights, flat, scale);
    let reduced_residual = match input.noise {
        Noise::None => (sol.chi2 / dof(k)).sqrt() / nat.b.abs(),
        Noise::Poisson { .. } => sol.chi2 / dof(k),
    };
    let fwhm_factor = 2.0 * (2.0 * LN_2).sqrt();
    // a resolved but very wide envelope keeps its shape in the model and is
    // only flagged; its width is no better than a bound
    let too_wide = !flat && nat.sigma > SIGMA_CAP * span;
    let (center, center_sigma, sigma, sigma_sigma) = if too_wide {
        (nat.x0, sig[U], nat.sigma, f64::INFINITY)
    } else if flat {
        // width at which the mean contrast loss would reach twice the visibility error
        let mut lower = frame.h * (nat.v / (12.0 * sig[Q])).sqrt();
        if !lower.is_finite() || lower <= 0.0 {
            lower = SIGMA_CAP * span;
        }
        (frame.xc, f64::INFINITY, lower, f64::INFINITY)
    } else {
        (nat.x0, sig[U], nat.sigma, sig[W])
    };
    let fit = FringeFit {
        period: nat.period,
        period_sigma: sig[L],
        visibility: nat.v,
        visibility_sigma: sig[Q],
        envelope_center: center,
        envelope_center_sigma: center_sigma,
        envelope_fwhm: fwhm_factor * sigma,
        envelope_fwhm_sigma: fwhm_factor * sigma_sigma,
        envelope_lower_bound: flat || too_wide,
        envelope_flat: flat,
        phase: nat.phase,
        phase_sigma: sig[PSI],
        baseline: nat.b,
        baseline_sigma: sig[B],
        reduced_residual,
        converged: sol.converged,
        iterations: sol.iterations,
    };
    if !sol.converged {
        return Err(FitError::NotConverged {
            best: Box::new(fit),
            diagnostic: sol.diagnostic,
        });
    }
    Ok(fit)
}

/// Fitted fringe contrast; a record without a detectable fringe has none.
pub fn visibility_minmax(input: &FitInput) -> Result<f64, FitError> {
    match fit_fringe(input) {
        Ok(fit) => Ok(fit.visibility_minmax()),
        Err(FitError::NoFringe(_)) => Ok(0.0),
        Err(e) => Err(e),
    }
}
