//! Nonlinear least-squares fitting of Rabi traces to
//! `y(t) = O + A cos(w t + psi) * exp(-t/T)`.
//!
//! The fit is seeded by a coarse frequency scan (periodogram by linear
//! solve) plus a linear solve for the in-phase/quadrature amplitudes, then
//! refined by damped Gauss-Newton (Levenberg) iterations. Standard errors
//! come from the Jacobian at the optimum.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rabi::RabiTrace;
use crate::scalar::{wrap_two_pi, RealScalar};

/// Relative parameter-change threshold for convergence.
const REL_TOL: f64 = 1e-10;
/// Iteration cap for the refinement loop.
const MAX_ITER: usize = 200;
/// Amplitudes below this are reported with an undefined phase.
const FLAT_AMPLITUDE: f64 = 1e-10;

/// Fitting options.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FitOptions<T> {
    /// Hold the angular frequency fixed at this value instead of fitting it.
    pub fix_frequency: Option<T>,
    /// Also fit an exponential envelope `exp(-t/T)` on the oscillating term.
    pub fit_decay: bool,
}

/// Per-parameter standard errors of a [`SineFit`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SineFitStderr<T> {
    pub amplitude: T,
    pub phase: T,
    pub frequency: T,
    pub offset: T,
    /// Standard error of the decay rate `1/T`, when the envelope was fitted.
    pub decay_rate: Option<T>,
}

/// Canonical sinusoid parameters: `A >= 0`, `psi` in `[0, 2 pi)`, `w > 0`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SineFit<T> {
    pub amplitude: T,
    pub phase: T,
    pub frequency: T,
    pub offset: T,
    pub decay_t_us: Option<T>,
    pub residual_rms: T,
    pub stderr: SineFitStderr<T>,
    /// Cleared when the refinement loop hit the iteration cap; the returned
    /// parameters are then the best seen so far.
    pub converged: bool,
    /// Set for flat traces whose phase carries no information.
    pub phase_undefined: bool,
    pub iterations: usize,
}

/// Folds a signed amplitude into the canonical `A >= 0` form:
/// `(A, psi)` and `(-A, psi + pi)` describe the same sinusoid and map to
/// identical output.
pub fn canonical_amplitude_phase<T: RealScalar>(amplitude: T, phase: T) -> (T, T) {
    if amplitude < T::zero() {
        (-amplitude, wrap_two_pi(phase + T::PI()))
    } else {
        (amplitude, wrap_two_pi(phase))
    }
}

/// Fits one trace.
pub fn fit_sine<T: RealScalar>(trace: &RabiTrace<T>, opts: &FitOptions<T>) -> Result<SineFit<T>> {
    fit_series(&trace.times_us, &trace.signal, opts)
}

/// Fits one `(times, signal)` series.
pub fn fit_series<T: RealScalar>(times: &[T], signal: &[T], opts: &FitOptions<T>) -> Result<SineFit<T>> {
    check_series(times, signal)?;
    let n = times.len();
    let n_params = 2 + if opts.fix_frequency.is_none() { 1 } else { 0 } + 1
        + if opts.fit_decay { 1 } else { 0 };
    if n < n_params {
        return Err(Error::Fit(format!(
            "{n} points cannot determine {n_params} parameters"
        )));
    }

    let omega0 = match opts.fix_frequency {
        Some(w) if w > T::zero() => w,
        Some(w) => return Err(Error::Fit(format!("fixed frequency {w} must be positive"))),
        None => scan_frequency(&[(times, signal)]),
    };
    let (c, s, o, _) = linear_quadrature(times, signal, omega0);
    let (a0, psi0) = quadrature_to_polar(c, s);

    // parameter layout: [A, psi, (omega), O, (lambda)]
    let mut p0 = vec![a0, psi0];
    let omega_idx = if opts.fix_frequency.is_none() {
        p0.push(omega0);
        Some(2)
    } else {
        None
    };
    p0.push(o);
    let offset_idx = p0.len() - 1;
    let lambda_idx = if opts.fit_decay {
        p0.push(T::zero());
        Some(p0.len() - 1)
    } else {
        None
    };

    let fixed = opts.fix_frequency;
    let model = SingleTraceModel {
        times,
        signal,
        omega_idx,
        offset_idx,
        lambda_idx,
        fixed_omega: fixed,
    };
    let lm = lm_minimize(p0, n, |p, r, j| model.fill(p, r, j));

    let mut fit = model.extract(&lm);
    fit.iterations = lm.iterations;
    fit.converged = lm.converged;
    Ok(fit)
}

/// Fits several traces jointly with one shared frequency. Each trace keeps
/// its own amplitude, phase and offset; the returned fits all carry the
/// identical fitted frequency.
pub fn fit_shared_frequency<T: RealScalar>(
    traces: &[(&[T], &[T])],
    fix_frequency: Option<T>,
) -> Result<Vec<SineFit<T>>> {
    if traces.is_empty() {
        return Err(Error::Fit("no traces to fit".into()));
    }
    for (t, y) in traces {
        check_series(t, y)?;
    }
    let total_n: usize = traces.iter().map(|(t, _)| t.len()).sum();
    let free_omega = fix_frequency.is_none();
    let n_params = traces.len() * 3 + usize::from(free_omega);
    if total_n < n_params {
        return Err(Error::Fit(format!(
            "{total_n} points cannot determine {n_params} parameters"
        )));
    }

    let omega0 = match fix_frequency {
        Some(w) if w > T::zero() => w,
        Some(w) => return Err(Error::Fit(format!("fixed frequency {w} must be positive"))),
        None => scan_frequency(traces),
    };

    // layout: [omega?, (A, psi, O) per trace]
    let base = usize::from(free_omega);
    let mut p0 = Vec::with_capacity(n_params);
    if free_omega {
        p0.push(omega0);
    }
    for (t, y) in traces {
        let (c, s, o, _) = linear_quadrature(t, y, omega0);
        let (a, psi) = quadrature_to_polar(c, s);
        p0.extend_from_slice(&[a, psi, o]);
    }

    let fill = |p: &[T], r: &mut [T], mut j: Option<&mut Vec<Vec<T>>>| {
        let omega = if free_omega { p[0] } else { omega0 };
        let mut row = 0;
        for (k, (t, y)) in traces.iter().enumerate() {
            let (a, psi, o) = (p[base + 3 * k], p[base + 3 * k + 1], p[base + 3 * k + 2]);
            for (&ti, &yi) in t.iter().zip(y.iter()) {
                let arg = omega * ti + psi;
                let (sin, cos) = (arg.sin(), arg.cos());
                r[row] = yi - (o + a * cos);
                if let Some(jac) = j.as_deref_mut() {
                    let jr = &mut jac[row];
                    for v in jr.iter_mut() {
                        *v = T::zero();
                    }
                    if free_omega {
                        jr[0] = -a * ti * sin;
                    }
                    jr[base + 3 * k] = cos;
                    jr[base + 3 * k + 1] = -a * sin;
                    jr[base + 3 * k + 2] = T::one();
                }
                row += 1;
            }
        }
    };
    let lm = lm_minimize(p0, total_n, fill);

    let omega = if free_omega { lm.params[0] } else { omega0 };
    let omega_err = if free_omega { lm.stderr[0] } else { T::zero() };
    let fits = traces
        .iter()
        .enumerate()
        .map(|(k, (t, y))| {
            let (a, psi) = canonical_amplitude_phase(lm.params[base + 3 * k], lm.params[base + 3 * k + 1]);
            let rss_local = local_rss(t, y, a, psi, omega, lm.params[base + 3 * k + 2]);
            SineFit {
                amplitude: a,
                phase: psi,
                frequency: omega,
                offset: lm.params[base + 3 * k + 2],
                decay_t_us: None,
                residual_rms: (rss_local / T::from_f(t.len() as f64)).sqrt(),
                stderr: SineFitStderr {
                    amplitude: lm.stderr[base + 3 * k],
                    phase: lm.stderr[base + 3 * k + 1],
                    frequency: omega_err,
                    offset: lm.stderr[base + 3 * k + 2],
                    decay_rate: None,
                },
                converged: lm.converged,
                phase_undefined: a < T::from_f(FLAT_AMPLITUDE),
                iterations: lm.iterations,
            }
        })
        .collect();
    Ok(fits)
}

fn check_series<T: RealScalar>(times: &[T], signal: &[T]) -> Result<()> {
    if times.len() != signal.len() {
        return Err(Error::Fit("times and signal lengths differ".into()));
    }
    if times.len() < 2 {
        return Err(Error::Fit("series too short".into()));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Fit("times must be strictly increasing".into()));
    }
    if signal.iter().any(|y| !y.is_finite()) || times.iter().any(|t| !t.is_finite()) {
        return Err(Error::Fit("non-finite sample".into()));
    }
    Ok(())
}

fn local_rss<T: RealScalar>(t: &[T], y: &[T], a: T, psi: T, omega: T, o: T) -> T {
    t.iter()
        .zip(y)
        .map(|(&ti, &yi)| {
            let r = yi - (o + a * (omega * ti + psi).cos());
            r * r
        })
        .sum()
}

struct SingleTraceModel<'a, T> {
    times: &'a [T],
    signal: &'a [T],
    omega_idx: Option<usize>,
    offset_idx: usize,
    lambda_idx: Option<usize>,
    fixed_omega: Option<T>,
}

impl<T: RealScalar> SingleTraceModel<'_, T> {
    fn fill(&self, p: &[T], r: &mut [T], mut j: Option<&mut Vec<Vec<T>>>) {
        let a = p[0];
        let psi = p[1];
        let omega = match self.omega_idx {
            Some(i) => p[i],
            None => self.fixed_omega.expect("fixed frequency present"),
        };
        let o = p[self.offset_idx];
        let lambda = self.lambda_idx.map(|i| p[i]).unwrap_or_else(T::zero);
        for (row, (&t, &y)) in self.times.iter().zip(self.signal).enumerate() {
            let env = (-lambda * t).exp();
            let arg = omega * t + psi;
            let (sin, cos) = (arg.sin(), arg.cos());
            r[row] = y - (o + a * cos * env);
            if let Some(jac) = j.as_deref_mut() {
                let jr = &mut jac[row];
                jr[0] = cos * env;
                jr[1] = -a * sin * env;
                if let Some(i) = self.omega_idx {
                    jr[i] = -a * t * sin * env;
                }
                jr[self.offset_idx] = T::one();
                if let Some(i) = self.lambda_idx {
                    jr[i] = -t * a * cos * env;
                }
            }
        }
    }

    fn extract(&self, lm: &LmResult<T>) -> SineFit<T> {
        let mut phase = lm.params[1];
        let mut omega = match self.omega_idx {
            Some(i) => lm.params[i],
            None => self.fixed_omega.expect("fixed frequency present"),
        };
        if omega < T::zero() {
            // cos(-w t + psi) = cos(w t - psi)
            omega = -omega;
            phase = -phase;
        }
        let (amplitude, phase) = canonical_amplitude_phase(lm.params[0], phase);

        let lambda = self.lambda_idx.map(|i| lm.params[i]);
        let decay_t_us = lambda.and_then(|l| {
            if l.abs() > T::from_f(1e-12) {
                Some(T::one() / l)
            } else {
                None
            }
        });
        let n = self.times.len();
        SineFit {
            amplitude,
            phase,
            frequency: omega,
            offset: lm.params[self.offset_idx],
            decay_t_us,
            residual_rms: (lm.rss / T::from_f(n as f64)).sqrt(),
            stderr: SineFitStderr {
                amplitude: lm.stderr[0],
                phase: lm.stderr[1],
                frequency: self.omega_idx.map(|i| lm.stderr[i]).unwrap_or_else(T::zero),
                offset: lm.stderr[self.offset_idx],
                decay_rate: self.lambda_idx.map(|i| lm.stderr[i]),
            },
            converged: lm.converged,
            phase_undefined: amplitude < T::from_f(FLAT_AMPLITUDE),
            iterations: lm.iterations,
        }
    }
}

/// Coarse frequency scan: for each candidate, solve the linear quadrature
/// fit and keep the candidate with the smallest total residual.
fn scan_frequency<T: RealScalar>(traces: &[(&[T], &[T])]) -> T {
    let mut span = T::zero();
    let mut dt_min = T::infinity();
    for (t, _) in traces {
        let s = *t.last().expect("non-empty") - t[0];
        if s > span {
            span = s;
        }
        for w in t.windows(2) {
            let dt = w[1] - w[0];
            if dt < dt_min {
                dt_min = dt;
            }
        }
    }
    let omega_lo = T::PI() / span;
    let omega_hi = T::PI() / dt_min * T::from_f(0.999);
    let step = T::TAU() / (span * T::from_f(8.0));

    let mut best = (T::infinity(), omega_lo);
    let mut omega = omega_lo;
    while omega <= omega_hi {
        let rss: T = traces
            .iter()
            .map(|(t, y)| linear_quadrature(t, y, omega).3)
            .sum();
        if rss < best.0 {
            best = (rss, omega);
        }
        omega += step;
    }
    best.1
}

/// Least squares for `y ~ c cos(w t) + s sin(w t) + o` at fixed `w`.
/// Returns `(c, s, o, rss)`.
fn linear_quadrature<T: RealScalar>(times: &[T], signal: &[T], omega: T) -> (T, T, T, T) {
    let mut ata = [[T::zero(); 3]; 3];
    let mut atb = [T::zero(); 3];
    for (&t, &y) in times.iter().zip(signal) {
        let arg = omega * t;
        let row = [arg.cos(), arg.sin(), T::one()];
        for i in 0..3 {
            for (j, rj) in row.iter().enumerate() {
                ata[i][j] += row[i] * *rj;
            }
            atb[i] += row[i] * y;
        }
    }
    let a: Vec<Vec<T>> = ata.iter().map(|r| r.to_vec()).collect();
    let sol = solve_linear(a, atb.to_vec()).unwrap_or_else(|| vec![T::zero(); 3]);
    let (c, s, o) = (sol[0], sol[1], sol[2]);
    let rss = times
        .iter()
        .zip(signal)
        .map(|(&t, &y)| {
            let arg = omega * t;
            let r = y - (c * arg.cos() + s * arg.sin() + o);
            r * r
        })
        .sum();
    (c, s, o, rss)
}

/// `(c, s)` quadratures to `(A, psi)` with `y = A cos(w t + psi)`.
fn quadrature_to_polar<T: RealScalar>(c: T, s: T) -> (T, T) {
    let a = (c * c + s * s).sqrt();
    let psi = (-s).atan2(c);
    (a, wrap_two_pi(psi))
}

struct LmResult<T> {
    params: Vec<T>,
    rss: T,
    converged: bool,
    iterations: usize,
    stderr: Vec<T>,
}

/// Damped Gauss-Newton (Levenberg) minimizer for small problems.
#[allow(clippy::needless_range_loop)] // triangular index patterns
fn lm_minimize<T, F>(p0: Vec<T>, n_res: usize, mut fill: F) -> LmResult<T>
where
    T: RealScalar,
    F: FnMut(&[T], &mut [T], Option<&mut Vec<Vec<T>>>),
{
    let n_params = p0.len();
    let mut r = vec![T::zero(); n_res];
    let mut jac = vec![vec![T::zero(); n_params]; n_res];

    let mut params = p0;
    fill(&params, &mut r, Some(&mut jac));
    let mut rss: T = r.iter().map(|&x| x * x).sum();

    let mut mu = T::from_f(1e-3);
    let mut converged = false;
    let mut iterations = 0;

    for iter in 0..MAX_ITER {
        iterations = iter + 1;
        // normal equations J^T J delta = J^T r with Levenberg damping
        let mut n_mat = vec![vec![T::zero(); n_params]; n_params];
        let mut g = vec![T::zero(); n_params];
        for (row, ri) in jac.iter().zip(r.iter()) {
            for i in 0..n_params {
                let ji = row[i];
                if ji == T::zero() {
                    continue;
                }
                for j in i..n_params {
                    n_mat[i][j] += ji * row[j];
                }
                g[i] += ji * *ri;
            }
        }
        for i in 0..n_params {
            for j in 0..i {
                n_mat[i][j] = n_mat[j][i];
            }
        }
        let diag_scale: T = {
            let tr: T = (0..n_params).map(|i| n_mat[i][i]).sum();
            tr / T::from_f(n_params as f64) * T::from_f(1e-12) + T::from_f(1e-30)
        };

        let mut accepted = false;
        for _ in 0..12 {
            let mut damped = n_mat.clone();
            for i in 0..n_params {
                damped[i][i] += mu * n_mat[i][i] + mu * diag_scale;
            }
            let Some(delta) = solve_linear(damped, g.clone()) else {
                mu *= T::from_f(10.0);
                continue;
            };
            let trial: Vec<T> = params.iter().zip(&delta).map(|(&p, &d)| p + d).collect();
            let mut r_trial = vec![T::zero(); n_res];
            fill(&trial, &mut r_trial, None);
            let rss_trial: T = r_trial.iter().map(|&x| x * x).sum();
            if rss_trial.is_finite() && rss_trial <= rss {
                let max_rel = params
                    .iter()
                    .zip(&delta)
                    .map(|(&p, &d)| d.abs() / p.abs().max(T::one()))
                    .fold(T::zero(), |a, b| if b > a { b } else { a });
                params = trial;
                r = r_trial;
                rss = rss_trial;
                mu = (mu * T::from_f(0.25)).max(T::from_f(1e-16));
                accepted = true;
                if max_rel < T::from_f(REL_TOL) {
                    converged = true;
                }
                break;
            }
            mu *= T::from_f(10.0);
            if mu > T::from_f(1e10) {
                break;
            }
        }
        if converged {
            break;
        }
        if !accepted {
            // cannot improve: treat a stall at tiny gradient as converged
            let gmax = g.iter().fold(T::zero(), |a, &b| if b.abs() > a { b.abs() } else { a });
            converged = gmax < T::from_f(1e-12) * (rss + T::one());
            break;
        }
        fill(&params, &mut r, Some(&mut jac));
    }

    // covariance from the Jacobian at the optimum
    fill(&params, &mut r, Some(&mut jac));
    let mut n_mat = vec![vec![T::zero(); n_params]; n_params];
    for row in &jac {
        for i in 0..n_params {
            for j in 0..n_params {
                n_mat[i][j] += row[i] * row[j];
            }
        }
    }
    // small ridge keeps the inverse finite for degenerate directions
    let ridge = {
        let tr: T = (0..n_params).map(|i| n_mat[i][i]).sum();
        tr / T::from_f(n_params as f64) * T::from_f(1e-14) + T::from_f(1e-300)
    };
    for i in 0..n_params {
        n_mat[i][i] += ridge;
    }
    let s2 = if n_res > n_params {
        rss / T::from_f((n_res - n_params) as f64)
    } else {
        T::zero()
    };
    let stderr = match invert(n_mat) {
        Some(inv) => (0..n_params).map(|i| (s2 * inv[i][i]).max(T::zero()).sqrt()).collect(),
        None => vec![T::infinity(); n_params],
    };

    LmResult {
        params,
        rss,
        converged,
        iterations,
        stderr,
    }
}

/// Gaussian elimination with partial pivoting.
#[allow(clippy::needless_range_loop)] // rows borrowed pairwise by index
fn solve_linear<T: RealScalar>(mut a: Vec<Vec<T>>, mut b: Vec<T>) -> Option<Vec<T>> {
    let n = b.len();
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < T::from_f(1e-300) {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        let inv = T::one() / a[col][col];
        for row in (col + 1)..n {
            let f = a[row][col] * inv;
            if f == T::zero() {
                continue;
            }
            for k in col..n {
                let v = a[col][k];
                a[row][k] -= f * v;
            }
            let bv = b[col];
            b[row] -= f * bv;
        }
    }
    let mut x = vec![T::zero(); n];
    for col in (0..n).rev() {
        let mut acc = b[col];
        for k in (col + 1)..n {
            acc -= a[col][k] * x[k];
        }
        x[col] = acc / a[col][col];
    }
    Some(x)
}

/// Gauss-Jordan matrix inverse.
fn invert<T: RealScalar>(mut a: Vec<Vec<T>>) -> Option<Vec<Vec<T>>> {
    let n = a.len();
    let mut inv: Vec<Vec<T>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { T::one() } else { T::zero() }).collect())
        .collect();
    for col in 0..n {
        let mut pivot = col;
        for row in (col + 1)..n {
            if a[row][col].abs() > a[pivot][col].abs() {
                pivot = row;
            }
        }
        if a[pivot][col].abs() < T::from_f(1e-300) {
            return None;
        }
        a.swap(col, pivot);
        inv.swap(col, pivot);
        let p = a[col][col];
        for k in 0..n {
            a[col][k] /= p;
            inv[col][k] /= p;
        }
        for row in 0..n {
            if row == col {
                continue;
            }
            let f = a[row][col];
            if f == T::zero() {
                continue;
            }
            for k in 0..n {
                let av = a[col][k];
                let iv = inv[col][k];
                a[row][k] -= f * av;
                inv[row][k] -= f * iv;
            }
        }
    }
    Some(inv)
}
