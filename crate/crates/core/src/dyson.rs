//! Numerical truncated series expansion of the unitary evolution operator,
//! used as a model-independent oracle for the effective generators.
//!
//! The series partials obey the coupled linear hierarchy
//! `dU_k/dt = −i·H(t)·U_{k−1}(t)`, `U_0 = 1`, `U_k(0) = 0`, integrated with
//! a fixed-step classical Runge-Kutta scheme (mathematically identical to
//! the nested integrals, linear instead of exponential cost in the order).
//! On a resonant transition the order-n partial grows linearly in time;
//! the extracted growth rate is the implied effective coupling magnitude
//! and corroborates the generator without trusting its derivation.

use num_complex::Complex64;

use crate::decomposition::{DenseDrive, FrequencyDecomposition};
use crate::dense::CMat;
use crate::effective::enumerate_resonances;
use crate::error::{Error, Result};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const MINUS_I: Complex64 = Complex64::new(0.0, -1.0);

/// Step guard shared with the propagators: the fastest phase must advance
/// by no more than this per step.
pub const MAX_PHASE_PER_STEP: f64 = 0.05;

/// Fraction of the fit window discarded before slope extraction.
const TRANSIENT_FRACTION: f64 = 0.1;
/// Minimum number of retained grid points for a slope fit.
const MIN_FIT_POINTS: usize = 200;
/// Minimum window length in units of the slowest retained oscillation.
const MIN_WINDOW_CYCLES: f64 = 3.0;

fn check_step(d: &FrequencyDecomposition, dt: f64) -> Result<()> {
    let product = dt * d.max_frequency();
    if dt.is_nan() || dt <= 0.0 || product > MAX_PHASE_PER_STEP {
        return Err(Error::StepTooLarge { product });
    }
    Ok(())
}

/// Series partials U_0..U_K on a uniform grid.
pub struct SeriesPropagator {
    pub order: usize,
    pub dt: f64,
    pub times: Vec<f64>,
    /// `partials[k][ti]` is U_k at `times[ti]`.
    pub partials: Vec<Vec<CMat>>,
}

impl SeriesPropagator {
    /// Σ_{k=0..K} U_k at grid point `ti`.
    pub fn resummed(&self, ti: usize) -> CMat {
        let mut out = self.partials[0][ti].clone();
        for k in 1..=self.order {
            out.axpy(Complex64::new(1.0, 0.0), &self.partials[k][ti]);
        }
        out
    }
}

/// Integrate the full matrix hierarchy, storing every grid point.
///
/// Memory grows as grid_len · (K+1) · dim²; intended for small dimensions
/// and short windows. Use [`dyson_projected`] for long slope measurements.
pub fn dyson_series(
    d: &FrequencyDecomposition,
    order: usize,
    t_final: f64,
    dt: f64,
) -> Result<SeriesPropagator> {
    if order < 1 {
        return Err(Error::OrderTooLow(order));
    }
    check_step(d, dt)?;
    if t_final < dt {
        return Err(Error::WindowTooShort {
            msg: format!("t_final {t_final} < dt {dt}"),
        });
    }
    let dim = d.space().dim();
    let drive = DenseDrive::new(d, 1.0);
    let n_steps = (t_final / dt).round() as usize;

    let identity = CMat::identity(dim);
    let mut u: Vec<CMat> = (0..order).map(|_| CMat::zeros(dim)).collect();

    let mut times = Vec::with_capacity(n_steps + 1);
    let mut partials: Vec<Vec<CMat>> = vec![Vec::with_capacity(n_steps + 1); order + 1];
    let record = |times: &mut Vec<f64>, partials: &mut Vec<Vec<CMat>>, t: f64, u: &[CMat]| {
        times.push(t);
        partials[0].push(CMat::identity(dim));
        for (k, uk) in u.iter().enumerate() {
            partials[k + 1].push(uk.clone());
        }
    };
    record(&mut times, &mut partials, 0.0, &u);

    let mut h_a = CMat::zeros(dim);
    let mut h_mid = CMat::zeros(dim);
    let mut h_b = CMat::zeros(dim);
    let mut stage = vec![CMat::zeros(dim); order];
    let mut k1 = vec![CMat::zeros(dim); order];
    let mut k2 = vec![CMat::zeros(dim); order];
    let mut k3 = vec![CMat::zeros(dim); order];
    let mut k4 = vec![CMat::zeros(dim); order];

    drive.eval_into(0.0, h_a.data_mut());
    for step in 0..n_steps {
        let t = step as f64 * dt;
        drive.eval_into(t + dt / 2.0, h_mid.data_mut());
        drive.eval_into(t + dt, h_b.data_mut());

        // k1 = f(t, u)
        deriv_matrices(&h_a, &identity, &u, &mut k1);
        // k2 = f(t + dt/2, u + dt/2 k1)
        shifted(&u, &k1, dt / 2.0, &mut stage);
        deriv_matrices(&h_mid, &identity, &stage, &mut k2);
        // k3 = f(t + dt/2, u + dt/2 k2)
        shifted(&u, &k2, dt / 2.0, &mut stage);
        deriv_matrices(&h_mid, &identity, &stage, &mut k3);
        // k4 = f(t + dt, u + dt k3)
        shifted(&u, &k3, dt, &mut stage);
        deriv_matrices(&h_b, &identity, &stage, &mut k4);

        for k in 0..order {
            let w = Complex64::new(dt / 6.0, 0.0);
            u[k].axpy(w, &k1[k]);
            u[k].axpy(w * 2.0, &k2[k]);
            u[k].axpy(w * 2.0, &k3[k]);
            u[k].axpy(w, &k4[k]);
        }
        std::mem::swap(&mut h_a, &mut h_b);
        record(&mut times, &mut partials, t + dt, &u);
    }
    Ok(SeriesPropagator {
        order,
        dt,
        times,
        partials,
    })
}

fn deriv_matrices(h: &CMat, identity: &CMat, u: &[CMat], out: &mut [CMat]) {
    for k in 0..u.len() {
        let prev = if k == 0 { identity } else { &u[k - 1] };
        h.mul_into(prev, &mut out[k]);
        out[k].scale_inplace(MINUS_I);
    }
}

fn shifted(u: &[CMat], delta: &[CMat], factor: f64, out: &mut [CMat]) {
    for k in 0..u.len() {
        out[k].data_mut().copy_from_slice(u[k].data());
        out[k].axpy(Complex64::new(factor, 0.0), &delta[k]);
    }
}

/// Projected amplitudes indexed as `series[k−1][row][grid_point]`.
pub type ProjectedSeries = Vec<Vec<Vec<Complex64>>>;

/// Projected hierarchy: integrates the column vectors u_k(t) = U_k(t)|i⟩
/// and records ⟨f|u_k(t)⟩ for each requested row, every `stride` steps.
///
/// Returns (times, series) with `series[k][f][ti]` for k = 1..=order.
pub fn dyson_projected(
    d: &FrequencyDecomposition,
    order: usize,
    initial: usize,
    rows: &[usize],
    t_final: f64,
    dt: f64,
    stride: usize,
) -> Result<(Vec<f64>, ProjectedSeries)> {
    if order < 1 {
        return Err(Error::OrderTooLow(order));
    }
    check_step(d, dt)?;
    let dim = d.space().dim();
    if initial >= dim || rows.iter().any(|&r| r >= dim) {
        return Err(Error::InvalidLabel("basis index out of range".into()));
    }
    let stride = stride.max(1);
    let drive = DenseDrive::new(d, 1.0);
    let n_steps = (t_final / dt).round() as usize;

    let mut psi0 = vec![ZERO; dim];
    psi0[initial] = Complex64::new(1.0, 0.0);
    let mut u: Vec<Vec<Complex64>> = (0..order).map(|_| vec![ZERO; dim]).collect();

    let mut times = Vec::new();
    let mut series: ProjectedSeries =
        vec![vec![Vec::new(); rows.len()]; order];
    let mut record = |t: f64, u: &[Vec<Complex64>], times: &mut Vec<f64>| {
        times.push(t);
        for (k, uk) in u.iter().enumerate() {
            for (fi, &row) in rows.iter().enumerate() {
                series[k][fi].push(uk[row]);
            }
        }
    };
    record(0.0, &u, &mut times);

    let mut h_a = CMat::zeros(dim);
    let mut h_mid = CMat::zeros(dim);
    let mut h_b = CMat::zeros(dim);
    let mut stage = vec![vec![ZERO; dim]; order];
    let mut k1 = vec![vec![ZERO; dim]; order];
    let mut k2 = vec![vec![ZERO; dim]; order];
    let mut k3 = vec![vec![ZERO; dim]; order];
    let mut k4 = vec![vec![ZERO; dim]; order];

    drive.eval_into(0.0, h_a.data_mut());
    for step in 0..n_steps {
        let t = step as f64 * dt;
        drive.eval_into(t + dt / 2.0, h_mid.data_mut());
        drive.eval_into(t + dt, h_b.data_mut());

        deriv_vectors(&h_a, &psi0, &u, &mut k1);
        shifted_vectors(&u, &k1, dt / 2.0, &mut stage);
        deriv_vectors(&h_mid, &psi0, &stage, &mut k2);
        shifted_vectors(&u, &k2, dt / 2.0, &mut stage);
        deriv_vectors(&h_mid, &psi0, &stage, &mut k3);
        shifted_vectors(&u, &k3, dt, &mut stage);
        deriv_vectors(&h_b, &psi0, &stage, &mut k4);

        for k in 0..order {
            let w = dt / 6.0;
            for i in 0..dim {
                u[k][i] += w * (k1[k][i] + 2.0 * k2[k][i] + 2.0 * k3[k][i] + k4[k][i]);
            }
        }
        std::mem::swap(&mut h_a, &mut h_b);
        if (step + 1) % stride == 0 || step + 1 == n_steps {
            record(t + dt, &u, &mut times);
        }
    }
    Ok((times, series))
}

fn deriv_vectors(h: &CMat, psi0: &[Complex64], u: &[Vec<Complex64>], out: &mut [Vec<Complex64>]) {
    for k in 0..u.len() {
        let prev: &[Complex64] = if k == 0 { psi0 } else { &u[k - 1] };
        h.matvec_into(prev, &mut out[k]);
        for v in out[k].iter_mut() {
            *v *= MINUS_I;
        }
    }
}

fn shifted_vectors(
    u: &[Vec<Complex64>],
    delta: &[Vec<Complex64>],
    factor: f64,
    out: &mut [Vec<Complex64>],
) {
    for k in 0..u.len() {
        for i in 0..u[k].len() {
            out[k][i] = u[k][i] + factor * delta[k][i];
        }
    }
}

/// Slowest oscillation present in the kept tuples at this order: the minimum
/// |S_k| over tail sums, falling back to the smallest drive frequency.
fn slowest_scale(d: &FrequencyDecomposition, order: usize) -> Result<f64> {
    let (kept, _) = enumerate_resonances(d, order)?;
    let mut slowest = f64::INFINITY;
    for tuple in &kept {
        for s in &tuple.tail_sums {
            slowest = slowest.min(s.abs().to_f64());
        }
    }
    if !slowest.is_finite() {
        slowest = d
            .terms()
            .iter()
            .map(|t| t.omega.to_f64())
            .fold(f64::INFINITY, f64::min);
    }
    Ok(slowest)
}

/// Growth rates of ⟨f|U_n(t)|i⟩ for several final rows sharing one initial
/// state, from a single hierarchy integration. See [`secular_rate_check`].
pub fn secular_rates(
    d: &FrequencyDecomposition,
    order: usize,
    initial: usize,
    rows: &[usize],
    window: (f64, f64),
    dt: f64,
) -> Result<Vec<f64>> {
    let (t0, t1) = window;
    if t1.is_nan() || t1 <= t0 || t0 < 0.0 {
        return Err(Error::WindowTooShort {
            msg: format!("invalid window [{t0}, {t1}]"),
        });
    }
    let slowest = slowest_scale(d, order)?;
    let needed = MIN_WINDOW_CYCLES * std::f64::consts::TAU / slowest;
    if t1 - t0 < needed {
        return Err(Error::WindowTooShort {
            msg: format!(
                "window {:.3} shorter than {MIN_WINDOW_CYCLES} cycles of the slowest tail sum ({needed:.3})",
                t1 - t0
            ),
        });
    }

    let (times, series) = dyson_projected(d, order, initial, rows, t1, dt, 1)?;
    let fit_start = t0 + TRANSIENT_FRACTION * (t1 - t0);
    let keep: Vec<usize> = (0..times.len())
        .filter(|&i| times[i] >= fit_start)
        .collect();
    if keep.len() < MIN_FIT_POINTS {
        return Err(Error::WindowTooShort {
            msg: format!("{} fit points < {MIN_FIT_POINTS}", keep.len()),
        });
    }
    let ts: Vec<f64> = keep.iter().map(|&i| times[i]).collect();
    let out = series[order - 1]
        .iter()
        .map(|row_series| {
            let ys: Vec<Complex64> = keep.iter().map(|&i| row_series[i]).collect();
            complex_slope(&ts, &ys).norm()
        })
        .collect();
    Ok(out)
}

/// Extract the linear growth rate of ⟨f|U_n(t)|i⟩ over the window and return
/// the implied effective coupling magnitude.
///
/// Ordinary least squares on the complex amplitude, after discarding the
/// first 10% of the window. Requires the window to cover at least
/// [`MIN_WINDOW_CYCLES`] of the slowest retained oscillation and at least
/// [`MIN_FIT_POINTS`] retained grid points.
pub fn secular_rate_check(
    d: &FrequencyDecomposition,
    order: usize,
    initial: usize,
    final_state: usize,
    window: (f64, f64),
    dt: f64,
) -> Result<f64> {
    Ok(secular_rates(d, order, initial, &[final_state], window, dt)?[0])
}

/// OLS slope of a complex series against time.
pub fn complex_slope(ts: &[f64], ys: &[Complex64]) -> Complex64 {
    let n = ts.len() as f64;
    let t_mean = ts.iter().sum::<f64>() / n;
    let y_mean = ys.iter().sum::<Complex64>() / n;
    let mut num = ZERO;
    let mut den = 0.0;
    for (&t, &y) in ts.iter().zip(ys) {
        let dt = t - t_mean;
        num += (y - y_mean) * dt;
        den += dt * dt;
    }
    num / den
}
