//! Exact time-dependent propagation of the decomposed drive and
//! time-independent propagation of derived effective Hamiltonians, plus
//! population/fidelity observables and trajectory export.
//!
//! The full propagator is the midpoint-sampled piecewise-constant
//! exponential: each step applies exp(−i·H(t_mid)·dt) built by
//! scaling-and-squaring. This keeps every step exactly unitary up to
//! roundoff, so boson-cutoff leakage is the only physical error channel and
//! is checked against a hard threshold at every step.

use std::io::Write;
use std::sync::Arc;

use num_complex::Complex64;

use crate::decomposition::{DenseDrive, FrequencyDecomposition};
use crate::dense::{CMat, ExpmWorkspace};
use crate::dyson::MAX_PHASE_PER_STEP;
use crate::error::{Error, Result};
use crate::hilbert::{Factor, Operator, SpaceSpec};
use crate::jsonio::format_float;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Per-step norm drift allowed for the midpoint-exponential full propagator.
const FULL_NORM_TOLERANCE: f64 = 1e-9;
/// Per-step norm drift allowed with a time-independent hermitian generator.
const EFFECTIVE_NORM_TOLERANCE: f64 = 1e-12;
/// Edge-level occupancy above this signals the boson cutoff is too small.
const LEAKAGE_THRESHOLD: f64 = 1e-3;
/// Hermitian defect above this rejects an effective generator.
const HERMITIAN_TOLERANCE: f64 = 1e-10;

/// A normalized state on a composite space.
#[derive(Clone, Debug)]
pub struct StateVector {
    space: Arc<SpaceSpec>,
    amplitudes: Vec<Complex64>,
}

impl StateVector {
    /// Basis state |label⟩.
    pub fn basis(space: &Arc<SpaceSpec>, label: &str) -> Result<Self> {
        let index = space.label_to_index(label)?;
        Ok(Self::basis_index(space, index))
    }

    pub fn basis_index(space: &Arc<SpaceSpec>, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; space.dim()];
        amplitudes[index] = Complex64::new(1.0, 0.0);
        StateVector {
            space: Arc::clone(space),
            amplitudes,
        }
    }

    pub fn from_amplitudes(space: &Arc<SpaceSpec>, amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.len() != space.dim() {
            return Err(Error::InvalidLabel(format!(
                "amplitude vector length {} != dim {}",
                amplitudes.len(),
                space.dim()
            )));
        }
        let norm = l2_norm(&amplitudes);
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::NormDrift {
                drift: (norm - 1.0).abs(),
            });
        }
        Ok(StateVector {
            space: Arc::clone(space),
            amplitudes,
        })
    }

    pub fn space(&self) -> &Arc<SpaceSpec> {
        &self.space
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn population(&self, index: usize) -> f64 {
        self.amplitudes[index].norm_sqr()
    }

    /// |⟨self|other⟩|²
    pub fn fidelity(&self, other: &StateVector) -> f64 {
        overlap(&self.amplitudes, &other.amplitudes).norm_sqr()
    }

    pub fn phase_rotated(&self, phi: f64) -> StateVector {
        let factor = Complex64::new(phi.cos(), phi.sin());
        StateVector {
            space: Arc::clone(&self.space),
            amplitudes: self.amplitudes.iter().map(|a| a * factor).collect(),
        }
    }
}

fn l2_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
}

fn overlap(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Sampled propagation record. `leakage[i][leg]` is the total occupancy of
/// the cutoff-edge level of the `leg`-th bosonic mode at `times[i]`.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub leakage: Vec<Vec<f64>>,
    /// Largest single-step norm deviation seen before renormalization.
    pub max_norm_drift: f64,
}

impl Trajectory {
    pub fn space(&self) -> &Arc<SpaceSpec> {
        self.states[0].space()
    }

    pub fn population_series(&self, index: usize) -> Vec<f64> {
        self.states.iter().map(|s| s.population(index)).collect()
    }

    pub fn fidelity_series(&self, other: &Trajectory) -> Result<Vec<f64>> {
        if self.times.len() != other.times.len()
            || self
                .times
                .iter()
                .zip(&other.times)
                .any(|(a, b)| (a - b).abs() > 1e-12)
        {
            return Err(Error::GridMismatch);
        }
        Ok(self
            .states
            .iter()
            .zip(&other.states)
            .map(|(a, b)| a.fidelity(b))
            .collect())
    }
}

/// Rotate every recorded state into the frame generated by `g`:
/// ψ(t) ↦ exp(−i·g·t)·ψ(t).
///
/// Used when an effective model is static only in a rotated frame (e.g. the
/// Stark-compensated drive, whose frame term is δ·n̂). Populations of basis
/// states are unchanged when `g` is diagonal; overlaps are not.
pub fn rotate_into_frame(traj: &Trajectory, g: &Operator) -> Result<Trajectory> {
    if g.space() != traj.space() {
        return Err(Error::SpaceMismatch);
    }
    let dim = g.dim();
    let g_dense = CMat::from_rows(dim, g.to_dense());
    let mut ws = ExpmWorkspace::new(dim);
    let mut u = CMat::zeros(dim);
    let mut states = Vec::with_capacity(traj.states.len());
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let mut a = g_dense.clone();
        a.scale_inplace(Complex64::new(0.0, -t));
        ws.expm(&a, &mut u);
        states.push(StateVector {
            space: Arc::clone(traj.space()),
            amplitudes: u.matvec(state.amplitudes()),
        });
    }
    Ok(Trajectory {
        times: traj.times.clone(),
        states,
        leakage: traj.leakage.clone(),
        max_norm_drift: traj.max_norm_drift,
    })
}

/// Indices whose boson digit sits at the truncation edge, per bosonic leg.
fn edge_index_sets(space: &SpaceSpec) -> Vec<Vec<usize>> {
    let mut sets = Vec::new();
    for (leg, factor) in space.factors().iter().enumerate() {
        if let Factor::Boson { cutoff } = factor {
            let set = (0..space.dim())
                .filter(|&i| space.decompose(i)[leg] == cutoff - 1)
                .collect();
            sets.push(set);
        }
    }
    sets
}

fn leakage_of(psi: &[Complex64], edge_sets: &[Vec<usize>]) -> Vec<f64> {
    edge_sets
        .iter()
        .map(|set| set.iter().map(|&i| psi[i].norm_sqr()).sum())
        .collect()
}

fn recording_stride(n_steps: usize, max_samples: usize) -> usize {
    if max_samples < 2 {
        return n_steps.max(1);
    }
    (n_steps / (max_samples - 1)).max(1)
}

/// Exact propagation of the time-dependent drive.
///
/// `max_samples` caps the number of recorded grid points (the step loop
/// always runs at the full resolution; recording is strided).
pub fn propagate_full(
    d: &FrequencyDecomposition,
    psi0: &StateVector,
    t_final: f64,
    dt: f64,
    max_samples: usize,
) -> Result<Trajectory> {
    if psi0.space() != d.space() {
        return Err(Error::SpaceMismatch);
    }
    let product = dt * d.max_frequency();
    if dt.is_nan() || dt <= 0.0 || product > MAX_PHASE_PER_STEP {
        return Err(Error::StepTooLarge { product });
    }
    let dim = d.space().dim();
    let drive = DenseDrive::new(d, 1.0);
    let n_steps = (t_final / dt).round().max(1.0) as usize;
    let stride = recording_stride(n_steps, max_samples);
    let edge_sets = edge_index_sets(d.space());

    let mut h = CMat::zeros(dim);
    let mut u = CMat::zeros(dim);
    let mut ws = ExpmWorkspace::new(dim);
    let mut psi = psi0.amplitudes().to_vec();
    let mut psi_next = vec![ZERO; dim];
    let scale = Complex64::new(0.0, -dt);

    let mut times = Vec::new();
    let mut states = Vec::new();
    let mut leakage = Vec::new();
    let mut max_drift: f64 = 0.0;

    times.push(0.0);
    states.push(psi0.clone());
    leakage.push(leakage_of(&psi, &edge_sets));

    for step in 0..n_steps {
        let t_mid = (step as f64 + 0.5) * dt;
        drive.eval_into(t_mid, h.data_mut());
        h.scale_inplace(scale);
        ws.expm(&h, &mut u);
        u.matvec_into(&psi, &mut psi_next);
        std::mem::swap(&mut psi, &mut psi_next);

        let norm = l2_norm(&psi);
        let drift = (norm - 1.0).abs();
        max_drift = max_drift.max(drift);
        if drift > FULL_NORM_TOLERANCE {
            return Err(Error::NormDrift { drift });
        }
        let inv = 1.0 / norm;
        for a in &mut psi {
            *a *= inv;
        }

        let t = (step + 1) as f64 * dt;
        let leak = leakage_of(&psi, &edge_sets);
        if let Some(&worst) = leak
            .iter()
            .max_by(|a, b| a.partial_cmp(b).unwrap())
            .filter(|&&v| v > LEAKAGE_THRESHOLD)
        {
            return Err(Error::LeakageExceeded {
                occupancy: worst,
                t,
            });
        }
        if (step + 1) % stride == 0 || step + 1 == n_steps {
            times.push(t);
            states.push(StateVector {
                space: Arc::clone(d.space()),
                amplitudes: psi.clone(),
            });
            leakage.push(leak);
        }
    }
    Ok(Trajectory {
        times,
        states,
        leakage,
        max_norm_drift: max_drift,
    })
}

/// The resummed full propagator over [0, t_final] (product of the midpoint
/// step unitaries). Intended for small dimensions and test windows.
pub fn full_propagator(d: &FrequencyDecomposition, t_final: f64, dt: f64) -> Result<CMat> {
    let product = dt * d.max_frequency();
    if dt.is_nan() || dt <= 0.0 || product > MAX_PHASE_PER_STEP {
        return Err(Error::StepTooLarge { product });
    }
    let dim = d.space().dim();
    let drive = DenseDrive::new(d, 1.0);
    let n_steps = (t_final / dt).round().max(1.0) as usize;
    let mut h = CMat::zeros(dim);
    let mut u = CMat::zeros(dim);
    let mut ws = ExpmWorkspace::new(dim);
    let mut total = CMat::identity(dim);
    let mut tmp = CMat::zeros(dim);
    let scale = Complex64::new(0.0, -dt);
    for step in 0..n_steps {
        drive.eval_into((step as f64 + 0.5) * dt, h.data_mut());
        h.scale_inplace(scale);
        ws.expm(&h, &mut u);
        u.mul_into(&total, &mut tmp);
        std::mem::swap(&mut total, &mut tmp);
    }
    Ok(total)
}

/// Propagation under a time-independent hermitian generator.
pub fn propagate_effective(
    h_op: &Operator,
    psi0: &StateVector,
    t_final: f64,
    dt: f64,
    max_samples: usize,
) -> Result<Trajectory> {
    if psi0.space() != h_op.space() {
        return Err(Error::SpaceMismatch);
    }
    let defect = h_op.hermitian_defect();
    if defect > HERMITIAN_TOLERANCE {
        return Err(Error::NonHermitianGenerator { defect });
    }
    if dt.is_nan() || dt <= 0.0 {
        return Err(Error::StepTooLarge { product: dt });
    }
    let dim = h_op.space().dim();
    let n_steps = (t_final / dt).round().max(1.0) as usize;
    let stride = recording_stride(n_steps, max_samples);
    let edge_sets = edge_index_sets(h_op.space());

    // one exponential; the generator is constant
    let mut a = CMat::from_rows(dim, h_op.to_dense());
    a.scale_inplace(Complex64::new(0.0, -dt));
    let mut u = CMat::zeros(dim);
    ExpmWorkspace::new(dim).expm(&a, &mut u);

    let mut psi = psi0.amplitudes().to_vec();
    let mut psi_next = vec![ZERO; dim];
    let mut times = vec![0.0];
    let mut states = vec![psi0.clone()];
    let mut leakage = vec![leakage_of(&psi, &edge_sets)];
    let mut max_drift: f64 = 0.0;

    for step in 0..n_steps {
        u.matvec_into(&psi, &mut psi_next);
        std::mem::swap(&mut psi, &mut psi_next);
        let norm = l2_norm(&psi);
        let drift = (norm - 1.0).abs();
        max_drift = max_drift.max(drift);
        if drift > EFFECTIVE_NORM_TOLERANCE {
            return Err(Error::NormDrift { drift });
        }
        let inv = 1.0 / norm;
        for amp in &mut psi {
            *amp *= inv;
        }
        if (step + 1) % stride == 0 || step + 1 == n_steps {
            times.push((step + 1) as f64 * dt);
            states.push(StateVector {
                space: Arc::clone(h_op.space()),
                amplitudes: psi.clone(),
            });
            leakage.push(leakage_of(&psi, &edge_sets));
        }
    }
    Ok(Trajectory {
        times,
        states,
        leakage,
        max_norm_drift: max_drift,
    })
}

/// Per-observable comparison of a full and an effective trajectory.
#[derive(Clone, Debug)]
pub struct ObservableComparison {
    pub label: String,
    pub max_population_deviation: f64,
    /// FFT-peak angular frequency estimates (needs ≥ 3 cycles in window).
    pub frequency_full: Option<f64>,
    pub frequency_effective: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct ComparisonReport {
    pub observables: Vec<ObservableComparison>,
    /// |⟨ψ_full(t)|ψ_eff(t)⟩|² on the shared grid.
    pub fidelity: Vec<f64>,
    pub fidelity_min: f64,
    pub fidelity_final: f64,
}

impl ComparisonReport {
    pub fn to_json(&self) -> serde_json::Value {
        let observables: Vec<serde_json::Value> = self
            .observables
            .iter()
            .map(|o| {
                serde_json::json!({
                    "label": o.label,
                    "max_population_deviation": o.max_population_deviation,
                    "frequency_full": o.frequency_full,
                    "frequency_effective": o.frequency_effective,
                })
            })
            .collect();
        serde_json::json!({
            "observables": observables,
            "fidelity": self.fidelity,
            "fidelity_min": self.fidelity_min,
            "fidelity_final": self.fidelity_final,
        })
    }
}

/// Compare two trajectories on the same grid.
pub fn compare(
    full: &Trajectory,
    effective: &Trajectory,
    observables: &[String],
) -> Result<ComparisonReport> {
    let fidelity = full.fidelity_series(effective)?;
    let space = full.space();
    let mut reports = Vec::new();
    for label in observables {
        let index = space.label_to_index(label)?;
        let pf = full.population_series(index);
        let pe = effective.population_series(index);
        let max_dev = pf
            .iter()
            .zip(&pe)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        reports.push(ObservableComparison {
            label: label.clone(),
            max_population_deviation: max_dev,
            frequency_full: estimate_frequency_fft(&full.times, &pf),
            frequency_effective: estimate_frequency_fft(&effective.times, &pe),
        });
    }
    let fidelity_min = fidelity.iter().copied().fold(f64::INFINITY, f64::min);
    let fidelity_final = *fidelity.last().unwrap();
    Ok(ComparisonReport {
        observables: reports,
        fidelity,
        fidelity_min,
        fidelity_final,
    })
}

// ---------------------------------------------------------------------------
// Frequency estimation
// ---------------------------------------------------------------------------

fn fft_radix2(buf: &mut [Complex64]) {
    let n = buf.len();
    debug_assert!(n.is_power_of_two());
    // bit reversal
    let mut j = 0usize;
    for i in 1..n {
        let mut bit = n >> 1;
        while j & bit != 0 {
            j ^= bit;
            bit >>= 1;
        }
        j |= bit;
        if i < j {
            buf.swap(i, j);
        }
    }
    let mut len = 2;
    while len <= n {
        let ang = -std::f64::consts::TAU / len as f64;
        let wlen = Complex64::new(ang.cos(), ang.sin());
        let mut i = 0;
        while i < n {
            let mut w = Complex64::new(1.0, 0.0);
            for k in 0..len / 2 {
                let u = buf[i + k];
                let v = buf[i + k + len / 2] * w;
                buf[i + k] = u + v;
                buf[i + k + len / 2] = u - v;
                w *= wlen;
            }
            i += len;
        }
        len <<= 1;
    }
}

/// Angular frequency of the dominant oscillation of a real series on a
/// uniform grid: FFT peak with quadratic interpolation on the magnitude.
/// Returns None when fewer than ~3 cycles fit in the window or the series
/// is flat.
pub fn estimate_frequency_fft(times: &[f64], values: &[f64]) -> Option<f64> {
    let n = values.len();
    if n < 8 {
        return None;
    }
    let dt = times[1] - times[0];
    let mean = values.iter().sum::<f64>() / n as f64;
    let padded = (4 * n).next_power_of_two();
    let mut buf = vec![ZERO; padded];
    for (i, &v) in values.iter().enumerate() {
        // Hann window
        let w = 0.5 - 0.5 * (std::f64::consts::TAU * i as f64 / (n - 1) as f64).cos();
        buf[i] = Complex64::new((v - mean) * w, 0.0);
    }
    fft_radix2(&mut buf);
    let half = padded / 2;
    let mags: Vec<f64> = buf[..half].iter().map(|c| c.norm()).collect();
    let (peak, &peak_mag) = mags
        .iter()
        .enumerate()
        .skip(1)
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())?;
    if peak_mag <= 1e-12 || peak + 1 >= half {
        return None;
    }
    // quadratic interpolation around the peak bin
    let (ym, y0, yp) = (mags[peak - 1], mags[peak], mags[peak + 1]);
    let denom = ym - 2.0 * y0 + yp;
    let delta = if denom.abs() > 1e-300 {
        0.5 * (ym - yp) / denom
    } else {
        0.0
    };
    let bin = peak as f64 + delta.clamp(-0.5, 0.5);
    let omega = std::f64::consts::TAU * bin / (padded as f64 * dt);
    // require about 3 cycles inside the window for a trustworthy peak
    let cycles = omega * (times[n - 1] - times[0]) / std::f64::consts::TAU;
    if cycles < 2.5 {
        return None;
    }
    Some(omega)
}

/// Least-squares fit of `P(t) ≈ A (1 − cos ωt)/2` over ω in [lo, hi] by
/// golden-section search (the amplitude is profiled out analytically).
/// Returns (ω, A).
pub fn fit_cosine_frequency(times: &[f64], values: &[f64], lo: f64, hi: f64) -> (f64, f64) {
    let sse = |omega: f64| -> (f64, f64) {
        let mut bb = 0.0;
        let mut pb = 0.0;
        for (&t, &p) in times.iter().zip(values) {
            let b = 0.5 * (1.0 - (omega * t).cos());
            bb += b * b;
            pb += p * b;
        }
        let a = if bb > 0.0 { pb / bb } else { 0.0 };
        let mut err = 0.0;
        for (&t, &p) in times.iter().zip(values) {
            let b = 0.5 * (1.0 - (omega * t).cos());
            let r = p - a * b;
            err += r * r;
        }
        (err, a)
    };
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    let (mut fc, _) = sse(c);
    let (mut fd, _) = sse(d);
    for _ in 0..200 {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - phi * (b - a);
            fc = sse(c).0;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + phi * (b - a);
            fd = sse(d).0;
        }
        if (b - a).abs() < 1e-12 * hi.abs() {
            break;
        }
    }
    let omega = 0.5 * (a + b);
    let (_, amp) = sse(omega);
    (omega, amp)
}

// ---------------------------------------------------------------------------
// Export
// ---------------------------------------------------------------------------

/// CSV export: header `t, re(amp_0), im(amp_0), …`, rows in fixed `%.12e`
/// float formatting for byte-stable goldens.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, mut w: W) -> Result<()> {
    let dim = traj.space().dim();
    let mut header = String::from("t");
    for i in 0..dim {
        header.push_str(&format!(", re(amp_{i}), im(amp_{i})"));
    }
    writeln!(w, "{header}")?;
    for (t, state) in traj.times.iter().zip(&traj.states) {
        let mut line = format_float(*t);
        for amp in state.amplitudes() {
            line.push(',');
            line.push_str(&format_float(amp.re));
            line.push(',');
            line.push_str(&format_float(amp.im));
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}
