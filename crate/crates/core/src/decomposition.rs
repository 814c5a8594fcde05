//! The frequency-decomposed Hamiltonian model
//! `H(t) = Σ_m (h_m e^{iω_m t} + h_m† e^{−iω_m t})` with exact rational
//! frequencies, its signed-component expansion, time-domain evaluation, and
//! the scenario-file JSON format.

use std::collections::BTreeMap;
use std::str::FromStr;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::parse_operator_expr;
use crate::hilbert::{Factor, Operator, SpaceSpec};
use crate::rational::Rational;

/// One harmonic of the drive: amplitude operator and positive frequency in
/// units of the declared base frequency.
#[derive(Clone, Debug)]
pub struct FrequencyTerm {
    pub h: Operator,
    pub omega: Rational,
}

/// A validated frequency decomposition.
///
/// Invariants enforced at construction: at least one term, every frequency
/// strictly positive, all frequencies pairwise distinct, every amplitude
/// nonzero, and all amplitudes on the same space. The near-degenerate regime
/// (retaining slowly oscillating cross terms between close frequencies) is
/// out of scope; distinctness violations are hard errors.
#[derive(Clone, Debug)]
pub struct FrequencyDecomposition {
    space: Arc<SpaceSpec>,
    base_frequency_label: String,
    terms: Vec<FrequencyTerm>,
}

/// One exponential of the expanded drive: (+ω_m, h_m) or (−ω_m, h_m†).
#[derive(Clone, Debug)]
pub struct SignedComponent {
    pub term_index: usize,
    pub sign: i8,
    pub nu: Rational,
    pub amp: Operator,
}

impl FrequencyDecomposition {
    pub fn new(
        space: Arc<SpaceSpec>,
        base_frequency_label: impl Into<String>,
        terms: Vec<FrequencyTerm>,
    ) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidDecomposition("no terms".into()));
        }
        for (i, term) in terms.iter().enumerate() {
            if !term.omega.is_positive() {
                return Err(Error::InvalidFrequency(format!(
                    "term {i}: omega = {} must be > 0",
                    term.omega
                )));
            }
            // keeps exact tail-sum arithmetic far from i128 overflow
            if term.omega.numerator().abs() > 1_000_000 || term.omega.denominator() > 1_000_000 {
                return Err(Error::InvalidFrequency(format!(
                    "term {i}: omega = {} outside supported range (|p|, q <= 10^6)",
                    term.omega
                )));
            }
            if term.h.is_zero() {
                return Err(Error::InvalidDecomposition(format!(
                    "term {i}: amplitude operator is zero"
                )));
            }
            if term.h.space() != &space {
                return Err(Error::SpaceMismatch);
            }
            for other in &terms[..i] {
                if other.omega == term.omega {
                    return Err(Error::InvalidFrequency(format!(
                        "duplicate frequency {}",
                        term.omega
                    )));
                }
            }
        }
        Ok(FrequencyDecomposition {
            space,
            base_frequency_label: base_frequency_label.into(),
            terms,
        })
    }

    pub fn space(&self) -> &Arc<SpaceSpec> {
        &self.space
    }

    pub fn base_frequency_label(&self) -> &str {
        &self.base_frequency_label
    }

    pub fn terms(&self) -> &[FrequencyTerm] {
        &self.terms
    }

    /// Largest |ν| over the signed expansion, as f64 (for step guards).
    pub fn max_frequency(&self) -> f64 {
        self.terms
            .iter()
            .map(|t| t.omega.to_f64())
            .fold(0.0, f64::max)
    }

    /// Signed-component expansion: exactly 2·|terms| components, ordered
    /// (term 0 +, term 0 −, term 1 +, …).
    pub fn expand_signed(&self) -> Vec<SignedComponent> {
        let mut out = Vec::with_capacity(2 * self.terms.len());
        for (i, term) in self.terms.iter().enumerate() {
            out.push(SignedComponent {
                term_index: i,
                sign: 1,
                nu: term.omega,
                amp: term.h.clone(),
            });
            out.push(SignedComponent {
                term_index: i,
                sign: -1,
                nu: -term.omega,
                amp: term.h.dagger(),
            });
        }
        out
    }

    /// Direct evaluation of H(t) = Σ_m (h_m e^{iω_m t·base} + h.c.).
    ///
    /// `t` is in units of 1/base_freq when base_freq = 1.
    pub fn evaluate_at(&self, t: f64, base_freq: f64) -> Operator {
        let mut total = Operator::zero(&self.space);
        for term in &self.terms {
            let phase = term.omega.to_f64() * base_freq * t;
            let factor = Complex64::new(phase.cos(), phase.sin());
            let plus = term.h.scale(factor);
            let minus = term.h.dagger().scale(factor.conj());
            total = total.add(&plus).expect("same space").add(&minus).expect("same space");
        }
        total
    }

    /// Uniform rescaling of every amplitude (h_m ↦ c·h_m).
    pub fn scale_amplitudes(&self, c: Complex64) -> Self {
        FrequencyDecomposition {
            space: Arc::clone(&self.space),
            base_frequency_label: self.base_frequency_label.clone(),
            terms: self
                .terms
                .iter()
                .map(|t| FrequencyTerm {
                    h: t.h.scale(c),
                    omega: t.omega,
                })
                .collect(),
        }
    }

    /// Uniform exact rescaling of every frequency (ω_m ↦ r·ω_m, r > 0).
    pub fn scale_frequencies(&self, r: Rational) -> Result<Self> {
        if !r.is_positive() {
            return Err(Error::InvalidFrequency(format!("scale {r} must be > 0")));
        }
        FrequencyDecomposition::new(
            Arc::clone(&self.space),
            self.base_frequency_label.clone(),
            self.terms
                .iter()
                .map(|t| FrequencyTerm {
                    h: t.h.clone(),
                    omega: t.omega * r,
                })
                .collect(),
        )
    }
}

/// Dense per-component cache for fast repeated evaluation of H(t) during
/// propagation. Amplitude matrices are expanded once; each evaluation is an
/// O(dim²) accumulation.
pub struct DenseDrive {
    dim: usize,
    components: Vec<(f64, Vec<Complex64>)>,
}

impl DenseDrive {
    pub fn new(d: &FrequencyDecomposition, base_freq: f64) -> Self {
        let dim = d.space().dim();
        let components = d
            .expand_signed()
            .into_iter()
            .map(|sc| (sc.nu.to_f64() * base_freq, sc.amp.to_dense()))
            .collect();
        DenseDrive { dim, components }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Writes H(t) into `out` (row-major, dim×dim).
    pub fn eval_into(&self, t: f64, out: &mut [Complex64]) {
        out.fill(Complex64::new(0.0, 0.0));
        for (nu, amp) in &self.components {
            let phase = nu * t;
            let factor = Complex64::new(phase.cos(), phase.sin());
            for (o, a) in out.iter_mut().zip(amp) {
                *o += factor * a;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Scenario file format
// ---------------------------------------------------------------------------

/// Tensor factor as written in scenario JSON.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FactorSpec {
    Qubit,
    Boson { cutoff: usize },
}

/// One drive term as written in scenario JSON. Frequencies are strings,
/// either `"p/q"` rationals or decimal strings exactly representable with
/// denominator ≤ 10^6; bare JSON integers are also accepted.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct TermSpec {
    pub omega: serde_json::Value,
    pub h: String,
}

/// The on-disk scenario format (JSON, UTF-8).
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ScenarioFile {
    pub space: Vec<FactorSpec>,
    pub base_frequency: String,
    #[serde(default)]
    pub params: BTreeMap<String, f64>,
    pub terms: Vec<TermSpec>,
}

fn omega_from_value(v: &serde_json::Value) -> Result<Rational> {
    match v {
        serde_json::Value::String(s) => Rational::from_str(s),
        serde_json::Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                Ok(Rational::from_integer(i as i128))
            } else {
                Err(Error::InvalidFrequency(format!(
                    "{n}: non-integer frequencies must be given as strings"
                )))
            }
        }
        other => Err(Error::InvalidFrequency(format!("{other}"))),
    }
}

impl ScenarioFile {
    pub fn from_json(src: &str) -> Result<Self> {
        Ok(serde_json::from_str(src)?)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn space_spec(&self) -> Result<Arc<SpaceSpec>> {
        let factors = self
            .space
            .iter()
            .map(|f| match f {
                FactorSpec::Qubit => Factor::Qubit,
                FactorSpec::Boson { cutoff } => Factor::Boson { cutoff: *cutoff },
            })
            .collect();
        SpaceSpec::new(factors)
    }

    /// Parse, evaluate, and validate into a decomposition.
    pub fn to_decomposition(&self) -> Result<FrequencyDecomposition> {
        let space = self.space_spec()?;
        let params: BTreeMap<String, Complex64> = self
            .params
            .iter()
            .map(|(k, v)| (k.clone(), Complex64::new(*v, 0.0)))
            .collect();
        let mut terms = Vec::with_capacity(self.terms.len());
        for spec in &self.terms {
            let omega = omega_from_value(&spec.omega)?;
            let h = parse_operator_expr(&spec.h, &space, &params)?;
            terms.push(FrequencyTerm { h, omega });
        }
        FrequencyDecomposition::new(space, self.base_frequency.clone(), terms)
    }
}
