//! Turnkey builders for the two built-in scenarios:
//!
//! * `two_atom_one_photon` — two identical qubits coupled to one cavity mode
//!   with a symmetry-broken potential, drive frequencies {1, 2, 3}·ω_q:
//!   a single photon can excite both atoms via a third-order resonance.
//! * `rabi_three_photon` — a two-level atom in a cavity at one third of the
//!   atomic transition frequency, drive frequencies {2, 4}·ω_c: the atom
//!   absorbs three photons via counter-rotating processes.
//!
//! Base frequencies are chosen (ω_q and ω_c respectively) so the drive
//! frequencies are small integers and every derived coefficient is a clean
//! power of the coupling. The second-order generator Stark-shifts the
//! dressed levels; [`stark_compensation`] computes the per-photon frequency
//! adjustment that re-aligns the three-photon resonance, applied by
//! rebuilding the decomposition with shifted rational frequencies (the
//! rotating-wave selection is re-run on the shifted values).

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::decomposition::{
    FactorSpec, FrequencyDecomposition, FrequencyTerm, ScenarioFile, TermSpec,
};
use crate::effective::{eff2, eff3_explicit};
use crate::error::{Error, Result};
use crate::hilbert::{boson_op, qubit_op, BosonOp, Factor, Operator, QubitOp, SpaceSpec};
use crate::rational::Rational;

/// Couplings above this violate the perturbative validity guard.
pub const LAMBDA_MAX: f64 = 0.2;
/// Couplings above this are accepted with a warning.
pub const LAMBDA_WARN: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ScenarioKind {
    TwoAtomOnePhoton,
    RabiThreePhoton,
}

impl ScenarioKind {
    pub fn name(&self) -> &'static str {
        match self {
            ScenarioKind::TwoAtomOnePhoton => "two_atom_one_photon",
            ScenarioKind::RabiThreePhoton => "rabi_three_photon",
        }
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ScenarioParams {
    pub kind: ScenarioKind,
    /// Coupling strength in units of the base frequency.
    pub lambda: f64,
    /// Mixing angle (two-atom scenario only; ignored for the Rabi scenario).
    pub theta: f64,
    /// Bosonic cutoff dimension.
    pub cutoff: usize,
    /// Initial Fock occupancy used by simulations and compensation.
    pub n_initial: usize,
}

impl ScenarioParams {
    pub fn two_atom(lambda: f64, theta: f64, cutoff: usize, n_initial: usize) -> Result<Self> {
        let p = ScenarioParams {
            kind: ScenarioKind::TwoAtomOnePhoton,
            lambda,
            theta,
            cutoff,
            n_initial,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn rabi(lambda: f64, cutoff: usize, n_initial: usize) -> Result<Self> {
        let p = ScenarioParams {
            kind: ScenarioKind::RabiThreePhoton,
            lambda,
            theta: 0.0,
            cutoff,
            n_initial,
        };
        p.validate()?;
        Ok(p)
    }

    /// Photons consumed by the scenario's resonant transition.
    fn photon_margin(&self) -> usize {
        match self.kind {
            ScenarioKind::TwoAtomOnePhoton => 1,
            ScenarioKind::RabiThreePhoton => 3,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0 && self.lambda <= LAMBDA_MAX) {
            return Err(Error::InvalidScenario(format!(
                "lambda = {} outside (0, {LAMBDA_MAX}]",
                self.lambda
            )));
        }
        if self.cutoff <= self.n_initial + self.photon_margin() {
            return Err(Error::InvalidScenario(format!(
                "cutoff {} must exceed n_initial {} + {}",
                self.cutoff,
                self.n_initial,
                self.photon_margin()
            )));
        }
        Ok(())
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.lambda > LAMBDA_WARN {
            out.push(format!(
                "lambda = {} above {LAMBDA_WARN}: perturbative orders converge slowly",
                self.lambda
            ));
        }
        out
    }

    pub fn build(&self) -> Result<FrequencyDecomposition> {
        match self.kind {
            ScenarioKind::TwoAtomOnePhoton => build_two_atom(self),
            ScenarioKind::RabiThreePhoton => build_rabi(self),
        }
    }

    /// Canonical initial state label, e.g. `gg,1` or `g,3`.
    pub fn initial_label(&self) -> String {
        match self.kind {
            ScenarioKind::TwoAtomOnePhoton => format!("gg,{}", self.n_initial),
            ScenarioKind::RabiThreePhoton => format!("g,{}", self.n_initial),
        }
    }

    /// The resonantly coupled partner of the initial state.
    pub fn target_label(&self) -> Result<String> {
        match self.kind {
            ScenarioKind::TwoAtomOnePhoton => {
                if self.n_initial < 1 {
                    return Err(Error::InvalidScenario(
                        "two-atom target needs n_initial >= 1".into(),
                    ));
                }
                Ok(format!("ee,{}", self.n_initial - 1))
            }
            ScenarioKind::RabiThreePhoton => {
                if self.n_initial < 3 {
                    return Err(Error::InvalidScenario(
                        "three-photon target needs n_initial >= 3".into(),
                    ));
                }
                Ok(format!("e,{}", self.n_initial - 3))
            }
        }
    }

    /// The scenario in the JSON file format (parsing it back reproduces the
    /// built decomposition). Terms whose prefactor vanishes at the given
    /// angle are omitted, matching the builder.
    pub fn scenario_file(&self) -> ScenarioFile {
        match self.kind {
            ScenarioKind::TwoAtomOnePhoton => {
                let mut terms = Vec::new();
                if self.theta.cos().abs() > 1e-15 {
                    terms.push(TermSpec {
                        omega: "1".into(),
                        h: "lambda*cos(theta)*adag(2)*(sm(0)+sm(1))".into(),
                    });
                }
                if self.theta.sin().abs() > 1e-15 {
                    terms.push(TermSpec {
                        omega: "2".into(),
                        h: "lambda*sin(theta)*adag(2)*(sz(0)+sz(1))".into(),
                    });
                }
                if self.theta.cos().abs() > 1e-15 {
                    terms.push(TermSpec {
                        omega: "3".into(),
                        h: "lambda*cos(theta)*adag(2)*(sp(0)+sp(1))".into(),
                    });
                }
                ScenarioFile {
                    space: vec![
                        FactorSpec::Qubit,
                        FactorSpec::Qubit,
                        FactorSpec::Boson {
                            cutoff: self.cutoff,
                        },
                    ],
                    base_frequency: "omega_q".into(),
                    params: BTreeMap::from([
                        ("lambda".to_string(), self.lambda),
                        ("theta".to_string(), self.theta),
                    ]),
                    terms,
                }
            }
            ScenarioKind::RabiThreePhoton => ScenarioFile {
                space: vec![
                    FactorSpec::Qubit,
                    FactorSpec::Boson {
                        cutoff: self.cutoff,
                    },
                ],
                base_frequency: "omega_c".into(),
                params: BTreeMap::from([("lambda".to_string(), self.lambda)]),
                terms: vec![
                    TermSpec {
                        omega: "2".into(),
                        h: "lambda*a(1)*sp(0)".into(),
                    },
                    TermSpec {
                        omega: "4".into(),
                        h: "lambda*adag(1)*sp(0)".into(),
                    },
                ],
            },
        }
    }
}

/// Two qubits and one cavity at ω_c = 2ω_q with a symmetry-broken coupling:
/// h₁ = λcosθ a†(σ₋¹+σ₋²) at ω = 1, h₂ = λsinθ a†(σz¹+σz²) at ω = 2,
/// h₃ = λcosθ a†(σ₊¹+σ₊²) at ω = 3 (units of ω_q). Terms with vanishing
/// prefactor are omitted.
pub fn build_two_atom(p: &ScenarioParams) -> Result<FrequencyDecomposition> {
    p.validate()?;
    let space = SpaceSpec::new(vec![
        Factor::Qubit,
        Factor::Qubit,
        Factor::Boson { cutoff: p.cutoff },
    ])?;
    let adag = boson_op(&space, 2, BosonOp::Adag)?;
    let pair = |which: QubitOp| -> Result<Operator> {
        qubit_op(&space, 0, which)?.add(&qubit_op(&space, 1, which)?)
    };
    let cos_amp = p.lambda * p.theta.cos();
    let sin_amp = p.lambda * p.theta.sin();
    let mut terms = Vec::new();
    if cos_amp.abs() > 1e-15 {
        terms.push(FrequencyTerm {
            h: adag
                .mul(&pair(QubitOp::Sm)?)?
                .scale(Complex64::new(cos_amp, 0.0)),
            omega: Rational::from_integer(1),
        });
    }
    if sin_amp.abs() > 1e-15 {
        terms.push(FrequencyTerm {
            h: adag
                .mul(&pair(QubitOp::Sz)?)?
                .scale(Complex64::new(sin_amp, 0.0)),
            omega: Rational::from_integer(2),
        });
    }
    if cos_amp.abs() > 1e-15 {
        terms.push(FrequencyTerm {
            h: adag
                .mul(&pair(QubitOp::Sp)?)?
                .scale(Complex64::new(cos_amp, 0.0)),
            omega: Rational::from_integer(3),
        });
    }
    FrequencyDecomposition::new(space, "omega_q", terms)
}

/// Rabi model at three-photon resonance (ω_c = ω_a/3):
/// h₁ = λâσ̂₊ at ω = 2, h₂ = λâ†σ̂₊ at ω = 4 (units of ω_c).
pub fn build_rabi(p: &ScenarioParams) -> Result<FrequencyDecomposition> {
    p.validate()?;
    build_rabi_at(p, Rational::zero())
}

// The dressed |e,n−3⟩ level sits above |g,n⟩ by the Stark splitting Δ₂, so
// resonance needs each photon to carry δ = Δ₂/3 more energy: ω_c ↦ ω_c + δ,
// i.e. drive frequencies (ω_a−ω_c, ω_a+ω_c) = (2−δ, 4+δ). The two-state
// reduction of the shifted drive has block detuning (E_e − E_g) + (2ν₁−ν₂)
// = Δ₂ − 3δ = 0.
fn build_rabi_at(p: &ScenarioParams, delta: Rational) -> Result<FrequencyDecomposition> {
    let space = SpaceSpec::new(vec![Factor::Qubit, Factor::Boson { cutoff: p.cutoff }])?;
    let sp = qubit_op(&space, 0, QubitOp::Sp)?;
    let a = boson_op(&space, 1, BosonOp::A)?;
    let adag = boson_op(&space, 1, BosonOp::Adag)?;
    let l = Complex64::new(p.lambda, 0.0);
    FrequencyDecomposition::new(
        space,
        "omega_c",
        vec![
            FrequencyTerm {
                h: a.mul(&sp)?.scale(l),
                omega: Rational::from_integer(2) - delta,
            },
            FrequencyTerm {
                h: adag.mul(&sp)?.scale(l),
                omega: Rational::from_integer(4) + delta,
            },
        ],
    )
}

/// Per-photon cavity-frequency adjustment that re-aligns the dressed
/// three-photon resonance:
/// δ = [⟨e,n−3|H⁽²⁾|e,n−3⟩ − ⟨g,n|H⁽²⁾|g,n⟩]/3,
/// quantized to denominator 10^6 so the rebuilt frequencies stay rational.
pub fn stark_compensation(p: &ScenarioParams) -> Result<Rational> {
    if p.kind != ScenarioKind::RabiThreePhoton {
        return Err(Error::InvalidScenario(
            "stark compensation applies to the rabi_three_photon scenario".into(),
        ));
    }
    if p.n_initial < 3 {
        return Err(Error::InvalidScenario(
            "stark compensation needs n_initial >= 3".into(),
        ));
    }
    let d0 = build_rabi(p)?;
    let h2 = eff2(&d0)?;
    let upper = h2.matrix_element(&p.target_label()?, &p.target_label()?)?;
    let lower = h2.matrix_element(&p.initial_label(), &p.initial_label())?;
    let delta = (upper.re - lower.re) / 3.0;
    Rational::quantize(delta, 1_000_000)
}

/// Rebuild the Rabi decomposition with the compensating frequency shift
/// ω_c ↦ ω_c − δ, i.e. drive frequencies (2+δ, 4−δ). Returns the shifted
/// decomposition and δ.
pub fn build_rabi_compensated(
    p: &ScenarioParams,
) -> Result<(FrequencyDecomposition, Rational)> {
    let delta = stark_compensation(p)?;
    Ok((build_rabi_at(p, delta)?, delta))
}

/// The scenario file for the compensated drive (frequencies as `p/q`).
pub fn compensated_scenario_file(p: &ScenarioParams) -> Result<ScenarioFile> {
    let delta = stark_compensation(p)?;
    let mut file = p.scenario_file();
    file.terms[0].omega = (Rational::from_integer(2) - delta).to_string().into();
    file.terms[1].omega = (Rational::from_integer(4) + delta).to_string().into();
    Ok(file)
}

/// Static effective model pieces for a scenario.
///
/// For the compensated Rabi drive the frame shift ω_c ↦ ω_c − δ adds the
/// static term δ·n̂ to the interaction-picture Hamiltonian; combined with
/// the second-order Stark shifts it re-aligns the resonant block exactly,
/// while the third-order coupling is taken from the uncompensated build
/// (where its frequency sum is exactly zero).
pub struct EffectiveModel {
    /// Order-2 generator of the drive actually simulated.
    pub second: Operator,
    /// Order-3 generator of the ideal (uncompensated) drive.
    pub third: Operator,
    /// Frame term δ·n̂ (zero when no compensation is applied).
    pub compensation: Operator,
}

impl EffectiveModel {
    pub fn total(&self) -> Result<Operator> {
        self.second.add(&self.third)?.add(&self.compensation)
    }

    /// Total with the order-3 part sign-flipped (negative control).
    pub fn total_third_flipped(&self) -> Result<Operator> {
        self.second
            .add(&self.third.scale(Complex64::new(-1.0, 0.0)))?
            .add(&self.compensation)
    }
}

pub fn effective_model(p: &ScenarioParams, compensate: bool) -> Result<EffectiveModel> {
    let d0 = p.build()?;
    let third = eff3_explicit(&d0)?.total;
    if compensate {
        let (d_comp, delta) = build_rabi_compensated(p)?;
        let second = eff2(&d_comp)?.total;
        let boson_leg = match p.kind {
            ScenarioKind::RabiThreePhoton => 1,
            ScenarioKind::TwoAtomOnePhoton => 2,
        };
        let compensation = boson_op(d0.space(), boson_leg, BosonOp::N)?
            .scale(Complex64::new(delta.to_f64(), 0.0));
        Ok(EffectiveModel {
            second,
            third,
            compensation,
        })
    } else {
        Ok(EffectiveModel {
            second: eff2(&d0)?.total,
            third,
            compensation: Operator::zero(d0.space()),
        })
    }
}

/// Two-state transfer prediction for the Rabi scenario's
/// |g,n⟩ ↔ |e,n−3⟩ block under the effective model.
#[derive(Clone, Copy, Debug)]
pub struct TransferPrediction {
    /// |⟨e,n−3|H⁽³⁾|g,n⟩|
    pub coupling: f64,
    /// Dressed detuning of the block after any compensation.
    pub residual_detuning: f64,
    /// Angular frequency of the population oscillation:
    /// √((2g)² + Δ²) (generalized two-state formula).
    pub population_frequency: f64,
    /// Peak transfer (2g)²/((2g)² + Δ²).
    pub max_transfer: f64,
}

pub fn rabi_transfer_prediction(
    p: &ScenarioParams,
    compensate: bool,
) -> Result<TransferPrediction> {
    let model = effective_model(p, compensate)?;
    let initial = p.initial_label();
    let target = p.target_label()?;
    let d0 = p.build()?;
    let space = d0.space();
    let i = space.label_to_index(&initial)?;
    let f = space.label_to_index(&target)?;
    let coupling = model.third.entry(f, i).norm();
    let diag = model.second.add(&model.compensation)?;
    let detuning = (diag.entry(f, f) - diag.entry(i, i)).re;
    let two_g = 2.0 * coupling;
    let omega = (two_g * two_g + detuning * detuning).sqrt();
    Ok(TransferPrediction {
        coupling,
        residual_detuning: detuning,
        population_frequency: omega,
        max_transfer: if omega > 0.0 {
            (two_g / omega).powi(2)
        } else {
            0.0
        },
    })
}
