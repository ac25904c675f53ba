//! Hamiltonians and collapse channels for a cavity coupled to N emitters.
//!
//! All rates are angular (rad/µs). Dissipators use the convention
//! `D[A]ρ = 2AρA† - A†Aρ - ρA†A`, so a channel `(r, A)` contributes `r·D[A]ρ`
//! and `(κ/2, a)` damps `⟨a†a⟩` at rate `κ`.

use std::f64::consts::{SQRT_2, TAU};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::operator::{
    annihilation, diagonal, embed, sigma_minus, sigma_z, transition, ComplexOperator,
    StateVector, C64, DEFAULT_SPARSE_THRESHOLD,
};

/// Third transmon level parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThreeLevel {
    /// Anharmonicity `α_r`; the e→f transition sits `α_r` below e→g.
    pub anharmonicity: f64,
    /// e↔f couplings `G_j`; `√2·g_j` when absent.
    #[serde(default)]
    pub upper_couplings: Option<Vec<f64>>,
    /// f→e relaxation rate as a multiple of `γ^s_j`.
    #[serde(default = "default_upper_relaxation_factor")]
    pub upper_relaxation_factor: f64,
}

fn default_upper_relaxation_factor() -> f64 {
    2.0
}

impl ThreeLevel {
    pub fn new(anharmonicity: f64) -> Self {
        Self { anharmonicity, upper_couplings: None, upper_relaxation_factor: 2.0 }
    }
}

/// Physical parameters of one cavity + emitters configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub n_qubits: usize,
    /// Per-emitter coupling `g_{N,j}`.
    pub couplings: Vec<f64>,
    #[serde(default)]
    pub cavity_detuning: f64,
    pub qubit_detunings: Vec<f64>,
    pub kappa: f64,
    /// Energy relaxation `γ^s_j`.
    pub relaxation: Vec<f64>,
    /// Dephasing `γ^p_j`.
    pub dephasing: Vec<f64>,
    /// Coherent drive amplitude `E`; zero when undriven.
    #[serde(default)]
    pub drive: f64,
    /// Fock-space cutoff of the cavity.
    pub fock_dim: usize,
    #[serde(default)]
    pub three_level: Option<ThreeLevel>,
}

impl SystemSpec {
    /// Resonant, undriven, dephasing-free system with uniform relaxation.
    pub fn resonant(couplings: Vec<f64>, kappa: f64, relaxation: f64, fock_dim: usize) -> Self {
        let n = couplings.len();
        Self {
            n_qubits: n,
            couplings,
            cavity_detuning: 0.0,
            qubit_detunings: vec![0.0; n],
            kappa,
            relaxation: vec![relaxation; n],
            dephasing: vec![0.0; n],
            drive: 0.0,
            fock_dim,
            three_level: None,
        }
    }

    pub fn with_drive(mut self, drive: f64) -> Self {
        self.drive = drive;
        self
    }

    pub fn with_three_level(mut self, three_level: ThreeLevel) -> Self {
        self.three_level = Some(three_level);
        self
    }

    /// Multiplies every rate, detuning and amplitude by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        let s = |v: &[f64]| v.iter().map(|x| x * factor).collect::<Vec<_>>();
        Self {
            n_qubits: self.n_qubits,
            couplings: s(&self.couplings),
            cavity_detuning: self.cavity_detuning * factor,
            qubit_detunings: s(&self.qubit_detunings),
            kappa: self.kappa * factor,
            relaxation: s(&self.relaxation),
            dephasing: s(&self.dephasing),
            drive: self.drive * factor,
            fock_dim: self.fock_dim,
            three_level: self.three_level.as_ref().map(|t| ThreeLevel {
                anharmonicity: t.anharmonicity * factor,
                upper_couplings: t.upper_couplings.as_deref().map(s),
                upper_relaxation_factor: t.upper_relaxation_factor,
            }),
        }
    }

    /// Converts a spec written in `f/2π` MHz into angular rates.
    pub fn from_mhz(spec_mhz: &SystemSpec) -> Self {
        spec_mhz.scaled(TAU)
    }

    pub fn mean_coupling(&self) -> f64 {
        self.couplings.iter().sum::<f64>() / self.couplings.len().max(1) as f64
    }

    /// True when every emitter has the same coupling, detuning and decay
    /// rates, so the model is symmetric under emitter permutations.
    pub fn emitters_interchangeable(&self) -> bool {
        let same = |v: &[f64]| v.windows(2).all(|w| w[0] == w[1]);
        same(&self.couplings)
            && same(&self.qubit_detunings)
            && same(&self.relaxation)
            && same(&self.dephasing)
            && self.upper_couplings().is_none_or(|u| same(&u))
    }

    /// e↔f couplings, defaulting to `√2·g_j`.
    pub fn upper_couplings(&self) -> Option<Vec<f64>> {
        let t = self.three_level.as_ref()?;
        Some(
            t.upper_couplings
                .clone()
                .unwrap_or_else(|| self.couplings.iter().map(|g| SQRT_2 * g).collect()),
        )
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_qubits;
        if n == 0 {
            return Err(Error::InvalidParameter("at least one qubit is required".into()));
        }
        for (name, v) in [
            ("couplings", &self.couplings),
            ("qubit_detunings", &self.qubit_detunings),
            ("relaxation", &self.relaxation),
            ("dephasing", &self.dephasing),
        ] {
            if v.len() != n {
                return Err(Error::InvalidParameter(format!(
                    "{name} has {} entries, expected {n}",
                    v.len()
                )));
            }
        }
        let all_finite = self
            .couplings
            .iter()
            .chain(&self.qubit_detunings)
            .chain(&self.relaxation)
            .chain(&self.dephasing)
            .chain([&self.kappa, &self.cavity_detuning, &self.drive])
            .all(|x| x.is_finite());
        if !all_finite {
            return Err(Error::InvalidParameter("non-finite parameter".into()));
        }
        if self.kappa < 0.0 || self.relaxation.iter().chain(&self.dephasing).any(|r| *r < 0.0) {
            return Err(Error::InvalidParameter("rates must be non-negative".into()));
        }
        if self.fock_dim < 2 {
            return Err(Error::InvalidParameter(format!(
                "Fock truncation must be at least 2, got {}",
                self.fock_dim
            )));
        }
        if let Some(t) = &self.three_level {
            if !t.anharmonicity.is_finite() {
                return Err(Error::InvalidParameter("anharmonicity must be finite".into()));
            }
            if t.upper_relaxation_factor < 0.0 {
                return Err(Error::InvalidParameter("upper relaxation factor must be >= 0".into()));
            }
            if let Some(g) = &t.upper_couplings {
                if g.len() != n {
                    return Err(Error::InvalidParameter(format!(
                        "upper_couplings has {} entries, expected {n}",
                        g.len()
                    )));
                }
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct CollapseChannel {
    pub rate: f64,
    pub operator: ComplexOperator,
    pub label: String,
}

/// Hamiltonian plus weighted collapse operators, `ρ̇ = -i[H,ρ] + Σ r_k D[A_k]ρ`.
#[derive(Clone, Debug)]
pub struct LindbladModel {
    pub hamiltonian: ComplexOperator,
    pub channels: Vec<CollapseChannel>,
    /// Levels per emitter (2 or 3).
    pub emitter_levels: usize,
}

impl LindbladModel {
    pub fn new(hamiltonian: ComplexOperator, channels: Vec<CollapseChannel>, emitter_levels: usize) -> Result<Self> {
        let defect = hamiltonian.hermiticity_defect();
        if defect > 1e-12 {
            return Err(Error::InvalidParameter(format!("Hamiltonian not Hermitian (defect {defect:.2e})")));
        }
        for ch in &channels {
            if !(ch.rate >= 0.0) {
                return Err(Error::InvalidParameter(format!("channel {} has negative rate", ch.label)));
            }
            if ch.operator.dims() != hamiltonian.dims() {
                return Err(Error::Dimension(format!("channel {} dims mismatch", ch.label)));
            }
        }
        Ok(Self { hamiltonian, channels, emitter_levels })
    }

    pub fn dims(&self) -> &[usize] {
        self.hamiltonian.dims()
    }

    pub fn hilbert_dim(&self) -> usize {
        self.hamiltonian.side()
    }

    pub fn n_emitters(&self) -> usize {
        self.dims().len() - 1
    }

    /// Cavity lowering operator on the full space.
    pub fn field(&self) -> Result<ComplexOperator> {
        embed(&annihilation(self.dims()[0])?, 0, self.dims())
    }

    /// `a†a`.
    pub fn photon_number(&self) -> Result<ComplexOperator> {
        let a = self.field()?;
        a.adjoint().matmul(&a)
    }

    /// Projector onto level `level` of emitter `j`.
    pub fn level_population(&self, j: usize, level: usize) -> Result<ComplexOperator> {
        let mut values = vec![0.0; self.emitter_levels];
        values[level] = 1.0;
        embed(&diagonal(&values), j + 1, self.dims())
    }

    /// `a†a + Σ_j n_j` where `n_j` counts excitations of emitter `j`.
    pub fn excitation_number(&self) -> Result<ComplexOperator> {
        let levels: Vec<f64> = (0..self.emitter_levels).map(|k| k as f64).collect();
        let mut total = self.photon_number()?;
        for j in 0..self.n_emitters() {
            total = total.add(&embed(&diagonal(&levels), j + 1, self.dims())?)?;
        }
        Ok(total)
    }

    /// `|0⟩ ⊗ |e, e, …, e⟩`.
    pub fn fully_excited_state(&self) -> Result<StateVector> {
        let mut levels = vec![0usize];
        levels.extend(std::iter::repeat_n(1, self.n_emitters()));
        StateVector::product_basis(self.dims(), &levels)
    }
}

fn c(x: f64) -> C64 {
    C64::new(x, 0.0)
}

/// Exchange coupling `g (L a† + a L†)` for a lowering operator `L`.
fn exchange(g: f64, lowering: &ComplexOperator, a: &ComplexOperator) -> Result<ComplexOperator> {
    let term = lowering.matmul(&a.adjoint())?;
    term.add(&term.adjoint()).map(|t| t.scale(c(g)))
}

fn drive_term(drive: f64, a: &ComplexOperator) -> Result<ComplexOperator> {
    // iE(a† - a)
    a.adjoint().sub(a).map(|t| t.scale(C64::new(0.0, drive)))
}

fn with_threshold(op: ComplexOperator) -> ComplexOperator {
    op.with_threshold(DEFAULT_SPARSE_THRESHOLD)
}

/// Undriven Tavis-Cummings model with relaxation and dephasing channels.
pub fn build_tavis_cummings(spec: &SystemSpec) -> Result<LindbladModel> {
    spec.validate()?;
    if spec.drive != 0.0 {
        return Err(Error::InvalidParameter("use build_driven for a driven system".into()));
    }
    if spec.three_level.is_some() {
        return Err(Error::InvalidParameter("use build_three_level for qutrit emitters".into()));
    }
    let dims: Vec<usize> = std::iter::once(spec.fock_dim).chain(std::iter::repeat_n(2, spec.n_qubits)).collect();
    let a = embed(&annihilation(spec.fock_dim)?, 0, &dims)?;
    let mut h = a.adjoint().matmul(&a)?.scale(c(spec.cavity_detuning));
    let mut channels = Vec::new();
    push_channel(&mut channels, spec.kappa / 2.0, a.clone(), "cavity decay");
    for j in 0..spec.n_qubits {
        let sm = embed(&sigma_minus(), j + 1, &dims)?;
        let sz = embed(&sigma_z(), j + 1, &dims)?;
        h = h.add(&sz.scale(c(spec.qubit_detunings[j] / 2.0)))?;
        h = h.add(&exchange(spec.couplings[j], &sm, &a)?)?;
        push_channel(&mut channels, spec.relaxation[j] / 2.0, sm, &format!("relaxation {j}"));
        push_channel(&mut channels, spec.dephasing[j] / 2.0, sz, &format!("dephasing {j}"));
    }
    LindbladModel::new(with_threshold(h), channels, 2)
}

/// Resonantly driven model, `H = Σ g_j(σ⁻_j a† + a σ⁺_j) + iE(a† - a)`.
pub fn build_driven(spec: &SystemSpec) -> Result<LindbladModel> {
    spec.validate()?;
    if spec.drive <= 0.0 {
        return Err(Error::InvalidParameter("driven model requires E > 0".into()));
    }
    if spec.cavity_detuning != 0.0 || spec.qubit_detunings.iter().any(|d| *d != 0.0) {
        return Err(Error::InvalidParameter("driven model assumes zero detunings".into()));
    }
    if spec.dephasing.iter().any(|d| *d != 0.0) {
        return Err(Error::InvalidParameter("driven model assumes zero dephasing".into()));
    }
    if spec.three_level.is_some() {
        return Err(Error::InvalidParameter("driven model uses two-level emitters".into()));
    }
    let dims: Vec<usize> = std::iter::once(spec.fock_dim).chain(std::iter::repeat_n(2, spec.n_qubits)).collect();
    let a = embed(&annihilation(spec.fock_dim)?, 0, &dims)?;
    let mut h = drive_term(spec.drive, &a)?;
    let mut channels = Vec::new();
    push_channel(&mut channels, spec.kappa / 2.0, a.clone(), "cavity decay");
    for j in 0..spec.n_qubits {
        let sm = embed(&sigma_minus(), j + 1, &dims)?;
        h = h.add(&exchange(spec.couplings[j], &sm, &a)?)?;
        push_channel(&mut channels, spec.relaxation[j] / 2.0, sm, &format!("relaxation {j}"));
    }
    LindbladModel::new(with_threshold(h), channels, 2)
}

/// Emitters as qutrits `(g, e, f)`: the e↔f transition couples to the cavity at
/// `G_j` and sits `α_r` below the cavity frequency.
///
/// In the frame rotating at the cavity frequency the emitter energies are
/// `(-Δ_q/2, Δ_q/2, 3Δ_q/2 - α_r)`. The f→e relaxation runs at
/// `upper_relaxation_factor · γ^s_j`. A nonzero drive adds `iE(a† - a)`.
#[allow(clippy::needless_range_loop)]
pub fn build_three_level(spec: &SystemSpec) -> Result<LindbladModel> {
    spec.validate()?;
    let tl = spec
        .three_level
        .as_ref()
        .ok_or_else(|| Error::InvalidParameter("three-level model requires an anharmonicity".into()))?;
    let upper = spec.upper_couplings().expect("three_level present");
    let dims: Vec<usize> = std::iter::once(spec.fock_dim).chain(std::iter::repeat_n(3, spec.n_qubits)).collect();
    let a = embed(&annihilation(spec.fock_dim)?, 0, &dims)?;
    let mut h = a.adjoint().matmul(&a)?.scale(c(spec.cavity_detuning));
    if spec.drive != 0.0 {
        h = h.add(&drive_term(spec.drive, &a)?)?;
    }
    let mut channels = Vec::new();
    push_channel(&mut channels, spec.kappa / 2.0, a.clone(), "cavity decay");
    for j in 0..spec.n_qubits {
        let dq = spec.qubit_detunings[j];
        let energies = diagonal(&[-dq / 2.0, dq / 2.0, 1.5 * dq - tl.anharmonicity]);
        h = h.add(&embed(&energies, j + 1, &dims)?)?;
        let ge = embed(&transition(3, 0, 1), j + 1, &dims)?;
        let ef = embed(&transition(3, 1, 2), j + 1, &dims)?;
        h = h.add(&exchange(spec.couplings[j], &ge, &a)?)?;
        h = h.add(&exchange(upper[j], &ef, &a)?)?;
        push_channel(&mut channels, spec.relaxation[j] / 2.0, ge, &format!("relaxation g-e {j}"));
        push_channel(
            &mut channels,
            tl.upper_relaxation_factor * spec.relaxation[j] / 2.0,
            ef,
            &format!("relaxation e-f {j}"),
        );
        // qubit-subspace σ^z extended linearly in the excitation number
        let dephase = embed(&diagonal(&[-1.0, 1.0, 3.0]), j + 1, &dims)?;
        push_channel(&mut channels, spec.dephasing[j] / 2.0, dephase, &format!("dephasing {j}"));
    }
    LindbladModel::new(with_threshold(h), channels, 3)
}

/// Chooses the builder matching the spec.
pub fn build_model(spec: &SystemSpec) -> Result<LindbladModel> {
    if spec.three_level.is_some() {
        build_three_level(spec)
    } else if spec.drive != 0.0 {
        build_driven(spec)
    } else {
        build_tavis_cummings(spec)
    }
}

fn push_channel(channels: &mut Vec<CollapseChannel>, rate: f64, operator: ComplexOperator, label: &str) {
    if rate > 0.0 {
        channels.push(CollapseChannel { rate, operator, label: label.to_string() });
    }
}
