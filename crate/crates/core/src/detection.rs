//! Detectors, firing patterns and post-selection.
//!
//! Everything upstream is a pure state. This module is where mixedness
//! appears: a heralded outcome is the probability of a firing pattern together
//! with the reduced density operator of the output modes, summed over every
//! unobserved degree of freedom (sinks and exact detector counts).

use std::collections::{BTreeMap, BTreeSet, HashMap};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fock::{FockState, Mode, ModeRegistry, Occupation, Polarization, QubitPolarizationState};

/// Probability and trace tolerance for post-selected states.
pub const PROBABILITY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetectorKind {
    /// Clicks on one or more photons; never resolves the count.
    #[default]
    Threshold,
    NumberResolving,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub kind: DetectorKind,
    /// Quantum efficiency. Loss is realised by attenuators placed upstream, so
    /// this field is descriptive once the circuit is built.
    pub efficiency: f64,
}

impl DetectorModel {
    pub fn threshold() -> Self {
        DetectorModel {
            kind: DetectorKind::Threshold,
            efficiency: 1.0,
        }
    }

    pub fn number_resolving() -> Self {
        DetectorModel {
            kind: DetectorKind::NumberResolving,
            efficiency: 1.0,
        }
    }

    pub fn with_efficiency(mut self, efficiency: f64) -> Self {
        self.efficiency = efficiency;
        self
    }

    /// What the detector reports for `count` arriving photons.
    pub fn response(&self, count: usize) -> usize {
        match self.kind {
            DetectorKind::Threshold => usize::from(count > 0),
            DetectorKind::NumberResolving => count,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectorPort {
    pub name: String,
    pub modes: Vec<Mode>,
    pub model: DetectorModel,
}

impl DetectorPort {
    pub fn new(name: impl Into<String>, modes: Vec<Mode>, model: DetectorModel) -> Self {
        DetectorPort {
            name: name.into(),
            modes,
            model,
        }
    }

    /// Port watching both polarizations of a beam.
    pub fn beam(name: impl Into<String>, spatial: &str, model: DetectorModel) -> Self {
        Self::new(name, vec![Mode::h(spatial), Mode::v(spatial)], model)
    }
}

/// Role assignment for every registry mode at measurement time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSetup {
    pub ports: Vec<DetectorPort>,
    pub sinks: Vec<Mode>,
    pub outputs: Vec<Mode>,
}

/// Coincidence condition.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FiringPattern {
    pub fired: Vec<String>,
    pub silent: Vec<String>,
    /// Each group must have exactly one member fired; outcomes are reported per
    /// choice of members.
    pub exactly_one_of: Vec<Vec<String>>,
    /// Exact photon counts, only meaningful on number-resolving ports.
    #[serde(default)]
    pub exact_counts: Vec<(String, usize)>,
}

impl FiringPattern {
    pub fn fired<S: AsRef<str>>(names: &[S]) -> Self {
        FiringPattern {
            fired: names.iter().map(|s| s.as_ref().to_string()).collect(),
            ..Default::default()
        }
    }

    pub fn and_silent<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        self.silent
            .extend(names.iter().map(|s| s.as_ref().to_string()));
        self
    }

    pub fn and_exactly_one_of<S: AsRef<str>>(mut self, names: &[S]) -> Self {
        self.exactly_one_of
            .push(names.iter().map(|s| s.as_ref().to_string()).collect());
        self
    }

    pub fn and_count(mut self, name: &str, count: usize) -> Self {
        self.exact_counts.push((name.to_string(), count));
        self
    }

    /// Every branch: one chosen member per exactly-one-of group.
    pub fn branches(&self) -> Vec<Vec<String>> {
        let mut out: Vec<Vec<String>> = vec![Vec::new()];
        for group in &self.exactly_one_of {
            out = out
                .into_iter()
                .flat_map(|prefix| {
                    group.iter().map(move |m| {
                        let mut b = prefix.clone();
                        b.push(m.clone());
                        b
                    })
                })
                .collect();
        }
        out
    }

    fn validate(&self, setup: &MeasurementSetup) -> Result<()> {
        let known: BTreeSet<&str> = setup.ports.iter().map(|p| p.name.as_str()).collect();
        let mut seen: BTreeSet<&str> = BTreeSet::new();
        let referenced = self
            .fired
            .iter()
            .chain(&self.silent)
            .chain(self.exactly_one_of.iter().flatten());
        for name in referenced {
            if !known.contains(name.as_str()) {
                return Err(SimError::UnknownPort(name.clone()));
            }
            if !seen.insert(name) {
                return Err(SimError::InvalidPattern(format!(
                    "port `{name}` appears in more than one condition"
                )));
            }
        }
        for (name, _) in &self.exact_counts {
            let port = setup
                .ports
                .iter()
                .find(|p| &p.name == name)
                .ok_or_else(|| SimError::UnknownPort(name.clone()))?;
            if port.model.kind != DetectorKind::NumberResolving {
                return Err(SimError::InvalidPattern(format!(
                    "exact count on threshold detector `{name}`"
                )));
            }
        }
        if self.exactly_one_of.iter().any(|g| g.is_empty()) {
            return Err(SimError::InvalidPattern("empty exactly-one-of group".into()));
        }
        Ok(())
    }
}

/// Density operator over a fixed list of output modes, in the basis of all
/// occupations of those modes up to the photon budget.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityOperator {
    pub modes: Vec<Mode>,
    pub basis: Vec<Occupation>,
    pub matrix: DMatrix<Complex64>,
}

impl DensityOperator {
    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    pub fn purity(&self) -> f64 {
        (&self.matrix * &self.matrix).trace().re
    }

    pub fn hermiticity_error(&self) -> f64 {
        (&self.matrix - self.matrix.adjoint()).norm()
    }

    /// Eigenvalues of the Hermitian part, ascending.
    pub fn eigenvalues(&self) -> Vec<f64> {
        let h = (&self.matrix + self.matrix.adjoint()) * Complex64::new(0.5, 0.0);
        let mut ev: Vec<f64> = h.symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(f64::total_cmp);
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues().first().copied().unwrap_or(0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        DensityOperator {
            modes: self.modes.clone(),
            basis: self.basis.clone(),
            matrix: &self.matrix * Complex64::new(factor, 0.0),
        }
    }

    /// Diagonal mass grouped by total photon number on the output modes.
    pub fn photon_number_weights(&self) -> BTreeMap<usize, f64> {
        let mut out = BTreeMap::new();
        for (i, o) in self.basis.iter().enumerate() {
            *out.entry(o.total()).or_insert(0.0) += self.matrix[(i, i)].re;
        }
        out
    }

    /// Index of the single-photon basis vector on `mode`.
    pub fn single_photon_index(&self, mode: &Mode) -> Option<usize> {
        let k = self.modes.iter().position(|m| m == mode)?;
        self.basis
            .iter()
            .position(|o| o.total() == 1 && o.get(k) == 1)
    }
}

/// Enumerates all occupations of `n_modes` modes with at most `max` photons,
/// ordered by total photon number and then lexicographically descending.
pub(crate) fn output_basis(n_modes: usize, max: usize) -> Vec<Occupation> {
    let mut out = Vec::new();
    for total in 0..=max {
        let mut cur = vec![0u8; n_modes];
        fill(&mut cur, 0, total, &mut out);
    }
    out
}

fn fill(cur: &mut Vec<u8>, pos: usize, left: usize, out: &mut Vec<Occupation>) {
    if pos + 1 == cur.len() {
        cur[pos] = left as u8;
        out.push(Occupation(cur.clone()));
        return;
    }
    if cur.is_empty() {
        if left == 0 {
            out.push(Occupation(Vec::new()));
        }
        return;
    }
    for k in (0..=left).rev() {
        cur[pos] = k as u8;
        fill(cur, pos + 1, left - k, out);
    }
    cur[pos] = 0;
}

struct Accumulator {
    basis_index: HashMap<Occupation, usize>,
    blocks: BTreeMap<Vec<u8>, Vec<(usize, Complex64)>>,
}

impl Accumulator {
    fn new(basis: &[Occupation]) -> Self {
        Accumulator {
            basis_index: basis.iter().cloned().enumerate().map(|(i, o)| (o, i)).collect(),
            blocks: BTreeMap::new(),
        }
    }

    fn add(&mut self, occ: &Occupation, amp: Complex64, outputs: &[usize]) {
        let out = Occupation(outputs.iter().map(|&i| occ.get(i)).collect());
        let mut env = occ.0.clone();
        for &i in outputs {
            env[i] = 0;
        }
        let idx = self.basis_index[&out];
        self.blocks.entry(env).or_default().push((idx, amp));
    }

    fn finish(self, dim: usize) -> DMatrix<Complex64> {
        let mut rho = DMatrix::zeros(dim, dim);
        for vec in self.blocks.values() {
            for &(i, a) in vec {
                for &(j, b) in vec {
                    rho[(i, j)] += a * b.conj();
                }
            }
        }
        rho
    }
}

fn output_indices(registry: &ModeRegistry, modes: &[Mode]) -> Result<Vec<usize>> {
    modes.iter().map(|m| registry.require(m)).collect()
}

/// Partial trace onto `modes`. The trace of the result is `‖state‖²`.
pub fn reduced_density(state: &FockState, modes: &[Mode]) -> Result<DensityOperator> {
    let outputs = output_indices(state.registry(), modes)?;
    let basis = output_basis(modes.len(), state.registry().max_total_photons());
    let mut acc = Accumulator::new(&basis);
    for (occ, amp) in state.terms() {
        acc.add(occ, *amp, &outputs);
    }
    let matrix = acc.finish(basis.len());
    Ok(DensityOperator {
        modes: modes.to_vec(),
        basis,
        matrix,
    })
}

/// One heralded branch of a firing pattern.
#[derive(Debug, Clone)]
pub struct MeasurementOutcome {
    /// Chosen member of each exactly-one-of group (empty if there are none).
    pub branch: Vec<String>,
    pub probability: f64,
    /// Normalized state of the output modes; `None` when the branch never occurs.
    pub conditional_state: Option<DensityOperator>,
    /// Largest amplitude modulus among accepted terms.
    pub max_amplitude: f64,
}

impl MeasurementOutcome {
    pub fn branch_label(&self) -> String {
        if self.branch.is_empty() {
            "all".to_string()
        } else {
            self.branch.join("+")
        }
    }
}

struct PortIndex {
    name: String,
    indices: Vec<usize>,
    model: DetectorModel,
}

fn index_setup(registry: &ModeRegistry, setup: &MeasurementSetup) -> Result<Vec<PortIndex>> {
    let mut role: Vec<u8> = vec![0; registry.len()];
    let mut mark = |m: &Mode| -> Result<()> {
        let i = registry.require(m)?;
        if role[i] != 0 {
            return Err(SimError::MultiplyAssignedMode(m.clone()));
        }
        role[i] = 1;
        Ok(())
    };
    let mut names = BTreeSet::new();
    for p in &setup.ports {
        if !names.insert(p.name.as_str()) {
            return Err(SimError::InvalidPattern(format!("duplicate port `{}`", p.name)));
        }
        p.modes.iter().try_for_each(&mut mark)?;
    }
    setup.sinks.iter().try_for_each(&mut mark)?;
    setup.outputs.iter().try_for_each(&mut mark)?;
    if let Some(i) = role.iter().position(|&r| r == 0) {
        return Err(SimError::UnassignedMode(registry.modes()[i].clone()));
    }
    setup
        .ports
        .iter()
        .map(|p| {
            Ok(PortIndex {
                name: p.name.clone(),
                indices: p.modes.iter().map(|m| registry.require(m)).collect::<Result<_>>()?,
                model: p.model,
            })
        })
        .collect()
}

/// Evaluates a firing pattern on a final state. Returns one outcome per branch
/// of the exactly-one-of groups, in [`FiringPattern::branches`] order.
pub fn pattern_probability(
    state: &FockState,
    pattern: &FiringPattern,
    setup: &MeasurementSetup,
) -> Result<Vec<MeasurementOutcome>> {
    let registry = state.registry();
    let ports = index_setup(registry, setup)?;
    pattern.validate(setup)?;
    let port_of = |name: &str| ports.iter().position(|p| p.name == name).expect("validated");
    let fired: Vec<usize> = pattern.fired.iter().map(|n| port_of(n)).collect();
    let silent: Vec<usize> = pattern.silent.iter().map(|n| port_of(n)).collect();
    let groups: Vec<Vec<usize>> = pattern
        .exactly_one_of
        .iter()
        .map(|g| g.iter().map(|n| port_of(n)).collect())
        .collect();
    let counts: Vec<(usize, usize)> = pattern
        .exact_counts
        .iter()
        .map(|(n, c)| (port_of(n), *c))
        .collect();
    let outputs = output_indices(registry, &setup.outputs)?;
    let basis = output_basis(outputs.len(), registry.max_total_photons());

    let branches = pattern.branches();
    let mut accs: Vec<Accumulator> = branches.iter().map(|_| Accumulator::new(&basis)).collect();
    let mut max_amp = vec![0.0f64; branches.len()];

    let mut reports = vec![0usize; ports.len()];
    for (occ, amp) in state.terms() {
        for (k, p) in ports.iter().enumerate() {
            reports[k] = p.model.response(FockState::photons_on(occ, &p.indices));
        }
        let clicked = |k: usize| reports[k] > 0;
        if !fired.iter().all(|&k| clicked(k)) || silent.iter().any(|&k| clicked(k)) {
            continue;
        }
        if !counts.iter().all(|&(k, c)| reports[k] == c) {
            continue;
        }
        // Branch index in mixed radix over group sizes.
        let mut branch = 0usize;
        let mut ok = true;
        for g in &groups {
            let on: Vec<usize> = (0..g.len()).filter(|&j| clicked(g[j])).collect();
            if on.len() != 1 {
                ok = false;
                break;
            }
            branch = branch * g.len() + on[0];
        }
        if !ok {
            continue;
        }
        accs[branch].add(occ, *amp, &outputs);
        max_amp[branch] = max_amp[branch].max(amp.norm());
    }

    Ok(branches
        .into_iter()
        .zip(accs)
        .zip(max_amp)
        .map(|((branch, acc), max_amplitude)| {
            let matrix = acc.finish(basis.len());
            let probability = matrix.trace().re;
            let conditional_state = (probability > 0.0).then(|| DensityOperator {
                modes: setup.outputs.clone(),
                basis: basis.clone(),
                matrix: matrix / Complex64::new(probability, 0.0),
            });
            MeasurementOutcome {
                branch,
                probability,
                conditional_state,
                max_amplitude,
            }
        })
        .collect())
}

/// Probability of every distinct joint detector report (threshold ports report
/// 0/1, number-resolving ports their count), keyed in port order.
pub fn outcome_distribution(
    state: &FockState,
    setup: &MeasurementSetup,
) -> Result<BTreeMap<Vec<usize>, f64>> {
    let ports = index_setup(state.registry(), setup)?;
    let mut dist = BTreeMap::new();
    for (occ, amp) in state.terms() {
        let key: Vec<usize> = ports
            .iter()
            .map(|p| p.model.response(FockState::photons_on(occ, &p.indices)))
            .collect();
        *dist.entry(key).or_insert(0.0) += amp.norm_sqr();
    }
    Ok(dist)
}

/// Fidelity of a beam's conditional state with a single-photon target.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FidelityRecord {
    /// `⟨target|ρ|target⟩` with the target in the one-photon sector.
    pub raw: f64,
    pub single_photon_weight: f64,
    pub vacuum_weight: f64,
    pub multi_weight: f64,
    /// `raw / single_photon_weight`; diagnostics only.
    pub single_photon_conditioned: Option<f64>,
}

/// Scores `rho` (on the H and V modes of one beam) against `target`.
pub fn fidelity(rho: &DensityOperator, target: QubitPolarizationState) -> Result<FidelityRecord> {
    let tr = rho.trace();
    if (tr - 1.0).abs() > PROBABILITY_TOLERANCE {
        return Err(SimError::NonUnitTrace(tr));
    }
    let spatial = rho
        .modes
        .first()
        .map(|m| m.spatial.clone())
        .ok_or_else(|| SimError::InvalidParameter("density operator has no modes".into()))?;
    let ih = rho
        .single_photon_index(&Mode::new(spatial.as_str(), Polarization::H))
        .ok_or_else(|| SimError::UnknownMode(Mode::h(spatial.as_str())))?;
    let iv = rho
        .single_photon_index(&Mode::new(spatial.as_str(), Polarization::V))
        .ok_or_else(|| SimError::UnknownMode(Mode::v(spatial.as_str())))?;
    let t = target.amplitudes();
    let idx = [ih, iv];
    let mut raw = Complex64::default();
    for a in 0..2 {
        for b in 0..2 {
            raw += t[a].conj() * rho.matrix[(idx[a], idx[b])] * t[b];
        }
    }
    let weights = rho.photon_number_weights();
    let vacuum_weight = weights.get(&0).copied().unwrap_or(0.0);
    let single_photon_weight = weights.get(&1).copied().unwrap_or(0.0);
    let multi_weight = weights
        .iter()
        .filter(|(&n, _)| n >= 2)
        .map(|(_, w)| w)
        .sum();
    Ok(FidelityRecord {
        raw: raw.re,
        single_photon_weight,
        vacuum_weight,
        multi_weight,
        single_photon_conditioned: (single_photon_weight > 0.0).then(|| raw.re / single_photon_weight),
    })
}
