//! Polarization-resolved bosonic Fock states.
//!
//! A [`ModeRegistry`] fixes an ordered list of optical modes together with a
//! total photon budget. A [`FockState`] is a sparse superposition of
//! [`Occupation`] vectors indexed against that registry. States are immutable
//! values: every operation returns a new state.

use std::collections::{BTreeMap, HashMap};
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};

/// Amplitudes below this magnitude are dropped.
pub const PRUNE_TOLERANCE: f64 = 1e-15;
/// Tolerance on norms of constructed states.
pub const NORM_TOLERANCE: f64 = 1e-12;
/// Photon budget used unless a scenario asks for more (two pairs).
pub const DEFAULT_MAX_PHOTONS: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarization {
    H,
    V,
}

impl Polarization {
    pub const BOTH: [Polarization; 2] = [Polarization::H, Polarization::V];

    pub fn orthogonal(self) -> Polarization {
        match self {
            Polarization::H => Polarization::V,
            Polarization::V => Polarization::H,
        }
    }
}

impl fmt::Display for Polarization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Polarization::H => f.write_str("H"),
            Polarization::V => f.write_str("V"),
        }
    }
}

/// One optical mode: a spatial beam label plus a polarization.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Mode {
    pub spatial: String,
    pub pol: Polarization,
}

impl Mode {
    pub fn new(spatial: impl Into<String>, pol: Polarization) -> Self {
        Mode {
            spatial: spatial.into(),
            pol,
        }
    }

    pub fn h(spatial: impl Into<String>) -> Self {
        Mode::new(spatial, Polarization::H)
    }

    pub fn v(spatial: impl Into<String>) -> Self {
        Mode::new(spatial, Polarization::V)
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}", self.spatial, self.pol)
    }
}

/// Ordered set of modes plus the photon budget shared by every state on it.
#[derive(Debug, Clone)]
pub struct ModeRegistry {
    modes: Vec<Mode>,
    index: HashMap<Mode, usize>,
    max_total_photons: usize,
}

impl PartialEq for ModeRegistry {
    fn eq(&self, other: &Self) -> bool {
        self.modes == other.modes && self.max_total_photons == other.max_total_photons
    }
}

impl ModeRegistry {
    pub fn new(modes: Vec<Mode>, max_total_photons: usize) -> Result<Arc<Self>> {
        let mut index = HashMap::with_capacity(modes.len());
        for (i, m) in modes.iter().enumerate() {
            if index.insert(m.clone(), i).is_some() {
                return Err(SimError::DuplicateMode(m.clone()));
            }
        }
        Ok(Arc::new(ModeRegistry {
            modes,
            index,
            max_total_photons,
        }))
    }

    /// Registers both polarizations of every label, in label order (H before V).
    pub fn beams<S: AsRef<str>>(labels: &[S], max_total_photons: usize) -> Result<Arc<Self>> {
        let modes = labels
            .iter()
            .flat_map(|l| Polarization::BOTH.map(|p| Mode::new(l.as_ref(), p)))
            .collect();
        Self::new(modes, max_total_photons)
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn max_total_photons(&self) -> usize {
        self.max_total_photons
    }

    pub fn index_of(&self, mode: &Mode) -> Option<usize> {
        self.index.get(mode).copied()
    }

    pub fn require(&self, mode: &Mode) -> Result<usize> {
        self.index_of(mode)
            .ok_or_else(|| SimError::UnknownMode(mode.clone()))
    }

    pub fn contains_spatial(&self, spatial: &str) -> bool {
        self.modes.iter().any(|m| m.spatial == spatial)
    }

    /// Same modes, different budget.
    pub fn with_budget(&self, max_total_photons: usize) -> Arc<Self> {
        Arc::new(ModeRegistry {
            modes: self.modes.clone(),
            index: self.index.clone(),
            max_total_photons,
        })
    }

    /// Index pairs `(H, V)` for a spatial label, failing unless both are registered.
    pub fn pol_pair(&self, spatial: &str) -> Result<(usize, usize)> {
        match (self.index_of(&Mode::h(spatial)), self.index_of(&Mode::v(spatial))) {
            (Some(h), Some(v)) => Ok((h, v)),
            _ => Err(SimError::UnknownSpatial(spatial.to_string())),
        }
    }
}

/// Photon counts, one entry per registry mode.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Occupation(pub Vec<u8>);

impl Occupation {
    pub fn zeros(len: usize) -> Self {
        Occupation(vec![0; len])
    }

    pub fn total(&self) -> usize {
        self.0.iter().map(|&n| n as usize).sum()
    }

    pub fn counts(&self) -> &[u8] {
        &self.0
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    /// Occupation of a registry built from `(mode, count)` pairs.
    pub fn from_pairs(registry: &ModeRegistry, pairs: &[(Mode, u8)]) -> Result<Self> {
        let mut occ = Occupation::zeros(registry.len());
        for (m, n) in pairs {
            occ.0[registry.require(m)?] += n;
        }
        Ok(occ)
    }
}

/// Sparse superposition over occupation-number basis vectors.
#[derive(Debug, Clone)]
pub struct FockState {
    registry: Arc<ModeRegistry>,
    terms: BTreeMap<Occupation, Complex64>,
}

impl FockState {
    pub fn vacuum(registry: &Arc<ModeRegistry>) -> Self {
        let mut terms = BTreeMap::new();
        terms.insert(Occupation::zeros(registry.len()), Complex64::new(1.0, 0.0));
        FockState {
            registry: Arc::clone(registry),
            terms,
        }
    }

    pub fn zero(registry: &Arc<ModeRegistry>) -> Self {
        FockState {
            registry: Arc::clone(registry),
            terms: BTreeMap::new(),
        }
    }

    pub fn basis_state(registry: &Arc<ModeRegistry>, occupation: Occupation) -> Result<Self> {
        check_occupation(registry, &occupation)?;
        let mut terms = BTreeMap::new();
        terms.insert(occupation, Complex64::new(1.0, 0.0));
        Ok(FockState {
            registry: Arc::clone(registry),
            terms,
        })
    }

    /// Builds a state from raw terms. Duplicate occupations are summed and tiny
    /// amplitudes pruned.
    pub fn from_terms<I>(registry: &Arc<ModeRegistry>, terms: I) -> Result<Self>
    where
        I: IntoIterator<Item = (Occupation, Complex64)>,
    {
        let mut acc: BTreeMap<Occupation, Complex64> = BTreeMap::new();
        for (occ, amp) in terms {
            check_occupation(registry, &occ)?;
            *acc.entry(occ).or_default() += amp;
        }
        Ok(Self::from_map_unchecked(registry, acc))
    }

    pub(crate) fn from_map_unchecked(
        registry: &Arc<ModeRegistry>,
        mut terms: BTreeMap<Occupation, Complex64>,
    ) -> Self {
        terms.retain(|_, a| a.norm() >= PRUNE_TOLERANCE);
        FockState {
            registry: Arc::clone(registry),
            terms,
        }
    }

    pub fn registry(&self) -> &Arc<ModeRegistry> {
        &self.registry
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Occupation, &Complex64)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn amplitude(&self, occupation: &Occupation) -> Complex64 {
        self.terms.get(occupation).copied().unwrap_or_default()
    }

    pub fn norm_sqr(&self) -> f64 {
        self.terms.values().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Rescaled to unit norm. A zero state stays zero.
    pub fn normalized(&self) -> Self {
        let n = self.norm();
        if n == 0.0 {
            return self.clone();
        }
        self.scaled(Complex64::new(1.0 / n, 0.0))
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        let terms = self
            .terms
            .iter()
            .map(|(o, a)| (o.clone(), a * factor))
            .collect();
        Self::from_map_unchecked(&self.registry, terms)
    }

    pub fn add(&self, other: &FockState) -> Result<Self> {
        self.same_registry(other)?;
        let mut terms = self.terms.clone();
        for (o, a) in &other.terms {
            *terms.entry(o.clone()).or_default() += a;
        }
        Ok(Self::from_map_unchecked(&self.registry, terms))
    }

    /// Keeps only the terms accepted by `keep`.
    pub fn filter<F>(&self, mut keep: F) -> Self
    where
        F: FnMut(&Occupation) -> bool,
    {
        let terms = self
            .terms
            .iter()
            .filter(|(o, _)| keep(o))
            .map(|(o, a)| (o.clone(), *a))
            .collect();
        FockState {
            registry: Arc::clone(&self.registry),
            terms,
        }
    }

    /// `⟨self|other⟩`, conjugate-linear in `self`.
    pub fn inner_product(&self, other: &FockState) -> Result<Complex64> {
        self.same_registry(other)?;
        let (small, large, conj_small) = if self.terms.len() <= other.terms.len() {
            (self, other, true)
        } else {
            (other, self, false)
        };
        let mut acc = Complex64::default();
        for (o, a) in &small.terms {
            if let Some(b) = large.terms.get(o) {
                acc += if conj_small { a.conj() * b } else { b.conj() * a };
            }
        }
        Ok(acc)
    }

    /// `|⟨a|b⟩|² / (‖a‖²‖b‖²)`; zero if either state vanishes.
    pub fn fidelity(&self, other: &FockState) -> Result<f64> {
        let ip = self.inner_product(other)?;
        let denom = self.norm_sqr() * other.norm_sqr();
        Ok(if denom == 0.0 { 0.0 } else { ip.norm_sqr() / denom })
    }

    /// Product state over the concatenated registry (`self` modes first).
    /// The combined budget is the sum of the two budgets.
    pub fn tensor(&self, other: &FockState) -> Result<Self> {
        for m in other.registry.modes() {
            if self.registry.index_of(m).is_some() {
                return Err(SimError::OverlappingModes(m.clone()));
            }
        }
        let modes: Vec<Mode> = self
            .registry
            .modes()
            .iter()
            .chain(other.registry.modes())
            .cloned()
            .collect();
        let registry = ModeRegistry::new(
            modes,
            self.registry.max_total_photons() + other.registry.max_total_photons(),
        )?;
        let mut terms = BTreeMap::new();
        for (oa, a) in &self.terms {
            for (ob, b) in &other.terms {
                let mut counts = oa.0.clone();
                counts.extend_from_slice(&ob.0);
                terms.insert(Occupation(counts), a * b);
            }
        }
        Ok(Self::from_map_unchecked(&registry, terms))
    }

    /// Re-expresses the state on `target`, which must contain every mode that
    /// carries photons here. Extra target modes are vacuum.
    pub fn embed(&self, target: &Arc<ModeRegistry>) -> Result<Self> {
        let mut map = Vec::with_capacity(self.registry.len());
        for m in self.registry.modes() {
            map.push(target.index_of(m));
        }
        let mut terms = BTreeMap::new();
        for (o, a) in &self.terms {
            let mut counts = vec![0u8; target.len()];
            for (i, &n) in o.0.iter().enumerate() {
                if n == 0 {
                    continue;
                }
                match map[i] {
                    Some(j) => counts[j] = n,
                    None => return Err(SimError::UnknownMode(self.registry.modes()[i].clone())),
                }
            }
            let occ = Occupation(counts);
            check_occupation(target, &occ)?;
            terms.insert(occ, *a);
        }
        Ok(FockState {
            registry: Arc::clone(target),
            terms,
        })
    }

    /// Drops every term with more than `max_photons` photons and lowers the budget.
    pub fn truncate(&self, max_photons: usize) -> Self {
        let registry = self.registry.with_budget(max_photons);
        let terms = self
            .terms
            .iter()
            .filter(|(o, _)| o.total() <= max_photons)
            .map(|(o, a)| (o.clone(), *a))
            .collect();
        FockState { registry, terms }
    }

    /// Applies the creation operator of `mode`, including the `√(n+1)` factor.
    pub fn create(&self, mode: &Mode) -> Result<Self> {
        let i = self.registry.require(mode)?;
        let budget = self.registry.max_total_photons();
        let mut terms = BTreeMap::new();
        for (o, a) in &self.terms {
            let mut next = o.clone();
            next.0[i] += 1;
            let photons = next.total();
            if photons > budget {
                return Err(SimError::PhotonBudget { photons, budget });
            }
            let factor = f64::from(next.0[i]).sqrt();
            terms.insert(next, a * factor);
        }
        Ok(Self::from_map_unchecked(&self.registry, terms))
    }

    /// Total photon number on the given registry indices, per term.
    pub fn photons_on(occupation: &Occupation, indices: &[usize]) -> usize {
        indices.iter().map(|&i| occupation.0[i] as usize).sum()
    }

    fn same_registry(&self, other: &FockState) -> Result<()> {
        if Arc::ptr_eq(&self.registry, &other.registry) || *self.registry == *other.registry {
            Ok(())
        } else {
            Err(SimError::RegistryMismatch)
        }
    }
}

fn check_occupation(registry: &ModeRegistry, occ: &Occupation) -> Result<()> {
    if occ.0.len() != registry.len() {
        return Err(SimError::OccupationLength {
            expected: registry.len(),
            got: occ.0.len(),
        });
    }
    let photons = occ.total();
    if photons > registry.max_total_photons() {
        return Err(SimError::PhotonBudget {
            photons,
            budget: registry.max_total_photons(),
        });
    }
    Ok(())
}

/// `cos θ |H⟩ + e^{iφ} sin θ |V⟩`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QubitPolarizationState {
    pub theta: f64,
    pub phi: f64,
}

impl QubitPolarizationState {
    pub const H: QubitPolarizationState = QubitPolarizationState { theta: 0.0, phi: 0.0 };
    pub const V: QubitPolarizationState = QubitPolarizationState {
        theta: std::f64::consts::FRAC_PI_2,
        phi: 0.0,
    };

    pub fn new(theta: f64, phi: f64) -> Self {
        QubitPolarizationState { theta, phi }
    }

    /// `(c_H, c_V)`.
    pub fn amplitudes(&self) -> [Complex64; 2] {
        [
            Complex64::new(self.theta.cos(), 0.0),
            Complex64::from_polar(self.theta.sin(), self.phi),
        ]
    }

    /// Recovers `(θ, φ)` from any nonzero amplitude pair, discarding the
    /// global phase and norm.
    pub fn from_amplitudes(h: Complex64, v: Complex64) -> Result<Self> {
        let n = (h.norm_sqr() + v.norm_sqr()).sqrt();
        if n == 0.0 {
            return Err(SimError::InvalidParameter(
                "zero polarization vector".into(),
            ));
        }
        let theta = (v.norm() / n).atan2(h.norm() / n);
        let phi = if h.norm() < PRUNE_TOLERANCE || v.norm() < PRUNE_TOLERANCE {
            0.0
        } else {
            v.arg() - h.arg()
        };
        Ok(QubitPolarizationState { theta, phi })
    }

    /// `|⟨self|other⟩|²`.
    pub fn overlap(&self, other: &QubitPolarizationState) -> f64 {
        let [a0, a1] = self.amplitudes();
        let [b0, b1] = other.amplitudes();
        (a0.conj() * b0 + a1.conj() * b1).norm_sqr()
    }
}

/// Places a single photon in the given polarization state on `spatial`.
pub fn qubit_to_fock(
    registry: &Arc<ModeRegistry>,
    q: QubitPolarizationState,
    spatial: &str,
) -> Result<FockState> {
    let (ih, iv) = registry.pol_pair(spatial)?;
    let [ch, cv] = q.amplitudes();
    let mut oh = Occupation::zeros(registry.len());
    oh.0[ih] = 1;
    let mut ov = Occupation::zeros(registry.len());
    ov.0[iv] = 1;
    FockState::from_terms(registry, [(oh, ch), (ov, cv)])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BellKind {
    PsiMinus,
    PsiPlus,
    PhiMinus,
    PhiPlus,
}

impl BellKind {
    pub const ALL: [BellKind; 4] = [
        BellKind::PsiMinus,
        BellKind::PsiPlus,
        BellKind::PhiMinus,
        BellKind::PhiPlus,
    ];
}

/// Bell states with the printed sign conventions:
/// `Ψ± = (|H⟩|V⟩ ± |V⟩|H⟩)/√2`, `Φ± = (|H⟩|H⟩ ± |V⟩|V⟩)/√2`.
pub fn bell_state(
    registry: &Arc<ModeRegistry>,
    kind: BellKind,
    spatial_a: &str,
    spatial_b: &str,
) -> Result<FockState> {
    if spatial_a == spatial_b {
        return Err(SimError::SamePort(spatial_a.to_string()));
    }
    let (ah, av) = registry.pol_pair(spatial_a)?;
    let (bh, bv) = registry.pol_pair(spatial_b)?;
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let pair = |i: usize, j: usize| {
        let mut o = Occupation::zeros(registry.len());
        o.0[i] = 1;
        o.0[j] = 1;
        o
    };
    let (first, second, sign) = match kind {
        BellKind::PsiMinus => (pair(ah, bv), pair(av, bh), -1.0),
        BellKind::PsiPlus => (pair(ah, bv), pair(av, bh), 1.0),
        BellKind::PhiMinus => (pair(ah, bh), pair(av, bv), -1.0),
        BellKind::PhiPlus => (pair(ah, bh), pair(av, bv), 1.0),
    };
    FockState::from_terms(
        registry,
        [
            (first, Complex64::new(s, 0.0)),
            (second, Complex64::new(sign * s, 0.0)),
        ],
    )
}
