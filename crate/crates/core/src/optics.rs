//! Passive linear optics.
//!
//! Every element is a [`ModeUnitary`]: a unitary matrix over a handful of
//! registry modes, with column `i` giving the image of input mode `i`
//! (`a†_i → Σ_j U_ji b†_j`). Polarizers and detector loss are unitary reroutes
//! into unmonitored sink modes, so the whole pre-measurement pipeline stays
//! pure.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::f64::consts::FRAC_1_SQRT_2;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fock::{FockState, Mode, ModeRegistry, Occupation, Polarization, PRUNE_TOLERANCE};

/// Maximum `‖U†U − I‖` accepted at construction.
pub const UNITARITY_TOLERANCE: f64 = 1e-12;

/// Phase convention of the 50:50 beam splitter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BsConvention {
    /// `(1/√2)[[1, 1], [1, −1]]`
    #[default]
    Hadamard,
    /// `(1/√2)[[1, i], [i, 1]]`
    Symmetric,
}

/// Which polarization a PBS transmits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PbsConvention {
    /// Transmit H, reflect V.
    #[default]
    TransmitH,
    /// Transmit V, reflect H.
    TransmitV,
}

/// Convention used for the Fig.-1-style PBS unless a scenario overrides it.
pub const DEFAULT_PBS_CONVENTION: PbsConvention = PbsConvention::TransmitH;

impl PbsConvention {
    pub fn transmitted(self) -> Polarization {
        match self {
            PbsConvention::TransmitH => Polarization::H,
            PbsConvention::TransmitV => Polarization::V,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeUnitary {
    modes: Vec<Mode>,
    matrix: DMatrix<Complex64>,
}

impl ModeUnitary {
    pub fn new(modes: Vec<Mode>, matrix: DMatrix<Complex64>) -> Result<Self> {
        let m = modes.len();
        if matrix.nrows() != m || matrix.ncols() != m {
            return Err(SimError::MatrixShape {
                expected: m,
                got: matrix.nrows().max(matrix.ncols()),
            });
        }
        let distinct: BTreeSet<&Mode> = modes.iter().collect();
        if distinct.len() != m {
            let dup = modes
                .iter()
                .find(|x| modes.iter().filter(|y| y == x).count() > 1)
                .cloned()
                .unwrap_or_else(|| modes[0].clone());
            return Err(SimError::DuplicateMode(dup));
        }
        let dev = unitarity_deviation(&matrix);
        if dev > UNITARITY_TOLERANCE {
            return Err(SimError::NotUnitary(dev));
        }
        Ok(ModeUnitary { modes, matrix })
    }

    pub fn identity(modes: Vec<Mode>) -> Result<Self> {
        let m = modes.len();
        Self::new(modes, DMatrix::identity(m, m))
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.matrix
    }

    /// The unitary of applying `self` first and `later` second, over the union of
    /// both mode sets (`self` modes first).
    pub fn then(&self, later: &ModeUnitary) -> Result<ModeUnitary> {
        let mut modes = self.modes.clone();
        for m in &later.modes {
            if !modes.contains(m) {
                modes.push(m.clone());
            }
        }
        let first = self.lifted(&modes);
        let second = later.lifted(&modes);
        ModeUnitary::new(modes, second * first)
    }

    fn lifted(&self, modes: &[Mode]) -> DMatrix<Complex64> {
        let n = modes.len();
        let pos: Vec<usize> = self
            .modes
            .iter()
            .map(|m| modes.iter().position(|x| x == m).expect("subset"))
            .collect();
        let mut out = DMatrix::identity(n, n);
        for (a, &pa) in pos.iter().enumerate() {
            for (b, &pb) in pos.iter().enumerate() {
                out[(pa, pb)] = self.matrix[(a, b)];
            }
        }
        out
    }
}

pub(crate) fn unitarity_deviation(u: &DMatrix<Complex64>) -> f64 {
    let n = u.nrows();
    let prod = u.adjoint() * u;
    let mut dev: f64 = 0.0;
    for i in 0..n {
        for j in 0..n {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((prod[(i, j)] - Complex64::new(target, 0.0)).norm());
        }
    }
    dev
}

fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

fn require_modes(registry: &ModeRegistry, modes: &[Mode]) -> Result<()> {
    for m in modes {
        registry.require(m)?;
    }
    Ok(())
}

fn distinct_ports(a: &str, b: &str) -> Result<()> {
    if a == b {
        Err(SimError::SamePort(a.to_string()))
    } else {
        Ok(())
    }
}

/// Polarization-independent 50:50 beam splitter on `(A_H, A_V, B_H, B_V)`.
pub fn bs_50_50(
    registry: &ModeRegistry,
    port_a: &str,
    port_b: &str,
    convention: BsConvention,
) -> Result<ModeUnitary> {
    distinct_ports(port_a, port_b)?;
    let modes = vec![
        Mode::h(port_a),
        Mode::v(port_a),
        Mode::h(port_b),
        Mode::v(port_b),
    ];
    require_modes(registry, &modes)?;
    let s = FRAC_1_SQRT_2;
    let (t, r_ab, r_ba, t_b) = match convention {
        BsConvention::Hadamard => (c(s), c(s), c(s), c(-s)),
        BsConvention::Symmetric => (c(s), Complex64::new(0.0, s), Complex64::new(0.0, s), c(s)),
    };
    let mut m = DMatrix::zeros(4, 4);
    for p in 0..2 {
        m[(p, p)] = t;
        m[(p, 2 + p)] = r_ab;
        m[(2 + p, p)] = r_ba;
        m[(2 + p, 2 + p)] = t_b;
    }
    ModeUnitary::new(modes, m)
}

/// Polarizing beam splitter: the transmitted polarization stays on its line,
/// the reflected one swaps between the two lines.
pub fn pbs(
    registry: &ModeRegistry,
    port_a: &str,
    port_b: &str,
    convention: PbsConvention,
) -> Result<ModeUnitary> {
    distinct_ports(port_a, port_b)?;
    let modes = vec![
        Mode::h(port_a),
        Mode::v(port_a),
        Mode::h(port_b),
        Mode::v(port_b),
    ];
    require_modes(registry, &modes)?;
    let reflected = match convention.transmitted() {
        Polarization::H => 1,
        Polarization::V => 0,
    };
    let transmitted = 1 - reflected;
    let mut m = DMatrix::zeros(4, 4);
    m[(transmitted, transmitted)] = c(1.0);
    m[(2 + transmitted, 2 + transmitted)] = c(1.0);
    m[(2 + reflected, reflected)] = c(1.0);
    m[(reflected, 2 + reflected)] = c(1.0);
    ModeUnitary::new(modes, m)
}

/// Polarization rotator `[[cos θ, −e^{−iφ} sin θ], [e^{iφ} sin θ, cos θ]]` on `(H, V)`.
pub fn rotator(registry: &ModeRegistry, port: &str, theta: f64, phi: f64) -> Result<ModeUnitary> {
    let modes = vec![Mode::h(port), Mode::v(port)];
    require_modes(registry, &modes)?;
    ModeUnitary::new(modes, rotator_matrix(theta, phi))
}

pub(crate) fn rotator_matrix(theta: f64, phi: f64) -> DMatrix<Complex64> {
    let (s, co) = theta.sin_cos();
    DMatrix::from_row_slice(
        2,
        2,
        &[
            c(co),
            -Complex64::from_polar(s, -phi),
            Complex64::from_polar(s, phi),
            c(co),
        ],
    )
}

/// Ideal polarizer: the blocked polarization at `port` is swapped into the same
/// polarization of `sink`.
pub fn polarizer(
    registry: &ModeRegistry,
    port: &str,
    pass: Polarization,
    sink: &str,
) -> Result<ModeUnitary> {
    distinct_ports(port, sink)?;
    let blocked = pass.orthogonal();
    swap(registry, Mode::new(port, blocked), Mode::new(sink, blocked))
}

/// Beam splitter of intensity transmissivity `eta` between `mode` and `sink`.
pub fn attenuator(registry: &ModeRegistry, mode: Mode, sink: Mode, eta: f64) -> Result<ModeUnitary> {
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(SimError::InvalidParameter(format!(
            "efficiency {eta} outside (0, 1]"
        )));
    }
    let modes = vec![mode, sink];
    require_modes(registry, &modes)?;
    let t = eta.sqrt();
    let r = (1.0 - eta).sqrt();
    ModeUnitary::new(modes, DMatrix::from_row_slice(2, 2, &[c(t), c(-r), c(r), c(t)]))
}

fn swap(registry: &ModeRegistry, a: Mode, b: Mode) -> Result<ModeUnitary> {
    let modes = vec![a, b];
    require_modes(registry, &modes)?;
    ModeUnitary::new(
        modes,
        DMatrix::from_row_slice(2, 2, &[c(0.0), c(1.0), c(1.0), c(0.0)]),
    )
}

/// Applies `u` to `state` by substituting every creation operator on `u`'s
/// modes and expanding the resulting monomials.
pub fn apply_unitary(state: &FockState, u: &ModeUnitary) -> Result<FockState> {
    let registry = state.registry();
    let active: Vec<usize> = u
        .modes
        .iter()
        .map(|m| registry.require(m))
        .collect::<Result<_>>()?;
    let m = active.len();
    let sqrt_fact = sqrt_factorials(registry.max_total_photons());

    // Column i as a sparse list of (output slot, coefficient).
    let columns: Vec<Vec<(usize, Complex64)>> = (0..m)
        .map(|i| {
            (0..m)
                .filter_map(|j| {
                    let z = u.matrix[(j, i)];
                    (z.norm() > 0.0).then_some((j, z))
                })
                .collect()
        })
        .collect();

    let mut out: BTreeMap<Occupation, Complex64> = BTreeMap::new();
    let mut expansion: HashMap<Vec<u8>, Complex64> = HashMap::new();
    let mut next: HashMap<Vec<u8>, Complex64> = HashMap::new();

    for (occ, amp) in state.terms() {
        let mut norm = 1.0;
        let mut photons = Vec::new();
        for (slot, &idx) in active.iter().enumerate() {
            let n = occ.get(idx);
            norm *= sqrt_fact[n as usize];
            photons.extend(std::iter::repeat_n(slot, n as usize));
        }
        expansion.clear();
        expansion.insert(vec![0u8; m], amp / norm);
        for &src in &photons {
            next.clear();
            for (mono, coeff) in expansion.drain() {
                for &(dst, z) in &columns[src] {
                    let mut grown = mono.clone();
                    grown[dst] += 1;
                    *next.entry(grown).or_default() += coeff * z;
                }
            }
            std::mem::swap(&mut expansion, &mut next);
        }
        for (mono, coeff) in expansion.drain() {
            let mut target = occ.clone();
            let mut factor = 1.0;
            for (slot, &idx) in active.iter().enumerate() {
                target.0[idx] = mono[slot];
                factor *= sqrt_fact[mono[slot] as usize];
            }
            *out.entry(target).or_default() += coeff * factor;
        }
    }
    out.retain(|_, a| a.norm() >= PRUNE_TOLERANCE);
    FockState::from_terms(registry, out)
}

fn sqrt_factorials(n: usize) -> Vec<f64> {
    let mut v = Vec::with_capacity(n + 1);
    let mut f = 1.0f64;
    v.push(1.0);
    for k in 1..=n {
        f *= k as f64;
        v.push(f.sqrt());
    }
    v
}

/// A labelled element in a circuit.
#[derive(Debug, Clone)]
pub struct Element {
    pub label: String,
    pub unitary: ModeUnitary,
}

/// Ordered list of elements. Tracks which sink modes have been claimed so no
/// two elements dump photons into the same sink.
#[derive(Debug, Clone, Default)]
pub struct Circuit {
    elements: Vec<Element>,
    sinks: Vec<Mode>,
}

impl Circuit {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, label: impl Into<String>, unitary: ModeUnitary) {
        self.elements.push(Element {
            label: label.into(),
            unitary,
        });
    }

    /// Adds a polarizer whose blocked light goes to `sink`.
    pub fn push_polarizer(
        &mut self,
        registry: &ModeRegistry,
        label: impl Into<String>,
        port: &str,
        pass: Polarization,
        sink: &str,
    ) -> Result<()> {
        let u = polarizer(registry, port, pass, sink)?;
        self.claim_sink(Mode::new(sink, pass.orthogonal()))?;
        self.push(label, u);
        Ok(())
    }

    /// Adds a loss element of efficiency `eta` in front of `mode`.
    pub fn push_attenuator(
        &mut self,
        registry: &ModeRegistry,
        label: impl Into<String>,
        mode: Mode,
        sink: Mode,
        eta: f64,
    ) -> Result<()> {
        let u = attenuator(registry, mode, sink.clone(), eta)?;
        self.claim_sink(sink)?;
        self.push(label, u);
        Ok(())
    }

    fn claim_sink(&mut self, sink: Mode) -> Result<()> {
        if self.sinks.contains(&sink) {
            return Err(SimError::SinkReused(sink));
        }
        self.sinks.push(sink);
        Ok(())
    }

    pub fn elements(&self) -> &[Element] {
        &self.elements
    }

    pub fn sinks(&self) -> &[Mode] {
        &self.sinks
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn apply(&self, state: &FockState) -> Result<FockState> {
        let mut s = state.clone();
        for e in &self.elements {
            s = apply_unitary(&s, &e.unitary)?;
        }
        Ok(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fock::{qubit_to_fock, QubitPolarizationState};
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};
    use std::sync::Arc;

    fn reg() -> Arc<ModeRegistry> {
        ModeRegistry::beams(&["a", "b", "sink"], 4).unwrap()
    }

    fn photons(r: &Arc<ModeRegistry>, pairs: &[(Mode, u8)]) -> FockState {
        FockState::basis_state(r, Occupation::from_pairs(r, pairs).unwrap()).unwrap()
    }

    fn prob_on(s: &FockState, r: &ModeRegistry, spatial: &str) -> f64 {
        let (h, v) = r.pol_pair(spatial).unwrap();
        s.terms()
            .filter(|(o, _)| o.get(h) + o.get(v) > 0)
            .map(|(_, a)| a.norm_sqr())
            .sum()
    }

    #[test]
    fn identity_leaves_state_unchanged() {
        let r = reg();
        let s = qubit_to_fock(&r, QubitPolarizationState::new(0.4, 1.0), "a").unwrap();
        let id = ModeUnitary::identity(vec![Mode::h("a"), Mode::v("a")]).unwrap();
        let out = apply_unitary(&s, &id).unwrap();
        for (o, a) in s.terms() {
            assert_eq!(out.amplitude(o), *a);
        }
    }

    #[test]
    fn beam_splitter_splits_evenly_for_both_polarizations() {
        let r = reg();
        for conv in [BsConvention::Hadamard, BsConvention::Symmetric] {
            let bs = bs_50_50(&r, "a", "b", conv).unwrap();
            assert!(unitarity_deviation(bs.matrix()) < 1e-12);
            for pol in Polarization::BOTH {
                let s = photons(&r, &[(Mode::new("a", pol), 1)]);
                let out = apply_unitary(&s, &bs).unwrap();
                assert!((prob_on(&out, &r, "a") - 0.5).abs() < 1e-12);
                assert!((prob_on(&out, &r, "b") - 0.5).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn hadamard_beam_splitter_is_an_involution() {
        let r = reg();
        let bs = bs_50_50(&r, "a", "b", BsConvention::Hadamard).unwrap();
        let sq = bs.matrix() * bs.matrix();
        assert!((sq - DMatrix::<Complex64>::identity(4, 4)).norm() < 1e-12);
    }

    #[test]
    fn hong_ou_mandel_dip() {
        // Hand expansion: (b†_a + b†_b)(b†_a − b†_b)/2 has no b†_a b†_b term.
        let r = reg();
        let s = photons(&r, &[(Mode::h("a"), 1), (Mode::h("b"), 1)]);
        for conv in [BsConvention::Hadamard, BsConvention::Symmetric] {
            let out = apply_unitary(&s, &bs_50_50(&r, "a", "b", conv).unwrap()).unwrap();
            let coinc = Occupation::from_pairs(&r, &[(Mode::h("a"), 1), (Mode::h("b"), 1)]).unwrap();
            assert!(out.amplitude(&coinc).norm() < 1e-15);
            let both_a = Occupation::from_pairs(&r, &[(Mode::h("a"), 2)]).unwrap();
            assert!((out.amplitude(&both_a).norm_sqr() - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn pbs_transmits_h_reflects_v() {
        let r = reg();
        let p = pbs(&r, "a", "b", PbsConvention::TransmitH).unwrap();
        let h = apply_unitary(&photons(&r, &[(Mode::h("a"), 1)]), &p).unwrap();
        let oh = Occupation::from_pairs(&r, &[(Mode::h("a"), 1)]).unwrap();
        assert!((h.amplitude(&oh).norm() - 1.0).abs() < 1e-15);
        let v = apply_unitary(&photons(&r, &[(Mode::v("a"), 1)]), &p).unwrap();
        let ov = Occupation::from_pairs(&r, &[(Mode::v("b"), 1)]).unwrap();
        assert!((v.amplitude(&ov).norm() - 1.0).abs() < 1e-15);
        let hv = apply_unitary(&photons(&r, &[(Mode::h("a"), 1), (Mode::v("a"), 1)]), &p).unwrap();
        let split = Occupation::from_pairs(&r, &[(Mode::h("a"), 1), (Mode::v("b"), 1)]).unwrap();
        assert!((hv.amplitude(&split).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pbs_alternate_convention() {
        let r = reg();
        let p = pbs(&r, "a", "b", PbsConvention::TransmitV).unwrap();
        let h = apply_unitary(&photons(&r, &[(Mode::h("a"), 1)]), &p).unwrap();
        let oh = Occupation::from_pairs(&r, &[(Mode::h("b"), 1)]).unwrap();
        assert!((h.amplitude(&oh).norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rotator_cases() {
        let r = reg();
        let id = rotator(&r, "a", 0.0, 0.7).unwrap();
        assert!((id.matrix() - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-15);
        let q = rotator(&r, "a", FRAC_PI_2, 0.0).unwrap();
        let out = apply_unitary(&photons(&r, &[(Mode::h("a"), 1)]), &q).unwrap();
        let ov = Occupation::from_pairs(&r, &[(Mode::v("a"), 1)]).unwrap();
        assert!((out.amplitude(&ov).norm() - 1.0).abs() < 1e-15);
        for &(t, p) in &[(0.3, 0.2), (1.1, -2.0), (FRAC_PI_4, 3.0)] {
            let fwd = rotator(&r, "a", t, p).unwrap();
            let back = rotator(&r, "a", -t, p).unwrap();
            let prod = back.matrix() * fwd.matrix();
            assert!((prod - DMatrix::<Complex64>::identity(2, 2)).norm() < 1e-12);
        }
    }

    #[test]
    fn rotator_on_h_gives_qubit_state() {
        let r = reg();
        let q = QubitPolarizationState::new(0.9, 0.4);
        let rot = rotator(&r, "a", q.theta, q.phi).unwrap();
        let out = apply_unitary(&photons(&r, &[(Mode::h("a"), 1)]), &rot).unwrap();
        let want = qubit_to_fock(&r, q, "a").unwrap();
        assert!((out.fidelity(&want).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn polarizer_routes_blocked_light_to_sink() {
        let r = reg();
        let p = polarizer(&r, "a", Polarization::H, "sink").unwrap();
        let h = apply_unitary(&photons(&r, &[(Mode::h("a"), 1)]), &p).unwrap();
        assert!((prob_on(&h, &r, "a") - 1.0).abs() < 1e-15);
        let v = apply_unitary(&photons(&r, &[(Mode::v("a"), 1)]), &p).unwrap();
        assert_eq!(prob_on(&v, &r, "a"), 0.0);
        let d = qubit_to_fock(&r, QubitPolarizationState::new(FRAC_PI_4, 0.0), "a").unwrap();
        let out = apply_unitary(&d, &p).unwrap();
        assert!((prob_on(&out, &r, "a") - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sinks_cannot_be_shared() {
        let r = reg();
        let mut c = Circuit::new();
        c.push_polarizer(&r, "P1", "a", Polarization::H, "sink").unwrap();
        let err = c
            .push_polarizer(&r, "P2", "b", Polarization::H, "sink")
            .unwrap_err();
        assert_eq!(err, SimError::SinkReused(Mode::v("sink")));
        // The other polarization of the same sink label is a distinct mode.
        c.push_polarizer(&r, "P3", "b", Polarization::V, "sink").unwrap();
    }

    #[test]
    fn missing_modes_are_errors() {
        let r = ModeRegistry::beams(&["a"], 2).unwrap();
        assert!(matches!(
            bs_50_50(&r, "a", "b", BsConvention::Hadamard),
            Err(SimError::UnknownMode(_))
        ));
        assert!(matches!(pbs(&r, "a", "a", PbsConvention::TransmitH), Err(SimError::SamePort(_))));
        assert!(matches!(rotator(&r, "z", 0.1, 0.0), Err(SimError::UnknownMode(_))));
        let other = ModeRegistry::beams(&["x", "y"], 2).unwrap();
        let bs = bs_50_50(&other, "x", "y", BsConvention::Hadamard).unwrap();
        let s = FockState::vacuum(&r);
        assert!(matches!(apply_unitary(&s, &bs), Err(SimError::UnknownMode(_))));
    }

    #[test]
    fn non_unitary_rejected() {
        let m = DMatrix::from_element(2, 2, c(1.0));
        assert!(matches!(
            ModeUnitary::new(vec![Mode::h("a"), Mode::v("a")], m),
            Err(SimError::NotUnitary(_))
        ));
    }

    #[test]
    fn attenuator_scales_single_photon_probability() {
        let r = reg();
        let a = attenuator(&r, Mode::h("a"), Mode::h("sink"), 0.6).unwrap();
        let out = apply_unitary(&photons(&r, &[(Mode::h("a"), 1)]), &a).unwrap();
        assert!((prob_on(&out, &r, "a") - 0.6).abs() < 1e-12);
        assert!(attenuator(&r, Mode::h("a"), Mode::h("sink"), 0.0).is_err());
    }
}
