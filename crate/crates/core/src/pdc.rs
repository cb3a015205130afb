//! Type-II down-conversion source.
//!
//! A single pass is the truncated series `Σ_k χ^k K^k / k! |vac⟩` with the
//! singlet pair-creation operator `K = a†_H b†_V − a†_V b†_H`. Every power of
//! `K` is applied through [`FockState::create`], so multi-pair amplitudes come
//! out of the bosonic factors rather than being written down.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SimError};
use crate::fock::{FockState, Mode, ModeRegistry};

pub const MAX_SUPPORTED_PAIRS: usize = 3;
pub const DEFAULT_CHI: f64 = 0.1;
pub const DEFAULT_MAX_PAIRS: usize = 2;

/// Beam labels of the two passes: `(signal, idler)`.
pub const FIRST_PASS: (&str, &str) = ("2", "3");
pub const SECOND_PASS: (&str, &str) = ("1", "4");
pub const SOURCE_BEAMS: [&str; 4] = ["1", "2", "3", "4"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdcParams {
    pub chi: f64,
    /// Pair amplitude of the second pass (beams 1 and 4); `chi` when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_second: Option<f64>,
    pub max_pairs: usize,
}

impl Default for PdcParams {
    fn default() -> Self {
        PdcParams {
            chi: DEFAULT_CHI,
            chi_second: None,
            max_pairs: DEFAULT_MAX_PAIRS,
        }
    }
}

impl PdcParams {
    pub fn new(chi: f64, max_pairs: usize) -> Result<Self> {
        let p = PdcParams {
            chi,
            chi_second: None,
            max_pairs,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let ok_chi = |x: f64| x.is_finite() && x >= 0.0;
        if !ok_chi(self.chi) || !self.chi_second.is_none_or(ok_chi) {
            return Err(SimError::InvalidParameter(format!(
                "chi must be finite and non-negative, got {} / {:?}",
                self.chi, self.chi_second
            )));
        }
        if !(1..=MAX_SUPPORTED_PAIRS).contains(&self.max_pairs) {
            return Err(SimError::InvalidParameter(format!(
                "max_pairs must be in 1..={MAX_SUPPORTED_PAIRS}, got {}",
                self.max_pairs
            )));
        }
        Ok(())
    }

    pub fn second_chi(&self) -> f64 {
        self.chi_second.unwrap_or(self.chi)
    }
}

/// Normalized single-pass state on `registry`, truncated at `max_pairs` pairs.
pub fn pdc_two_mode(
    registry: &Arc<ModeRegistry>,
    signal: &str,
    idler: &str,
    chi: f64,
    max_pairs: usize,
) -> Result<FockState> {
    if signal == idler {
        return Err(SimError::SamePort(signal.to_string()));
    }
    registry.pol_pair(signal)?;
    registry.pol_pair(idler)?;
    let needed = 2 * max_pairs;
    if registry.max_total_photons() < needed {
        return Err(SimError::PhotonBudget {
            photons: needed,
            budget: registry.max_total_photons(),
        });
    }
    let (sh, sv) = (Mode::h(signal), Mode::v(signal));
    let (ih, iv) = (Mode::h(idler), Mode::v(idler));
    let pair_op = |s: &FockState| -> Result<FockState> {
        let hv = s.create(&sh)?.create(&iv)?;
        let vh = s.create(&sv)?.create(&ih)?;
        hv.add(&vh.scaled(Complex64::new(-1.0, 0.0)))
    };

    let mut power = FockState::vacuum(registry);
    let mut total = power.clone();
    let mut coeff = 1.0;
    for k in 1..=max_pairs {
        power = pair_op(&power)?;
        coeff *= chi / k as f64;
        total = total.add(&power.scaled(Complex64::new(coeff, 0.0)))?;
    }
    Ok(total.normalized())
}

/// Both passes of the reflected pump: beams (2,3) then (1,4). The product is
/// truncated to `max_pairs` pairs in total and renormalized.
pub fn double_pass_source(params: &PdcParams) -> Result<FockState> {
    params.validate()?;
    let budget = 2 * params.max_pairs;
    let first = ModeRegistry::beams(&[FIRST_PASS.0, FIRST_PASS.1], budget)?;
    let second = ModeRegistry::beams(&[SECOND_PASS.0, SECOND_PASS.1], budget)?;
    let a = pdc_two_mode(&first, FIRST_PASS.0, FIRST_PASS.1, params.chi, params.max_pairs)?;
    let b = pdc_two_mode(
        &second,
        SECOND_PASS.0,
        SECOND_PASS.1,
        params.second_chi(),
        params.max_pairs,
    )?;
    let product = a.tensor(&b)?.truncate(budget);
    product
        .embed(&source_registry(params.max_pairs)?)
        .map(|s| s.normalized())
}

/// Registry of beams 1-4 with room for `max_pairs` pairs.
pub fn source_registry(max_pairs: usize) -> Result<Arc<ModeRegistry>> {
    ModeRegistry::beams(&SOURCE_BEAMS, 2 * max_pairs)
}

/// `(m, n)`: `m` pairs in beams 1 & 4, `n` pairs in beams 2 & 3.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Sector {
    pub m: usize,
    pub n: usize,
}

impl Sector {
    pub const fn new(m: usize, n: usize) -> Self {
        Sector { m, n }
    }

    /// All sectors with `m + n ≤ max_pairs`, by total pair number and then
    /// with more pairs in beams 1 & 4 first.
    pub fn all(max_pairs: usize) -> Vec<Sector> {
        let mut v = Vec::new();
        for total in 0..=max_pairs {
            for m in (0..=total).rev() {
                v.push(Sector::new(m, total - m));
            }
        }
        v
    }
}

impl fmt::Display for Sector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.m, self.n)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SectorWeight {
    pub m: usize,
    pub n: usize,
    pub weight: f64,
}

impl SectorWeight {
    pub fn sector(&self) -> Sector {
        Sector::new(self.m, self.n)
    }
}

/// Splits a source state into its `(m, n)` components. Each returned state is
/// normalized; weights sum to the squared norm of `state`.
pub fn sector_decompose(state: &FockState) -> Result<Vec<(SectorWeight, FockState)>> {
    let reg = state.registry();
    let idx = |label: &str| reg.pol_pair(label);
    let (h1, v1) = idx(SECOND_PASS.0)?;
    let (h4, v4) = idx(SECOND_PASS.1)?;
    let (h2, v2) = idx(FIRST_PASS.0)?;
    let (h3, v3) = idx(FIRST_PASS.1)?;
    let second: [usize; 4] = [h1, v1, h4, v4];
    let first: [usize; 4] = [h2, v2, h3, v3];

    let mut by_sector: std::collections::BTreeMap<Sector, Vec<_>> = Default::default();
    for (occ, amp) in state.terms() {
        let p14 = FockState::photons_on(occ, &second);
        let p23 = FockState::photons_on(occ, &first);
        if !p14.is_multiple_of(2) || !p23.is_multiple_of(2) {
            return Err(SimError::OddPassPhotons(format!(
                "{p14} photons in beams 1&4, {p23} in beams 2&3"
            )));
        }
        by_sector
            .entry(Sector::new(p14 / 2, p23 / 2))
            .or_default()
            .push((occ.clone(), *amp));
    }
    let mut out: Vec<(SectorWeight, FockState)> = by_sector
        .into_iter()
        .map(|(sector, terms)| {
            let s = FockState::from_terms(reg, terms)?;
            let w = SectorWeight {
                m: sector.m,
                n: sector.n,
                weight: s.norm_sqr(),
            };
            Ok((w, s.normalized()))
        })
        .collect::<Result<_>>()?;
    out.sort_by_key(|(w, _)| {
        let s = w.sector();
        (s.m + s.n, std::cmp::Reverse(s.m))
    });
    Ok(out)
}
