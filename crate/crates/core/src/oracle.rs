//! Dense reference engine.
//!
//! Shares no arithmetic with the sparse path. States are full amplitude
//! vectors over every occupation of the registry up to the photon budget, in
//! lexicographic order of the count vectors (mode 0 most significant, counts
//! ascending). A mode unitary `U` is applied through the many-body operator
//! `exp(i Σ h_jk a†_j a_k)` with `h = −i log U`, built per photon-number block
//! by dense matrix exponentiation. The source is the operator series of the
//! pair generators applied as dense matrices, and detection is plain
//! enumeration of the basis.
//!
//! `log U` takes eigenphases in `(−π, π]`; an eigenvalue at −1 gets `+π`. The
//! many-body operator depends only on `exp(ih) = U`, so the branch choice
//! cannot change results.

use std::collections::{BTreeMap, HashMap};
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::detection::{DetectorKind, FiringPattern, MeasurementSetup};
use crate::error::{Result, SimError};
use crate::experiment::{build_circuit, evaluate, scenario_grid, BuiltCircuit, ScenarioConfig};
use crate::fock::{FockState, Mode, ModeRegistry, Occupation, Polarization, QubitPolarizationState};
use crate::optics::{apply_unitary, ModeUnitary};
use crate::pdc::{PdcParams, Sector, FIRST_PASS, SECOND_PASS, SOURCE_BEAMS};

/// The oracle refuses anything larger than this.
pub const MAX_ORACLE_PAIRS: usize = 2;

#[derive(Debug, Clone)]
pub struct DenseState {
    modes: Vec<Mode>,
    max_photons: usize,
    basis: Vec<Vec<u8>>,
    index: HashMap<Vec<u8>, usize>,
    amps: DVector<Complex64>,
}

/// All count vectors over `n` modes with total ≤ `max`, lexicographic.
fn enumerate(n: usize, max: usize) -> Vec<Vec<u8>> {
    fn rec(prefix: &mut Vec<u8>, n: usize, left: usize, out: &mut Vec<Vec<u8>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for k in 0..=left {
            prefix.push(k as u8);
            rec(prefix, n, left - k, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(&mut Vec::with_capacity(n), n, max, &mut out);
    out
}

/// Number of multisets of size ≤ `max` over `n` modes: C(n + max, max).
pub fn basis_dimension(n: usize, max: usize) -> usize {
    (1..=max).fold(1usize, |acc, k| acc * (n + k) / k)
}

impl DenseState {
    pub fn zeros(modes: Vec<Mode>, max_photons: usize) -> Self {
        let basis = enumerate(modes.len(), max_photons);
        let index = basis.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect();
        let amps = DVector::zeros(basis.len());
        DenseState {
            modes,
            max_photons,
            basis,
            index,
            amps,
        }
    }

    pub fn vacuum(modes: Vec<Mode>, max_photons: usize) -> Self {
        let mut s = Self::zeros(modes, max_photons);
        s.amps[0] = Complex64::new(1.0, 0.0);
        s
    }

    pub fn from_fock(state: &FockState) -> Self {
        let reg = state.registry();
        let mut s = Self::zeros(reg.modes().to_vec(), reg.max_total_photons());
        for (o, a) in state.terms() {
            let i = s.index[o.counts()];
            s.amps[i] = *a;
        }
        s
    }

    pub fn dimension(&self) -> usize {
        self.basis.len()
    }

    pub fn modes(&self) -> &[Mode] {
        &self.modes
    }

    pub fn basis(&self) -> &[Vec<u8>] {
        &self.basis
    }

    pub fn amplitudes(&self) -> &DVector<Complex64> {
        &self.amps
    }

    pub fn amplitude(&self, counts: &[u8]) -> Complex64 {
        self.index
            .get(counts)
            .map_or(Complex64::default(), |&i| self.amps[i])
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.norm_squared()
    }

    fn normalize(&mut self) {
        let n = self.amps.norm();
        if n > 0.0 {
            self.amps /= Complex64::new(n, 0.0);
        }
    }

    fn mode_index(&self, m: &Mode) -> Result<usize> {
        self.modes
            .iter()
            .position(|x| x == m)
            .ok_or_else(|| SimError::UnknownMode(m.clone()))
    }

    /// Largest amplitude difference against a sparse state on the same modes.
    pub fn max_deviation(&self, other: &FockState) -> f64 {
        let o = DenseState::from_fock(other);
        max_abs((&self.amps - &o.amps).iter())
    }

    /// `Σ_k coeff · a†_create… a_annihilate…` applied as a dense matrix: used
    /// for pair generators.
    fn ladder_matrix(&self, terms: &[(Complex64, Vec<usize>)]) -> DMatrix<Complex64> {
        let d = self.dimension();
        let mut m = DMatrix::zeros(d, d);
        for (col, b) in self.basis.iter().enumerate() {
            for (coeff, creators) in terms {
                let mut occ = b.clone();
                let mut amp = *coeff;
                for &i in creators {
                    occ[i] += 1;
                    amp *= f64::from(occ[i]).sqrt();
                }
                if let Some(&row) = self.index.get(&occ) {
                    m[(row, col)] += amp;
                }
            }
        }
        m
    }
}

fn max_abs<'a>(it: impl Iterator<Item = &'a Complex64>) -> f64 {
    it.map(|z| z.norm()).fold(0.0, f64::max)
}

/// `h = −i log U` through the Schur form of the (normal) matrix `U`.
pub fn unitary_log(u: &DMatrix<Complex64>) -> Result<DMatrix<Complex64>> {
    let (q, t) = u.clone().schur().unpack();
    let n = u.nrows();
    let mut phases = DMatrix::zeros(n, n);
    let mut rebuilt = DMatrix::zeros(n, n);
    for k in 0..n {
        let mut arg = t[(k, k)].arg();
        if arg <= -std::f64::consts::PI + 1e-12 {
            arg = std::f64::consts::PI;
        }
        phases[(k, k)] = Complex64::new(arg, 0.0);
        rebuilt[(k, k)] = Complex64::from_polar(1.0, arg);
    }
    let residual = max_abs((&q * rebuilt * q.adjoint() - u).iter());
    if residual > 1e-10 {
        return Err(SimError::IllConditionedLog(residual));
    }
    Ok(&q * phases * q.adjoint())
}

/// Many-body propagator of `h` on the `photons`-photon block of `m` modes.
fn block_propagator(h: &DMatrix<Complex64>, photons: usize) -> (Vec<Vec<u8>>, DMatrix<Complex64>) {
    let m = h.nrows();
    let local: Vec<Vec<u8>> = enumerate(m, photons)
        .into_iter()
        .filter(|b| b.iter().map(|&x| x as usize).sum::<usize>() == photons)
        .collect();
    let index: HashMap<&[u8], usize> = local.iter().enumerate().map(|(i, b)| (b.as_slice(), i)).collect();
    let d = local.len();
    let mut g = DMatrix::<Complex64>::zeros(d, d);
    for (col, s) in local.iter().enumerate() {
        for k in 0..m {
            if s[k] == 0 {
                continue;
            }
            for j in 0..m {
                let coeff = h[(j, k)];
                if coeff == Complex64::default() {
                    continue;
                }
                let mut t = s.clone();
                let lower = f64::from(t[k]).sqrt();
                t[k] -= 1;
                t[j] += 1;
                let raise = f64::from(t[j]).sqrt();
                g[(index[t.as_slice()], col)] += coeff * lower * raise;
            }
        }
    }
    let prop = (g * Complex64::new(0.0, 1.0)).exp();
    (local, prop)
}

/// Applies `u` by exponentiating its quadratic generator.
pub fn dense_apply(state: &DenseState, u: &ModeUnitary) -> Result<DenseState> {
    let active: Vec<usize> = u
        .modes()
        .iter()
        .map(|m| state.mode_index(m))
        .collect::<Result<_>>()?;
    let h = unitary_log(u.matrix())?;
    let blocks: Vec<(Vec<Vec<u8>>, DMatrix<Complex64>)> =
        (0..=state.max_photons).map(|k| block_propagator(&h, k)).collect();
    let block_index: Vec<HashMap<Vec<u8>, usize>> = blocks
        .iter()
        .map(|(local, _)| local.iter().cloned().enumerate().map(|(i, b)| (b, i)).collect())
        .collect();

    let mut out = DenseState::zeros(state.modes.clone(), state.max_photons);
    for (idx, counts) in state.basis.iter().enumerate() {
        let amp = state.amps[idx];
        if amp == Complex64::default() {
            continue;
        }
        let local: Vec<u8> = active.iter().map(|&i| counts[i]).collect();
        let k: usize = local.iter().map(|&x| x as usize).sum();
        let (targets, prop) = &blocks[k];
        let col = block_index[k][&local];
        for (row, t) in targets.iter().enumerate() {
            let z = prop[(row, col)];
            if z == Complex64::default() {
                continue;
            }
            let mut dst = counts.clone();
            for (slot, &i) in active.iter().enumerate() {
                dst[i] = t[slot];
            }
            out.amps[out.index[&dst]] += z * amp;
        }
    }
    Ok(out)
}

/// Dense counterpart of the double-pass source on beams 1-4.
pub fn oracle_source(params: &PdcParams) -> Result<DenseState> {
    params.validate()?;
    if params.max_pairs > MAX_ORACLE_PAIRS {
        return Err(SimError::InvalidParameter(format!(
            "oracle supports at most {MAX_ORACLE_PAIRS} pairs"
        )));
    }
    let modes: Vec<Mode> = SOURCE_BEAMS
        .iter()
        .flat_map(|l| [Mode::h(*l), Mode::v(*l)])
        .collect();
    let vac = DenseState::vacuum(modes, 2 * params.max_pairs);
    let gen = |(s, i): (&str, &str)| -> Result<DMatrix<Complex64>> {
        let sh = vac.mode_index(&Mode::h(s))?;
        let sv = vac.mode_index(&Mode::v(s))?;
        let ih = vac.mode_index(&Mode::h(i))?;
        let iv = vac.mode_index(&Mode::v(i))?;
        Ok(vac.ladder_matrix(&[
            (Complex64::new(1.0, 0.0), vec![sh, iv]),
            (Complex64::new(-1.0, 0.0), vec![sv, ih]),
        ]))
    };
    let k_first = gen(FIRST_PASS)?;
    let k_second = gen(SECOND_PASS)?;
    // χ^p K^p / p! applied to `v`, for p = 0..=upto.
    let series = |k: &DMatrix<Complex64>, chi: f64, upto: usize, v: &DVector<Complex64>| {
        let mut terms = vec![v.clone()];
        for p in 1..=upto {
            let next = k * &terms[p - 1] * Complex64::new(chi / p as f64, 0.0);
            terms.push(next);
        }
        terms
    };
    let mut out = vac.clone();
    out.amps.fill(Complex64::default());
    let first = series(&k_first, params.chi, params.max_pairs, &vac.amps);
    for (p, ap) in first.iter().enumerate() {
        for bq in series(&k_second, params.second_chi(), params.max_pairs - p, ap) {
            out.amps += bq;
        }
    }
    out.normalize();
    Ok(out)
}

/// Sector of a count vector on the source modes (beams 1-4, H/V each).
fn source_sector(modes: &[Mode], counts: &[u8]) -> Sector {
    let mut p14 = 0usize;
    let mut p23 = 0usize;
    for (m, &c) in modes.iter().zip(counts) {
        match m.spatial.as_str() {
            "1" | "4" => p14 += c as usize,
            "2" | "3" => p23 += c as usize,
            _ => {}
        }
    }
    Sector::new(p14 / 2, p23 / 2)
}

/// Sector weights of the dense source, by brute-force summation.
pub fn oracle_sector_weights(source: &DenseState) -> BTreeMap<Sector, f64> {
    let mut w = BTreeMap::new();
    for (i, b) in source.basis.iter().enumerate() {
        let p = source.amps[i].norm_sqr();
        if p > 0.0 {
            *w.entry(source_sector(&source.modes, b)).or_insert(0.0) += p;
        }
    }
    w
}

/// Oracle view of one branch.
#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub probability: f64,
    /// 2×2 single-photon block `(H, V)` of the output beam, plus photon-number
    /// masses, both normalized by `probability`.
    pub single_photon_block: Option<DMatrix<Complex64>>,
    pub photon_number_weights: BTreeMap<usize, f64>,
    pub max_amplitude: f64,
}

impl OracleOutcome {
    pub fn fidelity(&self, target: QubitPolarizationState) -> f64 {
        let Some(block) = &self.single_photon_block else {
            return 0.0;
        };
        let t = DVector::from_column_slice(&target.amplitudes());
        (t.adjoint() * block * t)[(0, 0)].re
    }
}

/// Exhaustive evaluation of a firing pattern over the dense basis. Branches are
/// returned in the same order as [`FiringPattern::branches`].
pub fn oracle_pattern_probability(
    state: &DenseState,
    pattern: &FiringPattern,
    setup: &MeasurementSetup,
) -> Result<Vec<OracleOutcome>> {
    let mode_pos = |m: &Mode| state.mode_index(m);
    let port_modes: Vec<Vec<usize>> = setup
        .ports
        .iter()
        .map(|p| p.modes.iter().map(mode_pos).collect())
        .collect::<Result<_>>()?;
    let out_modes: Vec<usize> = setup.outputs.iter().map(mode_pos).collect::<Result<_>>()?;
    let find = |name: &str| {
        setup
            .ports
            .iter()
            .position(|p| p.name == name)
            .ok_or_else(|| SimError::UnknownPort(name.to_string()))
    };
    let branches = pattern.branches();

    // Predicate for one branch, spelled out in terms of per-port counts.
    let accepts = |counts: &[usize], branch: &[String]| -> Result<bool> {
        let click = |name: &str| -> Result<bool> { Ok(counts[find(name)?] >= 1) };
        for n in &pattern.fired {
            if !click(n)? {
                return Ok(false);
            }
        }
        for n in &pattern.silent {
            if click(n)? {
                return Ok(false);
            }
        }
        for (group, chosen) in pattern.exactly_one_of.iter().zip(branch) {
            for n in group {
                if click(n)? != (n == chosen) {
                    return Ok(false);
                }
            }
        }
        for (n, c) in &pattern.exact_counts {
            let k = find(n)?;
            if setup.ports[k].model.kind != DetectorKind::NumberResolving || counts[k] != *c {
                return Ok(false);
            }
        }
        Ok(true)
    };

    // Fidelity blocks need outputs laid out as (H, V) of one beam.
    let qubit_output = matches!(
        (setup.outputs.first(), setup.outputs.get(1), setup.outputs.len()),
        (Some(a), Some(b), 2) if a.pol == Polarization::H && b.pol == Polarization::V
    );

    let mut results = Vec::with_capacity(branches.len());
    for branch in &branches {
        let mut prob = 0.0;
        let mut max_amplitude: f64 = 0.0;
        // env → (H amplitude, V amplitude) of the one-photon output component
        let mut one_photon: BTreeMap<Vec<u8>, [Complex64; 2]> = BTreeMap::new();
        let mut weights: BTreeMap<usize, f64> = BTreeMap::new();
        for (i, b) in state.basis.iter().enumerate() {
            let amp = state.amps[i];
            if amp.norm_sqr() == 0.0 {
                continue;
            }
            let counts: Vec<usize> = port_modes
                .iter()
                .map(|ms| ms.iter().map(|&k| b[k] as usize).sum())
                .collect();
            if !accepts(&counts, branch)? {
                continue;
            }
            prob += amp.norm_sqr();
            max_amplitude = max_amplitude.max(amp.norm());
            let n_out: usize = out_modes.iter().map(|&k| b[k] as usize).sum();
            *weights.entry(n_out).or_insert(0.0) += amp.norm_sqr();
            if n_out == 1 && qubit_output {
                let mut env = b.clone();
                for &k in &out_modes {
                    env[k] = 0;
                }
                let slot = if b[out_modes[0]] == 1 { 0 } else { 1 };
                one_photon.entry(env).or_insert([Complex64::default(); 2])[slot] += amp;
            }
        }
        let (block, weights) = if prob > 0.0 {
            let mut block = DMatrix::<Complex64>::zeros(2, 2);
            for v in one_photon.values() {
                for a in 0..2 {
                    for c in 0..2 {
                        block[(a, c)] += v[a] * v[c].conj();
                    }
                }
            }
            block /= Complex64::new(prob, 0.0);
            let weights = weights.into_iter().map(|(k, w)| (k, w / prob)).collect();
            (Some(block), weights)
        } else {
            (None, BTreeMap::new())
        };
        results.push(OracleOutcome {
            probability: prob,
            single_photon_block: block,
            photon_number_weights: weights,
            max_amplitude,
        });
    }
    Ok(results)
}

/// Embeds the dense source (beams 1-4) into a circuit's mode list.
fn embed_dense(source: &DenseState, modes: &[Mode], max_photons: usize) -> Result<DenseState> {
    let mut out = DenseState::zeros(modes.to_vec(), max_photons);
    let map: Vec<usize> = source
        .modes
        .iter()
        .map(|m| out.mode_index(m))
        .collect::<Result<_>>()?;
    for (i, b) in source.basis.iter().enumerate() {
        if source.amps[i] == Complex64::default() {
            continue;
        }
        let mut counts = vec![0u8; modes.len()];
        for (k, &c) in b.iter().enumerate() {
            counts[map[k]] = c;
        }
        let j = out.index[&counts];
        out.amps[j] = source.amps[i];
    }
    Ok(out)
}

/// Projection of a dense source onto one sector, renormalized.
fn dense_sector(source: &DenseState, sector: Sector) -> DenseState {
    let mut s = source.clone();
    for (i, b) in source.basis.iter().enumerate() {
        if source_sector(&source.modes, b) != sector {
            s.amps[i] = Complex64::default();
        }
    }
    s.normalize();
    s
}

/// Runs a dense state on (a subset of) the circuit's modes through every
/// element of `built`.
pub fn oracle_propagate(built: &BuiltCircuit, state: &DenseState) -> Result<DenseState> {
    let mut d = embed_dense(state, built.registry.modes(), built.registry.max_total_photons())?;
    for e in built.circuit.elements() {
        d = dense_apply(&d, &e.unitary)?;
    }
    Ok(d)
}

/// Oracle evaluation of a scenario at its own `rot1`.
#[derive(Debug, Clone)]
pub struct OracleEvaluation {
    pub sector_weights: BTreeMap<Sector, f64>,
    pub branch_probabilities: Vec<f64>,
    pub branch_fidelities: Vec<f64>,
    pub conditional_fidelity: f64,
    /// Per-sector, per-branch conditional coincidence probabilities.
    pub sector_probabilities: BTreeMap<Sector, Vec<f64>>,
    pub sector_max_amplitudes: BTreeMap<Sector, Vec<f64>>,
}

pub fn oracle_evaluate(config: &ScenarioConfig) -> Result<OracleEvaluation> {
    let built = build_circuit(config)?;
    let source = oracle_source(&config.params)?;
    let run = |s: &DenseState| -> Result<Vec<OracleOutcome>> {
        let d = oracle_propagate(&built, s)?;
        oracle_pattern_probability(&d, &built.pattern, &built.setup)
    };
    let outs = run(&source)?;
    let branch_probabilities: Vec<f64> = outs.iter().map(|o| o.probability).collect();
    let branch_fidelities: Vec<f64> = outs
        .iter()
        .zip(&built.branch_targets)
        .map(|(o, t)| o.fidelity(*t))
        .collect();
    let total: f64 = branch_probabilities.iter().sum();
    let conditional_fidelity = if total > 0.0 {
        branch_probabilities
            .iter()
            .zip(&branch_fidelities)
            .map(|(p, f)| p * f)
            .sum::<f64>()
            / total
    } else {
        0.0
    };
    let sector_weights = oracle_sector_weights(&source);
    let mut sector_probabilities = BTreeMap::new();
    let mut sector_max_amplitudes = BTreeMap::new();
    for &sector in sector_weights.keys() {
        let outs = run(&dense_sector(&source, sector))?;
        sector_probabilities.insert(sector, outs.iter().map(|o| o.probability).collect());
        sector_max_amplitudes.insert(sector, outs.iter().map(|o| o.max_amplitude).collect());
    }
    Ok(OracleEvaluation {
        sector_weights,
        branch_probabilities,
        branch_fidelities,
        conditional_fidelity,
        sector_probabilities,
        sector_max_amplitudes,
    })
}

/// Haar-random unitary from the QR decomposition of a complex Gaussian matrix,
/// with the phases of `R`'s diagonal folded back into `Q`.
pub fn random_unitary<R: Rng>(n: usize, rng: &mut R) -> DMatrix<Complex64> {
    let z = DMatrix::from_fn(n, n, |_, _| {
        Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal))
    });
    let qr = z.qr();
    let (mut q, r) = (qr.q(), qr.r());
    for j in 0..n {
        let d = r[(j, j)];
        let phase = if d.norm() > 0.0 { d / d.norm() } else { Complex64::new(1.0, 0.0) };
        for i in 0..n {
            q[(i, j)] *= phase;
        }
    }
    q
}

/// Random state with up to `max` photons over the registry.
pub fn random_state<R: Rng>(registry: &Arc<ModeRegistry>, rng: &mut R) -> Result<FockState> {
    let mut terms = Vec::new();
    for b in enumerate(registry.len(), registry.max_total_photons()) {
        if rng.gen_bool(0.5) {
            let amp = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
            terms.push((Occupation(b), amp));
        }
    }
    if terms.is_empty() {
        terms.push((Occupation::zeros(registry.len()), Complex64::new(1.0, 0.0)));
    }
    Ok(FockState::from_terms(registry, terms)?.normalized())
}

/// Result of one sparse-versus-oracle comparison.
#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: String,
    pub deviation: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, deviation: f64, tolerance: f64) -> Self {
        Check {
            name: name.into(),
            deviation,
            tolerance,
            passed: deviation <= tolerance,
        }
    }
}

/// Sparse-versus-dense agreement on `pairs` random `(state, unitary)`
/// applications over two beams (four modes) with four photons.
pub fn verify_random_applications(pairs: usize, seed: u64) -> Result<Check> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let registry = ModeRegistry::beams(&["a", "b"], 4)?;
    let mut worst: f64 = 0.0;
    for _ in 0..pairs {
        let state = random_state(&registry, &mut rng)?;
        let k = rng.gen_range(1..=registry.len());
        let mut chosen: Vec<Mode> = registry.modes().to_vec();
        for i in (1..chosen.len()).rev() {
            chosen.swap(i, rng.gen_range(0..=i));
        }
        chosen.truncate(k);
        let u = ModeUnitary::new(chosen, random_unitary(k, &mut rng))?;
        let sparse = apply_unitary(&state, &u)?;
        let dense = dense_apply(&DenseState::from_fock(&state), &u)?;
        worst = worst.max(dense.max_deviation(&sparse));
    }
    Ok(Check::new(
        format!("{pairs} random unitary applications (amplitude)"),
        worst,
        1e-8,
    ))
}

/// Compares every scenario quantity of the sparse engine against the oracle.
pub fn verify_scenario(config: &ScenarioConfig) -> Result<Vec<Check>> {
    let sparse = evaluate(config)?;
    let oracle = oracle_evaluate(config)?;
    let tag = format!(
        "{} chi={} eta={} rot1=({:.4},{:.4})",
        config.scheme.name(),
        config.params.chi,
        config.efficiency,
        config.rot1.theta,
        config.rot1.phi
    );
    let mut checks = Vec::new();
    let mut worst_p: f64 = 0.0;
    for (b, p) in sparse.branches.iter().zip(&oracle.branch_probabilities) {
        worst_p = worst_p.max((b.probability - p).abs());
    }
    checks.push(Check::new(format!("{tag}: branch probabilities"), worst_p, 1e-10));
    let mut worst_f: f64 = 0.0;
    for (b, f) in sparse.branches.iter().zip(&oracle.branch_fidelities) {
        worst_f = worst_f.max((b.fidelity.map_or(0.0, |x| x.raw) - f).abs());
    }
    checks.push(Check::new(format!("{tag}: branch fidelities"), worst_f, 1e-10));
    checks.push(Check::new(
        format!("{tag}: conditional fidelity"),
        (sparse.conditional_fidelity - oracle.conditional_fidelity).abs(),
        1e-10,
    ));
    let mut worst_w: f64 = 0.0;
    let mut worst_s: f64 = 0.0;
    for s in &sparse.sectors {
        worst_w = worst_w.max((s.weight - oracle.sector_weights.get(&s.sector).copied().unwrap_or(0.0)).abs());
        let o = oracle
            .sector_probabilities
            .get(&s.sector)
            .cloned()
            .unwrap_or_default();
        for (b, p) in s.branches.iter().zip(o) {
            worst_s = worst_s.max((b.probability - p).abs());
        }
    }
    if sparse.sectors.len() != oracle.sector_weights.len() {
        worst_w = f64::INFINITY;
    }
    checks.push(Check::new(format!("{tag}: sector weights"), worst_w, 1e-10));
    checks.push(Check::new(format!("{tag}: sector probabilities"), worst_s, 1e-10));
    Ok(checks)
}

/// Everything `--verify` runs: every scenario of the grid (inputs drawn from
/// `seed`) plus `200` random unitary applications.
pub fn verify_all(seed: u64) -> Result<Vec<Check>> {
    let mut checks = Vec::new();
    for config in scenario_grid(20, seed) {
        checks.extend(verify_scenario(&config)?);
    }
    checks.push(verify_random_applications(200, seed)?);
    Ok(checks)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::{bs_50_50, pbs, BsConvention, PbsConvention};
    use crate::pdc::double_pass_source;

    #[test]
    fn dimension_formula() {
        assert_eq!(basis_dimension(4, 4), 70);
        assert_eq!(enumerate(4, 4).len(), 70);
        assert_eq!(basis_dimension(12, 4), enumerate(12, 4).len());
    }

    #[test]
    fn basis_is_lexicographic() {
        let b = enumerate(3, 2);
        let mut sorted = b.clone();
        sorted.sort();
        assert_eq!(b, sorted);
        assert_eq!(b[0], vec![0, 0, 0]);
    }

    #[test]
    fn identity_propagator() {
        let h = unitary_log(&DMatrix::identity(3, 3)).unwrap();
        assert!(max_abs(h.iter()) < 1e-15);
        let (_, p) = block_propagator(&h, 2);
        assert!(max_abs((p - DMatrix::<Complex64>::identity(6, 6)).iter()) < 1e-14);
    }

    #[test]
    fn log_handles_minus_one_eigenvalues() {
        let r = ModeRegistry::beams(&["a", "b"], 2).unwrap();
        for u in [
            bs_50_50(&r, "a", "b", BsConvention::Hadamard).unwrap(),
            pbs(&r, "a", "b", PbsConvention::TransmitH).unwrap(),
        ] {
            let h = unitary_log(u.matrix()).unwrap();
            let back = (h * Complex64::new(0.0, 1.0)).exp();
            assert!(max_abs((back - u.matrix()).iter()) < 1e-12);
        }
    }

    #[test]
    fn hong_ou_mandel_on_dense_path() {
        let r = ModeRegistry::beams(&["a", "b"], 2).unwrap();
        let s = FockState::basis_state(
            &r,
            Occupation::from_pairs(&r, &[(Mode::h("a"), 1), (Mode::h("b"), 1)]).unwrap(),
        )
        .unwrap();
        let out = dense_apply(
            &DenseState::from_fock(&s),
            &bs_50_50(&r, "a", "b", BsConvention::Hadamard).unwrap(),
        )
        .unwrap();
        let coinc = Occupation::from_pairs(&r, &[(Mode::h("a"), 1), (Mode::h("b"), 1)]).unwrap();
        assert!(out.amplitude(coinc.counts()).norm() < 1e-10);
        assert!((out.norm_sqr() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dense_source_matches_sparse_source() {
        for chi in [0.05, 0.1, 0.3] {
            let p = PdcParams::new(chi, 2).unwrap();
            let dense = oracle_source(&p).unwrap();
            let sparse = double_pass_source(&p).unwrap();
            assert!(dense.max_deviation(&sparse) < 1e-12);
        }
    }

    #[test]
    fn oracle_refuses_three_pairs() {
        assert!(oracle_source(&PdcParams::new(0.1, 3).unwrap()).is_err());
    }

    #[test]
    fn random_unitaries_are_unitary() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 1..=4 {
            let u = random_unitary(n, &mut rng);
            assert!(crate::optics::unitarity_deviation(&u) < 1e-12);
        }
    }

    #[test]
    fn small_random_agreement() {
        let c = verify_random_applications(10, 3).unwrap();
        assert!(c.passed, "{c:?}");
    }
}
