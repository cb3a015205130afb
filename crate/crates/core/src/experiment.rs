//! End-to-end scenarios.
//!
//! Three wirings share one source:
//!
//! * [`Scheme::Modified`]: rotators on beams 1 and 4, a PBS splitting beam 4
//!   onto D3 (the H output) and D4 (the V output), a 50:50 BS mixing beams 1
//!   and 2, and polarizers P_H before D1 and P_V before D2. Coincidence is
//!   D1 ∧ D2 ∧ exactly one of (D3, D4); each of D3/D4 is a separate branch.
//! * [`Scheme::Innsbruck`]: beam 1 is prepared by a rotator / polarizer /
//!   rotator chain, a bare threshold trigger watches beam 4, and D1/D2 see the
//!   BS outputs without polarizers. Coincidence is D1 ∧ D2 ∧ trigger.
//! * [`Scheme::PnrTrigger`]: Innsbruck with a number-resolving trigger that
//!   must count exactly one photon.
//!
//! Beam 3 is the output in every scheme.

use std::sync::Arc;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::detection::{
    fidelity, pattern_probability, DetectorModel, DetectorPort, FidelityRecord, FiringPattern,
    MeasurementOutcome, MeasurementSetup,
};
use crate::error::{Result, SimError};
use crate::fock::{FockState, Mode, ModeRegistry, Polarization, QubitPolarizationState};
use crate::optics::{
    bs_50_50, pbs, rotator, rotator_matrix, BsConvention, Circuit, PbsConvention,
};
use crate::pdc::{double_pass_source, sector_decompose, PdcParams, Sector, SectorWeight};

/// Average fidelity reachable without entanglement; a reference line only.
pub const CLASSICAL_FIDELITY_THRESHOLD: f64 = 0.75;

pub const OUTPUT_BEAM: &str = "3";
const REFLECTED_LINE: &str = "4r";
const SINK_D1_POLARIZER: &str = "sink:PH";
const SINK_D2_POLARIZER: &str = "sink:PV";
const SINK_PREPARATION: &str = "sink:prep";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    #[default]
    Modified,
    Innsbruck,
    PnrTrigger,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Modified => "modified",
            Scheme::Innsbruck => "innsbruck",
            Scheme::PnrTrigger => "pnr_trigger",
        }
    }
}

/// Rotator setting `(θ, φ)`; the default is the identity.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Rotation {
    pub theta: f64,
    pub phi: f64,
}

impl Rotation {
    pub const IDENTITY: Rotation = Rotation { theta: 0.0, phi: 0.0 };

    pub fn new(theta: f64, phi: f64) -> Self {
        Rotation { theta, phi }
    }

    /// Image of a single photon with polarization `(c_H, c_V)`.
    fn apply(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        let m = rotator_matrix(self.theta, self.phi);
        [
            m[(0, 0)] * v[0] + m[(0, 1)] * v[1],
            m[(1, 0)] * v[0] + m[(1, 1)] * v[1],
        ]
    }

    fn apply_inverse(&self, v: [Complex64; 2]) -> [Complex64; 2] {
        Rotation::new(-self.theta, self.phi).apply(v)
    }

    /// The polarization state this rotator makes out of `|pol⟩`.
    pub fn image_of(&self, pol: Polarization) -> QubitPolarizationState {
        let [h, v] = self.apply(basis(pol));
        QubitPolarizationState::from_amplitudes(h, v).expect("unit vector")
    }
}

fn basis(pol: Polarization) -> [Complex64; 2] {
    match pol {
        Polarization::H => [Complex64::new(1.0, 0.0), Complex64::default()],
        Polarization::V => [Complex64::default(), Complex64::new(1.0, 0.0)],
    }
}

/// Inputs over which fidelities and survival ratios are averaged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum Averaging {
    /// Six beam-1 rotations whose teleported states are the Pauli eigenstates.
    #[default]
    SixState,
    /// Haar-random rotations drawn from the scenario seed.
    MonteCarlo { samples: usize },
}

impl Averaging {
    pub fn inputs(&self, seed: u64) -> Vec<Rotation> {
        match *self {
            Averaging::SixState => six_state_inputs(),
            Averaging::MonteCarlo { samples } => random_inputs(samples, seed),
        }
    }
}

/// Beam-1 rotations taking `|V⟩` to V, H, A, D, L, R.
pub fn six_state_inputs() -> Vec<Rotation> {
    use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};
    vec![
        Rotation::new(0.0, 0.0),
        Rotation::new(FRAC_PI_2, 0.0),
        Rotation::new(FRAC_PI_4, 0.0),
        Rotation::new(FRAC_PI_4, PI),
        Rotation::new(FRAC_PI_4, FRAC_PI_2),
        Rotation::new(FRAC_PI_4, -FRAC_PI_2),
    ]
}

/// Uniform on the Bloch sphere: `cos 2θ ∈ U[-1, 1]`, `φ ∈ U[0, 2π)`.
pub fn random_inputs(samples: usize, seed: u64) -> Vec<Rotation> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..samples)
        .map(|_| {
            let z: f64 = rng.gen_range(-1.0..=1.0);
            let phi: f64 = rng.gen_range(0.0..std::f64::consts::TAU);
            Rotation::new(0.5 * z.acos(), phi)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub scheme: Scheme,
    pub params: PdcParams,
    pub rot1: Rotation,
    pub rot4: Rotation,
    pub efficiency: f64,
    pub pbs_convention: PbsConvention,
    pub bs_convention: BsConvention,
    pub averaging: Averaging,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            scheme: Scheme::Modified,
            params: PdcParams::default(),
            rot1: Rotation::IDENTITY,
            rot4: Rotation::IDENTITY,
            efficiency: 1.0,
            pbs_convention: PbsConvention::default(),
            bs_convention: BsConvention::default(),
            averaging: Averaging::default(),
            seed: 0,
        }
    }
}

impl ScenarioConfig {
    pub fn new(scheme: Scheme) -> Self {
        ScenarioConfig {
            scheme,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        if !(self.efficiency > 0.0 && self.efficiency <= 1.0) {
            return Err(SimError::InvalidParameter(format!(
                "efficiency {} outside (0, 1]",
                self.efficiency
            )));
        }
        let finite = [self.rot1.theta, self.rot1.phi, self.rot4.theta, self.rot4.phi];
        if finite.iter().any(|x| !x.is_finite()) {
            return Err(SimError::InvalidParameter("rotation angles must be finite".into()));
        }
        if let Averaging::MonteCarlo { samples: 0 } = self.averaging {
            return Err(SimError::EmptyInputSet);
        }
        Ok(())
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_rot1(mut self, rot1: Rotation) -> Self {
        self.rot1 = rot1;
        self
    }
}

/// A wired experiment: elements in order, detector roles and the coincidence
/// condition, plus the intended teleported state for every branch.
#[derive(Debug, Clone)]
pub struct BuiltCircuit {
    pub registry: Arc<ModeRegistry>,
    pub circuit: Circuit,
    pub setup: MeasurementSetup,
    pub pattern: FiringPattern,
    /// One target per entry of `pattern.branches()`.
    pub branch_targets: Vec<QubitPolarizationState>,
}

impl BuiltCircuit {
    /// Runs a source-registry state through the circuit.
    pub fn propagate(&self, source: &FockState) -> Result<FockState> {
        self.circuit.apply(&source.embed(&self.registry)?)
    }

    pub fn measure(&self, source: &FockState, pattern: &FiringPattern) -> Result<Vec<MeasurementOutcome>> {
        pattern_probability(&self.propagate(source)?, pattern, &self.setup)
    }
}

fn beam_modes(label: &str) -> [Mode; 2] {
    [Mode::h(label), Mode::v(label)]
}

/// Wires the circuit for `config.scheme`.
pub fn build_circuit(config: &ScenarioConfig) -> Result<BuiltCircuit> {
    config.validate()?;
    match config.scheme {
        Scheme::Modified => build_modified(config),
        Scheme::Innsbruck | Scheme::PnrTrigger => build_innsbruck(config),
    }
}

fn build_modified(config: &ScenarioConfig) -> Result<BuiltCircuit> {
    // D3 always sits on whichever PBS output carries H.
    let (d3_line, d4_line) = match config.pbs_convention.transmitted() {
        Polarization::H => ("4", REFLECTED_LINE),
        Polarization::V => (REFLECTED_LINE, "4"),
    };
    let ports = vec![("D1", "1"), ("D2", "2"), ("D3", d3_line), ("D4", d4_line)];
    let mut modes: Vec<Mode> = ["1", "2", OUTPUT_BEAM, "4", REFLECTED_LINE]
        .iter()
        .flat_map(|l| beam_modes(l))
        .collect();
    modes.push(Mode::v(SINK_D1_POLARIZER));
    modes.push(Mode::h(SINK_D2_POLARIZER));
    let loss_sinks = loss_sink_modes(config, &ports);
    modes.extend(loss_sinks.iter().cloned());
    let registry = ModeRegistry::new(modes, 2 * config.params.max_pairs)?;

    let mut circuit = Circuit::new();
    circuit.push("R1", rotator(&registry, "1", config.rot1.theta, config.rot1.phi)?);
    circuit.push("R4", rotator(&registry, "4", config.rot4.theta, config.rot4.phi)?);
    circuit.push("PBS", pbs(&registry, "4", REFLECTED_LINE, config.pbs_convention)?);
    circuit.push("BS", bs_50_50(&registry, "1", "2", config.bs_convention)?);
    circuit.push_polarizer(&registry, "P_H", "1", Polarization::H, SINK_D1_POLARIZER)?;
    circuit.push_polarizer(&registry, "P_V", "2", Polarization::V, SINK_D2_POLARIZER)?;
    push_losses(&mut circuit, &registry, config, &ports)?;

    let model = DetectorModel::threshold().with_efficiency(config.efficiency);
    let setup = MeasurementSetup {
        ports: ports
            .iter()
            .map(|&(name, line)| DetectorPort::beam(name, line, model))
            .collect(),
        sinks: [Mode::v(SINK_D1_POLARIZER), Mode::h(SINK_D2_POLARIZER)]
            .into_iter()
            .chain(loss_sinks)
            .collect(),
        outputs: beam_modes(OUTPUT_BEAM).to_vec(),
    };
    let pattern = FiringPattern::fired(&["D1", "D2"]).and_exactly_one_of(&["D3", "D4"]);
    let branch_targets = vec![
        heralded_target(config, Polarization::H),
        heralded_target(config, Polarization::V),
    ];
    Ok(BuiltCircuit {
        registry,
        circuit,
        setup,
        pattern,
        branch_targets,
    })
}

/// Beam-1 state heralded when the beam-4 photon leaves R4 with polarization
/// `seen`. Projecting the singlet `(|H⟩₁|V⟩₄ − |V⟩₁|H⟩₄)/√2` onto
/// `|a⟩₄ = α|H⟩ + β|V⟩` leaves `β*|H⟩₁ − α*|V⟩₁`, which R1 then rotates.
fn heralded_target(config: &ScenarioConfig, seen: Polarization) -> QubitPolarizationState {
    let [alpha, beta] = config.rot4.apply_inverse(basis(seen));
    let partner = [beta.conj(), -alpha.conj()];
    let [h, v] = config.rot1.apply(partner);
    QubitPolarizationState::from_amplitudes(h, v).expect("unit vector")
}

fn build_innsbruck(config: &ScenarioConfig) -> Result<BuiltCircuit> {
    let ports = vec![("D1", "1"), ("D2", "2"), ("Dtrig", "4")];
    let mut modes: Vec<Mode> = ["1", "2", OUTPUT_BEAM, "4"]
        .iter()
        .flat_map(|l| beam_modes(l))
        .collect();
    let prep_pass = Polarization::V;
    let prep_sink = Mode::new(SINK_PREPARATION, prep_pass.orthogonal());
    modes.push(prep_sink.clone());
    let loss_sinks = loss_sink_modes(config, &ports);
    modes.extend(loss_sinks.iter().cloned());
    let registry = ModeRegistry::new(modes, 2 * config.params.max_pairs)?;

    let r = config.rot1;
    let mut circuit = Circuit::new();
    circuit.push("R1^-1", rotator(&registry, "1", -r.theta, r.phi)?);
    circuit.push_polarizer(&registry, "P_prep", "1", prep_pass, SINK_PREPARATION)?;
    circuit.push("R1", rotator(&registry, "1", r.theta, r.phi)?);
    circuit.push("R4", rotator(&registry, "4", config.rot4.theta, config.rot4.phi)?);
    circuit.push("BS", bs_50_50(&registry, "1", "2", config.bs_convention)?);
    push_losses(&mut circuit, &registry, config, &ports)?;

    let model = DetectorModel::threshold().with_efficiency(config.efficiency);
    let trigger_model = match config.scheme {
        Scheme::PnrTrigger => DetectorModel::number_resolving().with_efficiency(config.efficiency),
        _ => model,
    };
    let setup = MeasurementSetup {
        ports: vec![
            DetectorPort::beam("D1", "1", model),
            DetectorPort::beam("D2", "2", model),
            DetectorPort::beam("Dtrig", "4", trigger_model),
        ],
        sinks: std::iter::once(prep_sink).chain(loss_sinks).collect(),
        outputs: beam_modes(OUTPUT_BEAM).to_vec(),
    };
    let pattern = match config.scheme {
        Scheme::PnrTrigger => FiringPattern::fired(&["D1", "D2"]).and_count("Dtrig", 1),
        _ => FiringPattern::fired(&["D1", "D2", "Dtrig"]),
    };
    Ok(BuiltCircuit {
        registry,
        circuit,
        setup,
        pattern,
        branch_targets: vec![r.image_of(prep_pass)],
    })
}

fn loss_sink_modes(config: &ScenarioConfig, ports: &[(&str, &str)]) -> Vec<Mode> {
    if config.efficiency >= 1.0 {
        return Vec::new();
    }
    ports
        .iter()
        .flat_map(|(name, _)| beam_modes(&format!("loss:{name}")))
        .collect()
}

fn push_losses(
    circuit: &mut Circuit,
    registry: &ModeRegistry,
    config: &ScenarioConfig,
    ports: &[(&str, &str)],
) -> Result<()> {
    if config.efficiency >= 1.0 {
        return Ok(());
    }
    for (name, line) in ports {
        for pol in Polarization::BOTH {
            circuit.push_attenuator(
                registry,
                format!("loss:{name}:{pol}"),
                Mode::new(*line, pol),
                Mode::new(format!("loss:{name}"), pol),
                config.efficiency,
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchReport {
    pub label: String,
    pub probability: f64,
    pub target: QubitPolarizationState,
    pub fidelity: Option<FidelityRecord>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorBranch {
    pub label: String,
    /// Coincidence probability given the source is in this sector.
    pub probability: f64,
    pub max_amplitude: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorReport {
    pub sector: Sector,
    pub weight: f64,
    pub branches: Vec<SectorBranch>,
}

impl SectorReport {
    pub fn total_probability(&self) -> f64 {
        self.branches.iter().map(|b| b.probability).sum()
    }

    pub fn branch(&self, label: &str) -> Option<&SectorBranch> {
        self.branches.iter().find(|b| b.label == label)
    }
}

/// Single-input evaluation: no averaging, no baseline comparison.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Evaluation {
    pub coincidence_probability: f64,
    pub branches: Vec<BranchReport>,
    pub sectors: Vec<SectorReport>,
    /// Branch-probability-weighted raw fidelity; 0 if no coincidence occurs.
    pub conditional_fidelity: f64,
}

impl Evaluation {
    pub fn sector(&self, sector: Sector) -> Option<&SectorReport> {
        self.sectors.iter().find(|s| s.sector == sector)
    }
}

pub fn evaluate(config: &ScenarioConfig) -> Result<Evaluation> {
    let built = build_circuit(config)?;
    let source = double_pass_source(&config.params)?;
    evaluate_built(&built, &source)
}

pub(crate) fn evaluate_built(built: &BuiltCircuit, source: &FockState) -> Result<Evaluation> {
    let labels: Vec<String> = built
        .pattern
        .branches()
        .iter()
        .map(|b| if b.is_empty() { "all".to_string() } else { b.join("+") })
        .collect();

    let outcomes = built.measure(source, &built.pattern)?;
    let mut branches = Vec::with_capacity(outcomes.len());
    for ((o, target), label) in outcomes.iter().zip(&built.branch_targets).zip(&labels) {
        let fidelity = o
            .conditional_state
            .as_ref()
            .map(|rho| fidelity(rho, *target))
            .transpose()?;
        branches.push(BranchReport {
            label: label.clone(),
            probability: o.probability,
            target: *target,
            fidelity,
        });
    }
    let coincidence_probability: f64 = branches.iter().map(|b| b.probability).sum();
    let conditional_fidelity = if coincidence_probability > 0.0 {
        branches
            .iter()
            .map(|b| b.probability * b.fidelity.map_or(0.0, |f| f.raw))
            .sum::<f64>()
            / coincidence_probability
    } else {
        0.0
    };

    let mut sectors = Vec::new();
    for (weight, state) in sector_decompose(source)? {
        let outs = built.measure(&state, &built.pattern)?;
        sectors.push(SectorReport {
            sector: weight.sector(),
            weight: weight.weight,
            branches: outs
                .iter()
                .zip(&labels)
                .map(|(o, label)| SectorBranch {
                    label: label.clone(),
                    probability: o.probability,
                    max_amplitude: o.max_amplitude,
                })
                .collect(),
        });
    }

    Ok(Evaluation {
        coincidence_probability,
        branches,
        sectors,
        conditional_fidelity,
    })
}

/// Mean over `inputs` (beam-1 rotations) of the branch-weighted raw fidelity.
pub fn average_fidelity(config: &ScenarioConfig, inputs: &[Rotation]) -> Result<f64> {
    if inputs.is_empty() {
        return Err(SimError::EmptyInputSet);
    }
    let source = double_pass_source(&config.params)?;
    let mut sum = 0.0;
    for &rot1 in inputs {
        let built = build_circuit(&config.with_rot1(rot1))?;
        sum += evaluate_built(&built, &source)?.conditional_fidelity;
    }
    Ok(sum / inputs.len() as f64)
}

/// Survival of the good sector (1,1): the Modified scheme's D3-branch
/// coincidence probability over the Innsbruck coincidence probability, with
/// both schemes preparing `R1|V⟩` on beam 1. Averaged over `inputs`.
pub fn survival_ratio(config: &ScenarioConfig, inputs: &[Rotation]) -> Result<f64> {
    if inputs.is_empty() {
        return Err(SimError::EmptyInputSet);
    }
    let good = Sector::new(1, 1);
    let source = double_pass_source(&config.params)?;
    let mut sum = 0.0;
    for &rot1 in inputs {
        let base = config.with_rot1(rot1);
        let modified = evaluate_built(&build_circuit(&base.with_scheme(Scheme::Modified))?, &source)?;
        let innsbruck =
            evaluate_built(&build_circuit(&base.with_scheme(Scheme::Innsbruck))?, &source)?;
        let num = modified
            .sector(good)
            .and_then(|s| s.branch("D3"))
            .map_or(0.0, |b| b.probability);
        let den = innsbruck.sector(good).map_or(0.0, |s| s.total_probability());
        if den <= 0.0 {
            return Err(SimError::ZeroDenominator(
                "Innsbruck coincidence probability in sector (1,1)".into(),
            ));
        }
        sum += num / den;
    }
    Ok(sum / inputs.len() as f64)
}

/// Angles of the 5×5 rotation grid: `θ = kπ/8`, `φ = 2πk/5`, `k = 0..5`.
pub fn rotation_grid() -> Vec<Rotation> {
    let mut out = Vec::with_capacity(25);
    for i in 0..5 {
        for j in 0..5 {
            let theta = i as f64 * std::f64::consts::PI / 8.0;
            let phi = j as f64 * std::f64::consts::TAU / 5.0;
            out.push(Rotation::new(theta, phi));
        }
    }
    out
}

/// Every single-input scenario the checks run over: the rotation grid under
/// both PBS conventions, `random` seeded inputs, all three schemes on the six
/// states (with and without detector loss), both BS conventions and a χ sweep.
pub fn scenario_grid(random: usize, seed: u64) -> Vec<ScenarioConfig> {
    let mut out = Vec::new();
    let modified = ScenarioConfig::new(Scheme::Modified);
    for pbs_convention in [PbsConvention::TransmitH, PbsConvention::TransmitV] {
        for rot in rotation_grid() {
            out.push(ScenarioConfig {
                pbs_convention,
                ..modified.with_rot1(rot)
            });
        }
    }
    for rot in random_inputs(random, seed) {
        out.push(modified.with_rot1(rot));
    }
    for scheme in [Scheme::Modified, Scheme::Innsbruck, Scheme::PnrTrigger] {
        for efficiency in [1.0, 0.6] {
            for rot in six_state_inputs() {
                out.push(ScenarioConfig {
                    efficiency,
                    ..ScenarioConfig::new(scheme).with_rot1(rot)
                });
            }
        }
    }
    for rot in six_state_inputs() {
        out.push(ScenarioConfig {
            bs_convention: BsConvention::Symmetric,
            ..modified.with_rot1(rot)
        });
    }
    for chi in [0.05, 0.3] {
        let mut c = modified;
        c.params.chi = chi;
        out.push(c);
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub config: ScenarioConfig,
    pub sector_weights: Vec<SectorWeight>,
    pub coincidence_probability: f64,
    pub branches: Vec<BranchReport>,
    pub sectors: Vec<SectorReport>,
    pub conditional_fidelity: f64,
    pub average_fidelity: f64,
    pub averaging_inputs: usize,
    pub classical_threshold: f64,
    pub survival_ratio: f64,
}

pub fn run_scenario(config: &ScenarioConfig) -> Result<ScenarioReport> {
    config.validate()?;
    let source = double_pass_source(&config.params)?;
    let built = build_circuit(config)?;
    let eval = evaluate_built(&built, &source)?;
    let inputs = config.averaging.inputs(config.seed);
    let average = average_fidelity(config, &inputs)?;
    let survival = survival_ratio(config, &inputs)?;
    let sector_weights = eval
        .sectors
        .iter()
        .map(|s| SectorWeight {
            m: s.sector.m,
            n: s.sector.n,
            weight: s.weight,
        })
        .collect();
    Ok(ScenarioReport {
        config: *config,
        sector_weights,
        coincidence_probability: eval.coincidence_probability,
        branches: eval.branches,
        sectors: eval.sectors,
        conditional_fidelity: eval.conditional_fidelity,
        average_fidelity: average,
        averaging_inputs: inputs.len(),
        classical_threshold: CLASSICAL_FIDELITY_THRESHOLD,
        survival_ratio: survival,
    })
}
