use std::collections::BTreeMap;

use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use telesim::detection::DetectorModel;
use telesim::experiment::{
    build_circuit, evaluate, six_state_inputs, Evaluation, Rotation, ScenarioConfig, Scheme,
};
use telesim::fock::{FockState, Mode, ModeRegistry};
use telesim::optics::{apply_unitary, BsConvention, ModeUnitary, PbsConvention};
use telesim::oracle::{random_state, random_unitary};
use telesim::pdc::{double_pass_source, sector_decompose, PdcParams, Sector};

fn max_diff(a: &FockState, b: &FockState) -> f64 {
    a.add(&b.scaled(Complex64::new(-1.0, 0.0)))
        .unwrap()
        .terms()
        .map(|(_, z)| z.norm())
        .fold(0.0, f64::max)
}

fn photon_profile(s: &FockState) -> BTreeMap<usize, f64> {
    let mut m = BTreeMap::new();
    for (o, z) in s.terms() {
        *m.entry(o.total()).or_insert(0.0) += z.norm_sqr();
    }
    m
}

fn random_mode_unitary(modes: &[Mode], rng: &mut ChaCha8Rng) -> ModeUnitary {
    let k = rng.gen_range(1..=modes.len());
    let mut chosen = modes.to_vec();
    for i in (1..chosen.len()).rev() {
        chosen.swap(i, rng.gen_range(0..=i));
    }
    chosen.truncate(k);
    ModeUnitary::new(chosen, random_unitary(k, rng)).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn unitaries_preserve_norm_and_photon_number(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reg = ModeRegistry::beams(&["a", "b", "c"], 3).unwrap();
        let state = random_state(&reg, &mut rng).unwrap();
        let u = random_mode_unitary(reg.modes(), &mut rng);
        let out = apply_unitary(&state, &u).unwrap();
        prop_assert!((out.norm_sqr() - state.norm_sqr()).abs() < 1e-12);
        let (before, after) = (photon_profile(&state), photon_profile(&out));
        for (n, w) in &before {
            prop_assert!((w - after.get(n).copied().unwrap_or(0.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn composition_matches_sequential_application(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reg = ModeRegistry::beams(&["a", "b"], 3).unwrap();
        let state = random_state(&reg, &mut rng).unwrap();
        let u = random_mode_unitary(reg.modes(), &mut rng);
        let w = random_mode_unitary(reg.modes(), &mut rng);
        let sequential = apply_unitary(&apply_unitary(&state, &u).unwrap(), &w).unwrap();
        let composed = apply_unitary(&state, &u.then(&w).unwrap()).unwrap();
        prop_assert!(max_diff(&sequential, &composed) < 1e-12);
    }

    #[test]
    fn inner_product_is_conjugate_symmetric(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let reg = ModeRegistry::beams(&["a", "b"], 2).unwrap();
        let x = random_state(&reg, &mut rng).unwrap();
        let y = random_state(&reg, &mut rng).unwrap();
        let xy = x.inner_product(&y).unwrap();
        let yx = y.inner_product(&x).unwrap();
        prop_assert!((xy - yx.conj()).norm() < 1e-14);
    }

    #[test]
    fn tensor_is_associative(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [a, b, c] = ["a", "b", "c"].map(|l| {
            let reg = ModeRegistry::beams(&[l], 2).unwrap();
            random_state(&reg, &mut rng).unwrap()
        });
        let left = a.tensor(&b).unwrap().tensor(&c).unwrap();
        let right = a.tensor(&b.tensor(&c).unwrap()).unwrap();
        prop_assert_eq!(left.registry().modes(), right.registry().modes());
        prop_assert!(max_diff(&left, &right) < 1e-15);
    }
}

fn assert_same_evaluation(a: &Evaluation, b: &Evaluation) {
    for (x, y) in a.branches.iter().zip(&b.branches) {
        assert!((x.probability - y.probability).abs() < 1e-12);
        let (fx, fy) = (x.fidelity.unwrap().raw, y.fidelity.unwrap().raw);
        assert!((fx - fy).abs() < 1e-12, "{fx} vs {fy}");
    }
    for (x, y) in a.sectors.iter().zip(&b.sectors) {
        for (p, q) in x.branches.iter().zip(&y.branches) {
            assert!((p.probability - q.probability).abs() < 1e-12);
        }
    }
}

#[test]
fn results_do_not_depend_on_pbs_convention() {
    for rot in six_state_inputs().into_iter().chain([Rotation::new(0.3, 1.7)]) {
        let base = ScenarioConfig::default().with_rot1(rot);
        let other = ScenarioConfig {
            pbs_convention: PbsConvention::TransmitV,
            ..base
        };
        assert_same_evaluation(&evaluate(&base).unwrap(), &evaluate(&other).unwrap());
    }
}

#[test]
fn results_do_not_depend_on_bs_convention() {
    for scheme in [Scheme::Modified, Scheme::Innsbruck] {
        for rot in six_state_inputs().into_iter().chain([Rotation::new(1.1, -0.4)]) {
            let base = ScenarioConfig::new(scheme).with_rot1(rot);
            let other = ScenarioConfig {
                bs_convention: BsConvention::Symmetric,
                ..base
            };
            assert_same_evaluation(&evaluate(&base).unwrap(), &evaluate(&other).unwrap());
        }
    }
}

#[test]
fn sector_weights_scale_with_chi() {
    for chi in [0.02, 0.1, 0.25] {
        let source = double_pass_source(&PdcParams::new(chi, 2).unwrap()).unwrap();
        let w: BTreeMap<Sector, f64> = sector_decompose(&source)
            .unwrap()
            .into_iter()
            .map(|(w, _)| (w.sector(), w.weight))
            .collect();
        let vac = w[&Sector::new(0, 0)];
        let c2 = chi * chi;
        assert!((w[&Sector::new(1, 0)] / vac - 2.0 * c2).abs() < 1e-12);
        assert!((w[&Sector::new(0, 1)] / vac - 2.0 * c2).abs() < 1e-12);
        assert!((w[&Sector::new(2, 0)] / vac - 3.0 * c2 * c2).abs() < 1e-12);
        assert!((w[&Sector::new(1, 1)] / vac - 4.0 * c2 * c2).abs() < 1e-12);
        assert!((w.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn number_resolving_detectors_agree_on_single_photon_events() {
    // In sector (1,1) with R1 = 1 no port receives two photons after the
    // analyzers, so the detector model cannot matter.
    let cfg = ScenarioConfig::default();
    let mut built = build_circuit(&cfg).unwrap();
    let source = double_pass_source(&cfg.params).unwrap();
    let good = sector_decompose(&source)
        .unwrap()
        .into_iter()
        .find(|(w, _)| w.sector() == Sector::new(1, 1))
        .unwrap()
        .1;
    let threshold = built.measure(&good, &built.pattern).unwrap();
    for p in &mut built.setup.ports {
        p.model = DetectorModel::number_resolving();
    }
    let resolving = built.measure(&good, &built.pattern).unwrap();
    for (a, b) in threshold.iter().zip(&resolving) {
        assert!((a.probability - b.probability).abs() < 1e-15);
    }
}

#[test]
fn pnr_trigger_keeps_the_good_sector() {
    let inn = evaluate(&ScenarioConfig::new(Scheme::Innsbruck).with_rot1(Rotation::new(0.4, 0.9))).unwrap();
    let pnr = evaluate(&ScenarioConfig::new(Scheme::PnrTrigger).with_rot1(Rotation::new(0.4, 0.9))).unwrap();
    let good = Sector::new(1, 1);
    let (a, b) = (inn.sector(good).unwrap(), pnr.sector(good).unwrap());
    assert!((a.total_probability() - b.total_probability()).abs() < 1e-15);
    assert_eq!(pnr.sector(Sector::new(2, 0)).unwrap().total_probability(), 0.0);
}

#[test]
fn good_sector_scales_as_efficiency_cubed() {
    let good = Sector::new(1, 1);
    let full = evaluate(&ScenarioConfig::default()).unwrap();
    let mut last = full.coincidence_probability;
    for eta in [0.9, 0.6, 0.3] {
        let e = evaluate(&ScenarioConfig {
            efficiency: eta,
            ..Default::default()
        })
        .unwrap();
        for (x, y) in e.sector(good).unwrap().branches.iter().zip(&full.sector(good).unwrap().branches) {
            assert!((x.probability - eta.powi(3) * y.probability).abs() < 1e-15);
        }
        assert!(e.coincidence_probability < last);
        last = e.coincidence_probability;
    }
}

#[test]
fn three_pair_truncation_stays_within_tripwire() {
    let chi = 0.1;
    for rot in [Rotation::IDENTITY, Rotation::new(std::f64::consts::FRAC_PI_2, 0.0)] {
        let cfg = ScenarioConfig {
            params: PdcParams::new(chi, 3).unwrap(),
            ..ScenarioConfig::default().with_rot1(rot)
        };
        let e = evaluate(&cfg).unwrap();
        let infidelity = 1.0 - e.conditional_fidelity;
        assert!(infidelity < 10.0 * chi * chi, "infidelity {infidelity}");
    }
}
