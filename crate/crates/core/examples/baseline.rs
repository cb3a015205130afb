//! Prints the oracle values pinned by the acceptance suite.

use telesim::experiment::{six_state_inputs, ScenarioConfig, Scheme};
use telesim::oracle::oracle_evaluate;

fn main() -> telesim::Result<()> {
    for scheme in [Scheme::Innsbruck, Scheme::Modified, Scheme::PnrTrigger] {
        let inputs = six_state_inputs();
        let mut sum = 0.0;
        for rot in &inputs {
            sum += oracle_evaluate(&ScenarioConfig::new(scheme).with_rot1(*rot))?.conditional_fidelity;
        }
        println!("{:<12} six-state average fidelity {:.15}", scheme.name(), sum / inputs.len() as f64);
    }
    Ok(())
}
