//! Golden-trace snapshot: the basis ordering, outcome labels, pulse signs,
//! frame rule and trace schema are all load-bearing conventions. Any drift
//! shows up as a diff against the committed reference run.

use num_complex::Complex64;

use spinparity::noise::trial_rng;
use spinparity::protocols::{
    data_layout, entangling_protocol_asym, AsymOptions, ANCILLA_PAIR, Q1_PAIR, Q2_PAIR,
};
use spinparity::spin::{amps_to_json, IdealDriver};

#[test]
fn asym_run_matches_committed_golden_trace() {
    let golden: serde_json::Value =
        serde_json::from_str(include_str!("golden/run_asym_00_seed7.json")).unwrap();

    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    let mut reg =
        spinparity::protocols::two_qubit_register(&[one, zero, zero, zero]).unwrap();
    let mut driver = IdealDriver::new(trial_rng(7, 1));
    let trace = entangling_protocol_asym(
        &mut reg,
        Q1_PAIR,
        ANCILLA_PAIR,
        Q2_PAIR,
        &mut driver,
        &AsymOptions::default(),
    )
    .unwrap();
    let dec = reg.decode_logical(&data_layout()).unwrap();
    let corrected = trace.frame.apply(&dec.amplitudes);

    assert_eq!(serde_json::to_value(&trace).unwrap(), golden["trace"]);
    assert_eq!(
        serde_json::to_value(amps_to_json(&dec.amplitudes)).unwrap(),
        golden["final_logical"]
    );
    assert_eq!(
        serde_json::to_value(amps_to_json(&corrected)).unwrap(),
        golden["corrected_logical"]
    );
}
