use mrl_core::gates::*;
use mrl_core::verify::*;

#[test]
fn every_gate_matches_its_truth_table() {
    let cfg = VerifyConfig::default();
    for g in GateKind::ALL {
        let r = equivalence_check(BlockKind::Gate(g), Mode::Exhaustive, &cfg).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.unsettled, 0);
        assert_eq!(r.vectors, 1 << g.input_count());
        assert!(r.to_string().ends_with("PASS"));
    }
}

#[test]
fn gates_pass_random_sequences() {
    let cfg = VerifyConfig { sequences: 10, seed: 3, ..VerifyConfig::default() };
    for g in [GateKind::Xor, GateKind::Nor] {
        let r = equivalence_check(BlockKind::Gate(g), Mode::Random, &cfg).unwrap();
        assert!(r.passed(), "{r}");
        assert_eq!(r.seed, Some(3));
    }
}

#[test]
fn latch_and_flip_flop_enumerations_pass() {
    let cfg = VerifyConfig::default();
    for kind in [BlockKind::DLatch, BlockKind::Dff] {
        let r = equivalence_check(kind, Mode::Exhaustive, &cfg).unwrap();
        assert_eq!(r.cases, 8);
        assert!(r.passed(), "{r}");
    }
}

#[test]
fn latch_passes_random_sequences() {
    let cfg = VerifyConfig { seed: 7, ..VerifyConfig::default() };
    let r = equivalence_check(BlockKind::DLatch, Mode::Random, &cfg).unwrap();
    assert!(r.passed(), "{r}");
}

#[test]
fn mismatch_reports_first_divergence() {
    // a NAND checked against the AND oracle disagrees on every vector
    let cfg = VerifyConfig::default();
    let mut block = build_block(BlockKind::Gate(GateKind::Nand), &cfg.gen);
    block.kind = BlockKind::Gate(GateKind::And);
    let cases = exhaustive_cases(block.kind, &cfg.wiring);
    let r = check_cases(&block, &cases, Mode::Exhaustive, &cfg).unwrap();
    assert!(!r.passed());
    let d = r.first_divergence.as_ref().unwrap();
    assert_eq!((d.case, d.cycle, d.signal.as_str()), (0, 0, "y"));
    assert!(r.to_string().contains("FAIL (mismatch): first divergence at case 0 cycle 0"));
}

#[test]
fn invalid_timing_is_rejected() {
    let cfg = VerifyConfig { settle_fraction: 0.6, ..VerifyConfig::default() };
    assert!(matches!(
        equivalence_check(BlockKind::Gate(GateKind::And), Mode::Exhaustive, &cfg),
        Err(VerifyError::Config(_))
    ));
}
