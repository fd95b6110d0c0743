use postproc::code::{build_met_ldpc, LdpcCode};
use postproc::de::{density_evolution_threshold, DeOptions};
use postproc::decoder::{layered_decode, CheckRule};
use postproc::met::{table_row, MetDegreeDistribution, DESIGN_TABLE};
use postproc::reconcile::efficiency_beta;

#[test]
fn rate_003_code_at_full_desk_length() {
    let row = table_row(0.03).unwrap();
    let dist = row.distribution().unwrap();
    let code = build_met_ldpc(&dist, 100_000, 11).unwrap();
    assert_eq!(code.m(), 97_000);
    assert!((code.rate() - 0.03).abs() < 1e-12);
    assert_eq!(code.four_cycles(), 0);
    let h = code.degree_histogram();
    let (vc, cc) = dist.node_counts(100_000);
    for (cls, want) in dist.variables.iter().zip(&vc) {
        let got = h.variables.iter().find(|(d, _)| d == &cls.degrees).map_or(0, |e| e.1);
        assert_eq!(got, *want, "{:?}", cls.degrees);
    }
    for (cls, want) in dist.checks.iter().zip(&cc) {
        let got = h.checks.iter().find(|(d, _)| d == &cls.degrees).map_or(0, |e| e.1);
        assert_eq!(got, *want, "{:?}", cls.degrees);
    }
    let zero = vec![0u8; code.m()];
    let out = layered_decode(&code, &vec![10.0; code.n], &zero, CheckRule::MinSum(0.8), 10).unwrap();
    assert!(out.converged && out.iterations <= 5);
}

#[test]
fn code_file_round_trip() {
    let code = build_met_ldpc(&DESIGN_TABLE[1].distribution().unwrap(), 5000, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("rate006.coo");
    code.save(&path).unwrap();
    let back = LdpcCode::load(&path).unwrap();
    assert_eq!(back, code);
    let text = std::fs::read_to_string(&path).unwrap();
    let header: Vec<&str> = text.lines().take(3).collect();
    assert_eq!(header, ["# ldpc-coo 1", "# ensemble rate-0.06", "# seed 3"]);
}

#[test]
fn tabulated_efficiency_relation() {
    for row in &DESIGN_TABLE {
        let b = efficiency_beta(row.rate, 1.0 / (row.sigma_de * row.sigma_de));
        assert!((b - row.beta_sigma).abs() < 1e-3, "{} {b}", row.rate);
    }
}

#[test]
fn irregular_ensemble_threshold_sits_below_capacity() {
    // 40 % degree-2 and 60 % degree-3 variables, degree-5 checks
    let d = MetDegreeDistribution::parse("irr", "v = 0.4r_1x_1^2 + 0.6r_1x_1^3", "u = 0.52x_1^5").unwrap();
    assert!((d.design_rate() - 0.48).abs() < 1e-12);
    let opts = DeOptions { bits: 9, max_llr: 25.0, ..Default::default() };
    let t = density_evolution_threshold(&d, &opts).unwrap();
    let shannon = 1.0 / (2f64.powf(2.0 * 0.48) - 1.0).sqrt();
    assert!(t.sigma < shannon && t.sigma > 0.8 * shannon, "{t:?}");
    assert!(t.beta < 1.0 && t.beta > 0.8);
}
