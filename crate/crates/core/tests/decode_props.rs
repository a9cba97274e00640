mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use pooled_data::decode::{exact_pe_oracle, CandidateTable};
use pooled_data::experiments::{estimate_pe, DesignMode, ExperimentConfig};
use pooled_data::model::BitRow;
use pooled_data::{NoiseModel, Proportions, TestDesign};

use common::oracle_instances;

#[test]
fn appending_a_test_never_hurts() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for inst in oracle_instances(30, 77) {
        let p = inst.counts.p();
        let before = exact_pe_oracle(&inst.design, &inst.counts, 0).unwrap().pe_exact;
        let row = BitRow::from_bools(&(0..p).map(|_| rng.random_bool(0.5)).collect::<Vec<_>>());
        let after = exact_pe_oracle(&inst.design.with_row(row).unwrap(), &inst.counts, 0)
            .unwrap()
            .pe_exact;
        assert!(after <= before + 1e-15, "{before} -> {after}");
    }
}

#[test]
fn full_tolerance_means_no_error() {
    for inst in oracle_instances(10, 3) {
        let p = inst.counts.p();
        assert_eq!(exact_pe_oracle(&inst.design, &inst.counts, p).unwrap().pe_exact, 0.0);
        let loose = exact_pe_oracle(&inst.design, &inst.counts, 1).unwrap().pe_exact;
        let strict = exact_pe_oracle(&inst.design, &inst.counts, 0).unwrap().pe_exact;
        assert!(loose <= strict + 1e-15);
    }
}

#[test]
fn monte_carlo_with_tolerance_matches_oracle() {
    for (i, inst) in oracle_instances(8, 11).into_iter().enumerate() {
        let oracle = exact_pe_oracle(&inst.design, &inst.counts, 1).unwrap().pe_exact;
        let config = ExperimentConfig {
            qmax: 1,
            design: DesignMode::Fixed(inst.design.clone()),
            ..ExperimentConfig::new(
                Proportions::from_counts(&inst.counts).unwrap(),
                inst.counts.p(),
                inst.design.n(),
                0.5,
                NoiseModel::Noiseless,
                4000,
                i as u64,
            )
        };
        let e = estimate_pe(&config, 0).unwrap();
        assert!((e.pe_hat - oracle).abs() <= 3.0 * e.half_width(), "{oracle} vs {e:?}");
    }
}

#[test]
fn less_noise_means_fewer_errors() {
    let counts = pooled_data::LabelCounts::new(vec![3, 3]).unwrap();
    let design = TestDesign::parse_rows("110100,011010,101001,000111").unwrap();
    let _ = CandidateTable::build(&design, &counts).unwrap();
    let mut prev: Option<pooled_data::experiments::PeEstimate> = None;
    for sigma2 in [1.0, 0.1, 0.01, 1e-3, 1e-6] {
        let config = ExperimentConfig {
            design: DesignMode::Fixed(design.clone()),
            ..ExperimentConfig::new(
                Proportions::uniform(2).unwrap(),
                6,
                design.n(),
                0.5,
                NoiseModel::Gaussian { sigma2 },
                3000,
                9,
            )
        };
        let e = estimate_pe(&config, 0).unwrap();
        if let Some(p) = &prev {
            let slack = 3.0 * (p.half_width().powi(2) + e.half_width().powi(2)).sqrt();
            assert!(e.pe_hat <= p.pe_hat + slack, "sigma2={sigma2}: {} after {}", e.pe_hat, p.pe_hat);
        }
        prev = Some(e);
    }
    // The last step is effectively noiseless.
    let clean = exact_pe_oracle(&design, &counts, 0).unwrap().pe_exact;
    let last = prev.unwrap();
    assert!((last.pe_hat - clean).abs() <= 3.0 * last.half_width());
}
