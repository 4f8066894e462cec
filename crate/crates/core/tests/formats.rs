use std::path::PathBuf;

use markov_voi::chain::{random_chain_from_limit, StationaryDistribution};
use markov_voi::fixtures::{duplicated_rows_nine_state, four_block_nine_state};
use markov_voi::io;
use markov_voi::partition::{BinaryPartition, ProbabilisticPartition};
use proptest::prelude::*;

fn fixture(name: &str) -> String {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures").join(name);
    std::fs::read_to_string(path).unwrap()
}

#[test]
fn bundled_files_match_generators() {
    let (spec, chain) = four_block_nine_state().unwrap();
    assert_eq!(fixture("four_block_9.csv"), io::chain_to_csv(&chain));
    let blocks = BinaryPartition::from_labels(&spec.labels()).unwrap();
    assert_eq!(fixture("four_block_9_blocks.csv"), io::assignment_to_csv(&blocks));
    assert_eq!(
        fixture("duplicated_rows_9.csv"),
        io::chain_to_csv(&duplicated_rows_nine_state())
    );
}

#[test]
fn block_file_reads_as_hard_partition() {
    let part = io::parse_partition_csv(&fixture("four_block_9_blocks.csv")).unwrap();
    assert_eq!((part.n(), part.m()), (9, 4));
    assert!(part.is_binary());
    assert_eq!(part.get(3, 1), 1.0);
}

fn arb_gamma() -> impl Strategy<Value = StationaryDistribution> {
    prop::collection::vec(0.01f64..1.0, 2..10).prop_map(|w| {
        let total: f64 = w.iter().sum();
        StationaryDistribution::new(w.iter().map(|x| x / total).collect()).unwrap()
    })
}

proptest! {
    #[test]
    fn chains_survive_both_formats(g in arb_gamma(), sparsity in 0.0f64..0.8, seed in any::<u64>()) {
        let chain = random_chain_from_limit(&g, sparsity, seed).unwrap();
        let csv = io::parse_chain_csv(&io::chain_to_csv(&chain)).unwrap();
        prop_assert_eq!(csv.matrix(), chain.matrix());
        let json = io::parse_chain_json(&io::chain_to_json(&chain).unwrap()).unwrap();
        prop_assert_eq!(json.matrix(), chain.matrix());
        let gamma = io::parse_gamma_csv(&io::gamma_to_csv(&g)).unwrap();
        prop_assert_eq!(gamma.as_slice(), g.as_slice());
    }

    #[test]
    fn partitions_survive_csv(n in 1usize..9, m in 1usize..5, seed in any::<u64>()) {
        let part = ProbabilisticPartition::random(n, m, seed);
        let back = io::parse_partition_csv(&io::partition_to_csv(&part)).unwrap();
        prop_assert_eq!(back.matrix(), part.matrix());
    }
}
