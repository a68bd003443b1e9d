mod common;

use crossmpt::codes::{emit_alist, parse_alist, read_pcm};
use crossmpt::HardWord;
use rand::Rng;

const SHIPPED: [(&str, usize, usize, usize); 12] = [
    // name, n, rows, k (rank kept as loaded)
    ("bch_31_16", 31, 15, 16),
    ("bch_63_36", 63, 27, 36),
    ("bch_63_45", 63, 18, 45),
    ("bch_63_51", 63, 12, 51),
    ("bch_255_223", 255, 32, 223),
    ("hamming_7_4", 7, 3, 4),
    ("ldpc_121_60", 121, 66, 60),
    ("ldpc_121_70", 121, 55, 70),
    ("ldpc_121_80", 121, 44, 80),
    ("tree_3", 3, 2, 1),
    ("turbo_132_40", 132, 92, 40),
    ("wran_384_320", 384, 64, 320),
];

#[test]
fn shipped_pcms_have_expected_dimensions() {
    for (name, n, rows, k) in SHIPPED {
        let code = common::load(name);
        assert_eq!((code.n(), code.pcm().rows(), code.k()), (n, rows, k), "{name}");
    }
}

#[test]
fn shipped_alist_files_round_trip() {
    for (name, ..) in SHIPPED {
        let path = common::codes_dir().join(format!("{name}.alist"));
        let h = read_pcm(&path).unwrap();
        assert_eq!(parse_alist(&emit_alist(&h)).unwrap(), h, "{name}");
    }
}

/// Degree lists as written in an alist header (lines 3 and 4).
fn header_degrees(text: &str) -> (Vec<usize>, Vec<usize>) {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty()).skip(2);
    let parse = |l: &str| l.split_whitespace().map(|t| t.parse().unwrap()).collect();
    let cols = parse(lines.next().unwrap());
    let rows = parse(lines.next().unwrap());
    (cols, rows)
}

#[test]
fn irregular_degree_profiles_recount_from_positions() {
    for name in ["turbo_132_40", "wran_384_320"] {
        let path = common::codes_dir().join(format!("{name}.alist"));
        let text = std::fs::read_to_string(&path).unwrap();
        let h = parse_alist(&text).unwrap();
        let (cols, rows) = header_degrees(&text);
        assert_eq!(h.col_degrees(), cols, "{name}");
        assert_eq!(h.row_degrees(), rows, "{name}");
        let distinct: std::collections::BTreeSet<_> = cols.iter().collect();
        assert!(distinct.len() > 1, "{name} should be irregular");
    }
}

#[test]
fn random_messages_encode_to_codewords() {
    let mut rng = crossmpt::channel::seeded_rng(1, 0);
    for (name, ..) in SHIPPED {
        let code = common::load(name);
        for _ in 0..20 {
            let m: Vec<u8> = (0..code.k()).map(|_| rng.random_range(0..2)).collect();
            let x: HardWord = code.encode(&m).unwrap();
            assert!(code.is_codeword(x.bits()), "{name}");
        }
    }
}

#[test]
fn generator_is_orthogonal_to_pcm() {
    for (name, ..) in SHIPPED {
        let code = common::load(name);
        let product = code.generator().mul(&code.pcm().transpose()).unwrap();
        assert!(product.is_zero(), "{name}");
    }
}
