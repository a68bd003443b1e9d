use crossmpt_web::{ber_curve, decode_word, mask_view, parse_code, preset, PRESETS};

fn code(name: &str) -> crossmpt::LinearCode {
    parse_code(name, preset(name).unwrap()).unwrap()
}

#[test]
fn every_preset_parses() {
    for (name, _) in PRESETS {
        let c = code(name);
        assert!(c.k() > 0, "{name}");
    }
}

#[test]
fn mask_view_matches_known_densities() {
    let v = mask_view(&code("bch_63_45"));
    assert_eq!((v.rho_cross, v.rho_self), (32.45, 53.09));
    assert_eq!((v.cross.rows, v.cross.cols), (63, 18));
    assert_eq!(v.ecct.rows, 81);
    assert_eq!(v.ecct.open.len(), 81 * 81);
}

#[test]
fn plain_rows_are_accepted() {
    let c = parse_code("tree", "1 1 0\n0 1 1\n").unwrap();
    assert_eq!((c.n(), c.k()), (3, 1));
    assert!(parse_code("junk", "hello").is_err());
}

#[test]
fn ber_curve_orders_decoders() {
    let c = code("hamming_7_4");
    let hard = ber_curve(&c, "hard", &[5.0], 100, 0).unwrap();
    let bp = ber_curve(&c, "bp", &[5.0], 100, 0).unwrap();
    assert_eq!(hard.decoder, "hard");
    assert!(bp.points[0].ber < hard.points[0].ber);
    assert!(ber_curve(&c, "nope", &[5.0], 10, 0).is_err());
}

#[test]
fn decode_word_reports_errors() {
    let c = code("bch_31_16");
    let v = decode_word(&c, "bp", &[], 3.0, 7).unwrap();
    assert_eq!(v.codeword.len(), 31);
    assert_eq!(v.received.len(), 31);
    assert!(c.is_codeword(&v.codeword));
    let again = decode_word(&c, "bp", &[], 3.0, 7).unwrap();
    assert_eq!(v.decoded, again.decoded);

    let m = vec![1u8; 16];
    let v = decode_word(&c, "ml", &m, 8.0, 1).unwrap();
    assert_eq!(v.errors_after, 0);
    assert!(decode_word(&c, "bp", &[1, 0], 3.0, 1).is_err());
}

#[test]
fn json_shape_is_stable() {
    let v = serde_json::to_value(decode_word(&code("hamming_7_4"), "hard", &[1, 0, 1, 1], 4.0, 2).unwrap()).unwrap();
    for key in ["codeword", "received", "hard", "decoded", "errors_before", "errors_after", "converged"] {
        assert!(v.get(key).is_some(), "{key}");
    }
}
