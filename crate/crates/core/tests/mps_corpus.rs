mod common;

use std::fs;

use arclp::{parse_mps, to_standard_form, write_standard_mps};
use common::{fixture_dir, fixtures, render_lp, MALFORMED};

/// Set `ARCLP_BLESS=1` to rewrite the `.expected` files after an intended
/// format change.
#[test]
fn golden_documents_match_frozen_renderings() {
    let bless = std::env::var_os("ARCLP_BLESS").is_some();
    let docs = fixtures("golden");
    assert!(docs.len() >= 5);
    for path in docs {
        let lp = parse_mps(&fs::read_to_string(&path).unwrap())
            .unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let got = render_lp(&lp);
        let expected_path = path.with_extension("expected");
        if bless {
            fs::write(&expected_path, &got).unwrap();
        }
        let want = fs::read_to_string(&expected_path)
            .unwrap_or_else(|e| panic!("{}: {e}", expected_path.display()));
        assert_eq!(got, want, "{}", path.display());
    }
}

#[test]
fn malformed_documents_report_lines() {
    let found: Vec<String> = fixtures("malformed")
        .iter()
        .map(|p| p.file_stem().unwrap().to_string_lossy().into_owned())
        .collect();
    let listed: Vec<&str> = MALFORMED.iter().map(|m| m.0).collect();
    assert_eq!(found, listed, "every malformed fixture needs an expectation");
    for &(stem, line, text) in MALFORMED {
        let path = fixture_dir("malformed").join(format!("{stem}.mps"));
        let err = parse_mps(&fs::read_to_string(&path).unwrap()).unwrap_err();
        assert_eq!(err.line, line, "{stem}: {err}");
        let msg = err.to_string();
        assert!(msg.starts_with(&format!("line {line}: ")), "{stem}: {msg}");
        assert!(msg.contains(text), "{stem}: {msg}");
    }
}

#[test]
fn standard_form_of_golden_documents_round_trips_through_writer() {
    for path in fixtures("golden") {
        let lp = parse_mps(&fs::read_to_string(&path).unwrap()).unwrap();
        let (std_lp, _) = to_standard_form(&lp).unwrap();
        let text = write_standard_mps(&std_lp, "RT", &[]);
        let back = parse_mps(&text).unwrap();
        let (again, _) = to_standard_form(&back).unwrap();
        assert_eq!(again.a(), std_lp.a(), "{}", path.display());
        assert_eq!(again.b(), std_lp.b());
        assert_eq!(again.c(), std_lp.c());
        // Emitting the parsed copy reproduces the text byte for byte.
        assert_eq!(write_standard_mps(&again, "RT", &[]), text);
    }
}
