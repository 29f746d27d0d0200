mod common;

const TOL: f64 = 1e-4;

#[test]
fn primitives_match_finite_differences() {
    let mut bad = Vec::new();
    for (name, err) in common::primitive_suite() {
        if !(err < TOL) {
            bad.push(format!("{name}: {err:.3e}"));
        }
    }
    assert!(bad.is_empty(), "{bad:?}");
}

#[test]
fn modules_match_finite_differences() {
    for (name, err) in common::module_suite() {
        assert!(err < TOL, "{name}: {err:.3e}");
    }
}

#[test]
fn full_loss_matches_finite_differences() {
    let err = common::model_loss_error();
    assert!(err < TOL, "{err:.3e}");
}
