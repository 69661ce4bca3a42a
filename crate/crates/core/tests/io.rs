use combqfi::collision::{build_comb_family, FrequencyTask, InteractionKind, Scenario};
use combqfi::comb::CombFamily;
use combqfi::io::*;
use combqfi::Error;

#[test]
fn comb_files_round_trip_exactly() {
    let f = build_comb_family(Scenario::NonMarkovControl, InteractionKind::PartialCnotEnvControl, FrequencyTask::uniform(0.3, 1.0, 2, 3.0))
        .unwrap();
    let (comb, _) = f.evaluate(0.3).unwrap();
    let text = format_comb(&comb);
    let back = parse_comb(&text).unwrap();
    assert_eq!(back.structure.spaces(), comb.structure.spaces());
    assert_eq!(back.op.max_abs_diff(&comb.op).unwrap(), 0.0);

    let path = std::env::temp_dir().join(format!("combqfi-io-{}.comb", std::process::id()));
    write_comb(&path, &comb).unwrap();
    let read = read_comb(&path).unwrap();
    std::fs::remove_file(&path).ok();
    assert_eq!(read.op.max_abs_diff(&comb.op).unwrap(), 0.0);
}

#[test]
fn comments_and_blank_lines_are_ignored() {
    let text = "# identity channel\n\nN 1\ndims 2 2   # qubits\n1 0 0 0 0 0 1 0\n0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0\n1 0 0 0 0 0 1 0\n";
    let c = parse_comb(text).unwrap();
    assert_eq!(c.op.get(3, 0).re, 1.0);
    assert!(combqfi::comb::validate_comb(&c.op, &c.structure, 1e-12).unwrap().passed);
}

#[test]
fn malformed_files_report_the_line() {
    let cases = [
        ("", "empty"),
        ("N x\n", "line 1"),
        ("N 1\ndims 2\n", "line 2"),
        ("N 1\ndims 2 2\n1 0\n", "line 3"),
        ("N 1\ndims 2 2\n1 0 0 0 0 0 1 0\n0 0 0 0 0 0 0 0\n0 0 0 0 0 0 0 0\n1 0 0 0 0 0 1 z\n", "line 6"),
    ];
    for (text, want) in cases {
        match parse_comb(text) {
            Err(Error::Structure(msg)) => assert!(msg.contains(want), "{msg}"),
            other => panic!("expected a structural error for {text:?}, got {:?}", other.map(|_| ())),
        }
    }
}
