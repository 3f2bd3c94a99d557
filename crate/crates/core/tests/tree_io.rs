use proptest::prelude::*;

use growthrate::estimators::internal_branch_length;
use growthrate::sim::build_cpp_tree;
use growthrate::tree::{parse_newick, DEFAULT_ULTRAMETRIC_TOL};
use growthrate::{CoalescenceTimes, Error};

#[test]
fn three_tip_example() {
    let t = parse_newick("((A:1,B:1):1,C:2);").unwrap();
    assert_eq!(t.n_tips(), 3);
    assert_eq!(t.tip_depths().unwrap(), vec![2.0, 2.0, 2.0]);
    assert_eq!(
        t.coalescence_times(DEFAULT_ULTRAMETRIC_TOL)
            .unwrap()
            .times(),
        &[2.0, 1.0]
    );
    assert_eq!(t.internal_branch_length().unwrap(), 1.0);
}

#[test]
fn non_ultrametric_is_reported() {
    let t = parse_newick("((A:1,B:2):1,C:2);").unwrap();
    assert!(matches!(
        t.coalescence_times(DEFAULT_ULTRAMETRIC_TOL),
        Err(Error::NotUltrametric { .. })
    ));
}

#[test]
fn cherries() {
    let t = parse_newick("(A:3,B:3);").unwrap();
    assert_eq!(
        t.coalescence_times(DEFAULT_ULTRAMETRIC_TOL)
            .unwrap()
            .times(),
        &[3.0]
    );
    let t = parse_newick("(A:2,B:2);").unwrap();
    assert!(matches!(
        t.internal_branch_length(),
        Err(Error::SampleTooSmall { n: 2, .. })
    ));
}

#[test]
fn unbalanced_input() {
    assert!(matches!(parse_newick("(A:1,B:1"), Err(Error::Parse { .. })));
}

#[test]
fn point_process_pipeline() {
    let times = CoalescenceTimes::new(vec![2.0, 1.0], Some(3.0)).unwrap();
    let text = build_cpp_tree(&times).unwrap().to_newick();
    let back = parse_newick(&text).unwrap();
    assert_eq!(back.coalescence_times(0.0).unwrap().times(), &[2.0, 1.0]);
}

/// Swaps the children of every internal node by re-serializing with the
/// subtrees in reverse textual order.
fn reversed(text: &str) -> String {
    fn split_top(s: &str) -> Vec<&str> {
        let (mut depth, mut start, mut parts) = (0, 0, Vec::new());
        for (i, ch) in s.char_indices() {
            match ch {
                '(' => depth += 1,
                ')' => depth -= 1,
                ',' if depth == 0 => {
                    parts.push(&s[start..i]);
                    start = i + 1;
                }
                _ => {}
            }
        }
        parts.push(&s[start..]);
        parts
    }
    fn rev(s: &str) -> String {
        if !s.starts_with('(') {
            return s.to_string();
        }
        let close = s.rfind(')').unwrap();
        let inner = &s[1..close];
        let kids: Vec<String> = split_top(inner).into_iter().rev().map(rev).collect();
        format!("({}){}", kids.join(","), &s[close + 1..])
    }
    let body = text.trim_end_matches(';');
    format!("{};", rev(body))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(2_000))]

    #[test]
    fn rotation_invariance(h in prop::collection::vec(0.5f64..19.5, 2..12)) {
        let times = CoalescenceTimes::new(h, Some(20.0)).unwrap();
        let tree = build_cpp_tree(&times).unwrap();
        let text = tree.to_newick();
        let rotated = parse_newick(&reversed(&text)).unwrap();
        let a = tree.coalescence_times(DEFAULT_ULTRAMETRIC_TOL).unwrap();
        let b = rotated.coalescence_times(DEFAULT_ULTRAMETRIC_TOL).unwrap();
        for (x, y) in a.times().iter().zip(b.times()) {
            prop_assert!((x - y).abs() <= 1e-9 * x);
        }
        prop_assert_eq!(rotated.to_newick(), text);
    }

    #[test]
    fn parse_serialize_parse_is_stable(h in prop::collection::vec(0.5f64..19.5, 2..12)) {
        let times = CoalescenceTimes::new(h, Some(20.0)).unwrap();
        let once = parse_newick(&build_cpp_tree(&times).unwrap().to_newick()).unwrap();
        let twice = parse_newick(&once.to_newick()).unwrap();
        prop_assert_eq!(&once, &twice);
        let rel = (once.internal_branch_length().unwrap() / internal_branch_length(&times).unwrap() - 1.0).abs();
        prop_assert!(rel < 1e-9);
    }
}
