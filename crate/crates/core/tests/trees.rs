use logicsent::sst::{
    binarize_label, extract_instances, parse_tree, ExtractMode, Label, LabeledTree, NegationLexicon,
};
use proptest::prelude::*;

fn tree() -> impl Strategy<Value = LabeledTree> {
    let leaf = (0u8..5, "[a-z']{1,8}").prop_map(|(l, t)| LabeledTree::leaf(l, t));
    leaf.prop_recursive(6, 40, 2, |inner| {
        (0u8..5, inner.clone(), inner).prop_map(|(l, a, b)| LabeledTree::branch(l, a, b))
    })
}

proptest! {
    #[test]
    fn bracketed_round_trip(t in tree()) {
        let text = t.to_bracketed();
        prop_assert_eq!(parse_tree(&text, 1).unwrap(), t);
    }

    #[test]
    fn sentence_mode_keeps_only_polar_roots(ts in prop::collection::vec(tree(), 1..20)) {
        let lex = NegationLexicon::default();
        let out = extract_instances(&ts, ExtractMode::Sentence, &lex).unwrap();
        let polar: Vec<Label> = ts.iter().filter_map(|t| binarize_label(t.label).unwrap()).collect();
        prop_assert_eq!(out.iter().map(|i| i.label).collect::<Vec<_>>(), polar);
    }
}

#[test]
fn but_splits_the_clauses() {
    let t = parse_tree(
        "(3 (2 (2 it) (2 drags)) (3 (2 but) (4 (2 it) (4 charms))))",
        1,
    )
    .unwrap();
    let out = extract_instances(&[t], ExtractMode::Sentence, &NegationLexicon::default()).unwrap();
    assert_eq!(out[0].b_tokens().unwrap(), ["it", "charms"]);
    assert_eq!(out[0].label, Label::Positive);
    assert!(parse_tree("(3 (2 it)", 7)
        .unwrap_err()
        .to_string()
        .contains('7'));
}
