use super::Tree;
use crate::features::{Coordinator, Language};

/// Label given to conjuncts of a coordinated NP.
pub const COORD_LABEL: &str = "NP-COORD";

/// `NP`, or `NP` carrying a function tag (`NP-SBJ`, `NP-COORD`).
pub fn is_np_label(label: &str) -> bool {
    label == "NP" || label.starts_with("NP-")
}

/// A child that realizes a coordinator: a bare leaf or a `CC` preterminal
/// whose form is `and`/`or`/`et`/`ou`.
pub fn is_coordinator_child(child: &Tree) -> Option<Coordinator> {
    let word = match child {
        Tree::Leaf(w) => w.as_str(),
        _ => match child.as_preterminal() {
            Some((tag, w)) if tag == "CC" || tag.starts_with("CC-") => w,
            _ => return None,
        },
    };
    Coordinator::from_word(word, Language::En).or_else(|| Coordinator::from_word(word, Language::Fr))
}

/// Relabels the NP conjuncts of every coordinated NP as `NP-COORD`.
///
/// Structure and words are untouched; trees without coordination come back
/// unchanged. Idempotent.
pub fn to_coord_annotation(tree: &Tree) -> Tree {
    match tree {
        Tree::Leaf(_) => tree.clone(),
        Tree::Node { label, children } => {
            let coordinated =
                is_np_label(label) && children.iter().any(|c| is_coordinator_child(c).is_some());
            let children = children
                .iter()
                .map(|c| {
                    let relabeled = to_coord_annotation(c);
                    match relabeled {
                        Tree::Node { label, children }
                            if coordinated && is_np_label(&label) =>
                        {
                            Tree::Node {
                                label: COORD_LABEL.to_string(),
                                children,
                            }
                        }
                        other => other,
                    }
                })
                .collect();
            Tree::Node {
                label: label.clone(),
                children,
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::treebank::{parse_bracketed, strategies};
    use proptest::prelude::*;

    fn t(s: &str) -> Tree {
        parse_bracketed(s).unwrap()
    }

    #[test]
    fn relabels_flat_conjuncts() {
        let control = t("(NP (NP English) (CC and) (NP comparative literature))");
        assert_eq!(
            to_coord_annotation(&control).serialize(),
            "(NP (NP-COORD English) (CC and) (NP-COORD comparative literature))"
        );
        let bare = t("(NP (NP English) and (NP comparative literature))");
        assert_eq!(
            to_coord_annotation(&bare).serialize(),
            "(NP (NP-COORD English) and (NP-COORD comparative literature))"
        );
    }

    #[test]
    fn no_coordination_is_identity() {
        let tree = t("(S (NP (DT the) (NN door)) (VP (VBZ is) (ADJP (JJ open))))");
        assert_eq!(to_coord_annotation(&tree), tree);
        // a CC outside an NP does not trigger relabeling
        let clause = t("(S (S (NP I) (VP left)) (CC and) (S (NP you) (VP stayed)))");
        assert_eq!(to_coord_annotation(&clause), clause);
    }

    #[test]
    fn nested_coordination_three_levels() {
        let tree = t(
            "(S (NP-SBJ (NP (NP (DT the) (NN door)) (CC and) (NP (DT the) (NN window))) \
             (CC or) (NP (DT the) (NN roof))) (VP (VBZ is) (ADJP (JJ open))))",
        );
        let hand = "(S (NP-SBJ (NP-COORD (NP-COORD (DT the) (NN door)) (CC and) \
                    (NP-COORD (DT the) (NN window))) (CC or) (NP-COORD (DT the) (NN roof))) \
                    (VP (VBZ is) (ADJP (JJ open))))";
        assert_eq!(to_coord_annotation(&tree).serialize(), hand);
    }

    #[test]
    fn french_coordinators() {
        let tree = t("(NP (NP (DET les) (NC prix)) (CC et) (NP (DET les) (NC coûts)))");
        assert_eq!(
            to_coord_annotation(&tree).serialize(),
            "(NP (NP-COORD (DET les) (NC prix)) (CC et) (NP-COORD (DET les) (NC coûts)))"
        );
    }

    proptest! {
        #[test]
        fn idempotent(tree in strategies::tree()) {
            let once = to_coord_annotation(&tree);
            prop_assert_eq!(to_coord_annotation(&once), once.clone());
            prop_assert_eq!(once.words(), tree.words());
        }
    }
}
