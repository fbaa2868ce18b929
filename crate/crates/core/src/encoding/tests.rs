use proptest::prelude::*;

use super::*;
use crate::trees::{
    assign_heads, generate_random_tree, parse_discbracket, Direction, HeadRuleSet, NO_POS,
};

const FIGURE1: &str = "(VROOT (S (NP 0=Es (NP 2=nichts 3=Interessantes)) 1=kam) 4=.)";

fn figure1() -> ConstituentTree {
    let rules = HeadRuleSet::parse("VROOT left S\nS right VVFIN\nNP right NN NP\n").unwrap();
    assign_heads(&parse_discbracket(FIGURE1).unwrap(), &rules)
}

fn label(s: &str) -> AugmentedLabel {
    s.parse().unwrap()
}

fn tokens(n: usize) -> Vec<Token> {
    (0..n).map(|i| Token::new(i, format!("w{i}"), NO_POS)).collect()
}

#[test]
fn figure1_arcs() {
    let dep = encode(&figure1()).unwrap();
    let arcs: Vec<(usize, usize, String)> = dep
        .arcs()
        .into_iter()
        .map(|(h, d, l)| (h, d, l.to_string()))
        .collect();
    // Es=1 kam=2 nichts=3 Interessantes=4 .=5
    assert_eq!(
        arcs,
        vec![
            (4, 1, "NP#2".to_string()),
            (0, 2, "root".to_string()),
            (4, 3, "NP#1".to_string()),
            (2, 4, "S#1".to_string()),
            (2, 5, "VROOT#2".to_string()),
        ]
    );
    assert!(!dep.is_projective());
    assert_eq!(decode(&dep).unwrap(), figure1());
}

#[test]
fn single_terminal() {
    let t = parse_discbracket("0=a").unwrap();
    let dep = encode(&t).unwrap();
    assert_eq!(dep.arcs(), vec![(0, 1, AugmentedLabel::Root)]);
    assert_eq!(decode(&dep).unwrap(), t);
}

#[test]
fn gapped_example() {
    let t = assign_heads(
        &parse_discbracket("(S (A 0=x 2=z) (B 1=y))").unwrap(),
        &HeadRuleSet::new(Direction::Left),
    );
    let dep = encode(&t).unwrap();
    assert_eq!(dep.heads(), &[0, 1, 1]);
    assert_eq!(
        dep.labels(),
        &[AugmentedLabel::Root, label("S#2"), label("A#1")]
    );
    // the unary B cannot be represented
    assert_eq!(decode(&dep).unwrap(), t.strip_unaries());
}

#[test]
fn encode_rejects_unheaded() {
    let t = parse_discbracket("(S 0=a 1=b)").unwrap();
    assert!(matches!(encode(&t), Err(Error::Structure(_))));
}

#[test]
fn unaries_are_transparent() {
    let rules = HeadRuleSet::parse("S right\n").unwrap();
    let t = assign_heads(&parse_discbracket("(S (X (NP 0=a)) (VP 1=b 2=c))").unwrap(), &rules);
    let stripped = t.strip_unaries();
    assert_eq!(encode(&t).unwrap(), encode(&stripped).unwrap());
    assert_eq!(decode(&encode(&t).unwrap()).unwrap(), stripped);
}

#[test]
fn structural_validation() {
    let l = || vec![AugmentedLabel::Root, label("X#1")];
    assert!(AugmentedDependencyTree::new(tokens(2), vec![0, 0], l()).is_err());
    assert!(AugmentedDependencyTree::new(tokens(2), vec![2, 1], l()).is_err());
    assert!(AugmentedDependencyTree::new(tokens(2), vec![0, 2], l()).is_err());
    assert!(AugmentedDependencyTree::new(tokens(2), vec![0, 3], l()).is_err());
    assert!(AugmentedDependencyTree::new(tokens(2), vec![0, 1], l()).is_ok());
    assert!(!is_acyclic(&[0, 3, 2]));
    assert!(is_acyclic(&[0, 1, 2]));
}

#[test]
fn label_syntax() {
    assert_eq!(label("NP#2"), AugmentedLabel::attach("NP", 2));
    assert_eq!(label("root"), AugmentedLabel::Root);
    assert_eq!(label("$#X#1"), AugmentedLabel::attach("$#X", 1));
    for bad in ["NP", "NP#0", "#1", "NP#x"] {
        assert!(bad.parse::<AugmentedLabel>().is_err(), "{bad}");
    }
}

#[test]
fn repair_compresses_gaps() {
    let dep = AugmentedDependencyTree::new(
        tokens(3),
        vec![0, 1, 1],
        vec![AugmentedLabel::Root, label("X#1"), label("Y#3")],
    )
    .unwrap();
    assert!(decode(&dep).is_err());
    let fixed = repair_labels(&dep);
    assert_eq!(fixed.labels()[1..], [label("X#1"), label("Y#2")]);
    decode(&fixed).unwrap();

    let dep = AugmentedDependencyTree::new(
        tokens(2),
        vec![0, 1],
        vec![AugmentedLabel::Root, label("X#2")],
    )
    .unwrap();
    assert_eq!(repair_labels(&dep).labels()[1], label("X#1"));
}

#[test]
fn repair_leftmost_nonterminal_wins() {
    let dep = AugmentedDependencyTree::new(
        tokens(3),
        vec![0, 1, 1],
        vec![AugmentedLabel::Root, label("X#1"), label("Y#1")],
    )
    .unwrap();
    let fixed = repair_labels(&dep);
    assert_eq!(fixed.labels()[1..], [label("X#1"), label("X#1")]);
}

#[test]
fn repair_root_labels() {
    let dep = AugmentedDependencyTree::new(
        tokens(3),
        vec![2, 0, 2],
        vec![label("Z#4"), label("S#1"), AugmentedLabel::Root],
    )
    .unwrap();
    let fixed = repair_labels(&dep);
    assert_eq!(
        fixed.labels(),
        &[label("Z#1"), AugmentedLabel::Root, label("Z#1")]
    );
    decode(&fixed).unwrap();

    let dep = AugmentedDependencyTree::new(
        tokens(2),
        vec![0, 1],
        vec![AugmentedLabel::Root, AugmentedLabel::Root],
    )
    .unwrap();
    assert_eq!(repair_labels(&dep).labels()[1], label("VROOT#1"));
}

#[test]
fn well_formed_labels_are_repair_fixed_points() {
    let dep = encode(&figure1()).unwrap();
    assert_eq!(repair_labels(&dep), dep);
}

/// A discontinuous constituent need not produce crossing arcs: here the
/// gapped A and S share the head x, so every maximal projection is an
/// interval.
#[test]
fn discontinuity_without_crossing_arcs() {
    let t = assign_heads(
        &parse_discbracket("(S (A 0=x 2=z) 1=y)").unwrap(),
        &HeadRuleSet::new(Direction::Left),
    );
    assert!(t.has_discontinuity());
    assert!(encode(&t).unwrap().is_projective());
}

fn head_annotated(n: usize, seed: u64) -> ConstituentTree {
    let rules = HeadRuleSet::parse(include_str!("../../../../data/synthetic.rules")).unwrap();
    assign_heads(&generate_random_tree(n, 0.3, seed).unwrap(), &rules)
}

fn arb_dependency() -> impl Strategy<Value = AugmentedDependencyTree> {
    (1usize..12, any::<u64>()).prop_flat_map(|(n, seed)| {
        let labels = proptest::collection::vec(
            prop_oneof![
                Just(AugmentedLabel::Root),
                ("[A-D]", 1usize..5).prop_map(|(x, p)| AugmentedLabel::attach(x, p)),
            ],
            n,
        );
        labels.prop_map(move |labels| {
            // Random recursive tree: each word hangs from the root or an
            // earlier word in a seeded permutation.
            use rand::seq::SliceRandom;
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let mut order: Vec<usize> = (1..=n).collect();
            order.shuffle(&mut rng);
            let mut heads = vec![0; n];
            for k in 1..n {
                heads[order[k] - 1] = order[rng.gen_range(0..k)];
            }
            AugmentedDependencyTree::new(tokens(n), heads, labels).unwrap()
        })
    })
}

proptest! {
    #[test]
    fn round_trip(n in 1usize..20, seed in any::<u64>()) {
        let t = head_annotated(n, seed);
        let dep = encode(&t).unwrap();
        prop_assert_eq!(dep.len(), n);
        prop_assert_eq!(decode(&dep).unwrap(), t.clone());

        // orders per head are exactly 1..spine length
        let spines = crate::trees::extract_spines(&t).unwrap();
        let groups = level_groups(&dep).unwrap();
        for (w, spine) in spines.iter().enumerate() {
            prop_assert_eq!(groups[w].len(), spine.levels.len());
        }

        // crossing arcs imply a discontinuous constituent
        if !dep.is_projective() {
            prop_assert!(t.has_discontinuity());
        }
    }

    #[test]
    fn repair_makes_decodable(dep in arb_dependency()) {
        let fixed = repair_labels(&dep);
        let tree = decode(&fixed).unwrap();
        prop_assert_eq!(tree.len(), dep.len());
        prop_assert_eq!(repair_labels(&fixed), fixed);
    }
}

#[test]
fn dependency_columns_round_trip() {
    let deps = vec![encode(&figure1()).unwrap(), encode(&head_annotated(9, 3)).unwrap()];
    let mut buf = Vec::new();
    write_dependencies(&mut buf, &deps).unwrap();
    let text = String::from_utf8(buf.clone()).unwrap();
    assert!(text.starts_with("1\tEs\t_\t4\tNP#2\n2\tkam\t_\t0\troot\n"));
    assert_eq!(read_dependencies(&buf[..]).unwrap(), deps);
}

#[test]
fn dependency_format_errors() {
    let err = read_dependencies("1\ta\t_\t0\troot\n2\tb\t_\t1\n".as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Format { line: 2, .. }), "{err}");
    let err = read_dependencies("1\ta\t_\t0\troot\n2\tb\t_\t0\troot\n\n".as_bytes()).unwrap_err();
    assert!(matches!(err, Error::Format { line: 1, .. }), "{err}");
}
