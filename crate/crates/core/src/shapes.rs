//! Index shapes for diagrams: explicit finite categories, finite groups,
//! and preset shapes.  Infinite presets (the free monoid shapes and chains)
//! are expanded only up to a truncation depth; diagrams on them are supplied
//! by generators.

use crate::error::Result;
use crate::report::ValidationReport;
use std::collections::BTreeMap;

/// Object index inside an expanded shape.
pub type ObjectId = usize;
/// Arrow index inside an expanded shape.
pub type ArrowId = usize;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arrow {
    pub name: String,
    pub src: ObjectId,
    pub dst: ObjectId,
    pub is_identity: bool,
}

/// A 2-arrow between parallel arrows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TwoArrow {
    pub name: String,
    pub src: ArrowId,
    pub dst: ArrowId,
}

/// Explicit category data: all arrows (including identities) with a
/// composition table on composable pairs.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CategoryData {
    pub objects: Vec<String>,
    pub arrows: Vec<Arrow>,
    /// `(outer g, inner h) -> g o h` for arrows `h: x -> y`, `g: y -> z`.
    pub compose: BTreeMap<(ArrowId, ArrowId), ArrowId>,
}

/// Finite group data: element names and a multiplication table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupData {
    pub elements: Vec<String>,
    pub unit: usize,
    /// `table[g][h] = g * h`.
    pub table: Vec<Vec<usize>>,
}

/// 2-category data on top of a category: declared 2-arrows and an optional
/// vertical-composition table.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TwoCategoryData {
    pub category: CategoryData,
    pub twoarrows: Vec<TwoArrow>,
    /// `(later b, earlier a) -> b . a` for `a: g => h`, `b: h => k`.
    pub vcompose: BTreeMap<(usize, usize), usize>,
}

/// The shape of a diagram.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Shape {
    /// A set viewed as a category: `n` objects, identity arrows only.
    Discrete(usize),
    ExplicitCategory(CategoryData),
    FiniteGroup(GroupData),
    /// Three objects `a, b1, b2` and two legs `a -> b1`, `a -> b2`.
    Pushout,
    /// Two objects and two parallel arrows between them.
    Coequalizer,
    /// The free monoid on one generator, truncated at `depth`.
    EndoN { depth: usize },
    /// The free monoid on `k` generators, truncated at word length `depth`.
    FreeMonoid { letters: usize, depth: usize },
    /// Objects `0..=len` with a unique arrow `m -> n` for `m <= n`.
    ChainPrefix {
        len: usize,
        stabilized_from: Option<usize>,
    },
    TwoCategory(TwoCategoryData),
}

/// A shape expanded to explicit object/arrow lists with a (possibly
/// partial) composition table.  For truncated infinite shapes the
/// composition is undefined where the composite would leave the truncation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExpandedShape {
    pub objects: Vec<String>,
    pub arrows: Vec<Arrow>,
    pub compose: BTreeMap<(ArrowId, ArrowId), ArrowId>,
    pub twoarrows: Vec<TwoArrow>,
    /// Arrows that generate the others in a preset shape (in declaration
    /// order); equals all non-identity arrows for finite shapes.
    pub generators: Vec<ArrowId>,
    /// True when composition is only partially defined (truncated preset).
    pub truncated: bool,
}

impl ExpandedShape {
    pub fn identity_arrow(&self, object: ObjectId) -> ArrowId {
        self.arrows
            .iter()
            .position(|a| a.is_identity && a.src == object)
            .expect("every object has an identity arrow")
    }

    pub fn non_identity_arrows(&self) -> impl Iterator<Item = ArrowId> + '_ {
        (0..self.arrows.len()).filter(|&g| !self.arrows[g].is_identity)
    }

    /// Composite `g o h` when defined (`h` first, then `g`).
    pub fn compose(&self, g: ArrowId, h: ArrowId) -> Option<ArrowId> {
        if self.arrows[h].dst != self.arrows[g].src {
            return None;
        }
        if self.arrows[h].is_identity {
            return Some(g);
        }
        if self.arrows[g].is_identity {
            return Some(h);
        }
        self.compose.get(&(g, h)).copied()
    }

    /// Composable pairs of non-identity arrows whose composite exists.
    pub fn composable_pairs(&self) -> Vec<(ArrowId, ArrowId)> {
        let mut out = Vec::new();
        for g in self.non_identity_arrows() {
            for h in self.non_identity_arrows() {
                if self.arrows[h].dst == self.arrows[g].src && self.compose(g, h).is_some() {
                    out.push((g, h));
                }
            }
        }
        out
    }

    pub fn arrow_label(&self, g: ArrowId) -> &str {
        &self.arrows[g].name
    }
}

impl Shape {
    /// Expand a shape to explicit lists; preset shapes expand at the given
    /// truncation depth.
    pub fn expand(&self, depth: usize) -> Result<ExpandedShape> {
        match self {
            Shape::Discrete(n) => {
                let objects: Vec<String> = (0..*n).map(|i| format!("x{i}")).collect();
                let arrows = (0..*n)
                    .map(|i| Arrow {
                        name: format!("id_x{i}"),
                        src: i,
                        dst: i,
                        is_identity: true,
                    })
                    .collect();
                Ok(ExpandedShape {
                    objects,
                    arrows,
                    compose: BTreeMap::new(),
                    twoarrows: Vec::new(),
                    generators: Vec::new(),
                    truncated: false,
                })
            }
            Shape::Pushout => {
                let objects = vec!["a".into(), "b1".into(), "b2".into()];
                let mut arrows = identity_arrows(&objects);
                arrows.push(Arrow {
                    name: "e1".into(),
                    src: 0,
                    dst: 1,
                    is_identity: false,
                });
                arrows.push(Arrow {
                    name: "e2".into(),
                    src: 0,
                    dst: 2,
                    is_identity: false,
                });
                Ok(ExpandedShape {
                    objects,
                    arrows,
                    compose: BTreeMap::new(),
                    twoarrows: Vec::new(),
                    generators: vec![3, 4],
                    truncated: false,
                })
            }
            Shape::Coequalizer => {
                let objects = vec!["a1".into(), "a2".into()];
                let mut arrows = identity_arrows(&objects);
                arrows.push(Arrow {
                    name: "f1".into(),
                    src: 0,
                    dst: 1,
                    is_identity: false,
                });
                arrows.push(Arrow {
                    name: "f2".into(),
                    src: 0,
                    dst: 1,
                    is_identity: false,
                });
                Ok(ExpandedShape {
                    objects,
                    arrows,
                    compose: BTreeMap::new(),
                    twoarrows: Vec::new(),
                    generators: vec![2, 3],
                    truncated: false,
                })
            }
            Shape::EndoN { depth: d } => {
                let depth = if *d > 0 { *d } else { depth };
                let objects = vec!["x".to_string()];
                let mut arrows = vec![Arrow {
                    name: "0".into(),
                    src: 0,
                    dst: 0,
                    is_identity: true,
                }];
                for n in 1..=depth {
                    arrows.push(Arrow {
                        name: format!("{n}"),
                        src: 0,
                        dst: 0,
                        is_identity: false,
                    });
                }
                let mut compose = BTreeMap::new();
                for g in 1..=depth {
                    for h in 1..=depth {
                        if g + h <= depth {
                            compose.insert((g as ArrowId, h as ArrowId), (g + h) as ArrowId);
                        }
                    }
                }
                Ok(ExpandedShape {
                    objects,
                    arrows,
                    compose,
                    twoarrows: Vec::new(),
                    generators: vec![1],
                    truncated: true,
                })
            }
            Shape::FreeMonoid { letters, depth: d } => {
                let depth = if *d > 0 { *d } else { depth };
                let objects = vec!["x".to_string()];
                // Words over the alphabet in length-then-lex order; the
                // empty word is the identity.
                let mut words: Vec<Vec<usize>> = vec![Vec::new()];
                let mut frontier: Vec<Vec<usize>> = vec![Vec::new()];
                for _ in 0..depth {
                    let mut next = Vec::new();
                    for w in &frontier {
                        for l in 0..*letters {
                            let mut w2 = w.clone();
                            w2.push(l);
                            next.push(w2);
                        }
                    }
                    words.extend(next.iter().cloned());
                    frontier = next;
                }
                let word_name = |w: &[usize]| -> String {
                    if w.is_empty() {
                        "0".into()
                    } else {
                        w.iter()
                            .map(|l| format!("g{}", l + 1))
                            .collect::<Vec<_>>()
                            .join(".")
                    }
                };
                let index: BTreeMap<Vec<usize>, usize> = words
                    .iter()
                    .enumerate()
                    .map(|(i, w)| (w.clone(), i))
                    .collect();
                let arrows: Vec<Arrow> = words
                    .iter()
                    .map(|w| Arrow {
                        name: word_name(w),
                        src: 0,
                        dst: 0,
                        is_identity: w.is_empty(),
                    })
                    .collect();
                let mut compose = BTreeMap::new();
                for (wg, &g) in &index {
                    for (wh, &h) in &index {
                        if wg.is_empty() || wh.is_empty() {
                            continue;
                        }
                        if wg.len() + wh.len() <= depth {
                            // h happens first, so the word of g o h is
                            // w(h) ++ w(g); this matches the tensor order
                            // E_h (x) E_g -> E_{gh} for the generator
                            // extension.
                            let mut w = wh.clone();
                            w.extend_from_slice(wg);
                            compose.insert((g, h), index[&w]);
                        }
                    }
                }
                let generators = (0..*letters).map(|l| index[&vec![l]]).collect();
                Ok(ExpandedShape {
                    objects,
                    arrows,
                    compose,
                    twoarrows: Vec::new(),
                    generators,
                    truncated: true,
                })
            }
            Shape::ChainPrefix { len, .. } => {
                let objects: Vec<String> = (0..=*len).map(|i| format!("n{i}")).collect();
                let mut arrows = Vec::new();
                let mut index = BTreeMap::new();
                for m in 0..=*len {
                    for n in m..=*len {
                        index.insert((m, n), arrows.len());
                        arrows.push(Arrow {
                            name: format!("{m}->{n}"),
                            src: m,
                            dst: n,
                            is_identity: m == n,
                        });
                    }
                }
                let mut compose = BTreeMap::new();
                for m in 0..=*len {
                    for n in m..=*len {
                        for k in n..=*len {
                            if m < n && n < k {
                                compose.insert((index[&(n, k)], index[&(m, n)]), index[&(m, k)]);
                            }
                        }
                    }
                }
                let generators = (0..*len).map(|m| index[&(m, m + 1)]).collect();
                Ok(ExpandedShape {
                    objects,
                    arrows,
                    compose,
                    twoarrows: Vec::new(),
                    generators,
                    truncated: false,
                })
            }
            Shape::FiniteGroup(g) => {
                let objects = vec!["x".to_string()];
                let arrows: Vec<Arrow> = g
                    .elements
                    .iter()
                    .enumerate()
                    .map(|(i, name)| Arrow {
                        name: name.clone(),
                        src: 0,
                        dst: 0,
                        is_identity: i == g.unit,
                    })
                    .collect();
                let mut compose = BTreeMap::new();
                for a in 0..g.elements.len() {
                    for b in 0..g.elements.len() {
                        if a != g.unit && b != g.unit {
                            compose.insert((a, b), g.table[a][b]);
                        }
                    }
                }
                let generators = (0..g.elements.len()).filter(|&i| i != g.unit).collect();
                Ok(ExpandedShape {
                    objects,
                    arrows,
                    compose,
                    twoarrows: Vec::new(),
                    generators,
                    truncated: false,
                })
            }
            Shape::ExplicitCategory(c) => Ok(expand_category(c, Vec::new())),
            Shape::TwoCategory(tc) => Ok(expand_category(&tc.category, tc.twoarrows.clone())),
        }
    }
}

fn identity_arrows(objects: &[String]) -> Vec<Arrow> {
    objects
        .iter()
        .enumerate()
        .map(|(i, name)| Arrow {
            name: format!("id_{name}"),
            src: i,
            dst: i,
            is_identity: true,
        })
        .collect()
}

fn expand_category(c: &CategoryData, twoarrows: Vec<TwoArrow>) -> ExpandedShape {
    let generators = (0..c.arrows.len())
        .filter(|&g| !c.arrows[g].is_identity)
        .collect();
    ExpandedShape {
        objects: c.objects.clone(),
        arrows: c.arrows.clone(),
        compose: c.compose.clone(),
        twoarrows,
        generators,
        truncated: false,
    }
}

/// Verify the shape invariants: composition tables associative and unital
/// where defined, group tables actual groups, 2-arrows between parallel
/// arrows.  Preset shapes expand their implied object/arrow lists first.
pub fn validate_shape(s: &Shape, depth: usize) -> Result<ValidationReport> {
    let mut report = ValidationReport::new(format!("shape {s:?}"), 0.0);
    let expanded = s.expand(depth)?;
    report.require(
        "expansion",
        true,
        Some(format!(
            "{} objects, {} arrows",
            expanded.objects.len(),
            expanded.arrows.len()
        )),
    );
    // Composition table endpoints and totality on composable pairs for
    // non-truncated shapes.
    for (&(g, h), &gh) in &expanded.compose {
        let ok = expanded.arrows[h].dst == expanded.arrows[g].src
            && expanded.arrows[gh].src == expanded.arrows[h].src
            && expanded.arrows[gh].dst == expanded.arrows[g].dst;
        if !ok {
            report.require(
                "composition endpoints",
                false,
                Some(format!(
                    "{} o {} = {}",
                    expanded.arrow_label(g),
                    expanded.arrow_label(h),
                    expanded.arrow_label(gh)
                )),
            );
        }
    }
    if !expanded.truncated {
        for g in expanded.non_identity_arrows() {
            for h in expanded.non_identity_arrows() {
                if expanded.arrows[h].dst == expanded.arrows[g].src
                    && expanded.compose(g, h).is_none()
                {
                    report.require(
                        "composition total",
                        false,
                        Some(format!(
                            "undefined composite {} o {}",
                            expanded.arrow_label(g),
                            expanded.arrow_label(h)
                        )),
                    );
                }
            }
        }
    }
    // Associativity where all composites are defined.
    let mut assoc_ok = true;
    let mut assoc_witness = None;
    'outer: for f in expanded.non_identity_arrows() {
        for g in expanded.non_identity_arrows() {
            if expanded.arrows[f].dst != expanded.arrows[g].src {
                continue;
            }
            for h in expanded.non_identity_arrows() {
                if expanded.arrows[g].dst != expanded.arrows[h].src {
                    continue;
                }
                let gf = expanded.compose(g, f);
                let hg = expanded.compose(h, g);
                if let (Some(gf), Some(hg)) = (gf, hg) {
                    let left = expanded.compose(h, gf);
                    let right = expanded.compose(hg, f);
                    if let (Some(l), Some(r)) = (left, right) {
                        if l != r {
                            assoc_ok = false;
                            assoc_witness = Some(format!(
                                "({} o {}) o {} != {} o ({} o {})",
                                expanded.arrow_label(h),
                                expanded.arrow_label(g),
                                expanded.arrow_label(f),
                                expanded.arrow_label(h),
                                expanded.arrow_label(g),
                                expanded.arrow_label(f)
                            ));
                            break 'outer;
                        }
                    }
                }
            }
        }
    }
    report.require("composition associative", assoc_ok, assoc_witness);

    if let Shape::FiniteGroup(g) = s {
        let n = g.elements.len();
        let mut ok = g.unit < n && g.table.len() == n && g.table.iter().all(|r| r.len() == n);
        let mut witness = None;
        if ok {
            for a in 0..n {
                if g.table[g.unit][a] != a || g.table[a][g.unit] != a {
                    ok = false;
                    witness = Some(format!("unit fails at {}", g.elements[a]));
                }
                if !g.table[a].contains(&g.unit) {
                    ok = false;
                    witness = Some(format!("no inverse for {}", g.elements[a]));
                }
            }
            'grp: for a in 0..n {
                for b in 0..n {
                    for c in 0..n {
                        if g.table[g.table[a][b]][c] != g.table[a][g.table[b][c]] {
                            ok = false;
                            witness = Some(format!(
                                "associativity fails at ({}, {}, {})",
                                g.elements[a], g.elements[b], g.elements[c]
                            ));
                            break 'grp;
                        }
                    }
                }
            }
        }
        report.require("group axioms", ok, witness);
    }

    if let Shape::TwoCategory(tc) = s {
        for ta in &tc.twoarrows {
            let a = &tc.category.arrows[ta.src];
            let b = &tc.category.arrows[ta.dst];
            report.require(
                "2-arrows relate parallel arrows",
                a.src == b.src && a.dst == b.dst,
                Some(format!("{}: {} => {}", ta.name, a.name, b.name)),
            );
        }
        for (&(b, a), &c) in &tc.vcompose {
            let ok = tc.twoarrows[a].dst == tc.twoarrows[b].src
                && tc.twoarrows[c].src == tc.twoarrows[a].src
                && tc.twoarrows[c].dst == tc.twoarrows[b].dst;
            report.require(
                "vertical composition endpoints",
                ok,
                Some(format!(
                    "{} . {} = {}",
                    tc.twoarrows[b].name, tc.twoarrows[a].name, tc.twoarrows[c].name
                )),
            );
        }
        // Associativity of vertical composition where defined.
        for (&(b, a), &ba) in &tc.vcompose {
            for (&(c, b2), &cb) in &tc.vcompose {
                if b2 != b {
                    continue;
                }
                let left = tc.vcompose.get(&(c, ba));
                let right = tc.vcompose.get(&(cb, a));
                if let (Some(&l), Some(&r)) = (left, right) {
                    report.require(
                        "vertical composition associative",
                        l == r,
                        Some(format!(
                            "({}, {}, {})",
                            tc.twoarrows[c].name, tc.twoarrows[b].name, tc.twoarrows[a].name
                        )),
                    );
                }
            }
        }
    }
    Ok(report)
}

/// Build group data for Z/n with elements `e, g, g2, ...`.
pub fn cyclic_group(n: usize) -> GroupData {
    let elements = (0..n)
        .map(|i| {
            if i == 0 {
                "e".to_string()
            } else if i == 1 {
                "g".to_string()
            } else {
                format!("g{i}")
            }
        })
        .collect();
    let table = (0..n)
        .map(|a| (0..n).map(|b| (a + b) % n).collect())
        .collect();
    GroupData {
        elements,
        unit: 0,
        table,
    }
}

/// The Klein four-group with elements `e, a, b, ab`.
pub fn klein_four_group() -> GroupData {
    let elements = vec!["e".into(), "a".into(), "b".into(), "ab".into()];
    let mul = |x: usize, y: usize| x ^ y; // bit representation 0..3
    let table = (0..4).map(|a| (0..4).map(|b| mul(a, b)).collect()).collect();
    GroupData {
        elements,
        unit: 0,
        table,
    }
}

/// The symmetric group S3 as permutations of three points.
pub fn symmetric_group_3() -> GroupData {
    let perms: Vec<[usize; 3]> = vec![
        [0, 1, 2],
        [1, 0, 2],
        [0, 2, 1],
        [2, 1, 0],
        [1, 2, 0],
        [2, 0, 1],
    ];
    let names = vec![
        "e".to_string(),
        "s12".to_string(),
        "s23".to_string(),
        "s13".to_string(),
        "c123".to_string(),
        "c132".to_string(),
    ];
    let compose = |p: &[usize; 3], q: &[usize; 3]| -> [usize; 3] {
        // (p q)(x) = p(q(x))
        [p[q[0]], p[q[1]], p[q[2]]]
    };
    let table = (0..6)
        .map(|a| {
            (0..6)
                .map(|b| {
                    let pq = compose(&perms[a], &perms[b]);
                    perms.iter().position(|p| *p == pq).unwrap()
                })
                .collect()
        })
        .collect();
    GroupData {
        elements: names,
        unit: 0,
        table,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn z2_table_is_a_valid_group() {
        let s = Shape::FiniteGroup(cyclic_group(2));
        let report = validate_shape(&s, 3).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn pushout_expands_to_three_objects_two_legs() {
        let e = Shape::Pushout.expand(3).unwrap();
        assert_eq!(e.objects, vec!["a", "b1", "b2"]);
        assert_eq!(e.non_identity_arrows().count(), 2);
        assert!(e.composable_pairs().is_empty());
    }

    #[test]
    fn broken_associativity_is_rejected_with_witness() {
        // Three parallel endo-arrows with a non-associative table.
        let objects = vec!["x".to_string()];
        let mut arrows = identity_arrows(&objects);
        for name in ["p", "q", "r"] {
            arrows.push(Arrow {
                name: name.into(),
                src: 0,
                dst: 0,
                is_identity: false,
            });
        }
        let mut compose = BTreeMap::new();
        // p o p = q, q o p = r, p o q = p (breaks (p o p) o p vs p o (p o p)).
        for g in 1..=3usize {
            for h in 1..=3usize {
                compose.insert((g, h), 1);
            }
        }
        compose.insert((1, 1), 2);
        compose.insert((2, 1), 3);
        compose.insert((1, 2), 1);
        let s = Shape::ExplicitCategory(CategoryData {
            objects,
            arrows,
            compose,
        });
        let report = validate_shape(&s, 3).unwrap();
        assert!(!report.passed());
        let bad = report.first_failure().unwrap();
        assert!(bad.name.contains("associative"));
        assert!(bad.witness.is_some());
    }

    #[test]
    fn coequalizer_has_two_parallel_arrows() {
        let e = Shape::Coequalizer.expand(3).unwrap();
        let arrows: Vec<_> = e.non_identity_arrows().collect();
        assert_eq!(arrows.len(), 2);
        for &g in &arrows {
            assert_eq!(e.arrows[g].src, 0);
            assert_eq!(e.arrows[g].dst, 1);
        }
    }

    #[test]
    fn endo_expansion_matches_truncated_addition() {
        let e = Shape::EndoN { depth: 0 }.expand(4).unwrap();
        assert_eq!(e.arrows.len(), 5); // 0..=4
        assert_eq!(e.compose(1, 2), Some(3));
        assert_eq!(e.compose(3, 2), None); // would exceed depth
        assert!(e.truncated);
        assert_eq!(e.generators, vec![1]);
    }

    #[test]
    fn free_monoid_words() {
        let e = Shape::FreeMonoid {
            letters: 2,
            depth: 0,
        }
        .expand(2)
        .unwrap();
        // 1 + 2 + 4 words.
        assert_eq!(e.arrows.len(), 7);
        assert_eq!(e.generators.len(), 2);
    }

    #[test]
    fn s3_is_a_group() {
        let report = validate_shape(&Shape::FiniteGroup(symmetric_group_3()), 3).unwrap();
        assert!(report.passed());
    }

    #[test]
    fn chain_composition_is_total() {
        let e = Shape::ChainPrefix {
            len: 3,
            stabilized_from: None,
        }
        .expand(3)
        .unwrap();
        assert!(!e.truncated);
        for (g, h) in e.composable_pairs() {
            assert!(e.compose(g, h).is_some());
        }
    }
}
