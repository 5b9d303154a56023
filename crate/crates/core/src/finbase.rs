//! Finite sets, total maps, spans, chosen pullbacks and slice objects.
//!
//! Atoms are opaque strings. A set keeps its atoms in a canonical order, and
//! every construction below derives new atoms from old ones by a fixed rule,
//! so "the" pullback or coproduct is a function of its inputs.

use indexmap::{IndexMap, IndexSet};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};

pub type Atom = String;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FinSet {
    elems: IndexSet<Atom>,
}

impl FinSet {
    pub fn new<I, S>(atoms: I) -> Result<Self>
    where
        I: IntoIterator<Item = S>,
        S: Into<Atom>,
    {
        let mut elems = IndexSet::new();
        for a in atoms {
            let a = a.into();
            if !elems.insert(a.clone()) {
                return Err(Error::DuplicateAtom(a));
            }
        }
        Ok(FinSet { elems })
    }

    /// The set `{prefix0, …, prefix(n-1)}`.
    pub fn numbered(prefix: &str, n: usize) -> Self {
        FinSet { elems: (0..n).map(|i| format!("{prefix}{i}")).collect() }
    }

    pub fn empty() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.elems.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elems.is_empty()
    }

    pub fn contains(&self, a: &str) -> bool {
        self.elems.contains(a)
    }

    pub fn index_of(&self, a: &str) -> Option<usize> {
        self.elems.get_index_of(a)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.elems.iter()
    }

    pub fn atoms(&self) -> Vec<Atom> {
        self.elems.iter().cloned().collect()
    }

    pub fn get(&self, i: usize) -> Option<&Atom> {
        self.elems.get_index(i)
    }
}

impl Serialize for FinSet {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_seq(self.elems.iter())
    }
}

impl<'de> Deserialize<'de> for FinSet {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let v: Vec<Atom> = Vec::deserialize(d)?;
        FinSet::new(v).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FinMap {
    dom: FinSet,
    cod: FinSet,
    graph: IndexMap<Atom, Atom>,
}

#[derive(Serialize, Deserialize)]
struct FinMapRepr {
    dom: FinSet,
    cod: FinSet,
    graph: IndexMap<Atom, Atom>,
}

impl FinMap {
    /// Build a map from its graph. The graph is reordered to follow `dom`.
    pub fn new(dom: FinSet, cod: FinSet, graph: IndexMap<Atom, Atom>) -> Result<Self> {
        for k in graph.keys() {
            if !dom.contains(k) {
                return Err(Error::UnknownAtom(k.clone()));
            }
        }
        let mut ordered = IndexMap::with_capacity(dom.len());
        for a in dom.iter() {
            let b = graph.get(a).ok_or_else(|| Error::NotTotal(a.clone()))?;
            if !cod.contains(b) {
                return Err(Error::UnknownAtom(b.clone()));
            }
            ordered.insert(a.clone(), b.clone());
        }
        Ok(FinMap { dom, cod, graph: ordered })
    }

    pub fn from_fn(dom: FinSet, cod: FinSet, f: impl Fn(&str) -> Atom) -> Result<Self> {
        let graph = dom.iter().map(|a| (a.clone(), f(a))).collect();
        FinMap::new(dom, cod, graph)
    }

    pub fn identity(x: &FinSet) -> Self {
        let graph = x.iter().map(|a| (a.clone(), a.clone())).collect();
        FinMap { dom: x.clone(), cod: x.clone(), graph }
    }

    /// The unique map into a one-element set.
    pub fn to_terminal(x: &FinSet, point: &str) -> Self {
        FinMap {
            dom: x.clone(),
            cod: FinSet::new([point]).expect("singleton"),
            graph: x.iter().map(|a| (a.clone(), point.to_string())).collect(),
        }
    }

    pub fn dom(&self) -> &FinSet {
        &self.dom
    }

    pub fn cod(&self) -> &FinSet {
        &self.cod
    }

    pub fn graph(&self) -> &IndexMap<Atom, Atom> {
        &self.graph
    }

    pub fn apply(&self, a: &str) -> Result<&Atom> {
        self.graph.get(a).ok_or_else(|| Error::UnknownAtom(a.to_string()))
    }

    /// `g ∘ self`.
    pub fn then(&self, g: &FinMap) -> Result<FinMap> {
        if self.cod != g.dom {
            return Err(Error::CodomainMismatch("composite of non-adjacent maps".into()));
        }
        let graph = self.graph.iter().map(|(a, b)| (a.clone(), g.graph[b].clone())).collect();
        Ok(FinMap { dom: self.dom.clone(), cod: g.cod.clone(), graph })
    }

    pub fn is_injective(&self) -> bool {
        let image: IndexSet<&Atom> = self.graph.values().collect();
        image.len() == self.dom.len()
    }

    pub fn is_bijective(&self) -> bool {
        self.is_injective() && self.dom.len() == self.cod.len()
    }

    pub fn fiber(&self, b: &str) -> Vec<Atom> {
        self.graph.iter().filter(|(_, v)| v.as_str() == b).map(|(k, _)| k.clone()).collect()
    }

    /// Every map between two finite sets, in lexicographic order of images.
    pub fn all(dom: &FinSet, cod: &FinSet) -> Vec<FinMap> {
        let n = dom.len();
        let m = cod.len();
        if m == 0 {
            return if n == 0 { vec![FinMap::identity(dom)] } else { Vec::new() };
        }
        let mut out = Vec::new();
        let mut idx = vec![0usize; n];
        loop {
            let graph = dom.iter().zip(&idx).map(|(a, &i)| (a.clone(), cod.get(i).unwrap().clone())).collect();
            out.push(FinMap { dom: dom.clone(), cod: cod.clone(), graph });
            let mut k = n;
            loop {
                if k == 0 {
                    return out;
                }
                k -= 1;
                idx[k] += 1;
                if idx[k] < m {
                    break;
                }
                idx[k] = 0;
            }
        }
    }
}

impl Serialize for FinMap {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        FinMapRepr { dom: self.dom.clone(), cod: self.cod.clone(), graph: self.graph.clone() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for FinMap {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = FinMapRepr::deserialize(d)?;
        FinMap::new(r.dom, r.cod, r.graph).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub apex: FinSet,
    pub left: FinMap,
    pub right: FinMap,
}

impl Span {
    pub fn new(left: FinMap, right: FinMap) -> Result<Self> {
        if left.dom() != right.dom() {
            return Err(Error::CodomainMismatch("span legs have different domains".into()));
        }
        Ok(Span { apex: left.dom().clone(), left, right })
    }
}

/// An object `total → base` of the slice category over `base`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SliceObj {
    pub total: FinSet,
    pub proj: FinMap,
    pub base: FinSet,
}

impl SliceObj {
    pub fn new(proj: FinMap) -> Self {
        SliceObj { total: proj.dom().clone(), base: proj.cod().clone(), proj }
    }

    /// `base` with one element over each point.
    pub fn identity(base: &FinSet) -> Self {
        SliceObj::new(FinMap::identity(base))
    }
}

/// Canonical atom for an ordered pair.
pub fn pair_atom(a: &str, b: &str) -> Atom {
    format!("({a},{b})")
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Pullback {
    pub apex: FinSet,
    pub pa: FinMap,
    pub pb: FinMap,
}

/// The chosen pullback of `f: A → C` and `g: B → C`: all pairs `(a,b)` with
/// `f a = g b`, ordered lexicographically by the orders of `A` and `B`.
pub fn pullback(f: &FinMap, g: &FinMap) -> Result<Pullback> {
    if f.cod() != g.cod() {
        return Err(Error::CodomainMismatch("pullback legs must share a codomain".into()));
    }
    let mut apex = Vec::new();
    let mut ga = IndexMap::new();
    let mut gb = IndexMap::new();
    for (a, fa) in f.graph() {
        for (b, gb_) in g.graph() {
            if fa == gb_ {
                let p = pair_atom(a, b);
                ga.insert(p.clone(), a.clone());
                gb.insert(p.clone(), b.clone());
                apex.push(p);
            }
        }
    }
    let apex = FinSet::new(apex)?;
    Ok(Pullback {
        pa: FinMap::new(apex.clone(), f.dom().clone(), ga)?,
        pb: FinMap::new(apex.clone(), g.dom().clone(), gb)?,
        apex,
    })
}

/// A commuting square
/// ```text
///   P --q--> B
///   |        |
///   p        g
///   v        v
///   A --f--> C
/// ```
#[derive(Debug, Clone)]
pub struct Square {
    pub p: FinMap,
    pub q: FinMap,
    pub f: FinMap,
    pub g: FinMap,
}

/// Whether a commuting square is a pullback. Errors if it does not commute.
pub fn is_pullback(sq: &Square) -> Result<bool> {
    if sq.p.dom() != sq.q.dom() || sq.p.cod() != sq.f.dom() || sq.q.cod() != sq.g.dom() {
        return Err(Error::CodomainMismatch("square edges do not line up".into()));
    }
    for x in sq.p.dom().iter() {
        if sq.f.apply(sq.p.apply(x)?)? != sq.g.apply(sq.q.apply(x)?)? {
            return Err(Error::NotCommuting(x.clone()));
        }
    }
    let pb = pullback(&sq.f, &sq.g)?;
    let mut hit = IndexSet::new();
    for x in sq.p.dom().iter() {
        let c = pair_atom(sq.p.apply(x)?, sq.q.apply(x)?);
        if !hit.insert(c) {
            return Ok(false);
        }
    }
    Ok(hit.len() == pb.apex.len())
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coproduct {
    pub sum: FinSet,
    pub inl: FinMap,
    pub inr: FinMap,
}

pub fn inl_atom(a: &str) -> Atom {
    format!("inl({a})")
}

pub fn inr_atom(b: &str) -> Atom {
    format!("inr({b})")
}

/// Tagged disjoint union `A + B`.
pub fn coproduct(a: &FinSet, b: &FinSet) -> Coproduct {
    let sum = FinSet::new(a.iter().map(|x| inl_atom(x)).chain(b.iter().map(|y| inr_atom(y))))
        .expect("tags keep summands disjoint");
    let inl = FinMap::from_fn(a.clone(), sum.clone(), inl_atom).expect("total");
    let inr = FinMap::from_fn(b.clone(), sum.clone(), inr_atom).expect("total");
    Coproduct { sum, inl, inr }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(n: usize) -> FinSet {
        FinSet::numbered("x", n)
    }

    #[test]
    fn duplicates_rejected() {
        assert_eq!(FinSet::new(["a", "a"]), Err(Error::DuplicateAtom("a".into())));
    }

    #[test]
    fn partial_map_rejected() {
        let g = IndexMap::from([("x0".to_string(), "x0".to_string())]);
        assert!(matches!(FinMap::new(set(2), set(1), g), Err(Error::NotTotal(_))));
    }

    #[test]
    fn pullback_over_terminal_is_product() {
        let f = FinMap::to_terminal(&set(2), "*");
        let g = FinMap::to_terminal(&FinSet::numbered("y", 3), "*");
        let pb = pullback(&f, &g).unwrap();
        assert_eq!(pb.apex.len(), 6);
        assert_eq!(pb.apex.get(0).unwrap(), "(x0,y0)");
    }

    #[test]
    fn pullback_along_identity() {
        let f = FinMap::identity(&set(3));
        let g = FinMap::from_fn(FinSet::numbered("y", 2), set(3), |y| format!("x{}", &y[1..])).unwrap();
        let pb = pullback(&f, &g).unwrap();
        assert_eq!(pb.apex.len(), 2);
        assert!(pb.pb.is_bijective());
    }

    #[test]
    fn kernel_pair_of_identity_is_diagonal() {
        let id = FinMap::identity(&set(2));
        assert_eq!(pullback(&id, &id).unwrap().apex.len(), 2);
    }

    #[test]
    fn mismatched_codomains() {
        let f = FinMap::identity(&set(2));
        let g = FinMap::identity(&set(3));
        assert!(pullback(&f, &g).is_err());
    }

    #[test]
    fn strict_subset_is_not_pullback() {
        let f = FinMap::to_terminal(&set(2), "*");
        let pb = pullback(&f, &f).unwrap();
        let keep = FinSet::new(pb.apex.iter().take(3).cloned()).unwrap();
        let restrict = |m: &FinMap| {
            FinMap::new(keep.clone(), m.cod().clone(), m.graph().iter().take(3).map(|(a, b)| (a.clone(), b.clone())).collect()).unwrap()
        };
        let sq = Square { p: restrict(&pb.pa), q: restrict(&pb.pb), f: f.clone(), g: f };
        assert_eq!(is_pullback(&sq), Ok(false));
    }

    #[test]
    fn non_commuting_square_errors() {
        let two = set(2);
        let swap = FinMap::from_fn(two.clone(), two.clone(), |a| if a == "x0" { "x1".into() } else { "x0".into() }).unwrap();
        let id = FinMap::identity(&two);
        let sq = Square { p: id.clone(), q: id.clone(), f: id, g: swap };
        assert!(matches!(is_pullback(&sq), Err(Error::NotCommuting(_))));
    }

    #[test]
    fn coproducts() {
        assert_eq!(coproduct(&set(2), &set(3)).sum.len(), 5);
        let e = coproduct(&FinSet::empty(), &set(3));
        assert_eq!(e.sum.len(), 3);
        assert!(e.inr.is_bijective());
        let d = coproduct(&set(2), &set(2));
        assert_eq!(d.sum.len(), 4);
    }

    #[test]
    fn json_shapes() {
        let f = FinMap::to_terminal(&set(2), "*");
        let v = serde_json::to_value(&f).unwrap();
        assert_eq!(v["dom"], serde_json::json!(["x0", "x1"]));
        assert_eq!(v["graph"]["x1"], "*");
        let back: FinMap = serde_json::from_value(v).unwrap();
        assert_eq!(back, f);
        assert!(serde_json::from_str::<FinSet>(r#"["a","a"]"#).is_err());
    }

    #[test]
    fn all_maps_count() {
        assert_eq!(FinMap::all(&set(2), &set(3)).len(), 9);
        assert_eq!(FinMap::all(&set(0), &set(0)).len(), 1);
        assert_eq!(FinMap::all(&set(2), &set(0)).len(), 0);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn map_strategy() -> impl Strategy<Value = (usize, usize, usize, Vec<usize>, Vec<usize>)> {
            (0usize..4, 0usize..4, 1usize..4).prop_flat_map(|(a, b, c)| {
                (Just(a), Just(b), Just(c), proptest::collection::vec(0..c, a), proptest::collection::vec(0..c, b))
            })
        }

        fn build(n: usize, img: &[usize], cod: &FinSet, p: &str) -> FinMap {
            let dom = FinSet::numbered(p, n);
            FinMap::from_fn(dom, cod.clone(), |a| cod.get(img[a[1..].parse::<usize>().unwrap()]).unwrap().clone()).unwrap()
        }

        proptest! {
            #[test]
            fn chosen_pullback_is_pullback((a, b, c, fi, gi) in map_strategy()) {
                let cod = FinSet::numbered("c", c);
                let f = build(a, &fi, &cod, "a");
                let g = build(b, &gi, &cod, "b");
                let pb = pullback(&f, &g).unwrap();
                let sq = Square { p: pb.pa.clone(), q: pb.pb.clone(), f: f.clone(), g: g.clone() };
                prop_assert_eq!(is_pullback(&sq), Ok(true));
                // symmetric up to swapping components, and reproducible
                let swapped = pullback(&g, &f).unwrap();
                prop_assert_eq!(swapped.apex.len(), pb.apex.len());
                prop_assert_eq!(pullback(&f, &g).unwrap(), pb);
            }
        }
    }
}
