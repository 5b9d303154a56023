//! Cartesian monads on finite sets, with size-bounded enumeration and
//! bounded checks of the monad laws and of cartesianness.
//!
//! Elements of `T X` for every shipped instance are terms of one small
//! grammar, [`Shape`]. Elements of `T T X` are `Shape<Shape<A>>`, so the
//! same code handles every level of nesting.

use std::collections::BTreeSet;
use std::fmt::Debug;
use std::hash::Hash;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::finbase::{pullback, Atom, FinMap, FinSet};
use crate::report::Report;

pub trait Label: Clone + Ord + Eq + Hash + Debug + Send + Sync {}
impl<T: Clone + Ord + Eq + Hash + Debug + Send + Sync> Label for T {}

/// A term over atoms of type `A`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape<A> {
    Leaf(A),
    Seq(Vec<Shape<A>>),
    /// The extra point of `X + 1`.
    Point,
}

pub type TElem = Shape<Atom>;

impl<A> Shape<A> {
    pub fn leaves(&self) -> Vec<&A> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves<'a>(&'a self, out: &mut Vec<&'a A>) {
        match self {
            Shape::Leaf(a) => out.push(a),
            Shape::Seq(cs) => cs.iter().for_each(|c| c.collect_leaves(out)),
            Shape::Point => {}
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            Shape::Leaf(_) => 1,
            Shape::Seq(cs) => cs.iter().map(Shape::leaf_count).sum(),
            Shape::Point => 0,
        }
    }

    /// Structural map over leaves, without any re-normalisation.
    pub fn fmap<B>(&self, f: &mut impl FnMut(&A) -> B) -> Shape<B> {
        match self {
            Shape::Leaf(a) => Shape::Leaf(f(a)),
            Shape::Seq(cs) => Shape::Seq(cs.iter().map(|c| c.fmap(f)).collect()),
            Shape::Point => Shape::Point,
        }
    }

    pub fn try_fmap<B, E>(&self, f: &mut impl FnMut(&A) -> std::result::Result<B, E>) -> std::result::Result<Shape<B>, E> {
        Ok(match self {
            Shape::Leaf(a) => Shape::Leaf(f(a)?),
            Shape::Seq(cs) => Shape::Seq(cs.iter().map(|c| c.try_fmap(f)).collect::<std::result::Result<_, _>>()?),
            Shape::Point => Shape::Point,
        })
    }

    /// Replace the leaves left to right by `labels`.
    pub fn relabel<B: Clone>(&self, labels: &[B]) -> Result<Shape<B>> {
        if labels.len() != self.leaf_count() {
            return Err(Error::Arity { expected: self.leaf_count(), got: labels.len() });
        }
        let mut i = 0;
        Ok(self.fmap(&mut |_| {
            i += 1;
            labels[i - 1].clone()
        }))
    }

    pub fn erase(&self) -> Shape<()> {
        self.fmap(&mut |_| ())
    }
}

impl<A> Shape<Shape<A>> {
    /// Substitute every leaf by the term it carries.
    fn substitute(&self) -> Shape<A>
    where
        A: Clone,
    {
        match self {
            Shape::Leaf(t) => t.clone(),
            Shape::Seq(cs) => Shape::Seq(cs.iter().map(Shape::substitute).collect()),
            Shape::Point => Shape::Point,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MonadInstance {
    Identity,
    FreeMonoid,
    MaybePoint,
    #[serde(rename = "bd-tree")]
    BDTree,
    FreeCommMonoid,
    /// The tree monad with a deliberately broken multiplication that reverses
    /// the root's children. Kept as a negative control for the law checker.
    CorruptedTree,
}

impl MonadInstance {
    pub const CARTESIAN: [MonadInstance; 4] =
        [MonadInstance::Identity, MonadInstance::FreeMonoid, MonadInstance::MaybePoint, MonadInstance::BDTree];

    pub fn name(self) -> &'static str {
        match self {
            MonadInstance::Identity => "identity",
            MonadInstance::FreeMonoid => "free-monoid",
            MonadInstance::MaybePoint => "maybe-point",
            MonadInstance::BDTree => "bd-tree",
            MonadInstance::FreeCommMonoid => "free-comm-monoid",
            MonadInstance::CorruptedTree => "corrupted-tree",
        }
    }

    pub fn from_name(s: &str) -> Result<Self> {
        Ok(match s {
            "identity" => MonadInstance::Identity,
            "free-monoid" => MonadInstance::FreeMonoid,
            "maybe-point" => MonadInstance::MaybePoint,
            "bd-tree" | "tree" => MonadInstance::BDTree,
            "free-comm-monoid" => MonadInstance::FreeCommMonoid,
            "corrupted-tree" => MonadInstance::CorruptedTree,
            other => return Err(Error::Unsupported(format!("unknown monad instance `{other}`"))),
        })
    }

    fn is_list(self) -> bool {
        matches!(self, MonadInstance::FreeMonoid | MonadInstance::FreeCommMonoid)
    }

    /// Sequences count their entries; trees count nodes and leaves; the
    /// identity and `X + 1` have every element of size 1.
    pub fn size_of<A>(self, e: &Shape<A>) -> usize {
        match (self, e) {
            (_, Shape::Leaf(_)) | (_, Shape::Point) => 1,
            (m, Shape::Seq(cs)) if m.is_list() => cs.len(),
            (_, Shape::Seq(cs)) => 1 + cs.iter().map(|c| self.size_of(c)).sum::<usize>(),
        }
    }

    pub fn is_well_formed<A: Label>(self, e: &Shape<A>) -> bool {
        match self {
            MonadInstance::Identity => matches!(e, Shape::Leaf(_)),
            MonadInstance::MaybePoint => matches!(e, Shape::Leaf(_) | Shape::Point),
            MonadInstance::FreeMonoid => match e {
                Shape::Seq(cs) => cs.iter().all(|c| matches!(c, Shape::Leaf(_))),
                _ => false,
            },
            MonadInstance::FreeCommMonoid => match e {
                Shape::Seq(cs) => cs.iter().all(|c| matches!(c, Shape::Leaf(_))) && cs.windows(2).all(|w| w[0] <= w[1]),
                _ => false,
            },
            MonadInstance::BDTree | MonadInstance::CorruptedTree => tree_ok(e),
        }
    }

    pub fn unit<A>(self, a: A) -> Shape<A> {
        if self.is_list() {
            Shape::Seq(vec![Shape::Leaf(a)])
        } else {
            Shape::Leaf(a)
        }
    }

    /// `T f`.
    pub fn map<A, B: Label>(self, e: &Shape<A>, f: impl Fn(&A) -> B) -> Shape<B> {
        self.normalize(e.fmap(&mut |a| f(a)))
    }

    pub fn try_map<A, B: Label>(self, e: &Shape<A>, f: impl Fn(&A) -> Result<B>) -> Result<Shape<B>> {
        Ok(self.normalize(e.try_fmap(&mut |a| f(a))?))
    }

    fn normalize<A: Label>(self, e: Shape<A>) -> Shape<A> {
        match (self, e) {
            (MonadInstance::FreeCommMonoid, Shape::Seq(mut cs)) => {
                cs.sort();
                Shape::Seq(cs)
            }
            (_, e) => e,
        }
    }

    /// `μ : T T X → T X`.
    pub fn mult<A: Label>(self, e: &Shape<Shape<A>>) -> Result<Shape<A>> {
        if !self.is_well_formed(e) {
            return Err(Error::Malformed(format!("{} outer term {:?}", self.name(), e.erase())));
        }
        if let Some(bad) = e.leaves().into_iter().find(|t| !self.is_well_formed(*t)) {
            return Err(Error::Malformed(format!("{} inner term {:?}", self.name(), bad.erase())));
        }
        Ok(match self {
            MonadInstance::Identity | MonadInstance::MaybePoint | MonadInstance::BDTree => e.substitute(),
            MonadInstance::FreeMonoid | MonadInstance::FreeCommMonoid => {
                let mut items = Vec::new();
                for t in e.leaves() {
                    if let Shape::Seq(cs) = t {
                        items.extend(cs.iter().cloned());
                    }
                }
                self.normalize(Shape::Seq(items))
            }
            MonadInstance::CorruptedTree => match e.substitute() {
                Shape::Seq(mut cs) => {
                    cs.reverse();
                    Shape::Seq(cs)
                }
                t => t,
            },
        })
    }

    /// All shapes of size at most `bound`, holes marked `()`, in canonical
    /// order (by size, then structurally).
    pub fn shapes(self, bound: usize) -> Vec<Shape<()>> {
        match self {
            MonadInstance::Identity => {
                if bound >= 1 {
                    vec![Shape::Leaf(())]
                } else {
                    vec![]
                }
            }
            MonadInstance::MaybePoint => {
                if bound >= 1 {
                    vec![Shape::Leaf(()), Shape::Point]
                } else {
                    vec![]
                }
            }
            MonadInstance::FreeMonoid | MonadInstance::FreeCommMonoid => {
                (0..=bound).map(|k| Shape::Seq(vec![Shape::Leaf(()); k])).collect()
            }
            MonadInstance::BDTree | MonadInstance::CorruptedTree => {
                (1..=bound).flat_map(tree_shapes_of_size).collect()
            }
        }
    }

    /// All elements of `T X` of size at most `bound`.
    pub fn enumerate<A: Label>(self, xs: &[A], bound: usize) -> Vec<Shape<A>> {
        let weighted: Vec<(A, usize)> = xs.iter().map(|x| (x.clone(), 0)).collect();
        self.enumerate_weighted(&weighted, bound, 0)
    }

    pub fn enumerate_set(self, x: &FinSet, bound: usize) -> Vec<TElem> {
        self.enumerate(&x.atoms(), bound)
    }

    /// Elements of `T A` of size at most `bound` whose leaves' weights sum to
    /// at most `budget`.
    pub fn enumerate_weighted<A: Label>(self, atoms: &[(A, usize)], bound: usize, budget: usize) -> Vec<Shape<A>> {
        // Lightest first, so the search can stop as soon as the budget is spent.
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by_key(|&i| atoms[i].1);
        let sorted: Vec<(A, usize)> = order.iter().map(|&i| atoms[i].clone()).collect();
        let mut out = Vec::new();
        for s in self.shapes(bound) {
            let holes = s.leaf_count();
            let mut picks = Vec::with_capacity(holes);
            fill(&sorted, holes, budget, self == MonadInstance::FreeCommMonoid, 0, &mut picks, &mut |idx| {
                let labels: Vec<A> = idx.iter().map(|&i| sorted[i].0.clone()).collect();
                out.push(self.normalize(s.relabel(&labels).expect("hole count matches")));
            });
        }
        out
    }

    /// Elements of `T A` whose total size, the size of the outer term plus
    /// the weights of its leaves, is at most `bound`.
    pub fn enumerate_sized<A: Label>(self, atoms: &[(A, usize)], bound: usize) -> Vec<Shape<A>> {
        let mut order: Vec<usize> = (0..atoms.len()).collect();
        order.sort_by_key(|&i| atoms[i].1);
        let sorted: Vec<(A, usize)> = order.iter().map(|&i| atoms[i].clone()).collect();
        let mut out = Vec::new();
        for s in self.shapes(bound) {
            let holes = s.leaf_count();
            let budget = bound - self.size_of(&s);
            let mut picks = Vec::with_capacity(holes);
            fill(&sorted, holes, budget, self == MonadInstance::FreeCommMonoid, 0, &mut picks, &mut |idx| {
                let labels: Vec<A> = idx.iter().map(|&i| sorted[i].0.clone()).collect();
                out.push(self.normalize(s.relabel(&labels).expect("hole count matches")));
            });
        }
        out
    }

    /// All `u` with `T f (u) = e`, where `pre` lists the preimages of a leaf.
    pub fn fibre<A: Label, B>(self, e: &Shape<B>, pre: impl Fn(&B) -> Vec<A>) -> Vec<Shape<A>> {
        let options: Vec<Vec<A>> = e.leaves().into_iter().map(pre).collect();
        let mut out = BTreeSet::new();
        let mut ordered = Vec::new();
        product(&options, &mut Vec::new(), &mut |labels| {
            let u = self.normalize(e.relabel(labels).expect("leaf count"));
            if out.insert(u.clone()) {
                ordered.push(u);
            }
        });
        ordered
    }

    pub fn to_json(self, e: &TElem) -> Value {
        self.to_json_with(e, &|x| json!(x))
    }

    /// JSON for a term whose leaves serialize through `leaf`.
    pub fn to_json_with<A>(self, e: &Shape<A>, leaf: &impl Fn(&A) -> Value) -> Value {
        match (self, e) {
            (MonadInstance::MaybePoint, Shape::Leaf(x)) => json!({ "inl": leaf(x) }),
            (_, Shape::Point) => json!({ "inr": null }),
            (_, Shape::Leaf(x)) => leaf(x),
            (_, Shape::Seq(cs)) => Value::Array(cs.iter().map(|c| self.to_json_with(c, leaf)).collect()),
        }
    }

    pub fn from_json(self, v: &Value) -> Result<TElem> {
        self.from_json_with(v, &|x| match x {
            Value::String(s) => Ok(s.clone()),
            _ => Err(Error::Malformed(format!("bad element {v}"))),
        })
    }

    /// Inverse of [`MonadInstance::to_json_with`]; arrays and `inl`/`inr`
    /// objects are structure, anything else is handed to `leaf`.
    pub fn from_json_with<A: Label>(self, v: &Value, leaf: &impl Fn(&Value) -> Result<A>) -> Result<Shape<A>> {
        let e = parse_shape(v, leaf)?;
        let e = self.normalize(e);
        if self.is_well_formed(&e) {
            Ok(e)
        } else {
            Err(Error::Malformed(format!("{} element {v}", self.name())))
        }
    }

    /// Canonical string form of an element, used to name derived atoms.
    pub fn key(self, e: &TElem) -> String {
        self.to_json(e).to_string()
    }
}

fn tree_ok<A>(e: &Shape<A>) -> bool {
    match e {
        Shape::Leaf(_) => true,
        Shape::Seq(cs) => cs.iter().all(tree_ok),
        Shape::Point => false,
    }
}

fn parse_shape<A>(v: &Value, leaf: &impl Fn(&Value) -> Result<A>) -> Result<Shape<A>> {
    match v {
        Value::Array(xs) => Ok(Shape::Seq(xs.iter().map(|x| parse_shape(x, leaf)).collect::<Result<_>>()?)),
        Value::Object(o) if o.len() == 1 && o.contains_key("inr") => Ok(Shape::Point),
        Value::Object(o) if o.len() == 1 && o.contains_key("inl") => Ok(Shape::Leaf(leaf(&o["inl"])?)),
        _ => Ok(Shape::Leaf(leaf(v)?)),
    }
}

fn tree_shapes_of_size(n: usize) -> Vec<Shape<()>> {
    if n == 0 {
        return vec![];
    }
    if n == 1 {
        return vec![Shape::Leaf(()), Shape::Seq(vec![])];
    }
    let mut out = Vec::new();
    for parts in compositions(n - 1) {
        let options: Vec<Vec<Shape<()>>> = parts.iter().map(|&p| tree_shapes_of_size(p)).collect();
        product(&options, &mut Vec::new(), &mut |cs| out.push(Shape::Seq(cs.to_vec())));
    }
    out
}

/// Ordered compositions of `n` into positive parts.
pub fn compositions(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut out = Vec::new();
    for first in 1..=n {
        for mut rest in compositions(n - first) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Cartesian product of option lists, in lexicographic order.
pub fn product<T: Clone>(options: &[Vec<T>], acc: &mut Vec<T>, emit: &mut impl FnMut(&[T])) {
    if acc.len() == options.len() {
        emit(acc);
        return;
    }
    for o in &options[acc.len()] {
        acc.push(o.clone());
        product(options, acc, emit);
        acc.pop();
    }
}

fn fill<A>(
    atoms: &[(A, usize)],
    holes: usize,
    budget: usize,
    nondecreasing: bool,
    start: usize,
    acc: &mut Vec<usize>,
    emit: &mut impl FnMut(&[usize]),
) {
    if acc.len() == holes {
        emit(acc);
        return;
    }
    let from = if nondecreasing { start } else { 0 };
    for (i, (_, w)) in atoms.iter().enumerate().skip(from) {
        if *w > budget {
            break;
        }
        acc.push(i);
        fill(atoms, holes, budget - w, nondecreasing, i, acc, emit);
        acc.pop();
    }
}

/// Elements of `T T X` inside the window used by the checks: outer size at
/// most `bound`, built from elements of `T X` of size at most `bound`, and
/// with flattening of size at most `bound`.
pub fn window2<A: Label>(m: MonadInstance, xs: &[A], bound: usize) -> Vec<Shape<Shape<A>>> {
    let inner: Vec<(Shape<A>, usize)> = m.enumerate(xs, bound).into_iter().map(|t| {
        let w = m.size_of(&t);
        (t, w)
    }).collect();
    nest(m, &inner, bound)
}

fn nest<A: Label>(m: MonadInstance, inner: &[(Shape<A>, usize)], bound: usize) -> Vec<Shape<Shape<A>>> {
    m.enumerate_weighted(inner, bound, bound)
        .into_iter()
        .filter(|w| m.mult(w).map(|f| m.size_of(&f) <= bound).unwrap_or(false))
        .collect()
}

/// Elements of `T T T X` of total size at most `bound + 2`, counting every
/// constructor at every level. The slack of two is exactly what `η η e`
/// needs, so every element of `T X` of size at most `bound` appears here
/// wrapped twice, alongside all the genuinely nested elements that fit.
pub fn window3<A: Label>(m: MonadInstance, xs: &[A], bound: usize) -> Vec<Shape<Shape<Shape<A>>>> {
    let bound = bound + 2;
    let level1: Vec<(Shape<A>, usize)> = m.enumerate(xs, bound).into_iter().map(|t| {
        let w = m.size_of(&t);
        (t, w)
    }).collect();
    let level2: Vec<(Shape<Shape<A>>, usize)> = m
        .enumerate_sized(&level1, bound)
        .into_iter()
        .map(|w| {
            let total = m.size_of(&w) + w.leaves().iter().map(|t| m.size_of(*t)).sum::<usize>();
            (w, total)
        })
        .collect();
    m.enumerate_sized(&level2, bound)
}

pub fn check_monad_laws(m: MonadInstance, x: &FinSet, bound: usize) -> Report {
    check_monad_laws_with(Exec::default(), m, x, bound)
}

/// `μ∘ηT = id = μ∘Tη` on `T X` and `μ∘μT = μ∘Tμ` on `T T T X`, within the
/// window of size `bound`.
pub fn check_monad_laws_with(exec: Exec, m: MonadInstance, x: &FinSet, bound: usize) -> Report {
    let xs = x.atoms();
    let mut report = Report::new();
    let elems = m.enumerate(&xs, bound);
    let unit_results = exec.map(&elems, |e| {
        let mut r = Report::new();
        r.checked += 1;
        match m.mult(&m.unit(e.clone())) {
            Ok(ref v) if v == e => {}
            other => r.fail("left unit", format!("{:?} -> {:?}", e, other)),
        }
        match m.mult(&m.map(e, |a| m.unit(a.clone()))) {
            Ok(ref v) if v == e => {}
            other => r.fail("right unit", format!("{:?} -> {:?}", e, other)),
        }
        r
    });
    unit_results.into_iter().for_each(|r| report.merge(r));
    let triples = window3(m, &xs, bound);
    let assoc = exec.map(&triples, |e| {
        let mut r = Report::new();
        r.checked += 1;
        let left = m.mult(e).and_then(|f| m.mult(&f));
        let right = m.try_map(e, |w| m.mult(w)).and_then(|f| m.mult(&f));
        if left != right || left.is_err() {
            r.fail("associativity", format!("{:?}: {:?} vs {:?}", e, left, right));
        }
        r
    });
    assoc.into_iter().for_each(|r| report.merge(r));
    report
}

pub fn check_cartesian(m: MonadInstance, f: &FinMap, bound: usize) -> Report {
    check_cartesian_with(Exec::default(), m, f, bound)
}

/// Bounded cartesianness at `f: X → Y`: the η- and μ-naturality squares are
/// pullbacks for every element of the window over `Y`, and `T` keeps two
/// sample chosen pullbacks (the kernel pair of `f`, and `f` against the
/// identity of `Y`) pullbacks within the window.
pub fn check_cartesian_with(exec: Exec, m: MonadInstance, f: &FinMap, bound: usize) -> Report {
    let mut report = Report::new();
    let pre = |y: &Atom| f.fiber(y);
    let ys = f.cod().atoms();

    for y in &ys {
        for u in m.fibre(&m.unit(y.clone()), pre) {
            report.checked += 1;
            let lifts = f.fiber(y).into_iter().filter(|x| m.unit(x.clone()) == u).count();
            if lifts != 1 {
                report.fail("eta-naturality", format!("y={y}, u={u:?}: {lifts} lifts"));
            }
        }
    }

    let ws = window2(m, &ys, bound);
    let mu = exec.map(&ws, |w| {
        let mut r = Report::new();
        let flat = match m.mult(w) {
            Ok(v) => v,
            Err(e) => {
                r.fail("mu-naturality", format!("{w:?}: {e}"));
                return r;
            }
        };
        let lifts_of_w = m.fibre(w, |z| m.fibre(z, pre));
        for u in m.fibre(&flat, pre) {
            r.checked += 1;
            let lifts = lifts_of_w.iter().filter(|v| m.mult(*v).as_ref() == Ok(&u)).count();
            if lifts != 1 {
                r.fail("mu-naturality", format!("w={w:?}, u={u:?}: {lifts} lifts"));
            }
        }
        r
    });
    mu.into_iter().for_each(|r| report.merge(r));

    let samples = [(f.clone(), f.clone()), (f.clone(), FinMap::identity(f.cod()))];
    for (a, b) in samples {
        let pb = pullback(&a, &b).expect("shared codomain");
        let ss = m.enumerate_set(a.dom(), bound);
        let pres = exec.map(&ss, |s| {
            let mut r = Report::new();
            let image = m.map(s, |x| a.graph()[x].clone());
            let lifts_of_s = m.fibre(s, |x| pb.pa.fiber(x));
            for t in m.fibre(&image, |c| b.fiber(c)) {
                r.checked += 1;
                let lifts = lifts_of_s.iter().filter(|q| m.map(*q, |p| pb.pb.graph()[p].clone()) == t).count();
                if lifts != 1 {
                    r.fail("pullback-preservation", format!("s={s:?}, t={t:?}: {lifts} lifts"));
                }
            }
            r
        });
        pres.into_iter().for_each(|r| report.merge(r));
    }
    report
}
