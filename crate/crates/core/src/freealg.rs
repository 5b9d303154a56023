//! Free multicategories on graphs, structured categories, and the
//! free/forgetful pair between structured categories and multicategories.

use std::collections::HashMap;

use indexmap::IndexMap;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::finbase::{Atom, FinMap, FinSet};
use crate::monadkit::{product, MonadInstance, Shape, TElem};
use crate::multicat::{MGraph, MultiMap, Multicat};
use crate::report::Report;

/// A term of the free multicategory: an identity, or a generator with a
/// term plugged into each input. A generator on its own carries identities.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum FreeArrow {
    Id(Atom),
    Node { gen: Atom, inner: Box<Shape<FreeArrow>> },
}

impl FreeArrow {
    pub fn generator(g: &MGraph, gen: &str) -> FreeArrow {
        FreeArrow::Node { gen: gen.to_string(), inner: Box::new(g.d(gen).fmap(&mut |s| FreeArrow::Id(s.clone()))) }
    }

    /// Number of generator occurrences.
    pub fn size(&self) -> usize {
        match self {
            FreeArrow::Id(_) => 0,
            FreeArrow::Node { inner, .. } => 1 + inner.leaves().iter().map(|a| a.size()).sum::<usize>(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            FreeArrow::Id(_) => 0,
            FreeArrow::Node { inner, .. } => 1 + inner.leaves().iter().map(|a| a.depth()).max().unwrap_or(0),
        }
    }

    pub fn dom(&self, g: &MGraph) -> TElem {
        match self {
            FreeArrow::Id(s) => g.monad.unit(s.clone()),
            FreeArrow::Node { inner, .. } => {
                g.monad.mult(&inner.fmap(&mut |a| a.dom(g))).expect("domains are well formed")
            }
        }
    }

    pub fn cod<'g>(&'g self, g: &'g MGraph) -> &'g Atom {
        match self {
            FreeArrow::Id(s) => s,
            FreeArrow::Node { gen, .. } => g.c(gen),
        }
    }

    fn is_bare(&self) -> bool {
        matches!(self, FreeArrow::Node { inner, .. } if inner.leaves().iter().all(|a| matches!(a, FreeArrow::Id(_))))
    }

    pub fn to_json(&self, m: MonadInstance) -> Value {
        match self {
            FreeArrow::Id(s) => json!({ "id": s }),
            FreeArrow::Node { gen, .. } if self.is_bare() => json!({ "gen": gen }),
            FreeArrow::Node { gen, inner } => json!({ "outer": gen, "inner": m.to_json_with(inner, &|a| a.to_json(m)) }),
        }
    }

    pub fn from_json(g: &MGraph, v: &Value) -> Result<FreeArrow> {
        let m = g.monad;
        let text = |k: &str| v.get(k).and_then(Value::as_str).map(str::to_string);
        let gen_ok = |x: &str| if g.arrows.contains(x) { Ok(()) } else { Err(Error::UnknownAtom(x.to_string())) };
        if let Some(s) = text("id") {
            if !g.objects.contains(&s) {
                return Err(Error::UnknownAtom(s));
            }
            return Ok(FreeArrow::Id(s));
        }
        if let Some(x) = text("gen") {
            gen_ok(&x)?;
            return Ok(FreeArrow::generator(g, &x));
        }
        let x = text("outer").ok_or_else(|| Error::Json(format!("not a free arrow: {v}")))?;
        gen_ok(&x)?;
        let inner = m.from_json_with(v.get("inner").unwrap_or(&Value::Null), &|w| FreeArrow::from_json(g, w))?;
        let cods = m.map(&inner, |a| a.cod(g).clone());
        if &cods != g.d(&x) {
            return Err(Error::NotComposable(format!("inputs of {x} do not match {v}")));
        }
        Ok(FreeArrow::Node { gen: x, inner: Box::new(inner) })
    }
}

/// Plug `inner` into the inputs of `outer`.
pub fn graft(g: &MGraph, outer: &FreeArrow, inner: &Shape<FreeArrow>) -> Result<FreeArrow> {
    let cods = g.monad.map(inner, |a| a.cod(g).clone());
    if cods != outer.dom(g) {
        return Err(Error::NotComposable(format!("{cods:?} does not match the inputs of the outer arrow")));
    }
    Ok(graft_unchecked(g, outer, &inner.leaves().into_iter().cloned().collect::<Vec<_>>()))
}

fn graft_unchecked(g: &MGraph, outer: &FreeArrow, plugs: &[FreeArrow]) -> FreeArrow {
    match outer {
        FreeArrow::Id(_) => plugs[0].clone(),
        FreeArrow::Node { gen, inner } => {
            let mut rest = plugs;
            let mut grafted = Vec::new();
            for a in inner.leaves() {
                let k = a.dom(g).leaf_count();
                grafted.push(graft_unchecked(g, a, &rest[..k]));
                rest = &rest[k..];
            }
            FreeArrow::Node { gen: gen.clone(), inner: Box::new(inner.relabel(&grafted).expect("leaf count")) }
        }
    }
}

/// Ways to write `n` as an ordered sum of `k` non-negative parts.
pub fn weak_compositions(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return if n == 0 { vec![vec![]] } else { vec![] };
    }
    let mut out = Vec::new();
    for first in 0..=n {
        for mut rest in weak_compositions(n - first, k - 1) {
            rest.insert(0, first);
            out.push(rest);
        }
    }
    out
}

/// Every term of size at most `bound`, by size and then generator order.
pub fn free_arrows(g: &MGraph, bound: usize) -> Vec<FreeArrow> {
    // layers[k][s]: terms of size k into s
    let mut layers: Vec<HashMap<Atom, Vec<FreeArrow>>> = Vec::new();
    layers.push(g.objects.iter().map(|s| (s.clone(), vec![FreeArrow::Id(s.clone())])).collect());
    for k in 1..=bound {
        let mut layer: HashMap<Atom, Vec<FreeArrow>> = HashMap::new();
        for gen in g.arrows.iter() {
            let d = g.d(gen);
            let inputs: Vec<&Atom> = d.leaves();
            for parts in weak_compositions(k - 1, inputs.len()) {
                let options: Vec<Vec<FreeArrow>> = parts
                    .iter()
                    .zip(&inputs)
                    .map(|(&p, s)| layers[p].get(*s).cloned().unwrap_or_default())
                    .collect();
                product(&options, &mut Vec::new(), &mut |choice: &[FreeArrow]| {
                    let inner = Box::new(d.relabel(choice).expect("leaf count"));
                    layer.entry(g.c(gen).clone()).or_default().push(FreeArrow::Node { gen: gen.clone(), inner });
                });
            }
        }
        layers.push(layer);
    }
    let mut out = Vec::new();
    for layer in &layers {
        for s in g.objects.iter() {
            out.extend(layer.get(s).into_iter().flatten().cloned());
        }
    }
    out
}

/// The stage `A⁽ⁿ⁾ = G₀ + G₁ ∘ A⁽ⁿ⁻¹⁾` of the colimit, starting from the
/// identities and cut to terms of size at most `bound`.
pub fn depth_iteration(g: &MGraph, n: usize, bound: usize) -> Vec<FreeArrow> {
    let ids: Vec<FreeArrow> = g.objects.iter().map(|s| FreeArrow::Id(s.clone())).collect();
    let mut stage = ids.clone();
    for _ in 0..n {
        let mut next = ids.clone();
        for gen in g.arrows.iter() {
            let d = g.d(gen);
            let options: Vec<Vec<FreeArrow>> =
                d.leaves().iter().map(|s| stage.iter().filter(|a| a.cod(g) == *s).cloned().collect()).collect();
            product(&options, &mut Vec::new(), &mut |choice: &[FreeArrow]| {
                if 1 + choice.iter().map(FreeArrow::size).sum::<usize>() <= bound {
                    next.push(FreeArrow::Node { gen: gen.clone(), inner: Box::new(d.relabel(choice).expect("leaf count")) });
                }
            });
        }
        stage = next;
    }
    stage
}

/// A bounded fragment of the free multicategory, with each arrow's term.
#[derive(Debug, Clone)]
pub struct FreeFragment {
    pub multicat: Multicat,
    pub terms: IndexMap<Atom, FreeArrow>,
}

impl FreeFragment {
    pub fn name_of(&self, a: &FreeArrow) -> Atom {
        a.to_json(self.multicat.monad()).to_string()
    }
}

pub fn free_multicategory(g: &MGraph, bound: usize) -> FreeFragment {
    let m = g.monad;
    let arrows = free_arrows(g, bound);
    let names: Vec<Atom> = arrows.iter().map(|a| a.to_json(m).to_string()).collect();
    let terms: IndexMap<Atom, FreeArrow> = names.iter().cloned().zip(arrows.iter().cloned()).collect();
    let by_term: HashMap<&FreeArrow, &Atom> = arrows.iter().zip(&names).collect();
    let graph = MGraph::new(
        m,
        g.objects.clone(),
        FinSet::new(names.clone()).expect("terms are distinct"),
        names.iter().cloned().zip(arrows.iter().map(|a| a.dom(g))).collect(),
        names.iter().cloned().zip(arrows.iter().map(|a| a.cod(g).clone())).collect(),
    )
    .expect("free graph is well formed");
    let ids = g.objects.iter().map(|s| (s.clone(), by_term[&FreeArrow::Id(s.clone())].clone())).collect();
    let size = |a: &Atom| terms[a].size();
    let multicat = Multicat::tabulate_within(graph, ids, size, |a| bound.saturating_sub(size(a)), |a, beta| {
        let plugs: Vec<FreeArrow> = beta.leaves().iter().map(|b| terms[*b].clone()).collect();
        let r = graft_unchecked(g, &terms[a], &plugs);
        by_term.get(&r).map(|n| (*n).clone())
    })
    .expect("grafting stays inside the graph");
    FreeFragment { multicat, terms }
}

/// Every graph map from `g` to the underlying graph of `target`, as an
/// object map and a generator assignment.
pub fn graph_maps(g: &MGraph, target: &Multicat) -> Vec<(FinMap, IndexMap<Atom, Atom>)> {
    let t = &target.graph;
    let mut out = Vec::new();
    for f0 in FinMap::all(&g.objects, &t.objects) {
        let options: Vec<Vec<Atom>> = g
            .arrows
            .iter()
            .map(|a| {
                let d = g.monad.map(g.d(a), |s| f0.graph()[s].clone());
                let c = &f0.graph()[g.c(a)];
                t.arrows.iter().filter(|b| t.d(b) == &d && t.c(b) == c).cloned().collect()
            })
            .collect();
        product(&options, &mut Vec::new(), &mut |choice: &[Atom]| {
            out.push((f0.clone(), g.arrows.iter().cloned().zip(choice.iter().cloned()).collect()));
        });
    }
    out
}

/// Count the multicategory maps from a free fragment to `target` that agree
/// with the given graph map on generators, by exhaustive backtracking.
pub fn count_extensions(g: &MGraph, free: &FreeFragment, target: &Multicat, f0: &FinMap, gens: &IndexMap<Atom, Atom>) -> usize {
    let mc = &free.multicat;
    let t = &target.graph;
    let order: Vec<&Atom> = mc.graph.arrows.iter().collect();
    let pos: HashMap<&Atom, usize> = order.iter().enumerate().map(|(i, a)| (*a, i)).collect();
    // each composition constraint is checked once its last participant is set
    let mut due: Vec<Vec<(&Atom, &TElem, &Atom)>> = vec![Vec::new(); order.len()];
    for ((a, beta), r) in &mc.comp {
        let last = beta.leaves().iter().map(|b| pos[*b]).chain([pos[a], pos[r]]).max().expect("nonempty");
        due[last].push((a, beta, r));
    }
    let candidates: Vec<Vec<Atom>> = order
        .iter()
        .map(|a| match &free.terms[*a] {
            FreeArrow::Id(s) => vec![target.id(&f0.graph()[s]).clone()],
            term if term.is_bare() => {
                let FreeArrow::Node { gen, .. } = term else { unreachable!() };
                vec![gens[gen].clone()]
            }
            _ => {
                let d = g.monad.map(mc.graph.d(a), |s| f0.graph()[s].clone());
                let c = &f0.graph()[mc.graph.c(a)];
                t.arrows.iter().filter(|b| t.d(b) == &d && t.c(b) == c).cloned().collect()
            }
        })
        .collect();
    let mut assignment: Vec<Atom> = Vec::with_capacity(order.len());
    fn search(
        i: usize,
        assignment: &mut Vec<Atom>,
        candidates: &[Vec<Atom>],
        due: &[Vec<(&Atom, &TElem, &Atom)>],
        pos: &HashMap<&Atom, usize>,
        target: &Multicat,
    ) -> usize {
        if i == candidates.len() {
            return 1;
        }
        let mut total = 0;
        for v in &candidates[i] {
            assignment.push(v.clone());
            let ok = due[i].iter().all(|(a, beta, r)| {
                let image = target.graph.monad.map(beta, |b| assignment[pos[b]].clone());
                target.composite(&assignment[pos[a]], &image) == Some(&assignment[pos[r]])
            });
            if ok {
                total += search(i + 1, assignment, candidates, due, pos, target);
            }
            assignment.pop();
        }
        total
    }
    search(0, &mut assignment, &candidates, &due, &pos, target)
}

/// A category object in algebras for the monad, tabulated on a bounded
/// fragment: `tensor_obj` and `tensor_arr` give `⊗` wherever it is recorded.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructCat {
    pub monad: MonadInstance,
    pub objects: FinSet,
    pub arrows: FinSet,
    pub src: IndexMap<Atom, Atom>,
    pub tgt: IndexMap<Atom, Atom>,
    pub ids: IndexMap<Atom, Atom>,
    /// `(g, f) ↦ g ∘ f`.
    pub comp: HashMap<(Atom, Atom), Atom>,
    pub tensor_obj: HashMap<TElem, Atom>,
    pub tensor_arr: HashMap<TElem, Atom>,
}

impl StructCat {
    pub fn hom(&self, x: &str, y: &str) -> Vec<&Atom> {
        self.arrows.iter().filter(|f| self.src[*f] == x && self.tgt[*f] == y).collect()
    }

    /// A monoid viewed as a discrete structured category over the free
    /// monoid monad; `⊗` is recorded on words of length at most `len`.
    pub fn discrete_monoid(elements: &FinSet, op: impl Fn(&str, &str) -> Atom, unit: &str, len: usize) -> StructCat {
        let m = MonadInstance::FreeMonoid;
        let id = |x: &str| format!("id_{x}");
        let arrows = FinSet::new(elements.iter().map(|x| id(x))).expect("distinct");
        let mut tensor_obj = HashMap::new();
        let mut tensor_arr = HashMap::new();
        for w in m.enumerate_set(elements, len) {
            let p = w.leaves().iter().fold(unit.to_string(), |acc, x| op(&acc, x));
            tensor_arr.insert(m.map(&w, |x| id(x)), id(&p));
            tensor_obj.insert(w, p);
        }
        StructCat {
            monad: m,
            objects: elements.clone(),
            src: elements.iter().map(|x| (id(x), x.clone())).collect(),
            tgt: elements.iter().map(|x| (id(x), x.clone())).collect(),
            ids: elements.iter().map(|x| (x.clone(), id(x))).collect(),
            comp: elements.iter().map(|x| ((id(x), id(x)), id(x))).collect(),
            arrows,
            tensor_obj,
            tensor_arr,
        }
    }

    /// `(ℕ, +)` truncated at `top`, as a one-object structured category whose
    /// arrows are numbers and whose tensor and composition both add.
    pub fn truncated_naturals(top: usize, len: usize) -> StructCat {
        let m = MonadInstance::FreeMonoid;
        let n = |k: usize| format!("n{k}");
        let star = FinSet::new(["*"]).expect("singleton");
        let arrows = FinSet::new((0..=top).map(n)).expect("distinct");
        let mut comp = HashMap::new();
        for i in 0..=top {
            for j in 0..=top - i {
                comp.insert((n(i), n(j)), n(i + j));
            }
        }
        let tensor_obj = m.enumerate_set(&star, len).into_iter().map(|w| (w, "*".to_string())).collect();
        let mut tensor_arr = HashMap::new();
        for w in m.enumerate_set(&arrows, len) {
            let sum: usize = w.leaves().iter().map(|x| x[1..].parse::<usize>().expect("numbered")).sum();
            if sum <= top {
                tensor_arr.insert(w, n(sum));
            }
        }
        StructCat {
            monad: m,
            objects: star,
            src: arrows.iter().map(|a| (a.clone(), "*".to_string())).collect(),
            tgt: arrows.iter().map(|a| (a.clone(), "*".to_string())).collect(),
            ids: IndexMap::from([("*".to_string(), n(0))]),
            arrows,
            comp,
            tensor_obj,
            tensor_arr,
        }
    }
}

/// Category laws, functoriality of `⊗`, and the algebra laws for `⊗` on
/// objects, wherever the recorded tables reach.
pub fn check_struct_cat(d: &StructCat) -> Report {
    let m = d.monad;
    let mut r = Report::new();
    for f in d.arrows.iter() {
        r.checked += 1;
        let (s, t) = (&d.src[f], &d.tgt[f]);
        if d.comp.get(&(f.clone(), d.ids[s].clone())) != Some(f) || d.comp.get(&(d.ids[t].clone(), f.clone())) != Some(f) {
            r.fail("category unit", f.clone());
        }
    }
    for ((g, f), gf) in &d.comp {
        r.checked += 1;
        if d.src[g] != d.tgt[f] || d.src[gf] != d.src[f] || d.tgt[gf] != d.tgt[g] {
            r.fail("composite boundary", format!("{g} ∘ {f}"));
        }
        for h in d.arrows.iter().filter(|h| d.src[*h] == d.tgt[g]) {
            let lhs = d.comp.get(&(h.clone(), g.clone())).and_then(|hg| d.comp.get(&(hg.clone(), f.clone())));
            let rhs = d.comp.get(&(h.clone(), gf.clone()));
            if let (Some(a), Some(b)) = (lhs, rhs) {
                r.checked += 1;
                if a != b {
                    r.fail("category associativity", format!("{h} ∘ {g} ∘ {f}"));
                }
            }
        }
    }
    for (w, x) in &d.tensor_obj {
        if let Some(id) = d.tensor_arr.get(&m.map(w, |s| d.ids[s].clone())) {
            r.checked += 1;
            if id != &d.ids[x] {
                r.fail("tensor preserves identities", format!("{w:?}"));
            }
        }
    }
    for x in d.objects.iter() {
        if let Some(y) = d.tensor_obj.get(&m.unit(x.clone())) {
            r.checked += 1;
            if y != x {
                r.fail("tensor unit law", x.clone());
            }
        }
    }
    for (w, f) in &d.tensor_arr {
        r.checked += 1;
        let s = d.tensor_obj.get(&m.map(w, |a| d.src[a].clone()));
        let t = d.tensor_obj.get(&m.map(w, |a| d.tgt[a].clone()));
        if s.is_some_and(|s| s != &d.src[f]) || t.is_some_and(|t| t != &d.tgt[f]) {
            r.fail("tensor boundary", format!("{w:?}"));
        }
    }
    // interchange: ⊗ of leafwise composites is the composite of the ⊗s
    for (wg, g) in &d.tensor_arr {
        let mids = m.map(wg, |a| d.src[a].clone());
        for (wf, f) in d.tensor_arr.iter().filter(|(wf, _)| m.map(wf, |a| d.tgt[a].clone()) == mids) {
            let pairs: Vec<Option<Atom>> = wg
                .leaves()
                .iter()
                .zip(wf.leaves())
                .map(|(a, b)| d.comp.get(&((*a).clone(), b.clone())).cloned())
                .collect();
            let Some(pairs) = pairs.into_iter().collect::<Option<Vec<_>>>() else { continue };
            let lhs = d.tensor_arr.get(&wg.relabel(&pairs).expect("same shape"));
            let rhs = d.comp.get(&(g.clone(), f.clone()));
            if let (Some(a), Some(b)) = (lhs, rhs) {
                r.checked += 1;
                if a != b {
                    r.fail("tensor interchange", format!("{wg:?} after {wf:?}"));
                }
            }
        }
    }
    // ⊗ ∘ μ = ⊗ ∘ T⊗ on the recorded part
    let mut preimages: HashMap<&Atom, Vec<&TElem>> = HashMap::new();
    for (w, x) in &d.tensor_obj {
        preimages.entry(x).or_default().push(w);
    }
    for (outer, x) in &d.tensor_obj {
        for big in m.fibre(outer, |y| preimages.get(y).map(|v| v.iter().map(|w| (*w).clone()).collect()).unwrap_or_default()) {
            let Ok(flat) = m.mult(&big) else { continue };
            if let Some(y) = d.tensor_obj.get(&flat) {
                r.checked += 1;
                if y != x {
                    r.fail("tensor associativity", format!("{big:?}"));
                }
            }
        }
    }
    r
}

pub fn forget_structured(d: &StructCat) -> Result<Multicat> {
    let m = d.monad;
    let mut keys: Vec<&TElem> = d.tensor_obj.keys().collect();
    keys.sort();
    let mut names = Vec::new();
    let mut elems: HashMap<Atom, (TElem, Atom)> = HashMap::new();
    let mut dom = IndexMap::new();
    let mut cod = IndexMap::new();
    for xi in keys {
        let s = &d.tensor_obj[xi];
        for u in d.arrows.iter().filter(|u| &d.src[*u] == s) {
            let name = json!([m.to_json(xi), u]).to_string();
            dom.insert(name.clone(), xi.clone());
            cod.insert(name.clone(), d.tgt[u].clone());
            elems.insert(name.clone(), (xi.clone(), u.clone()));
            names.push(name);
        }
    }
    let lookup: HashMap<(TElem, Atom), Atom> = elems.iter().map(|(n, e)| (e.clone(), n.clone())).collect();
    let graph = MGraph::new(m, d.objects.clone(), FinSet::new(names)?, dom, cod)?;
    let mut ids = IndexMap::new();
    for s in d.objects.iter() {
        let e = (m.unit(s.clone()), d.ids[s].clone());
        let n = lookup.get(&e).ok_or_else(|| Error::Missing(format!("unit arrow on {s}")))?;
        ids.insert(s.clone(), n.clone());
    }
    // the flattened domain is at least as large as the inner domains together
    let largest = d.tensor_obj.keys().map(|k| m.size_of(k)).max().unwrap_or(0);
    let size = |a: &Atom| m.size_of(&elems[a].0);
    Multicat::tabulate_within(graph, ids, size, |_| largest, |outer, beta| {
        let (_, u) = &elems[outer];
        let parts = m.map(beta, |b| elems[b].clone());
        let xi = m.mult(&parts.fmap(&mut |(x, _)| x.clone())).ok()?;
        let v = d.tensor_arr.get(&m.map(&parts, |(_, f)| f.clone()))?;
        let uv = d.comp.get(&(u.clone(), v.clone()))?;
        lookup.get(&(xi, uv.clone())).cloned()
    })
}

/// The free structured category on `c`: objects are terms over objects,
/// arrows are terms over arrows, both of size at most `bound`; `⊗` is `μ`
/// and is recorded on terms whose outer size and summed inner sizes are at
/// most `bound`.
pub fn free_structured(c: &Multicat, bound: usize) -> StructCat {
    let m = c.monad();
    let g = &c.graph;
    let objs = m.enumerate_set(&g.objects, bound);
    let obj_name: HashMap<TElem, Atom> = objs.iter().map(|o| (o.clone(), m.key(o))).collect();
    let obj_of: HashMap<Atom, TElem> = obj_name.iter().map(|(o, n)| (n.clone(), o.clone())).collect();
    let mut arrows = Vec::new();
    for beta in m.enumerate_set(&g.arrows, bound) {
        let Ok(s) = g.composite_domain(&beta) else { continue };
        let t = m.map(&beta, |a| g.c(a).clone());
        if let (Some(s), Some(t)) = (obj_name.get(&s), obj_name.get(&t)) {
            arrows.push((beta.clone(), s.clone(), t.clone()));
        }
    }
    let arr_name: HashMap<TElem, Atom> = arrows.iter().map(|(b, _, _)| (b.clone(), m.key(b))).collect();
    let names: Vec<Atom> = arrows.iter().map(|(b, _, _)| arr_name[b].clone()).collect();
    let src: IndexMap<Atom, Atom> = names.iter().cloned().zip(arrows.iter().map(|a| a.1.clone())).collect();
    let tgt: IndexMap<Atom, Atom> = names.iter().cloned().zip(arrows.iter().map(|a| a.2.clone())).collect();
    let ids: IndexMap<Atom, Atom> = objs
        .iter()
        .map(|o| (obj_name[o].clone(), arr_name[&m.map(o, |s| c.id(s).clone())].clone()))
        .collect();
    let mut into: HashMap<&Atom, Vec<&TElem>> = HashMap::new();
    for (b, _, t) in &arrows {
        into.entry(t).or_default().push(b);
    }
    let mut comp = HashMap::new();
    for (beta, s, _) in &arrows {
        for alpha in into.get(s).into_iter().flatten() {
            // split α along the inputs of each arrow of β and compose
            let mut rest: Vec<Atom> = alpha.leaves().into_iter().cloned().collect();
            let mut pieces = Vec::new();
            for b in beta.leaves() {
                let d = g.d(b);
                let chunk: Vec<Atom> = rest.drain(..d.leaf_count()).collect();
                pieces.push(c.composite(b, &d.relabel(&chunk).expect("leaf count")).cloned());
            }
            let Some(pieces) = pieces.into_iter().collect::<Option<Vec<_>>>() else { continue };
            let gf = m.map(&beta.relabel(&pieces).expect("leaf count"), |a| a.clone());
            if let Some(n) = arr_name.get(&gf) {
                comp.insert((arr_name[beta].clone(), arr_name[*alpha].clone()), n.clone());
            }
        }
    }
    let weighted_objs: Vec<(Atom, usize)> = objs.iter().map(|o| (obj_name[o].clone(), m.size_of(o))).collect();
    let mut tensor_obj = HashMap::new();
    for w in m.enumerate_weighted(&weighted_objs, bound, bound) {
        if let Ok(flat) = m.mult(&m.map(&w, |n| obj_of[n].clone())) {
            if let Some(n) = obj_name.get(&flat) {
                tensor_obj.insert(w, n.clone());
            }
        }
    }
    let arr_of: HashMap<&Atom, &TElem> = arr_name.iter().map(|(b, n)| (n, b)).collect();
    let weighted_arrs: Vec<(Atom, usize)> = arrows
        .iter()
        .map(|(b, s, t)| (arr_name[b].clone(), m.size_of(&obj_of[s]).max(m.size_of(&obj_of[t]))))
        .collect();
    let mut tensor_arr = HashMap::new();
    for w in m.enumerate_weighted(&weighted_arrs, bound, bound) {
        if let Ok(flat) = m.mult(&m.map(&w, |n| arr_of[n].clone())) {
            if let Some(n) = arr_name.get(&flat) {
                tensor_arr.insert(w, n.clone());
            }
        }
    }
    StructCat {
        monad: m,
        objects: FinSet::new(objs.iter().map(|o| obj_name[o].clone())).expect("distinct"),
        arrows: FinSet::new(names).expect("distinct"),
        src,
        tgt,
        ids,
        comp,
        tensor_obj,
        tensor_arr,
    }
}

/// The unit `C → U F C`: an object goes to its singleton term, an arrow `a`
/// to `(T η (d a), ⟨a⟩)`.
pub fn structured_unit(c: &Multicat, fc: &StructCat, ufc: &Multicat) -> Result<MultiMap> {
    let m = c.monad();
    let g = &c.graph;
    let single = |s: &str| m.key(&m.unit(s.to_string()));
    let f0 = FinMap::from_fn(g.objects.clone(), fc.objects.clone(), single)?;
    let f1 = FinMap::from_fn(g.arrows.clone(), ufc.graph.arrows.clone(), |a| {
        let xi = m.map(g.d(a), |s| single(s));
        let u = m.key(&m.unit(a.to_string()));
        json!([m.to_json(&xi), u]).to_string()
    })?;
    Ok(MultiMap { f0, f1 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::multicat::{check_multicategory, terminal_multicategory};
    use MonadInstance::*;

    fn graph(m: MonadInstance, objects: &[&str], arrows: &[(&str, TElem, &str)]) -> MGraph {
        MGraph::new(
            m,
            FinSet::new(objects.iter().copied()).unwrap(),
            FinSet::new(arrows.iter().map(|a| a.0)).unwrap(),
            arrows.iter().map(|(a, d, _)| (a.to_string(), d.clone())).collect(),
            arrows.iter().map(|(a, _, c)| (a.to_string(), c.to_string())).collect(),
        )
        .unwrap()
    }

    fn word(xs: &[&str]) -> TElem {
        Shape::Seq(xs.iter().map(|x| Shape::Leaf(x.to_string())).collect())
    }

    fn leaf(x: &str) -> TElem {
        Shape::Leaf(x.to_string())
    }

    fn binom(n: i64, k: i64) -> u64 {
        if k < 0 || k > n {
            return 0;
        }
        (0..k).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
    }

    #[test]
    fn free_category_on_a_loop() {
        let g = graph(Identity, &["*"], &[("e", leaf("*"), "*")]);
        let free = free_multicategory(&g, 3);
        assert_eq!(free.terms.len(), 4);
        let sizes: Vec<usize> = free.terms.values().map(FreeArrow::size).collect();
        assert_eq!(sizes, vec![0, 1, 2, 3]);
        assert!(check_multicategory(&free.multicat).passed());
    }

    #[test]
    fn unary_generator_counts_match_paths() {
        let g = graph(FreeMonoid, &["*"], &[("u", word(&["*"]), "*")]);
        for k in 0..6 {
            // one path of each length up to k
            assert_eq!(free_arrows(&g, k).len(), k + 1);
        }
    }

    /// Planar trees with nodes of arity 0 or 2, counted by a separate recursion.
    fn binary_nullary_oracle(size: usize, memo: &mut HashMap<usize, u64>) -> u64 {
        // t(n): terms with n generators into the one object, identities counted at n = 0
        if let Some(&v) = memo.get(&size) {
            return v;
        }
        let v = if size == 0 {
            1
        } else {
            let nullary = u64::from(size == 1);
            let binary: u64 = (0..size).map(|i| binary_nullary_oracle(i, memo) * binary_nullary_oracle(size - 1 - i, memo)).sum();
            nullary + binary
        };
        memo.insert(size, v);
        v
    }

    #[test]
    fn mixed_arity_counts() {
        let g = graph(FreeMonoid, &["*"], &[("z", word(&[]), "*"), ("m", word(&["*", "*"]), "*")]);
        let mut memo = HashMap::new();
        for k in 0..6 {
            let by_size = free_arrows(&g, k).iter().filter(|a| a.size() == k).count() as u64;
            assert_eq!(by_size, binary_nullary_oracle(k, &mut memo));
        }
        let free = free_multicategory(&g, 3);
        assert!(check_multicategory(&free.multicat).passed());
    }

    #[test]
    fn tree_generators() {
        let t = Shape::Seq(vec![leaf("a"), Shape::Seq(vec![leaf("b")])]);
        let g = graph(BDTree, &["a", "b"], &[("f", t, "a"), ("k", Shape::Seq(vec![]), "b")]);
        let free = free_multicategory(&g, 3);
        assert!(check_multicategory(&free.multicat).passed());
        for (name, a) in &free.terms {
            assert_eq!(&a.dom(&g), free.multicat.graph.d(name));
            assert_eq!(FreeArrow::from_json(&g, &serde_json::from_str(name).unwrap()).unwrap(), *a);
        }
    }

    #[test]
    fn depth_iteration_stabilises() {
        let g = graph(FreeMonoid, &["*"], &[("z", word(&[]), "*"), ("m", word(&["*", "*"]), "*")]);
        let bound = 4;
        let all = free_arrows(&g, bound);
        for n in 0..5 {
            let mut stage = depth_iteration(&g, n, bound);
            stage.sort();
            let mut expected: Vec<FreeArrow> = all.iter().filter(|a| a.depth() <= n).cloned().collect();
            expected.sort();
            assert_eq!(stage, expected);
            // a later stage adds only deeper terms
            let next = depth_iteration(&g, n + 1, bound);
            assert!(stage.iter().all(|a| next.contains(a)));
        }
        // every term of size ≤ bound has depth ≤ bound
        let mut last = depth_iteration(&g, bound, bound);
        last.sort();
        let mut all_sorted = all.clone();
        all_sorted.sort();
        assert_eq!(last, all_sorted);
    }

    #[test]
    fn grafting() {
        let g = graph(FreeMonoid, &["*"], &[("m", word(&["*", "*"]), "*")]);
        let m = FreeArrow::generator(&g, "m");
        let id = FreeArrow::Id("*".into());
        let left = graft(&g, &m, &Shape::Seq(vec![Shape::Leaf(m.clone()), Shape::Leaf(id.clone())])).unwrap();
        assert_eq!(left.size(), 2);
        assert_eq!(left.dom(&g).leaf_count(), 3);
        let json = left.to_json(FreeMonoid);
        assert_eq!(json, serde_json::json!({"outer": "m", "inner": [{"gen": "m"}, {"id": "*"}]}));
        assert_eq!(graft(&g, &id, &Shape::Seq(vec![Shape::Leaf(left.clone())])).unwrap(), left);
        let three = graft(&g, &left, &Shape::Seq(vec![Shape::Leaf(id.clone()); 3])).unwrap();
        assert_eq!(three, left);
        assert!(graft(&g, &m, &Shape::Seq(vec![Shape::Leaf(id)])).is_err());
    }

    #[test]
    fn universal_property_plain() {
        // nullary p and unary a, into {1, a', p', q'} with a'a' = 1, a'p' = q'
        let g = graph(FreeMonoid, &["*"], &[("p", word(&[]), "*"), ("a", word(&["*"]), "*")]);
        let target_graph = graph(
            FreeMonoid,
            &["*"],
            &[("1", word(&["*"]), "*"), ("a'", word(&["*"]), "*"), ("p'", word(&[]), "*"), ("q'", word(&[]), "*")],
        );
        let target = Multicat::tabulate(target_graph, IndexMap::from([("*".into(), "1".into())]), false, |a, beta| {
            let leaves = beta.leaves();
            match (a.as_str(), leaves.first().map(|x| x.as_str())) {
                (x, None) => Some(x.to_string()),
                ("1", Some(y)) => Some(y.to_string()),
                ("a'", Some("1")) => Some("a'".into()),
                ("a'", Some("a'")) => Some("1".into()),
                ("a'", Some("p'")) => Some("q'".into()),
                ("a'", Some("q'")) => Some("p'".into()),
                _ => None,
            }
        })
        .unwrap();
        assert!(check_multicategory(&target).passed());
        let free = free_multicategory(&g, 4);
        let maps = graph_maps(&g, &target);
        assert_eq!(maps.len(), 4);
        for (f0, gens) in &maps {
            assert_eq!(count_extensions(&g, &free, &target, f0, gens), 1);
        }
    }

    #[test]
    fn universal_property_categories() {
        let z3 = Multicat::category(&["*"], &[("0", "*", "*"), ("1", "*", "*"), ("2", "*", "*")], &[("*", "0")], |a, b| {
            Some(((a.parse::<usize>().unwrap() + b.parse::<usize>().unwrap()) % 3).to_string())
        })
        .unwrap();
        let walking = Multicat::category(
            &["A", "B"],
            &[("1A", "A", "A"), ("1B", "B", "B"), ("u", "A", "B")],
            &[("A", "1A"), ("B", "1B")],
            |g, f| match (g, f) {
                ("1A", "1A") => Some("1A".into()),
                ("1B", "1B") => Some("1B".into()),
                ("u", "1A") | ("1B", "u") => Some("u".into()),
                _ => None,
            },
        )
        .unwrap();
        let sources = [
            graph(Identity, &["*"], &[("e", leaf("*"), "*")]),
            graph(Identity, &["x", "y"], &[("f", leaf("x"), "y"), ("h", leaf("y"), "y")]),
            graph(Identity, &["x", "y"], &[("f", leaf("x"), "y"), ("h", leaf("x"), "y")]),
        ];
        for g in &sources {
            let free = free_multicategory(g, 3);
            for target in [&z3, &walking] {
                for (f0, gens) in graph_maps(g, target) {
                    assert_eq!(count_extensions(g, &free, target, &f0, &gens), 1);
                }
            }
        }
    }

    #[test]
    fn free_structured_on_terminal_is_delta() {
        let t = terminal_multicategory(FreeMonoid, 5);
        let delta = free_structured(&t, 5);
        let ord = |n: usize| FreeMonoid.key(&Shape::Seq(vec![leaf("*"); n]));
        for m in 0..=5 {
            for n in 0..=5 {
                let expected = if n == 0 { u64::from(m == 0) } else { binom((m + n) as i64 - 1, n as i64 - 1) };
                assert_eq!(delta.hom(&ord(m), &ord(n)).len() as u64, expected, "Hom({m},{n})");
            }
        }
        assert_eq!(delta.hom(&ord(2), &ord(2)).len(), 3);
    }

    #[test]
    fn struct_cat_laws() {
        let t = terminal_multicategory(FreeMonoid, 3);
        assert!(check_struct_cat(&free_structured(&t, 3)).passed());
        let z3 = FinSet::new(["0", "1", "2"]).unwrap();
        let add = |a: &str, b: &str| ((a.parse::<usize>().unwrap() + b.parse::<usize>().unwrap()) % 3).to_string();
        assert!(check_struct_cat(&StructCat::discrete_monoid(&z3, add, "0", 3)).passed());
        assert!(check_struct_cat(&StructCat::truncated_naturals(3, 3)).passed());
        let mut broken = StructCat::truncated_naturals(3, 3);
        broken.tensor_obj.insert(word(&["*"]), "*".into());
        broken.tensor_arr.insert(Shape::Seq(vec![leaf("n1"), leaf("n1")]), "n1".into());
        assert!(!check_struct_cat(&broken).passed());
    }

    #[test]
    fn forgetting_examples() {
        let z3 = FinSet::new(["0", "1", "2"]).unwrap();
        let mul = |a: &str, b: &str| ((a.parse::<usize>().unwrap() * b.parse::<usize>().unwrap()) % 3).to_string();
        let d = StructCat::discrete_monoid(&z3, mul, "1", 3);
        let u = forget_structured(&d).unwrap();
        assert!(check_multicategory(&u).passed());
        for w in FreeMonoid.enumerate_set(&z3, 3) {
            let p = w.leaves().iter().fold(1, |acc, x| acc * x.parse::<usize>().unwrap() % 3);
            for target in z3.iter() {
                let homs = u.graph.arrows.iter().filter(|a| u.graph.d(a) == &w && u.graph.c(a) == target).count();
                assert_eq!(homs > 0, p.to_string() == *target);
            }
        }

        // the one-arrow truncation of (ℕ, +) is the terminal plain multicategory
        let n0 = forget_structured(&StructCat::truncated_naturals(0, 3)).unwrap();
        assert_eq!(n0.graph.arrows.len(), terminal_multicategory(FreeMonoid, 3).graph.arrows.len());
        let n2 = forget_structured(&StructCat::truncated_naturals(2, 3)).unwrap();
        assert!(check_multicategory(&n2).passed());
        assert_eq!(n2.graph.arrows.len(), 4 * 3);
    }

    #[test]
    fn unit_into_delta_is_faithful_but_not_monoidal() {
        let t = terminal_multicategory(FreeMonoid, 3);
        let delta = free_structured(&t, 3);
        let ud = forget_structured(&delta).unwrap();
        let eta = structured_unit(&t, &delta, &ud).unwrap();
        assert!(eta.validate(&t, &ud).passed());
        assert!(eta.f1.is_injective());
        // the object goes to 1, but 1 ⊗ 1 = 2 in Δ while * ⊗ * = * upstairs
        let one = &eta.f0.graph()["*"];
        let two = FreeMonoid.key(&Shape::Seq(vec![leaf("*"); 2]));
        assert_eq!(delta.tensor_obj[&word(&[one, one])], two);
        assert_ne!(&two, one);

        let small = terminal_multicategory(FreeMonoid, 2);
        assert!(check_multicategory(&forget_structured(&free_structured(&small, 2)).unwrap()).passed());
    }

    #[test]
    fn empty_graph_gives_free_algebra() {
        let g = graph(FreeMonoid, &["*"], &[]);
        let free = free_multicategory(&g, 3);
        assert_eq!(free.terms.len(), 1);
        let fs = free_structured(&free.multicat, 3);
        // objects are the words on one letter; only identities between them
        assert_eq!(fs.objects.len(), 4);
        assert_eq!(fs.arrows.len(), 4);
    }

    #[test]
    fn weak_composition_counts() {
        for n in 0..6 {
            for k in 1..5 {
                assert_eq!(weak_compositions(n, k).len() as u64, binom((n + k - 1) as i64, k as i64 - 1));
            }
        }
    }
}
