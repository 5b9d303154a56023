//! Globular sets, trees, the free strict ω-category monad at desk scale,
//! operads over it, contractions, and bounded generation of `K` and `K_n`.
//!
//! A cell of the glob `τ̂` is a path of column indices ending in the index
//! of a 0-cell: for `τ = [τ₀,…,τₖ₋₁]` the 0-cells are `[0]…[k]` and the
//! cells of `τ̂ᵢ` sit one dimension up as `[i] ++ x`. Its source drops the
//! last index and its target also bumps the one before.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::sync::{Arc, OnceLock};

use indexmap::IndexMap;
use serde_json::{json, Value};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::finbase::{Atom, FinMap, FinSet};
use crate::monadkit::product;
use crate::report::Report;

/// An n-stage tree: the token at stage 0, otherwise a sequence of
/// (n−1)-stage trees.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BTree {
    stage: usize,
    kids: Vec<BTree>,
}

pub type Cell = Vec<usize>;

impl BTree {
    pub fn token() -> BTree {
        BTree { stage: 0, kids: Vec::new() }
    }

    pub fn seq(stage: usize, kids: Vec<BTree>) -> Result<BTree> {
        if stage == 0 {
            return Err(Error::Malformed("a stage-0 tree has no columns".into()));
        }
        if let Some(k) = kids.iter().find(|k| k.stage + 1 != stage) {
            return Err(Error::Malformed(format!("stage-{} column in a stage-{stage} tree", k.stage)));
        }
        Ok(BTree { stage, kids })
    }

    /// `υₙ`, the glob of a single n-cell.
    pub fn straight(n: usize) -> BTree {
        (0..n).fold(BTree::token(), |t, s| BTree { stage: s + 1, kids: vec![t] })
    }

    /// The 1-stage tree with `k` edges.
    pub fn path(k: usize) -> BTree {
        BTree { stage: 1, kids: vec![BTree::token(); k] }
    }

    /// The tree with no columns at stage `n`.
    pub fn empty(n: usize) -> BTree {
        if n == 0 {
            BTree::token()
        } else {
            BTree { stage: n, kids: Vec::new() }
        }
    }

    pub fn stage(&self) -> usize {
        self.stage
    }

    pub fn kids(&self) -> &[BTree] {
        &self.kids
    }

    /// Number of edges, i.e. nodes above the root.
    pub fn size(&self) -> usize {
        self.kids.len() + self.kids.iter().map(BTree::size).sum::<usize>()
    }

    /// `∂τ`: drop the nodes at the top height.
    pub fn boundary(&self) -> Result<BTree> {
        match self.stage {
            0 => Err(Error::Malformed("the stage-0 tree has no boundary".into())),
            1 => Ok(BTree::token()),
            s => Ok(BTree { stage: s - 1, kids: self.kids.iter().map(|k| k.boundary().expect("stage ≥ 1")).collect() }),
        }
    }

    /// The identity one stage up: the same glob seen as degenerate.
    pub fn promote(&self) -> BTree {
        BTree { stage: self.stage + 1, kids: self.kids.iter().map(BTree::promote).collect() }
    }

    pub fn to_json(&self) -> Value {
        if self.stage == 0 {
            json!(0)
        } else {
            Value::Array(self.kids.iter().map(BTree::to_json).collect())
        }
    }

    /// Parse at the least stage consistent with the nesting.
    pub fn from_json(v: &Value) -> Result<BTree> {
        let stage = forced_stage(v, 0)?.unwrap_or_else(|| array_depth(v));
        BTree::from_json_at(stage, v)
    }

    pub fn from_json_at(stage: usize, v: &Value) -> Result<BTree> {
        match (stage, v) {
            (0, Value::Number(n)) if n.as_u64() == Some(0) => Ok(BTree::token()),
            (s, Value::Array(items)) if s > 0 => {
                Ok(BTree { stage: s, kids: items.iter().map(|i| BTree::from_json_at(s - 1, i)).collect::<Result<_>>()? })
            }
            _ => Err(Error::Malformed(format!("{v} is not a stage-{stage} tree"))),
        }
    }

    /// The diagram `τ(n) → ⋯ → τ(1) → τ(0) = 1` in Δ: for each height k ≥ 1,
    /// the parent (at height k−1) of every node at height k, left to right.
    pub fn to_delta(&self) -> Vec<Vec<usize>> {
        let mut levels = vec![Vec::new(); self.stage];
        let mut frontier: Vec<&BTree> = vec![self];
        for level in levels.iter_mut() {
            let mut next = Vec::new();
            for (p, t) in frontier.iter().enumerate() {
                for k in &t.kids {
                    level.push(p);
                    next.push(k);
                }
            }
            frontier = next;
        }
        levels
    }

    pub fn from_delta(levels: &[Vec<usize>]) -> Result<BTree> {
        let n = levels.len();
        let mut below: Vec<BTree> = vec![BTree::token(); levels.last().map_or(0, Vec::len)];
        for k in (0..n).rev() {
            let parents = &levels[k];
            if parents.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::Malformed(format!("level {} is not monotone", k + 1)));
            }
            let count = if k == 0 { 1 } else { levels[k - 1].len() };
            if parents.iter().any(|&p| p >= count) {
                return Err(Error::Malformed(format!("level {} points past level {k}", k + 1)));
            }
            let mut nodes: Vec<BTree> = (0..count).map(|_| BTree { stage: n - k, kids: Vec::new() }).collect();
            for (child, &p) in below.into_iter().zip(parents) {
                nodes[p].kids.push(child);
            }
            below = nodes;
        }
        Ok(below.pop().unwrap_or_else(BTree::token))
    }

    /// Cells of `τ̂`, ordered by dimension and then lexicographically.
    pub fn cells(&self) -> Vec<Cell> {
        let mut out = Vec::new();
        raw_cells(self, &mut Vec::new(), &mut out);
        out.sort_by(|a, b| (a.len(), a).cmp(&(b.len(), b)));
        out
    }
}

fn forced_stage(v: &Value, depth: usize) -> Result<Option<usize>> {
    match v {
        Value::Number(_) => Ok(Some(depth)),
        Value::Array(items) => {
            let mut found = None;
            for i in items {
                if let Some(s) = forced_stage(i, depth + 1)? {
                    if found.is_some_and(|f| f != s) {
                        return Err(Error::Malformed(format!("tokens at different depths in {v}")));
                    }
                    found = Some(s);
                }
            }
            Ok(found)
        }
        _ => Err(Error::Malformed(format!("{v} is not a tree"))),
    }
}

fn array_depth(v: &Value) -> usize {
    match v {
        Value::Array(items) => 1 + items.iter().map(array_depth).max().unwrap_or(0),
        _ => 0,
    }
}

fn raw_cells(t: &BTree, prefix: &mut Cell, out: &mut Vec<Cell>) {
    if t.stage == 0 {
        let mut c = prefix.clone();
        c.push(0);
        out.push(c);
        return;
    }
    for j in 0..=t.kids.len() {
        let mut c = prefix.clone();
        c.push(j);
        out.push(c);
    }
    for (i, k) in t.kids.iter().enumerate() {
        prefix.push(i);
        raw_cells(k, prefix, out);
        prefix.pop();
    }
}

impl fmt::Display for BTree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_json())
    }
}

pub fn cell_dim(c: &[usize]) -> usize {
    c.len() - 1
}

pub fn cell_src(c: &[usize]) -> Cell {
    c[..c.len() - 1].to_vec()
}

pub fn cell_tgt(c: &[usize]) -> Cell {
    let mut t = c[..c.len() - 1].to_vec();
    *t.last_mut().expect("dimension ≥ 1") += 1;
    t
}

fn cell_name(c: &[usize]) -> Atom {
    c.iter().map(usize::to_string).collect::<Vec<_>>().join(".")
}

/// Where each cell of `∂τ` sits in `τ̂`, as its source (`target = false`)
/// or target face.
pub fn face_inclusion(tau: &BTree, target: bool) -> Result<Vec<Cell>> {
    let face = tau.boundary()?;
    Ok(face.cells().iter().map(|c| include(tau, c, target)).collect())
}

fn include(tau: &BTree, c: &[usize], target: bool) -> Cell {
    if tau.stage == 1 {
        return vec![if target { tau.kids.len() } else { 0 }];
    }
    if c.len() == 1 {
        return c.to_vec();
    }
    let mut out = vec![c[0]];
    out.extend(include(&tau.kids[c[0]], &c[1..], target));
    out
}

/// Every stage-n tree with at most `size` edges, by the free-monoid
/// recursion.
pub fn trees(n: usize, size: usize) -> Vec<BTree> {
    if n == 0 {
        return vec![BTree::token()];
    }
    let lower: Vec<(BTree, usize)> = trees(n - 1, size.saturating_sub(1)).into_iter().map(|t| {
        let s = 1 + t.size();
        (t, s)
    }).collect();
    let mut out = Vec::new();
    fn grow(stage: usize, lower: &[(BTree, usize)], left: usize, acc: &mut Vec<BTree>, out: &mut Vec<BTree>) {
        out.push(BTree { stage, kids: acc.clone() });
        for (t, s) in lower {
            if *s <= left {
                acc.push(t.clone());
                grow(stage, lower, left - s, acc, out);
                acc.pop();
            }
        }
    }
    grow(n, &lower, size, &mut Vec::new(), &mut out);
    out.sort_by(|a, b| (a.size(), a).cmp(&(b.size(), b)));
    out
}

/// A globular set truncated at dimension `n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobSet {
    pub n: usize,
    pub cells: Vec<FinSet>,
    /// `s[k], t[k]: cells[k+1] → cells[k]`.
    pub s: Vec<FinMap>,
    pub t: Vec<FinMap>,
}

impl GlobSet {
    pub fn new(cells: Vec<FinSet>, s: Vec<FinMap>, t: Vec<FinMap>) -> Result<Self> {
        let n = cells.len().checked_sub(1).ok_or_else(|| Error::Malformed("no dimensions".into()))?;
        if s.len() != n || t.len() != n {
            return Err(Error::Arity { expected: n, got: s.len().min(t.len()) });
        }
        for k in 0..n {
            for m in [&s[k], &t[k]] {
                if m.dom() != &cells[k + 1] || m.cod() != &cells[k] {
                    return Err(Error::CodomainMismatch(format!("source/target at dimension {}", k + 1)));
                }
            }
        }
        for k in 1..n {
            for x in cells[k + 1].iter() {
                let (sx, tx) = (s[k].apply(x)?, t[k].apply(x)?);
                if s[k - 1].apply(sx)? != s[k - 1].apply(tx)? || t[k - 1].apply(sx)? != t[k - 1].apply(tx)? {
                    return Err(Error::Law(format!("globularity fails at {x}")));
                }
            }
        }
        Ok(GlobSet { n, cells, s, t })
    }

    /// One cell in each dimension up to `n`.
    pub fn terminal(n: usize) -> Self {
        let cells: Vec<FinSet> = (0..=n).map(|k| FinSet::new([format!("*{k}")]).expect("one")).collect();
        let maps = (0..n).map(|k| FinMap::to_terminal(&cells[k + 1], &format!("*{k}"))).collect::<Vec<_>>();
        GlobSet::new(cells, maps.clone(), maps).expect("terminal")
    }

    pub fn counts(&self) -> Vec<usize> {
        self.cells.iter().map(FinSet::len).collect()
    }

    pub fn to_json(&self) -> Value {
        let maps = |ms: &[FinMap]| ms.iter().map(|m| json!(m.graph())).collect::<Vec<_>>();
        json!({"N": self.n, "cells": self.cells.iter().map(|c| json!(c.atoms())).collect::<Vec<_>>(), "s": maps(&self.s), "t": maps(&self.t)})
    }

    pub fn from_json(v: &Value) -> Result<Self> {
        let cells: Vec<FinSet> = serde_json::from_value(v.get("cells").cloned().unwrap_or(Value::Null))?;
        let read = |key: &str| -> Result<Vec<FinMap>> {
            let raw: Vec<IndexMap<Atom, Atom>> = serde_json::from_value(v.get(key).cloned().unwrap_or(json!([])))?;
            raw.into_iter().enumerate().map(|(k, g)| FinMap::new(cells[k + 1].clone(), cells[k].clone(), g)).collect()
        };
        let g = GlobSet::new(cells.clone(), read("s")?, read("t")?)?;
        if let Some(n) = v.get("N").and_then(Value::as_u64) {
            if n as usize != g.n {
                return Err(Error::Malformed(format!("N = {n} but {} dimensions given", g.n + 1)));
            }
        }
        Ok(g)
    }
}

/// The globular set `τ̂` of formal cells of the glob.
pub fn tau_hat(tau: &BTree) -> GlobSet {
    let cells = tau.cells();
    let by_dim: Vec<Vec<&Cell>> = (0..=tau.stage).map(|d| cells.iter().filter(|c| cell_dim(c) == d).collect()).collect();
    let sets: Vec<FinSet> = by_dim.iter().map(|cs| FinSet::new(cs.iter().map(|c| cell_name(c))).expect("distinct")).collect();
    let face = |d: usize, f: fn(&[usize]) -> Cell| {
        FinMap::from_fn(sets[d + 1].clone(), sets[d].clone(), |name| {
            let c: Cell = name.split('.').map(|p| p.parse().expect("index")).collect();
            cell_name(&f(&c))
        })
        .expect("faces are cells")
    };
    let s = (0..tau.stage).map(|d| face(d, cell_src)).collect();
    let t = (0..tau.stage).map(|d| face(d, cell_tgt)).collect();
    GlobSet::new(sets, s, t).expect("globs are globular")
}

/// A map `τ̂ → X`, one value per cell of `τ̂` in `BTree::cells` order.
pub type Labelling = Vec<Atom>;

/// Every globular map `τ̂ → X`.
pub fn labellings(x: &GlobSet, tau: &BTree) -> Result<Vec<Labelling>> {
    if tau.stage > x.n {
        return Err(Error::Unsupported(format!("stage-{} tree in a {}-dimensional globular set", tau.stage, x.n)));
    }
    let cells = tau.cells();
    let index: HashMap<&Cell, usize> = cells.iter().enumerate().map(|(i, c)| (c, i)).collect();
    let mut parallel: HashMap<(usize, &Atom, &Atom), Vec<Atom>> = HashMap::new();
    for k in 0..x.n {
        for y in x.cells[k + 1].iter() {
            parallel.entry((k + 1, &x.s[k].graph()[y], &x.t[k].graph()[y])).or_default().push(y.clone());
        }
    }
    let faces: Vec<Option<(usize, usize)>> =
        cells.iter().map(|c| (cell_dim(c) > 0).then(|| (index[&cell_src(c)], index[&cell_tgt(c)]))).collect();
    let mut out = Vec::new();
    let mut acc: Vec<Atom> = Vec::with_capacity(cells.len());
    fn go(
        i: usize,
        cells: &[Cell],
        faces: &[Option<(usize, usize)>],
        x: &GlobSet,
        parallel: &HashMap<(usize, &Atom, &Atom), Vec<Atom>>,
        acc: &mut Vec<Atom>,
        out: &mut Vec<Labelling>,
    ) {
        if i == cells.len() {
            out.push(acc.clone());
            return;
        }
        let options: Vec<Atom> = match faces[i] {
            None => x.cells[0].atoms(),
            Some((s, t)) => parallel.get(&(cell_dim(&cells[i]), &acc[s], &acc[t])).cloned().unwrap_or_default(),
        };
        for y in options {
            acc.push(y);
            go(i + 1, cells, faces, x, parallel, acc, out);
            acc.pop();
        }
    }
    go(0, &cells, &faces, x, &parallel, &mut acc, &mut out);
    Ok(out)
}

/// `X*(n)` cut to trees with at most `tree_bound` edges.
pub fn omega_free(x: &GlobSet, n: usize, tree_bound: usize) -> Result<Vec<(BTree, Labelling)>> {
    let mut out = Vec::new();
    for tau in trees(n, tree_bound) {
        for l in labellings(x, &tau)? {
            out.push((tau.clone(), l));
        }
    }
    Ok(out)
}

/// The result of substituting trees into the cells of a tree, with the
/// position of every cell of every substituted glob in the result.
#[derive(Debug, Clone)]
pub struct Substitution {
    pub tree: BTree,
    /// `embed[i][j]`: cell j of the tree at cell i lands here.
    pub embed: Vec<Vec<Cell>>,
}

/// Multiply in `Tr`: `labels[i]` is a tree of stage `dim` of the i-th cell
/// of `τ̂`, and the labels must agree along faces.
pub fn btree_substitute(tau: &BTree, labels: &[BTree]) -> Result<Substitution> {
    let cells = tau.cells();
    if labels.len() != cells.len() {
        return Err(Error::Arity { expected: cells.len(), got: labels.len() });
    }
    let index: HashMap<&Cell, usize> = cells.iter().enumerate().map(|(i, c)| (c, i)).collect();
    for (c, l) in cells.iter().zip(labels) {
        if l.stage != cell_dim(c) {
            return Err(Error::Malformed(format!("cell {} labelled by a stage-{} tree", cell_name(c), l.stage)));
        }
        if cell_dim(c) > 0 {
            let b = l.boundary()?;
            if b != labels[index[&cell_src(c)]] || b != labels[index[&cell_tgt(c)]] {
                return Err(Error::NotComposable(format!("label of {} does not fit its faces", cell_name(c))));
            }
        }
    }
    let lookup = |c: &[usize]| labels[index[&c.to_vec()]].clone();
    let (tree, emb) = subst_rec(tau, &lookup)?;
    let embed = cells
        .iter()
        .zip(labels)
        .map(|(c, l)| {
            let m = &emb[c];
            l.cells().iter().map(|y| m[y].clone()).collect()
        })
        .collect();
    Ok(Substitution { tree, embed })
}

type Embeddings = HashMap<Cell, HashMap<Cell, Cell>>;

fn subst_rec(tau: &BTree, label: &dyn Fn(&[usize]) -> BTree) -> Result<(BTree, Embeddings)> {
    if tau.stage == 0 {
        let mut e = HashMap::new();
        e.insert(vec![0], HashMap::from([(vec![0], vec![0])]));
        return Ok((BTree::token(), e));
    }
    let mut kids = Vec::new();
    let mut offsets = vec![0];
    let mut columns: Vec<(usize, Vec<Embeddings>)> = Vec::new();
    for (i, ti) in tau.kids.iter().enumerate() {
        let m = label(&[i, 0]).kids.len();
        let mut parts = Vec::with_capacity(m);
        for j in 0..m {
            let sub = |x: &[usize]| -> BTree {
                let mut c = vec![i];
                c.extend_from_slice(x);
                label(&c).kids.get(j).cloned().unwrap_or_else(BTree::token)
            };
            for x in ti.cells() {
                let mut c = vec![i];
                c.extend_from_slice(&x);
                if label(&c).kids.len() != m {
                    return Err(Error::NotComposable(format!("column {i} has labels of different widths")));
                }
            }
            let (rho, emb) = subst_rec(ti, &sub)?;
            kids.push(rho);
            parts.push(emb);
        }
        offsets.push(offsets[i] + m);
        columns.push((m, parts));
    }
    let mut embed: Embeddings = HashMap::new();
    for a in 0..=tau.kids.len() {
        if label(&[a]).stage != 0 {
            return Err(Error::Malformed("0-cells take the token".into()));
        }
        embed.insert(vec![a], HashMap::from([(vec![0], vec![offsets[a]])]));
    }
    for (i, ti) in tau.kids.iter().enumerate() {
        let (m, parts) = &columns[i];
        for x in ti.cells() {
            let mut c = vec![i];
            c.extend_from_slice(&x);
            let l = label(&c);
            let mut map = HashMap::new();
            for jj in 0..=*m {
                map.insert(vec![jj], vec![offsets[i] + jj]);
            }
            for (j, part) in parts.iter().enumerate() {
                for (y, z) in &part[&x] {
                    let mut from = vec![j];
                    from.extend_from_slice(y);
                    let mut to = vec![offsets[i] + j];
                    to.extend_from_slice(z);
                    map.insert(from, to);
                }
            }
            debug_assert_eq!(map.len(), l.cells().len());
            embed.insert(c, map);
        }
    }
    Ok((BTree { stage: tau.stage, kids }, embed))
}

/// `a ⊗ₖ b`: glue along the k-dimensional target of `a` and source of `b`.
pub fn btree_compose(a: &BTree, b: &BTree, k: usize) -> Result<BTree> {
    if a.stage != b.stage || k >= a.stage {
        return Err(Error::NotComposable(format!("⊗{k} of stages {} and {}", a.stage, b.stage)));
    }
    if k == 0 {
        let mut kids = a.kids.clone();
        kids.extend(b.kids.iter().cloned());
        return Ok(BTree { stage: a.stage, kids });
    }
    if a.kids.len() != b.kids.len() {
        return Err(Error::NotComposable(format!("⊗{k} of {a} and {b}")));
    }
    let kids = a.kids.iter().zip(&b.kids).map(|(x, y)| btree_compose(x, y, k - 1)).collect::<Result<_>>()?;
    Ok(BTree { stage: a.stage, kids })
}

/// Sets `C(τ)` over a window of trees, with source and target into `C(∂τ)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Collection {
    pub dim: usize,
    pub size_bound: usize,
    pub fibres: IndexMap<BTree, Vec<Atom>>,
    pub over: HashMap<Atom, BTree>,
    pub src: HashMap<Atom, Atom>,
    pub tgt: HashMap<Atom, Atom>,
}

impl Collection {
    /// Assemble from `(cell, tree, source, target)` rows; every tree of the
    /// window gets a (possibly empty) fibre.
    pub fn new(dim: usize, size_bound: usize, rows: Vec<(Atom, BTree, Option<Atom>, Option<Atom>)>) -> Result<Self> {
        let mut fibres: IndexMap<BTree, Vec<Atom>> = (0..=dim).flat_map(|n| trees(n, size_bound)).map(|t| (t, Vec::new())).collect();
        let mut over = HashMap::new();
        let (mut src, mut tgt) = (HashMap::new(), HashMap::new());
        for (name, tree, s, t) in rows {
            let fib = fibres.get_mut(&tree).ok_or_else(|| Error::Unsupported(format!("tree {tree} outside the window")))?;
            if over.insert(name.clone(), tree.clone()).is_some() {
                return Err(Error::DuplicateAtom(name));
            }
            fib.push(name.clone());
            if tree.stage > 0 {
                src.insert(name.clone(), s.ok_or_else(|| Error::NotTotal(format!("source of {name}")))?);
                tgt.insert(name.clone(), t.ok_or_else(|| Error::NotTotal(format!("target of {name}")))?);
            }
        }
        let c = Collection { dim, size_bound, fibres, over, src, tgt };
        c.validate()?;
        Ok(c)
    }

    fn validate(&self) -> Result<()> {
        for (f, tree) in &self.over {
            if tree.stage == 0 {
                continue;
            }
            let b = tree.boundary()?;
            for side in [&self.src[f], &self.tgt[f]] {
                if self.over.get(side) != Some(&b) {
                    return Err(Error::CodomainMismatch(format!("face {side} of {f} is not over {b}")));
                }
            }
            if tree.stage >= 2 {
                let (s, t) = (&self.src[f], &self.tgt[f]);
                if self.src[s] != self.src[t] || self.tgt[s] != self.tgt[t] {
                    return Err(Error::Law(format!("globularity fails at {f}")));
                }
            }
        }
        Ok(())
    }

    pub fn cells(&self, tau: &BTree) -> &[Atom] {
        self.fibres.get(tau).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn len(&self) -> usize {
        self.over.len()
    }

    pub fn is_empty(&self) -> bool {
        self.over.is_empty()
    }

    /// The underlying globular set: n-cells are cells over stage-n trees.
    pub fn globset(&self) -> GlobSet {
        let cells: Vec<FinSet> = (0..=self.dim)
            .map(|n| FinSet::new(self.fibres.iter().filter(|(t, _)| t.stage == n).flat_map(|(_, v)| v.iter().cloned())).expect("distinct"))
            .collect();
        let face = |k: usize, m: &HashMap<Atom, Atom>| FinMap::from_fn(cells[k + 1].clone(), cells[k].clone(), |x| m[x].clone()).expect("faces");
        let s = (0..self.dim).map(|k| face(k, &self.src)).collect();
        let t = (0..self.dim).map(|k| face(k, &self.tgt)).collect();
        GlobSet::new(cells, s, t).expect("validated")
    }

    /// Pairs `⟨f, f′⟩` over `σ` with equal sources and equal targets; at
    /// stage 0 every pair matches.
    pub fn matching_pairs(&self, sigma: &BTree) -> Vec<(Atom, Atom)> {
        let cs = self.cells(sigma);
        let mut out = Vec::new();
        for f in cs {
            for g in cs {
                if sigma.stage == 0 || (self.src[f] == self.src[g] && self.tgt[f] == self.tgt[g]) {
                    out.push((f.clone(), g.clone()));
                }
            }
        }
        out
    }

    /// The faces forced on every cell of `τ̂` by a choice at its top cells
    /// and degenerate cells; `None` if they disagree.
    fn fill_down(&self, tau: &BTree, partial: &mut [Option<Atom>]) -> Option<()> {
        let cells = tau.cells();
        let index: HashMap<&Cell, usize> = cells.iter().enumerate().map(|(i, c)| (c, i)).collect();
        for i in (0..cells.len()).rev() {
            let Some(x) = partial[i].clone() else { continue };
            if cell_dim(&cells[i]) == 0 {
                continue;
            }
            for (face, val) in [(cell_src(&cells[i]), &self.src[&x]), (cell_tgt(&cells[i]), &self.tgt[&x])] {
                let slot = &mut partial[index[&face]];
                match slot {
                    Some(v) if v != val => return None,
                    _ => *slot = Some(val.clone()),
                }
            }
        }
        Some(())
    }
}

/// Operads over the free strict ω-category monad: a collection, an
/// identity over each `υₙ`, and a composition that may be partial on a
/// bounded fragment.
pub trait BatOperad: Sync {
    fn collection(&self) -> &Collection;
    fn identity(&self, n: usize) -> Option<Atom>;
    /// `f ∘ args` with `args` a labelling of the glob of `f`'s tree by cells
    /// of the collection. `None` when the composite leaves the fragment.
    fn compose(&self, f: &str, args: &[Atom]) -> Option<Atom>;
}

/// An operad given by finite tables.
#[derive(Debug, Clone)]
pub struct BOperad {
    pub collection: Collection,
    pub ids: Vec<Atom>,
    pub comp: HashMap<(Atom, Labelling), Atom>,
}

impl BatOperad for BOperad {
    fn collection(&self) -> &Collection {
        &self.collection
    }

    fn identity(&self, n: usize) -> Option<Atom> {
        self.ids.get(n).cloned()
    }

    fn compose(&self, f: &str, args: &[Atom]) -> Option<Atom> {
        self.comp.get(&(f.to_string(), args.to_vec())).cloned()
    }
}

impl BOperad {
    /// Tabulate a composition rule over every labelling in the window.
    pub fn tabulate(collection: Collection, ids: Vec<Atom>, compose: impl Fn(&Atom, &Labelling) -> Option<Atom>) -> Result<Self> {
        let g = collection.globset();
        let mut comp = HashMap::new();
        for (tau, fs) in &collection.fibres {
            if fs.is_empty() {
                continue;
            }
            for args in labellings(&g, tau)? {
                for f in fs {
                    if let Some(r) = compose(f, &args) {
                        comp.insert((f.clone(), args.clone()), r);
                    }
                }
            }
        }
        Ok(BOperad { collection, ids, comp })
    }
}

pub fn operad_compose(op: &dyn BatOperad, f: &str, args: &[Atom]) -> Result<Atom> {
    let c = op.collection();
    let tau = c.over.get(f).ok_or_else(|| Error::UnknownAtom(f.to_string()))?;
    let cells = tau.cells();
    if args.len() != cells.len() {
        return Err(Error::Arity { expected: cells.len(), got: args.len() });
    }
    let index: HashMap<&Cell, usize> = cells.iter().enumerate().map(|(i, x)| (x, i)).collect();
    for (x, a) in cells.iter().zip(args) {
        let t = c.over.get(a).ok_or_else(|| Error::UnknownAtom(a.clone()))?;
        if t.stage != cell_dim(x) {
            return Err(Error::NotComposable(format!("{a} sits in the wrong dimension")));
        }
        if cell_dim(x) > 0 && (c.src[a] != args[index[&cell_src(x)]] || c.tgt[a] != args[index[&cell_tgt(x)]]) {
            return Err(Error::NotComposable(format!("{a} does not match its faces")));
        }
    }
    op.compose(f, args).ok_or_else(|| Error::Missing(format!("{f} ∘ {args:?}")))
}

/// The terminal operad `Tr` on a window: one cell per tree, composition
/// by substitution.
pub fn terminal_operad(dim: usize, size_bound: usize) -> BOperad {
    let name = |t: &BTree| format!("{}:{}", t.stage, t.to_json());
    let rows = (0..=dim)
        .flat_map(|n| trees(n, size_bound))
        .map(|t| {
            let b = t.boundary().ok();
            (name(&t), t.clone(), b.as_ref().map(name), b.as_ref().map(name))
        })
        .collect();
    let collection = Collection::new(dim, size_bound, rows).expect("trees form a collection");
    let ids = (0..=dim).filter(|&n| n <= size_bound).map(|n| name(&BTree::straight(n))).collect();
    let over = collection.over.clone();
    BOperad::tabulate(collection, ids, |f, args| {
        let labels: Vec<BTree> = args.iter().map(|a| over[a].clone()).collect();
        let r = btree_substitute(&over[f], &labels).ok()?.tree;
        (r.size() <= size_bound).then(|| name(&r))
    })
    .expect("window")
}

fn identity_labelling(op: &dyn BatOperad, tau: &BTree) -> Option<Labelling> {
    tau.cells().iter().map(|c| op.identity(cell_dim(c))).collect()
}

/// Operad laws on the window: identities and their faces, both unit laws,
/// faces and trees of composites, and associativity wherever all four
/// composites exist.
pub fn check_operad(exec: Exec, op: &dyn BatOperad) -> Report {
    let c = op.collection();
    let g = c.globset();
    let mut report = Report::new();
    for n in 0..=c.dim {
        let Some(id) = op.identity(n) else {
            if n <= c.size_bound {
                report.fail("identity", format!("no identity in dimension {n}"));
            }
            continue;
        };
        report.checked += 1;
        if c.over.get(&id) != Some(&BTree::straight(n)) {
            report.fail("identity", format!("{id} is not over υ{n}"));
        } else if n > 0 {
            let below = op.identity(n - 1);
            if below.as_ref() != Some(&c.src[&id]) || below.as_ref() != Some(&c.tgt[&id]) {
                report.fail("identity faces", id.clone());
            }
        }
    }
    let all: Vec<&Atom> = c.fibres.values().flatten().collect();
    let per: Vec<Report> = exec.map(&all, |f| {
        let mut r = Report::new();
        let tau = &c.over[*f];
        let cells = tau.cells();
        if let Some(ids) = identity_labelling(op, tau) {
            r.checked += 1;
            if op.compose(f, &ids).as_deref() != Some(f.as_str()) {
                r.fail("right unit", (*f).clone());
            }
        }
        if let Some(id) = op.identity(tau.stage) {
            let mut partial = vec![None; BTree::straight(tau.stage).cells().len()];
            *partial.last_mut().expect("top cell") = Some((*f).clone());
            if c.fill_down(&BTree::straight(tau.stage), &mut partial).is_some() {
                let lab: Labelling = partial.into_iter().map(|x| x.expect("filled")).collect();
                r.checked += 1;
                if op.compose(&id, &lab).as_deref() != Some(f.as_str()) {
                    r.fail("left unit", (*f).clone());
                }
            }
        }
        let Ok(gs) = labellings(&g, tau) else { return r };
        for args in gs {
            let Some(fg) = op.compose(f, &args) else { continue };
            let labels: Vec<BTree> = args.iter().map(|a| c.over[a].clone()).collect();
            let Ok(sub) = btree_substitute(tau, &labels) else {
                r.fail("composite tree", format!("{f} ∘ {args:?}"));
                continue;
            };
            r.checked += 1;
            if c.over[&fg] != sub.tree {
                r.fail("composite tree", format!("{f} ∘ {args:?}"));
            }
            if tau.stage > 0 {
                for (target, faces) in [(false, &c.src), (true, &c.tgt)] {
                    let incl = face_inclusion(tau, target).expect("stage ≥ 1");
                    let index: HashMap<&Cell, usize> = cells.iter().enumerate().map(|(i, x)| (x, i)).collect();
                    let restricted: Labelling = incl.iter().map(|x| args[index[x]].clone()).collect();
                    if let Some(e) = op.compose(&faces[*f], &restricted) {
                        r.checked += 1;
                        if e != faces[&fg] {
                            r.fail(if target { "composite target" } else { "composite source" }, format!("{f} ∘ {args:?}"));
                        }
                    }
                }
            }
            let Ok(hs) = labellings(&g, &sub.tree) else { continue };
            let rho_cells = sub.tree.cells();
            let rho_index: HashMap<&Cell, usize> = rho_cells.iter().enumerate().map(|(i, x)| (x, i)).collect();
            for h in hs {
                let Some(lhs) = op.compose(&fg, &h) else { continue };
                let inner: Option<Labelling> = args
                    .iter()
                    .zip(&sub.embed)
                    .map(|(a, emb)| op.compose(a, &emb.iter().map(|y| h[rho_index[y]].clone()).collect::<Vec<_>>()))
                    .collect();
                let Some(inner) = inner else { continue };
                let Some(rhs) = op.compose(f, &inner) else { continue };
                r.checked += 1;
                if lhs != rhs {
                    r.fail("associativity", format!("{f} ∘ {args:?} ∘ {h:?}"));
                }
            }
        }
        r
    });
    per.into_iter().for_each(|r| report.merge(r));
    report
}

/// A contraction: for each tree and matching pair on its boundary, a
/// filler with those faces.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ContractionFn {
    pub fillers: BTreeMap<(BTree, Atom, Atom), Atom>,
}

impl ContractionFn {
    pub fn get(&self, tau: &BTree, f: &str, g: &str) -> Option<&Atom> {
        self.fillers.get(&(tau.clone(), f.to_string(), g.to_string()))
    }
}

pub fn check_contraction(c: &Collection, psi: &ContractionFn) -> Report {
    let mut r = Report::new();
    for ((tau, f, g), x) in &psi.fillers {
        r.checked += 1;
        if c.over.get(x) != Some(tau) || c.src.get(x) != Some(f) || c.tgt.get(x) != Some(g) {
            r.fail("contraction faces", format!("ψ_{tau}⟨{f},{g}⟩ = {x}"));
        }
    }
    r
}

/// Contractions on a collection's window, found by exhaustive search.
#[derive(Debug, Clone)]
pub struct Contractions {
    /// Total number; saturates at `u128::MAX`.
    pub count: u128,
    /// Listed in full when there are at most `limit` of them.
    pub listed: Vec<ContractionFn>,
}

/// All contractions on `c`. With `truncated`, matching pairs at the top
/// stage must coincide, as for n-collections.
pub fn find_contractions(c: &Collection, truncated: bool, limit: usize) -> Contractions {
    let mut slots: Vec<((BTree, Atom, Atom), Vec<Atom>)> = Vec::new();
    for tau in c.fibres.keys().filter(|t| t.stage >= 1) {
        let face = tau.boundary().expect("stage ≥ 1");
        for (f, g) in c.matching_pairs(&face) {
            let fillers: Vec<Atom> = c.cells(tau).iter().filter(|x| c.src[*x] == f && c.tgt[*x] == g).cloned().collect();
            slots.push(((tau.clone(), f, g), fillers));
        }
    }
    let top_ok = !truncated || c.fibres.keys().filter(|t| t.stage == c.dim).all(|t| c.matching_pairs(t).iter().all(|(f, g)| f == g));
    let count = if top_ok { slots.iter().fold(1u128, |acc, (_, v)| acc.saturating_mul(v.len() as u128)) } else { 0 };
    let mut listed = Vec::new();
    if count as usize <= limit && count > 0 {
        let options: Vec<Vec<Atom>> = slots.iter().map(|(_, v)| v.clone()).collect();
        product(&options, &mut Vec::new(), &mut |pick: &[Atom]| {
            listed.push(ContractionFn { fillers: slots.iter().map(|(k, _)| k.clone()).zip(pick.iter().cloned()).collect() });
        });
    }
    Contractions { count, listed }
}

/// A contraction generator `ψ_τ⟨f, f′⟩`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Gen {
    pub tree: BTree,
    pub src: KCell,
    pub tgt: KCell,
}

/// Normal forms in the free operad on the contraction generators: an
/// identity, or a generator with every cell of its glob labelled.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum KCell {
    Id(usize),
    Node { gen: Arc<Gen>, args: Vec<KCell>, tree: BTree },
}

impl KCell {
    pub fn generator(gen: Gen) -> KCell {
        let args = gen.tree.cells().iter().map(|c| KCell::Id(cell_dim(c))).collect();
        KCell::Node { tree: gen.tree.clone(), gen: Arc::new(gen), args }
    }

    pub fn tree(&self) -> BTree {
        match self {
            KCell::Id(n) => BTree::straight(*n),
            KCell::Node { tree, .. } => tree.clone(),
        }
    }

    pub fn stage(&self) -> usize {
        match self {
            KCell::Id(n) => *n,
            KCell::Node { tree, .. } => tree.stage,
        }
    }

    pub fn is_generator(&self) -> bool {
        matches!(self, KCell::Node { args, .. } if args.iter().all(|a| matches!(a, KCell::Id(_))))
    }

    /// Generator weight: one per generator plus the heavier of its faces;
    /// labels forced as faces of other labels are not counted again.
    pub fn weight(&self) -> usize {
        match self {
            KCell::Id(_) => 0,
            KCell::Node { gen, args, .. } => {
                let cells = gen.tree.cells();
                let maximal = maximal_cells(&cells);
                gen_weight(gen) + maximal.iter().map(|&i| args[i].weight()).sum::<usize>()
            }
        }
    }

    pub fn src(&self) -> Result<KCell> {
        self.face(false)
    }

    pub fn tgt(&self) -> Result<KCell> {
        self.face(true)
    }

    fn face(&self, target: bool) -> Result<KCell> {
        match self {
            KCell::Id(0) | KCell::Node { tree: BTree { stage: 0, .. }, .. } => Err(Error::Malformed("0-cells have no faces".into())),
            KCell::Id(n) => Ok(KCell::Id(n - 1)),
            KCell::Node { gen, args, .. } => {
                let cells = gen.tree.cells();
                let index: HashMap<&Cell, usize> = cells.iter().enumerate().map(|(i, c)| (c, i)).collect();
                let incl = face_inclusion(&gen.tree, target)?;
                let restricted: Vec<KCell> = incl.iter().map(|c| args[index[c]].clone()).collect();
                k_compose(if target { &gen.tgt } else { &gen.src }, &restricted)
            }
        }
    }

    pub fn to_json(&self) -> Value {
        match self {
            KCell::Id(n) => json!({"id": n}),
            KCell::Node { gen, args, .. } => {
                let g = json!({"tree": gen.tree.to_json(), "src": gen.src.to_json(), "tgt": gen.tgt.to_json()});
                if self.is_generator() {
                    json!({"gen": g})
                } else {
                    json!({"gen": g, "args": args.iter().map(KCell::to_json).collect::<Vec<_>>()})
                }
            }
        }
    }

    pub fn from_json(v: &Value) -> Result<KCell> {
        if let Some(n) = v.get("id").and_then(Value::as_u64) {
            return Ok(KCell::Id(n as usize));
        }
        let g = v.get("gen").ok_or_else(|| Error::Malformed(format!("cell term expected, got {v}")))?;
        let src = KCell::from_json(g.get("src").ok_or_else(|| Error::Malformed("generator needs src".into()))?)?;
        let tgt = KCell::from_json(g.get("tgt").ok_or_else(|| Error::Malformed("generator needs tgt".into()))?)?;
        let tree = BTree::from_json_at(src.stage() + 1, g.get("tree").ok_or_else(|| Error::Malformed("generator needs tree".into()))?)?;
        let gen = Gen { tree, src, tgt };
        check_gen(&gen)?;
        match v.get("args").and_then(Value::as_array) {
            None => Ok(KCell::generator(gen)),
            Some(items) => {
                let args = items.iter().map(KCell::from_json).collect::<Result<Vec<_>>>()?;
                node(Arc::new(gen), args)
            }
        }
    }
}

impl fmt::Display for KCell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KCell::Id(n) => write!(f, "1_{n}"),
            KCell::Node { gen, args, .. } => {
                write!(f, "ψ{}⟨{},{}⟩", gen.tree, gen.src, gen.tgt)?;
                if !self.is_generator() {
                    let cells = gen.tree.cells();
                    let shown: Vec<String> = maximal_cells(&cells).iter().map(|&i| args[i].to_string()).collect();
                    write!(f, "∘({})", shown.join(","))?;
                }
                Ok(())
            }
        }
    }
}

fn gen_weight(g: &Gen) -> usize {
    1 + g.src.weight().max(g.tgt.weight())
}

/// Indices of cells that are nobody's face: the top cells and the
/// degenerate ones.
fn maximal_cells(cells: &[Cell]) -> Vec<usize> {
    let faces: HashSet<Cell> = cells.iter().filter(|c| cell_dim(c) > 0).flat_map(|c| [cell_src(c), cell_tgt(c)]).collect();
    (0..cells.len()).filter(|&i| !faces.contains(&cells[i])).collect()
}

fn check_gen(g: &Gen) -> Result<()> {
    let face = g.tree.boundary()?;
    if g.src.tree() != face || g.tgt.tree() != face {
        return Err(Error::NotComposable(format!("generator faces are not over {face}")));
    }
    if face.stage > 0 && (g.src.src()? != g.tgt.src()? || g.src.tgt()? != g.tgt.tgt()?) {
        return Err(Error::NotComposable("generator faces do not match".into()));
    }
    Ok(())
}

fn node(gen: Arc<Gen>, args: Vec<KCell>) -> Result<KCell> {
    let labels: Vec<BTree> = args.iter().map(KCell::tree).collect();
    let tree = btree_substitute(&gen.tree, &labels)?.tree;
    Ok(KCell::Node { gen, args, tree })
}

/// Composition of normal forms: identities are absorbed and everything
/// else is pushed into the generator's labels.
pub fn k_compose(f: &KCell, args: &[KCell]) -> Result<KCell> {
    match f {
        KCell::Id(n) => {
            let cells = BTree::straight(*n).cells();
            if args.len() != cells.len() {
                return Err(Error::Arity { expected: cells.len(), got: args.len() });
            }
            Ok(args.last().expect("top cell").clone())
        }
        KCell::Node { gen, args: inner, tree } => {
            let n_cells = tree.cells();
            if args.len() != n_cells.len() {
                return Err(Error::Arity { expected: n_cells.len(), got: args.len() });
            }
            let index: HashMap<&Cell, usize> = n_cells.iter().enumerate().map(|(i, c)| (c, i)).collect();
            let labels: Vec<BTree> = inner.iter().map(KCell::tree).collect();
            let sub = btree_substitute(&gen.tree, &labels)?;
            let pushed = inner
                .iter()
                .zip(&sub.embed)
                .map(|(a, emb)| k_compose(a, &emb.iter().map(|y| args[index[y]].clone()).collect::<Vec<_>>()))
                .collect::<Result<Vec<_>>>()?;
            node(gen.clone(), pushed)
        }
    }
}

/// Bounds for generating a fragment of `K`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KBounds {
    pub dim: usize,
    pub tree_size: usize,
    pub weight: usize,
    /// Restrict which trees carry contraction generators.
    pub generator_trees: Option<Vec<BTree>>,
}

impl KBounds {
    pub fn new(dim: usize, tree_size: usize, weight: usize) -> Self {
        KBounds { dim, tree_size, weight, generator_trees: None }
    }

    fn allows(&self, t: &BTree) -> bool {
        self.generator_trees.as_ref().is_none_or(|ts| ts.contains(t))
    }
}

/// A bounded fragment of `K` or `K_n` with its contraction.
#[derive(Debug, Clone)]
pub struct KFragment {
    pub bounds: KBounds,
    /// Top-stage cells are identified by their faces.
    pub truncated_at: Option<usize>,
    pub terms: IndexMap<Atom, KCell>,
    index: HashMap<KCell, Atom>,
    pub collection: Collection,
    pub contraction: ContractionFn,
    composites: OnceLock<Vec<(Atom, Labelling, Atom)>>,
}

impl KFragment {
    /// Every composite `f ∘ args` that stays inside the fragment.
    pub fn composites(&self) -> &[(Atom, Labelling, Atom)] {
        self.composites.get_or_init(|| {
            let g = self.collection.globset();
            let fs: Vec<&Atom> = self.terms.keys().collect();
            Exec::default().flat_map(&fs, |f| {
                let tau = &self.collection.over[*f];
                labellings(&g, tau)
                    .unwrap_or_default()
                    .into_iter()
                    .filter_map(|args| self.compose(f, &args).map(|r| ((*f).clone(), args, r)))
                    .collect()
            })
        })
    }

    pub fn name_of(&self, x: &KCell) -> Option<&Atom> {
        self.index.get(x)
    }

    pub fn cells_over(&self, tau: &BTree) -> Vec<&KCell> {
        self.collection.cells(tau).iter().map(|a| &self.terms[a]).collect()
    }

    fn normalize(&self, x: KCell) -> Result<KCell> {
        match self.truncated_at {
            Some(n) if x.stage() == n && n > 0 => representative(x.tree(), x.src()?, x.tgt()?),
            _ => Ok(x),
        }
    }

    pub fn to_json(&self) -> Value {
        json!({
            "dim": self.bounds.dim,
            "tree_size": self.bounds.tree_size,
            "weight": self.bounds.weight,
            "truncated_at": self.truncated_at,
            "cells": self.terms.iter().map(|(n, t)| json!({"name": n, "tree": t.tree().to_json(), "term": t.to_json()})).collect::<Vec<_>>(),
        })
    }
}

impl BatOperad for KFragment {
    fn collection(&self) -> &Collection {
        &self.collection
    }

    fn identity(&self, n: usize) -> Option<Atom> {
        self.index.get(&KCell::Id(n)).cloned()
    }

    fn compose(&self, f: &str, args: &[Atom]) -> Option<Atom> {
        let f = self.terms.get(f)?;
        let args: Vec<KCell> = args.iter().map(|a| self.terms.get(a).cloned()).collect::<Option<_>>()?;
        let r = self.normalize(k_compose(f, &args).ok()?).ok()?;
        self.index.get(&r).cloned()
    }
}

/// The cell of `K_n` standing for a matching pair at the top stage.
fn representative(tree: BTree, src: KCell, tgt: KCell) -> Result<KCell> {
    let n = tree.stage;
    if tree == BTree::straight(n) && src == KCell::Id(n - 1) && tgt == KCell::Id(n - 1) {
        return Ok(KCell::Id(n));
    }
    Ok(KCell::generator(Gen { tree, src, tgt }))
}

pub fn generate_k(bounds: &KBounds) -> Result<KFragment> {
    generate(bounds, None)
}

/// `K_n`: as `K` below stage n; at stage n one cell per matching pair.
pub fn generate_k_n(n: usize, bounds: &KBounds) -> Result<KFragment> {
    if n == 0 {
        return Err(Error::Unsupported("K_0".into()));
    }
    let mut b = bounds.clone();
    b.dim = b.dim.min(n);
    generate(&b, Some(n))
}

fn generate(bounds: &KBounds, truncate: Option<usize>) -> Result<KFragment> {
    // by stage: (cell, weight)
    let mut stages: Vec<Vec<(KCell, usize)>> = vec![vec![(KCell::Id(0), 0)]];
    let mut fillers: BTreeMap<(BTree, KCell, KCell), KCell> = BTreeMap::new();
    for d in 1..=bounds.dim {
        let window: Vec<BTree> = trees(d, bounds.tree_size);
        let below = &stages[d - 1];
        let mut gens: Vec<(Arc<Gen>, usize)> = Vec::new();
        for tau in &window {
            if !bounds.allows(tau) && truncate != Some(d) {
                continue;
            }
            let face = tau.boundary()?;
            let over: Vec<&(KCell, usize)> = below.iter().filter(|(x, _)| x.tree() == face).collect();
            for (f, wf) in &over {
                for (g, wg) in &over {
                    if d >= 2 && (f.src()? != g.src()? || f.tgt()? != g.tgt()?) {
                        continue;
                    }
                    let w = 1 + wf.max(wg);
                    if truncate == Some(d) {
                        let r = representative(tau.clone(), f.clone(), g.clone())?;
                        fillers.insert((tau.clone(), f.clone(), g.clone()), r);
                    } else if w <= bounds.weight {
                        let gen = Arc::new(Gen { tree: tau.clone(), src: f.clone(), tgt: g.clone() });
                        fillers.insert((tau.clone(), f.clone(), g.clone()), KCell::generator((*gen).clone()));
                        gens.push((gen, w));
                    }
                }
            }
        }
        if truncate == Some(d) {
            let mut top: Vec<KCell> = fillers.iter().filter(|((t, _, _), _)| t.stage == d).map(|(_, x)| x.clone()).collect();
            top.sort();
            top.dedup();
            stages.push(top.into_iter().map(|x| (x, 0)).collect());
            continue;
        }
        let mut layers: Vec<Vec<KCell>> = vec![if d <= bounds.tree_size { vec![KCell::Id(d)] } else { Vec::new() }];
        for k in 1..=bounds.weight {
            let mut layer = Vec::new();
            for (gen, w) in &gens {
                if *w > k {
                    continue;
                }
                let cells = gen.tree.cells();
                let maximal = maximal_cells(&cells);
                let options: Vec<Vec<(KCell, usize)>> = maximal
                    .iter()
                    .map(|&i| {
                        let e = cell_dim(&cells[i]);
                        if e == d {
                            layers.iter().enumerate().flat_map(|(wk, l)| l.iter().map(move |x| (x.clone(), wk))).collect()
                        } else {
                            stages[e].clone()
                        }
                    })
                    .collect();
                let budget = k - w;
                let mut acc: Vec<(usize, KCell)> = Vec::new();
                fill_labels(&cells, &maximal, &options, budget, 0, &mut acc, &mut |labels: Vec<KCell>| {
                    if let Ok(x) = node(gen.clone(), labels) {
                        if x.tree().size() <= bounds.tree_size {
                            layer.push(x);
                        }
                    }
                })?;
            }
            layer.sort();
            layer.dedup();
            layers.push(layer);
        }
        stages.push(layers.into_iter().enumerate().flat_map(|(w, l)| l.into_iter().map(move |x| (x, w))).collect());
    }
    let mut terms = IndexMap::new();
    let mut index = HashMap::new();
    let mut rows = Vec::new();
    for (i, (x, _)) in stages.iter().flatten().enumerate() {
        let name = format!("k{i}");
        index.insert(x.clone(), name.clone());
        terms.insert(name, x.clone());
    }
    for (name, x) in &terms {
        let (s, t) = if x.stage() > 0 { (Some(x.src()?), Some(x.tgt()?)) } else { (None, None) };
        let look = |y: Option<KCell>| -> Result<Option<Atom>> {
            y.map(|y| index.get(&y).cloned().ok_or_else(|| Error::Missing(format!("face {y} of {x} outside the fragment")))).transpose()
        };
        rows.push((name.clone(), x.tree(), look(s)?, look(t)?));
    }
    let collection = Collection::new(bounds.dim, bounds.tree_size, rows)?;
    let contraction = ContractionFn {
        fillers: fillers
            .into_iter()
            .filter_map(|((t, f, g), x)| Some(((t, index.get(&f)?.clone(), index.get(&g)?.clone()), index.get(&x)?.clone())))
            .collect(),
    };
    Ok(KFragment { bounds: bounds.clone(), truncated_at: truncate, terms, index, collection, contraction, composites: OnceLock::new() })
}

/// Choose labels for the maximal cells within the weight budget, fill in
/// the forced faces, and emit every consistent labelling with exactly the
/// budget used.
fn fill_labels(
    cells: &[Cell],
    maximal: &[usize],
    options: &[Vec<(KCell, usize)>],
    budget: usize,
    used: usize,
    acc: &mut Vec<(usize, KCell)>,
    emit: &mut impl FnMut(Vec<KCell>),
) -> Result<()> {
    let i = acc.len();
    if i == maximal.len() {
        if used != budget {
            return Ok(());
        }
        let index: HashMap<&Cell, usize> = cells.iter().enumerate().map(|(j, c)| (c, j)).collect();
        let mut labels: Vec<Option<KCell>> = vec![None; cells.len()];
        for (j, x) in acc.iter() {
            labels[*j] = Some(x.clone());
        }
        for j in (0..cells.len()).rev() {
            let Some(x) = labels[j].clone() else { continue };
            if cell_dim(&cells[j]) == 0 {
                continue;
            }
            for (face, val) in [(cell_src(&cells[j]), x.src()?), (cell_tgt(&cells[j]), x.tgt()?)] {
                let slot = &mut labels[index[&face]];
                match slot {
                    Some(v) if *v != val => return Ok(()),
                    _ => *slot = Some(val),
                }
            }
        }
        emit(labels.into_iter().map(|l| l.expect("every cell is a face of a maximal one")).collect());
        return Ok(());
    }
    for (x, w) in &options[i] {
        if used + w > budget {
            continue;
        }
        acc.push((maximal[i], x.clone()));
        fill_labels(cells, maximal, options, budget, used + w, acc, emit)?;
        acc.pop();
    }
    Ok(())
}

/// Operad-with-contraction maps from a `K` fragment into a target, by
/// exhaustive search: each cell may go to any target cell over the same
/// tree with the right faces, subject to preserving identities, the
/// contraction, and every composite defined on both sides.
pub fn maps_from_k(k: &KFragment, target: &dyn BatOperad, psi: &ContractionFn) -> Vec<HashMap<Atom, Atom>> {
    let tc = target.collection();
    let mut order: Vec<&Atom> = k.terms.keys().collect();
    order.sort_by_key(|a| (k.terms[*a].stage(), k.terms[*a].weight()));
    let mut out = Vec::new();
    let mut map: HashMap<Atom, Atom> = HashMap::new();
    fn go(
        i: usize,
        order: &[&Atom],
        k: &KFragment,
        target: &dyn BatOperad,
        psi: &ContractionFn,
        map: &mut HashMap<Atom, Atom>,
        out: &mut Vec<HashMap<Atom, Atom>>,
    ) {
        let tc = target.collection();
        if i == order.len() {
            out.push(map.clone());
            return;
        }
        let name = order[i];
        let x = &k.terms[name];
        let tree = x.tree();
        let forced: Option<Option<Atom>> = match x {
            KCell::Id(n) => Some(target.identity(*n)),
            KCell::Node { gen, args, .. } => {
                let bare = KCell::generator((**gen).clone());
                let pair = (k.name_of(&gen.src).and_then(|a| map.get(a)), k.name_of(&gen.tgt).and_then(|a| map.get(a)));
                if x.is_generator() {
                    match pair {
                        (Some(f), Some(g)) => Some(psi.get(&gen.tree, f, g).cloned()),
                        _ => None,
                    }
                } else {
                    let head = k.name_of(&bare).and_then(|a| map.get(a));
                    let images: Option<Vec<Atom>> = args.iter().map(|a| k.name_of(a).and_then(|n| map.get(n)).cloned()).collect();
                    match (head, images) {
                        (Some(h), Some(imgs)) => target.compose(h, &imgs).map(Some),
                        _ => None,
                    }
                }
            }
        };
        let want = (tree.stage > 0).then(|| (map.get(&k.collection.src[name]).cloned(), map.get(&k.collection.tgt[name]).cloned()));
        let faces_ok = |y: &Atom| want.as_ref().is_none_or(|(s, t)| s.as_ref() == tc.src.get(y) && t.as_ref() == tc.tgt.get(y));
        let options: Vec<Atom> = match forced {
            Some(Some(y)) => vec![y],
            Some(None) => Vec::new(),
            None => tc.cells(&tree).to_vec(),
        };
        for y in options.into_iter().filter(|y| tc.over.get(y) == Some(&tree) && faces_ok(y)) {
            map.insert(name.clone(), y);
            go(i + 1, order, k, target, psi, map, out);
            map.remove(name);
        }
    }
    if k.terms.values().all(|x| !tc.cells(&x.tree()).is_empty() || x.tree().size() > tc.size_bound) {
        go(0, &order, k, target, psi, &mut map, &mut out);
    }
    // keep only maps that preserve every composite defined on both sides
    out.retain(|m| {
        k.composites().iter().all(|(f, args, r)| {
            let image: Labelling = args.iter().map(|a| m[a].clone()).collect();
            target.compose(&m[f], &image).is_none_or(|s| m[r] == s)
        })
    });
    out
}

/// Evaluation table of an algebra: `(f, labelling of f's glob in X) ↦ cell`.
pub type AlgebraTable = HashMap<(Atom, Labelling), Atom>;

pub fn algebra_eval(table: &AlgebraTable, f: &str, lab: &[Atom]) -> Result<Atom> {
    table.get(&(f.to_string(), lab.to_vec())).cloned().ok_or_else(|| Error::Missing(format!("{f} on {lab:?}")))
}

/// Algebra laws: values in the right dimension with the right faces,
/// identities evaluate to the top cell, and evaluating a composite equals
/// evaluating in stages.
pub fn check_algebra(op: &dyn BatOperad, x: &GlobSet, table: &AlgebraTable) -> Report {
    let c = op.collection();
    let g = c.globset();
    let mut r = Report::new();
    let dim_of: HashMap<&Atom, usize> = x.cells.iter().enumerate().flat_map(|(d, s)| s.iter().map(move |a| (a, d))).collect();
    for f in c.fibres.values().flatten() {
        let tau = &c.over[f];
        let cells = tau.cells();
        let index: HashMap<&Cell, usize> = cells.iter().enumerate().map(|(i, y)| (y, i)).collect();
        let Ok(labs) = labellings(x, tau) else { continue };
        for lab in &labs {
            let Ok(v) = algebra_eval(table, f, lab) else {
                r.fail("total", format!("{f} on {lab:?}"));
                continue;
            };
            r.checked += 1;
            if dim_of.get(&v) != Some(&tau.stage) {
                r.fail("dimension", format!("{f} on {lab:?}"));
                continue;
            }
            if tau.stage > 0 {
                for (target, faces, xf) in [(false, &c.src, &x.s), (true, &c.tgt, &x.t)] {
                    let incl = face_inclusion(tau, target).expect("stage ≥ 1");
                    let restricted: Labelling = incl.iter().map(|y| lab[index[y]].clone()).collect();
                    if let Ok(e) = algebra_eval(table, &faces[f], &restricted) {
                        if xf[tau.stage - 1].graph()[&v] != e {
                            r.fail("faces", format!("{f} on {lab:?}"));
                        }
                    }
                }
            }
            if Some(f) == op.identity(tau.stage).as_ref() && Some(&v) != lab.last() {
                r.fail("identity", format!("{f} on {lab:?}"));
            }
        }
        let Ok(gs) = labellings(&g, tau) else { continue };
        for args in gs {
            let Some(fg) = op.compose(f, &args) else { continue };
            let labels: Vec<BTree> = args.iter().map(|a| c.over[a].clone()).collect();
            let Ok(sub) = btree_substitute(tau, &labels) else { continue };
            let rho_cells = sub.tree.cells();
            let rho_index: HashMap<&Cell, usize> = rho_cells.iter().enumerate().map(|(i, y)| (y, i)).collect();
            let Ok(hs) = labellings(x, &sub.tree) else { continue };
            for h in hs {
                let whole = algebra_eval(table, &fg, &h);
                let staged: Result<Labelling> = args
                    .iter()
                    .zip(&sub.embed)
                    .map(|(a, emb)| algebra_eval(table, a, &emb.iter().map(|y| h[rho_index[y]].clone()).collect::<Vec<_>>()))
                    .collect();
                let staged = staged.and_then(|s| algebra_eval(table, f, &s));
                r.checked += 1;
                match (whole, staged) {
                    (Ok(a), Ok(b)) if a == b => {}
                    (a, b) => r.fail("composition", format!("{f} ∘ {args:?} on {h:?}: {a:?} vs {b:?}")),
                }
            }
        }
    }
    r
}
