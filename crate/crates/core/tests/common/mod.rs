#![allow(dead_code)]

use indexmap::IndexMap;
use opetope_forge::finbase::{FinMap, FinSet, SliceObj};
use opetope_forge::monadkit::{product, Shape};
use opetope_forge::multicat::{AlgebraStr, Multicat};
use opetope_forge::opetopia::PTree;

/// Trees of exactly `size` constructors, straight from the grammar.
pub fn trees_of_size(size: usize) -> Vec<PTree> {
    match size {
        0 => Vec::new(),
        1 => vec![PTree::Edge, PTree::Node(Vec::new())],
        _ => {
            let mut out = Vec::new();
            forests(size - 1, &mut Vec::new(), &mut out);
            out
        }
    }
}

fn forests(left: usize, acc: &mut Vec<PTree>, out: &mut Vec<PTree>) {
    if left == 0 {
        out.push(PTree::Node(acc.clone()));
        return;
    }
    for s in 1..=left {
        for t in trees_of_size(s) {
            acc.push(t);
            forests(left - s, acc, out);
            acc.pop();
        }
    }
}

pub fn trees_up_to(bound: usize) -> Vec<PTree> {
    (1..=bound).flat_map(trees_of_size).collect()
}

/// Z/2 as a one-object category with arrows "0" and "1".
pub fn z2_category() -> Multicat {
    Multicat::category(&["*"], &[("0", "*", "*"), ("1", "*", "*")], &[("*", "0")], |a, b| {
        Some(if a == b { "0".into() } else { "1".into() })
    })
    .unwrap()
}

pub fn carrier_over(base: &FinSet, sizes: &[usize]) -> SliceObj {
    let mut graph = IndexMap::new();
    for (s, &n) in base.iter().zip(sizes) {
        for i in 0..n {
            graph.insert(format!("{s}.{i}"), s.clone());
        }
    }
    let total = FinSet::new(graph.keys().cloned()).unwrap();
    SliceObj::new(FinMap::new(total, base.clone(), graph).unwrap())
}

/// Pairs (monoid structure on {0..n}, homomorphism to Z/2), by trying every
/// multiplication table.
pub fn monoids_over_z2(n: usize) -> usize {
    (0..(1usize << n)).map(|bits| monoids_graded(n, bits)).sum()
}

/// As above, with element i in degree `(bits >> i) & 1`.
pub fn monoids_graded(n: usize, bits: usize) -> usize {
    let mut count = 0;
    let cells = n * n;
    let tables = n.pow(cells as u32);
    for code in 0..tables {
        let mul = |i: usize, j: usize| (code / n.pow((i * n + j) as u32)) % n;
        let assoc = (0..n).all(|a| (0..n).all(|b| (0..n).all(|c| mul(mul(a, b), c) == mul(a, mul(b, c)))));
        if !assoc {
            continue;
        }
        let Some(e) = (0..n).find(|&e| (0..n).all(|x| mul(e, x) == x && mul(x, e) == x)) else { continue };
        let p = |i: usize| (bits >> i) & 1;
        if p(e) == 0 && (0..n).all(|a| (0..n).all(|b| p(mul(a, b)) == (p(a) + p(b)) % 2)) {
            count += 1;
        }
    }
    count
}

/// Algebras of a fragment of `M⁺` (objects "0", "1", arities ≤ 3) on carriers
/// of size `n`, over every grading. Candidate actions are generated from a
/// nullary value and a binary table, the only freedom the unit and
/// associativity laws leave; each candidate is then checked in full.
pub fn plus_algebras(mplus: &Multicat, n: usize) -> usize {
    let objects = mplus.graph.objects.clone();
    let mut count = 0;
    for bits in 0..(1usize << n) {
        let grade = |i: usize| (bits >> i) & 1;
        let names: Vec<String> = (0..n).map(|i| format!("x{i}")).collect();
        let proj = FinMap::from_fn(FinSet::new(names.clone()).unwrap(), objects.clone(), |x| {
            grade(x[1..].parse().unwrap()).to_string()
        })
        .unwrap();
        let carrier = SliceObj::new(proj);
        let over = |g: usize| (0..n).filter(|&i| grade(i) == g).collect::<Vec<_>>();
        let mut options = vec![over(0)];
        for i in 0..n {
            for j in 0..n {
                options.push(over((grade(i) + grade(j)) % 2));
            }
        }
        product(&options, &mut Vec::new(), &mut |pick: &[usize]| {
            let e = pick[0];
            let mul = |i: usize, j: usize| pick[1 + i * n + j];
            let unital = (0..n).all(|x| mul(e, x) == x && mul(x, e) == x);
            if !unital || !(0..n).all(|a| (0..n).all(|b| (0..n).all(|c| mul(mul(a, b), c) == mul(a, mul(b, c))))) {
                return;
            }
            let act = |xi: &Shape<String>, _: &String| {
                let xs: Vec<usize> = xi.leaves().iter().map(|x| x[1..].parse().unwrap()).collect();
                let v = match xs.split_first() {
                    None => e,
                    Some((first, rest)) => rest.iter().fold(*first, |acc, &x| mul(acc, x)),
                };
                Some(format!("x{v}"))
            };
            if AlgebraStr::new(mplus, carrier.clone(), act).is_ok() {
                count += 1;
            }
        });
    }
    count
}
