//! Per-component hit counting between a predicted and a gold query.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::canon::{spider_op, CQuery};
use crate::sql::SqlOp;

/// Hits and totals for one component of one (pred, gold) pair.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentCount {
    pub hits: usize,
    pub pred: usize,
    pub gold: usize,
}

impl ComponentCount {
    fn new(hits: usize, pred: usize, gold: usize) -> Self {
        Self { hits, pred, gold }
    }

    /// The component matches completely for this pair.
    pub fn is_perfect(&self) -> bool {
        self.pred == self.gold && self.hits == self.pred
    }

    pub fn add(&mut self, other: ComponentCount) {
        self.hits += other.hits;
        self.pred += other.pred;
        self.gold += other.gold;
    }
}

/// Reported component names, in display order.
pub const COMPONENTS: [&str; 7] = ["select", "where", "group", "order", "and_or", "iue", "keywords"];

/// Component counts for one pair. The three `*_loose` counts are the
/// weaker variants that exact match also requires but that are not
/// reported on their own.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ComponentSet {
    pub select: ComponentCount,
    pub where_: ComponentCount,
    pub group: ComponentCount,
    pub order: ComponentCount,
    pub and_or: ComponentCount,
    pub iue: ComponentCount,
    pub keywords: ComponentCount,
    pub select_loose: ComponentCount,
    pub where_loose: ComponentCount,
    pub group_loose: ComponentCount,
}

impl ComponentSet {
    pub fn named(&self) -> [(&'static str, ComponentCount); 7] {
        [
            ("select", self.select),
            ("where", self.where_),
            ("group", self.group),
            ("order", self.order),
            ("and_or", self.and_or),
            ("iue", self.iue),
            ("keywords", self.keywords),
        ]
    }

    fn all(&self) -> [ComponentCount; 10] {
        [
            self.select,
            self.where_,
            self.group,
            self.order,
            self.and_or,
            self.iue,
            self.keywords,
            self.select_loose,
            self.where_loose,
            self.group_loose,
        ]
    }

    pub fn all_perfect(&self) -> bool {
        self.all().iter().all(ComponentCount::is_perfect)
    }
}

/// Size of the multiset intersection of `pred` and `gold`.
fn multiset_hits<T: PartialEq>(pred: &[T], gold: &[T]) -> usize {
    let mut left: Vec<&T> = gold.iter().collect();
    let mut hits = 0;
    for p in pred {
        if let Some(i) = left.iter().position(|g| *g == p) {
            left.swap_remove(i);
            hits += 1;
        }
    }
    hits
}

fn multiset<T: PartialEq>(pred: &[T], gold: &[T]) -> ComponentCount {
    ComponentCount::new(multiset_hits(pred, gold), pred.len(), gold.len())
}

fn flag(pred: bool, gold: bool, hit: bool) -> ComponentCount {
    ComponentCount::new((pred && gold && hit) as usize, pred as usize, gold as usize)
}

fn keywords(q: &CQuery) -> BTreeSet<&'static str> {
    let mut out = BTreeSet::new();
    if !q.where_.is_empty() {
        out.insert("where");
    }
    if !q.group_by.is_empty() {
        out.insert("group");
    }
    if !q.having.is_empty() {
        out.insert("having");
    }
    if let Some((desc, _)) = &q.order_by {
        out.insert(if *desc { "desc" } else { "asc" });
        out.insert("order");
    }
    if q.limit.is_some() {
        out.insert("limit");
    }
    for (name, sub) in ["intersect", "union", "except"].into_iter().zip(q.set_ops()) {
        if sub.is_some() {
            out.insert(name);
        }
    }
    if q.has_or() {
        out.insert("or");
    }
    let conds = || q.where_.iter().chain(&q.having);
    if conds().any(|c| c.not) {
        out.insert("not");
    }
    if conds().any(|c| c.op == spider_op(SqlOp::In)) {
        out.insert("in");
    }
    if conds().any(|c| c.op == spider_op(SqlOp::Like)) {
        out.insert("like");
    }
    out
}

fn and_or(q: &CQuery) -> BTreeSet<bool> {
    q.where_links.iter().copied().collect()
}

/// Count every component for one pair.
pub fn compare(pred: &CQuery, gold: &CQuery) -> ComponentSet {
    let select = multiset(&pred.select, &gold.select);
    let select_loose = {
        let strip = |q: &CQuery| q.select.iter().map(|(_, v)| v.clone()).collect::<Vec<_>>();
        multiset(&strip(pred), &strip(gold))
    };
    let where_ = multiset(&pred.where_, &gold.where_);
    let where_loose = {
        let strip = |q: &CQuery| q.where_.iter().map(|c| c.left.clone()).collect::<Vec<_>>();
        multiset(&strip(pred), &strip(gold))
    };
    let group_loose = {
        let cols = |q: &CQuery| q.group_by.iter().map(|u| u.col).collect::<Vec<_>>();
        multiset(&cols(pred), &cols(gold))
    };
    let group = flag(
        !pred.group_by.is_empty(),
        !gold.group_by.is_empty(),
        pred.group_by == gold.group_by && pred.having == gold.having && pred.having_links == gold.having_links,
    );
    let order = flag(
        pred.order_by.is_some(),
        gold.order_by.is_some(),
        pred.order_by == gold.order_by && pred.limit == gold.limit,
    );
    let and_or = {
        let (p, g) = (and_or(pred), and_or(gold));
        if p == g {
            ComponentCount::new(1, 1, 1)
        } else {
            ComponentCount::new(0, p.len(), g.len())
        }
    };
    let mut iue = ComponentCount::default();
    for (p, g) in pred.set_ops().into_iter().zip(gold.set_ops()) {
        let hit = match (p, g) {
            (Some(p), Some(g)) => exact(p, g).0,
            _ => false,
        };
        iue.add(flag(p.is_some(), g.is_some(), hit));
    }
    let keywords = {
        let (p, g) = (keywords(pred), keywords(gold));
        ComponentCount::new(p.intersection(&g).count(), p.len(), g.len())
    };
    ComponentSet {
        select,
        where_,
        group,
        order,
        and_or,
        iue,
        keywords,
        select_loose,
        where_loose,
        group_loose,
    }
}

/// Every component matches and the FROM tables agree as a multiset.
pub fn exact(pred: &CQuery, gold: &CQuery) -> (bool, ComponentSet) {
    let set = compare(pred, gold);
    if !set.all_perfect() {
        return (false, set);
    }
    if gold.from.is_empty() {
        return (true, set);
    }
    let mut p = pred.from.clone();
    let mut g = gold.from.clone();
    p.sort();
    g.sort();
    (p == g, set)
}
