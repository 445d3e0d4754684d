//! Dependency graph, stratification, body ordering for left-to-right
//! evaluation, and reconstruction of functional-dependency chains from
//! constrained values back to their generator atoms.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt::{self, Write};

use thiserror::Error;

use crate::ir::*;
use crate::schema::{is_builtin_type, Schema};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum EdgeTag {
    Positive,
    /// The head reads a fully computed aggregate of the body predicate.
    Aggregate,
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub struct Edge {
    pub from: String,
    pub to: String,
    pub tag: EdgeTag,
}

/// `p -> q` whenever a clause with head `p` reads `q`.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct DepGraph {
    pub nodes: BTreeSet<String>,
    /// Sorted; one entry per (from, to), aggregate dominating positive.
    pub edges: Vec<Edge>,
    /// Clause indices (derivation rules, facts, aggregates) defining each predicate.
    pub defining: BTreeMap<String, Vec<usize>>,
}

impl DepGraph {
    pub fn successors<'a>(&'a self, p: &'a str) -> impl Iterator<Item = &'a Edge> + 'a {
        let start = self.edges.partition_point(|e| e.from.as_str() < p);
        self.edges[start..].iter().take_while(move |e| e.from == p)
    }

    pub fn has_edge(&self, from: &str, to: &str, tag: EdgeTag) -> bool {
        self.successors(from).any(|e| e.to == to && e.tag == tag)
    }

    /// Graphviz rendering; aggregate edges are dashed.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph deps {\n");
        for n in &self.nodes {
            let _ = writeln!(out, "  \"{n}\";");
        }
        for e in &self.edges {
            let _ = match e.tag {
                EdgeTag::Positive => writeln!(out, "  \"{}\" -> \"{}\";", e.from, e.to),
                EdgeTag::Aggregate => {
                    writeln!(
                        out,
                        "  \"{}\" -> \"{}\" [style=dashed, label=\"agg\"];",
                        e.from, e.to
                    )
                }
            };
        }
        out.push_str("}\n");
        out
    }
}

pub fn build_dep_graph(program: &Program) -> DepGraph {
    let mut edges: BTreeMap<(String, String), EdgeTag> = BTreeMap::new();
    let mut add = |from: &str, to: &str, tag: EdgeTag| {
        let e = edges
            .entry((from.to_string(), to.to_string()))
            .or_insert(tag);
        *e = (*e).max(tag);
    };
    fn body_edges(
        head: &str,
        body: &[Literal],
        base: EdgeTag,
        add: &mut impl FnMut(&str, &str, EdgeTag),
    ) {
        for l in body {
            match l {
                Literal::Compare(c) => {
                    let mut preds = Vec::new();
                    c.lhs.lookups(&mut preds);
                    c.rhs.lookups(&mut preds);
                    for p in preds {
                        add(head, p, EdgeTag::Aggregate);
                    }
                }
                Literal::Negated(inner) => {
                    body_edges(head, core::slice::from_ref(inner), base, add)
                }
                Literal::Disjunction(alts) => {
                    for alt in alts {
                        body_edges(head, alt, base, add);
                    }
                }
                _ => {
                    if let Some(p) = l.pred() {
                        if !is_builtin_type(p) {
                            add(head, p, base);
                        }
                    }
                }
            }
        }
    }

    let mut defining: BTreeMap<String, Vec<usize>> = BTreeMap::new();
    for (idx, clause) in program.clauses.iter().enumerate() {
        match clause {
            Clause::Rule(r) => {
                for h in &r.head {
                    defining.entry(h.pred().to_string()).or_default().push(idx);
                    body_edges(h.pred(), &r.body, EdgeTag::Positive, &mut add);
                }
            }
            Clause::Agg(a) => {
                defining.entry(a.head.pred.clone()).or_default().push(idx);
                body_edges(&a.head.pred, &a.body, EdgeTag::Aggregate, &mut add);
            }
            Clause::Decl(_) => {}
        }
    }
    for v in defining.values_mut() {
        v.dedup();
    }
    let mut nodes = program.predicates();
    for (from, to) in edges.keys() {
        nodes.insert(from.clone());
        nodes.insert(to.clone());
    }
    DepGraph {
        nodes,
        edges: edges
            .into_iter()
            .map(|((from, to), tag)| Edge { from, to, tag })
            .collect(),
        defining,
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stratum {
    pub preds: Vec<String>,
    pub recursive: bool,
    /// Derivation rules and facts defining these predicates.
    pub rules: Vec<usize>,
    pub agg_rules: Vec<usize>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct StratumPlan {
    pub strata: Vec<Stratum>,
}

impl StratumPlan {
    pub fn stratum_of(&self, pred: &str) -> Option<usize> {
        self.strata
            .iter()
            .position(|s| s.preds.iter().any(|p| p == pred))
    }

    pub fn is_recursive(&self, pred: &str) -> bool {
        self.stratum_of(pred)
            .is_some_and(|s| self.strata[s].recursive)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub enum StratificationError {
    /// An aggregate depends, transitively, on its own result.
    #[error("RecursionThroughAggregation: {}", .cycle.join(" -> "))]
    RecursionThroughAggregation { cycle: Vec<String> },
}

/// Strongly connected components (iterative Tarjan) in discovery order.
fn sccs(graph: &DepGraph) -> Vec<Vec<String>> {
    let names: Vec<&str> = graph.nodes.iter().map(String::as_str).collect();
    let index_of: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (*n, i)).collect();
    let adj: Vec<Vec<usize>> = names
        .iter()
        .map(|n| {
            graph
                .successors(n)
                .map(|e| index_of[e.to.as_str()])
                .collect()
        })
        .collect();
    let n = names.len();
    let mut index = alloc::vec![usize::MAX; n];
    let mut low = alloc::vec![0; n];
    let mut on_stack = alloc::vec![false; n];
    let mut stack = Vec::new();
    let mut next = 0;
    let mut out = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        let mut work: Vec<(usize, usize)> = alloc::vec![(root, 0)];
        while let Some(&mut (v, ref mut child)) = work.last_mut() {
            if *child == 0 && index[v] == usize::MAX {
                index[v] = next;
                low[v] = next;
                next += 1;
                stack.push(v);
                on_stack[v] = true;
            }
            if let Some(&w) = adj[v].get(*child) {
                *child += 1;
                if index[w] == usize::MAX {
                    work.push((w, 0));
                } else if on_stack[w] {
                    low[v] = low[v].min(index[w]);
                }
                continue;
            }
            work.pop();
            if let Some(&(parent, _)) = work.last() {
                low[parent] = low[parent].min(low[v]);
            }
            if low[v] == index[v] {
                let mut comp = Vec::new();
                loop {
                    let w = stack.pop().unwrap();
                    on_stack[w] = false;
                    comp.push(names[w].to_string());
                    if w == v {
                        break;
                    }
                }
                comp.sort();
                out.push(comp);
            }
        }
    }
    out
}

/// Orders SCCs bottom-up; incomparable components go by their smallest
/// predicate name. Fails iff an aggregate edge lies inside a component.
pub fn stratify(graph: &DepGraph) -> Result<StratumPlan, StratificationError> {
    let comps = sccs(graph);
    let comp_of: BTreeMap<&str, usize> = comps
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |p| (p.as_str(), i)))
        .collect();

    for e in graph.edges.iter().filter(|e| e.tag == EdgeTag::Aggregate) {
        if comp_of[e.from.as_str()] == comp_of[e.to.as_str()] {
            return Err(StratificationError::RecursionThroughAggregation {
                cycle: cycle_through(graph, &comp_of, &e.from, &e.to),
            });
        }
    }

    // deps[c] = components c reads from.
    let mut deps: Vec<BTreeSet<usize>> = alloc::vec![BTreeSet::new(); comps.len()];
    let mut readers: Vec<BTreeSet<usize>> = alloc::vec![BTreeSet::new(); comps.len()];
    for e in &graph.edges {
        let (a, b) = (comp_of[e.from.as_str()], comp_of[e.to.as_str()]);
        if a != b {
            deps[a].insert(b);
            readers[b].insert(a);
        }
    }
    let mut pending: Vec<usize> = deps.iter().map(BTreeSet::len).collect();
    let mut ready: BTreeSet<(&str, usize)> = (0..comps.len())
        .filter(|&c| pending[c] == 0)
        .map(|c| (comps[c][0].as_str(), c))
        .collect();
    let mut strata = Vec::new();
    while let Some(first) = ready.iter().next().copied() {
        ready.remove(&first);
        let c = first.1;
        for &r in &readers[c] {
            pending[r] -= 1;
            if pending[r] == 0 {
                ready.insert((comps[r][0].as_str(), r));
            }
        }
        let preds = comps[c].clone();
        let recursive = preds.len() > 1 || graph.successors(&preds[0]).any(|e| e.to == preds[0]);
        strata.push(Stratum {
            preds,
            recursive,
            rules: Vec::new(),
            agg_rules: Vec::new(),
        });
    }
    Ok(StratumPlan { strata })
}

/// Shortest path `to ->* from` inside the component, closed by the edge.
fn cycle_through(
    graph: &DepGraph,
    comp_of: &BTreeMap<&str, usize>,
    from: &str,
    to: &str,
) -> Vec<String> {
    let comp = comp_of[from];
    let mut prev: BTreeMap<&str, &str> = BTreeMap::new();
    let mut queue = alloc::collections::VecDeque::from([to]);
    let mut seen = BTreeSet::from([to]);
    while let Some(n) = queue.pop_front() {
        if n == from {
            break;
        }
        for e in graph.successors(n) {
            if comp_of[e.to.as_str()] == comp && seen.insert(e.to.as_str()) {
                prev.insert(e.to.as_str(), n);
                queue.push_back(e.to.as_str());
            }
        }
    }
    let mut path = alloc::vec![from.to_string()];
    let mut cur = from;
    while cur != to {
        cur = prev[cur];
        path.push(cur.to_string());
    }
    path.reverse();
    // path: to ... from; the cycle reads from -> to -> ... -> from.
    let mut cycle = alloc::vec![from.to_string()];
    cycle.extend(path);
    cycle
}

/// Builds and stratifies the program's graph, attaching clause indices.
pub fn plan_program(program: &Program) -> Result<(DepGraph, StratumPlan), StratificationError> {
    let graph = build_dep_graph(program);
    let mut plan = stratify(&graph)?;
    for s in &mut plan.strata {
        let mut rules = BTreeSet::new();
        let mut aggs = BTreeSet::new();
        for p in &s.preds {
            for &idx in graph.defining.get(p).into_iter().flatten() {
                match &program.clauses[idx] {
                    Clause::Agg(_) => aggs.insert(idx),
                    _ => rules.insert(idx),
                };
            }
        }
        s.rules = rules.into_iter().collect();
        s.agg_rules = aggs.into_iter().collect();
    }
    Ok((graph, plan))
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
#[error("SafetyError: variable `{var}` can never be bound")]
pub struct SafetyError {
    pub var: String,
}

fn term_vars(l: &Literal) -> Vec<&str> {
    l.terms().into_iter().filter_map(Term::as_var).collect()
}

/// Whether a test or assignment can run once `bound` is known; returns the
/// variable it would assign, if any.
fn compare_ready<'a>(c: &'a Compare, bound: &BTreeSet<&str>) -> Option<Option<&'a str>> {
    let free = |e: &'a ArithExpr| -> Vec<&'a str> {
        let mut v = Vec::new();
        e.collect_vars(&mut v);
        v.retain(|x| !bound.contains(x));
        v
    };
    let (lf, rf) = (free(&c.lhs), free(&c.rhs));
    if lf.is_empty() && rf.is_empty() {
        return Some(None);
    }
    if c.op == CmpOp::Eq {
        if let (ArithExpr::Var(v), true) = (&c.lhs, rf.is_empty()) {
            return Some(Some(v));
        }
        if let (ArithExpr::Var(v), true) = (&c.rhs, lf.is_empty()) {
            return Some(Some(v));
        }
    }
    None
}

/// Stable reordering of a body so that each comparison sees its variables
/// bound; `required` must all be bound at the end.
pub fn safety_order_body(body: &[Literal], required: &[&str]) -> Result<Vec<Literal>, SafetyError> {
    let mut bound: BTreeSet<&str> = BTreeSet::new();
    let mut remaining: Vec<&Literal> = body.iter().collect();
    let mut out = Vec::with_capacity(body.len());
    while !remaining.is_empty() {
        // Ready comparisons run before the next atom.
        let ready = |l: &&Literal| match l {
            Literal::Atom(_) | Literal::RefMode(_) | Literal::Func(_) => false,
            Literal::Compare(c) => compare_ready(c, &bound).is_some(),
            other => other.vars().iter().all(|v| bound.contains(v)),
        };
        let pick = remaining
            .iter()
            .position(ready)
            .or_else(|| remaining.iter().position(|l| l.is_positive_atom()));
        let Some(i) = pick else {
            let l = remaining[0];
            let mut vs = Vec::new();
            l.collect_vars(&mut vs);
            let var = vs.into_iter().find(|v| !bound.contains(v)).unwrap_or("?");
            return Err(SafetyError {
                var: var.to_string(),
            });
        };
        let l = remaining.remove(i);
        match l {
            Literal::Compare(c) => {
                if let Some(Some(v)) = compare_ready(c, &bound) {
                    bound.insert(v);
                }
            }
            _ => bound.extend(term_vars(l)),
        }
        out.push(l.clone());
    }
    if let Some(v) = required.iter().find(|v| !bound.contains(*v)) {
        return Err(SafetyError { var: v.to_string() });
    }
    Ok(out)
}

pub fn safety_order(rule: &Rule) -> Result<Rule, SafetyError> {
    let head_vars: Vec<&str> = rule
        .head
        .iter()
        .flat_map(|h| h.terms())
        .filter_map(Term::as_var)
        .collect();
    let body = safety_order_body(&rule.body, &head_vars)?;
    Ok(Rule {
        head: rule.head.clone(),
        body,
        span: rule.span,
    })
}

pub fn safety_order_agg(agg: &AggRule) -> Result<AggRule, SafetyError> {
    let mut required: Vec<&str> = agg.head.keys.iter().filter_map(Term::as_var).collect();
    required.push(&agg.value_var);
    let body = safety_order_body(&agg.body, &required)?;
    Ok(AggRule {
        body,
        ..agg.clone()
    })
}

/// How a constrained value is reached from its generator atom.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GeneratorChain {
    pub value_var: String,
    /// Body index of the generator atom.
    pub generator_index: usize,
    pub generator: Atom,
    /// Functional / reference-mode links in body order, with body indices.
    pub chain: Vec<(usize, Literal)>,
    /// Column of the value in the generator (empty chain) or in the final link.
    pub bound_column: usize,
}

impl GeneratorChain {
    /// Predicate whose column holds the value.
    pub fn terminal_pred(&self) -> &str {
        match self.chain.last() {
            Some((_, l)) => l.pred().unwrap_or(&self.generator.pred),
            None => &self.generator.pred,
        }
    }

    /// The generator argument through which the value is reached.
    pub fn generator_var(&self) -> Option<&str> {
        if self.chain.is_empty() {
            return Some(&self.value_var);
        }
        let gen_vars: BTreeSet<&str> = self
            .generator
            .args
            .iter()
            .filter_map(Term::as_var)
            .collect();
        let (_, first) = self.chain.first()?;
        let keys = first.terms();
        keys[..keys.len() - 1]
            .iter()
            .filter_map(|t| t.as_var())
            .find(|v| gen_vars.contains(v))
    }
}

impl fmt::Display for GeneratorChain {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{}: {}",
            self.value_var,
            Literal::Atom(self.generator.clone())
        )?;
        for (_, l) in &self.chain {
            write!(f, " -> {l}")?;
        }
        write!(f, " [col {}]", self.bound_column)
    }
}

#[derive(Clone, Copy)]
enum Reach {
    Direct(usize),
    Link(usize),
}

/// One chain per (relational body atom, numeric variable) where the
/// variable occurs in a comparison and is reachable from the atom through
/// functional dependencies only.
pub fn find_generator_chains(rule: &Rule, schema: &Schema) -> Vec<GeneratorChain> {
    let compared: BTreeSet<&str> = rule
        .body
        .iter()
        .filter_map(|l| match l {
            Literal::Compare(c) => Some(c.vars()),
            _ => None,
        })
        .flatten()
        .collect();
    if compared.is_empty() {
        return Vec::new();
    }
    chains_where(rule, schema, &|v| compared.contains(v))
}

/// Chains for every numeric variable, compared or not.
pub fn find_all_chains(rule: &Rule, schema: &Schema) -> Vec<GeneratorChain> {
    chains_where(rule, schema, &|_| true)
}

fn chains_where(
    rule: &Rule,
    schema: &Schema,
    wanted: &dyn Fn(&str) -> bool,
) -> Vec<GeneratorChain> {
    let mut out = Vec::new();
    for (gi, lit) in rule.body.iter().enumerate() {
        let Literal::Atom(gen) = lit else { continue };
        if is_builtin_type(&gen.pred) {
            continue;
        }
        let mut reach: BTreeMap<&str, Reach> = BTreeMap::new();
        for (col, t) in gen.args.iter().enumerate() {
            if let Term::Var(v) = t {
                reach.entry(v.as_str()).or_insert(Reach::Direct(col));
            }
        }
        loop {
            let mut changed = false;
            for (k, l) in rule.body.iter().enumerate() {
                if !matches!(l, Literal::Func(_) | Literal::RefMode(_)) {
                    continue;
                }
                let terms = l.terms();
                let (keys, value) = terms.split_at(terms.len() - 1);
                let Term::Var(val) = value[0] else { continue };
                if reach.contains_key(val.as_str()) || keys.is_empty() {
                    continue;
                }
                let keys_ok = keys.iter().all(|t| match t {
                    Term::Var(v) => reach.contains_key(v.as_str()),
                    Term::Const(_) => true,
                });
                // A link must hang off the generator, not only off constants.
                let anchored = keys.iter().any(|t| matches!(t, Term::Var(_)));
                if keys_ok && anchored {
                    reach.insert(val, Reach::Link(k));
                    changed = true;
                }
            }
            if !changed {
                break;
            }
        }
        for (&var, &how) in &reach {
            if !wanted(var) {
                continue;
            }
            let (links, column) = match how {
                Reach::Direct(col) => (Vec::new(), col),
                Reach::Link(k) => {
                    let mut links = BTreeSet::new();
                    collect_links(&rule.body, &reach, k, &mut links);
                    let n = rule.body[k].terms().len();
                    (links.into_iter().collect::<Vec<_>>(), n - 1)
                }
            };
            let terminal = match links.last() {
                Some(&k) => rule.body[k].pred().unwrap_or(""),
                None => gen.pred.as_str(),
            };
            if !schema
                .column(terminal, column)
                .is_some_and(|c| c.ty.is_numeric())
            {
                continue;
            }
            out.push(GeneratorChain {
                value_var: var.to_string(),
                generator_index: gi,
                generator: gen.clone(),
                chain: links
                    .into_iter()
                    .map(|k| (k, rule.body[k].clone()))
                    .collect(),
                bound_column: column,
            });
        }
    }
    out
}

fn collect_links(
    body: &[Literal],
    reach: &BTreeMap<&str, Reach>,
    k: usize,
    out: &mut BTreeSet<usize>,
) {
    if !out.insert(k) {
        return;
    }
    let terms = body[k].terms();
    for t in &terms[..terms.len() - 1] {
        if let Term::Var(v) = t {
            if let Some(Reach::Link(j)) = reach.get(v.as_str()) {
                collect_links(body, reach, *j, out);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parser::{parse_literal, parse_program};

    fn rule(src: &str) -> Rule {
        let p = parse_program(src).unwrap();
        let (_, r) = p.rules().next().unwrap();
        r.clone()
    }

    #[test]
    fn fact_only_program_has_no_edges() {
        let p = parse_program("p(x) -> int[64](x).\np(1).\np(2).").unwrap();
        let g = build_dep_graph(&p);
        assert!(g.edges.is_empty());
        assert!(g.nodes.contains("p"));
    }

    #[test]
    fn safety_order_moves_assignment_after_generators() {
        let r = rule("f(x,y,d) <- d = d1 + d2, e(x,z,d1), f(z,y,d2), d <= 10000.");
        let ordered = safety_order(&r).unwrap();
        let expected: Vec<Literal> = ["e(x,z,d1)", "f(z,y,d2)", "d = d1 + d2", "d <= 10000"]
            .iter()
            .map(|s| parse_literal(s).unwrap())
            .collect();
        assert_eq!(ordered.body, expected);
    }

    #[test]
    fn safety_order_rejects_unbound_test() {
        let r = Rule::new(
            alloc::vec![HeadAtom::Rel(Atom::new(
                "h",
                alloc::vec![Term::var("x"), Term::var("y")]
            ))],
            alloc::vec![parse_literal("x > y").unwrap()],
        );
        assert_eq!(
            safety_order(&r).unwrap_err(),
            SafetyError { var: "x".into() }
        );
    }

    #[test]
    fn safety_order_keeps_safe_body() {
        let r = rule("e(t,w) <- s(t,w), e(tp,wp), w - wp <= 100, w + wp >= 19500.");
        assert_eq!(safety_order(&r).unwrap(), r);
    }

    #[test]
    fn unsafe_head_variable() {
        let r = rule("h(x,y) <- p(x).");
        assert_eq!(safety_order(&r).unwrap_err().var, "y");
    }

    #[test]
    fn chains_through_reference_modes() {
        let p = parse_program(
            "p(_) ->.\nq(_) ->.\np(x), val_1(x:v) -> int[64](v).\nq(x), val_2(x:v) -> int[64](v).\n\
             h(x,y) -> p(x), q(y).\n\
             h(x,y) <- p(x), val_1(x:vx), q(y), val_2(y:vy), vx > vy.",
        )
        .unwrap();
        let (schema, diags) = Schema::build(&p);
        assert!(diags.is_empty(), "{diags:?}");
        let (_, r) = p.rules().next().unwrap();
        let chains = find_generator_chains(r, &schema);
        assert_eq!(chains.len(), 2);
        assert_eq!(
            (
                chains[0].value_var.as_str(),
                chains[0].generator.pred.as_str()
            ),
            ("vx", "p")
        );
        assert_eq!(chains[0].chain.len(), 1);
        assert_eq!(chains[0].terminal_pred(), "val_1");
        assert_eq!(chains[0].bound_column, 1);
        assert_eq!(chains[0].generator_var(), Some("x"));
        assert_eq!(
            (
                chains[1].value_var.as_str(),
                chains[1].generator.pred.as_str()
            ),
            ("vy", "q")
        );
    }

    #[test]
    fn direct_column_chain_and_no_compare() {
        let p = parse_program(
            "e(x,y,d) -> string(x), string(y), int[64](d).\nf(x,y,d) -> string(x), string(y), int[64](d).\n\
             f(x,y,d) <- e(x,y,d), d >= 0.\nf(x,y,d) <- e(x,y,d).",
        )
        .unwrap();
        let (schema, _) = Schema::build(&p);
        let rules: Vec<_> = p.rules().collect();
        let chains = find_generator_chains(rules[0].1, &schema);
        assert_eq!(chains.len(), 1);
        assert_eq!(chains[0].value_var, "d");
        assert!(chains[0].chain.is_empty());
        assert_eq!(chains[0].bound_column, 2);
        assert!(find_generator_chains(rules[1].1, &schema).is_empty());
    }

    #[test]
    fn chain_needs_every_key_from_one_generator() {
        let p = parse_program(
            "a(x) -> int[64](x).\nb(y) -> int[64](y).\nc[x,y]=v -> int[64](x), int[64](y), int[64](v).\n\
             h(x) -> int[64](x).\nh(x) <- a(x), b(y), c[x,y]=v, v > 3.",
        )
        .unwrap();
        let (schema, _) = Schema::build(&p);
        let (_, r) = p.rules().next().unwrap();
        assert!(find_generator_chains(r, &schema).is_empty());
    }

    #[test]
    fn dot_output_marks_aggregates() {
        let p = parse_program(
            "e(x) -> int[64](x).\nm[]=n -> int[64](n).\nm[]=n <- agg<<n=max(v)>> e(v).",
        )
        .unwrap();
        let dot = build_dep_graph(&p).to_dot();
        assert!(dot.contains("\"m\" -> \"e\" [style=dashed"), "{dot}");
    }
}
