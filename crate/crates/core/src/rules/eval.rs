use std::collections::{BTreeSet, HashMap, HashSet};

use indexmap::IndexSet;

use super::ast::{ArithOp, Atom, CmpOp, Expr, Fact, Literal, Rule, Term, Value};
use super::stratify::StratifiedProgram;
use super::RuleError;

#[derive(Debug, Clone, PartialEq)]
pub enum Provenance {
    Input,
    Derived {
        rule: usize,
        /// Facts matched by the positive body literals, in body order.
        premises: Vec<Fact>,
        /// Negated literals, instantiated, that were checked absent.
        absent: Vec<String>,
    },
}

#[derive(Debug, Clone, Default)]
struct Relation {
    tuples: IndexSet<Vec<Value>>,
    provenance: Vec<Provenance>,
}

impl Relation {
    fn insert(&mut self, tuple: Vec<Value>, prov: Provenance) -> bool {
        let (_, new) = self.tuples.insert_full(tuple);
        if new {
            self.provenance.push(prov);
        }
        new
    }
}

/// The perfect model of a stratified program over a fact base.
#[derive(Debug, Clone, Default)]
pub struct Model {
    relations: HashMap<String, Relation>,
    rules: Vec<Rule>,
}

impl Model {
    pub fn contains(&self, fact: &Fact) -> bool {
        self.relations.get(&fact.pred).is_some_and(|r| r.tuples.contains(&fact.args))
    }

    /// Tuples of a predicate in derivation order.
    pub fn tuples<'a>(&'a self, pred: &str) -> impl Iterator<Item = &'a [Value]> + 'a {
        self.relations.get(pred).into_iter().flat_map(|r| r.tuples.iter().map(|t| t.as_slice()))
    }

    pub fn query(&self, pred: &str) -> Vec<Fact> {
        self.tuples(pred).map(|t| Fact::new(pred, t.to_vec())).collect()
    }

    pub fn len(&self) -> usize {
        self.relations.values().map(|r| r.tuples.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every fact, input and derived, as an ordered set.
    pub fn to_set(&self) -> BTreeSet<Fact> {
        self.relations
            .iter()
            .flat_map(|(p, r)| r.tuples.iter().map(move |t| Fact::new(p.clone(), t.clone())))
            .collect()
    }

    pub fn provenance(&self, fact: &Fact) -> Option<&Provenance> {
        let r = self.relations.get(&fact.pred)?;
        r.tuples.get_index_of(&fact.args).map(|i| &r.provenance[i])
    }

    pub fn rule(&self, index: usize) -> Option<&Rule> {
        self.rules.get(index)
    }
}

#[derive(Debug, Clone)]
enum Arg {
    Const(Value),
    Var(usize),
    Wild,
}

#[derive(Debug, Clone)]
enum CExpr {
    Const(Value),
    Var(usize),
    Bin(ArithOp, Box<CExpr>, Box<CExpr>),
}

#[derive(Debug, Clone)]
enum CLit {
    Pos { pred: String, args: Vec<Arg> },
    Neg { pred: String, args: Vec<Arg>, atom: Atom },
    Cmp { op: CmpOp, lhs: CExpr, rhs: CExpr, text: String },
    Is { var: usize, expr: CExpr, text: String },
}

#[derive(Debug, Clone)]
struct CRule {
    index: usize,
    head_pred: String,
    head: Vec<Arg>,
    body: Vec<CLit>,
    vars: Vec<String>,
}

fn compile(index: usize, rule: &Rule) -> CRule {
    let mut vars: Vec<String> = Vec::new();
    let mut var = |name: &str| -> usize {
        if let Some(i) = vars.iter().position(|v| v == name) {
            i
        } else {
            vars.push(name.to_string());
            vars.len() - 1
        }
    };
    fn arg(t: &Term, var: &mut dyn FnMut(&str) -> usize) -> Arg {
        match t {
            Term::Const(v) => Arg::Const(v.clone()),
            Term::Var(n) => Arg::Var(var(n)),
            Term::Wildcard => Arg::Wild,
        }
    }
    fn expr(e: &Expr, var: &mut dyn FnMut(&str) -> usize) -> CExpr {
        match e {
            Expr::Term(Term::Const(v)) => CExpr::Const(v.clone()),
            Expr::Term(Term::Var(n)) => CExpr::Var(var(n)),
            Expr::Term(Term::Wildcard) => unreachable!("parser rejects wildcards in expressions"),
            Expr::Bin(op, a, b) => CExpr::Bin(*op, Box::new(expr(a, var)), Box::new(expr(b, var))),
        }
    }
    let body: Vec<CLit> = rule
        .body
        .iter()
        .map(|l| match l {
            Literal::Pos(a) => CLit::Pos { pred: a.pred.clone(), args: a.args.iter().map(|t| arg(t, &mut var)).collect() },
            Literal::Neg(a) => CLit::Neg {
                pred: a.pred.clone(),
                args: a.args.iter().map(|t| arg(t, &mut var)).collect(),
                atom: a.clone(),
            },
            Literal::Cmp(op, a, b) => {
                CLit::Cmp { op: *op, lhs: expr(a, &mut var), rhs: expr(b, &mut var), text: l.to_string() }
            }
            Literal::Is(v, e) => {
                let ex = expr(e, &mut var);
                CLit::Is { var: var(v), expr: ex, text: l.to_string() }
            }
        })
        .collect();
    let head = rule.head.args.iter().map(|t| arg(t, &mut var)).collect();
    CRule { index, head_pred: rule.head.pred.clone(), head, body, vars }
}

fn eval_expr(e: &CExpr, b: &[Option<Value>], text: &str) -> Result<Value, RuleError> {
    let err = |m: String| RuleError::Eval { literal: text.to_string(), message: m };
    match e {
        CExpr::Const(v) => Ok(v.clone()),
        CExpr::Var(i) => Ok(b[*i].clone().expect("range restriction guarantees binding")),
        CExpr::Bin(op, l, r) => {
            let (x, y) = (eval_expr(l, b, text)?, eval_expr(r, b, text)?);
            if let (Value::Int(p), Value::Int(q)) = (&x, &y) {
                let v = match op {
                    ArithOp::Add => p.checked_add(*q),
                    ArithOp::Sub => p.checked_sub(*q),
                    ArithOp::Mul => p.checked_mul(*q),
                    ArithOp::Div => {
                        if *q == 0 {
                            return Err(err("division by zero".into()));
                        }
                        return Ok(Value::real(*p as f64 / *q as f64));
                    }
                };
                return v.map(Value::Int).ok_or_else(|| err("integer overflow".into()));
            }
            let (Some(p), Some(q)) = (x.as_f64(), y.as_f64()) else {
                return Err(err(format!("arithmetic on non-numeric term ({x}, {y})")));
            };
            let v = match op {
                ArithOp::Add => p + q,
                ArithOp::Sub => p - q,
                ArithOp::Mul => p * q,
                ArithOp::Div => {
                    if q == 0.0 {
                        return Err(err("division by zero".into()));
                    }
                    p / q
                }
            };
            Ok(Value::real(v))
        }
    }
}

fn compare(op: CmpOp, x: &Value, y: &Value, text: &str) -> Result<bool, RuleError> {
    use std::cmp::Ordering;
    let ord = match (x, y) {
        (Value::Int(p), Value::Int(q)) => Some(p.cmp(q)),
        _ => match (x.as_f64(), y.as_f64()) {
            (Some(p), Some(q)) => p.partial_cmp(&q),
            _ => None,
        },
    };
    Ok(match (op, ord) {
        (CmpOp::Eq, Some(o)) => o == Ordering::Equal,
        (CmpOp::Ne, Some(o)) => o != Ordering::Equal,
        (CmpOp::Eq, None) => x == y,
        (CmpOp::Ne, None) => x != y,
        (_, None) => {
            return Err(RuleError::Eval { literal: text.to_string(), message: format!("cannot order {x} and {y}") })
        }
        (CmpOp::Lt, Some(o)) => o == Ordering::Less,
        (CmpOp::Gt, Some(o)) => o == Ordering::Greater,
        (CmpOp::Le, Some(o)) => o != Ordering::Greater,
        (CmpOp::Ge, Some(o)) => o != Ordering::Less,
    })
}

fn matches(args: &[Arg], tuple: &[Value], binding: &mut [Option<Value>], newly: &mut Vec<usize>) -> bool {
    if args.len() != tuple.len() {
        return false;
    }
    for (a, v) in args.iter().zip(tuple) {
        match a {
            Arg::Wild => {}
            Arg::Const(c) => {
                if c != v {
                    return false;
                }
            }
            Arg::Var(i) => match &binding[*i] {
                Some(b) => {
                    if b != v {
                        return false;
                    }
                }
                None => {
                    binding[*i] = Some(v.clone());
                    newly.push(*i);
                }
            },
        }
    }
    true
}

/// Which tuples each positive literal may range over in one pass.
#[derive(Clone, Copy)]
enum Scope {
    Full(usize),
    Range(usize, usize),
}

struct Pass<'a> {
    relations: &'a HashMap<String, Relation>,
    rule: &'a CRule,
    scopes: Vec<Scope>,
    premises: Vec<(&'a str, usize)>,
    absent: Vec<String>,
}

impl<'a> Pass<'a> {
    fn solve(
        &mut self,
        k: usize,
        binding: &mut Vec<Option<Value>>,
        out: &mut dyn FnMut(Vec<Value>, Provenance),
    ) -> Result<(), RuleError> {
        let Some(lit) = self.rule.body.get(k) else {
            let head = self
                .rule
                .head
                .iter()
                .map(|a| match a {
                    Arg::Const(v) => v.clone(),
                    Arg::Var(i) => binding[*i].clone().expect("head variables are bound"),
                    Arg::Wild => unreachable!("parser rejects wildcards in heads"),
                })
                .collect();
            let premises = self
                .premises
                .iter()
                .map(|(p, i)| Fact::new(*p, self.relations[*p].tuples[*i].clone()))
                .collect();
            out(head, Provenance::Derived { rule: self.rule.index, premises, absent: self.absent.clone() });
            return Ok(());
        };
        match lit {
            CLit::Pos { pred, args } => {
                let Some(rel) = self.relations.get(pred.as_str()) else {
                    return Ok(());
                };
                let (lo, hi) = match self.scopes[k] {
                    Scope::Full(n) => (0, n),
                    Scope::Range(a, b) => (a, b),
                };
                let mut newly = Vec::new();
                for i in lo..hi.min(rel.tuples.len()) {
                    newly.clear();
                    if matches(args, &rel.tuples[i], binding, &mut newly) {
                        self.premises.push((pred.as_str(), i));
                        self.solve(k + 1, binding, out)?;
                        self.premises.pop();
                    }
                    for v in &newly {
                        binding[*v] = None;
                    }
                }
                Ok(())
            }
            CLit::Neg { pred, args, atom } => {
                let exists = self.relations.get(pred.as_str()).is_some_and(|rel| {
                    if args.iter().all(|a| !matches!(a, Arg::Wild)) {
                        let probe: Vec<Value> = args
                            .iter()
                            .map(|a| match a {
                                Arg::Const(v) => v.clone(),
                                Arg::Var(i) => binding[*i].clone().expect("bound by range restriction"),
                                Arg::Wild => unreachable!(),
                            })
                            .collect();
                        rel.tuples.contains(&probe)
                    } else {
                        let mut scratch = binding.clone();
                        let mut newly = Vec::new();
                        rel.tuples.iter().any(|t| {
                            newly.clear();
                            let hit = matches(args, t, &mut scratch, &mut newly);
                            for v in &newly {
                                scratch[*v] = None;
                            }
                            hit
                        })
                    }
                });
                if exists {
                    return Ok(());
                }
                self.absent.push(instantiate(atom, &self.rule.vars, binding));
                let r = self.solve(k + 1, binding, out);
                self.absent.pop();
                r
            }
            CLit::Cmp { op, lhs, rhs, text } => {
                let x = eval_expr(lhs, binding, text)?;
                let y = eval_expr(rhs, binding, text)?;
                if compare(*op, &x, &y, text)? {
                    self.solve(k + 1, binding, out)?;
                }
                Ok(())
            }
            CLit::Is { var, expr, text } => {
                let v = eval_expr(expr, binding, text)?;
                match binding[*var].clone() {
                    Some(b) => {
                        if compare(CmpOp::Eq, &b, &v, text)? {
                            self.solve(k + 1, binding, out)?;
                        }
                    }
                    None => {
                        binding[*var] = Some(v);
                        let r = self.solve(k + 1, binding, out);
                        binding[*var] = None;
                        r?;
                    }
                }
                Ok(())
            }
        }
    }
}

fn instantiate(atom: &Atom, vars: &[String], binding: &[Option<Value>]) -> String {
    let args: Vec<Term> = atom
        .args
        .iter()
        .map(|t| match t {
            Term::Var(n) => {
                let i = vars.iter().position(|v| v == n).expect("compiled variable");
                binding[i].clone().map_or(Term::Wildcard, Term::Const)
            }
            other => other.clone(),
        })
        .collect();
    Atom { pred: atom.pred.clone(), args }.to_string()
}

/// Semi-naive bottom-up evaluation, stratum by stratum. Program facts come
/// first, then `facts` in order; rules run in textual order and the first
/// derivation of each fact is the one recorded.
pub fn evaluate(program: &StratifiedProgram, facts: &[Fact]) -> Result<Model, RuleError> {
    let mut relations: HashMap<String, Relation> = HashMap::new();
    for f in program.program.facts.iter().chain(facts) {
        relations.entry(f.pred.clone()).or_default().insert(f.args.clone(), Provenance::Input);
    }
    let compiled: Vec<CRule> = program.program.rules.iter().enumerate().map(|(i, r)| compile(i, r)).collect();

    for (level, rule_ids) in program.strata.iter().enumerate() {
        let rules: Vec<&CRule> = rule_ids.iter().map(|&i| &compiled[i]).collect();
        let recursive = |pred: &str| program.stratum(pred) == level && rules.iter().any(|r| r.head_pred == pred);
        let mut delta: HashMap<String, (usize, usize)> = HashMap::new();
        let mut first = true;
        loop {
            let sizes: HashMap<String, usize> = relations.iter().map(|(p, r)| (p.clone(), r.tuples.len())).collect();
            let size = |p: &str| sizes.get(p).copied().unwrap_or(0);
            let mut pending: Vec<(String, Vec<Value>, Provenance)> = Vec::new();
            let mut seen: HashSet<(String, Vec<Value>)> = HashSet::new();
            for rule in &rules {
                let positives: Vec<usize> = rule
                    .body
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| matches!(l, CLit::Pos { .. }))
                    .map(|(i, _)| i)
                    .collect();
                let mut passes: Vec<Vec<Scope>> = Vec::new();
                let full: Vec<Scope> = rule
                    .body
                    .iter()
                    .map(|l| match l {
                        CLit::Pos { pred, .. } => Scope::Full(size(pred)),
                        _ => Scope::Full(0),
                    })
                    .collect();
                if first {
                    passes.push(full.clone());
                } else {
                    for &i in &positives {
                        let CLit::Pos { pred, .. } = &rule.body[i] else { unreachable!() };
                        if !recursive(pred) {
                            continue;
                        }
                        if let Some(&(a, b)) = delta.get(pred.as_str()) {
                            if a < b {
                                let mut s = full.clone();
                                s[i] = Scope::Range(a, b);
                                passes.push(s);
                            }
                        }
                    }
                }
                for scopes in passes {
                    let mut pass = Pass { relations: &relations, rule, scopes, premises: Vec::new(), absent: Vec::new() };
                    let mut binding = vec![None; rule.vars.len()];
                    let head_pred = &rule.head_pred;
                    pass.solve(0, &mut binding, &mut |tuple, prov| {
                        let known = relations.get(head_pred.as_str()).is_some_and(|r| r.tuples.contains(&tuple));
                        if !known && seen.insert((head_pred.clone(), tuple.clone())) {
                            pending.push((head_pred.clone(), tuple, prov));
                        }
                    })?;
                }
            }
            first = false;
            if pending.is_empty() {
                break;
            }
            delta.clear();
            for (pred, tuple, prov) in pending {
                let rel = relations.entry(pred.clone()).or_default();
                let before = rel.tuples.len();
                if rel.insert(tuple, prov) {
                    delta.entry(pred).or_insert((before, before)).1 = before + 1;
                }
            }
        }
    }
    Ok(Model { relations, rules: program.program.rules.clone() })
}
