use std::collections::{BTreeSet, HashMap};

use csav_core::rules::{CmpOp, Expr, Fact, Literal, RuleProgram, Term, Value};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

type Subst = HashMap<String, Value>;

fn unify(args: &[Term], tuple: &[Value], s: &Subst) -> Option<Subst> {
    if args.len() != tuple.len() {
        return None;
    }
    let mut s = s.clone();
    for (a, v) in args.iter().zip(tuple) {
        match a {
            Term::Wildcard => {}
            Term::Const(c) => {
                if c != v {
                    return None;
                }
            }
            Term::Var(n) => match s.get(n) {
                Some(b) if b != v => return None,
                Some(_) => {}
                None => {
                    s.insert(n.clone(), v.clone());
                }
            },
        }
    }
    Some(s)
}

fn eval_int(e: &Expr, s: &Subst) -> i64 {
    match e {
        Expr::Term(Term::Const(Value::Int(i))) => *i,
        Expr::Term(Term::Var(v)) => match s[v] {
            Value::Int(i) => i,
            _ => panic!("oracle programs are integer-only"),
        },
        Expr::Bin(op, a, b) => {
            let (x, y) = (eval_int(a, s), eval_int(b, s));
            match op {
                csav_core::rules::ArithOp::Add => x + y,
                csav_core::rules::ArithOp::Sub => x - y,
                csav_core::rules::ArithOp::Mul => x * y,
                csav_core::rules::ArithOp::Div => unreachable!(),
            }
        }
        _ => unreachable!(),
    }
}

/// Naive fixpoint: recompute every rule of a level against the whole database
/// until nothing changes, level by level.
pub fn naive_model(program: &RuleProgram, extra: &[Fact], levels: &HashMap<String, usize>) -> BTreeSet<Fact> {
    let mut db: BTreeSet<Fact> = program.facts.iter().chain(extra).cloned().collect();
    let max = levels.values().copied().max().unwrap_or(0);
    for level in 0..=max {
        loop {
            let mut added = false;
            for r in program.rules.iter().filter(|r| levels[&r.head.pred] == level) {
                let mut substs = vec![Subst::new()];
                for lit in &r.body {
                    let mut next = Vec::new();
                    for s in &substs {
                        match lit {
                            Literal::Pos(a) => {
                                for f in db.iter().filter(|f| f.pred == a.pred) {
                                    if let Some(s2) = unify(&a.args, &f.args, s) {
                                        next.push(s2);
                                    }
                                }
                            }
                            Literal::Neg(a) => {
                                if !db.iter().any(|f| f.pred == a.pred && unify(&a.args, &f.args, s).is_some()) {
                                    next.push(s.clone());
                                }
                            }
                            Literal::Cmp(op, l, rr) => {
                                let (x, y) = (eval_int(l, s), eval_int(rr, s));
                                let ok = match op {
                                    CmpOp::Lt => x < y,
                                    CmpOp::Gt => x > y,
                                    CmpOp::Le => x <= y,
                                    CmpOp::Ge => x >= y,
                                    CmpOp::Eq => x == y,
                                    CmpOp::Ne => x != y,
                                };
                                if ok {
                                    next.push(s.clone());
                                }
                            }
                            Literal::Is(v, e) => {
                                let mut s2 = s.clone();
                                s2.insert(v.clone(), Value::Int(eval_int(e, s)));
                                next.push(s2);
                            }
                        }
                    }
                    substs = next;
                }
                for s in substs {
                    let args = r
                        .head
                        .args
                        .iter()
                        .map(|t| match t {
                            Term::Const(c) => c.clone(),
                            Term::Var(v) => s[v].clone(),
                            Term::Wildcard => unreachable!(),
                        })
                        .collect();
                    added |= db.insert(Fact::new(r.head.pred.clone(), args));
                }
            }
            if !added {
                break;
            }
        }
    }
    db
}

pub struct Generated {
    pub text: String,
    pub levels: HashMap<String, usize>,
    pub arity: HashMap<String, usize>,
}

/// Random stratified program over at most 6 predicates and 20 facts. Levels
/// are fixed up front: positive dependencies go to the same or a lower level,
/// negative ones strictly lower. `edb_only_negation` restricts negation to
/// fact-only predicates.
pub fn random_program(rng: &mut ChaCha8Rng, edb_only_negation: bool) -> Generated {
    let npred = rng.random_range(2..=6);
    let nedb = rng.random_range(1..npred.min(3) + 1).min(npred - 1).max(1);
    let mut levels = HashMap::new();
    let mut arity = HashMap::new();
    let names: Vec<String> = (0..npred).map(|i| format!("p{i}")).collect();
    for (i, n) in names.iter().enumerate() {
        levels.insert(n.clone(), if i < nedb { 0 } else { rng.random_range(1..=3) });
        arity.insert(n.clone(), rng.random_range(1..=2));
    }
    let mut text = String::new();
    let nfacts = rng.random_range(0..=20);
    for _ in 0..nfacts {
        let p = &names[rng.random_range(0..nedb)];
        let args: Vec<String> = (0..arity[p]).map(|_| rng.random_range(0..4).to_string()).collect();
        text += &format!("{p}({}).\n", args.join(", "));
    }
    let vars = ["X", "Y", "Z"];
    for head in &names[nedb..] {
        let lh = levels[head];
        for _ in 0..rng.random_range(1..=3) {
            let pos_cands: Vec<&String> = names.iter().filter(|n| levels[*n] <= lh).collect();
            let neg_cands: Vec<&String> =
                names.iter().filter(|n| levels[*n] < lh && (!edb_only_negation || levels[*n] == 0)).collect();
            let mut body = Vec::new();
            let mut bound: Vec<&str> = Vec::new();
            for _ in 0..rng.random_range(1..=3) {
                let p = pos_cands[rng.random_range(0..pos_cands.len())];
                let args: Vec<String> = (0..arity[p])
                    .map(|_| {
                        if rng.random_bool(0.8) {
                            let v = vars[rng.random_range(0..3)];
                            if !bound.contains(&v) {
                                bound.push(v);
                            }
                            v.to_string()
                        } else {
                            rng.random_range(0..4).to_string()
                        }
                    })
                    .collect();
                body.push(format!("{p}({})", args.join(", ")));
            }
            let pick = |rng: &mut ChaCha8Rng, bound: &[&str]| -> String {
                if !bound.is_empty() && rng.random_bool(0.7) {
                    bound[rng.random_range(0..bound.len())].to_string()
                } else {
                    rng.random_range(0..4).to_string()
                }
            };
            if !bound.is_empty() && rng.random_bool(0.3) {
                let v = pick(rng, &bound);
                body.push(format!("W is {v} + 1"));
                body.push("W =< 4".to_string());
                bound.push("W");
            }
            if !neg_cands.is_empty() && rng.random_bool(0.6) {
                let p = neg_cands[rng.random_range(0..neg_cands.len())];
                let args: Vec<String> =
                    (0..arity[p]).map(|_| if rng.random_bool(0.2) { "_".into() } else { pick(rng, &bound) }).collect();
                body.push(format!("\\+ {p}({})", args.join(", ")));
            }
            if !bound.is_empty() && rng.random_bool(0.3) {
                let ops = [">", "<", ">=", "=<", "=", "\\="];
                body.push(format!("{} {} {}", pick(rng, &bound), ops[rng.random_range(0..6)], rng.random_range(0..4)));
            }
            let hargs: Vec<String> = (0..arity[head]).map(|_| pick(rng, &bound)).collect();
            text += &format!("{head}({}) :- {}.\n", hargs.join(", "), body.join(", "));
        }
    }
    Generated { text, levels, arity }
}

