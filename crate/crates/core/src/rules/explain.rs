use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::ast::Fact;
use super::eval::{Model, Provenance};
use super::RuleError;

/// Why a fact holds: the rule that first derived it, the derivations of the
/// facts its positive body literals matched, and the negated literals found
/// absent. Input facts are leaves.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivationTree {
    pub fact: Fact,
    /// Index of the rule in its program; `None` for an input fact.
    pub rule: Option<usize>,
    pub rule_line: Option<usize>,
    pub rule_text: Option<String>,
    pub children: Vec<DerivationTree>,
    pub absent: Vec<String>,
}

impl DerivationTree {
    pub fn is_leaf(&self) -> bool {
        self.rule.is_none()
    }

    /// Distinct input facts the tree rests on, in first-visit order.
    pub fn leaf_facts(&self) -> Vec<Fact> {
        let mut out = Vec::new();
        self.collect_leaves(&mut out);
        out
    }

    fn collect_leaves(&self, out: &mut Vec<Fact>) {
        if self.is_leaf() {
            if !out.contains(&self.fact) {
                out.push(self.fact.clone());
            }
        } else {
            for c in &self.children {
                c.collect_leaves(out);
            }
        }
    }

    /// Indented text rendering.
    pub fn render(&self) -> String {
        let mut s = String::new();
        self.render_into(&mut s, 0);
        s
    }

    fn render_into(&self, s: &mut String, depth: usize) {
        let pad = "  ".repeat(depth);
        match (&self.rule_text, self.rule_line) {
            (Some(text), Some(line)) => {
                let _ = writeln!(s, "{pad}{}  <- line {line}: {text}", self.fact);
            }
            _ => {
                let _ = writeln!(s, "{pad}{}  [fact]", self.fact);
            }
        }
        for c in &self.children {
            c.render_into(s, depth + 1);
        }
        for a in &self.absent {
            let _ = writeln!(s, "{pad}  not {a}  [absent]");
        }
    }
}

pub fn explain(model: &Model, fact: &Fact) -> Result<DerivationTree, RuleError> {
    match model.provenance(fact) {
        None => Err(RuleError::NotInModel(fact.to_string())),
        Some(Provenance::Input) => Ok(DerivationTree {
            fact: fact.clone(),
            rule: None,
            rule_line: None,
            rule_text: None,
            children: Vec::new(),
            absent: Vec::new(),
        }),
        Some(Provenance::Derived { rule, premises, absent }) => {
            let children = premises.iter().map(|p| explain(model, p)).collect::<Result<Vec<_>, _>>()?;
            let r = model.rule(*rule);
            Ok(DerivationTree {
                fact: fact.clone(),
                rule: Some(*rule),
                rule_line: r.map(|r| r.line),
                rule_text: r.map(|r| r.to_string()),
                children,
                absent: absent.clone(),
            })
        }
    }
}
