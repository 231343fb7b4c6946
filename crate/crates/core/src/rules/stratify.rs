use std::collections::BTreeMap;

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};

use super::ast::{Literal, RuleProgram};
use super::RuleError;

/// A program whose predicates are layered so that every negated dependency
/// points to a strictly lower stratum.
#[derive(Debug, Clone)]
pub struct StratifiedProgram {
    pub program: RuleProgram,
    pub stratum_of: BTreeMap<String, usize>,
    /// Rule indices per stratum, in textual order.
    pub strata: Vec<Vec<usize>>,
}

impl StratifiedProgram {
    pub fn stratum(&self, pred: &str) -> usize {
        self.stratum_of.get(pred).copied().unwrap_or(0)
    }
}

pub fn stratify(program: &RuleProgram) -> Result<StratifiedProgram, RuleError> {
    let mut graph: DiGraph<String, bool> = DiGraph::new();
    let mut nodes: BTreeMap<String, NodeIndex> = BTreeMap::new();
    let mut node = |g: &mut DiGraph<String, bool>, p: &str| -> NodeIndex {
        *nodes.entry(p.to_string()).or_insert_with(|| g.add_node(p.to_string()))
    };
    for f in &program.facts {
        node(&mut graph, &f.pred);
    }
    for r in &program.rules {
        let h = node(&mut graph, &r.head.pred);
        for l in &r.body {
            let (pred, negative) = match l {
                Literal::Pos(a) => (&a.pred, false),
                Literal::Neg(a) => (&a.pred, true),
                _ => continue,
            };
            let b = node(&mut graph, pred);
            graph.add_edge(b, h, negative);
        }
    }

    // Components come out sinks first; reverse for a topological order.
    let mut sccs = tarjan_scc(&graph);
    sccs.reverse();
    let mut comp = vec![0usize; graph.node_count()];
    for (ci, members) in sccs.iter().enumerate() {
        for n in members {
            comp[n.index()] = ci;
        }
    }
    for e in graph.edge_indices() {
        let (a, b) = graph.edge_endpoints(e).expect("edge exists");
        if graph[e] && comp[a.index()] == comp[b.index()] {
            let mut cycle: Vec<String> = sccs[comp[a.index()]].iter().map(|n| graph[*n].clone()).collect();
            cycle.sort();
            return Err(RuleError::Unstratifiable { cycle });
        }
    }

    let mut level = vec![0usize; sccs.len()];
    for (ci, members) in sccs.iter().enumerate() {
        for n in members {
            for e in graph.edges_directed(*n, petgraph::Direction::Incoming) {
                use petgraph::visit::EdgeRef;
                let src = comp[e.source().index()];
                if src != ci {
                    level[ci] = level[ci].max(level[src] + usize::from(*e.weight()));
                }
            }
        }
    }
    let stratum_of: BTreeMap<String, usize> =
        nodes.iter().map(|(p, n)| (p.clone(), level[comp[n.index()]])).collect();
    let count = stratum_of.values().copied().max().map_or(0, |m| m + 1);
    let mut strata = vec![Vec::new(); count.max(1)];
    for (i, r) in program.rules.iter().enumerate() {
        strata[stratum_of[&r.head.pred]].push(i);
    }
    Ok(StratifiedProgram { program: program.clone(), stratum_of, strata })
}
