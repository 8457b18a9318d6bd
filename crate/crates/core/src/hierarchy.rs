//! Hierarchies of fuzzy units evaluated as a DAG.
//!
//! Three topologies are supported. A Raju chain feeds each level's output
//! into the next level as an extra antecedent variable. A Joo hierarchy
//! gives every level all external inputs plus the outputs of all preceding
//! levels. A Jellali hierarchy combines signals two at a time, holding odd
//! signals back for the last levels.
//!
//! Intermediate outputs always enter the conditional part of the next rule
//! base, so all topologies share the same node type.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::anfis::{train_hybrid, Predictor, TrainingConfig, TrainingReport, TrainingSet};
use crate::error::{Error, Result};
use crate::fuzzy::{flat_rule_count, FuzzyLogicUnit, Interval, LinguisticVariable, MfKind};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SignalSource {
    #[serde(rename = "ext")]
    External(usize),
    #[serde(rename = "node")]
    Node(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TopologyKind {
    RajuChain,
    Joo,
    JellaliPairwise,
    Custom,
}

impl std::str::FromStr for TopologyKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "raju" | "raju-chain" => Ok(TopologyKind::RajuChain),
            "joo" => Ok(TopologyKind::Joo),
            "jellali" | "jellali-pairwise" => Ok(TopologyKind::JellaliPairwise),
            "custom" => Ok(TopologyKind::Custom),
            other => Err(Error::InvalidHierarchy(format!(
                "unknown topology `{other}`"
            ))),
        }
    }
}

/// Wiring of one node before any unit is attached.
#[derive(Clone, Debug, PartialEq)]
pub struct PlannedNode {
    pub level: usize,
    pub sources: Vec<SignalSource>,
}

/// Wiring of a whole hierarchy. Node ids are positions in `nodes`; the last
/// node is the terminal.
#[derive(Clone, Debug, PartialEq)]
pub struct HierarchyPlan {
    pub kind: TopologyKind,
    pub external_arity: usize,
    pub nodes: Vec<PlannedNode>,
}

impl HierarchyPlan {
    /// Level 1 reads `groups[0]` externals; level `i > 1` reads the next
    /// `groups[i-1]` externals followed by the previous level's output.
    pub fn raju_chain(groups: &[usize], n: usize) -> Result<Self> {
        if groups.is_empty() || groups.contains(&0) {
            return Err(Error::Partition(format!(
                "level sizes must be positive and non-empty, got {groups:?}"
            )));
        }
        let total: usize = groups.iter().sum();
        if total != n {
            return Err(Error::Partition(format!(
                "level sizes {groups:?} sum to {total}, but there are {n} inputs"
            )));
        }
        let mut next = 0;
        let nodes = groups
            .iter()
            .enumerate()
            .map(|(i, &g)| {
                let mut sources: Vec<SignalSource> =
                    (next..next + g).map(SignalSource::External).collect();
                next += g;
                if i > 0 {
                    sources.push(SignalSource::Node(i - 1));
                }
                PlannedNode {
                    level: i + 1,
                    sources,
                }
            })
            .collect();
        Ok(Self {
            kind: TopologyKind::RajuChain,
            external_arity: n,
            nodes,
        })
    }

    /// Groups of two externals, the last group taking one when `n` is odd.
    pub fn raju_even(n: usize) -> Result<Self> {
        let mut groups = vec![2; n / 2];
        if n % 2 == 1 {
            groups.push(1);
        }
        Self::raju_chain(&groups, n)
    }

    /// `levels` nodes; node `i` (1-based) reads all `n` externals and the
    /// outputs of nodes `1..i`, for an arity of `n + i - 1`.
    pub fn joo(n: usize, levels: usize) -> Result<Self> {
        if n == 0 || levels == 0 {
            return Err(Error::InvalidHierarchy(format!(
                "joo needs n >= 1 and at least one level, got n={n}, levels={levels}"
            )));
        }
        let nodes = (0..levels)
            .map(|i| PlannedNode {
                level: i + 1,
                sources: (0..n)
                    .map(SignalSource::External)
                    .chain((0..i).map(SignalSource::Node))
                    .collect(),
            })
            .collect();
        Ok(Self {
            kind: TopologyKind::Joo,
            external_arity: n,
            nodes,
        })
    }

    /// Pairs signals left to right, level by level. A signal left without a
    /// partner is held back; once a single signal remains, held signals are
    /// merged into it one per level, the earliest-held last.
    pub fn jellali(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Arity {
                expected: 2,
                got: n,
            });
        }
        let mut nodes = Vec::new();
        let mut current: Vec<SignalSource> = (0..n).map(SignalSource::External).collect();
        let mut held = Vec::new();
        let mut level = 0;
        while current.len() > 1 {
            level += 1;
            let mut next = Vec::with_capacity(current.len() / 2);
            for pair in current.chunks(2) {
                if let [a, b] = pair {
                    nodes.push(PlannedNode {
                        level,
                        sources: vec![*a, *b],
                    });
                    next.push(SignalSource::Node(nodes.len() - 1));
                } else {
                    held.push(pair[0]);
                }
            }
            current = next;
        }
        let mut acc = current[0];
        while let Some(h) = held.pop() {
            level += 1;
            nodes.push(PlannedNode {
                level,
                sources: vec![acc, h],
            });
            acc = SignalSource::Node(nodes.len() - 1);
        }
        Ok(Self {
            kind: TopologyKind::JellaliPairwise,
            external_arity: n,
            nodes,
        })
    }

    pub fn arities(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.sources.len()).collect()
    }

    /// Total grid rule count when every input carries `m` terms.
    pub fn uniform_rule_count(&self, m: usize) -> Result<u64> {
        self.nodes.iter().try_fold(0u64, |acc, node| {
            acc.checked_add(flat_rule_count(node.sources.len(), m)?)
                .ok_or(Error::CountOverflow)
        })
    }
}

/// Grid shape used for intermediate signals when a hierarchy is built.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntermediateTemplate {
    pub terms: usize,
    pub kind: MfKind,
    /// Initial universe of every intermediate output; training replaces it
    /// with the observed output range.
    pub universe: Interval,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HierarchyNode {
    pub id: usize,
    pub level: usize,
    pub sources: Vec<SignalSource>,
    pub flu: FuzzyLogicUnit,
}

/// A validated DAG of units. Immutable; evaluation is read-only.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct HierarchySpec {
    external_arity: usize,
    topology_kind: TopologyKind,
    nodes: Vec<HierarchyNode>,
    terminal: usize,
    #[serde(skip)]
    index: BTreeMap<usize, usize>,
}

#[derive(Deserialize)]
struct RawSpec {
    external_arity: usize,
    topology_kind: TopologyKind,
    nodes: Vec<HierarchyNode>,
    terminal: usize,
}

impl TryFrom<RawSpec> for HierarchySpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<Self> {
        HierarchySpec::new(
            raw.external_arity,
            raw.topology_kind,
            raw.nodes,
            raw.terminal,
        )
    }
}

impl HierarchySpec {
    pub fn new(
        external_arity: usize,
        topology_kind: TopologyKind,
        nodes: Vec<HierarchyNode>,
        terminal: usize,
    ) -> Result<Self> {
        let bad = |msg: String| Err(Error::InvalidHierarchy(msg));
        if external_arity == 0 {
            return bad("a hierarchy needs at least one external input".into());
        }
        if nodes.is_empty() {
            return bad("a hierarchy needs at least one node".into());
        }
        let mut index = BTreeMap::new();
        let mut consumed = vec![0usize; external_arity];
        for (pos, node) in nodes.iter().enumerate() {
            if node.level == 0 {
                return bad(format!("node {} has level 0", node.id));
            }
            if node.sources.len() != node.flu.arity() {
                return bad(format!(
                    "node {} has {} sources for a unit of arity {}",
                    node.id,
                    node.sources.len(),
                    node.flu.arity()
                ));
            }
            for src in &node.sources {
                match *src {
                    SignalSource::External(i) if i >= external_arity => {
                        return bad(format!(
                            "node {} reads external input {i} of {external_arity}",
                            node.id
                        ));
                    }
                    SignalSource::External(i) => consumed[i] += 1,
                    SignalSource::Node(id) if !index.contains_key(&id) => {
                        return bad(format!(
                            "node {} reads node {id}, which does not precede it",
                            node.id
                        ));
                    }
                    SignalSource::Node(_) => {}
                }
            }
            if index.insert(node.id, pos).is_some() {
                return bad(format!("duplicate node id {}", node.id));
            }
        }
        if !index.contains_key(&terminal) {
            return bad(format!("terminal node {terminal} does not exist"));
        }
        match topology_kind {
            TopologyKind::RajuChain | TopologyKind::JellaliPairwise => {
                if let Some(i) = consumed.iter().position(|&c| c != 1) {
                    return bad(format!(
                        "external input {i} is read {} times; this topology reads each exactly once",
                        consumed[i]
                    ));
                }
            }
            TopologyKind::Joo | TopologyKind::Custom => {}
        }
        if topology_kind == TopologyKind::RajuChain {
            for w in nodes.windows(2) {
                let links: Vec<_> = w[1]
                    .sources
                    .iter()
                    .filter(|s| matches!(s, SignalSource::Node(_)))
                    .collect();
                if links != [&SignalSource::Node(w[0].id)] {
                    return bad(format!(
                        "raju node {} must read exactly the output of node {}",
                        w[1].id, w[0].id
                    ));
                }
            }
        }
        Ok(Self {
            external_arity,
            topology_kind,
            nodes,
            terminal,
            index,
        })
    }

    /// Attaches grid units (zero consequents) to a plan. External inputs use
    /// `variables`; intermediate signals use `template`.
    pub fn from_plan(
        plan: &HierarchyPlan,
        variables: &[LinguisticVariable],
        template: &IntermediateTemplate,
    ) -> Result<Self> {
        if variables.len() != plan.external_arity {
            return Err(Error::Arity {
                expected: plan.external_arity,
                got: variables.len(),
            });
        }
        let nodes = plan
            .nodes
            .iter()
            .enumerate()
            .map(|(id, p)| {
                let inputs = p
                    .sources
                    .iter()
                    .map(|s| match *s {
                        SignalSource::External(i) => Ok(variables[i].clone()),
                        SignalSource::Node(j) => LinguisticVariable::grid(
                            format!("y{j}"),
                            template.universe,
                            template.terms,
                            template.kind,
                        ),
                    })
                    .collect::<Result<Vec<_>>>()?;
                // refuse to materialise grids that cannot be counted
                inputs
                    .iter()
                    .try_fold(1u64, |acc, v| acc.checked_mul(v.term_count() as u64))
                    .ok_or(Error::CountOverflow)?;
                Ok(HierarchyNode {
                    id,
                    level: p.level,
                    sources: p.sources.clone(),
                    flu: FuzzyLogicUnit::grid(inputs)?,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(plan.external_arity, plan.kind, nodes, plan.nodes.len() - 1)
    }

    pub fn external_arity(&self) -> usize {
        self.external_arity
    }

    pub fn topology_kind(&self) -> TopologyKind {
        self.topology_kind
    }

    pub fn nodes(&self) -> &[HierarchyNode] {
        &self.nodes
    }

    pub fn terminal(&self) -> usize {
        self.terminal
    }

    pub fn node(&self, id: usize) -> Option<&HierarchyNode> {
        self.index.get(&id).map(|&p| &self.nodes[p])
    }

    /// Swaps in a new unit for node `id`; the arity must not change.
    pub fn replace_unit(&mut self, id: usize, flu: FuzzyLogicUnit) -> Result<()> {
        let pos = *self
            .index
            .get(&id)
            .ok_or_else(|| Error::InvalidHierarchy(format!("no node {id}")))?;
        if flu.arity() != self.nodes[pos].sources.len() {
            return Err(Error::Arity {
                expected: self.nodes[pos].sources.len(),
                got: flu.arity(),
            });
        }
        self.nodes[pos].flu = flu;
        Ok(())
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.external_arity {
            return Err(Error::Arity {
                expected: self.external_arity,
                got: x.len(),
            });
        }
        Ok(())
    }

    fn gather(&self, node: &HierarchyNode, x: &[f64], outputs: &[f64]) -> Vec<f64> {
        node.sources
            .iter()
            .map(|s| match *s {
                SignalSource::External(i) => x[i],
                SignalSource::Node(id) => outputs[self.index[&id]],
            })
            .collect()
    }

    /// Output of every node, in node order. Node inputs are clamped to the
    /// node's universes.
    pub fn evaluate_all(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let mut outputs = Vec::with_capacity(self.nodes.len());
        for node in &self.nodes {
            let inputs = self.gather(node, x, &outputs);
            let y = node.flu.infer_clamped(&inputs).map_err(|e| match e {
                Error::ZeroFiring { row, .. } => Error::ZeroFiring {
                    row,
                    node: Some(node.id),
                },
                other => other,
            })?;
            outputs.push(y);
        }
        Ok(outputs)
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        let all = self.evaluate_all(x)?;
        Ok(all[self.index[&self.terminal]])
    }

    /// Sum over nodes of the size of each node's complete rule grid.
    pub fn total_rule_count(&self) -> Result<u64> {
        self.nodes.iter().try_fold(0u64, |acc, node| {
            if !node.flu.is_grid_complete() {
                return Err(Error::InvalidHierarchy(format!(
                    "node {} does not hold a complete rule grid",
                    node.id
                )));
            }
            let n = node
                .flu
                .inputs()
                .iter()
                .try_fold(1u64, |a, v| a.checked_mul(v.term_count() as u64))
                .ok_or(Error::CountOverflow)?;
            acc.checked_add(n).ok_or(Error::CountOverflow)
        })
    }
}

impl Predictor for HierarchySpec {
    fn input_arity(&self) -> usize {
        self.external_arity
    }

    fn predict(&self, x: &[f64]) -> Result<f64> {
        self.evaluate(x)
    }
}

pub fn build_raju_chain(
    groups: &[usize],
    variables: &[LinguisticVariable],
    template: &IntermediateTemplate,
) -> Result<HierarchySpec> {
    HierarchySpec::from_plan(
        &HierarchyPlan::raju_chain(groups, variables.len())?,
        variables,
        template,
    )
}

pub fn build_jellali(
    variables: &[LinguisticVariable],
    template: &IntermediateTemplate,
) -> Result<HierarchySpec> {
    HierarchySpec::from_plan(
        &HierarchyPlan::jellali(variables.len())?,
        variables,
        template,
    )
}

pub fn build_joo(
    levels: usize,
    variables: &[LinguisticVariable],
    template: &IntermediateTemplate,
) -> Result<HierarchySpec> {
    let plan = HierarchyPlan::joo(variables.len(), levels)?;
    // the widest node decides whether the grids are countable at all
    let widest = plan.arities().into_iter().max().unwrap_or(0);
    let m = variables
        .iter()
        .map(|v| v.term_count())
        .chain(std::iter::once(template.terms))
        .max()
        .unwrap_or(1);
    flat_rule_count(widest, m)?;
    HierarchySpec::from_plan(&plan, variables, template)
}

/// Relative widening applied on each side of an observed intermediate range.
pub const INTERMEDIATE_MARGIN: f64 = 0.10;

fn observed_universe(values: &[f64]) -> Result<Interval> {
    let (lo, hi) = values
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    if span > 0.0 {
        Interval::new(
            lo - INTERMEDIATE_MARGIN * span,
            hi + INTERMEDIATE_MARGIN * span,
        )
    } else {
        Interval::new(lo - 0.5, hi + 0.5)
    }
}

/// Trains the nodes one at a time in topological order.
///
/// Each node sees its inputs as produced by the already-trained nodes on
/// `data`. Intermediate variables are re-gridded over the observed range of
/// the producing node (widened by [`INTERMEDIATE_MARGIN`]) with their
/// existing term count and kind. `target(node_id, node_inputs, global_target)`
/// gives the value the node is fitted to.
pub fn train_hierarchy_with(
    spec: &HierarchySpec,
    data: &TrainingSet,
    cfg: &TrainingConfig,
    target: impl Fn(usize, &[f64], f64) -> f64,
) -> Result<(HierarchySpec, Vec<TrainingReport>)> {
    if data.arity() != spec.external_arity {
        return Err(Error::Arity {
            expected: spec.external_arity,
            got: data.arity(),
        });
    }
    let mut trained = spec.clone();
    let mut outputs: Vec<Vec<f64>> = vec![Vec::with_capacity(spec.nodes.len()); data.len()];
    let mut reports = Vec::with_capacity(spec.nodes.len());

    for pos in 0..trained.nodes.len() {
        let node = trained.nodes[pos].clone();
        let rows: Vec<Vec<f64>> = data
            .inputs()
            .iter()
            .zip(&outputs)
            .map(|(x, outs)| trained.gather(&node, x, outs))
            .collect();
        let targets: Vec<f64> = rows
            .iter()
            .zip(data.targets())
            .map(|(r, &t)| target(node.id, r, t))
            .collect();

        let mut inputs = node.flu.inputs().to_vec();
        for (i, src) in node.sources.iter().enumerate() {
            if let SignalSource::Node(_) = src {
                let column: Vec<f64> = rows.iter().map(|r| r[i]).collect();
                let old = &inputs[i];
                inputs[i] = LinguisticVariable::grid(
                    old.name().to_string(),
                    observed_universe(&column)?,
                    old.term_count().max(2),
                    old.terms()[0].kind(),
                )?;
            }
        }
        let fresh = FuzzyLogicUnit::grid(inputs)?;
        let set = TrainingSet::from_columns(rows, targets)?;
        let (unit, report) = train_hybrid(&fresh, &set, cfg).map_err(|e| match e {
            Error::ZeroFiring { row, .. } => Error::ZeroFiring {
                row,
                node: Some(node.id),
            },
            other => other,
        })?;
        for (out, x) in outputs.iter_mut().zip(set.inputs()) {
            out.push(unit.infer_clamped(x)?);
        }
        trained.nodes[pos].flu = unit;
        reports.push(report);
    }
    Ok((trained, reports))
}

/// Greedy training: every node is fitted to the global target.
pub fn train_hierarchy(
    spec: &HierarchySpec,
    data: &TrainingSet,
    cfg: &TrainingConfig,
) -> Result<(HierarchySpec, Vec<TrainingReport>)> {
    train_hierarchy_with(spec, data, cfg, |_, _, t| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use SignalSource::{External as Ext, Node};

    fn vars(n: usize, m: usize) -> Vec<LinguisticVariable> {
        (0..n)
            .map(|i| {
                LinguisticVariable::grid(
                    format!("x{i}"),
                    Interval::new(0.0, 1.0).unwrap(),
                    m,
                    MfKind::GeneralizedBell,
                )
                .unwrap()
            })
            .collect()
    }

    fn template(m: usize) -> IntermediateTemplate {
        IntermediateTemplate {
            terms: m,
            kind: MfKind::GeneralizedBell,
            universe: Interval::new(0.0, 1.0).unwrap(),
        }
    }

    #[test]
    fn raju_schema() {
        let s = build_raju_chain(&[2, 1, 1], &vars(4, 3), &template(3)).unwrap();
        let src: Vec<_> = s.nodes().iter().map(|n| n.sources.clone()).collect();
        assert_eq!(
            src,
            vec![
                vec![Ext(0), Ext(1)],
                vec![Ext(2), Node(0)],
                vec![Ext(3), Node(1)]
            ]
        );
        assert_eq!(s.terminal(), 2);
        let flat = build_raju_chain(&[2], &vars(2, 3), &template(3)).unwrap();
        assert_eq!(flat.nodes().len(), 1);
        let p = HierarchyPlan::raju_chain(&[3, 2, 2], 7).unwrap();
        assert_eq!(p.arities(), vec![3, 3, 3]);
        assert!(matches!(
            build_raju_chain(&[2, 1], &vars(4, 3), &template(3)),
            Err(Error::Partition(_))
        ));
        assert!(HierarchyPlan::raju_chain(&[2, 0, 2], 4).is_err());
    }

    #[test]
    fn jellali_pairing() {
        let p = HierarchyPlan::jellali(4).unwrap();
        let src: Vec<_> = p.nodes.iter().map(|n| n.sources.clone()).collect();
        assert_eq!(
            src,
            vec![
                vec![Ext(0), Ext(1)],
                vec![Ext(2), Ext(3)],
                vec![Node(0), Node(1)]
            ]
        );
        assert_eq!(HierarchyPlan::jellali(2).unwrap().nodes.len(), 1);

        let p7 = HierarchyPlan::jellali(7).unwrap();
        assert_eq!(p7.nodes.len(), 6);
        assert!(p7.arities().iter().all(|&a| a == 2));
        let last = p7.nodes.last().unwrap();
        assert!(last.sources.contains(&Ext(6)), "{:?}", last.sources);
        assert_eq!(last.level, p7.nodes.iter().map(|n| n.level).max().unwrap());
        assert!(matches!(
            HierarchyPlan::jellali(1),
            Err(Error::Arity { .. })
        ));
    }

    #[test]
    fn joo_arities() {
        assert_eq!(HierarchyPlan::joo(2, 1).unwrap().arities(), vec![2]);
        let p = HierarchyPlan::joo(2, 2).unwrap();
        assert_eq!(p.nodes[1].sources, vec![Ext(0), Ext(1), Node(0)]);
        assert_eq!(HierarchyPlan::joo(3, 3).unwrap().arities(), vec![3, 4, 5]);
        assert!(matches!(
            build_joo(2, &vars(40, 3), &template(3)),
            Err(Error::CountOverflow)
        ));
    }

    #[test]
    fn rule_counts() {
        let flat = flat_rule_count(7, 3).unwrap();
        assert_eq!(flat, 2187);
        let j7 = build_jellali(&vars(7, 3), &template(3)).unwrap();
        assert_eq!(j7.total_rule_count().unwrap(), 54);
        let j2 = build_jellali(&vars(2, 3), &template(3)).unwrap();
        assert_eq!(
            j2.total_rule_count().unwrap(),
            flat_rule_count(2, 3).unwrap()
        );
        for n in 2..=12 {
            assert_eq!(
                HierarchyPlan::jellali(n)
                    .unwrap()
                    .uniform_rule_count(3)
                    .unwrap(),
                (n as u64 - 1) * 9
            );
        }
        let mut prev = 0.0;
        for n in 3..=12 {
            let ratio = flat_rule_count(n, 3).unwrap() as f64
                / HierarchyPlan::jellali(n)
                    .unwrap()
                    .uniform_rule_count(3)
                    .unwrap() as f64;
            assert!(ratio > prev);
            prev = ratio;
        }
        assert!(matches!(
            HierarchyPlan::joo(60, 2).unwrap().uniform_rule_count(3),
            Err(Error::CountOverflow)
        ));
    }

    #[test]
    fn rejects_forward_reference() {
        let v = vars(2, 2);
        let flu = FuzzyLogicUnit::grid(v.clone()).unwrap();
        let nodes = vec![
            HierarchyNode {
                id: 0,
                level: 1,
                sources: vec![Ext(0), Node(1)],
                flu: flu.clone(),
            },
            HierarchyNode {
                id: 1,
                level: 1,
                sources: vec![Ext(0), Ext(1)],
                flu,
            },
        ];
        assert!(matches!(
            HierarchySpec::new(2, TopologyKind::Custom, nodes, 1),
            Err(Error::InvalidHierarchy(_))
        ));
    }

    #[test]
    fn rejects_double_consumption_in_jellali() {
        let flu = FuzzyLogicUnit::grid(vars(2, 2)).unwrap();
        let nodes = vec![HierarchyNode {
            id: 0,
            level: 1,
            sources: vec![Ext(0), Ext(0)],
            flu,
        }];
        assert!(HierarchySpec::new(2, TopologyKind::JellaliPairwise, nodes.clone(), 0).is_err());
        assert!(HierarchySpec::new(2, TopologyKind::Custom, nodes, 0).is_ok());
    }

    #[test]
    fn single_node_equals_unit() {
        let mut s = build_jellali(&vars(2, 3), &template(3)).unwrap();
        let mut flu = s.nodes()[0].flu.clone();
        let c: Vec<f64> = (0..flu.rule_count() * 3)
            .map(|i| (i as f64 * 0.37).sin())
            .collect();
        flu.set_consequent_params(&c).unwrap();
        s.replace_unit(0, flu.clone()).unwrap();
        for x in [[0.1, 0.2], [0.9, 0.4], [0.5, 0.5]] {
            assert_eq!(s.evaluate(&x).unwrap(), flu.infer(&x).unwrap());
        }
        assert!(matches!(s.evaluate(&[0.1]), Err(Error::Arity { .. })));
    }

    #[test]
    fn json_sources() {
        let s = build_raju_chain(&[1, 1], &vars(2, 2), &template(2)).unwrap();
        let js = serde_json::to_value(&s).unwrap();
        assert_eq!(
            js["nodes"][1]["sources"],
            serde_json::json!([{"ext": 1}, {"node": 0}])
        );
        assert_eq!(js["topology_kind"], "raju-chain");
        let back: HierarchySpec = serde_json::from_value(js).unwrap();
        assert_eq!(back, s);
    }
}
