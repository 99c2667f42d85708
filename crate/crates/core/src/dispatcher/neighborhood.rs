use super::{EpochContext, WorkingSolution};
use crate::feasibility::{Block, Bridge, Node, Route};
use crate::model::Instance;
use crate::par;
use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Operator {
    RelocateBridge,
    BlockExchange,
    RelocateBlock,
}

impl Operator {
    /// Descent order.
    pub const ALL: [Operator; 3] = [Operator::RelocateBridge, Operator::BlockExchange, Operator::RelocateBlock];

    pub fn name(self) -> &'static str {
        match self {
            Operator::RelocateBridge => "relocate-bridge",
            Operator::BlockExchange => "block-exchange",
            Operator::RelocateBlock => "relocate-block",
        }
    }
}

impl std::fmt::Display for Operator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Gaps refer to the target route after the moved nodes were taken out.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    RelocateBlock { from: usize, block: Block, to: usize, gap: usize },
    ExchangeBlocks { first: (usize, Block), second: (usize, Block) },
    RelocateBridge { from: usize, bridge: Bridge, to: usize, gap: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Neighbor {
    pub mv: Move,
    pub solution: WorkingSolution,
}

fn without_block(route: &Route, b: Block) -> Vec<Node> {
    let mut nodes = route.nodes[..b.start].to_vec();
    nodes.extend_from_slice(&route.nodes[b.end + 1..]);
    nodes
}

fn without_bridge(route: &Route, b: Bridge) -> Vec<Node> {
    route
        .nodes
        .iter()
        .enumerate()
        .filter(|(i, _)| !b.pickup_span().contains(i) && !b.delivery_span().contains(i))
        .map(|(_, &n)| n)
        .collect()
}

fn bridge_nodes(route: &Route, b: Bridge) -> Vec<Node> {
    let mut seg = route.nodes[b.pickup_span()].to_vec();
    seg.extend_from_slice(&route.nodes[b.delivery_span()]);
    seg
}

fn splice(route: &Route, mut base: Vec<Node>, gap: usize, seg: &[Node]) -> Route {
    base.splice(gap..gap, seg.iter().copied());
    Route {
        nodes: base,
        ..route.clone_head()
    }
}

/// Every move of `op` in canonical order. No-op relocations and gaps
/// inside a destination lock are left out; feasibility is not checked.
pub fn moves(op: Operator, routes: &[Route], inst: &Instance) -> Vec<Move> {
    let mut out = Vec::new();
    match op {
        Operator::RelocateBlock => {
            for (from, r) in routes.iter().enumerate() {
                for block in r.blocks().unwrap_or_default() {
                    for (to, t) in routes.iter().enumerate() {
                        let len = if to == from { t.len() - block.len() } else { t.len() };
                        for gap in t.locked_len()..=len {
                            if to == from && gap == block.start {
                                continue;
                            }
                            out.push(Move::RelocateBlock { from, block, to, gap });
                        }
                    }
                }
            }
        }
        Operator::BlockExchange => {
            let all: Vec<(usize, Block)> = routes
                .iter()
                .enumerate()
                .flat_map(|(i, r)| r.blocks().unwrap_or_default().into_iter().map(move |b| (i, b)))
                .collect();
            for (a, &first) in all.iter().enumerate() {
                for &second in &all[a + 1..] {
                    if first.0 == second.0 && first.1.overlaps(&second.1) {
                        continue;
                    }
                    out.push(Move::ExchangeBlocks { first, second });
                }
            }
        }
        Operator::RelocateBridge => {
            for (from, r) in routes.iter().enumerate() {
                for bridge in r.maximal_bridges(inst).unwrap_or_default() {
                    let adjacent = bridge.delivery_start == bridge.pickup_start + bridge.len;
                    for (to, t) in routes.iter().enumerate() {
                        let len = if to == from { t.len() - 2 * bridge.len } else { t.len() };
                        for gap in t.locked_len()..=len {
                            if to == from && adjacent && gap == bridge.pickup_start {
                                continue;
                            }
                            out.push(Move::RelocateBridge { from, bridge, to, gap });
                        }
                    }
                }
            }
        }
    }
    out
}

/// Routes changed by `mv`, by vehicle index.
pub fn apply_move(routes: &[Route], mv: &Move) -> Vec<(usize, Route)> {
    match *mv {
        Move::RelocateBlock { from, block, to, gap } => {
            let src = &routes[from];
            let seg = &src.nodes[block.start..=block.end];
            let rest = without_block(src, block);
            if from == to {
                vec![(from, splice(src, rest, gap, seg))]
            } else {
                let dst = &routes[to];
                vec![
                    (from, Route { nodes: rest, ..src.clone_head() }),
                    (to, splice(dst, dst.nodes.clone(), gap, seg)),
                ]
            }
        }
        Move::ExchangeBlocks { first: (ra, a), second: (rb, b) } => {
            if ra == rb {
                let r = &routes[ra];
                let (x, y) = if a.start < b.start { (a, b) } else { (b, a) };
                let mut nodes = r.nodes[..x.start].to_vec();
                nodes.extend_from_slice(&r.nodes[y.start..=y.end]);
                nodes.extend_from_slice(&r.nodes[x.end + 1..y.start]);
                nodes.extend_from_slice(&r.nodes[x.start..=x.end]);
                nodes.extend_from_slice(&r.nodes[y.end + 1..]);
                vec![(ra, Route { nodes, ..r.clone_head() })]
            } else {
                let (p, q) = (&routes[ra], &routes[rb]);
                let swap = |r: &Route, out: Block, inn: &[Node]| {
                    let mut nodes = r.nodes[..out.start].to_vec();
                    nodes.extend_from_slice(inn);
                    nodes.extend_from_slice(&r.nodes[out.end + 1..]);
                    Route { nodes, ..r.clone_head() }
                };
                vec![
                    (ra, swap(p, a, &q.nodes[b.start..=b.end])),
                    (rb, swap(q, b, &p.nodes[a.start..=a.end])),
                ]
            }
        }
        Move::RelocateBridge { from, bridge, to, gap } => {
            let src = &routes[from];
            let seg = bridge_nodes(src, bridge);
            let rest = without_bridge(src, bridge);
            if from == to {
                vec![(from, splice(src, rest, gap, &seg))]
            } else {
                let dst = &routes[to];
                vec![
                    (from, Route { nodes: rest, ..src.clone_head() }),
                    (to, splice(dst, dst.nodes.clone(), gap, &seg)),
                ]
            }
        }
    }
}

/// Least-cost feasible neighbour under `op`, or `None` if every candidate
/// breaks a constraint. Ties go to the earliest move in canonical order.
pub fn neighborhood_best(ctx: &EpochContext<'_>, solution: &WorkingSolution, op: Operator) -> Option<Neighbor> {
    let routes = &solution.routes;
    let candidates = moves(op, routes, ctx.inst);
    let (i, _) = par::argmin_by(&candidates, ctx.exec, |mv| {
        let changed = apply_move(routes, mv);
        for (_, r) in &changed {
            if !r.is_feasible(ctx.inst).ok()? {
                return None;
            }
        }
        ctx.cost_with(routes, &changed).ok().map(|c| c.weighted_total)
    })?;
    let mv = candidates[i];
    let mut next = routes.clone();
    for (v, r) in apply_move(routes, &mv) {
        next[v] = r;
    }
    let solution = ctx.solution(next).ok()?;
    Some(Neighbor { mv, solution })
}
