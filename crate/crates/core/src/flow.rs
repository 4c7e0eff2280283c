//! Dinic max-flow on real capacities, with residual reachability for
//! min-cut extraction.
//!
//! Residual capacities at or below `eps` count as saturated; this is what
//! makes the algorithm terminate on float input.

use std::collections::VecDeque;

#[derive(Debug, Clone)]
struct Edge {
    to: usize,
    cap: f64,
    rev: usize,
}

#[derive(Debug, Clone)]
pub struct FlowNetwork {
    graph: Vec<Vec<Edge>>,
    /// (node, position) of each forward edge, by edge id, with its original capacity.
    handles: Vec<(usize, usize, f64)>,
    eps: f64,
}

pub type EdgeId = usize;

impl FlowNetwork {
    pub fn new(nodes: usize, eps: f64) -> Self {
        FlowNetwork {
            graph: vec![Vec::new(); nodes],
            handles: Vec::new(),
            eps,
        }
    }

    pub fn add_edge(&mut self, from: usize, to: usize, cap: f64) -> EdgeId {
        let fwd = self.graph[from].len();
        let back = self.graph[to].len() + usize::from(from == to);
        self.graph[from].push(Edge { to, cap, rev: back });
        self.graph[to].push(Edge {
            to: from,
            cap: 0.0,
            rev: fwd,
        });
        self.handles.push((from, fwd, cap));
        self.handles.len() - 1
    }

    /// Flow currently routed through an edge.
    pub fn flow(&self, id: EdgeId) -> f64 {
        let (node, pos, cap) = self.handles[id];
        if cap.is_infinite() {
            let e = &self.graph[node][pos];
            return self.graph[e.to][e.rev].cap;
        }
        (cap - self.graph[node][pos].cap).max(0.0)
    }

    fn levels(&self, source: usize) -> Vec<Option<usize>> {
        let mut level = vec![None; self.graph.len()];
        level[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(v) = queue.pop_front() {
            let next = level[v].map(|l| l + 1);
            for e in &self.graph[v] {
                if e.cap > self.eps && level[e.to].is_none() {
                    level[e.to] = next;
                    queue.push_back(e.to);
                }
            }
        }
        level
    }

    fn augment(
        &mut self,
        v: usize,
        sink: usize,
        pushed: f64,
        level: &[Option<usize>],
        cursor: &mut [usize],
    ) -> f64 {
        if v == sink {
            return pushed;
        }
        while cursor[v] < self.graph[v].len() {
            let Edge { to, cap, rev } = self.graph[v][cursor[v]];
            let forward = matches!((level[v], level[to]), (Some(a), Some(b)) if b == a + 1);
            if cap > self.eps && forward {
                let got = self.augment(to, sink, pushed.min(cap), level, cursor);
                if got > self.eps {
                    let e = &mut self.graph[v][cursor[v]];
                    if e.cap.is_finite() {
                        e.cap -= got;
                    }
                    let back = &mut self.graph[to][rev];
                    back.cap += got;
                    return got;
                }
            }
            cursor[v] += 1;
        }
        0.0
    }

    pub fn max_flow(&mut self, source: usize, sink: usize) -> f64 {
        let mut total = 0.0;
        loop {
            let level = self.levels(source);
            if level[sink].is_none() {
                return total;
            }
            let mut cursor = vec![0; self.graph.len()];
            loop {
                let got = self.augment(source, sink, f64::INFINITY, &level, &mut cursor);
                if got <= self.eps {
                    break;
                }
                total += got;
            }
        }
    }

    /// Nodes reachable from `source` through edges with residual capacity
    /// above `eps`: the source side of a minimum cut once the flow is maximal.
    pub fn source_side(&self, source: usize) -> Vec<bool> {
        self.levels(source).iter().map(Option::is_some).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn textbook_network() {
        // CLRS figure 26.1, max flow 23.
        let mut g = FlowNetwork::new(6, 1e-12);
        for (u, v, c) in [
            (0, 1, 16.0),
            (0, 2, 13.0),
            (1, 3, 12.0),
            (2, 1, 4.0),
            (2, 4, 14.0),
            (3, 2, 9.0),
            (3, 5, 20.0),
            (4, 3, 7.0),
            (4, 5, 4.0),
        ] {
            g.add_edge(u, v, c);
        }
        assert!((g.max_flow(0, 5) - 23.0).abs() < 1e-12);
        let side = g.source_side(0);
        assert!(side[0] && !side[5]);
    }

    #[test]
    fn infinite_middle_edges() {
        let mut g = FlowNetwork::new(4, 1e-12);
        let a = g.add_edge(0, 1, 1.5);
        let mid = g.add_edge(1, 2, f64::INFINITY);
        g.add_edge(2, 3, 1.0);
        assert!((g.max_flow(0, 3) - 1.0).abs() < 1e-15);
        assert!((g.flow(a) - 1.0).abs() < 1e-15);
        assert!((g.flow(mid) - 1.0).abs() < 1e-15);
        // Source side is {0, 1, 2}: only the sink edge is saturated.
        assert_eq!(g.source_side(0), vec![true, true, true, false]);
    }
}
