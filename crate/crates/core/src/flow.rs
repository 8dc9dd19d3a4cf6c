//! Integer maximum flow (Dinic) and residual-graph utilities.

use std::collections::VecDeque;

/// Flow network with paired arcs; arc `a ^ 1` is the reverse of arc `a`.
#[derive(Debug, Clone)]
pub struct FlowGraph {
    adj: Vec<Vec<usize>>,
    to: Vec<usize>,
    cap: Vec<u64>,
}

impl FlowGraph {
    pub fn new(n: usize) -> Self {
        FlowGraph {
            adj: vec![Vec::new(); n],
            to: Vec::new(),
            cap: Vec::new(),
        }
    }

    pub fn node_count(&self) -> usize {
        self.adj.len()
    }

    /// Undirected edge: both directions carry `c`.
    pub fn add_edge(&mut self, u: usize, v: usize, c: u64) {
        self.add_arc_pair(u, v, c, c);
    }

    pub fn add_arc(&mut self, u: usize, v: usize, c: u64) {
        self.add_arc_pair(u, v, c, 0);
    }

    fn add_arc_pair(&mut self, u: usize, v: usize, forward: u64, backward: u64) {
        let a = self.to.len();
        self.to.push(v);
        self.cap.push(forward);
        self.adj[u].push(a);
        self.to.push(u);
        self.cap.push(backward);
        self.adj[v].push(a + 1);
    }

    /// Maximum `s`-`t` flow; the graph keeps the residual capacities.
    pub fn max_flow(&mut self, s: usize, t: usize) -> u64 {
        self.max_flow_up_to(s, t, u64::MAX)
    }

    /// Pushes flow until `limit` is reached or no augmenting path remains.
    pub fn max_flow_up_to(&mut self, s: usize, t: usize, limit: u64) -> u64 {
        assert_ne!(s, t, "source equals sink");
        let n = self.adj.len();
        let mut total = 0u64;
        let mut level = vec![usize::MAX; n];
        let mut iter = vec![0usize; n];
        while total < limit {
            level.fill(usize::MAX);
            level[s] = 0;
            let mut queue = VecDeque::from([s]);
            while let Some(u) = queue.pop_front() {
                for &a in &self.adj[u] {
                    let v = self.to[a];
                    if self.cap[a] > 0 && level[v] == usize::MAX {
                        level[v] = level[u] + 1;
                        queue.push_back(v);
                    }
                }
            }
            if level[t] == usize::MAX {
                break;
            }
            iter.fill(0);
            loop {
                let pushed = self.augment(s, t, limit - total, &level, &mut iter);
                if pushed == 0 {
                    break;
                }
                total += pushed;
                if total >= limit {
                    break;
                }
            }
        }
        total
    }

    // Iterative blocking-flow DFS along the level graph.
    fn augment(&mut self, s: usize, t: usize, want: u64, level: &[usize], iter: &mut [usize]) -> u64 {
        let mut path: Vec<usize> = Vec::new();
        let mut u = s;
        loop {
            if u == t {
                let f = path.iter().map(|&a| self.cap[a]).min().unwrap_or(0).min(want);
                for &a in &path {
                    self.cap[a] -= f;
                    self.cap[a ^ 1] += f;
                }
                return f;
            }
            let mut advanced = false;
            while iter[u] < self.adj[u].len() {
                let a = self.adj[u][iter[u]];
                let v = self.to[a];
                if self.cap[a] > 0 && level[v] == level[u] + 1 {
                    path.push(a);
                    u = v;
                    advanced = true;
                    break;
                }
                iter[u] += 1;
            }
            if !advanced {
                if u == s {
                    return 0;
                }
                // dead end: retreat and skip the arc that led here
                let a = path.pop().expect("non-source node has an entry arc");
                u = self.to[a ^ 1];
                iter[u] += 1;
            }
        }
    }

    /// Nodes reachable from `s` through arcs with positive residual capacity.
    pub fn residual_reachable(&self, s: usize) -> Vec<bool> {
        let mut seen = vec![false; self.adj.len()];
        seen[s] = true;
        let mut stack = vec![s];
        while let Some(u) = stack.pop() {
            for &a in &self.adj[u] {
                let v = self.to[a];
                if self.cap[a] > 0 && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen
    }

    /// Residual successor lists.
    pub fn residual_adjacency(&self) -> Vec<Vec<usize>> {
        self.adj
            .iter()
            .map(|arcs| {
                let mut out: Vec<usize> = arcs.iter().filter(|&&a| self.cap[a] > 0).map(|&a| self.to[a]).collect();
                out.sort_unstable();
                out.dedup();
                out
            })
            .collect()
    }
}

/// Strongly connected components (Tarjan, iterative). Returns the component
/// id of each node; ids are in reverse topological order of the condensation.
pub fn strongly_connected(adj: &[Vec<usize>]) -> (Vec<usize>, usize) {
    let n = adj.len();
    let mut index = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut on_stack = vec![false; n];
    let mut comp = vec![usize::MAX; n];
    let mut stack = Vec::new();
    let mut next_index = 0;
    let mut count = 0;
    let mut call: Vec<(usize, usize)> = Vec::new();
    for root in 0..n {
        if index[root] != usize::MAX {
            continue;
        }
        call.push((root, 0));
        index[root] = next_index;
        low[root] = next_index;
        next_index += 1;
        stack.push(root);
        on_stack[root] = true;
        while let Some(&mut (u, ref mut i)) = call.last_mut() {
            if *i < adj[u].len() {
                let v = adj[u][*i];
                *i += 1;
                if index[v] == usize::MAX {
                    index[v] = next_index;
                    low[v] = next_index;
                    next_index += 1;
                    stack.push(v);
                    on_stack[v] = true;
                    call.push((v, 0));
                } else if on_stack[v] {
                    low[u] = low[u].min(index[v]);
                }
            } else {
                call.pop();
                if let Some(&(p, _)) = call.last() {
                    low[p] = low[p].min(low[u]);
                }
                if low[u] == index[u] {
                    loop {
                        let w = stack.pop().expect("tarjan stack");
                        on_stack[w] = false;
                        comp[w] = count;
                        if w == u {
                            break;
                        }
                    }
                    count += 1;
                }
            }
        }
    }
    (comp, count)
}
