//! Best-first search over implicitly constructed graphs.
//!
//! The same engine runs weighted A* (priority `g + epsilon * h`) and the
//! random-order baseline. Goal nodes are terminal: the search stops when one is
//! popped and never generates successors from it. Duplicate states (equal keys)
//! keep the copy with the lower `g`; an improved closed node is re-opened.

use std::cmp::Ordering;
use std::collections::hash_map::Entry;
use std::collections::{BinaryHeap, HashMap};
use std::hash::Hash;
use std::time::{Duration, Instant};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// A graph given by its successor function.
pub trait SearchProblem {
    type State: Clone;
    type Action: Clone;
    type Key: Hash + Eq;

    fn is_goal(&self, state: &Self::State) -> bool;
    fn heuristic(&self, state: &Self::State) -> f64;
    fn key(&self, state: &Self::State) -> Self::Key;
    /// Outgoing edges as `(action, successor, cost)`.
    fn successors(&mut self, state: &Self::State) -> Result<Vec<(Self::Action, Self::State, f64)>>;
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Outcome {
    Solved,
    /// Expansion budget or wall-clock limit reached.
    Timeout,
    /// Open list ran empty without reaching a goal.
    Exhausted,
}

#[derive(Clone, Debug)]
pub struct SearchNode<S, A> {
    pub state: S,
    pub g: f64,
    pub h: f64,
    pub depth: usize,
    pub parent: Option<usize>,
    /// Incoming edge as `(action, cost)`.
    pub edge: Option<(A, f64)>,
    open: bool,
    // Heap entries carrying another stamp are stale.
    stamp: u64,
}

#[derive(Clone, Copy, Debug)]
pub struct SearchLimits {
    pub max_depth: usize,
    pub max_expansions: usize,
    pub timeout: Duration,
}

#[derive(Debug)]
pub enum Order {
    Weighted { epsilon: f64 },
    Random(ChaCha8Rng),
}

/// Nodes of a finished search; edges are stored as parent pointers.
#[derive(Clone, Debug)]
pub struct SearchGraph<S, A> {
    pub nodes: Vec<SearchNode<S, A>>,
}

impl<S: Clone, A: Clone> SearchGraph<S, A> {
    /// Edges from the root to `node`, each with the state it leads to.
    pub fn trace(&self, node: usize) -> Vec<(A, S, f64)> {
        let mut out = Vec::new();
        let mut cur = node;
        while let Some(parent) = self.nodes[cur].parent {
            let (a, c) = self.nodes[cur].edge.clone().expect("non-root node has an edge");
            out.push((a, self.nodes[cur].state.clone(), c));
            cur = parent;
        }
        out.reverse();
        out
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct SearchRun<S, A> {
    pub outcome: Outcome,
    pub goal: Option<usize>,
    pub graph: SearchGraph<S, A>,
    /// Ids of nodes still open at termination, ascending.
    pub open: Vec<usize>,
    pub expansions: usize,
    pub generated: usize,
    pub elapsed: Duration,
}

#[derive(Clone, Copy, Debug)]
struct HeapEntry {
    f: f64,
    g: f64,
    stamp: u64,
    id: usize,
}

impl PartialEq for HeapEntry {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for HeapEntry {}

impl PartialOrd for HeapEntry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for HeapEntry {
    // BinaryHeap is a max-heap: lowest f first, then larger g, then earliest insertion.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.stamp.cmp(&self.stamp))
    }
}

enum OpenList {
    Heap { heap: BinaryHeap<HeapEntry>, epsilon: f64 },
    Random { ids: Vec<usize>, slot: HashMap<usize, usize>, rng: ChaCha8Rng },
}

impl OpenList {
    fn push<S, A>(&mut self, nodes: &mut [SearchNode<S, A>], id: usize, stamp: u64) {
        let node = &mut nodes[id];
        node.stamp = stamp;
        let was_open = node.open;
        node.open = true;
        match self {
            OpenList::Heap { heap, epsilon } => {
                heap.push(HeapEntry { f: node.g + *epsilon * node.h, g: node.g, stamp, id });
            }
            OpenList::Random { ids, slot, .. } => {
                if !was_open {
                    slot.insert(id, ids.len());
                    ids.push(id);
                }
            }
        }
    }

    fn pop<S, A>(&mut self, nodes: &mut [SearchNode<S, A>]) -> Option<usize> {
        match self {
            OpenList::Heap { heap, .. } => {
                while let Some(e) = heap.pop() {
                    let node = &mut nodes[e.id];
                    if node.open && node.stamp == e.stamp {
                        node.open = false;
                        return Some(e.id);
                    }
                }
                None
            }
            OpenList::Random { ids, slot, rng } => {
                if ids.is_empty() {
                    return None;
                }
                let pos = rng.gen_range(0..ids.len());
                let id = ids.swap_remove(pos);
                slot.remove(&id);
                if pos < ids.len() {
                    slot.insert(ids[pos], pos);
                }
                nodes[id].open = false;
                Some(id)
            }
        }
    }
}

/// Runs best-first search from `start` until a goal is popped or a limit is hit.
pub fn best_first<P: SearchProblem>(
    problem: &mut P,
    start: P::State,
    limits: &SearchLimits,
    order: Order,
) -> Result<SearchRun<P::State, P::Action>> {
    let t0 = Instant::now();
    let h0 = problem.heuristic(&start);
    let root_key = problem.key(&start);
    let mut nodes = vec![SearchNode { state: start, g: 0.0, h: h0, depth: 0, parent: None, edge: None, open: false, stamp: 0 }];
    let mut index: HashMap<P::Key, usize> = HashMap::new();
    index.insert(root_key, 0);
    let mut open = match order {
        Order::Weighted { epsilon } => OpenList::Heap { heap: BinaryHeap::new(), epsilon },
        Order::Random(rng) => OpenList::Random { ids: Vec::new(), slot: HashMap::new(), rng },
    };
    let mut stamp = 0u64;
    open.push(&mut nodes, 0, stamp);

    let mut expansions = 0usize;
    let mut generated = 0usize;
    let mut outcome = Outcome::Exhausted;
    let mut goal = None;

    while let Some(id) = open.pop(&mut nodes) {
        if problem.is_goal(&nodes[id].state) {
            outcome = Outcome::Solved;
            goal = Some(id);
            break;
        }
        if expansions >= limits.max_expansions || t0.elapsed() >= limits.timeout {
            stamp += 1;
            open.push(&mut nodes, id, stamp);
            outcome = Outcome::Timeout;
            break;
        }
        if nodes[id].depth >= limits.max_depth {
            continue;
        }
        expansions += 1;
        let succs = problem.successors(&nodes[id].state)?;
        let (g_parent, depth) = (nodes[id].g, nodes[id].depth + 1);
        for (action, state, cost) in succs {
            generated += 1;
            let g = g_parent + cost;
            match index.entry(problem.key(&state)) {
                Entry::Occupied(e) => {
                    let other = *e.get();
                    if g < nodes[other].g {
                        let n = &mut nodes[other];
                        n.g = g;
                        n.depth = depth;
                        n.parent = Some(id);
                        n.edge = Some((action, cost));
                        n.state = state;
                        stamp += 1;
                        open.push(&mut nodes, other, stamp);
                    }
                }
                Entry::Vacant(e) => {
                    let h = problem.heuristic(&state);
                    let new_id = nodes.len();
                    nodes.push(SearchNode { state, g, h, depth, parent: Some(id), edge: Some((action, cost)), open: false, stamp: 0 });
                    e.insert(new_id);
                    stamp += 1;
                    open.push(&mut nodes, new_id, stamp);
                }
            }
        }
    }

    let open_ids: Vec<usize> = nodes.iter().enumerate().filter(|(_, n)| n.open).map(|(i, _)| i).collect();
    Ok(SearchRun {
        outcome,
        goal,
        graph: SearchGraph { nodes },
        open: open_ids,
        expansions,
        generated,
        elapsed: t0.elapsed(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    /// Explicit graph with node ids as states.
    struct Explicit {
        edges: Vec<Vec<(usize, f64)>>,
        h: Vec<f64>,
        goals: Vec<bool>,
    }

    impl SearchProblem for Explicit {
        type State = usize;
        type Action = usize;
        type Key = usize;

        fn is_goal(&self, s: &usize) -> bool {
            self.goals[*s]
        }
        fn heuristic(&self, s: &usize) -> f64 {
            self.h[*s]
        }
        fn key(&self, s: &usize) -> usize {
            *s
        }
        fn successors(&mut self, s: &usize) -> Result<Vec<(usize, usize, f64)>> {
            Ok(self.edges[*s].iter().map(|(t, c)| (*t, *t, *c)).collect())
        }
    }

    fn limits(n: usize) -> SearchLimits {
        SearchLimits { max_depth: 100, max_expansions: n, timeout: Duration::from_secs(60) }
    }

    fn chain(n: usize) -> Explicit {
        let mut edges = vec![Vec::new(); n];
        for i in 0..n - 1 {
            edges[i].push((i + 1, 1.0));
        }
        let mut goals = vec![false; n];
        goals[n - 1] = true;
        Explicit { edges, h: vec![0.0; n], goals }
    }

    #[test]
    fn start_goal_is_solved_immediately() {
        let mut p = chain(1);
        let run = best_first(&mut p, 0, &limits(10), Order::Weighted { epsilon: 1.0 }).unwrap();
        assert_eq!(run.outcome, Outcome::Solved);
        assert_eq!(run.expansions, 0);
        assert!(run.graph.trace(run.goal.unwrap()).is_empty());
    }

    #[test]
    fn zero_budget_times_out() {
        let mut p = chain(3);
        let run = best_first(&mut p, 0, &limits(0), Order::Weighted { epsilon: 1.0 }).unwrap();
        assert_eq!(run.outcome, Outcome::Timeout);
        assert_eq!(run.expansions, 0);
        assert_eq!(run.open, vec![0]);
    }

    #[test]
    fn chain_found_by_both_orders() {
        let mut p = chain(5);
        let a = best_first(&mut p, 0, &limits(100), Order::Weighted { epsilon: 2.0 }).unwrap();
        let b = best_first(&mut p, 0, &limits(100), Order::Random(ChaCha8Rng::seed_from_u64(3))).unwrap();
        let ta: Vec<usize> = a.graph.trace(a.goal.unwrap()).iter().map(|e| e.1).collect();
        let tb: Vec<usize> = b.graph.trace(b.goal.unwrap()).iter().map(|e| e.1).collect();
        assert_eq!(ta, vec![1, 2, 3, 4]);
        assert_eq!(ta, tb);
    }

    #[test]
    fn depth_limit_exhausts() {
        let mut p = chain(5);
        let l = SearchLimits { max_depth: 2, ..limits(100) };
        let run = best_first(&mut p, 0, &l, Order::Weighted { epsilon: 1.0 }).unwrap();
        assert_eq!(run.outcome, Outcome::Exhausted);
    }

    #[test]
    fn goal_nodes_are_not_passed_through() {
        // 0 -> 1 (goal) -> 2 (goal): the only plan ends at 1.
        let p = &mut Explicit { edges: vec![vec![(1, 1.0)], vec![(2, 1.0)], vec![]], h: vec![0.0; 3], goals: vec![false, true, true] };
        let run = best_first(p, 0, &limits(10), Order::Weighted { epsilon: 1.0 }).unwrap();
        assert_eq!(run.goal, Some(1));
        assert_eq!(run.expansions, 1);
    }

    #[test]
    fn reopening_finds_cheaper_path() {
        // Misleading heuristic sends the search through the expensive edge first.
        let p = &mut Explicit {
            edges: vec![vec![(1, 1.0), (2, 5.0)], vec![(2, 1.0)], vec![(3, 1.0)], vec![]],
            h: vec![0.0, 3.0, 0.0, 0.0],
            goals: vec![false, false, false, true],
        };
        let run = best_first(p, 0, &limits(10), Order::Weighted { epsilon: 1.0 }).unwrap();
        let g = run.graph.nodes[run.goal.unwrap()].g;
        assert!((g - 3.0).abs() < 1e-12, "{g}");
    }
}
