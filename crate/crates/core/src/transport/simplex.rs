//! Primal network simplex for dense transportation problems.
//!
//! Spanning-tree bookkeeping (thread / rev_thread / succ_num / last_succ) and
//! block-search pivoting follow the LEMON implementation. Supplies are
//! integers, costs are `f64`.

const STATE_UPPER: i8 = -1;
const STATE_TREE: i8 = 0;
const STATE_LOWER: i8 = 1;
const DIR_UP: i8 = 1;
const DIR_DOWN: i8 = -1;
const NONE: usize = usize::MAX;
const INF: i64 = i64::MAX;

pub(crate) struct Solution {
    /// `(source, sink, flow)` with positive flow.
    pub flows: Vec<(usize, usize, i64)>,
}

struct Simplex {
    search_arc_num: usize,
    source: Vec<u32>,
    target: Vec<u32>,
    cost: Vec<f64>,
    flow: Vec<i64>,
    state: Vec<i8>,
    parent: Vec<usize>,
    pred: Vec<usize>,
    thread: Vec<usize>,
    rev_thread: Vec<usize>,
    succ_num: Vec<usize>,
    last_succ: Vec<usize>,
    pred_dir: Vec<i8>,
    pi: Vec<f64>,
    dirty_revs: Vec<usize>,
    in_arc: usize,
    join: usize,
    u_in: usize,
    v_in: usize,
    u_out: usize,
    delta: i64,
    block_size: usize,
    next_arc: usize,
    eps: f64,
}

/// Solves `min Σ c_ij x_ij` subject to row sums `supply` and column sums
/// `demand` (equal totals), with `cost` row-major `supply.len() × demand.len()`.
pub(crate) fn solve(supply: &[i64], demand: &[i64], cost: &[f64]) -> Solution {
    let m = supply.len();
    let n = demand.len();
    assert_eq!(cost.len(), m * n);
    assert_eq!(supply.iter().sum::<i64>(), demand.iter().sum::<i64>(), "unbalanced supplies");
    let node_num = m + n;
    let arc_num = m * n;
    let all = arc_num + node_num;
    let root = node_num;

    let mut source = vec![0u32; all];
    let mut target = vec![0u32; all];
    let mut c = vec![0.0; all];
    let mut max_cost: f64 = 0.0;
    for i in 0..m {
        for j in 0..n {
            let a = i * n + j;
            source[a] = i as u32;
            target[a] = (m + j) as u32;
            c[a] = cost[a];
            max_cost = max_cost.max(cost[a].abs());
        }
    }
    let art_cost = (max_cost + 1.0) * node_num as f64;

    let mut s = Simplex {
        search_arc_num: arc_num,
        source,
        target,
        cost: c,
        flow: vec![0; all],
        state: vec![STATE_LOWER; all],
        parent: vec![NONE; node_num + 1],
        pred: vec![NONE; node_num + 1],
        thread: vec![0; node_num + 1],
        rev_thread: vec![0; node_num + 1],
        succ_num: vec![0; node_num + 1],
        last_succ: vec![0; node_num + 1],
        pred_dir: vec![0; node_num + 1],
        pi: vec![0.0; node_num + 1],
        dirty_revs: Vec::new(),
        in_arc: 0,
        join: 0,
        u_in: 0,
        v_in: 0,
        u_out: 0,
        delta: 0,
        block_size: ((arc_num as f64).sqrt() as usize).max(10),
        next_arc: 0,
        eps: 64.0 * f64::EPSILON * art_cost,
    };

    s.parent[root] = NONE;
    s.pred[root] = NONE;
    s.thread[root] = 0;
    s.rev_thread[0] = root;
    s.succ_num[root] = node_num + 1;
    s.last_succ[root] = root - 1;
    s.pi[root] = 0.0;
    for u in 0..node_num {
        let e = arc_num + u;
        let sup = if u < m { supply[u] } else { -demand[u - m] };
        s.parent[u] = root;
        s.pred[u] = e;
        s.thread[u] = u + 1;
        s.rev_thread[u + 1] = u;
        s.succ_num[u] = 1;
        s.last_succ[u] = u;
        s.state[e] = STATE_TREE;
        if sup >= 0 {
            s.pred_dir[u] = DIR_UP;
            s.pi[u] = 0.0;
            s.source[e] = u as u32;
            s.target[e] = root as u32;
            s.flow[e] = sup;
            s.cost[e] = 0.0;
        } else {
            s.pred_dir[u] = DIR_DOWN;
            s.pi[u] = art_cost;
            s.source[e] = root as u32;
            s.target[e] = u as u32;
            s.flow[e] = -sup;
            s.cost[e] = art_cost;
        }
    }

    while s.find_entering_arc() {
        s.find_join_node();
        let change = s.find_leaving_arc();
        assert!(s.delta < INF, "transport problem is unbounded");
        s.change_flow(change);
        if change {
            s.update_tree_structure();
            s.update_potential();
        }
    }

    let mut flows = Vec::new();
    for a in 0..arc_num {
        if s.flow[a] > 0 {
            flows.push((a / n, a % n, s.flow[a]));
        }
    }
    debug_assert!((arc_num..all).all(|e| s.flow[e] == 0), "artificial flow left");
    Solution { flows }
}

impl Simplex {
    #[inline]
    fn reduced(&self, e: usize) -> f64 {
        self.state[e] as f64
            * (self.cost[e] + self.pi[self.source[e] as usize] - self.pi[self.target[e] as usize])
    }

    fn find_entering_arc(&mut self) -> bool {
        let mut min = -self.eps;
        let mut found = false;
        let mut cnt = self.block_size;
        let total = self.search_arc_num;
        let mut e = self.next_arc;
        for _ in 0..total {
            let c = self.reduced(e);
            if c < min {
                min = c;
                self.in_arc = e;
                found = true;
            }
            e += 1;
            if e == total {
                e = 0;
            }
            cnt -= 1;
            if cnt == 0 {
                if found {
                    self.next_arc = e;
                    return true;
                }
                cnt = self.block_size;
            }
        }
        if found {
            self.next_arc = e;
        }
        found
    }

    fn find_join_node(&mut self) {
        let mut u = self.source[self.in_arc] as usize;
        let mut v = self.target[self.in_arc] as usize;
        while u != v {
            if self.succ_num[u] < self.succ_num[v] {
                u = self.parent[u];
            } else {
                v = self.parent[v];
            }
        }
        self.join = u;
    }

    fn find_leaving_arc(&mut self) -> bool {
        let (first, second) = if self.state[self.in_arc] == STATE_LOWER {
            (self.source[self.in_arc] as usize, self.target[self.in_arc] as usize)
        } else {
            (self.target[self.in_arc] as usize, self.source[self.in_arc] as usize)
        };
        self.delta = INF;
        let mut result = 0;
        let mut u = first;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_DOWN { INF } else { self.flow[e] };
            if d < self.delta {
                self.delta = d;
                self.u_out = u;
                result = 1;
            }
            u = self.parent[u];
        }
        let mut u = second;
        while u != self.join {
            let e = self.pred[u];
            let d = if self.pred_dir[u] == DIR_UP { INF } else { self.flow[e] };
            if d <= self.delta {
                self.delta = d;
                self.u_out = u;
                result = 2;
            }
            u = self.parent[u];
        }
        if result == 1 {
            self.u_in = first;
            self.v_in = second;
        } else {
            self.u_in = second;
            self.v_in = first;
        }
        result != 0
    }

    fn change_flow(&mut self, change: bool) {
        if self.delta > 0 {
            let val = self.state[self.in_arc] as i64 * self.delta;
            self.flow[self.in_arc] += val;
            let mut u = self.source[self.in_arc] as usize;
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] -= self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
            let mut u = self.target[self.in_arc] as usize;
            while u != self.join {
                let e = self.pred[u];
                self.flow[e] += self.pred_dir[u] as i64 * val;
                u = self.parent[u];
            }
        }
        if change {
            self.state[self.in_arc] = STATE_TREE;
            let e = self.pred[self.u_out];
            self.state[e] = if self.flow[e] == 0 { STATE_LOWER } else { STATE_UPPER };
        } else {
            self.state[self.in_arc] = -self.state[self.in_arc];
        }
    }

    fn update_tree_structure(&mut self) {
        let u_in = self.u_in;
        let v_in = self.v_in;
        let u_out = self.u_out;
        let join = self.join;
        let old_rev_thread = self.rev_thread[u_out];
        let old_succ_num = self.succ_num[u_out];
        let old_last_succ = self.last_succ[u_out];
        let v_out = self.parent[u_out];

        if u_in == u_out {
            self.parent[u_in] = v_in;
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source[self.in_arc] as usize { DIR_UP } else { DIR_DOWN };
            if self.thread[v_in] != u_out {
                let mut after = self.thread[old_last_succ];
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
                after = self.thread[v_in];
                self.thread[v_in] = u_out;
                self.rev_thread[u_out] = v_in;
                self.thread[old_last_succ] = after;
                self.rev_thread[after] = old_last_succ;
            }
        } else {
            let thread_continue =
                if old_rev_thread == v_in { self.thread[old_last_succ] } else { self.thread[v_in] };
            let mut stem = u_in;
            let mut par_stem = v_in;
            let mut last = self.last_succ[u_in];
            let mut after = self.thread[last];
            self.thread[v_in] = u_in;
            self.dirty_revs.clear();
            self.dirty_revs.push(v_in);
            while stem != u_out {
                let next_stem = self.parent[stem];
                self.thread[last] = next_stem;
                self.dirty_revs.push(last);
                let before = self.rev_thread[stem];
                self.thread[before] = after;
                self.rev_thread[after] = before;
                self.parent[stem] = par_stem;
                par_stem = stem;
                stem = next_stem;
                last = if self.last_succ[stem] == self.last_succ[par_stem] {
                    self.rev_thread[par_stem]
                } else {
                    self.last_succ[stem]
                };
                after = self.thread[last];
            }
            self.parent[u_out] = par_stem;
            self.thread[last] = thread_continue;
            self.rev_thread[thread_continue] = last;
            self.last_succ[u_out] = last;

            if old_rev_thread != v_in {
                self.thread[old_rev_thread] = after;
                self.rev_thread[after] = old_rev_thread;
            }

            for k in 0..self.dirty_revs.len() {
                let u = self.dirty_revs[k];
                let t = self.thread[u];
                self.rev_thread[t] = u;
            }

            let mut tmp_sc = 0usize;
            let tmp_ls = self.last_succ[u_out];
            let mut u = u_out;
            while u != u_in {
                let p = self.parent[u];
                self.pred[u] = self.pred[p];
                self.pred_dir[u] = -self.pred_dir[p];
                tmp_sc = tmp_sc + self.succ_num[u] - self.succ_num[p];
                self.succ_num[u] = tmp_sc;
                self.last_succ[p] = tmp_ls;
                u = p;
            }
            self.pred[u_in] = self.in_arc;
            self.pred_dir[u_in] = if u_in == self.source[self.in_arc] as usize { DIR_UP } else { DIR_DOWN };
            self.succ_num[u_in] = old_succ_num;
        }

        let up_limit_out = if self.last_succ[join] == v_in { join } else { NONE };
        let last_succ_out = self.last_succ[u_out];
        let mut u = v_in;
        while u != NONE && self.last_succ[u] == v_in {
            self.last_succ[u] = last_succ_out;
            u = self.parent[u];
        }

        if join != old_rev_thread && v_in != old_rev_thread {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = old_rev_thread;
                u = self.parent[u];
            }
        } else if last_succ_out != old_last_succ {
            let mut u = v_out;
            while u != up_limit_out && self.last_succ[u] == old_last_succ {
                self.last_succ[u] = last_succ_out;
                u = self.parent[u];
            }
        }

        let mut u = v_in;
        while u != join {
            self.succ_num[u] += old_succ_num;
            u = self.parent[u];
        }
        let mut u = v_out;
        while u != join {
            self.succ_num[u] -= old_succ_num;
            u = self.parent[u];
        }
    }

    fn update_potential(&mut self) {
        let u_in = self.u_in;
        let sigma = self.pi[self.v_in] - self.pi[u_in] - self.pred_dir[u_in] as f64 * self.cost[self.in_arc];
        let end = self.thread[self.last_succ[u_in]];
        let mut u = u_in;
        while u != end {
            self.pi[u] += sigma;
            u = self.thread[u];
        }
    }
}
