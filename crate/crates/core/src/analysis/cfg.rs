use crate::ir::Function;

/// Control-flow graph over block indices; block 0 is the entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub succs: Vec<Vec<usize>>,
    pub preds: Vec<Vec<usize>>,
}

impl Cfg {
    pub fn from_edges(n: usize, edges: &[(usize, usize)]) -> Cfg {
        let mut succs = vec![Vec::new(); n];
        let mut preds = vec![Vec::new(); n];
        for &(a, b) in edges {
            if !succs[a].contains(&b) {
                succs[a].push(b);
                preds[b].push(a);
            }
        }
        Cfg { succs, preds }
    }

    /// Edges of `f`; branches to unknown labels are ignored.
    pub fn of_function(f: &Function) -> Cfg {
        let mut edges = Vec::new();
        for (bi, b) in f.blocks.iter().enumerate() {
            for s in b.successors() {
                if let Some(si) = f.block_index(s) {
                    edges.push((bi, si));
                }
            }
        }
        Cfg::from_edges(f.blocks.len(), &edges)
    }

    pub fn len(&self) -> usize {
        self.succs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.succs.is_empty()
    }

    /// Blocks reachable from the entry in reverse postorder.
    pub fn reverse_postorder(&self) -> Vec<usize> {
        if self.is_empty() {
            return Vec::new();
        }
        let mut seen = vec![false; self.len()];
        let mut post = Vec::with_capacity(self.len());
        let mut stack = vec![(0usize, 0usize)];
        seen[0] = true;
        while let Some(top) = stack.last_mut() {
            let node = top.0;
            let next = self.succs[node].get(top.1).copied();
            top.1 += 1;
            if let Some(s) = next {
                if !seen[s] {
                    seen[s] = true;
                    stack.push((s, 0));
                }
            } else {
                post.push(node);
                stack.pop();
            }
        }
        post.reverse();
        post
    }

    pub fn reachable(&self) -> Vec<bool> {
        let mut r = vec![false; self.len()];
        for b in self.reverse_postorder() {
            r[b] = true;
        }
        r
    }
}
