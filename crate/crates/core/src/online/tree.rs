use std::fmt;
use std::sync::{Arc, Mutex};

use serde::Serialize;

use super::cancel::CancelToken;
use crate::types::TokenId;

pub type NodeId = usize;

/// The index path `J = (j1, ..., jk)` naming a thread; each child appends one
/// model index. The root (the prompt) has the empty path.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize)]
pub struct ThreadLabel(pub Vec<usize>);

impl ThreadLabel {
    pub fn child(&self, j: usize) -> ThreadLabel {
        let mut v = self.0.clone();
        v.push(j);
        ThreadLabel(v)
    }

    pub fn last(&self) -> Option<usize> {
        self.0.last().copied()
    }

    pub fn depth(&self) -> usize {
        self.0.len()
    }
}

impl fmt::Display for ThreadLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.0.iter().map(|j| j.to_string()).collect();
        write!(f, "({})", parts.join(","))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NodeState {
    Running,
    Finished,
    Cancelled,
}

#[derive(Debug)]
pub struct ThreadNode {
    pub label: ThreadLabel,
    pub parent: Option<NodeId>,
    pub children: Vec<NodeId>,
    /// Prompt plus every token generated so far along this path.
    pub prompt: Arc<Vec<TokenId>>,
    /// Tokens this thread has produced, visible while it is still running.
    pub new_tokens: Arc<Mutex<Vec<TokenId>>>,
    /// `prompt` extended (or, after a correction, truncated) by this thread's output.
    pub ret: Option<Arc<Vec<TokenId>>>,
    pub state: NodeState,
    pub is_verifier: bool,
    pub cancel: CancelToken,
}

impl ThreadNode {
    pub fn first_new_token(&self) -> Option<TokenId> {
        self.new_tokens.lock().unwrap().first().copied()
    }
}

/// Arena of threads rooted at the prompt.
#[derive(Debug)]
pub struct ThreadTree {
    nodes: Vec<ThreadNode>,
}

impl ThreadTree {
    pub const ROOT: NodeId = 0;

    /// A tree holding only the finished root, whose return is `prompt`.
    pub fn new(prompt: Vec<TokenId>) -> Self {
        let prompt = Arc::new(prompt);
        ThreadTree {
            nodes: vec![ThreadNode {
                label: ThreadLabel::default(),
                parent: None,
                children: Vec::new(),
                prompt: prompt.clone(),
                new_tokens: Arc::default(),
                ret: Some(prompt),
                state: NodeState::Finished,
                is_verifier: false,
                cancel: CancelToken::new(),
            }],
        }
    }

    /// Add a running child `parent ⊕ (j)` whose prompt is the parent's return.
    pub fn add_child(&mut self, parent: NodeId, j: usize) -> NodeId {
        let id = self.nodes.len();
        let p = &self.nodes[parent];
        let prompt = p.ret.clone().expect("children start from a finished parent");
        let label = p.label.child(j);
        self.nodes.push(ThreadNode {
            label,
            parent: Some(parent),
            children: Vec::new(),
            prompt,
            new_tokens: Arc::default(),
            ret: None,
            state: NodeState::Running,
            is_verifier: false,
            cancel: CancelToken::new(),
        });
        self.nodes[parent].children.push(id);
        id
    }

    pub fn node(&self, id: NodeId) -> &ThreadNode {
        &self.nodes[id]
    }

    pub fn node_mut(&mut self, id: NodeId) -> &mut ThreadNode {
        &mut self.nodes[id]
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Child of `parent` generated by model `j`, if it has been initiated.
    pub fn child_by_model(&self, parent: NodeId, j: usize) -> Option<NodeId> {
        self.nodes[parent]
            .children
            .iter()
            .copied()
            .find(|&c| self.nodes[c].label.last() == Some(j))
    }

    /// Whether `id` or any ancestor has been cancelled.
    pub fn is_dead(&self, mut id: NodeId) -> bool {
        loop {
            if self.nodes[id].state == NodeState::Cancelled {
                return true;
            }
            match self.nodes[id].parent {
                Some(p) => id = p,
                None => return false,
            }
        }
    }

    /// Cancel `id` and every descendant; returns how many threads changed state.
    pub fn cancel_subtree(&mut self, id: NodeId) -> usize {
        let mut out = Vec::new();
        self.cancel_subtree_into(id, &mut out);
        out.len()
    }

    /// Like [`ThreadTree::cancel_subtree`], appending `(node, was_running)`
    /// for each thread that changed state.
    pub(crate) fn cancel_subtree_into(&mut self, id: NodeId, out: &mut Vec<(NodeId, bool)>) {
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            let node = &mut self.nodes[n];
            stack.extend(node.children.iter().copied());
            if node.state == NodeState::Cancelled {
                continue;
            }
            let was_running = node.state == NodeState::Running;
            node.state = NodeState::Cancelled;
            node.is_verifier = false;
            node.cancel.cancel();
            out.push((n, was_running));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn finish(tree: &mut ThreadTree, id: NodeId) {
        let n = tree.node_mut(id);
        n.ret = Some(n.prompt.clone());
        n.state = NodeState::Finished;
    }

    #[test]
    fn labels_extend_parents() {
        let mut t = ThreadTree::new(vec![1]);
        let a = t.add_child(ThreadTree::ROOT, 1);
        finish(&mut t, a);
        let b = t.add_child(a, 2);
        assert_eq!(t.node(b).label, ThreadLabel(vec![1, 2]));
        assert_eq!(t.node(b).label.to_string(), "(1,2)");
        assert_eq!(t.child_by_model(a, 2), Some(b));
        assert_eq!(t.child_by_model(a, 1), None);
    }

    #[test]
    fn cancel_counts() {
        let mut t = ThreadTree::new(vec![1]);
        let leaf = t.add_child(ThreadTree::ROOT, 2);
        assert_eq!(t.cancel_subtree(leaf), 1);
        assert_eq!(t.cancel_subtree(leaf), 0);

        // Full binary subtree of depth 3.
        let top = t.add_child(ThreadTree::ROOT, 1);
        finish(&mut t, top);
        let mut frontier = vec![top];
        for _ in 0..2 {
            let mut next = Vec::new();
            for &p in &frontier {
                for j in 1..=2 {
                    let c = t.add_child(p, j);
                    finish(&mut t, c);
                    next.push(c);
                }
            }
            frontier = next;
        }
        let deepest = frontier[3];
        assert_eq!(t.cancel_subtree(top), 7);
        assert!(t.is_dead(deepest));
        assert!(t.node(deepest).cancel.is_cancelled());
        assert!(!t.is_dead(ThreadTree::ROOT));
    }
}
