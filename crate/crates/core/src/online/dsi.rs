use std::sync::Arc;
use std::time::{Duration, Instant};

use crossbeam_channel::Receiver;

use super::lm::SyntheticLM;
use super::pool::{Job, Pool, Report, Work};
use super::tree::{NodeId, NodeState, ThreadTree};
use super::{DsiOutcome, OnlineConfig, OnlineStats};
use crate::analytic::min_lookahead;
use crate::error::{Error, Result};
use crate::trace::{sort_events, EventKind, TraceEvent};
use crate::types::{TokenId, TokenSeq};

enum Verifier {
    Node(NodeId),
    /// The verifier is the target child of this thread, which has not finished yet.
    Pending(NodeId),
}

struct Orchestrator<'a> {
    cfg: &'a OnlineConfig,
    models: Vec<Arc<SyntheticLM>>,
    m: usize,
    p0: usize,
    tree: ThreadTree,
    targets: Pool,
    drafters: Pool,
    clock: Instant,
    verifier: Verifier,
    v: usize,
    first_dispatched: Vec<bool>,
    targets_live: usize,
    emitted: usize,
    trace: Vec<TraceEvent>,
    stats: OnlineStats,
}

/// Execute DSI over `models` (drafters first, the target last) on real threads.
pub fn run_dsi_online(models: &[SyntheticLM], cfg: &OnlineConfig) -> Result<DsiOutcome> {
    cfg.validate()?;
    let m = models.len();
    if m < 2 {
        return Err(Error::InvalidConfig("DSI needs at least one drafter and a target".into()));
    }
    for (i, model) in models.iter().enumerate() {
        if model.model_index != i + 1 {
            return Err(Error::InvalidConfig(format!(
                "model at slot {} has index {}",
                i + 1,
                model.model_index
            )));
        }
        if model.is_target() != (i + 1 == m) {
            return Err(Error::InvalidConfig("exactly the last model must be the target".into()));
        }
    }

    let clock = Instant::now();
    let (tx, rx) = crossbeam_channel::unbounded();
    let targets = Pool::spawn("target", cfg.sp_degree, 0, clock, tx.clone());
    let drafters = Pool::spawn("drafter", cfg.drafter_threads * (m - 1), cfg.sp_degree, clock, tx);
    let mut o = Orchestrator {
        cfg,
        models: models.iter().cloned().map(Arc::new).collect(),
        m,
        p0: cfg.prompt.len(),
        tree: ThreadTree::new(cfg.prompt.clone()),
        targets,
        drafters,
        clock,
        verifier: Verifier::Pending(ThreadTree::ROOT),
        v: 0,
        first_dispatched: vec![false; m],
        targets_live: 0,
        emitted: 0,
        trace: Vec::new(),
        stats: OnlineStats::default(),
    };
    let result = o.run(&rx);
    o.tree.cancel_subtree(ThreadTree::ROOT);
    let Orchestrator {
        targets,
        drafters,
        mut stats,
        mut trace,
        v,
        ..
    } = o;
    sort_events(&mut trace);
    stats.peak_target_in_flight = targets.gauge.peak();
    targets.shutdown();
    drafters.shutdown();
    let (tokens, wall) = result?;
    stats.verifier_generations = v;
    Ok(DsiOutcome {
        tokens: TokenSeq(tokens),
        wall_ms: wall.as_secs_f64() * 1000.0,
        trace,
        stats,
    })
}

impl Orchestrator<'_> {
    fn run(&mut self, rx: &Receiver<Report>) -> Result<(Vec<TokenId>, Duration)> {
        self.spawn_children(ThreadTree::ROOT, Duration::ZERO)?;
        self.relabel_pending(ThreadTree::ROOT, Duration::ZERO);
        loop {
            let report = rx
                .recv()
                .map_err(|_| Error::InvalidConfig("all workers exited before generation finished".into()))?;
            match report {
                Report::Started { node, worker, at } => {
                    let pos = self.gen_len(&self.tree.node(node).prompt) + 1;
                    self.event(at, EventKind::VerifyDispatch, pos, Some(worker), node);
                }
                Report::Drafted { node, len, at } => {
                    self.stats.drafter_forwards += 1;
                    self.event(at, EventKind::DraftDone, len - self.p0, None, node);
                }
                Report::Aborted => {}
                Report::Done { node, ret, at } => {
                    if self.tree.node(node).state != NodeState::Running {
                        continue;
                    }
                    if let Some(out) = self.on_finish(node, ret, at)? {
                        return Ok((out[self.p0..].to_vec(), self.clock.elapsed()));
                    }
                }
            }
        }
    }

    fn gen_len(&self, seq: &[TokenId]) -> usize {
        seq.len() - self.p0
    }

    fn is_target(&self, node: NodeId) -> bool {
        self.tree.node(node).label.last() == Some(self.m)
    }

    fn event(&mut self, at: Duration, kind: EventKind, position: usize, server: Option<usize>, node: NodeId) {
        let mut e = TraceEvent::new(at.as_secs_f64() * 1000.0, kind, position)
            .with_label(self.tree.node(node).label.to_string());
        e.server_id = server;
        self.trace.push(e);
    }

    /// A thread finished generating.
    fn on_finish(&mut self, node: NodeId, ret: Vec<TokenId>, at: Duration) -> Result<Option<Vec<TokenId>>> {
        let target = self.is_target(node);
        let n = self.tree.node_mut(node);
        n.state = NodeState::Finished;
        n.ret = Some(Arc::new(ret));
        if target {
            self.targets_live -= 1;
            self.stats.target_forwards += 1;
            let pos = self.gen_len(&self.tree.node(node).prompt) + 1;
            self.event(at, EventKind::VerifyDone, pos, None, node);
        }
        let produced = self.gen_len(self.tree.node(node).ret.as_ref().unwrap());
        if produced < self.cfg.n_tokens {
            self.spawn_children(node, at)?;
        }
        match self.verifier {
            Verifier::Pending(p) if p == node => {
                self.relabel_pending(node, at);
                Ok(None)
            }
            Verifier::Node(v) if v == node => self.verifier_step(node, at),
            _ => Ok(None),
        }
    }

    /// Verify against the finished thread, repeated while the newly labeled verifier has already finished.
    fn verifier_step(&mut self, mut node: NodeId, at: Duration) -> Result<Option<Vec<TokenId>>> {
        loop {
            let ret = self.tree.node(node).ret.clone().expect("verifier finished");
            let produced = self.gen_len(&ret);
            for pos in self.emitted + 1..=produced {
                self.event(at, EventKind::TokenEmitted, pos, None, node);
            }
            self.emitted = self.emitted.max(produced);
            if produced == self.cfg.n_tokens {
                return Ok(Some(ret.to_vec()));
            }

            let parent = self.tree.node(node).parent.expect("verifier has a parent");
            let corrected = ret.len() <= self.tree.node(node).prompt.len();
            let next = *ret.last().unwrap();
            let siblings: Vec<NodeId> = self.tree.node(parent).children.iter().copied().filter(|&s| s != node).collect();

            for &s in &siblings {
                if self.tree.node(s).state == NodeState::Cancelled {
                    continue;
                }
                let agrees = !corrected && self.tree.node(s).first_new_token() == Some(next);
                let skip = self.cfg.fault.skip_mismatch_cancel && !corrected;
                if !agrees && !skip {
                    self.event(at, EventKind::Reject, produced, None, s);
                    self.cancel(s);
                }
            }
            let j_star = siblings
                .iter()
                .filter(|&&s| self.tree.node(s).state != NodeState::Cancelled)
                .filter_map(|&s| self.tree.node(s).label.last().map(|j| (j, s)))
                .min();
            let (j_star, base) = j_star.unwrap_or((self.m, node));
            for &s in siblings.iter().chain(std::iter::once(&node)) {
                let j = self.tree.node(s).label.last().unwrap();
                if j > j_star && self.tree.node(s).state != NodeState::Cancelled {
                    self.cancel(s);
                }
            }
            if j_star < self.m {
                self.event(at, EventKind::Accept, produced, None, base);
            }

            self.tree.node_mut(node).is_verifier = false;
            match self.tree.child_by_model(base, self.m) {
                Some(c) => {
                    self.label_verifier(c, at);
                    if self.tree.node(c).state == NodeState::Finished {
                        node = c;
                        continue;
                    }
                    return Ok(None);
                }
                None => {
                    self.verifier = Verifier::Pending(base);
                    return Ok(None);
                }
            }
        }
    }

    fn label_verifier(&mut self, node: NodeId, at: Duration) {
        self.tree.node_mut(node).is_verifier = true;
        self.verifier = Verifier::Node(node);
        self.v += 1;
        self.stats.relabels += 1;
        let pos = self.gen_len(&self.tree.node(node).prompt) + 1;
        self.event(at, EventKind::Relabel, pos, None, node);
    }

    fn relabel_pending(&mut self, parent: NodeId, at: Duration) {
        let c = self
            .tree
            .child_by_model(parent, self.m)
            .expect("a pending verifier's parent spawns a target child");
        self.label_verifier(c, at);
    }

    fn cancel(&mut self, node: NodeId) {
        let mut changed = Vec::new();
        self.tree.cancel_subtree_into(node, &mut changed);
        for (id, was_running) in changed {
            if was_running && self.is_target(id) {
                self.targets_live -= 1;
            }
            self.stats.cancelled_threads += 1;
            let pos = self.gen_len(&self.tree.node(id).prompt) + 1;
            // Stamped after the flags are set, so it follows any forward a worker managed to record.
            self.event(self.clock.elapsed(), EventKind::Cancel, pos, None, id);
        }
    }

    /// Line 6, with lookahead batching: drafters propose up to `lookahead`
    /// tokens and the target child verifies the parent's block.
    fn spawn_children(&mut self, parent: NodeId, at: Duration) -> Result<()> {
        let ret = self.tree.node(parent).ret.clone().unwrap();
        let produced = self.gen_len(&ret);
        let parent_is_drafter = parent != ThreadTree::ROOT && !self.is_target(parent);
        let check_from = if parent_is_drafter {
            self.tree.node(parent).prompt.len() + 1
        } else {
            ret.len()
        };
        let t = self.tree.add_child(parent, self.m);
        self.stats.threads_spawned += 1;
        self.event(at, EventKind::Spawn, produced + 1, None, t);
        self.dispatch(t, Work::Verify { check_from })?;

        let count = self.cfg.lookahead.min(self.cfg.n_tokens.saturating_sub(produced + 1));
        if count > 0 {
            for j in 1..self.m {
                let d = self.tree.add_child(parent, j);
                self.stats.threads_spawned += 1;
                self.event(at, EventKind::Spawn, produced + 1, None, d);
                self.dispatch(d, Work::Draft { count })?;
            }
        }
        Ok(())
    }

    fn dispatch(&mut self, node: NodeId, work: Work) -> Result<()> {
        let j = self.tree.node(node).label.last().unwrap();
        let model = self.models[j - 1].clone();
        if matches!(work, Work::Verify { .. }) {
            if self.targets_live >= self.cfg.sp_degree {
                if self.cfg.strict_pool {
                    let drafter_tpot = self.models[0].profile.tpot_ms;
                    return Err(Error::PoolExhausted {
                        sp_degree: self.cfg.sp_degree,
                        lookahead: self.cfg.lookahead,
                        min_lookahead: min_lookahead(model.profile.tpot_ms, drafter_tpot, self.cfg.sp_degree),
                    });
                }
                self.stats.queued_target_jobs += 1;
            }
            self.targets_live += 1;
        }
        let first_forward = !std::mem::replace(&mut self.first_dispatched[j - 1], true);
        let n = self.tree.node(node);
        let job = Job {
            node,
            model,
            work,
            prompt: n.prompt.clone(),
            first_forward,
            cancel: n.cancel.clone(),
            progress: n.new_tokens.clone(),
        };
        match work {
            Work::Verify { .. } => self.targets.submit(job),
            Work::Draft { .. } => self.drafters.submit(job),
        }
        Ok(())
    }
}
