use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

use super::{Recorder, SimOptions, SimResult};
use crate::acceptance::AcceptanceTape;
use crate::rng::SimRng;
use crate::trace::EventKind;
use crate::types::{AcceptanceModel, ForwardProfile, SimConfig, Ticks};

// Declaration order is the tie-break at equal times: a verification that
// rejects must cancel a draft finishing at the same instant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Due {
    VerifyDone,
    DraftDone,
}

#[derive(Debug, PartialEq, Eq, PartialOrd, Ord)]
struct Pending {
    at: Ticks,
    due: Due,
    seq: u64,
    epoch: u64,
    /// Task index for `VerifyDone`, draft position for `DraftDone`.
    what: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum TaskState {
    Queued,
    Running(usize),
    Done,
}

/// One target forward. It checks drafts `lo..=min(hi, N-1)` against its own
/// outputs and produces the target token at `hi`.
#[derive(Debug, Clone, Copy)]
struct Task {
    lo: usize,
    hi: usize,
    state: TaskState,
}

struct Engine<'a> {
    n: usize,
    k: usize,
    target: &'a ForwardProfile,
    drafter: &'a ForwardProfile,
    tape: AcceptanceTape,
    rec: Recorder,
    queue_events: BinaryHeap<Reverse<Pending>>,
    seq: u64,
    now: Ticks,
    epoch: u64,
    tasks: Vec<Task>,
    /// Index of the oldest unresolved task; tasks resolve strictly in order.
    verifier: usize,
    servers: Vec<Option<usize>>,
    waiting: VecDeque<usize>,
    /// Highest position whose draft has finished in this epoch.
    drafted: usize,
    /// First draft position of the block currently being drafted.
    block_start: usize,
    target_started: bool,
    drafter_started: bool,
    target_forwards: usize,
    drafter_forwards: usize,
    hidden: usize,
    peak: usize,
    queued: usize,
    emitted: usize,
    checks: Vec<(usize, bool)>,
    done: bool,
}

/// DSI with one drafter and `sp_degree` target servers.
///
/// Every resynchronization at `c` verified tokens starts a target forward for
/// position `c+1` and restarts the drafter at `c+1`. The drafter runs ahead
/// continuously in blocks of `lookahead` drafts, stopping after the block
/// that covers position `N-1`. Each completed block dispatches one
/// verification that also yields the target token after the block. Verifications resolve in order. The first rejected draft emits the
/// target's correction, cancels everything speculative after it and
/// resynchronizes. A verification that finds no free server waits in FIFO
/// order, which is the only way latency can exceed the analytic bound.
pub fn simulate_dsi_with(
    target: &ForwardProfile,
    drafter: &ForwardProfile,
    config: &SimConfig,
    model: &AcceptanceModel,
    rng: &mut SimRng,
    opts: SimOptions,
) -> SimResult {
    let n = config.n_tokens;
    assert!(n >= 1 && config.lookahead >= 1 && config.sp_degree >= 1);
    let mut e = Engine {
        n,
        k: config.lookahead,
        target,
        drafter,
        tape: AcceptanceTape::new(model, rng.clone()),
        rec: Recorder::new(opts.record_trace),
        queue_events: BinaryHeap::new(),
        seq: 0,
        now: Ticks::ZERO,
        epoch: 0,
        tasks: Vec::new(),
        verifier: 0,
        servers: vec![None; config.sp_degree],
        waiting: VecDeque::new(),
        drafted: 0,
        block_start: 1,
        target_started: false,
        drafter_started: false,
        target_forwards: 0,
        drafter_forwards: 0,
        hidden: 0,
        peak: 0,
        queued: 0,
        emitted: 0,
        checks: Vec::new(),
        done: false,
    };
    e.resync(0);
    while !e.done {
        let Reverse(ev) = e.queue_events.pop().expect("simulation stalled before emitting all tokens");
        if ev.epoch != e.epoch {
            continue;
        }
        e.now = ev.at;
        match ev.due {
            Due::DraftDone => e.on_draft_done(ev.what),
            Due::VerifyDone => e.on_verify_done(ev.what),
        }
    }
    *rng = e.tape.into_rng();

    SimResult {
        total_latency_ms: e.now.as_ms(),
        total: e.now,
        tokens_emitted: e.emitted,
        target_forwards: e.target_forwards,
        drafter_forwards: e.drafter_forwards,
        hidden_target_forwards: e.hidden,
        peak_sp_in_use: e.peak,
        queued_dispatches: e.queued,
        checks: e.checks,
        trace: e.rec.finish(),
    }
}

impl Engine<'_> {
    fn schedule(&mut self, after: Ticks, due: Due, what: usize) {
        self.seq += 1;
        self.queue_events.push(Reverse(Pending {
            at: self.now + after,
            due,
            seq: self.seq,
            epoch: self.epoch,
            what,
        }));
    }

    fn resync(&mut self, verified: usize) {
        debug_assert_eq!(verified, self.emitted);
        debug_assert!(self.servers.iter().all(Option::is_none));
        self.epoch += 1;
        self.tasks.clear();
        self.waiting.clear();
        self.verifier = 0;
        if verified == self.n {
            self.done = true;
            return;
        }
        self.drafted = verified;
        self.block_start = verified + 1;
        self.submit(verified + 1, verified + 1);
        if verified + 1 < self.n {
            self.start_draft(verified + 1);
        }
    }

    fn start_draft(&mut self, pos: usize) {
        let lat = self.drafter.forward_ticks(!self.drafter_started);
        self.drafter_started = true;
        self.schedule(lat, Due::DraftDone, pos);
    }

    fn submit(&mut self, lo: usize, hi: usize) {
        let idx = self.tasks.len();
        self.tasks.push(Task {
            lo,
            hi,
            state: TaskState::Queued,
        });
        match self.servers.iter().position(Option::is_none) {
            Some(s) => self.start_task(idx, s),
            None => {
                self.queued += 1;
                self.waiting.push_back(idx);
            }
        }
    }

    fn start_task(&mut self, idx: usize, server: usize) {
        let lat = self.target.forward_ticks(!self.target_started);
        self.target_started = true;
        self.target_forwards += 1;
        self.servers[server] = Some(idx);
        self.tasks[idx].state = TaskState::Running(server);
        let busy = self.servers.iter().filter(|s| s.is_some()).count();
        self.peak = self.peak.max(busy);
        self.rec.push(self.now, EventKind::VerifyDispatch, self.tasks[idx].lo, Some(server));
        self.schedule(lat, Due::VerifyDone, idx);
    }

    fn on_draft_done(&mut self, pos: usize) {
        self.drafter_forwards += 1;
        self.drafted = pos;
        self.rec.push(self.now, EventKind::DraftDone, pos, None);
        if pos + 1 - self.block_start == self.k {
            self.submit(self.block_start + 1, (pos + 1).min(self.n));
            self.block_start = pos + 1;
        }
        // A block that has started is always drafted to full length, even past
        // position N-1, so dispatches stay `lookahead` drafts apart.
        if self.block_start < self.n {
            self.start_draft(pos + 1);
        }
    }

    fn on_verify_done(&mut self, idx: usize) {
        let TaskState::Running(server) = self.tasks[idx].state else {
            unreachable!("completion for a task that is not running");
        };
        self.tasks[idx].state = TaskState::Done;
        self.servers[server] = None;
        self.rec.push(self.now, EventKind::VerifyDone, self.tasks[idx].lo, Some(server));
        self.rec.push(self.now, EventKind::ServerFreed, self.tasks[idx].lo, Some(server));
        self.resolve();
        if !self.done {
            self.fill_servers();
        }
    }

    fn fill_servers(&mut self) {
        while let Some(s) = self.servers.iter().position(Option::is_none) {
            let Some(idx) = self.waiting.pop_front() else {
                break;
            };
            self.start_task(idx, s);
        }
    }

    fn emit(&mut self, pos: usize) {
        debug_assert_eq!(pos, self.emitted + 1);
        self.emitted = pos;
        self.rec.push(self.now, EventKind::TokenEmitted, pos, None);
    }

    fn resolve(&mut self) {
        while self.verifier < self.tasks.len() && self.tasks[self.verifier].state == TaskState::Done {
            let Task { lo, hi, .. } = self.tasks[self.verifier];
            for pos in lo..=hi.min(self.n - 1) {
                if pos > self.drafted {
                    // The drafter has not reached this position; the target's own token stands.
                    self.emit(pos);
                    self.cancel_after(self.verifier);
                    self.resync(pos);
                    return;
                }
                if self.tape.accepts(pos) {
                    self.checks.push((pos, true));
                    self.rec.push(self.now, EventKind::Accept, pos, None);
                    self.emit(pos);
                } else {
                    self.checks.push((pos, false));
                    self.rec.push(self.now, EventKind::Reject, pos, None);
                    self.emit(pos);
                    self.cancel_after(self.verifier);
                    self.resync(pos);
                    return;
                }
            }
            if hi == self.n {
                self.emit(hi);
                self.done = true;
                return;
            }
            self.hidden += 1;
            self.verifier += 1;
        }
    }

    fn cancel_after(&mut self, idx: usize) {
        for later in idx + 1..self.tasks.len() {
            let t = self.tasks[later];
            match t.state {
                TaskState::Running(s) => {
                    self.servers[s] = None;
                    self.rec.push(self.now, EventKind::Cancel, t.lo, Some(s));
                    self.rec.push(self.now, EventKind::ServerFreed, t.lo, Some(s));
                }
                TaskState::Queued => self.rec.push(self.now, EventKind::Cancel, t.lo, None),
                TaskState::Done => {}
            }
        }
    }
}
