use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;
use std::time::{Duration, Instant};

use crossbeam_channel::{Receiver, Sender};

use super::cancel::CancelToken;
use super::lm::SyntheticLM;
use super::tree::NodeId;
use crate::types::TokenId;

#[derive(Debug, Clone, Copy)]
pub(crate) enum Work {
    /// Generate `count` tokens one forward at a time.
    Draft { count: usize },
    /// One batched target forward checking `prompt[check_from..]` and producing the next token.
    Verify { check_from: usize },
}

pub(crate) struct Job {
    pub node: NodeId,
    pub model: Arc<SyntheticLM>,
    pub work: Work,
    pub prompt: Arc<Vec<TokenId>>,
    pub first_forward: bool,
    pub cancel: CancelToken,
    pub progress: Arc<Mutex<Vec<TokenId>>>,
}

#[derive(Debug)]
pub(crate) enum Report {
    Started { node: NodeId, worker: usize, at: Duration },
    Drafted { node: NodeId, len: usize, at: Duration },
    Done { node: NodeId, ret: Vec<TokenId>, at: Duration },
    Aborted,
}

/// Concurrent forwards of one pool, with the high-water mark.
#[derive(Debug, Default)]
pub(crate) struct Gauge {
    now: AtomicUsize,
    peak: AtomicUsize,
}

impl Gauge {
    fn enter(&self) {
        let n = self.now.fetch_add(1, Ordering::SeqCst) + 1;
        self.peak.fetch_max(n, Ordering::SeqCst);
    }

    fn leave(&self) {
        self.now.fetch_sub(1, Ordering::SeqCst);
    }

    pub fn peak(&self) -> usize {
        self.peak.load(Ordering::SeqCst)
    }
}

/// Fixed-size worker threads draining one FIFO job channel.
pub(crate) struct Pool {
    tx: Option<Sender<Job>>,
    handles: Vec<JoinHandle<()>>,
    pub gauge: Arc<Gauge>,
}

impl Pool {
    pub fn spawn(name: &str, threads: usize, first_worker_id: usize, clock: Instant, reports: Sender<Report>) -> Pool {
        let (tx, rx) = crossbeam_channel::unbounded::<Job>();
        let gauge = Arc::new(Gauge::default());
        let handles = (0..threads)
            .map(|i| {
                let rx = rx.clone();
                let reports = reports.clone();
                let gauge = gauge.clone();
                let worker = first_worker_id + i;
                std::thread::Builder::new()
                    .name(format!("{name}-{i}"))
                    .spawn(move || worker_loop(worker, &rx, &reports, &gauge, clock))
                    .expect("failed to spawn worker thread")
            })
            .collect();
        Pool {
            tx: Some(tx),
            handles,
            gauge,
        }
    }

    pub fn submit(&self, job: Job) {
        self.tx.as_ref().expect("pool is running").send(job).expect("workers exited early");
    }

    pub fn shutdown(mut self) {
        self.tx.take();
        for h in self.handles.drain(..) {
            let _ = h.join();
        }
    }
}

pub(crate) fn forward_duration(ms: f64) -> Duration {
    Duration::from_secs_f64(ms / 1000.0)
}

/// The target's output for `prompt`: if a token at or after `check_from`
/// disagrees with the target, the prefix before it plus the target's
/// correction; otherwise `prompt` plus the target's next token.
pub(crate) fn verify(model: &SyntheticLM, prompt: &[TokenId], check_from: usize) -> Vec<TokenId> {
    for i in check_from..prompt.len() {
        let y = model.next_token(&prompt[..i]);
        if y != prompt[i] {
            let mut out = prompt[..i].to_vec();
            out.push(y);
            return out;
        }
    }
    let mut out = prompt.to_vec();
    out.push(model.next_token(prompt));
    out
}

fn worker_loop(worker: usize, rx: &Receiver<Job>, reports: &Sender<Report>, gauge: &Gauge, clock: Instant) {
    while let Ok(job) = rx.recv() {
        let report = run_job(worker, &job, reports, gauge, clock).unwrap_or(Report::Aborted);
        // The orchestrator may already have returned; nothing left to tell it.
        let _ = reports.send(report);
    }
}

fn run_job(worker: usize, job: &Job, reports: &Sender<Report>, gauge: &Gauge, clock: Instant) -> Option<Report> {
    match job.work {
        Work::Verify { check_from } => {
            let at = job.cancel.run_unless_cancelled(|| clock.elapsed())?;
            let _ = reports.send(Report::Started {
                node: job.node,
                worker,
                at,
            });
            gauge.enter();
            let completed = job.cancel.wait_for(forward_duration(job.model.profile.forward_ms(job.first_forward)));
            gauge.leave();
            if !completed {
                return None;
            }
            let ret = verify(&job.model, &job.prompt, check_from);
            let at = job.cancel.run_unless_cancelled(|| clock.elapsed())?;
            Some(Report::Done { node: job.node, ret, at })
        }
        Work::Draft { count } => {
            let mut seq = job.prompt.to_vec();
            for i in 0..count {
                job.cancel.run_unless_cancelled(|| ())?;
                gauge.enter();
                let first = job.first_forward && i == 0;
                let completed = job.cancel.wait_for(forward_duration(job.model.profile.forward_ms(first)));
                gauge.leave();
                if !completed {
                    return None;
                }
                let tok = job.model.next_token(&seq);
                seq.push(tok);
                let at = job.cancel.run_unless_cancelled(|| {
                    job.progress.lock().unwrap().push(tok);
                    clock.elapsed()
                })?;
                let _ = reports.send(Report::Drafted {
                    node: job.node,
                    len: seq.len(),
                    at,
                });
            }
            let at = job.cancel.run_unless_cancelled(|| clock.elapsed())?;
            Some(Report::Done {
                node: job.node,
                ret: seq,
                at,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::ForwardProfile;

    #[test]
    fn verify_keeps_matching_prefix_and_corrects_first_mismatch() {
        let t = SyntheticLM::target(2, ForwardProfile::uniform(1.0).unwrap(), 4);
        let mut good = vec![7u32];
        for _ in 0..4 {
            good.push(t.next_token(&good));
        }
        let full = verify(&t, &good, 1);
        assert_eq!(&full[..5], &good[..]);
        assert_eq!(full.len(), 6);

        let mut bad = good.clone();
        bad[3] ^= 1;
        let fixed = verify(&t, &bad, 1);
        assert_eq!(fixed, good[..4].to_vec());
        // Positions before check_from are trusted.
        let trusted = verify(&t, &bad, 4);
        assert_eq!(trusted[3], bad[3]);
        assert_eq!(trusted.len(), 5);
    }
}
