//! Periodic refresh of bindings, kinetic blur regeneration and deadline sweeps.
//!
//! Each job runs at most once at a time. Its next start is scheduled when it
//! starts, at the job's interval scaled by a random factor in [0.9, 1.1].

use std::collections::{HashMap, HashSet};
use std::sync::Arc;
use std::time::Duration;

use chrono::TimeDelta;
use latebind_core::{evaluate, BindingId, ContentId, ContentKind, ContentStatus, Timestamp};
use parking_lot::Mutex;
use rand::Rng;
use tokio::task::JoinHandle;

use crate::refresh::{expire_if_due, refresh_once, regenerate_blur};
use crate::state::AppState;

pub const JITTER: f64 = 0.1;
const MIN_SLEEP: Duration = Duration::from_millis(5);

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Job {
    Binding(BindingId),
    Blur(ContentId),
    Expire(ContentId),
}

#[derive(Debug)]
struct Slot {
    next_due: Timestamp,
    in_flight: bool,
}

pub struct Scheduler {
    state: AppState,
    slots: Mutex<HashMap<Job, Slot>>,
}

/// Clears the in-flight flag even if the job panics.
struct InFlight {
    scheduler: Arc<Scheduler>,
    job: Job,
}

impl Drop for InFlight {
    fn drop(&mut self) {
        if let Some(slot) = self.scheduler.slots.lock().get_mut(&self.job) {
            slot.in_flight = false;
        }
        self.scheduler.state.wake.notify_one();
    }
}

fn jittered(interval: Duration) -> TimeDelta {
    let factor = rand::thread_rng().gen_range(1.0 - JITTER..=1.0 + JITTER);
    TimeDelta::from_std(interval.mul_f64(factor)).unwrap_or(TimeDelta::MAX)
}

impl Scheduler {
    pub fn new(state: AppState) -> Arc<Self> {
        Arc::new(Scheduler {
            state,
            slots: Mutex::new(HashMap::new()),
        })
    }

    /// Jobs that exist right now, with their intervals.
    fn wanted(&self, now: Timestamp) -> Vec<(Job, Duration)> {
        let store = &self.state.store;
        let mut jobs = Vec::new();
        let mut live = HashSet::new();
        for id in store.content_ids() {
            let _ = store.with_content(&id, |c| {
                if c.status != ContentStatus::Live {
                    return Ok(());
                }
                live.insert(id.clone());
                if evaluate(&c.policy, &c.view_state, now).is_expired() {
                    jobs.push((Job::Expire(id.clone()), self.state.config.kt_interval));
                } else if c.kt_enabled && c.kind == ContentKind::SelfDestruct && !c.policy.never_expires() {
                    jobs.push((Job::Blur(id.clone()), self.state.config.kt_interval));
                }
                Ok(())
            });
        }
        for b in store.bindings() {
            if live.contains(&b.content_id) {
                jobs.push((Job::Binding(b.binding_id), b.refresh_interval));
            }
        }
        jobs
    }

    /// Starts every job that is due at `now` and not already running.
    pub fn tick(self: &Arc<Self>, now: Timestamp) -> Vec<JoinHandle<()>> {
        let wanted = self.wanted(now);
        let mut handles = Vec::new();
        let mut slots = self.slots.lock();
        let keep: HashSet<&Job> = wanted.iter().map(|(j, _)| j).collect();
        slots.retain(|job, slot| slot.in_flight || keep.contains(job));
        for (job, interval) in &wanted {
            let slot = slots.entry(job.clone()).or_insert(Slot {
                next_due: now,
                in_flight: false,
            });
            if slot.in_flight || slot.next_due > now {
                continue;
            }
            slot.in_flight = true;
            slot.next_due = now + jittered(*interval);
            let guard = InFlight {
                scheduler: self.clone(),
                job: job.clone(),
            };
            handles.push(tokio::spawn(run_job(self.state.clone(), guard)));
        }
        handles
    }

    /// Earliest start among idle jobs.
    pub fn next_due(&self) -> Option<Timestamp> {
        self.slots
            .lock()
            .values()
            .filter(|s| !s.in_flight)
            .map(|s| s.next_due)
            .min()
    }

    /// Number of jobs currently known (running or waiting).
    pub fn job_count(&self) -> usize {
        self.slots.lock().len()
    }

    /// Runs until the task is dropped. Sleeps until the next due job, at
    /// most `scheduler_poll`, or until woken by a binding change.
    pub async fn run(self: Arc<Self>) {
        let poll = self.state.config.scheduler_poll;
        loop {
            let now = self.state.now();
            self.tick(now);
            let wait = self
                .next_due()
                .map_or(poll, |due| (due - now).to_std().unwrap_or(Duration::ZERO))
                .clamp(MIN_SLEEP, poll.max(MIN_SLEEP));
            tokio::select! {
                _ = tokio::time::sleep(wait) => {}
                _ = self.state.wake.notified() => {}
            }
        }
    }
}

async fn run_job(state: AppState, guard: InFlight) {
    let result = match &guard.job {
        Job::Binding(id) => refresh_once(&state, id).await.map(|_| ()),
        Job::Blur(id) => {
            let (st, id) = (state.clone(), id.clone());
            tokio::task::spawn_blocking(move || regenerate_blur(&st, &id).map(|_| ()))
                .await
                .unwrap_or(Ok(()))
        }
        Job::Expire(id) => {
            let (st, id) = (state.clone(), id.clone());
            tokio::task::spawn_blocking(move || expire_if_due(&st, &id).map(|_| ()))
                .await
                .unwrap_or(Ok(()))
        }
    };
    if let Err(e) = result {
        log::warn!("scheduled job {:?} failed: {e}", guard.job);
    }
    drop(guard);
}
