//! Step bookkeeping shared by the compute, send and receive units.

use std::collections::BTreeMap;
use std::sync::{Arc, Condvar, Mutex};

use crate::error::{Error, Result};
use crate::memory::Reservation;
use crate::streams::FileSignal;

/// What the compute unit consumes in a superstep.
pub(crate) enum StepInput<M> {
    None,
    /// Sorted incoming message stream.
    Ims(std::path::PathBuf),
    /// Folded message per vertex position.
    Digest(Vec<M>, Reservation),
}

struct State<M> {
    compute_permitted: u64,
    send_permitted: u64,
    compute_finished: u64,
    boundaries: BTreeMap<u64, Vec<u64>>,
    inputs: BTreeMap<u64, StepInput<M>>,
    terminate_after: Option<u64>,
    fatal: Option<String>,
}

pub(crate) struct Ledger<M> {
    state: Mutex<State<M>>,
    cv: Condvar,
    /// Woken on every ledger change and every completed OMS file.
    pub signal: Arc<FileSignal>,
}

/// What the send unit may do in its current step.
pub(crate) struct SendView {
    pub finished: bool,
    pub limits: Vec<u64>,
}

impl<M> Ledger<M> {
    pub fn new(signal: Arc<FileSignal>) -> Self {
        Ledger {
            state: Mutex::new(State {
                compute_permitted: 1,
                send_permitted: 1,
                compute_finished: 0,
                boundaries: BTreeMap::new(),
                inputs: BTreeMap::new(),
                terminate_after: None,
                fatal: None,
            }),
            cv: Condvar::new(),
            signal,
        }
    }

    fn changed(&self) {
        self.cv.notify_all();
        self.signal.bump();
    }

    pub fn fail(&self, reason: &str) {
        let mut s = self.state.lock().unwrap();
        s.fatal.get_or_insert_with(|| reason.to_string());
        drop(s);
        self.changed();
    }

    fn check(s: &State<M>) -> Result<()> {
        match &s.fatal {
            Some(r) => Err(Error::Aborted(r.clone())),
            None => Ok(()),
        }
    }

    /// Called by the receive unit once all messages of `step - 1` are in.
    pub fn permit_compute(&self, step: u64, input: StepInput<M>) {
        let mut s = self.state.lock().unwrap();
        s.inputs.insert(step, input);
        s.compute_permitted = s.compute_permitted.max(step);
        drop(s);
        self.changed();
    }

    pub fn wait_compute(&self, step: u64) -> Result<StepInput<M>> {
        let mut s = self.state.lock().unwrap();
        loop {
            Self::check(&s)?;
            if s.compute_permitted >= step {
                return Ok(s.inputs.remove(&step).unwrap_or(StepInput::None));
            }
            s = self.cv.wait(s).unwrap();
        }
    }

    /// Records where each OMS ends for `step`; its files up to these indices
    /// belong to `step`.
    pub fn finish_compute(&self, step: u64, boundaries: Vec<u64>) {
        let mut s = self.state.lock().unwrap();
        s.boundaries.insert(step, boundaries);
        s.compute_finished = step;
        drop(s);
        self.changed();
    }

    pub fn terminate_after(&self, step: u64) {
        self.state.lock().unwrap().terminate_after = Some(step);
        self.changed();
    }

    pub fn permit_send(&self, step: u64) {
        let mut s = self.state.lock().unwrap();
        s.send_permitted = s.send_permitted.max(step);
        drop(s);
        self.changed();
    }

    /// `Ok(true)` once sending `step` is allowed, `Ok(false)` if the job ended
    /// before it.
    pub fn send_allowed(&self, step: u64) -> Result<Option<bool>> {
        let s = self.state.lock().unwrap();
        Self::check(&s)?;
        if s.terminate_after.is_some_and(|t| t < step) {
            return Ok(Some(false));
        }
        Ok(if s.send_permitted >= step { Some(true) } else { None })
    }

    /// Sendable file limits for `step`. While the compute unit is still in
    /// `step`, every closed file is part of it, so `current` (read under the
    /// lock) is the limit.
    pub fn send_view(&self, step: u64, current: impl FnOnce() -> Vec<u64>) -> Result<SendView> {
        let mut s = self.state.lock().unwrap();
        Self::check(&s)?;
        if s.compute_finished >= step {
            let limits = s.boundaries.get(&step).cloned().expect("boundary recorded with finish");
            // older boundaries are no longer needed
            s.boundaries.retain(|&k, _| k >= step);
            Ok(SendView { finished: true, limits })
        } else {
            Ok(SendView { finished: false, limits: current() })
        }
    }
}
