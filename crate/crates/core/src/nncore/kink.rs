//! Records which piece of each piecewise-linear nonlinearity was active
//! during a forward pass. Gradient checks compare the pattern at `x ± ε`
//! and skip coordinates whose finite difference straddles a kink.
//! Recording is off unless a [`KinkRecording`] guard is alive on the
//! current thread.

use std::cell::RefCell;

thread_local! {
    static PATTERN: RefCell<Option<Vec<u8>>> = const { RefCell::new(None) };
}

/// Enables recording on this thread until dropped.
pub struct KinkRecording {
    previous: Option<Vec<u8>>,
}

impl KinkRecording {
    pub fn start() -> Self {
        let previous = PATTERN.with(|p| p.borrow_mut().replace(Vec::new()));
        Self { previous }
    }

    /// Takes the pattern recorded so far and resets the buffer.
    pub fn take(&self) -> Vec<u8> {
        PATTERN.with(|p| p.borrow_mut().as_mut().map(std::mem::take).unwrap_or_default())
    }
}

impl Drop for KinkRecording {
    fn drop(&mut self) {
        let previous = self.previous.take();
        PATTERN.with(|p| *p.borrow_mut() = previous);
    }
}

pub(crate) fn is_recording() -> bool {
    PATTERN.with(|p| p.borrow().is_some())
}

pub(crate) fn record(branches: impl Iterator<Item = u8>) {
    PATTERN.with(|p| {
        if let Some(buf) = p.borrow_mut().as_mut() {
            buf.extend(branches);
        }
    });
}
