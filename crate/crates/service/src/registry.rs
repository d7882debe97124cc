use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
#[error("server is at capacity ({capacity} sessions)")]
pub struct Busy {
    pub capacity: usize,
}

/// Hands out session ids and bounds the number of concurrent sessions.
#[derive(Clone, Debug)]
pub struct SessionRegistry {
    capacity: usize,
    active: Arc<AtomicUsize>,
}

/// A live session slot; dropping it frees the slot.
#[derive(Debug)]
pub struct SessionTicket {
    pub session_id: String,
    pub seed: u64,
    active: Arc<AtomicUsize>,
}

impl Drop for SessionTicket {
    fn drop(&mut self) {
        self.active.fetch_sub(1, Ordering::SeqCst);
    }
}

impl SessionRegistry {
    pub fn new(capacity: usize) -> Self {
        Self { capacity, active: Arc::new(AtomicUsize::new(0)) }
    }

    pub fn active(&self) -> usize {
        self.active.load(Ordering::SeqCst)
    }

    pub fn open(&self) -> Result<SessionTicket, Busy> {
        let capacity = self.capacity;
        self.active
            .fetch_update(Ordering::SeqCst, Ordering::SeqCst, |n| (n < capacity).then_some(n + 1))
            .map_err(|_| Busy { capacity })?;
        let id = uuid::Uuid::new_v4();
        let seed = id.as_u64_pair().0;
        Ok(SessionTicket {
            session_id: format!("live-{}", id.simple()),
            seed,
            active: Arc::clone(&self.active),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ids_are_distinct_and_capacity_is_enforced() {
        let reg = SessionRegistry::new(2);
        let a = reg.open().unwrap();
        let b = reg.open().unwrap();
        assert_ne!(a.session_id, b.session_id);
        assert_eq!(reg.open().unwrap_err(), Busy { capacity: 2 });
        drop(a);
        assert_eq!(reg.active(), 1);
        assert!(reg.open().is_ok());
    }
}
