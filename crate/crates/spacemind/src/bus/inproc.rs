use std::collections::{BTreeMap, HashMap};
use std::sync::mpsc::{channel, Sender};
use std::sync::{Arc, Mutex};
use std::thread;

use spacemind_core::bus::{Bus, BusError, BusMessage, ChannelKey, Handler, SubscriptionId};

use super::now_ms;

#[derive(Default)]
struct State {
    seq: HashMap<ChannelKey, u64>,
    latest: HashMap<ChannelKey, BusMessage>,
    subscribers: BTreeMap<SubscriptionId, (ChannelKey, Sender<BusMessage>)>,
    next_id: u64,
}

/// Thread-safe in-process backend. Each subscription gets its own delivery
/// thread, so handlers never run on the publisher's thread; messages are
/// queued under the bus lock, which keeps per-key order. Delivery is
/// at-most-once: a message queued before `unsubscribe` may still arrive.
#[derive(Clone, Default)]
pub struct InProcessBus {
    state: Arc<Mutex<State>>,
}

impl InProcessBus {
    pub fn new() -> Self {
        Self::default()
    }
}

impl Bus for InProcessBus {
    fn publish(&self, key: ChannelKey, payload: &[u8]) -> Result<u64, BusError> {
        key.validate(payload)?;
        let mut st = self.state.lock().expect("bus lock");
        let seq = st.seq.entry(key).or_insert(0);
        *seq += 1;
        let msg = BusMessage { key, payload: payload.to_vec(), seq: *seq, timestamp_ms: now_ms() };
        st.subscribers.retain(|_, (k, tx)| *k != key || tx.send(msg.clone()).is_ok());
        st.latest.insert(key, msg.clone());
        Ok(msg.seq)
    }

    fn get_latest(&self, key: ChannelKey) -> Result<Option<BusMessage>, BusError> {
        Ok(self.state.lock().expect("bus lock").latest.get(&key).cloned())
    }

    fn subscribe(&self, key: ChannelKey, handler: Handler) -> Result<SubscriptionId, BusError> {
        let (tx, rx) = channel::<BusMessage>();
        let mut st = self.state.lock().expect("bus lock");
        st.next_id += 1;
        let id = SubscriptionId(st.next_id);
        thread::Builder::new()
            .name(format!("bus-{}-{}", key.as_str(), id.0))
            .spawn(move || {
                for msg in rx {
                    handler(&msg);
                }
            })
            .map_err(|e| BusError::BackendUnavailable(e.to_string()))?;
        st.subscribers.insert(id, (key, tx));
        Ok(id)
    }

    fn unsubscribe(&self, id: SubscriptionId) -> Result<(), BusError> {
        self.state.lock().expect("bus lock").subscribers.remove(&id);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::mpsc;
    use std::time::Duration;

    const POSE: &[u8] = br#"{"dx":1.0,"dy":0,"dz":0,"dyaw":0,"dpitch":0,"droll":0}"#;

    #[test]
    fn seq_and_latest() {
        let bus = InProcessBus::new();
        assert_eq!(bus.get_latest(ChannelKey::LidarLatest).unwrap(), None);
        for i in 1..=5 {
            let payload = format!(r#"{{"range_m":{i}.0,"step_index":{i}}}"#);
            assert_eq!(bus.publish(ChannelKey::LidarLatest, payload.as_bytes()).unwrap(), i);
        }
        assert_eq!(bus.get_latest(ChannelKey::LidarLatest).unwrap().unwrap().seq, 5);
        assert!(matches!(bus.publish(ChannelKey::PoseDelta, b"{}"), Err(BusError::SchemaViolation { .. })));
    }

    #[test]
    fn subscribers_see_publish_order_until_unsubscribed() {
        let bus = InProcessBus::new();
        let (tx, rx) = mpsc::channel();
        let tx = Mutex::new(tx);
        let id =
            bus.subscribe(ChannelKey::Exposure, Box::new(move |m| tx.lock().unwrap().send(m.seq).unwrap())).unwrap();
        bus.publish(ChannelKey::Exposure, br#"{"gain_delta":0.5}"#).unwrap();
        bus.publish(ChannelKey::Exposure, br#"{"gain_delta":-0.5}"#).unwrap();
        bus.publish(ChannelKey::PoseDelta, POSE).unwrap();
        let got: Vec<u64> = (0..2).map(|_| rx.recv_timeout(Duration::from_secs(2)).unwrap()).collect();
        assert_eq!(got, [1, 2]);
        bus.unsubscribe(id).unwrap();
        bus.publish(ChannelKey::Exposure, br#"{"gain_delta":0.1}"#).unwrap();
        assert!(rx.recv_timeout(Duration::from_millis(100)).is_err());
    }

    #[test]
    fn concurrent_publishers_leave_the_max_seq_latest() {
        for _ in 0..20 {
            let bus = InProcessBus::new();
            let handles: Vec<_> = (0..2)
                .map(|_| {
                    let bus = bus.clone();
                    thread::spawn(move || {
                        for _ in 0..4 {
                            bus.publish(ChannelKey::PoseDelta, POSE).unwrap();
                        }
                    })
                })
                .collect();
            handles.into_iter().for_each(|h| h.join().unwrap());
            assert_eq!(bus.get_latest(ChannelKey::PoseDelta).unwrap().unwrap().seq, 8);
        }
    }
}
