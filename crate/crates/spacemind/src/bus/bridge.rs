use std::sync::mpsc::{channel, Receiver};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use spacemind_core::bus::{
    decode, encode, Bus, BusError, BusMessage, ChannelKey, ControlCommand, LidarRecord, NotifyRecord, SubscriptionId,
};
use spacemind_core::env::{EnvError, Observation, Simulator, TaskSpec};
use spacemind_core::runner::{EnvPort, PortError};

/// How long the port waits for the frame a command produced.
pub const OBSERVATION_TIMEOUT: Duration = Duration::from_secs(5);

/// Out-of-band environment reset. Resets are not part of the bus contract;
/// the harness that owns the environment performs them.
pub trait ResetControl: Send + Sync {
    fn reset(&self, task: &TaskSpec, seed: u64) -> Result<(), PortError>;
}

fn publish_frame(bus: &dyn Bus, result: Result<Observation, EnvError>, sim: &Simulator) -> Result<(), BusError> {
    let (obs, status, detail) = match result {
        Ok(obs) => (obs, "ok".to_string(), None),
        Err(e) => match sim.observe() {
            Ok(obs) => (obs, e.kind().to_string(), Some(e.to_string())),
            Err(_) => {
                let note = NotifyRecord { step_index: 0, status: e.kind().to_string(), detail: Some(e.to_string()) };
                bus.publish(ChannelKey::RgbNotify, &encode(&note))?;
                return Ok(());
            }
        },
    };
    bus.publish(ChannelKey::RgbLatest, &encode(&obs))?;
    bus.publish(
        ChannelKey::LidarLatest,
        &encode(&LidarRecord { range_m: obs.lidar_range, step_index: obs.step_index }),
    )?;
    bus.publish(ChannelKey::RgbNotify, &encode(&NotifyRecord { step_index: obs.step_index, status, detail }))?;
    Ok(())
}

/// Environment side of the bus: applies commands to a simulator and
/// publishes the resulting frames. Commands are applied one at a time.
pub struct EnvBridge {
    bus: Arc<dyn Bus>,
    sim: Arc<Mutex<Simulator>>,
    subs: Vec<SubscriptionId>,
}

impl EnvBridge {
    pub fn attach(bus: Arc<dyn Bus>, sim: Simulator) -> Result<Arc<Self>, BusError> {
        let sim = Arc::new(Mutex::new(sim));
        let mut subs = Vec::new();
        for key in [ChannelKey::PoseDelta, ChannelKey::Exposure, ChannelKey::Terminate] {
            let (sim, out) = (sim.clone(), bus.clone());
            let handler = move |msg: &BusMessage| {
                let cmd = match ControlCommand::decode(msg.key, &msg.payload) {
                    Ok(cmd) => cmd,
                    Err(e) => return log::warn!("bridge ignored a command: {e}"),
                };
                let mut sim = sim.lock().expect("sim lock");
                let result = match cmd {
                    ControlCommand::Pose(d) => sim.step(d),
                    ControlCommand::Exposure(e) => sim.set_exposure(e.gain_delta),
                    ControlCommand::Terminate(_) => sim.observe(),
                };
                if let Err(e) = publish_frame(out.as_ref(), result, &sim) {
                    log::error!("bridge could not publish a frame: {e}");
                }
            };
            subs.push(bus.subscribe(key, Box::new(handler))?);
        }
        Ok(Arc::new(EnvBridge { bus, sim, subs }))
    }

    pub fn simulator(&self) -> Arc<Mutex<Simulator>> {
        self.sim.clone()
    }
}

impl ResetControl for EnvBridge {
    fn reset(&self, task: &TaskSpec, seed: u64) -> Result<(), PortError> {
        let mut sim = self.sim.lock().expect("sim lock");
        let obs = sim.reset_seeded(task, seed)?;
        publish_frame(self.bus.as_ref(), Ok(obs), &sim).map_err(|e| PortError::Backend(e.to_string()))
    }
}

impl Drop for EnvBridge {
    fn drop(&mut self) {
        for id in self.subs.drain(..) {
            let _ = self.bus.unsubscribe(id);
        }
    }
}

/// Agent side of the bus: publishes commands and waits for the notify that
/// follows them.
pub struct BusPort {
    bus: Arc<dyn Bus>,
    control: Arc<dyn ResetControl>,
    notify: Receiver<BusMessage>,
    subscription: SubscriptionId,
    seen: u64,
    pub timeout: Duration,
}

fn backend(e: BusError) -> PortError {
    match e {
        BusError::BackendUnavailable(d) => PortError::Backend(d),
        other => PortError::Backend(other.to_string()),
    }
}

impl BusPort {
    pub fn new(bus: Arc<dyn Bus>, control: Arc<dyn ResetControl>) -> Result<Self, BusError> {
        let (tx, rx) = channel();
        let tx = Mutex::new(tx);
        let subscription = bus.subscribe(
            ChannelKey::RgbNotify,
            Box::new(move |m| {
                let _ = tx.lock().expect("notify lock").send(m.clone());
            }),
        )?;
        Ok(BusPort { bus, control, notify: rx, subscription, seen: 0, timeout: OBSERVATION_TIMEOUT })
    }

    fn mark_seen(&mut self) -> Result<(), PortError> {
        self.seen = self.bus.get_latest(ChannelKey::RgbNotify).map_err(backend)?.map_or(0, |m| m.seq);
        Ok(())
    }

    fn wait_notify(&mut self) -> Result<NotifyRecord, PortError> {
        let deadline = Instant::now() + self.timeout;
        loop {
            let left = deadline.saturating_duration_since(Instant::now());
            let msg = self.notify.recv_timeout(left).map_err(|_| PortError::Timeout)?;
            if msg.seq > self.seen {
                self.seen = msg.seq;
                return decode(ChannelKey::RgbNotify, &msg.payload).map_err(backend);
            }
        }
    }
}

impl EnvPort for BusPort {
    fn reset(&mut self, task: &TaskSpec, seed: u64) -> Result<Observation, PortError> {
        self.control.reset(task, seed)?;
        self.mark_seen()?;
        self.latest()
    }

    fn command(&mut self, cmd: &ControlCommand) -> Result<Observation, PortError> {
        self.bus.publish(cmd.key(), &cmd.encode()).map_err(backend)?;
        let note = self.wait_notify()?;
        if note.status != "ok" {
            return Err(PortError::Env { kind: note.status, detail: note.detail.unwrap_or_default() });
        }
        self.latest()
    }

    fn latest(&mut self) -> Result<Observation, PortError> {
        let frame = self.bus.get_latest(ChannelKey::RgbLatest).map_err(backend)?.ok_or(PortError::Timeout)?;
        let mut obs: Observation = decode(ChannelKey::RgbLatest, &frame.payload).map_err(backend)?;
        if let Some(l) = self.bus.get_latest(ChannelKey::LidarLatest).map_err(backend)? {
            let lidar: LidarRecord = decode(ChannelKey::LidarLatest, &l.payload).map_err(backend)?;
            if lidar.step_index == obs.step_index {
                obs.lidar_range = lidar.range_m;
            }
        }
        Ok(obs)
    }
}

impl Drop for BusPort {
    fn drop(&mut self) {
        let _ = self.bus.unsubscribe(self.subscription);
    }
}
