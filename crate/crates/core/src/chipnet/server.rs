//! Virtual chip bank behind the serial harness protocol.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;

use super::protocol::{
    decode_request, DeviceErrorCode, ResponseFrame, FRAME_LEN, MAX_ADDRESS, MAX_DESIGNS, OP_POWER_OFF, OP_POWER_ON,
    OP_READ, OP_SELECT_CHIP,
};
use super::ChipnetError;
use crate::dataset::simulate_reading;
use crate::simchip::{Floorplan, ProcessParams, Snapshot};

#[derive(Debug, Clone)]
pub struct BankConfig {
    pub floorplan: Floorplan,
    pub params: ProcessParams<f64>,
    pub master_seed: u64,
    pub chips: u32,
}

impl BankConfig {
    pub fn validate(&self) -> Result<(), ChipnetError> {
        let designs = self.floorplan.designs();
        if designs.is_empty() || designs.len() > MAX_DESIGNS {
            return Err(ChipnetError::Config(format!("floorplan must hold 1..={MAX_DESIGNS} designs")));
        }
        if let Some(d) = designs.iter().find(|d| d.geometry().depth() > MAX_ADDRESS || d.geometry().width() > 64) {
            return Err(ChipnetError::Config(format!("design {} does not fit the 11-bit address / 64-bit data fields", d.name)));
        }
        if self.chips == 0 || self.chips > 256 {
            return Err(ChipnetError::Config("chip count must be in 1..=256".into()));
        }
        self.params.validate().map_err(|e| ChipnetError::Config(e.to_string()))
    }
}

#[derive(Debug, Default)]
struct ChipSlot {
    owner: Option<u64>,
    powered: bool,
    next_cycle: u32,
    snapshots: Option<Arc<Vec<Snapshot>>>,
}

/// Shared state of all virtual chips. Power-cycle counters persist for the
/// lifetime of the bank.
#[derive(Debug)]
pub struct ChipBank {
    config: BankConfig,
    slots: Mutex<Vec<ChipSlot>>,
    next_session: AtomicU64,
}

impl ChipBank {
    pub fn new(config: BankConfig) -> Result<Self, ChipnetError> {
        config.validate()?;
        let slots = (0..config.chips).map(|_| ChipSlot::default()).collect();
        Ok(ChipBank { config, slots: Mutex::new(slots), next_session: AtomicU64::new(1) })
    }

    pub fn config(&self) -> &BankConfig {
        &self.config
    }

    pub fn session(self: &Arc<Self>) -> Session {
        Session { bank: Arc::clone(self), id: self.next_session.fetch_add(1, Ordering::Relaxed), chip: None }
    }

    fn slots(&self) -> std::sync::MutexGuard<'_, Vec<ChipSlot>> {
        self.slots.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// One client connection. Owns at most one chip at a time.
#[derive(Debug)]
pub struct Session {
    bank: Arc<ChipBank>,
    id: u64,
    chip: Option<u32>,
}

impl Session {
    fn release(&mut self) {
        if let Some(chip) = self.chip.take() {
            let mut slots = self.bank.slots();
            let slot = &mut slots[chip as usize];
            slot.owner = None;
            slot.powered = false;
            slot.snapshots = None;
        }
    }

    fn select(&mut self, chip: u8) -> ResponseFrame {
        let chip = u32::from(chip);
        if chip >= self.bank.config.chips {
            return ResponseFrame::error(DeviceErrorCode::BadRequest);
        }
        if self.chip == Some(chip) {
            return ResponseFrame::ok(0);
        }
        {
            let slots = self.bank.slots();
            if slots[chip as usize].owner.is_some() {
                return ResponseFrame::error(DeviceErrorCode::ChipBusy);
            }
        }
        self.release();
        let mut slots = self.bank.slots();
        let slot = &mut slots[chip as usize];
        if slot.owner.is_some() {
            return ResponseFrame::error(DeviceErrorCode::ChipBusy);
        }
        slot.owner = Some(self.id);
        self.chip = Some(chip);
        ResponseFrame::ok(0)
    }

    fn power_off(&mut self) -> ResponseFrame {
        let Some(chip) = self.chip else {
            return ResponseFrame::error(DeviceErrorCode::NoChipSelected);
        };
        let mut slots = self.bank.slots();
        let slot = &mut slots[chip as usize];
        slot.powered = false;
        slot.snapshots = None;
        ResponseFrame::ok(0)
    }

    fn power_on(&mut self) -> ResponseFrame {
        let Some(chip) = self.chip else {
            return ResponseFrame::error(DeviceErrorCode::NoChipSelected);
        };
        let cycle = {
            let mut slots = self.bank.slots();
            let slot = &mut slots[chip as usize];
            if slot.powered {
                return ResponseFrame::ok(0);
            }
            let c = slot.next_cycle;
            slot.next_cycle += 1;
            c
        };
        let cfg = &self.bank.config;
        let snapshots = match simulate_reading(&cfg.floorplan, &cfg.params, cfg.master_seed, chip, cycle) {
            Ok(s) => s,
            Err(e) => {
                log::error!("chip {chip} cycle {cycle}: {e}");
                return ResponseFrame::error(DeviceErrorCode::BadRequest);
            }
        };
        let mut slots = self.bank.slots();
        let slot = &mut slots[chip as usize];
        slot.snapshots = Some(Arc::new(snapshots));
        slot.powered = true;
        ResponseFrame::ok(0)
    }

    fn read(&mut self, raw: [u8; 2]) -> ResponseFrame {
        let Some(chip) = self.chip else {
            return ResponseFrame::error(DeviceErrorCode::NoChipSelected);
        };
        let snapshots = {
            let slots = self.bank.slots();
            let slot = &slots[chip as usize];
            match (&slot.snapshots, slot.powered) {
                (Some(s), true) => Arc::clone(s),
                _ => return ResponseFrame::error(DeviceErrorCode::NotPoweredOn),
            }
        };
        let Ok(req) = decode_request(raw) else {
            return ResponseFrame::error(DeviceErrorCode::BadRequest);
        };
        let Some(snap) = snapshots.get(usize::from(req.puf_select)) else {
            return ResponseFrame::error(DeviceErrorCode::BadRequest);
        };
        match snap.word(usize::from(req.address)) {
            Ok(word) => {
                let w = snap.width();
                ResponseFrame::ok(if w == 64 { word } else { word << (64 - w) })
            }
            Err(_) => ResponseFrame::error(DeviceErrorCode::BadRequest),
        }
    }

    /// Serves commands from `input` until it is exhausted, answering each
    /// with one frame before reading the next.
    pub fn run<R: Read, W: Write>(&mut self, input: R, output: W) -> io::Result<()> {
        let mut reader = BufReader::new(input);
        let mut writer = BufWriter::new(output);
        loop {
            let mut op = [0u8; 1];
            match reader.read_exact(&mut op) {
                Ok(()) => {}
                Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => break,
                Err(e) => return Err(e),
            }
            let frame = match op[0] {
                OP_SELECT_CHIP => {
                    let mut id = [0u8; 1];
                    reader.read_exact(&mut id)?;
                    self.select(id[0])
                }
                OP_POWER_OFF => self.power_off(),
                OP_POWER_ON => self.power_on(),
                OP_READ => {
                    let mut raw = [0u8; 2];
                    reader.read_exact(&mut raw)?;
                    self.read(raw)
                }
                _ => ResponseFrame::error(DeviceErrorCode::UnknownOpcode),
            };
            let bytes: [u8; FRAME_LEN] = frame.to_bytes();
            writer.write_all(&bytes)?;
            if reader.buffer().is_empty() {
                writer.flush()?;
            }
        }
        writer.flush()
    }
}

impl Drop for Session {
    fn drop(&mut self) {
        self.release();
    }
}

/// TCP front end of a [`ChipBank`]; one thread per session.
pub struct Server {
    listener: TcpListener,
    bank: Arc<ChipBank>,
    stop: Arc<AtomicBool>,
}

#[derive(Debug, Clone)]
pub struct ShutdownHandle {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
}

impl ShutdownHandle {
    pub fn shutdown(&self) {
        self.stop.store(true, Ordering::SeqCst);
        // wake the blocking accept
        let _ = TcpStream::connect(self.addr);
    }
}

impl Server {
    pub fn bind(endpoint: impl ToSocketAddrs, config: BankConfig) -> Result<Self, ChipnetError> {
        let bank = Arc::new(ChipBank::new(config)?);
        let listener = TcpListener::bind(endpoint)?;
        Ok(Server { listener, bank, stop: Arc::new(AtomicBool::new(false)) })
    }

    pub fn local_addr(&self) -> io::Result<SocketAddr> {
        self.listener.local_addr()
    }

    pub fn shutdown_handle(&self) -> io::Result<ShutdownHandle> {
        Ok(ShutdownHandle { addr: self.local_addr()?, stop: Arc::clone(&self.stop) })
    }

    pub fn run(self) -> io::Result<()> {
        for conn in self.listener.incoming() {
            if self.stop.load(Ordering::SeqCst) {
                break;
            }
            let stream = match conn {
                Ok(s) => s,
                Err(e) => {
                    log::warn!("accept failed: {e}");
                    continue;
                }
            };
            let _ = stream.set_nodelay(true);
            let mut session = self.bank.session();
            thread::spawn(move || {
                let peer = stream.peer_addr().map(|a| a.to_string()).unwrap_or_default();
                log::info!("session {} from {peer}", session.id);
                let reader = match stream.try_clone() {
                    Ok(r) => r,
                    Err(e) => {
                        log::warn!("session {}: {e}", session.id);
                        return;
                    }
                };
                if let Err(e) = session.run(reader, stream) {
                    log::warn!("session {} ended: {e}", session.id);
                }
            });
        }
        Ok(())
    }
}

/// Binds `endpoint` and serves until the process exits.
pub fn serve(config: BankConfig, endpoint: impl ToSocketAddrs) -> Result<(), ChipnetError> {
    let server = Server::bind(endpoint, config)?;
    log::info!("serving {} chips on {}", server.bank.config.chips, server.local_addr()?);
    server.run()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chipnet::protocol::{decode_response, Command, ReadRequest, START_ERROR};

    fn bank(noise: f64) -> Arc<ChipBank> {
        Arc::new(
            ChipBank::new(BankConfig {
                floorplan: Floorplan::default_floorplan(),
                params: ProcessParams::uncalibrated().with_noise(noise),
                master_seed: 77,
                chips: 4,
            })
            .unwrap(),
        )
    }

    fn script(cmds: &[Command]) -> Vec<u8> {
        cmds.iter().flat_map(|c| c.encode().unwrap()).collect()
    }

    fn run(session: &mut Session, input: &[u8]) -> Vec<[u8; FRAME_LEN]> {
        let mut out = Vec::new();
        session.run(input, &mut out).unwrap();
        out.chunks(FRAME_LEN).map(|c| c.try_into().unwrap()).collect()
    }

    fn read(sel: usize, addr: usize) -> Command {
        Command::Read(ReadRequest::new(sel, addr).unwrap())
    }

    #[test]
    fn reads_are_stable_within_a_cycle() {
        let b = bank(0.2);
        let mut s = b.session();
        let frames = run(&mut s, &script(&[Command::SelectChip(0), Command::PowerOn, read(0, 5), read(0, 5)]));
        assert_eq!(frames.len(), 4);
        assert_eq!(frames[2], frames[3]);
        assert!(!ResponseFrame::from_bytes(&frames[2]).unwrap().is_error());
    }

    #[test]
    fn noiseless_cycles_repeat() {
        let b = bank(0.0);
        let mut s = b.session();
        let cmds = [
            Command::SelectChip(1),
            Command::PowerOn,
            read(3, 100),
            Command::PowerOff,
            Command::PowerOn,
            read(3, 100),
        ];
        let frames = run(&mut s, &script(&cmds));
        assert_eq!(frames[2], frames[5]);
    }

    #[test]
    fn errors_are_in_band() {
        let b = bank(0.1);
        let mut s = b.session();
        let mut input = script(&[read(0, 0), Command::SelectChip(2), read(0, 0), Command::PowerOn]);
        input.push(0x7f);
        input.extend(script(&[read(0, 200), Command::SelectChip(9), read(0, 10)]));
        input.extend([0x04, 0x80, 0x00]);
        let frames = run(&mut s, &input);
        let codes: Vec<Option<DeviceErrorCode>> = frames
            .iter()
            .map(|f| match ResponseFrame::from_bytes(f).unwrap().into_result() {
                Ok(_) => None,
                Err(crate::chipnet::protocol::ProtocolError::Device(c)) => Some(c),
                Err(e) => panic!("{e}"),
            })
            .collect();
        use DeviceErrorCode::*;
        assert_eq!(
            codes,
            vec![Some(NoChipSelected), None, Some(NotPoweredOn), None, Some(UnknownOpcode), Some(BadRequest), Some(BadRequest), None, Some(BadRequest)]
        );
        assert!(frames.iter().all(|f| f.len() == FRAME_LEN));
        assert_eq!(frames[0][0] >> 5, START_ERROR);
    }

    #[test]
    fn chips_are_exclusive_per_session() {
        let b = bank(0.1);
        let mut a = b.session();
        let mut c = b.session();
        let fa = run(&mut a, &script(&[Command::SelectChip(0)]));
        let fc = run(&mut c, &script(&[Command::SelectChip(0), Command::SelectChip(1)]));
        assert!(!ResponseFrame::from_bytes(&fa[0]).unwrap().is_error());
        assert_eq!(
            ResponseFrame::from_bytes(&fc[0]).unwrap().into_result(),
            Err(crate::chipnet::protocol::ProtocolError::Device(DeviceErrorCode::ChipBusy))
        );
        assert!(!ResponseFrame::from_bytes(&fc[1]).unwrap().is_error());
        drop(a);
        let mut d = b.session();
        let fd = run(&mut d, &script(&[Command::SelectChip(0)]));
        assert!(!ResponseFrame::from_bytes(&fd[0]).unwrap().is_error());
    }

    #[test]
    fn served_words_match_simulation() {
        let b = bank(0.15);
        let mut s = b.session();
        let cfg = b.config().clone();
        let frames = run(&mut s, &script(&[Command::SelectChip(3), Command::PowerOn, read(2, 17), read(0, 127)]));
        let expected = simulate_reading(&cfg.floorplan, &cfg.params, cfg.master_seed, 3, 0).unwrap();
        assert_eq!(decode_response(&frames[2], 32).unwrap(), expected[2].word(17).unwrap());
        assert_eq!(decode_response(&frames[3], 64).unwrap(), expected[0].word(127).unwrap());
    }

    #[test]
    fn config_validation() {
        let mut cfg = bank(0.0).config().clone();
        cfg.chips = 0;
        assert!(ChipBank::new(cfg).is_err());
    }
}
