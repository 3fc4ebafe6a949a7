//! Collector client: power-cycles chips, reads every word of every design
//! and writes one dump file per reading.

use std::io::{self, BufReader, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpStream};
use std::path::{Path, PathBuf};
use std::time::Duration;

use super::dump::DumpFile;
use super::protocol::{decode_response, Command, ReadRequest, ResponseFrame, FRAME_LEN};
use super::ChipnetError;
use crate::simchip::{Floorplan, Snapshot};

/// Blocking client for one harness session.
pub struct HarnessClient {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
}

impl HarnessClient {
    pub fn connect(endpoint: SocketAddr) -> io::Result<Self> {
        let stream = TcpStream::connect_timeout(&endpoint, Duration::from_secs(5))?;
        stream.set_nodelay(true)?;
        stream.set_read_timeout(Some(Duration::from_secs(30)))?;
        Ok(HarnessClient { reader: BufReader::new(stream.try_clone()?), writer: BufWriter::new(stream) })
    }

    fn read_frame(&mut self) -> Result<[u8; FRAME_LEN], ChipnetError> {
        let mut frame = [0u8; FRAME_LEN];
        self.reader.read_exact(&mut frame).map_err(ChipnetError::from_io)?;
        Ok(frame)
    }

    /// Sends one command and returns its raw frame.
    pub fn transact(&mut self, cmd: Command) -> Result<[u8; FRAME_LEN], ChipnetError> {
        self.writer.write_all(&cmd.encode()?).map_err(ChipnetError::from_io)?;
        self.writer.flush().map_err(ChipnetError::from_io)?;
        self.read_frame()
    }

    fn expect_ok(&mut self, cmd: Command) -> Result<(), ChipnetError> {
        let frame = self.transact(cmd)?;
        ResponseFrame::from_bytes(&frame)?.into_result()?;
        Ok(())
    }

    pub fn select_chip(&mut self, chip: u8) -> Result<(), ChipnetError> {
        self.expect_ok(Command::SelectChip(chip))
    }

    pub fn power_on(&mut self) -> Result<(), ChipnetError> {
        self.expect_ok(Command::PowerOn)
    }

    pub fn power_off(&mut self) -> Result<(), ChipnetError> {
        self.expect_ok(Command::PowerOff)
    }

    /// Reads all `depth` words of design `select`. Requests are written in
    /// one batch; the server still answers them strictly in order.
    pub fn read_design(&mut self, select: usize, depth: usize, width: usize) -> Result<Snapshot, ChipnetError> {
        let mut batch = Vec::with_capacity(depth * 3);
        for addr in 0..depth {
            batch.extend(Command::Read(ReadRequest::new(select, addr)?).encode()?);
        }
        self.writer.write_all(&batch).map_err(ChipnetError::from_io)?;
        self.writer.flush().map_err(ChipnetError::from_io)?;
        let mut words = Vec::with_capacity(depth);
        for _ in 0..depth {
            let frame = self.read_frame()?;
            words.push(decode_response(&frame, width)?);
        }
        Snapshot::from_words(width, words).map_err(|e| ChipnetError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone)]
pub struct CollectOptions {
    pub endpoint: SocketAddr,
    pub chips: u32,
    pub cycles: u32,
    pub out_dir: PathBuf,
    /// Reconnect attempts per chip/cycle after a lost connection.
    pub retries: u32,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CollectSummary {
    pub files: Vec<PathBuf>,
    pub total_bits: u64,
}

fn collect_reading(
    client: &mut HarnessClient,
    floorplan: &Floorplan,
    chip: u32,
    cycle: u32,
) -> Result<Vec<DumpFile>, ChipnetError> {
    let id = u8::try_from(chip).map_err(|_| ChipnetError::Config(format!("chip id {chip} exceeds one byte")))?;
    client.select_chip(id)?;
    client.power_on()?;
    let mut dumps = Vec::with_capacity(floorplan.designs().len());
    for (select, entry) in floorplan.designs().iter().enumerate() {
        let g = *entry.geometry();
        let snapshot = client.read_design(select, g.depth(), g.width())?.labeled(chip, cycle);
        dumps.push(DumpFile {
            design: entry.name.clone(),
            geometry: g,
            orientation: entry.placed.orientation,
            chip,
            cycle,
            snapshot,
        });
    }
    client.power_off()?;
    Ok(dumps)
}

fn write_dumps(dumps: &[DumpFile], dir: &Path) -> Result<Vec<PathBuf>, ChipnetError> {
    dumps.iter().map(|d| d.write_to(dir).map_err(ChipnetError::from)).collect()
}

/// Runs the full collection; a lost connection is retried for the reading
/// in progress.
pub fn collect(options: &CollectOptions, floorplan: &Floorplan) -> Result<CollectSummary, ChipnetError> {
    std::fs::create_dir_all(&options.out_dir)
        .map_err(|e| ChipnetError::Io(io::Error::new(e.kind(), format!("{}: {e}", options.out_dir.display()))))?;
    let mut client = HarnessClient::connect(options.endpoint).map_err(ChipnetError::from_io)?;
    let mut summary = CollectSummary { files: Vec::new(), total_bits: 0 };
    for chip in 0..options.chips {
        for cycle in 0..options.cycles {
            let mut attempt = 0;
            let dumps = loop {
                match collect_reading(&mut client, floorplan, chip, cycle) {
                    Ok(d) => break d,
                    Err(ChipnetError::ConnectionLost(msg)) if attempt < options.retries => {
                        attempt += 1;
                        log::warn!("chip {chip} cycle {cycle}: connection lost ({msg}), retry {attempt}");
                        client = HarnessClient::connect(options.endpoint).map_err(ChipnetError::from_io)?;
                    }
                    Err(e) => return Err(e),
                }
            };
            summary.total_bits += dumps.iter().map(|d| d.geometry.cells() as u64).sum::<u64>();
            summary.files.extend(write_dumps(&dumps, &options.out_dir)?);
        }
    }
    Ok(summary)
}
