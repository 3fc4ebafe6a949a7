//! Serial harness wire format.
//!
//! Requests are 15-bit read addresses packed big-endian into two bytes:
//!
//! ```text
//!  15 | 14..11     | 10..0
//!   0 | puf select | address
//! ```
//!
//! Every command is answered with a 9-byte frame, MSB first:
//!
//! ```text
//! start(3) | data(64) | stop(3) | pad(2)
//!   101    |  word    |  010    |  00      success
//!   000    |  code    |  010    |  00      error
//! ```
//!
//! Words narrower than 64 bits occupy the high-order data bits.

use thiserror::Error;

pub const MAX_DESIGNS: usize = 11;
pub const ADDRESS_BITS: u32 = 11;
pub const MAX_ADDRESS: usize = 1 << ADDRESS_BITS;
pub const FRAME_LEN: usize = 9;

pub const START_OK: u8 = 0b101;
pub const START_ERROR: u8 = 0b000;
pub const STOP: u8 = 0b010;

pub const OP_SELECT_CHIP: u8 = 0x01;
pub const OP_POWER_OFF: u8 = 0x02;
pub const OP_POWER_ON: u8 = 0x03;
pub const OP_READ: u8 = 0x04;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ProtocolError {
    #[error("puf select {0} out of range")]
    SelectOutOfRange(u8),
    #[error("address {0} does not fit the address field")]
    AddressOutOfRange(usize),
    #[error("reserved request bit is set")]
    ReservedBitSet,
    #[error("word width {0} exceeds 64 bits")]
    WidthTooLarge(usize),
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("device reported {0:?}")]
    Device(DeviceErrorCode),
}

/// Error codes carried in the data field of an error frame.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum DeviceErrorCode {
    UnknownOpcode = 1,
    NotPoweredOn = 2,
    BadRequest = 3,
    ChipBusy = 4,
    NoChipSelected = 5,
}

impl DeviceErrorCode {
    pub fn from_code(code: u64) -> Option<Self> {
        use DeviceErrorCode::*;
        [UnknownOpcode, NotPoweredOn, BadRequest, ChipBusy, NoChipSelected]
            .into_iter()
            .find(|c| *c as u64 == code)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ReadRequest {
    pub puf_select: u8,
    pub address: u16,
}

impl ReadRequest {
    pub fn new(puf_select: usize, address: usize) -> Result<Self, ProtocolError> {
        if puf_select >= MAX_DESIGNS {
            return Err(ProtocolError::SelectOutOfRange(puf_select.min(255) as u8));
        }
        if address >= MAX_ADDRESS {
            return Err(ProtocolError::AddressOutOfRange(address));
        }
        Ok(ReadRequest { puf_select: puf_select as u8, address: address as u16 })
    }
}

pub fn encode_request(r: ReadRequest) -> Result<[u8; 2], ProtocolError> {
    let checked = ReadRequest::new(usize::from(r.puf_select), usize::from(r.address))?;
    let v = (u16::from(checked.puf_select) << ADDRESS_BITS) | checked.address;
    Ok(v.to_be_bytes())
}

pub fn decode_request(b: [u8; 2]) -> Result<ReadRequest, ProtocolError> {
    let v = u16::from_be_bytes(b);
    if v & 0x8000 != 0 {
        return Err(ProtocolError::ReservedBitSet);
    }
    let select = (v >> ADDRESS_BITS) as u8;
    if usize::from(select) >= MAX_DESIGNS {
        return Err(ProtocolError::SelectOutOfRange(select));
    }
    Ok(ReadRequest { puf_select: select, address: v & 0x07FF })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ResponseFrame {
    pub start: u8,
    pub data: u64,
    pub stop: u8,
}

impl ResponseFrame {
    pub fn ok(data: u64) -> Self {
        ResponseFrame { start: START_OK, data, stop: STOP }
    }

    pub fn error(code: DeviceErrorCode) -> Self {
        ResponseFrame { start: START_ERROR, data: code as u64, stop: STOP }
    }

    pub fn is_error(&self) -> bool {
        self.start == START_ERROR
    }

    pub fn to_bytes(&self) -> [u8; FRAME_LEN] {
        let v: u128 = (u128::from(self.start & 0b111) << 69) | (u128::from(self.data) << 5) | (u128::from(self.stop & 0b111) << 2);
        let wide = v.to_be_bytes();
        let mut out = [0u8; FRAME_LEN];
        out.copy_from_slice(&wide[16 - FRAME_LEN..]);
        out
    }

    pub fn from_bytes(b: &[u8; FRAME_LEN]) -> Result<Self, ProtocolError> {
        let mut wide = [0u8; 16];
        wide[16 - FRAME_LEN..].copy_from_slice(b);
        let v = u128::from_be_bytes(wide);
        let frame = ResponseFrame {
            start: ((v >> 69) & 0b111) as u8,
            data: (v >> 5) as u64,
            stop: ((v >> 2) & 0b111) as u8,
        };
        if v & 0b11 != 0 {
            return Err(ProtocolError::MalformedFrame("padding bits set".into()));
        }
        if frame.stop != STOP {
            return Err(ProtocolError::MalformedFrame(format!("stop bits {:03b}", frame.stop)));
        }
        if frame.start != START_OK && frame.start != START_ERROR {
            return Err(ProtocolError::MalformedFrame(format!("start bits {:03b}", frame.start)));
        }
        Ok(frame)
    }

    /// Success data or the device error it carries.
    pub fn into_result(self) -> Result<u64, ProtocolError> {
        if self.is_error() {
            let code = DeviceErrorCode::from_code(self.data)
                .ok_or_else(|| ProtocolError::MalformedFrame(format!("unknown error code {}", self.data)))?;
            return Err(ProtocolError::Device(code));
        }
        Ok(self.data)
    }
}

/// Frame carrying a `width`-bit word, high-aligned in the data field.
pub fn encode_response(word: u64, width: usize) -> Result<[u8; FRAME_LEN], ProtocolError> {
    if width == 0 || width > 64 {
        return Err(ProtocolError::WidthTooLarge(width));
    }
    let data = if width == 64 { word } else { (word & ((1 << width) - 1)) << (64 - width) };
    Ok(ResponseFrame::ok(data).to_bytes())
}

pub fn decode_response(b: &[u8; FRAME_LEN], width: usize) -> Result<u64, ProtocolError> {
    if width == 0 || width > 64 {
        return Err(ProtocolError::WidthTooLarge(width));
    }
    let data = ResponseFrame::from_bytes(b)?.into_result()?;
    Ok(if width == 64 { data } else { data >> (64 - width) })
}

/// Harness commands.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Command {
    SelectChip(u8),
    PowerOff,
    PowerOn,
    Read(ReadRequest),
}

impl Command {
    pub fn encode(&self) -> Result<Vec<u8>, ProtocolError> {
        Ok(match *self {
            Command::SelectChip(id) => vec![OP_SELECT_CHIP, id],
            Command::PowerOff => vec![OP_POWER_OFF],
            Command::PowerOn => vec![OP_POWER_ON],
            Command::Read(r) => {
                let [hi, lo] = encode_request(r)?;
                vec![OP_READ, hi, lo]
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Assembles the frame bit string character by character and packs it.
    fn frame_oracle(start: &str, data: u64, stop: &str) -> Vec<u8> {
        let mut bits = String::from(start);
        bits.push_str(&format!("{data:064b}"));
        bits.push_str(stop);
        bits.push_str("00");
        assert_eq!(bits.len(), 72);
        bits.as_bytes()
            .chunks(8)
            .map(|c| u8::from_str_radix(std::str::from_utf8(c).unwrap(), 2).unwrap())
            .collect()
    }

    #[test]
    fn request_examples() {
        assert_eq!(encode_request(ReadRequest::new(0, 0).unwrap()).unwrap(), [0x00, 0x00]);
        assert_eq!(encode_request(ReadRequest::new(1, 1).unwrap()).unwrap(), [0x08, 0x01]);
        assert_eq!(encode_request(ReadRequest::new(10, 1023).unwrap()).unwrap(), [0x53, 0xFF]);
        assert_eq!(decode_request([0x00, 0x00]).unwrap(), ReadRequest::new(0, 0).unwrap());
        assert_eq!(decode_request([0x53, 0xFF]).unwrap(), ReadRequest::new(10, 1023).unwrap());
        assert_eq!(decode_request([0x80, 0x00]), Err(ProtocolError::ReservedBitSet));
        assert_eq!(decode_request([0x58, 0x00]), Err(ProtocolError::SelectOutOfRange(11)));
        assert_eq!(ReadRequest::new(11, 0), Err(ProtocolError::SelectOutOfRange(11)));
        assert_eq!(ReadRequest::new(0, 2048), Err(ProtocolError::AddressOutOfRange(2048)));
        let sneaky = ReadRequest { puf_select: 12, address: 0 };
        assert_eq!(encode_request(sneaky), Err(ProtocolError::SelectOutOfRange(12)));
    }

    #[test]
    fn response_examples() {
        let zero = encode_response(0, 64).unwrap();
        assert_eq!(zero.to_vec(), frame_oracle("101", 0, "010"));
        assert_eq!(zero, [0xA0, 0, 0, 0, 0, 0, 0, 0, 0x08]);
        let ones = encode_response(u64::MAX, 64).unwrap();
        assert_eq!(ones.to_vec(), frame_oracle("101", u64::MAX, "010"));
        assert_eq!(ones, [0xBF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xFF, 0xE8]);
        assert_eq!(encode_response(0, 65), Err(ProtocolError::WidthTooLarge(65)));
    }

    #[test]
    fn narrow_words_are_high_aligned() {
        let f = encode_response(0xDEAD_BEEF, 32).unwrap();
        assert_eq!(f.to_vec(), frame_oracle("101", 0xDEAD_BEEF_0000_0000, "010"));
        assert_eq!(decode_response(&f, 32).unwrap(), 0xDEAD_BEEF);
    }

    #[test]
    fn error_frames() {
        let f = ResponseFrame::error(DeviceErrorCode::NotPoweredOn).to_bytes();
        assert_eq!(f[0] >> 5, START_ERROR);
        assert_eq!(decode_response(&f, 32), Err(ProtocolError::Device(DeviceErrorCode::NotPoweredOn)));
        let mut bad = encode_response(1, 64).unwrap();
        bad[8] |= 1;
        assert!(matches!(ResponseFrame::from_bytes(&bad), Err(ProtocolError::MalformedFrame(_))));
        let mut bad_stop = encode_response(1, 64).unwrap();
        bad_stop[8] ^= 0b0001_0000;
        assert!(matches!(ResponseFrame::from_bytes(&bad_stop), Err(ProtocolError::MalformedFrame(_))));
    }

    #[test]
    fn command_bytes() {
        assert_eq!(Command::SelectChip(7).encode().unwrap(), vec![0x01, 7]);
        assert_eq!(Command::PowerOn.encode().unwrap(), vec![0x03]);
        assert_eq!(Command::Read(ReadRequest::new(1, 1).unwrap()).encode().unwrap(), vec![0x04, 0x08, 0x01]);
    }

    proptest! {
        #[test]
        fn response_round_trip(word in any::<u64>(), width in 1usize..=64) {
            let mask = if width == 64 { u64::MAX } else { (1 << width) - 1 };
            let f = encode_response(word, width).unwrap();
            prop_assert_eq!(f.len(), FRAME_LEN);
            prop_assert_eq!(f[0] >> 5, START_OK);
            prop_assert_eq!(decode_response(&f, width).unwrap(), word & mask);
        }
    }
}
