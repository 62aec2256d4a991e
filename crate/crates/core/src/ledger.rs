//! Append-only hash-chained record of market clearings and settlements.
//!
//! Entry hash: `SHA-256(index as u64 BE || previous_hash || payload bytes)`.
//! The genesis entry links to 32 zero bytes.
//!
//! Payload bytes (all integers big-endian):
//!
//! ```text
//! clearing:   0x01 day:u32 slot:u32
//!             buyer_price:  flag:u8 [price:i64]
//!             seller_price: flag:u8 [price:i64]
//!             surplus:i64
//!             n:u32 { house:u32 volume:i64 }*n      ascending house, + bought / - sold
//!             m:u32 { house:u32 }*m                 ascending house
//! settlement: 0x02 day:u32 slot:u32
//!             n:u32 { house:u32 contracted:i64 metered:i64 verified:u8 ecoins:u64 }*n
//! ```
//!
//! Prices are tenths of a euro-cent per kWh, volumes Wh and the surplus
//! micro-euros.

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::auction::ClearingResult;
use crate::units::{HouseId, MicroEuro, Price, Wh};

pub type Hash = [u8; 32];

pub const GENESIS_HASH: Hash = [0; 32];

const TAG_CLEARING: u8 = 1;
const TAG_SETTLEMENT: u8 = 2;

#[derive(Debug, Error)]
pub enum LedgerError {
    #[error("no meter reading for trading house {house} in slot {slot}")]
    MissingMeter { house: HouseId, slot: u32 },
    #[error("malformed payload: {0}")]
    Decode(String),
    #[error("ledger line {line}: {reason}")]
    Import { line: usize, reason: String },
    #[error("ledger I/O: {0}")]
    Io(#[from] std::io::Error),
}

/// Outcome of delivery verification for one house and slot.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SettlementRecord {
    pub house: HouseId,
    pub slot: u32,
    /// Cleared volume, + bought / - sold.
    pub contracted: Wh,
    pub metered: Wh,
    pub verified: bool,
    pub ecoins_awarded: u64,
}

/// Market outcome as recorded on the ledger.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ClearingRecord {
    pub buyer_price: Option<Price>,
    pub seller_price: Option<Price>,
    pub surplus: MicroEuro,
    pub trades: BTreeMap<HouseId, Wh>,
    pub excluded: BTreeSet<HouseId>,
}

impl From<&ClearingResult> for ClearingRecord {
    fn from(r: &ClearingResult) -> Self {
        ClearingRecord {
            buyer_price: r.buyer_price,
            seller_price: r.seller_price,
            surplus: r.surplus,
            trades: r.trades.clone(),
            excluded: r.excluded.clone(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Payload {
    Clearing { day: u32, slot: u32, clearing: ClearingRecord },
    Settlement { day: u32, slot: u32, records: Vec<SettlementRecord> },
}

impl Payload {
    pub fn kind(&self) -> &'static str {
        match self {
            Payload::Clearing { .. } => "clearing",
            Payload::Settlement { .. } => "settlement",
        }
    }

    /// Canonical byte encoding.
    pub fn encode(&self) -> Vec<u8> {
        let mut b = Vec::new();
        match self {
            Payload::Clearing { day, slot, clearing } => {
                b.push(TAG_CLEARING);
                b.extend(day.to_be_bytes());
                b.extend(slot.to_be_bytes());
                for p in [clearing.buyer_price, clearing.seller_price] {
                    match p {
                        Some(p) => {
                            b.push(1);
                            b.extend(p.0.to_be_bytes());
                        }
                        None => b.push(0),
                    }
                }
                b.extend(clearing.surplus.to_be_bytes());
                b.extend((clearing.trades.len() as u32).to_be_bytes());
                for (h, v) in &clearing.trades {
                    b.extend(h.to_be_bytes());
                    b.extend(v.to_be_bytes());
                }
                b.extend((clearing.excluded.len() as u32).to_be_bytes());
                for h in &clearing.excluded {
                    b.extend(h.to_be_bytes());
                }
            }
            Payload::Settlement { day, slot, records } => {
                b.push(TAG_SETTLEMENT);
                b.extend(day.to_be_bytes());
                b.extend(slot.to_be_bytes());
                b.extend((records.len() as u32).to_be_bytes());
                for r in records {
                    b.extend(r.house.to_be_bytes());
                    b.extend(r.contracted.to_be_bytes());
                    b.extend(r.metered.to_be_bytes());
                    b.push(u8::from(r.verified));
                    b.extend(r.ecoins_awarded.to_be_bytes());
                }
            }
        }
        b
    }

    pub fn decode(bytes: &[u8]) -> Result<Payload, LedgerError> {
        let mut r = Reader { bytes, pos: 0 };
        let tag = r.u8()?;
        let day = r.u32()?;
        let slot = r.u32()?;
        let payload = match tag {
            TAG_CLEARING => {
                let mut prices = [None, None];
                for p in &mut prices {
                    *p = match r.u8()? {
                        0 => None,
                        1 => Some(Price(r.i64()?)),
                        f => return Err(LedgerError::Decode(format!("bad price flag {f}"))),
                    };
                }
                let surplus = r.i64()?;
                let mut trades = BTreeMap::new();
                for _ in 0..r.u32()? {
                    let h = r.u32()?;
                    trades.insert(h, r.i64()?);
                }
                let mut excluded = BTreeSet::new();
                for _ in 0..r.u32()? {
                    excluded.insert(r.u32()?);
                }
                let clearing = ClearingRecord {
                    buyer_price: prices[0],
                    seller_price: prices[1],
                    surplus,
                    trades,
                    excluded,
                };
                Payload::Clearing { day, slot, clearing }
            }
            TAG_SETTLEMENT => {
                let mut records = Vec::new();
                for _ in 0..r.u32()? {
                    let house = r.u32()?;
                    let contracted = r.i64()?;
                    let metered = r.i64()?;
                    let verified = match r.u8()? {
                        0 => false,
                        1 => true,
                        f => return Err(LedgerError::Decode(format!("bad verified flag {f}"))),
                    };
                    let ecoins_awarded = r.u64()?;
                    records.push(SettlementRecord {
                        house,
                        slot,
                        contracted,
                        metered,
                        verified,
                        ecoins_awarded,
                    });
                }
                Payload::Settlement { day, slot, records }
            }
            t => return Err(LedgerError::Decode(format!("unknown payload tag {t}"))),
        };
        if r.pos != bytes.len() {
            return Err(LedgerError::Decode("trailing bytes".into()));
        }
        Ok(payload)
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Reader<'_> {
    fn take<const N: usize>(&mut self) -> Result<[u8; N], LedgerError> {
        let end = self.pos + N;
        let s = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| LedgerError::Decode("truncated payload".into()))?;
        self.pos = end;
        Ok(s.try_into().expect("slice length"))
    }
    fn u8(&mut self) -> Result<u8, LedgerError> {
        Ok(self.take::<1>()?[0])
    }
    fn u32(&mut self) -> Result<u32, LedgerError> {
        Ok(u32::from_be_bytes(self.take()?))
    }
    fn u64(&mut self) -> Result<u64, LedgerError> {
        Ok(u64::from_be_bytes(self.take()?))
    }
    fn i64(&mut self) -> Result<i64, LedgerError> {
        Ok(i64::from_be_bytes(self.take()?))
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LedgerEntry {
    pub index: u64,
    pub previous_hash: Hash,
    /// Canonical payload bytes; the hashed form.
    pub payload: Vec<u8>,
    pub entry_hash: Hash,
}

impl LedgerEntry {
    pub fn decode(&self) -> Result<Payload, LedgerError> {
        Payload::decode(&self.payload)
    }
}

pub fn entry_hash(index: u64, previous: &Hash, payload: &[u8]) -> Hash {
    let mut h = Sha256::new();
    h.update(index.to_be_bytes());
    h.update(previous);
    h.update(payload);
    h.finalize().into()
}

#[derive(Serialize, Deserialize)]
struct ExportLine {
    index: u64,
    kind: String,
    previous_hash: String,
    payload: String,
    entry_hash: String,
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Ledger {
    pub entries: Vec<LedgerEntry>,
}

impl Ledger {
    pub fn new() -> Ledger {
        Ledger::default()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn head(&self) -> Hash {
        self.entries.last().map_or(GENESIS_HASH, |e| e.entry_hash)
    }

    pub fn append(&mut self, payload: &Payload) -> &LedgerEntry {
        let index = self.entries.len() as u64;
        let previous_hash = self.head();
        let payload = payload.encode();
        let entry_hash = entry_hash(index, &previous_hash, &payload);
        self.entries.push(LedgerEntry { index, previous_hash, payload, entry_hash });
        self.entries.last().expect("just pushed")
    }

    /// Recomputes every index, link and hash; `Err(k)` names the first bad entry.
    pub fn verify_chain(&self) -> Result<(), usize> {
        let mut previous = GENESIS_HASH;
        for (k, e) in self.entries.iter().enumerate() {
            if e.index != k as u64
                || e.previous_hash != previous
                || entry_hash(e.index, &e.previous_hash, &e.payload) != e.entry_hash
            {
                return Err(k);
            }
            previous = e.entry_hash;
        }
        Ok(())
    }

    /// One JSON object per line with hex-encoded digests and payload.
    pub fn export<W: Write>(&self, mut out: W) -> Result<(), LedgerError> {
        for e in &self.entries {
            let kind = e.decode().map(|p| p.kind()).unwrap_or("unknown");
            let line = ExportLine {
                index: e.index,
                kind: kind.to_string(),
                previous_hash: hex::encode(e.previous_hash),
                payload: hex::encode(&e.payload),
                entry_hash: hex::encode(e.entry_hash),
            };
            serde_json::to_writer(&mut out, &line).map_err(std::io::Error::from)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }

    /// Reads an export without verifying it.
    pub fn import<R: BufRead>(input: R) -> Result<Ledger, LedgerError> {
        let mut entries = Vec::new();
        for (n, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let bad = |reason: String| LedgerError::Import { line: n + 1, reason };
            let l: ExportLine = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            let digest = |s: &str| -> Result<Hash, LedgerError> {
                let v = hex::decode(s).map_err(|e| bad(e.to_string()))?;
                v.try_into().map_err(|_| bad("digest is not 32 bytes".into()))
            };
            entries.push(LedgerEntry {
                index: l.index,
                previous_hash: digest(&l.previous_hash)?,
                payload: hex::decode(&l.payload).map_err(|e| bad(e.to_string()))?,
                entry_hash: digest(&l.entry_hash)?,
            });
        }
        Ok(Ledger { entries })
    }
}

/// Delivery tolerance: `max(relative * |contracted|, min_wh)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Tolerance {
    pub relative: f64,
    pub min_wh: Wh,
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance { relative: 0.05, min_wh: 10 }
    }
}

impl Tolerance {
    pub fn accepts(&self, contracted: Wh, metered: Wh) -> bool {
        let allowed = (self.relative * contracted.abs() as f64).max(self.min_wh as f64);
        ((metered - contracted).abs() as f64) <= allowed
    }
}

/// Verifies each trading house's metered flow against its contract.
pub fn settle(
    slot: u32,
    contracted: &BTreeMap<HouseId, Wh>,
    metered: &BTreeMap<HouseId, Wh>,
    tolerance: Tolerance,
) -> Result<Vec<SettlementRecord>, LedgerError> {
    contracted
        .iter()
        .map(|(&house, &c)| {
            let &m = metered.get(&house).ok_or(LedgerError::MissingMeter { house, slot })?;
            let verified = tolerance.accepts(c, m);
            Ok(SettlementRecord {
                house,
                slot,
                contracted: c,
                metered: m,
                verified,
                ecoins_awarded: if verified { c.unsigned_abs() } else { 0 },
            })
        })
        .collect()
}
