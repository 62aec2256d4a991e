//! Discrete-time multi-unit double auction.
//!
//! One call market per timeslot. Bids and asks are sorted into demand and
//! supply step curves, the crossing of the curves picks a critical buyer `B`
//! and critical seller `S`, and those critical offers plus everything behind
//! them are left out of the trade. Participating buyers pay the critical
//! bid's price and participating sellers receive the critical ask's price,
//! which makes the mechanism truthful in the reported limit price. The side
//! with more volume is rationed proportionally to each offer.
//!
//! Volumes are integer Wh. Rationed volumes on the long side are floored;
//! the short side then trades exactly the total allocated to the long side,
//! apportioned by largest remainder, so bought and sold energy always match.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::units::{HouseId, MicroEuro, Price, Wh};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

/// A bid or ask for one timeslot.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Order {
    pub owner: HouseId,
    pub side: Side,
    /// Offered energy in Wh, strictly positive.
    pub volume: u64,
    pub limit_price: Price,
    pub slot: u32,
}

impl Order {
    pub fn bid(owner: HouseId, limit_price: Price, volume: u64, slot: u32) -> Order {
        Order { owner, side: Side::Buy, volume, limit_price, slot }
    }

    pub fn ask(owner: HouseId, limit_price: Price, volume: u64, slot: u32) -> Order {
        Order { owner, side: Side::Sell, volume, limit_price, slot }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum AuctionError {
    #[error("household {owner} submitted more than one {side:?} order for slot {slot}")]
    DuplicateOrder { owner: HouseId, side: Side, slot: u32 },
    #[error("order from household {owner} targets slot {found}, expected slot {expected}")]
    WrongSlot { owner: HouseId, expected: u32, found: u32 },
    #[error("order from household {owner} has zero volume")]
    ZeroVolume { owner: HouseId },
    #[error("order from household {owner} has negative limit price {price:?}")]
    NegativePrice { owner: HouseId, price: Price },
}

/// Bids by decreasing limit price and asks by increasing limit price.
///
/// Equal prices are ordered by volume (largest first) and then by owner id.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SortedBook {
    pub slot: Option<u32>,
    pub bids: Vec<Order>,
    pub asks: Vec<Order>,
}

fn tie_order(a: &Order, b: &Order) -> Ordering {
    b.volume.cmp(&a.volume).then(a.owner.cmp(&b.owner))
}

/// Validates one slot's orders and sorts them into a book.
pub fn build_book(orders: &[Order]) -> Result<SortedBook, AuctionError> {
    let slot = orders.first().map(|o| o.slot);
    let mut seen = BTreeSet::new();
    let mut bids = Vec::new();
    let mut asks = Vec::new();
    for order in orders {
        if let Some(expected) = slot {
            if order.slot != expected {
                return Err(AuctionError::WrongSlot {
                    owner: order.owner,
                    expected,
                    found: order.slot,
                });
            }
        }
        if order.volume == 0 {
            return Err(AuctionError::ZeroVolume { owner: order.owner });
        }
        if order.limit_price < Price::ZERO {
            return Err(AuctionError::NegativePrice { owner: order.owner, price: order.limit_price });
        }
        if !seen.insert((order.owner, order.side)) {
            return Err(AuctionError::DuplicateOrder {
                owner: order.owner,
                side: order.side,
                slot: order.slot,
            });
        }
        match order.side {
            Side::Buy => bids.push(*order),
            Side::Sell => asks.push(*order),
        }
    }
    bids.sort_by(|a, b| b.limit_price.cmp(&a.limit_price).then_with(|| tie_order(a, b)));
    asks.sort_by(|a, b| a.limit_price.cmp(&b.limit_price).then_with(|| tie_order(a, b)));
    Ok(SortedBook { slot, bids, asks })
}

/// Crossing point of the demand and supply curves.
///
/// `buyer` and `seller` are 0-based positions in the sorted book, so the
/// participating offers are `bids[..buyer]` and `asks[..seller]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CriticalPair {
    pub buyer: usize,
    pub seller: usize,
    /// Largest cumulative quantity (Wh) at which demand price >= supply price.
    pub quantity: u64,
}

/// Finds the critical buyer and seller, or `None` when the curves never cross.
///
/// Walks the merged breakpoints of both step curves. On each segment both
/// curves are constant, and since demand is non-increasing and supply
/// non-decreasing the crossing condition holds on a prefix of segments.
pub fn find_critical_pair(book: &SortedBook) -> Option<CriticalPair> {
    let (mut i, mut j) = (0usize, 0usize);
    let (mut cum_bid, mut cum_ask) = (0u64, 0u64);
    let mut found = None;
    while i < book.bids.len() && j < book.asks.len() {
        if book.bids[i].limit_price < book.asks[j].limit_price {
            break;
        }
        let bid_end = cum_bid + book.bids[i].volume;
        let ask_end = cum_ask + book.asks[j].volume;
        let end = bid_end.min(ask_end);
        found = Some(CriticalPair { buyer: i, seller: j, quantity: end });
        if bid_end == end {
            cum_bid = bid_end;
            i += 1;
        }
        if ask_end == end {
            cum_ask = ask_end;
            j += 1;
        }
    }
    found
}

/// Outcome of one slot's auction.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClearingResult {
    pub slot: u32,
    /// Signed traded volume per household: positive bought, negative sold.
    pub trades: BTreeMap<HouseId, Wh>,
    /// Price paid by every participating buyer (the critical bid's price).
    pub buyer_price: Option<Price>,
    /// Price received by every participating seller (the critical ask's price).
    pub seller_price: Option<Price>,
    /// Buyer payments minus seller receipts.
    pub surplus: MicroEuro,
    /// Owners of the critical offers and of every offer behind them.
    pub excluded: BTreeSet<HouseId>,
}

impl ClearingResult {
    pub fn empty(slot: u32) -> ClearingResult {
        ClearingResult { slot, ..Default::default() }
    }

    /// Total energy bought in the slot (equal to the total sold).
    pub fn volume(&self) -> Wh {
        self.trades.values().filter(|v| **v > 0).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.trades.is_empty()
    }
}

/// Proportional allocation of `total` over `volumes`, rounded down.
fn ration_floor(volumes: &[u64], total: u64, offered: u64) -> Vec<u64> {
    volumes
        .iter()
        .map(|&v| ((v as u128 * total as u128) / offered as u128) as u64)
        .collect()
}

/// Largest-remainder apportionment of `total` over the offers, ties by owner.
fn ration_exact(offers: &[Order], total: u64, offered: u64) -> Vec<u64> {
    let mut alloc = Vec::with_capacity(offers.len());
    let mut remainders = Vec::with_capacity(offers.len());
    for (k, o) in offers.iter().enumerate() {
        let num = o.volume as u128 * total as u128;
        alloc.push((num / offered as u128) as u64);
        remainders.push((num % offered as u128, o.owner, k));
    }
    let mut left = total - alloc.iter().sum::<u64>();
    remainders.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    for &(rem, _, k) in &remainders {
        if left == 0 || rem == 0 {
            break;
        }
        alloc[k] += 1;
        left -= 1;
    }
    debug_assert_eq!(left, 0);
    alloc
}

/// Clears a sorted book.
pub fn clear_auction(book: &SortedBook) -> ClearingResult {
    let slot = book.slot.unwrap_or(0);
    let Some(pair) = find_critical_pair(book) else {
        return ClearingResult::empty(slot);
    };
    let excluded: BTreeSet<HouseId> = book.bids[pair.buyer..]
        .iter()
        .chain(&book.asks[pair.seller..])
        .map(|o| o.owner)
        .collect();
    if pair.buyer == 0 || pair.seller == 0 {
        return ClearingResult { excluded, ..ClearingResult::empty(slot) };
    }

    let buyers = &book.bids[..pair.buyer];
    let sellers = &book.asks[..pair.seller];
    let buyer_price = book.bids[pair.buyer].limit_price;
    let seller_price = book.asks[pair.seller].limit_price;
    let buy_volumes: Vec<u64> = buyers.iter().map(|o| o.volume).collect();
    let sell_volumes: Vec<u64> = sellers.iter().map(|o| o.volume).collect();
    let demand: u64 = buy_volumes.iter().sum();
    let supply: u64 = sell_volumes.iter().sum();

    let (bought, sold) = if demand >= supply {
        let bought = ration_floor(&buy_volumes, supply, demand);
        let total = bought.iter().sum();
        (bought, ration_exact(sellers, total, supply))
    } else {
        let sold = ration_floor(&sell_volumes, demand, supply);
        let total = sold.iter().sum();
        (ration_exact(buyers, total, demand), sold)
    };

    let mut trades = BTreeMap::new();
    for (o, &q) in buyers.iter().zip(&bought) {
        if q > 0 {
            *trades.entry(o.owner).or_insert(0) += q as Wh;
        }
    }
    for (o, &q) in sellers.iter().zip(&sold) {
        if q > 0 {
            *trades.entry(o.owner).or_insert(0) -= q as Wh;
        }
    }
    trades.retain(|_, v| *v != 0);
    let traded: u64 = bought.iter().sum();
    if traded == 0 {
        return ClearingResult { excluded, ..ClearingResult::empty(slot) };
    }
    ClearingResult {
        slot,
        trades,
        buyer_price: Some(buyer_price),
        seller_price: Some(seller_price),
        surplus: (buyer_price.0 - seller_price.0) * traded as i64,
        excluded,
    }
}

/// Validates, sorts and clears the orders of one slot.
pub fn run_slot_market(orders: &[Order], slot: u32) -> Result<ClearingResult, AuctionError> {
    if let Some(o) = orders.iter().find(|o| o.slot != slot) {
        return Err(AuctionError::WrongSlot { owner: o.owner, expected: slot, found: o.slot });
    }
    let mut book = build_book(orders)?;
    book.slot = Some(slot);
    Ok(clear_auction(&book))
}
