//! Grid-scan reference for the double auction.
//!
//! Evaluates the demand and supply step curves at every integer Wh and
//! re-derives the critical pair and the attribution from those curves.

use std::collections::BTreeMap;

use lvmarket::auction::{Order, Side};
use lvmarket::units::{HouseId, Price};
use rand::Rng;

#[derive(Debug, PartialEq, Eq)]
pub struct OracleOutcome {
    pub trades: BTreeMap<HouseId, i64>,
    pub buyer_price: Option<Price>,
    pub seller_price: Option<Price>,
    pub surplus: i64,
}

fn sorted(orders: &[Order], side: Side) -> Vec<Order> {
    let mut v: Vec<Order> = orders.iter().filter(|o| o.side == side).copied().collect();
    // price first, then larger volume, then lower owner id
    v.sort_by_key(|o| {
        let p = if side == Side::Buy { -o.limit_price.0 } else { o.limit_price.0 };
        (p, std::cmp::Reverse(o.volume), o.owner)
    });
    v
}

/// Index of the offer whose cumulative interval contains `q` (1-based Wh).
fn offer_at(curve: &[Order], q: u64) -> Option<usize> {
    let mut cum = 0;
    for (k, o) in curve.iter().enumerate() {
        cum += o.volume;
        if q <= cum {
            return Some(k);
        }
    }
    None
}

/// `(bid index, ask index, q*)` by scanning every Wh.
pub fn critical_by_scan(orders: &[Order]) -> Option<(usize, usize, u64)> {
    let bids = sorted(orders, Side::Buy);
    let asks = sorted(orders, Side::Sell);
    let mut best = None;
    let mut q = 1;
    while let (Some(b), Some(a)) = (offer_at(&bids, q), offer_at(&asks, q)) {
        if bids[b].limit_price >= asks[a].limit_price {
            best = Some((b, a, q));
        }
        q += 1;
    }
    best
}

fn largest_remainder(vols: &[(u64, HouseId)], total: u64) -> Vec<u64> {
    let offered: u64 = vols.iter().map(|v| v.0).sum();
    let mut out: Vec<u64> = vols.iter().map(|v| v.0 * total / offered).collect();
    let mut rest = total - out.iter().sum::<u64>();
    let mut idx: Vec<usize> = (0..vols.len()).collect();
    idx.sort_by_key(|&k| (std::cmp::Reverse(vols[k].0 * total % offered), vols[k].1));
    for k in idx {
        if rest == 0 || (vols[k].0 * total).is_multiple_of(offered) {
            break;
        }
        out[k] += 1;
        rest -= 1;
    }
    out
}

pub fn clear_by_scan(orders: &[Order]) -> OracleOutcome {
    let empty = OracleOutcome {
        trades: BTreeMap::new(),
        buyer_price: None,
        seller_price: None,
        surplus: 0,
    };
    let Some((b, a, _)) = critical_by_scan(orders) else { return empty };
    let bids = sorted(orders, Side::Buy);
    let asks = sorted(orders, Side::Sell);
    let vb: u64 = bids[..b].iter().map(|o| o.volume).sum();
    let vs: u64 = asks[..a].iter().map(|o| o.volume).sum();
    if vb == 0 || vs == 0 {
        return empty;
    }
    let pb = bids[b].limit_price;
    let ps = asks[a].limit_price;
    let (buy_alloc, sell_alloc): (Vec<u64>, Vec<u64>) = if vb >= vs {
        let buy: Vec<u64> = bids[..b].iter().map(|o| o.volume * vs / vb).collect();
        let t = buy.iter().sum();
        let sell = largest_remainder(&asks[..a].iter().map(|o| (o.volume, o.owner)).collect::<Vec<_>>(), t);
        (buy, sell)
    } else {
        let sell: Vec<u64> = asks[..a].iter().map(|o| o.volume * vb / vs).collect();
        let t = sell.iter().sum();
        let buy = largest_remainder(&bids[..b].iter().map(|o| (o.volume, o.owner)).collect::<Vec<_>>(), t);
        (buy, sell)
    };
    let mut trades = BTreeMap::new();
    for (o, q) in bids.iter().zip(&buy_alloc) {
        *trades.entry(o.owner).or_insert(0i64) += *q as i64;
    }
    for (o, q) in asks.iter().zip(&sell_alloc) {
        *trades.entry(o.owner).or_insert(0i64) -= *q as i64;
    }
    trades.retain(|_, v| *v != 0);
    let traded: u64 = buy_alloc.iter().sum();
    if traded == 0 {
        return empty;
    }
    OracleOutcome {
        trades,
        buyer_price: Some(pb),
        seller_price: Some(ps),
        surplus: (pb.0 - ps.0) * traded as i64,
    }
}

/// Random slot book: distinct owners, buyers numbered from 0, sellers from 100.
pub fn random_orders(
    rng: &mut impl Rng,
    max_side: usize,
    max_price: i64,
    max_volume: u64,
) -> Vec<Order> {
    let nb = rng.random_range(0..=max_side);
    let ns = rng.random_range(0..=max_side);
    let mut orders = Vec::new();
    for i in 0..nb {
        orders.push(Order::bid(
            i as u32,
            Price(rng.random_range(0..=max_price)),
            rng.random_range(1..=max_volume),
            0,
        ));
    }
    for j in 0..ns {
        orders.push(Order::ask(
            100 + j as u32,
            Price(rng.random_range(0..=max_price)),
            rng.random_range(1..=max_volume),
            0,
        ));
    }
    orders
}
