//! Limit order books as total cost functions.

use num_traits::{Signed, Zero};

use super::CostError;
use crate::kernel::ScalarPwl;
use crate::num::{parse_ext, parse_rat, ExtReal, Rat};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Bid,
    Ask,
}

/// Price levels of one side, best price first. Only the last depth may be infinite.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct OrderBookSide {
    pub levels: Vec<(Rat, ExtReal)>,
}

impl OrderBookSide {
    pub fn new(levels: Vec<(Rat, ExtReal)>) -> Self {
        OrderBookSide { levels }
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn best(&self) -> Option<&Rat> {
        self.levels.first().map(|(p, _)| p)
    }

    fn validate(&self, side: Side) -> Result<(), CostError> {
        let name = match side {
            Side::Bid => "bid",
            Side::Ask => "ask",
        };
        for (i, (price, depth)) in self.levels.iter().enumerate() {
            if price.is_negative() {
                return Err(CostError::Book(format!("{name} level {i} has a negative price")));
            }
            match depth {
                ExtReal::Finite(d) if d.is_positive() => {}
                ExtReal::PosInf if i + 1 == self.levels.len() => {}
                ExtReal::PosInf => {
                    return Err(CostError::Book(format!(
                        "{name} level {i} has infinite depth but is not the last level"
                    )))
                }
                _ => return Err(CostError::Book(format!("{name} level {i} needs positive depth"))),
            }
        }
        for w in self.levels.windows(2) {
            let ordered = match side {
                Side::Ask => w[0].0 <= w[1].0,
                Side::Bid => w[0].0 >= w[1].0,
            };
            if !ordered {
                return Err(CostError::Book(format!(
                    "{name} prices must be {}",
                    if side == Side::Ask { "ascending" } else { "descending" }
                )));
            }
        }
        Ok(())
    }
}

/// Total cost of a market order: the integral of the marginal price.
///
/// Buying beyond the total ask depth is impossible; selling beyond the total
/// bid depth earns nothing more. An empty side blocks that direction.
pub fn build_order_book(bids: &OrderBookSide, asks: &OrderBookSide) -> Result<ScalarPwl, CostError> {
    bids.validate(Side::Bid)?;
    asks.validate(Side::Ask)?;
    if let (Some(b), Some(a)) = (bids.best(), asks.best()) {
        if b > a {
            return Err(CostError::Crossed {
                bid: b.clone(),
                ask: a.clone(),
            });
        }
    }

    let mut knots = Vec::new();
    let mut slopes = Vec::new();
    let mut lo = Some(Rat::zero());
    if !bids.is_empty() {
        // Walk the bid side outward from zero, then reverse.
        let mut left_knots = Vec::new();
        let mut left_slopes = Vec::new();
        let mut cum = Rat::zero();
        lo = None;
        let mut unlimited = false;
        for (price, depth) in &bids.levels {
            left_slopes.push(price.clone());
            match depth {
                ExtReal::Finite(d) => {
                    cum -= d;
                    left_knots.push(cum.clone());
                }
                _ => unlimited = true,
            }
        }
        if !unlimited {
            left_slopes.push(Rat::zero());
        }
        // left_knots[k] separates left_slopes[k] (inner) from left_slopes[k+1].
        left_knots.reverse();
        left_slopes.reverse();
        knots.extend(left_knots);
        slopes.extend(left_slopes);
    }

    let mut hi = Some(Rat::zero());
    if asks.is_empty() {
        if slopes.is_empty() {
            slopes.push(Rat::zero());
        }
    } else {
        hi = None;
        let mut cum = Rat::zero();
        let mut first = true;
        for (price, depth) in &asks.levels {
            if first {
                if !slopes.is_empty() {
                    knots.push(Rat::zero());
                }
                first = false;
            } else {
                knots.push(cum.clone());
            }
            slopes.push(price.clone());
            if let ExtReal::Finite(d) = depth {
                cum += d;
            }
        }
        if !matches!(asks.levels.last(), Some((_, ExtReal::PosInf))) {
            hi = Some(cum);
        }
    }
    ScalarPwl::new(lo, hi, knots, slopes).map_err(CostError::from)
}

/// Reads `side,price,depth` rows; an optional header row is skipped.
pub fn parse_order_book_csv(text: &str) -> Result<(OrderBookSide, OrderBookSide), CostError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let mut bids = OrderBookSide::default();
    let mut asks = OrderBookSide::default();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CostError::Csv(e.to_string()))?;
        let line = record.position().map_or(i + 1, |p| p.line() as usize);
        if record.len() != 3 {
            return Err(CostError::Csv(format!("line {line}: expected 3 fields, found {}", record.len())));
        }
        if i == 0 && record[0].eq_ignore_ascii_case("side") {
            continue;
        }
        let price = parse_rat(&record[1]).map_err(|e| CostError::Csv(format!("line {line}: {e}")))?;
        let depth = parse_ext(&record[2]).map_err(|e| CostError::Csv(format!("line {line}: {e}")))?;
        match record[0].to_ascii_lowercase().as_str() {
            "bid" | "b" => bids.levels.push((price, depth)),
            "ask" | "a" => asks.levels.push((price, depth)),
            other => return Err(CostError::Csv(format!("line {line}: unknown side {other:?}"))),
        }
    }
    Ok((bids, asks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::Interval;
    use crate::num::int;

    fn side(levels: &[(i64, i64)]) -> OrderBookSide {
        OrderBookSide::new(
            levels
                .iter()
                .map(|(p, d)| (int(*p), if *d < 0 { ExtReal::PosInf } else { ExtReal::Finite(int(*d)) }))
                .collect(),
        )
    }

    fn fin(n: i64) -> ExtReal {
        ExtReal::Finite(int(n))
    }

    #[test]
    fn ask_only_book() {
        let f = build_order_book(&side(&[]), &side(&[(10, 5), (12, 5)])).unwrap();
        assert_eq!(f.eval(&int(7)), fin(74));
        assert_eq!(f.lo(), Some(&int(0)));
        assert_eq!(f.hi(), Some(&int(10)));
    }

    #[test]
    fn bid_only_book() {
        let f = build_order_book(&side(&[(9, 5)]), &side(&[])).unwrap();
        assert_eq!(f.eval(&int(-7)), fin(-45));
        assert_eq!(f.eval(&int(-100)), fin(-45));
        assert_eq!(f.eval(&int(1)), ExtReal::PosInf);
    }

    #[test]
    fn two_sided_book() {
        let f = build_order_book(&side(&[(9, 5), (8, -1)]), &side(&[(10, 5), (12, 5)])).unwrap();
        assert_eq!(f.market_prices(), Interval::new(fin(9), fin(10)));
        assert_eq!(f.eval(&int(-6)), fin(-53));
        assert_eq!(f.lo(), None);
        assert_eq!(f.subdifferential(&int(5)), Interval::new(fin(10), fin(12)));
        // Integration oracle on a fine grid of the marginal price.
        let marginal = |u: f64| {
            if u > 0.0 {
                if u <= 5.0 { 10.0 } else { 12.0 }
            } else if u >= -5.0 {
                9.0
            } else {
                8.0
            }
        };
        for x in [-9.0f64, -5.0, -2.5, 0.0, 3.0, 5.0, 8.0, 10.0] {
            // Quarter-unit cells never straddle a price jump.
            let n = (x.abs() * 4.0) as usize;
            let h = if n == 0 { 0.0 } else { x / n as f64 };
            let integral: f64 = (0..n).map(|i| marginal(h * (i as f64 + 0.5)) * h).sum();
            let exact = f.eval(&crate::num::from_f64(x).unwrap()).to_f64();
            assert!((exact - integral).abs() < 1e-9, "{x}: {exact} vs {integral}");
        }
    }

    #[test]
    fn rejects_crossed_and_malformed_books() {
        assert!(matches!(
            build_order_book(&side(&[(11, 1)]), &side(&[(10, 1)])),
            Err(CostError::Crossed { .. })
        ));
        assert!(build_order_book(&side(&[]), &side(&[(12, 1), (10, 1)])).is_err());
        assert!(build_order_book(&side(&[]), &side(&[(10, -1), (12, 1)])).is_err());
        assert!(build_order_book(&side(&[]), &side(&[(10, 0)])).is_err());
    }

    #[test]
    fn csv_ingestion() {
        let text = "side,price,depth\nask,10,5\nask,12.0,5\nbid,9,5\nbid,8.5,inf\n";
        let (bids, asks) = parse_order_book_csv(text).unwrap();
        assert_eq!(asks.levels.len(), 2);
        assert_eq!(bids.levels[1].1, ExtReal::PosInf);
        let f = build_order_book(&bids, &asks).unwrap();
        assert_eq!(f.eval(&int(7)), fin(74));
        assert!(parse_order_book_csv("ask,10\n").is_err());
        assert!(parse_order_book_csv("buy,10,1\n").is_err());
        assert!(parse_order_book_csv("ask,ten,1\n").is_err());
    }
}
