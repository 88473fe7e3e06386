use std::fmt;
use std::ops::{Add, Sub};
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

/// A calendar quarter, `YYYY-Qn`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Quarter {
    year: i32,
    index: u8,
}

impl Quarter {
    pub fn new(year: i32, index: u8) -> Option<Self> {
        (1..=4).contains(&index).then_some(Self { year, index })
    }

    /// The quarter containing `date`.
    pub fn containing(date: NaiveDate) -> Self {
        Self {
            year: date.year(),
            index: (date.month0() / 3 + 1) as u8,
        }
    }

    pub fn year(self) -> i32 {
        self.year
    }

    /// Quarter number within the year, 1..=4.
    pub fn index(self) -> u8 {
        self.index
    }

    pub fn first_day(self) -> NaiveDate {
        NaiveDate::from_ymd_opt(self.year, 3 * self.index as u32 - 2, 1)
            .expect("quarter start is a valid date")
    }

    fn ordinal(self) -> i64 {
        self.year as i64 * 4 + (self.index as i64 - 1)
    }

    fn from_ordinal(ordinal: i64) -> Self {
        Self {
            year: ordinal.div_euclid(4) as i32,
            index: (ordinal.rem_euclid(4) + 1) as u8,
        }
    }

    /// Signed number of quarters from `earlier` to `self`.
    pub fn quarters_since(self, earlier: Quarter) -> i64 {
        self.ordinal() - earlier.ordinal()
    }
}

impl Add<i64> for Quarter {
    type Output = Quarter;

    fn add(self, quarters: i64) -> Quarter {
        Quarter::from_ordinal(self.ordinal() + quarters)
    }
}

impl Sub<i64> for Quarter {
    type Output = Quarter;

    fn sub(self, quarters: i64) -> Quarter {
        Quarter::from_ordinal(self.ordinal() - quarters)
    }
}

impl fmt::Display for Quarter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:04}-Q{}", self.year, self.index)
    }
}

impl FromStr for Quarter {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("`{s}` is not a quarter of the form YYYY-Qn");
        let (year, index) = s.trim().split_once("-Q").ok_or_else(bad)?;
        if year.len() != 4 || index.len() != 1 {
            return Err(bad());
        }
        let year: i32 = year.parse().map_err(|_| bad())?;
        let index: u8 = index.parse().map_err(|_| bad())?;
        Quarter::new(year, index).ok_or_else(bad)
    }
}

impl TryFrom<String> for Quarter {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Quarter> for String {
    fn from(q: Quarter) -> String {
        q.to_string()
    }
}
