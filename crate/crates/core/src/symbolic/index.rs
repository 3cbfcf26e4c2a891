use std::cmp::Ordering;
use std::fmt;

/// A symbolic time variable: a loop index such as `i` or `j`, or the
/// stopping time `tau`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum TimeVar {
    Named(String),
    Tau,
}

impl TimeVar {
    pub fn named(name: &str) -> Self {
        TimeVar::Named(name.to_string())
    }

    pub fn is_named(&self, name: &str) -> bool {
        matches!(self, TimeVar::Named(n) if n == name)
    }
}

impl fmt::Display for TimeVar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TimeVar::Named(n) => f.write_str(n),
            TimeVar::Tau => f.write_str("tau"),
        }
    }
}

/// An affine time index `base + offset`; `base == None` is an absolute index.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct IndexExpr {
    pub base: Option<TimeVar>,
    pub offset: i64,
}

impl IndexExpr {
    pub fn abs(k: i64) -> Self {
        IndexExpr { base: None, offset: k }
    }

    pub fn var(v: TimeVar, offset: i64) -> Self {
        IndexExpr { base: Some(v), offset }
    }

    pub fn named(name: &str, offset: i64) -> Self {
        Self::var(TimeVar::named(name), offset)
    }

    pub fn tau(offset: i64) -> Self {
        Self::var(TimeVar::Tau, offset)
    }

    pub fn shifted(&self, by: i64) -> Self {
        IndexExpr { base: self.base.clone(), offset: self.offset + by }
    }

    pub fn uses(&self, v: &TimeVar) -> bool {
        self.base.as_ref() == Some(v)
    }

    /// `Some(ordering)` when both indices share a base (or are both absolute).
    pub fn compare(&self, other: &IndexExpr) -> Option<Ordering> {
        if self.base == other.base {
            Some(self.offset.cmp(&other.offset))
        } else {
            None
        }
    }

    /// Replace the base variable `v` with the index `to`.
    pub fn rebase(&self, v: &TimeVar, to: &IndexExpr) -> IndexExpr {
        if self.uses(v) {
            to.shifted(self.offset)
        } else {
            self.clone()
        }
    }
}

// Absolute indices first, then by base variable, then offset descending.
impl Ord for IndexExpr {
    fn cmp(&self, other: &Self) -> Ordering {
        match (&self.base, &other.base) {
            (None, None) => self.offset.cmp(&other.offset),
            (None, Some(_)) => Ordering::Less,
            (Some(_), None) => Ordering::Greater,
            (Some(a), Some(b)) => a.cmp(b).then_with(|| other.offset.cmp(&self.offset)),
        }
    }
}

impl PartialOrd for IndexExpr {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for IndexExpr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.base {
            None => write!(f, "{}", self.offset),
            Some(v) => {
                write!(f, "{v}")?;
                match self.offset.cmp(&0) {
                    Ordering::Equal => Ok(()),
                    Ordering::Less => write!(f, "-{}", -self.offset),
                    Ordering::Greater => write!(f, "+{}", self.offset),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ordering_puts_absolute_first_and_recent_offsets_first() {
        let mut v = [IndexExpr::named("i", -1), IndexExpr::abs(0), IndexExpr::named("i", 0), IndexExpr::tau(0)];
        v.sort();
        let shown: Vec<String> = v.iter().map(|i| i.to_string()).collect();
        assert_eq!(shown, ["0", "i", "i-1", "tau"]);
    }

    #[test]
    fn rebase_keeps_offsets() {
        let i = TimeVar::named("i");
        let e = IndexExpr::named("i", -2);
        assert_eq!(e.rebase(&i, &IndexExpr::tau(0)), IndexExpr::tau(-2));
        assert_eq!(IndexExpr::abs(3).rebase(&i, &IndexExpr::tau(0)), IndexExpr::abs(3));
    }
}
