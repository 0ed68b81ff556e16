use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::dd::{Dd, Scalar};
use super::map1d::{orbit, IntervalMap1D, Side};
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Symbol {
    L,
    R,
    /// Iterate exactly at 0; terminates the sequence.
    Locus,
    /// Iterate outside `[−1, 1]` or non-finite; terminates the sequence.
    Escape,
}

impl Symbol {
    pub fn of<S: Scalar>(y: S) -> Symbol {
        if !y.is_finite() || y > S::from_f64(1.0) || y < S::from_f64(-1.0) {
            return Symbol::Escape;
        }
        match y.signum_cmp() {
            Ordering::Less => Symbol::L,
            Ordering::Greater => Symbol::R,
            Ordering::Equal => Symbol::Locus,
        }
    }

    pub fn as_char(self) -> char {
        match self {
            Symbol::L => 'L',
            Symbol::R => 'R',
            Symbol::Locus => '*',
            Symbol::Escape => '!',
        }
    }

    pub fn from_char(c: char) -> Option<Symbol> {
        Some(match c {
            'L' => Symbol::L,
            'R' => Symbol::R,
            '*' => Symbol::Locus,
            '!' => Symbol::Escape,
            _ => return None,
        })
    }

    pub fn is_marker(self) -> bool {
        matches!(self, Symbol::Locus | Symbol::Escape)
    }

    fn rank(self) -> u8 {
        match self {
            Symbol::L => 0,
            Symbol::Locus => 1,
            Symbol::R => 2,
            Symbol::Escape => 3,
        }
    }
}

/// Symbol string, rendered with `*` for a locus hit and `!` for an escape.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Default)]
pub struct Itinerary(pub Vec<Symbol>);

impl Itinerary {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terminated(&self) -> bool {
        self.0.last().is_some_and(|s| s.is_marker())
    }

    pub fn parse(text: &str) -> Result<Itinerary> {
        text.chars()
            .filter(|c| !c.is_whitespace())
            .map(|c| Symbol::from_char(c).ok_or_else(|| Error::param("itinerary", format!("unknown symbol `{c}`"))))
            .collect::<Result<Vec<_>>>()
            .map(Itinerary)
    }
}

impl fmt::Display for Itinerary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.iter().try_for_each(|s| write!(f, "{}", s.as_char()))
    }
}

impl Serialize for Itinerary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Itinerary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Itinerary::parse(&s).map_err(serde::de::Error::custom)
    }
}

/// Itinerary of `y0` of length at most `n` in the chosen arithmetic.
pub fn itinerary_with<S: Scalar>(g: &IntervalMap1D, y0: S, n: usize) -> Itinerary {
    let mut out = Vec::with_capacity(n);
    for y in orbit(g, y0, n) {
        let s = Symbol::of(y);
        out.push(s);
        if s.is_marker() {
            break;
        }
    }
    Itinerary(out)
}

/// Itinerary of `y0`, iterated in double-double arithmetic.
pub fn itinerary(g: &IntervalMap1D, y0: f64, n: usize) -> Itinerary {
    itinerary_with(g, Dd::from_f64(y0), n)
}

/// Itinerary of the one-sided critical orbit starting at `G(0±)`.
pub fn kneading_sequence(g: &IntervalMap1D, side: Side, n: usize) -> Result<Itinerary> {
    if n == 0 {
        return Err(Error::param("n", "must be at least 1"));
    }
    Ok(itinerary_with(g, g.branch(side, Dd::ZERO), n))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KneadingInvariant {
    #[serde(rename = "plus_sequence")]
    pub plus: Itinerary,
    #[serde(rename = "minus_sequence")]
    pub minus: Itinerary,
    /// Configured length.
    pub n: usize,
    pub map: String,
    pub increasing: [bool; 2],
    pub inf_derivative: f64,
}

impl KneadingInvariant {
    pub fn of(g: &IntervalMap1D, n: usize) -> Result<Self> {
        Ok(KneadingInvariant {
            plus: kneading_sequence(g, Side::Plus, n)?,
            minus: kneading_sequence(g, Side::Minus, n)?,
            n,
            map: g.label.clone(),
            increasing: g.increasing,
            inf_derivative: g.inf_derivative,
        })
    }

    pub fn sequence(&self, side: Side) -> &Itinerary {
        match side {
            Side::Plus => &self.plus,
            Side::Minus => &self.minus,
        }
    }
}

impl fmt::Display for KneadingInvariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "+ : {}", self.plus)?;
        writeln!(f, "− : {}", self.minus)
    }
}

/// Order of itineraries of a map whose branch orientations are `increasing`:
/// the first differing symbol decides (`L < * < R < !`), reversed once for
/// every earlier symbol that lies on an orientation-reversing branch.
pub fn twisted_cmp(a: &Itinerary, b: &Itinerary, increasing: [bool; 2]) -> Ordering {
    let mut flipped = false;
    for (x, y) in a.0.iter().zip(&b.0) {
        if x != y {
            let o = x.rank().cmp(&y.rank());
            return if flipped { o.reverse() } else { o };
        }
        match x {
            Symbol::L if !increasing[0] => flipped = !flipped,
            Symbol::R if !increasing[1] => flipped = !flipped,
            Symbol::Locus | Symbol::Escape => return Ordering::Equal,
            _ => {}
        }
    }
    a.len().cmp(&b.len())
}

fn first_difference(a: &Itinerary, b: &Itinerary) -> Option<usize> {
    let common = a.len().min(b.len());
    (0..common)
        .find(|&i| a.0[i] != b.0[i])
        .or(if a.len() != b.len() { Some(common) } else { None })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SideComparison {
    /// First index at which the sequences differ.
    pub differ_at: Option<usize>,
    /// Order of the first sequence relative to the second.
    #[serde(with = "ordering_serde")]
    pub order: Ordering,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct KneadingComparison {
    pub plus: SideComparison,
    pub minus: SideComparison,
}

impl KneadingComparison {
    pub fn is_equal(&self) -> bool {
        self.plus.differ_at.is_none() && self.minus.differ_at.is_none()
    }

    /// Smallest index at which either sequence differs.
    pub fn first_difference(&self) -> Option<usize> {
        match (self.plus.differ_at, self.minus.differ_at) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

impl fmt::Display for KneadingComparison {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_equal() {
            return write!(f, "equal");
        }
        let side = |c: &SideComparison| match c.differ_at {
            Some(i) => format!("differ at {i}"),
            None => "equal".to_string(),
        };
        write!(f, "+ : {}, − : {}", side(&self.plus), side(&self.minus))
    }
}

/// Compares two invariants of equal configured length side by side. The
/// order uses the branch orientations of `k1`.
pub fn compare_kneading(k1: &KneadingInvariant, k2: &KneadingInvariant) -> Result<KneadingComparison> {
    if k1.n != k2.n {
        return Err(Error::Precondition(format!(
            "kneading lengths differ ({} vs {})",
            k1.n, k2.n
        )));
    }
    let side = |a: &Itinerary, b: &Itinerary| SideComparison {
        differ_at: first_difference(a, b),
        order: twisted_cmp(a, b, k1.increasing),
    };
    Ok(KneadingComparison {
        plus: side(&k1.plus, &k2.plus),
        minus: side(&k1.minus, &k2.minus),
    })
}

mod ordering_serde {
    use std::cmp::Ordering;

    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(o: &Ordering, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(match o {
            Ordering::Less => "less",
            Ordering::Equal => "equal",
            Ordering::Greater => "greater",
        })
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Ordering, D::Error> {
        match String::deserialize(d)?.as_str() {
            "less" => Ok(Ordering::Less),
            "equal" => Ok(Ordering::Equal),
            "greater" => Ok(Ordering::Greater),
            other => Err(serde::de::Error::custom(format!("unknown ordering `{other}`"))),
        }
    }
}
