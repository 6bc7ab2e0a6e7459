//! Physical address algebra over a configurable cache geometry.
//!
//! Every other module takes a [`CacheGeometry`] by reference and extracts
//! address fields through it; bit positions are never hard-coded elsewhere.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Inclusive bit range `[lo, hi]` within a physical address.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BitRange {
    pub lo: u32,
    pub hi: u32,
}

impl BitRange {
    pub fn width(&self) -> u32 {
        self.hi - self.lo + 1
    }

    /// Number of representable values for this range.
    pub fn value_count(&self) -> u64 {
        1u64 << self.width()
    }

    pub fn slice(&self, value: u64) -> u64 {
        (value >> self.lo) & mask(self.width())
    }
}

fn mask(bits: u32) -> u64 {
    if bits >= 64 {
        u64::MAX
    } else {
        (1u64 << bits) - 1
    }
}

/// Address fields derivable from a geometry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Field {
    Offset,
    Set,
    Tag,
    Word,
    Bus,
    Page,
}

impl Field {
    pub const ALL: [Field; 6] = [
        Field::Offset,
        Field::Set,
        Field::Tag,
        Field::Word,
        Field::Bus,
        Field::Page,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Field::Offset => "offset",
            Field::Set => "set",
            Field::Tag => "tag",
            Field::Word => "word",
            Field::Bus => "bus",
            Field::Page => "page",
        }
    }
}

impl std::str::FromStr for Field {
    type Err = GeometryError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "offset" => Ok(Field::Offset),
            "set" => Ok(Field::Set),
            "tag" => Ok(Field::Tag),
            "word" => Ok(Field::Word),
            "bus" => Ok(Field::Bus),
            "page" => Ok(Field::Page),
            other => Err(GeometryError::UnknownField(other.to_string())),
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum GeometryError {
    #[error("{name} must be a power of two, got {value}")]
    NotPowerOfTwo { name: &'static str, value: u64 },
    #[error("{name} must be positive")]
    Zero { name: &'static str },
    #[error("bus size {bus} must divide line size {line}")]
    BusLineMismatch { bus: u64, line: u64 },
    #[error("address width {addr_bits} too small for tag range starting at bit {tag_lo}")]
    AddrBitsTooSmall { addr_bits: u32, tag_lo: u32 },
    #[error("{field} component {value:#x} exceeds its {width}-bit range")]
    ComponentOutOfRange {
        field: &'static str,
        value: u64,
        width: u32,
    },
    #[error("unknown field `{0}`")]
    UnknownField(String),
}

/// A physical address, `addr_bits` wide. Values are masked on construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct PhysAddr(pub u64);

impl PhysAddr {
    pub fn value(&self) -> u64 {
        self.0
    }
}

impl std::fmt::LowerHex for PhysAddr {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        std::fmt::LowerHex::fmt(&self.0, f)
    }
}

/// Cache geometry with derived field bit ranges.
///
/// The default reproduces a Cortex-A53-like L1D: 64 B lines, 128 sets,
/// 4 ways, 16 B bus, 4 KiB pages, 32 address bits.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GeometryParams", into = "GeometryParams")]
pub struct CacheGeometry {
    line_size: u64,
    num_sets: u64,
    associativity: usize,
    bus_size: u64,
    page_size: u64,
    addr_bits: u32,
    offset_range: BitRangeRepr,
    set_range: BitRangeRepr,
    tag_range: BitRangeRepr,
    word_range: BitRangeRepr,
    bus_range: BitRangeRepr,
    page_range: BitRangeRepr,
}

// serde helper so geometry round-trips from its defining parameters only
#[derive(Serialize, Deserialize)]
struct GeometryParams {
    line_size: u64,
    num_sets: u64,
    associativity: usize,
    bus_size: u64,
    page_size: u64,
    addr_bits: u32,
}

impl TryFrom<GeometryParams> for CacheGeometry {
    type Error = GeometryError;
    fn try_from(p: GeometryParams) -> Result<Self, Self::Error> {
        CacheGeometry::new(
            p.line_size,
            p.num_sets,
            p.associativity,
            p.bus_size,
            p.page_size,
            p.addr_bits,
        )
    }
}

impl From<CacheGeometry> for GeometryParams {
    fn from(g: CacheGeometry) -> Self {
        GeometryParams {
            line_size: g.line_size,
            num_sets: g.num_sets,
            associativity: g.associativity,
            bus_size: g.bus_size,
            page_size: g.page_size,
            addr_bits: g.addr_bits,
        }
    }
}

type BitRangeRepr = (u32, u32);

fn range(lo: u32, hi: u32) -> BitRange {
    BitRange { lo, hi }
}

impl Default for CacheGeometry {
    fn default() -> Self {
        CacheGeometry::new(64, 128, 4, 16, 4096, 32).expect("default geometry is valid")
    }
}

impl CacheGeometry {
    pub fn new(
        line_size: u64,
        num_sets: u64,
        associativity: usize,
        bus_size: u64,
        page_size: u64,
        addr_bits: u32,
    ) -> Result<Self, GeometryError> {
        let pow2 = |name: &'static str, v: u64| -> Result<u32, GeometryError> {
            if v == 0 {
                return Err(GeometryError::Zero { name });
            }
            if !v.is_power_of_two() {
                return Err(GeometryError::NotPowerOfTwo { name, value: v });
            }
            Ok(v.trailing_zeros())
        };
        let line_bits = pow2("line_size_bytes", line_size)?;
        let set_bits = pow2("num_sets", num_sets)?;
        let bus_bits = pow2("bus_size_bytes", bus_size)?;
        let page_bits = pow2("page_size_bytes", page_size)?;
        if associativity == 0 {
            return Err(GeometryError::Zero {
                name: "associativity",
            });
        }
        if bus_size > line_size {
            return Err(GeometryError::BusLineMismatch {
                bus: bus_size,
                line: line_size,
            });
        }
        let tag_lo = line_bits + set_bits;
        if addr_bits <= tag_lo || addr_bits > 64 {
            return Err(GeometryError::AddrBitsTooSmall { addr_bits, tag_lo });
        }
        Ok(CacheGeometry {
            line_size,
            num_sets,
            associativity,
            bus_size,
            page_size,
            addr_bits,
            offset_range: (0, line_bits - 1),
            set_range: (line_bits, line_bits + set_bits - 1),
            tag_range: (tag_lo, addr_bits - 1),
            word_range: (2, line_bits - 1),
            bus_range: (bus_bits, line_bits - 1),
            page_range: (page_bits, addr_bits - 1),
        })
    }

    pub fn line_size(&self) -> u64 {
        self.line_size
    }
    pub fn num_sets(&self) -> u64 {
        self.num_sets
    }
    pub fn associativity(&self) -> usize {
        self.associativity
    }
    pub fn bus_size(&self) -> u64 {
        self.bus_size
    }
    pub fn page_size(&self) -> u64 {
        self.page_size
    }
    pub fn addr_bits(&self) -> u32 {
        self.addr_bits
    }

    pub fn field_range(&self, f: Field) -> BitRange {
        let (lo, hi) = match f {
            Field::Offset => self.offset_range,
            Field::Set => self.set_range,
            Field::Tag => self.tag_range,
            Field::Word => self.word_range,
            Field::Bus => self.bus_range,
            Field::Page => self.page_range,
        };
        range(lo, hi)
    }

    /// Build an address from a raw value, masking to `addr_bits`.
    pub fn addr(&self, value: u64) -> PhysAddr {
        PhysAddr(value & mask(self.addr_bits))
    }

    /// Bits of the field's derived range, right-aligned.
    pub fn extract_field(&self, a: PhysAddr, f: Field) -> u64 {
        self.field_range(f).slice(a.0)
    }

    /// True iff `extract_field` agrees across all given addresses.
    /// Covers the sameTag / sameSet / samePage predicates.
    pub fn same_field(&self, f: Field, addrs: &[PhysAddr]) -> bool {
        debug_assert!(addrs.len() >= 2);
        let mut it = addrs.iter();
        let first = match it.next() {
            Some(a) => self.extract_field(*a, f),
            None => return true,
        };
        it.all(|a| self.extract_field(*a, f) == first)
    }

    /// Inverse of extraction for the (tag, set, offset) partition.
    pub fn compose_addr(&self, tag: u64, set: u64, offset: u64) -> Result<PhysAddr, GeometryError> {
        let check = |field: &'static str, value: u64, r: BitRange| -> Result<(), GeometryError> {
            if value > mask(r.width()) {
                Err(GeometryError::ComponentOutOfRange {
                    field,
                    value,
                    width: r.width(),
                })
            } else {
                Ok(())
            }
        };
        let tr = self.field_range(Field::Tag);
        let sr = self.field_range(Field::Set);
        let or = self.field_range(Field::Offset);
        check("tag", tag, tr)?;
        check("set", set, sr)?;
        check("offset", offset, or)?;
        Ok(PhysAddr((tag << tr.lo) | (set << sr.lo) | offset))
    }

    /// Line address (address divided by the line size).
    pub fn line_of(&self, a: PhysAddr) -> u64 {
        a.0 >> self.field_range(Field::Set).lo
    }

    /// Address of the first byte of a line address.
    pub fn line_base(&self, line: u64) -> PhysAddr {
        self.addr(line << self.field_range(Field::Set).lo)
    }

    pub fn set_of_line(&self, line: u64) -> u64 {
        line % self.num_sets
    }

    pub fn tag_of_line(&self, line: u64) -> u64 {
        line / self.num_sets
    }

    /// Page index of a line address.
    pub fn page_of_line(&self, line: u64) -> u64 {
        line / self.lines_per_page()
    }

    pub fn lines_per_page(&self) -> u64 {
        self.page_size / self.line_size
    }

    /// Words per line (the word field's value count).
    pub fn words_per_line(&self) -> u64 {
        self.field_range(Field::Word).value_count()
    }

    pub fn tag_count(&self) -> u64 {
        self.field_range(Field::Tag).value_count()
    }

    /// Byte offset corresponding to a word-field value.
    pub fn word_to_offset(&self, word: u64) -> u64 {
        word << self.field_range(Field::Word).lo
    }
}
