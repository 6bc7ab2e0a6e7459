//! Stride prefetcher model: per-page stream detection over demand misses,
//! bounded stride, page-boundary clipping and a hard cap on the number of
//! streams that ever issue prefetches in one execution.

use crate::geometry::CacheGeometry;
use std::collections::HashMap;

/// Base prefetch count as a function of the number of instructions the
/// prefetcher observes between the last two stream misses. Sampled points
/// only; everything beyond the sampled range falls back to the base count.
pub fn base_count(gap: u64) -> u64 {
    match gap {
        3 => 4,
        4 => 7,
        _ => 3,
    }
}

/// Highest gap value the count function has been characterized for.
pub const TESTED_GAP_MAX: u64 = 10;

/// Maximum absolute line stride a stream may have.
pub const DELTA_MAX: i64 = 4;

#[derive(Debug, Clone)]
struct PageTracker {
    last_line: u64,
    prev_delta: Option<i64>,
    /// Visible-instruction counter value at the last miss.
    last_visible: u64,
    /// Set when this page already allocated a stream.
    allocated: bool,
}

#[derive(Debug, Clone)]
struct Stream {
    stride: i64,
    /// Next demand line that counts as a stream continuation.
    expected: u64,
    /// Last line issued by this stream.
    frontier: u64,
    /// Demand accesses matched so far (detection misses included).
    matches: u64,
    base_was_three: bool,
    bumped: bool,
    page: u64,
}

pub struct Prefetcher {
    trackers: HashMap<u64, PageTracker>,
    streams: Vec<Stream>,
    /// Streams allocated since the last reset; capped.
    allocations: usize,
    stream_cap: usize,
}

/// Lines to insert as prefetches, in issue order.
pub type IssueList = Vec<u64>;

impl Prefetcher {
    pub fn new(stream_cap: usize) -> Self {
        Prefetcher {
            trackers: HashMap::new(),
            streams: Vec::new(),
            allocations: 0,
            stream_cap,
        }
    }

    pub fn clear(&mut self) {
        self.trackers.clear();
        self.streams.clear();
        self.allocations = 0;
    }

    pub fn streams_allocated(&self) -> usize {
        self.allocations
    }

    /// Feed a demand access. `visible` is the running count of instructions
    /// the prefetcher observes (cache-hit loads excluded). Returns lines to
    /// prefetch.
    pub fn on_demand_access(
        &mut self,
        geom: &CacheGeometry,
        line: u64,
        hit: bool,
        visible: u64,
    ) -> IssueList {
        let mut issues = Vec::new();

        // continuation matching is hit-agnostic once a stream is live
        for s in &mut self.streams {
            if line == s.expected {
                s.matches += 1;
                s.expected = offset_line(s.expected, s.stride);
                if s.matches == 5 && s.base_was_three && !s.bumped {
                    s.bumped = true;
                    let next = offset_line(s.frontier, s.stride);
                    if geom.page_of_line(next) == s.page && line_in_range(geom, next) {
                        s.frontier = next;
                        issues.push(next);
                    }
                }
            }
        }

        if hit {
            // the prefetcher only monitors cache misses
            return issues;
        }

        let page = geom.page_of_line(line);
        match self.trackers.get_mut(&page) {
            None => {
                self.trackers.insert(
                    page,
                    PageTracker {
                        last_line: line,
                        prev_delta: None,
                        last_visible: visible,
                        allocated: false,
                    },
                );
            }
            Some(t) => {
                let delta = line as i64 - t.last_line as i64;
                let stride_ok = delta != 0 && delta.abs() <= DELTA_MAX;
                let equal_strides = t.prev_delta == Some(delta);
                if equal_strides && stride_ok && !t.allocated {
                    // third equal-stride miss in this page: allocate
                    let gap = visible.saturating_sub(t.last_visible).saturating_sub(1);
                    t.allocated = true;
                    t.prev_delta = Some(delta);
                    t.last_line = line;
                    t.last_visible = visible;
                    if self.allocations < self.stream_cap {
                        self.allocations += 1;
                        let count = base_count(gap);
                        let mut frontier = line;
                        let mut issued_any = false;
                        for _ in 0..count {
                            let next = offset_line(frontier, delta);
                            if geom.page_of_line(next) != page || !line_in_range(geom, next) {
                                break; // never cross the trigger page
                            }
                            frontier = next;
                            issues.push(next);
                            issued_any = true;
                        }
                        let _ = issued_any;
                        self.streams.push(Stream {
                            stride: delta,
                            expected: offset_line(line, delta),
                            frontier,
                            matches: 3,
                            base_was_three: count == 3,
                            bumped: false,
                            page,
                        });
                    }
                } else {
                    t.prev_delta = if stride_ok { Some(delta) } else { None };
                    t.last_line = line;
                    t.last_visible = visible;
                }
            }
        }
        issues
    }
}

fn offset_line(line: u64, delta: i64) -> u64 {
    // negative results map to a sentinel no real line can match
    (line as i64).checked_add(delta).map_or(u64::MAX, |v| {
        if v < 0 {
            u64::MAX
        } else {
            v as u64
        }
    })
}

fn line_in_range(geom: &CacheGeometry, line: u64) -> bool {
    let max_line = 1u64 << (geom.addr_bits() - geom.field_range(crate::geometry::Field::Set).lo);
    line < max_line
}
