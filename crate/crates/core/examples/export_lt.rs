//! Print a built-in leakage template as `.lt.json` on stdout.
//!
//! ```text
//! cargo run --example export_lt -- prefetch   > prefetch.lt.json
//! cargo run --example export_lt -- previction > previction.lt.json
//! cargo run --example export_lt -- eviction   > eviction.lt.json
//! ```

use plumber_core::geometry::CacheGeometry;
use plumber_core::lt::serialize_lt;
use plumber_core::scenarios::{eviction_lt, prefetch_lt, previction_lt};

fn main() {
    let which = std::env::args().nth(1).unwrap_or_else(|| "prefetch".into());
    let geom = CacheGeometry::default();
    let lt = match which.as_str() {
        "prefetch" => prefetch_lt(&geom),
        "previction" => previction_lt(&geom),
        "eviction" => eviction_lt(&geom),
        other => {
            eprintln!("unknown template `{other}`; expected prefetch, previction or eviction");
            std::process::exit(2);
        }
    };
    let bytes = serialize_lt(&lt);
    print!("{}", String::from_utf8(bytes).expect("templates are utf-8"));
}
