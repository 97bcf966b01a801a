//! Edge-set JSON parser against a fixed grid: no panics, indices validated,
//! and accepted sets survive an encode/decode round trip.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    let graph = ea_core::lattice::build_grid(6, 6).expect("fixed grid");
    if let Ok(set) = ea_core::io::edge_set_from_json(&graph, text) {
        let json = ea_core::io::edge_set_to_json(&set);
        let back = ea_core::io::edge_set_from_json(&graph, &json).expect("own output parses");
        assert_eq!(back, set);
        // The human-readable form must render for any valid set.
        let _ = ea_core::io::edge_set_to_vertex_pairs_json(&graph, &set);
    }
});
