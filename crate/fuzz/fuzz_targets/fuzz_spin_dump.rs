//! Binary spin-dump decoder: no panics, and canonical round trip (padding
//! bits are rejected rather than silently dropped).

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((graph, spins)) = ea_core::io::spins_from_bytes(data) {
        let reencoded =
            ea_core::io::spins_to_bytes(&graph, &spins).expect("shapes match by construction");
        assert_eq!(reencoded, data, "spin dump round trip not canonical");
    }
});
