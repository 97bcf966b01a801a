//! Binary coupling-dump decoder: must never panic on arbitrary bytes, and
//! accepted dumps must re-encode to the identical byte string.

#![no_main]

use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    if let Ok((graph, couplings)) = ea_core::io::couplings_from_bytes(data) {
        let reencoded =
            ea_core::io::couplings_to_bytes(&graph, &couplings).expect("shapes match by construction");
        assert_eq!(reencoded, data, "coupling dump round trip not canonical");
    }
});
