//! Replay-metadata parser: untrusted run_meta.json contents must either
//! deserialize into validated metadata or fail cleanly.

#![no_main]

use ea_cli::config::RunMetadata;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(meta) = serde_json::from_str::<RunMetadata>(text) {
        // Replay validates the embedded config before running it.
        let _ = meta.config.validate();
        let _ = serde_json::to_string(&meta);
    }
});
