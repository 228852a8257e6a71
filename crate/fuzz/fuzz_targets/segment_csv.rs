#![no_main]

use libfuzzer_sys::fuzz_target;
use sddpde::HistorySegment;

// Segment CSV parsing must reject malformed input and round-trip anything
// it accepts.
fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(seg) = HistorySegment::from_csv_str(text) {
        let serialized = seg.to_csv();
        let back = HistorySegment::from_csv_str(&serialized)
            .expect("serializer output must parse back");
        assert_eq!(seg.grid(), back.grid());
        assert_eq!(seg.node_values(), back.node_values());
        assert_eq!(seg.node_derivs(), back.node_derivs());
    }
});
