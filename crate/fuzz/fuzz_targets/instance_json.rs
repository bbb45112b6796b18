#![no_main]

use libfuzzer_sys::fuzz_target;
use surgsched::instgen::{instance_to_json, parse_instance};

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(inst) = parse_instance(text) {
        let again = parse_instance(&instance_to_json(&inst)).expect("written instance reloads");
        assert_eq!(again.patients.len(), inst.patients.len());
        assert_eq!(again.blocks.len(), inst.blocks.len());
    }
});
