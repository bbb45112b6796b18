#![no_main]

use std::sync::OnceLock;

use libfuzzer_sys::fuzz_target;
use surgsched::instgen::parse_instance;
use surgsched::solution::parse_solution;
use surgsched::Instance;

fn instance() -> &'static Instance {
    static INST: OnceLock<Instance> = OnceLock::new();
    INST.get_or_init(|| parse_instance(include_str!("../corpus/instance_json/t1.json")).expect("seed instance"))
}

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else { return };
    if let Ok(sol) = parse_solution(text) {
        let again = parse_solution(&sol.to_json()).expect("written solution reloads");
        assert_eq!(again, sol);
        let _ = sol.validate(instance());
    }
});
