#![no_main]

use gfnoma::evaluation::parse_csv;
use gfnoma::evaluation::report::csv_string;
use libfuzzer_sys::fuzz_target;

fuzz_target!(|data: &[u8]| {
    let Ok(text) = std::str::from_utf8(data) else {
        return;
    };
    if let Ok(rows) = parse_csv(text) {
        let emitted = csv_string(&rows);
        let reparsed = parse_csv(&emitted).expect("emitted CSV parses");
        assert_eq!(csv_string(&reparsed), emitted);
    }
});
