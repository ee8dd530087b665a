#![no_main]

use libfuzzer_sys::fuzz_target;
use varmech_cli::Table;

fuzz_target!(|data: &[u8]| {
    if let Ok(table) = Table::read(data) {
        // Whatever was accepted must survive a write/read cycle.
        let back = Table::read(table.to_csv_string().as_bytes()).expect("written table reads back");
        assert_eq!(back.header.len(), table.header.len());
        assert_eq!(back.rows.len(), table.rows.len());
    }
});
